//! Draws from a regularized DPP and compares empirical inclusion rates with
//! the exact marginal kernel.

use bed::dataset::{synth_lowrank, Prior};
use bed::rdpp::{build_kernel, WeightVector};
use bed::rng::seeded;

fn main() -> bed::Result<()> {
    let x = synth_lowrank(4, 4, 1.0, 40, 7)?;
    let prior = Prior::scaled_identity(4, 0.5);
    let p = WeightVector::uniform(40, 0.2)?;
    let kernel = build_kernel(&x, &prior, &p)?;
    let marginal = kernel.marginal_kernel();

    let mut rng = seeded(1);
    let draws = 20_000;
    let mut hits = vec![0u32; 40];
    let mut total = 0usize;
    for _ in 0..draws {
        let (s, _) = kernel.sample(&mut rng);
        total += s.len();
        for i in s {
            hits[i] += 1;
        }
    }

    println!("expected size {:.3}, observed {:.3}", marginal.trace(), total as f64 / draws as f64);
    println!("{:>4} {:>9} {:>9}", "i", "exact", "observed");
    for i in 0..8 {
        println!("{i:>4} {:>9.4} {:>9.4}", marginal[(i, i)], hits[i] as f64 / draws as f64);
    }
    Ok(())
}
