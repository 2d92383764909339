//! Picks a size-k design with uniform weights k/n and prints the
//! acceptance diagnostics.

use bed::criteria::scaled_effective_dim;
use bed::dataset::{synth_lowrank, Prior};
use bed::rng::seeded;
use bed::selector::{select_uniform, SelectOptions};
use bed::Criterion;

fn main() -> bed::Result<()> {
    let (d, n, k) = (10, 500, 40);
    let x = synth_lowrank(d, 3, 0.05, n, 11)?;
    let prior = Prior::scaled_identity(d, 1.0 / n as f64);
    let sigma = x.subset_covariance(&(0..n).collect::<Vec<_>>());
    println!("scaled effective dimension {:.3}", scaled_effective_dim(&sigma, &prior.a, k, n)?.value());

    let mut rng = seeded(3);
    let res = select_uniform(&x, &prior, &Criterion::A, k, &mut rng, &SelectOptions::default())?;
    let info = res.sampling.as_ref().expect("sampled design");
    println!("subset {:?}", res.subset);
    println!("A value {:.5}", res.value);
    println!("attempts {} ({})", info.attempts, info.accepted_by);
    println!("eps {:.4}, bound factor {:.4}, bound {:.5}", info.eps_used, info.bound_factor, info.bound());
    Ok(())
}
