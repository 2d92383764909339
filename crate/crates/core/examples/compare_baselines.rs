//! Runs greedy, uniform and predictive-length baselines next to the DPP
//! selector on the same data.

use bed::baselines::{greedy_bottom_up, predictive_length, uniform_subset, LengthWeight};
use bed::criteria::eval_subset;
use bed::dataset::{synth_lowrank, Prior};
use bed::rng::seeded;
use bed::selector::{select_uniform, SelectOptions};
use bed::Criterion;

fn main() -> bed::Result<()> {
    let (d, n) = (8, 400);
    let x = synth_lowrank(d, 4, 0.1, n, 2)?.normalized();
    let prior = Prior::scaled_identity(d, 1.0 / n as f64);
    let crit = Criterion::A;
    let mut rng = seeded(9);
    let trials = 15;

    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "k", "greedy", "rdpp", "uniform", "plen");
    for k in [8, 16, 24, 32] {
        let greedy = greedy_bottom_up(&x, &prior, &crit, k)?.value;
        let mut rdpp = 0.0;
        let mut unif = 0.0;
        let mut plen = 0.0;
        for _ in 0..trials {
            rdpp += select_uniform(&x, &prior, &crit, k, &mut rng, &SelectOptions::default())?.value;
            unif += eval_subset(&crit, &x, &uniform_subset(n, k, &mut rng)?, &prior);
            plen += eval_subset(&crit, &x, &predictive_length(&x, k, LengthWeight::Norm, &mut rng)?, &prior);
        }
        let t = trials as f64;
        println!("{k:>4} {greedy:>10.4} {:>10.4} {:>10.4} {:>10.4}", rdpp / t, unif / t, plen / t);
    }
    Ok(())
}
