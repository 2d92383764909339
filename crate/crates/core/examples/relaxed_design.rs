//! Solves the continuous relaxation for each criterion, then rounds it with
//! the regularized DPP.

use bed::dataset::{synth_lowrank, Prior};
use bed::relax::{self, RelaxConfig};
use bed::rng::derive_rng;
use bed::selector::{select_relaxed, SelectOptions};
use bed::{labels, Criterion, CriterionKind};
use nalgebra::DVector;

fn main() -> bed::Result<()> {
    let (d, n, k) = (6, 200, 18);
    let x = synth_lowrank(d, 2, 0.05, n, 5)?;
    let prior = Prior::scaled_identity(d, 0.01).with_c(DVector::from_element(d, 1.0));
    let cfg = RelaxConfig::default();

    for kind in [CriterionKind::A, CriterionKind::C, CriterionKind::D, CriterionKind::V] {
        let crit = Criterion::build(kind, &x, &prior)?;
        let sol = relax::solve(&x, &prior, &crit, k, &cfg)?;
        let mut rng = derive_rng(0, labels!["relaxed", kind.to_string()]);
        let res = select_relaxed(&x, &prior, &crit, k, &mut rng, &cfg, &SelectOptions::default())?;
        let support = sol.w.iter().filter(|&&w| w > 1e-3).count();
        println!(
            "{kind}: relaxed {:.5} ({} iters, support {support}), design {:.5}, ratio {:.3}",
            sol.objective,
            sol.iters,
            res.value,
            res.value / sol.objective
        );
    }
    Ok(())
}
