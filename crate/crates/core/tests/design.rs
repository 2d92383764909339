mod common;

use bed::baselines::greedy_bottom_up;
use bed::criteria::{eval_subset, Criterion};
use bed::dataset::{synth_lowrank, Prior};
use bed::relax::{self, Method, RelaxConfig};
use bed::rng::{derive_rng, seeded};
use bed::selector::{select_relaxed, select_uniform, Acceptance, PadRule, SelectOptions};
use bed::{labels, DesignMatrix};
use common::*;
use nalgebra::DMatrix;

#[test]
fn relaxation_bounds_every_subset() {
    for seed in 0..6 {
        let mut r = seeded(100 + seed);
        let n = 12;
        let x = random_matrix(&mut r, n, 3);
        let a = DMatrix::identity(3, 3) * 0.1;
        let xm = DesignMatrix::from_matrix(x.clone()).unwrap();
        let prior = Prior::scaled_identity(3, 0.1);
        for k in [3, 5, 8] {
            for method in [Method::MirrorDescent, Method::ProjectedGradient] {
                let cfg = RelaxConfig { method, ..Default::default() };
                let sol = relax::solve(&xm, &prior, &Criterion::A, k, &cfg).unwrap();
                let opt = brute_force_a_opt(&x, &a, k);
                assert!(sol.objective <= opt + 1e-8, "seed {seed} k {k} {method:?}");
                let direct = trace_inv(&(weighted_gram(&x, &sol.w) + &a));
                assert!((direct - sol.objective).abs() <= 1e-10 * direct);
            }
        }
    }
}

#[test]
fn relaxed_selection_near_optimum() {
    let mut r = seeded(200);
    let x = random_matrix(&mut r, 10, 2);
    let a = DMatrix::identity(2, 2) * 0.05;
    let xm = DesignMatrix::from_matrix(x.clone()).unwrap();
    let prior = Prior::scaled_identity(2, 0.05);
    let opt4 = brute_force_a_opt(&x, &a, 4);
    let opt8 = brute_force_a_opt(&x, &a, 8);
    let sol = relax::solve(&xm, &prior, &Criterion::A, 4, &RelaxConfig::default()).unwrap();
    assert!(sol.objective <= opt4 + 1e-4);
    let mut rr = derive_rng(1, labels!["relaxed"]);
    let res4 = select_relaxed(&xm, &prior, &Criterion::A, 4, &mut rr, &RelaxConfig::default(), &SelectOptions::default()).unwrap();
    assert!(res4.value >= sol.objective - 1e-8);
    let res8 = select_relaxed(&xm, &prior, &Criterion::A, 8, &mut rr, &RelaxConfig::default(), &SelectOptions::default()).unwrap();
    assert!(res8.value <= 1.5 * opt8);
}

#[test]
fn identity_covariance_accepts_within_budget() {
    let (d, n) = (8, 400);
    let x = synth_lowrank(d, d, 0.5, n, 3).unwrap();
    let prior = Prior::scaled_identity(d, 0.05);
    let sigma = x.subset_covariance(&(0..n).collect::<Vec<_>>());
    let k = (1..=n)
        .find(|&k| k as f64 >= 4.0 * bed::criteria::scaled_effective_dim(&sigma, &prior.a, k, n).unwrap().value())
        .unwrap();
    let mut accepted = 0;
    for seed in 0..25 {
        let mut rr = derive_rng(seed, labels!["identity"]);
        let res = select_uniform(&x, &prior, &Criterion::A, k, &mut rr, &SelectOptions::default()).unwrap();
        let info = res.sampling.as_ref().unwrap();
        let expected = bed::criteria::scaled_effective_dim(&sigma, &prior.a, k, n).unwrap().value();
        assert!((info.d_w - expected).abs() < 1e-10);
        assert!(info.guarantee_regime);
        accepted += usize::from(info.accepted_by == Acceptance::BoundAccept);
    }
    assert!(accepted >= 24, "{accepted}/25");
}

#[test]
fn full_uniform_selection_is_exact() {
    let mut r = seeded(300);
    let x = random_design(&mut r, 9, 2);
    let prior = Prior::scaled_identity(2, 0.1);
    let res = select_uniform(&x, &prior, &Criterion::A, 9, &mut r, &SelectOptions::default()).unwrap();
    assert_eq!(res.subset, (0..9).collect::<Vec<_>>());
    assert_eq!(res.value, eval_subset(&Criterion::A, &x, &res.subset, &prior));
}

#[test]
fn greedy_padding_beats_random_padding_on_average() {
    let mut r = seeded(400);
    let x = random_design(&mut r, 80, 6);
    let prior = Prior::scaled_identity(6, 0.01);
    let mean = |pad| {
        let opts = SelectOptions { pad, ..Default::default() };
        (0..20u64)
            .map(|s| {
                let mut rr = derive_rng(s, labels!["pad"]);
                select_uniform(&x, &prior, &Criterion::A, 12, &mut rr, &opts).unwrap().value
            })
            .sum::<f64>()
            / 20.0
    };
    assert!(mean(PadRule::Greedy) <= mean(PadRule::Random));
}

#[test]
fn greedy_is_competitive_with_sampling() {
    let mut r = seeded(500);
    let x = random_design(&mut r, 150, 5);
    let prior = Prior::scaled_identity(5, 1.0 / 150.0);
    let k = 15;
    let g = greedy_bottom_up(&x, &prior, &Criterion::A, k).unwrap();
    let mut vals: Vec<f64> = (0..25)
        .map(|_| {
            let s = bed::baselines::uniform_subset(150, k, &mut r).unwrap();
            eval_subset(&Criterion::A, &x, &s, &prior)
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    assert!(g.value <= vals[12]);
}
