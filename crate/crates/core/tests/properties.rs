mod common;

use approx::assert_relative_eq;
use bed::baselines::{greedy_bottom_up, predictive_length, uniform_subset, LengthWeight};
use bed::criteria::{effective_dim, eval_subset, scaled_effective_dim, Criterion, CriterionKind};
use bed::dataset::{parse_libsvm, write_libsvm, DesignMatrix, Prior};
use bed::rdpp::{enumerate_law, WeightVector};
use bed::relax::project_capped_simplex;
use bed::rng::seeded;
use bed::selector::{select_uniform, SelectOptions};
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn distinct_sorted(s: &[usize], n: usize, k: usize) -> bool {
    s.len() == k && s.windows(2).all(|w| w[0] < w[1]) && s.iter().all(|&i| i < n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_feasible_and_idempotent(v in prop::collection::vec(-5.0..5.0f64, 1..25), frac in 0.0..=1.0f64) {
        let k = (frac * v.len() as f64).round() as usize;
        let w = project_capped_simplex(&v, k);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((w.iter().sum::<f64>() - k as f64).abs() <= 1e-9);
        let again = project_capped_simplex(&w, k);
        for (a, b) in w.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn projection_preserves_order(v in prop::collection::vec(-5.0..5.0f64, 2..20)) {
        let w = project_capped_simplex(&v, 1);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] > v[j] {
                    prop_assert!(w[i] >= w[j]);
                }
            }
        }
    }

    #[test]
    fn law_sums_to_one(seed in any::<u64>(), n in 1usize..8, d in 1usize..4) {
        let mut r = seeded(seed);
        let x = random_design(&mut r, n, d);
        let prior = Prior::scaled_identity(d, r.random_range(0.05..2.0));
        let p = WeightVector::new((0..n).map(|_| r.random_range(0.0..=1.0)).collect()).unwrap();
        let law = enumerate_law(&x, &prior, &p).unwrap();
        prop_assert!((law.total() - 1.0).abs() < 1e-10);
        prop_assert!(law.probs().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn adding_rows_never_hurts(seed in any::<u64>(), kind in 0usize..4) {
        let mut r = seeded(seed);
        let (n, d) = (12, 3);
        let x = random_design(&mut r, n, d);
        let prior = Prior::scaled_identity(d, 0.1).with_c(nalgebra::DVector::from_vec(vec![1.0, -0.5, 2.0]));
        let kind = [CriterionKind::A, CriterionKind::C, CriterionKind::D, CriterionKind::V][kind];
        let crit = Criterion::build(kind, &x, &prior).unwrap();
        let s: Vec<usize> = (0..n).filter(|_| r.random::<bool>()).collect();
        let base = eval_subset(&crit, &x, &s, &prior);
        for i in (0..n).filter(|i| !s.contains(i)) {
            let mut t = s.clone();
            t.push(i);
            prop_assert!(eval_subset(&crit, &x, &t, &prior) <= base * (1.0 + 1e-12));
        }
    }

    #[test]
    fn effective_dimensions_are_ordered(seed in any::<u64>(), n in 4usize..30, d in 1usize..6, k_frac in 0.05..=1.0f64) {
        let mut r = seeded(seed);
        let x = random_design(&mut r, n, d);
        let prior = Prior::scaled_identity(d, r.random_range(0.01..1.0));
        let sigma = x.subset_covariance(&(0..n).collect::<Vec<_>>());
        let k = ((k_frac * n as f64).ceil() as usize).clamp(1, n);
        let full = effective_dim(&sigma, &prior.a).unwrap().value();
        let scaled = scaled_effective_dim(&sigma, &prior.a, k, n).unwrap().value();
        prop_assert!((0.0..=d as f64).contains(&full));
        prop_assert!(scaled <= full + 1e-12);
        let oracle = oracle_deff(&(sigma.as_matrix() * (k as f64 / n as f64)), prior.a.as_matrix());
        assert_relative_eq!(scaled, oracle, max_relative = 1e-10);
    }

    #[test]
    fn baselines_return_distinct_indices(seed in any::<u64>(), n in 1usize..40, k_frac in 0.0..=1.0f64) {
        let k = ((k_frac * n as f64).round() as usize).min(n);
        let mut r = seeded(seed);
        let x = random_design(&mut r, n, 2);
        prop_assert!(distinct_sorted(&uniform_subset(n, k, &mut r).unwrap(), n, k));
        prop_assert!(distinct_sorted(&predictive_length(&x, k, LengthWeight::Norm, &mut r).unwrap(), n, k));
        let g = greedy_bottom_up(&x, &Prior::scaled_identity(2, 0.1), &Criterion::A, k).unwrap();
        prop_assert!(distinct_sorted(&g.subset, n, k));
    }

    #[test]
    fn selected_designs_are_valid(seed in any::<u64>(), n in 8usize..40, k_frac in 0.1..=1.0f64) {
        let k = ((k_frac * n as f64).ceil() as usize).clamp(1, n);
        let mut r = seeded(seed);
        let x = random_design(&mut r, n, 3);
        let prior = Prior::scaled_identity(3, 0.1);
        let res = select_uniform(&x, &prior, &Criterion::A, k, &mut r, &SelectOptions { max_attempts: 200, ..Default::default() });
        if let Ok(res) = res {
            prop_assert!(distinct_sorted(&res.subset, n, k));
            assert_relative_eq!(res.value, eval_subset(&Criterion::A, &x, &res.subset, &prior), max_relative = 1e-12);
        }
    }

    #[test]
    fn libsvm_round_trip(rows in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), -1e6..1e6f64], 4), 1..10)) {
        let mut rows = rows;
        rows[0][3] = 1.5;
        let x = DesignMatrix::from_matrix(DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j])).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&x, &mut buf).unwrap();
        let back = parse_libsvm(buf.as_slice()).unwrap();
        prop_assert_eq!(back.as_matrix(), x.as_matrix());
    }
}
