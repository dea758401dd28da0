use proptest::prelude::*;
use spiked_lss::inference::{chi2_df2_cdf, empirical_quantile, ks_statistic};
use spiked_lss::innovations::InnovationDist;
use spiked_lss::oracle::{exact_expectation, exact_expectations, EnumerationTask};
use spiked_lss::population::PopulationModel;
use spiked_lss::symmat::{trace_power, trace_set, SymMatrix};

fn symmetric(dim: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-3.0f64..3.0, dim * dim).prop_map(move |v| {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                m[i * dim + j] = v[i.min(j) * dim + i.max(j)];
            }
        }
        SymMatrix::new(dim, m).unwrap()
    })
}

proptest! {
    #[test]
    fn second_power_is_frobenius(m in (1usize..7).prop_flat_map(symmetric)) {
        let t2 = trace_power(&m, 2).unwrap();
        let f = m.frobenius_sq();
        prop_assert!((t2 - f).abs() <= 1e-12 * f.max(1.0));
    }

    #[test]
    fn trace_set_scales_homogeneously(m in (1usize..6).prop_flat_map(symmetric), c in 0.1f64..4.0) {
        let a = trace_set(&m);
        let b = trace_set(&m.scaled(c));
        for (x, y, k) in [(a.tr1, b.tr1, 1), (a.tr2, b.tr2, 2), (a.tr3, b.tr3, 3), (a.tr4, b.tr4, 4)] {
            let expect = x * c.powi(k);
            prop_assert!((y - expect).abs() <= 1e-10 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn enumeration_is_linear(prob in 0.05f64..0.95, w in prop::collection::vec(-2.0f64..2.0, 3)) {
        let dist = InnovationDist::two_point(prob).unwrap();
        let both = exact_expectations(&dist, 3, 2, |x, out| {
            out[0] = (w[0] * x[0] + w[1] * x[1]).powi(3);
            out[1] = (x[2] * w[2]).powi(4) * x[0];
        }).unwrap();
        let sum = exact_expectation(EnumerationTask {
            num_vars: 3,
            dist: &dist,
            statistic: |x: &[f64]| (w[0] * x[0] + w[1] * x[1]).powi(3) + (x[2] * w[2]).powi(4) * x[0],
        }).unwrap();
        prop_assert!((sum - both[0] - both[1]).abs() <= 1e-12 * sum.abs().max(1.0));
    }

    #[test]
    fn ks_and_quantiles_are_bounded(mut xs in prop::collection::vec(0.0f64..20.0, 1..200), q in 0.0f64..1.0) {
        xs.sort_by(f64::total_cmp);
        let ks = ks_statistic(&xs, chi2_df2_cdf);
        prop_assert!((0.0..=1.0).contains(&ks));
        let v = empirical_quantile(&xs, q);
        prop_assert!(v >= xs[0] && v <= xs[xs.len() - 1]);
    }

    #[test]
    fn diagonal_model_traces_match_eigenvalues(eigs in prop::collection::vec(0.1f64..10.0, 1..8)) {
        let model = PopulationModel::diagonal(&eigs).unwrap();
        let s: f64 = eigs.iter().sum();
        prop_assert!((model.traces.tr1 - s).abs() <= 1e-12 * s);
        prop_assert!((model.traces.tr2 - model.traces.tr_h11).abs() <= 1e-12 * model.traces.tr2);
    }
}
