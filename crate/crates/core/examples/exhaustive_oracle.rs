// Exact expectations by enumerating every outcome of a discrete law, used to
// check the quadratic-form identities and the finite-n moments.

use spiked_lss::innovations::InnovationDist;
use spiked_lss::oracle::{
    exact_expectation, verify_finite_n_moments, verify_lemma_a3, EnumerationTask,
};
use spiked_lss::population::PopulationModel;
use spiked_lss::symmat::SymMatrix;

pub fn run_example() -> spiked_lss::Result<()> {
    let dist = InnovationDist::two_point(0.3)?;
    // E (x1 + x2)^4 = 2 mu4 + 6
    let e = exact_expectation(EnumerationTask {
        num_vars: 2,
        dist: &dist,
        statistic: |x: &[f64]| (x[0] + x[1]).powi(4),
    })?;
    println!(
        "E(x1+x2)^4 = {e:.12} vs {:.12}",
        2.0 * dist.profile().mu4 + 6.0
    );

    let t = SymMatrix::new(2, vec![1.0, 0.5, 0.5, -2.0])?;
    let w = SymMatrix::new(2, vec![0.3, 1.0, 1.0, 2.0])?;
    let r = verify_lemma_a3(&t, &w, &dist)?;
    println!(
        "{}: lhs {:.12} rhs {:.12} abs_err {:.1e}",
        r.lemma, r.lhs, r.rhs, r.abs_err
    );

    let model = PopulationModel::diagonal(&[1.0, 2.0])?;
    for r in verify_finite_n_moments(&model, 3, &dist)? {
        let tag = if r.exact { "exact" } else { "leading order" };
        println!(
            "{:<28} {:>12.6} {:>12.6} {:.1e} ({tag})",
            r.lemma, r.lhs, r.rhs, r.abs_err
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spiked_lss::Result<()> {
    run_example()
}
