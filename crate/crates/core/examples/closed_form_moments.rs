// Closed-form means and covariance of (T1, T2), and the single-spike
// variance limits.

use spiked_lss::moments::{moment_set, single_spike_variance};
use spiked_lss::population::PopulationModel;

pub fn run_example() -> spiked_lss::Result<()> {
    let (p, n) = (200, 400);
    let mut eigs = vec![1.0; p];
    eigs[0] = 25.0;
    let model = PopulationModel::diagonal(&eigs)?;
    let ms = moment_set(&model.traces, n, 1.5, true)?;
    println!("E T1 = {:.4}, E T2 = {:.4}", ms.e_t1, ms.e_t2);
    println!(
        "psi11 = {:.4}, psi12 = {:.4}, psi22 = {:.4}",
        ms.psi11, ms.psi12, ms.psi22
    );
    println!("det Psi = {:.4}", ms.psi().det());
    println!(
        "centered means: {:?}, {:?}",
        ms.e_t1_centered, ms.e_t2_centered
    );

    let c = p as f64 / n as f64;
    for case in 1..=3 {
        let r = single_spike_variance(case, c, 1.5, 0.5)?;
        println!("case {case}: variance {:.4} ({:?})", r.variance, r.scaling);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spiked_lss::Result<()> {
    run_example()
}
