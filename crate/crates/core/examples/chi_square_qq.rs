// Whiten simulated (T1, T2) pairs and compare the TS statistic with the
// chi-square(2) law through Q-Q points and the KS distance.

use spiked_lss::inference::{qq_report, whiten, Reference};
use spiked_lss::innovations::InnovationDist;
use spiked_lss::moments::moment_set;
use spiked_lss::population::PopulationModel;
use spiked_lss::statistics::{replicate, SampleConfig};

pub fn run_example() -> spiked_lss::Result<()> {
    let (p, n) = (10, 60);
    let model =
        PopulationModel::diagonal(&(1..=p).map(|i| 1.0 + i as f64 / 5.0).collect::<Vec<_>>())?;
    let dist = InnovationDist::standard_normal();
    let ms = moment_set(&model.traces, n, 0.0, false)?;
    let ts = (0..400)
        .map(|rep| {
            let r = replicate(&SampleConfig {
                model: &model,
                dist: &dist,
                n,
                replication_index: rep,
                master_seed: 5,
                max_power: 2,
                centered: false,
            })?;
            Ok(whiten(r.t[0], r.t[1], &ms)?.ts)
        })
        .collect::<spiked_lss::Result<Vec<_>>>()?;
    let qq = qq_report(&ts, Reference::Chi2Df2, 9)?;
    for ((p, qt), qe) in qq.probs.iter().zip(&qq.q_theoretical).zip(&qq.q_empirical) {
        println!("p={p:.3}  chi2_2 {qt:7.3}  empirical {qe:7.3}");
    }
    println!("KS = {:.4} over {} replications", qq.ks, qq.reps);
    Ok(())
}

#[allow(dead_code)]
fn main() -> spiked_lss::Result<()> {
    run_example()
}
