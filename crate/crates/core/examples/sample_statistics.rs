// One replication of the power traces T_k = tr(B_n^k), plain and centered.

use spiked_lss::innovations::InnovationDist;
use spiked_lss::population::PopulationModel;
use spiked_lss::statistics::{replicate, SampleConfig};

pub fn run_example() -> spiked_lss::Result<()> {
    let model = PopulationModel::diagonal(&[9.0, 4.0, 1.0, 1.0, 1.0, 1.0])?;
    let dist = InnovationDist::standardized_gamma(4.0, 0.5)?;
    for rep in 0..3 {
        let r = replicate(&SampleConfig {
            model: &model,
            dist: &dist,
            n: 40,
            replication_index: rep,
            master_seed: 99,
            max_power: 4,
            centered: true,
        })?;
        let (t1c, t2c) = r.t_centered.expect("centered requested");
        println!(
            "rep {rep}: T = [{:.3}, {:.3}, {:.3}, {:.3}]  centered = ({t1c:.3}, {t2c:.3})",
            r.t[0], r.t[1], r.t[2], r.t[3]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spiked_lss::Result<()> {
    run_example()
}
