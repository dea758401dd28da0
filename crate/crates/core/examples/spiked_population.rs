// Build a spiked population covariance with divergent spikes and a Haar
// rotation, then inspect its spectrum and trace set.

use spiked_lss::population::{build_spectrum, PopulationModel, SpectrumSpec};

pub fn run_example() -> spiked_lss::Result<()> {
    let spec = SpectrumSpec::with_uniform_r(100, 1000, 0.2, 0.1, 7, false)?;
    let eigs = build_spectrum(&spec)?;
    println!(
        "{} spikes, top eigenvalues {:?}",
        spec.spike_count(),
        &eigs[..4]
    );
    println!(
        "bulk range [{:.3}, {:.3}]",
        eigs[eigs.len() - 1],
        eigs[spec.spike_count()]
    );

    let model = PopulationModel::from_spec(&spec, 11)?;
    println!(
        "||Sigma|| = {:.4}, diagonal: {}",
        model.spectral_norm(),
        model.is_diagonal()
    );
    println!(
        "tr(Sigma) = {:.4}, tr(Sigma o Sigma) = {:.4}",
        model.traces.tr1, model.traces.tr_h11
    );
    assert!((model.traces.tr1 - model.eigenvalue_sum()).abs() < 1e-8 * model.traces.tr1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> spiked_lss::Result<()> {
    run_example()
}
