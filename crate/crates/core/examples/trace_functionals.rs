// Trace functionals of a symmetric matrix: powers, Hadamard traces and the
// full set used by the moment formulas.

use spiked_lss::symmat::{trace_hadamard, trace_power, trace_set, SymMatrix};

pub fn run_example() -> spiked_lss::Result<()> {
    let m = SymMatrix::new(3, vec![2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0])?;
    for k in 1..=4 {
        println!("tr(M^{k}) = {}", trace_power(&m, k)?);
    }
    println!("tr(M o M) = {}", trace_hadamard(&m, &m)?);
    println!("||M||_F^2 = {}", m.frobenius_sq());
    let ts = trace_set(&m);
    println!("{ts:#?}");
    assert!((ts.tr2 - m.frobenius_sq()).abs() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() -> spiked_lss::Result<()> {
    run_example()
}
