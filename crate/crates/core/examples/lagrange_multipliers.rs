//! Solves for the exponential-family multipliers across the energy range of
//! two spins, through the equal-population point where the slope vanishes.

use qensembles::approx::solve_lagrange;
use qensembles::oracle::lagrange_scan_z;
use qensembles::spectrum::identical_spins;

fn main() -> Result<(), qensembles::Error> {
    let spec = identical_spins(2)?;
    println!("{:>6} {:>12} {:>12} {:>14} {:>10} {:>12}", "E", "λ", "μ", "z", "residual", "scan z");
    for energy in [0.1, 0.5, 0.9, 1.0, 1.1, 1.5, 1.9] {
        let sol = solve_lagrange(&spec, energy)?;
        let scan = lagrange_scan_z(spec.eigenvalues(), energy).unwrap_or(f64::INFINITY);
        println!(
            "{energy:>6} {:>12.6} {:>12.6} {:>14.6e} {:>10.1e} {scan:>12.6e}",
            sol.lambda, sol.mu, sol.z, sol.residual_norm
        );
    }
    Ok(())
}
