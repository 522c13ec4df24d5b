//! Builds Zeeman spectra and prints their level structure and derived constants.

use qensembles::spectrum::{build_spin_spectrum, identical_spins};

fn main() -> Result<(), qensembles::Error> {
    let spec = identical_spins(4)?;
    println!("4 identical spins: {} levels, E* = {}, E_max = {}", spec.len(), spec.e_star(), spec.max_energy());
    let mut level = f64::NAN;
    for &e in spec.eigenvalues() {
        if e != level {
            let degeneracy = spec.eigenvalues().iter().filter(|&&x| x == e).count();
            println!("  E = {e:<4} degeneracy {degeneracy}");
            level = e;
        }
    }
    let c = spec.constants()?;
    println!("  S0 = {:.6}, F0 = {:.6}", c.s0, c.f0);

    let mixed = build_spin_spectrum(3, &[0.8, 1.0, 1.3])?;
    println!("3 spins with frequencies 0.8, 1.0, 1.3: {:?}", mixed.eigenvalues());
    Ok(())
}
