//! Population marginals of the fixed-energy ensemble for six identical spins:
//! excited states decay monotonically while the ground population has an
//! interior mode.

use qensembles::feee::FeeeTarget;
use qensembles::observables::Histogram;
use qensembles::sampling::{sample_feee, Collect, FeeeRunConfig};
use qensembles::spectrum::identical_spins;

fn main() -> Result<(), qensembles::Error> {
    let target = FeeeTarget::from_energy_per_spin(identical_spins(6)?, 0.1)?;
    let config = FeeeRunConfig::new(target.n_states(), 50_000);
    let (set, summaries) = sample_feee(&target, &config, 3, &Collect::populations([0, 1, 42]))?;
    println!("n = 6, ε = 0.1, acceptance {:.3}", summaries[0].acceptance_rate);
    for (k, values) in &set.populations {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(0.0, f64::max);
        let h = Histogram::from_values(values.iter().copied(), lo, hi, 12)?;
        let bars: Vec<String> = h.counts.iter().map(|c| c.to_string()).collect();
        println!("P_{} (E = {}): {}", k + 1, target.spectrum().eigenvalues()[*k], bars.join(" "));
    }
    Ok(())
}
