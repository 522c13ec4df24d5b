//! Entropy per spin of the fixed-energy ensemble against both
//! maximum-entropy approximations for six spins.

use qensembles::approx::{mean_entropy_feee_i, mean_entropy_feee_ii};
use qensembles::feee::FeeeTarget;
use qensembles::observables::RunningStats;
use qensembles::sampling::{sample_feee, Collect, FeeeRunConfig};
use qensembles::spectrum::identical_spins;

fn main() -> Result<(), qensembles::Error> {
    let spins = 6;
    let spec = identical_spins(spins)?;
    let n = spins as f64;
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "ε", "MC S/n", "σ/n", "approx I", "approx II");
    for eps in [0.05, 0.1, 0.2, 0.3, 0.5] {
        let target = FeeeTarget::from_energy_per_spin(spec.clone(), eps)?;
        let mut config = FeeeRunConfig::new(target.n_states(), 20_000);
        config.chains = 2;
        let (set, _) = sample_feee(&target, &config, 5, &Collect::entropy_only())?;
        let s = set.entropies.iter().copied().collect::<RunningStats>().finalize()?;
        let ii = mean_entropy_feee_ii(&spec, eps * n).map(|s| format!("{:.4}", s / n)).unwrap_or_else(|_| "-".into());
        println!(
            "{eps:>5} {:>10.4} {:>10.4} {:>10.4} {ii:>10}",
            s.mean / n,
            s.std / n,
            mean_entropy_feee_i(&spec, eps * n)? / n
        );
    }
    Ok(())
}
