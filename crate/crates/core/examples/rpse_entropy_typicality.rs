//! Mean and relative width of the entropy of random pure states as the
//! number of spins grows; the width shrinks, so almost every state has the
//! same entropy.

use qensembles::approx::{entropy_rel_width_rpse, mean_entropy_rpse};
use qensembles::observables::RunningStats;
use qensembles::oracle::rpse_exact_mean_entropy;
use qensembles::sampling::{sample_rpse, Collect};

fn main() -> Result<(), qensembles::Error> {
    println!(
        "{:>3} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "n", "N", "mean S", "exact", "approx", "σ/⟨S⟩", "approx"
    );
    for spins in [2, 4, 6, 8, 10, 11, 13] {
        let n = 1usize << spins;
        let stats: RunningStats =
            sample_rpse(n, 10_000, 11, 1, &Collect::entropy_only()).entropies.into_iter().collect();
        let s = stats.finalize()?;
        println!(
            "{spins:>3} {n:>7} {:>10.5} {:>10.5} {:>10.5} {:>10.3e} {:>10.3e}",
            s.mean,
            rpse_exact_mean_entropy(n),
            mean_entropy_rpse(n),
            s.rel_width.unwrap_or(f64::NAN),
            entropy_rel_width_rpse(n)
        );
    }
    Ok(())
}
