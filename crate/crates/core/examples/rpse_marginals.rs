//! Samples the unconstrained ensemble and compares a single-population
//! histogram with the exact Beta(1, N-1) law.

use qensembles::observables::{ks_statistic, Histogram};
use qensembles::oracle::rpse_marginal_cdf;
use qensembles::sampling::{sample_rpse, Collect};

fn main() -> Result<(), qensembles::Error> {
    let samples = 100_000;
    for spins in 2..=4 {
        let n = 1usize << spins;
        let set = sample_rpse(n, samples, 7, 1, &Collect::populations([0]));
        let mut p1 = set.population(0).unwrap_or_default().to_vec();
        let ks = ks_statistic(&mut p1, |x| rpse_marginal_cdf(n, x));
        println!("n = {spins} (N = {n}): KS distance to Beta(1, {}) = {ks:.4}", n - 1);
    }

    let n = 16;
    let set = sample_rpse(n, samples, 7, 1, &Collect::populations([0]));
    let h = Histogram::from_values(set.population(0).unwrap_or_default().iter().copied(), 0.0, 0.3, 10)?;
    println!("\nN = {n}: bin centre, sampled density, exact density");
    for (i, d) in h.densities().iter().enumerate() {
        let x = h.bin_centre(i);
        println!("  {x:.3}  {d:7.3}  {:7.3}", (n - 1) as f64 * (1.0 - x).powi(n as i32 - 2));
    }
    Ok(())
}
