//! Three independent views of the same four-state fixed-energy law: exact
//! polygon quadrature, rejection sampling and the Metropolis–Hastings chain.

use qensembles::feee::FeeeTarget;
use qensembles::observables::{total_variation, Histogram};
use qensembles::oracle::{feee_rejection_sample, FourStateQuadrature};
use qensembles::rng::stream_rng;
use qensembles::sampling::{sample_feee, Collect, FeeeRunConfig};
use qensembles::spectrum::identical_spins;

fn main() -> Result<(), qensembles::Error> {
    let (samples, bins) = (100_000, 30);
    let target = FeeeTarget::new(identical_spins(2)?, 0.6)?;
    let (lo, hi) = FourStateQuadrature::new(&target)?.support(0);
    let exact = FourStateQuadrature::new(&target)?.marginal(0, lo, hi, bins)?.mass;

    let (chain, _) = sample_feee(&target, &FeeeRunConfig::new(4, samples), 1, &Collect::populations([0]))?;
    let chain = Histogram::from_values(chain.population(0).unwrap_or_default().iter().copied(), lo, hi, bins)?;
    let (draws, stats) = feee_rejection_sample(&target, samples, &mut stream_rng(1, 99))?;
    let rejection = Histogram::from_values(draws.iter().map(|p| p[0]), lo, hi, bins)?;

    println!("ground population on [{lo:.3}, {hi:.3}], {bins} bins, rejection acceptance {:.3}", stats.acceptance());
    println!("TV chain vs quadrature     {:.4}", total_variation(&chain.probabilities(), &exact));
    println!("TV rejection vs quadrature {:.4}", total_variation(&rejection.probabilities(), &exact));
    println!("TV chain vs rejection      {:.4}", total_variation(&chain.probabilities(), &rejection.probabilities()));
    Ok(())
}
