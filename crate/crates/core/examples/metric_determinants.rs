//! Checks the determinant lemmas and the closed-form metric determinant of
//! the fixed-energy surface against direct elimination.

use qensembles::feee::FeeeTarget;
use qensembles::oracle::{det_rank1_update, feee_metric_det, SmallMatrix};
use qensembles::spectrum::identical_spins;

fn main() -> Result<(), qensembles::Error> {
    let a = SmallMatrix::diagonal(&[2.0, 3.0, 5.0])?;
    let (u, v) = (vec![1.0, -1.0, 0.5], vec![0.2, 0.4, 1.0]);
    let direct = a.plus_outer(std::slice::from_ref(&u), std::slice::from_ref(&v))?.det();
    println!("rank-1 update: lemma {:.12} direct {:.12}", det_rank1_update(&a, &u, &v)?, direct);

    let target = FeeeTarget::new(identical_spins(3)?, 1.0)?;
    let q = [0.38, 0.1, 0.1, 0.1, 0.08, 0.08];
    let m = feee_metric_det(&q, &target)?;
    println!("N = 8 metric determinant: direct {:.6e} closed form {:.6e}", m.direct, m.closed_form);
    println!("  with phase block {:.6e}, scaled density bracket {:.6e}", m.with_phase_block, m.scaled_bracket);
    Ok(())
}
