//! Independent reference computations used to validate the samplers and the
//! closed forms: pivoted-LU determinants and the determinant lemmas, the
//! metric determinant of the fixed-energy surface, exact marginals of the
//! four-state FEEE density, a rejection sampler, and exact RPSE references.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::feee::{FeeeError, FeeeTarget};
use crate::rpse::PopulationVector;

pub const MAX_DIM: usize = 64;
/// Multiplier applied to the scanned density maximum in the rejection sampler.
pub const BOUND_SAFETY: f64 = 1.1;
const MAX_RESTARTS: usize = 8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("matrix dimension {0} outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("matrix is singular")]
    Singular,
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("point is not strictly inside the domain")]
    Domain,
    #[error("{0}")]
    Unsupported(&'static str),
    #[error("density {density} exceeded the rejection bound {bound} after {restarts} restarts")]
    Bound { density: f64, bound: f64, restarts: usize },
    #[error(transparent)]
    Feee(#[from] FeeeError),
}

/// Dense square matrix, row-major, dimension at most [`MAX_DIM`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SmallMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, OracleError> {
        let n = rows.len();
        if n == 0 || n > MAX_DIM {
            return Err(OracleError::Dimension(n));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(OracleError::Shape("rows must have length n"));
        }
        let data: Vec<f64> = rows.concat();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(OracleError::NonFinite);
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, OracleError> {
        let mut rows = vec![Vec::with_capacity(n); n];
        for (i, row) in rows.iter_mut().enumerate() {
            for j in 0..n {
                row.push(f(i, j));
            }
        }
        Self::from_rows(&rows)
    }

    pub fn identity(n: usize) -> Result<Self, OracleError> {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(d: &[f64]) -> Result<Self, OracleError> {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `A + Σ_c u_c w_cᵀ` over paired columns.
    pub fn plus_outer(&self, us: &[Vec<f64>], ws: &[Vec<f64>]) -> Result<Self, OracleError> {
        if us.len() != ws.len() || us.iter().chain(ws).any(|c| c.len() != self.n) {
            return Err(OracleError::Shape("update vectors must have length n"));
        }
        Self::from_fn(self.n, |i, j| self.get(i, j) + us.iter().zip(ws).map(|(u, w)| u[i] * w[j]).sum::<f64>())
    }

    fn lu(&self) -> (Vec<f64>, Vec<usize>, f64) {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs())).unwrap();
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                perm.swap(pivot, col);
                sign = -sign;
            }
            let d = a[col * n + col];
            if d == 0.0 {
                continue;
            }
            for r in col + 1..n {
                let factor = a[r * n + col] / d;
                a[r * n + col] = factor;
                for k in col + 1..n {
                    a[r * n + k] -= factor * a[col * n + k];
                }
            }
        }
        (a, perm, sign)
    }

    /// Determinant by partial-pivoted elimination.
    pub fn det(&self) -> f64 {
        let (lu, _, sign) = self.lu();
        (0..self.n).map(|i| lu[i * self.n + i]).product::<f64>() * sign
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, OracleError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(OracleError::Shape("right-hand side must have length n"));
        }
        let (lu, perm, _) = self.lu();
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if (0..n).any(|i| lu[i * n + i].abs() <= f64::EPSILON * scale * n as f64) {
            return Err(OracleError::Singular);
        }
        let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= lu[i * n + k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= lu[i * n + k] * y[k];
            }
            y[i] /= lu[i * n + i];
        }
        Ok(y)
    }
}

/// `det(A + u vᵀ) = (1 + vᵀA⁻¹u) det A`.
pub fn det_rank1_update(a: &SmallMatrix, u: &[f64], v: &[f64]) -> Result<f64, OracleError> {
    if u.len() != a.dim() || v.len() != a.dim() {
        return Err(OracleError::Shape("update vectors must have length n"));
    }
    let x = a.solve(u)?;
    let vx: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok((1.0 + vx) * a.det())
}

/// `det(A + UUᵀ) = det(I + UᵀA⁻¹U) det A`, with `U` given as its columns.
pub fn det_rankk_update(a: &SmallMatrix, columns: &[Vec<f64>]) -> Result<f64, OracleError> {
    if columns.iter().any(|c| c.len() != a.dim()) {
        return Err(OracleError::Shape("columns must have length n"));
    }
    if columns.is_empty() {
        return Ok(a.det());
    }
    let solved: Vec<Vec<f64>> = columns.iter().map(|c| a.solve(c)).collect::<Result<_, _>>()?;
    let k = columns.len();
    let inner = SmallMatrix::from_fn(k, |i, j| {
        let dot: f64 = columns[i].iter().zip(&solved[j]).map(|(a, b)| a * b).sum();
        if i == j {
            1.0 + dot
        } else {
            dot
        }
    })?;
    Ok(inner.det() * a.det())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricDeterminant {
    /// Pivoted-LU determinant of the assembled metric.
    pub direct: f64,
    /// `((1+R11)(1+R22) - R12²) Π 1/(4P_j)`.
    pub closed_form: f64,
    /// `closed_form · Π_k P_k` over all `N` populations.
    pub with_phase_block: f64,
    /// The density bracket scaled by `4^-(N-2)`.
    pub scaled_bracket: f64,
}

impl MetricDeterminant {
    pub fn relative_discrepancy(&self) -> f64 {
        (self.direct - self.closed_form).abs() / self.closed_form.abs()
    }

    pub fn chain_discrepancy(&self) -> f64 {
        (self.with_phase_block - self.scaled_bracket).abs() / self.scaled_bracket.abs()
    }
}

/// Metric determinant on the free populations of the fixed-energy surface.
///
/// The metric is `diag(1/(4P_j)) + a aᵀ/(4P_N) + (1+a)(1+a)ᵀ/(4P_{N-1})`,
/// using the partials `∂P_N/∂P_j = a_j` and `∂P_{N-1}/∂P_j = -(1+a_j)`.
pub fn feee_metric_det(q: &[f64], target: &FeeeTarget) -> Result<MetricDeterminant, OracleError> {
    let d = target.n_free();
    if q.len() != d {
        return Err(OracleError::Shape("free population count"));
    }
    let (lower, upper) = target.eliminated(q);
    if q.iter().any(|&x| x <= 0.0) || lower <= 0.0 || upper <= 0.0 {
        return Err(OracleError::Domain);
    }
    let a = target.a();
    let metric = SmallMatrix::from_fn(d, |i, j| {
        let diag = if i == j { 1.0 / (4.0 * q[i]) } else { 0.0 };
        diag + a[i] * a[j] / (4.0 * upper) + (1.0 + a[i]) * (1.0 + a[j]) / (4.0 * lower)
    })?;
    let direct = metric.det();

    let (mut r11, mut r22, mut r12) = (0.0, 0.0, 0.0);
    for (&x, &aj) in q.iter().zip(a) {
        r11 += x * aj * aj / upper;
        r22 += x * (1.0 + aj) * (1.0 + aj) / lower;
        r12 += x * aj * (1.0 + aj) / (upper * lower).sqrt();
    }
    let diag_det: f64 = q.iter().map(|x| 1.0 / (4.0 * x)).product();
    let closed_form = ((1.0 + r11) * (1.0 + r22) - r12 * r12) * diag_det;
    let all_populations: f64 = q.iter().product::<f64>() * lower * upper;
    Ok(MetricDeterminant {
        direct,
        closed_form,
        with_phase_block: closed_form * all_populations,
        scaled_bracket: target.bracket(q) * 4f64.powi(-(d as i32)),
    })
}

/// Affine function `c + gx·x + gy·y` of the two free populations.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine2 {
    c: f64,
    gx: f64,
    gy: f64,
}

impl Affine2 {
    fn at(&self, p: (f64, f64)) -> f64 {
        self.c + self.gx * p.0 + self.gy * p.1
    }

    fn shifted(&self, by: f64) -> Self {
        Self { c: self.c + by, ..*self }
    }

    fn negated(&self) -> Self {
        Self { c: -self.c, gx: -self.gx, gy: -self.gy }
    }
}

/// Keeps the part of a counter-clockwise convex polygon where `h ≥ 0`.
fn clip(poly: &[(f64, f64)], h: &Affine2) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (i, &p) in poly.iter().enumerate() {
        let q = poly[(i + 1) % poly.len()];
        let (hp, hq) = (h.at(p), h.at(q));
        if hp >= 0.0 {
            out.push(p);
        }
        if (hp >= 0.0) != (hq >= 0.0) {
            let t = hp / (hp - hq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    0.5 * (0..poly.len())
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            p.0 * q.1 - q.0 * p.1
        })
        .sum::<f64>()
}

/// `∫∫ √h dx dy` over a counter-clockwise convex polygon, exactly.
///
/// With `F = (2/3) h^{3/2} ∇h / |∇h|²` one has `div F = √h`, and along each
/// edge `h` is linear so the flux integral has a closed form.
fn integrate_sqrt(poly: &[(f64, f64)], h: &Affine2) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let g2 = h.gx * h.gx + h.gy * h.gy;
    let scale = h.c.abs().max(h.gx.abs()).max(h.gy.abs()).max(f64::MIN_POSITIVE);
    if g2.sqrt() <= 1e-14 * scale {
        return h.c.max(0.0).sqrt() * polygon_area(poly);
    }
    let mut flux = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let s0 = h.at(p).max(0.0).sqrt();
        let s1 = h.at(q).max(0.0).sqrt();
        // Mean of h^{3/2} along the edge, written to avoid dividing by h1 - h0.
        let mean = if s0 + s1 == 0.0 {
            0.0
        } else {
            0.4 * (s1.powi(4) + s1.powi(3) * s0 + s1 * s1 * s0 * s0 + s1 * s0.powi(3) + s0.powi(4)) / (s0 + s1)
        };
        let normal_dot = h.gx * (q.1 - p.1) - h.gy * (q.0 - p.0);
        flux += mean * normal_dot;
    }
    flux * 2.0 / (3.0 * g2)
}

/// Marginal density table of one population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalTable {
    pub lo: f64,
    pub hi: f64,
    /// Probability mass per bin.
    pub mass: Vec<f64>,
}

impl MarginalTable {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.mass.len() as f64
    }

    pub fn density(&self) -> Vec<f64> {
        let w = self.bin_width();
        self.mass.iter().map(|m| m / w).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Exact integrator of the four-state FEEE density over its polygonal domain.
#[derive(Debug, Clone)]
pub struct FourStateQuadrature {
    domain: Vec<(f64, f64)>,
    bracket: Affine2,
    populations: Vec<Affine2>,
    normalization: f64,
}

impl FourStateQuadrature {
    pub fn new(target: &FeeeTarget) -> Result<Self, OracleError> {
        if target.n_states() != 4 {
            return Err(OracleError::Unsupported("quadrature oracle needs exactly 4 states"));
        }
        let a = target.a();
        let b = target.b();
        let mut populations = vec![Affine2 { c: 0.0, gx: 0.0, gy: 0.0 }; 4];
        let free = target.free_indices();
        populations[free[0]] = Affine2 { c: 0.0, gx: 1.0, gy: 0.0 };
        populations[free[1]] = Affine2 { c: 0.0, gx: 0.0, gy: 1.0 };
        let (lower, upper) = target.eliminated_indices();
        populations[upper] = Affine2 { c: b, gx: a[0], gy: a[1] };
        populations[lower] = Affine2 { c: 1.0 - b, gx: -(1.0 + a[0]), gy: -(1.0 + a[1]) };
        let bracket = Affine2 { c: b * (1.0 - b), gx: (1.0 + a[0]) * a[0], gy: (1.0 + a[1]) * a[1] };

        let mut domain = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        for p in &populations {
            domain = clip(&domain, p);
        }
        let normalization = integrate_sqrt(&domain, &bracket);
        if !(normalization > 0.0) {
            return Err(OracleError::Domain);
        }
        Ok(Self { domain, bracket, populations, normalization })
    }

    /// Unnormalized integral of the density over the whole domain.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Range of population `index` over the domain.
    pub fn support(&self, index: usize) -> (f64, f64) {
        let f = &self.populations[index];
        self.domain.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(f.at(v)), hi.max(f.at(v))))
    }

    /// Probability that population `index` lies in `[lo, hi]`.
    pub fn probability(&self, index: usize, lo: f64, hi: f64) -> f64 {
        let f = &self.populations[index];
        let slab = clip(&clip(&self.domain, &f.shifted(-lo)), &f.negated().shifted(hi));
        integrate_sqrt(&slab, &self.bracket) / self.normalization
    }

    pub fn marginal(&self, index: usize, lo: f64, hi: f64, bins: usize) -> Result<MarginalTable, OracleError> {
        if index >= 4 || bins == 0 || !(lo < hi) {
            return Err(OracleError::Shape("population index, bins or range"));
        }
        let w = (hi - lo) / bins as f64;
        let mass = (0..bins)
            .map(|i| {
                let a = lo + i as f64 * w;
                let b = if i + 1 == bins { hi } else { a + w };
                self.probability(index, a, b)
            })
            .collect();
        Ok(MarginalTable { lo, hi, mass })
    }
}

/// Binned marginal of population `index` (spectrum order) for a four-state target.
pub fn feee_marginal_quadrature(
    target: &FeeeTarget,
    index: usize,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<MarginalTable, OracleError> {
    FourStateQuadrature::new(target)?.marginal(index, lo, hi, bins)
}

/// Vertices of the feasible polytope in full population coordinates. With two
/// equality constraints every vertex has at most two nonzero populations.
pub fn feasible_vertices(target: &FeeeTarget) -> Vec<Vec<f64>> {
    let levels = target.spectrum().eigenvalues();
    let e = target.energy();
    let n = levels.len();
    let tol = 1e-12 * target.spectrum().max_energy().max(1.0);
    let mut out = Vec::new();
    for k in 0..n {
        if (levels[k] - e).abs() <= tol {
            let mut p = vec![0.0; n];
            p[k] = 1.0;
            out.push(p);
        }
        for l in 0..n {
            if levels[k] < e - tol && levels[l] > e + tol {
                let mut p = vec![0.0; n];
                let gap = levels[l] - levels[k];
                p[k] = (levels[l] - e) / gap;
                p[l] = (e - levels[k]) / gap;
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RejectionStats {
    pub proposals: u64,
    pub accepted: u64,
    pub bound: f64,
    pub max_density_seen: f64,
    pub restarts: usize,
}

impl RejectionStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Independent exact sampler of the FEEE density for small `N`: uniform
/// proposals in the bounding box of the free populations, accepted with
/// probability `density / bound`.
#[derive(Debug, Clone)]
pub struct RejectionSampler<'t> {
    target: &'t FeeeTarget,
    box_hi: Vec<f64>,
    bound: f64,
}

pub const MAX_REJECTION_STATES: usize = 8;

impl<'t> RejectionSampler<'t> {
    pub fn new(target: &'t FeeeTarget) -> Result<Self, OracleError> {
        if target.n_states() > MAX_REJECTION_STATES {
            return Err(OracleError::Unsupported("rejection sampler supports at most 8 states"));
        }
        let vertices = feasible_vertices(target);
        let free = target.free_indices();
        let box_hi: Vec<f64> = free.iter().map(|&k| vertices.iter().map(|v| v[k]).fold(0.0, f64::max)).collect();
        // The bracket is affine, so its maximum over the polytope sits on a vertex.
        let scanned = vertices
            .iter()
            .map(|v| target.density(&target.free_part(v)))
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if !(scanned > 0.0) {
            return Err(OracleError::Domain);
        }
        Ok(Self { target, box_hi, bound: BOUND_SAFETY * scanned })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        count: usize,
        rng: &mut R,
    ) -> Result<(Vec<PopulationVector>, RejectionStats), OracleError> {
        let mut stats =
            RejectionStats { proposals: 0, accepted: 0, bound: self.bound, max_density_seen: 0.0, restarts: 0 };
        let mut out = Vec::with_capacity(count);
        let mut q = vec![0.0; self.box_hi.len()];
        while out.len() < count {
            for (x, hi) in q.iter_mut().zip(&self.box_hi) {
                *x = rng.random::<f64>() * hi;
            }
            stats.proposals += 1;
            let d = self.target.density(&q.clone().into())?;
            stats.max_density_seen = stats.max_density_seen.max(d);
            if d > self.bound {
                if stats.restarts == MAX_RESTARTS {
                    return Err(OracleError::Bound { density: d, bound: self.bound, restarts: stats.restarts });
                }
                log::warn!("rejection bound {} exceeded by {d}; restarting", self.bound);
                self.bound = BOUND_SAFETY * d;
                stats.bound = self.bound;
                stats.restarts += 1;
                stats.accepted = 0;
                out.clear();
                continue;
            }
            if d > 0.0 && rng.random::<f64>() * self.bound < d {
                stats.accepted += 1;
                out.push(self.target.reconstruct_slice(&q).ok_or(OracleError::Domain)?);
            }
        }
        Ok((out, stats))
    }
}

pub fn feee_rejection_sample<R: Rng + ?Sized>(
    target: &FeeeTarget,
    count: usize,
    rng: &mut R,
) -> Result<(Vec<PopulationVector>, RejectionStats), OracleError> {
    RejectionSampler::new(target)?.sample(count, rng)
}

/// Reference root of the multiplier equation by brute force: `g(z) - E` is
/// scanned on a dense logarithmic grid and the sign-change cell is bisected.
/// Below the equal-population energy the grid runs over `z`; above it over
/// `t = -(z + E_N)`. Returns `None` if no sign change is found.
pub fn lagrange_scan_z(levels: &[f64], energy: f64) -> Option<f64> {
    let e_max = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e_star = levels.iter().sum::<f64>() / levels.len() as f64;
    let g = |z: f64| {
        let num: f64 = levels.iter().map(|e| e / (z + e)).sum();
        let den: f64 = levels.iter().map(|e| 1.0 / (z + e)).sum();
        num / den
    };
    let to_z = |x: f64| if energy < e_star { x } else { -e_max - x };
    let f = |x: f64| g(to_z(x)) - energy;
    let steps = 24_000;
    let grid = (0..=steps).map(|i| 10f64.powf(-12.0 + 24.0 * i as f64 / steps as f64));
    let mut prev: Option<(f64, f64)> = None;
    for x in grid {
        let fx = f(x);
        if let Some((xp, fp)) = prev {
            if fp * fx <= 0.0 {
                let (mut lo, mut hi, f_lo) = (xp, x, fp);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if (f(mid) < 0.0) == (f_lo < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(to_z(0.5 * (lo + hi)));
            }
        }
        prev = Some((x, fx));
    }
    None
}

/// Exact mean entropy of the uniform simplex, `H_N - 1 = Σ_{k=2}^N 1/k`.
pub fn rpse_exact_mean_entropy(n_states: usize) -> f64 {
    (2..=n_states).map(|k| 1.0 / k as f64).sum()
}

/// CDF of a single RPSE population, `Beta(1, N-1)`.
pub fn rpse_marginal_cdf(n_states: usize, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        1.0 - (1.0 - x).powi(n_states as i32 - 1)
    }
}
