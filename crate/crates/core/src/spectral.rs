//! Principal eigenpairs and the spectral-bound map `μ ↦ s(μA + Q)`.
//!
//! Throughout, `Q` is a diagonal matrix passed as the slice of its diagonal
//! entries `q`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, NoThresholdCase, Result};
use crate::linalg::{
    affine_family, ensure_finite, ensure_square, inf_norm, max_real_eigenvalue, null_vector, solve, vec_inf_norm,
};
use crate::netmat::{ensure_quasi_positive, is_quasi_positive, scc_blocks, strongly_connected};

/// Default residual tolerance for eigen solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Eigen tolerance used inside [`bound_derivative`]; the second derivative is
/// a difference quotient of first derivatives and amplifies their error.
const DERIVATIVE_TOL: f64 = 1e-13;

/// Principal eigenvalue with its positive right and left eigenvectors, both
/// normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTriple {
    pub value: f64,
    pub right: DVector<f64>,
    pub left: DVector<f64>,
    /// `max(‖Mu − λu‖∞, ‖wᵀM − λwᵀ‖∞)`.
    pub residual: f64,
    /// Iterations spent on both vectors together.
    pub iterations: usize,
}

/// Joint inverse-iteration steps taken when the two vectors separately meet
/// the tolerance but their shared eigenvalue estimate does not.
const REFINE_ROUNDS: usize = 4;

struct PerronVector {
    vector: DVector<f64>,
    iterations: usize,
}

/// `(min_i, max_i)` of `(Mx)_i / x_i` for positive `x`.
fn ratio_bounds(m: &DMatrix<f64>, x: &DVector<f64>) -> (f64, f64) {
    let mx = m * x;
    mx.iter()
        .zip(x.iter())
        .map(|(a, b)| a / b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

fn iteration_cap(n: usize, tol: f64) -> usize {
    ((100 * n) as f64 * (-tol.log10()).max(1.0)).ceil() as usize
}

/// Right Perron vector of an irreducible quasi-positive `m`.
///
/// Power iteration on `m + cI`. If that has not converged after a warm-up,
/// the iteration switches to inverse iteration with a shift just above the
/// Collatz–Wielandt upper bound, where `(σI − m)⁻¹` is a positive matrix.
fn perron_vector(m: &DMatrix<f64>, tol: f64, scale: f64) -> Result<PerronVector> {
    let n = m.nrows();
    let target = 0.5 * tol * scale;
    let cap = iteration_cap(n, tol);
    let warmup = (25 * n).min(cap);
    let shift = 1.0 + (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);

    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut last = f64::INFINITY;
    for it in 1..=cap {
        x = if it <= warmup {
            m * &x + &x * shift
        } else {
            let (lo, hi) = ratio_bounds(m, &x);
            let sigma = hi + (hi - lo).max(1e-10 * scale);
            let mut k = -m.clone();
            for i in 0..n {
                k[(i, i)] += sigma;
            }
            solve(&k, &x)?
        };
        let total = x.sum();
        x /= total;
        let mx = m * &x;
        let value = mx.sum();
        last = vec_inf_norm(&(mx - &x * value));
        if last <= target {
            return Ok(PerronVector { vector: x, iterations: it });
        }
    }
    Err(Error::numeric(format!("principal eigenvector did not converge in {cap} iterations"), last))
}

fn ensure_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("tolerance must be positive and finite, got {tol}")))
    }
}

/// Principal eigenvalue and eigenvectors of an irreducible quasi-positive
/// matrix.
///
/// `tol` is relative to `max(1, ‖M‖∞)`.
///
/// ```
/// use nalgebra::DMatrix;
/// use spectral_dispersal::spectral::principal_eigen;
///
/// let m = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.5, 1.0]);
/// let e = principal_eigen(&m, 1e-12).unwrap();
/// assert!((e.value - 1.5).abs() < 1e-12);
/// assert!((e.left[0] - 1.0 / 3.0).abs() < 1e-10);
/// ```
pub fn principal_eigen(m: &DMatrix<f64>, tol: f64) -> Result<EigenTriple> {
    ensure_tol(tol)?;
    let n = ensure_quasi_positive(m, "M")?;
    if !strongly_connected(m) {
        return Err(Error::structure("M is reducible; the principal eigenvector need not be positive"));
    }
    if n == 1 {
        let one = DVector::from_element(1, 1.0);
        return Ok(EigenTriple { value: m[(0, 0)], right: one.clone(), left: one, residual: 0.0, iterations: 0 });
    }
    let scale = inf_norm(m).max(1.0);
    let u = perron_vector(m, tol, scale)?;
    let mt = m.transpose();
    let w = perron_vector(&mt, tol, scale)?;
    let (mut u, mut w, mut iterations) = (u.vector, w.vector, u.iterations + w.iterations);

    let joint = |u: &DVector<f64>, w: &DVector<f64>| {
        let mu = m * u;
        let value = w.dot(&mu) / w.dot(u);
        let residual = vec_inf_norm(&(mu - u * value)).max(vec_inf_norm(&(&mt * w - w * value)));
        (value, residual)
    };
    let (mut value, mut residual) = joint(&u, &w);
    for _ in 0..REFINE_ROUNDS {
        if residual <= tol * scale {
            break;
        }
        let sigma = value + 1e-8 * scale;
        let k = DMatrix::from_diagonal_element(n, n, sigma) - m;
        u = solve(&k, &u)?;
        u /= u.sum();
        w = solve(&k.transpose(), &w)?;
        w /= w.sum();
        iterations += 2;
        (value, residual) = joint(&u, &w);
    }
    if residual > tol * scale {
        return Err(Error::numeric("eigen residual above tolerance", residual));
    }
    Ok(EigenTriple { value, right: u, left: w, residual, iterations })
}

/// `s(M) = max Re λ` over the spectrum of `M`.
///
/// Irreducible quasi-positive input goes through [`principal_eigen`],
/// reducible quasi-positive input through its strongly connected blocks, and
/// anything else through a dense eigensolve.
pub fn spectral_bound(m: &DMatrix<f64>, tol: f64) -> Result<f64> {
    ensure_tol(tol)?;
    ensure_square(m, "M")?;
    ensure_finite(m, "M")?;
    if !is_quasi_positive(m) {
        return Ok(max_real_eigenvalue(m));
    }
    if strongly_connected(m) {
        return principal_eigen(m, tol).map(|e| e.value);
    }
    let blocks = scc_blocks(m);
    let mut best = f64::NEG_INFINITY;
    for k in 0..blocks.blocks.len() {
        let b = blocks.block_matrix(m, k);
        let s = if b.nrows() == 1 { b[(0, 0)] } else { principal_eigen(&b, tol)?.value };
        best = best.max(s);
    }
    Ok(best)
}

/// `max_i (Au)_i / u_i`, an upper bound for `s(A)` over positive `u`.
pub fn collatz_wielandt(a: &DMatrix<f64>, u: &[f64]) -> Result<f64> {
    let n = ensure_quasi_positive(a, "A")?;
    if u.len() != n {
        return Err(Error::validation(format!("u has {} entries, expected {n}", u.len())));
    }
    if let Some(i) = u.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::domain(format!("u[{i}] = {} must be positive", u[i])));
    }
    let u = DVector::from_column_slice(u);
    Ok(ratio_bounds(a, &u).1)
}

/// Minimum and maximum row sum of `μA + Q`; the two bracket `s(μA + Q)`.
pub fn row_sum_bracket(a: &DMatrix<f64>, q: &[f64], mu: f64) -> Result<(f64, f64)> {
    let m = family(a, q, mu)?;
    Ok(m.row_iter().map(|r| r.sum()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s))))
}

fn family(a: &DMatrix<f64>, q: &[f64], mu: f64) -> Result<DMatrix<f64>> {
    let n = ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    if q.len() != n {
        return Err(Error::validation(format!("q has {} entries, expected {n}", q.len())));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("q has a non-finite entry"));
    }
    if !mu.is_finite() {
        return Err(Error::domain(format!("mu = {mu} is not finite")));
    }
    Ok(affine_family(a, q, mu))
}

fn first_derivative(a: &DMatrix<f64>, q: &[f64], mu: f64, tol: f64) -> Result<f64> {
    let e = principal_eigen(&family(a, q, mu)?, tol)?;
    Ok(e.left.dot(&(a * &e.right)) / e.left.dot(&e.right))
}

/// `(s′(μ), s″(μ))` for `s(μ) = s(μA + Q)`.
///
/// The first derivative is `wᵀAu / wᵀu`; the second is a central difference of
/// the first with step `max(1e-5, 1e-5·μ)`, capped at `μ/2`.
pub fn bound_derivative(a: &DMatrix<f64>, q: &[f64], mu: f64, tol: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!("mu = {mu} must be positive")));
    }
    ensure_tol(tol)?;
    let tol = tol.min(DERIVATIVE_TOL);
    let h = (1e-5f64).max(1e-5 * mu).min(0.5 * mu);
    let ds = first_derivative(a, q, mu, tol)?;
    let up = first_derivative(a, q, mu + h, tol)?;
    let down = first_derivative(a, q, mu - h, tol)?;
    Ok((ds, (up - down) / (2.0 * h)))
}

/// Equally spaced μ-grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveGrid {
    pub mu_min: f64,
    pub mu_max: f64,
    pub steps: usize,
}

impl CurveGrid {
    pub fn points(&self) -> Vec<f64> {
        let span = self.mu_max - self.mu_min;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.mu_max } else { self.mu_min + span * i as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub mu: f64,
    pub s: f64,
    pub ds: f64,
    pub d2s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCurve {
    pub grid: CurveGrid,
    pub rows: Vec<CurveRow>,
}

/// Sample `s`, `s′` and `s″` on a grid. Points are evaluated in parallel.
pub fn bound_curve(a: &DMatrix<f64>, q: &[f64], grid: CurveGrid, tol: f64) -> Result<SpectralCurve> {
    if !(grid.mu_min > 0.0 && grid.mu_min < grid.mu_max && grid.mu_max.is_finite()) {
        return Err(Error::domain(format!("grid needs 0 < mu_min < mu_max, got [{}, {}]", grid.mu_min, grid.mu_max)));
    }
    if grid.steps < 2 {
        return Err(Error::validation(format!("grid needs at least 2 steps, got {}", grid.steps)));
    }
    let rows = grid
        .points()
        .into_par_iter()
        .map(|mu| {
            let row = || -> Result<CurveRow> {
                let s = spectral_bound(&family(a, q, mu)?, tol)?;
                let (ds, d2s) = bound_derivative(a, q, mu, tol)?;
                Ok(CurveRow { mu, s, ds, d2s })
            };
            row().map_err(|e| e.context(format_args!("mu = {mu}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralCurve { grid, rows })
}

/// Limit of `s(μA + Q)` as `μ → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfiniteLimit {
    Finite(f64),
    NegInfinity,
}

impl fmt::Display for InfiniteLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfiniteLimit::Finite(x) => write!(f, "{x}"),
            InfiniteLimit::NegInfinity => f.write_str("-inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitPair {
    /// `max_i q_i`.
    pub at_zero: f64,
    pub at_infinity: InfiniteLimit,
    /// Weights `v` with `at_infinity = Σ v_i q_i`; present only when `s(A) = 0`.
    pub weights: Option<DVector<f64>>,
}

/// `U⁻¹ A U` with `U = diag(u)`. For a right eigenvector `u` every row sums
/// to `s(A)`.
pub fn right_transport(a: &DMatrix<f64>, u: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * u[j] / u[i])
}

/// `W A W⁻¹` with `W = diag(w)`. For a left eigenvector `w` every column sums
/// to `s(A)`, so the negated matrix is a Laplacian when `s(A) = 0`.
pub fn left_transport(a: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| w[i] * a[(i, j)] / w[j])
}

/// Limits of `s(μA + Q)` at `μ → 0` and `μ → ∞` for irreducible
/// quasi-positive `A` with `s(A) ≤ 0`.
///
/// When `s(A) = 0` the weights are the sum-1 left null vector of
/// `Ã = U⁻¹AU`, `u` the right null vector of `A`. Both null vectors come
/// from direct solves. `s(A)` counts as zero when within `100·tol·max(1, ‖A‖∞)`.
pub fn asymptotic_limits(a: &DMatrix<f64>, q: &[f64], tol: f64) -> Result<LimitPair> {
    ensure_tol(tol)?;
    let n = ensure_quasi_positive(a, "A")?;
    family(a, q, 1.0)?;
    let at_zero = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s_a = principal_eigen(a, tol)?.value;
    let zero_tol = 100.0 * tol * inf_norm(a).max(1.0);
    if s_a > zero_tol {
        return Err(Error::domain(format!("s(A) = {s_a:e} > 0")));
    }
    if s_a < -zero_tol {
        return Ok(LimitPair { at_zero, at_infinity: InfiniteLimit::NegInfinity, weights: None });
    }
    let u = if n == 1 { DVector::from_element(1, 1.0) } else { null_vector(a)? };
    let tilde = right_transport(a, &u);
    let v = null_vector(&tilde.transpose())?;
    let m: f64 = v.iter().zip(q).map(|(vi, qi)| vi * qi).sum();
    Ok(LimitPair { at_zero, at_infinity: InfiniteLimit::Finite(m), weights: Some(v) })
}

/// Unique `μ* > 0` with `s(μ*A + Q) = 0`.
///
/// Bisection on a bracket grown geometrically from `bracket`
/// (default `[1e-6, 1]`) until `s` changes sign; stops when `|s| ≤ tol`.
///
/// ```
/// use nalgebra::DMatrix;
/// use spectral_dispersal::spectral::threshold_mu;
///
/// let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
/// let mu = threshold_mu(&a, &[1.0, -2.0], None, 1e-12).unwrap();
/// assert!((mu - 2.0).abs() < 1e-9);
/// ```
pub fn threshold_mu(a: &DMatrix<f64>, q: &[f64], bracket: Option<(f64, f64)>, tol: f64) -> Result<f64> {
    const MAX_BISECTIONS: usize = 200;
    const MAX_GROWTH: usize = 200;
    let limits = asymptotic_limits(a, q, tol)?;
    if limits.at_zero <= 0.0 {
        return Err(Error::NoThreshold(NoThresholdCase::ExtinctionAllMu));
    }
    if let InfiniteLimit::Finite(m) = limits.at_infinity {
        if m >= 0.0 {
            return Err(Error::NoThreshold(NoThresholdCase::PersistenceAllMu));
        }
    }
    let (mut lo, mut hi) = bracket.unwrap_or((1e-6, 1.0));
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::domain(format!("bracket needs 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let eig_tol = (tol * 1e-2).max(1e-14);
    let s =
        |mu: f64| spectral_bound(&affine_family(a, q, mu), eig_tol).map_err(|e| e.context(format_args!("mu = {mu}")));

    let mut s_lo = s(lo)?;
    let mut grown = 0;
    while s_lo <= 0.0 {
        if s_lo.abs() <= tol {
            return Ok(lo);
        }
        lo /= 4.0;
        s_lo = s(lo)?;
        grown += 1;
        if grown > MAX_GROWTH {
            return Err(Error::numeric("could not bracket threshold from below", s_lo));
        }
    }
    let mut s_hi = s(hi)?;
    grown = 0;
    while s_hi >= 0.0 {
        if s_hi.abs() <= tol {
            return Ok(hi);
        }
        hi *= 4.0;
        s_hi = s(hi)?;
        grown += 1;
        if grown > MAX_GROWTH {
            return Err(Error::numeric("could not bracket threshold from above", s_hi));
        }
    }
    let mut last = f64::INFINITY;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let s_mid = s(mid)?;
        if s_mid.abs() <= tol {
            return Ok(mid);
        }
        if s_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        last = s_mid;
    }
    Err(Error::numeric("threshold bisection did not reach tolerance", last.abs()))
}

/// `r(((1 − μ)I + μP) R)` for column-stochastic irreducible `P` and positive
/// diagonal `R` given by its entries.
pub fn karlin_map(p: &DMatrix<f64>, r: &[f64], mu: f64, tol: f64) -> Result<f64> {
    let n = ensure_square(p, "P")?;
    ensure_finite(p, "P")?;
    if p.iter().any(|&x| x < 0.0) {
        return Err(Error::validation("P has a negative entry"));
    }
    for j in 0..n {
        let sum = p.column(j).sum();
        if (sum - 1.0).abs() > 1e-12 * n as f64 {
            return Err(Error::validation(format!("column {j} of P sums to {sum}, not 1")));
        }
    }
    if !strongly_connected(p) {
        return Err(Error::structure("P is reducible"));
    }
    if r.len() != n {
        return Err(Error::validation(format!("R has {} entries, expected {n}", r.len())));
    }
    if let Some(i) = r.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::validation(format!("R[{i}] = {} must be positive", r[i])));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!("mu = {mu} must lie in (0, 1)")));
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        let mix = if i == j { 1.0 - mu + mu * p[(i, j)] } else { mu * p[(i, j)] };
        mix * r[j]
    });
    Ok(principal_eigen(&m, tol)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> (DMatrix<f64>, Vec<f64>) {
        (DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.5, -1.0]), vec![1.0, 2.0])
    }

    fn closed_form(mu: f64) -> f64 {
        (6.0 - 3.0 * mu + (9.0 * mu * mu - 4.0 * mu + 4.0).sqrt()) / 4.0
    }

    #[test]
    fn example_eigenvectors_at_one() {
        let (a, q) = example();
        let e = principal_eigen(&affine_family(&a, &q, 1.0), 1e-12).unwrap();
        assert!((e.value - 1.5).abs() < 1e-12);
        assert!((e.right[0] - 0.5).abs() < 1e-10);
        assert!((e.left[1] - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn symmetric_laplacian_has_zero_bound() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let e = principal_eigen(&a, 1e-12).unwrap();
        assert!(e.value.abs() < 1e-12);
        assert!((e.right[0] - 0.5).abs() < 1e-12 && (e.left[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reducible_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(principal_eigen(&m, 1e-10), Err(Error::Structure(_))));
    }

    #[test]
    fn bound_examples() {
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0]);
        assert_eq!(spectral_bound(&d, 1e-10).unwrap(), 5.0);
        let (a, q) = example();
        let s2 = spectral_bound(&affine_family(&a, &q, 2.0), 1e-12).unwrap();
        assert!((s2 - closed_form(2.0)).abs() < 1e-11);
        let block = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 7.0, 1.0, -1.0, 0.0, 0.0, 0.0, -0.25]);
        assert!((spectral_bound(&block, 1e-12).unwrap() + 0.0).abs() < 1e-11);
    }

    #[test]
    fn non_quasi_positive_uses_dense_route() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(spectral_bound(&m, 1e-10).unwrap().abs() < 1e-12);
    }

    #[test]
    fn collatz_wielandt_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(collatz_wielandt(&a, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(collatz_wielandt(&a, &[1.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(collatz_wielandt(&a, &[1.0, 0.0]), Err(Error::Domain(_))));
        let (a, q) = example();
        assert!((collatz_wielandt(&affine_family(&a, &q, 1.0), &[0.5, 0.5]).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_at_one() {
        let (a, q) = example();
        let (ds, d2s) = bound_derivative(&a, &q, 1.0, 1e-10).unwrap();
        assert!((ds + 1.0 / 6.0).abs() < 1e-9);
        assert!(d2s > 0.0);
        assert!(matches!(bound_derivative(&a, &q, 0.0, 1e-10), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_q_has_flat_curve() {
        let (a, _) = example();
        let (ds, _) = bound_derivative(&a, &[0.7, 0.7], 3.0, 1e-10).unwrap();
        assert!(ds.abs() < 1e-10);
    }

    #[test]
    fn curve_matches_closed_form() {
        let (a, q) = example();
        let grid = CurveGrid { mu_min: 0.1, mu_max: 10.0, steps: 100 };
        let c = bound_curve(&a, &q, grid, 1e-12).unwrap();
        assert_eq!(c.rows.len(), 100);
        assert_eq!(c.rows[99].mu, 10.0);
        for r in &c.rows {
            assert!((r.s - closed_form(r.mu)).abs() < 1e-10);
        }
        assert!(c.rows.windows(2).all(|w| w[1].s < w[0].s));
    }

    #[test]
    fn limits_of_example() {
        let (a, q) = example();
        let l = asymptotic_limits(&a, &q, 1e-12).unwrap();
        assert_eq!(l.at_zero, 2.0);
        match l.at_infinity {
            InfiniteLimit::Finite(m) => assert!((m - 4.0 / 3.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let v = l.weights.unwrap();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn leaky_limit_is_tagged() {
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -1.0]);
        let l = asymptotic_limits(&a, &[1.0, 0.0], 1e-10).unwrap();
        assert_eq!(l.at_infinity, InfiniteLimit::NegInfinity);
        let grow = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(asymptotic_limits(&grow, &[1.0, 0.0], 1e-10), Err(Error::Domain(_))));
    }

    #[test]
    fn transports_have_constant_sums() {
        let (a, q) = example();
        let m = affine_family(&a, &q, 1.0);
        let e = principal_eigen(&m, 1e-13).unwrap();
        let r = right_transport(&m, &e.right);
        let l = left_transport(&m, &e.left);
        for i in 0..2 {
            assert!((r.row(i).sum() - 1.5).abs() < 1e-11);
            assert!((l.column(i).sum() - 1.5).abs() < 1e-11);
        }
    }

    #[test]
    fn threshold_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(
            threshold_mu(&a, &[1.0, 1.0], None, 1e-10),
            Err(Error::NoThreshold(NoThresholdCase::PersistenceAllMu))
        );
        assert_eq!(
            threshold_mu(&a, &[-1.0, -3.0], None, 1e-10),
            Err(Error::NoThreshold(NoThresholdCase::ExtinctionAllMu))
        );
        let (a, q) = example();
        assert!(matches!(threshold_mu(&a, &q, None, 1e-10), Err(Error::NoThreshold(_))));
    }

    #[test]
    fn karlin_examples() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((karlin_map(&p, &[1.0, 1.0], 0.3, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        assert!((karlin_map(&p, &[1.0, 4.0], 0.5, 1e-12).unwrap() - 2.5).abs() < 1e-11);
        let quarter = karlin_map(&p, &[1.0, 4.0], 0.25, 1e-12).unwrap();
        assert!((quarter - 3.106107225224513).abs() < 1e-10);
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.0]);
        assert!(matches!(karlin_map(&bad, &[1.0, 1.0], 0.5, 1e-12), Err(Error::Validation(_))));
    }
}
