//! Patch models: single species, predator–prey, two competitors and SIS.
//!
//! Dispersal enters every model as `μ (A x)_i` with the network's stored
//! matrix. State vectors are `u` for the single-species model and the
//! concatenations `(u, v)` or `(S, I)` otherwise.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{add_diagonal, affine_family, inf_norm, solve, vec_inf_norm};
use crate::netmat::DispersalNetwork;
use crate::odeint::{integrate, integrate_to_equilibrium, IntegratorConfig, Termination};
use crate::spectral::{asymptotic_limits, principal_eigen, spectral_bound, threshold_mu, InfiniteLimit};

/// Per-patch intrinsic growth rate `f(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    /// `r (1 − u/K)`.
    Logistic { r: f64, k: f64 },
    /// `p − u`.
    Linear { p: f64 },
}

impl Growth {
    pub fn rate(&self, u: f64) -> f64 {
        match *self {
            Growth::Logistic { r, k } => r * (1.0 - u / k),
            Growth::Linear { p } => p - u,
        }
    }

    pub fn rate_derivative(&self) -> f64 {
        match *self {
            Growth::Logistic { r, k } => -r / k,
            Growth::Linear { .. } => -1.0,
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.rate(0.0)
    }

    /// Starting density used when searching for the positive equilibrium.
    fn interior_start(&self) -> f64 {
        match *self {
            Growth::Logistic { k, .. } => k / 2.0,
            Growth::Linear { p } => p.max(0.0) / 2.0,
        }
    }
}

/// Predator functional response `g(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    /// `g(u) = u`.
    Lotka,
    /// `g(u) = u / (a + u)`.
    Monod { a: f64 },
}

impl Response {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Response::Lotka => u,
            Response::Monod { a } => u / (a + u),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Response::Lotka => 1.0,
            Response::Monod { a } => a / ((a + u) * (a + u)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleSpecies {
    pub network: DispersalNetwork,
    pub growth: Vec<Growth>,
    /// Loss rates `ε_i ≥ 0` during movement.
    pub leak: Vec<f64>,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredatorPrey {
    pub prey_network: DispersalNetwork,
    pub predator_network: DispersalNetwork,
    pub r: Vec<f64>,
    pub k: Vec<f64>,
    pub response: Vec<Response>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub mu_u: f64,
    pub mu_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Competition {
    pub network: DispersalNetwork,
    pub p: Vec<f64>,
    pub mu_u: f64,
    pub mu_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sis {
    pub network: DispersalNetwork,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub mu_s: f64,
    pub mu_i: f64,
    /// Total population `N`.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Single(SingleSpecies),
    PredPrey(PredatorPrey),
    Competition(Competition),
    Sis(Sis),
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::validation(format!("{name} has {} entries, expected {n}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::validation(format!("{name}[{i}] is not finite")));
    }
    Ok(())
}

fn check_all(name: &str, v: &[f64], ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    match v.iter().position(|&x| !ok(x)) {
        Some(i) => Err(Error::validation(format!("{name}[{i}] = {} must be {what}", v[i]))),
        None => Ok(()),
    }
}

fn check_rate(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} = {x} must be a finite non-negative rate")))
    }
}

impl SingleSpecies {
    pub fn validate(&self) -> Result<()> {
        let n = self.network.n();
        if self.growth.len() != n {
            return Err(Error::validation(format!("growth has {} entries, expected {n}", self.growth.len())));
        }
        for (i, g) in self.growth.iter().enumerate() {
            match *g {
                Growth::Logistic { r, k } => {
                    if !(r > 0.0 && r.is_finite() && k > 0.0 && k.is_finite()) {
                        return Err(Error::validation(format!("growth[{i}]: logistic needs r > 0 and K > 0")));
                    }
                }
                Growth::Linear { p } => {
                    if !p.is_finite() {
                        return Err(Error::validation(format!("growth[{i}]: p is not finite")));
                    }
                }
            }
        }
        check_len("leak", &self.leak, n)?;
        check_all("leak", &self.leak, |x| x >= 0.0, "non-negative")?;
        check_rate("mu", self.mu)
    }

    /// `f_i(0)` for every patch.
    pub fn growth_at_zero(&self) -> Vec<f64> {
        self.growth.iter().map(Growth::at_zero).collect()
    }

    /// `A − diag(ε)`.
    pub fn lossy_matrix(&self) -> DMatrix<f64> {
        let neg: Vec<f64> = self.leak.iter().map(|e| -e).collect();
        add_diagonal(self.network.matrix(), &neg)
    }
}

impl PredatorPrey {
    pub fn validate(&self) -> Result<()> {
        let n = self.prey_network.n();
        if self.predator_network.n() != n {
            return Err(Error::validation("prey and predator networks differ in size"));
        }
        for (name, v) in [("r", &self.r), ("k", &self.k), ("c", &self.c), ("d", &self.d)] {
            check_len(name, v, n)?;
        }
        check_all("r", &self.r, |x| x > 0.0, "positive")?;
        check_all("k", &self.k, |x| x > 0.0, "positive")?;
        check_all("c", &self.c, |x| x >= 0.0, "non-negative")?;
        check_all("d", &self.d, |x| x >= 0.0, "non-negative")?;
        if self.response.len() != n {
            return Err(Error::validation(format!("response has {} entries, expected {n}", self.response.len())));
        }
        for (i, g) in self.response.iter().enumerate() {
            if let Response::Monod { a } = *g {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::validation(format!("response[{i}]: monod needs a > 0")));
                }
            }
        }
        check_rate("mu_u", self.mu_u)?;
        check_rate("mu_v", self.mu_v)
    }

    /// The prey equations with predators absent.
    pub fn prey_subsystem(&self) -> SingleSpecies {
        SingleSpecies {
            network: self.prey_network.clone(),
            growth: self.r.iter().zip(&self.k).map(|(&r, &k)| Growth::Logistic { r, k }).collect(),
            leak: vec![0.0; self.r.len()],
            mu: self.mu_u,
        }
    }
}

impl Competition {
    pub fn validate(&self) -> Result<()> {
        check_len("p", &self.p, self.network.n())?;
        check_rate("mu_u", self.mu_u)?;
        check_rate("mu_v", self.mu_v)
    }

    /// The `u` equations with `v = 0`.
    pub fn resident_subsystem(&self) -> SingleSpecies {
        SingleSpecies {
            network: self.network.clone(),
            growth: self.p.iter().map(|&p| Growth::Linear { p }).collect(),
            leak: vec![0.0; self.p.len()],
            mu: self.mu_u,
        }
    }
}

impl Sis {
    pub fn validate(&self) -> Result<()> {
        let n = self.network.n();
        check_len("beta", &self.beta, n)?;
        check_len("gamma", &self.gamma, n)?;
        check_all("beta", &self.beta, |x| x >= 0.0, "non-negative")?;
        check_all("gamma", &self.gamma, |x| x > 0.0, "positive")?;
        check_rate("mu_s", self.mu_s)?;
        check_rate("mu_i", self.mu_i)?;
        if !(self.total > 0.0 && self.total.is_finite()) {
            return Err(Error::validation(format!("total population N = {} must be positive", self.total)));
        }
        Ok(())
    }
}

fn mat_vec_into(a: &DMatrix<f64>, scale: f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += a[(i, j)] * x[j];
        }
        out[i] = scale * acc;
    }
}

/// `βSI/(S+I)`, zero when `S + I ≤ 0`.
fn incidence(beta: f64, s: f64, i: f64) -> f64 {
    let total = s + i;
    if total > 0.0 {
        beta * s * i / total
    } else {
        0.0
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Single(m) => m.validate(),
            ModelSpec::PredPrey(m) => m.validate(),
            ModelSpec::Competition(m) => m.validate(),
            ModelSpec::Sis(m) => m.validate(),
        }
    }

    /// Patch count.
    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Single(m) => m.network.n(),
            ModelSpec::PredPrey(m) => m.prey_network.n(),
            ModelSpec::Competition(m) => m.network.n(),
            ModelSpec::Sis(m) => m.network.n(),
        }
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Single(_) => self.n(),
            _ => 2 * self.n(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ModelSpec::Single(_) => "single",
            ModelSpec::PredPrey(_) => "predprey",
            ModelSpec::Competition(_) => "competition",
            ModelSpec::Sis(_) => "sis",
        }
    }

    /// A positive state to start simulations from.
    pub fn default_initial_state(&self) -> Vec<f64> {
        match self {
            ModelSpec::Single(m) => m.growth.iter().map(|g| g.interior_start().max(1e-3)).collect(),
            ModelSpec::PredPrey(m) => m.k.iter().map(|k| k / 2.0).chain(m.k.iter().map(|k| k / 10.0)).collect(),
            ModelSpec::Competition(m) => {
                let top = m.p.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1e-3);
                vec![top / 2.0; 2 * m.p.len()]
            }
            ModelSpec::Sis(m) => {
                let share = m.total / m.beta.len() as f64;
                m.beta.iter().map(|_| 0.9 * share).chain(m.beta.iter().map(|_| 0.1 * share)).collect()
            }
        }
    }

    /// Right-hand side without dimension checks; `out.len() == self.dim()`.
    pub fn eval_rhs(&self, y: &[f64], out: &mut [f64]) {
        match self {
            ModelSpec::Single(m) => {
                mat_vec_into(m.network.matrix(), m.mu, y, out);
                for i in 0..y.len() {
                    out[i] += y[i] * m.growth[i].rate(y[i]) - m.mu * m.leak[i] * y[i];
                }
            }
            ModelSpec::PredPrey(m) => {
                let n = m.r.len();
                let (u, v) = y.split_at(n);
                let (du, dv) = out.split_at_mut(n);
                mat_vec_into(m.prey_network.matrix(), m.mu_u, u, du);
                mat_vec_into(m.predator_network.matrix(), m.mu_v, v, dv);
                for i in 0..n {
                    let g = m.response[i].value(u[i]);
                    du[i] += m.r[i] * u[i] * (1.0 - u[i] / m.k[i]) - g * v[i];
                    dv[i] += v[i] * (m.c[i] * g - m.d[i]);
                }
            }
            ModelSpec::Competition(m) => {
                let n = m.p.len();
                let (u, v) = y.split_at(n);
                let (du, dv) = out.split_at_mut(n);
                mat_vec_into(m.network.matrix(), m.mu_u, u, du);
                mat_vec_into(m.network.matrix(), m.mu_v, v, dv);
                for i in 0..n {
                    let crowd = m.p[i] - u[i] - v[i];
                    du[i] += u[i] * crowd;
                    dv[i] += v[i] * crowd;
                }
            }
            ModelSpec::Sis(m) => {
                let n = m.beta.len();
                let (s, inf) = y.split_at(n);
                let (ds, di) = out.split_at_mut(n);
                mat_vec_into(m.network.matrix(), m.mu_s, s, ds);
                mat_vec_into(m.network.matrix(), m.mu_i, inf, di);
                for j in 0..n {
                    let h = incidence(m.beta[j], s[j], inf[j]);
                    let recover = m.gamma[j] * inf[j];
                    ds[j] += recover - h;
                    di[j] += h - recover;
                }
            }
        }
    }

    /// The right-hand side as an integrator callback.
    pub fn rhs_fn(&self) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        move |_, y, out| self.eval_rhs(y, out)
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.dim() {
            return Err(Error::validation(format!(
                "{} state has {} entries, expected {}",
                self.variant_name(),
                state.len(),
                self.dim()
            )));
        }
        if state.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("state has a non-finite entry"));
        }
        Ok(())
    }
}

/// Time derivative of `state`. The models are autonomous, so `t` is unused.
pub fn model_rhs(spec: &ModelSpec, state: &[f64], _t: f64) -> Result<Vec<f64>> {
    spec.check_state(state)?;
    let mut out = vec![0.0; state.len()];
    spec.eval_rhs(state, &mut out);
    Ok(out)
}

fn put_block(j: &mut DMatrix<f64>, r0: usize, c0: usize, b: &DMatrix<f64>) {
    j.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
}

fn diag(v: impl IntoIterator<Item = f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(v.into_iter().collect()))
}

/// Analytic Jacobian of [`model_rhs`].
pub fn model_jacobian(spec: &ModelSpec, state: &[f64]) -> Result<DMatrix<f64>> {
    spec.check_state(state)?;
    match spec {
        ModelSpec::Single(m) => {
            let d = (0..state.len()).map(|i| {
                let g = &m.growth[i];
                g.rate(state[i]) + state[i] * g.rate_derivative() - m.mu * m.leak[i]
            });
            Ok(m.network.matrix() * m.mu + diag(d))
        }
        ModelSpec::PredPrey(m) => {
            let n = m.r.len();
            let (u, v) = state.split_at(n);
            let mut j = DMatrix::zeros(2 * n, 2 * n);
            let uu = m.prey_network.matrix() * m.mu_u
                + diag((0..n).map(|i| m.r[i] * (1.0 - 2.0 * u[i] / m.k[i]) - m.response[i].derivative(u[i]) * v[i]));
            let uv = diag((0..n).map(|i| -m.response[i].value(u[i])));
            let vu = diag((0..n).map(|i| m.c[i] * m.response[i].derivative(u[i]) * v[i]));
            let vv = m.predator_network.matrix() * m.mu_v
                + diag((0..n).map(|i| m.c[i] * m.response[i].value(u[i]) - m.d[i]));
            put_block(&mut j, 0, 0, &uu);
            put_block(&mut j, 0, n, &uv);
            put_block(&mut j, n, 0, &vu);
            put_block(&mut j, n, n, &vv);
            Ok(j)
        }
        ModelSpec::Competition(m) => {
            let n = m.p.len();
            let (u, v) = state.split_at(n);
            let a = m.network.matrix();
            let mut j = DMatrix::zeros(2 * n, 2 * n);
            put_block(&mut j, 0, 0, &(a * m.mu_u + diag((0..n).map(|i| m.p[i] - 2.0 * u[i] - v[i]))));
            put_block(&mut j, 0, n, &diag(u.iter().map(|x| -x)));
            put_block(&mut j, n, 0, &diag(v.iter().map(|x| -x)));
            put_block(&mut j, n, n, &(a * m.mu_v + diag((0..n).map(|i| m.p[i] - u[i] - 2.0 * v[i]))));
            Ok(j)
        }
        ModelSpec::Sis(m) => {
            let n = m.beta.len();
            let (s, inf) = state.split_at(n);
            if let Some(k) = (0..n).find(|&k| !(s[k] + inf[k] > 0.0)) {
                return Err(Error::domain(format!("incidence is singular in patch {k} where S + I = 0")));
            }
            let dh_ds: Vec<f64> = (0..n).map(|k| m.beta[k] * inf[k] * inf[k] / (s[k] + inf[k]).powi(2)).collect();
            let dh_di: Vec<f64> = (0..n).map(|k| m.beta[k] * s[k] * s[k] / (s[k] + inf[k]).powi(2)).collect();
            let a = m.network.matrix();
            let mut j = DMatrix::zeros(2 * n, 2 * n);
            put_block(&mut j, 0, 0, &(a * m.mu_s - diag(dh_ds.iter().copied())));
            put_block(&mut j, 0, n, &diag((0..n).map(|k| m.gamma[k] - dh_di[k])));
            put_block(&mut j, n, 0, &diag(dh_ds.iter().copied()));
            put_block(&mut j, n, n, &(a * m.mu_i + diag((0..n).map(|k| dh_di[k] - m.gamma[k]))));
            Ok(j)
        }
    }
}

/// Jacobian of the single-species model at the origin,
/// `μ(A − diag ε) + diag f(0)`.
pub fn extinction_jacobian(spec: &SingleSpecies) -> DMatrix<f64> {
    affine_family(&spec.lossy_matrix(), &spec.growth_at_zero(), spec.mu)
}

const NEWTON_MAX: usize = 50;

/// The positive equilibrium of the single-species model.
///
/// Integrates from an interior state until `‖u′‖∞ < √tol`, then polishes with
/// Newton's method to `‖u′‖∞ ≤ tol·max(1, ‖u‖∞)`.
pub fn single_equilibrium(spec: &SingleSpecies, tol: f64) -> Result<Vec<f64>> {
    single_equilibrium_from(spec, None, tol)
}

/// [`single_equilibrium`] started from a chosen positive state.
pub fn single_equilibrium_from(spec: &SingleSpecies, start: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::validation(format!("tolerance {tol} must be positive")));
    }
    let j0 = extinction_jacobian(spec);
    let s0 = spectral_bound(&j0, DEFAULT_EIG_TOL)?;
    if s0 <= 0.0 {
        return Err(Error::domain(format!(
            "no positive equilibrium: s(J) = {s0:e} <= 0 at the origin, the population goes extinct"
        )));
    }
    let model = ModelSpec::Single(spec.clone());
    let y0 = match start {
        Some(s) => {
            model.check_state(s)?;
            s.to_vec()
        }
        None => model.default_initial_state(),
    };
    let cfg = IntegratorConfig { convergence_norm_tol: tol.sqrt(), ..IntegratorConfig::default() };
    let (mut u, traj) = integrate_to_equilibrium(model.rhs_fn(), &y0, &cfg)?;
    if !matches!(traj.termination, Termination::Converged { .. }) {
        return Err(Error::numeric("integration did not settle near an equilibrium", {
            let f = model_rhs(&model, &u, 0.0)?;
            f.iter().fold(0.0, |m, x| m.max(x.abs()))
        }));
    }
    let mut last = f64::INFINITY;
    for _ in 0..NEWTON_MAX {
        let f = DVector::from_vec(model_rhs(&model, &u, 0.0)?);
        let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        last = vec_inf_norm(&f);
        if last <= tol * scale {
            if u.iter().all(|&x| x > 0.0) {
                return Ok(u);
            }
            return Err(Error::numeric(format!("equilibrium {u:?} is not positive"), last));
        }
        let j = model_jacobian(&model, &u)?;
        let step = solve(&j, &(-f)).map_err(|e| e.context(format_args!("Newton iterate {u:?}")))?;
        for (ui, di) in u.iter_mut().zip(step.iter()) {
            *ui += di;
        }
        if u.iter().any(|x| !x.is_finite()) {
            break;
        }
    }
    Err(Error::numeric(format!("Newton polish diverged, last iterate {u:?}"), last))
}

const DEFAULT_EIG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    ExtinctionAllMu,
    PersistenceAllMu,
    ThresholdAt(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    /// `max_i f_i(0)`.
    pub big_m: f64,
    /// `Σ α_i f_i(0)` with `α` the sum-1 principal eigenvector of `A − diag ε`.
    pub m: f64,
    pub alpha: Vec<f64>,
    /// Limit of `s(μ(A − diag ε) + diag f(0))` as `μ → ∞`.
    pub limit_at_infinity: InfiniteLimit,
    pub mu_star: Option<f64>,
    pub verdict: Verdict,
    /// Which branch of the classification applied.
    pub case: &'static str,
    /// `s(J)` at the origin for the configured `μ`.
    pub bound_at_mu: f64,
}

fn degenerate_check(name: &str, x: f64, tol: f64) -> Result<()> {
    if x.abs() <= tol {
        Err(Error::Degenerate(format!("{name} = {x:e} is zero to tolerance")))
    } else {
        Ok(())
    }
}

/// Extinction/persistence classification of the single-species model over
/// all dispersal rates `μ > 0`.
pub fn classify_regime(spec: &SingleSpecies, tol: f64) -> Result<RegimeReport> {
    spec.validate()?;
    if !spec.network.is_strongly_connected() {
        return Err(Error::structure("connectivity matrix is reducible"));
    }
    let b = spec.lossy_matrix();
    let q = spec.growth_at_zero();
    let eig = principal_eigen(&b, tol.min(DEFAULT_EIG_TOL))?;
    let alpha: Vec<f64> = eig.right.iter().copied().collect();
    let big_m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m: f64 = alpha.iter().zip(&q).map(|(a, f)| a * f).sum();
    let bound_at_mu = spectral_bound(&extinction_jacobian(spec), tol.min(DEFAULT_EIG_TOL))?;
    let limits = asymptotic_limits(&b, &q, tol.min(DEFAULT_EIG_TOL))?;
    let report = |verdict, mu_star, case| RegimeReport {
        big_m,
        m,
        alpha: alpha.clone(),
        limit_at_infinity: limits.at_infinity,
        mu_star,
        verdict,
        case,
        bound_at_mu,
    };
    if big_m < -tol {
        return Ok(report(Verdict::ExtinctionAllMu, None, "M < 0"));
    }
    degenerate_check("M", big_m, tol)?;
    match limits.at_infinity {
        InfiniteLimit::Finite(limit) => {
            degenerate_check("m", limit, tol)?;
            if limit > 0.0 {
                Ok(report(Verdict::PersistenceAllMu, None, "lossless, m > 0"))
            } else {
                let mu = threshold_mu(&b, &q, None, tol)?;
                Ok(report(Verdict::ThresholdAt(mu), Some(mu), "lossless, m < 0 < M"))
            }
        }
        InfiniteLimit::NegInfinity => {
            let mu = threshold_mu(&b, &q, None, tol)?;
            Ok(report(Verdict::ThresholdAt(mu), Some(mu), "lossy, M > 0"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredPreyOutcome {
    /// The predator-free equilibrium is stable for every `μ_v > 0`.
    StableForAll,
    /// The predator-free equilibrium is unstable for every `μ_v > 0`.
    UnstableForAll,
    /// Stable above, unstable below.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredPreyReport {
    /// Prey equilibrium without predators.
    pub u_star: Vec<f64>,
    /// `c_i g_i(u*_i) − d_i`.
    pub q: Vec<f64>,
    pub big_m: f64,
    pub limit_at_infinity: InfiniteLimit,
    pub outcome: PredPreyOutcome,
}

/// Stability of the predator-free equilibrium as a function of `μ_v`,
/// decided by the sign of `s(μ_v B + diag(c_i g_i(u*_i) − d_i))`.
pub fn predprey_threshold(spec: &PredatorPrey, tol: f64) -> Result<PredPreyReport> {
    spec.validate()?;
    let u_star = single_equilibrium(&spec.prey_subsystem(), tol)?;
    let q: Vec<f64> = (0..u_star.len()).map(|i| spec.c[i] * spec.response[i].value(u_star[i]) - spec.d[i]).collect();
    let b = spec.predator_network.matrix();
    if !spec.predator_network.is_strongly_connected() {
        return Err(Error::structure("predator network is reducible"));
    }
    let limits = asymptotic_limits(b, &q, tol.min(DEFAULT_EIG_TOL))?;
    let big_m = limits.at_zero;
    let report = |outcome| PredPreyReport {
        u_star: u_star.clone(),
        q: q.clone(),
        big_m,
        limit_at_infinity: limits.at_infinity,
        outcome,
    };
    if big_m < -tol {
        return Ok(report(PredPreyOutcome::StableForAll));
    }
    degenerate_check("M", big_m, tol)?;
    if let InfiniteLimit::Finite(m) = limits.at_infinity {
        degenerate_check("m", m, tol)?;
        if m > 0.0 {
            return Ok(report(PredPreyOutcome::UnstableForAll));
        }
    }
    let mu = threshold_mu(b, &q, None, tol)?;
    Ok(report(PredPreyOutcome::Threshold(mu)))
}

fn require_irreducible_laplacian(net: &DispersalNetwork) -> Result<()> {
    if !net.is_strongly_connected() {
        return Err(Error::structure("connectivity matrix is reducible"));
    }
    if !net.classify().laplacian {
        return Err(Error::validation(
            "columns of the connectivity matrix must sum to zero for a conserved population",
        ));
    }
    Ok(())
}

/// `(Ŝ, 0)` with `Ŝ = αN`.
pub fn disease_free_equilibrium(spec: &Sis) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    require_irreducible_laplacian(&spec.network)?;
    let alpha = principal_eigen(spec.network.matrix(), DEFAULT_EIG_TOL)?.right;
    let s = alpha.iter().map(|a| a * spec.total).collect();
    Ok((s, vec![0.0; spec.beta.len()]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Report {
    pub mu_i: f64,
    pub r0: f64,
    /// `max_j β_j/γ_j`, the limit as `μ_I → 0`.
    pub limit_zero: f64,
    /// `Σα_jβ_j / Σα_jγ_j`, the limit as `μ_I → ∞`.
    pub limit_infinity: f64,
    /// Eigen residual of the next-generation matrix; absent when it is
    /// reducible and the bound came from its blocks.
    pub next_gen_residual: Option<f64>,
}

/// `R₀ = r(−FV⁻¹)` with `F = diag β`, `V = μ_I A − diag γ`.
///
/// `X = −V⁻¹F` is obtained from linear solves and shares its spectrum with
/// `−FV⁻¹`.
pub fn sis_r0(spec: &Sis, mu_i: f64) -> Result<R0Report> {
    spec.validate()?;
    if !(mu_i > 0.0 && mu_i.is_finite()) {
        return Err(Error::domain(format!("mu_I = {mu_i} must be positive")));
    }
    if !spec.network.is_strongly_connected() {
        return Err(Error::structure("connectivity matrix is reducible"));
    }
    let n = spec.beta.len();
    let a = spec.network.matrix();
    let neg_gamma: Vec<f64> = spec.gamma.iter().map(|g| -g).collect();
    let v = affine_family(a, &neg_gamma, mu_i);
    let lu = v.clone().lu();
    let mut x = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut rhs = DVector::zeros(n);
        rhs[j] = -spec.beta[j];
        let col = lu.solve(&rhs).ok_or_else(|| Error::numeric("transition matrix V is singular", f64::NAN))?;
        x.set_column(j, &col);
    }
    // −V⁻¹ is non-negative; drop rounding-level negatives.
    let floor = 1e-14 * inf_norm(&x);
    x.iter_mut().for_each(|e| {
        if *e < 0.0 && *e >= -floor {
            *e = 0.0;
        }
    });
    let (r0, next_gen_residual) = if crate::netmat::strongly_connected(&x) {
        let e = principal_eigen(&x, DEFAULT_EIG_TOL)?;
        (e.value, Some(e.residual))
    } else {
        (spectral_bound(&x, DEFAULT_EIG_TOL)?, None)
    };
    let alpha = principal_eigen(a, DEFAULT_EIG_TOL)?.right;
    let limit_zero = spec.beta.iter().zip(&spec.gamma).map(|(b, g)| b / g).fold(f64::NEG_INFINITY, f64::max);
    let num: f64 = alpha.iter().zip(&spec.beta).map(|(a, b)| a * b).sum();
    let den: f64 = alpha.iter().zip(&spec.gamma).map(|(a, g)| a * g).sum();
    Ok(R0Report { mu_i, r0, limit_zero, limit_infinity: num / den, next_gen_residual })
}

/// [`sis_r0`] over an increasing grid of `μ_I`, evaluated in parallel.
pub fn r0_sweep(spec: &Sis, grid: &[f64]) -> Result<Vec<R0Report>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("mu_I grid must be strictly increasing"));
    }
    grid.par_iter().map(|&mu| sis_r0(spec, mu).map_err(|e| e.context(format_args!("mu_I = {mu}")))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompetitionVerdict {
    SlowerWins,
    BothExtinct,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionReport {
    pub verdict: CompetitionVerdict,
    /// Resident equilibrium of the slower disperser alone, zero when it
    /// cannot persist.
    pub u_star: Vec<f64>,
    pub final_state: Vec<f64>,
    pub final_time: f64,
    /// `‖v(t_end)‖∞`.
    pub v_norm: f64,
    /// `‖u(t_end) − u*‖∞`.
    pub u_distance: f64,
}

/// Simulate two competitors that differ only in dispersal rate and report
/// whether the slower one excludes the faster one by `t_end`.
pub fn competition_outcome(
    spec: &Competition,
    t_end: f64,
    tol: f64,
    initial: Option<&[f64]>,
) -> Result<CompetitionReport> {
    spec.validate()?;
    if !(spec.mu_u < spec.mu_v) {
        return Err(Error::domain(format!("needs mu_u < mu_v, got mu_u = {} and mu_v = {}", spec.mu_u, spec.mu_v)));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::domain(format!("t_end = {t_end} must be positive")));
    }
    if !spec.network.is_strongly_connected() {
        return Err(Error::structure("connectivity matrix is reducible"));
    }
    let big_m = spec.p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(big_m > 0.0) {
        return Err(Error::domain(format!("max p = {big_m} must be positive")));
    }
    let alpha = principal_eigen(spec.network.matrix(), DEFAULT_EIG_TOL)?.right;
    let total: f64 = spec.p.iter().sum();
    let spread = spec.p.iter().zip(alpha.iter()).map(|(p, a)| (p - total * a).abs()).fold(0.0, f64::max);
    if spread <= 1e-9 * spec.p.iter().fold(0.0f64, |m, x| m.max(x.abs())) {
        return Err(Error::Degenerate(
            "p is proportional to the dispersal eigenvector (ideal free case): a continuum of equilibria".into(),
        ));
    }

    let resident = spec.resident_subsystem();
    let n = spec.p.len();
    let u_star = if spectral_bound(&extinction_jacobian(&resident), DEFAULT_EIG_TOL)? > 0.0 {
        single_equilibrium(&resident, tol.min(1e-10))?
    } else {
        vec![0.0; n]
    };

    let model = ModelSpec::Competition(spec.clone());
    let y0 = match initial {
        Some(s) => {
            model.check_state(s)?;
            s.to_vec()
        }
        None => model.default_initial_state(),
    };
    let traj = integrate(model.rhs_fn(), &y0, (0.0, t_end), &IntegratorConfig::default())?;
    if traj.termination == Termination::StepFailure {
        return Err(Error::numeric("integration failed before t_end", traj.last_time()));
    }
    let y = traj.last_state().to_vec();
    let (u, v) = y.split_at(n);
    let v_norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let u_norm = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let u_distance = u.iter().zip(&u_star).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let resident_alive = u_star.iter().any(|&x| x > 0.0);
    let verdict = if resident_alive && v_norm < tol && u_distance < tol.sqrt() {
        CompetitionVerdict::SlowerWins
    } else if v_norm < tol && u_norm < tol {
        CompetitionVerdict::BothExtinct
    } else {
        CompetitionVerdict::Undetermined
    };
    Ok(CompetitionReport { verdict, u_star, final_time: traj.last_time(), final_state: y, v_norm, u_distance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym2() -> DispersalNetwork {
        DispersalNetwork::from_arcs(2, &[(0, 1, 1.0), (1, 0, 1.0)], None).unwrap()
    }

    fn linear_single(p: &[f64], mu: f64) -> SingleSpecies {
        SingleSpecies {
            network: sym2(),
            growth: p.iter().map(|&p| Growth::Linear { p }).collect(),
            leak: vec![0.0; p.len()],
            mu,
        }
    }

    fn fd_jacobian(spec: &ModelSpec, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n {
            let h = 1e-6 * x[c].abs().max(1.0);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[c] += h;
            dn[c] -= h;
            let fu = model_rhs(spec, &up, 0.0).unwrap();
            let fd = model_rhs(spec, &dn, 0.0).unwrap();
            for r in 0..n {
                j[(r, c)] = (fu[r] - fd[r]) / (2.0 * h);
            }
        }
        j
    }

    fn all_variants() -> Vec<ModelSpec> {
        let net = DispersalNetwork::from_arcs(3, &[(0, 1, 1.0), (1, 2, 0.5), (2, 0, 2.0), (1, 0, 0.3)], None).unwrap();
        vec![
            ModelSpec::Single(SingleSpecies {
                network: net.clone(),
                growth: vec![
                    Growth::Logistic { r: 1.0, k: 2.0 },
                    Growth::Linear { p: 0.5 },
                    Growth::Logistic { r: 2.0, k: 1.0 },
                ],
                leak: vec![0.1, 0.0, 0.2],
                mu: 0.7,
            }),
            ModelSpec::PredPrey(PredatorPrey {
                prey_network: net.clone(),
                predator_network: sym_ring(3),
                r: vec![1.0, 2.0, 0.5],
                k: vec![3.0, 1.0, 2.0],
                response: vec![Response::Lotka, Response::Monod { a: 0.5 }, Response::Monod { a: 2.0 }],
                c: vec![0.5, 1.0, 0.2],
                d: vec![0.1, 0.3, 0.2],
                mu_u: 0.4,
                mu_v: 1.3,
            }),
            ModelSpec::Competition(Competition { network: net.clone(), p: vec![1.0, -0.5, 2.0], mu_u: 0.3, mu_v: 0.9 }),
            ModelSpec::Sis(Sis {
                network: net,
                beta: vec![2.0, 0.5, 1.0],
                gamma: vec![1.0, 1.0, 0.5],
                mu_s: 0.6,
                mu_i: 1.1,
                total: 30.0,
            }),
        ]
    }

    fn sym_ring(n: usize) -> DispersalNetwork {
        let arcs: Vec<_> = (0..n).flat_map(|i| [((i + 1) % n, i, 1.0), (i, (i + 1) % n, 1.0)]).collect();
        DispersalNetwork::from_arcs(n, &arcs, None).unwrap()
    }

    #[test]
    fn logistic_at_capacity_is_stationary() {
        let spec = ModelSpec::Single(SingleSpecies {
            network: DispersalNetwork::from_arcs(1, &[], None).unwrap(),
            growth: vec![Growth::Logistic { r: 1.0, k: 5.0 }],
            leak: vec![0.0],
            mu: 1.0,
        });
        assert_eq!(model_rhs(&spec, &[5.0], 0.0).unwrap(), vec![0.0]);
        assert!(matches!(model_rhs(&spec, &[5.0, 1.0], 0.0), Err(Error::Validation(_))));
    }

    #[test]
    fn sis_conserves_mass() {
        let spec = ModelSpec::Sis(Sis {
            network: sym2(),
            beta: vec![4.0, 1.0],
            gamma: vec![1.0, 1.0],
            mu_s: 0.5,
            mu_i: 1.0,
            total: 10.0,
        });
        let f = model_rhs(&spec, &[3.0, 4.0, 2.0, 1.0], 0.0).unwrap();
        assert!(f.iter().sum::<f64>().abs() < 1e-14);
        // empty patch 0: only dispersal remains
        assert_eq!(model_rhs(&spec, &[0.0, 4.0, 0.0, 1.0], 0.0).unwrap()[0], 2.0);
    }

    #[test]
    fn competition_face_is_invariant() {
        let spec = ModelSpec::Competition(Competition { network: sym2(), p: vec![2.0, 1.0], mu_u: 0.5, mu_v: 1.0 });
        let f = model_rhs(&spec, &[1.7, 1.2, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(&f[2..], &[0.0, 0.0]);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for spec in all_variants() {
            let x: Vec<f64> = (0..spec.dim()).map(|i| 0.4 + 0.37 * i as f64).collect();
            let j = model_jacobian(&spec, &x).unwrap();
            let fd = fd_jacobian(&spec, &x);
            let scale = j.amax().max(1.0);
            assert!((j - fd).amax() < 1e-5 * scale, "{}", spec.variant_name());
        }
    }

    #[test]
    fn single_jacobian_at_origin() {
        let ModelSpec::Single(s) = &all_variants()[0] else { unreachable!() };
        let j = model_jacobian(&ModelSpec::Single(s.clone()), &[0.0; 3]).unwrap();
        assert!((j - extinction_jacobian(s)).amax() < 1e-15);
    }

    #[test]
    fn sis_jacobian_rejects_empty_patch() {
        let spec = &all_variants()[3];
        assert!(matches!(model_jacobian(spec, &[0.0, 1.0, 1.0, 0.0, 1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn equilibria() {
        let one = SingleSpecies {
            network: DispersalNetwork::from_arcs(1, &[], None).unwrap(),
            growth: vec![Growth::Logistic { r: 1.0, k: 5.0 }],
            leak: vec![0.0],
            mu: 1.0,
        };
        assert!((single_equilibrium(&one, 1e-12).unwrap()[0] - 5.0).abs() < 1e-10);
        let same = SingleSpecies {
            network: sym2(),
            growth: vec![Growth::Logistic { r: 1.0, k: 3.0 }; 2],
            leak: vec![0.0; 2],
            mu: 0.5,
        };
        let u = single_equilibrium(&same, 1e-12).unwrap();
        assert!((u[0] - 3.0).abs() < 1e-10 && (u[1] - 3.0).abs() < 1e-10);
        let dead = linear_single(&[-1.0, -2.0], 1.0);
        assert!(matches!(single_equilibrium(&dead, 1e-10), Err(Error::Domain(_))));
    }

    #[test]
    fn regimes() {
        let r = classify_regime(&linear_single(&[-1.0, -2.0], 1.0), 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::ExtinctionAllMu);
        let r = classify_regime(&linear_single(&[1.0, -2.0], 1.0), 1e-12).unwrap();
        match r.verdict {
            Verdict::ThresholdAt(mu) => assert!((mu - 2.0).abs() < 1e-9),
            v => panic!("{v:?}"),
        }
        let r = classify_regime(&linear_single(&[1.0, 2.0], 1.0), 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::PersistenceAllMu);
        assert!((r.m - 1.5).abs() < 1e-12);
        assert!(matches!(classify_regime(&linear_single(&[0.0, -2.0], 1.0), 1e-10), Err(Error::Degenerate(_))));
        assert!(matches!(classify_regime(&linear_single(&[1.0, -1.0], 1.0), 1e-10), Err(Error::Degenerate(_))));
        let mut leaky = linear_single(&[1.0, 2.0], 1.0);
        leaky.leak = vec![0.5, 0.0];
        assert!(matches!(classify_regime(&leaky, 1e-10).unwrap().verdict, Verdict::ThresholdAt(_)));
    }

    fn predprey(c: [f64; 2], d: [f64; 2]) -> PredatorPrey {
        PredatorPrey {
            prey_network: sym2(),
            predator_network: sym2(),
            r: vec![1.0; 2],
            k: vec![1.0; 2],
            response: vec![Response::Lotka; 2],
            c: c.to_vec(),
            d: d.to_vec(),
            mu_u: 1.0,
            mu_v: 1.0,
        }
    }

    #[test]
    fn predprey_cases() {
        let r = predprey_threshold(&predprey([1.0, 1.0], [0.0, 3.0]), 1e-12).unwrap();
        match r.outcome {
            PredPreyOutcome::Threshold(mu) => assert!((mu - 2.0).abs() < 1e-8),
            o => panic!("{o:?}"),
        }
        let r = predprey_threshold(&predprey([1.0, 1.0], [2.0, 2.0]), 1e-10).unwrap();
        assert_eq!(r.outcome, PredPreyOutcome::StableForAll);
        let r = predprey_threshold(&predprey([2.0, 2.0], [1.0, 1.0]), 1e-10).unwrap();
        assert_eq!(r.outcome, PredPreyOutcome::UnstableForAll);
    }

    fn sis2() -> Sis {
        Sis { network: sym2(), beta: vec![4.0, 1.0], gamma: vec![1.0, 1.0], mu_s: 1.0, mu_i: 1.0, total: 100.0 }
    }

    #[test]
    fn dfe_examples() {
        let (s, i) = disease_free_equilibrium(&sis2()).unwrap();
        assert!((s[0] - 50.0).abs() < 1e-9 && i == vec![0.0, 0.0]);
        let mut spec = sis2();
        spec.network = DispersalNetwork::from_arcs(2, &[(0, 1, 2.0), (1, 0, 3.0)], None).unwrap();
        spec.total = 10.0;
        let (s, _) = disease_free_equilibrium(&spec).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-9 && (s[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn r0_examples() {
        let r = sis_r0(&sis2(), 1.0).unwrap();
        assert!((r.r0 - (10.0 + 52f64.sqrt()) / 6.0).abs() < 1e-10);
        assert_eq!(r.limit_zero, 4.0);
        assert!((r.limit_infinity - 2.5).abs() < 1e-12);
        let one = Sis {
            network: DispersalNetwork::from_arcs(1, &[], None).unwrap(),
            beta: vec![3.0],
            gamma: vec![2.0],
            mu_s: 1.0,
            mu_i: 1.0,
            total: 1.0,
        };
        for rep in r0_sweep(&one, &[0.1, 1.0, 10.0]).unwrap() {
            assert!((rep.r0 - 1.5).abs() < 1e-12);
        }
        let sweep = r0_sweep(&sis2(), &[0.1, 1.0, 10.0, 100.0]).unwrap();
        assert!(sweep.windows(2).all(|w| w[1].r0 < w[0].r0));
        assert!((sweep[3].r0 - 2.5).abs() < 0.05 * 2.5);
    }

    #[test]
    fn competition_examples() {
        let spec = Competition { network: sym2(), p: vec![2.0, 1.0], mu_u: 0.5, mu_v: 1.0 };
        let r = competition_outcome(&spec, 1e4, 1e-6, None).unwrap();
        assert_eq!(r.verdict, CompetitionVerdict::SlowerWins);
        let spec = Competition { network: sym2(), p: vec![1.0, -4.0], mu_u: 3.0, mu_v: 4.0 };
        let r = competition_outcome(&spec, 1e3, 1e-6, None).unwrap();
        assert_eq!(r.verdict, CompetitionVerdict::BothExtinct);
        let spec = Competition { network: sym2(), p: vec![1.0, 1.0], mu_u: 0.5, mu_v: 1.0 };
        assert!(matches!(competition_outcome(&spec, 10.0, 1e-6, None), Err(Error::Degenerate(_))));
        let spec = Competition { network: sym2(), p: vec![2.0, 1.0], mu_u: 1.0, mu_v: 0.5 };
        assert!(matches!(competition_outcome(&spec, 10.0, 1e-6, None), Err(Error::Domain(_))));
    }
}
