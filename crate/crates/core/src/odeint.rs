//! Dormand–Prince 5(4) integration with PI step control, non-negativity
//! clamping and equilibrium detection.

use crate::error::{Error, Result};

// Dormand & Prince (1980), "A family of embedded Runge-Kutta formulae",
// J. Comput. Appl. Math. 6(1), Table 2.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// `‖f(y)‖∞` below which [`integrate_to_equilibrium`] stops.
    pub convergence_norm_tol: f64,
    /// Largest time [`integrate_to_equilibrium`] integrates to.
    pub time_cap: f64,
    /// Clamp small negative excursions of components that started the step
    /// non-negative.
    pub clamp_nonnegative: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 1_000_000,
            convergence_norm_tol: 1e-8,
            time_cap: 1e6,
            clamp_nonnegative: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} = {x} must be positive")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("convergence_norm_tol", self.convergence_norm_tol)?;
        positive("time_cap", self.time_cap)?;
        if self.max_steps == 0 {
            return Err(Error::validation("max_steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    ReachedEnd,
    Converged { at_time: f64 },
    StepFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub termination: Termination,
    /// Components clamped to zero over the whole run.
    pub clamp_events: usize,
    pub rejected_steps: usize,
    /// Sum over accepted steps of `‖local error estimate‖∞`.
    pub error_estimate: f64,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    /// Linear interpolation between accepted steps; `None` outside the span.
    pub fn sample(&self, t: f64) -> Option<Vec<f64>> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        let (lo, hi) = if first <= last { (first, last) } else { (last, first) };
        if !(t >= lo && t <= hi) {
            return None;
        }
        let forward = last >= first;
        let k = self
            .times
            .partition_point(|&s| if forward { s <= t } else { s >= t })
            .clamp(1, self.times.len().max(2) - 1);
        if self.times.len() == 1 {
            return Some(self.states[0].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let theta = if t1 == t0 { 0.0 } else { (t - t0) / (t1 - t0) };
        Some(self.states[k - 1].iter().zip(&self.states[k]).map(|(a, b)| a + theta * (b - a)).collect())
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct Stepper<F> {
    rhs: F,
    n: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    ynew: Vec<f64>,
    err: Vec<f64>,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Stepper<F> {
    fn new(rhs: F, n: usize) -> Self {
        Stepper {
            rhs,
            n,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            ynew: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    fn eval(&mut self, t: f64, y: &[f64], slot: usize) {
        (self.rhs)(t, y, &mut self.k[slot]);
    }

    /// `tmp = y + h Σ a_s k_s`, then `k[slot] = f(t + c h, tmp)`.
    fn stage(&mut self, t: f64, y: &[f64], h: f64, c: f64, coeffs: &[(usize, f64)], slot: usize) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for &(s, a) in coeffs {
                acc += a * self.k[s][i];
            }
            self.tmp[i] = y[i] + h * acc;
        }
        (self.rhs)(t + c * h, &self.tmp, &mut self.k[slot]);
    }

    /// One trial step from `(t, y)` with `k[0] = f(t, y)`. Leaves the
    /// 5th-order solution in `ynew`, `f(t + h, ynew)` in `k[6]` and the error
    /// estimate in `err`.
    fn step(&mut self, t: f64, y: &[f64], h: f64) {
        self.stage(t, y, h, C2, &[(0, A21)], 1);
        self.stage(t, y, h, C3, &[(0, A31), (1, A32)], 2);
        self.stage(t, y, h, C4, &[(0, A41), (1, A42), (2, A43)], 3);
        self.stage(t, y, h, C5, &[(0, A51), (1, A52), (2, A53), (3, A54)], 4);
        self.stage(t, y, h, 1.0, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 5);
        self.stage(t, y, h, 1.0, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], 6);
        self.ynew.copy_from_slice(&self.tmp);
        for i in 0..self.n {
            self.err[i] = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
        }
    }
}

fn scaled_error(err: &[f64], y: &[f64], ynew: &[f64], cfg: &IntegratorConfig) -> f64 {
    err.iter()
        .zip(y.iter().zip(ynew))
        .map(|(e, (a, b))| e.abs() / (cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(
    st: &mut Stepper<F>,
    t: f64,
    y: &[f64],
    span: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let scale: Vec<f64> = y.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let d0 = y.iter().zip(&scale).map(|(v, s)| (v / s).abs()).fold(0.0, f64::max);
    let d1 = st.k[0].iter().zip(&scale).map(|(v, s)| (v / s).abs()).fold(0.0, f64::max);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(span.abs());
    let y1: Vec<f64> = y.iter().zip(&st.k[0]).map(|(v, f)| v + h0 * span.signum() * f).collect();
    let mut f1 = vec![0.0; st.n];
    (st.rhs)(t + h0 * span.signum(), &y1, &mut f1);
    let d2 = f1.iter().zip(&st.k[0]).zip(&scale).map(|((a, b), s)| ((a - b) / s).abs()).fold(0.0, f64::max) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    if !h1.is_finite() {
        return h0;
    }
    (100.0 * h0).min(h1).min(span.abs())
}

/// Integrate `y′ = f(t, y)` from `t_span.0` to `t_span.1`, which may run
/// backwards. A step-count overrun or step-size underflow ends the run with
/// [`Termination::StepFailure`] and the partial trajectory.
///
/// ```
/// use spectral_dispersal::odeint::{integrate, IntegratorConfig};
///
/// let traj = integrate(|_, y, dy| dy[0] = -y[0], &[1.0], (0.0, 1.0), &IntegratorConfig::default()).unwrap();
/// assert!((traj.last_state()[0] - (-1.0f64).exp()).abs() < 1e-7);
/// ```
pub fn integrate<F>(rhs: F, y0: &[f64], t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::validation("time span must be finite"));
    }
    if !all_finite(y0) {
        return Err(Error::validation("initial state has a non-finite entry"));
    }
    let n = y0.len();
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0.to_vec()],
        termination: Termination::ReachedEnd,
        clamp_events: 0,
        rejected_steps: 0,
        error_estimate: 0.0,
    };
    if t0 == t1 || n == 0 {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let mut st = Stepper::new(rhs, n);
    let mut t = t0;
    let mut y = y0.to_vec();
    st.eval(t, &y, 0);
    if !all_finite(&st.k[0]) {
        return Err(Error::validation("right-hand side is not finite at the initial state"));
    }
    let mut h = initial_step(&mut st, t, &y, t1 - t0, cfg) * dir;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        if steps >= cfg.max_steps {
            traj.termination = Termination::StepFailure;
            return Ok(traj);
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h.abs() < h_min {
            traj.termination = Termination::StepFailure;
            return Ok(traj);
        }
        let last = (t + h - t1) * dir >= 0.0;
        if last {
            h = t1 - t;
        }
        steps += 1;
        st.step(t, &y, h);

        if !all_finite(&st.ynew) || !all_finite(&st.k[6]) {
            traj.rejected_steps += 1;
            last_rejected = true;
            h *= 0.5;
            continue;
        }
        let err = scaled_error(&st.err, &y, &st.ynew, cfg);
        let fac11 = err.powf(0.2 - 0.75 * BETA);
        if err > 1.0 {
            traj.rejected_steps += 1;
            last_rejected = true;
            h /= (1.0 / FAC_MIN).min(fac11 / SAFETY);
            continue;
        }

        let mut clamped = 0usize;
        if cfg.clamp_nonnegative {
            let deep = (0..n).any(|i| y[i] >= 0.0 && st.ynew[i] < -cfg.abs_tol);
            if deep {
                traj.rejected_steps += 1;
                last_rejected = true;
                h *= 0.5;
                continue;
            }
            for i in 0..n {
                if y[i] >= 0.0 && st.ynew[i] < 0.0 {
                    st.ynew[i] = 0.0;
                    clamped += 1;
                }
            }
        }

        t = if last { t1 } else { t + h };
        y.copy_from_slice(&st.ynew);
        traj.error_estimate += inf_norm(&st.err);
        traj.clamp_events += clamped;
        traj.times.push(t);
        traj.states.push(y.clone());
        if clamped > 0 {
            st.eval(t, &y, 0);
        } else {
            st.k.swap(0, 6);
        }
        if last {
            return Ok(traj);
        }

        let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut hnew = h / fac;
        facold = err.max(1e-4);
        if last_rejected {
            hnew = hnew.abs().min(h.abs()) * dir;
        }
        last_rejected = false;
        h = hnew;
    }
}

/// Integrate in windows of doubling length until `‖f(y)‖∞` drops below
/// `cfg.convergence_norm_tol` or `cfg.time_cap` is reached. Returns the last
/// state and the concatenated trajectory; convergence shows up as
/// [`Termination::Converged`].
pub fn integrate_to_equilibrium<F>(mut rhs: F, y0: &[f64], cfg: &IntegratorConfig) -> Result<(Vec<f64>, Trajectory)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    if !all_finite(y0) {
        return Err(Error::validation("initial state has a non-finite entry"));
    }
    let n = y0.len();
    let mut f = vec![0.0; n];
    let mut whole = Trajectory {
        times: vec![0.0],
        states: vec![y0.to_vec()],
        termination: Termination::ReachedEnd,
        clamp_events: 0,
        rejected_steps: 0,
        error_estimate: 0.0,
    };
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut window = 1.0;
    loop {
        rhs(t, &y, &mut f);
        if inf_norm(&f) < cfg.convergence_norm_tol {
            whole.termination = Termination::Converged { at_time: t };
            return Ok((y, whole));
        }
        if t >= cfg.time_cap {
            whole.termination = Termination::ReachedEnd;
            return Ok((y, whole));
        }
        let t_next = (t + window).min(cfg.time_cap);
        let seg = integrate(&mut rhs, &y, (t, t_next), cfg)?;
        whole.times.extend_from_slice(&seg.times[1..]);
        whole.states.extend(seg.states[1..].iter().cloned());
        whole.clamp_events += seg.clamp_events;
        whole.rejected_steps += seg.rejected_steps;
        whole.error_estimate += seg.error_estimate;
        y = seg.last_state().to_vec();
        if seg.termination == Termination::StepFailure {
            whole.termination = Termination::StepFailure;
            return Ok((y, whole));
        }
        t = t_next;
        window *= 2.0;
    }
}
