//! Seeded random instances and the randomized property sweeps.
//!
//! Every instance `k` of a sweep draws from its own ChaCha stream
//! `(seed, k)`, so results do not depend on how instances are scheduled.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::affine_family;
use crate::models::{self, Competition, ModelSpec, Sis};
use crate::netmat::DispersalNetwork;
use crate::odeint::{integrate, IntegratorConfig};
use crate::spectral::{karlin_map, principal_eigen, spectral_bound};
use crate::treecycle::{self, ArcTable};

/// Generator for instance `k` of a sweep seeded with `seed`.
pub fn instance_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Off-diagonal pattern containing a random Hamiltonian cycle plus each other
/// arc with probability `density`; weights uniform in `weights`.
fn irreducible_offdiag(rng: &mut impl Rng, n: usize, density: f64, weights: (f64, f64)) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    if n == 1 {
        return m;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 0..n {
        let (s, t) = (order[k], order[(k + 1) % n]);
        m[(t, s)] = rng.random_range(weights.0..=weights.1);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] == 0.0 && rng.random_bool(density) {
                m[(i, j)] = rng.random_range(weights.0..=weights.1);
            }
        }
    }
    m
}

/// Irreducible quasi-positive matrix with diagonal in `[-3, 1)`.
pub fn random_irreducible_quasi_positive(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut m = irreducible_offdiag(rng, n, 0.3, (0.1, 2.0));
    for i in 0..n {
        m[(i, i)] = rng.random_range(-3.0..1.0);
    }
    m
}

/// Reducible quasi-positive matrix: two or more irreducible diagonal blocks
/// with one-way coupling, randomly relabelled.
pub fn random_reducible_quasi_positive(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    assert!(n >= 2);
    let cut = rng.random_range(1..n);
    let mut m = DMatrix::zeros(n, n);
    let first = random_irreducible_quasi_positive(rng, cut);
    let second = random_irreducible_quasi_positive(rng, n - cut);
    m.view_mut((0, 0), (cut, cut)).copy_from(&first);
    m.view_mut((cut, cut), (n - cut, n - cut)).copy_from(&second);
    for i in 0..cut {
        for j in cut..n {
            if rng.random_bool(0.4) {
                m[(i, j)] = rng.random_range(0.1..2.0);
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    DMatrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])])
}

/// Strongly connected network with arc weights in `(0, 2]` and zero column
/// sums.
pub fn random_network(rng: &mut impl Rng, n: usize) -> DispersalNetwork {
    let off = irreducible_offdiag(rng, n, 0.35, (f64::EPSILON, 2.0));
    crate::netmat::build_network(n, &off, None).expect("generated rates are valid")
}

/// Column-stochastic irreducible matrix.
pub fn random_stochastic(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut p = irreducible_offdiag(rng, n, 0.4, (0.1, 2.0));
    for i in 0..n {
        if rng.random_bool(0.5) {
            p[(i, i)] = rng.random_range(0.1..2.0);
        }
    }
    for j in 0..n {
        let s = p.column(j).sum();
        if s == 0.0 {
            p[(j, j)] = 1.0;
        } else {
            p.column_mut(j).scale_mut(1.0 / s);
        }
    }
    p
}

/// `n ≥ 2` values uniform in `[lo, hi)`, not all equal.
pub fn random_nonconstant(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        let (a, b) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if b - a > 1e-3 * (hi - lo) {
            return v;
        }
    }
}

/// Outcome of one randomized sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Description of the lowest-indexed failing instance.
    pub first_failure: Option<String>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Run `check` on instances `0..count` in parallel. Each returns the number of
/// checks it made and, on failure, a description.
fn run_sweep<F>(name: &'static str, seed: u64, count: usize, check: F) -> SweepReport
where
    F: Fn(&mut ChaCha8Rng) -> (usize, Result<(), String>) + Sync,
{
    let outcomes: Vec<(usize, Result<(), String>)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = instance_rng(seed, k);
            let (n, r) = check(&mut rng);
            (n, r.map_err(|e| format!("instance {k}: {e}")))
        })
        .collect();
    let cases = outcomes.iter().map(|o| o.0).sum();
    let failures = outcomes.iter().filter(|o| o.1.is_err()).count();
    let first_failure = outcomes.into_iter().find_map(|o| o.1.err());
    SweepReport { name, cases, failures, first_failure }
}

const SWEEP_TOL: f64 = 1e-13;

fn bound_of(a: &DMatrix<f64>, q: &[f64], mu: f64) -> Result<f64, String> {
    spectral_bound(&affine_family(a, q, mu), SWEEP_TOL).map_err(|e| format!("mu = {mu}: {e}"))
}

/// Random irreducible `A` shifted so that `s(A) = 0`.
fn normalized_irreducible(rng: &mut impl Rng, n: usize) -> Result<DMatrix<f64>, String> {
    let m = random_irreducible_quasi_positive(rng, n);
    let s = principal_eigen(&m, SWEEP_TOL).map_err(|e| e.to_string())?.value;
    Ok(&m - DMatrix::identity(n, n) * s)
}

/// Slope and curvature of `μ ↦ s(μA + Q)` by finite differences with step
/// `0.1μ`, widened when rounding hides the curvature, at `points` log-uniform `μ ∈ (0.01, 100)`, over `instances`
/// irreducible `A` with `s(A) = 0`, `n ≤ 8`, and non-constant `Q`.
pub fn monotonicity_sweep(seed: u64, instances: usize, points: usize) -> SweepReport {
    run_sweep("monotone decreasing and convex in mu", seed, instances, |rng| slope_check(rng, points, false))
}

/// Constant `Q = cI` on the same family: `|slope| < 1e-9` everywhere.
pub fn constant_q_sweep(seed: u64, instances: usize, points: usize) -> SweepReport {
    run_sweep("constant q gives a flat bound", seed, instances, |rng| slope_check(rng, points, true))
}

fn slope_check(rng: &mut ChaCha8Rng, points: usize, constant: bool) -> (usize, Result<(), String>) {
    let n = rng.random_range(2..=8);
    let a = match normalized_irreducible(rng, n) {
        Ok(a) => a,
        Err(e) => return (1, Err(e)),
    };
    let q = if constant { vec![rng.random_range(-2.0..2.0); n] } else { random_nonconstant(rng, n, -2.0, 2.0) };
    for _ in 0..points {
        let mu = log_uniform(rng, 0.01, 100.0);
        let r = if constant {
            central_slope(&a, &q, mu, 0.1 * mu).and_then(|slope| {
                if slope.abs() < 1e-9 {
                    Ok(())
                } else {
                    Err(format!("constant q, mu = {mu}: slope {slope:e}"))
                }
            })
        } else {
            strict_shape(&a, &q, mu).map_err(|e| format!("n = {n}, {e}"))
        };
        if r.is_err() {
            return (points, r);
        }
    }
    (points, Ok(()))
}

fn central_slope(a: &DMatrix<f64>, q: &[f64], mu: f64, h: f64) -> Result<f64, String> {
    Ok((bound_of(a, q, mu + h)? - bound_of(a, q, mu - h)?) / (2.0 * h))
}

/// Steps tried, as fractions of `μ`, when the second difference is lost in
/// rounding.
const CURVATURE_STEPS: [f64; 3] = [0.1, 0.5, 0.9];

/// `slope < 0` and `curvature > 0` at `μ`. A second difference within the
/// rounding floor of the three values is unresolved and retried with a
/// wider step; unresolved at every step counts as a failure.
fn strict_shape(a: &DMatrix<f64>, q: &[f64], mu: f64) -> Result<(), String> {
    let mut last = String::new();
    for frac in CURVATURE_STEPS {
        let h = frac * mu;
        let (lo, mid, hi) = (bound_of(a, q, mu - h)?, bound_of(a, q, mu)?, bound_of(a, q, mu + h)?);
        let slope = (hi - lo) / (2.0 * h);
        if !(slope < 0.0) {
            return Err(format!("mu = {mu}: slope {slope:e}"));
        }
        let second = hi - 2.0 * mid + lo;
        let floor = 16.0 * f64::EPSILON * lo.abs().max(mid.abs()).max(hi.abs());
        let curvature = second / (h * h);
        if second > floor {
            return Ok(());
        }
        if second < -floor {
            return Err(format!("mu = {mu}, h = {h:e}: curvature {curvature:e}"));
        }
        last = format!("mu = {mu}: curvature {curvature:e} within rounding at every step up to h = {h:e}");
    }
    Err(last)
}

/// Non-strict monotonicity and convexity for reducible `A` with `s(A) = 0`.
pub fn reducible_monotonicity_sweep(seed: u64, instances: usize, points: usize) -> SweepReport {
    run_sweep("reducible: non-increasing and convex", seed, instances, |rng| {
        let n = rng.random_range(2..=8);
        let m = random_reducible_quasi_positive(rng, n);
        let s = match spectral_bound(&m, SWEEP_TOL) {
            Ok(s) => s,
            Err(e) => return (1, Err(e.to_string())),
        };
        let a = &m - DMatrix::identity(n, n) * s;
        let q = random_nonconstant(rng, n, -2.0, 2.0);
        for _ in 0..points {
            let mu = log_uniform(rng, 0.01, 100.0);
            let h = 0.1 * mu;
            let slack = 1e-9 * (1.0 + mu);
            let r = (|| -> Result<(), String> {
                let (lo, mid, hi) = (bound_of(&a, &q, mu - h)?, bound_of(&a, &q, mu)?, bound_of(&a, &q, mu + h)?);
                if hi > lo + slack || hi - 2.0 * mid + lo < -slack {
                    return Err(format!("mu = {mu}: s = ({lo}, {mid}, {hi})"));
                }
                Ok(())
            })();
            if r.is_err() {
                return (points, r);
            }
        }
        (points, Ok(()))
    })
}

/// `r(((1−μ)I + μP)R)` strictly decreasing over `μ = 0.1, …, 0.9` for
/// non-constant `R`, and constant for `R = cI`.
pub fn karlin_sweep(seed: u64, instances: usize) -> SweepReport {
    run_sweep("karlin map strictly decreasing", seed, instances, |rng| {
        let n = rng.random_range(2..=6);
        let p = random_stochastic(rng, n);
        let r = random_nonconstant(rng, n, 0.2, 3.0);
        let c = rng.random_range(0.2..3.0);
        let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let run = || -> Result<(), String> {
            let mut prev = f64::INFINITY;
            for &mu in &grid {
                let v = karlin_map(&p, &r, mu, SWEEP_TOL).map_err(|e| e.to_string())?;
                if !(v < prev) {
                    return Err(format!("n = {n}: r({mu}) = {v} not below {prev}"));
                }
                prev = v;
                let flat = karlin_map(&p, &vec![c; n], mu, SWEEP_TOL).map_err(|e| e.to_string())?;
                if (flat - c).abs() > 1e-10 * c {
                    return Err(format!("R = {c} I: r({mu}) = {flat}"));
                }
            }
            Ok(())
        };
        (grid.len(), run())
    })
}

/// Determinant cofactors against in-tree sums, and `α` against the
/// eigensolver's null vector.
pub fn matrix_tree_sweep(seed: u64, instances: usize) -> SweepReport {
    run_sweep("matrix-tree cofactors", seed, instances, |rng| {
        let n = rng.random_range(2..=6);
        let g = random_network(rng, n);
        let run = || -> Result<(), String> {
            let cof = treecycle::principal_cofactors(&g, 0).map_err(|e| e.to_string())?;
            for k in 0..n {
                let sum: f64 =
                    treecycle::enumerate_in_trees(&g, k, n).map_err(|e| e.to_string())?.iter().map(|t| t.weight).sum();
                if (sum - cof.c[k]).abs() > 1e-9 * sum.abs() {
                    return Err(format!("cofactor {k}: det {} vs trees {sum}", cof.c[k]));
                }
            }
            let e = principal_eigen(g.matrix(), SWEEP_TOL).map_err(|e| e.to_string())?;
            let gap = (&cof.alpha - &e.right).amax();
            if gap > 1e-10 {
                return Err(format!("alpha differs from null vector by {gap:e}"));
            }
            Ok(())
        };
        (1, run())
    })
}

/// Tree-Cycle residual on random graphs and arc tables, plus the count of
/// (in-tree, arc) pairs behind every unicyclic subgraph.
pub fn tree_cycle_sweep(seed: u64, instances: usize) -> SweepReport {
    run_sweep("tree-cycle identity", seed, instances, |rng| {
        let n = rng.random_range(2..=5);
        let g = random_network(rng, n);
        let mut table = ArcTable::default();
        for (t, s, _) in g.arcs() {
            table.0.insert((t, s), rng.random_range(-1.0..1.0));
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let run = || -> Result<(), String> {
            let r = treecycle::tree_cycle_residual(&g, &table, &x, n).map_err(|e| e.to_string())?;
            if r.residual > 1e-9 * (1.0 + r.lhs.abs()) {
                return Err(format!("lhs {} rhs {} residual {:e}", r.lhs, r.rhs, r.residual));
            }
            check_decomposition(&g)
        };
        (1, run())
    })
}

/// Each unicyclic subgraph with a cycle of length `ℓ` is hit by exactly `ℓ`
/// pairs (in-tree rooted at `s`, arc `s -> t`).
pub fn check_decomposition(g: &DispersalNetwork) -> Result<(), String> {
    let n = g.n();
    let unicyclic = treecycle::enumerate_unicyclic(g, n).map_err(|e| e.to_string())?;
    let mut hits = vec![0usize; unicyclic.len()];
    let mut lookup = std::collections::HashMap::new();
    for (k, q) in unicyclic.iter().enumerate() {
        lookup.insert(q.arcs.clone(), k);
    }
    for root in 0..n {
        for tree in treecycle::enumerate_in_trees(g, root, n).map_err(|e| e.to_string())? {
            for (t, s, _) in g.arcs() {
                if s != root {
                    continue;
                }
                let mut arcs = tree.arcs.clone();
                arcs.push((s, t));
                arcs.sort_unstable();
                match lookup.get(&arcs) {
                    Some(&k) => hits[k] += 1,
                    None => return Err(format!("tree at {root} plus arc {s}->{t} is not unicyclic")),
                }
            }
        }
    }
    for (q, h) in unicyclic.iter().zip(&hits) {
        if *h != q.cycle.len() {
            return Err(format!("cycle of length {} reached {h} times", q.cycle.len()));
        }
    }
    Ok(())
}

/// Constructed k-vectors pass the full pairwise check.
pub fn k_vector_sweep(seed: u64, instances: usize) -> SweepReport {
    run_sweep("k-vector inequalities", seed, instances, |rng| {
        let n = rng.random_range(1..=10);
        let mut u: Vec<f64> = (0..n).map(|_| log_uniform(rng, 0.1, 10.0)).collect();
        if n > 2 && rng.random_bool(0.3) {
            u[n - 1] = u[0];
        }
        let mu = log_uniform(rng, 0.01, 100.0);
        let mu_prime = log_uniform(rng, 0.01, 100.0);
        let run = || -> Result<(), String> {
            let kv = treecycle::construct_k_vector(&u, mu, mu_prime).map_err(|e| e.to_string())?;
            if treecycle::verify_k_vector(&kv) {
                Ok(())
            } else {
                Err(format!("u = {u:?}, mu = {mu}, mu' = {mu_prime}"))
            }
        };
        (1, run())
    })
}

fn sign(x: f64, zero: f64) -> i8 {
    if x > zero {
        1
    } else if x < -zero {
        -1
    } else {
        0
    }
}

fn random_sis(rng: &mut impl Rng, n: usize) -> Sis {
    Sis {
        network: random_network(rng, n),
        beta: (0..n).map(|_| rng.random_range(0.0..3.0)).collect(),
        gamma: (0..n).map(|_| rng.random_range(0.2..2.0)).collect(),
        mu_s: log_uniform(rng, 0.1, 10.0),
        mu_i: log_uniform(rng, 0.01, 100.0),
        total: rng.random_range(1.0..1000.0),
    }
}

/// `sign(R₀ − 1) = sign(s(μ_I A + diag(β − γ)))`.
pub fn r0_sign_sweep(seed: u64, instances: usize) -> SweepReport {
    run_sweep("R0 - 1 and s(V + F) share a sign", seed, instances, |rng| {
        let n = rng.random_range(2..=6);
        let spec = random_sis(rng, n);
        let run = || -> Result<(), String> {
            let r = models::sis_r0(&spec, spec.mu_i).map_err(|e| e.to_string())?;
            let q: Vec<f64> = spec.beta.iter().zip(&spec.gamma).map(|(b, g)| b - g).collect();
            let s = bound_of(spec.network.matrix(), &q, spec.mu_i)?;
            if sign(r.r0 - 1.0, 1e-9) != sign(s, 1e-9) {
                return Err(format!("R0 = {}, s = {s:e}", r.r0));
            }
            Ok(())
        };
        (1, run())
    })
}

/// Total SIS population over `t ∈ [0, 100]` on random 3-patch specs.
pub fn mass_conservation_sweep(seed: u64, instances: usize) -> SweepReport {
    run_sweep("SIS total population conserved", seed, instances, |rng| {
        let spec = random_sis(rng, 3);
        let share = spec.total / 3.0;
        let y0: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..share)).collect();
        let scale = spec.total / y0.iter().sum::<f64>();
        let y0: Vec<f64> = y0.iter().map(|x| x * scale).collect();
        let model = ModelSpec::Sis(spec.clone());
        let run = || -> Result<(), String> {
            let tr = integrate(model.rhs_fn(), &y0, (0.0, 100.0), &IntegratorConfig::default())
                .map_err(|e| e.to_string())?;
            let drift = tr.states.iter().map(|s| (s.iter().sum::<f64>() - spec.total).abs()).fold(0.0, f64::max);
            if drift >= 1e-6 * spec.total {
                return Err(format!("drift {drift:e} for N = {}", spec.total));
            }
            Ok(())
        };
        (1, run())
    })
}

/// Random competition spec with `m > 0`, `μ_v ∈ [2μ_u, 5μ_u]` and `p` away
/// from proportional to `α`.
pub fn random_competition(rng: &mut impl Rng, n: usize) -> Competition {
    loop {
        let network = random_network(rng, n);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
        let alpha = match principal_eigen(network.matrix(), SWEEP_TOL) {
            Ok(e) => e.right,
            Err(_) => continue,
        };
        let m: f64 = alpha.iter().zip(&p).map(|(a, p)| a * p).sum();
        let total: f64 = p.iter().sum();
        let spread = p.iter().zip(alpha.iter()).map(|(p, a)| (p - total * a).abs()).fold(0.0, f64::max);
        if m <= 0.1 || spread < 0.2 {
            continue;
        }
        let mu_u = rng.random_range(0.1..1.0);
        let mu_v = mu_u * rng.random_range(2.0..5.0);
        return Competition { network, p, mu_u, mu_v };
    }
}

/// `s(μ_v A + diag(p − u*))`, the linear rate at which `v` dies out near
/// `(u*, 0)`.
fn exclusion_rate(spec: &Competition, u_star: &[f64]) -> Result<f64, String> {
    let q: Vec<f64> = spec.p.iter().zip(u_star).map(|(p, u)| p - u).collect();
    bound_of(spec.network.matrix(), &q, spec.mu_v)
}

/// Slower disperser excludes the faster one from `starts` random interior
/// states by `t_end`: `‖v‖∞ < 1e-5` and `‖u − u*‖∞ < 1e-4`.
pub fn competition_sweep(seed: u64, specs: usize, starts: usize, t_end: f64) -> SweepReport {
    run_sweep("slower disperser wins", seed, specs, |rng| {
        let n = 2 + rng.random_range(0..2);
        let spec = random_competition(rng, n);
        let inits: Vec<Vec<f64>> =
            (0..starts).map(|_| (0..2 * n).map(|_| rng.random_range(0.1..2.0)).collect()).collect();
        let run = || -> Result<(), String> {
            for y0 in &inits {
                let r = models::competition_outcome(&spec, t_end, 1e-5, Some(y0)).map_err(|e| e.to_string())?;
                if !(r.v_norm < 1e-5 && r.u_distance < 1e-4) {
                    return Err(format!(
                        "p = {:?}, mu = ({}, {}): |v| = {:e}, |u - u*| = {:e}, exclusion rate {:e}",
                        spec.p,
                        spec.mu_u,
                        spec.mu_v,
                        r.v_norm,
                        r.u_distance,
                        exclusion_rate(&spec, &r.u_star)?
                    ));
                }
            }
            Ok(())
        };
        (starts, run())
    })
}
