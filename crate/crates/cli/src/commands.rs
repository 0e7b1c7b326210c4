use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use spectral_dispersal::linalg::affine_family;
use spectral_dispersal::models::{
    self, extinction_jacobian, model_jacobian, single_equilibrium, CompetitionVerdict, ModelSpec, PredPreyOutcome,
    Verdict,
};
use spectral_dispersal::netmat::{classify_matrix, scc_blocks, strongly_connected, MatrixClass};
use spectral_dispersal::odeint::{integrate, IntegratorConfig, Termination};
use spectral_dispersal::spectral::{self, CurveGrid, InfiniteLimit, DEFAULT_TOL};
use spectral_dispersal::sweeps::{self, SweepReport};
use spectral_dispersal::treecycle::{self, ArcTable, DEFAULT_TREE_GUARD, DEFAULT_UNICYCLIC_GUARD};
use spectral_dispersal::{Error, NoThresholdCase};

use crate::error::CliError;
use crate::output::{csv_string, header, list, Table};
use crate::problem::{load_problem, Arc, ProblemFile};
use crate::{Cli, Command, Global};

/// Text to emit and the exit code on success.
pub struct Output {
    pub text: String,
    pub code: i32,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Output { text, code: 0 }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Flag, then file, then default.
fn pick<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn require<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("missing `{name}`: pass the flag or set `analysis.{name}`")))
}

fn tolerance(g: &Global, p: &ProblemFile) -> f64 {
    pick(g.tol, p.analysis.tol, DEFAULT_TOL)
}

fn guards(g: &Global, p: &ProblemFile) -> (usize, usize) {
    match g.guard_n.or(p.analysis.guard_n) {
        Some(n) => (n, n),
        None => (DEFAULT_TREE_GUARD, DEFAULT_UNICYCLIC_GUARD),
    }
}

pub fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    let load = |f: &Path| load_problem(f);
    match &cli.command {
        Command::Classify { file } => classify(&load(file)?).map(Into::into),
        Command::Bound { file, mu } => bound(g, &load(file)?, *mu).map(Into::into),
        Command::Curve { file, mu_min, mu_max, steps } => {
            curve(g, &load(file)?, *mu_min, *mu_max, *steps).map(Into::into)
        }
        Command::Limits { file } => limits(g, &load(file)?).map(Into::into),
        Command::Threshold { file } => threshold(g, &load(file)?).map(Into::into),
        Command::Karlin { file, mu_grid } => karlin(g, &load(file)?, mu_grid.clone()).map(Into::into),
        Command::TreeVerify { file } => tree_verify(g, &load(file)?).map(Into::into),
        Command::Kvector { file, u, mu, mu_prime } => {
            let p = match file {
                Some(f) => load(f)?,
                None => ProblemFile {
                    schema_version: crate::SCHEMA_VERSION.into(),
                    network: None,
                    q: None,
                    model: None,
                    analysis: Default::default(),
                },
            };
            kvector(&p, u.clone(), *mu, *mu_prime).map(Into::into)
        }
        Command::Simulate { file, t_end, samples } => simulate(&load(file)?, *t_end, *samples).map(Into::into),
        Command::Regime { file } => regime(g, &load(file)?).map(Into::into),
        Command::R0 { file, mu_grid } => r0(&load(file)?, mu_grid.clone()).map(Into::into),
        Command::Compete { file, t_end } => compete(g, &load(file)?, *t_end).map(Into::into),
        Command::Selftest { quick } => selftest(g, *quick),
    }
}

fn class_rows(t: &mut Table, c: &MatrixClass) {
    t.row("quasi_positive", c.quasi_positive)
        .row("laplacian", c.laplacian)
        .row("sub_laplacian", c.sub_laplacian)
        .row("strictly_sub", c.strictly_sub)
        .row("strongly_sub", c.strongly_sub)
        .row("irreducible", c.irreducible);
}

fn classify(p: &ProblemFile) -> Result<String, CliError> {
    let a = p.matrix()?;
    let mut t = Table::default();
    t.row("n", a.nrows());
    class_rows(&mut t, &classify_matrix(&a));
    t.row("strongly_connected", strongly_connected(&a));
    let blocks = scc_blocks(&a);
    let shown: Vec<String> = blocks.blocks.iter().map(|b| list(b.iter().map(|i| i + 1))).collect();
    t.row("blocks", shown.join(" "));
    Ok(t.to_string())
}

fn bound(g: &Global, p: &ProblemFile, mu: Option<f64>) -> Result<String, CliError> {
    let (a, q) = (p.matrix()?, p.q()?);
    let tol = tolerance(g, p);
    let mu = require(mu.or(p.analysis.mu), "mu")?;
    let m = family_checked(&a, q, mu)?;
    let mut t = Table::default();
    t.row("mu", mu).row("s", spectral::spectral_bound(&m, tol)?);
    if strongly_connected(&m) && spectral_dispersal::netmat::is_quasi_positive(&m) {
        let e = spectral::principal_eigen(&m, tol)?;
        t.row("right", list(e.right.iter()))
            .row("left", list(e.left.iter()))
            .row("residual", e.residual)
            .row("iterations", e.iterations);
        let u = p.analysis.cw_vector.clone().unwrap_or_else(|| vec![1.0; a.nrows()]);
        t.row("collatz_wielandt", spectral::collatz_wielandt(&m, &u)?);
    }
    let (lo, hi) = spectral::row_sum_bracket(&a, q, mu)?;
    t.row("row_sum_min", lo).row("row_sum_max", hi);
    Ok(t.to_string())
}

fn family_checked(a: &DMatrix<f64>, q: &[f64], mu: f64) -> Result<DMatrix<f64>, CliError> {
    if q.len() != a.nrows() {
        return Err(CliError::Library(Error::Validation(format!("q has {} entries, expected {}", q.len(), a.nrows()))));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(CliError::Library(Error::Domain(format!("mu = {mu} must be finite and non-negative"))));
    }
    Ok(affine_family(a, q, mu))
}

fn curve(
    g: &Global,
    p: &ProblemFile,
    lo: Option<f64>,
    hi: Option<f64>,
    steps: Option<usize>,
) -> Result<String, CliError> {
    let (a, q) = (p.matrix()?, p.q()?);
    let grid = CurveGrid {
        mu_min: require(lo.or(p.analysis.mu_min), "mu_min")?,
        mu_max: require(hi.or(p.analysis.mu_max), "mu_max")?,
        steps: require(steps.or(p.analysis.steps), "steps")?,
    };
    let c = spectral::bound_curve(&a, q, grid, tolerance(g, p))?;
    let rows: Vec<Vec<f64>> = c.rows.iter().map(|r| vec![r.mu, r.s, r.ds, r.d2s]).collect();
    csv_string(&header(&["mu", "s", "ds", "d2s"]), &rows)
}

fn limit_str(l: InfiniteLimit) -> String {
    l.to_string()
}

fn limits(g: &Global, p: &ProblemFile) -> Result<String, CliError> {
    let (a, q) = (p.matrix()?, p.q()?);
    let l = spectral::asymptotic_limits(&a, q, tolerance(g, p))?;
    let mut t = Table::default();
    t.row("at_zero", l.at_zero).row("at_infinity", limit_str(l.at_infinity));
    if let Some(v) = l.weights {
        t.row("weights", list(v.iter()));
    }
    Ok(t.to_string())
}

fn threshold(g: &Global, p: &ProblemFile) -> Result<String, CliError> {
    let (a, q) = (p.matrix()?, p.q()?);
    let tol = tolerance(g, p);
    let mut t = Table::default();
    match spectral::threshold_mu(&a, q, p.analysis.bracket, tol) {
        Ok(mu) => {
            let s = spectral::spectral_bound(&affine_family(&a, q, mu), tol)?;
            t.row("mu_star", mu).row("s_at_mu_star", s);
        }
        Err(Error::NoThreshold(case)) => {
            let name = match case {
                NoThresholdCase::ExtinctionAllMu => "extinction_all_mu",
                NoThresholdCase::PersistenceAllMu => "persistence_all_mu",
            };
            t.row("mu_star", "no threshold").row("case", name).row("reason", case.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    Ok(t.to_string())
}

const DEFAULT_KARLIN_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

fn karlin(g: &Global, p: &ProblemFile, grid: Option<Vec<f64>>) -> Result<String, CliError> {
    let (m, r) = (p.matrix()?, p.q()?);
    let grid = grid.or_else(|| p.analysis.mu_grid.clone()).unwrap_or_else(|| DEFAULT_KARLIN_GRID.to_vec());
    let tol = tolerance(g, p);
    let mut rows = Vec::with_capacity(grid.len());
    for mu in grid {
        rows.push(vec![mu, spectral::karlin_map(&m, r, mu, tol).map_err(|e| e.context(format_args!("mu = {mu}")))?]);
    }
    csv_string(&header(&["mu", "r"]), &rows)
}

fn tree_verify(g: &Global, p: &ProblemFile) -> Result<String, CliError> {
    let net = p.network()?;
    let n = net.n();
    let (tree_guard, cycle_guard) = guards(g, p);
    let cof = treecycle::principal_cofactors(&net, tree_guard)?;
    let x = match &p.analysis.x {
        Some(x) => x.clone(),
        None => spectral::principal_eigen(net.matrix(), tolerance(g, p).min(1e-12))?.left.iter().copied().collect(),
    };
    let report = match &p.analysis.arc_values {
        Some(values) => {
            let mut table = ArcTable::default();
            for &Arc(i, j, v) in values {
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(CliError::Library(Error::Validation(format!(
                        "analysis.arc_values: arc [{i}, {j}] outside 1..={n}"
                    ))));
                }
                table.0.insert((i - 1, j - 1), v);
            }
            treecycle::tree_cycle_residual(&net, &table, &x, cycle_guard)?
        }
        None => treecycle::tree_cycle_residual(&net, &|_, _, xt: f64, xs: f64| 1.0 - xt / xs, &x, cycle_guard)?,
    };
    let mut trees = Vec::with_capacity(n);
    for root in 0..n {
        trees.push(treecycle::enumerate_in_trees(&net, root, tree_guard)?.len());
    }
    let unicyclic = treecycle::enumerate_unicyclic(&net, cycle_guard)?;
    let mut t = Table::default();
    t.row("n", n)
        .row("cofactors", list(cof.c.iter()))
        .row("alpha", list(cof.alpha.iter()))
        .row("in_trees_per_root", list(trees))
        .row("cofactors_enumerated", cof.enumerated)
        .row("unicyclic_subgraphs", unicyclic.len())
        .row("x", list(x.iter()))
        .row("lhs", report.lhs)
        .row("rhs", report.rhs)
        .row("residual", report.residual)
        .row("cofactor_sum", report.cofactor_sum)
        .row("normalized", report.normalized);
    Ok(t.to_string())
}

fn kvector(p: &ProblemFile, u: Option<Vec<f64>>, mu: Option<f64>, mu_prime: Option<f64>) -> Result<String, CliError> {
    let u = require(u.or_else(|| p.analysis.u.clone()), "u")?;
    let mu = require(mu.or(p.analysis.mu), "mu")?;
    let mu_prime = require(mu_prime.or(p.analysis.mu_prime), "mu_prime")?;
    let kv = treecycle::construct_k_vector(&u, mu, mu_prime)?;
    let mut t = Table::default();
    t.row("u", list(&kv.u))
        .row("mu", mu)
        .row("mu_prime", mu_prime)
        .row("k", list(&kv.k))
        .row("verified", treecycle::verify_k_vector(&kv));
    Ok(t.to_string())
}

fn state_header(spec: &ModelSpec) -> Vec<String> {
    let n = spec.n();
    let names: &[&str] = match spec {
        ModelSpec::Single(_) => &["u"],
        ModelSpec::PredPrey(_) | ModelSpec::Competition(_) => &["u", "v"],
        ModelSpec::Sis(_) => &["S", "I"],
    };
    std::iter::once("t".to_string()).chain(names.iter().flat_map(|s| (1..=n).map(move |i| format!("{s}{i}")))).collect()
}

fn initial_state(spec: &ModelSpec, p: &ProblemFile) -> Result<Vec<f64>, CliError> {
    match &p.analysis.initial {
        Some(y) if y.len() != spec.dim() => Err(CliError::Library(Error::Validation(format!(
            "analysis.initial has {} entries, expected {}",
            y.len(),
            spec.dim()
        )))),
        Some(y) => Ok(y.clone()),
        None => Ok(spec.default_initial_state()),
    }
}

fn simulate(p: &ProblemFile, t_end: Option<f64>, samples: Option<usize>) -> Result<String, CliError> {
    let spec = p.model()?;
    let t_end = require(t_end.or(p.analysis.t_end), "t_end")?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CliError::Library(Error::Domain(format!("t_end = {t_end} must be positive"))));
    }
    let y0 = initial_state(&spec, p)?;
    models::model_rhs(&spec, &y0, 0.0)?;
    let tr = integrate(spec.rhs_fn(), &y0, (0.0, t_end), &IntegratorConfig::default())?;
    if tr.termination == Termination::StepFailure {
        return Err(CliError::Library(Error::Numeric {
            message: format!("integration stopped at t = {}", tr.last_time()),
            residual: tr.error_estimate,
        }));
    }
    let rows: Vec<Vec<f64>> = match samples.or(p.analysis.samples) {
        Some(k) if k < 2 => return Err(usage("samples must be at least 2")),
        Some(k) => (0..k)
            .map(|i| {
                let t = if i + 1 == k { t_end } else { t_end * i as f64 / (k - 1) as f64 };
                let y = tr.sample(t).expect("t lies inside the trajectory");
                std::iter::once(t).chain(y).collect()
            })
            .collect(),
        None => tr
            .times
            .iter()
            .zip(&tr.states)
            .map(|(&t, y)| std::iter::once(t).chain(y.iter().copied()).collect())
            .collect(),
    };
    csv_string(&state_header(&spec), &rows)
}

fn stability_at(spec: &ModelSpec, state: &[f64], tol: f64) -> Result<f64, CliError> {
    let j = model_jacobian(spec, state)?;
    Ok(spectral::spectral_bound(&j, tol)?)
}

fn regime(g: &Global, p: &ProblemFile) -> Result<String, CliError> {
    let spec = p.model()?;
    let tol = tolerance(g, p);
    let mut t = Table::default();
    t.row("variant", spec.variant_name());
    match &spec {
        ModelSpec::Single(s) => {
            let r = models::classify_regime(s, tol)?;
            let verdict = match r.verdict {
                Verdict::ExtinctionAllMu => "extinction_all_mu".to_string(),
                Verdict::PersistenceAllMu => "persistence_all_mu".to_string(),
                Verdict::ThresholdAt(mu) => format!("threshold_at({mu})"),
            };
            t.row("M", r.big_m)
                .row("m", r.m)
                .row("alpha", list(&r.alpha))
                .row("limit_at_infinity", limit_str(r.limit_at_infinity))
                .row("case", r.case)
                .row("verdict", verdict)
                .row("mu", s.mu)
                .row("s_at_origin", r.bound_at_mu);
            if r.bound_at_mu > 0.0 {
                let u = single_equilibrium(s, tol)?;
                t.row("u_star", list(&u)).row("s_at_u_star", stability_at(&spec, &u, tol)?);
            }
        }
        ModelSpec::PredPrey(s) => {
            let r = models::predprey_threshold(s, tol)?;
            let outcome = match r.outcome {
                PredPreyOutcome::StableForAll => "stable_all_mu_v".to_string(),
                PredPreyOutcome::UnstableForAll => "unstable_all_mu_v".to_string(),
                PredPreyOutcome::Threshold(mu) => format!("threshold_at({mu})"),
            };
            let e1: Vec<f64> = r.u_star.iter().copied().chain(std::iter::repeat(0.0).take(r.u_star.len())).collect();
            t.row("u_star", list(&r.u_star))
                .row("q", list(&r.q))
                .row("M", r.big_m)
                .row("limit_at_infinity", limit_str(r.limit_at_infinity))
                .row("outcome", outcome)
                .row("mu_v", s.mu_v)
                .row("s_at_e1", stability_at(&spec, &e1, tol)?);
        }
        ModelSpec::Competition(s) => {
            let resident = s.resident_subsystem();
            let alive = spectral::spectral_bound(&extinction_jacobian(&resident), tol)? > 0.0;
            let u = if alive { single_equilibrium(&resident, tol)? } else { vec![0.0; s.p.len()] };
            let boundary: Vec<f64> = u.iter().copied().chain(std::iter::repeat(0.0).take(u.len())).collect();
            t.row("u_star", list(&u)).row("s_at_u_star_0", stability_at(&spec, &boundary, tol)?);
        }
        ModelSpec::Sis(s) => {
            let (sh, i) = models::disease_free_equilibrium(s)?;
            let dfe: Vec<f64> = sh.iter().chain(&i).copied().collect();
            let r = models::sis_r0(s, s.mu_i)?;
            t.row("s_hat", list(&sh)).row("r0", r.r0).row("s_at_dfe", stability_at(&spec, &dfe, tol)?);
        }
    }
    Ok(t.to_string())
}

fn r0(p: &ProblemFile, grid: Option<Vec<f64>>) -> Result<String, CliError> {
    let ModelSpec::Sis(spec) = p.model()? else {
        return Err(CliError::Library(Error::Validation("r0 needs an sis model".into())));
    };
    let grid = grid.or_else(|| p.analysis.mu_grid.clone()).unwrap_or_else(|| vec![spec.mu_i]);
    let reports = models::r0_sweep(&spec, &grid)?;
    let rows: Vec<Vec<f64>> = reports.iter().map(|r| vec![r.mu_i, r.r0]).collect();
    csv_string(&header(&["mu_I", "r0"]), &rows)
}

fn compete(g: &Global, p: &ProblemFile, t_end: Option<f64>) -> Result<String, CliError> {
    let ModelSpec::Competition(spec) = p.model()? else {
        return Err(CliError::Library(Error::Validation("compete needs a competition model".into())));
    };
    let t_end = require(t_end.or(p.analysis.t_end), "t_end")?;
    let tol = pick(g.tol, p.analysis.tol, 1e-6);
    let r = models::competition_outcome(&spec, t_end, tol, p.analysis.initial.as_deref())?;
    let verdict = match r.verdict {
        CompetitionVerdict::SlowerWins => "slower_wins",
        CompetitionVerdict::BothExtinct => "both_extinct",
        CompetitionVerdict::Undetermined => "undetermined",
    };
    let mut t = Table::default();
    t.row("verdict", verdict)
        .row("u_star", list(&r.u_star))
        .row("final_time", r.final_time)
        .row("final_state", list(&r.final_state))
        .row("v_norm", r.v_norm)
        .row("u_distance", r.u_distance);
    Ok(t.to_string())
}

/// Sweep sizes: `(full, quick)` instance counts.
fn run_sweeps(seed: u64, quick: bool) -> Vec<SweepReport> {
    let k = |full: usize, small: usize| if quick { small } else { full };
    vec![
        sweeps::monotonicity_sweep(seed, k(500, 50), 20),
        sweeps::constant_q_sweep(seed, k(100, 20), 20),
        sweeps::reducible_monotonicity_sweep(seed, k(200, 20), 10),
        sweeps::karlin_sweep(seed, k(100, 20)),
        sweeps::matrix_tree_sweep(seed, k(200, 20)),
        sweeps::tree_cycle_sweep(seed, k(100, 20)),
        sweeps::k_vector_sweep(seed, k(500, 50)),
        sweeps::r0_sign_sweep(seed, k(100, 20)),
        sweeps::mass_conservation_sweep(seed, k(20, 5)),
        sweeps::competition_sweep(seed, k(20, 4), 5, 1e4),
    ]
}

fn selftest(g: &Global, quick: bool) -> Result<Output, CliError> {
    let seed = g.seed.ok_or_else(|| usage("selftest needs --seed so a failure can be replayed"))?;
    let mut text = String::new();
    let mut failed = false;
    for r in run_sweeps(seed, quick) {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        failed |= !r.passed();
        writeln!(text, "{status}  {:<40}  cases {:>6}  failures {}", r.name, r.cases, r.failures)
            .expect("string write");
        if let Some(f) = &r.first_failure {
            writeln!(text, "      first failure: {f}").expect("string write");
        }
    }
    Ok(Output { text, code: if failed { 1 } else { 0 } })
}
