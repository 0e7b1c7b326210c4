//! JSON problem files.
//!
//! Patch indices are 1-based in files. An arc `[i, j, rate]` is movement from
//! patch `j` into patch `i`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use spectral_dispersal::models::{Competition, Growth, ModelSpec, PredatorPrey, Response, SingleSpecies, Sis};
use spectral_dispersal::netmat::{DiagRule, DispersalNetwork};
use spectral_dispersal::Error;

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkBlock>,
    /// Diagonal of `Q`; the growth factors `R` for `karlin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default, skip_serializing_if = "Analysis::is_empty")]
    pub analysis: Analysis,
}

/// `[i, j, value]`: arc `j -> i`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc(pub usize, pub usize, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlock {
    pub n: usize,
    #[serde(default)]
    pub arcs: Vec<Arc>,
    /// Supplied diagonal; omitted means every column sums to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<f64>>,
    /// Per-patch loss rates `ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelBlock {
    Single {
        growth: Vec<GrowthBlock>,
        mu: f64,
    },
    Predprey {
        predator_network: NetworkBlock,
        r: Vec<f64>,
        k: Vec<f64>,
        response: Vec<ResponseBlock>,
        c: Vec<f64>,
        d: Vec<f64>,
        mu_u: f64,
        mu_v: f64,
    },
    Competition {
        p: Vec<f64>,
        mu_u: f64,
        mu_v: f64,
    },
    Sis {
        beta: Vec<f64>,
        gamma: Vec<f64>,
        mu_s: f64,
        mu_i: f64,
        total: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GrowthBlock {
    Logistic { r: f64, k: f64 },
    Linear { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ResponseBlock {
    Lotka,
    Monod { a: f64 },
}

/// Command options. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_values: Option<Vec<Arc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cw_vector: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard_n: Option<usize>,
}

impl Analysis {
    fn is_empty(&self) -> bool {
        *self == Analysis::default()
    }
}

/// Read and parse a problem file; errors name the offending field.
pub fn load_problem(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Parse(format!("at `{path}`: {}", e.into_inner()))
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Parse(format!(
            "at `schema_version`: unsupported version {:?}, expected {SCHEMA_VERSION:?}",
            file.schema_version
        )));
    }
    Ok(file)
}

fn at(path: &str, e: Error) -> CliError {
    CliError::Library(e.context(format_args!("{path}")))
}

impl NetworkBlock {
    pub fn to_network(&self, path: &str) -> Result<DispersalNetwork, CliError> {
        let n = self.n;
        if n == 0 {
            return Err(at(path, Error::Validation("n must be at least 1".into())));
        }
        let mut arcs = Vec::with_capacity(self.arcs.len());
        for (k, &Arc(i, j, rate)) in self.arcs.iter().enumerate() {
            let here = format!("{path}.arcs[{k}]");
            for idx in [i, j] {
                if idx == 0 || idx > n {
                    return Err(at(&here, Error::Validation(format!("patch index {idx} outside 1..={n}"))));
                }
            }
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(at(&here, Error::Validation(format!("rate {rate} must be finite and non-negative"))));
            }
            arcs.push((i - 1, j - 1, rate));
        }
        if let Some(leak) = &self.leak {
            if leak.len() != n || leak.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                return Err(at(
                    &format!("{path}.leak"),
                    Error::Validation(format!("needs {n} finite non-negative rates")),
                ));
            }
        }
        DispersalNetwork::from_arcs(n, &arcs, self.diagonal.as_deref()).map_err(|e| at(path, e))
    }

    pub fn from_network(g: &DispersalNetwork, leak: Option<Vec<f64>>) -> Self {
        let m = g.matrix();
        NetworkBlock {
            n: g.n(),
            arcs: g.arcs().into_iter().map(|(t, s, w)| Arc(t + 1, s + 1, w)).collect(),
            diagonal: match g.diag_rule() {
                DiagRule::Supplied => Some((0..g.n()).map(|i| m[(i, i)]).collect()),
                DiagRule::Auto => None,
            },
            leak,
        }
    }

    /// `A − diag(ε)`.
    pub fn effective_matrix(&self, path: &str) -> Result<DMatrix<f64>, CliError> {
        let g = self.to_network(path)?;
        let mut a = g.matrix().clone();
        if let Some(leak) = &self.leak {
            for (i, e) in leak.iter().enumerate() {
                a[(i, i)] -= e;
            }
        }
        Ok(a)
    }
}

impl GrowthBlock {
    fn to_growth(self) -> Growth {
        match self {
            GrowthBlock::Logistic { r, k } => Growth::Logistic { r, k },
            GrowthBlock::Linear { p } => Growth::Linear { p },
        }
    }

    fn from_growth(g: Growth) -> Self {
        match g {
            Growth::Logistic { r, k } => GrowthBlock::Logistic { r, k },
            Growth::Linear { p } => GrowthBlock::Linear { p },
        }
    }
}

impl ResponseBlock {
    fn to_response(self) -> Response {
        match self {
            ResponseBlock::Lotka => Response::Lotka,
            ResponseBlock::Monod { a } => Response::Monod { a },
        }
    }

    fn from_response(r: Response) -> Self {
        match r {
            Response::Lotka => ResponseBlock::Lotka,
            Response::Monod { a } => ResponseBlock::Monod { a },
        }
    }
}

impl ProblemFile {
    pub fn network_block(&self) -> Result<&NetworkBlock, CliError> {
        self.network
            .as_ref()
            .ok_or_else(|| CliError::Library(Error::Validation("problem file has no `network` block".into())))
    }

    pub fn network(&self) -> Result<DispersalNetwork, CliError> {
        self.network_block()?.to_network("network")
    }

    /// The dispersal matrix with leak applied.
    pub fn matrix(&self) -> Result<DMatrix<f64>, CliError> {
        self.network_block()?.effective_matrix("network")
    }

    pub fn q(&self) -> Result<&[f64], CliError> {
        self.q.as_deref().ok_or_else(|| CliError::Library(Error::Validation("problem file has no `q` block".into())))
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let block = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Library(Error::Validation("problem file has no `model` block".into())))?;
        let net = self.network_block()?;
        let network = net.to_network("network")?;
        if net.leak.is_some() && !matches!(block, ModelBlock::Single { .. }) {
            return Err(at("network.leak", Error::Validation("only the single-species model has loss rates".into())));
        }
        let spec = match block {
            ModelBlock::Single { growth, mu } => ModelSpec::Single(SingleSpecies {
                growth: growth.iter().map(|g| g.to_growth()).collect(),
                leak: net.leak.clone().unwrap_or_else(|| vec![0.0; network.n()]),
                mu: *mu,
                network,
            }),
            ModelBlock::Predprey { predator_network, r, k, response, c, d, mu_u, mu_v } => {
                ModelSpec::PredPrey(PredatorPrey {
                    prey_network: network,
                    predator_network: predator_network.to_network("model.predator_network")?,
                    r: r.clone(),
                    k: k.clone(),
                    response: response.iter().map(|r| r.to_response()).collect(),
                    c: c.clone(),
                    d: d.clone(),
                    mu_u: *mu_u,
                    mu_v: *mu_v,
                })
            }
            ModelBlock::Competition { p, mu_u, mu_v } => {
                ModelSpec::Competition(Competition { network, p: p.clone(), mu_u: *mu_u, mu_v: *mu_v })
            }
            ModelBlock::Sis { beta, gamma, mu_s, mu_i, total } => ModelSpec::Sis(Sis {
                network,
                beta: beta.clone(),
                gamma: gamma.clone(),
                mu_s: *mu_s,
                mu_i: *mu_i,
                total: *total,
            }),
        };
        spec.validate().map_err(|e| at("model", e))?;
        Ok(spec)
    }

    /// Serializable form of a model, with its network(s).
    pub fn from_model(spec: &ModelSpec) -> Self {
        let (network, model) = match spec {
            ModelSpec::Single(s) => {
                let leak = s.leak.iter().any(|&e| e != 0.0).then(|| s.leak.clone());
                (
                    NetworkBlock::from_network(&s.network, leak),
                    ModelBlock::Single {
                        growth: s.growth.iter().map(|&g| GrowthBlock::from_growth(g)).collect(),
                        mu: s.mu,
                    },
                )
            }
            ModelSpec::PredPrey(s) => (
                NetworkBlock::from_network(&s.prey_network, None),
                ModelBlock::Predprey {
                    predator_network: NetworkBlock::from_network(&s.predator_network, None),
                    r: s.r.clone(),
                    k: s.k.clone(),
                    response: s.response.iter().map(|&r| ResponseBlock::from_response(r)).collect(),
                    c: s.c.clone(),
                    d: s.d.clone(),
                    mu_u: s.mu_u,
                    mu_v: s.mu_v,
                },
            ),
            ModelSpec::Competition(s) => (
                NetworkBlock::from_network(&s.network, None),
                ModelBlock::Competition { p: s.p.clone(), mu_u: s.mu_u, mu_v: s.mu_v },
            ),
            ModelSpec::Sis(s) => (
                NetworkBlock::from_network(&s.network, None),
                ModelBlock::Sis {
                    beta: s.beta.clone(),
                    gamma: s.gamma.clone(),
                    mu_s: s.mu_s,
                    mu_i: s.mu_i,
                    total: s.total,
                },
            ),
        };
        ProblemFile {
            schema_version: SCHEMA_VERSION.into(),
            network: Some(network),
            q: None,
            model: Some(model),
            analysis: Analysis::default(),
        }
    }
}
