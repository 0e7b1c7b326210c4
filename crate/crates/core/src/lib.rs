//! Spectral bounds `s(μA + Q)` of dispersal matrices, exact Matrix-Tree and
//! Tree-Cycle enumeration, and four patch-dynamics models built on them.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod models;
pub mod netmat;
pub mod odeint;
pub mod spectral;
pub mod sweeps;
pub mod treecycle;

pub use error::{Error, NoThresholdCase, Result};
pub use models::{
    classify_regime, competition_outcome, model_jacobian, model_rhs, predprey_threshold, single_equilibrium, sis_r0,
    ModelSpec, Verdict,
};
pub use netmat::{
    build_network, classify_matrix, scc_blocks, strongly_connected, BlockDecomposition, DiagRule, DispersalNetwork,
    MatrixClass,
};
pub use odeint::{integrate, integrate_to_equilibrium, IntegratorConfig, Termination, Trajectory};
pub use spectral::{
    asymptotic_limits, bound_curve, bound_derivative, collatz_wielandt, karlin_map, principal_eigen, spectral_bound,
    threshold_mu, CurveGrid, EigenTriple, InfiniteLimit, LimitPair, SpectralCurve,
};
pub use treecycle::{
    construct_k_vector, principal_cofactors, tree_cycle_residual, verify_k_vector, ArcFunction, ArcTable, KVector,
};
