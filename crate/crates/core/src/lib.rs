//! Shapley-value explanations of belief-propagation outcomes on discrete
//! pairwise Markov random fields.
//!
//! The crate is generic over the floating-point type through [`Scalar`];
//! the unsuffixed aliases at the crate root fix it to `f64`, the `*32`
//! aliases to `f32`.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bp;
pub mod coalition;
pub mod error;
pub mod eval;
pub mod mrf;
pub mod scalar;
pub mod shapley;

pub use bp::{adaptive_bp, compute_belief, run_bp, run_bp_incremental, run_bp_view, BpConfig, MrfView};
pub use coalition::{
    brute_force_coalitions, coalition_minus, coalitions_containing, collect_coalitions,
    enumerate_coalitions, CanonicalKey, Coalition, EnumConfig, Reduced,
};
pub use baselines::{
    mc_sampling_shapley, pagerank, pagerank_ranking, random_ranking, sensitivity_ranking, Method,
};
pub use error::{Error, Result};
pub use eval::{
    d_sensitivity, generate_synthetic, masked_fidelity, rank_with, speedup_benchmark, sweep_fractions,
    EvalConfig, EvalReport, GraphKind, MethodSettings, SyntheticConfig,
};
pub use mrf::io::{load_mrf, save_mrf, MrfFiles};
pub use mrf::{brute_force_marginal, brute_force_marginals, EdgeId, MrfBuilder, NodeId};
pub use scalar::Scalar;
pub use shapley::{characteristic, explain, symmetric_kl, EvalMode, ExplainOptions, Explainer};

pub type Distribution = mrf::Distribution<f64>;
pub type CompatibilityMatrix = mrf::CompatibilityMatrix<f64>;
pub type Mrf = mrf::Mrf<f64>;
pub type MessageSet = bp::MessageSet<f64>;
pub type BpResult = bp::BpResult<f64>;
pub type ExplanationResult = shapley::ExplanationResult<f64>;
pub type Ranking = baselines::Ranking<f64>;

pub type Distribution32 = mrf::Distribution<f32>;
pub type CompatibilityMatrix32 = mrf::CompatibilityMatrix<f32>;
pub type Mrf32 = mrf::Mrf<f32>;
pub type MessageSet32 = bp::MessageSet<f32>;
pub type BpResult32 = bp::BpResult<f32>;
pub type ExplanationResult32 = shapley::ExplanationResult<f32>;
pub type Ranking32 = baselines::Ranking<f32>;
