//! Finite metric MDPs, exact Wasserstein-1 and value-aware model learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`metric`]: finite metric spaces and exact Lipschitz constants.
//! - [`lp`]: a small dense revised-simplex LP solver plus a dense linear solver.
//! - [`transport`]: Wasserstein-1 through its primal coupling LP and its dual
//!   Lipschitz-potential LP, KL divergence and log-domain Sinkhorn.
//! - [`mdp`]: finite MDPs over a metric state space, generators and the
//!   Lipschitz constants of rewards and transition kernels.
//! - [`planner`]: generalized value iteration with non-expansion backups.
//! - [`vaml`]: pointwise model error, the value-aware sup-loss over a
//!   Lipschitz ball and its identity with the scaled squared Wasserstein distance.
//! - [`learner`]: fitting softmax transition models under KL, Wasserstein or
//!   value-aware losses, and measuring the resulting planning gap.

pub mod learner;
pub mod lp;
pub mod mdp;
pub mod metric;
pub mod planner;
pub mod rng;
pub mod transport;
pub mod vaml;

pub use learner::{
    aggregate_loss, compare_losses, fit_model, Comparison, FitConfig, LossKind, ModelClass,
    ModelParams, TrainReport,
};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus, Relation};
pub use mdp::{
    generate_lipschitz_mdp, kernel_lipschitz, load_mdp, reward_lipschitz, save_mdp, FiniteMdp,
    GeneratedMdp, TransitionTensor,
};
pub use metric::{lipschitz_constant, uniform_lipschitz_constant, MetricSpace, ScalarField};
pub use planner::{evaluate_policy, greedy_policy, gvi, BackupOperator, GviConfig, GviResult, QFunction};
pub use transport::{kl_divergence, sinkhorn, wasserstein_dual, wasserstein_primal, Distribution};
pub use vaml::{theorem_bound, vaml_loss, verify_equivalence, EquivalenceReport, ValueClassBound};
