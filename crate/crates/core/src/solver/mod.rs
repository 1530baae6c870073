//! Training of the attention parameters.

pub mod gradient;
pub mod grid;
pub mod lp;
pub mod qp;
pub mod simplex;

pub use gradient::{train_gradient, GradConfig, GradModel, GradProblem, GradResult, Logits, ParamSet, TargetRef};
pub use grid::{grid_search, GridCell, GridReport};
pub use lp::{solve_lp, LinearProgram, LpInstance, LpOptions, LpSolution};
pub use qp::{solve_qp, solve_qp_gram, QpGram, QpInstance, QpOptions, QpSolution};
pub use simplex::project_simplex;
