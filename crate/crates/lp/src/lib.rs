//! A small, dependency-light LP toolkit: sparse problem model, bounded
//! revised simplex in primal and dual flavours, an exhaustive vertex
//! oracle for tiny instances, and MPS interchange.

mod brute;
mod error;
mod factor;
mod mps;
mod problem;
mod simplex;

pub use brute::{brute_force, BruteForceOutcome, BruteMode, GRID_POINT_LIMIT, VERTEX_COLUMN_CAP, VERTEX_SUBSET_LIMIT};
pub use error::LpError;
pub use mps::{read_mps, write_mps};
pub use problem::{Column, KktResiduals, LpProblem, LpSolution, Row, RowKind, Sense, Status, VarStatus};
pub use simplex::{solve, solve_dual_simplex, SolverOptions};
