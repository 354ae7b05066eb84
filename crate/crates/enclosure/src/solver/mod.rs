//! Split-form Navier solver, DtN extraction and Krylov back ends.

mod dst;
pub mod krylov;
mod navier;
pub mod sparse;
mod system;

pub use dst::DstSolver;
pub use krylov::KrylovConfig;
pub use navier::{
    discrete_laplacian, extract_dtn, normal_derivative, solve_navier, solve_reflected, DtnTrace,
    Field, FieldRole, ForwardSolver, NavierData, Solution, SolveReport,
};
pub use system::{assemble_split_system, laplacian, SplitOperator, SplitSystem};
