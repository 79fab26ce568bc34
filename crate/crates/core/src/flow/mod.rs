//! Stokes and Navier–Stokes solvers posed in `J^k_BDM` through the
//! streamfunction–harmonic unknowns `(ψ, h)`.

mod block;
mod navier_stokes;
mod simulation;
mod stokes;

pub use block::{
    build_reduced_system, monolithic_solve, schur_solve, BlockSystem, EmbeddingMatrix, GaugedSolver, ReducedSolver, SchurSolution,
    SchurSolver, DENSE_FALLBACK_LIMIT,
};
pub use navier_stokes::{max_speed, step_navier_stokes, NavierStokes};
pub use simulation::{run_simulation, write_state_vtk, SeriesRow, SimulationOutput};
pub use stokes::{reconstruct_pressure, solve_stokes_reduced, solve_stokes_saddle, FlowState, StokesSolver};
