//! Grids, tridiagonal eigensolving and time propagation.

pub mod eigen;
pub mod grid;
pub mod propagate;

pub use eigen::{discretize_hamiltonian, eigensolve, EigenResult, TridiagonalOperator};
pub use grid::{wrap_phase, SpatialGrid, WavefunctionState, MIN_POINTS};
pub use propagate::{propagate, propagate_sampled, CrankNicolson, NORM_DRIFT_LIMIT};
