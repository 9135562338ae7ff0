//! Dense and sparse linear algebra, reverse-mode differentiation, weight
//! initialization, the Adam optimizer and a symmetric eigensolver.

mod adam;
mod eigen;
mod gradcheck;
mod init;
mod matrix;
mod sparse;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use eigen::{symmetric_eigs, symmetric_eigs_with, EigenOptions, EigenPair, LinearOperator, Which};
pub use gradcheck::finite_difference_check;
pub use init::xavier_init;
pub use matrix::Matrix;
pub use sparse::SparseMatrix;
pub use tape::{Gradients, ParamId, ParamStore, Parameter, Tape, Var, L2_NORM_FLOOR};

