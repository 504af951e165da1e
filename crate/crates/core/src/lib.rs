//! Compressive online robust PCA with multiple prior information.
//!
//! Each incoming observation `y_t = Φ(x_t + v_t)` is separated into a
//! sparse part `x_t` and a low-rank part `v_t` using the previous sparse
//! estimates and a low-rank factorisation of past backgrounds as priors.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod prox;
pub mod solvers;

pub use error::{CorpcaError, Result};
pub use nalgebra;
