//! Spectral exterior calculus on flat tori and the deformation theory of
//! codimension-one foliations built on it.
//!
//! Forms are finite Fourier sums, so `d`, wedge, contraction, Hodge star and
//! the DGLA operations are exact coefficient manipulations. Nonlinear steps
//! (pointwise division, pullbacks along nonlinear maps) sample on a grid and
//! report their projection residuals.

pub mod dgla;
pub mod error;
pub mod forms;
pub mod hodge;
pub mod levi;
pub mod linalg;
pub mod mc;

pub use error::{Error, Result};
pub use forms::{
    apply_j, apply_j_field, codifferential, ext_d, hodge_star, integrate_top, interior, l2_inner, laplacian,
    lie_derivative, pullback_linear, sup_norm_sq, wedge, ComplexStructure, Domain, FlatTorusDomain, IndexSet,
    TrigForm, VectorField, C64,
};
