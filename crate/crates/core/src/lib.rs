//! Rank-based fitting of parametric copulas by minimising power divergences
//! between the model and the empirical copula.
//!
//! The crate covers copula families and samplers ([`copula`]), the empirical
//! copula ([`empirical`]), α-, β- and γ-divergences and their losses
//! ([`divergence`]), estimators and sandwich covariance ([`estimation`]),
//! boundedness diagnostics ([`diagnostics`]), cross-validated exponent choice
//! ([`selection`]) and a seeded simulation harness ([`experiments`]).

pub mod copula;
pub mod dependence;
pub mod diagnostics;
pub mod divergence;
pub mod empirical;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod optim;
pub mod selection;
pub mod special;

pub use copula::{Copula, CopulaFamily, FamilyKind};
pub use divergence::{DivergenceKind, DivergenceSpec};
pub use empirical::{pseudo_observations, EmpiricalCopula, PseudoSample};
pub use error::{Error, Result};
pub use estimation::{asymptotic_covariance, fit_mcde, fit_mle, CovarianceReport, FitOptions, FitResult};
pub use matrix::DataMatrix;
