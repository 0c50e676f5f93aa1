use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::special::{bvn_cdf, bvn_pdf, norm_quantile};

/// Gaussian copula CDF and `∂ log C / ∂ρ = φ₂ / Φ₂`.
pub(super) fn gaussian_cdf(u: f64, v: f64, rho: f64) -> (f64, f64) {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    let c = bvn_cdf(x, y, rho);
    let dens = bvn_pdf(x, y, rho);
    (c, dens / c)
}

pub(super) fn gaussian_log_pdf(u: f64, v: f64, rho: f64) -> f64 {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    let one_m = 1.0 - rho * rho;
    -0.5 * one_m.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * one_m)
}

pub(super) fn student_log_pdf(u: f64, v: f64, rho: f64, dof: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, dof).expect("validated degrees of freedom");
    let x = t.inverse_cdf(u);
    let y = t.inverse_cdf(v);
    let one_m = 1.0 - rho * rho;
    let q = (x * x - 2.0 * rho * x * y + y * y) / (dof * one_m);
    let joint = ln_gamma(0.5 * (dof + 2.0))
        - ln_gamma(0.5 * dof)
        - (dof * std::f64::consts::PI).ln()
        - 0.5 * one_m.ln()
        - 0.5 * (dof + 2.0) * q.ln_1p();
    let marginal = |z: f64| {
        ln_gamma(0.5 * (dof + 1.0))
            - ln_gamma(0.5 * dof)
            - 0.5 * (dof * std::f64::consts::PI).ln()
            - 0.5 * (dof + 1.0) * (z * z / dof).ln_1p()
    };
    joint - marginal(x) - marginal(y)
}
