//! Minimum copula divergence and pseudo-likelihood fitting.

mod covariance;
mod init;

pub use covariance::{asymptotic_covariance, asymptotic_covariance_with, CovarianceKernel, CovarianceReport};
pub use init::{initial_estimate, kendall_to_theta};

use serde::{Deserialize, Serialize};

use crate::copula::{Copula, CopulaFamily};
use crate::divergence::{loss_and_grad, DivergenceSpec};
use crate::empirical::PseudoSample;
use crate::error::{Error, Result};
use crate::optim::{bracketed_root, gradient_descent, minimize_scalar, ScalarOptions, VectorOptions};

/// Which optimizer drives the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    /// Bracketed scalar search for one parameter, gradient descent otherwise.
    #[default]
    Auto,
    Bracketed,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Abscissa tolerance in transformed coordinates.
    pub tol: f64,
    /// Magnitude cap on transformed coordinates.
    pub bound: f64,
    pub optimizer: OptimizerChoice,
    /// Starting parameters; Kendall/Spearman inversion when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            bound: 30.0,
            optimizer: OptimizerChoice::Auto,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Mcde(DivergenceSpec),
    PseudoMle,
}

impl FitMethod {
    pub fn label(&self) -> String {
        match self {
            FitMethod::Mcde(spec) => format!("{spec}-MCDE"),
            FitMethod::PseudoMle => "MLE".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub loss_at_opt: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the objective gradient in the natural parameter.
    pub gradient_norm: f64,
    pub method: FitMethod,
    /// The optimum sits on the search bound of the transformed domain.
    pub boundary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceReport>,
}

impl FitResult {
    pub fn copula(&self, family: CopulaFamily) -> Result<Copula> {
        Copula::new(family, self.theta_hat.clone())
    }
}

fn check_sample(sample: &PseudoSample, family: &CopulaFamily) -> Result<()> {
    if sample.d() != family.dim {
        return Err(Error::InvalidInput(format!(
            "sample has {} columns but the {} family has dimension {}",
            sample.d(),
            family.kind,
            family.dim
        )));
    }
    if sample.n() < sample.d() + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} observations, got {}",
            sample.d() + 1,
            sample.n()
        )));
    }
    if let Some(j) = sample.constant_column() {
        return Err(Error::InvalidInput(format!("column {j} is constant")));
    }
    Ok(())
}

/// Objective over transformed coordinates, with its natural-parameter gradient.
trait Objective {
    fn family(&self) -> &CopulaFamily;
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
    /// Whether [`Objective::gradient`] is exact (enables root polishing).
    fn exact_gradient(&self) -> bool;

    fn value_x(&self, x: &[f64]) -> f64 {
        let theta = self.family().from_unconstrained(x);
        if self.family().validate(&theta).is_err() {
            return f64::INFINITY;
        }
        self.value(&theta)
    }

    fn gradient_x(&self, x: &[f64]) -> Vec<f64> {
        let fam = self.family();
        let theta = fam.from_unconstrained(x);
        let jac = fam.unconstrained_jacobian(x);
        self.gradient(&theta).iter().zip(jac).map(|(g, j)| g * j).collect()
    }
}

struct McdeObjective<'a> {
    family: CopulaFamily,
    spec: DivergenceSpec,
    sample: &'a PseudoSample,
    chat: &'a [f64],
}

impl Objective for McdeObjective<'_> {
    fn family(&self) -> &CopulaFamily {
        &self.family
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let Ok(c) = Copula::new(self.family, theta.to_vec()) else {
            return f64::INFINITY;
        };
        loss_and_grad(&self.spec, self.sample.matrix(), self.chat, &c, None).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![f64::NAN; theta.len()];
        if let Ok(c) = Copula::new(self.family, theta.to_vec()) {
            let _ = loss_and_grad(&self.spec, self.sample.matrix(), self.chat, &c, Some(&mut g));
        }
        g
    }

    fn exact_gradient(&self) -> bool {
        true
    }
}

struct MleObjective<'a> {
    family: CopulaFamily,
    sample: &'a PseudoSample,
}

impl Objective for MleObjective<'_> {
    fn family(&self) -> &CopulaFamily {
        &self.family
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let Ok(c) = Copula::new(self.family, theta.to_vec()) else {
            return f64::INFINITY;
        };
        let mut total = 0.0;
        for row in self.sample.matrix().rows() {
            total -= c.eval_log_pdf(row);
        }
        if total.is_nan() {
            f64::INFINITY
        } else {
            total
        }
    }

    /// Central differences in transformed coordinates, mapped back.
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let fam = self.family;
        let x = fam.to_unconstrained(theta);
        let jac = fam.unconstrained_jacobian(&x);
        (0..x.len())
            .map(|k| {
                let h = 1e-5 * (1.0 + x[k].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let d = (self.value_x(&xp) - self.value_x(&xm)) / (2.0 * h);
                d / jac[k]
            })
            .collect()
    }

    fn exact_gradient(&self) -> bool {
        false
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn run<O: Objective>(obj: &O, sample: &PseudoSample, method: FitMethod, opts: &FitOptions) -> Result<FitResult> {
    let family = *obj.family();
    let theta0 = match &opts.initial {
        Some(t) => {
            family.validate(t)?;
            t.clone()
        }
        None => initial_estimate(sample, &family)?,
    };
    let x0 = family.to_unconstrained(&theta0);
    let use_scalar = match opts.optimizer {
        OptimizerChoice::Auto => x0.len() == 1,
        OptimizerChoice::Bracketed => {
            if x0.len() != 1 {
                return Err(Error::Usage(
                    "bracketed search needs a one-parameter family".into(),
                ));
            }
            true
        }
        OptimizerChoice::GradientDescent => false,
    };

    let (x_hat, iterations, mut converged, boundary) = if use_scalar {
        let sopts = ScalarOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            bound: opts.bound,
            ..ScalarOptions::default()
        };
        let res = minimize_scalar(|x| obj.value_x(&[x]), x0[0], &sopts);
        let mut x = res.x;
        if obj.exact_gradient() && !res.at_bound {
            x = polish(obj, x, res.fx);
        }
        (vec![x], res.iterations, res.converged && !res.at_bound, res.at_bound)
    } else {
        let vopts = VectorOptions {
            grad_tol: 1e-9 * sample.n() as f64,
            max_iter: opts.max_iter,
            bound: opts.bound,
            ..VectorOptions::default()
        };
        let res = gradient_descent(
            |x, g| {
                let v = obj.value_x(x);
                if v.is_finite() {
                    g.copy_from_slice(&obj.gradient_x(x));
                } else {
                    g.fill(0.0);
                }
                v
            },
            &x0,
            &vopts,
        );
        let at_bound = res.x.iter().any(|v| v.abs() >= opts.bound);
        (res.x, res.iterations, res.converged && !at_bound, at_bound)
    };

    let theta_hat = family.from_unconstrained(&x_hat);
    let loss_at_opt = obj.value(&theta_hat);
    let gradient_norm = norm(&obj.gradient(&theta_hat));
    if !loss_at_opt.is_finite() {
        converged = false;
    }
    Ok(FitResult {
        theta_hat,
        loss_at_opt,
        iterations,
        converged,
        gradient_norm,
        method,
        boundary,
        covariance: None,
    })
}

/// Refines a Brent minimizer to a root of the exact derivative, if one is
/// bracketed nearby and the objective does not get worse.
fn polish<O: Objective>(obj: &O, x: f64, fx: f64) -> f64 {
    let dx = |t: f64| obj.gradient_x(&[t])[0];
    let g0 = dx(x);
    if !g0.is_finite() || g0 == 0.0 {
        return x;
    }
    let slack = 1e-10 * (fx.abs() + 1.0);
    for width in [1e-6, 1e-4, 1e-2] {
        let delta = width * (1.0 + x.abs());
        let (a, b) = if g0 > 0.0 { (x - delta, x) } else { (x, x + delta) };
        if let Some(r) = bracketed_root(dx, a, b, 1e-15, 200) {
            if obj.value_x(&[r]) <= fx + slack {
                return r;
            }
            return x;
        }
    }
    x
}

/// Minimum copula divergence estimator: minimizes the sample loss for `spec`.
pub fn fit_mcde(
    sample: &PseudoSample,
    family: &CopulaFamily,
    spec: &DivergenceSpec,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_sample(sample, family)?;
    if !family.supports_cdf() {
        return Err(Error::Unsupported(format!(
            "MCDE needs the copula CDF, which the {} family lacks",
            family.kind
        )));
    }
    let method = FitMethod::Mcde(*spec);
    let chat = sample.empirical().eval_at_sample();
    if family.param_count() == 0 {
        return fixed_fit(method, || {
            let c = Copula::new(*family, vec![])?;
            loss_and_grad(spec, sample.matrix(), chat, &c, None)
        });
    }
    let obj = McdeObjective {
        family: *family,
        spec: *spec,
        sample,
        chat,
    };
    run(&obj, sample, method, opts)
}

/// Semiparametric (pseudo) maximum likelihood: minimizes `−Σ log c_θ(U_i)`.
pub fn fit_mle(sample: &PseudoSample, family: &CopulaFamily, opts: &FitOptions) -> Result<FitResult> {
    check_sample(sample, family)?;
    if !family.supports_pdf() {
        return Err(Error::Unsupported(format!(
            "the {} density is not available in dimension {}",
            family.kind, family.dim
        )));
    }
    let method = FitMethod::PseudoMle;
    if family.param_count() == 0 {
        return fixed_fit(method, || Ok(0.0));
    }
    let obj = MleObjective {
        family: *family,
        sample,
    };
    run(&obj, sample, method, opts)
}

fn fixed_fit(method: FitMethod, value: impl FnOnce() -> Result<f64>) -> Result<FitResult> {
    Ok(FitResult {
        theta_hat: vec![],
        loss_at_opt: value()?,
        iterations: 0,
        converged: true,
        gradient_norm: 0.0,
        method,
        boundary: false,
        covariance: None,
    })
}
