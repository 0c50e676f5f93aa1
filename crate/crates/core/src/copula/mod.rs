//! Parametric copula families.
//!
//! Every family exposes the copula CDF, the parameter gradient of the log-CDF,
//! the density where it is tractable, and an exact sampler. Archimedean
//! gradients are analytic; the Gaussian gradient uses Plackett's identity
//! `∂Φ₂/∂ρ = φ₂`.

mod archimedean;
mod elliptical;
mod sampling;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

pub use sampling::sample_into;

/// Coordinates of the copula CDF are clamped from below to this value before
/// log-gradient evaluation.
pub const COORD_FLOOR: f64 = 1e-12;

/// Family tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Clayton,
    Gumbel,
    Frank,
    Joe,
    Gaussian,
    /// Student-t copula with fixed degrees of freedom.
    StudentT { dof: f64 },
    Independence,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Clayton => "clayton",
            FamilyKind::Gumbel => "gumbel",
            FamilyKind::Frank => "frank",
            FamilyKind::Joe => "joe",
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::StudentT { .. } => "student_t",
            FamilyKind::Independence => "independence",
        }
    }

    pub fn is_archimedean(&self) -> bool {
        matches!(
            self,
            FamilyKind::Clayton | FamilyKind::Gumbel | FamilyKind::Frank | FamilyKind::Joe
        )
    }

    pub fn is_elliptical(&self) -> bool {
        matches!(self, FamilyKind::Gaussian | FamilyKind::StudentT { .. })
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::StudentT { dof } => write!(f, "student_t(dof={dof})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Parses `clayton`, `gumbel`, `frank`, `joe`, `gaussian`/`normal`,
/// `independence`, and `t`/`student_t` (optionally `t:5` for the degrees of
/// freedom; 5 if omitted).
impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, tail) = match lower.split_once(':') {
            Some((h, t)) => (h.to_string(), Some(t.to_string())),
            None => (lower.clone(), None),
        };
        let kind = match head.as_str() {
            "clayton" => FamilyKind::Clayton,
            "gumbel" => FamilyKind::Gumbel,
            "frank" => FamilyKind::Frank,
            "joe" => FamilyKind::Joe,
            "gaussian" | "normal" => FamilyKind::Gaussian,
            "independence" | "indep" | "product" => FamilyKind::Independence,
            "t" | "student_t" | "student-t" | "studentt" => {
                let dof = match tail {
                    Some(t) => t.parse::<f64>().map_err(|_| {
                        Error::InvalidInput(format!("bad degrees of freedom in {s:?}"))
                    })?,
                    None => 5.0,
                };
                return Ok(FamilyKind::StudentT { dof });
            }
            _ => return Err(Error::InvalidInput(format!("unknown copula family {s:?}"))),
        };
        if tail.is_some() {
            return Err(Error::InvalidInput(format!("unexpected suffix in {s:?}")));
        }
        Ok(kind)
    }
}

/// A family tag together with the copula dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaFamily {
    pub kind: FamilyKind,
    pub dim: usize,
}

impl CopulaFamily {
    pub fn new(kind: FamilyKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "copula dimension must be at least 2, got {dim}"
            )));
        }
        if kind.is_elliptical() && dim != 2 {
            return Err(Error::Unsupported(format!(
                "{kind} copula is only implemented in dimension 2"
            )));
        }
        if let FamilyKind::StudentT { dof } = kind {
            if !(dof > 0.0 && dof.is_finite()) {
                return Err(Error::ParameterDomain {
                    family: kind.to_string(),
                    detail: format!("degrees of freedom must be positive, got {dof}"),
                });
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn bivariate(kind: FamilyKind) -> Self {
        Self::new(kind, 2).expect("every family is available in dimension 2")
    }

    /// Number of estimable parameters.
    pub fn param_count(&self) -> usize {
        match self.kind {
            FamilyKind::Independence => 0,
            _ => 1,
        }
    }

    pub fn supports_cdf(&self) -> bool {
        !matches!(self.kind, FamilyKind::StudentT { .. })
    }

    /// Density availability: every family in dimension 2; Clayton and
    /// independence in any dimension.
    pub fn supports_pdf(&self) -> bool {
        self.dim == 2 || matches!(self.kind, FamilyKind::Clayton | FamilyKind::Independence)
    }

    pub fn validate(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ParameterDomain {
                family: self.kind.to_string(),
                detail: format!(
                    "expected {} parameter(s), got {}",
                    self.param_count(),
                    params.len()
                ),
            });
        }
        let bad = |detail: String| {
            Err(Error::ParameterDomain {
                family: self.kind.to_string(),
                detail,
            })
        };
        let Some(&theta) = params.first() else {
            return Ok(());
        };
        if !theta.is_finite() {
            return bad(format!("non-finite parameter {theta}"));
        }
        match self.kind {
            FamilyKind::Clayton if theta <= 0.0 => bad(format!("theta must be > 0, got {theta}")),
            FamilyKind::Gumbel | FamilyKind::Joe if theta < 1.0 => {
                bad(format!("theta must be >= 1, got {theta}"))
            }
            FamilyKind::Frank if theta == 0.0 => bad("theta must be nonzero".into()),
            FamilyKind::Frank if self.dim > 2 && theta < 0.0 => bad(format!(
                "negative theta is only a valid copula in dimension 2, got {theta} in dimension {}",
                self.dim
            )),
            FamilyKind::Gaussian | FamilyKind::StudentT { .. } if theta.abs() >= 1.0 => {
                bad(format!("correlation must lie in (-1, 1), got {theta}"))
            }
            _ => Ok(()),
        }
    }

    /// Frank is only a copula for positive θ above dimension 2.
    fn positive_frank(&self) -> bool {
        self.kind == FamilyKind::Frank && self.dim > 2
    }

    /// Maps parameters to unconstrained optimizer coordinates:
    /// `ln θ` (Clayton, Frank above dimension 2), `ln(θ-1)` (Gumbel, Joe),
    /// identity (bivariate Frank), `atanh ρ` (elliptical).
    pub fn to_unconstrained(&self, params: &[f64]) -> Vec<f64> {
        params
            .iter()
            .map(|&t| match self.kind {
                FamilyKind::Clayton => t.ln(),
                FamilyKind::Frank if self.positive_frank() => t.ln(),
                FamilyKind::Gumbel | FamilyKind::Joe => (t - 1.0).ln(),
                FamilyKind::Frank | FamilyKind::Independence => t,
                FamilyKind::Gaussian | FamilyKind::StudentT { .. } => t.atanh(),
            })
            .collect()
    }

    pub fn from_unconstrained(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .map(|&x| match self.kind {
                FamilyKind::Clayton => x.exp(),
                FamilyKind::Frank if self.positive_frank() => x.exp(),
                FamilyKind::Gumbel | FamilyKind::Joe => 1.0 + x.exp(),
                FamilyKind::Frank => {
                    // θ = 0 is excluded from the family; nudge to the limit.
                    if x == 0.0 {
                        f64::EPSILON
                    } else {
                        x
                    }
                }
                FamilyKind::Independence => x,
                FamilyKind::Gaussian | FamilyKind::StudentT { .. } => {
                    x.tanh().clamp(-1.0 + 1e-15, 1.0 - 1e-15)
                }
            })
            .collect()
    }

    /// `dθ/dx` for each coordinate of [`Self::from_unconstrained`].
    pub fn unconstrained_jacobian(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .map(|&x| match self.kind {
                FamilyKind::Clayton | FamilyKind::Gumbel | FamilyKind::Joe => x.exp(),
                FamilyKind::Frank if self.positive_frank() => x.exp(),
                FamilyKind::Frank | FamilyKind::Independence => 1.0,
                FamilyKind::Gaussian | FamilyKind::StudentT { .. } => {
                    let t = x.tanh();
                    1.0 - t * t
                }
            })
            .collect()
    }
}

/// A copula family with concrete parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Copula {
    family: CopulaFamily,
    params: Vec<f64>,
}

impl Copula {
    pub fn new(family: CopulaFamily, params: Vec<f64>) -> Result<Self> {
        family.validate(&params)?;
        Ok(Self { family, params })
    }

    /// One-parameter family of the given kind and dimension.
    pub fn with_theta(kind: FamilyKind, dim: usize, theta: f64) -> Result<Self> {
        Self::new(CopulaFamily::new(kind, dim)?, vec![theta])
    }

    pub fn independence(dim: usize) -> Result<Self> {
        Self::new(CopulaFamily::new(FamilyKind::Independence, dim)?, Vec::new())
    }

    pub fn family(&self) -> &CopulaFamily {
        &self.family
    }

    pub fn kind(&self) -> FamilyKind {
        self.family.kind
    }

    pub fn dim(&self) -> usize {
        self.family.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// First parameter, or NaN for the parameter-free family.
    pub fn theta(&self) -> f64 {
        self.params.first().copied().unwrap_or(f64::NAN)
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, copula dimension is {}",
                u.len(),
                self.dim()
            )));
        }
        for &x in u {
            if x.is_nan() {
                return Err(Error::InvalidInput("NaN coordinate".into()));
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidInput(format!("coordinate {x} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// `C_θ(u)`.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        if !self.family.supports_cdf() {
            return Err(Error::Unsupported(format!(
                "CDF of the {} copula is not implemented",
                self.kind()
            )));
        }
        Ok(self.eval(u, None))
    }

    /// `∇_θ log C_θ(u)` with coordinates clamped to at least [`COORD_FLOOR`].
    pub fn log_grad_cdf(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u)?;
        let clamped: Vec<f64> = u.iter().map(|&x| x.max(COORD_FLOOR)).collect();
        self.log_grad_checked(&clamped)
    }

    /// `∇_θ log C_θ(u)` without clamping; fails where `C_θ(u) = 0`.
    pub fn log_grad_cdf_unclamped(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u)?;
        self.log_grad_checked(u)
    }

    fn log_grad_checked(&self, u: &[f64]) -> Result<Vec<f64>> {
        if !self.family.supports_cdf() {
            return Err(Error::Unsupported(format!(
                "CDF of the {} copula is not implemented",
                self.kind()
            )));
        }
        if u.iter().any(|&x| x <= 0.0) {
            return Err(Error::Boundary(
                "log-gradient requested where the copula vanishes".into(),
            ));
        }
        let mut g = vec![0.0; self.family.param_count()];
        let c = self.eval(u, Some(&mut g));
        if c <= 0.0 {
            return Err(Error::Boundary(format!(
                "copula underflows to 0 at {u:?}; log-gradient undefined"
            )));
        }
        Ok(g)
    }

    /// Copula density `c_θ(u)` on the open cube.
    pub fn pdf(&self, u: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(u)?.exp())
    }

    pub fn log_pdf(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        if !self.family.supports_pdf() {
            return Err(Error::Unsupported(format!(
                "density of the {} copula in dimension {}",
                self.kind(),
                self.dim()
            )));
        }
        if u.iter().any(|&x| x <= 0.0 || x >= 1.0) {
            return Err(Error::InvalidInput(
                "density is evaluated on the open unit cube".into(),
            ));
        }
        Ok(self.eval_log_pdf(u))
    }

    /// `n` i.i.d. draws from the copula, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DataMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DataMatrix> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        let mut out = DataMatrix::zeros(n, self.dim());
        for i in 0..n {
            sample_into(self, rng, out.row_mut(i));
        }
        Ok(out)
    }

    /// Unchecked CDF evaluation used in hot loops. When `grad` is given it is
    /// filled with `∇_θ log C_θ(u)`; it is left at zero where `C_θ(u) = 0`.
    ///
    /// Coordinates equal to 1 are dropped (uniform margins) and the rest are
    /// sorted, so the result is exactly symmetric for exchangeable families.
    pub(crate) fn eval(&self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let mut buf = [0.0f64; 32];
        let mut heap;
        let reduced: &mut [f64] = if u.len() <= buf.len() {
            &mut buf[..u.len()]
        } else {
            heap = vec![0.0; u.len()];
            &mut heap[..]
        };
        let mut m = 0;
        for &x in u {
            if x <= 0.0 {
                if let Some(g) = grad {
                    g.fill(0.0);
                }
                return 0.0;
            }
            if x < 1.0 {
                reduced[m] = x;
                m += 1;
            }
        }
        let v = &mut reduced[..m];
        v.sort_unstable_by(|a, b| a.total_cmp(b));
        if m <= 1 {
            if let Some(g) = grad {
                g.fill(0.0);
            }
            return v.first().copied().unwrap_or(1.0);
        }
        let theta = self.theta();
        let (c, dlog) = match self.kind() {
            FamilyKind::Independence => (v.iter().product(), 0.0),
            FamilyKind::Clayton => archimedean::clayton(v, theta),
            FamilyKind::Gumbel => archimedean::gumbel(v, theta),
            FamilyKind::Frank => archimedean::frank(v, theta),
            FamilyKind::Joe => archimedean::joe(v, theta),
            FamilyKind::Gaussian => elliptical::gaussian_cdf(v[0], v[1], theta),
            FamilyKind::StudentT { .. } => (f64::NAN, f64::NAN),
        };
        if let Some(g) = grad {
            if let Some(g0) = g.first_mut() {
                *g0 = if c > 0.0 { dlog } else { 0.0 };
            }
        }
        c
    }

    pub(crate) fn eval_log_pdf(&self, u: &[f64]) -> f64 {
        let theta = self.theta();
        match self.kind() {
            FamilyKind::Independence => 0.0,
            FamilyKind::Clayton => archimedean::clayton_log_pdf(u, theta),
            FamilyKind::Gumbel => archimedean::gumbel_log_pdf(u[0], u[1], theta),
            FamilyKind::Frank => archimedean::frank_log_pdf(u[0], u[1], theta),
            FamilyKind::Joe => archimedean::joe_log_pdf(u[0], u[1], theta),
            FamilyKind::Gaussian => elliptical::gaussian_log_pdf(u[0], u[1], theta),
            FamilyKind::StudentT { dof } => elliptical::student_log_pdf(u[0], u[1], theta, dof),
        }
    }
}
