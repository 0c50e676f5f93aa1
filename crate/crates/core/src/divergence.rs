//! α-, β- and γ-copula divergences: sample losses, estimating functions and
//! divergence evaluation between two copulas.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{Copula, COORD_FLOOR};
use crate::empirical::PseudoSample;
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Default Monte Carlo size for [`divergence_between`].
pub const DEFAULT_MC: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Alpha,
    Beta,
    Gamma,
}

impl DivergenceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DivergenceKind::Alpha => "alpha",
            DivergenceKind::Beta => "beta",
            DivergenceKind::Gamma => "gamma",
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" | "a" => Ok(DivergenceKind::Alpha),
            "beta" | "b" => Ok(DivergenceKind::Beta),
            "gamma" | "g" => Ok(DivergenceKind::Gamma),
            _ => Err(Error::InvalidInput(format!("unknown divergence {s:?}"))),
        }
    }
}

/// A power divergence and its exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    pub exponent: f64,
}

impl DivergenceSpec {
    pub fn new(kind: DivergenceKind, exponent: f64) -> Result<Self> {
        let bad = |why: &str| {
            Err(Error::InvalidInput(format!(
                "invalid {} exponent {exponent}: {why}",
                kind.name()
            )))
        };
        if !exponent.is_finite() {
            return bad("must be finite");
        }
        match kind {
            DivergenceKind::Alpha if exponent == 0.0 || exponent == 1.0 => {
                bad("the α-loss is undefined at 0 and 1")
            }
            DivergenceKind::Beta | DivergenceKind::Gamma if exponent == 0.0 => {
                bad("must be nonzero")
            }
            DivergenceKind::Beta | DivergenceKind::Gamma if exponent <= -1.0 => {
                bad("must exceed -1")
            }
            _ => Ok(Self { kind, exponent }),
        }
    }

    pub fn alpha(exponent: f64) -> Result<Self> {
        Self::new(DivergenceKind::Alpha, exponent)
    }

    pub fn beta(exponent: f64) -> Result<Self> {
        Self::new(DivergenceKind::Beta, exponent)
    }

    pub fn gamma(exponent: f64) -> Result<Self> {
        Self::new(DivergenceKind::Gamma, exponent)
    }

    /// Whether the exponent lies in the range with bounded estimating functions.
    pub fn is_robust(&self) -> bool {
        match self.kind {
            DivergenceKind::Alpha => self.exponent > 0.0 && self.exponent < 1.0,
            DivergenceKind::Beta | DivergenceKind::Gamma => self.exponent > 0.0,
        }
    }
}

impl fmt::Display for DivergenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind.name(), self.exponent)
    }
}

/// Parses `beta:0.1`, `alpha=0.5` or `gamma(1)`.
impl FromStr for DivergenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_end_matches(')');
        let (k, e) = t
            .split_once([':', '=', '('])
            .ok_or_else(|| Error::InvalidInput(format!("expected kind:exponent, got {s:?}")))?;
        let exponent = e
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad exponent in {s:?}")))?;
        Self::new(k.parse()?, exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub n: usize,
}

#[inline]
fn pow(c: f64, x: f64) -> Result<f64> {
    if c > 0.0 {
        Ok((x * c.ln()).exp())
    } else if x > 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Boundary(
            "model copula vanishes at an observation under a non-positive power".into(),
        ))
    }
}

fn check_model(c: &Copula, d: usize) -> Result<()> {
    if c.dim() != d {
        return Err(Error::InvalidInput(format!(
            "copula dimension {} does not match sample dimension {d}",
            c.dim()
        )));
    }
    if !c.family().supports_cdf() {
        return Err(Error::Unsupported(format!(
            "{} copula has no CDF; divergence losses need one",
            c.kind()
        )));
    }
    Ok(())
}

/// Loss value and its exact parameter gradient over rows `u` with empirical
/// values `chat`.
pub(crate) fn loss_and_grad(
    spec: &DivergenceSpec,
    u: &DataMatrix,
    chat: &[f64],
    c: &Copula,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let p = c.family().param_count();
    let e = spec.exponent;
    let mut g = vec![0.0; p];
    let want = grad.is_some();
    let mut acc = vec![0.0; p];
    let mut acc2 = vec![0.0; p];
    let (mut s1, mut s2) = (0.0, 0.0);
    for (i, row) in u.rows().enumerate() {
        let cv = c.eval(row, if want { Some(&mut g) } else { None });
        let ch = chat[i];
        match spec.kind {
            DivergenceKind::Alpha => {
                let ca = pow(cv, e)?;
                s1 += -ca * pow(ch, 1.0 - e)? + e * cv;
                if want {
                    let w = ca * (pow(cv, 1.0 - e)? - pow(ch, 1.0 - e)?) / (1.0 - e);
                    for (a, gk) in acc.iter_mut().zip(&g) {
                        *a += w * gk;
                    }
                }
            }
            DivergenceKind::Beta => {
                let cb = pow(cv, e)?;
                s1 += ch * cb;
                s2 += cb * cv;
                if want {
                    let w = cb * (cv - ch);
                    for (a, gk) in acc.iter_mut().zip(&g) {
                        *a += w * gk;
                    }
                }
            }
            DivergenceKind::Gamma => {
                let cg = pow(cv, e)?;
                s1 += ch * cg;
                s2 += cg * cv;
                if want {
                    for k in 0..p {
                        acc[k] += cg * cv * g[k];
                        acc2[k] += ch * cg * g[k];
                    }
                }
            }
        }
    }
    let value = match spec.kind {
        DivergenceKind::Alpha => s1 / (e * (1.0 - e)),
        DivergenceKind::Beta => -s1 / e + s2 / (e + 1.0),
        DivergenceKind::Gamma => {
            if !(s2 > 0.0) {
                return Err(Error::Boundary("γ-loss denominator vanishes".into()));
            }
            -s1 / e * (-(e / (e + 1.0)) * s2.ln()).exp()
        }
    };
    if let Some(out) = grad {
        match spec.kind {
            DivergenceKind::Gamma => {
                let scale = (-(e / (e + 1.0)) * s2.ln()).exp();
                let w = s1 / s2;
                for k in 0..p {
                    out[k] = scale * (w * acc[k] - acc2[k]);
                }
            }
            _ => out.copy_from_slice(&acc),
        }
    }
    Ok(value)
}

/// Sample loss `L(θ)` as a plain sum over pseudo-observations.
pub fn loss(spec: &DivergenceSpec, sample: &PseudoSample, c: &Copula) -> Result<LossValue> {
    check_model(c, sample.d())?;
    let chat = sample.empirical().eval_at_sample();
    let value = loss_and_grad(spec, sample.matrix(), chat, c, None)?;
    Ok(LossValue {
        value,
        n: sample.n(),
    })
}

/// Exact gradient `∇_θ L(θ)`. For α and β this equals `Σ S(U_i)`; for γ it is
/// `(Σ C^{γ+1})^{-γ/(γ+1)} Σ S_γ(U_i)` with `ŵ` plugged in.
pub fn loss_gradient(spec: &DivergenceSpec, sample: &PseudoSample, c: &Copula) -> Result<Vec<f64>> {
    check_model(c, sample.d())?;
    let chat = sample.empirical().eval_at_sample();
    let mut g = vec![0.0; c.family().param_count()];
    loss_and_grad(spec, sample.matrix(), chat, c, Some(&mut g))?;
    Ok(g)
}

/// Per-observation estimating function `S(u)`. The γ variant needs the
/// global weight `ŵ` from [`gamma_weight`].
pub fn estimating_function(
    spec: &DivergenceSpec,
    u: &[f64],
    chat_u: f64,
    c: &Copula,
    w: Option<f64>,
) -> Result<Vec<f64>> {
    let g = c.log_grad_cdf(u)?;
    let clamped: Vec<f64> = u.iter().map(|&x| x.max(COORD_FLOOR)).collect();
    let cv = c.cdf(&clamped)?;
    let e = spec.exponent;
    let factor = match spec.kind {
        DivergenceKind::Alpha => pow(cv, e)? * (pow(cv, 1.0 - e)? - pow(chat_u, 1.0 - e)?) / (1.0 - e),
        DivergenceKind::Beta => pow(cv, e)? * (cv - chat_u),
        DivergenceKind::Gamma => {
            let w = w.ok_or_else(|| {
                Error::Usage("the γ estimating function needs the weight ŵ".into())
            })?;
            pow(cv, e)? * (w * cv - chat_u)
        }
    };
    Ok(g.into_iter().map(|x| factor * x).collect())
}

/// Sum of [`estimating_function`] over the sample.
pub fn estimating_sum(spec: &DivergenceSpec, sample: &PseudoSample, c: &Copula) -> Result<Vec<f64>> {
    check_model(c, sample.d())?;
    let chat = sample.empirical().eval_at_sample();
    let w = match spec.kind {
        DivergenceKind::Gamma => Some(gamma_weight(sample, c, spec.exponent)?),
        _ => None,
    };
    let mut total = vec![0.0; c.family().param_count()];
    for i in 0..sample.n() {
        let s = estimating_function(spec, sample.row(i), chat[i], c, w)?;
        for (t, x) in total.iter_mut().zip(s) {
            *t += x;
        }
    }
    Ok(total)
}

/// `ŵ = Σ Ĉ(U_i) C(U_i)^γ / Σ C(U_i)^{γ+1}`.
pub fn gamma_weight(sample: &PseudoSample, c: &Copula, gamma: f64) -> Result<f64> {
    if !(gamma > -1.0) {
        return Err(Error::InvalidInput(format!("γ must exceed -1, got {gamma}")));
    }
    check_model(c, sample.d())?;
    let chat = sample.empirical().eval_at_sample();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, row) in sample.matrix().rows().enumerate() {
        let cv = c.eval(row, None);
        let cg = pow(cv, gamma)?;
        num += chat[i] * cg;
        den += cg * cv;
    }
    if !(den > 0.0) {
        return Err(Error::Boundary("γ-weight denominator vanishes".into()));
    }
    Ok(num / den)
}

/// The measure `dC₀` in a divergence: a model copula (Monte Carlo) or an
/// empirical copula (exact sum over its atoms, each of mass `1/(n+1)`).
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Model(&'a Copula),
    Empirical(&'a PseudoSample),
}

/// Integral functionals of a pair of copulas against `dC₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Power(DivergenceSpec),
    /// `∫ (√C₁ − √C₀)² dC₀`
    Hellinger,
    /// `∫ (C₀ − C₁)² dC₀`
    CramerVonMises,
    /// `∫ {C₀ log(C₀/C₁) + C₁ − C₀} dC₀`
    ExtendedKl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    /// Batch-means standard error; zero for an empirical reference.
    pub std_error: f64,
    pub points: usize,
}

/// Integral statistics sufficient for every functional.
#[derive(Default, Clone, Copy)]
struct Moments {
    mass: f64,
    pointwise: f64,
    i1: f64,
    i2: f64,
    i3: f64,
}

impl Moments {
    fn add(&mut self, f: &Functional, c0: f64, c1: f64, w: f64) -> Result<()> {
        self.mass += w;
        match f {
            Functional::Power(spec) => {
                let e = spec.exponent;
                match spec.kind {
                    DivergenceKind::Alpha => {
                        let t = c0 - pow(c1, e)? * pow(c0, 1.0 - e)? + e * (c1 - c0);
                        self.pointwise += w * t / (e * (1.0 - e));
                    }
                    DivergenceKind::Beta => {
                        let t = pow(c0, e + 1.0)? / (e * (e + 1.0)) + pow(c1, e + 1.0)? / (e + 1.0)
                            - c0 * pow(c1, e)? / e;
                        self.pointwise += w * t;
                    }
                    DivergenceKind::Gamma => {
                        self.i1 += w * c0 * pow(c1, e)?;
                        self.i2 += w * pow(c1, e + 1.0)?;
                        self.i3 += w * pow(c0, e + 1.0)?;
                    }
                }
            }
            Functional::Hellinger => self.pointwise += w * (c1.sqrt() - c0.sqrt()).powi(2),
            Functional::CramerVonMises => self.pointwise += w * (c0 - c1).powi(2),
            Functional::ExtendedKl => {
                let log_term = if c0 > 0.0 {
                    if c1 > 0.0 {
                        c0 * (c0 / c1).ln()
                    } else {
                        return Err(Error::Boundary("extended KL with C₁ = 0 < C₀".into()));
                    }
                } else {
                    0.0
                };
                self.pointwise += w * (log_term + c1 - c0);
            }
        }
        Ok(())
    }

    fn merge(&mut self, o: &Moments) {
        self.mass += o.mass;
        self.pointwise += o.pointwise;
        self.i1 += o.i1;
        self.i2 += o.i2;
        self.i3 += o.i3;
    }

    /// Functional value with the accumulated weights normalised by `scale`.
    fn value(&self, f: &Functional, scale: f64) -> f64 {
        match f {
            Functional::Power(spec) if spec.kind == DivergenceKind::Gamma => {
                let e = spec.exponent;
                let (i1, i2, i3) = (self.i1 / scale, self.i2 / scale, self.i3 / scale);
                -i1 / (e * i2.powf(e / (e + 1.0))) + i3.powf(1.0 / (e + 1.0)) / e
            }
            _ => self.pointwise / scale,
        }
    }
}

/// Evaluates `f(C₀, C₁)`. For a model reference the integral is a Monte Carlo
/// average over `mc` draws from `C₀`; for an empirical reference it is exact.
pub fn functional_between(
    f: &Functional,
    c0: Reference<'_>,
    c1: &Copula,
    mc: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    match c0 {
        Reference::Empirical(sample) => {
            check_model(c1, sample.d())?;
            let chat = sample.empirical().eval_at_sample();
            let w = 1.0 / (sample.n() + 1) as f64;
            let mut m = Moments::default();
            for (i, row) in sample.matrix().rows().enumerate() {
                m.add(f, chat[i], c1.eval(row, None), w)?;
            }
            Ok(DivergenceEstimate {
                value: m.value(f, 1.0),
                std_error: 0.0,
                points: sample.n(),
            })
        }
        Reference::Model(model) => {
            check_model(model, c1.dim())?;
            check_model(c1, model.dim())?;
            const BATCHES: usize = 20;
            if mc < 2 * BATCHES {
                return Err(Error::InvalidInput(format!(
                    "Monte Carlo size must be at least {}, got {mc}",
                    2 * BATCHES
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut point = vec![0.0; model.dim()];
            let per = mc / BATCHES;
            let mut total = Moments::default();
            let mut batch_values = Vec::with_capacity(BATCHES);
            for b in 0..BATCHES {
                let count = if b == BATCHES - 1 { mc - per * (BATCHES - 1) } else { per };
                let mut m = Moments::default();
                for _ in 0..count {
                    crate::copula::sample_into(model, &mut rng, &mut point);
                    m.add(f, model.eval(&point, None), c1.eval(&point, None), 1.0)?;
                }
                batch_values.push(m.value(f, count as f64));
                total.merge(&m);
            }
            let mean_b = batch_values.iter().sum::<f64>() / BATCHES as f64;
            let var_b = batch_values.iter().map(|v| (v - mean_b).powi(2)).sum::<f64>()
                / (BATCHES - 1) as f64;
            Ok(DivergenceEstimate {
                value: total.value(f, mc as f64),
                std_error: (var_b / BATCHES as f64).sqrt(),
                points: mc,
            })
        }
    }
}

/// `D(C₀, C₁)` for a power divergence, using the Hölder-consistent second term
/// `(1/γ)(∫ C₀^{γ+1} dC₀)^{1/(γ+1)}` for γ so that `D ≥ 0`.
pub fn divergence_between(
    spec: &DivergenceSpec,
    c0: Reference<'_>,
    c1: &Copula,
    mc: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    functional_between(&Functional::Power(*spec), c0, c1, mc, seed)
}
