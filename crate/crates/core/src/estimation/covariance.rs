use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::Copula;
use crate::error::{Error, Result};

/// Block length of the U-statistic used for the double integral in `B`.
const BLOCK: usize = 250;
const MAX_CONDITION: f64 = 1e12;

/// Covariance kernel of the limiting empirical-copula process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKernel {
    /// `C(u∧v) − C(u)C(v)`: the process with known margins.
    #[default]
    KnownMargins,
    /// The same kernel with the correction for estimated margins
    /// `G(u) = W(u) − Σ_j ∂_j C(u) W(1, …, u_j, …, 1)`.
    RankCorrected,
}

/// Sandwich covariance `Σ = A⁻¹ B A⁻¹` of `√n (θ̂ − θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    pub x_exponent: f64,
    pub mc_samples: usize,
    /// Parameter the integrals were evaluated at (the plug-in point).
    pub theta: Vec<f64>,
    /// Monte Carlo standard error of each entry of `B`, from block means.
    pub b_std_error: Vec<Vec<f64>>,
    pub kernel: CovarianceKernel,
    pub condition_number: f64,
}

impl CovarianceReport {
    /// Asymptotic standard deviations `sqrt(Σ_kk / n)` at sample size `n`.
    pub fn std_errors(&self, n: usize) -> Vec<f64> {
        (0..self.sigma.len())
            .map(|k| (self.sigma[k][k] / n as f64).sqrt())
            .collect()
    }
}

pub fn asymptotic_covariance(c: &Copula, x: f64, mc: usize, seed: u64) -> Result<CovarianceReport> {
    asymptotic_covariance_with(c, x, mc, seed, CovarianceKernel::KnownMargins)
}

struct Draw {
    u: Vec<f64>,
    c: f64,
    g: Vec<f64>,
    /// `C(u)^x ∇_θ log C(u)`.
    h: Vec<f64>,
    /// `∂_j C(u)`, only for the rank-corrected kernel.
    partials: Vec<f64>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `A_x = E[C^{x+1} g gᵀ]` by Monte Carlo, and
/// `B_x = E[C(u)^x C(v)^x K(u, v) g(u) g(v)ᵀ]` over independent `u, v ~ C`
/// as a blocked U-statistic, where `g = ∇_θ log C_θ`.
pub fn asymptotic_covariance_with(
    c: &Copula,
    x: f64,
    mc: usize,
    seed: u64,
    kernel: CovarianceKernel,
) -> Result<CovarianceReport> {
    let m = c.family().param_count();
    if m == 0 {
        return Err(Error::Usage("the copula has no parameters".into()));
    }
    if !c.family().supports_cdf() {
        return Err(Error::Unsupported(format!(
            "covariance needs the CDF of the {} copula",
            c.kind()
        )));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidInput(format!("exponent x must be ≥ 0, got {x}")));
    }
    if mc < 2 * BLOCK {
        return Err(Error::InvalidInput(format!(
            "need at least {} Monte Carlo draws, got {mc}",
            2 * BLOCK
        )));
    }

    let sample = c.sample(mc, seed)?;
    let draws: Vec<Draw> = sample
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|u| {
            let mut g = vec![0.0; m];
            let cu = c.eval(u, Some(&mut g));
            let w = if cu > 0.0 { cu.powf(x) } else { 0.0 };
            let partials = match kernel {
                CovarianceKernel::KnownMargins => Vec::new(),
                CovarianceKernel::RankCorrected => partials(c, u),
            };
            Draw {
                u: u.to_vec(),
                c: cu,
                h: g.iter().map(|gk| w * gk).collect(),
                g,
                partials,
            }
        })
        .collect();

    let mut a = DMatrix::<f64>::zeros(m, m);
    for dr in &draws {
        // C^{x+1} g gᵀ = C · h gᵀ
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] += dr.c * dr.h[i] * dr.g[j];
            }
        }
    }
    a /= mc as f64;

    let blocks = mc / BLOCK;
    let block_means: Vec<DMatrix<f64>> = (0..blocks)
        .into_par_iter()
        .map(|bi| block_estimate(c, &draws[bi * BLOCK..(bi + 1) * BLOCK], m, kernel))
        .collect();
    let mut b = DMatrix::<f64>::zeros(m, m);
    for bm in &block_means {
        b += bm;
    }
    b /= blocks as f64;
    let mut b_se = DMatrix::<f64>::zeros(m, m);
    for bm in &block_means {
        let d = bm - &b;
        b_se += d.component_mul(&d);
    }
    b_se = b_se.map(|v| (v / ((blocks - 1) * blocks) as f64).sqrt());

    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition_number.is_finite() || condition_number > MAX_CONDITION {
        return Err(Error::Numerical {
            detail: "matrix A is singular; the model is locally flat".into(),
            condition_number,
        });
    }
    let a_inv = a.clone().try_inverse().ok_or_else(|| Error::Numerical {
        detail: "matrix A could not be inverted".into(),
        condition_number,
    })?;
    let mut sigma = &a_inv * &b * &a_inv;
    sigma = (&sigma + sigma.transpose()) * 0.5;

    Ok(CovarianceReport {
        a: to_rows(&a),
        b: to_rows(&b),
        sigma: to_rows(&sigma),
        x_exponent: x,
        mc_samples: mc,
        theta: c.params().to_vec(),
        b_std_error: to_rows(&b_se),
        kernel,
        condition_number,
    })
}

/// Central differences of `C` in each coordinate.
fn partials(c: &Copula, u: &[f64]) -> Vec<f64> {
    let mut p = u.to_vec();
    (0..u.len())
        .map(|j| {
            let h = 1e-5 * u[j].min(1.0 - u[j]);
            p[j] = u[j] + h;
            let up = c.eval(&p, None);
            p[j] = u[j] - h;
            let dn = c.eval(&p, None);
            p[j] = u[j];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// `C` at `u` with coordinate `j` replaced by `value`.
fn cdf_with(c: &Copula, u: &[f64], j: usize, value: f64, buf: &mut [f64]) -> f64 {
    buf.copy_from_slice(u);
    buf[j] = value;
    c.eval(buf, None)
}

fn kernel_value(c: &Copula, s: &Draw, t: &Draw, kernel: CovarianceKernel, buf: &mut [f64]) -> f64 {
    let d = s.u.len();
    for k in 0..d {
        buf[k] = s.u[k].min(t.u[k]);
    }
    let base = c.eval(buf, None) - s.c * t.c;
    if kernel == CovarianceKernel::KnownMargins {
        return base;
    }
    let mut out = base;
    let mut tmp = vec![0.0; d];
    // Cov(W(s), W(t^{(j)})) and its mirror.
    for j in 0..d {
        let m = s.u[j].min(t.u[j]);
        let g_st = cdf_with(c, &s.u, j, m, &mut tmp) - s.c * t.u[j];
        let g_ts = cdf_with(c, &t.u, j, m, &mut tmp) - t.c * s.u[j];
        out -= t.partials[j] * g_st + s.partials[j] * g_ts;
    }
    // Cov(W(s^{(i)}), W(t^{(j)})).
    for i in 0..d {
        for j in 0..d {
            let g = if i == j {
                s.u[i].min(t.u[i]) - s.u[i] * t.u[i]
            } else {
                tmp.fill(1.0);
                tmp[i] = s.u[i];
                tmp[j] = t.u[j];
                c.eval(&tmp, None) - s.u[i] * t.u[j]
            };
            out += s.partials[i] * t.partials[j] * g;
        }
    }
    out
}

fn block_estimate(c: &Copula, draws: &[Draw], m: usize, kernel: CovarianceKernel) -> DMatrix<f64> {
    let mut acc = DMatrix::<f64>::zeros(m, m);
    let mut buf = vec![0.0; c.dim()];
    for (a, s) in draws.iter().enumerate() {
        for t in &draws[a + 1..] {
            let k = kernel_value(c, s, t, kernel, &mut buf);
            for i in 0..m {
                for j in 0..m {
                    acc[(i, j)] += k * (s.h[i] * t.h[j] + t.h[i] * s.h[j]);
                }
            }
        }
    }
    let pairs = draws.len() * (draws.len() - 1);
    acc / pairs as f64
}
