//! Exact samplers. Archimedean families use the Marshall–Olkin frailty
//! construction `U_i = ψ(E_i / V)`; elliptical families push correlated
//! latent draws through the univariate CDF.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::{Copula, FamilyKind};
use crate::special::norm_cdf;

const UPPER: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
fn clamp_open(x: f64) -> f64 {
    x.clamp(f64::MIN_POSITIVE, UPPER)
}

#[inline]
fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

#[inline]
fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Fills `out` (length `dim`) with one draw from `c`.
pub fn sample_into<R: Rng + ?Sized>(c: &Copula, rng: &mut R, out: &mut [f64]) {
    let theta = c.theta();
    match c.kind() {
        FamilyKind::Independence => {
            for x in out.iter_mut() {
                *x = clamp_open(uniform(rng));
            }
        }
        FamilyKind::Clayton => {
            let v: f64 = Gamma::new(1.0 / theta, 1.0)
                .expect("validated clayton parameter")
                .sample(rng);
            for x in out.iter_mut() {
                let t = exp1(rng) / v;
                *x = clamp_open((-t.ln_1p() / theta).exp());
            }
        }
        FamilyKind::Gumbel => {
            let alpha = 1.0 / theta;
            let v = if theta == 1.0 {
                1.0
            } else {
                positive_stable(alpha, rng)
            };
            for x in out.iter_mut() {
                let t = exp1(rng) / v;
                *x = clamp_open((-t.powf(alpha)).exp());
            }
        }
        FamilyKind::Frank if theta > 0.0 => {
            let v = logarithmic(theta, rng);
            let b = (-theta).exp_m1();
            for x in out.iter_mut() {
                let t = exp1(rng) / v;
                *x = clamp_open(-((-t).exp() * b).ln_1p() / theta);
            }
        }
        FamilyKind::Frank => {
            // Negative dependence exists only in dimension 2: conditional inversion.
            let u = clamp_open(uniform(rng));
            let w = uniform(rng);
            let e = (-theta).exp_m1();
            let ratio = w * e / (w + (1.0 - w) * (-theta * u).exp());
            out[0] = u;
            out[1] = clamp_open(-ratio.ln_1p() / theta);
        }
        FamilyKind::Joe => {
            let v = sibuya(1.0 / theta, rng);
            for x in out.iter_mut() {
                let t = exp1(rng) / v;
                let log_one_minus = if t < std::f64::consts::LN_2 {
                    (-(-t).exp_m1()).ln()
                } else {
                    (-(-t).exp()).ln_1p()
                };
                *x = clamp_open(-(log_one_minus / theta).exp_m1());
            }
        }
        FamilyKind::Gaussian => {
            let (z1, z2) = correlated_normals(theta, rng);
            out[0] = clamp_open(norm_cdf(z1));
            out[1] = clamp_open(norm_cdf(z2));
        }
        FamilyKind::StudentT { dof } => {
            let (z1, z2) = correlated_normals(theta, rng);
            let w: f64 = ChiSquared::new(dof)
                .expect("validated degrees of freedom")
                .sample(rng);
            let s = (w / dof).sqrt();
            let t = StudentsT::new(0.0, 1.0, dof).expect("validated degrees of freedom");
            out[0] = clamp_open(t.cdf(z1 / s));
            out[1] = clamp_open(t.cdf(z2 / s));
        }
    }
}

fn correlated_normals<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> (f64, f64) {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    (a, rho * a + (1.0 - rho * rho).sqrt() * b)
}

/// Positive stable variable with Laplace transform `exp(-t^α)`, `0 < α < 1`
/// (Kanter's representation).
pub(crate) fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let w = std::f64::consts::PI * uniform(rng);
    let e = exp1(rng);
    let head = (alpha * w).sin() / w.sin().powf(1.0 / alpha);
    let tail = (((1.0 - alpha) * w).sin() / e).powf((1.0 - alpha) / alpha);
    head * tail
}

/// Logarithmic series variable with `p = 1 − e^{−θ}` (Kemp's LK algorithm).
pub(crate) fn logarithmic<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let p = -(-theta).exp_m1();
    let v = uniform(rng);
    if v >= p {
        return 1.0;
    }
    let q = -(-theta * uniform(rng)).exp_m1();
    if v > q {
        1.0
    } else if v > q * q {
        2.0
    } else {
        (1.0 + v.ln() / q.ln()).floor()
    }
}

/// Sibuya variable with parameter `α ∈ (0, 1]`, via inversion of its
/// survival function `S(k) = Γ(k+1−α) / (Γ(k+1) Γ(1−α))`.
pub(crate) fn sibuya<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = uniform(rng);
    if alpha >= 1.0 || u <= alpha {
        return 1.0;
    }
    let target = (1.0 - u).ln();
    let lg = ln_gamma(1.0 - alpha);
    let log_surv = |k: f64| ln_gamma(k + 1.0 - alpha) - ln_gamma(k + 1.0) - lg;
    let k0 = ((target + lg) * (-1.0 / alpha)).exp();
    if !(k0 < 1e14) {
        return k0.max(1.0);
    }
    let mut k = k0.floor().max(1.0);
    while k > 1.0 && log_surv(k - 1.0) <= target {
        k -= 1.0;
    }
    while log_surv(k) > target {
        k += 1.0;
    }
    k
}
