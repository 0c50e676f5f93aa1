use crate::copula::{CopulaFamily, FamilyKind};
use crate::dependence::{kendall_tau, spearman_rho};
use crate::empirical::PseudoSample;
use crate::error::Result;
use crate::special::debye1;

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn joe_tau(theta: f64) -> f64 {
    const TERMS: usize = 4000;
    let mut s = 0.0;
    for k in (1..=TERMS).rev() {
        let k = k as f64;
        s += 1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0));
    }
    s += 1.0 / (2.0 * theta * theta * (TERMS as f64).powi(2));
    1.0 - 4.0 * s
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        return theta / 9.0;
    }
    1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta
}

/// Inverts Kendall's τ for a one-parameter family. τ is clamped into the
/// range the family can represent.
pub fn kendall_to_theta(family: &CopulaFamily, tau: f64) -> f64 {
    let positive = tau.clamp(0.01, 0.95);
    match family.kind {
        FamilyKind::Clayton => 2.0 * positive / (1.0 - positive),
        FamilyKind::Gumbel => 1.0 / (1.0 - positive),
        FamilyKind::Joe => bisect(|t| joe_tau(t) - positive, 1.0, 200.0),
        FamilyKind::Frank => {
            let tau = if family.dim > 2 { positive } else { tau.clamp(-0.95, 0.95) };
            if tau.abs() < 1e-3 {
                // τ ≈ θ/9 near independence; keep away from the excluded θ = 0.
                let t = 9.0 * tau;
                return if t.abs() < 1e-3 { 1e-3 } else { t };
            }
            let (lo, hi) = if tau > 0.0 { (1e-4, 200.0) } else { (-200.0, -1e-4) };
            bisect(|t| frank_tau(t) - tau, lo, hi)
        }
        FamilyKind::Gaussian | FamilyKind::StudentT { .. } => {
            (std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-0.95, 0.95)
        }
        FamilyKind::Independence => f64::NAN,
    }
}

/// Warm start: Kendall inversion for Archimedean families (average pairwise τ
/// above dimension 2); Spearman-based `2 sin(π ρ_S / 6)` for elliptical ones.
pub fn initial_estimate(sample: &PseudoSample, family: &CopulaFamily) -> Result<Vec<f64>> {
    if family.param_count() == 0 {
        return Ok(vec![]);
    }
    let d = sample.d();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| sample.matrix().column(j)).collect();
    if family.kind.is_elliptical() {
        let rho_s = spearman_rho(&cols[0], &cols[1])?;
        let rho = 2.0 * (std::f64::consts::PI * rho_s / 6.0).sin();
        return Ok(vec![rho.clamp(-0.95, 0.95)]);
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..d {
        for j in i + 1..d {
            total += kendall_tau(&cols[i], &cols[j])?;
            pairs += 1;
        }
    }
    Ok(vec![kendall_to_theta(family, total / pairs as f64)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_identities() {
        let fam = |k| CopulaFamily::bivariate(k);
        assert!((kendall_to_theta(&fam(FamilyKind::Clayton), 0.5) - 2.0).abs() < 1e-12);
        assert!((kendall_to_theta(&fam(FamilyKind::Gumbel), 0.5) - 2.0).abs() < 1e-12);
        assert!(joe_tau(1.0).abs() < 1e-6);
        // Joe θ = 2: the series telescopes to 1 − (π²/6 − 1).
        let closed = 2.0 - std::f64::consts::PI.powi(2) / 6.0;
        assert!((joe_tau(2.0) - closed).abs() < 1e-7, "{} vs {closed}", joe_tau(2.0));
        let t = kendall_to_theta(&fam(FamilyKind::Joe), closed);
        assert!((t - 2.0).abs() < 1e-4);
        // Frank τ(θ) at θ = 5 from the Debye closed form, inverted back.
        let tau5 = frank_tau(5.0);
        assert!((kendall_to_theta(&fam(FamilyKind::Frank), tau5) - 5.0).abs() < 1e-8);
        assert!((kendall_to_theta(&fam(FamilyKind::Frank), -tau5) + 5.0).abs() < 1e-8);
    }
}
