//! Power-boundedness checks for `‖C_θ^α ∇_θ log C_θ‖` near the origin.
//!
//! All evaluations bypass the coordinate clamp used by the fitters, so genuine
//! blow-up of the log-gradient is visible. When `C_θ^α` underflows the value is
//! reported as 0 and flagged.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{Copula, FamilyKind};
use crate::error::{Error, Result};

/// Smallest coordinate reached by the tail of a diagonal trace.
const TRACE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub u: f64,
    pub v: f64,
    pub value: f64,
    /// `C^α` (or `C` itself) underflowed; `value` was set to 0.
    pub underflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub family: FamilyKind,
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub grid_resolution: usize,
    pub sup_value: f64,
    pub sup_location: [f64; 2],
    /// `(u, value)` along `u = v`, with `u` decreasing toward 0.
    pub diagonal_trace: Vec<(f64, f64)>,
    pub underflow: bool,
}

/// Path along which a boundary scan approaches the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPath {
    #[default]
    Diagonal,
    /// `v = u²`.
    Parabola,
}

/// `C_θ(u)^α ‖∇_θ log C_θ(u)‖` without clamping.
pub fn power_weighted_norm(c: &Copula, u: &[f64], alpha: f64) -> ScanPoint {
    let mut g = vec![0.0; c.family().param_count()];
    let cu = c.eval(u, Some(&mut g));
    let point = |value, underflow| ScanPoint {
        u: u[0],
        v: u[1],
        value,
        underflow,
    };
    if cu <= 0.0 {
        return point(0.0, true);
    }
    let weight = if alpha == 0.0 { 1.0 } else { cu.powf(alpha) };
    if weight == 0.0 {
        return point(0.0, true);
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    point(weight * norm, false)
}

fn require_bivariate(c: &Copula) -> Result<()> {
    if c.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "diagnostics are bivariate; got dimension {}",
            c.dim()
        )));
    }
    if !c.family().supports_cdf() {
        return Err(Error::Unsupported(format!(
            "the {} copula has no CDF",
            c.kind()
        )));
    }
    Ok(())
}

/// `count` points from `start` down to `end`, equally spaced on a log scale.
pub fn geometric_sequence(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let ratio = (end / start).ln() / (count - 1) as f64;
    (0..count).map(|k| start * (ratio * k as f64).exp()).collect()
}

fn open_grid(grid_n: usize) -> Vec<f64> {
    (1..=grid_n).map(|k| k as f64 / (grid_n + 1) as f64).collect()
}

/// Supremum over the open grid `{k/(grid_n+1)}²`, plus a diagonal trace that
/// follows the grid and then continues by decades down to `1e-8`.
pub fn power_bounded_sup(c: &Copula, alpha: f64, grid_n: usize) -> Result<BoundednessReport> {
    require_bivariate(c)?;
    if grid_n < 10 {
        return Err(Error::InvalidInput(format!("grid_n must be at least 10, got {grid_n}")));
    }
    let axis = open_grid(grid_n);
    let rows: Vec<(ScanPoint, bool)> = axis
        .par_iter()
        .map(|&u| {
            let mut best = ScanPoint {
                u,
                v: axis[0],
                value: f64::NEG_INFINITY,
                underflow: false,
            };
            let mut any_underflow = false;
            for &v in &axis {
                let p = power_weighted_norm(c, &[u, v], alpha);
                any_underflow |= p.underflow;
                if p.value > best.value {
                    best = p;
                }
            }
            (best, any_underflow)
        })
        .collect();
    let mut underflow = false;
    let mut sup = rows[0].0;
    for (p, uf) in &rows {
        underflow |= uf;
        if p.value > sup.value {
            sup = *p;
        }
    }

    let mut us: Vec<f64> = axis.iter().rev().copied().collect();
    let mut u = axis[0];
    loop {
        let next = 10f64.powf((u.log10() - 1e-9).floor());
        if next < TRACE_FLOOR * 0.999 {
            break;
        }
        us.push(next);
        u = next;
    }
    let diagonal_trace = us
        .iter()
        .map(|&u| {
            let p = power_weighted_norm(c, &[u, u], alpha);
            underflow |= p.underflow;
            (u, p.value)
        })
        .collect();

    Ok(BoundednessReport {
        family: c.kind(),
        theta: c.params().to_vec(),
        alpha,
        grid_resolution: grid_n,
        sup_value: sup.value,
        sup_location: [sup.u, sup.v],
        diagonal_trace,
        underflow,
    })
}

/// `C(u,u)^α ‖∇ log C(u,u)‖` for each `u` in `u_values`.
pub fn boundary_limit_scan(c: &Copula, alpha: f64, u_values: &[f64]) -> Result<Vec<ScanPoint>> {
    boundary_limit_scan_path(c, alpha, u_values, ScanPath::Diagonal)
}

pub fn boundary_limit_scan_path(
    c: &Copula,
    alpha: f64,
    u_values: &[f64],
    path: ScanPath,
) -> Result<Vec<ScanPoint>> {
    require_bivariate(c)?;
    if c.family().param_count() == 0 {
        return Err(Error::Usage(format!(
            "the {} copula has no parameter to differentiate",
            c.kind()
        )));
    }
    if u_values.is_empty() {
        return Err(Error::InvalidInput("no u values to scan".into()));
    }
    if u_values.iter().any(|&u| !(u > 0.0 && u <= 0.5)) {
        return Err(Error::InvalidInput("scan points must lie in (0, 0.5]".into()));
    }
    if u_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("scan points must be strictly decreasing".into()));
    }
    Ok(u_values
        .iter()
        .map(|&u| {
            let v = match path {
                ScanPath::Diagonal => u,
                ScanPath::Parabola => u * u,
            };
            power_weighted_norm(c, &[u, v], alpha)
        })
        .collect())
}

/// `(u, v, value)` on the open grid, row-major in `u`.
pub fn surface_grid(c: &Copula, alpha: f64, grid_n: usize) -> Result<Vec<ScanPoint>> {
    require_bivariate(c)?;
    let axis = open_grid(grid_n);
    Ok(axis
        .par_iter()
        .flat_map_iter(|&u| axis.iter().map(move |&v| power_weighted_norm(c, &[u, v], alpha)))
        .collect())
}

/// Writes a surface as CSV with header `u,v,value`.
pub fn write_surface_csv<W: Write>(points: &[ScanPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "v", "value"])?;
    for p in points {
        w.write_record([p.u.to_string(), p.v.to_string(), p.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cop(kind: FamilyKind, theta: f64) -> Copula {
        Copula::with_theta(kind, 2, theta).unwrap()
    }

    fn scan(c: &Copula, alpha: f64) -> Vec<f64> {
        let us = geometric_sequence(1e-2, 1e-8, 7);
        boundary_limit_scan(c, alpha, &us).unwrap().iter().map(|p| p.value).collect()
    }

    fn tail(c: &Copula, alpha: f64) -> f64 {
        *scan(c, alpha).last().unwrap()
    }

    #[test]
    fn documented_limits() {
        let frank = 0.5 - 1.0 / 2f64.exp_m1();
        assert!((frank - 0.343482).abs() < 1e-6);
        assert!((tail(&cop(FamilyKind::Frank, 2.0), 0.0) - frank).abs() < 1e-4);
        assert!((tail(&cop(FamilyKind::Joe, 2.0), 0.0) - 0.5).abs() < 1e-4);
        assert!(tail(&cop(FamilyKind::Clayton, 1.0), 0.5) < 1e-3);
    }

    #[test]
    fn frank_trace_reaches_limit() {
        let r = power_bounded_sup(&cop(FamilyKind::Frank, 2.0), 0.0, 200).unwrap();
        let frank = 0.5 - 1.0 / 2f64.exp_m1();
        let (u_last, v_last) = *r.diagonal_trace.last().unwrap();
        assert!((u_last - 1e-8).abs() < 1e-20);
        assert!((v_last - frank).abs() < 1e-6);
        assert!(r.diagonal_trace.windows(2).all(|w| w[1].0 < w[0].0));
        assert!(r.sup_value >= r.diagonal_trace[0].1);
    }

    #[test]
    fn gaussian_tail_behaviour() {
        let c = cop(FamilyKind::Gaussian, 0.5);
        let us = geometric_sequence(1e-2, 1e-6, 5);
        let damped = boundary_limit_scan(&c, 0.25, &us).unwrap();
        assert!(damped.windows(2).all(|w| w[1].value < w[0].value));
        let raw = boundary_limit_scan(&c, 0.0, &us).unwrap();
        assert!(raw.windows(2).all(|w| w[1].value > w[0].value));
        let par = boundary_limit_scan_path(&c, 0.25, &us, ScanPath::Parabola).unwrap();
        assert!(par.last().unwrap().value < damped[0].value);
    }

    #[test]
    fn table_classification() {
        let kinds = [FamilyKind::Clayton, FamilyKind::Gumbel, FamilyKind::Frank, FamilyKind::Joe];
        for kind in kinds {
            for theta in [0.5, 1.0, 2.0, 5.0] {
                let Ok(c) = Copula::with_theta(kind, 2, theta) else { continue };
                for alpha in [0.25, 0.5, 1.0] {
                    let values = scan(&c, alpha);
                    assert!(values[2..].windows(2).all(|w| w[1] < w[0]), "{kind} θ={theta} α={alpha}");
                    if alpha >= 0.5 {
                        assert!(tail(&c, alpha) < 1e-3, "{kind} θ={theta} α={alpha}");
                    }
                }
                let limit = tail(&c, 0.0);
                match kind {
                    FamilyKind::Frank => {
                        assert!((limit - (1.0 / theta - 1.0 / theta.exp_m1())).abs() < 1e-4)
                    }
                    FamilyKind::Joe => assert!((limit - 1.0 / theta).abs() < 1e-4),
                    // Finite: ln 2 / θ² along the diagonal, approached at rate u^θ ln u.
                    FamilyKind::Clayton => {
                        let expect = std::f64::consts::LN_2 / (theta * theta);
                        assert!((limit / expect - 1.0).abs() < 1e-2, "θ={theta}: {limit}")
                    }
                    // Gumbel grows like log(−log u): unbounded but slowly.
                    _ => assert!(scan(&c, 0.0).windows(2).all(|w| w[1] > w[0])),
                }
            }
        }
    }

    #[test]
    fn refinement_is_stable_for_positive_alpha() {
        for (kind, theta) in [
            (FamilyKind::Clayton, 1.0),
            (FamilyKind::Gumbel, 2.0),
            (FamilyKind::Frank, 2.0),
            (FamilyKind::Joe, 2.0),
            (FamilyKind::Gaussian, 0.5),
        ] {
            let c = cop(kind, theta);
            let coarse = power_bounded_sup(&c, 0.5, 200).unwrap().sup_value;
            let fine = power_bounded_sup(&c, 0.5, 400).unwrap().sup_value;
            assert!((fine / coarse - 1.0).abs() < 0.01, "{kind}: {coarse} vs {fine}");
        }
    }

    #[test]
    fn surface_is_finite_and_symmetric() {
        let s = surface_grid(&cop(FamilyKind::Clayton, 1.0), 0.5, 50).unwrap();
        assert_eq!(s.len(), 2500);
        assert!(s.iter().all(|p| p.value.is_finite()));
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(s[i * 50 + j].value, s[j * 50 + i].value);
            }
        }
        let mut buf = Vec::new();
        write_surface_csv(&s[..2], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("u,v,value\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn frank_surface_corner() {
        let s = surface_grid(&cop(FamilyKind::Frank, 2.0), 0.0, 400).unwrap();
        assert!((s[0].value - 0.343482).abs() < 5e-3);
    }

    #[test]
    fn invalid_requests() {
        let ind = Copula::independence(2).unwrap();
        assert!(matches!(boundary_limit_scan(&ind, 0.5, &[0.1]), Err(Error::Usage(_))));
        let c3 = Copula::with_theta(FamilyKind::Clayton, 3, 1.0).unwrap();
        assert!(matches!(power_bounded_sup(&c3, 0.5, 20), Err(Error::Unsupported(_))));
        let c = cop(FamilyKind::Clayton, 1.0);
        assert!(boundary_limit_scan(&c, 0.5, &[0.1, 0.2]).is_err());
        assert!(boundary_limit_scan(&c, 0.5, &[0.7]).is_err());
        assert!(power_bounded_sup(&c, 0.5, 5).is_err());
    }

    #[test]
    fn underflow_is_flagged() {
        let c = cop(FamilyKind::Gaussian, 0.5);
        let p = power_weighted_norm(&c, &[1e-300, 1e-300], 50.0);
        assert!(p.underflow && p.value == 0.0);
    }
}
