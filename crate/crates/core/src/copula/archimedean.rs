//! Archimedean CDFs, log-CDF parameter gradients and densities.
//!
//! The CDF routines take the reduced point (coordinates in `(0, 1)`, at least
//! two of them) and return `(C, ∂ log C / ∂θ)`.

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(Σ e^{t_i} − m + 1)` for `t_i ≥ 0`.
fn clayton_log_s(t: &[f64]) -> f64 {
    let tmax = t.iter().copied().fold(0.0, f64::max);
    if tmax < 700.0 {
        t.iter().map(|&x| x.exp_m1()).sum::<f64>().ln_1p()
    } else {
        let lse = log_sum_exp(t.iter().copied());
        let extra = (t.len() as f64 - 1.0) * (-lse).exp();
        lse + (-extra).ln_1p()
    }
}

pub(super) fn clayton(u: &[f64], theta: f64) -> (f64, f64) {
    let mut t = [0.0f64; 32];
    let mut heap;
    let t: &mut [f64] = if u.len() <= t.len() {
        &mut t[..u.len()]
    } else {
        heap = vec![0.0; u.len()];
        &mut heap[..]
    };
    for (ti, &ui) in t.iter_mut().zip(u) {
        *ti = -theta * ui.ln();
    }
    let log_s = clayton_log_s(t);
    let c = (-log_s / theta).exp();
    let weighted: f64 = t.iter().map(|&ti| ti * (ti - log_s).exp()).sum();
    (c, (log_s - weighted) / (theta * theta))
}

pub(super) fn clayton_log_pdf(u: &[f64], theta: f64) -> f64 {
    let d = u.len();
    let t: Vec<f64> = u.iter().map(|&x| -theta * x.ln()).collect();
    let log_s = clayton_log_s(&t);
    let sum_log_u: f64 = u.iter().map(|x| x.ln()).sum();
    let head: f64 = (0..d).map(|k| (k as f64 * theta).ln_1p()).sum();
    head - (theta + 1.0) * sum_log_u - (1.0 / theta + d as f64) * log_s
}

pub(super) fn gumbel(u: &[f64], theta: f64) -> (f64, f64) {
    let mut lx = [0.0f64; 32];
    let mut heap;
    let lx: &mut [f64] = if u.len() <= lx.len() {
        &mut lx[..u.len()]
    } else {
        heap = vec![0.0; u.len()];
        &mut heap[..]
    };
    for (l, &ui) in lx.iter_mut().zip(u) {
        *l = (-ui.ln()).ln();
    }
    let log_a = log_sum_exp(lx.iter().map(|&l| theta * l));
    let w = (log_a / theta).exp();
    let c = (-w).exp();
    let mix: f64 = lx.iter().map(|&l| l * (theta * l - log_a).exp()).sum();
    (c, w * (log_a / (theta * theta) - mix / theta))
}

pub(super) fn gumbel_log_pdf(u: f64, v: f64, theta: f64) -> f64 {
    let lx = (-u.ln()).ln();
    let ly = (-v.ln()).ln();
    let log_a = log_sum_exp([theta * lx, theta * ly].into_iter());
    let w = (log_a / theta).exp();
    -w - u.ln() - v.ln()
        + (theta - 1.0) * (lx + ly)
        + (1.0 / theta - 2.0) * log_a
        + (w + theta - 1.0).ln()
}

pub(super) fn frank(u: &[f64], theta: f64) -> (f64, f64) {
    let b = (-theta).exp_m1();
    let eb = (-theta).exp();
    let m = u.len() as f64;
    let mut p = 1.0;
    let mut dlog_p = (m - 1.0) * eb / b;
    // Σ ln r_i with r_i = (1 − e^{−θu_i}) / (1 − e^{−θ}), for the θ > 0 branch.
    let mut log_r = 0.0;
    let log_q = (-eb).ln_1p();
    for (i, &ui) in u.iter().enumerate() {
        let a = (-theta * ui).exp_m1();
        p *= if i == 0 { a } else { a / b };
        dlog_p += -ui * (-theta * ui).exp() / a;
        if theta > 0.0 {
            log_r += (-(-theta * ui).exp()).ln_1p() - log_q;
        }
    }
    // 1 + p = e^{−θ} Π r_i + (1 − Π r_i) avoids cancellation when p ≈ −1.
    let log1p_p = if theta > 0.0 && log_r > -std::f64::consts::LN_2 {
        ((-theta + log_r).exp() - log_r.exp_m1()).ln()
    } else {
        p.ln_1p()
    };
    let g = -log1p_p;
    let c = g / theta;
    let grad = -p * dlog_p / (log1p_p.exp() * g) - 1.0 / theta;
    (c, grad)
}

pub(super) fn frank_log_pdf(u: f64, v: f64, theta: f64) -> f64 {
    // c_{−θ}(u, v) = c_θ(u, 1 − v)
    if theta < 0.0 {
        return frank_log_pdf(u, 1.0 - v, -theta);
    }
    // Denominator e^{−θu}(1 − e^{−θv}) + e^{−θ}(e^{θ(1−v)} − 1), both terms ≥ 0.
    let la = -theta * u + (-(-theta * v).exp_m1()).ln();
    let lb = -theta + (theta * (1.0 - v)).exp_m1().ln();
    let log_den = log_sum_exp([la, lb].into_iter());
    theta.ln() + (-(-theta).exp_m1()).ln() - theta * (u + v) - 2.0 * log_den
}

pub(super) fn joe(u: &[f64], theta: f64) -> (f64, f64) {
    let mut s = 0.0;
    let mut ds = 0.0;
    for &ui in u {
        let l = (-ui).ln_1p();
        let w = (theta * l).exp();
        let om = -(theta * l).exp_m1();
        s += if theta * l < -std::f64::consts::LN_2 {
            (-w).ln_1p()
        } else {
            om.ln()
        };
        ds += -l * w / om;
    }
    let es = s.exp();
    let log_q = if s < -std::f64::consts::LN_2 {
        (-es).ln_1p()
    } else {
        (-s.exp_m1()).ln()
    };
    let c = -(log_q / theta).exp_m1();
    let q_ratio = -es * ds / log_q.exp();
    let dc = -(log_q / theta).exp() * (q_ratio / theta - log_q / (theta * theta));
    (c, dc / c)
}

pub(super) fn joe_log_pdf(u: f64, v: f64, theta: f64) -> f64 {
    let lu = (-u).ln_1p();
    let lv = (-v).ln_1p();
    // h = a + b − ab with a = (1−u)^θ, b = (1−v)^θ, kept in log space.
    let log_h = log_sum_exp([theta * lu, theta * lv + (-(theta * lu).exp()).ln_1p()].into_iter());
    (1.0 / theta - 2.0) * log_h + (theta - 1.0) * (lu + lv) + (theta - 1.0 + log_h.exp()).ln()
}
