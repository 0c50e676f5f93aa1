//! Deterministic minimizers: bracketed Brent search for scalar problems and
//! gradient descent with Armijo backtracking for vector problems.

const GOLDEN: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

#[derive(Debug, Clone, Copy)]
pub struct ScalarOptions {
    /// Absolute/relative tolerance on the abscissa.
    pub tol: f64,
    pub max_iter: usize,
    /// Search is confined to `[-bound, bound]`.
    pub bound: f64,
    pub initial_step: f64,
}

impl Default for ScalarOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            bound: 30.0,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScalarMinimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    /// Final bracket width met the tolerance.
    pub converged: bool,
    /// The minimizer sits on the search bound.
    pub at_bound: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` starting from `x0`: expand a downhill bracket (capped at
/// `±bound`), then refine with Brent's golden-section/parabolic method.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut f: F, x0: f64, opts: &ScalarOptions) -> ScalarMinimum {
    let bound = opts.bound;
    let mut eval = |x: f64| finite_or_inf(f(x.clamp(-bound, bound)));
    let x0 = x0.clamp(-bound, bound);
    let mut a = x0;
    let mut fa = eval(a);
    let mut step = opts.initial_step;
    let mut b = (a + step).clamp(-bound, bound);
    if b == a {
        step = -step;
        b = a + step;
    }
    let mut fb = eval(b);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
        step = -step;
    }
    let mut iterations = 0;
    // Walk downhill from a through b until the function rises.
    let (lo, mid, hi, fmid) = loop {
        iterations += 1;
        step *= GOLDEN;
        let c = (b + step).clamp(-bound, bound);
        if c == b {
            return ScalarMinimum {
                x: b,
                fx: fb,
                iterations,
                converged: false,
                at_bound: true,
            };
        }
        let fc = eval(c);
        if fc >= fb {
            let (lo, hi) = if a < c { (a, c) } else { (c, a) };
            break (lo, b, hi, fb);
        }
        a = b;
        b = c;
        fb = fc;
        if iterations >= opts.max_iter {
            return ScalarMinimum {
                x: b,
                fx: fb,
                iterations,
                converged: false,
                at_bound: false,
            };
        }
    };
    let res = brent(&mut eval, lo, mid, hi, fmid, opts.tol, opts.max_iter);
    ScalarMinimum {
        iterations: iterations + res.iterations,
        ..res
    }
}

/// Brent's method on a bracket `a < b < c` with `f(b)` below both ends.
fn brent<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    c: f64,
    fb: f64,
    tol: f64,
    max_iter: usize,
) -> ScalarMinimum {
    const ZEPS: f64 = 1e-12;
    let (mut lo, mut hi) = (a.min(c), a.max(c));
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for it in 1..=max_iter {
        let xm = 0.5 * (lo + hi);
        let tol1 = tol * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            return ScalarMinimum {
                x,
                fx,
                iterations: it,
                converged: true,
                at_bound: false,
            };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (lo - x) && p < q * (hi - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    ScalarMinimum {
        x,
        fx,
        iterations: max_iter,
        converged: false,
        at_bound: false,
    }
}

/// Root of `g` on `[a, b]` where `g(a)` and `g(b)` differ in sign
/// (Illinois-modified regula falsi). Returns `None` without a sign change.
pub fn bracketed_root<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64, tol: f64, max_iter: usize) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut ga, mut gb) = (g(a), g(b));
    if !(ga.is_finite() && gb.is_finite()) || ga.signum() == gb.signum() {
        return if ga == 0.0 { Some(a) } else if gb == 0.0 { Some(b) } else { None };
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let c = (a * gb - b * ga) / (gb - ga);
        let gc = g(c);
        if gc == 0.0 || (b - a).abs() < tol * (1.0 + c.abs()) {
            return Some(c);
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    Some((a * gb - b * ga) / (gb - ga))
}

#[derive(Debug, Clone, Copy)]
pub struct VectorOptions {
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub bound: f64,
}

impl Default for VectorOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            step_tol: 1e-12,
            max_iter: 200,
            bound: 30.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VectorMinimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradient descent with Barzilai–Borwein trial steps and Armijo backtracking.
/// `f` returns the value and writes the gradient into its second argument.
pub fn gradient_descent<F: FnMut(&[f64], &mut [f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &VectorOptions,
) -> VectorMinimum {
    let m = x0.len();
    let clamp = |x: &mut [f64]| {
        for v in x.iter_mut() {
            *v = v.clamp(-opts.bound, opts.bound);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut g = vec![0.0; m];
    let mut fx = finite_or_inf(f(&x, &mut g));
    let mut step = 1.0 / norm(&g).max(1.0);
    let mut xn = vec![0.0; m];
    let mut gn = vec![0.0; m];
    for it in 1..=opts.max_iter {
        let gnorm = norm(&g);
        if gnorm <= opts.grad_tol {
            return VectorMinimum {
                x,
                fx,
                grad_norm: gnorm,
                iterations: it - 1,
                converged: true,
            };
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..m {
                xn[k] = x[k] - t * g[k];
            }
            clamp(&mut xn);
            let fxn = finite_or_inf(f(&xn, &mut gn));
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gk, (a, b))| gk * (b - a)).sum();
            if fxn <= fx - 1e-4 * decrease && fxn.is_finite() {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return VectorMinimum {
                x,
                fx,
                grad_norm: gnorm,
                iterations: it,
                converged: false,
            };
        }
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { ss / sy } else { t * 2.0 };
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        fx = finite_or_inf(f(&x, &mut g));
        if ss.sqrt() <= opts.step_tol * (1.0 + norm(&x)) {
            let gnorm = norm(&g);
            return VectorMinimum {
                x,
                fx,
                grad_norm: gnorm,
                iterations: it,
                converged: gnorm <= opts.grad_tol,
            };
        }
    }
    let gnorm = norm(&g);
    VectorMinimum {
        x,
        fx,
        grad_norm: gnorm,
        iterations: opts.max_iter,
        converged: gnorm <= opts.grad_tol,
    }
}
