//! Derivative-free wrappers around a bounded quasi-Newton minimiser and a
//! scalar Brent minimiser.

/// Why a minimisation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Projected gradient below tolerance.
    ProjectedGradient,
    /// Relative objective reduction below tolerance.
    RelativeReduction,
    /// No descent found even along the projected steepest-descent path.
    Stationary,
    /// Evaluation budget exhausted.
    MaxEvaluations,
    /// Objective is not finite at the start point.
    NonFinite,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::ProjectedGradient | Termination::RelativeReduction | Termination::Stationary
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub rel_tol: f64,
    pub pg_tol: f64,
    pub max_evals: usize,
    pub memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-16,
            pg_tol: 1e-12,
            max_evals: 40_000,
            memory: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    pub termination: Termination,
}

impl MinimizeResult {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

struct Counted<F> {
    f: F,
    n: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.n >= self.max {
            return None;
        }
        self.n += 1;
        let v = (self.f)(x);
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central differences, shifted inwards at the bounds.
fn fd_gradient<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Option<Vec<f64>> {
    let step = f64::EPSILON.cbrt();
    let mut g = vec![0.0; x.len()];
    let mut xt = x.to_vec();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        let xp = (x[i] + h).min(upper[i]);
        let xm = (x[i] - h).max(lower[i]);
        if xp <= xm {
            continue;
        }
        xt[i] = xp;
        let fp = obj.eval(&xt)?;
        xt[i] = xm;
        let fm = obj.eval(&xt)?;
        xt[i] = x[i];
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (xp - xm)
        } else {
            0.0
        };
    }
    Some(g)
}

/// Minimises `f` over the box `[lower, upper]` by projected L-BFGS with
/// finite-difference gradients.
pub fn minimize_bounded<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &MinimizeOptions,
) -> MinimizeResult {
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n, "bound length mismatch");
    let mut obj = Counted {
        f,
        n: 0,
        max: opts.max_evals.max(1),
    };
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut fx = obj.eval(&x).unwrap_or(f64::INFINITY);
    let finish = |x: Vec<f64>, f: f64, n_evals: usize, termination| MinimizeResult {
        x,
        f,
        n_evals,
        termination,
    };
    if !fx.is_finite() {
        return finish(x, fx, obj.n, Termination::NonFinite);
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let Some(mut g) = fd_gradient(&mut obj, &x, lower, upper) else {
        return finish(x, fx, obj.n, Termination::MaxEvaluations);
    };
    loop {
        let mut pg_inf: f64 = 0.0;
        for i in 0..n {
            let p = x[i] - (x[i] - g[i]).clamp(lower[i], upper[i]);
            pg_inf = pg_inf.max(p.abs());
        }
        if pg_inf <= opts.pg_tol {
            return finish(x, fx, obj.n, Termination::ProjectedGradient);
        }
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let masked = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&free).map(|(&a, &f)| if f { a } else { 0.0 }).collect()
        };

        let mut used_memory = !s_hist.is_empty();
        let mut d = two_loop(&masked(&g), &s_hist, &y_hist, &free);
        for v in d.iter_mut() {
            *v = -*v;
        }
        if dot(&d, &g) >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            s_hist.clear();
            y_hist.clear();
            used_memory = false;
            d = masked(&g).iter().map(|v| -v).collect();
        }

        let searched = line_search(&mut obj, &x, fx, &g, &d, lower, upper, used_memory);
        let (x_new, f_new) = match searched {
            LineSearch::Found(xn, fnew) => (xn, fnew),
            LineSearch::Budget => return finish(x, fx, obj.n, Termination::MaxEvaluations),
            LineSearch::Failed => {
                if used_memory {
                    s_hist.clear();
                    y_hist.clear();
                    let sd: Vec<f64> = masked(&g).iter().map(|v| -v).collect();
                    match line_search(&mut obj, &x, fx, &g, &sd, lower, upper, false) {
                        LineSearch::Found(xn, fnew) => (xn, fnew),
                        LineSearch::Budget => {
                            return finish(x, fx, obj.n, Termination::MaxEvaluations)
                        }
                        LineSearch::Failed => return finish(x, fx, obj.n, Termination::Stationary),
                    }
                } else {
                    return finish(x, fx, obj.n, Termination::Stationary);
                }
            }
        };

        let reduction = fx - f_new;
        let scale = fx.abs().max(f_new.abs());
        let small = reduction <= opts.rel_tol * scale;
        let Some(g_new) = fd_gradient(&mut obj, &x_new, lower, upper) else {
            return finish(x_new, f_new, obj.n, Termination::MaxEvaluations);
        };
        if small {
            return finish(x_new, f_new, obj.n, Termination::RelativeReduction);
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y) && sy.is_finite() {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
}

fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> {
        v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect()
    };
    let mut q = g.to_vec();
    let m = s_hist.len();
    let mut alpha = vec![0.0; m];
    let ss: Vec<Vec<f64>> = s_hist.iter().map(|s| mask(s)).collect();
    let ys: Vec<Vec<f64>> = y_hist.iter().map(|y| mask(y)).collect();
    let mut rho = vec![0.0; m];
    for i in 0..m {
        let sy = dot(&ss[i], &ys[i]);
        rho[i] = if sy > 0.0 { 1.0 / sy } else { 0.0 };
    }
    for i in (0..m).rev() {
        alpha[i] = rho[i] * dot(&ss[i], &q);
        for (qj, yj) in q.iter_mut().zip(&ys[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if m > 0 {
        let yy = dot(&ys[m - 1], &ys[m - 1]);
        let sy = dot(&ss[m - 1], &ys[m - 1]);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
    }
    for i in 0..m {
        let beta = rho[i] * dot(&ys[i], &q);
        for (qj, sj) in q.iter_mut().zip(&ss[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    mask(&q)
}

enum LineSearch {
    Found(Vec<f64>, f64),
    Failed,
    Budget,
}

/// Backtracking Armijo search along the projected path `P(x + t·d)`.
#[allow(clippy::too_many_arguments)]
fn line_search<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &[f64],
    lower: &[f64],
    upper: &[f64],
    quasi_newton: bool,
) -> LineSearch {
    let d_inf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if d_inf == 0.0 {
        return LineSearch::Failed;
    }
    let x_scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut t = if quasi_newton { 1.0 } else { (x_scale / d_inf).min(1.0) };
    let mut trial = vec![0.0; x.len()];
    for _ in 0..60 {
        for i in 0..x.len() {
            trial[i] = x[i] + t * d[i];
        }
        project(&mut trial, lower, upper);
        let moved: f64 = trial.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved <= f64::EPSILON * x_scale {
            return LineSearch::Failed;
        }
        let Some(ft) = obj.eval(&trial) else {
            return LineSearch::Budget;
        };
        let decrease: f64 = trial.iter().zip(x).zip(g).map(|((a, b), gi)| (a - b) * gi).sum();
        if ft.is_finite() && ft <= fx + 1e-4 * decrease && ft < fx {
            return LineSearch::Found(trial, ft);
        }
        t *= 0.5;
    }
    LineSearch::Failed
}

/// Brent's minimiser on `[a, b]` to absolute tolerance `tol`.
/// Returns `(x, f(x), evaluations)`.
pub fn brent_minimize<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64, usize) {
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let mut evals = 1;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = f64::EPSILON.sqrt() * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let r = e;
            e = d;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let mut fu = f(u);
        evals += 1;
        if fu.is_nan() {
            fu = f64::INFINITY;
        }
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
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
    (x, fx, evals)
}
