//! Derivative-free unconstrained minimization: BFGS on central-difference
//! gradients, with Nelder-Mead as a fallback when the line search stalls.

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Parameter step (infinity norm) below which the iteration may stop.
    pub x_tol: f64,
    /// Objective change accompanying a small step.
    pub f_tol: f64,
    /// Gradient infinity norm that counts as stationary.
    pub g_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            x_tol: 1e-8,
            f_tol: 1e-10,
            g_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub used_fallback: bool,
}

fn step_size(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

/// Central-difference gradient with step `1e-6 * (1 + |x_i|)`.
pub fn numerical_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], evals: &mut usize) -> Vec<f64> {
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = step_size(x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        *evals += 2;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian with a wider step than the gradient uses.
pub fn numerical_hessian<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
    let f0 = f(x);
    let mut out = vec![vec![0.0; d]; d];
    let mut xp = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        out[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as
/// infeasible and rejected by the line search.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &OptimOptions) -> Minimum {
    let d = x0.len();
    let mut evals = 0usize;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    evals += 1;
    if d == 0 {
        return Minimum {
            x,
            f: fx,
            iterations: 0,
            evaluations: evals,
            converged: fx.is_finite(),
            grad_norm: 0.0,
            used_fallback: false,
        };
    }
    if !fx.is_finite() {
        return nelder_mead(f, &x, opts, 0, evals);
    }
    let mut g = numerical_gradient(&mut f, &x, &mut evals);
    let mut h_inv = identity(d, 1.0 / inf_norm(&g).max(1.0));
    let mut first_update = true;

    for iter in 1..=opts.max_iter {
        let gnorm = inf_norm(&g);
        if gnorm < opts.g_tol {
            return done(x, fx, iter - 1, evals, true, gnorm, false);
        }
        let mut dir: Vec<f64> = mat_vec(&h_inv, &g).iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            h_inv = identity(d, 1.0 / gnorm.max(1.0));
            dir = g.iter().map(|v| -v / gnorm.max(1.0)).collect();
            slope = dot(&g, &dir);
        }

        // Backtracking Armijo search.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            let ft = f(&trial);
            evals += 1;
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent along the quasi-Newton direction: the gradient is
            // at its noise floor or the surface is badly scaled.
            let nm = nelder_mead(&mut f, &x, opts, iter, evals);
            return if nm.f <= fx {
                nm
            } else {
                done(x, fx, iter, nm.evaluations, gnorm < 1e3 * opts.g_tol, gnorm, true)
            };
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let df = fx - f_new;
        let g_new = numerical_gradient(&mut f, &x_new, &mut evals);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        x = x_new;
        fx = f_new;
        g = g_new;

        if inf_norm(&s) < opts.x_tol && df.abs() < opts.f_tol {
            return done(x, fx, iter, evals, true, inf_norm(&g), false);
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first_update {
                let scale = sy / dot(&y, &y);
                h_inv = identity(d, scale);
                first_update = false;
            }
            bfgs_update(&mut h_inv, &s, &y, sy);
        }
    }
    let gnorm = inf_norm(&g);
    done(x, fx, opts.max_iter, evals, false, gnorm, false)
}

fn done(x: Vec<f64>, f: f64, iterations: usize, evaluations: usize, converged: bool, grad_norm: f64, used_fallback: bool) -> Minimum {
    Minimum {
        x,
        f,
        iterations,
        evaluations,
        converged,
        grad_norm,
        used_fallback,
    }
}

fn identity(d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { scale } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let rho = 1.0 / sy;
    for i in 0..d {
        for j in 0..d {
            h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Nelder-Mead simplex search, used as a fallback.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &OptimOptions,
    iterations_so_far: usize,
    evals_so_far: usize,
) -> Minimum {
    let d = x0.len();
    let mut evals = evals_so_far;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += 0.1 * (1.0 + x0[i].abs());
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }
    let max_iter = 200 * (d + 1) * 10;
    let mut converged = false;
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[d].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| inf_norm(&v.iter().zip(&simplex[0].0).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        if spread.abs() < opts.f_tol && size < opts.x_tol.max(1e-10) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(v, _)| v[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = best.iter().zip(&item.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fv = eval(&v, &mut evals);
                    *item = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Minimum {
        x,
        f: fx,
        iterations: iterations_so_far + iter,
        evaluations: evals,
        converged,
        grad_norm: f64::NAN,
        used_fallback: true,
    }
}
