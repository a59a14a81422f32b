//! Derivative-free simplex minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop once best and worst vertex objectives differ by at most this.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Initial simplex edge length along each axis.
    pub step: f64,
    /// Fresh simplices built around the incumbent after convergence, until
    /// one fails to improve it by more than `f_tol`. Restarts share the
    /// iteration budget.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            f_tol: 1e-8,
            max_iter: 5000,
            step: 0.1,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½)
/// with restarts. The objective may return `+inf` to reject a point; `f(x0)`
/// must be finite.
pub fn minimize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: NelderMeadOptions) -> Minimum {
    let mut best = simplex_descent(&mut f, x0, opts.max_iter, opts);
    for _ in 0..opts.restarts {
        if !best.converged || best.iterations >= opts.max_iter {
            break;
        }
        let next = simplex_descent(&mut f, &best.x, opts.max_iter - best.iterations, opts);
        let gain = best.f - next.f;
        let iterations = best.iterations + next.iterations;
        let converged = next.converged;
        if next.f < best.f {
            best = Minimum {
                iterations,
                converged,
                ..next
            };
        } else {
            best.iterations = iterations;
            best.converged = converged;
        }
        if gain <= opts.f_tol {
            break;
        }
    }
    best
}

fn simplex_descent(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    max_iter: usize,
    opts: NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    if n == 0 {
        return Minimum {
            x: Vec::new(),
            f: f(x0),
            iterations: 0,
            converged: true,
        };
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let fx = f(&x);
        simplex.push((x, fx));
    }

    let point = |c: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
        c.iter()
            .zip(towards)
            .map(|(a, b)| a + t * (b - a))
            .collect()
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if worst - best <= opts.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let reflected = point(&centroid, &simplex[n].0, -1.0);
        let fr = f(&reflected);
        if fr < best {
            let expanded = point(&centroid, &simplex[n].0, -2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst {
            let x = point(&centroid, &reflected, 0.5);
            let fx = f(&x);
            (x, fx)
        } else {
            let x = point(&centroid, &simplex[n].0, 0.5);
            let fx = f(&x);
            (x, fx)
        };
        if fc < fr.min(worst) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            *x = point(&anchor, x, 0.5);
            *fx = f(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Minimum {
        x,
        f: fx,
        iterations,
        converged,
    }
}
