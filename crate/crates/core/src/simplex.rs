//! Derivative-free Nelder-Mead minimizer with stall restarts.

#[derive(Debug, Clone)]
pub struct NelderMead {
    /// Edge length of the initial simplex in every coordinate direction.
    pub initial_step: f64,
    /// Minimum decrease of the mean vertex value over one simplex cycle.
    pub ftol: f64,
    pub max_evals: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            ftol: 1e-14,
            max_evals: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `x0`. The returned value never exceeds `f(x0)`.
    ///
    /// A stall (mean vertex value decreasing by less than `ftol` over `n + 1`
    /// iterations) triggers a restart around the best vertex. A stall whose
    /// restart phase failed to lower the best value by `ftol` is reported as
    /// convergence.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        assert!(n >= 1, "need at least one coordinate");
        let mut obj = Counted { f, evals: 0 };

        let mut simplex = Vec::with_capacity(n + 1);
        let fx0 = obj.call(x0);
        simplex.push((x0.to_vec(), fx0));
        self.fill_simplex(&mut simplex, &mut obj);

        let cycle = n + 1;
        let mean = |s: &[(Vec<f64>, f64)]| s.iter().map(|v| v.1).sum::<f64>() / s.len() as f64;
        let best = |s: &[(Vec<f64>, f64)]| s.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let mut iterations = 0;
        let mut cycle_mean = mean(&simplex);
        let mut restart_best = f64::INFINITY;
        let mut converged = false;

        while obj.evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            self.step(&mut simplex, &mut obj);
            iterations += 1;

            if iterations % cycle == 0 {
                let m = mean(&simplex);
                if !(cycle_mean - m >= self.ftol) {
                    let b = best(&simplex);
                    if !(restart_best - b >= self.ftol) {
                        converged = true;
                        break;
                    }
                    restart_best = b;
                    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
                    simplex.truncate(1);
                    self.fill_simplex(&mut simplex, &mut obj);
                    cycle_mean = mean(&simplex);
                } else {
                    cycle_mean = m;
                }
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            evaluations: obj.evals,
            iterations,
            converged,
        }
    }

    fn fill_simplex<F: FnMut(&[f64]) -> f64>(&self, simplex: &mut Vec<(Vec<f64>, f64)>, obj: &mut Counted<F>) {
        let base = simplex[0].0.clone();
        for i in 0..base.len() {
            let mut x = base.clone();
            x[i] += self.initial_step;
            let fx = obj.call(&x);
            simplex.push((x, fx));
        }
    }

    // One iteration on a sorted simplex (best first).
    fn step<F: FnMut(&[f64]) -> f64>(&self, simplex: &mut [(Vec<f64>, f64)], obj: &mut Counted<F>) {
        let n = simplex.len() - 1;
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along =
            |t: f64, worst: &[f64]| -> Vec<f64> { centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect() };

        let worst = simplex[n].0.clone();
        let (f_best, f_second, f_worst) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);

        let xr = along(1.0, &worst);
        let fr = obj.call(&xr);
        if fr < f_best {
            let xe = along(2.0, &worst);
            let fe = obj.call(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            return;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            return;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = along(0.5, &worst);
            let fc = obj.call(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5, &worst);
            let fc = obj.call(&xc);
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            return;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            for (xi, bi) in v.0.iter_mut().zip(&best) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            v.1 = obj.call(&v.0);
        }
    }
}
