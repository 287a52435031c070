//! Derivative-free minimisation.
//!
//! Nelder-Mead with the dimension-adaptive coefficients of Gao and Han
//! (2012), which behave much better than the classical (1, 2, ½, ½) set
//! once the parameter count passes a dozen or so.

#[derive(Clone, Debug)]
pub struct NelderMead {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Stop once the spread of objective values across the simplex is below this.
    pub f_tol: f64,
    /// ... and the simplex diameter (max-norm) is below this.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 10_000,
            initial_step: 0.5,
            f_tol: 1e-12,
            x_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn with_budget(max_evals: usize) -> Self {
        Self {
            max_evals,
            ..Self::default()
        }
    }

    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        if n == 0 {
            let value = eval(x0, &mut evals);
            return Minimum {
                x: Vec::new(),
                value,
                evals,
                converged: true,
            };
        }

        let nf = n as f64;
        let alpha = 1.0;
        let beta = 1.0 + 2.0 / nf;
        let gamma = 0.75 - 1.0 / (2.0 * nf);
        let delta = 1.0 - 1.0 / nf;

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += self.initial_step;
            simplex.push(p);
        }
        let mut values: Vec<f64> = Vec::with_capacity(n + 1);
        for p in &simplex {
            if evals >= self.max_evals {
                values.push(f64::INFINITY);
            } else {
                values.push(eval(p, &mut evals));
            }
        }

        let mut converged = false;
        let mut order: Vec<usize> = (0..=n).collect();
        while evals < self.max_evals {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];

            let spread_f = values[worst] - values[best];
            let spread_x = simplex
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&simplex[best])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if spread_f <= self.f_tol && spread_x <= self.x_tol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for &i in &order[..n] {
                for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                    *c += x / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[worst])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < values[best] {
                let xe = along(alpha * beta);
                let fe = if evals < self.max_evals {
                    eval(&xe, &mut evals)
                } else {
                    f64::INFINITY
                };
                if fe < fr {
                    simplex[worst] = xe;
                    values[worst] = fe;
                } else {
                    simplex[worst] = xr;
                    values[worst] = fr;
                }
                continue;
            }
            if fr < values[second_worst] {
                simplex[worst] = xr;
                values[worst] = fr;
                continue;
            }
            // contraction, outside or inside
            let (xc, outside) = if fr < values[worst] {
                (along(alpha * gamma), true)
            } else {
                (along(-gamma), false)
            };
            if evals >= self.max_evals {
                break;
            }
            let fc = eval(&xc, &mut evals);
            let accept = if outside {
                fc <= fr
            } else {
                fc < values[worst]
            };
            if accept {
                simplex[worst] = xc;
                values[worst] = fc;
                continue;
            }
            // shrink towards the best vertex
            let anchor = simplex[best].clone();
            for &i in &order[1..] {
                if evals >= self.max_evals {
                    break;
                }
                for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                    *x = a + delta * (*x - a);
                }
                values[i] = eval(&simplex[i], &mut evals);
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("simplex is nonempty");
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            evals,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let nm = NelderMead::default();
        let m = nm.minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6);
        assert!((m.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let nm = NelderMead::with_budget(20_000);
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.value < 1e-10, "{}", m.value);
    }

    #[test]
    fn respects_budget() {
        let nm = NelderMead::with_budget(50);
        let mut count = 0;
        let m = nm.minimize(
            |x| {
                count += 1;
                x.iter().map(|v| v * v).sum()
            },
            &[1.0; 8],
        );
        assert!(m.evals <= 50);
        assert_eq!(count, m.evals);
    }

    #[test]
    fn higher_dimensional_quadratic() {
        let nm = NelderMead::with_budget(40_000);
        let target: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        let m = nm.minimize(
            |x| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum(),
            &[0.0; 16],
        );
        assert!(m.value < 1e-8, "{}", m.value);
    }
}
