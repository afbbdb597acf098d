//! L2-penalized logistic regression fitted by damped Newton iterations.
//!
//! Minimizes `(1/C)·½‖w‖² + Σ_i log(1 + exp(z_i)) − y_i z_i` with
//! `z_i = w·x_i + b`. The intercept is not penalized.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::data::check_labels;
use crate::error::{Error, Result};
use crate::network::{sigmoid, AffineMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefitOptions {
    pub c: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RefitOptions {
    fn default() -> Self {
        RefitOptions {
            c: 0.1,
            gradient_tolerance: 1e-8,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub affine: AffineMap,
    pub objective: f64,
    /// ∞-norm of the objective gradient at `affine`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    inv_c: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    fn logits(&self, theta: &DVector<f64>) -> Vec<f64> {
        let d = self.x.ncols();
        self.x
            .outer_iter()
            .map(|row| row.iter().zip(theta.iter()).map(|(a, b)| a * b).sum::<f64>() + theta[d])
            .collect()
    }

    fn objective(&self, theta: &DVector<f64>) -> f64 {
        let d = self.x.ncols();
        let penalty = 0.5 * self.inv_c * theta.rows(0, d).norm_squared();
        let loss: f64 = self
            .logits(theta)
            .iter()
            .zip(self.y)
            .map(|(&z, &y)| softplus(z) - f64::from(y) * z)
            .sum();
        penalty + loss
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let d = self.x.ncols();
        let mut g = DVector::zeros(d + 1);
        for ((row, z), &y) in self.x.outer_iter().zip(self.logits(theta)).zip(self.y) {
            let r = sigmoid(z) - f64::from(y);
            for (j, v) in row.iter().enumerate() {
                g[j] += r * v;
            }
            g[d] += r;
        }
        for j in 0..d {
            g[j] += self.inv_c * theta[j];
        }
        g
    }

    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.x.ncols();
        let p = d + 1;
        let mut h = DMatrix::zeros(p, p);
        let mut xi = vec![0.0; p];
        for (row, z) in self.x.outer_iter().zip(self.logits(theta)) {
            let s = sigmoid(z);
            let weight = s * (1.0 - s);
            xi[..d].iter_mut().zip(row.iter()).for_each(|(a, b)| *a = *b);
            xi[d] = 1.0;
            for a in 0..p {
                let wa = weight * xi[a];
                for b in a..p {
                    h[(a, b)] += wa * xi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        for j in 0..d {
            h[(j, j)] += self.inv_c;
        }
        h
    }

    fn newton_direction(&self, h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
        let scale = h.diagonal().amax().max(1e-300);
        let mut ridge = 0.0;
        loop {
            let mut damped = h.clone();
            for a in 0..damped.nrows() {
                damped[(a, a)] += ridge;
            }
            if let Some(chol) = damped.cholesky() {
                return -chol.solve(g);
            }
            ridge = if ridge == 0.0 { scale * 1e-12 } else { ridge * 10.0 };
        }
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fit with full diagnostics.
pub fn fit_logistic(x: ArrayView2<'_, f64>, y: &[u8], options: &RefitOptions) -> Result<LogisticFit> {
    if x.nrows() == 0 {
        return Err(Error::Input("logistic refit needs at least one sample".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            context: "logistic labels",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if !(options.c > 0.0 && options.c.is_finite()) {
        return Err(Error::Input(format!("C must be positive, got {}", options.c)));
    }
    check_labels(y)?;
    let problem = Problem {
        x,
        y,
        inv_c: 1.0 / options.c,
    };

    let mut theta = DVector::zeros(problem.dim());
    let mut f = problem.objective(&theta);
    let mut g = problem.gradient(&theta);
    let mut iterations = 0;
    while inf_norm(&g) > options.gradient_tolerance && iterations < options.max_iterations {
        iterations += 1;
        let direction = problem.newton_direction(problem.hessian(&theta), &g);
        let slope = g.dot(&direction);
        let g_norm = inf_norm(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &theta + &direction * step;
            let f_new = problem.objective(&candidate);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                accepted = Some((candidate, f_new));
                break;
            }
            // Close to the optimum the objective difference drowns in
            // rounding; a full step that shrinks the gradient is still progress.
            if step == 1.0 && f_new.is_finite() {
                let g_new = problem.gradient(&candidate);
                if inf_norm(&g_new) < g_norm {
                    accepted = Some((candidate, f_new));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            break;
        };
        theta = next;
        f = f_next;
        g = problem.gradient(&theta);
        if !f.is_finite() {
            return Err(Error::NonFinite("logistic refit objective".into()));
        }
    }
    let d = x.ncols();
    let gradient_norm = inf_norm(&g);
    Ok(LogisticFit {
        affine: AffineMap {
            w: theta.rows(0, d).iter().copied().collect(),
            b: theta[d],
        },
        objective: f,
        gradient_norm,
        iterations,
        converged: gradient_norm <= options.gradient_tolerance,
    })
}

/// Penalized logistic refit with regularization strength `c`.
pub fn refit_local(x: ArrayView2<'_, f64>, y: &[u8], c: f64) -> Result<AffineMap> {
    let options = RefitOptions {
        c,
        ..RefitOptions::default()
    };
    fit_logistic(x, y, &options).map(|fit| fit.affine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    // Written out independently of the solver's Problem type.
    fn penalized_gradient(x: &Array2<f64>, y: &[u8], c: f64, a: &AffineMap) -> Vec<f64> {
        let d = x.ncols();
        let mut g: Vec<f64> = a.w.iter().map(|w| w / c).chain([0.0]).collect();
        for (i, row) in x.outer_iter().enumerate() {
            let z = a.eval(row);
            let p = 1.0 / (1.0 + (-z).exp());
            let r = p - f64::from(y[i]);
            for j in 0..d {
                g[j] += r * row[j];
            }
            g[d] += r;
        }
        g
    }

    fn objective(x: &Array2<f64>, y: &[u8], c: f64, a: &AffineMap) -> f64 {
        let pen: f64 = a.w.iter().map(|w| w * w).sum::<f64>() / (2.0 * c);
        pen + x
            .outer_iter()
            .zip(y)
            .map(|(row, &l)| {
                let z = a.eval(row);
                (1.0 + z.exp()).ln() - f64::from(l) * z
            })
            .sum::<f64>()
    }

    fn blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let centre = if y[i] == 1 { 3.0 } else { -3.0 };
            centre + 0.5 * rng.sample::<f64, _>(StandardNormal)
        });
        (x, y)
    }

    #[test]
    fn separable_blob_satisfies_kkt() {
        let (x, y) = blobs(200, 1);
        let fit = fit_logistic(x.view(), &y, &RefitOptions::default()).unwrap();
        let g = penalized_gradient(&x, &y, 0.1, &fit.affine);
        let norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(norm <= 1e-8, "gradient {norm}");
        assert!(fit.converged);
    }

    #[test]
    fn separated_one_dimensional_data_stays_finite() {
        let x = array![[-2.0], [-1.0], [1.0], [2.0]];
        let fit = fit_logistic(x.view(), &[0, 0, 1, 1], &RefitOptions { c: 1e4, ..Default::default() }).unwrap();
        assert!(fit.affine.is_finite());
        assert!(fit.affine.w[0] > 0.0);
    }

    #[test]
    fn single_class_gives_negative_finite_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((50, 3), |_| rng.random_range(-1.0..1.0));
        let fit = fit_logistic(x.view(), &[0; 50], &RefitOptions { c: 1e6, ..Default::default() }).unwrap();
        assert!(fit.affine.is_finite());
        assert!(fit.affine.b < -10.0, "{}", fit.affine.b);
        assert!(fit.affine.w.iter().all(|w| w.abs() < 1e-3));
        assert!(fit.converged);
    }

    #[test]
    fn improves_on_trivial_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((300, 4), |_| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = x
            .outer_iter()
            .map(|r| u8::from(r[0] - 0.5 * r[2] + 0.3 * rng.sample::<f64, _>(StandardNormal) > 0.0))
            .collect();
        for c in [0.01, 0.1, 10.0] {
            let fit = refit_local(x.view(), &y, c).unwrap();
            let mean = y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64;
            let trivial = AffineMap {
                w: vec![0.0; 4],
                b: (mean / (1.0 - mean)).ln(),
            };
            assert!(objective(&x, &y, c, &fit) <= objective(&x, &y, c, &trivial));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = array![[1.0]];
        assert!(refit_local(x.view(), &[1], 0.0).is_err());
        assert!(refit_local(x.view(), &[1, 0], 1.0).is_err());
        assert!(refit_local(x.view(), &[3], 1.0).is_err());
    }
}
