use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-6;
const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
/// Relative deviance change treated as convergence, as in standard GLM
/// fitting. Near-separable data never meets the gradient test.
const DEVIANCE_TOL: f64 = 1e-10;

/// A fitted ridge logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first, then one weight per feature.
    pub weights: Array1<f64>,
    /// `P(label = 1 | row)` for each training row.
    pub probabilities: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Ridge-penalized logistic regression by Newton / IRLS with step halving.
/// The intercept is not penalized. Stops when the gradient norm of the
/// penalized log-likelihood drops below 1e-8 or after 100 iterations.
pub fn fit_logistic(features: ArrayView2<'_, f64>, labels: &[f64], ridge: f64) -> Result<LogisticFit> {
    let (rows, cols) = features.dim();
    if labels.len() != rows {
        return Err(Error::Shape(format!("{} labels for {rows} rows", labels.len())));
    }
    if rows < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1.0).count();
    if positives == 0 || positives == rows {
        return Err(Error::InvalidArgument("both labels must be present".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument("ridge must be non-negative".into()));
    }

    let d = cols + 1;
    let mut x = Array2::<f64>::ones((rows, d));
    x.slice_mut(ndarray::s![.., 1..]).assign(&features);
    let y = Array1::from(labels.to_vec());
    let mut penalty = Array1::from_elem(d, ridge);
    penalty[0] = 0.0;

    let mut w = Array1::<f64>::zeros(d);
    let mut objective = penalized_loglik(&x, &y, &w, &penalty);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_ITER {
        let p = probabilities(&x, &w);
        let grad = x.t().dot(&(&y - &p)) - &penalty * &w;
        if grad.dot(&grad).sqrt() < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let weights = p.mapv(|v| v * (1.0 - v));
        let weighted = &x * &weights.view().insert_axis(Axis(1));
        let mut hessian = x.t().dot(&weighted);
        for i in 0..d {
            hessian[[i, i]] += penalty[i];
        }
        let step = cholesky_solve(&hessian, &grad)?;
        let mut scale = 1.0;
        loop {
            let candidate = &w + &(&step * scale);
            let value = penalized_loglik(&x, &y, &candidate, &penalty);
            if value >= objective || scale < 1e-10 {
                w = candidate;
                let change = (value - objective).abs() / (value.abs() + 0.1);
                objective = value;
                converged = change < DEVIANCE_TOL;
                break;
            }
            scale *= 0.5;
        }
        if converged {
            break;
        }
    }
    if !converged {
        let p = probabilities(&x, &w);
        let grad = x.t().dot(&(&y - &p)) - &penalty * &w;
        converged = grad.dot(&grad).sqrt() < GRAD_TOL;
    }
    Ok(LogisticFit {
        probabilities: probabilities(&x, &w),
        weights: w,
        iterations,
        converged,
    })
}

fn probabilities(x: &Array2<f64>, w: &Array1<f64>) -> Array1<f64> {
    x.dot(w).mapv(sigmoid)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn penalized_loglik(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>, penalty: &Array1<f64>) -> f64 {
    let z = x.dot(w);
    let ll: f64 = z.iter().zip(y).map(|(&zi, &yi)| yi * zi - softplus(zi)).sum();
    ll - 0.5 * (penalty * &w.mapv(|v| v * v)).sum()
}

/// Solves `A v = b` for symmetric positive definite `A`.
fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Numerical(
                        "logistic Hessian is singular after regularization".into(),
                    ));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let mut z = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    let mut v = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[[k, i]] * v[k];
        }
        v[i] = s / l[[i, i]];
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_matrix, seeded};
    use ndarray::{array, Array2};

    #[test]
    fn null_case_averages_to_prevalence() {
        let x: Array2<f64> = normal_matrix(1000, 3, &mut seeded(1));
        let labels: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
        let fit = fit_logistic(x.view(), &labels, DEFAULT_RIDGE).unwrap();
        assert!(fit.converged);
        assert!((fit.probabilities.mean().unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn separable_data_is_pushed_to_the_edges() {
        let x = array![[-2.0], [-1.5], [-1.0], [-0.5], [0.5], [1.0], [1.5], [2.0]];
        let labels = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let fit = fit_logistic(x.view(), &labels, 1e-6).unwrap();
        for i in 4..8 {
            assert!(fit.probabilities[i] >= 0.99);
        }
    }

    #[test]
    fn huge_ridge_returns_prevalence() {
        let x: Array2<f64> = normal_matrix(200, 2, &mut seeded(2)) + 3.0;
        let labels: Vec<f64> = (0..200).map(|i| if i < 50 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(x.view(), &labels, 1e12).unwrap();
        assert!(fit.weights.iter().skip(1).all(|w| w.abs() < 1e-6));
        assert!(fit.probabilities.iter().all(|p| (p - 0.25).abs() < 1e-4));
    }

    #[test]
    fn first_order_conditions_hold() {
        let x: Array2<f64> = normal_matrix(300, 4, &mut seeded(3));
        let labels: Vec<f64> = x.rows().into_iter().map(|r| if r[0] + 0.5 * r[1] > 0.2 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(x.view(), &labels, 1e-2).unwrap();
        assert!(fit.converged);
        // intercept score equation: Σ(y − p) = 0
        let resid: f64 = labels.iter().zip(&fit.probabilities).map(|(y, p)| y - p).sum();
        assert!(resid.abs() < 1e-7);
    }

    #[test]
    fn rejects_single_class_and_bad_shapes() {
        let x = array![[1.0], [2.0]];
        assert!(fit_logistic(x.view(), &[1.0, 1.0], 1e-6).is_err());
        assert!(fit_logistic(x.view(), &[1.0], 1e-6).is_err());
        assert!(fit_logistic(x.view(), &[1.0, 0.5], 1e-6).is_err());
    }
}
