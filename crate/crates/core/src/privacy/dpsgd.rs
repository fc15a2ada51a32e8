use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{BatchGradients, ParamBlock};
use crate::rng::standard_normal;
use crate::scalar::Real;

/// One flat gradient vector per sample, as rows of a `batch × params`
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleGradients<T> {
    pub per_sample: Array2<T>,
    pub layout: Vec<ParamBlock>,
}

impl<T: Real> PerSampleGradients<T> {
    pub fn from_rows(rows: Array2<T>) -> Self {
        let len = rows.ncols();
        PerSampleGradients {
            per_sample: rows,
            layout: vec![ParamBlock {
                name: "params".into(),
                offset: 0,
                len,
            }],
        }
    }

    pub fn batch_size(&self) -> usize {
        self.per_sample.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.per_sample.ncols()
    }

    pub fn norms(&self) -> Vec<T> {
        self.per_sample
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .collect()
    }

    /// Mean over samples.
    pub fn mean(&self) -> Array1<T> {
        self.per_sample
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(self.num_params()))
    }
}

/// Per-sample scale factors `1 / max(1, ‖g‖/C)` from squared norms.
pub fn clip_factors<T: Real>(sq_norms: &[T], clip: T) -> Vec<T> {
    sq_norms
        .iter()
        .map(|&sq| {
            let norm = sq.max(T::zero()).sqrt();
            if norm > clip {
                clip / norm
            } else {
                T::one()
            }
        })
        .collect()
}

/// Rescales every per-sample gradient with norm above `clip` onto the
/// radius-`clip` sphere; gradients already inside are left untouched.
pub fn clip_per_sample<T: Real>(grads: &PerSampleGradients<T>, clip: T) -> Result<PerSampleGradients<T>> {
    if !(clip > T::zero()) {
        return Err(Error::InvalidArgument("clip norm must be positive".into()));
    }
    if grads.per_sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("per-sample gradient".into()));
    }
    let mut out = grads.clone();
    for mut row in out.per_sample.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm <= clip {
            continue;
        }
        let mut scale = clip / norm;
        row.mapv_inplace(|v| v * scale);
        // rounding can leave the norm a few ulps above the bound
        while row.dot(&row).sqrt() > clip {
            let shrink = T::one() - T::epsilon();
            row.mapv_inplace(|v| v * shrink);
            scale = scale * shrink;
        }
        debug_assert!(scale <= T::one());
    }
    Ok(out)
}

/// `n` draws of N(0, std²).
pub fn gaussian_noise<T: Real, R: Rng + ?Sized>(n: usize, std: T, rng: &mut R) -> Array1<T> {
    Array1::from_shape_simple_fn(n, || standard_normal::<T, _>(rng) * std)
}

/// `(Σ_i g_i + N(0, C²σ²I)) / B` for already-clipped gradients.
pub fn privatize_batch_gradient<T: Real, R: Rng + ?Sized>(
    clipped: &PerSampleGradients<T>,
    clip: T,
    sigma: T,
    rng: &mut R,
) -> Result<Array1<T>> {
    let batch = clipped.batch_size();
    if batch == 0 {
        return Err(Error::Empty("cannot privatize an empty batch".into()));
    }
    let sum = clipped.per_sample.sum_axis(Axis(0));
    let noise = gaussian_noise(sum.len(), clip * sigma, rng);
    Ok((sum + noise) / T::lit(batch as f64))
}

/// Clip-sum-noise straight from factored batch gradients. Equal to
/// `privatize_batch_gradient(clip_per_sample(per_sample()))` up to
/// rounding, and draws the same noise from `rng`.
pub fn privatize_factored<T: Real, R: Rng + ?Sized>(
    grads: &BatchGradients<T>,
    clip: T,
    sigma: T,
    rng: &mut R,
) -> Result<Array1<T>> {
    let batch = grads.samples();
    if batch == 0 {
        return Err(Error::Empty("cannot privatize an empty batch".into()));
    }
    let sq = grads.sq_norms();
    if sq.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("per-sample gradient norm".into()));
    }
    let factors = clip_factors(&sq, clip);
    let sum = grads.weighted_sum(&factors);
    let noise = gaussian_noise(sum.len(), clip * sigma, rng);
    Ok((sum + noise) / T::lit(batch as f64))
}

/// Poisson batch: each of `m` indices is kept independently with
/// probability `q`. May be empty.
pub fn poisson_sample<R: Rng + ?Sized>(m: usize, q: f64, rng: &mut R) -> Vec<usize> {
    (0..m).filter(|_| rng.random::<f64>() < q).collect()
}
