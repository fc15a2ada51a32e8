use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::privacy::PerSampleGradients;
use crate::scalar::Real;

/// A named contiguous slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Per-row gradient contributions for one parameter block.
#[derive(Debug, Clone)]
pub(crate) enum GradFactor<T> {
    /// Dense weight block (row-major `out × in`): row `r` contributes
    /// `deltas[r] ⊗ acts[r]`.
    Outer {
        offset: usize,
        acts: Array2<T>,
        deltas: Array2<T>,
    },
    /// Vector block (bias, scale, shift): row `r` contributes `rows[r]`.
    Rows { offset: usize, rows: Array2<T> },
}

/// Gradients of a batch kept in factored per-row form.
///
/// Row `r` belongs to sample `r % samples`. Everything DP-SGD needs
/// (materialized per-sample vectors, per-sample norms, clipped sums) is
/// computed from the factors without changing the result.
#[derive(Debug, Clone)]
pub struct BatchGradients<T> {
    factors: Vec<GradFactor<T>>,
    samples: usize,
    rows: usize,
    num_params: usize,
    layout: Vec<ParamBlock>,
}

impl<T: Real> BatchGradients<T> {
    pub(crate) fn new(
        factors: Vec<GradFactor<T>>,
        samples: usize,
        rows: usize,
        num_params: usize,
        layout: Vec<ParamBlock>,
    ) -> Self {
        BatchGradients {
            factors,
            samples,
            rows,
            num_params,
            layout,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    fn rows_of<'a>(&self, m: &'a Array2<T>, sample: usize) -> ArrayView2<'a, T> {
        m.slice(s![sample..self.rows;self.samples, ..])
    }

    /// One flat gradient vector per sample (a `samples × params` matrix).
    pub fn per_sample(&self) -> PerSampleGradients<T> {
        let mut out = Array2::<T>::zeros((self.samples, self.num_params));
        for factor in &self.factors {
            match factor {
                GradFactor::Outer {
                    offset,
                    acts,
                    deltas,
                } => {
                    let len = acts.ncols() * deltas.ncols();
                    for s in 0..self.samples {
                        let block = self.rows_of(deltas, s).t().dot(&self.rows_of(acts, s));
                        let mut dst = out.slice_mut(s![s, *offset..offset + len]);
                        dst.assign(&Array1::from_iter(block.iter().copied()));
                    }
                }
                GradFactor::Rows { offset, rows } => {
                    let len = rows.ncols();
                    for s in 0..self.samples {
                        let sum = self.rows_of(rows, s).sum_axis(Axis(0));
                        out.slice_mut(s![s, *offset..offset + len]).assign(&sum);
                    }
                }
            }
        }
        PerSampleGradients {
            per_sample: out,
            layout: self.layout.clone(),
        }
    }

    /// Squared L2 norm of each sample's full gradient vector.
    ///
    /// For a weight block, `‖Σ_r d_r a_rᵀ‖_F² = Σ_{r,r'} (a_r·a_r')(d_r·d_r')`
    /// over the sample's rows, so the per-sample matrices are never formed.
    pub fn sq_norms(&self) -> Vec<T> {
        let mut norms = vec![T::zero(); self.samples];
        for factor in &self.factors {
            match factor {
                GradFactor::Outer { acts, deltas, .. } => {
                    for (s, norm) in norms.iter_mut().enumerate() {
                        let a = self.rows_of(acts, s);
                        let d = self.rows_of(deltas, s);
                        let ga = a.dot(&a.t());
                        let gd = d.dot(&d.t());
                        *norm = *norm + (&ga * &gd).sum();
                    }
                }
                GradFactor::Rows { rows, .. } => {
                    for (s, norm) in norms.iter_mut().enumerate() {
                        let sum = self.rows_of(rows, s).sum_axis(Axis(0));
                        *norm = *norm + sum.dot(&sum);
                    }
                }
            }
        }
        norms
    }

    /// `Σ_s weights[s] · g_s` as one flat vector.
    pub fn weighted_sum(&self, weights: &[T]) -> Array1<T> {
        assert_eq!(weights.len(), self.samples, "one weight per sample");
        let row_weights = Array1::from_shape_fn(self.rows, |r| weights[r % self.samples]);
        let col = row_weights.view().insert_axis(Axis(1));
        let mut out = Array1::<T>::zeros(self.num_params);
        for factor in &self.factors {
            match factor {
                GradFactor::Outer {
                    offset,
                    acts,
                    deltas,
                } => {
                    let scaled = deltas * &col;
                    let block = scaled.t().dot(acts);
                    let len = block.len();
                    out.slice_mut(s![*offset..offset + len])
                        .assign(&Array1::from_iter(block.iter().copied()));
                }
                GradFactor::Rows { offset, rows } => {
                    let sum = row_weights.dot(rows);
                    let len = sum.len();
                    out.slice_mut(s![*offset..offset + len]).assign(&sum);
                }
            }
        }
        out
    }

    /// Plain sum over samples.
    pub fn sum(&self) -> Array1<T> {
        self.weighted_sum(&vec![T::one(); self.samples])
    }
}
