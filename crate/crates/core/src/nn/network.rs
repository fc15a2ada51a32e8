use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::standard_normal;
use crate::scalar::Real;

use super::grads::{BatchGradients, GradFactor, ParamBlock};
use super::layer::{LayerSpec, GROUP_NORM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Train,
    Eval,
}

/// An ordered stack of layers over one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real> {
    layers: Vec<LayerSpec>,
    params: Array1<T>,
    offsets: Vec<usize>,
    mode: Mode,
}

/// Activations recorded by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    rows: usize,
    layers: Vec<LayerCache<T>>,
}

#[derive(Debug, Clone)]
enum LayerCache<T> {
    Dense {
        input: Array2<T>,
    },
    Relu {
        input: Array2<T>,
    },
    LeakyRelu {
        input: Array2<T>,
    },
    Sigmoid {
        output: Array2<T>,
    },
    GroupNorm(NormCache<T>),
    Dropout {
        mask: Option<Array2<T>>,
    },
    Residual {
        input: Array2<T>,
        norm: NormCache<T>,
        activated: Array2<T>,
    },
}

#[derive(Debug, Clone)]
struct NormCache<T> {
    xhat: Array2<T>,
    inv_std: Array2<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

impl<T: Real> Network<T> {
    /// A network with all parameters zero; see [`Network::initialize`].
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for l in &layers {
            l.validate()?;
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        Ok(Network {
            layers,
            params: Array1::zeros(total),
            offsets,
            mode: Mode::Train,
        })
    }

    /// Rebuilds a network from serialized layer specs and parameters.
    pub fn from_parts(layers: Vec<LayerSpec>, params: Vec<T>) -> Result<Self> {
        let mut net = Self::new(layers)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters supplied, layers need {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = Array1::from(params);
        Ok(net)
    }

    /// Dense weights ~ N(0, 2/(fan_in + fan_out)), biases 0, GroupNorm
    /// scale 1 and shift 0.
    pub fn initialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut params = std::mem::take(&mut self.params);
        for (layer, &off) in self.layers.iter().zip(&self.offsets) {
            let block = &mut params.as_slice_mut().unwrap()[off..off + layer.param_count()];
            match *layer {
                LayerSpec::Dense { in_dim, out_dim } => {
                    init_dense(&mut block[..], in_dim, out_dim, rng);
                }
                LayerSpec::GroupNorm { channels, .. } => {
                    block[..channels].fill(T::one());
                    block[channels..].fill(T::zero());
                }
                LayerSpec::ResidualConcat { in_dim, width, .. } => {
                    let dense = width * in_dim + width;
                    init_dense(&mut block[..dense], in_dim, width, rng);
                    block[dense..dense + width].fill(T::one());
                    block[dense + width..].fill(T::zero());
                }
                _ => {}
            }
        }
        self.params = params;
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &Array1<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Array1<T> {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Named contiguous parameter blocks, in storage order.
    pub fn layout(&self) -> Vec<ParamBlock> {
        let mut blocks = Vec::new();
        for (i, (layer, &off)) in self.layers.iter().zip(&self.offsets).enumerate() {
            let mut push = |name: &str, offset: usize, len: usize| {
                blocks.push(ParamBlock {
                    name: format!("layer{i}.{name}"),
                    offset,
                    len,
                })
            };
            match *layer {
                LayerSpec::Dense { in_dim, out_dim } => {
                    push("weight", off, out_dim * in_dim);
                    push("bias", off + out_dim * in_dim, out_dim);
                }
                LayerSpec::GroupNorm { channels, .. } => {
                    push("gamma", off, channels);
                    push("beta", off + channels, channels);
                }
                LayerSpec::ResidualConcat { in_dim, width, .. } => {
                    let w = width * in_dim;
                    push("weight", off, w);
                    push("bias", off + w, width);
                    push("gamma", off + w + width, width);
                    push("beta", off + w + 2 * width, width);
                }
                _ => {}
            }
        }
        blocks
    }

    /// Clamps every parameter into `[-bound, bound]`.
    pub fn clamp_params(&mut self, bound: T) {
        self.params.mapv_inplace(|p| p.max(-bound).min(bound));
    }

    fn slice(&self, offset: usize, len: usize) -> ArrayView1<'_, T> {
        self.params.slice(s![offset..offset + len])
    }

    fn dense_view(&self, offset: usize, in_dim: usize, out_dim: usize) -> (ArrayView2<'_, T>, ArrayView1<'_, T>) {
        let w = self
            .slice(offset, out_dim * in_dim)
            .into_shape_with_order((out_dim, in_dim))
            .expect("contiguous weight block");
        let b = self.slice(offset + out_dim * in_dim, out_dim);
        (w, b)
    }

    /// Runs the batch through every layer. Dropout masks are drawn from
    /// `rng` in train mode only, so eval-mode passes consume no randomness.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<'_, T>,
        rng: &mut R,
    ) -> Result<(Array2<T>, ForwardCache<T>)> {
        if batch.ncols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "batch width {} does not match network input {}",
                batch.ncols(),
                self.in_dim()
            )));
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input contains non-finite entries".into()));
        }
        let rows = batch.nrows();
        let mut x = batch.to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (layer, &off) in self.layers.iter().zip(&self.offsets) {
            let (y, cache) = match *layer {
                LayerSpec::Dense { in_dim, out_dim } => {
                    let (w, b) = self.dense_view(off, in_dim, out_dim);
                    let y = x.dot(&w.t()) + &b;
                    (y, LayerCache::Dense { input: x })
                }
                LayerSpec::Relu { .. } => {
                    let y = x.mapv(|v| v.max(T::zero()));
                    (y, LayerCache::Relu { input: x })
                }
                LayerSpec::LeakyRelu { slope, .. } => {
                    let slope = T::lit(slope);
                    let y = x.mapv(|v| if v > T::zero() { v } else { v * slope });
                    (y, LayerCache::LeakyRelu { input: x })
                }
                LayerSpec::Sigmoid { .. } => {
                    let y = x.mapv(sigmoid);
                    (y.clone(), LayerCache::Sigmoid { output: y })
                }
                LayerSpec::GroupNorm { channels, groups } => {
                    let gamma = self.slice(off, channels);
                    let beta = self.slice(off + channels, channels);
                    let norm = group_norm(&x, groups);
                    let y = &norm.xhat * &gamma + &beta;
                    (y, LayerCache::GroupNorm(norm))
                }
                LayerSpec::Dropout { rate, .. } => {
                    if self.mode == Mode::Train && rate > 0.0 {
                        let keep = T::lit(1.0 / (1.0 - rate));
                        let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
                            if rng.random::<f64>() < rate {
                                T::zero()
                            } else {
                                keep
                            }
                        });
                        let y = &x * &mask;
                        (y, LayerCache::Dropout { mask: Some(mask) })
                    } else {
                        (x, LayerCache::Dropout { mask: None })
                    }
                }
                LayerSpec::ResidualConcat {
                    in_dim,
                    width,
                    groups,
                } => {
                    let (w, b) = self.dense_view(off, in_dim, width);
                    let gn_off = off + width * in_dim + width;
                    let gamma = self.slice(gn_off, width);
                    let beta = self.slice(gn_off + width, width);
                    let h = x.dot(&w.t()) + &b;
                    let norm = group_norm(&h, groups);
                    let activated = &norm.xhat * &gamma + &beta;
                    let out = activated.mapv(|v| v.max(T::zero()));
                    let y = ndarray::concatenate(Axis(1), &[out.view(), x.view()])
                        .expect("matching row counts");
                    (
                        y,
                        LayerCache::Residual {
                            input: x,
                            norm,
                            activated,
                        },
                    )
                }
            };
            caches.push(cache);
            x = y;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output diverged".into()));
        }
        Ok((
            x,
            ForwardCache {
                rows,
                layers: caches,
            },
        ))
    }

    /// Forward pass without keeping the cache.
    pub fn predict<R: Rng + ?Sized>(&self, batch: ArrayView2<'_, T>, rng: &mut R) -> Result<Array2<T>> {
        self.forward(batch, rng).map(|(y, _)| y)
    }

    /// Backpropagates `loss_grads` (∂loss/∂output, one row per batch row)
    /// and returns factored parameter gradients plus ∂loss/∂input.
    ///
    /// Row `r` is attributed to sample `r % samples`; `samples` must divide
    /// the row count. Use `samples == rows` for one sample per row.
    pub fn backward(
        &self,
        cache: ForwardCache<T>,
        loss_grads: ArrayView2<'_, T>,
        samples: usize,
    ) -> Result<(BatchGradients<T>, Array2<T>)> {
        let rows = cache.rows;
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Shape("cache was produced by a different network".into()));
        }
        if loss_grads.dim() != (rows, self.out_dim()) {
            return Err(Error::Shape(format!(
                "loss gradient is {:?}, expected ({rows}, {})",
                loss_grads.dim(),
                self.out_dim()
            )));
        }
        if samples == 0 || rows % samples != 0 {
            return Err(Error::Shape(format!("{samples} samples do not divide {rows} rows")));
        }

        let mut factors = Vec::new();
        let mut grad = loss_grads.to_owned();
        for ((layer, &off), cache) in self.layers.iter().zip(&self.offsets).zip(cache.layers).rev() {
            grad = match (layer, cache) {
                (&LayerSpec::Dense { in_dim, out_dim }, LayerCache::Dense { input }) => {
                    let (w, _) = self.dense_view(off, in_dim, out_dim);
                    let dx = grad.dot(&w);
                    factors.push(GradFactor::Rows {
                        offset: off + out_dim * in_dim,
                        rows: grad.clone(),
                    });
                    factors.push(GradFactor::Outer {
                        offset: off,
                        acts: input,
                        deltas: grad,
                    });
                    dx
                }
                (LayerSpec::Relu { .. }, LayerCache::Relu { input }) => {
                    ndarray::Zip::from(&mut grad)
                        .and(&input)
                        .for_each(|g, &x| if x <= T::zero() { *g = T::zero() });
                    grad
                }
                (&LayerSpec::LeakyRelu { slope, .. }, LayerCache::LeakyRelu { input }) => {
                    let slope = T::lit(slope);
                    ndarray::Zip::from(&mut grad)
                        .and(&input)
                        .for_each(|g, &x| if x <= T::zero() { *g = *g * slope });
                    grad
                }
                (LayerSpec::Sigmoid { .. }, LayerCache::Sigmoid { output }) => {
                    ndarray::Zip::from(&mut grad)
                        .and(&output)
                        .for_each(|g, &y| *g = *g * y * (T::one() - y));
                    grad
                }
                (&LayerSpec::GroupNorm { channels, groups }, LayerCache::GroupNorm(norm)) => {
                    let gamma = self.slice(off, channels);
                    factors.push(GradFactor::Rows {
                        offset: off + channels,
                        rows: grad.clone(),
                    });
                    factors.push(GradFactor::Rows {
                        offset: off,
                        rows: &grad * &norm.xhat,
                    });
                    group_norm_backward(&grad, &norm, gamma, groups)
                }
                (LayerSpec::Dropout { .. }, LayerCache::Dropout { mask }) => match mask {
                    Some(mask) => grad * &mask,
                    None => grad,
                },
                (
                    &LayerSpec::ResidualConcat {
                        in_dim,
                        width,
                        groups,
                    },
                    LayerCache::Residual {
                        input,
                        norm,
                        activated,
                    },
                ) => {
                    let mut d_out = grad.slice(s![.., ..width]).to_owned();
                    let d_skip = grad.slice(s![.., width..]);
                    ndarray::Zip::from(&mut d_out)
                        .and(&activated)
                        .for_each(|g, &a| if a <= T::zero() { *g = T::zero() });
                    let gn_off = off + width * in_dim + width;
                    let gamma = self.slice(gn_off, width);
                    factors.push(GradFactor::Rows {
                        offset: gn_off + width,
                        rows: d_out.clone(),
                    });
                    factors.push(GradFactor::Rows {
                        offset: gn_off,
                        rows: &d_out * &norm.xhat,
                    });
                    let d_h = group_norm_backward(&d_out, &norm, gamma, groups);
                    let (w, _) = self.dense_view(off, in_dim, width);
                    let dx = d_h.dot(&w) + &d_skip;
                    factors.push(GradFactor::Rows {
                        offset: off + width * in_dim,
                        rows: d_h.clone(),
                    });
                    factors.push(GradFactor::Outer {
                        offset: off,
                        acts: input,
                        deltas: d_h,
                    });
                    dx
                }
                _ => return Err(Error::Shape("cache does not match layer kinds".into())),
            };
        }
        factors.reverse();
        Ok((
            BatchGradients::new(factors, samples, rows, self.param_count(), self.layout()),
            grad,
        ))
    }

    /// Convenience: backward with one sample per row, materialized.
    pub fn backward_per_sample(
        &self,
        cache: ForwardCache<T>,
        loss_grads: ArrayView2<'_, T>,
    ) -> Result<crate::privacy::PerSampleGradients<T>> {
        let rows = cache.rows;
        let (grads, _) = self.backward(cache, loss_grads, rows)?;
        Ok(grads.per_sample())
    }
}

fn init_dense<T: Real, R: Rng + ?Sized>(block: &mut [T], in_dim: usize, out_dim: usize, rng: &mut R) {
    let std = (2.0 / (in_dim + out_dim) as f64).sqrt();
    let (w, b) = block.split_at_mut(out_dim * in_dim);
    for v in w {
        *v = standard_normal::<T, _>(rng) * T::lit(std);
    }
    b.fill(T::zero());
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn group_norm<T: Real>(x: &Array2<T>, groups: usize) -> NormCache<T> {
    let (rows, channels) = x.dim();
    let per = channels / groups;
    let n = T::lit(per as f64);
    let eps = T::lit(GROUP_NORM_EPS);
    let x = x.as_standard_layout();
    let src = x.as_slice().expect("standard layout");
    let mut xhat = vec![T::zero(); rows * channels];
    let mut inv_std = vec![T::zero(); rows * groups];
    for ((seg, out), inv_slot) in src.chunks_exact(per).zip(xhat.chunks_exact_mut(per)).zip(&mut inv_std) {
        let mean = seg.iter().fold(T::zero(), |a, &v| a + v) / n;
        let var = seg.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
        let inv = T::one() / (var + eps).sqrt();
        *inv_slot = inv;
        for (o, &v) in out.iter_mut().zip(seg) {
            *o = (v - mean) * inv;
        }
    }
    NormCache {
        xhat: Array2::from_shape_vec((rows, channels), xhat).expect("sized"),
        inv_std: Array2::from_shape_vec((rows, groups), inv_std).expect("sized"),
    }
}

fn group_norm_backward<T: Real>(
    dy: &Array2<T>,
    norm: &NormCache<T>,
    gamma: ArrayView1<'_, T>,
    groups: usize,
) -> Array2<T> {
    let (rows, channels) = dy.dim();
    let per = channels / groups;
    let n = T::lit(per as f64);
    let gamma = gamma.to_vec();
    let dy = dy.as_standard_layout();
    let dy = dy.as_slice().expect("standard layout");
    let xhat = norm.xhat.as_slice().expect("standard layout");
    let inv_std = norm.inv_std.as_slice().expect("standard layout");
    let mut dx = vec![T::zero(); rows * channels];
    let mut scaled = vec![T::zero(); per];
    for (i, ((d_seg, x_seg), out)) in dy
        .chunks_exact(per)
        .zip(xhat.chunks_exact(per))
        .zip(dx.chunks_exact_mut(per))
        .enumerate()
    {
        let g = i % groups;
        let gam = &gamma[g * per..(g + 1) * per];
        let mut sum_d = T::zero();
        let mut sum_dx = T::zero();
        for (((s, &d), &gm), &xh) in scaled.iter_mut().zip(d_seg).zip(gam).zip(x_seg) {
            *s = d * gm;
            sum_d = sum_d + *s;
            sum_dx = sum_dx + *s * xh;
        }
        let (mean_d, mean_dx) = (sum_d / n, sum_dx / n);
        let inv = inv_std[i];
        for ((o, &s), &xh) in out.iter_mut().zip(&scaled).zip(x_seg) {
            *o = inv * (s - mean_d - xh * mean_dx);
        }
    }
    Array2::from_shape_vec((rows, channels), dx).expect("sized")
}
