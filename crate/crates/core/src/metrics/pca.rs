use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 64;
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and eigenvectors as columns.
pub fn jacobi_eigen(matrix: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Shape("eigen-decomposition needs a square matrix".into()));
    }
    let mut a = matrix.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = v.select(Axis(1), &order);
    Ok((values, vectors))
}

/// Two-component projection of both datasets on the real basis, binned
/// over the real bounding box. Grid cell `[i, j]` counts points whose first
/// component falls in bin `i` and second in bin `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub bins: usize,
    pub mean: Vec<f64>,
    /// Top two eigenvalues of the real covariance.
    pub eigenvalues: [f64; 2],
    /// Top two eigenvectors, each with its largest-magnitude entry positive.
    pub components: [Vec<f64>; 2],
    /// `[min₁, max₁, min₂, max₂]` of the projected real rows.
    pub bounds: [f64; 4],
    #[serde(skip)]
    pub real_grid: Array2<u64>,
    #[serde(skip)]
    pub other_grid: Array2<u64>,
}

pub fn pca_projection_histogram(
    real: ArrayView2<'_, f64>,
    other: ArrayView2<'_, f64>,
    bins: usize,
) -> Result<PcaProjection> {
    let (rows, width) = real.dim();
    if other.ncols() != width {
        return Err(Error::Shape(format!("widths differ: {width} vs {}", other.ncols())));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    if rows < 2 {
        return Err(Error::Degenerate("projection needs at least two real rows".into()));
    }
    let mean = real.mean_axis(Axis(0)).expect("non-empty");
    let centered = &real - &mean;
    let cov = centered.t().dot(&centered) / (rows - 1) as f64;
    let (values, vectors) = jacobi_eigen(cov.view())?;
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if !(values[0] > 1e-12 * total.max(1.0)) {
        return Err(Error::Degenerate("real data has zero variance".into()));
    }
    let mut components: [Vec<f64>; 2] = [vec![0.0; width], vec![0.0; width]];
    let mut eigenvalues = [0.0; 2];
    for c in 0..2.min(width) {
        let mut col = vectors.column(c).to_vec();
        let lead = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        components[c] = col;
        eigenvalues[c] = values[c].max(0.0);
    }
    let basis = Array2::from_shape_fn((width, 2), |(i, c)| components[c][i]);
    let real_proj = centered.dot(&basis);
    let other_proj = (&other - &mean).dot(&basis);
    let bounds = [
        real_proj.column(0).fold(f64::INFINITY, |m, &x| m.min(x)),
        real_proj.column(0).fold(f64::NEG_INFINITY, |m, &x| m.max(x)),
        real_proj.column(1).fold(f64::INFINITY, |m, &x| m.min(x)),
        real_proj.column(1).fold(f64::NEG_INFINITY, |m, &x| m.max(x)),
    ];
    Ok(PcaProjection {
        bins,
        mean: mean.to_vec(),
        eigenvalues,
        components,
        bounds,
        real_grid: histogram(&real_proj, &bounds, bins),
        other_grid: histogram(&other_proj, &bounds, bins),
    })
}

fn bin_of(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if !(hi > lo) {
        return 0;
    }
    let u = ((x - lo) / (hi - lo) * bins as f64).floor();
    if u.is_nan() {
        0
    } else {
        u.clamp(0.0, (bins - 1) as f64) as usize
    }
}

fn histogram(points: &Array2<f64>, bounds: &[f64; 4], bins: usize) -> Array2<u64> {
    let mut grid = Array2::<u64>::zeros((bins, bins));
    for p in points.rows() {
        let i = bin_of(p[0], bounds[0], bounds[1], bins);
        let j = bin_of(p[1], bounds[2], bounds[3], bins);
        grid[[i, j]] += 1;
    }
    grid
}

impl PcaProjection {
    /// `row,col,real_count,other_count` for every cell.
    pub fn grid_csv(&self) -> String {
        let mut out = String::from("row,col,real_count,other_count\n");
        for i in 0..self.bins {
            for j in 0..self.bins {
                let _ = writeln!(out, "{i},{j},{},{}", self.real_grid[[i, j]], self.other_grid[[i, j]]);
            }
        }
        out
    }

    /// Eigen-basis, mean and bounds as JSON.
    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
