// SPDX-License-Identifier: Apache-2.0

//! Congestion model over the route graph.
//!
//! All learnable tensors live in one flat `Vec<f64>` addressed through a
//! [`Layout`]; gradients use the same layout, which keeps the optimizer and
//! the checkpoint format trivial.

mod checkpoint;
mod tape;


use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::Grid2;
use crate::routegraph::{FeatureStats, RouteGraph, F_RAW_C, F_RAW_EG, F_RAW_ET, F_RAW_U, F_RAW_V};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use tape::{Activations, Gradients};

/// Hidden sizes and depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub v: usize,
    pub u: usize,
    pub c: usize,
    pub et: usize,
    pub eg: usize,
    /// Reserved; geom-edges carry no features.
    pub egeom: usize,
    pub layers: usize,
    pub readout: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            v: 32,
            u: 64,
            c: 16,
            et: 8,
            eg: 4,
            egeom: 4,
            layers: 2,
            readout: 32,
        }
    }
}

impl Dims {
    pub fn to_array(&self) -> [usize; 8] {
        [self.v, self.u, self.c, self.et, self.eg, self.egeom, self.layers, self.readout]
    }

    pub fn from_array(a: [usize; 8]) -> Self {
        Self {
            v: a[0],
            u: a[1],
            c: a[2],
            et: a[3],
            eg: a[4],
            egeom: a[5],
            layers: a[6],
            readout: a[7],
        }
    }
}

/// A row-major `rows × cols` block of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatBlock {
    pub off: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VecBlock {
    pub off: usize,
    pub len: usize,
}

/// `tanh(x·W1 + b1)·W2 + b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mlp {
    pub w1: MatBlock,
    pub b1: VecBlock,
    pub w2: MatBlock,
    pub b2: VecBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerBlocks {
    pub et_u: MatBlock,
    pub v_u: MatBlock,
    pub u_v: MatBlock,
    pub v_c: MatBlock,
    pub c_c: MatBlock,
    pub c_v: MatBlock,
    pub alpha: VecBlock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub enc_v: Mlp,
    pub enc_u: Mlp,
    pub enc_c: Mlp,
    pub enc_et: Mlp,
    pub enc_eg: Mlp,
    pub layers: Vec<LayerBlocks>,
    /// Input is `[H_V, X_V]`, output one scalar before the softplus.
    pub readout: Mlp,
    pub total: usize,
}

struct Alloc {
    at: usize,
    mats: Vec<MatBlock>,
    vecs: Vec<(VecBlock, usize)>,
}

impl Alloc {
    fn mat(&mut self, rows: usize, cols: usize) -> MatBlock {
        let b = MatBlock {
            off: self.at,
            rows,
            cols,
        };
        self.at += rows * cols;
        self.mats.push(b);
        b
    }

    fn bias(&mut self, len: usize) -> VecBlock {
        let b = VecBlock { off: self.at, len };
        self.at += len;
        b
    }

    fn mlp(&mut self, i: usize, h: usize, o: usize) -> Mlp {
        Mlp {
            w1: self.mat(i, h),
            b1: self.bias(h),
            w2: self.mat(h, o),
            b2: self.bias(o),
        }
    }
}

impl Layout {
    pub fn new(d: &Dims) -> Self {
        Self::with_blocks(d).0
    }

    fn with_blocks(d: &Dims) -> (Self, Alloc) {
        let mut a = Alloc {
            at: 0,
            mats: vec![],
            vecs: vec![],
        };
        let enc_v = a.mlp(F_RAW_V, d.v, d.v);
        let enc_u = a.mlp(F_RAW_U, d.u, d.u);
        let enc_c = a.mlp(F_RAW_C, d.c, d.c);
        let enc_et = a.mlp(F_RAW_ET, d.et, d.et);
        let enc_eg = a.mlp(F_RAW_EG, d.eg, d.eg);
        let layers = (0..d.layers)
            .map(|_| {
                let et_u = a.mat(d.et, d.u);
                let v_u = a.mat(d.v, d.u);
                let u_v = a.mat(d.u, d.v);
                let v_c = a.mat(d.v, d.c);
                let c_c = a.mat(d.c, d.c);
                let c_v = a.mat(d.c, d.v);
                let alpha = a.bias(d.eg);
                a.vecs.push((alpha, d.eg));
                LayerBlocks {
                    et_u,
                    v_u,
                    u_v,
                    v_c,
                    c_c,
                    c_v,
                    alpha,
                }
            })
            .collect();
        let readout = a.mlp(d.v + F_RAW_V, d.readout, 1);
        let total = a.at;
        (
            Self {
                enc_v,
                enc_u,
                enc_c,
                enc_et,
                enc_eg,
                layers,
                readout,
                total,
            },
            a,
        )
    }
}

pub(crate) fn mat<'a>(theta: &'a [f64], b: MatBlock) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((b.rows, b.cols), &theta[b.off..b.off + b.rows * b.cols]).expect("block shape")
}

pub(crate) fn mat_mut<'a>(theta: &'a mut [f64], b: MatBlock) -> ArrayViewMut2<'a, f64> {
    ArrayViewMut2::from_shape((b.rows, b.cols), &mut theta[b.off..b.off + b.rows * b.cols]).expect("block shape")
}

pub(crate) fn vec_view<'a>(theta: &'a [f64], b: VecBlock) -> ArrayView1<'a, f64> {
    ArrayView1::from(&theta[b.off..b.off + b.len])
}

pub(crate) fn vec_mut<'a>(theta: &'a mut [f64], b: VecBlock) -> ArrayViewMut1<'a, f64> {
    ArrayViewMut1::from(&mut theta[b.off..b.off + b.len])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    pub dims: Dims,
    pub layout: Layout,
    pub theta: Vec<f64>,
}

impl GnnParams {
    pub fn zeros(dims: Dims) -> Self {
        let layout = Layout::new(&dims);
        let theta = vec![0.0; layout.total];
        Self { dims, layout, theta }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero; the
    /// edge-weight vectors count as `eg × 1` matrices.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let (layout, alloc) = Layout::with_blocks(&dims);
        let mut theta = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in &alloc.mats {
            let lim = (6.0 / (b.rows + b.cols) as f64).sqrt();
            for x in &mut theta[b.off..b.off + b.rows * b.cols] {
                *x = rng.gen_range(-lim..lim);
            }
        }
        for &(b, fan_in) in &alloc.vecs {
            let lim = (6.0 / (fan_in + 1) as f64).sqrt();
            for x in &mut theta[b.off..b.off + b.len] {
                *x = rng.gen_range(-lim..lim);
            }
        }
        Self { dims, layout, theta }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Parameters plus the frozen feature normalisation. Mutating the
/// parameters bumps a generation counter so activations recorded against
/// older weights are rejected by [`Model::backward`].
#[derive(Debug, Clone)]
pub struct Model {
    params: GnnParams,
    stats: FeatureStats,
    generation: u64,
}

impl Model {
    pub fn new(params: GnnParams, stats: FeatureStats) -> Self {
        Self {
            params,
            stats,
            generation: 0,
        }
    }

    pub fn params(&self) -> &GnnParams {
        &self.params
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) {
        self.theta_mut().copy_from_slice(theta);
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: FeatureStats) {
        self.generation += 1;
        self.stats = stats;
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }
}

/// `Σ ŷ_v` over movable cells.
pub fn congestion_penalty(y_hat: &[f64], movable: &[bool]) -> f64 {
    y_hat.iter().zip(movable).filter(|(_, &m)| m).map(|(y, _)| y).sum()
}

/// Mean prediction of the cells assigned to each grid; empty grids get 0.
pub fn grid_map_from_cells(y_hat: &[f64], graph: &RouteGraph) -> Grid2<f64> {
    let mut out = Grid2::filled(graph.n, graph.m, 0.0);
    for c in 0..graph.num_grids() {
        let cells = graph.grid_cells.row(c);
        if !cells.is_empty() {
            out.as_mut_slice()[c] = cells.iter().map(|&v| y_hat[v]).sum::<f64>() / cells.len() as f64;
        }
    }
    out
}
