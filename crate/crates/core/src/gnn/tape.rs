// SPDX-License-Identifier: Apache-2.0

//! Forward pass with a recorded tape and the matching reverse pass.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};

use super::{mat, mat_mut, vec_mut, vec_view, Mlp, Model};
use crate::error::{Error, Result};
use crate::routegraph::{RawFeatures, RouteGraph, F_RAW_C, F_RAW_EG, F_RAW_ET, F_RAW_U, F_RAW_V};

#[derive(Debug, Clone)]
struct MlpCache {
    x: Array2<f64>,
    h: Array2<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    h_v: Array2<f64>,
    h_u: Array2<f64>,
    h_c: Array2<f64>,
    a: Array2<f64>,
    b: Array2<f64>,
    f: Array2<f64>,
    s: Array1<f64>,
    m_vt: Array2<f64>,
    m_vg: Array2<f64>,
    m_cg: Array2<f64>,
    m_cgeom: Array2<f64>,
    t_v: Array2<f64>,
    t_u: Array2<f64>,
    t_c: Array2<f64>,
}

/// Everything the reverse pass needs, tied to the graph it was computed on
/// and to the model generation that produced it.
#[derive(Debug, Clone)]
pub struct Activations<'g> {
    graph: &'g RouteGraph,
    generation: u64,
    enc_v: MlpCache,
    enc_u: MlpCache,
    enc_c: MlpCache,
    enc_et: MlpCache,
    enc_eg: MlpCache,
    h_et: Array2<f64>,
    h_eg: Array2<f64>,
    layers: Vec<LayerCache>,
    readout: MlpCache,
    logits: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same layout as the parameter vector.
    pub theta: Vec<f64>,
    /// Gradient with respect to the raw (unnormalised) cell features.
    pub x_v: Array2<f64>,
}

fn check_finite(x: &Array2<f64>, layer: &str, tensor: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer: layer.into(),
            tensor: tensor.into(),
        })
    }
}

fn mlp_forward(theta: &[f64], m: &Mlp, x: Array2<f64>) -> (Array2<f64>, MlpCache) {
    let h = (x.dot(&mat(theta, m.w1)) + vec_view(theta, m.b1)).mapv(f64::tanh);
    let out = h.dot(&mat(theta, m.w2)) + vec_view(theta, m.b2);
    (out, MlpCache { x, h })
}

/// Accumulates parameter gradients; returns the input gradient if asked.
fn mlp_backward(
    theta: &[f64],
    m: &Mlp,
    c: &MlpCache,
    g_out: &Array2<f64>,
    grad: &mut [f64],
    want_input: bool,
) -> Option<Array2<f64>> {
    general_mat_mul(1.0, &c.h.t(), g_out, 1.0, &mut mat_mut(grad, m.w2));
    vec_mut(grad, m.b2).scaled_add(1.0, &g_out.sum_axis(Axis(0)));
    let mut gh = g_out.dot(&mat(theta, m.w2).t());
    gh.zip_mut_with(&c.h, |g, &h| *g *= 1.0 - h * h);
    general_mat_mul(1.0, &c.x.t(), &gh, 1.0, &mut mat_mut(grad, m.w1));
    vec_mut(grad, m.b1).scaled_add(1.0, &gh.sum_axis(Axis(0)));
    want_input.then(|| gh.dot(&mat(theta, m.w1).t()))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shape_err(what: &str, expected: (usize, usize), actual: (usize, usize)) -> Error {
    Error::Shape {
        what: what.into(),
        expected: format!("{}x{}", expected.0, expected.1),
        actual: format!("{}x{}", actual.0, actual.1),
    }
}

fn check_shape(what: &str, x: &Array2<f64>, rows: usize, cols: usize) -> Result<()> {
    if x.dim() != (rows, cols) {
        return Err(shape_err(what, (rows, cols), x.dim()));
    }
    Ok(())
}

fn zeros(rows: usize, cols: usize) -> Vec<f64> {
    vec![0.0; rows * cols]
}

fn from_vec(rows: usize, cols: usize, v: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), v).expect("buffer shape")
}

fn std_slice(x: &Array2<f64>) -> std::borrow::Cow<'_, [f64]> {
    match x.as_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(x.iter().copied().collect()),
    }
}

impl Model {
    /// Per-cell predictions `ŷ ≥ 0` and the tape for [`Model::backward`].
    pub fn forward<'g>(&self, g: &'g RouteGraph, raw: &RawFeatures) -> Result<(Vec<f64>, Activations<'g>)> {
        let d = self.params.dims;
        let lay = &self.params.layout;
        let th = &self.params.theta[..];
        let (nv, nu, nc, np) = (g.num_cells, g.num_nets, g.num_grids(), g.topo_edges.len());
        check_shape("X_V", &raw.x_v, nv, F_RAW_V)?;
        check_shape("X_U", &raw.x_u, nu, F_RAW_U)?;
        check_shape("X_C", &raw.x_c, nc, F_RAW_C)?;
        check_shape("X_Etopo", &raw.x_et, np, F_RAW_ET)?;
        check_shape("X_Egrid", &raw.x_eg, nv, F_RAW_EG)?;
        if lay.layers.len() != d.layers {
            return Err(Error::Shape {
                what: "layer count".into(),
                expected: d.layers.to_string(),
                actual: lay.layers.len().to_string(),
            });
        }
        let xn = self.stats.apply(raw);

        let (mut h_v, enc_v) = mlp_forward(th, &lay.enc_v, xn.x_v.clone());
        let (mut h_u, enc_u) = mlp_forward(th, &lay.enc_u, xn.x_u);
        let (mut h_c, enc_c) = mlp_forward(th, &lay.enc_c, xn.x_c);
        let (h_et, enc_et) = mlp_forward(th, &lay.enc_et, xn.x_et);
        let (h_eg, enc_eg) = mlp_forward(th, &lay.enc_eg, xn.x_eg);
        for (t, name) in [(&h_v, "H_V"), (&h_u, "H_U"), (&h_c, "H_C"), (&h_et, "H_Etopo"), (&h_eg, "H_Egrid")] {
            check_finite(t, "encoder", name)?;
        }

        let mut layers = Vec::with_capacity(d.layers);
        for (l, blk) in lay.layers.iter().enumerate() {
            let a = h_et.dot(&mat(th, blk.et_u));
            let b = h_v.dot(&mat(th, blk.v_u));
            let cu = h_u.dot(&mat(th, blk.u_v));
            let dv = h_v.dot(&mat(th, blk.v_c));
            let ec = h_c.dot(&mat(th, blk.c_c));
            let f = h_c.dot(&mat(th, blk.c_v));
            let s = h_eg.dot(&vec_view(th, blk.alpha));
            let (a_s, b_s, cu_s, dv_s, ec_s, f_s) =
                (std_slice(&a), std_slice(&b), std_slice(&cu), std_slice(&dv), std_slice(&ec), std_slice(&f));

            let mut m_u = zeros(nu, d.u);
            for u in 0..nu {
                let dst = &mut m_u[u * d.u..(u + 1) * d.u];
                for &t in g.net_topo.row(u) {
                    let v = g.topo_edges[t].cell;
                    let (ar, br) = (&a_s[t * d.u..(t + 1) * d.u], &b_s[v * d.u..(v + 1) * d.u]);
                    for k in 0..d.u {
                        dst[k] += ar[k] * br[k];
                    }
                }
            }
            let mut m_vt = zeros(nv, d.v);
            for v in 0..nv {
                let dst = &mut m_vt[v * d.v..(v + 1) * d.v];
                for &t in g.cell_topo.row(v) {
                    let u = g.topo_edges[t].net;
                    for (x, y) in dst.iter_mut().zip(&cu_s[u * d.v..(u + 1) * d.v]) {
                        *x += y;
                    }
                }
            }
            let mut m_cg = zeros(nc, d.c);
            let mut m_cgeom = zeros(nc, d.c);
            for c in 0..nc {
                let dst = &mut m_cg[c * d.c..(c + 1) * d.c];
                for &v in g.grid_cells.row(c) {
                    for (x, y) in dst.iter_mut().zip(&dv_s[v * d.c..(v + 1) * d.c]) {
                        *x += y;
                    }
                }
                let dst = &mut m_cgeom[c * d.c..(c + 1) * d.c];
                for &o in g.grid_adj.row(c) {
                    for (x, y) in dst.iter_mut().zip(&ec_s[o * d.c..(o + 1) * d.c]) {
                        *x += y;
                    }
                }
            }
            let mut m_vg = zeros(nv, d.v);
            for v in 0..nv {
                let c = g.cell_grid[v];
                for (x, y) in m_vg[v * d.v..(v + 1) * d.v].iter_mut().zip(&f_s[c * d.v..(c + 1) * d.v]) {
                    *x = s[v] * y;
                }
            }
            drop((a_s, b_s, cu_s, dv_s, ec_s, f_s));

            let t_u: Vec<f64> = m_u.iter().map(|x| x.tanh()).collect();
            let t_v: Vec<f64> = m_vt.iter().zip(&m_vg).map(|(a, b)| a.max(*b).tanh()).collect();
            let t_c: Vec<f64> = m_cg.iter().zip(&m_cgeom).map(|(a, b)| a.max(*b).tanh()).collect();
            let (t_v, t_u, t_c) = (from_vec(nv, d.v, t_v), from_vec(nu, d.u, t_u), from_vec(nc, d.c, t_c));
            let cache = LayerCache {
                h_v: h_v.clone(),
                h_u: h_u.clone(),
                h_c: h_c.clone(),
                a,
                b,
                f,
                s,
                m_vt: from_vec(nv, d.v, m_vt),
                m_vg: from_vec(nv, d.v, m_vg),
                m_cg: from_vec(nc, d.c, m_cg),
                m_cgeom: from_vec(nc, d.c, m_cgeom),
                t_v,
                t_u,
                t_c,
            };
            h_v += &cache.t_v;
            h_u += &cache.t_u;
            h_c += &cache.t_c;
            let name = format!("layer {l}");
            check_finite(&h_v, &name, "H_V")?;
            check_finite(&h_u, &name, "H_U")?;
            check_finite(&h_c, &name, "H_C")?;
            layers.push(cache);
        }

        let mut z = Array2::zeros((nv, d.v + F_RAW_V));
        z.slice_mut(ndarray::s![.., ..d.v]).assign(&h_v);
        z.slice_mut(ndarray::s![.., d.v..]).assign(&xn.x_v);
        let (out, readout) = mlp_forward(th, &lay.readout, z);
        check_finite(&out, "readout", "logit")?;
        let logits = out.column(0).to_owned();
        let y = logits.iter().map(|&o| softplus(o)).collect();
        Ok((
            y,
            Activations {
                graph: g,
                generation: self.generation,
                enc_v,
                enc_u,
                enc_c,
                enc_et,
                enc_eg,
                h_et,
                h_eg,
                layers,
                readout,
                logits,
            },
        ))
    }

    /// Reverse pass for `∂L/∂ŷ = grad_out`.
    pub fn backward(&self, acts: &Activations<'_>, grad_out: &[f64]) -> Result<Gradients> {
        if acts.generation != self.generation {
            return Err(Error::StaleActivations {
                forward: acts.generation,
                current: self.generation,
            });
        }
        let g = acts.graph;
        let d = self.params.dims;
        let lay = &self.params.layout;
        let th = &self.params.theta[..];
        let (nv, nu, nc, np) = (g.num_cells, g.num_nets, g.num_grids(), g.topo_edges.len());
        if grad_out.len() != nv {
            return Err(Error::LengthMismatch {
                expected: nv,
                actual: grad_out.len(),
            });
        }
        let mut grad = vec![0.0; th.len()];

        let g_logit = Array2::from_shape_fn((nv, 1), |(v, _)| grad_out[v] * sigmoid(acts.logits[v]));
        let gz = mlp_backward(th, &lay.readout, &acts.readout, &g_logit, &mut grad, true).expect("input grad");
        let mut g_hv = gz.slice(ndarray::s![.., ..d.v]).to_owned();
        let mut g_xv_norm = gz.slice(ndarray::s![.., d.v..]).to_owned();
        let mut g_hu = Array2::<f64>::zeros((nu, d.u));
        let mut g_hc = Array2::<f64>::zeros((nc, d.c));
        let mut g_het = Array2::<f64>::zeros((np, d.et));
        let mut g_heg = Array2::<f64>::zeros((nv, d.eg));

        for (blk, c) in lay.layers.iter().zip(&acts.layers).rev() {
            // H' = H + tanh(M): the residual keeps g_h*, the message gets the rest
            let dm = |gh: &Array2<f64>, t: &Array2<f64>| {
                let mut m = gh.clone();
                m.zip_mut_with(t, |x, &t| *x *= 1.0 - t * t);
                m
            };
            let gm_v = dm(&g_hv, &c.t_v);
            let gm_u = dm(&g_hu, &c.t_u);
            let gm_c = dm(&g_hc, &c.t_c);
            let split = |gm: &Array2<f64>, a: &Array2<f64>, b: &Array2<f64>| {
                let mut ga = gm.clone();
                let mut gb = gm.clone();
                ndarray::Zip::from(&mut ga).and(&mut gb).and(a).and(b).for_each(|x, y, &a, &b| {
                    if a > b {
                        *y = 0.0;
                    } else if a < b {
                        *x = 0.0;
                    } else {
                        *x *= 0.5;
                        *y *= 0.5;
                    }
                });
                (ga, gb)
            };
            let (gm_vt, gm_vg) = split(&gm_v, &c.m_vt, &c.m_vg);
            let (gm_cg, gm_cgeom) = split(&gm_c, &c.m_cg, &c.m_cgeom);
            let (gm_vt_s, gm_vg_s, gm_cg_s, gm_cgeom_s, gm_u_s) =
                (std_slice(&gm_vt), std_slice(&gm_vg), std_slice(&gm_cg), std_slice(&gm_cgeom), std_slice(&gm_u));
            let (a_s, b_s, f_s) = (std_slice(&c.a), std_slice(&c.b), std_slice(&c.f));

            // grid → cell, weighted by the grid-edge scalar
            let mut gf = zeros(nc, d.v);
            let mut gs = Array1::<f64>::zeros(nv);
            for v in 0..nv {
                let cg = g.cell_grid[v];
                let gr = &gm_vg_s[v * d.v..(v + 1) * d.v];
                let fr = &f_s[cg * d.v..(cg + 1) * d.v];
                gs[v] = gr.iter().zip(fr).map(|(x, y)| x * y).sum();
                for (x, y) in gf[cg * d.v..(cg + 1) * d.v].iter_mut().zip(gr) {
                    *x += c.s[v] * y;
                }
            }
            let gf = from_vec(nc, d.v, gf);
            vec_mut(&mut grad, blk.alpha).scaled_add(1.0, &acts.h_eg.t().dot(&gs));
            let alpha = vec_view(th, blk.alpha);
            for v in 0..nv {
                g_heg.row_mut(v).scaled_add(gs[v], &alpha);
            }
            general_mat_mul(1.0, &c.h_c.t(), &gf, 1.0, &mut mat_mut(&mut grad, blk.c_v));
            let mut g_hc_new = g_hc.clone();
            general_mat_mul(1.0, &gf, &mat(th, blk.c_v).t(), 1.0, &mut g_hc_new);

            // grid ↔ grid; adjacency is symmetric
            let mut ge = zeros(nc, d.c);
            for cc in 0..nc {
                let dst = &mut ge[cc * d.c..(cc + 1) * d.c];
                for &o in g.grid_adj.row(cc) {
                    for (x, y) in dst.iter_mut().zip(&gm_cgeom_s[o * d.c..(o + 1) * d.c]) {
                        *x += y;
                    }
                }
            }
            let ge = from_vec(nc, d.c, ge);
            general_mat_mul(1.0, &c.h_c.t(), &ge, 1.0, &mut mat_mut(&mut grad, blk.c_c));
            general_mat_mul(1.0, &ge, &mat(th, blk.c_c).t(), 1.0, &mut g_hc_new);

            // cell → grid
            let mut gd = zeros(nv, d.c);
            for v in 0..nv {
                let cg = g.cell_grid[v];
                gd[v * d.c..(v + 1) * d.c].copy_from_slice(&gm_cg_s[cg * d.c..(cg + 1) * d.c]);
            }
            let gd = from_vec(nv, d.c, gd);
            general_mat_mul(1.0, &c.h_v.t(), &gd, 1.0, &mut mat_mut(&mut grad, blk.v_c));
            let mut g_hv_new = g_hv.clone();
            general_mat_mul(1.0, &gd, &mat(th, blk.v_c).t(), 1.0, &mut g_hv_new);

            // net → cell
            let mut gcu = zeros(nu, d.v);
            for t in 0..np {
                let e = g.topo_edges[t];
                for (x, y) in gcu[e.net * d.v..(e.net + 1) * d.v]
                    .iter_mut()
                    .zip(&gm_vt_s[e.cell * d.v..(e.cell + 1) * d.v])
                {
                    *x += y;
                }
            }
            let gcu = from_vec(nu, d.v, gcu);
            general_mat_mul(1.0, &c.h_u.t(), &gcu, 1.0, &mut mat_mut(&mut grad, blk.u_v));
            let mut g_hu_new = g_hu.clone();
            general_mat_mul(1.0, &gcu, &mat(th, blk.u_v).t(), 1.0, &mut g_hu_new);

            // cell → net through the edge-gated product
            let mut ga = zeros(np, d.u);
            let mut gb = zeros(nv, d.u);
            for t in 0..np {
                let e = g.topo_edges[t];
                let gm = &gm_u_s[e.net * d.u..(e.net + 1) * d.u];
                let (ar, br) = (&a_s[t * d.u..(t + 1) * d.u], &b_s[e.cell * d.u..(e.cell + 1) * d.u]);
                for k in 0..d.u {
                    ga[t * d.u + k] = gm[k] * br[k];
                    gb[e.cell * d.u + k] += gm[k] * ar[k];
                }
            }
            let (ga, gb) = (from_vec(np, d.u, ga), from_vec(nv, d.u, gb));
            general_mat_mul(1.0, &acts.h_et.t(), &ga, 1.0, &mut mat_mut(&mut grad, blk.et_u));
            general_mat_mul(1.0, &ga, &mat(th, blk.et_u).t(), 1.0, &mut g_het);
            general_mat_mul(1.0, &c.h_v.t(), &gb, 1.0, &mut mat_mut(&mut grad, blk.v_u));
            general_mat_mul(1.0, &gb, &mat(th, blk.v_u).t(), 1.0, &mut g_hv_new);

            g_hv = g_hv_new;
            g_hu = g_hu_new;
            g_hc = g_hc_new;
        }

        let gx = mlp_backward(th, &lay.enc_v, &acts.enc_v, &g_hv, &mut grad, true).expect("input grad");
        g_xv_norm += &gx;
        mlp_backward(th, &lay.enc_u, &acts.enc_u, &g_hu, &mut grad, false);
        mlp_backward(th, &lay.enc_c, &acts.enc_c, &g_hc, &mut grad, false);
        mlp_backward(th, &lay.enc_et, &acts.enc_et, &g_het, &mut grad, false);
        mlp_backward(th, &lay.enc_eg, &acts.enc_eg, &g_heg, &mut grad, false);
        let x_v = g_xv_norm / &self.stats.v.std;
        Ok(Gradients { theta: grad, x_v })
    }
}
