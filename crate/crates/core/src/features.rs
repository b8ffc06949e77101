// SPDX-License-Identifier: Apache-2.0

//! RUDY demand maps and the soft-assigned per-cell geometric features.

use crate::error::{Error, Result};
use crate::grid::{Grid2, GridGeometry, Rect};
use crate::netlist::{Netlist, Placement};

/// Horizontal and vertical RUDY demand per routing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RudyMap {
    pub rudy_h: Grid2<f64>,
    pub rudy_v: Grid2<f64>,
}

impl RudyMap {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            rudy_h: Grid2::filled(n, m, 0.0),
            rudy_v: Grid2::filled(n, m, 0.0),
        }
    }

    /// Debug dump in the congestion-map layout with a `rudymap` header.
    pub fn to_text(&self) -> String {
        let (n, m) = (self.rudy_h.n(), self.rudy_h.m());
        let mut s = format!("rudymap {n} {m}\n");
        for i in 0..n {
            for j in 0..m {
                s.push_str(&format!("{i} {j} {:?} {:?}\n", self.rudy_h.get(i, j), self.rudy_v.get(i, j)));
            }
        }
        s
    }
}

/// Bounding box of a net's pins with zero-extent sides widened to one pitch
/// around the pin coordinate.
pub fn rudy_box(netlist: &Netlist, net: usize, p: &Placement, geo: &GridGeometry) -> Option<Rect> {
    let pins = &netlist.nets[net].pins;
    if pins.is_empty() {
        return None;
    }
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &k in pins {
        let (x, y) = netlist.pin_position(k, p);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x0 -= 0.5 * geo.pitch_x;
        x1 += 0.5 * geo.pitch_x;
    }
    if y1 == y0 {
        y0 -= 0.5 * geo.pitch_y;
        y1 += 0.5 * geo.pitch_y;
    }
    Some(Rect::new(x0, y0, x1, y1))
}

pub fn compute_rudy(netlist: &Netlist, p: &Placement) -> RudyMap {
    let geo = netlist.geometry();
    let mut map = RudyMap::zeros(geo.n, geo.m);
    for e in 0..netlist.num_nets() {
        let Some(bb) = rudy_box(netlist, e, p, &geo) else {
            continue;
        };
        let (inv_h, inv_w) = (1.0 / bb.height(), 1.0 / bb.width());
        let (cols, rows) = geo.overlapping_bins(&bb);
        for i in cols {
            for j in rows.clone() {
                let a = bb.overlap_area(&geo.bin_rect(i, j));
                map.rudy_h[(i, j)] += a * inv_h;
                map.rudy_v[(i, j)] += a * inv_w;
            }
        }
    }
    map
}

/// Size of the soft-assignment neighbourhood.
pub const NEIGHBORS: usize = 9;

/// Per-cell soft assignment over the 3×3 block of grids nearest the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomFeature {
    pub g_h: Vec<f64>,
    pub g_v: Vec<f64>,
    /// Lower-left grid of each cell's block; neighbour `k` is
    /// `(a + k / 3, b + k % 3)`.
    pub block: Vec<(usize, usize)>,
    pub weights: Vec<[f64; NEIGHBORS]>,
    pub dis: Vec<[f64; NEIGHBORS]>,
}

impl GeomFeature {
    #[inline]
    pub fn neighbor(&self, v: usize, k: usize) -> (usize, usize) {
        let (a, b) = self.block[v];
        (a + k / 3, b + k % 3)
    }
}

/// Position derivatives of `(g_h, g_v)` per cell, RUDY held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomJacobian {
    pub dgh_dx: Vec<f64>,
    pub dgh_dy: Vec<f64>,
    pub dgv_dx: Vec<f64>,
    pub dgv_dy: Vec<f64>,
}

fn check_grid(geo: &GridGeometry) -> Result<()> {
    if geo.n < 3 || geo.m < 3 {
        return Err(Error::Config(format!(
            "geometric features need at least a 3x3 grid, got {}x{}",
            geo.n, geo.m
        )));
    }
    Ok(())
}

#[inline]
fn block_start(idx: usize, count: usize) -> usize {
    idx.saturating_sub(1).min(count - 3)
}

pub fn geom_features(netlist: &Netlist, p: &Placement, rudy: &RudyMap) -> Result<GeomFeature> {
    let geo = netlist.geometry();
    check_grid(&geo)?;
    let eps = 1e-6 * geo.pitch();
    let nc = netlist.num_cells();
    let mut out = GeomFeature {
        g_h: Vec::with_capacity(nc),
        g_v: Vec::with_capacity(nc),
        block: Vec::with_capacity(nc),
        weights: Vec::with_capacity(nc),
        dis: Vec::with_capacity(nc),
    };
    for v in 0..nc {
        let (cx, cy) = netlist.cell_center(v, p);
        let a = block_start(geo.col_clamped(cx), geo.n);
        let b = block_start(geo.row_clamped(cy), geo.m);
        let mut dis = [0.0; NEIGHBORS];
        let mut logit = [0.0; NEIGHBORS];
        for k in 0..NEIGHBORS {
            let (gx, gy) = geo.bin_center(a + k / 3, b + k % 3);
            dis[k] = (cx - gx).hypot(cy - gy);
            logit[k] = 1.0 / (dis[k] + eps);
        }
        let top = logit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w = logit.map(|l| (l - top).exp());
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        let (mut gh, mut gv) = (0.0, 0.0);
        for k in 0..NEIGHBORS {
            let (i, j) = (a + k / 3, b + k % 3);
            gh += w[k] * rudy.rudy_h.get(i, j);
            gv += w[k] * rudy.rudy_v.get(i, j);
        }
        out.g_h.push(gh);
        out.g_v.push(gv);
        out.block.push((a, b));
        out.weights.push(w);
        out.dis.push(dis);
    }
    Ok(out)
}

/// Analytic derivative of the geometric features. Only the weights depend on
/// position; at `dis = 0` the distance derivative is taken as 0.
pub fn geom_jacobian(netlist: &Netlist, p: &Placement, rudy: &RudyMap, geom: &GeomFeature) -> GeomJacobian {
    let geo = netlist.geometry();
    let eps = 1e-6 * geo.pitch();
    let nc = netlist.num_cells();
    let mut jac = GeomJacobian {
        dgh_dx: vec![0.0; nc],
        dgh_dy: vec![0.0; nc],
        dgv_dx: vec![0.0; nc],
        dgv_dy: vec![0.0; nc],
    };
    for v in 0..nc {
        let (cx, cy) = netlist.cell_center(v, p);
        let w = &geom.weights[v];
        for k in 0..NEIGHBORS {
            let d = geom.dis[v][k];
            if d == 0.0 {
                continue;
            }
            let (i, j) = geom.neighbor(v, k);
            let (gx, gy) = geo.bin_center(i, j);
            // d(logit)/d(dis) · d(dis)/d(x, y)
            let s = -1.0 / ((d + eps) * (d + eps) * d);
            let (lx, ly) = (s * (cx - gx), s * (cy - gy));
            let rh = w[k] * (rudy.rudy_h.get(i, j) - geom.g_h[v]);
            let rv = w[k] * (rudy.rudy_v.get(i, j) - geom.g_v[v]);
            jac.dgh_dx[v] += rh * lx;
            jac.dgh_dy[v] += rh * ly;
            jac.dgv_dx[v] += rv * lx;
            jac.dgv_dy[v] += rv * ly;
        }
    }
    jac
}
