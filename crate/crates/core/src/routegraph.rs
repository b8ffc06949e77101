// SPDX-License-Identifier: Apache-2.0

//! Heterogeneous cell/net/grid graph and its raw feature tensors.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::features::{compute_rudy, geom_features, GeomFeature, RudyMap};
use crate::netlist::{Netlist, PinDirection, Placement};

pub const F_RAW_V: usize = 5;
pub const F_RAW_U: usize = 3;
pub const F_RAW_C: usize = 4;
pub const F_RAW_ET: usize = 2;
pub const F_RAW_EG: usize = 3;

/// Column of `g_h` in the raw cell features; `g_v` follows it.
pub const COL_GH: usize = 3;
pub const COL_GV: usize = 4;

/// Compressed adjacency: row `r` owns `items[offsets[r]..offsets[r + 1]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    pub offsets: Vec<usize>,
    pub items: Vec<usize>,
}

impl Csr {
    /// Counting sort of `(row, item)` pairs; items keep their input order
    /// within a row.
    pub fn from_pairs(rows: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> Self {
        let mut offsets = vec![0usize; rows + 1];
        for (r, _) in pairs.clone() {
            offsets[r + 1] += 1;
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        let mut cursor = offsets.clone();
        let mut items = vec![0usize; offsets[rows]];
        for (r, it) in pairs {
            items[cursor[r]] = it;
            cursor[r] += 1;
        }
        Self { offsets, items }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[usize] {
        &self.items[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopoEdge {
    pub cell: usize,
    pub net: usize,
    pub pin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteGraph {
    pub num_cells: usize,
    pub num_nets: usize,
    pub n: usize,
    pub m: usize,
    /// One edge per pin, indexed by pin id.
    pub topo_edges: Vec<TopoEdge>,
    /// Grid-edge of each cell: flat index `i * m + j` of the grid holding
    /// its center.
    pub cell_grid: Vec<usize>,
    /// Undirected 4-neighbour grid pairs, each stored once.
    pub geom_edges: Vec<(usize, usize)>,
    /// Net → topo-edge ids.
    pub net_topo: Csr,
    /// Cell → topo-edge ids.
    pub cell_topo: Csr,
    /// Grid → cells.
    pub grid_cells: Csr,
    /// Grid → adjacent grids (both directions of every geom-edge).
    pub grid_adj: Csr,
}

impl RouteGraph {
    pub fn num_grids(&self) -> usize {
        self.n * self.m
    }

    pub fn grid_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cell_grid.iter().copied().enumerate()
    }
}

pub fn build_routegraph(netlist: &Netlist, p: &Placement) -> Result<RouteGraph> {
    p.check_against(netlist)?;
    let geo = netlist.geometry();
    let (n, m) = (geo.n, geo.m);
    let nc = netlist.num_cells();
    let tol = 1e-9 * (geo.region.width() + geo.region.height());
    let r = geo.region;

    let topo_edges: Vec<TopoEdge> = netlist
        .pins
        .iter()
        .enumerate()
        .map(|(k, pin)| TopoEdge {
            cell: pin.cell,
            net: pin.net,
            pin: k,
        })
        .collect();

    let mut cell_grid = Vec::with_capacity(nc);
    for v in 0..nc {
        let (x, y) = netlist.cell_center(v, p);
        if !(x >= r.x0 - tol && x <= r.x1 + tol && y >= r.y0 - tol && y <= r.y1 + tol) {
            return Err(Error::CellOutsideRegion { cell: v, x, y });
        }
        cell_grid.push(geo.col_clamped(x) * m + geo.row_clamped(y));
    }

    let mut geom_edges = Vec::with_capacity(2 * n * m - n - m);
    for i in 0..n {
        for j in 0..m {
            let c = i * m + j;
            if i + 1 < n {
                geom_edges.push((c, c + m));
            }
            if j + 1 < m {
                geom_edges.push((c, c + 1));
            }
        }
    }

    let net_topo = Csr::from_pairs(netlist.num_nets(), topo_edges.iter().map(|e| (e.net, e.pin)));
    let cell_topo = Csr::from_pairs(nc, topo_edges.iter().map(|e| (e.cell, e.pin)));
    let grid_cells = Csr::from_pairs(n * m, cell_grid.iter().enumerate().map(|(v, &c)| (c, v)));
    let grid_adj = Csr::from_pairs(
        n * m,
        geom_edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]),
    );
    Ok(RouteGraph {
        num_cells: nc,
        num_nets: netlist.num_nets(),
        n,
        m,
        topo_edges,
        cell_grid,
        geom_edges,
        net_topo,
        cell_topo,
        grid_cells,
        grid_adj,
    })
}

/// Raw (unnormalised) feature tensors, one row per vertex or edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    /// `[width, height, degree, g_h, g_v]` per cell.
    pub x_v: Array2<f64>,
    /// `[span_w, span_h, degree]` per net.
    pub x_u: Array2<f64>,
    /// `[rudy_h, rudy_v, center_x, center_y]` per grid.
    pub x_c: Array2<f64>,
    /// `[is_input, is_output]` per topo-edge.
    pub x_et: Array2<f64>,
    /// `[dx, dy, dis]` per grid-edge, cell center minus grid center.
    pub x_eg: Array2<f64>,
}

pub fn build_features(
    netlist: &Netlist,
    p: &Placement,
    graph: &RouteGraph,
    rudy: &RudyMap,
    geom: &GeomFeature,
) -> RawFeatures {
    let geo = netlist.geometry();
    let nc = netlist.num_cells();
    let mut x_v = Array2::zeros((nc, F_RAW_V));
    let mut x_eg = Array2::zeros((nc, F_RAW_EG));
    for (v, cell) in netlist.cells.iter().enumerate() {
        x_v[[v, 0]] = cell.width;
        x_v[[v, 1]] = cell.height;
        x_v[[v, 2]] = cell.pins.len() as f64;
        x_v[[v, COL_GH]] = geom.g_h[v];
        x_v[[v, COL_GV]] = geom.g_v[v];
        let c = graph.cell_grid[v];
        let (gx, gy) = geo.bin_center(c / geo.m, c % geo.m);
        let (cx, cy) = netlist.cell_center(v, p);
        x_eg[[v, 0]] = cx - gx;
        x_eg[[v, 1]] = cy - gy;
        x_eg[[v, 2]] = (cx - gx).hypot(cy - gy);
    }
    let mut x_u = Array2::zeros((netlist.num_nets(), F_RAW_U));
    for (e, net) in netlist.nets.iter().enumerate() {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &k in &net.pins {
            let (x, y) = netlist.pin_position(k, p);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !net.pins.is_empty() {
            x_u[[e, 0]] = x1 - x0;
            x_u[[e, 1]] = y1 - y0;
        }
        x_u[[e, 2]] = net.pins.len() as f64;
    }
    let mut x_c = Array2::zeros((geo.len(), F_RAW_C));
    for i in 0..geo.n {
        for j in 0..geo.m {
            let c = i * geo.m + j;
            let (gx, gy) = geo.bin_center(i, j);
            x_c[[c, 0]] = *rudy.rudy_h.get(i, j);
            x_c[[c, 1]] = *rudy.rudy_v.get(i, j);
            x_c[[c, 2]] = gx;
            x_c[[c, 3]] = gy;
        }
    }
    let mut x_et = Array2::zeros((netlist.num_pins(), F_RAW_ET));
    for (k, pin) in netlist.pins.iter().enumerate() {
        let col = match pin.direction {
            PinDirection::Input => 0,
            PinDirection::Output => 1,
        };
        x_et[[k, col]] = 1.0;
    }
    RawFeatures {
        x_v,
        x_u,
        x_c,
        x_et,
        x_eg,
    }
}

/// Everything derived from one placement that the model consumes.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub graph: RouteGraph,
    pub features: RawFeatures,
    pub rudy: RudyMap,
    pub geom: GeomFeature,
}

impl GraphInput {
    pub fn build(netlist: &Netlist, p: &Placement) -> Result<Self> {
        let graph = build_routegraph(netlist, p)?;
        let rudy = compute_rudy(netlist, p);
        let geom = geom_features(netlist, p, &rudy)?;
        let features = build_features(netlist, p, &graph, &rudy, &geom);
        Ok(Self {
            graph,
            features,
            rudy,
            geom,
        })
    }
}

/// Per-column mean and standard deviation of one feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl ColumnStats {
    pub fn identity(cols: usize) -> Self {
        Self {
            mean: Array1::zeros(cols),
            std: Array1::ones(cols),
        }
    }

    /// Population statistics over the rows of all `tensors`; a standard
    /// deviation below 1e-12 is replaced by 1.
    pub fn fit<'a>(cols: usize, tensors: impl Iterator<Item = &'a Array2<f64>> + Clone) -> Self {
        let mut count = 0usize;
        let mut sum = Array1::<f64>::zeros(cols);
        for t in tensors.clone() {
            count += t.nrows();
            sum += &t.sum_axis(Axis(0));
        }
        if count == 0 {
            return Self::identity(cols);
        }
        let mean = sum / count as f64;
        let mut sq = Array1::<f64>::zeros(cols);
        for t in tensors {
            for row in t.rows() {
                let d = &row - &mean;
                sq += &(&d * &d);
            }
        }
        let std = (sq / count as f64).mapv(|v| {
            let s = v.sqrt();
            if s < 1e-12 {
                1.0
            } else {
                s
            }
        });
        Self { mean, std }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) / &self.std
    }
}

/// Normalisation statistics frozen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub v: ColumnStats,
    pub u: ColumnStats,
    pub c: ColumnStats,
    pub et: ColumnStats,
    pub eg: ColumnStats,
}

impl Default for FeatureStats {
    fn default() -> Self {
        Self {
            v: ColumnStats::identity(F_RAW_V),
            u: ColumnStats::identity(F_RAW_U),
            c: ColumnStats::identity(F_RAW_C),
            et: ColumnStats::identity(F_RAW_ET),
            eg: ColumnStats::identity(F_RAW_EG),
        }
    }
}

impl FeatureStats {
    pub fn fit(sets: &[&RawFeatures]) -> Self {
        Self {
            v: ColumnStats::fit(F_RAW_V, sets.iter().map(|f| &f.x_v)),
            u: ColumnStats::fit(F_RAW_U, sets.iter().map(|f| &f.x_u)),
            c: ColumnStats::fit(F_RAW_C, sets.iter().map(|f| &f.x_c)),
            et: ColumnStats::fit(F_RAW_ET, sets.iter().map(|f| &f.x_et)),
            eg: ColumnStats::fit(F_RAW_EG, sets.iter().map(|f| &f.x_eg)),
        }
    }

    pub fn apply(&self, f: &RawFeatures) -> RawFeatures {
        RawFeatures {
            x_v: self.v.apply(&f.x_v),
            x_u: self.u.apply(&f.x_u),
            x_c: self.c.apply(&f.x_c),
            x_et: self.et.apply(&f.x_et),
            x_eg: self.eg.apply(&f.x_eg),
        }
    }

    /// All statistics as one flat list, in field order, means before stds.
    pub fn to_flat(&self) -> Vec<f64> {
        [&self.v, &self.u, &self.c, &self.et, &self.eg]
            .iter()
            .flat_map(|s| s.mean.iter().chain(s.std.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        let widths = [F_RAW_V, F_RAW_U, F_RAW_C, F_RAW_ET, F_RAW_EG];
        let need: usize = widths.iter().map(|w| 2 * w).sum();
        if flat.len() != need {
            return Err(Error::LengthMismatch {
                expected: need,
                actual: flat.len(),
            });
        }
        let mut at = 0;
        let mut take = |w: usize| {
            let mean = Array1::from(flat[at..at + w].to_vec());
            let std = Array1::from(flat[at + w..at + 2 * w].to_vec());
            at += 2 * w;
            ColumnStats { mean, std }
        };
        Ok(Self {
            v: take(F_RAW_V),
            u: take(F_RAW_U),
            c: take(F_RAW_C),
            et: take(F_RAW_ET),
            eg: take(F_RAW_EG),
        })
    }
}

/// Human-readable summary with the first `k` edges of each type.
pub fn debug_dump(g: &RouteGraph, k: usize) -> String {
    let mut s = format!(
        "cells {} nets {} grids {}x{}\ntopo_edges {}\ngrid_edges {}\ngeom_edges {}\n",
        g.num_cells,
        g.num_nets,
        g.n,
        g.m,
        g.topo_edges.len(),
        g.cell_grid.len(),
        g.geom_edges.len()
    );
    for e in g.topo_edges.iter().take(k) {
        s.push_str(&format!("topo {} {} {}\n", e.cell, e.net, e.pin));
    }
    for (v, c) in g.grid_edges().take(k) {
        s.push_str(&format!("grid {v} {c}\n"));
    }
    for (a, b) in g.geom_edges.iter().take(k) {
        s.push_str(&format!("geom {a} {b}\n"));
    }
    s
}
