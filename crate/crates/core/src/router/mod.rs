// SPDX-License-Identifier: Apache-2.0

//! Deterministic grid global router used as the routing oracle.
//!
//! Each net is decomposed into two-pin segments by a minimum spanning tree
//! over its pins' grid locations (Manhattan distance, ties broken by lower
//! pin index) and every segment is routed as an L. Of the two corners, the
//! one whose path would add less overflow given the current usage wins, with
//! ties going to horizontal-first. A horizontal wire crossing from column `i`
//! to `i + 1` in row `j` occupies one horizontal track of grid `(i, j)`;
//! vertical wires likewise occupy the lower grid of each crossing.

mod metrics;

pub use metrics::{cell_labels, electric_overflow, overflow_metrics, OverflowReport};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Grid2, GridGeometry};
use crate::netlist::{Netlist, Placement};

/// Per-grid wire usage against capacity, for one horizontal and one vertical
/// routing layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionMap {
    pub usage_h: Grid2<u32>,
    pub usage_v: Grid2<u32>,
    pub cap_h: f64,
    pub cap_v: f64,
}

impl CongestionMap {
    pub fn empty(n: usize, m: usize, cap_h: f64, cap_v: f64) -> Self {
        Self {
            usage_h: Grid2::filled(n, m, 0),
            usage_v: Grid2::filled(n, m, 0),
            cap_h,
            cap_v,
        }
    }

    pub fn n(&self) -> usize {
        self.usage_h.n()
    }

    pub fn m(&self) -> usize {
        self.usage_h.m()
    }

    /// Total routed wire length in layout units.
    pub fn wirelength(&self, geo: &GridGeometry) -> f64 {
        let h: u64 = self.usage_h.as_slice().iter().map(|&u| u as u64).sum();
        let v: u64 = self.usage_v.as_slice().iter().map(|&u| u as u64).sum();
        h as f64 * geo.pitch_x + v as f64 * geo.pitch_y
    }

    /// `max(usage_h / cap_h, usage_v / cap_v)` per grid.
    pub fn utilization(&self) -> Grid2<f64> {
        let mut out = Grid2::filled(self.n(), self.m(), 0.0);
        for (k, slot) in out.as_mut_slice().iter_mut().enumerate() {
            let h = self.usage_h.as_slice()[k] as f64 / self.cap_h;
            let v = self.usage_v.as_slice()[k] as f64 / self.cap_v;
            *slot = h.max(v);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "congmap {} {} {} {}", self.n(), self.m(), self.cap_h, self.cap_v);
        for (i, j, h) in self.usage_h.iter_indexed() {
            let _ = writeln!(out, "{i} {j} {h} {}", self.usage_v.get(i, j));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Malformed {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or_else(|| bad(1, "empty congestion map"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "congmap" {
            return Err(bad(line, "expected `congmap n m cap_h cap_v`"));
        }
        let parse_err = |line| bad(line, "cannot parse number");
        let n: usize = toks[1].parse().map_err(|_| parse_err(line))?;
        let m: usize = toks[2].parse().map_err(|_| parse_err(line))?;
        let cap_h: f64 = toks[3].parse().map_err(|_| parse_err(line))?;
        let cap_v: f64 = toks[4].parse().map_err(|_| parse_err(line))?;
        if n == 0 || m == 0 || !(cap_h > 0.0 && cap_v > 0.0) {
            return Err(Error::Invariant("congestion map needs n, m >= 1 and positive capacities".into()));
        }
        let mut map = Self::empty(n, m, cap_h, cap_v);
        let mut seen = vec![false; n * m];
        for (line, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 4 {
                return Err(bad(line, "expected `i j usage_h usage_v`"));
            }
            let i: usize = t[0].parse().map_err(|_| parse_err(line))?;
            let j: usize = t[1].parse().map_err(|_| parse_err(line))?;
            if i >= n || j >= m {
                return Err(bad(line, "grid index out of range"));
            }
            let k = map.usage_h.index(i, j);
            if std::mem::replace(&mut seen[k], true) {
                return Err(bad(line, "duplicate grid entry"));
            }
            *map.usage_h.get_mut(i, j) = t[2].parse().map_err(|_| parse_err(line))?;
            *map.usage_v.get_mut(i, j) = t[3].parse().map_err(|_| parse_err(line))?;
        }
        if seen.iter().any(|s| !s) {
            return Err(bad(0, "congestion map is missing grid entries"));
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RouteStats {
    /// Nets with fewer than two pins, skipped.
    pub skipped_nets: usize,
    pub segments: usize,
    /// Grid crossings over all segments.
    pub crossings: u64,
}

/// Incremental router; nets are committed one at a time.
#[derive(Debug, Clone)]
pub struct Router {
    map: CongestionMap,
    stats: RouteStats,
}

impl Router {
    pub fn new(n: usize, m: usize, cap_h: f64, cap_v: f64) -> Self {
        Self {
            map: CongestionMap::empty(n, m, cap_h, cap_v),
            stats: RouteStats::default(),
        }
    }

    pub fn map(&self) -> &CongestionMap {
        &self.map
    }

    pub fn stats(&self) -> RouteStats {
        self.stats
    }

    pub fn finish(self) -> (CongestionMap, RouteStats) {
        (self.map, self.stats)
    }

    /// Routes one net given its pins' grid locations in pin order.
    pub fn add_net(&mut self, locs: &[(usize, usize)]) {
        if locs.len() < 2 {
            self.stats.skipped_nets += 1;
            return;
        }
        for (a, b) in spanning_tree(locs) {
            self.route_segment(locs[a], locs[b]);
        }
    }

    fn added_overflow_h(&self, row: usize, cols: std::ops::Range<usize>) -> f64 {
        cols.map(|i| (*self.map.usage_h.get(i, row) as f64 + 1.0 - self.map.cap_h).max(0.0))
            .sum()
    }

    fn added_overflow_v(&self, col: usize, rows: std::ops::Range<usize>) -> f64 {
        rows.map(|j| (*self.map.usage_v.get(col, j) as f64 + 1.0 - self.map.cap_v).max(0.0))
            .sum()
    }

    fn route_segment(&mut self, a: (usize, usize), b: (usize, usize)) {
        self.stats.segments += 1;
        let cols = a.0.min(b.0)..a.0.max(b.0);
        let rows = a.1.min(b.1)..a.1.max(b.1);
        self.stats.crossings += (cols.len() + rows.len()) as u64;
        // horizontal-first runs along row a.1 then up column b.0;
        // vertical-first runs up column a.0 then along row b.1
        let horizontal_first = if cols.is_empty() || rows.is_empty() {
            true
        } else {
            let hf = self.added_overflow_h(a.1, cols.clone())
                + self.added_overflow_v(b.0, rows.clone());
            let vf = self.added_overflow_v(a.0, rows.clone())
                + self.added_overflow_h(b.1, cols.clone());
            hf <= vf
        };
        let (row, col) = if horizontal_first { (a.1, b.0) } else { (b.1, a.0) };
        for i in cols {
            *self.map.usage_h.get_mut(i, row) += 1;
        }
        for j in rows {
            *self.map.usage_v.get_mut(col, j) += 1;
        }
    }
}

/// Prim's minimum spanning tree under Manhattan distance. Among equal
/// distances the lower new vertex wins, then the lower tree vertex.
/// Returns `(tree_vertex, new_vertex)` edges in insertion order.
pub fn spanning_tree(locs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let k = locs.len();
    if k < 2 {
        return Vec::new();
    }
    let dist = |a: usize, b: usize| {
        locs[a].0.abs_diff(locs[b].0) + locs[a].1.abs_diff(locs[b].1)
    };
    let mut in_tree = vec![false; k];
    let mut best: Vec<(usize, usize)> = (0..k).map(|v| (dist(0, v), 0)).collect();
    in_tree[0] = true;
    let mut edges = Vec::with_capacity(k - 1);
    for _ in 1..k {
        let v = (0..k)
            .filter(|&v| !in_tree[v])
            .min_by_key(|&v| (best[v].0, v, best[v].1))
            .expect("vertices remain");
        in_tree[v] = true;
        edges.push((best[v].1, v));
        for w in 0..k {
            if !in_tree[w] {
                let d = dist(v, w);
                if d < best[w].0 || (d == best[w].0 && v < best[w].1) {
                    best[w] = (d, v);
                }
            }
        }
    }
    edges
}

/// Grid location of every pin of `net`.
pub fn net_grid_locations(
    netlist: &Netlist,
    p: &Placement,
    geo: &GridGeometry,
    net: usize,
) -> Result<Vec<(usize, usize)>> {
    netlist.nets[net]
        .pins
        .iter()
        .map(|&pin| {
            let (x, y) = netlist.pin_position(pin, p);
            geo.locate(x, y)
                .ok_or(Error::PinOutsideRegion { pin, net, x, y })
        })
        .collect()
}

/// Routes every net in id order.
pub fn route(netlist: &Netlist, p: &Placement) -> Result<CongestionMap> {
    route_with_stats(netlist, p).map(|(map, _)| map)
}

pub fn route_with_stats(netlist: &Netlist, p: &Placement) -> Result<(CongestionMap, RouteStats)> {
    if !p.is_finite() {
        return Err(Error::Invariant("placement has non-finite coordinates".into()));
    }
    let geo = netlist.geometry();
    let g = &netlist.grid;
    let mut router = Router::new(g.n, g.m, g.cap_h, g.cap_v);
    for net in 0..netlist.num_nets() {
        let locs = net_grid_locations(netlist, p, &geo, net)?;
        router.add_net(&locs);
    }
    let stats = router.stats();
    if stats.skipped_nets > 0 {
        log::warn!("router skipped {} nets with fewer than two pins", stats.skipped_nets);
    }
    Ok(router.finish())
}

#[cfg(test)]
mod tests;
