// SPDX-License-Identifier: Apache-2.0

//! Cell inflation from a grid congestion map.

use crate::error::Result;
use crate::gnn::{grid_map_from_cells, Model};
use crate::grid::Grid2;
use crate::netlist::{Netlist, Placement};
use crate::routegraph::GraphInput;
use crate::router::route;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    Router,
    Gnn,
}

impl std::str::FromStr for Feedback {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "router" => Ok(Self::Router),
            "gnn" => Ok(Self::Gnn),
            _ => Err(format!("unknown feedback source {s:?} (expected router or gnn)")),
        }
    }
}

impl std::fmt::Display for Feedback {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Router => "router",
            Self::Gnn => "gnn",
        })
    }
}

/// `max(1, sqrt(max_g c_g^exponent))` over the congestion values of the
/// grids a cell overlaps.
pub fn inflation_ratio(congestion: &[f64], exponent: f64) -> f64 {
    let inc = congestion.iter().map(|c| c.powf(exponent)).fold(f64::NEG_INFINITY, f64::max);
    if inc.is_finite() {
        inc.sqrt().max(1.0)
    } else {
        1.0
    }
}

/// Routed utilisation `max(usage_h / cap_h, usage_v / cap_v)` per grid.
pub fn router_congestion(netlist: &Netlist, p: &Placement) -> Result<Grid2<f64>> {
    Ok(route(netlist, p)?.utilization())
}

/// Predicted grid overflow expressed like a utilisation: `1 + ŷ_g / cap`,
/// with `cap` the mean of the two directional capacities.
pub fn gnn_congestion(netlist: &Netlist, p: &Placement, model: &Model) -> Result<Grid2<f64>> {
    let gi = GraphInput::build(netlist, p)?;
    let (y, _) = model.forward(&gi.graph, &gi.features)?;
    let cap = 0.5 * (netlist.grid.cap_h + netlist.grid.cap_v);
    Ok(grid_map_from_cells(&y, &gi.graph).map(|v| 1.0 + v / cap.max(f64::MIN_POSITIVE)))
}

/// Per-cell ratios from `congestion`, looked up at each cell's rectangle in
/// `original` at `p`, to be applied to the current sizes in `work`. Fixed
/// cells get 1. When the summed area increase exceeds `area_budget` times
/// the free area left by `work`, every increment `r² − 1` is scaled by the
/// same factor.
pub fn inflation_ratios(
    original: &Netlist,
    work: &Netlist,
    p: &Placement,
    congestion: &Grid2<f64>,
    exponent: f64,
    area_budget: f64,
) -> Vec<f64> {
    let geo = original.geometry();
    let ratios: Vec<f64> = (0..original.num_cells())
        .map(|v| {
            if original.cells[v].fixed {
                return 1.0;
            }
            let rect = original.cell_rect(v, p);
            let (cols, rows) = geo.overlapping_bins(&rect);
            let mut vals = vec![];
            for i in cols {
                for j in rows.clone() {
                    if rect.overlap_area(&geo.bin_rect(i, j)) > 0.0 {
                        vals.push(*congestion.get(i, j));
                    }
                }
            }
            inflation_ratio(&vals, exponent)
        })
        .collect();
    let free = (work.region.area() - work.cells.iter().map(|c| c.area()).sum::<f64>()).max(0.0);
    let increase: f64 = ratios.iter().zip(&work.cells).map(|(r, c)| c.area() * (r * r - 1.0)).sum();
    let allowed = area_budget * free;
    if increase <= allowed || increase <= 0.0 {
        return ratios;
    }
    let k = allowed / increase;
    ratios.iter().map(|r| (1.0 + k * (r * r - 1.0)).sqrt()).collect()
}

/// Scales cell `v` of `work` by `ratios[v]` about its center, moving the
/// pin offsets with it, and rewrites `x` (origins in `work`) to keep centers.
pub fn apply_ratios(work: &mut Netlist, x: &mut [f64], ratios: &[f64]) {
    let n = work.num_cells();
    for (v, &r) in ratios.iter().enumerate() {
        if r == 1.0 {
            continue;
        }
        let c = &mut work.cells[v];
        let (cx, cy) = (x[v] + 0.5 * c.width, x[n + v] + 0.5 * c.height);
        c.width *= r;
        c.height *= r;
        x[v] = cx - 0.5 * c.width;
        x[n + v] = cy - 0.5 * c.height;
        for &pin in &c.pins {
            work.pins[pin].dx *= r;
            work.pins[pin].dy *= r;
        }
    }
}

/// Origins in `to` that keep the cell centers of origins `x` in `from`.
pub fn recenter(from: &Netlist, to: &Netlist, x: &[f64]) -> Placement {
    let n = from.num_cells();
    let mut p = Placement::zeros(n);
    for v in 0..n {
        let (a, b) = (&from.cells[v], &to.cells[v]);
        p.x[v] = x[v] + 0.5 * (a.width - b.width);
        p.y[v] = x[n + v] + 0.5 * (a.height - b.height);
    }
    p
}
