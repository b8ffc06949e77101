// SPDX-License-Identifier: Apache-2.0

use super::CongestionMap;
use crate::grid::Grid2;
use crate::netlist::{Netlist, Placement};

#[derive(Debug, Clone, PartialEq)]
pub struct OverflowReport {
    /// Total overflow, `Σ OF(i, j)`.
    pub tof: f64,
    /// Maximum overflow, `max OF(i, j)`.
    pub mof: f64,
    /// `max OF_h / cap_h`.
    pub h_cr: f64,
    /// `max OF_v / cap_v`.
    pub v_cr: f64,
    pub of_h: Grid2<f64>,
    pub of_v: Grid2<f64>,
    /// `OF_h + OF_v`.
    pub of_map: Grid2<f64>,
}

pub fn overflow_metrics(c: &CongestionMap) -> OverflowReport {
    let of_h = c.usage_h.map(|&u| (u as f64 - c.cap_h).max(0.0));
    let of_v = c.usage_v.map(|&u| (u as f64 - c.cap_v).max(0.0));
    let total: Vec<f64> = of_h
        .as_slice()
        .iter()
        .zip(of_v.as_slice())
        .map(|(h, v)| h + v)
        .collect();
    let max = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
    OverflowReport {
        tof: total.iter().sum(),
        mof: max(&total),
        h_cr: max(of_h.as_slice()) / c.cap_h,
        v_cr: max(of_v.as_slice()) / c.cap_v,
        of_map: Grid2::from_vec(c.n(), c.m(), total),
        of_h,
        of_v,
    }
}

/// Per-cell congestion label: the largest `OF(i, j)` among grids the cell
/// overlaps with positive area. Cells entirely outside the grid get 0.
pub fn cell_labels(netlist: &Netlist, p: &Placement, of_map: &Grid2<f64>) -> Vec<f64> {
    let geo = netlist.geometry();
    (0..netlist.num_cells())
        .map(|v| {
            let (cols, rows) = geo.overlapping_bins(&netlist.cell_rect(v, p));
            let mut label = 0.0f64;
            for i in cols {
                for j in rows.clone() {
                    label = label.max(*of_map.get(i, j));
                }
            }
            label
        })
        .collect()
}

/// Density overflow of the movable cells on the routing grid:
/// `Σ_b max(0, A_b − ρ_t·|b|) / Σ movable area`, with `A_b` the exact
/// movable-cell area inside bin `b`.
pub fn electric_overflow(netlist: &Netlist, p: &Placement, target_density: f64) -> f64 {
    let geo = netlist.geometry();
    let mut area = Grid2::filled(geo.n, geo.m, 0.0f64);
    let mut total = 0.0;
    for (v, cell) in netlist.cells.iter().enumerate() {
        if cell.fixed {
            continue;
        }
        total += cell.area();
        let rect = netlist.cell_rect(v, p);
        let (cols, rows) = geo.overlapping_bins(&rect);
        for i in cols {
            for j in rows.clone() {
                area[(i, j)] += rect.overlap_area(&geo.bin_rect(i, j));
            }
        }
    }
    if total <= 0.0 {
        return 0.0;
    }
    let cap = target_density * geo.bin_area();
    area.as_slice().iter().map(|a| (a - cap).max(0.0)).sum::<f64>() / total
}
