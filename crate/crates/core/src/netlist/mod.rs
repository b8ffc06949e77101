// SPDX-License-Identifier: Apache-2.0

//! Circuit hypergraph: cells, nets and pins on a rectangular layout region
//! with a two-capacity routing grid.
//!
//! Coordinates are layout units. A cell's position is its lower-left corner
//! and a pin sits at `cell origin + pin offset`.

mod format;
mod synth;

pub use format::{parse_netlist, read_placement, write_netlist, write_placement};
pub use synth::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, Rect};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutRegion {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl LayoutRegion {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.x0, self.y0, self.x1, self.y1)
    }
}

/// Routing grid: `n` columns, `m` rows, and the horizontal/vertical wire
/// capacity of every grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutingGrid {
    pub n: usize,
    pub m: usize,
    pub cap_h: f64,
    pub cap_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PinDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pin {
    pub cell: usize,
    pub net: usize,
    pub direction: PinDirection,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub width: f64,
    pub height: f64,
    pub fixed: bool,
    /// Lower-left corner; required for fixed cells, optional for movable ones.
    pub origin: Option<(f64, f64)>,
    /// Pins on this cell, in pin-id order.
    pub pins: Vec<usize>,
}

impl Cell {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub pins: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub cells: Vec<Cell>,
    pub nets: Vec<Net>,
    pub pins: Vec<Pin>,
    pub region: LayoutRegion,
    pub grid: RoutingGrid,
}

impl Netlist {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_nets(&self) -> usize {
        self.nets.len()
    }

    pub fn num_pins(&self) -> usize {
        self.pins.len()
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry::new(self.region, &self.grid)
    }

    pub fn movable_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| !c.fixed).collect()
    }

    pub fn movable_area(&self) -> f64 {
        self.cells.iter().filter(|c| !c.fixed).map(Cell::area).sum()
    }

    /// Absolute pin position under placement `p`.
    #[inline]
    pub fn pin_position(&self, pin: usize, p: &Placement) -> (f64, f64) {
        let pin = &self.pins[pin];
        (p.x[pin.cell] + pin.dx, p.y[pin.cell] + pin.dy)
    }

    #[inline]
    pub fn cell_center(&self, cell: usize, p: &Placement) -> (f64, f64) {
        let c = &self.cells[cell];
        (p.x[cell] + 0.5 * c.width, p.y[cell] + 0.5 * c.height)
    }

    pub fn cell_rect(&self, cell: usize, p: &Placement) -> Rect {
        let c = &self.cells[cell];
        Rect::new(p.x[cell], p.y[cell], p.x[cell] + c.width, p.y[cell] + c.height)
    }

    /// Rebuilds `Cell::pins` and `Net::pins` from the pin table.
    pub fn rebuild_pin_lists(&mut self) {
        for c in &mut self.cells {
            c.pins.clear();
        }
        for n in &mut self.nets {
            n.pins.clear();
        }
        for (k, pin) in self.pins.iter().enumerate() {
            self.cells[pin.cell].pins.push(k);
            self.nets[pin.net].pins.push(k);
        }
    }

    /// Checks every structural invariant of the hypergraph.
    pub fn validate(&self) -> Result<()> {
        let r = &self.region;
        if !(r.x1 > r.x0 && r.y1 > r.y0) {
            return Err(Error::Invariant(format!("empty region {r:?}")));
        }
        let g = &self.grid;
        if g.n < 1 || g.m < 1 || !(g.cap_h > 0.0) || !(g.cap_v > 0.0) {
            return Err(Error::Invariant(format!("bad routing grid {g:?}")));
        }
        for (k, c) in self.cells.iter().enumerate() {
            if !(c.width > 0.0 && c.height > 0.0) || !c.width.is_finite() || !c.height.is_finite()
            {
                return Err(Error::Invariant(format!("cell {k} has non-positive size")));
            }
            if c.fixed {
                let Some((x, y)) = c.origin else {
                    return Err(Error::Invariant(format!("fixed cell {k} has no position")));
                };
                if x < r.x0 || y < r.y0 || x + c.width > r.x1 || y + c.height > r.y1 {
                    return Err(Error::Invariant(format!(
                        "fixed cell {k} is not inside the region"
                    )));
                }
            }
        }
        for (k, pin) in self.pins.iter().enumerate() {
            if pin.cell >= self.cells.len() || pin.net >= self.nets.len() {
                return Err(Error::Invariant(format!("pin {k} has a dangling reference")));
            }
        }
        for (k, net) in self.nets.iter().enumerate() {
            if net.pins.len() < 2 {
                return Err(Error::Invariant(format!("net {k} has fewer than 2 pins")));
            }
            let mut seen = net.pins.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != net.pins.len() {
                return Err(Error::Invariant(format!("net {k} lists a pin twice")));
            }
            if net.pins.iter().any(|&p| p >= self.pins.len() || self.pins[p].net != k) {
                return Err(Error::Invariant(format!("net {k} pin list is inconsistent")));
            }
        }
        let cell_pin_total: usize = self.cells.iter().map(|c| c.pins.len()).sum();
        let net_pin_total: usize = self.nets.iter().map(|n| n.pins.len()).sum();
        if cell_pin_total != self.pins.len() || net_pin_total != self.pins.len() {
            return Err(Error::Invariant("pin count conservation".into()));
        }
        Ok(())
    }
}

/// Lower-left corner coordinates of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Placement {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Checks lengths against `netlist` and that fixed cells sit at their
    /// netlist coordinates.
    pub fn check_against(&self, netlist: &Netlist) -> Result<()> {
        if self.x.len() != netlist.num_cells() || self.y.len() != netlist.num_cells() {
            return Err(Error::LengthMismatch {
                expected: netlist.num_cells(),
                actual: self.x.len().min(self.y.len()),
            });
        }
        for (k, c) in netlist.cells.iter().enumerate() {
            if let (true, Some((x, y))) = (c.fixed, c.origin) {
                if self.x[k] != x || self.y[k] != y {
                    return Err(Error::Invariant(format!("fixed cell {k} moved")));
                }
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

/// Half-perimeter wirelength of every net summed.
pub fn hpwl(netlist: &Netlist, p: &Placement) -> f64 {
    netlist
        .nets
        .iter()
        .map(|net| {
            let mut lo = (f64::INFINITY, f64::INFINITY);
            let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &pin in &net.pins {
                let (x, y) = netlist.pin_position(pin, p);
                lo = (lo.0.min(x), lo.1.min(y));
                hi = (hi.0.max(x), hi.1.max(y));
            }
            if net.pins.is_empty() {
                0.0
            } else {
                (hi.0 - lo.0) + (hi.1 - lo.1)
            }
        })
        .sum()
}

/// Compact construction of small netlists for tests and examples.
pub mod builder {
    use super::*;

    /// Builds a validated netlist from `(w, h, fixed_origin)` cells and nets
    /// given as lists of `(cell, dx, dy)` pins. The first pin is the driver.
    pub fn build(
        region: LayoutRegion,
        grid: RoutingGrid,
        cells: &[(f64, f64, Option<(f64, f64)>)],
        nets: &[Vec<(usize, f64, f64)>],
    ) -> Netlist {
        let mut nl = Netlist {
            cells: cells
                .iter()
                .map(|&(w, h, o)| Cell {
                    width: w,
                    height: h,
                    fixed: o.is_some(),
                    origin: o,
                    pins: vec![],
                })
                .collect(),
            nets: nets.iter().map(|_| Net { pins: vec![] }).collect(),
            pins: vec![],
            region,
            grid,
        };
        for (k, net) in nets.iter().enumerate() {
            for (q, &(cell, dx, dy)) in net.iter().enumerate() {
                nl.pins.push(Pin {
                    cell,
                    net: k,
                    direction: if q == 0 {
                        PinDirection::Output
                    } else {
                        PinDirection::Input
                    },
                    dx,
                    dy,
                });
            }
        }
        nl.rebuild_pin_lists();
        nl.validate().expect("test netlist is valid");
        nl
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hpwl_of_two_pin_net() {
        let nl = builder::build(
            LayoutRegion::new(0.0, 0.0, 10.0, 10.0),
            RoutingGrid {
                n: 2,
                m: 2,
                cap_h: 1.0,
                cap_v: 1.0,
            },
            &[(1.0, 1.0, None), (1.0, 1.0, None)],
            &[vec![(0, 0.5, 0.5), (1, 0.5, 0.5)]],
        );
        let p = Placement {
            x: vec![0.0, 3.0],
            y: vec![1.0, 5.0],
        };
        assert_eq!(hpwl(&nl, &p), 7.0);
    }

    #[test]
    fn validate_rejects_single_pin_net() {
        let mut nl = builder::build(
            LayoutRegion::new(0.0, 0.0, 10.0, 10.0),
            RoutingGrid {
                n: 2,
                m: 2,
                cap_h: 1.0,
                cap_v: 1.0,
            },
            &[(1.0, 1.0, None), (1.0, 1.0, None)],
            &[vec![(0, 0.0, 0.0), (1, 0.0, 0.0)]],
        );
        nl.pins.pop();
        nl.rebuild_pin_lists();
        assert!(matches!(nl.validate(), Err(Error::Invariant(_))));
    }
}
