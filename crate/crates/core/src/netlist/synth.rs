// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic netlists.
//!
//! Cells are laid out on a hidden one-dimensional "logical" order and most
//! net members are drawn from a window around an anchor cell in that order,
//! which gives the netlist locality; a configurable share of members is drawn
//! uniformly instead and produces long, congestion-inducing nets. Net degrees
//! follow a truncated power law. Fixed cells are small pads spread around the
//! region boundary.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cell, LayoutRegion, Net, Netlist, Pin, PinDirection, RoutingGrid};
use crate::config::KeyValues;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub cell_count: usize,
    pub net_count: usize,
    pub min_pins: usize,
    pub max_pins: usize,
    /// `P(d) ∝ d^-degree_exponent` on `[min_pins, max_pins]`.
    pub degree_exponent: f64,
    pub fixed_fraction: f64,
    pub region: LayoutRegion,
    pub grid: RoutingGrid,
    pub cell_width: (f64, f64),
    pub cell_height: f64,
    /// Half-width of the id window local net members are drawn from.
    pub locality: usize,
    /// Probability that a net member is drawn uniformly over all cells.
    pub global_fraction: f64,
    pub connected: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            cell_count: 500,
            net_count: 520,
            min_pins: 2,
            max_pins: 8,
            degree_exponent: 2.0,
            fixed_fraction: 0.04,
            region: LayoutRegion::new(0.0, 0.0, 16.0, 16.0),
            grid: RoutingGrid {
                n: 16,
                m: 16,
                cap_h: 6.0,
                cap_v: 6.0,
            },
            cell_width: (0.3, 0.7),
            cell_height: 0.5,
            locality: 12,
            global_fraction: 0.08,
            connected: true,
            seed: 1,
        }
    }
}

const SPEC_KEYS: &[&str] = &[
    "cells",
    "nets",
    "min_pins",
    "max_pins",
    "degree_exponent",
    "fixed_fraction",
    "region",
    "grid",
    "cell_width",
    "cell_height",
    "locality",
    "global_fraction",
    "connected",
    "seed",
];

impl SyntheticSpec {
    /// Reads a `key = value` spec; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_known(SPEC_KEYS)?;
        let mut s = Self::default();
        if let Some(v) = kv.get("cells")? {
            s.cell_count = v;
        }
        if let Some(v) = kv.get("nets")? {
            s.net_count = v;
        }
        if let Some(v) = kv.get("min_pins")? {
            s.min_pins = v;
        }
        if let Some(v) = kv.get("max_pins")? {
            s.max_pins = v;
        }
        if let Some(v) = kv.get("degree_exponent")? {
            s.degree_exponent = v;
        }
        if let Some(v) = kv.get("fixed_fraction")? {
            s.fixed_fraction = v;
        }
        if let Some(r) = kv.get_list::<f64>("region", 4)? {
            s.region = LayoutRegion::new(r[0], r[1], r[2], r[3]);
        }
        if let Some(g) = kv.get_list::<f64>("grid", 4)? {
            s.grid = RoutingGrid {
                n: g[0] as usize,
                m: g[1] as usize,
                cap_h: g[2],
                cap_v: g[3],
            };
        }
        if let Some(w) = kv.get_list::<f64>("cell_width", 2)? {
            s.cell_width = (w[0], w[1]);
        }
        if let Some(v) = kv.get("cell_height")? {
            s.cell_height = v;
        }
        if let Some(v) = kv.get("locality")? {
            s.locality = v;
        }
        if let Some(v) = kv.get("global_fraction")? {
            s.global_fraction = v;
        }
        if let Some(v) = kv.get_bool("connected")? {
            s.connected = v;
        }
        if let Some(v) = kv.get("seed")? {
            s.seed = v;
        }
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let r = &self.region;
        let g = &self.grid;
        format!(
            "cells = {}\nnets = {}\nmin_pins = {}\nmax_pins = {}\ndegree_exponent = {}\n\
             fixed_fraction = {}\nregion = {} {} {} {}\ngrid = {} {} {} {}\n\
             cell_width = {} {}\ncell_height = {}\nlocality = {}\nglobal_fraction = {}\n\
             connected = {}\nseed = {}\n",
            self.cell_count,
            self.net_count,
            self.min_pins,
            self.max_pins,
            self.degree_exponent,
            self.fixed_fraction,
            r.x0,
            r.y0,
            r.x1,
            r.y1,
            g.n,
            g.m,
            g.cap_h,
            g.cap_v,
            self.cell_width.0,
            self.cell_width.1,
            self.cell_height,
            self.locality,
            self.global_fraction,
            self.connected,
            self.seed
        )
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Infeasible(m.to_string()));
        if self.cell_count < 1 || self.net_count < 1 {
            return bad("cell and net counts must be at least 1");
        }
        if self.min_pins < 2 || self.max_pins < self.min_pins {
            return bad("pins per net must satisfy 2 <= min <= max");
        }
        if self.max_pins > self.cell_count {
            return bad("pins per net exceed the cell count");
        }
        if !(0.0..=1.0).contains(&self.fixed_fraction)
            || !(0.0..=1.0).contains(&self.global_fraction)
        {
            return bad("fractions must lie in [0, 1]");
        }
        if !(self.cell_width.0 > 0.0 && self.cell_width.1 >= self.cell_width.0)
            || !(self.cell_height > 0.0)
        {
            return bad("cell sizes must be positive");
        }
        let r = &self.region;
        if !(r.x1 > r.x0 && r.y1 > r.y0) {
            return bad("empty region");
        }
        if self.cell_width.1 > r.width() || self.cell_height > r.height() {
            return bad("cells do not fit in the region");
        }
        if self.grid.n < 1 || self.grid.m < 1 || !(self.grid.cap_h > 0.0 && self.grid.cap_v > 0.0)
        {
            return bad("bad routing grid");
        }
        Ok(())
    }
}

/// Lower-left corner of a `pad`-sized square at arc length `t` along the
/// boundary, walking counter-clockwise from the lower-left corner.
fn boundary_point(region: &LayoutRegion, pad: f64, t: f64) -> (f64, f64) {
    let (w, h) = (region.width() - pad, region.height() - pad);
    let (x, y) = if t < w {
        (region.x0 + t, region.y0)
    } else if t < w + h {
        (region.x1 - pad, region.y0 + (t - w))
    } else if t < 2.0 * w + h {
        (region.x1 - pad - (t - w - h), region.y1 - pad)
    } else {
        (region.x0, region.y1 - pad - (t - 2.0 * w - h).min(h))
    };
    // corners computed by subtraction can land an ulp outside
    (x.clamp(region.x0, region.x1 - pad), y.clamp(region.y0, region.y1 - pad))
}

/// Generates the netlist described by `spec`. Deterministic in the spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Netlist> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.cell_count;

    let num_fixed = ((spec.fixed_fraction * n as f64).round() as usize).min(n);
    let mut fixed_slot = vec![None; n];
    for s in 0..num_fixed {
        fixed_slot[s * n / num_fixed] = Some(s);
    }

    let region = spec.region;
    let pad = spec.cell_height.min(spec.cell_width.0);
    let perimeter = 2.0 * (region.width() + region.height() - 2.0 * pad);
    let mut cells = Vec::with_capacity(n);
    for slot in &fixed_slot {
        let cell = match slot {
            Some(s) => {
                let t = (*s as f64 + 0.5) / num_fixed as f64 * perimeter;
                let (x, y) = boundary_point(&region, pad, t);
                Cell {
                    width: pad,
                    height: pad,
                    fixed: true,
                    origin: Some((x, y)),
                    pins: Vec::new(),
                }
            }
            None => Cell {
                width: rng.gen_range(spec.cell_width.0..=spec.cell_width.1),
                height: spec.cell_height,
                fixed: false,
                origin: None,
                pins: Vec::new(),
            },
        };
        cells.push(cell);
    }

    let degrees: Vec<usize> = (spec.min_pins..=spec.max_pins).collect();
    let weights: Vec<f64> = degrees
        .iter()
        .map(|&d| (d as f64).powf(-spec.degree_exponent))
        .collect();
    let degree_dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::Infeasible(format!("degree distribution: {e}")))?;

    let window = spec.locality.max(1);
    let mut connected = vec![false; n];
    let mut frontier = 0usize; // smallest unconnected cell
    let mut members_of: Vec<Vec<usize>> = Vec::with_capacity(spec.net_count);
    for k in 0..spec.net_count {
        let degree = degrees[degree_dist.sample(&mut rng)];
        let mut members = Vec::with_capacity(degree);
        let anchor = if spec.connected && frontier < n {
            if k > 0 {
                // every id below the frontier is already connected
                let lo = frontier.saturating_sub(window);
                members.push(rng.gen_range(lo..frontier));
            }
            frontier
        } else {
            rng.gen_range(0..n)
        };
        if !members.contains(&anchor) {
            members.push(anchor);
        }
        let lo = anchor.saturating_sub(window);
        let hi = (anchor + window).min(n - 1);
        let mut attempts = 0;
        while members.len() < degree {
            attempts += 1;
            let c = if attempts > 8 * degree || rng.gen_bool(spec.global_fraction) {
                rng.gen_range(0..n)
            } else {
                rng.gen_range(lo..=hi)
            };
            if !members.contains(&c) {
                members.push(c);
            }
        }
        for &c in &members {
            connected[c] = true;
        }
        while frontier < n && connected[frontier] {
            frontier += 1;
        }
        members_of.push(members);
    }
    if spec.connected {
        // stragglers join the net whose position in net order matches theirs
        for c in 0..n {
            if !connected[c] {
                members_of[c * spec.net_count / n].push(c);
                connected[c] = true;
            }
        }
    }

    let mut nl = Netlist {
        cells,
        nets: vec![Net { pins: Vec::new() }; spec.net_count],
        pins: Vec::new(),
        region,
        grid: spec.grid,
    };
    for (k, members) in members_of.iter().enumerate() {
        for (q, &c) in members.iter().enumerate() {
            let cell = &nl.cells[c];
            let (dx, dy) = (
                rng.gen_range(0.0..=cell.width),
                rng.gen_range(0.0..=cell.height),
            );
            nl.pins.push(Pin {
                cell: c,
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
    nl.validate()?;
    Ok(nl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, write_netlist};

    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }

    fn components(nl: &Netlist) -> usize {
        let mut parent: Vec<usize> = (0..nl.num_cells()).collect();
        for net in &nl.nets {
            let first = nl.pins[net.pins[0]].cell;
            for &p in &net.pins[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, nl.pins[p].cell));
                parent[a] = b;
            }
        }
        (0..nl.num_cells()).filter(|&c| find(&mut parent, c) == c).count()
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SyntheticSpec {
            seed: 1,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(write_netlist(&a), write_netlist(&b));
        let c = generate_synthetic(&SyntheticSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(write_netlist(&a), write_netlist(&c));
    }

    #[test]
    fn pin_count_bounds() {
        let spec = SyntheticSpec {
            cell_count: 100,
            net_count: 80,
            min_pins: 2,
            max_pins: 6,
            connected: false,
            ..SyntheticSpec::default()
        };
        let nl = generate_synthetic(&spec).unwrap();
        assert!((160..=480).contains(&nl.num_pins()), "{}", nl.num_pins());
        assert!(nl.nets.iter().all(|n| (2..=6).contains(&n.pins.len())));
    }

    #[test]
    fn connected_when_requested() {
        let spec = SyntheticSpec {
            cell_count: 500,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let nl = generate_synthetic(&spec).unwrap();
        assert_eq!(components(&nl), 1);
    }

    #[test]
    fn sparse_connected_spec_still_connects() {
        let spec = SyntheticSpec {
            cell_count: 300,
            net_count: 100,
            seed: 9,
            ..SyntheticSpec::default()
        };
        let nl = generate_synthetic(&spec).unwrap();
        assert_eq!(components(&nl), 1);
    }

    #[test]
    fn infeasible_specs() {
        let too_many = SyntheticSpec {
            cell_count: 4,
            max_pins: 6,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic(&too_many), Err(Error::Infeasible(_))));
        let zero = SyntheticSpec {
            net_count: 0,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic(&zero), Err(Error::Infeasible(_))));
    }

    #[test]
    fn fixed_pads_inside_region_and_round_trip() {
        let nl = generate_synthetic(&SyntheticSpec {
            fixed_fraction: 0.2,
            ..SyntheticSpec::default()
        })
        .unwrap();
        assert_eq!(nl.cells.iter().filter(|c| c.fixed).count(), 100);
        assert_eq!(parse_netlist(&write_netlist(&nl)).unwrap(), nl);
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = SyntheticSpec {
            seed: 42,
            connected: false,
            ..SyntheticSpec::default()
        };
        assert_eq!(SyntheticSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(SyntheticSpec::parse("bogus = 1\n").is_err());
    }
}
