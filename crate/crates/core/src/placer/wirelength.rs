// SPDX-License-Identifier: Apache-2.0

//! Weighted-average wirelength.

use crate::netlist::{Netlist, Placement};

/// One axis of one net: `(WA, dWA/dcoord per pin)`. Coordinates are shifted
/// by their max (resp. min) before exponentiation.
pub fn wa_axis(coords: &[f64], gamma: f64, grad: &mut [f64]) -> f64 {
    let hi = coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = coords.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut sp, mut wp, mut sn, mut wn) = (0.0, 0.0, 0.0, 0.0);
    for &x in coords {
        let a = ((x - hi) / gamma).exp();
        let b = ((lo - x) / gamma).exp();
        sp += x * a;
        wp += a;
        sn += x * b;
        wn += b;
    }
    let (pos, neg) = (sp / wp, sn / wn);
    for (g, &x) in grad.iter_mut().zip(coords) {
        let a = ((x - hi) / gamma).exp();
        let b = ((lo - x) / gamma).exp();
        *g = a / wp * (1.0 + (x - pos) / gamma) - b / wn * (1.0 - (x - neg) / gamma);
    }
    pos - neg
}

/// Total WA wirelength and its gradient with respect to cell origins
/// (`gx`, `gy` indexed by cell). Fixed cells receive no gradient.
pub fn wirelength(netlist: &Netlist, p: &Placement, gamma: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let nc = netlist.num_cells();
    let (mut gx, mut gy) = (vec![0.0; nc], vec![0.0; nc]);
    let mut total = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut g = Vec::new();
    for net in &netlist.nets {
        if net.pins.len() < 2 {
            continue;
        }
        xs.clear();
        ys.clear();
        for &k in &net.pins {
            let (x, y) = netlist.pin_position(k, p);
            xs.push(x);
            ys.push(y);
        }
        g.resize(xs.len(), 0.0);
        total += wa_axis(&xs, gamma, &mut g);
        for (q, &k) in net.pins.iter().enumerate() {
            gx[netlist.pins[k].cell] += g[q];
        }
        total += wa_axis(&ys, gamma, &mut g);
        for (q, &k) in net.pins.iter().enumerate() {
            gy[netlist.pins[k].cell] += g[q];
        }
    }
    for (v, c) in netlist.cells.iter().enumerate() {
        if c.fixed {
            gx[v] = 0.0;
            gy[v] = 0.0;
        }
    }
    (total, gx, gy)
}
