// SPDX-License-Identifier: Apache-2.0

//! Congestion penalty through the frozen model and its positional gradient.

use crate::error::Result;
use crate::features::{geom_features, geom_jacobian, RudyMap};
use crate::gnn::{congestion_penalty, Model};
use crate::netlist::{Netlist, Placement};
use crate::routegraph::{GraphInput, RawFeatures, RouteGraph, COL_GH, COL_GV};

#[derive(Debug, Clone)]
pub struct CongestionEval {
    pub value: f64,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub y_hat: Vec<f64>,
}

/// Chains `∂L/∂X_V` through the geometric-feature Jacobian. Only the `g_h`,
/// `g_v` columns depend on position in this model of the gradient.
fn positional_gradient(
    netlist: &Netlist,
    p: &Placement,
    rudy: &RudyMap,
    geom: &crate::features::GeomFeature,
    gxv: &ndarray::Array2<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let jac = geom_jacobian(netlist, p, rudy, geom);
    let nc = netlist.num_cells();
    let (mut gx, mut gy) = (vec![0.0; nc], vec![0.0; nc]);
    for v in 0..nc {
        if netlist.cells[v].fixed {
            continue;
        }
        let (a, b) = (gxv[[v, COL_GH]], gxv[[v, COL_GV]]);
        gx[v] = a * jac.dgh_dx[v] + b * jac.dgv_dx[v];
        gy[v] = a * jac.dgh_dy[v] + b * jac.dgv_dy[v];
    }
    (gx, gy)
}

/// Rebuilds the graph and features at `p`, evaluates the model and, if
/// asked, back-propagates to cell positions.
pub fn congestion_term(netlist: &Netlist, p: &Placement, model: &Model, want_grad: bool) -> Result<CongestionEval> {
    let gi = GraphInput::build(netlist, p)?;
    let (y_hat, acts) = model.forward(&gi.graph, &gi.features)?;
    let mask = netlist.movable_mask();
    let value = congestion_penalty(&y_hat, &mask);
    let (gx, gy) = if want_grad {
        let seed: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        let g = model.backward(&acts, &seed)?;
        positional_gradient(netlist, p, &gi.rudy, &gi.geom, &g.x_v)
    } else {
        (vec![], vec![])
    };
    Ok(CongestionEval { value, gx, gy, y_hat })
}

/// The penalty as a function of position with RUDY, the graph (including
/// grid assignment) and every non-geometric feature frozen at the point of
/// construction. Its exact derivative is what [`congestion_term`] returns.
pub struct FrozenCongestion<'a> {
    netlist: &'a Netlist,
    model: &'a Model,
    input: GraphInput,
}

impl<'a> FrozenCongestion<'a> {
    pub fn new(netlist: &'a Netlist, p: &Placement, model: &'a Model) -> Result<Self> {
        Ok(Self {
            netlist,
            model,
            input: GraphInput::build(netlist, p)?,
        })
    }

    pub fn graph(&self) -> &RouteGraph {
        &self.input.graph
    }

    fn features_at(&self, p: &Placement) -> Result<RawFeatures> {
        let geom = geom_features(self.netlist, p, &self.input.rudy)?;
        let mut f = self.input.features.clone();
        for v in 0..self.netlist.num_cells() {
            f.x_v[[v, COL_GH]] = geom.g_h[v];
            f.x_v[[v, COL_GV]] = geom.g_v[v];
        }
        Ok(f)
    }

    pub fn value(&self, p: &Placement) -> Result<f64> {
        let f = self.features_at(p)?;
        let (y, _) = self.model.forward(&self.input.graph, &f)?;
        Ok(congestion_penalty(&y, &self.netlist.movable_mask()))
    }
}
