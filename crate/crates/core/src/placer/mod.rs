// SPDX-License-Identifier: Apache-2.0

//! Analytical global placement: `WL + λ_D·D + η·L` minimised with NAG.

mod congestion;
mod density;
mod inflation;
mod nag;
mod wirelength;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use congestion::{congestion_term, CongestionEval, FrozenCongestion};
pub use density::{DensityEval, DensitySolver};
pub use inflation::{
    apply_ratios, gnn_congestion, inflation_ratio, inflation_ratios, recenter, router_congestion, Feedback,
};
pub use nag::{Nag, Objective, StepInfo};
pub use wirelength::{wa_axis, wirelength};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::gnn::Model;
use crate::netlist::{hpwl, Netlist, Placement};
use crate::router::electric_overflow;

#[derive(Debug, Clone, PartialEq)]
pub struct InflationConfig {
    pub enabled: bool,
    pub exponent: f64,
    pub num_adjust: usize,
    /// Inflate when the electric overflow falls below this value.
    pub trigger_eo: f64,
    pub feedback: Feedback,
    /// Largest total area increase per round as a fraction of free area.
    pub area_budget: f64,
}

impl Default for InflationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            exponent: 1.0,
            num_adjust: 1,
            trigger_eo: 0.2,
            feedback: Feedback::Router,
            area_budget: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacerConfig {
    /// Wirelength smoothing at EO = 1, in routing-grid pitches.
    pub gamma_hi: f64,
    /// Wirelength smoothing at EO = `stop_eo`, in pitches.
    pub gamma_lo: f64,
    /// Initial density weight; 0 selects it from the gradient norms.
    pub lambda_d: f64,
    /// Automatic `λ_D = lambda_scale · |∇WL|₁ / |∇D|₁`.
    pub lambda_scale: f64,
    /// HPWL change that cancels one 1.05 factor of the density weight update.
    pub hpwl_ref: f64,
    pub eta: f64,
    /// Enable the congestion term only once EO drops below this.
    pub eta_start_eo: Option<f64>,
    pub target_density: f64,
    pub max_iters: usize,
    pub stop_eo: f64,
    pub beta: f64,
    pub max_halvings: usize,
    pub step_growth: f64,
    /// Largest displacement of the first step, in pitches.
    pub initial_move: f64,
    /// Jitter of the initial placement as a fraction of the region size.
    pub jitter: f64,
    pub inflation: InflationConfig,
    pub seed: u64,
}

impl Default for PlacerConfig {
    fn default() -> Self {
        Self {
            gamma_hi: 5.0,
            gamma_lo: 0.1,
            lambda_d: 0.0,
            lambda_scale: 1e-3,
            hpwl_ref: 350_000.0,
            eta: 0.0,
            eta_start_eo: None,
            target_density: 1.0,
            max_iters: 2000,
            stop_eo: 0.1,
            beta: 0.9,
            max_halvings: 10,
            step_growth: 1.05,
            initial_move: 0.1,
            jitter: 0.01,
            inflation: InflationConfig::default(),
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "gamma_hi",
    "gamma_lo",
    "lambda_d",
    "lambda_scale",
    "hpwl_ref",
    "eta",
    "eta_start_eo",
    "target_density",
    "max_iters",
    "stop_eo",
    "beta",
    "max_halvings",
    "step_growth",
    "initial_move",
    "jitter",
    "inflate",
    "exponent",
    "num_adjust",
    "trigger_eo",
    "feedback",
    "area_budget",
    "seed",
];

impl PlacerConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_known(KEYS)?;
        let mut c = Self::default();
        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = kv.get($key)? {
                    $field = v;
                }
            };
        }
        set!(c.gamma_hi, "gamma_hi");
        set!(c.gamma_lo, "gamma_lo");
        set!(c.lambda_d, "lambda_d");
        set!(c.lambda_scale, "lambda_scale");
        set!(c.hpwl_ref, "hpwl_ref");
        set!(c.eta, "eta");
        match kv.get::<String>("eta_start_eo")?.as_deref() {
            None | Some("none") => {}
            Some(_) => c.eta_start_eo = kv.get("eta_start_eo")?,
        }
        set!(c.target_density, "target_density");
        set!(c.max_iters, "max_iters");
        set!(c.stop_eo, "stop_eo");
        set!(c.beta, "beta");
        set!(c.max_halvings, "max_halvings");
        set!(c.step_growth, "step_growth");
        set!(c.initial_move, "initial_move");
        set!(c.jitter, "jitter");
        if let Some(b) = kv.get_bool("inflate")? {
            c.inflation.enabled = b;
        }
        set!(c.inflation.exponent, "exponent");
        set!(c.inflation.num_adjust, "num_adjust");
        set!(c.inflation.trigger_eo, "trigger_eo");
        if let Some(f) = kv.get::<String>("feedback")? {
            c.inflation.feedback = f.parse().map_err(Error::Config)?;
        }
        set!(c.inflation.area_budget, "area_budget");
        set!(c.seed, "seed");
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let eta_start = self.eta_start_eo.map_or("none".to_string(), |v| v.to_string());
        format!(
            "gamma_hi = {}\ngamma_lo = {}\nlambda_d = {}\nlambda_scale = {}\nhpwl_ref = {}\neta = {}\n\
             eta_start_eo = {}\ntarget_density = {}\nmax_iters = {}\nstop_eo = {}\nbeta = {}\n\
             max_halvings = {}\nstep_growth = {}\ninitial_move = {}\njitter = {}\ninflate = {}\n\
             exponent = {}\nnum_adjust = {}\ntrigger_eo = {}\nfeedback = {}\narea_budget = {}\nseed = {}\n",
            self.gamma_hi,
            self.gamma_lo,
            self.lambda_d,
            self.lambda_scale,
            self.hpwl_ref,
            self.eta,
            eta_start,
            self.target_density,
            self.max_iters,
            self.stop_eo,
            self.beta,
            self.max_halvings,
            self.step_growth,
            self.initial_move,
            self.jitter,
            self.inflation.enabled,
            self.inflation.exponent,
            self.inflation.num_adjust,
            self.inflation.trigger_eo,
            self.inflation.feedback,
            self.inflation.area_budget,
            self.seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma_hi > 0.0 && self.gamma_lo > 0.0) {
            return bad("gamma_hi and gamma_lo must be positive");
        }
        if !(self.lambda_d >= 0.0 && self.lambda_scale > 0.0) {
            return bad("lambda_d must be >= 0 and lambda_scale > 0");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be finite and >= 0");
        }
        if !(self.hpwl_ref > 0.0 && self.target_density > 0.0) {
            return bad("hpwl_ref and target_density must be positive");
        }
        if !(0.0..1.0).contains(&self.stop_eo) {
            return bad("stop_eo must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta) || self.step_growth < 1.0 || self.initial_move <= 0.0 {
            return bad("beta must lie in [0, 1), step_growth >= 1, initial_move > 0");
        }
        if self.jitter < 0.0 {
            return bad("jitter must be >= 0");
        }
        if self.inflation.enabled && (self.inflation.num_adjust == 0 || self.inflation.area_budget < 0.0) {
            return bad("inflation needs num_adjust >= 1 and area_budget >= 0");
        }
        Ok(())
    }
}

/// Density weight multiplier after an iteration that changed HPWL by
/// `delta_hpwl`.
pub fn lambda_factor(delta_hpwl: f64, epoch: usize, hpwl_ref: f64) -> f64 {
    if delta_hpwl < 0.0 {
        1.05 * 0.999f64.powi(epoch.min(i32::MAX as usize) as i32).max(0.98)
    } else {
        1.05 * 1.05f64.powf(-delta_hpwl / hpwl_ref)
    }
}

pub fn lambda_update(lambda: f64, delta_hpwl: f64, epoch: usize, hpwl_ref: f64) -> f64 {
    lambda * lambda_factor(delta_hpwl, epoch, hpwl_ref)
}

/// Geometric interpolation from `hi` at EO = 1 to `lo` at EO = `stop_eo`.
pub fn gamma_schedule(eo: f64, stop_eo: f64, hi: f64, lo: f64) -> f64 {
    let t = ((1.0 - eo) / (1.0 - stop_eo)).clamp(0.0, 1.0);
    hi * (lo / hi).powf(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub hpwl: f64,
    pub eo: f64,
    pub wl: f64,
    pub density: f64,
    pub congestion: f64,
    pub lambda_d: f64,
    pub gamma: f64,
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("iter,hpwl,eo,wl,density,congestion,lambda_d,gamma\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iter, r.hpwl, r.eo, r.wl, r.density, r.congestion, r.lambda_d, r.gamma
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct PlaceResult {
    pub placement: Placement,
    pub trace: Vec<TraceRow>,
    pub inflation_rounds: usize,
    pub converged: bool,
}

/// Loss terms at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Terms {
    pub wl: f64,
    pub density: f64,
    pub congestion: f64,
}

/// The placement objective over `[x_0..x_N, y_0..y_N]` cell origins.
pub struct PlaceObjective<'a> {
    pub netlist: &'a Netlist,
    pub solver: DensitySolver,
    pub model: Option<&'a Model>,
    pub gamma: f64,
    pub lambda_d: f64,
    /// 0 disables the congestion term.
    pub eta: f64,
    /// Terms of the most recent evaluation.
    pub last: Terms,
}

impl<'a> PlaceObjective<'a> {
    pub fn new(netlist: &'a Netlist, model: Option<&'a Model>) -> Self {
        Self {
            netlist,
            solver: DensitySolver::new(netlist.geometry()),
            model,
            gamma: 1.0,
            lambda_d: 0.0,
            eta: 0.0,
            last: Terms::default(),
        }
    }

    fn placement(&self, x: &[f64]) -> Placement {
        let n = self.netlist.num_cells();
        Placement {
            x: x[..n].to_vec(),
            y: x[n..].to_vec(),
        }
    }

    /// Each term's value and gradient, unweighted.
    pub fn terms(&self, x: &[f64], want_grad: bool) -> Result<(Terms, [Vec<f64>; 3])> {
        let p = self.placement(x);
        let n = self.netlist.num_cells();
        let (wl, wgx, wgy) = wirelength(self.netlist, &p, self.gamma);
        let d = self.solver.eval(self.netlist, &p);
        let mut t = Terms {
            wl,
            density: d.value,
            congestion: 0.0,
        };
        let mut gc = vec![0.0; 2 * n];
        if self.eta > 0.0 {
            let model = self.model.ok_or(Error::MissingModel)?;
            let c = congestion_term(self.netlist, &p, model, want_grad)?;
            t.congestion = c.value;
            if want_grad {
                gc[..n].copy_from_slice(&c.gx);
                gc[n..].copy_from_slice(&c.gy);
            }
        }
        let cat = |a: Vec<f64>, b: Vec<f64>| [a, b].concat();
        Ok((t, [cat(wgx, wgy), cat(d.gx, d.gy), gc]))
    }

    fn total(&self, t: &Terms) -> f64 {
        t.wl + self.lambda_d * t.density + self.eta * t.congestion
    }
}

impl Objective for PlaceObjective<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        let p = self.placement(x);
        let wl = wirelength(self.netlist, &p, self.gamma).0;
        let density = self.solver.eval(self.netlist, &p).value;
        let congestion = if self.eta > 0.0 {
            let model = self.model.ok_or(Error::MissingModel)?;
            congestion_term(self.netlist, &p, model, false)?.value
        } else {
            0.0
        };
        self.last = Terms {
            wl,
            density,
            congestion,
        };
        Ok(self.total(&self.last))
    }

    fn value_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (t, [gw, gd, gc]) = self.terms(x, true)?;
        self.last = t;
        let g = (0..x.len()).map(|k| gw[k] + self.lambda_d * gd[k] + self.eta * gc[k]).collect();
        Ok((self.total(&t), g))
    }

    fn project(&self, x: &mut [f64]) {
        let n = self.netlist.num_cells();
        let r = &self.netlist.region;
        for (v, c) in self.netlist.cells.iter().enumerate() {
            if let (true, Some((ox, oy))) = (c.fixed, c.origin) {
                x[v] = ox;
                x[n + v] = oy;
            } else {
                x[v] = x[v].clamp(r.x0, (r.x1 - c.width).max(r.x0));
                x[n + v] = x[n + v].clamp(r.y0, (r.y1 - c.height).max(r.y0));
            }
        }
    }
}

/// Movable cells centred on the mean fixed-pin location (the region centre
/// without fixed pins) plus uniform jitter of `jitter` times the region size.
pub fn initial_placement(netlist: &Netlist, jitter: f64, seed: u64) -> Placement {
    let r = &netlist.region;
    let mut p = Placement::zeros(netlist.num_cells());
    for (v, c) in netlist.cells.iter().enumerate() {
        if let Some((x, y)) = c.origin.filter(|_| c.fixed) {
            p.x[v] = x;
            p.y[v] = y;
        }
    }
    let (mut sx, mut sy, mut k) = (0.0, 0.0, 0usize);
    for pin in 0..netlist.num_pins() {
        if netlist.cells[netlist.pins[pin].cell].fixed {
            let (x, y) = netlist.pin_position(pin, &p);
            sx += x;
            sy += y;
            k += 1;
        }
    }
    let (cx, cy) = if k > 0 {
        (sx / k as f64, sy / k as f64)
    } else {
        (0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (jx, jy) = (jitter * r.width(), jitter * r.height());
    for (v, c) in netlist.cells.iter().enumerate() {
        if c.fixed {
            continue;
        }
        let (dx, dy) = if jitter > 0.0 {
            (rng.gen_range(-0.5..=0.5) * jx, rng.gen_range(-0.5..=0.5) * jy)
        } else {
            (0.0, 0.0)
        };
        p.x[v] = (cx + dx - 0.5 * c.width).clamp(r.x0, (r.x1 - c.width).max(r.x0));
        p.y[v] = (cy + dy - 0.5 * c.height).clamp(r.y0, (r.y1 - c.height).max(r.y0));
    }
    p
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Runs global placement. `observe` sees the iteration, the placement at
/// original cell sizes and its electric overflow after every step.
pub fn place(
    netlist: &Netlist,
    cfg: &PlacerConfig,
    model: Option<&Model>,
    mut observe: impl FnMut(usize, &Placement, f64),
) -> Result<PlaceResult> {
    cfg.validate()?;
    netlist.validate()?;
    let needs_model = cfg.eta > 0.0 || (cfg.inflation.enabled && cfg.inflation.feedback == Feedback::Gnn);
    if needs_model && model.is_none() {
        return Err(Error::MissingModel);
    }
    let n = netlist.num_cells();
    let pitch = netlist.geometry().pitch();
    let p0 = initial_placement(netlist, cfg.jitter, cfg.seed);
    let mut x = [p0.x.clone(), p0.y.clone()].concat();

    let mut work = netlist.clone();
    let mut eo = electric_overflow(&work, &p0, cfg.target_density);
    let mut gamma = pitch * gamma_schedule(eo, cfg.stop_eo, cfg.gamma_hi, cfg.gamma_lo);
    let congestion_on = |eo: f64| cfg.eta > 0.0 && cfg.eta_start_eo.is_none_or(|t| eo < t);

    let (lambda0, step0) = {
        let mut obj = PlaceObjective::new(&work, model);
        obj.gamma = gamma;
        obj.project(&mut x);
        let (_, [gw, gd, _]) = obj.terms(&x, true)?;
        let lambda = if cfg.lambda_d > 0.0 {
            cfg.lambda_d
        } else if l1(&gd) > 0.0 {
            cfg.lambda_scale * l1(&gw) / l1(&gd)
        } else {
            1.0
        };
        obj.lambda_d = lambda;
        obj.eta = if congestion_on(eo) { cfg.eta } else { 0.0 };
        let (_, g) = obj.value_grad(&x)?;
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let step = if gmax > 0.0 { cfg.initial_move * pitch / gmax } else { 1.0 };
        (lambda, step)
    };
    let mut lambda = lambda0;
    let mut nag = Nag::new(2 * n, cfg.beta, step0);
    nag.max_halvings = cfg.max_halvings;
    nag.growth = cfg.step_growth;

    let mut trace = Vec::new();
    let mut hpwl_prev = hpwl(&work, &recenter(netlist, &work, &x));
    let mut rounds = 0;
    let mut converged = false;
    for iter in 0..cfg.max_iters {
        let mut obj = PlaceObjective::new(&work, model);
        obj.gamma = gamma;
        obj.lambda_d = lambda;
        obj.eta = if congestion_on(eo) { cfg.eta } else { 0.0 };
        nag.step(&mut x, &mut obj, iter)?;
        let terms = obj.last;

        let current = recenter(&work, &work, &x);
        eo = electric_overflow(&work, &current, cfg.target_density);
        let restored = recenter(&work, netlist, &x);
        let h = hpwl(netlist, &restored);
        trace.push(TraceRow {
            iter,
            hpwl: h,
            eo,
            wl: terms.wl,
            density: terms.density,
            congestion: terms.congestion,
            lambda_d: lambda,
            gamma,
        });
        observe(iter, &restored, electric_overflow(netlist, &restored, cfg.target_density));
        if !eo.is_finite() || !h.is_finite() {
            return Err(Error::Diverged { iter });
        }
        lambda = lambda_update(lambda, h - hpwl_prev, iter, cfg.hpwl_ref);
        hpwl_prev = h;
        gamma = pitch * gamma_schedule(eo, cfg.stop_eo, cfg.gamma_hi, cfg.gamma_lo);

        let inf = &cfg.inflation;
        if inf.enabled && rounds < inf.num_adjust && eo < inf.trigger_eo {
            let cong = match inf.feedback {
                Feedback::Router => router_congestion(netlist, &restored)?,
                Feedback::Gnn => gnn_congestion(netlist, &restored, model.ok_or(Error::MissingModel)?)?,
            };
            let ratios = inflation_ratios(netlist, &work, &restored, &cong, inf.exponent, inf.area_budget);
            apply_ratios(&mut work, &mut x, &ratios);
            nag.reset_momentum();
            rounds += 1;
            let grown = ratios.iter().filter(|&&r| r > 1.0).count();
            log::info!("inflation round {rounds} at iter {iter}: {grown} cells grown");
            eo = electric_overflow(&work, &recenter(&work, &work, &x), cfg.target_density);
            gamma = pitch * gamma_schedule(eo, cfg.stop_eo, cfg.gamma_hi, cfg.gamma_lo);
            continue;
        }
        let rounds_done = !inf.enabled || rounds >= inf.num_adjust;
        if eo <= cfg.stop_eo && rounds_done {
            converged = true;
            break;
        }
    }
    let placement = recenter(&work, netlist, &x);
    Ok(PlaceResult {
        placement,
        trace,
        inflation_rounds: rounds,
        converged,
    })
}
