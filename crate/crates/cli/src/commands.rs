// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use routeplace::gnn::{load_checkpoint, save_checkpoint, Dims, Model};
use routeplace::grid::Grid2;
use routeplace::netlist::{
    generate_synthetic, parse_netlist, read_placement, write_netlist, write_placement, Netlist, Placement,
    SyntheticSpec,
};
use routeplace::placer::{self, trace_to_csv, PlacerConfig};
use routeplace::report::{comparison_report, heatmap_ppm};
use routeplace::routegraph::GraphInput;
use routeplace::router::{cell_labels, overflow_metrics, route as route_placement, CongestionMap};
use routeplace::trainer::{self, collect_snapshots, dataset_files, eval_stats, labels_to_text, parse_labels, Sample};

use crate::io::{manifest_path, Manifest};
use crate::{
    CliError, CollectArgs, EvalArgs, GenArgs, PlaceArgs, PredictArgs, ReportArgs, RouteArgs, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn load_netlist(m: &mut Manifest, path: &Path) -> Result<Netlist> {
    Ok(parse_netlist(&m.input_text(path)?)?)
}

fn load_placement(m: &mut Manifest, path: &Path, nl: &Netlist) -> Result<Placement> {
    Ok(read_placement(&m.input_text(path)?, Some(nl.num_cells()))?)
}

fn load_model(m: &mut Manifest, path: &Path) -> Result<Model> {
    Ok(load_checkpoint(&m.input(path)?)?)
}

pub fn gen(a: GenArgs) -> Result<()> {
    let mut m = Manifest::new("gen", Some(a.seed));
    let mut spec = match &a.spec {
        Some(p) => SyntheticSpec::parse(&m.input_text(p)?)?,
        None => SyntheticSpec::default(),
    };
    spec.seed = a.seed;
    m.config(spec.to_text());
    let nl = generate_synthetic(&spec)?;
    log::info!("generated {} cells, {} nets, {} pins", nl.num_cells(), nl.num_nets(), nl.num_pins());
    m.output(&a.output, write_netlist(&nl).as_bytes())?;
    m.finish(&manifest_path(&a.output))
}

pub fn route(a: RouteArgs) -> Result<()> {
    let mut m = Manifest::new("route", None);
    let nl = load_netlist(&mut m, &a.netlist)?;
    let p = load_placement(&mut m, &a.placement, &nl)?;
    let map = route_placement(&nl, &p)?;
    let r = overflow_metrics(&map);
    println!(
        "TOF {} MOF {} H-CR {:.4} V-CR {:.4} WL {}",
        r.tof,
        r.mof,
        r.h_cr,
        r.v_cr,
        map.wirelength(&nl.geometry())
    );
    m.output(&a.output, map.to_text().as_bytes())?;
    if let Some(path) = &a.labels {
        let labels = cell_labels(&nl, &p, &r.of_map);
        m.output(path, labels_to_text(&labels).as_bytes())?;
    }
    m.finish(&manifest_path(&a.output))
}

fn placer_config(m: &mut Manifest, path: Option<&PathBuf>) -> Result<PlacerConfig> {
    Ok(match path {
        Some(p) => PlacerConfig::parse(&m.input_text(p)?)?,
        None => PlacerConfig::default(),
    })
}

pub fn collect(a: CollectArgs) -> Result<()> {
    let mut m = Manifest::new("collect", Some(a.seed));
    let nl = load_netlist(&mut m, &a.netlist)?;
    let mut cfg = placer_config(&mut m, a.config.as_ref())?;
    cfg.seed = a.seed;
    m.config(cfg.to_text());
    let id = match a.id {
        Some(id) => id,
        None => a
            .netlist
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "netlist".into()),
    };
    if id.is_empty() || id.contains(char::is_whitespace) {
        return Err(CliError::Usage(format!("netlist id `{id}` must be non-empty without whitespace")));
    }
    let (snaps, trace) = collect_snapshots(&nl, &id, &cfg)?;
    log::info!("{id}: {} snapshots from {} iterations", snaps.len(), trace.len());
    for (rel, text) in dataset_files(&nl, &snaps) {
        m.output(&a.output.join(rel), text.as_bytes())?;
    }
    m.output(&a.output.join("trace.csv"), trace_to_csv(&trace).as_bytes())?;
    m.finish(&a.output.join("manifest.json"))
}

/// Dataset directories under `root`: itself if it holds `meta.txt`, otherwise
/// its immediate subdirectories that do, in name order.
fn dataset_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("meta.txt").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries =
        std::fs::read_dir(root).map_err(|e| CliError::Io(format!("cannot read dataset dir {}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.txt").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Io(format!("{} holds no dataset (no meta.txt found)", root.display())));
    }
    Ok(dirs)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut m = Manifest::new("train", Some(a.seed));
    let mut cfg = match &a.config {
        Some(p) => trainer::TrainConfig::parse(&m.input_text(p)?)?,
        None => trainer::TrainConfig::default(),
    };
    cfg.seed = a.seed;
    m.config(cfg.to_text());
    let mut samples = vec![];
    for root in &a.data {
        for dir in dataset_dirs(root)? {
            // hash the files the dataset loader reads
            m.input(&dir.join("netlist.txt"))?;
            m.input(&dir.join("meta.txt"))?;
            let (nl, snaps) = trainer::load_dataset(&dir)?;
            for (k, s) in snaps.iter().enumerate() {
                for f in ["placement.pl", "map.cg", "labels.txt"] {
                    m.input(&dir.join(format!("snap_{k}")).join(f))?;
                }
                samples.push(Sample::from_snapshot(&nl, s)?);
            }
        }
    }
    log::info!("training on {} samples", samples.len());
    let res = trainer::train(&samples, &cfg, Dims::default())?;
    println!(
        "best epoch {} loss {:.6} (train {:?}, validation {:?})",
        res.best_epoch, res.best_loss, res.train_ids, res.val_ids
    );
    m.output(&a.output, &save_checkpoint(&res.model))?;
    if let Some(path) = &a.history {
        let mut csv = String::from("epoch,lr,train_loss,val_loss\n");
        for h in &res.history {
            let val = h.val_loss.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(csv, "{},{},{},{}", h.epoch, h.lr, h.train_loss, val);
        }
        m.output(path, csv.as_bytes())?;
    }
    m.finish(&manifest_path(&a.output))
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let mut m = Manifest::new("predict", None);
    let model = load_model(&mut m, &a.model)?;
    let nl = load_netlist(&mut m, &a.netlist)?;
    let p = load_placement(&mut m, &a.placement, &nl)?;
    let input = GraphInput::build(&nl, &p)?;
    let (y, _) = model.forward(&input.graph, &input.features)?;
    let g = &input.graph;
    let mut out = format!("pred {} {} {}\n", nl.num_cells(), g.n, g.m);
    for (v, yv) in y.iter().enumerate() {
        let c = g.cell_grid[v];
        let _ = writeln!(out, "{v} {yv} {} {} {}", c / g.m, c % g.m, u8::from(!nl.cells[v].fixed));
    }
    m.output(&a.output, out.as_bytes())?;
    m.finish(&manifest_path(&a.output))
}

struct Prediction {
    n: usize,
    m: usize,
    y: Vec<f64>,
    grid: Vec<(usize, usize)>,
    movable: Vec<bool>,
}

fn parse_prediction(text: &str) -> Result<Prediction> {
    let bad = |line: usize, msg: &str| CliError::Io(format!("prediction file line {}: {msg}", line + 1));
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let dims: Vec<usize> = h.iter().skip(1).filter_map(|t| t.parse().ok()).collect();
    if h.first() != Some(&"pred") || dims.len() != 3 {
        return Err(bad(0, "expected `pred <cells> <n> <m>`"));
    }
    let (cells, n, m) = (dims[0], dims[1], dims[2]);
    let mut p = Prediction {
        n,
        m,
        y: Vec::with_capacity(cells),
        grid: Vec::with_capacity(cells),
        movable: Vec::with_capacity(cells),
    };
    for (ln, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 5 || t[0].parse::<usize>().ok() != Some(p.y.len()) {
            return Err(bad(ln, "expected `<cell> <prediction> <i> <j> <movable>` in cell order"));
        }
        let y: f64 = t[1].parse().map_err(|_| bad(ln, "bad prediction"))?;
        let i: usize = t[2].parse().map_err(|_| bad(ln, "bad grid column"))?;
        let j: usize = t[3].parse().map_err(|_| bad(ln, "bad grid row"))?;
        if i >= n || j >= m {
            return Err(bad(ln, "grid index out of range"));
        }
        p.y.push(y);
        p.grid.push((i, j));
        p.movable.push(t[4] == "1");
    }
    if p.y.len() != cells {
        return Err(bad(0, "cell count does not match the header"));
    }
    Ok(p)
}

/// Mean of `values` over the cells of each grid; empty grids get 0.
fn group_mean(values: &[f64], p: &Prediction) -> Grid2<f64> {
    let mut sum = Grid2::filled(p.n, p.m, 0.0);
    let mut count = Grid2::filled(p.n, p.m, 0usize);
    for (v, &(i, j)) in p.grid.iter().enumerate() {
        *sum.get_mut(i, j) += values[v];
        *count.get_mut(i, j) += 1;
    }
    for (s, &c) in sum.as_mut_slice().iter_mut().zip(count.as_slice()) {
        if c > 0 {
            *s /= c as f64;
        }
    }
    sum
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut m = Manifest::new("eval", None);
    let pred = parse_prediction(&m.input_text(&a.pred)?)?;
    let labels = parse_labels(&m.input_text(&a.labels)?)?;
    if labels.len() != pred.y.len() {
        return Err(routeplace::error::Error::LengthMismatch {
            expected: pred.y.len(),
            actual: labels.len(),
        }
        .into());
    }
    let pick = |vals: &[f64]| -> Vec<f64> { vals.iter().zip(&pred.movable).filter(|(_, &mv)| mv).map(|(v, _)| *v).collect() };
    let s = eval_stats(&pick(&pred.y), &pick(&labels), &group_mean(&pred.y, &pred), &group_mean(&labels, &pred))?;
    let mut out = String::new();
    let _ = writeln!(out, "cells {}", pred.movable.iter().filter(|&&mv| mv).count());
    let _ = writeln!(out, "nrmse {}", s.nrmse);
    let _ = writeln!(out, "nrmse_degenerate {}", s.nrmse_degenerate);
    let _ = writeln!(out, "pearson {}", s.pearson);
    let _ = writeln!(out, "spearman {}", s.spearman);
    let _ = writeln!(out, "kendall {}", s.kendall);
    let _ = writeln!(out, "ssim {}", s.ssim);
    print!("{out}");
    m.output(&a.report, out.as_bytes())?;
    m.finish(&manifest_path(&a.report))
}

pub fn place(a: PlaceArgs) -> Result<()> {
    let mut m = Manifest::new("place", Some(a.seed));
    let nl = load_netlist(&mut m, &a.netlist)?;
    let mut cfg = placer_config(&mut m, a.config.as_ref())?;
    cfg.seed = a.seed;
    if let Some(eta) = a.eta {
        cfg.eta = eta;
    }
    if let Some(t) = a.eta_start_eo {
        cfg.eta_start_eo = Some(t);
    }
    if a.inflate {
        cfg.inflation.enabled = true;
    }
    if let Some(e) = a.exponent {
        cfg.inflation.exponent = e;
    }
    if let Some(k) = a.num_adjust {
        cfg.inflation.num_adjust = k;
    }
    if let Some(f) = a.feedback {
        cfg.inflation.feedback = f;
    }
    m.config(cfg.to_text());
    let model = match &a.model {
        Some(p) => Some(load_model(&mut m, p)?),
        None => None,
    };
    let res = match placer::place(&nl, &cfg, model.as_ref(), |_, _, _| {}) {
        Err(routeplace::error::Error::MissingModel) => {
            return Err(CliError::Usage("--model is required with --eta > 0 or --feedback gnn".into()))
        }
        r => r?,
    };
    if let Some(last) = res.trace.last() {
        log::info!(
            "{} iterations, HPWL {:.1}, EO {:.4}, {} inflation rounds",
            res.trace.len(),
            last.hpwl,
            last.eo,
            res.inflation_rounds
        );
    }
    if !res.converged {
        log::warn!("stopped at the iteration limit before reaching the target overflow");
    }
    m.output(&a.output, write_placement(&res.placement).as_bytes())?;
    if let Some(path) = &a.trace {
        m.output(path, trace_to_csv(&res.trace).as_bytes())?;
    }
    m.finish(&manifest_path(&a.output))
}

/// Last row of a trace CSV as `(iterations, header, last row)`.
fn trace_summary(text: &str) -> Option<(usize, String, String)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next()?.to_string();
    let rows: Vec<&str> = lines.collect();
    Some((rows.len(), header, rows.last()?.to_string()))
}

pub fn report(a: ReportArgs) -> Result<()> {
    let mut m = Manifest::new("report", None);
    let mut reports = vec![];
    for (name, path) in &a.maps {
        let map = CongestionMap::parse(&m.input_text(path)?)?;
        reports.push((name.as_str(), overflow_metrics(&map)));
    }
    let runs: Vec<(&str, &_)> = reports.iter().map(|(n, r)| (*n, r)).collect();
    let mut out = comparison_report(&runs)?;
    for (name, path) in &a.traces {
        let text = m.input_text(path)?;
        let (iters, header, last) =
            trace_summary(&text).ok_or_else(|| CliError::Io(format!("{} is an empty trace", path.display())))?;
        let _ = write!(out, "\ntrace {name}: {iters} iterations\n  {header}\n  {last}\n");
    }
    m.output(&a.output, out.as_bytes())?;
    if let Some(dir) = &a.heatmap {
        // one colour scale across all maps so they compare by eye
        let top = reports
            .iter()
            .flat_map(|(_, r)| r.of_map.as_slice().iter().copied())
            .fold(0.0, f64::max);
        for (name, r) in &reports {
            m.output(&dir.join(format!("{name}.ppm")), heatmap_ppm(&r.of_map, Some(top)).as_bytes())?;
        }
    }
    m.finish(&manifest_path(&a.output))
}
