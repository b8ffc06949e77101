// SPDX-License-Identifier: Apache-2.0

//! Snapshot collection, datasets, training and evaluation statistics.

mod stats;
mod train;

pub use stats::{average_ranks, eval_stats, kendall, nrmse, pearson, spearman, ssim, EvalStats};
pub use train::{evaluate_loss, loss_and_grad, train, EpochRecord, Sample, TrainResult};

use std::path::Path;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::netlist::{parse_netlist, read_placement, write_netlist, write_placement, Netlist, Placement};
use crate::placer::{place, PlacerConfig, TraceRow};
use crate::router::{cell_labels, electric_overflow, overflow_metrics, route, CongestionMap};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// The learning rate is multiplied by `1 − lr_decay` after every epoch.
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Full-batch Adam steps per epoch.
    pub steps_per_epoch: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            lr_decay: 0.02,
            weight_decay: 2e-4,
            epochs: 100,
            steps_per_epoch: 1,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_known(&[
            "lr",
            "lr_decay",
            "weight_decay",
            "epochs",
            "steps_per_epoch",
            "val_fraction",
            "seed",
        ])?;
        let d = Self::default();
        let c = Self {
            lr: kv.get("lr")?.unwrap_or(d.lr),
            lr_decay: kv.get("lr_decay")?.unwrap_or(d.lr_decay),
            weight_decay: kv.get("weight_decay")?.unwrap_or(d.weight_decay),
            epochs: kv.get("epochs")?.unwrap_or(d.epochs),
            steps_per_epoch: kv.get("steps_per_epoch")?.unwrap_or(d.steps_per_epoch),
            val_fraction: kv.get("val_fraction")?.unwrap_or(d.val_fraction),
            seed: kv.get("seed")?.unwrap_or(d.seed),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        format!(
            "lr = {}\nlr_decay = {}\nweight_decay = {}\nepochs = {}\nsteps_per_epoch = {}\nval_fraction = {}\nseed = {}\n",
            self.lr, self.lr_decay, self.weight_decay, self.epochs, self.steps_per_epoch, self.val_fraction, self.seed
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("lr must be finite and >= 0".into()));
        }
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Config("epochs and steps_per_epoch must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.lr_decay) || self.weight_decay < 0.0 {
            return Err(Error::Config("lr_decay must lie in [0, 1) and weight_decay >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Threshold `k` is `(80 − 5k) / 100`, evaluated from integers so every
/// threshold is the nearest double to its decimal value.
pub fn threshold(k: usize) -> Option<f64> {
    (k <= 16).then(|| (80 - 5 * k as i64) as f64 / 100.0)
}

/// Trace indices at which EO first falls to or below 0.80, 0.75, 0.70, ...
/// Each index is used once, for the lowest threshold it crosses.
pub fn snapshot_indices(eo: &[f64]) -> Vec<(usize, f64)> {
    let mut out = vec![];
    let mut k = 0;
    for (i, &e) in eo.iter().enumerate() {
        let mut hit = None;
        while let Some(t) = threshold(k) {
            if e > t {
                break;
            }
            hit = Some(t);
            k += 1;
        }
        if let Some(t) = hit {
            out.push((i, t));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub netlist_id: String,
    pub iter: usize,
    pub threshold: f64,
    pub placement: Placement,
    pub eo: f64,
    pub map: CongestionMap,
    pub labels: Vec<f64>,
}

/// Routes and labels a placement.
pub fn label_placement(netlist: &Netlist, p: &Placement) -> Result<(CongestionMap, Vec<f64>)> {
    let map = route(netlist, p)?;
    let report = overflow_metrics(&map);
    let labels = cell_labels(netlist, p, &report.of_map);
    Ok((map, labels))
}

/// Runs the placer without the congestion term and keeps the placement at
/// each first threshold crossing, routed and labelled.
pub fn collect_snapshots(
    netlist: &Netlist,
    netlist_id: &str,
    cfg: &PlacerConfig,
) -> Result<(Vec<Snapshot>, Vec<TraceRow>)> {
    let mut cfg = cfg.clone();
    cfg.eta = 0.0;
    cfg.inflation.enabled = false;
    let mut eos = vec![];
    let mut kept: Vec<(usize, Placement, f64)> = vec![];
    let mut k = 0;
    let res = place(netlist, &cfg, None, |iter, p, eo| {
        eos.push(eo);
        let mut hit = None;
        while let Some(t) = threshold(k) {
            if eo > t {
                break;
            }
            hit = Some(t);
            k += 1;
        }
        if let Some(t) = hit {
            kept.push((iter, p.clone(), t));
        }
    })?;
    debug_assert_eq!(
        snapshot_indices(&eos).iter().map(|s| s.0).collect::<Vec<_>>(),
        kept.iter().map(|s| s.0).collect::<Vec<_>>()
    );
    if kept.is_empty() {
        log::warn!("{netlist_id}: electric overflow never reached 0.8, no snapshots collected");
    }
    let mut snaps = Vec::with_capacity(kept.len());
    for (iter, placement, threshold) in kept {
        let (map, labels) = label_placement(netlist, &placement)?;
        snaps.push(Snapshot {
            netlist_id: netlist_id.to_string(),
            iter,
            threshold,
            eo: electric_overflow(netlist, &placement, cfg.target_density),
            placement,
            map,
            labels,
        });
    }
    Ok((snaps, res.trace))
}

pub fn labels_to_text(labels: &[f64]) -> String {
    let mut s = format!("labels {}\n", labels.len());
    for (v, y) in labels.iter().enumerate() {
        s.push_str(&format!("{v} {y}\n"));
    }
    s
}

pub fn parse_labels(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: &str| Error::Malformed {
        line: line + 1,
        msg: msg.into(),
    };
    let (hl, header) = lines.next().ok_or_else(|| bad(0, "empty labels file"))?;
    let n: usize = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["labels", n] => n.parse().map_err(|_| bad(hl, "bad label count"))?,
        _ => return Err(bad(hl, "expected `labels <count>`")),
    };
    let mut out = vec![f64::NAN; n];
    let mut seen = 0;
    for (ln, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        let (v, y) = match t[..] {
            [v, y] => (
                v.parse::<usize>().map_err(|_| bad(ln, "bad cell index"))?,
                y.parse::<f64>().map_err(|_| bad(ln, "bad label"))?,
            ),
            _ => return Err(bad(ln, "expected `cell label`")),
        };
        if v >= n || !out[v].is_nan() {
            return Err(bad(ln, "cell index out of range or repeated"));
        }
        out[v] = y;
        seen += 1;
    }
    if seen != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: seen,
        });
    }
    Ok(out)
}

/// Files of a dataset directory as `(relative path, contents)`, in a fixed
/// order: the netlist, `meta.txt` and one `snap_<k>/` per snapshot.
pub fn dataset_files(netlist: &Netlist, snaps: &[Snapshot]) -> Vec<(String, String)> {
    let mut meta = String::new();
    let id = snaps.first().map_or("unknown", |s| s.netlist_id.as_str());
    meta.push_str(&format!("netlist_id {id}\nsnapshots {}\n", snaps.len()));
    let mut files = vec![("netlist.txt".to_string(), write_netlist(netlist))];
    for (k, s) in snaps.iter().enumerate() {
        meta.push_str(&format!("snap_{k} iter {} threshold {} eo {}\n", s.iter, s.threshold, s.eo));
        files.push((format!("snap_{k}/placement.pl"), write_placement(&s.placement)));
        files.push((format!("snap_{k}/map.cg"), s.map.to_text()));
        files.push((format!("snap_{k}/labels.txt"), labels_to_text(&s.labels)));
    }
    files.insert(1, ("meta.txt".to_string(), meta));
    files
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Loads a dataset directory written from [`dataset_files`].
pub fn load_dataset(dir: &Path) -> Result<(Netlist, Vec<Snapshot>)> {
    let netlist = parse_netlist(&read(&dir.join("netlist.txt"))?)?;
    let meta = read(&dir.join("meta.txt"))?;
    let mut lines = meta.lines();
    let bad = |msg: &str| Error::Malformed {
        line: 0,
        msg: format!("meta.txt: {msg}"),
    };
    let id = lines
        .next()
        .and_then(|l| l.strip_prefix("netlist_id "))
        .ok_or_else(|| bad("missing netlist_id"))?
        .to_string();
    let count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("snapshots "))
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| bad("missing snapshot count"))?;
    let mut snaps = Vec::with_capacity(count);
    for k in 0..count {
        let line = lines.next().ok_or_else(|| bad("missing snapshot line"))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> { t.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(line)) };
        if t.len() != 7 || t[0] != format!("snap_{k}") {
            return Err(bad(line));
        }
        let sub = dir.join(format!("snap_{k}"));
        let placement = read_placement(&read(&sub.join("placement.pl"))?, Some(netlist.num_cells()))?;
        let map = CongestionMap::parse(&read(&sub.join("map.cg"))?)?;
        let labels = parse_labels(&read(&sub.join("labels.txt"))?)?;
        if labels.len() != netlist.num_cells() {
            return Err(Error::LengthMismatch {
                expected: netlist.num_cells(),
                actual: labels.len(),
            });
        }
        snaps.push(Snapshot {
            netlist_id: id.clone(),
            iter: num(2)? as usize,
            threshold: num(4)?,
            eo: num(6)?,
            placement,
            map,
            labels,
        });
    }
    Ok((netlist, snaps))
}
