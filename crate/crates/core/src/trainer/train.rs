// SPDX-License-Identifier: Apache-2.0

//! Full-batch Adam on the log-space squared error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Snapshot, TrainConfig};
use crate::error::{Error, Result};
use crate::gnn::{Dims, GnnParams, Model};
use crate::netlist::Netlist;
use crate::routegraph::{FeatureStats, GraphInput};

pub struct Sample {
    pub netlist_id: String,
    pub input: GraphInput,
    pub labels: Vec<f64>,
    pub movable: Vec<bool>,
}

impl Sample {
    pub fn from_snapshot(netlist: &Netlist, snap: &Snapshot) -> Result<Self> {
        if snap.labels.len() != netlist.num_cells() {
            return Err(Error::LengthMismatch {
                expected: netlist.num_cells(),
                actual: snap.labels.len(),
            });
        }
        Ok(Self {
            netlist_id: snap.netlist_id.clone(),
            input: GraphInput::build(netlist, &snap.placement)?,
            labels: snap.labels.clone(),
            movable: netlist.movable_mask(),
        })
    }
}

/// `mean_v (ln(1 + ŷ_v) − ln(1 + y_v))²` over movable cells and its
/// derivative with respect to `ŷ`.
pub fn loss_and_grad(y_hat: &[f64], labels: &[f64], movable: &[bool]) -> (f64, Vec<f64>) {
    let count = movable.iter().filter(|&&m| m).count();
    let mut grad = vec![0.0; y_hat.len()];
    if count == 0 {
        return (0.0, grad);
    }
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    for v in 0..y_hat.len() {
        if movable[v] {
            let r = y_hat[v].ln_1p() - labels[v].ln_1p();
            loss += r * r;
            grad[v] = 2.0 * r / (1.0 + y_hat[v]) * inv;
        }
    }
    (loss * inv, grad)
}

fn dataset_loss(model: &Model, samples: &[&Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let (y, _) = model.forward(&s.input.graph, &s.input.features)?;
        total += loss_and_grad(&y, &s.labels, &s.movable).0;
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

pub struct TrainResult {
    /// Parameters of the epoch with the lowest validation loss (training
    /// loss when there is no validation netlist).
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

/// Splits netlist ids into training and validation sets.
fn split_ids(samples: &[Sample], fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut ids: Vec<String> = samples.iter().map(|s| s.netlist_id.clone()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() < 2 || fraction <= 0.0 {
        return (ids, vec![]);
    }
    let n_val = ((fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let mut shuffled = ids;
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = shuffled.split_off(shuffled.len() - n_val);
    shuffled.sort();
    val.sort();
    (shuffled, val)
}

pub fn train(samples: &[Sample], cfg: &TrainConfig, dims: Dims) -> Result<TrainResult> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train_ids, val_ids) = split_ids(samples, cfg.val_fraction, cfg.seed);
    let tr: Vec<&Sample> = samples.iter().filter(|s| train_ids.contains(&s.netlist_id)).collect();
    let va: Vec<&Sample> = samples.iter().filter(|s| val_ids.contains(&s.netlist_id)).collect();
    let raw: Vec<_> = tr.iter().map(|s| &s.input.features).collect();
    let stats = FeatureStats::fit(&raw);
    let mut model = Model::new(GnnParams::init(dims, cfg.seed), stats);

    let np = model.params().theta.len();
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
    let mut t = 0i32;
    let mut lr = cfg.lr;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        for _ in 0..cfg.steps_per_epoch {
            let mut grad = vec![0.0; np];
            for s in &tr {
                let (y, acts) = model.forward(&s.input.graph, &s.input.features)?;
                let (loss, gout) = loss_and_grad(&y, &s.labels, &s.movable);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch });
                }
                let g = model.backward(&acts, &gout)?;
                for (a, b) in grad.iter_mut().zip(&g.theta) {
                    *a += b / tr.len() as f64;
                }
            }
            t += 1;
            let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
            let theta = model.theta_mut();
            for k in 0..np {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
                let step = (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                theta[k] -= lr * (step + cfg.weight_decay * theta[k]);
            }
        }
        let train_loss = dataset_loss(&model, &tr)?;
        let val_loss = if va.is_empty() {
            None
        } else {
            Some(dataset_loss(&model, &va)?)
        };
        let score = val_loss.unwrap_or(train_loss);
        if !score.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log::debug!("epoch {epoch}: lr {lr:.3e} train {train_loss:.6} val {val_loss:?}");
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        });
        if best.as_ref().is_none_or(|b| score < b.1) {
            best = Some((epoch, score, model.params().theta.clone()));
        }
        lr *= 1.0 - cfg.lr_decay;
    }
    let (best_epoch, best_loss, theta) = best.expect("at least one epoch");
    model.set_theta(&theta);
    Ok(TrainResult {
        model,
        history,
        best_epoch,
        best_loss,
        train_ids,
        val_ids,
    })
}

/// Loss of `model` on `samples`, as recorded in the training history.
pub fn evaluate_loss(model: &Model, samples: &[Sample]) -> Result<f64> {
    let refs: Vec<&Sample> = samples.iter().collect();
    dataset_loss(model, &refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{load_checkpoint, save_checkpoint};
    use crate::netlist::{generate_synthetic, SyntheticSpec};
    use crate::placer::PlacerConfig;
    use crate::trainer::collect_snapshots;

    fn dataset(seeds: &[u64], cells: usize) -> Vec<Sample> {
        let mut out = vec![];
        for &seed in seeds {
            let nl = generate_synthetic(&SyntheticSpec {
                cell_count: cells,
                net_count: cells + cells / 25,
                seed,
                ..SyntheticSpec::default()
            })
            .unwrap();
            let (snaps, _) = collect_snapshots(&nl, &format!("n{seed}"), &PlacerConfig::default()).unwrap();
            for s in snaps.iter().step_by(3) {
                out.push(Sample::from_snapshot(&nl, s).unwrap());
            }
        }
        out
    }

    #[test]
    fn loss_gradient_matches_differences() {
        let y = [0.3, 2.0, 0.0, 5.0];
        let l = [1.0, 0.0, 0.0, 4.0];
        let mask = [true, true, false, true];
        let (_, g) = loss_and_grad(&y, &l, &mask);
        for k in 0..4 {
            let mut a = y;
            a[k] += 1e-6;
            let mut b = y;
            b[k] -= 1e-6;
            let fd = (loss_and_grad(&a, &l, &mask).0 - loss_and_grad(&b, &l, &mask).0) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8);
        }
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let data = dataset(&[1], 60);
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        let res = train(&data, &cfg, Dims::default()).unwrap();
        assert_eq!(res.model.params().theta, GnnParams::init(Dims::default(), cfg.seed).theta);
    }

    #[test]
    fn zero_labels_are_learned() {
        let mut data = dataset(&[2], 100);
        for s in &mut data {
            s.labels.iter_mut().for_each(|y| *y = 0.0);
        }
        let cfg = TrainConfig {
            lr: 2e-3,
            epochs: 100,
            ..TrainConfig::default()
        };
        let res = train(&data, &cfg, Dims::default()).unwrap();
        let s = &data[0];
        let (y, _) = res.model.forward(&s.input.graph, &s.input.features).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(mean < 0.05, "mean prediction {mean}");
    }

    #[test]
    fn training_is_deterministic_and_reload_reproduces_best_loss() {
        let data = dataset(&[3, 4, 5], 60);
        let cfg = TrainConfig {
            epochs: 4,
            steps_per_epoch: 2,
            seed: 8,
            ..TrainConfig::default()
        };
        let a = train(&data, &cfg, Dims::default()).unwrap();
        let b = train(&data, &cfg, Dims::default()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.val_ids.len(), 1);
        assert!(!a.train_ids.contains(&a.val_ids[0]));
        let reloaded = load_checkpoint(&save_checkpoint(&a.model)).unwrap();
        let val: Vec<Sample> = data.into_iter().filter(|s| a.val_ids.contains(&s.netlist_id)).collect();
        let loss = evaluate_loss(&reloaded, &val).unwrap();
        assert!((loss - a.best_loss).abs() <= 1e-12, "{loss} vs {}", a.best_loss);
        assert_eq!(a.history[a.best_epoch].val_loss, Some(a.best_loss));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(train(&[], &TrainConfig::default(), Dims::default()), Err(Error::EmptyDataset)));
    }
}
