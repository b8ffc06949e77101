// SPDX-License-Identifier: Apache-2.0

//! Prediction quality statistics.

use crate::error::{Error, Result};
use crate::grid::Grid2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    /// RMSE over the label range; `+∞` when the labels are constant and the
    /// prediction differs from them.
    pub nrmse: f64,
    /// Set when the label range is zero.
    pub nrmse_degenerate: bool,
    pub ssim: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
}

fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

pub fn nrmse(pred: &[f64], label: &[f64]) -> (f64, bool) {
    let rmse = (pred.iter().zip(label).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64).sqrt();
    let lo = label.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = label.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range > 0.0 {
        (rmse / range, false)
    } else if rmse == 0.0 {
        (0.0, true)
    } else {
        (f64::INFINITY, true)
    }
}

/// Pearson correlation; a constant input gives 1 when both vectors are
/// identical and 0 otherwise.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(a: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut ranks = vec![0.0; a.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k + 1;
        while e < idx.len() && a[idx[e]] == a[idx[k]] {
            e += 1;
        }
        let r = (k + e + 1) as f64 / 2.0;
        for &i in &idx[k..e] {
            ranks[i] = r;
        }
        k = e;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Kendall's tau-b.
pub fn kendall(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut conc, mut disc, mut tie_a, mut tie_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let (da, db) = (a[i].partial_cmp(&a[j]), b[i].partial_cmp(&b[j]));
            match (da, db) {
                (Some(std::cmp::Ordering::Equal), Some(std::cmp::Ordering::Equal)) => {}
                (Some(std::cmp::Ordering::Equal), _) => tie_a += 1,
                (_, Some(std::cmp::Ordering::Equal)) => tie_b += 1,
                (x, y) if x == y => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let na = (conc + disc + tie_b) as f64;
    let nb = (conc + disc + tie_a) as f64;
    if na == 0.0 || nb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (conc - disc) as f64 / (na * nb).sqrt()
}

/// Structural similarity with one window covering the whole map; the
/// dynamic range is the largest value in either map.
pub fn ssim(a: &Grid2<f64>, b: &Grid2<f64>) -> Result<f64> {
    if (a.n(), a.m()) != (b.n(), b.m()) {
        return Err(Error::Shape {
            what: "ssim maps".into(),
            expected: format!("{}x{}", a.n(), a.m()),
            actual: format!("{}x{}", b.n(), b.m()),
        });
    }
    let (x, y) = (a.as_slice(), b.as_slice());
    if x == y {
        return Ok(1.0);
    }
    let r = x.iter().chain(y).copied().fold(f64::NEG_INFINITY, f64::max);
    let (c1, c2) = ((0.01 * r).powi(2), (0.03 * r).powi(2));
    let (mx, my) = (mean(x), mean(y));
    let len = x.len() as f64;
    let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / len;
    let vy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / len;
    let cxy = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / len;
    let num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
    let den = (mx * mx + my * my + c1) * (vx + vy + c2);
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

pub fn eval_stats(pred: &[f64], label: &[f64], pred_map: &Grid2<f64>, label_map: &Grid2<f64>) -> Result<EvalStats> {
    if pred.len() != label.len() {
        return Err(Error::LengthMismatch {
            expected: label.len(),
            actual: pred.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::Invariant("evaluation needs at least two samples".into()));
    }
    let (nrmse, nrmse_degenerate) = nrmse(pred, label);
    Ok(EvalStats {
        nrmse,
        nrmse_degenerate,
        ssim: ssim(pred_map, label_map)?,
        pearson: pearson(pred, label),
        spearman: spearman(pred, label),
        kendall: kendall(pred, label),
    })
}
