// SPDX-License-Identifier: Apache-2.0

//! Text and image summaries of overflow maps.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::router::OverflowReport;

/// Counts of `values` in unit-width bins `[k, k + 1)`, from 0 up to the
/// bin holding the largest value. Negative values count in bin 0.
pub fn histogram(values: &[f64]) -> Vec<usize> {
    let top = values.iter().copied().fold(0.0f64, f64::max);
    let mut bins = vec![0; top.floor() as usize + 1];
    for &v in values {
        bins[v.max(0.0).floor() as usize] += 1;
    }
    bins
}

fn check_dims(a: &Grid2<f64>, b: &Grid2<f64>) -> Result<()> {
    if (a.n(), a.m()) != (b.n(), b.m()) {
        return Err(Error::Shape {
            what: "overflow maps".into(),
            expected: format!("{}x{}", a.n(), a.m()),
            actual: format!("{}x{}", b.n(), b.m()),
        });
    }
    Ok(())
}

/// Side-by-side metric table, per-grid difference summary and OF histogram
/// for named overflow reports. All maps must share dimensions.
pub fn comparison_report(runs: &[(&str, &OverflowReport)]) -> Result<String> {
    let Some((_, first)) = runs.first() else {
        return Ok(String::new());
    };
    for (_, r) in runs {
        check_dims(&first.of_map, &r.of_map)?;
    }
    let mut s = String::new();
    let _ = write!(s, "{:<8}", "metric");
    for (name, _) in runs {
        let _ = write!(s, " {name:>14}");
    }
    s.push('\n');
    let rows: [(&str, fn(&OverflowReport) -> f64); 4] =
        [("TOF", |r| r.tof), ("MOF", |r| r.mof), ("H-CR", |r| r.h_cr), ("V-CR", |r| r.v_cr)];
    for (label, f) in rows {
        let _ = write!(s, "{label:<8}");
        for (_, r) in runs {
            let _ = write!(s, " {:>14.4}", f(r));
        }
        s.push('\n');
    }
    for (name, r) in &runs[1..] {
        let diff: Vec<f64> = r
            .of_map
            .as_slice()
            .iter()
            .zip(first.of_map.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        let changed = diff.iter().filter(|d| **d != 0.0).count();
        let net: f64 = diff.iter().sum();
        let _ = writeln!(
            s,
            "diff {name} - {}: {changed} grids changed, net OF change {net:.4}",
            runs[0].0
        );
    }
    let hists: Vec<Vec<usize>> = runs.iter().map(|(_, r)| histogram(r.of_map.as_slice())).collect();
    let len = hists.iter().map(|h| h.len()).max().unwrap_or(0);
    let _ = write!(s, "\nOF histogram (unit bins)\n{:<8}", "bin");
    for (name, _) in runs {
        let _ = write!(s, " {name:>14}");
    }
    s.push('\n');
    for k in 0..len {
        let _ = write!(s, "{:<8}", format!("[{k},{})", k + 1));
        for h in &hists {
            let _ = write!(s, " {:>14}", h.get(k).copied().unwrap_or(0));
        }
        s.push('\n');
    }
    Ok(s)
}

/// Plain PPM (P3) heatmap, white at 0 to red at `max` (the largest value by
/// default). The first image row is the highest `j`.
pub fn heatmap_ppm(map: &Grid2<f64>, max: Option<f64>) -> String {
    let top = max.unwrap_or_else(|| map.as_slice().iter().copied().fold(0.0, f64::max));
    let (n, m) = (map.n(), map.m());
    let mut s = format!("P3\n{n} {m}\n255\n");
    for j in (0..m).rev() {
        let row: Vec<String> = (0..n)
            .map(|i| {
                let t = if top > 0.0 { (map.get(i, j) / top).clamp(0.0, 1.0) } else { 0.0 };
                let gb = (255.0 * (1.0 - t)).round() as u8;
                format!("255 {gb} {gb}")
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::{overflow_metrics, CongestionMap};

    fn report(usage: &[u32]) -> OverflowReport {
        let mut c = CongestionMap::empty(2, 2, 1.0, 1.0);
        c.usage_h.as_mut_slice().copy_from_slice(usage);
        overflow_metrics(&c)
    }

    #[test]
    fn histogram_matches_binning_oracle() {
        let vals = [0.0, 0.5, 1.0, 3.0, 3.9, 2.0, 0.0];
        let h = histogram(&vals);
        assert_eq!(h.len(), 4);
        for (k, &c) in h.iter().enumerate() {
            let oracle = vals.iter().filter(|&&v| v >= k as f64 && v < k as f64 + 1.0).count();
            assert_eq!(c, oracle);
        }
    }

    #[test]
    fn identical_maps_report_no_difference() {
        let r = report(&[0, 3, 1, 2]);
        let text = comparison_report(&[("a", &r), ("b", &r)]).unwrap();
        assert!(text.contains("diff b - a: 0 grids changed, net OF change 0.0000"), "{text}");
    }

    #[test]
    fn mismatched_maps_are_rejected() {
        let a = report(&[0, 0, 0, 0]);
        let mut b = a.clone();
        b.of_map = Grid2::filled(3, 2, 0.0);
        assert!(comparison_report(&[("a", &a), ("b", &b)]).is_err());
    }

    #[test]
    fn single_hot_grid_is_the_only_red_pixel() {
        let mut g = Grid2::filled(3, 4, 0.5);
        *g.get_mut(2, 3) = 4.0;
        let ppm = heatmap_ppm(&g, None);
        let nums: Vec<u32> = ppm.lines().skip(3).flat_map(|l| l.split(' ')).map(|t| t.parse().unwrap()).collect();
        let pixels: Vec<&[u32]> = nums.chunks(3).collect();
        assert_eq!(pixels.len(), 12);
        assert_eq!(pixels.iter().filter(|p| **p == [255, 0, 0]).count(), 1);
        // highest j is the top row, i runs left to right
        assert_eq!(pixels[2], [255, 0, 0]);
    }
}
