// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::netlist::builder::build;
use crate::netlist::{LayoutRegion, RoutingGrid};

fn grid(n: usize, m: usize, cap: f64) -> RoutingGrid {
    RoutingGrid {
        n,
        m,
        cap_h: cap,
        cap_v: cap,
    }
}

/// Unit-pitch region for an n×m grid.
fn region(n: usize, m: usize) -> LayoutRegion {
    LayoutRegion::new(0.0, 0.0, n as f64, m as f64)
}

/// Two-pin nets from grid-center coordinates; every pin sits on its own
/// 0.2×0.2 cell centred in the requested grid.
fn two_pin_netlist(n: usize, m: usize, cap: f64, nets: &[((usize, usize), (usize, usize))]) -> (Netlist, Placement) {
    let mut cells = Vec::new();
    let mut pins = Vec::new();
    let mut p = Placement::zeros(0);
    for &(a, b) in nets {
        let mut net = Vec::new();
        for (i, j) in [a, b] {
            net.push((cells.len(), 0.1, 0.1));
            cells.push((0.2, 0.2, None));
            p.x.push(i as f64 + 0.4);
            p.y.push(j as f64 + 0.4);
        }
        pins.push(net);
    }
    (build(region(n, m), grid(n, m, cap), &cells, &pins), p)
}

#[test]
fn same_grid_pins_use_nothing() {
    let (nl, p) = two_pin_netlist(3, 3, 1.0, &[((1, 1), (1, 1))]);
    let map = route(&nl, &p).unwrap();
    assert!(map.usage_h.as_slice().iter().all(|&u| u == 0));
    assert!(map.usage_v.as_slice().iter().all(|&u| u == 0));
}

#[test]
fn straight_row_segment() {
    let (nl, p) = two_pin_netlist(3, 1, 1.0, &[((0, 0), (2, 0))]);
    let map = route(&nl, &p).unwrap();
    assert_eq!(map.usage_h.as_slice(), &[1, 1, 0]);
    assert_eq!(map.usage_v.as_slice(), &[0, 0, 0]);
}

#[test]
fn pin_outside_region_is_an_error() {
    let (nl, mut p) = two_pin_netlist(3, 3, 1.0, &[((0, 0), (2, 2))]);
    p.x[1] = 10.0;
    assert!(matches!(route(&nl, &p), Err(Error::PinOutsideRegion { net: 0, .. })));
}

/// Independent re-statement of the routing rule for two-pin nets: walk the
/// two candidate L paths cell by cell, price each crossing as the overflow it
/// would add, commit the cheaper one (horizontal-first on ties).
fn oracle_route(n: usize, m: usize, cap: f64, nets: &[((usize, usize), (usize, usize))]) -> (Vec<u32>, Vec<u32>) {
    let mut h = vec![vec![0u32; m]; n];
    let mut v = vec![vec![0u32; m]; n];
    // crossing = (horizontal?, i, j) of the lower/left grid
    let walk = |from: (usize, usize), to: (usize, usize), horizontal_first: bool| {
        let mut steps = Vec::new();
        let (mut x, mut y) = from;
        let go_x = |x: &mut usize, y: usize, steps: &mut Vec<(bool, usize, usize)>| {
            while *x != to.0 {
                if *x < to.0 {
                    steps.push((true, *x, y));
                    *x += 1;
                } else {
                    *x -= 1;
                    steps.push((true, *x, y));
                }
            }
        };
        let go_y = |x: usize, y: &mut usize, steps: &mut Vec<(bool, usize, usize)>| {
            while *y != to.1 {
                if *y < to.1 {
                    steps.push((false, x, *y));
                    *y += 1;
                } else {
                    *y -= 1;
                    steps.push((false, x, *y));
                }
            }
        };
        if horizontal_first {
            go_x(&mut x, y, &mut steps);
            go_y(x, &mut y, &mut steps);
        } else {
            go_y(x, &mut y, &mut steps);
            go_x(&mut x, y, &mut steps);
        }
        steps
    };
    for &(a, b) in nets {
        let hf = walk(a, b, true);
        let vf = walk(a, b, false);
        let price = |path: &[(bool, usize, usize)], h: &Vec<Vec<u32>>, v: &Vec<Vec<u32>>| {
            path.iter()
                .map(|&(hor, i, j)| {
                    let u = if hor { h[i][j] } else { v[i][j] } as f64;
                    (u + 1.0 - cap).max(0.0)
                })
                .sum::<f64>()
        };
        let chosen = if price(&hf, &h, &v) <= price(&vf, &h, &v) { hf } else { vf };
        for (hor, i, j) in chosen {
            if hor {
                h[i][j] += 1;
            } else {
                v[i][j] += 1;
            }
        }
    }
    let flat = |g: Vec<Vec<u32>>| g.into_iter().flatten().collect::<Vec<_>>();
    (flat(h), flat(v))
}

#[test]
fn hand_placed_nets_match_oracle() {
    let nets = [
        ((0, 0), (2, 2)),
        ((0, 0), (2, 2)),
        ((2, 0), (0, 2)),
        ((0, 1), (2, 1)),
    ];
    let (nl, p) = two_pin_netlist(3, 3, 1.0, &nets);
    let map = route(&nl, &p).unwrap();
    let (h, v) = oracle_route(3, 3, 1.0, &nets);
    assert_eq!(map.usage_h.as_slice(), h.as_slice());
    assert_eq!(map.usage_v.as_slice(), v.as_slice());
    // second copy takes the free vertical-first corner; the third net ties
    // (both corners already used) and goes horizontal-first through (0, 0)
    assert_eq!(*map.usage_v.get(0, 0), 2);
    assert_eq!(*map.usage_h.get(0, 2), 1);
}

#[test]
fn random_two_pin_nets_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let (n, m) = (rng.gen_range(1..7), rng.gen_range(1..7));
        let nets: Vec<_> = (0..rng.gen_range(1..25))
            .map(|_| {
                (
                    (rng.gen_range(0..n), rng.gen_range(0..m)),
                    (rng.gen_range(0..n), rng.gen_range(0..m)),
                )
            })
            .collect();
        let cap = rng.gen_range(1..4) as f64;
        let (nl, p) = two_pin_netlist(n, m, cap, &nets);
        let map = route(&nl, &p).unwrap();
        let (h, v) = oracle_route(n, m, cap, &nets);
        assert_eq!(map.usage_h.as_slice(), h.as_slice());
        assert_eq!(map.usage_v.as_slice(), v.as_slice());
    }
}

#[test]
fn spanning_tree_breaks_ties_by_lower_index() {
    // pins 1 and 2 are both at distance 1 from pin 0
    let edges = spanning_tree(&[(1, 1), (2, 1), (1, 2), (2, 2)]);
    assert_eq!(edges, vec![(0, 1), (0, 2), (1, 3)]);
    assert!(spanning_tree(&[(0, 0)]).is_empty());
}

#[test]
fn spanning_tree_is_minimal() {
    // brute force over all labelled trees is overkill; compare the weight
    // against the minimum over Prim runs from every root
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let k = rng.gen_range(2..8);
        let locs: Vec<(usize, usize)> = (0..k).map(|_| (rng.gen_range(0..6), rng.gen_range(0..6))).collect();
        let weight = |edges: &[(usize, usize)]| {
            edges
                .iter()
                .map(|&(a, b)| locs[a].0.abs_diff(locs[b].0) + locs[a].1.abs_diff(locs[b].1))
                .sum::<usize>()
        };
        let ours = weight(&spanning_tree(&locs));
        // Kruskal
        let mut all: Vec<(usize, usize, usize)> = (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .map(|(a, b)| (locs[a].0.abs_diff(locs[b].0) + locs[a].1.abs_diff(locs[b].1), a, b))
            .collect();
        all.sort();
        let mut comp: Vec<usize> = (0..k).collect();
        let mut total = 0;
        for (d, a, b) in all {
            let (ca, cb) = (comp[a], comp[b]);
            if ca != cb {
                total += d;
                comp.iter_mut().filter(|c| **c == cb).for_each(|c| *c = ca);
            }
        }
        assert_eq!(ours, total);
    }
}

fn random_map(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CongestionMap {
    let mut map = CongestionMap::empty(n, m, rng.gen_range(1.0..5.0), rng.gen_range(1.0..5.0));
    for u in map.usage_h.as_mut_slice() {
        *u = rng.gen_range(0..9);
    }
    for u in map.usage_v.as_mut_slice() {
        *u = rng.gen_range(0..9);
    }
    map
}

#[test]
fn metrics_without_overflow_are_zero() {
    let mut map = CongestionMap::empty(4, 4, 3.0, 3.0);
    map.usage_h.as_mut_slice().fill(3);
    map.usage_v.as_mut_slice().fill(2);
    let r = overflow_metrics(&map);
    assert_eq!((r.tof, r.mof, r.h_cr, r.v_cr), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn metrics_single_grid() {
    let mut map = CongestionMap::empty(1, 1, 5.0, 4.0);
    *map.usage_h.get_mut(0, 0) = 8;
    *map.usage_v.get_mut(0, 0) = 5;
    let r = overflow_metrics(&map);
    assert_eq!((r.tof, r.mof), (4.0, 4.0));
    assert_eq!(r.h_cr, 3.0 / 5.0);
    assert_eq!(r.v_cr, 1.0 / 4.0);
}

#[test]
fn metrics_match_scan_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let map = random_map(&mut rng, 5, 5);
        let r = overflow_metrics(&map);
        let (mut tof, mut mof, mut mh, mut mv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..5 {
            for j in 0..5 {
                let oh = if (*map.usage_h.get(i, j) as f64) > map.cap_h {
                    *map.usage_h.get(i, j) as f64 - map.cap_h
                } else {
                    0.0
                };
                let ov = if (*map.usage_v.get(i, j) as f64) > map.cap_v {
                    *map.usage_v.get(i, j) as f64 - map.cap_v
                } else {
                    0.0
                };
                tof += oh + ov;
                mof = mof.max(oh + ov);
                mh = mh.max(oh);
                mv = mv.max(ov);
            }
        }
        assert!((r.tof - tof).abs() <= 1e-12);
        assert_eq!(r.mof, mof);
        assert_eq!(r.h_cr, mh / map.cap_h);
        assert_eq!(r.v_cr, mv / map.cap_v);
        assert_eq!(r.mof, r.of_map.as_slice().iter().copied().fold(0.0, f64::max));
    }
}

#[test]
fn congestion_map_text_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let map = random_map(&mut rng, 3, 4);
    assert_eq!(CongestionMap::parse(&map.to_text()).unwrap(), map);
    assert!(CongestionMap::parse("congmap 1 1 1 1\n").is_err());
}

#[test]
fn labels_follow_max_rule() {
    let nl = build(
        region(2, 1),
        grid(2, 1, 1.0),
        &[(1.0, 0.5, None), (0.5, 0.5, None)],
        &[vec![(0, 0.0, 0.0), (1, 0.0, 0.0)]],
    );
    let p = Placement {
        x: vec![0.5, 0.1],
        y: vec![0.2, 0.2],
    };
    let of = Grid2::from_vec(2, 1, vec![2.0, 5.0]);
    assert_eq!(cell_labels(&nl, &p, &of), vec![5.0, 2.0]);
    let zero = Grid2::filled(2, 1, 0.0);
    assert_eq!(cell_labels(&nl, &p, &zero), vec![0.0, 0.0]);
}

#[test]
fn labels_match_overlap_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let cells: Vec<_> = (0..10)
            .map(|_| (rng.gen_range(0.2..2.5), rng.gen_range(0.2..2.5), None))
            .collect();
        let nets = vec![(0..10).map(|c| (c, 0.0, 0.0)).collect::<Vec<_>>()];
        let nl = build(region(6, 5), grid(6, 5, 1.0), &cells, &nets);
        let p = Placement {
            x: (0..10).map(|_| rng.gen_range(-0.5..5.5)).collect(),
            y: (0..10).map(|_| rng.gen_range(-0.5..4.5)).collect(),
        };
        let of = Grid2::from_vec(6, 5, (0..30).map(|_| rng.gen_range(0..6) as f64).collect());
        let ours = cell_labels(&nl, &p, &of);
        for v in 0..10 {
            let (w, h) = (nl.cells[v].width, nl.cells[v].height);
            let mut want = 0.0f64;
            for i in 0..6 {
                for j in 0..5 {
                    let ow = (p.x[v] + w).min(i as f64 + 1.0) - p.x[v].max(i as f64);
                    let oh = (p.y[v] + h).min(j as f64 + 1.0) - p.y[v].max(j as f64);
                    if ow > 0.0 && oh > 0.0 {
                        want = want.max(*of.get(i, j));
                    }
                }
            }
            assert_eq!(ours[v], want, "cell {v}");
        }
    }
}

#[test]
fn electric_overflow_examples() {
    let cells = [(1.0, 1.0, None), (1.0, 1.0, None)];
    let nets = [vec![(0, 0.0, 0.0), (1, 0.0, 0.0)]];
    let nl = build(region(2, 2), grid(2, 2, 1.0), &cells, &nets);
    let apart = Placement {
        x: vec![0.0, 1.0],
        y: vec![0.0, 1.0],
    };
    assert_eq!(electric_overflow(&nl, &apart, 1.0), 0.0);
    let stacked = Placement {
        x: vec![0.0, 0.0],
        y: vec![0.0, 0.0],
    };
    assert_eq!(electric_overflow(&nl, &stacked, 1.0), 0.5);
}

#[test]
fn electric_overflow_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..10 {
        let cells: Vec<_> = (0..50)
            .map(|k| {
                let fixed = k % 10 == 0;
                let (w, h) = (rng.gen_range(0.1..1.5), rng.gen_range(0.1..1.5));
                let o = fixed.then(|| (rng.gen_range(0.0..8.0 - w), rng.gen_range(0.0..6.0 - h)));
                (w, h, o)
            })
            .collect();
        let nets = vec![(0..50).map(|c| (c, 0.0, 0.0)).collect::<Vec<_>>()];
        let nl = build(LayoutRegion::new(0.0, 0.0, 8.0, 6.0), grid(4, 3, 1.0), &cells, &nets);
        let mut p = Placement {
            x: (0..50).map(|_| rng.gen_range(0.0..6.5)).collect(),
            y: (0..50).map(|_| rng.gen_range(0.0..4.5)).collect(),
        };
        for (k, c) in nl.cells.iter().enumerate() {
            if let Some((x, y)) = c.origin {
                p.x[k] = x;
                p.y[k] = y;
            }
        }
        let target = rng.gen_range(0.3..1.0);
        // bins are 2×2; rasterize on a fine 0.01 lattice would be inexact, so
        // integrate each cell against each bin explicitly
        let mut area = [[0.0f64; 3]; 4];
        let mut total = 0.0;
        for v in 0..50 {
            if nl.cells[v].fixed {
                continue;
            }
            let (w, h) = (nl.cells[v].width, nl.cells[v].height);
            total += w * h;
            for (i, col) in area.iter_mut().enumerate() {
                for (j, a) in col.iter_mut().enumerate() {
                    let (bx, by) = (2.0 * i as f64, 2.0 * j as f64);
                    let ow = ((p.x[v] + w).min(bx + 2.0) - p.x[v].max(bx)).max(0.0);
                    let oh = ((p.y[v] + h).min(by + 2.0) - p.y[v].max(by)).max(0.0);
                    *a += ow * oh;
                }
            }
        }
        let want: f64 = area
            .iter()
            .flatten()
            .map(|a| if *a > target * 4.0 { a - target * 4.0 } else { 0.0 })
            .sum::<f64>()
            / total;
        let got = electric_overflow(&nl, &p, target);
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn usage_conservation_and_determinism() {
    use crate::netlist::{generate_synthetic, SyntheticSpec};
    let nl = generate_synthetic(&SyntheticSpec {
        cell_count: 120,
        net_count: 130,
        seed: 4,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut p = Placement::zeros(nl.num_cells());
    for (k, c) in nl.cells.iter().enumerate() {
        let (x, y) = c.origin.unwrap_or_else(|| (rng.gen_range(0.0..15.0), rng.gen_range(0.0..15.0)));
        p.x[k] = x;
        p.y[k] = y;
    }
    let (map, stats) = route_with_stats(&nl, &p).unwrap();
    let total: u64 = map
        .usage_h
        .as_slice()
        .iter()
        .chain(map.usage_v.as_slice())
        .map(|&u| u as u64)
        .sum();
    assert_eq!(total, stats.crossings);

    // per-net: routing one net alone adds exactly its tree's Manhattan length
    let geo = nl.geometry();
    for net in 0..nl.num_nets() {
        let locs = net_grid_locations(&nl, &p, &geo, net).unwrap();
        let mut r = Router::new(geo.n, geo.m, 1.0, 1.0);
        r.add_net(&locs);
        let expect: usize = spanning_tree(&locs)
            .iter()
            .map(|&(a, b)| locs[a].0.abs_diff(locs[b].0) + locs[a].1.abs_diff(locs[b].1))
            .sum();
        assert_eq!(r.stats().crossings, expect as u64);
    }

    let again = route(&nl, &p).unwrap();
    assert_eq!(again.to_text(), map.to_text());
}

#[test]
fn appending_a_net_never_decreases_usage() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let mut r = Router::new(5, 5, 2.0, 2.0);
        for _ in 0..rng.gen_range(0..30) {
            let k = rng.gen_range(2..5);
            let locs: Vec<_> = (0..k).map(|_| (rng.gen_range(0..5), rng.gen_range(0..5))).collect();
            r.add_net(&locs);
        }
        let before = r.map().clone();
        let locs: Vec<_> = (0..4).map(|_| (rng.gen_range(0..5), rng.gen_range(0..5))).collect();
        r.add_net(&locs);
        let after = r.map();
        for k in 0..25 {
            assert!(after.usage_h.as_slice()[k] >= before.usage_h.as_slice()[k]);
            assert!(after.usage_v.as_slice()[k] >= before.usage_v.as_slice()[k]);
        }
    }
}

#[test]
fn short_nets_are_skipped_and_counted() {
    let mut r = Router::new(2, 2, 1.0, 1.0);
    r.add_net(&[(0, 0)]);
    r.add_net(&[]);
    assert_eq!(r.stats().skipped_nets, 2);
}
