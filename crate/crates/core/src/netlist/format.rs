// SPDX-License-Identifier: Apache-2.0

//! Line-based netlist and placement text formats.
//!
//! ```text
//! # comment
//! region x0 y0 x1 y1
//! grid n m cap_h cap_v
//! cell <id> <w> <h> <fixed:0|1> [<x> <y>]
//! net <id>
//! pin <cell_id> <net_id> <I|O> <dx> <dy>
//! ```
//!
//! Pins belong to the most recent `net` line. Placements are one `x y` pair
//! per line in cell-id order. Floats are written with Rust's shortest
//! round-trip formatting, so text round trips are bit-exact.

use std::fmt::Write as _;

use super::{Cell, LayoutRegion, Net, Netlist, Pin, PinDirection, Placement, RoutingGrid};
use crate::error::{Error, Result};

fn malformed(line: usize, msg: impl Into<String>) -> Error {
    Error::Malformed {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| malformed(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| malformed(line, format!("cannot parse {what} from {tok:?}")))
}

struct PinRecord {
    line: usize,
    cell: usize,
    net: usize,
    owner: usize,
    direction: PinDirection,
    dx: f64,
    dy: f64,
}

pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut region = None;
    let mut grid = None;
    let mut cells: Vec<Cell> = Vec::new();
    let mut net_count = 0usize;
    let mut pins: Vec<PinRecord> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let keyword = toks.next().unwrap_or_default();
        match keyword {
            "region" => {
                let r = LayoutRegion::new(
                    field(toks.next(), line, "x0")?,
                    field(toks.next(), line, "y0")?,
                    field(toks.next(), line, "x1")?,
                    field(toks.next(), line, "y1")?,
                );
                if region.replace(r).is_some() {
                    return Err(malformed(line, "duplicate region line"));
                }
            }
            "grid" => {
                let g = RoutingGrid {
                    n: field(toks.next(), line, "n")?,
                    m: field(toks.next(), line, "m")?,
                    cap_h: field(toks.next(), line, "cap_h")?,
                    cap_v: field(toks.next(), line, "cap_v")?,
                };
                if grid.replace(g).is_some() {
                    return Err(malformed(line, "duplicate grid line"));
                }
            }
            "cell" => {
                let id: usize = field(toks.next(), line, "cell id")?;
                if id != cells.len() {
                    return Err(malformed(
                        line,
                        format!("cell id {id} is not dense (expected {})", cells.len()),
                    ));
                }
                let width = field(toks.next(), line, "width")?;
                let height = field(toks.next(), line, "height")?;
                let fixed = match toks.next() {
                    Some("0") => false,
                    Some("1") => true,
                    other => return Err(malformed(line, format!("bad fixed flag {other:?}"))),
                };
                let origin = match toks.next() {
                    None => None,
                    Some(x) => Some((
                        field(Some(x), line, "x")?,
                        field(toks.next(), line, "y")?,
                    )),
                };
                cells.push(Cell {
                    width,
                    height,
                    fixed,
                    origin,
                    pins: Vec::new(),
                });
            }
            "net" => {
                let id: usize = field(toks.next(), line, "net id")?;
                if id != net_count {
                    return Err(malformed(
                        line,
                        format!("net id {id} is not dense (expected {net_count})"),
                    ));
                }
                net_count += 1;
            }
            "pin" => {
                if net_count == 0 {
                    return Err(malformed(line, "pin before any net line"));
                }
                let cell = field(toks.next(), line, "pin cell")?;
                let net = field(toks.next(), line, "pin net")?;
                let direction = match toks.next() {
                    Some("I") => PinDirection::Input,
                    Some("O") => PinDirection::Output,
                    other => return Err(malformed(line, format!("bad pin direction {other:?}"))),
                };
                pins.push(PinRecord {
                    line,
                    cell,
                    net,
                    owner: net_count - 1,
                    direction,
                    dx: field(toks.next(), line, "dx")?,
                    dy: field(toks.next(), line, "dy")?,
                });
            }
            other => return Err(malformed(line, format!("unknown keyword {other:?}"))),
        }
        if toks.next().is_some() {
            return Err(malformed(line, "trailing tokens"));
        }
    }

    let region = region.ok_or_else(|| malformed(0, "missing region line"))?;
    let grid = grid.ok_or_else(|| malformed(0, "missing grid line"))?;
    let mut nl = Netlist {
        cells,
        nets: vec![Net { pins: Vec::new() }; net_count],
        pins: Vec::with_capacity(pins.len()),
        region,
        grid,
    };
    for rec in pins {
        if rec.cell >= nl.cells.len() {
            return Err(Error::DanglingReference {
                line: rec.line,
                kind: "cell",
                id: rec.cell,
                count: nl.cells.len(),
            });
        }
        if rec.net >= net_count {
            return Err(Error::DanglingReference {
                line: rec.line,
                kind: "net",
                id: rec.net,
                count: net_count,
            });
        }
        if rec.net != rec.owner {
            return Err(malformed(
                rec.line,
                format!("pin names net {} but is listed under net {}", rec.net, rec.owner),
            ));
        }
        nl.pins.push(Pin {
            cell: rec.cell,
            net: rec.net,
            direction: rec.direction,
            dx: rec.dx,
            dy: rec.dy,
        });
    }
    nl.rebuild_pin_lists();
    nl.validate()?;
    Ok(nl)
}

pub fn write_netlist(nl: &Netlist) -> String {
    let mut out = String::new();
    let r = &nl.region;
    let g = &nl.grid;
    let _ = writeln!(out, "region {} {} {} {}", r.x0, r.y0, r.x1, r.y1);
    let _ = writeln!(out, "grid {} {} {} {}", g.n, g.m, g.cap_h, g.cap_v);
    for (k, c) in nl.cells.iter().enumerate() {
        let _ = write!(out, "cell {k} {} {} {}", c.width, c.height, u8::from(c.fixed));
        if let Some((x, y)) = c.origin {
            let _ = write!(out, " {x} {y}");
        }
        out.push('\n');
    }
    for (k, net) in nl.nets.iter().enumerate() {
        let _ = writeln!(out, "net {k}");
        for &pin in &net.pins {
            let p = &nl.pins[pin];
            let dir = match p.direction {
                PinDirection::Input => 'I',
                PinDirection::Output => 'O',
            };
            let _ = writeln!(out, "pin {} {} {dir} {} {}", p.cell, p.net, p.dx, p.dy);
        }
    }
    out
}

pub fn write_placement(p: &Placement) -> String {
    let mut out = String::with_capacity(p.len() * 24);
    for (x, y) in p.x.iter().zip(&p.y) {
        let _ = writeln!(out, "{x} {y}");
    }
    out
}

/// Parses a placement file; `expected` is the cell count when known.
pub fn read_placement(text: &str, expected: Option<usize>) -> Result<Placement> {
    let mut p = Placement {
        x: Vec::new(),
        y: Vec::new(),
    };
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        p.x.push(field(toks.next(), line, "x")?);
        p.y.push(field(toks.next(), line, "y")?);
        if toks.next().is_some() {
            return Err(malformed(line, "trailing tokens"));
        }
    }
    if let Some(n) = expected {
        if p.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: p.len(),
            });
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MINIMAL: &str = "\
region 0 0 10 10
grid 2 2 4 4
cell 0 1 1 0
cell 1 1 1 1 5 5
net 0
pin 0 0 O 0.5 0.5
pin 1 0 I 0.5 0.5
";

    #[test]
    fn minimal_file() {
        let nl = parse_netlist(MINIMAL).unwrap();
        assert_eq!((nl.num_cells(), nl.num_nets(), nl.num_pins()), (2, 1, 2));
        assert_eq!(nl.cells[1].origin, Some((5.0, 5.0)));
        assert!(nl.cells[1].fixed);
    }

    #[test]
    fn dangling_net_reference() {
        let text = MINIMAL.replace("pin 1 0 I", "pin 1 3 I");
        match parse_netlist(&text) {
            Err(Error::DanglingReference { kind, id, line, .. }) => {
                assert_eq!((kind, id, line), ("net", 3, 7));
            }
            other => panic!("expected dangling reference, got {other:?}"),
        }
    }

    #[test]
    fn dangling_cell_reference() {
        let text = MINIMAL.replace("pin 1 0 I", "pin 9 0 I");
        assert!(matches!(
            parse_netlist(&text),
            Err(Error::DanglingReference { kind: "cell", .. })
        ));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = MINIMAL.replace("cell 0 1 1 0", "cell 0 one 1 0");
        assert!(matches!(
            parse_netlist(&text),
            Err(Error::Malformed { line: 3, .. })
        ));
    }

    #[test]
    fn invariant_violation_is_distinct() {
        // net with a single pin
        let text = "region 0 0 10 10\ngrid 2 2 4 4\ncell 0 1 1 0\nnet 0\npin 0 0 O 0 0\n";
        assert!(matches!(parse_netlist(text), Err(Error::Invariant(_))));
        let text = MINIMAL.replace("cell 0 1 1 0", "cell 0 0 1 0");
        assert!(matches!(parse_netlist(&text), Err(Error::Invariant(_))));
    }

    #[test]
    fn four_cell_three_net_counts() {
        let text = "\
# hand-written example
region 0 0 8 8
grid 4 4 2 2
cell 0 1 1 0
cell 1 1 2 0
cell 2 2 1 0   # wide
cell 3 1 1 1 0 0
net 0
pin 0 0 O 0 0
pin 1 0 I 0.5 1
pin 2 0 I 1 0.5
net 1
pin 2 1 O 0 0
pin 3 1 I 0.5 0.5
net 2
pin 3 2 O 1 1
pin 0 2 I 0.5 0.5
pin 1 2 I 0 0
pin 2 2 I 2 1
";
        let nl = parse_netlist(text).unwrap();
        let counts: Vec<usize> = nl.nets.iter().map(|n| n.pins.len()).collect();
        assert_eq!(counts, vec![3, 2, 4]);
        let per_cell: Vec<usize> = nl.cells.iter().map(|c| c.pins.len()).collect();
        assert_eq!(per_cell, vec![2, 2, 3, 2]);
        assert_eq!(per_cell.iter().sum::<usize>(), nl.num_pins());
    }

    #[test]
    fn netlist_round_trip() {
        let nl = parse_netlist(MINIMAL).unwrap();
        assert_eq!(parse_netlist(&write_netlist(&nl)).unwrap(), nl);
    }

    #[test]
    fn placement_round_trips() {
        let zeros = Placement::zeros(5);
        assert_eq!(read_placement(&write_placement(&zeros), Some(5)).unwrap(), zeros);

        let p = Placement {
            x: vec![0.1, 1e6],
            y: vec![1e6, 0.1],
        };
        assert_eq!(read_placement(&write_placement(&p), Some(2)).unwrap(), p);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = Placement {
            x: (0..1000).map(|_| rng.gen_range(-1e3..1e7)).collect(),
            y: (0..1000).map(|_| rng.gen::<f64>() * 1e-3).collect(),
        };
        let back = read_placement(&write_placement(&p), Some(1000)).unwrap();
        assert!(back
            .x
            .iter()
            .chain(&back.y)
            .zip(p.x.iter().chain(&p.y))
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn placement_length_mismatch() {
        let text = write_placement(&Placement::zeros(3));
        assert_eq!(
            read_placement(&text, Some(4)),
            Err(Error::LengthMismatch {
                expected: 4,
                actual: 3
            })
        );
        assert!(matches!(
            read_placement("1 2\n3\n", None),
            Err(Error::Malformed { line: 2, .. })
        ));
    }
}
