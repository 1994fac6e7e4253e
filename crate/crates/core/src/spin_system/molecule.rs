//! Line-oriented molecule description format.
//!
//! ```text
//! # acetonitrile methyl group
//! spin H1 1.0
//! spin C              # gamma defaults from the element (H, C, F, P)
//! coupling 0 1 136.2  # J in Hz, 0-based spin indices
//! shift 0 0.0         # h in Hz
//! cluster 0 1         # optional partition, one line per cluster
//! field_axis x        # x (default) or z
//! ```

use std::path::Path;

use super::{FieldAxis, SpinSystem, GAMMA_C13, GAMMA_H1};
use crate::error::{Error, Result};

/// Default relative gyromagnetic ratio from the element letters of a label
/// such as `H2`, `13C` or `P7`.
fn default_gamma(label: &str) -> Option<f64> {
    let element: String = label
        .trim_start_matches(|c: char| c.is_ascii_digit())
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    match element.as_str() {
        "H" => Some(GAMMA_H1),
        "C" => Some(GAMMA_C13),
        "F" => Some(0.94077),
        "P" => Some(0.40481),
        _ => None,
    }
}

pub fn parse_molecule(text: &str) -> Result<SpinSystem> {
    let mut b = SpinSystem::builder();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let key = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(line, format!("expected a number, got `{s}`")))
        };
        let idx = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::parse(line, format!("expected a spin index, got `{s}`")))
        };
        match key {
            "spin" => {
                let (label, gamma) = match rest.as_slice() {
                    [label] => (
                        *label,
                        default_gamma(label).ok_or_else(|| {
                            Error::parse(line, format!("no default gamma for `{label}`"))
                        })?,
                    ),
                    [label, g] => (*label, num(g)?),
                    _ => return Err(Error::parse(line, "usage: spin <label> [gamma]")),
                };
                b = b.spin(label, gamma);
            }
            "coupling" => match rest.as_slice() {
                [i, j, hz] => b = b.coupling(idx(i)?, idx(j)?, num(hz)?),
                _ => return Err(Error::parse(line, "usage: coupling <i> <j> <J_Hz>")),
            },
            "shift" => match rest.as_slice() {
                [i, hz] => b = b.shift(idx(i)?, num(hz)?),
                _ => return Err(Error::parse(line, "usage: shift <i> <h_Hz>")),
            },
            "cluster" => {
                if rest.is_empty() {
                    return Err(Error::parse(line, "cluster needs at least one index"));
                }
                clusters.push(rest.iter().map(|s| idx(s)).collect::<Result<_>>()?);
            }
            "field_axis" => {
                let axis = match rest.as_slice() {
                    ["x"] | ["X"] => FieldAxis::X,
                    ["z"] | ["Z"] => FieldAxis::Z,
                    _ => return Err(Error::parse(line, "field_axis must be x or z")),
                };
                b = b.field_axis(axis);
            }
            other => return Err(Error::parse(line, format!("unknown directive `{other}`"))),
        }
    }
    if !clusters.is_empty() {
        b = b.clusters(clusters);
    }
    b.build()
}

pub fn read_molecule(path: impl AsRef<Path>) -> Result<SpinSystem> {
    parse_molecule(&std::fs::read_to_string(path)?)
}

pub fn write_molecule(sys: &SpinSystem) -> String {
    let mut out = String::new();
    for s in sys.spins() {
        out.push_str(&format!("spin {} {}\n", s.label, s.gamma));
    }
    for ((i, j), hz) in sys.couplings() {
        out.push_str(&format!("coupling {i} {j} {hz}\n"));
    }
    for (i, &h) in sys.shifts().iter().enumerate() {
        if h != 0.0 {
            out.push_str(&format!("shift {i} {h}\n"));
        }
    }
    if let Some(clusters) = sys.clusters() {
        for c in clusters {
            let idx: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            out.push_str(&format!("cluster {}\n", idx.join(" ")));
        }
    }
    if sys.field_axis() == FieldAxis::Z {
        out.push_str("field_axis z\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ACETONITRILE: &str = "\
# methyl group of acetonitrile
spin H1 1.0
spin H2 1.0
spin H3 1.0
spin C
coupling 0 3 136.2
coupling 1 3 136.2
coupling 2 3 136.2
cluster 0 1 2 3
";

    #[test]
    fn parses_acetonitrile() {
        let sys = parse_molecule(ACETONITRILE).unwrap();
        assert_eq!(sys, SpinSystem::acetonitrile());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let sys = SpinSystem::builder()
            .spin("F1", 0.94077)
            .spin("P2", 0.40481)
            .spin("H", 1.0)
            .coupling(0, 2, -12.5)
            .coupling(1, 2, 3.0)
            .shift(1, 4.25)
            .clusters(vec![vec![0, 2], vec![1]])
            .field_axis(FieldAxis::Z)
            .build()
            .unwrap();
        assert_eq!(parse_molecule(&write_molecule(&sys)).unwrap(), sys);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_molecule("spin H\nspin Xe\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_molecule("spin H\nfoo 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn default_gammas_follow_element() {
        assert_eq!(default_gamma("13C"), Some(GAMMA_C13));
        assert_eq!(default_gamma("H3"), Some(1.0));
        assert_eq!(default_gamma("Si"), None);
    }
}
