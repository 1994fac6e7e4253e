//! Line-oriented circuit text format, one gate per line:
//!
//! ```text
//! qubits 4
//! XX 0.42787 0 3
//! RZ -1.5 2
//! BLOCK 61 0 1 2 3 | <re> <im> <re> <im> ...
//! ```
//!
//! Block matrices are written row-major after the `|`. Angles use the
//! shortest round-trip float representation, so parsing recovers the
//! circuit exactly.

use super::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub fn format_circuit(c: &Circuit) -> String {
    let mut out = format!("qubits {}\n", c.n_qubits());
    for g in c.gates() {
        let line = match g {
            Gate::Rx { theta, qubit } => format!("RX {theta:?} {qubit}"),
            Gate::Ry { theta, qubit } => format!("RY {theta:?} {qubit}"),
            Gate::Rz { theta, qubit } => format!("RZ {theta:?} {qubit}"),
            Gate::IsingXX { theta, qubits: [a, b] } => format!("XX {theta:?} {a} {b}"),
            Gate::IsingYY { theta, qubits: [a, b] } => format!("YY {theta:?} {a} {b}"),
            Gate::IsingZZ { theta, qubits: [a, b] } => format!("ZZ {theta:?} {a} {b}"),
            Gate::Block { qubits, unitary, cost } => {
                let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                let mut entries = Vec::with_capacity(2 * unitary.len());
                for r in 0..unitary.nrows() {
                    for col in 0..unitary.ncols() {
                        let z = unitary[(r, col)];
                        entries.push(format!("{:?} {:?}", z.re, z.im));
                    }
                }
                format!("BLOCK {cost} {} | {}", qs.join(" "), entries.join(" "))
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line, header) = lines.next().ok_or_else(|| Error::parse(1, "empty circuit"))?;
    let n_qubits = header
        .strip_prefix("qubits ")
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::parse(line, "expected `qubits <n>` header"))?;
    let mut c = Circuit::new(n_qubits);
    for (line, l) in lines {
        let (head, matrix) = match l.split_once('|') {
            Some((h, m)) => (h.trim(), Some(m.trim())),
            None => (l, None),
        };
        let f: Vec<&str> = head.split_whitespace().collect();
        let float = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number `{s}`")));
        let uint = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(line, format!("bad index `{s}`")));
        let gate = match (f.as_slice(), matrix) {
            (["RX", t, q], None) => Gate::Rx { theta: float(t)?, qubit: uint(q)? },
            (["RY", t, q], None) => Gate::Ry { theta: float(t)?, qubit: uint(q)? },
            (["RZ", t, q], None) => Gate::Rz { theta: float(t)?, qubit: uint(q)? },
            (["XX", t, a, b], None) => Gate::IsingXX { theta: float(t)?, qubits: [uint(a)?, uint(b)?] },
            (["YY", t, a, b], None) => Gate::IsingYY { theta: float(t)?, qubits: [uint(a)?, uint(b)?] },
            (["ZZ", t, a, b], None) => Gate::IsingZZ { theta: float(t)?, qubits: [uint(a)?, uint(b)?] },
            (["BLOCK", cost, qs @ ..], Some(m)) if !qs.is_empty() => {
                let qubits: Vec<usize> = qs.iter().map(|q| uint(q)).collect::<Result<_>>()?;
                let vals: Vec<f64> = m.split_whitespace().map(float).collect::<Result<_>>()?;
                let dim = 1usize << qubits.len();
                if vals.len() != 2 * dim * dim {
                    return Err(Error::parse(line, "block matrix has the wrong number of entries"));
                }
                let entries: Vec<C64> = vals.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
                Gate::block(qubits, CMatrix::from_row_slice(dim, dim, &entries), uint(cost)?)
                    .map_err(|e| Error::parse(line, e.to_string()))?
            }
            _ => return Err(Error::parse(line, format!("unrecognized gate line `{l}`"))),
        };
        c.push(gate).map_err(|e| Error::parse(line, e.to_string()))?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{compile_trotter_clustered, compile_trotter_plain, CostModel};
    use crate::spin_system::SpinSystem;

    #[test]
    fn golden_single_bond() {
        let sys = SpinSystem::builder()
            .spin("a", 1.0)
            .spin("b", 1.0)
            .coupling(0, 1, 2.0)
            .shift(1, 0.5)
            .build()
            .unwrap();
        let c = compile_trotter_plain(&sys, 0.25, 1).unwrap();
        let expect = "\
qubits 2
XX 1.5707963267948966 0 1
YY 1.5707963267948966 0 1
ZZ 1.5707963267948966 0 1
RX 0.7853981633974483 1
";
        assert_eq!(format_circuit(&c), expect);
        assert_eq!(parse_circuit(expect).unwrap(), c);
    }

    #[test]
    fn blocks_round_trip() {
        let c = compile_trotter_clustered(&SpinSystem::acetonitrile(), 0.0123, 2, CostModel::default()).unwrap();
        let back = parse_circuit(&format_circuit(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_circuit("").is_err());
        assert!(parse_circuit("qubits 2\nCNOT 0 1\n").is_err());
        assert!(matches!(
            parse_circuit("qubits 2\nXX 0.1 0 5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
