//! The line-oriented `AHLP 1` text format.
//!
//! ```text
//! AHLP 1 N=1
//! BLOCK 0 NVAR=0 MEQ=0 MINEQ=0
//! BLOCK 1 NVAR=2 MEQ=1 MINEQ=0
//! OBJ
//! 0 1
//! 1 2
//! LB
//! 0 0
//! 1 0
//! RHS_EQ
//! 0 1
//! MAT B 1 NNZ=2
//! 0 0 1
//! 0 1 1
//! LINK MEQ=0 MINEQ=0
//! ```
//!
//! Omitted `OBJ`/`RHS_EQ` entries are 0, omitted bounds and ranges are
//! infinite. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{ArrowheadProblem, Block, SparseBlock};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn perr<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Parse { line, message: message.into() })
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Section {
    None,
    Obj,
    Lb,
    Ub,
    RhsEq,
    Range,
    Mat { remaining: usize },
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Owner {
    Block(usize),
    Link,
}

struct Dims {
    nvar: usize,
    meq: usize,
    mineq: usize,
}

struct MatEntry {
    line: usize,
    name: char,
    block: usize,
    row: usize,
    col: usize,
    value: f64,
}

fn key_value(token: &str, key: &str, line: usize) -> Result<usize, FormatError> {
    match token.strip_prefix(key).and_then(|t| t.strip_prefix('=')) {
        Some(v) => v.parse().or_else(|_| perr(line, format!("invalid {key} value '{v}'"))),
        None => perr(line, format!("expected {key}=<value>, found '{token}'")),
    }
}

fn number(token: &str, line: usize) -> Result<f64, FormatError> {
    match token.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => perr(line, format!("invalid number '{token}'")),
    }
}

fn index(token: &str, line: usize) -> Result<usize, FormatError> {
    token.parse().or_else(|_| perr(line, format!("invalid index '{token}'")))
}

/// Parses an `AHLP 1` document.
pub fn parse(text: &str) -> Result<ArrowheadProblem, FormatError> {
    let mut n_blocks: Option<usize> = None;
    let mut blocks: Vec<Option<(Dims, Block)>> = Vec::new();
    let mut link: Option<ArrowheadProblem> = None;
    let mut owner = Owner::Link;
    let mut section = Section::None;
    let mut mats: Vec<MatEntry> = Vec::new();
    let mut mat_head: Option<(char, usize, usize)> = None;
    let mut last_line = 0;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some(n) = n_blocks else {
            if tokens.len() != 3 || tokens[0] != "AHLP" || tokens[1] != "1" {
                return perr(line, "expected header 'AHLP 1 N=<N>'");
            }
            let n = key_value(tokens[2], "N", line)?;
            n_blocks = Some(n);
            blocks = (0..=n).map(|_| None).collect();
            continue;
        };
        if let Section::Mat { remaining } = section {
            if remaining > 0 {
                let (name, block, _) = mat_head.expect("matrix header");
                if tokens.len() != 3 {
                    return perr(line, format!("expected '<row> <col> <value>' in MAT {name} {block}"));
                }
                mats.push(MatEntry {
                    line,
                    name,
                    block,
                    row: index(tokens[0], line)?,
                    col: index(tokens[1], line)?,
                    value: number(tokens[2], line)?,
                });
                section = Section::Mat { remaining: remaining - 1 };
                continue;
            }
        }
        match tokens[0] {
            "BLOCK" => {
                if tokens.len() != 5 {
                    return perr(line, "expected 'BLOCK <i> NVAR=<n> MEQ=<m> MINEQ=<m>'");
                }
                let i = index(tokens[1], line)?;
                if i > n {
                    return perr(line, format!("block index {i} exceeds N={n}"));
                }
                if blocks[i].is_some() {
                    return perr(line, format!("block {i} declared twice"));
                }
                let dims = Dims {
                    nvar: key_value(tokens[2], "NVAR", line)?,
                    meq: key_value(tokens[3], "MEQ", line)?,
                    mineq: key_value(tokens[4], "MINEQ", line)?,
                };
                let mut b = Block::empty(i, dims.nvar, dims.meq, dims.mineq, 0, 0, 0);
                b.ineq_lower = vec![f64::NEG_INFINITY; dims.mineq];
                b.ineq_upper = vec![f64::INFINITY; dims.mineq];
                blocks[i] = Some((dims, b));
                owner = Owner::Block(i);
                section = Section::None;
            }
            "LINK" => {
                if tokens.len() != 3 {
                    return perr(line, "expected 'LINK MEQ=<m> MINEQ=<m>'");
                }
                if link.is_some() {
                    return perr(line, "LINK declared twice");
                }
                let me = key_value(tokens[1], "MEQ", line)?;
                let mi = key_value(tokens[2], "MINEQ", line)?;
                link = Some(ArrowheadProblem {
                    blocks: Vec::new(),
                    link_rhs_eq: vec![0.0; me],
                    link_lower: vec![f64::NEG_INFINITY; mi],
                    link_upper: vec![f64::INFINITY; mi],
                });
                owner = Owner::Link;
                section = Section::None;
            }
            "MAT" => {
                if tokens.len() != 4 {
                    return perr(line, "expected 'MAT <name> <i> NNZ=<k>'");
                }
                let name = match tokens[1] {
                    "A" | "B" | "C" | "D" | "F" | "G" => tokens[1].chars().next().unwrap(),
                    other => return perr(line, format!("unknown matrix '{other}'")),
                };
                let block = index(tokens[2], line)?;
                if block > n {
                    return perr(line, format!("block index {block} exceeds N={n}"));
                }
                if block == 0 && (name == 'B' || name == 'D') {
                    return perr(line, format!("block 0 has no {name} matrix"));
                }
                let nnz = key_value(tokens[3], "NNZ", line)?;
                mat_head = Some((name, block, line));
                section = Section::Mat { remaining: nnz };
            }
            "OBJ" | "LB" | "UB" | "RHS_EQ" | "RANGE_INEQ" => {
                if tokens.len() != 1 {
                    return perr(line, format!("unexpected tokens after {}", tokens[0]));
                }
                let s = match tokens[0] {
                    "OBJ" => Section::Obj,
                    "LB" => Section::Lb,
                    "UB" => Section::Ub,
                    "RHS_EQ" => Section::RhsEq,
                    _ => Section::Range,
                };
                let in_link = matches!(owner, Owner::Link);
                if link.is_none() && in_link {
                    return perr(line, format!("section {} before any BLOCK or LINK", tokens[0]));
                }
                if in_link && !matches!(s, Section::RhsEq | Section::Range) {
                    return perr(line, format!("section {} not allowed in LINK", tokens[0]));
                }
                section = s;
            }
            _ => {
                let expect = match section {
                    Section::None | Section::Mat { .. } => return perr(line, format!("unexpected line '{content}'")),
                    Section::Range => 3,
                    _ => 2,
                };
                if tokens.len() != expect {
                    return perr(line, format!("expected {expect} fields, found {}", tokens.len()));
                }
                let j = index(tokens[0], line)?;
                let v = number(tokens[1], line)?;
                let w = if expect == 3 { number(tokens[2], line)? } else { 0.0 };
                let (target_len, slot): (usize, Vec<&mut Vec<f64>>) = match owner {
                    Owner::Block(i) => {
                        let (_, b) = blocks[i].as_mut().unwrap();
                        match section {
                            Section::Obj => (b.obj.len(), vec![&mut b.obj]),
                            Section::Lb => (b.lower.len(), vec![&mut b.lower]),
                            Section::Ub => (b.upper.len(), vec![&mut b.upper]),
                            Section::RhsEq => (b.rhs_eq.len(), vec![&mut b.rhs_eq]),
                            _ => (b.ineq_lower.len(), vec![&mut b.ineq_lower, &mut b.ineq_upper]),
                        }
                    }
                    Owner::Link => {
                        let l = link.as_mut().unwrap();
                        match section {
                            Section::RhsEq => (l.link_rhs_eq.len(), vec![&mut l.link_rhs_eq]),
                            _ => (l.link_lower.len(), vec![&mut l.link_lower, &mut l.link_upper]),
                        }
                    }
                };
                if j >= target_len {
                    return perr(line, format!("index {j} out of range (length {target_len})"));
                }
                let mut slot = slot.into_iter();
                slot.next().unwrap()[j] = v;
                if let Some(second) = slot.next() {
                    second[j] = w;
                }
            }
        }
    }

    let Some(n) = n_blocks else {
        return perr(last_line.max(1), "missing 'AHLP 1 N=<N>' header");
    };
    if let Section::Mat { remaining } = section {
        if remaining > 0 {
            let (name, block, at) = mat_head.unwrap();
            return perr(at, format!("MAT {name} {block} ended {remaining} entries early"));
        }
    }
    let mut out_blocks = Vec::with_capacity(n + 1);
    let mut dims = Vec::with_capacity(n + 1);
    for (i, b) in blocks.into_iter().enumerate() {
        match b {
            Some((d, b)) => {
                dims.push(d);
                out_blocks.push(b);
            }
            None => return perr(last_line, format!("block {i} is missing")),
        }
    }
    let Some(link) = link else {
        return perr(last_line, "LINK section is missing");
    };
    let n0 = dims[0].nvar;
    let (lme, lmi) = (link.link_rhs_eq.len(), link.link_lower.len());
    for (i, (b, d)) in out_blocks.iter_mut().zip(&dims).enumerate() {
        let own = if i == 0 { 0 } else { d.nvar };
        b.a = SparseBlock::zeros(d.meq, n0);
        b.b = SparseBlock::zeros(if i == 0 { 0 } else { d.meq }, own);
        b.c = SparseBlock::zeros(d.mineq, n0);
        b.d = SparseBlock::zeros(if i == 0 { 0 } else { d.mineq }, own);
        b.f = SparseBlock::zeros(lme, d.nvar);
        b.g = SparseBlock::zeros(lmi, d.nvar);
    }
    let mut seen = std::collections::HashSet::new();
    for e in mats {
        let b = &mut out_blocks[e.block];
        let m = match e.name {
            'A' => &mut b.a,
            'B' => &mut b.b,
            'C' => &mut b.c,
            'D' => &mut b.d,
            'F' => &mut b.f,
            _ => &mut b.g,
        };
        if e.row >= m.rows || e.col >= m.cols {
            return perr(
                e.line,
                format!("entry ({},{}) outside {}x{} matrix {} of block {}", e.row, e.col, m.rows, m.cols, e.name, e.block),
            );
        }
        if !e.value.is_finite() {
            return perr(e.line, format!("matrix coefficient {} is not finite", e.value));
        }
        if !seen.insert((e.name, e.block, e.row, e.col)) {
            return perr(e.line, format!("duplicate entry ({},{}) in matrix {} of block {}", e.row, e.col, e.name, e.block));
        }
        if e.value != 0.0 {
            m.entries.push((e.row, e.col, e.value));
        }
    }
    for b in &mut out_blocks {
        for m in [&mut b.a, &mut b.b, &mut b.c, &mut b.d, &mut b.f, &mut b.g] {
            m.canonicalize();
        }
    }
    Ok(ArrowheadProblem {
        blocks: out_blocks,
        link_rhs_eq: link.link_rhs_eq,
        link_lower: link.link_lower,
        link_upper: link.link_upper,
    })
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn write_sparse_vec(out: &mut String, name: &str, v: &[f64], default: f64) {
    let entries: Vec<(usize, f64)> = v.iter().copied().enumerate().filter(|&(_, x)| x != default).collect();
    if entries.is_empty() {
        return;
    }
    out.push_str(name);
    out.push('\n');
    for (j, x) in entries {
        let _ = writeln!(out, "{j} {}", fmt_value(x));
    }
}

fn write_ranges(out: &mut String, lo: &[f64], hi: &[f64]) {
    let entries: Vec<usize> =
        (0..lo.len()).filter(|&j| lo[j] != f64::NEG_INFINITY || hi[j] != f64::INFINITY).collect();
    if entries.is_empty() {
        return;
    }
    out.push_str("RANGE_INEQ\n");
    for j in entries {
        let _ = writeln!(out, "{j} {} {}", fmt_value(lo[j]), fmt_value(hi[j]));
    }
}

/// Writes the canonical text form: sorted entries, 17 significant digits,
/// only non-default values, empty matrices omitted.
pub fn write(p: &ArrowheadProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "AHLP 1 N={}", p.num_blocks());
    for (i, b) in p.blocks.iter().enumerate() {
        let _ = writeln!(out, "BLOCK {i} NVAR={} MEQ={} MINEQ={}", b.nvar(), b.meq(), b.mineq());
        write_sparse_vec(&mut out, "OBJ", &b.obj, 0.0);
        write_sparse_vec(&mut out, "LB", &b.lower, f64::NEG_INFINITY);
        write_sparse_vec(&mut out, "UB", &b.upper, f64::INFINITY);
        write_sparse_vec(&mut out, "RHS_EQ", &b.rhs_eq, 0.0);
        write_ranges(&mut out, &b.ineq_lower, &b.ineq_upper);
        for (name, m) in [("A", &b.a), ("B", &b.b), ("C", &b.c), ("D", &b.d), ("F", &b.f), ("G", &b.g)] {
            let mut entries: Vec<_> = m.entries.iter().filter(|e| e.2 != 0.0).copied().collect();
            if entries.is_empty() {
                continue;
            }
            entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            let _ = writeln!(out, "MAT {name} {i} NNZ={}", entries.len());
            for (r, c, v) in entries {
                let _ = writeln!(out, "{r} {c} {}", fmt_value(v));
            }
        }
    }
    let _ = writeln!(out, "LINK MEQ={} MINEQ={}", p.link_meq(), p.link_mineq());
    write_sparse_vec(&mut out, "RHS_EQ", &p.link_rhs_eq, 0.0);
    write_ranges(&mut out, &p.link_lower, &p.link_upper);
    out
}

pub fn load(path: impl AsRef<Path>) -> Result<ArrowheadProblem, FormatError> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn save(p: &ArrowheadProblem, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, write(p))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "AHLP 1 N=1\nBLOCK 0 NVAR=0 MEQ=0 MINEQ=0\nBLOCK 1 NVAR=2 MEQ=1 MINEQ=0\nOBJ\n0 1\n1 2\nLB\n0 0\n1 0\nRHS_EQ\n0 1\nMAT B 1 NNZ=2\n0 0 1\n0 1 1\nLINK MEQ=0 MINEQ=0\n";

    #[test]
    fn parses_tiny() {
        let p = parse(TINY).unwrap();
        assert_eq!(p.num_blocks(), 1);
        assert_eq!(p.blocks[1].obj, vec![1.0, 2.0]);
        assert_eq!(p.blocks[1].upper, vec![f64::INFINITY; 2]);
        assert_eq!(p.blocks[1].b.entries, vec![(0, 0, 1.0), (0, 1, 1.0)]);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn canonical_round_trip_is_stable() {
        let p = parse(TINY).unwrap();
        let once = write(&p);
        let q = parse(&once).unwrap();
        assert_eq!(p, q);
        assert_eq!(once, write(&q));
    }

    #[test]
    fn comments_and_infinities() {
        let text = "# leading\nAHLP 1 N=1 # trailing\nBLOCK 0 NVAR=1 MEQ=0 MINEQ=0\nUB\n0 inf\nLB\n0 -inf\nBLOCK 1 NVAR=1 MEQ=0 MINEQ=1\nRANGE_INEQ\n0 -inf 3\nMAT D 1 NNZ=1\n0 0 2\nLINK MEQ=0 MINEQ=0\n";
        let p = parse(text).unwrap();
        assert_eq!(p.blocks[1].ineq_lower, vec![f64::NEG_INFINITY]);
        assert_eq!(p.blocks[1].ineq_upper, vec![3.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = TINY.replace("0 1 1\n", "0 7 1\n");
        match parse(&bad) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 14),
            other => panic!("unexpected {other:?}"),
        }
        let short = TINY.replace("NNZ=2", "NNZ=3");
        assert!(matches!(parse(&short), Err(FormatError::Parse { line: 15, .. })));
        assert!(matches!(parse("AHLP 2 N=1\n"), Err(FormatError::Parse { line: 1, .. })));
        let missing = TINY.replace("LINK MEQ=0 MINEQ=0\n", "");
        assert!(matches!(parse(&missing), Err(FormatError::Parse { .. })));
        let bad_b0 = TINY.replace("MAT B 1", "MAT B 0");
        assert!(matches!(parse(&bad_b0), Err(FormatError::Parse { line: 12, .. })));
    }
}
