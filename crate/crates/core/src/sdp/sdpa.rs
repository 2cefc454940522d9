//! SDPA sparse (`.dat-s`) reader and writer.
//!
//! The instance is written as SDPA's dual side: maximize ⟨F₀,Y⟩ subject to
//! ⟨F_i,Y⟩ = c_i, Y ⪰ 0. Nonnegative scalars and the two halves of each split
//! free variable share one trailing diagonal block.

use std::fmt::Write as _;
use std::path::Path;

use super::{to_f64, SdpInstance};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SdpaEntry {
    pub matrix: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpaData {
    pub constraints: usize,
    /// Positive for dense symmetric blocks, negative for diagonal blocks.
    pub block_struct: Vec<i64>,
    pub rhs: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl SdpaData {
    /// Entries in a canonical order, for comparisons.
    pub fn sorted_entries(&self) -> Vec<SdpaEntry> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| {
            (a.matrix, a.block, a.i, a.j)
                .cmp(&(b.matrix, b.block, b.i, b.j))
                .then(a.value.total_cmp(&b.value))
        });
        e
    }
}

/// SDPA view of an instance.
pub fn to_sdpa(inst: &SdpInstance) -> SdpaData {
    let mut block_struct: Vec<i64> = inst.psd_blocks.iter().map(|&n| n as i64).collect();
    let diag_len = inst.nonneg + 2 * inst.free;
    let diag = if diag_len > 0 {
        block_struct.push(-(diag_len as i64));
        Some(block_struct.len())
    } else {
        None
    };
    let mut entries = Vec::new();
    let mut push = |matrix: usize, block: usize, i: usize, j: usize, value: f64| {
        if value != 0.0 {
            entries.push(SdpaEntry {
                matrix,
                block,
                i,
                j,
                value,
            });
        }
    };
    for (b, i, j, v) in &inst.cost_psd {
        push(0, b + 1, j + 1, i + 1, -to_f64(v));
    }
    for (l, v) in &inst.cost_nonneg {
        push(0, diag.unwrap(), l + 1, l + 1, -to_f64(v));
    }
    let free_pos = |k: usize| inst.nonneg + 2 * k + 1;
    for (k, v) in &inst.cost_free {
        let p = free_pos(*k);
        push(0, diag.unwrap(), p, p, -to_f64(v));
        push(0, diag.unwrap(), p + 1, p + 1, to_f64(v));
    }
    for (m, c) in inst.constraints.iter().enumerate() {
        for (b, i, j, v) in &c.psd {
            push(m + 1, b + 1, j + 1, i + 1, to_f64(v));
        }
        for (l, v) in &c.nonneg {
            push(m + 1, diag.unwrap(), l + 1, l + 1, to_f64(v));
        }
        for (k, v) in &c.free {
            let p = free_pos(*k);
            push(m + 1, diag.unwrap(), p, p, to_f64(v));
            push(m + 1, diag.unwrap(), p + 1, p + 1, -to_f64(v));
        }
    }
    SdpaData {
        constraints: inst.constraints.len(),
        block_struct,
        rhs: inst.constraints.iter().map(|c| to_f64(&c.rhs)).collect(),
        entries,
    }
}

pub fn write_sdpa(data: &SdpaData) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\"treeflag instance\"");
    let _ = writeln!(out, "{}", data.constraints);
    let _ = writeln!(out, "{}", data.block_struct.len());
    let sizes: Vec<String> = data.block_struct.iter().map(i64::to_string).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = data.rhs.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    for e in &data.entries {
        let _ = writeln!(out, "{} {} {} {} {}", e.matrix, e.block, e.i, e.j, e.value);
    }
    out
}

pub fn export_sdpa(inst: &SdpInstance, path: &Path) -> Result<()> {
    std::fs::write(path, write_sdpa(&to_sdpa(inst)))?;
    Ok(())
}

pub fn read_sdpa(text: &str) -> Result<SdpaData> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let clean = |l: &str| l.replace(['{', '}', '(', ')', ','], " ");
    let mut next = |what: &str| {
        lines
            .next()
            .map(|(n, l)| (n, clean(l)))
            .ok_or_else(|| Error::parse(0, format!("missing {what}")))
    };
    let num = |n: usize, tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| Error::parse(n + 1, format!("bad number '{tok}' on line {}", n + 1)))
    };
    let (n, l) = next("constraint count")?;
    let constraints = num(n, l.split_whitespace().next().unwrap_or(""))? as usize;
    let (n, l) = next("block count")?;
    let blocks = num(n, l.split_whitespace().next().unwrap_or(""))? as usize;
    let mut block_struct = Vec::with_capacity(blocks);
    while block_struct.len() < blocks {
        let (n, l) = next("block structure")?;
        for t in l.split_whitespace() {
            block_struct.push(num(n, t)? as i64);
        }
    }
    block_struct.truncate(blocks);
    let mut rhs = Vec::with_capacity(constraints);
    while rhs.len() < constraints {
        let (n, l) = next("right-hand side")?;
        for t in l.split_whitespace() {
            rhs.push(num(n, t)?);
        }
    }
    rhs.truncate(constraints);
    let mut entries = Vec::new();
    for (n, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 5 {
            return Err(Error::parse(n + 1, format!("line {}: expected 5 fields", n + 1)));
        }
        let int = |t: &str| -> Result<usize> {
            t.parse()
                .map_err(|_| Error::parse(n + 1, format!("line {}: bad index '{t}'", n + 1)))
        };
        entries.push(SdpaEntry {
            matrix: int(toks[0])?,
            block: int(toks[1])?,
            i: int(toks[2])?,
            j: int(toks[3])?,
            value: num(n, toks[4])?,
        });
    }
    Ok(SdpaData {
        constraints,
        block_struct,
        rhs,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only() {
        let data = to_sdpa(&SdpInstance::default());
        let text = write_sdpa(&data);
        assert_eq!(text.lines().filter(|l| !l.starts_with('"')).count(), 4);
        assert_eq!(read_sdpa(&text).unwrap(), data);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_sdpa("1\n1\n2\n1\n1 1 1 x 2\n").is_err());
        assert!(read_sdpa("").is_err());
    }
}
