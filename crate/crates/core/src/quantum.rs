//! Formal rational combinations of flags of one type.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{BigRational, Signed, Zero};

use crate::error::{Error, Result};
use crate::flag::{Flag, TypeSigma};
use crate::tree::Tree;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuantumFlag {
    terms: BTreeMap<Flag, BigRational>,
}

/// Parses `p/q`, integers and plain decimals into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Ok(r) = s.parse::<BigRational>() {
        return Ok(r);
    }
    let bad = || Error::parse(0, format!("invalid rational '{s}'"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').ok_or_else(bad)?;
    if int.is_empty() && frac.is_empty() || !(int.chars().chain(frac.chars())).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: num::BigInt = digits.parse().map_err(|_| bad())?;
    let den = num::BigInt::from(10).pow(frac.len() as u32);
    let r = BigRational::new(num, den);
    Ok(if neg { -r } else { r })
}

pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl QuantumFlag {
    pub fn zero() -> Self {
        QuantumFlag::default()
    }

    pub fn from_flag(f: Flag) -> Self {
        Self::term(BigRational::from_integer(1.into()), f)
    }

    pub fn term(c: BigRational, f: Flag) -> Self {
        let mut q = QuantumFlag::zero();
        q.add_term(f, c);
        q
    }

    pub fn add_term(&mut self, f: Flag, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(f) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, f: &Flag) -> BigRational {
        self.terms.get(f).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Flag, &BigRational)> {
        self.terms.iter()
    }

    pub fn flags(&self) -> impl Iterator<Item = &Flag> {
        self.terms.keys()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return QuantumFlag::zero();
        }
        QuantumFlag {
            terms: self.terms.iter().map(|(f, v)| (f.clone(), v * c)).collect(),
        }
    }

    /// Common type of all terms (∅ for the zero element).
    pub fn sigma(&self) -> Result<TypeSigma> {
        if self.is_zero() {
            return Ok(TypeSigma::empty());
        }
        crate::flag::common_type(self.terms.keys())
    }

    pub fn max_leaves(&self) -> usize {
        self.terms.keys().map(Tree::leaf_count).max().unwrap_or(0)
    }

    /// Sum of absolute values of the coefficients.
    pub fn l1_norm(&self) -> BigRational {
        self.terms.values().map(|v| v.abs()).sum()
    }

    /// Parses `c1 F1 + c2 F2 - ...` where a missing coefficient means 1.
    pub fn parse(s: &str) -> Result<Self> {
        let mut q = QuantumFlag::zero();
        let mut rest = s.trim();
        if rest == "0" {
            return Ok(q);
        }
        let at = |rest: &str| s.len() - rest.len();
        loop {
            let mut negative = false;
            while let Some(c) = rest.chars().next().filter(|c| *c == '+' || *c == '-') {
                negative ^= c == '-';
                rest = rest[1..].trim_start();
            }
            let start = rest
                .find(['(', '*', '•', '∅'])
                .ok_or_else(|| Error::parse(at(rest), "expected a tree"))?;
            let coef = match rest[..start].trim() {
                "" => BigRational::from_integer(1.into()),
                tok => parse_rational(tok)?,
            };
            let after = &rest[start..];
            let end = tree_token_end(after).ok_or_else(|| Error::parse(at(after), "unbalanced tree"))?;
            let tree = Tree::parse(&after[..end])?;
            q.add_term(tree, if negative { -coef } else { coef });
            rest = after[end..].trim_start();
            if rest.is_empty() {
                break;
            }
            if !rest.starts_with(['+', '-']) {
                return Err(Error::parse(at(rest), "expected '+' or '-'"));
            }
        }
        q.sigma()?;
        Ok(q)
    }

    /// One `<rational> <flag>` line per term.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (f, c) in &self.terms {
            out.push_str(&format!("{} {}\n", format_rational(c), f));
        }
        out
    }

    pub fn from_lines(s: &str) -> Result<Self> {
        let mut q = QuantumFlag::zero();
        for (n, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (c, f) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::parse(n, format!("line {}: expected '<rational> <flag>'", n + 1)))?;
            q.add_term(Tree::parse(f.trim())?, parse_rational(c)?);
        }
        q.sigma()?;
        Ok(q)
    }
}

fn tree_token_end(s: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            '*' | '•' | '∅' | '0'..='9' if depth == 0 => return Some(i + c.len_utf8()),
            '[' if depth == 0 => return s[i..].find(']').map(|j| i + j + 1),
            _ => {}
        }
        if depth < 0 {
            return None;
        }
    }
    None
}

impl fmt::Display for QuantumFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (flag, c)) in self.terms.iter().enumerate() {
            let abs = c.abs();
            if i == 0 {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else if c.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            write!(f, "{} {}", format_rational(&abs), flag)?;
        }
        Ok(())
    }
}

impl Add for &QuantumFlag {
    type Output = QuantumFlag;

    fn add(self, rhs: &QuantumFlag) -> QuantumFlag {
        let mut out = self.clone();
        for (f, c) in &rhs.terms {
            out.add_term(f.clone(), c.clone());
        }
        out
    }
}

impl Sub for &QuantumFlag {
    type Output = QuantumFlag;

    fn sub(self, rhs: &QuantumFlag) -> QuantumFlag {
        self + &(-rhs)
    }
}

impl Neg for &QuantumFlag {
    type Output = QuantumFlag;

    fn neg(self) -> QuantumFlag {
        QuantumFlag {
            terms: self.terms.iter().map(|(f, c)| (f.clone(), -c)).collect(),
        }
    }
}

impl Mul<&BigRational> for &QuantumFlag {
    type Output = QuantumFlag;

    fn mul(self, rhs: &BigRational) -> QuantumFlag {
        self.scale(rhs)
    }
}

impl FromIterator<(Flag, BigRational)> for QuantumFlag {
    fn from_iter<I: IntoIterator<Item = (Flag, BigRational)>>(iter: I) -> Self {
        let mut q = QuantumFlag::zero();
        for (f, c) in iter {
            q.add_term(f, c);
        }
        q
    }
}
