//! Encoding of fully labeled trees by a ternary "pivot" predicate.
//!
//! For leaves `{i,j,k}` the predicate 𝒫(i;j,k) holds when `i` sits at height
//! one in the induced three-leaf tree.

use std::fmt;

use crate::error::{Error, Result};
use crate::tree::{canonicalize, RawTree, Tree};

/// Ternary relation on `[n]`, three pivot bits per unordered triple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriplePredicate {
    n: usize,
    bits: Vec<u8>,
    asymmetric: Option<(usize, usize, usize)>,
    degenerate: Option<(usize, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// 𝒫(i;j,k) present without 𝒫(i;k,j).
    Symmetry { i: usize, j: usize, k: usize },
    /// A triple with a repeated index.
    Degenerate { i: usize, j: usize, k: usize },
    /// Triple `{i,j,k}` has `count` pivots instead of one.
    Pivot {
        triple: (usize, usize, usize),
        count: u32,
    },
    /// 𝒫(i;j,k) holds but neither 𝒫(l;j,k) nor 𝒫(i;j,l).
    Transitivity {
        i: usize,
        j: usize,
        k: usize,
        l: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Symmetry { i, j, k } => {
                write!(f, "symmetry: P({i};{j},{k}) without P({i};{k},{j})")
            }
            Violation::Degenerate { i, j, k } => write!(f, "repeated index in ({i};{j},{k})"),
            Violation::Pivot { triple, count } => write!(
                f,
                "triple {{{},{},{}}} has {count} pivots",
                triple.0, triple.1, triple.2
            ),
            Violation::Transitivity { i, j, k, l } => write!(
                f,
                "transitivity: P({i};{j},{k}) but neither P({l};{j},{k}) nor P({i};{j},{l})"
            ),
        }
    }
}

fn sort3(a: usize, b: usize, c: usize) -> (usize, usize, usize) {
    let mut v = [a, b, c];
    v.sort_unstable();
    (v[0], v[1], v[2])
}

impl TriplePredicate {
    /// Relation with no triples; `n` is the ground-set size.
    pub fn empty(n: usize) -> Self {
        TriplePredicate {
            n,
            bits: vec![0; n * n * n],
            asymmetric: None,
            degenerate: None,
        }
    }

    /// Builds the relation from ordered triples `(i, j, k)` meaning 𝒫(i;j,k), 1-based.
    pub fn from_triples(n: usize, triples: &[(usize, usize, usize)]) -> Result<Self> {
        let mut p = TriplePredicate::empty(n);
        for &(i, j, k) in triples {
            if [i, j, k].iter().any(|&x| x == 0 || x > n) {
                return Err(Error::Invalid(format!("triple ({i};{j},{k}) outside [1,{n}]")));
            }
            if i == j || j == k || i == k {
                p.degenerate.get_or_insert((i, j, k));
                continue;
            }
            p.set(i, j, k);
        }
        for &(i, j, k) in triples {
            if i != j && j != k && i != k && !triples.contains(&(i, k, j)) {
                p.asymmetric.get_or_insert((i, j, k));
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize, k: usize) -> (usize, u8) {
        let (a, b, c) = sort3(i, j, k);
        let idx = ((a - 1) * self.n + (b - 1)) * self.n + (c - 1);
        let bit = if i == a {
            1
        } else if i == b {
            2
        } else {
            4
        };
        (idx, bit)
    }

    /// Declares 𝒫(i;j,k) (and hence 𝒫(i;k,j)).
    pub fn set(&mut self, i: usize, j: usize, k: usize) {
        let (idx, bit) = self.slot(i, j, k);
        self.bits[idx] |= bit;
    }

    pub fn holds(&self, i: usize, j: usize, k: usize) -> bool {
        if i == j || j == k || i == k {
            return false;
        }
        let (idx, bit) = self.slot(i, j, k);
        self.bits[idx] & bit != 0
    }

    /// The pivot of a triple that has exactly one.
    pub fn pivot(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        let (a, b, c) = sort3(i, j, k);
        let (idx, _) = self.slot(a, b, c);
        match self.bits[idx] {
            1 => Some(a),
            2 => Some(b),
            4 => Some(c),
            _ => None,
        }
    }

    /// Relation as a sorted list of ordered triples.
    pub fn triples(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for i in 1..=self.n {
            for j in 1..=self.n {
                for k in 1..=self.n {
                    if self.holds(i, j, k) {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }
}

/// Checks symmetry, the single-pivot axiom and the four-point axiom.
pub fn validate_predicate(p: &TriplePredicate) -> std::result::Result<(), Violation> {
    if let Some((i, j, k)) = p.degenerate {
        return Err(Violation::Degenerate { i, j, k });
    }
    if let Some((i, j, k)) = p.asymmetric {
        return Err(Violation::Symmetry { i, j, k });
    }
    let n = p.n;
    for a in 1..=n {
        for b in a + 1..=n {
            for c in b + 1..=n {
                let (idx, _) = p.slot(a, b, c);
                let count = p.bits[idx].count_ones();
                if count != 1 {
                    return Err(Violation::Pivot {
                        triple: (a, b, c),
                        count,
                    });
                }
            }
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            for k in j + 1..=n {
                if !p.holds(i, j, k) {
                    continue;
                }
                for l in 1..=n {
                    if l == i || l == j || l == k {
                        continue;
                    }
                    if !(p.holds(l, j, k) || p.holds(i, j, l)) {
                        return Err(Violation::Transitivity { i, j, k, l });
                    }
                }
            }
        }
    }
    Ok(())
}

fn require_full_labeling(t: &Tree) -> Result<()> {
    let labels = t.labels();
    if labels.len() != t.leaf_count() || labels.iter().enumerate().any(|(i, &l)| l != i + 1) {
        return Err(Error::Invalid(format!(
            "{t} is not labeled bijectively by 1..{}",
            t.leaf_count()
        )));
    }
    Ok(())
}

/// Predicate of a tree whose leaves are labeled `1..n`.
pub fn tree_to_predicate(t: &Tree) -> Result<TriplePredicate> {
    require_full_labeling(t)?;
    let n = t.leaf_count();
    let shape = t.shape();
    let mut pos = vec![0usize; n + 1];
    for (p, l) in shape.labels().iter().enumerate() {
        pos[l.expect("fully labeled")] = p;
    }
    let mut pred = TriplePredicate::empty(n);
    for a in 1..=n {
        for b in a + 1..=n {
            for c in b + 1..=n {
                let mask = (1u64 << pos[a]) | (1u64 << pos[b]) | (1u64 << pos[c]);
                let raw = shape.induced(mask).to_raw().expect("three leaves");
                let pivot = raw
                    .children
                    .iter()
                    .find(|ch| ch.children.is_empty())
                    .and_then(|ch| ch.label)
                    .expect("three-leaf tree has a leaf child");
                let (j, k) = match pivot {
                    x if x == a => (b, c),
                    x if x == b => (a, c),
                    _ => (a, b),
                };
                pred.set(pivot, j, k);
            }
        }
    }
    Ok(pred)
}

enum Build {
    Leaf(usize),
    Pair(Box<Build>, Box<Build>),
}

impl Build {
    fn any_leaf(&self) -> usize {
        match self {
            Build::Leaf(l) => *l,
            Build::Pair(a, _) => a.any_leaf(),
        }
    }

    fn insert(self, x: usize, p: &TriplePredicate) -> Build {
        match self {
            Build::Leaf(l) => Build::Pair(Box::new(Build::Leaf(l)), Box::new(Build::Leaf(x))),
            Build::Pair(a, b) => {
                let i = a.any_leaf();
                let j = b.any_leaf();
                if p.holds(x, i, j) {
                    Build::Pair(Box::new(Build::Pair(a, b)), Box::new(Build::Leaf(x)))
                } else if p.holds(i, x, j) {
                    Build::Pair(a, Box::new(b.insert(x, p)))
                } else {
                    Build::Pair(Box::new(a.insert(x, p)), b)
                }
            }
        }
    }

    fn raw(&self) -> RawTree {
        match self {
            Build::Leaf(l) => RawTree::labeled(*l),
            Build::Pair(a, b) => RawTree::pair(a.raw(), b.raw()),
        }
    }
}

/// Reconstructs the unique labeled tree with the given predicate.
pub fn predicate_to_tree(p: &TriplePredicate) -> Result<Tree> {
    if let Err(v) = validate_predicate(p) {
        return Err(Error::Invalid(format!("predicate violates an axiom: {v}")));
    }
    let n = p.n;
    if n == 0 {
        return Ok(Tree::empty());
    }
    let mut t = Build::Leaf(1);
    for x in 2..=n {
        t = t.insert(x, p);
    }
    canonicalize(&t.raw())
}
