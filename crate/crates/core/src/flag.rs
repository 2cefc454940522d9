//! Types, flags and (sunflower) flag densities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use num::{BigInt, BigRational, One};

use crate::error::{Error, Result};
use crate::tree::{canonicalize, LeafTree, RawTree, Tree};

/// A flag is a tree in which some leaves carry the labels `1..k` of its type.
pub type Flag = Tree;

/// Fully labeled tree whose labels are exactly `1..k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeSigma {
    tree: Tree,
}

impl fmt::Display for TypeSigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.tree.fmt(f)
    }
}

impl TypeSigma {
    pub fn empty() -> Self {
        TypeSigma { tree: Tree::empty() }
    }

    pub fn new(tree: Tree) -> Result<Self> {
        let labels = tree.labels();
        if labels.len() != tree.leaf_count() || labels.iter().enumerate().any(|(i, &l)| l != i + 1) {
            return Err(Error::Invalid(format!(
                "type {tree} must label every leaf with 1..{}",
                tree.leaf_count()
            )));
        }
        Ok(TypeSigma { tree })
    }

    pub fn parse(s: &str) -> Result<Self> {
        TypeSigma::new(Tree::parse(s)?)
    }

    /// Labels the leaves of an unlabeled shape `1..k` in depth-first order of its code.
    pub fn representative(shape: &Tree) -> Self {
        fn relabel(raw: &RawTree, next: &mut usize) -> RawTree {
            if raw.children.is_empty() {
                *next += 1;
                RawTree::labeled(*next)
            } else {
                let a = relabel(&raw.children[0], next);
                let b = relabel(&raw.children[1], next);
                RawTree::pair(a, b)
            }
        }
        match shape.unlabeled().to_raw() {
            None => TypeSigma::empty(),
            Some(raw) => {
                let tree = canonicalize(&relabel(&raw, &mut 0)).expect("relabeling is valid");
                TypeSigma { tree }
            }
        }
    }

    /// Type realized by the labeled leaves of a flag.
    pub fn of_flag(f: &Flag) -> Result<Self> {
        let labels = f.labels();
        if labels.is_empty() {
            return Ok(TypeSigma::empty());
        }
        TypeSigma::new(f.induced_by_labels(&labels)?)
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn size(&self) -> usize {
        self.tree.leaf_count()
    }

    /// The type viewed as a flag over itself.
    pub fn as_flag(&self) -> Flag {
        self.tree.clone()
    }
}

/// Common type of a collection of flags.
pub fn common_type<'a>(flags: impl IntoIterator<Item = &'a Flag>) -> Result<TypeSigma> {
    let mut sigma: Option<TypeSigma> = None;
    for f in flags {
        let s = TypeSigma::of_flag(f)?;
        match &sigma {
            None => sigma = Some(s),
            Some(prev) if *prev != s => {
                return Err(Error::TypeMismatch(format!(
                    "{f} has type {s}, expected {prev}"
                )))
            }
            _ => {}
        }
    }
    sigma.ok_or_else(|| Error::Invalid("no flags given".into()))
}

/// All σ-flags with `extra` unlabeled leaves, sorted.
pub fn enumerate_flags(sigma: &TypeSigma, extra: usize) -> Vec<Flag> {
    let mut current: BTreeSet<Flag> = BTreeSet::from([sigma.as_flag()]);
    for _ in 0..extra {
        current = current.iter().flat_map(|f| f.insertions(None)).collect();
    }
    current.into_iter().collect()
}

pub(crate) fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::from(0);
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub(crate) fn falling(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i))
}

/// Leaf positions set in `mask`.
pub(crate) fn positions(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// All `size`-subsets of the positions in `mask`, as masks.
pub(crate) fn subsets(mask: u64, size: usize) -> impl Iterator<Item = u64> {
    positions(mask)
        .into_iter()
        .combinations(size)
        .map(|c| c.iter().fold(0u64, |m, &i| m | (1 << i)))
}

fn labeled_mask(shape: &LeafTree) -> u64 {
    shape.full_mask() & !shape.unlabeled_mask()
}

fn check_same_type(a: &Flag, b: &Flag) -> Result<TypeSigma> {
    common_type([a, b])
}

/// Induced flags of a given size, counted over all unlabeled leaf subsets.
pub fn flag_distribution(t: &Flag, size: usize) -> Result<BTreeMap<Flag, u64>> {
    let k = t.label_count();
    if size < k || size > t.leaf_count() {
        return Err(Error::Size(format!(
            "cannot induce {size}-leaf flags of {t} with {k} labels"
        )));
    }
    let shape = t.shape();
    let base = labeled_mask(&shape);
    let mut out = BTreeMap::new();
    for v in subsets(shape.unlabeled_mask(), size - k) {
        *out.entry(shape.induced(base | v)).or_insert(0) += 1;
    }
    Ok(out)
}

/// Probability that a random set of |s|−|σ| unlabeled leaves of `t` induces `s`.
pub fn flag_density(s: &Flag, t: &Flag) -> Result<BigRational> {
    check_same_type(s, t)?;
    if s.leaf_count() > t.leaf_count() {
        return Err(Error::Size(format!("{s} is larger than {t}")));
    }
    let k = s.label_count();
    let shape = t.shape();
    let base = labeled_mask(&shape);
    let m = s.leaf_count() - k;
    let hits = subsets(shape.unlabeled_mask(), m)
        .filter(|&v| shape.induced(base | v) == *s)
        .count();
    Ok(BigRational::new(
        BigInt::from(hits),
        binomial(t.unlabeled_count(), m),
    ))
}

/// Probability that two disjoint random petals of `t` induce `s1` and `s2`.
pub fn sunflower_density(s1: &Flag, s2: &Flag, t: &Flag) -> Result<BigRational> {
    let sigma = check_same_type(s1, s2)?;
    let tt = TypeSigma::of_flag(t)?;
    if tt != sigma {
        return Err(Error::TypeMismatch(format!("{t} has type {tt}, expected {sigma}")));
    }
    let k = sigma.size();
    let m1 = s1.leaf_count() - k;
    let m2 = s2.leaf_count() - k;
    let u = t.unlabeled_count();
    if m1 + m2 > u {
        return Err(Error::Size(format!(
            "petals of {s1} and {s2} do not fit into {t}"
        )));
    }
    let shape = t.shape();
    let base = labeled_mask(&shape);
    let free = shape.unlabeled_mask();
    let mut hits = 0u64;
    for v1 in subsets(free, m1) {
        if shape.induced(base | v1) != *s1 {
            continue;
        }
        hits += subsets(free & !v1, m2)
            .filter(|&v2| shape.induced(base | v2) == *s2)
            .count() as u64;
    }
    Ok(BigRational::new(
        BigInt::from(hits),
        binomial(u, m1) * binomial(u - m1, m2),
    ))
}

/// Normalizer q_σ(T) = (n−k)!/n! · |Aut(T|₀)| / |Aut(T)|.
pub fn q_sigma(t: &Flag) -> BigRational {
    let n = t.leaf_count();
    let k = t.label_count();
    let aut0 = BigInt::from(t.unlabeled().automorphism_count());
    let aut = BigInt::from(t.automorphism_count());
    BigRational::new(aut0, falling(n, k) * aut)
}
