//! Gluing products, the downward operator, quotient expansion and moment blocks.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use num::{BigInt, BigRational, Zero};

use crate::error::{Error, Result};
use crate::flag::{binomial, enumerate_flags, falling, positions, q_sigma, subsets, Flag, TypeSigma};
use crate::quantum::QuantumFlag;
use crate::tree::enumerate_trees;

fn ratio(num: u64, den: &BigInt) -> BigRational {
    BigRational::new(BigInt::from(num), den.clone())
}

/// Label-averaging map ⟦·⟧ onto quantum trees.
pub fn downward(f: &QuantumFlag) -> QuantumFlag {
    f.iter()
        .map(|(flag, c)| (flag.unlabeled(), c * q_sigma(flag)))
        .collect()
}

/// Rewrites every term as a combination of flags with exactly `n` leaves.
pub fn expand_to_level(f: &QuantumFlag, n: usize) -> Result<QuantumFlag> {
    let sigma = f.sigma()?;
    if f.max_leaves() > n {
        return Err(Error::Size(format!(
            "cannot expand a {}-leaf term to level {n}",
            f.max_leaves()
        )));
    }
    if n < sigma.size() {
        return Err(Error::Size(format!("level {n} is below the type size")));
    }
    let mut by_size: BTreeMap<usize, Vec<(&Flag, &BigRational)>> = BTreeMap::new();
    let mut out = QuantumFlag::zero();
    for (flag, c) in f.iter() {
        if flag.leaf_count() == n {
            out.add_term(flag.clone(), c.clone());
        } else {
            by_size.entry(flag.leaf_count()).or_default().push((flag, c));
        }
    }
    if by_size.is_empty() {
        return Ok(out);
    }
    let k = sigma.size();
    for host in enumerate_flags(&sigma, n - k) {
        let shape = host.shape();
        let base = shape.full_mask() & !shape.unlabeled_mask();
        let free = shape.unlabeled_mask();
        for (&size, terms) in &by_size {
            let den = binomial(n - k, size - k);
            let mut counts: HashMap<Flag, u64> = HashMap::new();
            for v in subsets(free, size - k) {
                *counts.entry(shape.induced(base | v)).or_insert(0) += 1;
            }
            for (flag, c) in terms {
                if let Some(&hits) = counts.get(*flag) {
                    out.add_term(host.clone(), *c * ratio(hits, &den));
                }
            }
        }
    }
    Ok(out)
}

/// Bilinear gluing product of two σ-combinations, as σ-flags on `n` leaves.
pub fn multiply(a: &QuantumFlag, b: &QuantumFlag, n: usize) -> Result<QuantumFlag> {
    if a.is_zero() || b.is_zero() {
        return Ok(QuantumFlag::zero());
    }
    let sigma = a.sigma()?;
    let sb = b.sigma()?;
    if sigma != sb {
        return Err(Error::TypeMismatch(format!("factors have types {sigma} and {sb}")));
    }
    let k = sigma.size();
    let need = a.max_leaves() + b.max_leaves() - k;
    if n < need {
        return Err(Error::Size(format!("gluing needs at least {need} leaves, got {n}")));
    }
    let sizes = |q: &QuantumFlag| -> Vec<usize> {
        let mut v: Vec<usize> = q.flags().map(|f| f.leaf_count() - k).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (sa, sb) = (sizes(a), sizes(b));
    let mut out = QuantumFlag::zero();
    for host in enumerate_flags(&sigma, n - k) {
        let shape = host.shape();
        let base = shape.full_mask() & !shape.unlabeled_mask();
        let free = shape.unlabeled_mask();
        let mut total = BigRational::zero();
        for &m1 in &sa {
            for &m2 in &sb {
                let den = binomial(n - k, m1) * binomial(n - k - m1, m2);
                let mut hits: HashMap<(Flag, Flag), u64> = HashMap::new();
                for v1 in subsets(free, m1) {
                    let f1 = shape.induced(base | v1);
                    if a.coefficient(&f1).is_zero() {
                        continue;
                    }
                    for v2 in subsets(free & !v1, m2) {
                        let f2 = shape.induced(base | v2);
                        *hits.entry((f1.clone(), f2)).or_insert(0) += 1;
                    }
                }
                for ((f1, f2), h) in hits {
                    let cb = b.coefficient(&f2);
                    if !cb.is_zero() {
                        total += a.coefficient(&f1) * cb * ratio(h, &den);
                    }
                }
            }
        }
        out.add_term(host, total);
    }
    Ok(out)
}

/// Σ_T p(s1,s2;T)·T over σ-flags T with `n` leaves.
pub fn glue_product(s1: &Flag, s2: &Flag, n: usize) -> Result<QuantumFlag> {
    multiply(
        &QuantumFlag::from_flag(s1.clone()),
        &QuantumFlag::from_flag(s2.clone()),
        n,
    )
}

/// Smallest level on which two flags of a common type can be glued.
pub fn min_level(s1: &Flag, s2: &Flag) -> usize {
    s1.leaf_count() + s2.leaf_count() - s1.label_count()
}

/// ⟦s1·s2⟧ on the minimal gluing level.
pub fn unlabeled_product(s1: &Flag, s2: &Flag) -> Result<QuantumFlag> {
    Ok(downward(&glue_product(s1, s2, min_level(s1, s2))?))
}

/// Symmetric matrix of quantum trees ⟦F_i F_j⟧, stored as a lower triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBlock {
    pub sigma: TypeSigma,
    pub flags: Vec<Flag>,
    pub level: usize,
    entries: Vec<QuantumFlag>,
}

fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

impl MomentBlock {
    pub fn dim(&self) -> usize {
        self.flags.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &QuantumFlag {
        &self.entries[tri(i, j)]
    }

    /// Number of distinct symmetric entries held.
    pub fn stored_entries(&self) -> usize {
        self.entries.len()
    }

    /// Re-expresses every entry on `level` leaves.
    pub fn expanded(&self, level: usize) -> Result<MomentBlock> {
        if level == self.level {
            return Ok(self.clone());
        }
        let entries = self
            .entries
            .iter()
            .map(|e| expand_to_level(e, level))
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentBlock {
            sigma: self.sigma.clone(),
            flags: self.flags.clone(),
            level,
            entries,
        })
    }
}

/// Algorithm computing the moment block of a flag vector.
pub trait ProductStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Entries on the minimal level `|σ| + 2m` for flags with `m` unlabeled leaves.
    fn moment_entries(&self, sigma: &TypeSigma, flags: &[Flag]) -> Result<Vec<QuantumFlag>>;
}

fn flag_index(flags: &[Flag]) -> HashMap<&Flag, usize> {
    flags.iter().enumerate().map(|(i, f)| (f, i)).collect()
}

/// Walks the unlabeled trees of the target level and splits each one into
/// all pairs of σ-flags whose leaf sets cover it.
pub struct Gluing;

impl ProductStrategy for Gluing {
    fn name(&self) -> &'static str {
        "gluing"
    }

    fn moment_entries(&self, sigma: &TypeSigma, flags: &[Flag]) -> Result<Vec<QuantumFlag>> {
        let k = sigma.size();
        let m = flags[0].leaf_count() - k;
        if m == 0 {
            return Ok(vec![downward(&QuantumFlag::from_flag(sigma.as_flag()))]);
        }
        let n = k + 2 * m;
        let index = flag_index(flags);
        let shape_sigma = sigma.tree().unlabeled();
        let perms: Vec<Vec<usize>> = if k == 0 {
            vec![Vec::new()]
        } else {
            (1..=k).permutations(k).collect()
        };
        let basis = enumerate_trees(n);
        let mut counts: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); tri(flags.len(), 0)];
        for (ui, u) in basis.iter().enumerate() {
            let shape = u.shape();
            let full = shape.full_mask();
            for center in subsets(full, k) {
                if shape.induced_unlabeled(center) != shape_sigma {
                    continue;
                }
                let spots = positions(center);
                let rest = full & !center;
                for perm in &perms {
                    let mut labels = vec![None; n];
                    for (&p, &l) in spots.iter().zip(perm) {
                        labels[p] = Some(l);
                    }
                    if shape.induced_relabeled(center, &labels) != *sigma.tree() {
                        continue;
                    }
                    let halves: HashMap<u64, Option<usize>> = subsets(rest, m)
                        .map(|v| {
                            let f = shape.induced_relabeled(center | v, &labels);
                            (v, index.get(&f).copied())
                        })
                        .collect();
                    for (&v1, &i) in &halves {
                        let j = halves[&(rest & !v1)];
                        if let (Some(i), Some(j)) = (i, j) {
                            if i >= j {
                                *counts[tri(i, j)].entry(ui).or_insert(0) += 1;
                            }
                        }
                    }
                }
            }
        }
        let den = falling(n, k) * binomial(n - k, m);
        Ok(counts
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .map(|(ui, h)| (basis[ui].clone(), ratio(h, &den)))
                    .collect()
            })
            .collect())
    }
}

/// Enumerates the σ-flags of the target level, computes sunflower densities
/// for every flag pair and applies the downward operator.
pub struct Sunflower;

impl ProductStrategy for Sunflower {
    fn name(&self) -> &'static str {
        "sunflower"
    }

    fn moment_entries(&self, sigma: &TypeSigma, flags: &[Flag]) -> Result<Vec<QuantumFlag>> {
        let k = sigma.size();
        let m = flags[0].leaf_count() - k;
        let index = flag_index(flags);
        let den = binomial(2 * m, m);
        let mut entries = vec![QuantumFlag::zero(); tri(flags.len(), 0)];
        for host in enumerate_flags(sigma, 2 * m) {
            let shape = host.shape();
            let base = shape.full_mask() & !shape.unlabeled_mask();
            let free = shape.unlabeled_mask();
            let mut hits: BTreeMap<usize, u64> = BTreeMap::new();
            for v1 in subsets(free, m) {
                let i = index.get(&shape.induced(base | v1)).copied();
                let j = index.get(&shape.induced(base | (free & !v1))).copied();
                if let (Some(i), Some(j)) = (i, j) {
                    if i >= j {
                        *hits.entry(tri(i, j)).or_insert(0) += 1;
                    }
                }
            }
            let q = q_sigma(&host);
            let unlabeled = host.unlabeled();
            for (t, h) in hits {
                entries[t].add_term(unlabeled.clone(), ratio(h, &den) * &q);
            }
        }
        Ok(entries)
    }
}

/// Names of the registered product strategies.
pub fn strategy_names() -> Vec<&'static str> {
    vec!["gluing", "sunflower"]
}

pub fn product_strategy(name: &str) -> Result<Box<dyn ProductStrategy>> {
    match name {
        "gluing" => Ok(Box::new(Gluing)),
        "sunflower" => Ok(Box::new(Sunflower)),
        _ => Err(Error::UnknownStrategy {
            kind: "product strategy",
            name: name.to_string(),
            available: strategy_names().join(", "),
        }),
    }
}

/// Moment block of equal-size flags of one type, on the minimal level.
pub fn moment_block(strategy: &dyn ProductStrategy, flags: &[Flag]) -> Result<MomentBlock> {
    let sigma = crate::flag::common_type(flags)?;
    let size = flags[0].leaf_count();
    if flags.iter().any(|f| f.leaf_count() != size) {
        return Err(Error::Size("flags of a moment block must have equal size".into()));
    }
    let mut sorted = flags.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != flags.len() {
        return Err(Error::Invalid("repeated flag in a moment block".into()));
    }
    let entries = strategy.moment_entries(&sigma, flags)?;
    Ok(MomentBlock {
        level: 2 * size - sigma.size(),
        sigma,
        flags: flags.to_vec(),
        entries,
    })
}

/// ⟦𝓕𝓕ᵀ⟧ computed with the default gluing strategy.
pub fn unlabeled_square_matrix(flags: &[Flag]) -> Result<MomentBlock> {
    moment_block(&Gluing, flags)
}
