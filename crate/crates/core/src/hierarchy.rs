//! Level L of the sum-of-squares hierarchy.

use std::fmt;

use log::debug;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flag::{enumerate_flags, Flag, TypeSigma};
use crate::product::{moment_block, MomentBlock, ProductStrategy};
use crate::tree::{enumerate_trees, Tree};

#[derive(Clone, Debug)]
pub struct HierarchyBlock {
    pub sigma: TypeSigma,
    pub flags: Vec<Flag>,
    /// Moment matrix expanded to the level basis, when computed.
    pub moment: Option<MomentBlock>,
}

impl HierarchyBlock {
    pub fn dim(&self) -> usize {
        self.flags.len()
    }

    /// Blocks whose type already has `L` leaves are single positive multiples of a basis tree.
    pub fn is_unit(&self, level: usize) -> bool {
        self.sigma.size() == level
    }
}

#[derive(Clone, Debug)]
pub struct HierarchyLevel {
    pub level: usize,
    pub basis: Vec<Tree>,
    pub blocks: Vec<HierarchyBlock>,
}

/// Block sizes with multiplicities, largest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSignature {
    pub parts: Vec<(usize, usize)>,
}

impl BlockSignature {
    pub fn total(&self) -> usize {
        self.parts.iter().map(|(s, m)| s * m).sum()
    }
}

impl fmt::Display for BlockSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|(s, m)| format!("{s}_{m}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Admissible types at level `level`: one per tree shape with |σ| ≡ L mod 2.
pub fn level_types(level: usize) -> Vec<TypeSigma> {
    (level % 2..=level)
        .step_by(2)
        .flat_map(|k| enumerate_trees(k).into_iter().map(|t| TypeSigma::representative(&t)))
        .collect()
}

/// Types and flag vectors without moment matrices.
pub fn level_structure(level: usize) -> Result<HierarchyLevel> {
    if level < 2 {
        return Err(Error::Invalid(format!("hierarchy level must be at least 2, got {level}")));
    }
    let blocks = level_types(level)
        .into_par_iter()
        .map(|sigma| {
            let flags = enumerate_flags(&sigma, (level - sigma.size()) / 2);
            HierarchyBlock {
                sigma,
                flags,
                moment: None,
            }
        })
        .collect();
    Ok(HierarchyLevel {
        level,
        basis: enumerate_trees(level),
        blocks,
    })
}

/// Complete level with every moment block expanded to 𝕋_L.
pub fn build_level(level: usize, strategy: &dyn ProductStrategy) -> Result<HierarchyLevel> {
    let mut h = level_structure(level)?;
    let moments: Vec<MomentBlock> = h
        .blocks
        .par_iter()
        .map(|b| {
            debug!("level {level}: block of type {} with {} flags", b.sigma, b.flags.len());
            moment_block(strategy, &b.flags)?.expanded(level)
        })
        .collect::<Result<_>>()?;
    for (b, m) in h.blocks.iter_mut().zip(moments) {
        b.moment = Some(m);
    }
    Ok(h)
}

impl HierarchyLevel {
    pub fn block_signature(&self) -> BlockSignature {
        let mut sizes: Vec<usize> = self.blocks.iter().map(HierarchyBlock::dim).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let mut parts: Vec<(usize, usize)> = Vec::new();
        for s in sizes {
            match parts.last_mut() {
                Some((size, mult)) if *size == s => *mult += 1,
                _ => parts.push((s, 1)),
            }
        }
        BlockSignature { parts }
    }

    /// Position of each basis tree.
    pub fn basis_index(&self, t: &Tree) -> Option<usize> {
        self.basis.binary_search_by(|b| b.code().cmp(t.code())).ok()
    }
}
