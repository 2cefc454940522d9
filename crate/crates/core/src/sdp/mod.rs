//! Block semidefinite programs in equality standard form.
//!
//! minimize ⟨C,X⟩ + cₗᵀx + c_fᵀf subject to ⟨A_i,X⟩ + a_iᵀx + g_iᵀf = b_i,
//! X ⪰ 0 block diagonal, x ≥ 0, f free.

pub mod sdpa;
pub mod solver;

use num::{BigRational, ToPrimitive};

use crate::error::{Error, Result};
use crate::flag::{Flag, TypeSigma};
use crate::hierarchy::{build_level, HierarchyLevel};
use crate::product::{expand_to_level, Gluing};
use crate::quantum::QuantumFlag;
use crate::tree::Tree;

pub use solver::{solver_names, sdp_solver, SdpSolution, SdpSolver, SolveStatus, SolverOptions};

/// Entry `(block, i, j, value)` of a symmetric block matrix, `i ≥ j`; it stands
/// for both `(i,j)` and `(j,i)`.
pub type SymEntry = (usize, usize, usize, BigRational);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constraint {
    pub psd: Vec<SymEntry>,
    pub nonneg: Vec<(usize, BigRational)>,
    pub free: Vec<(usize, BigRational)>,
    pub rhs: BigRational,
}

/// Where a semidefinite block comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockOrigin {
    Moment { sigma: TypeSigma, flags: Vec<Flag> },
    Other(String),
}

/// Where a nonnegative scalar comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarOrigin {
    Moment { sigma: TypeSigma, flag: Flag },
    Slack(Tree),
    Other(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpInstance {
    pub psd_blocks: Vec<usize>,
    pub nonneg: usize,
    pub free: usize,
    pub constraints: Vec<Constraint>,
    pub cost_psd: Vec<SymEntry>,
    pub cost_nonneg: Vec<(usize, BigRational)>,
    pub cost_free: Vec<(usize, BigRational)>,
    /// Reported value is the negated optimum (the instance encodes a maximization).
    pub maximize: bool,
    pub level: usize,
    pub basis: Vec<Tree>,
    pub target: Option<QuantumFlag>,
    pub block_origins: Vec<BlockOrigin>,
    pub scalar_origins: Vec<ScalarOrigin>,
    pub free_names: Vec<String>,
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl SdpInstance {
    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    /// Structural sanity: indices in range, lower-triangle entries only.
    pub fn validate(&self) -> Result<()> {
        let check_psd = |entries: &[SymEntry], what: &str| -> Result<()> {
            for (b, i, j, _) in entries {
                let n = *self
                    .psd_blocks
                    .get(*b)
                    .ok_or_else(|| Error::Invalid(format!("{what}: block {b} out of range")))?;
                if i < j || *i >= n {
                    return Err(Error::Invalid(format!("{what}: entry ({i},{j}) invalid in block {b}")));
                }
            }
            Ok(())
        };
        check_psd(&self.cost_psd, "objective")?;
        for (k, c) in self.constraints.iter().enumerate() {
            check_psd(&c.psd, &format!("constraint {k}"))?;
            if c.nonneg.iter().any(|(i, _)| *i >= self.nonneg) || c.free.iter().any(|(i, _)| *i >= self.free) {
                return Err(Error::Invalid(format!("constraint {k}: scalar index out of range")));
            }
        }
        Ok(())
    }

    /// Converts the objective value of the encoded minimization to the reported bound.
    pub fn report(&self, objective: f64) -> f64 {
        if self.maximize {
            -objective
        } else {
            objective
        }
    }
}

/// Appends `coef·block` to every constraint, one constraint per basis tree.
pub(crate) fn add_moment_terms(
    constraints: &mut [Constraint],
    basis_index: &dyn Fn(&Tree) -> Option<usize>,
    block: usize,
    i: usize,
    j: usize,
    entry: &QuantumFlag,
) -> Result<()> {
    for (t, c) in entry.iter() {
        let u = basis_index(t).ok_or_else(|| Error::Size(format!("{t} is not a basis tree")))?;
        constraints[u].psd.push((block, i, j, c.clone()));
    }
    Ok(())
}

/// min t such that t·∅ − target is an SOS_L combination plus nonnegative basis trees.
pub fn assemble_bound_sdp(h: &HierarchyLevel, target: &QuantumFlag) -> Result<SdpInstance> {
    if !target.sigma()?.tree().is_empty() {
        return Err(Error::TypeMismatch("target must be a quantum tree".into()));
    }
    let level = h.level;
    if target.max_leaves() > level {
        return Err(Error::Size(format!(
            "target has {} leaves, more than level {level}",
            target.max_leaves()
        )));
    }
    let target = expand_to_level(target, level)?;
    let mut inst = SdpInstance {
        level,
        basis: h.basis.clone(),
        constraints: h
            .basis
            .iter()
            .map(|u| Constraint {
                rhs: -target.coefficient(u),
                ..Constraint::default()
            })
            .collect(),
        target: Some(target),
        ..SdpInstance::default()
    };
    let index = |t: &Tree| h.basis_index(t);
    for b in h.blocks.iter().filter(|b| !b.is_unit(level)) {
        let m = b
            .moment
            .as_ref()
            .ok_or_else(|| Error::Invalid("hierarchy level lacks moment blocks".into()))?;
        if m.dim() == 1 {
            let s = inst.nonneg;
            for (t, c) in m.entry(0, 0).iter() {
                let u = index(t).ok_or_else(|| Error::Size(format!("{t} is not a basis tree")))?;
                inst.constraints[u].nonneg.push((s, c.clone()));
            }
            inst.nonneg += 1;
            inst.scalar_origins.push(ScalarOrigin::Moment {
                sigma: b.sigma.clone(),
                flag: b.flags[0].clone(),
            });
        } else {
            let blk = inst.psd_blocks.len();
            for i in 0..m.dim() {
                for j in 0..=i {
                    add_moment_terms(&mut inst.constraints, &index, blk, i, j, m.entry(i, j))?;
                }
            }
            inst.psd_blocks.push(m.dim());
            inst.block_origins.push(BlockOrigin::Moment {
                sigma: b.sigma.clone(),
                flags: b.flags.clone(),
            });
        }
    }
    let one = BigRational::from_integer(1.into());
    for (u, t) in h.basis.iter().enumerate() {
        inst.constraints[u].nonneg.push((inst.nonneg, one.clone()));
        inst.scalar_origins.push(ScalarOrigin::Slack(t.clone()));
        inst.nonneg += 1;
    }
    for c in &mut inst.constraints {
        c.free.push((0, -one.clone()));
    }
    inst.free = 1;
    inst.free_names.push("t".into());
    inst.cost_free.push((0, one));
    inst.validate()?;
    Ok(inst)
}

/// The inducibility relaxation I_L(target).
pub fn assemble_inducibility_sdp(target: &Tree, level: usize) -> Result<SdpInstance> {
    if !target.is_unlabeled() {
        return Err(Error::Invalid(format!("{target} has labeled leaves")));
    }
    if target.leaf_count() > level {
        return Err(Error::Size(format!(
            "target has {} leaves, more than level {level}",
            target.leaf_count()
        )));
    }
    let h = build_level(level, &Gluing)?;
    assemble_bound_sdp(&h, &QuantumFlag::from_flag(target.clone()))
}

/// Residual b − A(X) − a x − g f of a floating point candidate, max norm.
pub fn primal_residual(inst: &SdpInstance, sol: &SdpSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for c in &inst.constraints {
        let mut lhs = 0.0;
        for (b, i, j, v) in &c.psd {
            let x = sol.x_psd[*b][(*i, *j)];
            lhs += to_f64(v) * x * if i == j { 1.0 } else { 2.0 };
        }
        for (k, v) in &c.nonneg {
            lhs += to_f64(v) * sol.x_nonneg[*k];
        }
        for (k, v) in &c.free {
            lhs += to_f64(v) * sol.x_free[*k];
        }
        worst = worst.max((to_f64(&c.rhs) - lhs).abs());
    }
    worst
}
