//! Exact rational sum-of-squares certificates: rounding and verification.

use std::collections::BTreeMap;
use std::fmt;

use log::debug;
use nalgebra::SymmetricEigen;
use num::{BigInt, BigRational, FromPrimitive, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::flag::{common_type, Flag, TypeSigma};
use crate::product::{expand_to_level, min_level, moment_block, unlabeled_product, Gluing};
use crate::quantum::{format_rational, parse_rational, QuantumFlag};
use crate::sdp::{BlockOrigin, ScalarOrigin, SdpInstance, SdpSolution};
use crate::tree::{enumerate_trees, Tree};

/// Exact rational serialized as `"p/q"`; integers are accepted as JSON numbers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rat(pub BigRational);

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) => parse_rational(&s).map(Rat).map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Rat(BigRational::from_integer(i.into()))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// bound·∅ − target equals the certificate expression.
    Eq,
    /// bound·∅ − target minus the certificate expression has nonnegative coefficients.
    Geq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetJson {
    Tree(String),
    Combination(BTreeMap<String, Rat>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockJson {
    #[serde(rename = "type")]
    pub sigma: String,
    pub flags: Vec<String>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<Rat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Rat>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub level: usize,
    pub target: TargetJson,
    pub bound: Rat,
    pub relation: Relation,
    pub blocks: Vec<BlockJson>,
    #[serde(default)]
    pub slacks: BTreeMap<String, Rat>,
}

/// One Gram factor: the block contributes ⟨V diag(w) Vᵀ, ⟦𝓕𝓕ᵀ⟧⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct CertBlock {
    pub sigma: TypeSigma,
    pub flags: Vec<Flag>,
    /// Rows follow `flags`; each column is one squared combination.
    pub v: Vec<Vec<BigRational>>,
    pub weights: Vec<BigRational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RationalCertificate {
    pub level: usize,
    pub target: QuantumFlag,
    pub bound: BigRational,
    pub relation: Relation,
    pub blocks: Vec<CertBlock>,
    pub slacks: BTreeMap<Tree, BigRational>,
}

fn one() -> BigRational {
    BigRational::from_integer(1.into())
}

impl CertBlock {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// Gram matrix V diag(w) Vᵀ.
    pub fn gram(&self) -> Vec<Vec<BigRational>> {
        let n = self.flags.len();
        let mut m = vec![vec![BigRational::zero(); n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut acc = BigRational::zero();
                for (c, w) in self.weights.iter().enumerate() {
                    if !self.v[i][c].is_zero() && !self.v[j][c].is_zero() {
                        acc += &self.v[i][c] * &self.v[j][c] * w;
                    }
                }
                m[j][i] = acc.clone();
                m[i][j] = acc;
            }
        }
        m
    }

    fn check(&self) -> Result<()> {
        let rows = self.v.len();
        if rows != self.flags.len() {
            return Err(Error::Certificate(format!(
                "block of type {}: V has {rows} rows for {} flags",
                self.sigma,
                self.flags.len()
            )));
        }
        if self.v.iter().any(|r| r.len() != self.weights.len()) {
            return Err(Error::Certificate(format!(
                "block of type {}: V rows must all have {} columns",
                self.sigma,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(Signed::is_negative) {
            return Err(Error::Certificate(format!(
                "block of type {}: negative weight",
                self.sigma
            )));
        }
        if !self.flags.is_empty() {
            let found = common_type(&self.flags)?;
            if found != self.sigma {
                return Err(Error::Certificate(format!(
                    "flags have type {found}, block declares {}",
                    self.sigma
                )));
            }
        }
        Ok(())
    }
}

impl RationalCertificate {
    pub fn from_json_value(c: &CertificateJson) -> Result<Self> {
        let target = match &c.target {
            TargetJson::Tree(s) => QuantumFlag::from_flag(Tree::parse_unlabeled(s)?),
            TargetJson::Combination(map) => {
                let mut q = QuantumFlag::zero();
                for (t, r) in map {
                    q.add_term(Tree::parse_unlabeled(t)?, r.0.clone());
                }
                q
            }
        };
        let blocks = c
            .blocks
            .iter()
            .map(|b| {
                let flags = b.flags.iter().map(|f| Tree::parse(f)).collect::<Result<Vec<_>>>()?;
                let rank = b.v.first().map_or(0, Vec::len);
                let weights = match &b.weights {
                    Some(w) => w.iter().map(|r| r.0.clone()).collect(),
                    None => vec![one(); rank],
                };
                let block = CertBlock {
                    sigma: TypeSigma::parse(&b.sigma)?,
                    flags,
                    v: b.v.iter().map(|r| r.iter().map(|x| x.0.clone()).collect()).collect(),
                    weights,
                };
                block.check()?;
                Ok(block)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut slacks = BTreeMap::new();
        for (t, r) in &c.slacks {
            slacks.insert(Tree::parse_unlabeled(t)?, r.0.clone());
        }
        Ok(RationalCertificate {
            level: c.level,
            target,
            bound: c.bound.0.clone(),
            relation: c.relation,
            blocks,
            slacks,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(text)?)
    }

    pub fn to_json_value(&self) -> CertificateJson {
        let target = if self.target.len() == 1 && self.target.iter().next().is_some_and(|(_, c)| *c == one()) {
            TargetJson::Tree(self.target.flags().next().expect("one term").to_string())
        } else {
            TargetJson::Combination(self.target.iter().map(|(t, c)| (t.to_string(), Rat(c.clone()))).collect())
        };
        CertificateJson {
            level: self.level,
            target,
            bound: Rat(self.bound.clone()),
            relation: self.relation,
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockJson {
                    sigma: b.sigma.to_string(),
                    flags: b.flags.iter().map(ToString::to_string).collect(),
                    v: b.v.iter().map(|r| r.iter().map(|x| Rat(x.clone())).collect()).collect(),
                    weights: if b.weights.iter().all(|w| *w == one()) {
                        None
                    } else {
                        Some(b.weights.iter().map(|w| Rat(w.clone())).collect())
                    },
                })
                .collect(),
            slacks: self.slacks.iter().map(|(t, c)| (t.to_string(), Rat(c.clone()))).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("serializable")
    }

    /// Σ_blocks ⟨V diag(w) Vᵀ, ⟦𝓕𝓕ᵀ⟧⟩ on the certificate level.
    pub fn sos_part(&self) -> Result<QuantumFlag> {
        let level = self.level;
        let mut total = QuantumFlag::zero();
        for b in &self.blocks {
            b.check()?;
            if b.flags.is_empty() {
                continue;
            }
            for f in &b.flags {
                let need = 2 * f.leaf_count() - b.sigma.size();
                if need > level {
                    return Err(Error::Certificate(format!(
                        "⟦{f}·{f}⟧ needs {need} leaves, certificate level is {level}"
                    )));
                }
            }
            let gram = b.gram();
            let uniform = b.flags.iter().all(|f| f.leaf_count() == b.flags[0].leaf_count());
            let block = if uniform {
                Some(moment_block(&Gluing, &b.flags)?.expanded(level)?)
            } else {
                None
            };
            for i in 0..b.flags.len() {
                for j in 0..=i {
                    let g = &gram[i][j];
                    if g.is_zero() {
                        continue;
                    }
                    let entry = match &block {
                        Some(m) => m.entry(i, j).clone(),
                        None => {
                            if min_level(&b.flags[i], &b.flags[j]) > level {
                                return Err(Error::Certificate("flag product exceeds level".into()));
                            }
                            expand_to_level(&unlabeled_product(&b.flags[i], &b.flags[j])?, level)?
                        }
                    };
                    let factor = if i == j { g.clone() } else { g * BigRational::from_integer(2.into()) };
                    total = &total + &entry.scale(&factor);
                }
            }
        }
        Ok(total)
    }

    /// bound·∅ − target − SOS − slacks, on the certificate level.
    pub fn residual(&self) -> Result<QuantumFlag> {
        let level = self.level;
        if self.target.max_leaves() > level {
            return Err(Error::Certificate("target larger than certificate level".into()));
        }
        if !self.target.sigma()?.tree().is_empty() {
            return Err(Error::Certificate("target must be unlabeled".into()));
        }
        let mut slack = QuantumFlag::zero();
        for (t, c) in &self.slacks {
            if c.is_negative() {
                return Err(Error::Certificate(format!("negative slack on {t}")));
            }
            if t.leaf_count() > level {
                return Err(Error::Certificate(format!("slack tree {t} larger than level")));
            }
            slack.add_term(t.clone(), c.clone());
        }
        let lhs = &QuantumFlag::term(self.bound.clone(), Tree::empty()) - &self.target;
        let lhs = expand_to_level(&lhs, level)?;
        let rhs = &self.sos_part()? + &expand_to_level(&slack, level)?;
        Ok(&lhs - &rhs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VerifyOutcome {
    Verified { bound: BigRational },
    Mismatch { tree: Tree, residual: BigRational },
}

impl fmt::Display for VerifyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyOutcome::Verified { bound } => write!(f, "verified: bound {}", format_rational(bound)),
            VerifyOutcome::Mismatch { tree, residual } => {
                write!(f, "mismatch at {tree}: residual coefficient {}", format_rational(residual))
            }
        }
    }
}

/// Checks the certificate identity (or inequality) in exact arithmetic.
pub fn verify_certificate(cert: &RationalCertificate) -> Result<VerifyOutcome> {
    let residual = cert.residual()?;
    for u in enumerate_trees(cert.level) {
        let c = residual.coefficient(&u);
        let bad = match cert.relation {
            Relation::Eq => !c.is_zero(),
            Relation::Geq => c.is_negative(),
        };
        if bad {
            return Ok(VerifyOutcome::Mismatch { tree: u, residual: c });
        }
    }
    Ok(VerifyOutcome::Verified {
        bound: cert.bound.clone(),
    })
}

/// Exact Vᵀv for each claimed kernel vector of the block's Gram matrix; zero means ok.
pub fn kernel_check(block: &CertBlock, vectors: &[Vec<BigRational>]) -> Result<Vec<Vec<BigRational>>> {
    block.check()?;
    vectors
        .iter()
        .map(|v| {
            if v.len() != block.flags.len() {
                return Err(Error::Size(format!(
                    "vector of length {} against a block with {} flags",
                    v.len(),
                    block.flags.len()
                )));
            }
            Ok((0..block.rank())
                .filter(|&c| !block.weights[c].is_zero())
                .map(|c| (0..v.len()).map(|i| &block.v[i][c] * &v[i]).sum())
                .collect())
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RoundingOptions {
    /// Initial common denominator of the rounded factors.
    pub denominator: BigInt,
    /// Largest denominator tried before giving up.
    pub max_denominator: BigInt,
    /// Accepted Σ|c_T| of the exact error term.
    pub budget: f64,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        RoundingOptions {
            denominator: BigInt::from(10u64.pow(12)),
            max_denominator: BigInt::from(10).pow(30),
            budget: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RoundedBound {
    pub certificate: RationalCertificate,
    /// Rigorous bound t + Σ|c_T|.
    pub bound: BigRational,
    /// Rounded objective value t.
    pub t: BigRational,
    /// Σ|c_T| of the exact error term.
    pub error: BigRational,
    pub denominator: BigInt,
}

fn round_to(x: f64, den: &BigInt) -> BigRational {
    let scaled = BigRational::from_f64(x).unwrap_or_else(BigRational::zero) * BigRational::from_integer(den.clone());
    BigRational::new(scaled.round().to_integer(), den.clone())
}

fn round_once(inst: &SdpInstance, sol: &SdpSolution, den: &BigInt) -> Result<RoundedBound> {
    let mut blocks = Vec::new();
    let mut grams: Vec<Vec<Vec<BigRational>>> = Vec::new();
    for (b, origin) in inst.block_origins.iter().enumerate() {
        let BlockOrigin::Moment { sigma, flags } = origin else {
            return Err(Error::Certificate("only moment blocks can be rounded".into()));
        };
        let eig = SymmetricEigen::new(sol.x_psd[b].clone());
        let n = flags.len();
        let mut v: Vec<Vec<BigRational>> = vec![Vec::new(); n];
        for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let col: Vec<BigRational> = (0..n)
                .map(|i| round_to(eig.eigenvectors[(i, c)] * lambda.sqrt(), den))
                .collect();
            if col.iter().all(Zero::is_zero) {
                continue;
            }
            for (row, x) in v.iter_mut().zip(col) {
                row.push(x);
            }
        }
        let rank = v[0].len();
        let block = CertBlock {
            sigma: sigma.clone(),
            flags: flags.clone(),
            v,
            weights: vec![one(); rank],
        };
        grams.push(block.gram());
        blocks.push(block);
    }
    let zero = BigRational::zero();
    let mut scalars = Vec::with_capacity(inst.nonneg);
    for (k, origin) in inst.scalar_origins.iter().enumerate() {
        let x = round_to(sol.x_nonneg[k].max(0.0), den);
        if let ScalarOrigin::Moment { sigma, flag } = origin {
            blocks.push(CertBlock {
                sigma: sigma.clone(),
                flags: vec![flag.clone()],
                v: vec![vec![one()]],
                weights: vec![x.clone()],
            });
        }
        scalars.push(x);
    }
    let t = round_to(sol.x_free[0], den);
    let mut errors = Vec::with_capacity(inst.constraints.len());
    for c in &inst.constraints {
        let mut lhs = BigRational::zero();
        for (b, i, j, val) in &c.psd {
            let g = &grams[*b][*i][*j];
            if g.is_zero() {
                continue;
            }
            lhs += if i == j { val * g } else { val * g * BigRational::from_integer(2.into()) };
        }
        for (k, val) in &c.nonneg {
            lhs += val * &scalars[*k];
        }
        for (_, val) in &c.free {
            lhs += val * &t;
        }
        errors.push(&c.rhs - lhs);
    }
    let total: BigRational = errors.iter().map(|e| e.abs()).sum();
    let mut slacks = BTreeMap::new();
    for (k, origin) in inst.scalar_origins.iter().enumerate() {
        if let ScalarOrigin::Slack(u) = origin {
            let idx = inst
                .basis
                .iter()
                .position(|b| b == u)
                .ok_or_else(|| Error::Certificate(format!("slack {u} outside the basis")))?;
            let s = &scalars[k] + &errors[idx] + &total;
            if s > zero {
                slacks.insert(u.clone(), s);
            }
        }
    }
    let bound = &t + &total;
    Ok(RoundedBound {
        certificate: RationalCertificate {
            level: inst.level,
            target: inst.target.clone().unwrap_or_default(),
            bound: bound.clone(),
            relation: Relation::Eq,
            blocks,
            slacks,
        },
        bound,
        t,
        error: total,
        denominator: den.clone(),
    })
}

/// Turns a numerical optimum of a bound SDP into a verified rational bound.
pub fn round_solution(inst: &SdpInstance, sol: &SdpSolution, opts: &RoundingOptions) -> Result<RoundedBound> {
    if inst.target.is_none() || inst.free != 1 || inst.free_names.first().map(String::as_str) != Some("t") {
        return Err(Error::Certificate("instance is not a bound SDP in t".into()));
    }
    if inst.scalar_origins.iter().filter(|o| matches!(o, ScalarOrigin::Slack(_))).count() != inst.basis.len() {
        return Err(Error::Certificate("bound SDP needs one slack per basis tree".into()));
    }
    let mut den = opts.denominator.clone();
    let budget = BigRational::from_f64(opts.budget).unwrap_or_else(BigRational::zero);
    loop {
        let r = round_once(inst, sol, &den)?;
        debug!("rounding with denominator {den}: error {}", num::ToPrimitive::to_f64(&r.error).unwrap_or(f64::NAN));
        if r.error <= budget {
            match verify_certificate(&r.certificate)? {
                VerifyOutcome::Verified { .. } => return Ok(r),
                VerifyOutcome::Mismatch { tree, residual } => {
                    return Err(Error::Certificate(format!(
                        "rounded certificate fails at {tree} by {}",
                        format_rational(&residual)
                    )))
                }
            }
        }
        den *= BigInt::from(10);
        if den > opts.max_denominator {
            return Err(Error::Certificate(format!(
                "rounding error {} exceeds the budget {}",
                format_rational(&r.error),
                opts.budget
            )));
        }
    }
}
