//! Outer approximations of two-tree density profiles and closed-form anchor points.

use std::fmt::Write as _;

use log::info;
use num::{BigInt, BigRational, FromPrimitive, One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flag::binomial;
use crate::hierarchy::{build_level, HierarchyLevel};
use crate::product::{expand_to_level, multiply, Gluing};
use crate::quantum::QuantumFlag;
use crate::sdp::{
    add_moment_terms, assemble_inducibility_sdp, sdp_solver, BlockOrigin, Constraint, ScalarOrigin, SdpInstance,
    SdpSolver, SolveStatus, SolverOptions,
};
use crate::tree::{caterpillar, even_tree, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// y ≥ slope·x + intercept.
    Lower,
    /// y ≤ slope·x + intercept.
    Upper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceBound {
    pub slope: f64,
    pub intercept: f64,
    pub status: SolveStatus,
}

impl SliceBound {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn is_valid(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceResult {
    pub lo: BigRational,
    pub hi: BigRational,
    pub lower: SliceBound,
    pub upper: SliceBound,
}

impl SliceResult {
    fn contains(&self, x: f64) -> bool {
        let lo = self.lo.to_f64().unwrap_or(f64::NAN);
        let hi = self.hi.to_f64().unwrap_or(f64::NAN);
        lo <= x && x <= hi
    }
}

#[derive(Clone, Debug)]
pub struct ProfileSpec {
    pub x_tree: Tree,
    pub y_tree: Tree,
    pub level: usize,
    /// Slice endpoints `(a_i, a_{i+1})`; slices may overlap or leave gaps.
    pub slices: Vec<(BigRational, BigRational)>,
    pub results: Vec<SliceResult>,
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

/// `count` equal slices of `[lo, hi]`.
pub fn uniform_slices(lo: &BigRational, hi: &BigRational, count: usize) -> Vec<(BigRational, BigRational)> {
    let width = (hi - lo) / BigRational::from_integer(count.into());
    (0..count)
        .map(|i| {
            let a = lo + &width * BigRational::from_integer(i.into());
            let b = lo + &width * BigRational::from_integer((i + 1).into());
            (a, b)
        })
        .collect()
}

/// Two slices of width `w` on either side of every anchor, clipped to [0,1].
pub fn anchor_slices(anchors: &[BigRational], width: &BigRational) -> Vec<(BigRational, BigRational)> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    let mut out = Vec::new();
    for a in anchors {
        let left = (a - width).max(zero.clone());
        let right = (a + width).min(one.clone());
        if left < *a {
            out.push((left, a.clone()));
        }
        if *a < right {
            out.push((a.clone(), right));
        }
    }
    out
}

/// Right end of the default slicing: the level-L inducibility bound of `x`, capped at 1.
pub fn default_right_end(x: &Tree, level: usize, solver: &dyn SdpSolver) -> Result<BigRational> {
    let inst = assemble_inducibility_sdp(x, level)?;
    let sol = solver.solve(&inst, &SolverOptions::default())?;
    if sol.status != SolveStatus::Optimal {
        return Ok(BigRational::one());
    }
    let up = (sol.primal_objective * 1000.0).ceil() / 1000.0;
    let r = BigRational::from_f64(up).unwrap_or_else(BigRational::one);
    Ok(r.min(BigRational::one()))
}

/// Level data shared by all slices of one profile.
pub struct ProfileContext {
    pub x_tree: Tree,
    pub y_tree: Tree,
    pub level: usize,
    main: HierarchyLevel,
    aux: HierarchyLevel,
    x_dens: QuantumFlag,
    y_dens: QuantumFlag,
    /// For each tree W of the auxiliary level: X·W and W, both on the main level.
    times_x: Vec<QuantumFlag>,
    lifted: Vec<QuantumFlag>,
}

impl ProfileContext {
    pub fn new(x_tree: &Tree, y_tree: &Tree, level: usize) -> Result<Self> {
        if !x_tree.is_unlabeled() || !y_tree.is_unlabeled() || x_tree.is_empty() || y_tree.is_empty() {
            return Err(Error::Invalid("profile trees must be nonempty and unlabeled".into()));
        }
        if level < x_tree.leaf_count() + 2 || level < y_tree.leaf_count() {
            return Err(Error::Size(format!(
                "level {level} must be at least |x| + 2 = {} and at least |y| = {}",
                x_tree.leaf_count() + 2,
                y_tree.leaf_count()
            )));
        }
        let main = build_level(level, &Gluing)?;
        let aux = build_level(level - x_tree.leaf_count(), &Gluing)?;
        let xq = QuantumFlag::from_flag(x_tree.clone());
        let mut times_x = Vec::new();
        let mut lifted = Vec::new();
        for w in &aux.basis {
            let wq = QuantumFlag::from_flag(w.clone());
            times_x.push(multiply(&xq, &wq, level)?);
            lifted.push(expand_to_level(&wq, level)?);
        }
        Ok(ProfileContext {
            x_tree: x_tree.clone(),
            y_tree: y_tree.clone(),
            level,
            x_dens: expand_to_level(&xq, level)?,
            y_dens: expand_to_level(&QuantumFlag::from_flag(y_tree.clone()), level)?,
            main,
            aux,
            times_x,
            lifted,
        })
    }

    /// g·E on the main level for g = sign·(X − a), E a quantum tree of the auxiliary level.
    fn generator_times(&self, e: &QuantumFlag, a: &BigRational, sign: i64) -> QuantumFlag {
        let mut out = QuantumFlag::zero();
        let s = BigRational::from_integer(sign.into());
        for (w, c) in e.iter() {
            let idx = self.aux.basis_index(w).expect("auxiliary basis tree");
            let part = &self.times_x[idx] - &self.lifted[idx].scale(a);
            out = &out + &part.scale(&(c * &s));
        }
        out
    }

    /// SDP certifying a linear bound on the slice `[a, b]`.
    pub fn slice_instance(&self, a: &BigRational, b: &BigRational, side: Side) -> Result<SdpInstance> {
        let level = self.level;
        let basis = &self.main.basis;
        let index = |t: &Tree| self.main.basis_index(t);
        let sign_y = match side {
            Side::Upper => -BigRational::one(),
            Side::Lower => BigRational::one(),
        };
        let mut inst = SdpInstance {
            level,
            basis: basis.clone(),
            maximize: side == Side::Lower,
            constraints: basis
                .iter()
                .map(|u| Constraint {
                    rhs: &sign_y * self.y_dens.coefficient(u),
                    ..Constraint::default()
                })
                .collect(),
            ..SdpInstance::default()
        };
        let add_scalar = |inst: &mut SdpInstance, q: &QuantumFlag, origin: ScalarOrigin| -> Result<()> {
            let s = inst.nonneg;
            for (t, c) in q.iter() {
                let u = index(t).ok_or_else(|| Error::Size(format!("{t} is not a basis tree")))?;
                inst.constraints[u].nonneg.push((s, c.clone()));
            }
            inst.nonneg += 1;
            inst.scalar_origins.push(origin);
            Ok(())
        };
        for blk in self.main.blocks.iter().filter(|b| !b.is_unit(level)) {
            let m = blk.moment.as_ref().expect("moments built");
            if m.dim() == 1 {
                add_scalar(
                    &mut inst,
                    m.entry(0, 0),
                    ScalarOrigin::Moment {
                        sigma: blk.sigma.clone(),
                        flag: blk.flags[0].clone(),
                    },
                )?;
                continue;
            }
            let id = inst.psd_blocks.len();
            for i in 0..m.dim() {
                for j in 0..=i {
                    add_moment_terms(&mut inst.constraints, &index, id, i, j, m.entry(i, j))?;
                }
            }
            inst.psd_blocks.push(m.dim());
            inst.block_origins.push(BlockOrigin::Moment {
                sigma: blk.sigma.clone(),
                flags: blk.flags.clone(),
            });
        }
        for u in basis {
            add_scalar(&mut inst, &QuantumFlag::from_flag(u.clone()), ScalarOrigin::Slack(u.clone()))?;
        }
        let aux_level = self.aux.level;
        for (bound, sign, name) in [(a, 1, "x - a"), (b, -1, "b - x")] {
            for blk in &self.aux.blocks {
                if blk.is_unit(aux_level) {
                    continue;
                }
                let m = blk.moment.as_ref().expect("moments built");
                if m.dim() == 1 {
                    let q = self.generator_times(m.entry(0, 0), bound, sign);
                    add_scalar(&mut inst, &q, ScalarOrigin::Other(format!("({name})·{}", blk.flags[0])))?;
                    continue;
                }
                let id = inst.psd_blocks.len();
                for i in 0..m.dim() {
                    for j in 0..=i {
                        let q = self.generator_times(m.entry(i, j), bound, sign);
                        add_moment_terms(&mut inst.constraints, &index, id, i, j, &q)?;
                    }
                }
                inst.psd_blocks.push(m.dim());
                inst.block_origins.push(BlockOrigin::Other(format!("({name})·SOS[{}]", blk.sigma)));
            }
            for w in &self.aux.basis {
                let q = self.generator_times(&QuantumFlag::from_flag(w.clone()), bound, sign);
                add_scalar(&mut inst, &q, ScalarOrigin::Other(format!("({name})·{w}")))?;
            }
        }
        // Upper: Σ − c·X − d = −Y.  Lower: Σ + c·X + d = Y.
        let line_sign = sign_y.clone();
        for (u, con) in basis.iter().zip(inst.constraints.iter_mut()) {
            let px = self.x_dens.coefficient(u);
            if !px.is_zero() {
                con.free.push((0, &line_sign * px));
            }
            con.free.push((1, line_sign.clone()));
        }
        inst.free = 2;
        inst.free_names = vec!["slope".into(), "intercept".into()];
        let mid = (a + b) / BigRational::from_integer(2.into());
        let flip = if side == Side::Lower { -BigRational::one() } else { BigRational::one() };
        inst.cost_free = vec![(0, &flip * mid), (1, flip)];
        inst.validate()?;
        Ok(inst)
    }

    pub fn slice_bound(&self, a: &BigRational, b: &BigRational, side: Side, solver: &dyn SdpSolver) -> Result<SliceBound> {
        if a >= b {
            return Err(Error::Invalid(format!("empty slice [{a}, {b}]")));
        }
        let inst = self.slice_instance(a, b, side)?;
        let sol = solver.solve(&inst, &SolverOptions::default())?;
        Ok(SliceBound {
            slope: sol.x_free[0],
            intercept: sol.x_free[1],
            status: sol.status,
        })
    }
}

/// Solves both sides on every slice; results keep slice order.
pub fn outer_approximation(
    x_tree: &Tree,
    y_tree: &Tree,
    level: usize,
    slices: Vec<(BigRational, BigRational)>,
    solver_name: &str,
) -> Result<ProfileSpec> {
    let ctx = ProfileContext::new(x_tree, y_tree, level)?;
    let solver = sdp_solver(solver_name)?;
    let results = slices
        .par_iter()
        .map(|(a, b)| {
            let lower = ctx.slice_bound(a, b, Side::Lower, solver.as_ref())?;
            let upper = ctx.slice_bound(a, b, Side::Upper, solver.as_ref())?;
            info!(
                "slice [{:.4}, {:.4}]: lower {}, upper {}",
                a.to_f64().unwrap_or(f64::NAN),
                b.to_f64().unwrap_or(f64::NAN),
                lower.status,
                upper.status
            );
            Ok(SliceResult {
                lo: a.clone(),
                hi: b.clone(),
                lower,
                upper,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProfileSpec {
        x_tree: x_tree.clone(),
        y_tree: y_tree.clone(),
        level,
        slices,
        results,
    })
}

impl ProfileSpec {
    /// Tightest upper bound at `x` over the solved slices containing it.
    pub fn upper_at(&self, x: f64) -> Option<f64> {
        self.results
            .iter()
            .filter(|r| r.contains(x) && r.upper.is_valid())
            .map(|r| r.upper.at(x))
            .reduce(f64::min)
    }

    /// Tightest lower bound at `x` over the solved slices containing it.
    pub fn lower_at(&self, x: f64) -> Option<f64> {
        self.results
            .iter()
            .filter(|r| r.contains(x) && r.lower.is_valid())
            .map(|r| r.lower.at(x))
            .reduce(f64::max)
    }

    /// CSV with one row per slice; `conjecture` adds the conjectured curve at `slice_hi`.
    pub fn to_csv(&self, conjecture: bool) -> String {
        let mut out = String::from("slice_lo,slice_hi,lower_slope,lower_intercept,upper_slope,upper_intercept,status_lower,status_upper");
        let curve = if conjecture { conjectured_curve(&self.x_tree, &self.y_tree) } else { None };
        if conjecture {
            out.push_str(",conjectured_upper_at_hi");
        }
        out.push('\n');
        for r in &self.results {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt7(r.lo.to_f64().unwrap_or(f64::NAN)),
                fmt7(r.hi.to_f64().unwrap_or(f64::NAN)),
                fmt7(r.lower.slope),
                fmt7(r.lower.intercept),
                fmt7(r.upper.slope),
                fmt7(r.upper.intercept),
                r.lower.status,
                r.upper.status
            );
            if conjecture {
                let v = curve
                    .as_ref()
                    .and_then(|c| c.upper_at(r.hi.to_f64().unwrap_or(f64::NAN)))
                    .map(fmt7)
                    .unwrap_or_default();
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Envelope polylines over the slice endpoints, in the unit square.
    pub fn to_svg(&self) -> String {
        let size = 500.0;
        let pt = |x: f64, y: f64| format!("{:.2},{:.2}", x * size, (1.0 - y.clamp(0.0, 1.0)) * size);
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for r in &self.results {
            for x in [r.lo.to_f64().unwrap_or(0.0), r.hi.to_f64().unwrap_or(0.0)] {
                if r.upper.is_valid() {
                    upper.push(pt(x, r.upper.at(x)));
                }
                if r.lower.is_valid() {
                    lower.push(pt(x, r.lower.at(x)));
                }
            }
        }
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n\
             <rect width=\"{s}\" height=\"{s}\" fill=\"white\" stroke=\"black\"/>\n\
             <polyline fill=\"none\" stroke=\"blue\" points=\"{}\"/>\n\
             <polyline fill=\"none\" stroke=\"red\" points=\"{}\"/>\n</svg>\n",
            upper.join(" "),
            lower.join(" "),
            s = size
        )
    }
}

/// Seven significant digits.
pub fn fmt7(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = 7 - 1 - v.abs().log10().floor() as i32;
    if (0..=20).contains(&digits) {
        let s = format!("{:.*}", digits as usize, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.6e}")
    }
}

/// Limit densities (p(cat_k), p(E₆)) in the double caterpillar with sides p and 1−p.
pub fn double_caterpillar_densities(k: u32, p: &BigRational) -> (BigRational, BigRational) {
    let q = BigRational::one() - p;
    let kk = BigRational::from_integer(k.into());
    let cat = if k == 0 {
        BigRational::one()
    } else {
        p.pow(k as i32) + q.pow(k as i32) + kk * (p * q.pow(k as i32 - 1) + p.pow(k as i32 - 1) * &q)
    };
    let e6 = BigRational::from_integer(20.into()) * p.pow(3) * q.pow(3);
    (cat, e6)
}

/// Same densities in the finite double caterpillar on `n` leaves; the caterpillar count needs `k ≥ 3`.
pub fn double_caterpillar_densities_finite(n: usize, k: usize, p: &BigRational) -> (BigRational, BigRational) {
    let left = (p * BigRational::from_integer(n.into())).floor().to_integer().to_usize().unwrap_or(0);
    let right = n - left;
    let total = binomial(n, k);
    let c = |a: usize, b: usize| -> BigInt { binomial(a, b) };
    let cat = if k == 0 {
        c(n, 0)
    } else {
        c(left, k) + c(right, k) + BigInt::from(left) * c(right, k - 1) + BigInt::from(right) * c(left, k - 1)
    };
    let e6 = c(left, 3) * c(right, 3);
    (
        BigRational::new(cat, total),
        BigRational::new(e6, binomial(n, 6)),
    )
}

fn c_even(k: usize, memo: &mut Vec<Option<BigRational>>) -> BigRational {
    if let Some(v) = &memo[k] {
        return v.clone();
    }
    let s = k / 2;
    let v = if k % 2 == 0 {
        let cs = c_even(s, memo);
        let d = BigRational::from_integer(BigInt::from(2).pow(2 * s as u32) - 2);
        &cs * &cs / d
    } else {
        let a = c_even(s, memo);
        let b = c_even(s + 1, memo);
        let d = BigRational::from_integer(BigInt::from(2).pow(2 * s as u32) - 1);
        a * b / d
    };
    memo[k] = Some(v.clone());
    v
}

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Inducibility I(E_k) = k!·c_k.
pub fn even_tree_inducibility(k: usize) -> BigRational {
    let mut memo = vec![None; k.max(2) + 2];
    memo[0] = Some(BigRational::one());
    memo[1] = Some(BigRational::one());
    BigRational::from_integer(factorial(k)) * c_even(k, &mut memo)
}

/// (p(cat_k, E∞), p(E₆, E∞), I(E_k)).
pub fn even_limit_densities(k: usize) -> (BigRational, BigRational, BigRational) {
    let mut prod = BigInt::one();
    for j in 1..k {
        prod *= BigInt::from(2).pow(j as u32) - 1;
    }
    let cat = BigRational::new(factorial(k), BigInt::from(2) * prod);
    let cat = if k < 2 { BigRational::one() } else { cat };
    (cat, even_tree_inducibility(6), even_tree_inducibility(k))
}

/// Known attainable points (x, y) for x = cat_k and y = E₆.
pub fn known_points(k: u32) -> Vec<(BigRational, BigRational)> {
    let mut pts: Vec<(BigRational, BigRational)> = (0..=4).map(|i| double_caterpillar_densities(k, &rat(i, 8))).collect();
    let (cat, e6, _) = even_limit_densities(k as usize);
    pts.push((cat, e6));
    pts
}

/// Conjectured upper boundary traced by double caterpillars, for x = cat_k and y = E₆.
pub struct ConjecturedCurve {
    k: u32,
}

impl ConjecturedCurve {
    /// y on the curve at `x`, when `x` is on the traced range.
    pub fn upper_at(&self, x: f64) -> Option<f64> {
        let f = |p: f64| {
            let q = 1.0 - p;
            let k = self.k as i32;
            p.powi(k) + q.powi(k) + self.k as f64 * (p * q.powi(k - 1) + p.powi(k - 1) * q)
        };
        let (hi_x, lo_x) = (f(0.0), f(0.5));
        if !(lo_x..=hi_x).contains(&x) {
            return None;
        }
        let (mut a, mut b) = (0.0, 0.5);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if f(m) > x {
                a = m;
            } else {
                b = m;
            }
        }
        let p = 0.5 * (a + b);
        Some(20.0 * p.powi(3) * (1.0 - p).powi(3))
    }
}

pub fn conjectured_curve(x: &Tree, y: &Tree) -> Option<ConjecturedCurve> {
    let k = x.leaf_count();
    if k < 2 || caterpillar(k).ok()? != *x || even_tree(6).ok()? != *y {
        return None;
    }
    Some(ConjecturedCurve { k: k as u32 })
}
