//! Primal-dual interior point methods for [`SdpInstance`].

use std::fmt;

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};

use super::{to_f64, SdpInstance};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative duality gap at which the solve stops.
    pub tol: f64,
    /// Relative primal and dual infeasibility accepted at termination.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleSuspected,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::InfeasibleSuspected => "infeasible-suspected",
            SolveStatus::NumericalFailure => "numerical-failure",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x_psd: Vec<DMatrix<f64>>,
    pub x_nonneg: Vec<f64>,
    pub x_free: Vec<f64>,
    pub y: Vec<f64>,
    pub z_psd: Vec<DMatrix<f64>>,
    pub z_nonneg: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// |primal − dual| objective difference.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

pub trait SdpSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, inst: &SdpInstance, opts: &SolverOptions) -> Result<SdpSolution>;
}

/// Mehrotra predictor-corrector with the HKM search direction.
pub struct PredictorCorrector;

/// Single HKM Newton step per iteration with a fixed centering parameter.
pub struct BasicPathFollowing;

impl SdpSolver for PredictorCorrector {
    fn name(&self) -> &'static str {
        "ipm"
    }

    fn solve(&self, inst: &SdpInstance, opts: &SolverOptions) -> Result<SdpSolution> {
        run(inst, opts, true)
    }
}

impl SdpSolver for BasicPathFollowing {
    fn name(&self) -> &'static str {
        "ipm-basic"
    }

    fn solve(&self, inst: &SdpInstance, opts: &SolverOptions) -> Result<SdpSolution> {
        run(inst, opts, false)
    }
}

pub fn solver_names() -> Vec<&'static str> {
    vec!["ipm", "ipm-basic"]
}

pub fn sdp_solver(name: &str) -> Result<Box<dyn SdpSolver>> {
    match name {
        "ipm" => Ok(Box::new(PredictorCorrector)),
        "ipm-basic" => Ok(Box::new(BasicPathFollowing)),
        _ => Err(Error::UnknownStrategy {
            kind: "solver",
            name: name.to_string(),
            available: solver_names().join(", "),
        }),
    }
}

struct Problem {
    m: usize,
    dims: Vec<usize>,
    nl: usize,
    nf: usize,
    a: Vec<Vec<Option<DMatrix<f64>>>>,
    al: DMatrix<f64>,
    g: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
    cl: DVector<f64>,
    cf: DVector<f64>,
}

fn place(mat: &mut DMatrix<f64>, i: usize, j: usize, v: f64) {
    mat[(i, j)] += v;
    if i != j {
        mat[(j, i)] += v;
    }
}

impl Problem {
    fn new(inst: &SdpInstance) -> Problem {
        let m = inst.constraints.len();
        let dims = inst.psd_blocks.clone();
        let mut a: Vec<Vec<Option<DMatrix<f64>>>> = vec![vec![None; dims.len()]; m];
        let mut al = DMatrix::zeros(m, inst.nonneg);
        let mut g = DMatrix::zeros(m, inst.free);
        let mut b = DVector::zeros(m);
        for (k, con) in inst.constraints.iter().enumerate() {
            for (blk, i, j, v) in &con.psd {
                let mat = a[k][*blk].get_or_insert_with(|| DMatrix::zeros(dims[*blk], dims[*blk]));
                place(mat, *i, *j, to_f64(v));
            }
            for (l, v) in &con.nonneg {
                al[(k, *l)] += to_f64(v);
            }
            for (l, v) in &con.free {
                g[(k, *l)] += to_f64(v);
            }
            b[k] = to_f64(&con.rhs);
        }
        let mut c: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (blk, i, j, v) in &inst.cost_psd {
            place(&mut c[*blk], *i, *j, to_f64(v));
        }
        let mut cl = DVector::zeros(inst.nonneg);
        for (l, v) in &inst.cost_nonneg {
            cl[*l] += to_f64(v);
        }
        let mut cf = DVector::zeros(inst.free);
        for (l, v) in &inst.cost_free {
            cf[*l] += to_f64(v);
        }
        Problem {
            m,
            dims,
            nl: inst.nonneg,
            nf: inst.free,
            a,
            al,
            g,
            b,
            c,
            cl,
            cf,
        }
    }

    fn apply(&self, x: &[DMatrix<f64>], xl: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.al * xl + &self.g * f;
        for k in 0..self.m {
            for (blk, a) in self.a[k].iter().enumerate() {
                if let Some(a) = a {
                    out[k] += a.dot(&x[blk]);
                }
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for k in 0..self.m {
            for (blk, a) in self.a[k].iter().enumerate() {
                if let Some(a) = a {
                    out[blk] += a * y[k];
                }
            }
        }
        out
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest α with X + αΔX ⪰ 0, or infinity.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    if x.nrows() == 0 {
        return Some(f64::INFINITY);
    }
    let l = x.clone().cholesky()?.l();
    let t = l.solve_lower_triangular(dx)?;
    let s = l.solve_lower_triangular(&t.transpose())?;
    let lambda = sym(s).symmetric_eigenvalues().min();
    Some(if lambda >= 0.0 { f64::INFINITY } else { -1.0 / lambda })
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    df: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dzl: DVector<f64>,
}

fn run(inst: &SdpInstance, opts: &SolverOptions, mehrotra: bool) -> Result<SdpSolution> {
    inst.validate()?;
    let p = Problem::new(inst);
    let n_total: usize = p.dims.iter().sum::<usize>() + p.nl;
    let dim = (n_total.max(1)) as f64;

    let mut a_norm_max: f64 = 0.0;
    let mut ratio_max: f64 = 0.0;
    for k in 0..p.m {
        let norm = p.a[k]
            .iter()
            .flatten()
            .map(|a| a.norm_squared())
            .sum::<f64>()
            .sqrt()
            .hypot(p.al.row(k).norm());
        a_norm_max = a_norm_max.max(norm);
        ratio_max = ratio_max.max((1.0 + p.b[k].abs()) / (1.0 + norm));
    }
    let c_norm = p.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt().hypot(p.cl.norm()).hypot(p.cf.norm());
    let b_norm = p.b.norm();
    let xi = 10f64.max(dim.sqrt()).max(dim * ratio_max);
    let eta = 10f64.max(dim.sqrt()).max(a_norm_max).max(c_norm);

    let mut x: Vec<DMatrix<f64>> = p.dims.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut z: Vec<DMatrix<f64>> = p.dims.iter().map(|&n| DMatrix::identity(n, n) * eta).collect();
    let mut xl = DVector::from_element(p.nl, xi);
    let mut zl = DVector::from_element(p.nl, eta);
    let mut f = DVector::zeros(p.nf);
    let mut y = DVector::zeros(p.m);

    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut pinf;
    let mut dinf;
    let mut pobj;
    let mut dobj;
    loop {
        let rp = &p.b - p.apply(&x, &xl, &f);
        let aty = p.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..p.dims.len()).map(|b| &p.c[b] - &aty[b] - &z[b]).collect();
        let rdl = &p.cl - p.al.transpose() * &y - &zl;
        let rf = &p.cf - p.g.transpose() * &y;
        pobj = p.c.iter().zip(&x).map(|(c, x)| c.dot(x)).sum::<f64>() + p.cl.dot(&xl) + p.cf.dot(&f);
        dobj = p.b.dot(&y);
        let comp = x.iter().zip(&z).map(|(x, z)| x.dot(z)).sum::<f64>() + xl.dot(&zl);
        let mu = comp / dim;
        pinf = rp.norm() / (1.0 + b_norm);
        dinf = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rdl.norm_squared() + rf.norm_squared()).sqrt()
            / (1.0 + c_norm);
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        trace!("iter {iterations}: pobj {pobj:.10} dobj {dobj:.10} mu {mu:.3e} pinf {pinf:.2e} dinf {dinf:.2e}");
        if relgap <= opts.tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            status = SolveStatus::Optimal;
            break;
        }
        let big = 1e9 * (1.0 + xi);
        let xnorm = x.iter().map(|m| m.amax()).fold(xl.amax(), f64::max).max(f.amax());
        if xnorm > big || y.amax() > 1e9 * (1.0 + eta) {
            status = SolveStatus::InfeasibleSuspected;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut zinv = Vec::with_capacity(z.len());
        for zb in &z {
            match zb.clone().cholesky() {
                Some(ch) => zinv.push(ch.inverse()),
                None => {
                    status = SolveStatus::NumericalFailure;
                    break;
                }
            }
        }
        if status == SolveStatus::NumericalFailure {
            break;
        }

        let mut schur = DMatrix::zeros(p.m, p.m);
        for blk in 0..p.dims.len() {
            let prods: Vec<Option<DMatrix<f64>>> = (0..p.m)
                .map(|j| p.a[j][blk].as_ref().map(|a| &x[blk] * a * &zinv[blk]))
                .collect();
            for i in 0..p.m {
                let Some(ai) = &p.a[i][blk] else { continue };
                for j in i..p.m {
                    if let Some(bj) = &prods[j] {
                        let v = ai.component_mul(&bj.transpose()).sum();
                        schur[(i, j)] += v;
                        if i != j {
                            schur[(j, i)] += v;
                        }
                    }
                }
            }
        }
        let ratio = xl.component_div(&zl);
        let mut al_scaled = p.al.clone();
        for (l, r) in ratio.iter().enumerate() {
            al_scaled.column_mut(l).scale_mut(*r);
        }
        schur += &al_scaled * p.al.transpose();
        let size = p.m + p.nf;
        let mut kkt = DMatrix::zeros(size, size);
        kkt.view_mut((0, 0), (p.m, p.m)).copy_from(&schur);
        kkt.view_mut((0, p.m), (p.m, p.nf)).copy_from(&p.g);
        kkt.view_mut((p.m, 0), (p.nf, p.m)).copy_from(&p.g.transpose());
        let lu = kkt.lu();

        let direction = |rc: &[DMatrix<f64>], rcl: &DVector<f64>| -> Option<Direction> {
            let w: Vec<DMatrix<f64>> = (0..p.dims.len())
                .map(|b| (&rc[b] - &x[b] * &rd[b]) * &zinv[b])
                .collect();
            let lp = (rcl - xl.component_mul(&rdl)).component_div(&zl);
            let mut rhs = DVector::zeros(size);
            for i in 0..p.m {
                let mut h = rp[i] - p.al.row(i).transpose().dot(&lp);
                for (blk, a) in p.a[i].iter().enumerate() {
                    if let Some(a) = a {
                        h -= a.dot(&w[blk]);
                    }
                }
                rhs[i] = h;
            }
            rhs.rows_mut(p.m, p.nf).copy_from(&rf);
            let sol = lu.solve(&rhs)?;
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let dy = sol.rows(0, p.m).into_owned();
            let df = sol.rows(p.m, p.nf).into_owned();
            let ady = p.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..p.dims.len()).map(|b| &rd[b] - &ady[b]).collect();
            let dzl = &rdl - p.al.transpose() * &dy;
            let dx: Vec<DMatrix<f64>> = (0..p.dims.len())
                .map(|b| sym((&rc[b] - &x[b] * &dz[b]) * &zinv[b]))
                .collect();
            let dxl = (rcl - xl.component_mul(&dzl)).component_div(&zl);
            Some(Direction {
                dx,
                dxl,
                df,
                dy,
                dz,
                dzl,
            })
        };
        let steps = |d: &Direction| -> Option<(f64, f64)> {
            let mut ap = max_step_lp(&xl, &d.dxl);
            let mut ad = max_step_lp(&zl, &d.dzl);
            for b in 0..p.dims.len() {
                ap = ap.min(max_step(&x[b], &d.dx[b])?);
                ad = ad.min(max_step(&z[b], &d.dz[b])?);
            }
            Some((ap, ad))
        };

        let xz: Vec<DMatrix<f64>> = (0..p.dims.len()).map(|b| &x[b] * &z[b]).collect();
        let xzl = xl.component_mul(&zl);
        let (sigma, pred) = if mehrotra {
            let rc: Vec<DMatrix<f64>> = xz.iter().map(|m| -m).collect();
            let Some(d) = direction(&rc, &(-&xzl)) else {
                status = SolveStatus::NumericalFailure;
                break;
            };
            let Some((ap, ad)) = steps(&d) else {
                status = SolveStatus::NumericalFailure;
                break;
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let comp_aff: f64 = (0..p.dims.len())
                .map(|b| (&x[b] + &d.dx[b] * ap).dot(&(&z[b] + &d.dz[b] * ad)))
                .sum::<f64>()
                + (&xl + &d.dxl * ap).dot(&(&zl + &d.dzl * ad));
            let s = (comp_aff / dim / mu).clamp(0.0, 1.0).powi(3);
            (s, Some(d))
        } else {
            (0.3, None)
        };
        let rc: Vec<DMatrix<f64>> = (0..p.dims.len())
            .map(|b| {
                let n = p.dims[b];
                let mut r = DMatrix::identity(n, n) * (sigma * mu) - &xz[b];
                if let Some(d) = &pred {
                    r -= &d.dx[b] * &d.dz[b];
                }
                r
            })
            .collect();
        let mut rcl = DVector::from_element(p.nl, sigma * mu) - &xzl;
        if let Some(d) = &pred {
            rcl -= d.dxl.component_mul(&d.dzl);
        }
        let Some(d) = direction(&rc, &rcl) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some((ap, ad)) = steps(&d) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 5 {
                status = SolveStatus::NumericalFailure;
                break;
            }
        } else {
            stalls = 0;
        }
        for b in 0..p.dims.len() {
            x[b] += &d.dx[b] * ap;
            z[b] += &d.dz[b] * ad;
        }
        xl += &d.dxl * ap;
        f += &d.df * ap;
        zl += &d.dzl * ad;
        y += &d.dy * ad;
    }
    debug!(
        "{} after {iterations} iterations: primal {pobj:.10}, dual {dobj:.10}",
        status
    );
    Ok(SdpSolution {
        x_psd: x,
        x_nonneg: xl.iter().copied().collect(),
        x_free: f.iter().copied().collect(),
        y: y.iter().copied().collect(),
        z_psd: z,
        z_nonneg: zl.iter().copied().collect(),
        primal_objective: pobj,
        dual_objective: dobj,
        gap: (pobj - dobj).abs(),
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        iterations,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{Constraint, SdpInstance};
    use num::BigRational;

    fn r(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    /// min ⟨I,X⟩ s.t. X₀₀ = 1, X₁₁ = 2 on a 2×2 block: optimum 3.
    #[test]
    fn tiny_psd() {
        let inst = SdpInstance {
            psd_blocks: vec![2],
            constraints: vec![
                Constraint {
                    psd: vec![(0, 0, 0, r(1))],
                    rhs: r(1),
                    ..Default::default()
                },
                Constraint {
                    psd: vec![(0, 1, 1, r(1))],
                    rhs: r(2),
                    ..Default::default()
                },
            ],
            cost_psd: vec![(0, 0, 0, r(1)), (0, 1, 1, r(1))],
            ..Default::default()
        };
        for name in solver_names() {
            let sol = sdp_solver(name).unwrap().solve(&inst, &SolverOptions::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "{name}");
            assert!((sol.primal_objective - 3.0).abs() < 1e-7);
        }
    }

    /// min t s.t. t − x = 2, x ≥ 0: optimum 2.
    #[test]
    fn free_and_nonneg() {
        let inst = SdpInstance {
            nonneg: 1,
            free: 1,
            constraints: vec![Constraint {
                nonneg: vec![(0, r(-1))],
                free: vec![(0, r(1))],
                rhs: r(2),
                ..Default::default()
            }],
            cost_free: vec![(0, r(1))],
            ..Default::default()
        };
        let sol = PredictorCorrector.solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 2.0).abs() < 1e-7);
    }

    /// min t s.t. t + x = −1, x ≥ 0 is unbounded.
    #[test]
    fn unbounded_is_flagged() {
        let inst = SdpInstance {
            nonneg: 1,
            free: 1,
            constraints: vec![Constraint {
                nonneg: vec![(0, r(1))],
                free: vec![(0, r(1))],
                rhs: r(-1),
                ..Default::default()
            }],
            cost_free: vec![(0, r(1))],
            ..Default::default()
        };
        let sol = PredictorCorrector.solve(&inst, &SolverOptions::default()).unwrap();
        assert_ne!(sol.status, SolveStatus::Optimal);
    }
}
