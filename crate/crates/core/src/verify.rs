//! Independent certificates for solutions: the Toda residual by finite
//! differences, a matrix-exponential evolution oracle, constant symmetry
//! transformations, the determinant factorization and the abelian
//! reduction.
//!
//! Nothing in here looks inside a construction: every check only evaluates
//! `Γ_α` through [`GammaField`] and inverts numerically where needed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockalg::{BlockStructure, GradedPair};
use crate::linalg::{self, CMat, CVec, C64};
use crate::solitons::{multi_soliton_tau_pair, SolitonSpec};
use crate::{Error, Result};

/// Default finite-difference step.
pub const DEFAULT_H_FD: f64 = 1e-4;
/// Default residual tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZPoint {
    pub z_minus: f64,
    pub z_plus: f64,
}

impl ZPoint {
    pub fn new(z_minus: f64, z_plus: f64) -> Self {
        Self { z_minus, z_plus }
    }

    fn shift(self, dm: f64, dp: f64) -> Self {
        Self::new(self.z_minus + dm, self.z_plus + dp)
    }
}

/// Evenly spaced samples `min..=max`; a single sample sits at `min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 || !min.is_finite() || !max.is_finite() || max < min {
            return Err(Error::InvalidArgument(format!(
                "bad grid axis [{min}, {max}] with {count} points"
            )));
        }
        Ok(Self { min, max, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.min + step * k as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub z_minus: GridAxis,
    pub z_plus: GridAxis,
}

impl Grid {
    pub fn new(z_minus: GridAxis, z_plus: GridAxis) -> Self {
        Self { z_minus, z_plus }
    }

    pub fn square(min: f64, max: f64, count: usize) -> Result<Self> {
        let a = GridAxis::new(min, max, count)?;
        Ok(Self::new(a, a))
    }

    /// Points with `z⁻` as the outer index.
    pub fn points(&self) -> Vec<ZPoint> {
        let zp = self.z_plus.points();
        self.z_minus
            .points()
            .into_iter()
            .flat_map(|m| zp.iter().map(move |&p| ZPoint::new(m, p)))
            .collect()
    }
}

/// Anything that can be evaluated to the blocks `Γ_α` at a point.
pub trait GammaField: Sync {
    fn structure(&self) -> &BlockStructure;

    /// `Γ_1..Γ_p` at `z`.
    fn gamma(&self, z: ZPoint) -> Result<Vec<CMat>>;

    /// `(Γ_α, Γ_α⁻¹)` for `α = 1..p`; by default the inverse is numerical.
    fn gamma_pairs(&self, z: ZPoint) -> Result<Vec<(CMat, CMat)>> {
        self.gamma(z)?
            .into_iter()
            .enumerate()
            .map(|(k, g)| {
                let inv = linalg::guarded_inverse(&g, &format!("Γ_{}", k + 1))?;
                Ok((g, inv))
            })
            .collect()
    }
}

/// `γ = I`.
#[derive(Clone, Debug)]
pub struct TrivialSolution {
    structure: BlockStructure,
}

impl TrivialSolution {
    pub fn new(bs: &BlockStructure) -> Self {
        Self {
            structure: bs.clone(),
        }
    }
}

impl GammaField for TrivialSolution {
    fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    fn gamma(&self, _z: ZPoint) -> Result<Vec<CMat>> {
        Ok(self.structure.sizes().iter().map(|&s| linalg::identity(s)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub z_minus: f64,
    pub z_plus: f64,
    /// Frobenius norm of the residual for `α = 1..p`.
    pub residual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub grid: Grid,
    pub h_fd: f64,
    pub points: Vec<PointResidual>,
    pub skipped: Vec<ZPoint>,
    pub max: f64,
    pub mean: f64,
}

impl ResidualReport {
    fn assemble(grid: Grid, h_fd: f64, results: Vec<(ZPoint, Option<Vec<f64>>)>) -> Result<Self> {
        let mut points = Vec::new();
        let mut skipped = Vec::new();
        for (z, r) in results {
            match r {
                Some(residual) => points.push(PointResidual {
                    z_minus: z.z_minus,
                    z_plus: z.z_plus,
                    residual,
                }),
                None => skipped.push(z),
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyReport);
        }
        let all: Vec<f64> = points.iter().flat_map(|p| p.residual.iter().copied()).collect();
        let max = all.iter().copied().fold(0.0, f64::max);
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        Ok(Self {
            grid,
            h_fd,
            points,
            skipped,
            max,
            mean,
        })
    }
}

fn skip_on_singularity<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::SolutionSingularity(_)) | Err(Error::PoleCollision(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn inverse_all(gs: &[CMat]) -> Result<Vec<CMat>> {
    gs.iter()
        .map(|g| linalg::guarded_inverse(g, "Γ"))
        .collect()
}

/// Residual blocks of the Toda system at one point, from seven evaluations
/// of `Γ` on a central-difference stencil.
pub fn toda_residual_at(
    field: &dyn GammaField,
    pair: &GradedPair,
    z: ZPoint,
    h: f64,
) -> Result<Vec<CMat>> {
    let p = pair.structure().p() as i64;
    let g = |dm: f64, dp: f64| field.gamma(z.shift(dm, dp));
    // F_α = Γ_α⁻¹ ∂_-Γ_α on the lines z⁺ ± h.
    let f_at = |dp: f64| -> Result<Vec<CMat>> {
        let (lo, mid, hi) = (g(-h, dp)?, g(0.0, dp)?, g(h, dp)?);
        let inv = inverse_all(&mid)?;
        Ok((0..p as usize)
            .map(|k| &inv[k] * (&hi[k] - &lo[k]) / C64::from(2.0 * h))
            .collect())
    };
    let (f_lo, f_hi) = (f_at(-h)?, f_at(h)?);
    let gc = g(0.0, 0.0)?;
    let gi = inverse_all(&gc)?;
    let bs = pair.structure();
    Ok((1..=p)
        .map(|a| {
            let k = bs.index(a);
            let (next, prev) = (bs.index(a + 1), bs.index(a - 1));
            let deriv = (&f_hi[k] - &f_lo[k]) / C64::from(2.0 * h);
            let plus = &gi[k] * pair.cp(a) * &gc[next] * pair.cm(a);
            let minus = pair.cm(a - 1) * &gi[prev] * pair.cp(a - 1) * &gc[k];
            deriv + plus - minus
        })
        .collect())
}

/// Toda residual over a grid. Points where `Γ` cannot be evaluated or
/// inverted are reported as skipped.
pub fn toda_residual(
    field: &dyn GammaField,
    pair: &GradedPair,
    grid: &Grid,
    h_fd: f64,
) -> Result<ResidualReport> {
    if !(h_fd > 0.0) {
        return Err(Error::InvalidArgument(format!("h_fd = {h_fd} must be positive")));
    }
    if field.structure() != pair.structure() {
        return Err(Error::StructureMismatch("solution and pair differ".into()));
    }
    let results = grid
        .points()
        .into_par_iter()
        .map(|z| {
            let r = skip_on_singularity(toda_residual_at(field, pair, z, h_fd))?;
            Ok((z, r.map(|blocks| blocks.iter().map(linalg::frobenius).collect())))
        })
        .collect::<Result<Vec<_>>>()?;
    ResidualReport::assemble(*grid, h_fd, results)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolutionMode {
    /// `exp(-μ⁻¹ c_- z⁻ - μ c_+ z⁺) v0`.
    U,
    /// `exp(ν⁻¹ ᵗc_- z⁻ + ν ᵗc_+ z⁺) v0`.
    Y,
}

/// Evolution of an initial vector by the matrix exponential.
pub fn oracle_evolution(
    pair: &GradedPair,
    pole: C64,
    v0: &CVec,
    z: ZPoint,
    mode: EvolutionMode,
) -> CVec {
    let (cm, cp) = (pair.c_minus().to_flat(), pair.c_plus().to_flat());
    let gen = match mode {
        EvolutionMode::U => -(cm * (pole.inv() * z.z_minus) + cp * (pole * z.z_plus)),
        EvolutionMode::Y => cm.transpose() * (pole.inv() * z.z_minus) + cp.transpose() * (pole * z.z_plus),
    };
    gen.exp() * v0
}

/// `Γ'_α = η_{+α}⁻¹ Γ_α η_{-α}`.
pub struct SymmetryTransformed<'a> {
    inner: &'a dyn GammaField,
    eta_minus: Vec<CMat>,
    eta_minus_inv: Vec<CMat>,
    eta_plus: Vec<CMat>,
    eta_plus_inv: Vec<CMat>,
}

impl GammaField for SymmetryTransformed<'_> {
    fn structure(&self) -> &BlockStructure {
        self.inner.structure()
    }

    fn gamma(&self, z: ZPoint) -> Result<Vec<CMat>> {
        Ok(self
            .inner
            .gamma(z)?
            .iter()
            .enumerate()
            .map(|(k, g)| &self.eta_plus_inv[k] * g * &self.eta_minus[k])
            .collect())
    }

    fn gamma_pairs(&self, z: ZPoint) -> Result<Vec<(CMat, CMat)>> {
        Ok(self
            .inner
            .gamma_pairs(z)?
            .iter()
            .enumerate()
            .map(|(k, (g, gi))| {
                (
                    &self.eta_plus_inv[k] * g * &self.eta_minus[k],
                    &self.eta_minus_inv[k] * gi * &self.eta_plus[k],
                )
            })
            .collect())
    }
}

/// Constant symmetry transformation of a solution and its pair:
/// `C'_{-α} = η_{-(α+1)}⁻¹ C_{-α} η_{-α}`, `C'_{+α} = η_{+α}⁻¹ C_{+α} η_{+(α+1)}`.
/// `eta_minus[k]`, `eta_plus[k]` belong to `α = k + 1`.
pub fn apply_symmetry<'a>(
    solution: &'a dyn GammaField,
    eta_minus: Vec<CMat>,
    eta_plus: Vec<CMat>,
    pair: &GradedPair,
) -> Result<(SymmetryTransformed<'a>, GradedPair)> {
    let bs = pair.structure();
    let p = bs.p() as i64;
    if eta_minus.len() != bs.p() || eta_plus.len() != bs.p() {
        return Err(Error::InvalidArgument(format!("need {} matrices η_±α", bs.p())));
    }
    for (k, e) in eta_minus.iter().chain(&eta_plus).enumerate() {
        let s = bs.sizes()[k % bs.p()];
        if e.nrows() != s || e.ncols() != s {
            return Err(Error::InvalidArgument(format!(
                "η for α = {} must be {s}x{s}",
                k % bs.p() + 1
            )));
        }
    }
    let inv = |v: &[CMat]| -> Result<Vec<CMat>> {
        v.iter()
            .map(|e| {
                linalg::guarded_inverse(e, "η")
                    .map_err(|_| Error::InvalidArgument("η is singular".into()))
            })
            .collect()
    };
    let eta_minus_inv = inv(&eta_minus)?;
    let eta_plus_inv = inv(&eta_plus)?;
    let at = |v: &[CMat], a: i64| v[bs.index(a)].clone();
    let minus = (0..p)
        .map(|a| at(&eta_minus_inv, a + 1) * pair.cm(a) * at(&eta_minus, a))
        .collect();
    let plus = (0..p)
        .map(|a| at(&eta_plus_inv, a) * pair.cp(a) * at(&eta_plus, a + 1))
        .collect();
    let pair2 = GradedPair::from_blocks(bs, minus, plus)?;
    Ok((
        SymmetryTransformed {
            inner: solution,
            eta_minus,
            eta_minus_inv,
            eta_plus,
            eta_plus_inv,
        },
        pair2,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub max: f64,
    pub evaluated: usize,
    pub skipped: Vec<ZPoint>,
}

fn grid_check(grid: &Grid, f: impl Fn(ZPoint) -> Result<f64> + Sync) -> Result<GridCheck> {
    let results = grid
        .points()
        .into_par_iter()
        .map(|z| Ok((z, skip_on_singularity(f(z))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut max: f64 = 0.0;
    let mut evaluated = 0;
    let mut skipped = Vec::new();
    for (z, v) in results {
        match v {
            Some(v) => {
                max = max.max(v);
                evaluated += 1;
            }
            None => skipped.push(z),
        }
    }
    if evaluated == 0 {
        return Err(Error::EmptyReport);
    }
    Ok(GridCheck {
        max,
        evaluated,
        skipped,
    })
}

fn det_gamma(field: &dyn GammaField, z: ZPoint) -> Result<C64> {
    let d = field
        .gamma(z)?
        .iter()
        .map(linalg::determinant)
        .product::<C64>();
    if !d.is_finite() || d.norm() == 0.0 {
        return Err(Error::SolutionSingularity(format!(
            "det γ vanishes at ({}, {})",
            z.z_minus, z.z_plus
        )));
    }
    Ok(d)
}

/// `max |∂_-∂_+ log det γ|` by a central mixed difference.
pub fn det_factorization_check(field: &dyn GammaField, grid: &Grid, h_fd: f64) -> Result<GridCheck> {
    grid_check(grid, |z| {
        let d = |dm, dp| det_gamma(field, z.shift(dm, dp));
        let ratio = d(h_fd, h_fd)? * d(-h_fd, -h_fd)? / (d(h_fd, -h_fd)? * d(-h_fd, h_fd)?);
        Ok(ratio.ln().norm() / (4.0 * h_fd * h_fd))
    })
}

/// `max |Γ_α - T̃_{α+1}/T̃_α|` for a spec with all blocks of size one.
pub fn abelian_reduction_check(
    spec: &SolitonSpec,
    field: &dyn GammaField,
    grid: &Grid,
) -> Result<GridCheck> {
    let bs = spec.structure();
    if !bs.is_abelian() {
        return Err(Error::InvalidArgument("abelian reduction needs all n_α = 1".into()));
    }
    grid_check(grid, |z| {
        let gs = field.gamma(z)?;
        let mut dev: f64 = 0.0;
        for a in 1..=bs.p() as i64 {
            let t = multi_soliton_tau_pair(spec, z, a)?.t;
            let t1 = multi_soliton_tau_pair(spec, z, a + 1)?.t;
            dev = dev.max((gs[bs.index(a)][(0, 0)] - t1 / t).norm());
        }
        Ok(dev)
    })
}

/// `max ‖Γ_α⁻¹ Γ_α - I‖` with the inverse supplied by the field itself.
pub fn inverse_consistency_check(field: &dyn GammaField, grid: &Grid) -> Result<GridCheck> {
    grid_check(grid, |z| {
        Ok(field
            .gamma_pairs(z)?
            .iter()
            .map(|(g, gi)| linalg::max_abs(&(gi * g - linalg::identity(g.nrows()))))
            .fold(0.0, f64::max))
    })
}

/// `max_α ‖h_{α,J} Γ^{closed}_α - Γ^{dressing}_α‖`: the general dressing
/// solution is the closed form after the constant symmetry `h_{α,J}`.
pub fn cross_construction_check(
    spec: &SolitonSpec,
    closed: &dyn GammaField,
    dressing: &dyn GammaField,
    grid: &Grid,
) -> Result<GridCheck> {
    let bs = spec.structure();
    let hj: Vec<CMat> = (1..=bs.p() as i64)
        .map(|a| spec.dressing_factor_h(a, crate::solitons::Branch::J).map(|h| h.0))
        .collect::<Result<_>>()?;
    grid_check(grid, |z| {
        let (c, d) = (closed.gamma(z)?, dressing.gamma(z)?);
        Ok((0..bs.p())
            .map(|k| linalg::max_abs(&(&hj[k] * &c[k] - &d[k])))
            .fold(0.0, f64::max))
    })
}
