//! Closed-form soliton solutions: idempotents `Y`, dressing factors
//! `h_{α,J}`, the matrices `D̃`, `B̃`, `H̃`, `F̃`, interaction coefficients
//! `η̃`, and the τ-pair `(T̃_α, T̃^X_α)`.
//!
//! Pole `i` carries indices `I_i`, `J_i ≠ K_i` in `1..p` and coefficient
//! vectors `c_{I_i}`, `d_{J_i}`, `d_{K_i}`; all other initial coefficients
//! vanish. Subsets of poles are bit masks over `0..r`.

use std::f64::consts::PI;

use crate::blockalg::{build_canonical_c, eps, BlockStructure, GradedPair};
use crate::dressing::{DressingProblem, InitialData, PoleData};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::spectral::{canonical_theta, SpectralData};
use crate::verify::{GammaField, ZPoint};
use crate::{Error, Result};

/// Largest number of poles accepted (the τ-sums have `2^r` terms).
pub const MAX_POLES: usize = 12;
/// Brackets `ᵗd Θ c` smaller than this are treated as zero.
pub const BRACKET_TOL: f64 = 1e-12;
/// Relative size of `T̃_α` below which a point counts as singular.
pub const SINGULAR_TAU: f64 = 1e-8;

/// Which of the two `d` vectors of a pole.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    J,
    K,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolitonIndices {
    pub i: i64,
    pub j: i64,
    pub k: i64,
}

#[derive(Clone, Debug)]
struct SubsetTerm {
    mask: u32,
    eta: C64,
    /// `X̃_{α,S} = h_{α,J}⁻¹ X_{α,S}`, index `α - 1`.
    x_tilde: Vec<CMat>,
    /// `X̃⁻¹_{α,S} = X_{α,S}⁻¹ h_{α,J}`.
    x_tilde_inv: Vec<CMat>,
}

/// A soliton configuration and all of its constant (z-independent) data.
#[derive(Clone, Debug)]
pub struct SolitonSpec {
    pair: GradedPair,
    spectral: SpectralData,
    poles: PoleData,
    indices: Vec<SolitonIndices>,
    c: Vec<CVec>,
    d_j: Vec<CVec>,
    d_k: Vec<CVec>,
    d_tilde_j: CMat,
    d_tilde_k: CMat,
    b_tilde_j: CMat,
    b_tilde_k: CMat,
    h_tilde: CMat,
    terms: Vec<SubsetTerm>,
}

impl SolitonSpec {
    /// Builds on the canonical pair and `θ` for `bs`.
    pub fn canonical(
        bs: &BlockStructure,
        poles: PoleData,
        indices: Vec<SolitonIndices>,
        c: Vec<CVec>,
        d_j: Vec<CVec>,
        d_k: Vec<CVec>,
    ) -> Result<Self> {
        let pair = build_canonical_c(bs)?;
        let spectral = canonical_theta(&pair)?;
        Self::new(pair, spectral, poles, indices, c, d_j, d_k)
    }

    pub fn new(
        pair: GradedPair,
        spectral: SpectralData,
        poles: PoleData,
        indices: Vec<SolitonIndices>,
        c: Vec<CVec>,
        d_j: Vec<CVec>,
        d_k: Vec<CVec>,
    ) -> Result<Self> {
        let bs = pair.structure().clone();
        let p = bs.p() as i64;
        let r = poles.r();
        if r == 0 || r > MAX_POLES {
            return Err(Error::InvalidArgument(format!(
                "number of solitons must be in 1..={MAX_POLES}, got {r}"
            )));
        }
        if poles.p() != bs.p() {
            return Err(Error::StructureMismatch("poles built for another p".into()));
        }
        if indices.len() != r || c.len() != r || d_j.len() != r || d_k.len() != r {
            return Err(Error::StructureMismatch(format!(
                "need indices and c_I, d_J, d_K for each of the {r} poles"
            )));
        }
        for (n, ix) in indices.iter().enumerate() {
            for (name, v) in [("I", ix.i), ("J", ix.j), ("K", ix.k)] {
                if !(1..=p).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "pole {}: {name} = {v} outside 1..{p}",
                        n + 1
                    )));
                }
            }
            if ix.j == ix.k {
                return Err(Error::InvalidArgument(format!(
                    "pole {}: J and K must differ",
                    n + 1
                )));
            }
        }
        if c.iter().chain(&d_j).chain(&d_k).any(|v| v.len() != bs.n_star()) {
            return Err(Error::StructureMismatch(format!(
                "coefficient vectors must have length n_* = {}",
                bs.n_star()
            )));
        }
        let mut spec = Self {
            pair,
            spectral,
            poles,
            indices,
            c,
            d_j,
            d_k,
            d_tilde_j: CMat::zeros(0, 0),
            d_tilde_k: CMat::zeros(0, 0),
            b_tilde_j: CMat::zeros(0, 0),
            b_tilde_k: CMat::zeros(0, 0),
            h_tilde: CMat::zeros(0, 0),
            terms: Vec::new(),
        };
        for a in [Branch::J, Branch::K] {
            for i in 0..r {
                for j in 0..r {
                    if spec.bracket(a, i, j).norm() <= BRACKET_TOL {
                        return Err(Error::DegenerateConfiguration(format!(
                            "bracket ᵗd_{a:?}{} Θ c_I{} vanishes",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        spec.d_tilde_j = spec.build_tilde(Branch::J, false);
        spec.d_tilde_k = spec.build_tilde(Branch::K, false);
        spec.b_tilde_j = spec.build_tilde(Branch::J, true);
        spec.b_tilde_k = spec.build_tilde(Branch::K, true);
        let dj_inv = degenerate(linalg::guarded_inverse(&spec.d_tilde_j, "D̃(J)"))?;
        spec.h_tilde = &spec.d_tilde_k * dj_inv;
        spec.terms = (0..1u32 << r)
            .map(|mask| spec.subset_term(mask))
            .collect::<Result<_>>()?;
        Ok(spec)
    }

    pub fn r(&self) -> usize {
        self.poles.r()
    }

    pub fn structure(&self) -> &BlockStructure {
        self.pair.structure()
    }

    pub fn pair(&self) -> &GradedPair {
        &self.pair
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn poles(&self) -> &PoleData {
        &self.poles
    }

    pub fn indices(&self) -> &[SolitonIndices] {
        &self.indices
    }

    fn p(&self) -> usize {
        self.structure().p()
    }

    fn d(&self, a: Branch, i: usize) -> &CVec {
        match a {
            Branch::J => &self.d_j[i],
            Branch::K => &self.d_k[i],
        }
    }

    fn a_index(&self, a: Branch, i: usize) -> i64 {
        match a {
            Branch::J => self.indices[i].j,
            Branch::K => self.indices[i].k,
        }
    }

    /// `ρ_i = K_i - J_i`.
    pub fn rho(&self, i: usize) -> i64 {
        self.indices[i].k - self.indices[i].j
    }

    /// `κ_{ρ_i} = 2 sin(π ρ_i / p)`.
    pub fn kappa(&self, i: usize) -> f64 {
        2.0 * (PI * self.rho(i) as f64 / self.p() as f64).sin()
    }

    /// `ζ_i = -i ν_i ε_p^{-(K_i+J_i)/2}`, principal branch of the half power.
    pub fn zeta(&self, i: usize) -> C64 {
        let ix = self.indices[i];
        let half = C64::from_polar(1.0, -PI * (ix.k + ix.j) as f64 / self.p() as f64);
        C64::new(0.0, -1.0) * self.poles.nu()[i] * half
    }

    /// `Z(ζ_i) = κ_{ρ_i} (ζ_i⁻¹ z⁻ + ζ_i z⁺)`.
    pub fn phase(&self, i: usize, z: ZPoint) -> C64 {
        let zeta = self.zeta(i);
        (zeta.inv() * z.z_minus + zeta * z.z_plus) * self.kappa(i)
    }

    /// `ᵗd_{A_i} Θ c_{I_j}`.
    pub fn bracket(&self, a: Branch, i: usize, j: usize) -> C64 {
        let d = self.d(a, i);
        linalg::dot_t(&(self.spectral.gram().transpose() * d), &self.c[j])
    }

    /// `a^A_i = ν_i ε_p^{-A_i}`.
    fn a_coef(&self, a: Branch, i: usize) -> C64 {
        self.poles.nu()[i] * eps(self.p(), -self.a_index(a, i))
    }

    /// `b_j = μ_j ε_p^{I_j}`.
    fn b_coef(&self, j: usize) -> C64 {
        self.poles.mu()[j] * eps(self.p(), self.indices[j].i)
    }

    fn build_tilde(&self, a: Branch, b_variant: bool) -> CMat {
        let r = self.r();
        CMat::from_fn(r, r, |i, j| {
            let (ai, bj) = (self.a_coef(a, i), self.b_coef(j));
            let num = if b_variant { bj } else { ai };
            self.bracket(a, i, j) * num / (ai - bj)
        })
    }

    /// `D̃(A)`.
    pub fn d_tilde(&self, a: Branch) -> &CMat {
        match a {
            Branch::J => &self.d_tilde_j,
            Branch::K => &self.d_tilde_k,
        }
    }

    /// `B̃(A)`.
    pub fn b_tilde(&self, a: Branch) -> &CMat {
        match a {
            Branch::J => &self.b_tilde_j,
            Branch::K => &self.b_tilde_k,
        }
    }

    /// `H̃ = D̃(K) D̃(J)⁻¹`.
    pub fn h_tilde(&self) -> &CMat {
        &self.h_tilde
    }

    /// `F̃ = B̃(K) B̃(J)⁻¹`.
    pub fn f_tilde(&self) -> Result<CMat> {
        let inv = degenerate(linalg::guarded_inverse(&self.b_tilde_j, "B̃(J)"))?;
        Ok(&self.b_tilde_k * inv)
    }

    /// `Ỹ^{(A)}_{α,ij} = θ_α c_{I_j} ᵗd_{A_i} ᵗθ_α`.
    pub fn idempotent_tilde(&self, alpha: i64, a: Branch, i: usize, j: usize) -> CMat {
        let th = self.spectral.theta(alpha);
        th * &self.c[j] * self.d(a, i).transpose() * th.transpose()
    }

    /// `Y^{(A)}_{α,ij} = Ỹ^{(A)}_{α,ij} / (ᵗd_{A_i} Θ c_{I_j})`.
    pub fn idempotent(&self, alpha: i64, a: Branch, i: usize, j: usize) -> CMat {
        self.idempotent_tilde(alpha, a, i, j) / self.bracket(a, i, j)
    }

    fn c_mat(&self) -> CMat {
        CMat::from_columns(&self.c)
    }

    fn d_mat(&self, mask: u32) -> CMat {
        let cols: Vec<CVec> = (0..self.r())
            .map(|i| {
                let a = if mask >> i & 1 == 1 { Branch::K } else { Branch::J };
                self.d(a, i).clone()
            })
            .collect();
        CMat::from_columns(&cols)
    }

    /// `θ_α C M ᵗD ᵗθ_α = Σ_{jk} M_{kj} Ỹ_{α,jk}` with the `d` columns of `mask`.
    fn sandwich(&self, alpha: i64, m: &CMat, mask: u32) -> CMat {
        let th = self.spectral.theta(alpha);
        th * self.c_mat() * m * self.d_mat(mask).transpose() * th.transpose()
    }

    /// `D̃(J)` with the rows in `mask` taken from `D̃(K)`; `B̃` analogue when
    /// `b_variant`.
    pub fn delta_tilde(&self, mask: u32, b_variant: bool) -> CMat {
        let (j, k) = if b_variant {
            (&self.b_tilde_j, &self.b_tilde_k)
        } else {
            (&self.d_tilde_j, &self.d_tilde_k)
        };
        let mut out = j.clone();
        for i in 0..self.r() {
            if mask >> i & 1 == 1 {
                out.set_row(i, &k.row(i));
            }
        }
        out
    }

    /// `(X_{α,S}, X_{α,S}⁻¹)`.
    pub fn delta_matrix_x(&self, mask: u32, alpha: i64) -> Result<(CMat, CMat)> {
        let n = self.structure().size(alpha);
        let di = degenerate(linalg::guarded_inverse(&self.delta_tilde(mask, false), "Δ̃"))?;
        let bi = degenerate(linalg::guarded_inverse(&self.delta_tilde(mask, true), "Δ̃(B̃)"))?;
        let id = linalg::identity(n);
        Ok((
            &id - self.sandwich(alpha, &di, mask),
            &id + self.sandwich(alpha, &bi, mask),
        ))
    }

    /// `(h_{α,A}, h_{α,A}⁻¹)`.
    pub fn dressing_factor_h(&self, alpha: i64, a: Branch) -> Result<(CMat, CMat)> {
        let mask = match a {
            Branch::J => 0,
            Branch::K => (1u32 << self.r()) - 1,
        };
        self.delta_matrix_x(mask, alpha)
    }

    /// `e^{δ̃_i} = det Δ̃_i / det D̃(J)`, which equals `H̃_ii`.
    pub fn delta_exponent(&self, i: usize) -> C64 {
        linalg::determinant(&self.delta_tilde(1 << i, false)) / linalg::determinant(&self.d_tilde_j)
    }

    /// `E_{α,i} = ε_p^{αρ_i} e^{Z(ζ_i)} H̃_ii`.
    pub fn e_factor(&self, alpha: i64, i: usize, z: ZPoint) -> C64 {
        eps(self.p(), alpha * self.rho(i)) * self.phase(i, z).exp() * self.h_tilde[(i, i)]
    }

    fn subset_term(&self, mask: u32) -> Result<SubsetTerm> {
        let subset: Vec<usize> = (0..self.r()).filter(|i| mask >> i & 1 == 1).collect();
        let eta = interaction_eta(&self.h_tilde, &subset)?;
        let p = self.p() as i64;
        let mut x_tilde = Vec::with_capacity(p as usize);
        let mut x_tilde_inv = Vec::with_capacity(p as usize);
        for a in 1..=p {
            let (hj, hj_inv) = self.dressing_factor_h(a, Branch::J)?;
            let (x, x_inv) = self.delta_matrix_x(mask, a)?;
            x_tilde.push(hj_inv * x);
            x_tilde_inv.push(x_inv * hj);
        }
        Ok(SubsetTerm {
            mask,
            eta,
            x_tilde,
            x_tilde_inv,
        })
    }

    /// `η̃_S` for a bit mask (cached).
    pub fn eta(&self, mask: u32) -> C64 {
        self.terms[mask as usize].eta
    }

    /// Initial data of the matching general dressing problem.
    pub fn initial_data(&self) -> InitialData {
        let bs = self.structure();
        let ns = bs.n_star();
        let zero = CVec::zeros(ns);
        let mut c = vec![vec![zero.clone(); bs.p()]; self.r()];
        let mut d = vec![vec![zero; bs.p()]; self.r()];
        for (n, ix) in self.indices.iter().enumerate() {
            c[n][(ix.i - 1) as usize] = self.c[n].clone();
            d[n][(ix.j - 1) as usize] = self.d_j[n].clone();
            d[n][(ix.k - 1) as usize] = self.d_k[n].clone();
        }
        InitialData::without_null_sector(bs, c, d)
    }

    pub fn dressing_problem(&self) -> Result<DressingProblem> {
        DressingProblem::new(
            self.pair.clone(),
            self.spectral.clone(),
            self.poles.clone(),
            self.initial_data(),
        )
    }
}

fn degenerate<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::SolutionSingularity(m) => Error::DegenerateConfiguration(m),
        other => other,
    })
}

/// `η̃_S = det H̃_{SS} / Π_{k∈S} H̃_kk`.
pub fn interaction_eta(h: &CMat, subset: &[usize]) -> Result<C64> {
    let mut diag = ONE;
    for &k in subset {
        if h[(k, k)].norm() == 0.0 {
            return Err(Error::DegenerateConfiguration(format!(
                "H̃_{{{0}{0}}} vanishes",
                k + 1
            )));
        }
        diag *= h[(k, k)];
    }
    let sub = CMat::from_fn(subset.len(), subset.len(), |a, b| h[(subset[a], subset[b])]);
    Ok(linalg::determinant(&sub) / diag)
}

/// Scalar `T̃_α` and matrices `T̃^X_α`, `T̃^{X⁻¹}_α`.
///
/// `t_x_inv` carries the weights `E_{α,i}` with the matrices `X̃⁻¹_{α-1,S}`,
/// so that `Γ_α⁻¹ = T̃^{X⁻¹}_{α+1} / T̃_{α+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TauPair {
    pub t: C64,
    pub t_x: CMat,
    pub t_x_inv: CMat,
}

pub fn multi_soliton_tau_pair(spec: &SolitonSpec, z: ZPoint, alpha: i64) -> Result<TauPair> {
    let bs = spec.structure();
    let k = bs.index(alpha);
    let k_prev = bs.index(alpha - 1);
    let e: Vec<C64> = (0..spec.r()).map(|i| spec.e_factor(alpha, i, z)).collect();
    let mut t = ZERO;
    let mut scale = 0.0;
    let mut t_x = CMat::zeros(bs.size(alpha), bs.size(alpha));
    let mut t_x_inv = CMat::zeros(bs.size(alpha - 1), bs.size(alpha - 1));
    for term in &spec.terms {
        let w = (0..spec.r())
            .filter(|i| term.mask >> i & 1 == 1)
            .fold(term.eta, |acc, i| acc * e[i]);
        t += w;
        scale += w.norm();
        t_x += &term.x_tilde[k] * w;
        t_x_inv += &term.x_tilde_inv[k_prev] * w;
    }
    if !t.is_finite() || t.norm() < SINGULAR_TAU * (1.0 + scale) {
        return Err(Error::SolutionSingularity(format!(
            "T̃_{alpha} = {t:.3e} at (z⁻, z⁺) = ({}, {})",
            z.z_minus, z.z_plus
        )));
    }
    Ok(TauPair { t, t_x, t_x_inv })
}

/// `(Γ_α, Γ_α⁻¹) = (T̃^X_α / T̃_α, T̃^{X⁻¹}_{α+1} / T̃_{α+1})`.
pub fn soliton_gamma_pair(spec: &SolitonSpec, z: ZPoint, alpha: i64) -> Result<(CMat, CMat)> {
    let here = multi_soliton_tau_pair(spec, z, alpha)?;
    let next = multi_soliton_tau_pair(spec, z, alpha + 1)?;
    Ok((here.t_x / here.t, next.t_x_inv / next.t))
}

/// The one-soliton formula written with idempotents, for `r = 1`.
pub fn one_soliton(spec: &SolitonSpec, z: ZPoint) -> Result<Vec<(CMat, CMat)>> {
    if spec.r() != 1 {
        return Err(Error::InvalidArgument(format!(
            "one_soliton needs r = 1, got {}",
            spec.r()
        )));
    }
    let bs = spec.structure();
    let p = bs.p();
    let ix = spec.indices[0];
    let (mu, nu) = (spec.poles.mu()[0], spec.poles.nu()[0]);
    let x = |a: i64| mu / nu * eps(p, ix.i + a);
    let (xj, xk) = (x(ix.j), x(ix.k));
    let h_tilde = spec.h_tilde[(0, 0)];
    let ez = spec.phase(0, z).exp();
    let mut out = Vec::with_capacity(p);
    for a in 1..=p as i64 {
        let id = linalg::identity(bs.size(a));
        let yj = spec.idempotent(a, Branch::J, 0, 0);
        let yk = spec.idempotent(a, Branch::K, 0, 0);
        let hk = &id - &yk * (ONE - xk);
        let hk_inv = &id - &yk * (ONE - xk.inv());
        let hj = &id - &yj * (ONE - xj);
        let hj_inv = &id - &yj * (ONE - xj.inv());
        let xt = hj_inv * hk;
        let xt_inv = hk_inv * hj;
        let e = eps(p, a * spec.rho(0)) * ez * h_tilde;
        let e_next = eps(p, (a + 1) * spec.rho(0)) * ez * h_tilde;
        for den in [ONE + e, ONE + e_next] {
            if !den.is_finite() || den.norm() <= 1e-12 {
                return Err(Error::SolutionSingularity(format!(
                    "1 + E vanishes at (z⁻, z⁺) = ({}, {})",
                    z.z_minus, z.z_plus
                )));
            }
        }
        out.push(((&id + xt * e) / (ONE + e), (&id + xt_inv * e_next) / (ONE + e_next)));
    }
    Ok(out)
}

/// Which construction evaluates a [`SolitonSolution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// τ-pair formula.
    ClosedForm,
    /// General dressing; equals the closed form multiplied on the left by
    /// the constant factor `h_{α,J}`.
    Dressing,
}

/// An evaluatable soliton solution `(z⁻, z⁺) ↦ {Γ_α, Γ_α⁻¹}`.
#[derive(Clone, Debug)]
pub struct SolitonSolution {
    spec: SolitonSpec,
    provenance: Provenance,
    dressing: Option<DressingProblem>,
}

impl SolitonSolution {
    pub fn closed_form(spec: SolitonSpec) -> Self {
        Self {
            spec,
            provenance: Provenance::ClosedForm,
            dressing: None,
        }
    }

    pub fn dressing(spec: SolitonSpec) -> Result<Self> {
        let dressing = Some(spec.dressing_problem()?);
        Ok(Self {
            spec,
            provenance: Provenance::Dressing,
            dressing,
        })
    }

    pub fn spec(&self) -> &SolitonSpec {
        &self.spec
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

impl GammaField for SolitonSolution {
    fn structure(&self) -> &BlockStructure {
        self.spec.structure()
    }

    fn gamma(&self, z: ZPoint) -> Result<Vec<CMat>> {
        Ok(self.gamma_pairs(z)?.into_iter().map(|(g, _)| g).collect())
    }

    fn gamma_pairs(&self, z: ZPoint) -> Result<Vec<(CMat, CMat)>> {
        match &self.dressing {
            Some(d) => d.gamma_pairs(z),
            None => (1..=self.spec.p() as i64)
                .map(|a| soliton_gamma_pair(&self.spec, z, a))
                .collect(),
        }
    }
}
