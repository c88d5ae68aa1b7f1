//! General rational dressing of the trivial solution: pole data, evolved
//! vectors `u_i`, `y_i`, the quasi-periodic matrices `R̃_α`, the solution
//! blocks `Γ_α`, `Γ_α⁻¹`, and the dressing mapping `ψ(λ)` itself.

use crate::blockalg::{eps, h_power, BlockStructure, GradedPair};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::spectral::SpectralData;
use crate::verify::{GammaField, ZPoint};
use crate::{Error, Result};

/// Relative separation required between `μ_i^p`, `ν_j^p` values.
pub const POLE_SEPARATION: f64 = 1e-9;

/// `Σ_{a=0}^{p-1} z ε_p^{-βa} / (z - ε_p^a)` and `p z^{p-|β|_p} / (z^p - 1)`.
pub fn cyclotomic_identity(z: C64, beta: i64, p: usize) -> Result<(C64, C64)> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    let pi = p as i64;
    if let Some(a) = (0..pi).find(|&a| (z - eps(p, a)).norm() <= 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "z = {z} sits on the pole ε_{p}^{a}"
        )));
    }
    let lhs = (0..pi).map(|a| z * eps(p, -beta * a) / (z - eps(p, a))).sum();
    let rem = beta.rem_euclid(pi);
    let rhs = z.powi((pi - rem) as i32) * p as f64 / (z.powu(p as u32) - ONE);
    Ok((lhs, rhs))
}

fn separated(a: C64, b: C64) -> bool {
    (a - b).norm() >= POLE_SEPARATION * a.norm().max(b.norm())
}

/// Pole positions `μ_i` of `ψ` and `ν_i` of `ψ⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleData {
    p: usize,
    mu: Vec<C64>,
    nu: Vec<C64>,
}

impl PoleData {
    pub fn new(p: usize, mu: Vec<C64>, nu: Vec<C64>) -> Result<Self> {
        if mu.len() != nu.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values of μ but {} of ν",
                mu.len(),
                nu.len()
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("p must be positive".into()));
        }
        for (i, (m, v)) in mu.iter().zip(&nu).enumerate() {
            if m.norm() == 0.0 || v.norm() == 0.0 {
                return Err(Error::InvalidArgument(format!("pole {} is at zero", i + 1)));
            }
        }
        let mp: Vec<C64> = mu.iter().map(|m| m.powu(p as u32)).collect();
        let np: Vec<C64> = nu.iter().map(|v| v.powu(p as u32)).collect();
        let r = mu.len();
        for i in 0..r {
            for j in 0..r {
                if i < j && !separated(mp[i], mp[j]) {
                    return Err(Error::PoleCollision(format!(
                        "μ_{}^p and μ_{}^p coincide",
                        i + 1,
                        j + 1
                    )));
                }
                if i < j && !separated(np[i], np[j]) {
                    return Err(Error::PoleCollision(format!(
                        "ν_{}^p and ν_{}^p coincide",
                        i + 1,
                        j + 1
                    )));
                }
                if !separated(np[i], mp[j]) {
                    return Err(Error::PoleCollision(format!(
                        "ν_{}^p and μ_{}^p coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { p, mu, nu })
    }

    pub fn r(&self) -> usize {
        self.mu.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mu(&self) -> &[C64] {
        &self.mu
    }

    pub fn nu(&self) -> &[C64] {
        &self.nu
    }
}

/// Expansion coefficients of the initial vectors `u_i(0)`, `y_i(0)` over the
/// eigenvectors `Ψ_β` (length `n_*` each) and the null basis `Ψ_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    /// `c[i][β-1]`.
    pub c: Vec<Vec<CVec>>,
    /// `d[i][β-1]`.
    pub d: Vec<Vec<CVec>>,
    pub c0: Vec<CVec>,
    pub d0: Vec<CVec>,
}

impl InitialData {
    /// Zero null-sector coefficients.
    pub fn without_null_sector(bs: &BlockStructure, c: Vec<Vec<CVec>>, d: Vec<Vec<CVec>>) -> Self {
        let r = c.len();
        let z = CVec::zeros(bs.null_dim());
        Self {
            c,
            d,
            c0: vec![z.clone(); r],
            d0: vec![z; r],
        }
    }

    pub fn r(&self) -> usize {
        self.c.len()
    }

    fn check(&self, bs: &BlockStructure, r: usize) -> Result<()> {
        let ok_len = |v: &Vec<Vec<CVec>>| {
            v.len() == r
                && v.iter()
                    .all(|w| w.len() == bs.p() && w.iter().all(|x| x.len() == bs.n_star()))
        };
        if !ok_len(&self.c) || !ok_len(&self.d) {
            return Err(Error::StructureMismatch(format!(
                "initial data needs {r} poles × {} coefficient vectors of length {}",
                bs.p(),
                bs.n_star()
            )));
        }
        let ok0 = |v: &Vec<CVec>| v.len() == r && v.iter().all(|x| x.len() == bs.null_dim());
        if !ok0(&self.c0) || !ok0(&self.d0) {
            return Err(Error::StructureMismatch(format!(
                "null-sector coefficients must have length {}",
                bs.null_dim()
            )));
        }
        Ok(())
    }

    pub fn has_null_sector(&self) -> bool {
        self.c0.iter().chain(&self.d0).any(|v| v.iter().any(|x| *x != ZERO))
    }

    /// `(u_i(0), y_i(0))` for every pole.
    pub fn initial_vectors(&self, sd: &SpectralData) -> Result<Vec<(CVec, CVec)>> {
        let p = sd.structure().p() as i64;
        let psis: Vec<CMat> = (1..=p).map(|b| sd.psi(b)).collect::<Result<_>>()?;
        Ok((0..self.r())
            .map(|i| {
                let mut u = sd.psi0() * &self.c0[i];
                let mut y = sd.psi0() * &self.d0[i];
                for (b, psi) in psis.iter().enumerate() {
                    u += psi * &self.c[i][b];
                    y += psi * &self.d[i][b];
                }
                (u, y)
            })
            .collect())
    }
}

/// `Z_α(μ) = μ⁻¹ ε_p^{-α} z⁻ + μ ε_p^α z⁺`.
pub fn z_alpha(p: usize, alpha: i64, mu: C64, z: ZPoint) -> C64 {
    mu.inv() * eps(p, -alpha) * z.z_minus + mu * eps(p, alpha) * z.z_plus
}

/// `u_i`, `y_i` at one point together with the pole data needed for the
/// quasi-periodic pieces.
#[derive(Clone, Debug)]
pub struct EvolvedVectors {
    structure: BlockStructure,
    point: ZPoint,
    mu: Vec<C64>,
    nu: Vec<C64>,
    u: Vec<CVec>,
    y: Vec<CVec>,
}

impl EvolvedVectors {
    /// Wraps externally evolved vectors, e.g. from the matrix-exponential
    /// oracle when the null sector is populated.
    pub fn from_vectors(
        bs: &BlockStructure,
        poles: &PoleData,
        point: ZPoint,
        u: Vec<CVec>,
        y: Vec<CVec>,
    ) -> Result<Self> {
        if u.len() != poles.r() || y.len() != poles.r() {
            return Err(Error::StructureMismatch("one u and one y per pole".into()));
        }
        if u.iter().chain(&y).any(|v| v.len() != bs.n()) {
            return Err(Error::StructureMismatch(format!(
                "evolved vectors must have length {}",
                bs.n()
            )));
        }
        Ok(Self {
            structure: bs.clone(),
            point,
            mu: poles.mu.clone(),
            nu: poles.nu.clone(),
            u,
            y,
        })
    }

    pub fn point(&self) -> ZPoint {
        self.point
    }

    pub fn u(&self, i: usize) -> &CVec {
        &self.u[i]
    }

    pub fn y(&self, i: usize) -> &CVec {
        &self.y[i]
    }

    fn block(&self, v: &CVec, alpha: i64) -> CVec {
        let bs = &self.structure;
        v.rows(bs.offset(alpha), bs.size(alpha)).into_owned()
    }

    /// `ũ_{i,α} = u_{i,α} μ_i^α` for any integer `α`.
    pub fn u_tilde(&self, i: usize, alpha: i64) -> CVec {
        self.block(&self.u[i], alpha) * self.mu[i].powi(alpha as i32)
    }

    /// `ỹ_{i,α} = y_{i,α} ν_i^{-α}` for any integer `α`.
    pub fn y_tilde(&self, i: usize, alpha: i64) -> CVec {
        self.block(&self.y[i], alpha) * self.nu[i].powi(-alpha as i32)
    }

    fn u_tilde_mat(&self, alpha: i64) -> CMat {
        cols(self.structure.size(alpha), (0..self.mu.len()).map(|i| self.u_tilde(i, alpha)))
    }

    fn y_tilde_mat(&self, alpha: i64) -> CMat {
        cols(self.structure.size(alpha), (0..self.nu.len()).map(|i| self.y_tilde(i, alpha)))
    }
}

fn cols(rows: usize, it: impl Iterator<Item = CVec>) -> CMat {
    let v: Vec<CVec> = it.collect();
    if v.is_empty() {
        CMat::zeros(rows, 0)
    } else {
        CMat::from_columns(&v)
    }
}

/// Closed-form evolution in the eigenbasis of `c_±`.
pub fn evolve_vectors(
    poles: &PoleData,
    init: &InitialData,
    sd: &SpectralData,
    z: ZPoint,
) -> Result<EvolvedVectors> {
    if init.has_null_sector() {
        return Err(Error::UnsupportedNullSector);
    }
    let bs = sd.structure();
    let p = bs.p();
    let psis: Vec<CMat> = (1..=p as i64).map(|b| sd.psi(b)).collect::<Result<_>>()?;
    let mut u = Vec::with_capacity(poles.r());
    let mut y = Vec::with_capacity(poles.r());
    for i in 0..poles.r() {
        let (mu, nu) = (poles.mu[i], poles.nu[i]);
        let mut ui = CVec::zeros(bs.n());
        let mut yi = CVec::zeros(bs.n());
        for (k, psi) in psis.iter().enumerate() {
            let b = k as i64 + 1;
            ui += psi * &init.c[i][k] * (-z_alpha(p, b, mu, z)).exp();
            yi += psi * &init.d[i][k] * z_alpha(p, -b, nu, z).exp();
        }
        u.push(ui);
        y.push(yi);
    }
    EvolvedVectors::from_vectors(bs, poles, z, u, y)
}

/// `R̃_α` for any integer `α`; values outside `1..=p+1` use the
/// quasi-periodicity `(R̃_{α+p})_{ij} = ν_i^{-p} (R̃_α)_{ij} μ_j^p`.
pub fn r_tilde(ev: &EvolvedVectors, poles: &PoleData, alpha: i64) -> Result<CMat> {
    let p = ev.structure.p() as i64;
    let shift = if alpha == p + 1 { 0 } else { (alpha - 1).div_euclid(p) };
    let a0 = alpha - shift * p;
    let r = poles.r();
    let mp: Vec<C64> = poles.mu.iter().map(|m| m.powi(p as i32)).collect();
    let np: Vec<C64> = poles.nu.iter().map(|v| v.powi(p as i32)).collect();
    let mut lower = CMat::zeros(r, r);
    let mut upper = CMat::zeros(r, r);
    for b in 1..=p {
        let n = ev.y_tilde_mat(b).transpose() * ev.u_tilde_mat(b);
        if b < a0 {
            lower += n;
        } else {
            upper += n;
        }
    }
    let mut out = CMat::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            let den = np[i] - mp[j];
            if !separated(np[i], mp[j]) {
                return Err(Error::PoleCollision(format!(
                    "ν_{}^p and μ_{}^p coincide",
                    i + 1,
                    j + 1
                )));
            }
            let v = (mp[j] * lower[(i, j)] + np[i] * upper[(i, j)]) / den;
            out[(i, j)] = v * (mp[j] / np[i]).powi(shift as i32);
        }
    }
    Ok(out)
}

/// Everything evaluated at one point: `R̃_α` for `α = 1..p+1`, their
/// inverses, and the blocks `Γ_α`, `Γ_α⁻¹`.
#[derive(Clone, Debug)]
pub struct DressedSolution {
    ev: EvolvedVectors,
    poles: PoleData,
    r_tilde: Vec<CMat>,
    r_inv: Vec<CMat>,
    gamma: Vec<CMat>,
    gamma_inv: Vec<CMat>,
}

impl DressedSolution {
    pub fn from_evolved(ev: EvolvedVectors, poles: &PoleData) -> Result<Self> {
        let bs = ev.structure.clone();
        let p = bs.p() as i64;
        let r_tilde: Vec<CMat> = (1..=p + 1)
            .map(|a| r_tilde(&ev, poles, a))
            .collect::<Result<_>>()?;
        let r_inv: Vec<CMat> = r_tilde
            .iter()
            .enumerate()
            .map(|(k, m)| linalg::guarded_inverse(m, &format!("R̃_{}", k + 1)))
            .collect::<Result<_>>()?;
        let mut gamma = Vec::with_capacity(bs.p());
        let mut gamma_inv = Vec::with_capacity(bs.p());
        for a in 1..=p {
            let (u, y) = (ev.u_tilde_mat(a), ev.y_tilde_mat(a));
            let id = linalg::identity(bs.size(a));
            let k = (a - 1) as usize;
            gamma.push(&id - &u * &r_inv[k] * y.transpose());
            gamma_inv.push(&id + &u * &r_inv[k + 1] * y.transpose());
        }
        Ok(Self {
            ev,
            poles: poles.clone(),
            r_tilde,
            r_inv,
            gamma,
            gamma_inv,
        })
    }

    pub fn evolved(&self) -> &EvolvedVectors {
        &self.ev
    }

    /// Cached `R̃_α` for `α = 1..p+1`.
    pub fn r_tilde(&self, alpha: i64) -> &CMat {
        &self.r_tilde[(alpha - 1) as usize]
    }

    pub fn gammas(&self) -> &[CMat] {
        &self.gamma
    }

    pub fn gamma_invs(&self) -> &[CMat] {
        &self.gamma_inv
    }

    /// `(R_β)_{ij} = ν_i^β (R̃_β)_{ij} μ_j^{-β}` for `β = 1..p+1`.
    fn r_plain_inv(&self, beta: i64) -> CMat {
        let m = &self.r_inv[(beta - 1) as usize];
        let (mu, nu) = (&self.poles.mu, &self.poles.nu);
        // (D_ν R̃ D_μ⁻¹)⁻¹ = D_μ R̃⁻¹ D_ν⁻¹
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| {
            mu[i].powi(beta as i32) * m[(i, j)] * nu[j].powi(-beta as i32)
        })
    }
}

/// `(Γ_α, Γ_α⁻¹)`, cyclic in `alpha`.
pub fn gamma_pair(ds: &DressedSolution, alpha: i64) -> (CMat, CMat) {
    let k = ds.ev.structure.index(alpha);
    (ds.gamma[k].clone(), ds.gamma_inv[k].clone())
}

/// Rank-one data `P_i`, `Q_i` (`n × n`) of the dressing mapping.
pub fn p_q_matrices(ds: &DressedSolution) -> Vec<(CMat, CMat)> {
    let bs = &ds.ev.structure;
    let p = bs.p() as i64;
    let r = ds.poles.r();
    let (mu, nu) = (&ds.poles.mu, &ds.poles.nu);
    let ub = |i: usize, a: i64| ds.ev.block(&ds.ev.u[i], a);
    let yb = |i: usize, a: i64| ds.ev.block(&ds.ev.y[i], a);
    let rinv: Vec<CMat> = (1..=p + 1).map(|b| ds.r_plain_inv(b)).collect();
    let scale = C64::new(1.0 / p as f64, 0.0);
    (0..r)
        .map(|i| {
            let mut pm = CMat::zeros(bs.n(), bs.n());
            let mut qm = CMat::zeros(bs.n(), bs.n());
            for a in 1..=p {
                for b in 1..=p {
                    let mut w = CVec::zeros(bs.size(b));
                    for j in 0..r {
                        w += yb(j, b) * rinv[(b - 1) as usize][(i, j)];
                    }
                    let pblk = ub(i, a) * w.transpose() * (-scale);
                    let mut x = CVec::zeros(bs.size(a));
                    for j in 0..r {
                        x += ub(j, a) * (mu[j].inv() * rinv[a as usize][(j, i)]);
                    }
                    let qblk = x * yb(i, b).transpose() * (nu[i] * scale);
                    let at = (bs.offset(a), bs.offset(b));
                    let shape = (bs.size(a), bs.size(b));
                    pm.view_mut(at, shape).copy_from(&pblk);
                    qm.view_mut(at, shape).copy_from(&qblk);
                }
            }
            (pm, qm)
        })
        .collect()
}

/// `I + Σ_{i,k} λ/(λ - ε_p^k s_i) h^k M_i h^{-k}`.
fn rational_map(
    bs: &BlockStructure,
    poles: &[C64],
    mats: &[CMat],
    lambda: C64,
) -> Result<CMat> {
    let p = bs.p() as i64;
    let mut out = linalg::identity(bs.n());
    for (s, m) in poles.iter().zip(mats) {
        for k in 1..=p {
            let pole = eps(bs.p(), k) * s;
            if (lambda - pole).norm() <= 1e-10 * s.norm().max(1.0) {
                return Err(Error::InvalidArgument(format!("λ = {lambda} is a pole")));
            }
            let conj = h_power(bs, k).to_flat() * m * h_power(bs, -k).to_flat();
            out += conj * (lambda / (lambda - pole));
        }
    }
    Ok(out)
}

/// `(ψ(λ), ψ⁻¹(λ))` normalised by `ψ(0) = I`.
pub fn assemble_psi_pair(ds: &DressedSolution, lambda: C64) -> Result<(CMat, CMat)> {
    let pq = p_q_matrices(ds);
    psi_pair_from(&ds.ev.structure, &ds.poles, &pq, lambda)
}

fn psi_pair_from(
    bs: &BlockStructure,
    poles: &PoleData,
    pq: &[(CMat, CMat)],
    lambda: C64,
) -> Result<(CMat, CMat)> {
    let ps: Vec<CMat> = pq.iter().map(|(p, _)| p.clone()).collect();
    let qs: Vec<CMat> = pq.iter().map(|(_, q)| q.clone()).collect();
    Ok((
        rational_map(bs, &poles.mu, &ps, lambda)?,
        rational_map(bs, &poles.nu, &qs, lambda)?,
    ))
}

/// `ψ_∞ = I + Σ_{i,k} h^k P_i h^{-k}`.
pub fn psi_infinity(ds: &DressedSolution) -> CMat {
    let bs = &ds.ev.structure;
    let mut out = linalg::identity(bs.n());
    for (pm, _) in p_q_matrices(ds) {
        for k in 1..=bs.p() as i64 {
            out += h_power(bs, k).to_flat() * &pm * h_power(bs, -k).to_flat();
        }
    }
    out
}

/// Largest entries of `Q_i ψ(ν_i)` and `ψ⁻¹(μ_i) P_i`: the residue
/// conditions at the poles of `ψ⁻¹` and `ψ`.
pub fn residue_residuals(ds: &DressedSolution) -> Result<(f64, f64)> {
    let bs = &ds.ev.structure;
    let pq = p_q_matrices(ds);
    let ps: Vec<CMat> = pq.iter().map(|(p, _)| p.clone()).collect();
    let qs: Vec<CMat> = pq.iter().map(|(_, q)| q.clone()).collect();
    let (mut left, mut right) = (0.0f64, 0.0f64);
    for (i, (pm, qm)) in pq.iter().enumerate() {
        let psi_at_nu = rational_map(bs, &ds.poles.mu, &ps, ds.poles.nu[i])?;
        let psi_inv_at_mu = rational_map(bs, &ds.poles.nu, &qs, ds.poles.mu[i])?;
        left = left.max(linalg::max_abs(&(qm * psi_at_nu)));
        right = right.max(linalg::max_abs(&(psi_inv_at_mu * pm)));
    }
    Ok((left, right))
}

/// A dressing problem: graded pair, spectral data, poles, initial data.
#[derive(Clone, Debug)]
pub struct DressingProblem {
    pair: GradedPair,
    spectral: SpectralData,
    poles: PoleData,
    init: InitialData,
}

impl DressingProblem {
    pub fn new(
        pair: GradedPair,
        spectral: SpectralData,
        poles: PoleData,
        init: InitialData,
    ) -> Result<Self> {
        let bs = pair.structure();
        if spectral.structure() != bs {
            return Err(Error::StructureMismatch("spectral data and pair differ".into()));
        }
        if poles.p() != bs.p() {
            return Err(Error::StructureMismatch(format!(
                "poles built for p = {}, structure has p = {}",
                poles.p(),
                bs.p()
            )));
        }
        // The dual eigenvectors are taken to be Ψ_β themselves, which needs
        // ᵗc_- = c_+.
        let (cm, cp) = (pair.c_minus().to_flat(), pair.c_plus().to_flat());
        if linalg::max_abs(&(cm.transpose() - cp)) > 1e-14 {
            return Err(Error::InvalidArgument(
                "dressing requires c_+ to be the transpose of c_-".into(),
            ));
        }
        init.check(bs, poles.r())?;
        Ok(Self {
            pair,
            spectral,
            poles,
            init,
        })
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

    pub fn initial_data(&self) -> &InitialData {
        &self.init
    }

    pub fn evolve(&self, z: ZPoint) -> Result<EvolvedVectors> {
        evolve_vectors(&self.poles, &self.init, &self.spectral, z)
    }

    pub fn solve(&self, z: ZPoint) -> Result<DressedSolution> {
        DressedSolution::from_evolved(self.evolve(z)?, &self.poles)
    }
}

impl GammaField for DressingProblem {
    fn structure(&self) -> &BlockStructure {
        self.pair.structure()
    }

    fn gamma(&self, z: ZPoint) -> Result<Vec<CMat>> {
        Ok(self.solve(z)?.gamma)
    }

    fn gamma_pairs(&self, z: ZPoint) -> Result<Vec<(CMat, CMat)>> {
        let ds = self.solve(z)?;
        Ok(ds.gamma.into_iter().zip(ds.gamma_inv).collect())
    }
}
