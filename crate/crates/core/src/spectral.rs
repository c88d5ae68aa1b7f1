//! Eigen-structure of `c_±`: the `θ_α` chain, the eigenvector matrices `Ψ_β`
//! for the nonzero eigenvalues `ε_p^{∓β}`, and the null-sector basis `Ψ_0`.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::blockalg::{eps, BlockStructure, GradedPair};
use crate::linalg::{self, CMat, C64};
use crate::{Error, Result};

const CHAIN_TOL: f64 = 1e-12;
/// Eigenvalues within this distance of a cluster centre belong to it.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Eigenvalues within this distance of two centres are ambiguous.
pub const AMBIGUITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SpectralData {
    structure: BlockStructure,
    theta: Vec<CMat>,
    gram: CMat,
    psi0: CMat,
}

impl SpectralData {
    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    /// `θ_α` (`n_α × n_*`), cyclic in `alpha`.
    pub fn theta(&self, alpha: i64) -> &CMat {
        &self.theta[self.structure.index(alpha)]
    }

    /// The Gram matrix `Θ = ᵗθ_α θ_α`, the same for every `α`.
    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    /// Null-sector basis, `n × (n - p n_*)`.
    pub fn psi0(&self) -> &CMat {
        &self.psi0
    }

    /// `Ψ_β` for `β = 1..p`.
    pub fn psi(&self, beta: i64) -> Result<CMat> {
        eigen_psi(self, beta)
    }
}

/// Canonical `θ_α = (I_{n_*}; 0)` with `Θ = I`, checked against the chain
/// relations `C_{-α} θ_α = θ_{α+1}`, `C_{+α} θ_{α+1} = θ_α`.
pub fn canonical_theta(pair: &GradedPair) -> Result<SpectralData> {
    let bs = pair.structure().clone();
    let ns = bs.n_star();
    let p = bs.p() as i64;
    let theta: Vec<CMat> = (1..=p)
        .map(|a| linalg::rect_identity(bs.size(a), ns))
        .collect();
    let th = |a: i64| &theta[bs.index(a)];
    for a in 1..=p {
        let down = linalg::max_abs(&(pair.cm(a) * th(a) - th(a + 1)));
        let up = linalg::max_abs(&(pair.cp(a) * th(a + 1) - th(a)));
        if down > CHAIN_TOL || up > CHAIN_TOL {
            return Err(Error::SpectralConstruction(format!(
                "canonical θ violates the chain relations at α = {a} (residual {:.2e})",
                down.max(up)
            )));
        }
    }
    let gram = linalg::identity(ns);
    let mut sd = SpectralData {
        structure: bs,
        theta,
        gram,
        psi0: CMat::zeros(0, 0),
    };
    sd.psi0 = null_basis(pair)?;
    check_basis(&sd)?;
    Ok(sd)
}

/// `Ψ_β` with block rows `Ψ_{β,α} = ε_p^{αβ} θ_α`.
pub fn eigen_psi(sd: &SpectralData, beta: i64) -> Result<CMat> {
    let bs = &sd.structure;
    let p = bs.p() as i64;
    if !(1..=p).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "β = {beta} outside 1..{p}"
        )));
    }
    let mut psi = CMat::zeros(bs.n(), bs.n_star());
    for a in 1..=p {
        let blk = sd.theta(a) * eps(bs.p(), a * beta);
        psi.view_mut((bs.offset(a), 0), (bs.size(a), bs.n_star()))
            .copy_from(&blk);
    }
    Ok(psi)
}

/// Basis of `ker (c_-)^p`, orthonormal columns from an SVD.
pub fn null_basis(pair: &GradedPair) -> Result<CMat> {
    let bs = pair.structure();
    let cm = pair.c_minus().to_flat();
    let scale = cm.clone().svd(false, false).singular_values.max();
    let mut power = linalg::identity(bs.n());
    for _ in 0..bs.p() {
        power = &cm * power;
    }
    let basis = linalg::kernel_basis(&power, 1e-10 * scale.max(1.0));
    if basis.ncols() != bs.null_dim() {
        return Err(Error::SpectralConstruction(format!(
            "generalized null space of c_- has dimension {}, expected {}",
            basis.ncols(),
            bs.null_dim()
        )));
    }
    Ok(basis)
}

fn check_basis(sd: &SpectralData) -> Result<()> {
    let bs = &sd.structure;
    let mut cols = Vec::with_capacity(bs.n());
    for b in 1..=bs.p() as i64 {
        let psi = eigen_psi(sd, b)?;
        cols.extend(psi.column_iter().map(|c| c.into_owned()));
    }
    cols.extend(sd.psi0.column_iter().map(|c| c.into_owned()));
    let full = CMat::from_columns(&cols);
    let rank = linalg::numerical_rank(&full, 1e-10);
    if rank != bs.n() {
        return Err(Error::SpectralConstruction(format!(
            "[Ψ_1..Ψ_p | Ψ_0] has rank {rank}, expected {}",
            bs.n()
        )));
    }
    Ok(())
}

/// Clustered spectrum of `c_-`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    pub zero_algebraic: usize,
    pub zero_geometric: usize,
    /// Multiplicity of `ε_p^{-β}` at index `β - 1`.
    pub nonzero: Vec<usize>,
    /// Eigenvalues that fell into no cluster.
    pub unmatched: usize,
}

impl SpectrumReport {
    /// Whether the clustering matches `(-1)^n t^{n-pn_*} (t^p - 1)^{n_*}`
    /// with geometric multiplicity `n - k` at zero.
    pub fn matches(&self, bs: &BlockStructure) -> bool {
        self.unmatched == 0
            && self.zero_algebraic == bs.null_dim()
            && self.zero_geometric == bs.n() - bs.rank_k()
            && self.nonzero.iter().all(|&m| m == bs.n_star())
    }
}

pub fn spectrum_multiplicities(pair: &GradedPair) -> Result<SpectrumReport> {
    let bs = pair.structure();
    let p = bs.p();
    let cm = pair.c_minus().to_flat();
    let eigenvalues = eigenvalues(&cm)?;
    let centres: Vec<C64> = std::iter::once(linalg::ZERO)
        .chain((1..=p as i64).map(|b| eps(p, -b)))
        .collect();
    let mut counts = vec![0usize; p + 1];
    let mut unmatched = 0;
    for ev in &eigenvalues {
        let near: Vec<usize> = (0..centres.len())
            .filter(|&k| (ev - centres[k]).norm() < AMBIGUITY_TOL)
            .collect();
        if near.len() > 1 {
            return Err(Error::SpectralConstruction(format!(
                "eigenvalue {ev} is close to several clusters"
            )));
        }
        match near.first() {
            Some(&k) if (ev - centres[k]).norm() <= CLUSTER_TOL => counts[k] += 1,
            _ => unmatched += 1,
        }
    }
    Ok(SpectrumReport {
        eigenvalues,
        zero_algebraic: counts[0],
        zero_geometric: bs.n() - linalg::numerical_rank(&cm, 1e-10),
        nonzero: counts[1..].to_vec(),
        unmatched,
    })
}

/// Eigenvalues of a dense matrix. Structurally decoupled parts are isolated
/// first (strongly connected components of the sparsity graph, as in LAPACK
/// balancing), so exact nilpotent chains give exact zeros instead of the
/// `ε^{1/m}` scatter a defective eigenvalue suffers under a Schur solver.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != linalg::ZERO {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for comp in tarjan_scc(&g) {
        let idx: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        if idx.len() == 1 {
            out.push(m[(idx[0], idx[0])]);
            continue;
        }
        let sub = CMat::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
        out.extend(schur_eigenvalues(&sub)?);
    }
    Ok(out)
}

/// Schur eigenvalues with an iteration cap. Cyclic permutation blocks stall
/// the shifted QR iteration, so on failure the block is first rotated by a
/// fixed unitary similarity.
fn schur_eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    let attempt = |a: CMat| {
        nalgebra::linalg::Schur::try_new(a, f64::EPSILON, 10_000)
            .and_then(|s| s.eigenvalues())
            .map(|v| v.iter().copied().collect::<Vec<_>>())
    };
    if let Some(ev) = attempt(m.clone()) {
        return Ok(ev);
    }
    let seed = CMat::from_fn(n, n, |i, j| {
        C64::new(((i * 7 + j * 3 + 1) as f64).sin(), ((i * 5 + j * 11 + 2) as f64).cos())
    });
    let q = seed.qr().q();
    attempt(q.adjoint() * m * &q).ok_or_else(|| {
        Error::SpectralConstruction("Schur decomposition did not converge".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockalg::build_canonical_c;
    use crate::linalg::{max_abs, ONE};

    fn sd(sizes: &[usize]) -> (GradedPair, SpectralData) {
        let bs = BlockStructure::new(sizes.to_vec()).unwrap();
        let pair = build_canonical_c(&bs).unwrap();
        let sd = canonical_theta(&pair).unwrap();
        (pair, sd)
    }

    #[test]
    fn theta_two_one() {
        let (pair, sd) = sd(&[2, 1]);
        assert_eq!(sd.theta(1), &CMat::from_row_slice(2, 1, &[ONE, linalg::ZERO]));
        assert_eq!(sd.theta(2), &CMat::from_element(1, 1, ONE));
        assert_eq!(&(pair.cm(1) * sd.theta(1)), sd.theta(2));
        assert_eq!(sd.gram(), &linalg::identity(1));
    }

    #[test]
    fn psi_sine_gordon_like() {
        let (pair, sd) = sd(&[1, 1]);
        let cm = pair.c_minus().to_flat();
        let psi2 = sd.psi(2).unwrap();
        assert!(max_abs(&(&psi2 - CMat::from_element(2, 1, ONE))) < 1e-15);
        assert!(max_abs(&(&cm * &psi2 - &psi2)) < 1e-15);
        let psi1 = sd.psi(1).unwrap();
        assert!(max_abs(&(&cm * &psi1 + &psi1)) < 1e-15);
        assert!(sd.psi(0).is_err());
        assert!(sd.psi(3).is_err());
        assert_eq!(sd.psi0().ncols(), 0);
    }

    #[test]
    fn eigen_relations() {
        for sizes in [&[2, 1][..], &[2, 1, 1], &[2, 2, 2], &[3, 1, 2, 1], &[2, 3, 2]] {
            let (pair, sd) = sd(sizes);
            let p = sizes.len();
            let (cm, cp) = (pair.c_minus().to_flat(), pair.c_plus().to_flat());
            for b in 1..=p as i64 {
                let psi = sd.psi(b).unwrap();
                assert!(max_abs(&(&cm * &psi - &psi * eps(p, -b))) < 1e-12);
                assert!(max_abs(&(&cp * &psi - &psi * eps(p, b))) < 1e-12);
            }
            let mut pw = linalg::identity(cm.nrows());
            for _ in 0..p {
                pw = &cm * pw;
            }
            assert!(max_abs(&(pw * sd.psi0())) < 1e-11);
        }
    }

    #[test]
    fn spectra() {
        for sizes in [&[1, 1][..], &[2, 1], &[2, 2, 2], &[3, 1, 2, 1, 4, 1]] {
            let (pair, _) = sd(sizes);
            let rep = spectrum_multiplicities(&pair).unwrap();
            assert!(rep.matches(pair.structure()), "{sizes:?}: {rep:?}");
        }
        let (pair, _) = sd(&[2, 1]);
        let rep = spectrum_multiplicities(&pair).unwrap();
        assert_eq!((rep.zero_algebraic, rep.zero_geometric), (1, 1));
        assert_eq!(rep.nonzero, vec![1, 1]);
        // Only c_- matters here, so non-commuting structures are fine too;
        // (2, 2, 1) has a nilpotent Jordan chain of length two.
        for sizes in [&[2, 2, 1][..], &[4, 1, 3, 2, 2]] {
            let bs = BlockStructure::new(sizes.to_vec()).unwrap();
            let rep = spectrum_multiplicities(&crate::blockalg::canonical_pair(&bs)).unwrap();
            assert!(rep.matches(&bs), "{sizes:?}: {rep:?}");
        }
    }

    #[test]
    fn non_chain_pair_rejected() {
        let bs = BlockStructure::new(vec![1, 1]).unwrap();
        let canon = crate::blockalg::canonical_pair(&bs);
        let two = CMat::from_element(1, 1, ONE * 2.0);
        let pair = GradedPair::from_blocks(
            &bs,
            vec![canon.cm(0).clone(), two.clone()],
            vec![canon.cp(0).clone(), canon.cp(1).clone()],
        )
        .unwrap();
        assert!(matches!(
            canonical_theta(&pair),
            Err(Error::SpectralConstruction(_))
        ));
    }
}
