//! Block-graded matrix algebra: gradation data, the automorphism matrix `h`,
//! and the graded connection pair `c_±`.
//!
//! `c_-` has nonzero blocks `C_{-α}` at block position `(α+1, α)` and `c_+`
//! has `C_{+α}` at `(α, α+1)`, all indices cyclic, so `C_{-0}` sits at
//! `(1, p)` and `C_{+0}` at `(p, 1)`.

use std::f64::consts::PI;

use crate::linalg::{self, CMat, C64, ONE};
use crate::{Error, Result};

/// Sizes `n_1..n_p` of the diagonal blocks of the gradation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least two blocks, got p = {}",
                sizes.len()
            )));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "block size n_{} must be positive",
                pos + 1
            )));
        }
        let offsets = sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        Ok(Self { sizes, offsets })
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `n_* = min_α n_α`.
    pub fn n_star(&self) -> usize {
        *self.sizes.iter().min().expect("p >= 2")
    }

    /// Rank of the canonical `c_-`: `Σ_α min(n_α, n_{α+1})`.
    pub fn rank_k(&self) -> usize {
        let p = self.p();
        (0..p)
            .map(|a| self.sizes[a].min(self.sizes[(a + 1) % p]))
            .sum()
    }

    /// Dimension of the null sector, `n - p·n_*`.
    pub fn null_dim(&self) -> usize {
        self.n() - self.p() * self.n_star()
    }

    /// 0-based storage index of the cyclic 1-based block label `alpha`.
    pub fn index(&self, alpha: i64) -> usize {
        (alpha - 1).rem_euclid(self.p() as i64) as usize
    }

    /// `n_α` for a cyclic 1-based `alpha`.
    pub fn size(&self, alpha: i64) -> usize {
        self.sizes[self.index(alpha)]
    }

    /// Row offset of block `alpha` inside the flat `n × n` matrix.
    pub fn offset(&self, alpha: i64) -> usize {
        self.offsets[self.index(alpha)]
    }

    /// All blocks of size one: the abelian Toda system.
    pub fn is_abelian(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }
}

/// `ε_p^k = exp(2πik/p)`.
pub fn root_of_unity(p: usize, k: i64) -> Result<C64> {
    if p == 0 {
        return Err(Error::InvalidArgument("root of unity of order 0".into()));
    }
    Ok(eps(p, k))
}

pub(crate) fn eps(p: usize, k: i64) -> C64 {
    let k = k.rem_euclid(p as i64);
    match (4 * k).checked_rem(p as i64) {
        // Quarter turns are exact.
        Some(0) => [ONE, C64::new(0.0, 1.0), -ONE, C64::new(0.0, -1.0)][(4 * k / p as i64) as usize],
        _ => C64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64),
    }
}

/// Dense `p × p` grid of blocks; block `(α, β)` is `n_α × n_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    structure: BlockStructure,
    blocks: Vec<CMat>,
}

impl BlockMatrix {
    pub fn zeros(bs: &BlockStructure) -> Self {
        let p = bs.p();
        let blocks = (0..p * p)
            .map(|k| CMat::zeros(bs.sizes[k / p], bs.sizes[k % p]))
            .collect();
        Self {
            structure: bs.clone(),
            blocks,
        }
    }

    pub fn identity(bs: &BlockStructure) -> Self {
        let mut m = Self::zeros(bs);
        for a in 0..bs.p() {
            m.blocks[a * bs.p() + a] = linalg::identity(bs.sizes[a]);
        }
        m
    }

    /// Block-diagonal matrix from `diag[0..p]` (block `α = k + 1`).
    pub fn block_diagonal(bs: &BlockStructure, diag: Vec<CMat>) -> Result<Self> {
        if diag.len() != bs.p() {
            return Err(Error::StructureMismatch(format!(
                "expected {} diagonal blocks, got {}",
                bs.p(),
                diag.len()
            )));
        }
        let mut m = Self::zeros(bs);
        for (a, d) in diag.into_iter().enumerate() {
            m.set_block(a as i64 + 1, a as i64 + 1, d)?;
        }
        Ok(m)
    }

    /// Partition an `n × n` matrix along the block structure.
    pub fn from_flat(bs: &BlockStructure, flat: &CMat) -> Result<Self> {
        let n = bs.n();
        if flat.nrows() != n || flat.ncols() != n {
            return Err(Error::StructureMismatch(format!(
                "flat matrix is {}x{}, structure needs {n}x{n}",
                flat.nrows(),
                flat.ncols()
            )));
        }
        let p = bs.p();
        let blocks = (0..p * p)
            .map(|k| {
                let (a, b) = (k / p, k % p);
                flat.view((bs.offsets[a], bs.offsets[b]), (bs.sizes[a], bs.sizes[b]))
                    .into_owned()
            })
            .collect();
        Ok(Self {
            structure: bs.clone(),
            blocks,
        })
    }

    pub fn to_flat(&self) -> CMat {
        let bs = &self.structure;
        let p = bs.p();
        let mut flat = CMat::zeros(bs.n(), bs.n());
        for (k, blk) in self.blocks.iter().enumerate() {
            let (a, b) = (k / p, k % p);
            flat.view_mut((bs.offsets[a], bs.offsets[b]), (bs.sizes[a], bs.sizes[b]))
                .copy_from(blk);
        }
        flat
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    /// Block `(α, β)`, cyclic 1-based labels.
    pub fn block(&self, alpha: i64, beta: i64) -> &CMat {
        let bs = &self.structure;
        &self.blocks[bs.index(alpha) * bs.p() + bs.index(beta)]
    }

    pub fn set_block(&mut self, alpha: i64, beta: i64, m: CMat) -> Result<()> {
        let bs = &self.structure;
        let (rows, cols) = (bs.size(alpha), bs.size(beta));
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::StructureMismatch(format!(
                "block ({alpha},{beta}) must be {rows}x{cols}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let k = bs.index(alpha) * bs.p() + bs.index(beta);
        self.blocks[k] = m;
        Ok(())
    }

    pub fn mul(&self, other: &BlockMatrix) -> Result<BlockMatrix> {
        self.check_same(other)?;
        BlockMatrix::from_flat(&self.structure, &(self.to_flat() * other.to_flat()))
    }

    fn check_same(&self, other: &BlockMatrix) -> Result<()> {
        if self.structure != other.structure {
            return Err(Error::StructureMismatch(format!(
                "{:?} vs {:?}",
                self.structure.sizes, other.structure.sizes
            )));
        }
        Ok(())
    }
}

/// The diagonal automorphism matrix with blocks `ε_p^{p-α+1} I_{n_α}`.
pub fn build_h(bs: &BlockStructure) -> BlockMatrix {
    h_power(bs, 1)
}

/// `h^k`, blockwise `ε_p^{k(p-α+1)} I_{n_α}`.
pub fn h_power(bs: &BlockStructure, k: i64) -> BlockMatrix {
    let p = bs.p() as i64;
    let diag = (1..=p)
        .map(|a| linalg::identity(bs.size(a)) * eps(bs.p(), k * (p - a + 1)))
        .collect();
    BlockMatrix::block_diagonal(bs, diag).expect("sizes taken from bs")
}

/// `A(x) = h x h⁻¹`.
pub fn apply_automorphism(x: &BlockMatrix, h: &BlockMatrix) -> Result<BlockMatrix> {
    x.check_same(h)?;
    let hf = h.to_flat();
    let h_inv = linalg::guarded_inverse(&hf, "h")
        .map_err(|_| Error::InvalidArgument("h is not invertible".into()))?;
    BlockMatrix::from_flat(x.structure(), &(hf * x.to_flat() * h_inv))
}

/// Constant graded pair `(c_-, c_+)`.
///
/// The block sparsity is enforced on construction. Maximum rank and the
/// commutation relation are checked by [`GradedPair::validate`], since pairs
/// produced by symmetry transformations need not commute.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedPair {
    c_minus: BlockMatrix,
    c_plus: BlockMatrix,
}

impl GradedPair {
    /// `minus[a] = C_{-a}` (`n_{a+1} × n_a`) and `plus[a] = C_{+a}`
    /// (`n_a × n_{a+1}`) for `a = 0..p-1`.
    pub fn from_blocks(bs: &BlockStructure, minus: Vec<CMat>, plus: Vec<CMat>) -> Result<Self> {
        let p = bs.p();
        if minus.len() != p || plus.len() != p {
            return Err(Error::StructureMismatch(format!(
                "need {p} blocks C_-α and C_+α, got {} and {}",
                minus.len(),
                plus.len()
            )));
        }
        let mut c_minus = BlockMatrix::zeros(bs);
        let mut c_plus = BlockMatrix::zeros(bs);
        for (a, (m, q)) in minus.into_iter().zip(plus).enumerate() {
            let a = a as i64;
            c_minus.set_block(a + 1, a, m)?;
            c_plus.set_block(a, a + 1, q)?;
        }
        Ok(Self { c_minus, c_plus })
    }

    pub fn structure(&self) -> &BlockStructure {
        self.c_minus.structure()
    }

    pub fn c_minus(&self) -> &BlockMatrix {
        &self.c_minus
    }

    pub fn c_plus(&self) -> &BlockMatrix {
        &self.c_plus
    }

    /// `C_{-α}`, cyclic in `alpha`.
    pub fn cm(&self, alpha: i64) -> &CMat {
        self.c_minus.block(alpha + 1, alpha)
    }

    /// `C_{+α}`, cyclic in `alpha`.
    pub fn cp(&self, alpha: i64) -> &CMat {
        self.c_plus.block(alpha, alpha + 1)
    }

    /// `‖C_{-(α-1)} C_{+(α-1)} - C_{+α} C_{-α}‖_F` for `α = 1..p`.
    pub fn commutator_residuals(&self) -> Vec<f64> {
        let p = self.structure().p() as i64;
        (1..=p)
            .map(|a| {
                let d = self.cm(a - 1) * self.cp(a - 1) - self.cp(a) * self.cm(a);
                linalg::frobenius(&d)
            })
            .collect()
    }

    pub fn commutator_check(&self) -> f64 {
        self.commutator_residuals().into_iter().fold(0.0, f64::max)
    }

    /// Checks maximum rank of every `C_{±α}` and commutativity of `c_±`.
    pub fn validate(&self) -> Result<()> {
        let bs = self.structure();
        let p = bs.p() as i64;
        let mut scale: f64 = 1.0;
        for a in 0..p {
            let expected = bs.size(a).min(bs.size(a + 1));
            for (sign, m) in [('-', self.cm(a)), ('+', self.cp(a))] {
                let rank = linalg::numerical_rank(m, 1e-10);
                if rank != expected {
                    return Err(Error::RankDeficient {
                        sign,
                        alpha: a as usize,
                        rank,
                        expected,
                    });
                }
                scale = scale.max(linalg::max_abs(m).powi(2));
            }
        }
        let tol = COMMUTATOR_TOL * scale;
        for (k, r) in self.commutator_residuals().into_iter().enumerate() {
            if r > tol {
                return Err(Error::CommutatorViolation {
                    alpha: k + 1,
                    residual: r,
                });
            }
        }
        Ok(())
    }

    /// Whether the blocks are exactly the canonical rectangular identities.
    pub fn is_canonical(&self) -> bool {
        *self == canonical_pair(self.structure())
    }
}

/// Absolute commutator tolerance for unit-scale blocks.
pub const COMMUTATOR_TOL: f64 = 1e-12;

/// Canonical blocks `C_{-α} = (I; 0)` or `(I 0)` and `C_{+α} = ᵗC_{-α}`,
/// without checking that the resulting pair commutes.
pub fn canonical_pair(bs: &BlockStructure) -> GradedPair {
    let p = bs.p() as i64;
    let minus = (0..p)
        .map(|a| linalg::rect_identity(bs.size(a + 1), bs.size(a)))
        .collect();
    let plus = (0..p)
        .map(|a| linalg::rect_identity(bs.size(a), bs.size(a + 1)))
        .collect();
    GradedPair::from_blocks(bs, minus, plus).expect("shapes follow bs")
}

/// Canonical maximum-rank pair. Fails with [`Error::CommutatorViolation`]
/// when `min(n_{α-1}, n_α) ≠ min(n_α, n_{α+1})` for some `α`, since then no
/// commuting maximum-rank pair exists for these block sizes.
pub fn build_canonical_c(bs: &BlockStructure) -> Result<GradedPair> {
    let pair = canonical_pair(bs);
    pair.validate()?;
    Ok(pair)
}
