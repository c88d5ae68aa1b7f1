//! Exact multi-soliton solutions of non-abelian loop Toda equations for the
//! untwisted loop groups of `GL_n`, built by rational dressing, together with
//! an independent numerical certification layer.
//!
//! Block indices follow the usual 1-based convention `α = 1..p` in the public
//! API and are cyclic: any integer `α` is reduced modulo `p`, so `α = 0` and
//! `α = p` name the same block. Internally blocks are stored 0-based.
//!
//! The crate is organised bottom-up:
//!
//! * [`blockalg`]: block structure, graded connection pair `c_±`, automorphism `h`.
//! * [`spectral`]: eigenvectors `Ψ_β` of `c_±` and the null-sector basis.
//! * [`dressing`]: the general rational dressing construction of `Γ_α`.
//! * [`solitons`]: closed-form one- and multi-soliton solutions (τ-pairs).
//! * [`verify`]: finite-difference PDE residuals and other certificates.
//! * [`config`]: the JSON problem description shared with the CLI.

pub mod blockalg;
pub mod config;
pub mod dressing;
mod error;
pub mod linalg;
pub mod solitons;
pub mod spectral;
pub mod verify;

pub use blockalg::{BlockMatrix, BlockStructure, GradedPair};
pub use dressing::{DressingProblem, InitialData, PoleData};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use solitons::{SolitonSolution, SolitonSpec};
pub use spectral::SpectralData;
pub use verify::{GammaField, Grid, GridAxis, ResidualReport, ZPoint};
