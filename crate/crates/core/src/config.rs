//! JSON problem description: block structure, solitons, grid, verification
//! settings and output location. Complex numbers are `[re, im]` pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::blockalg::{build_canonical_c, BlockStructure, GradedPair};
use crate::dressing::PoleData;
use crate::linalg::{CMat, CVec, C64};
use crate::solitons::{SolitonIndices, SolitonSpec};
use crate::spectral::canonical_theta;
use crate::verify::{Grid, GridAxis, DEFAULT_H_FD, DEFAULT_TOLERANCE};

pub type Complex = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub structure: StructureConfig,
    pub poles: Vec<PoleConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Explicit `C_{-α}`, `C_{+α}` blocks (`α = 0..p-1`, row-major).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_override: Option<PairConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub p: usize,
    pub sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleConfig {
    pub mu: Complex,
    pub nu: Complex,
    #[serde(rename = "I")]
    pub i: i64,
    #[serde(rename = "J")]
    pub j: i64,
    #[serde(rename = "K")]
    pub k: i64,
    #[serde(rename = "c_I")]
    pub c_i: Vec<Complex>,
    #[serde(rename = "d_J")]
    pub d_j: Vec<Complex>,
    #[serde(rename = "d_K")]
    pub d_k: Vec<Complex>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub z_minus: AxisConfig,
    pub z_plus: AxisConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    pub h_fd: f64,
    pub tolerance: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            h_fd: DEFAULT_H_FD,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            prefix: "gamma".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub c_minus: Vec<Vec<Vec<Complex>>>,
    pub c_plus: Vec<Vec<Vec<Complex>>>,
}

/// A configuration problem tied to the field that caused it.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Everything needed to evaluate and verify a configured solution.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: SolitonSpec,
    pub grid: Grid,
    pub h_fd: f64,
    pub tolerance: f64,
    pub output: OutputConfig,
}

fn cx(v: Complex) -> C64 {
    C64::new(v[0], v[1])
}

fn vector(field: &str, v: &[Complex], len: usize) -> Result<CVec, ConfigError> {
    if v.len() != len {
        return Err(ConfigError::new(
            field,
            format!("expected {len} complex entries, got {}", v.len()),
        ));
    }
    Ok(CVec::from_iterator(len, v.iter().map(|&z| cx(z))))
}

fn matrix(field: &str, rows: &[Vec<Complex>], shape: (usize, usize)) -> Result<CMat, ConfigError> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(ConfigError::new(
            field,
            format!("expected a {}x{} matrix", shape.0, shape.1),
        ));
    }
    Ok(CMat::from_fn(shape.0, shape.1, |i, j| cx(rows[i][j])))
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            ConfigError::new(
                format!("line {} column {}", e.line(), e.column()),
                e,
            )
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn build(&self) -> Result<Problem, ConfigError> {
        let s = &self.structure;
        if s.sizes.len() != s.p {
            return Err(ConfigError::new(
                "structure.sizes",
                format!("has {} entries but p = {}", s.sizes.len(), s.p),
            ));
        }
        let bs = BlockStructure::new(s.sizes.clone())
            .map_err(|e| ConfigError::new("structure", e))?;
        let pair = match &self.c_override {
            None => build_canonical_c(&bs).map_err(|e| ConfigError::new("structure", e))?,
            Some(o) => self.override_pair(&bs, o)?,
        };
        let spectral =
            canonical_theta(&pair).map_err(|e| ConfigError::new("c_override", e))?;

        if self.poles.is_empty() {
            return Err(ConfigError::new("poles", "at least one soliton is required"));
        }
        let ns = bs.n_star();
        let mut idx = Vec::new();
        let (mut c, mut dj, mut dk) = (Vec::new(), Vec::new(), Vec::new());
        for (n, pc) in self.poles.iter().enumerate() {
            let f = |name: &str| format!("poles[{n}].{name}");
            for (name, v) in [("I", pc.i), ("J", pc.j), ("K", pc.k)] {
                if !(1..=s.p as i64).contains(&v) {
                    return Err(ConfigError::new(f(name), format!("{v} outside 1..{}", s.p)));
                }
            }
            if pc.j == pc.k {
                return Err(ConfigError::new(f("K"), "must differ from J"));
            }
            idx.push(SolitonIndices {
                i: pc.i,
                j: pc.j,
                k: pc.k,
            });
            c.push(vector(&f("c_I"), &pc.c_i, ns)?);
            dj.push(vector(&f("d_J"), &pc.d_j, ns)?);
            dk.push(vector(&f("d_K"), &pc.d_k, ns)?);
        }
        let poles = PoleData::new(
            s.p,
            self.poles.iter().map(|pc| cx(pc.mu)).collect(),
            self.poles.iter().map(|pc| cx(pc.nu)).collect(),
        )
        .map_err(|e| ConfigError::new("poles", e))?;
        let spec = SolitonSpec::new(pair, spectral, poles, idx, c, dj, dk)
            .map_err(|e| ConfigError::new("poles", e))?;

        let axis = |name: &str, a: &AxisConfig| {
            GridAxis::new(a.min, a.max, a.count).map_err(|e| ConfigError::new(name, e))
        };
        let grid = Grid::new(
            axis("grid.z_minus", &self.grid.z_minus)?,
            axis("grid.z_plus", &self.grid.z_plus)?,
        );
        let v = &self.verification;
        if !(v.h_fd > 0.0 && v.h_fd.is_finite()) {
            return Err(ConfigError::new("verification.h_fd", "must be positive"));
        }
        if !(v.tolerance > 0.0 && v.tolerance.is_finite()) {
            return Err(ConfigError::new("verification.tolerance", "must be positive"));
        }
        if self.output.prefix.is_empty() {
            return Err(ConfigError::new("output.prefix", "must not be empty"));
        }
        Ok(Problem {
            spec,
            grid,
            h_fd: v.h_fd,
            tolerance: v.tolerance,
            output: self.output.clone(),
        })
    }

    fn override_pair(&self, bs: &BlockStructure, o: &PairConfig) -> Result<GradedPair, ConfigError> {
        let p = bs.p() as i64;
        if o.c_minus.len() != bs.p() || o.c_plus.len() != bs.p() {
            return Err(ConfigError::new(
                "c_override",
                format!("needs {p} blocks in c_minus and c_plus"),
            ));
        }
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        for a in 0..p {
            let k = a as usize;
            let (hi, lo) = (bs.size(a + 1), bs.size(a));
            minus.push(matrix(&format!("c_override.c_minus[{k}]"), &o.c_minus[k], (hi, lo))?);
            plus.push(matrix(&format!("c_override.c_plus[{k}]"), &o.c_plus[k], (lo, hi))?);
        }
        let pair = GradedPair::from_blocks(bs, minus, plus)
            .map_err(|e| ConfigError::new("c_override", e))?;
        pair.validate().map_err(|e| ConfigError::new("c_override", e))?;
        Ok(pair)
    }
}
