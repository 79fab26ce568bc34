//! Randomized construction of an `L²`-orthonormal basis of discrete
//! harmonic fields, and its JSON container.
//!
//! Container layout (one JSON object):
//!
//! ```text
//! {
//!   "format": "surfhodge-harmonic-basis",
//!   "version": 1,
//!   "k": 1, "seed": 42, "tol": 1e-8, "b1": 2,
//!   "n_dofs": 1234,
//!   "mesh_checksum": "<sha256 hex of the mesh>",
//!   "attempts": 2,
//!   "vectors": [[...], [...]]
//! }
//! ```
//!
//! `vectors` holds `b1` BDM coefficient vectors of length `n_dofs` in the
//! numbering of `BDM^k_0` on the identified mesh.

use std::path::Path;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::HodgeContext;
use crate::error::{Error, Result};
use crate::linalg::{gram_matrix, norm, orthogonalize, SparseMatrix};
use crate::mesh::SurfaceMesh;

/// Drop tolerance for candidates, relative to the unit-norm random sample.
pub const DEFAULT_TOL: f64 = 1e-8;

const FORMAT: &str = "surfhodge-harmonic-basis";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBasis {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub b1: usize,
    pub n_dofs: usize,
    pub mesh_checksum: String,
    /// Random samples drawn, including discarded ones.
    #[serde(default)]
    pub attempts: usize,
    pub vectors: Vec<Vec<f64>>,
}

/// Invariant defects of a harmonic basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    /// `max |Gram − I|`.
    pub gram_defect: f64,
    /// `max_i ‖EᵀM hᵢ‖`.
    pub rot_defect: f64,
    /// `max_i ‖B hᵢ‖`.
    pub div_defect: f64,
}

/// Randomized harmonic basis on a freshly built context.
pub fn harmonic_basis(mesh: &Arc<SurfaceMesh>, k: usize, seed: u64, tol: f64) -> Result<HarmonicBasis> {
    HodgeContext::new(mesh, k)?.harmonic_basis(seed, tol)
}

impl HodgeContext {
    /// Draws standard normal BDM coefficients, projects onto `J^k_BDM`,
    /// removes the streamfunction part and keeps what survives
    /// orthogonalization against the accepted fields, until `b₁` fields
    /// are found or `20·b₁ + 20` samples are spent.
    pub fn harmonic_basis(&self, seed: u64, tol: f64) -> Result<HarmonicBasis> {
        if !(tol > 0.0) {
            return Err(Error::NonpositiveParameter("tol"));
        }
        let b1 = self.b1();
        let n = self.velocity_space().total_dofs();
        let max_attempts = 20 * b1 + 20;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(b1);
        let mut attempts = 0;
        while accepted.len() < b1 {
            if attempts == max_attempts {
                return Err(Error::MaxAttemptsExceeded { attempts, accepted: accepted.len(), wanted: b1 });
            }
            attempts += 1;
            let mut r: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let rn = self.norm(&r);
            r.iter_mut().for_each(|x| *x /= rn);
            let (w, wn) = self.harmonic_candidate(&r, &accepted)?;
            if wn < tol {
                log::debug!("harmonic candidate {attempts} discarded (norm {wn:e})");
                continue;
            }
            // The survivor can be much shorter than the sample, which scales
            // up the solver error; one more pass on the normalized field
            // brings it back to rounding level.
            let w: Vec<f64> = w.iter().map(|x| x / wn).collect();
            let (mut w, wn) = self.harmonic_candidate(&w, &accepted)?;
            w.iter_mut().for_each(|x| *x /= wn);
            accepted.push(w);
        }
        Ok(HarmonicBasis {
            format: FORMAT.into(),
            version: VERSION,
            k: self.k(),
            seed,
            tol,
            b1,
            n_dofs: n,
            mesh_checksum: self.mesh().checksum(),
            attempts,
            vectors: accepted,
        })
    }

    /// `Π_J r − rot ψ`, orthogonalized against `accepted`, and its norm.
    fn harmonic_candidate(&self, r: &[f64], accepted: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
        let (u, _) = self.project_load(&self.mass().mul_vec(r))?;
        let psi = self.stream_function(&u)?;
        let rot = self.rot().mul_vec(&psi);
        let w: Vec<f64> = u.iter().zip(&rot).map(|(a, b)| a - b).collect();
        Ok(orthogonalize(&w, accepted, self.mass()))
    }

    pub fn basis_report(&self, basis: &HarmonicBasis) -> BasisReport {
        let g = gram_matrix(&basis.vectors, self.mass());
        let n = basis.vectors.len();
        let gram_defect = (g - nalgebra::DMatrix::identity(n, n)).amax();
        let mut rot_defect: f64 = 0.0;
        let mut div_defect: f64 = 0.0;
        for h in &basis.vectors {
            rot_defect = rot_defect.max(norm(&self.rot().tr_mul_vec(&self.mass().mul_vec(h))));
            div_defect = div_defect.max(norm(&self.div().mul_vec(h)));
        }
        BasisReport { gram_defect, rot_defect, div_defect }
    }
}

impl HarmonicBasis {
    /// Empty basis for surfaces with `b₁ = 0`, matching `ctx`.
    pub fn empty(ctx: &HodgeContext) -> Self {
        HarmonicBasis {
            format: FORMAT.into(),
            version: VERSION,
            k: ctx.k(),
            seed: 0,
            tol: DEFAULT_TOL,
            b1: 0,
            n_dofs: ctx.velocity_space().total_dofs(),
            mesh_checksum: ctx.mesh().checksum(),
            attempts: 0,
            vectors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Verifies that the basis was built for the context's mesh and degree.
    pub fn check(&self, ctx: &HodgeContext) -> Result<()> {
        let n = ctx.velocity_space().total_dofs();
        if self.k != ctx.k() {
            return Err(Error::BasisMismatch(format!("basis has degree {}, space has {}", self.k, ctx.k())));
        }
        if self.n_dofs != n || self.vectors.iter().any(|v| v.len() != n) {
            return Err(Error::BasisMismatch(format!("basis vectors do not have {n} coefficients")));
        }
        if self.b1 != ctx.b1() || self.vectors.len() != self.b1 {
            return Err(Error::BasisMismatch(format!("basis has {} fields, b1 = {}", self.vectors.len(), ctx.b1())));
        }
        if self.mesh_checksum != ctx.mesh().checksum() {
            return Err(Error::BasisMismatch("basis was computed on a different mesh".into()));
        }
        Ok(())
    }

    /// Coefficient matrix with the basis vectors as columns.
    pub fn as_columns(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n_dofs, self.vectors.len(), |i, j| self.vectors[j][i])
    }

    /// `M`-orthogonal projector onto the span, `H Hᵀ M`, applied to `x`.
    pub fn project(&self, m: &SparseMatrix, x: &[f64]) -> Vec<f64> {
        let mx = m.mul_vec(x);
        let mut out = vec![0.0; x.len()];
        for h in &self.vectors {
            crate::linalg::axpy(&mut out, crate::linalg::dot(h, &mx), h);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and validates a container. Structural checks only; use
    /// [`check`](Self::check) against a context before use.
    pub fn from_json(text: &str) -> Result<Self> {
        let b: HarmonicBasis = serde_json::from_str(text)?;
        if b.format != FORMAT {
            return Err(Error::BasisMismatch(format!("unknown container format '{}'", b.format)));
        }
        if b.version != VERSION {
            return Err(Error::BasisMismatch(format!("unsupported container version {}", b.version)));
        }
        if !(b.tol > 0.0) {
            return Err(Error::BasisMismatch("tolerance must be positive".into()));
        }
        if b.vectors.len() != b.b1 {
            return Err(Error::BasisMismatch(format!("{} vectors for b1 = {}", b.vectors.len(), b.b1)));
        }
        if b.vectors.iter().any(|v| v.len() != b.n_dofs) {
            return Err(Error::BasisMismatch(format!("vectors must have {} entries", b.n_dofs)));
        }
        if b.vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::BasisMismatch("non-finite coefficient".into()));
        }
        Ok(b)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
