use std::sync::Arc;

use super::block::{build_reduced_system, BlockSystem, EmbeddingMatrix, ReducedSolver};
use crate::assembly::{assemble_sip, SipParameters};
use crate::error::{Error, Result};
use crate::fespace::FeField;
use crate::hodge::{HarmonicBasis, HodgeContext};
use crate::linalg::{factorize, m_inner, FactorKind, SparseMatrix};

/// Velocity in streamfunction–harmonic form at time `t`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub step: usize,
    pub psi: FeField,
    pub h_coeffs: Vec<f64>,
    /// BDM coefficients of `rot ψ + Σ hᵢ 𝐡ᵢ`.
    pub u: FeField,
    /// `½‖u‖²_{L²}`.
    pub kinetic_energy: f64,
}

impl FlowState {
    pub fn new(ctx: &HodgeContext, t: &EmbeddingMatrix, psi: Vec<f64>, h_coeffs: Vec<f64>, time: f64, step: usize) -> Result<Self> {
        let u = t.apply(&psi, &h_coeffs);
        let kinetic_energy = 0.5 * m_inner(ctx.mass(), &u, &u);
        Ok(FlowState {
            t: time,
            step,
            psi: FeField::new(ctx.stream_space().clone(), psi)?,
            h_coeffs,
            u: FeField::new(ctx.velocity_space().clone(), u)?,
            kinetic_energy,
        })
    }

    pub fn zero(ctx: &HodgeContext, t: &EmbeddingMatrix) -> Result<Self> {
        FlowState::new(ctx, t, vec![0.0; t.n_stream()], vec![0.0; t.n_harmonic()], 0.0, 0)
    }

    /// `‖rot ψ‖_{L²}` and `‖Σ hᵢ 𝐡ᵢ‖_{L²}`; the harmonic basis is
    /// orthonormal so the latter is `|h|`.
    pub fn part_norms(&self, ctx: &HodgeContext) -> (f64, f64) {
        let r = ctx.rot().mul_vec(self.psi.coefficients());
        (ctx.norm(&r), self.h_coeffs.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

/// Reduced Stokes solver `TᵀAT x = Tᵀf` for the SIP operator, reusable for
/// many loads.
pub struct StokesSolver {
    ctx: Arc<HodgeContext>,
    embedding: EmbeddingMatrix,
    sip: SparseMatrix,
    solver: ReducedSolver,
}

impl StokesSolver {
    pub fn new(ctx: Arc<HodgeContext>, basis: &HarmonicBasis, params: SipParameters) -> Result<Self> {
        let embedding = EmbeddingMatrix::new(&ctx, basis)?;
        let sip = assemble_sip(ctx.velocity_space(), params)?;
        let zero = vec![0.0; embedding.n_velocity()];
        let sys = build_reduced_system(&sip, &zero, &embedding)?;
        let solver = ReducedSolver::new(&sys, &embedding, || build_reduced_system(ctx.mass(), &zero, &embedding))?;
        Ok(StokesSolver { ctx, embedding, sip, solver })
    }

    pub fn solve(&self, load: &[f64]) -> Result<FlowState> {
        if load.len() != self.embedding.n_velocity() {
            return Err(Error::DimensionMismatch(format!("load of length {} for {} dofs", load.len(), self.embedding.n_velocity())));
        }
        let (b_s, b_h) = self.embedding.apply_transpose(load);
        let (psi, h) = self.solver.solve(&b_s, &b_h)?;
        FlowState::new(&self.ctx, &self.embedding, psi, h, 0.0, 0)
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        &self.embedding
    }

    pub fn sip(&self) -> &SparseMatrix {
        &self.sip
    }

    pub fn context(&self) -> &Arc<HodgeContext> {
        &self.ctx
    }

    /// `true` if a kernel of velocity fields had to be constrained.
    pub fn is_gauged(&self) -> bool {
        self.solver.is_gauged()
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        self.solver.kernel()
    }

    /// Block system for `load` (for inspection and the monolithic oracle).
    pub fn block_system(&self, load: &[f64]) -> Result<BlockSystem> {
        build_reduced_system(&self.sip, load, &self.embedding)
    }
}

/// One-shot reduced Stokes solve.
pub fn solve_stokes_reduced(ctx: Arc<HodgeContext>, basis: &HarmonicBasis, params: SipParameters, load: &[f64]) -> Result<FlowState> {
    StokesSolver::new(ctx, basis, params)?.solve(load)
}

/// Velocity–pressure oracle on `BDM^k_0 × P^{k−1}` with zero-mean pressure.
pub fn solve_stokes_saddle(ctx: &HodgeContext, params: SipParameters, load: &[f64]) -> Result<(FeField, FeField)> {
    let sip = assemble_sip(ctx.velocity_space(), params)?;
    let n = ctx.velocity_space().total_dofs();
    let m = ctx.pressure_space().total_dofs();
    if load.len() != n {
        return Err(Error::DimensionMismatch(format!("load of length {} for {n} dofs", load.len())));
    }
    let s = SparseMatrix::saddle_point(&sip, ctx.div(), Some(ctx.pressure_mean()))?;
    let op = factorize(&s, FactorKind::SymmetricIndefinite)?;
    let mut rhs = vec![0.0; n + m + 1];
    rhs[..n].copy_from_slice(load);
    let x = op.solve(&rhs)?;
    Ok((
        FeField::new(ctx.velocity_space().clone(), x[..n].to_vec())?,
        FeField::new(ctx.pressure_space().clone(), x[n..n + m].to_vec())?,
    ))
}

/// Zero-mean `p` with `(div v, p) = f(v) − a(u, v)` on the complement of
/// `J^k_BDM`, from the mixed projection of the residual functional.
pub fn reconstruct_pressure(ctx: &HodgeContext, a: &SparseMatrix, state: &FlowState, load: &[f64]) -> Result<FeField> {
    let au = a.mul_vec(state.u.coefficients());
    let residual: Vec<f64> = load.iter().zip(&au).map(|(f, a)| f - a).collect();
    let (_, lambda) = ctx.project_load(&residual)?;
    FeField::new(ctx.pressure_space().clone(), lambda)
}
