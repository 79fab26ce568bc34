use std::sync::Arc;

use super::block::{build_reduced_system, EmbeddingMatrix, ReducedSolver};
use super::stokes::FlowState;
use crate::assembly::{assemble_convection, assemble_sip, SipParameters};
use crate::error::{Error, Result};
use crate::fespace::FeSpace;
use crate::hodge::{HarmonicBasis, HodgeContext};
use crate::linalg::SparseMatrix;

/// Largest `|u|` over the corners and centroids of all triangles.
pub fn max_speed(v: &FeSpace, u: &[f64]) -> f64 {
    let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0 / 3.0, 1.0 / 3.0)];
    let mut m: f64 = 0.0;
    for t in 0..v.mesh().n_triangles() {
        for &(x, y) in &pts {
            let val: crate::mesh::Vec3 = v
                .local_dofs(t)
                .iter()
                .zip(v.eval_vector(t, x, y))
                .filter_map(|(d, b)| d.global.map(|i| u[i] * b.value))
                .sum();
            m = m.max(val.norm());
        }
    }
    m
}

/// IMEX Euler stepper: viscosity implicit, convection explicit,
/// `(M/Δt + A)_red x^{n+1} = (M u^n/Δt − C(u^n)u^n + f)_red`.
pub struct NavierStokes {
    ctx: Arc<HodgeContext>,
    embedding: EmbeddingMatrix,
    dt: f64,
    mass_dt: SparseMatrix,
    solver: ReducedSolver,
    cfl_warnings: usize,
}

impl NavierStokes {
    /// `params.mu = 0` drops the viscous operator (Euler equations).
    pub fn new(ctx: Arc<HodgeContext>, basis: &HarmonicBasis, params: SipParameters, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::NonpositiveParameter("dt"));
        }
        if !(params.mu >= 0.0) {
            return Err(Error::NonpositiveParameter("mu"));
        }
        let embedding = EmbeddingMatrix::new(&ctx, basis)?;
        let mass_dt = ctx.mass().scale(1.0 / dt).mark_symmetric();
        let op = if params.mu > 0.0 {
            mass_dt.add_scaled(&assemble_sip(ctx.velocity_space(), params)?, 1.0).mark_symmetric()
        } else {
            mass_dt.clone()
        };
        let zero = vec![0.0; embedding.n_velocity()];
        let sys = build_reduced_system(&op, &zero, &embedding)?;
        let solver = ReducedSolver::new(&sys, &embedding, || build_reduced_system(ctx.mass(), &zero, &embedding))?;
        Ok(NavierStokes { ctx, embedding, dt, mass_dt, solver, cfl_warnings: 0 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        &self.embedding
    }

    /// Steps taken with `Δt > 0.5·h_min/‖u‖∞`.
    pub fn cfl_warnings(&self) -> usize {
        self.cfl_warnings
    }

    /// Advances `state` by `Δt` under the load `f` (moments against the BDM
    /// basis, evaluated at the new time level).
    pub fn step(&mut self, state: &FlowState, load: &[f64]) -> Result<FlowState> {
        let v = self.ctx.velocity_space();
        let u = state.u.coefficients();
        let speed = max_speed(v, u);
        let h = self.ctx.mesh().h_min();
        if speed * self.dt > 0.5 * h {
            self.cfl_warnings += 1;
            log::warn!("step {}: dt = {:e} exceeds the convective limit {:e}", state.step + 1, self.dt, 0.5 * h / speed);
        }
        let mut rhs = self.mass_dt.mul_vec(u);
        if speed > 0.0 {
            let c = assemble_convection(v, u)?;
            let cu = c.mul_vec(u);
            rhs.iter_mut().zip(&cu).for_each(|(r, c)| *r -= c);
        }
        rhs.iter_mut().zip(load).for_each(|(r, f)| *r += f);
        let (b_s, b_h) = self.embedding.apply_transpose(&rhs);
        let (psi, hc) = self.solver.solve(&b_s, &b_h)?;
        let step = state.step + 1;
        if psi.iter().chain(&hc).any(|x| !x.is_finite()) {
            return Err(Error::NanDetected(step));
        }
        let next = FlowState::new(&self.ctx, &self.embedding, psi, hc, state.t + self.dt, step);
        match next {
            Ok(s) if s.kinetic_energy.is_finite() => Ok(s),
            _ => Err(Error::NanDetected(step)),
        }
    }
}

pub fn step_navier_stokes(stepper: &mut NavierStokes, state: &FlowState, load: &[f64]) -> Result<FlowState> {
    stepper.step(state, load)
}
