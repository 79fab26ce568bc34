use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use super::block::EmbeddingMatrix;
use super::navier_stokes::NavierStokes;
use super::stokes::{FlowState, StokesSolver};
use crate::assembly::{assemble_load, divergence_norm};
use crate::config::{Forcing, InitialCondition, SimulationConfig};
use crate::error::{Error, Result};
use crate::hodge::{HarmonicBasis, HodgeContext};
use crate::mesh::SurfaceMesh;
use crate::output::{cell_vectors, vertex_values, write_series, write_vtk_file, VtkData};

pub use crate::output::SeriesRow;

#[derive(Debug)]
pub struct SimulationOutput {
    pub series: Vec<SeriesRow>,
    /// Written files in creation order (empty without an output directory).
    pub files: Vec<PathBuf>,
    pub final_state: FlowState,
    pub basis: HarmonicBasis,
    pub cfl_warnings: usize,
    /// Largest `‖div u‖/‖u‖` over all steps.
    pub max_relative_divergence: f64,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
}

struct Loads {
    forcing: Forcing,
    cached: Option<Vec<f64>>,
    zero: Vec<f64>,
}

impl Loads {
    fn new(ctx: &HodgeContext, forcing: Forcing) -> Result<Self> {
        let zero = vec![0.0; ctx.velocity_space().total_dofs()];
        let cached = if forcing.is_zero() || forcing.uses_time() { None } else { Some(assemble_load(ctx.velocity_space(), |x| forcing.eval(x, f64::NEG_INFINITY))?) };
        Ok(Loads { forcing, cached, zero })
    }

    fn at(&self, ctx: &HodgeContext, t: f64) -> Result<std::borrow::Cow<'_, [f64]>> {
        if self.forcing.is_off(t) {
            return Ok(self.zero.as_slice().into());
        }
        match &self.cached {
            Some(c) => Ok(c.as_slice().into()),
            None => Ok(assemble_load(ctx.velocity_space(), |x| self.forcing.eval(x, t))?.into()),
        }
    }
}

fn row(ctx: &HodgeContext, s: &FlowState) -> SeriesRow {
    let (rot_norm, harmonic_norm) = s.part_norms(ctx);
    let (divergence_norm, _) = divergence_norm(ctx.velocity_space(), s.u.coefficients());
    SeriesRow { t: s.t, kinetic_energy: s.kinetic_energy, harmonic_norm, rot_norm, divergence_norm, h_coeffs: s.h_coeffs.clone() }
}

/// Writes `ψ` at the vertices and `u`, `rot ψ`, `Σ hᵢ𝐡ᵢ` at the centroids.
pub fn write_state_vtk(ctx: &HodgeContext, t: &EmbeddingMatrix, s: &FlowState, path: &Path) -> Result<()> {
    let v = ctx.velocity_space();
    let zero_h = vec![0.0; t.n_harmonic()];
    let zero_psi = vec![0.0; t.n_stream()];
    let rot = t.apply(s.psi.coefficients(), &zero_h);
    let harm = t.apply(&zero_psi, &s.h_coeffs);
    let title = format!("surfhodge step {} t = {:e}", s.step, s.t);
    let data = VtkData {
        title: &title,
        point_scalars: vec![("psi", vertex_values(&s.psi))],
        cell_vectors: vec![("u", cell_vectors(v, s.u.coefficients())?), ("u_rot", cell_vectors(v, &rot)?), ("u_harm", cell_vectors(v, &harm)?)],
    };
    write_vtk_file(path, ctx.mesh(), &data)
}

/// Runs the IMEX Navier–Stokes driver from `config` on `mesh`.
///
/// Snapshots `step_NNNNNN.vtk` are written at step 0, every `output_every`
/// steps and at the last step, plus `series.csv` with one row per step.
pub fn run_simulation(config: &SimulationConfig, mesh: Arc<SurfaceMesh>, out_dir: Option<&Path>) -> Result<SimulationOutput> {
    config.validate()?;
    let mut timings = Vec::new();
    let clock = Instant::now();
    let ctx = Arc::new(HodgeContext::new(&mesh, config.k)?);
    let basis = match &config.basis {
        Some(p) => {
            let b = HarmonicBasis::read(p)?;
            b.check(&ctx)?;
            b
        }
        None => ctx.harmonic_basis(config.seed, config.tol)?,
    };
    timings.push(("setup".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let forcing = config.forcing()?;
    let loads = Loads::new(&ctx, forcing)?;
    let params = config.sip_parameters();
    let mut stepper = NavierStokes::new(ctx.clone(), &basis, params, config.dt)?;
    let mut state = match config.initial {
        InitialCondition::Zero => FlowState::zero(&ctx, stepper.embedding())?,
        InitialCondition::Stokes => {
            if config.mu == 0.0 {
                return Err(Error::Config("initial = \"stokes\" requires mu > 0".into()));
            }
            StokesSolver::new(ctx.clone(), &basis, params)?.solve(&loads.at(&ctx, 0.0)?)?
        }
    };
    timings.push(("initial".to_string(), clock.elapsed().as_secs_f64()));

    if let Some(d) = out_dir {
        std::fs::create_dir_all(d)?;
    }
    let clock = Instant::now();
    let n_steps = config.n_steps();
    let mut series = vec![row(&ctx, &state)];
    let mut files = Vec::new();
    let mut max_div: f64 = 0.0;
    let mut record = |s: &FlowState, r: &SeriesRow, files: &mut Vec<PathBuf>, stepper: &NavierStokes| -> Result<()> {
        let norm = (2.0 * s.kinetic_energy).sqrt();
        if norm > 0.0 {
            max_div = max_div.max(r.divergence_norm / norm);
        }
        if let Some(d) = out_dir {
            if s.step.is_multiple_of(config.output_every) || s.step == n_steps {
                let p = d.join(format!("step_{:06}.vtk", s.step));
                write_state_vtk(&ctx, stepper.embedding(), s, &p)?;
                files.push(p);
            }
        }
        Ok(())
    };
    record(&state, &series[0], &mut files, &stepper)?;
    for _ in 0..n_steps {
        let t_next = state.t + config.dt;
        let load = loads.at(&ctx, t_next)?;
        state = stepper.step(&state, &load)?;
        let r = row(&ctx, &state);
        record(&state, &r, &mut files, &stepper)?;
        series.push(r);
    }
    timings.push(("time-stepping".to_string(), clock.elapsed().as_secs_f64()));

    if let Some(d) = out_dir {
        let p = d.join("series.csv");
        write_series(std::fs::File::create(&p)?, &series, basis.len())?;
        files.push(p);
    }
    if max_div > 1e-10 {
        log::warn!("relative divergence {max_div:e} exceeds 1e-10");
    }
    Ok(SimulationOutput {
        series,
        files,
        final_state: state,
        basis,
        cfl_warnings: stepper.cfl_warnings(),
        max_relative_divergence: max_div,
        timings,
    })
}
