use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use surfhodge::assembly::{assemble_load, assemble_mass, assemble_scalar_load, divergence_norm};
use surfhodge::config::{Expr, SimulationConfig};
use surfhodge::fespace::{interpolate_bdm, FeField};
use surfhodge::flow::{run_simulation, solve_stokes_saddle, write_state_vtk, StokesSolver};
use surfhodge::hodge::{decompose as hodge_decompose, verify_dimension, HarmonicBasis, HodgeContext};
use surfhodge::linalg::{factorize, FactorKind};
use surfhodge::mesh::{analyze_topology, load_mesh, SurfaceMesh, Vec3};
use surfhodge::output::{cell_vectors, vertex_values, write_vtk_file, VtkData};
use surfhodge::{Error, Result};

use crate::manifest::RunManifest;
use crate::{exit_code, Common};

/// Tolerances of the `verify` invariant suite.
const BASIS_DEFECT_TOL: f64 = 1e-9;
const PYTHAGORAS_TOL: f64 = 1e-10;

fn settings(common: &Common) -> Result<SimulationConfig> {
    let mut cfg = match &common.config {
        Some(p) => SimulationConfig::load(p)?,
        None => SimulationConfig::new(0.01, 1.0),
    };
    if let Some(m) = &common.mesh {
        cfg.mesh = Some(m.clone());
    }
    if let Some(k) = common.k {
        cfg.k = k;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn mesh_path(cfg: &SimulationConfig) -> Result<&Path> {
    cfg.mesh.as_deref().ok_or_else(|| Error::Config("no mesh given (use --mesh or `mesh` in the config)".into()))
}

fn out_dir(common: &Common) -> Result<Option<&Path>> {
    if let Some(d) = &common.out_dir {
        std::fs::create_dir_all(d)?;
    }
    Ok(common.out_dir.as_deref())
}

fn start(command: &str, cfg: &SimulationConfig) -> Result<(RunManifest, Arc<SurfaceMesh>)> {
    let mut man = RunManifest::new(command, cfg.seed);
    man.config = serde_json::to_value(cfg)?;
    man.phase("load mesh");
    let path = mesh_path(cfg)?;
    let mesh = load_mesh(path, None)?;
    man.mesh(path, &mesh);
    Ok((man, Arc::new(mesh)))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn topology_json(path: &Path, mesh: &SurfaceMesh) -> Result<Value> {
    let mut v = serde_json::to_value(analyze_topology(mesh))?;
    let obj = v.as_object_mut().expect("summary is an object");
    obj.insert("mesh".into(), json!(path));
    obj.insert("checksum".into(), json!(mesh.checksum()));
    obj.insert("flipped_triangles".into(), json!(mesh.flipped_triangles()));
    Ok(v)
}

pub fn topology(common: &Common) -> Result<u8> {
    let cfg = settings(common)?;
    let (mut man, mesh) = start("topology", &cfg)?;
    let report = pretty(&topology_json(mesh_path(&cfg)?, &mesh)?);
    print!("{report}");
    let dir = out_dir(common)?;
    if let Some(d) = dir {
        man.write(d, "topology.json", &report)?;
    }
    man.finish(dir)?;
    Ok(0)
}

fn basis_for(ctx: &HodgeContext, cfg: &SimulationConfig, stored: Option<&Path>) -> Result<HarmonicBasis> {
    match stored.or(cfg.basis.as_deref()) {
        Some(p) => {
            let b = HarmonicBasis::read(p)?;
            b.check(ctx)?;
            Ok(b)
        }
        None => ctx.harmonic_basis(cfg.seed, cfg.tol),
    }
}

pub fn harmonic(common: &Common) -> Result<u8> {
    let cfg = settings(common)?;
    let (mut man, mesh) = start("harmonic", &cfg)?;
    man.phase("assemble");
    let ctx = HodgeContext::new(&mesh, cfg.k)?;
    man.phase("harmonic basis");
    let basis = ctx.harmonic_basis(cfg.seed, cfg.tol)?;
    let r = ctx.basis_report(&basis);
    let report = pretty(&json!({
        "b1": basis.b1,
        "k": basis.k,
        "seed": basis.seed,
        "tol": basis.tol,
        "n_dofs": basis.n_dofs,
        "attempts": basis.attempts,
        "gram_defect": r.gram_defect,
        "rot_defect": r.rot_defect,
        "div_defect": r.div_defect,
    }));
    print!("{report}");
    let dir = out_dir(common)?;
    if let Some(d) = dir {
        let p = d.join("basis.json");
        basis.write(&p)?;
        man.output(&p)?;
        man.write(d, "harmonic_report.json", &report)?;
    }
    man.finish(dir)?;
    Ok(0)
}

fn random_field(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn expression_field(ctx: &HodgeContext, spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(';').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("--field needs `random` or three expressions separated by ';', got {}", parts.len())));
    }
    let e = [Expr::parse(parts[0])?, Expr::parse(parts[1])?, Expr::parse(parts[2])?];
    interpolate_bdm(ctx.velocity_space(), |x| Vec3::new(e[0].eval(x.x, x.y, x.z, 0.0), e[1].eval(x.x, x.y, x.z, 0.0), e[2].eval(x.x, x.y, x.z, 0.0)))
}

/// `rot Π ψ` with `Π` the `L²` projection onto the stream function space.
fn rot_of_expression(ctx: &HodgeContext, src: &str) -> Result<Vec<f64>> {
    let e = Expr::parse(src)?;
    let space = ctx.stream_space();
    let rhs = assemble_scalar_load(space, |x| e.eval(x.x, x.y, x.z, 0.0))?;
    let psi = factorize(&assemble_mass(space)?, FactorKind::Spd)?.solve(&rhs)?;
    Ok(ctx.rot().mul_vec(&psi))
}

pub fn decompose(common: &Common, field: Option<&str>, psi: Option<&str>, basis: Option<&Path>) -> Result<u8> {
    let cfg = settings(common)?;
    let (mut man, mesh) = start("decompose", &cfg)?;
    man.phase("assemble");
    let ctx = HodgeContext::new(&mesh, cfg.k)?;
    man.phase("harmonic basis");
    let basis = basis_for(&ctx, &cfg, basis)?;
    man.phase("decompose");
    let (input, coeffs) = match (field, psi) {
        (_, Some(p)) => (format!("rot({p})"), rot_of_expression(&ctx, p)?),
        (None | Some("random"), None) => ("random".to_string(), random_field(ctx.velocity_space().total_dofs(), cfg.seed)),
        (Some(f), None) => (f.to_string(), expression_field(&ctx, f)?),
    };
    let v = FeField::new(ctx.velocity_space().clone(), coeffs)?;
    let c = hodge_decompose(&ctx, &v, &basis)?;
    let norm = ctx.norm(v.coefficients());
    let (rot, harm, grad) = (ctx.norm(&c.rot_part), ctx.norm(&c.harmonic_part), ctx.norm(&c.gradient_part));
    let sum = rot * rot + harm * harm + grad * grad + c.residual_norm * c.residual_norm;
    let pythagoras = if norm > 0.0 { (norm * norm - sum).abs() / (norm * norm) } else { sum.sqrt() };
    let report = pretty(&json!({
        "input": input,
        "b1": basis.len(),
        "norm": norm,
        "rot_norm": rot,
        "harmonic_norm": harm,
        "gradient_norm": grad,
        "residual_norm": c.residual_norm,
        "pythagoras_defect": pythagoras,
        "h_coeffs": c.h_coeffs,
    }));
    print!("{report}");
    let dir = out_dir(common)?;
    if let Some(d) = dir {
        let s = ctx.velocity_space();
        let data = VtkData {
            title: "surfhodge decomposition",
            point_scalars: vec![("psi", vertex_values(&c.psi))],
            cell_vectors: vec![
                ("v", cell_vectors(s, v.coefficients())?),
                ("v_rot", cell_vectors(s, &c.rot_part)?),
                ("v_harm", cell_vectors(s, &c.harmonic_part)?),
                ("v_grad", cell_vectors(s, &c.gradient_part)?),
            ],
        };
        let p = d.join("decomposition.vtk");
        write_vtk_file(&p, ctx.mesh(), &data)?;
        man.output(&p)?;
        man.write(d, "decomposition.json", &report)?;
    }
    man.finish(dir)?;
    Ok(0)
}

pub fn stokes(common: &Common, compare_saddle: bool) -> Result<u8> {
    let cfg = settings(common)?;
    let (mut man, mesh) = start("stokes", &cfg)?;
    man.phase("assemble");
    let ctx = Arc::new(HodgeContext::new(&mesh, cfg.k)?);
    let forcing = cfg.forcing()?;
    let load = if forcing.is_off(0.0) {
        vec![0.0; ctx.velocity_space().total_dofs()]
    } else {
        assemble_load(ctx.velocity_space(), |x| forcing.eval(x, 0.0))?
    };
    man.phase("harmonic basis");
    let basis = basis_for(&ctx, &cfg, None)?;
    man.phase("reduced solve");
    let solver = StokesSolver::new(ctx.clone(), &basis, cfg.sip_parameters())?;
    let state = solver.solve(&load)?;
    let (rot_norm, harmonic_norm) = state.part_norms(&ctx);
    let (div, _) = divergence_norm(ctx.velocity_space(), state.u.coefficients());
    let mut report = json!({
        "b1": basis.len(),
        "kinetic_energy": state.kinetic_energy,
        "rot_norm": rot_norm,
        "harmonic_norm": harmonic_norm,
        "divergence_norm": div,
        "h_coeffs": state.h_coeffs,
        "gauged": solver.is_gauged(),
    });
    if compare_saddle {
        man.phase("saddle solve");
        let (u, _) = solve_stokes_saddle(&ctx, cfg.sip_parameters(), &load)?;
        let d: Vec<f64> = state.u.coefficients().iter().zip(u.coefficients()).map(|(a, b)| a - b).collect();
        let diff = ctx.norm(&d);
        let scale = ctx.norm(u.coefficients());
        println!("saddle L2 discrepancy: {diff:e} (relative {:e})", if scale > 0.0 { diff / scale } else { diff });
        report["saddle_discrepancy"] = json!(diff);
    }
    let report = pretty(&report);
    print!("{report}");
    let dir = out_dir(common)?;
    if let Some(d) = dir {
        man.phase("write");
        let p = d.join("stokes.vtk");
        write_state_vtk(&ctx, solver.embedding(), &state, &p)?;
        man.output(&p)?;
        man.write(d, "stokes.json", &report)?;
    }
    man.finish(dir)?;
    Ok(0)
}

pub fn nse(common: &Common) -> Result<u8> {
    let cfg = settings(common)?;
    let (mut man, mesh) = start("nse", &cfg)?;
    man.stop();
    let dir = out_dir(common)?;
    let out = run_simulation(&cfg, mesh, dir)?;
    man.timings.extend(out.timings.iter().cloned());
    for f in &out.files {
        man.output(f)?;
    }
    let last = out.series.last().expect("series has the initial row");
    print!(
        "{}",
        pretty(&json!({
            "steps": out.final_state.step,
            "t": out.final_state.t,
            "b1": out.basis.len(),
            "initial_kinetic_energy": out.series[0].kinetic_energy,
            "final_kinetic_energy": last.kinetic_energy,
            "final_h_coeffs": last.h_coeffs,
            "max_relative_divergence": out.max_relative_divergence,
            "cfl_warnings": out.cfl_warnings,
        }))
    );
    man.finish(dir)?;
    Ok(0)
}

fn mesh_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut v: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(), Some("off" | "obj")))
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(Error::Config(format!("no .off or .obj files in {}", path.display())));
    }
    Ok(v)
}

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn check_mesh(mesh: &Arc<SurfaceMesh>, k: usize, cfg: &SimulationConfig) -> Result<Vec<Check>> {
    let topo = analyze_topology(mesh);
    let d = verify_dimension(&topo, k)?;
    let mut out = vec![Check {
        name: "dimension",
        ok: d.ok,
        detail: format!("dim J = {}, dim rot = {}, difference {} vs b1 = {}", d.dim_divergence_free, d.dim_rot, d.difference, d.b1),
    }];
    let ctx = HodgeContext::new(mesh, k)?;
    let basis = ctx.harmonic_basis(cfg.seed, cfg.tol)?;
    let r = ctx.basis_report(&basis);
    out.push(Check {
        name: "harmonic basis",
        ok: basis.len() == topo.b1 && r.gram_defect.max(r.rot_defect).max(r.div_defect) <= BASIS_DEFECT_TOL,
        detail: format!("{} fields, gram {:.1e}, rot {:.1e}, div {:.1e}", basis.len(), r.gram_defect, r.rot_defect, r.div_defect),
    });
    let v = FeField::new(ctx.velocity_space().clone(), random_field(ctx.velocity_space().total_dofs(), cfg.seed))?;
    let c = hodge_decompose(&ctx, &v, &basis)?;
    let n2 = ctx.norm(v.coefficients()).powi(2);
    let parts = ctx.norm(&c.rot_part).powi(2) + ctx.norm(&c.harmonic_part).powi(2) + ctx.norm(&c.gradient_part).powi(2);
    let defect = (n2 - parts).abs() / n2;
    let residual = c.residual_norm / n2.sqrt();
    out.push(Check {
        name: "pythagoras",
        ok: defect <= PYTHAGORAS_TOL && residual <= PYTHAGORAS_TOL,
        detail: format!("defect {defect:.1e}, residual {residual:.1e}"),
    });
    Ok(out)
}

/// Runs the suites for `k = 0..=k`. Exit 2 if a mesh cannot be read, else 3
/// if any check fails.
pub fn verify(common: &Common) -> Result<u8> {
    let cfg = settings(common)?;
    let root = mesh_path(&cfg)?;
    let mut man = RunManifest::new("verify", cfg.seed);
    man.config = serde_json::to_value(&cfg)?;
    let mut code = 0u8;
    let mut rows = Vec::new();
    for path in mesh_files(root)? {
        let name = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        man.phase(&name);
        let mesh = match load_mesh(&path, None) {
            Ok(m) => Arc::new(m),
            Err(e) => {
                println!("FAIL {name}: {e}");
                rows.push(json!({"mesh": name, "error": e.to_string()}));
                code = code.max(exit_code(&e));
                continue;
            }
        };
        man.mesh(&path, &mesh);
        if mesh.flipped_triangles() > 0 {
            println!("NOTE {name}: reoriented {} triangles", mesh.flipped_triangles());
        }
        for k in 0..=cfg.k {
            let checks = match check_mesh(&mesh, k, &cfg) {
                Ok(c) => c,
                Err(e) => {
                    println!("FAIL {name} k={k}: {e}");
                    rows.push(json!({"mesh": name, "k": k, "error": e.to_string()}));
                    code = code.max(exit_code(&e));
                    continue;
                }
            };
            for c in checks {
                println!("{} {name} k={k} {}: {}", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail);
                rows.push(json!({"mesh": name, "k": k, "check": c.name, "ok": c.ok, "detail": c.detail}));
                if !c.ok {
                    code = code.max(3);
                }
            }
        }
    }
    // An unreadable input outranks failed checks.
    if rows.iter().any(|r| r.get("error").is_some() && r.get("k").is_none()) {
        code = 2;
    }
    let dir = out_dir(common)?;
    if let Some(d) = dir {
        man.write(d, "verify_report.json", &pretty(&Value::Array(rows)))?;
    }
    man.finish(dir)?;
    Ok(code)
}
