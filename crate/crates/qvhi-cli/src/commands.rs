//! Command implementations. Every command reads one JSON config, writes CSV
//! artifacts under the output directory, prints a one-line summary, and
//! returns the process exit code: 0 on success, 2 on honest non-convergence,
//! 1 (via `Err`) on data errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DVector;

use qvhi_core::hilbert::{write_coord_matrix, DualVector, GramSpace, NonlinearOperator, Vector};
use qvhi_core::problems::{
    build_boundary_problem, build_interior_problem, build_mesh, check_hypotheses, manufactured,
    manufactured_errors, nodal_export, BoundarySpec, ConstraintChoice, ConvexChoice, FEMSpace,
    MaterialLaw,
};
use qvhi_core::qvhi::{
    a_priori_bounds, brute_force_qvhi, qvhi_residual, sample_solution_set, solve_qvhi,
    QVHIProblem, QVHISolution,
};
use qvhi_core::vi::{perturbation_experiment, MoscoFamily, VIInstance};
use qvhi_core::convex::{ConstraintSet, ConvexFunction};
use qvhi_core::Error as CoreError;

use crate::config::*;

type CmdResult = Result<u8, String>;

/// Opens a CSV file under `out` with the non-deterministic timestamp header
/// line; everything after that line is a pure function of config and seed.
fn csv_create(out: &Path, name: &str) -> Result<BufWriter<File>, String> {
    std::fs::create_dir_all(out).map_err(|e| format!("cannot create out dir {out:?}: {e}"))?;
    let path = out.join(name);
    let file = File::create(&path).map_err(|e| format!("cannot create {path:?}: {e}"))?;
    let mut w = BufWriter::new(file);
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(w, "# timestamp_unix: {ts}").map_err(|e| e.to_string())?;
    Ok(w)
}

fn solve_from_zero(
    problem: &QVHIProblem,
    outer: &OuterParams,
    seed: Option<u64>,
) -> Result<(QVHISolution, qvhi_core::qvhi::OuterConfig), String> {
    let cfg = outer.to_outer_config(seed)?;
    let sol = solve_qvhi(
        problem,
        &cfg,
        &Vector::zeros(problem.space_v()),
        &Vector::zeros(problem.space_x()),
    )
    .map_err(|e| e.to_string())?;
    Ok((sol, cfg))
}

fn write_iteration_csv(out: &Path, name: &str, sol: &QVHISolution) -> Result<(), String> {
    let mut w = csv_create(out, name)?;
    writeln!(w, "attempt,iteration,outer_residual,v_norm,w_norm_x,k_feasibility")
        .map_err(|e| e.to_string())?;
    for it in &sol.history {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            it.attempt, it.iteration, it.residual, it.v_norm, it.w_norm, it.k_feasibility
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn write_summary_csv(out: &Path, name: &str, sol: &QVHISolution) -> Result<(), String> {
    let mut w = csv_create(out, name)?;
    writeln!(
        w,
        "converged,u_norm,w_norm_x,outer_residual,constraint_residual,truncation_active,r1,r2,r_bound,outer_iterations,attempts"
    )
    .map_err(|e| e.to_string())?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{}",
        sol.converged,
        sol.u.norm(),
        sol.w.norm(),
        sol.outer_residual,
        sol.constraint_residual,
        sol.truncation_active,
        sol.bounds.r1,
        sol.bounds.r2,
        sol.bounds.r,
        sol.outer_iterations,
        sol.attempts
    )
    .map_err(|e| e.to_string())?;
    Ok(())
}

pub fn cmd_solve(config_path: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let cfg: SolveConfig = load_config(config_path)?;
    check_schema(cfg.schema_version)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let problem = cfg.problem.build(dir)?;
    let (sol, _) = solve_from_zero(&problem, &cfg.outer, seed)?;
    write_iteration_csv(out, "solve_iterations.csv", &sol)?;
    write_summary_csv(out, "solve_summary.csv", &sol)?;
    let res = qvhi_residual(&problem, &sol.u, &sol.w, 1.0, cfg.outer.inner.eps_inner)
        .map_err(|e| e.to_string())?;
    println!(
        "solve: converged={} u_norm={} fp={:.3e} feas={:.3e} subgrad_ok={} (R1={}, R2={}, R={})",
        sol.converged,
        sol.u.norm(),
        res.fp,
        res.feas,
        res.subgrad_ok,
        sol.bounds.r1,
        sol.bounds.r2,
        sol.bounds.r
    );
    Ok(if sol.converged { 0 } else { 2 })
}

pub fn cmd_mosco(config_path: &Path, out: &Path, _seed: Option<u64>) -> CmdResult {
    let cfg: MoscoConfig = load_config(config_path)?;
    check_schema(cfg.schema_version)?;
    let space = GramSpace::euclidean(cfg.dim, "V");
    if cfg.g.len() != cfg.dim {
        return Err("g must have `dim` entries".to_string());
    }
    let g = DualVector::from_slice(&space, &cfg.g).map_err(|e| e.to_string())?;
    let a: NonlinearOperator = match cfg.operator {
        OperatorSpec::Identity => NonlinearOperator::gram_identity(&space),
        OperatorSpec::SpdSeed(seed) => spd_operator(&space, seed)?,
    };
    let check_len = |v: &Vec<f64>, what: &str| -> Result<(), String> {
        if v.len() != cfg.dim {
            Err(format!("{what} must have `dim` entries"))
        } else {
            Ok(())
        }
    };
    let (limit_set, family): (ConstraintSet, MoscoFamily) = match &cfg.family {
        FamilySpec::ShrinkingBall { limit_radius } => (
            ConstraintSet::ball(&space, None, *limit_radius).map_err(|e| e.to_string())?,
            MoscoFamily::shrinking_balls(&space, g.clone(), *limit_radius),
        ),
        FamilySpec::MovingBox { lower, upper, drift } => {
            check_len(lower, "lower")?;
            check_len(upper, "upper")?;
            check_len(drift, "drift")?;
            let (l, u, d) = (
                DVector::from_column_slice(lower),
                DVector::from_column_slice(upper),
                DVector::from_column_slice(drift),
            );
            (
                ConstraintSet::box_set(&space, l.clone(), u.clone()).map_err(|e| e.to_string())?,
                MoscoFamily::moving_boxes(&space, g.clone(), l, u, d),
            )
        }
        FamilySpec::PolyhedralCap { normal, offset } => {
            check_len(normal, "normal")?;
            let a_fn = DualVector::from_slice(&space, normal).map_err(|e| e.to_string())?;
            (
                ConstraintSet::halfspace(&space, a_fn.clone(), *offset)
                    .map_err(|e| e.to_string())?,
                MoscoFamily::polyhedral_caps(&space, g.clone(), a_fn, *offset),
            )
        }
        FamilySpec::GShift { radius, shift } => {
            check_len(shift, "shift")?;
            let r = *radius;
            let sp = space.clone();
            let shift = DualVector::from_slice(&space, shift).map_err(|e| e.to_string())?;
            (
                ConstraintSet::ball(&space, None, r).map_err(|e| e.to_string())?,
                MoscoFamily::g_shift(move || ConstraintSet::ball(&sp, None, r), g.clone(), shift),
            )
        }
    };
    let base = VIInstance::new(a, ConvexFunction::zero(&space), limit_set, g);
    let vi_cfg = cfg.inner.to_vi_config()?;
    let study = match perturbation_experiment(&base, &family, &cfg.n_list, &vi_cfg) {
        Ok(s) => s,
        Err(CoreError::InnerSolveFailed { iterations, residual }) => {
            eprintln!("mosco: inner solve failed to converge ({iterations} iterations, residual {residual:e})");
            return Ok(2);
        }
        Err(e) => return Err(e.to_string()),
    };
    let mut w = csv_create(out, "mosco.csv")?;
    writeln!(w, "n,error,iterations,residual,g_gap_bound").map_err(|e| e.to_string())?;
    for rec in &study.records {
        writeln!(
            w,
            "{},{},{},{},{}",
            rec.n, rec.error, rec.iterations, rec.residual, rec.g_gap_bound
        )
        .map_err(|e| e.to_string())?;
    }
    println!(
        "mosco: {} perturbed solves ({}), base solved in {} iterations, final error {:.3e}",
        study.records.len(),
        family.description(),
        study.base.iterations,
        study.records.last().map(|r| r.error).unwrap_or(f64::NAN)
    );
    Ok(0)
}

pub fn cmd_oracle_compare(config_path: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let cfg: OracleCompareConfig = load_config(config_path)?;
    check_schema(cfg.schema_version)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let problem = cfg.problem.build(dir)?;
    let dim = problem.space_v().dim();
    if dim > 2 {
        return Err(format!("oracle-compare supports dim <= 2, got {dim}"));
    }
    let outer = cfg.outer.to_outer_config(seed)?;
    let sample = sample_solution_set(&problem, &outer, cfg.outer.multistart.max(1), outer.seed)
        .map_err(|e| e.to_string())?;
    let report = brute_force_qvhi(
        &problem,
        cfg.u_spacing,
        cfg.z_spacing,
        &DVector::from_column_slice(&cfg.box_lower),
        &DVector::from_column_slice(&cfg.box_upper),
    )
    .map_err(|e| e.to_string())?;

    let coord = |v: &Vector, k: usize| -> f64 {
        if k < v.coords().len() {
            v.coords()[k]
        } else {
            0.0
        }
    };
    let mut w = csv_create(out, "oracle_compare.csv")?;
    writeln!(w, "side,index,x0,x1,margin,distance_to_other_side").map_err(|e| e.to_string())?;
    let mut max_dist: f64 = 0.0;
    let mut any_rows = false;
    for (i, c) in sample.clusters.iter().enumerate() {
        let d = report
            .clusters
            .iter()
            .map(|o| (c - &o.representative).norm())
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            max_dist = max_dist.max(d);
        }
        any_rows = true;
        writeln!(
            w,
            "solver,{i},{},{},,{}",
            coord(c, 0),
            coord(c, 1),
            if d.is_finite() { d.to_string() } else { String::new() }
        )
        .map_err(|e| e.to_string())?;
    }
    for (i, c) in report.clusters.iter().enumerate() {
        let d = sample
            .clusters
            .iter()
            .map(|s| (s - &c.representative).norm())
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            max_dist = max_dist.max(d);
        }
        any_rows = true;
        writeln!(
            w,
            "oracle,{i},{},{},{},{}",
            coord(&c.representative, 0),
            coord(&c.representative, 1),
            c.margin,
            if d.is_finite() { d.to_string() } else { String::new() }
        )
        .map_err(|e| e.to_string())?;
    }
    println!(
        "oracle-compare: {} solver clusters vs {} oracle clusters, max pairwise distance {:.3e} (eps_grid {:.3e})",
        sample.clusters.len(),
        report.clusters.len(),
        max_dist,
        report.eps_grid
    );
    if sample.failures == sample.solutions.len() || !any_rows {
        return Ok(2);
    }
    Ok(0)
}

fn law_from_spec(spec: &LawSpec) -> Result<MaterialLaw, String> {
    match spec {
        LawSpec::LinearConst(c) => MaterialLaw::linear_const(*c).map_err(|e| e.to_string()),
        LawSpec::NonlinearDemo { alpha_a, m_a } => {
            MaterialLaw::nonlinear_demo(*alpha_a, *m_a).map_err(|e| e.to_string())
        }
    }
}

fn convex_from_key(key: &str) -> Result<ConvexChoice, String> {
    match key {
        "zero" => Ok(ConvexChoice::Zero),
        "abs" => Ok(ConvexChoice::Abs),
        "half-square" => Ok(ConvexChoice::HalfSquare),
        other => Err(format!(
            "unknown convex integrand `{other}` (expected zero | abs | half-square)"
        )),
    }
}

fn constraint_from_spec(spec: &FemConstraintSpec) -> ConstraintChoice {
    match spec {
        FemConstraintSpec::Free => ConstraintChoice::Free,
        FemConstraintSpec::AmbientNorm { m0, varrho2 } => ConstraintChoice::AmbientNorm {
            m0: *m0,
            varrho2: *varrho2,
        },
        FemConstraintSpec::GradientL1 { m0, varrho1, varrho2 } => ConstraintChoice::GradientL1 {
            m0: *m0,
            varrho1: *varrho1,
            varrho2: *varrho2,
        },
    }
}

fn load_fn(load: &LoadSpec, dim: u8) -> impl Fn(&[f64; 2]) -> f64 + '_ {
    let dim = dim;
    move |x: &[f64; 2]| match load {
        LoadSpec::Constant(c) => *c,
        LoadSpec::ManufacturedSine => manufactured::load(dim, x),
    }
}

fn fem_space(cfg: &FemConfig, n_cells: usize) -> Result<std::sync::Arc<FEMSpace>, String> {
    let spec = match (cfg.model.as_str(), &cfg.study) {
        ("boundary", _) => BoundarySpec::BoundaryModel,
        // The manufactured solution vanishes on the whole boundary.
        (_, StudySpec::Convergence { .. }) => BoundarySpec::FullDirichlet,
        _ => BoundarySpec::InteriorModel,
    };
    let mesh = build_mesh(cfg.dim, n_cells, spec).map_err(|e| e.to_string())?;
    FEMSpace::build(mesh).map_err(|e| e.to_string())
}

fn build_fem(
    cfg: &FemConfig,
    n_cells: usize,
    c1_override: Option<f64>,
) -> Result<qvhi_core::problems::AssembledProblem, String> {
    let space = fem_space(cfg, n_cells)?;
    let law = law_from_spec(&cfg.law)?;
    let h = match c1_override {
        None => cfg.potential.build()?,
        Some(c1) => {
            // Sweep form: the potential rescaled to claimed growth (0, c1).
            let base = qvhi_core::clarke::LocallyLipschitz1D::by_key(&cfg.potential.key)
                .map_err(|e| e.to_string())?;
            base.with_growth(0.0, 1.0)
                .and_then(|h| h.scaled(c1))
                .map_err(|e| e.to_string())?
        }
    };
    let convex = convex_from_key(&cfg.convex)?;
    let constraint = constraint_from_spec(&cfg.constraint);
    let load = load_fn(&cfg.load, cfg.dim);
    match cfg.model.as_str() {
        "interior" => build_interior_problem(&space, &law, &h, convex, load, &constraint)
            .map_err(|e| e.to_string()),
        "boundary" => {
            let k2v = DVector::from_element(
                space.obstacle_nodes.len(),
                cfg.k2.unwrap_or(f64::INFINITY.min(1e9)),
            );
            build_boundary_problem(&space, &law, &h, convex, load, &k2v, &constraint)
                .map_err(|e| e.to_string())
        }
        other => Err(format!("unknown model `{other}` (expected interior | boundary)")),
    }
}

pub fn cmd_fem(config_path: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let cfg: FemConfig = load_config(config_path)?;
    check_schema(cfg.schema_version)?;
    match cfg.study.clone() {
        StudySpec::Solve => {
            let built = build_fem(&cfg, cfg.n_cells, None)?;
            let report = check_hypotheses(&built, cfg.audit_samples, seed.unwrap_or(0));
            let mut w = csv_create(out, "fem_hypotheses.csv")?;
            writeln!(w, "clause,pass,witness").map_err(|e| e.to_string())?;
            for c in &report.clauses {
                writeln!(
                    w,
                    "\"{}\",{},\"{}\"",
                    c.clause,
                    c.pass,
                    c.witness.clone().unwrap_or_default()
                )
                .map_err(|e| e.to_string())?;
            }
            let (sol, _) = solve_from_zero(&built.qvhi, &cfg.outer, seed)?;
            write_summary_csv(out, "fem_summary.csv", &sol)?;
            let mut w = csv_create(out, "fem_solution.csv")?;
            writeln!(w, "x,y,value").map_err(|e| e.to_string())?;
            for (p, v) in nodal_export(&built.space, &sol.u) {
                writeln!(w, "{},{},{}", p[0], p[1], v).map_err(|e| e.to_string())?;
            }
            export_mesh(out, &built.space)?;
            println!(
                "fem solve ({}): converged={} dofs={} u_norm={} smallness margin={:.3e} hypotheses_pass={}",
                built.provenance,
                sol.converged,
                built.space.n_free(),
                sol.u.norm(),
                built.smallness.margin,
                report.all_pass()
            );
            Ok(if sol.converged { 0 } else { 2 })
        }
        StudySpec::Convergence { n_list } => {
            let mut w = csv_create(out, "fem_convergence.csv")?;
            writeln!(w, "n_cells,h,h1_error,l2_error,h1_ratio,l2_ratio,embedding_norm")
                .map_err(|e| e.to_string())?;
            let mut prev: Option<(f64, f64)> = None;
            let mut all_converged = true;
            for &n in &n_list {
                let built = build_fem(&cfg, n, None)?;
                let (sol, _) = solve_from_zero(&built.qvhi, &cfg.outer, seed)?;
                all_converged &= sol.converged;
                let (h1, l2) = manufactured_errors(
                    &built.space,
                    &sol.u,
                    &|p| manufactured::exact(cfg.dim, p),
                    &|p| manufactured::gradient(cfg.dim, p),
                );
                let (h1_ratio, l2_ratio) = match prev {
                    Some((ph1, pl2)) => (format!("{}", ph1 / h1), format!("{}", pl2 / l2)),
                    None => (String::new(), String::new()),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    n,
                    1.0 / n as f64,
                    h1,
                    l2,
                    h1_ratio,
                    l2_ratio,
                    built.smallness.m_norm
                )
                .map_err(|e| e.to_string())?;
                prev = Some((h1, l2));
            }
            println!("fem convergence study: {} meshes, all_converged={all_converged}", n_list.len());
            Ok(if all_converged { 0 } else { 2 })
        }
        StudySpec::SmallnessSweep { c1_factors } => {
            // Critical value from the coarse build (norms depend on the mesh).
            let probe =
                build_fem(&cfg, cfg.n_cells, Some(0.0)).map_err(|e| format!("probe build: {e}"))?;
            let critical = probe.smallness.critical_c1;
            let mut w = csv_create(out, "fem_smallness.csv")?;
            writeln!(w, "factor,c1_bar,beta,m_norm,critical_c1,pass,margin")
                .map_err(|e| e.to_string())?;
            for &factor in &c1_factors {
                let c1 = critical * factor;
                match build_fem(&cfg, cfg.n_cells, Some(c1)) {
                    Ok(built) => {
                        let s = &built.smallness;
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{}",
                            factor, s.c1_bar, s.beta, s.m_norm, s.critical_c1, s.pass, s.margin
                        )
                        .map_err(|e| e.to_string())?;
                    }
                    Err(msg) => {
                        if !msg.contains("smallness") {
                            return Err(msg);
                        }
                        let info = qvhi_core::problems::smallness_info(
                            probe.smallness.alpha_a,
                            c1,
                            probe.smallness.m_norm,
                        );
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{}",
                            factor,
                            info.c1_bar,
                            info.beta,
                            info.m_norm,
                            info.critical_c1,
                            info.pass,
                            info.margin
                        )
                        .map_err(|e| e.to_string())?;
                    }
                }
            }
            println!(
                "fem smallness sweep: critical c1 = {critical} over {} factors",
                c1_factors.len()
            );
            Ok(0)
        }
    }
}

fn export_mesh(out: &Path, space: &FEMSpace) -> Result<(), String> {
    // Node coordinates and connectivity in the coordinate text format.
    let mesh = &space.mesh;
    let nodes = nalgebra::DMatrix::from_fn(mesh.n_nodes(), 2, |i, k| mesh.nodes[i][k]);
    let mut f = BufWriter::new(
        File::create(out.join("mesh_nodes.txt")).map_err(|e| e.to_string())?,
    );
    write_coord_matrix(&mut f, &nodes).map_err(|e| e.to_string())?;
    let per_cell = mesh.cell_nodes(0).len();
    let cells = nalgebra::DMatrix::from_fn(mesh.n_cells(), per_cell, |c, k| {
        mesh.cell_nodes(c)[k] as f64
    });
    let mut f = BufWriter::new(
        File::create(out.join("mesh_cells.txt")).map_err(|e| e.to_string())?,
    );
    write_coord_matrix(&mut f, &cells).map_err(|e| e.to_string())?;
    Ok(())
}

pub fn cmd_bounds(config_path: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let cfg: BoundsConfig = load_config(config_path)?;
    check_schema(cfg.schema_version)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let problem = cfg.problem.build(dir)?;
    let bounds = a_priori_bounds(&problem, &Vector::zeros(problem.space_v()))
        .map_err(|e| e.to_string())?;
    let (sol, _) = solve_from_zero(&problem, &cfg.outer, seed)?;
    let u_norm = sol.u.norm();
    let mu_norm = problem.m_map.apply(&sol.u).norm();
    let audit_pass = sol.converged
        && u_norm <= bounds.r1 + 1e-6
        && mu_norm <= bounds.r2 + 1e-6
        && !sol.truncation_active;
    let mut w = csv_create(out, "bounds.csv")?;
    writeln!(w, "c1,c2,r1,r2,r_bound,converged,u_norm,mu_norm,w_norm,audit_pass")
        .map_err(|e| e.to_string())?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{}",
        bounds.c1,
        bounds.c2,
        bounds.r1,
        bounds.r2,
        bounds.r,
        sol.converged,
        u_norm,
        mu_norm,
        sol.w.norm(),
        audit_pass
    )
    .map_err(|e| e.to_string())?;
    println!(
        "bounds: c1={} c2={} R1={} R2={} R={} | solved u_norm={} mu_norm={} audit_pass={audit_pass}",
        bounds.c1, bounds.c2, bounds.r1, bounds.r2, bounds.r, u_norm, mu_norm
    );
    Ok(if sol.converged { 0 } else { 2 })
}

pub fn cmd_sample(config_path: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let cfg: SampleConfig = load_config(config_path)?;
    check_schema(cfg.schema_version)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let problem = cfg.problem.build(dir)?;
    let outer = cfg.outer.to_outer_config(seed)?;
    let sample = sample_solution_set(&problem, &outer, cfg.n_starts, outer.seed)
        .map_err(|e| e.to_string())?;
    let mut w = csv_create(out, "sample.csv")?;
    writeln!(w, "start,converged,u_norm,outer_residual,attempts").map_err(|e| e.to_string())?;
    for (i, s) in sample.solutions.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            i,
            s.converged,
            s.u.norm(),
            s.outer_residual,
            s.attempts
        )
        .map_err(|e| e.to_string())?;
    }
    let mut w = csv_create(out, "sample_summary.csv")?;
    writeln!(w, "clusters,diameter,failures,r1_audit_ok").map_err(|e| e.to_string())?;
    writeln!(
        w,
        "{},{},{},{}",
        sample.clusters.len(),
        sample.diameter,
        sample.failures,
        sample.r1_audit_ok
    )
    .map_err(|e| e.to_string())?;
    println!(
        "sample: {} starts, {} clusters, diameter {:.3e}, failures {}, R1 audit {}",
        cfg.n_starts,
        sample.clusters.len(),
        sample.diameter,
        sample.failures,
        sample.r1_audit_ok
    );
    Ok(if sample.failures < sample.solutions.len() {
        0
    } else {
        2
    })
}
