//! One function per task. Each returns its claims and data files; errors are
//! classified by the caller.

use std::path::Path;

use nalgebra::{Matrix5, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rotator_core::dynamics::{
    csv_row, integrate_with, ELSystem, IntegrateOptions, MonitorRecord, Termination, CSV_HEADER,
};
use rotator_core::em::{
    branch_scan, circle_trajectory, constraint_f, corotation_uniqueness_probe, cyclotron_frequency,
    magnetic_circular_frequency, CircleBranch, CircularSolutionSpec, UniformField, SCAN_HEADER,
};
use rotator_core::euler_lagrange::{Engine, FdOptions};
use rotator_core::free_solution::{
    action_decomposition, frame_from_parameters, free_trajectory, frequency_relation_check, indeterminacy_witness,
};
use rotator_core::hessian::{
    analytic_kernel, constraint_functional, hessian_blocks, kernel, probe, singular_values_desc, universal_factor,
    rotator_hessian_fd, HessianReport, RANK_TOL,
};
use rotator_core::model::{lift_state, momenta, StateSampler};
use rotator_core::profile::PhaseProfile;
use rotator_core::toy::{
    toy_constraint, toy_constraint_closed_form, toy_hessian_fd, toy_singular_ratio, toy_solution, ToyCase, ToyParams,
    ToyVariant,
};
use rotator_core::{ChartState, Error, Result, ShapeFunction, ShapeKind};

use crate::report::Claims;
use crate::scenario::{BranchTag, ModelType, Scenario, Task, ToyCaseTag, ToyVariantBlock};

/// Everything a task needs beyond the scenario itself.
#[derive(Debug, Clone)]
pub struct Context<'a> {
    pub seed: u64,
    pub oracle_fd: bool,
    /// Directory that relative spline paths resolve against.
    pub base_dir: Option<&'a Path>,
}

/// A data file produced by a task: suffix (e.g. `trajectory.csv`) and contents.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub suffix: &'static str,
    pub contents: String,
}

#[derive(Debug, Default)]
pub struct TaskOutput {
    pub claims: Claims,
    pub files: Vec<DataFile>,
    /// Set when the task produced partial results but stopped on a physical refusal.
    pub refusal: Option<Error>,
}

pub fn run_task(scn: &Scenario, ctx: &Context<'_>) -> Result<TaskOutput> {
    match scn.task {
        Task::Simulate => simulate(scn, ctx),
        Task::Hessian => hessian(scn, ctx),
        Task::Kernel => kernel_task(scn, ctx),
        Task::VerifyFree => verify_free(scn, ctx),
        Task::VerifyMagnetic => verify_magnetic(scn),
        Task::Toy => toy(scn, ctx),
        Task::ScanF => scan_f(scn, ctx),
    }
}

fn engine(ctx: &Context<'_>) -> Engine {
    if ctx.oracle_fd {
        Engine::FiniteDifference(FdOptions::default())
    } else {
        Engine::Dual
    }
}

fn rotator_shape(scn: &Scenario) -> Result<ShapeFunction> {
    match (&scn.model.kind, &scn.model.shape) {
        (ModelType::Rotator, Some(tag)) => ShapeFunction::from_tag(tag, scn.model.m, scn.model.l),
        _ => Err(Error::NotApplicable("task needs a rotator model with a shape")),
    }
}

fn system(scn: &Scenario, ctx: &Context<'_>) -> Result<ELSystem> {
    let shape = rotator_shape(scn)?;
    let sys = match &scn.field {
        Some(f) => ELSystem::coupled(shape, f.e, UniformField::new(f.e_field, f.h_field)),
        None => ELSystem::free(shape),
    };
    Ok(sys.with_engine(engine(ctx)))
}

fn initial_state(scn: &Scenario) -> Option<ChartState> {
    scn.initial.map(|s| ChartState {
        t: s.t,
        x: Vector3::from(s.x),
        theta: s.theta,
        phi: s.phi,
        dx: Vector3::from(s.dx),
        dtheta: s.dtheta,
        dphi: s.dphi,
    })
}

fn states(scn: &Scenario, ctx: &Context<'_>) -> Vec<ChartState> {
    if let Some(s) = initial_state(scn) {
        return vec![s];
    }
    let smp = scn.sampling.expect("validated: initial or sampling");
    let (_, l) = scn.scales();
    let sampler = StateSampler::new(l, (smp.q_min, smp.q_max));
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    (0..smp.count).map(|_| sampler.sample(&mut rng)).collect()
}

fn rows(m: &Matrix5<f64>) -> [[f64; 5]; 5] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn rel_drift(values: impl Iterator<Item = f64>, reference: f64) -> f64 {
    values.fold(0.0f64, |m, v| m.max((v - reference).abs())) / reference.abs().max(f64::MIN_POSITIVE)
}

fn simulate(scn: &Scenario, ctx: &Context<'_>) -> Result<TaskOutput> {
    let sys = system(scn, ctx)?;
    let s0 = initial_state(scn).expect("validated");
    let run = &scn.run;
    let mut opts = IntegrateOptions::new(run.rel_tol);
    if let Some(h) = run.h_max {
        opts.h_max = h;
    }
    if let Some(n) = run.max_steps {
        opts.max_steps = n;
    }
    let t_end = run.t_end.expect("validated");
    let traj = integrate_with(&sys, &s0, s0.t + t_end, opts)?;
    let mut out = TaskOutput::default();
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(|e| Error::Parse(format!("csv: {e}")))?;
    out.files.push(DataFile {
        suffix: "trajectory.csv",
        contents: String::from_utf8(csv).expect("ascii"),
    });
    let c = &mut out.claims;
    const OP: &str = "dynamics::integrate_with";
    const MON: &str = "dynamics::MonitorRecord::compute";
    c.push("termination", OP, traj.termination);
    c.push("samples", OP, traj.samples.len());
    c.push("stats", OP, traj.stats);
    c.push("frame_switches", OP, &traj.frame_switches);
    if let (Some(first), Some(last)) = (traj.samples.first(), traj.samples.last()) {
        c.push("final_state", OP, last.state);
        let f = first.monitor;
        let smp = &traj.samples;
        let p_scale = f.p.max_abs();
        let m_scale = f.m.max_abs();
        let p_drift = smp.iter().map(|s| (s.monitor.p - f.p).max_abs()).fold(0.0, f64::max) / p_scale;
        let m_drift = smp.iter().map(|s| (s.monitor.m - f.m).max_abs()).fold(0.0, f64::max) / m_scale;
        c.push("drift.P", MON, p_drift);
        c.push("drift.M", MON, m_drift);
        c.push("drift.PP", MON, rel_drift(smp.iter().map(|s| s.monitor.pp), f.pp));
        c.push("drift.WW", MON, rel_drift(smp.iter().map(|s| s.monitor.ww), f.ww));
        c.push("drift.Q", MON, rel_drift(smp.iter().map(|s| s.monitor.q), f.q));
        c.push(
            "max_residual_norm",
            MON,
            smp.iter().map(|s| s.monitor.residual_norm).fold(0.0, f64::max),
        );
    }
    if let Termination::Singularity { t, kind } = traj.termination {
        out.refusal = Some(Error::Singularity { t, kind });
    }
    Ok(out)
}

/// One probed state in the `hessian` report.
#[derive(Serialize)]
struct ProbeRecord<'a> {
    state: &'a ChartState,
    #[serde(flatten)]
    report: HessianReport,
    /// Largest entrywise gap between the finite-difference and closed-form Hessians.
    #[serde(skip_serializing_if = "Option::is_none")]
    fd_deviation: Option<f64>,
}

fn hessian(scn: &Scenario, ctx: &Context<'_>) -> Result<TaskOutput> {
    let sys = system(scn, ctx)?;
    let states = states(scn, ctx);
    let mut out = TaskOutput::default();
    let mut csv = String::from("index,Q,rank,sigma_ratio,factor,det,det_closed_form,constraint_residual\n");
    let mut ranks = std::collections::BTreeMap::<usize, usize>::new();
    let (mut min_ratio, mut max_ratio) = (f64::INFINITY, 0.0f64);
    let mut records = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let mut rep = probe(&sys, s)?;
        let mut fd_deviation = None;
        if ctx.oracle_fd {
            // the oracle replaces the spectral part; det and factor stay closed-form
            let h = rotator_hessian_fd(&sys.lagrangian, s)?;
            let closed = Matrix5::from_fn(|i, j| rep.h[i][j]);
            fd_deviation = Some((h - closed).abs().max());
            let ker = kernel(&h, RANK_TOL);
            rep.h = rows(&h);
            rep.singular_values = singular_values_desc(&h);
            rep.rank = 5 - ker.len();
            rep.kernel = ker.iter().map(|v| (*v).into()).collect();
        }
        let sv = rep.singular_values;
        let ratio = sv[4] / sv[0];
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        *ranks.entry(rep.rank).or_default() += 1;
        csv.push_str(&format!(
            "{i},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            rep.q,
            rep.rank,
            ratio,
            rep.universal_factor,
            rep.det,
            rep.det_closed_form,
            rep.constraint_residual.map_or(String::new(), |r| format!("{r:.16e}"))
        ));
        records.push(ProbeRecord {
            state: s,
            report: rep,
            fd_deviation,
        });
    }
    let op = if ctx.oracle_fd {
        "hessian::probe+hessian::rotator_hessian_fd"
    } else {
        "hessian::probe"
    };
    let c = &mut out.claims;
    c.push("states", "model::StateSampler::sample", states.len());
    c.push("rank_histogram", op, ranks);
    c.push("min_sigma_ratio", op, min_ratio);
    c.push("max_sigma_ratio", op, max_ratio);
    c.push("probes", op, records);
    out.files.push(DataFile {
        suffix: "hessian.csv",
        contents: csv,
    });
    Ok(out)
}

fn kernel_task(scn: &Scenario, ctx: &Context<'_>) -> Result<TaskOutput> {
    let sys = system(scn, ctx)?;
    let shape = sys.shape().clone();
    if !shape.is_fundamental() {
        return Err(Error::NotApplicable("regular shape: the Hessian kernel is empty"));
    }
    let states = states(scn, ctx);
    let mut out = TaskOutput::default();
    let mut csv = String::from("index,Q,null_residual,cosine,constraint_residual\n");
    let (mut worst_null, mut worst_cos) = (0.0f64, 1.0f64);
    const AK: &str = "hessian::analytic_kernel";
    for (i, s) in states.iter().enumerate() {
        let h = sys.terms(s)?.hessian;
        let k = analytic_kernel(&shape, s)?;
        let null = (h * k.scaled).norm() / (h.norm() * k.scaled.norm());
        let num = kernel(&h, RANK_TOL);
        let cos = num
            .first()
            .map_or(0.0, |v| v.dot(&k.scaled).abs() / (v.norm() * k.scaled.norm()));
        let cr = constraint_functional(&sys, s)?;
        worst_null = worst_null.max(null);
        worst_cos = worst_cos.min(cos);
        let q = rotator_core::model::q_invariant(s, shape.l)?;
        csv.push_str(&format!("{i},{q:.16e},{null:.16e},{cos:.16e},{cr:.16e}\n"));
        if states.len() == 1 {
            let c = &mut out.claims;
            c.push("state", "scenario::initial", s);
            c.push("kernel_scaled", AK, k.scaled.as_slice());
            c.push("kernel_unit", AK, k.unit.as_slice());
            c.push("kernel_blocks", AK, k.blocks.as_slice());
            let nk: Vec<Vec<f64>> = num.iter().map(|v| v.as_slice().to_vec()).collect();
            c.push("numeric_kernel", "hessian::kernel", nk);
            c.push("constraint_residual", "hessian::constraint_functional", cr);
        }
    }
    let c = &mut out.claims;
    c.push("states", "model::StateSampler::sample", states.len());
    c.push("max_null_residual", AK, worst_null);
    c.push("min_cosine_with_numeric_kernel", "hessian::kernel", worst_cos);
    out.files.push(DataFile {
        suffix: "kernel.csv",
        contents: csv,
    });
    Ok(out)
}

fn verify_free(scn: &Scenario, ctx: &Context<'_>) -> Result<TaskOutput> {
    let shape = rotator_shape(scn)?;
    let branch = shape.fundamental_branch().ok_or(Error::NotApplicable("free solutions need a fundamental shape"))?;
    let fb = scn.free.as_ref().expect("validated");
    let frame = frame_from_parameters(
        shape.m,
        shape.l,
        Vector3::from(fb.boost),
        Vector3::from(fb.axis),
        fb.n_angle,
    )?;
    let profile = PhaseProfile::from_tag(&fb.profile, ctx.base_dir)?;
    let times = scn.run.grid.times();
    let traj = free_trajectory(&frame, branch, &profile, &times)?;
    let residuals = traj.residual_norms()?;
    let mut csv = format!("{CSV_HEADER}\n");
    let (mut p_dev, mut freq) = (0.0f64, 0.0f64);
    for (smp, r) in traj.samples.iter().zip(&residuals) {
        let mon = MonitorRecord::compute(&shape, &smp.state, *r)?;
        csv.push_str(&csv_row(&smp.state, &mon));
        csv.push('\n');
        let ch = momenta(&shape, &lift_state(&smp.state))?;
        p_dev = p_dev.max((ch.p - frame.p).max_abs() / frame.p.max_abs());
        let (a, b) = frequency_relation_check(&frame, smp);
        freq = freq.max((a - b).abs());
    }
    let mut out = TaskOutput::default();
    let c = &mut out.claims;
    const FT: &str = "free_solution::free_trajectory";
    c.push("branch", FT, branch);
    c.push("frame", "free_solution::frame_from_parameters", &frame);
    c.push("profile", "profile::PhaseProfile::from_tag", &profile);
    c.push("samples", FT, traj.samples.len());
    c.push(
        "max_residual_norm",
        "free_solution::FreeTrajectory::residual_norms",
        residuals.iter().copied().fold(0.0, f64::max),
    );
    c.push("max_frequency_relation_gap", "free_solution::frequency_relation_check", freq);
    c.push("max_momentum_deviation", "model::momenta", p_dev);
    if times.len() >= 2 {
        let ad = action_decomposition(&traj)?;
        c.push("action", "free_solution::action_decomposition", ad);
        c.push("action_relative_mismatch", "free_solution::action_decomposition", ad.relative_mismatch());
    }
    if fb.witness {
        let w = indeterminacy_witness(&frame, branch, &profile, &times)?;
        c.push("indeterminacy_witness", "free_solution::indeterminacy_witness", w);
    }
    out.files.push(DataFile {
        suffix: "free.csv",
        contents: csv,
    });
    Ok(out)
}

fn verify_magnetic(scn: &Scenario) -> Result<TaskOutput> {
    let (m, l) = scn.scales();
    let fld = scn.field.expect("validated");
    let mb = scn.magnetic.as_ref().expect("validated");
    let h = fld.h_field[2];
    let mut out = TaskOutput::default();
    if let (Some(r), Some(b)) = (mb.radius, mb.branch) {
        let spec = CircularSolutionSpec {
            r,
            branch: match b {
                BranchTag::Plus => CircleBranch::Plus,
                BranchTag::Minus => CircleBranch::Minus,
            },
            eps: 1.0,
            m,
            l,
            e: fld.e,
            h,
        };
        let c = &mut out.claims;
        c.push("mu", "em::CircularSolutionSpec::mu", spec.mu());
        let w = magnetic_circular_frequency(&spec)?;
        let times = scn.run.grid.times();
        let cand = circle_trajectory(&spec, &times)?;
        let sys = spec.system()?;
        let res = rotator_core::dynamics::residual(&sys, &cand)?;
        let shape = spec.shape()?;
        let mut csv = format!("{CSV_HEADER}\n");
        let mut cf = 0.0f64;
        for ((s, _), r) in cand.iter().zip(&res) {
            csv.push_str(&csv_row(s, &MonitorRecord::compute(&shape, s, r.norm())?));
            csv.push('\n');
            cf = cf.max(constraint_f(&lift_state(s), &spec.field()).abs());
        }
        c.push("phidot", "em::magnetic_circular_frequency", w);
        c.push("speed", "em::magnetic_circular_frequency", r * w.abs());
        c.push(
            "max_residual_norm",
            "dynamics::residual",
            res.iter().map(|v| v.norm()).fold(0.0, f64::max),
        );
        c.push("max_abs_constraint_f", "em::constraint_f", cf);
        c.push("cyclotron_frequency", "em::cyclotron_frequency", cyclotron_frequency(m, fld.e, h, r));
        c.push("uniqueness_probe", "em::corotation_uniqueness_probe", corotation_uniqueness_probe(&spec)?);
        out.files.push(DataFile {
            suffix: "circle.csv",
            contents: csv,
        });
    }
    if let Some(sc) = &mb.scan {
        let rows = branch_scan(m, l, fld.e, &sc.radii, &sc.fields);
        let mut csv = format!("{SCAN_HEADER}\n");
        for row in &rows {
            csv.push_str(&row.csv());
            csv.push('\n');
        }
        let admissible = rows.iter().filter(|r| r.admissible).count();
        out.claims.push("scan_points", "em::branch_scan", rows.len());
        out.claims.push("scan_admissible", "em::branch_scan", admissible);
        out.files.push(DataFile {
            suffix: "branch_scan.csv",
            contents: csv,
        });
    }
    Ok(out)
}

fn toy(scn: &Scenario, ctx: &Context<'_>) -> Result<TaskOutput> {
    let md = &scn.model;
    let (Some(variant), Some(spin_coefficient)) = (md.variant, md.spin_coefficient) else {
        return Err(Error::NotApplicable("task needs a toy model"));
    };
    let (m, l) = (md.m, md.l);
    let variant = match variant {
        ToyVariantBlock::Free => ToyVariant::Free,
        ToyVariantBlock::Electric { k } => ToyVariant::Electric { k },
        ToyVariantBlock::Magnetic { k_tilde } => ToyVariant::Magnetic { k_tilde },
    };
    let p = ToyParams::new(m, l, variant)?.with_spin_coefficient(spin_coefficient);
    let tb = scn.toy.as_ref().expect("validated");
    let radius = tb.radius.unwrap_or(0.0);
    let case = match tb.case {
        ToyCaseTag::A => ToyCase::A { radius },
        ToyCaseTag::B => ToyCase::B { radius },
        ToyCaseTag::C => ToyCase::C { radius },
        ToyCaseTag::Indeterminate => ToyCase::Indeterminate {
            nu: PhaseProfile::from_tag(tb.nu.as_deref().expect("validated"), ctx.base_dir)?,
        },
    };
    let times = scn.run.grid.times();
    let sol = toy_solution(&p, &case, &times)?;
    let res = sol.residual_norms(&p)?;
    let mut csv = String::from("t,r,phi,z,psi,dr,dphi,dz,dpsi,residual_norm\n");
    let mut cgap = 0.0f64;
    for ((s, _), r) in sol.samples.iter().zip(&res) {
        let cells = [s.t, s.r, s.phi, s.z, s.psi, s.dr, s.dphi, s.dz, s.dpsi, *r];
        let cells: Vec<String> = cells.iter().map(|v| format!("{v:.16e}")).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
        cgap = cgap.max((toy_constraint(&p, s)? - toy_constraint_closed_form(&p, s)).abs());
    }
    let mut out = TaskOutput::default();
    let c = &mut out.claims;
    c.push("case", "toy::ToyCase::label", case.label());
    if let Some(w) = sol.omega {
        c.push("omega", "toy::toy_solution", w);
    }
    c.push("samples", "toy::toy_solution", sol.samples.len());
    c.push("max_residual_norm", "toy::ToySolution::residual_norms", res.iter().copied().fold(0.0, f64::max));
    c.push("max_constraint_closed_form_gap", "toy::toy_constraint", cgap);
    if let Some((s, _)) = sol.samples.first() {
        c.push("sigma_ratio_at_start", "toy::toy_hessian_fd", toy_singular_ratio(&toy_hessian_fd(&p, s)?));
    }
    out.files.push(DataFile {
        suffix: "toy.csv",
        contents: csv,
    });
    Ok(out)
}

/// Sweeps the universal factor over shapes and `Q`; per-point failures become status cells.
fn scan_f(scn: &Scenario, ctx: &Context<'_>) -> Result<TaskOutput> {
    let (m, l) = scn.scales();
    let sb = scn.scan_f.as_ref().expect("validated");
    let qs = sb.q.values();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut csv = String::from("shape,Q,factor,det,sigma_ratio,status\n");
    let (mut ok, mut failed) = (0usize, 0usize);
    let mut fundamental_max = 0.0f64;
    for tag in &sb.shapes {
        let kind: ShapeKind = tag.parse()?;
        let shape = ShapeFunction::new(kind, m, l)?;
        for &q in &qs {
            let state = StateSampler::new(l, (q, q)).sample(&mut rng);
            let point = (|| -> Result<(f64, f64, f64)> {
                let factor = universal_factor(&shape, q)?;
                let blocks = hessian_blocks(&shape, &state)?;
                let sv = singular_values_desc(&blocks.lab_chart(&shape));
                Ok((factor, blocks.assembled().determinant(), sv[4] / sv[0]))
            })();
            match point {
                Ok((factor, det, ratio)) => {
                    ok += 1;
                    if shape.is_fundamental() {
                        fundamental_max = fundamental_max.max(factor.abs());
                    }
                    csv.push_str(&format!("{},{q:.16e},{factor:.16e},{det:.16e},{ratio:.16e},ok\n", shape.kind));
                }
                Err(e) => {
                    failed += 1;
                    let kind = crate::report::Diagnostic::from_error(&e).kind;
                    csv.push_str(&format!("{},{q:.16e},,,,{kind}\n", shape.kind));
                }
            }
        }
    }
    let mut out = TaskOutput::default();
    let c = &mut out.claims;
    const OP: &str = "hessian::universal_factor";
    c.push("points", OP, ok + failed);
    c.push("points_ok", OP, ok);
    c.push("points_failed", OP, failed);
    c.push("max_abs_factor_fundamental", OP, fundamental_max);
    out.files.push(DataFile {
        suffix: "scan_f.csv",
        contents: csv,
    });
    Ok(out)
}
