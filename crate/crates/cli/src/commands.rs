use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ddimpl::canonical::{synthesize, verify_closed_loop};
use ddimpl::implementability::{check_data, check_model, DataBundle, GpeBounds, Tolerances};
use ddimpl::scenario::{generate, Dims, ReferenceKind};
use ddimpl::{Partition, RankTolerance, StateSpaceModel, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{pair, read, require, RunConfig};

/// Process exit status; the numeric values are part of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Negative = 1,
    Usage = 2,
}

pub type Outcome = Result<Status, String>;

const RESIDUAL_TOL: f64 = 1e-8;

fn tolerances(cfg: &RunConfig) -> Tolerances {
    let mut tol = Tolerances::default();
    if let Some(rel) = cfg.tol {
        tol.rank = RankTolerance::new(rel);
    }
    tol.residual = RESIDUAL_TOL;
    tol
}

fn emit(value: &serde_json::Value) {
    let text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    // A closed pipe (e.g. `| head`) is not worth a panic.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn load_trajectory(path: &Path) -> Result<Trajectory, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Trajectory::read_csv(file).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> ddimpl::Result<()>) -> Result<(), String> {
    let err = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
    let mut out = BufWriter::new(File::create(path).map_err(|e| err(&e))?);
    write(&mut out).map_err(|e| err(&e))?;
    out.flush().map_err(|e| err(&e))
}

/// Data bundle shared by `check` and `synth`.
fn data_bundle(cfg: &RunConfig) -> Result<DataBundle, String> {
    let plant = load_trajectory(&require(&cfg.plant, "plant")?)?;
    let reference = load_trajectory(&require(&cfg.reference, "ref")?)?;
    let picks_w = require(&cfg.picks_w, "picks-w")?;
    let picks_c = require(&cfg.picks_c, "picks-c")?;
    let partition = Partition::from_one_based(plant.channels(), &picks_w, &picks_c).map_err(|e| e.to_string())?;
    let horizon = require(&cfg.horizon, "L")?;
    let lag_bound = require(&cfg.lag_bound, "lag-bound")?;
    if horizon <= lag_bound {
        return Err(format!("L = {horizon} must exceed the lag bound {lag_bound}"));
    }
    let (m_plant, m_ref) = pair(&require(&cfg.m_bound, "m-bound")?, "m-bound")?;
    let (n_plant, n_ref) = pair(&require(&cfg.n_bound, "n-bound")?, "n-bound")?;
    Ok(DataBundle::new(plant, reference, horizon, partition, lag_bound)
        .map_err(|e| e.to_string())?
        .with_bounds(GpeBounds { m: m_plant, n: n_plant }, GpeBounds { m: m_ref, n: n_ref }))
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let model = StateSpaceModel::from_json(&read(&require(&cfg.model, "model")?)?).map_err(|e| e.to_string())?;
    let len = require(&cfg.samples, "T")?;
    if len == 0 {
        return Err("T must be at least 1".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let x0: Vec<f64> = (0..model.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u: Vec<f64> = (0..model.m() * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = model.to_latent().simulate(&u, len, &x0).map_err(|e| e.to_string())?;
    match &cfg.out {
        Some(path) => write_file(path, |out| w.write_csv(out))?,
        None => {
            let _ = std::io::stdout().lock().write_all(w.to_csv_string().as_bytes());
        }
    }
    eprintln!("simulated {len} samples of {} channels", w.channels());
    Ok(Status::Success)
}

pub fn check(cfg: &RunConfig) -> Outcome {
    let bundle = data_bundle(cfg)?;
    let verdict = check_data(&bundle, tolerances(cfg)).map_err(|e| e.to_string())?;
    emit(&verdict.to_json_value());
    if verdict.implementable {
        Ok(Status::Success)
    } else if verdict.gpe_plant && verdict.gpe_ref {
        Ok(Status::Negative)
    } else {
        eprintln!("data are not persistently exciting for the given bounds; the verdict is inconclusive");
        Ok(Status::Usage)
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn synth(cfg: &RunConfig) -> Outcome {
    let out = require(&cfg.out, "out")?;
    let b = &data_bundle(cfg)?;
    let tol = tolerances(cfg);
    let verdict = check_data(b, tol).map_err(|e| e.to_string())?;
    let syn = synthesize(&b.plant_traj, &b.ref_traj, &b.partition, b.horizon, tol.rank).map_err(|e| e.to_string())?;
    let report =
        verify_closed_loop(&syn.plant, &syn.controller, &syn.reference, &syn.plan, tol.rank).map_err(|e| e.to_string())?;
    let sidecar = sidecar_path(&out);
    write_file(&out, |w| syn.controller.write_csv(w))?;
    std::fs::write(&sidecar, syn.controller.sidecar_json() + "\n").map_err(|e| format!("{}: {e}", sidecar.display()))?;
    emit(&json!({
        "verdict": verdict.to_json_value(),
        "controller": {
            "dim": syn.controller.dim(),
            "k": syn.controller.k(),
            "L": syn.controller.horizon(),
            "basis": out.display().to_string(),
            "sidecar": sidecar.display().to_string(),
        },
        "closed_loop": report,
    }));
    if report.matches {
        Ok(Status::Success)
    } else {
        eprintln!(
            "closed loop does not reproduce the reference: dim {} vs {}, max angle {:.3e}",
            report.controlled_dim, report.reference_dim, report.max_angle
        );
        Ok(Status::Negative)
    }
}

#[derive(Debug, Serialize)]
struct Failure {
    seed: u64,
    kind: ReferenceKind,
    reason: String,
}

/// One random instance: data/model agreement, closed-loop exactness, and the
/// by-construction verdict for closed-loop references.
fn run_case(seed: u64, kind: ReferenceKind, dims: Dims, tol: Tolerances) -> Result<(), String> {
    let inst = generate(seed, kind, dims, 0).map_err(|e| format!("generation: {e}"))?;
    let bundle = inst.bundle().map_err(|e| e.to_string())?;
    let data = check_data(&bundle, tol).map_err(|e| format!("check_data: {e}"))?;
    let model = check_model(&inst.plant, &inst.reference, inst.horizon, tol).map_err(|e| format!("check_model: {e}"))?;
    if data.implementable != model.implementable {
        return Err(format!(
            "data says implementable={}, model says {}",
            data.implementable, model.implementable
        ));
    }
    if kind == ReferenceKind::ClosedLoop && !model.implementable {
        return Err("closed-loop reference reported non-implementable".into());
    }
    let syn = synthesize(&inst.plant_traj, &inst.ref_traj, &inst.partition, inst.horizon, tol.rank)
        .map_err(|e| format!("synthesize: {e}"))?;
    let report = verify_closed_loop(&syn.plant, &syn.controller, &syn.reference, &syn.plan, tol.rank)
        .map_err(|e| format!("verify: {e}"))?;
    if report.matches != model.implementable {
        return Err(format!(
            "closed loop matches={} (max angle {:.3e}) but implementable={}",
            report.matches, report.max_angle, model.implementable
        ));
    }
    Ok(())
}

pub fn proptest(cfg: &RunConfig) -> Outcome {
    let cases = require(&cfg.cases, "cases")?;
    if cases == 0 {
        return Err("--cases must be at least 1".into());
    }
    let base = cfg.seed.unwrap_or(0);
    let defaults = Dims::default();
    let dims = Dims {
        max_q: cfg.max_q.unwrap_or(defaults.max_q),
        max_k: cfg.max_k.unwrap_or(defaults.max_k),
        max_order: cfg.max_order.unwrap_or(defaults.max_order),
        ..defaults
    };
    if dims.max_q == 0 || dims.max_k == 0 {
        return Err("--max-q and --max-k must be at least 1".into());
    }
    let tol = tolerances(cfg);
    let failures: Vec<Failure> = (0..cases as u64)
        .into_par_iter()
        .filter_map(|i| {
            let seed = base.wrapping_add(i);
            let kind = if i % 2 == 0 { ReferenceKind::ClosedLoop } else { ReferenceKind::Adversarial };
            run_case(seed, kind, dims, tol).err().map(|reason| Failure { seed, kind, reason })
        })
        .collect();
    emit(&json!({
        "cases": cases,
        "passes": cases - failures.len(),
        "seed": base,
        "tol": tol.rank.rel,
        "failures": failures,
    }));
    Ok(if failures.is_empty() { Status::Success } else { Status::Negative })
}
