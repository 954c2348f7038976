//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use ptpb_core::{
    compute_metrics, estimate_bounds, monte_carlo_region, run_scenario, t_star, BoundsOptions,
    FeasibilityProblem, FeasibilityReport, JointState, Metrics, ModelBounds, Scenario, SimResult,
    TwoLinkArm,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BoundsSource, InitialConfig, RunConfig};
use crate::plot::tracking_svg;
use crate::Failure;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Contents of `metrics.json`.
#[derive(Serialize)]
struct MetricsDoc {
    status: String,
    status_time: Option<f64>,
    message: Option<String>,
    steps_taken: usize,
    dynamics_evals: usize,
    band_violations: usize,
    max_chi_norm: f64,
    max_k: f64,
    max_xi_norm: f64,
    prescribed_bound_deg: f64,
    rate_bound_deg_s: f64,
    /// Absent when the run ended before `t0 + T`.
    metrics: Option<Metrics>,
}

fn metrics_doc(sc: &Scenario, r: &SimResult) -> MetricsDoc {
    MetricsDoc {
        status: r.status.to_string(),
        status_time: r.status_time,
        message: r.message.clone(),
        steps_taken: r.steps_taken,
        dynamics_evals: r.dynamics_evals,
        band_violations: r.band_violations,
        max_chi_norm: r.max_chi_norm,
        max_k: r.max_k,
        max_xi_norm: r.max_xi_norm,
        prescribed_bound_deg: sc.gains.error_bound().to_degrees(),
        rate_bound_deg_s: sc.gains.rate_bound().to_degrees(),
        metrics: compute_metrics(r, sc.t0, sc.horizon).ok(),
    }
}

/// Rejects prescribed times no longer than the minimum reachable time from the initial state.
fn check_t_star(model: &TwoLinkArm, sc: &Scenario) -> Result<f64, Failure> {
    let bounds = estimate_bounds(model, &sc.bx, BoundsOptions::default()).map_err(invalid)?;
    let r0 = sc.reference.at(sc.t0);
    let xr = DVector::from_iterator(2 * r0.q.len(), r0.q.iter().chain(r0.dq.iter()).copied());
    let ts = t_star(
        &bounds,
        &sc.bx,
        sc.gains.error_bound(),
        &xr,
        std::slice::from_ref(&sc.initial),
    )
    .map_err(invalid)?;
    if sc.horizon <= ts {
        return Err(Failure::Invalid(format!(
            "prescribed time {} s does not exceed the minimum reachable time T* = {ts:.4} s",
            sc.horizon
        )));
    }
    Ok(ts)
}

/// Writes the enabled artifacts of one run into `dir`.
fn write_run(
    cfg: &RunConfig,
    sc: &Scenario,
    r: &SimResult,
    dir: &Path,
) -> Result<MetricsDoc, Failure> {
    prepare_dir(dir)?;
    if cfg.output.csv {
        r.write_csv(fs::File::create(dir.join("trace.csv"))?)
            .map_err(|e| Failure::Io(e.to_string()))?;
    }
    let doc = metrics_doc(sc, r);
    if cfg.output.metrics_json {
        fs::write(
            dir.join("metrics.json"),
            serde_json::to_string_pretty(&doc)?,
        )?;
    }
    if cfg.output.svg {
        tracking_svg(&dir.join("tracking.svg"), r, sc.t0 + sc.horizon)?;
    }
    Ok(doc)
}

pub fn simulate(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    svg: bool,
) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    cfg.output.svg |= svg;
    let model = cfg.model()?;
    let sc = cfg.scenario()?;
    sc.validate().map_err(invalid)?;
    let ts = check_t_star(&model, &sc)?;
    let r = run_scenario(&model, &sc).map_err(invalid)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir(&base_dir(config)));
    let doc = write_run(&cfg, &sc, &r, &dir)?;
    println!(
        "status: {} (T* = {ts:.4} s, T = {} s)",
        r.status, sc.horizon
    );
    if let Some(m) = &doc.metrics {
        println!(
            "MASE q (deg): {:.4?}; RMSE q (deg): {:.4?}; bound {:.4} deg",
            m.mase_q_deg, m.rmse_q_deg, doc.prescribed_bound_deg
        );
    }
    println!("artifacts in {}", dir.display());
    if r.completed() {
        Ok(())
    } else {
        Err(Failure::Run(format!(
            "run ended with status {} at t = {:.4} s: {}",
            r.status,
            r.status_time.unwrap_or(f64::NAN),
            r.message.unwrap_or_default()
        )))
    }
}

/// One entry of `feasibility.json`.
#[derive(Serialize)]
struct FeasibilityEntry {
    #[serde(flatten)]
    report: FeasibilityReport,
    viable_radius_deg: f64,
    mc_samples: usize,
    mc_accepted: usize,
    mc_ratio: Option<f64>,
}

fn model_bounds(
    src: &BoundsSource,
    model: &TwoLinkArm,
    sc: &Scenario,
) -> Result<ModelBounds, Failure> {
    match *src {
        BoundsSource::Estimate {
            samples,
            seed,
            inflation,
        } => estimate_bounds(
            model,
            &sc.bx,
            BoundsOptions {
                samples,
                seed,
                inflation,
            },
        )
        .map_err(invalid),
        BoundsSource::Given {
            m_lower,
            m_upper,
            c_bar,
            g_bar,
            f_bar,
        } => {
            if !(0.0 < m_lower && m_lower <= m_upper) {
                return Err(Failure::Invalid(
                    "given bounds need 0 < m_lower <= m_upper".into(),
                ));
            }
            Ok(ModelBounds {
                m_lower,
                m_upper,
                minv_lower: 1.0 / m_upper,
                minv_upper: 1.0 / m_lower,
                c_bar,
                g_bar,
                f_bar,
            })
        }
    }
}

pub fn feasibility(
    config: &Path,
    samples: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let mut fc = cfg.feasibility.clone().unwrap_or_default();
    if let Some(n) = samples {
        fc.samples = n;
    }
    let model = cfg.model()?;
    let sc = cfg.scenario()?;
    sc.bx.validate().map_err(invalid)?;
    if sc.initial.dim() != sc.bx.dim() || sc.reference.dim() != sc.bx.dim() {
        return Err(Failure::Invalid(format!(
            "initial state and reference must have {} joints",
            sc.bx.dim()
        )));
    }
    let bounds = model_bounds(&fc.bounds, &model, &sc)?;
    let q_star = match &fc.q_star_deg {
        Some(q) => DVector::from_iterator(q.len(), q.iter().map(|x| x.to_radians())),
        None => sc.reference.at(sc.t0).q,
    };
    let horizons = if fc.horizons.is_empty() {
        vec![sc.horizon]
    } else {
        fc.horizons.clone()
    };
    let region = fc.start.region(&sc.initial);
    let xr = DVector::from_iterator(
        2 * q_star.len(),
        q_star
            .iter()
            .copied()
            .chain(std::iter::repeat_n(0.0, q_star.len())),
    );
    let eps = sc.gains.error_bound();
    let dir = out.unwrap_or_else(|| cfg.output_dir(&base_dir(config)));
    prepare_dir(&dir)?;
    let mut entries = Vec::new();
    let mut viable = Vec::new();
    for &t in &horizons {
        let mut p = FeasibilityProblem::new(bounds, sc.bx.clone(), t, q_star.clone())
            .map_err(invalid)?
            .with_start(region.clone());
        if let Some(u) = fc.u_star {
            p = p.with_u_star(u);
        }
        let (lo, hi) = p.sigma_bounds().map_err(invalid)?;
        let sigma = fc.sigma.unwrap_or(0.5 * (lo + hi));
        if lo < hi && !(lo..hi).contains(&sigma) {
            return Err(Failure::Invalid(format!(
                "sigma {sigma} outside [{lo:.4}, {hi:.4}) for T = {t}"
            )));
        }
        let mut candidates = vec![sc.initial.clone()];
        let mut mc = None;
        if fc.samples > 0 {
            let r = monte_carlo_region(
                |x: &JointState| lo < hi && p.member_unchecked(sigma, x),
                &p.bx,
                fc.samples,
                fc.seed,
            )
            .map_err(invalid)?;
            candidates.extend(r.accepted.iter().cloned());
            viable.extend(r.accepted.iter().map(|x| (t, x.clone())));
            mc = Some(r);
        }
        let ts = t_star(&bounds, &p.bx, eps, &xr, &candidates).map_err(invalid)?;
        let report = p.report(Some(sigma), &region, ts).map_err(invalid)?;
        println!(
            "T = {t} s: sigma in [{:.4}, {:.4}), sigma = {:.4}, T* = {:.4} s, radius = {:.2} deg, u_min = {:.4}, d_bar = {:.4}, nonempty = {}",
            report.sigma_lower,
            report.sigma_upper,
            report.sigma,
            report.t_star,
            report.viable_radius.to_degrees(),
            report.u_min,
            report.d_bar,
            report.nonempty
        );
        entries.push(FeasibilityEntry {
            viable_radius_deg: report.viable_radius.to_degrees(),
            mc_samples: mc.as_ref().map_or(0, |m| m.samples),
            mc_accepted: mc.as_ref().map_or(0, |m| m.accepted.len()),
            mc_ratio: mc.as_ref().map(|m| m.ratio),
            report,
        });
    }
    fs::write(
        dir.join("feasibility.json"),
        serde_json::to_string_pretty(&entries)?,
    )?;
    if fc.samples > 0 {
        let n = sc.bx.dim();
        let mut w = csv::Writer::from_path(dir.join("viable_samples.csv"))?;
        let mut header = vec!["horizon".to_string()];
        header.extend((1..=n).map(|i| format!("q_{i}")));
        header.extend((1..=n).map(|i| format!("dq_{i}")));
        w.write_record(&header)?;
        for (t, x) in &viable {
            let row: Vec<String> = std::iter::once(*t)
                .chain(x.q.iter().copied())
                .chain(x.dq.iter().copied())
                .map(|v| v.to_string())
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

/// One sweep cell's axis values.
#[derive(Debug, Clone)]
struct Cell {
    horizon: f64,
    offset_deg: Option<f64>,
    seed: Option<u64>,
}

fn axis<T: Clone>(name: &str, v: &Option<Vec<T>>) -> Result<Vec<Option<T>>, Failure> {
    match v {
        None => Ok(vec![None]),
        Some(v) if v.is_empty() => Err(Failure::Invalid(format!("sweep axis {name} is empty"))),
        Some(v) => Ok(v.iter().cloned().map(Some).collect()),
    }
}

struct CellOutcome {
    status: String,
    status_time: Option<f64>,
    band_violations: Option<usize>,
    metrics: Option<Metrics>,
    message: String,
    invalid: bool,
}

fn run_cell(base: &RunConfig, cell: &Cell, dir: &Path) -> Result<CellOutcome, Failure> {
    let mut cfg = base.clone();
    cfg.timing.horizon = cell.horizon;
    if let Some(o) = cell.offset_deg {
        cfg.initial = InitialConfig::Offset { offset_deg: o };
    }
    if let Some(s) = cell.seed {
        cfg.override_seed(s);
    }
    let prepared = cfg.model().and_then(|m| {
        let sc = cfg.scenario()?;
        sc.validate().map_err(invalid)?;
        Ok((m, sc))
    });
    let invalid_cell = |m: String| CellOutcome {
        status: "invalid".into(),
        status_time: None,
        band_violations: None,
        metrics: None,
        message: m,
        invalid: true,
    };
    let (model, sc) = match prepared {
        Ok(x) => x,
        Err(f) => return Ok(invalid_cell(f.message().to_string())),
    };
    let r = match run_scenario(&model, &sc) {
        Ok(r) => r,
        Err(e) => return Ok(invalid_cell(e.to_string())),
    };
    let doc = write_run(&cfg, &sc, &r, dir)?;
    Ok(CellOutcome {
        status: doc.status,
        status_time: doc.status_time,
        band_violations: Some(doc.band_violations),
        metrics: doc.metrics,
        message: doc.message.unwrap_or_default(),
        invalid: false,
    })
}

pub fn sweep(config: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let Some(sw) = cfg.sweep.clone() else {
        return Err(Failure::Invalid("config has no sweep section".into()));
    };
    if sw.horizons.is_none() && sw.offsets_deg.is_none() && sw.seeds.is_none() {
        return Err(Failure::Invalid("sweep declares no axes".into()));
    }
    let mut cells = Vec::new();
    for h in axis("horizons", &sw.horizons)? {
        for o in axis("offsets_deg", &sw.offsets_deg)? {
            for s in axis("seeds", &sw.seeds)? {
                cells.push(Cell {
                    horizon: h.unwrap_or(cfg.timing.horizon),
                    offset_deg: o,
                    seed: s,
                });
            }
        }
    }
    let dir = out.unwrap_or_else(|| cfg.output_dir(&base_dir(config)));
    prepare_dir(&dir)?;
    let names: Vec<String> = (0..cells.len()).map(|i| format!("cell_{i:03}")).collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| Failure::Io(e.to_string()))?;
    let outcomes: Vec<Result<CellOutcome, Failure>> = pool.install(|| {
        cells
            .par_iter()
            .zip(names.par_iter())
            .map(|(c, name)| run_cell(&cfg, c, &dir.join(name)))
            .collect()
    });
    let n = cfg.constraints.u_max.len();
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    let mut header: Vec<String> = [
        "cell",
        "horizon",
        "offset_deg",
        "seed",
        "status",
        "status_time",
        "band_violations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=n).map(|i| format!("mase_q_deg_{i}")));
    header.extend((1..=n).map(|i| format!("rmse_q_deg_{i}")));
    header.extend(["sup_e_norm_deg".to_string(), "message".to_string()]);
    w.write_record(&header)?;
    let (mut invalid_cells, mut completed) = (0, 0);
    for ((cell, name), outcome) in cells.iter().zip(&names).zip(outcomes) {
        let o = outcome?;
        invalid_cells += usize::from(o.invalid);
        completed += usize::from(o.status == "completed");
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut row = vec![
            name.clone(),
            cell.horizon.to_string(),
            opt(cell.offset_deg.map(|x| x.to_string())),
            opt(cell.seed.map(|x| x.to_string())),
            o.status.clone(),
            opt(o.status_time.map(|x| x.to_string())),
            opt(o.band_violations.map(|x| x.to_string())),
        ];
        let per_joint = |f: fn(&Metrics) -> &Vec<f64>| -> Vec<String> {
            match &o.metrics {
                Some(m) => f(m).iter().map(|x| x.to_string()).collect(),
                None => vec![String::new(); n],
            }
        };
        row.extend(per_joint(|m| &m.mase_q_deg));
        row.extend(per_joint(|m| &m.rmse_q_deg));
        row.push(opt(o
            .metrics
            .as_ref()
            .map(|m| m.sup_e_norm_deg.to_string())));
        row.push(o.message);
        w.write_record(&row)?;
    }
    w.flush()?;
    println!(
        "{} cells: {completed} completed, {invalid_cells} invalid; summary in {}",
        cells.len(),
        dir.join("summary.csv").display()
    );
    if invalid_cells > 0 {
        return Err(Failure::Invalid(format!(
            "{invalid_cells} sweep cells failed validation"
        )));
    }
    Ok(())
}
