use serde::Serialize;
use torsio_core::diagnostics::{run_criterion, CriterionReport, Decision, DiagnoseConfig, Verdict};
use torsio_core::elliptic::{solve, EllipticProblem, SolverOptions};
use torsio_core::gallery::{self, GalleryRun};
use torsio_core::ptorsion::{p_diagnose, p_diagnose_l1, p_resolvent, p_torsion_with, POptions, PProblem};
use torsio_core::shapeopt::{optimize, OptimizeResult};
use torsio_core::spectral::{dirichlet_eigenvalues_raster, spectral_abscissa_with, SpectralResult};
use torsio_core::torsion::{torsion_function_with, torsional_rigidity_with, Equation};
use torsio_core::{diagnose_l1, diagnose_l2, rasterize, EigenOptions, Embedding, Field, Grid, MeasureSpec};

use crate::config::{Artifact, Command, Rhs, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{criteria_csv, fields_csv, trace_csv, verdict_table};

/// Rendered outputs of one run.
pub struct Outcome {
    pub json: String,
    pub csv: Option<String>,
    /// Human-readable summary for stderr.
    pub summary: String,
    pub status: u8,
}

const NOT_CONVERGED: u8 = 3;
const INCONCLUSIVE: u8 = 4;

const DISCLAIMER: &str = "decisions are evidence from one finite box and resolution, not proofs";

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    residual: f64,
    iterations: usize,
    energy: f64,
    min: f64,
    max: f64,
    integral: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
}

#[derive(Serialize)]
struct TorsionSummary {
    radii: Vec<f64>,
    sup_tail: Vec<f64>,
    l1_norm: Vec<f64>,
    increments: Vec<f64>,
    converged: bool,
    which_equation: Equation,
    truncation_radius: f64,
    max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
}

#[derive(Serialize)]
struct RigiditySummary {
    #[serde(rename = "P")]
    p: f64,
    per_r: Vec<(f64, f64)>,
    stabilized: bool,
    truncation_radius: f64,
}

#[derive(Serialize)]
struct ProbeOutput<'a> {
    report: &'a CriterionReport,
    truncation_radius: f64,
}

#[derive(Serialize)]
struct DiagnoseOutput {
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stable: Option<bool>,
    disclaimer: &'static str,
}

fn render<T: Serialize>(cfg: &RunConfig, result: &T) -> CliResult<String> {
    let artifact = Artifact { run_config: cfg.clone(), result };
    let mut s = serde_json::to_string_pretty(&artifact).map_err(|e| CliError::Usage(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn rhs_field(rhs: &Rhs, grid: &Grid) -> CliResult<Field> {
    Ok(match rhs {
        Rhs::Const { value } => Field::constant(grid, *value),
        Rhs::Expr { expr } => Field::from_fn(grid, |x| expr.eval(x))?,
    })
}

fn spectral_outcome(cfg: &RunConfig, mut res: SpectralResult) -> CliResult<Outcome> {
    let csv = res.eigenfields.take().map(|f| fields_csv(&f));
    let status = if res.converged { 0 } else { NOT_CONVERGED };
    let summary = format!("eigenvalues: {:?}", res.eigenvalues);
    Ok(Outcome { json: render(cfg, &res)?, csv, summary, status })
}

fn verdict_for(embedding: Embedding, measure: &MeasureSpec, grid: &Grid, p: Option<f64>) -> CliResult<Verdict> {
    let config = DiagnoseConfig::default();
    Ok(match (embedding, p) {
        (Embedding::L2, None) => diagnose_l2(measure, grid, &config)?,
        (Embedding::L1, None) => diagnose_l1(measure, grid, &config)?,
        (Embedding::L2, Some(p)) => p_diagnose(measure, grid, p, &config)?,
        (Embedding::L1, Some(p)) => p_diagnose_l1(measure, grid, p, &config)?,
    })
}

fn strict_status(strict: bool, decisions: &[Decision]) -> u8 {
    if strict && decisions.contains(&Decision::Inconclusive) {
        INCONCLUSIVE
    } else {
        0
    }
}

pub fn execute(cfg: &RunConfig) -> CliResult<Outcome> {
    match &cfg.command {
        Command::Solve { measure, grid, rhs, tol, max_iter, p } => {
            let raster = rasterize(measure, grid)?;
            let f = rhs_field(rhs, grid)?;
            let res = match p {
                Some(p) => p_resolvent(&PProblem::new(*p, raster, f))?,
                None => {
                    let mut prob = EllipticProblem::new(raster, f);
                    prob.options = SolverOptions { tol: *tol, max_iter: *max_iter, ..SolverOptions::default() };
                    solve(&prob)?
                }
            };
            let s = SolveSummary {
                converged: res.converged,
                residual: res.residual,
                iterations: res.iterations,
                energy: res.energy,
                min: res.u.min(),
                max: res.u.max(),
                integral: res.u.integral(),
                p: *p,
            };
            let summary = format!("converged: {}, residual {:.3e}, max u = {}", s.converged, s.residual, s.max);
            let status = if s.converged { 0 } else { NOT_CONVERGED };
            Ok(Outcome { json: render(cfg, &s)?, csv: Some(fields_csv(&[res.u])), summary, status })
        }
        Command::Torsion { measure, grid, radii, tol, p } => {
            let res = match p {
                Some(p) => p_torsion_with(measure, grid, *p, radii, &POptions::default())?,
                None => torsion_function_with(measure, grid, radii, Equation::Characteristic, SolverOptions::with_tol(*tol))?,
            };
            let s = TorsionSummary {
                radii: res.radii.clone(),
                sup_tail: res.sup_tail.clone(),
                l1_norm: res.l1_norm.clone(),
                increments: res.increments.clone(),
                converged: res.converged,
                which_equation: res.which_equation,
                truncation_radius: res.truncation_radius,
                max: res.w.max(),
                p: res.p,
            };
            let summary = format!("max w = {}, exhaustion converged: {}", s.max, s.converged);
            Ok(Outcome { json: render(cfg, &s)?, csv: Some(fields_csv(&[res.w])), summary, status: 0 })
        }
        Command::Rigidity { measure, grid, radii, tol } => {
            let res = torsional_rigidity_with(measure, grid, radii, SolverOptions::with_tol(*tol))?;
            let s = RigiditySummary {
                p: res.p,
                per_r: res.per_r,
                stabilized: res.stabilized,
                truncation_radius: res.truncation_radius,
            };
            let summary = format!("P = {}, stabilized: {}", s.p, s.stabilized);
            Ok(Outcome { json: render(cfg, &s)?, csv: Some(fields_csv(&[res.u])), summary, status: 0 })
        }
        Command::Eig { region, grid, k } => {
            let raster = rasterize(&MeasureSpec::inf_outside(region.clone()), grid)?;
            let keep = cfg.outputs.csv.is_some();
            spectral_outcome(cfg, dirichlet_eigenvalues_raster(&raster, *k, &EigenOptions::default(), keep)?)
        }
        Command::Abscissa { measure, grid } => {
            let keep = cfg.outputs.csv.is_some();
            spectral_outcome(cfg, spectral_abscissa_with(measure, grid, &EigenOptions::default(), keep)?)
        }
        Command::Probe { criterion, measure, grid, strict } => {
            let report = run_criterion(*criterion, measure, grid, &DiagnoseConfig::default())?;
            let out = ProbeOutput { report: &report, truncation_radius: grid.inradius() };
            let summary = format!("criterion {}: {:?}\n{DISCLAIMER}", criterion.label(), report.decision);
            let csv = Some(criteria_csv(std::slice::from_ref(&report)));
            let status = strict_status(*strict, &[report.decision]);
            Ok(Outcome { json: render(cfg, &out)?, csv, summary, status })
        }
        Command::Diagnose { embedding, measure, grid, p, refine, strict } => {
            let verdict = verdict_for(*embedding, measure, grid, *p)?;
            let refined = if *refine { Some(verdict_for(*embedding, measure, &grid.refined(2.0)?, *p)?) } else { None };
            let stable = refined.as_ref().map(|r| r.decision == verdict.decision);
            let mut decisions = vec![verdict.decision];
            decisions.extend(refined.iter().map(|r| r.decision));
            let status = strict_status(*strict, &decisions);
            let mut summary = verdict_table(&verdict);
            if let Some(r) = &refined {
                summary.push_str(&format!("refined:\n{}", verdict_table(r)));
            }
            summary.push_str(DISCLAIMER);
            let mut criteria: Vec<CriterionReport> = verdict.criteria.clone();
            criteria.extend(refined.iter().flat_map(|r| r.criteria.iter().cloned()));
            let csv = Some(criteria_csv(&criteria));
            let out = DiagnoseOutput { verdict, refined, stable, disclaimer: DISCLAIMER };
            Ok(Outcome { json: render(cfg, &out)?, csv, summary, status })
        }
        Command::Optimize { m, dim, objective, ga, grid } => {
            let res: OptimizeResult = optimize(objective, *dim, *m, ga, grid)?;
            let radii: Vec<f64> = res.best.balls.iter().map(|b| b.radius).collect();
            let summary = format!("best value {} with radii {radii:?}", res.evaluation.value);
            Ok(Outcome { json: render(cfg, &res)?, csv: Some(trace_csv(&res.trace)), summary, status: 0 })
        }
        Command::GalleryList => {
            let presets = gallery::list();
            let summary = presets.iter().map(|p| format!("{:<20} {}", p.name, p.rationale)).collect::<Vec<_>>().join("\n");
            Ok(Outcome { json: render(cfg, &presets)?, csv: None, summary, status: 0 })
        }
        Command::GalleryRun { preset, params, refine, strict } => {
            let p = gallery::preset(preset, params)?;
            let run: GalleryRun = gallery::run(&p, &DiagnoseConfig::default(), *refine)?;
            let mut decisions = vec![run.cross.l2.decision, run.cross.l1.decision];
            let mut criteria: Vec<CriterionReport> = run.cross.l2.criteria.clone();
            criteria.extend(run.cross.l1.criteria.iter().cloned());
            let mut summary = format!("{}: expected {:?}\n{}{}", p.name, p.expected, verdict_table(&run.cross.l2), verdict_table(&run.cross.l1));
            if let Some(r) = &run.refined {
                decisions.extend([r.l2.decision, r.l1.decision]);
                criteria.extend(r.l2.criteria.iter().chain(&r.l1.criteria).cloned());
                summary.push_str(&format!("refined:\n{}{}stable: {:?}\n", verdict_table(&r.l2), verdict_table(&r.l1), run.stable));
            }
            summary.push_str(&format!("matches expected: {}\n{DISCLAIMER}", run.matches));
            let status = strict_status(*strict, &decisions);
            Ok(Outcome { json: render(cfg, &run)?, csv: Some(criteria_csv(&criteria)), summary, status })
        }
    }
}
