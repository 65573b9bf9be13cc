//! Turns parsed arguments into a self-contained [`Command`].

use std::path::Path;

use serde::de::DeserializeOwned;
use torsio_core::diagnostics::CriterionId;
use torsio_core::gallery::PresetParams;
use torsio_core::shapeopt::{GaSettings, GridSettings, ShapeObjective};
use torsio_core::torsion::{check_radii, default_radii};
use torsio_core::{Embedding, Expr, Grid};

use crate::args::{CliCommand, EmbeddingArg, GalleryCommand, GridArgs, ModeArg, OutArgs, RadiiArgs};
use crate::config::{Command, Outputs, Rhs};
use crate::error::{CliError, CliResult};

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

fn grid(args: &GridArgs) -> CliResult<Grid> {
    let n = args.bbox.len();
    if n % 2 != 0 || !(2..=6).contains(&n) {
        return Err(CliError::Usage(format!("--box needs 2·dim values (dim 1 to 3), got {n}")));
    }
    let (lo, hi) = args.bbox.split_at(n / 2);
    let g = Grid::new(lo, hi, args.h)?;
    if g.adjusted() {
        eprintln!("warning: h does not divide the box; upper corner moved to {:?}", g.hi());
    }
    Ok(g)
}

fn radii(args: &RadiiArgs, g: &Grid) -> CliResult<Vec<f64>> {
    let r = match &args.radii {
        Some(r) => r.clone(),
        None => default_radii(g, args.radii_count),
    };
    check_radii(g, &r)?;
    Ok(r)
}

fn rhs(spec: &str) -> CliResult<Rhs> {
    if let Some(v) = spec.strip_prefix("const:") {
        let value: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("bad constant in --rhs {spec}")))?;
        Ok(Rhs::Const { value })
    } else if let Some(e) = spec.strip_prefix("expr:") {
        Ok(Rhs::Expr { expr: Expr::parse(e)? })
    } else {
        Err(CliError::Usage(format!("--rhs must be const:<value> or expr:<expression>, got {spec}")))
    }
}

fn criterion(label: &str) -> CliResult<CriterionId> {
    use CriterionId::*;
    [TailSup, L1Norm, TailAbscissa, EveryBall, SomeBall, CubeQuotient]
        .into_iter()
        .find(|c| c.label().eq_ignore_ascii_case(label))
        .ok_or_else(|| CliError::Usage(format!("unknown criterion {label}; expected T3.1, T3.2, 5, 6, 7 or 8")))
}

fn outputs(out: &OutArgs) -> Outputs {
    Outputs { json: out.out.clone(), csv: out.csv.clone() }
}

/// `TORSIO_SEED`, if set and valid.
fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("TORSIO_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| CliError::Usage(format!("TORSIO_SEED={s} is not a u64"))),
        Err(_) => Ok(None),
    }
}

pub fn resolve(cmd: &CliCommand) -> CliResult<(Command, Outputs)> {
    Ok(match cmd {
        CliCommand::Solve { measure, rhs: r, grid: g, tol, max_iter, p, out } => (
            Command::Solve { measure: read_json(measure)?, grid: grid(g)?, rhs: rhs(r)?, tol: *tol, max_iter: *max_iter, p: *p },
            outputs(out),
        ),
        CliCommand::Torsion { measure, grid: g, radii: r, tol, p, out } => {
            let g = grid(g)?;
            let radii = radii(r, &g)?;
            (Command::Torsion { measure: read_json(measure)?, grid: g, radii, tol: *tol, p: *p }, outputs(out))
        }
        CliCommand::Rigidity { measure, grid: g, radii: r, tol, out } => {
            let g = grid(g)?;
            let radii = radii(r, &g)?;
            (Command::Rigidity { measure: read_json(measure)?, grid: g, radii, tol: *tol }, outputs(out))
        }
        CliCommand::Eig { region, grid: g, k, out } => {
            (Command::Eig { region: read_json(region)?, grid: grid(g)?, k: *k }, outputs(out))
        }
        CliCommand::Abscissa { measure, grid: g, out } => {
            (Command::Abscissa { measure: read_json(measure)?, grid: grid(g)? }, outputs(out))
        }
        CliCommand::Probe { criterion: c, measure, grid: g, strict, out } => (
            Command::Probe { criterion: criterion(c)?, measure: read_json(measure)?, grid: grid(g)?, strict: *strict },
            outputs(out),
        ),
        CliCommand::Diagnose { embedding, measure, grid: g, p, refine, strict, out } => {
            let embedding = match embedding {
                EmbeddingArg::L1 => Embedding::L1,
                EmbeddingArg::L2 => Embedding::L2,
            };
            (
                Command::Diagnose {
                    embedding,
                    measure: read_json(measure)?,
                    grid: grid(g)?,
                    p: *p,
                    refine: *refine,
                    strict: *strict,
                },
                outputs(out),
            )
        }
        CliCommand::Optimize { k, m, dim, budget, seed, mode, c, cells_per_diameter, out } => {
            let objective = match mode {
                ModeArg::Product => ShapeObjective::product(*k),
                ModeArg::Constrained => ShapeObjective::constrained(*k, *c),
            };
            let seed = match seed {
                Some(s) => *s,
                None => env_seed()?.unwrap_or(0),
            };
            let ga = GaSettings { budget: *budget, seed, ..GaSettings::default() };
            let grid = GridSettings { cells_per_diameter: *cells_per_diameter, ..GridSettings::default() };
            (Command::Optimize { m: *m, dim: *dim, objective, ga, grid }, outputs(out))
        }
        CliCommand::Gallery { command: GalleryCommand::List { out } } => {
            (Command::GalleryList, Outputs { json: out.clone(), csv: None })
        }
        CliCommand::Gallery {
            command: GalleryCommand::Run { name, refine, strict, h, half_width, exponent, alpha, beta, out },
        } => {
            let params = PresetParams { h: *h, half_width: *half_width, exponent: *exponent, alpha: *alpha, beta: *beta };
            (
                Command::GalleryRun { preset: name.clone(), params, refine: *refine, strict: *strict },
                outputs(out),
            )
        }
        CliCommand::Rerun { .. } => unreachable!("rerun is handled before resolution"),
    })
}
