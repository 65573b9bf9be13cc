//! Fully resolved invocation, embedded in every artifact.
//!
//! Inputs read from files (measures, regions) are stored by value, so an
//! artifact can be replayed without them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use torsio_core::diagnostics::CriterionId;
use torsio_core::gallery::PresetParams;
use torsio_core::shapeopt::{GaSettings, GridSettings, ShapeObjective};
use torsio_core::{Embedding, Expr, Grid, MeasureSpec, Region};

pub const TOOL: &str = "torsio";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rhs {
    Const { value: f64 },
    Expr { expr: Expr },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    Solve { measure: MeasureSpec, grid: Grid, rhs: Rhs, tol: f64, max_iter: usize, p: Option<f64> },
    Torsion { measure: MeasureSpec, grid: Grid, radii: Vec<f64>, tol: f64, p: Option<f64> },
    Rigidity { measure: MeasureSpec, grid: Grid, radii: Vec<f64>, tol: f64 },
    Eig { region: Region, grid: Grid, k: usize },
    Abscissa { measure: MeasureSpec, grid: Grid },
    Probe { criterion: CriterionId, measure: MeasureSpec, grid: Grid, strict: bool },
    Diagnose { embedding: Embedding, measure: MeasureSpec, grid: Grid, p: Option<f64>, refine: bool, strict: bool },
    Optimize { m: usize, dim: usize, objective: ShapeObjective, ga: GaSettings, grid: GridSettings },
    GalleryList,
    GalleryRun { preset: String, params: PresetParams, refine: bool, strict: bool },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Outputs {
    /// Same file names under `dir`.
    pub fn rebased(&self, dir: &Path) -> Outputs {
        let rebase = |p: &Option<PathBuf>| p.as_ref().and_then(|p| p.file_name()).map(|f| dir.join(f));
        Outputs { json: rebase(&self.json), csv: rebase(&self.csv) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    /// Worker threads (TORSIO_THREADS, else the hardware parallelism).
    pub threads: usize,
    pub command: Command,
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn new(command: Command, outputs: Outputs, threads: usize) -> RunConfig {
        RunConfig { tool: TOOL.into(), version: VERSION.into(), threads, command, outputs }
    }
}

/// A JSON artifact: reproducibility header plus result.
#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub run_config: RunConfig,
    pub result: T,
}
