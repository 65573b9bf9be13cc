use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "torsio", version, about = "Torsion functions, spectra and compactness diagnostics for measure potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Bounding box as `lo_1,..,lo_d,hi_1,..,hi_d`.
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub bbox: Vec<f64>,
    /// Cell spacing.
    #[arg(long)]
    pub h: f64,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutArgs {
    /// JSON artifact path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV dump path (field, profile or trace, depending on the command).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct RadiiArgs {
    /// Exhaustion radii, increasing.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Number of geometric radii ending at 0.9 × inradius, used without `--radii`.
    #[arg(long, default_value_t = 5)]
    pub radii_count: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingArg {
    L1,
    L2,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Product,
    Constrained,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Solve −Δu + u + μu = f (or the p-Laplacian analogue).
    Solve {
        /// MeasureSpec JSON file.
        #[arg(long)]
        measure: PathBuf,
        /// Right-hand side: `const:<value>` or `expr:<expression>`.
        #[arg(long, default_value = "const:1")]
        rhs: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Relative residual target of the linear solver.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// CG iteration cap.
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        /// p-Laplacian exponent.
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Torsion function by exhaustion over balls.
    Torsion {
        /// MeasureSpec JSON file.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        radii: RadiiArgs,
        /// Relative residual target of the linear solver.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// p-Laplacian exponent in (1, 10]; linear problem when omitted.
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Torsional rigidity by exhaustion over balls.
    Rigidity {
        /// MeasureSpec JSON file.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        radii: RadiiArgs,
        /// Relative residual target of the linear solver.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Dirichlet Laplacian eigenvalues of a region.
    Eig {
        /// Region JSON file.
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Number of eigenvalues.
        #[arg(short, default_value_t = 4)]
        k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Spectral abscissa of −Δ + 1 + μ.
    Abscissa {
        /// MeasureSpec JSON file.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evaluate one compactness criterion (T3.1, T3.2, 5, 6, 7 or 8).
    Probe {
        /// Criterion label.
        #[arg(long)]
        criterion: String,
        /// MeasureSpec JSON file.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Exit with 4 on an inconclusive decision.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Decide compactness of the embedding into L² or L¹.
    Diagnose {
        /// Target space of the embedding.
        #[arg(long, value_enum, default_value = "l2")]
        embedding: EmbeddingArg,
        /// MeasureSpec JSON file.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// p-Laplacian exponent in (1, 10]; linear problem when omitted.
        #[arg(long)]
        p: Option<f64>,
        /// Also run at h/2 on the doubled box and report stability.
        #[arg(long)]
        refine: bool,
        /// Exit with 4 on an inconclusive decision.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Minimize the k-th Dirichlet eigenvalue over unions of m balls.
    Optimize {
        /// Index of the eigenvalue to minimize.
        #[arg(short, default_value_t = 2)]
        k: usize,
        /// Number of balls.
        #[arg(short, default_value_t = 2)]
        m: usize,
        /// Space dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Objective evaluations.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        /// Defaults to TORSIO_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Scale-free product or fixed rigidity.
        #[arg(long, value_enum, default_value = "product")]
        mode: ModeArg,
        /// Target rigidity in constrained mode.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Grid cells across the largest ball.
        #[arg(long, default_value_t = 64)]
        cells_per_diameter: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Named measures with known compactness behaviour.
    Gallery {
        #[command(subcommand)]
        command: GalleryCommand,
    },
    /// Re-execute the command recorded in an artifact.
    Rerun {
        /// JSON artifact written by an earlier run.
        artifact: PathBuf,
        /// Write outputs under this directory instead of the recorded paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GalleryCommand {
    /// Print every preset with its expected decisions.
    List {
        /// JSON artifact path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diagnose a preset in both embeddings.
    Run {
        /// Preset name (see `gallery list`).
        name: String,
        /// Also run at h/2 on the doubled box and report stability.
        #[arg(long)]
        refine: bool,
        /// Exit with 4 on an inconclusive decision.
        #[arg(long)]
        strict: bool,
        /// Cell spacing override.
        #[arg(long)]
        h: Option<f64>,
        /// Box half-width override.
        #[arg(long)]
        half_width: Option<f64>,
        /// Slit exponent of slit_strip_tuned.
        #[arg(long)]
        exponent: Option<f64>,
        /// First exponent of axes_potential.
        #[arg(long)]
        alpha: Option<f64>,
        /// Second exponent of axes_potential.
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
}
