use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "diffuser", version, about = "Sparse attention diffusion: patterns, layers, spectra, experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    /// Re-run the invocation recorded in a manifest.json. Only `--out-dir`
    /// may override it.
    #[arg(long, value_name = "MANIFEST")]
    pub replay: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct Global {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory for outputs and manifest.json.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Format of tabular results (default depends on the command).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build an attention pattern and write it with its statistics.
    Pattern(PatternCmd),
    /// Non-zero counts of a graph file, per attention type.
    Stats(GraphInput),
    /// Self loops, connectivity and token-order chain of a graph file.
    Check(GraphInput),
    /// Diffuse values over uniform attention on a graph.
    Diffuse(DiffuseCmd),
    /// Run one attention-diffusion layer, optionally checking gradients.
    Layer(LayerCmd),
    /// Eigenvalues of a graph operator.
    Spectrum(SpectrumCmd),
    /// Adjacency expansion, spectral gap and Cheeger bounds.
    Expander(GraphInput),
    /// Random-walk distance to uniform against √n βᵗ.
    Mixing(MixingCmd),
    /// Exact edge expansion of a small graph with its Cheeger bounds.
    Cheeger(GraphInput),
    /// Roll-equivariance deviation of a layer on a pattern.
    Robustness(RobustnessCmd),
    /// Normalized-Laplacian spectra of several patterns.
    CompareSpectra(CompareCmd),
    /// Storage and wall time of sparse against dense diffusion. A config
    /// file may instead ask for the sparsity table.
    Bench(BenchCmd),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pattern(_) => "pattern",
            Command::Stats(_) => "stats",
            Command::Check(_) => "check",
            Command::Diffuse(_) => "diffuse",
            Command::Layer(_) => "layer",
            Command::Spectrum(_) => "spectrum",
            Command::Expander(_) => "expander",
            Command::Mixing(_) => "mixing",
            Command::Cheeger(_) => "cheeger",
            Command::Robustness(_) => "robustness",
            Command::CompareSpectra(_) => "compare-spectra",
            Command::Bench(_) => "bench",
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PatternArgs {
    /// Comma-separated parts: local, global, random, ring, regular, complete.
    #[arg(long, value_delimiter = ',', default_value = "local,global,random")]
    pub pattern: Vec<String>,

    /// Local window size w (w/2 keys per side).
    #[arg(long, default_value_t = 64)]
    pub window: usize,

    /// Global tokens g.
    #[arg(long, default_value_t = 64)]
    pub global_tokens: usize,

    /// Random keys per query r.
    #[arg(long, default_value_t = 64)]
    pub random_per_token: usize,

    /// Select global and random attention in blocks of this many tokens.
    #[arg(long)]
    pub block: Option<usize>,

    /// Degree of the random regular graph.
    #[arg(long, default_value_t = 8)]
    pub degree: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PatternCmd {
    /// Sequence length.
    #[arg(long)]
    pub n: usize,

    #[command(flatten)]
    pub pattern: PatternArgs,

    /// Graph file, relative to the output directory; `.bin` selects the
    /// binary format.
    #[arg(long, default_value = "graph.json")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GraphInput {
    /// Graph file written by `pattern`.
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DiffusionArgs {
    /// Teleport probability α.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,

    /// Diffusion steps K.
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DiffuseCmd {
    #[arg(long)]
    pub graph: PathBuf,

    #[command(flatten)]
    pub diffusion: DiffusionArgs,

    /// Values CSV (`n,d` header line); random standard normal if absent.
    #[arg(long)]
    pub values: Option<PathBuf>,

    /// Width of random values.
    #[arg(long, default_value_t = 8)]
    pub d: usize,

    /// Compare with the exact resolvent (n ≤ 1024) and fail above the
    /// truncation bound.
    #[arg(long)]
    pub oracle: bool,

    /// Output CSV, relative to the output directory.
    #[arg(long, default_value = "diffused.csv")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LayerCmd {
    /// Graph file; without one the layer attends over the complete graph
    /// on `--n` tokens.
    #[arg(long)]
    pub graph: Option<PathBuf>,

    /// Sequence length (checked against the graph when both are given).
    #[arg(long)]
    pub n: Option<usize>,

    /// Model width.
    #[arg(long, default_value_t = 16)]
    pub d: usize,

    #[arg(long, default_value_t = 2)]
    pub heads: usize,

    #[arg(long, default_value_t = 8)]
    pub head_dim: usize,

    /// Feed-forward hidden width (default 4d).
    #[arg(long)]
    pub ff_dim: Option<usize>,

    #[command(flatten)]
    pub diffusion: DiffusionArgs,

    /// Input CSV; random standard normal if absent.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Checkpoint manifest; fresh seeded weights are drawn and saved if
    /// absent.
    #[arg(long)]
    pub params: Option<PathBuf>,

    /// Check gradients against central differences (n ≤ 64).
    #[arg(long)]
    pub check_grad: bool,

    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,

    /// Largest relative gradient error accepted.
    #[arg(long, default_value_t = 1e-4)]
    pub grad_tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorArg {
    /// Normalized Laplacian.
    Lap,
    /// Adjacency.
    Adj,
    /// Random-walk transition.
    Trans,
    /// Combinatorial Laplacian D - A.
    Comb,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SpectrumCmd {
    #[arg(long)]
    pub graph: PathBuf,

    #[arg(long, value_enum, default_value_t = OperatorArg::Lap)]
    pub operator: OperatorArg,

    /// Keep self loops when symmetrizing.
    #[arg(long)]
    pub keep_self_loops: bool,

    /// Output file stem, relative to the output directory.
    #[arg(long, default_value = "spectrum")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct MixingCmd {
    #[arg(long)]
    pub graph: PathBuf,

    /// Largest walk length.
    #[arg(long, default_value_t = 50)]
    pub tmax: usize,

    /// Start node of the walk.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LayerDims {
    #[arg(long, default_value_t = 16)]
    pub d: usize,

    #[arg(long, default_value_t = 2)]
    pub heads: usize,

    #[arg(long, default_value_t = 8)]
    pub head_dim: usize,

    #[arg(long, default_value_t = 32)]
    pub ff_dim: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    /// Experiment config JSON; replaces every other experiment flag.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Trial seeds (default: the root seed).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct RobustnessCmd {
    #[command(flatten)]
    pub experiment: ExperimentArgs,

    #[arg(long, default_value_t = 256)]
    pub n: usize,

    #[command(flatten)]
    pub pattern: PatternArgs,

    #[command(flatten)]
    pub layer: LayerDims,

    #[command(flatten)]
    pub diffusion: DiffusionArgs,

    /// Row shifts, each below n.
    #[arg(long, value_delimiter = ',', default_value = "1,7,64")]
    pub shifts: Vec<usize>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CompareCmd {
    #[command(flatten)]
    pub experiment: ExperimentArgs,

    #[arg(long, default_value_t = 512)]
    pub n: usize,

    /// Presets to compare: diffuser, longformer, bigbird, complete.
    #[arg(long, value_delimiter = ',', default_value = "diffuser,longformer,bigbird")]
    pub presets: Vec<String>,

    /// Window budget w shared by the presets.
    #[arg(long, default_value_t = 16)]
    pub window: usize,

    /// Global token budget g.
    #[arg(long, default_value_t = 16)]
    pub global_tokens: usize,

    /// Random token budget r.
    #[arg(long, default_value_t = 16)]
    pub random_per_token: usize,

    /// Block size of the block-wise presets.
    #[arg(long, default_value_t = 8)]
    pub block: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct BenchCmd {
    #[command(flatten)]
    pub experiment: ExperimentArgs,

    #[arg(long, default_value_t = 1024)]
    pub n: usize,

    #[command(flatten)]
    pub pattern: PatternArgs,

    #[command(flatten)]
    pub diffusion: DiffusionArgs,

    /// Width of the diffused values.
    #[arg(long, default_value_t = 64)]
    pub value_dim: usize,

    /// Timed repetitions (median reported), at least 3.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}
