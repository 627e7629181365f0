use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::json;

use diffuser::diffusion::{
    diffuse, diffusion_coefficients, exact_diffusion, truncation_error_bound, DiffusionConfig,
    EdgeAttention, DENSE_ORACLE_LIMIT,
};
use diffuser::experiments::{
    random_input, run_experiment, ExperimentConfig, ExperimentKind, LayerConfig, NamedPattern,
    PatternSpec, Selection,
};
use diffuser::graph::{build_complete, check_assumption, pattern_stats, read_graph, write_graph, AttentionGraph};
use diffuser::layer::{
    diffuser_layer_forward, grad_check, load_checkpoint, save_checkpoint, LayerParams, LayerShape,
};
use diffuser::numeric::{max_abs, max_abs_diff};
use diffuser::spectral::{
    cheeger_report, expander_report, mixing_tv_curve, normalized_laplacian_spectrum, spectrum,
    Operator, SelfLoops, UndirectedGraph,
};
use diffuser::{io, seed, Error, Matrix};

use crate::args::{
    BenchCmd, Cli, Command, CompareCmd, DiffuseCmd, DiffusionArgs, ExperimentArgs, Format,
    Global, GraphInput, LayerCmd, LayerDims, MixingCmd, OperatorArg, PatternArgs, PatternCmd,
    RobustnessCmd, SpectrumCmd,
};
use crate::error::{usage, CliResult};
use crate::manifest::Manifest;

pub fn run(cli: Cli) -> CliResult<()> {
    let (mut global, command) = match (cli.replay, cli.command) {
        (Some(_), Some(_)) => return Err(usage("--replay takes no subcommand")),
        (None, None) => return Err(usage("a subcommand is required (see --help)")),
        (None, Some(command)) => (cli.global, command),
        (Some(path), None) => {
            let manifest = Manifest::read(&path)?;
            let mut global = manifest.global;
            if cli.global.out_dir.is_some() {
                global.out_dir = cli.global.out_dir;
            }
            (global, manifest.command)
        }
    };
    let command = resolve(command, &global)?;
    global.format = Some(global.format.unwrap_or(default_format(&command)));
    let out_dir = global.out_dir.get_or_insert_with(|| PathBuf::from(".")).clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
        path: out_dir.clone(),
        source: e,
    })?;
    Manifest::new(&global, &command).write(&out_dir)?;
    let ctx = Context {
        seed: global.seed,
        format: global.format.unwrap_or(Format::Json),
        out_dir,
    };
    info!("running {} with seed {}", command.name(), ctx.seed);
    match &command {
        Command::Pattern(c) => pattern(&ctx, c),
        Command::Stats(c) => stats(&ctx, c),
        Command::Check(c) => check(&ctx, c),
        Command::Diffuse(c) => diffuse_cmd(&ctx, c),
        Command::Layer(c) => layer(&ctx, c),
        Command::Spectrum(c) => spectrum_cmd(&ctx, c),
        Command::Expander(c) => expander(&ctx, c),
        Command::Mixing(c) => mixing(&ctx, c),
        Command::Cheeger(c) => cheeger(&ctx, c),
        Command::Robustness(c) => experiment(&ctx, robustness_config(c)?),
        Command::CompareSpectra(c) => experiment(&ctx, compare_config(c)?),
        Command::Bench(c) => experiment(&ctx, bench_config(c)?),
    }
}

struct Context {
    seed: u64,
    format: Format,
    out_dir: PathBuf,
}

impl Context {
    fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn default_format(command: &Command) -> Format {
    match command {
        Command::Spectrum(_) | Command::Mixing(_) | Command::Diffuse(_) => Format::Csv,
        _ => Format::Json,
    }
}

/// Fill every default that depends on other flags, so the manifest records
/// what actually ran.
fn resolve(command: Command, global: &Global) -> CliResult<Command> {
    Ok(match command {
        Command::Layer(mut c) => {
            if c.graph.is_none() && c.n.is_none() {
                return Err(usage("layer needs --graph or --n"));
            }
            c.ff_dim = Some(c.ff_dim.unwrap_or(4 * c.d));
            Command::Layer(c)
        }
        Command::Robustness(mut c) => {
            fill_seeds(&mut c.experiment, global.seed);
            Command::Robustness(c)
        }
        Command::CompareSpectra(mut c) => {
            fill_seeds(&mut c.experiment, global.seed);
            Command::CompareSpectra(c)
        }
        Command::Bench(mut c) => {
            fill_seeds(&mut c.experiment, global.seed);
            Command::Bench(c)
        }
        other => other,
    })
}

fn fill_seeds(args: &mut ExperimentArgs, root: u64) {
    if args.config.is_none() && args.seeds.is_empty() {
        args.seeds.push(root);
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|_| out.flush()).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn load(input: &Path) -> CliResult<AttentionGraph> {
    Ok(read_graph(input)?)
}

fn diffusion_config(args: &DiffusionArgs) -> CliResult<DiffusionConfig> {
    Ok(DiffusionConfig::new(args.alpha, args.steps)?)
}

/// Pattern flags as a declarative spec. With `--block`, global and random
/// budgets count tokens and are spent on whole blocks.
fn pattern_spec(args: &PatternArgs) -> CliResult<PatternSpec> {
    let selection = |what: &str, count: usize| -> CliResult<Selection> {
        match args.block {
            None => Ok(Selection::tokens(count)),
            Some(0) => Err(usage("--block must be positive")),
            Some(b) if count % b != 0 => Err(usage(format!(
                "{what} budget {count} is not a multiple of --block {b}"
            ))),
            Some(b) => Ok(Selection::blocks(count / b, b)),
        }
    };
    let mut spec = PatternSpec::default();
    for part in &args.pattern {
        match part.trim() {
            "local" => spec.window = Some(args.window),
            "global" => spec.global = Some(selection("global", args.global_tokens)?),
            "random" => spec.random = Some(selection("random", args.random_per_token)?),
            "regular" => spec.regular = Some(args.degree),
            "ring" => spec.ring = true,
            "complete" | "full" => spec.complete = true,
            other => {
                return Err(usage(format!(
                    "unknown pattern part {other:?} (expected local, global, random, regular, ring, complete)"
                )))
            }
        }
    }
    Ok(spec)
}

fn emit_stats(ctx: &Context, g: &AttentionGraph) -> CliResult<()> {
    let stats = pattern_stats(g);
    io::write_json(&stats, ctx.path("stats.json"))?;
    match ctx.format {
        Format::Json => print_json(&stats),
        Format::Csv => {
            println!("label,nnz,pct");
            println!("total,{},{}", stats.nnz_total, stats.pct_total);
            for label in diffuser::graph::EdgeLabel::ALL {
                println!(
                    "{},{},{}",
                    label.as_str(),
                    stats.nnz_by_label.get(label),
                    stats.pct_by_label.get(label)
                );
            }
            Ok(())
        }
    }
}

fn pattern(ctx: &Context, c: &PatternCmd) -> CliResult<()> {
    let spec = pattern_spec(&c.pattern)?;
    let g = spec.build(c.n, seed::derive(ctx.seed, "pattern", 0))?;
    write_graph(&g, ctx.path(&c.out))?;
    emit_stats(ctx, &g)
}

fn stats(ctx: &Context, c: &GraphInput) -> CliResult<()> {
    emit_stats(ctx, &load(&c.graph)?)
}

fn check(ctx: &Context, c: &GraphInput) -> CliResult<()> {
    let report = check_assumption(&load(&c.graph)?);
    io::write_json(&report, ctx.path("check.json"))?;
    match ctx.format {
        Format::Json => print_json(&report),
        Format::Csv => {
            println!("has_all_self_loops,is_connected,has_identity_chain");
            println!(
                "{},{},{}",
                report.has_all_self_loops, report.is_connected, report.has_identity_chain
            );
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct DiffuseReport {
    n: usize,
    d: usize,
    alpha: f64,
    steps: usize,
    residual_mass: f64,
    truncation_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_error_vs_oracle: Option<f64>,
}

fn diffuse_cmd(ctx: &Context, c: &DiffuseCmd) -> CliResult<()> {
    let g = load(&c.graph)?;
    let cfg = diffusion_config(&c.diffusion)?;
    let values = match &c.values {
        Some(path) => io::read_matrix(path)?,
        None => random_input(g.n(), c.d, seed::derive(ctx.seed, "values", 0)),
    };
    let attention = EdgeAttention::uniform(&g)?;
    let start = Instant::now();
    let z = diffuse(&attention, &values, &cfg)?;
    info!("diffused {}x{} in {:.3?}", z.nrows(), z.ncols(), start.elapsed());

    let bound = truncation_error_bound(&cfg, max_abs(&values));
    let max_error_vs_oracle = if c.oracle {
        if g.n() > DENSE_ORACLE_LIMIT {
            return Err(usage(format!(
                "--oracle needs n ≤ {DENSE_ORACLE_LIMIT}, got {}",
                g.n()
            )));
        }
        let exact = exact_diffusion(&attention.to_dense(), &values, cfg.alpha())?;
        let err = max_abs_diff(&z, &exact);
        // The bound is attained exactly in some cases; allow rounding.
        let tolerance = bound + 1e-12 * max_abs(&values).max(1.0);
        if err > tolerance {
            return Err(Error::ToleranceBreach {
                what: "diffusion error against the exact operator".into(),
                value: err,
                tolerance,
            }
            .into());
        }
        Some(err)
    } else {
        None
    };

    write_matrix_out(ctx, &c.out, &z)?;
    let report = DiffuseReport {
        n: g.n(),
        d: values.ncols(),
        alpha: cfg.alpha(),
        steps: cfg.steps(),
        residual_mass: diffusion_coefficients(&cfg).residual,
        truncation_bound: bound,
        max_error_vs_oracle,
    };
    io::write_json(&report, ctx.path("diffuse.json"))?;
    print_json(&report)
}

/// Matrices are CSV regardless of `--format`, which only picks the report
/// rendering.
fn write_matrix_out(ctx: &Context, name: &Path, m: &Matrix) -> CliResult<()> {
    Ok(io::write_matrix(m, ctx.path(name))?)
}

fn layer(ctx: &Context, c: &LayerCmd) -> CliResult<()> {
    let g = match &c.graph {
        Some(path) => load(path)?,
        None => build_complete(c.n.expect("resolved"))?,
    };
    if let Some(n) = c.n {
        if n != g.n() {
            return Err(usage(format!("--n {n} does not match the graph's {} tokens", g.n())));
        }
    }
    let cfg = diffusion_config(&c.diffusion)?;
    let shape = LayerShape::new(c.d, c.heads, c.head_dim, c.ff_dim.expect("resolved"))?;
    let params = match &c.params {
        Some(path) => {
            let (params, _) = load_checkpoint(path)?;
            if params.shape()? != shape {
                return Err(usage(format!(
                    "checkpoint shape {:?} differs from the flags {shape:?}",
                    params.shape()?
                )));
            }
            params
        }
        None => {
            let layer_seed = seed::derive(ctx.seed, "layer", 0);
            let params = LayerParams::random(shape, layer_seed);
            save_checkpoint(&params, ctx.path("params"), Some(layer_seed))?;
            params
        }
    };
    let x = match &c.input {
        Some(path) => io::read_matrix(path)?,
        None => random_input(g.n(), c.d, seed::derive(ctx.seed, "input", 0)),
    };
    let y = diffuser_layer_forward(&x, &params, &g, &cfg)?;
    io::write_matrix(&y, ctx.path("output.csv"))?;

    let grad = if c.check_grad {
        let report = grad_check(&params, &g, &cfg, &x, c.eps)?;
        io::write_json(&report, ctx.path("gradcheck.json"))?;
        if report.max_rel_error > c.grad_tolerance {
            return Err(Error::ToleranceBreach {
                what: format!("relative gradient error ({})", report.worst),
                value: report.max_rel_error,
                tolerance: c.grad_tolerance,
            }
            .into());
        }
        Some(report)
    } else {
        None
    };
    let report = json!({
        "n": g.n(),
        "shape": shape,
        "alpha": cfg.alpha(),
        "steps": cfg.steps(),
        "output_max_abs": max_abs(&y),
        "grad_check": grad,
    });
    io::write_json(&report, ctx.path("layer.json"))?;
    print_json(&report)
}

fn operator(arg: OperatorArg) -> Operator {
    match arg {
        OperatorArg::Lap => Operator::NormalizedLaplacian,
        OperatorArg::Adj => Operator::Adjacency,
        OperatorArg::Trans => Operator::Transition,
        OperatorArg::Comb => Operator::Laplacian,
    }
}

fn undirected(g: &AttentionGraph, keep_self_loops: bool) -> UndirectedGraph {
    let loops = if keep_self_loops {
        SelfLoops::Keep
    } else {
        SelfLoops::Drop
    };
    UndirectedGraph::from_attention(g, loops)
}

fn spectrum_cmd(ctx: &Context, c: &SpectrumCmd) -> CliResult<()> {
    let g = undirected(&load(&c.graph)?, c.keep_self_loops);
    let s = spectrum(&g, operator(c.operator))?;
    match ctx.format {
        Format::Csv => {
            let path = ctx.path(c.out.with_extension("csv"));
            write_file(&path, |out| s.write_csv(out))?;
        }
        Format::Json => io::write_json(&s, ctx.path(c.out.with_extension("json")))?,
    }
    let n = s.len();
    let summary = json!({
        "operator": s.operator,
        "n": n,
        "lambda_1": s.lambda(1),
        "lambda_2": if n >= 2 { Some(s.lambda(2)) } else { None },
        "lambda_n": s.lambda(n),
    });
    print_json(&summary)
}

fn expander(ctx: &Context, c: &GraphInput) -> CliResult<()> {
    let g = undirected(&load(&c.graph)?, false);
    let report = expander_report(&g)?;
    io::write_json(&report, ctx.path("expander.json"))?;
    print_json(&report)
}

fn mixing(ctx: &Context, c: &MixingCmd) -> CliResult<()> {
    let g = undirected(&load(&c.graph)?, false);
    if c.start >= g.n() {
        return Err(usage(format!("--start {} is outside 0..{}", c.start, g.n())));
    }
    let mut v0 = vec![0.0; g.n()];
    v0[c.start] = 1.0;
    let curve = mixing_tv_curve(&g, &v0, c.tmax)?;
    match ctx.format {
        Format::Csv => write_file(&ctx.path("mixing.csv"), |out| {
            writeln!(out, "t,distance,bound")?;
            for p in &curve.points {
                writeln!(out, "{},{},{}", p.t, p.distance, p.bound)?;
            }
            Ok(())
        })?,
        Format::Json => io::write_json(&curve, ctx.path("mixing.json"))?,
    }
    let last = curve.points.last();
    print_json(&json!({
        "n": curve.n,
        "d": curve.d,
        "beta": curve.beta,
        "tmax": c.tmax,
        "final_distance": last.map(|p| p.distance),
        "final_bound": last.map(|p| p.bound),
    }))
}

fn cheeger(ctx: &Context, c: &GraphInput) -> CliResult<()> {
    let g = undirected(&load(&c.graph)?, false);
    let report = cheeger_report(&g)?;
    let normalized_lambda2 = normalized_laplacian_spectrum(&g)?.lambda(2);
    io::write_json(
        &json!({"cheeger": &report, "normalized_lambda2": normalized_lambda2}),
        ctx.path("cheeger.json"),
    )?;
    println!(
        "h={} bounds {} ≤ {} ≤ {} (laplacian λ₂={}, normalized λ₂={}, d={})",
        report.h,
        report.lower,
        report.h,
        report.upper,
        report.laplacian_lambda2,
        normalized_lambda2,
        report.d
    );
    if !report.holds {
        return Err(Error::ToleranceBreach {
            what: "Cheeger bound violation".into(),
            value: report.h,
            tolerance: report.upper,
        }
        .into());
    }
    Ok(())
}

fn layer_config(dims: &LayerDims) -> LayerConfig {
    LayerConfig {
        d: dims.d,
        h: dims.heads,
        m: dims.head_dim,
        r_ff: dims.ff_dim,
    }
}

fn config_file(path: &Path, kinds: &[ExperimentKind]) -> CliResult<ExperimentConfig> {
    let cfg = ExperimentConfig::from_path(path)?;
    if !kinds.contains(&cfg.experiment) {
        return Err(usage(format!(
            "{} runs {:?}, not the config's {:?}",
            path.display(),
            kinds,
            cfg.experiment
        )));
    }
    Ok(cfg)
}

fn robustness_config(c: &RobustnessCmd) -> CliResult<ExperimentConfig> {
    if let Some(path) = &c.experiment.config {
        return config_file(path, &[ExperimentKind::RollRobustness]);
    }
    let mut cfg = ExperimentConfig::new(ExperimentKind::RollRobustness, c.n);
    cfg.pattern = pattern_spec(&c.pattern)?;
    cfg.layer = layer_config(&c.layer);
    cfg.alpha = c.diffusion.alpha;
    cfg.steps = c.diffusion.steps;
    cfg.shifts = c.shifts.clone();
    cfg.seeds = c.experiment.seeds.clone();
    Ok(cfg)
}

fn compare_config(c: &CompareCmd) -> CliResult<ExperimentConfig> {
    if let Some(path) = &c.experiment.config {
        return config_file(path, &[ExperimentKind::CompareSpectra]);
    }
    let mut cfg = ExperimentConfig::new(ExperimentKind::CompareSpectra, c.n);
    for name in &c.presets {
        let spec = PatternSpec::preset(name, c.window, c.global_tokens, c.random_per_token, c.block)?;
        cfg.patterns.push(NamedPattern::new(name, spec));
    }
    cfg.seeds = c.experiment.seeds.clone();
    Ok(cfg)
}

fn bench_config(c: &BenchCmd) -> CliResult<ExperimentConfig> {
    if let Some(path) = &c.experiment.config {
        return config_file(path, &[ExperimentKind::Bench, ExperimentKind::Sparsity]);
    }
    let mut cfg = ExperimentConfig::new(ExperimentKind::Bench, c.n);
    cfg.pattern = pattern_spec(&c.pattern)?;
    cfg.alpha = c.diffusion.alpha;
    cfg.steps = c.diffusion.steps;
    cfg.value_dim = c.value_dim;
    cfg.reps = c.reps;
    cfg.seeds = c.experiment.seeds.clone();
    Ok(cfg)
}

fn experiment(ctx: &Context, config: ExperimentConfig) -> CliResult<()> {
    io::write_json(&config, ctx.path("config.json"))?;
    let report = run_experiment(&config, &ctx.out_dir)?;
    match ctx.format {
        Format::Json => print_json(&json!({
            "experiment": report.experiment,
            "aggregate": report.aggregate,
        })),
        Format::Csv => {
            let stdout = std::io::stdout();
            report
                .write_trials_csv(stdout.lock())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })?;
            Ok(())
        }
    }
}
