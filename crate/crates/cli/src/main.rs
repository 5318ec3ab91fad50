//! `villain` — command-line driver for the lattice gauge toolkit: complex
//! structure reports, Wilson-loop Monte Carlo against exact heat-kernel
//! expectations, renormalized-product chain checks, projection-kernel
//! quadrature with a persistent cache, and correlation decay experiments
//! with CSV/JSON/SVG output.
//!
//! Every invocation produces a [`record::ResultRecord`]; `--json` prints it
//! on stdout. Validation failures exit with code 2 and a structured JSON
//! error on stderr; tolerance failures (e.g. Monte Carlo disagreeing with
//! the closed form beyond 3σ) exit with code 1.

mod cache;
mod record;
mod svg;

use cache::{cache_key, Cache, CacheError, PiCacheRecord};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use record::{atomic_write, csv_document, quote_field, ResultRecord};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use villain_core::complex::coboundary_matrix;
use villain_core::correlation::{
    decay_series, fit_power_law, marginal_mc_two_point, o_from_parts,
};
use villain_core::gauge::{GaugeComplexData, InnerProductSpec};
use villain_core::multiplier::pi_entry;
use villain_core::renorm::{coisometry_residual, renormalize_chain, ComplexChain};
use villain_core::{linalg, Cell, Error as CoreError, LatticeBox, TorusGroup};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(CoreError::Domain(_)) => "domain",
            CliError::Core(CoreError::Precision { .. }) => "precision",
            CliError::Core(CoreError::Integrity(_)) => "integrity",
            CliError::Io(_) => "io",
            CliError::Invalid(_) => "invalid-arguments",
            CliError::Cache(CacheError::LockTimeout(_)) => "retryable",
            CliError::Cache(CacheError::Io(_)) => "io",
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "villain",
    version,
    about = "Lattice gauge heat-kernel measures, projection kernels, and correlation decay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// RNG seed; echoed into every output for auditability
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for grid sweeps (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write tabular output (CSV with a `# key: value` preamble) here
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write an SVG log-log plot here (decay series only)
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    /// Print the full result record as JSON on stdout
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact Wilson expectation vs Monte Carlo on a box complex
    Wilson(WilsonArgs),
    /// Draw gauge-field samples from the heat measure
    Sample(SampleArgs),
    /// Cell complex reports
    Complex {
        #[command(subcommand)]
        sub: ComplexCmd,
    },
    /// Renormalized inner products along a chain of boxes
    Renorm {
        #[command(subcommand)]
        sub: RenormCmd,
    },
    /// Projection-kernel entries (cached quadrature)
    Multiplier {
        #[command(subcommand)]
        sub: MultiplierCmd,
    },
    /// Connected two-point functions and decay series
    Correlation {
        #[command(subcommand)]
        sub: CorrelationCmd,
    },
}

#[derive(Subcommand, Debug)]
enum ComplexCmd {
    /// Cell counts, coboundary ranks, exactness, and image saturation
    Info(ComplexInfoArgs),
}

#[derive(Subcommand, Debug)]
enum RenormCmd {
    /// Per-stage co-isometry and heat-measure consistency residuals
    Check(RenormCheckArgs),
}

#[derive(Subcommand, Debug)]
enum MultiplierCmd {
    /// One kernel entry <delta_p, Pi delta_q> by grid quadrature
    #[command(name = "pi-entry")]
    PiEntry(PiEntryArgs),
}

#[derive(Subcommand, Debug)]
enum CorrelationCmd {
    /// Connected correlation of two plaquette observables
    Twopoint(TwopointArgs),
    /// Correlation along a lattice axis with power-law fit
    Decay(DecayArgs),
}

#[derive(Args, Debug)]
struct WilsonArgs {
    /// Lattice dimension
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Box side lengths, comma-separated (default: unit box)
    #[arg(long = "box", value_delimiter = ',', value_name = "SIDES")]
    box_sides: Option<Vec<u32>>,
    /// Inverse temperature
    #[arg(long)]
    beta: f64,
    /// Plaquette as base:dirs with zero-based axes, e.g. 0,0,0:0,1
    #[arg(long)]
    cell: Option<String>,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long = "box", value_delimiter = ',', value_name = "SIDES")]
    box_sides: Option<Vec<u32>>,
    #[arg(long)]
    beta: f64,
    /// Number of gauge-field samples to draw
    #[arg(long, default_value_t = 10)]
    n: usize,
}

#[derive(Args, Debug)]
struct ComplexInfoArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long = "box", value_delimiter = ',', value_name = "SIDES")]
    box_sides: Option<Vec<u32>>,
}

#[derive(Args, Debug)]
struct RenormCheckArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Chain of nested cube sides, e.g. 1,2,3 (alias: demo-d3)
    #[arg(long, default_value = "demo-d3")]
    chain: String,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Random characters per stage for the measure-consistency check
    #[arg(long = "num-chars", default_value_t = 100)]
    num_chars: usize,
}

#[derive(Args, Debug)]
struct PiEntryArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Base-point offset of the second cell, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    offset: Vec<i64>,
    /// Plane (two zero-based axes) of the first cell
    #[arg(long, value_delimiter = ',', default_values_t = [0u8, 1])]
    plane: Vec<u8>,
    /// Plane of the second cell (default: same as --plane)
    #[arg(long = "plane-q", value_delimiter = ',')]
    plane_q: Option<Vec<u8>>,
    /// Quadrature grid points per axis (even, >= 4)
    #[arg(long, default_value_t = 256)]
    grid: usize,
}

#[derive(Args, Debug)]
struct TwopointArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long)]
    beta: f64,
    /// First plaquette as base:dirs (e.g. 0,0,0:0,1)
    #[arg(long)]
    p: String,
    /// Second plaquette as base:dirs
    #[arg(long)]
    q: String,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Also run the marginal Monte Carlo cross-check with this many samples
    #[arg(long = "mc-samples")]
    mc_samples: Option<usize>,
}

#[derive(Args, Debug)]
struct DecayArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Separations to evaluate, comma-separated
    #[arg(long, value_delimiter = ',', default_values_t = [8u32, 12, 16, 24, 32, 48, 64])]
    ns: Vec<u32>,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// Plane (two zero-based axes) of both cells
    #[arg(long, value_delimiter = ',', default_values_t = [0u8, 1])]
    plane: Vec<u8>,
    /// Zero-based translation axis
    #[arg(long, default_value_t = 0)]
    axis: usize,
}

/// What a handler hands back to `main` for packaging into a result record.
struct RunOutput {
    command: String,
    config: serde_json::Value,
    outputs: serde_json::Value,
    ok: bool,
    cache_hits: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(out) => {
            let ok = out.ok;
            let rec = ResultRecord {
                command: out.command,
                config: out.config,
                outputs: out.outputs,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                cache_hits: out.cache_hits,
            };
            if cli.common.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&rec).expect("record serializes")
                );
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_string(), "kind": e.kind() }));
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<RunOutput, CliError> {
    match &cli.command {
        Command::Wilson(args) => cmd_wilson(args, &cli.common),
        Command::Sample(args) => cmd_sample(args, &cli.common),
        Command::Complex {
            sub: ComplexCmd::Info(args),
        } => cmd_complex_info(args, &cli.common),
        Command::Renorm {
            sub: RenormCmd::Check(args),
        } => cmd_renorm_check(args, &cli.common),
        Command::Multiplier {
            sub: MultiplierCmd::PiEntry(args),
        } => cmd_pi_entry(args, &cli.common),
        Command::Correlation { sub } => match sub {
            CorrelationCmd::Twopoint(args) => cmd_twopoint(args, &cli.common),
            CorrelationCmd::Decay(args) => cmd_decay(args, &cli.common),
        },
    }
}

// ---------------------------------------------------------------- parsing

fn make_box(dim: usize, sides: &Option<Vec<u32>>) -> Result<LatticeBox, CliError> {
    let sides = sides.clone().unwrap_or_else(|| vec![1; dim]);
    if sides.len() != dim {
        return Err(CliError::Invalid(format!(
            "--box needs {dim} comma-separated sides, got {}",
            sides.len()
        )));
    }
    if sides.contains(&0) {
        return Err(CliError::Invalid("box sides must be positive".into()));
    }
    LatticeBox::new(vec![0; dim], sides).map_err(Into::into)
}

fn parse_cell(spec: &str, dim: usize) -> Result<Cell, CliError> {
    let (base_s, dirs_s) = spec.split_once(':').ok_or_else(|| {
        CliError::Invalid(format!(
            "cell '{spec}' must look like base:dirs, e.g. 0,0,0:0,1"
        ))
    })?;
    let base: Vec<i64> = base_s
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Invalid(format!("cell base in '{spec}': {e}")))?;
    let dirs: Vec<u8> = dirs_s
        .split(',')
        .map(|t| t.trim().parse::<u8>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Invalid(format!("cell dirs in '{spec}': {e}")))?;
    if base.len() != dim {
        return Err(CliError::Invalid(format!(
            "cell base must have {dim} coordinates, got {}",
            base.len()
        )));
    }
    Ok(Cell::new(base, dirs)?)
}

fn format_cell(cell: &Cell) -> String {
    let base = cell
        .base()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let dirs = cell
        .dirs()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!("{base}:{dirs}")
}

fn validate_plane(plane: &[u8], dim: usize) -> Result<Vec<u8>, CliError> {
    if plane.len() != 2 || plane[0] >= plane[1] || plane[1] as usize >= dim {
        return Err(CliError::Invalid(format!(
            "plane must be two increasing zero-based axes below {dim}, got {plane:?}"
        )));
    }
    Ok(plane.to_vec())
}

fn common_echo(c: &Common) -> Vec<(String, String)> {
    vec![
        ("seed".into(), c.seed.to_string()),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
    ]
}

fn write_csv_if_requested(
    c: &Common,
    echo: &[(String, String)],
    header: &str,
    rows: &[String],
) -> Result<(), CliError> {
    if let Some(path) = &c.out {
        atomic_write(path, csv_document(echo, header, rows).as_bytes())?;
    }
    Ok(())
}

// --------------------------------------------------------------- handlers

fn cmd_wilson(args: &WilsonArgs, c: &Common) -> Result<RunOutput, CliError> {
    let bx = make_box(args.dim, &args.box_sides)?;
    let cell = match &args.cell {
        Some(spec) => parse_cell(spec, args.dim)?,
        None => Cell::new(vec![0; args.dim], vec![0, 1])?,
    };
    let g = GaugeComplexData::build(&bx, &InnerProductSpec::Euclidean)?;
    let exact = g.exact_wilson_expectation(args.beta, &cell)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (mean, stderr) = g.mc_wilson(args.beta, &cell, args.samples, &mut rng)?;
    let ok = (mean - exact).norm() <= 3.0 * stderr;
    let cell_str = format_cell(&cell);
    let config = json!({
        "dim": args.dim, "box": bx.sides(), "beta": args.beta,
        "cell": cell_str, "samples": args.samples, "seed": c.seed,
    });
    let outputs = json!({
        "exact": exact,
        "mc_mean_re": mean.re,
        "mc_mean_im": mean.im,
        "mc_stderr": stderr,
        "within_3_sigma": ok,
    });
    let mut echo = common_echo(c);
    for (k, v) in [
        ("beta", args.beta.to_string()),
        ("cell", cell_str.clone()),
        ("samples", args.samples.to_string()),
    ] {
        echo.push((k.into(), v));
    }
    write_csv_if_requested(
        c,
        &echo,
        "beta,cell,exact,mc_mean,mc_stderr",
        &[format!(
            "{},{},{},{},{}",
            args.beta,
            quote_field(&cell_str),
            exact,
            mean.re,
            stderr
        )],
    )?;
    if !c.json {
        println!(
            "exact = {exact:.9}; mc = {:.9} + {:.2e}i ± {:.3e} ({})",
            mean.re,
            mean.im,
            stderr,
            if ok { "within 3 sigma" } else { "OUTSIDE 3 sigma" }
        );
    }
    Ok(RunOutput {
        command: "villain-wilson".into(),
        config,
        outputs,
        ok,
        cache_hits: 0,
    })
}

fn cmd_sample(args: &SampleArgs, c: &Common) -> Result<RunOutput, CliError> {
    let bx = make_box(args.dim, &args.box_sides)?;
    let g = GaugeComplexData::build(&bx, &InnerProductSpec::Euclidean)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = Vec::with_capacity(args.n);
    let mut first = Vec::new();
    for i in 0..args.n {
        let class = g.sample_gauge_class(args.beta, &mut rng)?;
        if i == 0 {
            first = class.rep().to_vec();
        }
        let joined = class
            .rep()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        rows.push(format!("{i},{joined}"));
    }
    let header = std::iter::once("sample".to_string())
        .chain((0..g.edge_count()).map(|i| format!("edge_{i}")))
        .collect::<Vec<_>>()
        .join(",");
    let mut echo = common_echo(c);
    echo.push(("beta".into(), args.beta.to_string()));
    echo.push(("n".into(), args.n.to_string()));
    write_csv_if_requested(c, &echo, &header, &rows)?;
    if !c.json {
        println!(
            "drew {} samples of {} edge angles each",
            args.n,
            g.edge_count()
        );
    }
    Ok(RunOutput {
        command: "villain-sample".into(),
        config: json!({
            "dim": args.dim, "box": bx.sides(), "beta": args.beta,
            "n": args.n, "seed": c.seed,
        }),
        outputs: json!({
            "num_samples": args.n,
            "edge_count": g.edge_count(),
            "first_sample": first,
        }),
        ok: true,
        cache_hits: 0,
    })
}

fn cmd_complex_info(args: &ComplexInfoArgs, c: &Common) -> Result<RunOutput, CliError> {
    let bx = make_box(args.dim, &args.box_sides)?;
    let d = args.dim;
    let counts: Vec<u64> = (0..=d).map(|k| bx.cell_count(k)).collect::<Result<_, _>>()?;
    let mats: Vec<_> = (0..d)
        .map(|k| coboundary_matrix(&bx, k))
        .collect::<Result<_, _>>()?;
    let mut dd_zero = true;
    for k in 0..d.saturating_sub(1) {
        dd_zero &= mats[k + 1].mul(&mats[k])?.is_zero();
    }
    let ranks: Vec<usize> = mats
        .iter()
        .map(|m| linalg::rank(&m.to_f64(), linalg::RANK_REL_TOL))
        .collect();
    let connected = counts[0] as usize - ranks[0] == 1;
    let exact_at: Vec<bool> = (1..d)
        .map(|k| counts[k] as usize - ranks[k] == ranks[k - 1])
        .collect();
    let saturated = villain_core::complex::image_lattice(&mats[1]).is_ok();
    let ok = dd_zero && saturated && connected && exact_at.iter().all(|&b| b);
    let rows: Vec<String> = (0..=d)
        .map(|k| {
            let rank = if k < d {
                ranks[k].to_string()
            } else {
                String::new()
            };
            format!("{k},{},{rank}", counts[k])
        })
        .collect();
    write_csv_if_requested(c, &common_echo(c), "k,cells,rank_dk", &rows)?;
    if !c.json {
        println!(
            "cells {counts:?}; ranks {ranks:?}; d∘d=0: {dd_zero}; exact: {exact_at:?}; saturated image: {saturated}"
        );
    }
    Ok(RunOutput {
        command: "complex-info".into(),
        config: json!({ "dim": d, "box": bx.sides(), "seed": c.seed }),
        outputs: json!({
            "cells": counts,
            "ranks": ranks,
            "dd_zero": dd_zero,
            "connected": connected,
            "exact_at": exact_at,
            "saturated": saturated,
        }),
        ok,
        cache_hits: 0,
    })
}

fn cmd_renorm_check(args: &RenormCheckArgs, c: &Common) -> Result<RunOutput, CliError> {
    const TOL: f64 = 1e-10;
    let sides: Vec<u32> = if args.chain == "demo-d3" {
        vec![1, 2, 3]
    } else {
        args.chain
            .split(',')
            .map(|t| t.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Invalid(format!("--chain: {e}")))?
    };
    if sides.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Invalid(
            "--chain sides must be strictly increasing".into(),
        ));
    }
    let boxes: Vec<LatticeBox> = sides.iter().map(|&s| LatticeBox::cube(args.dim, s)).collect();
    let chain = ComplexChain::restriction(boxes, &InnerProductSpec::Euclidean)?;
    let grams = renormalize_chain(&chain)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut stages = Vec::new();
    let mut rows = Vec::new();
    let mut ok = true;
    for (i, map) in chain.maps().iter().enumerate() {
        let co = coisometry_residual(
            &grams.grams()[i],
            &grams.grams()[i + 1],
            &map.to_f64(),
        )?;
        let coarse = TorusGroup::new(grams.grams()[i].clone())?;
        let fine = TorusGroup::new(grams.grams()[i + 1].clone())?;
        let pt = map.transpose();
        let mut ft: f64 = 0.0;
        for _ in 0..args.num_chars {
            let xi: Vec<i64> = (0..map.rows()).map(|_| rng.random_range(-5i64..=5)).collect();
            let pulled: Vec<i64> = pt
                .mul_vec(&xi.iter().map(|&v| v as i128).collect::<Vec<_>>())?
                .iter()
                .map(|&v| v as i64)
                .collect();
            let diff =
                (coarse.heat_fourier(args.beta, &xi)? - fine.heat_fourier(args.beta, &pulled)?).abs();
            ft = ft.max(diff);
        }
        ok &= co <= TOL && ft <= TOL;
        stages.push(json!({
            "stage": i + 1,
            "coisometry_residual": co,
            "ft_residual": ft,
        }));
        rows.push(format!("{},{co},{ft}", i + 1));
        if !c.json {
            println!("stage {}: co-isometry residual {co:.3e}, measure residual {ft:.3e}", i + 1);
        }
    }
    let mut echo = common_echo(c);
    echo.push(("chain".into(), args.chain.clone()));
    echo.push(("beta".into(), args.beta.to_string()));
    write_csv_if_requested(c, &echo, "stage,coisometry_residual,ft_residual", &rows)?;
    Ok(RunOutput {
        command: "renorm-check".into(),
        config: json!({
            "dim": args.dim, "chain": sides, "beta": args.beta,
            "num_chars": args.num_chars, "seed": c.seed,
        }),
        outputs: json!({ "stages": stages, "tolerance": TOL }),
        ok,
        cache_hits: 0,
    })
}

fn cmd_pi_entry(args: &PiEntryArgs, c: &Common) -> Result<RunOutput, CliError> {
    let d = args.dim;
    if args.offset.len() != d {
        return Err(CliError::Invalid(format!(
            "--offset needs {d} coordinates, got {}",
            args.offset.len()
        )));
    }
    let alpha_p = validate_plane(&args.plane, d)?;
    let alpha_q = match &args.plane_q {
        Some(p) => validate_plane(p, d)?,
        None => alpha_p.clone(),
    };
    let p = Cell::new(vec![0; d], alpha_p.clone())?;
    let q = Cell::new(args.offset.clone(), alpha_q.clone())?;
    let cache = Cache::open_default();
    let key = cache_key(d, &args.offset, &alpha_p, &alpha_q, args.grid);
    let (value, hit) = match cache.get(&key) {
        Some(rec) => (rec.value, true),
        None => {
            let value = pi_entry(d, &p, &q, args.grid)?;
            cache.put(PiCacheRecord {
                d,
                offset: args.offset.clone(),
                alpha_p: alpha_p.clone(),
                alpha_q: alpha_q.clone(),
                grid_n: args.grid,
                value,
            })?;
            (value, false)
        }
    };
    let offset_str = args
        .offset
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let plane_str = |p: &[u8]| {
        p.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    write_csv_if_requested(
        c,
        &common_echo(c),
        "d,offset,alpha_p,alpha_q,grid_n,value",
        &[format!(
            "{d},{},{},{},{},{value}",
            quote_field(&offset_str),
            quote_field(&plane_str(&alpha_p)),
            quote_field(&plane_str(&alpha_q)),
            args.grid
        )],
    )?;
    if !c.json {
        println!(
            "<delta_p, Pi delta_q> = {value:.15} ({})",
            if hit { "cache hit" } else { "computed" }
        );
    }
    Ok(RunOutput {
        command: "multiplier-pi".into(),
        config: json!({
            "dim": d, "offset": args.offset, "plane": alpha_p,
            "plane_q": alpha_q, "grid": args.grid, "seed": c.seed,
        }),
        outputs: json!({ "value": value, "cache_hit": hit }),
        ok: true,
        cache_hits: hit as usize,
    })
}

fn cmd_twopoint(args: &TwopointArgs, c: &Common) -> Result<RunOutput, CliError> {
    let d = args.dim;
    let p = parse_cell(&args.p, d)?;
    let q = parse_cell(&args.q, d)?;
    let diag_p = pi_entry(d, &p, &p, args.grid)?;
    let diag_q = pi_entry(d, &q, &q, args.grid)?;
    let cross = pi_entry(d, &p, &q, args.grid)?;
    let value = o_from_parts(args.beta, diag_p, diag_q, cross);
    let mut ok = true;
    let mc = match args.mc_samples {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let (est, stderr) =
                marginal_mc_two_point(d, args.beta, &p, &q, args.grid, n, &mut rng)?;
            ok = (est - value).abs() <= 3.0 * stderr;
            json!({ "estimate": est, "stderr": stderr, "within_3_sigma": ok })
        }
        None => serde_json::Value::Null,
    };
    let mut echo = common_echo(c);
    echo.push(("beta".into(), args.beta.to_string()));
    let mut header = "beta,p,q,grid_n,cross_term,value".to_string();
    let mut row = format!(
        "{},{},{},{},{cross},{value}",
        args.beta,
        quote_field(&format_cell(&p)),
        quote_field(&format_cell(&q)),
        args.grid
    );
    if let Some(n) = args.mc_samples {
        header.push_str(",mc_samples,mc_estimate,mc_stderr");
        row.push_str(&format!(
            ",{n},{},{}",
            mc["estimate"].as_f64().unwrap_or(f64::NAN),
            mc["stderr"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    write_csv_if_requested(c, &echo, &header, &[row])?;
    if !c.json {
        println!("O = {value:.12e} (cross term {cross:.12e})");
    }
    Ok(RunOutput {
        command: "correlation-twopoint".into(),
        config: json!({
            "dim": d, "beta": args.beta, "p": format_cell(&p), "q": format_cell(&q),
            "grid": args.grid, "mc_samples": args.mc_samples, "seed": c.seed,
        }),
        outputs: json!({
            "diag_p": diag_p, "diag_q": diag_q, "cross_term": cross,
            "value": value, "mc": mc,
        }),
        ok,
        cache_hits: 0,
    })
}

fn cmd_decay(args: &DecayArgs, c: &Common) -> Result<RunOutput, CliError> {
    let plane = validate_plane(&args.plane, args.dim)?;
    let points = decay_series(
        args.dim,
        args.beta,
        (plane[0], plane[1]),
        args.axis,
        &args.ns,
        args.grid,
    )?;
    // Fit only when there is signal: in the plane (d = 2) every off-diagonal
    // value is 0 and a log-fit would be noise. Floors are asserted either way.
    let max_abs = points
        .iter()
        .filter(|pt| pt.n >= 1)
        .map(|pt| pt.value.abs())
        .fold(0.0f64, f64::max);
    let fit = if max_abs <= 1e-12 {
        for pt in &points {
            if pt.value.abs() < pt.floor {
                return Err(CoreError::integrity(format!(
                    "value at n={} below its certified floor",
                    pt.n
                ))
                .into());
            }
        }
        None
    } else {
        match fit_power_law(&points) {
            Ok(f) => Some(f),
            Err(CoreError::Domain(_)) => None,
            Err(e) => return Err(e.into()),
        }
    };
    let mut echo = common_echo(c);
    for (k, v) in [
        ("dim", args.dim.to_string()),
        ("beta", args.beta.to_string()),
        ("plane", format!("{},{}", plane[0], plane[1])),
        ("axis", args.axis.to_string()),
        ("grid", args.grid.to_string()),
    ] {
        echo.push((k.into(), v));
    }
    if let Some(f) = &fit {
        echo.push(("fit_exponent".into(), format!("{:.6}", f.exponent)));
    }
    let rows: Vec<String> = points
        .iter()
        .map(|pt| {
            format!(
                "{},{},{},{},{}",
                pt.n, pt.cross_term, pt.value, pt.floor, pt.grid_n
            )
        })
        .collect();
    write_csv_if_requested(c, &echo, "n,cross_term,o_value,floor,grid_n", &rows)?;
    if let Some(path) = &c.plot {
        let scatter: Vec<(f64, f64)> = points
            .iter()
            .filter(|pt| pt.n >= 1)
            .map(|pt| (pt.n as f64, pt.value.abs()))
            .collect();
        let fit_line = fit.as_ref().map(|f| (f.exponent, f.log_prefactor));
        let title = format!("correlation decay d={} beta={}", args.dim, args.beta);
        atomic_write(path, svg::loglog_plot(&title, &scatter, fit_line).as_bytes())?;
    }
    if !c.json {
        for pt in &points {
            println!(
                "n={:>3}: O = {:+.6e}, cross = {:+.6e}, floor = {:.3e}",
                pt.n, pt.value, pt.cross_term, pt.floor
            );
        }
        if let Some(f) = &fit {
            println!(
                "fitted exponent {:.4} over n in [{}, {}] (max log residual {:.3})",
                f.exponent, f.n_range.0, f.n_range.1, f.max_log_residual
            );
        }
    }
    let fit_json = fit.as_ref().map(|f| {
        json!({
            "exponent": f.exponent,
            "log_prefactor": f.log_prefactor,
            "max_log_residual": f.max_log_residual,
            "n_range": [f.n_range.0, f.n_range.1],
        })
    });
    let outputs = json!({
        "points": points.iter().map(|pt| json!({
            "n": pt.n, "cross_term": pt.cross_term, "value": pt.value,
            "floor": pt.floor, "grid_n": pt.grid_n,
        })).collect::<Vec<_>>(),
        "fit": fit_json,
    });
    Ok(RunOutput {
        command: "correlation-decay".into(),
        config: json!({
            "dim": args.dim, "beta": args.beta, "ns": args.ns, "grid": args.grid,
            "plane": plane, "axis": args.axis, "seed": c.seed,
        }),
        outputs,
        ok: true,
        cache_hits: 0,
    })
}
