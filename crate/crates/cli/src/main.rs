//! `relugen`: compile histogram densities into ReLU generator networks, sample
//! them, verify the constructions and render the results.
//!
//! Exit status is 0 on success, 1 when a verification check fails and 2 on
//! usage or I/O errors.

mod plot;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use relugen_core::histogram::quantize_density;
use relugen_core::relunet::NetworkMeta;
use relugen_core::sampler::sample_pushforward;
use relugen_core::transport::{
    build_map, claimed_connectivity_bound, claimed_depth, lower_to_network, wasserstein_upper_bound,
};
use relugen_core::{DensitySpec, HistogramD, Method, NetworkFile, NoiseSource, Samples};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "relugen", version, about = "Histogram densities as ReLU generator networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a density, build its transport map and write the network.
    Compile(CompileArgs),
    /// Push uniform noise through a network file and write the samples.
    Sample(SampleArgs),
    /// Check cell masses, network size, quantization and sampling error.
    Verify(VerifyArgs),
    /// Bin samples into a heatmap, optionally with the network's curve.
    Plot(PlotArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Density spec JSON.
    #[arg(long, value_name = "PATH")]
    density: Option<PathBuf>,
    /// Built-in density: uniform, ramp or cosine_bump.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
}

#[derive(Args)]
pub(crate) struct Target {
    #[command(flatten)]
    source: Source,
    /// Built-in density parameter, e.g. `alpha=0.3` or `dim=2`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Histogram resolution per axis.
    #[arg(long)]
    n: usize,
    /// Sawtooth order.
    #[arg(long)]
    s: u32,
    #[arg(long, default_value = "standard")]
    method: Method,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    target: Target,
    /// Network JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Network JSON written by `compile`.
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub(crate) struct VerifyArgs {
    #[command(flatten)]
    target: Target,
    /// Network to check; compiled in memory when omitted.
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples drawn for the empirical Wasserstein check.
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    /// Report JSON to write; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Sample CSV with header `x` or `x,y`.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    /// Output prefix: writes PREFIX.pgm and PREFIX_counts.csv.
    #[arg(long)]
    out: PathBuf,
    /// Also write PREFIX_curve.csv with the network evaluated on a grid.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Grid points for the curve.
    #[arg(long, default_value_t = 1025)]
    points: usize,
}

/// A density target resolved into its histogram.
pub(crate) struct Resolved {
    pub spec: DensitySpec,
    pub hist: HistogramD,
    pub n: usize,
    pub s: u32,
    pub method: Method,
}

fn parse_params(raw: &[String]) -> Result<Map<String, Value>> {
    let mut out = Map::new();
    for item in raw {
        let Some((key, value)) = item.split_once('=') else {
            bail!("--param expects KEY=VALUE, got {item:?}");
        };
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        out.insert(key.trim().to_string(), value);
    }
    Ok(out)
}

impl Target {
    pub(crate) fn resolve(&self) -> Result<Resolved> {
        if self.n == 0 {
            bail!("--n must be at least 1");
        }
        if self.s == 0 {
            bail!("--s must be at least 1");
        }
        if self.method == Method::Alt && !self.n.is_power_of_two() {
            bail!("--method alt needs --n to be a power of two, got {}", self.n);
        }
        let spec = match (&self.source.density, &self.source.builtin) {
            (Some(path), _) => {
                if !self.params.is_empty() {
                    bail!("--param only applies to --builtin");
                }
                DensitySpec::from_path(path).with_context(|| format!("reading density {}", path.display()))?
            }
            (None, Some(name)) => DensitySpec::builtin(name, &parse_params(&self.params)?)?,
            (None, None) => bail!("one of --density or --builtin is required"),
        };
        if spec.dim() != 2 {
            bail!("transport maps target two-dimensional densities; this one has dimension {}", spec.dim());
        }
        let hist = quantize_density(&spec, self.n)?;
        Ok(Resolved { spec, hist, n: self.n, s: self.s, method: self.method })
    }
}

impl Resolved {
    pub fn meta(&self) -> NetworkMeta {
        NetworkMeta {
            n: self.n,
            s: self.s,
            method: self.method,
            claimed_connectivity_bound: claimed_connectivity_bound(self.method, self.n, self.s),
            claimed_depth: claimed_depth(self.method, self.n, self.s),
        }
    }

    /// Quantization error plus the construction's transport error, against
    /// the density itself.
    pub fn total_bound(&self) -> f64 {
        self.spec.lipschitz() * std::f64::consts::SQRT_2 / (2.0 * self.n as f64)
            + wasserstein_upper_bound(self.n, self.s, self.method)
    }
}

fn compile(args: &CompileArgs) -> Result<()> {
    let target = args.target.resolve()?;
    let map = build_map(&target.hist, target.s, target.method)?;
    let net = lower_to_network(&map)?;
    NetworkFile::new(&net, Some(target.meta()))
        .write(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("method        {}", target.method);
    println!("connectivity  {}", net.connectivity());
    println!("depth         {}", net.depth());
    println!("bound         {:.6e}", target.total_bound());
    println!("wrote         {}", args.out.display());
    Ok(())
}

fn sample(args: &SampleArgs) -> Result<()> {
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let file = NetworkFile::read(&args.network).with_context(|| format!("reading {}", args.network.display()))?;
    let net = file.network()?;
    if net.input_dim() != 1 {
        bail!("network takes {} inputs; generators take one", net.input_dim());
    }
    let samples: Samples = sample_pushforward(&NoiseSource::new(args.seed), &net, args.count)?;
    samples.write_csv_path(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} samples to {}", samples.len(), args.out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Compile(args) => compile(args).map(|()| true),
        Command::Sample(args) => sample(args).map(|()| true),
        Command::Verify(args) => verify::run(args),
        Command::Plot(args) => plot::run(&args.samples, args.bins, &args.out, args.network.as_deref(), args.points)
            .map(|()| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
