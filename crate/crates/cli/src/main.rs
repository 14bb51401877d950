//! `cubature`: batch front end for measure reduction and moment feasibility.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cubature_core::measure::load_measure_path;
use cubature_core::{
    cubature_for_basis, moment_vector, truncated_moment_feasible, verify_cubature, BasisSpec, Cubature,
    CubatureOptions, DiscreteMeasure, FeasibilityResult, FeasibilityStatus, MeasureFormat, MultiIndex,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use config::{parse_weights, RunConfig};

#[derive(Parser)]
#[command(name = "cubature", version, about = "Reduce discrete measures to positive cubature formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy, PartialEq)]
enum Command {
    /// Reduce a measure to a cubature of the given degree and verify it.
    Reduce,
    /// Write the moment file of a measure.
    Moments,
    /// Decide whether a moment file is realizable on a grid.
    Feasible,
    /// Check a cubature file against its source measure.
    Verify,
    /// Write a synthetic measure drawn from a seed.
    Gen,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Reduce => "reduce",
            Command::Moments => "moments",
            Command::Feasible => "feasible",
            Command::Verify => "verify",
            Command::Gen => "gen",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct Opts {
    /// Measure file, or the moment file for `feasible`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Maximal weighted degree m.
    #[arg(long, global = true)]
    degree: Option<u32>,
    /// Degree weights, e.g. `1,2`.
    #[arg(long, global = true)]
    weights: Option<String>,
    #[arg(long, global = true)]
    num_vars: Option<usize>,
    #[arg(long, global = true)]
    buffer_factor: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Candidate support for `feasible`, in measure format (weights ignored).
    #[arg(long, global = true)]
    grid: Option<PathBuf>,
    /// Cubature file for `verify`.
    #[arg(long, global = true)]
    cubature: Option<PathBuf>,
    /// Atom count for `gen`.
    #[arg(long, global = true)]
    num_atoms: Option<usize>,
}

impl Opts {
    fn merge(self, mut cfg: RunConfig) -> Result<RunConfig> {
        macro_rules! take {
            ($($field:ident),*) => { $( if self.$field.is_some() { cfg.$field = self.$field; } )* };
        }
        take!(input, out_dir, buffer_factor, tol, seed, grid, cubature, num_atoms);
        if let Some(f) = self.format {
            cfg.format = Some(match f { FormatArg::Csv => "csv", FormatArg::Jsonl => "jsonl" }.into());
        }
        let mut basis = cfg.basis.take().unwrap_or_default();
        if let Some(m) = self.degree {
            basis.max_degree = Some(m);
        }
        if let Some(w) = &self.weights {
            basis.degree_weights = Some(parse_weights(w)?);
        }
        if let Some(n) = self.num_vars {
            basis.num_vars = Some(n);
        }
        cfg.basis = Some(basis);
        Ok(cfg)
    }
}

/// Cubature as written to disk.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CubatureFile {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    degree: u32,
    basis: BasisSpec,
    node_indices: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentFile {
    basis: BasisSpec,
    moments: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct MomentFileOut<'a> {
    basis: &'a BasisSpec,
    #[serde(serialize_with = "ordered_map")]
    moments: Vec<(String, f64)>,
}

fn ordered_map<S: Serializer>(pairs: &[(String, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(pairs.iter().map(|(k, v)| (k, v)))
}

#[derive(Serialize)]
struct FeasibilityFile<'a> {
    #[serde(flatten)]
    result: &'a FeasibilityResult,
    witness: Option<Witness>,
}

#[derive(Serialize)]
struct Witness {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let base = match &cli.opts.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = cli.opts.merge(base)?;
    cfg.validate(cli.command.name())?;
    match cli.command {
        Command::Reduce => cmd_reduce(&cfg),
        Command::Moments => cmd_moments(&cfg),
        Command::Feasible => cmd_feasible(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::Gen => cmd_gen(&cfg),
    }
}

fn load_input(cfg: &RunConfig, path: &Path, num_vars: Option<usize>) -> Result<DiscreteMeasure> {
    load_measure_path(path, cfg.format()?, num_vars).with_context(|| format!("loading {}", path.display()))
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_reduce(cfg: &RunConfig) -> Result<u8> {
    let partial = cfg.basis();
    let measure = load_input(cfg, cfg.input()?, partial.num_vars_hint())?;
    let spec = partial.resolve(measure.num_vars())?;
    let basis = spec.build()?;
    let opts = CubatureOptions { buffer_factor: cfg.buffer_factor.unwrap_or(2), ..Default::default() };
    let (cubature, report) = cubature_for_basis(&measure, &basis, &opts)?;
    let verification = verify_cubature(&measure, &cubature, &basis, cfg.tol())?;

    let out = cfg.out_dir();
    let file = CubatureFile {
        nodes: cubature.nodes.clone(),
        weights: cubature.weights.clone(),
        degree: spec.max_degree,
        basis: spec,
        node_indices: cubature.node_indices.clone(),
    };
    write_json(&out, "cubature.json", &file)?;
    write_json(&out, "reduction_report.json", &report)?;
    write_json(&out, "verification_report.json", &verification)?;
    println!(
        "reduce: {} atoms -> {} nodes (D = {}), max residual {:.2e}, verification {}",
        measure.len(),
        cubature.len(),
        basis.dimension(),
        verification.max_residual_rel,
        if verification.passed { "passed" } else { "FAILED" }
    );
    Ok(if verification.passed { 0 } else { 1 })
}

fn cmd_moments(cfg: &RunConfig) -> Result<u8> {
    let partial = cfg.basis();
    let measure = load_input(cfg, cfg.input()?, partial.num_vars_hint())?;
    let spec = partial.resolve(measure.num_vars())?;
    let basis = spec.build()?;
    let e = moment_vector(&measure, &basis)?;
    let moments = basis.indices().iter().map(ToString::to_string).zip(e.values.iter().copied()).collect();
    write_json(&cfg.out_dir(), "moments.json", &MomentFileOut { basis: &spec, moments })?;
    println!("moments: {} atoms, {} moments written", measure.len(), basis.dimension());
    Ok(0)
}

fn cmd_feasible(cfg: &RunConfig) -> Result<u8> {
    let path = cfg.input()?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: MomentFile = serde_json::from_str(&text).with_context(|| format!("parsing moment file {}", path.display()))?;

    // Flags and config may override the basis recorded in the file.
    let over = cfg.basis();
    let spec = BasisSpec {
        num_vars: over.num_vars.unwrap_or(file.basis.num_vars),
        degree_weights: over.degree_weights.clone().or(file.basis.degree_weights),
        max_degree: over.max_degree.unwrap_or(file.basis.max_degree),
    };
    let basis = spec.build()?;
    let moments = file
        .moments
        .iter()
        .map(|(k, v)| {
            let key: MultiIndex = k.parse().with_context(|| format!("bad moment key {k:?}"))?;
            Ok((key, *v))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    let grid_path = cfg.grid.as_deref().context("no grid file given (use --grid)")?;
    let grid = load_input(cfg, grid_path, Some(spec.num_vars))?;
    let points: Vec<Vec<f64>> = grid.atoms().map(<[f64]>::to_vec).collect();
    let (result, witness) = truncated_moment_feasible(&moments, &points, &basis)?;

    let witness = witness.map(|w| Witness { nodes: w.atoms().map(<[f64]>::to_vec).collect(), weights: w.weights().to_vec() });
    write_json(&cfg.out_dir(), "feasibility.json", &FeasibilityFile { result: &result, witness })?;
    let (word, code) = match result.status {
        FeasibilityStatus::Feasible => ("feasible", 0),
        FeasibilityStatus::Infeasible => ("infeasible", 1),
        FeasibilityStatus::Indeterminate => ("indeterminate", 3),
    };
    println!("feasible: {word} on {} grid points after {} pivots", points.len(), result.iterations);
    Ok(code)
}

fn cmd_verify(cfg: &RunConfig) -> Result<u8> {
    let cpath = cfg.cubature.as_deref().context("no cubature file given (use --cubature)")?;
    let text = fs::read_to_string(cpath).with_context(|| format!("reading {}", cpath.display()))?;
    let file: CubatureFile = serde_json::from_str(&text).with_context(|| format!("parsing cubature {}", cpath.display()))?;

    let over = cfg.basis();
    let spec = BasisSpec {
        num_vars: file.basis.num_vars,
        degree_weights: over.degree_weights.clone().or(file.basis.degree_weights.clone()),
        max_degree: over.max_degree.unwrap_or(file.basis.max_degree),
    };
    let basis = spec.build()?;
    let measure = load_input(cfg, cfg.input()?, Some(spec.num_vars))?;
    if file.nodes.len() != file.weights.len() || file.node_indices.len() != file.weights.len() {
        bail!("cubature file has {} nodes, {} weights and {} indices", file.nodes.len(), file.weights.len(), file.node_indices.len());
    }
    let cubature = Cubature {
        node_indices: file.node_indices,
        nodes: file.nodes,
        weights: file.weights,
        degree: Some(spec.max_degree),
        basis_id: basis.id(),
    };
    let report = verify_cubature(&measure, &cubature, &basis, cfg.tol())?;
    write_json(&cfg.out_dir(), "verification_report.json", &report)?;
    println!(
        "verify: {} nodes against {} atoms, max residual {:.2e}, {}",
        cubature.len(),
        measure.len(),
        report.max_residual_rel,
        if report.passed { "passed" } else { "FAILED" }
    );
    Ok(if report.passed { 0 } else { 1 })
}

/// Atoms uniform in `[-1, 1]^N`, weights uniform in `[0.1, 2]`.
fn cmd_gen(cfg: &RunConfig) -> Result<u8> {
    let n = cfg.basis().num_vars_hint().unwrap_or(1);
    let m = cfg.num_atoms.unwrap_or(1000);
    if n == 0 || m == 0 {
        bail!("gen needs at least one variable and one atom");
    }
    let seed = cfg.seed.unwrap_or(0);
    let format = cfg.format()?.unwrap_or(MeasureFormat::Csv);
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(match format {
        MeasureFormat::Csv => "measure.csv",
        MeasureFormat::Jsonl => "measure.jsonl",
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = std::io::BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    for _ in 0..m {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let w: f64 = rng.gen_range(0.1..=2.0);
        match format {
            MeasureFormat::Csv => {
                let row: Vec<String> = x.iter().chain(std::iter::once(&w)).map(f64::to_string).collect();
                writeln!(out, "{}", row.join(","))?;
            }
            MeasureFormat::Jsonl => writeln!(out, "{}", serde_json::json!({ "x": x, "w": w }))?,
        }
    }
    out.flush()?;
    println!("gen: {m} atoms in {n} variables (seed {seed}) -> {}", path.display());
    Ok(0)
}
