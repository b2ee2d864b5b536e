//! `essbn`: sample, score, search, sweep and run ESS-sensitivity experiments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use essbn::asymptotics::{decompose, sweep, write_sweep_csv, SweepData};
use essbn::format::fmt12;
use essbn::search::{build_family_cache, rank_with_cache, search_with_cache};
use essbn::{
    render_report, run_experiment_in, sample, score_structure, DagSpace, Dataset, Error, ExperimentConfig,
    GeneratorPreset, Network, ReportFormat, ScoreKind, ScoreSpec,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "essbn", version, about = "Structure scores, exact search and ESS sensitivity for discrete Bayesian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a network with CPTs.
    Sample(SampleArgs),
    /// Score one structure on a dataset.
    Score(ScoreArgs),
    /// Exhaustive structure search (up to 6 variables).
    Search(SearchArgs),
    /// Sweep the prior/likelihood decomposition over α and n.
    Asymptotics(AsymptoticsArgs),
    /// Run a repeated recovery experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Network JSON file or preset id (g1 to g5).
    #[arg(long)]
    network: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Ml,
    Bde,
    Bdeu,
    Bic,
    NipBic,
}

impl From<KindArg> for ScoreKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ml => ScoreKind::Ml,
            KindArg::Bde => ScoreKind::Bde,
            KindArg::Bdeu => ScoreKind::Bdeu,
            KindArg::Bic => ScoreKind::Bic,
            KindArg::NipBic => ScoreKind::NipBic,
        }
    }
}

#[derive(Args)]
struct ScoreChoice {
    #[arg(long, value_enum)]
    score: KindArg,
    /// Equivalent sample size (BDe, BDeu, NIP-BIC).
    #[arg(long)]
    alpha: Option<f64>,
    /// Hypothetical network for BDe.
    #[arg(long)]
    hypothetical: Option<String>,
    /// Per-cell hyperparameter for ML.
    #[arg(long, default_value_t = 1.0)]
    pseudocount: f64,
    /// Print base-10 logarithms.
    #[arg(long)]
    log10: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    data: PathBuf,
    /// Network JSON (structure and cardinalities) or preset id.
    #[arg(long)]
    network: String,
    #[command(flatten)]
    choice: ScoreChoice,
    /// Also print the prior and likelihood terms of log-BDeu.
    #[arg(long)]
    decompose: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    data: PathBuf,
    /// Cardinalities in column order, e.g. `2,2,3`.
    #[arg(long, value_delimiter = ',', required = true)]
    cards: Vec<usize>,
    #[command(flatten)]
    choice: ScoreChoice,
    /// Also list the K best structures.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// Network JSON or preset id; its structure is decomposed.
    #[arg(long)]
    network: String,
    #[arg(long, conflicts_with_all = ["generate_n", "seed"])]
    data: Option<PathBuf>,
    /// Sample sizes to generate from the network, e.g. `100,1000`.
    #[arg(long, value_delimiter = ',', requires = "seed")]
    generate_n: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Run log (seeds and dataset hashes); defaults to `<out>.log`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Usage(String),
    Lib(Error),
    /// Library error while handling the named file.
    File(PathBuf, Error),
}

fn at(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| Failure::File(path.to_path_buf(), e)
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            lib_exit(&e)
        }
        Err(Failure::File(path, e)) => {
            eprintln!("error: {}: {e}", path.display());
            lib_exit(&e)
        }
    }
}

fn lib_exit(e: &Error) -> ExitCode {
    ExitCode::from(match e {
        Error::Capacity(_) => 3,
        _ => 2,
    })
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Sample(a) => cmd_sample(a),
        Command::Score(a) => cmd_score(a),
        Command::Search(a) => with_jobs(a.jobs, || cmd_search(a)),
        Command::Asymptotics(a) => with_jobs(a.jobs, || cmd_asymptotics(a)),
        Command::Experiment(a) => with_jobs(a.jobs, || cmd_experiment(a)),
    }
}

fn with_jobs<F: FnOnce() -> CliResult<()> + Send>(jobs: Option<usize>, f: F) -> CliResult<()> {
    match jobs {
        None => f(),
        Some(0) => Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

/// A network file, or a preset id when no such file exists.
fn load_network(arg: &str) -> CliResult<Network> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(p) = arg.parse::<GeneratorPreset>() {
            return Ok(essbn::preset_network(p));
        }
    }
    Network::read_json(path).map_err(at(path))
}

fn open_out(path: &Path) -> CliResult<Box<dyn Write>> {
    Ok(if path.as_os_str() == "-" {
        Box::new(BufWriter::new(io::stdout().lock()))
    } else {
        Box::new(BufWriter::new(File::create(path).map_err(|e| at(path)(e.into()))?))
    })
}

fn build_spec(c: &ScoreChoice) -> CliResult<ScoreSpec> {
    let kind = ScoreKind::from(c.score);
    let alpha = match (kind.uses_alpha(), c.alpha) {
        (true, Some(a)) => a,
        (true, None) => return Err(Failure::Usage(format!("--score {kind} requires --alpha"))),
        (false, Some(_)) => return Err(Failure::Usage(format!("--score {kind} takes no --alpha"))),
        (false, None) => 1.0,
    };
    let spec = match kind {
        ScoreKind::Ml => ScoreSpec::ml_with_pseudocount(c.pseudocount),
        ScoreKind::Bdeu => ScoreSpec::bdeu(alpha),
        ScoreKind::Bic => ScoreSpec::bic(),
        ScoreKind::NipBic => ScoreSpec::nip_bic(alpha),
        ScoreKind::Bde => {
            let path = c
                .hypothetical
                .as_deref()
                .ok_or_else(|| Failure::Usage("--score bde requires --hypothetical".into()))?;
            ScoreSpec::bde(alpha, load_network(path)?)
        }
    };
    if kind != ScoreKind::Bde && c.hypothetical.is_some() {
        return Err(Failure::Usage("--hypothetical only applies to --score bde".into()));
    }
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(spec)
}

fn log_value(x: f64, log10: bool) -> f64 {
    if log10 {
        x / std::f64::consts::LN_10
    } else {
        x
    }
}

/// JSON number carrying the 12-significant-digit rendering.
fn json_value(x: f64, log10: bool) -> serde_json::Value {
    let v = log_value(x, log10);
    fmt12(v).parse::<f64>().map(serde_json::Value::from).unwrap_or(serde_json::Value::Null)
}

fn cmd_sample(a: SampleArgs) -> CliResult<()> {
    let network = load_network(&a.network)?;
    let data = sample(&network, a.n, a.seed)?;
    let mut out = open_out(&a.out)?;
    data.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> CliResult<()> {
    let spec = build_spec(&a.choice)?;
    if a.decompose && spec.kind != ScoreKind::Bdeu {
        return Err(Failure::Usage("--decompose requires --score bdeu".into()));
    }
    let network = load_network(&a.network)?;
    let data = Dataset::read_csv_file(&a.data, &network.cards()).map_err(at(&a.data))?;
    let dag = network.dag();
    let scored = score_structure(&data, dag, &spec)?;
    let names = network.names();
    let lg = a.choice.log10;
    let mut out = io::stdout().lock();
    writeln!(out, "{}", fmt12(log_value(scored.total, lg)))?;
    for f in &scored.families {
        let parents: Vec<&str> = f.parents.iter().map(|&p| names[p].as_str()).collect();
        writeln!(
            out,
            "{}\t{}\t{}",
            names[f.child],
            if parents.is_empty() { "-".to_string() } else { parents.join(",") },
            fmt12(log_value(f.log_score, lg))
        )?;
    }
    if a.decompose {
        let d = decompose(dag, &data, spec.alpha)?;
        writeln!(out, "prior\t{}", fmt12(log_value(d.prior_exact, lg)))?;
        writeln!(out, "likelihood\t{}", fmt12(log_value(d.likelihood_exact, lg)))?;
    }
    Ok(())
}

fn cmd_search(a: SearchArgs) -> CliResult<()> {
    let spec = build_spec(&a.choice)?;
    let data = Dataset::read_csv_file(&a.data, &a.cards).map_err(at(&a.data))?;
    let space = DagSpace::new(data.n_vars())?;
    let cache = build_family_cache(&data, &spec)?;
    let result = search_with_cache(&space, &cache);
    let lg = a.choice.log10;
    let mut value = result.to_json();
    value["score"] = json_value(result.best_score, lg);
    if let Some(k) = a.top {
        let top: Vec<serde_json::Value> = rank_with_cache(&space, &cache, k)
            .into_iter()
            .map(|(dag, s)| json!({"dag": dag.parent_sets(), "score": json_value(s, lg)}))
            .collect();
        value["top"] = serde_json::Value::Array(top);
    }
    let mut out = open_out(&a.out)?;
    writeln!(out, "{}", serde_json::to_string(&value).map_err(Error::from)?)?;
    out.flush()?;
    Ok(())
}

fn cmd_asymptotics(a: AsymptoticsArgs) -> CliResult<()> {
    let network = load_network(&a.network)?;
    let dag = network.dag();
    let reports = match (&a.data, &a.generate_n, a.seed) {
        (Some(path), None, _) => {
            let data = Dataset::read_csv_file(path, &network.cards()).map_err(at(path))?;
            sweep(dag, SweepData::Fixed(&data), &a.alphas)?
        }
        (None, Some(n_grid), Some(seed)) => sweep(
            dag,
            SweepData::Generated { network: &network, n_grid, seed },
            &a.alphas,
        )?,
        _ => return Err(Failure::Usage("give either --data or --generate-n with --seed".into())),
    };
    let mut out = open_out(&a.out)?;
    write_sweep_csv(&reports, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| at(&a.config)(e.into()))?;
    let config = ExperimentConfig::from_json_str(&text).map_err(at(&a.config))?;
    let base = a.config.parent().filter(|p| !p.as_os_str().is_empty());
    let report = run_experiment_in(&config, base)?;
    let format = match a.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Markdown => ReportFormat::Markdown,
    };
    let mut out = open_out(&a.out)?;
    out.write_all(render_report(&report, format).as_bytes())?;
    out.flush()?;
    let log_path = a.log.clone().or_else(|| {
        (a.out.as_os_str() != "-").then(|| {
            let mut p = a.out.clone().into_os_string();
            p.push(".log");
            PathBuf::from(p)
        })
    });
    if let Some(path) = log_path {
        std::fs::write(path, report.run_log())?;
    }
    Ok(())
}
