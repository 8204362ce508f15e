use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use pcfg::bench::{run_bench, BenchConfig, Engine};
use pcfg::dsep::{d_separated_with, dsep_implies_ci_check_with, DsepRule};
use pcfg::ground::{ground_with, GroundOptions};
use pcfg::io::{
    parse_dsep_query, parse_model_with, parse_query, serialize_distribution, serialize_model, serialize_query,
    ParseOptions,
};
use pcfg::model::{Model, Severity, ValidateOptions};
use pcfg::oracle::{oracle_query_with, OracleOptions};
use pcfg::random::{random_case, RandomSpec};
use pcfg::{lci_query, ve_query, Error};

const EXIT_ERROR: u8 = 1;
const EXIT_LIMIT: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "pcfg", version)]
#[command(about = "Exact lifted inference with interventions in parametric causal factor graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Model file (.pcfg)
    model: PathBuf,

    /// Bind a template parameter, e.g. `--set d=64`
    #[arg(long = "set", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryEngine {
    /// Lifted causal inference
    Lci,
    /// Variable elimination on the grounding
    Ve,
    /// Brute-force enumeration of the full joint
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// Print an (interventional) distribution
    Query {
        #[command(flatten)]
        model: ModelArgs,

        /// Query, e.g. `P(Rev | do(Train(bob,t1)=true))`
        query: String,

        #[arg(long, value_enum, default_value = "lci")]
        engine: QueryEngine,

        /// Largest joint state space the oracle may enumerate
        #[arg(long, default_value_t = 1 << 22)]
        max_states: u128,
    },

    /// Decide d-separation on the grounding: `X ; Y | Z`
    Dsep {
        #[command(flatten)]
        model: ModelArgs,

        query: String,

        /// Also check the implied independence numerically
        #[arg(long)]
        verify_ci: bool,

        /// Judge every ground factor on its own instead of merging the
        /// parent factors of a variable
        #[arg(long)]
        literal: bool,
    },

    /// Runtime comparison over domain sizes
    Bench {
        /// Template model with a size parameter
        template: PathBuf,

        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256,512,1024,2048,4096")]
        sizes: Vec<usize>,

        /// Query to time; may be repeated
        #[arg(long = "query")]
        queries: Vec<String>,

        #[arg(long, value_delimiter = ',', default_value = "ve_fg,ve_bn,lve_pcfg")]
        engines: Vec<Engine>,

        #[arg(long, default_value_t = 3)]
        repeats: usize,

        /// Skip ground engines above this size
        #[arg(long, default_value_t = 256)]
        cutoff: usize,

        /// Template parameter that receives the size
        #[arg(long, default_value = "d")]
        param: String,

        /// CSV output; standard output if absent
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Check a model and report violations
    Validate {
        #[command(flatten)]
        model: ModelArgs,

        /// Also warn about rows that do not sum to one over the child
        #[arg(long)]
        normalization: bool,

        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },

    /// Print the grounding as a propositional model
    Ground {
        #[command(flatten)]
        model: ModelArgs,

        #[arg(long, default_value_t = 1 << 22)]
        max_factors: usize,
    },

    /// Print a random model with a random query
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Every variable has one parent factor and rows sum to one
        #[arg(long)]
        bayes_net: bool,
    },
}

impl ModelArgs {
    fn options(&self) -> anyhow::Result<ParseOptions> {
        let mut opts = ParseOptions::default();
        for p in &self.params {
            let Some((k, v)) = p.split_once('=') else {
                bail!("expected NAME=VALUE, found `{p}`");
            };
            let v: i64 = v.parse().with_context(|| format!("parameter `{k}` must be an integer"))?;
            opts.params.insert(k.to_string(), v);
        }
        Ok(opts)
    }

    fn load_with(&self, opts: &ParseOptions) -> anyhow::Result<Model> {
        let text = read(&self.model)?;
        parse_model_with(&text, opts).map_err(|e| located(&self.model, e))
    }

    fn load(&self) -> anyhow::Result<Model> {
        self.load_with(&self.options()?)
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn located(path: &Path, e: Error) -> anyhow::Error {
    match e {
        Error::Parse(d) => anyhow::anyhow!("{}:{}", path.display(), d),
        other => other.into(),
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Query {
            model,
            query,
            engine,
            max_states,
        } => {
            let m = model.load()?;
            let q = parse_query(&m, &query).map_err(|e| match e {
                Error::Parse(d) => anyhow::anyhow!("query:{d}"),
                other => other.into(),
            })?;
            let dist = match engine {
                QueryEngine::Lci => lci_query(&m, &q)?,
                QueryEngine::Ve => {
                    let fg = pcfg::ground(&m)?;
                    ve_query(&fg, &q.to_ground(&m, &fg)?)?
                }
                QueryEngine::Oracle => {
                    let fg = pcfg::ground(&m)?;
                    let opts = OracleOptions { max_states };
                    oracle_query_with(&fg, &q.to_ground(&m, &fg)?, opts)?
                }
            };
            out.write_all(serialize_distribution(&dist).as_bytes())?;
        }
        Command::Dsep {
            model,
            query,
            verify_ci,
            literal,
        } => {
            let m = model.load()?;
            let q = parse_dsep_query(&m, &query).map_err(|e| match e {
                Error::Parse(d) => anyhow::anyhow!("query:{d}"),
                other => other.into(),
            })?;
            let rule = if literal { DsepRule::Literal } else { DsepRule::MergedParents };
            let sep = d_separated_with(&m, &q, rule)?;
            writeln!(out, "{}", if sep { "d-separated" } else { "not d-separated" })?;
            if verify_ci && sep {
                let s = dsep_implies_ci_check_with(&m, &[q], 1e-9, rule)?;
                writeln!(
                    out,
                    "ci: {} ({} conditioning assignments, {} skipped, max error {:e})",
                    if s.ci.holds() { "holds" } else { "violated" },
                    s.ci.checked,
                    s.ci.skipped,
                    s.ci.max_error
                )?;
            }
        }
        Command::Bench {
            template,
            sizes,
            queries,
            engines,
            repeats,
            cutoff,
            param,
            out: path,
        } => {
            let text = read(&template)?;
            let mut cfg = BenchConfig {
                sizes,
                engines,
                repeats,
                ground_cutoff: cutoff,
                param,
                ..Default::default()
            };
            if !queries.is_empty() {
                cfg.queries = queries;
            }
            let outcome = run_bench(&text, &cfg).map_err(|e| located(&template, e))?;
            match path {
                Some(p) => {
                    let f = fs::File::create(&p).with_context(|| format!("cannot write {}", p.display()))?;
                    outcome.write_csv(f)?;
                }
                None => outcome.write_csv(&mut out)?,
            }
            if !outcome.mismatches.is_empty() {
                for m in &outcome.mismatches {
                    eprintln!("checksum mismatch: {m}");
                }
                return Ok(EXIT_MISMATCH);
            }
        }
        Command::Validate {
            model,
            normalization,
            tolerance,
        } => {
            let opts = ParseOptions {
                validate: false,
                ..model.options()?
            };
            let m = model.load_with(&opts)?;
            let vopts = ValidateOptions {
                normalization_tolerance: normalization.then_some(tolerance),
            };
            let violations = m.validate_with(vopts);
            for v in &violations {
                writeln!(out, "{v}")?;
            }
            if violations.iter().any(|v| v.severity == Severity::Error) {
                return Ok(EXIT_ERROR);
            }
            writeln!(out, "ok")?;
        }
        Command::Ground { model, max_factors } => {
            let m = model.load()?;
            let fg = ground_with(&m, GroundOptions { max_factors })?;
            eprintln!("{} random variables, {} factors", fg.num_rvs(), fg.factors.len());
            out.write_all(serialize_model(&fg.to_model()?).as_bytes())?;
        }
        Command::Generate { seed, bayes_net } => {
            let spec = if bayes_net { RandomSpec::bayes_net() } else { RandomSpec::default() };
            let case = random_case(seed, &spec);
            writeln!(out, "# seed {seed}")?;
            writeln!(out, "# query: {}", serialize_query(&case.model, &case.query))?;
            out.write_all(serialize_model(&case.model).as_bytes())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let limit = e.downcast_ref::<Error>().is_some_and(Error::is_limit);
            ExitCode::from(if limit { EXIT_LIMIT } else { EXIT_ERROR })
        }
    }
}
