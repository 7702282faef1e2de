use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardmatch::analytic::{analytic_ratios, decimal, ln2_enclosure};
use hardmatch::fixtures::{preset, NAMES};
use hardmatch::fvec::{build_family, verify_family, BuildOptions};
use hardmatch::harness::{mean_ratios, sweep, write_csv, AlgKind, Budget, ExperimentRecord, Runner, SweepSpec};
use hardmatch::instance::{sample_instance, HardInstance};
use hardmatch::params::Config;
use hardmatch::verify::{verify, Suite, VerifyOptions};
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hardmatch", version, about = "Hard streaming-matching instances: generate, verify, run, analyze, export")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the derived parameters and vertex counts of a configuration.
    Params(Source),
    /// Sample J and write an instance file.
    Gen {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run structural checks; exit code 1 if any fails.
    Verify {
        #[command(flatten)]
        src: Source,
        /// sizes, lines, glue, predecessor, cover, key, a comma list, or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Enumerate exhaustively up to the explicit cap.
        #[arg(long)]
        deep: bool,
        #[arg(long, default_value_t = 100_000)]
        probe_flips: u64,
        #[arg(long, default_value_t = 10_000)]
        line_samples: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run algorithms once on one instance.
    Run {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        exp: Experiment,
    },
    /// Repeat runs over freshly sampled J.
    Sweep {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        exp: Experiment,
        #[arg(long, default_value_t = 10)]
        trials: u64,
    },
    /// Exact witness-set ratios for every (K, L) pair.
    Analytic {
        #[arg(long = "K", value_delimiter = ',', default_values_t = [2u32, 4, 10, 20, 50, 100, 200])]
        k: Vec<u32>,
        #[arg(long = "L", value_delimiter = ',', default_values_t = [2u32, 10, 200])]
        l: Vec<u32>,
        #[arg(long, default_value_t = 12)]
        digits: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and verify a constant-weight nearly-orthogonal family.
    Fvec {
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// ε as a fraction, e.g. 1/2.
        #[arg(long, default_value = "1/2")]
        eps: String,
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        retries: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the edge stream and vertex registry as text.
    Export {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Source {
    /// JSON config file, or inline JSON starting with `{`.
    #[arg(long, conflicts_with_all = ["preset", "instance"])]
    config: Option<String>,
    #[arg(long, conflicts_with = "instance")]
    preset: Option<String>,
    /// Instance file written by `gen`.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct Experiment {
    /// greedy, uniform, clairvoyant, store-all; comma list.
    #[arg(long, value_delimiter = ',', default_value = "greedy,uniform,clairvoyant")]
    alg: Vec<String>,
    /// Absolute edges, or multiples of |P| (`2P`) or |Ê| (`0.5E`); comma list.
    #[arg(long, value_delimiter = ',', default_value = "P")]
    budget: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<hardmatch::Error> for Failure {
    fn from(e: hardmatch::Error) -> Self {
        Failure::Check(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Check(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn usage(s: impl Into<String>) -> Failure {
    Failure::Usage(s.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Params(src) => params(&src),
        Cmd::Gen { src, out } => {
            let inst = src.instance()?;
            inst.save(&out)?;
            println!(
                "{}",
                json!({"file": out, "config": inst.config, "seed": inst.config.seed, "n_p": inst.n_p(), "n_q": inst.n_q(), "J": inst.j_vectors()})
            );
            Ok(())
        }
        Cmd::Verify { src, suite, deep, probe_flips, line_samples, format } => {
            let suites = Suite::parse_list(&suite).map_err(|e| usage(e.to_string()))?;
            let inst = src.instance()?;
            let opts = VerifyOptions { deep, seed: inst.config.seed, line_samples, probe_flips };
            let report = verify(&inst, &suites, &opts);
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(
                        &json!({"config": inst.config, "seed": inst.config.seed, "passed": report.passed(), "checks": report.checks})
                    )
                    .unwrap()
                ),
                _ => {
                    println!("config {} seed {}", serde_json::to_string(&inst.config).unwrap(), inst.config.seed);
                    println!("{report}");
                }
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Check(format!("{} check(s) failed", report.failures().count())))
            }
        }
        Cmd::Run { src, exp } => {
            let (algs, budgets) = exp.parse()?;
            let inst = src.instance()?;
            let runner = Runner::new(&inst)?;
            let mut records = Vec::new();
            for a in &algs {
                for b in &budgets {
                    let s = b.resolve(runner.info.n_p, runner.info.total_edges);
                    let mut alg = a.make(&inst, inst.config.seed);
                    records.push(runner.run(alg.as_mut(), s, inst.config.seed));
                }
            }
            emit_records(&inst.config, &records, &exp)
        }
        Cmd::Sweep { src, exp, trials } => {
            let (algs, budgets) = exp.parse()?;
            if src.instance.is_some() {
                return Err(usage("sweep resamples J per trial; pass --config or --preset"));
            }
            let config = src.config()?;
            let spec = SweepSpec { config: config.clone(), algs, budgets, trials, base_seed: config.seed };
            let records = sweep(&spec)?;
            for (alg, budget, mean, count) in mean_ratios(&records) {
                eprintln!("{alg} budget={budget}: mean ratio {mean:.6} over {count} runs");
            }
            emit_records(&config, &records, &exp)
        }
        Cmd::Analytic { k, l, digits, out } => analytic(&k, &l, digits, out.as_deref()),
        Cmd::Fvec { n, eps, size, seed, retries, out } => {
            let eps: Ratio<u64> = eps.parse().map_err(|_| usage(format!("bad ε `{eps}`")))?;
            let f = build_family(&BuildOptions { n, eps, target: size, seed, max_retries: retries, cap_c: None })?;
            verify_family(&f).map_err(|v| Failure::Check(v.to_string()))?;
            let mut w = sink(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &f).map_err(|e| Failure::Check(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        }
        Cmd::Export { src, edges, registry } => {
            let inst = src.instance()?;
            let count = inst.export_edges(File::create(&edges)?)?;
            if let Some(r) = &registry {
                inst.export_registry(File::create(r)?)?;
            }
            eprintln!("wrote {count} edges; config {} seed {}", serde_json::to_string(&inst.config).unwrap(), inst.config.seed);
            Ok(())
        }
    }
}

impl Source {
    fn config(&self) -> Result<Config, Failure> {
        let mut c = match (&self.config, &self.preset) {
            (Some(c), _) => {
                let text = if c.trim_start().starts_with('{') {
                    c.clone()
                } else {
                    std::fs::read_to_string(c).map_err(|e| usage(format!("cannot read config `{c}`: {e}")))?
                };
                Config::from_json(&text).map_err(|e| usage(format!("bad config: {e}")))?
            }
            (None, Some(p)) => preset(p).ok_or_else(|| usage(format!("unknown preset `{p}`; known: {}", NAMES.join(", "))))?.config,
            (None, None) => return Err(usage("one of --config, --preset or --instance is required")),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        Ok(c)
    }

    fn instance(&self) -> Result<HardInstance, Failure> {
        if let Some(path) = &self.instance {
            if !path.exists() {
                return Err(usage(format!("missing instance file {}", path.display())));
            }
            if self.seed.is_some() {
                return Err(usage("--seed does not apply to a saved instance"));
            }
            return Ok(HardInstance::load(path)?);
        }
        let c = self.config()?;
        Ok(sample_instance(&c, c.seed)?)
    }
}

impl Experiment {
    fn parse(&self) -> Result<(Vec<AlgKind>, Vec<Budget>), Failure> {
        let algs = self.alg.iter().map(|a| a.parse().map_err(|e: hardmatch::Error| usage(e.to_string()))).collect::<Result<_, _>>()?;
        let budgets =
            self.budget.iter().map(|b| b.parse().map_err(|e: hardmatch::Error| usage(e.to_string()))).collect::<Result<_, _>>()?;
        if self.format == Format::Text {
            return Err(usage("run and sweep write csv or json"));
        }
        Ok((algs, budgets))
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_records(config: &Config, records: &[ExperimentRecord], exp: &Experiment) -> Outcome {
    let mut w = sink(exp.out.as_deref())?;
    match exp.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &json!({"config": config, "seed": config.seed, "runs": records}))
                .map_err(|e| Failure::Check(e.to_string()))?;
            writeln!(w)?;
        }
        _ => {
            writeln!(w, "# config={} seed={}", serde_json::to_string(config).unwrap(), config.seed)?;
            write_csv(records, &mut w)?;
        }
    }
    w.flush()?;
    let bad: Vec<String> =
        records.iter().filter(|r| !r.valid).map(|r| format!("{} seed {}: {}", r.alg, r.seed, r.violations.join("; "))).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(bad.join("\n")))
    }
}

fn params(src: &Source) -> Outcome {
    let inst = src.instance()?;
    let p = &inst.params;
    let v = json!({
        "config": inst.config,
        "seed": inst.config.seed,
        "K": p.k,
        "L": p.l,
        "n": p.n,
        "m": p.m.to_string(),
        "W": p.w.to_string(),
        "N": p.n_labels().to_string(),
        "phases": p.gadget_phases(),
        "layout": inst.layout,
        "J": inst.j_vectors(),
        "n_p": inst.n_p(),
        "n_q": inst.n_q(),
        "edges": inst.total_edges()?,
        "warnings": p.warnings(),
    });
    println!("{}", serde_json::to_string_pretty(&v).unwrap());
    Ok(())
}

fn analytic(ks: &[u32], ls: &[u32], digits: usize, out: Option<&Path>) -> Outcome {
    let ln2 = ln2_enclosure(60);
    let limit = 1.0 / (1.0 + std::f64::consts::LN_2);
    let mut w = csv::Writer::from_writer(sink(out)?);
    let err = |e: csv::Error| Failure::Check(e.to_string());
    w.write_record([
        "K",
        "L",
        "sigma",
        "sigma_dec",
        "gamma",
        "gamma_dec",
        "B_P",
        "B_P_dec",
        "B_Q",
        "B_Q_dec",
        "ratio",
        "ratio_dec",
        "gap",
        "gap_bound",
    ])
    .map_err(err)?;
    for &k in ks {
        for &l in ls {
            let a = analytic_ratios(k, l).map_err(|e| usage(e.to_string()))?;
            let ratio = a.ratio.to_f64().unwrap_or(f64::NAN);
            let bound = a.gap_to_limit(&ln2).abs();
            w.write_record([
                k.to_string(),
                l.to_string(),
                a.sigma.to_string(),
                decimal(&a.sigma, digits),
                a.gamma.to_string(),
                decimal(&a.gamma, digits),
                a.b_p.to_string(),
                decimal(&a.b_p, digits),
                a.b_q.to_string(),
                decimal(&a.b_q, digits),
                a.ratio.to_string(),
                decimal(&a.ratio, digits),
                format!("{:.12}", (ratio - limit).abs()),
                decimal(&bound, digits),
            ])
            .map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}
