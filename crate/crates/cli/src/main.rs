use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use coverwalk::chain::{build_bases_exchange, build_mcmc, validate, Generator};
use coverwalk::concentration::{
    default_grid, herbst_check, pemantle_peres_check, Metric, TailReport, DEFAULT_GRID_POINTS,
};
use coverwalk::decompose::{certify_main, synthesize_flip_swap, CertifyOptions, SynthesisView, Target};
use coverwalk::dynamics::{metropolis_bound, mixing_bound, mixing_report, BoundKind};
use coverwalk::formats::{generator_document, measure_document, parse_generator, parse_measure};
use coverwalk::functional::{
    poincare_exact, sobolev_estimate, two_state_constants, FormKind, Observable, SobolevOptions,
};
use coverwalk::lattice_measure::{condition, split, AnyMeasure, BitVector, BooleanMeasure, MeasureView};
use coverwalk::negdep::{check_scp, ScpMode, ScpOptions, DEFAULT_SCP_CEILING, DEFAULT_SCP_SAMPLES};
use coverwalk::scalar::parse_rational;
use coverwalk::suite::{run_suite, SuiteOptions};
use coverwalk::Scalar;

/// Covering couplings, reversible walks and functional-inequality constants
/// for measures on the Boolean lattice.
#[derive(Parser)]
#[command(name = "coverwalk", version)]
struct Cli {
    /// Indent JSON output (and print tables where a command has one).
    #[arg(long, global = true)]
    pretty: bool,

    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, condition and split measures.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Stochastic covering property.
    #[command(subcommand)]
    Scp(ScpCmd),
    /// Construct generators.
    #[command(subcommand)]
    Walk(WalkCmd),
    /// Poincaré, modified log-Sobolev and log-Sobolev constants.
    #[command(subcommand)]
    Constants(ConstantsCmd),
    /// Mixing times and their bounds.
    #[command(subcommand)]
    Mixing(MixingCmd),
    /// Tail bounds for observables.
    #[command(subcommand)]
    Conc(ConcCmd),
    /// Reference corpus checks.
    #[command(subcommand)]
    Suite(SuiteCmd),
}

#[derive(Args)]
struct MeasureArg {
    /// Measure file (JSON).
    #[arg(long)]
    measure: PathBuf,
}

#[derive(Args)]
struct WalkArg {
    /// mcmc, bases-exchange, synthesize, or a generator file.
    #[arg(long, default_value = "mcmc")]
    walk: String,
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Build a measure from an inline spec or a file.
    Build {
        /// Inline measure document, e.g. '{"n":2,"kind":"product","p":[0.5,0.5]}'.
        #[arg(long, conflicts_with = "measure", required_unless_present = "measure")]
        spec: Option<String>,
        #[arg(long)]
        measure: Option<PathBuf>,
    },
    /// Condition on fixed coordinates.
    Condition {
        #[command(flatten)]
        m: MeasureArg,
        /// Assignments `i=b`, comma separated, 0-based coordinates.
        #[arg(long, value_delimiter = ',', required = true)]
        fix: Vec<String>,
    },
    /// Split along one coordinate into its two blocks.
    Split {
        #[command(flatten)]
        m: MeasureArg,
        #[arg(long)]
        coordinate: usize,
    },
}

#[derive(Subcommand)]
enum ScpCmd {
    Check {
        #[command(flatten)]
        m: MeasureArg,
        /// full or sampled.
        #[arg(long, default_value = "full")]
        mode: String,
        #[arg(long, default_value_t = DEFAULT_SCP_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SCP_CEILING)]
        ceiling: usize,
        /// Include every constructed coupling in the report.
        #[arg(long)]
        keep_couplings: bool,
    },
}

#[derive(Subcommand)]
enum WalkCmd {
    Mcmc(MeasureArg),
    BasesExchange(MeasureArg),
    Synthesize(MeasureArg),
}

#[derive(Subcommand)]
enum ConstantsCmd {
    /// Spectral gap.
    Exact {
        #[command(flatten)]
        m: MeasureArg,
        #[command(flatten)]
        w: WalkArg,
    },
    /// Multi-start upper estimate of the MLSI or LSI constant.
    Estimate {
        #[command(flatten)]
        m: MeasureArg,
        #[command(flatten)]
        w: WalkArg,
        /// mlsi or lsi (poincare is computed exactly).
        #[arg(long, default_value = "mlsi")]
        kind: String,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
    },
    /// Closed forms for the chain on {0,1} with rates a (0 to 1) and b (1 to 0).
    TwoState {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Recursive certificate for the universal lower bound.
    Certify {
        #[command(flatten)]
        m: MeasureArg,
        #[command(flatten)]
        w: WalkArg,
        /// lambda, alpha or rho.
        #[arg(long, default_value = "alpha")]
        target: String,
        /// Re-check SCP on every restricted measure.
        #[arg(long)]
        paranoid: bool,
    },
}

#[derive(Subcommand)]
enum MixingCmd {
    /// Total-variation mixing time from a start state, with its bounds.
    Time {
        #[command(flatten)]
        m: MeasureArg,
        #[command(flatten)]
        w: WalkArg,
        /// Start state as a bit-string; defaults to the least likely state.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
    },
    /// Evaluate a mixing bound from a constant, or the closed form for given k and n.
    Bound {
        /// pi or mlsi.
        #[arg(long, default_value = "mlsi")]
        kind: String,
        #[arg(long, required_unless_present_all = ["k", "n"])]
        constant: Option<f64>,
        /// Stationary mass of the start state.
        #[arg(long)]
        pi: f64,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        #[arg(long, requires = "n")]
        k: Option<usize>,
        #[arg(long, requires = "k")]
        n: Option<usize>,
    },
}

#[derive(Args)]
struct ObservableArg {
    /// Observable: inline JSON or a file, either a list aligned with the
    /// support or a map from bit-string to value. Defaults to x_0.
    #[arg(long)]
    observable: Option<String>,
    /// Thresholds, comma separated; defaults to an even grid over the range.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
}

#[derive(Subcommand)]
enum ConcCmd {
    /// Entropy-method bound with a certified (or given) MLSI constant.
    Herbst {
        #[command(flatten)]
        m: MeasureArg,
        #[command(flatten)]
        w: WalkArg,
        #[command(flatten)]
        o: ObservableArg,
        /// MLSI lower bound; defaults to the certified one.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Lipschitz bound for homogeneous measures.
    Pp {
        #[command(flatten)]
        m: MeasureArg,
        #[command(flatten)]
        o: ObservableArg,
        /// hamming or flip-swap.
        #[arg(long, default_value = "hamming")]
        metric: String,
    },
}

#[derive(Subcommand)]
enum SuiteCmd {
    Run,
}

/// A report and whether its checks passed.
struct Outcome {
    report: Value,
    pass: bool,
    table: Option<String>,
}

impl Outcome {
    fn ok(report: impl Serialize) -> anyhow::Result<Self> {
        Self::checked(report, true)
    }

    fn checked(report: impl Serialize, pass: bool) -> anyhow::Result<Self> {
        Ok(Self {
            report: serde_json::to_value(report)?,
            pass,
            table: None,
        })
    }
}

macro_rules! with_measure {
    ($any:expr, $m:ident => $body:expr) => {
        match $any {
            AnyMeasure::Exact($m) => $body,
            AnyMeasure::Real($m) => $body,
        }
    };
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

fn load_measure(path: &Path) -> anyhow::Result<AnyMeasure> {
    parse_measure(&read_json(path)?).with_context(|| format!("bad measure file {}", path.display()))
}

fn load_walk<S: Scalar>(m: &BooleanMeasure<S>, walk: &str) -> anyhow::Result<Generator<S>> {
    Ok(match walk {
        "mcmc" => build_mcmc(m),
        "bases-exchange" => build_bases_exchange(m)?,
        "synthesize" => synthesize_flip_swap(m)?.averaged,
        path => {
            let doc = read_json(Path::new(path))?;
            parse_generator(&doc, m).with_context(|| format!("bad generator file {path}"))?
        }
    })
}

fn inline_or_file(arg: &str) -> anyhow::Result<Value> {
    let t = arg.trim_start();
    if t.starts_with('[') || t.starts_with('{') {
        Ok(serde_json::from_str(t).context("observable is not valid JSON")?)
    } else {
        read_json(Path::new(arg))
    }
}

fn load_observable<S: Scalar>(m: &BooleanMeasure<S>, arg: Option<&str>) -> anyhow::Result<Observable> {
    let Some(arg) = arg else {
        return Ok(Observable::from_fn(m, |x| if x.get(0) { 1.0 } else { 0.0 })?);
    };
    let values = match inline_or_file(arg)? {
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| anyhow!("observable entries must be numbers")))
            .collect::<anyhow::Result<Vec<f64>>>()?,
        Value::Object(map) => {
            let mut values = vec![None; m.len()];
            for (state, v) in &map {
                let x = BitVector::parse(state)?;
                let i = m
                    .index_of(x.bits())
                    .filter(|_| x.dimension() == m.dimension())
                    .ok_or_else(|| anyhow!("observable state {state} is outside the support"))?;
                values[i] = Some(v.as_f64().ok_or_else(|| anyhow!("observable value for {state} is not a number"))?);
            }
            values
                .into_iter()
                .enumerate()
                .map(|(i, v)| v.ok_or_else(|| anyhow!("observable has no value for {}", m.state(i))))
                .collect::<anyhow::Result<Vec<f64>>>()?
        }
        _ => bail!("observable must be a JSON list or object"),
    };
    if values.len() != m.len() {
        bail!("observable has {} values but the support has {} states", values.len(), m.len());
    }
    Ok(Observable::new(values)?)
}

fn grid_for(o: &ObservableArg, f: &Observable) -> Vec<f64> {
    if o.grid.is_empty() {
        default_grid(f, o.grid_points)
    } else {
        o.grid.clone()
    }
}

fn measure_report<S: Scalar>(m: &BooleanMeasure<S>) -> anyhow::Result<Value> {
    let mut doc = measure_document(m);
    let view = serde_json::to_value(MeasureView::from(m))?;
    if let (Value::Object(d), Value::Object(v)) = (&mut doc, view) {
        for (k, val) in v {
            d.entry(k).or_insert(val);
        }
    }
    Ok(doc)
}

fn tail_table(r: &TailReport) -> String {
    let mut s = format!("{:>12} {:>14} {:>14} {:>6}\n", "a", "tail", "bound", "ok");
    for p in &r.points {
        s += &format!("{:>12.6} {:>14.6e} {:>14.6e} {:>6}\n", p.a, p.exact, p.bound, p.pass);
    }
    s
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let seed = cli.seed;
    match &cli.command {
        Command::Measure(cmd) => match cmd {
            MeasureCmd::Build { spec, measure } => {
                let any = match (spec, measure) {
                    (Some(s), _) => {
                        let doc: Value = serde_json::from_str(s).context("--spec is not valid JSON")?;
                        parse_measure(&doc)?
                    }
                    (None, Some(p)) => load_measure(p)?,
                    (None, None) => bail!("one of --spec or --measure is required"),
                };
                Outcome::ok(with_measure!(&any, m => measure_report(m)?))
            }
            MeasureCmd::Condition { m, fix } => {
                let mut assignment = BTreeMap::new();
                for item in fix {
                    let (i, b) = item
                        .split_once('=')
                        .ok_or_else(|| anyhow!("assignment {item:?} is not of the form i=b"))?;
                    let i: usize = i.trim().parse().with_context(|| format!("bad coordinate in {item:?}"))?;
                    let b = match b.trim() {
                        "0" => false,
                        "1" => true,
                        other => bail!("bad value {other:?} in {item:?}"),
                    };
                    assignment.insert(i, b);
                }
                with_measure!(&load_measure(&m.measure)?, mm => {
                    let c = condition(mm, &assignment)?;
                    let mut report = measure_report(&c.measure)?;
                    report["coordinates"] = json!(c.coordinates);
                    Outcome::ok(report)
                })
            }
            MeasureCmd::Split { m, coordinate } => with_measure!(&load_measure(&m.measure)?, mm => {
                let s = split(mm, *coordinate)?;
                Outcome::ok(json!({
                    "coordinate": s.coordinate,
                    "masses": s.masses.iter().map(Scalar::to_json).collect::<Vec<_>>(),
                    "indices": s.indices,
                    "blocks": [measure_report(&s.blocks[0])?, measure_report(&s.blocks[1])?],
                }))
            }),
        },
        Command::Scp(ScpCmd::Check {
            m,
            mode,
            samples,
            ceiling,
            keep_couplings,
        }) => {
            let mode = match mode.as_str() {
                "full" => ScpMode::Full,
                "sampled" => ScpMode::Sampled { seed, count: *samples },
                other => bail!("unknown SCP mode {other:?} (full or sampled)"),
            };
            let opts = ScpOptions {
                mode,
                ceiling: *ceiling,
                keep_couplings: *keep_couplings,
            };
            let r = with_measure!(&load_measure(&m.measure)?, mm => check_scp(mm, &opts)?);
            let holds = r.holds;
            Outcome::checked(r, holds)
        }
        Command::Walk(cmd) => {
            let (m, kind) = match cmd {
                WalkCmd::Mcmc(m) => (m, "mcmc"),
                WalkCmd::BasesExchange(m) => (m, "bases-exchange"),
                WalkCmd::Synthesize(m) => (m, "synthesize"),
            };
            with_measure!(&load_measure(&m.measure)?, mm => {
                if kind == "synthesize" {
                    let r = synthesize_flip_swap(mm)?;
                    let pass = r.delta_within_bound() && r.diagonal_failures.is_empty();
                    Outcome::checked(SynthesisView::from(&r), pass)
                } else {
                    let q = load_walk(mm, kind)?;
                    let stats = validate(&q)?;
                    Outcome::ok(json!({
                        "generator": generator_document(&q),
                        "stats": serde_json::to_value(&stats)?,
                    }))
                }
            })
        }
        Command::Constants(cmd) => match cmd {
            ConstantsCmd::Exact { m, w } => with_measure!(&load_measure(&m.measure)?, mm => {
                Outcome::ok(poincare_exact(&load_walk(mm, &w.walk)?)?)
            }),
            ConstantsCmd::Estimate {
                m,
                w,
                kind,
                restarts,
                max_iter,
            } => {
                let kind: FormKind = kind.parse()?;
                let opts = SobolevOptions {
                    restarts: *restarts,
                    max_iter: *max_iter,
                    seed,
                    ..SobolevOptions::default()
                };
                with_measure!(&load_measure(&m.measure)?, mm => {
                    Outcome::ok(sobolev_estimate(&load_walk(mm, &w.walk)?, kind, &opts)?)
                })
            }
            ConstantsCmd::TwoState { a, b } => {
                Outcome::ok(two_state_constants(&parse_rational(a)?, &parse_rational(b)?)?)
            }
            ConstantsCmd::Certify { m, w, target, paranoid } => {
                let target: Target = target.parse()?;
                let opts = CertifyOptions { paranoid: *paranoid };
                with_measure!(&load_measure(&m.measure)?, mm => {
                    let cert = certify_main(mm, &load_walk(mm, &w.walk)?, target, &opts)?;
                    let holds = cert.holds;
                    Outcome::checked(cert, holds)
                })
            }
        },
        Command::Mixing(cmd) => match cmd {
            MixingCmd::Time { m, w, start, epsilon } => with_measure!(&load_measure(&m.measure)?, mm => {
                let q = load_walk(mm, &w.walk)?;
                let x = match start {
                    Some(s) => {
                        let bits = BitVector::parse(s)?;
                        mm.index_of(bits.bits())
                            .filter(|_| bits.dimension() == mm.dimension())
                            .ok_or_else(|| anyhow!("start state {s} is outside the support"))?
                    }
                    None => (0..mm.len())
                        .min_by(|&i, &j| mm.weight(i).as_f64().total_cmp(&mm.weight(j).as_f64()))
                        .ok_or_else(|| anyhow!("empty support"))?,
                };
                let r = mixing_report(&q, x, *epsilon)?;
                let pass = r.within_bounds;
                Outcome::checked(r, pass)
            }),
            MixingCmd::Bound {
                kind,
                constant,
                pi,
                epsilon,
                k,
                n,
            } => {
                let b = match (k, n, constant) {
                    (Some(k), Some(n), _) => metropolis_bound(*k, *n, *pi, *epsilon)?,
                    (_, _, Some(c)) => mixing_bound(kind.parse::<BoundKind>()?, *c, *pi, *epsilon)?,
                    _ => bail!("give --constant, or both --k and --n"),
                };
                Outcome::ok(b)
            }
        },
        Command::Conc(cmd) => match cmd {
            ConcCmd::Herbst { m, w, o, alpha } => with_measure!(&load_measure(&m.measure)?, mm => {
                let q = load_walk(mm, &w.walk)?;
                let alpha = match alpha {
                    Some(a) => *a,
                    None => {
                        let cert = certify_main(mm, &q, Target::Alpha, &CertifyOptions::default())?;
                        match (&cert.claimed_bound, cert.holds) {
                            (Some(b), true) => b.as_f64(),
                            _ => 0.0,
                        }
                    }
                };
                let f = load_observable(mm, o.observable.as_deref())?;
                let r = herbst_check(mm, &q, &f, alpha, &grid_for(o, &f))?;
                let mut out = Outcome::checked(&r, r.all_pass)?;
                out.table = Some(tail_table(&r));
                Ok(out)
            }),
            ConcCmd::Pp { m, o, metric } => with_measure!(&load_measure(&m.measure)?, mm => {
                let metric: Metric = metric.parse()?;
                let f = load_observable(mm, o.observable.as_deref())?;
                let r = pemantle_peres_check(mm, &f, &grid_for(o, &f), metric)?;
                let mut out = Outcome::checked(&r, r.all_pass)?;
                out.table = Some(tail_table(&r));
                Ok(out)
            }),
        },
        Command::Suite(SuiteCmd::Run) => {
            let r = run_suite(&SuiteOptions { seed })?;
            let table = r.criteria.iter().map(|c| c.line() + "\n").collect();
            let pass = r.all_pass;
            let mut out = Outcome::checked(r, pass)?;
            out.table = Some(table);
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let text = if cli.pretty {
                match &out.table {
                    Some(t) => t.clone(),
                    None => serde_json::to_string_pretty(&out.report).expect("report serializes") + "\n",
                }
            } else {
                serde_json::to_string(&out.report).expect("report serializes") + "\n"
            };
            print!("{text}");
            if out.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("coverwalk: check failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("coverwalk: {e:#}");
            ExitCode::from(2)
        }
    }
}
