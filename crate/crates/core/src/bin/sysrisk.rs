use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sysrisk::clearing::{aggregate, AggregationSpec, LiabilityStructure};
use sysrisk::setvalued::{
    boundary_intrinsic, boundary_monetary, full_grid_scan, minimal_points, write_boundary_csv, write_grid_csv,
    write_minimal_csv, MinimalPointsOptions,
};
use sysrisk::studies::{output_dir, run_study, Prepared, StudyConfig, StudyKind};
use sysrisk::{Error, Result};

#[derive(Parser)]
#[command(name = "sysrisk", version, about = "Intrinsic and monetary systemic risk of clearing networks")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed; SYSRISK_SEED overrides both.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Intrinsic,
    Monetary,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the scenario set and write it as CSV.
    Simulate,
    /// Clear one wealth vector.
    Clear {
        /// Comma separated wealth vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        wealth: Vec<f64>,
        /// Headerless (d+1)×(d+1) liability CSV; defaults to the config network.
        #[arg(long)]
        liabilities: Option<PathBuf>,
        /// Society loss fraction; defaults to the config value.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Risk of the aggregated original, all-eligible and restructured systems.
    Risk {
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        capital: Option<Vec<f64>>,
    },
    /// Boundary approximation of one measure.
    Boundary {
        #[arg(long, value_enum, default_value = "intrinsic")]
        measure: Measure,
    },
    /// Minimal 1-norm points of the intrinsic measure.
    Minimal {
        #[arg(long)]
        plane_step: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        no_prune: bool,
    },
    /// Run a configured case study.
    Study {
        /// Overrides the study kind of the config.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Histogram comparison of the diagonal restructurings.
    Histogram,
}

fn load_config(cli: &Cli) -> Result<StudyConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = StudyConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Ok(text) = std::env::var("SYSRISK_SEED") {
        cfg.seed = text.trim().parse().map_err(|_| Error::Config(format!("SYSRISK_SEED={text:?} is not a u64")))?;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: &Cli) -> Result<serde_json::Value> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Clear { wealth, liabilities, beta } => {
            let cfg = if cli.config.is_some() { Some(load_config(cli)?) } else { None };
            let net = match (liabilities, &cfg) {
                (Some(path), _) => LiabilityStructure::read_csv(File::open(path)?)?,
                (None, Some(cfg)) => cfg.liabilities.build(cfg.market.d)?,
                (None, None) => return Err(Error::Config("give --liabilities or --config".into())),
            };
            let beta = beta.or(cfg.as_ref().map(|c| c.beta));
            let spec = match beta {
                Some(b) => AggregationSpec::new(net, b)?,
                // β only scales the reported aggregate, clearing does not use it
                None => AggregationSpec::new(net, 0.5)?,
            };
            if wealth.len() != spec.d() {
                return Err(Error::Dimension(format!("{} wealth entries for {} banks", wealth.len(), spec.d())));
            }
            let c = spec.clear(wealth)?;
            let lambda = match beta {
                Some(_) => json!(aggregate(wealth, &spec)?),
                None => serde_json::Value::Null,
            };
            Ok(json!({
                "p": c.p,
                "residual": c.residual,
                "defaulting_set": c.defaulting_set.iter().map(|i| i + 1).collect::<Vec<_>>(),
                "iterations": c.iterations,
                "aggregate": lambda,
            }))
        }
        Command::Simulate => {
            let cfg = load_config(cli)?;
            let p = Prepared::new(&cfg)?;
            let dir = output_dir(&cfg, cli.out.as_deref());
            p.market.xt.write_csv(create(&dir, "positions.csv")?)?;
            p.market.st.write_csv(create(&dir, "eligible.csv")?)?;
            let prices = json!({"x0": p.market.x0, "s0": p.market.s0, "seed": cfg.seed, "N": cfg.n});
            std::fs::write(dir.join("initial_values.json"), serde_json::to_string_pretty(&prices)? + "\n")?;
            Ok(json!({"out": dir, "files": ["positions.csv", "eligible.csv", "initial_values.json"]}))
        }
        Command::Risk { lambda, capital } => {
            let cfg = load_config(cli)?;
            let p = Prepared::new(&cfg)?;
            let sys = p.system()?;
            let d = sys.d();
            let original = sys.intrinsic_risk(&vec![0.0; d])?;
            let eligible = sys.intrinsic_risk(&vec![1.0; d])?;
            let mut out = json!({
                "criterion": p.criterion.to_string(),
                "original": original,
                "all_eligible": eligible,
                "feasible_flag": eligible <= 0.0,
            });
            if let Some(l) = lambda {
                out["lambda"] = json!({"point": l, "risk": sys.intrinsic_risk(l)?});
            }
            if let Some(k) = capital {
                out["capital"] = json!({"point": k, "risk": sys.monetary_risk(k)?});
            }
            Ok(out)
        }
        Command::Boundary { measure } => {
            let cfg = load_config(cli)?;
            let p = Prepared::new(&cfg)?;
            let sys = p.system()?;
            let dir = output_dir(&cfg, cli.out.as_deref());
            let feasible = sys.all_eligible_acceptable()?;
            match measure {
                Measure::Intrinsic if feasible => {
                    let a = boundary_intrinsic(&sys, cfg.grid_step, cfg.epsilon)?;
                    write_boundary_csv(&mut create(&dir, "boundary_intrinsic.csv")?, &a, "lambda", &p.metadata(true))?;
                    Ok(json!({"file": dir.join("boundary_intrinsic.csv"), "points": a.points.len(), "feasible_flag": true}))
                }
                Measure::Intrinsic => {
                    let g = full_grid_scan(&sys, cfg.grid_step)?;
                    write_grid_csv(&mut create(&dir, "grid_intrinsic.csv")?, sys.d(), &g, &p.metadata(false))?;
                    Ok(json!({"file": dir.join("grid_intrinsic.csv"), "points": g.len(), "feasible_flag": false}))
                }
                Measure::Monetary => {
                    let a = boundary_monetary(&sys, cfg.grid_step, cfg.epsilon, p.monetary_box())?;
                    write_boundary_csv(&mut create(&dir, "boundary_monetary.csv")?, &a, "k", &p.metadata(feasible))?;
                    Ok(json!({"file": dir.join("boundary_monetary.csv"), "points": a.points.len(), "box": p.monetary_box()}))
                }
            }
        }
        Command::Minimal { plane_step, delta, no_prune } => {
            let cfg = load_config(cli)?;
            let p = Prepared::new(&cfg)?;
            let sys = p.system()?;
            let mc = cfg.minimal.clone();
            let opts = MinimalPointsOptions {
                plane_grid_step: plane_step.or(mc.as_ref().map(|m| m.plane_grid_step)).unwrap_or(cfg.grid_step),
                delta: delta.or(mc.as_ref().map(|m| m.delta)).unwrap_or(1e-3),
                weights: mc.as_ref().and_then(|m| m.weights.clone()),
                prune: !no_prune && mc.as_ref().is_none_or(|m| m.prune),
                refine: mc.as_ref().is_some_and(|m| m.refine),
            };
            let r = minimal_points(&sys, &opts)?;
            let dir = output_dir(&cfg, cli.out.as_deref());
            let mut meta = p.metadata(true);
            meta.grid_step = opts.plane_grid_step;
            meta.epsilon = opts.delta;
            write_minimal_csv(&mut create(&dir, "minimal.csv")?, sys.d(), &r, &meta)?;
            Ok(json!({
                "file": dir.join("minimal.csv"),
                "k_min": r.k_min,
                "bracket": r.bracket,
                "minimal_points": r.minimal_points,
                "membership_tests": r.membership_tests,
            }))
        }
        Command::Study { kind } => {
            let mut cfg = load_config(cli)?;
            if let Some(k) = kind {
                cfg.kind = Some(StudyKind::parse(k)?);
            }
            let dir = output_dir(&cfg, cli.out.as_deref());
            let m = run_study(&cfg, &dir)?;
            Ok(json!({
                "out": dir,
                "study": m.study,
                "files": m.files,
                "nestedness_failures": m.nestedness.iter().filter(|c| c.expected && !c.pass).count(),
            }))
        }
        Command::Histogram => {
            let mut cfg = load_config(cli)?;
            cfg.kind = Some(StudyKind::Histograms);
            let dir = output_dir(&cfg, cli.out.as_deref());
            let m = run_study(&cfg, &dir)?;
            Ok(json!({"out": dir, "diagonal": m.diagonal, "summaries": m.histograms}))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
