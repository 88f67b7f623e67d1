use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use pass_isac::experiment::{
    load_config_str_as, run_experiment, ExperimentKind, ExperimentSpec, SummaryRow,
};
use pass_isac::oracle::{run_validation, write_validation_csv, ValidationPlan};
use pass_isac::{IsacWeights, Link, Method, Scene, SystemConfig, Vec3};

#[derive(Debug, Parser)]
#[command(name = "pass-isac", version, about = "Pinching-antenna ISAC simulator")]
struct Cli {
    /// Flat TOML config file. Unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design one scene and print the solution as JSON.
    Design(DesignArgs),
    /// Weighted-rate sweep over side length or element count.
    Sweep(SweepArgs),
    /// Rate region: sweep the communication weight at one geometry.
    Region(RunArgs),
    /// Run the oracle checks and write validation.csv.
    Validate(ValidateArgs),
    /// Print the effective system config and experiment spec.
    Defaults(DefaultsArgs),
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// User ground position `x,y`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    user: Vec3,
    /// Target position `x,y` or `x,y,z`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    target: Vec3,
    /// Communication weight; sensing gets the rest.
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    #[arg(long, default_value = "dl")]
    link: Link,
    #[arg(long, default_value = "pass")]
    method: Method,
    /// Print compact JSON on one line.
    #[arg(long)]
    compact: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepAxis {
    SideLength,
    Elements,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SweepAxis::SideLength)]
    over: SweepAxis,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    link: Option<Link>,
    /// Comma-separated subset of `pass,baseline`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    side_lengths: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    element_counts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Keep records from an earlier run in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    global_scenes: Option<usize>,
    #[arg(long)]
    jensen_draws: Option<usize>,
}

#[derive(Debug, Args)]
struct DefaultsArgs {
    /// Experiment whose spec defaults to show.
    #[arg(long, default_value = "single")]
    experiment: ExperimentKind,
}

fn parse_point(text: &str) -> std::result::Result<Vec3, String> {
    let parts = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match parts[..] {
        [x, y] => Ok(Vec3::new(x, y, 0.0)),
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected `x,y` or `x,y,z`, got `{text}`")),
    }
}

fn load(path: Option<&Path>, kind: ExperimentKind) -> Result<(SystemConfig, ExperimentSpec)> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    let what = path.map_or_else(|| "defaults".to_owned(), |p| p.display().to_string());
    load_config_str_as(&text, Some(kind)).with_context(|| format!("loading {what}"))
}

impl RunArgs {
    fn apply(self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.out {
            spec.output = v;
        }
        if let Some(v) = self.link {
            spec.link = v;
        }
        if let Some(v) = self.methods {
            spec.methods = v;
        }
        if let Some(v) = self.drops {
            spec.drops = v;
        }
        if let Some(v) = self.side_lengths {
            spec.side_lengths = v;
        }
        if let Some(v) = self.element_counts {
            spec.element_counts = v;
        }
        if let Some(v) = self.weights {
            spec.weights = v;
        }
        spec.resume |= self.resume;
        spec.validate()?;
        Ok(())
    }
}

fn run(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<()> {
    info!(
        "{}: {} points x {} drops, seed {}",
        spec.kind,
        spec.points().len(),
        spec.drops,
        spec.seed
    );
    let out = run_experiment(spec, cfg)?;
    if out.reused > 0 {
        info!("reused {} records", out.reused);
    }
    print_summary(&out.summary);
    println!("wrote {}", spec.output.display());
    Ok(())
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:>5} {:>8} {:>6} {:>4} {:>5} {:>10} {:>10} {:>10}",
        "point", "method", "D_x", "N", "w", "SE", "SMI", "weighted"
    );
    for r in rows {
        println!(
            "{:>5} {:>8} {:>6} {:>4} {:>5} {:>10.4} {:>10.4} {:>10.4}",
            r.point,
            r.method.to_string(),
            r.side_length,
            r.n_tx,
            r.weight,
            r.se_mean,
            r.smi_mean,
            r.weighted_mean
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Design(args) => {
            let (cfg, _) = load(config, ExperimentKind::Single)?;
            let scene = Scene {
                user: args.user,
                target: args.target,
            };
            if scene.user.z != 0.0 {
                bail!("the user stands on the ground; drop the z coordinate");
            }
            let weights = IsacWeights::from_communication_share(args.weight)?;
            let solution = pass_isac::design(args.method, args.link, &scene, &weights, &cfg)?;
            let json = if args.compact {
                serde_json::to_string(&solution)?
            } else {
                serde_json::to_string_pretty(&solution)?
            };
            println!("{json}");
        }
        Command::Sweep(args) => {
            let kind = match args.over {
                SweepAxis::SideLength => ExperimentKind::SweepSidelength,
                SweepAxis::Elements => ExperimentKind::SweepElements,
            };
            let (cfg, mut spec) = load(config, kind)?;
            args.run.apply(&mut spec)?;
            run(&cfg, &spec)?;
        }
        Command::Region(args) => {
            let (cfg, mut spec) = load(config, ExperimentKind::RateRegion)?;
            args.apply(&mut spec)?;
            run(&cfg, &spec)?;
        }
        Command::Validate(args) => {
            let (cfg, spec) = load(config, ExperimentKind::Validate)?;
            let mut plan = ValidationPlan {
                seed: args.seed.unwrap_or(spec.seed),
                ..ValidationPlan::default()
            };
            if let Some(v) = args.scenes {
                plan.scenes = v;
            }
            if let Some(v) = args.global_scenes {
                plan.global_scenes = v;
            }
            if let Some(v) = args.jensen_draws {
                plan.jensen_draws = v;
            }
            let out = args.out.unwrap_or(spec.output);
            std::fs::create_dir_all(&out)?;
            let records = run_validation(&cfg, &plan)?;
            let path = out.join(pass_isac::experiment::runner::VALIDATION_FILE);
            write_validation_csv(&path, &records)?;
            let mut failed = 0;
            for r in &records {
                println!(
                    "[{}] {:<24} gap {:.3e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.gap
                );
                failed += usize::from(!r.passed);
            }
            println!("wrote {}", path.display());
            if failed > 0 {
                eprintln!("{failed} validation check(s) failed");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Defaults(args) => {
            let (cfg, spec) = load(config, args.experiment)?;
            let json = serde_json::json!({ "system": cfg, "experiment": spec });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
