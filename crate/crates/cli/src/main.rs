use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hyperspde::harness::{
    iterated_integral_check, parse_csv, run_study, scalar_strong_order, Scale, StudyConfig,
};
use hyperspde::models::{ModelKind, ModelSpec};
use hyperspde::operators::{
    measure_approximation_order, measure_operator_order, Generator, GeneratorKind,
    OrderMeasurement, TimeScheme,
};
use hyperspde::spectral::{ModeSet, SpectralField};
use hyperspde::Complex64;

mod config;
mod plot;

const THREADS_VAR: &str = "HYPERSPDE_THREADS";

#[derive(Parser)]
#[command(name = "hyperspde", version, about = "Strong convergence studies for Euler and Milstein type SPDE schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo convergence study and write CSV, report and plot.
    Study(StudyArgs),
    /// Measure the approximation order of the rational schemes.
    VerifyOrder(VerifyArgs),
    /// Check the scalar strong orders and the iterated-integral identity.
    Oracle(OracleArgs),
    /// Render a study CSV as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// linear, conv, nemytskii or transport.
    #[arg(long)]
    model: Option<String>,
    /// desk or paper.
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma separated list such as `2^-5,2^-6`.
    #[arg(long)]
    steps: Option<String>,
    /// Reference step, e.g. `2^-12`.
    #[arg(long)]
    href: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    bump_width: Option<f64>,
    #[arg(long)]
    noise_exponent: Option<f64>,
    #[arg(long)]
    grid_factor: Option<usize>,
    /// Coefficient file replacing the potential or kernel (`ℓ re im` per line).
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Also write `errors.svg`.
    #[arg(long)]
    plot: bool,
    /// Write into an existing non-empty output directory.
    #[arg(long)]
    force: bool,
    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// exe, ie or cn; omit to run the standard suite.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 256)]
    modes: usize,
    #[arg(long, default_value_t = 0.5)]
    horizon: f64,
    #[arg(long, default_value = "2^-4,2^-5,2^-6,2^-7,2^-8,2^-9,2^-10")]
    steps: String,
    /// schrodinger or transport.
    #[arg(long, default_value = "schrodinger")]
    generator: String,
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    a_re: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    a_im: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, default_value = "exe")]
    scheme: String,
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
}

#[derive(Args)]
struct PlotArgs {
    csv: PathBuf,
    /// Defaults to the CSV path with an `.svg` extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Study(args) => cmd_study(args),
        Command::VerifyOrder(args) => cmd_verify_order(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn study_settings(args: &StudyArgs) -> Result<BTreeMap<String, String>> {
    let mut map = match &args.config {
        Some(path) => config::load(path)?,
        None => BTreeMap::new(),
    };
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    set("model", args.model.clone());
    set("scale", args.scale.clone());
    set("modes", args.modes.map(|v| v.to_string()));
    set("samples", args.samples.map(|v| v.to_string()));
    set("steps", args.steps.clone());
    set("href", args.href.clone());
    set("seed", args.seed.map(|v| v.to_string()));
    set("out", args.out.as_ref().map(|p| p.display().to_string()));
    set("bump_width", args.bump_width.map(|v| v.to_string()));
    set("noise_exponent", args.noise_exponent.map(|v| v.to_string()));
    set("grid_factor", args.grid_factor.map(|v| v.to_string()));
    set("profile", args.profile.as_ref().map(|p| p.display().to_string()));
    if args.plot {
        set("plot", Some("true".into()));
    }
    if args.force {
        set("force", Some("true".into()));
    }
    Ok(map)
}

fn number<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| anyhow::anyhow!("{key}: cannot parse '{v}': {e}")))
        .transpose()
}

struct StudyPlan {
    config: StudyConfig,
    out: PathBuf,
    plot: bool,
    force: bool,
}

fn resolve_study(map: &BTreeMap<String, String>) -> Result<StudyPlan> {
    let scale: Scale = map.get("scale").map_or(Ok(Scale::Desk), |s| s.parse())?;
    let kind: ModelKind = map.get("model").map_or(Ok(ModelKind::Linear), |s| s.parse())?;
    let mut cfg = StudyConfig::preset(scale, ModelSpec::new(kind));
    if let Some(v) = number(map, "modes")? {
        cfg.modes = v;
    }
    if let Some(v) = number(map, "samples")? {
        cfg.samples = v;
    }
    if let Some(v) = map.get("steps") {
        cfg.steps = config::parse_steps(v)?;
    }
    if let Some(v) = map.get("href") {
        cfg.h_ref = config::parse_step(v)?;
    }
    if let Some(v) = number(map, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = number(map, "horizon")? {
        cfg.horizon = v;
    }
    if let Some(v) = number(map, "p")? {
        cfg.p = v;
    }
    if let Some(v) = number(map, "bump_width")? {
        cfg.model.bump_width = v;
    }
    if let Some(v) = number(map, "noise_exponent")? {
        cfg.model.noise_exponent = v;
    }
    if let Some(v) = number(map, "noise_scale")? {
        cfg.model.noise_scale = v;
    }
    if let Some(v) = number(map, "grid_factor")? {
        cfg.model.grid_factor = v;
    }
    if let Some(v) = number(map, "initial_decay")? {
        cfg.initial_decay = v;
    }
    if let Some(path) = map.get("profile") {
        let modes = ModeSet::new(cfg.modes)?;
        cfg.model.profile = Some(load_profile(Path::new(path), modes)?);
    }
    cfg.threads = match std::env::var(THREADS_VAR) {
        Ok(v) => Some(v.parse().with_context(|| format!("{THREADS_VAR}='{v}' is not a count"))?),
        Err(_) => number(map, "threads")?,
    };
    cfg.validate()?;
    let scale_name = if scale == Scale::Desk { "desk" } else { "paper" };
    let out = map
        .get("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("hyperspde-{kind}-{scale_name}")));
    let flag = |key: &str| map.get(key).map_or(Ok(false), |v| config::parse_bool(key, v));
    Ok(StudyPlan {
        config: cfg,
        out,
        plot: flag("plot")?,
        force: flag("force")?,
    })
}

/// Reads `ℓ re im` lines; modes not listed are zero.
fn load_profile(path: &Path, modes: ModeSet) -> Result<SpectralField> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read profile {}", path.display()))?;
    let mut field = SpectralField::zeros(modes);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [l, re, im] => l
                .parse::<i64>()
                .ok()
                .zip(re.parse::<f64>().ok())
                .zip(im.parse::<f64>().ok()),
            _ => None,
        };
        let Some(((l, re), im)) = parsed else {
            bail!("{} line {}: expected 'ℓ re im'", path.display(), i + 1);
        };
        let Some(pos) = modes.position(l) else {
            bail!("{} line {}: wavenumber {l} outside the mode set", path.display(), i + 1);
        };
        field.coeffs_mut()[pos] = Complex64::new(re, im);
    }
    Ok(field)
}

fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)
            .with_context(|| format!("cannot read {}", dir.display()))?
            .next()
            .is_some();
        if occupied && !force {
            bail!(
                "output directory {} already exists and is not empty (use --force to overwrite)",
                dir.display()
            );
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn cmd_study(args: StudyArgs) -> Result<ExitCode> {
    let plan = resolve_study(&study_settings(&args)?)?;
    prepare_output(&plan.out, plan.force)?;
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = Arc::clone(&cancel);
        // a handler may already be installed when embedded; the study still runs
        let _ = ctrlc::set_handler(move || cancel.store(true, Ordering::Relaxed));
    }
    let outcome = run_study(&plan.config, Some(&cancel))?;
    let report = &outcome.report;
    report.write_to(&plan.out)?;
    if plan.plot {
        let svg = plot::render(&parse_csv(&report.to_csv())?);
        std::fs::write(plan.out.join("errors.svg"), svg)?;
    }
    print!("{}", report.to_text());
    println!("\nwrote {}", plan.out.display());
    if outcome.interrupted {
        eprintln!(
            "interrupted: {} of {} samples completed; partial results written",
            report.samples_completed, plan.config.samples
        );
        return Ok(ExitCode::from(130));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_scheme(name: &str) -> Result<TimeScheme> {
    name.parse::<TimeScheme>().map_err(|e| anyhow::anyhow!("{e}"))
}

fn cmd_verify_order(args: VerifyArgs) -> Result<ExitCode> {
    let generator = match args.generator.as_str() {
        "schrodinger" => Generator::new(GeneratorKind::Schrodinger),
        "transport" => Generator::new(GeneratorKind::Transport),
        other => bail!("unknown generator '{other}' (expected schrodinger or transport)"),
    };
    let modes = ModeSet::new(args.modes)?;
    let hs = config::parse_steps(&args.steps)?;
    let cases: Vec<(TimeScheme, f64)> = match (&args.scheme, args.beta) {
        (None, None) => vec![
            (TimeScheme::ImplicitEuler, 1.0),
            (TimeScheme::ImplicitEuler, 2.0),
            (TimeScheme::CrankNicolson, 1.5),
            (TimeScheme::CrankNicolson, 0.75),
            (TimeScheme::Exponential, 1.0),
        ],
        (None, Some(_)) => bail!("--beta needs --scheme"),
        (Some(s), beta) => {
            let scheme = parse_scheme(s)?;
            let beta = match (scheme, beta) {
                (_, Some(b)) => b,
                (TimeScheme::Exponential, None) => 1.0,
                _ => bail!("--scheme {s} needs --beta"),
            };
            vec![(scheme, beta)]
        }
    };
    println!(
        "scheme  beta   predicted  measured  |diff|   vector   status   (worst case over dom(A^beta), T = {}, K = {})",
        args.horizon,
        modes.len()
    );
    let mut ok = true;
    for (scheme, beta) in cases {
        let measured = measure_operator_order(&generator, scheme, beta, modes, &hs, args.horizon)?;
        let predicted = scheme.predicted_rate(beta);
        match measured {
            OrderMeasurement::Exact { max_error } => {
                println!(
                    "{:<7} {beta:<6.3} {:<10} {:<9} {:<8} {:<8} exact    (max error {max_error:.2e} <= 1e-12)",
                    scheme.short_name(),
                    "-",
                    "-",
                    "-",
                    "-"
                );
            }
            OrderMeasurement::Slope { slope, .. } => {
                let vector = SpectralField::from_fn(modes, |l| {
                    Complex64::new((1.0 + l.abs() as f64).powf(-(2.0 * beta + 1.0)), 0.0)
                });
                let vector = measure_approximation_order(&generator, scheme, &vector, &hs, args.horizon)?
                    .slope()
                    .map_or("-".to_string(), |s| format!("{s:.3}"));
                let diff = (slope - predicted).abs();
                let pass = diff <= args.tolerance;
                ok &= pass;
                let status = if pass { "PASS" } else { "FAIL" };
                println!(
                    "{:<7} {beta:<6.3} {predicted:<10.3} {slope:<9.3} {diff:<8.3} {vector:<8} {status}     (tolerance {})",
                    scheme.short_name(),
                    args.tolerance
                );
            }
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    let scheme = parse_scheme(&args.scheme)?;
    let hs: Vec<f64> = (4..=8).map(|n| 2f64.powi(-n)).collect();
    let a = Complex64::new(args.a_re, args.a_im);
    let b = Complex64::new(args.b, 0.0);
    let orders = scalar_strong_order(scheme, a, b, &hs, args.samples, args.seed)?;
    println!(
        "scalar dX = aX dt + bX dbeta, a = {a}, b = {}, scheme {}, {} samples, seed {}",
        args.b,
        scheme.short_name(),
        args.samples,
        args.seed
    );
    println!("h           euler        milstein");
    for ((h, e), m) in orders.hs.iter().zip(&orders.euler_errors).zip(&orders.milstein_errors) {
        println!("{h:<11.5e} {e:<12.5e} {m:.5e}");
    }
    let mut ok = true;
    if orders.is_exact() {
        println!("exact: every error at or below 1e-12");
    } else if args.b == 0.0 {
        let same = orders.euler_errors == orders.milstein_errors;
        ok &= same;
        println!(
            "b = 0: Milstein equals Euler {}",
            if same { "PASS" } else { "FAIL" }
        );
    } else {
        for (name, measured, target) in [
            ("euler", orders.euler, 0.5),
            ("milstein", orders.milstein, 1.0),
        ] {
            let m = measured.unwrap_or(f64::NAN);
            let pass = (m - target).abs() <= args.tolerance;
            ok &= pass;
            println!(
                "{name:<9} order {m:.3}  target {target} ± {}  {}",
                args.tolerance,
                if pass { "PASS" } else { "FAIL" }
            );
        }
    }
    let check = iterated_integral_check([1.0, 0.6], 0.1, 1000, 10_000, args.seed)?;
    let pass = check.passed(3.0);
    ok &= pass;
    println!(
        "iterated integrals: mean difference {:.3e}, standard error {:.3e}, bound 3 SE  {}",
        check.mean_difference,
        check.standard_error,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_plot(args: PlotArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.csv)
        .with_context(|| format!("cannot read {}", args.csv.display()))?;
    let table = parse_csv(&text).with_context(|| format!("in {}", args.csv.display()))?;
    let out = args.out.unwrap_or_else(|| args.csv.with_extension("svg"));
    std::fs::write(&out, plot::render(&table))
        .with_context(|| format!("cannot write {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}
