use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rationing::evaluator::{evaluate, AllocationProfile};
use rationing::io::{
    evaluation_csv, parse_mechanism, parse_profile, prices_csv, serialize_mechanism,
    serialize_profile, verification_csv,
};
use rationing::market::{parse_market, Market};
use rationing::mechanism::PricedMechanism;
use rationing::optimizer::{default_tolerance, AscentOptions, SolveReport};
use rationing::oracle::{brute_force_optimal, OracleGrid};
use rationing::pipeline::{compare, solve};
use rationing::scalar::{render, Literal, Rational, Scalar};
use rationing::verifier::{verify, Verification};

#[derive(Debug, Parser)]
#[command(
    name = "rationing",
    version,
    about = "Revenue-optimal anonymous selling over several periods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: Config,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the allocation profile, extract prices and verify them.
    Solve { market: PathBuf },
    /// Evaluate a given allocation profile.
    Eval {
        market: PathBuf,
        #[arg(long)]
        profile: PathBuf,
    },
    /// Check that a mechanism implements a profile in equilibrium.
    Verify {
        market: PathBuf,
        #[arg(long)]
        mechanism: PathBuf,
        /// Profile to check against; defaults to the one the menu implies.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Exhaustive search over a level grid (small instances only).
    Oracle { market: PathBuf },
    /// Anonymous optimum against posted prices and per-cohort pricing.
    Compare { market: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rational,
    Float,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Rational => "rational",
            Mode::Float => "float",
        }
    }
}

#[derive(Debug, Args)]
struct Config {
    #[arg(long, value_enum, default_value_t = Mode::Rational, global = true)]
    mode: Mode,
    /// Comparison tolerance [default: 1e-9 rational, 1e-7 float]
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Random restarts besides the all-zero and all-one profiles.
    #[arg(long, default_value_t = 16, global = true)]
    starts: usize,
    #[arg(long, default_value_t = 50, global = true)]
    sweeps: usize,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Directory for report files; nothing is written without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Oracle level grid, e.g. `0,1/4,1/2,3/4,1`.
    #[arg(long, default_value = "0,1/4,1/2,3/4,1", global = true)]
    levels: String,
    /// Oracle cap on the number of profiles enumerated.
    #[arg(long, default_value_t = 2_000_000, global = true)]
    max_profiles: u64,
}

/// How a run ended, mapped to the process exit code.
enum Failure {
    /// Unreadable, malformed or invalid input.
    Input(anyhow::Error),
    /// A check failed or the computation could not complete.
    Run(anyhow::Error),
}

type Outcome = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn failed<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Run(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.config.mode {
        Mode::Rational => run::<Rational>(&cli),
        Mode::Float => run::<f64>(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn load_market<S: Scalar>(path: &Path) -> Result<Market<S>, Failure> {
    parse_market(&read(path)?)
        .with_context(|| format!("in {}", path.display()))
        .map_err(input)
}

fn ascent_options<S: Scalar>(cfg: &Config) -> Result<AscentOptions, Failure> {
    let tol = cfg.tol.unwrap_or_else(default_tolerance::<S>);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(input(anyhow!("--tol must be positive, got {tol}")));
    }
    if cfg.starts == 0 {
        return Err(input(anyhow!("--starts must be at least 1")));
    }
    Ok(AscentOptions {
        starts: cfg.starts,
        max_sweeps: cfg.sweeps,
        tol,
        seed: cfg.seed,
    })
}

fn oracle_grid<S: Scalar>(cfg: &Config) -> Result<OracleGrid<S>, Failure> {
    let levels = cfg
        .levels
        .split(',')
        .map(|s| s.parse::<Literal>().map(|l| S::from_literal(&l)))
        .collect::<Result<Vec<S>, _>>()
        .context("--levels")
        .map_err(input)?;
    let mut grid = OracleGrid::new(levels).context("--levels").map_err(input)?;
    grid.max_profiles = cfg.max_profiles;
    Ok(grid)
}

/// Exact value followed by its decimal when the two differ.
fn show<S: Scalar>(x: &S) -> String {
    let exact = render(x);
    let dec = x.to_f64().to_string();
    if exact == dec {
        exact
    } else {
        format!("{exact} (~{dec})")
    }
}

/// Collects artifact files and writes them at the end of a run.
struct Artifacts {
    files: Vec<(&'static str, String)>,
}

impl Artifacts {
    fn new(command: &str, market: &Path, cfg: &Config, opts: &AscentOptions) -> Self {
        let mut meta = String::new();
        let _ = writeln!(meta, "command: {command}");
        let _ = writeln!(meta, "market: {}", market.display());
        let _ = writeln!(meta, "mode: {}", cfg.mode.as_str());
        let _ = writeln!(meta, "tol: {:e}", opts.tol);
        let _ = writeln!(meta, "seed: {}", opts.seed);
        let _ = writeln!(meta, "starts: {}", opts.starts);
        let _ = writeln!(meta, "max_sweeps: {}", opts.max_sweeps);
        Artifacts {
            files: vec![("run.txt", meta)],
        }
    }

    fn meta(&mut self, line: String) {
        self.files[0].1.push_str(&line);
        self.files[0].1.push('\n');
    }

    fn add(&mut self, name: &'static str, body: String) {
        self.files.push((name, body));
    }

    fn write(&self, out: Option<&Path>) -> Outcome {
        let Some(dir) = out else {
            return Ok(());
        };
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(failed)?;
        for (name, body) in &self.files {
            let path = dir.join(name);
            fs::write(&path, body)
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(failed)?;
        }
        Ok(())
    }
}

fn record_report<S: Scalar>(art: &mut Artifacts, report: &SolveReport<S>) {
    for s in &report.starts {
        art.meta(format!(
            "start {}: revenue {} sweeps {} converged {}",
            s.label,
            render(&s.revenue),
            s.sweeps,
            s.converged
        ));
    }
    art.meta(format!(
        "best_start: {}",
        report
            .best_start()
            .map_or(String::from("none"), |i| report.starts[i].label.clone())
    ));
    art.meta(format!("sweeps: {}", report.sweeps));
    art.meta(format!("converged: {}", report.converged));
    art.meta(format!("binding: {}", report.binding));
    art.meta(format!("revenue: {}", render(&report.revenue)));
    art.meta(format!(
        "inventory_used: {}",
        render(&report.inventory_used)
    ));
}

fn print_mechanism<S: Scalar>(mech: &PricedMechanism<S>) {
    for (t, menu) in mech.periods.iter().enumerate() {
        let mut line = format!("period {}: {}", t + 1, menu.mode().as_str());
        if let Some(p) = &menu.posted {
            let cmp = if p.threshold.inclusive { ">=" } else { ">" };
            let _ = write!(
                line,
                ", price {} for v {cmp} {}",
                show(&p.price),
                render(&p.threshold.at)
            );
        }
        if let Some(l) = &menu.lottery {
            let cmp = if l.threshold.inclusive { ">=" } else { ">" };
            let _ = write!(
                line,
                ", lottery for v {cmp} {}: win prob {}, price {}, stock {}",
                render(&l.threshold.at),
                show(&l.service_prob),
                show(&l.per_winner_price),
                show(&l.quantity)
            );
        }
        println!("{line}");
    }
}

fn print_verification<S: Scalar>(v: &Verification<S>) {
    if v.passed() {
        println!("verification: pass");
    } else {
        println!("verification: FAIL");
        for violation in &v.violations {
            println!("  {violation}");
        }
    }
}

fn run<S: Scalar>(cli: &Cli) -> Outcome {
    let cfg = &cli.config;
    let opts = ascent_options::<S>(cfg)?;
    match &cli.command {
        Command::Solve { market } => cmd_solve::<S>(market, cfg, &opts),
        Command::Eval { market, profile } => cmd_eval::<S>(market, profile, cfg, &opts),
        Command::Verify {
            market,
            mechanism,
            profile,
        } => cmd_verify::<S>(market, mechanism, profile.as_deref(), cfg, &opts),
        Command::Oracle { market } => cmd_oracle::<S>(market, cfg, &opts),
        Command::Compare { market } => cmd_compare::<S>(market, cfg, &opts),
    }
}

fn cmd_solve<S: Scalar>(path: &Path, cfg: &Config, opts: &AscentOptions) -> Outcome {
    let m = load_market::<S>(path)?;
    let sol = solve(&m, opts).map_err(failed)?;
    let report = &sol.report;
    println!("revenue: {}", show(&report.revenue));
    match m.inventory().bound() {
        Some(k) => println!(
            "inventory used: {} of {}{}",
            show(&report.inventory_used),
            render(k),
            if report.binding { " (binding)" } else { "" }
        ),
        None => println!("inventory used: {}", show(&report.inventory_used)),
    }
    println!(
        "sweeps: {}, starts: {}, converged: {}",
        report.sweeps,
        report.starts.len(),
        report.converged
    );
    print_mechanism(&sol.mechanism);
    print_verification(&sol.verification);

    let mut art = Artifacts::new("solve", path, cfg, opts);
    record_report(&mut art, report);
    art.meta(format!(
        "verification: {}",
        if sol.verification.passed() {
            "pass"
        } else {
            "fail"
        }
    ));
    art.add(
        "report.csv",
        evaluation_csv(&m, &report.profile, &sol.evaluation),
    );
    art.add("profile.json", serialize_profile(&report.profile));
    art.add("mechanism.json", serialize_mechanism(&sol.mechanism));
    art.add("prices.csv", prices_csv(&sol.mechanism));
    art.add(
        "verification.csv",
        verification_csv(&m, &sol.verification.report),
    );
    art.write(cfg.out.as_deref())?;
    if sol.verification.passed() {
        Ok(())
    } else {
        Err(failed(anyhow!(
            "the extracted mechanism failed verification"
        )))
    }
}

fn load_profile<S: Scalar>(path: &Path, m: &Market<S>) -> Result<AllocationProfile<S>, Failure> {
    let a = parse_profile::<S>(&read(path)?)
        .with_context(|| format!("in {}", path.display()))
        .map_err(input)?;
    if a.periods() != m.periods() {
        return Err(input(anyhow!(
            "{} has {} periods, the market has {}",
            path.display(),
            a.periods(),
            m.periods()
        )));
    }
    Ok(a)
}

fn cmd_eval<S: Scalar>(path: &Path, profile: &Path, cfg: &Config, opts: &AscentOptions) -> Outcome {
    let m = load_market::<S>(path)?;
    let a = load_profile(profile, &m)?;
    let e = evaluate(&m, &a).map_err(input)?;
    println!("revenue: {}", show(&e.revenue));
    println!("inventory used: {}", show(&e.inventory_used));
    if !m.inventory().admits(&e.inventory_used, opts.tol) {
        println!("warning: the profile exceeds the available inventory");
    }
    println!("welfare: {}", show(&e.welfare));

    let mut art = Artifacts::new("eval", path, cfg, opts);
    art.meta(format!("profile: {}", profile.display()));
    art.meta(format!("revenue: {}", render(&e.revenue)));
    art.meta(format!("inventory_used: {}", render(&e.inventory_used)));
    art.meta(format!("welfare: {}", render(&e.welfare)));
    art.add("report.csv", evaluation_csv(&m, &a, &e));
    art.write(cfg.out.as_deref())
}

fn cmd_verify<S: Scalar>(
    path: &Path,
    mechanism: &Path,
    profile: Option<&Path>,
    cfg: &Config,
    opts: &AscentOptions,
) -> Outcome {
    let m = load_market::<S>(path)?;
    let mech = parse_mechanism::<S>(&read(mechanism)?)
        .with_context(|| format!("in {}", mechanism.display()))
        .map_err(input)?;
    if mech.periods.len() != m.periods() {
        return Err(input(anyhow!(
            "{} has {} periods, the market has {}",
            mechanism.display(),
            mech.periods.len(),
            m.periods()
        )));
    }
    let a = match profile {
        Some(p) => load_profile(p, &m)?,
        None => mech.implied_profile(),
    };
    let v = verify(&m, &a, &mech, opts.tol);
    println!("realized revenue: {}", show(&v.report.realized_revenue));
    println!("realized sales: {}", show(&v.report.realized_sales));
    print_verification(&v);

    let mut art = Artifacts::new("verify", path, cfg, opts);
    art.meta(format!("mechanism: {}", mechanism.display()));
    if let Some(p) = profile {
        art.meta(format!("profile: {}", p.display()));
    }
    art.meta(format!(
        "realized_revenue: {}",
        render(&v.report.realized_revenue)
    ));
    art.meta(format!(
        "verification: {}",
        if v.passed() { "pass" } else { "fail" }
    ));
    for violation in &v.violations {
        art.meta(format!("violation: {violation}"));
    }
    art.add("verification.csv", verification_csv(&m, &v.report));
    art.write(cfg.out.as_deref())?;
    if v.passed() {
        Ok(())
    } else {
        Err(failed(anyhow!("{} violation(s)", v.violations.len())))
    }
}

fn cmd_oracle<S: Scalar>(path: &Path, cfg: &Config, opts: &AscentOptions) -> Outcome {
    let m = load_market::<S>(path)?;
    let grid = oracle_grid::<S>(cfg)?;
    let found = brute_force_optimal(&m, &grid, opts.tol).map_err(input)?;
    println!("revenue: {}", show(&found.revenue));
    println!("inventory used: {}", show(&found.inventory_used));
    println!("profiles checked: {}", found.profiles_checked);
    let e = evaluate(&m, &found.profile).map_err(failed)?;

    let mut art = Artifacts::new("oracle", path, cfg, opts);
    art.meta(format!("levels: {}", cfg.levels));
    art.meta(format!("profiles_checked: {}", found.profiles_checked));
    art.meta(format!("revenue: {}", render(&found.revenue)));
    art.meta(format!("inventory_used: {}", render(&found.inventory_used)));
    art.add("report.csv", evaluation_csv(&m, &found.profile, &e));
    art.add("profile.json", serialize_profile(&found.profile));
    art.write(cfg.out.as_deref())
}

fn cmd_compare<S: Scalar>(path: &Path, cfg: &Config, opts: &AscentOptions) -> Outcome {
    let m = load_market::<S>(path)?;
    let caps = oracle_grid::<S>(cfg)?;
    let cmp = compare(&m, opts, &caps).map_err(failed)?;
    let na = String::from("n/a");
    let rows = [
        ("anonymous", show(&cmp.anonymous.revenue)),
        (
            "posted-price",
            cmp.posted_only.as_ref().map_or(na.clone(), show),
        ),
        ("non-anonymous", cmp.non_anonymous.as_ref().map_or(na, show)),
    ];
    let mut table = String::from("mechanism,revenue\n");
    for (name, value) in &rows {
        println!("{name:<14} {value}");
        let _ = writeln!(
            table,
            "{name},{}",
            value.split(' ').next().unwrap_or_default()
        );
    }

    let mut art = Artifacts::new("compare", path, cfg, opts);
    record_report(&mut art, &cmp.anonymous);
    art.add("compare.csv", table);
    art.write(cfg.out.as_deref())
}
