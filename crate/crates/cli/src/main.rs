//! `qkdlab`: certified BB84 keyrates for imperfect sources, and a
//! collective-attack laboratory.
//!
//! JSON or CSV goes to stdout, diagnostics to stderr. Exit status is 0 on
//! success (including "inapplicable" and "no violation found"), 2 for bad
//! input and 3 for internal numerical failures.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qkdlab::attack::{load_attack, verify_bounds, AttackIsometry};
use qkdlab::keyrate::{
    keyrate_arbitrary, keyrate_qubit, keyrate_qubit_dim2, keyrate_uncertainty_comparison,
    minentropy_report, trace_distance_upper_from_fidelity, KeyrateReport, KeyrateVariant,
    ObservedStats,
};
use qkdlab::search::{
    break_zvx_search, minimize_conditional_entropy, minimize_fidelity, zvx_control, SearchConfig,
    MIN_RESTARTS,
};
use qkdlab::sim::{detector_from_json, simulate_with_profile, DetectorSpec, RunConfig};
use qkdlab::source::{
    compute_theta, extract_qubit_angles, load_source, OverlapCharacterization, QubitSourceAngles,
    SourceProfile, SourceSpec, ThetaAngle,
};
use qkdlab::Error;

#[derive(Parser)]
#[command(
    name = "qkdlab",
    version,
    about = "BB84 keyrates from quantum cloning bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Basis overlap Δ, the angle θ and, for qubit sources, (α, β, φ)
    Theta {
        #[arg(long)]
        source: PathBuf,
    },
    /// Certified keyrate for one set of error rates
    Keyrate(KeyrateArgs),
    /// Keyrate over a grid of error rates, as CSV
    Sweep(SweepArgs),
    /// Diagnostics and per-bound slack of an attack on a source
    AttackEval {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        attack: PathBuf,
    },
    /// Constrained search minimising Eve's fidelity or H(Z|E)
    Optimize(OptimizeArgs),
    /// Search for violations of the zvx norm inequality
    BreakZvx(BreakZvxArgs),
    /// Monte Carlo protocol run through an attack
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    ArbitraryTheta,
    Qubit,
    QubitDim2,
    UncertaintyComparison,
    Minentropy,
}

impl From<VariantArg> for KeyrateVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::ArbitraryTheta => KeyrateVariant::ArbitraryTheta,
            VariantArg::Qubit => KeyrateVariant::Qubit,
            VariantArg::QubitDim2 => KeyrateVariant::QubitDim2,
            VariantArg::UncertaintyComparison => KeyrateVariant::UncertaintyComparison,
            VariantArg::Minentropy => KeyrateVariant::Minentropy,
        }
    }
}

/// How the source is characterised; at most one of these.
#[derive(Args, Clone)]
struct SourceChoice {
    /// Source file (JSON)
    #[arg(long, group = "characterisation")]
    source: Option<PathBuf>,
    /// Overlap angle θ in radians
    #[arg(long, value_parser = parse_angle, group = "characterisation")]
    theta: Option<f64>,
    /// Qubit angles α,β,φ in radians
    #[arg(long, value_parser = parse_angles, group = "characterisation")]
    angles: Option<QubitSourceAngles>,
    /// Bias ε of the z emission probabilities; defaults to the source's
    #[arg(long, allow_hyphen_values = true)]
    bias: Option<f64>,
}

#[derive(Args)]
struct KeyrateArgs {
    #[arg(long, value_enum, default_value = "arbitrary-theta")]
    variant: VariantArg,
    #[command(flatten)]
    source: SourceChoice,
    /// z-basis error rate
    #[arg(long, default_value_t = 0.0)]
    dz: f64,
    /// x-basis error rate
    #[arg(long, default_value_t = 0.0)]
    dx: f64,
    /// Upper bound on D(ρ_E, ρ′_E) (min-entropy variant)
    #[arg(long, conflicts_with = "fidelity")]
    trace_distance: Option<f64>,
    /// Lower bound on F(ρ_E, ρ′_E) (min-entropy variant)
    #[arg(long)]
    fidelity: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Dx,
    Dz,
    /// δz = δx
    Both,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "arbitrary-theta")]
    variant: VariantArg,
    #[command(flatten)]
    source: SourceChoice,
    #[arg(long, value_enum, default_value = "both")]
    param: SweepParam,
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    #[arg(long, default_value_t = 0.15)]
    to: f64,
    /// Number of intervals; N + 1 rows are written
    #[arg(long, default_value_t = 30)]
    steps: usize,
    /// Fixed z error rate when sweeping dx
    #[arg(long, default_value_t = 0.0)]
    dz: f64,
    /// Fixed x error rate when sweeping dz
    #[arg(long, default_value_t = 0.0)]
    dx: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Fidelity,
    Entropy,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, visible_alias = "dimB", default_value_t = 2)]
    dim_b: usize,
    #[arg(long, visible_alias = "dimE", default_value_t = 2)]
    dim_e: usize,
    /// Total objective evaluations across restarts
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = MIN_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig::new(self.dim_e, self.budget, self.seed)
            .with_dim_b(self.dim_b)
            .with_restarts(self.restarts)
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long, value_enum, default_value = "fidelity")]
    objective: ObjectiveArg,
    /// Target D(σ_B, σ′_B)
    #[arg(long)]
    target: f64,
    #[command(flatten)]
    search: SearchArgs,
    /// Also write the best attack to this file
    #[arg(long)]
    save_attack: Option<PathBuf>,
}

#[derive(Args)]
struct BreakZvxArgs {
    /// Angle φ between the bases, radians
    #[arg(long, value_parser = parse_angle)]
    phi: f64,
    #[arg(long, visible_alias = "dimB", default_value_t = 3)]
    dim_b: usize,
    #[arg(long, visible_alias = "dimE", default_value_t = 2)]
    dim_e: usize,
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = MIN_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random attacks in the dimB = 2 control run
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    attack: PathBuf,
    /// `helstrom`, `computational`, or a detector file
    #[arg(long, default_value = "helstrom")]
    detector: String,
    /// Round counts; several values (comma separated) need --csv
    #[arg(long, value_delimiter = ',', default_value = "100000")]
    rounds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 0.5)]
    basis_prob_z: f64,
    /// One CSV row per (rounds, seed) instead of JSON
    #[arg(long)]
    csv: bool,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    if lower.ends_with('°') || lower.ends_with("deg") || lower.ends_with("degrees") {
        return Err("angles are given in radians; degrees are not accepted".into());
    }
    let v: f64 = t
        .strip_suffix("rad")
        .unwrap_or(t)
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number of radians"))?;
    if !v.is_finite() {
        return Err(format!("angle '{s}' is not finite"));
    }
    Ok(v)
}

fn parse_angles(s: &str) -> Result<QubitSourceAngles, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated angles α,β,φ".into());
    }
    let a = parse_angle(parts[0])?;
    let b = parse_angle(parts[1])?;
    let p = parse_angle(parts[2])?;
    QubitSourceAngles::new(a, b, p).map_err(|e| e.to_string())
}

/// Typed-in right angles (`1.5708`) overshoot π/2 slightly; snap those.
const RIGHT_ANGLE_SLOP: f64 = 1e-4;

fn clamp_right_angle(theta: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if theta > half_pi && theta <= half_pi + RIGHT_ANGLE_SLOP {
        eprintln!("qkdlab: θ = {theta} taken as π/2");
        half_pi
    } else {
        theta
    }
}

type CliResult<T> = Result<T, Error>;

fn input_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Error::Validation(msg.into()))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(io::Error::other(format!("{other:?}"))),
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialising output: {e}")))?;
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

/// Decimal with 12 significant digits; scientific outside `[1e-5, 1e12)`.
fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ThetaOutput {
    delta: f64,
    theta: ThetaAngle,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubit_angles: Option<QubitSourceAngles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubit_note: Option<String>,
}

fn cmd_theta(source: &Path) -> CliResult<()> {
    let src = load_source(source)?;
    let ov = compute_theta(&src);
    let (qubit_angles, qubit_note) = if src.dim() == 2 {
        match extract_qubit_angles(&src) {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    print_json(&ThetaOutput {
        delta: ov.delta,
        theta: ov.theta_angle,
        qubit_angles,
        qubit_note,
    })
}

/// Resolved characterisation for keyrate evaluation.
struct Characterisation {
    overlap: Option<OverlapCharacterization>,
    angles: Option<QubitSourceAngles>,
    bias: f64,
}

fn resolve(choice: &SourceChoice, variant: KeyrateVariant) -> CliResult<Characterisation> {
    let needs_source_info = variant != KeyrateVariant::Minentropy;
    let mut c = Characterisation {
        overlap: None,
        angles: None,
        bias: 0.0,
    };
    if let Some(path) = &choice.source {
        let src: SourceSpec = load_source(path)?;
        c.bias = src.bias();
        match variant {
            KeyrateVariant::ArbitraryTheta | KeyrateVariant::UncertaintyComparison => {
                c.overlap = Some(compute_theta(&src));
            }
            KeyrateVariant::Qubit | KeyrateVariant::QubitDim2 => {
                c.angles = Some(extract_qubit_angles(&src)?);
            }
            KeyrateVariant::Minentropy => {}
        }
    } else if let Some(t) = choice.theta {
        c.overlap = Some(OverlapCharacterization::from_theta(clamp_right_angle(t))?);
    } else if let Some(a) = choice.angles {
        c.angles = Some(a);
    } else if needs_source_info {
        return input_err("one of --source, --theta or --angles is required");
    }
    if let Some(b) = choice.bias {
        c.bias = b;
    }
    Ok(c)
}

fn keyrate_with(
    variant: KeyrateVariant,
    c: &Characterisation,
    dz: f64,
    dx: f64,
    trace_distance: Option<f64>,
) -> CliResult<KeyrateReport> {
    let stats = ObservedStats::new(dz, dx)?;
    let need_overlap = || {
        c.overlap.ok_or_else(|| {
            Error::Validation(format!(
                "variant {} needs --theta or --source",
                variant.name()
            ))
        })
    };
    let need_angles = || {
        c.angles.ok_or_else(|| {
            Error::Validation(format!(
                "variant {} needs --angles or --source",
                variant.name()
            ))
        })
    };
    match variant {
        KeyrateVariant::ArbitraryTheta => keyrate_arbitrary(&need_overlap()?, &stats, c.bias),
        KeyrateVariant::Qubit => keyrate_qubit(&need_angles()?, &stats, c.bias),
        KeyrateVariant::QubitDim2 => keyrate_qubit_dim2(&need_angles()?, &stats, c.bias),
        KeyrateVariant::UncertaintyComparison => {
            let ov = need_overlap()?;
            let t = ov.theta().ok_or_else(|| {
                Error::CertificationUnavailable("source has no overlap angle (√2·Δ ≤ 1)".into())
            })?;
            keyrate_uncertainty_comparison(t, &stats)
        }
        KeyrateVariant::Minentropy => match trace_distance {
            Some(d) => minentropy_report(d),
            None => input_err("the min-entropy variant needs --trace-distance or --fidelity"),
        },
    }
}

fn cmd_keyrate(args: &KeyrateArgs) -> CliResult<()> {
    let variant: KeyrateVariant = args.variant.into();
    let c = resolve(&args.source, variant)?;
    let d = match (args.trace_distance, args.fidelity) {
        (Some(d), _) => Some(d),
        (None, Some(f)) => Some(trace_distance_upper_from_fidelity(f)?),
        (None, None) => None,
    };
    print_json(&keyrate_with(variant, &c, args.dz, args.dx, d)?)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let variant: KeyrateVariant = args.variant.into();
    if variant == KeyrateVariant::Minentropy {
        return input_err("sweeps are over error rates; the min-entropy variant has none");
    }
    if args.steps == 0 {
        return input_err("--steps must be at least 1");
    }
    let c = resolve(&args.source, variant)?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["variant", "deltaZ", "deltaX", "fidelityBound", "rate"])
        .map_err(csv_err)?;
    for i in 0..=args.steps {
        let v = args.from + (args.to - args.from) * i as f64 / args.steps as f64;
        let (dz, dx) = match args.param {
            SweepParam::Dx => (args.dz, v),
            SweepParam::Dz => (v, args.dx),
            SweepParam::Both => (v, v),
        };
        let r = keyrate_with(variant, &c, dz, dx, None)?;
        w.write_record([
            variant.name().to_string(),
            sig12(dz),
            sig12(dx),
            sig12(r.fidelity_bound),
            sig12(r.rate),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_attack_eval(source: &Path, attack: &Path) -> CliResult<()> {
    let src = load_source(source)?;
    let att = load_attack(attack)?;
    if att.input_dim() != src.dim() {
        return Err(Error::Dimension(format!(
            "attack input dimension {} does not match source dimension {}",
            att.input_dim(),
            src.dim()
        )));
    }
    print_json(&verify_bounds(&SourceProfile::new(&src), &att)?)
}

fn cmd_optimize(args: &OptimizeArgs) -> CliResult<()> {
    let src = load_source(&args.source)?;
    let cfg = args.search.config();
    eprintln!(
        "optimize: {} restarts, budget {}, dimB={} dimE={}, seed {}",
        cfg.restarts, cfg.budget, cfg.dim_b, cfg.dim_e, cfg.seed
    );
    let finding = match args.objective {
        ObjectiveArg::Fidelity => minimize_fidelity(&src, args.target, &cfg)?,
        ObjectiveArg::Entropy => minimize_conditional_entropy(&src, args.target, &cfg)?,
    };
    if !finding.feasible {
        eprintln!(
            "optimize: target not reached, constraint residual {:.3e}",
            finding.constraint_residual
        );
    }
    if let Some(path) = &args.save_attack {
        qkdlab::attack::save_attack(&finding.attack, path)?;
    }
    print_json(&finding)
}

fn cmd_break_zvx(args: &BreakZvxArgs) -> CliResult<()> {
    let finding = if args.dim_b == 2 {
        eprintln!(
            "break-zvx: dimB = 2 control, {} random attacks",
            args.samples
        );
        zvx_control(args.phi, args.samples, args.dim_e.max(1), args.seed)?
    } else {
        let cfg = SearchConfig::new(args.dim_e, args.budget, args.seed)
            .with_dim_b(args.dim_b)
            .with_restarts(args.restarts);
        eprintln!(
            "break-zvx: {} restarts, budget {}, dimB={} dimE={}",
            cfg.restarts, cfg.budget, cfg.dim_b, cfg.dim_e
        );
        break_zvx_search(args.phi, &cfg)?
    };
    print_json(&finding)
}

fn load_detector(spec: &str, src: &SourceSpec, att: &AttackIsometry) -> CliResult<DetectorSpec> {
    match spec {
        "helstrom" => DetectorSpec::helstrom(src, att),
        "computational" => DetectorSpec::computational(att.label().dim_b),
        path => {
            let text = std::fs::read_to_string(path)?;
            detector_from_json(&text)
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let src = load_source(&args.source)?;
    let att = load_attack(&args.attack)?;
    let det = load_detector(&args.detector, &src, &att)?;
    let profile = SourceProfile::new(&src);
    let runs = args.rounds.len() * args.seed.len();
    if runs == 0 {
        return input_err("no rounds or seeds given");
    }
    if !args.csv {
        if runs > 1 {
            return input_err("several --rounds or --seed values need --csv");
        }
        let cfg = RunConfig::new(args.rounds[0], args.basis_prob_z, args.seed[0])?;
        return print_json(&simulate_with_profile(&profile, &att, &det, &cfg)?);
    }
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["rounds", "seed", "deltaZ", "deltaX", "rate"])
        .map_err(csv_err)?;
    for &rounds in &args.rounds {
        for &seed in &args.seed {
            let cfg = RunConfig::new(rounds, args.basis_prob_z, seed)?;
            let r = simulate_with_profile(&profile, &att, &det, &cfg)?;
            let opt = |x: Option<f64>| x.map(sig12).unwrap_or_default();
            w.write_record([
                rounds.to_string(),
                seed.to_string(),
                opt(r.empirical_delta_z),
                opt(r.empirical_delta_x),
                opt(r.keyrate_at_empirical.map(|k| k.rate)),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("QKDLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Validation(format!("QKDLAB_THREADS='{v}' is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Theta { source } => cmd_theta(source),
        Command::Keyrate(a) => cmd_keyrate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::AttackEval { source, attack } => cmd_attack_eval(source, attack),
        Command::Optimize(a) => cmd_optimize(a),
        Command::BreakZvx(a) => cmd_break_zvx(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qkdlab: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
