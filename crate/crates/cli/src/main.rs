//! `servolab` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use servolab::attacks::AttackSpec;
use servolab::certify::{self, Certificate, LmiPlant, SearchOptions, SearchOutcome};
use servolab::chaos::{self, ChaosParams};
use servolab::cipher::{self, CipherConfig, CipherHeader, Region, RegionChoice};
use servolab::experiment::{self, ExperimentSpec, GainSource, ReproduceOptions, Table};
use servolab::metrics::{MetricsReport, PairSampling};
use servolab::plant::{
    self, default_plant, DelayBounds, DelayModel, Mode, PlantModel, SimConfig, UncertaintyModel, VisionConfig,
};
use servolab::vision::{self, CameraModel};
use servolab::GrayImage;

#[derive(Parser)]
#[command(name = "servolab", version, about = "Secure networked visual-servo laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chaotic map diagnostics as `a,value` CSV.
    Chaos(ChaosArgs),
    /// Encrypt a PGM frame; writes the ciphertext and its header.
    Encrypt(EncryptArgs),
    /// Decrypt a PGM ciphertext with its header.
    Decrypt(DecryptArgs),
    /// Apply a seeded attack to a PGM image.
    Attack(AttackArgs),
    /// Security and fidelity metrics of a test image against a reference.
    Metrics(MetricsArgs),
    /// Render a synthetic cart-pendulum frame.
    Render(RenderArgs),
    /// Extract the state from a frame.
    Extract(ExtractArgs),
    /// Closed-loop simulation, trajectory as CSV.
    Simulate(SimulateArgs),
    /// Certificate verification and search.
    #[command(subcommand)]
    Certify(CertifyCommand),
    /// Regenerate an evaluation table as CSV.
    Reproduce(ReproduceArgs),
    /// Run a full pipeline from an experiment spec.
    Run(RunArgs),
    /// Validate an experiment spec.
    Validate(ValidateArgs),
    /// Build information and defaults.
    Info,
}

#[derive(Args)]
struct ChaosArgs {
    #[arg(value_enum)]
    kind: ChaosKind,
    #[arg(long, default_value_t = 0.1)]
    a_min: f64,
    #[arg(long, default_value_t = 2.0)]
    a_max: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 2.0)]
    b: f64,
    #[arg(long, default_value_t = servolab::chaos::REFERENCE_Y0)]
    y0: f64,
    /// Iterations for the Lyapunov estimate.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Iterates discarded per column of the bifurcation diagram.
    #[arg(long, default_value_t = 500)]
    settle: usize,
    /// Iterates kept per column of the bifurcation diagram.
    #[arg(long, default_value_t = 100)]
    keep: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChaosKind {
    Lyapunov,
    Bifurcation,
}

#[derive(Args)]
struct KeyArgs {
    /// Cipher key `a,b,y0`.
    #[arg(long, default_value = "0.5,2,2.7182818")]
    key: String,
    #[arg(long, default_value_t = chaos::DEFAULT_BURN_IN)]
    burn_in: usize,
}

impl KeyArgs {
    fn params(&self) -> Result<ChaosParams, CliError> {
        let v = parse_list(&self.key, 3, "key")?;
        Ok(ChaosParams::with_burn_in(v[0], v[1], v[2], self.burn_in)?)
    }
}

#[derive(Args)]
struct EncryptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the header JSON; defaults to `<out>.json`.
    #[arg(long)]
    header: Option<PathBuf>,
    #[command(flatten)]
    key: KeyArgs,
    #[arg(long, default_value_t = 1)]
    rounds: u32,
    /// `full`, `auto[:WIDTH]` or `X,Y,WIDTH,HEIGHT`.
    #[arg(long, default_value = "auto")]
    region: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Args)]
struct DecryptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Header JSON; defaults to `<in>.json`.
    #[arg(long)]
    header: Option<PathBuf>,
    #[command(flatten)]
    key: KeyArgs,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `shear:RATE`, `sp:DENSITY` or `gaussian:MU,SIGMA`.
    #[arg(long)]
    attack: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict the attack to the region of a cipher header.
    #[arg(long)]
    header: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Random adjacent pairs for the correlations; 0 uses every pair.
    #[arg(long, default_value_t = 0)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long)]
    out: PathBuf,
    /// Camera model JSON.
    #[arg(long)]
    camera: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    camera: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "ideal_state")]
    mode: String,
    #[arg(long)]
    attack: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `poles:P1,P2,P3,P4`, `k:K1,K2,K3,K4`, `cert:PATH` or `search`.
    #[arg(long, default_value = "poles:-3,-4,-5,-6", allow_hyphen_values = true)]
    gain: String,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    #[arg(long, default_value = "0.05,0.05,0,0", allow_hyphen_values = true)]
    x0: String,
    #[arg(long, default_value_t = 1)]
    rounds: u32,
    /// Override `η̄_en + η̄_de` (seconds).
    #[arg(long)]
    enc_dec_budget: Option<f64>,
    /// Delay model JSON.
    #[arg(long)]
    delays: Option<PathBuf>,
    /// Uncertainty model JSON.
    #[arg(long)]
    uncertainty: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CertifyCommand {
    /// Assemble and check a certificate; prints λ_max and the recovered gain.
    Verify {
        #[arg(long)]
        cert: PathBuf,
        /// Plant JSON; the default cart-pole when absent.
        #[arg(long)]
        plant: Option<PathBuf>,
        #[arg(long, default_value_t = certify::DEFAULT_TOL)]
        tol: f64,
    },
    /// Search a certificate for the plant and delay bounds.
    Search {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        plant: Option<PathBuf>,
        #[arg(long)]
        tau_bar: Option<f64>,
        #[arg(long)]
        lambda_lower: Option<f64>,
        #[arg(long)]
        lambda_upper: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        decay: Option<f64>,
        /// Certificate JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReproduceArgs {
    /// Table name or `all`.
    table: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    bisection_steps: Option<usize>,
    /// Output file, or directory for `all`; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(servolab::Error),
}

impl From<servolab::Error> for CliError {
    fn from(e: servolab::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) if e.is_numeric() => 3,
            CliError::Lib(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_list(text: &str, n: usize, what: &str) -> CliResult<Vec<f64>> {
    let v = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(format!("{what} {text:?}: {e}")))?;
    if v.len() != n {
        return Err(usage(format!("{what} needs {n} comma-separated numbers, got {text:?}")));
    }
    Ok(v)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| servolab::Error::Io { path: path.into(), source: e })?;
    Ok(serde_json::from_str(&text)?)
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> CliResult {
    let io = |p: &Path, e| servolab::Error::Io { path: p.into(), source: e };
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io(p, e))?,
        None => std::io::stdout().write_all(bytes).map_err(|e| io(Path::new("<stdout>"), e))?,
    }
    Ok(())
}

fn print_json<T: Serialize>(v: &T) -> CliResult {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_bytes(None, s.as_bytes())
}

fn grid(lo: f64, hi: f64, steps: usize) -> CliResult<Vec<f64>> {
    if steps < 2 || hi <= lo || hi.is_nan() || lo.is_nan() {
        return Err(usage("grid needs a-max > a-min and at least 2 steps"));
    }
    Ok((0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect())
}

fn cmd_chaos(a: ChaosArgs) -> CliResult {
    let grid = grid(a.a_min, a.a_max, a.steps)?;
    let mut csv = String::from("a,value\n");
    match a.kind {
        ChaosKind::Lyapunov => {
            for (x, v) in chaos::lyapunov_scan(&grid, a.b, a.y0, a.n) {
                match v {
                    Some(v) if v.is_finite() => csv.push_str(&format!("{x},{v:.9}\n")),
                    _ => csv.push_str(&format!("{x},nan\n")),
                }
            }
        }
        ChaosKind::Bifurcation => {
            for col in chaos::bifurcation_scan(&grid, a.b, a.y0, a.settle, a.keep)? {
                for v in col.samples {
                    csv.push_str(&format!("{},{v:.9}\n", col.a));
                }
            }
        }
    }
    write_bytes(a.out.as_deref(), csv.as_bytes())
}

fn parse_region(text: &str) -> CliResult<RegionChoice> {
    if text == "full" {
        return Ok(RegionChoice::Full);
    }
    if let Some(rest) = text.strip_prefix("auto") {
        let band_width = match rest.strip_prefix(':') {
            Some(w) => w.parse().map_err(|_| usage(format!("bad band width in {text:?}")))?,
            None if rest.is_empty() => cipher::DEFAULT_BAND_WIDTH,
            None => return Err(usage(format!("bad region {text:?}"))),
        };
        return Ok(RegionChoice::Auto { band_width });
    }
    let v = parse_list(text, 4, "region")?;
    if v.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
        return Err(usage(format!("region {text:?} needs nonnegative integers")));
    }
    Ok(RegionChoice::Fixed(Region { x0: v[0] as usize, y0: v[1] as usize, cols: v[2] as usize, rows: v[3] as usize }))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

fn cmd_encrypt(a: EncryptArgs) -> CliResult {
    let img = GrayImage::read_pgm(&a.input)?;
    let cfg = CipherConfig {
        scale_factor: a.scale,
        region: parse_region(&a.region)?,
        ..CipherConfig::new(a.key.params()?, a.rounds)
    };
    let enc = cipher::encrypt(&img, &cfg)?;
    enc.image.write_pgm(&a.out)?;
    let header = a.header.unwrap_or_else(|| sidecar(&a.out));
    write_bytes(Some(&header), &serde_json::to_vec_pretty(&enc.header)?)?;
    eprintln!("encrypted {}x{} region at ({}, {}), {} keystream draws", enc.header.cols, enc.header.rows, enc.header.x0, enc.header.y0, enc.keystream_draws);
    Ok(())
}

fn cmd_decrypt(a: DecryptArgs) -> CliResult {
    let img = GrayImage::read_pgm(&a.input)?;
    let header: CipherHeader = read_json(&a.header.unwrap_or_else(|| sidecar(&a.input)))?;
    cipher::decrypt(&img, &header, &a.key.params()?)?.write_pgm(&a.out)?;
    Ok(())
}

fn cmd_attack(a: AttackArgs) -> CliResult {
    let img = GrayImage::read_pgm(&a.input)?;
    let spec = AttackSpec::parse(&a.attack, a.seed)?;
    let out = match a.header {
        Some(h) => {
            let header: CipherHeader = read_json(&h)?;
            plant::attack_band(&img, &header.region(), Some(&spec))?
        }
        None => spec.apply(&img)?,
    };
    out.write_pgm(&a.out)?;
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> CliResult {
    let r = GrayImage::read_pgm(&a.reference)?;
    let t = GrayImage::read_pgm(&a.test)?;
    let sampling = match a.pairs {
        0 => PairSampling::Exhaustive,
        pairs => PairSampling::Random { pairs, seed: a.seed },
    };
    print_json(&MetricsReport::compute(&r, &t, sampling)?)
}

fn camera(path: Option<&Path>) -> CliResult<CameraModel> {
    let cam = match path {
        Some(p) => read_json(p)?,
        None => CameraModel::default(),
    };
    cam.validate()?;
    Ok(cam)
}

fn cmd_render(a: RenderArgs) -> CliResult {
    let cam = camera(a.camera.as_deref())?;
    vision::render_frame(a.alpha, a.theta, &cam)?.write_pgm(&a.out)?;
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> CliResult {
    let cam = camera(a.camera.as_deref())?;
    let img = GrayImage::read_pgm(&a.input)?;
    print_json(&vision::extract_state(&img, None, DelayModel::default().h, &cam))
}

fn parse_gain(text: &str) -> CliResult<GainSource> {
    let arr = |s: &str, what| -> CliResult<[f64; 4]> {
        let v = parse_list(s, 4, what)?;
        Ok([v[0], v[1], v[2], v[3]])
    };
    match text.split_once(':') {
        Some(("poles", p)) => Ok(GainSource::Poles { poles: arr(p, "poles")? }),
        Some(("k", k)) => Ok(GainSource::Fixed { k: arr(k, "gain")? }),
        Some(("cert", path)) => Ok(GainSource::Certificate { path: path.into() }),
        None if text == "search" => Ok(GainSource::Search { options: SearchOptions::default() }),
        _ => Err(usage(format!("unknown gain source {text:?}"))),
    }
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let mode: Mode = a.mode.parse().map_err(|e: servolab::Error| usage(e.to_string()))?;
    let attack = a.attack.as_deref().map(|s| AttackSpec::parse(s, a.seed)).transpose()?;
    let mut dm: DelayModel = match &a.delays {
        Some(p) => read_json(p)?,
        None => DelayModel::default(),
    };
    if let Some(b) = a.enc_dec_budget {
        dm = dm.with_enc_dec_budget(b);
    }
    let um: UncertaintyModel = match &a.uncertainty {
        Some(p) => read_json(p)?,
        None => UncertaintyModel::default(),
    };
    let x0 = parse_list(&a.x0, 4, "x0")?;
    let plant = default_plant().with_uncertainty(&um);
    let gain = parse_gain(&a.gain)?.resolve(&plant, dm.bounds(), servolab::seed::derive(a.seed, "search", 0))?;
    let cfg = SimConfig {
        mode,
        horizon: a.horizon,
        x0: [x0[0], x0[1], x0[2], x0[3]],
        seed: a.seed,
        vision: VisionConfig { rounds: a.rounds, attack: attack.map(|s| s.kind), ..VisionConfig::default() },
        ..SimConfig::default()
    };
    let traj = plant::simulate(&plant, &gain, &dm, &um, &cfg)?;
    let prov = format!(
        "spec={} seed={} mode={} attack={} gain={:?}",
        experiment::config_hash(&(&cfg, &dm, &um, &gain))?,
        a.seed,
        a.mode,
        a.attack.as_deref().unwrap_or("none"),
        gain.0
    );
    let mut csv = Vec::new();
    traj.write_csv(&mut csv, Some(&prov)).map_err(|e| servolab::Error::Io { path: "<csv>".into(), source: e })?;
    write_bytes(a.out.as_deref(), &csv)?;
    eprintln!(
        "diverged={} final_norm={:.3e} invalid_estimates={}",
        traj.diverged,
        traj.final_norm(),
        traj.events.iter().filter(|e| !e.estimate_valid).count()
    );
    Ok(())
}

fn plant_from(path: Option<&Path>) -> CliResult<PlantModel> {
    let p = match path {
        Some(p) => read_json(p)?,
        None => default_plant(),
    };
    p.validate()?;
    Ok(p)
}

fn cmd_certify(c: CertifyCommand) -> CliResult {
    match c {
        CertifyCommand::Verify { cert, plant, tol } => {
            let cert: Certificate = read_json(&cert)?;
            let plant = plant_from(plant.as_deref())?;
            let v = certify::verify(&cert, &LmiPlant::from(&plant), tol)?;
            print_json(&v)?;
            if !v.negative_definite {
                return Err(servolab::Error::Undefined(format!("not negative definite (λ_max = {:.3e})", v.max_eigenvalue)).into());
            }
            Ok(())
        }
        CertifyCommand::Search { seed, plant, tau_bar, lambda_lower, lambda_upper, iters, decay, out } => {
            let plant = plant_from(plant.as_deref())?;
            let d = DelayBounds::default();
            let bounds = DelayBounds {
                tau_bar: tau_bar.unwrap_or(d.tau_bar),
                lambda_lower: lambda_lower.unwrap_or(d.lambda_lower),
                lambda_upper: lambda_upper.unwrap_or(d.lambda_upper),
            };
            let base = SearchOptions::default();
            let opts = SearchOptions { iters: iters.unwrap_or(base.iters), decay: decay.unwrap_or(base.decay), ..base };
            match certify::certificate_search(&LmiPlant::from(&plant), bounds, seed, &opts)? {
                SearchOutcome::Found { cert, max_eigenvalue, iterations } => {
                    let gain = certify::recover_gain(&cert)?;
                    eprintln!("found after {iterations} steps: λ_max = {max_eigenvalue:.6e}, K = {:?}", gain.0);
                    let mut json = serde_json::to_vec_pretty(&cert)?;
                    json.push(b'\n');
                    write_bytes(out.as_deref(), &json)
                }
                SearchOutcome::NotFound { best_max_eigenvalue, iterations } => Err(servolab::Error::Undefined(format!(
                    "no certificate after {iterations} steps (best λ_max = {best_max_eigenvalue:.6e})"
                ))
                .into()),
            }
        }
    }
}

fn cmd_reproduce(a: ReproduceArgs) -> CliResult {
    let d = ReproduceOptions::default();
    let opts = ReproduceOptions {
        seed: a.seed,
        runs: a.runs.unwrap_or(d.runs),
        bisection_steps: a.bisection_steps.unwrap_or(d.bisection_steps),
    };
    if a.table == "all" {
        let dir = a.out.ok_or_else(|| usage("reproduce all needs --out DIR"))?;
        std::fs::create_dir_all(&dir).map_err(|e| servolab::Error::Io { path: dir.clone(), source: e })?;
        for t in Table::ALL {
            let path = dir.join(format!("{}.csv", t.name()));
            write_bytes(Some(&path), experiment::reproduce(t, &opts)?.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        return Ok(());
    }
    let table: Table = a.table.parse().map_err(|e: servolab::Error| usage(e.to_string()))?;
    write_bytes(a.out.as_deref(), experiment::reproduce(table, &opts)?.as_bytes())
}

fn load_spec(path: &Path) -> CliResult<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| servolab::Error::Io { path: path.into(), source: e })?;
    Ok(ExperimentSpec::from_json(&text)?)
}

fn cmd_run(a: RunArgs) -> CliResult {
    let spec = load_spec(&a.spec)?;
    let dir = a
        .out_dir
        .or_else(|| spec.out_dir.clone())
        .ok_or_else(|| usage("no output directory: pass --out-dir or set out_dir in the spec"))?;
    print_json(&experiment::run_pipeline(&spec, &dir)?)
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let spec = load_spec(&a.spec)?;
    println!("ok {} spec={}", spec.name, spec.hash()?);
    Ok(())
}

#[derive(Serialize)]
struct Info {
    name: &'static str,
    version: &'static str,
    tables: Vec<&'static str>,
    default_delay_bounds: DelayBounds,
    default_poles: [f64; 4],
    default_key: ChaosParams,
}

fn cmd_info() -> CliResult {
    print_json(&Info {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        tables: Table::ALL.iter().map(|t| t.name()).collect(),
        default_delay_bounds: DelayModel::default().bounds(),
        default_poles: experiment::DEFAULT_POLES,
        default_key: VisionConfig::default().key,
    })
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Chaos(a) => cmd_chaos(a),
        Command::Encrypt(a) => cmd_encrypt(a),
        Command::Decrypt(a) => cmd_decrypt(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Render(a) => cmd_render(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Certify(c) => cmd_certify(c),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::Run(a) => cmd_run(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Info => cmd_info(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
