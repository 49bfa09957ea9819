//! `bodyauth`: synthesize CSI, register users, authenticate, replay
//! sessions, evaluate and benchmark.
//!
//! Exit status: 0 on success, 1 on a domain error (bad file, short input,
//! dimension mismatch, ...), 2 on a usage error.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bodyauth::body_model::{read_scene_file, synthesize_csi};
use bodyauth::csi_pipeline::{read_csv_file, write_csv_file, CsiSeries, FilterSpec, FrameReader};
use bodyauth::features::feature_dim;
use bodyauth::matcher::{RegisteredProfile, RegistrationOptions};
use bodyauth::metrics::{bench_stages, profile_for_bench, run_evaluation, EvalConfig, SubjectStream};
use bodyauth::pipeline::{authenticate_series, register_series};
use bodyauth::session::{EventKind, Phase, RunConfig, Session};
use clap::{Parser, Subcommand};

const SEED_ENV: &str = "BODYAUTH_SEED";

#[derive(Parser)]
#[command(name = "bodyauth", version, about = "Wi-Fi CSI continuous authentication toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a CSI recording from a scene file.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Recording length in seconds.
        #[arg(long)]
        duration: f64,
        /// Noise seed; overrides the scene's seed. BODYAUTH_SEED overrides both.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Register a user from the start of a recording.
    Register {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        periods: usize,
        #[arg(long, default_value_t = 30.0)]
        period_secs: f64,
        #[arg(long, default_value_t = 1.0)]
        window_secs: f64,
        /// PCA retained-variance fraction.
        #[arg(long, default_value_t = 0.9)]
        retain: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Authenticate every window of a recording against a profile.
    Auth {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Drive a session over a frame stream and print its events.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV file, or `-` for standard input.
        #[arg(long = "in")]
        input: String,
    },
    /// Evaluate a directory of per-subject recordings.
    Evaluate {
        #[arg(long)]
        subjects: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        interval_min: f64,
        #[arg(long, default_value_t = 60.0)]
        horizon_min: f64,
        #[arg(long, default_value_t = 4)]
        periods: usize,
        #[arg(long, default_value_t = 30.0)]
        period_secs: f64,
        /// Disable the post-authentication profile update.
        #[arg(long)]
        no_update: bool,
        #[arg(long)]
        report: PathBuf,
    },
    /// Time filtering, feature extraction and matching of a 1 s window.
    Bench {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(10..))]
        iters: u64,
    },
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn with_path<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn synth(scene: &Path, out: &Path, duration: f64, seed: Option<u64>) -> CmdResult {
    let mut scene_cfg = with_path(scene, read_scene_file(scene))?;
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
        ),
        Err(_) => None,
    };
    if let Some(s) = env_seed.or(seed) {
        scene_cfg.seed = s;
    }
    let series = synthesize_csi(&scene_cfg, duration)?;
    with_path(out, write_csv_file(&series, out))?;
    println!(
        "wrote {} frames ({} subcarriers, {} Hz, seed {}) to {}",
        series.len(),
        series.subcarriers(),
        series.rate_hz,
        scene_cfg.seed,
        out.display()
    );
    Ok(())
}

fn register(input: &Path, periods: usize, options: RegistrationOptions, out: &Path) -> CmdResult {
    let series = with_path(input, read_csv_file(input))?;
    if series.is_empty() {
        return Err(Failure::Domain(format!("{}: no frames", input.display())));
    }
    let options = RegistrationOptions {
        filter: FilterSpec::with_rate(series.rate_hz),
        ..options
    };
    let profile = register_series(&series, periods, &options)?;
    with_path(out, profile.save(out))?;
    println!(
        "registered t={} periods of {} s; {} raw dims -> {} components",
        profile.t,
        profile.period_secs,
        profile.input_dim(),
        profile.dim()
    );
    for (i, p) in profile.periods.iter().enumerate() {
        println!("period {i}: samples={} threshold={:.6e}", p.sample_count, p.threshold);
    }
    Ok(())
}

fn auth(profile: &Path, input: &Path) -> CmdResult {
    let profile = with_path(profile, RegisteredProfile::load(profile))?;
    if with_path(input, std::fs::metadata(input))?.len() == 0 {
        return Err(Failure::Usage(format!("{}: input is empty", input.display())));
    }
    let series = with_path(input, read_csv_file(input))?;
    if series.is_empty() {
        return Err(Failure::Usage(format!("{}: input holds no frames", input.display())));
    }
    let dim = feature_dim(series.subcarriers());
    if dim != profile.input_dim() {
        return Err(Failure::Domain(format!(
            "dimension mismatch: profile expects {} features, stream yields {} ({} subcarriers)",
            profile.input_dim(),
            dim,
            series.subcarriers()
        )));
    }
    let decisions = authenticate_series(&profile, &series)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, d) in decisions.iter().enumerate() {
        writeln!(
            out,
            "{i} {:.6e} {} {}",
            d.best_score(),
            d.best_period,
            if d.accepted { "ACCEPT" } else { "REJECT" }
        )?;
    }
    let accepted = decisions.iter().filter(|d| d.accepted).count();
    writeln!(
        out,
        "acceptance_rate {:.4} ({accepted}/{})",
        accepted as f64 / decisions.len() as f64,
        decisions.len()
    )?;
    Ok(())
}

fn run(config: &Path, input: &str) -> CmdResult {
    let text = with_path(config, std::fs::read_to_string(config))?;
    let cfg = with_path(config, RunConfig::parse(&text))?;
    let reader: Box<dyn Read> = if input == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(with_path(Path::new(input), File::open(input))?)
    };
    let frames = FrameReader::new(BufReader::new(reader)).map_err(|e| Failure::Domain(format!("{input}: {e}")))?;
    let mut session = Session::new(cfg.session)?;
    let mut logins = cfg.login_at_us.iter().copied().peekable();
    let mut out = BufWriter::new(io::stdout().lock());
    let mut malformed = 0u64;
    let mut first_error = None;
    let mut total = 0u64;
    let mut last_ts = None;
    for frame in frames {
        let frame = match frame {
            Ok(f) => f,
            Err(e) => {
                malformed += 1;
                first_error.get_or_insert(e.to_string());
                continue;
            }
        };
        total += 1;
        if cfg.login_at_us.is_empty() && last_ts.is_none() {
            session.on_primary_login(frame.timestamp_us);
        }
        while let Some(ts) = logins.next_if(|ts| *ts <= frame.timestamp_us) {
            for e in session.on_primary_login(ts) {
                writeln!(out, "{e}")?;
            }
        }
        last_ts = Some(frame.timestamp_us);
        for e in session.process(frame) {
            writeln!(out, "{e}")?;
        }
    }
    let end_ts = last_ts.unwrap_or(0);
    if session.phase() == Phase::Registering {
        let (have, need) = session.registration_progress();
        writeln!(
            out,
            "{end_ts} {} stream ended during registration ({have}/{need} frames); no profile",
            EventKind::Warn.as_str()
        )?;
    }
    out.flush()?;
    eprintln!(
        "frames={total} malformed={malformed} out_of_order={} dropped_locked={}",
        session.out_of_order_frames(),
        session.dropped_while_locked()
    );
    if let Some(e) = first_error {
        eprintln!("first malformed row: {e}");
    }
    Ok(())
}

fn load_subjects(dir: &Path) -> Result<Vec<SubjectStream>, Failure> {
    let mut paths: Vec<PathBuf> = with_path(dir, std::fs::read_dir(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let series = with_path(p, read_csv_file(p))?;
            let name = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            Ok(SubjectStream { name, series })
        })
        .collect()
}

fn evaluate(dir: &Path, config: EvalConfig, report: &Path) -> CmdResult {
    let subjects = load_subjects(dir)?;
    if subjects.len() < 2 {
        return Err(Failure::Domain(format!(
            "{}: need at least 2 subject recordings (*.csv), found {}",
            dir.display(),
            subjects.len()
        )));
    }
    let rate = subjects[0].series.rate_hz;
    let config = EvalConfig {
        filter: FilterSpec::with_rate(rate),
        ..config
    };
    let r = run_evaluation(&subjects, &config)?;
    with_path(report, std::fs::write(report, r.to_json() + "\n"))?;
    println!("subjects {}", subjects.len());
    println!("mean_interruption_interval_min {:.2}", r.mii_minutes);
    println!("mean_auth_accuracy {:.4}", r.maa);
    println!("mean_defending_precision {:.4}", r.mdp);
    Ok(())
}

fn bench(input: &Path, iters: usize) -> CmdResult {
    let series: CsiSeries = with_path(input, read_csv_file(input))?;
    let profile = profile_for_bench(&series, &FilterSpec::with_rate(series.rate_hz))?;
    let r = bench_stages(&series, &profile, iters)?;
    println!("stage      median_ms    max_ms");
    for (name, s) in [("filter", r.filter), ("features", r.features), ("match", r.matching)] {
        println!("{name:<10} {:>9.4} {:>9.4}", s.median, s.max);
    }
    println!("{:<10} {:>9.4}", "total", r.total_median());
    println!("iterations {iters}, window 1 s x {} subcarriers", series.subcarriers());
    Ok(())
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Synth {
            scene,
            out,
            duration,
            seed,
        } => synth(&scene, &out, duration, seed),
        Command::Register {
            input,
            periods,
            period_secs,
            window_secs,
            retain,
            out,
        } => {
            let options = RegistrationOptions {
                period_secs,
                window_s: window_secs,
                retain,
                ..RegistrationOptions::default()
            };
            register(&input, periods, options, &out)
        }
        Command::Auth { profile, input } => auth(&profile, &input),
        Command::Run { config, input } => run(&config, &input),
        Command::Evaluate {
            subjects,
            interval_min,
            horizon_min,
            periods,
            period_secs,
            no_update,
            report,
        } => {
            let config = EvalConfig {
                periods,
                period_secs,
                interval_min,
                horizon_min,
                update_enabled: !no_update,
                ..EvalConfig::default()
            };
            evaluate(&subjects, config, &report)
        }
        Command::Bench { input, iters } => bench(&input, iters as usize),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
