//! Command-line front end: MUB verification, full key-exchange sessions,
//! focal-plane pattern export, threshold tables, and the two-process
//! Alice/Bob reconciliation mode.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hdqkd::config::{load_config, resolve_output_dir, Model, Preset, SessionConfig};
use hdqkd::error::Result;
use hdqkd::hilbert::{builtin_mubs_16, verify_mub, Basis, MubFamily};
use hdqkd::optics::{render_pattern, OpticalSetup};
use hdqkd::protocol::{run_session, sift, SessionLog};
use hdqkd::rng::SessionSeeds;
use hdqkd::security::{
    build_report, calibrate_jitter_to_qber, logical_wall_hours, threshold_coherent,
    threshold_individual,
};
use hdqkd::wire::{connect_bob, replay, serve_alice, Role, WireOptions, WireRecording};

#[derive(Parser)]
#[command(name = "hdqkd", version, about = "16-dimensional BB84 key distribution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the built-in mutually unbiased bases with exact integer arithmetic
    VerifyMubs {
        /// Dump the integer matrices to this file for audit
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Verify matrices loaded from this file instead of the built-in pair
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Run a full session: choices, pulses, sifting, and the security report
    Run(RunArgs),
    /// Export a focal-plane intensity curve as CSV
    Pattern(PatternArgs),
    /// Print the security thresholds per dimension
    Thresholds {
        /// Comma-separated dimensions
        #[arg(long, default_value = "2,4,8,16,32", value_delimiter = ',')]
        dims: Vec<usize>,
    },
    /// Two-process mode: serve Alice's side of the reconciliation
    ServeAlice(ServeArgs),
    /// Two-process mode: run Bob's side against a serving Alice
    ServeBob(ServeArgs),
    /// Replay a recorded reconciliation byte stream against a session config
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SessionArgs {
    /// Config file (key = value); flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pulse preset: mu-a (0.60, 50 ns) or mu-b (0.18, 20 ns)
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    seed_alice: Option<u64>,
    #[arg(long)]
    seed_bob: Option<u64>,
    #[arg(long)]
    seed_channel: Option<u64>,
    /// Protocol dimension (2 or 16)
    #[arg(long)]
    dim: Option<usize>,
    /// Detection model: ideal or optical
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    dark_rate_hz: Option<f64>,
    /// Phase jitter sigma in radians
    #[arg(long)]
    jitter: Option<f64>,
    /// Background click probability per gate
    #[arg(long)]
    background: Option<f64>,
    /// Calibrate the jitter so the expected QBER hits this target
    #[arg(long)]
    calibrate_qber: Option<f64>,
    /// Output directory (overrides HDQKD_OUTPUT_DIR and the config file)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(Args)]
struct PatternArgs {
    #[arg(long, default_value = "alpha")]
    alice_basis: String,
    #[arg(long, default_value_t = 13)]
    alice_k: usize,
    #[arg(long, default_value = "alpha")]
    bob_basis: String,
    #[arg(long, default_value_t = 13)]
    bob_k: usize,
    /// Total span of the curve in meters
    #[arg(long, default_value_t = 4e-4)]
    span_m: f64,
    #[arg(long, default_value_t = 2001)]
    points: usize,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.150)]
    focal_length_m: f64,
    #[arg(long, default_value_t = 10e-6)]
    pinhole_m: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Listen address for serve-alice, peer address for serve-bob
    #[arg(long)]
    addr: String,
    /// Record the wire traffic to this file
    #[arg(long)]
    record: Option<PathBuf>,
    /// Cycles per reconciliation batch
    #[arg(long, default_value_t = 1024)]
    batch: u64,
    /// Pace clock batches at the physical 30 Hz repetition rate
    #[arg(long)]
    realtime: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Recording file written by --record
    #[arg(long)]
    recording: PathBuf,
    /// Which side recorded it: alice or bob
    #[arg(long)]
    role: String,
    #[arg(long, default_value_t = 1024)]
    batch: u64,
}

fn build_session_config(args: &SessionArgs) -> Result<SessionConfig> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => {
            let preset = match &args.preset {
                Some(p) => Preset::parse(p)?,
                None => Preset::MuA,
            };
            let seeds = SessionSeeds {
                alice: args.seed_alice.ok_or_else(|| {
                    hdqkd::Error::ConfigGeneral("--seed-alice is required without --config".into())
                })?,
                bob: args.seed_bob.ok_or_else(|| {
                    hdqkd::Error::ConfigGeneral("--seed-bob is required without --config".into())
                })?,
                channel: args.seed_channel.ok_or_else(|| {
                    hdqkd::Error::ConfigGeneral(
                        "--seed-channel is required without --config".into(),
                    )
                })?,
            };
            let cycles = args.cycles.ok_or_else(|| {
                hdqkd::Error::ConfigGeneral("--cycles is required without --config".into())
            })?;
            SessionConfig::ideal(args.dim.unwrap_or(16), preset.pulse(), cycles, seeds)
        }
    };
    if let Some(p) = &args.preset {
        if args.config.is_some() {
            config.pulse = Preset::parse(p)?.pulse();
        }
    }
    if let Some(v) = args.cycles {
        config.duration_cycles = v;
    }
    if let Some(v) = args.seed_alice {
        config.seeds.alice = v;
    }
    if let Some(v) = args.seed_bob {
        config.seeds.bob = v;
    }
    if let Some(v) = args.seed_channel {
        config.seeds.channel = v;
    }
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(m) = &args.model {
        config.model = match m.as_str() {
            "ideal" => Model::Ideal,
            "optical" => Model::Optical,
            other => {
                return Err(hdqkd::Error::ConfigGeneral(format!(
                    "--model must be ideal or optical, got {other:?}"
                )))
            }
        };
        if config.model == Model::Optical && config.optics.is_none() {
            config.optics = Some(OpticalSetup::default_for_dim(config.dim));
        }
    }
    if let Some(v) = args.mu {
        config.pulse.mu = v;
    }
    if let Some(v) = args.eta {
        config.pulse.eta = v;
    }
    if let Some(v) = args.dark_rate_hz {
        config.pulse.dark_rate_hz = v;
    }
    if let Some(v) = args.jitter {
        config.noise.phase_jitter_rad = v;
    }
    if let Some(v) = args.background {
        config.noise.background_click_prob = v;
    }
    if let Some(target) = args.calibrate_qber {
        let seed = config.seeds.channel ^ 0x5ca1_ab1e;
        config.noise =
            calibrate_jitter_to_qber(target, &config.pulse, &config.noise, config.dim, 200_000, seed)?;
        eprintln!(
            "calibrated phase jitter to {:.6} rad for target QBER {:.4}",
            config.noise.phase_jitter_rad, target
        );
    }
    config.validate()?;
    Ok(config)
}

fn write_session_outputs(dir: &Path, log: &SessionLog, config: &SessionConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let result = sift(log)?;
    let hours = logical_wall_hours(config.duration_cycles, &config.pulse);
    let report = build_report(&result, &config.pulse, hours)?;

    std::fs::write(dir.join("session_log.csv"), log.to_csv())?;
    std::fs::write(dir.join("sift_result.json"), result.to_json())?;
    std::fs::write(dir.join("security_report.json"), report.to_json())?;
    std::fs::write(
        dir.join("config_snapshot.json"),
        serde_json::to_string_pretty(config).expect("config serializes"),
    )?;

    println!(
        "cycles {}  raw {}  sifted {}  N_c {}  N_i {}",
        config.duration_cycles,
        result.raw_detections,
        result.sifted_detections,
        result.n_correct,
        result.n_incorrect
    );
    match report.qber {
        Some(q) => println!(
            "QBER {:.4} +- {:.4}  thresholds: individual {:.4}, coherent {:.4}",
            q,
            report.qber_std_err.unwrap_or(0.0),
            report.threshold_individual,
            report.threshold_coherent
        ),
        None => println!("QBER undefined (empty sifted set)"),
    }
    if let Some(h) = report.entropy_bits {
        println!("symbol entropy {h:.3} bits");
    }
    println!(
        "rates: raw {:.2}/h, sifted {:.2}/h over {:.3} h (logical)",
        report.raw_rate_per_hour, report.sifted_rate_per_hour, report.wall_hours
    );
    match report.verdict {
        Some(v) => println!("verdict: {}", serde_json::to_string(&v).unwrap().trim_matches('"')),
        None => println!("verdict withheld"),
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn cmd_verify_mubs(dump: Option<&Path>, load: Option<&Path>) -> Result<bool> {
    let family = match load {
        Some(path) => MubFamily::from_grid_text(&std::fs::read_to_string(path)?)?,
        None => builtin_mubs_16(),
    };
    if let Some(path) = dump {
        std::fs::write(path, family.to_grid_text())?;
        println!("matrices written to {}", path.display());
    }
    let report = verify_mub(&family);
    println!("{report}");
    Ok(report.passed)
}

fn cmd_pattern(args: &PatternArgs) -> Result<()> {
    let family = builtin_mubs_16();
    let mut setup = OpticalSetup::default_16();
    setup.focal_length_m = args.focal_length_m;
    setup.pinhole_diameter_m = args.pinhole_m;
    let alice = family.mask(Basis::parse(&args.alice_basis)?, args.alice_k);
    let bob = family.mask(Basis::parse(&args.bob_basis)?, args.bob_k);
    let curve = render_pattern(&setup, &alice, &bob, args.span_m, args.points)?;
    let csv = curve.to_csv();
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv)?;
            println!("pattern written to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_thresholds(dims: &[usize]) -> Result<()> {
    println!("D, D_ind, D_coh");
    for &d in dims {
        println!(
            "{}, {:.4}, {:.4}",
            d,
            threshold_individual(d)?,
            threshold_coherent(d)?
        );
    }
    Ok(())
}

fn cmd_serve(role: Role, args: &ServeArgs) -> Result<()> {
    let config = build_session_config(&args.session)?;
    let log = run_session(&config)?;
    let opts = WireOptions {
        batch_size: args.batch,
        realtime_hz: if args.realtime {
            Some(config.pulse.rep_rate_hz)
        } else {
            None
        },
        ..WireOptions::default()
    };
    let (result, recording) = match role {
        Role::Alice => {
            let listener = TcpListener::bind(&args.addr)?;
            println!("alice listening on {}", listener.local_addr()?);
            serve_alice(&listener, &log, &opts)?
        }
        Role::Bob => connect_bob(args.addr.as_str(), &log, &opts)?,
    };
    if let Some(path) = &args.record {
        recording.save(path)?;
        println!("wire recording written to {}", path.display());
    }
    let dir = resolve_output_dir(args.session.out_dir.as_deref(), &config);
    std::fs::create_dir_all(&dir)?;
    let name = match role {
        Role::Alice => "wire_sift_alice.json",
        Role::Bob => "wire_sift_bob.json",
    };
    std::fs::write(dir.join(name), result.to_json())?;
    println!(
        "reconciled: raw {}  sifted {}  N_c {}  N_i {}  QBER {}",
        result.raw_detections,
        result.sifted_detections,
        result.n_correct,
        result.n_incorrect,
        result
            .qber
            .map(|q| format!("{q:.4}"))
            .unwrap_or_else(|| "undefined".into())
    );
    Ok(())
}

fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let config = build_session_config(&args.session)?;
    let log = run_session(&config)?;
    let role = match args.role.as_str() {
        "alice" => Role::Alice,
        "bob" => Role::Bob,
        other => {
            return Err(hdqkd::Error::ConfigGeneral(format!(
                "--role must be alice or bob, got {other:?}"
            )))
        }
    };
    let recording = WireRecording::load(&args.recording)?;
    let result = replay(&recording, &log, role, args.batch)?;
    println!("{}", result.to_json());
    Ok(())
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match &cli.command {
        Command::VerifyMubs { dump, load } => {
            cmd_verify_mubs(dump.as_deref(), load.as_deref())
        }
        Command::Run(args) => {
            let config = build_session_config(&args.session)?;
            let log = run_session(&config)?;
            let dir = resolve_output_dir(args.session.out_dir.as_deref(), &config);
            write_session_outputs(&dir, &log, &config)?;
            Ok(true)
        }
        Command::Pattern(args) => {
            cmd_pattern(args)?;
            Ok(true)
        }
        Command::Thresholds { dims } => {
            cmd_thresholds(dims)?;
            Ok(true)
        }
        Command::ServeAlice(args) => {
            cmd_serve(Role::Alice, args)?;
            Ok(true)
        }
        Command::ServeBob(args) => {
            cmd_serve(Role::Bob, args)?;
            Ok(true)
        }
        Command::Replay(args) => {
            cmd_replay(args)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
