use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use mojikit::knowledge::{knowledge, CardModule};
use mojikit::presets::load_presets;
use mojikit::protocol::LinkConfig;
use mojikit::sequence::{export_sequence, parse_sequence, validate_sequence, Sequence};
use mojikit::simulator::{run_wire_path, FaultProfile};
use mojikit_service::{ServiceConfig, TargetConfig};

#[derive(Parser)]
#[command(
    name = "mojikit",
    version,
    about = "Author, check and play robot motion sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a sequence document and print the report
    Validate { path: PathBuf },
    /// Relay a sequence to the simulated controller and print its telemetry
    Play {
        /// Document path or preset name
        source: String,
        /// Number of ticks to run (default: until the sequence ends)
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        tick_ms: u64,
        /// Per-transmission drop probability on the link
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        /// Per-transmission corruption probability on the link
        #[arg(long, default_value_t = 0.0)]
        corrupt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List bundled presets, or print one as a document
    Presets {
        #[arg(long, value_name = "NAME")]
        export: Option<String>,
    },
    /// Interaction pattern statistics
    Stats,
    /// List design cards, or show one
    Cards {
        id: Option<String>,
        #[arg(long)]
        module: Option<String>,
    },
    /// Run the HTTP service
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// `simulator` or `serial:<device path>`
        #[arg(long, default_value = "simulator")]
        target: String,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        tick_ms: u64,
        /// Recorded in session info; set the device rate beforehand
        #[arg(long, default_value_t = 115_200)]
        baud: u32,
    },
}

enum Failure {
    Usage(String),
    Parse(String),
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        let (code, msg) = match self {
            Failure::Usage(m) => (1, m),
            Failure::Parse(m) => (2, m),
            Failure::Validation(m) => (3, m),
            Failure::Runtime(m) => (4, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

type CmdResult = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn validate(path: &Path) -> CmdResult {
    let seq = parse_sequence(&read(path)?).map_err(|e| Failure::Parse(e.to_string()))?;
    let report = validate_sequence(&seq);
    if report.is_ok() {
        Ok("ok\n".into())
    } else {
        print!("{report}");
        Err(Failure::Validation(format!(
            "{} is not a valid sequence",
            path.display()
        )))
    }
}

fn load_source(source: &str) -> Result<Sequence, Failure> {
    let path = Path::new(source);
    if path.is_file() {
        let seq = parse_sequence(&read(path)?).map_err(|e| Failure::Parse(e.to_string()))?;
        let report = validate_sequence(&seq);
        if !report.is_ok() {
            return Err(Failure::Validation(report.to_string()));
        }
        return Ok(seq);
    }
    load_presets()
        .get(source)
        .cloned()
        .ok_or_else(|| Failure::Usage(format!("{source:?} is neither a file nor a preset")))
}

fn play(source: &str, ticks: Option<u64>, tick_ms: u64, faults: FaultProfile) -> CmdResult {
    let seq = load_source(source)?;
    let ticks = ticks.unwrap_or_else(|| seq.total_duration_ms().div_ceil(tick_ms));
    let run = run_wire_path(&seq, tick_ms, ticks, &LinkConfig::default(), faults)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let s = run.stats;
    eprintln!(
        "sent {} commands: {} delivered, {} failed, {} transmissions",
        s.sent, s.delivered, s.failed, s.transmissions
    );
    Ok(run.lines().map(|l| l + "\n").collect())
}

fn presets(export: Option<&str>) -> CmdResult {
    let lib = load_presets();
    if let Some(name) = export {
        let seq = lib
            .get(name)
            .ok_or_else(|| Failure::Usage(format!("no preset named {name:?}")))?;
        return Ok(export_sequence(seq).expect("bundled presets are valid"));
    }
    let mut out = String::new();
    for seq in lib.iter() {
        let structures: Vec<_> = seq.structures().map(|s| s.name()).collect();
        let _ = writeln!(
            out,
            "{:<16} {:>6} ms  {}",
            seq.name(),
            seq.total_duration_ms(),
            structures.join(",")
        );
    }
    Ok(out)
}

fn stats() -> CmdResult {
    let stats = knowledge().compute_stats();
    let mut out = String::new();
    let mut dim = "";
    for (d, row) in stats.rows() {
        if d != dim {
            let _ = writeln!(out, "{d}");
            dim = d;
        }
        let _ = writeln!(
            out,
            "  {:<24} {:>3} {:>5.1}%",
            row.category, row.count, row.percent
        );
    }
    let positive: usize = stats
        .affect
        .iter()
        .filter(|r| r.category.starts_with("positive"))
        .map(|r| r.count)
        .sum();
    let _ = writeln!(
        out,
        "positive affect {:>12} {:>5.1}%",
        positive, stats.positive_affect_percent
    );
    let _ = writeln!(out, "total {:>22}", stats.total);
    Ok(out)
}

fn cards(id: Option<&str>, module: Option<&str>) -> CmdResult {
    let kb = knowledge();
    let mut out = String::new();
    if let Some(id) = id {
        let card = kb
            .lookup_card(id)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let _ = writeln!(out, "{} [{}]", card.title, card.module);
        for section in &card.sections {
            let _ = writeln!(out, "  {}", section.heading);
            for item in &section.items {
                let _ = writeln!(out, "    - {item}");
            }
        }
        return Ok(out);
    }
    let module = module
        .map(CardModule::from_str)
        .transpose()
        .map_err(Failure::Usage)?;
    for card in kb.list_cards(module) {
        let _ = writeln!(out, "{:<34} {:<15} {}", card.id, card.module, card.title);
    }
    Ok(out)
}

fn parse_target(target: &str) -> Result<TargetConfig, Failure> {
    match target.split_once(':') {
        None if target == "simulator" => Ok(TargetConfig::Simulator),
        Some(("serial", port)) if !port.is_empty() => {
            Ok(TargetConfig::Serial { port: port.into() })
        }
        _ => Err(Failure::Usage(format!(
            "unknown target {target:?}; use simulator or serial:<path>"
        ))),
    }
}

fn serve(host: &str, port: u16, target: &str, tick_ms: u64, baud: u32) -> CmdResult {
    let target = parse_target(target)?;
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::Usage(format!("bad address: {e}")))?;
    let config = ServiceConfig {
        tick_ms,
        target,
        link: LinkConfig {
            baud,
            ..LinkConfig::default()
        },
        ..ServiceConfig::default()
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    rt.block_on(mojikit_service::serve(config, addr))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(String::new())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Cmd::Validate { path } => validate(&path),
        Cmd::Play {
            source,
            ticks,
            tick_ms,
            loss,
            corrupt,
            seed,
        } => {
            let faults = FaultProfile::new(loss, corrupt, seed)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            play(&source, ticks, tick_ms, faults)
        }
        Cmd::Presets { export } => presets(export.as_deref()),
        Cmd::Stats => stats(),
        Cmd::Cards { id, module } => cards(id.as_deref(), module.as_deref()),
        Cmd::Serve {
            port,
            host,
            target,
            tick_ms,
            baud,
        } => serve(&host, port, &target, tick_ms, baud),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => f.exit(),
    }
}
