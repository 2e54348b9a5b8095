//! `neurocnc` command line.
//!
//! Exit codes: 0 success, 2 input error, 3 teaching failure, 4 verification
//! threshold missed, 5 transfer failure. Diagnostics go to standard error.

use std::fs;
use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use neurocnc::config::{config_path, load_config, Config};
use neurocnc::corpus::{generate_family, teachable_classes, Family};
use neurocnc::dnc::{self, frame, TcpChannel};
use neurocnc::nc::{parse_program, split_program, NcProgram};
use neurocnc::neural::{Bank, Verdict};
use neurocnc::part_model::{load_part, write_part, PartModel, Stock, Tool};
use neurocnc::pipeline::{
    self, generate_program, load_corpus, simulate_part, teach_bank, verify_part, Mode, Outcome, SimulateReport,
    TransferReport,
};
use neurocnc::recognition::OperationClass;
use neurocnc::sim::Simulator;

#[derive(Parser)]
#[command(name = "neurocnc", version, about = "Teach, generate, verify, simulate and transfer NC part programs")]
struct Cli {
    /// TOML config file; `NEUROCNC_CONFIG` is used when this is absent.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set sim.kv=60`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic teaching corpus of part files.
    Corpus {
        /// Families to generate (holes, deep_holes, pockets, contours); all by default.
        #[arg(long, value_delimiter = ',')]
        families: Vec<Family>,
        #[arg(long, default_value_t = 40)]
        count: usize,
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Teach one network per class from a directory of part files.
    Teach {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated class names; every class with a corpus family by default.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<OperationClass>,
        #[arg(long)]
        out: PathBuf,
        /// Teaching report; defaults to the bank path with `.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Plan a part and write its NC program.
    Generate {
        #[arg(long)]
        part: PathBuf,
        #[arg(long, default_value = "teacher")]
        mode: Mode,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a part in both modes, simulate both and compare.
    Verify {
        #[arg(long)]
        part: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a program against a stock.
    Simulate {
        #[arg(long)]
        program: PathBuf,
        /// Part file, or a JSON object with `stock` and `tools`.
        #[arg(long)]
        stock: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        heightfield: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Send a program or part file to a listening `recv`.
    Send {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_name = "HOST:PORT")]
        to: String,
        /// Payload type: nc or part.
        #[arg(long, default_value = "nc")]
        kind: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Accept one transfer and write the payload to a file.
    Recv {
        #[arg(long, value_name = "HOST:PORT")]
        listen: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Split a program into its geometry and function streams.
    Split {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long)]
        functions: PathBuf,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig,
    /// Write the JSON schemas of all reports into a directory.
    Schemas {
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Input(anyhow::Error),
    Teaching(String),
    Verification(String),
    Transfer(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Teaching(_) => 3,
            Failure::Verification(_) => 4,
            Failure::Transfer(_) => 5,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type CmdResult = Result<(), Failure>;

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("{}: cannot create directory", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("{}: cannot write", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, &s)
}

fn read_program(path: &Path) -> anyhow::Result<NcProgram> {
    let text = fs::read_to_string(path).with_context(|| format!("{}: cannot read", path.display()))?;
    parse_program(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn read_part(path: &Path) -> anyhow::Result<PartModel> {
    load_part(path).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn read_bank(path: &Path) -> anyhow::Result<Bank> {
    Bank::load(path).map_err(|e| anyhow!("{}: {e}", path.display()))
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct StockFile {
    stock: Stock,
    tools: Vec<Tool>,
}

fn corpus(cfg: &Config, families: &[Family], count: usize, seed: Option<u64>, out: &Path) -> CmdResult {
    let families = if families.is_empty() { Family::ALL.to_vec() } else { families.to_vec() };
    let seed = seed.unwrap_or(cfg.seed);
    for fam in families {
        for (i, part) in generate_family(fam, count, seed).iter().enumerate() {
            write_file(&out.join(format!("{fam}_{i:03}.json")), &write_part(part))?;
        }
    }
    Ok(())
}

fn teach(cfg: &Config, corpus: &Path, classes: &[OperationClass], out: &Path, report: Option<&Path>) -> CmdResult {
    let parts: Vec<PartModel> = load_corpus(corpus)
        .map_err(|e| anyhow!("{e}"))?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    if parts.is_empty() {
        return Err(anyhow!("{}: no part files", corpus.display()).into());
    }
    let classes = if classes.is_empty() { teachable_classes() } else { classes.to_vec() };
    let (bank, run) = teach_bank(&parts, &classes, cfg);
    write_file(out, &bank.to_json())?;
    let report = report.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("report.json"));
    write_json(&report, &run)?;
    for c in &run.classes {
        match (&c.report, &c.error) {
            (Some(r), _) => {
                let m = r.test_metrics.last();
                eprintln!(
                    "{}: {:?} after {} rounds, {} pairs, test mean {:.4} max {:.4}",
                    c.class,
                    r.verdict,
                    r.rounds,
                    c.pairs,
                    m.map_or(f64::NAN, |m| m.mean_err),
                    m.map_or(f64::NAN, |m| m.max_err)
                );
            }
            (None, Some(e)) => eprintln!("{}: {e}", c.class),
            (None, None) => {}
        }
    }
    if run.verdict == Verdict::Success {
        Ok(())
    } else {
        let failed: Vec<String> = run
            .classes
            .iter()
            .filter(|c| !c.succeeded())
            .map(|c| c.class.to_string())
            .collect();
        Err(Failure::Teaching(format!("teaching failed for {}", failed.join(", "))))
    }
}

fn generate(cfg: &Config, part: &Path, mode: Mode, bank: Option<&Path>, out: &Path) -> CmdResult {
    let model = read_part(part)?;
    let bank = bank.map(read_bank).transpose()?;
    if mode == Mode::Nn && bank.is_none() {
        return Err(anyhow!("--mode nn needs --bank").into());
    }
    let program = generate_program(&model, mode, bank.as_ref(), cfg).map_err(|e| anyhow!("{}: {e}", part.display()))?;
    write_file(out, &program.to_text())?;
    Ok(())
}

fn verify(cfg: &Config, part: &Path, bank: &Path, report: &Path) -> CmdResult {
    let model = read_part(part)?;
    let bank = read_bank(bank)?;
    let name = model.id.clone().unwrap_or_else(|| part.display().to_string());
    let r = verify_part(&model, &name, &bank, cfg).map_err(|e| anyhow!("{}: {e}", part.display()))?;
    write_json(report, &r)?;
    eprintln!(
        "{name}: hausdorff {:.4} (limit {:.4}), nn max_dev {:.4}, teacher max_dev {:.4}",
        r.hausdorff_max, r.hausdorff_limit, r.nn.deviation.max_dev, r.teacher.deviation.max_dev
    );
    match r.verdict {
        Outcome::Pass => Ok(()),
        Outcome::Fail => Err(Failure::Verification(r.failures.join("; "))),
    }
}

fn simulate(
    cfg: &Config,
    program_path: &Path,
    stock_path: &Path,
    trace: Option<&Path>,
    heightfield: Option<&Path>,
    report: Option<&Path>,
) -> CmdResult {
    let program = read_program(program_path)?;
    let text = fs::read_to_string(stock_path).with_context(|| format!("{}: cannot read", stock_path.display()))?;
    let part = neurocnc::part_model::parse_part(&text).ok();
    let mut trace_buf: Option<Vec<u8>> = trace.map(|_| Vec::new());
    let sink = trace_buf.as_mut().map(|b| b as &mut dyn Write);
    let sim_err = |e: String| anyhow!("{}: {e}", program_path.display());
    let (hf, rep) = match &part {
        Some(p) => {
            let (hf, m) = simulate_part(p, &program, cfg, sink).map_err(|e| sim_err(e.to_string()))?;
            let rep = SimulateReport {
                program: program_path.display().to_string(),
                config: cfg.clone(),
                sim: m.sim,
                deviation: Some(m.deviation),
                band: Some(m.band),
            };
            (hf, rep)
        }
        None => {
            let sf: StockFile = serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", stock_path.display()))?;
            let (hf, sim) = Simulator::new(&cfg.sim, &sf.tools)
                .run(&program, &sf.stock, sink)
                .map_err(|e| sim_err(e.to_string()))?;
            let rep = SimulateReport {
                program: program_path.display().to_string(),
                config: cfg.clone(),
                sim,
                deviation: None,
                band: None,
            };
            (hf, rep)
        }
    };
    if let (Some(path), Some(buf)) = (trace, trace_buf) {
        write_file(path, &String::from_utf8(buf).map_err(|e| anyhow!("{e}"))?)?;
    }
    if let Some(path) = heightfield {
        write_file(path, &hf.to_text())?;
    }
    if let Some(path) = report {
        write_json(path, &rep)?;
    }
    eprintln!(
        "simulated {:.3} s, cut {:.3} mm, rapid {:.3} mm, max following error {:.4} mm",
        rep.sim.simulated_time, rep.sim.path.cut_length, rep.sim.path.rapid_length, rep.sim.max_following_error
    );
    Ok(())
}

fn send(cfg: &Config, file: &Path, to: &str, kind: &str, report: Option<&Path>) -> CmdResult {
    let ty = match kind {
        "nc" => frame::TYPE_NC,
        "part" => frame::TYPE_PART,
        _ => return Err(anyhow!("unknown payload kind `{kind}` (nc or part)").into()),
    };
    let data = fs::read(file).with_context(|| format!("{}: cannot read", file.display()))?;
    let stream = TcpStream::connect(to).map_err(|e| Failure::Transfer(anyhow!("{to}: {e}")))?;
    let mut ch = TcpChannel::new(stream).map_err(|e| Failure::Transfer(e.into()))?;
    let sent = dnc::send_payload(&mut ch, ty, &data, &cfg.dnc).map_err(|e| Failure::Transfer(e.into()))?;
    eprintln!(
        "sent {} bytes in {} frames, {} retries",
        sent.bytes, sent.frames_sent, sent.retries
    );
    if let Some(path) = report {
        let r = TransferReport {
            config: cfg.clone(),
            file: file.display().to_string(),
            sent: Some(sent),
            received: None,
        };
        write_json(path, &r)?;
    }
    Ok(())
}

fn recv(cfg: &Config, listen: &str, out: &Path, report: Option<&Path>) -> CmdResult {
    let listener = TcpListener::bind(listen).map_err(|e| anyhow!("{listen}: {e}"))?;
    eprintln!("listening on {}", listener.local_addr().map_err(|e| anyhow!("{e}"))?);
    let (stream, _) = listener.accept().map_err(|e| Failure::Transfer(e.into()))?;
    let mut ch = TcpChannel::new(stream).map_err(|e| Failure::Transfer(e.into()))?;
    let (_, data, received) = dnc::receive_payload(&mut ch, &cfg.dnc).map_err(|e| Failure::Transfer(e.into()))?;
    let last = (received.frames_accepted.wrapping_sub(1)) as u8;
    dnc::linger(&mut ch, last, &cfg.dnc).map_err(|e| Failure::Transfer(e.into()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("{}: cannot create directory", dir.display()))?;
    }
    fs::write(out, &data).with_context(|| format!("{}: cannot write", out.display()))?;
    eprintln!("received {} bytes in {} frames", received.bytes, received.frames_accepted);
    if let Some(path) = report {
        let r = TransferReport {
            config: cfg.clone(),
            file: out.display().to_string(),
            sent: None,
            received: Some(received),
        };
        write_json(path, &r)?;
    }
    Ok(())
}

fn split(program: &Path, geometry: &Path, functions: &Path) -> CmdResult {
    let p = read_program(program)?;
    let (g, f) = split_program(&p);
    write_file(geometry, &g.to_text())?;
    let mut ftext = String::new();
    if !f.header.is_empty() {
        ftext = format!("({})\n", f.header);
    }
    ftext.push_str(&f.to_text());
    write_file(functions, &ftext)?;
    Ok(())
}

fn schemas(out: &Path) -> CmdResult {
    for (name, schema) in pipeline::report_schemas() {
        write_json(&out.join(format!("{name}.schema.json")), &schema)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let path = config_path(cli.config.as_deref());
    let cfg = load_config(path.as_deref(), &cli.set).map_err(|e| anyhow!("config: {e}"))?;
    match cli.command {
        Command::Corpus {
            families,
            count,
            seed,
            out,
        } => corpus(&cfg, &families, count, seed, &out),
        Command::Teach {
            corpus,
            classes,
            out,
            report,
        } => teach(&cfg, &corpus, &classes, &out, report.as_deref()),
        Command::Generate { part, mode, bank, out } => generate(&cfg, &part, mode, bank.as_deref(), &out),
        Command::Verify { part, bank, report } => verify(&cfg, &part, &bank, &report),
        Command::Simulate {
            program,
            stock,
            trace,
            heightfield,
            report,
        } => simulate(
            &cfg,
            &program,
            &stock,
            trace.as_deref(),
            heightfield.as_deref(),
            report.as_deref(),
        ),
        Command::Send { file, to, kind, report } => send(&cfg, &file, &to, &kind, report.as_deref()),
        Command::Recv { listen, out, report } => recv(&cfg, &listen, &out, report.as_deref()),
        Command::Split {
            program,
            geometry,
            functions,
        } => split(&program, &geometry, &functions),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Schemas { out } => schemas(&out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(e) | Failure::Transfer(e) => eprintln!("error: {e:#}"),
                Failure::Teaching(m) | Failure::Verification(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
