use std::fs;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use garbled_eda::costmodel::{estimate_modes, render_table, CostConstants, CostInput};
use garbled_eda::garbling::{encode, garble, labels_to_bytes, Seed};
use garbled_eda::netlist::{
    emit_bench, format_bits, parse_bench, parse_bits, parse_verilog_subset, Circuit, NetlistError,
    StatsReport,
};
use garbled_eda::protocol::{
    run_evaluator, run_garbler, run_local, tcp_channel, EvaluatorOutput, Mode, OtKind, ProtocolError,
    SessionConfig,
};
use garbled_eda::selector::{combine, selector_savings};

#[derive(Parser)]
#[command(
    name = "geda",
    version,
    about = "Garbled-circuit netlist simulation between a garbler and an evaluator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a netlist and report its gate statistics.
    Parse {
        file: PathBuf,
        #[command(flatten)]
        netlist: NetlistOpts,
        #[arg(long)]
        json: bool,
    },
    /// Garble a netlist and write the garbled circuit and encoding files.
    Garble {
        file: PathBuf,
        #[command(flatten)]
        netlist: NetlistOpts,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// 64 hex digits; random when absent.
        #[arg(long)]
        seed: Option<String>,
        /// Also write the encoded labels of these input bits.
        #[arg(long)]
        inputs: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run both parties in-process and print the output bits.
    Simulate {
        file: PathBuf,
        #[command(flatten)]
        netlist: NetlistOpts,
        /// Input bits, garbler inputs first.
        #[arg(long)]
        inputs: String,
        #[command(flatten)]
        session: SessionOpts,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Serve garbler sessions over TCP, one at a time.
    Listen {
        file: PathBuf,
        #[command(flatten)]
        netlist: NetlistOpts,
        #[arg(long, default_value = "127.0.0.1:7070")]
        addr: String,
        /// Garbler input bits.
        #[arg(long, default_value = "")]
        garbler_bits: String,
        #[command(flatten)]
        session: SessionOpts,
        /// Fixed seed; reuse across sessions leaks correlations.
        #[arg(long, requires = "deterministic")]
        seed: Option<String>,
        /// Acknowledge that a fixed seed is in use.
        #[arg(long)]
        deterministic: bool,
        /// Number of sessions to serve before exiting.
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run one evaluator session against a listening garbler.
    Connect {
        #[arg(long, default_value = "127.0.0.1:7070")]
        addr: String,
        /// Evaluator input bits.
        #[arg(long, default_value = "")]
        inputs: String,
        #[command(flatten)]
        session: SessionOpts,
        #[arg(long)]
        json: bool,
    },
    /// Merge netlists behind selector bits.
    Combine {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        /// Merged BENCH file.
        #[arg(short, long)]
        out: PathBuf,
        /// Member map; defaults to the output path with a `.map.json` suffix.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Estimate time, OT and memory costs.
    Estimate {
        file: Option<PathBuf>,
        #[command(flatten)]
        netlist: NetlistOpts,
        /// Instruction count override.
        #[arg(long)]
        inst: Option<usize>,
        /// Total input plus output bits.
        #[arg(long, conflicts_with_all = ["inputs", "outputs"])]
        io: Option<usize>,
        #[arg(long)]
        inputs: Option<usize>,
        #[arg(long)]
        outputs: Option<usize>,
        #[arg(long, value_enum, default_value_t = EstimateMode::Both)]
        mode: EstimateMode,
        /// JSON file overriding cost constants.
        #[arg(long)]
        constants: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct NetlistOpts {
    /// Comma-separated input names owned by the garbler.
    #[arg(long, value_delimiter = ',')]
    garbler_inputs: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
}

#[derive(Args)]
struct SessionOpts {
    #[arg(long, value_enum, default_value_t = ModeArg::Max)]
    mode: ModeArg,
    /// Tables per streamed instruction.
    #[arg(long, default_value_t = 4)]
    batch: usize,
    /// Mask the output and authenticate it with a one-time MAC.
    #[arg(long)]
    mask: bool,
    /// Use the insecure dealer instead of real oblivious transfer.
    #[arg(long)]
    insecure_ot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Auto,
    Bench,
    Verilog,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Max,
    Stream,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateMode {
    Max,
    Stream,
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Max => Mode::MaxPerformance,
            ModeArg::Stream => Mode::ResourceEfficient,
        }
    }
}

impl SessionOpts {
    fn config(&self, seed: Option<Seed>) -> SessionConfig {
        let cfg = SessionConfig::new(self.mode.into())
            .with_batch_size(self.batch)
            .with_mask(self.mask)
            .with_ot(if self.insecure_ot {
                OtKind::InsecureDealer
            } else {
                OtKind::DiffieHellman
            });
        match seed {
            Some(s) => cfg.with_seed(s),
            None => cfg,
        }
    }
}

enum Failure {
    Parse(String),
    Protocol(String),
    Mac(String),
    Other(String),
}

impl Failure {
    fn parts(&self) -> (&'static str, &str, u8) {
        match self {
            Failure::Parse(m) => ("parse", m, 2),
            Failure::Protocol(m) => ("protocol", m, 3),
            Failure::Mac(m) => ("mac", m, 4),
            Failure::Other(m) => ("error", m, 1),
        }
    }
}

impl From<NetlistError> for Failure {
    fn from(e: NetlistError) -> Self {
        Failure::Parse(e.to_string())
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::MacFailure => Failure::Mac(e.to_string()),
            ProtocolError::InputLength { .. } | ProtocolError::InvalidConfig(_) => {
                Failure::Other(e.to_string())
            }
            e => Failure::Protocol(e.to_string()),
        }
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure::Other(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| other(format!("{}: {e}", path.display())))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, data).map_err(|e| other(format!("{}: {e}", path.display())))
}

fn load(path: &Path, opts: &NetlistOpts) -> Result<Circuit, Failure> {
    let text = read(path)?;
    let verilog = match opts.format {
        Format::Verilog => true,
        Format::Bench => false,
        Format::Auto => path.extension().is_some_and(|e| e == "v"),
    };
    let c = if verilog {
        parse_verilog_subset(&text)?
    } else {
        parse_bench(&text)?
    };
    let name = path
        .file_stem()
        .map_or("circuit".into(), |s| s.to_string_lossy().into_owned());
    let c = c.with_name(name);
    if opts.garbler_inputs.is_empty() {
        Ok(c)
    } else {
        Ok(c.with_garbler_inputs(&opts.garbler_inputs)?)
    }
}

fn bits(s: &str, what: &str) -> Result<Vec<bool>, Failure> {
    parse_bits(s).ok_or_else(|| other(format!("{what}: expected a string of 0 and 1, got `{s}`")))
}

fn seed(s: &Option<String>) -> Result<Option<Seed>, Failure> {
    s.as_deref()
        .map(|h| Seed::from_hex(h).ok_or_else(|| other("seed must be 64 hex digits")))
        .transpose()
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string(value).expect("serializable report"));
    } else {
        print!("{}", text());
    }
}

fn output_report(out: &EvaluatorOutput) -> serde_json::Value {
    match out {
        EvaluatorOutput::Plain(y) => json!({ "output": format_bits(y) }),
        EvaluatorOutput::Masked(m) => json!({
            "masked_output": format_bits(&m.bits),
            "tag": format!("{:032x}", m.tag),
        }),
    }
}

fn output_text(out: &EvaluatorOutput) -> String {
    match out {
        EvaluatorOutput::Plain(y) => format!("{}\n", format_bits(y)),
        EvaluatorOutput::Masked(m) => {
            format!("masked {} tag {:032x}\n", format_bits(&m.bits), m.tag)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Parse { file, netlist, json } => {
            let c = load(&file, &netlist)?;
            let r = StatsReport::new(&c);
            emit(json, &r, || {
                format!(
                    "{}: {} gates ({} free, {} non-free), {} inputs, {} outputs, {} instructions\n",
                    r.name, r.gates, r.xor, r.nonfree, r.inputs, r.outputs, r.instructions
                )
            });
        }
        Command::Garble {
            file,
            netlist,
            out,
            seed: seed_hex,
            inputs,
            json,
        } => {
            let c = load(&file, &netlist)?;
            let seed = seed(&seed_hex)?.unwrap_or_else(Seed::random);
            let (f, e, d) = garble(&c, &seed);
            fs::create_dir_all(&out).map_err(other)?;
            let gc = out.join("circuit.gc");
            write(&gc, f.to_bytes())?;
            write(&out.join("encoding.bin"), e.to_bytes())?;
            write(&out.join("decoding.bin"), d.to_bytes())?;
            let mut files = vec!["circuit.gc", "encoding.bin", "decoding.bin"];
            if let Some(x) = inputs {
                let x = bits(&x, "--inputs")?;
                let labels = encode(&e, &x).map_err(other)?;
                write(&out.join("input_labels.bin"), labels_to_bytes(&labels))?;
                files.push("input_labels.bin");
            }
            let r = json!({
                "name": c.name(),
                "tables": f.table_count(),
                "table_bytes": f.table_bytes(),
                "garbled_circuit_bytes": f.to_bytes().len(),
                "files": files,
                "out": out.display().to_string(),
            });
            emit(json, &r, || {
                format!(
                    "{}: {} tables, {} table bytes, wrote {} to {}\n",
                    c.name(),
                    f.table_count(),
                    f.table_bytes(),
                    files.join(", "),
                    out.display()
                )
            });
        }
        Command::Simulate {
            file,
            netlist,
            inputs,
            session,
            seed: seed_hex,
            json,
        } => {
            let c = load(&file, &netlist)?;
            let x = bits(&inputs, "--inputs")?;
            if x.len() != c.input_size() {
                return Err(other(format!(
                    "circuit has {} inputs, got {} bits",
                    c.input_size(),
                    x.len()
                )));
            }
            let ng = c.garbler_inputs().len();
            let cfg = session.config(seed(&seed_hex)?);
            let (g, e) = run_local(&c, &x[..ng], &x[ng..], &cfg)?;
            let mut r = output_report(&e.output);
            r["ot_interactions"] = json!(e.transcript.ot_interactions);
            r["peak_live_labels"] = json!(e.peak_live_labels);
            if let Some(y) = &g.verified_output {
                r["verified_output"] = json!(format_bits(y));
            }
            emit(json, &r, || match &g.verified_output {
                Some(y) => format!("{}{}\n", output_text(&e.output), format_bits(y)),
                None => output_text(&e.output),
            });
        }
        Command::Listen {
            file,
            netlist,
            addr,
            garbler_bits,
            session,
            seed: seed_hex,
            deterministic: _,
            sessions,
            json,
        } => {
            let c = load(&file, &netlist)?;
            let x_g = bits(&garbler_bits, "--garbler-bits")?;
            let cfg = session.config(seed(&seed_hex)?);
            let listener = TcpListener::bind(&addr).map_err(|e| other(format!("{addr}: {e}")))?;
            log::info!("listening on {}", listener.local_addr().map_err(other)?);
            for _ in 0..sessions {
                let (stream, peer) = listener.accept().map_err(other)?;
                log::info!("session with {peer}");
                let mut ch = tcp_channel(stream).map_err(other)?;
                let g = run_garbler(&c, &x_g, &cfg, &mut ch)?;
                let r = json!({
                    "peer": peer.to_string(),
                    "ot_interactions": g.transcript.ot_interactions,
                    "bytes_sent": g.transcript.bytes(garbled_eda::protocol::Direction::Sent),
                    "verified_output": g.verified_output.as_deref().map(format_bits),
                });
                emit(json, &r, || match &g.verified_output {
                    Some(y) => format!("{}\n", format_bits(y)),
                    None => format!("session with {peer} done\n"),
                });
            }
        }
        Command::Connect {
            addr,
            inputs,
            session,
            json,
        } => {
            let x_e = bits(&inputs, "--inputs")?;
            let stream = TcpStream::connect(&addr).map_err(|e| Failure::Protocol(format!("{addr}: {e}")))?;
            let mut ch = tcp_channel(stream).map_err(other)?;
            let e = run_evaluator(&x_e, &session.config(None), &mut ch)?;
            let mut r = output_report(&e.output);
            r["ot_interactions"] = json!(e.transcript.ot_interactions);
            emit(json, &r, || output_text(&e.output));
        }
        Command::Combine {
            files,
            out,
            map,
            json,
        } => {
            let opts = NetlistOpts {
                garbler_inputs: Vec::new(),
                format: Format::Auto,
            };
            let members = files
                .iter()
                .map(|f| load(f, &opts))
                .collect::<Result<Vec<_>, _>>()?;
            let cc = combine(&members).map_err(|e| match e {
                garbled_eda::selector::SelectorError::Netlist(n) => Failure::from(n),
                e => other(e),
            })?;
            write(&out, emit_bench(&cc.circuit))?;
            let map_path = map.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".map.json");
                PathBuf::from(p)
            });
            let stats: Vec<_> = members.iter().map(Circuit::stats).collect();
            let savings = selector_savings(&stats, &cc.circuit.stats());
            let sidecar = json!({
                "selector_wires": cc.selector_wires,
                "bus_width": cc.bus_width(),
                "members": cc.member_map,
            });
            write(
                &map_path,
                serde_json::to_string_pretty(&sidecar).map_err(other)? + "\n",
            )?;
            let r = json!({
                "out": out.display().to_string(),
                "map": map_path.display().to_string(),
                "stats": StatsReport::new(&cc.circuit),
                "savings": savings,
            });
            emit(json, &r, || {
                format!(
                    "{} members, {} selector bits, {} non-free gates ({} added), wrote {} and {}\n",
                    members.len(),
                    cc.selector_wires.len(),
                    cc.circuit.stats().nonfree_count,
                    savings.mux_nonfree_overhead,
                    out.display(),
                    map_path.display()
                )
            });
        }
        Command::Estimate {
            file,
            netlist,
            inst,
            io,
            inputs,
            outputs,
            mode,
            constants,
            json,
        } => {
            let mut input = match &file {
                Some(f) => CostInput::from_stats(&load(f, &netlist)?.stats()),
                None => {
                    if inst.is_none() || (io.is_none() && inputs.is_none() && outputs.is_none()) {
                        return Err(other(
                            "without a netlist, give --inst and --io (or --inputs/--outputs)",
                        ));
                    }
                    CostInput {
                        instructions: 0,
                        input_size: 0,
                        output_size: 0,
                        nonfree: None,
                        gates: None,
                    }
                }
            };
            if let Some(n) = inst {
                input.instructions = n;
            }
            if let Some(n) = io {
                input.input_size = n;
                input.output_size = 0;
            }
            if let Some(n) = inputs {
                input.input_size = n;
            }
            if let Some(n) = outputs {
                input.output_size = n;
            }
            let k = match constants {
                Some(p) => serde_json::from_str::<CostConstants>(&read(&p)?)
                    .map_err(|e| other(format!("{}: {e}", p.display())))?,
                None => CostConstants::default(),
            };
            k.validate().map_err(other)?;
            let modes: &[Mode] = match mode {
                EstimateMode::Max => &[Mode::MaxPerformance],
                EstimateMode::Stream => &[Mode::ResourceEfficient],
                EstimateMode::Both => &Mode::ALL,
            };
            let r = estimate_modes(&input, modes, &k);
            emit(json, &r, || render_table(&r));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GEDA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, message, code) = f.parts();
            eprintln!("{}", json!({ "error": kind, "message": message }));
            ExitCode::from(code)
        }
    }
}
