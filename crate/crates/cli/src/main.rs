use std::fmt::Display;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use specassist_core::kb::parse_corpus;
use specassist_core::{convert_batch, BatchOutcome, KnowledgeBase, SlotKind, SynthesisControls};
use specassist_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "specassist", version, about = "Turn city requirements into formal specifications")]
struct Cli {
    /// TOML config file (service settings; `kb_path` is also used by convert and synth)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert one requirement per line into JSONL outcomes
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build a knowledge-base store from an annotated JSONL corpus
    KbBuild {
        /// Defaults to the bundled six-requirement corpus
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Synthesize annotated requirements with controlled missing slots
    Synth {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        count: usize,
        /// `kind=rate`, repeatable. Replaces the default rates when given.
        #[arg(long = "missing", value_parser = parse_rate)]
        missing: Vec<(SlotKind, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the HTTP service until interrupted
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn parse_rate(s: &str) -> Result<(SlotKind, f64), String> {
    let (k, r) = s.split_once('=').ok_or_else(|| format!("expected kind=rate, got `{s}`"))?;
    let kind: SlotKind = k.trim().parse().map_err(|e| format!("{e}"))?;
    let rate: f64 = r.trim().parse().map_err(|_| format!("`{r}` is not a number"))?;
    Ok((kind, rate))
}

struct Failure {
    code: u8,
    message: String,
}

fn io_fail(what: impl Display, path: &Path, e: impl Display) -> Failure {
    Failure { code: 1, message: format!("{what} {}: {e}", path.display()) }
}

fn fail(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stderr().is_terminal()
}

fn report(label: &str, ansi: &str, message: &str) {
    if use_color() {
        eprintln!("\x1b[{ansi}m{label}:\x1b[0m {message}");
    } else {
        eprintln!("{label}: {message}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            report("error", "31", &f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Convert { input, kb, output } => {
            let kb = load_kb(kb.as_deref().or(config.kb_path.as_deref()))?;
            let text = std::fs::read_to_string(&input).map_err(|e| io_fail("cannot read", &input, e))?;
            convert(&text, &kb, &output)
        }
        Command::KbBuild { corpus, output } => {
            let records = match &corpus {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| io_fail("cannot read", path, e))?;
                    parse_corpus(&text).map_err(|e| fail(format!("{}: {e}", path.display())))?
                }
                None => KnowledgeBase::seed_records(),
            };
            let kb = KnowledgeBase::build(&records).map_err(|e| fail(e.to_string()))?;
            std::fs::write(&output, kb.save()).map_err(|e| io_fail("cannot write", &output, e))?;
            eprintln!(
                "wrote {} ({} vocabulary entries, {} patterns)",
                output.display(),
                kb.vocabulary().len(),
                kb.patterns().len()
            );
            Ok(0)
        }
        Command::Synth { kb, count, missing, seed, output } => {
            let kb = load_kb(kb.as_deref().or(config.kb_path.as_deref()))?;
            let mut controls = SynthesisControls::with_default_rates(count, seed);
            if !missing.is_empty() {
                controls.missing_rates = missing.into_iter().collect();
            }
            let records = kb.synthesize(&controls).map_err(|e| fail(e.to_string()))?;
            let mut out = String::new();
            for r in &records {
                out.push_str(&r.to_json_line());
                out.push('\n');
            }
            std::fs::write(&output, out).map_err(|e| io_fail("cannot write", &output, e))?;
            Ok(0)
        }
        Command::Serve { port, kb, static_dir } => {
            let mut config = config;
            if let Some(port) = port {
                config.port = port;
            }
            if let Some(kb) = kb {
                config.kb_path = Some(kb);
            }
            if let Some(dir) = static_dir {
                config.static_dir = Some(dir);
            }
            serve(config)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, Failure> {
    let Some(path) = path else { return Ok(ServiceConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| io_fail("cannot read config", path, e))?;
    toml::from_str(&text).map_err(|e| io_fail("invalid config", path, e))
}

fn load_kb(path: Option<&Path>) -> Result<KnowledgeBase, Failure> {
    let path = path.ok_or_else(|| fail("no knowledge base given; pass --kb or set kb_path in the config"))?;
    let bytes = std::fs::read(path).map_err(|e| io_fail("cannot read knowledge base", path, e))?;
    KnowledgeBase::load(&bytes).map_err(|e| io_fail("cannot load knowledge base", path, e))
}

fn convert(input: &str, kb: &KnowledgeBase, output: &Path) -> Result<u8, Failure> {
    let outcomes = convert_batch(input, kb);
    let mut out = String::new();
    for o in &outcomes {
        out.push_str(&serde_json::to_string(o).expect("outcome serializes"));
        out.push('\n');
    }
    std::fs::write(output, out).map_err(|e| io_fail("cannot write", output, e))?;
    let mut incomplete = 0;
    for o in &outcomes {
        match o {
            BatchOutcome::Ok { .. } => {}
            BatchOutcome::NeedsClarification { line, missing, .. } => {
                incomplete += 1;
                let names: Vec<String> = missing.iter().map(|k| k.to_string()).collect();
                report("incomplete", "33", &format!("line {line}: missing {}", names.join(", ")));
            }
            BatchOutcome::Error { line, message, .. } => {
                incomplete += 1;
                report("incomplete", "33", &format!("line {line}: {message}"));
            }
        }
    }
    Ok(if incomplete == 0 { 0 } else { 2 })
}

fn serve(config: ServiceConfig) -> Result<u8, Failure> {
    let kb = match &config.kb_path {
        Some(path) => load_kb(Some(path))?,
        None => return Err(fail("no knowledge base given; pass --kb or set kb_path in the config")),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| fail(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let addr = (config.host, config.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| fail(format!("cannot listen on {}:{}: {e}", config.host, config.port)))?;
        let local = listener.local_addr().map_err(|e| fail(e.to_string()))?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        let state = AppState::new(config, kb);
        specassist_service::serve(state, listener).await.map_err(|e| fail(format!("server error: {e}")))?;
        Ok(0)
    })
}
