//! `ecu` command line. Every command is a thin shell over the core and
//! testkit crates; [`run`] is the whole program minus process exit.
//!
//! Exit codes: 0 success, 1 domain error (invalid message, gateway error,
//! unreadable file), 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ecu_core::adapters::wire_request;
use ecu_core::codec::{self, CodecError, CodecOptions, MessageKind};
use ecu_core::crypto::{self, CryptoError, TripleDesKey, KEY_ENV};
use ecu_core::gateway::{serve, GatewayConfig};
use ecu_core::registry::{check_signature, load_registry, resolve_function};
use ecu_testkit::{client_send, spawn_mock, EcuAddress, MockBehavior, MockKind};

#[derive(Debug, Parser)]
#[command(name = "ecu", version, about = "ECL gateway and message tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the gateway described by a config file until interrupted.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a message against the request (or response) grammar.
    Validate {
        #[arg(long)]
        response: bool,
        /// Skip the lexical checks on IPs, version, stamp and values.
        #[arg(long)]
        lax: bool,
        file: PathBuf,
    },
    /// Send a request to a gateway and print the reply.
    Send {
        /// http://HOST:PORT or tcp://HOST:PORT
        #[arg(long)]
        ecu: String,
        #[arg(long)]
        file: PathBuf,
        /// 48 hex digits; defaults to $ECL_KEY. Without a key the request goes in the clear.
        #[arg(long)]
        key: Option<String>,
    },
    /// Encrypt the payload of a request or response.
    Encrypt {
        /// 48 hex digits; defaults to $ECL_KEY.
        #[arg(long)]
        key: Option<String>,
        file: PathBuf,
    },
    /// Decrypt the payload of an encrypted request or response.
    Decrypt {
        /// 48 hex digits; defaults to $ECL_KEY.
        #[arg(long)]
        key: Option<String>,
        file: PathBuf,
    },
    /// Print the message the adapter would send for a request.
    Translate {
        #[arg(long)]
        registry: PathBuf,
        file: PathBuf,
    },
    /// Run a mock backend until interrupted.
    Mock {
        kind: MockArg,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Load a registry file and summarize it.
    RegistryCheck { registry: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MockArg {
    SoapDictionary,
    SocketCalc,
    RestEcho,
}

impl From<MockArg> for MockKind {
    fn from(m: MockArg) -> Self {
        match m {
            MockArg::SoapDictionary => MockKind::SoapDictionary,
            MockArg::SocketCalc => MockKind::SocketCalc,
            MockArg::RestEcho => MockKind::RestEcho,
        }
    }
}

enum Failure {
    /// Exit 1. An empty message means the output already explains it.
    Domain(String),
    /// Exit 2.
    Usage(String),
}

type Outcome = Result<(), Failure>;

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn io(e: std::io::Error) -> Failure {
    domain(format!("write failed: {e}"))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| domain(format!("cannot read {}: {e}", path.display())))
}

fn parse_key(flag: Option<String>, env_key: Option<&str>) -> Result<Option<TripleDesKey>, Failure> {
    match flag.as_deref().or(env_key) {
        Some(hex) => TripleDesKey::from_hex(hex.trim())
            .map(Some)
            .map_err(|e| Failure::Usage(format!("bad key: {e}"))),
        None => Ok(None),
    }
}

fn require_key(flag: Option<String>, env_key: Option<&str>) -> Result<TripleDesKey, Failure> {
    parse_key(flag, env_key)?.ok_or_else(|| Failure::Usage(format!("no key: pass --key or set {KEY_ENV}")))
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| domain(format!("cannot start runtime: {e}")))
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("ECU_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `args` (including the program name) and runs the command, reading
/// the fallback key from `ECL_KEY`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env_key(args, std::env::var(KEY_ENV).ok(), out, err)
}

/// [`run`] with the fallback key passed in instead of read from the environment.
pub fn run_with_env_key<I, T>(args: I, env_key: Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    match execute(cli.command, env_key.as_deref(), out, err) {
        Ok(()) => 0,
        Err(Failure::Domain(msg)) => {
            if !msg.is_empty() {
                let _ = writeln!(err, "ecu: {msg}");
            }
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "ecu: {msg}");
            2
        }
    }
}

fn execute(command: Command, env_key: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match command {
        Command::Serve { config } => serve_cmd(&config, env_key, err),
        Command::Validate { response, lax, file } => {
            let text = read(&file)?;
            let opts = if lax {
                CodecOptions::lax()
            } else {
                CodecOptions::default()
            };
            let report = if response {
                codec::validate_response_with(&text, &opts)
            } else {
                codec::validate_request_with(&text, &opts)
            };
            writeln!(out, "{report}").map_err(io)?;
            if report.ok() {
                Ok(())
            } else {
                Err(Failure::Domain(String::new()))
            }
        }
        Command::Send { ecu, file, key } => {
            let addr: EcuAddress = ecu.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
            let key = parse_key(key, env_key)?;
            let req = codec::parse_request(&read(&file)?).map_err(domain)?;
            let resp = runtime()?
                .block_on(client_send(&addr, &req, key.as_ref()))
                .map_err(domain)?;
            let xml = codec::serialize_response(&resp).map_err(domain)?;
            out.write_all(xml.as_bytes()).map_err(io)
        }
        Command::Encrypt { key, file } => {
            let key = require_key(key, env_key)?;
            let text = read(&file)?;
            let doc = match codec::detect_kind(&text).map_err(domain)? {
                MessageKind::Request => {
                    crypto::encrypt_request_payload(&codec::parse_request(&text).map_err(domain)?, &key)
                }
                MessageKind::Response => {
                    crypto::encrypt_response_payload(&codec::parse_response(&text).map_err(domain)?, &key)
                }
                k if k.is_encrypted() => return Err(domain("payload is already encrypted")),
                _ => return Err(domain("not an ECL request or response")),
            }
            .map_err(domain)?;
            out.write_all(doc.as_bytes()).map_err(io)
        }
        Command::Decrypt { key, file } => {
            let key = require_key(key, env_key)?;
            let text = read(&file)?;
            if !codec::detect_kind(&text).map_err(domain)?.is_encrypted() {
                return Err(domain("payload is not encrypted"));
            }
            let xml = match crypto::decrypt_request_payload(&text, &key) {
                Ok(req) => codec::serialize_request(&req),
                Err(CryptoError::Codec(CodecError::GrammarViolation(_))) => {
                    let resp = crypto::decrypt_response_payload(&text, &key).map_err(domain)?;
                    codec::serialize_response(&resp)
                }
                Err(e) => return Err(domain(e)),
            }
            .map_err(domain)?;
            out.write_all(xml.as_bytes()).map_err(io)
        }
        Command::Translate { registry, file } => {
            let registry = load_registry(&read(&registry)?).map_err(domain)?;
            let req = codec::parse_request(&read(&file)?).map_err(domain)?;
            let record = registry.lookup(req.destination_id).map_err(domain)?;
            let sig = resolve_function(record, &req.function_invoked).map_err(domain)?;
            let report = check_signature(&req, sig);
            if !report.ok() {
                return Err(domain(format!("signature mismatch\n{report}")));
            }
            out.write_all(&wire_request(record, &record.backends[0], &req, sig))
                .map_err(io)
        }
        Command::Mock { kind, port, host } => {
            let rt = runtime()?;
            rt.block_on(async {
                let mock = spawn_mock(kind.into(), SocketAddr::new(host, port), MockBehavior::default())
                    .await
                    .map_err(|e| domain(format!("cannot bind {host}:{port}: {e}")))?;
                let _ = writeln!(err, "ecu: {kind:?} mock listening on {}", mock.addr());
                let _ = err.flush();
                tokio::signal::ctrl_c().await.map_err(domain)?;
                mock.stop().await;
                Ok(())
            })
        }
        Command::RegistryCheck { registry } => {
            let reg = load_registry(&read(&registry)?).map_err(domain)?;
            writeln!(out, "ok: {} service(s)", reg.len()).map_err(io)?;
            for s in reg.services() {
                let functions: Vec<&str> = s.functions.iter().map(|f| f.name.as_str()).collect();
                writeln!(
                    out,
                    "  {} {} {} at {} -> {} backend(s); functions: {}",
                    s.service_id,
                    s.name,
                    s.protocol.as_str(),
                    s.advertised_ip,
                    s.backends.len(),
                    functions.join(", ")
                )
                .map_err(io)?;
            }
            Ok(())
        }
    }
}

fn serve_cmd(path: &Path, env_key: Option<&str>, err: &mut dyn Write) -> Outcome {
    let mut config = GatewayConfig::load(path).map_err(domain)?;
    if config.key.is_none() {
        config.key = parse_key(None, env_key)?;
    }
    init_logging();
    runtime()?.block_on(async {
        let running = serve(&config).await.map_err(domain)?;
        let show = |a: Option<SocketAddr>| a.map_or("-".to_string(), |a| a.to_string());
        let _ = writeln!(
            err,
            "ecu: gateway listening http={} tcp={}",
            show(running.http_addr()),
            show(running.tcp_addr())
        );
        let _ = err.flush();
        tokio::signal::ctrl_c().await.map_err(domain)?;
        let _ = writeln!(err, "ecu: draining in-flight requests");
        running.shutdown().await;
        Ok(())
    })
}
