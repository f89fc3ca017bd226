use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use worldsmith_core::backend::{Backend, HttpBackend, MockBackend};
use worldsmith_core::raster::Size;
use worldsmith_core::telemetry::{parse_ndjson, CodingLexicon, EventKind, SyncPolicy};
use worldsmith_server::replay::{compare_sessions, config_of, replay, ApiClient};
use worldsmith_server::{analyze, backend_server, routes, Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "worldsmith", version, about = "Tile-based world building service")]
struct Cli {
    #[arg(long, env = "WORLDSMITH_LOG_LEVEL", default_value = "info", global = true)]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    /// Deterministic in-process generator.
    Mock,
    /// Remote server speaking the `/v1` protocol (see --backend-url).
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Run the session API.
    Serve {
        #[arg(long, env = "WORLDSMITH_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "WORLDSMITH_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, env = "WORLDSMITH_BACKEND", value_enum, default_value = "mock")]
        backend: BackendKind,
        #[arg(long, env = "WORLDSMITH_BACKEND_URL", required_if_eq("backend", "http"))]
        backend_url: Option<String>,
        /// Images per generation when the request does not say.
        #[arg(long, env = "WORLDSMITH_BATCH_COUNT", default_value_t = 12)]
        batch_count: u32,
        /// Generation resolution for new sessions: `N` or `WxH`.
        #[arg(long, env = "WORLDSMITH_RESOLUTION", default_value = "512", value_parser = parse_size)]
        resolution: Size,
        /// Blend mask blur in pixels, or `auto` to derive it from the grid gap.
        #[arg(long, env = "WORLDSMITH_BLUR_SIGMA", default_value = "auto", value_parser = parse_sigma)]
        blur_sigma: Sigma,
        /// Seconds to wait for one backend job.
        #[arg(long, env = "WORLDSMITH_JOB_TIMEOUT", default_value_t = 600)]
        job_timeout: u64,
        /// Skip fsync on event log appends.
        #[arg(long, env = "WORLDSMITH_NO_FSYNC")]
        no_fsync: bool,
    },
    /// Serve the deterministic mock over the `/v1` protocol.
    MockBackend {
        #[arg(long, env = "WORLDSMITH_LISTEN", default_value = "127.0.0.1:8090")]
        listen: SocketAddr,
    },
    /// Transition matrix, prompt codes and prompt statistics of event logs.
    Analyze {
        /// NDJSON event exports; sessions are analyzed as one sequence each.
        #[arg(required = true)]
        events: Vec<PathBuf>,
        /// Comma separated event kinds forming the matrix (default: all).
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<EventKind>,
        /// Keep consecutive repeats of the same kind.
        #[arg(long)]
        no_collapse: bool,
        /// JSON object of extra keywords per code, merged into the built-in lexicon.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Directory for transitions.csv, codes.csv and stats.json (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-issue a session's logged actions against a server and compare.
    Replay {
        /// Server holding the original session.
        #[arg(long)]
        from: String,
        #[arg(long)]
        session: String,
        /// Server to replay into (default: same as --from).
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 600)]
        job_timeout: u64,
    },
}

#[derive(Clone, Copy)]
enum Sigma {
    Auto,
    Px(f64),
}

fn parse_size(s: &str) -> Result<Size, String> {
    let num = |v: &str| v.trim().parse::<u32>().ok().filter(|&n| n > 0).ok_or_else(|| format!("bad dimension `{v}`"));
    match s.split_once(['x', 'X']) {
        Some((w, h)) => Ok(Size::new(num(w)?, num(h)?)),
        None => num(s).map(|n| Size::new(n, n)),
    }
}

fn parse_sigma(s: &str) -> Result<Sigma, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Sigma::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(Sigma::Px(v)),
        _ => Err(format!("blur sigma must be `auto` or a non-negative number, got `{s}`")),
    }
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

async fn serve(router: axum::Router, listen: SocketAddr) -> AnyResult<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    // stdout so scripts binding port 0 can read the address
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run_analyze(
    events: Vec<PathBuf>,
    kinds: Vec<EventKind>,
    no_collapse: bool,
    lexicon: Option<PathBuf>,
    out: Option<PathBuf>,
) -> AnyResult<()> {
    let lexicon = match lexicon {
        Some(p) => CodingLexicon::builtin().extend_from_json(&fs::read_to_string(p)?)?,
        None => CodingLexicon::builtin(),
    };
    let kinds = if kinds.is_empty() { EventKind::ALL.to_vec() } else { kinds };
    let logs = events.iter().map(|p| Ok(parse_ndjson(&fs::read(p)?)?)).collect::<AnyResult<Vec<_>>>()?;
    let report = analyze::analyze(&logs, &kinds, !no_collapse, &lexicon);
    match out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("transitions.csv"), report.transitions.to_csv())?;
            fs::write(dir.join("codes.csv"), report.codes_csv())?;
            fs::write(dir.join("stats.json"), report.stats_json())?;
        }
        None => {
            println!("{}", report.transitions.to_csv());
            println!("{}", report.codes_csv());
            println!("{}", report.stats_json());
        }
    }
    Ok(())
}

fn run_replay(from: String, session: String, to: Option<String>, job_timeout: u64) -> AnyResult<()> {
    let source = ApiClient::new(from.clone());
    let target = ApiClient::new(to.unwrap_or(from));
    let config = config_of(&source.session(&session)?);
    let events = parse_ndjson(&source.events(&session)?)?;
    let sid = replay(&target, &config, &events, Duration::from_secs(job_timeout))?;
    println!("replayed {} events into session {sid}", events.len());
    compare_sessions((&source, &session), (&target, &sid))?;
    println!("replayed session matches the original");
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&cli.log_level).unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Serve {
            listen,
            data_dir,
            backend,
            backend_url,
            batch_count,
            resolution,
            blur_sigma,
            job_timeout,
            no_fsync,
        } => {
            let backend: Arc<dyn Backend> = match (backend, backend_url) {
                (BackendKind::Http, Some(url)) => Arc::new(HttpBackend::new(url, Duration::from_secs(60))),
                _ => Arc::new(MockBackend::new()),
            };
            let config = ServiceConfig {
                data_dir,
                batch_count,
                resolution,
                blur_sigma: match blur_sigma {
                    Sigma::Auto => None,
                    Sigma::Px(v) => Some(v),
                },
                sync: if no_fsync { SyncPolicy::Never } else { SyncPolicy::Always },
                job_timeout: Duration::from_secs(job_timeout),
            };
            match Service::open(config, backend) {
                Ok(svc) => runtime().block_on(serve(routes::router(svc), listen)),
                Err(e) => Err(e.into()),
            }
        }
        Command::MockBackend { listen } => {
            runtime().block_on(serve(backend_server::router(Arc::new(MockBackend::new())), listen))
        }
        Command::Analyze { events, kinds, no_collapse, lexicon, out } => run_analyze(events, kinds, no_collapse, lexicon, out),
        Command::Replay { from, session, to, job_timeout } => run_replay(from, session, to, job_timeout),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime")
}
