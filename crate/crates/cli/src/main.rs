//! `rasterkit`: validate, render, augment, curate and align-demo, run
//! against an embedded service on a loopback port or a remote one via
//! `--server`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rasterkit_api::{
    AlignDemoRequest, AugmentRequest, CurateRequest, ErrorBody, ErrorResponse, LogSource, RenderRequest, ValidateRequest,
};
use rasterkit_client::Client;
use rasterkit_core::align::{trace_csv, DemoConfig};
use rasterkit_core::io::RunConfig;
use rasterkit_core::raster::ImageFormat;
use serde::de::DeserializeOwned;

#[derive(Debug, Parser)]
#[command(name = "rasterkit", version, about = "Semantic scene rasterizer and augmentation pipeline")]
struct Cli {
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Settings file (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for batch rendering.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use a running service instead of an embedded one.
    #[arg(long, global = true, env = "RASTERKIT_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Ppm,
    Png,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load logs and check every invariant.
    Validate {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Render one frame.
    Render {
        log: PathBuf,
        /// Frame time in seconds.
        #[arg(long)]
        t: f64,
        /// Carrier agent; the ego by default.
        #[arg(long)]
        agent: Option<String>,
        /// Camera name; the log's first camera by default
        #[arg(long)]
        camera: Option<String>,
        /// Image format; taken from the `--out` extension when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Build and render the augmented dataset.
    Augment {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Report which clips pass the ADE filter.
    Curate {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// ADE threshold in meters; the config's value by default.
        #[arg(long)]
        threshold: Option<f64>,
        /// Restrict to these agents.
        #[arg(long = "agent")]
        agents: Vec<String>,
    },
    /// Train the feature-alignment demo and its baseline.
    AlignDemo {
        /// Training steps; overrides the config
        #[arg(long)]
        steps: Option<usize>,
        /// Skip the no-alignment baseline.
        #[arg(long)]
        no_baseline: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug)]
struct Failure(ErrorBody);

impl From<rasterkit_core::Error> for Failure {
    fn from(e: rasterkit_core::Error) -> Self {
        Failure(ErrorBody::from_core(&e))
    }
}

impl From<rasterkit_client::ClientError> for Failure {
    fn from(e: rasterkit_client::ClientError) -> Self {
        Failure(e.body())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure(ErrorBody::new("io", format!("{}: {e}", path.display())).with_source(path.display().to_string()))
}

fn read_log(path: &Path) -> Result<LogSource, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(LogSource {
        name: path.display().to_string(),
        text,
    })
}

fn load_settings<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| e.to_string()),
        _ => serde_json::from_str(&text).map_err(|e| e.to_string()),
    };
    parsed.map_err(|m| Failure(ErrorBody::new("config", m).with_source(path.display().to_string())))
}

fn run_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure(ErrorBody::from_core(&e).with_source(p.display().to_string())))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    // The service may run elsewhere; resolve against our working directory.
    cfg.out = std::path::absolute(&cfg.out).map_err(|e| io_failure(&cfg.out, e))?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("output serializes"));
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

async fn connect(cli: &Cli) -> Result<Client, Failure> {
    match &cli.server {
        Some(url) => Ok(Client::new(url.clone())),
        None => {
            let addr = rasterkit_service::spawn(([127, 0, 0, 1], 0).into())
                .await
                .map_err(|e| Failure(ErrorBody::new("io", format!("embedded service: {e}"))))?;
            Ok(Client::new(format!("http://{addr}")))
        }
    }
}

async fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Serve { addr } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Failure(ErrorBody::new("io", e.to_string())))?;
            eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Failure(ErrorBody::new("io", e.to_string())))?);
            rasterkit_service::serve(listener).await.map_err(|e| Failure(ErrorBody::new("io", e.to_string())))
        }
        Command::Validate { logs } => {
            let logs = logs.iter().map(|p| read_log(p)).collect::<Result<_, _>>()?;
            let client = connect(&cli).await?;
            print_json(&client.validate(&ValidateRequest { logs }).await?);
            Ok(())
        }
        Command::Render {
            log,
            t,
            agent,
            camera,
            format,
        } => {
            let Some(out) = cli.out.clone() else {
                return Err(Failure(ErrorBody::new("usage", "render needs --out FILE")));
            };
            let cfg = run_config(&cli)?;
            let format = match format {
                Some(Format::Png) => ImageFormat::Png,
                Some(Format::Ppm) => ImageFormat::Ppm,
                None if out.extension().is_some_and(|e| e == "png") => ImageFormat::Png,
                None => ImageFormat::Ppm,
            };
            let req = RenderRequest {
                log: read_log(log)?,
                t: *t,
                agent: agent.clone(),
                camera: camera.clone(),
                render: cfg.render,
                format,
            };
            let client = connect(&cli).await?;
            let bytes = client.render(&req).await?;
            write_file(&out, &bytes)?;
            print_json(&serde_json::json!({ "out": out, "bytes": bytes.len() }));
            Ok(())
        }
        Command::Augment { logs } => {
            let config = run_config(&cli)?;
            let logs = logs.iter().map(|p| read_log(p)).collect::<Result<_, _>>()?;
            let client = connect(&cli).await?;
            print_json(&client.augment(&AugmentRequest { logs, config }).await?);
            Ok(())
        }
        Command::Curate { logs, threshold, agents } => {
            let cfg = run_config(&cli)?;
            let req = CurateRequest {
                logs: logs.iter().map(|p| read_log(p)).collect::<Result<_, _>>()?,
                clips: cfg.clips,
                threshold: threshold.unwrap_or(cfg.ade_threshold),
                agents: agents.clone(),
            };
            let client = connect(&cli).await?;
            let report = client.curate(&req).await?;
            match &cli.out {
                Some(path) => {
                    let text = serde_json::to_string_pretty(&report).expect("report serializes");
                    write_file(path, text.as_bytes())?;
                    print_json(&serde_json::json!({ "out": path, "total": report.total, "kept": report.kept }));
                }
                None => print_json(&report),
            }
            Ok(())
        }
        Command::AlignDemo { steps, no_baseline } => {
            let mut config: DemoConfig = load_settings(cli.config.as_deref())?;
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            if let Some(n) = steps {
                config.steps = *n;
            }
            config.validate()?;
            let client = connect(&cli).await?;
            let resp = client
                .align_demo(&AlignDemoRequest {
                    config,
                    baseline: !no_baseline,
                })
                .await?;
            if let Some(dir) = &cli.out {
                write_file(&dir.join("aligned_trace.csv"), trace_csv(&resp.aligned).as_bytes())?;
                if let Some(b) = &resp.baseline {
                    write_file(&dir.join("baseline_trace.csv"), trace_csv(b).as_bytes())?;
                }
                let text = serde_json::to_string_pretty(&resp).expect("report serializes");
                write_file(&dir.join("report.json"), text.as_bytes())?;
            }
            print_json(&resp.summary());
            Ok(())
        }
    }
}

fn fail(body: ErrorBody, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&ErrorResponse { error: body }).expect("error serializes"));
    ExitCode::from(code)
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(ErrorBody::new("usage", e.to_string().trim_end()), 2),
    };
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(body)) => fail(body, 1),
    }
}
