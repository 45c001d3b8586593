mod plot;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use playlearn_core::engine::{compile, run, scenario_ticks, synth_demo, DEFAULT_HZ};
use playlearn_core::learn::{imitation_loss, rotate_guards, LearnReport};
use playlearn_core::{
    format_script, learn, parse_script, validate, CheckedScript, Dataset, LearnerConfig,
    PrimitiveRegistry, Scenario, Simulator,
};
use playlearn_session::{preset, ServerConfig};

#[derive(Parser)]
#[command(
    name = "playlearn",
    version,
    about = "Reactive scripts: run them, learn them from demonstrations"
)]
struct Cli {
    /// Primitive registry: `pepper`, `grasping` or a TOML file.
    #[arg(
        long,
        global = true,
        env = "PLAYLEARN_REGISTRY",
        default_value = "pepper"
    )]
    registry: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a script in canonical form.
    Fmt {
        file: PathBuf,
        /// Fail instead of printing when the file is not canonical.
        #[arg(long)]
        check: bool,
        /// Rewrite the file in place.
        #[arg(long, short, conflicts_with = "check")]
        write: bool,
    },
    /// Parse and validate a script against the registry.
    Check { file: PathBuf },
    /// Record a demonstration by running a script in the simulator.
    SynthDemo {
        #[arg(long)]
        script: PathBuf,
        /// Preset name (corridor, pass_by, leave_return) or scenario TOML.
        #[arg(long, default_value = "corridor")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_HZ)]
        hz: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Learn a script from a demonstration.
    Learn {
        #[arg(long)]
        data: PathBuf,
        /// Learner TOML; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
        /// Where to write the JSON report (bands, trees, config).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a script in closed loop and write the trace.
    Run {
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value = "corridor")]
        scenario: String,
        /// Defaults to the length of the visitor trajectory.
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_HZ)]
        hz: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Mean squared one-step imitation error of a script on a dataset.
    Loss {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value = "corridor")]
        scenario: String,
        /// Also report the loss with the distance guards rotated.
        #[arg(long)]
        ablation: bool,
    },
    /// Host live sessions over WebSocket.
    Serve {
        #[arg(long, default_value = "corridor")]
        scenario: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = ".")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_HZ)]
        hz: f64,
        #[arg(long, default_value_t = 20.0)]
        stream_hz: f64,
    },
    /// Draw the activation bands of a learn report as SVG.
    ReportPlot {
        #[arg(long)]
        report: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn registry(spec: &str) -> Result<PrimitiveRegistry> {
    Ok(match spec {
        "pepper" => PrimitiveRegistry::pepper(),
        "grasping" => PrimitiveRegistry::grasping(),
        path => PrimitiveRegistry::from_path(Path::new(path))
            .with_context(|| format!("registry {path}"))?,
    })
}

fn scenario(spec: &str) -> Result<Scenario> {
    match preset(spec) {
        Some(s) => Ok(s),
        None => Scenario::from_path(Path::new(spec)).with_context(|| format!("scenario {spec}")),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_script(path: &Path, reg: &PrimitiveRegistry) -> Result<CheckedScript> {
    let text = read(path)?;
    let name = path.display();
    let ast = parse_script(&text).map_err(|e| anyhow::anyhow!("{name}: {e}"))?;
    validate(&ast, reg).map_err(|e| anyhow::anyhow!("{name}: {e}"))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_jsonl_str(&read(path)?).with_context(|| format!("dataset {}", path.display()))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fmt {
            file,
            check,
            write: in_place,
        } => {
            let text = read(&file)?;
            let ast =
                parse_script(&text).map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?;
            let out = format_script(&ast);
            if check {
                if out != text {
                    eprintln!("{} is not canonical", file.display());
                    return Ok(ExitCode::FAILURE);
                }
            } else if in_place {
                write(&file, &out)?;
            } else {
                print!("{out}");
            }
        }
        Command::Check { file } => {
            let reg = registry(&cli.registry)?;
            let checked = load_script(&file, &reg)?;
            let tree = compile(&checked);
            println!(
                "{}: ok ({} statements, {} leaves, {} branches)",
                file.display(),
                checked.ast.statements.len(),
                tree.leaves.len(),
                tree.invocations.len()
            );
        }
        Command::SynthDemo {
            script,
            scenario: sc,
            seed,
            hz,
            output,
        } => {
            let reg = registry(&cli.registry)?;
            let checked = load_script(&script, &reg)?;
            let ds = synth_demo(&checked, &scenario(&sc)?, seed, hz)?;
            write(&output, &ds.to_jsonl())?;
            eprintln!("{} samples at {hz} Hz -> {}", ds.len(), output.display());
        }
        Command::Learn {
            data,
            config,
            delta,
            sigma,
            output,
            report,
        } => {
            let reg = registry(&cli.registry)?;
            let mut cfg = match &config {
                Some(p) => LearnerConfig::from_path(p)
                    .with_context(|| format!("config {}", p.display()))?,
                None => LearnerConfig::default(),
            };
            if let Some(d) = delta {
                cfg.delta = d;
            }
            if let Some(s) = sigma {
                cfg.sigma = s;
            }
            let ds = load_dataset(&data)?;
            let out = learn(&ds, &reg, &cfg)?;
            write(&output, &out.text)?;
            if let Some(r) = report {
                write(&r, &out.report.to_json())?;
            }
            eprintln!(
                "{} groups, {} ungrouped leaves -> {}",
                out.report.tree.groups.len(),
                out.report.tree.ungrouped.len(),
                output.display()
            );
        }
        Command::Run {
            script,
            scenario: sc,
            ticks,
            seed,
            hz,
            output,
        } => {
            let reg = registry(&cli.registry)?;
            let sc = scenario(&sc)?;
            let tree = compile(&load_script(&script, &reg)?).with_limits(sc.limits);
            let ticks = ticks.unwrap_or_else(|| scenario_ticks(&sc, hz));
            let mut sim = match seed {
                Some(s) => Simulator::with_seed(sc, s, hz)?,
                None => Simulator::new(sc, hz)?,
            };
            let trace = run(&tree, &mut sim, ticks);
            let file = fs::File::create(&output)
                .with_context(|| format!("writing {}", output.display()))?;
            let mut w = BufWriter::new(file);
            trace.write_jsonl(&tree, &mut w)?;
            w.flush()?;
            eprintln!("{} ticks -> {}", trace.len(), output.display());
        }
        Command::Loss {
            data,
            script,
            scenario: sc,
            ablation,
        } => {
            let reg = registry(&cli.registry)?;
            let sc = scenario(&sc)?;
            let ds = load_dataset(&data)?;
            let checked = load_script(&script, &reg)?;
            println!("loss {:e}", imitation_loss(&ds, &checked, &sc)?);
            if ablation {
                let rotated = validate(&rotate_guards(&checked.ast), &reg)?;
                println!("ablation {:e}", imitation_loss(&ds, &rotated, &sc)?);
            }
        }
        Command::Serve {
            scenario: sc,
            port,
            host,
            data_dir,
            hz,
            stream_hz,
        } => {
            if hz <= 0.0 || stream_hz <= 0.0 {
                bail!("rates must be positive");
            }
            let mut config = ServerConfig::new(scenario(&sc)?, data_dir);
            config.hz = hz;
            config.stream_hz = stream_hz;
            config.registry = registry(&cli.registry)?;
            tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
                .init();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on ws://{}/ws", listener.local_addr()?);
                playlearn_session::serve(listener, config).await
            })?;
        }
        Command::ReportPlot { report, output } => {
            let r = LearnReport::from_json(&read(&report)?)
                .with_context(|| format!("report {}", report.display()))?;
            write(&output, &plot::bands_svg(&r))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
