use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use porous_opt::error::{Error, Result};
use porous_opt_cli::commands::{exit_code, mesh_info, status_name, verify, Session, Suite, EXIT_CONFIG, EXIT_OK};
use porous_opt_cli::config::{parse_config, RunSpec};
use porous_opt_cli::output::{write_status, Provenance, Status, Writer};

#[derive(Debug, Parser)]
#[command(
    name = "porous-opt",
    version,
    about = "Optimal control of two-phase flow in porous media"
)]
struct Cli {
    /// TOML run specification; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write VTK snapshots every K fine steps (overrides `output.save_every`).
    #[arg(long, global = true, value_name = "K")]
    save_every: Option<usize>,
    /// Assembly threads (overrides `output.threads`; 0 uses all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Write the initial Darcy blocks and saturation mass matrix here.
    #[arg(long, global = true, value_name = "DIR")]
    dump_matrices: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print mesh counts and size measures.
    MeshInfo,
    /// Run the state sweep.
    Forward {
        /// Control CSV (a `q` column or one value per line).
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Run the state and costate sweeps and the reduced gradient.
    Adjoint {
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Run the active-set loop.
    Optimize {
        /// Initial control CSV.
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Unstructured mesh (base path) added to the operator suite.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Print the default or the resolved configuration.
    Config {
        #[arg(long, conflicts_with = "resolve")]
        show_defaults: bool,
        #[arg(long)]
        resolve: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::MeshInfo => "mesh-info",
            Command::Forward { .. } => "forward",
            Command::Adjoint { .. } => "adjoint",
            Command::Optimize { .. } => "optimize",
            Command::Verify { .. } => "verify",
            Command::Config { .. } => "config",
        }
    }
}

fn load_spec(cli: &Cli) -> Result<RunSpec> {
    let mut spec = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunSpec::default(),
    };
    if let Some(out) = &cli.out {
        spec.output.dir = out.clone();
    }
    if let Some(k) = cli.save_every {
        spec.output.save_every = k;
    }
    if let Some(n) = cli.threads {
        spec.output.threads = n;
    }
    Ok(spec)
}

fn init_logging(spec: &RunSpec) {
    let env = env_logger::Env::new().filter_or("POROUS_OPT_LOG", spec.output.verbosity.as_str());
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn init_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("output.threads: {e}")))
}

fn run(cli: &Cli, spec: &RunSpec) -> Result<(i32, Option<Provenance>)> {
    let out = &spec.output.dir;
    match &cli.command {
        Command::MeshInfo => {
            print!("{}", mesh_info(spec)?);
            Ok((EXIT_OK, None))
        }
        Command::Config { show_defaults, resolve } => {
            if *show_defaults || !*resolve {
                print!("{}", RunSpec::default().to_toml());
            } else {
                print!("{}", spec.to_toml());
            }
            Ok((EXIT_OK, None))
        }
        Command::Verify { suite, mesh } => {
            let mesh = mesh.clone().or_else(|| spec.mesh.file.clone());
            let writer = Writer::new(out, Provenance::new(&spec.numerical_fingerprint(), &spec.mesh.load()?))?;
            let code = verify(*suite, &writer, mesh.as_deref())?;
            Ok((code, Some(writer.provenance)))
        }
        Command::Forward { control } | Command::Adjoint { control } | Command::Optimize { control } => {
            let session = Session::new(spec.clone(), out)?;
            if let Some(dir) = &cli.dump_matrices {
                session.dump_matrices(dir)?;
            }
            let control = control.as_deref();
            let code = match &cli.command {
                Command::Forward { .. } => session.forward(control)?,
                Command::Adjoint { .. } => session.adjoint(control)?,
                _ => session.optimize(control)?,
            };
            Ok((code, Some(session.writer.provenance)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name().to_string();
    let spec = match load_spec(&cli) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            let dir = cli.out.clone().unwrap_or_else(|| RunSpec::default().output.dir);
            let _ = write_status(
                &dir,
                &Status {
                    command,
                    status: status_name(EXIT_CONFIG),
                    exit_code: EXIT_CONFIG,
                    message: Some(e.to_string()),
                    provenance: None,
                },
            );
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    init_logging(&spec);
    let writes_status = !matches!(cli.command, Command::MeshInfo | Command::Config { .. });
    let result = init_threads(spec.output.threads).and_then(|_| run(&cli, &spec));
    let (code, message, provenance) = match result {
        Ok((code, provenance)) => (code, None, provenance),
        Err(e) => {
            eprintln!("error: {e}");
            (exit_code(&e), Some(e.to_string()), None)
        }
    };
    if writes_status || code != EXIT_OK {
        let status = Status {
            command,
            status: status_name(code),
            exit_code: code,
            message,
            provenance,
        };
        if let Err(e) = write_status(&spec.output.dir, &status) {
            eprintln!("error: cannot write status file: {e}");
        }
    }
    ExitCode::from(code as u8)
}
