use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use correspondence::experiment::{run, ExperimentKind, ExperimentSpec};

#[derive(Parser)]
#[command(name = "correspondence", version, about = "Landau surfaces, packet fall-off and classical correspondence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Report base name; defaults to the subcommand.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra option, repeatable: --set key=value
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify an external configuration against a diagram catalog.
    Analyze {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        k: PathBuf,
        #[arg(long)]
        catalog: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample points of the singularity surface.
    ScanSurface {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the decay of a packet along a spacetime ray.
    Falloff {
        #[arg(long)]
        packet: PathBuf,
        #[arg(long, default_value = "1,0,0,0", allow_hyphen_values = true)]
        u: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        tau_min: f64,
        #[arg(long, default_value_t = 150.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 24)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Reduced-transform experiments.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = ["roundtrip", "split", "cone"], default_value = "roundtrip")]
        experiment: String,
        #[command(flatten)]
        common: Common,
    },
    /// Compare classical region probabilities with quantum fall-off.
    McCompare {
        #[arg(long)]
        packet: PathBuf,
        #[arg(long)]
        diagram: Option<PathBuf>,
        /// tau_min,tau_max,points
        #[arg(long, default_value = "10,150,16")]
        tau_grid: String,
        #[arg(long, default_value = "1,0,0,0", allow_hyphen_values = true)]
        u: String,
        #[command(flatten)]
        common: Common,
    },
    /// Degree of singularity from line and vertex counts.
    Degree {
        #[arg(long)]
        nl: u32,
        #[arg(long)]
        nv: u32,
        #[command(flatten)]
        common: Common,
    },
}

fn spec(kind: ExperimentKind, common: Common) -> Result<ExperimentSpec, String> {
    let mut s = ExperimentSpec::new(common.name.as_deref().unwrap_or(&kind.to_string()), kind);
    s.out_dir = common.out;
    s.seed = common.seed;
    for kv in common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects key=value, got {kv:?}"))?;
        s.options.insert(k.trim().into(), v.trim().into());
    }
    Ok(s)
}

fn build(cmd: Command) -> Result<ExperimentSpec, String> {
    Ok(match cmd {
        Command::Analyze { diagram, k, catalog, common } => {
            let mut s = spec(ExperimentKind::Analyze, common)?.input("diagram", diagram).input("k", k);
            for c in catalog {
                s = s.input("catalog", c);
            }
            s
        }
        Command::ScanSurface { diagram, count, common } => {
            spec(ExperimentKind::ScanSurface, common)?.input("diagram", diagram).option("count", count)
        }
        Command::Falloff { packet, u, gamma, tau_min, tau_max, points, common } => {
            let mut s = spec(ExperimentKind::Falloff, common)?
                .input("packet", packet)
                .option("u", u)
                .option("tau_min", tau_min)
                .option("tau_max", tau_max)
                .option("points", points);
            if let Some(g) = gamma {
                s = s.option("gamma", g);
            }
            s
        }
        Command::Transform { model, experiment, common } => {
            spec(ExperimentKind::Transform, common)?.input("model", model).option("experiment", experiment)
        }
        Command::McCompare { packet, diagram, tau_grid, u, common } => {
            let parts: Vec<&str> = tau_grid.split(',').map(str::trim).collect();
            let [a, b, n] = parts.as_slice() else {
                return Err(format!("--tau-grid expects tau_min,tau_max,points, got {tau_grid:?}"));
            };
            let mut s = spec(ExperimentKind::McCompare, common)?
                .input("packet", packet)
                .option("u", u)
                .option("tau_min", a)
                .option("tau_max", b)
                .option("points", n);
            if let Some(d) = diagram {
                s = s.input("diagram", d);
            }
            s
        }
        Command::Degree { nl, nv, common } => spec(ExperimentKind::Degree, common)?.option("nl", nl).option("nv", nv),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let s = match build(cli.command) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&s) {
        Ok(out) => {
            println!("{}", out.report_path.display());
            println!("{}", out.csv_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
