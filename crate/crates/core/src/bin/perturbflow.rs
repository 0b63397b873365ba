use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use perturbflow::dataset::{NoiseScale, SplitMode, WaterProperty};
use perturbflow::experiment::{self, exit_code, DataSource, RunConfig};
use perturbflow::{AdjointMode, Error};

#[derive(Parser)]
#[command(name = "perturbflow", version, about = "Perturbation solution of weakly-controlled gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the algorithm once and write manifest.json, result.csv, trajectory.csv.
    Run(RunArgs),
    /// Replay the config stored in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long, env = "PERTURBFLOW_OUTPUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// All three water properties at 1% and 5% noise.
    ReproduceTables {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated seeds; each entry then reports mean ± std.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Loss along the zeroth-order flow at noise levels 0, 1% and 5%.
    LossCurves(RunArgs),
    /// Residual of the first-order cost expansion across epsilon values.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "eps", value_delimiter = ',', default_values_t = experiment::DEFAULT_SWEEP)]
        eps: Vec<f64>,
    },
    /// Write the built-in table for one property as CSV.
    ExportWater {
        #[arg(long, value_enum, default_value = "density")]
        property: PropertyArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Density,
    SpecificHeat,
    Conductivity,
}

impl From<PropertyArg> for WaterProperty {
    fn from(p: PropertyArg) -> Self {
        match p {
            PropertyArg::Density => WaterProperty::Density,
            PropertyArg::SpecificHeat => WaterProperty::SpecificHeat,
            PropertyArg::Conductivity => WaterProperty::Conductivity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AdjointArg {
    Corrected,
    PaperLiteral,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "PERTURBFLOW_OUTPUT_DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    property: Option<PropertyArg>,
    /// CSV source; requires --x-column and --y-column.
    #[arg(long, requires_all = ["x_column", "y_column"])]
    csv: Option<PathBuf>,
    #[arg(long)]
    x_column: Option<String>,
    #[arg(long)]
    y_column: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    m1: Option<usize>,
    #[arg(long)]
    m2: Option<usize>,
    #[arg(long)]
    with_replacement: bool,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    noise_level: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Interpret the noise level as a fraction of the standard deviation.
    #[arg(long)]
    noise_std_scale: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon_max: Option<f64>,
    #[arg(long)]
    final_time: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    u_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    u_max: Option<f64>,
    #[arg(long)]
    tie_tol: Option<f64>,
    /// Initial raw coefficients, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta0: Option<Vec<f64>>,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, value_enum)]
    adjoint: Option<AdjointArg>,
    /// Shorthand for --adjoint paper-literal.
    #[arg(long)]
    paper_literal_adjoint: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.property {
            c.source = DataSource::Builtin(p.into());
        }
        if let (Some(path), Some(x), Some(y)) = (&self.csv, &self.x_column, &self.y_column) {
            c.source = DataSource::Csv { path: path.clone(), x_column: x.clone(), y_column: y.clone() };
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { c.$field = v; } )* };
        }
        set!(degree, m1, m2, split_seed, noise_level, noise_seed, epsilon, epsilon_max, final_time, n_steps, u_min, u_max, tie_tol);
        if self.theta0.is_some() {
            c.theta0 = self.theta0.clone();
        }
        if self.with_replacement {
            c.split_mode = SplitMode::WithReplacement;
        }
        if self.noise_std_scale {
            c.noise_scale = NoiseScale::StdDev;
        }
        if self.no_standardize {
            c.standardize = false;
        }
        match (self.adjoint, self.paper_literal_adjoint) {
            (Some(AdjointArg::PaperLiteral), _) | (_, true) => c.adjoint = AdjointMode::PaperLiteral,
            (Some(AdjointArg::Corrected), false) => c.adjoint = AdjointMode::Corrected,
            (None, false) => {}
        }
        c.output_dir = Some(self.out.clone());
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run(args) => {
            let config = args.config()?;
            let out = experiment::cmd_run(&config, &args.out)?;
            let r = &out.report;
            println!("{} theta* = {:?}  residual std = {}", r.model, r.theta, r.residual_std);
            println!("wrote {}", args.out.display());
            for note in &out.manifest.diagnostics.notes {
                eprintln!("note: {note}");
            }
            Ok(exit_code::SUCCESS)
        }
        Command::Rerun { manifest, out } => {
            experiment::cmd_rerun(&manifest, &out)?;
            println!("wrote {}", out.display());
            Ok(exit_code::SUCCESS)
        }
        Command::ReproduceTables { run, seeds } => {
            let config = run.config()?;
            let report = experiment::cmd_reproduce_tables(&config, &seeds, &run.out)?;
            print!("{}", report.render());
            Ok(exit_code::SUCCESS)
        }
        Command::LossCurves(args) => {
            let config = args.config()?;
            let rows = experiment::cmd_loss_curves(&config, &args.out)?;
            println!("wrote {} rows to {}", rows.len(), args.out.join("loss_curves.csv").display());
            Ok(exit_code::SUCCESS)
        }
        Command::Sweep { run, eps } => {
            let config = run.config()?;
            let report = experiment::cmd_sweep(&config, &eps, &run.out)?;
            for p in &report.sweep.points {
                println!("eps = {:<8e} residual = {:e}", p.epsilon, p.residual);
            }
            println!("{}", report.note);
            Ok(report.exit_code())
        }
        Command::ExportWater { property, out } => {
            experiment::export_builtin(property.into(), &out)?;
            Ok(exit_code::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code_for(&e))
        }
    }
}
