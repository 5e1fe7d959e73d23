use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nce_lbm::harness::{self, config, DiffusionCheck, ExperimentConfig, Method, Preset};
use nce_lbm::Result;

#[derive(Parser)]
#[command(name = "nce-lbm", version, about = "Lattice Boltzmann lifting operators and error tables")]
struct Cli {
    /// Flat `key = value` experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["2", "4"])]
    stencil_order: Option<String>,
    /// `all` or `subset:i,j,...`
    #[arg(long, global = true)]
    sampling: Option<String>,
    #[arg(long, global = true, value_parser = ["raw", "scaled"])]
    norm: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the reference distribution dump.
    Reference {
        #[arg(long, default_value = "exp1")]
        preset: String,
    },
    /// Train coefficients on the restricted reference, lift, and dump the field.
    Lift {
        #[arg(long, default_value = "exp1")]
        preset: String,
        #[arg(long, default_value_t = 2)]
        basis_order: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Also write the coefficient CSV here.
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Run a table of lifting errors.
    Table {
        #[arg(long, default_value = "exp1")]
        preset: String,
    },
    /// Compare the sine-mode decay of the density-only model with its diffusion coefficient.
    DiffusionCheck {
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_config(cli: &Cli, preset: &str) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::preset(preset.parse::<Preset>()?),
    };
    if let Some(order) = &cli.stencil_order {
        cfg.stencil_order = order.parse().expect("validated by clap");
    }
    if let Some(sampling) = &cli.sampling {
        cfg.sampling = config::parse_sampling(sampling)?;
    }
    if let Some(norm) = &cli.norm {
        cfg.norm = config::parse_norm(norm)?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Reference { preset } => {
            let cfg = load_config(cli, preset)?;
            let (_, fc) = harness::make_reference(&cfg)?;
            let mut w = output(out)?;
            fc.write_csv(&mut w)?;
            w.flush()?;
            Ok(true)
        }
        Command::Lift { preset, basis_order, m, coefficients } => {
            let cfg = load_config(cli, preset)?;
            if cfg.method == Method::FullStateCr {
                return Err(nce_lbm::Error::Config("`lift` trains expansion coefficients; use an NCE preset".into()));
            }
            let (model, fc) = harness::make_reference(&cfg)?;
            let targets = harness::restrict(&fc, &model);
            let trained = harness::train_and_lift(&cfg, &model, &targets, *basis_order, *m)?;
            for (velocity, error) in harness::lifting_errors(&trained.lifted, &fc, cfg.norm)? {
                eprintln!("error[{velocity}] = {error:.6e}");
            }
            eprintln!(
                "newton: {} iterations, residual {:.3e}, cond {:.3e}",
                trained.report.iterations,
                trained.report.residual,
                trained.report.cond.unwrap_or(f64::NAN)
            );
            if let Some(path) = coefficients {
                let mut w = BufWriter::new(File::create(path)?);
                trained.coefficients.write_csv(&trained.basis, &mut w)?;
                w.flush()?;
            }
            let mut w = output(out)?;
            trained.lifted.write_csv(&mut w)?;
            w.flush()?;
            Ok(trained.report.converged)
        }
        Command::Table { preset } => {
            let cfg = load_config(cli, preset)?;
            let report = harness::run_table(&cfg)?;
            let mut w = output(out)?;
            report.write_csv(&mut w)?;
            w.flush()?;
            for row in &report.rows {
                let m = row.m.map(|m| m.to_string()).unwrap_or_default();
                match (&row.failure, &row.newton) {
                    (Some(failure), _) => eprintln!("{} m={m}: failed: {failure}", row.basis),
                    (None, Some(r)) => eprintln!("{} m={m}: jacobian {}x{}", row.basis, r.unknowns, r.unknowns),
                    _ => {}
                }
            }
            Ok(report.all_converged())
        }
        Command::DiffusionCheck { steps } => {
            let check = DiffusionCheck { steps: *steps, ..DiffusionCheck::default() };
            let r = check.run()?;
            let mut w = output(out)?;
            writeln!(w, "predicted_d,fitted_d,relative_error,within_2pct")?;
            writeln!(w, "{:.16e},{:.16e},{:.16e},{}", r.predicted_d, r.fitted_d, r.relative_error, r.within(0.02))?;
            w.flush()?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
