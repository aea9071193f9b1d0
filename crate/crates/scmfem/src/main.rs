use clap::{Parser, Subcommand};
use scmfem::experiments::{
    emit_csv, corner_case, run_convergence, smooth_case, zero_case, Case, ConvergenceRow, Method,
    RunConfig, CSV_HEADER,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "scmfem",
    about = "Convergence studies for the Poisson equation with L2 Dirichlet data on a domain with one reentrant corner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one convergence study and stream its rows as CSV.
    Run {
        /// Opening angle of the domain in degrees, e.g. 270.
        #[arg(long)]
        omega_deg: f64,
        /// Number of refinement levels (default 6, or 7 under --full).
        #[arg(long)]
        levels: Option<u32>,
        /// scm (corrected) or standard (plain Galerkin).
        #[arg(long, default_value = "scm")]
        method: Method,
        /// Grading strength of the boundary quadrature; default 2*pi/omega - 1.
        #[arg(long)]
        mu: Option<f64>,
        /// Radius around the corner where the boundary rule is graded.
        #[arg(long, default_value_t = 0.1)]
        grading_radius: f64,
        /// Relative residual target of the conjugate gradient solver.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Test case: corner, smooth, or zero.
        #[arg(long, default_value = "corner")]
        case: String,
        /// Also write the full CSV to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the deepest refinement level as well.
        #[arg(long)]
        full: bool,
        /// Square the coefficient normalization (alternative form, kept for comparison).
        #[arg(long)]
        alpha_denominator_squared: bool,
        /// Dump each level's mesh as text into this directory.
        #[arg(long)]
        mesh_dump: Option<PathBuf>,
    },
    /// Run both reference angles (270 and 355 degrees) and print the
    /// convergence table.
    Table1 {
        /// Run the deepest refinement level as well.
        #[arg(long)]
        full: bool,
    },
}

fn build_case(name: &str, omega: f64) -> Result<Case, scmfem::Error> {
    match name {
        "corner" => corner_case(omega),
        "smooth" => Ok(smooth_case()),
        "zero" => Ok(zero_case()),
        other => Err(scmfem::Error::InvalidConfig(format!(
            "unknown case '{other}' (expected corner, smooth, or zero)"
        ))),
    }
}

fn print_table(omega_deg: f64, rows: &[ConvergenceRow]) {
    println!("omega = {omega_deg} degrees");
    println!("{:>10}  {:>10}  {:>8}", "h", "e_h", "eoc");
    for r in rows {
        let eoc = r
            .eoc
            .map(|v| format!("{v:.5}"))
            .unwrap_or_else(|| "-".into());
        println!("{:>10.5}  {:>10.5}  {:>8}", r.h_nominal, r.error_l2, eoc);
    }
    println!();
}

fn run(cli: Cli) -> Result<ExitCode, scmfem::Error> {
    match cli.command {
        Command::Run {
            omega_deg,
            levels,
            method,
            mu,
            grading_radius,
            tol,
            case,
            out,
            full,
            alpha_denominator_squared,
            mesh_dump,
        } => {
            let omega = omega_deg.to_radians();
            let config = RunConfig {
                levels: levels.unwrap_or(if full { 7 } else { 6 }),
                mu,
                grading_radius,
                tol,
                alpha_denominator_squared,
                mesh_dump,
                ..RunConfig::new(omega, method, build_case(&case, omega)?)
            };
            println!("{CSV_HEADER}");
            let outcome = run_convergence(&config, &mut |row| {
                let text = emit_csv(std::slice::from_ref(row));
                print!("{}", text.lines().nth(1).map(|l| format!("{l}\n")).unwrap_or_default());
            })?;
            if let Some(path) = out {
                std::fs::write(path, emit_csv(&outcome.rows))?;
            }
            for (level, err) in &outcome.failures {
                eprintln!("level {level} failed: {err}");
            }
            Ok(if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Table1 { full } => {
            let mut failed = false;
            for omega_deg in [270.0, 355.0] {
                let omega = f64::to_radians(omega_deg);
                let config = RunConfig {
                    levels: if full { 7 } else { 6 },
                    ..RunConfig::new(omega, Method::Scm, corner_case(omega)?)
                };
                let outcome = run_convergence(&config, &mut |_| {})?;
                print_table(omega_deg, &outcome.rows);
                failed |= !outcome.failures.is_empty();
            }
            Ok(if failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
