//! Command-line front end: run simulations, build meshes, check linear
//! stability, and compare finished runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bsdib_core::cli_io::{
    compare_run_directories, load_config, mode_name, parse_mode, render_comparison,
    render_stability, run_to_directory, CliError, MeshSpec,
};
use bsdib_core::kinetics;
use bsdib_core::mesh::{mesh_quality_report, write_mesh_file};
use bsdib_core::solver::steady_state_diagnostics;

#[derive(Parser)]
#[command(
    name = "bsdib",
    version,
    about = "Bulk-surface electrodeposition simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a config file into an output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `3d` couples bulk and surface; `2d` evolves the surface alone.
        #[arg(long, default_value = "3d")]
        mode: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump the assembled operators in coordinate text form.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Build a mesh from a one-line spec and write it as a mesh file.
    Mesh {
        /// e.g. `graded:L=50,nx=32,fine_layers=2,coarse_levels=3` or
        /// `uniform:L=1,nx=4`.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the linear stability report for a parameter file.
    Stability {
        #[arg(long)]
        params: PathBuf,
    },
    /// Compare the final surface fields of two run directories.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            mode,
            out,
            dump_matrices,
        } => {
            let config = load_config(&config)?;
            let mode = parse_mode(&mode)?;
            println!(
                "preset {} mode {} mesh {}",
                config.preset_name.as_deref().unwrap_or("none"),
                mode_name(mode),
                config.mesh.describe()
            );
            let artifacts = run_to_directory(&config, mode, &out, dump_matrices)?;
            let result = &artifacts.result;
            let steady = steady_state_diagnostics(&result.increments);
            println!(
                "{} steps done in {:.1}s (assembly {:.1}s, factorization {:.1}s)",
                result.n_steps,
                result.stage_times.stepping,
                result.stage_times.assembly,
                result.stage_times.factorization
            );
            println!(
                "final eta increment {:.3e} (max {:.3e}{})",
                steady.final_increment,
                steady.max_increment,
                if result.growing_increments {
                    ", still growing"
                } else {
                    ""
                }
            );
            println!("surface fields: {}", artifacts.surface_csv.display());
            if let Some(vtk) = &artifacts.bulk_vtk {
                println!("bulk fields: {}", vtk.display());
            }
            println!("metadata: {}", artifacts.metadata.display());
            Ok(())
        }
        Command::Mesh { spec, out } => {
            let spec = MeshSpec::parse(&spec)?;
            let mesh = spec.build()?;
            let report = mesh_quality_report(&mesh);
            write_mesh_file(&mesh, &out)?;
            println!(
                "{} vertices, {} faces, {} cells ({} surface nodes, {} hanging)",
                report.n_vertices,
                report.n_faces,
                report.n_cells,
                report.n_gamma_vertices,
                report.n_hanging_vertices
            );
            println!(
                "cell volumes [{:.3e}, {:.3e}], max aspect {:.2}",
                report.min_cell_volume, report.max_cell_volume, report.max_cell_aspect
            );
            println!("written to {}", out.display());
            Ok(())
        }
        Command::Stability { params } => {
            let text = std::fs::read_to_string(&params).map_err(|source| CliError::Io {
                path: params.clone(),
                source,
            })?;
            let params = kinetics::parse_parameters(&text)?;
            let report = params.stability_check()?;
            print!("{}", render_stability(&report));
            Ok(())
        }
        Command::Compare { a, b } => {
            let cmp = compare_run_directories(&a, &b)?;
            print!(
                "{}",
                render_comparison(&cmp, &a.display().to_string(), &b.display().to_string())
            );
            Ok(())
        }
    }
}
