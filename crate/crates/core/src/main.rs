use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use darcy_core::bench::qualitative_checks;
use darcy_core::convergence::{measure_errors, ERROR_COLUMNS};
use darcy_core::export::{write_report_csv, write_svg_plot, write_vtk, VtkFields};
use darcy_core::gpp::GppParams;
use darcy_core::{builtin_problem, run_convergence, run_method, Degree, Error, Method, MethodOptions, StorageMode};

/// Darcy flow benchmarks: potential by Galerkin, velocity by stabilized
/// mixed methods or by post-processing.
#[derive(Parser)]
#[command(name = "darcy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem on one mesh.
    Run {
        #[command(flatten)]
        common: Common,
        /// Mesh as NXxNY; defaults to the problem's own mesh.
        #[arg(long, value_parser = parse_pair)]
        mesh: Option<(usize, usize)>,
    },
    /// Refinement study against the exact solution.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated meshes, each N (square) or NXxNY.
        #[arg(long, value_delimiter = ',', value_parser = parse_mesh)]
        meshes: Vec<(usize, usize)>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    problem: String,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    degree: u8,
    /// Macroelement block as MXxMY, for lpp and lpp_id.
    #[arg(long, value_parser = parse_pair, default_value = "2x2")]
    macros: (usize, usize),
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    delta1: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    delta2: f64,
    /// Output directory for VTK, CSV and SVG files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn options(&self) -> MethodOptions {
        MethodOptions { delta1: self.delta1, delta2: self.delta2, gpp: GppParams::default(), macros: self.macros }
    }

    fn degree(&self) -> Degree {
        if self.degree == 2 {
            Degree::Q2
        } else {
            Degree::Q1
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected AxB, got '{s}'"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{s}': {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_mesh(s: &str) -> Result<(usize, usize), String> {
    if s.contains(['x', 'X']) {
        parse_pair(s)
    } else {
        let n = s.trim().parse::<usize>().map_err(|e| format!("'{s}': {e}"))?;
        Ok((n, n))
    }
}

enum Failure {
    Solver(Error),
    Checks(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn run(common: &Common, mesh: Option<(usize, usize)>) -> Result<(), Failure> {
    let problem = builtin_problem(&common.problem)?;
    let (nx, ny) = mesh.unwrap_or(problem.default_mesh);
    let degree = common.degree();
    let result = run_method(&problem, common.method, degree, nx, ny, &common.options())?;
    println!("problem   {}", problem.name);
    println!("method    {}", common.method);
    println!("mesh      {nx}x{ny} Q{}  ({} nodes, {} elements)", degree.order(), result.mesh.node_count(), result.mesh.element_count());
    if !result.macros.is_empty() {
        let inner = result.macros.iter().filter(|m| m.has_interior_interface).count();
        println!("macros    {} ({} with an interior interface)", result.macros.len(), inner);
    }
    if problem.exact.is_some() {
        let row = measure_errors(&result)?;
        for (c, e) in ERROR_COLUMNS.iter().zip(row.errors()) {
            println!("{c:<9} {e:.6e}");
        }
        let exact = problem.exact()?;
        let values = result.element_velocities();
        let npe = degree.nodes_per_element();
        let worst = result.mesh.elements.iter().flat_map(|e| e.node_ids.iter().enumerate().map(move |(a, &n)| (e, a, n))).fold(0.0f64, |w, (e, a, n)| {
            let u = values[e.id * npe + a];
            let v = exact.velocity(e.subdomain, result.mesh.nodes[n].coords());
            w.max((u[0] - v[0]).abs()).max((u[1] - v[1]).abs())
        });
        println!("max_nodal_u_error {worst:.6e}");
    }
    let mut failed = Vec::new();
    for c in qualitative_checks(&result) {
        let verdict = match c.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        println!("check {} = {:.4}  {verdict}  {}", c.name, c.value, c.detail);
        if c.passed == Some(false) {
            failed.push(c.name.to_string());
        }
    }
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        let path = dir.join(format!("{}_{}_q{}_{nx}x{ny}.vtk", problem.name, common.method, degree.order()));
        let values = result.element_velocities();
        let duplicate = result.velocity.as_ref().is_none_or(|v| v.mode != StorageMode::C0Nodal);
        let fields = VtkFields { potential: Some(&result.potential), velocity: Some(&values), duplicate_points: duplicate };
        write_vtk(&path, &result.mesh, &format!("{} {}", problem.name, common.method), &fields)?;
        println!("wrote {}", path.display());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn converge(common: &Common, meshes: &[(usize, usize)]) -> Result<(), Failure> {
    let problem = builtin_problem(&common.problem)?;
    let degree = common.degree();
    let report = run_convergence(&problem, common.method, degree, meshes, &common.options())?;
    println!("{} {} Q{}", problem.name, common.method, degree.order());
    print!("{:>9} {:>12}", "mesh", "h");
    for c in ERROR_COLUMNS {
        print!(" {c:>12} {:>6}", "rate");
    }
    println!();
    let rates: Vec<Vec<f64>> = ERROR_COLUMNS.iter().map(|c| report.pairwise_rates(c)).collect();
    for (i, row) in report.rows.iter().enumerate() {
        print!("{:>9} {:>12.5e}", format!("{}x{}", row.nx, row.ny), row.h);
        for (k, e) in row.errors().iter().enumerate() {
            let r = if i == 0 { String::from("-") } else { format!("{:.2}", rates[k][i - 1]) };
            print!(" {e:>12.5e} {r:>6}");
        }
        println!();
    }
    print!("{:>22}", "least-squares slope");
    for c in ERROR_COLUMNS {
        print!(" {:>12} {:>6.2}", "", report.ls_rate(c));
    }
    println!();
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        let stem = format!("{}_{}_q{}", problem.name, common.method, degree.order());
        let csv = dir.join(format!("{stem}.csv"));
        write_report_csv(&report, &csv)?;
        println!("wrote {}", csv.display());
        for c in ["l2_p", "l2_u", "l2_div"] {
            let svg = dir.join(format!("{stem}_{c}.svg"));
            write_svg_plot(&svg, std::slice::from_ref(&report), c)?;
            println!("wrote {}", svg.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.kind().to_string(), "detail": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    let outcome = match &cli.command {
        Command::Run { common, mesh } => run(common, *mesh),
        Command::Converge { common, meshes } => converge(common, meshes),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Solver(e)) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
        Err(Failure::Checks(names)) => {
            eprintln!("{}", json!({"error": "check_failed", "message": "qualitative checks failed", "checks": names}));
            ExitCode::FAILURE
        }
    }
}
