use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectral_handles::capacity::{capacity_exact, capacity_fem, Condenser};
use spectral_handles::eigen::{lowest_eigenpairs, sector_eigenpairs, EigenOptions, Parity};
use spectral_handles::fem::assemble;
use spectral_handles::geometry::{MetricField, RoundMetric};
use spectral_handles::harness::{build_level, gamma_check, run_sweep, SweepConfig};
use spectral_handles::limit::{limit_spectrum, ShiftConvention};
use spectral_handles::mesh::{icosphere, SphereMesh};
use spectral_handles::packing::build_packing;
use spectral_handles::relaxed::{MeasureSpec, RelaxedManifold};
use spectral_handles::{Error, Result};

#[derive(Parser)]
#[command(name = "spectral-handles", version, about = "Spectra of spheres with many small antipodal handles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy η-packing of S^d, written one center per line.
    Pack {
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Holed mesh of one sweep level, or a plain icosphere with --level.
    Mesh {
        /// Sweep config supplying α, the handle profile and mesh parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "level")]
        eta: Option<f64>,
        /// Icosphere refinement level (no holes).
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the relaxed manifold (handles and measure) as TOML.
        #[arg(long)]
        manifold: Option<PathBuf>,
    },
    /// Lowest eigenpairs of a mesh under a coupling measure.
    Spectrum {
        #[arg(long)]
        mesh: PathBuf,
        /// Relaxed manifold TOML; without it the round metric is used.
        #[arg(long)]
        manifold: Option<PathBuf>,
        /// `infinite`, `boundary:<kappa>` or `volume:<kappa>`; defaults to the manifold's measure.
        #[arg(long)]
        measure: Option<String>,
        #[arg(short, long, default_value_t = 9)]
        k: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Restrict to one parity sector (`even` or `odd`).
        #[arg(long)]
        parity: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form limit spectrum.
    Limit {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "form")]
        convention: ShiftConvention,
        #[arg(short, long, default_value_t = 9)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capacity of the condenser B_R \ B_r on S^d.
    Capacity {
        #[arg(long)]
        r: f64,
        #[arg(long = "big-r")]
        big_r: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Also solve by finite elements at this mesh size (d = 2).
        #[arg(long)]
        h: Option<f64>,
    },
    /// Run an h-sweep; writes the CSV report and summary.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Recovery and lower-bound gaps along the schedule.
    Gamma {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SweepConfig> {
    match path {
        Some(p) => SweepConfig::from_toml(&read(p)?),
        None => Ok(SweepConfig::default()),
    }
}

fn parse_measure(s: &str) -> Result<MeasureSpec> {
    let kappa = |v: &str| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad kappa: {v}")));
    let m = match s.split_once(':') {
        None if s == "infinite" => MeasureSpec::InfiniteOnBoundary,
        Some(("boundary", v)) => MeasureSpec::BoundaryDensity { kappa: kappa(v)? },
        Some(("volume", v)) => MeasureSpec::VolumeDensity { kappa: kappa(v)? },
        _ => return Err(Error::Parse(format!("unknown measure '{s}'"))),
    };
    m.validate()?;
    Ok(m)
}

fn parse_parity(s: &str) -> Result<Parity> {
    match s {
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        _ => Err(Error::Parse(format!("unknown parity '{s}' (even or odd)"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pack { eta, d, seed, out } => {
            let p = build_packing(eta, d, seed)?;
            emit(out.as_deref(), &p.to_text())?;
            eprintln!("{} centers, min separation {:.6}", p.centers.len(), p.min_separation());
        }
        Command::Mesh { config, eta, level, out, manifold } => {
            let (mesh, rm) = match (level, eta) {
                (Some(l), _) => (icosphere(l), RelaxedManifold::new(Vec::new(), MeasureSpec::InfiniteOnBoundary)?),
                (None, Some(eta)) => {
                    let cfg = load_config(config.as_deref())?;
                    let lv = build_level(&cfg, eta)?;
                    (lv.pair.holed, lv.manifold)
                }
                (None, None) => return Err(Error::Contract("mesh needs --eta or --level".into())),
            };
            std::fs::write(&out, mesh.to_text())?;
            if let Some(p) = manifold {
                std::fs::write(p, rm.to_toml()?)?;
            }
            eprintln!("{} vertices, {} triangles, {} hole loops", mesh.num_vertices(), mesh.num_triangles(), mesh.loops.len());
        }
        Command::Spectrum { mesh, manifold, measure, k, tol, parity, out } => {
            let mesh = SphereMesh::from_text(&read(&mesh)?)?;
            let rm = manifold.map(|p| read(&p).and_then(|t| RelaxedManifold::from_toml(&t))).transpose()?;
            let measure = match (&measure, &rm) {
                (Some(s), _) => parse_measure(s)?,
                (None, Some(m)) => m.measure,
                (None, None) => MeasureSpec::InfiniteOnBoundary,
            };
            let glued = rm.as_ref().map(|m| m.metric());
            let metric: &dyn MetricField = match &glued {
                Some(g) => g,
                None => &RoundMetric,
            };
            let forms = assemble(&mesh, metric, measure)?;
            let res = match parity.as_deref().map(parse_parity).transpose()? {
                Some(p) => sector_eigenpairs(&forms, p, k, &EigenOptions { tol, ..EigenOptions::default() })?,
                None => lowest_eigenpairs(&forms, k, tol)?,
            };
            emit(out.as_deref(), &res.to_csv())?;
        }
        Command::Limit { d, alpha, convention, k, out } => {
            emit(out.as_deref(), &limit_spectrum(d, alpha, convention, k)?.to_csv())?;
        }
        Command::Capacity { r, big_r, d, h } => {
            let c = Condenser::new(r, big_r, d)?;
            println!("exact {:.12e}", capacity_exact(&c));
            if let Some(h) = h {
                println!("fem {:.12e}", capacity_fem(&c, h)?);
            }
        }
        Command::Sweep { config, report, summary } => {
            let mut cfg = load_config(Some(&config))?;
            if report.is_some() {
                cfg.output_paths.report = report;
            }
            if summary.is_some() {
                cfg.output_paths.summary = summary;
            }
            let rep = run_sweep(&cfg)?;
            rep.write_outputs()?;
            if cfg.output_paths.report.is_none() {
                print!("{}", rep.to_csv());
            }
            eprint!("{}", rep.summary());
        }
        Command::Gamma { config, out } => {
            let cfg = load_config(Some(&config))?;
            let rep = gamma_check(&cfg)?;
            emit(out.as_deref(), &rep.to_csv())?;
            eprintln!("recovery_shrinks: {}\nlower_shrinks: {}", rep.recovery_shrinks, rep.lower_shrinks);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
