use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use cpack::complex::{hex_ball, star, ComplexError, TriangulationComplex};
use cpack::exec::ExecMode;
use cpack::experiment::{
    flattening_csv, ratio_flattening, BoundarySpec, ExperimentError, FlatteningOptions,
};
use cpack::io::{
    parse_brs, parse_cpx, parse_lbl, profile_csv, return_csv, write_cpx, write_lbl, FormatError,
};
use cpack::label::{
    solve_boundary_value, targets_from_branch_set, BranchSet, Label, LabelError, SolveOptions,
    SweepMode,
};
use cpack::layout::{
    layout_packing, to_svg, FaceOrder, LayoutError, Packing, RootPose, SvgOptions,
};
use cpack::network::{
    label_conductances, monte_carlo_return, recurrence_profile, simple_network, transition_kernel,
    NetworkError,
};
use cpack::variation::{lemma36_sum, VariationError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Variation(#[from] VariationError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

type Result<T> = std::result::Result<T, CliError>;

/// Circle packings on triangulated discs and their random walks.
#[derive(Debug, Parser)]
#[command(name = "cpack", version)]
struct Cli {
    /// Solver tolerance on angle sums
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Solver sweep limit
    #[arg(long, global = true, default_value_t = 100_000)]
    max_iter: usize,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; more than one enables parallel execution
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated complex as .cpx
    Gen { kind: GenKind, size: usize },
    /// Solve a boundary-value problem and write the label as .lbl
    Solve {
        cpx: PathBuf,
        /// Branch set (.brs)
        #[arg(long)]
        brs: Option<PathBuf>,
        /// const:<x>, perturb:<x>:<amp>:<seed> or file:<path>
        #[arg(long, default_value = "const:1")]
        boundary: String,
        #[arg(long, value_enum, default_value_t = Sweep::GaussSeidel)]
        sweep: Sweep,
    },
    /// Lay out a label and write centers as CSV `vertex,x,y,radius`
    Layout {
        cpx: PathBuf,
        lbl: PathBuf,
        #[arg(long, default_value_t = 0)]
        root_face: usize,
        /// Visit faces in a seeded random order instead of breadth first
        #[arg(long)]
        shuffle: bool,
    },
    /// Lay out a label and write an SVG drawing
    Svg {
        cpx: PathBuf,
        lbl: PathBuf,
        #[arg(long, default_value_t = 0)]
        root_face: usize,
        /// Pixels per unit length
        #[arg(long, default_value_t = cpack::layout::DEFAULT_SVG_SCALE)]
        scale: f64,
        /// Draw the carrier edges between centers
        #[arg(long)]
        carrier: bool,
    },
    /// Effective resistance from the center to the boundary of hex_ball(1..=n)
    Resist {
        #[arg(long)]
        hexball: usize,
        #[arg(long, value_enum, default_value_t = Conductances::Unit)]
        conductances: Conductances,
    },
    /// Monte Carlo estimate of returning to the center within a step budget
    Walk {
        #[arg(long)]
        hexball: usize,
        #[arg(long, value_enum, default_value_t = Conductances::Unit)]
        conductances: Conductances,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Directional derivative of the center angle sum of a star
    Lemma36 {
        #[arg(long)]
        star: usize,
        #[arg(long, value_enum, default_value_t = Direction::Petals)]
        direction: Direction,
        /// Label on the star (.lbl); all radii 1 if absent
        #[arg(long)]
        label: Option<PathBuf>,
    },
    /// Ratio flattening between flat and perturbed boundaries, CSV per level
    Liouville {
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
    },
    /// The flattening protocol with a branch set shared by both solves
    Uniqueness {
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
        /// Inline branch set `v:order,...`; empty for none
        #[arg(long, default_value = "0:1", conflicts_with = "brs")]
        branch: String,
        /// Branch set file (.brs)
        #[arg(long)]
        brs: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenKind {
    Star,
    Hexball,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sweep {
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Conductances {
    /// Every edge has conductance 1
    Unit,
    /// Conductances of the all-ones label
    Flat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Direction {
    /// Every petal radius grows at unit log rate
    Petals,
    /// Only the center grows
    Center,
    /// `ρ' = ρ`
    Scale,
    /// Seeded uniform log rates in [-1, 1]
    Random,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_branch_list(s: &str) -> Result<BranchSet> {
    let invalid = || CliError::Invalid(format!("invalid branch list `{s}`, expected v:order,..."));
    let entries = s
        .split(',')
        .map(str::trim)
        .filter(|e| !e.is_empty())
        .map(|e| {
            let (v, n) = e.split_once(':').ok_or_else(invalid)?;
            Ok((
                v.parse().map_err(|_| invalid())?,
                n.parse().map_err(|_| invalid())?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchSet::new(entries)?)
}

fn load_label(k: &TriangulationComplex, path: &Path) -> Result<Label> {
    Ok(parse_lbl(&read(path)?)?.for_complex(k)?)
}

fn lay_out(
    k: &TriangulationComplex,
    rho: &Label,
    root_face: usize,
    order: FaceOrder,
) -> Result<Packing> {
    Ok(layout_packing(
        k,
        rho,
        root_face,
        RootPose::default(),
        order,
    )?)
}

fn network_for(
    k: &TriangulationComplex,
    kind: Conductances,
) -> std::result::Result<cpack::network::ConductanceNetwork, NetworkError> {
    match kind {
        Conductances::Unit => Ok(simple_network(k)),
        Conductances::Flat => {
            let rho = Label::constant(k.vertex_count(), 1.0).expect("unit radii are valid");
            label_conductances(k, &rho)
        }
    }
}

fn run(cli: &Cli, exec: ExecMode) -> Result<()> {
    let out = cli.out.as_deref();
    let solve = SolveOptions {
        tol: cli.tol,
        max_iter: cli.max_iter,
        exec,
        ..SolveOptions::default()
    };
    match &cli.command {
        Command::Gen { kind, size } => {
            let k = match kind {
                GenKind::Star => star(*size)?,
                GenKind::Hexball => hex_ball(*size)?,
            };
            emit(out, &write_cpx(&k))
        }
        Command::Solve {
            cpx,
            brs,
            boundary,
            sweep,
        } => {
            let k = parse_cpx(&read(cpx)?)?;
            let branch = match brs {
                Some(path) => parse_brs(&read(path)?)?,
                None => BranchSet::empty(),
            };
            let targets = targets_from_branch_set(&k, &branch)?;
            let radii = boundary.parse::<BoundarySpec>()?.radii(&k)?;
            let opts = SolveOptions {
                sweep: match sweep {
                    Sweep::GaussSeidel => SweepMode::GaussSeidel,
                    Sweep::Jacobi => SweepMode::Jacobi,
                },
                ..solve
            };
            let (rho, report) = solve_boundary_value(&k, &targets, &radii, &opts)?;
            eprintln!(
                "converged in {} sweeps, max residual {:.3e}",
                report.iterations, report.max_residual
            );
            emit(out, &write_lbl(&rho))
        }
        Command::Layout {
            cpx,
            lbl,
            root_face,
            shuffle,
        } => {
            let k = parse_cpx(&read(cpx)?)?;
            let rho = load_label(&k, lbl)?;
            let order = if *shuffle {
                FaceOrder::Shuffled(cli.seed)
            } else {
                FaceOrder::Breadth
            };
            let p = lay_out(&k, &rho, *root_face, order)?;
            eprintln!("consistency error {:.3e}", p.consistency_error());
            let mut csv = String::from("vertex,x,y,radius\n");
            for v in 0..k.vertex_count() {
                let c = p.center(v);
                let _ = writeln!(csv, "{v},{:.12},{:.12},{:.12}", c.x, c.y, rho[v]);
            }
            emit(out, &csv)
        }
        Command::Svg {
            cpx,
            lbl,
            root_face,
            scale,
            carrier,
        } => {
            let k = parse_cpx(&read(cpx)?)?;
            let rho = load_label(&k, lbl)?;
            let p = lay_out(&k, &rho, *root_face, FaceOrder::Breadth)?;
            let opts = SvgOptions {
                scale: *scale,
                carrier: *carrier,
                ..SvgOptions::default()
            };
            emit(out, &to_svg(&p, &opts))
        }
        Command::Resist {
            hexball,
            conductances,
        } => {
            let kind = *conductances;
            let profile = recurrence_profile(*hexball, |k| network_for(k, kind), exec)?;
            emit(out, &profile_csv(&profile))
        }
        Command::Walk {
            hexball,
            conductances,
            steps,
            trials,
        } => {
            let k = hex_ball(*hexball)?;
            let kernel = transition_kernel(&network_for(&k, *conductances)?)?;
            let est = monte_carlo_return(&kernel, 0, *steps, *trials, cli.seed, exec)?;
            emit(out, &return_csv(&est))
        }
        Command::Lemma36 {
            star: m,
            direction,
            label,
        } => {
            let k = star(*m)?;
            let rho = match label {
                Some(path) => load_label(&k, path)?,
                None => Label::constant(k.vertex_count(), 1.0)?,
            };
            let n = k.vertex_count();
            let rates: Vec<f64> = match direction {
                Direction::Petals => (0..n).map(|v| if v == 0 { 0.0 } else { 1.0 }).collect(),
                Direction::Center => (0..n).map(|v| if v == 0 { 1.0 } else { 0.0 }).collect(),
                Direction::Scale => vec![1.0; n],
                Direction::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
                }
            };
            let rho_prime: Vec<f64> = rates.iter().zip(rho.radii()).map(|(a, r)| a * r).collect();
            let d = lemma36_sum(&k, &rho, &rho_prime)?;
            emit(out, &format!("{d:.6}\n"))
        }
        Command::Liouville { n_max, amplitude } => {
            let rows = ratio_flattening(&FlatteningOptions {
                n_max: *n_max,
                amplitude: *amplitude,
                seed: cli.seed,
                branch: BranchSet::empty(),
                solve,
                exec,
            })?;
            emit(out, &flattening_csv(&rows))
        }
        Command::Uniqueness {
            n_max,
            amplitude,
            branch,
            brs,
        } => {
            let branch = match brs {
                Some(path) => parse_brs(&read(path)?)?,
                None => parse_branch_list(branch)?,
            };
            let inner = hex_ball(2)?;
            if let Some(&(v, _)) = branch
                .entries()
                .iter()
                .find(|(v, _)| !inner.is_interior(*v))
            {
                return Err(CliError::Invalid(format!(
                    "branch vertex {v} must be interior to hex_ball(2)"
                )));
            }
            let rows = ratio_flattening(&FlatteningOptions {
                n_max: *n_max,
                amplitude: *amplitude,
                seed: cli.seed,
                branch,
                solve,
                exec,
            })?;
            emit(out, &flattening_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = if cli.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(CliError::from)
            .and_then(|pool| pool.install(|| run(&cli, ExecMode::Parallel)))
    } else {
        run(&cli, ExecMode::Sequential)
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
