//! Boundary profiles and the ratio-flattening experiment on hex balls.
//!
//! For each level `k` two boundary-value problems on `hex_ball(k)` are
//! solved with the same target angles: one with every boundary radius 1,
//! one with a randomly perturbed boundary. The quotient of the two labels
//! is compared on the boundary and on the inner ball `hex_ball(⌊k/2⌋)`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::complex::{hex_ball, hex_ball_vertex_count, ComplexError, TriangulationComplex};
use crate::exec::ExecMode;
use crate::io::{parse_lbl_entries, FormatError};
use crate::label::{
    solve_boundary_value, targets_from_branch_set, BranchSet, LabelError, SolveOptions,
};
use crate::layout::{ratio_map, LayoutError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid boundary spec `{0}`")]
    InvalidSpec(String),
    #[error("perturbation amplitude {0} must lie in [0, 1)")]
    InvalidAmplitude(f64),
    #[error("boundary radius must be positive, got {0}")]
    NonPositiveBase(f64),
    #[error("n_max must be at least 3, got {0}")]
    LevelTooSmall(usize),
    #[error("boundary file has no radius for vertex {0}")]
    MissingBoundaryRadius(usize),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// How boundary radii are produced.
///
/// `const:<x>`, `perturb:<x>:<amp>:<seed>` or `file:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    Const(f64),
    /// `x·(1 + amp·u)` with `u` uniform in `[−1, 1]`, drawn per boundary
    /// vertex in ascending id order.
    Perturb {
        base: f64,
        amplitude: f64,
        seed: u64,
    },
    /// A `.lbl` file; only its boundary entries are used.
    File(PathBuf),
}

impl FromStr for BoundarySpec {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || ExperimentError::InvalidSpec(s.to_string());
        let num = |x: &str| x.parse::<f64>().map_err(|_| invalid());
        let spec = match s.split_once(':') {
            Some(("const", x)) => BoundarySpec::Const(num(x)?),
            Some(("perturb", rest)) => {
                let parts: Vec<&str> = rest.split(':').collect();
                let [x, amp, seed] = parts.as_slice() else {
                    return Err(invalid());
                };
                BoundarySpec::Perturb {
                    base: num(x)?,
                    amplitude: num(amp)?,
                    seed: seed.parse().map_err(|_| invalid())?,
                }
            }
            Some(("file", path)) if !path.is_empty() => BoundarySpec::File(path.into()),
            _ => return Err(invalid()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl BoundarySpec {
    fn validate(&self) -> Result<(), ExperimentError> {
        match *self {
            BoundarySpec::Const(x) | BoundarySpec::Perturb { base: x, .. }
                if x.is_nan() || x <= 0.0 =>
            {
                Err(ExperimentError::NonPositiveBase(x))
            }
            BoundarySpec::Perturb { amplitude, .. } if !(0.0..1.0).contains(&amplitude) => {
                Err(ExperimentError::InvalidAmplitude(amplitude))
            }
            _ => Ok(()),
        }
    }

    /// Boundary radii of `k` in ascending boundary-vertex order.
    pub fn radii(&self, k: &TriangulationComplex) -> Result<Vec<f64>, ExperimentError> {
        self.validate()?;
        let count = k.boundary_vertices().len();
        match self {
            BoundarySpec::Const(x) => Ok(vec![*x; count]),
            &BoundarySpec::Perturb {
                base,
                amplitude,
                seed,
            } => Ok(perturbed_radii(count, base, amplitude, seed, 0)),
            BoundarySpec::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                    path: path.clone(),
                    source,
                })?;
                let mut radii = vec![None; k.vertex_count()];
                for (v, r) in parse_lbl_entries(&text)? {
                    if v < radii.len() {
                        radii[v] = Some(r);
                    }
                }
                k.boundary_vertices()
                    .into_iter()
                    .map(|v| radii[v].ok_or(ExperimentError::MissingBoundaryRadius(v)))
                    .collect()
            }
        }
    }
}

/// `count` radii `base·(1 + amplitude·u)`, one ChaCha8 stream per `stream`.
pub fn perturbed_radii(
    count: usize,
    base: f64,
    amplitude: f64,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count)
        .map(|_| base * (1.0 + amplitude * rng.random_range(-1.0..=1.0)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatteningOptions {
    pub n_max: usize,
    pub amplitude: f64,
    pub seed: u64,
    pub branch: BranchSet,
    pub solve: SolveOptions,
    /// Levels are independent and may run concurrently.
    pub exec: ExecMode,
}

impl Default for FlatteningOptions {
    fn default() -> Self {
        Self {
            n_max: 6,
            amplitude: 0.1,
            seed: 1,
            branch: BranchSet::empty(),
            solve: SolveOptions::default(),
            exec: ExecMode::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatteningRow {
    pub level: usize,
    pub inner_level: usize,
    pub boundary_oscillation: f64,
    pub interior_oscillation: f64,
}

impl FlatteningRow {
    pub fn contracts(&self) -> bool {
        self.interior_oscillation < self.boundary_oscillation
    }
}

/// Runs levels `2..=n_max`. The perturbed boundary at level `k` uses
/// stream `k` of the seed, so every level is reproducible on its own.
pub fn ratio_flattening(opts: &FlatteningOptions) -> Result<Vec<FlatteningRow>, ExperimentError> {
    if opts.n_max < 3 {
        return Err(ExperimentError::LevelTooSmall(opts.n_max));
    }
    if !(0.0..1.0).contains(&opts.amplitude) {
        return Err(ExperimentError::InvalidAmplitude(opts.amplitude));
    }
    let levels: Vec<usize> = (2..=opts.n_max).collect();
    opts.exec
        .map_slice(&levels, |&level| flattening_level(opts, level))
        .into_iter()
        .collect()
}

fn flattening_level(
    opts: &FlatteningOptions,
    level: usize,
) -> Result<FlatteningRow, ExperimentError> {
    let k = hex_ball(level)?;
    let targets = targets_from_branch_set(&k, &opts.branch)?;
    let boundary = k.boundary_vertices();
    let flat = vec![1.0; boundary.len()];
    let bumped = perturbed_radii(boundary.len(), 1.0, opts.amplitude, opts.seed, level as u64);
    let (p, _) = solve_boundary_value(&k, &targets, &flat, &opts.solve)?;
    let (q, _) = solve_boundary_value(&k, &targets, &bumped, &opts.solve)?;
    let ratio = ratio_map(&k, &p, &q)?;
    let inner_level = level / 2;
    let inner: Vec<usize> = (0..hex_ball_vertex_count(inner_level)).collect();
    Ok(FlatteningRow {
        level,
        inner_level,
        boundary_oscillation: ratio.oscillation(&boundary),
        interior_oscillation: ratio.oscillation(&inner),
    })
}

/// `level,inner_level,boundary_oscillation,interior_oscillation`
pub fn flattening_csv(rows: &[FlatteningRow]) -> String {
    let mut out = String::from("level,inner_level,boundary_oscillation,interior_oscillation\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.12},{:.12}",
            r.level, r.inner_level, r.boundary_oscillation, r.interior_oscillation
        );
    }
    out
}
