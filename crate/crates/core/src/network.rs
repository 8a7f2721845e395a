//! Reversible random walks on the 1-skeleton.
//!
//! A [`ConductanceNetwork`] carries a symmetric positive weight per edge; its
//! [`TransitionKernel`] is `p(v, w) = c(v, w) / c(v)`. Conductances come
//! either from unit weights (the simple random walk) or from a label via
//! [`label_conductances`]. Recurrence is probed numerically through effective
//! resistances on growing hexagonal balls and finite-horizon Monte Carlo
//! return frequencies.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::complex::{hex_ball, ComplexError, TriangulationComplex, VertexId};
use crate::exec::ExecMode;
use crate::label::Label;

/// Below this many unknowns the Dirichlet system is solved by dense Cholesky.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;
/// Relative residual target of the conjugate-gradient route.
pub const CG_TOL: f64 = 1e-10;
pub const DETAILED_BALANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("conductance {value} on edge ({u}, {v}) must be positive and finite")]
    NonPositiveConductance {
        u: VertexId,
        v: VertexId,
        value: f64,
    },
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertex {0} has no incident edges")]
    IsolatedVertex(VertexId),
    #[error("function value missing at vertex {0}")]
    MissingValues(VertexId),
    #[error("boundary set must be nonempty and exclude the root")]
    InvalidBoundary,
    #[error("Dirichlet system is singular (vertex {0} is cut off from the fixed set)")]
    SingularSystem(VertexId),
    #[error("conjugate gradient stalled after {iterations} iterations (residual {residual})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("networks have different edge sets")]
    EdgeSetMismatch,
    #[error("exhaustion level must be at least {min}, got {got}")]
    InvalidLevel { min: usize, got: usize },
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Symmetric positive edge weights on a finite graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceNetwork {
    edges: Vec<(VertexId, VertexId)>,
    conductance: Vec<f64>,
    // (neighbor, edge index), neighbors sorted
    adjacency: Vec<Vec<(VertexId, usize)>>,
}

impl ConductanceNetwork {
    /// Builds a network from weighted edges; repeated pairs are merged by
    /// adding their conductances (parallel connection).
    pub fn from_edges(
        vertex_count: usize,
        weighted: &[(VertexId, VertexId, f64)],
    ) -> Result<Self, NetworkError> {
        let mut merged: HashMap<(VertexId, VertexId), f64> = HashMap::new();
        for &(u, v, c) in weighted {
            if u >= vertex_count || v >= vertex_count {
                return Err(NetworkError::UnknownVertex(u.max(v)));
            }
            if u == v {
                return Err(NetworkError::SelfLoop(u));
            }
            if !(c.is_finite() && c > 0.0) {
                return Err(NetworkError::NonPositiveConductance { u, v, value: c });
            }
            *merged.entry((u.min(v), u.max(v))).or_default() += c;
        }
        let mut edges: Vec<_> = merged.keys().copied().collect();
        edges.sort_unstable();
        let conductance: Vec<f64> = edges.iter().map(|e| merged[e]).collect();
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (i, &(u, v)) in edges.iter().enumerate() {
            adjacency[u].push((v, i));
            adjacency[v].push((u, i));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            edges,
            conductance,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn conductances(&self) -> &[f64] {
        &self.conductance
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        self.adjacency[v]
            .iter()
            .map(move |&(w, e)| (w, self.conductance[e]))
    }

    /// `c(v, w)`, zero when `v` and `w` are not adjacent.
    pub fn c(&self, v: VertexId, w: VertexId) -> f64 {
        self.adjacency[v]
            .binary_search_by_key(&w, |&(x, _)| x)
            .map_or(0.0, |i| self.conductance[self.adjacency[v][i].1])
    }

    /// `c(v) = Σ_w c(v, w)`.
    pub fn total(&self, v: VertexId) -> f64 {
        self.neighbors(v).map(|(_, c)| c).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, NetworkError> {
        self.map_conductances(|_, _, c| c * factor)
    }

    /// A network on the same edges with conductances `f(u, v, c(u, v))`.
    pub fn map_conductances<F>(&self, f: F) -> Result<Self, NetworkError>
    where
        F: Fn(VertexId, VertexId, f64) -> f64,
    {
        let weighted: Vec<_> = self
            .edges
            .iter()
            .zip(&self.conductance)
            .map(|(&(u, v), &c)| (u, v, f(u, v, c)))
            .collect();
        Self::from_edges(self.vertex_count(), &weighted)
    }
}

/// Unit conductances on every edge of `k`.
pub fn simple_network(k: &TriangulationComplex) -> ConductanceNetwork {
    let weighted: Vec<_> = k.edges().iter().map(|&(u, v)| (u, v, 1.0)).collect();
    ConductanceNetwork::from_edges(k.vertex_count(), &weighted).expect("unit weights are valid")
}

/// The label-derived conductance of the edge `{v, w}` given the radii of
/// the vertices completing it to faces (one for a boundary edge, two
/// otherwise).
pub fn edge_conductance(rv: f64, rw: f64, flanks: impl IntoIterator<Item = f64>) -> f64 {
    flanks
        .into_iter()
        .map(|rx| (rv * rw * rx / (rv + rw + rx)).sqrt())
        .sum::<f64>()
        / (rv + rw)
}

/// Conductances from radii: for the edge `{v, w}` with flanking vertices
/// `w'` and `w''`,
/// `c(v, w) = [√(ρ_v ρ_w ρ_w' / (ρ_v + ρ_w + ρ_w')) + √(… ρ_w'' …)] / (ρ_v + ρ_w)`.
/// Boundary edges, which have a single flanking vertex, keep the single term.
pub fn label_conductances(
    k: &TriangulationComplex,
    rho: &Label,
) -> Result<ConductanceNetwork, NetworkError> {
    let weighted: Vec<_> = k
        .edges()
        .iter()
        .map(|&(v, w)| {
            let (after, before) = k.opposite_vertices(v, w).expect("edge endpoints adjacent");
            let flanks = after.into_iter().chain(before).map(|x| rho[x]);
            (v, w, edge_conductance(rho[v], rho[w], flanks))
        })
        .collect();
    ConductanceNetwork::from_edges(k.vertex_count(), &weighted)
}

/// Transition probabilities `p(v, w) = c(v, w) / c(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    rows: Vec<Vec<(VertexId, f64)>>,
    // cumulative row sums for sampling
    cumulative: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn vertex_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.rows[v]
    }

    pub fn p(&self, v: VertexId, w: VertexId) -> f64 {
        self.rows[v]
            .iter()
            .find(|(x, _)| *x == w)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Next vertex for a uniform draw `u` in `[0, 1)`.
    pub fn step(&self, v: VertexId, u: f64) -> VertexId {
        let cum = &self.cumulative[v];
        let i = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.rows[v][i].0
    }
}

pub fn transition_kernel(net: &ConductanceNetwork) -> Result<TransitionKernel, NetworkError> {
    let mut rows = Vec::with_capacity(net.vertex_count());
    let mut cumulative = Vec::with_capacity(net.vertex_count());
    for v in 0..net.vertex_count() {
        let total = net.total(v);
        if total <= 0.0 {
            return Err(NetworkError::IsolatedVertex(v));
        }
        let row: Vec<(VertexId, f64)> = net.neighbors(v).map(|(w, c)| (w, c / total)).collect();
        let mut acc = 0.0;
        let cum = row
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        rows.push(row);
        cumulative.push(cum);
    }
    Ok(TransitionKernel { rows, cumulative })
}

/// `max |c(v) p(v, w) − c(w) p(w, v)|` over all edges.
pub fn detailed_balance_residual(net: &ConductanceNetwork, kernel: &TransitionKernel) -> f64 {
    net.edges()
        .iter()
        .map(|&(v, w)| (net.total(v) * kernel.p(v, w) - net.total(w) * kernel.p(w, v)).abs())
        .fold(0.0, f64::max)
}

/// `Σ_w p(v, w) f(w) − f(v)` for each `v` in `region`; non-positive
/// everywhere exactly when `f` is superharmonic on the region. Missing
/// values are entries that are absent or NaN.
pub fn superharmonic_residual(
    kernel: &TransitionKernel,
    f: &[f64],
    region: &[VertexId],
) -> Result<Vec<(VertexId, f64)>, NetworkError> {
    let value = |v: VertexId| match f.get(v) {
        Some(x) if !x.is_nan() => Ok(*x),
        _ => Err(NetworkError::MissingValues(v)),
    };
    region
        .iter()
        .map(|&v| {
            if v >= kernel.vertex_count() {
                return Err(NetworkError::UnknownVertex(v));
            }
            let mean = kernel
                .row(v)
                .iter()
                .map(|&(w, p)| value(w).map(|x| p * x))
                .sum::<Result<f64, _>>()?;
            Ok((v, mean - value(v)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Dense Cholesky below [`DIRECT_SOLVE_LIMIT`] unknowns, CG above.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

/// Solves the discrete Dirichlet problem: `h` takes the given values on the
/// fixed vertices and satisfies `Σ_w c(v, w)(h(w) − h(v)) = 0` elsewhere.
pub fn dirichlet_potential(
    net: &ConductanceNetwork,
    fixed: &[(VertexId, f64)],
    solver: LinearSolver,
) -> Result<Vec<f64>, NetworkError> {
    let n = net.vertex_count();
    let mut h = vec![f64::NAN; n];
    for &(v, x) in fixed {
        if v >= n {
            return Err(NetworkError::UnknownVertex(v));
        }
        h[v] = x;
    }
    let is_fixed: Vec<bool> = h.iter().map(|x| !x.is_nan()).collect();

    // every free vertex must reach the fixed set
    let mut reached = is_fixed.clone();
    let mut queue: VecDeque<VertexId> = (0..n).filter(|&v| is_fixed[v]).collect();
    while let Some(v) = queue.pop_front() {
        for (w, _) in net.neighbors(v) {
            if !reached[w] {
                reached[w] = true;
                queue.push_back(w);
            }
        }
    }
    if let Some(v) = reached.iter().position(|r| !r) {
        return Err(NetworkError::SingularSystem(v));
    }

    let free: Vec<VertexId> = (0..n).filter(|&v| !is_fixed[v]).collect();
    if free.is_empty() {
        return Ok(h);
    }
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in free.iter().enumerate() {
        slot[v] = i;
    }
    let m = free.len();
    let mut rhs = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut offdiag: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (i, &v) in free.iter().enumerate() {
        for (w, c) in net.neighbors(v) {
            diag[i] += c;
            if is_fixed[w] {
                rhs[i] += c * h[w];
            } else {
                offdiag[i].push((slot[w], c));
            }
        }
    }

    let direct = match solver {
        LinearSolver::Auto => m < DIRECT_SOLVE_LIMIT,
        LinearSolver::Direct => true,
        LinearSolver::ConjugateGradient => false,
    };
    let x = if direct {
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = diag[i];
            for &(j, c) in &offdiag[i] {
                a[(i, j)] -= c;
            }
        }
        let chol = a.cholesky().ok_or(NetworkError::SingularSystem(free[0]))?;
        chol.solve(&DVector::from_vec(rhs)).as_slice().to_vec()
    } else {
        conjugate_gradient(&diag, &offdiag, &rhs)?
    };
    for (i, &v) in free.iter().enumerate() {
        h[v] = x[i];
    }
    Ok(h)
}

// Jacobi-preconditioned CG on the reduced Laplacian (diag − offdiag).
fn conjugate_gradient(
    diag: &[f64],
    offdiag: &[Vec<(usize, f64)>],
    b: &[f64],
) -> Result<Vec<f64>, NetworkError> {
    let m = b.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..m {
            out[i] = diag[i] * x[i] - offdiag[i].iter().map(|&(j, c)| c * x[j]).sum::<f64>();
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let target = CG_TOL * dot(b, b).sqrt().max(1.0);

    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz = dot(&r, &z);
    let max_iter = 10 * m + 100;
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= target {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(NetworkError::NotConverged {
                iterations: it,
                residual: dot(&r, &r).sqrt(),
            });
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = dot(&r, &r).sqrt();
    if residual <= target {
        Ok(x)
    } else {
        Err(NetworkError::NotConverged {
            iterations: max_iter,
            residual,
        })
    }
}

/// Effective resistance between `root` and the contracted `boundary` set:
/// `1 / Σ_w c(root, w)(1 − h(w))` for the potential `h` that is 1 at the
/// root, 0 on the boundary, and harmonic elsewhere.
pub fn effective_resistance(
    net: &ConductanceNetwork,
    root: VertexId,
    boundary: &[VertexId],
    solver: LinearSolver,
) -> Result<f64, NetworkError> {
    if root >= net.vertex_count() {
        return Err(NetworkError::UnknownVertex(root));
    }
    if boundary.is_empty() || boundary.contains(&root) {
        return Err(NetworkError::InvalidBoundary);
    }
    let mut fixed: Vec<(VertexId, f64)> = boundary.iter().map(|&v| (v, 0.0)).collect();
    fixed.push((root, 1.0));
    let h = dirichlet_potential(net, &fixed, solver)?;
    let current: f64 = net.neighbors(root).map(|(w, c)| c * (1.0 - h[w])).sum();
    if current <= 0.0 {
        return Err(NetworkError::SingularSystem(root));
    }
    Ok(1.0 / current)
}

/// Effective resistance from the center of `hex_ball(k)` to its boundary,
/// for `k = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceProfile {
    pub levels: Vec<(usize, f64)>,
}

impl ResistanceProfile {
    pub fn resistances(&self) -> Vec<f64> {
        self.levels.iter().map(|&(_, r)| r).collect()
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].1 > w[0].1)
    }
}

pub fn recurrence_profile<F>(
    n_max: usize,
    net_builder: F,
    exec: ExecMode,
) -> Result<ResistanceProfile, NetworkError>
where
    F: Fn(&TriangulationComplex) -> Result<ConductanceNetwork, NetworkError> + Sync + Send,
{
    if n_max < 2 {
        return Err(NetworkError::InvalidLevel { min: 2, got: n_max });
    }
    let levels = exec
        .map_range(n_max, |i| {
            let level = i + 1;
            let k = hex_ball(level)?;
            let net = net_builder(&k)?;
            let r = effective_resistance(&net, 0, &k.boundary_vertices(), LinearSolver::Auto)?;
            Ok((level, r))
        })
        .into_iter()
        .collect::<Result<Vec<_>, NetworkError>>()?;
    Ok(ResistanceProfile { levels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceComparison {
    /// Whether `net2 ≤ net1` on every edge.
    pub dominated: bool,
    /// `(R_net1, R_net2)` for each tested root/boundary pair.
    pub resistances: Vec<(f64, f64)>,
    /// When dominated: every tested `R_net2 ≥ R_net1` (up to rounding).
    pub monotone: bool,
}

/// Compares two networks on the same edge set. When `net2` is pointwise no
/// larger than `net1`, its effective resistances must be no smaller.
pub fn compare_conductances(
    net1: &ConductanceNetwork,
    net2: &ConductanceNetwork,
    pairs: &[(VertexId, Vec<VertexId>)],
) -> Result<ConductanceComparison, NetworkError> {
    if net1.edges() != net2.edges() {
        return Err(NetworkError::EdgeSetMismatch);
    }
    let dominated = net1
        .conductances()
        .iter()
        .zip(net2.conductances())
        .all(|(c1, c2)| c2 <= c1);
    let resistances = pairs
        .iter()
        .map(|(root, boundary)| {
            Ok((
                effective_resistance(net1, *root, boundary, LinearSolver::Auto)?,
                effective_resistance(net2, *root, boundary, LinearSolver::Auto)?,
            ))
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;
    let monotone = !dominated || resistances.iter().all(|&(r1, r2)| r2 >= r1 * (1.0 - 1e-12));
    Ok(ConductanceComparison {
        dominated,
        resistances,
        monotone,
    })
}

/// Fraction of walks from `root` revisiting it within `max_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnEstimate {
    pub trials: usize,
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of the finite-horizon return probability. Trial `i`
/// draws from its own ChaCha stream `i` under `seed`, so the result depends
/// only on `(seed, trials)`.
pub fn monte_carlo_return(
    kernel: &TransitionKernel,
    root: VertexId,
    max_steps: usize,
    trials: usize,
    seed: u64,
    exec: ExecMode,
) -> Result<ReturnEstimate, NetworkError> {
    if root >= kernel.vertex_count() {
        return Err(NetworkError::UnknownVertex(root));
    }
    if let Some(v) = (0..kernel.vertex_count()).find(|&v| kernel.row(v).is_empty()) {
        return Err(NetworkError::IsolatedVertex(v));
    }
    let returns = exec.count_range(trials, |trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut v = root;
        for _ in 0..max_steps {
            v = kernel.step(v, rng.random::<f64>());
            if v == root {
                return true;
            }
        }
        false
    });
    let n = trials.max(1) as f64;
    let estimate = returns as f64 / n;
    Ok(ReturnEstimate {
        trials,
        estimate,
        stderr: (estimate * (1.0 - estimate) / n).sqrt(),
    })
}
