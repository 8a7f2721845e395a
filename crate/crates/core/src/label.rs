//! Radius labels, their face angles and angle sums, and the boundary-value
//! solver for prescribed angle sums (branched targets included).

use std::f64::consts::{PI, TAU};
use std::ops::Index;

use thiserror::Error;

use crate::complex::{Face, TriangulationComplex, VertexId};
use crate::exec::ExecMode;

/// Slack allowed on the cosine quotient before a face is declared degenerate.
pub const COSINE_SLACK: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("radius at vertex {vertex} must be positive and finite, got {value}")]
    NonPositiveRadius { vertex: VertexId, value: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("vertex {0} is not a vertex of the face")]
    VertexNotInFace(VertexId),
    #[error("degenerate face at vertex {vertex}: cosine quotient {quotient}")]
    DegenerateFace { vertex: VertexId, quotient: f64 },
    #[error("vertex {0} is a boundary vertex")]
    BoundaryVertex(VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("branch vertex {0} lies on the boundary")]
    BranchOnBoundary(VertexId),
    #[error("branch order {order} at vertex {vertex} is infeasible for degree {degree}")]
    InfeasibleOrder {
        vertex: VertexId,
        order: u32,
        degree: usize,
    },
    #[error("invalid branch set: {0}")]
    InvalidBranchSet(String),
    #[error("target {target} at vertex {vertex} is outside (0, {supremum})")]
    InfeasibleTarget {
        vertex: VertexId,
        target: f64,
        supremum: f64,
    },
    #[error("free vertex {0} has no target angle sum")]
    MissingTarget(VertexId),
    #[error("solver did not converge: {0:?}")]
    NotConverged(SolveReport),
    #[error("subpacking premise fails at vertex {vertex} (slack {slack})")]
    HypothesisNotMet { vertex: VertexId, slack: f64 },
}

/// A positive radius per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    radii: Vec<f64>,
}

impl Label {
    pub fn new(radii: Vec<f64>) -> Result<Self, LabelError> {
        if let Some((vertex, &value)) = radii
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(LabelError::NonPositiveRadius { vertex, value });
        }
        Ok(Self { radii })
    }

    pub fn constant(n: usize, radius: f64) -> Result<Self, LabelError> {
        Self::new(vec![radius; n])
    }

    /// Checks that the label has one entry per vertex of `k`.
    pub fn for_complex(self, k: &TriangulationComplex) -> Result<Self, LabelError> {
        if self.radii.len() != k.vertex_count() {
            return Err(LabelError::LengthMismatch {
                expected: k.vertex_count(),
                got: self.radii.len(),
            });
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn into_radii(self) -> Vec<f64> {
        self.radii
    }

    pub fn scaled(&self, c: f64) -> Result<Self, LabelError> {
        Self::new(self.radii.iter().map(|r| r * c).collect())
    }
}

impl Index<VertexId> for Label {
    type Output = f64;

    fn index(&self, v: VertexId) -> &f64 {
        &self.radii[v]
    }
}

/// Branch points with their orders `n(v) >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BranchSet {
    entries: Vec<(VertexId, u32)>,
}

impl BranchSet {
    pub fn new(mut entries: Vec<(VertexId, u32)>) -> Result<Self, LabelError> {
        entries.sort_unstable();
        if let Some(&(v, _)) = entries.iter().find(|(_, n)| *n == 0) {
            return Err(LabelError::InvalidBranchSet(format!(
                "vertex {v} has order 0"
            )));
        }
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(LabelError::InvalidBranchSet(format!(
                "vertex {} listed twice",
                w[0].0
            )));
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(VertexId, u32)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn order(&self, v: VertexId) -> u32 {
        self.entries
            .iter()
            .find(|(w, _)| *w == v)
            .map_or(0, |(_, n)| *n)
    }
}

/// Prescribed angle sums; `None` at vertices without an equation (boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetAngles {
    targets: Vec<Option<f64>>,
}

impl TargetAngles {
    pub fn new(targets: Vec<Option<f64>>) -> Self {
        Self { targets }
    }

    /// `2π` at every interior vertex.
    pub fn flat(k: &TriangulationComplex) -> Self {
        Self::new(
            (0..k.vertex_count())
                .map(|v| k.is_interior(v).then_some(TAU))
                .collect(),
        )
    }

    /// The angle sums of `rho` at the interior vertices.
    pub fn of_label(k: &TriangulationComplex, rho: &Label) -> Self {
        Self::new(
            (0..k.vertex_count())
                .map(|v| k.is_interior(v).then(|| angle_sum_at(k, rho.radii(), v)))
                .collect(),
        )
    }

    pub fn get(&self, v: VertexId) -> Option<f64> {
        self.targets.get(v).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<f64>] {
        &self.targets
    }

    pub fn without(mut self, v: VertexId) -> Self {
        if let Some(t) = self.targets.get_mut(v) {
            *t = None;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub max_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// In-place sweeps in vertex-id order.
    #[default]
    GaussSeidel,
    /// All free vertices updated from the previous iterate; parallelizable.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub sweep: SweepMode,
    pub exec: ExecMode,
    /// Starting radii for the free vertices; pinned values always win.
    pub initial: Option<Label>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            sweep: SweepMode::GaussSeidel,
            exec: ExecMode::Sequential,
            initial: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Angle at the circle of radius `rv` in the triangle of mutually tangent
/// circles with radii `rv`, `ru`, `rw`.
#[inline]
pub(crate) fn face_angle(rv: f64, ru: f64, rw: f64) -> f64 {
    // half-angle form of the cosine quotient; well conditioned for thin faces
    2.0 * (ru * rw / (rv * (rv + ru + rw))).sqrt().atan()
}

/// The cosine of the face angle at `rv`, as the law-of-cosines quotient on
/// center distances.
pub fn cosine_quotient(rv: f64, ru: f64, rw: f64) -> f64 {
    let (a, b, c) = (rv + ru, rv + rw, ru + rw);
    (a * a + b * b - c * c) / (2.0 * a * b)
}

/// Angle at `v` in `face`.
pub fn angle(rho: &Label, v: VertexId, face: &Face) -> Result<f64, LabelError> {
    let pos = face
        .iter()
        .position(|&x| x == v)
        .ok_or(LabelError::VertexNotInFace(v))?;
    let (u, w) = (face[(pos + 1) % 3], face[(pos + 2) % 3]);
    for x in [v, u, w] {
        if x >= rho.len() {
            return Err(LabelError::UnknownVertex(x));
        }
    }
    let (rv, ru, rw) = (rho[v], rho[u], rho[w]);
    let q = cosine_quotient(rv, ru, rw);
    if !q.is_finite() || q.abs() > 1.0 + COSINE_SLACK {
        return Err(LabelError::DegenerateFace {
            vertex: v,
            quotient: q,
        });
    }
    Ok(face_angle(rv, ru, rw))
}

/// Sum of the face angles at `v` over consecutive link pairs. Valid for any
/// vertex; for boundary vertices it is the sum over the incident faces.
pub(crate) fn angle_sum_at(k: &TriangulationComplex, radii: &[f64], v: VertexId) -> f64 {
    angle_sum_with(k, radii, v, radii[v])
}

/// Angle sum at `v` with its own radius replaced by `rv`.
fn angle_sum_with(k: &TriangulationComplex, radii: &[f64], v: VertexId, rv: f64) -> f64 {
    link_pairs(k, v)
        .map(|(a, b)| face_angle(rv, radii[a], radii[b]))
        .sum()
}

/// The pairs `(a, b)` such that `(v, a, b)` is a face.
pub(crate) fn link_pairs(
    k: &TriangulationComplex,
    v: VertexId,
) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
    let link = k.link(v);
    let n = link.len();
    let closed = k.is_interior(v);
    let count = if closed { n } else { n - 1 };
    (0..count).map(move |i| (link[i], link[(i + 1) % n]))
}

/// `Σ_w c(v, w)` for the label conductances at `v`; equals `-∂Θ(v)/∂log ρ(v)`.
#[cfg(test)]
fn conductance_sum_at(k: &TriangulationComplex, radii: &[f64], v: VertexId) -> f64 {
    conductance_sum_with(k, radii, v, radii[v])
}

fn conductance_sum_with(k: &TriangulationComplex, radii: &[f64], v: VertexId, rv: f64) -> f64 {
    link_pairs(k, v)
        .map(|(a, b)| {
            let (ra, rb) = (radii[a], radii[b]);
            let s = (rv * ra * rb / (rv + ra + rb)).sqrt();
            s / (rv + ra) + s / (rv + rb)
        })
        .sum()
}

/// The angle sum of `rho` at the interior vertex `v`.
pub fn angle_sum(k: &TriangulationComplex, rho: &Label, v: VertexId) -> Result<f64, LabelError> {
    if !k.contains(v) {
        return Err(LabelError::UnknownVertex(v));
    }
    if k.is_boundary(v) {
        return Err(LabelError::BoundaryVertex(v));
    }
    check_length(k, rho)?;
    Ok(angle_sum_at(k, rho.radii(), v))
}

fn check_length(k: &TriangulationComplex, rho: &Label) -> Result<(), LabelError> {
    if rho.len() != k.vertex_count() {
        return Err(LabelError::LengthMismatch {
            expected: k.vertex_count(),
            got: rho.len(),
        });
    }
    Ok(())
}

/// `2π(n(v) + 1)` at every interior vertex.
pub fn targets_from_branch_set(
    k: &TriangulationComplex,
    br: &BranchSet,
) -> Result<TargetAngles, LabelError> {
    let mut targets = TargetAngles::flat(k);
    for &(v, order) in br.entries() {
        if !k.contains(v) {
            return Err(LabelError::UnknownVertex(v));
        }
        if k.is_boundary(v) {
            return Err(LabelError::BranchOnBoundary(v));
        }
        let theta = TAU * (order as f64 + 1.0);
        let degree = k.degree(v);
        if theta >= degree as f64 * PI {
            return Err(LabelError::InfeasibleOrder {
                vertex: v,
                order,
                degree,
            });
        }
        targets.targets[v] = Some(theta);
    }
    Ok(targets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubpackingReport {
    pub holds: bool,
    /// `Θ_ρ(v) − Θ(v)` for every vertex with a target.
    pub slack: Vec<(VertexId, f64)>,
}

/// Whether `Θ_ρ ≥ Θ − tol` at every vertex carrying a target.
pub fn is_subpacking(
    k: &TriangulationComplex,
    rho: &Label,
    targets: &TargetAngles,
    tol: f64,
) -> SubpackingReport {
    let slack: Vec<_> = (0..k.vertex_count())
        .filter(|&v| k.is_interior(v))
        .filter_map(|v| {
            targets
                .get(v)
                .map(|t| (v, angle_sum_at(k, rho.radii(), v) - t))
        })
        .collect();
    let holds = slack.iter().all(|(_, s)| *s >= -tol);
    SubpackingReport { holds, slack }
}

/// Solves for the unique label with the given boundary radii (listed in
/// ascending boundary-vertex order) whose interior angle sums hit `targets`.
pub fn solve_boundary_value(
    k: &TriangulationComplex,
    targets: &TargetAngles,
    boundary_radii: &[f64],
    opts: &SolveOptions,
) -> Result<(Label, SolveReport), LabelError> {
    let boundary = k.boundary_vertices();
    if boundary.len() != boundary_radii.len() {
        return Err(LabelError::LengthMismatch {
            expected: boundary.len(),
            got: boundary_radii.len(),
        });
    }
    let mut pins = vec![None; k.vertex_count()];
    for (&v, &r) in boundary.iter().zip(boundary_radii) {
        pins[v] = Some(r);
    }
    solve_pinned(k, targets, &pins, opts)
}

/// General form of the boundary-value solve: every vertex with a pinned
/// radius keeps it, every other vertex must be interior and carry a target.
pub fn solve_pinned(
    k: &TriangulationComplex,
    targets: &TargetAngles,
    pins: &[Option<f64>],
    opts: &SolveOptions,
) -> Result<(Label, SolveReport), LabelError> {
    let n = k.vertex_count();
    if pins.len() != n {
        return Err(LabelError::LengthMismatch {
            expected: n,
            got: pins.len(),
        });
    }
    let mut free = Vec::new();
    for (v, pin) in pins.iter().enumerate() {
        match *pin {
            Some(r) if !(r.is_finite() && r > 0.0) => {
                return Err(LabelError::NonPositiveRadius {
                    vertex: v,
                    value: r,
                })
            }
            Some(_) => {}
            None => {
                if k.is_boundary(v) {
                    return Err(LabelError::BoundaryVertex(v));
                }
                let target = targets.get(v).ok_or(LabelError::MissingTarget(v))?;
                let supremum = k.degree(v) as f64 * PI;
                if !(target > 0.0 && target < supremum) {
                    return Err(LabelError::InfeasibleTarget {
                        vertex: v,
                        target,
                        supremum,
                    });
                }
                free.push((v, target));
            }
        }
    }

    let pinned: Vec<f64> = pins.iter().flatten().copied().collect();
    let start = if pinned.is_empty() {
        1.0
    } else {
        pinned.iter().sum::<f64>() / pinned.len() as f64
    };
    let mut radii: Vec<f64> = match &opts.initial {
        Some(init) => {
            check_length(k, init)?;
            init.radii().to_vec()
        }
        None => vec![start; n],
    };
    for (v, p) in pins.iter().enumerate() {
        if let Some(r) = p {
            radii[v] = *r;
        }
    }

    let residual = |radii: &[f64]| -> f64 {
        opts.exec
            .map_slice(&free, |&(v, t)| (angle_sum_at(k, radii, v) - t).abs())
            .into_iter()
            .fold(0.0, f64::max)
    };

    let mut report = SolveReport {
        iterations: 0,
        max_residual: residual(&radii),
        converged: false,
    };
    while report.max_residual > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(LabelError::NotConverged(report));
        }
        match opts.sweep {
            SweepMode::GaussSeidel => {
                for &(v, t) in &free {
                    radii[v] = solve_vertex(k, &radii, v, t);
                }
            }
            SweepMode::Jacobi => {
                let updates = opts
                    .exec
                    .map_slice(&free, |&(v, t)| solve_vertex(k, &radii, v, t));
                for (&(v, _), r) in free.iter().zip(updates) {
                    radii[v] = r;
                }
            }
        }
        report.iterations += 1;
        report.max_residual = residual(&radii);
    }
    report.converged = true;
    Ok((Label { radii }, report))
}

/// Radius at `v` making its angle sum equal `target` with the neighbors held
/// fixed. Safeguarded Newton on `log ρ(v)`; the angle sum is strictly
/// decreasing in `ρ(v)` with derivative `−Σ_w c(v, w)` in log space.
fn solve_vertex(k: &TriangulationComplex, radii: &[f64], v: VertexId, target: f64) -> f64 {
    let eval = |x: f64| {
        let rv = x.exp();
        (
            angle_sum_with(k, radii, v, rv) - target,
            conductance_sum_with(k, radii, v, rv),
        )
    };

    let mut x = radii[v].ln();
    let (mut g, mut dg) = eval(x);
    if g == 0.0 {
        return x.exp();
    }
    // bracket [lo, hi] with g(lo) > 0 > g(hi)
    let (mut lo, mut hi) = (x, x);
    let mut step = 1.0;
    if g > 0.0 {
        loop {
            hi += step;
            if eval(hi).0 < 0.0 {
                break;
            }
            lo = hi;
            step *= 2.0;
        }
    } else {
        loop {
            lo -= step;
            if eval(lo).0 > 0.0 {
                break;
            }
            hi = lo;
            step *= 2.0;
        }
    }

    for _ in 0..200 {
        let newton = x + g / dg;
        x = if newton > lo && newton < hi && dg > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        (g, dg) = eval(x);
        if g > 0.0 {
            lo = x;
        } else if g < 0.0 {
            hi = x;
        } else {
            break;
        }
        if g.abs() <= 4.0 * f64::EPSILON * target
            || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0)
        {
            break;
        }
    }
    x.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrincipleVerdict {
    pub boundary_min: f64,
    pub boundary_max: f64,
    /// Whether the lower bound was checked; it only applies when the two
    /// labels have equal angle sums.
    pub lower_bound_checked: bool,
    pub holds: bool,
    /// The vertex with the largest bound excess, if any bound is exceeded.
    pub worst_violation: Option<(VertexId, f64)>,
}

/// Checks the ratio bounds `ρ₂/ρ₁ ≤ max_∂ ρ₂/ρ₁` (and, when
/// `check_lower`, `≥ min_∂`) at every vertex, without checking any premise.
pub fn ratio_bounds(
    k: &TriangulationComplex,
    rho1: &Label,
    rho2: &Label,
    check_lower: bool,
    tol: f64,
) -> MaxPrincipleVerdict {
    let ratio = |v: VertexId| rho2[v] / rho1[v];
    let boundary = k.boundary_vertices();
    let boundary_min = boundary
        .iter()
        .map(|&v| ratio(v))
        .fold(f64::INFINITY, f64::min);
    let boundary_max = boundary.iter().map(|&v| ratio(v)).fold(0.0, f64::max);
    let mut worst: Option<(VertexId, f64)> = None;
    for v in 0..k.vertex_count() {
        let r = ratio(v);
        let mut excess = r - boundary_max;
        if check_lower {
            excess = excess.max(boundary_min - r);
        }
        if excess > tol && worst.is_none_or(|(_, e)| excess > e) {
            worst = Some((v, excess));
        }
    }
    MaxPrincipleVerdict {
        boundary_min,
        boundary_max,
        lower_bound_checked: check_lower,
        holds: worst.is_none(),
        worst_violation: worst,
    }
}

/// Maximum-principle check for a pair of labels where `rho2` is a subpacking
/// for the angle sums of `rho1`. With equal angle sums both ratio bounds are
/// checked, otherwise only the upper one.
pub fn check_max_principle(
    k: &TriangulationComplex,
    rho1: &Label,
    rho2: &Label,
    tol: f64,
) -> Result<MaxPrincipleVerdict, LabelError> {
    check_length(k, rho1)?;
    check_length(k, rho2)?;
    let theta1 = TargetAngles::of_label(k, rho1);
    let sub = is_subpacking(k, rho2, &theta1, tol);
    if let Some(&(vertex, slack)) = sub
        .slack
        .iter()
        .filter(|(_, s)| *s < -tol)
        .min_by(|a, b| a.1.total_cmp(&b.1))
    {
        return Err(LabelError::HypothesisNotMet { vertex, slack });
    }
    let equal = sub.slack.iter().all(|(_, s)| s.abs() <= tol);
    Ok(ratio_bounds(k, rho1, rho2, equal, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{hex_ball, star};
    use approx::assert_abs_diff_eq;

    fn law_of_cosines(rv: f64, ru: f64, rw: f64) -> f64 {
        let (a, b, c) = (rv + ru, rv + rw, ru + rw);
        ((a * a + b * b - c * c) / (2.0 * a * b)).acos()
    }

    #[test]
    fn equilateral_and_right_angles() {
        let rho = Label::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            angle(&rho, 0, &[0, 1, 2]).unwrap(),
            PI / 3.0,
            epsilon = 1e-15
        );
        let rho = Label::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(
            angle(&rho, 0, &[0, 1, 2]).unwrap(),
            PI / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn angle_matches_law_of_cosines() {
        let rho = Label::new(vec![1.0, 1.0, 5.0]).unwrap();
        let expected = law_of_cosines(1.0, 1.0, 5.0);
        assert_abs_diff_eq!(
            angle(&rho, 0, &[0, 1, 2]).unwrap(),
            expected,
            epsilon = 1e-14
        );
        // sides 2, 6, 6
        assert_abs_diff_eq!(expected, (1.0f64 / 6.0).acos(), epsilon = 1e-14);
    }

    #[test]
    fn angle_errors() {
        let rho = Label::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(
            angle(&rho, 3, &[0, 1, 2]),
            Err(LabelError::VertexNotInFace(3))
        );
        assert!(matches!(
            Label::new(vec![1.0, 0.0]),
            Err(LabelError::NonPositiveRadius { vertex: 1, .. })
        ));
        assert!(Label::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn angle_sums_of_flowers() {
        let k = star(6).unwrap();
        let rho = Label::constant(7, 1.0).unwrap();
        assert_abs_diff_eq!(angle_sum(&k, &rho, 0).unwrap(), TAU, epsilon = 1e-13);
        assert_eq!(angle_sum(&k, &rho, 1), Err(LabelError::BoundaryVertex(1)));

        let mut radii = vec![1.0; 7];
        radii[0] = 2.0 / 3f64.sqrt() - 1.0;
        let rho = Label::new(radii).unwrap();
        assert_abs_diff_eq!(angle_sum(&k, &rho, 0).unwrap(), 2.0 * TAU, epsilon = 1e-12);

        let k = star(4).unwrap();
        let rho = Label::constant(5, 1.0).unwrap();
        assert_abs_diff_eq!(
            angle_sum(&k, &rho, 0).unwrap(),
            4.0 * PI / 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn branch_targets() {
        let k = star(6).unwrap();
        let t = targets_from_branch_set(&k, &BranchSet::empty()).unwrap();
        assert_eq!(t.get(0), Some(TAU));
        assert_eq!(t.get(1), None);
        let br = BranchSet::new(vec![(0, 1)]).unwrap();
        assert_eq!(
            targets_from_branch_set(&k, &br).unwrap().get(0),
            Some(2.0 * TAU)
        );
        let br = BranchSet::new(vec![(0, 2)]).unwrap();
        assert_eq!(
            targets_from_branch_set(&k, &br),
            Err(LabelError::InfeasibleOrder {
                vertex: 0,
                order: 2,
                degree: 6
            })
        );
        let br = BranchSet::new(vec![(3, 1)]).unwrap();
        assert_eq!(
            targets_from_branch_set(&k, &br),
            Err(LabelError::BranchOnBoundary(3))
        );
        assert!(BranchSet::new(vec![(0, 1), (0, 2)]).is_err());
        assert!(BranchSet::new(vec![(0, 0)]).is_err());
    }

    #[test]
    fn subpacking_follows_center_radius() {
        let k = star(6).unwrap();
        let flat = TargetAngles::flat(&k);
        let rho = Label::constant(7, 1.0).unwrap();
        let rep = is_subpacking(&k, &rho, &flat, 1e-10);
        assert!(rep.holds);
        assert_abs_diff_eq!(rep.slack[0].1, 0.0, epsilon = 1e-13);

        let mut big = vec![1.0; 7];
        big[0] = 10.0;
        let rep = is_subpacking(&k, &Label::new(big).unwrap(), &flat, 1e-10);
        assert!(!rep.holds);
        assert!(rep.slack[0].1 < 0.0);

        let mut small = vec![1.0; 7];
        small[0] = 0.1;
        assert!(is_subpacking(&k, &Label::new(small).unwrap(), &flat, 1e-10).holds);
    }

    #[test]
    fn solves_flowers() {
        let k = star(6).unwrap();
        let opts = SolveOptions::default();
        let (rho, rep) =
            solve_boundary_value(&k, &TargetAngles::flat(&k), &[1.0; 6], &opts).unwrap();
        assert!(rep.converged);
        assert_abs_diff_eq!(rho[0], 1.0, epsilon = 1e-10);

        let br = BranchSet::new(vec![(0, 1)]).unwrap();
        let targets = targets_from_branch_set(&k, &br).unwrap();
        let (rho, rep) = solve_boundary_value(&k, &targets, &[1.0; 6], &opts).unwrap();
        assert!(rep.max_residual <= 1e-10);
        assert_abs_diff_eq!(rho[0], 2.0 / 3f64.sqrt() - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn infeasible_target_is_rejected() {
        let k = star(6).unwrap();
        let targets = TargetAngles::new(vec![Some(6.0 * PI), None, None, None, None, None, None]);
        assert!(matches!(
            solve_boundary_value(&k, &targets, &[1.0; 6], &SolveOptions::default()),
            Err(LabelError::InfeasibleTarget { vertex: 0, .. })
        ));
    }

    #[test]
    fn not_converged_reports() {
        let k = hex_ball(3).unwrap();
        let b = k.boundary_vertices().len();
        let boundary: Vec<f64> = (0..b).map(|i| 1.0 + 0.5 * (i % 2) as f64).collect();
        let opts = SolveOptions {
            max_iter: 2,
            ..SolveOptions::default()
        };
        match solve_boundary_value(&k, &TargetAngles::flat(&k), &boundary, &opts) {
            Err(LabelError::NotConverged(rep)) => {
                assert_eq!(rep.iterations, 2);
                assert!(!rep.converged);
                assert!(rep.max_residual > opts.tol);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn jacobi_matches_gauss_seidel() {
        let k = hex_ball(3).unwrap();
        let b = k.boundary_vertices().len();
        let boundary: Vec<f64> = (0..b)
            .map(|i| 1.0 + 0.3 * ((i * 7) % 5) as f64 / 5.0)
            .collect();
        let targets = TargetAngles::flat(&k);
        let gs = solve_boundary_value(&k, &targets, &boundary, &SolveOptions::default())
            .unwrap()
            .0;
        let jac_opts = SolveOptions {
            sweep: SweepMode::Jacobi,
            exec: ExecMode::Parallel,
            ..SolveOptions::default()
        };
        let jac = solve_boundary_value(&k, &targets, &boundary, &jac_opts)
            .unwrap()
            .0;
        for v in 0..k.vertex_count() {
            assert_abs_diff_eq!(gs[v], jac[v], epsilon = 1e-9);
        }
    }

    #[test]
    fn resolve_from_solution_is_immediate() {
        let k = hex_ball(3).unwrap();
        let b = k.boundary_vertices().len();
        let boundary: Vec<f64> = (0..b).map(|i| 1.0 + 0.2 * (i % 3) as f64).collect();
        let targets = TargetAngles::flat(&k);
        let (rho, _) =
            solve_boundary_value(&k, &targets, &boundary, &SolveOptions::default()).unwrap();
        let again = SolveOptions {
            initial: Some(rho),
            ..SolveOptions::default()
        };
        let (_, rep) = solve_boundary_value(&k, &targets, &boundary, &again).unwrap();
        assert!(rep.iterations <= 2);
    }

    #[test]
    fn max_principle_verdicts() {
        let k = hex_ball(2).unwrap();
        let targets = TargetAngles::flat(&k);
        let b = k.boundary_vertices().len();
        let opts = SolveOptions::default();
        let rho1 = solve_boundary_value(&k, &targets, &vec![1.0; b], &opts)
            .unwrap()
            .0;
        let v = check_max_principle(&k, &rho1, &rho1.scaled(3.0).unwrap(), 1e-9).unwrap();
        assert!(v.holds && v.lower_bound_checked);
        assert_abs_diff_eq!(v.boundary_min, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.boundary_max, 3.0, epsilon = 1e-12);

        let perturbed: Vec<f64> = (0..b)
            .map(|i| 1.0 + 0.05 * ((i * 5) % 7) as f64 / 7.0)
            .collect();
        let rho2 = solve_boundary_value(&k, &targets, &perturbed, &opts)
            .unwrap()
            .0;
        assert!(check_max_principle(&k, &rho1, &rho2, 1e-9).unwrap().holds);

        let mut bad = rho1.clone().into_radii();
        bad[0] = 2.0;
        let bad = Label::new(bad).unwrap();
        let bounds = ratio_bounds(&k, &rho1, &bad, true, 1e-9);
        assert!(!bounds.holds);
        assert_eq!(bounds.worst_violation.map(|w| w.0), Some(0));
        assert!(matches!(
            check_max_principle(&k, &rho1, &bad, 1e-9),
            Err(LabelError::HypothesisNotMet { vertex: 0, .. })
        ));
    }

    #[test]
    fn conductance_sum_is_log_derivative() {
        let k = star(5).unwrap();
        let mut radii = vec![0.7, 1.3, 0.4, 2.2, 1.0, 0.9];
        let c = conductance_sum_at(&k, &radii, 0);
        let h: f64 = 1e-6;
        let r0 = radii[0];
        radii[0] = r0 * h.exp();
        let up = angle_sum_at(&k, &radii, 0);
        radii[0] = r0 * (-h).exp();
        let down = angle_sum_at(&k, &radii, 0);
        assert_abs_diff_eq!(-(up - down) / (2.0 * h), c, epsilon = 1e-8);
    }
}
