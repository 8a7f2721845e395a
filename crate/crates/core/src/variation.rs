//! Variations of labels.
//!
//! On a flower, the derivative of the center angle sum along a smooth family
//! of labels has a closed form whose coefficients are exactly the label
//! conductances of the center edges; [`lemma36_sum`] evaluates it and
//! [`theta_derivative_fd`] is the finite-difference counterpart.
//!
//! [`perturbation_family`] builds the one-parameter family that interpolates
//! boundary radii between two labels while pinning one interior vertex and
//! holding all other angle sums fixed. Along it the logarithmic flow field
//! `f = ρ'/ρ` is harmonic for the label conductances away from the pinned
//! vertex and subharmonic at it; [`flow_field_residual`] measures this.

use std::fmt::Write as _;

use thiserror::Error;

use crate::complex::{TriangulationComplex, VertexId};
use crate::exec::ExecMode;
use crate::label::{
    angle_sum_at, is_subpacking, solve_pinned, Label, LabelError, SolveOptions, TargetAngles,
};
use crate::network::{label_conductances, ConductanceNetwork, NetworkError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationError {
    #[error("complex is not a star with center 0")]
    NotAStar,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("step leaves the family's domain or produces a non-positive radius at t = {t}")]
    StepTooLarge { t: f64 },
    #[error("vertex {0} must be interior")]
    NotInterior(VertexId),
    #[error("premise violated at vertex {vertex}: {what}")]
    PremiseViolated {
        vertex: VertexId,
        what: &'static str,
    },
    #[error("t grid must be increasing within [0, 1] with at least 3 points")]
    InvalidGrid,
    #[error("grid index {0} out of range")]
    IndexOutOfRange(usize),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

fn check_star(k: &TriangulationComplex) -> Result<(), VariationError> {
    let m = k.vertex_count().saturating_sub(1);
    let is_star = m >= 3
        && k.is_interior(0)
        && k.degree(0) == m
        && k.face_count() == m
        && (1..=m).all(|v| k.is_boundary(v));
    if is_star {
        Ok(())
    } else {
        Err(VariationError::NotAStar)
    }
}

/// Coefficients of the angle-sum derivative on a flower, one per petal in
/// cyclic order: `[√(ρ₀ρᵢρᵢ₋₁/(ρ₀+ρᵢ+ρᵢ₋₁)) + √(ρ₀ρᵢρᵢ₊₁/(ρ₀+ρᵢ+ρᵢ₊₁))] / (ρ₀+ρᵢ)`.
pub fn lemma36_coefficients(
    k: &TriangulationComplex,
    rho: &Label,
) -> Result<Vec<(VertexId, f64)>, VariationError> {
    check_star(k)?;
    if rho.len() != k.vertex_count() {
        return Err(VariationError::LengthMismatch {
            expected: k.vertex_count(),
            got: rho.len(),
        });
    }
    let petals = k.link(0);
    let m = petals.len();
    let r0 = rho[0];
    Ok((0..m)
        .map(|i| {
            let ri = rho[petals[i]];
            let prev = rho[petals[(i + m - 1) % m]];
            let next = rho[petals[(i + 1) % m]];
            let term = |rj: f64| (r0 * ri * rj).sqrt() / (r0 + ri + rj).sqrt();
            (petals[i], (term(prev) + term(next)) / (r0 + ri))
        })
        .collect())
}

/// `Σᵢ cᵢ (ρᵢ'/ρᵢ − ρ₀'/ρ₀)`, the derivative of the center angle sum in the
/// direction `rho_prime`.
pub fn lemma36_sum(
    k: &TriangulationComplex,
    rho: &Label,
    rho_prime: &[f64],
) -> Result<f64, VariationError> {
    let coefficients = lemma36_coefficients(k, rho)?;
    if rho_prime.len() != k.vertex_count() {
        return Err(VariationError::LengthMismatch {
            expected: k.vertex_count(),
            got: rho_prime.len(),
        });
    }
    let center = rho_prime[0] / rho[0];
    Ok(coefficients
        .iter()
        .map(|&(v, c)| c * (rho_prime[v] / rho[v] - center))
        .sum())
}

/// A label depending on a parameter `t`.
pub trait LabelPath {
    fn label_at(&self, t: f64) -> Result<Label, VariationError>;
}

/// A family given by a closure `t ↦ radii`.
pub struct ExplicitFamily<F> {
    radii: F,
}

impl<F: Fn(f64) -> Vec<f64>> ExplicitFamily<F> {
    pub fn new(radii: F) -> Self {
        Self { radii }
    }
}

impl<F: Fn(f64) -> Vec<f64>> LabelPath for ExplicitFamily<F> {
    fn label_at(&self, t: f64) -> Result<Label, VariationError> {
        Label::new((self.radii)(t)).map_err(|_| VariationError::StepTooLarge { t })
    }
}

/// Central difference `(Θ(t+h) − Θ(t−h)) / 2h` of the angle sum at the
/// interior vertex `v`.
pub fn theta_derivative_fd(
    k: &TriangulationComplex,
    family: &impl LabelPath,
    v: VertexId,
    t: f64,
    h: f64,
) -> Result<f64, VariationError> {
    if !k.contains(v) || k.is_boundary(v) {
        return Err(VariationError::NotInterior(v));
    }
    let theta = |s: f64| -> Result<f64, VariationError> {
        let rho = family.label_at(s)?;
        if rho.len() != k.vertex_count() {
            return Err(VariationError::LengthMismatch {
                expected: k.vertex_count(),
                got: rho.len(),
            });
        }
        Ok(angle_sum_at(k, rho.radii(), v))
    };
    Ok((theta(t + h)? - theta(t - h)?) / (2.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    Explicit,
    /// Boundary radii interpolated linearly, `pinned` held fixed, other
    /// interior angle sums frozen.
    BoundaryInterpolated {
        pinned: VertexId,
    },
}

/// Finite-difference stencil for `d/dt` on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Three-point differences, second order (one-sided at the grid ends).
    Central3,
    /// Five-point differences, fourth order (off-center next to the ends).
    #[default]
    Central5,
}

/// Labels sampled on an increasing grid of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFamily {
    pub t_grid: Vec<f64>,
    pub labels: Vec<Label>,
    pub kind: FamilyKind,
}

/// Per-vertex `ρ'/ρ` at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub t: f64,
    pub values: Vec<f64>,
}

/// `n` equally spaced points covering `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let step = 1.0 / (n - 1) as f64;
    (0..n).map(|i| i as f64 * step).collect()
}

/// Default grid: 33 points, spacing 1/32.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(33)
}

impl LabelFamily {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn radius_path(&self, v: VertexId) -> Vec<f64> {
        self.labels.iter().map(|l| l[v]).collect()
    }

    /// Whether every radius is non-decreasing along the grid, up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.labels.windows(2).all(|w| {
            w[0].radii()
                .iter()
                .zip(w[1].radii())
                .all(|(a, b)| *b >= a - tol)
        })
    }

    /// `ρ'/ρ` at grid point `index` from differences on the grid (assumed
    /// uniform).
    pub fn flow_field(&self, index: usize, stencil: Stencil) -> Result<FlowField, VariationError> {
        let n = self.len();
        if index >= n {
            return Err(VariationError::IndexOutOfRange(index));
        }
        let needed = match stencil {
            Stencil::Central3 => 3,
            Stencil::Central5 => 5,
        };
        if n < needed {
            return Err(VariationError::InvalidGrid);
        }
        let h = self.t_grid[1] - self.t_grid[0];
        let vertices = self.labels[index].len();
        let values = (0..vertices)
            .map(|v| {
                let r = |i: usize| self.labels[i][v];
                let d = match stencil {
                    Stencil::Central3 => derivative3(r, index, n, h),
                    Stencil::Central5 => derivative5(r, index, n, h),
                };
                d / r(index)
            })
            .collect();
        Ok(FlowField {
            t: self.t_grid[index],
            values,
        })
    }

    /// `t,vertex,radius` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,vertex,radius\n");
        for (t, label) in self.t_grid.iter().zip(&self.labels) {
            for (v, r) in label.radii().iter().enumerate() {
                let _ = writeln!(out, "{t},{v},{r:.15e}");
            }
        }
        out
    }
}

fn derivative3(r: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * r(0) + 4.0 * r(1) - r(2)) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * r(i) - 4.0 * r(i - 1) + r(i - 2)) / (2.0 * h)
    } else {
        (r(i + 1) - r(i - 1)) / (2.0 * h)
    }
}

fn derivative5(r: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    let w = 12.0 * h;
    if i == 0 {
        (-25.0 * r(0) + 48.0 * r(1) - 36.0 * r(2) + 16.0 * r(3) - 3.0 * r(4)) / w
    } else if i == 1 {
        (-3.0 * r(0) - 10.0 * r(1) + 18.0 * r(2) - 6.0 * r(3) + r(4)) / w
    } else if i == n - 1 {
        (25.0 * r(i) - 48.0 * r(i - 1) + 36.0 * r(i - 2) - 16.0 * r(i - 3) + 3.0 * r(i - 4)) / w
    } else if i == n - 2 {
        (3.0 * r(i + 1) + 10.0 * r(i) - 18.0 * r(i - 1) + 6.0 * r(i - 2) - r(i - 3)) / w
    } else {
        (-r(i + 2) + 8.0 * r(i + 1) - 8.0 * r(i - 1) + r(i - 2)) / w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyOptions {
    pub solve: SolveOptions,
    pub exec: ExecMode,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default().with_tol(1e-13),
            exec: ExecMode::Sequential,
        }
    }
}

/// The family `ρ(t)`, `t` on `t_grid`, with boundary radii
/// `(1 − t)ρ + tρ̂`, `ρ(t)(w₀) = ρ(w₀)`, and `Θ_{ρ(t)} = Θ_ρ` at every other
/// interior vertex. Grid points are solved independently.
pub fn perturbation_family(
    k: &TriangulationComplex,
    rho: &Label,
    rho_hat: &Label,
    w0: VertexId,
    t_grid: &[f64],
    opts: &FamilyOptions,
) -> Result<LabelFamily, VariationError> {
    let n = k.vertex_count();
    for l in [rho, rho_hat] {
        if l.len() != n {
            return Err(VariationError::LengthMismatch {
                expected: n,
                got: l.len(),
            });
        }
    }
    if !k.contains(w0) || k.is_boundary(w0) {
        return Err(VariationError::NotInterior(w0));
    }
    let grid_ok = t_grid.len() >= 3
        && t_grid.windows(2).all(|w| w[1] > w[0])
        && t_grid[0] >= 0.0
        && t_grid[t_grid.len() - 1] <= 1.0;
    if !grid_ok {
        return Err(VariationError::InvalidGrid);
    }
    if let Some(vertex) = (0..n).find(|&v| rho_hat[v] < rho[v]) {
        return Err(VariationError::PremiseViolated {
            vertex,
            what: "hatted label is smaller",
        });
    }
    let theta = TargetAngles::of_label(k, rho);
    let sub = is_subpacking(k, rho_hat, &theta, opts.solve.tol.max(1e-10));
    if let Some(&(vertex, _)) = sub
        .slack
        .iter()
        .find(|(_, s)| *s < -opts.solve.tol.max(1e-10))
    {
        return Err(VariationError::PremiseViolated {
            vertex,
            what: "hatted label is not a subpacking",
        });
    }
    let targets = theta.without(w0);

    let labels = opts
        .exec
        .map_slice(t_grid, |&t| {
            let interp: Vec<f64> = (0..n)
                .map(|v| (1.0 - t) * rho[v] + t * rho_hat[v])
                .collect();
            let pins: Vec<Option<f64>> = (0..n)
                .map(|v| {
                    if v == w0 {
                        Some(rho[w0])
                    } else {
                        k.is_boundary(v).then_some(interp[v])
                    }
                })
                .collect();
            let solve = SolveOptions {
                initial: Some(Label::new(interp)?),
                ..opts.solve.clone()
            };
            solve_pinned(k, &targets, &pins, &solve).map(|(l, _)| l)
        })
        .into_iter()
        .collect::<Result<Vec<_>, LabelError>>()?;
    Ok(LabelFamily {
        t_grid: t_grid.to_vec(),
        labels,
        kind: FamilyKind::BoundaryInterpolated { pinned: w0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResidual {
    pub vertex: VertexId,
    pub residual: f64,
    pub pinned: bool,
}

/// `Σ_w c(v, w)(f(w) − f(v))` at every interior vertex, with `f` the flow
/// field at grid point `index` and `c` the conductances `net_builder`
/// derives from the label there.
pub fn flow_field_residual<F>(
    k: &TriangulationComplex,
    family: &LabelFamily,
    index: usize,
    stencil: Stencil,
    net_builder: F,
) -> Result<Vec<FlowResidual>, VariationError>
where
    F: Fn(&TriangulationComplex, &Label) -> Result<ConductanceNetwork, NetworkError>,
{
    let f = family.flow_field(index, stencil)?;
    let net = net_builder(k, &family.labels[index])?;
    let pinned = match family.kind {
        FamilyKind::BoundaryInterpolated { pinned } => Some(pinned),
        FamilyKind::Explicit => None,
    };
    Ok(k.interior_vertices()
        .into_iter()
        .map(|v| FlowResidual {
            vertex: v,
            residual: net
                .neighbors(v)
                .map(|(w, c)| c * (f.values[w] - f.values[v]))
                .sum(),
            pinned: Some(v) == pinned,
        })
        .collect())
}

/// [`flow_field_residual`] with the label conductances.
pub fn label_flow_residual(
    k: &TriangulationComplex,
    family: &LabelFamily,
    index: usize,
    stencil: Stencil,
) -> Result<Vec<FlowResidual>, VariationError> {
    flow_field_residual(k, family, index, stencil, label_conductances)
}

/// `t,vertex,residual,pinned` rows with a header.
pub fn residuals_to_csv(t: f64, residuals: &[FlowResidual]) -> String {
    let mut out = String::from("t,vertex,residual,pinned\n");
    for r in residuals {
        let _ = writeln!(
            out,
            "{t},{},{:.6e},{}",
            r.vertex, r.residual, r.pinned as u8
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{hex_ball, star};
    use crate::network::label_conductances;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trivial_directions_vanish() {
        let k = star(6).unwrap();
        let rho = Label::new(vec![0.7, 1.0, 2.0, 0.3, 1.5, 0.9, 1.1]).unwrap();
        assert_eq!(lemma36_sum(&k, &rho, &[0.0; 7]).unwrap(), 0.0);
        let s = lemma36_sum(&k, &rho, rho.radii()).unwrap();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hexagonal_flower_petal_direction() {
        let k = star(6).unwrap();
        let rho = Label::constant(7, 1.0).unwrap();
        let mut d = vec![1.0; 7];
        d[0] = 0.0;
        assert_abs_diff_eq!(
            lemma36_sum(&k, &rho, &d).unwrap(),
            2.0 * 3f64.sqrt(),
            epsilon = 1e-14
        );

        let fam = ExplicitFamily::new(|t| {
            let mut r = vec![1.0 + t; 7];
            r[0] = 1.0;
            r
        });
        let fd = theta_derivative_fd(&k, &fam, 0, 0.0, 1e-5).unwrap();
        assert_abs_diff_eq!(fd, 2.0 * 3f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn constant_family_has_zero_derivative() {
        let k = star(5).unwrap();
        let fam = ExplicitFamily::new(|_| vec![1.0, 2.0, 3.0, 1.0, 2.0, 0.5]);
        assert_eq!(theta_derivative_fd(&k, &fam, 0, 0.3, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn step_too_large() {
        let k = star(3).unwrap();
        let fam = ExplicitFamily::new(|t| vec![t, 1.0, 1.0, 1.0]);
        assert_eq!(
            theta_derivative_fd(&k, &fam, 0, 0.1, 0.2),
            Err(VariationError::StepTooLarge { t: 0.1 - 0.2 })
        );
        assert_eq!(
            theta_derivative_fd(&k, &fam, 1, 0.5, 0.1),
            Err(VariationError::NotInterior(1))
        );
    }

    #[test]
    fn fd_error_is_second_order() {
        let k = star(5).unwrap();
        let base = [0.8, 1.2, 0.5, 2.0, 1.0, 0.7];
        let dir = [0.3, -0.2, 0.5, 0.1, -0.4, 0.25];
        let fam = ExplicitFamily::new(move |t| {
            base.iter()
                .zip(&dir)
                .map(|(r, d)| r * (d * t).exp())
                .collect()
        });
        let rho = Label::new(base.to_vec()).unwrap();
        let prime: Vec<f64> = base.iter().zip(&dir).map(|(r, d)| r * d).collect();
        let exact = lemma36_sum(&k, &rho, &prime).unwrap();
        let e1 = (theta_derivative_fd(&k, &fam, 0, 0.0, 1e-2).unwrap() - exact).abs();
        let e2 = (theta_derivative_fd(&k, &fam, 0, 0.0, 5e-3).unwrap() - exact).abs();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn coefficients_are_center_conductances() {
        let k = star(7).unwrap();
        let rho = Label::new(vec![0.4, 1.0, 3.0, 0.2, 1.7, 0.9, 5.0, 1.1]).unwrap();
        let net = label_conductances(&k, &rho).unwrap();
        for (v, c) in lemma36_coefficients(&k, &rho).unwrap() {
            assert_abs_diff_eq!(c, net.c(0, v), epsilon = 1e-12);
            assert!(c <= 1.0);
        }
    }

    #[test]
    fn not_a_star() {
        let k = hex_ball(2).unwrap();
        let rho = Label::constant(k.vertex_count(), 1.0).unwrap();
        assert_eq!(
            lemma36_sum(&k, &rho, &vec![0.0; k.vertex_count()]),
            Err(VariationError::NotAStar)
        );
    }

    fn doubled_family(stencil_points: usize) -> (TriangulationComplex, LabelFamily) {
        let k = hex_ball(2).unwrap();
        let rho = Label::constant(k.vertex_count(), 1.0).unwrap();
        let hat = rho.scaled(2.0).unwrap();
        let fam = perturbation_family(
            &k,
            &rho,
            &hat,
            0,
            &uniform_grid(stencil_points),
            &FamilyOptions::default(),
        )
        .unwrap();
        (k, fam)
    }

    #[test]
    fn identical_labels_give_constant_family() {
        let k = hex_ball(2).unwrap();
        let rho = Label::constant(k.vertex_count(), 1.0).unwrap();
        let fam = perturbation_family(
            &k,
            &rho,
            &rho,
            0,
            &uniform_grid(5),
            &FamilyOptions::default(),
        )
        .unwrap();
        for l in &fam.labels {
            for v in 0..k.vertex_count() {
                assert_abs_diff_eq!(l[v], 1.0, epsilon = 1e-12);
            }
        }
        let res = label_flow_residual(&k, &fam, 2, Stencil::Central3).unwrap();
        assert!(res.iter().all(|r| r.residual.abs() < 1e-10));
    }

    #[test]
    fn doubled_family_is_monotone_and_harmonic() {
        let (k, fam) = doubled_family(33);
        assert!(fam.is_monotone(0.0));
        for v in 0..k.vertex_count() {
            assert_abs_diff_eq!(fam.labels[0][v], 1.0, epsilon = 1e-12);
        }
        for i in 0..fam.len() {
            let f = fam.flow_field(i, Stencil::Central3).unwrap();
            let boundary_max = k
                .boundary_vertices()
                .iter()
                .map(|&v| f.values[v])
                .fold(0.0, f64::max);
            for &x in &f.values {
                assert!(x >= -1e-9 && x <= boundary_max + 1e-9);
            }
        }
        for i in 0..fam.len() {
            for r in label_flow_residual(&k, &fam, i, Stencil::default()).unwrap() {
                if r.pinned {
                    assert!(r.residual >= -1e-5);
                } else {
                    assert!(r.residual.abs() <= 1e-5, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn stencil_order_shows_in_residuals() {
        let (k, fam) = doubled_family(33);
        let worst = |st| {
            label_flow_residual(&k, &fam, 16, st)
                .unwrap()
                .iter()
                .filter(|r| !r.pinned)
                .map(|r| r.residual.abs())
                .fold(0.0, f64::max)
        };
        assert!(worst(Stencil::Central5) * 50.0 < worst(Stencil::Central3));
    }

    #[test]
    fn premise_checks() {
        let k = hex_ball(2).unwrap();
        let rho = Label::constant(k.vertex_count(), 1.0).unwrap();
        let smaller = rho.scaled(0.5).unwrap();
        let grid = uniform_grid(5);
        let opts = FamilyOptions::default();
        assert!(matches!(
            perturbation_family(&k, &rho, &smaller, 0, &grid, &opts),
            Err(VariationError::PremiseViolated { .. })
        ));
        assert_eq!(
            perturbation_family(&k, &rho, &rho, 10, &grid, &opts),
            Err(VariationError::NotInterior(10))
        );
        assert_eq!(
            perturbation_family(&k, &rho, &rho, 0, &[0.0, 1.0], &opts),
            Err(VariationError::InvalidGrid)
        );
    }

    #[test]
    fn csv_dump() {
        let (_, fam) = doubled_family(3);
        let csv = fam.to_csv();
        assert!(csv.starts_with("t,vertex,radius\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 19);
    }
}
