//! Planar realization of a label: circle centers from a breadth-first
//! developing pass over face adjacency, consistency and winding checks,
//! ratio maps between labels, and SVG output.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::ops::{Add, Sub};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::complex::{Face, TriangulationComplex, VertexId};
use crate::label::{face_angle, Label};

/// Default tolerance for center-distance checks on laid-out packings.
pub const LAYOUT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("label has {got} radii for a complex with {expected} vertices")]
    MismatchedComplex { expected: usize, got: usize },
    #[error("root face {0} does not exist")]
    UnknownFace(usize),
    #[error("face {0} could not be reached from the root face")]
    UnplacedFace(usize),
    #[error("vertex {0} is a boundary vertex")]
    BoundaryVertex(VertexId),
    #[error("svg output failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn arg(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// Placement of the root face: its first vertex goes to `origin` and its
/// first edge points in direction `rotation` (radians from the positive
/// horizontal axis).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RootPose {
    pub origin: Point,
    pub rotation: f64,
}

/// Order in which neighboring faces are queued during development.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceOrder {
    /// Edges of each face in their stored order.
    #[default]
    Breadth,
    /// Neighbor order shuffled by a seeded generator.
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packing {
    pub complex: TriangulationComplex,
    pub label: Label,
    pub centers: Vec<Point>,
    pub root_face: usize,
    pub pose: RootPose,
}

/// Develops `rho` into the plane starting from `root_face`. Each vertex is
/// placed once, tangent to the two placed circles of the edge through which
/// it is first reached, on the side given by face orientation.
pub fn layout_packing(
    k: &TriangulationComplex,
    rho: &Label,
    root_face: usize,
    pose: RootPose,
    order: FaceOrder,
) -> Result<Packing, LayoutError> {
    if rho.len() != k.vertex_count() {
        return Err(LayoutError::MismatchedComplex {
            expected: k.vertex_count(),
            got: rho.len(),
        });
    }
    let faces = k.faces();
    if root_face >= faces.len() {
        return Err(LayoutError::UnknownFace(root_face));
    }
    let mut by_edge: HashMap<(VertexId, VertexId), usize> = HashMap::new();
    for (i, f) in faces.iter().enumerate() {
        for j in 0..3 {
            by_edge.insert((f[j], f[(j + 1) % 3]), i);
        }
    }
    let mut rng = match order {
        FaceOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        FaceOrder::Breadth => None,
    };

    let mut centers: Vec<Option<Point>> = vec![None; k.vertex_count()];
    let [a, b, c] = faces[root_face];
    centers[a] = Some(pose.origin);
    centers[b] = Some(pose.origin + Point::polar(rho[a] + rho[b], pose.rotation));
    centers[c] = Some(place_third(rho, &centers, a, b, c));

    let mut visited = vec![false; faces.len()];
    visited[root_face] = true;
    let mut queue = VecDeque::from([root_face]);
    while let Some(fi) = queue.pop_front() {
        let f = faces[fi];
        let mut next: Vec<(usize, VertexId, VertexId)> = (0..3)
            .filter_map(|j| {
                let (u, v) = (f[j], f[(j + 1) % 3]);
                by_edge.get(&(v, u)).map(|&g| (g, v, u))
            })
            .collect();
        if let Some(rng) = rng.as_mut() {
            next.shuffle(rng);
        }
        for (g, u, v) in next {
            if visited[g] {
                continue;
            }
            visited[g] = true;
            let w = third_vertex(&faces[g], u, v);
            if centers[w].is_none() {
                centers[w] = Some(place_third(rho, &centers, u, v, w));
            }
            queue.push_back(g);
        }
    }
    if let Some(fi) = visited.iter().position(|v| !v) {
        return Err(LayoutError::UnplacedFace(fi));
    }
    let centers = centers
        .into_iter()
        .map(|c| c.expect("every vertex lies on a visited face"))
        .collect();
    Ok(Packing {
        complex: k.clone(),
        label: rho.clone(),
        centers,
        root_face,
        pose,
    })
}

fn third_vertex(face: &Face, u: VertexId, v: VertexId) -> VertexId {
    *face
        .iter()
        .find(|&&x| x != u && x != v)
        .expect("face has three distinct vertices")
}

// For the positively oriented face (u, v, w): w sits left of u -> v.
fn place_third(
    rho: &Label,
    centers: &[Option<Point>],
    u: VertexId,
    v: VertexId,
    w: VertexId,
) -> Point {
    let cu = centers[u].expect("u placed");
    let cv = centers[v].expect("v placed");
    let alpha = face_angle(rho[u], rho[v], rho[w]);
    cu + Point::polar(rho[u] + rho[w], (cv - cu).arg() + alpha)
}

impl Packing {
    pub fn center(&self, v: VertexId) -> Point {
        self.centers[v]
    }

    /// Largest deviation of a center distance from the corresponding radius
    /// sum, over all edges.
    pub fn consistency_error(&self) -> f64 {
        self.complex
            .edges()
            .iter()
            .map(|&(u, v)| {
                (self.centers[u].dist(self.centers[v]) - (self.label[u] + self.label[v])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Signed angle at `v` between the centers of the other two vertices of
    /// `face`, as realized in the layout.
    pub fn realized_angle(&self, v: VertexId, face: &Face) -> Option<f64> {
        let pos = face.iter().position(|&x| x == v)?;
        let (u, w) = (face[(pos + 1) % 3], face[(pos + 2) % 3]);
        let (du, dw) = (
            self.centers[u] - self.centers[v],
            self.centers[w] - self.centers[v],
        );
        Some(du.cross(dw).atan2(du.dot(dw)))
    }

    /// Total turning of the petal chain around the interior vertex `v`: the
    /// sum of signed angles between consecutive petal centers.
    pub fn total_turning(&self, v: VertexId) -> Result<f64, LayoutError> {
        if self.complex.is_boundary(v) {
            return Err(LayoutError::BoundaryVertex(v));
        }
        let link = self.complex.link(v);
        let c = self.centers[v];
        Ok((0..link.len())
            .map(|i| {
                let a = self.centers[link[i]] - c;
                let b = self.centers[link[(i + 1) % link.len()]] - c;
                a.cross(b).atan2(a.dot(b))
            })
            .sum())
    }

    /// Number of times the petal chain at `v` winds around its center.
    pub fn winding(&self, v: VertexId) -> Result<i64, LayoutError> {
        Ok((self.total_turning(v)? / TAU).round() as i64)
    }
}

/// Per-vertex quotient of two labels on the same complex.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMap {
    pub values: Vec<f64>,
}

impl RatioMap {
    pub fn min_max(&self, subset: &[VertexId]) -> (f64, f64) {
        subset
            .iter()
            .map(|&v| self.values[v])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            })
    }

    /// `max / min` of the ratio over `subset`; `1` means constant.
    pub fn oscillation(&self, subset: &[VertexId]) -> f64 {
        let (lo, hi) = self.min_max(subset);
        hi / lo
    }
}

/// `q(v) / p(v)` for every vertex.
pub fn ratio_map(k: &TriangulationComplex, p: &Label, q: &Label) -> Result<RatioMap, LayoutError> {
    for l in [p, q] {
        if l.len() != k.vertex_count() {
            return Err(LayoutError::MismatchedComplex {
                expected: k.vertex_count(),
                got: l.len(),
            });
        }
    }
    Ok(RatioMap {
        values: p
            .radii()
            .iter()
            .zip(q.radii())
            .map(|(a, b)| b / a)
            .collect(),
    })
}

/// Styling for [`to_svg`]. Lengths are in output pixels except `scale`,
/// which maps one packing unit to pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    pub scale: f64,
    pub stroke_width: f64,
    pub margin: f64,
    pub carrier: bool,
    pub stroke: String,
    pub fill: String,
    pub fill_opacity: f64,
    pub edge_color: String,
    pub highlight: Vec<VertexId>,
    pub highlight_color: String,
}

pub const DEFAULT_SVG_SCALE: f64 = 50.0;
pub const DEFAULT_STROKE_WIDTH: f64 = 1.0;
pub const DEFAULT_MARGIN: f64 = 10.0;
pub const DEFAULT_STROKE: &str = "#000000";
pub const DEFAULT_FILL: &str = "#1f77b4";
pub const DEFAULT_FILL_OPACITY: f64 = 0.25;
pub const DEFAULT_EDGE_COLOR: &str = "#888888";
pub const DEFAULT_HIGHLIGHT: &str = "#d62728";

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            scale: DEFAULT_SVG_SCALE,
            stroke_width: DEFAULT_STROKE_WIDTH,
            margin: DEFAULT_MARGIN,
            carrier: false,
            stroke: DEFAULT_STROKE.to_owned(),
            fill: DEFAULT_FILL.to_owned(),
            fill_opacity: DEFAULT_FILL_OPACITY,
            edge_color: DEFAULT_EDGE_COLOR.to_owned(),
            highlight: Vec::new(),
            highlight_color: DEFAULT_HIGHLIGHT.to_owned(),
        }
    }
}

/// Renders one `<circle>` per vertex (and one `<line>` per edge when the
/// carrier is enabled). Interior vertices whose petal chain winds more than
/// once are listed in the `<metadata>` element.
pub fn to_svg(packing: &Packing, opts: &SvgOptions) -> String {
    let k = &packing.complex;
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for (c, r) in packing.centers.iter().zip(packing.label.radii()) {
        x0 = x0.min(c.x - r);
        x1 = x1.max(c.x + r);
        y0 = y0.min(c.y - r);
        y1 = y1.max(c.y + r);
    }
    let s = opts.scale;
    let m = opts.margin;
    let width = (x1 - x0) * s + 2.0 * m;
    let height = (y1 - y0) * s + 2.0 * m;
    // svg y axis points down
    let px = |p: Point| ((p.x - x0) * s + m, (y1 - p.y) * s + m);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.4}" height="{height:.4}" viewBox="0 0 {width:.4} {height:.4}">"#
    );
    let windings: Vec<(VertexId, i64)> = k
        .interior_vertices()
        .into_iter()
        .filter_map(|v| packing.winding(v).ok().map(|w| (v, w)))
        .filter(|&(_, w)| w != 1)
        .collect();
    let _ = write!(out, "<metadata>");
    let _ = write!(
        out,
        "vertices={} consistency_error={:.3e}",
        k.vertex_count(),
        packing.consistency_error()
    );
    for (v, w) in &windings {
        let _ = write!(out, "; vertex {v} winding {w}");
    }
    let _ = writeln!(out, "</metadata>");

    if opts.carrier {
        let _ = writeln!(
            out,
            r#"<g stroke="{}" stroke-width="{:.4}">"#,
            opts.edge_color, opts.stroke_width
        );
        for &(u, v) in k.edges() {
            let (ax, ay) = px(packing.centers[u]);
            let (bx, by) = px(packing.centers[v]);
            let _ = writeln!(
                out,
                r#"<line x1="{ax:.4}" y1="{ay:.4}" x2="{bx:.4}" y2="{by:.4}"/>"#
            );
        }
        let _ = writeln!(out, "</g>");
    }

    let _ = writeln!(
        out,
        r#"<g stroke="{}" stroke-width="{:.4}" fill-opacity="{:.4}">"#,
        opts.stroke, opts.stroke_width, opts.fill_opacity
    );
    for v in 0..k.vertex_count() {
        let (cx, cy) = px(packing.centers[v]);
        let r = packing.label[v] * s;
        let fill = if opts.highlight.contains(&v) {
            &opts.highlight_color
        } else {
            &opts.fill
        };
        let _ = writeln!(
            out,
            r#"<circle id="v{v}" cx="{cx:.4}" cy="{cy:.4}" r="{r:.4}" fill="{fill}"/>"#
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}

pub fn write_svg(packing: &Packing, path: &Path, opts: &SvgOptions) -> Result<(), LayoutError> {
    std::fs::write(path, to_svg(packing, opts))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{hex_ball, star};
    use crate::label::{
        angle, angle_sum, solve_boundary_value, targets_from_branch_set, BranchSet, SolveOptions,
        TargetAngles,
    };
    use approx::assert_abs_diff_eq;

    fn flat(k: &TriangulationComplex) -> Packing {
        let rho = Label::constant(k.vertex_count(), 1.0).unwrap();
        layout_packing(k, &rho, 0, RootPose::default(), FaceOrder::Breadth).unwrap()
    }

    #[test]
    fn hexagonal_flower_geometry() {
        let p = flat(&star(6).unwrap());
        for i in 1..=6 {
            assert_abs_diff_eq!(p.center(0).dist(p.center(i)), 2.0, epsilon = 1e-12);
            let j = i % 6 + 1;
            assert_abs_diff_eq!(p.center(i).dist(p.center(j)), 2.0, epsilon = 1e-12);
        }
        assert_eq!(p.center(0), Point::ORIGIN);
        assert_abs_diff_eq!(p.center(1).y, 0.0, epsilon = 1e-15);
        assert!(p.consistency_error() < 1e-12);
    }

    #[test]
    fn tangent_pair_distance() {
        let k = crate::complex::build_complex(vec![[0, 1, 2]]).unwrap();
        let rho = Label::new(vec![1.0, 2.0, 0.5]).unwrap();
        let p = layout_packing(&k, &rho, 0, RootPose::default(), FaceOrder::Breadth).unwrap();
        assert_abs_diff_eq!(p.center(0).dist(p.center(1)), 3.0, epsilon = 1e-14);
        assert!(p.consistency_error() < 1e-14);
        // third vertex lies to the left of the first edge
        assert!(p.center(2).y > 0.0);
    }

    #[test]
    fn branched_flower_winds_twice() {
        let k = star(6).unwrap();
        let br = BranchSet::new(vec![(0, 1)]).unwrap();
        let t = targets_from_branch_set(&k, &br).unwrap();
        let (rho, _) = solve_boundary_value(&k, &t, &[1.0; 6], &SolveOptions::default()).unwrap();
        let p = layout_packing(&k, &rho, 0, RootPose::default(), FaceOrder::Breadth).unwrap();
        let turning = p.total_turning(0).unwrap();
        assert_abs_diff_eq!(turning, angle_sum(&k, &rho, 0).unwrap(), epsilon = 1e-9);
        assert_abs_diff_eq!(turning, 2.0 * TAU, epsilon = 1e-9);
        assert_eq!(p.winding(0).unwrap(), 2);
        assert!(matches!(
            p.total_turning(1),
            Err(LayoutError::BoundaryVertex(1))
        ));
    }

    #[test]
    fn random_label_is_inconsistent() {
        let k = hex_ball(2).unwrap();
        let radii: Vec<f64> = (0..k.vertex_count())
            .map(|i| 0.5 + ((i * 37) % 11) as f64 / 10.0)
            .collect();
        let rho = Label::new(radii).unwrap();
        let p = layout_packing(&k, &rho, 0, RootPose::default(), FaceOrder::Breadth).unwrap();
        assert!(p.consistency_error() > 1e-3);
    }

    #[test]
    fn realized_angles_match_label_angles() {
        let k = hex_ball(3).unwrap();
        let b = k.boundary_vertices().len();
        let boundary: Vec<f64> = (0..b)
            .map(|i| 1.0 + 0.4 * ((i * 3) % 5) as f64 / 5.0)
            .collect();
        let (rho, _) = solve_boundary_value(
            &k,
            &TargetAngles::flat(&k),
            &boundary,
            &SolveOptions::default().with_tol(1e-12),
        )
        .unwrap();
        let p = layout_packing(&k, &rho, 0, RootPose::default(), FaceOrder::Breadth).unwrap();
        for f in k.faces() {
            for &v in f {
                assert_abs_diff_eq!(
                    p.realized_angle(v, f).unwrap(),
                    angle(&rho, v, f).unwrap(),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn rigid_motion_of_root_pose() {
        let k = hex_ball(2).unwrap();
        let radii: Vec<f64> = (0..k.vertex_count())
            .map(|i| 0.8 + (i % 4) as f64 * 0.1)
            .collect();
        let rho = Label::new(radii).unwrap();
        let base = layout_packing(&k, &rho, 0, RootPose::default(), FaceOrder::Breadth).unwrap();
        let pose = RootPose {
            origin: Point::new(3.0, -2.0),
            rotation: 0.7,
        };
        let moved = layout_packing(&k, &rho, 0, pose, FaceOrder::Breadth).unwrap();
        for v in 0..k.vertex_count() {
            let expected = pose.origin + base.center(v).rotated(0.7);
            assert_abs_diff_eq!(moved.center(v).x, expected.x, epsilon = 1e-12);
            assert_abs_diff_eq!(moved.center(v).y, expected.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn ratio_maps() {
        let k = star(6).unwrap();
        let p = Label::new(vec![1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 1.0]).unwrap();
        let q = p.scaled(2.0).unwrap();
        let all: Vec<_> = (0..7).collect();
        let r = ratio_map(&k, &p, &q).unwrap();
        assert!(r.values.iter().all(|&x| (x - 2.0).abs() < 1e-15));
        assert_abs_diff_eq!(r.oscillation(&all), 1.0, epsilon = 1e-15);
        assert!(ratio_map(&k, &p, &p)
            .unwrap()
            .values
            .iter()
            .all(|&x| x == 1.0));
        let short = Label::constant(3, 1.0).unwrap();
        assert!(matches!(
            ratio_map(&k, &p, &short),
            Err(LayoutError::MismatchedComplex { .. })
        ));
    }

    #[test]
    fn svg_counts() {
        let p = flat(&star(6).unwrap());
        let svg = to_svg(&p, &SvgOptions::default());
        assert_eq!(svg.matches("<circle").count(), 7);
        assert_eq!(svg.matches("<line").count(), 0);
        assert!(svg.contains(&format!(r#"fill="{DEFAULT_FILL}""#)));
        assert!(svg.contains(r#"stroke-width="1.0000""#));

        let p = flat(&hex_ball(2).unwrap());
        let opts = SvgOptions {
            carrier: true,
            ..SvgOptions::default()
        };
        let svg = to_svg(&p, &opts);
        assert_eq!(svg.matches("<circle").count(), 19);
        assert_eq!(svg.matches("<line").count(), 42);
        assert_eq!(svg, to_svg(&p, &opts));
    }
}
