//! Oriented triangulations of a closed disc.
//!
//! A [`TriangulationComplex`] is built from a list of positively oriented
//! faces and validated on construction: every edge lies in one or two faces,
//! the two faces of an interior edge traverse it in opposite directions, the
//! complex is connected with Euler characteristic 1, and every vertex link is
//! a single cycle (interior vertex) or a single path (boundary vertex).
//!
//! Links are stored in positive cyclic order, derived from face orientation:
//! for a face `(v, a, b)` the neighbor `b` follows `a` around `v`.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

/// Index of a vertex, dense in `0..vertex_count`.
pub type VertexId = usize;

/// A positively oriented triangle.
pub type Face = [VertexId; 3];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComplexError {
    #[error("complex has no faces")]
    Empty,
    #[error("face {index} repeats a vertex")]
    InvalidFace { index: usize },
    #[error("vertex {0} does not belong to any face")]
    DanglingVertex(VertexId),
    #[error("edge ({0}, {1}) lies in more than two faces")]
    NonManifoldEdge(VertexId, VertexId),
    #[error("faces at edge ({0}, {1}) have conflicting orientations")]
    OrientationConflict(VertexId, VertexId),
    #[error("complex is not connected")]
    Disconnected,
    #[error("complex is not a disc: Euler characteristic {0}, expected 1")]
    NotADisc(i64),
    #[error("link of vertex {0} is neither a single cycle nor a single path")]
    NonManifoldVertex(VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("star needs at least 3 petals, got {0}")]
    InvalidDegree(usize),
}

/// A validated triangulation of a closed disc.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationComplex {
    faces: Vec<Face>,
    boundary: Vec<bool>,
    links: Vec<Vec<VertexId>>,
    faces_at: Vec<Vec<usize>>,
    edges: Vec<(VertexId, VertexId)>,
}

fn rotate_to(face: &Face, v: VertexId) -> Face {
    let [a, b, c] = *face;
    if a == v {
        [a, b, c]
    } else if b == v {
        [b, c, a]
    } else {
        [c, a, b]
    }
}

fn undirected(a: VertexId, b: VertexId) -> (VertexId, VertexId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriangulationComplex {
    /// Validates `faces` and computes boundary flags and cyclic links.
    pub fn from_faces(faces: Vec<Face>) -> Result<Self, ComplexError> {
        if faces.is_empty() {
            return Err(ComplexError::Empty);
        }
        for (index, f) in faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(ComplexError::InvalidFace { index });
            }
        }
        let vertex_count = faces.iter().flatten().copied().max().unwrap_or(0) + 1;

        let mut faces_at = vec![Vec::new(); vertex_count];
        for (i, f) in faces.iter().enumerate() {
            for &v in f {
                faces_at[v].push(i);
            }
        }
        if let Some(v) = faces_at.iter().position(Vec::is_empty) {
            return Err(ComplexError::DanglingVertex(v));
        }

        // Edge incidence: undirected multiplicity first, then orientation.
        let mut directed: HashMap<(VertexId, VertexId), usize> = HashMap::new();
        let mut undirected_count: HashMap<(VertexId, VertexId), usize> = HashMap::new();
        for f in &faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *directed.entry((a, b)).or_default() += 1;
                *undirected_count.entry(undirected(a, b)).or_default() += 1;
            }
        }
        let mut edges: Vec<_> = undirected_count.keys().copied().collect();
        edges.sort_unstable();
        for &(a, b) in &edges {
            if undirected_count[&(a, b)] > 2 {
                return Err(ComplexError::NonManifoldEdge(a, b));
            }
        }
        for &(a, b) in &edges {
            if directed.get(&(a, b)).copied().unwrap_or(0) > 1
                || directed.get(&(b, a)).copied().unwrap_or(0) > 1
            {
                return Err(ComplexError::OrientationConflict(a, b));
            }
        }

        // Connectivity through shared vertices.
        let mut seen = vec![false; faces.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(fi) = queue.pop_front() {
            for &v in &faces[fi] {
                for &g in &faces_at[v] {
                    if !seen[g] {
                        seen[g] = true;
                        queue.push_back(g);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(ComplexError::Disconnected);
        }

        let euler = vertex_count as i64 - edges.len() as i64 + faces.len() as i64;
        if euler != 1 {
            return Err(ComplexError::NotADisc(euler));
        }

        let mut links = Vec::with_capacity(vertex_count);
        let mut boundary = Vec::with_capacity(vertex_count);
        for (v, at) in faces_at.iter().enumerate() {
            let (link, is_boundary) = Self::link_of(v, &faces, at)?;
            links.push(link);
            boundary.push(is_boundary);
        }

        Ok(Self {
            faces,
            boundary,
            links,
            faces_at,
            edges,
        })
    }

    fn link_of(
        v: VertexId,
        faces: &[Face],
        incident: &[usize],
    ) -> Result<(Vec<VertexId>, bool), ComplexError> {
        let mut next: HashMap<VertexId, VertexId> = HashMap::new();
        let mut targets: HashSet<VertexId> = HashSet::new();
        for &fi in incident {
            let [_, a, b] = rotate_to(&faces[fi], v);
            if next.insert(a, b).is_some() || !targets.insert(b) {
                return Err(ComplexError::NonManifoldVertex(v));
            }
        }
        let mut nodes: Vec<VertexId> = next.keys().chain(targets.iter()).copied().collect();
        nodes.sort_unstable();
        nodes.dedup();

        let starts: Vec<VertexId> = nodes
            .iter()
            .copied()
            .filter(|a| next.contains_key(a) && !targets.contains(a))
            .collect();
        let (start, is_boundary) = match starts.as_slice() {
            [] => (nodes[0], false),
            [s] => (*s, true),
            _ => return Err(ComplexError::NonManifoldVertex(v)),
        };

        let mut link = vec![start];
        let mut cur = start;
        while let Some(&n) = next.get(&cur) {
            if n == start {
                break;
            }
            link.push(n);
            cur = n;
            if link.len() > nodes.len() {
                return Err(ComplexError::NonManifoldVertex(v));
            }
        }
        if link.len() != nodes.len() {
            return Err(ComplexError::NonManifoldVertex(v));
        }
        Ok((link, is_boundary))
    }

    pub fn vertex_count(&self) -> usize {
        self.links.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Undirected edges as `(low, high)` pairs, sorted.
    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v < self.vertex_count()
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.boundary[v]
    }

    pub fn is_interior(&self, v: VertexId) -> bool {
        !self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<VertexId> {
        (0..self.vertex_count())
            .filter(|&v| self.boundary[v])
            .collect()
    }

    pub fn interior_vertices(&self) -> Vec<VertexId> {
        (0..self.vertex_count())
            .filter(|&v| !self.boundary[v])
            .collect()
    }

    /// Number of neighbors of `v`.
    pub fn degree(&self, v: VertexId) -> usize {
        self.links[v].len()
    }

    /// Neighbors of `v` in positive cyclic order: a cycle for interior
    /// vertices, a path for boundary vertices.
    pub fn neighbors_cyclic(&self, v: VertexId) -> Result<&[VertexId], ComplexError> {
        self.links
            .get(v)
            .map(Vec::as_slice)
            .ok_or(ComplexError::UnknownVertex(v))
    }

    /// Same as [`neighbors_cyclic`](Self::neighbors_cyclic) for a vertex
    /// known to be in range.
    pub fn link(&self, v: VertexId) -> &[VertexId] {
        &self.links[v]
    }

    /// Indices into [`faces`](Self::faces) of the faces containing `v`.
    pub fn faces_at(&self, v: VertexId) -> &[usize] {
        &self.faces_at[v]
    }

    /// The faces containing `v`, each rotated so that `v` comes first.
    pub fn faces_rotated_at(&self, v: VertexId) -> impl Iterator<Item = Face> + '_ {
        self.faces_at[v]
            .iter()
            .map(move |&fi| rotate_to(&self.faces[fi], v))
    }

    /// The vertices completing the edge `{v, w}` to a face: the one following
    /// `w` in the link of `v`, and the one preceding it. Either is `None` when
    /// the edge is a boundary edge on that side.
    pub fn opposite_vertices(
        &self,
        v: VertexId,
        w: VertexId,
    ) -> Option<(Option<VertexId>, Option<VertexId>)> {
        let link = &self.links[v];
        let i = link.iter().position(|&x| x == w)?;
        let n = link.len();
        if self.boundary[v] {
            let after = (i + 1 < n).then(|| link[i + 1]);
            let before = (i > 0).then(|| link[i - 1]);
            Some((after, before))
        } else {
            Some((Some(link[(i + 1) % n]), Some(link[(i + n - 1) % n])))
        }
    }

    pub fn is_boundary_edge(&self, v: VertexId, w: VertexId) -> bool {
        matches!(
            self.opposite_vertices(v, w),
            Some((None, _)) | Some((_, None))
        )
    }
}

/// Validates a face list into a complex.
pub fn build_complex(faces: Vec<Face>) -> Result<TriangulationComplex, ComplexError> {
    TriangulationComplex::from_faces(faces)
}

/// A single flower: center `0` with petals `1..=m` in positive cyclic order.
pub fn star(m: usize) -> Result<TriangulationComplex, ComplexError> {
    if m < 3 {
        return Err(ComplexError::InvalidDegree(m));
    }
    let faces = (1..=m).map(|i| [0, i, i % m + 1]).collect();
    TriangulationComplex::from_faces(faces)
}

/// Number of vertices of [`hex_ball`]`(n)`.
pub fn hex_ball_vertex_count(n: usize) -> usize {
    1 + 3 * n * (n + 1)
}

fn hex_distance(q: i64, r: i64) -> i64 {
    (q.abs() + r.abs() + (q + r).abs()) / 2
}

fn hex_embed(q: i64, r: i64) -> (f64, f64) {
    (q as f64 + 0.5 * r as f64, r as f64 * 3f64.sqrt() / 2.0)
}

/// Lattice coordinates of the hex-ball vertices, in vertex-id order: ring by
/// ring outward from the center, each ring counter-clockwise from the
/// positive horizontal axis.
pub fn hex_ball_coordinates(n: usize) -> Vec<(i64, i64)> {
    let n = n as i64;
    let mut coords = vec![(0, 0)];
    for ring in 1..=n {
        let mut cells: Vec<(i64, i64)> = (-ring..=ring)
            .flat_map(|q| (-ring..=ring).map(move |r| (q, r)))
            .filter(|&(q, r)| hex_distance(q, r) == ring)
            .collect();
        cells.sort_by(|a, b| {
            let angle = |&(q, r): &(i64, i64)| {
                let (x, y) = hex_embed(q, r);
                y.atan2(x).rem_euclid(std::f64::consts::TAU)
            };
            angle(a).total_cmp(&angle(b))
        });
        coords.extend(cells);
    }
    coords
}

/// Combinatorial ball of radius `n` in the regular triangular lattice
/// (every interior vertex has six neighbors). Vertex numbering is stable
/// across `n`, so `hex_ball(n)` is a sub-complex of `hex_ball(n + 1)` and its
/// faces form a prefix of the larger face list.
pub fn hex_ball(n: usize) -> Result<TriangulationComplex, ComplexError> {
    if n == 0 {
        return Err(ComplexError::Empty);
    }
    let coords = hex_ball_coordinates(n);
    let index: HashMap<(i64, i64), VertexId> =
        coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut faces = Vec::with_capacity(6 * n * n);
    for &(q, r) in &coords {
        let up = [(q, r), (q + 1, r), (q, r + 1)];
        let down = [(q, r), (q, r + 1), (q - 1, r + 1)];
        for tri in [up, down] {
            if let [Some(&a), Some(&b), Some(&c)] = tri.map(|p| index.get(&p)) {
                faces.push(canonical_face([a, b, c]));
            }
        }
    }
    faces.sort_by_key(|f| (f[0].max(f[1]).max(f[2]), *f));
    TriangulationComplex::from_faces(faces)
}

/// Rotates a face so that its smallest vertex comes first, keeping orientation.
pub fn canonical_face(face: Face) -> Face {
    let min = *face.iter().min().expect("three vertices");
    rotate_to(&face, min)
}

/// Planar positions of hex-ball vertices in the unit-spacing lattice.
pub fn hex_ball_positions(n: usize) -> Vec<(f64, f64)> {
    hex_ball_coordinates(n)
        .into_iter()
        .map(|(q, r)| hex_embed(q, r))
        .collect()
}
