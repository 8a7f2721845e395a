//! Line-oriented text formats.
//!
//! ```text
//! CPX 1            LBL 1              BRS 1
//! V <id> <0|1>     L <id> <radius>    B <id> <order>
//! F <a> <b> <c>
//! ```
//!
//! Fields are whitespace separated; blank lines and `#` comments are
//! ignored. `V` lines carry the boundary flag (1 = boundary) and must agree
//! with the classification computed from the faces.

use std::fmt::Write as _;

use thiserror::Error;

use crate::complex::{ComplexError, TriangulationComplex, VertexId};
use crate::label::{BranchSet, Label, LabelError};
use crate::network::{ResistanceProfile, ReturnEstimate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("missing header `{0}`")]
    MissingHeader(&'static str),
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("vertex {0} listed more than once")]
    Duplicate(VertexId),
    #[error("no entry for vertex {0}")]
    MissingEntry(VertexId),
    #[error("boundary flag of vertex {0} disagrees with the faces")]
    BoundaryMismatch(VertexId),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Label(#[from] LabelError),
}

// (line number, fields) for every meaningful line after the header
fn records<'a>(
    text: &'a str,
    header: &'static str,
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l.split_whitespace().eq(header.split_whitespace()) => {}
        _ => return Err(FormatError::MissingHeader(header)),
    }
    Ok(lines.map(|(i, l)| (i, l.split_whitespace().collect())))
}

fn field<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T, FormatError> {
    s.parse().map_err(|_| FormatError::BadLine {
        line,
        message: format!("invalid {what} `{s}`"),
    })
}

fn bad(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::BadLine {
        line,
        message: message.into(),
    }
}

pub fn write_cpx(k: &TriangulationComplex) -> String {
    let mut out = String::from("CPX 1\n");
    for v in 0..k.vertex_count() {
        let _ = writeln!(out, "V {v} {}", k.is_boundary(v) as u8);
    }
    for [a, b, c] in k.faces() {
        let _ = writeln!(out, "F {a} {b} {c}");
    }
    out
}

pub fn parse_cpx(text: &str) -> Result<TriangulationComplex, FormatError> {
    let mut flags: Vec<(usize, VertexId, bool)> = Vec::new();
    let mut faces = Vec::new();
    for (line, fields) in records(text, "CPX 1")? {
        match fields.as_slice() {
            ["V", id, flag] => {
                let id = field(line, id, "vertex id")?;
                let flag = match *flag {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(line, format!("invalid boundary flag `{other}`"))),
                };
                flags.push((line, id, flag));
            }
            ["F", a, b, c] => faces.push([
                field(line, a, "vertex id")?,
                field(line, b, "vertex id")?,
                field(line, c, "vertex id")?,
            ]),
            _ => return Err(bad(line, "expected `V <id> <0|1>` or `F <a> <b> <c>`")),
        }
    }
    let k = TriangulationComplex::from_faces(faces)?;
    let mut seen = vec![false; k.vertex_count()];
    for (line, id, flag) in flags {
        if id >= k.vertex_count() {
            return Err(bad(line, format!("vertex {id} is not on any face")));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(FormatError::Duplicate(id));
        }
        if flag != k.is_boundary(id) {
            return Err(FormatError::BoundaryMismatch(id));
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(FormatError::MissingEntry(v));
    }
    Ok(k)
}

pub fn write_lbl(rho: &Label) -> String {
    let mut out = String::from("LBL 1\n");
    for (v, r) in rho.radii().iter().enumerate() {
        let _ = writeln!(out, "L {v} {r}");
    }
    out
}

/// Entries of a `.lbl` file as `(vertex, radius)` pairs, in file order.
pub fn parse_lbl_entries(text: &str) -> Result<Vec<(VertexId, f64)>, FormatError> {
    records(text, "LBL 1")?
        .map(|(line, fields)| match fields.as_slice() {
            ["L", id, r] => Ok((field(line, id, "vertex id")?, field(line, r, "radius")?)),
            _ => Err(bad(line, "expected `L <id> <radius>`")),
        })
        .collect()
}

/// A full label: every vertex in `0..n` exactly once.
pub fn parse_lbl(text: &str) -> Result<Label, FormatError> {
    let entries = parse_lbl_entries(text)?;
    let n = entries.iter().map(|&(v, _)| v + 1).max().unwrap_or(0);
    let mut radii = vec![None; n];
    for (v, r) in entries {
        if radii[v].replace(r).is_some() {
            return Err(FormatError::Duplicate(v));
        }
    }
    let radii = radii
        .into_iter()
        .enumerate()
        .map(|(v, r)| r.ok_or(FormatError::MissingEntry(v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Label::new(radii)?)
}

pub fn write_brs(br: &BranchSet) -> String {
    let mut out = String::from("BRS 1\n");
    for (v, n) in br.entries() {
        let _ = writeln!(out, "B {v} {n}");
    }
    out
}

pub fn parse_brs(text: &str) -> Result<BranchSet, FormatError> {
    let entries = records(text, "BRS 1")?
        .map(|(line, fields)| match fields.as_slice() {
            ["B", id, n] => Ok((field(line, id, "vertex id")?, field(line, n, "order")?)),
            _ => Err(bad(line, "expected `B <id> <order>`")),
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(BranchSet::new(entries)?)
}

/// `level,resistance`
pub fn profile_csv(profile: &ResistanceProfile) -> String {
    let mut out = String::from("level,resistance\n");
    for (level, r) in &profile.levels {
        let _ = writeln!(out, "{level},{r:.12}");
    }
    out
}

/// `trials,estimate,stderr`
pub fn return_csv(est: &ReturnEstimate) -> String {
    format!(
        "trials,estimate,stderr\n{},{:.6},{:.6}\n",
        est.trials, est.estimate, est.stderr
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{hex_ball, star};
    use proptest::prelude::*;

    #[test]
    fn star_file() {
        let text = write_cpx(&star(6).unwrap());
        assert!(text.starts_with("CPX 1\nV 0 0\nV 1 1\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with('V')).count(), 7);
        assert_eq!(text.lines().filter(|l| l.starts_with('F')).count(), 6);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# a triangle\nCPX 1\n\nV 0 1\nV 1 1 # corner\nV 2 1\nF 0 1 2\n";
        let k = parse_cpx(text).unwrap();
        assert_eq!(k.face_count(), 1);
    }

    #[test]
    fn cpx_errors() {
        assert_eq!(
            parse_cpx("F 0 1 2\n"),
            Err(FormatError::MissingHeader("CPX 1"))
        );
        assert!(matches!(
            parse_cpx("CPX 1\nV 0 1\nV 1 1\nV 2 1\nF 0 1 x\n"),
            Err(FormatError::BadLine { line: 5, .. })
        ));
        assert_eq!(
            parse_cpx("CPX 1\nV 0 0\nV 1 1\nV 2 1\nF 0 1 2\n"),
            Err(FormatError::BoundaryMismatch(0))
        );
        assert_eq!(
            parse_cpx("CPX 1\nV 0 1\nV 1 1\nF 0 1 2\n"),
            Err(FormatError::MissingEntry(2))
        );
        assert!(matches!(
            parse_cpx("CPX 1\nV 0 1\nV 1 1\nV 2 1\nF 0 1 2\nF 0 1 3\nV 3 1\n"),
            Err(FormatError::Complex(ComplexError::OrientationConflict(
                0, 1
            )))
        ));
    }

    #[test]
    fn lbl_and_brs() {
        let rho = Label::new(vec![0.1547005383792515, 1.0, 2.5]).unwrap();
        assert_eq!(parse_lbl(&write_lbl(&rho)).unwrap(), rho);
        assert_eq!(
            parse_lbl("LBL 1\nL 0 1\nL 0 2\n"),
            Err(FormatError::Duplicate(0))
        );
        assert_eq!(
            parse_lbl("LBL 1\nL 1 1\n"),
            Err(FormatError::MissingEntry(0))
        );
        assert!(matches!(
            parse_lbl("LBL 1\nL 0 -1\n"),
            Err(FormatError::Label(_))
        ));

        let br = BranchSet::new(vec![(0, 1), (5, 2)]).unwrap();
        assert_eq!(parse_brs(&write_brs(&br)).unwrap(), br);
        assert!(parse_brs("BRS 1\nB 0 0\n").is_err());
    }

    #[test]
    fn csv_headers() {
        let p = ResistanceProfile {
            levels: vec![(1, 0.5), (2, 0.75)],
        };
        assert_eq!(profile_csv(&p).lines().next(), Some("level,resistance"));
        let e = ReturnEstimate {
            trials: 10,
            estimate: 0.5,
            stderr: 0.1,
        };
        assert_eq!(
            return_csv(&e),
            "trials,estimate,stderr\n10,0.500000,0.100000\n"
        );
    }

    proptest! {
        #[test]
        fn generated_complexes_round_trip(n in 1usize..6, m in 3usize..20) {
            for k in [hex_ball(n).unwrap(), star(m).unwrap()] {
                let parsed = parse_cpx(&write_cpx(&k)).unwrap();
                prop_assert_eq!(&parsed, &k);
                let rebuilt = TriangulationComplex::from_faces(k.faces().to_vec()).unwrap();
                prop_assert_eq!(rebuilt, k);
            }
        }

        #[test]
        fn labels_round_trip(radii in proptest::collection::vec(1e-6f64..1e6, 1..50)) {
            let rho = Label::new(radii).unwrap();
            prop_assert_eq!(parse_lbl(&write_lbl(&rho)).unwrap(), rho);
        }
    }
}
