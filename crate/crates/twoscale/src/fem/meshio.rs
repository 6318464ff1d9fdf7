//! Plain-text mesh and nodal-field formats.
//!
//! Mesh file:
//!
//! ```text
//! twoscale-mesh 1
//! domain disk <R> <cx> <cy>            (or: domain ellipse <a> <b> <cx> <cy>)
//! vertices <n>
//! <x> <y> <boundary flag 0|1>          (n lines)
//! triangles <m>
//! <i> <j> <k>                          (m lines, 0-based, counter-clockwise)
//! ```
//!
//! Field file:
//!
//! ```text
//! twoscale-field 1
//! name <identifier>
//! nodes <n> <components>
//! <c_1> ... <c_components>             (n lines)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::mesh::{triangle_geometry, Domain, Mesh};
use super::FemError;

const MESH_HEADER: &str = "twoscale-mesh 1";
const FIELD_HEADER: &str = "twoscale-field 1";

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{MESH_HEADER}").unwrap();
    match mesh.domain {
        Domain::Disk { radius, center } => writeln!(s, "domain disk {radius:e} {:e} {:e}", center[0], center[1]),
        Domain::Ellipse { a, b, center } => writeln!(s, "domain ellipse {a:e} {b:e} {:e} {:e}", center[0], center[1]),
    }
    .unwrap();
    writeln!(s, "vertices {}", mesh.n_nodes()).unwrap();
    for (p, &b) in mesh.points.iter().zip(&mesh.boundary) {
        writeln!(s, "{:e} {:e} {}", p[0], p[1], b as u8).unwrap();
    }
    writeln!(s, "triangles {}", mesh.triangles.len()).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> FemError {
        FemError::Parse {
            line: self.last,
            msg: msg.into(),
        }
    }

    fn next_tokens(&mut self) -> Result<Vec<&'a str>, FemError> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            return Ok(l.split_whitespace().collect());
        }
        Err(FemError::Parse {
            line: self.last + 1,
            msg: "unexpected end of input".into(),
        })
    }

    fn finish(&mut self) -> Result<(), FemError> {
        match self.next_tokens() {
            Ok(_) => Err(self.err("trailing content")),
            Err(_) => Ok(()),
        }
    }

    fn keyword_count(&mut self, key: &str) -> Result<usize, FemError> {
        let t = self.next_tokens()?;
        if t.len() != 2 || t[0] != key {
            return Err(self.err(format!("expected `{key} <count>`")));
        }
        t[1].parse().map_err(|_| self.err("bad count"))
    }

    fn floats(&self, toks: &[&str]) -> Result<Vec<f64>, FemError> {
        toks.iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.err(format!("bad number `{t}`"))),
            })
            .collect()
    }
}

pub fn read_mesh(text: &str) -> Result<Mesh, FemError> {
    let mut lines = Lines::new(text);
    if lines.next_tokens()?.join(" ") != MESH_HEADER {
        return Err(lines.err("missing header `twoscale-mesh 1`"));
    }
    let t = lines.next_tokens()?;
    let domain = match (t.first().copied(), t.len()) {
        (Some("domain"), 5) if t[1] == "disk" => {
            let v = lines.floats(&t[2..])?;
            Domain::Disk {
                radius: v[0],
                center: [v[1], v[2]],
            }
        }
        (Some("domain"), 6) if t[1] == "ellipse" => {
            let v = lines.floats(&t[2..])?;
            Domain::Ellipse {
                a: v[0],
                b: v[1],
                center: [v[2], v[3]],
            }
        }
        _ => return Err(lines.err("expected domain descriptor")),
    };
    if !domain.is_valid() {
        return Err(lines.err("invalid domain parameters"));
    }
    let n = lines.keyword_count("vertices")?;
    let mut points = Vec::new();
    let mut boundary = Vec::new();
    for _ in 0..n {
        let t = lines.next_tokens()?;
        if t.len() != 3 {
            return Err(lines.err("vertex line needs `x y flag`"));
        }
        let v = lines.floats(&t[..2])?;
        let flag = match t[2] {
            "0" => false,
            "1" => true,
            _ => return Err(lines.err("boundary flag must be 0 or 1")),
        };
        points.push([v[0], v[1]]);
        boundary.push(flag);
    }
    let m = lines.keyword_count("triangles")?;
    let mut triangles = Vec::new();
    for _ in 0..m {
        let t = lines.next_tokens()?;
        if t.len() != 3 {
            return Err(lines.err("triangle line needs three indices"));
        }
        let mut idx = [0usize; 3];
        for k in 0..3 {
            idx[k] = t[k].parse().map_err(|_| lines.err("bad index"))?;
            if idx[k] >= n {
                return Err(lines.err(format!("index {} out of range", idx[k])));
            }
        }
        let (area, _) = triangle_geometry([points[idx[0]], points[idx[1]], points[idx[2]]]);
        if !(area > 0.0) {
            return Err(lines.err("triangle not positively oriented"));
        }
        triangles.push(idx);
    }
    lines.finish()?;
    Ok(Mesh::from_parts(points, triangles, boundary, domain))
}

/// A named nodal field with one or more components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub name: String,
    pub components: usize,
    /// Row-major, `values[node * components + c]`.
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn scalar(name: &str, values: &[f64]) -> Self {
        NodalField {
            name: name.to_string(),
            components: 1,
            values: values.to_vec(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.components.max(1)
    }
}

pub fn write_field(field: &NodalField) -> String {
    let mut s = String::new();
    writeln!(s, "{FIELD_HEADER}").unwrap();
    writeln!(s, "name {}", field.name).unwrap();
    writeln!(s, "nodes {} {}", field.n_nodes(), field.components).unwrap();
    for row in field.values.chunks(field.components) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    s
}

pub fn read_field(text: &str) -> Result<NodalField, FemError> {
    let mut lines = Lines::new(text);
    if lines.next_tokens()?.join(" ") != FIELD_HEADER {
        return Err(lines.err("missing header `twoscale-field 1`"));
    }
    let t = lines.next_tokens()?;
    if t.len() != 2 || t[0] != "name" {
        return Err(lines.err("expected `name <identifier>`"));
    }
    let name = t[1].to_string();
    let t = lines.next_tokens()?;
    if t.len() != 3 || t[0] != "nodes" {
        return Err(lines.err("expected `nodes <n> <components>`"));
    }
    let n: usize = t[1].parse().map_err(|_| lines.err("bad node count"))?;
    let c: usize = t[2].parse().map_err(|_| lines.err("bad component count"))?;
    if c == 0 || c > 16 {
        return Err(lines.err("components must be in 1..=16"));
    }
    let mut values = Vec::new();
    for _ in 0..n {
        let t = lines.next_tokens()?;
        if t.len() != c {
            return Err(lines.err(format!("expected {c} values")));
        }
        values.extend(lines.floats(&t)?);
    }
    lines.finish()?;
    Ok(NodalField {
        name,
        components: c,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesher::mesh_domain;
    use proptest::prelude::*;

    #[test]
    fn mesh_round_trip() {
        let d = Domain::Ellipse {
            a: 1.5,
            b: 1.0,
            center: [0.25, -0.5],
        };
        let m = mesh_domain(&d, 0.2).unwrap();
        let back = read_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn field_round_trip() {
        let f = NodalField {
            name: "grad".into(),
            components: 2,
            values: vec![1.0, -2.5, 1e-300, 3.25],
        };
        assert_eq!(read_field(&write_field(&f)).unwrap(), f);
    }

    #[test]
    fn rejects_bad_meshes() {
        let base = "twoscale-mesh 1\ndomain disk 1 0 0\nvertices 3\n0 0 0\n1 0 1\n0 1 1\ntriangles 1\n";
        assert!(read_mesh(&format!("{base}0 1 2\n")).is_ok());
        let cases = [
            format!("{base}0 2 1\n"),
            format!("{base}0 1 3\n"),
            format!("{base}0 1 2\nextra\n"),
            base.replace("disk 1", "disk -1"),
            base.replace("0 0 0", "0 nan 0"),
            base.to_string(),
        ];
        for c in cases {
            assert!(matches!(read_mesh(&c), Err(FemError::Parse { .. })), "{c}");
        }
    }

    proptest! {
        #[test]
        fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
            let _ = read_mesh(&s);
            let _ = read_field(&s);
        }

        #[test]
        fn header_prefixed_text_never_panics(body in "[0-9 .\\-e\\n]{0,200}") {
            let _ = read_mesh(&format!("twoscale-mesh 1\ndomain disk 1 0 0\n{body}"));
            let _ = read_field(&format!("twoscale-field 1\nname x\n{body}"));
        }
    }
}
