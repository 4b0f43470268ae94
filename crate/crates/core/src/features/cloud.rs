//! Point clouds and their readers (ASCII PLY, plain `x y z [nx ny nz]`).

use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Normal = Vector3<f64>;

const UNIT_TOLERANCE: f64 = 1e-6;

/// A segmented object view. Coordinates are in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    normals: Option<Vec<Normal>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        Self::build(points, None)
    }

    /// Normals must be unit length (within 1e-6), one per point.
    pub fn with_normals(points: Vec<Point>, normals: Vec<Normal>) -> Result<Self> {
        Self::build(points, Some(normals))
    }

    fn build(points: Vec<Point>, normals: Option<Vec<Normal>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("point cloud has no points".into()));
        }
        if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Validation("point cloud has non-finite coordinates".into()));
        }
        if let Some(normals) = &normals {
            if normals.len() != points.len() {
                return Err(Error::Structural {
                    what: "normals",
                    expected: points.len(),
                    actual: normals.len(),
                });
            }
            if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > UNIT_TOLERANCE) {
                return Err(Error::Validation(format!(
                    "normal {i} has length {} (expected unit length)",
                    normals[i].norm()
                )));
            }
        }
        Ok(Self { points, normals })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Normal]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads `.ply` (ASCII) or, for any other extension, the plain whitespace format.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let is_ply = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
        if is_ply {
            parse_ply(&text, path)
        } else {
            parse_xyz(&text, path)
        }
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn assemble(rows: Vec<(Point, Option<Normal>)>, path: &Path) -> Result<PointCloud> {
    let has_normals = rows.first().is_some_and(|r| r.1.is_some());
    let mut points = Vec::with_capacity(rows.len());
    let mut normals = Vec::with_capacity(if has_normals { rows.len() } else { 0 });
    for (i, (p, n)) in rows.into_iter().enumerate() {
        points.push(p);
        if has_normals {
            let n = n.ok_or_else(|| parse_error(path, 0, format!("point {i} lacks a normal")))?;
            let len = n.norm();
            if !(len > 0.0 && len.is_finite()) {
                return Err(parse_error(path, 0, format!("point {i} has a zero-length normal")));
            }
            normals.push(n / len);
        }
    }
    if has_normals {
        PointCloud::with_normals(points, normals)
    } else {
        PointCloud::new(points)
    }
}

fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let values: Vec<f64> = content
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_error(path, i + 1, "expected numeric columns"))?;
        let row = match values.len() {
            3 => (Point::new(values[0], values[1], values[2]), None),
            6 => (
                Point::new(values[0], values[1], values[2]),
                Some(Normal::new(values[3], values[4], values[5])),
            ),
            n => return Err(parse_error(path, i + 1, format!("expected 3 or 6 columns, got {n}"))),
        };
        if let Some(first) = rows.first() {
            let first: &(Point, Option<Normal>) = first;
            if first.1.is_some() != row.1.is_some() {
                return Err(parse_error(path, i + 1, "inconsistent column count"));
            }
        }
        rows.push(row);
    }
    assemble(rows, path)
}

fn parse_ply(text: &str, path: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_error(path, 1, "missing 'ply' magic")),
    }

    let mut vertex_count = None;
    let mut properties: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut elements_before_vertex = false;
    let mut header_end = None;
    for (i, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(parse_error(path, i + 1, format!("unsupported PLY format {fmt}")));
                }
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(
                        count
                            .parse::<usize>()
                            .map_err(|_| parse_error(path, i + 1, "bad vertex count"))?,
                    );
                } else if vertex_count.is_none() {
                    elements_before_vertex = true;
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(parse_error(path, i + 1, "list properties on vertices are not supported"));
            }
            ["property", _, name] if in_vertex => properties.push((*name).to_string()),
            ["end_header"] => {
                header_end = Some(i + 1);
                break;
            }
            _ => {}
        }
    }
    let header_end = header_end.ok_or_else(|| parse_error(path, 0, "missing end_header"))?;
    let count = vertex_count.ok_or_else(|| parse_error(path, header_end, "no vertex element"))?;
    if elements_before_vertex {
        return Err(parse_error(path, header_end, "vertex element must come first"));
    }
    let column = |name: &str| properties.iter().position(|p| p == name);
    let (x, y, z) = match (column("x"), column("y"), column("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(parse_error(path, header_end, "vertex element lacks x/y/z")),
    };
    let normal_cols = match (column("nx"), column("ny"), column("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };

    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()).take(count) {
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_error(path, i + 1, "non-numeric vertex value"))?;
        if values.len() < properties.len() {
            return Err(parse_error(path, i + 1, "too few vertex values"));
        }
        let point = Point::new(values[x], values[y], values[z]);
        let normal = normal_cols.map(|(a, b, c)| Normal::new(values[a], values[b], values[c]));
        rows.push((point, normal));
    }
    if rows.len() != count {
        return Err(parse_error(path, 0, format!("expected {count} vertices, found {}", rows.len())));
    }
    assemble(rows, path)
}
