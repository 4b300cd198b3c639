//! File formats read and written by the command-line front end.
//!
//! Grid header (60 bytes, little-endian): three `u32` dims, three `f64`
//! spacings, three `f64` origins. A raw field file holds `dims[0]·dims[1]·dims[2]`
//! 3-vectors as `f64` little-endian triples, x varying fastest.
//!
//! ASCII mesh: the vertex count, one `x y z` line per vertex, the tet count,
//! one `a b c d` line per tet, then one `x y z` line per vertex for `v`,
//! optionally followed by one more block for `w`. Blank lines and text after
//! `#` are ignored.
//!
//! Polylines: the curve count, then per curve its point count followed by one
//! `x y z λ tet_id` line per point. Floats are written in shortest
//! round-trip form and `λ = ∞` as `inf`.
//!
//! Diagnostics: `#` summary lines, then one `kind<TAB>id<TAB>detail` record per
//! anomaly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::eigensystem::Vec3;
use crate::extended::ExtendedReal;
use crate::extraction::{Diagnostic, DiagnosticKind, Extraction, PVCurve, PolylinePoint};
use crate::mesh::{GridSpec, VertexField};

pub const GRID_HEADER_BYTES: usize = 60;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: byte {offset}: {message}")]
    Malformed { path: PathBuf, offset: usize, message: String },
}

impl FormatError {
    fn malformed(path: &Path, offset: usize, message: impl Into<String>) -> Self {
        FormatError::Malformed {
            path: path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn f64_at(bytes: &[u8], offset: usize) -> f64 {
    f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap())
}

pub fn parse_grid_header(path: &Path, bytes: &[u8]) -> Result<GridSpec, FormatError> {
    if bytes.len() < GRID_HEADER_BYTES {
        return Err(FormatError::malformed(
            path,
            bytes.len(),
            format!("header truncated, expected {GRID_HEADER_BYTES} bytes"),
        ));
    }
    if bytes.len() > GRID_HEADER_BYTES {
        return Err(FormatError::malformed(path, GRID_HEADER_BYTES, "trailing bytes after header"));
    }
    let dims: [usize; 3] = std::array::from_fn(|i| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize);
    if let Some(i) = dims.iter().position(|&d| d < 2) {
        return Err(FormatError::malformed(path, 4 * i, format!("dimension {} must be at least 2", dims[i])));
    }
    let spacing: [f64; 3] = std::array::from_fn(|i| f64_at(bytes, 12 + 8 * i));
    if let Some(i) = spacing.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(FormatError::malformed(path, 12 + 8 * i, format!("spacing {} must be positive", spacing[i])));
    }
    let origin: [f64; 3] = std::array::from_fn(|i| f64_at(bytes, 36 + 8 * i));
    if let Some(i) = origin.iter().position(|o| !o.is_finite()) {
        return Err(FormatError::malformed(path, 36 + 8 * i, "origin is not finite"));
    }
    Ok(GridSpec { dims, spacing, origin })
}

pub fn encode_grid_header(grid: &GridSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(GRID_HEADER_BYTES);
    for d in grid.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for x in grid.spacing.iter().chain(&grid.origin) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn parse_raw_field(path: &Path, bytes: &[u8], count: usize) -> Result<VertexField, FormatError> {
    let expected = count * 24;
    if bytes.len() < expected {
        return Err(FormatError::malformed(
            path,
            bytes.len() - bytes.len() % 24,
            format!("field truncated, expected {expected} bytes for {count} vectors but found {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(FormatError::malformed(path, expected, "trailing bytes after field data"));
    }
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let v = Vec3::new(f64_at(bytes, 24 * i), f64_at(bytes, 24 * i + 8), f64_at(bytes, 24 * i + 16));
        if let Some(c) = v.iter().position(|x| !x.is_finite()) {
            return Err(FormatError::malformed(path, 24 * i + 8 * c, format!("value at vertex {i} is not finite")));
        }
        values.push(v);
    }
    Ok(VertexField::new(values))
}

pub fn encode_raw_field(field: &VertexField) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.values.len() * 24);
    for v in &field.values {
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Whitespace-separated tokens with their byte offsets, one group per
/// non-empty line.
struct Lines<'a> {
    path: &'a Path,
    text: &'a str,
    lines: Vec<(usize, Vec<(usize, &'a str)>)>,
    next: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut start = 0;
        for line in text.split_inclusive('\n') {
            let body = line.split('#').next().unwrap();
            let mut tokens = Vec::new();
            let mut pos = 0;
            for tok in body.split_whitespace() {
                let at = body[pos..].find(tok).unwrap() + pos;
                tokens.push((start + at, tok));
                pos = at + tok.len();
            }
            if !tokens.is_empty() {
                lines.push((start, tokens));
            }
            start += line.len();
        }
        Lines { path, text, lines, next: 0 }
    }

    fn remaining(&self) -> usize {
        self.lines.len() - self.next
    }

    fn line(&mut self, what: &str, arity: usize) -> Result<&[(usize, &'a str)], FormatError> {
        let Some((start, tokens)) = self.lines.get(self.next) else {
            return Err(FormatError::malformed(self.path, self.text.len(), format!("unexpected end of file, expected {what}")));
        };
        if tokens.len() != arity {
            return Err(FormatError::malformed(
                self.path,
                *start,
                format!("expected {arity} values for {what}, found {}", tokens.len()),
            ));
        }
        self.next += 1;
        Ok(tokens)
    }

    fn parse<T: std::str::FromStr>(&self, (offset, tok): (usize, &str), what: &str) -> Result<T, FormatError> {
        tok.parse()
            .map_err(|_| FormatError::malformed(self.path, offset, format!("invalid {what} {tok:?}")))
    }

    fn count(&mut self, what: &str) -> Result<usize, FormatError> {
        let tok = self.line(what, 1)?[0];
        self.parse(tok, what)
    }

    fn vector(&mut self, what: &str) -> Result<Vec3, FormatError> {
        let toks = self.line(what, 3)?.to_vec();
        let mut out = Vec3::zeros();
        for (i, tok) in toks.into_iter().enumerate() {
            let x: f64 = self.parse(tok, what)?;
            if !x.is_finite() {
                return Err(FormatError::malformed(self.path, tok.0, format!("{what} is not finite")));
            }
            out[i] = x;
        }
        Ok(out)
    }
}

/// Contents of an ASCII mesh file.
pub struct AsciiMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub v: VertexField,
    pub w: Option<VertexField>,
}

pub fn parse_ascii_mesh(path: &Path, bytes: &[u8]) -> Result<AsciiMesh, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::malformed(path, e.valid_up_to(), "invalid UTF-8"))?;
    let mut lines = Lines::new(path, text);
    let nv = lines.count("vertex count")?;
    let vertices = (0..nv).map(|_| lines.vector("vertex position")).collect::<Result<Vec<_>, _>>()?;
    let nt = lines.count("tet count")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let toks = lines.line("tet indices", 4)?.to_vec();
        let mut tet = [0usize; 4];
        for (k, tok) in toks.into_iter().enumerate() {
            tet[k] = lines.parse(tok, "vertex index")?;
            if tet[k] >= nv {
                return Err(FormatError::malformed(path, tok.0, format!("vertex index {} out of range", tet[k])));
            }
        }
        tets.push(tet);
    }
    let v = VertexField::new((0..nv).map(|_| lines.vector("v value")).collect::<Result<_, _>>()?);
    let w = if lines.remaining() > 0 {
        Some(VertexField::new((0..nv).map(|_| lines.vector("w value")).collect::<Result<_, _>>()?))
    } else {
        None
    };
    if lines.remaining() > 0 {
        let start = lines.lines[lines.next].0;
        return Err(FormatError::malformed(path, start, "trailing data after the field blocks"));
    }
    Ok(AsciiMesh { vertices, tets, v, w })
}

pub fn format_ascii_mesh(vertices: &[Vec3], tets: &[[usize; 4]], v: &VertexField, w: Option<&VertexField>) -> String {
    let mut out = String::new();
    writeln!(out, "{}", vertices.len()).unwrap();
    for p in vertices {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    writeln!(out, "{}", tets.len()).unwrap();
    for t in tets {
        writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]).unwrap();
    }
    for field in std::iter::once(v).chain(w) {
        for x in &field.values {
            writeln!(out, "{} {} {}", x.x, x.y, x.z).unwrap();
        }
    }
    out
}

pub fn format_polylines(curves: &[PVCurve]) -> String {
    let mut out = String::new();
    writeln!(out, "{}", curves.len()).unwrap();
    for c in curves {
        writeln!(out, "{}", c.polyline.len()).unwrap();
        for p in &c.polyline {
            let [x, y, z] = p.position;
            writeln!(out, "{x} {y} {z} {} {}", p.lambda, p.tet_id).unwrap();
        }
    }
    out
}

pub fn parse_polylines(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<PolylinePoint>>, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::malformed(path, e.valid_up_to(), "invalid UTF-8"))?;
    let mut lines = Lines::new(path, text);
    let n = lines.count("curve count")?;
    let mut curves = Vec::with_capacity(n);
    for _ in 0..n {
        let m = lines.count("point count")?;
        let mut pts = Vec::with_capacity(m);
        for _ in 0..m {
            let toks = lines.line("polyline point", 5)?.to_vec();
            let position = [lines.parse(toks[0], "x")?, lines.parse(toks[1], "y")?, lines.parse(toks[2], "z")?];
            let lambda: f64 = lines.parse(toks[3], "lambda")?;
            pts.push(PolylinePoint {
                position,
                lambda: ExtendedReal::from_f64(lambda),
                tet_id: lines.parse(toks[4], "tet id")?,
            });
        }
        curves.push(pts);
    }
    if lines.remaining() > 0 {
        let start = lines.lines[lines.next].0;
        return Err(FormatError::malformed(path, start, "trailing data after the last curve"));
    }
    Ok(curves)
}

pub fn format_diagnostics(ex: &Extraction, tet_count: usize) -> String {
    let mut out = String::new();
    writeln!(out, "# tets {tet_count}").unwrap();
    writeln!(out, "# processed-tets {}", ex.processed_tets).unwrap();
    writeln!(out, "# degenerate-cells {}", ex.degenerate_cells).unwrap();
    let h = ex.branch_histogram;
    let h: Vec<String> = h.iter().map(usize::to_string).collect();
    writeln!(out, "# branch-histogram {}", h.join(" ")).unwrap();
    writeln!(out, "# curves {}", ex.curves.len()).unwrap();
    for d in &ex.diagnostics {
        writeln!(out, "{}\t{}\t{}", d.kind, d.id, d.detail.replace(['\t', '\n'], " ")).unwrap();
    }
    out
}

pub fn parse_diagnostics(path: &Path, bytes: &[u8]) -> Result<Vec<Diagnostic>, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::malformed(path, e.valid_up_to(), "invalid UTF-8"))?;
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.is_empty() && !body.starts_with('#') {
            let mut parts = body.splitn(3, '\t');
            let kind = match parts.next().unwrap() {
                "degenerate-face" => DiagnosticKind::DegenerateFace,
                "degenerate-cell" => DiagnosticKind::DegenerateCell,
                "ambiguous-junction" => DiagnosticKind::AmbiguousJunction,
                "unmatched-endpoint" => DiagnosticKind::UnmatchedEndpoint,
                other => return Err(FormatError::malformed(path, offset, format!("unknown diagnostic kind {other:?}"))),
            };
            let id = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| FormatError::malformed(path, offset, "missing or invalid id"))?;
            out.push(Diagnostic {
                kind,
                id,
                detail: parts.next().unwrap_or("").to_string(),
            });
        }
        offset += line.len();
    }
    Ok(out)
}
