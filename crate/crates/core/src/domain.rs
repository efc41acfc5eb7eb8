//! Target sample sets and the physical <-> normalized coordinate transform.
//!
//! The optimizer never sees physical coordinates. Every sample `w` is mapped
//! to `(w - offset) / e`, where `offset` is the minimum corner of the sample
//! bounding box and `e` is the largest axis span of that box, so the samples
//! occupy `[0, 1]^d` whatever their physical size or location. The extent is
//! fixed from the target samples and never recomputed, even when trajectory
//! points leave the bounding box during optimization.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::scalar::Scalar;

/// Weighted target samples in physical units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSamples<F> {
    points: PointSet<F>,
    weights: Vec<F>,
    uniform: bool,
}

impl<F: Scalar> DomainSamples<F> {
    /// Uniformly weighted samples.
    pub fn uniform(points: PointSet<F>) -> Result<Self> {
        Self::new(points, None)
    }

    /// Samples with optional nonnegative weights, normalized to sum to one.
    pub fn new(points: PointSet<F>, weights: Option<Vec<F>>) -> Result<Self> {
        let m = points.len();
        if m < 2 {
            return Err(Error::DegenerateDomain(format!(
                "need at least 2 samples, got {m}"
            )));
        }
        if !points.is_finite() {
            return Err(Error::InvalidInput("sample coordinates must be finite".into()));
        }
        let (weights, uniform) = match weights {
            None => (vec![F::one() / F::lit(m as f64); m], true),
            Some(w) => {
                if w.len() != m {
                    return Err(Error::InvalidInput(format!(
                        "{} weights for {m} samples",
                        w.len()
                    )));
                }
                if w.iter().any(|&x| !x.is_finite() || x < F::zero()) {
                    return Err(Error::InvalidInput(
                        "weights must be finite and nonnegative".into(),
                    ));
                }
                let total: F = w.iter().copied().sum();
                if total <= F::zero() {
                    return Err(Error::InvalidInput("weights sum to zero".into()));
                }
                (w.into_iter().map(|x| x / total).collect(), false)
            }
        };
        Ok(Self {
            points,
            weights,
            uniform,
        })
    }

    pub fn points(&self) -> &PointSet<F> {
        &self.points
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// True when the weights were defaulted to `1/M`.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Same samples with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: F) -> Self {
        Self {
            points: self.points.map(|x| x * s),
            weights: self.weights.clone(),
            uniform: self.uniform,
        }
    }
}

/// Largest per-axis span of the sample bounding box.
pub fn compute_extent<F: Scalar>(samples: &DomainSamples<F>) -> Result<F> {
    let (lo, hi) = samples.points().bounding_box();
    let e = lo
        .iter()
        .zip(&hi)
        .fold(F::zero(), |acc, (&l, &h)| acc.max(h - l));
    if e > F::zero() && e.is_finite() {
        Ok(e)
    } else {
        Err(Error::DegenerateDomain("all samples coincide".into()))
    }
}

/// Samples together with the dimensionless frame they define.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizedDomain<F> {
    extent: F,
    offset: Vec<F>,
    source: DomainSamples<F>,
    normalized: PointSet<F>,
}

impl<F: Scalar> NormalizedDomain<F> {
    pub fn new(source: DomainSamples<F>) -> Result<Self> {
        let extent = compute_extent(&source)?;
        let (offset, _) = source.points().bounding_box();
        let mut normalized = source.points().clone();
        for i in 0..normalized.len() {
            for (x, &o) in normalized.row_mut(i).iter_mut().zip(&offset) {
                *x = (*x - o) / extent;
            }
        }
        Ok(Self {
            extent,
            offset,
            source,
            normalized,
        })
    }

    pub fn extent(&self) -> F {
        self.extent
    }

    pub fn offset(&self) -> &[F] {
        &self.offset
    }

    pub fn source(&self) -> &DomainSamples<F> {
        &self.source
    }

    pub fn normalized_points(&self) -> &PointSet<F> {
        &self.normalized
    }

    pub fn weights(&self) -> &[F] {
        self.source.weights()
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn frame(&self) -> Frame<F> {
        Frame {
            offset: self.offset.clone(),
            scale: self.extent,
        }
    }

    pub fn normalize(&self, point: &[F]) -> Result<Vec<F>> {
        self.check_dim(point)?;
        Ok(point
            .iter()
            .zip(&self.offset)
            .map(|(&x, &o)| (x - o) / self.extent)
            .collect())
    }

    pub fn denormalize(&self, point: &[F]) -> Result<Vec<F>> {
        self.check_dim(point)?;
        Ok(point
            .iter()
            .zip(&self.offset)
            .map(|(&x, &o)| x * self.extent + o)
            .collect())
    }

    fn check_dim(&self, point: &[F]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(())
    }
}

/// An affine frame `x = offset + scale * u` relating working coordinates `u`
/// to physical ones. The identity frame means "work in physical units".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame<F> {
    pub offset: Vec<F>,
    pub scale: F,
}

impl<F: Scalar> Frame<F> {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![F::zero(); dim],
            scale: F::one(),
        }
    }

    pub fn to_local(&self, physical: &[F]) -> Vec<F> {
        physical
            .iter()
            .zip(&self.offset)
            .map(|(&x, &o)| (x - o) / self.scale)
            .collect()
    }

    pub fn to_physical(&self, local: &[F]) -> Vec<F> {
        local
            .iter()
            .zip(&self.offset)
            .map(|(&u, &o)| u * self.scale + o)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Csv,
    Obj,
    Ply,
}

impl SampleFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "csv" | "txt" => Some(Self::Csv),
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

impl fmt::Display for SampleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Obj => "obj",
            Self::Ply => "ply",
        })
    }
}

/// Reads target samples from disk. Mesh formats contribute their vertices only.
pub fn load_samples<F: Scalar>(path: &Path, format: SampleFormat) -> Result<DomainSamples<F>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let samples = parse_samples(&text, format).map_err(|e| e.at(path))?;
    match compute_extent(&samples) {
        Ok(e) => log::info!(
            "loaded {format} {}: M={}, d={}, extent={e}",
            path.display(),
            samples.len(),
            samples.dim()
        ),
        Err(_) => log::warn!(
            "loaded {format} {}: M={}, d={}, extent=0 (degenerate)",
            path.display(),
            samples.len(),
            samples.dim()
        ),
    }
    Ok(samples)
}

/// Parses sample text without touching the filesystem.
pub fn parse_samples<F: Scalar>(
    text: &str,
    format: SampleFormat,
) -> std::result::Result<DomainSamples<F>, ParseFailure> {
    let (rows, weights) = match format {
        SampleFormat::Csv => parse_csv(text)?,
        SampleFormat::Obj => (parse_obj(text)?, None),
        SampleFormat::Ply => (parse_ply(text)?, None),
    };
    if rows.len() < 2 {
        return Err(ParseFailure::degenerate(rows.len()));
    }
    let points = PointSet::from_rows(&rows).map_err(|e| ParseFailure::new(0, e.to_string()))?;
    let weights = weights.map(|w| w.into_iter().map(F::lit).collect());
    DomainSamples::new(points, weights)
        .map_err(|e| ParseFailure::new(0, e.to_string()))
}

/// Parse error before the file path is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    pub line: usize,
    pub message: String,
    degenerate: bool,
}

impl ParseFailure {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
            degenerate: false,
        }
    }

    fn degenerate(m: usize) -> Self {
        Self {
            line: 0,
            message: format!("need at least 2 samples, got {m}"),
            degenerate: true,
        }
    }

    fn at(self, path: &Path) -> Error {
        if self.degenerate {
            Error::DegenerateDomain(format!("{}: {}", path.display(), self.message))
        } else {
            Error::Parse {
                path: path.to_path_buf(),
                line: self.line,
                message: self.message,
            }
        }
    }
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

type CsvRows<F> = (Vec<Vec<F>>, Option<Vec<f64>>);

/// CSV rows are `x,y[,z][,weight]`. A leading `#` line may name the columns
/// (`# x,y,weight`); without one, three columns are read as `x,y,z` and four
/// as `x,y,z,weight`.
fn parse_csv<F: Scalar>(text: &str) -> std::result::Result<CsvRows<F>, ParseFailure> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let mut has_weight: Option<bool> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if rows.is_empty() && header.is_none() {
                let names: Vec<String> = rest
                    .split(',')
                    .map(|s| s.trim().to_ascii_lowercase())
                    .collect();
                if names.iter().all(|n| matches!(n.as_str(), "x" | "y" | "z" | "w" | "weight")) {
                    header = Some(names);
                }
            }
            continue;
        }
        let fields = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| ParseFailure::new(lineno, format!("bad number {s:?}: {e}")))
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(ParseFailure::new(lineno, "non-finite value"));
        }
        let weighted = match &header {
            Some(names) => {
                if names.len() != fields.len() {
                    return Err(ParseFailure::new(
                        lineno,
                        format!("expected {} columns, got {}", names.len(), fields.len()),
                    ));
                }
                matches!(names.last().map(String::as_str), Some("w" | "weight"))
            }
            None => match fields.len() {
                2 | 3 => false,
                4 => true,
                n => {
                    return Err(ParseFailure::new(
                        lineno,
                        format!("expected 2-4 columns, got {n}"),
                    ))
                }
            },
        };
        if *has_weight.get_or_insert(weighted) != weighted {
            return Err(ParseFailure::new(lineno, "inconsistent column count"));
        }
        let ncoord = if weighted { fields.len() - 1 } else { fields.len() };
        if ncoord < 2 {
            return Err(ParseFailure::new(lineno, "need at least x and y"));
        }
        if let Some(first) = rows.first() {
            let first: &Vec<F> = first;
            if first.len() != ncoord {
                return Err(ParseFailure::new(lineno, "inconsistent column count"));
            }
        }
        if weighted {
            let w = fields[ncoord];
            if w < 0.0 {
                return Err(ParseFailure::new(lineno, "negative weight"));
            }
            weights.push(w);
        }
        rows.push(fields[..ncoord].iter().map(|&x| F::lit(x)).collect());
    }
    let weights = (has_weight == Some(true)).then_some(weights);
    Ok((rows, weights))
}

fn parse_obj<F: Scalar>(text: &str) -> std::result::Result<Vec<Vec<F>>, ParseFailure> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let mut it = raw.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let coords = it
            .take(3)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| ParseFailure::new(idx + 1, format!("bad vertex coordinate {s:?}: {e}")))
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        if coords.len() != 3 {
            return Err(ParseFailure::new(idx + 1, "vertex needs 3 coordinates"));
        }
        rows.push(coords.into_iter().map(F::lit).collect());
    }
    Ok(rows)
}

fn parse_ply<F: Scalar>(text: &str) -> std::result::Result<Vec<Vec<F>>, ParseFailure> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(ParseFailure::new(1, "missing 'ply' magic")),
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    for (idx, raw) in lines.by_ref() {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(ParseFailure::new(idx + 1, format!("unsupported PLY format {fmt}")));
                }
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count.parse::<usize>().map_err(|e| {
                        ParseFailure::new(idx + 1, format!("bad vertex count: {e}"))
                    })?);
                }
            }
            ["property", .., name] if in_vertex => props.push((*name).to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let count = vertex_count.ok_or_else(|| ParseFailure::new(0, "no vertex element"))?;
    let axes: Vec<usize> = ["x", "y", "z"]
        .iter()
        .filter_map(|a| props.iter().position(|p| p == a))
        .collect();
    if axes.len() < 2 {
        return Err(ParseFailure::new(0, "vertex element lacks x/y properties"));
    }
    let mut rows = Vec::with_capacity(count);
    for (idx, raw) in lines {
        if rows.len() == count {
            break;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let fields = raw
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| ParseFailure::new(idx + 1, format!("bad number {s:?}: {e}")))
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        if fields.len() < props.len() {
            return Err(ParseFailure::new(idx + 1, "short vertex row"));
        }
        rows.push(axes.iter().map(|&a| F::lit(fields[a])).collect());
    }
    if rows.len() != count {
        return Err(ParseFailure::new(0, format!("expected {count} vertices, found {}", rows.len())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(rows: &[[f64; 2]]) -> DomainSamples<f64> {
        DomainSamples::uniform(PointSet::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn extent_examples() {
        assert_eq!(compute_extent(&samples(&[[0.0, 0.0], [2.0, 1.0]])).unwrap(), 2.0);
        assert_eq!(compute_extent(&samples(&[[-1.0, -1.0], [3.0, 2.0]])).unwrap(), 4.0);
        assert!(matches!(
            compute_extent(&samples(&[[5.0, 5.0], [5.0, 5.0]])),
            Err(Error::DegenerateDomain(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        let d = NormalizedDomain::new(samples(&[[0.0, 0.0], [2.0, 1.0]])).unwrap();
        assert_eq!(d.normalize(&[2.0, 1.0]).unwrap(), vec![1.0, 0.5]);
        assert_eq!(d.denormalize(&[1.0, 0.5]).unwrap(), vec![2.0, 1.0]);

        let d = NormalizedDomain::new(samples(&[[-1.0, -1.0], [3.0, 2.0]])).unwrap();
        assert_eq!(d.normalize(&[-1.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(d.denormalize(&[0.0, 0.0]).unwrap(), vec![-1.0, -1.0]);

        let d = NormalizedDomain::new(samples(&[[0.0, 0.0], [1000.0, 10.0]])).unwrap();
        assert_eq!(d.normalize(&[500.0, 250.0]).unwrap(), vec![0.5, 0.25]);
        // off-sample points are not clamped
        assert_eq!(d.normalize(&[2000.0, -1000.0]).unwrap(), vec![2.0, -1.0]);
        assert!(d.normalize(&[1.0]).is_err());
    }

    #[test]
    fn normalized_samples_fill_unit_box() {
        let d = NormalizedDomain::new(samples(&[[3.0, 7.0], [5.0, 8.0], [4.0, 9.5]])).unwrap();
        for p in d.normalized_points().iter() {
            assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn csv_uniform_and_weighted() {
        let s: DomainSamples<f64> = parse_samples("0,0\n1,0\n0,1", SampleFormat::Csv).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim(), 2);
        assert!(s.weights().iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));

        let s: DomainSamples<f64> = parse_samples("0,0,2\n1,0,2", SampleFormat::Csv).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.5]);

        let s: DomainSamples<f64> =
            parse_samples("# x,y,weight\n0,0,1\n1,0,3", SampleFormat::Csv).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.weights(), &[0.25, 0.75]);
        assert!(!s.is_uniform());

        let s: DomainSamples<f64> =
            parse_samples("0,0,0,1\n1,0,0,1\n0,1,1,2", SampleFormat::Csv).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn csv_errors_carry_line() {
        let err = parse_samples::<f64>("0,0\n1,x\n", SampleFormat::Csv).unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_samples::<f64>("0,0\n1,0,0\n", SampleFormat::Csv).unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_samples::<f64>("0,0\n", SampleFormat::Csv).unwrap_err();
        assert!(err.at(Path::new("a.csv")).to_string().contains("degenerate"));
    }

    #[test]
    fn ply_vertices() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
                    property float z\nelement face 1\nproperty list uchar int vertex_indices\n\
                    end_header\n0 0 0\n1 0 0\n0 1 2\n3 0 1 2\n";
        let s: DomainSamples<f64> = parse_samples(text, SampleFormat::Ply).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.points().row(2), &[0.0, 1.0, 2.0]);
        let bin = text.replace("ascii", "binary_little_endian");
        assert!(parse_samples::<f64>(&bin, SampleFormat::Ply).is_err());
    }
}
