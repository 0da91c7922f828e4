//! Norm evaluation for the target spaces: finite ℓ^p (with p = ∞ as a
//! distinguished value), weighted L¹ sums of an inner space, and the trace
//! norm on k×k matrices. Every inequality the rest of the crate measures
//! reduces to expectations of these norms.

use crate::{kahan_sum, tol, Error, KahanSum, Result};
use serde::{Deserialize, Serialize};

/// Exponent of an ℓ^p space. Infinity is its own variant so the norm code
/// never raises to a huge float power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PExponent {
    Finite(f64),
    Infinity,
}

impl PExponent {
    pub fn validate(&self) -> Result<()> {
        match self {
            PExponent::Finite(p) if p.is_finite() && *p >= 1.0 => Ok(()),
            PExponent::Finite(p) => Err(Error::InvalidDescriptor(format!(
                "lp exponent must be >= 1, got {p}"
            ))),
            PExponent::Infinity => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpaceDescriptor {
    Lp {
        dim: usize,
        p: PExponent,
    },
    /// L¹ over a finite measure space with the given weights, values in
    /// `inner`. A vector is read as `weights.len()` consecutive inner blocks.
    NestedL1 {
        weights: Vec<f64>,
        inner: Box<SpaceDescriptor>,
    },
    /// Trace norm (sum of singular values) on k×k matrices, row-major.
    TraceNorm {
        k: usize,
    },
}

/// Size cap for trace-norm matrices; the Jacobi sweep is only certified
/// accurate to 1e-10 in this range, and nothing at desk scale needs more.
pub const TRACE_K_CAP: usize = 8;

impl SpaceDescriptor {
    pub fn scalar() -> Self {
        SpaceDescriptor::Lp {
            dim: 1,
            p: PExponent::Finite(2.0),
        }
    }

    pub fn lp(dim: usize, p: f64) -> Self {
        SpaceDescriptor::Lp {
            dim,
            p: PExponent::Finite(p),
        }
    }

    pub fn linf(dim: usize) -> Self {
        SpaceDescriptor::Lp {
            dim,
            p: PExponent::Infinity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceDescriptor::Lp { dim, p } => {
                if *dim == 0 {
                    return Err(Error::InvalidDescriptor("lp dim must be >= 1".into()));
                }
                p.validate()
            }
            SpaceDescriptor::NestedL1 { weights, inner } => {
                if weights.is_empty() {
                    return Err(Error::InvalidDescriptor("l1of needs at least one weight".into()));
                }
                if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
                    return Err(Error::InvalidDescriptor(format!(
                        "l1of weights must be positive, got {w}"
                    )));
                }
                inner.validate()
            }
            SpaceDescriptor::TraceNorm { k } => {
                if *k == 0 {
                    return Err(Error::InvalidDescriptor("trace k must be >= 1".into()));
                }
                if *k > TRACE_K_CAP {
                    return Err(Error::InvalidDescriptor(format!(
                        "trace k is capped at {TRACE_K_CAP}, got {k}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Number of coordinates a conforming vector carries.
    pub fn dim(&self) -> usize {
        match self {
            SpaceDescriptor::Lp { dim, .. } => *dim,
            SpaceDescriptor::NestedL1 { weights, inner } => weights.len() * inner.dim(),
            SpaceDescriptor::TraceNorm { k } => k * k,
        }
    }

    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                got: v.len(),
                want: self.dim(),
            });
        }
        Ok(self.norm_unchecked(v))
    }

    /// Norm without the conformance check; hot paths that already know the
    /// width use this.
    pub fn norm_unchecked(&self, v: &[f64]) -> f64 {
        match self {
            SpaceDescriptor::Lp { p, .. } => lp_norm(v, *p),
            SpaceDescriptor::NestedL1 { weights, inner } => {
                let block = inner.dim();
                kahan_sum(
                    weights
                        .iter()
                        .zip(v.chunks_exact(block))
                        .map(|(w, section)| w * inner.norm_unchecked(section)),
                )
            }
            SpaceDescriptor::TraceNorm { k } => trace_norm(v, *k),
        }
    }

    /// Canonical text form, the same grammar `parse` accepts.
    pub fn text(&self) -> String {
        match self {
            SpaceDescriptor::Lp { dim, p } => match p {
                PExponent::Infinity => format!("lp:dim={dim},p=inf"),
                PExponent::Finite(p) => format!("lp:dim={dim},p={p}"),
            },
            SpaceDescriptor::NestedL1 { weights, inner } => {
                let ws: Vec<String> = weights.iter().map(|w| format!("{w}")).collect();
                format!("l1of:weights={};inner={}", ws.join(","), inner.text())
            }
            SpaceDescriptor::TraceNorm { k } => format!("trace:k={k}"),
        }
    }

    /// Parse the canonical text form: `lp:dim=4,p=2`, `lp:dim=8,p=inf`,
    /// `l1of:weights=0.5,0.5;inner=lp:dim=2,p=2`, `trace:k=2`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::InvalidDescriptor(format!("missing kind prefix in {text:?}")))?;
        let desc = match kind {
            "lp" => {
                let mut dim = None;
                let mut p = None;
                for item in rest.split(',') {
                    let (key, val) = split_kv(item)?;
                    match key {
                        "dim" => dim = Some(parse_usize(val)?),
                        "p" => {
                            p = Some(if val == "inf" {
                                PExponent::Infinity
                            } else {
                                PExponent::Finite(parse_f64(val)?)
                            })
                        }
                        other => {
                            return Err(Error::InvalidDescriptor(format!(
                                "unknown lp key {other:?}"
                            )))
                        }
                    }
                }
                SpaceDescriptor::Lp {
                    dim: dim.ok_or_else(|| Error::InvalidDescriptor("lp needs dim".into()))?,
                    p: p.ok_or_else(|| Error::InvalidDescriptor("lp needs p".into()))?,
                }
            }
            "l1of" => {
                let (wpart, inner_text) = rest.split_once(";inner=").ok_or_else(|| {
                    Error::InvalidDescriptor("l1of needs weights=...;inner=...".into())
                })?;
                let (key, vals) = split_kv(wpart)?;
                if key != "weights" {
                    return Err(Error::InvalidDescriptor(format!(
                        "unknown l1of key {key:?}"
                    )));
                }
                let weights = vals
                    .split(',')
                    .map(parse_f64)
                    .collect::<Result<Vec<f64>>>()?;
                SpaceDescriptor::NestedL1 {
                    weights,
                    inner: Box::new(SpaceDescriptor::parse(inner_text)?),
                }
            }
            "trace" => {
                let (key, val) = split_kv(rest)?;
                if key != "k" {
                    return Err(Error::InvalidDescriptor(format!(
                        "unknown trace key {key:?}"
                    )));
                }
                SpaceDescriptor::TraceNorm {
                    k: parse_usize(val)?,
                }
            }
            other => {
                return Err(Error::InvalidDescriptor(format!(
                    "unknown space kind {other:?}"
                )))
            }
        };
        desc.validate()?;
        Ok(desc)
    }
}

fn split_kv(item: &str) -> Result<(&str, &str)> {
    item.split_once('=')
        .ok_or_else(|| Error::InvalidDescriptor(format!("expected key=value, got {item:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::InvalidDescriptor(format!("expected integer, got {s:?}")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::InvalidDescriptor(format!("expected number, got {s:?}")))
}

/// a·x + y coordinatewise.
pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            got: x.len(),
            want: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect())
}

fn lp_norm(v: &[f64], p: PExponent) -> f64 {
    match p {
        PExponent::Infinity => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        PExponent::Finite(p) if p == 1.0 => kahan_sum(v.iter().map(|x| x.abs())),
        PExponent::Finite(p) if p == 2.0 => {
            // Scale by the max modulus so squares cannot overflow.
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * kahan_sum(v.iter().map(|x| (x / m) * (x / m))).sqrt()
        }
        PExponent::Finite(p) => {
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * kahan_sum(v.iter().map(|x| (x.abs() / m).powf(p))).powf(1.0 / p)
        }
    }
}

/// Trace norm of a k×k row-major matrix: orthogonalize the columns by
/// one-sided Jacobi rotations, then sum the column norms (the singular
/// values). Converges to machine precision for k <= 8 in a handful of
/// sweeps.
fn trace_norm(a: &[f64], k: usize) -> f64 {
    let mut m = a.to_vec();
    let col = |m: &[f64], j: usize, r: usize| m[r * k + j];
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for r in 0..k {
                    let (ci, cj) = (col(&m, i, r), col(&m, j, r));
                    alpha += ci * ci;
                    beta += cj * cj;
                    gamma += ci * cj;
                }
                if gamma.abs() <= tol::JACOBI_CONVERGENCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..k {
                    let (ci, cj) = (m[r * k + i], m[r * k + j]);
                    m[r * k + i] = c * ci - s * cj;
                    m[r * k + j] = s * ci + c * cj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut total = KahanSum::new();
    for j in 0..k {
        let mut sq = 0.0;
        for r in 0..k {
            sq += m[r * k + j] * m[r * k + j];
        }
        total.add(sq.sqrt());
    }
    total.value()
}
