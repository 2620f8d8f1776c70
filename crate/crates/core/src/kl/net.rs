use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Default cap on net cardinality, checked before allocation.
pub const DEFAULT_NET_CAP: usize = 1_000_000;

/// Finite subset of `B_k(R)` covering it at radius `h`.
#[derive(Debug, Clone, Serialize)]
pub struct Net {
    #[serde(skip)]
    points: Vec<Vector>,
    k: usize,
    radius: f64,
    h: f64,
    spacing: f64,
}

impl Net {
    /// Net from explicit points; each must lie in `B_k(R)`.
    pub fn from_points(points: Vec<Vector>, radius: f64, h: f64) -> Result<Self> {
        let k = points.first().map(|p| p.len()).ok_or_else(|| Error::invalid("empty net"))?;
        for p in &points {
            crate::error::check_dim(k, p.len())?;
            if p.norm() > radius * (1.0 + 1e-12) {
                return Err(Error::invalid(format!("net point of norm {} outside radius {radius}", p.norm())));
            }
        }
        Ok(Self { points, k, radius, h, spacing: f64::NAN })
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Grid spacing `2h/√k` (NaN for nets built from explicit points).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Volumetric bound `(1 + 2R/h)^k` on the size of an optimal `h`-net.
    pub fn volumetric_bound(&self) -> f64 {
        (1.0 + 2.0 * self.radius / self.h).powi(self.k as i32)
    }

    /// Largest distance from any probe to its nearest net point.
    pub fn covering_radius_on(&self, probes: &[Vector]) -> f64 {
        probes
            .iter()
            .map(|q| self.points.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }

    /// Predicted cardinality of [`build_net`] before deduplication.
    pub fn predicted_size(k: usize, radius: f64, h: f64) -> f64 {
        if radius == 0.0 {
            return 1.0;
        }
        let n = lattice_half_width(k, radius, h);
        (2.0 * n + 1.0).powi(k as i32)
    }
}

fn lattice_half_width(k: usize, radius: f64, h: f64) -> f64 {
    let s = 2.0 * h / (k as f64).sqrt();
    ((radius + h) / s).ceil()
}

/// Grid `h`-net of `B_k(R)`.
///
/// Lattice `sℤᵏ` with `s = 2h/√k`: every point of the ball is within `h` of
/// some lattice point, and that point has norm at most `R + h`. Lattice
/// points inside the ball are kept; those in the shell `(R, R + h]` are
/// replaced by their radial projection, which can only move them closer to
/// any ball point.
pub fn build_net(k: usize, radius: f64, h: f64, cap: usize) -> Result<Net> {
    if k == 0 {
        return Err(Error::invalid("net dimension must be at least 1"));
    }
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::invalid(format!("net radius must be finite and nonnegative, got {radius}")));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("net resolution must be positive, got {h}")));
    }
    if radius == 0.0 {
        return Ok(Net { points: vec![Vector::zeros(k)], k, radius, h, spacing: 0.0 });
    }
    let predicted = Net::predicted_size(k, radius, h);
    if !predicted.is_finite() || predicted > cap as f64 {
        return Err(Error::Budget(format!(
            "net of B_{k}({radius}) at resolution {h} needs about {predicted:e} points (cap {cap})"
        )));
    }
    let s = 2.0 * h / (k as f64).sqrt();
    let n = lattice_half_width(k, radius, h) as i64;
    let mut idx = vec![-n; k];
    let mut inner = Vec::new();
    let mut shell: Vec<Vector> = Vec::new();
    loop {
        let p = Vector::from_fn(k, |i, _| idx[i] as f64 * s);
        let norm = p.norm();
        if norm <= radius {
            inner.push(p);
        } else if norm <= radius + h {
            let q = p * (radius / norm);
            if !shell.iter().any(|e| (e - &q).norm() <= 1e-12 * radius) {
                shell.push(q);
            }
        }
        let mut pos = 0;
        loop {
            if pos == k {
                inner.extend(shell);
                return Ok(Net { points: inner, k, radius, h, spacing: s });
            }
            idx[pos] += 1;
            if idx[pos] > n {
                idx[pos] = -n;
                pos += 1;
            } else {
                break;
            }
        }
    }
}
