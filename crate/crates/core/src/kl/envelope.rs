use serde::Serialize;

use super::Net;
use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, Vector};
use crate::rewards::LowDimFunction;

/// `G(u) = 1 + log Σ_i exp(b_i + <z_i, u>)`, i.e. weights `w_i = e^{b_i}`.
#[derive(Debug, Clone)]
pub struct Envelope {
    slopes: Vec<Vector>,
    offsets: Vec<f64>,
    anchors: Vec<Vector>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopePiece {
    pub anchor: Vec<f64>,
    pub slope: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeDump {
    pub m: usize,
    pub gap: f64,
    pub a0: f64,
    pub pieces: Vec<EnvelopePiece>,
}

impl Envelope {
    /// Envelope with explicit log-weights `b_i` and slopes `z_i`.
    pub fn from_pieces(offsets: Vec<f64>, slopes: Vec<Vector>) -> Result<Self> {
        if slopes.is_empty() || slopes.len() != offsets.len() {
            return Err(Error::invalid("envelope needs matching, nonempty slopes and offsets"));
        }
        let k = slopes[0].len();
        for s in &slopes {
            crate::error::check_dim(k, s.len())?;
        }
        let anchors = vec![Vector::zeros(k); slopes.len()];
        Ok(Self { slopes, offsets, anchors })
    }

    pub fn m(&self) -> usize {
        self.slopes.len()
    }

    pub fn dim(&self) -> usize {
        self.slopes[0].len()
    }

    pub fn slopes(&self) -> &[Vector] {
        &self.slopes
    }

    /// `b_i = log w_i`.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `B = 1 + log m`.
    pub fn gap(&self) -> f64 {
        1.0 + (self.m() as f64).ln()
    }

    /// `a₀ = e^{−B}`.
    pub fn acceptance_floor(&self) -> f64 {
        (-self.gap()).exp()
    }

    pub fn max_slope_norm(&self) -> f64 {
        self.slopes.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn value(&self, u: &Vector) -> f64 {
        let a: Vec<f64> = self.slopes.iter().zip(&self.offsets).map(|(z, b)| z.dot(u) + b).collect();
        1.0 + log_sum_exp(&a)
    }

    /// `exp(f(u) − G(u))` given `f(u)`.
    pub fn acceptance(&self, f_u: f64, u: &Vector) -> f64 {
        (f_u - self.value(u)).exp()
    }

    pub fn dump(&self) -> EnvelopeDump {
        EnvelopeDump {
            m: self.m(),
            gap: self.gap(),
            a0: self.acceptance_floor(),
            pieces: self
                .anchors
                .iter()
                .zip(self.slopes.iter().zip(&self.offsets))
                .map(|(a, (z, b))| EnvelopePiece {
                    anchor: a.iter().copied().collect(),
                    slope: z.iter().copied().collect(),
                    offset: *b,
                })
                .collect(),
        }
    }
}

/// One first-order query per net point: `z_i = g_i`, `b_i = f_i − <g_i, u_i>`.
pub fn build_envelope(f: &LowDimFunction, net: &Net) -> Result<Envelope> {
    if net.is_empty() {
        return Err(Error::invalid("envelope needs a nonempty net"));
    }
    crate::error::check_dim(f.dim(), net.k())?;
    let mut slopes = Vec::with_capacity(net.len());
    let mut offsets = Vec::with_capacity(net.len());
    for u in net.points() {
        let (fu, g) = f.first_order(u).map_err(|e| match e {
            Error::LipschitzViolation(_) => e,
            other => Error::Oracle(format!("first-order oracle failed at net point {u:?}: {other}")),
        })?;
        if !fu.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle(format!("non-finite oracle answer at net point {u:?}")));
        }
        offsets.push(fu - g.dot(u));
        slopes.push(g);
    }
    Ok(Envelope { slopes, offsets, anchors: net.points().to_vec() })
}
