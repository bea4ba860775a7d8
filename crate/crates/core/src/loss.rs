//! Convex, nonnegative losses of a real prediction against a label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing width of the quadratically smoothed hinge used for training.
pub const HINGE_SMOOTHING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    Absolute,
    Logistic,
    Hinge,
    Lq { q: f64 },
}

/// A loss together with its Lipschitz constant, when one is known.
///
/// Absolute, logistic and hinge losses are 1-Lipschitz in the prediction.
/// Squared and `Lq` losses have no global constant, so the caller must
/// supply one before the loss can be used in a stability bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub lipschitz: Option<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Result<Self> {
        if let LossKind::Lq { q } = kind {
            if !(q.is_finite() && q >= 1.0) {
                return Err(Error::param("q", format!("must be >= 1, got {q}")));
            }
        }
        let lipschitz = match kind {
            LossKind::Absolute | LossKind::Logistic | LossKind::Hinge => Some(1.0),
            LossKind::Squared | LossKind::Lq { .. } => None,
        };
        Ok(Self { kind, lipschitz })
    }

    pub fn squared() -> Self {
        Self::new(LossKind::Squared).unwrap()
    }

    pub fn logistic() -> Self {
        Self::new(LossKind::Logistic).unwrap()
    }

    pub fn hinge() -> Self {
        Self::new(LossKind::Hinge).unwrap()
    }

    /// Supplies a data-dependent Lipschitz constant (needed for squared and `Lq`).
    pub fn with_lipschitz(mut self, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::param("rho", format!("must be positive, got {rho}")));
        }
        self.lipschitz = Some(rho);
        Ok(self)
    }

    /// The Lipschitz constant, refusing losses that need an explicit one.
    pub fn require_lipschitz(&self) -> Result<f64> {
        self.lipschitz.ok_or_else(|| {
            Error::param(
                "rho",
                format!("{:?} loss has no global Lipschitz constant; supply one", self.kind),
            )
        })
    }

    pub fn value(&self, pred: f64, y: f64) -> f64 {
        loss(self.kind, pred, y)
    }
}

/// Exact loss value.
pub fn loss(kind: LossKind, pred: f64, y: f64) -> f64 {
    match kind {
        LossKind::Squared => (pred - y).powi(2),
        LossKind::Absolute => (pred - y).abs(),
        LossKind::Logistic => softplus(-y * pred),
        LossKind::Hinge => (1.0 - y * pred).max(0.0),
        LossKind::Lq { q } => (pred - y).abs().powf(q),
    }
}

/// log(1 + e^t) without overflow.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Value, first and second derivative in the prediction of the loss that the
/// iterative trainer minimizes. Hinge is replaced by its quadratically
/// smoothed surrogate; the other smooth losses are exact.
pub(crate) fn surrogate(kind: LossKind, pred: f64, y: f64) -> (f64, f64, f64) {
    match kind {
        LossKind::Squared => {
            let r = pred - y;
            (r * r, 2.0 * r, 2.0)
        }
        LossKind::Logistic => {
            let m = y * pred;
            let p = sigmoid(-m);
            (softplus(-m), -y * p, y * y * p * (1.0 - p))
        }
        LossKind::Hinge => {
            let mu = HINGE_SMOOTHING;
            let m = y * pred;
            if m >= 1.0 {
                (0.0, 0.0, 0.0)
            } else if m <= 1.0 - mu {
                (1.0 - m - mu / 2.0, -y, 0.0)
            } else {
                let gap = 1.0 - m;
                (gap * gap / (2.0 * mu), -y * gap / mu, y * y / mu)
            }
        }
        LossKind::Lq { q } => {
            let r = pred - y;
            let a = r.abs();
            if a == 0.0 {
                return (0.0, 0.0, if q == 2.0 { 2.0 } else { 0.0 });
            }
            (
                a.powf(q),
                q * a.powf(q - 1.0) * r.signum(),
                q * (q - 1.0) * a.powf(q - 2.0),
            )
        }
        LossKind::Absolute => unreachable!("absolute loss has no smooth surrogate"),
    }
}
