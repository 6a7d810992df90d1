//! Emden-Fowler problem descriptions `x y'' + 2 y' + x f(x) g(y) = 0`,
//! `y(0) = a`, `y'(0) = b`, and the registry of canonical instances.

use serde::{Deserialize, Serialize};

use crate::error::{EomError, Result};

/// Supported `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FKind {
    /// `f(x) = 1` (Lane-Emden).
    ConstantOne,
    /// `f(x) = -2 (2 x^2 + 3)`.
    #[serde(rename = "poly_minus2_2x2plus3")]
    PolyMinus2TwoX2Plus3,
}

impl FKind {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            FKind::ConstantOne => 1.0,
            FKind::PolyMinus2TwoX2Plus3 => -2.0 * (2.0 * x * x + 3.0),
        }
    }
}

/// Supported `g(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GKind {
    /// `y^p` for an integer `p >= 0`.
    PowerInt(i64),
    /// `y^(num/den)`, continued to negative `y` as `sign(y) |y|^(num/den)`.
    PowerFrac { num: i64, den: i64 },
    Exp,
    Sinh,
    Sin,
    /// `4 (2 e^y + e^(y/2))`.
    TwoExpCombo,
}

impl GKind {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            GKind::PowerInt(p) => y.powi(p as i32),
            GKind::PowerFrac { num, den } => {
                let p = num as f64 / den as f64;
                y.signum() * y.abs().powf(p)
            }
            GKind::Exp => y.exp(),
            GKind::Sinh => y.sinh(),
            GKind::Sin => y.sin(),
            GKind::TwoExpCombo => 4.0 * (2.0 * y.exp() + (0.5 * y).exp()),
        }
    }

    /// Whether the Galerkin residual needs the truncated-series path.
    pub fn needs_series(self) -> bool {
        !matches!(self, GKind::PowerInt(_))
    }
}

/// One Emden-Fowler instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub f_kind: FKind,
    pub g_kind: GKind,
    /// `y(0)`.
    pub a: f64,
    /// `y'(0)`.
    pub b: f64,
    /// Domain truncation; `None` selects it from the reference solution.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    /// Truncated-series degree for non-polynomial `g`.
    #[serde(rename = "N")]
    pub series_degree: usize,
    /// Interval in `y` over which `g` is fitted; defaults to the padded range
    /// of the reference solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx_interval: Option<(f64, f64)>,
}

impl ProblemSpec {
    pub fn f(&self, x: f64) -> f64 {
        self.f_kind.eval(x)
    }

    pub fn g(&self, y: f64) -> f64 {
        self.g_kind.eval(y)
    }

    /// `y''(0) = -f(0) g(a) / 3`, the regular-singular limit at the origin.
    pub fn second_derivative_at_origin(&self) -> f64 {
        -self.f(0.0) * self.g(self.a) / 3.0
    }

    pub fn with_truncation(mut self, m: f64) -> Self {
        self.truncation = Some(m);
        self
    }

    pub fn with_series_degree(mut self, n: usize) -> Self {
        self.series_degree = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.truncation {
            if !(m > 0.0) || !m.is_finite() {
                return Err(EomError::Argument(format!("truncation M must be positive, got {m}")));
            }
        }
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(EomError::Argument("initial values must be finite".into()));
        }
        match self.g_kind {
            GKind::PowerInt(p) if p < 0 => {
                return Err(EomError::Argument(format!("power_int needs p >= 0, got {p}")))
            }
            GKind::PowerFrac { den, .. } if den <= 0 => {
                return Err(EomError::Argument("power_frac needs a positive denominator".into()))
            }
            g if g.needs_series() && self.series_degree < 2 => {
                return Err(EomError::Argument(format!(
                    "series degree must be >= 2 for {g:?}, got {}",
                    self.series_degree
                )))
            }
            _ => {}
        }
        if let Some((lo, hi)) = self.approx_interval {
            if !(lo < hi) {
                return Err(EomError::Argument(format!("empty approximation interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Parse a problem file.
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| EomError::Serialize(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

fn lane_emden(name: &str, g: GKind, a: f64, n: usize, m: Option<f64>) -> ProblemSpec {
    ProblemSpec {
        name: name.to_string(),
        f_kind: FKind::ConstantOne,
        g_kind: g,
        a,
        b: 0.0,
        truncation: m,
        series_degree: n,
        approx_interval: None,
    }
}

/// Every built-in problem, in registry order.
pub fn registry() -> Vec<ProblemSpec> {
    vec![
        lane_emden("lane-emden-p0", GKind::PowerInt(0), 1.0, 8, None),
        lane_emden("lane-emden-p1", GKind::PowerInt(1), 1.0, 8, None),
        lane_emden("lane-emden-p5", GKind::PowerInt(5), 1.0, 8, None),
        lane_emden("lane-emden-p3_2", GKind::PowerFrac { num: 3, den: 2 }, 1.0, 8, None),
        lane_emden("lane-emden-p5_2", GKind::PowerFrac { num: 5, den: 2 }, 1.0, 8, None),
        lane_emden("lane-emden-exp", GKind::Exp, 0.0, 15, Some(2.0)),
        lane_emden("lane-emden-sinh", GKind::Sinh, 1.0, 10, None),
        lane_emden("lane-emden-sin", GKind::Sin, 1.0, 12, None),
        lane_emden("emden-fowler-two-exp", GKind::TwoExpCombo, 0.0, 10, Some(1.0)),
        ProblemSpec {
            name: "emden-fowler-linear".to_string(),
            f_kind: FKind::PolyMinus2TwoX2Plus3,
            g_kind: GKind::PowerInt(1),
            a: 1.0,
            b: 0.0,
            truncation: Some(1.0),
            series_degree: 8,
            approx_interval: None,
        },
    ]
}

/// Names of the seven problems whose figures make up the convergence study.
pub const CANONICAL: [&str; 7] = [
    "lane-emden-p1",
    "lane-emden-p5",
    "lane-emden-exp",
    "lane-emden-sinh",
    "lane-emden-sin",
    "emden-fowler-two-exp",
    "emden-fowler-linear",
];

pub fn canonical() -> Vec<ProblemSpec> {
    CANONICAL.iter().map(|n| lookup(n).expect("registered")).collect()
}

pub fn lookup(name: &str) -> Option<ProblemSpec> {
    registry().into_iter().find(|p| p.name == name)
}
