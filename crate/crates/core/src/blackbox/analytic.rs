use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_dim, Predictor, PredictorKind};
use crate::error::{Error, Result};
use crate::geometry::PointSet;

/// Closed-form test functions. The `Lambda*` variants take simplex
/// coordinates as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticFn {
    /// `10 x1 - 20 x2 - 2 x3 + 3 x4` on seven inputs.
    Linear7,
    /// `-x1^2 + 2 x2`
    Quad2,
    /// `x1^2 + x2^2`
    Ring,
    /// `0.7 sign(x1) + sign(x2)`, with `sign(0) = 0`
    Sign,
    /// `15 l1 + 22 l2 + 40 (1 - l4) sin(3.14 l4)` on six coordinates.
    LambdaHump,
    /// `l1^2 + l1 l2 - l3 l4 + l4`
    LambdaPoly,
}

impl AnalyticFn {
    pub const ALL: [AnalyticFn; 6] = [
        AnalyticFn::Linear7,
        AnalyticFn::Quad2,
        AnalyticFn::Ring,
        AnalyticFn::Sign,
        AnalyticFn::LambdaHump,
        AnalyticFn::LambdaPoly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalyticFn::Linear7 => "linear7",
            AnalyticFn::Quad2 => "quad2",
            AnalyticFn::Ring => "ring",
            AnalyticFn::Sign => "sign",
            AnalyticFn::LambdaHump => "lambda-hump",
            AnalyticFn::LambdaPoly => "lambda-poly",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            AnalyticFn::Linear7 => 7,
            AnalyticFn::Quad2 | AnalyticFn::Ring | AnalyticFn::Sign => 2,
            AnalyticFn::LambdaHump => 6,
            AnalyticFn::LambdaPoly => 4,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        let sign = |v: f64| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        match self {
            AnalyticFn::Linear7 => 10.0 * x[0] - 20.0 * x[1] - 2.0 * x[2] + 3.0 * x[3],
            AnalyticFn::Quad2 => -x[0] * x[0] + 2.0 * x[1],
            AnalyticFn::Ring => x[0] * x[0] + x[1] * x[1],
            AnalyticFn::Sign => 0.7 * sign(x[0]) + sign(x[1]),
            // 3.14, not pi: the hump does not vanish exactly at l4 = 1
            #[allow(clippy::approx_constant)]
            AnalyticFn::LambdaHump => 15.0 * x[0] + 22.0 * x[1] + 40.0 * (1.0 - x[3]) * (3.14 * x[3]).sin(),
            AnalyticFn::LambdaPoly => x[0] * x[0] + x[0] * x[1] - x[2] * x[3] + x[3],
        }
    }
}

impl fmt::Display for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnalyticFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnalyticFn::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let known: Vec<&str> = AnalyticFn::ALL.iter().map(|f| f.name()).collect();
            Error::invalid(format!("unknown analytic function '{s}' (known: {})", known.join(", ")))
        })
    }
}

/// Noise-free evaluation of an [`AnalyticFn`].
#[derive(Debug, Clone, Copy)]
pub struct AnalyticPredictor {
    function: AnalyticFn,
}

pub fn analytic(function: AnalyticFn) -> AnalyticPredictor {
    AnalyticPredictor { function }
}

impl AnalyticPredictor {
    pub fn function(&self) -> AnalyticFn {
        self.function
    }
}

impl Predictor for AnalyticPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Analytic
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.function.dim())
    }

    fn predict_batch(&self, x: &PointSet) -> Result<Vec<f64>> {
        check_dim(self.function.dim(), x.dim())?;
        Ok(x.rows().map(|r| self.function.eval(r)).collect())
    }
}
