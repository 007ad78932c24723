//! Risk exposure as a function of model interpretability.
//!
//! A fully opaque model (`theta = 0`) carries the machine-only exposure
//! `c_ml`; interpretability lowers it along
//!
//! ```text
//! c(theta) = c_ml - (c_ml^2 / c_h) * g(theta)
//! ```
//!
//! where `g` is one of five increasing shapes with `g(0) = 0`, `g(1) = 1`, so
//! at `theta = 1` the exposure drops by the synergy factor `xi = 1 - c_ml/c_h`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpretError {
    #[error("need 0 < c_ml < c_h, got c_ml={c_ml}, c_h={c_h}")]
    Exposure { c_ml: f64, c_h: f64 },
    #[error("theta must lie in [0, 1], got {0}")]
    Theta(f64),
    #[error("unknown curve shape '{0}'")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Linear,
    Tan,
    Sin,
    Square,
    Sqrt,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Linear, Shape::Tan, Shape::Sin, Shape::Square, Shape::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Linear => "linear",
            Shape::Tan => "tan",
            Shape::Sin => "sin",
            Shape::Square => "square",
            Shape::Sqrt => "sqrt",
        }
    }

    /// Increasing map of `[0, 1]` onto itself.
    pub fn g(self, theta: f64) -> f64 {
        match self {
            Shape::Linear => theta,
            Shape::Tan => (PI / 4.0 * theta).tan(),
            Shape::Sin => (PI / 2.0 * theta).sin(),
            Shape::Square => theta * theta,
            Shape::Sqrt => theta.sqrt(),
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = InterpretError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Shape::ALL
            .into_iter()
            .find(|sh| sh.name() == s)
            .ok_or_else(|| InterpretError::Shape(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityCurve {
    pub shape: Shape,
    pub c_ml: f64,
    pub c_h: f64,
}

impl InterpretabilityCurve {
    pub fn new(shape: Shape, c_ml: f64, c_h: f64) -> Result<Self, InterpretError> {
        if !(c_ml.is_finite() && c_h.is_finite() && c_ml > 0.0 && c_h > c_ml) {
            return Err(InterpretError::Exposure { c_ml, c_h });
        }
        Ok(Self { shape, c_ml, c_h })
    }
}

/// Synergy factor `1 - c_ml / c_h`.
pub fn xi(curve: &InterpretabilityCurve) -> f64 {
    1.0 - curve.c_ml / curve.c_h
}

pub fn risk_at(curve: &InterpretabilityCurve, theta: f64) -> Result<f64, InterpretError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(InterpretError::Theta(theta));
    }
    // Snap the endpoints so every shape agrees there exactly.
    let g = if theta == 0.0 || theta == 1.0 {
        theta
    } else {
        curve.shape.g(theta)
    };
    Ok(curve.c_ml - curve.c_ml * curve.c_ml / curve.c_h * g)
}

/// Treats a priced CVaR as the machine-only exposure and moves it along the
/// curve.
pub fn adjust_pricing(cvar: f64, c_h: f64, theta: f64, shape: Shape) -> Result<f64, InterpretError> {
    risk_at(&InterpretabilityCurve::new(shape, cvar, c_h)?, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(shape: Shape) -> InterpretabilityCurve {
        InterpretabilityCurve::new(shape, 500_000.0, 1_000_000.0).unwrap()
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi(&curve(Shape::Linear)), 0.5);
        let near_zero = InterpretabilityCurve::new(Shape::Linear, 1e-9, 1.0).unwrap();
        assert!((xi(&near_zero) - 1.0).abs() < 1e-8);
        let near_h = InterpretabilityCurve::new(Shape::Linear, 1.0 - 1e-9, 1.0).unwrap();
        assert!(xi(&near_h) < 1e-8);
        assert!(InterpretabilityCurve::new(Shape::Linear, 2.0, 1.0).is_err());
        assert!(InterpretabilityCurve::new(Shape::Linear, 1.0, 1.0).is_err());
        assert!(InterpretabilityCurve::new(Shape::Linear, 0.0, 1.0).is_err());
    }

    #[test]
    fn endpoints_and_midpoint() {
        for s in Shape::ALL {
            let c = curve(s);
            assert_eq!(risk_at(&c, 0.0).unwrap(), 500_000.0);
            assert_eq!(risk_at(&c, 1.0).unwrap(), 500_000.0 * (1.0 - 0.5));
        }
        assert_eq!(risk_at(&curve(Shape::Linear), 0.5).unwrap(), 375_000.0);
        assert!(risk_at(&curve(Shape::Sin), 1.2).is_err());
        assert!(risk_at(&curve(Shape::Sin), -0.1).is_err());
    }

    #[test]
    fn adjust_examples() {
        let cvar = 236_117.0;
        assert_eq!(adjust_pricing(cvar, 1e6, 0.0, Shape::Tan).unwrap(), cvar);
        let full = adjust_pricing(cvar, 1e6, 1.0, Shape::Sqrt).unwrap();
        assert!((full - cvar * (1.0 - cvar / 1e6)).abs() < 1e-9);
        let q = adjust_pricing(cvar, 4.0 * cvar, 1.0, Shape::Linear).unwrap();
        assert!((q - 0.75 * cvar).abs() < 1e-9);
    }

    #[test]
    fn curvature_classification() {
        let h = 0.01;
        for s in Shape::ALL {
            for k in 1..99 {
                let t = k as f64 / 100.0;
                let d2 = s.g(t + h) - 2.0 * s.g(t) + s.g(t - h);
                match s {
                    Shape::Tan | Shape::Square => assert!(d2 > 0.0, "{s:?} at {t}"),
                    Shape::Sin | Shape::Sqrt => assert!(d2 < 0.0, "{s:?} at {t}"),
                    Shape::Linear => assert!(d2.abs() < 1e-12),
                }
            }
        }
    }

    #[test]
    fn shape_names_round_trip() {
        for s in Shape::ALL {
            assert_eq!(s.name().parse::<Shape>().unwrap(), s);
        }
        assert!("cubic".parse::<Shape>().is_err());
    }

    proptest! {
        #[test]
        fn strictly_decreasing_and_bounded(c_ml in 1.0f64..1e6, ratio in 1.01f64..10.0,
                                           a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for s in Shape::ALL {
                let c = InterpretabilityCurve::new(s, c_ml, c_ml * ratio).unwrap();
                let (r_lo, r_hi) = (risk_at(&c, lo).unwrap(), risk_at(&c, hi).unwrap());
                prop_assert!(r_hi < r_lo);
                prop_assert!(r_hi >= c_ml * (1.0 - c_ml / c.c_h) - 1e-9 * c_ml);
                prop_assert!(r_hi > 0.0);
            }
        }
    }
}
