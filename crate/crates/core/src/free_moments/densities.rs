//! Limiting densities: semicircle, Kesten–McKay and its `1/√d` dilation.
//!
//! Every density here is `g(x)·√(r² − x²)` on `[−r, r]` with `g` smooth, so
//! integrals are taken in `θ` with `x = r·sin θ`, where the integrand is
//! smooth up to the endpoints.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::quadrature::integrate;

/// Absolute accuracy of quadrature-based CDFs.
pub const CDF_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "density", rename_all = "kebab-case")]
pub enum DensitySpec {
    Semicircle,
    #[serde(rename = "kesten-mckay")]
    KestenMcKay { d: usize },
    #[serde(rename = "dilated-kesten-mckay")]
    DilatedKestenMcKay { d: usize },
}

impl DensitySpec {
    pub fn new_kesten_mckay(d: usize, dilated: bool) -> Result<Self> {
        let spec = if dilated { Self::DilatedKestenMcKay { d } } else { Self::KestenMcKay { d } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::KestenMcKay { d } | Self::DilatedKestenMcKay { d } if d < 2 => Err(Error::InvalidParameter(
                format!("the Kesten–McKay law needs d ≥ 2, got {d}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Semicircle => "semicircle".into(),
            Self::KestenMcKay { d } => format!("kesten-mckay({d})"),
            Self::DilatedKestenMcKay { d } => format!("dilated-kesten-mckay({d})"),
        }
    }

    /// Support radius `r`; the support is `[−r, r]`.
    pub fn radius(&self) -> f64 {
        match *self {
            Self::Semicircle => 2.0,
            Self::KestenMcKay { d } => 2.0 * (d as f64 - 1.0).sqrt(),
            Self::DilatedKestenMcKay { d } => 2.0 * (1.0 - 1.0 / d as f64).sqrt(),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let r = self.radius();
        (-r, r)
    }

    pub fn density(&self, x: f64) -> f64 {
        let r = self.radius();
        if !(x.abs() < r) {
            return 0.0;
        }
        let root = (r * r - x * x).sqrt();
        match *self {
            Self::Semicircle => root / (2.0 * PI),
            Self::KestenMcKay { d } => {
                let d = d as f64;
                d / (d * d - x * x) * root / (2.0 * PI)
            }
            Self::DilatedKestenMcKay { d } => {
                let d = d as f64;
                d / (d - x * x) * root / (2.0 * PI)
            }
        }
    }

    /// `f(r·sin θ)·r·cos θ`, written so that no cancellation occurs near
    /// `θ = ±π/2`.
    fn theta_integrand(&self, theta: f64) -> f64 {
        let r = self.radius();
        let c2 = theta.cos().powi(2);
        match *self {
            Self::Semicircle => r * r * c2 / (2.0 * PI),
            Self::KestenMcKay { d } => {
                // d² − r² sin²θ = (d − 2)² + r² cos²θ
                let d = d as f64;
                d * r * r * c2 / ((d - 2.0).powi(2) + r * r * c2) / (2.0 * PI)
            }
            Self::DilatedKestenMcKay { d } => {
                // d − r² sin²θ = (d − 2)²/d + r² cos²θ
                let d = d as f64;
                d * r * r * c2 / ((d - 2.0).powi(2) / d + r * r * c2) / (2.0 * PI)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        let r = self.radius();
        if x <= -r {
            return Ok(0.0);
        }
        if x >= r {
            return Ok(1.0);
        }
        if let Self::Semicircle = self {
            return Ok(semicircle_cdf(x));
        }
        let upper = (x / r).asin();
        let v = integrate(|t| self.theta_integrand(t), -FRAC_PI_2, upper, CDF_TOLERANCE)?;
        Ok(v.clamp(0.0, 1.0))
    }

    /// `∫ x^p f(x) dx`.
    pub fn moment(&self, p: u32, tol: f64) -> Result<f64> {
        self.validate()?;
        let r = self.radius();
        integrate(|t| (r * t.sin()).powi(p as i32) * self.theta_integrand(t), -FRAC_PI_2, FRAC_PI_2, tol)
    }

    /// Trapezoid rule in `θ` on `points` equally spaced nodes.
    pub fn trapezoid_mass(&self, points: usize) -> f64 {
        let h = PI / (points - 1) as f64;
        let inner: f64 = (1..points - 1).map(|k| self.theta_integrand(-FRAC_PI_2 + k as f64 * h)).sum();
        let ends = 0.5 * (self.theta_integrand(-FRAC_PI_2) + self.theta_integrand(FRAC_PI_2));
        h * (inner + ends)
    }
}

pub fn semicircle_density(x: f64) -> f64 {
    DensitySpec::Semicircle.density(x)
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
}

pub fn km_density(d: usize, x: f64) -> Result<f64> {
    Ok(DensitySpec::new_kesten_mckay(d, false)?.density(x))
}

pub fn km_dilated_density(d: usize, x: f64) -> Result<f64> {
    Ok(DensitySpec::new_kesten_mckay(d, true)?.density(x))
}

pub fn km_dilated_cdf(d: usize, x: f64) -> Result<f64> {
    DensitySpec::new_kesten_mckay(d, true)?.cdf(x)
}
