//! Lag weights from strip masses of a symmetric unimodal density.
//!
//! The central strip `[-x, x]` is sized so its mass equals the configured
//! central coefficient `a0`. Further strips of width `2x` are added on both
//! sides until the covered mass `F((2n+1)x) - F(-(2n+1)x)` reaches `1 - tau`;
//! `a_j` is the mass of strip `j`.
//!
//! The Gaussian CDF is `erfc(-z / sqrt 2) / 2` with `erfc` from the `libm`
//! crate, a port of the FreeBSD msun implementation (rational approximations
//! on sub-intervals, error below 1 ulp).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 200;
const PROBABILITY_TOL: f64 = 1e-12;

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub type CdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Symmetric, unimodal density described by its CDF.
#[derive(Clone)]
pub enum DensitySpec {
    Gaussian {
        sigma: f64,
    },
    Uniform {
        half_width: f64,
    },
    /// Caller-supplied CDF with `F(-t) = 1 - F(t)`.
    Custom(CdfFn),
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Gaussian { sigma } => write!(f, "Gaussian {{ sigma: {sigma} }}"),
            DensitySpec::Uniform { half_width } => {
                write!(f, "Uniform {{ half_width: {half_width} }}")
            }
            DensitySpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Gaussian { sigma: 1.0 }
    }
}

impl DensitySpec {
    pub fn custom(cdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DensitySpec::Custom(Arc::new(cdf))
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            DensitySpec::Gaussian { sigma } => std_normal_cdf(t / sigma),
            DensitySpec::Uniform { half_width: h } => ((t + h) / (2.0 * h)).clamp(0.0, 1.0),
            DensitySpec::Custom(f) => f(t),
        }
    }

    /// Mass of `[-x, x]`.
    pub fn central_mass(&self, x: f64) -> f64 {
        self.cdf(x) - self.cdf(-x)
    }

    fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::Gaussian { sigma } if !(sigma.is_finite() && *sigma > 0.0) => Err(
                Error::validation(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            DensitySpec::Uniform { half_width }
                if !(half_width.is_finite() && *half_width > 0.0) =>
            {
                Err(Error::validation(format!(
                    "uniform half-width must be positive, got {half_width}"
                )))
            }
            DensitySpec::Custom(f) => spot_check_custom(f.as_ref()),
            _ => Ok(()),
        }
    }
}

/// Symmetry at 10 points and monotonicity at 100 points on a log-spaced grid.
fn spot_check_custom(f: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Result<()> {
    for i in 0..10 {
        let t = 0.01 * 3f64.powi(i);
        let (lo, hi) = (f(-t), f(t));
        if !(lo.is_finite() && hi.is_finite()) || (lo + hi - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "custom CDF is not symmetric at t = {t}: F(-t) + F(t) = {}",
                lo + hi
            )));
        }
    }
    let mut prev = f64::NEG_INFINITY;
    for i in 0..100 {
        let t = -50.0 + i as f64 * (100.0 / 99.0);
        let v = f(t);
        if !(0.0..=1.0).contains(&v) || v < prev {
            return Err(Error::validation(format!(
                "custom CDF is not a non-decreasing probability at t = {t}"
            )));
        }
        prev = v;
    }
    Ok(())
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

/// Half-width `x` of the central strip: `F(x) - F(-x) = a0`.
///
/// Bisection on a bracket grown by doubling from `[0, 1]`, run until the
/// bracket stops shrinking in floating point (or 200 steps).
pub fn strip_half_width(a0: f64, density: &DensitySpec) -> Result<f64> {
    check_open_unit("a0", a0)?;
    density.validate()?;
    let g = |x: f64| density.central_mass(x) - a0;

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::validation("could not bracket the central strip"));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    debug_assert!(g(x).abs() <= PROBABILITY_TOL.max(4.0 * f64::EPSILON));
    Ok(x)
}

/// Smallest `n` with `F((2n+1)x) - F(-(2n+1)x) >= 1 - tau`.
pub fn half_support(x: f64, tau: f64, density: &DensitySpec) -> Result<usize> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::validation(format!(
            "strip half-width must be positive, got {x}"
        )));
    }
    check_open_unit("tau", tau)?;
    let target = 1.0 - tau;
    (0..1_000_000usize)
        .find(|&n| density.central_mass((2 * n + 1) as f64 * x) >= target)
        .ok_or_else(|| Error::validation("density tail never drops below tau"))
}

/// Symmetric coefficient vector `a_{-n}..a_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    coefficients: Vec<f64>,
    n: usize,
    a0: f64,
    tau: f64,
    strip_half_width: f64,
}

impl WeightVector {
    /// Builds a vector from raw one-sided coefficients `a_0..a_n`
    /// (e.g. weights obtained elsewhere). Checks symmetry-compatible shape:
    /// non-increasing, positive, total mass at most one.
    pub fn from_one_sided(one_sided: &[f64], tau: f64) -> Result<Self> {
        let Some(&a0) = one_sided.first() else {
            return Err(Error::validation("empty coefficient list"));
        };
        if one_sided.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::validation("coefficients must be positive"));
        }
        if one_sided.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::validation(
                "coefficients must be non-increasing in |j|",
            ));
        }
        let n = one_sided.len() - 1;
        let mut coefficients: Vec<f64> = one_sided.iter().rev().copied().collect();
        coefficients.extend_from_slice(&one_sided[1..]);
        let mass: f64 = coefficients.iter().sum();
        if mass > 1.0 + 1e-12 {
            return Err(Error::validation(format!(
                "coefficient mass {mass} exceeds 1"
            )));
        }
        Ok(Self {
            coefficients,
            n,
            a0,
            tau,
            strip_half_width: f64::NAN,
        })
    }

    /// All `2n + 1` coefficients, index `j + n` holds `a_j`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `a_j` for `-n <= j <= n`, zero outside.
    pub fn get(&self, j: isize) -> f64 {
        if j.unsigned_abs() > self.n {
            0.0
        } else {
            self.coefficients[(j + self.n as isize) as usize]
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn strip_half_width(&self) -> f64 {
        self.strip_half_width
    }

    pub fn mass(&self) -> f64 {
        self.coefficients.iter().sum()
    }
}

pub fn build_weights(a0: f64, tau: f64, density: &DensitySpec) -> Result<WeightVector> {
    let x = strip_half_width(a0, density)?;
    let n = half_support(x, tau, density)?;

    let mut one_sided = Vec::with_capacity(n + 1);
    one_sided.push(a0);
    for j in 1..=n {
        let inner = (2 * j - 1) as f64 * x;
        let outer = (2 * j + 1) as f64 * x;
        // upper tail differences keep precision far from the origin
        let mass = (density.cdf(-inner) - density.cdf(-outer)).max(0.0);
        one_sided.push(mass);
    }
    let mut coefficients: Vec<f64> = one_sided.iter().rev().copied().collect();
    coefficients.extend_from_slice(&one_sided[1..]);
    Ok(WeightVector {
        coefficients,
        n,
        a0,
        tau,
        strip_half_width: x,
    })
}
