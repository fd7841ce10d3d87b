//! Pointwise material laws: the Flory–Huggins free energy and its
//! convex–concave splitting, the secant quotient used in the
//! Crank–Nicolson potential term, truncation, mobility, viscosity and
//! Boussinesq buoyancy.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default switch between the secant quotient and its midpoint limit.
pub const SECANT_THRESHOLD: f64 = 1e-7;

fn check_open(phi: f64) -> Result<()> {
    if phi.abs() < 1.0 && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { value: phi })
    }
}

/// Convex part `F_v`.
pub fn convex_energy(phi: f64) -> Result<f64> {
    check_open(phi)?;
    Ok(convex_energy_unchecked(phi))
}

pub(crate) fn convex_energy_unchecked(phi: f64) -> f64 {
    0.5 * ((1.0 + phi) * (phi).ln_1p() + (1.0 - phi) * (-phi).ln_1p())
}

/// Concave part `F_n = -(theta_c / 2) phi^2`.
pub fn concave_energy(phi: f64, theta_c: f64) -> f64 {
    -0.5 * theta_c * phi * phi
}

/// Flory–Huggins energy density `F = F_v + F_n`.
pub fn free_energy(phi: f64, theta_c: f64) -> Result<f64> {
    Ok(convex_energy(phi)? + concave_energy(phi, theta_c))
}

/// `f_v = F_v' = (ln(1+phi) - ln(1-phi)) / 2`.
pub fn convex_force(phi: f64) -> Result<f64> {
    check_open(phi)?;
    Ok(convex_force_unchecked(phi))
}

pub(crate) fn convex_force_unchecked(phi: f64) -> f64 {
    0.5 * (phi.ln_1p() - (-phi).ln_1p())
}

/// `f_v'(phi) = 1 / (1 - phi^2)`.
pub fn convex_force_derivative(phi: f64) -> Result<f64> {
    check_open(phi)?;
    Ok(1.0 / ((1.0 - phi) * (1.0 + phi)))
}

/// `f_v''(phi) = 2 phi / (1 - phi^2)^2`.
pub fn convex_force_second_derivative(phi: f64) -> Result<f64> {
    check_open(phi)?;
    let d = (1.0 - phi) * (1.0 + phi);
    Ok(2.0 * phi / (d * d))
}

/// `f_n(phi) = -theta_c phi`.
pub fn concave_force(phi: f64, theta_c: f64) -> f64 {
    -theta_c * phi
}

/// Truncation `[x]` onto `[-1, 1]`.
pub fn clamp(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// `f_v` with linear extension beyond `|s| = 1 - 1/N`.
pub fn convex_force_regularized(phi: f64, n: f64) -> f64 {
    let edge = 1.0 - 1.0 / n;
    if phi.abs() <= edge {
        convex_force_unchecked(phi)
    } else {
        let s = phi.signum();
        let slope = 1.0 / ((1.0 - edge) * (1.0 + edge));
        s * convex_force_unchecked(edge) + slope * (phi - s * edge)
    }
}

/// Derivative of [`convex_force_regularized`].
pub fn convex_force_regularized_derivative(phi: f64, n: f64) -> f64 {
    let edge = 1.0 - 1.0 / n;
    let c = phi.abs().min(edge);
    1.0 / ((1.0 - c) * (1.0 + c))
}

/// `F_v^N(phi) = int_0^phi f_v^N`.
pub fn convex_energy_regularized(phi: f64, n: f64) -> f64 {
    let edge = 1.0 - 1.0 / n;
    if phi.abs() <= edge {
        convex_energy_unchecked(phi)
    } else {
        let s = phi.signum();
        let d = phi - s * edge;
        let slope = 1.0 / ((1.0 - edge) * (1.0 + edge));
        convex_energy_unchecked(edge) + s * convex_force_unchecked(edge) * d + 0.5 * slope * d * d
    }
}

/// Secant quotient `G(a, b) = (F_v(a) - F_v(b)) / (a - b)`.
///
/// Below `threshold` the midpoint value `f_v((a+b)/2)` is returned; it is the
/// exact limit up to `O((a-b)^2)`.
pub fn secant_quotient(a: f64, b: f64, threshold: f64) -> Result<f64> {
    check_open(a)?;
    check_open(b)?;
    Ok(secant_quotient_unchecked(a, b, threshold))
}

pub(crate) fn secant_quotient_unchecked(a: f64, b: f64, threshold: f64) -> f64 {
    let d = a - b;
    if d.abs() > threshold {
        // evaluated from the larger argument so the value is symmetric bit for bit
        let (a, b) = if a >= b { (a, b) } else { (b, a) };
        let d = a - b;
        convex_force_unchecked(a) + 0.5 * (log1p_ratio(d / (1.0 + b)) - log1p_ratio(-d / (1.0 - b)))
    } else {
        convex_force_unchecked(0.5 * (a + b))
    }
}

/// `ln(1 + z) / z`.
fn log1p_ratio(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.ln_1p() / z
    }
}

fn log1p_ratio_derivative(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        // sum_{k>=1} (-1)^k k z^(k-1) / (k+1)
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 1..=9 {
            let kf = k as f64;
            let term = kf / (kf + 1.0) * pow;
            sum += if k % 2 == 1 { -term } else { term };
            pow *= z;
        }
        sum
    } else {
        (z / (1.0 + z) - z.ln_1p()) / (z * z)
    }
}

/// `dG/da`, consistent with [`secant_quotient`] on both sides of the switch.
pub fn secant_quotient_derivative(a: f64, b: f64, threshold: f64) -> Result<f64> {
    check_open(a)?;
    check_open(b)?;
    Ok(secant_quotient_derivative_unchecked(a, b, threshold))
}

pub(crate) fn secant_quotient_derivative_unchecked(a: f64, b: f64, threshold: f64) -> f64 {
    let d = a - b;
    if d.abs() > threshold {
        let (u, v) = (d / (1.0 + b), -d / (1.0 - b));
        1.0 / ((1.0 - a) * (1.0 + a)) + 0.5 * (log1p_ratio_derivative(u) / (1.0 + b) + log1p_ratio_derivative(v) / (1.0 - b))
    } else {
        let m = 0.5 * (a + b);
        0.5 / ((1.0 - m) * (1.0 + m))
    }
}

/// Convex part used by the nonlinear solvers: the exact logarithm or its
/// `N`-regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexLaw {
    Exact,
    Regularized(f64),
}

impl ConvexLaw {
    /// Whether `phi` lies in the domain of the law.
    pub fn admits(self, phi: f64) -> bool {
        match self {
            ConvexLaw::Exact => phi.abs() < 1.0,
            ConvexLaw::Regularized(_) => phi.is_finite(),
        }
    }

    pub fn energy(self, phi: f64) -> f64 {
        match self {
            ConvexLaw::Exact => convex_energy_unchecked(phi),
            ConvexLaw::Regularized(n) => convex_energy_regularized(phi, n),
        }
    }

    pub fn force(self, phi: f64) -> f64 {
        match self {
            ConvexLaw::Exact => convex_force_unchecked(phi),
            ConvexLaw::Regularized(n) => convex_force_regularized(phi, n),
        }
    }

    pub fn force_derivative(self, phi: f64) -> f64 {
        match self {
            ConvexLaw::Exact => 1.0 / ((1.0 - phi) * (1.0 + phi)),
            ConvexLaw::Regularized(n) => convex_force_regularized_derivative(phi, n),
        }
    }

    /// Secant quotient of the law's energy with midpoint fallback.
    pub fn secant(self, a: f64, b: f64, threshold: f64) -> f64 {
        if self == ConvexLaw::Exact {
            return secant_quotient_unchecked(a, b, threshold);
        }
        let d = a - b;
        if d.abs() > threshold {
            (self.energy(a) - self.energy(b)) / d
        } else {
            self.force(0.5 * (a + b))
        }
    }

    /// `d/da` of [`ConvexLaw::secant`].
    pub fn secant_derivative(self, a: f64, b: f64, threshold: f64) -> f64 {
        if self == ConvexLaw::Exact {
            return secant_quotient_derivative_unchecked(a, b, threshold);
        }
        let d = a - b;
        if d.abs() > threshold {
            (self.force(a) - self.secant(a, b, threshold)) / d
        } else {
            0.5 * self.force_derivative(0.5 * (a + b))
        }
    }
}

/// Mobility law `M(phi)`.
#[derive(Clone)]
pub enum Mobility {
    Constant(f64),
    /// Arbitrary law with declared bounds `0 < m1 <= M <= m2`.
    Custom {
        law: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        m1: f64,
        m2: f64,
    },
}

impl fmt::Debug for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mobility::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Mobility::Custom { m1, m2, .. } => f
                .debug_struct("Custom")
                .field("m1", m1)
                .field("m2", m2)
                .finish_non_exhaustive(),
        }
    }
}

impl Mobility {
    pub fn eval(&self, phi: f64) -> f64 {
        match self {
            Mobility::Constant(m) => *m,
            Mobility::Custom { law, m1, m2 } => law(phi).clamp(*m1, *m2),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Mobility::Constant(m) => (*m, *m),
            Mobility::Custom { m1, m2, .. } => (*m1, *m2),
        }
    }
}

/// Boussinesq buoyancy data: heavy density `rho1`, light density `rho2`, gravity `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Buoyancy {
    pub rho1: f64,
    pub rho2: f64,
    pub g: f64,
}

impl Buoyancy {
    /// Vertical body force `-g phi (rho1 - rho2)`.
    pub fn force(&self, phi: f64) -> f64 {
        -self.g * phi * (self.rho1 - self.rho2)
    }
}

/// Physical parameters of the non-dimensional model.
#[derive(Debug, Clone)]
pub struct PhysParams {
    pub epsilon: f64,
    pub peclet: f64,
    pub reynolds: f64,
    /// Modified Weber number; `None` switches the surface-tension coupling off.
    pub weber: Option<f64>,
    pub theta_c: f64,
    pub mobility: Mobility,
    /// Viscosity ratio `eta_2 / eta_1`.
    pub viscosity_ratio: f64,
    /// Scale applied to the viscosity blend (the `eta` value quoted per scenario).
    pub viscosity_scale: f64,
    pub buoyancy: Option<Buoyancy>,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            peclet: 1.0,
            reynolds: 1.0,
            weber: Some(1.0),
            theta_c: 2.0,
            mobility: Mobility::Constant(1.0),
            viscosity_ratio: 1.0,
            viscosity_scale: 1.0,
            buoyancy: None,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.theta_c > 1.0) {
            return bad("theta_c must exceed 1, got theta_c", self.theta_c);
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive, got epsilon", self.epsilon);
        }
        if !(self.peclet > 0.0) {
            return bad("Pe must be positive, got Pe", self.peclet);
        }
        if !(self.reynolds > 0.0) {
            return bad("Re must be positive, got Re", self.reynolds);
        }
        if let Some(we) = self.weber {
            if !(we > 0.0) {
                return bad("We* must be positive, got We*", we);
            }
        }
        let (m1, m2) = self.mobility.bounds();
        if !(m1 > 0.0 && m1 <= m2) {
            return Err(Error::InvalidParameter(format!(
                "mobility bounds must satisfy 0 < m1 <= m2, got ({m1}, {m2})"
            )));
        }
        if !(self.viscosity_ratio > 0.0) || !(self.viscosity_scale > 0.0) {
            return Err(Error::InvalidParameter("viscosity must be positive".into()));
        }
        Ok(())
    }

    /// `eta(phi) = (1-phi)/2 + (1+phi)/2 * eta2/eta1`, times the scenario scale.
    pub fn viscosity(&self, phi: f64) -> f64 {
        self.viscosity_scale
            * (0.5 * (1.0 - phi) + 0.5 * (1.0 + phi) * self.viscosity_ratio)
    }

    pub fn mobility(&self, phi: f64) -> f64 {
        self.mobility.eval(phi)
    }

    /// Coefficient multiplying `grad mu` in the phase equation: `M / Pe`.
    pub fn effective_mobility(&self, phi: f64) -> f64 {
        self.mobility.eval(phi) / self.peclet
    }

    /// `eps^-1 / We*`, or zero without surface tension.
    pub fn capillary_coupling(&self) -> f64 {
        match self.weber {
            Some(we) => 1.0 / (self.epsilon * we),
            None => 0.0,
        }
    }

    /// `rho_0 = (rho1 + rho2) / 2` with buoyancy, otherwise 1. Scales the
    /// momentum time derivative and viscous term.
    pub fn background_density(&self) -> f64 {
        self.buoyancy.map_or(1.0, |b| 0.5 * (b.rho1 + b.rho2))
    }

    pub fn buoyancy_force(&self, phi: f64) -> f64 {
        self.buoyancy.map_or(0.0, |b| b.force(phi))
    }
}
