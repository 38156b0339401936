//! The symmetrized two-photon wavefunction: slit modes, paraxial Fresnel
//! propagation, and the guidance velocity field consumed by the trajectory
//! engine.
//!
//! The longitudinal coordinate `z` plays the role of time; both photons
//! share the same `z` parameter (degenerate photons co-propagate).

pub mod fresnel;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quad::GaussLegendre;
use crate::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Transmission profile of a slit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Unit transmission inside `[center - w/2, center + w/2]`, zero outside.
    Rect,
    /// `exp(-(x - center)^2 / w^2)`, kept for smooth-field debugging.
    Gaussian,
}

/// One slit of the pair, with the incidence angle imprinted as a transverse
/// phase `k sin(tilt) x'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitMode {
    /// Slit center in meters (`+s/2` or `-s/2` under the default setup).
    pub center: f64,
    /// Slit width in meters.
    pub width: f64,
    /// Incidence angle in radians.
    pub tilt: f64,
    pub profile: Profile,
}

impl SlitMode {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Config(format!(
                "slit width must be positive, got {}",
                self.width
            )));
        }
        if !(self.center.is_finite() && self.tilt.is_finite()) {
            return Err(Error::Config("slit center and tilt must be finite".into()));
        }
        Ok(())
    }

    /// The mirror image of this mode: center and tilt negated.
    pub fn mirrored(&self) -> Self {
        Self {
            center: -self.center,
            tilt: -self.tilt,
            ..*self
        }
    }

    /// Support of the rect profile (also used as the nominal extent of the
    /// gaussian profile).
    pub fn support(&self) -> (f64, f64) {
        (self.center - 0.5 * self.width, self.center + 0.5 * self.width)
    }

    /// `int |T|^2 dx'`: the norm carried through free propagation.
    pub fn transmission_norm(&self) -> f64 {
        match self.profile {
            Profile::Rect => self.width,
            Profile::Gaussian => self.width * (std::f64::consts::PI / 2.0).sqrt(),
        }
    }
}

/// Which evaluation route computes the Fresnel integral of a rect mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    /// Fixed-order Gauss-Legendre quadrature over the slit support, with the
    /// gradient obtained by differentiating under the integral sign.
    Quadrature,
    /// Closed form in terms of the complex Fresnel integral, with the
    /// gradient from the endpoint (integration-by-parts) identity. Several
    /// times faster; kept bit-consistent with the quadrature route by a
    /// standing equivalence test.
    ClosedForm,
}

/// Amplitude and transverse gradient of a propagated mode at one point.
#[derive(Debug, Clone, Copy)]
pub struct ModeValue {
    pub value: Complex64,
    pub gradient: Complex64,
}

/// Label for the two slit modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slit {
    A,
    B,
}

/// Immutable symmetrized two-photon state; amplitude and velocity
/// evaluations are pure and safe to call concurrently.
#[derive(Debug, Clone)]
pub struct TwoPhotonState {
    pub mode_a: SlitMode,
    pub mode_b: SlitMode,
    /// Wave vector `k` in rad/m.
    pub wavevector: f64,
    method: EvalMethod,
    rule: GaussLegendre,
}

impl TwoPhotonState {
    /// `quadrature_order` is the fixed Gauss-Legendre order for rect-mode
    /// Fresnel integrals (default 64 in the run configuration).
    pub fn new(
        mode_a: SlitMode,
        mode_b: SlitMode,
        wavevector: f64,
        method: EvalMethod,
        quadrature_order: usize,
    ) -> Result<Self> {
        mode_a.validate()?;
        mode_b.validate()?;
        if !(wavevector > 0.0 && wavevector.is_finite()) {
            return Err(Error::Config(format!(
                "wavevector must be positive, got {wavevector}"
            )));
        }
        Ok(Self {
            mode_a,
            mode_b,
            wavevector,
            method,
            rule: GaussLegendre::new(quadrature_order)?,
        })
    }

    /// The default experimental state: photon A through the right slit at
    /// `+s/2` tilted by `theta_i^A`, photon B through the mirror slit.
    pub fn from_geometry(
        geometry: &crate::geometry::ExperimentGeometry,
        profile: Profile,
        method: EvalMethod,
        quadrature_order: usize,
    ) -> Result<Self> {
        let mode_a = SlitMode {
            center: 0.5 * geometry.slit_separation,
            width: geometry.slit_width,
            tilt: geometry.incidence_angle_a,
            profile,
        };
        let mode_b = SlitMode {
            center: -0.5 * geometry.slit_separation,
            width: geometry.slit_width,
            tilt: geometry.incidence_angle_b,
            profile,
        };
        Self::new(mode_a, mode_b, geometry.wavevector(), method, quadrature_order)
    }

    pub fn mode(&self, slit: Slit) -> &SlitMode {
        match slit {
            Slit::A => &self.mode_a,
            Slit::B => &self.mode_b,
        }
    }

    /// True when `mode_B` is the mirror image of `mode_A`.
    pub fn is_mirror_symmetric(&self) -> bool {
        self.mode_b == self.mode_a.mirrored()
    }

    /// Fresnel-propagated single-slit amplitude `psi_l(x, z)`.
    pub fn propagate_mode(&self, slit: Slit, x: f64, z: f64) -> Result<Complex64> {
        Ok(self.mode_value(slit, x, z)?.value)
    }

    /// Amplitude and transverse gradient of one propagated mode.
    pub fn mode_value(&self, slit: Slit, x: f64, z: f64) -> Result<ModeValue> {
        if !(z > 0.0) {
            return Err(Error::Domain(format!(
                "propagation distance must be positive, got {z}"
            )));
        }
        let mode = self.mode(slit);
        Ok(match (mode.profile, self.method) {
            (Profile::Gaussian, _) => gaussian_mode_value(mode, self.wavevector, x, z),
            (Profile::Rect, EvalMethod::Quadrature) => {
                rect_mode_value_quadrature(mode, self.wavevector, x, z, &self.rule)
            }
            (Profile::Rect, EvalMethod::ClosedForm) => {
                rect_mode_value_closed(mode, self.wavevector, x, z)
            }
        })
    }

    /// Symmetrized two-photon amplitude
    /// `[psi_A(x1) psi_B(x2) + psi_B(x1) psi_A(x2)] / sqrt(2)`.
    pub fn two_photon_amplitude(&self, x1: f64, x2: f64, z: f64) -> Result<Complex64> {
        let a1 = self.propagate_mode(Slit::A, x1, z)?;
        let b2 = self.propagate_mode(Slit::B, x2, z)?;
        let b1 = self.propagate_mode(Slit::B, x1, z)?;
        let a2 = self.propagate_mode(Slit::A, x2, z)?;
        Ok((a1 * b2 + b1 * a2) * FRAC_1_SQRT_2)
    }

    /// `|psi(x1, x2, z)|^2`.
    pub fn joint_density(&self, x1: f64, x2: f64, z: f64) -> Result<f64> {
        Ok(self.two_photon_amplitude(x1, x2, z)?.norm_sqr())
    }

    /// Amplitude together with both configuration-space gradients.
    pub fn amplitude_and_gradients(
        &self,
        x1: f64,
        x2: f64,
        z: f64,
    ) -> Result<(Complex64, Complex64, Complex64)> {
        let a1 = self.mode_value(Slit::A, x1, z)?;
        let b1 = self.mode_value(Slit::B, x1, z)?;
        let a2 = self.mode_value(Slit::A, x2, z)?;
        let b2 = self.mode_value(Slit::B, x2, z)?;
        let psi = (a1.value * b2.value + b1.value * a2.value) * FRAC_1_SQRT_2;
        let d1 = (a1.gradient * b2.value + b1.gradient * a2.value) * FRAC_1_SQRT_2;
        let d2 = (a1.value * b2.gradient + b1.value * a2.gradient) * FRAC_1_SQRT_2;
        Ok((psi, d1, d2))
    }

    /// Guidance velocity `v_j = (1/k) Im(d_j psi / psi)` as transverse
    /// slopes dx/dz. Below `settings.node_floor` the velocity is clamped to
    /// `+/- v_max` and flagged instead of erroring.
    pub fn velocity_field(
        &self,
        x1: f64,
        x2: f64,
        z: f64,
        settings: &GuidanceSettings,
    ) -> Result<VelocitySample> {
        let (psi, d1, d2) = self.amplitude_and_gradients(x1, x2, z)?;
        let density = psi.norm_sqr();
        let scale = settings.velocity_scale / self.wavevector;
        if density < settings.node_floor {
            let clamp = |d: Complex64| -> f64 {
                if density == 0.0 {
                    0.0
                } else {
                    let raw = scale * (d / psi).im;
                    raw.clamp(-settings.v_max, settings.v_max)
                }
            };
            return Ok(VelocitySample {
                v1: clamp(d1),
                v2: clamp(d2),
                regularized: true,
            });
        }
        let v1 = scale * (d1 / psi).im;
        let v2 = scale * (d2 / psi).im;
        Ok(VelocitySample {
            v1: v1.clamp(-settings.v_max, settings.v_max),
            v2: v2.clamp(-settings.v_max, settings.v_max),
            regularized: v1.abs() > settings.v_max || v2.abs() > settings.v_max,
        })
    }

    /// Peak joint density on a grid over both slit supports at `z`; the
    /// absolute node floor is a configured fraction of this value.
    pub fn peak_joint_density(&self, z: f64, grid: usize) -> Result<f64> {
        let (a_lo, a_hi) = self.mode_a.support();
        let (b_lo, b_hi) = self.mode_b.support();
        let mut peak = 0.0f64;
        for i in 0..grid {
            let x1 = a_lo + (a_hi - a_lo) * (i as f64 + 0.5) / grid as f64;
            for j in 0..grid {
                let x2 = b_lo + (b_hi - b_lo) * (j as f64 + 0.5) / grid as f64;
                peak = peak.max(self.joint_density(x1, x2, z)?);
            }
        }
        Ok(peak)
    }
}

/// Node regularization and scaling knobs for the guidance law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GuidanceSettings {
    /// Absolute `|psi|^2` threshold below which velocities are clamped.
    pub node_floor: f64,
    /// Velocity clamp (transverse slope).
    pub v_max: f64,
    /// Multiplies the computed velocities; 1.0 for physics, != 1.0 only for
    /// the corrupted-field negative control of the equivariance check.
    pub velocity_scale: f64,
}

impl Default for GuidanceSettings {
    fn default() -> Self {
        Self {
            node_floor: 0.0,
            v_max: 10.0,
            velocity_scale: 1.0,
        }
    }
}

/// Velocity field sample for one configuration point.
#[derive(Debug, Clone, Copy)]
pub struct VelocitySample {
    pub v1: f64,
    pub v2: f64,
    /// True when node regularization fired.
    pub regularized: bool,
}

/// Gauss-Legendre evaluation of the Fresnel integral
/// `psi(x, z) = sqrt(k/(2 pi i z)) int T(x') e^{i k sin(tilt) x'}
///  e^{i k (x - x')^2 / (2 z)} dx'`
/// over the rect support, accumulating the gradient integrand
/// `i k (x - x')/z` in the same pass.
fn rect_mode_value_quadrature(
    mode: &SlitMode,
    k: f64,
    x: f64,
    z: f64,
    rule: &GaussLegendre,
) -> ModeValue {
    let (lo, hi) = mode.support();
    let sin_tilt = mode.tilt.sin();
    let inv_2z = 0.5 / z;
    let mut value = Complex64::new(0.0, 0.0);
    let mut gradient = Complex64::new(0.0, 0.0);
    for (xp, wgt) in rule.mapped(lo, hi) {
        let dx = x - xp;
        let phase = k * (sin_tilt * xp + dx * dx * inv_2z);
        let e = Complex64::from_polar(wgt, phase);
        value += e;
        gradient += e * Complex64::new(0.0, k * dx / z);
    }
    let pref = Complex64::from_polar(
        (k / (2.0 * std::f64::consts::PI * z)).sqrt(),
        -std::f64::consts::FRAC_PI_4,
    );
    ModeValue {
        value: pref * value,
        gradient: pref * gradient,
    }
}

/// Closed form of the same integral:
/// `psi = e^{-i pi/4}/sqrt(2) e^{i(k sigma x - k z sigma^2/2)}
///  [E(t2) - E(t1)]` with `t_j = (l_j - x + z sigma) sqrt(k/(pi z))`
/// and `E` the complex Fresnel integral; the gradient follows from the
/// endpoint identity `d psi/dx = i k sigma psi - pref (e^{i pi t2^2/2} -
/// e^{i pi t1^2/2}) sqrt(k/(pi z))`.
fn rect_mode_value_closed(mode: &SlitMode, k: f64, x: f64, z: f64) -> ModeValue {
    let (lo, hi) = mode.support();
    let sigma = mode.tilt.sin();
    let x0 = x - z * sigma;
    let kappa = (k / (std::f64::consts::PI * z)).sqrt();
    let t1 = (lo - x0) * kappa;
    let t2 = (hi - x0) * kappa;
    let carrier = Complex64::from_polar(
        FRAC_1_SQRT_2,
        k * (sigma * x - 0.5 * z * sigma * sigma) - std::f64::consts::FRAC_PI_4,
    );
    let value = carrier * (fresnel::fresnel_e(t2) - fresnel::fresnel_e(t1));
    let half_pi = 0.5 * std::f64::consts::PI;
    let edge = Complex64::from_polar(1.0, half_pi * t2 * t2)
        - Complex64::from_polar(1.0, half_pi * t1 * t1);
    let gradient = Complex64::new(0.0, k * sigma) * value - carrier * kappa * edge;
    ModeValue { value, gradient }
}

/// Closed-form Fresnel propagation of the gaussian profile
/// `T(x') = exp(-(x' - c)^2 / w^2)`.
fn gaussian_mode_value(mode: &SlitMode, k: f64, x: f64, z: f64) -> ModeValue {
    let a = 0.5 * k / z;
    let c = mode.center;
    let w2 = mode.width * mode.width;
    let sigma = mode.tilt.sin();
    // exponent: -(x'-c)^2/w^2 + i k sigma x' + i a (x - x')^2
    //         = -alpha x'^2 + beta x' + gamma
    let alpha = Complex64::new(1.0 / w2, -a);
    let beta = Complex64::new(2.0 * c / w2, k * sigma - 2.0 * a * x);
    let gamma = Complex64::new(-c * c / w2, a * x * x);
    let pref = Complex64::from_polar(
        (k / (2.0 * std::f64::consts::PI * z)).sqrt(),
        -std::f64::consts::FRAC_PI_4,
    );
    let value =
        pref * (Complex64::new(std::f64::consts::PI, 0.0) / alpha).sqrt()
            * (beta * beta / (4.0 * alpha) + gamma).exp();
    // d/dx of the exponent: beta' = -2ia, gamma' = 2iax
    let beta_p = Complex64::new(0.0, -2.0 * a);
    let gamma_p = Complex64::new(0.0, 2.0 * a * x);
    let gradient = value * (beta * beta_p / (2.0 * alpha) + gamma_p);
    ModeValue { value, gradient }
}
