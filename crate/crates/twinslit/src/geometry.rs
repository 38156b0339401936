//! Physical configuration of the double-slit experiment and conversions
//! between detector positions and diffraction angles.
//!
//! Sign convention, shared by every module: the median symmetry axis of the
//! double slit is the coordinate origin, and "left looking toward the
//! crystal" is negative.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exactly two degrees, the incidence angle at which the coincidence
/// maximum is expected.
pub const TWO_DEGREES: f64 = 0.034906585039886591; // 2 * pi / 180

/// Double slit and illumination parameters.
///
/// Defaults are the published values: 702 nm degenerate PDC photons,
/// 100 um slit separation, 10 um slit width, +/-2 degree incidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGeometry {
    /// Photon wavelength in meters.
    pub wavelength: f64,
    /// Center-to-center slit separation `s` in meters.
    pub slit_separation: f64,
    /// Slit width `w` in meters.
    pub slit_width: f64,
    /// Incidence angle on slit A in radians.
    pub incidence_angle_a: f64,
    /// Incidence angle on slit B in radians.
    pub incidence_angle_b: f64,
}

impl Default for ExperimentGeometry {
    fn default() -> Self {
        Self {
            wavelength: 702e-9,
            slit_separation: 100e-6,
            slit_width: 10e-6,
            incidence_angle_a: TWO_DEGREES,
            incidence_angle_b: -TWO_DEGREES,
        }
    }
}

impl ExperimentGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::Config(format!(
                "geometry.wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if !(self.slit_separation > 0.0 && self.slit_separation.is_finite()) {
            return Err(Error::Config(format!(
                "geometry.slit_separation must be positive, got {}",
                self.slit_separation
            )));
        }
        if !(self.slit_width > 0.0 && self.slit_width.is_finite()) {
            return Err(Error::Config(format!(
                "geometry.slit_width must be positive, got {}",
                self.slit_width
            )));
        }
        if self.slit_width >= self.slit_separation {
            return Err(Error::Config(format!(
                "geometry.slit_width ({}) must be smaller than slit_separation ({})",
                self.slit_width, self.slit_separation
            )));
        }
        for (name, a) in [
            ("incidence_angle_a", self.incidence_angle_a),
            ("incidence_angle_b", self.incidence_angle_b),
        ] {
            if !(a.is_finite() && a.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(Error::Config(format!(
                    "geometry.{name} must lie in (-pi/2, pi/2), got {a}"
                )));
            }
        }
        Ok(())
    }

    /// Wave vector `k = 2 pi / wavelength`.
    pub fn wavevector(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// True when the incidence angles satisfy the symmetric default
    /// `theta_i^A = -theta_i^B`; the mirror invariants only hold then.
    pub fn is_mirror_symmetric(&self) -> bool {
        self.incidence_angle_a == -self.incidence_angle_b
    }
}

/// A detector lens behind the slits: lateral offset of the lens center,
/// distance of the lens plane from the slits, and lens diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorPlacement {
    /// Signed lateral offset of the lens center in meters (negative = left).
    pub lateral_offset: f64,
    /// Distance of the lens plane from the slit plane in meters.
    pub plane_distance: f64,
    /// Lens diameter in meters.
    #[serde(default = "default_lens_diameter")]
    pub lens_diameter: f64,
}

fn default_lens_diameter() -> f64 {
    6e-3
}

impl DetectorPlacement {
    pub fn new(lateral_offset: f64, plane_distance: f64, lens_diameter: f64) -> Self {
        Self {
            lateral_offset,
            plane_distance,
            lens_diameter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plane_distance > 0.0 && self.plane_distance.is_finite()) {
            return Err(Error::Config(format!(
                "detector.plane_distance must be positive, got {}",
                self.plane_distance
            )));
        }
        if !(self.lens_diameter >= 0.0 && self.lens_diameter.is_finite()) {
            return Err(Error::Config(format!(
                "detector.lens_diameter must be nonnegative, got {}",
                self.lens_diameter
            )));
        }
        if self.lens_diameter >= self.plane_distance {
            return Err(Error::Config(
                "detector.lens_diameter must be much smaller than plane_distance".into(),
            ));
        }
        if !self.lateral_offset.is_finite() {
            return Err(Error::Config("detector.lateral_offset must be finite".into()));
        }
        Ok(())
    }

    /// Diffraction angle of the lens center.
    pub fn center_angle(&self) -> Result<f64> {
        angle_from_position(self.lateral_offset, self.plane_distance)
    }

    /// Transverse interval covered by the lens in its own plane.
    pub fn aperture_interval(&self) -> (f64, f64) {
        let half = 0.5 * self.lens_diameter;
        (self.lateral_offset - half, self.lateral_offset + half)
    }
}

/// Diffraction angle seen from the slit plane for a transverse `offset` at
/// longitudinal `distance`. Exact arctangent, no small-angle approximation.
pub fn angle_from_position(offset: f64, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be positive, got {distance}"
        )));
    }
    Ok((offset / distance).atan())
}

/// Inverse of [`angle_from_position`].
pub fn position_from_angle(angle: f64, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be positive, got {distance}"
        )));
    }
    Ok(distance * angle.tan())
}

/// Angular acceptance interval of a detector lens:
/// `[angle(offset - d/2, z), angle(offset + d/2, z)]`.
pub fn angular_acceptance(placement: &DetectorPlacement) -> Result<(f64, f64)> {
    placement.validate()?;
    let (lo, hi) = placement.aperture_interval();
    Ok((
        angle_from_position(lo, placement.plane_distance)?,
        angle_from_position(hi, placement.plane_distance)?,
    ))
}
