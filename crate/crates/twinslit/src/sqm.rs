//! Standard-quantum-mechanics coincidence prediction for the two-photon
//! double slit: sinc diffraction envelopes, the two-detector coincidence
//! density, finite lens-aperture averaging, and pattern scans.

use serde::{Deserialize, Serialize};

use crate::geometry::{angular_acceptance, DetectorPlacement, ExperimentGeometry};
use crate::quad::GaussLegendre;
use crate::{Error, Result};

/// sin(u)/u with a series branch near the removable singularity; the
/// singularity sits exactly at the pattern maxima, so the branch matters.
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// Single-slit diffraction amplitude
/// `g(theta, theta_i) = sinc((k w / 2) (sin theta - sin theta_i))`.
pub fn slit_amplitude(theta: f64, theta_incidence: f64, geometry: &ExperimentGeometry) -> f64 {
    let u = 0.5 * geometry.wavevector() * geometry.slit_width * (theta.sin() - theta_incidence.sin());
    sinc(u)
}

/// Two-detector coincidence rate density
/// `C(theta1, theta2) = g1A^2 g2B^2 + g2A^2 g1B^2
///  + 2 g1A g2B g2A g1B cos(k s (sin theta1 - sin theta2))`.
pub fn coincidence_density(theta1: f64, theta2: f64, geometry: &ExperimentGeometry) -> f64 {
    let g1a = slit_amplitude(theta1, geometry.incidence_angle_a, geometry);
    let g1b = slit_amplitude(theta1, geometry.incidence_angle_b, geometry);
    let g2a = slit_amplitude(theta2, geometry.incidence_angle_a, geometry);
    let g2b = slit_amplitude(theta2, geometry.incidence_angle_b, geometry);
    let phase =
        geometry.wavevector() * geometry.slit_separation * (theta1.sin() - theta2.sin());
    let direct = g1a * g2b;
    let exchanged = g2a * g1b;
    direct * direct + exchanged * exchanged + 2.0 * direct * exchanged * phase.cos()
}

/// Coincidence density averaged over the angular acceptance of both lenses,
/// normalized by the product of interval widths. Point detectors (zero lens
/// diameter) degenerate to the density at the center angles.
pub fn aperture_averaged_rate(
    placement1: &DetectorPlacement,
    placement2: &DetectorPlacement,
    geometry: &ExperimentGeometry,
    quadrature_order: usize,
) -> Result<f64> {
    let rule = GaussLegendre::new(quadrature_order)?;
    let (a1, b1) = angular_acceptance(placement1)?;
    let (a2, b2) = angular_acceptance(placement2)?;
    let avg1 = |theta2: f64| -> f64 {
        if b1 > a1 {
            rule.integrate(a1, b1, |theta1| coincidence_density(theta1, theta2, geometry))
                / (b1 - a1)
        } else {
            coincidence_density(0.5 * (a1 + b1), theta2, geometry)
        }
    };
    if b2 > a2 {
        Ok(rule.integrate(a2, b2, avg1) / (b2 - a2))
    } else {
        Ok(avg1(0.5 * (a2 + b2)))
    }
}

/// One scan point of a coincidence pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternPoint {
    /// Lateral offset of the moving detector in meters.
    pub offset_m: f64,
    /// Center angle of the moving detector in radians.
    pub angle_rad: f64,
    /// Relative coincidence rate, global maximum normalized to 1.
    pub rate: f64,
    /// Rate uncertainty; analytic scans set 0.
    pub rate_err: f64,
}

/// Coincidence rate scan of detector 1 with detector 2 held fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoincidencePattern {
    pub fixed_placement: DetectorPlacement,
    pub points: Vec<PatternPoint>,
    /// Raw (unnormalized) value of the global maximum used to scale rates.
    pub normalization: f64,
}

/// Scans the moving detector over `scan_offsets` at `moving_distance`
/// with `fixed` held in place; rates normalized so the maximum is 1.
pub fn pattern_scan(
    fixed: &DetectorPlacement,
    scan_offsets: &[f64],
    moving_distance: f64,
    moving_lens_diameter: f64,
    geometry: &ExperimentGeometry,
    quadrature_order: usize,
) -> Result<CoincidencePattern> {
    if scan_offsets.is_empty() {
        return Err(Error::Config("pattern scan offsets must be nonempty".into()));
    }
    let mut points = Vec::with_capacity(scan_offsets.len());
    for &offset in scan_offsets {
        let moving = DetectorPlacement::new(offset, moving_distance, moving_lens_diameter);
        let rate = aperture_averaged_rate(&moving, fixed, geometry, quadrature_order)?;
        points.push(PatternPoint {
            offset_m: offset,
            angle_rad: moving.center_angle()?,
            rate,
            rate_err: 0.0,
        });
    }
    let max = points.iter().map(|p| p.rate).fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Domain(
            "pattern scan has no positive rate to normalize by".into(),
        ));
    }
    for p in &mut points {
        p.rate /= max;
    }
    Ok(CoincidencePattern {
        fixed_placement: *fixed,
        points,
        normalization: max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TWO_DEGREES;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn geom() -> ExperimentGeometry {
        ExperimentGeometry::default()
    }

    /// Independent factored-form oracle:
    /// |g1A g2B + g2A g1B e^{i k s (sin t2 - sin t1)}|^2.
    fn factored_density(theta1: f64, theta2: f64, g: &ExperimentGeometry) -> f64 {
        let g1a = slit_amplitude(theta1, g.incidence_angle_a, g);
        let g1b = slit_amplitude(theta1, g.incidence_angle_b, g);
        let g2a = slit_amplitude(theta2, g.incidence_angle_a, g);
        let g2b = slit_amplitude(theta2, g.incidence_angle_b, g);
        let phi = g.wavevector() * g.slit_separation * (theta2.sin() - theta1.sin());
        let amp = Complex64::new(g1a * g2b, 0.0)
            + Complex64::new(g2a * g1b, 0.0) * Complex64::from_polar(1.0, phi);
        amp.norm_sqr()
    }

    #[test]
    fn amplitude_is_one_at_incidence_angle() {
        let g = geom();
        for theta in [0.0, TWO_DEGREES, -TWO_DEGREES, 0.01] {
            assert_eq!(slit_amplitude(theta, theta, &g), 1.0);
        }
    }

    #[test]
    fn amplitude_at_opposite_peak_matches_extended_precision() {
        // theta = -2 deg, theta_i = +2 deg: u = -3.12364679357715859,
        // sinc(u) = 0.005744854638932927 (frozen extended-precision value)
        let g = geom();
        let a = slit_amplitude(-TWO_DEGREES, TWO_DEGREES, &g);
        assert_relative_eq!(a, 0.005744854638932927, max_relative = 1e-12);
    }

    #[test]
    fn first_envelope_zero_at_analytic_root() {
        // sin(theta) - sin(theta_i) = lambda / w = 0.0702
        let g = geom();
        let analytic = (TWO_DEGREES.sin() + g.wavelength / g.slit_width).asin();
        // bisection on the implementation
        let (mut lo, mut hi) = (analytic - 1e-3, analytic + 1e-3);
        assert!(slit_amplitude(lo, TWO_DEGREES, &g) > 0.0);
        assert!(slit_amplitude(hi, TWO_DEGREES, &g) < 0.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if slit_amplitude(mid, TWO_DEGREES, &g) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(0.5 * (lo + hi), analytic, epsilon = 1e-9);
    }

    #[test]
    fn sinc_series_branch_is_smooth() {
        // across the branch switch the two evaluations agree
        for &u in &[9.9e-5, 1.01e-4, 5e-5, -9.9e-5] {
            assert_relative_eq!(sinc(u), u.sin() / u, max_relative = 1e-14);
        }
        assert_eq!(sinc(0.0), 1.0);
    }

    #[test]
    fn density_collapses_on_diagonal() {
        let g = geom();
        for theta in [-0.05f64, 0.0, 0.013, TWO_DEGREES] {
            let ga = slit_amplitude(theta, g.incidence_angle_a, &g);
            let gb = slit_amplitude(theta, g.incidence_angle_b, &g);
            assert_relative_eq!(
                coincidence_density(theta, theta, &g),
                4.0 * ga * ga * gb * gb,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn density_at_opposite_tilt_maximum() {
        // theta1 = +2 deg, theta2 = -2 deg: direct term 1, exchanged term
        // ~1.089e-9, cross term ~+6.18e-5 (frozen extended-precision values)
        let g = geom();
        let c = coincidence_density(TWO_DEGREES, -TWO_DEGREES, &g);
        assert_relative_eq!(c, 1.0000618017006612, max_relative = 1e-10);
    }

    #[test]
    fn aperture_average_degenerates_for_point_detectors() {
        let g = geom();
        let p1 = DetectorPlacement::new(0.042, 1.21, 0.0);
        let p2 = DetectorPlacement::new(-0.055, 1.5, 0.0);
        let avg = aperture_averaged_rate(&p1, &p2, &g, 16).unwrap();
        let direct = coincidence_density(
            p1.center_angle().unwrap(),
            p2.center_angle().unwrap(),
            &g,
        );
        assert_eq!(avg, direct);
    }

    #[test]
    fn aperture_average_quadrature_converged() {
        let g = geom();
        let fixed = DetectorPlacement::new(-0.055, 1.5, 6e-3);
        let mut offset = -0.12;
        while offset <= 0.12 {
            let moving = DetectorPlacement::new(offset, 1.21, 6e-3);
            let lo = aperture_averaged_rate(&moving, &fixed, &g, 16).unwrap();
            let hi = aperture_averaged_rate(&moving, &fixed, &g, 32).unwrap();
            assert_relative_eq!(lo, hi, max_relative = 1e-6);
            offset += 0.01;
        }
    }

    #[test]
    fn same_semiplane_rate_is_strictly_positive() {
        let g = geom();
        let det1 = DetectorPlacement::new(-0.017, 1.21, 6e-3);
        let det2 = DetectorPlacement::new(-0.055, 1.5, 6e-3);
        let rate = aperture_averaged_rate(&det1, &det2, &g, 16).unwrap();
        assert!(rate > 0.0, "same-semiplane SQM rate must be positive, got {rate}");
    }

    #[test]
    fn aperture_average_rejects_low_order() {
        let g = geom();
        let p = DetectorPlacement::new(0.0, 1.5, 6e-3);
        assert!(matches!(
            aperture_averaged_rate(&p, &p, &g, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scan_peaks_at_two_degrees() {
        let g = geom();
        let fixed = DetectorPlacement::new(
            crate::geometry::position_from_angle(-TWO_DEGREES, 1.5).unwrap(),
            1.5,
            6e-3,
        );
        let offsets: Vec<f64> = (-60..=60).map(|i| i as f64 * 2e-3).collect();
        let pattern = pattern_scan(&fixed, &offsets, 1.21, 6e-3, &g, 16).unwrap();
        let best = pattern
            .points
            .iter()
            .max_by(|a, b| a.rate.total_cmp(&b.rate))
            .unwrap();
        let expected = crate::geometry::position_from_angle(TWO_DEGREES, 1.21).unwrap();
        assert!(
            (best.offset_m - expected).abs() <= 2e-3,
            "peak at {} m, expected within one step of {} m",
            best.offset_m,
            expected
        );
        assert_eq!(best.rate, 1.0);
    }

    #[test]
    fn mirrored_scan_is_identical() {
        let g = geom();
        let fixed = DetectorPlacement::new(-0.055, 1.5, 6e-3);
        let offsets: Vec<f64> = (-30..=30).map(|i| i as f64 * 4e-3).collect();
        let pattern = pattern_scan(&fixed, &offsets, 1.21, 6e-3, &g, 16).unwrap();

        let fixed_m = DetectorPlacement::new(0.055, 1.5, 6e-3);
        let offsets_m: Vec<f64> = offsets.iter().map(|&x| -x).collect();
        let mirrored = pattern_scan(&fixed_m, &offsets_m, 1.21, 6e-3, &g, 16).unwrap();

        for (p, m) in pattern.points.iter().zip(&mirrored.points) {
            assert_relative_eq!(p.rate, m.rate, max_relative = 1e-11);
        }
    }

    #[test]
    fn empty_scan_is_rejected() {
        let g = geom();
        let fixed = DetectorPlacement::new(-0.055, 1.5, 6e-3);
        assert!(pattern_scan(&fixed, &[], 1.21, 6e-3, &g, 16).is_err());
    }

    #[test]
    fn fringe_period_in_sin_theta_is_lambda_over_s() {
        // locate adjacent zeros of the normalized cross-term cosine by
        // bisection in sin(theta1); their spacing is half the period
        let g = geom();
        let k = g.wavevector();
        let s2 = (-TWO_DEGREES as f64).sin();
        let cosine = |s1: f64| -> f64 {
            let t1 = s1.asin();
            let t2 = s2.asin();
            let c = coincidence_density(t1, t2, &g);
            let g1a = slit_amplitude(t1, g.incidence_angle_a, &g);
            let g1b = slit_amplitude(t1, g.incidence_angle_b, &g);
            let g2a = slit_amplitude(t2, g.incidence_angle_a, &g);
            let g2b = slit_amplitude(t2, g.incidence_angle_b, &g);
            let direct = g1a * g2b;
            let exchanged = g2a * g1b;
            (c - direct * direct - exchanged * exchanged) / (2.0 * direct * exchanged)
        };
        let period = 2.0 * std::f64::consts::PI / (k * g.slit_separation);
        let find_zero = |mut lo: f64, mut hi: f64| -> f64 {
            assert!(cosine(lo) * cosine(hi) < 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if cosine(lo) * cosine(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        // cosine zero when k s (sin t1 - sin t2) = pi/2 + n pi
        let first = s2 + 0.25 * period;
        let z1 = find_zero(first - 0.2 * period, first + 0.2 * period);
        let z2 = find_zero(first + 0.3 * period, first + 0.7 * period);
        assert_abs_diff_eq!(2.0 * (z2 - z1), g.wavelength / g.slit_separation, epsilon = 1e-9);
        assert_abs_diff_eq!(g.wavelength / g.slit_separation, 7.02e-3, epsilon = 1e-17);
    }

    #[test]
    fn envelope_common_zero_with_tuned_incidence() {
        // the default +/-2 deg incidence gives no exact common envelope
        // zeros (2 sin 2deg != lambda/w), so tune theta_i^B such that
        // sin th_A - sin th_B = lambda / w; then both g(theta1, th_A) and
        // g(theta1, th_B) vanish at sin theta1 = sin th_A + lambda / w
        let mut g = geom();
        g.incidence_angle_b = (TWO_DEGREES.sin() - g.wavelength / g.slit_width).asin();
        let analytic = (TWO_DEGREES.sin() + g.wavelength / g.slit_width).asin();
        let theta2 = -0.03;
        let rate = |t1: f64| coincidence_density(t1, theta2, &g);
        // golden-section minimum around the analytic root
        let (mut lo, mut hi) = (analytic - 1e-4, analytic + 1e-4);
        let phi = 0.5 * (3.0 - 5f64.sqrt());
        for _ in 0..200 {
            let m1 = lo + phi * (hi - lo);
            let m2 = hi - phi * (hi - lo);
            if rate(m1) < rate(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let found = 0.5 * (lo + hi);
        assert_abs_diff_eq!(found, analytic, epsilon = 1e-9);
        assert!(rate(found) < 1e-20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn density_nonnegative_and_exchange_symmetric(
            t1 in -0.1f64..0.1,
            t2 in -0.1f64..0.1,
        ) {
            let g = geom();
            let c12 = coincidence_density(t1, t2, &g);
            let c21 = coincidence_density(t2, t1, &g);
            prop_assert!(c12 >= -1e-12);
            let scale = c12.abs().max(c21.abs()).max(1e-300);
            prop_assert!((c12 - c21).abs() <= 1e-14 * scale);
        }

        #[test]
        fn density_mirror_symmetric(t1 in -0.1f64..0.1, t2 in -0.1f64..0.1) {
            let g = geom();
            let c = coincidence_density(t1, t2, &g);
            let m = coincidence_density(-t1, -t2, &g);
            prop_assert!((c - m).abs() <= 1e-12 * c.abs().max(m.abs()).max(1e-300));
        }

        #[test]
        fn density_matches_factored_oracle(t1 in -0.1f64..0.1, t2 in -0.1f64..0.1) {
            let g = geom();
            let c = coincidence_density(t1, t2, &g);
            let f = factored_density(t1, t2, &g);
            // under destructive interference the density sits far below the
            // path terms; scale the tolerance by the terms
            let a = slit_amplitude(t1, g.incidence_angle_a, &g)
                * slit_amplitude(t2, g.incidence_angle_b, &g);
            let b = slit_amplitude(t2, g.incidence_angle_a, &g)
                * slit_amplitude(t1, g.incidence_angle_b, &g);
            let terms = (a * a + b * b).max(1e-300);
            prop_assert!((c - f).abs() <= 1e-12 * terms);
        }
    }
}
