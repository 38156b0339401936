//! Side-by-side prediction table: standard coincidence rates versus guided
//! trajectory fractions at the same detector arrangements, both normalized
//! to the aligned peak arrangement.

use twinslit::bohmian::run_ensemble;
use twinslit::config::RunConfig;
use twinslit::geometry::{position_from_angle, DetectorPlacement};
use twinslit::sqm::aperture_averaged_rate;

fn main() {
    let mut config = RunConfig::default();
    config.engine.ensemble_size = 2000;
    let g = config.geometry;
    let state = config.state().unwrap();
    let settings = config.integrator_settings().unwrap();
    let order = config.engine.pattern_quadrature_order;

    let d1 = config.dbb.detector_1;
    let d2 = config.dbb.detector_2;
    let mirror = DetectorPlacement::new(-d1.lateral_offset, d1.plane_distance, d1.lens_diameter);
    let peak = DetectorPlacement::new(
        position_from_angle(g.incidence_angle_a, d1.plane_distance).unwrap(),
        d1.plane_distance,
        d1.lens_diameter,
    );

    let run = run_ensemble(
        &state,
        (d1, d2),
        config.engine.ensemble_size,
        config.seed,
        &settings,
        &[],
    )
    .unwrap();

    let sqm_peak = aperture_averaged_rate(&peak, &d2, &g, order).unwrap();
    let f_peak = run.coincidence_fraction(&peak, &d2, false).unwrap();

    println!("{:<22} {:>12} {:>12}", "detector 1 at", "sqm (rel)", "dbb (rel)");
    for (label, p) in [("same semiplane", &d1), ("opposite semiplane", &mirror), ("peak", &peak)] {
        let sqm = aperture_averaged_rate(p, &d2, &g, order).unwrap() / sqm_peak;
        let f = run.coincidence_fraction(p, &d2, false).unwrap() / f_peak;
        println!("{label:<22} {sqm:>12.4e} {f:>12.4e}");
    }
    println!();
    println!(
        "{} pairs, {} flagged, {} crossing violations",
        run.report.n_pairs, run.report.n_flagged, run.report.crossing_violations
    );
}
