//! Scans the analytic coincidence pattern of the moving detector with the
//! fixed detector at -5.5 cm on the 1.5 m plane, printing a rough terminal
//! plot of the normalized rate.

use twinslit::config::RunConfig;
use twinslit::sqm;

fn main() {
    let config = RunConfig::default();
    let p = &config.pattern;
    let scan = sqm::pattern_scan(
        &p.fixed_detector,
        &p.offsets(),
        p.moving_plane_distance,
        p.moving_lens_diameter,
        &config.geometry,
        config.engine.pattern_quadrature_order,
    )
    .unwrap();

    println!("moving detector at {} m, fixed at {} m on the {} m plane",
        p.moving_plane_distance,
        scan.fixed_placement.lateral_offset,
        scan.fixed_placement.plane_distance);
    for pt in &scan.points {
        let bar = "#".repeat((pt.rate * 60.0).round() as usize);
        println!("{:>8.4} m ({:>6.3} deg)  {:.4}  {bar}", pt.offset_m, pt.angle_rad.to_degrees(), pt.rate);
    }
    let peak = scan.points.iter().max_by(|a, b| a.rate.total_cmp(&b.rate)).unwrap();
    println!("\npeak at {:.4} m = {:.3} deg", peak.offset_m, peak.angle_rad.to_degrees());
}
