//! Integrates a small guided-trajectory ensemble, checks equivariance at the
//! detection planes, and reports semiplane statistics.

use twinslit::bohmian::{equivariance_check, run_ensemble};
use twinslit::config::RunConfig;

fn main() {
    let mut config = RunConfig::default();
    config.engine.ensemble_size = 1000;
    let state = config.state().unwrap();
    let settings = config.integrator_settings().unwrap();

    let run = run_ensemble(
        &state,
        (config.dbb.detector_1, config.dbb.detector_2),
        config.engine.ensemble_size,
        config.seed,
        &settings,
        &config.dbb.probe_planes,
    )
    .unwrap();

    let r = &run.report;
    println!("{} pairs integrated, {} flagged", r.n_pairs, r.n_flagged);
    println!("crossing violations: {}", r.crossing_violations);
    println!(
        "same-semiplane coincidence fraction: {:.3e} (excluding flagged {:.3e})",
        r.same_semiplane_coincidence_fraction, r.same_semiplane_fraction_excluding_flagged
    );
    println!(
        "opposite-semiplane coincidence fraction: {:.3e}",
        r.opposite_semiplane_coincidence_fraction
    );
    println!("semiplane penetration fraction: {:.3e}", r.semiplane_penetration_fraction);
    println!();

    for probe in &run.probes {
        let eq = equivariance_check(&state, &probe.positions, probe.z, 20).unwrap();
        println!(
            "z = {:>4} m: chi2/dof = {:.3} over {} pooled cells, sup-norm {:.2e}",
            probe.z, eq.chi2_per_dof, eq.dof, eq.sup_norm
        );
    }
}
