//! Propagates a single tilted slit mode to several planes and compares the
//! near-field profile against the far-field sinc envelope, showing the
//! Fresnel-to-Fraunhofer transition.

use twinslit::config::RunConfig;
use twinslit::sqm;
use twinslit::wavefunction::Slit;

fn main() {
    let config = RunConfig::default();
    let state = config.state().unwrap();
    let g = &config.geometry;

    for z in [0.001, 0.01, 0.1, 1.5] {
        let center = z * g.incidence_angle_a.sin();
        let lobe = z * g.wavelength / g.slit_width;
        println!("z = {z} m (beam center {center:.5} m, first-zero offset {lobe:.5} m)");
        let peak = state.propagate_mode(Slit::A, center, z).unwrap().norm_sqr();
        for i in 0..33 {
            let x = center + lobe * (-1.2 + 2.4 * i as f64 / 32.0);
            let fresnel = state.propagate_mode(Slit::A, x, z).unwrap().norm_sqr() / peak;
            let envelope = {
                let e = sqm::slit_amplitude((x / z).asin(), g.incidence_angle_a, g);
                e * e
            };
            let bar = "#".repeat((fresnel.min(1.5) * 40.0).round() as usize);
            println!("  {:+.5} m  fresnel {:.4}  sinc {:.4}  {bar}", x, fresnel, envelope);
        }
        println!();
    }
}
