//! `||sqrt(e)||_inf` against component width on a fixed-energy family.

use std::f64::consts::PI;

use qhd_core::polar::DEFAULT_TAU_REL;
use qhd_core::vacuum_measure::{component_sqrt_e_sup, decompose_vacuum, sqrt_e_width_fit};
use qhd_core::{energy_density, GammaLaw, Grid, HydroState};

/// `sqrt_rho = c sin(pi (x - a) / w)` on `[a, a + w]`, `Lambda` its quarter-
/// period shift, `c` chosen so the kinetic energy is `e0`. Kept small so
/// `rho^gamma` stays negligible against the kinetic part at every width.
fn sine_lobe(g: &Grid, a: f64, w: f64, e0: f64) -> HydroState {
    let c = (2.0 * e0 * w).sqrt() / PI;
    let inside = |x: f64| x > a && x < a + w;
    let s = g.sample(|x| if inside(x) { c * (PI * (x - a) / w).sin() } else { 0.0 });
    let d = g.sample(|x| if inside(x) { c * PI / w * (PI * (x - a) / w).cos() } else { 0.0 });
    let lam = g.sample(|x| if inside(x) { c * PI / w * (PI * (x - a) / w).sin() } else { 0.0 });
    HydroState::new(g, s, lam, d).unwrap()
}

#[test]
fn sqrt_e_scales_like_inverse_root_width() {
    let g = Grid::new(8.0, 2048).unwrap();
    let law = GammaLaw::new(2.0).unwrap();
    let widths = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
    let mut sups = Vec::new();
    for &w in &widths {
        let h = sine_lobe(&g, -0.5 * w, w, 0.01);
        let mask = h.mask(DEFAULT_TAU_REL).unwrap();
        let e = energy_density(&h, law);
        let dec = decompose_vacuum(&g, &h, &e, &mask).unwrap();
        assert_eq!(dec.components.len(), 1);
        sups.push(component_sqrt_e_sup(&dec.components[0], &e));
    }
    let fit = sqrt_e_width_fit(&widths, &sups).unwrap();
    println!("slope {:.4}", fit.slope);
    assert!((fit.slope + 0.5).abs() <= 0.15, "slope {}", fit.slope);
}
