//! Deformations checked against special-function closed forms.
//!
//! For the oscillator ground state `∫_{−∞}^x ψ₀² = (1 + erf x)/2`; for the
//! Morse ground state it is the regularized upper incomplete gamma function
//! `Q(2A/α, (2B/α) e^{−αx})`.

use std::f64::consts::PI;

use statrs::function::erf::erf;
use statrs::function::gamma::{gamma, gamma_ur};

use isospectral::catalog::BasePotential;
use isospectral::factorize::{CScale, Deformation};
use isospectral::grid::GridFunction;

/// `(I, ψ², (ψ²)′)` of a normalized ground state at `x`.
type Oracle = Box<dyn Fn(f64) -> (f64, f64, f64)>;

fn oscillator_oracle() -> Oracle {
    Box::new(|x| {
        let rho = (-x * x).exp() / PI.sqrt();
        (0.5 * (1.0 + erf(x)), rho, -2.0 * x * rho)
    })
}

fn morse_oracle(a: f64, b: f64, alpha: f64) -> Oracle {
    let s = 2.0 * a / alpha;
    Box::new(move |x| {
        let y = 2.0 * b / alpha * (-alpha * x).exp();
        let rho = alpha * (s * y.ln() - y).exp() / gamma(s);
        (gamma_ur(s, y), rho, -alpha * (s - y) * rho)
    })
}

/// Largest deviation of `f` and `Ṽ` from the oracle over the grid.
fn deviations(p: BasePotential, c: f64, oracle: &Oracle) -> (f64, f64) {
    let g = p.default_grid();
    let v = p.values(&g);
    let state = p.eigenstate(0, &g).unwrap();
    let d = Deformation::new(&v, &state, c).unwrap();
    let f_exact = GridFunction::from_fn(g, |x| {
        let (i, rho, _) = oracle(x);
        rho / (c + i)
    })
    .unwrap();
    let v_exact = GridFunction::from_fn(g, |x| {
        let (i, rho, drho) = oracle(x);
        let den = c + i;
        p.value(x) - 2.0 * (drho / den - rho * rho / (den * den))
    })
    .unwrap();
    (
        d.deformation_function().max_abs_diff(&f_exact).unwrap(),
        d.deformed_potential().max_abs_diff(&v_exact).unwrap(),
    )
}

#[test]
fn oscillator_matches_error_function() {
    for c in [1e-3, 0.3, 5.0, 1e4, -1.001, -1.7, -60.0] {
        let (df, dv) = deviations(BasePotential::Oscillator, c, &oscillator_oracle());
        assert!(df <= 1e-9 && dv <= 1e-6, "C = {c}: f {df:e}, V {dv:e}");
    }
}

#[test]
fn morse_matches_incomplete_gamma() {
    for (a, b, alpha) in [(2.0, 1.0, 1.0), (4.5, 1.5, 1.0)] {
        let p = BasePotential::morse(a, b, alpha).unwrap();
        for c in [1e-2, 0.5, 7.0, 1e3, -1.01, -4.0] {
            let (df, dv) = deviations(p, c, &morse_oracle(a, b, alpha));
            assert!(df <= 1e-9 && dv <= 1e-6, "A = {a}, C = {c}: f {df:e}, V {dv:e}");
        }
    }
}

#[test]
fn oscillator_unnormalized_convention() {
    // f = e^{−x²} / (C_p + (√π/2) erf x) with C_p the unnormalized constant
    let p = BasePotential::Oscillator;
    let g = p.default_grid();
    let state = p.eigenstate(0, &g).unwrap();
    for c_paper in [1.0, 2.5, -1.0, -10.0] {
        let c = CScale::PaperOscillator.affine(&p, 0).unwrap().to_normalized(c_paper);
        let d = Deformation::new(&p.values(&g), &state, c).unwrap();
        let exact = GridFunction::from_fn(g, |x| (-x * x).exp() / (c_paper + 0.5 * PI.sqrt() * erf(x))).unwrap();
        let dev = d.deformation_function().max_abs_diff(&exact).unwrap();
        assert!(dev <= 1e-9, "C_p = {c_paper}: {dev:e}");
    }
}

#[test]
fn morse_unnormalized_convention() {
    // A = 2, α = B = 1: the unnormalized denominator is C_p + 3 Q(4, 2e^{−x})
    let p = BasePotential::morse(2.0, 1.0, 1.0).unwrap();
    let g = p.default_grid();
    let state = p.eigenstate(0, &g).unwrap();
    let oracle = morse_oracle(2.0, 1.0, 1.0);
    for c_paper in [5.0, 0.2, -3.5] {
        let c = CScale::PaperMorse.affine(&p, 0).unwrap().to_normalized(c_paper);
        let d = Deformation::new(&p.values(&g), &state, c).unwrap();
        let exact = GridFunction::from_fn(g, |x| {
            let (q, rho, _) = oracle(x);
            3.0 * rho / (c_paper + 3.0 * q)
        })
        .unwrap();
        let dev = d.deformation_function().max_abs_diff(&exact).unwrap();
        assert!(dev <= 1e-9, "C_p = {c_paper}: {dev:e}");
    }
}
