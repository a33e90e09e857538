//! Randomized invariants of the grid, deformation and eigensolver layers.

use std::f64::consts::PI;

use proptest::prelude::*;

use isospectral::catalog::{BasePotential, BoundState};
use isospectral::error::Error;
use isospectral::factorize::{self, Deformation};
use isospectral::grid::{self, Grid, GridFunction};
use isospectral::spectral::FdHamiltonian;

/// A state scaled by an arbitrary factor, bypassing normalization.
struct Scaled {
    level: usize,
    energy: f64,
    psi: GridFunction,
    dpsi: GridFunction,
}

impl BoundState for Scaled {
    fn level(&self) -> usize {
        self.level
    }
    fn energy(&self) -> f64 {
        self.energy
    }
    fn wavefunction(&self) -> &GridFunction {
        &self.psi
    }
    fn derivative(&self) -> &GridFunction {
        &self.dpsi
    }
}

fn scaled(s: &impl BoundState, lambda: f64) -> Scaled {
    Scaled {
        level: s.level(),
        energy: s.energy(),
        psi: s.wavefunction().scaled(lambda),
        dpsi: s.derivative().scaled(lambda),
    }
}

fn potentials() -> Vec<BasePotential> {
    vec![
        BasePotential::Oscillator,
        BasePotential::morse(2.0, 1.0, 1.0).unwrap(),
        BasePotential::square_well(PI).unwrap(),
        BasePotential::Cprs,
    ]
}

/// Normalized `C` outside the closed forbidden interval `[−1, 0]`.
fn allowed_c() -> impl Strategy<Value = f64> {
    prop_oneof![(1e-2f64..1e3), (-1e3f64..-1.01)]
}

fn coarse(p: &BasePotential) -> Grid {
    let g = p.default_grid();
    Grid::new(g.x_min(), g.x_max(), 1201).unwrap()
}

fn sample(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deformation_is_invariant_under_state_scaling(
        which in 0usize..4, level in 0usize..2, c in allowed_c(), lambda in 1e-3f64..1e3,
    ) {
        let p = potentials()[which];
        let g = coarse(&p);
        let v = p.values(&g);
        let s = p.eigenstate(level, &g).unwrap();
        let total = factorize::Deformation::new(&v, &s, c).unwrap().c_raw() / c;
        let a = Deformation::with_raw_constant(&v, &s, c * total).unwrap();
        let b = Deformation::with_raw_constant(&v, &scaled(&s, lambda), c * total * lambda * lambda).unwrap();
        let (va, vb) = (a.deformed_potential(), b.deformed_potential());
        let dev = va.max_abs_diff(&vb).unwrap();
        prop_assert!(dev <= 1e-10 * va.max_abs().max(1.0), "dev {dev}");
    }

    #[test]
    fn forbidden_constants_are_rejected(which in 0usize..4, level in 0usize..2, c in -1.0f64..=0.0) {
        let p = potentials()[which];
        let g = coarse(&p);
        let s = p.eigenstate(level, &g).unwrap();
        let interval = factorize::validity_interval(&s).unwrap();
        prop_assert!(interval.is_forbidden(c));
        let err = Deformation::new(&p.values(&g), &s, c).unwrap_err();
        prop_assert!(matches!(err, Error::SingularC { .. }), "{err}");
    }

    #[test]
    fn allowed_constants_keep_a_definite_denominator(which in 0usize..4, level in 0usize..2, c in allowed_c()) {
        let p = potentials()[which];
        let g = coarse(&p);
        let s = p.eigenstate(level, &g).unwrap();
        let d = Deformation::new(&p.values(&g), &s, c).unwrap();
        let sign = c.signum();
        prop_assert!(d.denominator().iter().all(|&x| x * sign > 0.0));
        prop_assert!(d.deformed_potential().values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn missing_state_is_normalized_without_nodes(which in 0usize..4, level in 0usize..2, c in allowed_c()) {
        let p = potentials()[which];
        let g = p.default_grid();
        let s = p.eigenstate(level, &g).unwrap();
        let m = Deformation::new(&p.values(&g), &s, c).unwrap().missing_state();
        prop_assert!((grid::norm(m.wavefunction()) - 1.0).abs() <= 1e-6);
        prop_assert_eq!(grid::count_nodes_default(m.wavefunction()), level);
        prop_assert_eq!(m.energy(), 0.0);
    }

    #[test]
    fn cumulative_integral_is_linear_and_monotone(values in sample(64), scale in -5.0f64..5.0) {
        let g = Grid::new(-1.0, 2.0, 64).unwrap();
        let f = GridFunction::new(g, values).unwrap();
        let i = grid::cumulative_integral(&f);
        prop_assert_eq!(i.values()[0], 0.0);
        let si = grid::cumulative_integral(&f.scaled(scale));
        for (a, b) in i.values().iter().zip(si.values()) {
            prop_assert!((a * scale - b).abs() <= 1e-12 * (1.0 + a.abs() * scale.abs()));
        }
        let sq = f.map(|_, v| v * v).unwrap();
        let isq = grid::cumulative_integral(&sq);
        prop_assert!(isq.values().windows(2).all(|w| w[1] >= w[0]));
        let total = *isq.values().last().unwrap();
        prop_assert!((total - grid::inner_product(&f, &f).unwrap()).abs() <= 1e-12 * (1.0 + total));
    }

    #[test]
    fn inner_product_is_symmetric_and_bilinear(a in sample(33), b in sample(33), c in sample(33), s in -3.0f64..3.0) {
        let g = Grid::new(0.0, 1.0, 33).unwrap();
        let (fa, fb, fc) = (
            GridFunction::new(g, a).unwrap(),
            GridFunction::new(g, b).unwrap(),
            GridFunction::new(g, c).unwrap(),
        );
        let ab = grid::inner_product(&fa, &fb).unwrap();
        prop_assert_eq!(ab, grid::inner_product(&fb, &fa).unwrap());
        let mix = fa.zip_with(&fc, |x, y| s * x + y).unwrap();
        let lhs = grid::inner_product(&mix, &fb).unwrap();
        let rhs = s * ab + grid::inner_product(&fc, &fb).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        prop_assert!(grid::inner_product(&fa, &fa).unwrap() >= 0.0);
    }

    #[test]
    fn node_count_ignores_amplitude(which in 0usize..4, level in 0usize..4, lambda in 1e-3f64..1e3) {
        let p = potentials()[which];
        prop_assume!(level <= p.max_level());
        let g = p.default_grid();
        let s = p.eigenstate(level, &g).unwrap();
        let psi = s.wavefunction();
        prop_assert_eq!(grid::count_nodes_default(psi), level);
        prop_assert_eq!(grid::count_nodes_default(&psi.scaled(lambda)), level);
        prop_assert_eq!(grid::count_nodes_default(&psi.scaled(-lambda)), level);
    }

    #[test]
    fn grids_are_uniform_and_closed(lo in -50.0f64..50.0, width in 1e-3f64..100.0, n in 2usize..5000) {
        let g = Grid::new(lo, lo + width, n).unwrap();
        prop_assert_eq!(g.point(0), lo);
        prop_assert_eq!(g.point(n - 1), lo + width);
        prop_assert!(g.points().collect::<Vec<_>>().windows(2).all(|w| w[1] > w[0]));
        prop_assert!(Grid::new(lo, lo, n).is_err());
        prop_assert!(Grid::new(lo, lo + width, 1).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn deformation_preserves_the_discrete_spectrum(which in 0usize..4, level in 0usize..2, c in allowed_c()) {
        let p = potentials()[which];
        let g = p.default_grid();
        let v = p.values(&g);
        let s = p.eigenstate(level, &g).unwrap();
        let d = Deformation::new(&v, &s, c).unwrap();
        let base = FdHamiltonian::assemble(&d.shifted_potential()).lowest_eigenvalues(3).unwrap();
        let deformed = FdHamiltonian::assemble(&d.deformed_potential()).lowest_eigenvalues(3).unwrap();
        let bound = base.iter().filter(|&&e| e < p.continuum_threshold() - s.energy()).count();
        for k in 0..bound {
            prop_assert!((base[k] - deformed[k]).abs() <= 1e-2, "level {k}: {} vs {}", base[k], deformed[k]);
        }
    }
}
