//! Finite-difference eigensolver for `−∂² + V` with Dirichlet ends.
//!
//! The matrix acts on interior samples only. Eigenvalues come from Sturm
//! bisection run to the resolution of `f64`; eigenvectors from inverse
//! iteration on a pivoted tridiagonal LU.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridFunction};

/// Largest number of eigenpairs a single solve may request.
pub const DEFAULT_EIGEN_CAP: usize = 16;

const MAX_INVERSE_ITERATIONS: usize = 8;

/// Symmetric tridiagonal `diag = 2/h² + V(x_i)`, `off = −1/h²` on interior points.
#[derive(Debug, Clone, PartialEq)]
pub struct FdHamiltonian {
    grid: Grid,
    diagonal: Vec<f64>,
    off_diagonal: f64,
}

impl FdHamiltonian {
    pub fn assemble(v: &GridFunction) -> Self {
        FdHamiltonian::build(*v.grid(), v.values())
    }

    /// Same as [`FdHamiltonian::assemble`] for raw samples, rejecting non-finite values.
    pub fn from_values(grid: Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(FdHamiltonian::build(grid, values))
    }

    fn build(grid: Grid, values: &[f64]) -> Self {
        let h = grid.spacing();
        let n = values.len();
        let diagonal = values[1..n - 1].iter().map(|v| 2.0 / (h * h) + v).collect();
        FdHamiltonian {
            grid,
            diagonal,
            off_diagonal: -1.0 / (h * h),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off_diagonal
    }

    /// Matrix dimension, `n_points − 2`.
    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let e = self.off_diagonal.abs();
        let n = self.diagonal.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &d) in self.diagonal.iter().enumerate() {
            let r = e * ((i > 0) as u8 as f64 + (i + 1 < n) as u8 as f64);
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }

    fn scale(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let e2 = self.off_diagonal * self.off_diagonal;
        let tiny = f64::MIN_POSITIVE.sqrt() * self.scale().max(1.0);
        let mut count = 0;
        let mut q = 1.0_f64;
        for (i, &d) in self.diagonal.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// The `m` smallest eigenvalues, ascending.
    pub fn lowest_eigenvalues(&self, m: usize) -> Result<Vec<f64>> {
        self.check_request(m)?;
        let (lo, hi) = self.gershgorin();
        let pad = f64::EPSILON * self.scale();
        let (lo, hi) = (lo - pad, hi + pad);
        let mut out = Vec::with_capacity(m);
        let mut floor = lo;
        for k in 0..m {
            let v = self.bisect(k, floor, hi);
            out.push(v);
            floor = v - pad;
        }
        Ok(out)
    }

    fn check_request(&self, m: usize) -> Result<()> {
        if m > DEFAULT_EIGEN_CAP {
            return Err(Error::InvalidParameter(format!(
                "requested {m} eigenpairs, cap is {DEFAULT_EIGEN_CAP}"
            )));
        }
        if m > self.dimension() {
            return Err(Error::InvalidParameter(format!(
                "requested {m} eigenpairs of a {}-dimensional matrix",
                self.dimension()
            )));
        }
        Ok(())
    }

    /// The `m` smallest eigenpairs. Vectors include the zero boundary
    /// samples, are normalized in the trapezoid inner product, and are
    /// signed so the first sample above `10⁻³·max` is positive.
    pub fn lowest_eigenpairs(&self, m: usize) -> Result<Vec<(f64, GridFunction)>> {
        let values = self.lowest_eigenvalues(m)?;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(m);
        for (k, &lambda) in values.iter().enumerate() {
            let v = self.inverse_iteration(lambda, &vectors, k)?;
            vectors.push(v);
        }
        let h = self.grid.spacing();
        values
            .into_iter()
            .zip(vectors)
            .map(|(lambda, v)| {
                let mut full = Vec::with_capacity(v.len() + 2);
                full.push(0.0);
                full.extend_from_slice(&v);
                full.push(0.0);
                let norm = (h * full.iter().map(|x| x * x).sum::<f64>()).sqrt();
                let peak = full.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
                let sign = full.iter().find(|x| x.abs() > 1e-3 * peak).map_or(1.0, |x| x.signum());
                let scaled = full.into_iter().map(|x| sign * x / norm).collect();
                Ok((lambda, GridFunction::new(self.grid, scaled)?))
            })
            .collect()
    }

    /// `‖(T − λ)v‖₂ / ‖v‖₂` in the Euclidean norm over interior samples.
    pub fn residual(&self, lambda: f64, v: &GridFunction) -> f64 {
        let x = &v.values()[1..v.len() - 1];
        let r = self.residual_vec(lambda, x);
        let nr = r.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        nr / nx
    }

    fn residual_vec(&self, lambda: f64, x: &[f64]) -> Vec<f64> {
        let e = self.off_diagonal;
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = (self.diagonal[i] - lambda) * x[i];
                if i > 0 {
                    s += e * x[i - 1];
                }
                if i + 1 < n {
                    s += e * x[i + 1];
                }
                s
            })
            .collect()
    }

    fn inverse_iteration(&self, lambda: f64, previous: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
        let n = self.dimension();
        let scale = self.scale();
        let lu = TridiagonalLu::factor(&self.diagonal, self.off_diagonal, lambda, f64::EPSILON * scale);
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
            .collect();
        let tol = 1e3 * f64::EPSILON * scale;
        for _ in 0..MAX_INVERSE_ITERATIONS {
            orthogonalize(&mut x, previous);
            normalize_euclid(&mut x);
            lu.solve(&mut x);
            orthogonalize(&mut x, previous);
            normalize_euclid(&mut x);
            let r = self.residual_vec(lambda, &x);
            let nr = r.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nr <= tol {
                return Ok(x);
            }
        }
        Err(Error::NoConvergence(format!(
            "inverse iteration for level {k} at λ = {lambda} did not reach residual {tol:e}"
        )))
    }
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = x.iter().zip(b).map(|(a, c)| a * c).sum();
        for (xi, bi) in x.iter_mut().zip(b) {
            *xi -= dot * bi;
        }
    }
}

fn normalize_euclid(x: &mut [f64]) {
    let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 && n.is_finite() {
        x.iter_mut().for_each(|a| *a /= n);
    }
}

/// LU with partial pivoting of `T − λI`. `U` has two superdiagonals.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: f64, lambda: f64, pivot_floor: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|x| x - lambda).collect();
        let mut dl = vec![off; n.saturating_sub(1)];
        let mut du = vec![off; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        for p in d.iter_mut() {
            if p.abs() < pivot_floor {
                *p = if *p < 0.0 { -pivot_floor } else { pivot_floor };
            }
        }
        TridiagonalLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// One analytic level paired with its numerical counterpart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelComparison {
    pub level: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub abs_err: f64,
    pub pass: bool,
}

/// Analytic-versus-numeric spectrum comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub potential: String,
    pub parameters: BTreeMap<String, f64>,
    /// `None` when every requested level is compared.
    pub continuum_threshold: Option<f64>,
    pub tolerance: f64,
    pub levels: Vec<LevelComparison>,
    pub expected_count: usize,
    pub numeric_count: usize,
    pub count_match: bool,
    /// `‖(T − λ)v‖₂/‖v‖₂` per solved level.
    pub residuals: Vec<f64>,
    pub pass: bool,
}

/// Pairs the numeric levels below `threshold` with `analytic` in order.
///
/// With an infinite `threshold`, exactly `analytic.len()` levels are solved.
/// Otherwise the Sturm count below the threshold must match the number of
/// analytic predictions below it.
pub fn compare_spectra(
    label: &str,
    parameters: BTreeMap<String, f64>,
    analytic: &[f64],
    h: &FdHamiltonian,
    threshold: f64,
    tol: f64,
) -> Result<SpectrumReport> {
    let expected: Vec<f64> = analytic.iter().copied().filter(|&e| e < threshold).collect();
    let numeric_count = if threshold.is_finite() {
        h.count_below(threshold)
    } else {
        expected.len()
    };
    let solve = numeric_count
        .min(DEFAULT_EIGEN_CAP)
        .max(expected.len().min(DEFAULT_EIGEN_CAP));
    let pairs = h.lowest_eigenpairs(solve.min(h.dimension()))?;
    let residuals = pairs.iter().map(|(l, v)| h.residual(*l, v)).collect();
    let levels: Vec<LevelComparison> = expected
        .iter()
        .zip(&pairs)
        .enumerate()
        .map(|(level, (&a, (num, _)))| {
            let abs_err = (a - num).abs();
            LevelComparison {
                level,
                analytic: a,
                numeric: *num,
                abs_err,
                pass: abs_err <= tol,
            }
        })
        .collect();
    let count_match = numeric_count == expected.len();
    let pass = count_match && levels.len() == expected.len() && levels.iter().all(|l| l.pass);
    Ok(SpectrumReport {
        potential: label.to_string(),
        parameters,
        continuum_threshold: threshold.is_finite().then_some(threshold),
        tolerance: tol,
        levels,
        expected_count: expected.len(),
        numeric_count,
        count_match,
        residuals,
        pass,
    })
}

/// `|cos∠(numeric, constructed)|`.
pub fn eigenvector_overlap(numeric: &GridFunction, constructed: &GridFunction) -> Result<f64> {
    grid::abs_cosine(numeric, constructed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{BasePotential, BoundState};
    use std::f64::consts::PI;

    #[test]
    fn discrete_laplacian_spectrum() {
        let g = Grid::new(0.0, PI, 201).unwrap();
        let h = FdHamiltonian::assemble(&GridFunction::zeros(g));
        let n = h.dimension() as f64 + 1.0;
        let step = g.spacing();
        let vals = h.lowest_eigenvalues(8).unwrap();
        for (m, v) in vals.iter().enumerate() {
            let exact = 2.0 / (step * step) * (1.0 - ((m as f64 + 1.0) * PI / n).cos());
            assert!((v - exact).abs() <= 1e-12 * h.scale(), "{m} {v} {exact}");
        }
    }

    #[test]
    fn constant_shift() {
        let g = Grid::new(0.0, 1.0, 101).unwrap();
        let a = FdHamiltonian::assemble(&GridFunction::zeros(g))
            .lowest_eigenvalues(5)
            .unwrap();
        let b = FdHamiltonian::assemble(&GridFunction::from_fn(g, |_| 3.5).unwrap())
            .lowest_eigenvalues(5)
            .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 3.5).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let mut v = vec![0.0; 11];
        v[3] = f64::INFINITY;
        assert!(matches!(
            FdHamiltonian::from_values(g, &v),
            Err(Error::NonFinite { index: 3, .. })
        ));
        assert!(FdHamiltonian::assemble(&GridFunction::zeros(g))
            .lowest_eigenpairs(17)
            .is_err());
    }

    #[test]
    fn well_and_oscillator_levels() {
        let w = BasePotential::square_well(PI).unwrap();
        let g = w.default_grid();
        let vals = FdHamiltonian::assemble(&w.values(&g)).lowest_eigenvalues(6).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let k = k as f64;
            assert!((v - k * (k + 2.0)).abs() <= 1e-3);
        }
        let o = BasePotential::Oscillator;
        let g = o.default_grid();
        let vals = FdHamiltonian::assemble(&o.values(&g)).lowest_eigenvalues(7).unwrap();
        for (k, v) in vals.iter().enumerate() {
            assert!((v - 2.0 * k as f64).abs() <= 1e-3);
        }
    }

    #[test]
    fn morse_has_two_levels() {
        let m = BasePotential::morse(2.0, 1.0, 1.0).unwrap();
        let g = m.default_grid();
        let h = FdHamiltonian::assemble(&m.values(&g));
        assert_eq!(h.count_below(3.5), 2);
        let r = compare_spectra("morse", m.parameters(), &[0.0, 3.0], &h, 3.5, 1e-2).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn eigenvectors_orthonormal_and_match_states() {
        let o = BasePotential::Oscillator;
        let g = o.default_grid();
        let pairs = FdHamiltonian::assemble(&o.values(&g)).lowest_eigenpairs(6).unwrap();
        for (i, (_, a)) in pairs.iter().enumerate() {
            for (j, (_, b)) in pairs.iter().enumerate() {
                let d = grid::inner_product(a, b).unwrap() - if i == j { 1.0 } else { 0.0 };
                assert!(d.abs() <= 1e-8, "{i} {j} {d}");
            }
            let s = o.eigenstate(i, &g).unwrap();
            assert!(eigenvector_overlap(a, s.wavefunction()).unwrap() >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn count_mismatch_fails() {
        let o = BasePotential::Oscillator;
        let g = o.default_grid();
        let h = FdHamiltonian::assemble(&o.values(&g));
        let r = compare_spectra("oscillator", BTreeMap::new(), &[0.0, 2.0], &h, 5.0, 1e-2).unwrap();
        assert!(!r.count_match && !r.pass);
    }
}
