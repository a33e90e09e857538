//! Uniform grids and real functions sampled on them.
//!
//! Every wavefunction, potential and deformation in this crate is a
//! [`GridFunction`]. The operations here (trapezoid quadrature, three-point
//! differences, node counting) are deliberately low order: all higher-level
//! checks are stated at tolerances that absorb `O(h²)` errors.

use crate::error::{Error, Result};

/// Default number of samples ignored at each boundary by [`count_nodes`].
pub const DEFAULT_EDGE_MARGIN: usize = 5;
/// Default relative amplitude below which samples are ignored by [`count_nodes`].
pub const DEFAULT_AMPLITUDE_FLOOR: f64 = 1e-9;

/// Uniform grid `x_i = x_min + i·h`, `i = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "x_min = {x_min} must be smaller than x_max = {x_max}"
            )));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {n_points}")));
        }
        Ok(Grid { x_min, x_max, n_points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    /// Same extent with the spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> Grid {
        let factor = factor.max(1);
        Grid {
            n_points: (self.n_points - 1) * factor + 1,
            ..*self
        }
    }

    /// Index of the node at `x`, if `x` coincides with one.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let h = self.spacing();
        let t = (x - self.x_min) / h;
        let i = t.round();
        if i < 0.0 || i as usize >= self.n_points || (t - i).abs() > 1e-6 {
            None
        } else {
            Some(i as usize)
        }
    }
}

/// Finite real samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(grid, grid.points().map(f).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        let values = self.grid.points().zip(&self.values).map(|(x, &v)| f(x, v)).collect();
        GridFunction::new(self.grid, values)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        same_grid(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GridFunction::new(self.grid, values)
    }

    /// `max |self − other|`.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

pub(crate) fn same_grid(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.grid != g.grid {
        Err(Error::GridMismatch)
    } else {
        Ok(())
    }
}

/// `I(x) = ∫_{x_min}^{x} f(s) ds` by the composite trapezoid rule.
pub fn cumulative_integral(f: &GridFunction) -> GridFunction {
    let h = f.grid.spacing();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in f.values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    GridFunction {
        grid: f.grid,
        values: out,
    }
}

/// Cumulative trapezoid integral with the first Euler–Maclaurin end
/// correction, using the known derivative `df` of the integrand. Error is
/// `O(h⁴)` instead of `O(h²)`.
pub fn cumulative_integral_corrected(f: &GridFunction, df: &GridFunction) -> Result<GridFunction> {
    same_grid(f, df)?;
    let h = f.grid.spacing();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..f.len() - 1 {
        acc += 0.5 * h * (f.values[i] + f.values[i + 1]) - h * h / 12.0 * (df.values[i + 1] - df.values[i]);
        out.push(acc);
    }
    GridFunction::new(f.grid, out)
}

/// Central differences in the interior, second-order one-sided at the ends.
pub fn derivative(f: &GridFunction) -> GridFunction {
    GridFunction {
        grid: f.grid,
        values: first_difference(&f.values, f.grid.spacing()),
    }
}

/// Three-point second difference, second-order one-sided at the ends.
pub fn second_derivative(f: &GridFunction) -> GridFunction {
    GridFunction {
        grid: f.grid,
        values: second_difference(&f.values, f.grid.spacing()),
    }
}

pub(crate) fn first_difference(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    d
}

pub(crate) fn second_difference(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
    }
    if n >= 4 {
        d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
        d[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    } else {
        d[0] = d[1];
        d[n - 1] = d[n - 2];
    }
    d
}

/// Trapezoid `∫ f g dx`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    same_grid(f, g)?;
    Ok(trapezoid_dot(&f.values, &g.values, f.grid.spacing()))
}

pub(crate) fn trapezoid_dot(a: &[f64], b: &[f64], h: f64) -> f64 {
    let n = a.len();
    let interior: f64 = (1..n - 1).map(|i| a[i] * b[i]).sum();
    h * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

/// Trapezoid L² norm.
pub fn norm(f: &GridFunction) -> f64 {
    trapezoid_dot(&f.values, &f.values, f.grid.spacing()).sqrt()
}

/// `f / ‖f‖`.
pub fn normalize(f: &GridFunction) -> Result<GridFunction> {
    let n = norm(f);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(f.scaled(1.0 / n))
}

/// Counts interior sign changes.
///
/// Samples with `|f| ≤ amplitude_floor · max|f|` and the first and last
/// `edge_margin` samples are dropped; the remaining samples are scanned for
/// consecutive sign changes.
pub fn count_nodes(f: &GridFunction, edge_margin: usize, amplitude_floor: f64) -> usize {
    let n = f.len();
    if n <= 2 * edge_margin {
        return 0;
    }
    let floor = amplitude_floor * f.max_abs();
    let mut nodes = 0;
    let mut last_sign = 0.0_f64;
    for &v in &f.values[edge_margin..n - edge_margin] {
        if v.abs() <= floor {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            nodes += 1;
        }
        last_sign = s;
    }
    nodes
}

/// [`count_nodes`] with the default margin and floor.
pub fn count_nodes_default(f: &GridFunction) -> usize {
    count_nodes(f, DEFAULT_EDGE_MARGIN, DEFAULT_AMPLITUDE_FLOOR)
}

/// Absolute cosine of the angle between `f` and `g` in the trapezoid inner product.
pub fn abs_cosine(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let fg = inner_product(f, g)?;
    let nf = norm(f);
    let ng = norm(g);
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((fg / (nf * ng)).abs().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> Grid {
        Grid::new(0.0, 1.0, 101).unwrap()
    }

    #[test]
    fn grid_rejects_bad_extents() {
        assert!(Grid::new(1.0, 0.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 2).is_err());
        assert!(Grid::new(0.0, f64::INFINITY, 10).is_err());
        let g = Grid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.point(4), 1.0);
        assert_eq!(g.index_of(0.0), Some(2));
        assert_eq!(g.index_of(0.1), None);
        assert_eq!(g.refined(2).len(), 9);
    }

    #[test]
    fn grid_function_rejects_nan_and_bad_length() {
        let g = unit();
        assert!(matches!(
            GridFunction::new(g, vec![0.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
        let mut v = vec![0.0; 101];
        v[7] = f64::NAN;
        assert!(matches!(
            GridFunction::new(g, v),
            Err(Error::NonFinite { index: 7, .. })
        ));
    }

    #[test]
    fn cumulative_of_constant_is_x() {
        let f = GridFunction::from_fn(unit(), |_| 1.0).unwrap();
        let i = cumulative_integral(&f);
        for (x, v) in unit().points().zip(i.values()) {
            assert!((v - x).abs() < 1e-14);
        }
        assert_eq!(i.values()[0], 0.0);
    }

    #[test]
    fn cumulative_of_linear() {
        let f = GridFunction::from_fn(unit(), |x| 2.0 * x).unwrap();
        let i = cumulative_integral(&f);
        assert!((i.values()[100] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn cumulative_gaussian_half_mass() {
        // erf oracle: ∫_{-∞}^0 π^{-1/2} e^{-x²} dx = 1/2, tail below -8 is erfc(8)/2 ~ 1e-29
        let g = Grid::new(-8.0, 8.0, 16001).unwrap();
        let f = GridFunction::from_fn(g, |x| (-x * x).exp() / PI.sqrt()).unwrap();
        let i = cumulative_integral(&f);
        let mid = g.index_of(0.0).unwrap();
        assert!((i.values()[mid] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn corrected_cumulative_is_fourth_order() {
        let g = Grid::new(0.0, 2.0, 201).unwrap();
        let f = GridFunction::from_fn(g, |x| x.sin().powi(2)).unwrap();
        let df = GridFunction::from_fn(g, |x| (2.0 * x).sin()).unwrap();
        let exact = |x: f64| x / 2.0 - (2.0 * x).sin() / 4.0;
        let plain = cumulative_integral(&f);
        let corrected = cumulative_integral_corrected(&f, &df).unwrap();
        let mut e_plain = 0.0_f64;
        let mut e_corr = 0.0_f64;
        for (i, x) in g.points().enumerate() {
            e_plain = e_plain.max((plain.values()[i] - exact(x)).abs());
            e_corr = e_corr.max((corrected.values()[i] - exact(x)).abs());
        }
        assert!(e_plain > 1e-6);
        assert!(e_corr < 1e-9, "{e_corr}");
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        let f = GridFunction::from_fn(unit(), |x| x * x).unwrap();
        let d = derivative(&f);
        for (x, v) in unit().points().zip(d.values()) {
            assert!((v - 2.0 * x).abs() < 1e-10);
        }
        let c = GridFunction::from_fn(unit(), |_| 3.5).unwrap();
        assert!(derivative(&c).max_abs() == 0.0);
        let d2 = second_derivative(&f);
        assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-8));
    }

    #[test]
    fn derivative_of_sine() {
        let g = Grid::new(0.0, PI, 3143).unwrap();
        let f = GridFunction::from_fn(g, f64::sin).unwrap();
        let d = derivative(&f);
        let err = g
            .points()
            .zip(d.values())
            .fold(0.0_f64, |m, (x, v)| m.max((v - x.cos()).abs()));
        // h ≈ 1e-3; one-sided end formulas dominate at ~h²/3
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn inner_products() {
        let f = GridFunction::from_fn(unit(), |x| (PI * x).sin()).unwrap();
        let g = GridFunction::from_fn(unit(), |x| (2.0 * PI * x).sin()).unwrap();
        assert!(inner_product(&f, &g).unwrap().abs() < 1e-8);
        assert_eq!(inner_product(&GridFunction::zeros(unit()), &g).unwrap(), 0.0);
        let other = GridFunction::zeros(Grid::new(0.0, 2.0, 101).unwrap());
        assert_eq!(inner_product(&f, &other), Err(Error::GridMismatch));

        let big = Grid::new(-8.0, 8.0, 16001).unwrap();
        let psi0 = GridFunction::from_fn(big, |x| PI.powf(-0.25) * (-x * x / 2.0).exp()).unwrap();
        assert!((inner_product(&psi0, &psi0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn node_counts() {
        let l = 2.0;
        let g = Grid::new(0.0, l, 8001).unwrap();
        let f = GridFunction::from_fn(g, |x| (3.0 * PI * x / l).sin()).unwrap();
        assert_eq!(count_nodes_default(&f), 2);
        let pos = GridFunction::from_fn(g, |x| 1.0 + x).unwrap();
        assert_eq!(count_nodes_default(&pos), 0);
        // H_4(x) = 16x⁴ − 48x² + 12 has four real roots
        let big = Grid::new(-8.0, 8.0, 16001).unwrap();
        let psi4 =
            GridFunction::from_fn(big, |x| (16.0 * x.powi(4) - 48.0 * x * x + 12.0) * (-x * x / 2.0).exp()).unwrap();
        assert_eq!(count_nodes_default(&psi4), 4);
        assert_eq!(count_nodes_default(&psi4.scaled(-3.0)), 4);
    }

    #[test]
    fn normalization() {
        let big = Grid::new(-8.0, 8.0, 16001).unwrap();
        let psi0 = GridFunction::from_fn(big, |x| PI.powf(-0.25) * (-x * x / 2.0).exp()).unwrap();
        let n = normalize(&psi0.scaled(2.0)).unwrap();
        assert!(n.max_abs_diff(&psi0).unwrap() < 1e-9);
        let nn = normalize(&n).unwrap();
        assert!(nn.max_abs_diff(&n).unwrap() < 1e-12);

        let s = GridFunction::from_fn(unit(), |x| (PI * x).sin()).unwrap();
        let ns = normalize(&s).unwrap();
        assert!((ns.values()[50] - 2f64.sqrt()).abs() < 1e-4);
        assert_eq!(normalize(&GridFunction::zeros(unit())), Err(Error::ZeroNorm));
    }
}
