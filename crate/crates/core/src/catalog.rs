//! Exactly solvable base potentials.
//!
//! Conventions are fixed so that every entry has ground-state energy zero:
//!
//! | entry        | `V(x)`                                   | `E_k`            |
//! |--------------|------------------------------------------|------------------|
//! | oscillator   | `x² − 1`                                 | `2k`             |
//! | Morse        | `A² − B(2A+α)e^{−αx} + B²e^{−2αx}`       | `kα(2A − kα)`    |
//! | square well  | `−π²/L²` on `[0, L]`                     | `k(k+2)π²/L²`    |
//! | CPRS         | `x² + 3 + 8(2x²−1)/(2x²+1)²`             | `0`, `2k+4`      |
//!
//! Eigenfunctions come with analytic first and second derivatives. The second
//! derivative is evaluated from the special-function recurrences, not from
//! the Schrödinger equation, so partner potentials built from it are an
//! independent check of the tabulated `V`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridFunction};

/// Highest level supported by the Hermite/Laguerre recurrences.
pub const MAX_POLYNOMIAL_LEVEL: usize = 12;

/// Anything with a level index, an energy and a sampled wavefunction with
/// its derivative.
pub trait BoundState {
    fn level(&self) -> usize;
    fn energy(&self) -> f64;
    fn wavefunction(&self) -> &GridFunction;
    fn derivative(&self) -> &GridFunction;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Oscillator,
    Morse,
    SquareWell,
    Cprs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasePotential {
    Oscillator,
    Morse { a: f64, b: f64, alpha: f64 },
    SquareWell { width: f64 },
    Cprs,
}

impl BasePotential {
    pub fn oscillator() -> Self {
        BasePotential::Oscillator
    }

    pub fn morse(a: f64, b: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("A", a), ("B", b), ("alpha", alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Morse {name} must be positive, got {v}"
                )));
            }
        }
        Ok(BasePotential::Morse { a, b, alpha })
    }

    pub fn square_well(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "well width must be positive, got {width}"
            )));
        }
        Ok(BasePotential::SquareWell { width })
    }

    pub fn cprs() -> Self {
        BasePotential::Cprs
    }

    pub fn kind(&self) -> PotentialKind {
        match self {
            BasePotential::Oscillator => PotentialKind::Oscillator,
            BasePotential::Morse { .. } => PotentialKind::Morse,
            BasePotential::SquareWell { .. } => PotentialKind::SquareWell,
            BasePotential::Cprs => PotentialKind::Cprs,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BasePotential::Oscillator => "oscillator",
            BasePotential::Morse { .. } => "morse",
            BasePotential::SquareWell { .. } => "well",
            BasePotential::Cprs => "cprs",
        }
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            BasePotential::Morse { a, b, alpha } => {
                m.insert("A".to_string(), a);
                m.insert("B".to_string(), b);
                m.insert("alpha".to_string(), alpha);
            }
            BasePotential::SquareWell { width } => {
                m.insert("L".to_string(), width);
            }
            _ => {}
        }
        m
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            BasePotential::Oscillator => x * x - 1.0,
            BasePotential::Morse { a, b, alpha } => {
                let e = (-alpha * x).exp();
                a * a - b * (2.0 * a + alpha) * e + b * b * e * e
            }
            BasePotential::SquareWell { width } => -PI * PI / (width * width),
            BasePotential::Cprs => {
                let u = 2.0 * x * x + 1.0;
                x * x + 3.0 + 8.0 * (2.0 * x * x - 1.0) / (u * u)
            }
        }
    }

    pub fn values(&self, grid: &Grid) -> GridFunction {
        GridFunction::from_fn(*grid, |x| self.value(x)).expect("catalog potentials are finite on finite grids")
    }

    /// Number of bound levels, `None` when unbounded.
    pub fn bound_count(&self) -> Option<usize> {
        match *self {
            BasePotential::Morse { a, alpha, .. } => Some((a / alpha).ceil() as usize),
            _ => None,
        }
    }

    /// Highest level this entry can evaluate.
    pub fn max_level(&self) -> usize {
        match self {
            BasePotential::SquareWell { .. } => usize::MAX,
            BasePotential::Morse { .. } => self
                .bound_count()
                .map(|c| c.saturating_sub(1))
                .unwrap_or(0)
                .min(MAX_POLYNOMIAL_LEVEL),
            _ => MAX_POLYNOMIAL_LEVEL,
        }
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k > self.max_level() {
            let bound = match self.bound_count() {
                Some(c) => format!("0..{c}"),
                None => format!("unbounded, supported up to {}", self.max_level()),
            };
            return Err(Error::NoSuchBoundState {
                potential: self.name().to_string(),
                level: k,
                bound,
            });
        }
        Ok(())
    }

    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        self.check_level(k)?;
        let kf = k as f64;
        Ok(match *self {
            BasePotential::Oscillator => 2.0 * kf,
            BasePotential::Morse { a, alpha, .. } => kf * alpha * (2.0 * a - kf * alpha),
            BasePotential::SquareWell { width } => kf * (kf + 2.0) * PI * PI / (width * width),
            BasePotential::Cprs => {
                if k == 0 {
                    0.0
                } else {
                    2.0 * kf + 4.0
                }
            }
        })
    }

    /// Recommended sampling domain.
    pub fn default_grid(&self) -> Grid {
        let (lo, hi, n) = match *self {
            BasePotential::Oscillator | BasePotential::Cprs => (-8.0, 8.0, 16001),
            BasePotential::Morse { .. } => (-4.0, 14.0, 16001),
            BasePotential::SquareWell { width } => (0.0, width, 8001),
        };
        Grid::new(lo, hi, n).expect("static grid")
    }

    /// Energies above this are treated as discretized continuum.
    pub fn continuum_threshold(&self) -> f64 {
        match *self {
            BasePotential::Morse { a, .. } => a * a - 0.5,
            _ => f64::INFINITY,
        }
    }

    pub fn ladder(&self) -> LadderDescriptor {
        match *self {
            BasePotential::Oscillator => LadderDescriptor::Oscillator,
            BasePotential::Morse { a, b, alpha } => LadderDescriptor::Morse {
                s: a / alpha,
                alpha,
                y_scale: 2.0 * b / alpha,
            },
            BasePotential::SquareWell { width } => LadderDescriptor::Well { width },
            BasePotential::Cprs => LadderDescriptor::CprsComposite,
        }
    }

    /// Unnormalized `(ψ_k, ψ_k′, ψ_k″)` at `x`.
    fn sample(&self, k: usize, x: f64) -> (f64, f64, f64) {
        match *self {
            BasePotential::Oscillator => {
                let d = hermite_function_derivatives(k, x);
                (d[0], d[1], d[2])
            }
            BasePotential::Morse { a, b, alpha } => morse_sample(a / alpha, alpha, 2.0 * b / alpha, k, x),
            BasePotential::SquareWell { width } => {
                let q = (k as f64 + 1.0) * PI / width;
                let (s, c) = (q * x).sin_cos();
                (s, q * c, -q * q * s)
            }
            BasePotential::Cprs => cprs_sample(k, x),
        }
    }

    fn check_domain(&self, g: &Grid) -> Result<()> {
        if let BasePotential::SquareWell { width } = *self {
            let tol = 1e-9 * width;
            if g.x_min().abs() > tol || (g.x_max() - width).abs() > tol {
                return Err(Error::InvalidGrid(format!(
                    "square well states live on [0, {width}], grid is [{}, {}]",
                    g.x_min(),
                    g.x_max()
                )));
            }
        }
        Ok(())
    }

    /// Normalized eigenstate `k` sampled on `grid`.
    pub fn eigenstate(&self, k: usize, grid: &Grid) -> Result<EigenState> {
        let energy = self.eigenvalue(k)?;
        self.check_domain(grid)?;
        let n = grid.len();
        let (mut psi, mut dpsi, mut d2psi) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for x in grid.points() {
            let (p, d, dd) = self.sample(k, x);
            psi.push(p);
            dpsi.push(d);
            d2psi.push(dd);
        }
        let psi = GridFunction::new(*grid, psi)?;
        let norm = grid::norm(&psi);
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / norm;
        Ok(EigenState {
            potential: *self,
            level: k,
            energy,
            psi: psi.scaled(s),
            dpsi: GridFunction::new(*grid, dpsi)?.scaled(s),
            d2psi: GridFunction::new(*grid, d2psi)?.scaled(s),
        })
    }
}

/// Normalized eigenfunction of a catalog potential.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenState {
    potential: BasePotential,
    level: usize,
    energy: f64,
    psi: GridFunction,
    dpsi: GridFunction,
    d2psi: GridFunction,
}

impl EigenState {
    pub fn potential(&self) -> &BasePotential {
        &self.potential
    }

    pub fn second_derivative(&self) -> &GridFunction {
        &self.d2psi
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }
}

impl BoundState for EigenState {
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

/// Samples of a function that may be singular at isolated points.
/// Flagged samples hold NaN.
#[derive(Debug, Clone)]
pub struct MaskedFunction {
    grid: Grid,
    values: Vec<f64>,
    singular: Vec<bool>,
}

impl MaskedFunction {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_singular(&self, i: usize) -> bool {
        self.singular[i]
    }

    pub fn singular_mask(&self) -> &[bool] {
        &self.singular
    }

    pub fn singular_points(&self) -> Vec<f64> {
        (0..self.values.len())
            .filter(|&i| self.singular[i])
            .map(|i| self.grid.point(i))
            .collect()
    }

    /// `max |self − other|` over unflagged samples.
    pub fn max_abs_diff_unflagged(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != *other.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(other.values())
            .zip(&self.singular)
            .filter(|(_, &s)| !s)
            .fold(0.0_f64, |m, ((a, b), _)| m.max((a - b).abs())))
    }
}

/// `W = −ψ′/ψ`. A sample is flagged when the first-order distance estimate
/// `|ψ/ψ′|` to a zero of `ψ` is at most one grid spacing.
pub fn superpotential(state: &EigenState) -> MaskedFunction {
    let grid = *state.grid();
    let h = grid.spacing();
    let psi = state.psi.values();
    let dpsi = state.dpsi.values();
    let mut values = Vec::with_capacity(psi.len());
    let mut singular = Vec::with_capacity(psi.len());
    for (&p, &d) in psi.iter().zip(dpsi) {
        if p == 0.0 || p.abs() <= h * d.abs() {
            values.push(f64::NAN);
            singular.push(true);
        } else {
            values.push(-d / p);
            singular.push(false);
        }
    }
    MaskedFunction { grid, values, singular }
}

/// `(V₋, V₊) = (W² − W′, W² + W′)` with `W′ = W² − ψ″/ψ`.
pub fn partner_potentials(state: &EigenState) -> (MaskedFunction, MaskedFunction) {
    let w = superpotential(state);
    let psi = state.psi.values();
    let d2 = state.d2psi.values();
    let mut minus = Vec::with_capacity(psi.len());
    let mut plus = Vec::with_capacity(psi.len());
    for i in 0..psi.len() {
        if w.singular[i] {
            minus.push(f64::NAN);
            plus.push(f64::NAN);
        } else {
            let wi = w.values[i];
            let curvature = d2[i] / psi[i];
            let dw = wi * wi - curvature;
            minus.push(wi * wi - dw);
            plus.push(wi * wi + dw);
        }
    }
    (
        MaskedFunction {
            grid: w.grid,
            values: minus,
            singular: w.singular.clone(),
        },
        MaskedFunction {
            grid: w.grid,
            values: plus,
            singular: w.singular,
        },
    )
}

// ---------------------------------------------------------------------------
// special functions

/// Normalized Hermite functions `φ_0..=φ_kmax` at `x`, `φ_j ∝ H_j(x)e^{−x²/2}`.
pub(crate) fn hermite_functions(x: f64, kmax: usize) -> Vec<f64> {
    let mut phi = Vec::with_capacity(kmax + 1);
    phi.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if kmax >= 1 {
        phi.push(2f64.sqrt() * x * phi[0]);
    }
    for j in 1..kmax {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * phi[j] - (jf / (jf + 1.0)).sqrt() * phi[j - 1];
        phi.push(next);
    }
    phi
}

/// `[φ_k, φ_k′, φ_k″, φ_k‴]` at `x` from `φ_j′ = √(j/2)φ_{j−1} − √((j+1)/2)φ_{j+1}`.
fn hermite_function_derivatives(k: usize, x: f64) -> [f64; 4] {
    let kmax = k + 3;
    let phi = hermite_functions(x, kmax);
    let mut coeffs = vec![0.0; kmax + 1];
    coeffs[k] = 1.0;
    let mut out = [0.0; 4];
    for slot in out.iter_mut() {
        *slot = coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum();
        let mut next = vec![0.0; kmax + 1];
        for (j, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let jf = j as f64;
            if j >= 1 {
                next[j - 1] += c * (jf / 2.0).sqrt();
            }
            if j < kmax {
                next[j + 1] -= c * ((jf + 1.0) / 2.0).sqrt();
            }
        }
        coeffs = next;
    }
    out
}

/// Associated Laguerre polynomial `L_n^{(a)}(y)` by the three-term recurrence.
pub(crate) fn laguerre(n: usize, a: f64, y: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - y;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + a - y) * cur - (jf + a) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Morse `ψ_k = y^{s−k} e^{−y/2} L_k^{(2s−2k)}(y)` with `y = y_scale·e^{−αx}`.
fn morse_sample(s: f64, alpha: f64, y_scale: f64, k: usize, x: f64) -> (f64, f64, f64) {
    let p = s - k as f64;
    let a = 2.0 * p;
    let ln_y = y_scale.ln() - alpha * x;
    let y = ln_y.exp();
    let pre = (p * ln_y - 0.5 * y).exp();
    let l = laguerre(k, a, y);
    let ly = if k >= 1 { -laguerre(k - 1, a + 1.0, y) } else { 0.0 };
    let lyy = if k >= 2 { laguerre(k - 2, a + 2.0, y) } else { 0.0 };
    let q = p - 0.5 * y;
    // d/dx = −α y d/dy
    let psi = pre * l;
    let dpsi = -alpha * pre * (q * l + y * ly);
    let y2_psi_yy = pre * ((q * q - p) * l + 2.0 * y * q * ly + y * y * lyy);
    let y_psi_y = pre * (q * l + y * ly);
    let d2psi = alpha * alpha * (y2_psi_yy + y_psi_y);
    (psi, dpsi, d2psi)
}

/// CPRS superpotential `x + 4x/(2x²+1)` and its first two derivatives.
pub(crate) fn cprs_superpotential(x: f64) -> (f64, f64, f64) {
    let u = 2.0 * x * x + 1.0;
    let w = x + 4.0 * x / u;
    let dw = 1.0 + 4.0 / u - 16.0 * x * x / (u * u);
    let d2w = -48.0 * x / (u * u) + 128.0 * x.powi(3) / u.powi(3);
    (w, dw, d2w)
}

/// CPRS states: `ψ_0 = e^{−x²/2}/(2x²+1)`, `ψ_k ∝ A†φ_{k−1}` with
/// `A† = −∂ + W` and `φ` the Hermite functions of the partner `x² + 5`.
fn cprs_sample(k: usize, x: f64) -> (f64, f64, f64) {
    let (w, dw, d2w) = cprs_superpotential(x);
    if k == 0 {
        let u = 2.0 * x * x + 1.0;
        let psi = (-0.5 * x * x).exp() / u;
        // ψ′ = −Wψ, ψ″ = (W² − W′)ψ
        return (psi, -w * psi, (w * w - dw) * psi);
    }
    let [f0, f1, f2, f3] = hermite_function_derivatives(k - 1, x);
    let psi = -f1 + w * f0;
    let dpsi = -f2 + dw * f0 + w * f1;
    let d2psi = -f3 + d2w * f0 + 2.0 * dw * f1 + w * f2;
    (psi, dpsi, d2psi)
}

// ---------------------------------------------------------------------------
// ladder operators

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// Native ladder operators of a catalog potential.
///
/// * `Oscillator`: `a = ∂ + x`, `a† = −∂ + x`.
/// * `Morse`: `K±` in the variable `y = y_scale·e^{−αx}`, `s = A/α`, with the
///   level of the state acted on substituted for the index in the
///   coefficients.
/// * `Well`: `M±` with `k̂ψ_k = (k+1)ψ_k` applied by level index.
/// * `CprsComposite`: `A†a†A` and `A†aA`, `A = ∂ + x + 4x/(2x²+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LadderDescriptor {
    Oscillator,
    Morse { s: f64, alpha: f64, y_scale: f64 },
    Well { width: f64 },
    CprsComposite,
}

impl LadderDescriptor {
    pub fn name(&self) -> &'static str {
        match self {
            LadderDescriptor::Oscillator => "a, a†",
            LadderDescriptor::Morse { .. } => "K+, K-",
            LadderDescriptor::Well { .. } => "M+, M-",
            LadderDescriptor::CprsComposite => "A†a†A, A†aA",
        }
    }

    /// Raw (unnormalized) image of a catalog eigenstate.
    pub fn apply(&self, state: &EigenState, direction: Direction) -> Result<GridFunction> {
        let k = state.level;
        let p = &state.potential;
        match direction {
            Direction::Up => {
                p.eigenvalue(k + 1)?;
                if matches!(self, LadderDescriptor::CprsComposite) && k == 0 {
                    return Err(Error::GroundStateAnnihilated(p.name().into()));
                }
            }
            Direction::Down => {
                let annihilated = match self {
                    LadderDescriptor::Morse { .. } => k == 0,
                    // A†aA passes through φ_0 of the partner, which a kills
                    LadderDescriptor::CprsComposite => k <= 1,
                    _ => false,
                };
                if annihilated {
                    return Err(Error::GroundStateAnnihilated(p.name().into()));
                }
            }
        }
        let values = self.apply_raw(state.psi.grid(), state.psi.values(), state.dpsi.values(), k, direction);
        GridFunction::new(*state.psi.grid(), values)
    }

    /// Applies the operator to an arbitrary function that is (numerically)
    /// proportional to eigenstate `level`, using finite differences.
    pub fn apply_at_level(&self, g: &GridFunction, level: usize, direction: Direction) -> Result<GridFunction> {
        let annihilated = match (self, direction) {
            (LadderDescriptor::Morse { .. }, Direction::Down) => level == 0,
            (LadderDescriptor::CprsComposite, Direction::Down) => level <= 1,
            (LadderDescriptor::CprsComposite, Direction::Up) => level == 0,
            _ => false,
        };
        if annihilated {
            return Err(Error::GroundStateAnnihilated(self.name().into()));
        }
        let dg = grid::derivative(g);
        let values = self.apply_raw(g.grid(), g.values(), dg.values(), level, direction);
        GridFunction::new(*g.grid(), values)
    }

    /// Closed-form image of an eigenfunction `g` of `−∂² + v` at `energy`,
    /// returned with its derivative and energy. Every second derivative comes
    /// from the eigen-relation, so no finite differences are taken.
    pub fn apply_eigen(
        &self,
        g: &GridFunction,
        dg: &GridFunction,
        v: &GridFunction,
        level: usize,
        energy: f64,
        direction: Direction,
    ) -> Result<(GridFunction, GridFunction, f64)> {
        let annihilated = match (self, direction) {
            (LadderDescriptor::Morse { .. }, Direction::Down) => level == 0,
            (LadderDescriptor::CprsComposite, Direction::Down) => level <= 1,
            (LadderDescriptor::CprsComposite, Direction::Up) => level == 0,
            _ => false,
        };
        if annihilated {
            return Err(Error::GroundStateAnnihilated(self.name().into()));
        }
        if g.grid() != dg.grid() || g.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = *g.grid();
        let (g, dg, v) = (g.values(), dg.values(), v.values());
        let n = g.len();
        let kf = level as f64;
        let up = direction == Direction::Up;
        let target = if up { kf + 1.0 } else { kf - 1.0 };
        let mut h = Vec::with_capacity(n);
        let mut dh = Vec::with_capacity(n);
        let shift = match *self {
            LadderDescriptor::Oscillator | LadderDescriptor::CprsComposite => {
                if up {
                    2.0
                } else {
                    -2.0
                }
            }
            LadderDescriptor::Morse { s, alpha, .. } => {
                alpha * alpha * (target * (2.0 * s - target) - kf * (2.0 * s - kf))
            }
            LadderDescriptor::Well { width } => PI * PI / (width * width) * (target * (target + 2.0) - kf * (kf + 2.0)),
        };
        for i in 0..n {
            let x = grid.point(i);
            let d2g = (v[i] - energy) * g[i];
            let (a, b) = match *self {
                LadderDescriptor::Oscillator => {
                    if up {
                        (-dg[i] + x * g[i], -d2g + g[i] + x * dg[i])
                    } else {
                        (dg[i] + x * g[i], d2g + g[i] + x * dg[i])
                    }
                }
                LadderDescriptor::Morse { s, alpha, y_scale } => {
                    let u = 1.0 / (y_scale * (-alpha * x).exp());
                    let sk = s - kf;
                    // (1/y)′ = α/y
                    let common = sk * (dg[i] * u + alpha * g[i] * u);
                    if up {
                        let c = (s + 0.5) / (2.0 * s - 2.0 * kf - 1.0);
                        (
                            -dg[i] * u / alpha + sk * u * g[i] - c * g[i],
                            -d2g * u / alpha - dg[i] * u + common - c * dg[i],
                        )
                    } else {
                        let c = (s + 0.5) / (2.0 * s - 2.0 * kf + 1.0);
                        (
                            dg[i] * u / alpha + sk * u * g[i] - c * g[i],
                            d2g * u / alpha + dg[i] * u + common - c * dg[i],
                        )
                    }
                }
                LadderDescriptor::Well { width } => {
                    let q = PI / width;
                    let (sn, cs) = (q * x).sin_cos();
                    if up {
                        (
                            (kf + 1.0) * cs * g[i] + sn * dg[i] / q,
                            -(kf + 1.0) * q * sn * g[i] + (kf + 2.0) * cs * dg[i] + sn * d2g / q,
                        )
                    } else {
                        let r = kf / (kf + 1.0);
                        (
                            kf * cs * g[i] - r * sn * dg[i] / q,
                            -kf * q * sn * g[i] + (kf - r) * cs * dg[i] - r * sn * d2g / q,
                        )
                    }
                }
                LadderDescriptor::CprsComposite => {
                    let (w, dw, _) = cprs_superpotential(x);
                    // A g, an eigenfunction of x² + 5 at the same energy
                    let t1 = dg[i] + w * g[i];
                    let dt1 = d2g + dw * g[i] + w * dg[i];
                    let d2t1 = (x * x + 5.0 - energy) * t1;
                    let sign = if up { -1.0 } else { 1.0 };
                    let t2 = sign * dt1 + x * t1;
                    let dt2 = sign * d2t1 + t1 + x * dt1;
                    let d2t2 = (x * x + 5.0 - energy - shift) * t2;
                    (-dt2 + w * t2, -d2t2 + dw * t2 + w * dt2)
                }
            };
            h.push(a);
            dh.push(b);
        }
        Ok((
            GridFunction::new(grid, h)?,
            GridFunction::new(grid, dh)?,
            energy + shift,
        ))
    }

    fn apply_raw(&self, grid: &Grid, g: &[f64], dg: &[f64], k: usize, direction: Direction) -> Vec<f64> {
        let xs: Vec<f64> = grid.points().collect();
        let h = grid.spacing();
        let kf = k as f64;
        match *self {
            LadderDescriptor::Oscillator => {
                let sign = if direction == Direction::Up { -1.0 } else { 1.0 };
                (0..g.len()).map(|i| sign * dg[i] + xs[i] * g[i]).collect()
            }
            LadderDescriptor::Morse { s, alpha, y_scale } => (0..g.len())
                .map(|i| {
                    let y = y_scale * (-alpha * xs[i]).exp();
                    let dy = -dg[i] / (alpha * y);
                    match direction {
                        Direction::Up => dy + (s - kf) / y * g[i] - (s + 0.5) / (2.0 * s - 2.0 * kf - 1.0) * g[i],
                        Direction::Down => -(dy - (s - kf) / y * g[i] + (s + 0.5) / (2.0 * s - 2.0 * kf + 1.0) * g[i]),
                    }
                })
                .collect(),
            LadderDescriptor::Well { width } => (0..g.len())
                .map(|i| {
                    let (sn, cs) = (PI * xs[i] / width).sin_cos();
                    let lp = width / PI;
                    match direction {
                        Direction::Up => (kf + 1.0) * cs * g[i] + lp * sn * dg[i],
                        Direction::Down => kf * cs * g[i] - kf / (kf + 1.0) * lp * sn * dg[i],
                    }
                })
                .collect(),
            LadderDescriptor::CprsComposite => {
                let w: Vec<f64> = xs.iter().map(|&x| cprs_superpotential(x).0).collect();
                // A g
                let t1: Vec<f64> = (0..g.len()).map(|i| dg[i] + w[i] * g[i]).collect();
                let d1 = grid::first_difference(&t1, h);
                // a† or a
                let sign = if direction == Direction::Up { -1.0 } else { 1.0 };
                let t2: Vec<f64> = (0..g.len()).map(|i| sign * d1[i] + xs[i] * t1[i]).collect();
                let d2 = grid::first_difference(&t2, h);
                // A†
                (0..g.len()).map(|i| -d2[i] + w[i] * t2[i]).collect()
            }
        }
    }
}

/// `⟨image, target⟩ / ⟨target, target⟩`.
pub fn proportionality(image: &GridFunction, target: &GridFunction) -> Result<f64> {
    let tt = grid::inner_product(target, target)?;
    if tt == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(grid::inner_product(image, target)? / tt)
}

/// Machine-readable description of a catalog entry.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub potential: &'static str,
    pub parameters: Vec<&'static str>,
    pub energy_formula: &'static str,
    pub bound_count: String,
    pub default_grid: [f64; 3],
    pub ladder: &'static str,
    pub paper_scale: &'static str,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    let entry = |p: BasePotential, potential, parameters, energy_formula, paper_scale| {
        let g = p.default_grid();
        CatalogEntry {
            name: p.name(),
            potential,
            parameters,
            energy_formula,
            bound_count: match p.bound_count() {
                Some(c) => format!("ceil(A/alpha) = {c} at defaults"),
                None => "infinitely many".to_string(),
            },
            default_grid: [g.x_min(), g.x_max(), g.len() as f64],
            ladder: p.ladder().name(),
            paper_scale,
        }
    };
    vec![
        entry(
            BasePotential::Oscillator,
            "V(x) = x^2 - 1",
            vec![],
            "E_k = 2k",
            "C_paper = sqrt(pi) C + sqrt(pi)/2 (n = 0)",
        ),
        entry(
            BasePotential::Morse {
                a: 2.0,
                b: 1.0,
                alpha: 1.0,
            },
            "V(x) = A^2 - B(2A+alpha)e^{-alpha x} + B^2 e^{-2 alpha x}",
            vec!["A", "B", "alpha"],
            "E_k = k alpha (2A - k alpha), k alpha < A",
            "C_paper = 3 C (A = 2, alpha = B = 1, n = 0)",
        ),
        entry(
            BasePotential::SquareWell { width: PI },
            "V(x) = -pi^2/L^2 on [0, L]",
            vec!["L"],
            "E_k = k(k+2) pi^2 / L^2",
            "C_paper = 4 L C",
        ),
        entry(
            BasePotential::Cprs,
            "V(x) = x^2 + 3 + 8(2x^2-1)/(2x^2+1)^2",
            vec![],
            "E_0 = 0, E_k = 2k + 4 (k >= 1)",
            "C_paper = 2 sqrt(pi) C + sqrt(pi) (n = 0)",
        ),
    ]
}
