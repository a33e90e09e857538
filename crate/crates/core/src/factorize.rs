//! Excited-state refactorization and the isospectral families it generates.
//!
//! Given an eigenpair `(E_n, ψ_n)` of `H = −∂² + V`, write
//! `A_n = ∂ + W_n`, `W_n = −ψ_n′/ψ_n`, and `B_n = ∂ + W_n + f`. The Bernoulli
//! equation `f′ + f² + 2W_n f = 0` makes `B_n B_n† = A_n A_n†` and is solved by
//!
//! ```text
//! f(x) = ψ_n²(x) / D(x),    D(x) = C + I(x),    I(x) = ∫_{x_min}^{x} ψ_n²
//! ```
//!
//! The deformed Hamiltonian `B_n†B_n = −∂² + Ṽ` with `Ṽ = V − E_n − 2f′` is
//! strictly isospectral to `V − E_n` when `D` never vanishes, i.e. when `C`
//! lies outside `[−I(x_max), 0]`.
//!
//! `W_n` is singular at the nodes of `ψ_n`, so nothing here evaluates it.
//! Every operator is expanded into a node-safe form first:
//!
//! ```text
//! f′          = 2ψψ′/D − ψ⁴/D²
//! B†A g       = H_n g + f g′ − (ψψ′/D) g
//! A†B g       = H_n g − f g′ − (3ψψ′/D − ψ⁴/D²) g
//! B†A ψ_k     = (E_k − E_n) ψ_k + (ψ/D)(ψ ψ_k′ − ψ′ ψ_k)
//! A†B ψ̃_k    = Ẽ_k ψ̃_k + (ψψ′/D − ψ⁴/D²) ψ̃_k − (ψ²/D) ψ̃_k′
//! ```
//!
//! with `H_n = −∂² + V − E_n` and `ψ = ψ_n`. The fourth line uses
//! `ψ_k″ = (V − E_k)ψ_k`; the fifth uses `ψ̃_k″ = (Ṽ − Ẽ_k)ψ̃_k`.
//!
//! Internally `C` is kept in the scale of the source state as given ("raw").
//! For a normalized source this is the normalized scale, in which the
//! forbidden interval is always `[−1, 0]`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::catalog::{BasePotential, BoundState, Direction, LadderDescriptor, MAX_POLYNOMIAL_LEVEL};
use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridFunction};

/// Affine reparametrization `C_paper = slope · C_normalized + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineScale {
    pub slope: f64,
    pub offset: f64,
}

impl AffineScale {
    pub const IDENTITY: AffineScale = AffineScale {
        slope: 1.0,
        offset: 0.0,
    };

    pub fn to_scaled(&self, c_normalized: f64) -> f64 {
        self.slope * c_normalized + self.offset
    }

    pub fn to_normalized(&self, c_scaled: f64) -> f64 {
        (c_scaled - self.offset) / self.slope
    }

    /// Image of the normalized forbidden interval `[−1, 0]`.
    pub fn forbidden(&self) -> (f64, f64) {
        let a = self.to_scaled(-1.0);
        let b = self.to_scaled(0.0);
        (a.min(b), a.max(b))
    }
}

/// Which convention a user-supplied `C` is expressed in.
///
/// The `Paper*` scales follow the unnormalized antiderivative conventions of
/// the classic closed forms for each example family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CScale {
    Normalized,
    PaperMorse,
    PaperWell,
    PaperCprs,
    PaperOscillator,
    /// Second step of the oscillator chain: `C̃_paper = (√π/2)(C̃ + I(0))`
    /// with `I` the normalized cumulative integral of the seed state.
    PaperChain,
}

impl CScale {
    /// The unnormalized convention for a given base potential.
    pub fn paper_for(p: &BasePotential) -> CScale {
        match p {
            BasePotential::Oscillator => CScale::PaperOscillator,
            BasePotential::Morse { .. } => CScale::PaperMorse,
            BasePotential::SquareWell { .. } => CScale::PaperWell,
            BasePotential::Cprs => CScale::PaperCprs,
        }
    }

    pub fn is_paper(&self) -> bool {
        !matches!(self, CScale::Normalized)
    }

    /// Affine map for a single-step deformation of `p` at `level`.
    pub fn affine(&self, p: &BasePotential, level: usize) -> Result<AffineScale> {
        let sqrt_pi = PI.sqrt();
        let unavailable = || Error::ScaleUnavailable(format!("{self:?} with {} level {level}", p.name()));
        match (self, p) {
            (CScale::Normalized, _) => Ok(AffineScale::IDENTITY),
            (CScale::PaperMorse, BasePotential::Morse { a, b, alpha })
                if level == 0 && is_close(*a, 2.0) && is_close(*b, 1.0) && is_close(*alpha, 1.0) =>
            {
                Ok(AffineScale {
                    slope: 3.0,
                    offset: 0.0,
                })
            }
            (CScale::PaperWell, BasePotential::SquareWell { width }) => Ok(AffineScale {
                slope: 4.0 * width,
                offset: 0.0,
            }),
            (CScale::PaperCprs, BasePotential::Cprs) if level == 0 => Ok(AffineScale {
                slope: 2.0 * sqrt_pi,
                offset: sqrt_pi,
            }),
            (CScale::PaperOscillator, BasePotential::Oscillator) if level == 0 => Ok(AffineScale {
                slope: sqrt_pi,
                offset: sqrt_pi / 2.0,
            }),
            _ => Err(unavailable()),
        }
    }

    /// Map for the second oscillator chain step, anchored at `x = 0`.
    pub fn chain_affine(seed: &impl BoundState) -> Result<AffineScale> {
        let psi = seed.wavefunction();
        let g = psi.grid();
        let zero = g
            .index_of(0.0)
            .ok_or_else(|| Error::ScaleUnavailable("chain scale needs x = 0 on the grid".into()))?;
        let integral = integral_of_square(seed)?;
        let total = *integral.values().last().unwrap();
        let at_zero = integral.values()[zero] / total;
        let half_sqrt_pi = PI.sqrt() / 2.0;
        Ok(AffineScale {
            slope: half_sqrt_pi,
            offset: half_sqrt_pi * at_zero,
        })
    }
}

fn is_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

/// Values of `C` for which the denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityInterval {
    /// Forbidden interval in the normalized scale. Always `[−1, 0]`.
    pub forbidden: (f64, f64),
    /// Forbidden interval for the source state as given, `[−I(x_max), 0]`.
    pub raw_forbidden: (f64, f64),
    pub scale_map: AffineScale,
}

impl ValidityInterval {
    pub fn with_scale(self, scale_map: AffineScale) -> Self {
        ValidityInterval { scale_map, ..self }
    }

    pub fn scaled_forbidden(&self) -> (f64, f64) {
        self.scale_map.forbidden()
    }

    /// Closed-interval test in the normalized scale.
    pub fn is_forbidden(&self, c_normalized: f64) -> bool {
        !c_normalized.is_finite() || (c_normalized >= self.forbidden.0 && c_normalized <= self.forbidden.1)
    }

    pub fn is_forbidden_scaled(&self, c_scaled: f64) -> bool {
        self.is_forbidden(self.scale_map.to_normalized(c_scaled))
    }
}

/// Forbidden interval of `C` for deformations seeded by `state`.
pub fn validity_interval(state: &impl BoundState) -> Result<ValidityInterval> {
    let integral = integral_of_square(state)?;
    let total = *integral.values().last().unwrap();
    Ok(ValidityInterval {
        forbidden: (-1.0, 0.0),
        raw_forbidden: (-total, 0.0),
        scale_map: AffineScale::IDENTITY,
    })
}

/// `I(x) = ∫_{x_min}^{x} ψ²` with the Euler–Maclaurin end correction
/// (integrand derivative `2ψψ′` is known), clamped to be nondecreasing.
fn integral_of_square(state: &impl BoundState) -> Result<GridFunction> {
    let psi = state.wavefunction();
    let dpsi = state.derivative();
    grid::same_grid(psi, dpsi)?;
    let sq = psi.zip_with(psi, |a, b| a * b)?;
    let dsq = psi.zip_with(dpsi, |a, b| 2.0 * a * b)?;
    let raw = grid::cumulative_integral_corrected(&sq, &dsq)?;
    let mut acc = 0.0_f64;
    let values = raw
        .values()
        .iter()
        .map(|&v| {
            acc = acc.max(v);
            acc
        })
        .collect();
    GridFunction::new(*psi.grid(), values)
}

/// Where a deformed state came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    /// Level of the seed state of the last deformation step.
    pub source_level: usize,
    /// `C` of the last step, normalized scale.
    pub c: f64,
    /// Number of deformation steps applied.
    pub depth: usize,
}

/// Normalized eigenstate of a deformed potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedState {
    level: usize,
    energy: f64,
    psi: GridFunction,
    dpsi: GridFunction,
    provenance: Provenance,
    missing: bool,
}

impl DeformedState {
    /// Wraps an undeformed state (depth 0), renormalizing it.
    pub fn from_bound(state: &impl BoundState) -> Result<Self> {
        let n = grid::norm(state.wavefunction());
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(DeformedState {
            level: state.level(),
            energy: state.energy(),
            psi: state.wavefunction().scaled(1.0 / n),
            dpsi: state.derivative().scaled(1.0 / n),
            provenance: Provenance {
                source_level: state.level(),
                c: f64::INFINITY,
                depth: 0,
            },
            missing: false,
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// True for the state annihilated by `B_n`.
    pub fn is_missing_state(&self) -> bool {
        self.missing
    }

    fn normalized(
        level: usize,
        energy: f64,
        psi: Vec<f64>,
        dpsi: Vec<f64>,
        grid: Grid,
        provenance: Provenance,
        missing: bool,
    ) -> Result<Self> {
        let psi = GridFunction::new(grid, psi)?;
        let n = grid::norm(&psi);
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(DeformedState {
            level,
            energy,
            psi: psi.scaled(1.0 / n),
            dpsi: GridFunction::new(grid, dpsi)?.scaled(1.0 / n),
            provenance,
            missing,
        })
    }
}

impl BoundState for DeformedState {
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

/// A single deformation step seeded by one eigenstate.
#[derive(Debug, Clone)]
pub struct Deformation {
    potential: GridFunction,
    level: usize,
    energy: f64,
    psi: GridFunction,
    dpsi: GridFunction,
    c: f64,
    integral: GridFunction,
    total: f64,
    denom: Vec<f64>,
    depth: usize,
}

impl Deformation {
    /// Deformation of `potential` seeded by its eigenstate `state`, with `C`
    /// in the normalized scale.
    pub fn new(potential: &GridFunction, state: &impl BoundState, c_normalized: f64) -> Result<Self> {
        let integral = integral_of_square(state)?;
        let total = *integral.values().last().unwrap();
        Deformation::build(potential, state, c_normalized * total, integral, total, 1)
    }

    /// Same, with `C` taken literally against `∫ψ²` of `state` as given
    /// (no normalization).
    pub fn with_raw_constant(potential: &GridFunction, state: &impl BoundState, c: f64) -> Result<Self> {
        let integral = integral_of_square(state)?;
        let total = *integral.values().last().unwrap();
        Deformation::build(potential, state, c, integral, total, 1)
    }

    fn build(
        potential: &GridFunction,
        state: &impl BoundState,
        c: f64,
        integral: GridFunction,
        total: f64,
        depth: usize,
    ) -> Result<Self> {
        let psi = state.wavefunction();
        grid::same_grid(potential, psi)?;
        if total <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        if !c.is_finite() || (c >= -total && c <= 0.0) {
            return Err(Error::SingularC {
                c: c / total,
                forbidden_lo: -1.0,
                forbidden_hi: 0.0,
            });
        }
        let denom = integral.values().iter().map(|i| c + i).collect();
        Ok(Deformation {
            potential: potential.clone(),
            level: state.level(),
            energy: state.energy(),
            psi: psi.clone(),
            dpsi: state.derivative().clone(),
            c,
            integral,
            total,
            denom,
            depth,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Energy `E_n` of the seed state.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn c_raw(&self) -> f64 {
        self.c
    }

    pub fn c_normalized(&self) -> f64 {
        self.c / self.total
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Integration origin of `I`, pinned to the left grid edge.
    pub fn x0(&self) -> f64 {
        self.grid().x_min()
    }

    /// Cached `I(x)`.
    pub fn integral(&self) -> &GridFunction {
        &self.integral
    }

    /// `D(x) = C + I(x)`.
    pub fn denominator(&self) -> &[f64] {
        &self.denom
    }

    pub fn validity_interval(&self) -> ValidityInterval {
        ValidityInterval {
            forbidden: (-1.0, 0.0),
            raw_forbidden: (-self.total, 0.0),
            scale_map: AffineScale::IDENTITY,
        }
    }

    /// `V − E_n`, the potential the family is isospectral to.
    pub fn shifted_potential(&self) -> GridFunction {
        self.potential.map(|_, v| v - self.energy).expect("finite")
    }

    fn func(&self, f: impl Fn(usize) -> f64) -> GridFunction {
        GridFunction::new(*self.grid(), (0..self.psi.len()).map(f).collect())
            .expect("valid C keeps every closed form finite")
    }

    /// `f = ψ_n² / D`.
    pub fn deformation_function(&self) -> GridFunction {
        let p = self.psi.values();
        self.func(|i| p[i] * p[i] / self.denom[i])
    }

    /// `f′ = 2ψψ′/D − ψ⁴/D²`.
    pub fn deformation_derivative(&self) -> GridFunction {
        let p = self.psi.values();
        let d = self.dpsi.values();
        self.func(|i| {
            let q = p[i] * p[i] / self.denom[i];
            2.0 * p[i] * d[i] / self.denom[i] - q * q
        })
    }

    /// `Ṽ = V − E_n − 2f′`.
    pub fn deformed_potential(&self) -> GridFunction {
        let df = self.deformation_derivative();
        let v = self.potential.values();
        self.func(|i| v[i] - self.energy - 2.0 * df.values()[i])
    }

    /// `N(C)` such that `N ψ_n / D` is normalized, `√(C(C+T)/T)` with
    /// `T = I(x_max)`. For a normalized seed this is `√(C(C+1))`.
    pub fn missing_state_constant(&self) -> f64 {
        (self.c * (self.c + self.total) / self.total).sqrt()
    }

    /// The level-`n` eigenstate `∝ ψ_n / D` of the deformed potential,
    /// annihilated by `B_n`. Energy is zero. Signed to tend to `ψ_n` as
    /// `|C| → ∞`.
    pub fn missing_state(&self) -> DeformedState {
        let p = self.psi.values();
        let d = self.dpsi.values();
        let sign = self.c.signum();
        let psi: Vec<f64> = (0..p.len()).map(|i| sign * p[i] / self.denom[i]).collect();
        let dpsi: Vec<f64> = (0..p.len())
            .map(|i| {
                let dd = self.denom[i];
                sign * (d[i] / dd - p[i].powi(3) / (dd * dd))
            })
            .collect();
        DeformedState::normalized(self.level, 0.0, psi, dpsi, *self.grid(), self.provenance(), true)
            .expect("missing state is normalizable for valid C")
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            source_level: self.level,
            c: self.c_normalized(),
            depth: self.depth,
        }
    }

    fn check_partner(&self, state: &impl BoundState) -> Result<f64> {
        if state.level() == self.level {
            return Err(Error::UseMissingState(self.level));
        }
        grid::same_grid(&self.psi, state.wavefunction())?;
        let gap = state.energy() - self.energy;
        if gap.abs() < 1e-12 {
            return Err(Error::UseMissingState(self.level));
        }
        Ok(gap)
    }

    /// `B_n†A_n ψ_k` in closed form, before dividing by `E_k − E_n`.
    pub fn intertwine(&self, state: &impl BoundState) -> Result<GridFunction> {
        let gap = self.check_partner(state)?;
        let (p, d) = (self.psi.values(), self.dpsi.values());
        let (q, dq) = (state.wavefunction().values(), state.derivative().values());
        Ok(self.func(|i| gap * q[i] + p[i] / self.denom[i] * (p[i] * dq[i] - d[i] * q[i])))
    }

    /// `ψ̃_k = (E_k − E_n)^{−1} B_n†A_n ψ_k`, renormalized on the grid.
    pub fn map_state(&self, state: &impl BoundState) -> Result<DeformedState> {
        let gap = self.check_partner(state)?;
        let (p, d) = (self.psi.values(), self.dpsi.values());
        let (q, dq) = (state.wavefunction().values(), state.derivative().values());
        let n = p.len();
        let mut psi = Vec::with_capacity(n);
        let mut dpsi = Vec::with_capacity(n);
        for i in 0..n {
            let dd = self.denom[i];
            let wr = p[i] * dq[i] - d[i] * q[i];
            psi.push(q[i] + p[i] * wr / (dd * gap));
            // Wronskian′ = −(E_k − E_n) ψ_n ψ_k, D′ = ψ_n²
            dpsi.push(dq[i] - p[i] * p[i] * q[i] / dd + (d[i] / dd - p[i].powi(3) / (dd * dd)) * wr / gap);
        }
        DeformedState::normalized(state.level(), gap, psi, dpsi, *self.grid(), self.provenance(), false)
    }

    /// `(Ẽ_k)^{−1} A_n†B_n ψ̃_k`, which recovers the undeformed `ψ_k`.
    pub fn inverse_map_state(&self, state: &DeformedState) -> Result<GridFunction> {
        if state.missing || state.level == self.level {
            return Err(Error::UseMissingState(self.level));
        }
        grid::same_grid(&self.psi, &state.psi)?;
        let e = state.energy;
        if e.abs() < 1e-12 {
            return Err(Error::UseMissingState(self.level));
        }
        let (p, d) = (self.psi.values(), self.dpsi.values());
        let (t, dt) = (state.psi.values(), state.dpsi.values());
        Ok(self.func(|i| {
            let dd = self.denom[i];
            let q = p[i] * p[i] / dd;
            (e * t[i] + (p[i] * d[i] / dd - q * q) * t[i] - q * dt[i]) / e
        }))
    }

    fn coefficients(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (p, d) = (self.psi.values(), self.dpsi.values());
        let n = p.len();
        let mut f = Vec::with_capacity(n);
        let mut pd = Vec::with_capacity(n);
        let mut q2 = Vec::with_capacity(n);
        for i in 0..n {
            let dd = self.denom[i];
            let q = p[i] * p[i] / dd;
            f.push(q);
            pd.push(p[i] * d[i] / dd);
            q2.push(q * q);
        }
        (f, pd, q2)
    }

    /// `H_n g = −g″ + (V − E_n) g`, finite differences.
    pub fn shifted_hamiltonian(&self, g: &GridFunction) -> Result<GridFunction> {
        grid::same_grid(&self.psi, g)?;
        let d2 = grid::second_derivative(g);
        let v = self.potential.values();
        Ok(self.func(|i| -d2.values()[i] + (v[i] - self.energy) * g.values()[i]))
    }

    /// `H̃ g = −g″ + Ṽ g`, finite differences.
    pub fn deformed_hamiltonian(&self, g: &GridFunction) -> Result<GridFunction> {
        grid::same_grid(&self.psi, g)?;
        let d2 = grid::second_derivative(g);
        let vt = self.deformed_potential();
        Ok(self.func(|i| -d2.values()[i] + vt.values()[i] * g.values()[i]))
    }

    /// `B_n†A_n g` for an arbitrary `g`, finite differences.
    pub fn apply_b_dag_a(&self, g: &GridFunction) -> Result<GridFunction> {
        let hg = self.shifted_hamiltonian(g)?;
        let dg = grid::derivative(g);
        let (f, pd, _) = self.coefficients();
        Ok(self.func(|i| hg.values()[i] + f[i] * dg.values()[i] - pd[i] * g.values()[i]))
    }

    /// `A_n†B_n g` for an arbitrary `g`, finite differences.
    pub fn apply_a_dag_b(&self, g: &GridFunction) -> Result<GridFunction> {
        let hg = self.shifted_hamiltonian(g)?;
        let dg = grid::derivative(g);
        let (f, pd, q2) = self.coefficients();
        Ok(self.func(|i| hg.values()[i] - f[i] * dg.values()[i] - (3.0 * pd[i] - q2[i]) * g.values()[i]))
    }

    /// `‖(H̃ B†A − B†A H_n) g‖ / ‖g‖` with finite-difference operators.
    pub fn second_order_intertwining_residual(&self, test: &GridFunction) -> Result<f64> {
        let left = self.deformed_hamiltonian(&self.apply_b_dag_a(test)?)?;
        let right = self.apply_b_dag_a(&self.shifted_hamiltonian(test)?)?;
        let diff = left.zip_with(&right, |a, b| a - b)?;
        let n = grid::norm(test);
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(grid::norm(&diff) / n)
    }

    /// `(B_n†A_n) K (A_n†B_n) ψ̃_k` for a native ladder operator `K` of the
    /// seed potential. The result is proportional to `ψ̃_{k±1}`.
    pub fn composite_ladder(
        &self,
        ladder: &LadderDescriptor,
        state: &DeformedState,
        direction: Direction,
    ) -> Result<GridFunction> {
        let k = state.level;
        let target = match direction {
            Direction::Up => k + 1,
            Direction::Down => k
                .checked_sub(1)
                .ok_or_else(|| Error::GroundStateAnnihilated("deformed family".into()))?,
        };
        if target == self.level {
            return Err(Error::UseMissingState(self.level));
        }
        if !ladder_supports(ladder, target) {
            return Err(Error::NoSuchBoundState {
                potential: ladder.name().to_string(),
                level: target,
                bound: "ladder range".into(),
            });
        }
        let (g, dg) = self.inverse_map_with_derivative(state)?;
        let base_energy = state.energy + self.energy;
        let (h, dh, target_energy) = ladder.apply_eigen(&g, &dg, &self.potential, k, base_energy, direction)?;
        let gap = target_energy - self.energy;
        let (p, d) = (self.psi.values(), self.dpsi.values());
        let (h, dh) = (h.values(), dh.values());
        Ok(self.func(|i| gap * h[i] + p[i] / self.denom[i] * (p[i] * dh[i] - d[i] * h[i])))
    }

    /// [`Deformation::inverse_map_state`] together with its derivative,
    /// using `ψ̃″ = (Ṽ − Ẽ)ψ̃` and `ψ_n″ = (V − E_n)ψ_n`.
    fn inverse_map_with_derivative(&self, state: &DeformedState) -> Result<(GridFunction, GridFunction)> {
        let g = self.inverse_map_state(state)?;
        let e = state.energy;
        let (p, d) = (self.psi.values(), self.dpsi.values());
        let (t, dt) = (state.psi.values(), state.dpsi.values());
        let v = self.potential.values();
        let dg = self.func(|i| {
            let dd = self.denom[i];
            let q = p[i] * p[i] / dd;
            let pd = p[i] * d[i] / dd;
            let dq = 2.0 * pd - q * q;
            let dpd = (d[i] * d[i] + (v[i] - self.energy) * p[i] * p[i]) / dd - q * pd;
            let r = pd - q * q;
            let dr = dpd - 2.0 * q * dq;
            let d2t = (v[i] - self.energy - 2.0 * dq - e) * t[i];
            (e * dt[i] + dr * t[i] + r * dt[i] - dq * dt[i] - q * d2t) / e
        });
        Ok((g, dg))
    }
}

fn ladder_supports(ladder: &LadderDescriptor, level: usize) -> bool {
    match *ladder {
        LadderDescriptor::Morse { s, .. } => (level as f64) < s,
        LadderDescriptor::Well { .. } => true,
        _ => level <= MAX_POLYNOMIAL_LEVEL,
    }
}

// ---------------------------------------------------------------------------
// chains

/// One step of a chained deformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainStep {
    pub level: usize,
    pub c: f64,
    pub scale: CScale,
}

impl ChainStep {
    pub fn normalized(level: usize, c: f64) -> Self {
        ChainStep {
            level,
            c,
            scale: CScale::Normalized,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutcome {
    /// Final deformed potential.
    pub potential: GridFunction,
    /// `V − Σ shifts`, the potential the final family is isospectral to.
    pub reference: GridFunction,
    pub total_shift: f64,
    /// Tracked states sorted by level; energies relative to the final shift.
    pub states: Vec<DeformedState>,
    pub steps: Vec<Deformation>,
}

/// Applies `steps` in order. Before each step the spectrum is shifted so the
/// selected state sits at zero; all tracked states are re-mapped and
/// re-normalized after each step.
pub fn deform_chain(base: &BasePotential, grid: &Grid, steps: &[ChainStep], tracked: usize) -> Result<ChainOutcome> {
    let needed = steps.iter().map(|s| s.level + 1).max().unwrap_or(0);
    let count = tracked.max(needed).min(base.max_level().saturating_add(1));
    let mut states = Vec::with_capacity(count);
    for k in 0..count {
        states.push(DeformedState::from_bound(&base.eigenstate(k, grid)?)?);
    }
    let mut potential = base.values(grid);
    let mut total_shift = 0.0;
    let mut done = Vec::with_capacity(steps.len());

    for (index, step) in steps.iter().enumerate() {
        let wrap = |e: Error| Error::ChainStep {
            index,
            source: Box::new(e),
        };
        let seed = states
            .iter()
            .find(|s| s.level == step.level)
            .ok_or_else(|| {
                wrap(Error::NoSuchBoundState {
                    potential: base.name().into(),
                    level: step.level,
                    bound: format!("0..{}", states.len()),
                })
            })?
            .clone();
        let scale = match (step.scale, index) {
            (CScale::PaperChain, 0) => return Err(wrap(Error::ScaleUnavailable("chain scale on first step".into()))),
            (CScale::PaperChain, _) => {
                if !matches!(base, BasePotential::Oscillator) {
                    return Err(wrap(Error::ScaleUnavailable(format!(
                        "chain scale for {}",
                        base.name()
                    ))));
                }
                CScale::chain_affine(&seed).map_err(wrap)?
            }
            (s, 0) => s.affine(base, step.level).map_err(wrap)?,
            (CScale::Normalized, _) => AffineScale::IDENTITY,
            (s, _) => return Err(wrap(Error::ScaleUnavailable(format!("{s:?} on a chained step")))),
        };
        let c_norm = scale.to_normalized(step.c);
        let def = Deformation::new(&potential, &seed, c_norm).map_err(wrap)?;
        let def = Deformation {
            depth: index + 1,
            ..def
        };
        let mut next = Vec::with_capacity(states.len());
        for s in &states {
            if s.level == step.level {
                next.push(def.missing_state());
            } else {
                next.push(def.map_state(s).map_err(wrap)?);
            }
        }
        total_shift += seed.energy;
        potential = def.deformed_potential();
        states = next;
        done.push(def);
    }

    let reference = base.values(grid).map(|_, v| v - total_shift)?;
    Ok(ChainOutcome {
        potential,
        reference,
        total_shift,
        states,
        steps: done,
    })
}

// ---------------------------------------------------------------------------
// bosonic branch

/// Feasibility of the bosonic factorization `f = ψ^{−2}/(C − ∫ψ^{−2})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BosonicReport {
    pub level: usize,
    pub probe_c: f64,
    /// Trapezoid `∫ψ^{−2}` over the grid; infinite when `ψ` vanishes on a sample.
    pub inverse_square_integral: f64,
    /// `∫ψ^{−2}` over the full grid divided by the same over the central 80%.
    pub growth_ratio: f64,
    pub divergent: bool,
    /// Interior zeros of `ψ_n`, where `V₊^{(n)}` is singular.
    pub interior_singularities: Vec<f64>,
    /// First point where `C − ∫_{x_min}^{x} ψ^{−2}` changes sign, if any.
    pub probe_zero: Option<f64>,
}

const DIVERGENCE_RATIO: f64 = 1e6;

/// Diagnoses why the bosonic branch cannot produce a regular family for
/// `state`. Never builds a potential.
pub fn bosonic_feasibility(state: &impl BoundState, probe_c: f64) -> BosonicReport {
    let psi = state.wavefunction();
    let g = psi.grid();
    let h = g.spacing();
    let p = psi.values();
    let n = p.len();
    let inv: Vec<f64> = p.iter().map(|v| 1.0 / (v * v)).collect();
    let integrate = |lo: usize, hi: usize| -> f64 {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += 0.5 * h * (inv[i] + inv[i + 1]);
        }
        acc
    };
    let full = integrate(0, n - 1);
    let trim = n / 10;
    let inner = integrate(trim, n - 1 - trim);
    let growth_ratio = full / inner;
    let divergent = !full.is_finite() || !growth_ratio.is_finite() || growth_ratio > DIVERGENCE_RATIO;

    let floor = 1e-12 * psi.max_abs();
    let margin = grid::DEFAULT_EDGE_MARGIN;
    let mut interior_singularities = Vec::new();
    let mut last: Option<usize> = None;
    for i in margin..n.saturating_sub(margin) {
        if p[i].abs() <= floor {
            continue;
        }
        if let Some(j) = last {
            if p[j].signum() != p[i].signum() {
                let (xj, xi) = (g.point(j), g.point(i));
                interior_singularities.push(xj + (xi - xj) * p[j] / (p[j] - p[i]));
            }
        }
        last = Some(i);
    }

    let mut probe_zero = None;
    let mut acc = 0.0;
    let mut prev = probe_c;
    if prev <= 0.0 {
        probe_zero = Some(g.x_min());
    } else {
        for i in 0..n - 1 {
            acc += 0.5 * h * (inv[i] + inv[i + 1]);
            let cur = probe_c - acc;
            if !cur.is_finite() || cur.signum() != prev.signum() {
                probe_zero = Some(g.point(i + 1));
                break;
            }
            prev = cur;
        }
    }

    BosonicReport {
        level: state.level(),
        probe_c,
        inverse_square_integral: full,
        growth_ratio,
        divergent,
        interior_singularities,
        probe_zero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::BasePotential;
    use crate::grid::count_nodes_default;

    fn osc() -> (BasePotential, Grid) {
        let p = BasePotential::Oscillator;
        let g = p.default_grid();
        (p, g)
    }

    #[test]
    fn deformation_function_oscillator() {
        let (p, g) = osc();
        let s = p.eigenstate(0, &g).unwrap();
        let d = Deformation::new(&p.values(&g), &s, 1.0).unwrap();
        let f = d.deformation_function();
        let mid = g.index_of(0.0).unwrap();
        // ψ_0(0)² = π^{-1/2}, I(0) = 1/2
        let expected = 1.0 / PI.sqrt() / 1.5;
        assert!((f.values()[mid] - expected).abs() < 1e-6);
        assert!((expected - 0.376126).abs() < 1e-6);

        let far = Deformation::new(&p.values(&g), &s, 1e9).unwrap();
        assert!(far.deformation_function().max_abs() <= 1e-9);
        assert!(f.values()[0] < 1e-20 && f.values()[g.len() - 1] < 1e-20);
    }

    #[test]
    fn singular_c_is_rejected() {
        let (p, g) = osc();
        let s = p.eigenstate(0, &g).unwrap();
        for c in [-1.0, -0.5, 0.0, f64::NAN] {
            assert!(matches!(
                Deformation::new(&p.values(&g), &s, c),
                Err(Error::SingularC { .. })
            ));
        }
        assert!(Deformation::new(&p.values(&g), &s, -1.0001).is_ok());
        assert!(Deformation::new(&p.values(&g), &s, 1e-4).is_ok());
    }

    #[test]
    fn scaling_invariance() {
        let (p, g) = osc();
        let s = p.eigenstate(2, &g).unwrap();
        let lambda = 3.7;
        let scaled = DeformedState {
            level: 2,
            energy: s.energy(),
            psi: s.wavefunction().scaled(lambda),
            dpsi: s.derivative().scaled(lambda),
            provenance: Provenance {
                source_level: 2,
                c: 0.0,
                depth: 0,
            },
            missing: false,
        };
        let c = 0.8;
        let a = Deformation::with_raw_constant(&p.values(&g), &s, c).unwrap();
        let b = Deformation::with_raw_constant(&p.values(&g), &scaled, lambda * lambda * c).unwrap();
        let df = a
            .deformation_function()
            .max_abs_diff(&b.deformation_function())
            .unwrap();
        let dv = a.deformed_potential().max_abs_diff(&b.deformed_potential()).unwrap();
        assert!(df <= 1e-10 && dv <= 1e-10, "{df} {dv}");
        let k1 = p.eigenstate(1, &g).unwrap();
        let da = a.map_state(&k1).unwrap();
        let db = b.map_state(&k1).unwrap();
        assert!(da.wavefunction().max_abs_diff(db.wavefunction()).unwrap() <= 1e-10);
        let ma = a.missing_state();
        let mb = b.missing_state();
        assert!(ma.wavefunction().max_abs_diff(mb.wavefunction()).unwrap() <= 1e-10);
    }

    #[test]
    fn large_c_limit() {
        let m = BasePotential::morse(2.0, 1.0, 1.0).unwrap();
        let g = m.default_grid();
        let s = m.eigenstate(0, &g).unwrap();
        let d = Deformation::new(&m.values(&g), &s, 1e6).unwrap();
        for p in [
            BasePotential::Oscillator,
            m,
            BasePotential::square_well(PI).unwrap(),
            BasePotential::Cprs,
        ] {
            let g = p.default_grid();
            let s0 = p.eigenstate(0, &g).unwrap();
            let peak = s0
                .wavefunction()
                .zip_with(s0.derivative(), |a, b| (a * b).abs())
                .unwrap()
                .max_abs();
            for c in [1e6, 1e7] {
                let d = Deformation::new(&p.values(&g), &s0, c).unwrap();
                let dev = d.deformed_potential().max_abs_diff(&d.shifted_potential()).unwrap();
                // leading term of −2f′ is −4ψψ′/C
                assert!(dev <= 8.0 * peak / c, "{} {dev}", p.name());
                if c == 1e7 || matches!(p, BasePotential::Oscillator) {
                    assert!(dev <= 1e-6, "{} {dev}", p.name());
                }
            }
        }
        let miss = d.missing_state();
        assert!(miss.wavefunction().max_abs_diff(s.wavefunction()).unwrap() <= 1e-6);
        let s1 = m.eigenstate(1, &g).unwrap();
        let t1 = d.map_state(&s1).unwrap();
        assert!(t1.wavefunction().max_abs_diff(s1.wavefunction()).unwrap() <= 1e-6);
    }

    #[test]
    fn validity_interval_is_unit() {
        let (p, g) = osc();
        for n in 0..4 {
            let s = p.eigenstate(n, &g).unwrap();
            let v = validity_interval(&s).unwrap();
            assert_eq!(v.forbidden, (-1.0, 0.0));
            assert!((v.raw_forbidden.0 + 1.0).abs() < 1e-6);
        }
        let m = BasePotential::morse(2.0, 1.0, 1.0).unwrap();
        let a = CScale::PaperMorse.affine(&m, 0).unwrap();
        assert_eq!(a.forbidden(), (-3.0, 0.0));
        assert!(CScale::PaperMorse.affine(&m, 1).is_err());
        let w = BasePotential::square_well(2.0).unwrap();
        assert_eq!(CScale::PaperWell.affine(&w, 1).unwrap().forbidden(), (-8.0, 0.0));
        let c = CScale::PaperCprs.affine(&BasePotential::Cprs, 0).unwrap().forbidden();
        assert!((c.0 + PI.sqrt()).abs() < 1e-15 && (c.1 - PI.sqrt()).abs() < 1e-15);
        let o = CScale::PaperOscillator.affine(&p, 0).unwrap().forbidden();
        assert!((o.0 + PI.sqrt() / 2.0).abs() < 1e-15 && (o.1 - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!(CScale::PaperOscillator.affine(&BasePotential::Cprs, 0).is_err());
    }

    #[test]
    fn missing_state_norm_constant() {
        let (p, g) = osc();
        let s = p.eigenstate(0, &g).unwrap();
        let d = Deformation::new(&p.values(&g), &s, 1.0).unwrap();
        assert!((d.missing_state_constant() - 2f64.sqrt()).abs() < 1e-6);
        // N ψ/D is normalized before any grid renormalization
        let raw = GridFunction::new(
            g,
            (0..g.len())
                .map(|i| d.missing_state_constant() * s.wavefunction().values()[i] / d.denominator()[i])
                .collect(),
        )
        .unwrap();
        assert!((grid::norm(&raw) - 1.0).abs() < 1e-6);
        let m = d.missing_state();
        assert!((grid::norm(m.wavefunction()) - 1.0).abs() < 1e-12);
        assert_eq!(m.energy(), 0.0);
        assert!(m.is_missing_state());
    }

    #[test]
    fn map_state_contract() {
        let (p, g) = osc();
        let s0 = p.eigenstate(0, &g).unwrap();
        let d = Deformation::new(&p.values(&g), &s0, 2.0).unwrap();
        assert_eq!(d.map_state(&s0), Err(Error::UseMissingState(0)));
        for k in 1..4 {
            let sk = p.eigenstate(k, &g).unwrap();
            let t = d.map_state(&sk).unwrap();
            assert_eq!(t.level(), k);
            assert_eq!(t.energy(), 2.0 * k as f64);
            assert_eq!(count_nodes_default(t.wavefunction()), k);
            let back = d.inverse_map_state(&t).unwrap();
            assert!(grid::abs_cosine(&back, sk.wavefunction()).unwrap() >= 1.0 - 1e-6);
            // ‖B†Aψ_k‖ = |E_k − E_n|
            let raw = d.intertwine(&sk).unwrap();
            assert!((grid::norm(&raw) - 2.0 * k as f64).abs() < 1e-3);
            // analytic derivative of the mapped state matches differences
            let fd = grid::derivative(t.wavefunction());
            assert!(fd.max_abs_diff(t.derivative()).unwrap() < 1e-5);
        }
        let miss = d.missing_state();
        assert_eq!(d.inverse_map_state(&miss), Err(Error::UseMissingState(0)));
    }

    #[test]
    fn generic_operators_agree_with_closed_forms() {
        let w = BasePotential::square_well(PI).unwrap();
        let g = w.default_grid();
        let s1 = w.eigenstate(1, &g).unwrap();
        let d = Deformation::new(&w.values(&g), &s1, 0.3).unwrap();
        for k in [0usize, 2, 3] {
            let sk = w.eigenstate(k, &g).unwrap();
            let closed = d.intertwine(&sk).unwrap();
            let fd = d.apply_b_dag_a(sk.wavefunction()).unwrap();
            let rel = closed.max_abs_diff(&fd).unwrap() / closed.max_abs();
            assert!(rel < 1e-5, "k={k} {rel}");
            let t = d.map_state(&sk).unwrap();
            let inv = d.inverse_map_state(&t).unwrap().scaled(t.energy());
            let inv_fd = d.apply_a_dag_b(t.wavefunction()).unwrap();
            let rel = inv.max_abs_diff(&inv_fd).unwrap() / inv.max_abs();
            assert!(rel < 1e-5, "inverse k={k} {rel}");
        }
    }

    #[test]
    fn second_order_residual_converges() {
        let (p, _) = osc();
        let coarse = Grid::new(-8.0, 8.0, 1601).unwrap();
        let residual = |g: &Grid| {
            let s = p.eigenstate(0, g).unwrap();
            let d = Deformation::new(&p.values(g), &s, 2.0).unwrap();
            let test = GridFunction::from_fn(*g, |x| (-x * x).exp()).unwrap();
            d.second_order_intertwining_residual(&test).unwrap()
        };
        let r1 = residual(&coarse);
        let r2 = residual(&coarse.refined(2));
        assert!(r1 / r2 >= 3.0, "{r1} {r2}");
        let r_default = residual(&p.default_grid());
        assert!(r_default <= 1e-3, "{r_default}");
    }

    #[test]
    fn composite_ladders() {
        let w = BasePotential::square_well(PI).unwrap();
        let g = w.default_grid();
        let s1 = w.eigenstate(1, &g).unwrap();
        let d = Deformation::new(&w.values(&g), &s1, 0.5).unwrap();
        let t2 = d.map_state(&w.eigenstate(2, &g).unwrap()).unwrap();
        let t3 = d.map_state(&w.eigenstate(3, &g).unwrap()).unwrap();
        let up = d.composite_ladder(&w.ladder(), &t2, Direction::Up).unwrap();
        assert!(grid::abs_cosine(&up, t3.wavefunction()).unwrap() >= 1.0 - 1e-5);
        let down = d.composite_ladder(&w.ladder(), &t3, Direction::Down).unwrap();
        assert!(grid::abs_cosine(&down, t2.wavefunction()).unwrap() >= 1.0 - 1e-5);
        assert_eq!(
            d.composite_ladder(&w.ladder(), &t2, Direction::Down),
            Err(Error::UseMissingState(1))
        );
    }

    #[test]
    fn chain_limits() {
        let (p, g) = osc();
        let out = deform_chain(
            &p,
            &g,
            &[ChainStep::normalized(0, 1e6), ChainStep::normalized(1, 1e6)],
            4,
        )
        .unwrap();
        let x2m3 = GridFunction::from_fn(g, |x| x * x - 3.0).unwrap();
        assert!(out.potential.max_abs_diff(&x2m3).unwrap() <= 1e-5);
        assert_eq!(out.total_shift, 2.0);
        let energies: Vec<f64> = out.states.iter().map(|s| s.energy()).collect();
        assert_eq!(energies, vec![-2.0, 0.0, 2.0, 4.0]);

        let err = deform_chain(
            &p,
            &g,
            &[ChainStep::normalized(0, 1.0), ChainStep::normalized(1, -0.5)],
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ChainStep { index: 1, .. }));
    }

    #[test]
    fn bosonic_diagnostics() {
        let (p, g) = osc();
        let r = bosonic_feasibility(&p.eigenstate(0, &g).unwrap(), 1.0);
        assert!(r.divergent);
        assert!(r.interior_singularities.is_empty());

        let l = 2.0;
        let w = BasePotential::square_well(l).unwrap();
        let g = w.default_grid();
        let r0 = bosonic_feasibility(&w.eigenstate(0, &g).unwrap(), 1.0);
        assert!(r0.divergent && r0.inverse_square_integral.is_infinite());
        let r1 = bosonic_feasibility(&w.eigenstate(1, &g).unwrap(), 1.0);
        assert!(r1.divergent);
        assert_eq!(r1.interior_singularities.len(), 1);
        assert!((r1.interior_singularities[0] - l / 2.0).abs() < g.spacing());

        // a function that is bounded away from zero is inverse-square integrable
        let flat = DeformedState::from_bound(&p.eigenstate(0, &Grid::new(-0.5, 0.5, 101).unwrap()).unwrap()).unwrap();
        let rf = bosonic_feasibility(&flat, 1e6);
        assert!(!rf.divergent);
        assert!(rf.probe_zero.is_none());
    }
}
