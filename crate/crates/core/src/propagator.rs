//! Time stepping of the master equation and the exact propagator of the
//! undriven generator.
//!
//! While the pulse is on, the generator is time dependent and the state is
//! advanced with fixed-step classical RK4 on a two-resolution grid. Once the
//! pulse is gone the generator is constant; [`SuperPropagator`] diagonalizes
//! its 16×16 superoperator so that `exp(Lτ)` and its time integrals are
//! available in closed form, mode by mode.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, cabs, CMatrix, Mat4, C64, ONE, ZERO};
use crate::model::{Generator, PulseSpec, QdParams, State4, PULSE_WINDOW};

/// Upper limit on the number of integration steps of a single grid.
pub const MAX_STEPS: u64 = 100_000_000;

/// Condition number of the eigenvector matrix above which the spectral path
/// is abandoned.
pub const MAX_CONDITION: f64 = 1e12;

/// Length of a time integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn is_finite(&self) -> bool {
        matches!(self, Horizon::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Horizon::Finite(t) => Some(t),
            Horizon::Infinite => None,
        }
    }
}

/// Two-resolution time grid: `dt_pulse` inside `t0 ± window·fwhm`,
/// `dt_free` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt_pulse: f64,
    pub dt_free: f64,
    pub window: f64,
}

pub const DEFAULT_DT_PULSE: f64 = 0.02;
pub const DEFAULT_DT_FREE: f64 = 0.5;

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        TimeGrid {
            t_start,
            t_end,
            dt_pulse: DEFAULT_DT_PULSE,
            dt_free: DEFAULT_DT_FREE,
            window: PULSE_WINDOW,
        }
    }

    pub fn with_steps(mut self, dt_pulse: f64, dt_free: f64) -> Self {
        self.dt_pulse = dt_pulse;
        self.dt_free = dt_free;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start < self.t_end) || !self.t_end.is_finite() || !self.t_start.is_finite() {
            return Err(Error::InvalidParameter { name: "t_end", value: self.t_end });
        }
        if !(self.dt_pulse > 0.0) {
            return Err(Error::InvalidParameter { name: "dt_pulse", value: self.dt_pulse });
        }
        if !(self.dt_free >= self.dt_pulse) || !self.dt_free.is_finite() {
            return Err(Error::InvalidParameter { name: "dt_free", value: self.dt_free });
        }
        if !(self.window > 0.0) {
            return Err(Error::InvalidParameter { name: "window", value: self.window });
        }
        Ok(())
    }

    /// Grid nodes, including both end points. Each segment is split into
    /// equal steps no longer than its nominal step size.
    pub fn nodes(&self, pulse: &PulseSpec) -> Result<Vec<f64>> {
        self.validate()?;
        let (lo, hi) = pulse.support(self.window);
        let a = lo.clamp(self.t_start, self.t_end);
        let b = hi.clamp(self.t_start, self.t_end);
        let segments = [(self.t_start, a, self.dt_free), (a, b, self.dt_pulse), (b, self.t_end, self.dt_free)];

        let counts = segments.map(|(s, e, dt)| if e > s { libm::ceil((e - s) / dt - 1e-9).max(1.0) } else { 0.0 });
        let total: f64 = counts.iter().sum();
        if total > MAX_STEPS as f64 {
            return Err(Error::StepOverflow { steps: total as u64 });
        }

        let mut nodes = Vec::with_capacity(total as usize + 1);
        nodes.push(self.t_start);
        for ((s, e, _), n) in segments.into_iter().zip(counts) {
            let n = n as usize;
            for k in 1..=n {
                nodes.push(if k == n { e } else { s + (e - s) * (k as f64 / n as f64) });
            }
        }
        Ok(nodes)
    }
}

/// One classical RK4 step of `dy/dt = f(t, y)`. Also returns the weighted
/// stage average `(y₁ + 2y₂ + 2y₃ + y₄)/6`, so that `dt·⟨g, avg⟩` is the RK4
/// increment of any linear functional `∫ g(y) dt` carried along.
#[inline]
pub(crate) fn rk4_with_average<F>(f: F, y: &Mat4, t: f64, dt: f64) -> (Mat4, Mat4)
where
    F: Fn(f64, &Mat4) -> Mat4,
{
    let half = 0.5 * dt;
    let k1 = f(t, y);
    let y2 = y.add_scaled(half, &k1);
    let k2 = f(t + half, &y2);
    let y3 = y.add_scaled(half, &k2);
    let k3 = f(t + half, &y3);
    let y4 = y.add_scaled(dt, &k3);
    let k4 = f(t + dt, &y4);
    let mut next = *y;
    let mut avg = Mat4::zero();
    let (a, b) = (dt / 6.0, dt / 3.0);
    for i in 0..4 {
        for j in 0..4 {
            next.0[i][j] += k1.0[i][j] * a + k2.0[i][j] * b + k3.0[i][j] * b + k4.0[i][j] * a;
            avg.0[i][j] = (y.0[i][j] + y4.0[i][j]) * (1.0 / 6.0) + (y2.0[i][j] + y3.0[i][j]) * (1.0 / 3.0);
        }
    }
    (next, avg)
}

/// Drive-aware RK4 step that evaluates the envelope once per distinct time.
#[inline]
pub(crate) fn rk4_driven<F>(gen_apply: F, pulse: &PulseSpec, y: &Mat4, t: f64, dt: f64) -> (Mat4, Mat4)
where
    F: Fn((f64, f64), &Mat4) -> Mat4,
{
    let d0 = Generator::drive(pulse, t);
    let dh = Generator::drive(pulse, t + 0.5 * dt);
    let d1 = Generator::drive(pulse, t + dt);
    rk4_with_average(
        |s, m| {
            let d = if s == t { d0 } else if s == t + dt { d1 } else { dh };
            gen_apply(d, m)
        },
        y,
        t,
        dt,
    )
}

/// One RK4 step of the master equation.
pub fn step_rk4(p: &QdParams, pulse: &PulseSpec, rho: &State4, t: f64, dt: f64) -> State4 {
    let gen = Generator::new(p);
    State4(rk4_driven(|d, m| gen.apply_with_drive(d, m), pulse, &rho.0, t, dt).0)
}

/// Sampled solution of the master equation on a [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State4>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &State4 {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// State at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> &State4 {
        let i = self.times.partition_point(|&s| s < t);
        let idx = if i == 0 {
            0
        } else if i >= self.times.len() {
            self.times.len() - 1
        } else if t - self.times[i - 1] <= self.times[i] - t {
            i - 1
        } else {
            i
        };
        &self.states[idx]
    }
}

pub(crate) fn evolve_nodes(gen: &Generator, pulse: &PulseSpec, rho0: &Mat4, nodes: &[f64]) -> Vec<State4> {
    let mut states = Vec::with_capacity(nodes.len());
    let mut rho = *rho0;
    states.push(State4(rho));
    for w in nodes.windows(2) {
        rho = rk4_driven(|d, m| gen.apply_with_drive(d, m), pulse, &rho, w[0], w[1] - w[0]).0;
        states.push(State4(rho));
    }
    states
}

/// Integrates the master equation from `rho0` across `grid`.
pub fn evolve(p: &QdParams, pulse: &PulseSpec, rho0: &State4, grid: &TimeGrid) -> Result<Trajectory> {
    p.validate()?;
    pulse.validate()?;
    let nodes = grid.nodes(pulse)?;
    let gen = Generator::new(p);
    let states = evolve_nodes(&gen, pulse, &rho0.0, &nodes);
    Ok(Trajectory { times: nodes, states })
}

/// Superoperator of the undriven generator, row-major vectorization:
/// column `4i + j` is `vec(L(|i⟩⟨j|))`.
pub fn free_superoperator(p: &QdParams) -> CMatrix {
    let gen = Generator::new(p);
    let mut l = CMatrix::zeros(16);
    for i in 0..4 {
        for j in 0..4 {
            let col = gen.apply_with_drive((0.0, 0.0), &Mat4::unit(i, j)).to_vec16();
            for (r, v) in col.iter().enumerate() {
                l[(r, 4 * i + j)] = *v;
            }
        }
    }
    l
}

/// Row vector `w̃` with `w̃ · vec(ρ) = Tr[W ρ]`.
pub(crate) fn trace_row(w: &Mat4) -> [C64; 16] {
    w.transpose().to_vec16()
}

/// Spectral decomposition of the constant post-pulse generator.
#[derive(Debug, Clone)]
pub struct SuperPropagator {
    generator: CMatrix,
    eigenvalues: Vec<C64>,
    right: CMatrix,
    left: CMatrix,
    condition: f64,
    diagonalizable: bool,
}

impl SuperPropagator {
    pub fn new(p: &QdParams) -> Result<Self> {
        p.validate()?;
        Self::from_generator(free_superoperator(p))
    }

    /// Decomposes an arbitrary superoperator. An ill-conditioned eigenbasis
    /// is not an error: the propagator then falls back to scaling and
    /// squaring and reports `is_diagonalizable() == false`.
    pub fn from_generator(generator: CMatrix) -> Result<Self> {
        let n = generator.dim();
        let eigen = linalg::eig(&generator)?;
        let (left, condition) = match eigen.vectors.inverse() {
            Ok(inv) => {
                let cond = eigen.vectors.norm1() * inv.norm1();
                (inv, cond)
            }
            Err(_) => (CMatrix::identity(n), f64::INFINITY),
        };
        let diagonalizable = condition.is_finite() && condition <= MAX_CONDITION;
        Ok(SuperPropagator {
            generator,
            eigenvalues: eigen.values,
            right: eigen.vectors,
            left,
            condition,
            diagonalizable,
        })
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.diagonalizable
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    /// `max |V diag(λ) V⁻¹ − L|`.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.generator.dim();
        let d = CMatrix::from_fn(n, |i, j| if i == j { self.eigenvalues[i] } else { ZERO });
        self.right.matmul(&d).matmul(&self.left).sub(&self.generator).max_abs()
    }

    /// The 16×16 matrix `exp(Lτ)`.
    pub fn exp_matrix(&self, tau: f64) -> CMatrix {
        if self.diagonalizable {
            let n = self.generator.dim();
            let d = CMatrix::from_fn(n, |i, j| if i == j { linalg::cexp(self.eigenvalues[i] * tau) } else { ZERO });
            self.right.matmul(&d).matmul(&self.left)
        } else {
            self.generator.scale(C64::new(tau, 0.0)).expm()
        }
    }

    /// `exp(Lτ) ρ`.
    pub fn propagate(&self, tau: f64, rho: &Mat4) -> Mat4 {
        let v = rho.to_vec16();
        if self.diagonalizable {
            let coeffs = self.left.mul_vec(&v);
            let scaled: Vec<C64> =
                coeffs.iter().zip(&self.eigenvalues).map(|(c, l)| c * linalg::cexp(l * tau)).collect();
            Mat4::from_vec16(&self.right.mul_vec(&scaled))
        } else {
            Mat4::from_vec16(&self.exp_matrix(tau).mul_vec(&v))
        }
    }

    fn is_stationary(lambda: C64) -> bool {
        lambda.re > -1e-12
    }

    /// Weight of mode `k` in `∫ e^{λτ} dτ` over the horizon.
    fn mode_integral(lambda: C64, horizon: Horizon) -> Option<C64> {
        match horizon {
            Horizon::Finite(t) => Some(linalg::expm1_over(lambda * t) * t),
            Horizon::Infinite if Self::is_stationary(lambda) => None,
            Horizon::Infinite => Some(-ONE / lambda),
        }
    }

    /// Slowest strictly decaying rate, used to truncate unbounded integrals
    /// on the fallback path.
    fn slowest_decay(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|l| !Self::is_stationary(**l))
            .map(|l| -l.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// `∫₀^T exp(Lσ) dσ` from the augmented-matrix exponential.
    fn integrated_matrix_fallback(&self, t: f64) -> CMatrix {
        let n = self.generator.dim();
        let mut aug = CMatrix::zeros(2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self.generator[(i, j)] * t;
            }
            aug[(i, n + i)] = C64::new(t, 0.0);
        }
        let e = aug.expm();
        CMatrix::from_fn(n, |i, j| e[(i, n + j)])
    }

    /// Operator `F` with `Tr[F χ] = ∫₀^T Tr[W exp(Lτ) χ] dτ` for every `χ`.
    pub fn integrated_functional(&self, w: &Mat4, horizon: Horizon) -> Result<Mat4> {
        let wt = trace_row(w);
        let n = self.generator.dim();
        let mut f = [ZERO; 16];
        if self.diagonalizable {
            for k in 0..n {
                let wk: C64 = (0..n).map(|r| wt[r] * self.right[(r, k)]).sum();
                if cabs(wk) == 0.0 {
                    continue;
                }
                let phi = match Self::mode_integral(self.eigenvalues[k], horizon) {
                    Some(phi) => phi,
                    None => {
                        let row_norm = libm::sqrt((0..n).map(|j| self.left[(k, j)].norm_sqr()).sum::<f64>());
                        let weight = cabs(wk) * row_norm;
                        if weight > 1e-10 {
                            return Err(Error::DivergentIntegral { weight });
                        }
                        continue;
                    }
                };
                let s = wk * phi;
                for (j, fj) in f.iter_mut().enumerate() {
                    *fj += s * self.left[(k, j)];
                }
            }
        } else {
            let t = match horizon {
                Horizon::Finite(t) => t,
                Horizon::Infinite => 40.0 / self.slowest_decay(),
            };
            let row = self.integrated_matrix_fallback(t).vec_mul(&wt);
            f.copy_from_slice(&row);
        }
        Ok(Mat4::from_vec16(&f).transpose())
    }

    /// `∫₀^T Tr[W exp(Lτ) χ₀] dτ`.
    pub fn integrated_observable(&self, w: &Mat4, chi0: &Mat4, horizon: Horizon) -> Result<C64> {
        if horizon == Horizon::Finite(0.0) {
            return Ok(ZERO);
        }
        if !self.diagonalizable {
            return Ok(self.integrated_functional(w, horizon)?.trace_product(chi0));
        }
        let wt = trace_row(w);
        let coeffs = self.left.mul_vec(&chi0.to_vec16());
        let n = self.generator.dim();
        let mut acc = ZERO;
        for k in 0..n {
            let wk: C64 = (0..n).map(|r| wt[r] * self.right[(r, k)]).sum();
            let weight = wk * coeffs[k];
            match Self::mode_integral(self.eigenvalues[k], horizon) {
                Some(phi) => acc += weight * phi,
                None if cabs(weight) > 1e-10 => {
                    return Err(Error::DivergentIntegral { weight: cabs(weight) });
                }
                None => {}
            }
        }
        Ok(acc)
    }
}

/// `exp(Lτ)` of the undriven generator as a linear map on density matrices.
#[derive(Debug, Clone)]
pub struct FreeMap {
    matrix: CMatrix,
    /// True when the eigenbasis was too ill-conditioned and the map came
    /// from scaling and squaring instead.
    pub fallback: bool,
}

impl FreeMap {
    pub fn apply(&self, rho: &Mat4) -> Mat4 {
        Mat4::from_vec16(&self.matrix.mul_vec(&rho.to_vec16()))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

pub fn free_propagator(p: &QdParams, tau: f64) -> Result<FreeMap> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter { name: "tau", value: tau });
    }
    let sp = SuperPropagator::new(p)?;
    Ok(FreeMap { matrix: sp.exp_matrix(tau), fallback: !sp.is_diagonalizable() })
}

/// `∫₀^T Tr[W exp(Lτ) χ₀] dτ` for the undriven generator of `p`.
pub fn integrated_free_observable(p: &QdParams, w: &Mat4, chi0: &Mat4, horizon: Horizon) -> Result<C64> {
    SuperPropagator::new(p)?.integrated_observable(w, chi0, horizon)
}
