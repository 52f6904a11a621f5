//! Time-integrated two-photon polarization density matrix.
//!
//! Detecting a biexciton photon with polarization `j` at time `t` projects
//! the emitter onto `ρ_BB(t)·|X_j⟩⟨X_j|`; coherences between the two decay
//! paths enter through the conditional operators `E_lj = |X_l⟩⟨X_j|`. The
//! exciton photon emitted a delay `τ` later is read out with
//! `W_km = |X_k⟩⟨X_m|`. The matrix element in the photon basis
//! `(HH, HV, VH, VV)` (biexciton photon first) is
//!
//! ```text
//! ρ̄[(j,k),(l,m)] = ∫dt ρ_BB(t) ∫dτ Tr[W_km · Λ_{t→t+τ}(E_lj)]
//! ```
//!
//! with `Λ` the propagator of the master equation, driven for as long as
//! the pulse lasts. Only three seeds are independent: `E_jl = E_lj†`, so the
//! `VH` column is the conjugate of the `HV` one.
//!
//! Two routes are provided. [`Method::SpectralFast`] integrates the
//! Heisenberg-picture functional `F(t) = ∫dτ Λ†_{t→t+τ}(W)` backwards
//! through the pulse and closes every post-pulse integral with the
//! spectral decomposition of the free generator. [`Method::BruteForce`]
//! propagates every seed forward by RK4 and sums the free tail by stepping
//! as well, with no eigen-decomposition anywhere.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{eigh4, CMatrix, Mat4, C64, ZERO};
use crate::model::{Generator, PulseSpec, QdParams, PULSE_WINDOW};
use crate::propagator::{
    evolve_nodes, rk4_driven, rk4_with_average, trace_row, Horizon, SuperPropagator, TimeGrid, DEFAULT_DT_FREE,
    DEFAULT_DT_PULSE,
};

/// Real-time horizon after the pulse window in the default configuration
/// (ps); eight biexciton lifetimes for the default rates.
pub const DEFAULT_TAIL: f64 = 800.0;

/// Largest change of a normalized element tolerated when `t_max` doubles.
pub const CONVERGENCE_TOL: f64 = 1e-4;

/// Free-decay horizon of the stepping route, in units of the slowest
/// lifetime.
pub const STEPPING_LIFETIMES: f64 = 20.0;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;

/// Two-photon polarization basis, biexciton photon first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhotonPair {
    HH = 0,
    HV = 1,
    VH = 2,
    VV = 3,
}

impl PhotonPair {
    pub const ALL: [PhotonPair; 4] = [PhotonPair::HH, PhotonPair::HV, PhotonPair::VH, PhotonPair::VV];

    pub const fn idx(self) -> usize {
        self as usize
    }

    pub const fn label(self) -> &'static str {
        match self {
            PhotonPair::HH => "HH",
            PhotonPair::HV => "HV",
            PhotonPair::VH => "VH",
            PhotonPair::VV => "VV",
        }
    }
}

/// 4×4 density matrix over `(HH, HV, VH, VV)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonMatrix {
    entries: Mat4,
    normalized: bool,
}

impl TwoPhotonMatrix {
    /// Unnormalized correlator matrix.
    pub fn raw(entries: Mat4) -> Self {
        TwoPhotonMatrix { entries, normalized: false }
    }

    /// Marks `entries` as a normalized density matrix without checking;
    /// [`TwoPhotonMatrix::validate_normalized`] does the checking.
    pub fn from_normalized(entries: Mat4) -> Self {
        TwoPhotonMatrix { entries, normalized: true }
    }

    pub fn entries(&self) -> &Mat4 {
        &self.entries
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn element(&self, row: PhotonPair, col: PhotonPair) -> C64 {
        self.entries.0[row.idx()][col.idx()]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Divides by the trace.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr.abs() > f64::MIN_POSITIVE) || !tr.is_finite() {
            return Err(Error::NotADensityMatrix { reason: "vanishing trace" });
        }
        Ok(TwoPhotonMatrix { entries: self.entries.scale_re(1.0 / tr), normalized: true })
    }

    /// `U ρ U†` for a two-photon unitary `U`.
    pub fn transformed(&self, u: &Mat4) -> Self {
        TwoPhotonMatrix { entries: self.entries.conjugate_by(u), normalized: self.normalized }
    }

    pub fn off_x_leakage(&self) -> f64 {
        crate::entanglement::off_x_leakage(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigh4(&self.entries).0[0]
    }

    /// Hermitian, unit trace and positive within tolerance.
    pub fn validate_normalized(&self) -> Result<()> {
        if !self.normalized {
            return Err(Error::NotADensityMatrix { reason: "matrix is not normalized" });
        }
        if self.entries.hermiticity_error() > HERMITIAN_TOL {
            return Err(Error::NotADensityMatrix { reason: "not Hermitian" });
        }
        let tr = self.entries.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotADensityMatrix { reason: "trace differs from one" });
        }
        if self.min_eigenvalue() < -PSD_TOL {
            return Err(Error::NotADensityMatrix { reason: "negative eigenvalue" });
        }
        Ok(())
    }

    /// Positive semidefinite within tolerance relative to the trace.
    pub fn validate_raw(&self) -> Result<()> {
        let tr = self.trace().abs();
        if self.entries.hermiticity_error() > HERMITIAN_TOL * tr.max(1.0) {
            return Err(Error::NotADensityMatrix { reason: "not Hermitian" });
        }
        if self.min_eigenvalue() < -PSD_TOL * tr {
            return Err(Error::NotADensityMatrix { reason: "negative eigenvalue" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    SpectralFast,
    BruteForce,
}

impl Method {
    pub const fn label(self) -> &'static str {
        match self {
            Method::SpectralFast => "spectral",
            Method::BruteForce => "brute-force",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TomographyConfig {
    /// Real-time horizon. `None` selects `t0 + 3·fwhm + 800 ps` for pulsed
    /// excitation and an unbounded horizon for a prepared biexciton.
    pub t_max: Option<Horizon>,
    /// Delay-time window.
    pub tau_max: Horizon,
    pub dt_pulse: f64,
    pub dt_free: f64,
    /// Half-width of the pulse window in units of FWHM.
    pub window: f64,
    pub method: Method,
    /// Recompute the real-time tail with `2·t_max` and fail if the
    /// normalized matrix moves by more than [`CONVERGENCE_TOL`]. Only the
    /// spectral route performs the check.
    pub check_convergence: bool,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            t_max: None,
            tau_max: Horizon::Infinite,
            dt_pulse: DEFAULT_DT_PULSE,
            dt_free: DEFAULT_DT_FREE,
            window: PULSE_WINDOW,
            method: Method::SpectralFast,
            check_convergence: true,
        }
    }
}

impl TomographyConfig {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_tau_max(mut self, tau_max: Horizon) -> Self {
        self.tau_max = tau_max;
        self
    }

    pub fn with_t_max(mut self, t_max: Horizon) -> Self {
        self.t_max = Some(t_max);
        self
    }

    pub fn with_dt_pulse(mut self, dt_pulse: f64) -> Self {
        self.dt_pulse = dt_pulse;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_pulse > 0.0 && self.dt_pulse.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt_pulse", value: self.dt_pulse });
        }
        if !(self.dt_free >= self.dt_pulse && self.dt_free.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt_free", value: self.dt_free });
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::InvalidParameter { name: "window", value: self.window });
        }
        if let Horizon::Finite(t) = self.tau_max {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter { name: "tau_max", value: t });
            }
        }
        if let Some(Horizon::Finite(t)) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter { name: "t_max", value: t });
            }
        }
        Ok(())
    }

    /// Real-time horizon for pulsed excitation.
    pub fn resolved_t_max(&self, pulse: &PulseSpec) -> Horizon {
        self.t_max.unwrap_or(Horizon::Finite(pulse.support(self.window).1 + DEFAULT_TAIL))
    }
}

/// Photons emitted by the biexciton and exciton transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairYield {
    pub biexciton: f64,
    pub exciton: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TomographyOutput {
    pub raw: TwoPhotonMatrix,
    pub normalized: TwoPhotonMatrix,
    pub yields: PairYield,
    /// Largest normalized change when `t_max` doubles, where computed.
    pub t_max_change: Option<f64>,
}

/// `table[2k+m][2l+j] = ∫dt ρ_BB ∫dτ Tr[W_km Λ(E_lj)]`.
type Table = [[C64; 4]; 4];

fn exciton(pol: usize) -> usize {
    1 + pol
}

/// `W_km = |X_k⟩⟨X_m|`.
fn observable(o: usize) -> Mat4 {
    Mat4::unit(exciton(o / 2), exciton(o % 2))
}

const B: usize = 3;

/// Independent observables `HH, HV, VV`; `VH` is the adjoint of `HV`.
const OBS3: [usize; 3] = [0, 1, 3];

fn expand_observables(f: &[Mat4; 3]) -> [Mat4; 4] {
    [f[0], f[1], f[1].adjoint(), f[2]]
}

/// Table from the Heisenberg functionals: `Tr[F_o E_lj] = F_o[j][l]`.
fn table_from_functionals(f: &[Mat4; 3]) -> Table {
    let full = expand_observables(f);
    let mut t = [[ZERO; 4]; 4];
    for (o, fo) in full.iter().enumerate() {
        for l in 0..2 {
            for j in 0..2 {
                t[o][2 * l + j] = fo.0[exciton(j)][exciton(l)];
            }
        }
    }
    t
}

/// Seeds `HH, HV, VV` as `(l, j)`; the `VH` column follows by conjugation.
const SEEDS3: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];

/// Fills the `VH` seed column from `Tr[W_km Λ(E_VH)] = conj Tr[W_mk Λ(E_HV)]`.
fn complete_seed_columns(t: &mut Table) {
    for k in 0..2 {
        for m in 0..2 {
            t[2 * k + m][2] = t[2 * m + k][1].conj();
        }
    }
}

fn table_add(acc: &mut Table, s: f64, t: &Table) {
    for (ra, rt) in acc.iter_mut().zip(t) {
        for (a, b) in ra.iter_mut().zip(rt) {
            *a += b * s;
        }
    }
}

fn table_to_raw(t: &Table) -> Mat4 {
    let mut raw = Mat4::zero();
    for j in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                for m in 0..2 {
                    raw.0[2 * j + k][2 * l + m] = t[2 * k + m][2 * l + j];
                }
            }
        }
    }
    raw
}

/// Composite Simpson weights on every run of equally spaced nodes, with a
/// 3/8-rule tail for odd interval counts.
pub(crate) fn quadrature_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    let mut start = 0;
    while start + 1 < n {
        let h = nodes[start + 1] - nodes[start];
        let mut end = start + 1;
        while end + 1 < n && ((nodes[end + 1] - nodes[end]) - h).abs() <= 1e-9 * h.abs() {
            end += 1;
        }
        add_uniform_weights(&mut w[start..=end], h);
        start = end;
    }
    w
}

fn add_uniform_weights(w: &mut [f64], h: f64) {
    let m = w.len() - 1;
    let simpson = |w: &mut [f64]| {
        let k = w.len() - 1;
        for (i, wi) in w.iter_mut().enumerate() {
            let c = if i == 0 || i == k {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            *wi += c * h / 3.0;
        }
    };
    let three_eighths = |w: &mut [f64]| {
        for (i, c) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
            w[i] += 3.0 * h / 8.0 * c;
        }
    };
    match m {
        1 => {
            w[0] += 0.5 * h;
            w[1] += 0.5 * h;
        }
        3 => three_eighths(w),
        _ if m.is_multiple_of(2) => simpson(w),
        _ => {
            simpson(&mut w[..=m - 3]);
            three_eighths(&mut w[m - 3..]);
        }
    }
}

/// Trajectory from the ground state at `t = 0` with a uniform fine grid
/// across the pulse window.
struct Driven {
    nodes: Vec<f64>,
    states: Vec<Mat4>,
    weights: Vec<f64>,
    /// Index of the node at the end of the pulse window.
    end_of_pulse: usize,
}

fn drive_trajectory(gen: &Generator, pulse: &PulseSpec, cfg: &TomographyConfig, t_end: f64) -> Result<Driven> {
    let b = pulse.support(cfg.window).1;
    let grid = TimeGrid { t_start: 0.0, t_end, dt_pulse: cfg.dt_pulse, dt_free: cfg.dt_free, window: cfg.window };
    let nodes = grid.nodes(pulse)?;
    let states = evolve_nodes(gen, pulse, &Mat4::unit(0, 0), &nodes).into_iter().map(|s| s.0).collect();
    let weights = quadrature_weights(&nodes);
    let end_of_pulse = nodes.iter().rposition(|&t| t <= b).unwrap_or(0);
    Ok(Driven { nodes, states, weights, end_of_pulse })
}

fn exciton_population(rho: &Mat4) -> f64 {
    rho.0[1][1].re + rho.0[2][2].re
}

/// Weighted sums `Σ w ρ_BB` and `Σ w (ρ_XH + ρ_XV)` over `range`.
fn population_integrals(d: &Driven, range: core::ops::RangeInclusive<usize>) -> (f64, f64) {
    let mut bb = 0.0;
    let mut xx = 0.0;
    for i in range {
        bb += d.weights[i] * d.states[i].0[B][B].re;
        xx += d.weights[i] * exciton_population(&d.states[i]);
    }
    (bb, xx)
}

fn check_pulse_end(pulse: &PulseSpec, cfg: &TomographyConfig, t_max: Horizon) -> Result<f64> {
    let b = pulse.support(cfg.window).1;
    if !(b > 0.0) {
        return Err(Error::InvalidParameter { name: "t0", value: pulse.t0 });
    }
    if let Horizon::Finite(t) = t_max {
        if t < b {
            return Err(Error::InvalidParameter { name: "t_max", value: t });
        }
    }
    Ok(b)
}

fn tail_horizon(t_max: Horizon, b: f64) -> Horizon {
    match t_max {
        Horizon::Finite(t) => Horizon::Finite(t - b),
        Horizon::Infinite => Horizon::Infinite,
    }
}

/// Pulse-window part of the table for an unbounded delay window: `F(t)`
/// obeys `dF/dt = -W - L_t†(F)` and equals the free functional at the end
/// of the pulse.
fn adjoint_in_pulse(gen: &Generator, pulse: &PulseSpec, d: &Driven, f_free: &[Mat4; 3]) -> Table {
    let ws = OBS3.map(observable);
    let mut f = *f_free;
    let mut acc = [Mat4::zero(); 3];
    for i in (0..=d.end_of_pulse).rev() {
        let c = d.weights[i] * d.states[i].0[B][B].re;
        for s in 0..3 {
            acc[s] = acc[s].add_scaled(c, &f[s]);
        }
        if i > 0 {
            let (t, dt) = (d.nodes[i], d.nodes[i - 1] - d.nodes[i]);
            for s in 0..3 {
                let w = ws[s];
                f[s] = rk4_driven(|dr, m| -gen.adjoint_apply_with_drive(dr, m) - w, pulse, &f[s], t, dt).0;
            }
        }
    }
    table_from_functionals(&acc)
}

/// Pulse-window part of the table by forward propagation of each seed from
/// each node. Seeds are stepped along the grid up to `min(t + τ_max, b)`;
/// `close(χ(b), remaining)` returns `∫Tr[W_o e^{Lσ} χ(b)]` over the rest of
/// the delay window for all four observables.
fn forward_in_pulse<C>(gen: &Generator, pulse: &PulseSpec, d: &Driven, tau_max: Horizon, mut close: C) -> Result<Table>
where
    C: FnMut(&Mat4, Horizon) -> Result<[C64; 4]>,
{
    let b = d.nodes[d.end_of_pulse];
    let mut acc = [[ZERO; 4]; 4];
    for i in 0..=d.end_of_pulse {
        let c = d.weights[i] * d.states[i].0[B][B].re;
        if c == 0.0 {
            continue;
        }
        let t_i = d.nodes[i];
        let end = match tau_max {
            Horizon::Finite(tau) => (t_i + tau).min(b),
            Horizon::Infinite => b,
        };
        let mut node = [[ZERO; 4]; 4];
        for (l, j) in SEEDS3 {
            let mut chi = Mat4::unit(exciton(l), exciton(j));
            let mut integral = Mat4::zero();
            let (mut t, mut idx) = (t_i, i);
            while t < end {
                let next = d.nodes[idx + 1].min(end);
                let (y, avg) = rk4_driven(|dr, m| gen.apply_with_drive(dr, m), pulse, &chi, t, next - t);
                integral = integral.add_scaled(next - t, &avg);
                chi = y;
                if next == d.nodes[idx + 1] {
                    idx += 1;
                }
                t = next;
            }
            let remaining = match tau_max {
                Horizon::Finite(tau) => Horizon::Finite((tau - (end - t_i)).max(0.0)),
                Horizon::Infinite => Horizon::Infinite,
            };
            let closure = if remaining == Horizon::Finite(0.0) { [ZERO; 4] } else { close(&chi, remaining)? };
            let seed = 2 * l + j;
            for o in 0..4 {
                let (k, m) = (o / 2, o % 2);
                node[o][seed] = integral.0[exciton(m)][exciton(k)] + closure[o];
            }
        }
        complete_seed_columns(&mut node);
        table_add(&mut acc, c, &node);
    }
    Ok(acc)
}

fn assemble(table: &Table, yields: PairYield, t_max_change: Option<f64>) -> Result<TomographyOutput> {
    let raw = TwoPhotonMatrix::raw(table_to_raw(table));
    let normalized = raw.normalize()?;
    Ok(TomographyOutput { raw, normalized, yields, t_max_change })
}

/// Tomography of the photon pair emitted after pulsed two-photon excitation
/// of the ground state at `t = 0`.
pub fn analyze(p: &QdParams, pulse: &PulseSpec, cfg: &TomographyConfig) -> Result<TomographyOutput> {
    p.validate()?;
    pulse.validate()?;
    cfg.validate()?;
    match cfg.method {
        Method::SpectralFast => analyze_spectral(p, pulse, cfg),
        Method::BruteForce => analyze_stepping(p, pulse, cfg),
    }
}

fn analyze_spectral(p: &QdParams, pulse: &PulseSpec, cfg: &TomographyConfig) -> Result<TomographyOutput> {
    let t_max = cfg.resolved_t_max(pulse);
    let b = check_pulse_end(pulse, cfg, t_max)?;
    let gen = Generator::new(p);
    let sp = SuperPropagator::new(p)?;
    let d = drive_trajectory(&gen, pulse, cfg, b)?;
    let rho_b = d.states[d.end_of_pulse];

    let mut f_free = [Mat4::zero(); 3];
    for (f, o) in f_free.iter_mut().zip(OBS3) {
        *f = sp.integrated_functional(&observable(o), cfg.tau_max)?;
    }
    let in_pulse = match cfg.tau_max {
        Horizon::Infinite => adjoint_in_pulse(&gen, pulse, &d, &f_free),
        Horizon::Finite(_) => forward_in_pulse(&gen, pulse, &d, cfg.tau_max, |chi, rest| {
            let mut out = [ZERO; 4];
            for (o, v) in out.iter_mut().enumerate() {
                *v = sp.integrated_functional(&observable(o), rest)?.trace_product(chi);
            }
            Ok(out)
        })?,
    };
    let k_free = table_from_functionals(&f_free);

    let p_b = Mat4::unit(B, B);
    let p_x = Mat4::unit(1, 1) + Mat4::unit(2, 2);
    let tail = |h: Horizon| -> Result<(f64, f64)> {
        Ok((sp.integrated_observable(&p_b, &rho_b, h)?.re, sp.integrated_observable(&p_x, &rho_b, h)?.re))
    };
    let (bb_pulse, xx_pulse) = population_integrals(&d, 0..=d.end_of_pulse);
    let (bb_tail, xx_tail) = tail(tail_horizon(t_max, b))?;

    let mut table = in_pulse;
    table_add(&mut table, bb_tail, &k_free);
    let yields = PairYield { biexciton: p.gamma_b * (bb_pulse + bb_tail), exciton: p.gamma_x * (xx_pulse + xx_tail) };

    let mut t_max_change = None;
    if let (true, Horizon::Finite(t)) = (cfg.check_convergence, t_max) {
        let (bb_long, _) = tail(Horizon::Finite(2.0 * t - b))?;
        let mut long = in_pulse;
        table_add(&mut long, bb_long, &k_free);
        let a = TwoPhotonMatrix::raw(table_to_raw(&table)).normalize()?;
        let z = TwoPhotonMatrix::raw(table_to_raw(&long)).normalize()?;
        let change = a.entries().max_abs_diff(z.entries());
        if change > CONVERGENCE_TOL {
            return Err(Error::NonConvergence { max_change: change });
        }
        t_max_change = Some(change);
    }
    assemble(&table, yields, t_max_change)
}

/// One RK4 step of the undriven generator as superoperators: the state map
/// `M` and the stage-average map `P` (so the step's quadrature of any
/// linear functional is `h·Tr[W·P(χ)]`).
fn free_step_maps(gen: &Generator, h: f64) -> (CMatrix, CMatrix) {
    let mut m = CMatrix::zeros(16);
    let mut pm = CMatrix::zeros(16);
    for col in 0..16 {
        let e = Mat4::unit(col / 4, col % 4);
        let (y, avg) = rk4_with_average(|_, x| gen.apply_with_drive((0.0, 0.0), x), &e, 0.0, h);
        for (r, (yv, av)) in y.to_vec16().iter().zip(avg.to_vec16().iter()).enumerate() {
            m[(r, col)] = *yv;
            pm[(r, col)] = *av;
        }
    }
    (m, pm)
}

/// RK4 quadrature of the free decay, `Tr[Ŵ χ] ≈ ∫₀^T Tr[W e^{Lσ} χ] dσ`,
/// accumulated in the Heisenberg picture step by step.
struct FreeStepper {
    gen: Generator,
    h: f64,
    m: CMatrix,
    p: CMatrix,
}

impl FreeStepper {
    fn new(p: &QdParams, h: f64) -> Self {
        let gen = Generator::new(p);
        let (m, pm) = free_step_maps(&gen, h);
        FreeStepper { gen, h, m, p: pm }
    }

    fn functional(&self, w: &Mat4, horizon: f64) -> Mat4 {
        let full = libm::floor(horizon / self.h + 1e-9).max(0.0) as usize;
        let partial = horizon - full as f64 * self.h;
        let wt = trace_row(w);
        let mut a = self.p.vec_mul(&wt);
        let mut sum = [ZERO; 16];
        for _ in 0..full {
            for (s, x) in sum.iter_mut().zip(&a) {
                *s += x * self.h;
            }
            a = self.m.vec_mul(&a);
        }
        if partial > 1e-12 * self.h {
            // Tr[W P' M^N χ]: apply P' to the row first, then the N full steps.
            let (_, p_short) = free_step_maps(&self.gen, partial);
            let mut row = p_short.vec_mul(&wt);
            for _ in 0..full {
                row = self.m.vec_mul(&row);
            }
            for (s, x) in sum.iter_mut().zip(&row) {
                *s += x * partial;
            }
        }
        Mat4::from_vec16(&sum).transpose()
    }
}

fn stepping_horizon(p: &QdParams) -> Result<f64> {
    let slowest = p.gamma_x.min(p.gamma_b);
    if !(slowest > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma", value: slowest });
    }
    Ok(STEPPING_LIFETIMES / slowest)
}

fn analyze_stepping(p: &QdParams, pulse: &PulseSpec, cfg: &TomographyConfig) -> Result<TomographyOutput> {
    let t_max = match cfg.resolved_t_max(pulse) {
        Horizon::Finite(t) => t,
        Horizon::Infinite => pulse.support(cfg.window).1 + stepping_horizon(p)?,
    };
    check_pulse_end(pulse, cfg, Horizon::Finite(t_max))?;
    let gen = Generator::new(p);
    let d = drive_trajectory(&gen, pulse, cfg, t_max)?;
    let stepper = FreeStepper::new(p, cfg.dt_free);
    let free_horizon = match cfg.tau_max {
        Horizon::Finite(tau) => tau,
        Horizon::Infinite => stepping_horizon(p)?,
    };
    let k_obs = OBS3.map(|o| stepper.functional(&observable(o), free_horizon));
    let k_full = expand_observables(&k_obs);

    let mut table = forward_in_pulse(&gen, pulse, &d, cfg.tau_max, |chi, rest| {
        let mut out = [ZERO; 4];
        match rest {
            Horizon::Infinite => {
                for (o, v) in out.iter_mut().enumerate() {
                    *v = k_full[o].trace_product(chi);
                }
            }
            Horizon::Finite(r) => {
                for (o, v) in out.iter_mut().enumerate() {
                    *v = stepper.functional(&observable(o), r).trace_product(chi);
                }
            }
        }
        Ok(out)
    })?;
    // The node at the end of the pulse was already counted by the forward
    // sweep; after it the delay integral no longer depends on `t`.
    let k_table = table_from_functionals(&k_obs);
    let last = d.nodes.len() - 1;
    let mut bb_after = 0.0;
    for i in d.end_of_pulse + 1..=last {
        bb_after += d.weights[i] * d.states[i].0[B][B].re;
    }
    table_add(&mut table, bb_after, &k_table);

    let (bb, xx) = population_integrals(&d, 0..=last);
    let yields = PairYield { biexciton: p.gamma_b * bb, exciton: p.gamma_x * xx };
    assemble(&table, yields, None)
}

/// Normalized two-photon density matrix after pulsed excitation.
pub fn two_photon_density_matrix(p: &QdParams, pulse: &PulseSpec, cfg: &TomographyConfig) -> Result<TwoPhotonMatrix> {
    Ok(analyze(p, pulse, cfg)?.normalized)
}

/// Tomography of the cascade from a prepared biexciton with no drive. Both
/// time integrals are closed spectrally, whatever `cfg.method` says.
pub fn analyze_initial_value(p: &QdParams, cfg: &TomographyConfig) -> Result<TomographyOutput> {
    p.validate()?;
    cfg.validate()?;
    let sp = SuperPropagator::new(p)?;
    let rho0 = Mat4::unit(B, B);
    let t_max = cfg.t_max.unwrap_or(Horizon::Infinite);
    let bb = sp.integrated_observable(&Mat4::unit(B, B), &rho0, t_max)?.re;
    let xx = sp.integrated_observable(&(Mat4::unit(1, 1) + Mat4::unit(2, 2)), &rho0, t_max)?.re;
    let mut f = [Mat4::zero(); 3];
    for (fs, o) in f.iter_mut().zip(OBS3) {
        *fs = sp.integrated_functional(&observable(o), cfg.tau_max)?;
    }
    let mut table = [[ZERO; 4]; 4];
    table_add(&mut table, bb, &table_from_functionals(&f));
    assemble(&table, PairYield { biexciton: p.gamma_b * bb, exciton: p.gamma_x * xx }, None)
}

pub fn initial_value_density_matrix(p: &QdParams, cfg: &TomographyConfig) -> Result<TwoPhotonMatrix> {
    Ok(analyze_initial_value(p, cfg)?.normalized)
}

/// Emitted photon numbers `γ_B∫ρ_BB dt` and `γ_X∫(ρ_XH + ρ_XV) dt` over
/// `[0, t_max]` after pulsed excitation.
pub fn pair_yield(p: &QdParams, pulse: &PulseSpec, cfg: &TomographyConfig) -> Result<PairYield> {
    p.validate()?;
    pulse.validate()?;
    cfg.validate()?;
    let t_max = cfg.resolved_t_max(pulse);
    let b = check_pulse_end(pulse, cfg, t_max)?;
    let gen = Generator::new(p);
    let sp = SuperPropagator::new(p)?;
    let d = drive_trajectory(&gen, pulse, cfg, b)?;
    let rho_b = d.states[d.end_of_pulse];
    let h = tail_horizon(t_max, b);
    let (bb, xx) = population_integrals(&d, 0..=d.end_of_pulse);
    let bb_tail = sp.integrated_observable(&Mat4::unit(B, B), &rho_b, h)?.re;
    let xx_tail = sp.integrated_observable(&(Mat4::unit(1, 1) + Mat4::unit(2, 2)), &rho_b, h)?.re;
    Ok(PairYield { biexciton: p.gamma_b * (bb + bb_tail), exciton: p.gamma_x * (xx + xx_tail) })
}
