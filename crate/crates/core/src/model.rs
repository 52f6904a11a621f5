//! The driven four-level emitter: parameters, pulse envelopes, the
//! rotating-frame Hamiltonian, and the radiative Lindblad generator.
//!
//! Basis order is `(G, X_H, X_V, B)`. The frame rotates at the laser
//! frequency, which sits at half the ground-to-biexciton transition, so `G`
//! and `B` are degenerate at zero energy and both excitons sit at the
//! exciton-laser detuning, split symmetrically by the fine structure
//! (`X_H` above `X_V`).

use core::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{Mat4, C64, ZERO};
use crate::units::{uev_to_mev, HBAR};

/// Emitter levels, indexing [`State4`] and [`Mat4`] operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    G = 0,
    XH = 1,
    XV = 2,
    B = 3,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::G, Level::XH, Level::XV, Level::B];

    #[inline]
    pub const fn idx(self) -> usize {
        self as usize
    }
}

/// Static emitter parameters. Defaults are a typical GaAs quantum dot with
/// vanishing fine-structure splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdParams {
    /// Biexciton binding energy (meV).
    pub e_b: f64,
    /// Fine-structure splitting (μeV), `X_H` above `X_V`.
    pub fss: f64,
    /// Exciton radiative decay rate (ps⁻¹).
    pub gamma_x: f64,
    /// Biexciton radiative decay rate (ps⁻¹).
    pub gamma_b: f64,
    /// Exciton-laser detuning (meV).
    pub delta_xl: f64,
}

impl Default for QdParams {
    fn default() -> Self {
        let e_b = 4.0;
        let gamma_x = 0.005;
        QdParams { e_b, fss: 0.0, gamma_x, gamma_b: 2.0 * gamma_x, delta_xl: e_b / 2.0 }
    }
}

impl QdParams {
    pub fn with_fss(mut self, fss_uev: f64) -> Self {
        self.fss = fss_uev;
        self
    }

    pub fn with_rates(mut self, gamma_x: f64, gamma_b: f64) -> Self {
        self.gamma_x = gamma_x;
        self.gamma_b = gamma_b;
        self
    }

    /// Checks the physical domains. Zero decay rates are accepted so that
    /// lossless dynamics can be studied, negative ones are not.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 5] = [
            ("e_b", self.e_b, self.e_b > 0.0),
            ("fss", self.fss, self.fss >= 0.0),
            ("gamma_x", self.gamma_x, self.gamma_x >= 0.0),
            ("gamma_b", self.gamma_b, self.gamma_b >= 0.0),
            ("delta_xl", self.delta_xl, true),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Fine-structure splitting in meV.
    pub fn fss_mev(&self) -> f64 {
        uev_to_mev(self.fss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseShape {
    Gaussian,
    /// Flat top of width FWHM with `tanh` edges.
    SmoothedRectangular,
}

/// Laser pulse: envelope shape, duration, area and linear polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    /// Full width at half maximum of the field envelope (ps).
    pub fwhm: f64,
    /// Pulse area Θ (rad).
    pub area: f64,
    /// `H` component of the linear polarization, in `[-1, 1]`;
    /// `α_V = sqrt(1 - α_H²)`. Negative values select the antidiagonal side.
    pub alpha_h: f64,
    /// Envelope center (ps).
    pub t0: f64,
    /// Edge rise time for the smoothed rectangle; `None` means `0.1·fwhm`.
    pub edge_rise: Option<f64>,
}

/// Default half-width of the pulse window, in units of FWHM.
pub const PULSE_WINDOW: f64 = 3.0;

impl PulseSpec {
    /// Gaussian, horizontally polarized, centered `3·fwhm` after `t = 0`.
    pub fn gaussian(fwhm: f64, area: f64) -> Self {
        PulseSpec {
            shape: PulseShape::Gaussian,
            fwhm,
            area,
            alpha_h: 1.0,
            t0: PULSE_WINDOW * fwhm,
            edge_rise: None,
        }
    }

    pub fn smoothed_rectangular(fwhm: f64, area: f64) -> Self {
        PulseSpec { shape: PulseShape::SmoothedRectangular, ..Self::gaussian(fwhm, area) }
    }

    pub fn with_alpha_h(mut self, alpha_h: f64) -> Self {
        self.alpha_h = alpha_h;
        self
    }

    pub fn with_area(mut self, area: f64) -> Self {
        self.area = area;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(Error::InvalidParameter { name: "fwhm", value: self.fwhm });
        }
        if !(self.area >= 0.0 && self.area.is_finite()) {
            return Err(Error::InvalidParameter { name: "area", value: self.area });
        }
        if !(-1.0..=1.0).contains(&self.alpha_h) {
            return Err(Error::InvalidParameter { name: "alpha_h", value: self.alpha_h });
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidParameter { name: "t0", value: self.t0 });
        }
        if let Some(r) = self.edge_rise {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter { name: "edge_rise", value: r });
            }
        }
        Ok(())
    }

    pub fn alpha_v(&self) -> f64 {
        libm::sqrt((1.0 - self.alpha_h * self.alpha_h).max(0.0))
    }

    pub fn edge_rise(&self) -> f64 {
        self.edge_rise.unwrap_or(0.1 * self.fwhm)
    }

    /// Time interval `t0 ± window·fwhm` outside which the drive is negligible.
    pub fn support(&self, window: f64) -> (f64, f64) {
        (self.t0 - window * self.fwhm, self.t0 + window * self.fwhm)
    }

    /// Field envelope Ω(t) in rad/ps. Integrates to the pulse area.
    pub fn envelope(&self, t: f64) -> f64 {
        if self.area == 0.0 {
            return 0.0;
        }
        let x = t - self.t0;
        match self.shape {
            PulseShape::Gaussian => {
                let w = self.fwhm;
                libm::sqrt(4.0 * LN_2 / PI) * (self.area / w)
                    * libm::exp(-4.0 * LN_2 * x * x / (w * w))
            }
            PulseShape::SmoothedRectangular => {
                let half = 0.5 * self.fwhm;
                let r = self.edge_rise();
                let amp = self.area / self.fwhm;
                0.5 * amp * (libm::tanh((x + half) / r) - libm::tanh((x - half) / r))
            }
        }
    }
}

/// Envelope Ω(t) of `pulse` (rad/ps).
pub fn envelope(pulse: &PulseSpec, t: f64) -> f64 {
    pulse.envelope(t)
}

/// Density matrix over `(G, X_H, X_V, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State4(pub Mat4);

impl State4 {
    pub fn pure(level: Level) -> Self {
        State4(Mat4::unit(level.idx(), level.idx()))
    }

    pub fn ground() -> Self {
        Self::pure(Level::G)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn population(&self, level: Level) -> f64 {
        self.0 .0[level.idx()][level.idx()].re
    }

    pub fn element(&self, row: Level, col: Level) -> C64 {
        self.0 .0[row.idx()][col.idx()]
    }
}

/// Rotating-frame Hamiltonian at time `t` (meV).
pub fn hamiltonian(p: &QdParams, pulse: &PulseSpec, t: f64) -> Mat4 {
    hamiltonian_with_drive(p, pulse.envelope(t), pulse.alpha_h, pulse.alpha_v())
}

/// Hamiltonian for a given instantaneous envelope value (meV).
pub fn hamiltonian_with_drive(p: &QdParams, omega: f64, alpha_h: f64, alpha_v: f64) -> Mat4 {
    let half_fss = 0.5 * p.fss_mev();
    let mut h = Mat4::from_diag([0.0, p.delta_xl + half_fss, p.delta_xl - half_fss, 0.0]);
    let ch = C64::new(-0.5 * HBAR * omega * alpha_h, 0.0);
    let cv = C64::new(-0.5 * HBAR * omega * alpha_v, 0.0);
    let (g, xh, xv, b) = (Level::G.idx(), Level::XH.idx(), Level::XV.idx(), Level::B.idx());
    for (x, coupling) in [(xh, ch), (xv, cv)] {
        h.0[x][g] = coupling;
        h.0[g][x] = coupling.conj();
        h.0[b][x] = coupling;
        h.0[x][b] = coupling.conj();
    }
    h
}

/// A radiative decay channel `rate · D[op]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub op: Mat4,
    pub rate: f64,
}

/// The four radiative channels: each biexciton arm at `γ_B/2`, each exciton
/// at `γ_X`.
pub fn collapse_channels(p: &QdParams) -> [Channel; 4] {
    let (g, xh, xv, b) = (Level::G.idx(), Level::XH.idx(), Level::XV.idx(), Level::B.idx());
    [
        Channel { op: Mat4::unit(xh, b), rate: 0.5 * p.gamma_b },
        Channel { op: Mat4::unit(xv, b), rate: 0.5 * p.gamma_b },
        Channel { op: Mat4::unit(g, xh), rate: p.gamma_x },
        Channel { op: Mat4::unit(g, xv), rate: p.gamma_x },
    ]
}

/// Lindblad generator specialized to the cascade.
///
/// The commutator is taken with the real symmetric `H/ħ`; the dissipator is
/// written out element-wise, which is what [`collapse_channels`] sums to.
#[derive(Debug, Clone, Copy)]
pub struct Generator {
    params: QdParams,
    /// Diagonal of `H/ħ` (rad/ps).
    energies: [f64; 4],
    /// Total outgoing rate of each level.
    widths: [f64; 4],
}

impl Generator {
    pub fn new(p: &QdParams) -> Self {
        let half_fss = 0.5 * p.fss_mev();
        let energies = [
            0.0,
            (p.delta_xl + half_fss) / HBAR,
            (p.delta_xl - half_fss) / HBAR,
            0.0,
        ];
        let widths = [0.0, p.gamma_x, p.gamma_x, p.gamma_b];
        Generator { params: *p, energies, widths }
    }

    pub fn params(&self) -> &QdParams {
        &self.params
    }

    /// `H/ħ` in rad/ps for drive amplitudes `(Ω α_H, Ω α_V)`.
    #[inline]
    fn h_over_hbar(&self, drive: (f64, f64)) -> [[f64; 4]; 4] {
        let mut h = [[0.0; 4]; 4];
        for (i, e) in self.energies.iter().enumerate() {
            h[i][i] = *e;
        }
        let ch = -0.5 * drive.0;
        let cv = -0.5 * drive.1;
        h[1][0] = ch;
        h[0][1] = ch;
        h[3][1] = ch;
        h[1][3] = ch;
        h[2][0] = cv;
        h[0][2] = cv;
        h[3][2] = cv;
        h[2][3] = cv;
        h
    }

    /// `[H/ħ, ρ]` with `H` real symmetric.
    #[inline]
    fn commutator(h: &[[f64; 4]; 4], rho: &Mat4) -> Mat4 {
        let mut out = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = ZERO;
                for k in 0..4 {
                    acc += rho.0[k][j] * h[i][k] - rho.0[i][k] * h[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    /// dρ/dt for drive amplitudes `(Ω α_H, Ω α_V)` in rad/ps.
    #[inline]
    pub fn apply_with_drive(&self, drive: (f64, f64), rho: &Mat4) -> Mat4 {
        let h = self.h_over_hbar(drive);
        let comm = Self::commutator(&h, rho);
        let mut out = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                let z = comm.0[i][j];
                // -i·z
                out.0[i][j] = C64::new(z.im, -z.re)
                    - rho.0[i][j] * (0.5 * (self.widths[i] + self.widths[j]));
            }
        }
        let p = &self.params;
        let feed_x = rho.0[3][3] * (0.5 * p.gamma_b);
        out.0[1][1] += feed_x;
        out.0[2][2] += feed_x;
        out.0[0][0] += (rho.0[1][1] + rho.0[2][2]) * p.gamma_x;
        out
    }

    /// Heisenberg-picture generator: `Tr[W · L(ρ)] = Tr[L_adj(W) · ρ]` for
    /// all `ρ`.
    #[inline]
    pub fn adjoint_apply_with_drive(&self, drive: (f64, f64), w: &Mat4) -> Mat4 {
        let h = self.h_over_hbar(drive);
        let comm = Self::commutator(&h, w);
        let mut out = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                let z = comm.0[i][j];
                // +i·z
                out.0[i][j] = C64::new(-z.im, z.re)
                    - w.0[i][j] * (0.5 * (self.widths[i] + self.widths[j]));
            }
        }
        let p = &self.params;
        out.0[3][3] += (w.0[1][1] + w.0[2][2]) * (0.5 * p.gamma_b);
        let feed_g = w.0[0][0] * p.gamma_x;
        out.0[1][1] += feed_g;
        out.0[2][2] += feed_g;
        out
    }

    #[inline]
    pub fn drive(pulse: &PulseSpec, t: f64) -> (f64, f64) {
        let omega = pulse.envelope(t);
        (omega * pulse.alpha_h, omega * pulse.alpha_v())
    }

    pub fn apply(&self, pulse: &PulseSpec, t: f64, rho: &Mat4) -> Mat4 {
        self.apply_with_drive(Self::drive(pulse, t), rho)
    }

    pub fn adjoint_apply(&self, pulse: &PulseSpec, t: f64, w: &Mat4) -> Mat4 {
        self.adjoint_apply_with_drive(Self::drive(pulse, t), w)
    }
}

/// dρ/dt (ps⁻¹) from the full Lindblad generator at time `t`.
pub fn liouvillian_apply(p: &QdParams, pulse: &PulseSpec, t: f64, rho: &Mat4) -> Mat4 {
    Generator::new(p).apply(pulse, t, rho)
}

/// Reference Lindblad generator assembled literally from
/// [`hamiltonian`] and [`collapse_channels`]; slower than [`Generator`].
pub fn lindblad_reference(h: &Mat4, channels: &[Channel], rho: &Mat4) -> Mat4 {
    let comm = Mat4::commutator(h, rho).scale(C64::new(0.0, -1.0 / HBAR));
    channels.iter().fold(comm, |acc, ch| {
        let l = ch.op;
        let ld = l.adjoint();
        let ldl = ld * l;
        let d = l * *rho * ld - (ldl * *rho + *rho * ldl).scale_re(0.5);
        acc + d.scale_re(ch.rate)
    })
}
