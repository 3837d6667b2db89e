//! Two-qubit sensor Hamiltonian: closed-form eigensystem, pulse envelopes,
//! two-tone drive and assembly of the system, control and noise terms in the
//! eigenbasis.
//!
//! Product basis ordering is `{|gg>, |ge>, |eg>, |ee>}` with qubit 1 the left
//! factor and `|g>` the `+1` eigenstate of `sigma_z`. Eigenstates are ordered
//! `|0>, |1>, |2>, |3>` with energies `{-eps_e, +eps_e, +eps_o, -eps_o}`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;
pub type Ket4 = Vector4<C64>;

/// Total drive power `(Omega_p^max)^2 + (Omega_s^max)^2` shared by all drive
/// conditions. Anchored to `Omega_max = 0.05` at equal amplitudes.
pub const DEFAULT_DRIVE_POWER: f64 = 0.005;

/// Static parameters of `H_S = -eps1/2 sz1 - eps2/2 sz2 + g/2 sx1 sx2`.
/// Energies are in units of the qubit splitting; times in units of its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub eps1: f64,
    pub eps2: f64,
    pub g: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            eps1: 1.0,
            eps2: 1.0,
            g: 0.5,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps1 > 0.0 && self.eps2 > 0.0 && self.g >= 0.0;
        if !ok || !(self.eps1.is_finite() && self.eps2.is_finite() && self.g.is_finite()) {
            return Err(Error::Config(format!(
                "system parameters must satisfy eps1 > 0, eps2 > 0, g >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Closed-form eigensystem of the static Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub theta_e: f64,
    pub theta_o: f64,
    pub eps_e: f64,
    pub eps_o: f64,
    /// Columns are `|0>..|3>` expressed in the product basis.
    pub eigvecs: Matrix4<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl Spectrum {
    pub fn energies(&self) -> [f64; 4] {
        [-self.eps_e, self.eps_e, self.eps_o, -self.eps_o]
    }

    /// `V^T M V`: a product-basis operator in the eigenbasis.
    pub fn to_eigenbasis(&self, op: &Matrix4<f64>) -> Matrix4<f64> {
        self.eigvecs.transpose() * op * self.eigvecs
    }

    /// Eigenbasis components of a product-basis state.
    pub fn product_state(&self, index: usize) -> Ket4 {
        let row = self.eigvecs.row(index);
        Ket4::from_iterator(row.iter().map(|&x| C64::new(x, 0.0)))
    }

    /// `|ee>` written in the eigenbasis: `sin(theta_e/2)|0> + cos(theta_e/2)|1>`.
    pub fn ee_state(&self) -> Ket4 {
        self.product_state(PRODUCT_EE)
    }
}

pub const PRODUCT_GG: usize = 0;
pub const PRODUCT_GE: usize = 1;
pub const PRODUCT_EG: usize = 2;
pub const PRODUCT_EE: usize = 3;

/// Closed-form eigensystem.
///
/// The odd mixing angle is taken as `atan2(g, eps2 - eps1)`, which is the
/// convention under which the tabulated odd eigenvectors (and the asymmetric
/// control matrix) diagonalize `H_S`; for identical qubits it is `pi/2`.
pub fn eigensystem(params: &SystemParams) -> Spectrum {
    let SystemParams { eps1, eps2, g } = *params;
    let theta_e = g.atan2(eps1 + eps2);
    let theta_o = if eps1 == eps2 {
        FRAC_PI_2
    } else {
        g.atan2(eps2 - eps1)
    };
    let eps_e = 0.5 * (g * g + (eps1 + eps2).powi(2)).sqrt();
    let eps_o = 0.5 * (g * g + (eps1 - eps2).powi(2)).sqrt();

    let (se, ce) = (0.5 * theta_e).sin_cos();
    let (so, co) = (0.5 * theta_o).sin_cos();
    let mut v = Matrix4::zeros();
    // |0> = -cos(te/2)|gg> + sin(te/2)|ee>
    v[(PRODUCT_GG, 0)] = -ce;
    v[(PRODUCT_EE, 0)] = se;
    // |1> = sin(te/2)|gg> + cos(te/2)|ee>
    v[(PRODUCT_GG, 1)] = se;
    v[(PRODUCT_EE, 1)] = ce;
    // |2> = sin(to/2)|eg> + cos(to/2)|ge>
    v[(PRODUCT_EG, 2)] = so;
    v[(PRODUCT_GE, 2)] = co;
    // |3> = -cos(to/2)|eg> + sin(to/2)|ge>
    v[(PRODUCT_EG, 3)] = -co;
    v[(PRODUCT_GE, 3)] = so;

    Spectrum {
        theta_e,
        theta_o,
        eps_e,
        eps_o,
        eigvecs: v,
        alpha: 2.0 * (0.5 * theta_e - FRAC_PI_4).sin(),
        beta: 2.0 * (0.5 * theta_e + FRAC_PI_4).sin(),
    }
}

/// Pauli operators on the two-qubit product space.
pub mod pauli {
    use nalgebra::{Matrix2, Matrix4};

    fn kron(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Matrix4<f64> {
        Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
    }

    fn sx() -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, 1.0, 0.0)
    }

    fn sz() -> Matrix2<f64> {
        Matrix2::new(1.0, 0.0, 0.0, -1.0)
    }

    pub fn x1() -> Matrix4<f64> {
        kron(&sx(), &Matrix2::identity())
    }

    pub fn x2() -> Matrix4<f64> {
        kron(&Matrix2::identity(), &sx())
    }

    pub fn z1() -> Matrix4<f64> {
        kron(&sz(), &Matrix2::identity())
    }

    pub fn z2() -> Matrix4<f64> {
        kron(&Matrix2::identity(), &sz())
    }
}

/// Static Hamiltonian in the product basis.
pub fn h_system_product(params: &SystemParams) -> Matrix4<f64> {
    -0.5 * params.eps1 * pauli::z1() - 0.5 * params.eps2 * pauli::z2()
        + 0.5 * params.g * pauli::x1() * pauli::x2()
}

/// Gaussian pulse envelopes and protocol window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub omega_p_max: f64,
    pub omega_s_max: f64,
    /// Gaussian width `T`.
    pub width: f64,
    /// Half delay `tau`; the pump peaks at `+tau`, the Stokes pulse at `-tau`.
    pub tau: f64,
    pub delta_p: f64,
    pub delta_s: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self::with_width(2000.0, 0.05, 0.05)
    }
}

impl PulseParams {
    /// Resonant pulses with `tau = 0.7 T` over `[-5T, 5T]`.
    pub fn with_width(width: f64, omega_p_max: f64, omega_s_max: f64) -> Self {
        Self {
            omega_p_max,
            omega_s_max,
            width,
            tau: 0.7 * width,
            delta_p: 0.0,
            delta_s: 0.0,
            t_start: -5.0 * width,
            t_end: 5.0 * width,
        }
    }

    pub fn with_amplitudes(self, (omega_p_max, omega_s_max): (f64, f64)) -> Self {
        Self {
            omega_p_max,
            omega_s_max,
            ..self
        }
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.t_end > self.t_start) {
            return Err(Error::Config(format!(
                "pulse width must be positive and the window non-empty (got {self:?})"
            )));
        }
        if self.omega_p_max < 0.0 || self.omega_s_max < 0.0 {
            return Err(Error::Config(
                "pulse amplitudes must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `(Omega_p(t), Omega_s(t))`, counterintuitive order: Stokes first.
pub fn pulse_envelopes(t: f64, p: &PulseParams) -> (f64, f64) {
    let xp = (t - p.tau) / p.width;
    let xs = (t + p.tau) / p.width;
    (
        p.omega_p_max * (-xp * xp).exp(),
        p.omega_s_max * (-xs * xs).exp(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveTag {
    /// `Omega_p^max = Omega_s^max`
    Equal,
    /// `Omega_p^max = 2 Omega_s^max`
    PumpDouble,
    /// `Omega_p^max = Omega_s^max / 2`
    StokesDouble,
}

impl DriveTag {
    /// Feature ordering used throughout.
    pub const ALL: [DriveTag; 3] = [
        DriveTag::Equal,
        DriveTag::PumpDouble,
        DriveTag::StokesDouble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DriveTag::Equal => "equal",
            DriveTag::PumpDouble => "pump-double",
            DriveTag::StokesDouble => "stokes-double",
        }
    }

    /// `Omega_p^max / Omega_s^max`.
    pub fn ratio(self) -> f64 {
        match self {
            DriveTag::Equal => 1.0,
            DriveTag::PumpDouble => 2.0,
            DriveTag::StokesDouble => 0.5,
        }
    }
}

impl fmt::Display for DriveTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DriveTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "equal" => Ok(DriveTag::Equal),
            "pump-double" | "pumpdouble" => Ok(DriveTag::PumpDouble),
            "stokes-double" | "stokesdouble" => Ok(DriveTag::StokesDouble),
            _ => Err(Error::Config(format!(
                "unknown drive condition {s:?} (expected equal, pump-double or stokes-double)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveCondition {
    pub tag: DriveTag,
    pub power: f64,
}

impl DriveCondition {
    pub fn new(tag: DriveTag, power: f64) -> Self {
        Self { tag, power }
    }
}

/// Peak amplitudes `(Omega_p^max, Omega_s^max)` with the tag's ratio and
/// `Omega_p^2 + Omega_s^2 = power`.
pub fn resolve_drive_condition(cond: &DriveCondition) -> (f64, f64) {
    let r = cond.tag.ratio();
    let omega_s = (cond.power / (1.0 + r * r)).sqrt();
    (r * omega_s, omega_s)
}

/// Carrier frequencies `(omega_p, omega_s)`, resonant with the `0-2` and
/// `2-1` transitions up to the detunings.
pub fn carrier_frequencies(p: &PulseParams, spec: &Spectrum) -> (f64, f64) {
    (
        spec.eps_e + spec.eps_o - p.delta_p,
        spec.eps_e - spec.eps_o - p.delta_s,
    )
}

/// Validated two-tone waveform
/// `W(t) = Omega_s(t) cos(omega_s t) / beta + Omega_p(t) cos(omega_p t) / alpha`.
#[derive(Clone, Copy, Debug)]
pub struct TwoToneDrive {
    pub pulse: PulseParams,
    pub omega_p: f64,
    pub omega_s: f64,
    inv_alpha: f64,
    inv_beta: f64,
}

impl TwoToneDrive {
    pub fn new(pulse: &PulseParams, spec: &Spectrum) -> Result<Self> {
        if spec.alpha.abs() < 1e-12 || spec.beta.abs() < 1e-12 {
            return Err(Error::Config(format!(
                "drive coefficients vanish (alpha = {}, beta = {}); theta_e = {} is not usable",
                spec.alpha, spec.beta, spec.theta_e
            )));
        }
        let (omega_p, omega_s) = carrier_frequencies(pulse, spec);
        Ok(Self {
            pulse: *pulse,
            omega_p,
            omega_s,
            inv_alpha: 1.0 / spec.alpha,
            inv_beta: 1.0 / spec.beta,
        })
    }

    #[inline]
    pub fn waveform(&self, t: f64) -> f64 {
        let (op, os) = pulse_envelopes(t, &self.pulse);
        os * (self.omega_s * t).cos() * self.inv_beta
            + op * (self.omega_p * t).cos() * self.inv_alpha
    }
}

pub fn drive_waveform(t: f64, p: &PulseParams, spec: &Spectrum) -> Result<f64> {
    Ok(TwoToneDrive::new(p, spec)?.waveform(t))
}

/// The static, control and noise operators of the sensor, precomputed in the
/// eigenbasis. All are real symmetric.
#[derive(Clone, Debug)]
pub struct SensorOperators {
    pub spectrum: Spectrum,
    /// `H_S` (diagonal).
    pub system: Matrix4<f64>,
    /// `sx1 + sx2`, the symmetric local drive.
    pub control: Matrix4<f64>,
    /// `dH_n / d delta_1 = -sz1 / 2`.
    pub noise1: Matrix4<f64>,
    /// `dH_n / d delta_2 = -sz2 / 2`.
    pub noise2: Matrix4<f64>,
}

impl SensorOperators {
    pub fn new(params: &SystemParams) -> Self {
        let spectrum = eigensystem(params);
        let system = Matrix4::from_diagonal(&Vector4::from(spectrum.energies()));
        let control = spectrum.to_eigenbasis(&(pauli::x1() + pauli::x2()));
        let noise1 = spectrum.to_eigenbasis(&(-0.5 * pauli::z1()));
        let noise2 = spectrum.to_eigenbasis(&(-0.5 * pauli::z2()));
        Self {
            spectrum,
            system,
            control,
            noise1,
            noise2,
        }
    }

    /// `H_n` for fixed splitting shifts.
    pub fn noise(&self, delta1: f64, delta2: f64) -> Matrix4<f64> {
        delta1 * self.noise1 + delta2 * self.noise2
    }

    /// `H_S + W sum_i sx_i + H_n(delta1, delta2)` for a given drive value.
    pub fn hamiltonian(&self, w: f64, delta1: f64, delta2: f64) -> Matrix4<f64> {
        self.system + w * self.control + self.noise(delta1, delta2)
    }
}

pub fn to_complex(m: &Matrix4<f64>) -> Mat4 {
    m.map(|x| C64::new(x, 0.0))
}

/// Full lab-frame Hamiltonian `H_S + H_c(t) + H_n` in the eigenbasis.
pub fn h_total_lab(
    t: f64,
    params: &SystemParams,
    pulse: &PulseParams,
    spec: &Spectrum,
    delta1: f64,
    delta2: f64,
) -> Result<Mat4> {
    let w = drive_waveform(t, pulse, spec)?;
    let ops = SensorOperators::new(params);
    Ok(to_complex(&ops.hamiltonian(w, delta1, delta2)))
}

/// Control Hamiltonian for independent local drives `W1 sx1 + W2 sx2`.
pub fn h_control_asymmetric(w1: f64, w2: f64, spec: &Spectrum) -> Mat4 {
    let (to, te) = (spec.theta_o, spec.theta_e);
    let (s_minus, c_minus) = (0.5 * (to - te)).sin_cos();
    let (s_plus, c_plus) = (0.5 * (to + te)).sin_cos();
    let mut h = Matrix4::<f64>::zeros();
    h[(0, 2)] = -(w1 * s_minus + w2 * c_plus);
    h[(1, 2)] = w1 * c_minus + w2 * s_plus;
    h[(0, 3)] = w1 * c_minus - w2 * s_plus;
    h[(1, 3)] = w1 * s_minus - w2 * c_plus;
    for (r, c) in [(0, 2), (1, 2), (0, 3), (1, 3)] {
        h[(c, r)] = h[(r, c)];
    }
    to_complex(&h)
}
