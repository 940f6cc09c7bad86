//! Closed-form physics of the reduced qubit.
//!
//! Everything is expressed with ħ = k_B = 1, so every frequency, rate,
//! temperature and energy is an angular frequency in rad/s. The qubit basis
//! is `(|e⟩, |g⟩)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::linalg::{Mat2, SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054571817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380649e-23;
pub const TWO_PI: f64 = 2.0 * PI;

/// Converts an angular frequency to MHz (ω / 2π / 10⁶).
pub fn rad_s_to_mhz(omega: f64) -> f64 {
    omega / TWO_PI / 1e6
}

pub fn mhz_to_rad_s(f_mhz: f64) -> f64 {
    TWO_PI * f_mhz * 1e6
}

/// Raw table entries keyed by unit-bearing names.
pub type RawTable = BTreeMap<String, f64>;

/// Keys accepted by [`to_internal_units`], in canonical order.
pub const RAW_KEYS: [&str; 10] = [
    "f_cpw_ghz",
    "f_pump_ghz",
    "g_over_2pi_hbar_mhz",
    "temperature_mk",
    "gamma_over_2pi_mhz",
    "kappa_over_2pi_mhz",
    "omega0_over_2pi_mhz",
    "omega1_max_over_2pi_mhz",
    "e0_over_2pi_hbar_mhz",
    "e1_max_over_2pi_hbar_mhz",
];

/// The experimentally motivated parameter table the engine is studied at.
pub fn reference_raw() -> RawTable {
    [
        ("f_cpw_ghz", 4.94),
        ("f_pump_ghz", 4.94),
        ("g_over_2pi_hbar_mhz", 120.0),
        ("temperature_mk", 30.0),
        ("gamma_over_2pi_mhz", 2.0),
        ("kappa_over_2pi_mhz", 1.0),
        ("omega0_over_2pi_mhz", 100.0),
        ("omega1_max_over_2pi_mhz", 1000.0),
        ("e0_over_2pi_hbar_mhz", 0.2),
        ("e1_max_over_2pi_hbar_mhz", 2.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// How the ω-knob values of the table are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqInterpretation {
    /// Knob is the lab-frame qubit frequency ω_T; the gap in the rotating
    /// frame is ω_T − ω.
    LabFrame,
    /// Knob is the rotating-frame gap ω_T − ω itself.
    Detuning,
}

/// Which gap enters the Boltzmann and tanh factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalGap {
    /// Lab-frame qubit frequency ω + δ.
    LabFrame,
    /// The knob value, as written in the closed forms.
    RotatingFrame,
}

/// Meaning of the single tabulated qubit rate Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaConvention {
    /// Γ = Γ⁻ − Γ⁺, so Γ / tanh(x/2) = Γ⁻ + Γ⁺.
    NetDecay,
    /// Γ = Γ⁻.
    DecayOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineParameters {
    pub omega_cpw: f64,
    /// Pump frequency ω.
    pub omega_pump: f64,
    pub g_over_hbar: f64,
    /// k_B T / ħ.
    pub temperature_freq: f64,
    /// The tabulated qubit rate Γ; see [`GammaConvention`].
    pub gamma: f64,
    pub kappa_cpw: f64,
    pub omega_knob_range: (f64, f64),
    pub drive_knob_range: (f64, f64),
    pub freq_interpretation: FreqInterpretation,
    pub thermal_gap: ThermalGap,
    pub gamma_convention: GammaConvention,
}

/// Converts a raw table into internal units.
///
/// Frequencies given as f are mapped to ω = 2πf; `g` and `E_d` are given as
/// (g/2πħ) and (E_d/2πħ); the temperature in millikelvin becomes k_B T/ħ.
/// Convention flags start at their defaults (detuning reading, rotating-frame
/// thermal gap, net-decay Γ).
pub fn to_internal_units(raw: &RawTable) -> Result<EngineParameters> {
    let get = |key: &str| -> Result<f64> {
        let v = *raw
            .get(key)
            .ok_or_else(|| EngineError::config(key, "missing"))?;
        if !v.is_finite() {
            return Err(EngineError::config(key, format!("not finite: {v}")));
        }
        if v <= 0.0 {
            return Err(EngineError::config(
                key,
                format!("must be positive, got {v}"),
            ));
        }
        Ok(v)
    };
    for key in raw.keys() {
        if !RAW_KEYS.contains(&key.as_str()) {
            return Err(EngineError::config(key, "unknown key"));
        }
    }

    let ghz = |key| get(key).map(|f| TWO_PI * f * 1e9);
    let mhz = |key| get(key).map(|f| TWO_PI * f * 1e6);

    let params = EngineParameters {
        omega_cpw: ghz("f_cpw_ghz")?,
        omega_pump: ghz("f_pump_ghz")?,
        g_over_hbar: mhz("g_over_2pi_hbar_mhz")?,
        temperature_freq: get("temperature_mk")? * 1e-3 * K_B / HBAR,
        gamma: mhz("gamma_over_2pi_mhz")?,
        kappa_cpw: mhz("kappa_over_2pi_mhz")?,
        omega_knob_range: (mhz("omega0_over_2pi_mhz")?, mhz("omega1_max_over_2pi_mhz")?),
        drive_knob_range: (
            mhz("e0_over_2pi_hbar_mhz")?,
            mhz("e1_max_over_2pi_hbar_mhz")?,
        ),
        freq_interpretation: FreqInterpretation::Detuning,
        thermal_gap: ThermalGap::RotatingFrame,
        gamma_convention: GammaConvention::NetDecay,
    };
    params.validate()?;
    Ok(params)
}

impl EngineParameters {
    pub fn reference() -> Self {
        to_internal_units(&reference_raw()).expect("built-in table is valid")
    }

    pub fn with_conventions(
        mut self,
        freq_interpretation: FreqInterpretation,
        thermal_gap: ThermalGap,
    ) -> Self {
        self.freq_interpretation = freq_interpretation;
        self.thermal_gap = thermal_gap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_cpw", self.omega_cpw),
            ("omega_pump", self.omega_pump),
            ("g_over_hbar", self.g_over_hbar),
            ("temperature_freq", self.temperature_freq),
            ("gamma", self.gamma),
            ("kappa_cpw", self.kappa_cpw),
            ("omega_knob_range.low", self.omega_knob_range.0),
            ("drive_knob_range.low", self.drive_knob_range.0),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(EngineError::config(
                    key,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if self.omega_knob_range.0 >= self.omega_knob_range.1 {
            return Err(EngineError::config(
                "omega_knob_range",
                "low must be below high",
            ));
        }
        if self.drive_knob_range.0 >= self.drive_knob_range.1 {
            return Err(EngineError::config(
                "drive_knob_range",
                "low must be below high",
            ));
        }
        Ok(())
    }

    /// Rotating-frame qubit gap δ = ω_T − ω for an ω-knob value.
    pub fn detuning(&self, omega_knob: f64) -> f64 {
        match self.freq_interpretation {
            FreqInterpretation::Detuning => omega_knob,
            FreqInterpretation::LabFrame => omega_knob - self.omega_pump,
        }
    }

    /// Gap entering the thermal factors for an ω-knob value.
    pub fn thermal_gap_at(&self, omega_knob: f64) -> f64 {
        match self.thermal_gap {
            ThermalGap::RotatingFrame => omega_knob,
            ThermalGap::LabFrame => self.omega_pump + self.detuning(omega_knob),
        }
    }

    /// Cavity detuning ω_CPW − ω.
    pub fn cavity_detuning(&self) -> f64 {
        self.omega_cpw - self.omega_pump
    }

    /// Total qubit relaxation rate Γ⁻ + Γ⁺ at the given thermal gap.
    ///
    /// Under [`GammaConvention::NetDecay`] this is Γ / tanh(gap / 2T).
    pub fn transverse_rate(&self, gap: f64) -> Result<f64> {
        let x = self.reduced_gap(gap)?;
        Ok(match self.gamma_convention {
            GammaConvention::NetDecay => {
                let t = (x / 2.0).tanh();
                if t == 0.0 {
                    return Err(EngineError::Domain(format!(
                        "tanh of thermal gap {gap:e} vanishes"
                    )));
                }
                self.gamma / t
            }
            GammaConvention::DecayOnly => self.gamma * (1.0 + (-x).exp()),
        })
    }

    /// ħω / k_B T for a gap, rejecting nonpositive gaps.
    pub fn reduced_gap(&self, gap: f64) -> Result<f64> {
        if gap.is_nan() || gap <= 0.0 {
            return Err(EngineError::Domain(format!(
                "thermal gap must be positive, got {gap:e}"
            )));
        }
        Ok(gap / self.temperature_freq)
    }

    pub fn check_knobs(&self, knobs: &Knobs) -> Result<()> {
        let (lo, hi) = self.omega_knob_range;
        if !(knobs.omega_t >= lo && knobs.omega_t <= hi) {
            return Err(EngineError::KnobOutOfRange {
                name: "omega_t",
                value: knobs.omega_t,
                low: lo,
                high: hi,
            });
        }
        let (lo, hi) = self.drive_knob_range;
        if !(knobs.drive >= lo && knobs.drive <= hi) {
            return Err(EngineError::KnobOutOfRange {
                name: "drive",
                value: knobs.drive,
                low: lo,
                high: hi,
            });
        }
        Ok(())
    }
}

/// The two controllable variables (ω_T knob, E_d/ħ), both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knobs {
    pub omega_t: f64,
    pub drive: f64,
}

impl Knobs {
    pub fn new(omega_t: f64, drive: f64) -> Self {
        Knobs { omega_t, drive }
    }

    pub fn get(&self, axis: KnobAxis) -> f64 {
        match axis {
            KnobAxis::OmegaT => self.omega_t,
            KnobAxis::Drive => self.drive,
        }
    }

    pub fn with(&self, axis: KnobAxis, value: f64) -> Self {
        match axis {
            KnobAxis::OmegaT => Knobs::new(value, self.drive),
            KnobAxis::Drive => Knobs::new(self.omega_t, value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KnobAxis {
    OmegaT,
    Drive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub k_minus: f64,
    pub k_plus: f64,
}

impl RateSet {
    pub fn qubit_total(&self) -> f64 {
        self.gamma_minus + self.gamma_plus
    }
}

/// Detailed-balance rates for the qubit (at `omega_t_gap`) and the cavity.
pub fn thermal_rates(params: &EngineParameters, omega_t_gap: f64) -> Result<RateSet> {
    let x = params.reduced_gap(omega_t_gap)?;
    let boltzmann = (-x).exp();
    let gamma_minus = match params.gamma_convention {
        // Γ⁻(1 − e^{−x}) = Γ
        GammaConvention::NetDecay => params.gamma / -(-x).exp_m1(),
        GammaConvention::DecayOnly => params.gamma,
    };
    if !gamma_minus.is_finite() {
        return Err(EngineError::Domain(format!(
            "rates diverge at gap {omega_t_gap:e}"
        )));
    }
    let cavity_boltzmann = (-params.omega_cpw / params.temperature_freq).exp();
    Ok(RateSet {
        gamma_minus,
        gamma_plus: gamma_minus * boltzmann,
        k_minus: params.kappa_cpw,
        k_plus: params.kappa_cpw * cavity_boltzmann,
    })
}

/// Mean-field cavity amplitude ⟨a⟩ = (E_d/ħ) / (iκ/2 − (ω_CPW − ω)).
pub fn cavity_amplitude(params: &EngineParameters, drive: f64) -> Result<Complex64> {
    let denom = cavity_response(params)?;
    Ok(Complex64::new(drive, 0.0) / denom)
}

/// iκ/2 − (ω_CPW − ω), the denominator of the cavity response.
fn cavity_response(params: &EngineParameters) -> Result<Complex64> {
    let denom = Complex64::new(-params.cavity_detuning(), params.kappa_cpw / 2.0);
    if denom.norm() == 0.0 {
        return Err(EngineError::Singular);
    }
    Ok(denom)
}

/// Mean-field qubit Hamiltonian H̃ = (δ/2)σ_z + g(⟨a⟩σ₊ + ⟨a†⟩σ₋), rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveHamiltonian(pub Mat2);

impl EffectiveHamiltonian {
    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    /// Coupling entry ⟨e|H̃|g⟩ = g⟨a⟩.
    pub fn coupling(&self) -> Complex64 {
        self.0.get(0, 1)
    }

    /// Half the eigenvalue splitting, √(δ²/4 + |g⟨a⟩|²).
    pub fn half_gap(&self) -> f64 {
        let [lo, hi] = self.0.hermitian_eigenvalues();
        0.5 * (hi - lo)
    }
}

pub fn effective_hamiltonian(
    params: &EngineParameters,
    knobs: &Knobs,
) -> Result<EffectiveHamiltonian> {
    let delta = params.detuning(knobs.omega_t);
    let coupling = cavity_amplitude(params, knobs.drive)? * params.g_over_hbar;
    Ok(EffectiveHamiltonian(
        SIGMA_Z.scale_re(delta / 2.0)
            + SIGMA_PLUS.scale(coupling)
            + SIGMA_MINUS.scale(coupling.conj()),
    ))
}

/// ∂H̃/∂λ along one knob axis. Both derivatives are knob-independent:
/// σ_z/2 for ω_T, and g(σ₊ + h.c.)/(iκ/2 − Δ_c) for the drive.
pub fn hamiltonian_derivative(params: &EngineParameters, axis: KnobAxis) -> Result<Mat2> {
    Ok(match axis {
        KnobAxis::OmegaT => SIGMA_Z.scale_re(0.5),
        KnobAxis::Drive => {
            let d = Complex64::new(params.g_over_hbar, 0.0) / cavity_response(params)?;
            SIGMA_PLUS.scale(d) + SIGMA_MINUS.scale(d.conj())
        }
    })
}

/// Tolerances for accepting a matrix as a qubit state.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-12;

/// 2×2 Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensityMatrix(Mat2);

impl QubitDensityMatrix {
    /// Validates Hermiticity, trace and positivity at the module tolerances.
    pub fn new(m: Mat2) -> Result<Self> {
        let herm = m.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(EngineError::InvalidState(format!(
                "non-Hermitian by {herm:e}"
            )));
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(EngineError::InvalidState(format!("trace {tr}")));
        }
        let det = m.get(0, 0).re * m.get(1, 1).re - m.get(0, 1).norm_sqr();
        if det < -PSD_TOL || m.get(0, 0).re < -PSD_TOL || m.get(1, 1).re < -PSD_TOL {
            return Err(EngineError::InvalidState(format!(
                "not positive: det {det:e}"
            )));
        }
        Ok(QubitDensityMatrix(m))
    }

    pub fn from_populations(ee: f64, gg: f64, eg: Complex64) -> Result<Self> {
        Self::new(Mat2([
            [Complex64::new(ee, 0.0), eg],
            [eg.conj(), Complex64::new(gg, 0.0)],
        ]))
    }

    pub fn maximally_mixed() -> Self {
        QubitDensityMatrix(Mat2::from_real_diag(0.5, 0.5))
    }

    /// Gibbs state of (gap/2)σ_z at temperature `temperature_freq`.
    pub fn thermal(gap: f64, temperature_freq: f64) -> Self {
        let x = gap / temperature_freq;
        let ee = 1.0 / (1.0 + x.exp());
        let gg = 1.0 / (1.0 + (-x).exp());
        QubitDensityMatrix(Mat2::from_real_diag(ee, gg))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn ee(&self) -> f64 {
        self.0.get(0, 0).re
    }

    pub fn gg(&self) -> f64 {
        self.0.get(1, 1).re
    }

    pub fn eg(&self) -> Complex64 {
        self.0.get(0, 1)
    }

    pub fn ge(&self) -> Complex64 {
        self.0.get(1, 0)
    }

    /// tr(ρ H).
    pub fn expectation(&self, h: &Mat2) -> f64 {
        self.0.trace_product(h)
    }
}

/// Steady state of the reduced qubit master equation in closed form.
///
/// With D = Γ_t²/4 + δ² (Γ_t the total relaxation rate), the drive term
/// A = g²E_d² / (κ²/4 + Δ_c²) and x = ħω_T/k_BT:
///
/// ```text
/// ρ_ee = (A + D/(1 + eˣ)) / (2A + D)
/// ρ_gg = (A + D/(1 + e⁻ˣ)) / (2A + D)
/// ρ_eg = −½ (iΓ_t + 2δ) g⟨a⟩ tanh(x/2) / (2A + D)
/// ```
///
/// The coherence carries the sign that makes this state the kernel of the
/// Lindblad generator with H̃ = (δ/2)σ_z + g(⟨a⟩σ₊ + h.c.).
pub fn steady_state_analytic(
    params: &EngineParameters,
    knobs: &Knobs,
) -> Result<QubitDensityMatrix> {
    let gap = params.thermal_gap_at(knobs.omega_t);
    let x = params.reduced_gap(gap)?;
    let delta = params.detuning(knobs.omega_t);
    let transverse = params.transverse_rate(gap)?;
    let tanh_half = (x / 2.0).tanh();
    let amplitude = cavity_amplitude(params, knobs.drive)?;
    let coupling = amplitude * params.g_over_hbar;

    let kappa = params.kappa_cpw;
    let cav = params.cavity_detuning();
    let drive_term =
        params.g_over_hbar.powi(2) * knobs.drive.powi(2) / (0.25 * kappa * kappa + cav * cav);
    let relax = 0.25 * transverse * transverse + delta * delta;
    let denom = 2.0 * drive_term + relax;

    let ee = (drive_term + relax / (1.0 + x.exp())) / denom;
    let gg = (drive_term + relax / (1.0 + (-x).exp())) / denom;
    let sum = ee + gg;
    if (sum - 1.0).abs() > 1e-14 {
        return Err(EngineError::InvalidState(format!(
            "population sum rule violated: {sum}"
        )));
    }
    let eg = -0.5 * Complex64::new(2.0 * delta, transverse) * coupling * (tanh_half / denom);
    QubitDensityMatrix::from_populations(ee, gg, eg)
}

/// ∂ρ_ss/∂λ along one knob, by differentiating the closed form.
///
/// Both knob axes enter through a few scalars: the ω knob moves δ and the
/// thermal gap with unit slope, the drive moves A and g⟨a⟩.
pub fn steady_state_derivative_analytic(
    params: &EngineParameters,
    knobs: &Knobs,
    axis: KnobAxis,
) -> Result<Mat2> {
    let gap = params.thermal_gap_at(knobs.omega_t);
    let x = params.reduced_gap(gap)?;
    let delta = params.detuning(knobs.omega_t);
    let transverse = params.transverse_rate(gap)?;
    let tau = (x / 2.0).tanh();
    let response = cavity_response(params)?;
    let coupling = Complex64::new(params.g_over_hbar * knobs.drive, 0.0) / response;
    let kappa = params.kappa_cpw;
    let cav = params.cavity_detuning();
    let lorentz = params.g_over_hbar.powi(2) / (0.25 * kappa * kappa + cav * cav);
    let drive_term = lorentz * knobs.drive.powi(2);
    let relax = 0.25 * transverse * transverse + delta * delta;
    let denom = 2.0 * drive_term + relax;
    let fermi = 1.0 / (1.0 + x.exp());

    // Differentials of (δ, x, Γ_t, A, g⟨a⟩) per unit knob.
    let (d_delta, d_x, d_drive_term, d_coupling) = match axis {
        KnobAxis::OmegaT => (
            1.0,
            1.0 / params.temperature_freq,
            0.0,
            Complex64::new(0.0, 0.0),
        ),
        KnobAxis::Drive => (
            0.0,
            0.0,
            2.0 * lorentz * knobs.drive,
            Complex64::new(params.g_over_hbar, 0.0) / response,
        ),
    };
    let d_transverse = d_x
        * match params.gamma_convention {
            GammaConvention::NetDecay => -params.gamma * 0.5 * (1.0 - tau * tau) / (tau * tau),
            GammaConvention::DecayOnly => -params.gamma * (-x).exp(),
        };
    let d_relax = 0.5 * transverse * d_transverse + 2.0 * delta * d_delta;
    let d_denom = 2.0 * d_drive_term + d_relax;
    let d_fermi = -fermi * (1.0 - fermi) * d_x;
    let d_tau = 0.5 * (1.0 - tau * tau) * d_x;

    let num_ee = drive_term + relax * fermi;
    let d_num_ee = d_drive_term + d_relax * fermi + relax * d_fermi;
    let d_ee = (d_num_ee * denom - num_ee * d_denom) / (denom * denom);

    let p = Complex64::new(2.0 * delta, transverse);
    let d_p = Complex64::new(2.0 * d_delta, d_transverse);
    let d_eg = -0.5 * (d_p * coupling * tau + p * d_coupling * tau + p * coupling * d_tau) / denom
        + 0.5 * p * coupling * tau * d_denom / (denom * denom);
    Ok(Mat2([
        [Complex64::new(d_ee, 0.0), d_eg],
        [d_eg.conj(), Complex64::new(-d_ee, 0.0)],
    ]))
}

/// Bloch vector (x, y, z) with x = 2 Re ρ_eg, y = −2 Im ρ_eg, z = ρ_ee − ρ_gg,
/// so that ρ = (I + xσ_x + yσ_y + zσ_z)/2.
pub fn bloch_vector(rho: &QubitDensityMatrix) -> [f64; 3] {
    let eg = rho.eg();
    [2.0 * eg.re, -2.0 * eg.im, rho.ee() - rho.gg()]
}
