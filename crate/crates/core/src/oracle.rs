//! Independent Lindblad machinery used to cross-check the closed forms.
//!
//! Density matrices are vectorized by column stacking, which matches
//! nalgebra's column-major storage: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{EngineError, Result};
use crate::linalg::{trace_distance, Mat2, SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z};
use crate::model::{
    cavity_amplitude, effective_hamiltonian, steady_state_analytic, thermal_rates,
    EngineParameters, GammaConvention, Knobs, QubitDensityMatrix,
};

pub type CMatrix = DMatrix<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Kernel uniqueness threshold: second-smallest over largest singular value.
pub const KERNEL_GAP: f64 = 1e-8;
/// Accepted steady-state residual ‖L[ρ]‖ relative to ‖L‖.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Largest cavity population allowed in the top Fock level.
pub const TAIL_TOL: f64 = 1e-6;
/// Largest `dt · ‖L‖` accepted by [`propagate`].
pub const STEP_LIMIT: f64 = 0.1;

pub fn mat2_to_dense(m: &Mat2) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, c| m.get(r, c))
}

pub fn dense_to_mat2(m: &CMatrix) -> Result<Mat2> {
    if m.shape() != (2, 2) {
        return Err(EngineError::Dimension {
            expected: 2,
            got: m.nrows(),
        });
    }
    Ok(Mat2([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]))
}

/// Dense superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    matrix: CMatrix,
    dim: usize,
}

impl Liouvillian {
    /// `L[ρ] = −i[H, ρ] + Σ_k γ_k 𝒟[c_k]ρ` with
    /// `𝒟[c]ρ = cρc† − ½(c†cρ + ρc†c)`.
    pub fn from_generator(h: &CMatrix, channels: &[(f64, CMatrix)]) -> Self {
        let d = h.nrows();
        let id = CMatrix::identity(d, d);
        let mut matrix = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
        for (rate, c) in channels {
            if *rate == 0.0 {
                continue;
            }
            let cdc = c.adjoint() * c;
            let jump = c.map(|z| z.conj()).kronecker(c);
            let anti = id.kronecker(&cdc) + cdc.transpose().kronecker(&id);
            matrix += (jump - anti * Complex64::new(0.5, 0.0)) * Complex64::new(*rate, 0.0);
        }
        Liouvillian { matrix, dim: d }
    }

    pub fn zero(dim: usize) -> Self {
        Liouvillian {
            matrix: CMatrix::zeros(dim * dim, dim * dim),
            dim,
        }
    }

    /// Hilbert-space dimension d (the superoperator is d²×d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.matrix * vectorize(rho);
        unvectorize(&v, self.dim)
    }

    /// Power-iteration estimate of the spectral norm.
    pub fn spectral_norm(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64).sin() * 0.25, 0.0));
        let mut sigma = 0.0;
        for _ in 0..200 {
            let norm = v.norm();
            if norm == 0.0 {
                return 0.0;
            }
            v /= Complex64::new(norm, 0.0);
            let w = &self.matrix * &v;
            let next = w.norm();
            v = self.matrix.adjoint() * w;
            if (next - sigma).abs() <= 1e-12 * next {
                return next;
            }
            sigma = next;
        }
        sigma
    }
}

pub fn vectorize(rho: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Reduced-qubit generator with the mean-field Hamiltonian and thermal
/// relaxation: `−i[H̃, ρ] + Γ⁻𝒟[σ⁻]ρ + Γ⁺𝒟[σ⁺]ρ`.
pub fn qubit_liouvillian(params: &EngineParameters, knobs: &Knobs) -> Result<Liouvillian> {
    let h = effective_hamiltonian(params, knobs)?;
    let rates = thermal_rates(params, params.thermal_gap_at(knobs.omega_t))?;
    Ok(Liouvillian::from_generator(
        &mat2_to_dense(h.matrix()),
        &[
            (rates.gamma_minus, mat2_to_dense(&SIGMA_MINUS)),
            (rates.gamma_plus, mat2_to_dense(&SIGMA_PLUS)),
        ],
    ))
}

/// Number of cavity levels kept, `0..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FockTruncation {
    pub n_max: usize,
}

impl FockTruncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(EngineError::Domain("n_max must be at least 1".into()));
        }
        Ok(FockTruncation { n_max })
    }

    /// Starting point of the doubling policy: ⌈4|⟨a⟩|² + 6⌉.
    pub fn initial(params: &EngineParameters, drive: f64) -> Result<Self> {
        let a = cavity_amplitude(params, drive)?;
        Ok(FockTruncation {
            n_max: (4.0 * a.norm_sqr() + 6.0).ceil() as usize,
        })
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn joint_dim(&self) -> usize {
        2 * self.levels()
    }
}

fn annihilation(levels: usize) -> CMatrix {
    CMatrix::from_fn(levels, levels, |r, c| {
        if c == r + 1 {
            Complex64::new((c as f64).sqrt(), 0.0)
        } else {
            C0
        }
    })
}

/// Qubit ⊗ cavity generator in the frame rotating at the pump, with
///
/// ```text
/// H = (δ/2)σ_z + Δ_c a†a + g(σ₊a + σ₋a†) + E_d(a + a†)
/// ```
///
/// and the four thermal channels K⁻𝒟[a], K⁺𝒟[a†], Γ⁻𝒟[σ⁻], Γ⁺𝒟[σ⁺].
/// Joint index is `qubit * (n_max + 1) + photon`.
pub fn joint_liouvillian(
    params: &EngineParameters,
    knobs: &Knobs,
    trunc: FockTruncation,
) -> Result<Liouvillian> {
    let levels = trunc.levels();
    let a = annihilation(levels);
    let ad = a.adjoint();
    let id_c = CMatrix::identity(levels, levels);
    let id_q = CMatrix::identity(2, 2);
    let sz = mat2_to_dense(&SIGMA_Z);
    let sp = mat2_to_dense(&SIGMA_PLUS);
    let sm = mat2_to_dense(&SIGMA_MINUS);
    let re = |x: f64| Complex64::new(x, 0.0);

    let delta = params.detuning(knobs.omega_t);
    let h = sz.kronecker(&id_c) * re(delta / 2.0)
        + id_q.kronecker(&(&ad * &a)) * re(params.cavity_detuning())
        + (sp.kronecker(&a) + sm.kronecker(&ad)) * re(params.g_over_hbar)
        + id_q.kronecker(&(&a + &ad)) * re(knobs.drive);

    let rates = thermal_rates(params, params.thermal_gap_at(knobs.omega_t))?;
    Ok(Liouvillian::from_generator(
        &h,
        &[
            (rates.k_minus, id_q.kronecker(&a)),
            (rates.k_plus, id_q.kronecker(&ad)),
            (rates.gamma_minus, sm.kronecker(&id_c)),
            (rates.gamma_plus, sp.kronecker(&id_c)),
        ],
    ))
}

/// The unique density matrix annihilated by `l`.
///
/// Taken as the right singular vector of the smallest singular value, then
/// Hermitized and normalized to unit trace.
pub fn steady_state_nullspace(l: &Liouvillian) -> Result<CMatrix> {
    let svd = l.matrix.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = svd.singular_values[order[0]];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if largest == 0.0 || second / largest <= KERNEL_GAP {
        return Err(EngineError::AmbiguousKernel {
            smallest,
            second,
            largest,
        });
    }

    let kernel = DVector::from_fn(v_t.ncols(), |i, _| v_t[(order[0], i)].conj());
    let x = unvectorize(&kernel, l.dim);
    let x = (&x + x.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = x.trace();
    if tr.norm() == 0.0 {
        return Err(EngineError::Domain("kernel vector is traceless".into()));
    }
    let rho = x / tr;

    let residual = l.apply(&rho).norm();
    let scale = l.matrix.norm();
    if residual > RESIDUAL_TOL * scale {
        return Err(EngineError::Domain(format!(
            "steady-state residual {residual:e} exceeds {:e}",
            RESIDUAL_TOL * scale
        )));
    }
    Ok(rho)
}

/// Fixed-step classical RK4 integration of ρ̇ = L[ρ] up to `t_final`.
///
/// The step actually used is `t_final / ⌈t_final / dt⌉ ≤ dt`.
pub fn propagate(l: &Liouvillian, rho0: &CMatrix, t_final: f64, dt: f64) -> Result<CMatrix> {
    if rho0.shape() != (l.dim, l.dim) {
        return Err(EngineError::Dimension {
            expected: l.dim,
            got: rho0.nrows(),
        });
    }
    if t_final.is_nan() || t_final < 0.0 {
        return Err(EngineError::Domain(format!(
            "negative propagation time {t_final:e}"
        )));
    }
    if t_final == 0.0 {
        return Ok(rho0.clone());
    }
    let norm = l.spectral_norm();
    let limit = if norm > 0.0 {
        STEP_LIMIT / norm
    } else {
        f64::INFINITY
    };
    if dt.is_nan() || dt <= 0.0 || dt > limit {
        return Err(EngineError::StepSize { dt, limit });
    }

    let steps = (t_final / dt).ceil() as usize;
    let h = Complex64::new(t_final / steps as f64, 0.0);
    let half = h * 0.5;
    let sixth = h / 6.0;
    let m = &l.matrix;
    let mut v = vectorize(rho0);
    for _ in 0..steps {
        let k1 = m * &v;
        let k2 = m * (&v + &k1 * half);
        let k3 = m * (&v + &k2 * half);
        let k4 = m * (&v + &k3 * h);
        v += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * sixth;
    }
    Ok(unvectorize(&v, l.dim))
}

fn check_joint_dim(joint: &CMatrix, trunc: FockTruncation) -> Result<()> {
    let expected = trunc.joint_dim();
    if joint.shape() != (expected, expected) {
        return Err(EngineError::Dimension {
            expected,
            got: joint.nrows(),
        });
    }
    Ok(())
}

/// Partial trace over the cavity.
pub fn reduced_qubit_state(joint: &CMatrix, trunc: FockTruncation) -> Result<QubitDensityMatrix> {
    check_joint_dim(joint, trunc)?;
    let n = trunc.levels();
    let mut m = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m.0[i][j] = (0..n).map(|k| joint[(i * n + k, j * n + k)]).sum();
        }
    }
    QubitDensityMatrix::new(m)
}

/// Partial trace over the qubit.
pub fn reduced_cavity_state(joint: &CMatrix, trunc: FockTruncation) -> Result<CMatrix> {
    check_joint_dim(joint, trunc)?;
    let n = trunc.levels();
    Ok(CMatrix::from_fn(n, n, |r, c| {
        joint[(r, c)] + joint[(n + r, n + c)]
    }))
}

/// Steady state of the joint model at a fixed truncation, rejecting it when
/// the top Fock level holds more than [`TAIL_TOL`].
pub fn joint_steady_state(
    params: &EngineParameters,
    knobs: &Knobs,
    trunc: FockTruncation,
) -> Result<CMatrix> {
    let l = joint_liouvillian(params, knobs, trunc)?;
    let rho = steady_state_nullspace(&l)?;
    let cavity = reduced_cavity_state(&rho, trunc)?;
    let tail = cavity[(trunc.n_max, trunc.n_max)].re;
    if tail >= TAIL_TOL {
        return Err(EngineError::Truncation {
            n_max: trunc.n_max,
            tail,
        });
    }
    Ok(rho)
}

/// Joint steady state with the truncation chosen by doubling from
/// [`FockTruncation::initial`].
pub fn joint_steady_state_auto(
    params: &EngineParameters,
    knobs: &Knobs,
) -> Result<(CMatrix, FockTruncation)> {
    const MAX_LEVELS: usize = 128;
    let mut trunc = FockTruncation::initial(params, knobs.drive)?;
    loop {
        match joint_steady_state(params, knobs, trunc) {
            Ok(rho) => return Ok((rho, trunc)),
            Err(EngineError::Truncation { .. }) if 2 * trunc.n_max < MAX_LEVELS => {
                trunc = FockTruncation::new(2 * trunc.n_max)?;
            }
            Err(e) => return Err(e),
        }
    }
}

/// ⟨a⟩ of the driven, damped cavity alone (no qubit, zero temperature),
/// from its numerical steady state.
pub fn cavity_mean_field(
    params: &EngineParameters,
    drive: f64,
    trunc: FockTruncation,
) -> Result<Complex64> {
    let levels = trunc.levels();
    let a = annihilation(levels);
    let ad = a.adjoint();
    let h = &ad * &a * Complex64::new(params.cavity_detuning(), 0.0)
        + (&a + &ad) * Complex64::new(drive, 0.0);
    let l = Liouvillian::from_generator(&h, &[(params.kappa_cpw, a.clone())]);
    let rho = steady_state_nullspace(&l)?;
    Ok((&a * rho).trace())
}

/// Qubit part of the rotating-frame Hamiltonian with the cavity operator
/// replaced by a numerically obtained mean field.
pub fn mean_field_hamiltonian(
    params: &EngineParameters,
    knobs: &Knobs,
    trunc: FockTruncation,
) -> Result<Mat2> {
    let alpha = cavity_mean_field(params, knobs.drive, trunc)?;
    let delta = params.detuning(knobs.omega_t);
    let g = params.g_over_hbar;
    Ok(SIGMA_Z.scale_re(delta / 2.0)
        + SIGMA_PLUS.scale(alpha * g)
        + SIGMA_MINUS.scale(alpha.conj() * g))
}

/// Trace distance between two Hermitian matrices of equal size.
pub fn dense_trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    let herm = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
    0.5 * herm
        .symmetric_eigenvalues()
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

/// Closed-form vs. null-space steady state at one knob point.
pub fn closed_form_distance(params: &EngineParameters, knobs: &Knobs) -> Result<f64> {
    let analytic = steady_state_analytic(params, knobs)?;
    let numeric = steady_state_nullspace(&qubit_liouvillian(params, knobs)?)?;
    Ok(trace_distance(analytic.matrix(), &dense_to_mat2(&numeric)?))
}

/// Uniform draws from the knob window.
pub fn sample_knobs(params: &EngineParameters, n: usize, seed: u64) -> Vec<Knobs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w0, w1) = params.omega_knob_range;
    let (e0, e1) = params.drive_knob_range;
    (0..n)
        .map(|_| Knobs::new(rng.random_range(w0..=w1), rng.random_range(e0..=e1)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstPoint {
    pub knobs: Knobs,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionTrial {
    pub convention: GammaConvention,
    pub max_distance: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointReduction {
    pub g_scale: f64,
    pub n_max: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Worst closed-form vs. null-space distance under the configured Γ convention.
    pub worst: WorstPoint,
    /// The tabulated closed form (Γ/tanh) tested against generators built
    /// under each Γ convention.
    pub gamma_trials: Vec<ConventionTrial>,
    pub gamma_verdict: Option<GammaConvention>,
    pub joint: Option<Vec<JointReduction>>,
    pub passed: bool,
}

/// Acceptance threshold for closed-form vs. null-space agreement.
pub const ORACLE_TOL: f64 = 1e-8;

fn worst_distance(params: &EngineParameters, knobs: &[Knobs]) -> Result<WorstPoint> {
    let mut worst = WorstPoint {
        knobs: knobs[0],
        distance: -1.0,
    };
    for k in knobs {
        let d = closed_form_distance(params, k)?;
        if d > worst.distance || d.is_nan() {
            worst = WorstPoint {
                knobs: *k,
                distance: d,
            };
        }
    }
    Ok(worst)
}

/// Worst distance between the tabulated closed form (Γ/tanh, evaluated as
/// written) and the generator whose rates follow `convention`.
pub fn gamma_convention_trial(
    params: &EngineParameters,
    knobs: &[Knobs],
    convention: GammaConvention,
) -> Result<ConventionTrial> {
    let mut tabulated = params.clone();
    tabulated.gamma_convention = GammaConvention::NetDecay;
    let mut generator = params.clone();
    generator.gamma_convention = convention;
    let mut max_distance: f64 = 0.0;
    for k in knobs {
        let analytic = steady_state_analytic(&tabulated, k)?;
        let numeric = steady_state_nullspace(&qubit_liouvillian(&generator, k)?)?;
        max_distance =
            max_distance.max(trace_distance(analytic.matrix(), &dense_to_mat2(&numeric)?));
    }
    Ok(ConventionTrial {
        convention,
        max_distance,
        matches: max_distance < ORACLE_TOL,
    })
}

/// Reduced joint steady state vs. closed form with g scaled by each factor.
pub fn joint_reduction_distances(
    params: &EngineParameters,
    knobs: &Knobs,
    g_scales: &[f64],
) -> Result<Vec<JointReduction>> {
    g_scales
        .iter()
        .map(|&s| {
            let mut p = params.clone();
            p.g_over_hbar *= s;
            let (rho, trunc) = joint_steady_state_auto(&p, knobs)?;
            let reduced = reduced_qubit_state(&rho, trunc)?;
            let analytic = steady_state_analytic(&p, knobs)?;
            Ok(JointReduction {
                g_scale: s,
                n_max: trunc.n_max,
                distance: trace_distance(reduced.matrix(), analytic.matrix()),
            })
        })
        .collect()
}

/// Knob point for the joint-model check: mid ω window, lowest drive.
pub fn joint_check_knobs(params: &EngineParameters) -> Knobs {
    let (w0, w1) = params.omega_knob_range;
    Knobs::new(0.5 * (w0 + w1), params.drive_knob_range.0)
}

/// g scale factors of the joint-model reduction check: the halving ladder
/// from full coupling, then the same ladder from g/100.
pub const JOINT_G_SCALES: [f64; 8] = [1.0, 0.5, 0.25, 0.125, 0.01, 0.005, 0.0025, 0.00125];

pub fn run_oracle_check(
    params: &EngineParameters,
    samples: usize,
    seed: u64,
    joint: bool,
) -> Result<OracleReport> {
    if samples == 0 {
        return Err(EngineError::config("samples", "must be at least 1"));
    }
    let knobs = sample_knobs(params, samples, seed);
    let worst = worst_distance(params, &knobs)?;
    let gamma_trials = [GammaConvention::NetDecay, GammaConvention::DecayOnly]
        .into_iter()
        .map(|c| gamma_convention_trial(params, &knobs, c))
        .collect::<Result<Vec<_>>>()?;
    let matching: Vec<_> = gamma_trials.iter().filter(|t| t.matches).collect();
    let gamma_verdict = match matching.as_slice() {
        [only] => Some(only.convention),
        _ => None,
    };
    let joint = if joint {
        Some(joint_reduction_distances(
            params,
            &joint_check_knobs(params),
            &JOINT_G_SCALES,
        )?)
    } else {
        None
    };
    let passed = worst.distance < ORACLE_TOL && gamma_verdict == Some(GammaConvention::NetDecay);
    Ok(OracleReport {
        samples,
        seed,
        tolerance: ORACLE_TOL,
        worst,
        gamma_trials,
        gamma_verdict,
        joint,
        passed,
    })
}

/// Random Hermitian, unit-trace matrix (not necessarily positive), for
/// trace-preservation checks.
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let x = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = (&x + x.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = h.trace();
    if tr.norm() > 1e-3 {
        h / tr
    } else {
        h
    }
}

/// Random density matrix X X† / tr(X X†).
pub fn random_density(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let x = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let p = &x * x.adjoint();
    let tr = p.trace();
    p / tr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mhz_to_rad_s, FreqInterpretation, ThermalGap};

    fn reference() -> EngineParameters {
        EngineParameters::reference()
    }

    #[test]
    fn superoperator_matches_direct_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(3, &mut rng);
        let c = CMatrix::from_fn(3, 3, |r, k| {
            Complex64::new((r + 2 * k) as f64 * 0.1, (r as f64) - (k as f64))
        });
        let l = Liouvillian::from_generator(&h, &[(0.7, c.clone())]);
        let rho = random_density(3, &mut rng);
        let cd = c.adjoint();
        let direct = (&h * &rho - &rho * &h) * (-I)
            + (&c * &rho * &cd - (&cd * &c * &rho + &rho * &cd * &c) * Complex64::new(0.5, 0.0))
                * Complex64::new(0.7, 0.0);
        assert!((l.apply(&rho) - direct).norm() < 1e-12);
    }

    #[test]
    fn unitary_part_vanishes_on_commuting_state() {
        // Zero rates: the generator is −i[H, ·].
        let h = mat2_to_dense(&Mat2::from_real_diag(3.0, -3.0));
        let l = Liouvillian::from_generator(&h, &[(0.0, mat2_to_dense(&SIGMA_MINUS))]);
        let rho = mat2_to_dense(&Mat2::from_real_diag(0.3, 0.7));
        assert_eq!(l.apply(&rho).norm(), 0.0);
    }

    #[test]
    fn trace_is_preserved() {
        let p = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ls = [
            qubit_liouvillian(&p, &Knobs::new(mhz_to_rad_s(333.0), mhz_to_rad_s(1.7))).unwrap(),
            joint_liouvillian(
                &p,
                &Knobs::new(mhz_to_rad_s(600.0), mhz_to_rad_s(0.4)),
                FockTruncation::new(4).unwrap(),
            )
            .unwrap(),
        ];
        for l in &ls {
            let scale = l.matrix().norm();
            for _ in 0..100 {
                let rho = random_hermitian(l.dim(), &mut rng);
                // Relative to ‖L‖: entries are angular frequencies of order 1e9.
                assert!(l.apply(&rho).trace().norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn undriven_kernel_is_gibbs() {
        let p = reference();
        let w = mhz_to_rad_s(700.0);
        let rho =
            steady_state_nullspace(&qubit_liouvillian(&p, &Knobs::new(w, 0.0)).unwrap()).unwrap();
        let gibbs = QubitDensityMatrix::thermal(w, p.temperature_freq);
        assert!(trace_distance(&dense_to_mat2(&rho).unwrap(), gibbs.matrix()) < 1e-12);
    }

    #[test]
    fn null_space_matches_closed_form_at_table_points() {
        for (fi, tg) in [
            (FreqInterpretation::Detuning, ThermalGap::RotatingFrame),
            (FreqInterpretation::Detuning, ThermalGap::LabFrame),
            (FreqInterpretation::LabFrame, ThermalGap::RotatingFrame),
        ] {
            let p = reference().with_conventions(fi, tg);
            for k in sample_knobs(&p, 25, 11) {
                let analytic = steady_state_analytic(&p, &k).unwrap();
                let numeric = dense_to_mat2(
                    &steady_state_nullspace(&qubit_liouvillian(&p, &k).unwrap()).unwrap(),
                )
                .unwrap();
                for r in 0..2 {
                    for c in 0..2 {
                        let diff = (analytic.matrix().get(r, c) - numeric.get(r, c)).norm();
                        assert!(
                            diff < 1e-9,
                            "{fi:?}/{tg:?} at {k:?}: entry ({r},{c}) off by {diff:e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn ambiguous_kernel_is_reported() {
        let l = Liouvillian::zero(2);
        assert!(matches!(
            steady_state_nullspace(&l),
            Err(EngineError::AmbiguousKernel { .. })
        ));
        // Pure dephasing-free unitary: every diagonal state is stationary.
        let h = mat2_to_dense(&Mat2::from_real_diag(1.0, -1.0));
        let l = Liouvillian::from_generator(&h, &[]);
        assert!(steady_state_nullspace(&l).is_err());
    }

    #[test]
    fn propagation_trivial_cases() {
        let p = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho0 = random_density(2, &mut rng);
        let l = qubit_liouvillian(&p, &Knobs::new(mhz_to_rad_s(200.0), mhz_to_rad_s(1.0))).unwrap();
        assert_eq!(propagate(&l, &rho0, 0.0, 1e-12).unwrap(), rho0);
        let zero = Liouvillian::zero(2);
        assert_eq!(propagate(&zero, &rho0, 1.0, 0.01).unwrap(), rho0);
        let limit = STEP_LIMIT / l.spectral_norm();
        assert!(matches!(
            propagate(&l, &rho0, 1e-6, 2.0 * limit),
            Err(EngineError::StepSize { .. })
        ));
    }

    #[test]
    fn propagation_relaxes_to_kernel() {
        let p = reference();
        let k = Knobs::new(mhz_to_rad_s(480.0), mhz_to_rad_s(0.9));
        let l = qubit_liouvillian(&p, &k).unwrap();
        let rates = thermal_rates(&p, p.thermal_gap_at(k.omega_t)).unwrap();
        let dt = 0.9 * STEP_LIMIT / l.spectral_norm();
        let rho0 = mat2_to_dense(&Mat2::from_real_diag(1.0, 0.0));
        let end = propagate(&l, &rho0, 20.0 / rates.gamma_minus, dt).unwrap();
        let ss = steady_state_nullspace(&l).unwrap();
        assert!(dense_trace_distance(&end, &ss) < 1e-6);
        assert!((end.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn step_halving_changes_endpoint_little() {
        let p = reference();
        let l = qubit_liouvillian(&p, &Knobs::new(mhz_to_rad_s(150.0), mhz_to_rad_s(0.5))).unwrap();
        let dt = 0.9 * STEP_LIMIT / l.spectral_norm();
        let rho0 = mat2_to_dense(&Mat2::from_real_diag(0.0, 1.0));
        let t = 2e-7;
        let a = propagate(&l, &rho0, t, dt).unwrap();
        let b = propagate(&l, &rho0, t, dt / 2.0).unwrap();
        assert!((a - b).norm() <= 1e-8);
    }

    #[test]
    fn partial_trace_of_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trunc = FockTruncation::new(3).unwrap();
        let q = random_density(2, &mut rng);
        let c = random_density(4, &mut rng);
        let joint = q.kronecker(&c);
        let reduced = reduced_qubit_state(&joint, trunc).unwrap();
        assert!((mat2_to_dense(reduced.matrix()) - &q).norm() < 1e-15);
        let cav = reduced_cavity_state(&joint, trunc).unwrap();
        assert!((cav - c).norm() < 1e-15);

        let mixed = CMatrix::identity(8, 8) / Complex64::new(8.0, 0.0);
        let r = reduced_qubit_state(&mixed, trunc).unwrap();
        assert_eq!(
            *r.matrix(),
            QubitDensityMatrix::maximally_mixed().matrix().clone()
        );

        assert!(matches!(
            reduced_qubit_state(&CMatrix::identity(6, 6), trunc),
            Err(EngineError::Dimension { .. })
        ));
    }

    fn cold(mut p: EngineParameters) -> EngineParameters {
        // Negligible thermal photons: e^{−ω_CPW/T} ≈ 1e−21.
        p.temperature_freq = p.omega_cpw / 48.0;
        p
    }

    #[test]
    fn uncoupled_cavity_is_coherent() {
        let mut p = cold(reference());
        // With g = 0 the cavity block does not see the qubit rates; Γ stays
        // finite so the joint kernel is unique.
        p.g_over_hbar = 0.0;
        let drive = mhz_to_rad_s(0.6);
        let k = Knobs::new(mhz_to_rad_s(300.0), drive);
        let (rho, trunc) = joint_steady_state_auto(&p, &k).unwrap();
        let cav = reduced_cavity_state(&rho, trunc).unwrap();
        let a = annihilation(trunc.levels());
        let mean = (&a * &cav).trace();
        let number = (a.adjoint() * &a * &cav).trace().re;
        let want = cavity_amplitude(&p, drive).unwrap();
        assert!((mean - want).norm() < 1e-6, "{mean} vs {want}");
        assert!((number - want.norm_sqr()).abs() < 1e-6);
    }

    #[test]
    fn uncoupled_joint_state_factorizes() {
        let mut p = reference();
        p.g_over_hbar = 0.0;
        let k = Knobs::new(mhz_to_rad_s(650.0), mhz_to_rad_s(0.3));
        let (rho, trunc) = joint_steady_state_auto(&p, &k).unwrap();
        let q = reduced_qubit_state(&rho, trunc).unwrap();
        let c = reduced_cavity_state(&rho, trunc).unwrap();
        let product = mat2_to_dense(q.matrix()).kronecker(&c);
        assert!((product - &rho).norm() < 1e-10);
        let thermal = QubitDensityMatrix::thermal(k.omega_t, p.temperature_freq);
        assert!(trace_distance(q.matrix(), thermal.matrix()) < 1e-10);
    }

    #[test]
    fn weak_coupling_joint_reduces_to_closed_form() {
        let p = reference();
        let d = joint_reduction_distances(&p, &joint_check_knobs(&p), &JOINT_G_SCALES).unwrap();
        let at_hundredth = d.iter().find(|j| j.g_scale == 0.01).unwrap();
        assert!(at_hundredth.distance < 1e-3);
        for w in d.windows(2) {
            assert!(w[1].distance < w[0].distance, "{d:?}");
        }
    }

    #[test]
    fn truncation_too_small_is_rejected() {
        let p = reference();
        let k = Knobs::new(mhz_to_rad_s(500.0), mhz_to_rad_s(1.5));
        let err = joint_steady_state(&p, &k, FockTruncation::new(2).unwrap()).unwrap_err();
        assert!(matches!(err, EngineError::Truncation { n_max: 2, .. }));
    }

    #[test]
    fn mean_field_hamiltonian_matches_model() {
        let p = reference();
        let k = Knobs::new(mhz_to_rad_s(500.0), mhz_to_rad_s(1.0));
        let trunc = FockTruncation::initial(&p, k.drive).unwrap();
        let oracle = mean_field_hamiltonian(&p, &k, trunc).unwrap();
        let model = effective_hamiltonian(&p, &k).unwrap();
        assert!((oracle - *model.matrix()).max_abs() < 1e-8 * model.matrix().max_abs());
    }

    #[test]
    fn gamma_verdict_selects_net_decay() {
        let p = reference();
        let report = run_oracle_check(&p, 40, 3, false).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.gamma_verdict, Some(GammaConvention::NetDecay));
        let decay_only = report
            .gamma_trials
            .iter()
            .find(|t| t.convention == GammaConvention::DecayOnly)
            .unwrap();
        assert!(!decay_only.matches);
    }

    #[test]
    fn undriven_samples_agree_to_machine_precision() {
        let p = reference();
        for k in sample_knobs(&p, 50, 4) {
            let d = closed_form_distance(&p, &Knobs::new(k.omega_t, 0.0)).unwrap();
            assert!(d < 1e-12, "{d:e}");
        }
    }
}
