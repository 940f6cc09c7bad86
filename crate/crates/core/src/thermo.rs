//! Entropy, passive states, and quasi-static stroke integrals.
//!
//! Sign convention: work and heat are counted positive when energy flows into
//! the qubit, so an engine cycle has ΣW < 0.

use serde::Serialize;

use crate::error::{EngineError, Result};
use crate::linalg::Mat2;
use crate::model::{
    bloch_vector, effective_hamiltonian, hamiltonian_derivative, steady_state_analytic,
    steady_state_derivative_analytic, EffectiveHamiltonian, EngineParameters, KnobAxis, Knobs,
    QubitDensityMatrix, HERMITIAN_TOL,
};
use crate::quadrature::{bisect_root, integrate, QuadratureOptions};

/// Finite-difference step, as a fraction of the knob span, for the reference
/// derivative [`steady_state_derivative`].
pub const FD_REL_STEP: f64 = 1e-4;
/// Relative bracket width for roots of the heat integrand.
pub const ROOT_REL_WIDTH: f64 = 1e-10;

/// S(ρ) in nats, from the Bloch norm.
pub fn von_neumann_entropy(rho: &QubitDensityMatrix) -> f64 {
    let [x, y, z] = bloch_vector(rho);
    let r = (x * x + y * y + z * z).sqrt().min(1.0);
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    h(0.5 * (1.0 + r)) + h(0.5 * (1.0 - r))
}

/// The unitary orbit's minimum-energy member: ρ's spectrum placed on the
/// eigenbasis of `h`, larger weight on the lower level.
pub fn passive_state(rho: &QubitDensityMatrix, h: &Mat2) -> Result<QubitDensityMatrix> {
    let [p_low, p_high] = rho.matrix().hermitian_eigenvalues();
    let eig = h.hermitian_eigen();
    let ground = Mat2::outer(&eig.vectors[0], &eig.vectors[0]);
    let excited = Mat2::outer(&eig.vectors[1], &eig.vectors[1]);
    QubitDensityMatrix::new((ground.scale_re(p_high) + excited.scale_re(p_low)).hermitian_part())
}

/// Coefficients (h_x, h_y, h_z) of the traceless part of a Hermitian `m`,
/// so that tr(ρ m) = tr(m)/2 + h·r for Bloch vector r.
fn pauli_vector(m: &Mat2) -> [f64; 3] {
    let off = m.get(0, 1);
    [off.re, -off.im, 0.5 * (m.get(0, 0).re - m.get(1, 1).re)]
}

/// Bloch vector of ρ − π for Bloch vector `r` and Hamiltonian vector `hv`,
/// with its component along n̂ = hv/|hv|. The component r + r·n̂ is formed as
/// |n̂ × r|² / (r − r·n̂) when r·n̂ < 0, so a passive ρ gives exactly zero
/// rather than rounding noise. None when `hv` vanishes.
fn active_part(r: [f64; 3], hv: [f64; 3]) -> Option<([f64; 3], f64)> {
    let norm = |v: [f64; 3]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let eps = norm(hv);
    if eps == 0.0 {
        return None;
    }
    let n = hv.map(|c| c / eps);
    let radius = norm(r);
    let along = n[0] * r[0] + n[1] * r[1] + n[2] * r[2];
    let perp = [0, 1, 2].map(|k| r[k] - along * n[k]);
    let parallel = if along >= 0.0 {
        radius + along
    } else {
        let cross = [
            n[1] * r[2] - n[2] * r[1],
            n[2] * r[0] - n[0] * r[2],
            n[0] * r[1] - n[1] * r[0],
        ];
        cross.iter().map(|c| c * c).sum::<f64>() / (radius - along)
    };
    Some(([0, 1, 2].map(|k| parallel * n[k] + perp[k]), parallel))
}

/// tr(ρH) − tr(πH) = ε (r + r·n̂), never negative.
pub fn ergotropy(rho: &QubitDensityMatrix, h: &Mat2) -> Result<f64> {
    if h.hermiticity_defect() > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(EngineError::InvalidState(format!(
            "Hamiltonian not Hermitian: {:e}",
            h.hermiticity_defect()
        )));
    }
    let hv = pauli_vector(h);
    Ok(match active_part(bloch_vector(rho), hv) {
        Some((_, parallel)) => hv.iter().map(|c| c * c).sum::<f64>().sqrt() * parallel,
        None => 0.0,
    })
}

/// One leg of a cycle: `axis` swept from `from` to `to` with the other knob
/// held at `fixed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrokeSpec {
    pub axis: KnobAxis,
    pub fixed: f64,
    pub from: f64,
    pub to: f64,
    pub n_points: usize,
}

impl StrokeSpec {
    pub fn new(axis: KnobAxis, fixed: f64, from: f64, to: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(EngineError::config(
                "points_per_stroke",
                format!("need at least 2, got {n_points}"),
            ));
        }
        if !(fixed.is_finite() && from.is_finite() && to.is_finite()) {
            return Err(EngineError::Domain(
                "stroke endpoints must be finite".into(),
            ));
        }
        Ok(StrokeSpec {
            axis,
            fixed,
            from,
            to,
            n_points,
        })
    }

    pub fn knobs_at(&self, lambda: f64) -> Knobs {
        match self.axis {
            KnobAxis::OmegaT => Knobs::new(lambda, self.fixed),
            KnobAxis::Drive => Knobs::new(self.fixed, lambda),
        }
    }

    pub fn start(&self) -> Knobs {
        self.knobs_at(self.from)
    }

    pub fn end(&self) -> Knobs {
        self.knobs_at(self.to)
    }

    pub fn is_degenerate(&self) -> bool {
        self.from == self.to
    }

    pub fn span(&self) -> f64 {
        (self.to - self.from).abs()
    }

    /// (min, max) of the swept knob.
    pub fn bounds(&self) -> (f64, f64) {
        (self.from.min(self.to), self.from.max(self.to))
    }
}

/// Steady state and Hamiltonian at one knob point.
fn state_at(params: &EngineParameters, knobs: &Knobs) -> Result<(QubitDensityMatrix, Mat2)> {
    let rho = steady_state_analytic(params, knobs)?;
    let h = effective_hamiltonian(params, knobs)?.0;
    Ok((rho, h))
}

/// Richardson-extrapolated derivative of a matrix-valued function.
///
/// Central differences at h and h/2 when both stencils fit in `[lo, hi]`,
/// otherwise the second-order one-sided rule pointing into the interval.
fn derivative<const N: usize, F>(mut f: F, x: f64, h: f64, lo: f64, hi: f64) -> Result<[Mat2; N]>
where
    F: FnMut(f64) -> Result<[Mat2; N]>,
{
    let combine = |terms: &[(f64, [Mat2; N])], denom: f64| {
        let mut out = [Mat2::zeros(); N];
        for (w, v) in terms {
            for k in 0..N {
                out[k] = out[k] + v[k].scale_re(*w);
            }
        }
        out.map(|m| m.scale_re(1.0 / denom))
    };
    if x - h >= lo && x + h <= hi {
        let (p1, m1) = (f(x + h)?, f(x - h)?);
        let (p2, m2) = (f(x + 0.5 * h)?, f(x - 0.5 * h)?);
        // (4 D(h/2) − D(h)) / 3 with D(s) = (f(x+s) − f(x−s)) / 2s
        return Ok(combine(
            &[(8.0, p2), (-8.0, m2), (-1.0, p1), (1.0, m1)],
            6.0 * h,
        ));
    }
    let s = if x + 2.0 * h <= hi { h } else { -h };
    let f0 = f(x)?;
    let (f_half, f_one, f_two) = (f(x + 0.5 * s)?, f(x + s)?, f(x + 2.0 * s)?);
    // D(s) = (−3f₀ + 4f(s) − f(2s)) / 2s, extrapolated as (4 D(s/2) − D(s)) / 3
    Ok(combine(
        &[(-21.0, f0), (32.0, f_half), (-12.0, f_one), (1.0, f_two)],
        6.0 * s,
    ))
}

/// ∂ρ_ss/∂λ along `axis` at `knobs` by Richardson-extrapolated central
/// differences with step `h`. Reference for the analytic derivative.
pub fn steady_state_derivative(
    params: &EngineParameters,
    knobs: &Knobs,
    axis: KnobAxis,
    h: f64,
) -> Result<Mat2> {
    let x = knobs.get(axis);
    let [d] = derivative(
        |l| Ok([*steady_state_analytic(params, &knobs.with(axis, l))?.matrix()]),
        x,
        h,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )?;
    Ok(d)
}

/// Pointwise integrands [work, heat, passive heat, ergotropy work] at λ.
///
/// The passive part uses the qubit identity tr(∂π H̃) = −ε ∂r/∂λ, with ε the
/// half-gap of H̃ and r the Bloch radius: only π's populations change the
/// energy, and they are (1 ± r)/2 on the H̃ eigenbasis. The last entry is
/// tr((ρ − π) ∂H̃/∂λ), which turns the endpoint ergotropies into Δ𝒲.
fn integrands(
    params: &EngineParameters,
    stroke: &StrokeSpec,
    dh: &Mat2,
    lambda: f64,
) -> Result<[f64; 4]> {
    let knobs = stroke.knobs_at(lambda);
    let (rho, h) = state_at(params, &knobs)?;
    let d_rho = steady_state_derivative_analytic(params, &knobs, stroke.axis)?;
    let [x, y, z] = bloch_vector(&rho);
    let r = (x * x + y * y + z * z).sqrt();
    let d_bloch = [
        2.0 * d_rho.get(0, 1).re,
        -2.0 * d_rho.get(0, 1).im,
        2.0 * d_rho.get(0, 0).re,
    ];
    let d_r = if r > 0.0 {
        (x * d_bloch[0] + y * d_bloch[1] + z * d_bloch[2]) / r
    } else {
        0.0
    };
    let eps = EffectiveHamiltonian(h).half_gap();
    let ergotropy_work = match active_part([x, y, z], pauli_vector(&h)) {
        Some((v, _)) => {
            let dv = pauli_vector(dh);
            v[0] * dv[0] + v[1] * dv[1] + v[2] * dv[2]
        }
        None => (*rho.matrix() - *passive_state(&rho, &h)?.matrix()).trace_product(dh),
    };
    Ok([
        rho.expectation(dh),
        d_rho.trace_product(&h),
        -eps * d_r,
        ergotropy_work,
    ])
}

fn heat_integrand(params: &EngineParameters, stroke: &StrokeSpec, lambda: f64) -> Result<f64> {
    let knobs = stroke.knobs_at(lambda);
    let h = effective_hamiltonian(params, &knobs)?.0;
    Ok(steady_state_derivative_analytic(params, &knobs, stroke.axis)?.trace_product(&h))
}

/// Per-stroke energetics; see [`stroke_energetics`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StrokeEnergetics {
    pub work: f64,
    pub heat: f64,
    pub positive_heat: f64,
    pub passive_heat: f64,
    pub ergotropy_change: f64,
}

/// Knob points where the Hamiltonian is degenerate inside the stroke: only
/// possible on an ω stroke at zero coupling, where δ changes sign.
fn level_crossings(params: &EngineParameters, stroke: &StrokeSpec) -> Result<Vec<f64>> {
    if stroke.axis != KnobAxis::OmegaT {
        return Ok(Vec::new());
    }
    let h = effective_hamiltonian(params, &stroke.start())?;
    if h.coupling().norm() != 0.0 {
        return Ok(Vec::new());
    }
    let (d0, d1) = (params.detuning(stroke.from), params.detuning(stroke.to));
    if d0 * d1 >= 0.0 {
        return Ok(Vec::new());
    }
    // δ is affine in the knob.
    Ok(vec![
        stroke.from + (stroke.to - stroke.from) * d0 / (d0 - d1),
    ])
}

/// Splits `[from, to]` at interior `cuts`, preserving direction.
fn segments(from: f64, to: f64, mut cuts: Vec<f64>) -> Vec<(f64, f64)> {
    if to < from {
        cuts.sort_by(|a, b| b.total_cmp(a));
    } else {
        cuts.sort_by(f64::total_cmp);
    }
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut a = from;
    for c in cuts {
        out.push((a, c));
        a = c;
    }
    out.push((a, to));
    out
}

/// [W, Q, 𝒬, Δ𝒲] from one shared grid per segment.
///
/// Δ𝒲 = ∫ tr(∂(ρ − π)/∂λ H̃) dλ is taken by parts, as the endpoint change of
/// ergotropy minus ∫ tr((ρ − π) ∂H̃/∂λ) dλ, so that 𝒬 + Δ𝒲 = Q is a check
/// between independently integrated quantities rather than an identity.
fn stroke_integrals(
    params: &EngineParameters,
    stroke: &StrokeSpec,
    opts: &QuadratureOptions,
) -> Result<[f64; 4]> {
    if stroke.is_degenerate() {
        return Ok([0.0; 4]);
    }
    let dh = hamiltonian_derivative(params, stroke.axis)?;
    let mut total = [0.0; 4];
    for (a, b) in segments(stroke.from, stroke.to, level_crossings(params, stroke)?) {
        let sub = StrokeSpec {
            from: a,
            to: b,
            ..*stroke
        };
        let r = integrate(
            |l| integrands(params, &sub, &dh, l),
            a,
            b,
            stroke.n_points,
            opts,
        )?;
        for (t, v) in total.iter_mut().zip(r.values) {
            *t += v;
        }
    }
    let ergotropy_at = |k: Knobs| -> Result<f64> {
        let (rho, h) = state_at(params, &k)?;
        ergotropy(&rho, &h)
    };
    total[3] = ergotropy_at(stroke.end())? - ergotropy_at(stroke.start())? - total[3];
    Ok(total)
}

pub fn stroke_work(params: &EngineParameters, stroke: &StrokeSpec) -> Result<f64> {
    stroke_work_with(params, stroke, &QuadratureOptions::default())
}

pub fn stroke_work_with(
    params: &EngineParameters,
    stroke: &StrokeSpec,
    opts: &QuadratureOptions,
) -> Result<f64> {
    if stroke.is_degenerate() {
        return Ok(0.0);
    }
    let dh = hamiltonian_derivative(params, stroke.axis)?;
    let r = integrate(
        |l| Ok([steady_state_analytic(params, &stroke.knobs_at(l))?.expectation(&dh)]),
        stroke.from,
        stroke.to,
        stroke.n_points,
        opts,
    )?;
    Ok(r.values[0])
}

pub fn stroke_heat(params: &EngineParameters, stroke: &StrokeSpec) -> Result<f64> {
    stroke_heat_with(params, stroke, &QuadratureOptions::default())
}

pub fn stroke_heat_with(
    params: &EngineParameters,
    stroke: &StrokeSpec,
    opts: &QuadratureOptions,
) -> Result<f64> {
    if stroke.is_degenerate() {
        return Ok(0.0);
    }
    let r = integrate(
        |l| Ok([heat_integrand(params, stroke, l)?]),
        stroke.from,
        stroke.to,
        stroke.n_points,
        opts,
    )?;
    Ok(r.values[0])
}

/// Heat absorbed along the stroke: the integral of the heat increment
/// q(λ)dλ over the parts of the path where it is positive. `heat` is the
/// full signed integral, reused when q never changes sign.
fn positive_heat(
    params: &EngineParameters,
    stroke: &StrokeSpec,
    heat: f64,
    opts: &QuadratureOptions,
) -> Result<f64> {
    if stroke.is_degenerate() {
        return Ok(0.0);
    }
    let dir = (stroke.to - stroke.from).signum();
    let n = stroke.n_points.max(3);
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                stroke.to
            } else {
                stroke.from + (stroke.to - stroke.from) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let increments = grid
        .iter()
        .map(|&l| Ok(dir * heat_integrand(params, stroke, l)?))
        .collect::<Result<Vec<f64>>>()?;

    let mut roots = Vec::new();
    for i in 0..n - 1 {
        let (s0, s1) = (increments[i], increments[i + 1]);
        if (s0 > 0.0) != (s1 > 0.0) && s0 != 0.0 && s1 != 0.0 {
            roots.push(bisect_root(
                |l| heat_integrand(params, stroke, l),
                grid[i],
                grid[i + 1],
                dir * s0,
                ROOT_REL_WIDTH,
            )?);
        }
    }
    if roots.is_empty() {
        let positive = increments.iter().any(|&s| s > 0.0);
        return Ok(if positive { heat.max(0.0) } else { 0.0 });
    }
    let mut total = 0.0;
    for (a, b) in segments(stroke.from, stroke.to, roots) {
        let mid = 0.5 * (a + b);
        if dir * heat_integrand(params, stroke, mid)? > 0.0 {
            let r = integrate(
                |l| Ok([heat_integrand(params, stroke, l)?]),
                a,
                b,
                stroke.n_points,
                opts,
            )?;
            total += r.values[0];
        }
    }
    Ok(total.max(0.0))
}

pub fn stroke_positive_heat(params: &EngineParameters, stroke: &StrokeSpec) -> Result<f64> {
    let opts = QuadratureOptions::default();
    let heat = stroke_heat_with(params, stroke, &opts)?;
    positive_heat(params, stroke, heat, &opts)
}

/// (𝒬, Δ𝒲): heat carried by the passive state and the ergotropy change.
pub fn stroke_passive_decomposition(
    params: &EngineParameters,
    stroke: &StrokeSpec,
) -> Result<(f64, f64)> {
    let [_, _, passive, ergotropy_change] =
        stroke_integrals(params, stroke, &QuadratureOptions::default())?;
    Ok((passive, ergotropy_change))
}

pub fn stroke_energetics(
    params: &EngineParameters,
    stroke: &StrokeSpec,
    opts: &QuadratureOptions,
) -> Result<StrokeEnergetics> {
    let [work, heat, passive_heat, ergotropy_change] = stroke_integrals(params, stroke, opts)?;
    Ok(StrokeEnergetics {
        work,
        heat,
        positive_heat: positive_heat(params, stroke, heat, opts)?,
        passive_heat,
        ergotropy_change,
    })
}

/// tr(ρ_ss H̃) at a knob point.
pub fn internal_energy(params: &EngineParameters, knobs: &Knobs) -> Result<f64> {
    let (rho, h) = state_at(params, knobs)?;
    Ok(rho.expectation(&h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleEnergetics {
    pub per_stroke: [StrokeEnergetics; 4],
    pub total_work: f64,
    pub total_heat: f64,
    pub q_plus: f64,
    pub total_passive_heat: f64,
    pub total_ergotropy_change: f64,
    /// −ΣW / Q₊, absent when Q₊ ≤ 0.
    pub efficiency: Option<f64>,
}

/// Fails unless each stroke ends where the next begins, cyclically.
pub fn check_closed(strokes: &[StrokeSpec; 4]) -> Result<()> {
    for i in 0..4 {
        let end = strokes[i].end();
        let next = strokes[(i + 1) % 4].start();
        if end != next {
            return Err(EngineError::OpenLoop(
                end.omega_t,
                end.drive,
                next.omega_t,
                next.drive,
            ));
        }
    }
    Ok(())
}

pub fn cycle_energetics(
    params: &EngineParameters,
    strokes: &[StrokeSpec; 4],
    opts: &QuadratureOptions,
) -> Result<CycleEnergetics> {
    check_closed(strokes)?;
    let mut per_stroke = [StrokeEnergetics::default(); 4];
    for (out, stroke) in per_stroke.iter_mut().zip(strokes) {
        *out = stroke_energetics(params, stroke, opts)?;
    }
    let sum = |f: fn(&StrokeEnergetics) -> f64| per_stroke.iter().map(f).sum::<f64>();
    let total_work = sum(|s| s.work);
    let q_plus = sum(|s| s.positive_heat);
    Ok(CycleEnergetics {
        per_stroke,
        total_work,
        total_heat: sum(|s| s.heat),
        q_plus,
        total_passive_heat: sum(|s| s.passive_heat),
        total_ergotropy_change: sum(|s| s.ergotropy_change),
        efficiency: (q_plus > 0.0).then(|| -total_work / q_plus),
    })
}
