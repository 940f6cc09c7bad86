//! Four-stroke cycles in the (ω_T, E_d) plane and grid sweeps over it.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{EngineError, Result};
use crate::model::{
    steady_state_analytic, EngineParameters, FreqInterpretation, KnobAxis, Knobs, ThermalGap,
};
use crate::quadrature::QuadratureOptions;
use crate::thermo::{cycle_energetics, von_neumann_entropy, CycleEnergetics, StrokeSpec};

pub const DEFAULT_RESOLUTION: usize = 50;
pub const DEFAULT_POINTS_PER_STROKE: usize = 100;

/// Corners of a rectangular cycle. The lower corner (ω₀, E₀) is the bottom
/// of the parameter window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleSpec {
    pub omega0: f64,
    pub omega1: f64,
    pub e0: f64,
    pub e1: f64,
    pub points_per_stroke: usize,
}

impl CycleSpec {
    /// (1) ω₀→ω₁ at E₀, (2) E₀→E₁ at ω₁, (3) ω₁→ω₀ at E₁, (4) E₁→E₀ at ω₀.
    pub fn strokes(&self) -> Result<[StrokeSpec; 4]> {
        let n = self.points_per_stroke;
        Ok([
            StrokeSpec::new(KnobAxis::OmegaT, self.e0, self.omega0, self.omega1, n)?,
            StrokeSpec::new(KnobAxis::Drive, self.omega1, self.e0, self.e1, n)?,
            StrokeSpec::new(KnobAxis::OmegaT, self.e1, self.omega1, self.omega0, n)?,
            StrokeSpec::new(KnobAxis::Drive, self.omega0, self.e1, self.e0, n)?,
        ])
    }

    pub fn is_degenerate(&self) -> bool {
        self.omega0 == self.omega1 && self.e0 == self.e1
    }
}

pub fn build_cycle(
    params: &EngineParameters,
    omega1: f64,
    e1: f64,
    points_per_stroke: usize,
) -> Result<(CycleSpec, [StrokeSpec; 4])> {
    let (omega0, omega_max) = params.omega_knob_range;
    let (e0, e_max) = params.drive_knob_range;
    if !(omega1 >= omega0 && omega1 <= omega_max) {
        return Err(EngineError::KnobOutOfRange {
            name: "omega1",
            value: omega1,
            low: omega0,
            high: omega_max,
        });
    }
    if !(e1 >= e0 && e1 <= e_max) {
        return Err(EngineError::KnobOutOfRange {
            name: "e1",
            value: e1,
            low: e0,
            high: e_max,
        });
    }
    let spec = CycleSpec {
        omega0,
        omega1,
        e0,
        e1,
        points_per_stroke,
    };
    let strokes = spec.strokes()?;
    Ok((spec, strokes))
}

/// `n` evenly spaced points with both endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Why a surface node has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Absence {
    DegenerateCycle,
    NoHeatAbsorbed,
    Quadrature,
    Domain,
    InvalidState,
    Other,
}

impl Absence {
    pub fn code(&self) -> &'static str {
        match self {
            Absence::DegenerateCycle => "degenerate_cycle",
            Absence::NoHeatAbsorbed => "no_heat_absorbed",
            Absence::Quadrature => "quadrature",
            Absence::Domain => "domain",
            Absence::InvalidState => "invalid_state",
            Absence::Other => "error",
        }
    }

    fn from_error(err: &EngineError) -> Self {
        match err {
            EngineError::Quadrature { .. } => Absence::Quadrature,
            EngineError::Domain(_) | EngineError::KnobOutOfRange { .. } | EngineError::Singular => {
                Absence::Domain
            }
            EngineError::InvalidState(_) => Absence::InvalidState,
            _ => Absence::Other,
        }
    }
}

pub type NodeValue = std::result::Result<f64, Absence>;

/// A scalar field on a rectangular (ω, E_d) grid, row-major over ω then E_d.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGrid {
    pub omega_axis: Vec<f64>,
    pub drive_axis: Vec<f64>,
    pub values: Vec<NodeValue>,
    pub quantity_label: String,
}

impl SurfaceGrid {
    /// Evaluates `f` at every node, in parallel, keeping canonical order.
    pub fn evaluate<F>(label: &str, omega_axis: Vec<f64>, drive_axis: Vec<f64>, f: F) -> Self
    where
        F: Fn(f64, f64) -> NodeValue + Sync,
    {
        let nd = drive_axis.len();
        let values = (0..omega_axis.len() * nd)
            .into_par_iter()
            .map(|k| f(omega_axis[k / nd], drive_axis[k % nd]))
            .collect();
        SurfaceGrid {
            omega_axis,
            drive_axis,
            values,
            quantity_label: label.to_string(),
        }
    }

    pub fn get(&self, i_omega: usize, j_drive: usize) -> NodeValue {
        self.values[i_omega * self.drive_axis.len() + j_drive]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.omega_axis.len(), self.drive_axis.len())
    }

    /// Iterates `(omega, drive, value)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, NodeValue)> + '_ {
        let nd = self.drive_axis.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (self.omega_axis[k / nd], self.drive_axis[k % nd], *v))
    }

    /// Long-form CSV: `omega,drive,value,reason_code`, knobs in rad/s.
    /// Absent values leave `value` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,drive,value,reason_code\n");
        for (w, e, v) in self.nodes() {
            match v {
                Ok(x) => writeln!(out, "{w:.16e},{e:.16e},{x:.16e},"),
                Err(a) => writeln!(out, "{w:.16e},{e:.16e},,{}", a.code()),
            }
            .expect("writing to a String");
        }
        out
    }
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 2 {
        return Err(EngineError::config(
            "resolution",
            format!("need at least 2, got {resolution}"),
        ));
    }
    Ok(())
}

fn window_axes(params: &EngineParameters, resolution: usize) -> (Vec<f64>, Vec<f64>) {
    let (w0, w1) = params.omega_knob_range;
    let (e0, e1) = params.drive_knob_range;
    (linspace(w0, w1, resolution), linspace(e0, e1, resolution))
}

fn state_surface<F>(
    params: &EngineParameters,
    resolution: usize,
    label: &str,
    f: F,
) -> Result<SurfaceGrid>
where
    F: Fn(&crate::model::QubitDensityMatrix) -> f64 + Sync,
{
    check_resolution(resolution)?;
    let (omegas, drives) = window_axes(params, resolution);
    Ok(SurfaceGrid::evaluate(label, omegas, drives, |w, e| {
        steady_state_analytic(params, &Knobs::new(w, e))
            .map(|rho| f(&rho))
            .map_err(|err| Absence::from_error(&err))
    }))
}

/// Steady-state von Neumann entropy over the knob window, nats.
pub fn entropy_surface(params: &EngineParameters, resolution: usize) -> Result<SurfaceGrid> {
    state_surface(params, resolution, "entropy", von_neumann_entropy)
}

/// (ρ_ee, |ρ_eg|) over the knob window.
pub fn state_surfaces(
    params: &EngineParameters,
    resolution: usize,
) -> Result<(SurfaceGrid, SurfaceGrid)> {
    Ok((
        state_surface(params, resolution, "rho_ee", |r| r.ee())?,
        state_surface(params, resolution, "abs_rho_eg", |r| r.eg().norm())?,
    ))
}

/// Full energetics of the cycle with upper corner (ω₁, E₁).
pub fn run_cycle(
    params: &EngineParameters,
    omega1: f64,
    e1: f64,
    points_per_stroke: usize,
) -> Result<CycleEnergetics> {
    let (_, strokes) = build_cycle(params, omega1, e1, points_per_stroke)?;
    cycle_energetics(params, &strokes, &QuadratureOptions::default())
}

/// η at one map node, or why it is absent.
pub fn efficiency_at(
    params: &EngineParameters,
    omega1: f64,
    e1: f64,
    points_per_stroke: usize,
) -> NodeValue {
    let (spec, strokes) =
        build_cycle(params, omega1, e1, points_per_stroke).map_err(|e| Absence::from_error(&e))?;
    if spec.is_degenerate() {
        return Err(Absence::DegenerateCycle);
    }
    let c = cycle_energetics(params, &strokes, &QuadratureOptions::default())
        .map_err(|e| Absence::from_error(&e))?;
    c.efficiency.ok_or(Absence::NoHeatAbsorbed)
}

/// η over upper corners (ω₁, E₁) spanning the knob window.
pub fn efficiency_map(
    params: &EngineParameters,
    resolution: usize,
    points_per_stroke: usize,
) -> Result<SurfaceGrid> {
    check_resolution(resolution)?;
    if points_per_stroke < 2 {
        return Err(EngineError::config(
            "points_per_stroke",
            format!("need at least 2, got {points_per_stroke}"),
        ));
    }
    let (omegas, drives) = window_axes(params, resolution);
    Ok(SurfaceGrid::evaluate(
        "efficiency",
        omegas,
        drives,
        |w, e| efficiency_at(params, w, e, points_per_stroke),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxEfficiency {
    pub omega1: f64,
    pub e1: f64,
    pub eta: f64,
    pub i_omega: usize,
    pub j_drive: usize,
}

/// Largest present value; ties go to the smallest ω₁, then smallest E₁.
pub fn find_max_efficiency(map: &SurfaceGrid) -> Result<MaxEfficiency> {
    let nd = map.drive_axis.len();
    let mut best: Option<MaxEfficiency> = None;
    for (k, v) in map.values.iter().enumerate() {
        let Ok(eta) = *v else { continue };
        if best.is_none_or(|b| eta > b.eta) {
            best = Some(MaxEfficiency {
                omega1: map.omega_axis[k / nd],
                e1: map.drive_axis[k % nd],
                eta,
                i_omega: k / nd,
                j_drive: k % nd,
            });
        }
    }
    best.ok_or_else(|| EngineError::EmptySurface(map.quantity_label.clone()))
}

/// Outcome of the efficiency map under one convention combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionOutcome {
    pub freq_interpretation: FreqInterpretation,
    pub thermal_gap: ThermalGap,
    pub max: Option<MaxEfficiency>,
    /// η at (ω₁,max, E₁,max).
    pub corner_eta: Option<f64>,
    pub present_nodes: usize,
    /// Maximum sits at the top corner and within the target band.
    pub reproduces_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionsReport {
    pub resolution: usize,
    pub points_per_stroke: usize,
    pub target_eta: f64,
    pub target_tolerance: f64,
    pub outcomes: Vec<ConventionOutcome>,
    /// First combination that reproduces the target, if any.
    pub selected: Option<usize>,
}

pub const ALL_CONVENTIONS: [(FreqInterpretation, ThermalGap); 4] = [
    (FreqInterpretation::Detuning, ThermalGap::RotatingFrame),
    (FreqInterpretation::Detuning, ThermalGap::LabFrame),
    (FreqInterpretation::LabFrame, ThermalGap::RotatingFrame),
    (FreqInterpretation::LabFrame, ThermalGap::LabFrame),
];

/// Builds the map under every {frequency reading, thermal gap} pair and
/// checks which, if any, peaks at the top corner with η within
/// `target ± tolerance`.
pub fn conventions_report(
    params: &EngineParameters,
    resolution: usize,
    points_per_stroke: usize,
    target: f64,
    tolerance: f64,
) -> Result<ConventionsReport> {
    let mut outcomes = Vec::with_capacity(ALL_CONVENTIONS.len());
    for (fi, tg) in ALL_CONVENTIONS {
        let p = params.clone().with_conventions(fi, tg);
        let map = efficiency_map(&p, resolution, points_per_stroke)?;
        let max = find_max_efficiency(&map).ok();
        let (nw, nd) = map.shape();
        let corner_eta = map.get(nw - 1, nd - 1).ok();
        let at_corner = max.is_some_and(|m| m.i_omega == nw - 1 && m.j_drive == nd - 1);
        let reproduces_target =
            at_corner && max.is_some_and(|m| (m.eta - target).abs() <= tolerance);
        outcomes.push(ConventionOutcome {
            freq_interpretation: fi,
            thermal_gap: tg,
            max,
            corner_eta,
            present_nodes: map.values.iter().filter(|v| v.is_ok()).count(),
            reproduces_target,
        });
    }
    let selected = outcomes.iter().position(|o| o.reproduces_target);
    Ok(ConventionsReport {
        resolution,
        points_per_stroke,
        target_eta: target,
        target_tolerance: tolerance,
        outcomes,
        selected,
    })
}
