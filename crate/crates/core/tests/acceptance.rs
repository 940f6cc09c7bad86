//! Acceptance run: one status line per criterion, non-zero exit on any FAIL.
//!
//! Energies are compared in ħ·2π·MHz.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transmon_engine::cycle::{
    build_cycle, conventions_report, efficiency_map, entropy_surface, find_max_efficiency,
    linspace, state_surfaces, ALL_CONVENTIONS,
};
use transmon_engine::linalg::{trace_distance, Mat2};
use transmon_engine::model::{
    effective_hamiltonian, rad_s_to_mhz, steady_state_analytic, EngineParameters, Knobs,
    QubitDensityMatrix,
};
use transmon_engine::oracle::{
    joint_check_knobs, joint_reduction_distances, run_oracle_check, JOINT_G_SCALES,
};
use transmon_engine::quadrature::QuadratureOptions;
use transmon_engine::thermo::{
    cycle_energetics, ergotropy, internal_energy, passive_state, StrokeSpec,
};

const TARGET_ETA: f64 = 0.47;
const TARGET_TOLERANCE: f64 = 0.05;

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    /// Target not reproduced under any convention; report emitted instead.
    Fallback,
}

struct Verdict {
    status: Status,
    detail: String,
}

type Check = Result<Verdict, String>;

fn verdict(ok: bool, detail: String) -> Check {
    Ok(Verdict {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn oracle_equivalence() -> Check {
    let p = EngineParameters::reference();
    let t = Instant::now();
    let report = run_oracle_check(&p, 200, 1, false).map_err(err)?;
    let secs = t.elapsed().as_secs_f64();
    let ok = report.worst.distance < 1e-8
        && report.gamma_verdict == Some(p.gamma_convention)
        && report.samples >= 200
        && secs < 10.0;
    verdict(
        ok,
        format!(
            "max trace distance {:.2e} over {} samples, gamma verdict {:?}, {secs:.2} s",
            report.worst.distance, report.samples, report.gamma_verdict
        ),
    )
}

fn thermal_limit() -> Check {
    let (mut worst_eg, mut worst_ratio) = (0.0f64, 0.0f64);
    for (fi, tg) in ALL_CONVENTIONS {
        let p = EngineParameters::reference().with_conventions(fi, tg);
        for w in linspace(p.omega_knob_range.0, p.omega_knob_range.1, 200) {
            let rho = steady_state_analytic(&p, &Knobs::new(w, 0.0)).map_err(err)?;
            let boltzmann = (-p.thermal_gap_at(w) / p.temperature_freq).exp();
            worst_eg = worst_eg.max(rho.eg().norm());
            worst_ratio = worst_ratio.max((rho.ee() / rho.gg() - boltzmann).abs());
        }
    }
    verdict(
        worst_eg < 1e-14 && worst_ratio < 1e-10,
        format!("max |rho_eg| {worst_eg:.1e}, max population-ratio error {worst_ratio:.1e}"),
    )
}

fn high_temperature_limit() -> Check {
    let mut worst = 0.0f64;
    for (fi, tg) in ALL_CONVENTIONS {
        let mut p = EngineParameters::reference().with_conventions(fi, tg);
        let top_gap = p
            .thermal_gap_at(p.omega_knob_range.0)
            .max(p.thermal_gap_at(p.omega_knob_range.1));
        p.temperature_freq = 1e3 * top_gap;
        for w in linspace(p.omega_knob_range.0, p.omega_knob_range.1, 50) {
            let rho =
                steady_state_analytic(&p, &Knobs::new(w, p.drive_knob_range.0)).map_err(err)?;
            let mixed = QubitDensityMatrix::maximally_mixed();
            worst = worst.max(trace_distance(rho.matrix(), mixed.matrix()));
        }
    }
    verdict(
        worst < 1e-3,
        format!("beta*hbar*omega <= 1e-3, pump E0: max distance to I/2 {worst:.2e}"),
    )
}

/// The random cycles shared by the closure criteria: (ω₁, E₁) drawn uniformly
/// from the window, under every convention combination.
fn random_cycles() -> Vec<(EngineParameters, [StrokeSpec; 4])> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut out = Vec::new();
    for (fi, tg) in ALL_CONVENTIONS {
        let p = EngineParameters::reference().with_conventions(fi, tg);
        for _ in 0..20 {
            let w1 = rng.random_range(p.omega_knob_range.0..=p.omega_knob_range.1);
            let e1 = rng.random_range(p.drive_knob_range.0..=p.drive_knob_range.1);
            let (_, strokes) = build_cycle(&p, w1, e1, 100).expect("in-window corner");
            out.push((p.clone(), strokes));
        }
    }
    out
}

fn first_law(cycles: &[(EngineParameters, [StrokeSpec; 4])]) -> Check {
    let opts = QuadratureOptions::default();
    let (mut worst_cycle, mut worst_stroke) = (0.0f64, 0.0f64);
    for (p, strokes) in cycles {
        let c = cycle_energetics(p, strokes, &opts).map_err(err)?;
        worst_cycle = worst_cycle.max(rad_s_to_mhz(c.total_work + c.total_heat).abs());
        for (s, e) in strokes.iter().zip(&c.per_stroke) {
            let delta = internal_energy(p, &s.end()).map_err(err)?
                - internal_energy(p, &s.start()).map_err(err)?;
            worst_stroke = worst_stroke.max(rad_s_to_mhz(e.work + e.heat - delta).abs());
        }
    }
    verdict(
        worst_cycle < 1e-7 && worst_stroke < 1e-8,
        format!(
            "{} cycles: max |sum W + sum Q| {worst_cycle:.1e}, max per-stroke |W + Q - dE| {worst_stroke:.1e}",
            cycles.len()
        ),
    )
}

/// Lowest tr(U ρ U† H) over a (θ, φ) grid of qubit rotations, refined around
/// the best node.
fn brute_force_min_energy(rho: &QubitDensityMatrix, h: &Mat2) -> f64 {
    let energy = |theta: f64, phi: f64| {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let e = Complex64::from_polar(1.0, phi);
        let u = Mat2([
            [Complex64::new(c, 0.0), -s * e.conj()],
            [s * e, Complex64::new(c, 0.0)],
        ]);
        (u * *rho.matrix() * u.dagger()).trace_product(h)
    };
    let (mut best, mut bt, mut bp) = (f64::INFINITY, 0.0, 0.0);
    let (nt, np) = (48, 96);
    for i in 0..=nt {
        for j in 0..np {
            let t = std::f64::consts::PI * i as f64 / nt as f64;
            let ph = std::f64::consts::TAU * j as f64 / np as f64;
            let v = energy(t, ph);
            if v < best {
                (best, bt, bp) = (v, t, ph);
            }
        }
    }
    let mut width = std::f64::consts::PI / nt as f64;
    for _ in 0..40 {
        for i in -4..=4 {
            for j in -4..=4 {
                let (t, ph) = (bt + width * i as f64 / 4.0, bp + width * j as f64 / 4.0);
                let v = energy(t, ph);
                if v < best {
                    (best, bt, bp) = (v, t, ph);
                }
            }
        }
        width *= 0.5;
    }
    best
}

fn decomposition(cycles: &[(EngineParameters, [StrokeSpec; 4])]) -> Check {
    let opts = QuadratureOptions::default();
    let (mut worst_split, mut min_ergotropy, mut worst_undercut) =
        (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    let mut points = 0;
    for (p, strokes) in cycles {
        let c = cycle_energetics(p, strokes, &opts).map_err(err)?;
        for (s, e) in strokes.iter().zip(&c.per_stroke) {
            worst_split =
                worst_split.max(rad_s_to_mhz(e.passive_heat + e.ergotropy_change - e.heat).abs());
            for (k, l) in linspace(s.from, s.to, 25).into_iter().enumerate() {
                let knobs = s.knobs_at(l);
                let rho = steady_state_analytic(p, &knobs).map_err(err)?;
                let h = effective_hamiltonian(p, &knobs).map_err(err)?.0;
                min_ergotropy = min_ergotropy.min(rad_s_to_mhz(ergotropy(&rho, &h).map_err(err)?));
                points += 1;
                if k % 6 == 0 {
                    let passive = passive_state(&rho, &h).map_err(err)?.expectation(&h);
                    worst_undercut = worst_undercut
                        .max(rad_s_to_mhz(passive - brute_force_min_energy(&rho, &h)));
                }
            }
        }
    }
    verdict(
        worst_split < 1e-7 && min_ergotropy >= -1e-12 && worst_undercut <= 1e-6,
        format!(
            "max |Qpassive + dErg - Q| {worst_split:.1e}; min ergotropy {min_ergotropy:.1e} over {points} points; \
             brute-force search beats passive energy by at most {worst_undercut:.1e}"
        ),
    )
}

fn show(eta: f64) -> String {
    if eta.abs() < 1e-3 {
        format!("{eta:.1e}")
    } else {
        format!("{eta:.4}")
    }
}

fn headline(base_criteria_pass: bool) -> Check {
    let p = EngineParameters::reference();
    let t = Instant::now();
    let report = conventions_report(&p, 50, 100, TARGET_ETA, TARGET_TOLERANCE).map_err(err)?;
    let mut lines = Vec::new();
    for o in &report.outcomes {
        let max = match &o.max {
            Some(m) => format!(
                "max eta {} at (omega1, E1) = ({:.1}, {:.3}) MHz",
                show(m.eta),
                rad_s_to_mhz(m.omega1),
                rad_s_to_mhz(m.e1)
            ),
            None => "no present node".into(),
        };
        let corner = o.corner_eta.map_or("absent".into(), show);
        lines.push(format!(
            "      {:?}/{:?}: {max}, corner eta {corner}",
            o.freq_interpretation, o.thermal_gap
        ));
    }
    let table = lines.join("\n");
    let secs = t.elapsed().as_secs_f64();
    if let Some(i) = report.selected {
        let o = &report.outcomes[i];
        return verdict(
            o.reproduces_target,
            format!(
                "{:?}/{:?} reproduces the target ({secs:.1} s)\n{table}",
                o.freq_interpretation, o.thermal_gap
            ),
        );
    }
    let complete = report.outcomes.len() == ALL_CONVENTIONS.len()
        && report.outcomes.iter().all(|o| o.max.is_some());
    Ok(Verdict {
        status: if complete && base_criteria_pass {
            Status::Fallback
        } else {
            Status::Fail
        },
        detail: format!(
            "no convention attains {TARGET_ETA} +/- {TARGET_TOLERANCE} at the window corner; conventions report ({secs:.1} s):\n{table}"
        ),
    })
}

fn resolution_convergence() -> Check {
    let p = EngineParameters::reference();
    let t = Instant::now();
    entropy_surface(&p, 50).map_err(err)?;
    state_surfaces(&p, 50).map_err(err)?;
    let coarse = find_max_efficiency(&efficiency_map(&p, 50, 100).map_err(err)?).map_err(err)?;
    let default_secs = t.elapsed().as_secs_f64();
    let fine = find_max_efficiency(&efficiency_map(&p, 100, 200).map_err(err)?).map_err(err)?;
    let delta = (coarse.eta - fine.eta).abs();
    verdict(
        delta < 1e-3 && default_secs < 300.0,
        format!(
            "max eta {:.6} (50x50, 100 pts) vs {:.6} (100x100, 200 pts): delta {delta:.1e}; default sweep {default_secs:.1} s",
            coarse.eta, fine.eta
        ),
    )
}

fn joint_reduction() -> Check {
    let p = EngineParameters::reference();
    let d = joint_reduction_distances(&p, &joint_check_knobs(&p), &JOINT_G_SCALES).map_err(err)?;
    let at = |s: f64| d.iter().find(|j| j.g_scale == s).map(|j| j.distance);
    let hundredth = at(0.01).ok_or("g/100 not in the ladder")?;
    let ladder = |scales: [f64; 4]| -> Result<bool, String> {
        let v: Vec<f64> = scales
            .iter()
            .map(|&s| at(s).ok_or(format!("g*{s} missing")))
            .collect::<Result<_, _>>()?;
        Ok(v.windows(2).all(|w| w[1] < w[0]))
    };
    let full = ladder([1.0, 0.5, 0.25, 0.125])?;
    let weak = ladder([0.01, 0.005, 0.0025, 0.00125])?;
    let listing: Vec<String> = d
        .iter()
        .map(|j| format!("g*{}: {:.1e}", j.g_scale, j.distance))
        .collect();
    verdict(
        hundredth < 1e-3 && full && weak,
        format!(
            "distance at g/100 {hundredth:.1e}; monotone g..g/8 {full}, g/100..g/800 {weak} [{}]",
            listing.join(", ")
        ),
    )
}

fn run_cli(out: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_transmon-engine"))
        .env_clear()
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .map_err(err)?;
    if !o.status.success() {
        return Err(format!(
            "{args:?} exited {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    Ok(o.stdout)
}

fn determinism() -> Check {
    let runs = [
        tempfile::tempdir().map_err(err)?,
        tempfile::tempdir().map_err(err)?,
    ];
    let mut stdouts = Vec::new();
    for dir in &runs {
        let mut s = run_cli(dir.path(), &["sweep", "--conventions-report"])?;
        s.extend(run_cli(
            dir.path(),
            &[
                "oracle-check",
                "--samples",
                "200",
                "--seed",
                "7",
                "--joint-check",
            ],
        )?);
        s.extend(run_cli(
            dir.path(),
            &["cycle", "--omega1-mhz", "1000", "--e1-mhz", "2"],
        )?);
        stdouts.push(s);
    }
    let mut names: Vec<_> = std::fs::read_dir(runs[0].path())
        .map_err(err)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let a = std::fs::read(runs[0].path().join(name)).map_err(err)?;
        let b = std::fs::read(runs[1].path().join(name)).map_err(err)?;
        if a != b {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    let same_stdout = stdouts[0] == stdouts[1];
    verdict(
        differing.is_empty() && same_stdout && !names.is_empty(),
        format!(
            "{} output files compared across two runs, differing: {differing:?}; stdout identical: {same_stdout}",
            names.len()
        ),
    )
}

fn main() -> ExitCode {
    let cycles = random_cycles();
    let mut results: Vec<(u32, &str, Check)> = vec![
        (1, "oracle equivalence", oracle_equivalence()),
        (2, "thermal limit", thermal_limit()),
        (3, "high-temperature limit", high_temperature_limit()),
        (4, "first-law closure", first_law(&cycles)),
        (
            5,
            "decomposition closure and passivity",
            decomposition(&cycles),
        ),
    ];
    let base = results.iter().all(|(_, _, r)| {
        matches!(
            r,
            Ok(Verdict {
                status: Status::Pass,
                ..
            })
        )
    });
    results.push((6, "headline efficiency", headline(base)));
    results.push((7, "resolution convergence", resolution_convergence()));
    results.push((8, "joint-model reduction", joint_reduction()));
    results.push((9, "determinism", determinism()));

    let mut failed = false;
    for (n, name, r) in results {
        let (tag, detail) = match r {
            Ok(Verdict {
                status: Status::Pass,
                detail,
            }) => ("PASS", detail),
            Ok(Verdict {
                status: Status::Fallback,
                detail,
            }) => ("FALLBACK", detail),
            Ok(Verdict {
                status: Status::Fail,
                detail,
            }) => ("FAIL", detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        failed |= tag == "FAIL";
        println!("criterion {n} [{tag}] {name}: {detail}");
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
