//! Scenario runners that measure where variational and viscosity solutions
//! part ways.
//!
//! For convex or concave Hamiltonians the two generalized solutions agree,
//! so every scenario here starts from a Hamiltonian that is neither.  The
//!
//! one-dimensional scenario normalizes such an H to wave form (H(±1) = 0,
//! H′(1) = 0, H′(−1) < 0, entropy condition holding between the two roots),
//! propagates the single-kink datum u₀ = −|q| + f(q), and follows the unique
//! continuous section of its wavefront.  That section carries exactly one
//! shock, located here both geometrically (from the front) and analytically
//! (a two-unknown Newton system for the colliding branch foot and fan
//! momentum).  The shock violates the Lax condition, so the section is not
//! the viscosity solution: the runner quantifies the violation and the
//! resulting gap R − V against a monotone grid solve.
//!
//! The two-dimensional scenario takes H(p) = p₁p₂ with the two-sheet datum
//! min(a·(f(q₁) − q₂), b·(f(q₁) − q₂)).  On the strip where the minimal
//! section has the closed form min over the two sheets, the mean of the two
//! sheet solutions is an admissible test function whose residual
//!
//! ∂ₜφ + H(∂_qφ) = ½(a − b)²((a + b)t + q₁)
//!
//! is strictly positive along the shock parabola for q₁ > −(a + b)t, so the
//! section fails the subsolution test there.  The runner samples that
//! residual profile, compares R against a 2D grid solve, and reports the
//! strict-gap witness.
//!
//! The smoothing runner replays the gap for mollified data: it measures
//! α = d((q, V(q)), F) at the witness, rebuilds fronts as ψ-images of the
//! derivative graphs,
//!
//! ψᵗ_v(q, p) = (q + t∇H(p), v(q) + t(p·∇H(p) − H(p))),
//!
//! and checks the enhanced triangle inequality linking the smoothed gap to
//! α through the solution distance and the front Hausdorff distance.  All
//! reports serialize to versioned JSON, and every referenced artifact
//! re-parses through the readers in [`crate::io`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::characteristics::validity_time;
use crate::error::{HjError, Result};
use crate::grid::{Axis, Rect, SolutionGrid};
use crate::hamiltonian::{
    affine_transform, check_entropy_condition, check_lax_condition, classify_convexity,
    find_entropy_pair, gradient_norm_bound, hessian_norm_bound, mirror, saddle, AffineParams,
    Convexity, IntegrableHamiltonian,
};
use crate::initial_data::{localized_kink, min_of_quadratics, PiecewiseInitialCondition};
use crate::io;
use crate::variational::{envelope_solve, saddle_family, variational_solve};
use crate::viscosity::{
    shock_viscosity_verdict, subsolution_residual, viscosity_solve, GridScheme, TestFunctionSlope,
};
use crate::wavefront::{
    build_front_1d, build_front_cloud, enumerate_continuous_sections, minimal_continuous_section,
    minimal_section, ShockPoint,
};

/// Version stamp of the report JSON layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Signed admissibility margins of a reported shock; negative values mean
/// the condition is violated.
///
/// The 1D scenario reports the weaker Lax margin of the shock pair and the
/// entropy (chord) margin.  The 2D scenario derives both slots from the
/// test-function residual along the shock parabola: `entropy` is −(largest
/// residual) and `lax` is −(smallest residual), so both are negative
/// exactly when the residual is positive across the whole profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub lax: f64,
    pub entropy: f64,
}

/// Location of the reported shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShockData {
    /// A single 1D shock: position `q`, the branch foot `foot` behind it,
    /// and the one-sided momenta.
    Point { q: f64, foot: f64, p_left: f64, p_right: f64 },
    /// A 2D shock segment on the parabola q₂ = c₂q₁² + c₁q₁ + c₀ over
    /// `q1_lo < q₁ < q1_hi`.
    Parabola { q1_lo: f64, q1_hi: f64, c2: f64, c1: f64, c0: f64 },
}

/// Gap statistics between two solution grids, with gap = R − V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub sup_abs_gap: f64,
    pub min_signed_gap: f64,
    pub max_signed_gap: f64,
    /// Node where R − V is largest.
    pub witness_max: Vec<f64>,
    /// Node where R − V is smallest.
    pub witness_min: Vec<f64>,
}

/// The strict-gap witness of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapWitness {
    pub q: Vec<f64>,
    /// R − V at the witness node.
    pub gap: f64,
}

/// One sample of the subsolution residual along a 2D shock parabola.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub q1: f64,
    pub q2: f64,
    /// ∂ₜφ + H(∂_qφ) for the mean-of-sheets test function.
    pub residual: f64,
    /// ½(a − b)²((a + b)t + q₁), the closed form the residual must match.
    pub formula: f64,
}

/// Outcome of one counterexample scenario at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub schema_version: u32,
    /// Scenario id: "dim1" or "saddle".
    pub scenario: String,
    /// Scenario parameters (Hamiltonian, data, grid steps, tolerances).
    pub params: serde_json::Value,
    pub t: f64,
    pub shock: ShockData,
    pub margins: Margins,
    pub gaps: GapStats,
    pub witness: GapWitness,
    /// Residual profile along the shock parabola (2D scenario only).
    pub residual_profile: Vec<ResidualSample>,
    /// Files emitted alongside this report.
    pub artifacts: Vec<PathBuf>,
}

impl CounterexampleReport {
    /// Checks the report invariants: finite margins and gaps, and every
    /// referenced artifact present on disk and readable by the matching
    /// reader.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.margins.lax,
            self.margins.entropy,
            self.gaps.sup_abs_gap,
            self.gaps.min_signed_gap,
            self.gaps.max_signed_gap,
            self.witness.gap,
            self.t,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(HjError::InvalidInput(
                "report carries a non-finite margin or gap".into(),
            ));
        }
        for path in &self.artifacts {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.ends_with("_front.csv") {
                io::read_front_csv(path)?;
            } else if name.ends_with("_section.csv") {
                io::read_section_csv(path)?;
            } else if name.ends_with(".csv") {
                io::read_grid_csv(path)?;
            } else if name.ends_with(".json") {
                io::read_json::<serde_json::Value>(path)?;
            } else {
                return Err(HjError::InvalidInput(format!(
                    "artifact {path:?} has no registered reader"
                )));
            }
        }
        Ok(())
    }
}

/// Elementwise statistics of R − V for two grids on identical axes.
pub fn compare_solutions(r: &SolutionGrid, v: &SolutionGrid) -> Result<GapStats> {
    if r.axes != v.axes {
        return Err(HjError::AxisMismatch(format!(
            "axes differ: {:?} vs {:?}",
            r.axes, v.axes
        )));
    }
    // Grid schemes snap the time to a step multiple; tolerate that snap but
    // nothing larger.
    if (r.t - v.t).abs() > 1e-2 * (1.0 + r.t.abs()) {
        return Err(HjError::AxisMismatch(format!(
            "evaluation times differ: {} vs {}",
            r.t, v.t
        )));
    }
    let node = |flat: usize| -> Vec<f64> {
        match r.axes.len() {
            1 => vec![r.axes[0].coord(flat)],
            _ => {
                let m = r.axes[1].n;
                vec![r.axes[0].coord(flat / m), r.axes[1].coord(flat % m)]
            }
        }
    };
    let mut min_signed = f64::INFINITY;
    let mut max_signed = f64::NEG_INFINITY;
    let (mut arg_min, mut arg_max) = (0usize, 0usize);
    for (k, (a, b)) in r.values.iter().zip(&v.values).enumerate() {
        let gap = a - b;
        if gap < min_signed {
            min_signed = gap;
            arg_min = k;
        }
        if gap > max_signed {
            max_signed = gap;
            arg_max = k;
        }
    }
    Ok(GapStats {
        sup_abs_gap: min_signed.abs().max(max_signed.abs()),
        min_signed_gap: min_signed,
        max_signed_gap: max_signed,
        witness_max: node(arg_max),
        witness_min: node(arg_min),
    })
}

/// Affine momentum substitution that brought a Hamiltonian to wave form:
/// H̄(x) = H(ax + b) + nx + α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveNormalization {
    pub a: f64,
    pub b: f64,
    pub n: f64,
    pub alpha: f64,
    /// The admissible pair was found in the mirrored variable −p.
    pub reflected: bool,
    /// The shock-admissibility pair (p₁, p₂) behind the substitution, in
    /// the oriented variable.
    pub pair: (f64, f64),
    /// The input already was in wave form; the substitution is trivial.
    pub identity: bool,
}

const WAVE_FORM_TOL: f64 = 1e-9;

fn is_wave_form(h: &IntegrableHamiltonian) -> bool {
    if h.dim() != 1 {
        return false;
    }
    let entropy = match check_entropy_condition(h, -1.0, 1.0, 1001) {
        Ok(v) => v.margin >= -WAVE_FORM_TOL,
        Err(_) => false,
    };
    h.eval1(1.0).abs() <= WAVE_FORM_TOL
        && h.eval1(-1.0).abs() <= WAVE_FORM_TOL
        && h.grad1(1.0).abs() <= WAVE_FORM_TOL
        && h.grad1(-1.0) < -WAVE_FORM_TOL
        && entropy
}

/// Brings a 1D Hamiltonian to wave form: H̄(−1) = H̄(1) = 0, H̄′(1) = 0,
/// H̄′(−1) < 0, and the entropy condition holding on [−1, 1].
///
/// A Hamiltonian already in wave form passes through untouched.  Otherwise
/// an admissibility pair p₁ < p₂ (convex at p₁, concave at p₂, chord slope
/// H′(p₂), entropy condition between them) is located, the tangency is
/// polished to machine precision, and the chord is subtracted by the affine
/// substitution
///
/// H̄(x) = H(rx + c) + nx + α,   r = (p₂ − p₁)/2,  c = (p₁ + p₂)/2,
///
/// with n and α chosen to zero the chord.  Mirrored pairs fold the
/// reflection into a negative r.
pub fn normalize_to_wave(
    h: &IntegrableHamiltonian,
) -> Result<(IntegrableHamiltonian, WaveNormalization)> {
    if h.dim() != 1 {
        return Err(HjError::InvalidInput(format!(
            "wave normalization is one-dimensional, got d = {}",
            h.dim()
        )));
    }
    if is_wave_form(h) {
        return Ok((
            h.clone(),
            WaveNormalization {
                a: 1.0,
                b: 0.0,
                n: 0.0,
                alpha: 0.0,
                reflected: false,
                pair: (-1.0, 1.0),
                identity: true,
            },
        ));
    }

    let pair = find_entropy_pair(h, (-3.0, 3.0), 4097)?;
    let g = if pair.reflected { mirror(h)? } else { h.clone() };
    let (p1, mut p2) = (pair.p1, pair.p2);

    // Polish the tangency G'(p2)(p2 - p1) = G(p2) - G(p1) so the chord
    // subtraction lands on wave form to machine precision.
    let g1 = g.eval1(p1);
    for _ in 0..60 {
        let psi = g.grad1(p2) * (p2 - p1) - (g.eval1(p2) - g1);
        let dpsi = g.hess1(p2) * (p2 - p1);
        if dpsi.abs() < 1e-14 {
            break;
        }
        let step = psi / dpsi;
        let cand = p2 - step;
        if !(cand > p1) || g.hess1(cand) >= 0.0 {
            break;
        }
        p2 = cand;
        if step.abs() <= 1e-15 * (1.0 + p2.abs()) {
            break;
        }
    }

    let r = 0.5 * (p2 - p1);
    let c = 0.5 * (p1 + p2);
    let slope = g.grad1(p2);
    let n = -r * slope;
    let alpha = r * slope - g.eval1(p2);
    let (a_eff, b_eff) = if pair.reflected { (-r, -c) } else { (r, c) };
    let bar = affine_transform(h, &AffineParams::scalar(a_eff, b_eff, 1.0, n, alpha)?)?;

    let checks = [
        ("value at -1", bar.eval1(-1.0).abs()),
        ("value at 1", bar.eval1(1.0).abs()),
        ("slope at 1", bar.grad1(1.0).abs()),
    ];
    for (what, resid) in checks {
        if resid > 1e-8 {
            return Err(HjError::NormalizationFailed(format!(
                "{what} is {resid:e} after the chord subtraction"
            )));
        }
    }
    if bar.grad1(-1.0) >= -1e-10 {
        return Err(HjError::NormalizationFailed(format!(
            "slope at -1 is {:e}, expected strictly negative",
            bar.grad1(-1.0)
        )));
    }
    let entropy = check_entropy_condition(&bar, -1.0, 1.0, 2001)?;
    if entropy.margin < -1e-9 {
        return Err(HjError::NormalizationFailed(format!(
            "entropy margin {:e} on the normalized interval",
            entropy.margin
        )));
    }
    Ok((
        bar,
        WaveNormalization {
            a: a_eff,
            b: b_eff,
            n,
            alpha,
            reflected: pair.reflected,
            pair: (p1, p2),
            identity: false,
        },
    ))
}

/// The analytically solved shock of the wave scenario at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveShock {
    pub t: f64,
    /// Foot q₀ > 0 of the branch colliding with the fan.
    pub foot: f64,
    /// Fan momentum at the collision.
    pub p: f64,
    /// Shock position.
    pub q: f64,
    /// Action value at the shock.
    pub s: f64,
    /// Final Newton residual.
    pub residual: f64,
}

/// Solves the two-unknown shock system of the wave scenario:
///
/// q₀ + tH′(u₀′(q₀)) = tH′(p),
/// u₀(q₀) + t·g(u₀′(q₀)) = u₀(0) + t·g(p),   g(x) = xH′(x) − H(x),
///
/// for the colliding foot q₀ and fan momentum p, by a damped Newton
/// iteration seeded from the limit front (q₀ = −tH′(−1), p = 1).
pub fn solve_wave_shock(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
) -> Result<WaveShock> {
    if h.dim() != 1 || u0.dim() != 1 {
        return Err(HjError::InvalidInput("the shock system is one-dimensional".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(HjError::InvalidInput(format!("shock time must be positive, got {t}")));
    }
    let base = u0.eval(&[0.0]);
    let act = |p: f64| p * h.grad1(p) - h.eval1(p);
    let residual = |q: f64, p: f64| -> [f64; 2] {
        let w = u0.grad(&[q])[0];
        [
            q + t * h.grad1(w) - t * h.grad1(p),
            u0.eval(&[q]) + t * act(w) - base - t * act(p),
        ]
    };
    let norm = |f: &[f64; 2]| f[0].hypot(f[1]);

    let mut q = -t * h.grad1(-1.0);
    let mut p = 1.0;
    let mut f = residual(q, p);
    let target = 1e-13 * (1.0 + q.abs() + t);
    for _ in 0..80 {
        if norm(&f) <= target {
            break;
        }
        let w = u0.grad(&[q])[0];
        let wp = u0.hess(&[q])[(0, 0)];
        let j11 = 1.0 + t * h.hess1(w) * wp;
        let j12 = -t * h.hess1(p);
        let j21 = w * j11;
        let j22 = -t * p * h.hess1(p);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-15 {
            return Err(HjError::ShockSolverFailed(format!(
                "singular Jacobian at q0 = {q}, p = {p}"
            )));
        }
        let dq = (f[0] * j22 - f[1] * j12) / det;
        let dp = (j11 * f[1] - j21 * f[0]) / det;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (qn, pn) = (q - lambda * dq, p - lambda * dp);
            if qn > 0.0 {
                let fn_ = residual(qn, pn);
                if norm(&fn_) < norm(&f) {
                    q = qn;
                    p = pn;
                    f = fn_;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let res = norm(&f);
    if res > 1e-10 * (1.0 + q.abs() + t) {
        return Err(HjError::ShockSolverFailed(format!(
            "residual stalled at {res:e} (q0 = {q}, p = {p})"
        )));
    }
    let w = u0.grad(&[q])[0];
    Ok(WaveShock {
        t,
        foot: q,
        p,
        q: q + t * h.grad1(w),
        s: u0.eval(&[q]) + t * act(w),
        residual: res,
    })
}

/// Number of continuous sections of the 1D front over the grid.
pub fn section_count(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    axis: &Axis,
) -> Result<usize> {
    let dom = u0.domain();
    let front = build_front_1d(h, u0, t, (dom.lo(0), dom.hi(0)))?;
    Ok(enumerate_continuous_sections(&front, axis)?.len())
}

/// Declared agreement tolerance of the grid scheme at a given step, scaled
/// from 2e-2 at the reference step by √step (the kink-smearing rate of the
/// monotone scheme).
fn scheme_tolerance(step: f64, reference_step: f64) -> f64 {
    2e-2 * (step / reference_step).sqrt()
}

fn artifact(dir: &Path, stem: &str) -> PathBuf {
    dir.join(stem)
}

/// Runs the 1D wave counterexample for each listed time.
///
/// The Hamiltonian must be neither convex nor concave on the scan box; it
/// is brought to wave form first when needed.  Each run asserts that the
/// front has a unique continuous section over `axis`, locates its single
/// genuine shock both from the front and from [`solve_wave_shock`], checks
/// that the two agree, and compares the section against the monotone grid
/// solve.  With `out_dir` set, the front, section, both grids, and the
/// report are written as artifacts.
pub fn run_counterexample_1d(
    h: &IntegrableHamiltonian,
    t_list: &[f64],
    axis: &Axis,
    out_dir: Option<&Path>,
) -> Result<Vec<CounterexampleReport>> {
    if h.dim() != 1 {
        return Err(HjError::InvalidInput("the wave scenario is one-dimensional".into()));
    }
    if t_list.is_empty() {
        return Err(HjError::InvalidInput("need at least one time".into()));
    }
    let scan = Rect::interval(-2.0, 2.0)?;
    match classify_convexity(h, &scan, 257)? {
        Convexity::Neither(_) => {}
        side => {
            return Err(HjError::InvalidInput(format!(
                "generalized solutions coincide for a {side:?} Hamiltonian; the scenario needs one that is neither convex nor concave"
            )))
        }
    }
    let (bar, norm) = normalize_to_wave(h)?;
    let u0 = localized_kink(0.25)?;
    let b = u0.semiconcavity().expect("kink datum carries a certificate");
    // Sections only evaluate H on the closure of the data's momentum range,
    // so the fold-free horizon uses the curvature reachable there rather
    // than the global bound.
    let c_range = hessian_norm_bound(&bar, u0.lipschitz())?;
    let horizon = validity_time(b, c_range)?;
    for &t in t_list {
        if !(t > 0.0) || !t.is_finite() || t >= horizon {
            return Err(HjError::HorizonExceeded { t, horizon });
        }
    }

    let dom = u0.domain();
    let tol = scheme_tolerance(axis.step, 1e-3);
    let mut reports = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let front = build_front_1d(&bar, &u0, t, (dom.lo(0), dom.hi(0)))?;
        let sections = enumerate_continuous_sections(&front, axis)?;
        if sections.len() != 1 {
            return Err(HjError::InvalidInput(format!(
                "expected a unique continuous section at t = {t}, found {}",
                sections.len()
            )));
        }
        let section = minimal_continuous_section(&front, axis)?;
        let genuine: Vec<&ShockPoint> = section
            .shocks
            .iter()
            .filter(|s| (s.p_left - s.p_right).abs() > 1e-6)
            .collect();
        if genuine.len() != 1 {
            return Err(HjError::InvalidInput(format!(
                "expected exactly one genuine shock at t = {t}, found {}",
                genuine.len()
            )));
        }
        let shock = *genuine[0];

        let ws = solve_wave_shock(&bar, &u0, t)?;
        let foot_slope = u0.grad(&[ws.foot])[0];
        if (ws.q - shock.q).abs() > 1e-6
            || (ws.p - shock.p_left).abs() > 1e-6
            || (foot_slope - shock.p_right).abs() > 1e-6
        {
            return Err(HjError::ShockSolverFailed(format!(
                "analytic shock (q = {}, p = {}) disagrees with the front shock (q = {}, p_left = {})",
                ws.q, ws.p, shock.q, shock.p_left
            )));
        }

        let lax = check_lax_condition(&bar, ws.p, foot_slope)?;
        let entropy = shock_viscosity_verdict(&bar, &shock)?;

        let r = minimal_section(&front, std::slice::from_ref(axis))?;
        let scheme = GridScheme::for_problem(&bar, &u0, t, std::slice::from_ref(axis))?;
        let v = viscosity_solve(&bar, &u0, t, &scheme)?;
        let gaps = compare_solutions(&r, &v)?;
        if gaps.min_signed_gap < -tol {
            return Err(HjError::InvalidInput(format!(
                "section dips {:e} below the grid solution, beyond the scheme tolerance {tol:e}",
                -gaps.min_signed_gap
            )));
        }

        let mut artifacts = Vec::new();
        if let Some(dir) = out_dir {
            let prefix = format!("dim1_t{t}");
            let front_path = artifact(dir, &format!("{prefix}_front.csv"));
            io::write_front_csv(&front_path, &front, 257)?;
            let section_path = artifact(dir, &format!("{prefix}_section.csv"));
            io::write_section_csv(&section_path, &section)?;
            let r_path = artifact(dir, &format!("{prefix}_variational.csv"));
            io::write_grid_csv(&r_path, &r)?;
            let v_path = artifact(dir, &format!("{prefix}_viscosity.csv"));
            io::write_grid_csv(&v_path, &v)?;
            artifacts.extend([front_path, section_path, r_path, v_path]);
        }

        let report = CounterexampleReport {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario: "dim1".into(),
            params: serde_json::json!({
                "hamiltonian": h.spec().map(|s| s.family.clone()).unwrap_or_else(|| "custom".into()),
                "normalization": norm,
                "data": { "kind": "abs_kink_quad", "width": 0.25 },
                "dx": axis.step,
                "scheme_tolerance": tol,
                "horizon": horizon,
            }),
            t,
            shock: ShockData::Point {
                q: ws.q,
                foot: ws.foot,
                p_left: ws.p,
                p_right: foot_slope,
            },
            margins: Margins {
                lax: lax.left_margin.min(lax.right_margin),
                entropy: entropy.entropy_margin,
            },
            gaps: gaps.clone(),
            witness: GapWitness { q: gaps.witness_max.clone(), gap: gaps.max_signed_gap },
            residual_profile: Vec::new(),
            artifacts,
        };
        if let Some(dir) = out_dir {
            io::write_json(&artifact(dir, &format!("dim1_t{t}_report.json")), &report)?;
        }
        report.validate()?;
        reports.push(report);
    }
    Ok(reports)
}

/// The open q₁-interval on the shock parabola where the mean-of-sheets
/// test function has a strictly positive residual: (−(a + b)t, −3bt/2),
/// clipped to the datum's quadratic core q₁ ≥ −1.
pub fn violation_interval(a: f64, b: f64, t: f64) -> Result<(f64, f64)> {
    if !(0.0 < a && a < b) || !a.is_finite() || !b.is_finite() {
        return Err(HjError::InvalidInput(format!(
            "sheet slopes must satisfy 0 < a < b, got a = {a}, b = {b}"
        )));
    }
    if !(t > 0.0) || !t.is_finite() || t >= 2.0 / (3.0 * b) {
        return Err(HjError::InvalidInput(format!(
            "time must lie in (0, 2/(3b)) = (0, {}), got {t}",
            2.0 / (3.0 * b)
        )));
    }
    let lo = (-(a + b) * t).max(-1.0);
    let hi = -1.5 * b * t;
    if !(lo < hi) {
        return Err(HjError::EmptyViolationInterval(format!(
            "[{lo}, {hi}] is empty: the slopes satisfy a <= b/2"
        )));
    }
    Ok((lo, hi))
}

/// Height of the shock parabola q₂ = q₁² + 2(a + b)t·q₁ + t²(a² + ab + b²).
pub fn saddle_parabola(a: f64, b: f64, t: f64, q1: f64) -> f64 {
    q1 * q1 + 2.0 * (a + b) * t * q1 + t * t * (a * a + a * b + b * b)
}

/// Slopes of the mean-of-sheets test function φ = (u_a + u_b)/2 at a point
/// of the shock parabola.
pub fn saddle_test_slopes(a: f64, b: f64, t: f64, q1: f64) -> TestFunctionSlope {
    TestFunctionSlope {
        dt: a * a * (q1 + a * t) + b * b * (q1 + b * t),
        dq: vec![a * (q1 + a * t) + b * (q1 + b * t), -0.5 * (a + b)],
    }
}

/// Closed form of the test-function residual on the parabola:
/// ½(a − b)²((a + b)t + q₁).
pub fn residual_formula(a: f64, b: f64, t: f64, q1: f64) -> f64 {
    0.5 * (a - b) * (a - b) * ((a + b) * t + q1)
}

/// The two standard sheet-slope draws: the first has a nonempty violation
/// interval; the second sits exactly on the degenerate boundary a = b/2,
/// where the interval collapses to a point and the scenario reports an
/// empty violation interval.
pub fn saddle_parameter_presets() -> [(f64, f64); 2] {
    [(0.75, 1.0), (1.0, 2.0)]
}

/// Runs the 2D saddle counterexample for H(p) = p₁p₂.
///
/// Computes the minimal section R on `axes` (cross-checked against the
/// envelope of the sheet family on a coarse subgrid), the monotone grid
/// solution V, the gap statistics, and the residual profile along the
/// shock parabola inside the violation interval.  Every profile sample is
/// verified against the closed-form residual.  With `out_dir` set, both
/// grids, a front cloud, and the report are written as artifacts.
pub fn run_counterexample_saddle(
    a: f64,
    b: f64,
    t: f64,
    axes: &[Axis],
    out_dir: Option<&Path>,
) -> Result<CounterexampleReport> {
    let (lo, hi) = violation_interval(a, b, t)?;
    if axes.len() != 2 {
        return Err(HjError::InvalidInput(format!(
            "the saddle scenario needs two axes, got {}",
            axes.len()
        )));
    }
    let h = saddle();
    let u0 = min_of_quadratics(a, b, 0.25)?;

    let r = variational_solve(&h, &u0, t, axes)?;

    // Independent cross-check of R through the envelope formula on a small
    // subgrid (the envelope loop is far too slow for the full grid).
    let (family, _) = saddle_family(a, b, 0.25)?;
    let coarse: Vec<Axis> = axes
        .iter()
        .map(|ax| {
            let m = best_coarse_count(ax.n);
            let stride = (ax.n - 1) / (m - 1);
            Axis { lo: ax.lo, step: ax.step * stride as f64, n: m }
        })
        .collect();
    let envelope = envelope_solve(&h, &family, t, &coarse)?;
    let stride0 = (axes[0].n - 1) / (coarse[0].n - 1);
    let stride1 = (axes[1].n - 1) / (coarse[1].n - 1);
    let mut cross_gap = 0.0f64;
    for i in 0..coarse[0].n {
        for j in 0..coarse[1].n {
            let fine = (i * stride0) * axes[1].n + j * stride1;
            let gap = (r.values[fine] - envelope.values[i * coarse[1].n + j]).abs();
            cross_gap = cross_gap.max(gap);
        }
    }
    if cross_gap > 1e-6 {
        return Err(HjError::NoConvergence(format!(
            "minimal section and envelope disagree by {cross_gap:e} on the cross-check subgrid"
        )));
    }

    let scheme = GridScheme::for_problem(&h, &u0, t, axes)?;
    let v = viscosity_solve(&h, &u0, t, &scheme)?;
    let gaps = compare_solutions(&r, &v)?;
    let max_step = axes[0].step.max(axes[1].step);
    let tol = scheme_tolerance(max_step, 2e-3);
    if gaps.min_signed_gap < -tol {
        return Err(HjError::InvalidInput(format!(
            "section dips {:e} below the grid solution, beyond the scheme tolerance {tol:e}",
            -gaps.min_signed_gap
        )));
    }

    let mut profile = Vec::with_capacity(50);
    for i in 1..=50 {
        let q1 = lo + (hi - lo) * i as f64 / 51.0;
        let q2 = saddle_parabola(a, b, t, q1);
        let residual = subsolution_residual(&h, &saddle_test_slopes(a, b, t, q1));
        let formula = residual_formula(a, b, t, q1);
        if (residual - formula).abs() > 1e-12 * (1.0 + formula.abs()) || !(residual > 0.0) {
            return Err(HjError::InvalidInput(format!(
                "residual {residual:e} at q1 = {q1} does not match the closed form {formula:e}"
            )));
        }
        profile.push(ResidualSample { q1, q2, residual, formula });
    }
    let worst = profile.iter().map(|s| s.residual).fold(f64::NEG_INFINITY, f64::max);
    let mildest = profile.iter().map(|s| s.residual).fold(f64::INFINITY, f64::min);

    let mut artifacts = Vec::new();
    if let Some(dir) = out_dir {
        let prefix = format!("saddle_t{t}");
        let r_path = artifact(dir, &format!("{prefix}_variational.csv"));
        io::write_grid_csv(&r_path, &r)?;
        let v_path = artifact(dir, &format!("{prefix}_viscosity.csv"));
        io::write_grid_csv(&v_path, &v)?;
        let drift = t * gradient_norm_bound(&h, u0.lipschitz() + 1.0)?;
        let dom = u0.domain();
        let window = Rect::new(vec![
            ((axes[0].lo - drift).max(dom.lo(0)), (axes[0].hi() + drift).min(dom.hi(0))),
            ((axes[1].lo - drift).max(dom.lo(1)), (axes[1].hi() + drift).min(dom.hi(1))),
        ])?;
        let front = build_front_cloud(&h, &u0, t, &window, 121, 17)?;
        let front_path = artifact(dir, &format!("{prefix}_front.csv"));
        io::write_front_csv(&front_path, &front, 2)?;
        artifacts.extend([r_path, v_path, front_path]);
    }

    let report = CounterexampleReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: "saddle".into(),
        params: serde_json::json!({
            "a": a,
            "b": b,
            "width": 0.25,
            "dx": [axes[0].step, axes[1].step],
            "scheme_tolerance": tol,
            "envelope_cross_gap": cross_gap,
        }),
        t,
        shock: ShockData::Parabola {
            q1_lo: lo,
            q1_hi: hi,
            c2: 1.0,
            c1: 2.0 * (a + b) * t,
            c0: t * t * (a * a + a * b + b * b),
        },
        margins: Margins { lax: -mildest, entropy: -worst },
        gaps: gaps.clone(),
        witness: GapWitness { q: gaps.witness_max.clone(), gap: gaps.max_signed_gap },
        residual_profile: profile,
        artifacts,
    };
    if let Some(dir) = out_dir {
        io::write_json(&artifact(dir, &format!("saddle_t{t}_report.json")), &report)?;
    }
    report.validate()?;
    Ok(report)
}

/// Largest coarse node count m ≤ 9 with (m − 1) dividing (n − 1), so the
/// coarse nodes are an exact subset of the fine ones.
fn best_coarse_count(n: usize) -> usize {
    for m in (2..=9.min(n)).rev() {
        if (n - 1) % (m - 1) == 0 {
            return m;
        }
    }
    2
}

/// One row of the smoothing table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRow {
    pub eps: f64,
    /// sup |u_ε − u_L| over the sampling lattice.
    pub sup_u_diff: f64,
    /// Hausdorff distance between graph(du_ε) and graph(∂u_L).
    pub grad_graph_dist: f64,
    /// Hausdorff distance between the ψ-image fronts F_ε and F_L.
    pub front_dist: f64,
    /// sup |Vu_ε − Vu_L| over the solve grid.
    pub sup_v_diff: f64,
    /// d((q, Vu_ε(q)), F_ε) at the witness.
    pub witness_gap: f64,
    /// α − sup_v_diff − front_dist: the guaranteed lower bound for the
    /// smoothed gap (may be ≤ 0 for large eps).
    pub predicted_lower_bound: f64,
    /// Hausdorff distance between ψ_{u_ε} and ψ_{u_L} images of the same
    /// derivative graph.
    pub psi_same_graph_dist: f64,
    /// sup |u_ε − u_L| over that graph's feet: the proven bound for
    /// `psi_same_graph_dist`.
    pub psi_same_graph_bound: f64,
}

/// Outcome of the smoothing sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingTable {
    /// d((q, Vu_L(q)), F_L) at the witness of the source report.
    pub alpha: f64,
    /// Witness point, snapped to the solve grid.
    pub witness_q: Vec<f64>,
    pub rows: Vec<SmoothingRow>,
}

/// Replays a saddle counterexample with mollified data.
///
/// Measures α = d((q, Vu_L(q)), F_L) at the report's witness; for each eps
/// the datum is mollified, the front is rebuilt as the ψ-image of the
/// smooth derivative graph, the grid solution is recomputed, and the gap at
/// the witness is measured again.  Every row checks the enhanced triangle
/// inequality α ≤ |ΔV(q)| + gap_ε + d_Haus(F_L, F_ε) on the evaluated point
/// sets, and the same-graph comparison d_Haus(ψ_ε(G), ψ_L(G)) ≤ sup|u_ε −
/// u_L| over the feet of G.
pub fn run_smoothing_argument(
    h: &IntegrableHamiltonian,
    report: &CounterexampleReport,
    eps_list: &[f64],
) -> Result<SmoothingTable> {
    if report.scenario != "saddle" {
        return Err(HjError::Unsupported(format!(
            "smoothing replays the saddle scenario, got {:?}",
            report.scenario
        )));
    }
    if report.witness.gap <= 0.0 {
        return Err(HjError::WitnessGapNonpositive(report.witness.gap));
    }
    if report.witness.q.len() != 2 {
        return Err(HjError::InvalidInput("saddle witness must be two-dimensional".into()));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(HjError::InvalidInput("eps sweep must be positive and finite".into()));
    }
    let p = &report.params;
    let (a, b, width) = match (p["a"].as_f64(), p["b"].as_f64(), p["width"].as_f64()) {
        (Some(a), Some(b), Some(w)) => (a, b, w),
        _ => {
            return Err(HjError::InvalidInput(
                "report params lack the sheet slopes a, b and the collar width".into(),
            ))
        }
    };
    let t = report.t;
    let u_l = min_of_quadratics(a, b, width)?;

    // Solve grid around the witness.
    let half = 0.12;
    let step = 4e-3;
    let axes: Vec<Axis> = report
        .witness
        .q
        .iter()
        .map(|&c| Axis::with_step(c - half, c + half, step))
        .collect::<Result<_>>()?;
    let scheme = GridScheme::for_problem(h, &u_l, t, &axes)?;
    let v_l = viscosity_solve(h, &u_l, t, &scheme)?;
    let iw = [axes[0].nearest(report.witness.q[0]), axes[1].nearest(report.witness.q[1])];
    let qws = [axes[0].coord(iw[0]), axes[1].coord(iw[1])];
    let vl_w = v_l.values[iw[0] * axes[1].n + iw[1]];

    // Feet lattice for graphs and fronts: the solve window plus transport.
    let drift = t * gradient_norm_bound(h, u_l.lipschitz() + 1.0)?;
    let reach = half + drift + 0.06;
    let feet_n = 81;
    let fan_across = 129;
    let band_across = 33;
    let feet = |i: usize, k: usize| -> f64 {
        qws[k] - reach + 2.0 * reach * i as f64 / (feet_n - 1) as f64
    };

    let graph_l = sample_clarke_graph(&u_l, a, b, &qws, reach, feet_n, fan_across)?;
    let front_l = psi_image(h, &u_l, t, &graph_l);
    let alpha = point_to_set(&[qws[0], qws[1], vl_w], &front_l);
    if alpha <= 1e-9 {
        return Err(HjError::WitnessGapNonpositive(alpha));
    }

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let u_e = u_l.mollify(eps)?;

        // The lattice alone under-resolves the mollification band around
        // the data kink, where the smoothed gradient sweeps the whole fan;
        // per-column band feet capture that sweep so the graph and front
        // distances reflect geometry rather than sampling holes.
        let mut feet_list: Vec<[f64; 2]> = Vec::with_capacity(feet_n * (feet_n + band_across));
        for i in 0..feet_n {
            for j in 0..feet_n {
                feet_list.push([feet(i, 0), feet(j, 1)]);
            }
            let x = feet(i, 0);
            if let Some(tie) = tie_height(&u_l, x, qws[1] - reach, qws[1] + reach) {
                for k in 0..band_across {
                    let s = 2.0 * eps * (2.0 * k as f64 / (band_across - 1) as f64 - 1.0);
                    feet_list.push([x, tie + s]);
                }
            }
        }
        let mut sup_u = 0.0f64;
        let mut graph_e = Vec::with_capacity(feet_list.len());
        for q in &feet_list {
            sup_u = sup_u.max((u_e.eval(q) - u_l.eval(q)).abs());
            let g = u_e.grad(q);
            graph_e.push(vec![q[0], q[1], g[0], g[1]]);
        }
        let grad_graph_dist = hausdorff(&graph_e, &graph_l);

        let front_e = psi_image(h, &u_e, t, &graph_e);
        let front_dist = hausdorff(&front_e, &front_l);

        let scheme_e = GridScheme::for_problem(h, &u_e, t, &axes)?;
        let v_e = viscosity_solve(h, &u_e, t, &scheme_e)?;
        let sup_v = v_e
            .values
            .iter()
            .zip(&v_l.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        let ve_w = v_e.values[iw[0] * axes[1].n + iw[1]];
        let witness_gap = point_to_set(&[qws[0], qws[1], ve_w], &front_e);

        // Enhanced triangle inequality on the evaluated sets.
        let dxy = (vl_w - ve_w).abs();
        if alpha > dxy + witness_gap + front_dist + 1e-9 {
            return Err(HjError::InvalidInput(format!(
                "triangle inequality failed on evaluated sets: {alpha} > {dxy} + {witness_gap} + {front_dist}"
            )));
        }

        // Same-graph comparison: the two ψ maps applied to graph(∂u_L).
        let front_el = psi_image(h, &u_e, t, &graph_l);
        let psi_same_graph_dist = hausdorff(&front_el, &front_l);
        let psi_same_graph_bound = graph_l
            .iter()
            .map(|pt| (u_e.eval(&pt[0..2]) - u_l.eval(&pt[0..2])).abs())
            .fold(0.0f64, f64::max);
        if psi_same_graph_dist > psi_same_graph_bound + 1e-9 {
            return Err(HjError::InvalidInput(format!(
                "same-graph Hausdorff distance {psi_same_graph_dist:e} exceeds its bound {psi_same_graph_bound:e}"
            )));
        }

        rows.push(SmoothingRow {
            eps,
            sup_u_diff: sup_u,
            grad_graph_dist,
            front_dist,
            sup_v_diff: sup_v,
            witness_gap,
            predicted_lower_bound: alpha - sup_v - front_dist,
            psi_same_graph_dist,
            psi_same_graph_bound,
        });
    }
    Ok(SmoothingTable { alpha, witness_q: qws.to_vec(), rows })
}

/// Height of the sheet tie curve of a two-sheet datum in one q₁-column,
/// located by bisection of the atom difference; `None` when the curve
/// misses the column segment.
fn tie_height(u_l: &PiecewiseInitialCondition, x: f64, ylo: f64, yhi: f64) -> Option<f64> {
    let atoms = u_l.atoms()?;
    let diff = |y: f64| (atoms[0].value)(&[x, y]) - (atoms[1].value)(&[x, y]);
    let (mut ya, mut yb) = (ylo, yhi);
    let ga = diff(ya);
    if ga * diff(yb) > 0.0 {
        return None;
    }
    for _ in 0..80 {
        let ym = 0.5 * (ya + yb);
        if diff(ym) * ga >= 0.0 {
            ya = ym;
        } else {
            yb = ym;
        }
    }
    Some(0.5 * (ya + yb))
}

/// Samples graph(∂u_L) of the two-sheet datum over a square window:
/// lattice gradients plus the fan segments along the sheet tie curve.
fn sample_clarke_graph(
    u_l: &PiecewiseInitialCondition,
    a: f64,
    b: f64,
    center: &[f64; 2],
    reach: f64,
    n: usize,
    fan_across: usize,
) -> Result<Vec<Vec<f64>>> {
    let atoms = u_l
        .atoms()
        .ok_or_else(|| HjError::InvalidInput("smoothing needs a two-sheet datum".into()))?;
    let coord = |i: usize, k: usize| center[k] - reach + 2.0 * reach * i as f64 / (n - 1) as f64;
    let mut graph = Vec::with_capacity(n * n + n * fan_across);
    for i in 0..n {
        for j in 0..n {
            let q = [coord(i, 0), coord(j, 1)];
            let g = u_l.grad(&q);
            graph.push(vec![q[0], q[1], g[0], g[1]]);
        }
    }
    for i in 0..n {
        let x = coord(i, 0);
        let Some(y) = tie_height(u_l, x, center[1] - reach, center[1] + reach) else {
            continue;
        };
        // Sheet-0 gradient is a·(f'(q1), −1); the fan scales it by c/a for
        // c between the two sheet slopes.
        let g0 = (atoms[0].grad)(&[x, y]);
        for k in 0..fan_across {
            let c = a + (b - a) * k as f64 / (fan_across - 1) as f64;
            graph.push(vec![x, y, g0[0] * c / a, g0[1] * c / a]);
        }
    }
    Ok(graph)
}

/// ψ-image of a sampled derivative graph: one front point per graph point.
fn psi_image(
    h: &IntegrableHamiltonian,
    v: &PiecewiseInitialCondition,
    t: f64,
    graph: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    graph
        .iter()
        .map(|pt| {
            let q = &pt[0..2];
            let p = &pt[2..4];
            let hp = h.grad(p);
            let act = p[0] * hp[0] + p[1] * hp[1] - h.eval(p);
            vec![q[0] + t * hp[0], q[1] + t * hp[1], v.eval(q) + t * act]
        })
        .collect()
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Euclidean distance from a point to a finite point set.
fn point_to_set(x: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter()
        .map(|y| dist_sq(x, y))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Symmetric Hausdorff distance between two finite point sets.
fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut min_b = vec![f64::INFINITY; b.len()];
    let mut sup = 0.0f64;
    for x in a {
        let mut best = f64::INFINITY;
        for (j, y) in b.iter().enumerate() {
            let d = dist_sq(x, y);
            best = best.min(d);
            if d < min_b[j] {
                min_b[j] = d;
            }
        }
        sup = sup.max(best);
    }
    for d in min_b {
        sup = sup.max(d);
    }
    sup.sqrt()
}
