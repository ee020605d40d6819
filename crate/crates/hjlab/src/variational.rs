//! The variational solution operator and its structural checks.
//!
//! For semiconcave Lipschitz data and t below the classical horizon
//! 1/(BC), the variational solution is the minimal section of the
//! wavefront,
//!
//! R^t u₀(q) = inf { S : (t, q, S) ∈ F_{u₀} },
//!
//! and when the data is an envelope u₀ = min_c f_c of C² equi-Lipschitz
//! members whose gradients sweep the Clarke graph, the same operator is
//! the pointwise minimum of the classical member solutions,
//!
//! R^t u₀(q) = min_c u_{f_c}(t, q).
//!
//! Both routes are implemented independently here, together with the
//! closed form for the two-sheet saddle example, checks of the operator
//! axioms (monotonicity, additivity, nonexpansiveness, membership of the
//! output in the front), the local comparison estimate
//! ‖R_{H̃}u − R_{H}u‖∞ ≤ t·‖H̃ − H‖_{B̄(0,L)}, and the conjugation
//! identities under affine substitutions and dimensional reduction.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::characteristics::validity_time;
use crate::error::{HjError, Result};
use crate::grid::{Axis, Provenance, Rect, SolutionGrid};
use crate::hamiltonian::{gradient_norm_bound, IntegrableHamiltonian};
use crate::initial_data::{min_of_smooth, PiecewiseInitialCondition, SmoothAtom};
use crate::wavefront::{build_front_1d, build_front_cloud, minimal_section, Strand};

/// Parameter set of an envelope family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyParams {
    /// Explicit finite list of parameters.
    Finite(Vec<f64>),
    /// Interval [a, b] sampled uniformly with `samples` values; both
    /// endpoints are hit exactly.
    Interval { a: f64, b: f64, samples: usize },
}

/// A family {f_c} of C² equi-Lipschitz initial conditions whose pointwise
/// minimum is a given piecewise datum.
#[derive(Clone)]
pub struct EnvelopeFamily {
    params: FamilyParams,
    member: Arc<dyn Fn(f64) -> Result<PiecewiseInitialCondition> + Send + Sync>,
    lipschitz: f64,
    semiconcavity: f64,
}

impl std::fmt::Debug for EnvelopeFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnvelopeFamily")
            .field("params", &self.params)
            .field("lipschitz", &self.lipschitz)
            .field("semiconcavity", &self.semiconcavity)
            .finish()
    }
}

impl EnvelopeFamily {
    /// Assembles a family from its parameter set, member map, and shared
    /// Lipschitz / semiconcavity bounds.
    pub fn new(
        params: FamilyParams,
        member: Arc<dyn Fn(f64) -> Result<PiecewiseInitialCondition> + Send + Sync>,
        lipschitz: f64,
        semiconcavity: f64,
    ) -> Result<Self> {
        match &params {
            FamilyParams::Finite(cs) if cs.is_empty() => {
                return Err(HjError::InvalidInput("family needs at least one member".into()));
            }
            FamilyParams::Interval { a, b, samples } => {
                if !(a < b) || *samples < 2 {
                    return Err(HjError::InvalidInput(format!(
                        "interval family needs a < b and >= 2 samples, got [{a}, {b}] x {samples}"
                    )));
                }
            }
            _ => {}
        }
        if !(lipschitz > 0.0) || !lipschitz.is_finite() || semiconcavity < 0.0 {
            return Err(HjError::InvalidInput(
                "family bounds must be finite, L > 0, B >= 0".into(),
            ));
        }
        Ok(Self { params, member, lipschitz, semiconcavity })
    }

    pub fn params(&self) -> &FamilyParams {
        &self.params
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Shared semiconcavity bound B of the members.
    pub fn semiconcavity(&self) -> f64 {
        self.semiconcavity
    }

    /// The member condition at parameter c.
    pub fn member(&self, c: f64) -> Result<PiecewiseInitialCondition> {
        (self.member)(c)
    }

    /// The sampled parameter values, endpoints exact for intervals.
    pub fn sampled_params(&self) -> Vec<f64> {
        match &self.params {
            FamilyParams::Finite(cs) => cs.clone(),
            FamilyParams::Interval { a, b, samples } => (0..*samples)
                .map(|i| {
                    if i == *samples - 1 {
                        *b
                    } else {
                        a + (b - a) * i as f64 / (*samples - 1) as f64
                    }
                })
                .collect(),
        }
    }

    /// Checks that the family realizes the datum: min over sampled members
    /// matches u₀ at the given points, and each sampled Clarke covector is
    /// attained by some member (exactly projected parameter for interval
    /// families, nearest sample for finite ones).  Returns the worst
    /// (min-residual, attainment-residual) pair.
    pub fn validate_against(
        &self,
        u0: &PiecewiseInitialCondition,
        points: &[Vec<f64>],
    ) -> Result<(f64, f64)> {
        let cs = self.sampled_params();
        let mut worst_min = 0.0f64;
        let mut worst_attain = 0.0f64;
        for q in points {
            let mut best = f64::INFINITY;
            for &c in &cs {
                best = best.min(self.member(c)?.eval(q));
            }
            worst_min = worst_min.max((best - u0.eval(q)).abs());

            let fan = u0.clarke_derivative(q)?;
            for p in &fan.vertices {
                let c_star = self.attaining_parameter(u0, q, p)?;
                let f = self.member(c_star)?;
                let val_res = (f.eval(q) - u0.eval(q)).abs();
                let g = f.grad(q);
                let grad_res = g
                    .iter()
                    .zip(p)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                worst_attain = worst_attain.max(val_res.max(grad_res));
            }
        }
        Ok((worst_min, worst_attain))
    }

    /// Best parameter whose member gradient at q matches p: a least-squares
    /// projection over a parameter scan, refined exactly for interval
    /// families by minimizing ‖df_c(q) − p‖ along the sampled direction.
    fn attaining_parameter(
        &self,
        _u0: &PiecewiseInitialCondition,
        q: &[f64],
        p: &[f64],
    ) -> Result<f64> {
        let cs = self.sampled_params();
        let score = |c: f64| -> Result<f64> {
            let g = self.member(c)?.grad(q);
            Ok(g.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        };
        let mut best = (cs[0], score(cs[0])?);
        for &c in &cs[1..] {
            let s = score(c)?;
            if s < best.1 {
                best = (c, s);
            }
        }
        if let FamilyParams::Interval { a, b, .. } = self.params {
            // Gradients of the families used here are affine in c, so the
            // squared distance is a parabola: one Newton step on a central
            // difference lands the exact minimizer.
            let h = (b - a) * 1e-4;
            let (sm, s0, sp) = (
                score((best.0 - h).max(a))?,
                best.1,
                score((best.0 + h).min(b))?,
            );
            let denom = sp - 2.0 * s0 + sm;
            if denom > 0.0 {
                let c = (best.0 - h * 0.5 * (sp - sm) / denom).clamp(a, b);
                if score(c)? < best.1 {
                    return Ok(c);
                }
            }
        }
        Ok(best.0)
    }
}

/// The saddle envelope family f_c = c(f(q₁) − q₂) over c ∈ [a, b],
/// together with the two-sheet datum it envelopes.
///
/// Each member is the a-sheet of the datum rescaled by c/a, so every
/// member carries the identical profile f and the finite-c minimum of the
/// members coincides with the two-atom minimum (the map c ↦ c·g is linear
/// in c, so the minimum over [a, b] sits at an endpoint).
pub fn saddle_family(
    a: f64,
    b: f64,
    width: f64,
) -> Result<(EnvelopeFamily, PiecewiseInitialCondition)> {
    let u0 = crate::initial_data::min_of_quadratics(a, b, width)?;
    let atoms = u0.atoms().expect("two-sheet datum has atoms");
    let base = atoms[0].clone();
    let dom = u0.domain().clone();
    let member = Arc::new(move |c: f64| -> Result<PiecewiseInitialCondition> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(HjError::InvalidInput(format!(
                "saddle member needs c > 0, got {c}"
            )));
        }
        let s = c / a;
        let (v, g, h) = (base.value.clone(), base.grad.clone(), base.hess.clone());
        let atom = SmoothAtom {
            value: Arc::new(move |q: &[f64]| s * v(q)),
            grad: Arc::new(move |q: &[f64]| g(q).iter().map(|x| s * x).collect()),
            hess: Arc::new(move |q: &[f64]| h(q) * s),
        };
        min_of_smooth(2, dom.clone(), vec![atom])
    });
    let family = EnvelopeFamily::new(
        FamilyParams::Interval { a, b, samples: 10_001 },
        member,
        u0.lipschitz(),
        u0.semiconcavity().unwrap_or(0.0),
    )?;
    Ok((family, u0))
}

/// Classical horizon 1/(BC) of the pair, infinite when either bound
/// vanishes (affine data or affine Hamiltonian never focus).
fn pair_horizon(h: &IntegrableHamiltonian, b: f64) -> Result<f64> {
    let c = h.c_bound();
    if b <= 0.0 || c <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        validity_time(b, c)
    }
}

fn require_below_horizon(t: f64, horizon: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(HjError::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    if t >= horizon {
        return Err(HjError::HorizonExceeded { t, horizon });
    }
    Ok(())
}

/// Pointwise minimum over strands covering q (the 1D front fiber minimum).
fn strand_min(strands: &[Strand], q: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for st in strands {
        if st.covers(q) {
            best = best.min(st.at_q(q).s);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(HjError::EmptyFiber(vec![q]))
    }
}

/// The variational solution on a grid: the minimal wavefront section.
///
/// Requires semiconcave data with a recorded bound B and t < 1/(BC).
/// In d = 1 the front is built in closed form over the data domain; in
/// d = 2 a cloud front is sampled over the padded grid window.
pub fn variational_solve(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    axes: &[Axis],
) -> Result<SolutionGrid> {
    let b = u0.semiconcavity().ok_or_else(|| {
        HjError::InvalidInput(
            "variational solve needs data with a semiconcavity certificate".into(),
        )
    })?;
    require_below_horizon(t, pair_horizon(h, b)?)?;
    match u0.dim() {
        1 => {
            if axes.len() != 1 {
                return Err(HjError::InvalidInput(format!(
                    "1D solve needs one axis, got {}",
                    axes.len()
                )));
            }
            let dom = u0.domain();
            let front = build_front_1d(h, u0, t, (dom.lo(0), dom.hi(0)))?;
            minimal_section(&front, axes)
        }
        2 => {
            if axes.len() != 2 {
                return Err(HjError::InvalidInput(format!(
                    "2D solve needs two axes, got {}",
                    axes.len()
                )));
            }
            let drift = t * gradient_norm_bound(h, u0.lipschitz() + 1.0)?;
            let pad_x = drift + 2.0 * axes[0].step;
            let pad_y = drift + 2.0 * axes[1].step;
            let dom = u0.domain();
            let window = Rect::new(vec![
                (
                    (axes[0].lo - pad_x).max(dom.lo(0)),
                    (axes[0].hi() + pad_x).min(dom.hi(0)),
                ),
                (
                    (axes[1].lo - pad_y).max(dom.lo(1)),
                    (axes[1].hi() + pad_y).min(dom.hi(1)),
                ),
            ])?;
            // The binned minimum needs cloud spacing no coarser than about
            // two grid steps, so fine grids get denser clouds.
            let ratio = (0..2)
                .map(|i| (window.hi(i) - window.lo(i)) / axes[i].step)
                .fold(0.0f64, f64::max);
            let n_piece = 161.max((((ratio / 2.0).ceil() as usize) + 1).min(1025));
            let front = build_front_cloud(h, u0, t, &window, n_piece, 33)?;
            minimal_section(&front, axes)
        }
        d => Err(HjError::Unsupported(format!("variational solve in d = {d}"))),
    }
}

/// Newton solve of the classical foot equation q₀ + t∇H(∇f(q₀)) = q for a
/// C² member, warm-started from `seed` (updated on success).
fn member_value(
    h: &IntegrableHamiltonian,
    f: &PiecewiseInitialCondition,
    t: f64,
    q: &[f64],
    seed: &mut Vec<f64>,
) -> Option<f64> {
    let d = q.len();
    let attempt = |start: &[f64]| -> Option<Vec<f64>> {
        let mut q0 = start.to_vec();
        let mut res;
        for _ in 0..60 {
            let p = f.grad(&q0);
            let hp = h.grad(&p);
            let fvec: Vec<f64> = (0..d).map(|i| q0[i] + t * hp[i] - q[i]).collect();
            res = fvec.iter().map(|x| x * x).sum::<f64>().sqrt();
            if res <= 1e-12 {
                return Some(q0);
            }
            let hh = h.hess(&p);
            let hu = f.hess(&q0);
            let step = match d {
                1 => {
                    let j = 1.0 + t * hh[(0, 0)] * hu[(0, 0)];
                    if j.abs() < 1e-14 {
                        return None;
                    }
                    vec![fvec[0] / j]
                }
                2 => {
                    let mut j = [[0.0f64; 2]; 2];
                    for r in 0..2 {
                        for c in 0..2 {
                            let mut acc = 0.0;
                            for m in 0..2 {
                                acc += hh[(r, m)] * hu[(m, c)];
                            }
                            j[r][c] = t * acc + if r == c { 1.0 } else { 0.0 };
                        }
                    }
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    if det.abs() < 1e-14 {
                        return None;
                    }
                    vec![
                        (fvec[0] * j[1][1] - fvec[1] * j[0][1]) / det,
                        (fvec[1] * j[0][0] - fvec[0] * j[1][0]) / det,
                    ]
                }
                _ => return None,
            };
            let mut scale = 1.0;
            let mut moved = false;
            for _ in 0..25 {
                let trial: Vec<f64> = (0..d).map(|i| q0[i] - scale * step[i]).collect();
                let pt = f.grad(&trial);
                let hpt = h.grad(&pt);
                let rt: f64 = (0..d)
                    .map(|i| {
                        let e = trial[i] + t * hpt[i] - q[i];
                        e * e
                    })
                    .sum::<f64>()
                    .sqrt();
                if rt < res {
                    q0 = trial;
                    moved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !moved {
                return None;
            }
        }
        None
    };
    let q0 = attempt(seed).or_else(|| attempt(q))?;
    *seed = q0.clone();
    let p = f.grad(&q0);
    let hp = h.grad(&p);
    let act: f64 = (0..d).map(|i| p[i] * hp[i]).sum::<f64>() - h.eval(&p);
    Some(f.eval(&q0) + t * act)
}

/// The envelope route: classical solution of every sampled member by
/// characteristics, then the pointwise minimum over the family.
pub fn envelope_solve(
    h: &IntegrableHamiltonian,
    family: &EnvelopeFamily,
    t: f64,
    axes: &[Axis],
) -> Result<SolutionGrid> {
    require_below_horizon(t, pair_horizon(h, family.semiconcavity)?)?;
    if axes.is_empty() || axes.len() > 2 {
        return Err(HjError::InvalidInput(format!(
            "envelope solve covers 1 or 2 axes, got {}",
            axes.len()
        )));
    }
    let nodes: Vec<Vec<f64>> = if axes.len() == 1 {
        axes[0].coords().map(|q| vec![q]).collect()
    } else {
        let mut v = Vec::with_capacity(axes[0].n * axes[1].n);
        for x in axes[0].coords() {
            for y in axes[1].coords() {
                v.push(vec![x, y]);
            }
        }
        v
    };
    let mut best = vec![f64::INFINITY; nodes.len()];
    for c in family.sampled_params() {
        let f = family.member(c)?;
        if f.dim() != h.dim() {
            return Err(HjError::InvalidInput(format!(
                "member dimension {} does not match Hamiltonian dimension {}",
                f.dim(),
                h.dim()
            )));
        }
        let mut seed = nodes[0].clone();
        for (k, q) in nodes.iter().enumerate() {
            let v = match member_value(h, &f, t, q, &mut seed) {
                Some(v) => v,
                None => crate::characteristics::classical_solve(h, &f, t, q)?.value,
            };
            if v < best[k] {
                best[k] = v;
            }
        }
    }
    SolutionGrid::new(t, axes.to_vec(), best, Provenance::Envelope)
}

/// Closed form of the saddle example on its validity strip:
/// min(a((q₁+at)² − q₂), b((q₁+bt)² − q₂)) for b > a > 0 and
/// −1 ≤ q₁ ≤ −(3b/2)t.
pub fn saddle_closed_form(a: f64, b: f64, t: f64, q1: f64, q2: f64) -> Result<f64> {
    if !(b > a) || !(a > 0.0) || !b.is_finite() {
        return Err(HjError::InvalidInput(format!(
            "closed form needs b > a > 0, got a = {a}, b = {b}"
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(HjError::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    if !(-1.0..=-1.5 * b * t).contains(&q1) {
        return Err(HjError::DomainViolation(format!(
            "q1 = {q1} outside the validity strip [-1, {}]",
            -1.5 * b * t
        )));
    }
    Ok((a * ((q1 + a * t).powi(2) - q2)).min(b * ((q1 + b * t).powi(2) - q2)))
}

/// Solver signature accepted by the axiom checker.
pub type SolverFn<'a> = &'a dyn Fn(
    &IntegrableHamiltonian,
    &PiecewiseInitialCondition,
    f64,
    &[Axis],
) -> Result<SolutionGrid>;

/// Fixtures for [`check_operator_axioms`].
pub struct AxiomSamples {
    /// Pairs (u, v) with u ≤ v on the grid.
    pub monotone_pairs: Vec<(PiecewiseInitialCondition, PiecewiseInitialCondition)>,
    /// Data and constants for R(u + c) = Ru + c.
    pub shift_cases: Vec<(PiecewiseInitialCondition, f64)>,
    /// Arbitrary pairs for ‖Ru − Rv‖∞ ≤ ‖u − v‖∞.
    pub contraction_pairs: Vec<(PiecewiseInitialCondition, PiecewiseInitialCondition)>,
    pub t: f64,
    pub axes: Vec<Axis>,
}

/// Outcome of the axiom check; `violations` lists every failed clause.
#[derive(Debug, Clone, Default)]
pub struct AxiomReport {
    pub monotonicity_worst: f64,
    pub additivity_worst: f64,
    pub contraction_excess: f64,
    pub membership_worst: f64,
    pub violations: Vec<String>,
}

impl AxiomReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

const AXIOM_TOL: f64 = 1e-8;

/// Verifies the operator axioms on the supplied fixtures: monotonicity,
/// additivity under constants, nonexpansiveness in the sup norm, and the
/// variational property (every output value lies on the wavefront of its
/// datum; checked in d = 1).
pub fn check_operator_axioms(
    solver: SolverFn<'_>,
    h: &IntegrableHamiltonian,
    samples: &AxiomSamples,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::default();
    let t = samples.t;
    let axes = &samples.axes;

    for (i, (u, v)) in samples.monotone_pairs.iter().enumerate() {
        let ru = solver(h, u, t, axes)?;
        let rv = solver(h, v, t, axes)?;
        let mut worst = 0.0f64;
        for (a, b) in ru.values.iter().zip(&rv.values) {
            worst = worst.max(a - b);
        }
        report.monotonicity_worst = report.monotonicity_worst.max(worst);
        if worst > AXIOM_TOL {
            report
                .violations
                .push(format!("monotonicity pair {i}: Ru exceeds Rv by {worst:e}"));
        }
        check_membership(h, u, t, axes, &ru, &mut report)?;
    }

    for (i, (u, c)) in samples.shift_cases.iter().enumerate() {
        let ru = solver(h, u, t, axes)?;
        let rshift = solver(h, &u.offset(*c), t, axes)?;
        let mut worst = 0.0f64;
        for (a, b) in ru.values.iter().zip(&rshift.values) {
            worst = worst.max((b - a - c).abs());
        }
        report.additivity_worst = report.additivity_worst.max(worst);
        if worst > AXIOM_TOL {
            report
                .violations
                .push(format!("additivity case {i} (c = {c}): residual {worst:e}"));
        }
    }

    for (i, (u, v)) in samples.contraction_pairs.iter().enumerate() {
        let ru = solver(h, u, t, axes)?;
        let rv = solver(h, v, t, axes)?;
        // The comparison sup runs over every datum value the solutions can
        // read: the grid window padded by the characteristic drift.
        let l = u.lipschitz().max(v.lipschitz());
        let pad = t * gradient_norm_bound(h, l)?;
        let dist = sup_data_distance(u, v, axes, pad);
        let mut out = 0.0f64;
        for (a, b) in ru.values.iter().zip(&rv.values) {
            out = out.max((a - b).abs());
        }
        let excess = out - dist;
        report.contraction_excess = report.contraction_excess.max(excess);
        if excess > AXIOM_TOL {
            report.violations.push(format!(
                "contraction pair {i}: output distance {out:e} exceeds data distance {dist:e}"
            ));
        }
    }

    Ok(report)
}

fn sup_data_distance(
    u: &PiecewiseInitialCondition,
    v: &PiecewiseInitialCondition,
    axes: &[Axis],
    pad: f64,
) -> f64 {
    // Dense 1D sampling (8x the grid) bounds the sup distance well enough
    // for Lipschitz data.
    let mut worst = 0.0f64;
    let dom = u.domain();
    if axes.len() == 1 {
        let n = axes[0].n * 8;
        let lo = (axes[0].lo - pad).max(dom.lo(0));
        let hi = (axes[0].hi() + pad).min(dom.hi(0));
        for i in 0..=n {
            let q = lo + (hi - lo) * i as f64 / n as f64;
            worst = worst.max((u.eval(&[q]) - v.eval(&[q])).abs());
        }
    } else {
        for x in axes[0].coords() {
            for y in axes[1].coords() {
                worst = worst.max((u.eval(&[x, y]) - v.eval(&[x, y])).abs());
            }
        }
    }
    worst
}

fn check_membership(
    h: &IntegrableHamiltonian,
    u: &PiecewiseInitialCondition,
    t: f64,
    axes: &[Axis],
    ru: &SolutionGrid,
    report: &mut AxiomReport,
) -> Result<()> {
    if u.dim() != 1 || axes.len() != 1 {
        return Ok(());
    }
    let dom = u.domain();
    let front = build_front_1d(h, u, t, (dom.lo(0), dom.hi(0)))?;
    let strands = front.strands()?;
    for (k, q) in axes[0].coords().enumerate() {
        let mut gap = f64::INFINITY;
        for st in &strands {
            if st.covers(q) {
                gap = gap.min((st.at_q(q).s - ru.values[k]).abs());
            }
        }
        if gap.is_finite() {
            report.membership_worst = report.membership_worst.max(gap);
            if gap > AXIOM_TOL {
                report.violations.push(format!(
                    "variational property: output at q = {q} misses the front by {gap:e}"
                ));
            }
        }
    }
    Ok(())
}

/// Margin of the local comparison estimate:
/// t·sup_{‖p‖≤L}|H₁ − H₂| − ‖R_{H₁}u − R_{H₂}u‖∞ on the grid.
///
/// Mathematically nonnegative; numerical play should keep it above −1e-6.
pub fn check_local_estimate(
    h1: &IntegrableHamiltonian,
    h2: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    axes: &[Axis],
) -> Result<f64> {
    if h1.dim() != h2.dim() {
        return Err(HjError::InvalidInput(
            "comparison needs Hamiltonians of equal dimension".into(),
        ));
    }
    let l = u0.lipschitz();
    let sup = sup_hamiltonian_distance(h1, h2, l)?;
    let r1 = variational_solve(h1, u0, t, axes)?;
    let r2 = variational_solve(h2, u0, t, axes)?;
    let mut out = 0.0f64;
    for (a, b) in r1.values.iter().zip(&r2.values) {
        out = out.max((a - b).abs());
    }
    Ok(t * sup - out)
}

fn sup_hamiltonian_distance(
    h1: &IntegrableHamiltonian,
    h2: &IntegrableHamiltonian,
    radius: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    match h1.dim() {
        1 => {
            let n = 8192;
            for i in 0..=n {
                let p = -radius + 2.0 * radius * i as f64 / n as f64;
                worst = worst.max((h1.eval1(p) - h2.eval1(p)).abs());
            }
        }
        2 => {
            let n = 257;
            for i in 0..n {
                for j in 0..n {
                    let p = [
                        -radius + 2.0 * radius * i as f64 / (n - 1) as f64,
                        -radius + 2.0 * radius * j as f64 / (n - 1) as f64,
                    ];
                    if p[0] * p[0] + p[1] * p[1] <= radius * radius {
                        worst = worst.max((h1.eval(&p) - h2.eval(&p)).abs());
                    }
                }
            }
        }
        d => {
            return Err(HjError::Unsupported(format!(
                "Hamiltonian comparison in d = {d}"
            )))
        }
    }
    Ok(worst)
}

/// Parameters of the affine conjugation H̄(p) = λ⁻¹H(Ap + b) + p·n + α,
/// v₀(q) = u₀(ᵗAq) + b·q, restricted to diagonal A.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransformParams {
    /// Diagonal of A (one entry per dimension, nonzero).
    pub a_diag: Vec<f64>,
    pub b: Vec<f64>,
    pub n: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
}

/// Which conjugation identity to verify.
#[derive(Debug, Clone, PartialEq)]
pub enum ConjugationSpec {
    Affine(AffineTransformParams),
    /// Dimensional reduction of a 2D Hamiltonian at frozen second momentum:
    /// H̄(p₁) = H(p₁, p₂) and v₀(q₁, q₂) = u₀(q₁) + p₂q₂.
    Reduction { p2: f64 },
}

/// The Hamiltonian conjugated by a diagonal affine substitution.
pub fn conjugated_hamiltonian(
    h: &IntegrableHamiltonian,
    tr: &AffineTransformParams,
) -> Result<IntegrableHamiltonian> {
    let d = h.dim();
    if tr.a_diag.len() != d || tr.b.len() != d || tr.n.len() != d {
        return Err(HjError::InvalidInput(
            "transform dimension does not match the Hamiltonian".into(),
        ));
    }
    if !(tr.lambda > 0.0) || tr.a_diag.iter().any(|a| *a == 0.0 || !a.is_finite()) {
        return Err(HjError::InvalidInput(
            "transform needs lambda > 0 and nonzero diagonal".into(),
        ));
    }
    let (a, b, n, alpha, lambda) =
        (tr.a_diag.clone(), tr.b.clone(), tr.n.clone(), tr.alpha, tr.lambda);
    let (h1, h2, h3) = (h.clone(), h.clone(), h.clone());
    let (a1, a2, a3) = (a.clone(), a.clone(), a);
    let (b1, b2, b3) = (b.clone(), b.clone(), b);
    let n2 = n.clone();
    let eval = Arc::new(move |p: &[f64]| -> f64 {
        let ap: Vec<f64> = (0..p.len()).map(|i| a1[i] * p[i] + b1[i]).collect();
        h1.eval(&ap) / lambda + p.iter().zip(&n).map(|(x, y)| x * y).sum::<f64>() + alpha
    });
    let grad = Arc::new(move |p: &[f64]| -> Vec<f64> {
        let ap: Vec<f64> = (0..p.len()).map(|i| a2[i] * p[i] + b2[i]).collect();
        let g = h2.grad(&ap);
        (0..p.len()).map(|i| a2[i] * g[i] / lambda + n2[i]).collect()
    });
    let hess = Arc::new(move |p: &[f64]| -> DMatrix<f64> {
        let ap: Vec<f64> = (0..p.len()).map(|i| a3[i] * p[i] + b3[i]).collect();
        let m = h3.hess(&ap);
        let mut out = DMatrix::zeros(p.len(), p.len());
        for r in 0..p.len() {
            for c in 0..p.len() {
                out[(r, c)] = a3[r] * a3[c] * m[(r, c)] / lambda;
            }
        }
        out
    });
    let a_max = tr.a_diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    IntegrableHamiltonian::from_parts(
        d,
        h.c_bound() * a_max * a_max / tr.lambda,
        eval,
        grad,
        hess,
        None,
    )
}

/// The 1D Hamiltonian obtained by freezing the second momentum of a 2D one.
pub fn reduced_hamiltonian(h: &IntegrableHamiltonian, p2: f64) -> Result<IntegrableHamiltonian> {
    if h.dim() != 2 {
        return Err(HjError::InvalidInput(
            "reduction needs a 2D Hamiltonian".into(),
        ));
    }
    let (h1, h2, h3) = (h.clone(), h.clone(), h.clone());
    IntegrableHamiltonian::from_parts(
        1,
        h.c_bound(),
        Arc::new(move |p: &[f64]| h1.eval(&[p[0], p2])),
        Arc::new(move |p: &[f64]| vec![h2.grad(&[p[0], p2])[0]]),
        Arc::new(move |p: &[f64]| {
            DMatrix::from_element(1, 1, h3.hess(&[p[0], p2])[(0, 0)])
        }),
        None,
    )
}

/// The transformed datum v₀(q) = u₀(Aq) + b·q for diagonal A: the 1D case
/// goes through the affine-precomposition helper; two-sheet 2D data gets
/// its atoms wrapped directly.
pub fn transformed_data(
    u0: &PiecewiseInitialCondition,
    tr: &AffineTransformParams,
) -> Result<PiecewiseInitialCondition> {
    match u0.dim() {
        1 => Ok(u0
            .precomposed_affine_1d(tr.a_diag[0], 0.0)?
            .tilted(&tr.b, 0.0)),
        2 => {
            let atoms = u0.atoms().ok_or_else(|| {
                HjError::Unsupported(
                    "2D transformed data is implemented for two-sheet minima".into(),
                )
            })?;
            let a = tr.a_diag.clone();
            let bq = tr.b.clone();
            let wrapped: Vec<SmoothAtom> = atoms
                .iter()
                .map(|atom| {
                    let (v, g, hh) = (atom.value.clone(), atom.grad.clone(), atom.hess.clone());
                    let (av, ag, ah) = (a.clone(), a.clone(), a.clone());
                    let bv = bq.clone();
                    let bg = bq.clone();
                    SmoothAtom {
                        value: Arc::new(move |q: &[f64]| {
                            let aq: Vec<f64> = (0..2).map(|i| av[i] * q[i]).collect();
                            v(&aq) + bv[0] * q[0] + bv[1] * q[1]
                        }),
                        grad: Arc::new(move |q: &[f64]| {
                            let aq: Vec<f64> = (0..2).map(|i| ag[i] * q[i]).collect();
                            let gr = g(&aq);
                            (0..2).map(|i| ag[i] * gr[i] + bg[i]).collect()
                        }),
                        hess: Arc::new(move |q: &[f64]| {
                            let aq: Vec<f64> = (0..2).map(|i| ah[i] * q[i]).collect();
                            let m = hh(&aq);
                            let mut out = DMatrix::zeros(2, 2);
                            for r in 0..2 {
                                for c in 0..2 {
                                    out[(r, c)] = ah[r] * ah[c] * m[(r, c)];
                                }
                            }
                            out
                        }),
                    }
                })
                .collect();
            let dom = u0.domain();
            let bounds: Vec<(f64, f64)> = (0..2)
                .map(|i| {
                    let (x, y) = (dom.lo(i) / tr.a_diag[i], dom.hi(i) / tr.a_diag[i]);
                    (x.min(y), x.max(y))
                })
                .collect();
            min_of_smooth(2, Rect::new(bounds)?, wrapped)
        }
        d => Err(HjError::Unsupported(format!("transformed data in d = {d}"))),
    }
}

/// Verifies a conjugation identity by computing both sides independently
/// and returning the maximum absolute residual over the grid.
///
/// Affine (diagonal A, positive entries in d = 2):
/// R^t_{0,H} v₀(q) = R^{λt}_{0,H̄} u₀(Aq + λtn) + b·q + αλt.
/// Reduction: R^t_{0,H} v₀(q₁,q₂) = R^t_{0,H̄} u₀(q₁) + p₂q₂.
pub fn conjugation_check(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    spec: &ConjugationSpec,
    t: f64,
    axes: &[Axis],
) -> Result<f64> {
    match spec {
        ConjugationSpec::Affine(tr) => {
            let b = u0.semiconcavity().ok_or_else(|| {
                HjError::InvalidInput("conjugation needs semiconcave data".into())
            })?;
            let a_max = tr.a_diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let horizon = pair_horizon(h, b * a_max * a_max)?;
            require_below_horizon(t, horizon)?;
            let hbar = conjugated_hamiltonian(h, tr)?;
            let v0 = transformed_data(u0, tr)?;
            let lhs = variational_solve(h, &v0, t, axes)?;
            let shift = |q: &[f64], i: usize| tr.a_diag[i] * q[i] + tr.lambda * t * tr.n[i];
            match u0.dim() {
                1 => {
                    // Image points evaluated directly on the reduced front
                    // (the grid may reverse orientation when a < 0).
                    let dom = u0.domain();
                    let front =
                        build_front_1d(&hbar, u0, tr.lambda * t, (dom.lo(0), dom.hi(0)))?;
                    let strands = front.strands()?;
                    let mut worst = 0.0f64;
                    for (k, q) in axes[0].coords().enumerate() {
                        let x = shift(&[q], 0);
                        let rhs = strand_min(&strands, x)?
                            + tr.b[0] * q
                            + tr.alpha * tr.lambda * t;
                        worst = worst.max((lhs.values[k] - rhs).abs());
                    }
                    Ok(worst)
                }
                2 => {
                    if tr.a_diag.iter().any(|a| *a <= 0.0) {
                        return Err(HjError::Unsupported(
                            "2D affine conjugation needs positive diagonal entries".into(),
                        ));
                    }
                    let image_axes: Vec<Axis> = (0..2)
                        .map(|i| {
                            Axis::span(
                                tr.a_diag[i] * axes[i].lo + tr.lambda * t * tr.n[i],
                                tr.a_diag[i] * axes[i].hi() + tr.lambda * t * tr.n[i],
                                axes[i].n,
                            )
                        })
                        .collect::<Result<_>>()?;
                    let rhs = variational_solve(&hbar, u0, tr.lambda * t, &image_axes)?;
                    let mut worst = 0.0f64;
                    let mut k = 0;
                    for x in axes[0].coords() {
                        for y in axes[1].coords() {
                            let lin = tr.b[0] * x + tr.b[1] * y + tr.alpha * tr.lambda * t;
                            worst = worst.max((lhs.values[k] - rhs.values[k] - lin).abs());
                            k += 1;
                        }
                    }
                    Ok(worst)
                }
                d => Err(HjError::Unsupported(format!("conjugation in d = {d}"))),
            }
        }
        ConjugationSpec::Reduction { p2 } => {
            if u0.dim() != 1 {
                return Err(HjError::InvalidInput(
                    "reduction starts from 1D data".into(),
                ));
            }
            if axes.len() != 2 {
                return Err(HjError::InvalidInput(
                    "reduction check needs a 2D grid".into(),
                ));
            }
            let b = u0.semiconcavity().ok_or_else(|| {
                HjError::InvalidInput("conjugation needs semiconcave data".into())
            })?;
            require_below_horizon(t, pair_horizon(h, b)?)?;
            let hbar = reduced_hamiltonian(h, *p2)?;
            let q2_range = (axes[1].lo - 1.0, axes[1].hi() + 1.0);
            let v0 = crate::initial_data::separable_tilt(u0.clone(), *p2, q2_range)?;
            let lhs = variational_solve(h, &v0, t, axes)?;
            let dom = u0.domain();
            let front = build_front_1d(&hbar, u0, t, (dom.lo(0), dom.hi(0)))?;
            let strands = front.strands()?;
            let mut worst = 0.0f64;
            let mut k = 0;
            for q1 in axes[0].coords() {
                let base = strand_min(&strands, q1)?;
                for q2v in axes[1].coords() {
                    let rhs = base + p2 * q2v;
                    worst = worst.max((lhs.values[k] - rhs).abs());
                    k += 1;
                }
            }
            Ok(worst)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{cubic_wave, half_square, poly_1d, saddle};
    use crate::initial_data::{localized_kink, neg_abs, polynomial_pieces};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hopf_lax_tent_and_horizon() {
        let h = half_square(1).unwrap();
        let u0 = neg_abs();
        let t = 0.4;
        let axis = Axis::span(-1.0, 1.0, 201).unwrap();
        let sol = variational_solve(&h, &u0, t, &[axis.clone()]).unwrap();
        assert_eq!(sol.provenance, Provenance::Variational);
        for (k, v) in sol.values.iter().enumerate() {
            let q = axis.coord(k);
            assert!(close(*v, -q.abs() - t / 2.0, 1e-9), "tent at q = {q}");
        }
        // t = 0 returns the data exactly.
        let zero = variational_solve(&h, &u0, 0.0, &[axis.clone()]).unwrap();
        for (k, v) in zero.values.iter().enumerate() {
            assert!(close(*v, -axis.coord(k).abs(), 1e-13));
        }
        // A curved datum with B > 0 has a finite horizon under a curved H.
        let curved = localized_kink(0.25).unwrap();
        let b = curved.semiconcavity().unwrap();
        let horizon = 1.0 / (b * cubic_wave().c_bound());
        let err = variational_solve(&cubic_wave(), &curved, horizon + 0.01, &[axis]);
        assert!(matches!(err, Err(HjError::HorizonExceeded { .. })));
    }

    #[test]
    fn saddle_solve_matches_closed_form_on_strip() {
        let (a, b, t) = (0.75, 1.0, 0.1);
        let h = saddle();
        let u0 = crate::initial_data::min_of_quadratics(a, b, 0.25).unwrap();
        let ax = Axis::span(-0.8, -0.2, 25).unwrap();
        let ay = Axis::span(-0.4, 0.4, 17).unwrap();
        let sol = variational_solve(&h, &u0, t, &[ax.clone(), ay.clone()]).unwrap();
        let mut worst = 0.0f64;
        for i in 0..ax.n {
            let q1 = ax.coord(i);
            if q1 > -1.5 * b * t {
                continue;
            }
            for j in 0..ay.n {
                let q2 = ay.coord(j);
                let oracle = saddle_closed_form(a, b, t, q1, q2).unwrap();
                worst = worst.max((sol.values[i * ay.n + j] - oracle).abs());
            }
        }
        assert!(worst <= 1e-8, "closed-form deviation {worst:e}");
    }

    #[test]
    fn saddle_closed_form_frozen_values() {
        let v = saddle_closed_form(0.75, 1.0, 0.1, -0.5, 0.0).unwrap();
        assert!(close(v, 0.13546875, 1e-12));
        // Shock locus: both atoms agree there.
        let (a, b, t, q1) = (0.75f64, 1.0f64, 0.1f64, -0.16f64);
        let q2 = q1 * q1
            + 2.0 * (a + b) * t * q1
            + t * t * (a * a + a * b + b * b);
        assert!(close(q2, -0.007275, 1e-12));
        let left = a * ((q1 + a * t).powi(2) - q2);
        let right = b * ((q1 + b * t).powi(2) - q2);
        assert!(close(left, right, 1e-12));
        let tie = saddle_closed_form(a, b, t, q1, q2).unwrap();
        assert!(close(tie, 0.010875, 1e-12));
        // t = 0 reduces to the datum on q1^2 >= q2.
        let z = saddle_closed_form(a, b, 0.0, -0.3, 0.05).unwrap();
        assert!(close(z, a * (0.09 - 0.05), 1e-14));
        // Outside the strip the formula refuses.
        assert!(matches!(
            saddle_closed_form(a, b, t, -0.1, 0.0),
            Err(HjError::DomainViolation(_))
        ));
        assert!(matches!(
            saddle_closed_form(a, b, t, -1.2, 0.0),
            Err(HjError::DomainViolation(_))
        ));
        assert!(saddle_closed_form(1.0, 0.75, t, -0.5, 0.0).is_err());
    }

    #[test]
    fn saddle_closed_form_equals_brute_force() {
        // On the strip the inner minimum over c sits at an endpoint, so a
        // c-grid scan reproduces the closed form to rounding.
        let (a, b, t) = (0.75, 1.0, 0.1);
        let samples = 10_000;
        for &(q1, q2) in &[(-0.5, 0.0), (-0.3, 0.1), (-0.16, -0.007275), (-0.9, -0.2)] {
            let mut best = f64::INFINITY;
            let mut argmin = a;
            for i in 0..=samples {
                let c = if i == samples {
                    b
                } else {
                    a + (b - a) * i as f64 / samples as f64
                };
                let v = c * ((q1 + c * t).powi(2) - q2);
                if v < best {
                    best = v;
                    argmin = c;
                }
            }
            let cf = saddle_closed_form(a, b, t, q1, q2).unwrap();
            assert!(close(cf, best, 1e-10), "brute force at ({q1}, {q2})");
            assert!(
                argmin == a || argmin == b,
                "interior argmin {argmin} at ({q1}, {q2})"
            );
        }
    }

    #[test]
    fn saddle_family_realizes_its_datum() {
        let (family, u0) = saddle_family(0.6, 1.4, 0.25).unwrap();
        // Points on and off the tie curve q2 = f(q1).
        let pts = vec![
            vec![-0.5, 0.25],
            vec![-0.5, 0.1],
            vec![-0.5, 0.6],
            vec![0.3, 0.09],
            vec![0.7, 0.2],
        ];
        let (min_res, attain_res) = family.validate_against(&u0, &pts).unwrap();
        assert!(min_res <= 1e-10, "envelope minimum residual {min_res:e}");
        assert!(attain_res <= 1e-8, "attainment residual {attain_res:e}");
    }

    #[test]
    fn envelope_single_member_is_classical() {
        let h = saddle();
        let (family, _) = saddle_family(0.6, 1.4, 0.25).unwrap();
        let c = 0.9;
        let single = EnvelopeFamily::new(
            FamilyParams::Finite(vec![c]),
            {
                let f = family.member.clone();
                Arc::new(move |x| f(x))
            },
            family.lipschitz(),
            family.semiconcavity(),
        )
        .unwrap();
        let ax = Axis::span(-0.7, -0.3, 9).unwrap();
        let ay = Axis::span(-0.3, 0.3, 7).unwrap();
        let sol = envelope_solve(&h, &single, 0.1, &[ax.clone(), ay.clone()]).unwrap();
        assert_eq!(sol.provenance, Provenance::Envelope);
        let member = single.member(c).unwrap();
        let mut k = 0;
        for x in ax.coords() {
            for y in ay.coords() {
                let cl =
                    crate::characteristics::classical_solve(&h, &member, 0.1, &[x, y]).unwrap();
                assert!(close(sol.values[k], cl.value, 1e-10));
                k += 1;
            }
        }
    }

    #[test]
    fn envelope_member_matches_transport_formula() {
        // Classical member solutions obey u_c(t, q) = c(f(q1 + ct) - q2)
        // in the quadratic zone.
        let h = saddle();
        let (family, _) = saddle_family(0.6, 1.4, 0.25).unwrap();
        let t = 0.1;
        for &c in &[0.6, 1.0, 1.4] {
            let single = EnvelopeFamily::new(
                FamilyParams::Finite(vec![c]),
                {
                    let f = family.member.clone();
                    Arc::new(move |x| f(x))
                },
                family.lipschitz(),
                family.semiconcavity(),
            )
            .unwrap();
            let ax = Axis::span(-0.8, -0.2, 13).unwrap();
            let ay = Axis::span(-0.4, 0.4, 9).unwrap();
            let sol = envelope_solve(&h, &single, t, &[ax.clone(), ay.clone()]).unwrap();
            let mut k = 0;
            for x in ax.coords() {
                for y in ay.coords() {
                    let oracle = c * ((x + c * t).powi(2) - y);
                    assert!(
                        close(sol.values[k], oracle, 1e-9),
                        "member c = {c} at ({x}, {y})"
                    );
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn envelope_agrees_with_variational_on_saddle() {
        let (a, b, t) = (0.6, 1.4, 0.1);
        let h = saddle();
        let (family, u0) = saddle_family(a, b, 0.25).unwrap();
        let ax = Axis::span(-0.9, -0.3, 21).unwrap();
        let ay = Axis::span(-0.4, 0.4, 15).unwrap();
        let env = envelope_solve(&h, &family, t, &[ax.clone(), ay.clone()]).unwrap();
        let var = variational_solve(&h, &u0, t, &[ax, ay]).unwrap();
        let mut worst = 0.0f64;
        for (e, v) in env.values.iter().zip(&var.values) {
            worst = worst.max((e - v).abs());
        }
        assert!(worst <= 1e-8, "route disagreement {worst:e}");
    }

    #[test]
    fn operator_axioms_hold_for_variational_solver() {
        let h = half_square(1).unwrap();
        let base = neg_abs();
        // A concave-kink datum dominating the tent: -|q| + q^2/8 + 0.2.
        let dominating = polynomial_pieces(
            (-4.0, 4.0),
            &[0.0],
            &[vec![0.2, 1.0, 0.125], vec![0.2, -1.0, 0.125]],
        )
        .unwrap();

        let mut contraction_pairs = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let mk = |rng: &mut ChaCha8Rng| {
                let coeffs = vec![
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(-0.1..0.1),
                ];
                polynomial_pieces((-4.0, 4.0), &[], &[coeffs]).unwrap()
            };
            contraction_pairs.push((mk(&mut rng), mk(&mut rng)));
        }

        let samples = AxiomSamples {
            monotone_pairs: vec![(base.clone(), dominating)],
            shift_cases: vec![(base.clone(), 5.0), (base.clone(), -1.25)],
            contraction_pairs,
            t: 0.1,
            axes: vec![Axis::span(-1.0, 1.0, 101).unwrap()],
        };
        let report = check_operator_axioms(
            &|h, u, t, axes| variational_solve(h, u, t, axes),
            &h,
            &samples,
        )
        .unwrap();
        assert!(report.passes(), "violations: {:?}", report.violations);
        // The constant shift is realized almost exactly.
        assert!(report.additivity_worst <= 1e-12);
        assert!(report.membership_worst <= 1e-9);
    }

    #[test]
    fn local_estimate_margins() {
        let axis = Axis::span(-1.0, 1.0, 101).unwrap();
        // Identical Hamiltonians: both terms vanish.
        let h = half_square(1).unwrap();
        let m0 = check_local_estimate(&h, &h, &neg_abs(), 0.4, &[axis.clone()]).unwrap();
        assert!(m0.abs() <= 1e-12);
        // Constant offset: solutions shift by exactly eps*t.
        let eps = 0.3;
        let h2 = poly_1d(&[eps, 0.0, 0.5], 1.0).unwrap();
        let m1 = check_local_estimate(&h, &h2, &neg_abs(), 0.4, &[axis.clone()]).unwrap();
        assert!(m1.abs() <= 1e-9, "constant-shift margin {m1:e}");
        // Quadratic inflation: margin is zero up to rounding, never below.
        let h3 = poly_1d(&[0.0, 0.0, 0.6], 1.2).unwrap();
        let m2 = check_local_estimate(&h, &h3, &neg_abs(), 0.4, &[axis]).unwrap();
        assert!(m2 >= -1e-9, "inflation margin {m2:e}");
        assert!(m2 <= 1e-6);
    }

    #[test]
    fn conjugation_identity_and_flip_1d() {
        let h = cubic_wave();
        let u0 = localized_kink(0.25).unwrap();
        let axes = vec![Axis::span(-0.4, 0.3, 141).unwrap()];
        let identity = AffineTransformParams {
            a_diag: vec![1.0],
            b: vec![0.0],
            n: vec![0.0],
            alpha: 0.0,
            lambda: 1.0,
        };
        let r0 = conjugation_check(&h, &u0, &ConjugationSpec::Affine(identity), 0.02, &axes)
            .unwrap();
        assert!(r0 <= 1e-10, "identity residual {r0:e}");
        // Momentum flip A = -1: H̄(p) = H(-p), v0(q) = u0(-q).
        let flip = AffineTransformParams {
            a_diag: vec![-1.0],
            b: vec![0.0],
            n: vec![0.0],
            alpha: 0.0,
            lambda: 1.0,
        };
        let r1 =
            conjugation_check(&h, &u0, &ConjugationSpec::Affine(flip), 0.02, &axes).unwrap();
        assert!(r1 <= 1e-8, "flip residual {r1:e}");
        // Momentum shift b: H̄(p) = H(p + b), v0 = u0 + b q.
        let shift = AffineTransformParams {
            a_diag: vec![1.0],
            b: vec![0.3],
            n: vec![0.0],
            alpha: 0.0,
            lambda: 1.0,
        };
        let r2 =
            conjugation_check(&h, &u0, &ConjugationSpec::Affine(shift), 0.02, &axes).unwrap();
        assert!(r2 <= 1e-8, "momentum-shift residual {r2:e}");
    }

    #[test]
    fn conjugation_reduction_of_the_saddle() {
        let h = saddle();
        let axes = vec![
            Axis::span(-0.6, 0.6, 41).unwrap(),
            Axis::span(-0.5, 0.5, 21).unwrap(),
        ];
        // Frozen p2 = 0: the reduced Hamiltonian vanishes and both sides
        // equal the datum itself.
        let u0 = localized_kink(0.25).unwrap();
        let r0 = conjugation_check(&h, &u0, &ConjugationSpec::Reduction { p2: 0.0 }, 0.1, &axes)
            .unwrap();
        assert!(r0 <= 1e-9, "p2 = 0 reduction residual {r0:e}");
        // Smooth datum with p2 != 0: pure transport on both sides.
        let smooth = polynomial_pieces((-4.0, 4.0), &[], &[vec![0.0, 0.0, 0.5]]).unwrap();
        let r1 = conjugation_check(
            &h,
            &smooth,
            &ConjugationSpec::Reduction { p2: -0.5 },
            0.1,
            &axes,
        )
        .unwrap();
        assert!(r1 <= 1e-8, "transport reduction residual {r1:e}");
    }

    #[test]
    fn conjugation_scaling_of_the_saddle_family() {
        // A = eps*id with lambda = eps^2 leaves H = p1 p2 invariant, so the
        // identity compares the solution of the shrunk datum at t with the
        // original datum at eps^2 t on the shrunk grid.
        let h = saddle();
        let (_, u0) = saddle_family(0.6, 1.4, 0.25).unwrap();
        let eps = 0.5;
        let tr = AffineTransformParams {
            a_diag: vec![eps, eps],
            b: vec![0.0, 0.0],
            n: vec![0.0, 0.0],
            alpha: 0.0,
            lambda: eps * eps,
        };
        let axes = vec![
            Axis::span(-1.6, -0.6, 101).unwrap(),
            Axis::span(-0.7, 0.7, 101).unwrap(),
        ];
        let res =
            conjugation_check(&h, &u0, &ConjugationSpec::Affine(tr), 0.1, &axes).unwrap();
        assert!(res <= 1e-6, "scaling residual {res:e}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closed_form_is_endpoint_minimum(
            a in 0.3f64..0.9,
            gap in 0.1f64..0.8,
            t in 0.01f64..0.2,
            q1_frac in 0.0f64..1.0,
            q2 in -0.5f64..0.5,
        ) {
            let b = a + gap;
            let lo = -1.0;
            let hi = -1.5 * b * t;
            prop_assume!(hi > lo);
            let q1 = lo + (hi - lo) * q1_frac;
            let cf = saddle_closed_form(a, b, t, q1, q2).unwrap();
            let mut brute = f64::INFINITY;
            for i in 0..=2000 {
                let c = if i == 2000 { b } else { a + (b - a) * i as f64 / 2000.0 };
                brute = brute.min(c * ((q1 + c * t).powi(2) - q2));
            }
            prop_assert!((cf - brute).abs() <= 1e-10);
        }

        #[test]
        fn variational_is_monotone_in_data_shift(
            c in 0.0f64..2.0,
            t in 0.05f64..0.3,
        ) {
            let h = half_square(1).unwrap();
            let u = neg_abs();
            let axis = Axis::span(-1.0, 1.0, 41).unwrap();
            let ru = variational_solve(&h, &u, t, &[axis.clone()]).unwrap();
            let rv = variational_solve(&h, &u.offset(c), t, &[axis]).unwrap();
            for (x, y) in ru.values.iter().zip(&rv.values) {
                prop_assert!(*x <= *y + 1e-10);
            }
        }
    }
}
