//! Geometric wavefronts and their continuous sections.
//!
//! Every generalized solution of ∂ₜu + H(∂_q u) = 0 lives on the wavefront:
//! the set of points reached by flowing admissible initial covectors,
//!
//! F = { (q₀ + t∇H(p₀), u₀(q₀) + t(p₀·∇H(p₀) − H(p₀))) : p₀ ∈ ∂u₀(q₀) },
//!
//! where ∂u₀ is the Clarke subdifferential of the data.  Each smooth piece
//! of u₀ contributes a branch parametrized by its foot q₀; each kink blows
//! up into a fan branch parametrized by the momentum p over the Clarke
//! interval.  In d = 1 the branches are exact closed-form curves; in d = 2
//! the front is sampled as a point cloud.
//!
//! A continuous single-valued selection of the front over a window is a
//! candidate generalized solution (a section); the pointwise-minimal
//! selection is the variational solution.  Sections switch branches at
//! curve crossings, and every switch with a genuine momentum jump is a
//! shock.  Dividing both front coordinates by t gives the reduced front,
//! whose fan branch
//!
//! p ↦ (H′(p), pH′(p) − H(p))
//!
//! does not depend on t at all when the kink sits at the origin with zero
//! value; this scale invariance is what makes small-time shock structure
//! visible at order one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::characteristics::{action, flow, PhaseState};
use crate::error::{HjError, Result};
use crate::grid::{Axis, Provenance, Rect, SolutionGrid};
use crate::hamiltonian::IntegrableHamiltonian;
use crate::initial_data::PiecewiseInitialCondition;

/// Cap on the number of sections [`enumerate_continuous_sections`] returns.
pub const SECTION_CAP: usize = 64;

/// Which part of the initial data generated a branch or cloud point.
///
/// Piece indices count the smooth pieces of the data in order; the
/// left/right tag records the side of the nearest kink (kink-free data is
/// tagged left).  For d = 2 min-of-two data the two smooth sheets are
/// labeled left and right in atom order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSource {
    LeftPiece(usize),
    RightPiece(usize),
    KinkFan(usize),
}

impl BranchSource {
    pub fn is_fan(&self) -> bool {
        matches!(self, BranchSource::KinkFan(_))
    }

    /// Stable text form used in CSV artifacts.
    pub fn label(&self) -> String {
        match self {
            BranchSource::LeftPiece(i) => format!("left_piece({i})"),
            BranchSource::RightPiece(i) => format!("right_piece({i})"),
            BranchSource::KinkFan(k) => format!("kink_fan({k})"),
        }
    }

    /// Inverse of [`BranchSource::label`].
    pub fn parse_label(s: &str) -> Result<Self> {
        let err = || HjError::InvalidInput(format!("unknown branch source label {s:?}"));
        let (kind, rest) = s.split_once('(').ok_or_else(err)?;
        let idx: usize = rest.strip_suffix(')').ok_or_else(err)?.parse().map_err(|_| err())?;
        match kind {
            "left_piece" => Ok(BranchSource::LeftPiece(idx)),
            "right_piece" => Ok(BranchSource::RightPiece(idx)),
            "kink_fan" => Ok(BranchSource::KinkFan(idx)),
            _ => Err(err()),
        }
    }
}

/// One point of a d = 1 branch: position, action value, momentum, foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub q: f64,
    pub s: f64,
    pub p: f64,
    pub q0: f64,
}

/// One sampled front point in cloud mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint {
    pub q: Vec<f64>,
    pub s: f64,
    pub p: Vec<f64>,
    pub q0: Vec<f64>,
    pub source: BranchSource,
}

type ParamMap = Arc<dyn Fn(f64) -> BranchPoint + Send + Sync>;
type ParamScalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form branch of a d = 1 front: a curve s ↦ (q(s), S(s), p(s), q₀(s)).
///
/// Piece branches are parametrized by the foot q₀; fan branches by the
/// momentum p over the Clarke interval of their kink.
#[derive(Clone)]
pub struct FrontBranch {
    source: BranchSource,
    range: (f64, f64),
    point: ParamMap,
    xprime: ParamScalar,
    curvature: Option<ParamScalar>,
}

impl std::fmt::Debug for FrontBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrontBranch")
            .field("source", &self.source)
            .field("range", &self.range)
            .finish()
    }
}

impl FrontBranch {
    pub fn source(&self) -> BranchSource {
        self.source
    }

    /// Parameter interval [a, b].
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Branch point at parameter `s` (not clipped to the range).
    pub fn point(&self, s: f64) -> BranchPoint {
        (self.point)(s)
    }

    /// Derivative of the position coordinate with respect to the parameter.
    pub fn xprime(&self, s: f64) -> f64 {
        (self.xprime)(s)
    }
}

/// Wavefront of the Cauchy problem at one time, with enough context (the
/// Hamiltonian and the data) to resolve sections and check membership.
#[derive(Clone)]
pub struct Front {
    t: f64,
    dim: usize,
    reduced: bool,
    branches: Vec<FrontBranch>,
    cloud: Vec<FrontPoint>,
    h: IntegrableHamiltonian,
    u0: PiecewiseInitialCondition,
}

impl std::fmt::Debug for Front {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Front")
            .field("t", &self.t)
            .field("dim", &self.dim)
            .field("reduced", &self.reduced)
            .field("branches", &self.branches.len())
            .field("cloud", &self.cloud.len())
            .finish()
    }
}

impl Front {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True for fronts built by [`reduced_front`] (coordinates divided by t).
    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn branches(&self) -> &[FrontBranch] {
        &self.branches
    }

    pub fn cloud(&self) -> &[FrontPoint] {
        &self.cloud
    }

    pub fn hamiltonian(&self) -> &IntegrableHamiltonian {
        &self.h
    }

    pub fn initial_data(&self) -> &PiecewiseInitialCondition {
        &self.u0
    }

    /// Splits every branch into maximal sub-arcs on which the position is
    /// strictly monotone in the parameter, so each arc is a graph over a
    /// q-interval.  Fold parameters (zeros of x′) are located by a sign
    /// scan — 2049 samples on fan branches, 1025 on piece branches — and
    /// refined by bisection.  Arcs whose q-extent is negligible (a fan at
    /// t = 0 collapses to a point) are dropped.
    pub fn strands(&self) -> Result<Vec<Strand>> {
        if self.branches.is_empty() {
            return Err(HjError::Unsupported(
                "strand resolution needs a branch front (d = 1)".into(),
            ));
        }
        let mut out = Vec::new();
        for (bi, br) in self.branches.iter().enumerate() {
            let (a, b) = br.range;
            if !(b > a) {
                continue;
            }
            let n = if br.source.is_fan() { 2049 } else { 1025 };
            let params: Vec<f64> =
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
            let xp: Vec<f64> = params.iter().map(|&s| br.xprime(s)).collect();
            let mut cuts = vec![a];
            for i in 0..n - 1 {
                if xp[i] == 0.0 && i > 0 {
                    cuts.push(params[i]);
                } else if xp[i] * xp[i + 1] < 0.0 {
                    let (mut lo, mut hi) = (params[i], params[i + 1]);
                    let mut flo = xp[i];
                    for _ in 0..90 {
                        let mid = 0.5 * (lo + hi);
                        let fm = br.xprime(mid);
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if flo * fm < 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            flo = fm;
                        }
                    }
                    cuts.push(0.5 * (lo + hi));
                }
            }
            cuts.push(b);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|x, y| (*x - *y).abs() < (b - a) * 1e-9);
            let slope_bound = if br.source.is_fan() {
                a.abs().max(b.abs())
            } else {
                self.u0.lipschitz()
            };
            for w in cuts.windows(2) {
                let (c0, c1) = (w[0], w[1]);
                if !(c1 > c0) {
                    continue;
                }
                let q0v = br.point(c0).q;
                let q1v = br.point(c1).q;
                if (q1v - q0v).abs() < 1e-13 {
                    continue;
                }
                out.push(Strand {
                    branch: bi,
                    source: br.source,
                    prange: (c0, c1),
                    qlo: q0v.min(q1v),
                    qhi: q0v.max(q1v),
                    increasing: q1v > q0v,
                    slope_bound,
                    point: br.point.clone(),
                });
            }
        }
        Ok(out)
    }
}

/// Maximal monotone-in-q sub-arc of a branch, usable as a graph q ↦ S(q).
#[derive(Clone)]
pub struct Strand {
    /// Index of the parent branch in the front's branch list.
    pub branch: usize,
    pub source: BranchSource,
    prange: (f64, f64),
    qlo: f64,
    qhi: f64,
    increasing: bool,
    slope_bound: f64,
    point: ParamMap,
}

impl std::fmt::Debug for Strand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Strand")
            .field("branch", &self.branch)
            .field("source", &self.source)
            .field("prange", &self.prange)
            .field("q_range", &(self.qlo, self.qhi))
            .finish()
    }
}

impl Strand {
    pub fn q_range(&self) -> (f64, f64) {
        (self.qlo, self.qhi)
    }

    pub fn param_range(&self) -> (f64, f64) {
        self.prange
    }

    /// Bound on |S′(q)| along the strand (the momentum stays below it).
    pub fn slope_bound(&self) -> f64 {
        self.slope_bound
    }

    pub fn covers(&self, q: f64) -> bool {
        let tol = 1e-11 * (1.0 + self.qlo.abs().max(self.qhi.abs()));
        q >= self.qlo - tol && q <= self.qhi + tol
    }

    /// Inverts the monotone position map by bisection and returns the
    /// branch point over `q` (clamped to the covered interval).
    pub fn at_q(&self, q: f64) -> BranchPoint {
        let qc = q.clamp(self.qlo, self.qhi);
        // Orient the parameter interval so the position increases sa -> sb.
        let (mut sa, mut sb) = self.prange;
        if !self.increasing {
            std::mem::swap(&mut sa, &mut sb);
        }
        for _ in 0..100 {
            let sm = 0.5 * (sa + sb);
            if (self.point)(sm).q < qc {
                sa = sm;
            } else {
                sb = sm;
            }
            if (sb - sa).abs() < 1e-15 * (1.0 + sa.abs().max(sb.abs())) {
                break;
            }
        }
        (self.point)(0.5 * (sa + sb))
    }
}

/// Continuous single-valued selection of a 1D front over a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// Grid coordinates.
    pub q: Vec<f64>,
    /// Selected action value per node.
    pub values: Vec<f64>,
    /// Strand index per node (into the front's strand list).
    pub strand: Vec<usize>,
    /// Source of the selected branch per node.
    pub source: Vec<BranchSource>,
    /// Branch parameter per node.
    pub param: Vec<f64>,
    /// Branch switches with a genuine momentum jump, ordered by q.
    pub shocks: Vec<ShockPoint>,
}

/// A branch switch with distinct one-sided momenta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockPoint {
    pub t: f64,
    pub q: f64,
    pub p_left: f64,
    pub p_right: f64,
    pub left_source: BranchSource,
    pub right_source: BranchSource,
}

/// Builds the exact branch front of 1D data over a parameter window.
///
/// One branch per smooth piece of the data (parametrized by the foot q₀,
/// clipped to the window) plus one fan branch per kink inside the window
/// (parametrized by the momentum over the Clarke interval).  The window
/// must sit inside the data's domain; choose it larger than any section
/// grid by at least t·sup|H′| so every fiber stays populated.
pub fn build_front_1d(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    window: (f64, f64),
) -> Result<Front> {
    assemble_front_1d(h, u0, t, window, false)
}

/// Front with both output coordinates divided by t.
///
/// Fan branches are assembled directly in reduced form, q̃ = q_k/t + H′(p)
/// and S̃ = u₀(q_k)/t + pH′(p) − H(p), so a kink at the origin with zero
/// value yields a fan branch whose points are bitwise identical for every
/// t > 0.
pub fn reduced_front(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    window: (f64, f64),
) -> Result<Front> {
    if !(t > 0.0) {
        return Err(HjError::InvalidInput(format!(
            "reduced front needs t > 0, got {t}"
        )));
    }
    assemble_front_1d(h, u0, t, window, true)
}

fn assemble_front_1d(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    window: (f64, f64),
    reduced: bool,
) -> Result<Front> {
    if h.dim() != 1 || u0.dim() != 1 {
        return Err(HjError::InvalidInput(format!(
            "1D front needs 1D Hamiltonian and data, got dims {} and {}",
            h.dim(),
            u0.dim()
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(HjError::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(HjError::InvalidInput(format!(
            "window must satisfy lo < hi, got ({lo}, {hi})"
        )));
    }
    let dom = u0.domain();
    if lo < dom.lo(0) || hi > dom.hi(0) {
        return Err(HjError::InvalidInput(format!(
            "window ({lo}, {hi}) leaves the data domain [{}, {}]",
            dom.lo(0),
            dom.hi(0)
        )));
    }

    let kinks: Vec<f64> = match u0.kinks_1d() {
        Ok(ks) => ks.into_iter().filter(|k| *k > lo && *k < hi).collect(),
        // Smooth single-atom data has no kink structure to report.
        Err(_) if u0.atoms().is_some_and(|a| a.len() == 1) => vec![],
        Err(e) => return Err(e),
    };

    let mut edges = vec![lo];
    if let Some(bks) = u0.breakpoints() {
        for &b in bks {
            if b > lo + 1e-12 && b < hi - 1e-12 {
                edges.push(b);
            }
        }
    }
    edges.push(hi);

    let side_of = |mid: f64, piece: usize| -> BranchSource {
        if kinks.is_empty() {
            return BranchSource::LeftPiece(piece);
        }
        let nearest = kinks
            .iter()
            .copied()
            .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
            .unwrap();
        if mid < nearest {
            BranchSource::LeftPiece(piece)
        } else {
            BranchSource::RightPiece(piece)
        }
    };

    let mut branches = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-13 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let piece = u0
            .breakpoints()
            .map_or(0, |bks| bks.iter().filter(|&&x| x < mid).count());
        // One-sided derivatives at piece edges: nudge the derivative query
        // into the open interior so endpoint evaluations use this piece's
        // slope, not the neighbor's.
        let d = (b - a) * 1e-12;
        let (hs, us) = (h.clone(), u0.clone());
        let point: ParamMap = Arc::new(move |q0: f64| {
            let qc = q0.clamp(a + d, b - d);
            let p = us.grad(&[qc])[0];
            let hp = hs.grad1(p);
            let act = p * hp - hs.eval1(p);
            if reduced {
                BranchPoint { q: q0 / t + hp, s: us.eval(&[q0]) / t + act, p, q0 }
            } else {
                BranchPoint { q: q0 + t * hp, s: us.eval(&[q0]) + t * act, p, q0 }
            }
        });
        let (hs2, us2) = (h.clone(), u0.clone());
        let xprime: ParamScalar = Arc::new(move |q0: f64| {
            let qc = q0.clamp(a + d, b - d);
            let c = hs2.hess1(us2.grad(&[qc])[0]) * us2.hess(&[qc])[(0, 0)];
            if reduced {
                1.0 / t + c
            } else {
                1.0 + t * c
            }
        });
        let us3 = u0.clone();
        let curvature: ParamScalar =
            Arc::new(move |q0: f64| us3.hess(&[q0.clamp(a + d, b - d)])[(0, 0)]);
        branches.push(FrontBranch {
            source: side_of(mid, piece),
            range: (a, b),
            point,
            xprime,
            curvature: Some(curvature),
        });
    }

    for (k, &xk) in kinks.iter().enumerate() {
        let fan = u0.clarke_derivative(&[xk])?;
        let (plo, phi) = fan.interval()?;
        let base = u0.eval(&[xk]);
        let hs = h.clone();
        let point: ParamMap = Arc::new(move |p: f64| {
            let hp = hs.grad1(p);
            let act = p * hp - hs.eval1(p);
            if reduced {
                BranchPoint { q: xk / t + hp, s: base / t + act, p, q0: xk }
            } else {
                BranchPoint { q: xk + t * hp, s: base + t * act, p, q0: xk }
            }
        });
        let hs2 = h.clone();
        let xprime: ParamScalar = Arc::new(move |p: f64| {
            if reduced {
                hs2.hess1(p)
            } else {
                t * hs2.hess1(p)
            }
        });
        branches.push(FrontBranch {
            source: BranchSource::KinkFan(k),
            range: (plo, phi),
            point,
            xprime,
            curvature: None,
        });
    }

    Ok(Front {
        t,
        dim: 1,
        reduced,
        branches,
        cloud: Vec::new(),
        h: h.clone(),
        u0: u0.clone(),
    })
}

/// Samples the front as a point cloud (d = 1 or 2) over a window.
///
/// Smooth regions are sampled on a lattice with `n_piece` nodes per axis;
/// every kink (d = 1), kink line (separable d = 2 data), or two-sheet tie
/// curve (min-of-two data) is sampled with `n_fan` momenta per located fan
/// point.  Every pushed point satisfies the membership test by
/// construction; [`membership_residual`] re-checks it independently.
pub fn build_front_cloud(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    window: &Rect,
    n_piece: usize,
    n_fan: usize,
) -> Result<Front> {
    let d = u0.dim();
    if h.dim() != d {
        return Err(HjError::InvalidInput(format!(
            "Hamiltonian dimension {} does not match data dimension {d}",
            h.dim()
        )));
    }
    if !(1..=2).contains(&d) {
        return Err(HjError::Unsupported(format!(
            "cloud fronts cover d = 1 and 2, got {d}"
        )));
    }
    if window.dim() != d {
        return Err(HjError::InvalidInput("window dimension mismatch".into()));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(HjError::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    if !(2..=1025).contains(&n_piece) || !(2..=4097).contains(&n_fan) {
        return Err(HjError::InvalidInput(format!(
            "sample counts out of range: n_piece = {n_piece}, n_fan = {n_fan}"
        )));
    }

    let mut cloud = Vec::new();
    let mut push = |q0: Vec<f64>, p: Vec<f64>, source: BranchSource| {
        let hp = h.grad(&p);
        let mut ph = 0.0;
        for i in 0..d {
            ph += p[i] * hp[i];
        }
        let act = ph - h.eval(&p);
        let q: Vec<f64> = (0..d).map(|i| q0[i] + t * hp[i]).collect();
        let s = u0.eval(&q0) + t * act;
        cloud.push(FrontPoint { q, s, p, q0, source });
    };

    if d == 1 {
        let (lo, hi) = (window.lo(0), window.hi(0));
        let kinks = u0.kinks_1d()?;
        for i in 0..n_piece {
            let q0 = lo + (hi - lo) * i as f64 / (n_piece - 1) as f64;
            if kinks.iter().any(|&k| (q0 - k).abs() < 1e-12) {
                continue;
            }
            let p = u0.grad(&[q0])[0];
            push(vec![q0], vec![p], BranchSource::LeftPiece(0));
        }
        for (k, &xk) in kinks.iter().enumerate() {
            if xk < lo || xk > hi {
                continue;
            }
            let (plo, phi) = u0.clarke_derivative(&[xk])?.interval()?;
            for j in 0..n_fan {
                let p = plo + (phi - plo) * j as f64 / (n_fan - 1) as f64;
                push(vec![xk], vec![p], BranchSource::KinkFan(k));
            }
        }
    } else if let Some(atoms) = u0.atoms() {
        if atoms.len() > 2 {
            return Err(HjError::Unsupported(
                "cloud fronts handle at most two smooth sheets".into(),
            ));
        }
        let lat = window.lattice(n_piece);
        for q0 in lat {
            let active = u0.active_atoms(&q0, 1e-10).unwrap_or_default();
            if active.len() != 1 {
                continue;
            }
            let i = active[0];
            let p = (atoms[i].grad)(&q0);
            let src = if i == 0 {
                BranchSource::LeftPiece(0)
            } else {
                BranchSource::RightPiece(i)
            };
            push(q0, p, src);
        }
        if atoms.len() == 2 {
            // Trace the tie curve column by column and fan across the
            // gradient segment at every located tie point.
            let g = |q: &[f64]| (atoms[0].value)(q) - (atoms[1].value)(q);
            for i in 0..n_piece {
                let x = window.lo(0)
                    + (window.hi(0) - window.lo(0)) * i as f64 / (n_piece - 1) as f64;
                let mut prev_y = window.lo(1);
                let mut prev_g = g(&[x, prev_y]);
                for j in 1..n_piece {
                    let y = window.lo(1)
                        + (window.hi(1) - window.lo(1)) * j as f64 / (n_piece - 1) as f64;
                    let gy = g(&[x, y]);
                    if prev_g * gy < 0.0 {
                        let (mut ya, mut yb, mut ga) = (prev_y, y, prev_g);
                        for _ in 0..80 {
                            let ym = 0.5 * (ya + yb);
                            let gm = g(&[x, ym]);
                            if ga * gm <= 0.0 {
                                yb = ym;
                            } else {
                                ya = ym;
                                ga = gm;
                            }
                        }
                        let q0 = vec![x, 0.5 * (ya + yb)];
                        let g1 = (atoms[0].grad)(&q0);
                        let g2 = (atoms[1].grad)(&q0);
                        for m in 0..n_fan {
                            let mu = m as f64 / (n_fan - 1) as f64;
                            let p: Vec<f64> =
                                (0..d).map(|c| (1.0 - mu) * g1[c] + mu * g2[c]).collect();
                            push(q0.clone(), p, BranchSource::KinkFan(0));
                        }
                    }
                    prev_y = y;
                    prev_g = gy;
                }
            }
        }
    } else if let Some((base, tilt)) = u0.separable_parts() {
        let kinks = base.kinks_1d()?;
        let lat = window.lattice(n_piece);
        for q0 in lat {
            if kinks.iter().any(|&k| (q0[0] - k).abs() < 1e-12) {
                continue;
            }
            let p = u0.grad(&q0);
            push(q0, p, BranchSource::LeftPiece(0));
        }
        for (k, &xk) in kinks.iter().enumerate() {
            if xk < window.lo(0) || xk > window.hi(0) {
                continue;
            }
            let (plo, phi) = base.clarke_derivative(&[xk])?.interval()?;
            for j in 0..n_piece {
                let y =
                    window.lo(1) + (window.hi(1) - window.lo(1)) * j as f64 / (n_piece - 1) as f64;
                for m in 0..n_fan {
                    let p1 = plo + (phi - plo) * m as f64 / (n_fan - 1) as f64;
                    push(vec![xk, y], vec![p1, tilt], BranchSource::KinkFan(k));
                }
            }
        }
    } else {
        // Smooth data: lattice of regular points only.
        for q0 in window.lattice(n_piece) {
            let p = u0.grad(&q0);
            push(q0, p, BranchSource::LeftPiece(0));
        }
    }

    Ok(Front {
        t,
        dim: d,
        reduced: false,
        branches: Vec::new(),
        cloud,
        h: h.clone(),
        u0: u0.clone(),
    })
}

/// Slope dS/dq of the branch at a parameter; equals the momentum there.
///
/// On a fan branch S′(p) = p·x′(p) and x′(p) = tH″(p), so the slope is p
/// wherever the parametrization is regular; on a piece branch the same
/// cancellation gives u₀′(q₀).
pub fn branch_slope(branch: &FrontBranch, s: f64) -> Result<f64> {
    let xp = branch.xprime(s);
    if xp.abs() <= 1e-12 {
        return Err(HjError::DegenerateParam(format!(
            "x'({s}) = {xp:e} on a {} branch",
            branch.source.label()
        )));
    }
    Ok(branch.point(s).p)
}

/// Sign of the branch curvature as a graph: the sign of u₀″(q₀).
///
/// Only piece branches carry data curvature; fan branches are unsupported.
pub fn branch_convexity_sign(branch: &FrontBranch, s: f64) -> Result<i8> {
    let cur = branch.curvature.as_ref().ok_or_else(|| {
        HjError::Unsupported("convexity sign is defined on piece branches only".into())
    })?;
    let c = cur(s);
    Ok(if c > 1e-12 {
        1
    } else if c < -1e-12 {
        -1
    } else {
        0
    })
}

/// Switch between two strands inside one grid cell.
#[derive(Debug, Clone, Copy)]
struct SwitchPoint {
    q: f64,
    left: BranchPoint,
    right: BranchPoint,
}

const GLUE_TOL: f64 = 1e-8;
const TOUCH_TOL: f64 = 1e-9;

/// Locates a continuity-preserving switch from strand `k` to strand `l`
/// within the cell [qa, qb]: a transversal crossing of the two curves, or
/// a touching point where the values agree (branch ends gluing to their
/// continuations).  A switch located at the right cell edge is deferred to
/// the next cell so each geometric switch is counted exactly once.
fn find_switch(
    sk: &Strand,
    sl: &Strand,
    qa: f64,
    qb: f64,
    last_cell: bool,
) -> Result<Option<SwitchPoint>> {
    let olo = qa.max(sk.qlo).max(sl.qlo);
    let ohi = qb.min(sk.qhi).min(sl.qhi);
    if ohi < olo - 1e-12 {
        return Ok(None);
    }
    let width = (ohi - olo).max(0.0);
    let diff = |q: f64| sk.at_q(q).s - sl.at_q(q).s;

    // Cheap rejection: both curves are Lipschitz with constant bounded by
    // their momentum ranges, so far-apart endpoint values rule out any
    // crossing or touch inside the cell.
    let lip = sk.slope_bound + sl.slope_bound;
    let d_lo = diff(olo);
    let d_hi = if width > 0.0 { diff(ohi) } else { d_lo };
    if d_lo.abs().min(d_hi.abs()) > width * lip + GLUE_TOL {
        return Ok(None);
    }

    let m = if width > 0.0 { 17 } else { 1 };
    let qs: Vec<f64> = if m == 1 {
        vec![olo]
    } else {
        (0..m).map(|i| olo + width * i as f64 / (m - 1) as f64).collect()
    };
    let ds: Vec<f64> = qs.iter().map(|&q| diff(q)).collect();

    // Only samples clear of the touch tolerance carry a definite sign;
    // value differences at noise level (endpoint glues, shared points)
    // must not masquerade as transversal crossings.
    let definite: Vec<(usize, f64)> = ds
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() > TOUCH_TOL)
        .map(|(i, &d)| (i, d))
        .collect();
    let mut brackets = Vec::new();
    for w in definite.windows(2) {
        if w[0].1 * w[1].1 < 0.0 {
            brackets.push((w[0].0, w[1].0));
        }
    }
    if brackets.len() >= 2 {
        return Err(HjError::ResolutionTooCoarse(0.5 * (qa + qb)));
    }

    let qstar = if brackets.len() == 1 {
        let (i, j) = brackets[0];
        let (mut x0, mut x1, mut f0) = (qs[i], qs[j], ds[i]);
        for _ in 0..200 {
            let xm = 0.5 * (x0 + x1);
            let fm = diff(xm);
            if fm == 0.0 {
                x0 = xm;
                x1 = xm;
                break;
            }
            if f0 * fm < 0.0 {
                x1 = xm;
            } else {
                x0 = xm;
                f0 = fm;
            }
            if x1 - x0 < 1e-15 * (1.0 + xm.abs()) {
                break;
            }
        }
        0.5 * (x0 + x1)
    } else {
        // No transversal crossing: accept a touching point (typically a
        // branch endpoint gluing to its continuation).
        let (mut bi, mut bv) = (0usize, f64::INFINITY);
        for (i, &v) in ds.iter().enumerate() {
            if v.abs() < bv {
                bv = v.abs();
                bi = i;
            }
        }
        if bv > TOUCH_TOL {
            return Ok(None);
        }
        qs[bi]
    };

    if !last_cell && qstar >= qb - 1e-9 * (qb - qa) {
        return Ok(None);
    }
    let left = sk.at_q(qstar);
    let right = sl.at_q(qstar);
    if (left.s - right.s).abs() > GLUE_TOL {
        return Ok(None);
    }
    Ok(Some(SwitchPoint { q: qstar, left, right }))
}

fn strand_values_on_grid(strands: &[Strand], grid: &Axis) -> Vec<Vec<Option<BranchPoint>>> {
    (0..grid.n)
        .map(|i| {
            let q = grid.coord(i);
            strands
                .iter()
                .map(|st| if st.covers(q) { Some(st.at_q(q)) } else { None })
                .collect()
        })
        .collect()
}

/// Enumerates every continuous single-valued selection of the front over
/// the grid.
///
/// Branches are resolved into monotone strands, switches are located cell
/// by cell (transversal crossings by sign change and bisection, endpoint
/// glues by value match), and all walks across the grid are enumerated.
/// Results are sorted by their value vectors; each section records its
/// shocks (switches with momentum jump above 1e-8).
///
/// Errors: [`HjError::ResolutionTooCoarse`] if one cell hides two
/// crossings of the same strand pair, [`HjError::SectionOverflow`] past
/// [`SECTION_CAP`] sections.
pub fn enumerate_continuous_sections(front: &Front, grid: &Axis) -> Result<Vec<Section>> {
    let strands = front.strands()?;
    let n = grid.n;
    let ns = strands.len();
    let vals = strand_values_on_grid(&strands, grid);

    // All admissible switches per cell.
    let mut cell_switches: Vec<Vec<(usize, usize, SwitchPoint)>> = vec![Vec::new(); n - 1];
    for (i, slot) in cell_switches.iter_mut().enumerate() {
        let (qa, qb) = (grid.coord(i), grid.coord(i + 1));
        for k in 0..ns {
            if vals[i][k].is_none() {
                continue;
            }
            for l in 0..ns {
                if l == k || vals[i + 1][l].is_none() {
                    continue;
                }
                if let Some(sw) = find_switch(&strands[k], &strands[l], qa, qb, i == n - 2)? {
                    slot.push((k, l, sw));
                }
            }
        }
    }

    // Depth-first walk over node-strand assignments.
    let mut complete: Vec<(Vec<usize>, Vec<SwitchPoint>)> = Vec::new();
    let mut stack: Vec<(Vec<usize>, Vec<SwitchPoint>)> = (0..ns)
        .rev()
        .filter(|&k| vals[0][k].is_some())
        .map(|k| (vec![k], Vec::new()))
        .collect();
    while let Some((path, sws)) = stack.pop() {
        let i = path.len() - 1;
        if i == n - 1 {
            complete.push((path, sws));
            if complete.len() > SECTION_CAP {
                return Err(HjError::SectionOverflow(SECTION_CAP));
            }
            continue;
        }
        let k = *path.last().unwrap();
        if vals[i + 1][k].is_some() {
            let mut next = path.clone();
            next.push(k);
            stack.push((next, sws.clone()));
        }
        for &(kk, l, sw) in &cell_switches[i] {
            if kk != k {
                continue;
            }
            let mut next = path.clone();
            next.push(l);
            let mut nsws = sws.clone();
            nsws.push(sw);
            stack.push((next, nsws));
        }
    }

    let mut sections: Vec<Section> = complete
        .into_iter()
        .map(|(path, sws)| {
            let mut values = Vec::with_capacity(n);
            let mut strand_ids = Vec::with_capacity(n);
            let mut source = Vec::with_capacity(n);
            let mut param = Vec::with_capacity(n);
            for (i, &k) in path.iter().enumerate() {
                let bp = vals[i][k].unwrap();
                values.push(bp.s);
                strand_ids.push(k);
                source.push(strands[k].source);
                param.push(match strands[k].source {
                    BranchSource::KinkFan(_) => bp.p,
                    _ => bp.q0,
                });
            }
            let shocks = sws
                .iter()
                .zip(path.windows(2).enumerate().filter(|(_, w)| w[0] != w[1]))
                .map(|(sw, (_, w))| (sw, w))
                .filter(|(sw, _)| (sw.left.p - sw.right.p).abs() > GLUE_TOL)
                .map(|(sw, w)| ShockPoint {
                    t: front.t,
                    q: sw.q,
                    p_left: sw.left.p,
                    p_right: sw.right.p,
                    left_source: strands[w[0]].source,
                    right_source: strands[w[1]].source,
                })
                .collect();
            Section {
                q: grid.coords().collect(),
                values,
                strand: strand_ids,
                source,
                param,
                shocks,
            }
        })
        .collect();
    sections.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(sections)
}

/// Shocks of a section (already refined during enumeration).
pub fn find_shocks(section: &Section) -> Vec<ShockPoint> {
    section.shocks.clone()
}

/// The enumerated section with the smallest values (by total sum).
pub fn minimal_continuous_section(front: &Front, grid: &Axis) -> Result<Section> {
    let sections = enumerate_continuous_sections(front, grid)?;
    sections
        .into_iter()
        .min_by(|a, b| {
            let sa: f64 = a.values.iter().sum();
            let sb: f64 = b.values.iter().sum();
            sa.total_cmp(&sb)
        })
        .ok_or_else(|| {
            HjError::Unsupported("no continuous section spans the requested grid".into())
        })
}

/// Pointwise minimum of the front's action values over a grid: the
/// variational solution.
///
/// In d = 1 the minimum runs over resolved strands.  In d = 2 cloud points
/// are binned to their nearest grid node; for every node the best seed of
/// each kind in the 3x3 bin neighborhood is polished by a Newton solve of
/// the landing equation before taking the minimum, so the result is far
/// more accurate than the bin width.
pub fn minimal_section(front: &Front, axes: &[Axis]) -> Result<SolutionGrid> {
    match front.dim {
        1 => {
            if axes.len() != 1 {
                return Err(HjError::InvalidInput(format!(
                    "1D minimal section needs one axis, got {}",
                    axes.len()
                )));
            }
            if front.branches.is_empty() {
                return Err(HjError::Unsupported(
                    "1D minimal sections need a branch front".into(),
                ));
            }
            let strands = front.strands()?;
            let grid = &axes[0];
            let mut values = Vec::with_capacity(grid.n);
            for q in grid.coords() {
                let mut best = f64::INFINITY;
                for st in &strands {
                    if st.covers(q) {
                        best = best.min(st.at_q(q).s);
                    }
                }
                if !best.is_finite() {
                    return Err(HjError::EmptyFiber(vec![q]));
                }
                values.push(best);
            }
            SolutionGrid::new(front.t, axes.to_vec(), values, Provenance::Variational)
        }
        2 => minimal_section_cloud(front, axes),
        d => Err(HjError::Unsupported(format!("minimal section in d = {d}"))),
    }
}

/// Seed kinds tracked per bin: the two smooth sheets and the fan.
const KIND_SHEET0: usize = 0;
const KIND_SHEET1: usize = 1;
const KIND_FAN: usize = 2;

fn seed_kind(source: BranchSource) -> usize {
    match source {
        BranchSource::KinkFan(_) => KIND_FAN,
        BranchSource::LeftPiece(_) => KIND_SHEET0,
        BranchSource::RightPiece(_) => KIND_SHEET1,
    }
}

fn minimal_section_cloud(front: &Front, axes: &[Axis]) -> Result<SolutionGrid> {
    if axes.len() != 2 {
        return Err(HjError::InvalidInput(format!(
            "2D minimal section needs two axes, got {}",
            axes.len()
        )));
    }
    if front.cloud.is_empty() {
        return Err(HjError::Unsupported("2D minimal sections need a cloud front".into()));
    }
    let (ax, ay) = (&axes[0], &axes[1]);
    let nb = ax.n * ay.n;
    let mut bins: Vec<[Option<usize>; 3]> = vec![[None; 3]; nb];
    for (idx, fp) in front.cloud.iter().enumerate() {
        let i = ax.nearest(fp.q[0]);
        let j = ay.nearest(fp.q[1]);
        // Points far outside the grid belong to no bin.
        if (fp.q[0] - ax.coord(i)).abs() > ax.step || (fp.q[1] - ay.coord(j)).abs() > ay.step {
            continue;
        }
        let slot = &mut bins[i * ay.n + j][seed_kind(fp.source)];
        let better = slot.is_none_or(|cur| fp.s < front.cloud[cur].s);
        if better {
            *slot = Some(idx);
        }
    }

    let mut values = Vec::with_capacity(nb);
    for i in 0..ax.n {
        for j in 0..ay.n {
            let qstar = [ax.coord(i), ay.coord(j)];
            // Best seed of each kind over the 3x3 neighborhood.
            let mut seeds: [Option<usize>; 3] = [None; 3];
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (bi, bj) = (i as i64 + di, j as i64 + dj);
                    if bi < 0 || bj < 0 || bi >= ax.n as i64 || bj >= ay.n as i64 {
                        continue;
                    }
                    let cell = &bins[bi as usize * ay.n + bj as usize];
                    for kind in 0..3 {
                        if let Some(idx) = cell[kind] {
                            let better = seeds[kind]
                                .is_none_or(|cur| front.cloud[idx].s < front.cloud[cur].s);
                            if better {
                                seeds[kind] = Some(idx);
                            }
                        }
                    }
                }
            }
            if seeds.iter().all(Option::is_none) {
                return Err(HjError::EmptyFiber(qstar.to_vec()));
            }
            let mut best = f64::INFINITY;
            let mut any_polished = false;
            for seed in seeds.into_iter().flatten() {
                let fp = &front.cloud[seed];
                let polished = if fp.source.is_fan() {
                    polish_fan_seed(front, &qstar, fp)
                } else {
                    polish_sheet_seed(front, &qstar, fp)
                };
                if let Some(v) = polished {
                    best = best.min(v);
                    any_polished = true;
                }
            }
            if !any_polished {
                // Resolution-limited fallback: nearest sampled value.
                for seed in seeds.into_iter().flatten() {
                    best = best.min(front.cloud[seed].s);
                }
            }
            values.push(best);
        }
    }
    SolutionGrid::new(front.t, axes.to_vec(), values, Provenance::Variational)
}

/// Newton solve of the landing equation q₀ + t∇H(∇a(q₀)) = q* on one
/// smooth sheet, seeded from a cloud point.  Returns the front value at
/// the query, or None if the solve fails or leaves the sheet's active set.
fn polish_sheet_seed(front: &Front, qstar: &[f64; 2], fp: &FrontPoint) -> Option<f64> {
    let t = front.t;
    let h = &front.h;
    let u0 = &front.u0;
    let atom_idx = match fp.source {
        BranchSource::LeftPiece(i) | BranchSource::RightPiece(i) => i,
        BranchSource::KinkFan(_) => return None,
    };
    let atoms = u0.atoms();
    let grad_at = |q: &[f64]| -> Vec<f64> {
        match atoms {
            Some(list) => (list[atom_idx].grad)(q),
            None => u0.grad(q),
        }
    };
    let hess_at = |q: &[f64]| match atoms {
        Some(list) => (list[atom_idx].hess)(q),
        None => u0.hess(q),
    };

    let mut q0 = [fp.q0[0], fp.q0[1]];
    let mut res = f64::INFINITY;
    for _ in 0..60 {
        let p = grad_at(&q0);
        let hp = h.grad(&p);
        let f = [q0[0] + t * hp[0] - qstar[0], q0[1] + t * hp[1] - qstar[1]];
        res = f[0].hypot(f[1]);
        if res <= 1e-11 {
            break;
        }
        let hh = h.hess(&p);
        let hu = hess_at(&q0);
        // J = I + t * HessH * HessU, assembled by hand in 2x2.
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
        let dx = [
            (f[0] * j[1][1] - f[1] * j[0][1]) / det,
            (f[1] * j[0][0] - f[0] * j[1][0]) / det,
        ];
        // Damped update: halve the step until the residual decreases.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [q0[0] - scale * dx[0], q0[1] - scale * dx[1]];
            let pt = grad_at(&trial);
            let hpt = h.grad(&pt);
            let ft =
                [trial[0] + t * hpt[0] - qstar[0], trial[1] + t * hpt[1] - qstar[1]];
            if ft[0].hypot(ft[1]) < res {
                q0 = trial;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res > 1e-9 {
        return None;
    }
    // The polished foot must still belong to this sheet.
    if let Some(active) = front.u0.active_atoms(&q0, 1e-9) {
        if !active.contains(&atom_idx) {
            return None;
        }
    }
    let p = grad_at(&q0);
    let hp = h.grad(&p);
    let act = p[0] * hp[0] + p[1] * hp[1] - h.eval(&p);
    Some(front.u0.eval(&q0) + t * act)
}

/// Gauss-Newton solve of the fan landing equation for min-of-two data:
/// unknowns are the tie-curve abscissa and the fan mixing weight.
fn polish_fan_seed(front: &Front, qstar: &[f64; 2], fp: &FrontPoint) -> Option<f64> {
    let t = front.t;
    let h = &front.h;
    let atoms = front.u0.atoms()?;
    if atoms.len() != 2 {
        return None;
    }

    // Solve the tie equation a0(x, y) = a1(x, y) for y at fixed x.
    let tie_y = |x: f64, y_seed: f64| -> Option<f64> {
        let mut y = y_seed;
        for _ in 0..40 {
            let q = [x, y];
            let val = (atoms[0].value)(&q) - (atoms[1].value)(&q);
            if val.abs() <= 1e-12 {
                return Some(y);
            }
            let dy = (atoms[0].grad)(&q)[1] - (atoms[1].grad)(&q)[1];
            if dy.abs() < 1e-13 {
                return None;
            }
            y -= val / dy;
        }
        None
    };

    let phi = |x: f64, mu: f64, y_seed: f64| -> Option<([f64; 2], f64, [f64; 2])> {
        let y = tie_y(x, y_seed)?;
        let q0 = [x, y];
        let g0 = (atoms[0].grad)(&q0);
        let g1 = (atoms[1].grad)(&q0);
        let p = [
            (1.0 - mu) * g0[0] + mu * g1[0],
            (1.0 - mu) * g0[1] + mu * g1[1],
        ];
        let hp = h.grad(&p);
        Some((
            [q0[0] + t * hp[0] - qstar[0], q0[1] + t * hp[1] - qstar[1]],
            y,
            p,
        ))
    };

    // Seed the mixing weight by projecting the sampled momentum onto the
    // gradient segment at the seed foot.
    let g0 = (atoms[0].grad)(&fp.q0);
    let g1 = (atoms[1].grad)(&fp.q0);
    let seg = [g1[0] - g0[0], g1[1] - g0[1]];
    let seg2 = seg[0] * seg[0] + seg[1] * seg[1];
    let mut mu = if seg2 > 0.0 {
        (((fp.p[0] - g0[0]) * seg[0] + (fp.p[1] - g0[1]) * seg[1]) / seg2).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let mut x = fp.q0[0];
    let mut y = fp.q0[1];

    let (mut f, ny, _) = phi(x, mu, y)?;
    y = ny;
    let mut res = f[0].hypot(f[1]);
    for _ in 0..50 {
        if res <= 1e-11 {
            break;
        }
        let dx = 1e-6 * (1.0 + x.abs());
        let dmu = 1e-6;
        let (fx, _, _) = phi(x + dx, mu, y)?;
        let (fm, _, _) = phi(x, mu + dmu, y)?;
        let j = [
            [(fx[0] - f[0]) / dx, (fm[0] - f[0]) / dmu],
            [(fx[1] - f[1]) / dx, (fm[1] - f[1]) / dmu],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            return None;
        }
        let step = [
            (f[0] * j[1][1] - f[1] * j[0][1]) / det,
            (f[1] * j[0][0] - f[0] * j[1][0]) / det,
        ];
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xt = x - scale * step[0];
            let mt = mu - scale * step[1];
            if let Some((ft, yt, _)) = phi(xt, mt, y) {
                if ft[0].hypot(ft[1]) < res {
                    x = xt;
                    mu = mt;
                    y = yt;
                    f = ft;
                    res = f[0].hypot(f[1]);
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res > 1e-9 || !(-1e-9..=1.0 + 1e-9).contains(&mu) {
        return None;
    }
    let mu = mu.clamp(0.0, 1.0);
    let (_, yf, p) = phi(x, mu, y)?;
    let q0 = [x, yf];
    let hp = h.grad(&p);
    let act = p[0] * hp[0] + p[1] * hp[1] - h.eval(&p);
    Some(front.u0.eval(&q0) + t * act)
}

/// Worst membership residual over sampled front points, recomputed from
/// first principles: flow the foot, re-evaluate the action, and measure
/// the distance from the recorded momentum to the Clarke set of the data.
///
/// Branch fronts are sampled with `samples` parameters per branch; cloud
/// fronts check every point.  Reduced fronts are rescaled, so the raw
/// membership identity does not apply and the call is rejected.
pub fn membership_residual(front: &Front, samples: usize) -> Result<f64> {
    if front.reduced {
        return Err(HjError::Unsupported(
            "membership applies to unscaled fronts only".into(),
        ));
    }
    if samples < 2 {
        return Err(HjError::InvalidInput("need at least two samples per branch".into()));
    }
    let mut worst = 0.0f64;
    let mut check = |q: &[f64], s: f64, p: &[f64], q0: &[f64]| -> Result<()> {
        let state = PhaseState::new(q0.to_vec(), p.to_vec())?;
        let flowed = flow(&front.h, front.t, &state);
        for i in 0..q.len() {
            worst = worst.max((flowed.q[i] - q[i]).abs());
        }
        let s_ref = front.u0.eval(q0) + action(&front.h, front.t, p);
        worst = worst.max((s_ref - s).abs());
        let fan = front.u0.clarke_derivative(q0)?;
        worst = worst.max(hull_distance(p, &fan.vertices));
        Ok(())
    };
    for br in &front.branches {
        let (a, b) = br.range;
        for i in 0..samples {
            let s = a + (b - a) * i as f64 / (samples - 1) as f64;
            let bp = br.point(s);
            check(&[bp.q], bp.s, &[bp.p], &[bp.q0])?;
        }
    }
    for fp in &front.cloud {
        check(&fp.q, fp.s, &fp.p, &fp.q0)?;
    }
    Ok(worst)
}

/// Distance from a point to the convex hull given by its vertex list
/// (ordered for d = 2 polygons, any order for segments and singletons).
fn hull_distance(p: &[f64], vertices: &[Vec<f64>]) -> f64 {
    let d2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    };
    match vertices.len() {
        0 => f64::INFINITY,
        1 => d2(p, &vertices[0]).sqrt(),
        _ if p.len() == 1 => {
            let lo = vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            (lo - p[0]).max(p[0] - hi).max(0.0)
        }
        2 => segment_distance(p, &vertices[0], &vertices[1]),
        _ => {
            // Convex polygon with ordered vertices: zero inside, else the
            // minimum distance to an edge.
            let n = vertices.len();
            let mut pos = 0;
            let mut neg = 0;
            for i in 0..n {
                let a = &vertices[i];
                let b = &vertices[(i + 1) % n];
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                if cross > 0.0 {
                    pos += 1;
                } else if cross < 0.0 {
                    neg += 1;
                }
            }
            if pos == 0 || neg == 0 {
                return 0.0;
            }
            (0..n)
                .map(|i| segment_distance(p, &vertices[i], &vertices[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d = p.len();
    let ab2: f64 = (0..d).map(|i| (b[i] - a[i]) * (b[i] - a[i])).sum();
    let tt = if ab2 > 0.0 {
        ((0..d).map(|i| (p[i] - a[i]) * (b[i] - a[i])).sum::<f64>() / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..d)
        .map(|i| {
            let c = a[i] + tt * (b[i] - a[i]);
            (p[i] - c) * (p[i] - c)
        })
        .sum::<f64>()
        .sqrt()
}
