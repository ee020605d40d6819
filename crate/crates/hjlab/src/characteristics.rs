//! Exact Hamiltonian flow, action, and classical solutions.
//!
//! For integrable H the characteristic system decouples: momentum is a
//! constant of motion and positions drift linearly,
//!
//! φᵗ(q, p) = (q + t∇H(p), p),
//!
//! with action 𝒜ᵗ = t(p·∇H(p) − H(p)) along the trajectory.  While the
//! characteristics emanating from a C² initial condition have not yet
//! crossed, the unique solution of the equation is classical and is read
//! off by tracing each point back to its foot: find q₀ with
//! q₀ + t∇H(du₀(q₀)) = q, then u(t, q) = u₀(q₀) + 𝒜ᵗ.
//!
//! Crossing cannot happen before the horizon T = 1/(BC), where B bounds
//! the data curvature two-sidedly and C = sup‖d²H‖: the foot map has
//! derivative bounded below by 1 − tBC > 0 and stays injective.

use nalgebra::{DMatrix, DVector};

use crate::error::{HjError, Result};
use crate::grid::Rect;
use crate::hamiltonian::{gradient_norm_bound, IntegrableHamiltonian};
use crate::initial_data::PiecewiseInitialCondition;

/// Point of phase space ℝᵈ × ℝᵈ.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(HjError::InvalidInput(format!(
                "phase state needs matching nonzero dimensions, got q: {}, p: {}",
                q.len(),
                p.len()
            )));
        }
        if q.iter().chain(p.iter()).any(|x| !x.is_finite()) {
            return Err(HjError::InvalidInput("phase state needs finite coordinates".into()));
        }
        Ok(Self { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// One characteristic: constant momentum, linear drift, linear action.
#[derive(Debug, Clone)]
pub struct Characteristic {
    start: PhaseState,
    velocity: Vec<f64>,
    rate: f64,
    energy: f64,
}

impl Characteristic {
    pub fn start(&self) -> &PhaseState {
        &self.start
    }

    /// ∇H(p₀), the constant drift velocity.
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// H(p₀), conserved along the trajectory.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn at(&self, t: f64) -> PhaseState {
        PhaseState {
            q: self
                .start
                .q
                .iter()
                .zip(&self.velocity)
                .map(|(q, v)| q + t * v)
                .collect(),
            p: self.start.p.clone(),
        }
    }

    /// 𝒜ᵗ = t(p·∇H(p) − H(p)).
    pub fn action(&self, t: f64) -> f64 {
        t * self.rate
    }
}

/// The characteristic through `start`.
pub fn characteristic(h: &IntegrableHamiltonian, start: PhaseState) -> Result<Characteristic> {
    if start.dim() != h.dim() {
        return Err(HjError::InvalidInput(format!(
            "phase dimension {} does not match Hamiltonian dimension {}",
            start.dim(),
            h.dim()
        )));
    }
    let velocity = h.grad(&start.p);
    let dot: f64 = start.p.iter().zip(&velocity).map(|(p, v)| p * v).sum();
    let energy = h.eval(&start.p);
    Ok(Characteristic { start, velocity, rate: dot - energy, energy })
}

/// φᵗ(q, p) = (q + t∇H(p), p).
pub fn flow(h: &IntegrableHamiltonian, t: f64, s: &PhaseState) -> PhaseState {
    let v = h.grad(&s.p);
    PhaseState {
        q: s.q.iter().zip(&v).map(|(q, vi)| q + t * vi).collect(),
        p: s.p.clone(),
    }
}

/// 𝒜ᵗ = t(p·∇H(p) − H(p)).
pub fn action(h: &IntegrableHamiltonian, t: f64, p: &[f64]) -> f64 {
    let v = h.grad(p);
    let dot: f64 = p.iter().zip(&v).map(|(pi, vi)| pi * vi).sum();
    t * (dot - h.eval(p))
}

/// Classical horizon T = 1/(B·C).
pub fn validity_time(b: f64, c: f64) -> Result<f64> {
    if !(b > 0.0) || !(c > 0.0) || !b.is_finite() || !c.is_finite() {
        return Err(HjError::InvalidInput(format!(
            "horizon needs positive finite curvature bounds, got B = {b}, C = {c}"
        )));
    }
    Ok(1.0 / (b * c))
}

/// Output of [`classical_solve`]: value, foot point, and momentum
/// p = du₀(q₀) = ∂_q u(t, q).
#[derive(Debug, Clone)]
pub struct ClassicalSolution {
    pub value: f64,
    pub q0: Vec<f64>,
    pub p: Vec<f64>,
}

/// Solves the equation classically at (t, q) by tracing the
/// characteristic back to its foot q₀ with q₀ + t∇H(du₀(q₀)) = q.
///
/// The data must be kink-free (C¹ with piecewise C² pieces).  Its
/// curvature is bounded two-sidedly by sampling over the domain padded by
/// the drift range; together with C = `h.c_bound()` this yields the
/// horizon 1/(BC), and t beyond it is refused.  In 1D the foot map is
/// monotone, so a bracketed bisection plus Newton polish is exact to
/// 1e-12; in 2D a damped Newton iteration runs from a 4×4 grid of starts.
pub fn classical_solve(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    q: &[f64],
) -> Result<ClassicalSolution> {
    let d = h.dim();
    if u0.dim() != d || q.len() != d {
        return Err(HjError::InvalidInput(format!(
            "dimension mismatch: H is {d}-dimensional, data {}, point {}",
            u0.dim(),
            q.len()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(HjError::InvalidInput(format!("time must be finite and nonnegative, got {t}")));
    }
    if !(1..=2).contains(&d) {
        return Err(HjError::Unsupported("classical tracing is implemented for d = 1, 2".into()));
    }
    let base_kinks = match u0.separable_parts() {
        Some((base, _)) => base.kinks_1d().ok(),
        None => u0.kinks_1d().ok(),
    };
    if base_kinks.is_some_and(|ks| !ks.is_empty()) {
        return Err(HjError::InvalidInput(
            "classical tracing needs kink-free data; use the front or section machinery".into(),
        ));
    }
    if u0.atoms().is_some_and(|atoms| atoms.len() > 1) {
        return Err(HjError::InvalidInput(
            "classical tracing needs a single smooth piece, not a min of several".into(),
        ));
    }
    if t == 0.0 {
        return Ok(ClassicalSolution { value: u0.eval(q), q0: q.to_vec(), p: u0.grad(q) });
    }

    // Horizon from the sampled two-sided curvature bound over the padded
    // domain.
    let gmax = gradient_norm_bound(h, u0.lipschitz() + 1.0)?;
    let pad = t * gmax + 1.0;
    let padded = u0.domain().padded(pad);
    let b = two_sided_curvature_bound(u0, &padded);
    let horizon = if b * h.c_bound() > 0.0 { 1.0 / (b * h.c_bound()) } else { f64::INFINITY };
    if t >= horizon {
        return Err(HjError::HorizonExceeded { t, horizon });
    }

    let foot = |q0: &[f64]| -> Vec<f64> {
        let v = h.grad(&u0.grad(q0));
        q0.iter().zip(&v).map(|(x, vi)| x + t * vi).collect()
    };

    let q0 = if d == 1 {
        vec![solve_foot_1d(h, u0, t, q[0], gmax)?]
    } else {
        solve_foot_2d(h, u0, t, q, gmax)?
    };
    let residual: f64 = foot(&q0)
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if residual > 1e-10 {
        return Err(HjError::NoConvergence(format!(
            "foot tracing stalled at residual {residual:e}; is {q:?} inside the padded box?"
        )));
    }
    let p = u0.grad(&q0);
    let value = u0.eval(&q0) + action(h, t, &p);
    Ok(ClassicalSolution { value, q0, p })
}

/// Sampled two-sided curvature bound sup ‖d²u₀‖ over `rect`, reinforced
/// by gradient difference quotients so that curvature concentrated
/// between sample points (for example the micro-seams of quadrature
/// mollification) still registers.
pub fn two_sided_curvature_bound(u0: &PiecewiseInitialCondition, rect: &Rect) -> f64 {
    let mut bound = 0.0f64;
    match u0.dim() {
        1 => {
            let (lo, hi) = (rect.lo(0), rect.hi(0));
            let n = 4096;
            let step = (hi - lo) / n as f64;
            let mut prev = u0.grad(&[lo])[0];
            for i in 0..=n {
                let x = lo + step * i as f64;
                bound = bound.max(u0.hess(&[x])[(0, 0)].abs());
                let g = u0.grad(&[x])[0];
                if i > 0 {
                    bound = bound.max((g - prev).abs() / step);
                }
                prev = g;
            }
        }
        _ => {
            let n = 65;
            let steps: Vec<f64> = (0..u0.dim())
                .map(|a| (rect.hi(a) - rect.lo(a)) / (n - 1) as f64)
                .collect();
            for q in rect.lattice(n) {
                bound = bound.max(crate::hamiltonian::sym_norm(&u0.hess(&q)));
                let g = u0.grad(&q);
                for (a, &sa) in steps.iter().enumerate() {
                    let mut shifted = q.clone();
                    shifted[a] += sa;
                    if rect.contains(&shifted) {
                        let gs = u0.grad(&shifted);
                        let diff: f64 = gs
                            .iter()
                            .zip(&g)
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt();
                        bound = bound.max(diff / sa);
                    }
                }
            }
        }
    }
    bound
}

fn solve_foot_1d(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    q: f64,
    gmax: f64,
) -> Result<f64> {
    let f = |q0: f64| q0 + t * h.grad1(u0.grad(&[q0])[0]) - q;
    let mut lo = q - t * gmax - 1.0;
    let mut hi = q + t * gmax + 1.0;
    for _ in 0..8 {
        if f(lo) <= 0.0 {
            break;
        }
        lo -= t * gmax + 1.0;
    }
    for _ in 0..8 {
        if f(hi) >= 0.0 {
            break;
        }
        hi += t * gmax + 1.0;
    }
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(HjError::NoConvergence(format!(
            "no bracket for the foot of q = {q}; point outside the padded box"
        )));
    }
    // Bisection to 1e-6, then Newton polish.
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..60 {
        let fx = f(x);
        if fx.abs() <= 1e-13 {
            break;
        }
        let slope = 1.0 + t * h.hess1(u0.grad(&[x])[0]) * u0.hess(&[x])[(0, 0)];
        let step = if slope.abs() > 1e-12 { fx / slope } else { fx };
        let next = x - step;
        x = next.clamp(lo - 1e-6, hi + 1e-6);
    }
    Ok(x)
}

fn solve_foot_2d(
    h: &IntegrableHamiltonian,
    u0: &PiecewiseInitialCondition,
    t: f64,
    q: &[f64],
    gmax: f64,
) -> Result<Vec<f64>> {
    let g = |q0: &[f64]| -> DVector<f64> {
        let v = h.grad(&u0.grad(q0));
        DVector::from_iterator(2, q0.iter().zip(&v).zip(q).map(|((x, vi), qi)| x + t * vi - qi))
    };
    let jac = |q0: &[f64]| -> DMatrix<f64> {
        let p = u0.grad(q0);
        DMatrix::identity(2, 2) + (h.hess(&p) * u0.hess(q0)) * t
    };
    let r = t * gmax + 1.0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..4 {
        for j in 0..4 {
            let mut x = vec![
                q[0] - r + 2.0 * r * (i as f64 + 0.5) / 4.0,
                q[1] - r + 2.0 * r * (j as f64 + 0.5) / 4.0,
            ];
            let mut res = g(&x).norm();
            for _ in 0..80 {
                if res <= 1e-13 {
                    break;
                }
                let jm = jac(&x);
                let rhs = -g(&x);
                let step = match jm.lu().solve(&rhs) {
                    Some(s) => s,
                    None => break,
                };
                // Damp until the residual decreases.
                let mut lambda = 1.0;
                let mut improved = false;
                for _ in 0..30 {
                    let cand = vec![x[0] + lambda * step[0], x[1] + lambda * step[1]];
                    let cres = g(&cand).norm();
                    if cres < res {
                        x = cand;
                        res = cres;
                        improved = true;
                        break;
                    }
                    lambda *= 0.5;
                }
                if !improved {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(br, _)| res < *br) {
                best = Some((res, x));
            }
        }
    }
    let (res, x) = best.expect("sixteen starts always produce a candidate");
    if res > 1e-10 {
        return Err(HjError::NoConvergence(format!(
            "multi-start Newton stalled at residual {res:e} for q = {q:?}"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{cubic_wave, half_square, saddle};
    use crate::initial_data::{min_of_smooth, neg_abs, polynomial_pieces, SmoothAtom};
    use std::sync::Arc;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flow_matches_closed_forms() {
        let hs = half_square(1).unwrap();
        let s = PhaseState::new(vec![0.0], vec![1.0]).unwrap();
        let out = flow(&hs, 1.0, &s);
        assert_eq!(out.q, vec![1.0]);
        assert_eq!(out.p, vec![1.0]);

        let sd = saddle();
        let s2 = PhaseState::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let out2 = flow(&sd, 0.1, &s2);
        assert!(close(out2.q[0], 0.2, 1e-15) && close(out2.q[1], 0.1, 1e-15));
        assert_eq!(out2.p, vec![1.0, 2.0]);

        let frozen = flow(&sd, 0.0, &s2);
        assert_eq!(frozen, s2);
    }

    #[test]
    fn flow_group_law_is_exact() {
        let sd = saddle();
        // Dyadic coordinates and times keep every drift sum exactly
        // representable, so the group law holds bitwise.
        let s = PhaseState::new(vec![0.25, -0.75], vec![0.5, -1.25]).unwrap();
        let (t1, t2) = (0.25, 0.125);
        let two_step = flow(&sd, t2, &flow(&sd, t1, &s));
        let one_step = flow(&sd, t1 + t2, &s);
        assert_eq!(two_step, one_step);
    }

    #[test]
    fn action_values() {
        let sd = saddle();
        assert!(close(action(&sd, 0.1, &[1.0, 2.0]), 0.2, 1e-15));
        assert_eq!(action(&sd, 0.0, &[1.0, 2.0]), 0.0);
        let hs = half_square(1).unwrap();
        for p in [-1.5, 0.0, 0.7] {
            assert!(close(action(&hs, 0.4, &[p]), 0.4 * p * p / 2.0, 1e-15));
        }
        // Linearity in t.
        let a1 = action(&sd, 0.3, &[1.1, -0.4]);
        let a2 = action(&sd, 0.6, &[1.1, -0.4]);
        assert!(close(a2, 2.0 * a1, 1e-14));
    }

    #[test]
    fn characteristic_conserves_energy_and_momentum() {
        let h = cubic_wave();
        let c = characteristic(&h, PhaseState::new(vec![0.5], vec![-1.0]).unwrap()).unwrap();
        assert_eq!(c.energy(), h.eval1(-1.0));
        for t in [0.0, 0.1, 0.5, 2.0] {
            let s = c.at(t);
            assert_eq!(s.p, vec![-1.0]);
            assert!(close(s.q[0], 0.5 + t * h.grad1(-1.0), 1e-15));
            assert!(close(c.action(t), action(&h, t, &[-1.0]), 1e-15));
        }
        let bad = characteristic(&h, PhaseState::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        assert!(bad.is_err());
    }

    #[test]
    fn validity_time_formula() {
        assert_eq!(validity_time(2.0, 4.0).unwrap(), 0.125);
        assert_eq!(validity_time(1.0, 1.0).unwrap(), 1.0);
        assert!(validity_time(0.0, 1.0).is_err());
        assert!(validity_time(1.0, -2.0).is_err());
    }

    #[test]
    fn classical_parabola_frozen_value() {
        // H = p^2/2, u0 = q^2/2: u(t, q) = q^2 / (2(1+t)).
        let h = half_square(1).unwrap();
        let u0 = polynomial_pieces((-3.0, 3.0), &[], &[vec![0.0, 0.0, 0.5]]).unwrap();
        let sol = classical_solve(&h, &u0, 0.5, &[1.0]).unwrap();
        assert!(close(sol.value, 1.0 / 3.0, 1e-11));
        assert!(close(sol.q0[0], 2.0 / 3.0, 1e-9));
        assert!(close(sol.p[0], 2.0 / 3.0, 1e-9));
        // Oracle across a sweep of points.
        for i in 0..=20 {
            let q = -1.8 + 3.6 * i as f64 / 20.0;
            let s = classical_solve(&h, &u0, 0.5, &[q]).unwrap();
            assert!(close(s.value, q * q / 3.0, 1e-10), "q = {q}");
        }
    }

    #[test]
    fn classical_identity_at_time_zero() {
        let h = cubic_wave();
        let u0 = polynomial_pieces((-2.0, 2.0), &[], &[vec![0.1, -0.3, 0.2]]).unwrap();
        let sol = classical_solve(&h, &u0, 0.0, &[0.7]).unwrap();
        assert_eq!(sol.value, u0.eval(&[0.7]));
        assert_eq!(sol.q0, vec![0.7]);
    }

    #[test]
    fn classical_linear_data_never_folds() {
        // u0 = p q + c rides a single characteristic family:
        // u(t, q) = p q + c - t H(p).
        let h = cubic_wave();
        let (p, c) = (0.6, -0.35);
        let u0 = polynomial_pieces((-3.0, 3.0), &[], &[vec![c, p]]).unwrap();
        for (t, q) in [(0.05, 0.4), (0.2, -1.0), (0.8, 2.0)] {
            let sol = classical_solve(&h, &u0, t, &[q]).unwrap();
            assert!(close(sol.value, p * q + c - t * h.eval1(p), 1e-11), "t = {t}, q = {q}");
            assert!(close(sol.p[0], p, 1e-12));
        }
    }

    #[test]
    fn classical_rejects_kinks_and_horizon() {
        let h = half_square(1).unwrap();
        assert!(matches!(
            classical_solve(&h, &neg_abs(), 0.1, &[0.0]),
            Err(HjError::InvalidInput(_))
        ));
        // u0 = q^2/2 has B = 1 and C = 1, so the horizon is t = 1.
        let u0 = polynomial_pieces((-3.0, 3.0), &[], &[vec![0.0, 0.0, 0.5]]).unwrap();
        match classical_solve(&h, &u0, 1.5, &[0.0]) {
            Err(HjError::HorizonExceeded { t, horizon }) => {
                assert_eq!(t, 1.5);
                assert!(close(horizon, 1.0, 1e-12));
            }
            other => panic!("expected a horizon error, got {other:?}"),
        }
    }

    #[test]
    fn classical_solution_satisfies_the_equation() {
        let u0 = polynomial_pieces((-1.5, 1.5), &[], &[vec![0.0, 0.0, 0.0, 1.0 / 6.0]]).unwrap();
        let cases = [
            (half_square(1).unwrap(), 0.3),
            (cubic_wave(), 0.01),
        ];
        for (h, t) in cases {
            for q in [-0.5, 0.1, 0.8] {
                let dt = 1e-5;
                let up = classical_solve(&h, &u0, t + dt, &[q]).unwrap().value;
                let dn = classical_solve(&h, &u0, t - dt, &[q]).unwrap().value;
                let mid = classical_solve(&h, &u0, t, &[q]).unwrap();
                let ut = (up - dn) / (2.0 * dt);
                let residual = (ut + h.eval1(mid.p[0])).abs();
                assert!(residual <= 1e-4, "PDE residual {residual} at q = {q}");
            }
        }
    }

    #[test]
    fn foot_map_is_monotone_before_the_horizon() {
        let h = half_square(1).unwrap();
        let u0 = polynomial_pieces((-1.5, 1.5), &[], &[vec![0.0, 0.0, 0.0, 1.0 / 6.0]]).unwrap();
        let t = 0.3;
        let rect = u0.domain().padded(1.0);
        let b = two_sided_curvature_bound(&u0, &rect);
        let floor = 1.0 - t * b * h.c_bound();
        assert!(floor > 0.0);
        let map = |q0: f64| q0 + t * h.grad1(u0.grad(&[q0])[0]);
        let mut prev = map(-1.5);
        for i in 1..=300 {
            let x = -1.5 + 3.0 * i as f64 / 300.0;
            let cur = map(x);
            let quotient = (cur - prev) / 0.01;
            assert!(quotient >= floor - 1e-9, "quotient {quotient} below {floor}");
            prev = cur;
        }
    }

    #[test]
    fn classical_saddle_2d_by_hand() {
        // Saddle flow with u0 = |q|^2/2: the foot solves a 2x2 linear
        // system, q0 = [[1, t], [t, 1]]^{-1} q.
        let h = saddle();
        let dom = Rect::new(vec![(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        let atom = SmoothAtom {
            value: Arc::new(|q: &[f64]| 0.5 * (q[0] * q[0] + q[1] * q[1])),
            grad: Arc::new(|q: &[f64]| q.to_vec()),
            hess: Arc::new(|_: &[f64]| DMatrix::identity(2, 2)),
        };
        let u0 = min_of_smooth(2, dom, vec![atom]).unwrap();
        let t = 0.25;
        let sol = classical_solve(&h, &u0, t, &[1.0, 0.5]).unwrap();
        let det = 1.0 - t * t;
        let q0 = [(1.0 - t * 0.5) / det, (0.5 - t * 1.0) / det];
        assert!(close(sol.q0[0], q0[0], 1e-9) && close(sol.q0[1], q0[1], 1e-9));
        let expect = 0.5 * (q0[0] * q0[0] + q0[1] * q0[1]) + t * q0[0] * q0[1];
        assert!(close(sol.value, expect, 1e-10));
        assert!(close(sol.value, 8.0 / 15.0, 1e-10));
    }

    #[test]
    fn mollified_kink_reports_a_short_horizon() {
        // Quadrature mollification concentrates curvature between the
        // nodes; the difference-quotient reinforcement must see it and
        // refuse classical tracing at t = 0.1.
        let h = half_square(1).unwrap();
        let m = neg_abs().mollify(0.05).unwrap();
        match classical_solve(&h, &m, 0.5, &[0.0]) {
            Err(HjError::HorizonExceeded { horizon, .. }) => {
                assert!(horizon < 0.5, "horizon {horizon} should be short");
            }
            Ok(_) => panic!("expected a horizon refusal on coarsely mollified kink data"),
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }
}
