//! Lipschitz, piecewise C² initial conditions and their Clarke fans.
//!
//! Initial data u₀ enters front construction through three things: values,
//! derivatives where they exist, and the Clarke subdifferential ∂u₀ at the
//! kinks, which is the convex hull of the reachable one-sided gradients.
//! In d = 1 that hull is an interval [p⁻, p⁺]; for min-of-smooth data in
//! d = 2 it is the segment (or polygon) spanned by the gradients of the
//! atoms active at the point.
//!
//! The module also carries the smoothing machinery used to compare exact
//! and mollified problems: convolution with a compactly supported bump
//! evaluated by fixed-order Gauss-Legendre quadrature, finite point sets
//! with exact Hausdorff distance, and the enhanced triangle inequality
//! d(x, X) ≤ d(x, y) + d(y, Y) + d_Haus(X, Y) used as a test oracle.
//!
//! Each datum carries a Lipschitz constant L and, when the data has no
//! convex corner, a semiconcavity constant B (meaning q ↦ u₀(q) − B‖q‖²/2
//! is concave).  Catalog constructors compute both exactly from the
//! closed-form piece extrema; generic constructors report dense-sample
//! suprema.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HjError, Result};
use crate::grid::Rect;
use crate::hamiltonian::{EvalFn, GradFn, HessFn};
use crate::hermite::{Jet2, QuinticHermite};

/// Scalar-to-scalar closure used by 1D pieces.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One C² piece of a 1D datum: value, derivative, second derivative.
#[derive(Clone)]
pub struct Piece1d {
    pub value: ScalarFn,
    pub deriv: ScalarFn,
    pub second: ScalarFn,
}

impl Piece1d {
    fn from_poly(coeffs: &[f64]) -> Self {
        let a = coeffs.to_vec();
        let d1: Vec<f64> = a.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        let d2: Vec<f64> = d1.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        let horner = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck);
        let (b1, b2) = (d1.clone(), d2.clone());
        Piece1d {
            value: Arc::new(move |q| horner(&a, q)),
            deriv: Arc::new(move |q| horner(&b1, q)),
            second: Arc::new(move |q| horner(&b2, q)),
        }
    }
}

/// One smooth atom of a min-of-smooth datum.
#[derive(Clone)]
pub struct SmoothAtom {
    pub value: EvalFn,
    pub grad: GradFn,
    pub hess: HessFn,
}

#[derive(Clone)]
enum Repr {
    /// `pieces[i]` lives on `[breakpoints[i-1], breakpoints[i]]` with the
    /// outer pieces extending to the domain edges.
    Pieces1d {
        breakpoints: Vec<f64>,
        pieces: Vec<Piece1d>,
    },
    /// u₀ = min over atoms; ties trace the kink interfaces.
    MinOfSmooth { atoms: Vec<SmoothAtom> },
    /// Single smooth piece (mollified data).
    Smooth {
        value: EvalFn,
        grad: GradFn,
        hess: HessFn,
    },
    /// u₀(q₁, q₂) = base(q₁) + tilt·q₂ with 1D `base`.
    SeparableTilt {
        base: Box<PiecewiseInitialCondition>,
        tilt: f64,
    },
}

/// Lipschitz, piecewise C² initial condition.
#[derive(Clone)]
pub struct PiecewiseInitialCondition {
    dim: usize,
    domain: Rect,
    repr: Repr,
    lipschitz: f64,
    semiconcavity: Option<f64>,
    spec: Option<InitialSpec>,
}

impl std::fmt::Debug for PiecewiseInitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiecewiseInitialCondition")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("semiconcavity", &self.semiconcavity)
            .finish()
    }
}

/// Clarke subdifferential at a point: the convex hull of the reachable
/// gradients, stored as its vertex list (a singleton at C¹ points).
#[derive(Debug, Clone, PartialEq)]
pub struct ClarkeFan {
    pub q: Vec<f64>,
    pub vertices: Vec<Vec<f64>>,
}

impl ClarkeFan {
    /// Momentum interval `[p⁻, p⁺]` for d = 1 fans.
    pub fn interval(&self) -> Result<(f64, f64)> {
        if self.vertices.iter().any(|v| v.len() != 1) {
            return Err(HjError::Unsupported(
                "momentum interval only exists for 1D fans".into(),
            ));
        }
        let lo = self.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let hi = self.vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }

    /// Largest pairwise distance between vertices; zero at C¹ points.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for a in &self.vertices {
            for b in &self.vertices {
                let dd: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                d = d.max(dd.sqrt());
            }
        }
        d
    }
}

/// Slope jumps below this threshold count as smooth joins, not kinks.
const KINK_TOL: f64 = 1e-10;

impl PiecewiseInitialCondition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    /// Global Lipschitz constant (sup of ‖∇u₀‖ over the pieces).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Semiconcavity constant B, present when u₀ − B‖q‖²/2 is concave.
    /// Data with a convex corner (upward slope jump) has none.
    pub fn semiconcavity(&self) -> Option<f64> {
        self.semiconcavity
    }

    /// The declarative description this datum was built from, if any.
    pub fn spec(&self) -> Option<&InitialSpec> {
        self.spec.as_ref()
    }

    pub fn eval(&self, q: &[f64]) -> f64 {
        debug_assert_eq!(q.len(), self.dim);
        match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => {
                let x = q[0];
                let i = piece_index(breakpoints, x);
                (pieces[i].value)(x)
            }
            Repr::MinOfSmooth { atoms } => atoms
                .iter()
                .map(|a| (a.value)(q))
                .fold(f64::INFINITY, f64::min),
            Repr::Smooth { value, .. } => value(q),
            Repr::SeparableTilt { base, tilt } => base.eval(&q[..1]) + tilt * q[1],
        }
    }

    /// Gradient where it exists.  At a 1D breakpoint the right derivative
    /// is returned; at a min-of-smooth tie the lowest-index active atom
    /// wins.  Use [`Self::clarke_derivative`] when the fan matters.
    pub fn grad(&self, q: &[f64]) -> Vec<f64> {
        debug_assert_eq!(q.len(), self.dim);
        match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => {
                let x = q[0];
                let i = piece_index(breakpoints, x);
                vec![(pieces[i].deriv)(x)]
            }
            Repr::MinOfSmooth { atoms } => {
                let i = argmin_atom(atoms, q);
                (atoms[i].grad)(q)
            }
            Repr::Smooth { grad, .. } => grad(q),
            Repr::SeparableTilt { base, tilt } => {
                vec![base.grad(&q[..1])[0], *tilt]
            }
        }
    }

    /// Hessian where it exists, with the same side conventions as
    /// [`Self::grad`].
    pub fn hess(&self, q: &[f64]) -> DMatrix<f64> {
        debug_assert_eq!(q.len(), self.dim);
        match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => {
                let x = q[0];
                let i = piece_index(breakpoints, x);
                DMatrix::from_element(1, 1, (pieces[i].second)(x))
            }
            Repr::MinOfSmooth { atoms } => {
                let i = argmin_atom(atoms, q);
                (atoms[i].hess)(q)
            }
            Repr::Smooth { hess, .. } => hess(q),
            Repr::SeparableTilt { base, .. } => {
                let mut m = DMatrix::zeros(2, 2);
                m[(0, 0)] = base.hess(&q[..1])[(0, 0)];
                m
            }
        }
    }

    /// Clarke subdifferential at `q` (must lie in the declared domain).
    pub fn clarke_derivative(&self, q: &[f64]) -> Result<ClarkeFan> {
        if q.len() != self.dim {
            return Err(HjError::InvalidInput(format!(
                "point dimension {} does not match data dimension {}",
                q.len(),
                self.dim
            )));
        }
        if !self.domain.contains(q) {
            return Err(HjError::DomainViolation(format!(
                "point {q:?} lies outside the declared domain"
            )));
        }
        let fan = match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => {
                let x = q[0];
                match breakpoints.iter().position(|b| (b - x).abs() <= 1e-12) {
                    Some(k) => {
                        let left = (pieces[k].deriv)(x);
                        let right = (pieces[k + 1].deriv)(x);
                        if (left - right).abs() <= KINK_TOL {
                            ClarkeFan { q: q.to_vec(), vertices: vec![vec![right]] }
                        } else {
                            ClarkeFan {
                                q: q.to_vec(),
                                vertices: vec![vec![left.min(right)], vec![left.max(right)]],
                            }
                        }
                    }
                    None => ClarkeFan { q: q.to_vec(), vertices: vec![self.grad(q)] },
                }
            }
            Repr::MinOfSmooth { atoms } => {
                let active = active_atoms(atoms, q, 1e-10);
                let grads: Vec<Vec<f64>> = active.iter().map(|&i| (atoms[i].grad)(q)).collect();
                ClarkeFan { q: q.to_vec(), vertices: hull_vertices(grads) }
            }
            Repr::Smooth { .. } => ClarkeFan { q: q.to_vec(), vertices: vec![self.grad(q)] },
            Repr::SeparableTilt { base, tilt } => {
                let inner = base.clarke_derivative(&q[..1])?;
                ClarkeFan {
                    q: q.to_vec(),
                    vertices: inner.vertices.into_iter().map(|v| vec![v[0], *tilt]).collect(),
                }
            }
        };
        Ok(fan)
    }

    /// All piece boundaries of a 1D datum (smooth joins included); front
    /// builders split characteristics there to keep each branch C².
    pub fn breakpoints(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Pieces1d { breakpoints, .. } => Some(breakpoints),
            _ => None,
        }
    }

    /// Positions of genuine slope jumps of a 1D datum (where fans open).
    pub fn kinks_1d(&self) -> Result<Vec<f64>> {
        match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => Ok(breakpoints
                .iter()
                .enumerate()
                .filter(|(k, b)| {
                    ((pieces[*k].deriv)(**b) - (pieces[k + 1].deriv)(**b)).abs() > KINK_TOL
                })
                .map(|(_, b)| *b)
                .collect()),
            Repr::Smooth { .. } => Ok(vec![]),
            Repr::SeparableTilt { base, .. } => base.kinks_1d(),
            Repr::MinOfSmooth { .. } => Err(HjError::Unsupported(
                "kink lists are one-dimensional; min-of-smooth interfaces are curves".into(),
            )),
        }
    }

    /// The atoms of a min-of-smooth datum.
    pub fn atoms(&self) -> Option<&[SmoothAtom]> {
        match &self.repr {
            Repr::MinOfSmooth { atoms } => Some(atoms),
            _ => None,
        }
    }

    /// Indices of atoms within `tol` of the minimum at `q`.
    pub fn active_atoms(&self, q: &[f64], tol: f64) -> Option<Vec<usize>> {
        match &self.repr {
            Repr::MinOfSmooth { atoms } => Some(active_atoms(atoms, q, tol)),
            _ => None,
        }
    }

    /// The 1D base and tilt of a separable 2D datum.
    pub fn separable_parts(&self) -> Option<(&PiecewiseInitialCondition, f64)> {
        match &self.repr {
            Repr::SeparableTilt { base, tilt } => Some((base, *tilt)),
            _ => None,
        }
    }

    /// u₀ + c.  Constants shift solutions rigidly, so this is the cheap
    /// probe for the solution-map axioms.
    pub fn offset(&self, c: f64) -> Self {
        self.tilted(&vec![0.0; self.dim], c)
    }

    /// u₀(q) + ⟨m, q⟩ + c.  The Lipschitz constant grows by at most ‖m‖;
    /// curvature is untouched.
    pub fn tilted(&self, m: &[f64], c: f64) -> Self {
        assert_eq!(m.len(), self.dim);
        let mv = m.to_vec();
        let norm_m = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let repr = match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => Repr::Pieces1d {
                breakpoints: breakpoints.clone(),
                pieces: pieces
                    .iter()
                    .map(|p| {
                        let (v, d) = (p.value.clone(), p.deriv.clone());
                        let (m0, c0) = (mv[0], c);
                        Piece1d {
                            value: Arc::new(move |q| v(q) + m0 * q + c0),
                            deriv: Arc::new(move |q| d(q) + m0),
                            second: p.second.clone(),
                        }
                    })
                    .collect(),
            },
            Repr::MinOfSmooth { atoms } => Repr::MinOfSmooth {
                // A common affine tilt commutes with the min.
                atoms: atoms
                    .iter()
                    .map(|a| {
                        let (v, g) = (a.value.clone(), a.grad.clone());
                        let (mva, mvb, c0) = (mv.clone(), mv.clone(), c);
                        SmoothAtom {
                            value: Arc::new(move |q| {
                                v(q) + q.iter().zip(&mva).map(|(x, m)| x * m).sum::<f64>() + c0
                            }),
                            grad: Arc::new(move |q| {
                                g(q).iter().zip(&mvb).map(|(x, m)| x + m).collect()
                            }),
                            hess: a.hess.clone(),
                        }
                    })
                    .collect(),
            },
            Repr::Smooth { value, grad, hess } => {
                let (v, g) = (value.clone(), grad.clone());
                let (mva, mvb, c0) = (mv.clone(), mv.clone(), c);
                Repr::Smooth {
                    value: Arc::new(move |q| {
                        v(q) + q.iter().zip(&mva).map(|(x, m)| x * m).sum::<f64>() + c0
                    }),
                    grad: Arc::new(move |q| g(q).iter().zip(&mvb).map(|(x, m)| x + m).collect()),
                    hess: hess.clone(),
                }
            }
            Repr::SeparableTilt { base, tilt } => Repr::SeparableTilt {
                base: Box::new(base.tilted(&[mv[0]], c)),
                tilt: tilt + mv[1],
            },
        };
        Self {
            dim: self.dim,
            domain: self.domain.clone(),
            repr,
            lipschitz: self.lipschitz + norm_m,
            semiconcavity: self.semiconcavity,
            spec: None,
        }
    }

    /// s·u₀ for s > 0.  Scales both constants by s.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(HjError::InvalidInput(format!(
                "value scaling must be positive and finite, got {s}"
            )));
        }
        let repr = match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => Repr::Pieces1d {
                breakpoints: breakpoints.clone(),
                pieces: pieces.iter().map(|p| scale_piece(p, s)).collect(),
            },
            Repr::MinOfSmooth { atoms } => Repr::MinOfSmooth {
                atoms: atoms.iter().map(|a| scale_atom(a, s)).collect(),
            },
            Repr::Smooth { value, grad, hess } => {
                let (v, g, h) = (value.clone(), grad.clone(), hess.clone());
                Repr::Smooth {
                    value: Arc::new(move |q| s * v(q)),
                    grad: Arc::new(move |q| g(q).iter().map(|x| s * x).collect()),
                    hess: Arc::new(move |q| h(q) * s),
                }
            }
            Repr::SeparableTilt { base, tilt } => Repr::SeparableTilt {
                base: Box::new(base.scaled(s)?),
                tilt: s * tilt,
            },
        };
        Ok(Self {
            dim: self.dim,
            domain: self.domain.clone(),
            repr,
            lipschitz: s * self.lipschitz,
            semiconcavity: self.semiconcavity.map(|b| s * b),
            spec: None,
        })
    }

    /// v(q) = u₀(kq + shift) for 1D data, k ≠ 0.  Breakpoints map through
    /// the inverse substitution (reversing order when k < 0); constants
    /// become |k|L and k²B.
    pub fn precomposed_affine_1d(&self, k: f64, shift: f64) -> Result<Self> {
        if self.dim != 1 {
            return Err(HjError::Unsupported(
                "affine precomposition is implemented for 1D data".into(),
            ));
        }
        if k == 0.0 || !k.is_finite() || !shift.is_finite() {
            return Err(HjError::InvalidInput(format!(
                "precomposition needs finite k != 0, got k = {k}, shift = {shift}"
            )));
        }
        let map_back = |x: f64| (x - shift) / k;
        let (d0, d1) = (map_back(self.domain.lo(0)), map_back(self.domain.hi(0)));
        let domain = Rect::interval(d0.min(d1), d0.max(d1))?;
        let repr = match &self.repr {
            Repr::Pieces1d { breakpoints, pieces } => {
                let mut bks: Vec<f64> = breakpoints.iter().map(|&b| map_back(b)).collect();
                let mut ps: Vec<Piece1d> = pieces.iter().map(|p| precompose_piece(p, k, shift)).collect();
                if k < 0.0 {
                    bks.reverse();
                    ps.reverse();
                }
                Repr::Pieces1d { breakpoints: bks, pieces: ps }
            }
            Repr::Smooth { value, grad, hess } => {
                let (v, g, h) = (value.clone(), grad.clone(), hess.clone());
                Repr::Smooth {
                    value: Arc::new(move |q| v(&[k * q[0] + shift])),
                    grad: Arc::new(move |q| vec![k * g(&[k * q[0] + shift])[0]]),
                    hess: Arc::new(move |q| h(&[k * q[0] + shift]) * (k * k)),
                }
            }
            _ => {
                return Err(HjError::Unsupported(
                    "affine precomposition is implemented for 1D data".into(),
                ))
            }
        };
        Ok(Self {
            dim: 1,
            domain,
            repr,
            lipschitz: k.abs() * self.lipschitz,
            semiconcavity: self.semiconcavity.map(|b| k * k * b),
            spec: None,
        })
    }

    /// Convolution with the compactly supported bump exp(−1/(1−‖y‖²))
    /// scaled to radius `eps`, evaluated by 33-point Gauss-Legendre
    /// quadrature per axis with discrete normalization (so constants are
    /// reproduced exactly).  Derivatives are the exact derivatives of the
    /// discrete formula, which keeps them consistent with finite
    /// differences of `eval`.  ‖u_ε − u₀‖∞ ≤ L·eps, and both constants
    /// survive: the output is again L-Lipschitz and B-semiconcave.
    pub fn mollify(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(HjError::InvalidInput(format!(
                "mollification radius must be positive, got {eps}"
            )));
        }
        let (nodes, weights) = gauss_legendre(33);
        let repr = match self.dim {
            1 => {
                let mut ys = Vec::new();
                let mut ws = Vec::new();
                let mut norm = 0.0;
                for (&y, &w) in nodes.iter().zip(&weights) {
                    let r = bump(&[y]);
                    if r > 0.0 {
                        ys.push(y);
                        ws.push(w * r);
                        norm += w * r;
                    }
                }
                let inner = self.clone();
                let (i2, i3) = (inner.clone(), inner.clone());
                let (ya, wa) = (ys.clone(), ws.clone());
                let (yb, wb) = (ys.clone(), ws.clone());
                let (yc, wc) = (ys, ws);
                Repr::Smooth {
                    value: Arc::new(move |q| {
                        ya.iter()
                            .zip(&wa)
                            .map(|(&y, &w)| w * inner.eval(&[q[0] - eps * y]))
                            .sum::<f64>()
                            / norm
                    }),
                    grad: Arc::new(move |q| {
                        vec![
                            yb.iter()
                                .zip(&wb)
                                .map(|(&y, &w)| w * i2.grad(&[q[0] - eps * y])[0])
                                .sum::<f64>()
                                / norm,
                        ]
                    }),
                    hess: Arc::new(move |q| {
                        DMatrix::from_element(
                            1,
                            1,
                            yc.iter()
                                .zip(&wc)
                                .map(|(&y, &w)| w * i3.hess(&[q[0] - eps * y])[(0, 0)])
                                .sum::<f64>()
                                / norm,
                        )
                    }),
                }
            }
            2 => {
                let mut ys: Vec<[f64; 2]> = Vec::new();
                let mut ws = Vec::new();
                let mut norm = 0.0;
                for (&yi, &wi) in nodes.iter().zip(&weights) {
                    for (&yj, &wj) in nodes.iter().zip(&weights) {
                        let r = bump(&[yi, yj]);
                        if r > 0.0 {
                            ys.push([yi, yj]);
                            ws.push(wi * wj * r);
                            norm += wi * wj * r;
                        }
                    }
                }
                let inner = self.clone();
                let (i2, i3) = (inner.clone(), inner.clone());
                let (ya, wa) = (ys.clone(), ws.clone());
                let (yb, wb) = (ys.clone(), ws.clone());
                let (yc, wc) = (ys, ws);
                Repr::Smooth {
                    value: Arc::new(move |q| {
                        ya.iter()
                            .zip(&wa)
                            .map(|(y, &w)| w * inner.eval(&[q[0] - eps * y[0], q[1] - eps * y[1]]))
                            .sum::<f64>()
                            / norm
                    }),
                    grad: Arc::new(move |q| {
                        let mut g = vec![0.0; 2];
                        for (y, &w) in yb.iter().zip(&wb) {
                            let gi = i2.grad(&[q[0] - eps * y[0], q[1] - eps * y[1]]);
                            g[0] += w * gi[0];
                            g[1] += w * gi[1];
                        }
                        g.iter().map(|x| x / norm).collect()
                    }),
                    hess: Arc::new(move |q| {
                        let mut m = DMatrix::zeros(2, 2);
                        for (y, &w) in yc.iter().zip(&wc) {
                            m += i3.hess(&[q[0] - eps * y[0], q[1] - eps * y[1]]) * w;
                        }
                        m / norm
                    }),
                }
            }
            d => {
                return Err(HjError::Unsupported(format!(
                    "mollification is implemented for d = 1, 2; got {d}"
                )))
            }
        };
        Ok(Self {
            dim: self.dim,
            domain: self.domain.clone(),
            repr,
            lipschitz: self.lipschitz,
            semiconcavity: self.semiconcavity,
            spec: None,
        })
    }

    /// Rebuilds a catalog datum from its description.
    pub fn from_spec(spec: &InitialSpec) -> Result<Self> {
        match spec.kind.as_str() {
            "abs_kink" => match spec.params.get("width") {
                None | Some(serde_json::Value::Null) => Ok(neg_abs()),
                Some(w) => {
                    let w = w.as_f64().ok_or_else(|| {
                        HjError::InvalidInput("abs_kink width must be a number".into())
                    })?;
                    localized_kink(w)
                }
            },
            "min_of_quadratics" => {
                let get = |k: &str| -> Result<f64> {
                    spec.params
                        .get(k)
                        .and_then(|v| v.as_f64())
                        .ok_or_else(|| HjError::InvalidInput(format!("min_of_quadratics needs numeric '{k}'")))
                };
                let width = spec.params.get("width").and_then(|v| v.as_f64()).unwrap_or(0.25);
                min_of_quadratics(get("a")?, get("b")?, width)
            }
            "custom_pieces" => {
                let dom = spec
                    .params
                    .get("domain")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| HjError::InvalidInput("custom_pieces needs a domain [lo, hi]".into()))?;
                if dom.len() != 2 {
                    return Err(HjError::InvalidInput("custom_pieces domain must be [lo, hi]".into()));
                }
                let lo = dom[0].as_f64().unwrap_or(f64::NAN);
                let hi = dom[1].as_f64().unwrap_or(f64::NAN);
                let bks: Vec<f64> = spec
                    .params
                    .get("breakpoints")
                    .and_then(|v| v.as_array())
                    .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                    .unwrap_or_default();
                let pieces: Vec<Vec<f64>> = spec
                    .params
                    .get("pieces")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| HjError::InvalidInput("custom_pieces needs piece coefficients".into()))?
                    .iter()
                    .map(|row| {
                        row.as_array()
                            .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                            .ok_or_else(|| {
                                HjError::InvalidInput("each piece must be a coefficient list".into())
                            })
                    })
                    .collect::<Result<_>>()?;
                polynomial_pieces((lo, hi), &bks, &pieces)
            }
            other => Err(HjError::InvalidInput(format!("unknown initial data kind '{other}'"))),
        }
    }
}

/// Declarative description of a catalog initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

fn piece_index(breakpoints: &[f64], x: f64) -> usize {
    breakpoints.iter().take_while(|b| x >= **b).count()
}

fn argmin_atom(atoms: &[SmoothAtom], q: &[f64]) -> usize {
    let mut best = 0;
    let mut val = f64::INFINITY;
    for (i, a) in atoms.iter().enumerate() {
        let v = (a.value)(q);
        if v < val {
            val = v;
            best = i;
        }
    }
    best
}

fn active_atoms(atoms: &[SmoothAtom], q: &[f64], tol: f64) -> Vec<usize> {
    let vals: Vec<f64> = atoms.iter().map(|a| (a.value)(q)).collect();
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    vals.iter()
        .enumerate()
        .filter(|(_, v)| **v <= min + tol)
        .map(|(i, _)| i)
        .collect()
}

/// Convex hull vertices (Andrew's monotone chain in 2D; dedup otherwise).
fn hull_vertices(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    pts.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-14));
    if pts.len() <= 2 || pts[0].len() != 2 {
        return pts;
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let cross = |o: &[f64], a: &[f64], b: &[f64]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<Vec<f64>> = Vec::new();
    for p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p.clone());
    }
    hull.pop();
    hull
}

fn scale_piece(p: &Piece1d, s: f64) -> Piece1d {
    let (v, d, dd) = (p.value.clone(), p.deriv.clone(), p.second.clone());
    Piece1d {
        value: Arc::new(move |q| s * v(q)),
        deriv: Arc::new(move |q| s * d(q)),
        second: Arc::new(move |q| s * dd(q)),
    }
}

fn scale_atom(a: &SmoothAtom, s: f64) -> SmoothAtom {
    let (v, g, h) = (a.value.clone(), a.grad.clone(), a.hess.clone());
    SmoothAtom {
        value: Arc::new(move |q| s * v(q)),
        grad: Arc::new(move |q| g(q).iter().map(|x| s * x).collect()),
        hess: Arc::new(move |q| h(q) * s),
    }
}

fn precompose_piece(p: &Piece1d, k: f64, shift: f64) -> Piece1d {
    let (v, d, dd) = (p.value.clone(), p.deriv.clone(), p.second.clone());
    Piece1d {
        value: Arc::new(move |q| v(k * q + shift)),
        deriv: Arc::new(move |q| k * d(k * q + shift)),
        second: Arc::new(move |q| k * k * dd(k * q + shift)),
    }
}

/// The standard compactly supported bump, unnormalized (discrete
/// normalization absorbs the constant).
fn bump(y: &[f64]) -> f64 {
    let r2: f64 = y.iter().map(|x| x * x).sum();
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Gauss-Legendre nodes and weights on [−1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// u₀(q) = −|q|: the model single-kink datum.  L = 1, B = 0, fan [−1, 1]
/// at the origin.
pub fn neg_abs() -> PiecewiseInitialCondition {
    PiecewiseInitialCondition {
        dim: 1,
        domain: Rect::interval(-4.0, 4.0).expect("static bounds"),
        repr: Repr::Pieces1d {
            breakpoints: vec![0.0],
            pieces: vec![Piece1d::from_poly(&[0.0, 1.0]), Piece1d::from_poly(&[0.0, -1.0])],
        },
        lipschitz: 1.0,
        semiconcavity: Some(0.0),
        spec: Some(InitialSpec { kind: "abs_kink".into(), params: serde_json::json!({}) }),
    }
}

/// u₀(q) = −|q| + f(q) with f = q²/2 on [−1, 1], blended over collars of
/// the given width to its tangent lines, which makes u₀ constant (−1/2)
/// outside [−1 − width, 1 + width].  The single downward kink at the
/// origin keeps the fan [−1, 1] of −|q| while the quadratic part curves
/// the two branches; L = 1 exactly and B is the exact collar curvature
/// maximum (slightly above 1).
pub fn localized_kink(width: f64) -> Result<PiecewiseInitialCondition> {
    if !(width > 0.0) || !width.is_finite() || width > 1.0 {
        return Err(HjError::InvalidInput(format!(
            "collar width must lie in (0, 1], got {width}"
        )));
    }
    let w = width;
    // f jets: at +-1 value 1/2 and slope +-1, curvature 1; tails affine.
    let blend_r = QuinticHermite::from_jets(
        1.0,
        1.0 + w,
        Jet2 { v: 0.5, d: 1.0, dd: 1.0 },
        Jet2 { v: 0.5 + w, d: 1.0, dd: 0.0 },
    );
    let blend_l = QuinticHermite::from_jets(
        -1.0 - w,
        -1.0,
        Jet2 { v: 0.5 + w, d: -1.0, dd: 0.0 },
        Jet2 { v: 0.5, d: -1.0, dd: 1.0 },
    );

    // Pieces of u0 = -|q| + f, outermost first.
    let minus_half = Piece1d::from_poly(&[-0.5]);
    let left_blend = {
        let b = blend_l.clone();
        Piece1d {
            value: Arc::new(move |q| q + b.value(q)),
            deriv: {
                let b = blend_l.clone();
                Arc::new(move |q| 1.0 + b.deriv(q))
            },
            second: {
                let b = blend_l.clone();
                Arc::new(move |q| b.second(q))
            },
        }
    };
    let right_blend = {
        let b = blend_r.clone();
        Piece1d {
            value: Arc::new(move |q| -q + b.value(q)),
            deriv: {
                let b = blend_r.clone();
                Arc::new(move |q| -1.0 + b.deriv(q))
            },
            second: {
                let b = blend_r.clone();
                Arc::new(move |q| b.second(q))
            },
        }
    };
    let pieces = vec![
        minus_half.clone(),
        left_blend,
        Piece1d::from_poly(&[0.0, 1.0, 0.5]),
        Piece1d::from_poly(&[0.0, -1.0, 0.5]),
        right_blend,
        minus_half,
    ];
    let breakpoints = vec![-1.0 - w, -1.0, 0.0, 1.0, 1.0 + w];

    // Exact constants.  Quadratic pieces have |u0'| <= 1 attained at the
    // kink; collar pieces deviate from slope 0 by the blend overshoot.
    let (dl_lo, dl_hi) = blend_l.deriv_range();
    let (dr_lo, dr_hi) = blend_r.deriv_range();
    let collar_slope = (1.0 + dl_lo).abs().max((1.0 + dl_hi).abs())
        .max((-1.0 + dr_lo).abs())
        .max((-1.0 + dr_hi).abs());
    let lipschitz = 1.0f64.max(collar_slope);
    let (sl_lo, sl_hi) = blend_l.second_range();
    let (sr_lo, sr_hi) = blend_r.second_range();
    let b = 1.0f64.max(sl_lo).max(sl_hi).max(sr_lo).max(sr_hi);

    Ok(PiecewiseInitialCondition {
        dim: 1,
        domain: Rect::interval(-4.0, 4.0)?,
        repr: Repr::Pieces1d { breakpoints, pieces },
        lipschitz,
        semiconcavity: Some(b),
        spec: Some(InitialSpec {
            kind: "abs_kink".into(),
            params: serde_json::json!({ "width": width }),
        }),
    })
}

/// u₀(q₁, q₂) = min(a·(f(q₁) − q₂), b·(f(q₁) − q₂)) with 0 < a, b and
/// f = q₁² blended over collars of the given width to its tangent lines
/// (slopes ±2), so all atom gradients stay bounded.  The two atoms tie
/// exactly on the parabola q₂ = f(q₁), where the fan is the segment from
/// a·(f′(q₁), −1) to b·(f′(q₁), −1).
pub fn min_of_quadratics(a: f64, b: f64, width: f64) -> Result<PiecewiseInitialCondition> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(HjError::InvalidInput(format!(
            "atom slopes must be positive and finite, got a = {a}, b = {b}"
        )));
    }
    if !(width > 0.0) || !width.is_finite() || width > 1.0 {
        return Err(HjError::InvalidInput(format!(
            "collar width must lie in (0, 1], got {width}"
        )));
    }
    let w = width;
    let blend_r = QuinticHermite::from_jets(
        1.0,
        1.0 + w,
        Jet2 { v: 1.0, d: 2.0, dd: 2.0 },
        Jet2 { v: 1.0 + 2.0 * w, d: 2.0, dd: 0.0 },
    );
    let blend_l = QuinticHermite::from_jets(
        -1.0 - w,
        -1.0,
        Jet2 { v: 1.0 + 2.0 * w, d: -2.0, dd: 0.0 },
        Jet2 { v: 1.0, d: -2.0, dd: 2.0 },
    );
    let f = {
        let (bl, br) = (blend_l.clone(), blend_r.clone());
        let w = w;
        Arc::new(move |x: f64| -> (f64, f64, f64) {
            if x < -1.0 - w {
                (1.0 + 2.0 * w - 2.0 * (x + 1.0 + w), -2.0, 0.0)
            } else if x < -1.0 {
                (bl.value(x), bl.deriv(x), bl.second(x))
            } else if x <= 1.0 {
                (x * x, 2.0 * x, 2.0)
            } else if x <= 1.0 + w {
                (br.value(x), br.deriv(x), br.second(x))
            } else {
                (1.0 + 2.0 * w + 2.0 * (x - 1.0 - w), 2.0, 0.0)
            }
        })
    };

    let atom = |c: f64| -> SmoothAtom {
        let (f1, f2, f3) = (f.clone(), f.clone(), f.clone());
        SmoothAtom {
            value: Arc::new(move |q| c * (f1(q[0]).0 - q[1])),
            grad: Arc::new(move |q| vec![c * f2(q[0]).1, -c]),
            hess: Arc::new(move |q| {
                let mut m = DMatrix::zeros(2, 2);
                m[(0, 0)] = c * f3(q[0]).2;
                m
            }),
        }
    };

    // Exact constants from the f ranges: |f'| <= max(2, collar overshoot),
    // f'' <= max(2, collar overshoot).
    let (dl_lo, dl_hi) = blend_l.deriv_range();
    let (dr_lo, dr_hi) = blend_r.deriv_range();
    let fp_max = 2.0f64
        .max(dl_lo.abs())
        .max(dl_hi.abs())
        .max(dr_lo.abs())
        .max(dr_hi.abs());
    let (_, sl_hi) = blend_l.second_range();
    let (_, sr_hi) = blend_r.second_range();
    let fpp_max = 2.0f64.max(sl_hi).max(sr_hi);
    let cmax = a.max(b);
    Ok(PiecewiseInitialCondition {
        dim: 2,
        domain: Rect::new(vec![(-2.0, 2.0), (-2.0, 2.0)])?,
        repr: Repr::MinOfSmooth { atoms: vec![atom(a), atom(b)] },
        lipschitz: cmax * (fp_max * fp_max + 1.0).sqrt(),
        semiconcavity: Some(cmax * fpp_max),
        spec: Some(InitialSpec {
            kind: "min_of_quadratics".into(),
            params: serde_json::json!({ "a": a, "b": b, "width": width }),
        }),
    })
}

/// 1D datum from dense polynomial pieces on consecutive intervals.
/// Constants are dense-sample suprema (4097 points per piece).
pub fn polynomial_pieces(
    domain: (f64, f64),
    breakpoints: &[f64],
    coeff_rows: &[Vec<f64>],
) -> Result<PiecewiseInitialCondition> {
    let dom = Rect::interval(domain.0, domain.1)?;
    if coeff_rows.len() != breakpoints.len() + 1 {
        return Err(HjError::InvalidInput(format!(
            "{} breakpoints need {} pieces, got {}",
            breakpoints.len(),
            breakpoints.len() + 1,
            coeff_rows.len()
        )));
    }
    if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HjError::InvalidInput("breakpoints must be strictly increasing".into()));
    }
    if breakpoints.iter().any(|b| *b <= domain.0 || *b >= domain.1) {
        return Err(HjError::InvalidInput("breakpoints must lie inside the domain".into()));
    }
    let pieces: Vec<Piece1d> = coeff_rows.iter().map(|c| Piece1d::from_poly(c)).collect();
    // Continuity across breakpoints.
    for (k, b) in breakpoints.iter().enumerate() {
        let jump = ((pieces[k].value)(*b) - (pieces[k + 1].value)(*b)).abs();
        if jump > 1e-10 {
            return Err(HjError::InvalidInput(format!(
                "pieces jump by {jump:e} at breakpoint {b}; data must be continuous"
            )));
        }
    }
    // Sampled constants and kink directions.
    let mut edges = vec![domain.0];
    edges.extend_from_slice(breakpoints);
    edges.push(domain.1);
    let mut lipschitz = 0.0f64;
    let mut curv_max = 0.0f64;
    for (p, win) in pieces.iter().zip(edges.windows(2)) {
        for i in 0..=4096 {
            let x = win[0] + (win[1] - win[0]) * i as f64 / 4096.0;
            lipschitz = lipschitz.max((p.deriv)(x).abs());
            curv_max = curv_max.max((p.second)(x));
        }
    }
    let convex_corner = breakpoints.iter().enumerate().any(|(k, b)| {
        (pieces[k + 1].deriv)(*b) > (pieces[k].deriv)(*b) + KINK_TOL
    });
    Ok(PiecewiseInitialCondition {
        dim: 1,
        domain: dom,
        repr: Repr::Pieces1d {
            breakpoints: breakpoints.to_vec(),
            pieces,
        },
        lipschitz,
        semiconcavity: if convex_corner { None } else { Some(curv_max) },
        spec: Some(InitialSpec {
            kind: "custom_pieces".into(),
            params: serde_json::json!({
                "domain": [domain.0, domain.1],
                "breakpoints": breakpoints,
                "pieces": coeff_rows,
            }),
        }),
    })
}

/// Generic min-of-smooth datum with sampled constants over the domain box.
pub fn min_of_smooth(
    dim: usize,
    domain: Rect,
    atoms: Vec<SmoothAtom>,
) -> Result<PiecewiseInitialCondition> {
    if dim != domain.dim() || !(1..=2).contains(&dim) {
        return Err(HjError::InvalidInput(format!(
            "min_of_smooth needs a 1D or 2D domain matching dim, got dim {dim} and box dim {}",
            domain.dim()
        )));
    }
    if atoms.is_empty() {
        return Err(HjError::InvalidInput("min_of_smooth needs at least one atom".into()));
    }
    let n = if dim == 1 { 2049 } else { 65 };
    let mut lipschitz = 0.0f64;
    let mut curv = 0.0f64;
    for q in domain.lattice(n) {
        for a in &atoms {
            let g = (a.grad)(&q);
            lipschitz = lipschitz.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
            let (_, emax) = crate::hamiltonian::sym_eig_range(&(a.hess)(&q));
            curv = curv.max(emax);
        }
    }
    Ok(PiecewiseInitialCondition {
        dim,
        domain,
        repr: Repr::MinOfSmooth { atoms },
        lipschitz,
        semiconcavity: Some(curv.max(0.0)),
        spec: None,
    })
}

/// 2D datum u₀(q₁, q₂) = base(q₁) + tilt·q₂ from a 1D base.
pub fn separable_tilt(
    base: PiecewiseInitialCondition,
    tilt: f64,
    q2_range: (f64, f64),
) -> Result<PiecewiseInitialCondition> {
    if base.dim() != 1 {
        return Err(HjError::InvalidInput("separable data needs a 1D base".into()));
    }
    if !tilt.is_finite() {
        return Err(HjError::InvalidInput("tilt must be finite".into()));
    }
    let domain = Rect::new(vec![
        (base.domain.lo(0), base.domain.hi(0)),
        q2_range,
    ])?;
    let lipschitz = (base.lipschitz * base.lipschitz + tilt * tilt).sqrt();
    let semiconcavity = base.semiconcavity;
    Ok(PiecewiseInitialCondition {
        dim: 2,
        domain,
        repr: Repr::SeparableTilt { base: Box::new(base), tilt },
        lipschitz,
        semiconcavity,
        spec: None,
    })
}

/// Finite point set in ℝᵏ.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    pts: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(pts: Vec<Vec<f64>>) -> Result<Self> {
        let dim = pts.first().map_or(0, |p| p.len());
        for p in &pts {
            if p.len() != dim || p.iter().any(|x| !x.is_finite()) {
                return Err(HjError::InvalidInput(
                    "point sets need finite coordinates of equal dimension".into(),
                ));
            }
        }
        Ok(Self { dim, pts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.pts
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance_to(&self, x: &[f64]) -> Result<f64> {
        if self.pts.is_empty() {
            return Err(HjError::InvalidInput("distance to an empty point set".into()));
        }
        if x.len() != self.dim {
            return Err(HjError::InvalidInput(format!(
                "point dimension {} does not match set dimension {}",
                x.len(),
                self.dim
            )));
        }
        let mut best = f64::INFINITY;
        for p in &self.pts {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
        Ok(best.sqrt())
    }
}

/// Exact Hausdorff distance between finite sets: the larger of the two
/// one-sided sups of point-to-set distances.  The inner minimum breaks
/// early once it drops below the current sup, which cannot change the
/// result.
pub fn hausdorff_distance(x: &PointSet, y: &PointSet) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(HjError::InvalidInput("Hausdorff distance needs non-empty sets".into()));
    }
    if x.dim() != y.dim() {
        return Err(HjError::InvalidInput(format!(
            "point sets of dimension {} and {} are incomparable",
            x.dim(),
            y.dim()
        )));
    }
    let one_sided = |a: &PointSet, b: &PointSet, floor: f64| -> f64 {
        let mut sup2 = floor * floor;
        for p in a.points() {
            let mut best2 = f64::INFINITY;
            for q in b.points() {
                let d2: f64 = p.iter().zip(q).map(|(s, t)| (s - t) * (s - t)).sum();
                best2 = best2.min(d2);
                if best2 <= sup2 {
                    break;
                }
            }
            sup2 = sup2.max(best2);
        }
        sup2.sqrt()
    };
    let d_xy = one_sided(x, y, 0.0);
    Ok(one_sided(y, x, d_xy))
}

/// The enhanced triangle inequality
/// d(x, X) ≤ |x − y| + d(y, Y) + d_Haus(X, Y), with 1e-12 slack for
/// floating point.  Always true for non-empty sets; used as a test oracle.
pub fn enhanced_triangle_check(
    x: &[f64],
    y: &[f64],
    xs: &PointSet,
    ys: &PointSet,
) -> Result<bool> {
    let lhs = xs.distance_to(x)?;
    let dxy: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rhs = dxy + ys.distance_to(y)? + hausdorff_distance(xs, ys)?;
    Ok(lhs <= rhs + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn neg_abs_fan_and_smooth_points() {
        let u = neg_abs();
        assert_eq!(u.eval(&[0.0]), 0.0);
        assert_eq!(u.eval(&[2.0]), -2.0);
        assert_eq!(u.eval(&[-1.5]), -1.5);
        let fan = u.clarke_derivative(&[0.0]).unwrap();
        assert_eq!(fan.interval().unwrap(), (-1.0, 1.0));
        let single = u.clarke_derivative(&[2.0]).unwrap();
        assert_eq!(single.vertices, vec![vec![-1.0]]);
        assert_eq!(single.diameter(), 0.0);
        assert!(u.clarke_derivative(&[9.0]).is_err());
        assert_eq!(u.kinks_1d().unwrap(), vec![0.0]);
        assert_eq!(u.lipschitz(), 1.0);
        assert_eq!(u.semiconcavity(), Some(0.0));
    }

    #[test]
    fn localized_kink_shape() {
        let u = localized_kink(0.25).unwrap();
        // Values: 0 at the kink, -3/8 at 1/2, constant -1/2 outside.
        assert_eq!(u.eval(&[0.0]), 0.0);
        assert!(close(u.eval(&[0.5]), -0.375, 1e-15));
        assert!(close(u.eval(&[2.0]), -0.5, 1e-12));
        assert!(close(u.eval(&[-3.0]), -0.5, 1e-12));
        // Slopes: u0' = -1 + q right of the kink.
        assert!(close(u.grad(&[0.5])[0], -0.5, 1e-15));
        assert!(close(u.grad(&[-0.5])[0], 0.5, 1e-15));
        // The fan at the origin is [-1, 1], as for -|q|.
        let fan = u.clarke_derivative(&[0.0]).unwrap();
        assert_eq!(fan.interval().unwrap(), (-1.0, 1.0));
        // Smooth joins at the collar edges: zero-diameter fans.
        for q in [-1.25, -1.0, 1.0, 1.25] {
            assert_eq!(u.clarke_derivative(&[q]).unwrap().diameter(), 0.0);
        }
        assert_eq!(u.kinks_1d().unwrap(), vec![0.0]);
        assert_eq!(u.lipschitz(), 1.0);
        let b = u.semiconcavity().unwrap();
        assert!(b >= 1.0 && b < 1.6, "collar curvature bound {b}");
    }

    #[test]
    fn localized_kink_continuity_at_seams() {
        let u = localized_kink(0.25).unwrap();
        for b in [-1.25, -1.0, 0.0, 1.0, 1.25] {
            let e = 1e-9;
            assert!(
                close(u.eval(&[b - e]), u.eval(&[b + e]), 1e-8),
                "value jump at {b}"
            );
        }
        // Difference quotients respect the Lipschitz constant.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let b: f64 = rng.gen_range(-3.0..3.0);
            if (a - b).abs() < 1e-9 {
                continue;
            }
            let dq = (u.eval(&[a]) - u.eval(&[b])).abs() / (a - b).abs();
            assert!(dq <= u.lipschitz() + 1e-8, "difference quotient {dq}");
        }
    }

    #[test]
    fn localized_kink_is_semiconcave() {
        let u = localized_kink(0.25).unwrap();
        let b = u.semiconcavity().unwrap();
        // u0 - B q^2/2 has nonpositive curvature on piece interiors.
        for i in 0..=2000 {
            let q = -3.0 + 6.0 * i as f64 / 2000.0;
            let second = u.hess(&[q])[(0, 0)];
            assert!(second <= b + 1e-12, "curvature {second} above B = {b} at {q}");
        }
    }

    #[test]
    fn min_of_quadratics_fan_on_parabola() {
        let u = min_of_quadratics(0.75, 1.0, 0.25).unwrap();
        // Below the parabola the smaller slope atom is active.
        let q_below = [0.5, 0.5]; // f - q2 = -0.25 < 0, min = 1.0 * (-0.25)
        assert!(close(u.eval(&q_below), -0.25, 1e-15));
        let q_above = [0.5, 0.0]; // f - q2 = 0.25 > 0, min = 0.75 * 0.25
        assert!(close(u.eval(&q_above), 0.1875, 1e-15));
        // On the parabola both atoms vanish and the fan spans the two
        // scaled gradients.
        let on = [0.5, 0.25];
        let fan = u.clarke_derivative(&on).unwrap();
        assert_eq!(fan.vertices.len(), 2);
        let mut vs = fan.vertices.clone();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(close(vs[0][0], 0.75, 1e-12) && close(vs[0][1], -0.75, 1e-12));
        assert!(close(vs[1][0], 1.0, 1e-12) && close(vs[1][1], -1.0, 1e-12));
        // Off the curve: singleton.
        assert_eq!(u.clarke_derivative(&q_below).unwrap().vertices.len(), 1);
        // L = b * sqrt(f'^2 + 1) with f' = 2 on the core and a small
        // collar overshoot above it.
        let l = u.lipschitz();
        assert!(l >= (5.0f64).sqrt() - 1e-12 && l <= (5.0f64).sqrt() * 1.1, "L = {l}");
        assert!(u.semiconcavity().unwrap() >= 2.0);
    }

    #[test]
    fn tilt_and_offset_are_exact() {
        let u = localized_kink(0.25).unwrap();
        let v = u.tilted(&[0.3], -2.0);
        for q in [-2.0, -0.7, 0.0, 1.1] {
            assert!(close(v.eval(&[q]), u.eval(&[q]) + 0.3 * q - 2.0, 1e-15));
            assert!(close(v.grad(&[q])[0], u.grad(&[q])[0] + 0.3, 1e-15));
        }
        assert!(close(v.lipschitz(), 1.3, 1e-15));
        assert_eq!(v.semiconcavity(), u.semiconcavity());
        let w = u.offset(5.0);
        assert_eq!(w.eval(&[0.4]), u.eval(&[0.4]) + 5.0);
        // The fan tilts rigidly.
        let fan = v.clarke_derivative(&[0.0]).unwrap();
        assert_eq!(fan.interval().unwrap(), (-0.7, 1.3));
    }

    #[test]
    fn precompose_flips_breakpoints() {
        let u = neg_abs();
        // v(q) = u0(-2q + 1): kink where -2q + 1 = 0, i.e. q = 1/2.
        let v = u.precomposed_affine_1d(-2.0, 1.0).unwrap();
        for q in [-0.5, 0.2, 0.5, 1.0] {
            assert!(close(v.eval(&[q]), u.eval(&[-2.0 * q + 1.0]), 1e-15));
        }
        assert_eq!(v.kinks_1d().unwrap(), vec![0.5]);
        assert_eq!(v.lipschitz(), 2.0);
        // Chain rule at a smooth point: v'(1) = -2 u0'(-1) = -2.
        assert!(close(v.grad(&[1.0])[0], -2.0, 1e-15));
        let fan = v.clarke_derivative(&[0.5]).unwrap();
        assert_eq!(fan.interval().unwrap(), (-2.0, 2.0));
    }

    #[test]
    fn separable_tilt_combines_base_and_slope() {
        let base = neg_abs();
        let u = separable_tilt(base, 0.5, (-1.0, 1.0)).unwrap();
        assert_eq!(u.dim(), 2);
        assert!(close(u.eval(&[1.0, 0.4]), -1.0 + 0.2, 1e-15));
        let fan = u.clarke_derivative(&[0.0, 0.3]).unwrap();
        assert_eq!(fan.vertices.len(), 2);
        assert!(fan.vertices.iter().all(|v| v[1] == 0.5));
        assert!(close(u.lipschitz(), (1.25f64).sqrt(), 1e-15));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(33);
        assert_eq!(x.len(), 33);
        let total: f64 = w.iter().sum();
        assert!(close(total, 2.0, 1e-13));
        let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
        assert!(close(m2, 2.0 / 3.0, 1e-13));
        // Degree-64 monomial is still inside the exactness range.
        let m64: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(64)).sum();
        assert!(close(m64, 2.0 / 65.0, 1e-13));
        // Odd moments vanish by symmetry.
        let m3: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(3)).sum();
        assert!(m3.abs() < 1e-15);
    }

    #[test]
    fn mollify_neg_abs_sweeps_the_fan() {
        let u = neg_abs();
        let eps = 0.1;
        let m = u.mollify(eps).unwrap();
        // Uniform closeness L * eps.
        for i in 0..=400 {
            let q = -2.0 + 4.0 * i as f64 / 400.0;
            assert!((m.eval(&[q]) - u.eval(&[q])).abs() <= u.lipschitz() * eps + 1e-13);
        }
        // The derivative sweeps [-1, 1] monotonically across the collar.
        assert!(m.grad(&[-0.1])[0] > 0.99);
        assert!(m.grad(&[0.1])[0] < -0.99);
        assert!(m.grad(&[0.0])[0].abs() <= 0.1);
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let q = -0.12 + 0.24 * i as f64 / 100.0;
            let d = m.grad(&[q])[0];
            assert!(d <= prev + 1e-12, "derivative not monotone at {q}");
            prev = d;
        }
        // Outside the collar the mollification is exact.
        assert!(close(m.eval(&[0.5]), -0.5, 1e-13));
        assert!(close(m.grad(&[-0.5])[0], 1.0, 1e-13));
    }

    #[test]
    fn mollify_smooth_data_is_second_order() {
        // u0 = q^3/6 on [-3, 3]: B = sup u0'' = 3, and the quadrature
        // derivative differs from u0' by eps^2 * moment / 2, far below B*eps.
        let u = polynomial_pieces((-3.0, 3.0), &[], &[vec![0.0, 0.0, 0.0, 1.0 / 6.0]]).unwrap();
        let eps = 0.1;
        let m = u.mollify(eps).unwrap();
        for i in 0..=100 {
            let q = -2.0 + 4.0 * i as f64 / 100.0;
            let diff = (m.grad(&[q])[0] - u.grad(&[q])[0]).abs();
            assert!(diff <= u.semiconcavity().unwrap() * eps, "derivative drift {diff} at {q}");
        }
        // Constants are reproduced exactly by the discrete normalization.
        let c = polynomial_pieces((-1.0, 1.0), &[], &[vec![4.25]]).unwrap();
        let mc = c.mollify(0.05).unwrap();
        assert!(close(mc.eval(&[0.3]), 4.25, 1e-14));
    }

    #[test]
    fn mollify_keeps_curvature_bounded() {
        let u = localized_kink(0.25).unwrap();
        let b = u.semiconcavity().unwrap();
        let m = u.mollify(0.05).unwrap();
        for i in 0..=1009 {
            let q = -2.0 + 4.0 * i as f64 / 1009.0;
            let second = m.hess(&[q])[(0, 0)];
            assert!(second <= b + 1e-10, "curvature {second} above {b} at {q}");
        }
        assert!(matches!(u.mollify(0.0), Err(HjError::InvalidInput(_))));
        assert!(matches!(u.mollify(-1.0), Err(HjError::InvalidInput(_))));
    }

    #[test]
    fn mollify_2d_min_data() {
        let u = min_of_quadratics(0.75, 1.0, 0.25).unwrap();
        let m = u.mollify(0.05).unwrap();
        for (q1, q2) in [(0.0, 0.3), (0.5, 0.25), (-0.4, 0.0)] {
            let diff = (m.eval(&[q1, q2]) - u.eval(&[q1, q2])).abs();
            assert!(diff <= u.lipschitz() * 0.05 + 1e-12);
        }
        // Away from the tie curve the gradient matches the active atom.
        let g = m.grad(&[0.5, 1.0]);
        assert!(close(g[0], 1.0, 0.02) && close(g[1], -1.0, 1e-10));
    }

    #[test]
    fn spec_round_trip() {
        for u in [
            neg_abs(),
            localized_kink(0.25).unwrap(),
            min_of_quadratics(0.75, 1.0, 0.25).unwrap(),
            polynomial_pieces((-2.0, 2.0), &[0.0], &[vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap(),
        ] {
            let spec = u.spec().expect("catalog data carries specs").clone();
            let json = serde_json::to_string(&spec).unwrap();
            let back: InitialSpec = serde_json::from_str(&json).unwrap();
            let u2 = PiecewiseInitialCondition::from_spec(&back).unwrap();
            assert_eq!(u2.dim(), u.dim());
            let q = vec![0.37; u.dim()];
            assert!(close(u2.eval(&q), u.eval(&q), 1e-14));
        }
    }

    #[test]
    fn polynomial_pieces_reject_jumps_and_find_corners() {
        // Discontinuous pieces are rejected.
        assert!(polynomial_pieces((-1.0, 1.0), &[0.0], &[vec![0.0], vec![1.0]]).is_err());
        // A convex corner (|q|) voids the semiconcavity constant.
        let vee = polynomial_pieces((-1.0, 1.0), &[0.0], &[vec![0.0, -1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(vee.semiconcavity(), None);
        assert_eq!(vee.lipschitz(), 1.0);
        // A concave corner keeps it.
        let hat = polynomial_pieces((-1.0, 1.0), &[0.0], &[vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(hat.semiconcavity(), Some(0.0));
    }

    #[test]
    fn hausdorff_known_values() {
        let a = PointSet::new(vec![vec![0.0]]).unwrap();
        let b = PointSet::new(vec![vec![1.0]]).unwrap();
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0);
        let c = PointSet::new(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(hausdorff_distance(&c, &a).unwrap(), 1.0);
        assert_eq!(hausdorff_distance(&a, &c).unwrap(), 1.0);
        let empty = PointSet::new(vec![]).unwrap();
        assert!(hausdorff_distance(&a, &empty).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let x = PointSet::new(pts.clone()).unwrap();
        let y = PointSet::new(pts).unwrap();
        assert_eq!(hausdorff_distance(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn hausdorff_triangle_inequality_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let mk = |rng: &mut ChaCha8Rng| {
                let n = rng.gen_range(1..8);
                PointSet::new(
                    (0..n)
                        .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                        .collect(),
                )
                .unwrap()
            };
            let (x, y, z) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let dxz = hausdorff_distance(&x, &z).unwrap();
            let dxy = hausdorff_distance(&x, &y).unwrap();
            let dyz = hausdorff_distance(&y, &z).unwrap();
            assert!(dxz <= dxy + dyz + 1e-12);
        }
    }

    #[test]
    fn enhanced_triangle_never_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let mk = |rng: &mut ChaCha8Rng| {
                let n = rng.gen_range(1..6);
                PointSet::new(
                    (0..n)
                        .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                        .collect(),
                )
                .unwrap()
            };
            let xs = mk(&mut rng);
            let ys = mk(&mut rng);
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let y = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            assert!(enhanced_triangle_check(&x, &y, &xs, &ys).unwrap());
        }
        // Degenerate corners of the statement.
        let xs = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let x = [0.3, 0.4];
        assert!(enhanced_triangle_check(&x, &x, &xs, &xs).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn clarke_is_singleton_at_smooth_points(q in -3.9f64..3.9) {
            let u = localized_kink(0.25).unwrap();
            prop_assume!(q.abs() > 1e-6);
            let fan = u.clarke_derivative(&[q]).unwrap();
            prop_assert_eq!(fan.vertices.len(), 1);
            prop_assert!(fan.diameter() == 0.0);
        }

        #[test]
        fn hull_of_two_atom_gradients_is_a_segment(q1 in -0.9f64..0.9) {
            let u = min_of_quadratics(0.6, 1.4, 0.25).unwrap();
            let q2 = q1 * q1;
            let fan = u.clarke_derivative(&[q1, q2]).unwrap();
            prop_assert_eq!(fan.vertices.len(), 2);
            // Both vertices are positive multiples of (f'(q1), -1).
            for v in &fan.vertices {
                let c = -v[1];
                prop_assert!(c > 0.0);
                prop_assert!((v[0] - c * 2.0 * q1).abs() <= 1e-9);
            }
        }
    }
}
