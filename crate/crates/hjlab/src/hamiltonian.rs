//! Integrable Hamiltonians H = H(p) and the momentum-space calculus on them.
//!
//! A Hamiltonian enters the laboratory as a C² function of momentum alone,
//! carried as value/gradient/Hessian closures plus a curvature bound
//! C ≥ sup‖d²H‖.  The catalog ships the model cases used throughout:
//!
//! * `saddle`: H(p₁, p₂) = p₁p₂, the indefinite quadratic in d = 2,
//! * `cubic_wave`: a cubic in d = 1 that is convex left of p = 1/3 and
//!   concave right of it, glued C²-smoothly to affine tails so its slope
//!   and curvature stay bounded,
//! * `half_square`: H(p) = ‖p‖²/2, the classical convex benchmark,
//! * dense or sparse polynomials with caller-declared curvature bounds.
//!
//! On top of the catalog sit the momentum-space tools: affine changes of
//! variables H ↦ (1/λ)H(Ap + b) + ⟨p, n⟩ + α (these preserve both solution
//! concepts, so they generate families of examples from one), restriction
//! to a momentum subspace, convexity classification with witnesses, and
//! the Oleinik/Lax shock admissibility checks together with a constructive
//! search for momentum pairs (p₁, p₂) whose chord satisfies the entropy
//! condition while bracketing a curvature sign change.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HjError, Result};
use crate::grid::Rect;
use crate::hermite::{Jet2, QuinticHermite};

/// Value closure p ↦ H(p).
pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Gradient closure p ↦ ∇H(p).
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Hessian closure p ↦ d²H(p).
pub type HessFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A C² Hamiltonian H = H(p) with a declared curvature bound.
///
/// `c_bound` is the contract sup‖d²H(p)‖ used for classical-horizon
/// estimates; catalog entries tame their tails so the bound is global,
/// while custom polynomials declare the bound valid on their box of
/// interest.
#[derive(Clone)]
pub struct IntegrableHamiltonian {
    dim: usize,
    c_bound: f64,
    eval: EvalFn,
    grad: GradFn,
    hess: HessFn,
    spec: Option<HamiltonianSpec>,
}

impl std::fmt::Debug for IntegrableHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrableHamiltonian")
            .field("dim", &self.dim)
            .field("c_bound", &self.c_bound)
            .field("spec", &self.spec)
            .finish()
    }
}

impl IntegrableHamiltonian {
    /// Assembles a Hamiltonian from raw closures.
    pub fn from_parts(
        dim: usize,
        c_bound: f64,
        eval: EvalFn,
        grad: GradFn,
        hess: HessFn,
        spec: Option<HamiltonianSpec>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(HjError::InvalidInput(format!(
                "momentum dimension must be 1..=3, got {dim}"
            )));
        }
        if !c_bound.is_finite() || c_bound < 0.0 {
            return Err(HjError::InvalidInput(format!(
                "curvature bound must be finite and >= 0, got {c_bound}"
            )));
        }
        Ok(Self {
            dim,
            c_bound,
            eval,
            grad,
            hess,
            spec,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared bound on the Hessian operator norm.
    pub fn c_bound(&self) -> f64 {
        self.c_bound
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.dim);
        (self.eval)(p)
    }

    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(p.len(), self.dim);
        (self.grad)(p)
    }

    pub fn hess(&self, p: &[f64]) -> DMatrix<f64> {
        debug_assert_eq!(p.len(), self.dim);
        (self.hess)(p)
    }

    /// Scalar shortcuts for d = 1.
    pub fn eval1(&self, p: f64) -> f64 {
        self.eval(&[p])
    }

    pub fn grad1(&self, p: f64) -> f64 {
        self.grad(&[p])[0]
    }

    pub fn hess1(&self, p: f64) -> f64 {
        self.hess(&[p])[(0, 0)]
    }

    /// Operator norm of the Hessian at `p`.
    pub fn hess_norm(&self, p: &[f64]) -> f64 {
        sym_norm(&self.hess(p))
    }

    /// The declarative description this Hamiltonian was built from, if any.
    /// Derived objects (affine images, restrictions) carry none.
    pub fn spec(&self) -> Option<&HamiltonianSpec> {
        self.spec.as_ref()
    }

    /// Rebuilds a catalog or polynomial Hamiltonian from its description.
    pub fn from_spec(spec: &HamiltonianSpec) -> Result<Self> {
        match spec.family.as_str() {
            "saddle" => Ok(saddle()),
            "cubic_wave" => Ok(cubic_wave()),
            "half_square" => half_square(spec.dim.unwrap_or(1)),
            "poly" => {
                let coeffs = spec.coeffs.as_ref().ok_or_else(|| {
                    HjError::InvalidInput("poly spec needs a coeffs field".into())
                })?;
                let c_bound = spec.c_bound.ok_or_else(|| {
                    HjError::InvalidInput("poly spec needs an explicit c_bound".into())
                })?;
                match coeffs {
                    CoeffSpec::Dense(list) => poly_1d(list, c_bound),
                    CoeffSpec::Terms(terms) => {
                        let dim = spec
                            .dim
                            .or_else(|| terms.first().map(|t| t.powers.len()))
                            .ok_or_else(|| {
                                HjError::InvalidInput("poly spec needs dim or a first term".into())
                            })?;
                        custom_poly(dim, terms.clone(), c_bound)
                    }
                }
            }
            other => Err(HjError::InvalidInput(format!(
                "unknown Hamiltonian family '{other}'"
            ))),
        }
    }
}

/// Declarative description of a catalog or polynomial Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<CoeffSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bound: Option<f64>,
}

impl HamiltonianSpec {
    fn family(name: &str) -> Self {
        Self {
            family: name.into(),
            dim: None,
            coeffs: None,
            c_bound: None,
        }
    }
}

/// Polynomial coefficients: either a dense 1D list `[a₀, a₁, ...]` for
/// Σ aₖ pᵏ, or sparse multivariate terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Dense(Vec<f64>),
    Terms(Vec<PolyTerm>),
}

/// One monomial `coeff * Π pᵢ^powers[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// H(p₁, p₂) = p₁p₂.  Indefinite: eigenvalues of d²H are ±1 everywhere.
pub fn saddle() -> IntegrableHamiltonian {
    IntegrableHamiltonian {
        dim: 2,
        c_bound: 1.0,
        eval: Arc::new(|p| p[0] * p[1]),
        grad: Arc::new(|p| vec![p[1], p[0]]),
        hess: Arc::new(|_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        spec: Some(HamiltonianSpec::family("saddle")),
    }
}

/// H(p) = ‖p‖²/2 in `dim` variables.
pub fn half_square(dim: usize) -> Result<IntegrableHamiltonian> {
    if !(1..=3).contains(&dim) {
        return Err(HjError::InvalidInput(format!(
            "half_square dimension must be 1..=3, got {dim}"
        )));
    }
    let mut spec = HamiltonianSpec::family("half_square");
    spec.dim = Some(dim);
    Ok(IntegrableHamiltonian {
        dim,
        c_bound: 1.0,
        eval: Arc::new(|p| 0.5 * p.iter().map(|x| x * x).sum::<f64>()),
        grad: Arc::new(|p| p.to_vec()),
        hess: Arc::new(move |p| DMatrix::identity(p.len(), p.len())),
        spec: Some(spec),
    })
}

/// Convex-then-concave model cubic in d = 1.
///
/// The core is H(p) = −p³ + p² + p − 1 = −(p + 1)(1 − p)² on [−2, 2], so
///
/// * H(±1) = 0, H′(1) = 0, H′(−1) = −4,
/// * H″(p) = 2 − 6p changes sign at p = 1/3 (convex left, concave right).
///
/// Outside [−2, 2] the cubic is blended over width-1 quintic Hermite
/// collars to its tangent lines at ±2, so H is globally C² with affine
/// tails, bounded slope, and the curvature bound reported by `c_bound` is
/// exact (the collar extrema come from closed-form roots of the blend's
/// third derivative).
pub fn cubic_wave() -> IntegrableHamiltonian {
    let m = |p: f64| ((-p + 1.0) * p + 1.0) * p - 1.0;
    let md = |p: f64| (-3.0 * p + 2.0) * p + 1.0;
    let mdd = |p: f64| 2.0 - 6.0 * p;

    // Tangent tails: at p = 2 the slope is -7, at p = -2 it is -15.
    let right = QuinticHermite::from_jets(
        2.0,
        3.0,
        Jet2 { v: m(2.0), d: md(2.0), dd: mdd(2.0) },
        Jet2 { v: m(2.0) + md(2.0), d: md(2.0), dd: 0.0 },
    );
    let left = QuinticHermite::from_jets(
        -3.0,
        -2.0,
        Jet2 { v: m(-2.0) - md(-2.0), d: md(-2.0), dd: 0.0 },
        Jet2 { v: m(-2.0), d: md(-2.0), dd: mdd(-2.0) },
    );

    let (rl, rh) = right.second_range();
    let (ll, lh) = left.second_range();
    let core_max = mdd(-2.0).abs().max(mdd(2.0).abs());
    let c_bound = core_max
        .max(rl.abs())
        .max(rh.abs())
        .max(ll.abs())
        .max(lh.abs());

    let jet = {
        let (left, right) = (left.clone(), right.clone());
        move |p: f64| -> (f64, f64, f64) {
            if p < -3.0 {
                (left.value(-3.0) + md(-2.0) * (p + 3.0), md(-2.0), 0.0)
            } else if p < -2.0 {
                (left.value(p), left.deriv(p), left.second(p))
            } else if p <= 2.0 {
                (m(p), md(p), mdd(p))
            } else if p <= 3.0 {
                (right.value(p), right.deriv(p), right.second(p))
            } else {
                (right.value(3.0) + md(2.0) * (p - 3.0), md(2.0), 0.0)
            }
        }
    };
    let j1 = Arc::new(jet);
    let j2 = j1.clone();
    let j3 = j1.clone();
    IntegrableHamiltonian {
        dim: 1,
        c_bound,
        eval: Arc::new(move |p| j1(p[0]).0),
        grad: Arc::new(move |p| vec![j2(p[0]).1]),
        hess: Arc::new(move |p| DMatrix::from_element(1, 1, j3(p[0]).2)),
        spec: Some(HamiltonianSpec::family("cubic_wave")),
    }
}

/// Dense 1D polynomial H(p) = Σ aₖ pᵏ with a caller-declared curvature
/// bound (valid on the caller's box of interest; a nonconstant polynomial
/// has no global one).
pub fn poly_1d(coeffs: &[f64], c_bound: f64) -> Result<IntegrableHamiltonian> {
    if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(HjError::InvalidInput(
            "poly_1d needs a nonempty list of finite coefficients".into(),
        ));
    }
    let a: Vec<f64> = coeffs.to_vec();
    let d1: Vec<f64> = a
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect();
    let d2: Vec<f64> = d1
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect();
    let horner = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck);
    let (a2, d1b, d2b) = (a.clone(), d1, d2);
    let mut spec = HamiltonianSpec::family("poly");
    spec.dim = Some(1);
    spec.coeffs = Some(CoeffSpec::Dense(a.clone()));
    spec.c_bound = Some(c_bound);
    IntegrableHamiltonian::from_parts(
        1,
        c_bound,
        Arc::new(move |p| horner(&a2, p[0])),
        Arc::new(move |p| vec![horner(&d1b, p[0])]),
        Arc::new(move |p| DMatrix::from_element(1, 1, horner(&d2b, p[0]))),
        Some(spec),
    )
}

/// Sparse multivariate polynomial with analytic derivatives and a
/// caller-declared curvature bound.
pub fn custom_poly(
    dim: usize,
    terms: Vec<PolyTerm>,
    c_bound: f64,
) -> Result<IntegrableHamiltonian> {
    if terms.is_empty() {
        return Err(HjError::InvalidInput("custom_poly needs at least one term".into()));
    }
    for t in &terms {
        if t.powers.len() != dim || !t.coeff.is_finite() {
            return Err(HjError::InvalidInput(format!(
                "term {:?} does not match dimension {dim}",
                t
            )));
        }
    }
    let pw = |x: f64, k: u32| x.powi(k as i32);
    let t1 = terms.clone();
    let t2 = terms.clone();
    let t3 = terms.clone();
    let mut spec = HamiltonianSpec::family("poly");
    spec.dim = Some(dim);
    spec.coeffs = Some(CoeffSpec::Terms(terms));
    spec.c_bound = Some(c_bound);
    IntegrableHamiltonian::from_parts(
        dim,
        c_bound,
        Arc::new(move |p| {
            t1.iter()
                .map(|t| t.coeff * t.powers.iter().zip(p).map(|(&k, &x)| pw(x, k)).product::<f64>())
                .sum()
        }),
        Arc::new(move |p| {
            (0..p.len())
                .map(|j| {
                    t2.iter()
                        .filter(|t| t.powers[j] > 0)
                        .map(|t| {
                            t.coeff
                                * t.powers
                                    .iter()
                                    .enumerate()
                                    .map(|(i, &k)| {
                                        if i == j {
                                            k as f64 * pw(p[i], k - 1)
                                        } else {
                                            pw(p[i], k)
                                        }
                                    })
                                    .product::<f64>()
                        })
                        .sum()
                })
                .collect()
        }),
        Arc::new(move |p| {
            let d = p.len();
            let mut m = DMatrix::zeros(d, d);
            for t in &t3 {
                for j in 0..d {
                    for l in j..d {
                        let entry = if j == l {
                            if t.powers[j] < 2 {
                                continue;
                            }
                            t.coeff
                                * t.powers
                                    .iter()
                                    .enumerate()
                                    .map(|(i, &k)| {
                                        if i == j {
                                            (k * (k - 1)) as f64 * pw(p[i], k - 2)
                                        } else {
                                            pw(p[i], k)
                                        }
                                    })
                                    .product::<f64>()
                        } else {
                            if t.powers[j] < 1 || t.powers[l] < 1 {
                                continue;
                            }
                            t.coeff
                                * t.powers
                                    .iter()
                                    .enumerate()
                                    .map(|(i, &k)| {
                                        if i == j || i == l {
                                            k as f64 * pw(p[i], k - 1)
                                        } else {
                                            pw(p[i], k)
                                        }
                                    })
                                    .product::<f64>()
                        };
                        m[(j, l)] += entry;
                        if j != l {
                            m[(l, j)] += entry;
                        }
                    }
                }
            }
            m
        }),
        Some(spec),
    )
}

/// p ↦ H(−p).  Mirroring momentum preserves both generalized solution
/// concepts (initial data mirrors in q), so orientation conventions can
/// always assume the convex stretch sits on the left.
pub fn mirror(h: &IntegrableHamiltonian) -> Result<IntegrableHamiltonian> {
    let params = AffineParams::new(
        -DMatrix::identity(h.dim, h.dim),
        DVector::zeros(h.dim),
        1.0,
        DVector::zeros(h.dim),
        0.0,
    )?;
    affine_transform(h, &params)
}

/// Parameters of the substitution H ↦ (1/λ)H(Ap + b) + ⟨p, n⟩ + α.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParams {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lambda: f64,
    pub n: DVector<f64>,
    pub alpha: f64,
}

impl AffineParams {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        lambda: f64,
        n: DVector<f64>,
        alpha: f64,
    ) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || b.len() != d || n.len() != d {
            return Err(HjError::InvalidInput(format!(
                "affine parameter shapes disagree: A is {}x{}, b has {}, n has {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                n.len()
            )));
        }
        if a.iter().any(|x| !x.is_finite())
            || b.iter().any(|x| !x.is_finite())
            || n.iter().any(|x| !x.is_finite())
            || !lambda.is_finite()
            || !alpha.is_finite()
        {
            return Err(HjError::InvalidInput("affine parameters must be finite".into()));
        }
        Ok(Self { a, b, lambda, n, alpha })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            a: DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
            lambda: 1.0,
            n: DVector::zeros(dim),
            alpha: 0.0,
        }
    }

    /// d = 1 convenience constructor.
    pub fn scalar(a: f64, b: f64, lambda: f64, n: f64, alpha: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DVector::from_element(1, b),
            lambda,
            DVector::from_element(1, n),
            alpha,
        )
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The single substitution equal to applying `self` first, then
    /// `second`:
    ///
    /// A = A₁A₂,  b = A₁b₂ + b₁,  λ = λ₁λ₂,
    /// n = A₂ᵀn₁/λ₂ + n₂,  α = (⟨b₂, n₁⟩ + α₁)/λ₂ + α₂.
    pub fn then(&self, second: &AffineParams) -> Result<AffineParams> {
        if self.dim() != second.dim() {
            return Err(HjError::InvalidInput(format!(
                "cannot compose affine maps of dimension {} and {}",
                self.dim(),
                second.dim()
            )));
        }
        AffineParams::new(
            &self.a * &second.a,
            &self.a * &second.b + &self.b,
            self.lambda * second.lambda,
            second.a.tr_mul(&self.n) / second.lambda + &second.n,
            (second.b.dot(&self.n) + self.alpha) / second.lambda + second.alpha,
        )
    }
}

/// Applies H̄(p) = (1/λ)H(Ap + b) + ⟨p, n⟩ + α for invertible A and λ ≠ 0.
///
/// The curvature bound maps to C‖A‖²/|λ| with ‖A‖ the spectral norm.
pub fn affine_transform(
    h: &IntegrableHamiltonian,
    params: &AffineParams,
) -> Result<IntegrableHamiltonian> {
    if params.dim() != h.dim {
        return Err(HjError::InvalidInput(format!(
            "affine map dimension {} does not match Hamiltonian dimension {}",
            params.dim(),
            h.dim
        )));
    }
    if params.lambda.abs() < 1e-12 {
        return Err(HjError::DegenerateParam(format!(
            "scaling lambda = {} is too close to zero",
            params.lambda
        )));
    }
    let det = params.a.clone().determinant();
    if det.abs() < 1e-12 {
        return Err(HjError::DegenerateParam(format!(
            "matrix A has near-zero determinant {det:e}"
        )));
    }
    let spectral = {
        let sv = params.a.clone().svd(false, false).singular_values;
        sv.iter().fold(0.0f64, |acc, &s| acc.max(s))
    };
    let c_bound = h.c_bound * spectral * spectral / params.lambda.abs();

    let (a, b, lambda, n, alpha) = (
        params.a.clone(),
        params.b.clone(),
        params.lambda,
        params.n.clone(),
        params.alpha,
    );
    let at = a.transpose();
    let (h1, h2, h3) = (h.clone(), h.clone(), h.clone());
    let (a1, b1) = (a.clone(), b.clone());
    let (a2, b2, n2) = (a.clone(), b.clone(), n.clone());
    let (a3, b3) = (a, b);

    IntegrableHamiltonian::from_parts(
        h.dim,
        c_bound,
        Arc::new(move |p| {
            let y = &a1 * DVector::from_column_slice(p) + &b1;
            h1.eval(y.as_slice()) / lambda
                + p.iter().zip(n.iter()).map(|(x, m)| x * m).sum::<f64>()
                + alpha
        }),
        Arc::new(move |p| {
            let y = &a2 * DVector::from_column_slice(p) + &b2;
            let g = DVector::from_vec(h2.grad(y.as_slice()));
            let out = a2.tr_mul(&g) / lambda + &n2;
            out.iter().copied().collect()
        }),
        Arc::new(move |p| {
            let y = &a3 * DVector::from_column_slice(p) + &b3;
            &at * h3.hess(y.as_slice()) * &a3 / lambda
        }),
        None,
    )
}

/// Freezes the momenta listed in `fixed` at the given values, producing the
/// Hamiltonian of the remaining variables.  Restriction to a coordinate
/// subspace cannot increase the Hessian norm, so the curvature bound is
/// inherited.
pub fn reduce(
    h: &IntegrableHamiltonian,
    fixed: &[(usize, f64)],
) -> Result<IntegrableHamiltonian> {
    if fixed.is_empty() || fixed.len() >= h.dim {
        return Err(HjError::InvalidInput(format!(
            "reduce needs between 1 and {} fixed momenta, got {}",
            h.dim - 1,
            fixed.len()
        )));
    }
    let mut seen = vec![false; h.dim];
    for &(i, v) in fixed {
        if i >= h.dim {
            return Err(HjError::InvalidInput(format!(
                "fixed index {i} out of range for dimension {}",
                h.dim
            )));
        }
        if !v.is_finite() {
            return Err(HjError::InvalidInput(format!("fixed value for p_{i} is not finite")));
        }
        if seen[i] {
            return Err(HjError::InvalidInput(format!("momentum index {i} fixed twice")));
        }
        seen[i] = true;
    }
    let free: Vec<usize> = (0..h.dim).filter(|i| !seen[*i]).collect();
    let fixed: Vec<(usize, f64)> = fixed.to_vec();
    let new_dim = free.len();
    let full_dim = h.dim;

    let assemble = move |p: &[f64], free: &[usize], fixed: &[(usize, f64)]| -> Vec<f64> {
        let mut full = vec![0.0; full_dim];
        for (slot, &i) in free.iter().enumerate() {
            full[i] = p[slot];
        }
        for &(i, v) in fixed {
            full[i] = v;
        }
        full
    };

    let (h1, h2, h3) = (h.clone(), h.clone(), h.clone());
    let (f1, f2, f3) = (free.clone(), free.clone(), free);
    let (x1, x2, x3) = (fixed.clone(), fixed.clone(), fixed);

    IntegrableHamiltonian::from_parts(
        new_dim,
        h.c_bound,
        Arc::new(move |p| h1.eval(&assemble(p, &f1, &x1))),
        Arc::new(move |p| {
            let g = h2.grad(&assemble(p, &f2, &x2));
            f2.iter().map(|&i| g[i]).collect()
        }),
        Arc::new(move |p| {
            let m = h3.hess(&assemble(p, &f3, &x3));
            DMatrix::from_fn(f3.len(), f3.len(), |r, c| m[(f3[r], f3[c])])
        }),
        None,
    )
}

/// Outcome of a sampled convexity scan.
#[derive(Debug, Clone, PartialEq)]
pub enum Convexity {
    Convex,
    Concave,
    Neither(NonconvexWitness),
    /// Hessian vanished (within tolerance) at every sample.
    Indeterminate,
}

/// Evidence that a Hamiltonian is neither convex nor concave.
#[derive(Debug, Clone, PartialEq)]
pub enum NonconvexWitness {
    /// Indefinite Hessian at a single momentum.
    Indefinite { p: Vec<f64>, eig_min: f64, eig_max: f64 },
    /// Definite Hessians of opposite signs at two momenta.
    SplitSigns { p_convex: Vec<f64>, p_concave: Vec<f64> },
}

/// Scans `d²H` on a lattice with `n` points per axis and classifies the
/// Hamiltonian on the box.  Eigenvalues within 1e-12 of zero count as zero.
pub fn classify_convexity(
    h: &IntegrableHamiltonian,
    bx: &Rect,
    n: usize,
) -> Result<Convexity> {
    if bx.dim() != h.dim {
        return Err(HjError::InvalidInput(format!(
            "box dimension {} does not match Hamiltonian dimension {}",
            bx.dim(),
            h.dim
        )));
    }
    if n < 2 {
        return Err(HjError::InvalidInput("classification needs n >= 2 per axis".into()));
    }
    if n.pow(h.dim as u32) > 4_000_000 {
        return Err(HjError::InvalidInput(format!(
            "lattice of {n}^{} points is too large",
            h.dim
        )));
    }
    let tol = 1e-12;
    let mut first_pos: Option<Vec<f64>> = None;
    let mut first_neg: Option<Vec<f64>> = None;
    for p in bx.lattice(n) {
        let (emin, emax) = sym_eig_range(&h.hess(&p));
        let has_pos = emax > tol;
        let has_neg = emin < -tol;
        if has_pos && has_neg {
            return Ok(Convexity::Neither(NonconvexWitness::Indefinite {
                p,
                eig_min: emin,
                eig_max: emax,
            }));
        }
        if has_pos && first_pos.is_none() {
            first_pos = Some(p.clone());
        }
        if has_neg && first_neg.is_none() {
            first_neg = Some(p);
        }
        if let (Some(pc), Some(nc)) = (&first_pos, &first_neg) {
            return Ok(Convexity::Neither(NonconvexWitness::SplitSigns {
                p_convex: pc.clone(),
                p_concave: nc.clone(),
            }));
        }
    }
    Ok(match (first_pos, first_neg) {
        (Some(_), None) => Convexity::Convex,
        (None, Some(_)) => Convexity::Concave,
        (None, None) => Convexity::Indeterminate,
        (Some(_), Some(_)) => unreachable!("split signs returns early"),
    })
}

/// Verdict of the Oleinik chord test between two momenta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyVerdict {
    pub holds: bool,
    pub strict: bool,
    /// −max over samples of H − chord; positive margins mean the graph
    /// clears the chord by at least that much at the tightest sample.
    pub margin: f64,
}

/// Samples the Oleinik entropy condition for a shock connecting slopes
/// `p1` (left) and `p2` (right) in d = 1: the graph of H must not exceed
/// the chord over [p1, p2].
///
/// The `n` sample points sit strictly inside the interval at fractions
/// i/(n+1), and the pair is canonically ordered first, so swapping `p1`
/// and `p2` returns bitwise-identical verdicts.
pub fn check_entropy_condition(
    h: &IntegrableHamiltonian,
    p1: f64,
    p2: f64,
    n: usize,
) -> Result<EntropyVerdict> {
    require_dim(h, 1)?;
    if n == 0 {
        return Err(HjError::InvalidInput("entropy check needs n >= 1 samples".into()));
    }
    if !p1.is_finite() || !p2.is_finite() || p1 == p2 {
        return Err(HjError::InvalidInput(format!(
            "entropy check needs distinct finite momenta, got {p1} and {p2}"
        )));
    }
    let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
    let (vlo, vhi) = (h.eval1(lo), h.eval1(hi));
    let mut worst = f64::NEG_INFINITY;
    for i in 1..=n {
        let mu = i as f64 / (n + 1) as f64;
        let p = mu * hi + (1.0 - mu) * lo;
        let chord = mu * vhi + (1.0 - mu) * vlo;
        worst = worst.max(h.eval1(p) - chord);
    }
    Ok(EntropyVerdict {
        holds: worst <= 0.0,
        strict: worst < -1e-12,
        margin: -worst,
    })
}

/// Verdict of the Lax characteristic-impingement test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxVerdict {
    pub holds: bool,
    pub strict: bool,
    /// (H(p₂) − H(p₁)) − H′(p₁)(p₂ − p₁).
    pub left_margin: f64,
    /// H′(p₂)(p₂ − p₁) − (H(p₂) − H(p₁)).
    pub right_margin: f64,
}

/// Checks both Lax inequalities H′(p₁) ≤ (H(p₂) − H(p₁))/(p₂ − p₁) ≤ H′(p₂)
/// in the scaled form that avoids the division.  Swapping the momenta swaps
/// the two margins.
pub fn check_lax_condition(h: &IntegrableHamiltonian, p1: f64, p2: f64) -> Result<LaxVerdict> {
    require_dim(h, 1)?;
    if !p1.is_finite() || !p2.is_finite() || p1 == p2 {
        return Err(HjError::InvalidInput(format!(
            "Lax check needs distinct finite momenta, got {p1} and {p2}"
        )));
    }
    let dv = h.eval1(p2) - h.eval1(p1);
    let dp = p2 - p1;
    let left = dv - h.grad1(p1) * dp;
    let right = h.grad1(p2) * dp - dv;
    Ok(LaxVerdict {
        holds: left >= 0.0 && right >= 0.0,
        strict: left > 1e-12 && right > 1e-12,
        left_margin: left,
        right_margin: right,
    })
}

/// How `find_entropy_pair` located its pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRoute {
    /// The anchor chord was violated; the pair comes from maximizing the
    /// chord slope out of the convex anchor until it supports the graph.
    ChordMax,
    /// The anchor chord already satisfied the entropy condition; the pair
    /// comes from tracing the tangent at the concave anchor back to its
    /// last crossing of the graph.
    TangentTrace,
}

/// A shock-admissibility pair produced by [`find_entropy_pair`].
///
/// When `reflected` is true the pair lives in the mirrored momentum
/// variable r = −p: it satisfies the conditions for p ↦ H(−p), which has
/// the same wavefronts and grid solutions up to spatial reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPair {
    pub p1: f64,
    pub p2: f64,
    pub reflected: bool,
    pub route: PairRoute,
    pub strict: bool,
}

/// Searches a 1D scan interval for momenta p₁ < p₂ with
///
/// * H″(p₁) > 0 and H″(p₂) < 0,
/// * H′(p₁) < H′(p₂) and chord slope equal to H′(p₂) (within 1e-8),
/// * the entropy condition holding between them,
///
/// mirroring p ↦ −p first if the concave stretch sits left of the convex
/// one.  Anchors come from the first/last curvature sign on a uniform grid
/// of `n_scan` points; degenerate tangencies are escaped by deterministic
/// anchor nudges of 1e-4 of the scan width, at most 100 of them.
pub fn find_entropy_pair(
    h: &IntegrableHamiltonian,
    scan: (f64, f64),
    n_scan: usize,
) -> Result<EntropyPair> {
    require_dim(h, 1)?;
    let (lo, hi) = scan;
    if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
        return Err(HjError::InvalidInput(format!(
            "scan interval [{lo}, {hi}] is empty or not finite"
        )));
    }
    if n_scan < 16 {
        return Err(HjError::InvalidInput("entropy-pair scan needs n_scan >= 16".into()));
    }

    if let Some(found) = search_pair(h, (lo, hi), n_scan)? {
        return Ok(EntropyPair {
            p1: found.0,
            p2: found.1,
            reflected: false,
            route: found.2,
            strict: found.3,
        });
    }
    let g = mirror(h)?;
    if let Some(found) = search_pair(&g, (-hi, -lo), n_scan)? {
        return Ok(EntropyPair {
            p1: found.0,
            p2: found.1,
            reflected: true,
            route: found.2,
            strict: found.3,
        });
    }
    Err(HjError::EntropyPairNotFound(
        "no convex stretch left of a concave stretch in either orientation".into(),
    ))
}

/// One orientation of the entropy-pair search.  `Ok(None)` means this
/// orientation has no convex-before-concave curvature pattern; hard input
/// errors still propagate.
fn search_pair(
    g: &IntegrableHamiltonian,
    scan: (f64, f64),
    n_scan: usize,
) -> Result<Option<(f64, f64, PairRoute, bool)>> {
    let (lo, hi) = scan;
    let step = (hi - lo) / (n_scan - 1) as f64;
    let xs: Vec<f64> = (0..n_scan).map(|i| lo + step * i as f64).collect();
    let curv: Vec<f64> = xs.iter().map(|&x| g.hess1(x)).collect();
    let cmax = curv.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let tol = (1e-9 * cmax).max(1e-12);

    let first_plus = curv.iter().position(|&c| c > tol);
    let last_minus = curv.iter().rposition(|&c| c < -tol);
    let (i_plus, i_minus) = match (first_plus, last_minus) {
        (Some(a), Some(b)) if a < b => (a, b),
        _ => return Ok(None),
    };
    let p1_anchor = xs[i_plus];
    let p2_anchor = xs[i_minus];

    let seed = check_entropy_condition(g, p1_anchor, p2_anchor, 1001)?;
    let route = if seed.holds {
        PairRoute::TangentTrace
    } else {
        PairRoute::ChordMax
    };

    let nudge = 1e-4 * (hi - lo);
    for attempt in 0..100 {
        let delta = attempt as f64 * nudge;
        let found = match route {
            PairRoute::ChordMax => chord_max_pair(g, scan, &xs, p1_anchor + delta, tol),
            PairRoute::TangentTrace => {
                tangent_trace_pair(g, &xs, p1_anchor, p2_anchor - delta, tol)
            }
        };
        if let Some((p1, p2, strict)) = found {
            return Ok(Some((p1, p2, route, strict)));
        }
    }
    Err(HjError::EntropyPairNotFound(
        "anchor perturbation retries exhausted".into(),
    ))
}

/// From a convex anchor p₁, pick the grid point maximizing the chord slope
/// (G(x) − G(p₁))/(x − p₁) and polish it with Newton on the tangency
/// residual ψ(p) = G′(p)(p − p₁) − (G(p) − G(p₁)); at ψ = 0 the chord is
/// tangent from above, which is exactly the supporting chord.
fn chord_max_pair(
    g: &IntegrableHamiltonian,
    scan: (f64, f64),
    xs: &[f64],
    p1: f64,
    tol: f64,
) -> Option<(f64, f64, bool)> {
    if g.hess1(p1) <= tol {
        return None;
    }
    let v1 = g.eval1(p1);
    let step = xs[1] - xs[0];
    let mut best: Option<(f64, f64)> = None;
    for &x in xs {
        if x <= p1 + 0.5 * step {
            continue;
        }
        let slope = (g.eval1(x) - v1) / (x - p1);
        if best.map_or(true, |(s, _)| slope > s) {
            best = Some((slope, x));
        }
    }
    let (_, mut p2) = best?;
    for _ in 0..60 {
        let psi = g.grad1(p2) * (p2 - p1) - (g.eval1(p2) - v1);
        let dpsi = g.hess1(p2) * (p2 - p1);
        if dpsi.abs() < 1e-300 {
            break;
        }
        let next = (p2 - psi / dpsi).clamp(p1 + 0.5 * step, scan.1);
        let moved = (next - p2).abs();
        p2 = next;
        if moved <= 1e-14 * (1.0 + p2.abs()) {
            break;
        }
    }
    validate_pair(g, p1, p2, tol)
}

/// From a concave anchor p₂, trace T(x) = G(x) − G(p₂) + G′(p₂)(p₂ − x)
/// (the graph minus the tangent at p₂) leftward to its nearest sign change
/// and bisect; the root is the momentum whose chord to p₂ has slope G′(p₂).
fn tangent_trace_pair(
    g: &IntegrableHamiltonian,
    xs: &[f64],
    p1_floor: f64,
    p2: f64,
    tol: f64,
) -> Option<(f64, f64, bool)> {
    if g.hess1(p2) >= -tol {
        return None;
    }
    let v2 = g.eval1(p2);
    let d2 = g.grad1(p2);
    let t = |x: f64| g.eval1(x) - v2 + d2 * (p2 - x);
    let step = xs[1] - xs[0];
    let mut right = p2;
    let mut bracket = None;
    for &x in xs.iter().rev() {
        if x >= p2 - 0.5 * step {
            continue;
        }
        if x < p1_floor - 0.5 * step {
            break;
        }
        if t(x) >= 0.0 {
            bracket = Some((x, right));
            break;
        }
        right = x;
    }
    let (mut a, mut b) = bracket?;
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if t(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    validate_pair(g, 0.5 * (a + b), p2, tol)
}

/// Verifies curvature signs, slope ordering, chord/tangent agreement, and
/// the entropy condition for a candidate pair.
fn validate_pair(
    g: &IntegrableHamiltonian,
    p1: f64,
    p2: f64,
    tol: f64,
) -> Option<(f64, f64, bool)> {
    if !(p1 < p2) {
        return None;
    }
    if g.hess1(p1) <= tol || g.hess1(p2) >= -tol {
        return None;
    }
    let d1 = g.grad1(p1);
    let d2 = g.grad1(p2);
    if !(d1 < d2 - 1e-12) {
        return None;
    }
    let chord = (g.eval1(p2) - g.eval1(p1)) / (p2 - p1);
    if (chord - d2).abs() > 1e-8 * (1.0 + chord.abs().max(d2.abs())) {
        return None;
    }
    let verdict = check_entropy_condition(g, p1, p2, 1001).ok()?;
    if !verdict.holds {
        return None;
    }
    Some((p1, p2, verdict.strict))
}

/// Sampled sup of the Hessian operator norm over the momentum ball
/// ‖p‖ ≤ radius.  Used to size classical horizons by the curvature actually
/// reachable from given initial data rather than the global bound.
pub fn hessian_norm_bound(h: &IntegrableHamiltonian, radius: f64) -> Result<f64> {
    bound_over_ball(h, radius, |h, p| sym_norm(&h.hess(p)))
}

/// Sampled sup of ‖∇H‖ over the momentum ball ‖p‖ ≤ radius.  Bounds front
/// speeds and sizes padding for grid schemes.
pub fn gradient_norm_bound(h: &IntegrableHamiltonian, radius: f64) -> Result<f64> {
    bound_over_ball(h, radius, |h, p| {
        h.grad(p).iter().map(|g| g * g).sum::<f64>().sqrt()
    })
}

fn bound_over_ball(
    h: &IntegrableHamiltonian,
    radius: f64,
    f: impl Fn(&IntegrableHamiltonian, &[f64]) -> f64,
) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(HjError::InvalidInput(format!(
            "ball radius must be positive and finite, got {radius}"
        )));
    }
    let mut best = 0.0f64;
    match h.dim {
        1 => {
            let n = 4097;
            for i in 0..n {
                let p = -radius + 2.0 * radius * i as f64 / (n - 1) as f64;
                best = best.max(f(h, &[p]));
            }
        }
        2 => {
            let n = 129;
            for i in 0..n {
                for j in 0..n {
                    let p = [
                        -radius + 2.0 * radius * i as f64 / (n - 1) as f64,
                        -radius + 2.0 * radius * j as f64 / (n - 1) as f64,
                    ];
                    if p[0] * p[0] + p[1] * p[1] <= radius * radius {
                        best = best.max(f(h, &p));
                    }
                }
            }
            let rim = 720;
            for k in 0..rim {
                let th = std::f64::consts::TAU * k as f64 / rim as f64;
                best = best.max(f(h, &[radius * th.cos(), radius * th.sin()]));
            }
        }
        _ => {
            let n = 33;
            let pts = Rect::new(vec![(-radius, radius); h.dim])?.lattice(n);
            for p in pts {
                if p.iter().map(|x| x * x).sum::<f64>() <= radius * radius {
                    best = best.max(f(h, &p));
                }
            }
        }
    }
    Ok(best)
}

/// Operator norm of a symmetric matrix.
pub(crate) fn sym_norm(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = sym_eig_range(m);
    lo.abs().max(hi.abs())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    match m.nrows() {
        1 => (m[(0, 0)], m[(0, 0)]),
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            (mid - rad, mid + rad)
        }
        _ => {
            let eig = m.clone().symmetric_eigen().eigenvalues;
            eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            })
        }
    }
}

fn require_dim(h: &IntegrableHamiltonian, d: usize) -> Result<()> {
    if h.dim != d {
        return Err(HjError::InvalidInput(format!(
            "operation needs a {d}-dimensional Hamiltonian, got dimension {}",
            h.dim
        )));
    }
    Ok(())
}
