//! Quintic Hermite blending between two C² jets.
//!
//! Given values, first, and second derivatives at the ends of an interval,
//! the unique degree-5 polynomial matching both jets glues a core function
//! to its tail C²-smoothly.  Because the blend is an explicit polynomial,
//! the extrema of its first and second derivatives over the interval are
//! found exactly (the third derivative is a quadratic), which lets callers
//! report honest Lipschitz and curvature bounds instead of sampled guesses.

/// Value, first, and second derivative at a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Jet2 {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

/// Degree-5 polynomial on `[x0, x1]` matching a [`Jet2`] at each end,
/// stored in the normalized variable s = (x - x0)/h.
#[derive(Debug, Clone)]
pub(crate) struct QuinticHermite {
    x0: f64,
    h: f64,
    c: [f64; 6],
}

impl QuinticHermite {
    pub fn from_jets(x0: f64, x1: f64, a: Jet2, b: Jet2) -> Self {
        let h = x1 - x0;
        assert!(h > 0.0, "blend interval must have positive width");
        // Scale derivatives into s-units, then collect the quintic Hermite
        // basis into monomial coefficients.
        let (d0, dd0) = (a.d * h, a.dd * h * h);
        let (d1, dd1) = (b.d * h, b.dd * h * h);
        let c = [
            a.v,
            d0,
            0.5 * dd0,
            -10.0 * a.v - 6.0 * d0 - 1.5 * dd0 + 10.0 * b.v - 4.0 * d1 + 0.5 * dd1,
            15.0 * a.v + 8.0 * d0 + 1.5 * dd0 - 15.0 * b.v + 7.0 * d1 - dd1,
            -6.0 * a.v - 3.0 * d0 - 0.5 * dd0 + 6.0 * b.v - 3.0 * d1 + 0.5 * dd1,
        ];
        Self { x0, h, c }
    }

    fn s(&self, x: f64) -> f64 {
        (x - self.x0) / self.h
    }

    pub fn value(&self, x: f64) -> f64 {
        let s = self.s(x);
        let c = &self.c;
        ((((c[5] * s + c[4]) * s + c[3]) * s + c[2]) * s + c[1]) * s + c[0]
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let s = self.s(x);
        let c = &self.c;
        ((((5.0 * c[5] * s + 4.0 * c[4]) * s + 3.0 * c[3]) * s + 2.0 * c[2]) * s + c[1]) / self.h
    }

    pub fn second(&self, x: f64) -> f64 {
        let s = self.s(x);
        let c = &self.c;
        (((20.0 * c[5] * s + 12.0 * c[4]) * s + 6.0 * c[3]) * s + 2.0 * c[2]) / (self.h * self.h)
    }

    /// Exact range of the second derivative over the blend interval.  The
    /// third derivative is quadratic in s, so interior critical points come
    /// from the quadratic formula.
    pub fn second_range(&self) -> (f64, f64) {
        let c = &self.c;
        let mut candidates = vec![0.0, 1.0];
        // roots of 60 c5 s^2 + 24 c4 s + 6 c3 = 0
        let (qa, qb, qc) = (60.0 * c[5], 24.0 * c[4], 6.0 * c[3]);
        if qa.abs() > 0.0 {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let r = disc.sqrt();
                for s in [(-qb - r) / (2.0 * qa), (-qb + r) / (2.0 * qa)] {
                    if (0.0..=1.0).contains(&s) {
                        candidates.push(s);
                    }
                }
            }
        } else if qb.abs() > 0.0 {
            let s = -qc / qb;
            if (0.0..=1.0).contains(&s) {
                candidates.push(s);
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in candidates {
            let v = self.second(self.x0 + s * self.h);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Range of the first derivative over the blend interval.  Critical
    /// points are roots of the cubic second derivative, located by a sign
    /// scan plus bisection.
    pub fn deriv_range(&self) -> (f64, f64) {
        let mut candidates = vec![self.x0, self.x0 + self.h];
        let n = 256;
        let mut prev_x = self.x0;
        let mut prev_v = self.second(prev_x);
        for i in 1..=n {
            let x = self.x0 + self.h * i as f64 / n as f64;
            let v = self.second(x);
            if prev_v == 0.0 {
                candidates.push(prev_x);
            } else if prev_v * v < 0.0 {
                let (mut a, mut b) = (prev_x, x);
                let (mut fa, _) = (prev_v, v);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let fm = self.second(m);
                    if fa * fm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                candidates.push(0.5 * (a + b));
            }
            prev_x = x;
            prev_v = v;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in candidates {
            let v = self.deriv(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matches_both_jets() {
        let a = Jet2 { v: 1.0, d: 2.0, dd: 2.0 };
        let b = Jet2 { v: 1.5, d: 1.0, dd: 0.0 };
        let q = QuinticHermite::from_jets(1.0, 1.25, a, b);
        assert!(close(q.value(1.0), 1.0, 1e-14));
        assert!(close(q.deriv(1.0), 2.0, 1e-12));
        assert!(close(q.second(1.0), 2.0, 1e-10));
        assert!(close(q.value(1.25), 1.5, 1e-14));
        assert!(close(q.deriv(1.25), 1.0, 1e-12));
        assert!(close(q.second(1.25), 0.0, 1e-10));
    }

    #[test]
    fn reproduces_a_quintic_exactly() {
        // f(x) = x^5 - x^3 + 2 has degree 5, so the blend must reproduce it.
        let f = |x: f64| x.powi(5) - x.powi(3) + 2.0;
        let fd = |x: f64| 5.0 * x.powi(4) - 3.0 * x * x;
        let fdd = |x: f64| 20.0 * x.powi(3) - 6.0 * x;
        let q = QuinticHermite::from_jets(
            -0.5,
            2.0,
            Jet2 { v: f(-0.5), d: fd(-0.5), dd: fdd(-0.5) },
            Jet2 { v: f(2.0), d: fd(2.0), dd: fdd(2.0) },
        );
        for i in 0..=20 {
            let x = -0.5 + 2.5 * i as f64 / 20.0;
            assert!(close(q.value(x), f(x), 1e-9 * (1.0 + f(x).abs())));
            assert!(close(q.deriv(x), fd(x), 1e-8 * (1.0 + fd(x).abs())));
            assert!(close(q.second(x), fdd(x), 1e-7 * (1.0 + fdd(x).abs())));
        }
    }

    #[test]
    fn second_range_brackets_samples() {
        let a = Jet2 { v: -3.0, d: -7.0, dd: -10.0 };
        let b = Jet2 { v: -10.0, d: -7.0, dd: 0.0 };
        let q = QuinticHermite::from_jets(2.0, 3.0, a, b);
        let (lo, hi) = q.second_range();
        for i in 0..=1000 {
            let x = 2.0 + i as f64 / 1000.0;
            let s = q.second(x);
            assert!(s >= lo - 1e-10 && s <= hi + 1e-10);
        }
        assert!(lo <= -10.0 + 1e-10 && hi >= 0.0 - 1e-10);
    }

    #[test]
    fn deriv_range_brackets_samples() {
        let a = Jet2 { v: 1.0, d: 2.0, dd: 2.0 };
        let b = Jet2 { v: 0.0, d: 0.0, dd: 0.0 };
        let q = QuinticHermite::from_jets(1.0, 1.25, a, b);
        let (lo, hi) = q.deriv_range();
        for i in 0..=1000 {
            let x = 1.0 + 0.25 * i as f64 / 1000.0;
            let d = q.deriv(x);
            assert!(d >= lo - 1e-10 && d <= hi + 1e-10);
        }
    }
}
