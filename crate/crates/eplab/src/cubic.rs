//! Monic cubic solver: discriminant classification and closed-form roots
//! with a Newton polish.
//!
//! The discriminant is evaluated in compensated (double-double) arithmetic:
//! near an eigenvalue coalescence the five terms cancel to ~13 digits, and
//! plain f64 evaluation would leave only noise exactly where the sign is
//! interrogated by the bisection.

use num_complex::Complex64;

/// Coefficients (c2, c1, c0) of λ³ + c2 λ² + c1 λ + c0.
pub type CubicCoeffs = (f64, f64, f64);

/// Root structure implied by the discriminant sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootClass {
    /// Δ > 0: three distinct real roots.
    ThreeReal,
    /// Δ < 0: one real root and a complex-conjugate pair.
    OneRealConjugatePair,
    /// Δ = 0: repeated root.
    Repeated,
}

// ---- double-double helpers -------------------------------------------------

/// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let err = a.mul_add(b, -p);
    Dd { hi: p, lo: err }
}

impl Dd {
    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, other: Dd) -> Dd {
        let s = two_sum(self.hi, other.hi);
        let lo = s.lo + self.lo + other.lo;
        let t = two_sum(s.hi, lo);
        Dd { hi: t.hi, lo: t.lo }
    }

    fn mul(self, other: Dd) -> Dd {
        let p = two_prod(self.hi, other.hi);
        let lo = p.lo + self.hi * other.lo + self.lo * other.hi;
        let t = two_sum(p.hi, lo);
        Dd { hi: t.hi, lo: t.lo }
    }

    fn scale(self, k: f64) -> Dd {
        self.mul(Dd::from(k))
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

// ----------------------------------------------------------------------------

/// Discriminant Δ = 18 c2 c1 c0 − 4 c2³ c0 + c2² c1² − 4 c1³ − 27 c0².
///
/// Δ > 0 ⇔ three distinct real roots; Δ < 0 ⇔ one real root and a
/// conjugate pair; Δ = 0 ⇔ repeated root.
pub fn cubic_discriminant(c: CubicCoeffs) -> f64 {
    let (c2, c1, c0) = (Dd::from(c.0), Dd::from(c.1), Dd::from(c.2));
    let t1 = c2.mul(c1).mul(c0).scale(18.0);
    let t2 = c2.mul(c2).mul(c2).mul(c0).scale(-4.0);
    let t3 = c2.mul(c2).mul(c1).mul(c1);
    let t4 = c1.mul(c1).mul(c1).scale(-4.0);
    let t5 = c0.mul(c0).scale(-27.0);
    t1.add(t2).add(t3).add(t4).add(t5).to_f64()
}

/// Classify the root structure, treating |Δ| below `zero_band` as repeated.
pub fn classify(c: CubicCoeffs, zero_band: f64) -> RootClass {
    let d = cubic_discriminant(c);
    if d.abs() <= zero_band {
        RootClass::Repeated
    } else if d > 0.0 {
        RootClass::ThreeReal
    } else {
        RootClass::OneRealConjugatePair
    }
}

/// All three roots of the monic cubic, each refined by one complex Newton
/// step. Order: the classification's real root(s) first is NOT guaranteed;
/// callers that need a convention sort downstream.
pub fn cubic_roots(c: CubicCoeffs) -> [Complex64; 3] {
    let (c2, c1, c0) = c;
    // depressed cubic t^3 + p t + q with lambda = t - c2/3
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = cubic_discriminant(c); // = -4p^3 - 27q^2

    let mut roots = if disc > 0.0 {
        // three real roots: trigonometric form (p < 0 is implied)
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let c0_ = m * theta.cos();
        let c1_ = m * (theta - 2.0 * std::f64::consts::PI / 3.0).cos();
        let c2_ = m * (theta - 4.0 * std::f64::consts::PI / 3.0).cos();
        [
            Complex64::new(c0_ - shift, 0.0),
            Complex64::new(c1_ - shift, 0.0),
            Complex64::new(c2_ - shift, 0.0),
        ]
    } else {
        // Cardano with the branch chosen to avoid cancellation
        let half_q = q / 2.0;
        let inner = half_q * half_q + p * p * p / 27.0; // = -disc/108
        if inner >= 0.0 {
            let sq = inner.sqrt();
            let u_cubed = if half_q >= 0.0 { -half_q - sq } else { -half_q + sq };
            let u = u_cubed.cbrt();
            let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
            let real = u + v;
            let re_pair = -real / 2.0;
            let im_pair = 3f64.sqrt() / 2.0 * (u - v);
            [
                Complex64::new(real - shift, 0.0),
                Complex64::new(re_pair - shift, im_pair),
                Complex64::new(re_pair - shift, -im_pair),
            ]
        } else {
            // disc "negative" by rounding only; fall back to the triple/double case
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = if p == 0.0 { 1.0 } else { (3.0 * q / (p * m)).clamp(-1.0, 1.0) };
            let theta = arg.acos() / 3.0;
            let r0 = m * theta.cos();
            let r1 = m * (theta - 2.0 * std::f64::consts::PI / 3.0).cos();
            let r2 = m * (theta - 4.0 * std::f64::consts::PI / 3.0).cos();
            [
                Complex64::new(r0 - shift, 0.0),
                Complex64::new(r1 - shift, 0.0),
                Complex64::new(r2 - shift, 0.0),
            ]
        }
    };

    // one Newton polish per root on the monic cubic
    let (b2, b1, b0) = (
        Complex64::new(c2, 0.0),
        Complex64::new(c1, 0.0),
        Complex64::new(c0, 0.0),
    );
    for r in roots.iter_mut() {
        let f = ((*r + b2) * *r + b1) * *r + b0;
        let df = (Complex64::new(3.0, 0.0) * *r + 2.0 * b2) * *r + b1;
        if df.norm() > 1e-300 {
            let step = f / df;
            if step.norm() < 0.5 * r.norm().max(1.0) {
                *r -= step;
            }
        }
    }
    roots
}
