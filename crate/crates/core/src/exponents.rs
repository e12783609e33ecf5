//! Algebra of admissible Strichartz exponent triples and dual pairs.
//!
//! A triple (p, q, s) in dimension n is admissible when
//!
//! ```text
//!   1/p + n/q  = n/2 - s          (scaling relation)
//!   2/p + (n-1)/q <= (n-1)/2      (Knapp inequality)
//! ```
//!
//! The relations are exact identities, so everything here runs on exact
//! rational arithmetic when the inputs are rational; a float path with a
//! 1e-12 tolerance exists for irrational inputs.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance used by the floating-point validation path.
pub const REAL_TOL: f64 = 1e-12;

/// Largest denominator enumerated by [`dual_for`].
pub const LATTICE_MAX_DEN: i64 = 12;

/// Reduced fraction with positive denominator. Arithmetic goes through
/// i128 intermediates, which is far more headroom than the small
/// denominators appearing in exponent algebra ever need.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Rational {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub const fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn zero() -> Self {
        Rational::integer(0)
    }

    pub fn one() -> Self {
        Rational::integer(1)
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn recip(&self) -> Self {
        assert!(self.num != 0, "reciprocal of zero");
        Rational::new(self.den, self.num)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn from_i128(num: i128, den: i128) -> Self {
        let reduced = {
            let mut a = num.unsigned_abs();
            let mut b = den.unsigned_abs();
            while b != 0 {
                let t = a % b;
                a = b;
                b = t;
            }
            a.max(1) as i128
        };
        let (num, den) = (num / reduced, den / reduced);
        assert!(
            num.abs() <= i64::MAX as i128 && den.abs() <= i64::MAX as i128,
            "rational overflow"
        );
        Rational::new(num as i64, den as i64)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational::from_i128(
            self.num as i128 * rhs.den as i128 + rhs.num as i128 * self.den as i128,
            self.den as i128 * rhs.den as i128,
        )
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        self + (-rhs)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational::from_i128(
            self.num as i128 * rhs.num as i128,
            self.den as i128 * rhs.den as i128,
        )
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        assert!(rhs.num != 0, "division by zero");
        Rational::from_i128(
            self.num as i128 * rhs.den as i128,
            self.den as i128 * rhs.num as i128,
        )
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational {
            num: -self.num,
            den: self.den,
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: i64 = a
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad rational `{s}`")))?;
            let den: i64 = b
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad rational `{s}`")))?;
            if den == 0 {
                return Err(Error::config(format!("zero denominator in `{s}`")));
            }
            Ok(Rational::new(num, den))
        } else {
            let num: i64 = s
                .parse()
                .map_err(|_| Error::config(format!("bad rational `{s}`")))?;
            Ok(Rational::integer(num))
        }
    }
}

/// Extended real in [1, inf]; infinity stands for a sup-norm index.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exponent {
    Finite(Rational),
    Infinity,
}

impl Exponent {
    /// 1/p, with 1/inf = 0.
    pub fn reciprocal(&self) -> Rational {
        match self {
            Exponent::Finite(r) => r.recip(),
            Exponent::Infinity => Rational::zero(),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn as_finite(&self) -> Option<Rational> {
        match self {
            Exponent::Finite(r) => Some(*r),
            Exponent::Infinity => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Finite(r) => r.to_f64(),
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(r) => write!(f, "{r}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(t.parse()?))
        }
    }
}

/// Which of the two defining relations a candidate triple broke.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Scaling,
    Knapp,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Scaling => write!(f, "scaling"),
            Relation::Knapp => write!(f, "knapp"),
        }
    }
}

/// Outcome of [`validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Admissible,
    Violation { relation: Relation, residual: Rational },
}

impl Verdict {
    pub fn is_admissible(&self) -> bool {
        matches!(self, Verdict::Admissible)
    }
}

/// Signed defect of the scaling relation: 1/p + n/q - (n/2 - s).
pub fn scaling_residual(p: Exponent, q: Rational, s: Rational, n: u32) -> Rational {
    let n = Rational::integer(n as i64);
    p.reciprocal() + n / q - (n / Rational::integer(2) - s)
}

/// Excess of the Knapp inequality: 2/p + (n-1)/q - (n-1)/2 (admissible when <= 0).
pub fn knapp_excess(p: Exponent, q: Rational, n: u32) -> Rational {
    let nm1 = Rational::integer(n as i64 - 1);
    Rational::integer(2) * p.reciprocal() + nm1 / q - nm1 / Rational::integer(2)
}

/// Exact admissibility check of the two relations. Total on p >= 1, q >= 1.
pub fn validate(p: Exponent, q: Rational, s: Rational, n: u32) -> Verdict {
    let res = scaling_residual(p, q, s, n);
    if !res.is_zero() {
        return Verdict::Violation {
            relation: Relation::Scaling,
            residual: res,
        };
    }
    let excess = knapp_excess(p, q, n);
    if excess > Rational::zero() {
        return Verdict::Violation {
            relation: Relation::Knapp,
            residual: excess,
        };
    }
    Verdict::Admissible
}

/// Float verdict for irrational inputs. `p` may be `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RealVerdict {
    Admissible,
    Violation { relation: Relation, residual: f64 },
}

pub fn validate_real(p: f64, q: f64, s: f64, n: u32, tol: f64) -> RealVerdict {
    let ip = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let nf = n as f64;
    let res = ip + nf / q - (nf / 2.0 - s);
    if res.abs() > tol {
        return RealVerdict::Violation {
            relation: Relation::Scaling,
            residual: res,
        };
    }
    let excess = 2.0 * ip + (nf - 1.0) / q - (nf - 1.0) / 2.0;
    if excess > tol {
        return RealVerdict::Violation {
            relation: Relation::Knapp,
            residual: excess,
        };
    }
    RealVerdict::Admissible
}

/// A validated admissible triple. `p` lives in [2, inf], `q` in [2, inf);
/// q = inf is rejected because the spatial norms need finite q.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdmissibleTriple {
    p: Exponent,
    q: Rational,
    s: Rational,
    n: u32,
}

impl AdmissibleTriple {
    pub fn new(p: Exponent, q: Rational, s: Rational, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("dimension n must be >= 1"));
        }
        if n == 1 {
            // Admissibility degenerates in one cross-section dimension: the
            // Knapp inequality forces 1/p <= 0, i.e. p = inf only.
            if !p.is_infinite() {
                return Err(Error::config(
                    "n = 1: only p = inf triples are admissible (degenerate Knapp line)",
                ));
            }
        }
        let two = Rational::integer(2);
        if let Exponent::Finite(pv) = p {
            if pv < two {
                return Err(Error::config(format!("p = {pv} out of range [2, inf]")));
            }
        }
        if q < two {
            return Err(Error::config(format!("q = {q} out of range [2, inf)")));
        }
        match validate(p, q, s, n) {
            Verdict::Admissible => Ok(AdmissibleTriple { p, q, s, n }),
            Verdict::Violation { relation, residual } => Err(Error::config(format!(
                "triple (p, q, s) = ({p}, {q}, {s}) violates the {relation} relation (residual {residual})"
            ))),
        }
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn q(&self) -> Rational {
        self.q
    }

    pub fn s(&self) -> Rational {
        self.s
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

/// Weight bookkeeping attached to a triple: the t-side weight exponent in
/// e^{p(s-1/2)|t|} dt, the equivalent x-side power in x^{p(1/2-s)-1} dx, and
/// the measure power n of dh/x^n = e^{n|t|} dh. For p = inf both weights
/// degenerate to a sup in time and are reported as None.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightLaw {
    pub t_weight: Option<Rational>,
    pub x_weight: Option<Rational>,
    pub measure_power: u32,
}

pub fn weight_exponents(triple: &AdmissibleTriple) -> WeightLaw {
    match triple.p {
        Exponent::Infinity => WeightLaw {
            t_weight: None,
            x_weight: None,
            measure_power: triple.n,
        },
        Exponent::Finite(p) => {
            let half = Rational::new(1, 2);
            let t_weight = p * (triple.s - half);
            let x_weight = p * (half - triple.s) - Rational::one();
            WeightLaw {
                t_weight: Some(t_weight),
                x_weight: Some(x_weight),
                measure_power: triple.n,
            }
        }
    }
}

/// Dual pair (p', q') for the inhomogeneous estimate, satisfying
/// 1/p' + n/q' - 2 = n/2 - s with p' in [1,2], q' in (1,2], and whose
/// conjugate pair is admissible (with the induced order s~ = 1 - s).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualPair {
    p_prime: Rational,
    q_prime: Rational,
    s: Rational,
    n: u32,
}

impl DualPair {
    pub fn new(p_prime: Rational, q_prime: Rational, s: Rational, n: u32) -> Result<Self> {
        let one = Rational::one();
        let two = Rational::integer(2);
        if p_prime < one || p_prime > two {
            return Err(Error::config(format!("p' = {p_prime} out of range [1, 2]")));
        }
        if q_prime <= one || q_prime > two {
            return Err(Error::config(format!("q' = {q_prime} out of range (1, 2]")));
        }
        let pair = DualPair {
            p_prime,
            q_prime,
            s,
            n,
        };
        let res = pair.defining_residual();
        if !res.is_zero() {
            return Err(Error::config(format!(
                "dual pair ({p_prime}, {q_prime}) violates its defining relation (residual {res})"
            )));
        }
        let (cp, cq) = pair.conjugates();
        if knapp_excess(cp, cq, n) > Rational::zero() {
            return Err(Error::config(format!(
                "conjugates of ({p_prime}, {q_prime}) are not admissible in dimension {n}"
            )));
        }
        Ok(pair)
    }

    /// 1/p' + n/q' - 2 - (n/2 - s); zero for a valid pair.
    pub fn defining_residual(&self) -> Rational {
        let n = Rational::integer(self.n as i64);
        self.p_prime.recip() + n / self.q_prime - Rational::integer(2)
            - (n / Rational::integer(2) - self.s)
    }

    /// Hölder conjugates (p~, q~) of (p', q'); p' = 1 conjugates to inf.
    pub fn conjugates(&self) -> (Exponent, Rational) {
        let one = Rational::one();
        let p = if self.p_prime == one {
            Exponent::Infinity
        } else {
            Exponent::Finite(self.p_prime / (self.p_prime - one))
        };
        let q = self.q_prime / (self.q_prime - one);
        (p, q)
    }

    /// Spatial order the conjugate triple carries: n/2 - 1/p~ - n/q~.
    /// The defining relation forces this to equal 1 - s.
    pub fn s_tilde(&self) -> Rational {
        let (cp, cq) = self.conjugates();
        let n = Rational::integer(self.n as i64);
        n / Rational::integer(2) - cp.reciprocal() - n / cq
    }

    pub fn p_prime(&self) -> Rational {
        self.p_prime
    }

    pub fn q_prime(&self) -> Rational {
        self.q_prime
    }

    pub fn s(&self) -> Rational {
        self.s
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// t-side weight exponent of the forcing norm, p'(s - 1/2).
    pub fn t_weight(&self) -> Rational {
        self.p_prime * (self.s - Rational::new(1, 2))
    }
}

/// Enumerates dual pairs on the rational lattice with denominators up to
/// [`LATTICE_MAX_DEN`]. Pairs are sorted by (p', q'); the list may be empty.
pub fn dual_for(s: Rational, n: u32) -> Vec<DualPair> {
    let mut candidates: Vec<Rational> = Vec::new();
    for den in 1..=LATTICE_MAX_DEN {
        for num in den..=2 * den {
            candidates.push(Rational::new(num, den));
        }
    }
    candidates.sort();
    candidates.dedup();

    let mut out = Vec::new();
    for &pp in &candidates {
        for &qp in &candidates {
            if qp == Rational::one() {
                continue;
            }
            if let Ok(pair) = DualPair::new(pp, qp, s, n) {
                out.push(pair);
            }
        }
    }
    out
}
