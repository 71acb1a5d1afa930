//! Exact scalars: elements of a cyclotomic field Q(zeta_m) and Laurent
//! polynomials in q^{1/2} over them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Error;

struct Field {
    phi: usize,
    /// `powers[k]` is x^k reduced mod the m-th cyclotomic polynomial.
    powers: Vec<Vec<i64>>,
}

fn poly_divide_monic(num: &[i64], den: &[i64]) -> Vec<i64> {
    // coefficients lowest degree first; den monic; exact division assumed
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let mut quot = vec![0i64; rem.len() - dd];
    for k in (0..quot.len()).rev() {
        let c = rem[k + dd];
        quot[k] = c;
        for (j, d) in den.iter().enumerate() {
            rem[k + j] -= c * d;
        }
    }
    debug_assert!(rem.iter().all(|x| *x == 0));
    quot
}

fn cyclotomic_poly(m: u64) -> Vec<i64> {
    let mut p = vec![0i64; m as usize + 1];
    p[0] = -1;
    p[m as usize] = 1;
    for d in 1..m {
        if m % d == 0 {
            p = poly_divide_monic(&p, &cyclotomic_poly(d));
        }
    }
    p
}

fn field(m: u64) -> Arc<Field> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Field>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(f) = cache.lock().unwrap().get(&m) {
        return f.clone();
    }
    let phi_poly = cyclotomic_poly(m);
    let phi = phi_poly.len() - 1;
    let mut powers = Vec::with_capacity(m as usize);
    let mut cur = vec![0i64; phi];
    cur[0] = 1;
    for _ in 0..m {
        powers.push(cur.clone());
        // multiply by x and reduce
        let top = cur[phi - 1];
        let mut next = vec![0i64; phi];
        for i in (1..phi).rev() {
            next[i] = cur[i - 1];
        }
        for i in 0..phi {
            next[i] -= top * phi_poly[i];
        }
        cur = next;
    }
    if phi == 1 && m == 1 {
        powers = vec![vec![1]];
    }
    let f = Arc::new(Field { phi, powers });
    cache.lock().unwrap().insert(m, f.clone());
    f
}

/// An element of Q(zeta_m) in the power basis 1, z, ..., z^{phi(m)-1}.
#[derive(Clone, Debug)]
pub struct CycloRational {
    m: u64,
    coeffs: Vec<BigRational>,
}

impl CycloRational {
    pub fn zero() -> Self {
        Self::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        CycloRational {
            m: 1,
            coeffs: vec![r],
        }
    }

    pub fn from_ratio(r: Rational64) -> Self {
        Self::from_rational(BigRational::new((*r.numer()).into(), (*r.denom()).into()))
    }

    /// zeta_m^a.
    pub fn root_of_unity(m: u64, a: i64) -> Self {
        assert!(m > 0);
        let a = a.rem_euclid(m as i64) as u64;
        let g = a.gcd(&m);
        let (m, a) = (m / g, a / g);
        if m == 1 {
            return Self::one();
        }
        if m == 2 {
            return Self::from_int(-1);
        }
        if m % 4 == 2 {
            // zeta_m = -zeta_{m/2}^k with k = (m/2 + 1)/2
            let h = m / 2;
            let k = (h + 1) / 2;
            let base = Self::root_of_unity(h, ((k * a) % h) as i64);
            return if a % 2 == 1 { -base } else { base };
        }
        let f = field(m);
        let coeffs = f.powers[a as usize]
            .iter()
            .map(|c| BigRational::from_integer(BigInt::from(*c)))
            .collect();
        CycloRational { m, coeffs }.normalized()
    }

    /// exp(2 pi i r) for a rational r.
    pub fn exp_2pi_i(r: Rational64) -> Self {
        let d = *r.denom();
        Self::root_of_unity(d as u64, *r.numer())
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.m == 1 && self.coeffs[0].is_one()
    }

    /// The value as a rational number, if it lies in Q.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.m == 1 {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    fn normalized(mut self) -> Self {
        if self.m != 1 && self.coeffs.iter().skip(1).all(|c| c.is_zero()) {
            let c = self.coeffs.swap_remove(0);
            return Self::from_rational(c);
        }
        self
    }

    fn lift(&self, to: u64) -> Vec<BigRational> {
        if to == self.m {
            return self.coeffs.clone();
        }
        debug_assert_eq!(to % self.m, 0);
        let f = field(to);
        let step = to / self.m;
        let mut out = vec![BigRational::zero(); f.phi];
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let k = ((i as u64 * step) % to) as usize;
            for (o, p) in out.iter_mut().zip(&f.powers[k]) {
                if *p != 0 {
                    *o += c * BigRational::from_integer(BigInt::from(*p));
                }
            }
        }
        out
    }

    fn common(&self, other: &Self) -> (u64, Vec<BigRational>, Vec<BigRational>) {
        let l = self.m.lcm(&other.m);
        (l, self.lift(l), other.lift(l))
    }

    fn mul_in(m: u64, a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
        let f = field(m);
        let mut out = vec![BigRational::zero(); f.phi];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let xy = x * y;
                let k = (i + j) % m as usize;
                for (o, p) in out.iter_mut().zip(&f.powers[k]) {
                    if *p != 0 {
                        *o += &xy * BigRational::from_integer(BigInt::from(*p));
                    }
                }
            }
        }
        out
    }

    /// Multiplicative inverse; errors on zero.
    pub fn inv(&self) -> Result<Self, Error> {
        if self.is_zero() {
            return Err(Error::Arithmetic("division by zero".into()));
        }
        if self.m == 1 {
            return Ok(Self::from_rational(self.coeffs[0].recip()));
        }
        // solve (self * x) = 1 via the multiplication matrix
        let n = self.coeffs.len();
        let mut cols: Vec<Vec<BigRational>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![BigRational::zero(); n];
            e[j] = BigRational::one();
            cols.push(Self::mul_in(self.m, &self.coeffs, &e));
        }
        let mut a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                let mut r: Vec<BigRational> = cols.iter().map(|c| c[i].clone()).collect();
                r.push(if i == 0 {
                    BigRational::one()
                } else {
                    BigRational::zero()
                });
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .find(|&r| !a[r][c].is_zero())
                .ok_or_else(|| Error::Arithmetic("singular field element".into()))?;
            a.swap(c, p);
            let piv = a[c][c].clone();
            for x in a[c].iter_mut() {
                *x /= &piv;
            }
            for r in 0..n {
                if r != c && !a[r][c].is_zero() {
                    let f = a[r][c].clone();
                    let row = a[c].clone();
                    for (x, y) in a[r].iter_mut().zip(&row) {
                        *x -= &f * y;
                    }
                }
            }
        }
        let coeffs = a.into_iter().map(|mut r| r.pop().unwrap()).collect();
        Ok(CycloRational { m: self.m, coeffs }.normalized())
    }

    pub fn div(&self, other: &Self) -> Result<Self, Error> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..k {
            r = &r * self;
        }
        r
    }

    /// Complex conjugation (zeta -> zeta^{-1}).
    pub fn conj(&self) -> Self {
        if self.m == 1 {
            return self.clone();
        }
        let f = field(self.m);
        let mut out = vec![BigRational::zero(); f.phi];
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let k = ((self.m as usize) - i) % self.m as usize;
            for (o, p) in out.iter_mut().zip(&f.powers[k]) {
                if *p != 0 {
                    *o += c * BigRational::from_integer(BigInt::from(*p));
                }
            }
        }
        CycloRational {
            m: self.m,
            coeffs: out,
        }
        .normalized()
    }

    /// Value under the embedding zeta_m -> exp(2 pi i / m).
    pub fn to_complex(&self) -> Complex64 {
        let mut z = Complex64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let ang = 2.0 * std::f64::consts::PI * i as f64 / self.m as f64;
            z += Complex64::from_polar(c.to_f64().unwrap_or(f64::NAN), ang);
        }
        z
    }

    /// The same value written over the smallest cyclotomic field containing it.
    pub fn reduced(&self) -> CycloRational {
        if self.m == 1 {
            return self.clone();
        }
        let mut divisors: Vec<u64> = (2..self.m)
            .filter(|d| self.m % d == 0 && d % 4 != 2)
            .collect();
        divisors.sort_unstable();
        let big = field(self.m);
        for d in divisors {
            let small = field(d);
            let step = (self.m / d) as usize;
            let cols: Vec<Vec<BigRational>> = (0..small.phi)
                .map(|i| {
                    big.powers[(i * step) % self.m as usize]
                        .iter()
                        .map(|p| BigRational::from_integer(BigInt::from(*p)))
                        .collect()
                })
                .collect();
            if let Some(x) = solve_big(&cols, &self.coeffs) {
                return CycloRational { m: d, coeffs: x };
            }
        }
        self.clone()
    }

    fn fmt_terms(&self) -> Vec<String> {
        let r = self.reduced();
        let mut out = Vec::new();
        for (i, c) in r.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if i == 0 {
                out.push(c.to_string());
            } else {
                out.push(format!("{} * z{}^{}", c, r.m, i));
            }
        }
        out
    }
}

impl PartialEq for CycloRational {
    fn eq(&self, other: &Self) -> bool {
        if self.m == other.m {
            return self.coeffs == other.coeffs;
        }
        let (_, a, b) = self.common(other);
        a == b
    }
}

impl Eq for CycloRational {}

impl<'a> Add<&'a CycloRational> for &'a CycloRational {
    type Output = CycloRational;
    fn add(self, rhs: &CycloRational) -> CycloRational {
        if self.m == rhs.m {
            let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect();
            return CycloRational { m: self.m, coeffs }.normalized();
        }
        let (m, a, b) = self.common(rhs);
        let coeffs = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        CycloRational { m, coeffs }.normalized()
    }
}

impl<'a> Sub<&'a CycloRational> for &'a CycloRational {
    type Output = CycloRational;
    fn sub(self, rhs: &CycloRational) -> CycloRational {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a CycloRational> for &'a CycloRational {
    type Output = CycloRational;
    fn mul(self, rhs: &CycloRational) -> CycloRational {
        if self.m == 1 && rhs.m == 1 {
            return CycloRational::from_rational(&self.coeffs[0] * &rhs.coeffs[0]);
        }
        if self.m == 1 || rhs.m == 1 {
            let (s, v) = if self.m == 1 { (self, rhs) } else { (rhs, self) };
            let k = &s.coeffs[0];
            let coeffs = v.coeffs.iter().map(|c| c * k).collect();
            return CycloRational { m: v.m, coeffs }.normalized();
        }
        let (m, a, b) = self.common(rhs);
        CycloRational {
            m,
            coeffs: CycloRational::mul_in(m, &a, &b),
        }
        .normalized()
    }
}

impl Neg for &CycloRational {
    type Output = CycloRational;
    fn neg(self) -> CycloRational {
        CycloRational {
            m: self.m,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for CycloRational {
    type Output = CycloRational;
    fn neg(self) -> CycloRational {
        -&self
    }
}

impl fmt::Display for CycloRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.fmt_terms();
        if t.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", t.join(" + "))
        }
    }
}

/// Laurent polynomial in q^{1/2}; keys are doubled exponents of q.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CycloLaurent {
    terms: BTreeMap<i64, CycloRational>,
}

impl CycloLaurent {
    pub fn zero() -> Self {
        CycloLaurent::default()
    }

    pub fn one() -> Self {
        Self::constant(CycloRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Self::constant(CycloRational::from_int(n))
    }

    pub fn constant(c: CycloRational) -> Self {
        Self::monomial(c, 0)
    }

    /// c * q^{e2/2}.
    pub fn monomial(c: CycloRational, e2: i64) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e2, c);
        }
        CycloLaurent { terms }
    }

    /// q^{e2/2}.
    pub fn q_half_pow(e2: i64) -> Self {
        Self::monomial(CycloRational::one(), e2)
    }

    pub fn q_pow(e: i64) -> Self {
        Self::q_half_pow(2 * e)
    }

    /// Build from integer coefficients of q^0, q^1, ... (integral powers only).
    pub fn from_q_coeffs(cs: &[(i64, i64)]) -> Self {
        let mut out = Self::zero();
        for (e, c) in cs {
            out.add_term(2 * e, &CycloRational::from_int(*c));
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &CycloRational)> {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms.get(&0).is_some_and(|c| c.is_one())
    }

    pub fn coeff(&self, e2: i64) -> CycloRational {
        self.terms.get(&e2).cloned().unwrap_or_else(CycloRational::zero)
    }

    pub fn max_exp2(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    pub fn min_exp2(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn add_term(&mut self, e2: i64, c: &CycloRational) {
        if c.is_zero() {
            return;
        }
        let v = match self.terms.get(&e2) {
            Some(old) => old + c,
            None => c.clone(),
        };
        if v.is_zero() {
            self.terms.remove(&e2);
        } else {
            self.terms.insert(e2, v);
        }
    }

    pub fn add_assign_ref(&mut self, other: &CycloLaurent) {
        for (e, c) in &other.terms {
            self.add_term(*e, c);
        }
    }

    pub fn scale(&self, c: &CycloRational) -> CycloLaurent {
        if c.is_zero() {
            return Self::zero();
        }
        CycloLaurent {
            terms: self.terms.iter().map(|(e, x)| (*e, x * c)).collect(),
        }
    }

    /// Multiply by q^{e2/2}.
    pub fn shift(&self, e2: i64) -> CycloLaurent {
        CycloLaurent {
            terms: self.terms.iter().map(|(e, x)| (e + e2, x.clone())).collect(),
        }
    }

    /// Substitute q -> q^{-1}.
    pub fn invert_q(&self) -> CycloLaurent {
        CycloLaurent {
            terms: self.terms.iter().map(|(e, x)| (-e, x.clone())).collect(),
        }
    }

    /// Complex conjugation of coefficients, q unchanged.
    pub fn conj(&self) -> CycloLaurent {
        CycloLaurent {
            terms: self.terms.iter().map(|(e, x)| (*e, x.conj())).collect(),
        }
    }

    /// Exact quotient; errors if `other` does not divide `self`.
    pub fn div_exact(&self, other: &CycloLaurent) -> Result<CycloLaurent, Error> {
        let (Some(bh), Some(bl)) = (other.max_exp2(), other.min_exp2()) else {
            return Err(Error::Arithmetic("division by zero".into()));
        };
        if self.is_zero() {
            return Ok(Self::zero());
        }
        let lead_inv = other.terms[&bh].inv()?;
        let floor = self.min_exp2().unwrap() - bl;
        let mut rem = self.clone();
        let mut quot = Self::zero();
        while let Some(top) = rem.max_exp2() {
            let e = top - bh;
            if e < floor {
                return Err(Error::Arithmetic(format!(
                    "inexact division of {self} by {other}"
                )));
            }
            let c = &rem.terms[&top] * &lead_inv;
            let t = Self::monomial(c, e);
            rem = &rem - &(&t * other);
            quot.add_assign_ref(&t);
        }
        Ok(quot)
    }

    /// Numeric value at a real q > 0.
    pub fn evaluate(&self, q: f64) -> Complex64 {
        let s = q.sqrt();
        self.terms
            .iter()
            .map(|(e, c)| c.to_complex() * s.powi(*e as i32))
            .sum()
    }

    /// Exact value at a rational q when all coefficients are rational and
    /// either every exponent is integral or q is a rational square.
    pub fn evaluate_exact(&self, q: &BigRational) -> Option<BigRational> {
        let root = rational_sqrt(q);
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let c = c.as_rational()?;
            let base = if e % 2 == 0 {
                pow_rat(q, e / 2)
            } else {
                pow_rat(root.as_ref()?, *e)
            };
            acc += c * base;
        }
        Some(acc)
    }

    /// Replace every coefficient by its value at q = 1.
    pub fn at_q_one(&self) -> CycloRational {
        let mut acc = CycloRational::zero();
        for c in self.terms.values() {
            acc = &acc + c;
        }
        acc
    }

    pub fn to_complex_at(&self, q: f64) -> Complex64 {
        self.evaluate(q)
    }
}

/// Solve `sum_j x_j cols[j] = target` exactly; `None` if inconsistent.
fn solve_big(cols: &[Vec<BigRational>], target: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = cols.len();
    let rows = target.len();
    let mut a: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| {
            let mut r: Vec<BigRational> = cols.iter().map(|c| c[i].clone()).collect();
            r.push(target[i].clone());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut pr = 0;
    for c in 0..n {
        let Some(p) = (pr..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(pr, p);
        let piv = a[pr][c].clone();
        for x in a[pr].iter_mut() {
            *x /= &piv;
        }
        for r in 0..rows {
            if r != pr && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                let row = a[pr].clone();
                for (x, y) in a[r].iter_mut().zip(&row) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        pr += 1;
    }
    if a[pr..].iter().any(|r| !r[n].is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = a[i][n].clone();
    }
    Some(x)
}

fn pow_rat(q: &BigRational, e: i64) -> BigRational {
    if e >= 0 {
        num_traits::pow(q.clone(), e as usize)
    } else {
        num_traits::pow(q.recip(), (-e) as usize)
    }
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

impl<'a> Add<&'a CycloLaurent> for &'a CycloLaurent {
    type Output = CycloLaurent;
    fn add(self, rhs: &CycloLaurent) -> CycloLaurent {
        let mut out = self.clone();
        out.add_assign_ref(rhs);
        out
    }
}

impl<'a> Sub<&'a CycloLaurent> for &'a CycloLaurent {
    type Output = CycloLaurent;
    fn sub(self, rhs: &CycloLaurent) -> CycloLaurent {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, &-c);
        }
        out
    }
}

impl<'a> Mul<&'a CycloLaurent> for &'a CycloLaurent {
    type Output = CycloLaurent;
    fn mul(self, rhs: &CycloLaurent) -> CycloLaurent {
        let mut out = CycloLaurent::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                out.add_term(e1 + e2, &(c1 * c2));
            }
        }
        out
    }
}

impl Neg for &CycloLaurent {
    type Output = CycloLaurent;
    fn neg(self) -> CycloLaurent {
        CycloLaurent {
            terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect(),
        }
    }
}

impl Add for CycloLaurent {
    type Output = CycloLaurent;
    fn add(self, rhs: CycloLaurent) -> CycloLaurent {
        &self + &rhs
    }
}

impl Sub for CycloLaurent {
    type Output = CycloLaurent;
    fn sub(self, rhs: CycloLaurent) -> CycloLaurent {
        &self - &rhs
    }
}

impl Mul for CycloLaurent {
    type Output = CycloLaurent;
    fn mul(self, rhs: CycloLaurent) -> CycloLaurent {
        &self * &rhs
    }
}

impl Neg for CycloLaurent {
    type Output = CycloLaurent;
    fn neg(self) -> CycloLaurent {
        -&self
    }
}

fn fmt_q(e2: i64) -> Option<String> {
    match e2 {
        0 => None,
        2 => Some("q".into()),
        e if e % 2 == 0 => Some(format!("q^{}", e / 2)),
        e => Some(format!("q^({e}/2)")),
    }
}

impl fmt::Display for CycloLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for (e, c) in self.terms.iter().rev() {
            for t in c.fmt_terms() {
                match fmt_q(*e) {
                    Some(qs) => parts.push(format!("{t} * {qs}")),
                    None => parts.push(t),
                }
            }
        }
        write!(f, "{}", parts.join(" + "))
    }
}

impl FromStr for CycloLaurent {
    type Err = Error;

    /// Parses the textual form produced by `Display`; a bare `q^k` term has
    /// coefficient 1.
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Parse(format!("bad scalar: {s}"));
        let s = s.trim();
        let mut out = CycloLaurent::zero();
        if s == "0" {
            return Ok(out);
        }
        for term in s.split(" + ") {
            let mut c: Option<BigRational> = None;
            let mut z = CycloRational::one();
            let mut e2 = 0i64;
            for factor in term.split(" * ") {
                let factor = factor.trim();
                if let Some(rest) = factor.strip_prefix('z') {
                    let (m, a) = rest.split_once('^').ok_or_else(bad)?;
                    let m: u64 = m.parse().map_err(|_| bad())?;
                    let a: i64 = a.parse().map_err(|_| bad())?;
                    z = CycloRational::root_of_unity(m, a);
                } else if factor == "q" {
                    e2 = 2;
                } else if let Some(rest) = factor.strip_prefix("q^") {
                    if let Some(inner) = rest.strip_prefix('(') {
                        let num = inner.strip_suffix("/2)").ok_or_else(bad)?;
                        e2 = num.parse().map_err(|_| bad())?;
                    } else {
                        e2 = 2 * rest.parse::<i64>().map_err(|_| bad())?;
                    }
                } else {
                    c = Some(factor.parse().map_err(|_| bad())?);
                }
            }
            let c = CycloRational::from_rational(c.unwrap_or_else(|| BigRational::from_integer(1.into())));
            out.add_term(e2, &(&c * &z));
        }
        Ok(out)
    }
}
