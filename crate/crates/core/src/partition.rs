//! q-determinants and q-partition functions in factored form, their exact or
//! certified series expansions, and L-function evaluation.

use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;
use serde::Serialize;

use crate::group_algebra::{GAElement, LatticeTag, Truncation};
use crate::lattice::{self, dot, IVec};
use crate::root_datum::RootDatumTheta;
use crate::scalar::{CycloLaurent, CycloRational};
use crate::{Error, Result};

/// (1 - zeta q^b e^weight)^mult with zeta = exp(2 pi i zeta_frac).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Factor {
    pub weight: IVec,
    pub q_pow: i64,
    #[serde(serialize_with = "ser_ratio")]
    pub zeta: Rational64,
    pub mult: i64,
}

fn ser_ratio<S: serde::Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

impl Factor {
    pub fn new(zeta: Rational64, q_pow: i64, weight: IVec, mult: i64) -> Self {
        Factor {
            weight,
            q_pow,
            zeta: lattice::frac(zeta),
            mult,
        }
    }

    pub fn zeta_value(&self) -> CycloRational {
        CycloRational::exp_2pi_i(self.zeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Determinant,
    Partition,
}

/// How q is specialized when expanding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QSpec {
    Q,
    One,
    InvQ,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactoredPartition {
    pub rank: usize,
    pub factors: Vec<Factor>,
    pub orientation: Orientation,
}

impl FactoredPartition {
    pub fn new(rank: usize, factors: Vec<Factor>, orientation: Orientation) -> Self {
        let mut p = FactoredPartition {
            rank,
            factors,
            orientation,
        };
        p.canonicalize();
        p
    }

    pub fn one(rank: usize, orientation: Orientation) -> Self {
        Self::new(rank, vec![], orientation)
    }

    /// Merge repeated factors and sort; the factored multiset becomes comparable.
    pub fn canonicalize(&mut self) {
        let mut fs = std::mem::take(&mut self.factors);
        fs.sort_by(|a, b| (&a.weight, a.q_pow, a.zeta).cmp(&(&b.weight, b.q_pow, b.zeta)));
        let mut out: Vec<Factor> = Vec::new();
        for f in fs {
            if let Some(last) = out.last_mut() {
                if last.weight == f.weight && last.q_pow == f.q_pow && last.zeta == f.zeta {
                    last.mult += f.mult;
                    continue;
                }
            }
            out.push(f);
        }
        out.retain(|f| f.mult != 0);
        self.factors = out;
    }

    pub fn inverse(&self) -> Self {
        let orientation = match self.orientation {
            Orientation::Determinant => Orientation::Partition,
            Orientation::Partition => Orientation::Determinant,
        };
        FactoredPartition {
            rank: self.rank,
            factors: self.factors.clone(),
            orientation,
        }
    }

    /// Product of two factored expressions of the same orientation.
    pub fn times(&self, other: &Self) -> Self {
        assert_eq!(self.orientation, other.orientation);
        let mut fs = self.factors.clone();
        fs.extend(other.factors.iter().cloned());
        Self::new(self.rank, fs, self.orientation)
    }

    /// Exponent of each factor in the represented expression.
    fn signed_mult(&self, f: &Factor) -> i64 {
        match self.orientation {
            Orientation::Determinant => f.mult,
            Orientation::Partition => -f.mult,
        }
    }

    fn factor_coeff(f: &Factor, qs: QSpec) -> CycloLaurent {
        let e = match qs {
            QSpec::Q => f.q_pow,
            QSpec::One => 0,
            QSpec::InvQ => -f.q_pow,
        };
        CycloLaurent::monomial(f.zeta_value(), 2 * e)
    }

    /// Map every weight through a lattice map (e.g. a pullback).
    pub fn map_weights(&self, rank: usize, m: impl Fn(&IVec) -> IVec) -> Self {
        let fs = self
            .factors
            .iter()
            .map(|f| Factor {
                weight: m(&f.weight),
                ..f.clone()
            })
            .collect();
        Self::new(rank, fs, self.orientation)
    }

    /// Exact expansion; every factor must appear with a nonnegative exponent.
    pub fn expand_exact(&self, tag: LatticeTag, qs: QSpec) -> Result<GAElement> {
        let mut out = GAElement::one(tag, self.rank);
        for f in &self.factors {
            let k = self.signed_mult(f);
            if k < 0 {
                return Err(Error::Precondition(
                    "an inverse factor has no finite expansion".into(),
                ));
            }
            let c = Self::factor_coeff(f, qs);
            let bin = GAElement::one(tag, self.rank).sub(&GAElement::monomial(tag, f.weight.clone(), c));
            for _ in 0..k {
                out = out.mul(&bin);
            }
        }
        Ok(out)
    }

    /// Certified expansion on the half-space where the grading is at least
    /// `-depth` (when the inverse factors point downward) or at most `depth`.
    pub fn expand_series(
        &self,
        tag: LatticeTag,
        qs: QSpec,
        grading: &IVec,
        depth: i64,
    ) -> Result<GAElement> {
        let mut dir = 0i64;
        for f in &self.factors {
            if self.signed_mult(f) < 0 {
                let h = dot(&f.weight, grading).signum();
                if h == 0 || (dir != 0 && h != dir) {
                    return Err(Error::Precondition(
                        "inverse factors do not lie in a pointed cone".into(),
                    ));
                }
                dir = h;
            }
        }
        let trunc = match dir {
            0 => None,
            -1 => Some(Truncation {
                grading: grading.clone(),
                lower: Some(-depth),
                upper: None,
            }),
            _ => Some(Truncation {
                grading: grading.clone(),
                lower: None,
                upper: Some(depth),
            }),
        };
        let mut out = GAElement::one(tag, self.rank).with_truncation(trunc.clone());
        for f in &self.factors {
            let k = self.signed_mult(f);
            let c = Self::factor_coeff(f, qs);
            if k >= 0 {
                let bin = GAElement::one(tag, self.rank)
                    .sub(&GAElement::monomial(tag, f.weight.clone(), c));
                for _ in 0..k {
                    out = out.mul(&bin);
                }
            } else {
                // geometric series of (1 - c e^mu)^{-1}, truncated at the region
                let h = dot(&f.weight, grading).abs();
                let n = depth / h;
                let mut terms = Vec::new();
                let mut ck = CycloLaurent::one();
                let mut mu = vec![0; self.rank];
                for _ in 0..=n {
                    terms.push((mu.clone(), ck.clone()));
                    ck = &ck * &c;
                    mu = lattice::add(&mu, &f.weight);
                }
                let geo = GAElement::from_terms(tag, self.rank, terms).with_truncation(trunc.clone());
                for _ in 0..(-k) {
                    out = out.mul(&geo);
                }
            }
        }
        Ok(out)
    }

    /// Evaluate every e^mu at a torus element given as a rational cocharacter.
    pub fn at_torus(&self, t: &[Rational64]) -> Vec<(CycloRational, i64, i64)> {
        self.factors
            .iter()
            .map(|f| {
                let z = lattice::frac(f.zeta + lattice::dot_rat(&f.weight, t));
                (CycloRational::exp_2pi_i(z), f.q_pow, self.signed_mult(f))
            })
            .collect()
    }
}

impl fmt::Display for FactoredPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| {
                let z = x.zeta_value();
                let zs = if z.is_one() {
                    String::new()
                } else {
                    format!("({z}) * ")
                };
                format!(
                    "(1 - {zs}q^{} e^{:?})^{}",
                    x.q_pow,
                    x.weight,
                    self.signed_mult(x)
                )
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Which roots make up the block: the positive roots or their negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// det(1 - q theta E) on the root spaces of a theta-stable set of root
/// indices, one factor per theta-orbit.
pub fn adjoint_determinant(d: &RootDatumTheta, roots: &[usize]) -> Result<FactoredPartition> {
    let set: std::collections::BTreeSet<usize> = roots.iter().copied().collect();
    for &r in &set {
        if !set.contains(&d.theta_perm[r]) {
            return Err(Error::Precondition("root set is not theta-stable".into()));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut factors = Vec::new();
    for &r in &set {
        if !seen.insert(r) {
            continue;
        }
        let mut orbit = vec![r];
        let mut j = d.theta_perm[r];
        while j != r {
            seen.insert(j);
            orbit.push(j);
            j = d.theta_perm[j];
        }
        let pos = if d.is_positive(r) { r } else { d.neg_index(r) };
        let sign = d.orbits[d.orbit_of[pos]].sign;
        let zeta = if sign == 1 {
            Rational64::zero()
        } else {
            Rational64::new(1, 2)
        };
        let weight = orbit.iter().fold(vec![0; d.rank], |acc, &k| lattice::add(&acc, &d.roots[k]));
        factors.push(Factor::new(zeta, orbit.len() as i64, weight, 1));
    }
    Ok(FactoredPartition::new(d.rank, factors, Orientation::Determinant))
}

pub fn side_roots(d: &RootDatumTheta, side: Side) -> Vec<usize> {
    match side {
        Side::Positive => (0..d.n_pos).collect(),
        Side::Negative => (d.n_pos..2 * d.n_pos).collect(),
    }
}

/// D(E, q) (positive side) or D(E^{-1}, q) (negative side) on the nilradical.
pub fn nilradical_determinant(d: &RootDatumTheta, side: Side) -> FactoredPartition {
    adjoint_determinant(d, &side_roots(d, side)).expect("positive roots are theta-stable")
}

/// Product of the d_alpha(q) over the positive restricted roots.
pub fn restricted_determinant(d: &RootDatumTheta) -> FactoredPartition {
    let mut fs = Vec::new();
    for r in &d.restricted {
        match r.diagram {
            crate::root_datum::Diagram::A1 => {
                fs.push(Factor::new(Rational64::zero(), r.b as i64, r.vector.clone(), 1))
            }
            crate::root_datum::Diagram::A2 => {
                let half: IVec = r.vector.iter().map(|x| x / 2).collect();
                fs.push(Factor::new(Rational64::zero(), 2 * r.b as i64, half.clone(), 1));
                fs.push(Factor::new(Rational64::new(1, 2), r.b as i64, half, 1));
            }
        }
    }
    FactoredPartition::new(d.rank, fs, Orientation::Determinant)
}

/// The finite expansion D(E^{-1}, q^{-1}) = sum over C of p_mu(q^{-1}) e^mu.
pub fn expansion_set_c(d: &RootDatumTheta) -> GAElement {
    nilradical_determinant(d, Side::Negative)
        .expand_exact(LatticeTag::Y, QSpec::InvQ)
        .expect("determinants expand exactly")
}

/// An L-value as a rational function in x = q^{-s}: numerator / denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LValue {
    pub numerator: CycloLaurent,
    pub denominator: CycloLaurent,
}

impl fmt::Display for LValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |c: &CycloLaurent| c.to_string().replace('q', "x");
        write!(f, "({}) / ({})", show(&self.numerator), show(&self.denominator))
    }
}

impl LValue {
    pub fn evaluate(&self, x: f64) -> num_complex::Complex64 {
        // x is stored as the formal q
        self.numerator.evaluate(x) / self.denominator.evaluate(x)
    }
}

/// Substitute a finite-order parameter and q -> q^{-s}: returns the rational
/// function of x = q^{-s}.
pub fn l_function(p: &FactoredPartition, t: &[Rational64]) -> Result<LValue> {
    let mut num = CycloLaurent::one();
    let mut den = CycloLaurent::one();
    for (z, b, k) in p.at_torus(t) {
        if b == 0 && z.is_one() && k < 0 {
            return Err(Error::Arithmetic("L-function denominator vanishes identically".into()));
        }
        let factor = &CycloLaurent::one() - &CycloLaurent::monomial(z, 2 * b);
        let target = if k >= 0 { &mut num } else { &mut den };
        for _ in 0..k.abs() {
            *target = &*target * &factor;
        }
    }
    Ok(LValue {
        numerator: num,
        denominator: den,
    })
}

/// chi~_q * P(E^{-1}, q) = 1 on the certified region of height >= -depth.
pub fn q_graded_euler_check(d: &RootDatumTheta, depth: i64) -> Result<bool> {
    let det = nilradical_determinant(d, Side::Negative);
    let chi = det.expand_exact(LatticeTag::Y, QSpec::Q)?;
    let series = det
        .inverse()
        .expand_series(LatticeTag::Y, QSpec::Q, &d.rho2_check, depth)?;
    let prod = chi.mul(&series);
    let certified = prod
        .truncation
        .as_ref()
        .is_some_and(|t| t.lower.is_some_and(|l| l <= -depth));
    let exact_one = prod.terms().all(|(mu, c)| {
        if lattice::is_zero(mu) {
            c.is_one()
        } else {
            c.is_zero()
        }
    });
    Ok(certified && exact_one && prod.coeff(&vec![0; d.rank])?.is_one())
}

/// Evaluate e^mu at a rational cocharacter: exp(2 pi i <mu, t>).
pub fn character_at(mu: &[i64], t: &[Rational64]) -> CycloRational {
    CycloRational::exp_2pi_i(lattice::frac(lattice::dot_rat(mu, t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::root_datum::build_preset;

    fn e(mu: &[i64]) -> GAElement {
        GAElement::exp(LatticeTag::Y, mu.to_vec())
    }

    #[test]
    fn determinants() {
        let d = build_preset("A1").unwrap();
        let p = nilradical_determinant(&d, Side::Positive);
        assert_eq!(p.factors, vec![Factor::new(Rational64::zero(), 1, vec![2], 1)]);
        let empty = adjoint_determinant(&d, &[]).unwrap();
        assert!(empty.factors.is_empty());
        assert!(empty.expand_exact(LatticeTag::Y, QSpec::Q).unwrap() == e(&[0]));

        let t = build_preset("A2~2").unwrap();
        let p = nilradical_determinant(&t, Side::Positive);
        let want = FactoredPartition::new(
            2,
            vec![
                Factor::new(Rational64::zero(), 2, vec![1, 1], 1),
                Factor::new(Rational64::new(1, 2), 1, vec![1, 1], 1),
            ],
            Orientation::Determinant,
        );
        assert_eq!(p, want);
        assert_eq!(restricted_determinant(&t), want);
        assert!(adjoint_determinant(&t, &[0]).is_err());
    }

    #[test]
    fn geometric_series() {
        let d = build_preset("A1").unwrap();
        let p = nilradical_determinant(&d, Side::Positive).inverse();
        let s = p.expand_series(LatticeTag::Y, QSpec::Q, &d.rho2_check, 6).unwrap();
        for k in 0..=3 {
            assert_eq!(s.coeff(&[2 * k]).unwrap(), CycloLaurent::q_pow(k));
        }
        assert!(s.coeff(&[8]).is_err());
        let w = p.expand_series(LatticeTag::Y, QSpec::One, &d.rho2_check, 6).unwrap();
        assert!(w.coeff(&[4]).unwrap().is_one());
    }

    #[test]
    fn set_c() {
        let d = build_preset("A1").unwrap();
        let c = expansion_set_c(&d);
        assert_eq!(
            c,
            e(&[0]).sub(&GAElement::monomial(LatticeTag::Y, vec![-2], CycloLaurent::q_pow(-1)))
        );
        let t = build_preset("A2~2").unwrap();
        let c = expansion_set_c(&t);
        assert!(c.coeff(&[0, 0]).unwrap().is_one());
        assert_eq!(
            c.coeff(&[-1, -1]).unwrap(),
            CycloLaurent::from_q_coeffs(&[(-1, 1), (-2, -1)])
        );
        assert_eq!(c.coeff(&[-2, -2]).unwrap(), CycloLaurent::from_q_coeffs(&[(-3, -1)]));
    }

    #[test]
    fn l_functions() {
        let d = build_preset("A1").unwrap();
        let p = nilradical_determinant(&d, Side::Positive).inverse();
        let l = l_function(&p, &[Rational64::zero()]).unwrap();
        assert!(l.numerator.is_one());
        assert_eq!(l.denominator, CycloLaurent::from_q_coeffs(&[(0, 1), (1, -1)]));
        // alpha = 2 omega, so t = 1/4 gives alpha(t) = -1
        let l = l_function(&p, &[Rational64::new(1, 4)]).unwrap();
        assert_eq!(l.denominator, CycloLaurent::from_q_coeffs(&[(0, 1), (1, 1)]));
        let empty = FactoredPartition::one(1, Orientation::Partition);
        assert!(l_function(&empty, &[Rational64::zero()]).unwrap().denominator.is_one());
        let bad = FactoredPartition::new(1, vec![Factor::new(Rational64::zero(), 0, vec![0], 1)], Orientation::Partition);
        assert!(l_function(&bad, &[Rational64::zero()]).is_err());
    }

    #[test]
    fn euler_checks() {
        assert!(q_graded_euler_check(&build_preset("A1").unwrap(), 10).unwrap());
        assert!(q_graded_euler_check(&build_preset("A2~2").unwrap(), 10).unwrap());
        assert!(q_graded_euler_check(&build_preset("G2").unwrap(), 8).unwrap());
    }

    #[test]
    fn weyl_denominator_duality() {
        for name in ["A1", "A2", "B2", "A2~2", "A3~2"] {
            let d = build_preset(name).unwrap();
            let j1 = crate::group_algebra::alt_symmetrize(&d, &e(&vec![0; d.rank]));
            let p = nilradical_determinant(&d, Side::Negative)
                .inverse()
                .expand_series(LatticeTag::Y, QSpec::One, &d.rho2_check, 12)
                .unwrap();
            let prod = j1.mul(&p);
            for (mu, c) in prod.terms() {
                assert_eq!(c.is_one(), lattice::is_zero(mu), "{name}");
            }
        }
    }

    #[test]
    fn weyl_invariance_of_symmetric_product() {
        for name in ["A1", "A2", "B2", "G2", "A2~2", "A3~2", "B3", "C3"] {
            let d = build_preset(name).unwrap();
            let both = restricted_full(&d);
            let g = d.weyl_theta();
            for w in 0..g.len() {
                let moved = both.map_weights(d.rank, |mu| g.apply(w, mu));
                assert_eq!(moved, both, "{name}");
            }
        }
    }

    fn restricted_full(d: &RootDatumTheta) -> FactoredPartition {
        nilradical_determinant(d, Side::Positive)
            .times(&nilradical_determinant(d, Side::Negative))
            .inverse()
    }
}
