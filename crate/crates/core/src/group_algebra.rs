//! Finitely supported elements of a group algebra C[L] of a lattice, with
//! optional certified truncation for partial expansions of infinite series.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::lattice::{self, dot, IMat, IVec};
use crate::root_datum::{Chamber, RootDatumTheta};
use crate::scalar::{CycloLaurent, CycloRational};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LatticeTag {
    /// X*(S) = X*(T)^theta, stored in ambient X*(T) coordinates.
    Y,
    /// X*(T_1) for a twisted action, ambient coordinates.
    T1,
    /// X*(U), its own coordinates.
    U,
}

/// Coefficients are exact only for weights whose grading lies in
/// `[lower, upper]` (a missing bound means unbounded on that side).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    pub grading: IVec,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
}

impl Truncation {
    pub fn contains(&self, mu: &[i64]) -> bool {
        let h = dot(mu, &self.grading);
        self.lower.map_or(true, |l| h >= l) && self.upper.map_or(true, |u| h <= u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GAElement {
    pub tag: LatticeTag,
    pub rank: usize,
    terms: BTreeMap<IVec, CycloLaurent>,
    pub truncation: Option<Truncation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermJson {
    pub weight: IVec,
    pub coeff: String,
}

fn opt_max(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) | (None, x) => x,
    }
}

fn opt_min(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) | (None, x) => x,
    }
}

impl GAElement {
    pub fn zero(tag: LatticeTag, rank: usize) -> Self {
        GAElement {
            tag,
            rank,
            terms: BTreeMap::new(),
            truncation: None,
        }
    }

    pub fn monomial(tag: LatticeTag, mu: IVec, c: CycloLaurent) -> Self {
        let mut g = Self::zero(tag, mu.len());
        g.add_term(&mu, &c);
        g
    }

    pub fn exp(tag: LatticeTag, mu: IVec) -> Self {
        Self::monomial(tag, mu, CycloLaurent::one())
    }

    pub fn one(tag: LatticeTag, rank: usize) -> Self {
        Self::exp(tag, vec![0; rank])
    }

    pub fn from_terms(tag: LatticeTag, rank: usize, terms: impl IntoIterator<Item = (IVec, CycloLaurent)>) -> Self {
        let mut g = Self::zero(tag, rank);
        for (mu, c) in terms {
            g.add_term(&mu, &c);
        }
        g
    }

    pub fn with_truncation(mut self, t: Option<Truncation>) -> Self {
        if let Some(tr) = &t {
            self.terms.retain(|mu, _| tr.contains(mu));
        }
        self.truncation = t;
        self
    }

    pub fn is_exact(&self) -> bool {
        self.truncation.is_none()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&IVec, &CycloLaurent)> {
        self.terms.iter()
    }

    pub fn support(&self) -> Vec<IVec> {
        self.terms.keys().cloned().collect()
    }

    pub fn add_term(&mut self, mu: &[i64], c: &CycloLaurent) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(mu) {
            Some(old) => {
                old.add_assign_ref(c);
                if old.is_zero() {
                    self.terms.remove(mu);
                }
            }
            None => {
                self.terms.insert(mu.to_vec(), c.clone());
            }
        }
    }

    /// (f, e^mu); errors outside the certified region.
    pub fn coeff(&self, mu: &[i64]) -> Result<CycloLaurent> {
        if let Some(t) = &self.truncation {
            if !t.contains(mu) {
                return Err(Error::OutsideRegion(mu.to_vec()));
            }
        }
        Ok(self.terms.get(mu).cloned().unwrap_or_default())
    }

    fn merge_truncation(a: &Option<Truncation>, b: &Option<Truncation>) -> Option<Truncation> {
        match (a, b) {
            (None, None) => None,
            (Some(t), None) | (None, Some(t)) => Some(t.clone()),
            (Some(s), Some(t)) => {
                assert_eq!(s.grading, t.grading, "incompatible truncation gradings");
                Some(Truncation {
                    grading: s.grading.clone(),
                    lower: opt_max(s.lower, t.lower),
                    upper: opt_min(s.upper, t.upper),
                })
            }
        }
    }

    pub fn add(&self, other: &GAElement) -> GAElement {
        let mut out = self.clone();
        for (mu, c) in &other.terms {
            out.add_term(mu, c);
        }
        out.truncation = Self::merge_truncation(&self.truncation, &other.truncation);
        out.with_truncation_retain()
    }

    pub fn sub(&self, other: &GAElement) -> GAElement {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> GAElement {
        GAElement {
            tag: self.tag,
            rank: self.rank,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
            truncation: self.truncation.clone(),
        }
    }

    fn with_truncation_retain(self) -> GAElement {
        let t = self.truncation.clone();
        self.with_truncation(t)
    }

    pub fn scale(&self, c: &CycloLaurent) -> GAElement {
        let mut out = Self::zero(self.tag, self.rank);
        for (mu, x) in &self.terms {
            out.add_term(mu, &(x * c));
        }
        out.truncation = self.truncation.clone();
        out
    }

    pub fn scale_cyclo(&self, c: &CycloRational) -> GAElement {
        self.scale(&CycloLaurent::constant(c.clone()))
    }

    fn grading_range(&self, g: &[i64]) -> (Option<i64>, Option<i64>) {
        let hs = self.terms.keys().map(|m| dot(m, g));
        let lo = hs.clone().min();
        let hi = hs.max();
        (lo, hi)
    }

    /// Product; truncations propagate to the region where every contribution
    /// is accounted for.
    pub fn mul(&self, other: &GAElement) -> GAElement {
        let grading = self
            .truncation
            .as_ref()
            .or(other.truncation.as_ref())
            .map(|t| t.grading.clone());
        let truncation = grading.map(|g| {
            let (lo_f, hi_f) = self.grading_range(&g);
            let (lo_g, hi_g) = other.grading_range(&g);
            let bound = |x: &GAElement| x.truncation.as_ref().map(|t| (t.lower, t.upper)).unwrap_or((None, None));
            let (lf, uf) = bound(self);
            let (lg, ug) = bound(other);
            let lower = opt_max(
                lf.map(|l| l + hi_g.unwrap_or(i64::MIN / 4)),
                lg.map(|l| l + hi_f.unwrap_or(i64::MIN / 4)),
            );
            let upper = opt_min(
                uf.map(|u| u + lo_g.unwrap_or(i64::MAX / 4)),
                ug.map(|u| u + lo_f.unwrap_or(i64::MAX / 4)),
            );
            Truncation {
                grading: g,
                lower,
                upper,
            }
        });
        let mut out = Self::zero(self.tag, self.rank);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let mu = lattice::add(a, b);
                if let Some(t) = &truncation {
                    if !t.contains(&mu) {
                        continue;
                    }
                }
                out.add_term(&mu, &(ca * cb));
            }
        }
        out.truncation = truncation;
        out
    }

    /// Apply a lattice map to every weight.
    pub fn map_weights(&self, f: impl Fn(&IVec) -> IVec, tag: LatticeTag, rank: usize) -> GAElement {
        let mut out = Self::zero(tag, rank);
        for (mu, c) in &self.terms {
            out.add_term(&f(mu), c);
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&CycloLaurent) -> CycloLaurent) -> GAElement {
        let mut out = Self::zero(self.tag, self.rank);
        for (mu, c) in &self.terms {
            out.add_term(mu, &f(c));
        }
        out.truncation = self.truncation.clone();
        out
    }

    pub fn apply_matrix(&self, m: &IMat) -> GAElement {
        assert!(self.is_exact(), "lattice maps need exact elements");
        self.map_weights(|mu| lattice::mat_vec(m, mu), self.tag, self.rank)
    }

    /// Keep only weights whose grading is at least `h`.
    pub fn truncate_below(&self, grading: &IVec, h: i64) -> GAElement {
        let t = match &self.truncation {
            Some(t) => Truncation {
                grading: t.grading.clone(),
                lower: opt_max(t.lower, Some(h)),
                upper: t.upper,
            },
            None => Truncation {
                grading: grading.clone(),
                lower: Some(h),
                upper: None,
            },
        };
        self.clone().with_truncation(Some(t))
    }

    /// Forget the truncation after checking that the certified region
    /// contains everything the caller cares about.
    pub fn into_exact(mut self) -> GAElement {
        self.truncation = None;
        self
    }

    pub fn to_json(&self, coords: impl Fn(&IVec) -> IVec) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|(mu, c)| TermJson {
                weight: coords(mu),
                coeff: c.to_string(),
            })
            .collect()
    }
}

/// m_mu = sum of e^lambda over the W^theta-orbit of a dominant mu.
pub fn orbit_sum(d: &RootDatumTheta, mu: &[i64]) -> Result<GAElement> {
    if !d.is_dominant(mu) {
        return Err(Error::Precondition(format!("{mu:?} is not dominant")));
    }
    Ok(GAElement::from_terms(
        LatticeTag::Y,
        d.rank,
        d.weyl_orbit(mu).into_iter().map(|v| (v, CycloLaurent::one())),
    ))
}

/// J(f) = sum_w (-1)^{l(w)} w(f e^rho) e^{-rho}.
pub fn alt_symmetrize(d: &RootDatumTheta, f: &GAElement) -> GAElement {
    assert!(f.is_exact(), "J needs an exact element");
    let g = d.weyl_theta();
    let mut out = GAElement::zero(f.tag, f.rank);
    for (mu, c) in f.terms() {
        for w in 0..g.len() {
            let nu = d.dot_action(w, mu);
            if g.sign(w) == 1 {
                out.add_term(&nu, c);
            } else {
                out.add_term(&nu, &-c);
            }
        }
    }
    out
}

/// L(e^mu) = 0 on Y*_0 and (-1)^{l(w)} e^{w . mu} on Y*_w.
pub fn desymmetrize(d: &RootDatumTheta, f: &GAElement) -> GAElement {
    assert!(f.is_exact(), "L needs an exact element");
    let g = d.weyl_theta();
    let mut out = GAElement::zero(f.tag, f.rank);
    for (mu, c) in f.terms() {
        if let Chamber::Element(w) = d.chamber_of(mu) {
            let nu = d.dot_action(w, mu);
            if g.sign(w) == 1 {
                out.add_term(&nu, c);
            } else {
                out.add_term(&nu, &-c);
            }
        }
    }
    out
}

/// Whether f is invariant under W^theta.
pub fn is_invariant(d: &RootDatumTheta, f: &GAElement) -> bool {
    let g = d.weyl_theta();
    (0..g.simple.len()).all(|s| f.apply_matrix(&g.simple[s]) == *f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::root_datum::build_preset;
    use proptest::prelude::*;

    fn e(mu: &[i64]) -> GAElement {
        GAElement::exp(LatticeTag::Y, mu.to_vec())
    }

    #[test]
    fn orbit_sums() {
        let d = build_preset("A1").unwrap();
        assert_eq!(orbit_sum(&d, &[2]).unwrap(), e(&[2]).add(&e(&[-2])));
        assert_eq!(orbit_sum(&d, &[0]).unwrap(), e(&[0]));
        assert!(orbit_sum(&d, &[-2]).is_err());
        let t = build_preset("A2~2").unwrap();
        assert_eq!(orbit_sum(&t, &[1, 1]).unwrap(), e(&[1, 1]).add(&e(&[-1, -1])));
        let m2 = orbit_sum(&d, &[2]).unwrap();
        assert!(m2.coeff(&[2]).unwrap().is_one());
        assert!(m2.coeff(&[1]).unwrap().is_zero());
    }

    #[test]
    fn alt_symmetrizer() {
        let d = build_preset("A1").unwrap();
        assert_eq!(alt_symmetrize(&d, &e(&[2])), e(&[2]).sub(&e(&[-4])));
        assert_eq!(alt_symmetrize(&d, &e(&[0])), e(&[0]).sub(&e(&[-2])));
        let t = build_preset("A2~2").unwrap();
        assert_eq!(alt_symmetrize(&t, &e(&[1, 1])), e(&[1, 1]).sub(&e(&[-3, -3])));
    }

    #[test]
    fn desymmetrizer() {
        let d = build_preset("A1").unwrap();
        assert_eq!(desymmetrize(&d, &e(&[3])), e(&[3]));
        assert!(desymmetrize(&d, &e(&[-1])).is_zero());
        assert_eq!(desymmetrize(&d, &e(&[-4])), e(&[2]).neg());
    }

    #[test]
    fn truncated_coefficients_are_guarded() {
        let g = vec![1];
        let f = e(&[0]).add(&e(&[-2])).truncate_below(&g, -2);
        assert!(f.coeff(&[-2]).is_ok());
        assert!(f.coeff(&[-4]).is_err());
        let p = e(&[2]).mul(&f);
        assert!(p.coeff(&[0]).is_ok());
        assert!(p.coeff(&[-2]).is_err());
    }

    fn arb_element(rank: usize) -> impl Strategy<Value = GAElement> {
        prop::collection::vec((prop::collection::vec(-4i64..5, rank), -3i64..4), 0..6).prop_map(
            move |ts| {
                GAElement::from_terms(
                    LatticeTag::Y,
                    rank,
                    ts.into_iter().map(|(v, c)| (v, CycloLaurent::from_int(c))),
                )
            },
        )
    }

    fn fixed(d: &RootDatumTheta, f: GAElement) -> GAElement {
        // project weights into Y* so J and L see theta-fixed vectors
        f.map_weights(|mu| d.norm(mu), LatticeTag::Y, d.rank)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn j_of_l_is_j_rank2(f in arb_element(2), name in prop::sample::select(vec!["A2", "B2", "G2", "A2~2"])) {
            let d = build_preset(name).unwrap();
            let f = fixed(&d, f);
            prop_assert_eq!(alt_symmetrize(&d, &desymmetrize(&d, &f)), alt_symmetrize(&d, &f));
        }

        #[test]
        fn j_of_l_is_j_rank1(f in arb_element(1)) {
            let d = build_preset("A1").unwrap();
            prop_assert_eq!(alt_symmetrize(&d, &desymmetrize(&d, &f)), alt_symmetrize(&d, &f));
        }

        #[test]
        fn weyl_action_preserves_pairing(f in arb_element(2), g in arb_element(2), w in 0usize..12) {
            let d = build_preset("G2").unwrap();
            let grp = d.weyl_theta();
            let m = &grp.elements[w % grp.len()];
            let pair = |a: &GAElement, b: &GAElement| {
                let mut acc = CycloLaurent::zero();
                for (mu, c) in a.terms() {
                    acc.add_assign_ref(&(c * &b.coeff(mu).unwrap()));
                }
                acc
            };
            prop_assert_eq!(pair(&f.apply_matrix(m), &g.apply_matrix(m)), pair(&f, &g));
        }

        #[test]
        fn j_is_linear_over_invariants(c in prop::collection::vec(-2i64..3, 3)) {
            let d = build_preset("A2").unwrap();
            let inv = orbit_sum(&d, &[1, 1]).unwrap().scale(&CycloLaurent::from_int(c[0]))
                .add(&orbit_sum(&d, &[3, 0]).unwrap().scale(&CycloLaurent::from_int(c[1])))
                .add(&e(&[0, 0]).scale(&CycloLaurent::from_int(c[2])));
            let j1 = alt_symmetrize(&d, &e(&[0, 0]));
            prop_assert_eq!(alt_symmetrize(&d, &inv), inv.mul(&j1));
        }
    }
}
