//! Brute-force implementations used to test the main code paths.
//!
//! Nothing here calls the partition, spherical or endoscopy machinery except
//! `peel_decompose`, which needs the tau basis it peels against.

use std::collections::{BTreeMap, HashMap};

use num_rational::Rational64;
use num_traits::Zero;

use crate::group_algebra::{is_invariant, GAElement, LatticeTag};
use crate::lattice::{self, dot, IVec};
use crate::root_datum::RootDatumTheta;
use crate::scalar::{CycloLaurent, CycloRational};
use crate::spherical::Spherical;
use crate::{Error, Result};

pub use crate::lie::ChevalleyAdjoint;

/// Weight multiplicities of the irreducible representation V(lambda) of a
/// split datum by Freudenthal's recursion, memoized.
pub struct Freudenthal<'a> {
    d: &'a RootDatumTheta,
    lambda: IVec,
    memo: HashMap<IVec, i64>,
}

impl<'a> Freudenthal<'a> {
    pub fn new(d: &'a RootDatumTheta, lambda: &[i64]) -> Result<Self> {
        if !d.is_split() {
            return Err(Error::Precondition("Freudenthal's formula needs theta = 1".into()));
        }
        if !d.is_dominant(lambda) {
            return Err(Error::Precondition(format!("{lambda:?} is not dominant")));
        }
        Ok(Freudenthal {
            d,
            lambda: lambda.to_vec(),
            memo: HashMap::new(),
        })
    }

    /// sum over positive roots of <x, a^v><y, a^v>; W-invariant.
    fn form(&self, x: &[i64], y: &[i64]) -> i64 {
        self.d.coroots[..self.d.n_pos]
            .iter()
            .map(|c| dot(x, c) * dot(y, c))
            .sum()
    }

    fn below_lambda(&self, mu: &[i64]) -> bool {
        let diff = lattice::sub(&self.lambda, mu);
        match self.d.simple_coords(&diff) {
            Some(c) => c.iter().all(|x| x.is_integer() && *x >= Rational64::zero()),
            None => false,
        }
    }

    pub fn mult(&mut self, mu: &[i64]) -> i64 {
        if mu == self.lambda.as_slice() {
            return 1;
        }
        if !self.below_lambda(mu) {
            return 0;
        }
        if let Some(&m) = self.memo.get(mu) {
            return m;
        }
        let d = self.d;
        // (lambda + rho)^2 - (mu + rho)^2 = (lambda - mu, lambda + mu + 2 rho)
        let sum = lattice::add(&lattice::add(&self.lambda, mu), &d.rho2);
        let den = self.form(&lattice::sub(&self.lambda, mu), &sum);
        let mut num = 0;
        for a in &d.roots[..d.n_pos] {
            let mut k = 1;
            loop {
                let nu: IVec = mu.iter().zip(a).map(|(x, y)| x + k * y).collect();
                if !self.below_lambda(&nu) {
                    break;
                }
                let m = self.mult(&nu);
                // the form is doubled on both sides
                num += 2 * self.form(&nu, a) * m;
                k += 1;
            }
        }
        let m = if den == 0 {
            0
        } else {
            assert_eq!(num % den, 0, "Freudenthal recursion must divide evenly");
            num / den
        };
        self.memo.insert(mu.to_vec(), m);
        m
    }

    /// All weights with nonzero multiplicity.
    pub fn character(&mut self) -> BTreeMap<IVec, i64> {
        let d = self.d;
        let mut out = BTreeMap::new();
        let mut frontier = vec![self.lambda.clone()];
        let mut seen = std::collections::HashSet::new();
        seen.insert(self.lambda.clone());
        while let Some(mu) = frontier.pop() {
            let m = self.mult(&mu);
            if m == 0 {
                continue;
            }
            out.insert(mu.clone(), m);
            for &k in &d.simple {
                let nu = lattice::sub(&mu, &d.roots[k]);
                if seen.insert(nu.clone()) {
                    frontier.push(nu);
                }
            }
        }
        out
    }
}

pub fn freudenthal_mult(d: &RootDatumTheta, lambda: &[i64], mu: &[i64]) -> Result<i64> {
    Ok(Freudenthal::new(d, lambda)?.mult(mu))
}

/// Coefficient of e^target in prod_i 1/(1 - c_i e^{w_i}), by enumeration.
/// `grading` must be positive on every w_i.
pub fn count_decompositions(
    weights: &[(IVec, CycloLaurent)],
    grading: &[i64],
    target: &[i64],
) -> Result<CycloLaurent> {
    if let Some((w, _)) = weights.iter().find(|(w, _)| dot(w, grading) <= 0) {
        return Err(Error::Precondition(format!("factor weight {w:?} does not bound the cone")));
    }
    fn go(
        i: usize,
        weights: &[(IVec, CycloLaurent)],
        grading: &[i64],
        target: IVec,
        memo: &mut HashMap<(usize, IVec), CycloLaurent>,
    ) -> CycloLaurent {
        if i == weights.len() {
            return if lattice::is_zero(&target) {
                CycloLaurent::one()
            } else {
                CycloLaurent::zero()
            };
        }
        if dot(&target, grading) < 0 {
            return CycloLaurent::zero();
        }
        if let Some(v) = memo.get(&(i, target.clone())) {
            return v.clone();
        }
        let (w, c) = &weights[i];
        let mut acc = CycloLaurent::zero();
        let mut power = CycloLaurent::one();
        let mut rest = target.clone();
        while dot(&rest, grading) >= 0 {
            let sub = go(i + 1, weights, grading, rest.clone(), memo);
            if !sub.is_zero() {
                acc.add_assign_ref(&(&power * &sub));
            }
            power = &power * c;
            rest = lattice::sub(&rest, w);
        }
        memo.insert((i, target), acc.clone());
        acc
    }
    Ok(go(0, weights, grading, target.to_vec(), &mut HashMap::new()))
}

/// The (q-graded) Kostant count of mu over the theta-orbit sums of positive
/// roots, each orbit O weighted by sign(O) q^{|O|} (q = 1 when not graded).
pub fn kostant_count(d: &RootDatumTheta, mu: &[i64], q_graded: bool) -> Result<CycloLaurent> {
    let mut weights = Vec::new();
    for o in &d.orbits {
        let n = o.roots.iter().fold(vec![0; d.rank], |acc, &k| lattice::add(&acc, &d.roots[k]));
        if lattice::is_zero(&n) {
            return Err(Error::Precondition("an orbit sum vanishes; the count is unbounded".into()));
        }
        let q = if q_graded {
            CycloLaurent::q_pow(o.roots.len() as i64)
        } else {
            CycloLaurent::one()
        };
        let c = if o.sign == 1 { q } else { -q };
        weights.push((n, c));
    }
    count_decompositions(&weights, &d.rho2_check, mu)
}

/// Kostant's branching multiplicity for a split datum and the Levi subgroup
/// with positive roots `h_pos`: sum_w sign(w) P(w(lambda + rho) - (mu + rho)).
pub fn kostant_branching(d: &RootDatumTheta, h_pos: &[usize], lambda: &[i64], mu: &[i64]) -> Result<i64> {
    if !d.is_split() {
        return Err(Error::Precondition("Kostant branching needs theta = 1".into()));
    }
    let weights: Vec<(IVec, CycloLaurent)> = (0..d.n_pos)
        .filter(|k| !h_pos.contains(k))
        .map(|k| (d.roots[k].clone(), CycloLaurent::one()))
        .collect();
    let g = d.weyl_theta();
    let mut acc = 0i64;
    for w in 0..g.len() {
        // w(lambda + rho) - (mu + rho) = w . lambda - mu
        let x = lattice::sub(&d.dot_action(w, lambda), mu);
        let c = count_decompositions(&weights, &d.rho2_check, &x)?;
        let v = c.at_q_one();
        let n = v
            .as_rational()
            .filter(|r| r.is_integer())
            .map(|r| i64::try_from(r.to_integer()).expect("small count"))
            .ok_or_else(|| Error::Arithmetic("count is not an integer".into()))?;
        acc += g.sign(w) * n;
    }
    Ok(acc)
}

/// Coefficients c_lambda with f = sum c_lambda tau_lambda, by repeatedly
/// subtracting the tau of a dominant weight of maximal height.
pub fn peel_decompose(d: &RootDatumTheta, f: &GAElement) -> Result<BTreeMap<IVec, CycloLaurent>> {
    if !f.is_exact() {
        return Err(Error::Precondition("peeling needs an exact element".into()));
    }
    if !is_invariant(d, f) {
        return Err(Error::Precondition("peeling needs an invariant element".into()));
    }
    let sph = Spherical::new(d)?;
    let mut rest = f.clone();
    let mut out = BTreeMap::new();
    while !rest.is_zero() {
        let top = rest
            .support()
            .into_iter()
            .filter(|mu| d.is_dominant(mu))
            .max_by(|a, b| d.height(a).cmp(&d.height(b)).then_with(|| b.cmp(a)))
            .ok_or_else(|| Error::Precondition("invariant element without dominant support".into()))?;
        let c = rest.coeff(&top)?;
        let tau = sph.tau(&top)?;
        rest = rest.sub(&tau.scale(&c));
        out.insert(top, c);
    }
    Ok(out)
}

/// Trace of Ad(t) composed with theta on the adjoint representation; with
/// `normalize_highest`, theta is rescaled to fix the highest root vector.
pub fn twisted_trace_adjoint(chev: &ChevalleyAdjoint, torus_pt: &[Rational64], normalize_highest: bool) -> CycloRational {
    let d = chev.d;
    let cartan: i64 = (0..d.rank).map(|a| d.theta_dual[a][a]).sum();
    let mut acc = CycloRational::from_int(cartan);
    for k in 0..2 * d.n_pos {
        if d.theta_perm[k] == k {
            let v = CycloRational::exp_2pi_i(lattice::frac(lattice::dot_rat(&d.roots[k], torus_pt)));
            acc = if chev.theta_sign[k] == 1 { &acc + &v } else { &acc - &v };
        }
    }
    if normalize_highest && d.n_pos > 0 {
        // highest root: the last positive root of the (single) component
        let top = d.n_pos - 1;
        if chev.theta_sign[top] == -1 {
            acc = -acc;
        }
    }
    acc
}

/// det(1 - q e^alpha theta) on the positive (or negative) root spaces, from
/// traces of powers of the explicit matrix and Newton's identities.
pub fn trace_method_determinant(chev: &ChevalleyAdjoint, positive: bool) -> GAElement {
    trace_method_determinant_signed(chev.d, &chev.theta_sign, positive)
}

/// As `trace_method_determinant`, with theta(E_beta) = theta_sign[beta]
/// E_{theta beta} given directly (all ones when theta = 1).
pub fn trace_method_determinant_signed(d: &RootDatumTheta, theta_sign: &[i64], positive: bool) -> GAElement {
    let roots: Vec<usize> = if positive {
        (0..d.n_pos).collect()
    } else {
        (d.n_pos..2 * d.n_pos).collect()
    };
    let n = roots.len();
    // p_k = tr(M^k), M = q diag(e^alpha) theta restricted to the root spaces
    let mut p: Vec<GAElement> = Vec::with_capacity(n + 1);
    p.push(GAElement::zero(LatticeTag::Y, d.rank));
    for k in 1..=n {
        let mut tr = GAElement::zero(LatticeTag::Y, d.rank);
        for &r in &roots {
            let mut j = r;
            let mut sign = 1;
            let mut wt = vec![0; d.rank];
            for _ in 0..k {
                sign *= theta_sign[j];
                j = d.theta_perm[j];
                wt = lattice::add(&wt, &d.roots[j]);
            }
            if j == r {
                tr.add_term(&wt, &CycloLaurent::q_pow(k as i64).scale(&CycloRational::from_int(sign)));
            }
        }
        p.push(tr);
    }
    // e_k = (1/k) sum_{i=1}^k (-1)^{i-1} e_{k-i} p_i
    let mut e = vec![GAElement::one(LatticeTag::Y, d.rank)];
    for k in 1..=n {
        let mut acc = GAElement::zero(LatticeTag::Y, d.rank);
        for i in 1..=k {
            let term = e[k - i].mul(&p[i]);
            acc = if i % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
        }
        let inv_k = CycloRational::from_ratio(Rational64::new(1, k as i64));
        e.push(acc.scale_cyclo(&inv_k));
    }
    let mut det = GAElement::zero(LatticeTag::Y, d.rank);
    for (k, ek) in e.iter().enumerate() {
        det = if k % 2 == 0 { det.add(ek) } else { det.sub(ek) };
    }
    det
}

/// q^{lambda/2} (m_lambda + (1 - q^{-1}) sum_{k >= 1} m_{lambda - 2k}) for
/// split A1 with X* = Z and alpha = 2.
pub fn rank1_satake(lambda: i64) -> GAElement {
    assert!(lambda >= 0);
    let m = |mu: i64| {
        let mut g = GAElement::zero(LatticeTag::Y, 1);
        g.add_term(&[mu], &CycloLaurent::one());
        if mu != 0 {
            g.add_term(&[-mu], &CycloLaurent::one());
        }
        g
    };
    let one_minus: CycloLaurent = &CycloLaurent::one() - &CycloLaurent::q_pow(-1);
    let mut out = m(lambda);
    let mut mu = lambda - 2;
    while mu >= 0 {
        out = out.add(&m(mu).scale(&one_minus));
        mu -= 2;
    }
    out.scale(&CycloLaurent::q_half_pow(lambda))
}
