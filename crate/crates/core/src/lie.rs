//! Chevalley basis of the adjoint representation for simply-laced data, the
//! pinned automorphism on it, the full Weyl group and Tits-group arithmetic.

use std::collections::{HashMap, VecDeque};

use num_rational::Rational64;
use num_traits::{One, Zero};

use crate::lattice::{self, dot, IMat, IVec, RatVec};
use crate::root_datum::RootDatumTheta;
use crate::{Error, Result};

/// Phase in Q/Z standing for exp(2 pi i x).
pub type Phase = Rational64;

pub fn sign_phase(s: i64) -> Phase {
    if s == 1 {
        Rational64::zero()
    } else {
        Rational64::new(1, 2)
    }
}

/// Adjoint representation in a Chevalley basis. Basis index a < rank is the
/// Cartan vector e_a of X_*; index rank + k is E_beta for root k.
pub struct ChevalleyAdjoint<'a> {
    pub d: &'a RootDatumTheta,
    pub dim: usize,
    eps: Vec<Vec<bool>>,
    /// theta(E_beta) = theta_sign[beta] E_{theta beta}.
    pub theta_sign: Vec<i64>,
    /// Ad(n_i) E_beta = tits_sign[i][beta] E_{s_i beta}.
    pub tits_sign: Vec<Vec<i64>>,
}

impl<'a> ChevalleyAdjoint<'a> {
    pub fn new(d: &'a RootDatumTheta) -> Result<Self> {
        let l = d.simple.len();
        let cartan: IMat = (0..l)
            .map(|i| (0..l).map(|j| dot(&d.simple_roots[j], &d.simple_coroots[i])).collect())
            .collect();
        for i in 0..l {
            for j in 0..l {
                if i != j && !(cartan[i][j] == 0 || (cartan[i][j] == -1 && cartan[j][i] == -1)) {
                    return Err(Error::Unsupported(
                        "Chevalley structure constants are implemented for simply-laced data only".into(),
                    ));
                }
            }
        }
        let eps = (0..l)
            .map(|i| (0..l).map(|j| i == j || (i < j && cartan[i][j] != 0)).collect())
            .collect();
        let mut c = ChevalleyAdjoint {
            d,
            dim: d.rank + 2 * d.n_pos,
            eps,
            theta_sign: vec![],
            tits_sign: vec![],
        };
        c.theta_sign = c.build_theta_signs();
        c.tits_sign = (0..l).map(|i| c.build_tits_signs(i)).collect::<Result<_>>()?;
        Ok(c)
    }

    /// Bimultiplicative cocycle on the root lattice, evaluated on two roots.
    pub fn cocycle(&self, a: usize, b: usize) -> i64 {
        let (x, y) = (&self.d.root_coords[a], &self.d.root_coords[b]);
        let mut parity = 0i64;
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                if self.eps[i][j] {
                    parity += xi * yj;
                }
            }
        }
        if parity.rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }

    pub fn root_basis(&self, k: usize) -> usize {
        self.d.rank + k
    }

    /// Bracket of two basis vectors as a sparse combination.
    pub fn bracket_basis(&self, x: usize, y: usize) -> Vec<(usize, i64)> {
        let r = self.d.rank;
        match (x < r, y < r) {
            (true, true) => vec![],
            (true, false) => {
                let c = self.d.roots[y - r][x];
                if c == 0 { vec![] } else { vec![(y, c)] }
            }
            (false, true) => {
                let c = self.d.roots[x - r][y];
                if c == 0 { vec![] } else { vec![(x, -c)] }
            }
            (false, false) => {
                let (a, b) = (x - r, y - r);
                let s = lattice::add(&self.d.roots[a], &self.d.roots[b]);
                if lattice::is_zero(&s) {
                    return self.d.coroots[a]
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c != 0)
                        .map(|(i, c)| (i, -c))
                        .collect();
                }
                match self.d.root_index.get(&s) {
                    Some(&g) => vec![(r + g, self.cocycle(a, b))],
                    None => vec![],
                }
            }
        }
    }

    pub fn bracket(&self, x: &[Rational64], y: &[Rational64]) -> RatVec {
        let mut out = vec![Rational64::zero(); self.dim];
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if yj.is_zero() {
                    continue;
                }
                for (k, c) in self.bracket_basis(i, j) {
                    out[k] += xi * yj * Rational64::from_integer(c);
                }
            }
        }
        out
    }

    pub fn basis_vector(&self, i: usize) -> RatVec {
        let mut v = vec![Rational64::zero(); self.dim];
        v[i] = Rational64::one();
        v
    }

    /// Matrix of ad(x), acting on column vectors.
    pub fn ad_matrix(&self, x: &[Rational64]) -> Vec<RatVec> {
        let mut m = vec![vec![Rational64::zero(); self.dim]; self.dim];
        for j in 0..self.dim {
            let col = self.bracket(x, &self.basis_vector(j));
            for i in 0..self.dim {
                m[i][j] = col[i];
            }
        }
        m
    }

    fn build_theta_signs(&self) -> Vec<i64> {
        let d = self.d;
        let mut s = vec![0i64; 2 * d.n_pos];
        for &k in &d.simple {
            s[k] = 1;
            s[d.neg_index(k)] = 1;
        }
        // roots are sorted by height, so predecessors are already known
        for k in 0..d.n_pos {
            if s[k] != 0 {
                continue;
            }
            for (i, &si) in d.simple.iter().enumerate() {
                let beta = lattice::sub(&d.roots[k], &d.simple_roots[i]);
                let Some(&b) = d.root_index.get(&beta) else { continue };
                if !d.is_positive(b) {
                    continue;
                }
                let ti = d.theta_perm[si];
                let tb = d.theta_perm[b];
                s[k] = self.cocycle(si, b) * s[b] * self.cocycle(ti, tb);
                let (nk, nsi, nb) = (d.neg_index(k), d.neg_index(si), d.neg_index(b));
                s[nk] = self.cocycle(nsi, nb)
                    * s[nb]
                    * self.cocycle(d.theta_perm[nsi], d.theta_perm[nb]);
                break;
            }
        }
        s
    }

    /// Matrix of the pinned automorphism on the adjoint representation.
    pub fn theta_matrix(&self) -> Vec<RatVec> {
        let d = self.d;
        let r = d.rank;
        let mut m = vec![vec![Rational64::zero(); self.dim]; self.dim];
        for a in 0..r {
            for b in 0..r {
                m[a][b] = Rational64::from_integer(d.theta_dual[a][b]);
            }
        }
        for k in 0..2 * d.n_pos {
            m[r + d.theta_perm[k]][r + k] = Rational64::from_integer(self.theta_sign[k]);
        }
        m
    }

    /// exp(ad E_{beta}) for a root beta; ad is nilpotent of order 3 here.
    fn exp_ad_root(&self, k: usize, coeff: i64) -> Vec<RatVec> {
        let mut x = vec![Rational64::zero(); self.dim];
        x[self.root_basis(k)] = Rational64::from_integer(coeff);
        let a = self.ad_matrix(&x);
        let a2 = mat_mul(&a, &a);
        let half = Rational64::new(1, 2);
        let mut out = identity(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i][j] += a[i][j] + a2[i][j] * half;
            }
        }
        out
    }

    /// Ad(n_i) with n_i = exp(e) exp(-f) exp(e) and [e, f] = alpha_i^v.
    pub fn tits_matrix(&self, i: usize) -> Vec<RatVec> {
        let k = self.d.simple[i];
        let e = self.exp_ad_root(k, 1);
        // f = -E_{-alpha_i}
        let f = self.exp_ad_root(self.d.neg_index(k), 1);
        mat_mul(&mat_mul(&e, &f), &e)
    }

    fn build_tits_signs(&self, i: usize) -> Result<Vec<i64>> {
        let d = self.d;
        let m = self.tits_matrix(i);
        let r = d.rank;
        let mut out = Vec::with_capacity(2 * d.n_pos);
        for k in 0..2 * d.n_pos {
            let img = reflect(&d.roots[k], &d.simple_roots[i], &d.simple_coroots[i]);
            let j = d.root_index[&img];
            let col: Vec<Rational64> = (0..self.dim).map(|a| m[a][r + k]).collect();
            let c = col[r + j];
            let clean = col.iter().enumerate().all(|(a, x)| a == r + j || x.is_zero());
            if !clean || !(c == Rational64::one() || c == -Rational64::one()) {
                return Err(Error::Mismatch("Tits lift is not monomial on root vectors".into()));
            }
            out.push(c.to_integer());
        }
        Ok(out)
    }

    /// Ad(n(w)) E_beta for a reduced word w = s_{i1} ... s_{ik}: (sign, root).
    pub fn tits_on_root(&self, word: &[usize], beta: usize) -> (i64, usize) {
        let mut sign = 1;
        let mut b = beta;
        for &i in word.iter().rev() {
            sign *= self.tits_sign[i][b];
            let img = reflect(&self.d.roots[b], &self.d.simple_roots[i], &self.d.simple_coroots[i]);
            b = self.d.root_index[&img];
        }
        (sign, b)
    }

    /// Ad(t n(w) theta) E_beta = exp(2 pi i phase) E_image: (phase, image).
    pub fn twisted_on_root(&self, x: &TitsElement, beta: usize) -> (Phase, usize) {
        let tb = self.d.theta_perm[beta];
        let word = reduced_word(self.d, &x.w);
        let (s, img) = self.tits_on_root(&word, tb);
        let phase = sign_phase(self.theta_sign[beta] * s)
            + lattice::dot_rat(&self.d.roots[img], &x.t);
        (lattice::frac(phase), img)
    }
}

pub fn identity(n: usize) -> Vec<RatVec> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational64::one() } else { Rational64::zero() }).collect())
        .collect()
}

pub fn mat_mul(a: &[RatVec], b: &[RatVec]) -> Vec<RatVec> {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    let mut out = vec![vec![Rational64::zero(); m]; n];
    for i in 0..n {
        for (k, aik) in a[i].iter().enumerate() {
            if aik.is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn reflect(mu: &[i64], root: &[i64], coroot: &[i64]) -> IVec {
    let c = dot(mu, coroot);
    mu.iter().zip(root).map(|(m, r)| m - c * r).collect()
}

fn reflect_dual(h: &[Rational64], root: &[i64], coroot: &[i64]) -> RatVec {
    let c = lattice::dot_rat(root, h);
    h.iter().zip(coroot).map(|(x, r)| x - c * Rational64::from_integer(*r)).collect()
}

/// All elements of the (untwisted) Weyl group as matrices on X*.
pub fn full_weyl(d: &RootDatumTheta, cap: usize) -> Result<Vec<IMat>> {
    let gens: Vec<IMat> = (0..d.simple.len()).map(|i| d.simple_reflection_matrix(i)).collect();
    let id = lattice::identity(d.rank);
    let mut seen: HashMap<IMat, usize> = HashMap::from([(id.clone(), 0)]);
    let mut out = vec![id.clone()];
    let mut queue = VecDeque::from([id]);
    while let Some(w) = queue.pop_front() {
        for g in &gens {
            let x = lattice::mat_mul(g, &w);
            if !seen.contains_key(&x) {
                if out.len() >= cap {
                    return Err(Error::Cap(format!("Weyl group larger than {cap}")));
                }
                seen.insert(x.clone(), out.len());
                out.push(x.clone());
                queue.push_back(x);
            }
        }
    }
    Ok(out)
}

/// A reduced word [i1, ..., ik] with w = s_{i1} ... s_{ik}.
pub fn reduced_word(d: &RootDatumTheta, w: &IMat) -> Vec<usize> {
    let mut word = Vec::new();
    let mut cur = w.clone();
    let mut len = d.abs_length(&cur);
    while len > 0 {
        let mut step = None;
        for i in 0..d.simple.len() {
            let x = lattice::mat_mul(&d.simple_reflection_matrix(i), &cur);
            let lx = d.abs_length(&x);
            if lx < len {
                step = Some((i, x, lx));
                break;
            }
        }
        let (i, x, lx) = step.expect("some simple reflection shortens a nontrivial element");
        word.push(i);
        cur = x;
        len = lx;
    }
    word
}

/// Action of a Weyl element (given on X*) on X_* tensor Q.
pub fn weyl_on_coweights(d: &RootDatumTheta, w: &IMat, h: &[Rational64]) -> RatVec {
    let mut out = h.to_vec();
    for &i in reduced_word(d, w).iter().rev() {
        out = reflect_dual(&out, &d.simple_roots[i], &d.simple_coroots[i]);
    }
    out
}

/// t n(w) in the Tits group, t a rational cocharacter taken mod 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TitsElement {
    pub t: RatVec,
    pub w: IMat,
}

impl TitsElement {
    pub fn new(t: RatVec, w: IMat) -> Self {
        TitsElement {
            t: lattice::frac_vec(&t),
            w,
        }
    }

    pub fn identity(rank: usize) -> Self {
        Self::new(vec![Rational64::zero(); rank], lattice::identity(rank))
    }

    pub fn torus(t: RatVec) -> Self {
        let n = t.len();
        Self::new(t, lattice::identity(n))
    }

    pub fn simple(d: &RootDatumTheta, i: usize) -> Self {
        Self::new(vec![Rational64::zero(); d.rank], d.simple_reflection_matrix(i))
    }

    /// The standard lift n(w) along a reduced word.
    pub fn lift(d: &RootDatumTheta, w: &IMat) -> Self {
        let mut x = Self::identity(d.rank);
        for &i in reduced_word(d, w).iter().rev() {
            x = x.left_simple(d, i);
        }
        x
    }

    /// n_i x.
    fn left_simple(&self, d: &RootDatumTheta, i: usize) -> Self {
        let t = reflect_dual(&self.t, &d.simple_roots[i], &d.simple_coroots[i]);
        let sw = lattice::mat_mul(&d.simple_reflection_matrix(i), &self.w);
        let t = if d.abs_length(&sw) > d.abs_length(&self.w) {
            t
        } else {
            let half: RatVec = d.simple_coroots[i]
                .iter()
                .map(|c| Rational64::new(*c, 2))
                .collect();
            t.iter().zip(&half).map(|(a, b)| a + b).collect()
        };
        Self::new(t, sw)
    }

    pub fn mul(&self, d: &RootDatumTheta, other: &Self) -> Self {
        let mut x = Self::new(vec![Rational64::zero(); d.rank], other.w.clone());
        for &i in reduced_word(d, &self.w).iter().rev() {
            x = x.left_simple(d, i);
        }
        let wt = weyl_on_coweights(d, &self.w, &other.t);
        let t: RatVec = (0..d.rank).map(|a| self.t[a] + wt[a] + x.t[a]).collect();
        Self::new(t, x.w)
    }

    pub fn inverse(&self, d: &RootDatumTheta) -> Self {
        let mut out = Self::identity(d.rank);
        for &i in &reduced_word(d, &self.w) {
            let half: RatVec = d.simple_coroots[i]
                .iter()
                .map(|c| Rational64::new(*c, 2))
                .collect();
            let inv_i = Self::torus(half).mul(d, &Self::simple(d, i));
            out = inv_i.mul(d, &out);
        }
        let neg: RatVec = self.t.iter().map(|x| -x).collect();
        out.mul(d, &Self::torus(neg))
    }

    /// The pinned automorphism applied to t n(w).
    pub fn theta(&self, d: &RootDatumTheta) -> Self {
        let t: RatVec = (0..d.rank)
            .map(|a| (0..d.rank).map(|b| Rational64::from_integer(d.theta_dual[a][b]) * self.t[b]).sum())
            .collect();
        let inv = lattice::rat_inverse(&lattice::rat_matrix(&d.theta)).expect("theta is invertible");
        let inv: IMat = inv.iter().map(|r| r.iter().map(|x| x.to_integer()).collect()).collect();
        let w = lattice::mat_mul(&lattice::mat_mul(&d.theta, &self.w), &inv);
        Self::new(t, w)
    }

    pub fn is_torus(&self) -> bool {
        self.w == lattice::identity(self.w.len())
    }
}

/// Coweights dual to the simple roots, when they span the ambient space.
pub fn fundamental_coweights(d: &RootDatumTheta) -> Option<Vec<RatVec>> {
    let l = d.simple.len();
    if l != d.rank {
        return None;
    }
    let m = lattice::rat_matrix(&d.simple_roots);
    let inv = lattice::rat_inverse(&m)?;
    // row i of simple_roots paired with column j of inv gives delta_ij
    Some((0..l).map(|j| (0..d.rank).map(|a| inv[a][j]).collect()).collect())
}
