//! Based root data with a pinned finite-order automorphism, the restricted
//! root system on the fixed lattice Y*, and the twisted Weyl group W^theta.
//!
//! All weights are dense integer vectors in ambient X*(T) coordinates;
//! coweights live in X_*(T) and the pairing is the dot product.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::OnceLock;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::lattice::{self, dot, IMat, IVec, LatticeBasis, RatVec};
use crate::{Error, Result};

const ROOT_CAP: usize = 2000;
pub const WEYL_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Diagram {
    A1,
    A2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitRole {
    A1,
    A2Beta,
    A2Gamma,
}

/// A theta-orbit of positive roots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orbit {
    /// Root indices, sorted.
    pub roots: Vec<usize>,
    pub role: OrbitRole,
    pub b: usize,
    /// Eigenvalue of theta^{|orbit|} on a root vector (pinned convention).
    pub sign: i64,
}

impl Orbit {
    pub fn diagram(&self) -> Diagram {
        match self.role {
            OrbitRole::A1 => Diagram::A1,
            _ => Diagram::A2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedRoot {
    /// The root as an element of Y* (ambient coordinates).
    pub vector: IVec,
    pub diagram: Diagram,
    pub b: usize,
    /// Orbit indices aggregated into this restricted root.
    pub orbits: Vec<usize>,
    /// A root beta whose coroot computes the restricted coroot pairing on Y*.
    pub coroot_rep: usize,
}

#[derive(Debug, Clone)]
pub struct TwistedWeylGroup {
    pub elements: Vec<IMat>,
    pub index: HashMap<IMat, usize>,
    /// Generators, one per simple theta-orbit.
    pub simple: Vec<IMat>,
    pub length: Vec<usize>,
    pub length_abs: Vec<usize>,
    /// A reduced word in the simple generators for each element.
    pub words: Vec<Vec<usize>>,
}

impl TwistedWeylGroup {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn sign(&self, w: usize) -> i64 {
        if self.length[w] % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn apply(&self, w: usize, mu: &[i64]) -> IVec {
        lattice::mat_vec(&self.elements[w], mu)
    }

    /// Elements of the parabolic subgroup generated by the given simple generators.
    pub fn parabolic(&self, gens: &[usize]) -> Vec<usize> {
        let mut seen = BTreeSet::from([0usize]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(w) = queue.pop_front() {
            for &g in gens {
                let x = lattice::mat_mul(&self.simple[g], &self.elements[w]);
                let i = self.index[&x];
                if seen.insert(i) {
                    queue.push_back(i);
                }
            }
        }
        seen.into_iter().collect()
    }
}

/// Where mu lies in the partition of Y* by the dot action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chamber {
    /// Some reflection dot-fixes mu.
    Zero,
    /// The element w with w . mu dominant.
    Element(usize),
}

/// Serializable input form of a datum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatumSpec {
    pub name: String,
    pub rank: usize,
    pub simple_roots: IMat,
    pub simple_coroots: IMat,
    pub theta: IMat,
}

#[derive(Debug, Clone)]
pub struct RootDatumTheta {
    pub name: String,
    pub rank: usize,
    /// Positive roots first, then their negatives in the same order.
    pub roots: Vec<IVec>,
    pub coroots: Vec<IVec>,
    /// Simple-root coordinates of each root.
    pub root_coords: Vec<IVec>,
    pub n_pos: usize,
    pub simple_roots: IMat,
    pub simple_coroots: IMat,
    /// Root index of each simple root.
    pub simple: Vec<usize>,
    /// theta on X* acting on column vectors.
    pub theta: IMat,
    /// theta on X_*.
    pub theta_dual: IMat,
    pub order: usize,
    /// Permutation of root indices induced by theta.
    pub theta_perm: Vec<usize>,
    /// Permutation of simple nodes induced by theta.
    pub theta_nodes: Vec<usize>,
    pub root_index: HashMap<IVec, usize>,
    /// Y* = X*^theta.
    pub y: LatticeBasis,
    pub orbits: Vec<Orbit>,
    /// Orbit index of each positive root.
    pub orbit_of: Vec<usize>,
    /// Theta-orbits of simple nodes.
    pub simple_orbits: Vec<Vec<usize>>,
    pub restricted: Vec<RestrictedRoot>,
    /// Restricted simple roots, aligned with `simple_orbits`.
    pub restricted_simple: Vec<usize>,
    /// 2 rho (sum of positive roots), in X*.
    pub rho2: IVec,
    /// 2 rho-check (sum of positive coroots), in X_*.
    pub rho2_check: IVec,
    spec: DatumSpec,
    weyl: OnceLock<std::result::Result<TwistedWeylGroup, String>>,
}

fn reflect(mu: &[i64], root: &[i64], coroot: &[i64]) -> IVec {
    let c = dot(mu, coroot);
    mu.iter().zip(root).map(|(m, r)| m - c * r).collect()
}

fn reflection_matrix(root: &[i64], coroot: &[i64]) -> IMat {
    let n = root.len();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| i64::from(a == b) - root[a] * coroot[b])
                .collect()
        })
        .collect()
}

impl RootDatumTheta {
    /// Build and validate a datum from simple roots, simple coroots and theta.
    pub fn new(
        name: &str,
        rank: usize,
        simple_roots: IMat,
        simple_coroots: IMat,
        theta: IMat,
    ) -> Result<Self> {
        let bad = |s: String| Err(Error::InvalidDatum(s));
        let l = simple_roots.len();
        if simple_coroots.len() != l {
            return bad("simple roots and coroots differ in number".into());
        }
        if simple_roots.iter().chain(&simple_coroots).any(|v| v.len() != rank) {
            return bad("vector length differs from rank".into());
        }
        if theta.len() != rank || theta.iter().any(|r| r.len() != rank) {
            return bad("theta must be a square matrix of size rank".into());
        }
        let cartan: IMat = (0..l)
            .map(|i| (0..l).map(|j| dot(&simple_roots[j], &simple_coroots[i])).collect())
            .collect();
        for i in 0..l {
            if cartan[i][i] != 2 {
                return bad(format!("<alpha_{i}, alpha_{i}^v> != 2"));
            }
            for j in 0..l {
                if i != j && (cartan[i][j] > 0 || (cartan[i][j] == 0) != (cartan[j][i] == 0)) {
                    return bad(format!("Cartan entries ({i},{j}) are not admissible"));
                }
            }
        }
        if l > 0 && lattice::kernel_basis(&lattice::transpose(&simple_roots), l).len() != 0 {
            return bad("simple roots are linearly dependent".into());
        }

        // roots by closure under simple reflections
        let mut found: HashMap<IVec, (IVec, IVec)> = HashMap::new();
        let mut queue = VecDeque::new();
        for i in 0..l {
            let mut c = vec![0; l];
            c[i] = 1;
            found.insert(simple_roots[i].clone(), (simple_coroots[i].clone(), c.clone()));
            queue.push_back(simple_roots[i].clone());
        }
        while let Some(beta) = queue.pop_front() {
            let (bc, coords) = found[&beta].clone();
            for i in 0..l {
                let k = dot(&beta, &simple_coroots[i]);
                let nb = reflect(&beta, &simple_roots[i], &simple_coroots[i]);
                let nbc = reflect(&bc, &simple_coroots[i], &simple_roots[i]);
                let mut nc = coords.clone();
                nc[i] -= k;
                if let Some((old_c, _)) = found.get(&nb) {
                    if *old_c != nbc {
                        return bad("root with two different coroots".into());
                    }
                    continue;
                }
                if found.len() >= ROOT_CAP {
                    return bad("root system is not finite".into());
                }
                found.insert(nb.clone(), (nbc, nc));
                queue.push_back(nb);
            }
        }
        let mut pos: Vec<(IVec, IVec, IVec)> = Vec::new();
        for (r, (c, co)) in &found {
            if dot(r, c) != 2 {
                return bad("<alpha, alpha^v> != 2".into());
            }
            if co.iter().all(|x| *x >= 0) {
                pos.push((r.clone(), c.clone(), co.clone()));
            } else if !co.iter().all(|x| *x <= 0) {
                return bad("root neither positive nor negative".into());
            }
        }
        pos.sort_by(|a, b| {
            let ha: i64 = a.2.iter().sum();
            let hb: i64 = b.2.iter().sum();
            (ha, &a.2).cmp(&(hb, &b.2))
        });
        let n_pos = pos.len();
        if found.len() != 2 * n_pos {
            return bad("root set is not symmetric".into());
        }
        let mut roots = Vec::with_capacity(2 * n_pos);
        let mut coroots = Vec::with_capacity(2 * n_pos);
        let mut root_coords = Vec::with_capacity(2 * n_pos);
        for (r, c, co) in &pos {
            roots.push(r.clone());
            coroots.push(c.clone());
            root_coords.push(co.clone());
        }
        for (r, c, co) in &pos {
            roots.push(lattice::neg(r));
            coroots.push(lattice::neg(c));
            root_coords.push(lattice::neg(co));
        }
        let root_index: HashMap<IVec, usize> =
            roots.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        let simple: Vec<usize> = simple_roots.iter().map(|r| root_index[r]).collect();

        // theta
        let order = lattice::matrix_order(&theta, 10_000)
            .ok_or_else(|| Error::InvalidDatum("theta does not have finite order".into()))?;
        let inv = lattice::rat_inverse(&lattice::rat_matrix(&theta))
            .ok_or_else(|| Error::InvalidDatum("theta is not invertible".into()))?;
        let mut theta_dual = vec![vec![0i64; rank]; rank];
        for a in 0..rank {
            for b in 0..rank {
                let x = inv[b][a];
                if !x.is_integer() {
                    return bad("theta is not unimodular".into());
                }
                theta_dual[a][b] = x.to_integer();
            }
        }
        let mut theta_nodes = Vec::with_capacity(l);
        for i in 0..l {
            let img = lattice::mat_vec(&theta, &simple_roots[i]);
            let Some(j) = simple_roots.iter().position(|r| *r == img) else {
                return bad("theta does not permute the simple roots".into());
            };
            if lattice::mat_vec(&theta_dual, &simple_coroots[i]) != simple_coroots[j] {
                return bad("theta does not permute the simple coroots".into());
            }
            theta_nodes.push(j);
        }
        let theta_perm: Vec<usize> = roots
            .iter()
            .map(|r| root_index[&lattice::mat_vec(&theta, r)])
            .collect();

        let spec = DatumSpec {
            name: name.to_string(),
            rank,
            simple_roots: simple_roots.clone(),
            simple_coroots: simple_coroots.clone(),
            theta: theta.clone(),
        };
        let y = lattice::fixed_lattice(&theta);
        let rho2 = roots[..n_pos]
            .iter()
            .fold(vec![0; rank], |acc, r| lattice::add(&acc, r));
        let rho2_check = coroots[..n_pos]
            .iter()
            .fold(vec![0; rank], |acc, r| lattice::add(&acc, r));

        let mut d = RootDatumTheta {
            name: name.to_string(),
            rank,
            roots,
            coroots,
            root_coords,
            n_pos,
            simple_roots,
            simple_coroots,
            simple,
            theta,
            theta_dual,
            order,
            theta_perm,
            theta_nodes,
            root_index,
            y,
            orbits: vec![],
            orbit_of: vec![],
            simple_orbits: vec![],
            restricted: vec![],
            restricted_simple: vec![],
            rho2,
            rho2_check,
            spec,
            weyl: OnceLock::new(),
        };
        d.build_orbits();
        d.build_restricted();
        Ok(d)
    }

    pub fn from_spec(spec: &DatumSpec) -> Result<Self> {
        Self::new(
            &spec.name,
            spec.rank,
            spec.simple_roots.clone(),
            spec.simple_coroots.clone(),
            spec.theta.clone(),
        )
    }

    pub fn spec(&self) -> &DatumSpec {
        &self.spec
    }

    pub fn is_split(&self) -> bool {
        self.theta == lattice::identity(self.rank)
    }

    pub fn neg_index(&self, i: usize) -> usize {
        if i < self.n_pos {
            i + self.n_pos
        } else {
            i - self.n_pos
        }
    }

    pub fn is_positive(&self, i: usize) -> bool {
        i < self.n_pos
    }

    pub fn positive_roots(&self) -> &[IVec] {
        &self.roots[..self.n_pos]
    }

    fn build_orbits(&mut self) {
        let mut orbit_of = vec![usize::MAX; self.n_pos];
        let mut raw: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.n_pos {
            if orbit_of[i] != usize::MAX {
                continue;
            }
            let mut o = vec![i];
            let mut j = self.theta_perm[i];
            while j != i {
                o.push(j);
                j = self.theta_perm[j];
            }
            o.sort_unstable();
            for &k in &o {
                orbit_of[k] = raw.len();
            }
            raw.push(o);
        }
        let is_beta = |o: &Vec<usize>| {
            o.iter().any(|&a| {
                o.iter()
                    .any(|&b| a < b && self.root_index.contains_key(&lattice::add(&self.roots[a], &self.roots[b])))
            })
        };
        let betas: Vec<bool> = raw.iter().map(is_beta).collect();
        let mut orbits = Vec::with_capacity(raw.len());
        for (k, o) in raw.iter().enumerate() {
            let gamma = !betas[k]
                && o.iter().any(|&g| {
                    (0..self.n_pos).any(|a| {
                        betas[orbit_of[a]]
                            && self
                                .root_index
                                .get(&lattice::sub(&self.roots[g], &self.roots[a]))
                                .is_some_and(|&b| b < self.n_pos && orbit_of[b] == orbit_of[a])
                    })
                });
            let (role, b, sign) = if betas[k] {
                (OrbitRole::A2Beta, o.len() / 2, 1)
            } else if gamma {
                (OrbitRole::A2Gamma, o.len(), -1)
            } else {
                (OrbitRole::A1, o.len(), 1)
            };
            orbits.push(Orbit {
                roots: o.clone(),
                role,
                b,
                sign,
            });
        }
        self.orbits = orbits;
        self.orbit_of = orbit_of;

        let l = self.simple.len();
        let mut seen = vec![false; l];
        let mut so = Vec::new();
        for i in 0..l {
            if seen[i] {
                continue;
            }
            let mut o = vec![i];
            seen[i] = true;
            let mut j = self.theta_nodes[i];
            while j != i {
                seen[j] = true;
                o.push(j);
                j = self.theta_nodes[j];
            }
            o.sort_unstable();
            so.push(o);
        }
        self.simple_orbits = so;
    }

    /// Orbit sum of a weight under a lattice automorphism.
    pub fn norm_with(mu: &[i64], theta1: &IMat) -> IVec {
        let mut seen: Vec<IVec> = vec![mu.to_vec()];
        let mut cur = lattice::mat_vec(theta1, mu);
        while cur != mu {
            if !seen.contains(&cur) {
                seen.push(cur.clone());
            }
            cur = lattice::mat_vec(theta1, &cur);
        }
        seen.iter().fold(vec![0; mu.len()], |acc, v| lattice::add(&acc, v))
    }

    /// Norm with respect to theta.
    pub fn norm(&self, mu: &[i64]) -> IVec {
        Self::norm_with(mu, &self.theta)
    }

    fn restricted_vector(&self, orbit: usize) -> IVec {
        let o = &self.orbits[orbit];
        let n = self.norm(&self.roots[o.roots[0]]);
        match o.role {
            OrbitRole::A1 => n,
            _ => lattice::scale(2, &n),
        }
    }

    fn build_restricted(&mut self) {
        let mut by_vec: Vec<RestrictedRoot> = Vec::new();
        for k in 0..self.orbits.len() {
            let v = self.restricted_vector(k);
            let o = &self.orbits[k];
            if let Some(r) = by_vec.iter_mut().find(|r| r.vector == v) {
                r.orbits.push(k);
                if o.role == OrbitRole::A2Beta {
                    r.coroot_rep = o.roots[0];
                }
            } else {
                by_vec.push(RestrictedRoot {
                    vector: v,
                    diagram: o.diagram(),
                    b: o.b,
                    orbits: vec![k],
                    coroot_rep: o.roots[0],
                });
            }
        }
        self.restricted = by_vec;
        self.restricted_simple = self
            .simple_orbits
            .iter()
            .map(|so| {
                let k = self.orbit_of[self.simple[so[0]]];
                self.restricted
                    .iter()
                    .position(|r| r.orbits.contains(&k))
                    .expect("simple orbit has a restricted root")
            })
            .collect();
    }

    /// Pairing of a Y*-vector with the restricted coroot of a restricted root.
    pub fn restricted_pairing(&self, mu: &[i64], restricted: usize) -> i64 {
        dot(mu, &self.coroots[self.restricted[restricted].coroot_rep])
    }

    pub fn simple_reflection_matrix(&self, i: usize) -> IMat {
        reflection_matrix(&self.simple_roots[i], &self.simple_coroots[i])
    }

    /// Longest element of the Levi attached to a set of simple nodes.
    pub fn longest_element(&self, nodes: &[usize]) -> IMat {
        let mut w = lattice::identity(self.rank);
        loop {
            let next = nodes.iter().find(|&&i| {
                let img = lattice::mat_vec(&w, &self.simple_roots[i]);
                self.root_index.get(&img).is_some_and(|&k| self.is_positive(k))
            });
            match next {
                Some(&i) => w = lattice::mat_mul(&w, &self.simple_reflection_matrix(i)),
                None => return w,
            }
        }
    }

    /// Number of positive roots sent to negative roots.
    pub fn abs_length(&self, w: &IMat) -> usize {
        self.roots[..self.n_pos]
            .iter()
            .filter(|r| {
                let img = lattice::mat_vec(w, r);
                !self.is_positive(self.root_index[&img])
            })
            .count()
    }

    pub fn try_weyl_theta(&self) -> Result<&TwistedWeylGroup> {
        let r = self.weyl.get_or_init(|| {
            let simple: Vec<IMat> = self
                .simple_orbits
                .iter()
                .map(|o| self.longest_element(o))
                .collect();
            let id = lattice::identity(self.rank);
            let mut elements = vec![id.clone()];
            let mut index = HashMap::from([(id, 0usize)]);
            let mut length = vec![0usize];
            let mut words: Vec<Vec<usize>> = vec![vec![]];
            let mut queue = VecDeque::from([0usize]);
            while let Some(w) = queue.pop_front() {
                for (g, s) in simple.iter().enumerate() {
                    let x = lattice::mat_mul(s, &elements[w]);
                    if index.contains_key(&x) {
                        continue;
                    }
                    if elements.len() >= WEYL_CAP {
                        return Err(format!("W^theta exceeds {WEYL_CAP} elements"));
                    }
                    index.insert(x.clone(), elements.len());
                    let mut word = vec![g];
                    word.extend(&words[w]);
                    words.push(word);
                    length.push(length[w] + 1);
                    queue.push_back(elements.len());
                    elements.push(x);
                }
            }
            let length_abs = elements.iter().map(|w| self.abs_length(w)).collect();
            Ok(TwistedWeylGroup {
                elements,
                index,
                simple,
                length,
                length_abs,
                words,
            })
        });
        r.as_ref().map_err(|e| Error::Cap(e.clone()))
    }

    /// The twisted Weyl group; panics if the size cap is exceeded.
    pub fn weyl_theta(&self) -> &TwistedWeylGroup {
        self.try_weyl_theta().expect("twisted Weyl group within cap")
    }

    pub fn is_theta_fixed(&self, mu: &[i64]) -> bool {
        lattice::mat_vec(&self.theta, mu) == mu
    }

    pub fn y_coords(&self, mu: &[i64]) -> Option<IVec> {
        self.y.coords(mu)
    }

    pub fn from_y_coords(&self, c: &[i64]) -> IVec {
        self.y.vector(c)
    }

    /// <mu, 2 rho-check>; the doubled exponent of q^{<mu, rho-check>}.
    pub fn height(&self, mu: &[i64]) -> i64 {
        dot(mu, &self.rho2_check)
    }

    pub fn is_dominant(&self, mu: &[i64]) -> bool {
        self.is_theta_fixed(mu) && self.simple_coroots.iter().all(|c| dot(mu, c) >= 0)
    }

    /// w . mu = w(mu + rho) - rho.
    pub fn dot_action(&self, w: usize, mu: &[i64]) -> IVec {
        let g = self.weyl_theta();
        let v: IVec = mu.iter().zip(&self.rho2).map(|(m, r)| 2 * m + r).collect();
        let wv = g.apply(w, &v);
        wv.iter().zip(&self.rho2).map(|(a, r)| (a - r) / 2).collect()
    }

    pub fn chamber_of(&self, mu: &[i64]) -> Chamber {
        let g = self.weyl_theta();
        let mut v: IVec = mu.iter().zip(&self.rho2).map(|(m, r)| 2 * m + r).collect();
        let mut w = lattice::identity(self.rank);
        loop {
            let mut moved = false;
            for (k, so) in self.simple_orbits.iter().enumerate() {
                let p = dot(&v, &self.simple_coroots[so[0]]);
                if p < 0 {
                    v = lattice::mat_vec(&g.simple[k], &v);
                    w = lattice::mat_mul(&g.simple[k], &w);
                    moved = true;
                    break;
                }
            }
            if !moved {
                break;
            }
        }
        if self
            .simple_orbits
            .iter()
            .any(|so| dot(&v, &self.simple_coroots[so[0]]) == 0)
        {
            Chamber::Zero
        } else {
            Chamber::Element(g.index[&w])
        }
    }

    /// S(mu): simple orbits whose restricted coroot vanishes on mu.
    pub fn stabilizer_set(&self, mu: &[i64]) -> Vec<usize> {
        self.simple_orbits
            .iter()
            .enumerate()
            .filter(|(_, so)| dot(mu, &self.simple_coroots[so[0]]) == 0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Simple-root coordinates of a vector in the root span.
    pub fn simple_coords(&self, mu: &[i64]) -> Option<RatVec> {
        lattice::solve_rational(&self.simple_roots, mu)
    }

    /// lambda >= mu: the difference is a nonnegative integral sum of simple roots.
    pub fn dominates(&self, lambda: &[i64], mu: &[i64]) -> bool {
        let d = lattice::sub(lambda, mu);
        if lattice::is_zero(&d) {
            return true;
        }
        match self.simple_coords(&d) {
            Some(c) => c.iter().all(|x| x.is_integer() && !x.is_negative()),
            None => false,
        }
    }

    /// Orbit of a Y*-vector under W^theta, sorted.
    pub fn weyl_orbit(&self, mu: &[i64]) -> Vec<IVec> {
        let g = self.weyl_theta();
        let set: BTreeSet<IVec> = (0..g.len()).map(|w| g.apply(w, mu)).collect();
        set.into_iter().collect()
    }

    /// The dominant element in the W^theta-orbit of a Y*-vector.
    pub fn dominant_conjugate(&self, mu: &[i64]) -> IVec {
        let g = self.weyl_theta();
        let mut v = mu.to_vec();
        loop {
            let k = self
                .simple_orbits
                .iter()
                .position(|so| dot(&v, &self.simple_coroots[so[0]]) < 0);
            match k {
                Some(k) => v = lattice::mat_vec(&g.simple[k], &v),
                None => return v,
            }
        }
    }

    /// Sort dominant weights by (height, coordinates): compatible with dominance.
    pub fn sort_weights(&self, ws: &mut [IVec]) {
        ws.sort_by(|a, b| (self.height(a), a).cmp(&(self.height(b), b)));
    }

    /// Orbit sums of the simple theta-orbits (the norms of simple roots).
    pub fn simple_norms(&self) -> Vec<IVec> {
        self.simple_orbits
            .iter()
            .map(|so| self.norm(&self.simple_roots[so[0]]))
            .collect()
    }

    /// All dominant weights below some weight in `tops` (a saturated set), sorted.
    pub fn saturate(&self, tops: &[IVec]) -> Vec<IVec> {
        let norms = self.simple_norms();
        let hs: Vec<i64> = norms.iter().map(|n| self.height(n)).collect();
        let mut out: BTreeSet<IVec> = BTreeSet::new();
        for top in tops {
            let mut stack: Vec<(usize, IVec, i64)> = vec![(0, top.clone(), self.height(top))];
            while let Some((k, v, budget)) = stack.pop() {
                if k == norms.len() {
                    if self.is_dominant(&v) {
                        out.insert(v);
                    }
                    continue;
                }
                let mut cur = v;
                let mut b = budget;
                loop {
                    stack.push((k + 1, cur.clone(), b));
                    if hs[k] <= 0 || b < hs[k] {
                        break;
                    }
                    cur = lattice::sub(&cur, &norms[k]);
                    b -= hs[k];
                }
            }
        }
        let mut v: Vec<IVec> = out.into_iter().collect();
        self.sort_weights(&mut v);
        v
    }

    /// Rational fundamental weights of Y* (only when the restricted system spans Y*).
    fn y_fundamental(&self) -> Result<Vec<RatVec>> {
        let k = self.y.dim();
        if k != self.simple_orbits.len() {
            return Err(Error::Precondition(
                "dominant weights of bounded height are infinite for a non-semisimple datum".into(),
            ));
        }
        let p: IMat = self
            .simple_orbits
            .iter()
            .map(|so| {
                self.y
                    .rows
                    .iter()
                    .map(|b| dot(b, &self.simple_coroots[so[0]]))
                    .collect()
            })
            .collect();
        let inv = lattice::rat_inverse(&lattice::rat_matrix(&p))
            .ok_or_else(|| Error::InvalidDatum("degenerate restricted pairing".into()))?;
        // column o of inv gives Y*-coordinates of the o-th fundamental weight
        Ok((0..k)
            .map(|o| {
                let mut v = vec![Rational64::zero(); self.rank];
                for (j, b) in self.y.rows.iter().enumerate() {
                    for (x, bb) in v.iter_mut().zip(b) {
                        *x += inv[j][o] * *bb;
                    }
                }
                v
            })
            .collect())
    }

    /// All dominant weights of Y* with height at most `max_height`, sorted.
    pub fn dominant_weights(&self, max_height: i64) -> Result<Vec<IVec>> {
        let fund = self.y_fundamental()?;
        let hs: Vec<Rational64> = fund.iter().map(|f| lattice::dot_rat(&self.rho2_check, f)).collect();
        if hs.iter().any(|h| !h.is_positive()) {
            return Err(Error::InvalidDatum("fundamental weight of nonpositive height".into()));
        }
        let mut out = Vec::new();
        let k = fund.len();
        let mut coeffs = vec![0i64; k];
        fn rec(
            d: &RootDatumTheta,
            fund: &[RatVec],
            hs: &[Rational64],
            k: usize,
            i: usize,
            coeffs: &mut Vec<i64>,
            used: Rational64,
            max: i64,
            out: &mut Vec<IVec>,
        ) {
            if i == k {
                let mut v = vec![Rational64::zero(); d.rank];
                for (c, f) in coeffs.iter().zip(fund) {
                    for (x, y) in v.iter_mut().zip(f) {
                        *x += *y * *c;
                    }
                }
                if v.iter().all(|x| x.is_integer()) {
                    out.push(v.iter().map(|x| x.to_integer()).collect());
                }
                return;
            }
            let mut c = 0;
            loop {
                let u = used + hs[i] * c;
                if u > Rational64::from_integer(max) {
                    break;
                }
                coeffs[i] = c;
                rec(d, fund, hs, k, i + 1, coeffs, u, max, out);
                c += 1;
            }
            coeffs[i] = 0;
        }
        rec(self, &fund, &hs, k, 0, &mut coeffs, Rational64::zero(), max_height, &mut out);
        self.sort_weights(&mut out);
        Ok(out)
    }

    /// The root datum of the connected group G_theta on Y* coordinates, with
    /// the restricted simple roots and trivial automorphism.
    pub fn twisted_degeneration(&self) -> Result<RootDatumTheta> {
        let k = self.y.dim();
        let simple_roots: IMat = self
            .restricted_simple
            .iter()
            .map(|&r| {
                self.y_coords(&self.restricted[r].vector)
                    .expect("restricted roots lie in Y*")
            })
            .collect();
        let simple_coroots: IMat = self
            .restricted_simple
            .iter()
            .map(|&r| {
                let c = &self.coroots[self.restricted[r].coroot_rep];
                self.y.rows.iter().map(|b| dot(b, c)).collect()
            })
            .collect();
        RootDatumTheta::new(
            &format!("{}_theta", self.name),
            k,
            simple_roots,
            simple_coroots,
            lattice::identity(k),
        )
    }
}

// ---------------------------------------------------------------------------
// presets

fn cartan(kind: char, n: usize) -> Result<(IMat, Vec<(usize, usize)>)> {
    let mut c = vec![vec![0i64; n]; n];
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = 2;
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let bad = || Error::UnknownPreset(format!("{kind}{n}"));
    match kind {
        'A' if n >= 1 => edges.extend((1..n).map(|i| (i - 1, i))),
        'B' | 'C' if n >= 2 => edges.extend((1..n).map(|i| (i - 1, i))),
        'D' if n >= 4 => {
            edges.extend((1..n - 1).map(|i| (i - 1, i)));
            edges.push((n - 3, n - 1));
        }
        'G' if n == 2 => edges.push((0, 1)),
        'F' if n == 4 => edges.extend([(0, 1), (1, 2), (2, 3)]),
        'E' if (6..=8).contains(&n) => {
            edges.extend([(0, 2), (2, 3), (3, 4), (1, 3)]);
            edges.extend((5..n).map(|i| (i - 1, i)));
        }
        _ => return Err(bad()),
    }
    for &(i, j) in &edges {
        c[i][j] = -1;
        c[j][i] = -1;
    }
    // C[i][j] = <alpha_j, alpha_i^v>
    match kind {
        'B' => c[n - 1][n - 2] = -2,
        'C' => c[n - 2][n - 1] = -2,
        'G' => c[0][1] = -3,
        'F' => c[2][1] = -2,
        _ => {}
    }
    Ok((c, edges))
}

fn twist_perm(kind: char, n: usize, order: usize) -> Option<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    match (kind, order) {
        (_, 1) => {}
        ('A', 2) if n >= 2 => p = (0..n).rev().collect(),
        ('D', 2) => p.swap(n - 2, n - 1),
        ('D', 3) if n == 4 => {
            p[0] = 2;
            p[2] = 3;
            p[3] = 0;
        }
        ('E', 2) if n == 6 => {
            p.swap(0, 5);
            p.swap(2, 4);
        }
        _ => return None,
    }
    Some(p)
}

/// Build a preset such as "A2", "A2.sc~2", "B2.ad", "D4~3". The lattice
/// variant refers to the dual group: `sc` (weight lattice, default) or `ad`.
pub fn build_preset(name: &str) -> Result<RootDatumTheta> {
    let unknown = || Error::UnknownPreset(name.to_string());
    let (body, twist) = match name.split_once('~') {
        Some((b, t)) => (b, t.parse::<usize>().map_err(|_| unknown())?),
        None => (name, 1),
    };
    let (ty, variant) = match body.split_once('.') {
        Some((t, v)) => (t, v),
        None => (body, "sc"),
    };
    let mut chars = ty.chars();
    let kind = chars.next().ok_or_else(unknown)?.to_ascii_uppercase();
    let n: usize = chars.as_str().parse().map_err(|_| unknown())?;
    let (c, _) = cartan(kind, n)?;
    let perm = twist_perm(kind, n, twist).ok_or_else(|| {
        Error::UnknownPreset(format!("twist of order {twist} is not compatible with {kind}{n}"))
    })?;
    let id = lattice::identity(n);
    let (simple_roots, simple_coroots) = match variant {
        "sc" => ((0..n).map(|j| (0..n).map(|i| c[i][j]).collect()).collect(), id),
        "ad" => (id, c.clone()),
        _ => return Err(unknown()),
    };
    let mut theta = vec![vec![0i64; n]; n];
    for (i, &s) in perm.iter().enumerate() {
        theta[s][i] = 1;
    }
    let canonical = if twist == 1 {
        format!("{kind}{n}.{variant}")
    } else {
        format!("{kind}{n}.{variant}~{twist}")
    };
    RootDatumTheta::new(&canonical, n, simple_roots, simple_coroots, theta)
}

/// Presets exercised by the test suites and the CLI help.
pub const PRESET_CATALOG: &[&str] = &[
    "A1", "A1.ad", "A2", "A2~2", "A3", "A3~2", "A4~2", "B2", "B3", "C2", "C3", "D4", "D4~2", "D4~3",
    "G2",
];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_a1() {
        let d = build_preset("A1").unwrap();
        assert_eq!(d.positive_roots(), &[vec![2]]);
        assert_eq!(d.restricted.len(), 1);
        assert_eq!(d.restricted[0].vector, vec![2]);
        assert_eq!(d.restricted[0].diagram, Diagram::A1);
        let g = d.weyl_theta();
        assert_eq!(g.len(), 2);
        assert_eq!(g.length_abs, vec![0, 1]);
        assert_eq!(d.dot_action(1, &[-1]), vec![-1]);
        assert_eq!(d.dot_action(1, &[-3]), vec![1]);
        assert_eq!(d.chamber_of(&[-1]), Chamber::Zero);
        assert_eq!(d.chamber_of(&[-3]), Chamber::Element(1));
        assert_eq!(d.chamber_of(&[4]), Chamber::Element(0));
        let ad = build_preset("A1.ad").unwrap();
        assert_eq!(ad.positive_roots(), &[vec![1]]);
    }

    #[test]
    fn twisted_a2() {
        let d = build_preset("A2~2").unwrap();
        assert_eq!(d.orbits.len(), 2);
        let sizes: Vec<usize> = d.orbits.iter().map(|o| o.roots.len()).collect();
        assert_eq!(sizes, vec![2, 1]);
        assert_eq!(d.orbits[0].role, OrbitRole::A2Beta);
        assert_eq!(d.orbits[0].b, 1);
        assert_eq!(d.orbits[1].role, OrbitRole::A2Gamma);
        assert_eq!(d.orbits[1].b, 1);
        let gamma = vec![1, 1];
        assert_eq!(d.norm(&d.simple_roots[0]), gamma);
        assert_eq!(d.restricted.len(), 1);
        assert_eq!(d.restricted[0].vector, vec![2, 2]);
        let g = d.weyl_theta();
        assert_eq!(g.len(), 2);
        assert_eq!(g.length, vec![0, 1]);
        assert_eq!(g.length_abs, vec![0, 3]);
        assert_eq!(g.apply(1, &gamma), vec![-1, -1]);
    }

    #[test]
    fn twisted_a3_orbits() {
        let d = build_preset("A3~2").unwrap();
        let mut sizes: Vec<usize> = d.orbits.iter().map(|o| o.roots.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 2, 2]);
        assert!(d.orbits.iter().all(|o| o.role == OrbitRole::A1));
        assert_eq!(d.weyl_theta().len(), 8);
    }

    #[test]
    fn split_a2_and_triality() {
        let d = build_preset("A2").unwrap();
        assert_eq!(d.orbits.len(), 3);
        assert_eq!(d.restricted.len(), 3);
        let g = d.weyl_theta();
        assert_eq!(g.len(), 6);
        assert_eq!(g.length, g.length_abs);
        let t = build_preset("D4~3").unwrap();
        assert_eq!(t.order, 3);
        assert_eq!(t.weyl_theta().len(), 12);
        assert!(build_preset("B2~2").is_err());
        assert!(build_preset("Q7").is_err());
    }

    #[test]
    fn rho_restricts() {
        for name in PRESET_CATALOG {
            let d = build_preset(name).unwrap();
            let sum = d
                .restricted
                .iter()
                .fold(vec![0; d.rank], |acc, r| lattice::add(&acc, &r.vector));
            // the restricted roots are twice the orbit sums for A2 and once for A1,
            // so their half-sum is rho(Psi+) when each A2 restricted root carries
            // a beta and a gamma orbit of equal norm
            assert_eq!(sum, d.rho2, "{name}");
            assert!(d.is_theta_fixed(&d.rho2));
        }
    }

    #[test]
    fn dominant_weight_sets() {
        let d = build_preset("G2").unwrap();
        let ws = d.dominant_weights(12).unwrap();
        let hs: Vec<i64> = ws.iter().map(|w| d.height(w)).collect();
        assert_eq!(hs, vec![0, 6, 10, 12]);
        let a2 = build_preset("A2").unwrap();
        let sat = a2.saturate(&[vec![2, 2]]);
        let mut want = vec![vec![0, 0], vec![1, 1], vec![3, 0], vec![0, 3], vec![2, 2]];
        a2.sort_weights(&mut want);
        assert_eq!(sat, want);
        assert!(sat.iter().all(|w| a2.dominates(&[2, 2], w)));
    }

    #[test]
    fn degeneration_of_twisted_a2_is_sl2() {
        let d = build_preset("A2~2").unwrap();
        let g = d.twisted_degeneration().unwrap();
        assert_eq!(g.rank, 1);
        assert_eq!(g.positive_roots(), &[vec![2]]);
    }

    fn check_invariants(d: &RootDatumTheta) {
        for (r, c) in d.roots.iter().zip(&d.coroots) {
            assert_eq!(dot(r, c), 2);
            for (r2, c2) in d.roots.iter().zip(&d.coroots) {
                let s = reflect(r2, r, c);
                assert!(d.root_index.contains_key(&s));
                let _ = c2;
            }
            let tr = lattice::mat_vec(&d.theta, r);
            let tc = lattice::mat_vec(&d.theta_dual, c);
            assert_eq!(d.coroots[d.root_index[&tr]], tc);
        }
        for o in &d.orbits {
            assert_eq!(d.order % o.roots.len(), 0);
        }
        let g = d.weyl_theta();
        for w in 0..g.len() {
            for r in &d.restricted {
                let img = g.apply(w, &r.vector);
                let k = d
                    .restricted
                    .iter()
                    .position(|s| s.vector == img || s.vector == lattice::neg(&img))
                    .expect("W^theta permutes restricted roots");
                assert_eq!(d.restricted[k].diagram, r.diagram);
                assert_eq!(d.restricted[k].b, r.b);
            }
            for s in 0..g.simple.len() {
                let x = lattice::mat_mul(&g.simple[s], &g.elements[w]);
                let l = g.length[g.index[&x]];
                assert!(l + 1 == g.length[w] || l == g.length[w] + 1);
            }
            assert_eq!(lattice::mat_mul(&g.elements[w], &d.theta), lattice::mat_mul(&d.theta, &g.elements[w]));
        }
    }

    #[test]
    fn catalog_invariants() {
        for name in PRESET_CATALOG {
            check_invariants(&build_preset(name).unwrap());
        }
    }

    fn arb_preset() -> impl Strategy<Value = &'static str> {
        prop::sample::select(vec!["A1", "A2", "A2~2", "A3~2", "B2", "G2", "C3", "A4~2"])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn chambers_partition_y(name in arb_preset(), seed in prop::collection::vec(-6i64..7, 4)) {
            let d = build_preset(name).unwrap();
            let k = d.y.dim();
            let mu = d.from_y_coords(&seed[..k]);
            let g = d.weyl_theta();
            let hits: Vec<usize> = (0..g.len())
                .filter(|&w| d.is_dominant(&d.dot_action(w, &mu)))
                .collect();
            match d.chamber_of(&mu) {
                Chamber::Zero => prop_assert!(hits.is_empty()),
                Chamber::Element(w) => prop_assert_eq!(hits, vec![w]),
            }
        }

        #[test]
        fn norm_is_odd_and_fixed(name in arb_preset(), seed in prop::collection::vec(-6i64..7, 4)) {
            let d = build_preset(name).unwrap();
            let mu = &seed[..d.rank];
            let n = d.norm(mu);
            prop_assert!(d.is_theta_fixed(&n));
            prop_assert_eq!(d.norm(&lattice::neg(mu)), lattice::neg(&n));
        }
    }
}
