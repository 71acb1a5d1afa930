//! Endoscopic data, transfer data (construction and validation), the
//! endoscopic partition function, branching coefficients and base change.
//!
//! Torus elements of finite order are rational cocharacters taken mod 1.
//! Characters of the torus U are integer vectors in U-coordinates; all other
//! weights are ambient X*(T) vectors.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::group_algebra::{is_invariant, GAElement, LatticeTag};
use crate::lattice::{self, dot, IMat, IVec, LatticeBasis, RatVec};
use crate::lie::{full_weyl, sign_phase, ChevalleyAdjoint, Phase, TitsElement};
use crate::partition::{character_at as char_at, nilradical_determinant, Factor, FactoredPartition, Orientation, QSpec, Side};
use crate::root_datum::{build_preset, DatumSpec, RootDatumTheta};
use crate::scalar::{CycloLaurent, CycloRational};
use crate::spherical::{check_index_set, CoeffMatrix, Spherical};
use crate::{Error, Result};

const WEYL_SEARCH_CAP: usize = 200_000;

fn phase_at(mu: &[i64], t: &[Rational64]) -> Phase {
    lattice::frac(lattice::dot_rat(mu, t))
}

/// Simple roots together with minus the highest root of each component.
pub fn extended_simple_roots(d: &RootDatumTheta) -> Vec<IVec> {
    let l = d.simple.len();
    let mut comp = vec![usize::MAX; l];
    let mut n = 0;
    for i in 0..l {
        if comp[i] != usize::MAX {
            continue;
        }
        let mut stack = vec![i];
        comp[i] = n;
        while let Some(a) = stack.pop() {
            for b in 0..l {
                if comp[b] == usize::MAX && dot(&d.simple_roots[b], &d.simple_coroots[a]) != 0 {
                    comp[b] = n;
                    stack.push(b);
                }
            }
        }
        n += 1;
    }
    let mut out = d.simple_roots.clone();
    for c in 0..n {
        // positive roots are sorted by height, so the last one in a component is highest
        let top = (0..d.n_pos)
            .filter(|&k| {
                d.root_coords[k]
                    .iter()
                    .enumerate()
                    .all(|(i, x)| *x == 0 || comp[i] == c)
            })
            .last()
            .expect("every component has a root");
        out.push(lattice::neg(&d.roots[top]));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatJson {
    pub num: Vec<i64>,
    pub den: Vec<i64>,
}

impl RatJson {
    pub fn from_vec(v: &[Rational64]) -> Self {
        RatJson {
            num: v.iter().map(|x| *x.numer()).collect(),
            den: v.iter().map(|x| *x.denom()).collect(),
        }
    }

    pub fn to_vec(&self) -> Result<RatVec> {
        if self.num.len() != self.den.len() || self.den.iter().any(|x| *x == 0) {
            return Err(Error::Parse("rational vector needs matching nonzero denominators".into()));
        }
        Ok(self.num.iter().zip(&self.den).map(|(a, b)| Rational64::new(*a, *b)).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatumRef {
    Preset(String),
    Spec(DatumSpec),
}

impl DatumRef {
    pub fn resolve(&self) -> Result<RootDatumTheta> {
        match self {
            DatumRef::Preset(p) => build_preset(p),
            DatumRef::Spec(s) => RootDatumTheta::from_spec(s),
        }
    }

    pub fn of(d: &RootDatumTheta) -> Self {
        match build_preset(&d.name) {
            Ok(p) if p.spec().simple_roots == d.simple_roots && p.theta == d.theta => {
                DatumRef::Preset(d.name.clone())
            }
            _ => DatumRef::Spec(d.spec().clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndoscopicDatumJson {
    pub datum: DatumRef,
    pub s: RatJson,
    pub w: IMat,
    pub t_w: RatJson,
}

/// H-hat = C(s)^0 with xi(theta_H) = w-dot theta, w-dot = t_w n(w).
#[derive(Debug, Clone)]
pub struct EndoscopicDatum {
    pub datum: RootDatumTheta,
    pub s: RatVec,
    pub w: IMat,
    pub t_w: RatVec,
    /// Root indices of H-hat, sorted.
    pub roots_h: Vec<usize>,
    /// w theta on X*.
    pub theta1: IMat,
    /// Permutation of root indices induced by w theta.
    pub perm1: Vec<usize>,
    /// X*(T_1) = X*^{w theta}.
    pub t1: LatticeBasis,
}

impl EndoscopicDatum {
    pub fn new(datum: RootDatumTheta, s: RatVec, w: IMat, t_w: RatVec) -> Result<Self> {
        let d = &datum;
        let bad = |m: &str| Err(Error::InvalidDatum(m.to_string()));
        if s.len() != d.rank || t_w.len() != d.rank {
            return bad("torus elements must have length rank");
        }
        if w.len() != d.rank || w.iter().any(|r| r.len() != d.rank) {
            return bad("w must be a square matrix of size rank");
        }
        if d.roots.iter().any(|r| !d.root_index.contains_key(&lattice::mat_vec(&w, r))) {
            return bad("w does not permute the roots");
        }
        let word = crate::lie::reduced_word(d, &w);
        let prod = word.iter().fold(lattice::identity(d.rank), |acc, &i| {
            lattice::mat_mul(&acc, &d.simple_reflection_matrix(i))
        });
        if prod != w {
            return bad("w is not in the Weyl group");
        }
        let ext = extended_simple_roots(d);
        let ext_set: BTreeSet<&IVec> = ext.iter().collect();
        if ext.iter().any(|a| !ext_set.contains(&lattice::mat_vec(&w, a))) {
            return bad("w does not preserve the extended Dynkin diagram");
        }
        let theta1 = lattice::mat_mul(&w, &d.theta);
        if lattice::matrix_order(&theta1, 100_000).is_none() {
            return bad("w theta does not have finite order");
        }
        let perm1: Vec<usize> = d
            .roots
            .iter()
            .map(|r| d.root_index[&lattice::mat_vec(&theta1, r)])
            .collect();
        let roots_h: Vec<usize> = (0..d.roots.len())
            .filter(|&k| lattice::dot_rat(&d.roots[k], &s).is_integer())
            .collect();
        let hset: BTreeSet<usize> = roots_h.iter().copied().collect();
        for &a in &roots_h {
            if !hset.contains(&perm1[a]) {
                return bad("roots of H are not stable under w theta");
            }
            for &b in &roots_h {
                if let Some(&c) = d.root_index.get(&lattice::add(&d.roots[a], &d.roots[b])) {
                    if !hset.contains(&c) {
                        return bad("roots of H are not closed");
                    }
                }
            }
            if lattice::is_zero(&RootDatumTheta::norm_with(&d.roots[a], &theta1)) {
                return bad("a root of H has vanishing w theta norm");
            }
        }
        let t1 = lattice::fixed_lattice(&theta1);
        Ok(EndoscopicDatum {
            s: lattice::frac_vec(&s),
            t_w: lattice::frac_vec(&t_w),
            w,
            roots_h,
            theta1,
            perm1,
            t1,
            datum,
        })
    }

    pub fn from_json_value(j: &EndoscopicDatumJson) -> Result<Self> {
        Self::new(j.datum.resolve()?, j.s.to_vec()?, j.w.clone(), j.t_w.to_vec()?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: EndoscopicDatumJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&j)
    }

    pub fn to_json_value(&self) -> EndoscopicDatumJson {
        EndoscopicDatumJson {
            datum: DatumRef::of(&self.datum),
            s: RatJson::from_vec(&self.s),
            w: self.w.clone(),
            t_w: RatJson::from_vec(&self.t_w),
        }
    }

    /// s = 1, w = 1: H = G.
    pub fn identity(d: &RootDatumTheta) -> Result<Self> {
        let z = vec![Rational64::zero(); d.rank];
        Self::new(d.clone(), z.clone(), lattice::identity(d.rank), z)
    }

    pub fn w_dot(&self) -> TitsElement {
        TitsElement::new(self.t_w.clone(), self.w.clone())
    }

    pub fn in_h(&self, k: usize) -> bool {
        self.roots_h.binary_search(&k).is_ok()
    }

    pub fn norm1(&self, mu: &[i64]) -> IVec {
        RootDatumTheta::norm_with(mu, &self.theta1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TitsJson {
    pub t: RatJson,
    pub w: IMat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferDataJson {
    pub u_dim: usize,
    pub iota_star: IMat,
    pub phi_star: IMat,
    pub epsilon: RatJson,
    pub adapted: Vec<IVec>,
    pub b1: Vec<IVec>,
    pub w_dot: TitsJson,
}

/// The data (U, B(w theta), B_1, iota, phi, epsilon, w-dot). Characters of
/// T_1 and S enter through coordinates in `endo.t1` and `datum.y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferData {
    pub u_dim: usize,
    /// u_dim x dim X*(T_1): iota^* in coordinates.
    pub iota_star: IMat,
    /// u_dim x dim Y*: phi^* in coordinates.
    pub phi_star: IMat,
    pub epsilon: RatVec,
    /// Positive roots of the adapted system, as root indices.
    pub adapted: Vec<usize>,
    /// Positive roots of the theta-stable system.
    pub b1: Vec<usize>,
    pub w_dot: TitsElement,
}

impl TransferData {
    pub fn to_json_value(&self, d: &RootDatumTheta) -> TransferDataJson {
        TransferDataJson {
            u_dim: self.u_dim,
            iota_star: self.iota_star.clone(),
            phi_star: self.phi_star.clone(),
            epsilon: RatJson::from_vec(&self.epsilon),
            adapted: self.adapted.iter().map(|&k| d.roots[k].clone()).collect(),
            b1: self.b1.iter().map(|&k| d.roots[k].clone()).collect(),
            w_dot: TitsJson {
                t: RatJson::from_vec(&self.w_dot.t),
                w: self.w_dot.w.clone(),
            },
        }
    }

    pub fn from_json_value(d: &RootDatumTheta, j: &TransferDataJson) -> Result<Self> {
        let idx = |v: &IVec| {
            d.root_index
                .get(v)
                .copied()
                .ok_or_else(|| Error::Parse(format!("{v:?} is not a root")))
        };
        let mut adapted: Vec<usize> = j.adapted.iter().map(idx).collect::<Result<_>>()?;
        let mut b1: Vec<usize> = j.b1.iter().map(idx).collect::<Result<_>>()?;
        adapted.sort_unstable();
        b1.sort_unstable();
        Ok(TransferData {
            u_dim: j.u_dim,
            iota_star: j.iota_star.clone(),
            phi_star: j.phi_star.clone(),
            epsilon: lattice::frac_vec(&j.epsilon.to_vec()?),
            adapted,
            b1,
            w_dot: TitsElement::new(j.w_dot.t.to_vec()?, j.w_dot.w.clone()),
        })
    }

    pub fn from_json(d: &RootDatumTheta, text: &str) -> Result<Self> {
        let j: TransferDataJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(d, &j)
    }
}

fn mat_vec_shaped(m: &IMat, v: &[i64], rows: usize) -> IVec {
    if rows == 0 {
        return vec![];
    }
    lattice::mat_vec(m, v)
}

/// A w-dot theta orbit of roots with the eigenvalue of (w-dot theta)^|O| on
/// a root vector.
#[derive(Debug, Clone)]
pub struct Orbit1 {
    pub roots: Vec<usize>,
    pub phase: Phase,
    pub norm: IVec,
}

/// Orbits of w-dot theta on all roots with their cycle eigenvalues.
pub fn twisted_orbits(endo: &EndoscopicDatum, w_dot: &TitsElement) -> Result<Vec<Orbit1>> {
    let d = &endo.datum;
    if w_dot.w != endo.w {
        return Err(Error::Precondition("w-dot does not lie over w".into()));
    }
    let chev = if w_dot.is_torus() {
        None
    } else {
        Some(ChevalleyAdjoint::new(d)?)
    };
    let mut seen = vec![false; d.roots.len()];
    let mut out = Vec::new();
    for k in 0..d.roots.len() {
        if seen[k] {
            continue;
        }
        let mut roots = vec![];
        let mut j = k;
        let mut phase = Rational64::zero();
        loop {
            seen[j] = true;
            roots.push(j);
            match &chev {
                Some(c) => {
                    let (p, img) = c.twisted_on_root(w_dot, j);
                    debug_assert_eq!(img, endo.perm1[j]);
                    phase += p;
                }
                None => {}
            }
            j = endo.perm1[j];
            if j == k {
                break;
            }
        }
        let norm = roots.iter().fold(vec![0; d.rank], |acc, &r| lattice::add(&acc, &d.roots[r]));
        if chev.is_none() {
            let pos = if d.is_positive(k) { k } else { d.neg_index(k) };
            phase = sign_phase(d.orbits[d.orbit_of[pos]].sign) + lattice::dot_rat(&norm, &w_dot.t);
        }
        out.push(Orbit1 {
            roots,
            phase: lattice::frac(phase),
            norm,
        });
    }
    Ok(out)
}

/// The standard theta-stable positive system.
pub fn standard_positive(d: &RootDatumTheta) -> Vec<usize> {
    (0..d.n_pos).collect()
}

/// Every positive root has N_1 alpha = 0 or its whole w theta orbit positive.
pub fn is_adapted(endo: &EndoscopicDatum, positive: &[usize]) -> bool {
    let d = &endo.datum;
    let set: BTreeSet<usize> = positive.iter().copied().collect();
    if set.len() != d.n_pos || set.iter().any(|&k| set.contains(&d.neg_index(k))) {
        return false;
    }
    set.iter().all(|&k| {
        if lattice::is_zero(&endo.norm1(&d.roots[k])) {
            return true;
        }
        let mut j = endo.perm1[k];
        while j != k {
            if !set.contains(&j) {
                return false;
            }
            j = endo.perm1[j];
        }
        true
    })
}

/// An adapted positive system cut out by a functional h1 + h2/M with h1
/// fixed by w theta; the first working pair in a fixed enumeration is used.
pub fn adapted_positive_system(endo: &EndoscopicDatum) -> Result<Vec<usize>> {
    let d = &endo.datum;
    let n = d.rank;
    // w theta acts on X_* by the inverse transpose; its fixed vectors pair
    // constantly along w theta orbits of roots
    let inv = lattice::rat_inverse(&lattice::rat_matrix(&endo.theta1)).expect("invertible");
    let dual: IMat = (0..n).map(|a| (0..n).map(|b| inv[b][a].to_integer()).collect()).collect();
    let fixed = lattice::fixed_lattice(&dual);
    let roots = &d.roots[..d.n_pos];
    let nonzero: Vec<&IVec> = roots.iter().filter(|r| !lattice::is_zero(&endo.norm1(r))).collect();
    let h1 = search_vector(fixed.dim(), 6, |c| {
        let h = fixed.vector(c);
        nonzero.iter().all(|r| dot(r, &h) != 0)
    })
    .map(|c| fixed.vector(&c))
    .ok_or_else(|| Error::Cap("no generic fixed functional found".into()))?;
    let big = 1 + roots.iter().map(|r| dot(r, &h1).abs()).max().unwrap_or(0);
    let h = search_vector(n, 6, |h2| {
        let h: IVec = (0..n).map(|a| big * 1000 * h1[a] + h2[a]).collect();
        roots.iter().all(|r| dot(r, &h) != 0)
    })
    .map(|h2| (0..n).map(|a| big * 1000 * h1[a] + h2[a]).collect::<IVec>())
    .ok_or_else(|| Error::Cap("no generic functional found".into()))?;
    let mut out: Vec<usize> = (0..d.roots.len()).filter(|&k| dot(&d.roots[k], &h) > 0).collect();
    out.sort_unstable();
    debug_assert!(is_adapted(endo, &out));
    Ok(out)
}

/// First integer vector (by max-norm, then lexicographically) satisfying `ok`.
fn search_vector(dim: usize, max_bound: i64, ok: impl Fn(&[i64]) -> bool) -> Option<IVec> {
    if dim == 0 {
        return if ok(&[]) { Some(vec![]) } else { None };
    }
    for b in 0..=max_bound {
        let side = (2 * b + 1) as usize;
        let total = side.pow(dim as u32);
        for code in 0..total {
            let mut c = code;
            let v: IVec = (0..dim)
                .map(|_| {
                    let x = (c % side) as i64 - b;
                    c /= side;
                    x
                })
                .collect();
            if v.iter().map(|x| x.abs()).max().unwrap_or(0) == b && ok(&v) {
                return Some(v);
            }
        }
    }
    None
}

/// Pass/fail of one validation check with a short explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass() -> Self {
        CheckResult {
            passed: true,
            detail: "ok".into(),
        }
    }

    fn fail(s: impl Into<String>) -> Self {
        CheckResult {
            passed: false,
            detail: s.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub shapes: CheckResult,
    pub adapted: CheckResult,
    pub conjugacy_proxy: CheckResult,
    pub regularity: CheckResult,
    pub partition_identity: CheckResult,
    pub pinned: CheckResult,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        [
            &self.shapes,
            &self.adapted,
            &self.conjugacy_proxy,
            &self.regularity,
            &self.partition_identity,
            &self.pinned,
        ]
        .iter()
        .all(|c| c.passed)
    }
}

/// Linear factors (1 - exp(2 pi i phase) z e^weight) over rational weights;
/// the sorted multiset is a canonical form of a product of such binomials.
type Linear = (RatVec, Phase);

fn push_linear(out: &mut Vec<Linear>, weight: &[i64], phase: Phase, k: usize) {
    let kk = k as i64;
    let w: RatVec = weight.iter().map(|x| Rational64::new(*x, kk)).collect();
    for j in 0..kk {
        out.push((w.clone(), lattice::frac((phase + Rational64::from_integer(j)) / kk)));
    }
}

/// Eigenvalues of a finite-order integer matrix as phases with multiplicity.
pub fn eigen_phases(m: &IMat) -> Vec<Phase> {
    let n = m.len();
    if n == 0 {
        return vec![];
    }
    let order = lattice::matrix_order(m, 100_000).expect("finite order");
    let mut traces = Vec::with_capacity(order);
    let mut p = lattice::identity(n);
    for _ in 0..order {
        traces.push((0..n).map(|i| p[i][i]).sum::<i64>());
        p = lattice::mat_mul(m, &p);
    }
    let ord = order as i64;
    let mut out = Vec::new();
    for j in 0..ord {
        let mut acc = CycloRational::zero();
        for (k, tr) in traces.iter().enumerate() {
            let z = CycloRational::exp_2pi_i(lattice::frac(Rational64::new(-j * k as i64, ord)));
            acc = &acc + &(&CycloRational::from_int(*tr) * &z);
        }
        let mult = acc.reduced();
        let r = mult
            .as_rational()
            .expect("eigenvalue multiplicities are rational")
            .clone();
        let r = r / num_bigint::BigInt::from(ord);
        let k: i64 = r.to_integer().try_into().expect("small multiplicity");
        for _ in 0..k {
            out.push(Rational64::new(j, ord));
        }
    }
    out
}

/// Working state for one (endoscopic datum, transfer data) pair.
pub struct Endoscopy<'a> {
    pub endo: &'a EndoscopicDatum,
    pub data: &'a TransferData,
    /// The datum of H-hat with the twist w theta and positive system from
    /// the adapted one; its Y* is X*(T_1).
    pub h: RootDatumTheta,
    pub orbits1: Vec<Orbit1>,
    orbit1_of: Vec<usize>,
    /// A functional on X*(U) positive on every iota^* N_1 alpha, alpha adapted-positive.
    pub grading: IVec,
    iota_inv: Vec<RatVec>,
    series: Mutex<Option<(i64, Arc<GAElement>)>>,
}

impl<'a> Endoscopy<'a> {
    pub fn new(endo: &'a EndoscopicDatum, data: &'a TransferData) -> Result<Self> {
        check_shapes(endo, data)?;
        let d = &endo.datum;
        if !is_adapted(endo, &data.adapted) {
            return Err(Error::Precondition("positive system is not adapted".into()));
        }
        let orbits1 = twisted_orbits(endo, &data.w_dot)?;
        let mut orbit1_of = vec![0; d.roots.len()];
        for (i, o) in orbits1.iter().enumerate() {
            for &r in &o.roots {
                orbit1_of[r] = i;
            }
        }
        let h = h_datum(endo, &data.adapted)?;
        let iota_inv = if data.u_dim == 0 {
            vec![]
        } else {
            lattice::rat_inverse(&lattice::rat_matrix(&data.iota_star))
                .ok_or_else(|| Error::Precondition("iota^* is not invertible".into()))?
        };
        let mut e = Endoscopy {
            endo,
            data,
            h,
            orbits1,
            orbit1_of,
            grading: vec![],
            iota_inv,
            series: Mutex::new(None),
        };
        let vs: Vec<IVec> = data
            .adapted
            .iter()
            .map(|&k| e.iota(&endo.norm1(&d.roots[k])))
            .filter(|v| !lattice::is_zero(v))
            .collect();
        e.grading = search_vector(data.u_dim, 12, |g| vs.iter().all(|v| dot(v, g) > 0))
            .ok_or_else(|| Error::Precondition("no grading is positive on the adapted norms".into()))?;
        Ok(e)
    }

    /// iota^* of a character of T_1 (ambient, w theta fixed).
    pub fn iota(&self, mu: &[i64]) -> IVec {
        let c = self.endo.t1.coords(mu).expect("weight is fixed by w theta");
        mat_vec_shaped(&self.data.iota_star, &c, self.data.u_dim)
    }

    /// phi^* of a character of S (ambient, theta fixed).
    pub fn phi(&self, nu: &[i64]) -> IVec {
        let c = self.endo.datum.y_coords(nu).expect("weight is fixed by theta");
        mat_vec_shaped(&self.data.phi_star, &c, self.data.u_dim)
    }

    /// Preimage under iota^* as an ambient T_1 character, if integral.
    pub fn iota_preimage(&self, x: &[i64]) -> Option<IVec> {
        let k = self.endo.t1.dim();
        let mut c = Vec::with_capacity(k);
        for i in 0..k {
            let v: Rational64 = (0..x.len())
                .map(|j| self.iota_inv[i][j] * Rational64::from_integer(x[j]))
                .sum();
            if !v.is_integer() {
                return None;
            }
            c.push(v.to_integer());
        }
        Some(self.endo.t1.vector(&c))
    }

    fn orbit_factors(&self, roots: &[usize]) -> Vec<Factor> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &r in roots {
            let o = self.orbit1_of[r];
            if seen.insert(o) {
                let ob = &self.orbits1[o];
                out.push(Factor::new(ob.phase, ob.roots.len() as i64, self.iota(&ob.norm), 1));
            }
        }
        out
    }

    /// iota^* D(G, R, w-dot theta, E, q) for a w theta stable root set.
    pub fn twisted_determinant(&self, roots: &[usize]) -> FactoredPartition {
        FactoredPartition::new(self.data.u_dim, self.orbit_factors(roots), Orientation::Determinant)
    }

    /// phi_epsilon^* D(G, R, theta, E, q) for a theta-stable root set.
    pub fn theta_determinant(&self, roots: &[usize]) -> FactoredPartition {
        let d = &self.endo.datum;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &r in roots {
            let pos = if d.is_positive(r) { r } else { d.neg_index(r) };
            let mut orbit = vec![r];
            let mut j = d.theta_perm[r];
            while j != r {
                orbit.push(j);
                j = d.theta_perm[j];
            }
            let key = *orbit.iter().min().unwrap();
            if !seen.insert(key) {
                continue;
            }
            let norm = d.norm(&d.roots[r]);
            let phase = sign_phase(d.orbits[d.orbit_of[pos]].sign) + phase_at(&norm, &self.data.epsilon);
            out.push(Factor::new(phase, orbit.len() as i64, self.phi(&norm), 1));
        }
        FactoredPartition::new(self.data.u_dim, out, Orientation::Determinant)
    }

    fn psi_wtheta(&self, negative: bool) -> Vec<usize> {
        let d = &self.endo.datum;
        self.data
            .adapted
            .iter()
            .filter(|&&k| !lattice::is_zero(&self.endo.norm1(&d.roots[k])))
            .map(|&k| if negative { d.neg_index(k) } else { k })
            .collect()
    }

    fn psi_phi_theta(&self, zero: bool, negative: bool) -> Vec<usize> {
        let d = &self.endo.datum;
        self.data
            .b1
            .iter()
            .filter(|&&k| lattice::is_zero(&self.phi(&d.norm(&d.roots[k]))) == zero)
            .map(|&k| if negative { d.neg_index(k) } else { k })
            .collect()
    }

    /// The endoscopic partition function, on the negative roots of the
    /// adapted system outside H with nonzero N_1-norm.
    pub fn endoscopic_partition(&self) -> FactoredPartition {
        let d = &self.endo.datum;
        let roots: Vec<usize> = self
            .psi_wtheta(true)
            .into_iter()
            .filter(|&k| !self.endo.in_h(k))
            .collect();
        let _ = d;
        self.twisted_determinant(&roots).inverse()
    }

    /// p_mu certified down to grading -depth.
    pub fn partition_series(&self, depth: i64) -> Result<Arc<GAElement>> {
        let depth = depth.max(0);
        let mut cache = self.series.lock().unwrap();
        if let Some((k, s)) = cache.as_ref() {
            if *k >= depth {
                return Ok(s.clone());
            }
        }
        let s = Arc::new(self.endoscopic_partition().expand_series(
            LatticeTag::U,
            QSpec::One,
            &self.grading,
            depth,
        )?);
        *cache = Some((depth, s.clone()));
        Ok(s)
    }

    /// d_0 = phi_epsilon^* D(G, -Psi_{phi,theta,0}, theta, E, 1).
    pub fn d0(&self) -> Result<CycloRational> {
        let det = self.theta_determinant(&self.psi_phi_theta(true, true));
        let mut acc = CycloRational::one();
        for f in &det.factors {
            debug_assert!(lattice::is_zero(&f.weight));
            let v = &CycloRational::one() - &f.zeta_value();
            for _ in 0..f.mult {
                acc = &acc * &v;
            }
        }
        if acc.is_zero() {
            return Err(Error::Arithmetic("d_0 vanishes: the data are not regular".into()));
        }
        Ok(acc)
    }

    pub fn validate(&self) -> ValidationReport {
        ValidationReport {
            shapes: CheckResult::pass(),
            adapted: CheckResult::pass(),
            conjugacy_proxy: self.check_conjugacy(),
            regularity: self.check_regularity(),
            partition_identity: self.check_partition_identity(),
            pinned: self.check_pinned(),
        }
    }

    fn check_regularity(&self) -> CheckResult {
        let d = &self.endo.datum;
        for r in &d.restricted {
            if lattice::is_zero(&self.phi(&r.vector)) && phase_at(&r.vector, &self.data.epsilon).is_zero() {
                return CheckResult::fail(format!(
                    "restricted root {:?} is trivial on epsilon phi(U)",
                    r.vector
                ));
            }
        }
        CheckResult::pass()
    }

    fn check_partition_identity(&self) -> CheckResult {
        for negative in [false, true] {
            let lhs = self.theta_determinant(&self.psi_phi_theta(false, negative));
            let rhs = self.twisted_determinant(&self.psi_wtheta(negative));
            let ok = match (
                lhs.expand_exact(LatticeTag::U, QSpec::Q),
                rhs.expand_exact(LatticeTag::U, QSpec::Q),
            ) {
                (Ok(a), Ok(b)) => a.sub(&b).is_zero(),
                _ => false,
            };
            if !ok {
                let side = if negative { "negative" } else { "positive" };
                return CheckResult::fail(format!("{side} roots: {lhs} != {rhs}"));
            }
        }
        CheckResult::pass()
    }

    fn check_conjugacy(&self) -> CheckResult {
        let d = &self.endo.datum;
        let all: Vec<usize> = (0..d.roots.len()).collect();
        let mut lhs: Vec<Linear> = eigen_phases(&self.endo.theta1)
            .into_iter()
            .map(|p| (vec![Rational64::zero(); self.data.u_dim], p))
            .collect();
        for f in &self.twisted_determinant(&all).factors {
            for _ in 0..f.mult {
                push_linear(&mut lhs, &f.weight, f.zeta, f.q_pow as usize);
            }
        }
        let mut rhs: Vec<Linear> = eigen_phases(&d.theta)
            .into_iter()
            .map(|p| (vec![Rational64::zero(); self.data.u_dim], p))
            .collect();
        for f in &self.theta_determinant(&all).factors {
            for _ in 0..f.mult {
                push_linear(&mut rhs, &f.weight, f.zeta, f.q_pow as usize);
            }
        }
        lhs.sort();
        rhs.sort();
        if lhs == rhs {
            CheckResult::pass()
        } else {
            CheckResult::fail("characteristic polynomials on the adjoint representation differ")
        }
    }

    /// iota^* D_H from w-dot theta equals the pinned determinant of the H datum.
    fn check_pinned(&self) -> CheckResult {
        let d = &self.endo.datum;
        let pos_h: Vec<usize> = self.data.adapted.iter().copied().filter(|&k| self.endo.in_h(k)).collect();
        let actual = self.twisted_determinant(&pos_h);
        let pinned = nilradical_determinant(&self.h, Side::Positive);
        let mapped = FactoredPartition::new(
            self.data.u_dim,
            pinned
                .factors
                .iter()
                .map(|f| Factor::new(f.zeta, f.q_pow, self.iota(&f.weight), f.mult))
                .collect(),
            Orientation::Determinant,
        );
        let _ = d;
        if actual == mapped {
            CheckResult::pass()
        } else {
            CheckResult::fail(format!("w-dot theta is not pinned on H: {actual} vs {mapped}"))
        }
    }

    /// Sum of coeff(f, nu) nu(epsilon) e^{phi^* nu} on X*(U).
    pub fn restrict_character(&self, f: &GAElement) -> Result<GAElement> {
        let d = &self.endo.datum;
        if !f.is_exact() {
            return Err(Error::Precondition("restriction needs an exact element".into()));
        }
        if !is_invariant(d, f) {
            return Err(Error::Precondition("restriction needs a W^theta-invariant element".into()));
        }
        let mut out = GAElement::zero(LatticeTag::U, self.data.u_dim);
        for (nu, c) in f.terms() {
            out.add_term(&self.phi(nu), &c.scale(&char_at(nu, &self.data.epsilon)));
        }
        if let Some(bad) = out.support().into_iter().find(|x| self.iota_preimage(x).is_none()) {
            return Err(Error::Mismatch(format!("restriction escapes iota^* X*(T_1) at {bad:?}")));
        }
        Ok(out)
    }

    /// An element on X*(U) supported on iota^* X*(T_1), as an H-side element.
    pub fn pull_to_h(&self, f: &GAElement) -> Result<GAElement> {
        let mut out = GAElement::zero(LatticeTag::Y, self.endo.datum.rank);
        for (x, c) in f.terms() {
            let mu = self
                .iota_preimage(x)
                .ok_or_else(|| Error::Mismatch(format!("{x:?} is not in iota^* X*(T_1)")))?;
            out.add_term(&mu, c);
        }
        Ok(out)
    }

    /// An H-side element pushed to X*(U).
    pub fn push_from_h(&self, f: &GAElement) -> GAElement {
        let mut out = GAElement::zero(LatticeTag::U, self.data.u_dim);
        for (mu, c) in f.terms() {
            out.add_term(&self.iota(mu), c);
        }
        out
    }

    fn branching_row(&self, lambda: &[i64], cols: &[IVec], d0_inv: &CycloRational) -> Result<Vec<(usize, CycloLaurent)>> {
        let d = &self.endo.datum;
        let g = d.weyl_theta();
        let shifted: Vec<(i64, IVec, IVec)> = (0..g.len())
            .map(|w| {
                let wl = d.dot_action(w, lambda);
                (g.sign(w), self.phi(&wl), wl)
            })
            .collect();
        let targets: Vec<IVec> = cols.iter().map(|mu| self.iota(mu)).collect();
        let mut depth = 0;
        for t in &targets {
            for (_, p, _) in &shifted {
                let h = dot(&lattice::sub(t, p), &self.grading);
                depth = depth.max(-h);
            }
        }
        let series = self.partition_series(depth)?;
        let mut row = Vec::new();
        for (j, t) in targets.iter().enumerate() {
            let mut acc = CycloRational::zero();
            for (sign, p, wl) in &shifted {
                let x = lattice::sub(t, p);
                if dot(&x, &self.grading) > 0 {
                    continue;
                }
                let c = series.coeff(&x)?.coeff(0);
                if c.is_zero() {
                    continue;
                }
                let term = &c * &char_at(wl, &self.data.epsilon);
                acc = if *sign == 1 { &acc + &term } else { &acc - &term };
            }
            if !acc.is_zero() {
                row.push((j, CycloLaurent::constant(&acc * d0_inv)));
            }
        }
        Ok(row)
    }

    /// m(lambda, mu) for G-dominant lambda and H-dominant mu.
    pub fn branching_matrix(&self, index_g: &[IVec], index_h: &[IVec]) -> Result<CoeffMatrix> {
        let d = &self.endo.datum;
        if let Some(bad) = index_g.iter().find(|v| !d.is_dominant(v)) {
            return Err(Error::Precondition(format!("{bad:?} is not G-dominant")));
        }
        if let Some(bad) = index_h.iter().find(|v| !self.h.is_dominant(v)) {
            return Err(Error::Precondition(format!("{bad:?} is not H-dominant")));
        }
        let d0_inv = self.d0()?.inv()?;
        let mut m = CoeffMatrix::zero(index_g.to_vec(), index_h.to_vec());
        for (i, lambda) in index_g.iter().enumerate() {
            for (j, c) in self.branching_row(lambda, index_h, &d0_inv)? {
                m.set(i, j, c);
            }
        }
        Ok(m)
    }

    /// H-dominant weights occurring in the restrictions of the tau_lambda,
    /// saturated for H.
    pub fn h_index_for(&self, index_g: &[IVec]) -> Result<Vec<IVec>> {
        let sph = Spherical::new(&self.endo.datum)?;
        let mut tops = BTreeSet::new();
        for lambda in index_g {
            let r = self.pull_to_h(&self.restrict_character(&sph.tau(lambda)?)?)?;
            for mu in r.support() {
                if self.h.is_dominant(&mu) {
                    tops.insert(mu);
                }
            }
        }
        let tops: Vec<IVec> = tops.into_iter().collect();
        Ok(self.h.saturate(&tops))
    }

    /// B = g m t^H, checked against restrict(f-hat_lambda) = sum B f-hat^H.
    pub fn base_change_matrix(&self, index_g: &[IVec], index_h: &[IVec]) -> Result<CoeffMatrix> {
        let d = &self.endo.datum;
        let ig = check_index_set(d, index_g)?;
        let ih = check_index_set(&self.h, index_h)?;
        let needed = self.h_index_for(&ig)?;
        if let Some(bad) = needed.iter().find(|mu| !ih.contains(mu)) {
            return Err(Error::Precondition(format!("H index set misses {bad:?}")));
        }
        let sg = Spherical::new(d)?;
        let sh = Spherical::new(&self.h)?;
        let g = sg.geometric_satake(&ig)?;
        let m = self.branching_matrix(&ig, &ih)?;
        let th = sh.kato_lusztig_matrix(&ih)?;
        let b = g.mul(&m)?.mul(&th)?;
        let fh: Vec<GAElement> = ih
            .iter()
            .map(|mu| Ok(self.push_from_h(&sh.macdonald_fhat(mu)?)))
            .collect::<Result<_>>()?;
        for (i, lambda) in ig.iter().enumerate() {
            let lhs = self.restrict_character(&sg.macdonald_fhat(lambda)?)?;
            let mut rhs = GAElement::zero(LatticeTag::U, self.data.u_dim);
            for (j, f) in fh.iter().enumerate() {
                let c = b.get(i, j);
                if !c.is_zero() {
                    rhs = rhs.add(&f.scale(&c));
                }
            }
            if !lhs.sub(&rhs).is_zero() {
                return Err(Error::Mismatch(format!("base change cross-check fails at {lambda:?}")));
            }
        }
        Ok(b)
    }
}

fn check_shapes(endo: &EndoscopicDatum, data: &TransferData) -> Result<()> {
    let d = &endo.datum;
    let u = data.u_dim;
    let bad = |m: &str| Err(Error::Precondition(m.to_string()));
    let k1 = endo.t1.dim();
    if data.iota_star.len() != u || data.iota_star.iter().any(|r| r.len() != k1) {
        return bad("iota^* has the wrong shape");
    }
    if k1 != u {
        return bad("iota^* must be square");
    }
    if data.phi_star.len() != u || data.phi_star.iter().any(|r| r.len() != d.y.dim()) {
        return bad("phi^* has the wrong shape");
    }
    if data.epsilon.len() != d.rank || data.w_dot.t.len() != d.rank {
        return bad("torus elements have the wrong length");
    }
    if data.w_dot.w != endo.w {
        return bad("w-dot does not lie over w");
    }
    let b1: BTreeSet<usize> = data.b1.iter().copied().collect();
    if b1 != (0..d.n_pos).collect() {
        return bad("B_1 must be the standard theta-stable positive system");
    }
    Ok(())
}

/// The datum of H-hat from the adapted positive system.
pub fn h_datum(endo: &EndoscopicDatum, adapted: &[usize]) -> Result<RootDatumTheta> {
    let d = &endo.datum;
    let pos: Vec<usize> = adapted.iter().copied().filter(|&k| endo.in_h(k)).collect();
    let set: BTreeSet<&IVec> = pos.iter().map(|&k| &d.roots[k]).collect();
    let simple: Vec<usize> = pos
        .iter()
        .copied()
        .filter(|&k| {
            !pos.iter()
                .any(|&a| set.contains(&lattice::sub(&d.roots[k], &d.roots[a])))
        })
        .collect();
    RootDatumTheta::new(
        &format!("H({})", d.name),
        d.rank,
        simple.iter().map(|&k| d.roots[k].clone()).collect(),
        simple.iter().map(|&k| d.coroots[k].clone()).collect(),
        endo.theta1.clone(),
    )
}

pub fn validate_transfer_data(endo: &EndoscopicDatum, data: &TransferData) -> ValidationReport {
    let fail_all = |shapes: CheckResult, adapted: CheckResult| ValidationReport {
        shapes,
        adapted,
        conjugacy_proxy: CheckResult::fail("not checked"),
        regularity: CheckResult::fail("not checked"),
        partition_identity: CheckResult::fail("not checked"),
        pinned: CheckResult::fail("not checked"),
    };
    if let Err(e) = check_shapes(endo, data) {
        return fail_all(CheckResult::fail(e.to_string()), CheckResult::fail("not checked"));
    }
    if !is_adapted(endo, &data.adapted) {
        return fail_all(CheckResult::pass(), CheckResult::fail("positive system is not adapted"));
    }
    match Endoscopy::new(endo, data) {
        Ok(e) => e.validate(),
        Err(err) => fail_all(CheckResult::pass(), CheckResult::fail(err.to_string())),
    }
}

/// w_1 in W with w_1 (w theta) w_1^{-1} = theta, if any.
fn conjugator_to_theta(endo: &EndoscopicDatum) -> Result<Option<IMat>> {
    let d = &endo.datum;
    if endo.w == lattice::identity(d.rank) {
        return Ok(Some(endo.w.clone()));
    }
    let w = full_weyl(d, WEYL_SEARCH_CAP)?;
    Ok(w.into_iter()
        .find(|w1| lattice::mat_mul(w1, &endo.theta1) == lattice::mat_mul(&d.theta, w1)))
}

/// Data when w theta = w_1^{-1} theta w_1: U = S, iota = Int(w_1^{-1}), phi = id.
fn conjugate_data(endo: &EndoscopicDatum, w1: &IMat, w_dot: &TitsElement) -> Result<TransferData> {
    let d = &endo.datum;
    let n1 = TitsElement::lift(d, w1);
    let x = n1.mul(d, w_dot).mul(d, &n1.theta(d).inverse(d));
    if !x.is_torus() {
        return Err(Error::Mismatch("conjugated w-dot theta is not in T theta".into()));
    }
    let k = d.y.dim();
    let cols: Vec<IVec> = endo
        .t1
        .rows
        .iter()
        .map(|mu| {
            d.y_coords(&lattice::mat_vec(w1, mu))
                .expect("w_1 maps X*^{w theta} to X*^theta")
        })
        .collect();
    let iota_star: IMat = (0..k).map(|a| cols.iter().map(|c| c[a]).collect()).collect();
    let adapted: Vec<usize> = (0..d.roots.len())
        .filter(|&r| {
            let img = lattice::mat_vec(w1, &d.roots[r]);
            d.is_positive(d.root_index[&img])
        })
        .collect();
    Ok(TransferData {
        u_dim: k,
        iota_star,
        phi_star: lattice::identity(k),
        epsilon: x.t,
        adapted,
        b1: standard_positive(d),
        w_dot: w_dot.clone(),
    })
}

/// A torus element t such that t w-dot theta is pinned on H, or None when
/// w-dot theta already is.
fn pinning_correction(endo: &EndoscopicDatum, data: &TransferData) -> Result<Option<RatVec>> {
    let d = &endo.datum;
    let h = h_datum(endo, &data.adapted)?;
    let orbits = twisted_orbits(endo, &data.w_dot)?;
    let mut rows: Vec<IVec> = Vec::new();
    let mut target: Vec<Rational64> = Vec::new();
    for so in &h.simple_orbits {
        let r = d.root_index[&h.simple_roots[so[0]]];
        let o = orbits.iter().find(|o| o.roots.contains(&r)).expect("root has an orbit");
        rows.push(o.norm.clone());
        target.push(lattice::frac(-o.phase));
    }
    if target.iter().all(|t| t.is_zero()) {
        return Ok(None);
    }
    let den = lattice::common_denominator(&target);
    let tgt: IVec = target.iter().map(|t| (t * Rational64::from_integer(den)).to_integer()).collect();
    // unknown t in Q^rank: sum_a t_a column_a = target, column_a = (row[a])_rows
    let cols: Vec<IVec> = (0..d.rank).map(|a| rows.iter().map(|r| r[a]).collect()).collect();
    let x = lattice::solve_rational(&cols, &tgt)
        .ok_or_else(|| Error::Mismatch("no torus element pins w-dot theta on H".into()))?;
    Ok(Some(x.iter().map(|v| v / Rational64::from_integer(den)).collect()))
}

fn is_type_a(d: &RootDatumTheta) -> bool {
    let l = d.simple.len();
    if l == 0 || l != d.rank {
        return false;
    }
    let mut degree = vec![0; l];
    let mut edges = 0;
    for i in 0..l {
        for j in 0..l {
            let c = dot(&d.simple_roots[j], &d.simple_coroots[i]);
            if i != j && c != 0 {
                if c != -1 || dot(&d.simple_roots[i], &d.simple_coroots[j]) != -1 {
                    return false;
                }
                degree[i] += 1;
                if i < j {
                    edges += 1;
                }
            }
        }
    }
    // a connected path: l - 1 edges, degrees at most 2, exactly one component
    edges + 1 == l && degree.iter().all(|x| *x <= 2) && extended_simple_roots(d).len() == l + 1
}

/// theta = 1, type A_{n-1}, w elliptic (a Coxeter rotation of the extended
/// diagram): U trivial and epsilon = rho-check / n.
fn coxeter_data(endo: &EndoscopicDatum) -> Option<TransferData> {
    let d = &endo.datum;
    if !d.is_split() || !is_type_a(d) || endo.t1.dim() != 0 || d.y.dim() != d.rank {
        return None;
    }
    let n = (d.rank + 1) as i64;
    Some(TransferData {
        u_dim: 0,
        iota_star: vec![],
        phi_star: vec![],
        epsilon: lattice::frac_vec(
            &d.rho2_check
                .iter()
                .map(|x| Rational64::new(*x, 2 * n))
                .collect::<RatVec>(),
        ),
        adapted: standard_positive(d),
        b1: standard_positive(d),
        w_dot: endo.w_dot(),
    })
}

/// Build transfer data for the supported base cases: w theta W-conjugate to
/// theta (including w = 1), and Coxeter elements for split type A. The
/// returned w-dot may differ from the datum's by a torus element chosen so
/// that w-dot theta is pinned on H; see `datum_shift`.
pub fn construct_transfer_data(endo: &EndoscopicDatum) -> Result<TransferData> {
    let d = &endo.datum;
    if let Some(w1) = conjugator_to_theta(endo)? {
        let user = endo.w_dot();
        let data = conjugate_data(endo, &w1, &user)?;
        let data = match pinning_correction(endo, &data)? {
            None => data,
            Some(t) => conjugate_data(endo, &w1, &TitsElement::torus(t).mul(d, &user))?,
        };
        return Ok(data);
    }
    if let Some(data) = coxeter_data(endo) {
        return Ok(data);
    }
    Err(Error::Unsupported(
        "no supported reduction for this endoscopic datum; supply transfer data".into(),
    ))
}

/// The torus element t with (datum's w-dot) = t (data's w-dot).
pub fn datum_shift(endo: &EndoscopicDatum, data: &TransferData) -> Result<RatVec> {
    let d = &endo.datum;
    let x = endo.w_dot().mul(d, &data.w_dot.inverse(d));
    if !x.is_torus() {
        return Err(Error::Precondition("the two lifts lie over different Weyl elements".into()));
    }
    Ok(x.t)
}

/// m(lambda, mu) mu(t), entrywise; columns must be characters of T_1.
pub fn apply_transform_rule(m: &CoeffMatrix, t: &[Rational64]) -> CoeffMatrix {
    let mut out = CoeffMatrix::zero(m.rows.clone(), m.cols.clone());
    for (i, j, c) in m.entries() {
        out.set(i, j, c.scale(&char_at(&m.cols[j], t)));
    }
    out
}

pub fn d0_constant(endo: &EndoscopicDatum, data: &TransferData) -> Result<CycloRational> {
    Endoscopy::new(endo, data)?.d0()
}

pub fn endoscopic_partition(endo: &EndoscopicDatum, data: &TransferData) -> Result<FactoredPartition> {
    Ok(Endoscopy::new(endo, data)?.endoscopic_partition())
}

pub fn branching_matrix(
    endo: &EndoscopicDatum,
    data: &TransferData,
    index_g: &[IVec],
    index_h: &[IVec],
) -> Result<CoeffMatrix> {
    Endoscopy::new(endo, data)?.branching_matrix(index_g, index_h)
}

pub fn restrict_character(endo: &EndoscopicDatum, data: &TransferData, f: &GAElement) -> Result<GAElement> {
    Endoscopy::new(endo, data)?.restrict_character(f)
}

pub fn base_change_matrix(
    endo: &EndoscopicDatum,
    data: &TransferData,
    index_g: &[IVec],
    index_h: &[IVec],
) -> Result<CoeffMatrix> {
    Endoscopy::new(endo, data)?.base_change_matrix(index_g, index_h)
}

/// Named endoscopic data used by the test suites and the CLI.
pub fn endoscopic_catalog(d: &RootDatumTheta) -> Result<Vec<(String, EndoscopicDatum)>> {
    let z = vec![Rational64::zero(); d.rank];
    let id = lattice::identity(d.rank);
    let mut out: Vec<(String, EndoscopicDatum)> = vec![("identity".into(), EndoscopicDatum::identity(d)?)];
    let mut seen: BTreeSet<(IMat, Vec<usize>)> = BTreeSet::new();
    seen.insert((id.clone(), out[0].1.roots_h.clone()));
    let mut push = |name: String, e: Result<EndoscopicDatum>, out: &mut Vec<(String, EndoscopicDatum)>| {
        if let Ok(e) = e {
            if seen.insert((e.w.clone(), e.roots_h.clone())) {
                out.push((name, e));
            }
        }
    };
    let max_pair = d.roots[..d.n_pos]
        .iter()
        .map(|r| dot(r, &d.rho2_check))
        .max()
        .unwrap_or(0);
    let big = primes_above(max_pair);
    let generic: RatVec = d.rho2_check.iter().map(|x| Rational64::new(*x, big)).collect();
    push("torus".into(), EndoscopicDatum::new(d.clone(), generic, id.clone(), z.clone()), &mut out);
    if let Some(cow) = crate::lie::fundamental_coweights(d) {
        let top = extended_simple_roots(d);
        for so in &d.simple_orbits {
            let sum: RatVec = (0..d.rank)
                .map(|a| so.iter().map(|&j| cow[j][a]).sum::<Rational64>())
                .collect();
            let levi: RatVec = sum.iter().map(|x| x / Rational64::from_integer(big)).collect();
            push(format!("levi{so:?}"), EndoscopicDatum::new(d.clone(), levi, id.clone(), z.clone()), &mut out);
            if so.len() == 1 {
                let j = so[0];
                // label of node j in minus the highest root(s)
                let label = top[d.simple.len()..]
                    .iter()
                    .map(|h| -d.simple_coords(h).map_or(0, |c| c[j].to_integer()))
                    .max()
                    .unwrap_or(0);
                if label >= 2 {
                    let s: RatVec = cow[j].iter().map(|x| x / Rational64::from_integer(label)).collect();
                    push(format!("elliptic[{j}]"), EndoscopicDatum::new(d.clone(), s, id.clone(), z.clone()), &mut out);
                }
            }
        }
    }
    if d.weyl_theta().len() <= 2000 {
        let ext = extended_simple_roots(d);
        let ext_set: BTreeSet<&IVec> = ext.iter().collect();
        if let Ok(ws) = full_weyl(d, 5000) {
            for w in ws.iter().skip(1) {
                if ext.iter().any(|a| !ext_set.contains(&lattice::mat_vec(w, a))) {
                    continue;
                }
                let theta1 = lattice::mat_mul(w, &d.theta);
                if d.is_split() && lattice::fixed_lattice(w).dim() == 0 {
                    let n = (d.rank + 1) as i64;
                    let s: RatVec = d.rho2_check.iter().map(|x| Rational64::new(*x, 2 * n)).collect();
                    push("coxeter".into(), EndoscopicDatum::new(d.clone(), s, w.clone(), z.clone()), &mut out);
                    continue;
                }
                // small-denominator s with w theta stable roots of H
                let mut found = 0;
                'search: for m in [2i64, 3, 4] {
                    for b in 0..=1i64 {
                        let side = (2 * b + 1) as usize;
                        for code in 0..side.pow(d.rank as u32) {
                            let mut c = code;
                            let s: RatVec = (0..d.rank)
                                .map(|_| {
                                    let x = (c % side) as i64 - b;
                                    c /= side;
                                    Rational64::new(x, m)
                                })
                                .collect();
                            let e = EndoscopicDatum::new(d.clone(), s, w.clone(), z.clone());
                            if e.as_ref().is_ok_and(|e| e.theta1 == theta1) {
                                let before = out.len();
                                push(format!("twisted{m}"), e, &mut out);
                                if out.len() > before {
                                    found += 1;
                                    if found >= 2 {
                                        break 'search;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn primes_above(n: i64) -> i64 {
    let mut p = n.max(1) + 1;
    loop {
        if (2..p).take_while(|k| k * k <= p).all(|k| p % k != 0) {
            return p;
        }
        p += 1;
    }
}
