//! Twisted characters, weight multiplicities and their inverse, the Satake
//! transform in the m- and tau-bases, its Kato-Lusztig inverse and the
//! Plancherel pairing.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::group_algebra::{alt_symmetrize, desymmetrize, is_invariant, orbit_sum, GAElement, LatticeTag, Truncation};
use crate::lattice::{self, IVec};
use crate::partition::{nilradical_determinant, Factor, QSpec, Side};
use crate::root_datum::RootDatumTheta;
use crate::scalar::CycloLaurent;
use crate::{Error, Result};

/// A matrix with rows and columns indexed by dominant weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffMatrix {
    pub rows: Vec<IVec>,
    pub cols: Vec<IVec>,
    entries: BTreeMap<(usize, usize), CycloLaurent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryJson {
    pub row: IVec,
    pub col: IVec,
    pub value: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixJson {
    pub rows: Vec<IVec>,
    pub cols: Vec<IVec>,
    pub entries: Vec<EntryJson>,
}

impl CoeffMatrix {
    pub fn zero(rows: Vec<IVec>, cols: Vec<IVec>) -> Self {
        CoeffMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(index: &[IVec]) -> Self {
        let mut m = Self::zero(index.to_vec(), index.to_vec());
        for i in 0..index.len() {
            m.set(i, i, CycloLaurent::one());
        }
        m
    }

    pub fn set(&mut self, i: usize, j: usize, c: CycloLaurent) {
        if c.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), c);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> CycloLaurent {
        self.entries.get(&(i, j)).cloned().unwrap_or_default()
    }

    fn position(v: &[IVec], w: &[i64]) -> Option<usize> {
        v.iter().position(|x| x == w)
    }

    /// Entry by weights; zero when either weight is not indexed.
    pub fn at(&self, lambda: &[i64], mu: &[i64]) -> CycloLaurent {
        match (Self::position(&self.rows, lambda), Self::position(&self.cols, mu)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => CycloLaurent::zero(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &CycloLaurent)> {
        self.entries.iter().map(|(&(i, j), c)| (i, j, c))
    }

    pub fn mul(&self, other: &CoeffMatrix) -> Result<CoeffMatrix> {
        if self.cols != other.rows {
            return Err(Error::Precondition("matrix index sets do not match".into()));
        }
        let mut by_row: Vec<Vec<(usize, &CycloLaurent)>> = vec![Vec::new(); other.rows.len()];
        for (&(k, j), c) in &other.entries {
            by_row[k].push((j, c));
        }
        let mut acc: BTreeMap<(usize, usize), CycloLaurent> = BTreeMap::new();
        for (&(i, k), a) in &self.entries {
            for &(j, b) in &by_row[k] {
                acc.entry((i, j)).or_default().add_assign_ref(&(a * b));
            }
        }
        let mut out = Self::zero(self.rows.clone(), other.cols.clone());
        for ((i, j), c) in acc {
            out.set(i, j, c);
        }
        Ok(out)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows.len()).all(|i| self.get(i, i).is_one())
            && self.entries.keys().all(|&(i, j)| i == j)
    }

    /// Every nonzero entry (i, j) has rows[i] dominating cols[j], with the
    /// diagonal entries given.
    pub fn is_triangular(&self, d: &RootDatumTheta) -> bool {
        self.entries
            .keys()
            .all(|&(i, j)| d.dominates(&self.rows[i], &self.cols[j]))
    }

    /// JSON with weights in Y*-coordinates.
    pub fn to_json(&self, d: &RootDatumTheta) -> MatrixJson {
        let c = |v: &IVec| d.y_coords(v).expect("indices lie in Y*");
        MatrixJson {
            rows: self.rows.iter().map(c).collect(),
            cols: self.cols.iter().map(c).collect(),
            entries: self
                .entries
                .iter()
                .map(|(&(i, j), v)| EntryJson {
                    row: c(&self.rows[i]),
                    col: c(&self.cols[j]),
                    value: v.to_string(),
                })
                .collect(),
        }
    }
}

/// Check that a set of weights is dominant and saturated; returns it sorted.
pub fn check_index_set(d: &RootDatumTheta, index: &[IVec]) -> Result<Vec<IVec>> {
    if let Some(bad) = index.iter().find(|v| !d.is_dominant(v)) {
        return Err(Error::Precondition(format!("{bad:?} is not a dominant Y*-weight")));
    }
    let mut sorted = index.to_vec();
    d.sort_weights(&mut sorted);
    sorted.dedup();
    if d.saturate(&sorted) != sorted {
        return Err(Error::Precondition("index set is not saturated".into()));
    }
    Ok(sorted)
}

fn sign_scale(c: &CycloLaurent, sign: i64) -> CycloLaurent {
    if sign == 1 {
        c.clone()
    } else {
        -c
    }
}

/// Shared state for spherical computations on one datum: cached expansions
/// of P(E^{-1}, q^{k}) and of D(E^{-1}, q^{-1}).
pub struct Spherical<'a> {
    pub d: &'a RootDatumTheta,
    /// Worker threads used for matrix rows; 1 means sequential.
    pub threads: usize,
    c_set: GAElement,
    series: Mutex<HashMap<QSpec, (i64, Arc<GAElement>)>>,
    cache_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct SeriesFile {
    datum: String,
    depth: i64,
    grading: IVec,
    lower: Option<i64>,
    upper: Option<i64>,
    terms: Vec<(IVec, String)>,
}

impl<'a> Spherical<'a> {
    pub fn new(d: &'a RootDatumTheta) -> Result<Self> {
        d.try_weyl_theta()?;
        let c_set = nilradical_determinant(d, Side::Negative).expand_exact(LatticeTag::Y, QSpec::InvQ)?;
        Ok(Spherical {
            d,
            threads: 1,
            c_set,
            series: Mutex::new(HashMap::new()),
            cache_dir: None,
        })
    }

    /// Keep expanded partition series as JSON files in `dir` across runs.
    pub fn with_cache_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.cache_dir = dir;
        self
    }

    fn cache_key(&self) -> String {
        serde_json::to_string(self.d.spec()).expect("datum specs serialize")
    }

    fn cache_path(&self, qs: QSpec) -> Option<PathBuf> {
        use std::hash::{Hash, Hasher};
        let dir = self.cache_dir.as_ref()?;
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.cache_key().hash(&mut h);
        Some(dir.join(format!("series-{:016x}-{qs:?}.json", h.finish())))
    }

    fn load_series(&self, qs: QSpec, depth: i64) -> Option<GAElement> {
        let text = std::fs::read_to_string(self.cache_path(qs)?).ok()?;
        let f: SeriesFile = serde_json::from_str(&text).ok()?;
        if f.datum != self.cache_key() || f.depth < depth {
            return None;
        }
        let terms = f
            .terms
            .iter()
            .map(|(mu, c)| Some((mu.clone(), c.parse::<CycloLaurent>().ok()?)))
            .collect::<Option<Vec<_>>>()?;
        Some(
            GAElement::from_terms(LatticeTag::Y, self.d.rank, terms).with_truncation(Some(Truncation {
                grading: f.grading,
                lower: f.lower,
                upper: f.upper,
            })),
        )
    }

    fn store_series(&self, qs: QSpec, depth: i64, s: &GAElement) {
        let Some(path) = self.cache_path(qs) else { return };
        let t = s.truncation.clone();
        let f = SeriesFile {
            datum: self.cache_key(),
            depth,
            grading: t.as_ref().map_or_else(|| self.grading(), |t| t.grading.clone()),
            lower: t.as_ref().and_then(|t| t.lower),
            upper: t.as_ref().and_then(|t| t.upper),
            terms: s.terms().map(|(mu, c)| (mu.clone(), c.to_string())).collect(),
        };
        // a failed write only loses the cache
        let _ = std::fs::create_dir_all(path.parent().expect("file in a directory"));
        let tmp = path.with_extension("tmp");
        if std::fs::write(&tmp, serde_json::to_string(&f).expect("serializable")).is_ok() {
            let _ = std::fs::rename(&tmp, &path);
        }
    }

    pub fn with_threads(mut self, n: usize) -> Self {
        self.threads = n.max(1);
        self
    }

    fn grading(&self) -> IVec {
        self.d.rho2_check.clone()
    }

    /// P(E^{-1}, q^k) certified down to height -depth.
    pub fn partition_series(&self, qs: QSpec, depth: i64) -> Result<Arc<GAElement>> {
        let depth = depth.max(0);
        {
            let cache = self.series.lock().unwrap();
            if let Some((k, s)) = cache.get(&qs) {
                if *k >= depth {
                    return Ok(s.clone());
                }
            }
        }
        let s = match self.load_series(qs, depth) {
            Some(s) => Arc::new(s),
            None => {
                let p = nilradical_determinant(self.d, Side::Negative).inverse();
                let s = p.expand_series(LatticeTag::Y, qs, &self.grading(), depth)?;
                self.store_series(qs, depth, &s);
                Arc::new(s)
            }
        };
        let mut cache = self.series.lock().unwrap();
        match cache.get(&qs) {
            Some((k, old)) if *k >= depth => Ok(old.clone()),
            _ => {
                cache.insert(qs, (depth, s.clone()));
                Ok(s)
            }
        }
    }

    /// The set C with coefficients p_mu(q^{-1}).
    pub fn c_set(&self) -> &GAElement {
        &self.c_set
    }

    fn require_dominant(&self, v: &[i64]) -> Result<()> {
        if self.d.is_dominant(v) {
            Ok(())
        } else {
            Err(Error::Precondition(format!("{v:?} is not a dominant Y*-weight")))
        }
    }

    /// tau_lambda = J(e^lambda) P(E^{-1}, 1), as an exact element.
    pub fn tau(&self, lambda: &[i64]) -> Result<GAElement> {
        self.require_dominant(lambda)?;
        let d = self.d;
        let h = d.height(lambda);
        let j = alt_symmetrize(d, &GAElement::exp(LatticeTag::Y, lambda.to_vec()));
        let mut depth = 2 * h + 2;
        for _ in 0..4 {
            let p = self.partition_series(QSpec::One, depth)?;
            let prod = j.mul(&p);
            // below -h everything must cancel inside the certified window
            if prod.terms().any(|(mu, c)| !c.is_zero() && d.height(mu) < -h) {
                depth *= 2;
                continue;
            }
            let tau = prod.truncate_below(&self.grading(), -h).into_exact();
            if !tau.coeff(lambda)?.is_one() || !is_invariant(d, &tau) {
                return Err(Error::Mismatch(format!("character of {lambda:?} is malformed")));
            }
            return Ok(tau);
        }
        Err(Error::Mismatch(format!("character of {lambda:?} did not close up")))
    }

    /// (tau_{lambda, q^k}, e^mu).
    pub fn tau_q_coeff(&self, lambda: &[i64], mu: &[i64], qs: QSpec) -> Result<CycloLaurent> {
        self.require_dominant(lambda)?;
        self.require_dominant(mu)?;
        let d = self.d;
        let p = self.partition_series(qs, d.height(lambda) - d.height(mu))?;
        let g = d.weyl_theta();
        let mut acc = CycloLaurent::zero();
        for w in 0..g.len() {
            let nu = lattice::sub(mu, &d.dot_action(w, lambda));
            if d.height(&nu) > 0 {
                continue;
            }
            acc.add_assign_ref(&sign_scale(&p.coeff(&nu)?, g.sign(w)));
        }
        Ok(acc)
    }

    fn build<F>(&self, rows: &[IVec], cols: &[IVec], f: F) -> Result<CoeffMatrix>
    where
        F: Fn(&IVec) -> Result<Vec<(usize, CycloLaurent)>> + Sync,
    {
        let n = rows.len();
        let mut results: Vec<Option<Result<Vec<(usize, CycloLaurent)>>>> = (0..n).map(|_| None).collect();
        if self.threads <= 1 || n < 2 {
            for (i, r) in rows.iter().enumerate() {
                results[i] = Some(f(r));
            }
        } else {
            let chunk = n.div_ceil(self.threads);
            std::thread::scope(|s| {
                for (slot, rs) in results.chunks_mut(chunk).zip(rows.chunks(chunk)) {
                    let f = &f;
                    s.spawn(move || {
                        for (o, r) in slot.iter_mut().zip(rs) {
                            *o = Some(f(r));
                        }
                    });
                }
            });
        }
        let mut m = CoeffMatrix::zero(rows.to_vec(), cols.to_vec());
        for (i, r) in results.into_iter().enumerate() {
            for (j, c) in r.expect("row computed")? {
                m.set(i, j, c);
            }
        }
        Ok(m)
    }

    /// m_{lambda, mu} = (tau_lambda, e^mu).
    pub fn weight_mult_matrix(&self, index: &[IVec]) -> Result<CoeffMatrix> {
        let idx = check_index_set(self.d, index)?;
        self.build(&idx, &idx, |lambda| {
            let tau = self.tau(lambda)?;
            idx.iter()
                .enumerate()
                .map(|(j, mu)| Ok((j, tau.coeff(mu)?)))
                .collect()
        })
    }

    /// Row mu of n is L(m_mu).
    pub fn van_leeuwen_inverse(&self, index: &[IVec]) -> Result<CoeffMatrix> {
        let idx = check_index_set(self.d, index)?;
        self.build(&idx, &idx, |mu| {
            let l = desymmetrize(self.d, &orbit_sum(self.d, mu)?);
            l.terms()
                .map(|(nu, c)| {
                    let j = CoeffMatrix::position(&idx, nu)
                        .ok_or_else(|| Error::Mismatch(format!("L(m_{mu:?}) leaves the index set")))?;
                    Ok((j, c.clone()))
                })
                .collect()
        })
    }

    /// Q_S(q^{-1}) for a set of simple theta-orbit indices.
    pub fn q_poincare(&self, s: &[usize]) -> CycloLaurent {
        let g = self.d.weyl_theta();
        let mut acc = CycloLaurent::zero();
        for w in g.parabolic(s) {
            acc.add_assign_ref(&CycloLaurent::q_pow(-(g.length_abs[w] as i64)));
        }
        acc
    }

    fn full_set(&self) -> Vec<usize> {
        (0..self.d.simple_orbits.len()).collect()
    }

    /// c_mu = q^{<mu, rho-check>} Q / Q_{S(mu)}.
    pub fn c_constant(&self, mu: &[i64]) -> Result<CycloLaurent> {
        self.require_dominant(mu)?;
        let q = self.q_poincare(&self.full_set());
        let qs = self.q_poincare(&self.d.stabilizer_set(mu));
        Ok(&CycloLaurent::q_half_pow(self.d.height(mu)) * &q.div_exact(&qs)?)
    }

    /// Row lambda of g from the finite double sum over C and W^theta.
    fn g_row(&self, lambda: &[i64]) -> Result<BTreeMap<IVec, CycloLaurent>> {
        self.require_dominant(lambda)?;
        let d = self.d;
        let shifted = self
            .c_set
            .map_weights(|mu| lattice::add(mu, lambda), LatticeTag::Y, d.rank);
        let l = desymmetrize(d, &shifted);
        let r = CycloLaurent::q_half_pow(d.height(lambda));
        let qs = self.q_poincare(&d.stabilizer_set(lambda));
        let mut row = BTreeMap::new();
        for (nu, c) in l.terms() {
            let v = (&r * c)
                .div_exact(&qs)
                .map_err(|e| Error::Mismatch(format!("Q_S does not divide row {lambda:?}: {e}")))?;
            if !v.is_zero() {
                row.insert(nu.clone(), v);
            }
        }
        Ok(row)
    }

    /// f-hat_lambda as an exact W^theta-invariant element.
    pub fn macdonald_fhat(&self, lambda: &[i64]) -> Result<GAElement> {
        let mut f = GAElement::zero(LatticeTag::Y, self.d.rank);
        for (nu, c) in self.g_row(lambda)? {
            f = f.add(&self.tau(&nu)?.scale(&c));
        }
        Ok(f)
    }

    fn g_unchecked(&self, idx: &[IVec]) -> Result<CoeffMatrix> {
        self.build(idx, idx, |lambda| {
            self.g_row(lambda)?
                .into_iter()
                .map(|(nu, c)| {
                    let j = CoeffMatrix::position(idx, &nu)
                        .ok_or_else(|| Error::Mismatch(format!("row {lambda:?} leaves the index set")))?;
                    Ok((j, c))
                })
                .collect()
        })
    }

    /// g with f-hat_lambda = sum g_{lambda, mu} tau_mu, checked against s n.
    pub fn geometric_satake(&self, index: &[IVec]) -> Result<CoeffMatrix> {
        let idx = check_index_set(self.d, index)?;
        let g = self.g_unchecked(&idx)?;
        let sn = self.satake_direct(&idx)?.mul(&self.van_leeuwen_inverse(&idx)?)?;
        if g != sn {
            return Err(Error::Mismatch("geometric Satake disagrees with s n".into()));
        }
        Ok(g)
    }

    /// s = g m: f-hat_lambda = sum s_{lambda, mu} m_mu.
    pub fn satake_matrix(&self, index: &[IVec]) -> Result<CoeffMatrix> {
        let idx = check_index_set(self.d, index)?;
        self.g_unchecked(&idx)?.mul(&self.weight_mult_matrix(&idx)?)
    }

    /// s read off r_lambda P(E^{-1}, 1) J(e^lambda D(E^{-1}, q^{-1})) / Q_S
    /// without passing through tau or L.
    pub fn satake_direct(&self, index: &[IVec]) -> Result<CoeffMatrix> {
        let idx = check_index_set(self.d, index)?;
        let d = self.d;
        self.build(&idx, &idx, |lambda| {
            let shifted = self
                .c_set
                .map_weights(|mu| lattice::add(mu, lambda), LatticeTag::Y, d.rank);
            let x = alt_symmetrize(d, &shifted);
            let p = self.partition_series(QSpec::One, d.height(lambda))?;
            let r = CycloLaurent::q_half_pow(d.height(lambda));
            let qs = self.q_poincare(&d.stabilizer_set(lambda));
            let mut row = Vec::new();
            for (j, nu) in idx.iter().enumerate() {
                let mut acc = CycloLaurent::zero();
                for (y, c) in x.terms() {
                    let z = lattice::sub(nu, y);
                    if d.height(&z) > 0 {
                        continue;
                    }
                    acc.add_assign_ref(&(c * &p.coeff(&z)?));
                }
                if !acc.is_zero() {
                    row.push((j, (&r * &acc).div_exact(&qs)?));
                }
            }
            Ok(row)
        })
    }

    /// t_{lambda, mu} = (tau_{lambda, q^{-1}}, e^mu) q^{-<mu, rho-check>}.
    pub fn kato_lusztig_matrix(&self, index: &[IVec]) -> Result<CoeffMatrix> {
        let idx = check_index_set(self.d, index)?;
        self.build(&idx, &idx, |lambda| {
            let mut row = Vec::new();
            for (j, mu) in idx.iter().enumerate() {
                if !self.d.dominates(lambda, mu) {
                    continue;
                }
                let c = self.tau_q_coeff(lambda, mu, QSpec::InvQ)?;
                row.push((j, &c * &CycloLaurent::q_half_pow(-self.d.height(mu))));
            }
            Ok(row)
        })
    }

    /// Gamma_lambda as an unevaluated sum over W^theta of factored ratios.
    pub fn spherical_gamma(&self, lambda: &[i64]) -> Result<MacdonaldSum> {
        self.require_dominant(lambda)?;
        let d = self.d;
        let g = d.weyl_theta();
        let base = nilradical_determinant(d, Side::Negative);
        let terms = (0..g.len())
            .map(|w| MacdonaldTerm {
                weight: g.apply(w, lambda),
                factors: base.map_weights(d.rank, |v| g.apply(w, v)).factors,
            })
            .collect();
        Ok(MacdonaldSum {
            scale: CycloLaurent::q_half_pow(-d.height(lambda)),
            denominator: self.q_poincare(&self.full_set()),
            terms,
        })
    }

    /// Numeric Plancherel pairing of f-hat_lambda and f-hat_mu at q = q0, with
    /// every series cut at absolute height `bound`.
    pub fn plancherel_pair(&self, lambda: &[i64], mu: &[i64], q0: f64, bound: i64) -> Result<Complex64> {
        let fl = self.macdonald_fhat(lambda)?;
        let fm = self.macdonald_fhat(mu)?;
        self.pair(&fl, &fm, q0, bound)
    }

    /// <f1, f2> against the Plancherel measure, for finite elements of C[Y*].
    pub fn pair(&self, fl: &GAElement, fm: &GAElement, q0: f64, bound: i64) -> Result<Complex64> {
        if q0 <= 1.0 {
            return Err(Error::Precondition("the measure series diverge for q <= 1".into()));
        }
        let d = self.d;
        let ht: Vec<i64> = d.simple_roots.iter().map(|a| d.height(a)).collect();
        let coords = |v: &[i64]| -> Option<IVec> {
            let c = d.simple_coords(v)?;
            c.iter().map(|x| x.is_integer().then(|| x.to_integer())).collect()
        };
        let abs_h = |c: &[i64]| c.iter().zip(&ht).map(|(x, h)| x.abs() * h).sum::<i64>();

        // f-hat_lambda conj(f-hat_mu) D(E, 1) D(E^{-1}, 1), on the root lattice
        let mut f: BTreeMap<IVec, Complex64> = BTreeMap::new();
        for (x, a) in fl.terms() {
            for (y, b) in fm.terms() {
                if let Some(c) = coords(&lattice::sub(x, y)) {
                    *f.entry(c).or_default() += a.evaluate(q0) * b.evaluate(q0).conj();
                }
            }
        }
        let mut factors: Vec<Factor> = nilradical_determinant(d, Side::Positive).factors;
        factors.extend(nilradical_determinant(d, Side::Negative).factors);
        let fc: Vec<(IVec, Complex64, i64)> = factors
            .iter()
            .map(|x| {
                let c = coords(&x.weight).expect("root sums lie in the root lattice");
                (c, x.zeta_value().to_complex(), x.q_pow)
            })
            .collect();
        for (c, z, _) in &fc {
            let mut next: BTreeMap<IVec, Complex64> = BTreeMap::new();
            for (v, a) in &f {
                *next.entry(v.clone()).or_default() += a;
                *next.entry(lattice::add(v, c)).or_default() -= a * z;
            }
            f = next;
        }

        // the series prod 1/(1 - zeta q0^{-b} e^nu), cut at absolute height
        let dim = d.simple_roots.len();
        let mut g: BTreeMap<IVec, Complex64> = BTreeMap::from([(vec![0; dim], Complex64::new(1.0, 0.0))]);
        for (c, z, b) in &fc {
            let ratio = z * q0.powi(-(*b as i32));
            let mut next: BTreeMap<IVec, Complex64> = BTreeMap::new();
            for (v, a) in &g {
                let mut cur = v.clone();
                let mut coef = *a;
                while abs_h(&cur) <= bound {
                    *next.entry(cur.clone()).or_default() += coef;
                    cur = lattice::add(&cur, c);
                    coef *= ratio;
                }
            }
            g = next;
        }
        let mut ct = Complex64::zero();
        for (v, a) in &f {
            if let Some(b) = g.get(&lattice::neg(v)) {
                ct += a * b;
            }
        }
        let q = self.q_poincare(&self.full_set()).evaluate(q0);
        let order = d.weyl_theta().len().to_f64().unwrap();
        Ok(ct * q / order)
    }
}

/// e^{w lambda} prod over factors (1 - zeta q^{-b} e^nu) / (1 - zeta e^nu).
#[derive(Debug, Clone)]
pub struct MacdonaldTerm {
    pub weight: IVec,
    pub factors: Vec<Factor>,
}

/// scale / denominator times a sum of Macdonald terms.
#[derive(Debug, Clone)]
pub struct MacdonaldSum {
    pub scale: CycloLaurent,
    pub denominator: CycloLaurent,
    pub terms: Vec<MacdonaldTerm>,
}

/// A point of the complex torus given by log-coordinates:
/// e^mu(s) = exp(sum mu_i z_i).
pub fn character_value(mu: &[i64], z: &[Complex64]) -> Complex64 {
    mu.iter()
        .zip(z)
        .map(|(m, x)| x * (*m as f64))
        .sum::<Complex64>()
        .exp()
}

impl MacdonaldSum {
    pub fn evaluate(&self, q0: f64, z: &[Complex64]) -> Result<Complex64> {
        let mut acc = Complex64::zero();
        for t in &self.terms {
            let mut v = character_value(&t.weight, z);
            for f in &t.factors {
                let e = f.zeta_value().to_complex() * character_value(&f.weight, z);
                let den = Complex64::new(1.0, 0.0) - e;
                if den.norm() < 1e-12 {
                    return Err(Error::Arithmetic("parameter lies on a pole of the Macdonald sum".into()));
                }
                let num = Complex64::new(1.0, 0.0) - e * q0.powi(-(f.q_pow as i32));
                v *= (num / den).powi(f.mult as i32);
            }
            acc += v;
        }
        Ok(acc * self.scale.evaluate(q0) / self.denominator.evaluate(q0))
    }
}

/// Value of a finite element at (q0, s).
pub fn evaluate_element(f: &GAElement, q0: f64, z: &[Complex64]) -> Complex64 {
    f.terms()
        .map(|(mu, c)| c.evaluate(q0) * character_value(mu, z))
        .sum()
}

pub fn tau(d: &RootDatumTheta, lambda: &[i64]) -> Result<GAElement> {
    Spherical::new(d)?.tau(lambda)
}

pub fn tau_q_coeff(d: &RootDatumTheta, lambda: &[i64], mu: &[i64], qs: QSpec) -> Result<CycloLaurent> {
    Spherical::new(d)?.tau_q_coeff(lambda, mu, qs)
}

pub fn macdonald_fhat(d: &RootDatumTheta, lambda: &[i64]) -> Result<GAElement> {
    Spherical::new(d)?.macdonald_fhat(lambda)
}

pub fn c_constant(d: &RootDatumTheta, mu: &[i64]) -> Result<CycloLaurent> {
    Spherical::new(d)?.c_constant(mu)
}

pub fn q_poincare(d: &RootDatumTheta, s: &[usize]) -> Result<CycloLaurent> {
    Ok(Spherical::new(d)?.q_poincare(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::root_datum::build_preset;
    use proptest::prelude::*;

    fn e(mu: &[i64]) -> GAElement {
        GAElement::exp(LatticeTag::Y, mu.to_vec())
    }

    fn ql(s: &str) -> CycloLaurent {
        s.parse().unwrap()
    }

    fn w(v: &[i64]) -> IVec {
        v.to_vec()
    }

    #[test]
    fn characters() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        assert_eq!(s.tau(&[2]).unwrap(), e(&[2]).add(&e(&[0])).add(&e(&[-2])));
        assert_eq!(s.tau(&[0]).unwrap(), e(&[0]));
        assert!(s.tau(&[-2]).is_err());
        let t = build_preset("A2~2").unwrap();
        let st = Spherical::new(&t).unwrap();
        assert_eq!(st.tau(&[1, 1]).unwrap(), e(&[1, 1]).add(&e(&[-1, -1])));
        let g2 = build_preset("G2").unwrap();
        let sg = Spherical::new(&g2).unwrap();
        let hi = (0..g2.n_pos).map(|i| g2.roots[i].clone()).max_by_key(|r| g2.height(r)).unwrap();
        assert!(g2.is_dominant(&hi));
        let tau = sg.tau(&hi).unwrap();
        assert_eq!(tau.coeff(&[0, 0]).unwrap(), CycloLaurent::from_int(2));
        let dim = tau.terms().fold(CycloLaurent::zero(), |a, (_, c)| &a + c);
        assert_eq!(dim, CycloLaurent::from_int(14));
    }

    #[test]
    fn q_characters() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        assert!(s.tau_q_coeff(&[2], &[2], QSpec::InvQ).unwrap().is_one());
        assert_eq!(s.tau_q_coeff(&[2], &[0], QSpec::InvQ).unwrap(), ql("q^-1"));
        assert!(s.tau_q_coeff(&[2], &[4], QSpec::InvQ).unwrap().is_zero());
        assert!(s.tau_q_coeff(&[2], &[0], QSpec::One).unwrap().is_one());
    }

    #[test]
    fn rank_one_matrices() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        let idx: Vec<IVec> = (0..=4).map(|k| vec![k]).collect();
        let m = s.weight_mult_matrix(&idx).unwrap();
        assert!(m.at(&[2], &[0]).is_one());
        let n = s.van_leeuwen_inverse(&idx).unwrap();
        assert!(n.at(&[2], &[2]).is_one());
        assert_eq!(n.at(&[2], &[0]), CycloLaurent::from_int(-1));
        assert!(n.at(&[1], &[1]).is_one());
        assert!(m.mul(&n).unwrap().is_identity());
        assert!(n.mul(&m).unwrap().is_identity());

        let g = s.geometric_satake(&idx).unwrap();
        assert_eq!(g.at(&[2], &[2]), ql("q"));
        assert_eq!(g.at(&[2], &[0]), CycloLaurent::from_int(-1));
        assert!(g.at(&[0], &[0]).is_one());
        let sm = s.satake_matrix(&idx).unwrap();
        assert_eq!(sm.at(&[2], &[2]), ql("q"));
        assert_eq!(sm.at(&[2], &[0]), ql("q + -1"));
        assert_eq!(sm.at(&[1], &[1]), ql("q^(1/2)"));
        assert_eq!(sm, s.satake_direct(&idx).unwrap());
        let t = s.kato_lusztig_matrix(&idx).unwrap();
        assert_eq!(t.at(&[2], &[2]), ql("q^-1"));
        assert_eq!(t.at(&[2], &[0]), ql("q^-1"));
        assert!(t.at(&[0], &[0]).is_one());
        assert!(t.mul(&g).unwrap().is_identity());
        assert!(g.mul(&t).unwrap().is_identity());
        assert_eq!(t.mul(&sm).unwrap(), m);
        for x in [&m, &n, &g, &sm, &t] {
            assert!(x.is_triangular(&d));
        }
    }

    #[test]
    fn fhat() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        let f2 = s.macdonald_fhat(&[2]).unwrap();
        let m2 = orbit_sum(&d, &[2]).unwrap();
        let expect = m2.scale(&ql("q")).add(&e(&[0]).scale(&ql("q + -1")));
        assert_eq!(f2, expect);
        assert_eq!(s.macdonald_fhat(&[1]).unwrap(), orbit_sum(&d, &[1]).unwrap().scale(&ql("q^(1/2)")));
        for name in ["A1", "A2", "A2~2", "B2", "G2", "D4~3"] {
            let d = build_preset(name).unwrap();
            let s = Spherical::new(&d).unwrap();
            assert_eq!(s.macdonald_fhat(&vec![0; d.rank]).unwrap(), e(&vec![0; d.rank]), "{name}");
        }
    }

    #[test]
    fn poincare_and_constants() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        assert_eq!(s.q_poincare(&[0]), ql("1 + q^-1"));
        assert!(s.q_poincare(&[]).is_one());
        assert_eq!(s.c_constant(&[2]).unwrap(), ql("q + 1"));
        assert!(s.c_constant(&[0]).unwrap().is_one());
        let vol = &s.c_constant(&[2]).unwrap() * &CycloLaurent::q_half_pow(d.height(&[2]));
        assert_eq!(vol, ql("q^2 + q"));
        let t = build_preset("A2~2").unwrap();
        let st = Spherical::new(&t).unwrap();
        assert_eq!(st.q_poincare(&[0]), ql("1 + q^-3"));
    }

    #[test]
    fn twisted_inverse_pairs() {
        for name in ["A2~2", "A3~2", "B2"] {
            let d = build_preset(name).unwrap();
            let s = Spherical::new(&d).unwrap();
            let idx = d.dominant_weights(8).unwrap();
            let m = s.weight_mult_matrix(&idx).unwrap();
            let n = s.van_leeuwen_inverse(&idx).unwrap();
            assert!(m.mul(&n).unwrap().is_identity(), "{name}");
            let g = s.geometric_satake(&idx).unwrap();
            let t = s.kato_lusztig_matrix(&idx).unwrap();
            assert!(t.mul(&g).unwrap().is_identity(), "{name}");
            for (i, lam) in idx.iter().enumerate() {
                assert_eq!(g.get(i, i), CycloLaurent::q_half_pow(d.height(lam)));
            }
        }
    }

    #[test]
    fn parallel_rows_match() {
        let d = build_preset("A2").unwrap();
        let idx = d.dominant_weights(8).unwrap();
        let a = Spherical::new(&d).unwrap().satake_matrix(&idx).unwrap();
        let b = Spherical::new(&d).unwrap().with_threads(4).satake_matrix(&idx).unwrap();
        assert_eq!(
            serde_json::to_string(&a.to_json(&d)).unwrap(),
            serde_json::to_string(&b.to_json(&d)).unwrap()
        );
    }

    #[test]
    fn non_saturated_sets_rejected() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        assert!(s.weight_mult_matrix(&[w(&[2])]).is_err());
        assert!(s.weight_mult_matrix(&[w(&[-2]), w(&[0])]).is_err());
    }

    #[test]
    fn plancherel() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        let v = s.plancherel_pair(&[2], &[2], 9.0, 40).unwrap();
        assert!((v - Complex64::new(90.0, 0.0)).norm() < 1e-6, "{v}");
        let v = s.plancherel_pair(&[0], &[0], 9.0, 40).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-8, "{v}");
        let v = s.plancherel_pair(&[2], &[0], 9.0, 40).unwrap();
        assert!(v.norm() < 1e-6, "{v}");
        assert!(s.plancherel_pair(&[0], &[0], 1.0, 40).is_err());
    }

    #[test]
    fn macdonald_sum_matches_fhat() {
        for name in ["A1", "A2", "A2~2", "B2"] {
            let d = build_preset(name).unwrap();
            let s = Spherical::new(&d).unwrap();
            let z: Vec<Complex64> = (0..d.rank)
                .map(|i| Complex64::new(0.11 + 0.07 * i as f64, 0.37 - 0.13 * i as f64))
                .collect();
            let q0 = 7.0;
            let gamma0 = s.spherical_gamma(&vec![0; d.rank]).unwrap().evaluate(q0, &z).unwrap();
            assert!((gamma0 - Complex64::new(1.0, 0.0)).norm() < 1e-9, "{name}: {gamma0}");
            for lam in d.dominant_weights(6).unwrap() {
                let gamma = s.spherical_gamma(&lam).unwrap().evaluate(q0, &z).unwrap();
                let f = evaluate_element(&s.macdonald_fhat(&lam).unwrap(), q0, &z);
                let ratio = s.q_poincare(&s.full_set()).div_exact(&s.q_poincare(&d.stabilizer_set(&lam))).unwrap();
                let pref = (&CycloLaurent::q_half_pow(2 * d.height(&lam)) * &ratio).evaluate(q0);
                assert!((f - pref * gamma).norm() < 1e-7 * f.norm().max(1.0), "{name} {lam:?}");
            }
        }
    }

    #[test]
    fn gamma_has_poles() {
        let d = build_preset("A1").unwrap();
        let s = Spherical::new(&d).unwrap();
        let g = s.spherical_gamma(&[2]).unwrap();
        assert!(g.evaluate(9.0, &[Complex64::zero()]).is_err());
        let z = [Complex64::new(9f64.ln() / 2.0, 0.0)];
        assert!(g.evaluate(9.0, &z).unwrap().norm().is_finite());
    }

    #[test]
    fn twisted_characters_degenerate() {
        for name in ["A2~2", "A3~2", "D4~3"] {
            let d = build_preset(name).unwrap();
            let h = d.twisted_degeneration().unwrap();
            let s = Spherical::new(&d).unwrap();
            let sh = Spherical::new(&h).unwrap();
            for lam in d.dominant_weights(8).unwrap() {
                let a = s.tau(&lam).unwrap();
                let b = sh.tau(&d.y_coords(&lam).unwrap()).unwrap();
                let a2 = a.map_weights(|v| d.y_coords(v).unwrap(), LatticeTag::Y, h.rank);
                assert_eq!(a2, b, "{name} {lam:?}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn averaging_identity(name in prop::sample::select(vec!["A1", "A2~2"]), a in 0usize..3, b in 0usize..3) {
            // <tau_lambda, f-hat_mu> = c_mu (tau_{lambda, q^{-1}}, e^mu)
            let d = build_preset(name).unwrap();
            let s = Spherical::new(&d).unwrap();
            let ws = d.dominant_weights(6).unwrap();
            let (lam, mu) = (&ws[a.min(ws.len() - 1)], &ws[b.min(ws.len() - 1)]);
            let lhs = s.pair(&s.tau(lam).unwrap(), &s.macdonald_fhat(mu).unwrap(), 9.0, 40).unwrap();
            let rhs = (&s.c_constant(mu).unwrap() * &s.tau_q_coeff(lam, mu, QSpec::InvQ).unwrap()).evaluate(9.0);
            prop_assert!((lhs - rhs).norm() < 1e-6 * rhs.norm().max(1.0), "{} vs {}", lhs, rhs);
        }
    }
}
