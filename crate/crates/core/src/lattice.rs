//! Integer lattice helpers: dense vectors and matrices, kernels, Hermite
//! normal forms and small rational solves.

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

pub type IVec = Vec<i64>;
/// Row-major integer matrix; `m[i][j]` is row `i`, column `j`.
pub type IMat = Vec<Vec<i64>>;
/// Rational vector, used for torus elements of finite order and functionals.
pub type RatVec = Vec<Rational64>;

pub fn dot(a: &[i64], b: &[i64]) -> i64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_rat(a: &[i64], v: &[Rational64]) -> Rational64 {
    debug_assert_eq!(a.len(), v.len());
    a.iter()
        .zip(v)
        .fold(Rational64::zero(), |acc, (x, y)| acc + *y * *x)
}

pub fn add(a: &[i64], b: &[i64]) -> IVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[i64], b: &[i64]) -> IVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn neg(a: &[i64]) -> IVec {
    a.iter().map(|x| -x).collect()
}

pub fn scale(k: i64, a: &[i64]) -> IVec {
    a.iter().map(|x| k * x).collect()
}

pub fn is_zero(a: &[i64]) -> bool {
    a.iter().all(|x| *x == 0)
}

pub fn identity(n: usize) -> IMat {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

pub fn transpose(m: &IMat) -> IMat {
    if m.is_empty() {
        return vec![];
    }
    let cols = m[0].len();
    (0..cols).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

pub fn mat_vec(m: &IMat, v: &[i64]) -> IVec {
    m.iter().map(|row| dot(row, v)).collect()
}

pub fn mat_mul(a: &IMat, b: &IMat) -> IMat {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

/// Order of a square matrix, if it is finite and at most `cap`.
pub fn matrix_order(m: &IMat, cap: usize) -> Option<usize> {
    let id = identity(m.len());
    let mut p = m.clone();
    for k in 1..=cap {
        if p == id {
            return Some(k);
        }
        p = mat_mul(&p, m);
    }
    None
}

pub fn rat_matrix(m: &IMat) -> Vec<RatVec> {
    m.iter()
        .map(|r| r.iter().map(|x| Rational64::from_integer(*x)).collect())
        .collect()
}

/// Inverse of a square rational matrix by Gauss-Jordan elimination.
pub fn rat_inverse(m: &[RatVec]) -> Option<Vec<RatVec>> {
    let n = m.len();
    let mut a: Vec<RatVec> = m.to_vec();
    let mut inv: Vec<RatVec> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Rational64::one()
                    } else {
                        Rational64::zero()
                    }
                })
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        inv.swap(c, p);
        let piv = a[c][c];
        for j in 0..n {
            a[c][j] /= piv;
            inv[c][j] /= piv;
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c];
                for j in 0..n {
                    let (ac, ic) = (a[c][j], inv[c][j]);
                    a[r][j] -= f * ac;
                    inv[r][j] -= f * ic;
                }
            }
        }
    }
    Some(inv)
}

/// Solve `sum_j x_j cols[j] = target` over Q. Returns `None` when the system is
/// inconsistent. When the columns are dependent an arbitrary solution is given.
pub fn solve_rational(cols: &[IVec], target: &[i64]) -> Option<RatVec> {
    let n = cols.len();
    let rows = target.len();
    // augmented matrix rows x (n + 1)
    let mut a: Vec<RatVec> = (0..rows)
        .map(|i| {
            let mut r: RatVec = cols.iter().map(|c| Rational64::from_integer(c[i])).collect();
            r.push(Rational64::from_integer(target[i]));
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut pr = 0;
    for c in 0..n {
        if pr >= rows {
            break;
        }
        let Some(p) = (pr..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(pr, p);
        let piv = a[pr][c];
        for j in 0..=n {
            a[pr][j] /= piv;
        }
        for r in 0..rows {
            if r != pr && !a[r][c].is_zero() {
                let f = a[r][c];
                for j in 0..=n {
                    let v = a[pr][j];
                    a[r][j] -= f * v;
                }
            }
        }
        pivots.push(c);
        pr += 1;
    }
    if a[pr..].iter().any(|r| !r[n].is_zero()) {
        return None;
    }
    let mut x = vec![Rational64::zero(); n];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = a[i][n];
    }
    Some(x)
}

/// Integer row echelon form by Euclidean row operations. Applies the same
/// operations to `track` (if non-empty). Returns the number of nonzero rows.
fn echelon(a: &mut IMat, track: &mut IMat) -> Vec<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut pivot_cols = Vec::new();
    let mut pr = 0;
    for c in 0..cols {
        if pr >= rows {
            break;
        }
        loop {
            let best = (pr..rows)
                .filter(|&r| a[r][c] != 0)
                .min_by_key(|&r| a[r][c].abs());
            let Some(b) = best else { break };
            a.swap(pr, b);
            if !track.is_empty() {
                track.swap(pr, b);
            }
            let mut done = true;
            for r in pr + 1..rows {
                if a[r][c] != 0 {
                    let f = Integer::div_floor(&a[r][c], &a[pr][c]);
                    for j in 0..cols {
                        a[r][j] -= f * a[pr][j];
                    }
                    if !track.is_empty() {
                        let n = track[pr].len();
                        for j in 0..n {
                            track[r][j] -= f * track[pr][j];
                        }
                    }
                    if a[r][c] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if a[pr][c] != 0 {
            pivot_cols.push(c);
            pr += 1;
        }
    }
    pivot_cols
}

/// Canonical (row-style) Hermite normal form of the lattice spanned by `rows`.
pub fn hnf_rows(rows: &IMat) -> IMat {
    let mut a = rows.clone();
    let mut none = vec![];
    let pivots = echelon(&mut a, &mut none);
    a.truncate(pivots.len());
    for (i, &c) in pivots.iter().enumerate() {
        if a[i][c] < 0 {
            for x in a[i].iter_mut() {
                *x = -*x;
            }
        }
        for k in 0..i {
            let f = Integer::div_floor(&a[k][c], &a[i][c]);
            if f != 0 {
                let row = a[i].clone();
                for (x, y) in a[k].iter_mut().zip(&row) {
                    *x -= f * y;
                }
            }
        }
    }
    a
}

/// Z-basis (as HNF rows) of the kernel `{x : m x = 0}` of an integer matrix
/// with `n` columns.
pub fn kernel_basis(m: &IMat, n: usize) -> IMat {
    let mut a = if m.is_empty() {
        vec![vec![]; n]
    } else {
        transpose(m)
    };
    let mut u = identity(n);
    let pivots = echelon(&mut a, &mut u);
    let k: IMat = u[pivots.len()..].to_vec();
    hnf_rows(&k)
}

/// A sublattice of Z^n given by an HNF basis, with coordinate extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBasis {
    pub ambient: usize,
    pub rows: IMat,
    pivots: Vec<usize>,
}

impl LatticeBasis {
    pub fn new(ambient: usize, rows: &IMat) -> Self {
        let rows = hnf_rows(rows);
        let pivots = rows
            .iter()
            .map(|r| r.iter().position(|x| *x != 0).expect("nonzero HNF row"))
            .collect();
        LatticeBasis {
            ambient,
            rows,
            pivots,
        }
    }

    pub fn full(n: usize) -> Self {
        LatticeBasis::new(n, &identity(n))
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Coordinates of `v` in this basis, or `None` if `v` is not in the lattice.
    pub fn coords(&self, v: &[i64]) -> Option<IVec> {
        let mut rest = v.to_vec();
        let mut x = Vec::with_capacity(self.rows.len());
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if rest[p] % row[p] != 0 {
                return None;
            }
            let c = rest[p] / row[p];
            for (r, b) in rest.iter_mut().zip(row) {
                *r -= c * b;
            }
            x.push(c);
        }
        if is_zero(&rest) {
            Some(x)
        } else {
            None
        }
    }

    /// Rational coordinates of a vector in the Q-span of the lattice.
    pub fn rat_coords(&self, v: &[Rational64]) -> Option<RatVec> {
        let mut rest = v.to_vec();
        let mut x = Vec::with_capacity(self.rows.len());
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = rest[p] / Rational64::from_integer(row[p]);
            for (r, b) in rest.iter_mut().zip(row) {
                *r -= c * *b;
            }
            x.push(c);
        }
        if rest.iter().all(|r| r.is_zero()) {
            Some(x)
        } else {
            None
        }
    }

    pub fn vector(&self, coords: &[i64]) -> IVec {
        let mut v = vec![0; self.ambient];
        for (c, row) in coords.iter().zip(&self.rows) {
            for (x, b) in v.iter_mut().zip(row) {
                *x += c * b;
            }
        }
        v
    }
}

/// Fixed sublattice of a square integer matrix acting on column vectors.
pub fn fixed_lattice(m: &IMat) -> LatticeBasis {
    let n = m.len();
    let d: IMat = (0..n)
        .map(|i| (0..n).map(|j| m[i][j] - i64::from(i == j)).collect())
        .collect();
    LatticeBasis::new(n, &kernel_basis(&d, n))
}

/// Coefficients `c_0..c_n` of `det(1 - z A)` for a square integer matrix.
pub fn det_one_minus(a: &IMat) -> Vec<i64> {
    let n = a.len();
    let ar = rat_matrix(a);
    let mut c = vec![Rational64::one()];
    let mut mk: Vec<RatVec> = vec![vec![Rational64::zero(); n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        let mut next = vec![vec![Rational64::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = Rational64::zero();
                for l in 0..n {
                    s += ar[i][l] * mk[l][j];
                }
                if i == j {
                    s += c[k - 1];
                }
                next[i][j] = s;
            }
        }
        mk = next;
        let mut tr = Rational64::zero();
        for i in 0..n {
            for l in 0..n {
                tr += ar[i][l] * mk[l][i];
            }
        }
        c.push(-tr / Rational64::from_integer(k as i64));
    }
    c.iter()
        .map(|x| {
            assert!(x.is_integer(), "characteristic polynomial of an integer matrix");
            x.to_integer()
        })
        .collect()
}

/// Reduce a rational number into [0, 1).
pub fn frac(x: Rational64) -> Rational64 {
    x - x.floor()
}

pub fn frac_vec(v: &[Rational64]) -> RatVec {
    v.iter().map(|x| frac(*x)).collect()
}

pub fn rat_from_int(v: &[i64]) -> RatVec {
    v.iter().map(|x| Rational64::from_integer(*x)).collect()
}

/// Least common multiple of the denominators.
pub fn common_denominator(v: &[Rational64]) -> i64 {
    v.iter().fold(1i64, |acc, x| acc.lcm(x.denom()))
}

pub fn gcd_all(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |acc, x| acc.gcd(x)).abs()
}

pub fn is_nonneg(v: &[Rational64]) -> bool {
    v.iter().all(|x| !x.is_negative())
}
