//! Integer lattices used by the code constructions: ℤ^ℓ, D4, and the doubled
//! E8 lattice, plus membership tests, residue enumeration modulo `p`, and a
//! fast closest-vector decoder for 2E8.
//!
//! 2E8 is represented as an *integer* lattice,
//! `{all coordinates even, Σxᵢ ≡ 0 (mod 4)} ∪ {all odd, Σ(xᵢ−1) ≡ 0 (mod 4)}`,
//! which avoids half-integer arithmetic entirely and contains 4ℤ⁸.

use crate::error::{Error, Result};

/// Which closed-form membership predicate applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    /// The full integer lattice ℤ^ℓ.
    Integer,
    /// D4: integer vectors with even coordinate sum.
    D4,
    /// 2E8 in the integer representation described at module level.
    E8Doubled,
    /// Anything else: solve against the basis via the adjugate.
    General,
}

/// An integer lattice of dimension ≤ 8 with its basic invariants.
///
/// Immutable after construction; `det` and `dmin_sq` are recomputed and
/// checked at build time, so a constructed value is internally consistent.
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    name: String,
    dim: usize,
    /// Basis row vectors, flattened row-major (`dim * dim` entries).
    basis: Vec<i64>,
    /// |det| of the basis matrix = index of the lattice in ℤ^ℓ … inverse of
    /// its point density.
    det: u64,
    /// Squared length of a shortest nonzero lattice vector.
    dmin_sq: u64,
    /// Adjugate of the basis matrix, for the general membership test.
    adj: Vec<i128>,
    kind: Kind,
}

impl LatticeSpec {
    /// Build a lattice from basis rows, verifying determinant and minimum
    /// distance by enumeration.
    pub fn new(name: &str, basis_rows: &[Vec<i64>]) -> Result<Self> {
        let dim = basis_rows.len();
        if dim == 0 || dim > 8 || basis_rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter(format!(
                "lattice basis must be square with dimension 1..=8, got {dim} rows"
            )));
        }
        let basis: Vec<i64> = basis_rows.iter().flatten().copied().collect();
        let det_signed = det_bareiss(&basis, dim);
        if det_signed == 0 {
            return Err(Error::InvalidParameter(format!(
                "basis of `{name}` is singular"
            )));
        }
        let det = det_signed.unsigned_abs() as u64;
        let adj = adjugate(&basis, dim);
        let kind = match name {
            "d4" => Kind::D4,
            "e8x2" => Kind::E8Doubled,
            n if n.starts_with('z') => Kind::Integer,
            _ => Kind::General,
        };
        let mut lat = LatticeSpec {
            name: name.to_string(),
            dim,
            basis,
            det,
            dmin_sq: 0,
            adj,
            kind,
        };
        lat.dmin_sq = lat.shortest_vector_sq();
        Ok(lat)
    }

    /// ℤ^ell with the identity basis.
    pub fn zl(ell: usize) -> Self {
        let rows: Vec<Vec<i64>> = (0..ell)
            .map(|i| (0..ell).map(|j| (i == j) as i64).collect())
            .collect();
        Self::new(&format!("z{ell}"), &rows).expect("identity basis is valid")
    }

    /// The D4 checkerboard lattice (integer vectors with even sum), det 2,
    /// dmin² = 2.
    pub fn d4() -> Self {
        let rows = vec![
            vec![1, 1, 0, 0],
            vec![1, -1, 0, 0],
            vec![0, 1, -1, 0],
            vec![0, 0, 1, -1],
        ];
        let lat = Self::new("d4", &rows).expect("D4 basis is valid");
        assert_eq!(lat.det, 2, "D4 determinant");
        assert_eq!(lat.dmin_sq, 2, "D4 minimum distance");
        lat
    }

    /// The doubled E8 lattice 2E8 ⊂ ℤ⁸, det 256, dmin² = 8.
    pub fn e8_doubled() -> Self {
        // 2x the standard unimodular E8 basis: one norm-16 row, six
        // difference rows, and the doubled glue vector (1,…,1).
        let mut rows = vec![vec![0i64; 8]; 8];
        rows[0][0] = 4;
        for i in 1..7 {
            rows[i][i - 1] = -2;
            rows[i][i] = 2;
        }
        rows[7] = vec![1; 8];
        let lat = Self::new("e8x2", &rows).expect("2E8 basis is valid");
        assert_eq!(lat.det, 256, "2E8 determinant");
        assert_eq!(lat.dmin_sq, 8, "2E8 minimum distance");
        lat
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn det(&self) -> u64 {
        self.det
    }

    pub fn dmin_sq(&self) -> u64 {
        self.dmin_sq
    }

    /// Is `point` a lattice member?
    pub fn is_member(&self, point: &[i64]) -> bool {
        if point.len() != self.dim {
            return false;
        }
        match self.kind {
            Kind::Integer => true,
            Kind::D4 => point.iter().sum::<i64>() % 2 == 0,
            Kind::E8Doubled => e8x2_member(point),
            Kind::General => self.member_general(point),
        }
    }

    fn member_general(&self, point: &[i64]) -> bool {
        // point ∈ rowspan_ℤ(B) ⇔ point·adj(B) ≡ 0 (mod det), since
        // B⁻¹ = adj(B)/det.
        let d = self.dim;
        let det = det_bareiss(&self.basis, d);
        for j in 0..d {
            let mut acc: i128 = 0;
            for i in 0..d {
                acc += point[i] as i128 * self.adj[i * d + j];
            }
            if acc % det != 0 {
                return false;
            }
        }
        true
    }

    /// Does the lattice contain the sublattice pℤ^ℓ?
    pub fn contains_sublattice_pz(&self, p: u64) -> bool {
        if p == 0 {
            return false;
        }
        let mut e = vec![0i64; self.dim];
        for i in 0..self.dim {
            e[i] = p as i64;
            let ok = self.is_member(&e);
            e[i] = 0;
            if !ok {
                return false;
            }
        }
        true
    }

    /// All lattice members inside [0, p)^ℓ, lexicographically sorted.
    ///
    /// Requires pℤ^ℓ ⊆ Λ so that membership of a representative is
    /// independent of the lift; the count then equals p^ℓ / det(Λ).
    pub fn enumerate_mod_p(&self, p: u64) -> Result<Vec<Vec<i64>>> {
        if !self.contains_sublattice_pz(p) {
            return Err(Error::Precondition(format!(
                "{}ℤ^{} is not a sublattice of `{}`",
                p, self.dim, self.name
            )));
        }
        let total = (p as u128).pow(self.dim as u32);
        if total > 1 << 24 {
            return Err(Error::BudgetExceeded(format!(
                "{p}^{} residues exceed the enumeration budget",
                self.dim
            )));
        }
        let mut out = Vec::new();
        let mut v = vec![0i64; self.dim];
        loop {
            if self.is_member(&v) {
                out.push(v.clone());
            }
            // odometer increment in lexicographic order
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                v[k] += 1;
                if v[k] < p as i64 {
                    break;
                }
                v[k] = 0;
            }
        }
    }

    /// Shortest nonzero vector (squared norm) by depth-first enumeration with
    /// branch-and-bound pruning; coordinates are bounded by the largest basis
    /// row norm, which always contains a shortest vector.
    fn shortest_vector_sq(&self) -> u64 {
        let d = self.dim;
        let mut best: u64 = u64::MAX;
        for i in 0..d {
            let row = &self.basis[i * d..(i + 1) * d];
            let n: u64 = row.iter().map(|&x| (x * x) as u64).sum();
            if n > 0 && n < best {
                best = n;
            }
        }
        let bound = (best as f64).sqrt().ceil() as i64;
        let mut v = vec![0i64; d];
        self.svp_dfs(&mut v, 0, 0, bound, &mut best);
        best
    }

    fn svp_dfs(&self, v: &mut [i64], depth: usize, partial_sq: u64, bound: i64, best: &mut u64) {
        if partial_sq > *best {
            return;
        }
        if depth == self.dim {
            if partial_sq > 0 && partial_sq < *best && self.is_member(v) {
                *best = partial_sq;
            }
            return;
        }
        for x in -bound..=bound {
            v[depth] = x;
            self.svp_dfs(v, depth + 1, partial_sq + (x * x) as u64, bound, best);
        }
        v[depth] = 0;
    }
}

/// Integer membership predicate for the doubled E8 lattice.
fn e8x2_member(x: &[i64]) -> bool {
    debug_assert_eq!(x.len(), 8);
    let all_even = x.iter().all(|&c| c % 2 == 0);
    let all_odd = x.iter().all(|&c| c % 2 != 0);
    if all_even {
        x.iter().sum::<i64>().rem_euclid(4) == 0
    } else if all_odd {
        x.iter().map(|&c| c - 1).sum::<i64>().rem_euclid(4) == 0
    } else {
        false
    }
}

/// Exact determinant of a flattened row-major integer matrix
/// (Bareiss fraction-free elimination).
pub fn det_bareiss(m: &[i64], n: usize) -> i128 {
    let mut a: Vec<i128> = m.iter().map(|&x| x as i128).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k * n + k] == 0 {
            // pivot search
            let mut found = None;
            for r in k + 1..n {
                if a[r * n + k] != 0 {
                    found = Some(r);
                    break;
                }
            }
            let Some(r) = found else { return 0 };
            for j in 0..n {
                a.swap(k * n + j, r * n + j);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
            }
            a[i * n + k] = 0;
        }
        prev = a[k * n + k];
    }
    sign * a[n * n - 1]
}

/// Classical adjugate (transpose of the cofactor matrix) of a flattened
/// row-major integer matrix.
fn adjugate(m: &[i64], n: usize) -> Vec<i128> {
    if n == 1 {
        return vec![1];
    }
    let mut adj = vec![0i128; n * n];
    let mut minor = vec![0i64; (n - 1) * (n - 1)];
    for i in 0..n {
        for j in 0..n {
            let mut t = 0;
            for r in 0..n {
                if r == i {
                    continue;
                }
                for c in 0..n {
                    if c == j {
                        continue;
                    }
                    minor[t] = m[r * n + c];
                    t += 1;
                }
            }
            let cof = det_bareiss(&minor, n - 1) * if (i + j) % 2 == 0 { 1 } else { -1 };
            // adjugate is the transposed cofactor matrix
            adj[j * n + i] = cof;
        }
    }
    adj
}

/// Fast closest-vector decoder for 2E8.
///
/// Decodes both cosets 2D8 and 2D8 + (1,…,1) by rounding to the coset and
/// fixing the sum condition with a single flip of the coordinate carrying the
/// largest rounding error, then keeps the closer candidate. Ties go to the
/// even coset, then to the lexicographically smaller vector.
pub fn cvp_e8_fast(x: &[f64; 8]) -> [i64; 8] {
    let c0 = decode_2d8_coset(x, 0);
    let c1 = decode_2d8_coset(x, 1);
    let d0 = dist_sq_f64(x, &c0);
    let d1 = dist_sq_f64(x, &c1);
    if d0 < d1 || (d0 == d1 && c0 <= c1) {
        c0
    } else {
        c1
    }
}

/// Nearest point of `2D8 + par·(1,…,1)`, i.e. all coordinates ≡ par (mod 2)
/// and coordinate sum ≡ (par·8 or 0) such that the 2E8 sum rule holds.
fn decode_2d8_coset(x: &[f64; 8], par: i64) -> [i64; 8] {
    // w = nearest integers to (x - par)/2; the candidate is 2w + par.
    let mut w = [0i64; 8];
    let mut err = [0f64; 8];
    for i in 0..8 {
        let t = (x[i] - par as f64) / 2.0;
        let r = t.round();
        w[i] = r as i64;
        err[i] = t - r;
    }
    // sum condition: Σ(2wᵢ + par) ≡ par·8 + 2Σwᵢ must satisfy the 2E8 rule,
    // which reduces to Σwᵢ even for both cosets.
    let s: i64 = w.iter().sum();
    if s.rem_euclid(2) != 0 {
        // flip the coordinate with the largest |rounding error| toward the
        // input; lowest index wins ties.
        let mut k = 0;
        for i in 1..8 {
            if err[i].abs() > err[k].abs() {
                k = i;
            }
        }
        w[k] += if err[k] >= 0.0 { 1 } else { -1 };
    }
    let mut out = [0i64; 8];
    for i in 0..8 {
        out[i] = 2 * w[i] + par;
    }
    out
}

fn dist_sq_f64(x: &[f64; 8], c: &[i64; 8]) -> f64 {
    (0..8).map(|i| (x[i] - c[i] as f64).powi(2)).sum()
}

/// Exhaustive 2E8 closest-vector reference: examines every coset of 4ℤ⁸ in
/// 2E8 (256 of them) and rounds per coordinate within the coset. Exact but
/// ~256x slower than [`cvp_e8_fast`]; used for verification.
pub fn cvp_e8_exhaustive(x: &[f64; 8], residues: &[Vec<i64>]) -> [i64; 8] {
    let mut best: Option<([i64; 8], f64)> = None;
    for r in residues {
        let mut c = [0i64; 8];
        for i in 0..8 {
            let k = ((x[i] - r[i] as f64) / 4.0).round() as i64;
            c[i] = r[i] + 4 * k;
        }
        let d = dist_sq_f64(x, &c);
        let better = match &best {
            None => true,
            Some((bc, bd)) => d < *bd || (d == *bd && c < *bc),
        };
        if better {
            best = Some((c, d));
        }
    }
    best.expect("nonempty residue set").0
}
