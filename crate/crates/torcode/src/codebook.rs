//! Message codebooks over ℤ_q^ℓ: the baseline two-point code, Minal circulant
//! codes, lattice-based codes from D4 and 2E8, and the Lee-metric comparison
//! code, all behind a common [`Construction`] registry.
//!
//! A codeword's position in the list *is* its label: label bit `i` (least
//! significant first) is message coordinate `m_i`. Decoding is exhaustive
//! minimum-toroidal-distance search with ties resolved toward the lowest
//! label, which makes every decoder deterministic.

use crate::error::{Error, Result};
use crate::torus::{mod_pm, TorusVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A labeled codebook in ℤ_q^ℓ with 2^ℓ codewords.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Codebook {
    q: i64,
    ell: usize,
    construction: String,
    /// Construction-specific parameters (γ, scale factor, generator, …).
    params: BTreeMap<String, serde_json::Value>,
    /// `codewords[label]`, every coordinate in `[0, q)`.
    codewords: Vec<Vec<i64>>,
}

impl Codebook {
    fn new(
        q: i64,
        ell: usize,
        construction: &str,
        params: BTreeMap<String, serde_json::Value>,
        codewords: Vec<Vec<i64>>,
    ) -> Result<Self> {
        if codewords.len() != 1 << ell {
            return Err(Error::InvalidCodebook(format!(
                "{construction}: expected {} codewords, got {}",
                1 << ell,
                codewords.len()
            )));
        }
        for cw in &codewords {
            if cw.len() != ell || cw.iter().any(|&c| c < 0 || c >= q) {
                return Err(Error::InvalidCodebook(format!(
                    "{construction}: codeword {cw:?} outside ℤ_{q}^{ell}"
                )));
            }
        }
        let mut sorted = codewords.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != codewords.len() {
            return Err(Error::InvalidCodebook(format!(
                "{construction}: duplicate codewords"
            )));
        }
        Ok(Codebook {
            q,
            ell,
            construction: construction.to_string(),
            params,
            codewords,
        })
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn construction(&self) -> &str {
        &self.construction
    }

    pub fn params(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codeword(&self, label: usize) -> &[i64] {
        &self.codewords[label]
    }

    pub fn codewords(&self) -> &[Vec<i64>] {
        &self.codewords
    }

    /// Codeword for a label (bit `i` of `label` = message coordinate `i`).
    pub fn encode(&self, label: usize) -> Result<TorusVector> {
        if label >= self.codewords.len() {
            return Err(Error::InvalidParameter(format!(
                "label {label} out of range for 2^{} codewords",
                self.ell
            )));
        }
        TorusVector::new(self.q, self.codewords[label].clone())
    }

    /// Exhaustive minimum-toroidal-distance decoding; ties go to the lowest
    /// label.
    pub fn decode(&self, received: &TorusVector) -> Result<usize> {
        if received.q() != self.q || received.dim() != self.ell {
            return Err(Error::DimensionMismatch(format!(
                "received point lives in ℤ_{}^{}, codebook in ℤ_{}^{}",
                received.q(),
                received.dim(),
                self.q,
                self.ell
            )));
        }
        let mut best = 0usize;
        let mut best_d = u128::MAX;
        for (label, cw) in self.codewords.iter().enumerate() {
            let d = toroidal_dist_sq_raw(self.q, received.coords(), cw);
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        Ok(best)
    }

    /// Minimum pairwise toroidal distance, squared (exact integer).
    pub fn min_distance_sq(&self) -> u128 {
        let mut best = u128::MAX;
        for i in 0..self.codewords.len() {
            for j in i + 1..self.codewords.len() {
                let d = toroidal_dist_sq_raw(self.q, &self.codewords[i], &self.codewords[j]);
                best = best.min(d);
            }
        }
        best
    }

    pub fn min_distance(&self) -> f64 {
        (self.min_distance_sq() as f64).sqrt()
    }

    /// All nonzero centered differences `Δv' − Δv` over ordered codeword
    /// pairs, used by the union bound. Component-wise centered mod q.
    pub fn ordered_pair_differences(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        for (i, a) in self.codewords.iter().enumerate() {
            for (j, b) in self.codewords.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d: Vec<i64> = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| mod_pm(y - x, self.q).expect("valid modulus"))
                    .collect();
                out.push(d);
            }
        }
        out
    }
}

/// Squared toroidal distance on raw coordinate slices (same q, same length).
pub fn toroidal_dist_sq_raw(q: i64, a: &[i64], b: &[i64]) -> u128 {
    let mut acc: u128 = 0;
    for (&x, &y) in a.iter().zip(b) {
        let d = mod_pm(x - y, q).expect("valid modulus");
        acc += (d as i128 * d as i128) as u128;
    }
    acc
}

// ---------------------------------------------------------------------------
// Closed-form helpers
// ---------------------------------------------------------------------------

/// The distance-optimal circulant parameter
/// `⌊q/2⌋ (ℓ − √(2ℓ−1)) / (ℓ−1)`, rounded to the nearest integer.
pub fn gamma_star(q: i64, ell: usize) -> Result<i64> {
    if ell < 2 {
        return Err(Error::InvalidParameter(
            "gamma_star requires ell >= 2".into(),
        ));
    }
    let a = (q / 2) as f64;
    let l = ell as f64;
    let g = a * (l - (2.0 * l - 1.0).sqrt()) / (l - 1.0);
    Ok(g.round() as i64)
}

/// Closed-form minimum distance of the circulant code:
/// `min { √(⌊q/2⌋² + γ²), √ℓ·(⌊q/2⌋ − γ) }`.
pub fn minal_dmin_formula(q: i64, ell: usize, gamma: i64) -> Result<f64> {
    check_gamma(q, gamma)?;
    let a = (q / 2) as f64;
    let g = gamma as f64;
    let b1 = (a * a + g * g).sqrt();
    let b2 = (ell as f64).sqrt() * (a - g);
    Ok(b1.min(b2))
}

fn check_gamma(q: i64, gamma: i64) -> Result<()> {
    if gamma < 0 || 2 * gamma >= q {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} outside [0, {q}/2)"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// The two-point code {0, ⌊q/2⌋} in ℤ_q.
pub fn build_baseline(q: i64) -> Result<Codebook> {
    if q < 3 {
        return Err(Error::InvalidModulus(q));
    }
    Codebook::new(
        q,
        1,
        "baseline",
        BTreeMap::new(),
        vec![vec![0], vec![q / 2]],
    )
}

/// Circulant code generated by `[⌊q/2⌋, γ, 0, …, 0]`: codeword for message
/// `m ∈ {0,1}^ℓ` is `G·m mod q`.
pub fn build_minal(q: i64, ell: usize, gamma: i64) -> Result<Codebook> {
    if !matches!(ell, 2 | 4 | 8) {
        return Err(Error::InvalidParameter(format!(
            "minal requires ell in {{2,4,8}}, got {ell}"
        )));
    }
    check_gamma(q, gamma)?;
    let a = q / 2;
    // circulant rows: row r of G has a at column r and γ at column (r-1 mod ℓ)
    let mut codewords = Vec::with_capacity(1 << ell);
    for label in 0..1usize << ell {
        let m: Vec<i64> = (0..ell).map(|i| ((label >> i) & 1) as i64).collect();
        let mut cw = vec![0i64; ell];
        for (r, c) in cw.iter_mut().enumerate() {
            let prev = (r + ell - 1) % ell;
            *c = (a * m[r] + gamma * m[prev]).rem_euclid(q);
        }
        codewords.push(cw);
    }
    let mut params = BTreeMap::new();
    params.insert("gamma".into(), serde_json::json!(gamma));
    Codebook::new(q, ell, "minal", params, codewords)
}

/// The ℓ=2 code: the circulant construction at the distance-optimal γ.
pub fn build_mtd2(q: i64) -> Result<Codebook> {
    let gamma = gamma_star(q, 2)?;
    let mut cb = build_minal(q, 2, gamma)?;
    cb.construction = "mtd2".into();
    Ok(cb)
}

/// Base codewords of the D4 construction in ℤ_6⁴, in canonical listing order.
pub const GTD4_BASE: [[i64; 4]; 16] = [
    [0, 0, 0, 0],
    [4, 2, 4, 0],
    [3, 3, 3, 3],
    [2, 0, 4, 2],
    [2, 4, 2, 0],
    [3, 1, 1, 1],
    [1, 1, 3, 5],
    [1, 5, 1, 3],
    [0, 2, 2, 2],
    [3, 5, 5, 5],
    [1, 3, 5, 1],
    [0, 4, 4, 4],
    [4, 0, 2, 4],
    [4, 4, 0, 2],
    [5, 1, 5, 3],
    [5, 5, 3, 1],
];

/// The ℓ=4 lattice code: the canonical 16-point D4 subset in ℤ_6⁴, scaled by
/// ⌊q/6⌋.
pub fn build_gtd4(q: i64) -> Result<Codebook> {
    if q < 12 {
        return Err(Error::InvalidModulus(q));
    }
    let s = q / 6;
    let codewords: Vec<Vec<i64>> = GTD4_BASE
        .iter()
        .map(|base| base.iter().map(|&c| c * s).collect())
        .collect();
    let mut params = BTreeMap::new();
    params.insert("lattice".into(), serde_json::json!("d4"));
    params.insert("p".into(), serde_json::json!(6));
    params.insert("scale".into(), serde_json::json!(s));
    Codebook::new(q, 4, "gtd4", params, codewords)
}

/// Base point of the 2E8 code for a label: bit 0 picks the coset (0 even,
/// 1 odd), bits 1..=7 pick coordinates 0..=6 within {0,2} or {1,3}, and the
/// last coordinate is forced by the coset sum rule.
pub fn gtd8_base_point(label: usize) -> [i64; 8] {
    let par = (label & 1) as i64;
    let mut x = [0i64; 8];
    let mut bitsum = 0i64;
    for i in 0..7 {
        let b = ((label >> (i + 1)) & 1) as i64;
        x[i] = 2 * b + par;
        bitsum += b;
    }
    // both cosets reduce to: sum of the {0,1} selectors must be even
    x[7] = 2 * (bitsum & 1) + par;
    x
}

fn gtd8_label_of_base(x: &[i64]) -> usize {
    let par = (x[0] & 1) as usize;
    let mut label = par;
    for i in 0..7 {
        label |= (((x[i] >> 1) & 1) as usize) << (i + 1);
    }
    label
}

/// The ℓ=8 lattice code: `⌊q/4⌋ · (2E8 ∩ ℤ_4⁸)`, 256 codewords with a
/// systematic labeling.
pub fn build_gtd8(q: i64) -> Result<Codebook> {
    if q < 8 {
        return Err(Error::InvalidModulus(q));
    }
    let s = q / 4;
    let mut codewords = Vec::with_capacity(256);
    for label in 0..256usize {
        let base = gtd8_base_point(label);
        debug_assert_eq!(gtd8_label_of_base(&base), label);
        codewords.push(base.iter().map(|&c| c * s).collect());
    }
    let mut params = BTreeMap::new();
    params.insert("lattice".into(), serde_json::json!("e8x2"));
    params.insert("p".into(), serde_json::json!(4));
    params.insert("scale".into(), serde_json::json!(s));
    Codebook::new(q, 8, "gtd8", params, codewords)
}

/// Fast decoder for the ℓ=8 code, equivalent to exhaustive decoding.
///
/// This is the coset decoder behind [`crate::lattice::cvp_e8_fast`] transplanted to
/// the exact toroidal metric: within each coset the per-coordinate choice is
/// binary ({0,2}·s or {1,3}·s), so decode each coordinate independently and
/// repair the coset sum condition with the cheapest flip. Float rescaling by
/// 4/q would *not* be equivalent — ⌊q/4⌋·4 ≠ q in general, and the skew flips
/// decisions near Voronoi boundaries — so all costs here are exact integers.
/// Candidate set: per coset, the unconstrained optimum plus (when the parity
/// repair is needed) all eight single-coordinate flips; the winner is the
/// minimum of (toroidal distance², label), matching the exhaustive tie rule.
pub fn decode_gtd8_fast(cb: &Codebook, received: &TorusVector) -> Result<usize> {
    if cb.construction() != "gtd8" {
        return Err(Error::InvalidParameter(
            "fast path only applies to the gtd8 construction".into(),
        ));
    }
    if received.q() != cb.q || received.dim() != 8 {
        return Err(Error::DimensionMismatch("fast gtd8 decode".into()));
    }
    let q = cb.q;
    let s = q / 4;
    let x = received.coords();
    let cost = |xi: i64, b: i64| -> u128 {
        let d = mod_pm(xi - s * b, q).expect("valid modulus");
        (d as i128 * d as i128) as u128
    };
    let mut best: Option<(u128, usize)> = None;
    let consider = |base: &[i64; 8], best: &mut Option<(u128, usize)>| {
        let total: u128 = (0..8).map(|i| cost(x[i], base[i])).sum();
        let label = gtd8_label_of_base(base);
        if best.is_none() || (total, label) < best.unwrap() {
            *best = Some((total, label));
        }
    };
    for par in 0..2i64 {
        // per-coordinate optimum within the coset; selector tie -> 0 for the
        // lowest-label convention
        let mut base = [0i64; 8];
        let mut selectors = 0i64;
        for i in 0..8 {
            let (lo, hi) = (par, par + 2);
            if cost(x[i], hi) < cost(x[i], lo) {
                base[i] = hi;
                selectors += 1;
            } else {
                base[i] = lo;
            }
        }
        if selectors % 2 == 0 {
            consider(&base, &mut best);
        } else {
            // sum rule violated: try every single-coordinate repair
            for i in 0..8 {
                let mut cand = base;
                cand[i] = par + 2 - (base[i] - par);
                consider(&cand, &mut best);
            }
        }
    }
    Ok(best.expect("nonempty candidate set").1)
}

/// Lee distance on ℤ_p vectors.
pub fn lee_distance(p: i64, a: &[i64], b: &[i64]) -> i64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y).rem_euclid(p);
            d.min(p - d)
        })
        .sum()
}

/// Distance metric for subset search.
#[derive(Clone, Copy, Debug)]
pub enum SubsetMetric {
    /// Squared L2 toroidal distance mod q.
    L2Toroidal { q: i64 },
    /// Lee distance mod p.
    Lee { p: i64 },
}

impl SubsetMetric {
    fn dist(&self, a: &[i64], b: &[i64]) -> u128 {
        match *self {
            SubsetMetric::L2Toroidal { q } => toroidal_dist_sq_raw(q, a, b),
            SubsetMetric::Lee { p } => lee_distance(p, a, b) as u128,
        }
    }
}

/// Deterministic max-min subset selection: greedy farthest-point seeding from
/// the zero point (or the lexicographically smallest point if zero is
/// absent), then exhaustive single-swap hill climbing. Ties break toward the
/// lexicographically smaller candidate. Returns the chosen indices (sorted)
/// and the achieved min pairwise distance.
pub fn search_maxmin_subset(
    points: &[Vec<i64>],
    target: usize,
    metric: SubsetMetric,
) -> Result<(Vec<usize>, u128)> {
    let n = points.len();
    if target > n || target < 2 {
        return Err(Error::InvalidParameter(format!(
            "cannot select {target} of {n} points"
        )));
    }
    // pairwise distance table
    let mut dist = vec![0u128; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = metric.dist(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let seed = (0..n)
        .min_by(|&a, &b| points[a].cmp(&points[b]))
        .expect("nonempty");
    let mut chosen = vec![seed];
    let mut in_set = vec![false; n];
    in_set[seed] = true;
    while chosen.len() < target {
        // farthest-point: maximize distance to the current set
        let mut best: Option<usize> = None;
        let mut best_d = 0u128;
        for c in 0..n {
            if in_set[c] {
                continue;
            }
            let d = chosen.iter().map(|&s| dist[c * n + s]).min().unwrap();
            let better = match best {
                None => true,
                Some(b) => d > best_d || (d == best_d && points[c] < points[b]),
            };
            if better {
                best = Some(c);
                best_d = d;
            }
        }
        let c = best.unwrap();
        in_set[c] = true;
        chosen.push(c);
    }
    // score = (min pairwise distance, -count of pairs attaining it); the
    // second component lets the hill climb walk along plateaus where the min
    // distance is stuck but the number of critical pairs can still shrink.
    let score = |set: &[usize]| -> (u128, i64) {
        let mut m = u128::MAX;
        let mut cnt = 0i64;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                let d = dist[i * n + j];
                match d.cmp(&m) {
                    std::cmp::Ordering::Less => {
                        m = d;
                        cnt = 1;
                    }
                    std::cmp::Ordering::Equal => cnt += 1,
                    std::cmp::Ordering::Greater => {}
                }
            }
        }
        (m, -cnt)
    };
    let mut cur = score(&chosen);
    loop {
        let mut best_swap: Option<(usize, usize, (u128, i64))> = None;
        for pos in 0..chosen.len() {
            for c in 0..n {
                if in_set[c] {
                    continue;
                }
                let old = chosen[pos];
                chosen[pos] = c;
                let m = score(&chosen);
                chosen[pos] = old;
                if m > cur {
                    let better = match best_swap {
                        None => true,
                        Some((_, bc, bm)) => m > bm || (m == bm && points[c] < points[bc]),
                    };
                    if better {
                        best_swap = Some((pos, c, m));
                    }
                }
            }
        }
        let Some((pos, c, m)) = best_swap else { break };
        in_set[chosen[pos]] = false;
        in_set[c] = true;
        chosen[pos] = c;
        cur = m;
    }

    // escalation: the local search can stall well below the optimum (its
    // single-swap neighborhood is too small), so try to *construct* a subset
    // whose min distance clears each next threshold outright, via budgeted
    // backtracking on the "distance >= t" compatibility graph. Feasible
    // thresholds are found quickly; an exhausted budget at an infeasible one
    // just stops the improvement, keeping the best subset found so far.
    let mut values: Vec<u128> = dist.iter().copied().filter(|&d| d > cur.0).collect();
    values.sort_unstable();
    values.dedup();
    let mut best_set = chosen;
    let mut best_val = cur.0;
    for t in values {
        let mut budget: u64 = 2_000_000;
        match clique_at_threshold(&dist, n, target, t, &mut budget) {
            Some(set) => {
                best_set = set;
                best_val = t;
            }
            None => break, // proven infeasible, or budget exhausted
        }
    }
    best_set.sort_unstable();
    Ok((best_set, best_val))
}

/// Find `target` indices with all pairwise distances >= `t` by lexicographic
/// depth-first search over the compatibility graph, or `None` if none exists
/// (or the node budget runs out).
fn clique_at_threshold(
    dist: &[u128],
    n: usize,
    target: usize,
    t: u128,
    budget: &mut u64,
) -> Option<Vec<usize>> {
    let words = n.div_ceil(64);
    // adjacency bitsets
    let mut adj = vec![0u64; n * words];
    for i in 0..n {
        for j in 0..n {
            if i != j && dist[i * n + j] >= t {
                adj[i * words + j / 64] |= 1 << (j % 64);
            }
        }
    }
    let mut chosen = Vec::with_capacity(target);
    for root in 0..n {
        // restrict to indices > root for canonical (sorted) subsets
        let mut cands = adj[root * words..(root + 1) * words].to_vec();
        mask_below(&mut cands, root + 1);
        chosen.push(root);
        if clique_dfs(&adj, words, target, &mut chosen, &cands, budget) {
            return Some(chosen);
        }
        chosen.pop();
        if *budget == 0 {
            return None;
        }
    }
    None
}

fn mask_below(bits: &mut [u64], upto: usize) {
    for (w, word) in bits.iter_mut().enumerate() {
        if (w + 1) * 64 <= upto {
            *word = 0;
        } else if w * 64 < upto {
            *word &= !((1u64 << (upto - w * 64)) - 1);
        }
    }
}

fn clique_dfs(
    adj: &[u64],
    words: usize,
    target: usize,
    chosen: &mut Vec<usize>,
    cands: &[u64],
    budget: &mut u64,
) -> bool {
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    if chosen.len() == target {
        return true;
    }
    let remaining: usize = cands.iter().map(|w| w.count_ones() as usize).sum();
    if chosen.len() + remaining < target {
        return false;
    }
    let mut cands = cands.to_vec();
    loop {
        // lowest-index candidate
        let Some(c) = first_set_bit(&cands) else { return false };
        let mut next: Vec<u64> = cands
            .iter()
            .zip(&adj[c * words..(c + 1) * words])
            .map(|(&a, &b)| a & b)
            .collect();
        mask_below(&mut next, c + 1);
        chosen.push(c);
        if clique_dfs(adj, words, target, chosen, &next, budget) {
            return true;
        }
        chosen.pop();
        cands[c / 64] &= !(1 << (c % 64));
        let rem: usize = cands.iter().map(|w| w.count_ones() as usize).sum();
        if chosen.len() + rem < target || *budget == 0 {
            return false;
        }
    }
}

fn first_set_bit(bits: &[u64]) -> Option<usize> {
    for (w, &word) in bits.iter().enumerate() {
        if word != 0 {
            return Some(w * 64 + word.trailing_zeros() as usize);
        }
    }
    None
}

/// The Lee-metric comparison code: 16 of the 25 codewords
/// `{m·G mod 5 : m ∈ ℤ_5²}` with maximal min pairwise Lee distance, scaled by
/// ⌊q/5⌋.
pub fn build_mld(q: i64) -> Result<Codebook> {
    if q < 10 {
        return Err(Error::InvalidModulus(q));
    }
    let full = mld_full_set();
    let (chosen, _) = search_maxmin_subset(&full, 16, SubsetMetric::Lee { p: 5 })?;
    let s = q / 5;
    let mut selected: Vec<Vec<i64>> = chosen.iter().map(|&i| full[i].clone()).collect();
    selected.sort();
    let codewords: Vec<Vec<i64>> = selected
        .iter()
        .map(|cw| cw.iter().map(|&c| c * s).collect())
        .collect();
    let mut params = BTreeMap::new();
    params.insert("generator".into(), serde_json::json!([[3, 4, 1, 0], [0, 3, 4, 1]]));
    params.insert("p".into(), serde_json::json!(5));
    params.insert("scale".into(), serde_json::json!(s));
    Codebook::new(q, 4, "mld", params, codewords)
}

/// All 25 codewords of the length-4 code over ℤ_5.
pub fn mld_full_set() -> Vec<Vec<i64>> {
    const G: [[i64; 4]; 2] = [[3, 4, 1, 0], [0, 3, 4, 1]];
    let mut out = Vec::with_capacity(25);
    for m1 in 0..5i64 {
        for m2 in 0..5i64 {
            let cw: Vec<i64> = (0..4)
                .map(|j| (m1 * G[0][j] + m2 * G[1][j]).rem_euclid(5))
                .collect();
            out.push(cw);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Construction registry
// ---------------------------------------------------------------------------

/// A named codebook construction selectable at runtime.
pub trait Construction: Send + Sync {
    fn name(&self) -> &'static str;
    fn ell(&self) -> usize;
    /// Build the codebook for modulus `q` with optional parameters
    /// (currently only `gamma` for the circulant family).
    fn build(&self, q: i64, gamma: Option<i64>) -> Result<Codebook>;
}

macro_rules! simple_construction {
    ($ty:ident, $name:literal, $ell:literal, $builder:path) => {
        struct $ty;
        impl Construction for $ty {
            fn name(&self) -> &'static str {
                $name
            }
            fn ell(&self) -> usize {
                $ell
            }
            fn build(&self, q: i64, gamma: Option<i64>) -> Result<Codebook> {
                if gamma.is_some() {
                    return Err(Error::InvalidParameter(format!(
                        "construction `{}` takes no gamma parameter",
                        $name
                    )));
                }
                $builder(q)
            }
        }
    };
}

simple_construction!(Baseline, "baseline", 1, build_baseline);
simple_construction!(Mtd2, "mtd2", 2, build_mtd2);
simple_construction!(Gtd4, "gtd4", 4, build_gtd4);
simple_construction!(Gtd8, "gtd8", 8, build_gtd8);
simple_construction!(Mld, "mld", 4, build_mld);

struct Minal {
    ell: usize,
}

impl Construction for Minal {
    fn name(&self) -> &'static str {
        match self.ell {
            2 => "minal2",
            4 => "minal4",
            _ => "minal8",
        }
    }
    fn ell(&self) -> usize {
        self.ell
    }
    fn build(&self, q: i64, gamma: Option<i64>) -> Result<Codebook> {
        let gamma = match gamma {
            Some(g) => g,
            None => gamma_star(q, self.ell)?,
        };
        build_minal(q, self.ell, gamma)
    }
}

/// All registered constructions, in presentation order.
pub fn registry() -> Vec<Box<dyn Construction>> {
    vec![
        Box::new(Baseline),
        Box::new(Minal { ell: 2 }),
        Box::new(Mtd2),
        Box::new(Minal { ell: 4 }),
        Box::new(Minal { ell: 8 }),
        Box::new(Gtd4),
        Box::new(Gtd8),
        Box::new(Mld),
    ]
}

/// Look up a construction by its registry name.
pub fn lookup(name: &str) -> Result<Box<dyn Construction>> {
    registry()
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| Error::UnknownConstruction(name.to_string()))
}

/// Max-min distance of the best 4-point code in ℤ_q² with one point pinned at
/// the origin, by brute force over all 3-subsets of the remaining points.
/// Returns the squared min pairwise toroidal distance of the best code.
///
/// Intended for small q (cost is C(q²−1, 3) subsets); q=17 takes seconds.
pub fn best_4point_code_dmin_sq(q: i64) -> u128 {
    let pts: Vec<(i64, i64)> = (0..q)
        .flat_map(|a| (0..q).map(move |b| (a, b)))
        .filter(|&p| p != (0, 0))
        .collect();
    let n = pts.len();
    // distances to the origin and between pairs, precomputed as u32
    let d2 = |a: (i64, i64), b: (i64, i64)| -> u32 {
        let dx = mod_pm(a.0 - b.0, q).unwrap();
        let dy = mod_pm(a.1 - b.1, q).unwrap();
        (dx * dx + dy * dy) as u32
    };
    let d0: Vec<u32> = pts.iter().map(|&p| d2(p, (0, 0))).collect();
    let mut pair = vec![0u32; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = d2(pts[i], pts[j]);
            pair[i * n + j] = d;
            pair[j * n + i] = d;
        }
    }
    let mut best = 0u32;
    for i in 0..n {
        if d0[i] <= best {
            continue;
        }
        for j in i + 1..n {
            let mij = d0[i].min(d0[j]).min(pair[i * n + j]);
            if mij <= best {
                continue;
            }
            for k in j + 1..n {
                let m = mij
                    .min(d0[k])
                    .min(pair[i * n + k])
                    .min(pair[j * n + k]);
                if m > best {
                    best = m;
                }
            }
        }
    }
    best as u128
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::torus::norm_sq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn baseline_shape() {
        let cb = build_baseline(3329).unwrap();
        assert_eq!(cb.codewords(), &[vec![0], vec![1664]]);
        assert_eq!(cb.min_distance_sq(), 1664 * 1664);
        let cb4 = build_baseline(4).unwrap();
        assert_eq!(cb4.codewords(), &[vec![0], vec![2]]);
    }

    #[test]
    fn gamma_star_reference_values() {
        assert_eq!(gamma_star(3329, 2).unwrap(), 446);
        assert_eq!(gamma_star(3329, 4).unwrap(), 751);
        assert_eq!(gamma_star(3329, 8).unwrap(), 981);
        assert_eq!(gamma_star(3329, 16).unwrap(), 1157);
        assert!(gamma_star(3329, 1).is_err());
    }

    #[test]
    fn minal_codewords_and_formula() {
        let cb = build_minal(3329, 2, 446).unwrap();
        let cws = cb.codewords();
        assert!(cws.contains(&vec![0, 0]));
        assert!(cws.contains(&vec![1664, 446]));
        assert!(cws.contains(&vec![446, 1664]));
        assert!(cws.contains(&vec![2110, 2110]));
        let f = minal_dmin_formula(3329, 2, 446).unwrap();
        // the two branches nearly equalize at the optimum: √(1664²+446²) ≈
        // 1722.73 and √2·1218 ≈ 1722.51; the min is the second
        assert!((f - 1722.5117).abs() < 0.01);
        let b1 = (1664.0f64 * 1664.0 + 446.0 * 446.0).sqrt();
        assert!((b1 - f).abs() < 2.0);
        assert!((f - cb.min_distance()).abs() < 1e-9);
        // γ=0 degenerates to the per-coordinate baseline value
        assert_eq!(minal_dmin_formula(3329, 2, 0).unwrap(), 1664.0);
    }

    #[test]
    fn lemma_formula_matches_exhaustive_small_q() {
        for q in [17i64, 31] {
            for ell in [2usize, 4] {
                for gamma in 0..(q + 1) / 2 {
                    let f = minal_dmin_formula(q, ell, gamma).unwrap();
                    match build_minal(q, ell, gamma) {
                        Ok(cb) => assert!(
                            (f - cb.min_distance()).abs() < 1e-9,
                            "q={q} ell={ell} gamma={gamma}: {f} vs {}",
                            cb.min_distance()
                        ),
                        // γ = ⌊q/2⌋ at odd q collapses codewords; the
                        // formula agrees the distance is zero
                        Err(Error::InvalidCodebook(_)) => assert_eq!(f, 0.0),
                        Err(e) => panic!("unexpected error: {e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn gtd4_reference_values() {
        let cb = build_gtd4(3329).unwrap();
        assert!(cb.codewords().contains(&vec![1662, 1662, 1662, 1662]));
        let d = cb.min_distance();
        assert!((d - 554.0 * 12f64.sqrt()).abs() < 1e-9);
        assert!((d / 3329.0 - 0.5765).abs() < 0.001);
        // base points all lie in D4
        let d4 = LatticeSpec::d4();
        for base in GTD4_BASE {
            assert!(d4.is_member(&base));
        }
        // base min toroidal distance in ℤ_6⁴ is 2√3 (squared: 12)
        let base_cb = Codebook::new(
            6,
            4,
            "gtd4-base",
            BTreeMap::new(),
            GTD4_BASE.iter().map(|b| b.to_vec()).collect(),
        )
        .unwrap();
        assert_eq!(base_cb.min_distance_sq(), 12);
    }

    #[test]
    fn gtd8_reference_values() {
        let cb = build_gtd8(3329).unwrap();
        assert_eq!(cb.len(), 256);
        let d = cb.min_distance();
        assert!((d - 832.0 * 8f64.sqrt()).abs() < 1e-9);
        assert!((d / 3329.0 - 0.707).abs() < 0.001);
        // labeling is a bijection onto 2E8 ∩ ℤ_4⁸
        let e8 = LatticeSpec::e8_doubled();
        let mut bases: Vec<[i64; 8]> = (0..256).map(gtd8_base_point).collect();
        for b in &bases {
            assert!(e8.is_member(b));
        }
        bases.sort();
        bases.dedup();
        assert_eq!(bases.len(), 256);
    }

    #[test]
    fn mld_reference_values() {
        let full = mld_full_set();
        assert_eq!(full.len(), 25);
        assert!(full.contains(&vec![3, 4, 1, 0]));
        // full set has min Lee distance 4
        let mut min_lee = i64::MAX;
        for i in 0..25 {
            for j in i + 1..25 {
                min_lee = min_lee.min(lee_distance(5, &full[i], &full[j]));
            }
        }
        assert_eq!(min_lee, 4);
        let cb = build_mld(3329).unwrap();
        assert_eq!(cb.len(), 16);
        assert_eq!(cb.min_distance_sq(), 1330 * 1330);
        assert!((cb.min_distance() / 3329.0 - 0.4).abs() < 0.001);
    }

    #[test]
    fn encode_decode_round_trip_all_constructions() {
        for c in registry() {
            let cb = c.build(3329, None).unwrap();
            for label in 0..cb.len() {
                let v = cb.encode(label).unwrap();
                assert_eq!(cb.decode(&v).unwrap(), label, "{}", c.name());
            }
        }
    }

    #[test]
    fn decode_within_half_min_distance() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for c in registry() {
            let cb = c.build(3329, None).unwrap();
            let dmin = cb.min_distance();
            for _ in 0..200 {
                let label = rng.gen_range(0..cb.len());
                let cw = cb.codeword(label);
                // random integer noise with norm < dmin/2
                let noise: Vec<i64> = loop {
                    let cand: Vec<i64> = (0..cb.ell())
                        .map(|_| rng.gen_range(-(dmin as i64) / 2..=(dmin as i64) / 2))
                        .collect();
                    if (norm_sq(&cand) as f64).sqrt() < dmin / 2.0 {
                        break cand;
                    }
                };
                let received: Vec<i64> = cw
                    .iter()
                    .zip(&noise)
                    .map(|(&c, &n)| (c + n).rem_euclid(3329))
                    .collect();
                let v = TorusVector::new(3329, received).unwrap();
                assert_eq!(cb.decode(&v).unwrap(), label, "{}", c.name());
            }
        }
    }

    #[test]
    fn gtd8_fast_decode_matches_exhaustive() {
        let cb = build_gtd8(3329).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(88);
        let mut checked = 0usize;
        while checked < 5000 {
            let coords: Vec<i64> = (0..8).map(|_| rng.gen_range(0..3329)).collect();
            let v = TorusVector::new(3329, coords).unwrap();
            let slow = cb.decode(&v).unwrap();
            let fast = decode_gtd8_fast(&cb, &v).unwrap();
            assert_eq!(fast, slow, "coords {:?}", v.coords());
            checked += 1;
        }
    }

    #[test]
    fn subset_search_trivial_full_selection() {
        let e8 = LatticeSpec::e8_doubled();
        let pts = e8.enumerate_mod_p(4).unwrap();
        let (chosen, _) =
            search_maxmin_subset(&pts, 256, SubsetMetric::L2Toroidal { q: 4 }).unwrap();
        assert_eq!(chosen.len(), 256);
    }

    #[test]
    fn subset_search_beats_random_on_mld() {
        let full = mld_full_set();
        let (_, best) = search_maxmin_subset(&full, 16, SubsetMetric::Lee { p: 5 }).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        for _ in 0..2000 {
            let mut idx: Vec<usize> = (0..25).collect();
            for i in 0..16 {
                let j = rng.gen_range(i..25);
                idx.swap(i, j);
            }
            let mut m = u128::MAX;
            for a in 0..16 {
                for b in a + 1..16 {
                    m = m.min(lee_distance(5, &full[idx[a]], &full[idx[b]]) as u128);
                }
            }
            assert!(best >= m);
        }
    }

    #[test]
    fn d4_subset_matches_reference_distance() {
        let d4 = LatticeSpec::d4();
        let pts = d4.enumerate_mod_p(6).unwrap();
        assert_eq!(pts.len(), 648);
        let (_, best) = search_maxmin_subset(&pts, 16, SubsetMetric::L2Toroidal { q: 6 }).unwrap();
        assert!(best >= 12, "achieved squared distance {best} < 12");
    }

    #[test]
    fn registry_lookup() {
        for name in ["baseline", "minal2", "mtd2", "minal4", "minal8", "gtd4", "gtd8", "mld"] {
            assert!(lookup(name).is_ok(), "{name}");
        }
        assert!(matches!(
            lookup("nope"),
            Err(Error::UnknownConstruction(_))
        ));
    }

    #[test]
    fn table_distance_row() {
        let q = 3329i64;
        let cases: [(&str, Option<i64>, f64); 6] = [
            ("baseline", None, 0.5),
            ("mtd2", None, 0.518),
            ("minal4", Some(751), 0.548),
            ("mld", None, 0.4),
            ("gtd4", None, 0.577),
            ("gtd8", None, 0.707),
        ];
        for (name, gamma, expect) in cases {
            let cb = lookup(name).unwrap().build(q, gamma).unwrap();
            let ratio = cb.min_distance() / q as f64;
            assert!(
                (ratio - expect).abs() <= 0.001,
                "{name}: {ratio} vs {expect}"
            );
        }
    }

    #[test]
    fn small_q_bruteforce_vs_minal() {
        // at q=17 no 4-point planar code beats the best circulant code
        let best = best_4point_code_dmin_sq(17);
        let mut best_minal = 0u128;
        for gamma in 0..9 {
            if let Ok(cb) = build_minal(17, 2, gamma) {
                best_minal = best_minal.max(cb.min_distance_sq());
            }
        }
        assert_eq!(best, best_minal);
        assert_eq!(best, 68);
    }
}
