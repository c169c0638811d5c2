//! Decryption-failure-rate evaluation: exact pairwise tail probabilities,
//! the union bound over ordered codeword pairs, a Chernoff upper-bound
//! cross-check, and end-to-end Monte Carlo simulation.
//!
//! The bound evaluated is
//!   DFR ≤ (ν/|C|) · Σ_{Δv} Σ_{Δv′≠Δv} Pr[ ⟨Δn_e, d⟩ ≥ ½‖d‖² ],
//! with d the centered difference Δv′ − Δv. Pairs sharing the same d are
//! collapsed into one tail evaluation with a multiplicity.

use crate::dist::ProbDist;
use crate::error::{Error, Result};
use crate::fixed;
use crate::noise::{
    dist_cbd, dist_quant_u, dist_quant_v_plus_e2, noise_projection_dist, sigma_vector,
};
use crate::pke::{decrypt, encrypt, keygen, random_message, Params};
use crate::ring::ChaChaStream;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use std::collections::BTreeMap;
use std::time::Instant;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Tail mass Pr[X ≥ num/den] including pruned mass (upper-bound semantics).
pub fn p_error_exact(dist: &ProbDist, num: i64, den: i64) -> Vec<u64> {
    dist.tail_mass_ge(num, den)
}

// ---------------------------------------------------------------------------
// Chernoff bound
// ---------------------------------------------------------------------------

/// A finite pmf in (value, ln mass) form, for moment-generating functions.
#[derive(Clone, Debug)]
pub struct MgfTable {
    pub values: Vec<i64>,
    pub ln_probs: Vec<f64>,
    pub variance: f64,
}

fn logsumexp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl MgfTable {
    pub fn from_dist(d: &ProbDist) -> Self {
        let pairs = d.to_f64_pairs();
        let values: Vec<i64> = pairs.iter().map(|&(v, _)| v).collect();
        let ln_probs: Vec<f64> = pairs.iter().map(|&(_, p)| p.ln()).collect();
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        let mean: f64 = pairs.iter().map(|&(v, p)| v as f64 * p).sum::<f64>() / total;
        let variance = pairs
            .iter()
            .map(|&(v, p)| (v as f64 - mean).powi(2) * p)
            .sum::<f64>()
            / total;
        MgfTable {
            values,
            ln_probs,
            variance,
        }
    }

    /// ln E[e^{tX}].
    pub fn ln_mgf(&self, t: f64) -> f64 {
        logsumexp(
            self.values
                .iter()
                .zip(&self.ln_probs)
                .map(|(&v, &lp)| lp + t * v as f64),
        )
    }
}

/// One independent factor of the projection, with a multiplicity.
pub enum ChernoffTerm {
    /// An explicitly tabulated pmf.
    Table { table: MgfTable, mult: f64 },
    /// ⟨ab, d⟩ with a ~ φa i.i.d. per coordinate, conditioned on grouped
    /// σ-patterns of the enumerated factor b: ln MGF(t) =
    /// ln Σ_groups Pr(σ)·Π_i MGF_a(σᵢ t) — never tabulated explicitly.
    Product {
        sigma_groups: Vec<(Vec<i64>, f64)>,
        phi_a: MgfTable,
        mult: f64,
    },
}

impl ChernoffTerm {
    pub fn ln_mgf(&self, t: f64) -> f64 {
        match self {
            ChernoffTerm::Table { table, mult } => mult * table.ln_mgf(t),
            ChernoffTerm::Product {
                sigma_groups,
                phi_a,
                mult,
            } => {
                let per = logsumexp(sigma_groups.iter().map(|(sigma, lp)| {
                    lp + sigma
                        .iter()
                        .filter(|&&s| s != 0)
                        .map(|&s| phi_a.ln_mgf(s as f64 * t))
                        .sum::<f64>()
                }));
                mult * per
            }
        }
    }

    fn variance(&self) -> f64 {
        match self {
            ChernoffTerm::Table { table, mult } => mult * table.variance,
            ChernoffTerm::Product {
                sigma_groups,
                phi_a,
                mult,
            } => {
                // conditional variance given σ is Var(a)·Σσᵢ² (a has mean 0)
                let v: f64 = sigma_groups
                    .iter()
                    .map(|(sigma, lp)| {
                        lp.exp()
                            * sigma.iter().map(|&s| (s * s) as f64).sum::<f64>()
                            * phi_a.variance
                    })
                    .sum();
                mult * v
            }
        }
    }
}

/// log₂ of min(1, min_t e^{−t·thr}·Π MGFᵢ(t)) over the given t grid.
pub fn p_error_chernoff_grid(terms: &[ChernoffTerm], threshold: f64, grid: &[f64]) -> f64 {
    let mut best = 0.0f64; // log2(1)
    for &t in grid {
        if t < 0.0 {
            continue;
        }
        let ln_bound = -t * threshold + terms.iter().map(|c| c.ln_mgf(t)).sum::<f64>();
        best = best.min(ln_bound * LOG2_E);
    }
    best
}

/// Chernoff bound with an automatic geometric t grid centered on the
/// Gaussian-optimal t ≈ threshold / Var.
pub fn p_error_chernoff(terms: &[ChernoffTerm], threshold: f64) -> f64 {
    let var: f64 = terms.iter().map(|c| c.variance()).sum();
    if var <= 0.0 || threshold <= 0.0 {
        return 0.0;
    }
    let t0 = threshold / var;
    let grid: Vec<f64> = (-48..=48).map(|j| t0 * (j as f64 / 8.0).exp2()).collect();
    p_error_chernoff_grid(terms, threshold, &grid)
}

/// Assemble the Chernoff factorization of ⟨Δn_e, d⟩ for one difference d.
pub fn chernoff_terms(params: &Params, d: &[i64]) -> Result<Vec<ChernoffTerm>> {
    let ell = params.ell();
    if d.len() != ell {
        return Err(Error::DimensionMismatch("projection vector length".into()));
    }
    let limbs = crate::dist::DEFAULT_LIMBS;
    let reps = (params.k * params.n / ell) as f64;
    let beta1 = dist_cbd(params.eta1, limbs)?;
    let bcu = dist_cbd(params.eta2, limbs)?
        .convolve(&dist_quant_u(params.q, params.d_u, limbs)?)?;
    let cv = dist_quant_v_plus_e2(params.q, params.d_v, params.eta2, limbs)?;

    let mut terms = vec![
        product_term(d, &beta1, &beta1, reps)?,
        product_term(d, &beta1, &bcu, reps)?,
    ];
    let cv_table = MgfTable::from_dist(&cv);
    for &di in d {
        if di == 0 {
            continue;
        }
        terms.push(ChernoffTerm::Table {
            table: MgfTable {
                values: cv_table.values.iter().map(|&v| v * di).collect(),
                ln_probs: cv_table.ln_probs.clone(),
                variance: cv_table.variance * (di * di) as f64,
            },
            mult: 1.0,
        });
    }
    Ok(terms)
}

fn product_term(
    d: &[i64],
    phi_a: &ProbDist,
    phi_b: &ProbDist,
    mult: f64,
) -> Result<ChernoffTerm> {
    // enumerate the smaller-support factor (the roles commute)
    let (enumerated, kept) = if phi_b.len() <= phi_a.len() {
        (phi_b, phi_a)
    } else {
        (phi_a, phi_b)
    };
    let ell = d.len();
    let m = enumerated.len();
    if (m as f64).powi(ell as i32) > 2.0e7 {
        return Err(Error::BudgetExceeded(format!(
            "{m}^{ell} states exceed the Chernoff enumeration budget"
        )));
    }
    let probs: Vec<f64> = enumerated.to_f64_pairs().iter().map(|&(_, p)| p).collect();
    let vals: Vec<i64> = enumerated.to_f64_pairs().iter().map(|&(v, _)| v).collect();

    let mut groups: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut idx = vec![0usize; ell];
    let mut b = vec![vals[0]; ell];
    'outer: loop {
        let p: f64 = idx.iter().map(|&i| probs[i]).product();
        if p > 0.0 {
            let mut key = sigma_vector(d, &b);
            key.sort_unstable();
            *groups.entry(key).or_insert(0.0) += p;
        }
        let mut pos = 0;
        loop {
            if pos == ell {
                break 'outer;
            }
            idx[pos] += 1;
            if idx[pos] < m {
                b[pos] = vals[idx[pos]];
                break;
            }
            idx[pos] = 0;
            b[pos] = vals[0];
            pos += 1;
        }
    }
    Ok(ChernoffTerm::Product {
        sigma_groups: groups.into_iter().map(|(k, p)| (k, p.ln())).collect(),
        phi_a: MgfTable::from_dist(kept),
        mult,
    })
}

// ---------------------------------------------------------------------------
// Union bound
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    Chernoff,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Chernoff => "chernoff",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairRecord {
    /// Centered codeword difference.
    pub d: Vec<i64>,
    /// Number of ordered codeword pairs sharing this difference.
    pub multiplicity: u64,
    /// Tail threshold ‖d‖²/2, stored as the numerator over 2.
    pub threshold_times_2: i64,
    /// log₂ of the per-pair tail bound.
    pub log2_tail: f64,
    /// log₂ of pruned mass folded into the tail (exact method only).
    pub pruned_log2: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DfrReport {
    pub construction: String,
    pub ell: usize,
    pub q: i64,
    pub k: usize,
    pub eta1: u32,
    pub eta2: u32,
    pub d_u: u32,
    pub d_v: u32,
    pub nu: usize,
    pub codebook_size: usize,
    pub d_min_over_q: f64,
    pub pairs: Vec<PairRecord>,
    pub log2_dfr: f64,
    pub cer: f64,
    pub method: String,
    pub pruned_mass_log2: Option<f64>,
    pub wall_seconds: f64,
}

impl DfrReport {
    pub const CSV_HEADER: &'static str =
        "construction,ell,d_u,d_v,d_min_over_q,log2_dfr,method,cer,pruned_mass_log2,wall_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.5},{:.3},{},{},{},{:.3}",
            self.construction,
            self.ell,
            self.d_u,
            self.d_v,
            self.d_min_over_q,
            self.log2_dfr,
            self.method,
            self.cer,
            self.pruned_mass_log2
                .map(|p| format!("{p:.1}"))
                .unwrap_or_else(|| "".into()),
            self.wall_seconds
        )
    }
}

fn log2_biguint(x: &BigUint) -> Option<f64> {
    if x.is_zero() {
        return None;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top: BigUint = x >> shift;
    Some((top.to_f64().expect("fits")).log2() + shift as f64)
}

/// All representatives λ = d + q·z (z ∈ {−1,0,1}^ℓ) of one centered
/// difference with ‖λ‖² ≤ q². On the torus a codeword pair is separated by
/// one decision boundary per short representative of its difference class,
/// so the union bound must include each of them; representatives longer
/// than q contribute tails far below every other error term and are
/// dropped.
pub fn difference_representatives(d: &[i64], q: i64) -> Vec<Vec<i64>> {
    let cutoff = (q as i128) * (q as i128);
    let mut out = Vec::new();
    let mut cur = vec![0i64; d.len()];
    fn rec(
        d: &[i64],
        q: i64,
        i: usize,
        norm: i128,
        cutoff: i128,
        cur: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if norm > cutoff {
            return;
        }
        if i == d.len() {
            out.push(cur.clone());
            return;
        }
        for z in [0i64, -1, 1] {
            let v = d[i] + q * z;
            cur[i] = v;
            rec(d, q, i + 1, norm + (v as i128) * (v as i128), cutoff, cur, out);
        }
        cur[i] = d[i];
    }
    rec(d, q, 0, 0, cutoff, &mut cur, &mut out);
    out
}

/// Ordered-pair difference representatives grouped by identical vector.
pub fn grouped_differences(params: &Params) -> Vec<(Vec<i64>, u64)> {
    let mut groups: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for d in params.codebook.ordered_pair_differences() {
        for rep in difference_representatives(&d, params.q) {
            *groups.entry(rep).or_insert(0) += 1;
        }
    }
    groups.into_iter().collect()
}

/// Evaluate the DFR union bound for `params` with its embedded codebook.
pub fn dfr_union_bound(
    params: &Params,
    method: Method,
    prune_log2: Option<f64>,
) -> Result<DfrReport> {
    let start = Instant::now();
    let groups = grouped_differences(params);
    let frac = fixed::frac_bits(crate::dist::DEFAULT_LIMBS);

    // Per-difference tails; independent jobs, deterministic ordered output.
    let results: Vec<Result<(PairRecord, BigUint)>> = groups
        .par_iter()
        .map(|(d, mult)| {
            let norm_sq: i64 = d.iter().map(|&x| x * x).sum();
            match method {
                Method::Exact => {
                    let dist = noise_projection_dist(params, d, prune_log2)?;
                    let tail = p_error_exact(&dist, norm_sq, 2);
                    let big = fixed::to_biguint(&tail);
                    let rec = PairRecord {
                        d: d.clone(),
                        multiplicity: *mult,
                        threshold_times_2: norm_sq,
                        log2_tail: log2_biguint(&big)
                            .map(|l| l - frac as f64)
                            .unwrap_or(f64::NEG_INFINITY),
                        pruned_log2: dist.pruned_log2(),
                    };
                    Ok((rec, big))
                }
                Method::Chernoff => {
                    let terms = chernoff_terms(params, d)?;
                    let log2_tail = p_error_chernoff(&terms, norm_sq as f64 / 2.0);
                    let rec = PairRecord {
                        d: d.clone(),
                        multiplicity: *mult,
                        threshold_times_2: norm_sq,
                        log2_tail,
                        pruned_log2: None,
                    };
                    Ok((rec, BigUint::zero()))
                }
            }
        })
        .collect();

    let mut pairs = Vec::with_capacity(results.len());
    let mut sum_big = BigUint::zero();
    for r in results {
        let (rec, big) = r?;
        sum_big += big * BigUint::from(rec.multiplicity);
        pairs.push(rec);
    }

    let nu = params.nu();
    let size = params.codebook.len();
    let prefactor_log2 = (nu as f64).log2() - (size as f64).log2();
    let log2_dfr = match method {
        Method::Exact => log2_biguint(&sum_big)
            .map(|l| l - frac as f64 + prefactor_log2)
            .unwrap_or(f64::NEG_INFINITY),
        Method::Chernoff => {
            let lse = logsumexp(
                pairs
                    .iter()
                    .map(|p| p.log2_tail / LOG2_E + (p.multiplicity as f64).ln()),
            );
            lse * LOG2_E + prefactor_log2
        }
    }
    .min(0.0);

    let pruned_mass_log2 = pairs
        .iter()
        .filter_map(|p| p.pruned_log2)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));

    Ok(DfrReport {
        construction: params.codebook.construction().to_string(),
        ell: params.ell(),
        q: params.q,
        k: params.k,
        eta1: params.eta1,
        eta2: params.eta2,
        d_u: params.d_u,
        d_v: params.d_v,
        nu,
        codebook_size: size,
        d_min_over_q: params.codebook.min_distance() / params.q as f64,
        pairs,
        log2_dfr,
        cer: params.cer(),
        method: method.tag().to_string(),
        pruned_mass_log2,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McReport {
    pub construction: String,
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    /// Two-sided exact binomial 99% confidence interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub wall_seconds: f64,
}

/// Invert a Beta CDF by bisection (more precise in the far tails than the
/// library's generic inverse).
fn beta_inv_cdf(a: f64, b: f64, p: f64) -> f64 {
    let beta = Beta::new(a, b).expect("valid shape");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper–Pearson) two-sided binomial confidence interval.
pub fn clopper_pearson(failures: u64, trials: u64, confidence: f64) -> (f64, f64) {
    let alpha = 1.0 - confidence;
    let (f, n) = (failures as f64, trials as f64);
    let low = if failures == 0 {
        0.0
    } else {
        beta_inv_cdf(f, n - f + 1.0, alpha / 2.0)
    };
    let high = if failures == trials {
        1.0
    } else {
        beta_inv_cdf(f + 1.0, n - f, 1.0 - alpha / 2.0)
    };
    (low, high)
}

fn trial_seed(seed: u64, trial: u64, label: u8) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&trial.to_le_bytes());
    s[16] = label;
    s
}

/// Full keygen/encrypt/decrypt cycles with fresh keys per trial.
pub fn dfr_monte_carlo(params: &Params, trials: u64, seed: u64) -> Result<McReport> {
    let start = Instant::now();
    let failures: u64 = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let kp = keygen(params, &trial_seed(seed, t, 1))?;
            let mut ms = ChaChaStream::new(trial_seed(seed, t, 2));
            let m = random_message(params.n, &mut ms);
            let ct = encrypt(&kp.public, &m, params, &trial_seed(seed, t, 3))?;
            Ok((decrypt(&kp.secret, &ct, params)? != m) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (ci_low, ci_high) = clopper_pearson(failures, trials, 0.99);
    Ok(McReport {
        construction: params.codebook.construction().to_string(),
        trials,
        failures,
        rate: failures as f64 / trials as f64,
        ci_low,
        ci_high,
        seed,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Draw one sample of ⟨Δn_e, d⟩ directly from the component model —
/// an independent sampling oracle for the exact projection pipeline.
pub struct ProjectionSampler {
    d: Vec<i64>,
    reps: usize,
    beta1: Sampler,
    bcu: Sampler,
    cv: Sampler,
}

struct Sampler {
    values: Vec<i64>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn from_dist(d: &ProbDist) -> Self {
        let pairs = d.to_f64_pairs();
        let mut cdf = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for &(_, p) in &pairs {
            acc += p;
            cdf.push(acc);
        }
        Sampler {
            values: pairs.iter().map(|&(v, _)| v).collect(),
            cdf,
        }
    }

    fn draw(&self, u: f64) -> i64 {
        let i = self.cdf.partition_point(|&c| c < u);
        self.values[i.min(self.values.len() - 1)]
    }
}

impl ProjectionSampler {
    pub fn new(params: &Params, d: &[i64]) -> Result<Self> {
        let limbs = crate::dist::DEFAULT_LIMBS;
        let beta1 = dist_cbd(params.eta1, limbs)?;
        let bcu = dist_cbd(params.eta2, limbs)?
            .convolve(&dist_quant_u(params.q, params.d_u, limbs)?)?;
        let cv = dist_quant_v_plus_e2(params.q, params.d_v, params.eta2, limbs)?;
        Ok(ProjectionSampler {
            d: d.to_vec(),
            reps: params.k * params.n / params.ell(),
            beta1: Sampler::from_dist(&beta1),
            bcu: Sampler::from_dist(&bcu),
            cv: Sampler::from_dist(&cv),
        })
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> i64 {
        let ell = self.d.len();
        let mut total = 0i64;
        let mut a = vec![0i64; ell];
        let mut b = vec![0i64; ell];
        for phase in 0..2 {
            let b_src = if phase == 0 { &self.beta1 } else { &self.bcu };
            for _ in 0..self.reps {
                for i in 0..ell {
                    a[i] = self.beta1.draw(rng.gen());
                    b[i] = b_src.draw(rng.gen());
                }
                let sigma = sigma_vector(&self.d, &b);
                total += a.iter().zip(&sigma).map(|(&x, &s)| x * s).sum::<i64>();
            }
        }
        for &di in &self.d {
            if di != 0 {
                total += di * self.cv.draw(rng.gen());
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::lookup;
    use crate::dist::DEFAULT_LIMBS;
    use crate::noise::DEFAULT_PRUNE_LOG2;
    use rand::SeedableRng;

    const L: usize = DEFAULT_LIMBS;

    fn tiny_params(construction: &str) -> Params {
        // aggressive compression so per-pair tails sit far above the
        // arbitrary-precision pruning floor
        let cb = lookup(construction).unwrap().build(257, None).unwrap();
        Params::new(8, 257, 1, 1, 1, 4, 2, cb).unwrap()
    }

    #[test]
    fn exact_tail_trivials() {
        let p = ProbDist::point(0, L);
        assert!(fixed::is_zero(&p_error_exact(&p, 1, 1)));
        let u = ProbDist::from_dyadic(-1, 2, &[1, 1], 1, L).unwrap();
        let tail = p_error_exact(&u, 1, 1);
        assert_eq!(
            fixed::to_biguint(&tail),
            BigUint::from(1u8) << (fixed::frac_bits(L) - 1)
        );
    }

    #[test]
    fn chernoff_trivial_grid() {
        let b2 = dist_cbd(2, L).unwrap();
        let terms = vec![ChernoffTerm::Table {
            table: MgfTable::from_dist(&b2),
            mult: 1.0,
        }];
        // t = 0 gives MGF = 1 → bound 1
        assert_eq!(p_error_chernoff_grid(&terms, 5.0, &[0.0]), 0.0);
    }

    #[test]
    fn chernoff_brackets_exact_gaussian_like() {
        // beta_2 convolved 2^10 times, threshold at 8 sigma
        let b2 = dist_cbd(2, L).unwrap();
        let total = b2.self_conv_pow(1 << 10, None).unwrap();
        let thr = 256i64; // sigma = 32
        let exact = total.tail_log2_ge(thr, 1).unwrap();
        let terms = vec![ChernoffTerm::Table {
            table: MgfTable::from_dist(&b2),
            mult: 1024.0,
        }];
        let bound = p_error_chernoff(&terms, thr as f64);
        assert!(bound >= exact, "{bound} < {exact}");
        assert!(bound <= exact + 10.0, "{bound} vs {exact}");
    }

    #[test]
    fn chernoff_product_term_matches_exact_mgf() {
        // the lazily-grouped product MGF equals the MGF of the exactly
        // computed product distribution
        let d = vec![3, -2];
        let b1 = dist_cbd(1, L).unwrap();
        let b2 = dist_cbd(2, L).unwrap();
        let exact = crate::noise::projected_product_dist(&d, &b1, &b2).unwrap();
        let table = MgfTable::from_dist(&exact);
        let term = product_term(&d, &b1, &b2, 1.0).unwrap();
        for t in [0.0, 0.01, 0.1, 0.5] {
            let lhs = term.ln_mgf(t);
            let rhs = table.ln_mgf(t);
            assert!((lhs - rhs).abs() < 1e-9, "t={t}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn union_bound_tiny_exact_vs_chernoff() {
        let params = tiny_params("mtd2");
        let exact = dfr_union_bound(&params, Method::Exact, Some(DEFAULT_PRUNE_LOG2)).unwrap();
        let cher = dfr_union_bound(&params, Method::Chernoff, None).unwrap();
        assert!(exact.log2_dfr.is_finite());
        assert!(
            cher.log2_dfr >= exact.log2_dfr,
            "chernoff {} < exact {}",
            cher.log2_dfr,
            exact.log2_dfr
        );
        // every per-pair Chernoff tail dominates the exact tail
        for (e, c) in exact.pairs.iter().zip(&cher.pairs) {
            assert_eq!(e.d, c.d);
            assert!(c.log2_tail >= e.log2_tail - 1e-9, "d={:?}", e.d);
        }
    }

    #[test]
    fn grouped_equals_ungrouped() {
        // evaluating pair-by-pair must give the same assembled bound as the
        // multiplicity-grouped evaluation
        let params = tiny_params("mtd2");
        let report = dfr_union_bound(&params, Method::Exact, Some(DEFAULT_PRUNE_LOG2)).unwrap();
        let mut sum = BigUint::zero();
        let frac = fixed::frac_bits(L);
        for d in params.codebook.ordered_pair_differences() {
            for rep in difference_representatives(&d, params.q) {
                let norm_sq: i64 = rep.iter().map(|&x| x * x).sum();
                let dist =
                    noise_projection_dist(&params, &rep, Some(DEFAULT_PRUNE_LOG2)).unwrap();
                sum += fixed::to_biguint(&p_error_exact(&dist, norm_sq, 2));
            }
        }
        let nu = params.nu() as f64;
        let size = params.codebook.len() as f64;
        let ungrouped =
            log2_biguint(&sum).unwrap() - frac as f64 + nu.log2() - size.log2();
        assert!(
            (ungrouped - report.log2_dfr).abs() < 1e-9,
            "{ungrouped} vs {}",
            report.log2_dfr
        );
    }

    #[test]
    fn projection_sampler_matches_exact_tail() {
        // pick a threshold where the tail is around 1e-3..1e-2 and compare
        // a sampling estimate against the exact tail within 4 sigma
        let params = tiny_params("mtd2");
        let d = vec![25, -10];
        let dist = noise_projection_dist(&params, &d, Some(DEFAULT_PRUNE_LOG2)).unwrap();
        let (_, var) = crate::dist::mean_var_f64(&dist);
        let thr = (2.9 * var.sqrt()).round() as i64;
        let exact = dist.tail_log2_ge(thr, 1).unwrap().exp2();

        let sampler = ProjectionSampler::new(&params, &d).unwrap();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(99);
        let n = 200_000u64;
        let hits = (0..n)
            .filter(|_| sampler.sample(&mut rng) >= thr)
            .count() as f64;
        let est = hits / n as f64;
        let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!(
            (est - exact).abs() < 4.0 * sigma,
            "est {est}, exact {exact}, sigma {sigma}"
        );
    }

    #[test]
    fn clopper_pearson_reference() {
        // zero failures: 99% two-sided upper bound ~ 5.3/N
        let (lo, hi) = clopper_pearson(0, 1_000_000, 0.99);
        assert_eq!(lo, 0.0);
        assert!((hi * 1.0e6 - 5.3).abs() < 0.05, "hi*N = {}", hi * 1.0e6);
        let (lo, hi) = clopper_pearson(10, 1000, 0.99);
        assert!(lo > 0.003 && lo < 0.01);
        assert!(hi > 0.01 && hi < 0.025);
    }

    #[test]
    fn monte_carlo_deterministic() {
        let params = tiny_params("mtd2");
        let a = dfr_monte_carlo(&params, 2000, 7).unwrap();
        let b = dfr_monte_carlo(&params, 2000, 7).unwrap();
        assert_eq!(a.failures, b.failures);
        assert!(a.ci_high >= a.rate && a.ci_low <= a.rate);
    }

    #[test]
    fn csv_row_shape() {
        let params = tiny_params("baseline");
        let report = dfr_union_bound(&params, Method::Chernoff, None).unwrap();
        let row = report.csv_row();
        assert_eq!(
            row.split(',').count(),
            DfrReport::CSV_HEADER.split(',').count()
        );
    }
}
