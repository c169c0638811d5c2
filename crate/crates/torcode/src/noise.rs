//! Exact distributions of the decryption-noise components and of the 1-D
//! projection ⟨Δn_e, d⟩ that the failure-rate bound integrates.
//!
//! The joint noise over one ℓ-dimensional block is never tabulated; only its
//! projections onto difference vectors d are needed, and each projection is
//! an exact convolution of three independent families:
//!
//! * kn/ℓ products of two binomial polynomials (secret × encryption noise),
//! * kn/ℓ products of a binomial with (binomial + u-compression error),
//! * the ℓ scaled coordinates of the v-compression error plus e₂.

use crate::dist::{ProbDist, DEFAULT_LIMBS};
use crate::error::{Error, Result};
use crate::fixed;
use crate::pke::Params;
use crate::ring::{compress, decompress};
use crate::torus::mod_pm;
use std::collections::{BTreeMap, HashMap};

/// Default prune threshold (log₂) for long convolution pipelines.
pub const DEFAULT_PRUNE_LOG2: f64 = -400.0;

/// Centered binomial β_η = B(2η, ½) − η, exact dyadic masses.
pub fn dist_cbd(eta: u32, limbs: usize) -> Result<ProbDist> {
    if !(1..=3).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "eta must be in 1..=3, got {eta}"
        )));
    }
    let m = 2 * eta as usize;
    let mut binom = vec![0u128; m + 1];
    binom[0] = 1;
    for i in 1..=m {
        for j in (1..=i).rev() {
            binom[j] += binom[j - 1];
        }
    }
    ProbDist::from_dyadic(-(eta as i64), 1, &binom, m, limbs)
}

fn quant_error_counts(q: i64, d: u32) -> Result<(i64, Vec<u128>)> {
    let mut map: BTreeMap<i64, u128> = BTreeMap::new();
    for x in 0..q {
        let y = decompress(compress(x, d, q)?, d, q)?;
        let err = mod_pm(y - x, q)?;
        *map.entry(err).or_insert(0) += 1;
    }
    let (&lo, _) = map.first_key_value().expect("q >= 2");
    let (&hi, _) = map.last_key_value().expect("q >= 2");
    let counts = (lo..=hi).map(|v| map.get(&v).copied().unwrap_or(0)).collect();
    Ok((lo, counts))
}

/// Distribution of one coefficient of the u-compression error
/// `Decompress(Compress(x, d_u)) − x` for x uniform over ℤ_q, centered.
pub fn dist_quant_u(q: i64, d_u: u32, limbs: usize) -> Result<ProbDist> {
    let (lo, counts) = quant_error_counts(q, d_u)?;
    ProbDist::from_counts(lo, 1, &counts, limbs)
}

/// Distribution of one coefficient of c_v + e₂.
pub fn dist_quant_v_plus_e2(q: i64, d_v: u32, eta2: u32, limbs: usize) -> Result<ProbDist> {
    dist_quant_u(q, d_v, limbs)?.convolve(&dist_cbd(eta2, limbs)?)
}

/// σ(b) with σᵢ = ⟨xⁱ·b mod (x^ℓ+1), d⟩: the coefficient pattern through
/// which each aᵢ enters ⟨ab, d⟩ = Σᵢ aᵢ·σᵢ(b).
pub fn sigma_vector(d: &[i64], b: &[i64]) -> Vec<i64> {
    let ell = d.len();
    (0..ell)
        .map(|i| {
            (0..ell)
                .map(|j| {
                    let t = i + j;
                    let sign = if t >= ell { -1 } else { 1 };
                    sign * b[j] * d[t % ell]
                })
                .sum()
        })
        .collect()
}

/// Exact pmf of ⟨ab, d⟩ where a, b ∈ ℤ[x]/(x^ℓ+1) have i.i.d. coefficients
/// from `phi_a`, `phi_b`. Enumerates the smaller-support polynomial; for
/// each fixed b the conditional law is the convolution over i of φa scaled
/// by σᵢ(b), cached per σ-multiset.
pub fn projected_product_dist(
    d: &[i64],
    phi_a: &ProbDist,
    phi_b: &ProbDist,
) -> Result<ProbDist> {
    let ell = d.len();
    if ell == 0 {
        return Err(Error::InvalidParameter("empty projection vector".into()));
    }
    if phi_a.limbs() != phi_b.limbs() {
        return Err(Error::DimensionMismatch("limb counts differ".into()));
    }
    let limbs = phi_a.limbs();
    // ⟨ab, d⟩ is symmetric in the roles of a and b (c = ab = ba), so
    // enumerate whichever factor has the smaller support.
    let (enumerated, convolved) = if phi_b.len() <= phi_a.len() {
        (phi_b, phi_a)
    } else {
        (phi_a, phi_b)
    };
    let m = enumerated.len();
    if (m as f64).powi(ell as i32) > 2.0e7 {
        return Err(Error::BudgetExceeded(format!(
            "{m}^{ell} enumeration states exceed the 2e7 budget"
        )));
    }

    let mut cond_cache: HashMap<Vec<i64>, ProbDist> = HashMap::new();
    let mut acc: BTreeMap<i64, Vec<u64>> = BTreeMap::new();
    let mut idx = vec![0usize; ell];
    let mut b = vec![enumerated.value_at(0); ell];
    loop {
        // weight = Pr(b)
        let mut weight = fixed::one(limbs);
        for &i in &idx {
            weight = fixed::mul_trunc(&weight, enumerated.mass_limbs(i));
        }
        if !fixed::is_zero(&weight) {
            let mut key = sigma_vector(d, &b);
            key.sort_unstable();
            let cond = match cond_cache.get(&key) {
                Some(c) => c,
                None => {
                    let mut cur: Option<ProbDist> = None;
                    for &s in &key {
                        if s == 0 {
                            continue;
                        }
                        let scaled = convolved.scale_values(s);
                        cur = Some(match cur {
                            None => scaled,
                            Some(prev) => prev.convolve(&scaled)?,
                        });
                    }
                    let c = cur.unwrap_or_else(|| ProbDist::point(0, limbs));
                    cond_cache.entry(key.clone()).or_insert(c)
                }
            };
            for (v, mass) in cond.iter() {
                let contrib = fixed::mul_trunc(&weight, mass);
                if !fixed::is_zero(&contrib) {
                    match acc.get_mut(&v) {
                        Some(slot) => fixed::add_assign(slot, &contrib),
                        None => {
                            acc.insert(v, contrib);
                        }
                    }
                }
            }
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == ell {
                return assemble(acc, limbs);
            }
            idx[pos] += 1;
            if idx[pos] < m {
                b[pos] = enumerated.value_at(idx[pos]);
                break;
            }
            idx[pos] = 0;
            b[pos] = enumerated.value_at(0);
            pos += 1;
        }
    }
}

fn assemble(acc: BTreeMap<i64, Vec<u64>>, limbs: usize) -> Result<ProbDist> {
    if acc.is_empty() {
        return Ok(ProbDist::point(0, limbs));
    }
    let lo = *acc.keys().next().expect("nonempty");
    let hi = *acc.keys().next_back().expect("nonempty");
    let mut g: u64 = 0;
    for &v in acc.keys() {
        g = num_integer::Integer::gcd(&g, &((v - lo) as u64));
    }
    let step = if g == 0 { 1 } else { g as i64 };
    let len = ((hi - lo) / step) as usize + 1;
    let mut mass = vec![0u64; len * limbs];
    for (v, limbs_v) in acc {
        let j = ((v - lo) / step) as usize;
        mass[j * limbs..(j + 1) * limbs].copy_from_slice(&limbs_v);
    }
    ProbDist::from_parts(lo, step, mass, limbs)
}

/// Exact pmf of the projection ⟨Δn_e, d⟩ for one message block:
/// `(P_ss)^{*kn/ℓ} * (P_s,cu)^{*kn/ℓ} * ⊛ᵢ dᵢ·(c_v + e₂)`.
pub fn noise_projection_dist(
    params: &Params,
    d: &[i64],
    prune_log2: Option<f64>,
) -> Result<ProbDist> {
    let ell = params.ell();
    if d.len() != ell {
        return Err(Error::DimensionMismatch(format!(
            "projection vector has {} entries, ell = {ell}",
            d.len()
        )));
    }
    let limbs = DEFAULT_LIMBS;
    if params.k * params.n % ell != 0 {
        return Err(Error::InvalidParameter("ell must divide k*n".into()));
    }
    let reps = (params.k * params.n / ell) as u64;

    let beta1 = dist_cbd(params.eta1, limbs)?;
    let beta2_cu = dist_cbd(params.eta2, limbs)?
        .convolve(&dist_quant_u(params.q, params.d_u, limbs)?)?;

    let p_ss = projected_product_dist(d, &beta1, &beta1)?;
    let p_scu = projected_product_dist(d, &beta1, &beta2_cu)?;

    let mut total = p_ss
        .self_conv_pow(reps, prune_log2)?
        .convolve(&p_scu.self_conv_pow(reps, prune_log2)?)?;
    if let Some(t) = prune_log2 {
        total.prune(t);
    }

    let cv = dist_quant_v_plus_e2(params.q, params.d_v, params.eta2, limbs)?;
    for &di in d {
        if di == 0 {
            continue;
        }
        total = total.convolve(&cv.scale_values(di))?;
        if let Some(t) = prune_log2 {
            total.prune(t);
        }
    }
    Ok(total)
}

/// Exhaustively check that every strided block of c = ab in
/// ℤ_q[x]/(xⁿ+1) has the same joint distribution, for a and b with i.i.d.
/// coefficients on `support` with integer `weights`.
pub fn verify_splitting(
    n: usize,
    ell: usize,
    q: i64,
    support: &[i64],
    weights: &[u64],
) -> Result<bool> {
    if support.len() != weights.len() || support.is_empty() {
        return Err(Error::InvalidParameter(
            "support and weights must match and be nonempty".into(),
        ));
    }
    if !n.is_power_of_two() || !ell.is_power_of_two() || ell <= 1 || ell >= n {
        return Err(Error::Precondition(format!(
            "need powers of two with 1 < ell < n, got n={n}, ell={ell}"
        )));
    }
    let m = support.len();
    let states = (m as f64).powi(n as i32);
    if states * states > 5.0e7 {
        return Err(Error::BudgetExceeded(format!(
            "{m}^{} (a,b) pairs exceed the enumeration budget",
            2 * n
        )));
    }

    // All coefficient patterns with their weights.
    let mut patterns: Vec<(Vec<i64>, u64)> = vec![(vec![], 1)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(patterns.len() * m);
        for (p, w) in &patterns {
            for (&s, &ws) in support.iter().zip(weights) {
                let mut p2 = p.clone();
                p2.push(s);
                next.push((p2, w * ws));
            }
        }
        patterns = next;
    }

    let nu = n / ell;
    let cells = (q as usize).pow(ell as u32);
    let mut counts = vec![vec![0u128; cells]; nu];
    let mut c = vec![0i64; n];
    for (a, wa) in &patterns {
        for (b, wb) in &patterns {
            let w = (*wa as u128) * (*wb as u128);
            c.iter_mut().for_each(|x| *x = 0);
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0 {
                    continue;
                }
                for (j, &bj) in b.iter().enumerate() {
                    let t = i + j;
                    if t < n {
                        c[t] += ai * bj;
                    } else {
                        c[t - n] -= ai * bj;
                    }
                }
            }
            for blk in 0..nu {
                let mut key = 0usize;
                for jj in 0..ell {
                    key = key * q as usize + c[blk + jj * nu].rem_euclid(q) as usize;
                }
                counts[blk][key] += w;
            }
        }
    }
    Ok(counts.iter().all(|blk| blk == &counts[0]))
}
