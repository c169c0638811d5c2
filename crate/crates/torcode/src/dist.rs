//! Probability distributions over integer supports with fixed-point masses.
//!
//! A [`ProbDist`] stores masses on the arithmetic grid `offset + i*step` as
//! little-endian limb vectors (see [`crate::fixed`]). All arithmetic on masses
//! is exact except for a single truncating shift per operation, and every bit
//! lost that way is accounted to `pruned`. Because truncation and pruning only
//! ever *remove* mass from the explicit support, `pruned` is a certified upper
//! bound on the unrepresented probability; tail queries add it back in, so
//! tail bounds computed here are always valid upper bounds.
//!
//! The `step` field is kept reduced: after trimming, the gcd of all gaps
//! between occupied grid points is folded into `step`. For heavily structured
//! supports (e.g. a distribution scaled by a large constant) this shrinks
//! convolutions by orders of magnitude.

use crate::error::{Error, Result};
use crate::fixed;
use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Default limb count for high-precision work: 448 fractional bits.
pub const DEFAULT_LIMBS: usize = 8;

/// A finitely supported distribution on a sub-grid of the integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbDist {
    limbs: usize,
    offset: i64,
    step: i64,
    /// Flat array of `len * limbs` limbs; entry `i` is the mass at
    /// `offset + i*step`.
    mass: Vec<u64>,
    /// Mass unaccounted for by the explicit support (truncation + pruning).
    pruned: Vec<u64>,
}

impl ProbDist {
    /// The deterministic distribution concentrated at `value`.
    pub fn point(value: i64, limbs: usize) -> Self {
        ProbDist {
            limbs,
            offset: value,
            step: 1,
            mass: fixed::one(limbs),
            pruned: fixed::zero(limbs),
        }
    }

    /// Distribution proportional to integer `counts` on `offset + i*step`.
    ///
    /// Masses are `floor(count * 2^F / total)`; the truncation deficit goes to
    /// `pruned`.
    pub fn from_counts(offset: i64, step: i64, counts: &[u128], limbs: usize) -> Result<Self> {
        if counts.is_empty() || step <= 0 {
            return Err(Error::InvalidParameter(
                "from_counts needs a nonempty support and positive step".into(),
            ));
        }
        let total: BigUint = counts.iter().map(|&c| BigUint::from(c)).sum();
        if total.is_zero() {
            return Err(Error::InvalidParameter("all counts are zero".into()));
        }
        let mut mass = Vec::with_capacity(counts.len() * limbs);
        for &c in counts {
            mass.extend_from_slice(&fixed::from_ratio_big(
                &BigUint::from(c),
                &total,
                limbs,
            ));
        }
        let mut d = ProbDist {
            limbs,
            offset,
            step,
            mass,
            pruned: fixed::zero(limbs),
        };
        d.recompute_pruned();
        d.normalize();
        Ok(d)
    }

    /// Distribution with exactly dyadic masses `numerators[i] / 2^log2_den`.
    ///
    /// Exact whenever `log2_den <= F`; the numerators must sum to at most
    /// `2^log2_den`, and any shortfall is recorded as pruned mass.
    pub fn from_dyadic(
        offset: i64,
        step: i64,
        numerators: &[u128],
        log2_den: usize,
        limbs: usize,
    ) -> Result<Self> {
        if numerators.is_empty() || step <= 0 {
            return Err(Error::InvalidParameter(
                "from_dyadic needs a nonempty support and positive step".into(),
            ));
        }
        if log2_den > fixed::frac_bits(limbs) {
            return Err(Error::InvalidParameter(format!(
                "dyadic denominator 2^{log2_den} exceeds {} fractional bits",
                fixed::frac_bits(limbs)
            )));
        }
        let mut mass = Vec::with_capacity(numerators.len() * limbs);
        for &k in numerators {
            mass.extend_from_slice(&fixed::from_dyadic(k, log2_den, limbs));
        }
        let mut d = ProbDist {
            limbs,
            offset,
            step,
            mass,
            pruned: fixed::zero(limbs),
        };
        d.recompute_pruned();
        d.normalize();
        Ok(d)
    }

    pub fn limbs(&self) -> usize {
        self.limbs
    }

    pub fn len(&self) -> usize {
        self.mass.len() / self.limbs
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn value_at(&self, i: usize) -> i64 {
        self.offset + i as i64 * self.step
    }

    pub fn mass_limbs(&self, i: usize) -> &[u64] {
        &self.mass[i * self.limbs..(i + 1) * self.limbs]
    }

    /// Mass at an arbitrary integer value (zero off the grid).
    pub fn mass_at(&self, value: i64) -> Vec<u64> {
        let rel = value as i128 - self.offset as i128;
        if rel < 0 || rel % self.step as i128 != 0 {
            return fixed::zero(self.limbs);
        }
        let i = (rel / self.step as i128) as usize;
        if i >= self.len() {
            return fixed::zero(self.limbs);
        }
        self.mass_limbs(i).to_vec()
    }

    /// Mass not accounted for by the explicit support.
    pub fn pruned(&self) -> &[u64] {
        &self.pruned
    }

    pub fn pruned_log2(&self) -> Option<f64> {
        fixed::log2(&self.pruned)
    }

    /// Iterate over `(value, mass)` pairs of the explicit support.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &[u64])> + '_ {
        (0..self.len()).map(move |i| (self.value_at(i), self.mass_limbs(i)))
    }

    /// Total explicit mass as an integer multiple of `2^-F`.
    pub fn total_mass_int(&self) -> BigUint {
        let mut total = BigUint::zero();
        for i in 0..self.len() {
            total += fixed::to_biguint(self.mass_limbs(i));
        }
        total
    }

    fn recompute_pruned(&mut self) {
        let one = fixed::to_biguint(&fixed::one(self.limbs));
        let total = self.total_mass_int();
        assert!(total <= one, "explicit mass exceeds 1");
        self.pruned = fixed::from_biguint(&(one - total), self.limbs);
    }

    /// Trim zero masses from both ends and fold the gcd of occupied gaps into
    /// `step`.
    /// Assemble a distribution from a raw mass grid. The deficit to one is
    /// recorded as pruned mass; the grid is normalized afterwards.
    pub(crate) fn from_parts(
        offset: i64,
        step: i64,
        mass: Vec<u64>,
        limbs: usize,
    ) -> Result<Self> {
        if step <= 0 || mass.is_empty() || mass.len() % limbs != 0 {
            return Err(Error::InvalidParameter(
                "from_parts needs a positive step and a limb-aligned grid".into(),
            ));
        }
        let mut d = ProbDist {
            limbs,
            offset,
            step,
            mass,
            pruned: fixed::zero(limbs),
        };
        d.recompute_pruned();
        d.normalize();
        Ok(d)
    }

    pub fn normalize(&mut self) {
        let l = self.limbs;
        let n = self.len();
        let nonzero: Vec<usize> = (0..n)
            .filter(|&i| !fixed::is_zero(self.mass_limbs(i)))
            .collect();
        if nonzero.is_empty() {
            // keep a single zero entry so the grid stays well-defined
            self.mass = fixed::zero(l);
            self.step = 1;
            return;
        }
        let first = nonzero[0];
        let last = *nonzero.last().unwrap();
        let mut g: u64 = 0;
        for w in nonzero.windows(2) {
            g = g.gcd(&((w[1] - w[0]) as u64));
        }
        if g == 0 {
            // single point
            self.offset += first as i64 * self.step;
            self.mass = self.mass_limbs(first).to_vec();
            self.step = 1;
            return;
        }
        let new_len = (last - first) / g as usize + 1;
        if first == 0 && g == 1 && new_len == n {
            return;
        }
        let mut mass = vec![0u64; new_len * l];
        for &i in &nonzero {
            let j = (i - first) / g as usize;
            mass[j * l..(j + 1) * l].copy_from_slice(self.mass_limbs(i));
        }
        self.offset += first as i64 * self.step;
        self.step *= g as i64;
        self.mass = mass;
    }

    /// Map values through `v -> c*v` for nonzero `c`.
    pub fn scale_values(&self, c: i64) -> Self {
        assert_ne!(c, 0, "scaling by zero collapses the support");
        let l = self.limbs;
        let n = self.len();
        if c > 0 {
            return ProbDist {
                limbs: l,
                offset: self.offset * c,
                step: self.step * c,
                mass: self.mass.clone(),
                pruned: self.pruned.clone(),
            };
        }
        // negative scale: reverse so the grid stays increasing
        let mut mass = Vec::with_capacity(self.mass.len());
        for i in (0..n).rev() {
            mass.extend_from_slice(self.mass_limbs(i));
        }
        ProbDist {
            limbs: l,
            offset: (self.offset + (n as i64 - 1) * self.step) * c,
            step: self.step * -c,
            mass,
            pruned: self.pruned.clone(),
        }
    }

    /// Distribution of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &ProbDist) -> Result<ProbDist> {
        if self.limbs != other.limbs {
            return Err(Error::DimensionMismatch(format!(
                "limb counts differ: {} vs {}",
                self.limbs, other.limbs
            )));
        }
        let g = (self.step as u64).gcd(&(other.step as u64)) as i64;
        let a = self.expand_to_step(g);
        let b = other.expand_to_step(g);
        let (na, nb) = (a.len(), b.len());
        let mass = fixed::conv_trunc(&a.mass, na, &b.mass, nb, self.limbs);
        let mut out = ProbDist {
            limbs: self.limbs,
            offset: a.offset + b.offset,
            step: g,
            mass,
            pruned: fixed::zero(self.limbs),
        };
        out.recompute_pruned();
        out.normalize();
        Ok(out)
    }

    fn expand_to_step(&self, g: i64) -> std::borrow::Cow<'_, ProbDist> {
        if self.step == g {
            return std::borrow::Cow::Borrowed(self);
        }
        debug_assert_eq!(self.step % g, 0);
        let f = (self.step / g) as usize;
        let l = self.limbs;
        let n = self.len();
        let new_len = (n - 1) * f + 1;
        let mut mass = vec![0u64; new_len * l];
        for i in 0..n {
            mass[i * f * l..(i * f + 1) * l].copy_from_slice(self.mass_limbs(i));
        }
        std::borrow::Cow::Owned(ProbDist {
            limbs: l,
            offset: self.offset,
            step: g,
            mass,
            pruned: self.pruned.clone(),
        })
    }

    /// Zero out entries whose mass is below `2^threshold_log2`, moving their
    /// mass to `pruned`.
    pub fn prune(&mut self, threshold_log2: f64) {
        let l = self.limbs;
        let mut changed = false;
        for i in 0..self.len() {
            let m = &self.mass[i * l..(i + 1) * l];
            if fixed::is_zero(m) {
                continue;
            }
            if fixed::log2(m).unwrap() < threshold_log2 {
                self.mass[i * l..(i + 1) * l].fill(0);
                changed = true;
            }
        }
        if changed {
            self.recompute_pruned();
            self.normalize();
        }
    }

    /// Distribution of the sum of `k` independent copies of `self`
    /// (square-and-multiply, pruning between steps when a threshold is given).
    pub fn self_conv_pow(&self, k: u64, prune_log2: Option<f64>) -> Result<ProbDist> {
        assert!(k >= 1);
        let mut base = self.clone();
        let mut acc: Option<ProbDist> = None;
        let mut rem = k;
        loop {
            if rem & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => {
                        let mut r = a.convolve(&base)?;
                        if let Some(t) = prune_log2 {
                            r.prune(t);
                        }
                        r
                    }
                });
            }
            rem >>= 1;
            if rem == 0 {
                break;
            }
            base = base.convolve(&base)?;
            if let Some(t) = prune_log2 {
                base.prune(t);
            }
        }
        Ok(acc.unwrap())
    }

    /// Upper bound on `Pr[X >= num/den]`, including all pruned mass.
    ///
    /// Returned as fixed-point limbs. `den` must be positive.
    pub fn tail_mass_ge(&self, num: i64, den: i64) -> Vec<u64> {
        assert!(den > 0);
        // smallest i with offset + i*step >= num/den
        let lhs = num as i128 - self.offset as i128 * den as i128;
        let stride = self.step as i128 * den as i128;
        let i_min = Integer::div_ceil(&lhs, &stride);
        let mut acc = self.pruned.clone();
        let start = i_min.max(0);
        if start < self.len() as i128 {
            for i in start as usize..self.len() {
                fixed::add_assign(&mut acc, self.mass_limbs(i));
            }
        }
        acc
    }

    /// `log2` of [`Self::tail_mass_ge`]; `None` when the bound is exactly zero.
    pub fn tail_log2_ge(&self, num: i64, den: i64) -> Option<f64> {
        fixed::log2(&self.tail_mass_ge(num, den))
    }

    /// Exact mean of the explicit support (pruned mass contributes nothing).
    pub fn mean(&self) -> BigRational {
        let one = fixed::to_biguint(&fixed::one(self.limbs));
        let mut num = BigRational::zero();
        for (v, m) in self.iter() {
            let m = BigRational::from_integer(fixed::to_biguint(m).into());
            num += m * BigRational::from_integer(v.into());
        }
        num / BigRational::from_integer(one.into())
    }

    /// Exact variance of the explicit support.
    pub fn variance(&self) -> BigRational {
        let one = fixed::to_biguint(&fixed::one(self.limbs));
        let mean = self.mean();
        let mut acc = BigRational::zero();
        for (v, m) in self.iter() {
            let m = BigRational::from_integer(fixed::to_biguint(m).into());
            let d = BigRational::from_integer(v.into()) - &mean;
            acc += m * &d * &d;
        }
        acc / BigRational::from_integer(one.into())
    }

    /// Mass as `f64` probabilities alongside values, for quick inspection and
    /// Monte-Carlo comparisons. Not for certified bounds.
    pub fn to_f64_pairs(&self) -> Vec<(i64, f64)> {
        self.iter()
            .map(|(v, m)| (v, fixed::to_f64(m)))
            .collect()
    }

    /// Maximum |value| over the occupied support.
    pub fn max_abs_value(&self) -> i64 {
        let mut best = 0i64;
        for (v, m) in self.iter() {
            if !fixed::is_zero(m) {
                best = best.max(v.abs());
            }
        }
        best
    }
}

/// Helper used in tests and verification: a distribution's mean/variance as
/// `f64`, tolerating the tiny truncation deficit.
pub fn mean_var_f64(d: &ProbDist) -> (f64, f64) {
    (
        d.mean().to_f64().unwrap_or(f64::NAN),
        d.variance().to_f64().unwrap_or(f64::NAN),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn die(limbs: usize) -> ProbDist {
        ProbDist::from_counts(1, 1, &[1, 1, 1, 1, 1, 1], limbs).unwrap()
    }

    #[test]
    fn point_mass() {
        let d = ProbDist::point(-7, 3);
        assert_eq!(d.len(), 1);
        assert_eq!(d.value_at(0), -7);
        assert!(fixed::is_zero(d.pruned()));
    }

    #[test]
    fn counts_normalization_and_pruning_deficit() {
        let d = ProbDist::from_counts(0, 1, &[1, 2], 3).unwrap();
        // 1/3 is not dyadic, so a deficit of a few ulps lands in pruned
        let p = d.pruned_log2().unwrap();
        assert!(p < -120.0, "deficit too large: 2^{p}");
        let m0 = fixed::to_f64(&d.mass_at(0));
        assert!((m0 - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn two_dice_sum() {
        let d = die(3);
        let s = d.convolve(&d).unwrap();
        assert_eq!(s.offset(), 2);
        assert_eq!(s.len(), 11);
        let p7 = fixed::to_f64(&s.mass_at(7));
        assert!((p7 - 6.0 / 36.0).abs() < 1e-14);
        let p2 = fixed::to_f64(&s.mass_at(2));
        assert!((p2 - 1.0 / 36.0).abs() < 1e-14);
    }

    #[test]
    fn gcd_step_reduction() {
        // support {-10, 0, 10} collapses to step 10
        let d = ProbDist::from_counts(-10, 10, &[1, 2, 1], 3).unwrap();
        assert_eq!(d.step(), 10);
        assert_eq!(d.len(), 3);
        // scaling by -3 keeps the grid reduced and flips order
        let s = d.scale_values(-3);
        assert_eq!(s.step(), 30);
        assert_eq!(s.offset(), -30);
        let pm = fixed::to_f64(&s.mass_at(30));
        assert!((pm - 0.25).abs() < 1e-14);
    }

    #[test]
    fn interior_zero_gcd() {
        // masses on {0, 4} expressed on a step-2 grid reduce to step 4
        let d = ProbDist::from_counts(0, 2, &[1, 0, 1], 3).unwrap();
        assert_eq!(d.step(), 4);
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn tail_semantics() {
        let d = die(3);
        // Pr[X >= 5] = 2/6; threshold 9/2 also selects {5, 6}
        let t = fixed::to_f64(&d.tail_mass_ge(5, 1));
        assert!((t - 2.0 / 6.0).abs() < 1e-14);
        let t = fixed::to_f64(&d.tail_mass_ge(9, 2));
        assert!((t - 2.0 / 6.0).abs() < 1e-14);
        // negative threshold covers everything incl. pruned: exactly 1
        let all = d.tail_mass_ge(-100, 1);
        assert_eq!(fixed::cmp(&all, &fixed::one(3)), std::cmp::Ordering::Equal);
    }

    #[test]
    fn pow_matches_repeated_convolution() {
        let d = die(3);
        let mut ref5 = d.clone();
        for _ in 0..4 {
            ref5 = ref5.convolve(&d).unwrap();
        }
        let fast = d.self_conv_pow(5, None).unwrap();
        assert_eq!(fast.offset(), ref5.offset());
        assert_eq!(fast.len(), ref5.len());
        for i in 0..fast.len() {
            // truncation order differs between the two evaluation trees, so
            // allow a couple of ulps in the lowest limb
            let a = fixed::to_biguint(fast.mass_limbs(i));
            let b = fixed::to_biguint(ref5.mass_limbs(i));
            let diff = if a >= b { &a - &b } else { &b - &a };
            assert!(diff < BigUint::from(64u8), "entry {i} differs by {diff}");
        }
    }

    #[test]
    fn mean_and_variance_of_die() {
        let d = die(4);
        let (m, v) = mean_var_f64(&d);
        assert!((m - 3.5).abs() < 1e-12);
        assert!((v - 35.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn variance_additivity() {
        let d = die(4);
        let s = d.self_conv_pow(8, None).unwrap();
        let (_, v1) = mean_var_f64(&d);
        let (_, v8) = mean_var_f64(&s);
        assert!((v8 - 8.0 * v1).abs() < 1e-9);
    }

    #[test]
    fn prune_moves_mass_to_pruned() {
        let mut d = ProbDist::from_dyadic(0, 1, &[1, (1 << 20) - 2, 1], 20, 3).unwrap();
        d.prune(-19.0);
        assert_eq!(d.len(), 1);
        let p = d.pruned_log2().unwrap();
        assert!((p - (-19.0)).abs() < 1e-9, "pruned = 2^{p}");
        // the pruned mass still shows up in every tail bound
        let t = fixed::to_f64(&d.tail_mass_ge(10, 1));
        assert!((t - (-19.0f64).exp2()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn conv_commutes(c1 in proptest::collection::vec(1u128..50, 1..6),
                         c2 in proptest::collection::vec(1u128..50, 1..6),
                         o1 in -20i64..20, o2 in -20i64..20) {
            let a = ProbDist::from_counts(o1, 1, &c1, 3).unwrap();
            let b = ProbDist::from_counts(o2, 1, &c2, 3).unwrap();
            let ab = a.convolve(&b).unwrap();
            let ba = b.convolve(&a).unwrap();
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn mass_conservation(counts in proptest::collection::vec(1u128..100, 1..8)) {
            let a = ProbDist::from_counts(0, 1, &counts, 4).unwrap();
            let s = a.convolve(&a).unwrap();
            let one = fixed::to_biguint(&fixed::one(4));
            let total = s.total_mass_int() + fixed::to_biguint(s.pruned());
            prop_assert_eq!(total, one);
        }
    }
}
