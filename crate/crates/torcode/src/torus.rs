//! Centered-modulus arithmetic and the L2-norm toroidal metric on `Z_q^l`.
//!
//! Distances are carried as exact squared integers; callers that need a real
//! value take a square root at the very end. All comparisons inside
//! minimum-distance searches stay in integer arithmetic.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Centered representative of `x` modulo `q`.
///
/// For odd `q` the result lies in `[-(q-1)/2, (q-1)/2]`; for even `q` in
/// `[-q/2, q/2)`.
pub fn mod_pm(x: i64, q: i64) -> Result<i64> {
    if q < 2 {
        return Err(Error::InvalidModulus(q));
    }
    let mut r = x.rem_euclid(q);
    // r in [0, q); shift the upper half down.
    if 2 * r >= q {
        r -= q;
    }
    Ok(r)
}

/// A point of the discrete torus `Z_q^l`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusVector {
    q: i64,
    coords: Vec<i64>,
}

impl TorusVector {
    pub fn new(q: i64, coords: Vec<i64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidModulus(q));
        }
        if coords.is_empty() {
            return Err(Error::DimensionMismatch("empty coordinate vector".into()));
        }
        let coords = coords.into_iter().map(|c| c.rem_euclid(q)).collect();
        Ok(Self { q, coords })
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// Component-wise centered difference `(self - other) mod± q`.
    pub fn centered_diff(&self, other: &TorusVector) -> Result<Vec<i64>> {
        self.check_compatible(other)?;
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| mod_pm(a - b, self.q))
            .collect()
    }

    fn check_compatible(&self, other: &TorusVector) -> Result<()> {
        if self.q != other.q {
            return Err(Error::DimensionMismatch(format!(
                "modulus mismatch: {} vs {}",
                self.q, other.q
            )));
        }
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch(format!(
                "dimension mismatch: {} vs {}",
                self.coords.len(),
                other.coords.len()
            )));
        }
        Ok(())
    }
}

/// Squared toroidal distance, exact.
pub fn toroidal_distance_sq(v1: &TorusVector, v2: &TorusVector) -> Result<u128> {
    let diff = v1.centered_diff(v2)?;
    Ok(norm_sq(&diff))
}

/// L2-norm toroidal distance (real view of [`toroidal_distance_sq`]).
pub fn toroidal_distance(v1: &TorusVector, v2: &TorusVector) -> Result<f64> {
    Ok((toroidal_distance_sq(v1, v2)? as f64).sqrt())
}

/// Squared Euclidean norm of an integer vector.
pub fn norm_sq(v: &[i64]) -> u128 {
    v.iter().map(|&x| (x as i128 * x as i128) as u128).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mod_pm_rejects_small_modulus() {
        assert!(mod_pm(5, 1).is_err());
        assert!(mod_pm(5, 0).is_err());
        assert!(mod_pm(5, -3).is_err());
    }

    #[test]
    fn mod_pm_kyber_examples() {
        assert_eq!(mod_pm(0, 3329).unwrap(), 0);
        assert_eq!(mod_pm(1665, 3329).unwrap(), -1664);
        assert_eq!(mod_pm(1664, 3329).unwrap(), 1664);
    }

    #[test]
    fn mod_pm_exhaustive_small_moduli() {
        let moduli: Vec<i64> = (2..=64).chain(std::iter::once(3329)).collect();
        for &q in &moduli {
            for x in -3 * q..=3 * q {
                let r = mod_pm(x, q).unwrap();
                assert_eq!((r - x).rem_euclid(q), 0, "x={x} q={q}");
                if q % 2 == 0 {
                    assert!(-q / 2 <= r && r < q / 2, "x={x} q={q} r={r}");
                } else {
                    assert!(-(q - 1) / 2 <= r && r <= (q - 1) / 2, "x={x} q={q} r={r}");
                }
            }
        }
    }

    #[test]
    fn distance_examples() {
        let q = 3329;
        let a = TorusVector::new(q, vec![0, 0]).unwrap();
        let b = TorusVector::new(q, vec![1664, 446]).unwrap();
        assert_eq!(toroidal_distance_sq(&a, &b).unwrap(), 1664 * 1664 + 446 * 446);
        assert!((toroidal_distance(&a, &b).unwrap() - 1722.7335).abs() < 1e-3);

        // A pair attaining the 2E8 minimum distance in Z_4^8.
        let z = TorusVector::new(4, vec![0; 8]).unwrap();
        let w = TorusVector::new(4, vec![2, 2, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(toroidal_distance_sq(&z, &w).unwrap(), 8);
    }

    #[test]
    fn distance_coincidence_is_zero() {
        let v = TorusVector::new(17, vec![3, 5, 9]).unwrap();
        assert_eq!(toroidal_distance_sq(&v, &v).unwrap(), 0);
    }

    #[test]
    fn distance_rejects_mismatch() {
        let a = TorusVector::new(17, vec![1, 2]).unwrap();
        let b = TorusVector::new(19, vec![1, 2]).unwrap();
        let c = TorusVector::new(17, vec![1, 2, 3]).unwrap();
        assert!(toroidal_distance_sq(&a, &b).is_err());
        assert!(toroidal_distance_sq(&a, &c).is_err());
    }

    fn torus_pair(q: i64, ell: usize) -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
        let coord = 0..q;
        (
            prop::collection::vec(coord.clone(), ell),
            prop::collection::vec(coord, ell),
        )
    }

    proptest! {
        #[test]
        fn symmetry_and_upper_bound((a, b) in torus_pair(3329, 4)) {
            let q = 3329;
            let va = TorusVector::new(q, a).unwrap();
            let vb = TorusVector::new(q, b).unwrap();
            let dab = toroidal_distance_sq(&va, &vb).unwrap();
            let dba = toroidal_distance_sq(&vb, &va).unwrap();
            prop_assert_eq!(dab, dba);
            // dist <= (q/2) * sqrt(l), squared: l * (q/2)^2
            let bound = 4u128 * (q as u128 / 2 + 1).pow(2);
            prop_assert!(dab <= bound);
        }

        #[test]
        fn translation_invariance((a, b) in torus_pair(3329, 4), t in prop::collection::vec(0i64..3329, 4)) {
            let q = 3329;
            let va = TorusVector::new(q, a.clone()).unwrap();
            let vb = TorusVector::new(q, b.clone()).unwrap();
            let at: Vec<i64> = a.iter().zip(&t).map(|(x, y)| (x + y) % q).collect();
            let bt: Vec<i64> = b.iter().zip(&t).map(|(x, y)| (x + y) % q).collect();
            let vat = TorusVector::new(q, at).unwrap();
            let vbt = TorusVector::new(q, bt).unwrap();
            prop_assert_eq!(
                toroidal_distance_sq(&va, &vb).unwrap(),
                toroidal_distance_sq(&vat, &vbt).unwrap()
            );
        }

        #[test]
        fn triangle_inequality((a, b) in torus_pair(257, 3), c in prop::collection::vec(0i64..257, 3)) {
            let q = 257;
            let va = TorusVector::new(q, a).unwrap();
            let vb = TorusVector::new(q, b).unwrap();
            let vc = TorusVector::new(q, c).unwrap();
            let dab = toroidal_distance(&va, &vb).unwrap();
            let dbc = toroidal_distance(&vb, &vc).unwrap();
            let dac = toroidal_distance(&va, &vc).unwrap();
            prop_assert!(dac <= dab + dbc + 1e-9);
        }
    }
}
