//! Exact arithmetic in the ring of cyclotomic integers Z[xi], xi = exp(2 pi i / 5).
//!
//! Elements are stored in the fixed basis {1, xi, xi^2, xi^3}; xi^4 is always
//! reduced via 1 + xi + xi^2 + xi^3 + xi^4 = 0, so equality of coefficient
//! tuples is equality of ring elements.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Powers xi^k for k = 0..5 as complex numbers.
fn xi_powers() -> [Complex64; 5] {
    let mut out = [Complex64::new(0.0, 0.0); 5];
    for (k, p) in out.iter_mut().enumerate() {
        *p = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 5.0);
    }
    out
}

/// An element m0 + m1 xi + m2 xi^2 + m3 xi^3 of Z[xi].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycInt(pub [i64; 4]);

impl CycInt {
    pub const ZERO: CycInt = CycInt([0, 0, 0, 0]);
    pub const ONE: CycInt = CycInt([1, 0, 0, 0]);
    pub const XI: CycInt = CycInt([0, 1, 0, 0]);
    /// The golden ratio tau = -xi^2 - xi^3.
    pub const TAU: CycInt = CycInt([0, 0, -1, -1]);
    /// 1/tau = tau - 1.
    pub const TAU_INV: CycInt = CycInt([-1, 0, -1, -1]);

    pub const fn new(m0: i64, m1: i64, m2: i64, m3: i64) -> Self {
        CycInt([m0, m1, m2, m3])
    }

    pub const fn from_int(k: i64) -> Self {
        CycInt([k, 0, 0, 0])
    }

    pub fn coeffs(&self) -> [i64; 4] {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    /// Reduces a length-5 coefficient vector (basis 1..xi^4) to canonical form.
    fn reduce5(c: [i128; 5]) -> Result<Self> {
        let mut out = [0i64; 4];
        for (k, o) in out.iter_mut().enumerate() {
            *o = i64::try_from(c[k] - c[4]).map_err(|_| Error::Overflow)?;
        }
        Ok(CycInt(out))
    }

    pub fn checked_add(self, rhs: CycInt) -> Result<CycInt> {
        let mut out = [0i64; 4];
        for k in 0..4 {
            out[k] = self.0[k].checked_add(rhs.0[k]).ok_or(Error::Overflow)?;
        }
        Ok(CycInt(out))
    }

    pub fn checked_sub(self, rhs: CycInt) -> Result<CycInt> {
        let mut out = [0i64; 4];
        for k in 0..4 {
            out[k] = self.0[k].checked_sub(rhs.0[k]).ok_or(Error::Overflow)?;
        }
        Ok(CycInt(out))
    }

    pub fn checked_neg(self) -> Result<CycInt> {
        CycInt::ZERO.checked_sub(self)
    }

    pub fn checked_mul(self, rhs: CycInt) -> Result<CycInt> {
        // xi^5 = 1 folds the degree-6 product onto five slots.
        let mut c = [0i128; 5];
        for (a, &ma) in self.0.iter().enumerate() {
            for (b, &mb) in rhs.0.iter().enumerate() {
                c[(a + b) % 5] += ma as i128 * mb as i128;
            }
        }
        Self::reduce5(c)
    }

    pub fn checked_scale(self, k: i64) -> Result<CycInt> {
        let mut out = [0i64; 4];
        for i in 0..4 {
            out[i] = self.0[i].checked_mul(k).ok_or(Error::Overflow)?;
        }
        Ok(CycInt(out))
    }

    /// Image under the Galois automorphism xi -> xi^k, k in {1, 2, 3, 4}.
    pub fn galois(self, k: usize) -> CycInt {
        assert!((1..5).contains(&k), "Galois exponent must be in 1..=4");
        let mut c = [0i128; 5];
        for (j, &m) in self.0.iter().enumerate() {
            c[(j * k) % 5] += m as i128;
        }
        // Permuting coefficients and subtracting one of them cannot overflow
        // i64 unless an input coefficient is already near the limit.
        Self::reduce5(c).expect("Galois image overflow")
    }

    /// The star map xi -> xi^2.
    pub fn star(self) -> CycInt {
        self.galois(2)
    }

    /// Coset homomorphism onto Z/5Z: sum of coefficients mod 5.
    pub fn rho(self) -> u8 {
        let s: i128 = self.0.iter().map(|&m| m as i128).sum();
        s.rem_euclid(5) as u8
    }

    /// Field norm N(a) = a * a^(2) * a^(3) * a^(4), a rational integer.
    pub fn norm(self) -> Result<i64> {
        let p = self
            .checked_mul(self.galois(2))?
            .checked_mul(self.galois(3))?
            .checked_mul(self.galois(4))?;
        debug_assert!(p.0[1] == 0 && p.0[2] == 0 && p.0[3] == 0);
        Ok(p.0[0])
    }

    /// Exact quotient self / d, failing if d does not divide self.
    pub fn checked_div(self, d: CycInt) -> Result<CycInt> {
        let n = d.norm()?;
        if n == 0 {
            return Err(Error::NotDivisible(self.to_string(), d.to_string()));
        }
        let cofactor = d.galois(2).checked_mul(d.galois(3))?.checked_mul(d.galois(4))?;
        let num = self.checked_mul(cofactor)?;
        let mut out = [0i64; 4];
        for k in 0..4 {
            if num.0[k] % n != 0 {
                return Err(Error::NotDivisible(self.to_string(), d.to_string()));
            }
            out[k] = num.0[k] / n;
        }
        Ok(CycInt(out))
    }

    /// Embedding into physical space C (xi = exp(2 pi i/5)).
    pub fn embed_physical(self) -> Complex64 {
        let p = xi_powers();
        (0..4).map(|k| p[k] * self.0[k] as f64).sum()
    }

    /// Embedding into internal space: embed_physical after the star map.
    pub fn embed_internal(self) -> Complex64 {
        let p = xi_powers();
        (0..4).map(|k| p[(2 * k) % 5] * self.0[k] as f64).sum()
    }

    pub fn max_abs_coeff(self) -> i64 {
        self.0.iter().map(|m| m.abs()).max().unwrap_or(0)
    }
}

impl fmt::Display for CycInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a},{b},{c},{d})")
    }
}

impl From<i64> for CycInt {
    fn from(k: i64) -> Self {
        CycInt::from_int(k)
    }
}

// Operator impls panic on overflow, like the primitive integer types in debug
// builds. Use the checked_* methods where inputs are untrusted.
impl Add for CycInt {
    type Output = CycInt;
    fn add(self, rhs: CycInt) -> CycInt {
        self.checked_add(rhs).expect("CycInt addition overflow")
    }
}

impl Sub for CycInt {
    type Output = CycInt;
    fn sub(self, rhs: CycInt) -> CycInt {
        self.checked_sub(rhs).expect("CycInt subtraction overflow")
    }
}

impl Neg for CycInt {
    type Output = CycInt;
    fn neg(self) -> CycInt {
        self.checked_neg().expect("CycInt negation overflow")
    }
}

impl Mul for CycInt {
    type Output = CycInt;
    fn mul(self, rhs: CycInt) -> CycInt {
        self.checked_mul(rhs).expect("CycInt multiplication overflow")
    }
}

/// Coefficient-wise sum.
pub fn cyc_add(a: CycInt, b: CycInt) -> Result<CycInt> {
    a.checked_add(b)
}

/// Ring product reduced to the canonical basis.
pub fn cyc_mul(a: CycInt, b: CycInt) -> Result<CycInt> {
    a.checked_mul(b)
}

pub fn embed_physical(a: CycInt) -> Complex64 {
    a.embed_physical()
}

pub fn embed_internal(a: CycInt) -> Complex64 {
    a.embed_internal()
}

pub fn star(a: CycInt) -> CycInt {
    a.star()
}

pub fn rho(a: CycInt) -> u8 {
    a.rho()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const TAU: f64 = 1.618_033_988_749_895;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn add_examples() {
        assert_eq!(cyc_add(CycInt::ONE, CycInt::XI).unwrap(), CycInt::new(1, 1, 0, 0));
        let a = CycInt::new(-1, 2, 0, 3);
        assert_eq!(cyc_add(a, CycInt::ZERO).unwrap(), a);
        assert_eq!(cyc_add(a, CycInt::new(1, -2, 0, -3)).unwrap(), CycInt::ZERO);
    }

    #[test]
    fn add_overflow_is_reported() {
        let big = CycInt::new(i64::MAX, 0, 0, 0);
        assert_eq!(cyc_add(big, CycInt::ONE), Err(Error::Overflow));
        assert_eq!(cyc_mul(big, CycInt::from_int(2)), Err(Error::Overflow));
    }

    #[test]
    fn mul_examples() {
        let xi3 = CycInt::new(0, 0, 0, 1);
        let p = cyc_mul(CycInt::XI, xi3).unwrap();
        assert_eq!(p, CycInt::new(-1, -1, -1, -1));
        // numeric confirmation: xi^4 = exp(8 pi i / 5)
        assert!(close(p.embed_physical(), Complex64::from_polar(1.0, 8.0 * PI / 5.0), 1e-12));

        let a = CycInt::new(3, -1, 4, 1);
        assert_eq!(cyc_mul(a, CycInt::ONE).unwrap(), a);

        let tt = cyc_mul(CycInt::TAU, CycInt::TAU).unwrap();
        assert_eq!(tt, CycInt::TAU + CycInt::ONE);
        assert_abs_diff_eq!(tt.embed_physical().re, TAU * TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(tt.embed_physical().re, 2.618_033_988_749_895, epsilon = 1e-12);
    }

    #[test]
    fn embeddings() {
        assert!(close(CycInt::ONE.embed_physical(), Complex64::new(1.0, 0.0), 1e-15));
        let x = CycInt::XI.embed_physical();
        assert_abs_diff_eq!(x.re, (72f64).to_radians().cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(x.im, (72f64).to_radians().sin(), epsilon = 1e-15);
        let t = CycInt::TAU.embed_physical();
        assert_abs_diff_eq!(t.re, 1.618_033_988_7, epsilon = 1e-10);
        assert_abs_diff_eq!(t.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn star_examples() {
        assert_eq!(star(CycInt::XI), CycInt::new(0, 0, 1, 0));
        assert_eq!(star(CycInt::from_int(7)), CycInt::from_int(7));
        let ts = star(CycInt::TAU).embed_physical();
        assert_abs_diff_eq!(ts.re, -0.618_033_988_7, epsilon = 1e-10);
        assert_abs_diff_eq!(ts.re, -1.0 / TAU, epsilon = 1e-14);
        assert!(close(CycInt::TAU.embed_internal(), ts, 1e-14));
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(CycInt::ONE), 1);
        assert_eq!(rho(CycInt::TAU), 3);
        let xi4 = CycInt::new(-1, -1, -1, -1);
        let s = CycInt::XI + xi4;
        assert_eq!(s, CycInt::new(-1, 0, -1, -1));
        assert_eq!(rho(s), 2);
        assert_eq!(rho(CycInt::from_int(-1)), 4);
    }

    #[test]
    fn tau_inverse_and_division() {
        assert_eq!(CycInt::TAU * CycInt::TAU_INV, CycInt::ONE);
        assert_eq!(CycInt::TAU.norm().unwrap(), 1);
        let a = CycInt::new(4, -3, 2, 7);
        assert_eq!((a * CycInt::TAU).checked_div(CycInt::TAU).unwrap(), a);
        let two = CycInt::from_int(2);
        assert_eq!((a * two).checked_div(two).unwrap(), a);
        assert!(CycInt::ONE.checked_div(two).is_err());
        assert!(a.checked_div(CycInt::ZERO).is_err());
    }

    fn small() -> impl Strategy<Value = CycInt> {
        prop::array::uniform4(-100i64..=100).prop_map(CycInt)
    }

    proptest! {
        #[test]
        fn embedding_is_a_ring_homomorphism(a in small(), b in small()) {
            let pa = a.embed_physical();
            let pb = b.embed_physical();
            prop_assert!(close((a * b).embed_physical(), pa * pb, 1e-9));
            prop_assert!(close((a + b).embed_physical(), pa + pb, 1e-9));
            let ia = a.embed_internal();
            let ib = b.embed_internal();
            prop_assert!(close((a * b).embed_internal(), ia * ib, 1e-9));
        }

        #[test]
        fn star_has_order_four(a in small(), b in small()) {
            prop_assert_eq!(a.star().star().star().star(), a);
            prop_assert_eq!((a * b).star(), a.star() * b.star());
            prop_assert_eq!((a + b).star(), a.star() + b.star());
        }

        #[test]
        fn rho_is_a_homomorphism(a in small(), b in small()) {
            prop_assert_eq!(rho(a + b), (rho(a) + rho(b)) % 5);
            prop_assert_eq!(rho(a * b), (rho(a) * rho(b)) % 5);
        }

        #[test]
        fn internal_image_of_tau_contracts(a in small()) {
            let lhs = (CycInt::TAU * a).embed_internal();
            let rhs = a.embed_internal() * (-1.0 / TAU);
            prop_assert!(close(lhs, rhs, 1e-9));
        }

        #[test]
        fn internal_is_physical_after_star(a in small()) {
            prop_assert!(close(a.embed_internal(), a.star().embed_physical(), 1e-9));
        }
    }
}
