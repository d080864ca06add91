//! Matrix permanents by Glynn's formula with Gray-code ordering, `O(2^(k-1) k)`.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::matrix::ComplexMatrix;
use crate::{Error, Result};

/// Scalars the permanent can be evaluated over.
pub trait Scalar: Copy + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> {}

impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Permanent of a `dim × dim` matrix given in row-major order.
pub fn permanent<T: Scalar>(entries: &[T], dim: usize) -> Result<T> {
    if entries.len() != dim * dim {
        return Err(Error::NotSquare { dim, len: entries.len() });
    }
    Ok(glynn(entries, dim))
}

pub fn permanent_of(m: &ComplexMatrix) -> Complex64 {
    glynn(m.as_slice(), m.dim())
}

pub(crate) fn glynn<T: Scalar>(a: &[T], n: usize) -> T {
    match n {
        0 => return T::one(),
        1 => return a[0],
        2 => return a[0] * a[3] + a[1] * a[2],
        _ => {}
    }
    // Column sums with every row sign +1.
    let mut sums: Vec<T> = (0..n).map(|j| (0..n).fold(T::zero(), |acc, i| acc + a[i * n + j])).collect();
    let mut negative = alloc::vec![false; n];
    let mut total = sums.iter().fold(T::one(), |acc, &s| acc * s);
    let mut odd = false;
    // Row 0 keeps sign +1; Gray code walks the other n-1 signs.
    for g in 1u64..(1u64 << (n - 1)) {
        let row = g.trailing_zeros() as usize + 1;
        let r = &a[row * n..(row + 1) * n];
        if negative[row] {
            for (s, &x) in sums.iter_mut().zip(r) {
                *s = *s + x * 2.0;
            }
        } else {
            for (s, &x) in sums.iter_mut().zip(r) {
                *s = *s - x * 2.0;
            }
        }
        negative[row] = !negative[row];
        odd = !odd;
        let prod = sums.iter().fold(T::one(), |acc, &s| acc * s);
        total = if odd { total - prod } else { total + prod };
    }
    total * (1.0 / (1u64 << (n - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn naive(a: &[Complex64], n: usize) -> Complex64 {
        fn rec(a: &[Complex64], n: usize, row: usize, used: &mut [bool]) -> Complex64 {
            if row == n {
                return Complex64::new(1.0, 0.0);
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..n {
                if !used[c] {
                    used[c] = true;
                    acc += a[row * n + c] * rec(a, n, row + 1, used);
                    used[c] = false;
                }
            }
            acc
        }
        rec(a, n, 0, &mut alloc::vec![false; n])
    }

    #[test]
    fn small_cases() {
        let a = Complex64::new(0.3, -1.2);
        assert_eq!(permanent(&[a], 1).unwrap(), a);
        let m = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(permanent(&m, 2).unwrap(), 1.0 * 4.0 + 2.0 * 3.0);
        assert_eq!(permanent::<f64>(&[], 0).unwrap(), 1.0);
        assert!(permanent(&m, 3).is_err());
        // All-ones n×n has permanent n!.
        assert!((permanent(&[1.0; 25], 5).unwrap() - 120.0).abs() < 1e-12);
    }

    #[test]
    fn matches_permutation_sum() {
        let mut r = rng::seeded(5);
        for n in 1..=7 {
            let a: Vec<Complex64> =
                (0..n * n).map(|_| Complex64::new(rng::standard_normal(&mut r), rng::standard_normal(&mut r))).collect();
            let fast = permanent(&a, n).unwrap();
            let slow = naive(&a, n);
            assert!((fast - slow).norm() <= 1e-10 * slow.norm().max(1.0), "n={n}");
        }
    }
}
