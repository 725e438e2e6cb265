//! Arithmetic over a small prime field `F_q` and the `k x k` kernel matrix.
//!
//! Field elements are plain `u8` values in `[0, q)`. The modulus lives in a
//! [`PrimeField`] descriptor, which also carries a precomputed inverse table.

use std::fmt;

use thiserror::Error;

/// A symbol of `F_q`, always reduced into `[0, q)`.
pub type FieldElement = u8;

/// Largest prime accepted as a modulus; symbols must fit in a byte.
pub const MAX_MODULUS: u32 = 251;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    CompositeModulus(u32),
    #[error("modulus {0} is outside the supported range [2, {MAX_MODULUS}]")]
    ModulusOutOfRange(u32),
    #[error("kernel matrix is singular over F_{0}")]
    SingularKernel(u8),
    #[error("kernel must be a non-empty square matrix, got {rows} rows with lengths {cols:?}")]
    NotSquare { rows: usize, cols: Vec<usize> },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("kernel entry {0} is not reduced mod q")]
    UnreducedEntry(u8),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = egcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// The prime field `F_q` for `q <= 251`.
#[derive(Clone, PartialEq, Eq)]
pub struct PrimeField {
    q: u8,
    // inverses[x] = x^-1 for x != 0; inverses[0] is unused
    inverses: Vec<u8>,
}

impl fmt::Debug for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

impl PrimeField {
    pub fn new(q: u32) -> Result<Self, FieldError> {
        if !(2..=MAX_MODULUS).contains(&q) {
            return Err(FieldError::ModulusOutOfRange(q));
        }
        if !is_prime(q) {
            return Err(FieldError::CompositeModulus(q));
        }
        let inverses = (0..q as i64)
            .map(|x| {
                if x == 0 {
                    0
                } else {
                    let (_, inv, _) = egcd(x, q as i64);
                    inv.rem_euclid(q as i64) as u8
                }
            })
            .collect();
        Ok(Self {
            q: q as u8,
            inverses,
        })
    }

    #[inline]
    pub fn modulus(&self) -> u8 {
        self.q
    }

    /// Number of field elements, as a `usize` for indexing.
    #[inline]
    pub fn size(&self) -> usize {
        self.q as usize
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> FieldElement {
        (x % self.q as u64) as u8
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a as u16 + b as u16;
        let q = self.q as u16;
        (if s >= q { s - q } else { s }) as u8
    }

    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        ((a as u16 * b as u16) % self.q as u16) as u8
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.is_multiple_of(self.q) {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.inverses[(a % self.q) as usize])
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        0..self.q
    }
}

/// An invertible `k x k` matrix over `F_q` together with its inverse.
///
/// Entries are stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelMatrix {
    field: PrimeField,
    k: usize,
    entries: Vec<FieldElement>,
    inverse: Vec<FieldElement>,
}

impl KernelMatrix {
    /// Builds a kernel from integer rows, reducing every entry mod `q`.
    pub fn new(q: u32, rows: &[Vec<i64>]) -> Result<Self, FieldError> {
        let field = PrimeField::new(q)?;
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(FieldError::NotSquare {
                rows: k,
                cols: rows.iter().map(Vec::len).collect(),
            });
        }
        let entries: Vec<u8> = rows
            .iter()
            .flatten()
            .map(|&x| x.rem_euclid(q as i64) as u8)
            .collect();
        Self::from_entries(field, k, entries)
    }

    /// Builds a kernel from already-reduced row-major entries.
    pub fn from_entries(
        field: PrimeField,
        k: usize,
        entries: Vec<FieldElement>,
    ) -> Result<Self, FieldError> {
        if k == 0 || entries.len() != k * k {
            return Err(FieldError::DimensionMismatch {
                expected: k * k,
                actual: entries.len(),
            });
        }
        let q = field.modulus();
        if let Some(&e) = entries.iter().find(|&&e| e >= q) {
            return Err(FieldError::UnreducedEntry(e));
        }
        let inverse = invert(&field, k, &entries).ok_or(FieldError::SingularKernel(q))?;
        let kernel = Self {
            field,
            k,
            entries,
            inverse,
        };
        debug_assert!(kernel.product_is_identity());
        Ok(kernel)
    }

    /// Arıkan's 2x2 kernel for the column-vector convention `U = M Z`:
    /// `[[1, 1], [0, 1]]`, the transpose of the usual row-vector form
    /// `[[1, 0], [1, 1]]`. Successive cancellation in natural index order
    /// polarizes with this orientation; with the transpose, `M^{⊗t}` is
    /// lower-triangular and each `U_p` given `U_{<p}` carries exactly the
    /// information of `Z_p` given `Z_{<p}`.
    pub fn arikan(q: u32) -> Result<Self, FieldError> {
        Self::new(q, &[vec![1, 1], vec![0, 1]])
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn side(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[FieldElement] {
        &self.entries
    }

    pub fn inverse_entries(&self) -> &[FieldElement] {
        &self.inverse
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> FieldElement {
        self.entries[row * self.k + col]
    }

    #[inline]
    pub fn get_inverse(&self, row: usize, col: usize) -> FieldElement {
        self.inverse[row * self.k + col]
    }

    /// Returns `M v`, or `M^-1 v` when `inverse` is set.
    pub fn mat_vec(
        &self,
        v: &[FieldElement],
        inverse: bool,
    ) -> Result<Vec<FieldElement>, FieldError> {
        if v.len() != self.k {
            return Err(FieldError::DimensionMismatch {
                expected: self.k,
                actual: v.len(),
            });
        }
        let mut out = vec![0; self.k];
        self.apply_into(v, &mut out, inverse);
        Ok(out)
    }

    /// Unchecked `out = M v` (or `M^-1 v`); both slices have length `k`.
    #[inline]
    pub(crate) fn apply_into(&self, v: &[FieldElement], out: &mut [FieldElement], inverse: bool) {
        let mat = if inverse {
            &self.inverse
        } else {
            &self.entries
        };
        let q = self.field.modulus() as u32;
        for (row, o) in mat.chunks_exact(self.k).zip(out.iter_mut()) {
            let acc: u32 = row.iter().zip(v).map(|(&a, &b)| a as u32 * b as u32).sum();
            *o = (acc % q) as u8;
        }
    }

    fn product_is_identity(&self) -> bool {
        let k = self.k;
        (0..k).all(|i| {
            (0..k).all(|j| {
                let s = (0..k).fold(0u8, |acc, l| {
                    self.field
                        .add(acc, self.field.mul(self.get(i, l), self.get_inverse(l, j)))
                });
                s == u8::from(i == j)
            })
        })
    }
}

/// Gauss-Jordan inversion over `F_q`; `None` when singular.
fn invert(field: &PrimeField, k: usize, entries: &[u8]) -> Option<Vec<u8>> {
    let mut a = entries.to_vec();
    let mut inv: Vec<u8> = (0..k * k).map(|i| u8::from(i / k == i % k)).collect();
    for col in 0..k {
        let pivot = (col..k).find(|&r| a[r * k + col] != 0)?;
        if pivot != col {
            for c in 0..k {
                a.swap(pivot * k + c, col * k + c);
                inv.swap(pivot * k + c, col * k + c);
            }
        }
        let scale = field.inv(a[col * k + col]).ok()?;
        for c in 0..k {
            a[col * k + c] = field.mul(a[col * k + c], scale);
            inv[col * k + c] = field.mul(inv[col * k + c], scale);
        }
        for r in 0..k {
            if r == col || a[r * k + col] == 0 {
                continue;
            }
            let f = a[r * k + col];
            for c in 0..k {
                a[r * k + c] = field.sub(a[r * k + c], field.mul(f, a[col * k + c]));
                inv[r * k + c] = field.sub(inv[r * k + c], field.mul(f, inv[col * k + c]));
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_field() {
        let f = PrimeField::new(2).unwrap();
        assert_eq!(f.elements().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(f.add(1, 1), 0);
    }

    #[test]
    fn rejects_composites_and_range() {
        assert_eq!(PrimeField::new(4), Err(FieldError::CompositeModulus(4)));
        assert_eq!(PrimeField::new(249), Err(FieldError::CompositeModulus(249)));
        assert_eq!(PrimeField::new(1), Err(FieldError::ModulusOutOfRange(1)));
        assert_eq!(
            PrimeField::new(257),
            Err(FieldError::ModulusOutOfRange(257))
        );
        assert!(PrimeField::new(251).is_ok());
    }

    #[test]
    fn inverse_matches_brute_force() {
        let f = PrimeField::new(7).unwrap();
        let brute = (1..7u8).find(|x| (3 * *x as u32) % 7 == 1).unwrap();
        assert_eq!(brute, 5);
        assert_eq!(f.inv(3), Ok(5));
        assert_eq!(f.inv(0), Err(FieldError::ZeroInverse));
        for q in [2u32, 3, 5, 7, 11, 13, 251] {
            let f = PrimeField::new(q).unwrap();
            for x in 1..q as u8 {
                assert_eq!(f.mul(x, f.inv(x).unwrap()), 1, "q={q} x={x}");
            }
        }
    }

    #[test]
    fn arikan_is_self_inverse_over_f2() {
        let m = KernelMatrix::new(2, &[vec![1, 0], vec![1, 1]]).unwrap();
        assert_eq!(m.inverse_entries(), m.entries());
        assert_eq!(m.mat_vec(&[1, 0], false).unwrap(), vec![1, 1]);
        let a = KernelMatrix::arikan(2).unwrap();
        assert_eq!(a.inverse_entries(), a.entries());
        assert_eq!(a.mat_vec(&[0, 1], false).unwrap(), vec![1, 1]);
        assert_eq!(
            KernelMatrix::arikan(3).unwrap().inverse_entries(),
            &[1, 2, 0, 1]
        );
    }

    #[test]
    fn singular_kernel_rejected() {
        let err = KernelMatrix::new(2, &[vec![1, 1], vec![1, 1]]).unwrap_err();
        assert_eq!(err, FieldError::SingularKernel(2));
        // 2 == 0 mod 2, so this one is singular too
        assert!(KernelMatrix::new(2, &[vec![2, 0], vec![1, 1]]).is_err());
        assert!(matches!(
            KernelMatrix::new(3, &[vec![1, 0]]),
            Err(FieldError::NotSquare { .. })
        ));
    }

    #[test]
    fn arikan_over_f3() {
        let m = KernelMatrix::new(3, &[vec![1, 0], vec![1, 1]]).unwrap();
        assert_eq!(m.inverse_entries(), &[1, 0, 2, 1]);
        assert_eq!(m.mat_vec(&[2, 2], false).unwrap(), vec![2, 1]);
        assert_eq!(m.mat_vec(&[0, 0], true).unwrap(), vec![0, 0]);
        assert_eq!(
            m.mat_vec(&[1, 2, 0], false),
            Err(FieldError::DimensionMismatch {
                expected: 2,
                actual: 3
            })
        );
    }

    #[test]
    fn negative_entries_reduce() {
        let m = KernelMatrix::new(5, &[vec![1, -1], vec![0, 1]]).unwrap();
        assert_eq!(m.entries(), &[1, 4, 0, 1]);
    }

    fn field_and_triple() -> impl Strategy<Value = (PrimeField, u8, u8, u8)> {
        prop_oneof![Just(2u32), Just(3), Just(5), Just(7)].prop_flat_map(|q| {
            (
                Just(PrimeField::new(q).unwrap()),
                0..q as u8,
                0..q as u8,
                0..q as u8,
            )
        })
    }

    proptest! {
        #[test]
        fn ring_axioms((f, a, b, c) in field_and_triple()) {
            prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.add(a, b), f.add(b, a));
            prop_assert_eq!(f.add(a, f.neg(a)), 0);
            prop_assert_eq!(f.sub(f.add(a, b), b), a);
        }

        #[test]
        fn kernel_round_trip(
            q in prop_oneof![Just(2u32), Just(3), Just(5), Just(7)],
            k in 1usize..5,
            seed in any::<u64>(),
            v in proptest::collection::vec(any::<u8>(), 4),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let field = PrimeField::new(q).unwrap();
            let kernel = loop {
                let entries: Vec<u8> = (0..k * k).map(|_| rng.gen_range(0..q as u8)).collect();
                if let Ok(m) = KernelMatrix::from_entries(field.clone(), k, entries) {
                    break m;
                }
            };
            prop_assert!(kernel.product_is_identity());
            let v: Vec<u8> = v[..k].iter().map(|x| x % q as u8).collect();
            let back = kernel.mat_vec(&kernel.mat_vec(&v, true).unwrap(), false).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
