//! The Kronecker-power transform `M^{⊗t}` on vectors of length `m = k^t`.
//!
//! Index convention: write a position in base `k` as `(d_{t-1} … d_1 d_0)`.
//! `M^{⊗t}` acts on every digit independently, with `d_{t-1}` paired to the
//! leftmost Kronecker factor, so the result equals multiplication by the dense
//! matrix `M ⊗ M ⊗ … ⊗ M` in natural index order. No bit reversal is applied
//! anywhere. The butterfly below applies `M` along one digit at a time,
//! `t` passes of `m / k` kernel applications each.

use thiserror::Error;

use crate::field::{FieldElement, KernelMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("vector has length {actual}, plan expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("position {0} is unspecified")]
    UnspecifiedSymbol(usize),
    #[error("k^t overflows for k = {k}, t = {t}")]
    TooLarge { k: usize, t: u32 },
}

/// A kernel together with a depth `t`; operates on length `k^t` vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformPlan {
    kernel: KernelMatrix,
    depth: u32,
    len: usize,
}

impl TransformPlan {
    pub fn new(kernel: KernelMatrix, depth: u32) -> Result<Self, TransformError> {
        let k = kernel.side();
        let len = k
            .checked_pow(depth)
            .filter(|&m| m <= 1 << 24)
            .ok_or(TransformError::TooLarge { k, t: depth })?;
        Ok(Self { kernel, depth, len })
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    /// `t`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `m = k^t`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check_len(&self, v: &[FieldElement]) -> Result<(), TransformError> {
        if v.len() != self.len {
            return Err(TransformError::DimensionMismatch {
                expected: self.len,
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// `M^{⊗t} z`.
    pub fn polar_transform(&self, z: &[FieldElement]) -> Result<Vec<FieldElement>, TransformError> {
        self.check_len(z)?;
        let mut out = z.to_vec();
        self.apply_in_place(&mut out, false);
        Ok(out)
    }

    /// `(M^{-1})^{⊗t} u`.
    pub fn polar_inverse(&self, u: &[FieldElement]) -> Result<Vec<FieldElement>, TransformError> {
        self.check_len(u)?;
        let mut out = u.to_vec();
        self.apply_in_place(&mut out, true);
        Ok(out)
    }

    /// Inverse transform of a vector that may still contain unspecified
    /// (`None`) positions; fails on the first one.
    pub fn polar_inverse_partial(
        &self,
        u: &[Option<FieldElement>],
    ) -> Result<Vec<FieldElement>, TransformError> {
        let full = u
            .iter()
            .enumerate()
            .map(|(p, x)| x.ok_or(TransformError::UnspecifiedSymbol(p)))
            .collect::<Result<Vec<_>, _>>()?;
        self.polar_inverse(&full)
    }

    /// Applies the transform in place. `v.len()` must equal `m`.
    pub(crate) fn apply_in_place(&self, v: &mut [FieldElement], inverse: bool) {
        debug_assert_eq!(v.len(), self.len);
        let k = self.kernel.side();
        let mut gathered = vec![0u8; k];
        let mut mixed = vec![0u8; k];
        let mut stride = 1;
        for _ in 0..self.depth {
            let span = stride * k;
            for block in (0..self.len).step_by(span) {
                for off in 0..stride {
                    let base = block + off;
                    for (c, g) in gathered.iter_mut().enumerate() {
                        *g = v[base + c * stride];
                    }
                    self.kernel.apply_into(&gathered, &mut mixed, inverse);
                    for (c, &x) in mixed.iter().enumerate() {
                        v[base + c * stride] = x;
                    }
                }
            }
            stride = span;
        }
    }
}
