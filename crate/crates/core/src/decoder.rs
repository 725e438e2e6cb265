//! Successive-cancellation decoding of `U = M^{⊗t} Z` over `F_q`.
//!
//! `Z` has independent per-coordinate priors. Because `U` is a bijective
//! image of `Z`, the conditional law of `U_p` given `U_{<p}` is the SC
//! posterior of a polar code with generator `G = M^{-1}`, a uniform message
//! `U` and "channel" likelihoods equal to the priors on `Z`.
//!
//! The recursion splits `U` into `k` contiguous blocks. Block `r` generates a
//! sub-codeword `X_r = G^{⊗(t-1)} U_r` and, for every position `p`, the
//! codeword entries `Z[a·m/k + p]` (`a = 0..k`) equal `G · (X_0[p], …,
//! X_{k-1}[p])`. Decoding block `r` needs, per position, the distribution of
//! `X_r[p]` with `X_{<r}[p]` already decided and `X_{>r}[p]` marginalized;
//! that is computed by enumerating the `q^{k-r}` kernel inputs. Every level
//! keeps one buffer, so a full decode touches `O(m log m)` node entries.

use thiserror::Error;

use crate::field::FieldElement;
use crate::hmm::SymbolDistribution;
use crate::transform::{TransformError, TransformPlan};

/// Relative slack under which two conditional probabilities count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecoderError {
    #[error("{what} has length {actual}, plan expects {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("symbol {symbol} at position {position} is outside F_q")]
    SymbolOutOfRange {
        position: usize,
        symbol: FieldElement,
    },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// A length-`m` vector over `F_q ∪ {⊥}`; `None` is `⊥`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialVector {
    entries: Vec<Option<FieldElement>>,
}

impl PartialVector {
    pub fn new(entries: Vec<Option<FieldElement>>) -> Self {
        Self { entries }
    }

    pub fn unspecified(m: usize) -> Self {
        Self::new(vec![None; m])
    }

    pub fn fully_specified(values: &[FieldElement]) -> Self {
        Self::new(values.iter().copied().map(Some).collect())
    }

    pub fn entries(&self) -> &[Option<FieldElement>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The positions that are not `⊥`, ascending.
    pub fn specified_set(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(p, e)| e.map(|_| p))
            .collect()
    }
}

/// Independent per-coordinate priors on `Z`, stored flat (`m × q`).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorProfile {
    q: usize,
    probs: Vec<f64>,
}

impl PriorProfile {
    pub fn from_flat(q: usize, probs: Vec<f64>) -> Self {
        assert!(q > 0 && probs.len().is_multiple_of(q), "flat priors must be m x q");
        Self { q, probs }
    }

    pub fn from_distributions(dists: &[SymbolDistribution]) -> Self {
        let q = dists.first().map_or(1, |d| d.0.len());
        Self::from_flat(q, dists.iter().flat_map(|d| d.0.iter().copied()).collect())
    }

    pub fn uniform(q: usize, m: usize) -> Self {
        Self::from_flat(q, vec![1.0 / q as f64; q * m])
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn at(&self, position: usize) -> &[f64] {
        &self.probs[position * self.q..(position + 1) * self.q]
    }

    pub fn flat(&self) -> &[f64] {
        &self.probs
    }
}

/// Most likely symbol; near-ties go to the smallest field element.
pub fn argmax(dist: &[f64]) -> FieldElement {
    let best = dist.iter().copied().fold(0.0, f64::max);
    let cut = best * (1.0 - TIE_TOLERANCE);
    dist.iter().position(|&p| p >= cut).unwrap_or(0) as FieldElement
}

fn normalize(dist: &mut [f64]) {
    let total: f64 = dist.iter().sum();
    if total > 0.0 {
        dist.iter_mut().for_each(|p| *p /= total);
    }
}

/// Reusable SC decoder for one [`TransformPlan`].
#[derive(Debug, Clone)]
pub struct ScDecoder {
    plan: TransformPlan,
    q: usize,
    // probs[d]: node distributions at depth d, (m / k^d) x q
    probs: Vec<Vec<f64>>,
    // words[d]: decided sub-codewords of the children of the active node at depth d
    words: Vec<Vec<FieldElement>>,
    root_word: Vec<FieldElement>,
    // kernel enumeration scratch
    x: Vec<FieldElement>,
    z: Vec<FieldElement>,
}

impl ScDecoder {
    pub fn new(plan: TransformPlan) -> Self {
        let q = plan.kernel().field().size();
        let k = plan.kernel().side();
        let t = plan.depth() as usize;
        let m = plan.len();
        let probs = (0..=t)
            .map(|d| vec![0.0; (m / k.pow(d as u32)) * q])
            .collect();
        let words = (0..t).map(|d| vec![0; m / k.pow(d as u32)]).collect();
        Self {
            plan,
            q,
            probs,
            words,
            root_word: vec![0; m],
            x: vec![0; k],
            z: vec![0; k],
        }
    }

    pub fn plan(&self) -> &TransformPlan {
        &self.plan
    }

    fn check_prior(&self, prior: &PriorProfile) -> Result<(), DecoderError> {
        if prior.q() != self.q || prior.len() != self.plan.len() {
            return Err(DecoderError::DimensionMismatch {
                what: "prior profile",
                expected: self.plan.len() * self.q,
                actual: prior.flat().len(),
            });
        }
        Ok(())
    }

    /// Decodes `u`, returning `(ẑ, û)`. Specified positions of `u` are kept
    /// verbatim; every `⊥` becomes the argmax of its exact SC conditional.
    pub fn decode(
        &mut self,
        prior: &PriorProfile,
        u: &PartialVector,
    ) -> Result<(Vec<FieldElement>, Vec<FieldElement>), DecoderError> {
        self.check_prior(prior)?;
        if u.len() != self.plan.len() {
            return Err(DecoderError::DimensionMismatch {
                what: "partial vector",
                expected: self.plan.len(),
                actual: u.len(),
            });
        }
        if let Some((position, symbol)) = u
            .entries()
            .iter()
            .enumerate()
            .find_map(|(p, e)| e.filter(|&s| s as usize >= self.q).map(|s| (p, s)))
        {
            return Err(DecoderError::SymbolOutOfRange { position, symbol });
        }
        let entries = u.entries();
        let u_hat = self.run(prior, |p, dist| entries[p].unwrap_or_else(|| argmax(dist)));
        Ok((self.root_word.clone(), u_hat))
    }

    /// Genie-aided pass: every `U_p` is pinned to the true value, and
    /// `visit(p, conditional, u_true_p)` sees the conditional of `U_p` given
    /// the true prefix. Returns the true `U`.
    pub fn scan_with(
        &mut self,
        prior: &PriorProfile,
        z_true: &[FieldElement],
        mut visit: impl FnMut(usize, &[f64], FieldElement),
    ) -> Result<Vec<FieldElement>, DecoderError> {
        self.check_prior(prior)?;
        let u_true = self.plan.polar_transform(z_true)?;
        self.run(prior, |p, dist| {
            visit(p, dist, u_true[p]);
            u_true[p]
        });
        Ok(u_true)
    }

    fn run(
        &mut self,
        prior: &PriorProfile,
        mut decide: impl FnMut(usize, &[f64]) -> FieldElement,
    ) -> Vec<FieldElement> {
        self.probs[0].copy_from_slice(prior.flat());
        let mut u_hat = vec![0; self.plan.len()];
        self.node(0, 0, 0, &mut decide, &mut u_hat);
        u_hat
    }

    /// Decodes the node at `depth` covering `U[offset..offset + len]`, whose
    /// codeword distributions sit in `probs[depth]`. The decided codeword is
    /// written to slot `slot` of `words[depth - 1]` (or `root_word`).
    fn node(
        &mut self,
        depth: usize,
        offset: usize,
        slot: usize,
        decide: &mut impl FnMut(usize, &[f64]) -> FieldElement,
        u_hat: &mut [FieldElement],
    ) {
        let q = self.q;
        let t = self.plan.depth() as usize;
        if depth == t {
            let value = decide(offset, &self.probs[t]);
            u_hat[offset] = value;
            if t == 0 {
                self.root_word[0] = value;
            } else {
                self.words[t - 1][slot] = value;
            }
            return;
        }

        let k = self.plan.kernel().side();
        let len = self.probs[depth].len() / q;
        let sub = len / k;
        for r in 0..k {
            self.child_priors(depth, r, sub);
            self.node(depth + 1, offset + r * sub, r, decide, u_hat);
        }

        // combine the k sub-codewords into this node's codeword
        let kernel = self.plan.kernel();
        let (lower, upper) = self.words.split_at_mut(depth);
        let children = &upper[0];
        let out: &mut [FieldElement] = if depth == 0 {
            &mut self.root_word
        } else {
            let parent = &mut lower[depth - 1];
            &mut parent[slot * len..(slot + 1) * len]
        };
        for p in 0..sub {
            for (c, x) in self.x.iter_mut().enumerate() {
                *x = children[c * sub + p];
            }
            kernel.apply_into(&self.x, &mut self.z, true);
            for (a, &z) in self.z.iter().enumerate() {
                out[a * sub + p] = z;
            }
        }
    }

    /// Fills `probs[depth + 1]` with the distribution of `X_r[p]` for every
    /// position, given the already decided `X_{<r}[p]`.
    fn child_priors(&mut self, depth: usize, r: usize, sub: usize) {
        let q = self.q;
        let k = self.plan.kernel().side();
        let kernel = self.plan.kernel();
        let (lower, upper) = self.probs.split_at_mut(depth + 1);
        let parent = &lower[depth];
        let child = &mut upper[0];
        let decided = &self.words[depth];
        let free = k - r - 1;
        let tails = q.pow(free as u32);
        for p in 0..sub {
            for c in 0..r {
                self.x[c] = decided[c * sub + p];
            }
            let dist = &mut child[p * q..(p + 1) * q];
            for (value, slot) in dist.iter_mut().enumerate() {
                self.x[r] = value as FieldElement;
                let mut acc = 0.0;
                for tail in 0..tails {
                    let mut rest = tail;
                    for c in r + 1..k {
                        self.x[c] = (rest % q) as FieldElement;
                        rest /= q;
                    }
                    kernel.apply_into(&self.x, &mut self.z, true);
                    let mut w = 1.0;
                    for (a, &z) in self.z.iter().enumerate() {
                        w *= parent[(a * sub + p) * q + z as usize];
                    }
                    acc += w;
                }
                *slot = acc;
            }
            normalize(dist);
        }
    }
}

/// One-shot [`ScDecoder::decode`].
pub fn sc_decode(
    plan: &TransformPlan,
    prior: &PriorProfile,
    u: &PartialVector,
) -> Result<(Vec<FieldElement>, Vec<FieldElement>), DecoderError> {
    ScDecoder::new(plan.clone()).decode(prior, u)
}

/// Conditionals of every `U_p` given the true prefix `U_{<p}`.
pub fn sc_scan(
    plan: &TransformPlan,
    prior: &PriorProfile,
    z_true: &[FieldElement],
) -> Result<Vec<SymbolDistribution>, DecoderError> {
    let mut out = Vec::with_capacity(plan.len());
    ScDecoder::new(plan.clone()).scan_with(prior, z_true, |_, dist, _| {
        out.push(SymbolDistribution(dist.to_vec()))
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::KernelMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plan(q: u32, t: u32) -> TransformPlan {
        TransformPlan::new(KernelMatrix::arikan(q).unwrap(), t).unwrap()
    }

    fn random_prior(rng: &mut ChaCha8Rng, q: usize, m: usize) -> PriorProfile {
        let mut probs: Vec<f64> = (0..q * m).map(|_| rng.gen_range(0.01..1.0)).collect();
        probs.chunks_mut(q).for_each(normalize);
        PriorProfile::from_flat(q, probs)
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.25, 0.5, 0.25]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4 * (1.0 + 1e-14)]), 1);
    }

    #[test]
    fn fully_specified_ignores_priors() {
        let plan = plan(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<u8> = (0..8).map(|_| rng.gen_range(0..3)).collect();
        let prior = random_prior(&mut rng, 3, 8);
        let (z, u_hat) = sc_decode(&plan, &prior, &PartialVector::fully_specified(&u)).unwrap();
        assert_eq!(u_hat, u);
        assert_eq!(z, plan.polar_inverse(&u).unwrap());
    }

    #[test]
    fn point_mass_priors_recover_z() {
        let plan = plan(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z: Vec<u8> = (0..32).map(|_| rng.gen_range(0..2)).collect();
        let dists: Vec<_> = z
            .iter()
            .map(|&s| SymbolDistribution::point_mass(2, s))
            .collect();
        let prior = PriorProfile::from_distributions(&dists);
        let (z_hat, u_hat) = sc_decode(&plan, &prior, &PartialVector::unspecified(32)).unwrap();
        assert_eq!(z_hat, z);
        assert_eq!(u_hat, plan.polar_transform(&z).unwrap());
    }

    #[test]
    fn decoded_word_is_inverse_of_decided_u() {
        let kernel = KernelMatrix::new(5, &[vec![2, 1, 0], vec![1, 1, 1], vec![0, 3, 2]]).unwrap();
        let plan = TransformPlan::new(kernel, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let prior = random_prior(&mut rng, 5, 9);
            let u = PartialVector::new(
                (0..9)
                    .map(|_| rng.gen_bool(0.4).then(|| rng.gen_range(0..5)))
                    .collect(),
            );
            let (z, u_hat) = sc_decode(&plan, &prior, &u).unwrap();
            assert_eq!(z, plan.polar_inverse(&u_hat).unwrap());
            let u_back = plan.polar_transform(&z).unwrap();
            for p in u.specified_set() {
                assert_eq!(Some(u_back[p]), u.entries()[p]);
            }
        }
    }

    #[test]
    fn scan_of_point_masses_and_uniform() {
        let plan = plan(3, 2);
        let z = vec![2, 0, 1, 1];
        let dists: Vec<_> = z
            .iter()
            .map(|&s| SymbolDistribution::point_mass(3, s))
            .collect();
        let u = plan.polar_transform(&z).unwrap();
        let conds = sc_scan(&plan, &PriorProfile::from_distributions(&dists), &z).unwrap();
        for (c, &up) in conds.iter().zip(&u) {
            assert_eq!(c.0, SymbolDistribution::point_mass(3, up).0);
        }
        let conds = sc_scan(&plan, &PriorProfile::uniform(3, 4), &z).unwrap();
        for c in conds {
            for p in c.0 {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_checks() {
        let plan = plan(2, 2);
        let prior = PriorProfile::uniform(2, 4);
        assert!(matches!(
            sc_decode(&plan, &prior, &PartialVector::unspecified(3)),
            Err(DecoderError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            sc_decode(
                &plan,
                &PriorProfile::uniform(2, 8),
                &PartialVector::unspecified(4)
            ),
            Err(DecoderError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            sc_decode(
                &plan,
                &prior,
                &PartialVector::new(vec![Some(2), None, None, None])
            ),
            Err(DecoderError::SymbolOutOfRange { .. })
        ));
        assert!(matches!(
            sc_scan(&plan, &prior, &[0, 1]),
            Err(DecoderError::Transform(_))
        ));
    }

    #[test]
    fn depth_zero() {
        let plan = plan(3, 0);
        let prior = PriorProfile::from_flat(3, vec![0.2, 0.5, 0.3]);
        let (z, u) = sc_decode(&plan, &prior, &PartialVector::unspecified(1)).unwrap();
        assert_eq!((z, u), (vec![1], vec![1]));
    }
}
