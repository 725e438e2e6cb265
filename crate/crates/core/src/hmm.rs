//! Hidden Markov sources over `F_q`: sampling, Bayesian filtering and
//! entropy-rate estimation.
//!
//! The transition matrix is stored column-stochastic: `trans[i][j]` is the
//! probability of moving to state `i` from state `j`, so advancing a belief
//! `v` one step is the plain matrix-vector product `Π v`.
//!
//! Filtering is split into two primitives, [`MarkovSource::belief_update`]
//! and [`MarkovSource::predictive`]. [`MarkovSource::forward_infer`] is
//! nothing more than a fold of the first followed by the second, which is
//! what lets a decompressor cache one belief per column instead of
//! re-filtering the whole prefix for every new symbol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, PrimeField};

/// Tolerance on column sums of `Π` and on every emission distribution.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;
/// Tolerance on `Π π = π`.
pub const STATIONARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HmmError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{what} is not a probability distribution (sum {sum}, min {min})")]
    NotStochastic { what: String, sum: f64, min: f64 },
    #[error("pi is not stationary for Pi (max residual {residual:e})")]
    NotStationary { residual: f64 },
    #[error("symbol {symbol} has zero likelihood under every reachable state")]
    ImpossibleObservation { symbol: FieldElement },
    #[error("symbol {symbol} is not an element of F_{q}")]
    SymbolOutOfRange { symbol: FieldElement, q: u8 },
    #[error("source must have at least one state")]
    NoStates,
    #[error("malformed source file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Posterior distribution over hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState(pub Vec<f64>);

impl BeliefState {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// Distribution over the symbols of `F_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDistribution(pub Vec<f64>);

impl SymbolDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn point_mass(q: usize, at: FieldElement) -> Self {
        let mut p = vec![0.0; q];
        p[at as usize] = 1.0;
        Self(p)
    }

    pub fn uniform(q: usize) -> Self {
        Self(vec![1.0 / q as f64; q])
    }
}

/// On-disk representation of a source (TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SourceSpec {
    q: u32,
    states: usize,
    pi: Vec<f64>,
    #[serde(rename = "Pi")]
    transition: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

/// A hidden Markov source over `F_q` with `ℓ` hidden states.
#[derive(Debug, Clone)]
pub struct MarkovSource {
    field: PrimeField,
    states: usize,
    // row-major, trans[i * states + j] = P(next = i | current = j)
    trans: Vec<f64>,
    stationary: Vec<f64>,
    // row-major, emit[s * q + y] = S_s(y)
    emit: Vec<f64>,
}

fn check_distribution(what: impl FnOnce() -> String, p: &[f64]) -> Result<(), HmmError> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= 0.0) || !((sum - 1.0).abs() <= STOCHASTIC_TOLERANCE) {
        return Err(HmmError::NotStochastic {
            what: what(),
            sum,
            min,
        });
    }
    Ok(())
}

impl MarkovSource {
    /// Builds a source and validates every invariant.
    ///
    /// `transition[i][j]` is `P(next = i | current = j)`; `outputs[s][y]` is
    /// the probability that state `s` emits `y`.
    pub fn new(
        q: u32,
        stationary: Vec<f64>,
        transition: Vec<Vec<f64>>,
        outputs: Vec<Vec<f64>>,
    ) -> Result<Self, HmmError> {
        let field = PrimeField::new(q)?;
        let states = stationary.len();
        if states == 0 {
            return Err(HmmError::NoStates);
        }
        if transition.len() != states {
            return Err(HmmError::Dimension {
                what: "Pi rows",
                expected: states,
                actual: transition.len(),
            });
        }
        if let Some(bad) = transition.iter().find(|r| r.len() != states) {
            return Err(HmmError::Dimension {
                what: "Pi row",
                expected: states,
                actual: bad.len(),
            });
        }
        if outputs.len() != states {
            return Err(HmmError::Dimension {
                what: "outputs",
                expected: states,
                actual: outputs.len(),
            });
        }
        if let Some(bad) = outputs.iter().find(|r| r.len() != q as usize) {
            return Err(HmmError::Dimension {
                what: "output distribution",
                expected: q as usize,
                actual: bad.len(),
            });
        }
        let trans: Vec<f64> = transition.into_iter().flatten().collect();
        for j in 0..states {
            let col: Vec<f64> = (0..states).map(|i| trans[i * states + j]).collect();
            check_distribution(|| format!("column {j} of Pi"), &col)?;
        }
        for (s, row) in outputs.iter().enumerate() {
            check_distribution(|| format!("output distribution of state {s}"), row)?;
        }
        check_distribution(|| "pi".to_string(), &stationary)?;
        let source = Self {
            field,
            states,
            trans,
            stationary,
            emit: outputs.into_iter().flatten().collect(),
        };
        let mut next = vec![0.0; states];
        source.propagate(&source.stationary, &mut next);
        let residual = next
            .iter()
            .zip(&source.stationary)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !(residual <= STATIONARY_TOLERANCE) {
            return Err(HmmError::NotStationary { residual });
        }
        Ok(source)
    }

    /// Like [`MarkovSource::new`] but computes `π` from `Π`.
    pub fn with_computed_stationary(
        q: u32,
        transition: Vec<Vec<f64>>,
        outputs: Vec<Vec<f64>>,
    ) -> Result<Self, HmmError> {
        let pi = stationary_of(&transition);
        Self::new(q, pi, transition, outputs)
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn q(&self) -> usize {
        self.field.size()
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn initial_belief(&self) -> BeliefState {
        BeliefState(self.stationary.clone())
    }

    /// `P(next = to | current = from)`.
    pub fn transition(&self, to: usize, from: usize) -> f64 {
        self.trans[to * self.states + from]
    }

    /// `S_state(symbol)`.
    pub fn emission(&self, state: usize, symbol: FieldElement) -> f64 {
        self.emit[state * self.q() + symbol as usize]
    }

    /// `out = Π v`.
    #[inline]
    fn propagate(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.trans.chunks_exact(self.states)) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// In-place Bayesian update of `belief` after observing `symbol`.
    ///
    /// `scratch` must have length `ℓ`. Every filtering path in the crate goes
    /// through this function, so repeated folds are bitwise reproducible.
    pub fn update_in_place(
        &self,
        belief: &mut [f64],
        symbol: FieldElement,
        scratch: &mut [f64],
    ) -> Result<(), HmmError> {
        let q = self.q();
        self.propagate(belief, scratch);
        let mut norm = 0.0;
        for (s, (b, &w)) in belief.iter_mut().zip(scratch.iter()).enumerate() {
            *b = w * self.emit[s * q + symbol as usize];
            norm += *b;
        }
        if !(norm > 0.0) {
            return Err(HmmError::ImpossibleObservation { symbol });
        }
        for b in belief.iter_mut() {
            *b /= norm;
        }
        Ok(())
    }

    /// Writes `E_{s ~ Π v}[S_s]` into `out` (length `q`).
    pub fn predictive_into(&self, belief: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let q = self.q();
        self.propagate(belief, scratch);
        out.fill(0.0);
        for (&w, row) in scratch.iter().zip(self.emit.chunks_exact(q)) {
            for (o, &e) in out.iter_mut().zip(row) {
                *o += w * e;
            }
        }
    }

    fn check_symbol(&self, symbol: FieldElement) -> Result<(), HmmError> {
        if symbol as usize >= self.q() {
            return Err(HmmError::SymbolOutOfRange {
                symbol,
                q: self.field.modulus(),
            });
        }
        Ok(())
    }

    fn check_belief(&self, v: &BeliefState) -> Result<(), HmmError> {
        if v.0.len() != self.states {
            return Err(HmmError::Dimension {
                what: "belief",
                expected: self.states,
                actual: v.0.len(),
            });
        }
        Ok(())
    }

    /// Posterior over hidden states after one more observation.
    pub fn belief_update(
        &self,
        v: &BeliefState,
        symbol: FieldElement,
    ) -> Result<BeliefState, HmmError> {
        self.check_belief(v)?;
        self.check_symbol(symbol)?;
        let mut next = v.0.clone();
        let mut scratch = vec![0.0; self.states];
        self.update_in_place(&mut next, symbol, &mut scratch)?;
        Ok(BeliefState(next))
    }

    /// Distribution of the next symbol given the current belief.
    pub fn predictive(&self, v: &BeliefState) -> Result<SymbolDistribution, HmmError> {
        self.check_belief(v)?;
        let mut out = vec![0.0; self.q()];
        let mut scratch = vec![0.0; self.states];
        self.predictive_into(&v.0, &mut out, &mut scratch);
        Ok(SymbolDistribution(out))
    }

    /// Distribution of `Y_n` given the first `n - 1` observations, filtering
    /// from `π` over the whole prefix.
    pub fn forward_infer(
        &self,
        n: usize,
        prefix: &[FieldElement],
    ) -> Result<SymbolDistribution, HmmError> {
        if n == 0 || prefix.len() != n - 1 {
            return Err(HmmError::Dimension {
                what: "forward_infer prefix",
                expected: n.saturating_sub(1),
                actual: prefix.len(),
            });
        }
        let mut out = vec![0.0; self.q()];
        self.forward_infer_into(prefix, &mut out)?;
        Ok(SymbolDistribution(out))
    }

    /// Allocation-light form of [`MarkovSource::forward_infer`].
    pub(crate) fn forward_infer_into(
        &self,
        prefix: &[FieldElement],
        out: &mut [f64],
    ) -> Result<(), HmmError> {
        let mut belief = self.stationary.clone();
        let mut scratch = vec![0.0; self.states];
        for &y in prefix {
            self.check_symbol(y)?;
            self.update_in_place(&mut belief, y, &mut scratch)?;
        }
        self.predictive_into(&belief, out, &mut scratch);
        Ok(())
    }

    fn samplers(
        &self,
    ) -> (
        WeightedIndex<f64>,
        Vec<WeightedIndex<f64>>,
        Vec<WeightedIndex<f64>>,
    ) {
        let s = self.states;
        let init = WeightedIndex::new(&self.stationary).expect("validated distribution");
        let columns = (0..s)
            .map(|j| {
                WeightedIndex::new((0..s).map(|i| self.trans[i * s + j]))
                    .expect("validated distribution")
            })
            .collect();
        let emitters = self
            .emit
            .chunks_exact(self.q())
            .map(|row| WeightedIndex::new(row).expect("validated distribution"))
            .collect();
        (init, columns, emitters)
    }

    /// Draws `n` symbols together with the hidden state path that produced
    /// them. Deterministic for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> (Vec<FieldElement>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (init, columns, emitters) = self.samplers();
        let mut symbols = Vec::with_capacity(n);
        let mut path = Vec::with_capacity(n);
        if n == 0 {
            return (symbols, path);
        }
        let mut state = init.sample(&mut rng);
        for t in 0..n {
            if t > 0 {
                state = columns[state].sample(&mut rng);
            }
            path.push(state);
            symbols.push(emitters[state].sample(&mut rng) as u8);
        }
        (symbols, path)
    }

    /// Empirical `-(1/n) Σ log_q P(z_t | z_<t)` of one sequence, in symbols
    /// of `F_q` per source symbol.
    pub fn log_loss(&self, seq: &[FieldElement]) -> Result<f64, HmmError> {
        if seq.is_empty() {
            return Ok(0.0);
        }
        let ln_q = (self.q() as f64).ln();
        let mut belief = self.stationary.clone();
        let mut scratch = vec![0.0; self.states];
        let mut pred = vec![0.0; self.q()];
        let mut total = 0.0;
        for &y in seq {
            self.check_symbol(y)?;
            self.predictive_into(&belief, &mut pred, &mut scratch);
            let p = pred[y as usize];
            if !(p > 0.0) {
                return Err(HmmError::ImpossibleObservation { symbol: y });
            }
            total -= p.ln() / ln_q;
            self.update_in_place(&mut belief, y, &mut scratch)?;
        }
        Ok(total / seq.len() as f64)
    }

    /// Monte Carlo estimate of the entropy rate in `q`-ary units, averaged
    /// over `trials` sequences of length `n` (trial `i` uses seed `seed + i`).
    pub fn entropy_rate_estimate(&self, n: usize, trials: usize, seed: u64) -> f64 {
        let trials = trials.max(1);
        let total: f64 = (0..trials as u64)
            .map(|i| {
                let (seq, _) = self.sample(n.max(1), seed.wrapping_add(i));
                self.log_loss(&seq)
                    .expect("sampled sequences have positive likelihood")
            })
            .sum();
        (total / trials as f64).clamp(0.0, 1.0)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HmmError> {
        let spec: SourceSpec = toml::from_str(text).map_err(|e| HmmError::Parse(e.to_string()))?;
        if spec.states != spec.pi.len() {
            return Err(HmmError::Dimension {
                what: "pi",
                expected: spec.states,
                actual: spec.pi.len(),
            });
        }
        Self::new(spec.q, spec.pi, spec.transition, spec.outputs)
    }

    pub fn to_toml_string(&self) -> String {
        let s = self.states;
        let spec = SourceSpec {
            q: self.field.modulus() as u32,
            states: s,
            pi: self.stationary.clone(),
            transition: self.trans.chunks_exact(s).map(<[f64]>::to_vec).collect(),
            outputs: self
                .emit
                .chunks_exact(self.q())
                .map(<[f64]>::to_vec)
                .collect(),
        };
        toml::to_string(&spec).expect("source spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HmmError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HmmError> {
        fs::write(path, self.to_toml_string())?;
        Ok(())
    }
}

/// Stationary distribution of a column-stochastic matrix by power iteration
/// on the lazy chain `(I + Π) / 2`, which has the same fixed point and is
/// aperiodic.
pub fn stationary_of(transition: &[Vec<f64>]) -> Vec<f64> {
    let s = transition.len();
    if s == 0 {
        return Vec::new();
    }
    let mut v = vec![1.0 / s as f64; s];
    let mut next = vec![0.0; s];
    for _ in 0..1_000_000 {
        for (i, n) in next.iter_mut().enumerate() {
            let pv: f64 = transition[i].iter().zip(&v).map(|(a, b)| a * b).sum();
            *n = 0.5 * (v[i] + pv);
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if delta < 1e-16 {
            break;
        }
    }
    v
}

/// Ready-made sources.
pub mod presets {
    use rand::Rng;

    use super::*;

    fn normalized(mut v: Vec<f64>) -> Vec<f64> {
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        v
    }

    /// Two states that each stay put with probability `stay`; state `s`
    /// emits symbol `s` with probability `1 - flip` and spreads `flip`
    /// evenly over the other symbols.
    pub fn two_state_sticky(q: u32, stay: f64, flip: f64) -> Result<MarkovSource, HmmError> {
        let qs = q as usize;
        let emit = |s: usize| -> Vec<f64> {
            (0..qs)
                .map(|y| {
                    if y == s % qs {
                        1.0 - flip
                    } else {
                        flip / (qs - 1) as f64
                    }
                })
                .collect()
        };
        MarkovSource::new(
            q,
            vec![0.5, 0.5],
            vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]],
            vec![emit(0), emit(1)],
        )
    }

    /// Every state emits uniformly; the output is i.i.d. uniform.
    pub fn iid_uniform(q: u32, states: usize) -> Result<MarkovSource, HmmError> {
        let s = states.max(1);
        MarkovSource::new(
            q,
            vec![1.0 / s as f64; s],
            vec![vec![1.0 / s as f64; s]; s],
            vec![vec![1.0 / q as f64; q as usize]; s],
        )
    }

    /// Random transitions, but every state emits `0`: zero entropy.
    pub fn deterministic(q: u32, states: usize, seed: u64) -> Result<MarkovSource, HmmError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = states.max(1);
        let transition = random_columns(&mut rng, s);
        let mut emit = vec![0.0; q as usize];
        emit[0] = 1.0;
        MarkovSource::with_computed_stationary(q, transition, vec![emit; s])
    }

    /// Uniformly random transition columns and emission distributions.
    pub fn random_stochastic(q: u32, states: usize, seed: u64) -> Result<MarkovSource, HmmError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = states.max(1);
        let transition = random_columns(&mut rng, s);
        let outputs = (0..s)
            .map(|_| normalized((0..q).map(|_| rng.gen_range(0.05..1.0)).collect()))
            .collect();
        MarkovSource::with_computed_stationary(q, transition, outputs)
    }

    /// Random source whose states persist with probability about `stay` and
    /// whose emissions each favour one symbol.
    pub fn random_sticky(
        q: u32,
        states: usize,
        stay: f64,
        seed: u64,
    ) -> Result<MarkovSource, HmmError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = states.max(1);
        let transition = if s == 1 {
            vec![vec![1.0]]
        } else {
            let mut cols: Vec<Vec<f64>> = (0..s)
                .map(|j| {
                    let off = normalized((0..s - 1).map(|_| rng.gen_range(0.1..1.0)).collect());
                    let mut col = Vec::with_capacity(s);
                    let mut it = off.into_iter();
                    for i in 0..s {
                        col.push(if i == j {
                            stay
                        } else {
                            (1.0 - stay) * it.next().unwrap()
                        });
                    }
                    normalized(col)
                })
                .collect();
            transpose(&mut cols);
            cols
        };
        let outputs = (0..s)
            .map(|_| {
                let favourite = rng.gen_range(0..q as usize);
                let strength = rng.gen_range(0.8..0.97);
                normalized(
                    (0..q as usize)
                        .map(|y| {
                            if y == favourite {
                                strength
                            } else {
                                (1.0 - strength) * rng.gen_range(0.2..1.0)
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        MarkovSource::with_computed_stationary(q, transition, outputs)
    }

    // Returns rows of a column-stochastic matrix.
    fn random_columns(rng: &mut ChaCha8Rng, s: usize) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = (0..s)
            .map(|_| normalized((0..s).map(|_| rng.gen_range(0.05..1.0)).collect()))
            .collect();
        transpose(&mut cols);
        cols
    }

    fn transpose(m: &mut [Vec<f64>]) {
        let n = m.len();
        for j in 1..n {
            let (upper, lower) = m.split_at_mut(j);
            for (i, row) in upper.iter_mut().enumerate() {
                std::mem::swap(&mut row[j], &mut lower[0][i]);
            }
        }
    }
}
