//! The compression pipeline: frozen-set construction, linear compression and
//! the two decompressors.
//!
//! A length-`n = m²` sequence is laid out as an `m × m` [`SourceMatrix`]
//! whose column `i` holds the contiguous run `z[i·m .. (i+1)·m]`. Row `j`
//! (the `j`-th sample of every block) is transformed by `M^{⊗t}` and only the
//! positions in `S_j` are kept. Rows `j ≥ ⌊(1-ε)m⌋` are stored whole.
//!
//! Decompression walks the rows in order. For a decoded row every column
//! contributes the predictive distribution of its next symbol given the
//! column's already recovered prefix; the SC decoder fills in the dropped
//! positions. [`baseline_decompress`] recomputes each predictive from
//! scratch with [`MarkovSource::forward_infer`]. [`fast_decompress`] keeps
//! one belief state per column and advances it by a single
//! [`MarkovSource::belief_update`] per row. Both run the exact same floating
//! point operations, so their outputs agree bit for bit.
//!
//! # File formats
//!
//! Aux file (all integers little-endian):
//!
//! ```text
//! "PHMM" | version u8 = 1 | q u8 | k u8 | t u8 | ε.num u32 | ε.den u32
//!        | kernel k² bytes, row-major
//!        | m bitmaps, one per row j, each ⌈m/8⌉ bytes; position p of row j
//!          is bit (p mod 8) (LSB first) of byte p / 8
//!        | estimated_rate f64
//! ```
//!
//! Compressed file:
//!
//! ```text
//! "PHMC" | version u8 = 1 | digest u64 | payload, one byte per symbol
//! ```
//!
//! `digest` is the 64-bit FNV-1a hash of the complete aux file bytes. The
//! payload holds `U^j_p` for `j = 0..m` and, within a row, `p ∈ S_j` in
//! ascending order.

use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use rayon::prelude::*;
use thiserror::Error;

use crate::decoder::{DecoderError, PartialVector, PriorProfile, ScDecoder};
use crate::field::{FieldElement, FieldError, KernelMatrix, PrimeField};
use crate::hmm::{HmmError, MarkovSource};
use crate::transform::{TransformError, TransformPlan};

pub const AUX_MAGIC: &[u8; 4] = b"PHMM";
pub const STREAM_MAGIC: &[u8; 4] = b"PHMC";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("sequence length {actual} is not m² = {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("payload holds {actual} symbols, aux info expects {expected}")]
    StreamCorrupt { expected: usize, actual: usize },
    #[error("stream was built for aux digest {stream:016x}, got {aux:016x}")]
    DigestMismatch { stream: u64, aux: u64 },
    #[error("column {column}: symbol {symbol} is impossible under the source")]
    ImpossibleObservation { column: usize, symbol: FieldElement },
    #[error("symbol {symbol} is outside F_{q}")]
    SymbolOutOfRange { symbol: FieldElement, q: u8 },
    #[error("source alphabet F_{source_q} does not match aux alphabet F_{aux_q}")]
    FieldMismatch { source_q: u8, aux_q: u8 },
    #[error("epsilon must be a fraction strictly between 0 and 1, got {0}/{1}")]
    InvalidEpsilon(u32, u32),
    #[error("row {0} is past the decoded boundary but does not keep every position")]
    IncompleteStoredRow(usize),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Hmm(#[from] HmmError),
}

/// The rate slack `ε`, kept as an exact fraction so that every party computes
/// the same decoded-row boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Epsilon {
    num: u32,
    den: u32,
}

impl Epsilon {
    pub fn new(num: u32, den: u32) -> Result<Self, CodecError> {
        if num == 0 || den == 0 || num >= den {
            return Err(CodecError::InvalidEpsilon(num, den));
        }
        Ok(Self { num, den })
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `⌊(1 - ε) m⌋`: rows `0..` this bound are decoded, the rest stored.
    pub fn decoded_rows(self, m: usize) -> usize {
        ((self.den - self.num) as u64 * m as u64 / self.den as u64) as usize
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for Epsilon {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::Format(format!("epsilon must look like NUM/DEN, got {s:?}"));
        let (num, den) = s.split_once('/').ok_or_else(bad)?;
        let num = num.trim().parse().map_err(|_| bad())?;
        let den = den.trim().parse().map_err(|_| bad())?;
        Self::new(num, den)
    }
}

/// `m × m` symbols laid out column-major: column `i` is the contiguous run
/// of source samples `i·m .. (i+1)·m`, row `j` is `Z^j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceMatrix {
    m: usize,
    data: Vec<FieldElement>,
}

impl SourceMatrix {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0; m * m],
        }
    }

    /// Arranges a length-`m²` sequence; the inverse of [`SourceMatrix::flatten`].
    pub fn reshape(seq: &[FieldElement], m: usize) -> Result<Self, CodecError> {
        if seq.len() != m * m {
            return Err(CodecError::LengthMismatch {
                expected: m * m,
                actual: seq.len(),
            });
        }
        Ok(Self {
            m,
            data: seq.to_vec(),
        })
    }

    pub fn flatten(&self) -> Vec<FieldElement> {
        self.data.clone()
    }

    pub fn as_slice(&self) -> &[FieldElement] {
        &self.data
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn get(&self, row: usize, column: usize) -> FieldElement {
        self.data[column * self.m + row]
    }

    pub fn set(&mut self, row: usize, column: usize, value: FieldElement) {
        self.data[column * self.m + row] = value;
    }

    pub fn column(&self, i: usize) -> &[FieldElement] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn row(&self, j: usize) -> Vec<FieldElement> {
        (0..self.m).map(|i| self.get(j, i)).collect()
    }

    fn set_row(&mut self, j: usize, values: &[FieldElement]) {
        for (i, &v) in values.iter().enumerate() {
            self.set(j, i, v);
        }
    }
}

/// Everything the compressor and decompressors must agree on.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxInfo {
    plan: TransformPlan,
    epsilon: Epsilon,
    // row_sets[j][p]: whether U^j_p is stored
    row_sets: Vec<Vec<bool>>,
    estimated_rate: f64,
}

impl AuxInfo {
    pub fn new(
        plan: TransformPlan,
        epsilon: Epsilon,
        row_sets: Vec<Vec<bool>>,
        estimated_rate: f64,
    ) -> Result<Self, CodecError> {
        let m = plan.len();
        if row_sets.len() != m {
            return Err(CodecError::DimensionMismatch {
                what: "row sets",
                expected: m,
                actual: row_sets.len(),
            });
        }
        if let Some(bad) = row_sets.iter().find(|r| r.len() != m) {
            return Err(CodecError::DimensionMismatch {
                what: "row set",
                expected: m,
                actual: bad.len(),
            });
        }
        let decoded = epsilon.decoded_rows(m);
        if let Some(j) = (decoded..m).find(|&j| !row_sets[j].iter().all(|&b| b)) {
            return Err(CodecError::IncompleteStoredRow(j));
        }
        Ok(Self {
            plan,
            epsilon,
            row_sets,
            estimated_rate,
        })
    }

    /// Aux info that stores every decoded row according to `keep(j, p)`.
    pub fn from_fn(
        plan: TransformPlan,
        epsilon: Epsilon,
        estimated_rate: f64,
        mut keep: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, CodecError> {
        let m = plan.len();
        let decoded = epsilon.decoded_rows(m);
        let row_sets = (0..m)
            .map(|j| (0..m).map(|p| j >= decoded || keep(j, p)).collect())
            .collect();
        Self::new(plan, epsilon, row_sets, estimated_rate)
    }

    pub fn plan(&self) -> &TransformPlan {
        &self.plan
    }

    pub fn field(&self) -> &PrimeField {
        self.plan.kernel().field()
    }

    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    /// `m`.
    pub fn side(&self) -> usize {
        self.plan.len()
    }

    /// `n = m²`.
    pub fn block_len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn decoded_rows(&self) -> usize {
        self.epsilon.decoded_rows(self.side())
    }

    pub fn estimated_rate(&self) -> f64 {
        self.estimated_rate
    }

    pub fn keeps(&self, row: usize, position: usize) -> bool {
        self.row_sets[row][position]
    }

    /// `S_j`, ascending.
    pub fn row_set(&self, j: usize) -> Vec<usize> {
        (0..self.side()).filter(|&p| self.row_sets[j][p]).collect()
    }

    /// `Σ_j |S_j|`, the exact compressed length in symbols.
    pub fn compressed_len(&self) -> usize {
        self.row_sets
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .sum()
    }

    /// Stored symbols belonging to rows below the decoded boundary.
    pub fn decoded_row_symbols(&self) -> usize {
        self.row_sets[..self.decoded_rows()]
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let kernel = self.plan.kernel();
        let m = self.side();
        let mut out = Vec::new();
        out.extend_from_slice(AUX_MAGIC);
        out.push(FORMAT_VERSION);
        out.push(kernel.field().modulus());
        out.push(kernel.side() as u8);
        out.push(self.plan.depth() as u8);
        out.extend_from_slice(&self.epsilon.num.to_le_bytes());
        out.extend_from_slice(&self.epsilon.den.to_le_bytes());
        out.extend_from_slice(kernel.entries());
        let row_bytes = m.div_ceil(8);
        for row in &self.row_sets {
            let mut bits = vec![0u8; row_bytes];
            for (p, _) in row.iter().enumerate().filter(|(_, &b)| b) {
                bits[p / 8] |= 1 << (p % 8);
            }
            out.extend_from_slice(&bits);
        }
        out.extend_from_slice(&self.estimated_rate.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != AUX_MAGIC {
            return Err(CodecError::Format("bad aux magic".into()));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(CodecError::Format(format!(
                "unsupported aux version {version}"
            )));
        }
        let q = r.u8()?;
        let k = r.u8()? as usize;
        let t = r.u8()? as u32;
        let num = r.u32()?;
        let den = r.u32()?;
        let field = PrimeField::new(q as u32)?;
        let kernel = KernelMatrix::from_entries(field, k, r.take(k * k)?.to_vec())?;
        let plan = TransformPlan::new(kernel, t)?;
        let m = plan.len();
        let row_bytes = m.div_ceil(8);
        let row_sets = (0..m)
            .map(|_| {
                let bits = r.take(row_bytes)?;
                Ok((0..m).map(|p| bits[p / 8] >> (p % 8) & 1 == 1).collect())
            })
            .collect::<Result<Vec<Vec<bool>>, CodecError>>()?;
        let rate = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        r.finish()?;
        Self::new(plan, Epsilon::new(num, den)?, row_sets, rate)
    }

    /// FNV-1a 64 of [`AuxInfo::to_bytes`].
    pub fn digest(&self) -> u64 {
        fnv1a(&self.to_bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| CodecError::Format("truncated file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(self) -> Result<(), CodecError> {
        if self.pos != self.bytes.len() {
            return Err(CodecError::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Retained transformed symbols, bound to one aux info by its digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedStream {
    pub aux_digest: u64,
    pub payload: Vec<FieldElement>,
}

impl CompressedStream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.payload.len());
        out.extend_from_slice(STREAM_MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&self.aux_digest.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != STREAM_MAGIC {
            return Err(CodecError::Format("bad stream magic".into()));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(CodecError::Format(format!(
                "unsupported stream version {version}"
            )));
        }
        let aux_digest = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
        Ok(Self {
            aux_digest,
            payload: bytes[r.pos..].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }
}

/// How the frozen sets are chosen from the reliability estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrozenRule {
    /// Leave the most reliable decoded positions unstored for as long as
    /// their summed estimated error stays within this budget; store the
    /// rest. The budget bounds the estimated per-block failure probability.
    ///
    /// Positions are ranked on the even-indexed trials and the budget is
    /// charged with the odd-indexed ones. Charging the same estimates used
    /// for ranking badly undercounts: the heavy-tailed estimates of the
    /// chosen positions are biased low.
    ErrorBudget(f64),
    /// Store every decoded position whose estimated error exceeds this.
    Threshold(f64),
}

/// Knobs of the Monte Carlo frozen-set construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    /// Number of sampled length-`n` sequences.
    pub trials: usize,
    pub rule: FrozenRule,
    pub seed: u64,
}

impl PreprocessConfig {
    /// `trials = max(200, 4m)` and an error budget of `ε / 8`.
    pub fn defaults(m: usize, epsilon: Epsilon, seed: u64) -> Self {
        Self {
            trials: (4 * m).max(200),
            rule: FrozenRule::ErrorBudget(epsilon.as_f64() / 8.0),
            seed,
        }
    }
}

// Trials are summed in this many fixed chunks so the result does not depend
// on how rayon schedules them.
const PREPROCESS_CHUNKS: usize = 32;

/// Monte Carlo reliability estimates for every decoded position.
#[derive(Debug, Clone, PartialEq)]
pub struct Reliability {
    m: usize,
    decoded: usize,
    // errors[j * m + p]: mean probability that the argmax decision for U^j_p is wrong
    errors: Vec<f64>,
    // the same mean over even-indexed and over odd-indexed trials
    halves: [Vec<f64>; 2],
    rate: f64,
}

impl Reliability {
    /// Mean argmax error of `U^j_p`, for `j < decoded`.
    pub fn error(&self, row: usize, position: usize) -> f64 {
        self.errors[row * self.m + position]
    }

    /// Mean argmax error over the even-indexed (`half = 0`) or odd-indexed
    /// (`half = 1`) trials only.
    pub fn half_error(&self, half: usize, row: usize, position: usize) -> f64 {
        self.halves[half][row * self.m + position]
    }

    pub fn decoded_rows(&self) -> usize {
        self.decoded
    }

    /// Mean `q`-ary log-loss of the column predictors over the whole matrix.
    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Samples `config.trials` sequences and scans every decoded row
/// genie-aided, with priors taken from the true column prefixes. Position
/// `p` of row `j` accumulates `1 - max_u P(U_p = u | true prefix)`, the
/// probability that the argmax decision is wrong.
pub fn estimate_reliability(
    source: &MarkovSource,
    plan: &TransformPlan,
    epsilon: Epsilon,
    config: &PreprocessConfig,
) -> Result<Reliability, CodecError> {
    check_fields(source, plan.kernel().field())?;
    let m = plan.len();
    let decoded = epsilon.decoded_rows(m);
    let trials = config.trials.max(1);
    let chunk = trials.div_ceil(PREPROCESS_CHUNKS);

    let partials: Vec<([Vec<f64>; 2], f64)> = (0..trials)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut errors = [vec![0.0; decoded * m], vec![0.0; decoded * m]];
            let mut loss = 0.0;
            let mut decoder = ScDecoder::new(plan.clone());
            for trial in start..(start + chunk).min(trials) {
                let seed = config.seed.wrapping_add(trial as u64);
                loss += genie_pass(source, &mut decoder, decoded, seed, &mut errors[trial % 2]);
            }
            (errors, loss)
        })
        .collect();

    let mut halves = [vec![0.0; decoded * m], vec![0.0; decoded * m]];
    let mut loss = 0.0;
    for (e, l) in partials {
        for (acc, part) in halves.iter_mut().zip(e) {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        loss += l;
    }
    let errors = halves[0]
        .iter()
        .zip(&halves[1])
        .map(|(a, b)| (a + b) / trials as f64)
        .collect();
    let counts = [trials.div_ceil(2), trials / 2];
    for (half, count) in halves.iter_mut().zip(counts) {
        let scale = 1.0 / count.max(1) as f64;
        half.iter_mut().for_each(|e| *e *= scale);
    }
    if trials == 1 {
        halves[1] = halves[0].clone();
    }
    Ok(Reliability {
        m,
        decoded,
        errors,
        halves,
        rate: loss / (trials * m * m) as f64,
    })
}

/// Builds the aux info: reliability estimation followed by frozen-set
/// selection under `config.rule`.
pub fn preprocess(
    source: &MarkovSource,
    plan: &TransformPlan,
    epsilon: Epsilon,
    config: &PreprocessConfig,
) -> Result<AuxInfo, CodecError> {
    let rel = estimate_reliability(source, plan, epsilon, config)?;
    select_frozen(plan, epsilon, &rel, config.rule)
}

/// Turns reliability estimates into frozen sets.
pub fn select_frozen(
    plan: &TransformPlan,
    epsilon: Epsilon,
    rel: &Reliability,
    rule: FrozenRule,
) -> Result<AuxInfo, CodecError> {
    let m = plan.len();
    if rel.m != m || rel.decoded != epsilon.decoded_rows(m) {
        return Err(CodecError::DimensionMismatch {
            what: "reliability profile",
            expected: m * epsilon.decoded_rows(m),
            actual: rel.errors.len(),
        });
    }
    let keep = match rule {
        FrozenRule::Threshold(threshold) => rel.errors.iter().map(|&e| e > threshold).collect(),
        FrozenRule::ErrorBudget(budget) => {
            let [rank, check] = &rel.halves;
            let mut order: Vec<usize> = (0..rank.len()).collect();
            // stable sort: equal errors keep row-major order
            order.sort_by(|&a, &b| rank[a].total_cmp(&rank[b]));
            let mut keep = vec![true; rank.len()];
            let mut spent = 0.0;
            for idx in order {
                spent += check[idx];
                if spent > budget {
                    break;
                }
                keep[idx] = false;
            }
            keep
        }
    };
    AuxInfo::from_fn(plan.clone(), epsilon, rel.rate, |j, p| keep[j * m + p])
}

/// One preprocessing sample; adds per-position argmax error into `errors`
/// and returns the total log-loss (base `q`) of the sample.
fn genie_pass(
    source: &MarkovSource,
    decoder: &mut ScDecoder,
    decoded: usize,
    seed: u64,
    errors: &mut [f64],
) -> f64 {
    let m = decoder.plan().len();
    let q = source.q();
    let ell = source.states();
    let ln_q = (q as f64).ln();
    let (seq, _) = source.sample(m * m, seed);
    let z = SourceMatrix { m, data: seq };

    let mut beliefs: Vec<f64> = source.stationary().repeat(m);
    let mut scratch = vec![0.0; ell];
    let mut priors = vec![0.0; m * q];
    let mut loss = 0.0;
    for j in 0..m {
        let row = z.row(j);
        for (i, (belief, prior)) in beliefs
            .chunks_exact(ell)
            .zip(priors.chunks_exact_mut(q))
            .enumerate()
        {
            source.predictive_into(belief, prior, &mut scratch);
            loss -= prior[row[i] as usize].ln() / ln_q;
        }
        if j < decoded {
            let profile = PriorProfile::from_flat(q, std::mem::take(&mut priors));
            let errs = &mut errors[j * m..(j + 1) * m];
            decoder
                .scan_with(&profile, &row, |p, cond, _| {
                    errs[p] += 1.0 - cond.iter().copied().fold(0.0, f64::max);
                })
                .expect("plan matches sample dimensions");
            priors = profile.flat().to_vec();
        }
        for (belief, &y) in beliefs.chunks_exact_mut(ell).zip(&row) {
            source
                .update_in_place(belief, y, &mut scratch)
                .expect("sampled symbols have positive likelihood");
        }
    }
    loss
}

fn check_fields(source: &MarkovSource, field: &PrimeField) -> Result<(), CodecError> {
    if source.field().modulus() != field.modulus() {
        return Err(CodecError::FieldMismatch {
            source_q: source.field().modulus(),
            aux_q: field.modulus(),
        });
    }
    Ok(())
}

/// `U^j = M^{⊗t} Z^j` restricted to `S_j`, rows in order.
pub fn compress(aux: &AuxInfo, z: &SourceMatrix) -> Result<CompressedStream, CodecError> {
    let m = aux.side();
    if z.side() != m {
        return Err(CodecError::DimensionMismatch {
            what: "source matrix side",
            expected: m,
            actual: z.side(),
        });
    }
    let q = aux.field().modulus();
    if let Some(&symbol) = z.as_slice().iter().find(|&&s| s >= q) {
        return Err(CodecError::SymbolOutOfRange { symbol, q });
    }
    let mut payload = Vec::with_capacity(aux.compressed_len());
    let mut row = vec![0; m];
    for j in 0..m {
        for (i, r) in row.iter_mut().enumerate() {
            *r = z.get(j, i);
        }
        aux.plan().apply_in_place(&mut row, false);
        payload.extend(
            row.iter()
                .enumerate()
                .filter(|&(p, _)| aux.keeps(j, p))
                .map(|(_, &u)| u),
        );
    }
    Ok(CompressedStream {
        aux_digest: aux.digest(),
        payload,
    })
}

/// Checks the stream against the aux info and splits it into per-row
/// partial vectors.
fn split_rows(
    source: &MarkovSource,
    aux: &AuxInfo,
    stream: &CompressedStream,
) -> Result<Vec<PartialVector>, CodecError> {
    check_fields(source, aux.field())?;
    let digest = aux.digest();
    if stream.aux_digest != digest {
        return Err(CodecError::DigestMismatch {
            stream: stream.aux_digest,
            aux: digest,
        });
    }
    if stream.payload.len() != aux.compressed_len() {
        return Err(CodecError::StreamCorrupt {
            expected: aux.compressed_len(),
            actual: stream.payload.len(),
        });
    }
    let q = aux.field().modulus();
    if let Some(&symbol) = stream.payload.iter().find(|&&s| s >= q) {
        return Err(CodecError::SymbolOutOfRange { symbol, q });
    }
    let m = aux.side();
    let mut symbols = stream.payload.iter().copied();
    Ok((0..m)
        .map(|j| {
            PartialVector::new(
                (0..m)
                    .map(|p| {
                        if aux.keeps(j, p) {
                            symbols.next()
                        } else {
                            None
                        }
                    })
                    .collect(),
            )
        })
        .collect())
}

fn impossible(column: usize) -> impl Fn(HmmError) -> CodecError {
    move |e| match e {
        HmmError::ImpossibleObservation { symbol } => {
            CodecError::ImpossibleObservation { column, symbol }
        }
        other => CodecError::Hmm(other),
    }
}

/// Decompression that re-runs the forward algorithm over each column's full
/// recovered prefix for every decoded row: `Θ(n^{3/2} ℓ²)` filtering work.
pub fn baseline_decompress(
    source: &MarkovSource,
    aux: &AuxInfo,
    stream: &CompressedStream,
) -> Result<SourceMatrix, CodecError> {
    let rows = split_rows(source, aux, stream)?;
    let m = aux.side();
    let q = source.q();
    let decoded = aux.decoded_rows();
    let mut decoder = ScDecoder::new(aux.plan().clone());
    let mut out = SourceMatrix::zeros(m);
    let mut priors = vec![0.0; m * q];
    for (j, u) in rows.iter().enumerate() {
        let z_row = if j < decoded {
            for (i, prior) in priors.chunks_exact_mut(q).enumerate() {
                source
                    .forward_infer_into(&out.column(i)[..j], prior)
                    .map_err(impossible(i))?;
            }
            let profile = PriorProfile::from_flat(q, std::mem::take(&mut priors));
            let (z_row, _) = decoder.decode(&profile, u)?;
            priors = profile.flat().to_vec();
            z_row
        } else {
            aux.plan().polar_inverse_partial(u.entries())?
        };
        out.set_row(j, &z_row);
    }
    Ok(out)
}

/// Decompression with one cached belief state per column.
pub fn fast_decompress(
    source: &MarkovSource,
    aux: &AuxInfo,
    stream: &CompressedStream,
) -> Result<SourceMatrix, CodecError> {
    fast_decompress_observed(source, aux, stream, |_, _| {})
}

/// [`fast_decompress`], calling `observe(j, beliefs)` after row `j`'s belief
/// states have been advanced. `beliefs` is `m × ℓ`, column-major by source
/// column, and holds the filter state given rows `0..=j` of every column.
/// The last decoded row never needs advancing, so `observe` is called for
/// rows `0..decoded - 1` only.
pub fn fast_decompress_observed(
    source: &MarkovSource,
    aux: &AuxInfo,
    stream: &CompressedStream,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<SourceMatrix, CodecError> {
    let rows = split_rows(source, aux, stream)?;
    let m = aux.side();
    let q = source.q();
    let ell = source.states();
    let decoded = aux.decoded_rows();
    let mut decoder = ScDecoder::new(aux.plan().clone());
    let mut out = SourceMatrix::zeros(m);
    let mut beliefs: Vec<f64> = source.stationary().repeat(m);
    let mut scratch = vec![0.0; ell];
    let mut priors = vec![0.0; m * q];
    for (j, u) in rows.iter().enumerate() {
        if j < decoded {
            for (belief, prior) in beliefs.chunks_exact(ell).zip(priors.chunks_exact_mut(q)) {
                source.predictive_into(belief, prior, &mut scratch);
            }
            let profile = PriorProfile::from_flat(q, std::mem::take(&mut priors));
            let (z_row, _) = decoder.decode(&profile, u)?;
            priors = profile.flat().to_vec();
            out.set_row(j, &z_row);
            if j + 1 < decoded {
                for (i, (belief, &y)) in beliefs.chunks_exact_mut(ell).zip(&z_row).enumerate() {
                    source
                        .update_in_place(belief, y, &mut scratch)
                        .map_err(impossible(i))?;
                }
                observe(j, &beliefs);
            }
        } else {
            out.set_row(j, &aux.plan().polar_inverse_partial(u.entries())?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::presets;

    fn plan(q: u32, t: u32) -> TransformPlan {
        TransformPlan::new(KernelMatrix::arikan(q).unwrap(), t).unwrap()
    }

    #[test]
    fn epsilon_boundary() {
        let e = Epsilon::new(1, 10).unwrap();
        assert_eq!(e.decoded_rows(64), 57);
        assert_eq!(e.decoded_rows(128), 115);
        assert_eq!(e.decoded_rows(10), 9);
        assert!(Epsilon::new(0, 3).is_err());
        assert!(Epsilon::new(3, 3).is_err());
        assert_eq!("1/10".parse::<Epsilon>().unwrap(), e);
        assert!("0.1".parse::<Epsilon>().is_err());
    }

    #[test]
    fn reshape_layout() {
        let seq: Vec<u8> = (1..=9).collect();
        let z = SourceMatrix::reshape(&seq, 3).unwrap();
        assert_eq!(z.column(0), &[1, 2, 3]);
        assert_eq!(z.row(0), vec![1, 4, 7]);
        assert_eq!(z.flatten(), seq);
        assert!(matches!(
            SourceMatrix::reshape(&seq, 4),
            Err(CodecError::LengthMismatch {
                expected: 16,
                actual: 9
            })
        ));
    }

    #[test]
    fn stored_rows_must_be_complete() {
        let plan = plan(2, 2);
        let e = Epsilon::new(1, 2).unwrap();
        let mut sets = vec![vec![true; 4]; 4];
        sets[3][1] = false;
        assert!(matches!(
            AuxInfo::new(plan, e, sets, 0.0),
            Err(CodecError::IncompleteStoredRow(3))
        ));
    }

    #[test]
    fn aux_bytes_layout() {
        let plan = plan(3, 3);
        let e = Epsilon::new(1, 4).unwrap();
        let aux = AuxInfo::from_fn(plan, e, 0.25, |j, p| (j + p) % 3 == 0).unwrap();
        let bytes = aux.to_bytes();
        assert_eq!(&bytes[..5], b"PHMM\x01");
        assert_eq!(&bytes[5..8], &[3, 2, 3]);
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[1, 1, 0, 1]);
        // row 0 keeps p = 0, 3, 6
        assert_eq!(bytes[20], 0b0100_1001);
        assert_eq!(bytes.len(), 20 + 8 + 8);
        assert_eq!(AuxInfo::from_bytes(&bytes).unwrap(), aux);
        assert!(AuxInfo::from_bytes(&bytes[..30]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(AuxInfo::from_bytes(&extra).is_err());
    }

    #[test]
    fn stream_bytes_layout() {
        let s = CompressedStream {
            aux_digest: 0x0102030405060708,
            payload: vec![1, 0, 2],
        };
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..5], b"PHMC\x01");
        assert_eq!(&bytes[5..13], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(&bytes[13..], &[1, 0, 2]);
        assert_eq!(CompressedStream::from_bytes(&bytes).unwrap(), s);
        assert!(CompressedStream::from_bytes(b"PHMX\x01").is_err());
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn all_stored_rows_decompress_exactly() {
        let src = presets::random_sticky(3, 3, 0.9, 1).unwrap();
        let plan = plan(3, 3);
        let aux = AuxInfo::from_fn(plan, Epsilon::new(1, 2).unwrap(), 1.0, |_, _| true).unwrap();
        let (seq, _) = src.sample(64, 4);
        let z = SourceMatrix::reshape(&seq, 8).unwrap();
        let stream = compress(&aux, &z).unwrap();
        assert_eq!(stream.len(), 64);
        assert_eq!(baseline_decompress(&src, &aux, &stream).unwrap(), z);
        assert_eq!(fast_decompress(&src, &aux, &stream).unwrap(), z);
    }

    #[test]
    fn deterministic_source_needs_nothing() {
        let src = presets::deterministic(2, 3, 5).unwrap();
        let plan = plan(2, 3);
        let e = Epsilon::new(1, 8).unwrap();
        let aux = preprocess(&src, &plan, e, &PreprocessConfig::defaults(8, e, 0)).unwrap();
        assert_eq!(aux.decoded_row_symbols(), 0);
        assert_eq!(aux.compressed_len(), 8);
        let z = SourceMatrix::zeros(8);
        let stream = compress(&aux, &z).unwrap();
        assert_eq!(stream.payload, vec![0; 8]);
        assert_eq!(baseline_decompress(&src, &aux, &stream).unwrap(), z);
        assert_eq!(fast_decompress(&src, &aux, &stream).unwrap(), z);
    }

    #[test]
    fn uniform_source_is_incompressible() {
        let src = presets::iid_uniform(3, 2).unwrap();
        let plan = plan(3, 3);
        let e = Epsilon::new(1, 8).unwrap();
        let cfg = PreprocessConfig {
            trials: 50,
            ..PreprocessConfig::defaults(8, e, 1)
        };
        let aux = preprocess(&src, &plan, e, &cfg).unwrap();
        assert_eq!(aux.compressed_len(), 64);
        assert!((aux.estimated_rate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preprocess_is_deterministic() {
        let src = presets::two_state_sticky(2, 0.9, 0.1).unwrap();
        let plan = plan(2, 3);
        let e = Epsilon::new(1, 4).unwrap();
        let cfg = PreprocessConfig::defaults(8, e, 3);
        let a = preprocess(&src, &plan, e, &cfg).unwrap();
        let b = preprocess(&src, &plan, e, &cfg).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn stream_validation() {
        let src = presets::two_state_sticky(2, 0.9, 0.1).unwrap();
        let plan = plan(2, 2);
        let e = Epsilon::new(1, 4).unwrap();
        let aux = AuxInfo::from_fn(plan.clone(), e, 0.5, |_, p| p > 1).unwrap();
        let stream = compress(&aux, &SourceMatrix::zeros(4)).unwrap();

        let mut short = stream.clone();
        short.payload.pop();
        assert!(matches!(
            fast_decompress(&src, &aux, &short),
            Err(CodecError::StreamCorrupt { .. })
        ));
        let mut wrong = stream.clone();
        wrong.aux_digest ^= 1;
        assert!(matches!(
            baseline_decompress(&src, &aux, &wrong),
            Err(CodecError::DigestMismatch { .. })
        ));
        let other = presets::two_state_sticky(3, 0.9, 0.1).unwrap();
        assert!(matches!(
            fast_decompress(&other, &aux, &stream),
            Err(CodecError::FieldMismatch { .. })
        ));
        assert!(matches!(
            compress(&aux, &SourceMatrix::zeros(8)),
            Err(CodecError::DimensionMismatch { .. })
        ));
        let bad = SourceMatrix::reshape(&[2; 16], 4).unwrap();
        assert!(matches!(
            compress(&aux, &bad),
            Err(CodecError::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn impossible_observation_reported_identically() {
        // the only state emits 0, so a decoded 1 cannot be filtered
        let src = MarkovSource::new(2, vec![1.0], vec![vec![1.0]], vec![vec![1.0, 0.0]]).unwrap();
        let plan = plan(2, 2);
        let e = Epsilon::new(1, 4).unwrap();
        let aux = AuxInfo::from_fn(plan, e, 0.0, |j, p| j == 0 && p == 0).unwrap();
        let mut z = SourceMatrix::zeros(4);
        z.set(0, 0, 1);
        let stream = compress(&aux, &z).unwrap();
        let a = baseline_decompress(&src, &aux, &stream).unwrap_err();
        let b = fast_decompress(&src, &aux, &stream).unwrap_err();
        assert_eq!(a.to_string(), b.to_string());
        assert!(matches!(
            a,
            CodecError::ImpossibleObservation {
                column: 0,
                symbol: 1
            }
        ));
    }
}
