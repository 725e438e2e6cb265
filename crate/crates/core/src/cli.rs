//! Command-line front end and the verification / benchmark harnesses.
//!
//! Every command prints a single-line `key=value` summary on stdout (the
//! benchmark additionally prints its table). Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O or other runtime error |
//! | 2 | a round trip did not reproduce its input |
//! | 3 | malformed, inconsistent or mismatched input files |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{
    baseline_decompress, compress, fast_decompress, preprocess, AuxInfo, CodecError,
    CompressedStream, Epsilon, FrozenRule, PreprocessConfig, SourceMatrix,
};
use crate::field::{FieldError, KernelMatrix};
use crate::hmm::{presets, HmmError, MarkovSource};
use crate::transform::{TransformError, TransformPlan};

pub const EXIT_MISMATCH: u8 = 2;
pub const EXIT_FORMAT: u8 = 3;

// Seed offset for an aux built on the fly, so that its training sequences
// never coincide with the seed + index sequences being verified.
const AUX_SEED_OFFSET: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("kernel file: {0}")]
    Kernel(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Kernel(_) | CliError::Field(_) => EXIT_FORMAT,
            CliError::Codec(
                CodecError::LengthMismatch { .. }
                | CodecError::StreamCorrupt { .. }
                | CodecError::DigestMismatch { .. }
                | CodecError::SymbolOutOfRange { .. }
                | CodecError::FieldMismatch { .. }
                | CodecError::IncompleteStoredRow(_)
                | CodecError::Format(_)
                | CodecError::Field(_),
            ) => EXIT_FORMAT,
            CliError::Codec(_) => 1,
            CliError::Hmm(HmmError::Io(_)) => 1,
            CliError::Hmm(HmmError::ImpossibleObservation { .. }) => 1,
            CliError::Hmm(_) => EXIT_FORMAT,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hmm-polar",
    version,
    about = "Polar-code compression for hidden Markov sources"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Field size; defaults to 2 for gen-source and to the source's field elsewhere.
    #[arg(long, global = true)]
    pub q: Option<u32>,
    /// "arikan" or a file with one whitespace-separated kernel row per line.
    #[arg(long, global = true, default_value = "arikan")]
    pub kernel: String,
    /// Transform depth; m = k^t and n = m².
    #[arg(long, global = true, default_value_t = 7)]
    pub t: u32,
    #[arg(long, global = true, default_value = "1/10")]
    pub epsilon: Epsilon,
    /// Monte Carlo sequences for frozen-set construction [default: max(200, 4m)].
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Store every position whose estimated error exceeds this.
    #[arg(long, global = true, conflicts_with = "budget")]
    pub threshold: Option<f64>,
    /// Total estimated error allowed over unstored positions [default: ε/8].
    #[arg(long, global = true)]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    TwoStateSticky,
    IidUniform,
    Deterministic,
    RandomStochastic,
    RandomSticky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Baseline,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Baseline,
    Fast,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a source spec (TOML) for a preset.
    GenSource {
        #[arg(long, value_enum)]
        preset: Preset,
        /// Number of hidden states ℓ (ignored by two-state-sticky).
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long, default_value_t = 0.95)]
        stay: f64,
        #[arg(long, default_value_t = 0.05)]
        flip: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a sequence, one byte per symbol.
    Sample {
        #[arg(long)]
        source: PathBuf,
        /// Sequence length [default: m² for --t and --kernel].
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the frozen sets and write the aux file.
    Preprocess {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Compress {
        #[arg(long)]
        aux: PathBuf,
        /// Raw sequence, one byte per symbol, length m².
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Decompress {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        aux: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "fast")]
        mode: Mode,
    },
    /// Round-trip freshly sampled sequences and count failures.
    Verify {
        #[arg(long)]
        source: PathBuf,
        /// Aux file; built from the source when absent.
        #[arg(long)]
        aux: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: VerifyMode,
        /// Also print one line per trial.
        #[arg(long)]
        per_trial: bool,
    },
    /// Time both decompressors over a range of sizes.
    Bench {
        /// Source spec; a two-state sticky source over F_q when absent.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "5,6,7")]
        sizes: Vec<u32>,
        /// Timed runs per size; times are medians.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value = ",")]
        delimiter: String,
    },
}

/// Entry point of the binary.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Runs one parsed command; returns the exit code on success paths.
pub fn execute(cli: &Cli) -> Result<u8, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::GenSource {
            preset,
            states,
            stay,
            flip,
            out,
        } => {
            let q = g.q.unwrap_or(2);
            let source = build_preset(*preset, q, *states, *stay, *flip, g.seed)?;
            source.save(out)?;
            let h = source.entropy_rate_estimate(2048, 16, g.seed);
            println!(
                "gen-source preset={} q={} states={} entropy_rate={h:.4} out={}",
                preset_name(*preset),
                source.q(),
                source.states(),
                out.display()
            );
        }
        Command::Sample { source, n, out } => {
            let source = load_source(source, g.q)?;
            let n = match n {
                Some(n) => *n,
                None => plan_for(g, &source)?.len().pow(2),
            };
            let (seq, _) = source.sample(n, g.seed);
            write(out, &seq)?;
            println!("sample n={n} seed={} out={}", g.seed, out.display());
        }
        Command::Preprocess { source, out } => {
            let source = load_source(source, g.q)?;
            let plan = plan_for(g, &source)?;
            let start = Instant::now();
            let aux = preprocess(
                &source,
                &plan,
                g.epsilon,
                &preprocess_config(g, plan.len(), g.seed),
            )?;
            let secs = start.elapsed().as_secs_f64();
            write(out, &aux.to_bytes())?;
            let n = aux.block_len();
            println!(
                "preprocess m={} n={n} decoded_rows={} compressed_len={} rate={:.4} estimated_rate={:.4} seconds={secs:.3} out={}",
                aux.side(),
                aux.decoded_rows(),
                aux.compressed_len(),
                aux.compressed_len() as f64 / n as f64,
                aux.estimated_rate(),
                out.display()
            );
        }
        Command::Compress { aux, input, out } => {
            let aux = load_aux(aux)?;
            let seq = read(input)?;
            let z = SourceMatrix::reshape(&seq, aux.side())?;
            let start = Instant::now();
            let stream = compress(&aux, &z)?;
            let secs = start.elapsed().as_secs_f64();
            write(out, &stream.to_bytes())?;
            println!(
                "compress n={} compressed_len={} rate={:.4} seconds={secs:.6} digest={:016x} out={}",
                seq.len(),
                stream.len(),
                stream.len() as f64 / seq.len() as f64,
                stream.aux_digest,
                out.display()
            );
        }
        Command::Decompress {
            source,
            aux,
            input,
            out,
            mode,
        } => {
            let source = load_source(source, g.q)?;
            let aux = load_aux(aux)?;
            let stream = CompressedStream::from_bytes(&read(input)?)?;
            let start = Instant::now();
            let z = match mode {
                Mode::Baseline => baseline_decompress(&source, &aux, &stream)?,
                Mode::Fast => fast_decompress(&source, &aux, &stream)?,
            };
            let secs = start.elapsed().as_secs_f64();
            write(out, &z.flatten())?;
            println!(
                "decompress mode={} n={} seconds={secs:.6} out={}",
                mode_name(*mode),
                aux.block_len(),
                out.display()
            );
        }
        Command::Verify {
            source,
            aux,
            runs,
            mode,
            per_trial,
        } => {
            let source = load_source(source, g.q)?;
            let aux = match aux {
                Some(path) => load_aux(path)?,
                None => {
                    let plan = plan_for(g, &source)?;
                    let seed = g.seed.wrapping_add(AUX_SEED_OFFSET);
                    preprocess(
                        &source,
                        &plan,
                        g.epsilon,
                        &preprocess_config(g, plan.len(), seed),
                    )?
                }
            };
            let report = verify(&source, &aux, *runs, g.seed, *mode)?;
            if *per_trial {
                for line in report.trial_lines() {
                    println!("{line}");
                }
            }
            println!("{}", report.summary());
            if !report.all_exact() {
                return Ok(EXIT_MISMATCH);
            }
        }
        Command::Bench {
            source,
            sizes,
            runs,
            delimiter,
        } => {
            let source = match source {
                Some(path) => load_source(path, g.q)?,
                None => presets::two_state_sticky(g.q.unwrap_or(2), 0.95, 0.05)?,
            };
            let kernel = load_kernel(&g.kernel, source.q() as u32)?;
            let config = BenchConfig {
                sizes: sizes.clone(),
                runs: *runs,
                seed: g.seed,
                epsilon: g.epsilon,
                trials: g.trials,
                rule: rule_for(g),
            };
            let report = bench(&source, &kernel, &config)?;
            print!("{}", report.table(delimiter));
            for r in report.ratios() {
                println!(
                    "ratio n_from={} n_to={} baseline={:.3} fast={:.3}",
                    r.n_from, r.n_to, r.baseline, r.fast
                );
            }
            println!(
                "bench sizes={} runs={} identical={} round_trips={}/{}",
                report.rows.len(),
                runs,
                report.rows.iter().all(|r| r.identical),
                report.rows.iter().map(|r| r.round_trips).sum::<usize>(),
                report.rows.len() * runs
            );
        }
    }
    Ok(0)
}

pub fn build_preset(
    preset: Preset,
    q: u32,
    states: usize,
    stay: f64,
    flip: f64,
    seed: u64,
) -> Result<MarkovSource, HmmError> {
    match preset {
        Preset::TwoStateSticky => presets::two_state_sticky(q, stay, flip),
        Preset::IidUniform => presets::iid_uniform(q, states),
        Preset::Deterministic => presets::deterministic(q, states, seed),
        Preset::RandomStochastic => presets::random_stochastic(q, states, seed),
        Preset::RandomSticky => presets::random_sticky(q, states, stay, seed),
    }
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::TwoStateSticky => "two-state-sticky",
        Preset::IidUniform => "iid-uniform",
        Preset::Deterministic => "deterministic",
        Preset::RandomStochastic => "random-stochastic",
        Preset::RandomSticky => "random-sticky",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Baseline => "baseline",
        Mode::Fast => "fast",
    }
}

/// Parses a kernel file: one row per line, entries separated by whitespace
/// or commas, `#` starts a comment. Entries are reduced mod `q`.
pub fn parse_kernel(text: &str, q: u32) -> Result<KernelMatrix, CliError> {
    let rows = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<i64>()
                        .map_err(|_| CliError::Kernel(format!("bad entry {s:?}")))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KernelMatrix::new(q, &rows)?)
}

pub fn load_kernel(spec: &str, q: u32) -> Result<KernelMatrix, CliError> {
    if spec.eq_ignore_ascii_case("arikan") {
        return Ok(KernelMatrix::arikan(q)?);
    }
    let text = fs::read_to_string(spec).map_err(|source| CliError::Io {
        path: spec.into(),
        source,
    })?;
    parse_kernel(&text, q)
}

fn load_source(path: &Path, q: Option<u32>) -> Result<MarkovSource, CliError> {
    let source = MarkovSource::from_toml_str(&read_string(path)?)?;
    if let Some(q) = q {
        if q as usize != source.q() {
            return Err(CliError::Usage(format!(
                "--q {q} does not match the source alphabet F_{}",
                source.q()
            )));
        }
    }
    Ok(source)
}

fn load_aux(path: &Path) -> Result<AuxInfo, CliError> {
    Ok(AuxInfo::from_bytes(&read(path)?)?)
}

fn plan_for(g: &GlobalArgs, source: &MarkovSource) -> Result<TransformPlan, CliError> {
    let kernel = load_kernel(&g.kernel, source.q() as u32)?;
    Ok(TransformPlan::new(kernel, g.t)?)
}

fn rule_for(g: &GlobalArgs) -> Option<FrozenRule> {
    match (g.threshold, g.budget) {
        (Some(t), _) => Some(FrozenRule::Threshold(t)),
        (None, Some(b)) => Some(FrozenRule::ErrorBudget(b)),
        (None, None) => None,
    }
}

fn preprocess_config(g: &GlobalArgs, m: usize, seed: u64) -> PreprocessConfig {
    let mut config = PreprocessConfig::defaults(m, g.epsilon, seed);
    if let Some(trials) = g.trials {
        config.trials = trials;
    }
    if let Some(rule) = rule_for(g) {
        config.rule = rule;
    }
    config
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn read_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

/// Result of one decompression attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Exact,
    Mismatch,
    /// The decompressor returned an error; holds its message.
    Failed(String),
}

impl Outcome {
    fn of(
        result: Result<SourceMatrix, CodecError>,
        truth: &SourceMatrix,
    ) -> (Self, Option<SourceMatrix>) {
        match result {
            Ok(z) if &z == truth => (Outcome::Exact, Some(z)),
            Ok(z) => (Outcome::Mismatch, Some(z)),
            Err(e) => (Outcome::Failed(e.to_string()), None),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Outcome::Exact => "exact",
            Outcome::Mismatch => "mismatch",
            Outcome::Failed(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub seed: u64,
    pub baseline: Option<Outcome>,
    pub fast: Option<Outcome>,
    /// Both decompressors ran and produced the same matrix or the same error.
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub compressed_len: usize,
    pub n: usize,
    pub trials: Vec<TrialRecord>,
}

impl VerifyReport {
    fn count(&self, pick: impl Fn(&TrialRecord) -> Option<&Outcome>) -> usize {
        self.trials
            .iter()
            .filter(|t| pick(t) == Some(&Outcome::Exact))
            .count()
    }

    pub fn baseline_exact(&self) -> usize {
        self.count(|t| t.baseline.as_ref())
    }

    pub fn fast_exact(&self) -> usize {
        self.count(|t| t.fast.as_ref())
    }

    /// Trials where every decompressor that ran reproduced the input.
    pub fn exact(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| {
                [&t.baseline, &t.fast]
                    .iter()
                    .all(|o| o.as_ref().is_none_or(|o| *o == Outcome::Exact))
            })
            .count()
    }

    pub fn disagreements(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.agree == Some(false))
            .count()
    }

    pub fn all_exact(&self) -> bool {
        self.exact() == self.trials.len() && self.disagreements() == 0
    }

    pub fn summary(&self) -> String {
        let mode = match self.mode {
            VerifyMode::Baseline => "baseline",
            VerifyMode::Fast => "fast",
            VerifyMode::Both => "both",
        };
        let mut s = format!(
            "verify mode={mode} trials={} exact={} failures={} n={} compressed_len={}",
            self.trials.len(),
            self.exact(),
            self.trials.len() - self.exact(),
            self.n,
            self.compressed_len
        );
        if self.mode == VerifyMode::Both {
            let _ = write!(
                s,
                " baseline_exact={} fast_exact={} disagreements={}",
                self.baseline_exact(),
                self.fast_exact(),
                self.disagreements()
            );
        }
        s
    }

    pub fn trial_lines(&self) -> Vec<String> {
        self.trials
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut s = format!("trial index={i} seed={}", t.seed);
                if let Some(o) = &t.baseline {
                    let _ = write!(s, " baseline={}", o.label());
                }
                if let Some(o) = &t.fast {
                    let _ = write!(s, " fast={}", o.label());
                }
                if let Some(a) = t.agree {
                    let _ = write!(s, " agree={a}");
                }
                s
            })
            .collect()
    }
}

/// Samples `runs` sequences with seeds `seed + index`, compresses each and
/// decompresses in the requested mode(s). Trials run in parallel; the
/// report is in index order.
pub fn verify(
    source: &MarkovSource,
    aux: &AuxInfo,
    runs: usize,
    seed: u64,
    mode: VerifyMode,
) -> Result<VerifyReport, CliError> {
    if source.q() != aux.field().size() {
        return Err(CodecError::FieldMismatch {
            source_q: source.q() as u8,
            aux_q: aux.field().modulus(),
        }
        .into());
    }
    let n = aux.block_len();
    let trials = (0..runs as u64)
        .into_par_iter()
        .map(|i| -> Result<TrialRecord, CodecError> {
            let seed = seed.wrapping_add(i);
            let (seq, _) = source.sample(n, seed);
            let z = SourceMatrix::reshape(&seq, aux.side())?;
            let stream = compress(aux, &z)?;
            let run_baseline = mode != VerifyMode::Fast;
            let run_fast = mode != VerifyMode::Baseline;
            let (baseline, bz) = if run_baseline {
                let (o, z) = Outcome::of(baseline_decompress(source, aux, &stream), &z);
                (Some(o), z)
            } else {
                (None, None)
            };
            let (fast, fz) = if run_fast {
                let (o, z) = Outcome::of(fast_decompress(source, aux, &stream), &z);
                (Some(o), z)
            } else {
                (None, None)
            };
            let agree = (run_baseline && run_fast).then(|| baseline == fast && bz == fz);
            Ok(TrialRecord {
                seed,
                baseline,
                fast,
                agree,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyReport {
        mode,
        compressed_len: aux.compressed_len(),
        n,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Depths `t`, strictly increasing.
    pub sizes: Vec<u32>,
    pub runs: usize,
    pub seed: u64,
    pub epsilon: Epsilon,
    /// Preprocessing trials; the codec default when `None`.
    pub trials: Option<usize>,
    /// Frozen-set rule; the codec default when `None`.
    pub rule: Option<FrozenRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub t: u32,
    pub n: usize,
    /// Median decompression wall time, seconds.
    pub baseline_secs: f64,
    pub fast_secs: f64,
    pub compressed_len: usize,
    pub round_trips: usize,
    pub runs: usize,
    /// Both decompressors produced identical results on every run.
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRatio {
    pub n_from: usize,
    pub n_to: usize,
    pub baseline: f64,
    pub fast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Time ratios between consecutive sizes.
    pub fn ratios(&self) -> Vec<GrowthRatio> {
        self.rows
            .windows(2)
            .map(|w| GrowthRatio {
                n_from: w[0].n,
                n_to: w[1].n,
                baseline: w[1].baseline_secs / w[0].baseline_secs,
                fast: w[1].fast_secs / w[0].fast_secs,
            })
            .collect()
    }

    pub fn table(&self, delim: &str) -> String {
        let header = [
            "t",
            "n",
            "baseline_secs",
            "fast_secs",
            "compressed_len",
            "round_trips",
            "runs",
            "identical",
        ];
        let mut out = header.join(delim);
        out.push('\n');
        for r in &self.rows {
            let cells = [
                r.t.to_string(),
                r.n.to_string(),
                format!("{:.6}", r.baseline_secs),
                format!("{:.6}", r.fast_secs),
                r.compressed_len.to_string(),
                r.round_trips.to_string(),
                r.runs.to_string(),
                r.identical.to_string(),
            ];
            out.push_str(&cells.join(delim));
            out.push('\n');
        }
        out
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// For each depth: builds the aux once, then times both decompressors on
/// the same `runs` streams (seeds `seed + index`). Only decompression is
/// timed. Runs are sequential.
pub fn bench(
    source: &MarkovSource,
    kernel: &KernelMatrix,
    config: &BenchConfig,
) -> Result<BenchReport, CliError> {
    if config.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(
            "bench sizes must be strictly increasing".into(),
        ));
    }
    if config.runs == 0 {
        return Err(CliError::Usage("bench needs at least one run".into()));
    }
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &t in &config.sizes {
        let plan = TransformPlan::new(kernel.clone(), t)?;
        let m = plan.len();
        let mut pre = PreprocessConfig::defaults(
            m,
            config.epsilon,
            config.seed.wrapping_add(AUX_SEED_OFFSET),
        );
        if let Some(trials) = config.trials {
            pre.trials = trials;
        }
        if let Some(rule) = config.rule {
            pre.rule = rule;
        }
        let aux = preprocess(source, &plan, config.epsilon, &pre)?;
        let mut base_times = Vec::with_capacity(config.runs);
        let mut fast_times = Vec::with_capacity(config.runs);
        let mut round_trips = 0;
        let mut identical = true;
        for i in 0..config.runs as u64 {
            let (seq, _) = source.sample(m * m, config.seed.wrapping_add(i));
            let z = SourceMatrix::reshape(&seq, m)?;
            let stream = compress(&aux, &z)?;

            let start = Instant::now();
            let b = baseline_decompress(source, &aux, &stream);
            base_times.push(start.elapsed().as_secs_f64());

            let start = Instant::now();
            let f = fast_decompress(source, &aux, &stream);
            fast_times.push(start.elapsed().as_secs_f64());

            let (bo, bz) = Outcome::of(b, &z);
            let (fo, fz) = Outcome::of(f, &z);
            identical &= bo == fo && bz == fz;
            round_trips += usize::from(bo == Outcome::Exact && fo == Outcome::Exact);
        }
        rows.push(BenchRow {
            t,
            n: m * m,
            baseline_secs: median(base_times),
            fast_secs: median(fast_times),
            compressed_len: aux.compressed_len(),
            round_trips,
            runs: config.runs,
            identical,
        });
    }
    Ok(BenchReport { rows })
}
