//! Seeded Monte-Carlo estimation of received concentrations.
//!
//! A trial draws one diffusion coefficient (propagation noise) and one
//! Gaussian receiver noise sample. Every trial owns its own ChaCha stream,
//! keyed by `(master_seed, symbol)` and indexed by the trial number, so a
//! trial's numbers do not depend on which worker runs it. Trials are
//! reduced in fixed-size chunks and the chunks are merged in index order,
//! which makes the aggregate bit-identical for any thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::channel::{received_concentration, sample_diffusion, ChannelParams};
use crate::domain::ExperimentConfig;
use crate::psychophysics::{decode, OiskScheme};
use crate::Error;

/// Trials reduced together before merging.
pub const CHUNK_TRIALS: u64 = 4096;

/// How trials are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Chunks on the ambient rayon pool. Falls back to sequential when the
    /// crate is built without the `parallel` feature.
    #[default]
    Parallel,
}

/// Monte-Carlo estimate of the received concentration for one symbol.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolStats {
    pub symbol: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub trial_count: u64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub sampled_diffusion: f64,
    pub propagated: f64,
    pub awgn: f64,
    pub received: f64,
    pub decoded: Option<usize>,
}

/// Decisions for one transmitted symbol: how often each symbol was decoded,
/// plus erasures.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OutcomeCounts {
    pub decided: Vec<u64>,
    pub erasures: u64,
}

impl OutcomeCounts {
    fn new(symbols: usize) -> Self {
        Self {
            decided: vec![0; symbols],
            erasures: 0,
        }
    }

    fn record(&mut self, outcome: Option<usize>) {
        match outcome {
            Some(i) => self.decided[i] += 1,
            None => self.erasures += 1,
        }
    }

    fn merge(&mut self, other: &OutcomeCounts) {
        for (a, b) in self.decided.iter_mut().zip(&other.decided) {
            *a += b;
        }
        self.erasures += other.erasures;
    }

    pub fn total(&self) -> u64 {
        self.decided.iter().sum::<u64>() + self.erasures
    }

    /// Relative frequencies, erasure last.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.decided
            .iter()
            .chain(std::iter::once(&self.erasures))
            .map(|&c| c as f64 / n)
            .collect()
    }
}

/// Result of simulating one symbol.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolRun {
    pub stats: SymbolStats,
    pub counts: OutcomeCounts,
}

/// Running mean and sum of squared deviations (Welford), mergeable with
/// Chan's pairwise update.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    fn std_dev(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0).sqrt()
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream of one trial: key from `(master_seed, symbol)`, ChaCha
/// stream id = trial index.
pub fn trial_rng(master_seed: u64, symbol: usize, trial: u64) -> ChaCha8Rng {
    let key = splitmix64(master_seed ^ splitmix64(symbol as u64 ^ 0x6F69_736B));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(trial);
    rng
}

/// Fixed per-symbol inputs shared by all trials.
struct TrialContext<'a> {
    scheme: &'a OiskScheme,
    cfg: &'a ExperimentConfig,
    symbol: usize,
    base: ChannelParams,
}

impl<'a> TrialContext<'a> {
    fn new(scheme: &'a OiskScheme, symbol: usize, cfg: &'a ExperimentConfig) -> Result<Self, Error> {
        let sym = scheme.symbol(symbol).ok_or(Error::SymbolOutOfRange {
            symbol,
            alphabet: scheme.len(),
        })?;
        let base = ChannelParams {
            initial_concentration: sym.transmit_concentration,
            separation: cfg.link.tx_rx_separation,
            airflow_speed: cfg.link.airflow_speed,
            symbol_period: cfg.link.symbol_period,
            diffusion: cfg.odorant.diffusion_min,
        };
        Ok(Self {
            scheme,
            cfg,
            symbol,
            base,
        })
    }

    fn trial(&self, trial: u64) -> TrialRecord {
        let mut rng = trial_rng(self.cfg.master_seed, self.symbol, trial);
        let d = sample_diffusion(&self.cfg.odorant, self.cfg.link.temperature, &mut rng);
        let z: f64 = rng.sample(StandardNormal);
        let propagated = received_concentration(&ChannelParams { diffusion: d, ..self.base });
        let awgn = self.cfg.noise.mean + self.cfg.noise.std_dev * z;
        // Not clamped: negative readings decode as erasures.
        let received = propagated + awgn;
        TrialRecord {
            trial,
            sampled_diffusion: d,
            propagated,
            awgn,
            received,
            decoded: decode(received, self.scheme),
        }
    }

    fn chunk(&self, index: u64) -> (Moments, OutcomeCounts) {
        let start = index * CHUNK_TRIALS;
        let end = (start + CHUNK_TRIALS).min(self.cfg.trial_count);
        let mut m = Moments::default();
        let mut counts = OutcomeCounts::new(self.scheme.len());
        for t in start..end {
            let rec = self.trial(t);
            m.push(rec.received);
            counts.record(rec.decoded);
        }
        (m, counts)
    }

    fn run(&self, exec: Execution) -> SymbolRun {
        let chunks = self.cfg.trial_count.div_ceil(CHUNK_TRIALS);
        let parts = map_chunks(chunks, exec, |i| self.chunk(i));
        let mut moments = Moments::default();
        let mut counts = OutcomeCounts::new(self.scheme.len());
        for (m, c) in &parts {
            moments.merge(m);
            counts.merge(c);
        }
        let std_dev = moments.std_dev();
        SymbolRun {
            stats: SymbolStats {
                symbol: self.symbol,
                mean: moments.mean,
                std_dev,
                trial_count: moments.n,
                std_error: if moments.n > 0 {
                    std_dev / (moments.n as f64).sqrt()
                } else {
                    0.0
                },
            },
            counts,
        }
    }
}

#[cfg(feature = "parallel")]
fn map_chunks<T: Send>(chunks: u64, exec: Execution, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    use rayon::prelude::*;
    match exec {
        Execution::Parallel => (0..chunks).into_par_iter().map(&f).collect(),
        Execution::Sequential => (0..chunks).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T>(chunks: u64, _exec: Execution, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..chunks).map(f).collect()
}

/// Runs `cfg.trial_count` trials of `symbol` and returns both the moment
/// estimates and the decision counts.
pub fn simulate_symbol(
    scheme: &OiskScheme,
    symbol: usize,
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<SymbolRun, Error> {
    Ok(TrialContext::new(scheme, symbol, cfg)?.run(exec))
}

/// Mean and standard deviation of the received concentration of `symbol`.
pub fn run_symbol_trials(scheme: &OiskScheme, symbol: usize, cfg: &ExperimentConfig) -> Result<SymbolStats, Error> {
    simulate_symbol(scheme, symbol, cfg, Execution::default()).map(|r| r.stats)
}

/// The individual trials behind [`run_symbol_trials`], in trial order.
pub fn trial_records<'a>(
    scheme: &'a OiskScheme,
    symbol: usize,
    cfg: &'a ExperimentConfig,
) -> Result<impl Iterator<Item = TrialRecord> + 'a, Error> {
    let ctx = TrialContext::new(scheme, symbol, cfg)?;
    Ok((0..cfg.trial_count).map(move |t| ctx.trial(t)))
}

/// Writes trial records as CSV with columns
/// `trial,D,phi_propagated,awgn,phi_received,decoded`. Erasures are written
/// as `erasure`.
pub fn write_trial_csv<W: Write>(records: impl Iterator<Item = TrialRecord>, out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "D", "phi_propagated", "awgn", "phi_received", "decoded"])?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            format!("{:e}", r.sampled_diffusion),
            r.propagated.to_string(),
            r.awgn.to_string(),
            r.received.to_string(),
            r.decoded.map_or_else(|| "erasure".to_owned(), |i| i.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Empirical decision frequencies, one row per transmitted symbol.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMatrix {
    pub counts: Vec<OutcomeCounts>,
}

impl EmpiricalMatrix {
    /// `P̂(Y = decided | X = sent)`.
    pub fn frequency(&self, sent: usize, decided: usize) -> f64 {
        let c = &self.counts[sent];
        c.decided[decided] as f64 / c.total() as f64
    }

    pub fn erasure_frequency(&self, sent: usize) -> f64 {
        let c = &self.counts[sent];
        c.erasures as f64 / c.total() as f64
    }

    /// Binary matrix in the `p_ij = Pr(Y = i | X = j)` convention.
    pub fn to_binary(&self) -> Option<crate::infotheory::DetectionMatrix> {
        if self.counts.len() != 2 {
            return None;
        }
        Some(crate::infotheory::DetectionMatrix::new(
            self.frequency(0, 0),
            self.frequency(1, 0),
            self.frequency(0, 1),
            self.frequency(1, 1),
        ))
    }
}

/// Decodes every simulated trial and tabulates the outcomes.
pub fn empirical_detection_matrix(scheme: &OiskScheme, cfg: &ExperimentConfig) -> Result<EmpiricalMatrix, Error> {
    empirical_detection_matrix_with(scheme, cfg, Execution::default())
}

pub fn empirical_detection_matrix_with(
    scheme: &OiskScheme,
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<EmpiricalMatrix, Error> {
    let counts = (0..scheme.len())
        .map(|s| simulate_symbol(scheme, s, cfg, exec).map(|r| r.counts))
        .collect::<Result<_, _>>()?;
    Ok(EmpiricalMatrix { counts })
}
