//! Nested Monte Carlo loop: codebook draws outside, channel draws inside.
//!
//! Work is split by codebook draw. Each draw and each channel reads its own
//! derived random stream, and results are gathered in draw order, so the
//! output is identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::precoding::zf_ratios;
use crate::rng::RngStream;
use crate::rvq::{CodebookSet, CsitEstimate, CsitScalingVector};

const CODEBOOK_TAG: u64 = 0xc0de;
const CHANNEL_TAG: u64 = 0xc4a2;
const MAX_REDRAWS: u32 = 1000;

/// Number of codebook draws and channel draws per codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialLayout {
    pub codebooks: usize,
    pub channels_per_codebook: usize,
}

impl TrialLayout {
    pub fn new(codebooks: usize, channels_per_codebook: usize) -> Self {
        TrialLayout { codebooks, channels_per_codebook }
    }

    pub fn trials(&self) -> usize {
        self.codebooks * self.channels_per_codebook
    }

    pub fn validate(&self) -> Result<()> {
        if self.codebooks == 0 || self.channels_per_codebook == 0 {
            return Err(Error::config("trial counts must be at least 1"));
        }
        Ok(())
    }
}

/// Random streams feeding one grid point.
///
/// Channel draws come from a stream shared by every grid point (common random
/// numbers across SNR); codebooks get a per-point stream since their size
/// changes with the SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStreams {
    pub codebooks: RngStream,
    pub channels: RngStream,
}

impl TrialStreams {
    pub fn for_point(root: &RngStream, point: usize) -> Self {
        TrialStreams {
            codebooks: root.derive_path(&[CODEBOOK_TAG, point as u64]),
            channels: root.derive(CHANNEL_TAG),
        }
    }
}

/// Inputs visible to one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext {
    pub codebook_draw: usize,
    pub channel_index: usize,
    pub channel: ChannelRealization,
    pub est1: CsitEstimate,
    pub est2: CsitEstimate,
}

#[derive(Debug, Clone)]
pub struct TrialBatch<T> {
    pub values: Vec<T>,
    /// Channel draws discarded because an estimate had a zero leading entry.
    pub n_degenerate: usize,
}

/// Runs `f` on every (codebook, channel) trial at power `p`.
pub fn run_trials<T, F>(
    alphas: CsitScalingVector,
    p: f64,
    layout: TrialLayout,
    streams: &TrialStreams,
    f: F,
) -> Result<TrialBatch<T>>
where
    T: Send,
    F: Fn(&TrialContext) -> Result<T> + Sync,
{
    layout.validate()?;
    let per_draw: Vec<Result<(Vec<T>, usize)>> = (0..layout.codebooks)
        .into_par_iter()
        .map(|c| {
            let books = CodebookSet::draw(alphas, p, &streams.codebooks.derive(c as u64))?;
            let mut out = Vec::with_capacity(layout.channels_per_codebook);
            let mut degenerate = 0;
            for ch in 0..layout.channels_per_codebook {
                let base = streams.channels.derive_path(&[c as u64, ch as u64]);
                let mut attempt = 0u32;
                let ctx = loop {
                    let channel = sample_channel(&base.derive(attempt as u64));
                    let (est1, est2) = books.estimates(&channel)?;
                    if zf_ratios(&est1.h_hat).is_ok() && zf_ratios(&est2.h_hat).is_ok() {
                        break TrialContext { codebook_draw: c, channel_index: ch, channel, est1, est2 };
                    }
                    degenerate += 1;
                    attempt += 1;
                    if attempt > MAX_REDRAWS {
                        return Err(Error::InsufficientData(format!(
                            "{MAX_REDRAWS} consecutive degenerate channel draws"
                        )));
                    }
                };
                out.push(f(&ctx)?);
            }
            Ok((out, degenerate))
        })
        .collect();

    let mut values = Vec::with_capacity(layout.trials());
    let mut n_degenerate = 0;
    for r in per_draw {
        let (v, d) = r?;
        values.extend(v);
        n_degenerate += d;
    }
    Ok(TrialBatch { values, n_degenerate })
}

/// Runs `op` on a pool of `workers` threads (0 picks the rayon default).
pub fn with_workers<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(op());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(op))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphas() -> CsitScalingVector {
        CsitScalingVector::new(1.0, 0.6).unwrap()
    }

    fn index_sums(workers: usize) -> Vec<f64> {
        let streams = TrialStreams::for_point(&RngStream::new(9, 0), 0);
        with_workers(workers, || {
            run_trials(alphas(), 1e3, TrialLayout::new(6, 5), &streams, |t| {
                Ok(t.channel.h.to_reals()[0] + t.est1.quantizations[0].index as f64)
            })
        })
        .unwrap()
        .unwrap()
        .values
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let one = index_sums(1);
        assert_eq!(one.len(), 30);
        assert_eq!(one, index_sums(3));
        assert_eq!(one, index_sums(8));
    }

    #[test]
    fn channels_are_shared_across_grid_points() {
        let root = RngStream::new(4, 0);
        let grab = |point, p| {
            run_trials(alphas(), p, TrialLayout::new(2, 3), &TrialStreams::for_point(&root, point), |t| {
                Ok(t.channel.h)
            })
            .unwrap()
            .values
        };
        assert_eq!(grab(0, 100.0), grab(5, 1e5));
    }

    #[test]
    fn trial_order_is_codebook_major() {
        let streams = TrialStreams::for_point(&RngStream::new(1, 0), 0);
        let out = run_trials(alphas(), 100.0, TrialLayout::new(3, 2), &streams, |t| {
            Ok((t.codebook_draw, t.channel_index))
        })
        .unwrap();
        assert_eq!(out.values, vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]);
        assert_eq!(out.n_degenerate, 0);
    }

    #[test]
    fn empty_layout_is_rejected() {
        let streams = TrialStreams::for_point(&RngStream::new(1, 0), 0);
        assert!(run_trials(alphas(), 100.0, TrialLayout::new(0, 2), &streams, |_| Ok(())).is_err());
        assert!(TrialLayout::new(3, 0).validate().is_err());
    }
}
