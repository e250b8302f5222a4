//! Rates, the Monte Carlo sweep and the statistics built on top of it.

pub mod montecarlo;

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::channel::{CVec2, ChannelRealization};
use crate::error::{Error, Result};
use crate::precoding::{
    build_centralized_zf, build_hap, build_naive_distributed, build_scaled_power_baseline, PrecoderPair, Scheme,
};
use crate::quantizer::{db_to_linear, QuantizerSpec, QuantizerTemplate};
use crate::rng::RngStream;
use crate::rvq::{decompose_estimate, feedback_bits, CsitEstimate, CsitScalingVector};
use crate::stats::{self, Z95};

use montecarlo::{run_trials, with_workers, TrialContext, TrialLayout, TrialStreams};

/// `log2(1 + (P/2)|h t_self|^2 / (1 + (P/2)|h t_other|^2))` for the stored
/// channel row `h` (already conjugated).
pub fn instantaneous_rate(h_row: &CVec2, t_self: &CVec2, t_other: &CVec2, p: f64) -> f64 {
    let half = 0.5 * p;
    let signal = half * h_row.row_dot(t_self).norm_sqr();
    let interference = half * h_row.row_dot(t_other).norm_sqr();
    (1.0 + signal / (1.0 + interference)).log2()
}

/// Per-receiver rates and received interference powers `(P/2)|h_i t_ibar|^2`.
pub fn link_rates(ch: &ChannelRealization, precoder: &PrecoderPair, p: f64) -> ([f64; 2], [f64; 2]) {
    let mut rates = [0.0; 2];
    let mut interference = [0.0; 2];
    for i in 0..2 {
        let (own, other) = (&precoder.t[i], &precoder.t[1 - i]);
        rates[i] = instantaneous_rate(ch.row(i), own, other, p);
        interference[i] = 0.5 * p * ch.row(i).row_dot(other).norm_sqr();
    }
    (rates, interference)
}

/// One scheme's outcome on one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub r1: f64,
    pub r2: f64,
    /// Agreement event; HAP only.
    pub omega: Option<bool>,
    /// `(lambda_1 / Q(lambda_1))^2` at TX 1; HAP only, when `Q > 0`.
    pub gamma1: Option<f64>,
    pub interference_power: [f64; 2],
}

impl TrialRecord {
    pub fn sum_rate(&self) -> f64 {
        self.r1 + self.r2
    }
}

/// Evaluates `schemes` on one trial. Every scheme sees the same channel and
/// estimates.
pub fn evaluate_trial(
    channel: &ChannelRealization,
    est1: &CsitEstimate,
    est2: &CsitEstimate,
    spec: &QuantizerSpec,
    p: f64,
    schemes: &[Scheme],
) -> Result<Vec<TrialRecord>> {
    let snr_db = 10.0 * p.log10();
    schemes
        .iter()
        .map(|&scheme| {
            let (precoder, omega, gamma1) = match scheme {
                Scheme::CentralizedZf => (build_centralized_zf(&est1.h_hat, p)?, None, None),
                Scheme::Hap => {
                    let rec = build_hap(&est1.h_hat, &est2.h_hat, spec, p)?;
                    (rec.precoder, Some(rec.omega), rec.gamma[0])
                }
                Scheme::NaiveDistributed => (build_naive_distributed(&est1.h_hat, &est2.h_hat, p)?, None, None),
                Scheme::ScaledPower => (build_scaled_power_baseline(&est1.h_hat, p)?, None, None),
            };
            let (r, interference_power) = link_rates(channel, &precoder, p);
            Ok(TrialRecord { snr_db, scheme, r1: r[0], r2: r[1], omega, gamma1, interference_power })
        })
        .collect()
}

/// Settings of a full sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub alphas: CsitScalingVector,
    pub quantizer: QuantizerTemplate,
    pub snr_grid_db: Vec<f64>,
    pub n_codebooks: usize,
    pub n_channels_per_codebook: usize,
    pub schemes: Vec<Scheme>,
    pub master_seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alphas: CsitScalingVector { alpha1: 1.0, alpha2: 0.6 },
            quantizer: QuantizerTemplate::uniform(2.0),
            snr_grid_db: (0..9).map(|i| 20.0 + 5.0 * i as f64).collect(),
            n_codebooks: 100,
            n_channels_per_codebook: 200,
            schemes: Scheme::ALL.to_vec(),
            master_seed: 42,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn layout(&self) -> TrialLayout {
        TrialLayout::new(self.n_codebooks, self.n_channels_per_codebook)
    }

    pub fn validate(&self) -> Result<()> {
        CsitScalingVector::new(self.alphas.alpha1, self.alphas.alpha2)?;
        if self.snr_grid_db.is_empty() {
            return Err(Error::config("SNR grid is empty"));
        }
        if self.snr_grid_db.iter().any(|x| !x.is_finite()) || self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("SNR grid must be finite and strictly increasing"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("at least one scheme is required"));
        }
        self.layout().validate()?;
        for &snr in &self.snr_grid_db {
            let p = db_to_linear(snr);
            if p < 1.0 {
                return Err(Error::config(format!("SNR {snr} dB is below 0 dB")));
            }
            self.quantizer.at(self.alphas.alpha2, p)?;
            if self.schemes.contains(&Scheme::ScaledPower) && p <= 2.0 {
                return Err(Error::config(format!("scaled_power needs P > 2 (got {snr} dB)")));
            }
        }
        Ok(())
    }

    /// Requested schemes plus the two needed for gap and bound statistics,
    /// in canonical order.
    fn computed_schemes(&self) -> Vec<Scheme> {
        Scheme::ALL
            .into_iter()
            .filter(|s| self.schemes.contains(s) || matches!(s, Scheme::CentralizedZf | Scheme::Hap))
            .collect()
    }
}

/// All trial records of one grid point, grouped by scheme.
#[derive(Debug, Clone)]
pub struct SnrBlock {
    pub snr_db: f64,
    pub p: f64,
    pub quantizer: QuantizerSpec,
    pub n_degenerate: usize,
    pub records: Vec<(Scheme, Vec<TrialRecord>)>,
}

impl SnrBlock {
    pub fn trials(&self, scheme: Scheme) -> Option<&[TrialRecord]> {
        self.records.iter().find(|(s, _)| *s == scheme).map(|(_, r)| r.as_slice())
    }

    pub fn sum_rates(&self, scheme: Scheme) -> Option<Vec<f64>> {
        self.trials(scheme).map(|r| r.iter().map(TrialRecord::sum_rate).collect())
    }

    fn hap_and_zf(&self) -> (&[TrialRecord], &[TrialRecord]) {
        let hap = self.trials(Scheme::Hap).expect("HAP is always computed");
        let zf = self.trials(Scheme::CentralizedZf).expect("centralized ZF is always computed");
        (hap, zf)
    }

    pub fn bound(&self) -> Result<BoundEstimate> {
        let (hap, zf) = self.hap_and_zf();
        theorem1_bound(hap, zf, self.p, self.quantizer.step())
    }

    pub fn rate_gap(&self) -> GapPoint {
        let (hap, zf) = self.hap_and_zf();
        let diffs: Vec<f64> = zf.iter().zip(hap).map(|(z, h)| z.sum_rate() - h.sum_rate()).collect();
        let est = stats::mean_ci(&diffs);
        GapPoint { snr_db: self.snr_db, gap: est.mean, ci95: est.ci95, n_trials: est.n }
    }
}

/// Raw output of [`simulate`].
#[derive(Debug, Clone)]
pub struct SweepData {
    pub config: ExperimentConfig,
    pub blocks: Vec<SnrBlock>,
}

/// Aggregate of one (SNR, scheme) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub sum_rate_mean: f64,
    pub sum_rate_ci95: f64,
    /// HAP only.
    pub pr_omega_c: Option<f64>,
    /// HAP only.
    pub bound_thm1: Option<f64>,
    pub n_trials: usize,
    pub n_degenerate: usize,
}

impl SweepData {
    /// One point per grid value and requested scheme, grid-major.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let mut out = Vec::with_capacity(self.blocks.len() * self.config.schemes.len());
        for block in &self.blocks {
            let bound = block.bound()?;
            for &scheme in &self.config.schemes {
                let rates = block.sum_rates(scheme).expect("requested schemes are computed");
                let est = stats::mean_ci(&rates);
                let hap = scheme == Scheme::Hap;
                out.push(SweepPoint {
                    snr_db: block.snr_db,
                    scheme,
                    sum_rate_mean: est.mean,
                    sum_rate_ci95: est.ci95,
                    pr_omega_c: hap.then_some(bound.pr_omega_c),
                    bound_thm1: hap.then_some(bound.value),
                    n_trials: est.n,
                    n_degenerate: block.n_degenerate,
                });
            }
        }
        Ok(out)
    }

    pub fn rate_gaps(&self) -> Vec<GapPoint> {
        self.blocks.iter().map(SnrBlock::rate_gap).collect()
    }

    pub fn bounds(&self) -> Result<Vec<BoundEstimate>> {
        self.blocks.iter().map(SnrBlock::bound).collect()
    }
}

/// Runs every trial of `cfg` and keeps the per-trial records.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SweepData> {
    cfg.validate()?;
    let schemes = cfg.computed_schemes();
    let root = RngStream::new(cfg.master_seed, 0);
    let blocks = with_workers(cfg.workers, || {
        cfg.snr_grid_db
            .iter()
            .enumerate()
            .map(|(si, &snr_db)| {
                let p = db_to_linear(snr_db);
                let spec = cfg.quantizer.at(cfg.alphas.alpha2, p)?;
                let batch = run_trials(cfg.alphas, p, cfg.layout(), &TrialStreams::for_point(&root, si), |t| {
                    evaluate_trial(&t.channel, &t.est1, &t.est2, &spec, p, &schemes)
                })?;
                let records = schemes
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| (s, batch.values.iter().map(|v| v[k]).collect()))
                    .collect();
                Ok(SnrBlock { snr_db, p, quantizer: spec, n_degenerate: batch.n_degenerate, records })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SweepData { config: cfg.clone(), blocks })
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    simulate(cfg)?.points()
}

/// Upper bound on the HAP rate gap at one power level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub value: f64,
    pub ci95: f64,
    /// Conditional mean of `log2 Gamma_1` over agreement trials.
    pub mean_log_gamma: f64,
    pub pr_omega_c: f64,
    /// No agreement trial was observed; the first term is a step-size bound.
    pub low_confidence: bool,
}

/// `2 E_Omega[log2 Gamma_1] + Pr(Omega^c) 2 log2(1 + P)` from paired HAP and
/// centralized trials.
pub fn theorem1_bound(hap: &[TrialRecord], zf: &[TrialRecord], p: f64, step: Option<f64>) -> Result<BoundEstimate> {
    if hap.is_empty() || hap.len() != zf.len() {
        return Err(Error::InsufficientData(format!(
            "bound needs paired non-empty trial sets (got {} and {})",
            hap.len(),
            zf.len()
        )));
    }
    if hap.iter().any(|r| r.scheme != Scheme::Hap) || zf.iter().any(|r| r.scheme != Scheme::CentralizedZf) {
        return Err(Error::config("bound expects HAP and centralized ZF records"));
    }
    let n = hap.len() as f64;
    let log_gamma: Vec<f64> = hap
        .iter()
        .filter(|r| r.omega == Some(true))
        .map(|r| r.gamma1.map_or(f64::INFINITY, f64::log2))
        .collect();
    let pr_c = 1.0 - log_gamma.len() as f64 / n;
    let cap = 2.0 * (1.0 + p).log2();
    let second = pr_c * cap;
    let second_ci = cap * Z95 * (pr_c * (1.0 - pr_c) / n).sqrt();

    if log_gamma.is_empty() {
        let first = match step {
            Some(s) if s < 1.0 => 2.0 * (1.0 / (1.0 - s)).log2(),
            Some(_) => f64::INFINITY,
            None => 0.0,
        };
        return Ok(BoundEstimate {
            value: first + second,
            ci95: second_ci,
            mean_log_gamma: f64::NAN,
            pr_omega_c: pr_c,
            low_confidence: true,
        });
    }
    let lg = stats::mean_ci(&log_gamma);
    Ok(BoundEstimate {
        value: 2.0 * lg.mean + second,
        ci95: ((2.0 * lg.ci95).powi(2) + second_ci.powi(2)).sqrt(),
        mean_log_gamma: lg.mean,
        pr_omega_c: pr_c,
        low_confidence: false,
    })
}

/// Paired rate gap `R^ZF - R^HAP` at one power level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub snr_db: f64,
    pub gap: f64,
    pub ci95: f64,
    pub n_trials: usize,
}

pub fn measure_rate_gap(cfg: &ExperimentConfig) -> Result<Vec<GapPoint>> {
    Ok(simulate(cfg)?.rate_gaps())
}

/// Least-squares slope of sum rate against `log2 P` over the points of one
/// scheme inside `window_db`.
pub fn fit_dof_slope(points: &[SweepPoint], window_db: RangeInclusive<f64>) -> Result<f64> {
    let inside: Vec<&SweepPoint> = points.iter().filter(|p| window_db.contains(&p.snr_db)).collect();
    if let Some(first) = inside.first() {
        if inside.iter().any(|p| p.scheme != first.scheme) {
            return Err(Error::config("slope fit mixes several schemes"));
        }
    }
    if inside.len() < 3 {
        return Err(Error::InsufficientData(format!("slope fit needs 3 points in the window, got {}", inside.len())));
    }
    let x: Vec<f64> = inside.iter().map(|p| p.snr_db / 10.0 * 10f64.log2()).collect();
    let y: Vec<f64> = inside.iter().map(|p| p.sum_rate_mean).collect();
    stats::linear_fit(&x, &y)
        .map(|(slope, _)| slope)
        .ok_or_else(|| Error::InsufficientData("slope fit needs distinct SNR values".into()))
}

/// Estimate-convergence statistics at one power level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub snr_db: f64,
    /// `E||v^(2) - v^(1)||^2` over the real stacking of both estimates.
    pub gap_moment: f64,
    pub gap_ci95: f64,
    /// `gap_moment / P^-alpha2`.
    pub ratio: f64,
    pub bits: [u32; 2],
    /// Mean quantization error per transmitter.
    pub mean_z: [f64; 2],
    pub mean_z_ci95: [f64; 2],
    /// `2^-B` per transmitter.
    pub z_bound: [f64; 2],
    pub n_trials: usize,
}

/// Real stacking (8 entries) of a transmitter's estimate with each codeword
/// phase-aligned to the true direction.
pub fn aligned_estimate_vector(channel: &ChannelRealization, est: &CsitEstimate) -> [f64; 8] {
    let mut out = [0.0; 8];
    for i in 0..2 {
        let d = decompose_estimate(&channel.directions[i], &est.quantizations[i]);
        out[4 * i..4 * i + 4].copy_from_slice(&d.aligned.conj().to_reals());
    }
    out
}

/// Squared distance between the two transmitters' aligned estimates.
pub fn estimate_gap_sq(ctx: &TrialContext) -> f64 {
    let a = aligned_estimate_vector(&ctx.channel, &ctx.est1);
    let b = aligned_estimate_vector(&ctx.channel, &ctx.est2);
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn validate_estimate_convergence(
    alphas: CsitScalingVector,
    snr_grid_db: &[f64],
    layout: TrialLayout,
    stream: &RngStream,
) -> Result<Vec<ConvergenceRow>> {
    if snr_grid_db.is_empty() {
        return Err(Error::config("SNR grid is empty"));
    }
    snr_grid_db
        .iter()
        .enumerate()
        .map(|(si, &snr_db)| {
            let p = db_to_linear(snr_db);
            let bits = [feedback_bits(alphas.alpha1, p)?, feedback_bits(alphas.alpha2, p)?];
            let batch = run_trials(alphas, p, layout, &TrialStreams::for_point(stream, si), |t| {
                let z1 = t.est1.z_per_rx();
                let z2 = t.est2.z_per_rx();
                Ok([estimate_gap_sq(t), 0.5 * (z1[0] + z1[1]), 0.5 * (z2[0] + z2[1])])
            })?;
            let col = |k: usize| stats::mean_ci(&batch.values.iter().map(|v| v[k]).collect::<Vec<_>>());
            let (gap, z1, z2) = (col(0), col(1), col(2));
            Ok(ConvergenceRow {
                snr_db,
                gap_moment: gap.mean,
                gap_ci95: gap.ci95,
                ratio: gap.mean / p.powf(-alphas.alpha2),
                bits,
                mean_z: [z1.mean, z2.mean],
                mean_z_ci95: [z1.ci95, z2.ci95],
                z_bound: bits.map(|b| 2f64.powi(-(b as i32))),
                n_trials: gap.n,
            })
        })
        .collect()
}
