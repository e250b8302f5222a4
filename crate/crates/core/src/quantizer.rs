//! Scalar quantization of power-control values.
//!
//! Both transmitters quantize their own power-control values with the same
//! rule. Agreement is decided on integer level indices, never on float
//! equality of the reconstructed values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::montecarlo::{self, TrialLayout};
use crate::precoding::power_control;
use crate::rng::RngStream;
use crate::rvq::CsitScalingVector;
use crate::stats;

/// `E[lambda]` of the max-row-norm power control under isotropic estimates.
/// Estimates are isotropic for every feedback size, so this does not depend
/// on `P`. Obtained by numerical integration over the two independent
/// row-ratio magnitudes.
pub const MEAN_POWER_CONTROL: f64 = 0.517_417_325_612_461_6;

const STEP_BITS: i32 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerKind {
    /// Floor quantizer with step `sqrt(P)^(-alpha2 / k)`.
    Uniform,
    /// `Q(x) = x`; baseline only.
    Identity,
    /// One positive reconstruction point (statistical power control).
    SinglePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub kind: QuantizerKind,
    pub k: f64,
    pub alpha2: f64,
    pub p: f64,
    /// Reconstruction point of the single-point kind.
    pub point: f64,
}

/// A quantized power-control value and its level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLambda {
    pub value: f64,
    /// Cell number for the uniform and single-point kinds; the bit pattern of
    /// the value for the identity kind.
    pub level_index: u64,
}

impl QuantizedLambda {
    pub fn is_positive(&self) -> bool {
        self.value > 0.0
    }
}

impl QuantizerSpec {
    pub fn uniform(k: f64, alpha2: f64, p: f64) -> Result<Self> {
        if !(k > 1.0) {
            return Err(Error::config(format!("quantizer exponent k must exceed 1 (got {k})")));
        }
        if !(alpha2 > 0.0 && alpha2 <= 1.0) {
            return Err(Error::config(format!("alpha2 must lie in (0, 1] (got {alpha2})")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain { value: p, domain: "power P >= 1" });
        }
        Ok(QuantizerSpec { kind: QuantizerKind::Uniform, k, alpha2, p, point: 0.0 })
    }

    pub fn identity() -> Self {
        QuantizerSpec { kind: QuantizerKind::Identity, k: f64::NAN, alpha2: f64::NAN, p: f64::NAN, point: 0.0 }
    }

    pub fn single_point(point: f64) -> Result<Self> {
        if !(point > 0.0 && point <= 1.0) {
            return Err(Error::Domain { value: point, domain: "(0, 1]" });
        }
        Ok(QuantizerSpec { kind: QuantizerKind::SinglePoint, k: f64::NAN, alpha2: f64::NAN, p: f64::NAN, point })
    }

    /// Single point at [`MEAN_POWER_CONTROL`].
    pub fn statistical() -> Self {
        Self::single_point(MEAN_POWER_CONTROL).expect("constant lies in (0, 1]")
    }

    /// Uniform step `q = sqrt(P)^(-alpha2 / k)`, rounded to 37 significant
    /// bits. Multiples of the rounded step and differences `x - q` are then
    /// exact in double precision, so the floor laws hold without rounding
    /// slack. The relative change to `q` is below 2^-36.
    pub fn step(&self) -> Option<f64> {
        (self.kind == QuantizerKind::Uniform).then(|| {
            let raw = self.p.sqrt().powf(-self.alpha2 / self.k);
            let grid = 2f64.powi(raw.log2().floor() as i32 - STEP_BITS);
            (raw / grid).round() * grid
        })
    }

    pub fn quantize(&self, x: f64) -> Result<QuantizedLambda> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { value: x, domain: "[0, 1]" });
        }
        Ok(match self.kind {
            QuantizerKind::Identity => QuantizedLambda { value: x, level_index: x.to_bits() },
            QuantizerKind::SinglePoint => {
                if x >= self.point {
                    QuantizedLambda { value: self.point, level_index: 1 }
                } else {
                    QuantizedLambda { value: 0.0, level_index: 0 }
                }
            }
            QuantizerKind::Uniform => {
                let step = self.step().expect("uniform quantizer has a step");
                let mut level = (x / step).floor() as u64;
                // Pin the level so that x - step < level * step <= x holds
                // for the rounded values, not just in exact arithmetic.
                while level > 0 && level as f64 * step > x {
                    level -= 1;
                }
                while level as f64 * step <= x - step {
                    level += 1;
                }
                QuantizedLambda { value: level as f64 * step, level_index: level }
            }
        })
    }
}

/// Free-function form of [`QuantizerSpec::quantize`].
pub fn quantize(spec: &QuantizerSpec, x: f64) -> Result<QuantizedLambda> {
    spec.quantize(x)
}

/// A quantizer family instantiated per power level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantizerTemplate {
    Uniform { k: f64 },
    Identity,
    SinglePoint { point: f64 },
}

impl QuantizerTemplate {
    pub fn uniform(k: f64) -> Self {
        QuantizerTemplate::Uniform { k }
    }

    pub fn at(&self, alpha2: f64, p: f64) -> Result<QuantizerSpec> {
        match *self {
            QuantizerTemplate::Uniform { k } => QuantizerSpec::uniform(k, alpha2, p),
            QuantizerTemplate::Identity => Ok(QuantizerSpec::identity()),
            QuantizerTemplate::SinglePoint { point } => QuantizerSpec::single_point(point),
        }
    }
}

/// Shared settings of the quantizer estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub alphas: CsitScalingVector,
    pub quantizer: QuantizerTemplate,
    pub snr_grid_db: Vec<f64>,
    pub layout: TrialLayout,
    pub stream: RngStream,
}

impl EstimatorConfig {
    fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() || self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("SNR grid must be non-empty and strictly increasing"));
        }
        self.layout.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub snr_db: f64,
    /// `E|Q(lambda^(j)) - lambda^(1)|`, averaged over both receivers.
    pub mean_abs_gap: f64,
    pub ci95: f64,
    pub step: Option<f64>,
    pub n_trials: usize,
}

/// Monte Carlo accuracy of `Q` applied at transmitter `tx` relative to the
/// unquantized value at transmitter 1, one row per grid point.
pub fn estimate_accuracy(cfg: &EstimatorConfig, tx: usize) -> Result<Vec<AccuracyRow>> {
    cfg.validate()?;
    if tx != 1 && tx != 2 {
        return Err(Error::config(format!("transmitter index must be 1 or 2 (got {tx})")));
    }
    cfg.snr_grid_db
        .iter()
        .enumerate()
        .map(|(si, &snr_db)| {
            let p = db_to_linear(snr_db);
            let spec = cfg.quantizer.at(cfg.alphas.alpha2, p)?;
            let per_trial = montecarlo::run_trials(cfg.alphas, p, cfg.layout, &montecarlo::TrialStreams::for_point(&cfg.stream, si), |t| {
                let l1 = power_control(&t.est1.h_hat, p)?;
                let lj = if tx == 1 { l1 } else { power_control(&t.est2.h_hat, p)? };
                let mut gap = 0.0;
                for (a, b) in [(lj.lambda1, l1.lambda1), (lj.lambda2, l1.lambda2)] {
                    gap += (spec.quantize(a)?.value - b).abs();
                }
                Ok(gap / 2.0)
            })?;
            let est = stats::mean_ci(&per_trial.values);
            Ok(AccuracyRow { snr_db, mean_abs_gap: est.mean, ci95: est.ci95, step: spec.step(), n_trials: est.n })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub snr_db: f64,
    /// Fraction of trials outside the agreement event.
    pub pr_omega_c: f64,
    /// Fraction with differing levels for at least one receiver.
    pub pr_disagree: f64,
    /// Fraction where some quantized value is zero.
    pub pr_zero: f64,
    pub n_trials: usize,
}

/// Per-trial agreement outcome of the quantized power control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub disagree: bool,
    pub zero: bool,
}

impl Agreement {
    pub fn omega(&self) -> bool {
        !self.disagree && !self.zero
    }
}

pub fn agreement(q1: &[QuantizedLambda; 2], q2: &[QuantizedLambda; 2]) -> Agreement {
    Agreement {
        disagree: q1.iter().zip(q2).any(|(a, b)| a.level_index != b.level_index),
        zero: q1.iter().chain(q2).any(|q| !q.is_positive()),
    }
}

/// Monte Carlo probability of inconsistent precoding per grid point.
pub fn estimate_consistency(cfg: &EstimatorConfig) -> Result<Vec<ConsistencyRow>> {
    cfg.validate()?;
    cfg.snr_grid_db
        .iter()
        .enumerate()
        .map(|(si, &snr_db)| {
            let p = db_to_linear(snr_db);
            let spec = cfg.quantizer.at(cfg.alphas.alpha2, p)?;
            let out = montecarlo::run_trials(cfg.alphas, p, cfg.layout, &montecarlo::TrialStreams::for_point(&cfg.stream, si), |t| {
                let l1 = power_control(&t.est1.h_hat, p)?;
                let l2 = power_control(&t.est2.h_hat, p)?;
                let q1 = [spec.quantize(l1.lambda1)?, spec.quantize(l1.lambda2)?];
                let q2 = [spec.quantize(l2.lambda1)?, spec.quantize(l2.lambda2)?];
                Ok(agreement(&q1, &q2))
            })?;
            let n = out.values.len() as f64;
            let count = |f: fn(&Agreement) -> bool| out.values.iter().filter(|a| f(a)).count() as f64 / n;
            Ok(ConsistencyRow {
                snr_db,
                pr_omega_c: count(|a| !a.omega()),
                pr_disagree: count(|a| a.disagree),
                pr_zero: count(|a| a.zero),
                n_trials: out.values.len(),
            })
        })
        .collect()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
