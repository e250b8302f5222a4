//! Precoder construction for the two-transmitter setting.
//!
//! Every scheme here splits the precoder into an interference-nulling matrix
//! built from ratios of estimate entries and a diagonal power control. The
//! nulling matrix for an estimate `H^` is
//!
//! ```text
//!     V = [ h^21^-1 h^22   h^11^-1 h^12 ]
//!         [     -1              -1      ]
//! ```
//!
//! where `h^ik` are entries of the row-stored estimate. Column `i` nulls the
//! other receiver's estimated row. Row `j` of a precoder holds the
//! coefficients transmitted from TX `j`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{CMat2, CVec2};
use crate::error::{Error, Result};
use crate::quantizer::{agreement, QuantizedLambda, QuantizerSpec};

/// Below this modulus a leading estimate entry is treated as zero.
pub const DEGENERATE_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CentralizedZf,
    Hap,
    NaiveDistributed,
    ScaledPower,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::CentralizedZf, Scheme::Hap, Scheme::NaiveDistributed, Scheme::ScaledPower];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::CentralizedZf => "centralized_zf",
            Scheme::Hap => "hap",
            Scheme::NaiveDistributed => "naive_distributed",
            Scheme::ScaledPower => "scaled_power",
        }
    }

    pub fn from_name(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized precoding vectors `t_1`, `t_2` (the columns of `T`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecoderPair {
    pub t: [CVec2; 2],
    pub scheme: Scheme,
}

impl PrecoderPair {
    /// Build from transmitter rows: `rows[j]` holds TX `j+1`'s coefficients
    /// for receivers 1 and 2.
    pub fn from_tx_rows(rows: [CVec2; 2], scheme: Scheme) -> Self {
        let t1 = CVec2::new(rows[0].e1(), rows[1].e1());
        let t2 = CVec2::new(rows[0].e2(), rows[1].e2());
        PrecoderPair { t: [t1, t2], scheme }
    }

    /// Coefficients sent by transmitter `tx` (1 or 2).
    pub fn tx_row(&self, tx: usize) -> CVec2 {
        CVec2::new(self.t[0][tx - 1], self.t[1][tx - 1])
    }

    /// Per-transmitter precoder norm `||t_TXj||`.
    pub fn tx_norm(&self, tx: usize) -> f64 {
        self.tx_row(tx).norm()
    }

    pub fn column(&self, i: usize) -> &CVec2 {
        &self.t[i - 1]
    }
}

/// Unit-norm ZF direction nulling `row` (the other receiver's estimated row):
/// `e^{-j phi} [row_2, -row_1]` with `phi` the phase of `row_1`.
pub fn zf_direction(row: &CVec2) -> Result<CVec2> {
    let lead = row.e1();
    if lead.norm() < DEGENERATE_THRESHOLD {
        return Err(Error::DegenerateChannel { row: 0, magnitude: lead.norm() });
    }
    let rot = Complex64::from_polar(1.0, -lead.arg());
    Ok(CVec2::new(row.e2(), -row.e1()).scale_complex(rot).normalized())
}

/// The two nulling ratios `[h^22 / h^21, h^12 / h^11]`, i.e. the first row of
/// the nulling matrix.
pub fn zf_ratios(h_hat: &CMat2) -> Result<[Complex64; 2]> {
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (i, other) in [(0usize, 1usize), (1, 0)] {
        let lead = h_hat.entry(other, 0);
        if lead.norm() < DEGENERATE_THRESHOLD {
            return Err(Error::DegenerateChannel { row: other + 1, magnitude: lead.norm() });
        }
        out[i] = h_hat.entry(other, 1) / lead;
    }
    Ok(out)
}

/// Power-control values `lambda_i` together with the common normalizer `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerControlValues {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
}

impl PowerControlValues {
    pub fn as_array(&self) -> [f64; 2] {
        [self.lambda1, self.lambda2]
    }
}

/// A rule mapping an estimate to power-control values.
pub trait PowerPolicy {
    fn lambdas(&self, h_hat: &CMat2, p: f64) -> Result<PowerControlValues>;
}

/// Common normalizer `mu = 1 / max(||v_TX1||, ||v_TX2||)` over the rows of
/// the nulling matrix. Since the second row is `(-1, -1)`,
/// `lambda_1 = lambda_2 = mu <= 1/sqrt(2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MaxRowNormPolicy;

impl PowerPolicy for MaxRowNormPolicy {
    fn lambdas(&self, h_hat: &CMat2, _p: f64) -> Result<PowerControlValues> {
        let r = zf_ratios(h_hat)?;
        let tx1 = (r[0].norm_sqr() + r[1].norm_sqr()).sqrt();
        let mu = 1.0 / tx1.max(std::f64::consts::SQRT_2);
        Ok(PowerControlValues { lambda1: mu, lambda2: mu, mu })
    }
}

/// Power control of the default policy ([`MaxRowNormPolicy`]).
pub fn power_control(h_hat: &CMat2, p: f64) -> Result<PowerControlValues> {
    MaxRowNormPolicy.lambdas(h_hat, p)
}

fn zf_rows(ratios: [Complex64; 2], l: [f64; 2]) -> [CVec2; 2] {
    [CVec2::new(ratios[0] * l[0], ratios[1] * l[1]), CVec2::from_real(-l[0], -l[1])]
}

/// Centralized ZF `T = V Lambda` from a single shared estimate.
pub fn build_centralized_zf(h_hat: &CMat2, p: f64) -> Result<PrecoderPair> {
    let ratios = zf_ratios(h_hat)?;
    let pc = power_control(h_hat, p)?;
    Ok(PrecoderPair::from_tx_rows(zf_rows(ratios, pc.as_array()), Scheme::CentralizedZf))
}

/// Everything produced while building one HAP precoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapBuildRecord {
    pub precoder: PrecoderPair,
    pub lambdas_tx1: PowerControlValues,
    /// Zero when TX 2's estimate is degenerate (see `tx2_muted`).
    pub lambdas_tx2: PowerControlValues,
    pub q_levels_tx1: [QuantizedLambda; 2],
    pub q_levels_tx2: [QuantizedLambda; 2],
    /// Both transmitters agree on strictly positive quantized values.
    pub omega: bool,
    /// `(lambda_i^(1) / Q(lambda_i^(1)))^2`, when `Q(lambda_i^(1)) > 0`.
    pub gamma: [Option<f64>; 2],
    pub tx2_muted: bool,
}

/// Hybrid active-passive precoder.
///
/// TX 1 applies the nulling ratios of its own estimate scaled by its
/// quantized power control; TX 2 only sends `-Q(lambda_i^(2))`, computed
/// from its own estimate with the same policy and quantizer.
pub fn build_hap(h_hat_1: &CMat2, h_hat_2: &CMat2, spec: &QuantizerSpec, p: f64) -> Result<HapBuildRecord> {
    let ratios = zf_ratios(h_hat_1)?;
    let l1 = power_control(h_hat_1, p)?;
    let q1 = [spec.quantize(l1.lambda1)?, spec.quantize(l1.lambda2)?];

    let (l2, q2, muted) = match power_control(h_hat_2, p) {
        Ok(l2) => (l2, [spec.quantize(l2.lambda1)?, spec.quantize(l2.lambda2)?], false),
        Err(Error::DegenerateChannel { .. }) => {
            let zero = QuantizedLambda { value: 0.0, level_index: 0 };
            (PowerControlValues { lambda1: 0.0, lambda2: 0.0, mu: 0.0 }, [zero; 2], true)
        }
        Err(e) => return Err(e),
    };

    let tx1 = CVec2::new(ratios[0] * q1[0].value, ratios[1] * q1[1].value);
    let tx2 = CVec2::from_real(-q2[0].value, -q2[1].value);
    let precoder = PrecoderPair::from_tx_rows([tx1, tx2], Scheme::Hap);

    let omega = !muted && agreement(&q1, &q2).omega();
    let gamma = [0, 1].map(|i| {
        let (l, q) = (l1.as_array()[i], q1[i].value);
        (q > 0.0).then(|| (l / q) * (l / q))
    });
    Ok(HapBuildRecord {
        precoder,
        lambdas_tx1: l1,
        lambdas_tx2: l2,
        q_levels_tx1: q1,
        q_levels_tx2: q2,
        omega,
        gamma,
        tx2_muted: muted,
    })
}

/// Each transmitter applies its own row of the centralized ZF precoder
/// computed from its own estimate, without any quantization.
pub fn build_naive_distributed(h_hat_1: &CMat2, h_hat_2: &CMat2, p: f64) -> Result<PrecoderPair> {
    let own1 = build_centralized_zf(h_hat_1, p)?;
    let own2 = build_centralized_zf(h_hat_2, p)?;
    Ok(PrecoderPair::from_tx_rows([own1.tx_row(1), own2.tx_row(2)], Scheme::NaiveDistributed))
}

/// Amplitude back-off `1 / sqrt(log2 P)` of the scaled-power baseline.
pub fn scaled_power_backoff(p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::Domain { value: p, domain: "power P > 2 for the P/log2(P) baseline" });
    }
    Ok(1.0 / p.log2().sqrt())
}

/// Baseline operating at effective power `P / log2 P`.
///
/// TX 2 is passive with the constant coefficients `-(1/sqrt 2, 1/sqrt 2)`;
/// TX 1 applies its nulling ratios with the same constant. Both rows are
/// backed off by `1 / sqrt(log2 P)`. If TX 1's row still exceeds unit norm,
/// TX 1 rescales it to unit norm (losing exact nulling for that draw).
pub fn build_scaled_power_baseline(h_hat_1: &CMat2, p: f64) -> Result<PrecoderPair> {
    let backoff = scaled_power_backoff(p)?;
    let ratios = zf_ratios(h_hat_1)?;
    let c = std::f64::consts::FRAC_1_SQRT_2 * backoff;
    let mut tx1 = CVec2::new(ratios[0] * c, ratios[1] * c);
    let n = tx1.norm();
    if n > 1.0 {
        tx1 = tx1.scale(1.0 / n);
    }
    Ok(PrecoderPair::from_tx_rows([tx1, CVec2::from_real(-c, -c)], Scheme::ScaledPower))
}
