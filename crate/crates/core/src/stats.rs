//! Small statistics helpers: order-stable sums, normal-approximation
//! confidence intervals, least-squares slopes and the one-sample
//! Kolmogorov-Smirnov test.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Neumaier-compensated sum. Results depend only on the order of the input.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Sample mean with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub ci95: f64,
    pub std_dev: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.std_dev / (self.n as f64).sqrt()
        }
    }
}

pub fn mean_ci(values: &[f64]) -> MeanEstimate {
    let n = values.len();
    if n == 0 {
        return MeanEstimate { mean: f64::NAN, ci95: f64::NAN, std_dev: f64::NAN, n };
    }
    let mean = sum(values.iter().copied()) / n as f64;
    let var = if n > 1 { sum(values.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64 } else { 0.0 };
    let std_dev = var.sqrt();
    MeanEstimate { mean, ci95: Z95 * std_dev / (n as f64).sqrt(), std_dev, n }
}

/// Ordinary least-squares fit `y = slope * x + intercept`; `None` for fewer
/// than two distinct abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = sum(x.iter().copied()) / n as f64;
    let my = sum(y.iter().copied()) / n as f64;
    let sxx = sum(x.iter().map(|a| (a - mx) * (a - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Kolmogorov-Smirnov statistic `sup |F_n - F|` of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic p-value of a KS statistic `d` from `n` samples (Stephens'
/// small-sample correction applied to the Kolmogorov series).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut q = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        q += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}
