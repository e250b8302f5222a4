//! Configuration and output handling for the `simulate` binary.
//!
//! Settings come from built-in defaults, then an optional `key = value`
//! file, then command-line flags, each layer overriding the previous one.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use netmimo::evaluation::montecarlo::TrialLayout;
use netmimo::evaluation::{simulate, validate_estimate_convergence, ExperimentConfig, SweepPoint};
use netmimo::precoding::Scheme;
use netmimo::quantizer::{estimate_accuracy, estimate_consistency, EstimatorConfig, QuantizerTemplate};
use netmimo::rvq::CsitScalingVector;
use netmimo::RngStream;

pub const CSV_HEADER: &str = "snr_db,scheme,sum_rate_mean,sum_rate_ci95,pr_omega_c,bound_thm1,n_trials,n_degenerate";

const DIAGNOSTICS_HEADER: &str = "snr_db,step,accuracy_tx1,accuracy_tx2,pr_omega_c,pr_disagree,pr_zero,\
gap_moment,gap_ratio,bits_tx1,bits_tx2,mean_z_tx1,mean_z_tx2,z_bound_tx1,z_bound_tx2,n_trials";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] netmimo::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Command-line flags; every value is optional and overrides the config file.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "simulate", version, about = "Monte Carlo sum-rate sweep for distributed-CSIT precoding")]
pub struct Args {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Uniform quantizer exponent (must exceed 1).
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub snr_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub snr_max: Option<f64>,
    #[arg(long)]
    pub snr_step: Option<f64>,
    /// Codebook draws per SNR point.
    #[arg(long)]
    pub codebooks: Option<usize>,
    /// Channel draws per codebook.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Comma-separated list out of centralized_zf, hap, naive_distributed, scaled_power.
    #[arg(long)]
    pub schemes: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write quantizer and estimate diagnostics next to the results.
    #[arg(long)]
    pub diagnostics: bool,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub experiment: ExperimentConfig,
    pub out_path: PathBuf,
    pub format: Format,
    pub workers: usize,
    pub emit_diagnostics: bool,
}

impl CliConfig {
    /// Path of the diagnostics table: `<out stem>_diagnostics.csv`.
    pub fn diagnostics_path(&self) -> PathBuf {
        let stem = self.out_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.out_path.with_file_name(format!("{stem}_diagnostics.csv"))
    }
}

#[derive(Debug, Clone)]
struct Settings {
    alpha1: f64,
    alpha2: f64,
    k: f64,
    snr_min: f64,
    snr_max: f64,
    snr_step: f64,
    codebooks: usize,
    channels: usize,
    schemes: Vec<Scheme>,
    seed: u64,
    workers: usize,
    out: Option<PathBuf>,
    format: Format,
    diagnostics: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            alpha1: 1.0,
            alpha2: 0.6,
            k: 2.0,
            snr_min: 20.0,
            snr_max: 60.0,
            snr_step: 5.0,
            codebooks: 100,
            channels: 200,
            schemes: Scheme::ALL.to_vec(),
            seed: 42,
            workers: 0,
            out: None,
            format: Format::Csv,
            diagnostics: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| config_err(format!("invalid value for {key}: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(config_err(format!("invalid value for {key}: {value:?}"))),
    }
}

pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let s = Scheme::from_name(name).ok_or_else(|| config_err(format!("unknown scheme {name:?}")))?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(config_err("scheme list is empty"));
    }
    Ok(out)
}

/// Inclusive grid `min, min + step, ..., <= max`.
pub fn snr_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !min.is_finite() || !max.is_finite() {
        return Err(config_err(format!("invalid SNR grid {min}:{step}:{max}")));
    }
    if max < min {
        return Err(config_err(format!("SNR grid {min}:{step}:{max} is empty")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| min + step * i as f64).collect())
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "alpha1" => self.alpha1 = parse_value(key, value)?,
            "alpha2" => self.alpha2 = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "snr_min" => self.snr_min = parse_value(key, value)?,
            "snr_max" => self.snr_max = parse_value(key, value)?,
            "snr_step" => self.snr_step = parse_value(key, value)?,
            "codebooks" => self.codebooks = parse_value(key, value)?,
            "channels" => self.channels = parse_value(key, value)?,
            "schemes" => self.schemes = parse_schemes(value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => {
                self.format = Format::from_str(value, true).map_err(|_| config_err(format!("unknown format {value:?}")))?
            }
            "diagnostics" => self.diagnostics = parse_bool(key, value)?,
            _ => return Err(config_err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim().replace('-', "_");
            self.set(&key, value.trim()).map_err(|e| match e {
                CliError::Config(m) => config_err(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    fn apply_args(&mut self, args: &Args) -> Result<()> {
        macro_rules! take {
            ($($field:ident),*) => {$( if let Some(v) = args.$field { self.$field = v; } )*};
        }
        take!(alpha1, alpha2, k, snr_min, snr_max, snr_step, codebooks, channels, seed, workers);
        if let Some(s) = &args.schemes {
            self.schemes = parse_schemes(s)?;
        }
        if let Some(o) = &args.out {
            self.out = Some(o.clone());
        }
        if let Some(f) = args.format {
            self.format = f;
        }
        self.diagnostics |= args.diagnostics;
        Ok(())
    }

    fn finish(self) -> Result<CliConfig> {
        let alphas = CsitScalingVector::new(self.alpha1, self.alpha2)?;
        if !(self.k > 1.0) {
            return Err(config_err(format!("quantizer exponent k must exceed 1 (got {})", self.k)));
        }
        let experiment = ExperimentConfig {
            alphas,
            quantizer: QuantizerTemplate::uniform(self.k),
            snr_grid_db: snr_grid(self.snr_min, self.snr_max, self.snr_step)?,
            n_codebooks: self.codebooks,
            n_channels_per_codebook: self.channels,
            schemes: self.schemes,
            master_seed: self.seed,
            workers: self.workers,
        };
        experiment.validate()?;
        let out_path = self.out.unwrap_or_else(|| PathBuf::from(format!("results.{}", self.format.extension())));
        Ok(CliConfig { experiment, out_path, format: self.format, workers: self.workers, emit_diagnostics: self.diagnostics })
    }
}

/// Parses configuration file text alone (no flags).
pub fn parse_config_text(text: &str) -> Result<CliConfig> {
    let mut s = Settings::default();
    s.apply_text(text)?;
    s.finish()
}

/// Builds the run configuration from flags and the optional config file.
pub fn parse_config(args: &Args) -> Result<CliConfig> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        let text = read(path)?;
        s.apply_text(&text)?;
    }
    s.apply_args(args)?;
    s.finish()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

/// Formats `x` with six significant digits in the style of C's `%g`.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn rounded(x: f64) -> f64 {
    fmt_g6(x).parse().expect("formatted float parses")
}

fn opt_g6(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_g6)
}

pub fn format_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_g6(p.snr_db),
            p.scheme,
            fmt_g6(p.sum_rate_mean),
            fmt_g6(p.sum_rate_ci95),
            opt_g6(p.pr_omega_c),
            opt_g6(p.bound_thm1),
            p.n_trials,
            p.n_degenerate
        );
    }
    out
}

#[derive(Serialize)]
struct JsonRecord {
    snr_db: f64,
    scheme: Scheme,
    sum_rate_mean: f64,
    sum_rate_ci95: f64,
    pr_omega_c: Option<f64>,
    bound_thm1: Option<f64>,
    n_trials: usize,
    n_degenerate: usize,
}

/// The CSV records as a JSON array, with the same rounding; `NA` becomes null.
pub fn format_json(points: &[SweepPoint]) -> String {
    let records: Vec<JsonRecord> = points
        .iter()
        .map(|p| JsonRecord {
            snr_db: rounded(p.snr_db),
            scheme: p.scheme,
            sum_rate_mean: rounded(p.sum_rate_mean),
            sum_rate_ci95: rounded(p.sum_rate_ci95),
            pr_omega_c: p.pr_omega_c.map(rounded),
            bound_thm1: p.bound_thm1.map(rounded),
            n_trials: p.n_trials,
            n_degenerate: p.n_degenerate,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&records).expect("records serialize");
    s.push('\n');
    s
}

/// Quantizer and estimate diagnostics, one row per grid point.
pub fn diagnostics_csv(cfg: &ExperimentConfig) -> Result<String> {
    let layout = TrialLayout::new(cfg.n_codebooks, cfg.n_channels_per_codebook);
    let stream = RngStream::new(cfg.master_seed, 1);
    let est = EstimatorConfig {
        alphas: cfg.alphas,
        quantizer: cfg.quantizer,
        snr_grid_db: cfg.snr_grid_db.clone(),
        layout,
        stream,
    };
    let (acc1, acc2, cons, conv) = netmimo::evaluation::montecarlo::with_workers(cfg.workers, || {
        Ok::<_, netmimo::Error>((
            estimate_accuracy(&est, 1)?,
            estimate_accuracy(&est, 2)?,
            estimate_consistency(&est)?,
            validate_estimate_convergence(cfg.alphas, &cfg.snr_grid_db, layout, &stream.derive(7))?,
        ))
    })??;
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for i in 0..cfg.snr_grid_db.len() {
        let (a1, a2, c, v) = (&acc1[i], &acc2[i], &cons[i], &conv[i]);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_g6(a1.snr_db),
            opt_g6(a1.step),
            fmt_g6(a1.mean_abs_gap),
            fmt_g6(a2.mean_abs_gap),
            fmt_g6(c.pr_omega_c),
            fmt_g6(c.pr_disagree),
            fmt_g6(c.pr_zero),
            fmt_g6(v.gap_moment),
            fmt_g6(v.ratio),
            v.bits[0],
            v.bits[1],
            fmt_g6(v.mean_z[0]),
            fmt_g6(v.mean_z[1]),
            fmt_g6(v.z_bound[0]),
            fmt_g6(v.z_bound[1]),
            v.n_trials
        );
    }
    Ok(out)
}

/// Rendered results of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub points: Vec<SweepPoint>,
    pub results: String,
    pub diagnostics: Option<String>,
}

/// Runs the sweep and renders the outputs without touching the filesystem.
pub fn execute(cfg: &CliConfig) -> Result<RunOutput> {
    let points = simulate(&cfg.experiment)?.points()?;
    let results = match cfg.format {
        Format::Csv => format_csv(&points),
        Format::Json => format_json(&points),
    };
    let diagnostics = if cfg.emit_diagnostics { Some(diagnostics_csv(&cfg.experiment)?) } else { None };
    Ok(RunOutput { points, results, diagnostics })
}

/// Runs the sweep and writes the results (and diagnostics) files.
pub fn run(cfg: &CliConfig) -> Result<RunOutput> {
    let out = execute(cfg)?;
    write(&cfg.out_path, &out.results)?;
    if let Some(d) = &out.diagnostics {
        write(&cfg.diagnostics_path(), d)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (20.0, "20"),
            (33.44788275132879, "33.4479"),
            (0.07525000000000004, "0.07525"),
            (123456.7, "123457"),
            (999999.7, "1e+06"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (0.5849625007211562, "0.584963"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g6(x), want, "{x}");
        }
    }

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(snr_grid(20.0, 60.0, 5.0).unwrap().len(), 9);
        assert_eq!(snr_grid(0.0, 1.0, 0.1).unwrap().len(), 11);
        assert_eq!(snr_grid(5.0, 5.0, 1.0).unwrap(), vec![5.0]);
        assert!(snr_grid(30.0, 20.0, 5.0).is_err());
        assert!(snr_grid(20.0, 30.0, 0.0).is_err());
    }

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config_text("").unwrap();
        let e = &c.experiment;
        assert_eq!((e.alphas.alpha1, e.alphas.alpha2), (1.0, 0.6));
        assert_eq!(e.quantizer, QuantizerTemplate::uniform(2.0));
        assert_eq!(e.snr_grid_db, (0..9).map(|i| 20.0 + 5.0 * i as f64).collect::<Vec<_>>());
        assert_eq!((e.n_codebooks, e.n_channels_per_codebook), (100, 200));
        assert_eq!(e.schemes, Scheme::ALL.to_vec());
        assert_eq!(e.master_seed, 42);
        assert_eq!(c.workers, 0);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.out_path, PathBuf::from("results.csv"));
        assert!(!c.emit_diagnostics);
    }

    #[test]
    fn text_overrides_and_comments() {
        let c = parse_config_text(
            "# comment\nalpha1 = 0.9\nalpha2=0.5 # inline\nsnr-min = 10\nschemes = hap, centralized_zf\nformat = JSON\ndiagnostics = yes\n",
        )
        .unwrap();
        assert_eq!(c.experiment.alphas.alpha1, 0.9);
        assert_eq!(c.experiment.snr_grid_db[0], 10.0);
        assert_eq!(c.experiment.schemes, vec![Scheme::Hap, Scheme::CentralizedZf]);
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.out_path, PathBuf::from("results.json"));
        assert!(c.emit_diagnostics);
    }

    #[test]
    fn rejections() {
        let msg = parse_config_text("alpha1 = 0.5\nalpha2 = 0.7").unwrap_err().to_string();
        assert!(msg.contains("1 >= alpha1 >= alpha2 > 0"), "{msg}");
        let msg = parse_config_text("k = 1.0").unwrap_err().to_string();
        assert!(msg.contains("k must exceed 1"), "{msg}");
        assert!(parse_config_text("snr_min = 50\nsnr_max = 40").is_err());
        assert!(parse_config_text("schemes = ").is_err());
        assert!(parse_config_text("schemes = dpc").is_err());
        assert!(parse_config_text("bogus = 1").is_err());
        assert!(parse_config_text("alpha1").is_err());
        assert!(parse_config_text("codebooks = 0").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let args = Args::try_parse_from(["simulate", "--alpha2", "0.4", "--seed", "7", "--schemes", "hap", "--snr-min", "-5"])
            .unwrap();
        let mut s = Settings::default();
        s.apply_text("alpha2 = 0.5\nseed = 3").unwrap();
        s.apply_args(&args).unwrap();
        assert_eq!(s.alpha2, 0.4);
        assert_eq!(s.seed, 7);
        assert_eq!(s.snr_min, -5.0);
        assert_eq!(s.schemes, vec![Scheme::Hap]);
    }

    #[test]
    fn diagnostics_path_sits_next_to_results() {
        let mut c = parse_config_text("").unwrap();
        c.out_path = PathBuf::from("/tmp/run/sweep.csv");
        assert_eq!(c.diagnostics_path(), PathBuf::from("/tmp/run/sweep_diagnostics.csv"));
    }
}
