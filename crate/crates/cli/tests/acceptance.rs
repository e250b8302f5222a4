//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use netmimo::channel::{sample_channel, sample_cn_vec2};
use netmimo::evaluation::montecarlo::{run_trials, TrialLayout, TrialStreams};
use netmimo::evaluation::{fit_dof_slope, simulate, validate_estimate_convergence, ExperimentConfig, SweepData, SweepPoint};
use netmimo::precoding::{
    build_centralized_zf, build_hap, build_naive_distributed, build_scaled_power_baseline, Scheme,
};
use netmimo::quantizer::{db_to_linear, estimate_consistency, EstimatorConfig, QuantizerSpec, QuantizerTemplate};
use netmimo::rvq::{generate_codebook, quantize_direction, CsitScalingVector};
use netmimo::stats::{ks_p_value, ks_statistic, linear_fit, mean_ci};
use netmimo::{CMat2, RngStream};
use netmimo_cli::{execute, parse_config_text};

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn alphas() -> CsitScalingVector {
    CsitScalingVector::new(1.0, 0.6).unwrap()
}

fn zf_orthogonality() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut check = |h: &CMat2| {
        let zf = build_centralized_zf(h, 1e4).unwrap();
        for i in 0..2 {
            let other = h.row(1 - i);
            let leak = other.row_dot(zf.column(i + 1)).norm() / other.norm();
            worst = worst.max(leak);
        }
        checked += 1;
    };
    // Quantized estimates from the Monte Carlo engine.
    let streams = TrialStreams::for_point(&RngStream::new(11, 0), 0);
    let est = run_trials(alphas(), db_to_linear(40.0), TrialLayout::new(25, 200), &streams, |t| {
        Ok([t.est1.h_hat, t.est2.h_hat])
    })
    .unwrap();
    for pair in &est.values {
        pair.iter().for_each(&mut check);
    }
    // Unnormalized Gaussian matrices.
    for n in 0..10_000u64 {
        check(&sample_channel(&RngStream::new(12, n)).h);
    }
    outcome(worst < 1e-13, format!("{checked} estimates, max |h_other t_i| / |h_other| = {worst:.3e} (limit 1e-13)"))
}

fn power_constraint() -> Outcome {
    let mut violations = [0usize; 4];
    let mut worst = [0.0f64; 4];
    let mut trials = 0;
    for (si, snr) in [5.0, 30.0, 60.0].into_iter().enumerate() {
        let p = db_to_linear(snr);
        let spec = QuantizerTemplate::uniform(2.0).at(0.6, p).unwrap();
        let streams = TrialStreams::for_point(&RngStream::new(13, 0), si);
        let out = run_trials(alphas(), p, TrialLayout::new(50, 200), &streams, |t| {
            Ok([
                build_centralized_zf(&t.est1.h_hat, p)?,
                build_hap(&t.est1.h_hat, &t.est2.h_hat, &spec, p)?.precoder,
                build_naive_distributed(&t.est1.h_hat, &t.est2.h_hat, p)?,
                build_scaled_power_baseline(&t.est1.h_hat, p)?,
            ])
        })
        .unwrap();
        trials += out.values.len();
        for precoders in &out.values {
            for (k, t) in precoders.iter().enumerate() {
                for tx in 1..=2 {
                    let n = t.tx_norm(tx);
                    worst[k] = worst[k].max(n);
                    if n > 1.0 + 1e-12 {
                        violations[k] += 1;
                    }
                }
            }
        }
    }
    let total: usize = violations.iter().sum();
    let detail = Scheme::ALL
        .iter()
        .zip(worst)
        .map(|(s, w)| format!("{s} max {w:.15}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(total == 0, format!("{trials} trials per scheme, {total} violations; {detail}"))
}

fn rvq_order_statistic() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for bits in [2u32, 4, 6, 8, 10] {
        let root = RngStream::new(14, bits as u64);
        let n = 10_000;
        let z: Vec<f64> = (0..n as u64)
            .map(|t| {
                let cb = generate_codebook(bits, &root.derive_path(&[0, t])).unwrap();
                let h = sample_cn_vec2(&mut root.derive_path(&[1, t]).generator()).normalized();
                quantize_direction(&h, &cb).unwrap().error_sq
            })
            .collect();
        let m = mean_ci(&z);
        let size = (1u64 << bits) as f64;
        let exact = 1.0 / (size + 1.0);
        let z_score = (m.mean - exact) / m.std_error();
        let p_ks = ks_p_value(ks_statistic(&z, |x| 1.0 - (1.0 - x).powf(size)), n);
        let ok = z_score.abs() <= 3.0 && m.mean <= 1.0 / size && p_ks >= 0.01;
        pass &= ok;
        parts.push(format!(
            "B={bits}: mean {:.4e} vs {:.4e} ({z_score:+.2} se), 2^-B {:.4e}{}, KS p {p_ks:.3}",
            m.mean,
            exact,
            1.0 / size,
            if m.mean <= 1.0 / size { "" } else { " EXCEEDED" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn quantizer_laws() -> Outcome {
    let mut violations = 0usize;
    let mut checks = 0usize;
    for k in [1.5, 2.0, 4.0] {
        for snr in 20..=60 {
            let spec = QuantizerSpec::uniform(k, 0.6, db_to_linear(snr as f64)).unwrap();
            let step = spec.step().unwrap();
            let mut xs: Vec<f64> = (0..=100_000).map(|i| i as f64 / 100_000.0).collect();
            // Points straddling every cell edge.
            let mut edge = step;
            while edge <= 1.0 {
                for d in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                    let x = edge + d * f64::EPSILON * edge;
                    if (0.0..=1.0).contains(&x) {
                        xs.push(x);
                    }
                }
                edge += step;
            }
            for x in xs {
                let q = spec.quantize(x).unwrap().value;
                checks += 1;
                if !(q <= x && q > x - step) {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{checks} grid checks, {violations} violations"))
}

fn consistency_decay() -> Outcome {
    let grid = vec![20.0, 30.0, 40.0, 50.0, 60.0];
    let cfg = EstimatorConfig {
        alphas: alphas(),
        quantizer: QuantizerTemplate::uniform(2.0),
        snr_grid_db: grid.clone(),
        layout: TrialLayout::new(100, 200),
        stream: RngStream::new(15, 0),
    };
    let rows = estimate_consistency(&cfg).unwrap();
    let x: Vec<f64> = grid.iter().map(|&d| db_to_linear(d)).collect();
    let y: Vec<f64> = rows.iter().zip(&x).map(|(r, p)| r.pr_omega_c * p.log2()).collect();
    let (slope, _) = linear_fit(&x, &y).unwrap();
    let table: Vec<String> = rows.iter().zip(&y).map(|(r, v)| format!("{}dB {:.4}", r.snr_db, v)).collect();
    outcome(slope < 0.0, format!("Pr(Omega^c) log2 P: {}; slope vs P {slope:.3e}", table.join(", ")))
}

fn scheme_points(points: &[SweepPoint], s: Scheme) -> Vec<SweepPoint> {
    points.iter().filter(|p| p.scheme == s).copied().collect()
}

fn at(points: &[SweepPoint], s: Scheme, snr: f64) -> SweepPoint {
    *points.iter().find(|p| p.scheme == s && p.snr_db == snr).expect("grid point present")
}

fn vanishing_gap(data: &SweepData) -> Outcome {
    let gaps = data.rate_gaps();
    let g = |snr: f64| gaps.iter().find(|g| g.snr_db == snr).unwrap();
    let trend = g(50.0).gap < g(20.0).gap;
    let floor = gaps.iter().all(|g| g.gap >= -3.0 * g.ci95);
    let table: Vec<String> = gaps.iter().map(|g| format!("{}dB {:.3}+-{:.3}", g.snr_db, g.gap, g.ci95)).collect();
    outcome(trend && floor, format!("gap {}", table.join(", ")))
}

fn bound_domination(data: &SweepData) -> Outcome {
    let gaps = data.rate_gaps();
    let bounds = data.bounds().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (g, b) in gaps.iter().zip(&bounds) {
        let slack = 3.0 * (g.ci95.powi(2) + b.ci95.powi(2)).sqrt();
        pass &= g.gap <= b.value + slack;
        parts.push(format!("{}dB {:.3} <= {:.3}", g.snr_db, g.gap, b.value));
    }
    outcome(pass, parts.join(", "))
}

fn dof_slopes(points: &[SweepPoint]) -> Outcome {
    let slope = |s| fit_dof_slope(&scheme_points(points, s), 40.0..=60.0).unwrap();
    let checks = [
        (Scheme::Hap, 2.0, 0.2),
        (Scheme::CentralizedZf, 2.0, 0.2),
        (Scheme::NaiveDistributed, 1.6, 0.2),
        (Scheme::ScaledPower, 2.0, 0.25),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (s, target, tol) in checks {
        let v = slope(s);
        let ok = (v - target).abs() <= tol;
        pass &= ok;
        parts.push(format!("{s} {v:.3} (want {target}+-{tol}{})", if ok { "" } else { ", OUT" }));
    }
    let (hap, sp) = (at(points, Scheme::Hap, 60.0), at(points, Scheme::ScaledPower, 60.0));
    let below = sp.sum_rate_mean + sp.sum_rate_ci95 < hap.sum_rate_mean - hap.sum_rate_ci95;
    pass &= below;
    parts.push(format!("60dB scaled_power {:.3} vs hap {:.3}", sp.sum_rate_mean, hap.sum_rate_mean));
    outcome(pass, parts.join(", "))
}

fn curve_ordering(points: &[SweepPoint]) -> Outcome {
    let p = |s| at(points, s, 60.0);
    let (zf, hap, naive, sp) =
        (p(Scheme::CentralizedZf), p(Scheme::Hap), p(Scheme::NaiveDistributed), p(Scheme::ScaledPower));
    let above = |a: SweepPoint, b: SweepPoint| a.sum_rate_mean - a.sum_rate_ci95 > b.sum_rate_mean + b.sum_rate_ci95;
    let pass = above(zf, hap) && above(hap, sp) && above(hap, naive);
    let fmt = |x: SweepPoint| format!("{} {:.3}+-{:.3}", x.scheme, x.sum_rate_mean, x.sum_rate_ci95);
    outcome(pass, format!("60dB: {}, {}, {}, {}", fmt(zf), fmt(hap), fmt(sp), fmt(naive)))
}

fn moment_bound() -> Outcome {
    let grid: Vec<f64> = (0..9).map(|i| 20.0 + 5.0 * i as f64).collect();
    let rows = validate_estimate_convergence(alphas(), &grid, TrialLayout::new(50, 200), &RngStream::new(16, 0)).unwrap();
    let bounded = rows.iter().all(|r| r.ratio <= 128.0);
    let shrinking = rows.windows(2).all(|w| w[1].gap_moment < w[0].gap_moment);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let table: Vec<String> = rows.iter().map(|r| format!("{}dB {:.3e}", r.snr_db, r.gap_moment)).collect();
    outcome(bounded && shrinking, format!("max ratio {max_ratio:.2} (limit 128); gap moment {}", table.join(", ")))
}

fn determinism() -> Outcome {
    let render = |workers: usize| {
        let mut cfg = parse_config_text("snr_min = 20\nsnr_max = 60\nsnr_step = 10\ncodebooks = 8\nchannels = 25").unwrap();
        cfg.workers = workers;
        cfg.experiment.workers = workers;
        execute(&cfg).unwrap().results
    };
    let one = render(1);
    let same = [4, 8].iter().all(|&w| render(w) == one);
    outcome(same, format!("{} bytes, identical at 1/4/8 workers: {same}", one.len()))
}

fn main() {
    let start = Instant::now();
    let sweep = simulate(&ExperimentConfig::default()).expect("default sweep runs");
    let points = sweep.points().unwrap();

    let criteria: Vec<(&str, Check)> = vec![
        ("ZF orthogonality", Box::new(zf_orthogonality)),
        ("per-TX power constraint", Box::new(power_constraint)),
        ("RVQ order statistic", Box::new(rvq_order_statistic)),
        ("uniform quantizer laws", Box::new(quantizer_laws)),
        ("consistency decay", Box::new(consistency_decay)),
        ("vanishing rate gap", Box::new(|| vanishing_gap(&sweep))),
        ("bound domination", Box::new(|| bound_domination(&sweep))),
        ("DoF slope fits", Box::new(|| dof_slopes(&points))),
        ("curve ordering at 60 dB", Box::new(|| curve_ordering(&points))),
        ("estimate moment bound", Box::new(moment_bound)),
        ("determinism across workers", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.0}s total)",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
