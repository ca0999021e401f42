//! Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if a blocking criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`.
//! Criterion 8 needs the released India-4 files; point `POWERSTATE_INDIA4_DIR`
//! at a directory holding `india-4/harmonics*.csv` (and `ecd*.csv`).

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use powerstate_cli::commands::{self, read_truth, Paths};
use powerstate_cli::PipelineConfig;
use powerstate_core::classify::{f1_score, Averaging};
use powerstate_core::cluster::{assign_nearest, kmeans_fit, silhouette_score, KMeansParams, StateAssignment};
use powerstate_core::frame::TimestampedFrame;
use powerstate_core::impute::{impute_same_timestamp, CellSource, Grid, ImputationPolicy};
use powerstate_core::reduce::{covariance, pca_fit, top_eigenpairs};
use powerstate_core::synth::{inject_gaps, SyntheticProfile};
use powerstate_core::{FeatureMatrix, PhaseMode, DAY_MS};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: u8,
    name: &'static str,
    blocking: bool,
    budget: Duration,
    run: fn() -> Verdict,
}

fn main() {
    let wanted: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria = [
        Criterion { id: 1, name: "silhouette oracle", blocking: true, budget: Duration::from_secs(60), run: silhouette_oracle },
        Criterion { id: 2, name: "k-means fixed points", blocking: true, budget: Duration::from_secs(60), run: kmeans_fixed_points },
        Criterion { id: 3, name: "state recovery", blocking: true, budget: Duration::from_secs(300), run: state_recovery },
        Criterion { id: 4, name: "imputation exactness", blocking: true, budget: Duration::from_secs(60), run: imputation_exactness },
        Criterion { id: 5, name: "pca correctness", blocking: true, budget: Duration::from_secs(60), run: pca_correctness },
        Criterion { id: 6, name: "f1 arithmetic", blocking: true, budget: Duration::from_secs(60), run: f1_arithmetic },
        Criterion { id: 7, name: "end-to-end determinism", blocking: true, budget: Duration::from_secs(300), run: determinism },
        Criterion { id: 8, name: "india-4 reproduction", blocking: false, budget: Duration::from_secs(3600), run: india4 },
    ];
    let mut failed = 0;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let started = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let verdict = match verdict {
            Verdict::Pass(d) if elapsed > c.budget => {
                Verdict::Fail(format!("{d}; exceeded {}s budget", c.budget.as_secs()))
            }
            v => v,
        };
        let (tag, detail) = match &verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => ("FAIL", d),
            Verdict::Skip(d) => ("SKIP", d),
        };
        let kind = if c.blocking { "" } else { " (non-blocking)" };
        println!("criterion {} [{}]{kind}: {tag} | {detail} | {:.1}s", c.id, c.name, elapsed.as_secs_f64());
        if matches!(verdict, Verdict::Fail(_)) && c.blocking {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} blocking criteria failed");
        std::process::exit(1);
    }
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn random_blobs(rng: &mut ChaCha8Rng, rows: usize, dim: usize, g: usize) -> FeatureMatrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let centers: Vec<Vec<f64>> = (0..g).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            let c = &centers[rng.random_range(0..g)];
            c.iter().map(|v| v + normal.sample(rng)).collect()
        })
        .collect();
    FeatureMatrix::from_rows(&data).unwrap()
}

// ---------------------------------------------------------------- 1

/// Textbook O(N^2) silhouette straight from the definition.
fn brute_silhouette(m: &FeatureMatrix, labels: &[usize]) -> f64 {
    let n = m.n_rows();
    let dist = |i: usize, j: usize| -> f64 {
        m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    let clusters: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut total = 0.0;
    for i in 0..n {
        let own: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| dist(i, j)).sum::<f64>() / own.len() as f64;
        let b = clusters
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let s = if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
        total += s;
    }
    total / n as f64
}

fn silhouette_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let rows = rng.random_range(20..=500);
        let dim = rng.random_range(1..=45);
        let g = rng.random_range(2..=8);
        let m = random_blobs(&mut rng, rows, dim, g);
        // Mix k-means labels and random labels so both clean and messy
        // partitions are covered.
        let labels: Vec<usize> = if trial % 2 == 0 {
            kmeans_fit(&m, g, trial, &KMeansParams::default()).unwrap().labels
        } else {
            (0..rows).map(|_| rng.random_range(0..g)).collect()
        };
        let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct < 2 {
            continue;
        }
        let got = silhouette_score(&m, &labels).unwrap();
        worst = worst.max((got - brute_silhouette(&m, &labels)).abs());
    }
    check(worst <= 1e-9, format!("50 matrices, max |diff| = {worst:.2e} (tol 1e-9)"))
}

// ---------------------------------------------------------------- 2

fn kmeans_fixed_points() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_sse: f64 = 0.0;
    let mut worst_n: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut moved = 0;
    for trial in 0..20 {
        let rows = rng.random_range(10..=120);
        let dim = rng.random_range(1..=10);
        let g = rng.random_range(1..=5);
        let m = random_blobs(&mut rng, rows, dim, g);
        // Total SSE about the global mean, computed independently.
        let mean: Vec<f64> = (0..dim).map(|f| m.rows().map(|r| r[f]).sum::<f64>() / rows as f64).collect();
        let sse: f64 = m
            .rows()
            .map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        let one = kmeans_fit(&m, 1, trial, &KMeansParams::default()).unwrap();
        worst_sse = worst_sse.max((one.inertia - sse).abs() / sse.max(f64::MIN_POSITIVE));
        let all = kmeans_fit(&m, rows, trial, &KMeansParams::default()).unwrap();
        worst_n = worst_n.max(all.inertia.abs());

        let k = rng.random_range(2..=6.min(rows));
        let fit = kmeans_fit(&m, k, trial, &KMeansParams::default()).unwrap();
        // Reassign to the nearest centroid (lowest index on ties), then
        // recompute every centroid: neither step may change anything.
        for (i, r) in m.rows().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, cent) in fit.centroids.iter().enumerate() {
                let d: f64 = r.iter().zip(cent).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, c);
                }
            }
            if best.1 != fit.labels[i] {
                moved += 1;
            }
        }
        for (c, cent) in fit.centroids.iter().enumerate() {
            let members: Vec<&[f64]> = m.rows().zip(&fit.labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
            if members.is_empty() {
                continue;
            }
            for f in 0..dim {
                let mu = members.iter().map(|r| r[f]).sum::<f64>() / members.len() as f64;
                worst_mean = worst_mean.max((mu - cent[f]).abs());
            }
        }
    }
    check(
        worst_sse <= 1e-6 && worst_n == 0.0 && moved == 0 && worst_mean <= 1e-9,
        format!(
            "20 matrices: k=1 rel err {worst_sse:.1e}, k=N max inertia {worst_n:e}, reassigned {moved}, centroid drift {worst_mean:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 3

/// Best agreement over injective label maps from predicted to true labels.
fn best_permutation_agreement(pred: &[usize], truth: &[usize]) -> f64 {
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    // dp over predicted labels, mask of used true labels.
    let mut dp = vec![0usize; 1 << kt];
    for row in &counts {
        let mut next = dp.clone();
        for mask in 0..(1usize << kt) {
            for (t, &c) in row.iter().enumerate() {
                if mask & (1 << t) == 0 {
                    let m2 = mask | (1 << t);
                    next[m2] = next[m2].max(dp[mask] + c);
                }
            }
        }
        dp = next;
    }
    *dp.iter().max().unwrap() as f64 / pred.len() as f64
}

fn write_profile(dir: &Path, p: &SyntheticProfile) -> PathBuf {
    let path = dir.join(format!("{}.toml", p.name));
    std::fs::write(&path, toml::to_string(p).unwrap()).unwrap();
    path
}

const RECOVERY_PERIOD_MS: i64 = 120_000;

fn state_recovery() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut worst_agreement: f64 = 1.0;
    let mut all_agreement = Vec::new();
    let mut misses = Vec::new();
    for g in 2..=8usize {
        let mut hits = 0;
        for trial in 0..20u64 {
            let seed = 1000 * g as u64 + trial;
            let mut p = SyntheticProfile::blobs(g, 8.0, seed);
            p.name = format!("blobs-{g}-{trial}");
            // Two-minute rows: 720 per trial keeps 140 full sweeps inside
            // the budget on a single core.
            p.harmonics_period_ms = RECOVERY_PERIOD_MS;
            p.ecd_period_ms = RECOVERY_PERIOD_MS;
            let profile = write_profile(tmp.path(), &p);
            let cfg = PipelineConfig {
                location: p.name.clone(),
                data_dir: tmp.path().join("data"),
                output_dir: tmp.path().join("out"),
                grid_period_ms: RECOVERY_PERIOD_MS,
                resample_period_ms: RECOVERY_PERIOD_MS,
                phase_mode: PhaseMode::ConcatPhases,
                seed,
                ..Default::default()
            };
            commands::synth(&cfg, profile.to_str().unwrap(), 1, None).unwrap();
            let found = commands::discover(&cfg).unwrap();
            let recovered = found.model.k() == g;
            if recovered {
                hits += 1;
            } else {
                misses.push(format!("g={g} seed {seed} chose {}", found.model.k()));
            }
            let m = commands::features(&cfg).unwrap();
            let pred = assign_nearest(&found.model, &m).unwrap();
            let truth = read_truth(&cfg.location_dir().join("truth.csv")).unwrap();
            let by_time: BTreeMap<i64, usize> = truth.timestamps.iter().copied().zip(truth.labels).collect();
            let aligned: Vec<usize> = pred.timestamps.iter().map(|t| by_time[t]).collect();
            let agreement = best_permutation_agreement(&pred.labels, &aligned);
            all_agreement.push(agreement);
            // With the wrong k a perfect match is impossible, so the label
            // bar applies to trials that found the right number of states.
            if recovered {
                worst_agreement = worst_agreement.min(agreement);
            }
        }
        ok &= hits >= 18;
        lines.push(format!("g={g}: {hits}/20"));
    }
    ok &= worst_agreement >= 0.98;
    let mean = all_agreement.iter().sum::<f64>() / all_agreement.len() as f64;
    check(
        ok,
        format!(
            "{}; min agreement when k = g {worst_agreement:.4}, mean over all trials {mean:.4} (need >= 18/20 and >= 0.98); misses: {}",
            lines.join(", "),
            if misses.is_empty() { "none".to_string() } else { misses.join(", ") }
        ),
    )
}

// ---------------------------------------------------------------- 4

const WEEK_CHANNELS: usize = 3;
const AMPLITUDES: [f64; WEEK_CHANNELS] = [10.0, 3.0, 40.0];

/// Day-periodic signal: depends on the time of day only, so every day holds
/// bit-identical values at the same clock time.
fn periodic(tod_ms: i64, c: usize) -> f64 {
    let x = 2.0 * std::f64::consts::PI * tod_ms as f64 / DAY_MS as f64;
    AMPLITUDES[c] * (x + c as f64).sin() + 0.5 * AMPLITUDES[c] * (3.0 * x).cos() + 50.0
}

/// Upper bound of |f''| per channel, in units per ms^2.
fn curvature_bound(c: usize) -> f64 {
    let w = 2.0 * std::f64::consts::PI / DAY_MS as f64;
    AMPLITUDES[c] * w * w + 0.5 * AMPLITUDES[c] * 9.0 * w * w
}

fn slope_bound(c: usize) -> f64 {
    let w = 2.0 * std::f64::consts::PI / DAY_MS as f64;
    AMPLITUDES[c] * w + 0.5 * AMPLITUDES[c] * 3.0 * w
}

fn imputation_exactness() -> Verdict {
    let period = 500;
    let start = 19_000 * DAY_MS;
    let rows = (7 * DAY_MS / period) as usize;
    let ts: Vec<i64> = (0..rows as i64).map(|i| start + i * period).collect();
    let values: Vec<f64> = ts
        .iter()
        .flat_map(|&t| (0..WEEK_CHANNELS).map(move |c| periodic(t.rem_euclid(DAY_MS), c)))
        .collect();
    let names: Vec<String> = (0..WEEK_CHANNELS).map(|c| format!("ch{c}")).collect();
    let original = TimestampedFrame::from_parts(names, ts, values, period).unwrap();
    let gapped = inject_gaps(&original, 0.1029, 120_000, 4);
    let realized = 1.0 - gapped.len() as f64 / original.len() as f64;
    let grid = Grid::new(start, start + 7 * DAY_MS - period, period);

    let mut details = vec![format!("realized gap fraction {realized:.4}")];
    let mut ok = (realized - 0.1029).abs() <= 0.005;
    // The default seven-day horizon, then a one-day horizon that forces the
    // linear fallback on cells whose neighbouring days are also missing.
    for (label, horizon) in [("7-day", 7), ("1-day", 1)] {
        let policy = ImputationPolicy {
            max_lookback_days: horizon,
            max_lookahead_days: horizon,
            ..Default::default()
        };
        let imputed = impute_same_timestamp(&gapped, grid, &policy).unwrap();
        let out = &imputed.frame;
        let (mut donor_bad, mut fallback_bad, mut fallback_n) = (0, 0, 0);
        for c in 0..WEEK_CHANNELS {
            let known: Vec<usize> = (0..out.len())
                .filter(|&i| imputed.sources[i * WEEK_CHANNELS + c] != CellSource::Fallback)
                .collect();
            for i in 0..out.len() {
                let got = out.value(i, c).unwrap();
                let want = original.value(i, c).unwrap();
                match imputed.sources[i * WEEK_CHANNELS + c] {
                    CellSource::Fallback => {
                        fallback_n += 1;
                        let pos = known.partition_point(|&k| k < i);
                        let t = out.timestamps()[i];
                        let bound = match (pos.checked_sub(1).map(|p| known[p]), known.get(pos)) {
                            (Some(p), Some(&q)) => {
                                let h = (out.timestamps()[q] - out.timestamps()[p]) as f64;
                                h * h / 8.0 * curvature_bound(c)
                            }
                            (Some(p), None) => (t - out.timestamps()[p]) as f64 * slope_bound(c),
                            (None, Some(&q)) => (out.timestamps()[q] - t) as f64 * slope_bound(c),
                            (None, None) => 0.0,
                        };
                        if (got - want).abs() > bound + 1e-12 * want.abs() {
                            fallback_bad += 1;
                        }
                    }
                    _ => {
                        if got.to_bits() != want.to_bits() {
                            donor_bad += 1;
                        }
                    }
                }
            }
        }
        ok &= donor_bad == 0 && fallback_bad == 0;
        details.push(format!(
            "{label}: {} two-sided, {} one-sided exact-mismatch {donor_bad}, {fallback_n} fallback out-of-bound {fallback_bad}",
            imputed.count(CellSource::TwoSided),
            imputed.count(CellSource::OneSided)
        ));
    }
    check(ok, details.join("; "))
}

// ---------------------------------------------------------------- 5

/// Cyclic Jacobi eigen-decomposition; returns (values, vectors as rows),
/// sorted by descending value.
fn jacobi(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

fn pca_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (mut value_err, mut vector_err, mut var_err, mut ortho_err): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..50 {
        // Random 5x5 covariance B B^T.
        let b: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| normal.sample(&mut rng)).collect()).collect();
        let cov: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| (0..5).map(|k| b[i][k] * b[j][k]).sum()).collect())
            .collect();
        let (ov, ovec) = jacobi(&cov);
        let (vecs, vals) = top_eigenpairs(&cov, 5);
        for i in 0..5 {
            value_err = value_err.max((vals[i] - ov[i]).abs() / ov[0]);
            let dot: f64 = vecs[i].iter().zip(&ovec[i]).map(|(a, b)| a * b).sum();
            vector_err = vector_err.max(1.0 - dot.abs());
            for j in 0..5 {
                let d: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                ortho_err = ortho_err.max((d - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        // Data with this covariance structure through the public fit.
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let z: Vec<f64> = (0..5).map(|_| normal.sample(&mut rng)).collect();
                (0..5).map(|i| (0..5).map(|k| b[i][k] * z[k]).sum()).collect()
            })
            .collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let model = pca_fit(&m, 2).unwrap();
        let (_, sample_cov) = covariance(&m);
        let (sv, _) = jacobi(&sample_cov);
        for c in 0..2 {
            value_err = value_err.max((model.explained_variance[c] - sv[c]).abs() / sv[0]);
        }
        let z = model.project(&m).unwrap();
        for c in 0..2 {
            let mean = z.iter().map(|r| r[c]).sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
            var_err = var_err.max((var / model.explained_variance[c] - 1.0).abs());
        }
    }
    check(
        value_err <= 1e-6 && vector_err <= 1e-6 && var_err <= 1e-6 && ortho_err <= 1e-9,
        format!(
            "eigenvalue rel err {value_err:.1e}, eigenvector 1-|cos| {vector_err:.1e}, projected variance rel err {var_err:.1e}, orthonormality {ortho_err:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn sa(labels: &[usize]) -> StateAssignment {
    StateAssignment::new((0..labels.len() as i64).collect(), labels.to_vec())
}

fn f1_arithmetic() -> Verdict {
    let mut failures = Vec::new();
    // Binary TP=1, FP=1, FN=1, TN=1.
    let r = f1_score(&sa(&[1, 0, 1, 0]), &sa(&[1, 1, 0, 0]), Averaging::Macro).unwrap();
    if (r.per_class_f1[&0], r.per_class_f1[&1], r.f1) != (0.5, 0.5, 0.5) {
        failures.push("binary 0.5 case");
    }
    // Three classes by hand. truth 0 0 0 1 1 2, pred 0 0 1 1 2 2:
    // class 0: TP 2 FP 0 FN 1 -> 4/5; class 1: TP 1 FP 1 FN 1 -> 1/2;
    // class 2: TP 1 FP 1 FN 0 -> 2/3.
    let r = f1_score(&sa(&[0, 0, 1, 1, 2, 2]), &sa(&[0, 0, 0, 1, 1, 2]), Averaging::Weighted).unwrap();
    let per = [4.0 / 5.0, 1.0 / 2.0, 2.0 / 3.0];
    let macro_ = (per[0] + per[1] + per[2]) / 3.0;
    let weighted = (3.0 * per[0] + 2.0 * per[1] + per[2]) / 6.0;
    if r.per_class_f1.values().copied().collect::<Vec<_>>() != per
        || r.f1_macro != macro_
        || r.f1_weighted != weighted
        || r.f1_micro != 4.0 / 6.0
    {
        failures.push("three-class case");
    }
    if f1_score(&sa(&[2, 2]), &sa(&[2, 2]), Averaging::Macro).unwrap().f1 != 1.0 {
        failures.push("identity");
    }
    if f1_score(&sa(&[0, 0]), &sa(&[1, 1]), Averaging::Macro).unwrap().f1 != 0.0 {
        failures.push("disjoint");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut identity_breaks = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let k = rng.random_range(1..8);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let acc = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / n as f64;
        if f1_score(&sa(&pred), &sa(&truth), Averaging::Micro).unwrap().f1 != acc {
            identity_breaks += 1;
        }
    }
    check(
        failures.is_empty() && identity_breaks == 0,
        format!(
            "hand cases failing: {:?}; micro-F1 != accuracy on {identity_breaks}/100 random pairs",
            failures
        ),
    )
}

// ---------------------------------------------------------------- 7

fn pipeline_config(data: &Path, out: &Path) -> PipelineConfig {
    let d = |day| NaiveDate::from_ymd_opt(2022, 1, day).unwrap();
    let mut cfg = PipelineConfig {
        location: "synthetic-4".into(),
        data_dir: data.to_path_buf(),
        output_dir: out.to_path_buf(),
        grid_period_ms: 30_000,
        phase_mode: PhaseMode::ConcatPhases,
        standardize: true,
        k_max: 10,
        train_start: Some(d(3)),
        train_end: Some(d(4)),
        forest_train_start: Some(d(3)),
        forest_train_end: Some(d(5)),
        eval_dates: vec![d(4), d(5)],
        seed: 7,
        ..Default::default()
    };
    cfg.forest.n_trees = 25;
    cfg
}

fn run_pipeline(cfg: &PipelineConfig, profile: &Path) {
    commands::echo_config(cfg).unwrap();
    commands::synth(cfg, profile.to_str().unwrap(), 3, None).unwrap();
    commands::ingest(cfg).unwrap();
    commands::clean(cfg).unwrap();
    commands::discover(cfg).unwrap();
    commands::assign(cfg).unwrap();
    commands::eval(cfg).unwrap();
}

fn tree_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = SyntheticProfile::blobs(4, 10.0, 77);
    p.name = "synthetic-4".into();
    p.harmonics_period_ms = 30_000;
    p.ecd_period_ms = 60_000;
    p.gap_fraction = 0.05;
    let profile = write_profile(tmp.path(), &p);
    let a = pipeline_config(&tmp.path().join("data-a"), &tmp.path().join("out-a"));
    let b = pipeline_config(&tmp.path().join("data-b"), &tmp.path().join("out-b"));
    // Identical configs apart from where files live.
    let b = PipelineConfig { data_dir: a.data_dir.clone(), ..b };
    run_pipeline(&a, &profile);
    run_pipeline(&b, &profile);
    let fa = tree_files(&a.output_dir);
    let fb = tree_files(&b.output_dir);
    // The config echo records its own output_dir, which is the one
    // intended difference between the runs.
    let echo = PathBuf::from("effective_config.toml");
    let differing: Vec<String> = fa
        .keys()
        .chain(fb.keys().filter(|k| !fa.contains_key(*k)))
        .filter(|k| **k != echo && fa.get(*k) != fb.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let results = fa
        .keys()
        .filter(|k| k.starts_with("results") || k.starts_with("leaderboard"))
        .count();
    let hash = a.hash();
    let unstamped: Vec<String> = fa
        .iter()
        .filter(|(_, bytes)| {
            let text = String::from_utf8_lossy(bytes);
            !(text.contains("powerstate ") && text.contains(&hash) && text.contains('7'))
        })
        .map(|(k, _)| k.display().to_string())
        .collect();
    let leaderboard = String::from_utf8_lossy(&fa[&PathBuf::from("leaderboard/synthetic-4.csv")]).into_owned();
    let rows: Vec<&str> = leaderboard.lines().filter(|l| !l.starts_with('#')).collect();
    let perfect = rows.iter().skip(1).all(|l| {
        l.split(',').skip(1).take(3).all(|v| v.parse::<f64>().unwrap() >= 0.95)
    });
    check(
        differing.is_empty() && unstamped.is_empty() && results >= 8 && rows.len() == 3 && perfect,
        format!(
            "{} files compared ({results} results/leaderboard), differing {:?}, missing provenance {:?}, eval rows {}, all F1 >= 0.95: {perfect}",
            fa.len(),
            differing,
            unstamped,
            rows.len().saturating_sub(1)
        ),
    )
}

// ---------------------------------------------------------------- 8

fn india4() -> Verdict {
    let Ok(dir) = std::env::var("POWERSTATE_INDIA4_DIR") else {
        return Verdict::Skip("POWERSTATE_INDIA4_DIR not set; released India-4 data required".into());
    };
    let d = |m, day| NaiveDate::from_ymd_opt(2022, m, day).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let base = PipelineConfig {
        location: "india-4".into(),
        data_dir: PathBuf::from(dir),
        output_dir: tmp.path().to_path_buf(),
        train_start: Some(d(1, 10)),
        train_end: Some(d(1, 15)),
        forest_train_start: Some(d(1, 3)),
        forest_train_end: Some(d(1, 23)),
        eval_dates: vec![d(1, 20), d(1, 28)],
        ..Default::default()
    };
    let found = match commands::discover(&base) {
        Ok(f) => f,
        Err(e) => return Verdict::Fail(format!("discover: {e}")),
    };
    let k = found.model.k();
    let band = found.sweep.as_ref().map(|s| s.elbow_band).unwrap_or((k, k));
    let rows = match commands::eval(&base) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("eval: {e}")),
    };
    let days = match commands::assign(&base) {
        Ok(d) => d,
        Err(e) => return Verdict::Fail(format!("assign: {e}")),
    };
    let targets = [(0.51, 5usize), (0.67, 4usize)];
    let mut ok = k == 6;
    let mut details = vec![format!("chosen k {k} (band {}..={})", band.0, band.1)];
    for ((row, day), (f1, states)) in rows.iter().zip(&days).zip(targets) {
        let r = &row.report;
        let near = [r.f1_macro, r.f1_micro, r.f1_weighted].iter().any(|v| (v - f1).abs() <= 0.10);
        ok &= near && day.distinct_states == states;
        details.push(format!(
            "{}: F1 macro {:.3} micro {:.3} weighted {:.3} (target {f1}), states {} (target {states})",
            day.date, r.f1_macro, r.f1_micro, r.f1_weighted, day.distinct_states
        ));
    }
    ok &= rows.len() == 2 && days.len() == 2;
    let _ = Paths::leaderboard(&base);
    check(ok, details.join("; "))
}
