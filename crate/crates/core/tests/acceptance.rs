//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always print; exits non-zero on any FAIL.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use realism_core::agreement::{
    bootstrap_ci, cohen_kappa, fleiss_kappa, BootstrapSettings, ConfidenceInterval, Kappa,
    RatingTable,
};
use realism_core::analysis::{
    default_subsets, fixtures, jury_subset_rankings, rank_methods, select_divergent_cases,
    AcceptanceSummary, MethodSummary, RankingKey, ResampleUnit, SummarySettings, Unanimity,
};
use realism_core::failure::{bucket_distribution, Bucket, FailureClassification};
use realism_core::fixture::write_fixture;
use realism_core::jury::{AcceptanceRate, CallStatus, ItemKind, Verdict};
use realism_core::metrics::{
    best_method_ratios, fit_gaussian, mahalanobis_distance, relative_mahalanobis,
    ConditionDistanceSummary, DistanceScore, GaussianLabel, GaussianModel,
};
use realism_core::pipeline::{build_transport, run_pipeline, PipelineConfig, Stage};
use realism_core::store::emb1::{decode, encode, RawEmbeddings};
use realism_core::store::{read_embeddings, write_embeddings, EmbeddingMatrix};
use realism_core::types::{Condition, Method, ModelId, Scope};

// Tolerances and budgets.
const MAHALANOBIS_REL_TOL: f64 = 1e-9;
const MAHALANOBIS_BUDGET: Duration = Duration::from_secs(5);
const SEPARATION_SE: f64 = 5.0;
const KAPPA_EXACT_TOL: f64 = 1e-12;
const FLEISS_TOL: f64 = 1e-9;
const RANDOM_KAPPA_MAX: f64 = 0.05;
const EXHAUSTIVE_TOL: f64 = 0.01;
const COVERAGE_RANGE: (f64, f64) = (0.90, 0.98);
const BOOTSTRAP_BUDGET: Duration = Duration::from_secs(60);
const BEST_RATIO_TOL: f64 = 0.01;
const PERCENT_TOL: f64 = 0.05;
const DISTANCE_RATIO_TOL: f64 = 0.05;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..d).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..d {
        let p = (col..d)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, p);
        let pivot = m[col][col];
        for v in &mut m[col] {
            *v /= pivot;
        }
        for r in 0..d {
            if r != col {
                let f = m[r][col];
                let src = m[col].clone();
                for (v, s) in m[r].iter_mut().zip(src) {
                    *v -= f * s;
                }
            }
        }
    }
    m.into_iter().map(|r| r[d..].to_vec()).collect()
}

fn mahalanobis_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..100 {
        let d = rng.random_range(1..=8);
        let b: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let bbt: f64 = (0..d).map(|k| b[i][k] * b[j][k]).sum();
                        bbt + if i == j { 0.5 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let mean: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let model = GaussianModel::from_moments(
            GaussianLabel::Background,
            DVector::from_vec(mean.clone()),
            DMatrix::from_fn(d, d, |i, j| cov[i][j]),
            Some(0.0),
        )
        .map_err(|e| e.to_string())?;
        check(model.ridge() == 0.0, || "SPD fixture needed a ridge".into())?;
        let inv = invert(&cov);
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| 3.0 * normal(&mut rng)).collect();
            let diff: Vec<f64> = x.iter().zip(&mean).map(|(a, m)| a - m).collect();
            let q: f64 = (0..d)
                .map(|i| (0..d).map(|j| diff[i] * inv[i][j] * diff[j]).sum::<f64>())
                .sum();
            let oracle = q.sqrt();
            let got = mahalanobis_distance(&x, &model).map_err(|e| e.to_string())?;
            worst = worst.max((got - oracle).abs() / oracle);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    check(worst <= MAHALANOBIS_REL_TOL, || format!("max relative error {worst:.2e}"))?;
    check(elapsed < MAHALANOBIS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("100 fixtures, {checked} points, max rel err {worst:.1e}, {elapsed:.2?}"))
}

fn relative_semantics() -> Outcome {
    let (d, n) = (16, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal(&mut rng) / 4.0).collect()).collect();
    let draw = |rng: &mut ChaCha8Rng, shift: f64| -> Vec<f64> {
        let z: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        (0..d)
            .map(|i| shift + z[i] + (0..d).map(|k| a[i][k] * z[k]).sum::<f64>())
            .collect()
    };
    let target_fit: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng, 0.0)).collect();
    let off_fit: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng, 1.5)).collect();
    let pooled: Vec<Vec<f64>> = target_fit.iter().chain(&off_fit).cloned().collect();
    let err = |e: realism_core::metrics::MetricsError| e.to_string();
    let target = fit_gaussian(&target_fit, GaussianLabel::Condition(Condition::Fog), None).map_err(err)?;
    let background = fit_gaussian(&pooled, GaussianLabel::Background, None).map_err(err)?;
    let mut score = |shift: f64| -> Result<Vec<DistanceScore>, String> {
        (0..n)
            .map(|i| {
                let x = draw(&mut rng, shift);
                relative_mahalanobis(&format!("{i}"), Condition::Fog, &x, &target, &background)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let on = score(0.0)?;
    let off = score(1.5)?;
    for s in on.iter().chain(&off) {
        check((s.d_target - s.d_background).to_bits() == s.d_rel.to_bits(), || {
            format!("identity broken for {}", s.image_id)
        })?;
        check((-s.d_rel).to_bits() == s.reported.to_bits(), || "reported != -d_rel".into())?;
    }
    let stats = |v: &[DistanceScore]| {
        let m = v.iter().map(|s| s.d_rel).sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|s| (s.d_rel - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
        (m, var)
    };
    let ((m_on, v_on), (m_off, v_off)) = (stats(&on), stats(&off));
    let se = (v_on / n as f64 + v_off / n as f64).sqrt();
    let gap = (m_off - m_on) / se;
    check(gap >= SEPARATION_SE, || format!("gap only {gap:.1} SE"))?;
    Ok(format!("mean d_rel {m_on:.2} vs {m_off:.2}, gap {gap:.0} SE, identity bitwise on {}", 2 * n))
}

fn kappa_oracles() -> Outcome {
    // 20 tables (both yes, first only, second only, both no)
    let mut tables = Vec::new();
    'outer: for a in 0..6u64 {
        for b in 0..5u64 {
            for c in 0..5u64 {
                for d in 0..6u64 {
                    let denom = (a + b) * (b + d) + (a + c) * (c + d);
                    if denom > 0 && (a * 7 + b * 5 + c * 3 + d) % 13 == 0 {
                        tables.push([a, b, c, d]);
                        if tables.len() == 20 {
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    check(tables.len() == 20, || "could not enumerate 20 tables".into())?;
    for &[a, b, c, d] in &tables {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (n, (p, q)) in [(a, (true, true)), (b, (true, false)), (c, (false, true)), (d, (false, false))] {
            for _ in 0..n {
                x.push(Some(p));
                y.push(Some(q));
            }
        }
        let k = cohen_kappa(&x, &y).map_err(|e| e.to_string())?;
        let oracle = 2.0 * (a as f64 * d as f64 - b as f64 * c as f64)
            / ((a + b) * (b + d) + (a + c) * (c + d)) as f64;
        let got = k.value().ok_or_else(|| format!("table {:?} reported degenerate", [a, b, c, d]))?;
        check((got - oracle).abs() <= KAPPA_EXACT_TOL, || {
            format!("table {:?}: {got} vs {oracle}", [a, b, c, d])
        })?;
    }

    // 3 raters, 4 items with 3, 0, 3 and 1 "yes" votes:
    // P_i = 1, 1, 1, 1/3 so P̄ = 5/6; p_yes = 7/12 so P_e = 74/144;
    // κ = (120/144 − 74/144) / (70/144) = 23/35.
    let votes = [3, 0, 3, 1];
    let labels: Vec<Vec<Option<bool>>> =
        votes.iter().map(|&t| (0..3).map(|r| Some(r < t)).collect()).collect();
    let items: Vec<String> = (0..4).map(|i| format!("i{i}")).collect();
    let raters: Vec<String> = ["r1", "r2", "r3"].iter().map(|s| s.to_string()).collect();
    let table = RatingTable::new(items, raters, labels).map_err(|e| e.to_string())?;
    let fleiss = fleiss_kappa(&table).map_err(|e| e.to_string())?.kappa.value().unwrap_or(f64::NAN);
    check((fleiss - 23.0 / 35.0).abs() <= FLEISS_TOL, || format!("fleiss {fleiss} vs 23/35"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let cols: Vec<Vec<Option<bool>>> = (0..3).map(|_| (0..n).map(|_| Some(rng.random_bool(0.5))).collect()).collect();
    let random_cohen = cohen_kappa(&cols[0], &cols[1]).map_err(|e| e.to_string())?.value().unwrap_or(f64::NAN);
    let rows: Vec<Vec<Option<bool>>> = (0..n).map(|i| (0..3).map(|r| cols[r][i]).collect()).collect();
    let table = RatingTable::new(
        (0..n).map(|i| i.to_string()).collect(),
        vec!["a".into(), "b".into(), "c".into()],
        rows,
    )
    .map_err(|e| e.to_string())?;
    let random_fleiss = fleiss_kappa(&table).map_err(|e| e.to_string())?.kappa.value().unwrap_or(f64::NAN);
    check(random_cohen.abs() < RANDOM_KAPPA_MAX && random_fleiss.abs() < RANDOM_KAPPA_MAX, || {
        format!("random ratings gave cohen {random_cohen:.3}, fleiss {random_fleiss:.3}")
    })?;
    let unanimous = cohen_kappa(&[Some(true); 5], &[Some(true); 5]).map_err(|e| e.to_string())?;
    check(matches!(unanimous, Kappa::Degenerate { .. }), || "all-yes raters not degenerate".into())?;
    Ok(format!(
        "20 tables exact, fleiss {fleiss:.6} = 23/35, random cohen {random_cohen:+.3} fleiss {random_fleiss:+.3}"
    ))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn bootstrap_checks() -> Outcome {
    let start = Instant::now();
    let err = |e: realism_core::agreement::StatError| e.to_string();
    let constant = bootstrap_ci(&[0.25; 40], &BootstrapSettings::new(4)).map_err(err)?;
    check(constant.lo == constant.hi && constant.lo == 0.25, || format!("constant CI {constant:?}"))?;

    let xs = [0.0, 0.13, 0.37, 0.61, 1.0];
    let mut means = Vec::with_capacity(3125);
    for code in 0..3125usize {
        let mut c = code;
        let mut sum = 0.0;
        for _ in 0..5 {
            sum += xs[c % 5];
            c /= 5;
        }
        means.push(sum / 5.0);
    }
    means.sort_by(f64::total_cmp);
    let (olo, ohi) = (percentile(&means, 0.025), percentile(&means, 0.975));
    let settings = BootstrapSettings {
        replicates: 20_000,
        ..BootstrapSettings::new(5)
    };
    let ci = bootstrap_ci(&xs, &settings).map_err(err)?;
    let gap = (ci.lo - olo).abs().max((ci.hi - ohi).abs());
    check(gap <= EXHAUSTIVE_TOL, || {
        format!("[{:.4}, {:.4}] vs exhaustive [{olo:.4}, {ohi:.4}]", ci.lo, ci.hi)
    })?;

    let again = bootstrap_ci(&xs, &settings).map_err(err)?;
    check(again.lo.to_bits() == ci.lo.to_bits() && again.hi.to_bits() == ci.hi.to_bits(), || {
        "same seed, different CI".into()
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trials = 500;
    let mut covered = 0;
    for t in 0..trials {
        let sample: Vec<f64> = (0..120).map(|_| f64::from(u8::from(rng.random_bool(0.75)))).collect();
        let s = BootstrapSettings {
            replicates: 2000,
            ..BootstrapSettings::new(1000 + t as u64)
        };
        covered += usize::from(bootstrap_ci(&sample, &s).map_err(err)?.contains(0.75));
    }
    let coverage = covered as f64 / trials as f64;
    check(coverage >= COVERAGE_RANGE.0 && coverage <= COVERAGE_RANGE.1, || {
        format!("coverage {coverage:.3}")
    })?;
    let elapsed = start.elapsed();
    check(elapsed < BOOTSTRAP_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "zero width on constant, max gap to 5^5 oracle {gap:.4}, coverage {:.1}%, bit-identical, {elapsed:.1?}",
        coverage * 100.0
    ))
}

fn mock_jury() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = write_fixture(dir.path())?;
    let config = PipelineConfig::load(&fx.config).map_err(|e| e.to_string())?;
    let stages = [Stage::Judge, Stage::Baseline, Stage::Report];
    let cold = build_transport(&config).map_err(|e| e.to_string())?;
    run_pipeline(&config, &stages, &cold).map_err(|e| e.to_string())?;
    let json = fs::read(config.output("report.json")).map_err(|e| e.to_string())?;
    let text = fs::read(config.output("report.txt")).map_err(|e| e.to_string())?;
    let report: Value = serde_json::from_slice(&json).map_err(|e| e.to_string())?;

    // Hand count: per condition, accepts summed over the three judges'
    // quotas out of 10 images each; mock:c never answers aug-imgaug-fog-9
    // (a rejection in its quota), so that cell is 6 of 29 with one drop.
    #[allow(clippy::identity_op)]
    let per_condition = [
        (Method::Qwen, 9 + 8 + 10),
        (Method::Gemini, 8 + 7 + 9),
        (Method::Openai, 7 + 5 + 7),
        (Method::Flux, 4 + 3 + 5),
        (Method::Imgaug, 2 + 1 + 3),
        (Method::Albumentations, 1 + 0 + 2),
    ];
    let rows = report["acceptance"].as_array().ok_or("no acceptance section")?;
    let mut cells = 0;
    for (method, accepted) in per_condition {
        for scope in Scope::ALL {
            let (acc, ev, dropped) = match scope {
                Scope::Condition(Condition::Fog) if method == Method::Imgaug => (accepted, 29, 1),
                Scope::Condition(_) => (accepted, 30, 0),
                Scope::Overall if method == Method::Imgaug => (4 * accepted, 119, 1),
                Scope::Overall => (4 * accepted, 120, 0),
            };
            let row = rows
                .iter()
                .find(|r| r["method"] == method.as_str() && r["scope"] == scope.to_string())
                .ok_or_else(|| format!("no row for {method}/{scope}"))?;
            let found = (row["accepted"].as_u64(), row["evaluated"].as_u64(), row["dropped"].as_u64());
            check(found == (Some(acc as u64), Some(ev), Some(dropped)), || {
                format!("{method}/{scope}: {found:?}, expected {acc}/{ev} with {dropped} dropped")
            })?;
            let rate = row["rate"].as_f64().unwrap_or(f64::NAN);
            let exact = acc as f64 / ev as f64;
            check((rate - exact).abs() < 5e-4, || format!("{method}/{scope}: rate {rate} vs {exact}"))?;
            cells += 1;
        }
    }
    let drops = report["meta"]["drops"].as_array().ok_or("no drop counts")?;
    let parse_errors: u64 = drops.iter().filter_map(|d| d["parse_errors"].as_u64()).sum();
    check(parse_errors == 1, || format!("{parse_errors} parse errors reported"))?;

    let warm = build_transport(&config).map_err(|e| e.to_string())?;
    run_pipeline(&config, &stages, &warm).map_err(|e| e.to_string())?;
    check(warm.mock.calls() == 0, || format!("warm rerun made {} calls", warm.mock.calls()))?;
    let same = fs::read(config.output("report.json")).map_err(|e| e.to_string())? == json
        && fs::read(config.output("report.txt")).map_err(|e| e.to_string())? == text;
    check(same, || "warm rerun changed the report".into())?;
    Ok(format!(
        "{cells} cells exact, 1 parse drop excluded, cold {} calls, warm 0 calls, report byte-identical",
        cold.mock.calls()
    ))
}

fn summary(method: Method, rate: f64) -> MethodSummary {
    MethodSummary {
        method,
        scope: Scope::Overall,
        acceptance: Some(AcceptanceSummary {
            rate: AcceptanceRate {
                accepted: 0,
                evaluated: 0,
                dropped: 0,
                rate,
            },
            ci: ConfidenceInterval::exact(rate),
        }),
        distances: BTreeMap::new(),
    }
}

fn classification(i: usize, semantic: bool, realism: bool) -> FailureClassification {
    FailureClassification {
        item_id: format!("img-{i}"),
        vlm_judge_id: "gemini".into(),
        llm_judge_id: "mock:x".into(),
        condition: Condition::ADVERSE[i % 4],
        method: Some(Method::ALL[i % 6]),
        semantic: Some(semantic),
        realism: Some(realism),
        status: CallStatus::Ok,
        attempts: 1,
        prompt_hash: String::new(),
        timestamp_ms: 0,
    }
}

fn published() -> Result<Value, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/published_summaries.json");
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn paper_arithmetic() -> Outcome {
    let p = published()?;
    let f = |v: &Value| v.as_f64().ok_or_else(|| format!("not a number: {v}"));

    let table = p["full_jury_acceptance"].as_object().ok_or("no acceptance table")?;
    let summaries = table
        .iter()
        .map(|(m, v)| Ok(summary(m.parse::<Method>().map_err(|e| e.to_string())?, f(v)?)))
        .collect::<Result<Vec<_>, String>>()?;
    let ranking = rank_methods(&summaries, RankingKey::Acceptance).map_err(|e| e.to_string())?;
    let order = ranking.order();
    let expected = [Method::Qwen, Method::Gemini, Method::Openai, Method::Flux, Method::Imgaug, Method::Albumentations];
    check(order == expected, || format!("order {order:?}"))?;
    let ranks: Vec<usize> = ranking.entries.iter().map(|e| e.rank).collect();
    check(ranks[..5] == [1, 2, 3, 4, 5] && ranks[5] >= 5, || format!("ranks {ranks:?}"))?;
    let ratio = ranking.best_vs_best.and_then(|b| b.ratio).ok_or("no best-vs-best ratio")?;
    check((ratio - f(&p["best_vs_best_ratio"])?).abs() <= BEST_RATIO_TOL, || format!("ratio {ratio}"))?;

    let fb = &p["failure_buckets"];
    let count = |k: &str| fb[k].as_u64().map(|n| n as usize).ok_or_else(|| format!("no count {k}"));
    let mut list = Vec::new();
    for (bucket, (s, r)) in [
        ("both", (true, true)),
        ("semantic_only", (true, false)),
        ("realism_only", (false, true)),
        ("neither", (false, false)),
    ] {
        for _ in 0..count(bucket)? {
            list.push(classification(list.len(), s, r));
        }
    }
    let dist = bucket_distribution(&list).map_err(|e| e.to_string())?.overall;
    check(dist.total == 3108, || format!("total {}", dist.total))?;
    let mut shown = Vec::new();
    for b in [Bucket::RealismOnly, Bucket::Both, Bucket::SemanticOnly, Bucket::Neither] {
        let pct = dist.percent(b);
        let want = f(&fb["percent"][b.as_str()])?;
        check((pct - want).abs() <= PERCENT_TOL, || format!("{}: {pct:.2}% vs {want}%", b.as_str()))?;
        shown.push(format!("{pct:.1}"));
    }

    let night = &p["night_best_vs_baseline"];
    let method: Method = night["method"].as_str().unwrap_or("").parse().map_err(|e: realism_core::types::UnknownVariant| e.to_string())?;
    let means = BTreeMap::from([((method, Condition::Night), f(&night["method_mean_d_rel"])?)]);
    let base = f(&night["baseline_mean_d_rel"])?;
    let baselines = [ConditionDistanceSummary {
        condition: Condition::Night,
        n: 1,
        mean_d_rel: base,
        ci: ConfidenceInterval::exact(base),
    }];
    let r = best_method_ratios(&means, &baselines);
    let dist_ratio = r.first().and_then(|r| r.ratio).ok_or("no distance ratio")?;
    check((dist_ratio - f(&night["ratio"])?).abs() <= DISTANCE_RATIO_TOL, || format!("distance ratio {dist_ratio}"))?;
    Ok(format!(
        "best-vs-best {ratio:.2}, buckets {}, night ratio {dist_ratio:.1}, ordering reproduced",
        shown.join("/")
    ))
}

fn robustness() -> Outcome {
    let settings = SummarySettings {
        bootstrap: BootstrapSettings {
            replicates: 500,
            ..BootstrapSettings::new(7)
        },
        resample: ResampleUnit::Judgments,
    };
    let judges: Vec<String> = fixtures::JUDGES.iter().map(|s| s.to_string()).collect();
    let subsets = default_subsets(&judges);
    let err = |e: realism_core::analysis::AnalysisError| e.to_string();
    let calm = jury_subset_rankings(&fixtures::uniform_conservative(), &subsets, 4, &settings).map_err(err)?;
    let flipped =
        jury_subset_rankings(&fixtures::decision_inverting(Method::Qwen), &subsets, 4, &settings).map_err(err)?;
    check(calm.stable, || "conservative judge broke stability".into())?;
    check(!flipped.stable, || "inverting judge left the ranking stable".into())?;
    Ok(format!("{} subsets: conservative stable, inverting unstable", subsets.len()))
}

fn pair_verdict(item: usize, judge: &str, condition: Condition, decision: bool) -> Verdict {
    Verdict {
        item_id: format!("img-{item:04}"),
        judge_id: judge.to_string(),
        kind: ItemKind::Pair,
        condition,
        method: Some(Method::ALL[item % 6]),
        decision: Some(decision),
        explanation: String::new(),
        status: CallStatus::Ok,
        attempts: 1,
        prompt_hash: String::new(),
        timestamp_ms: 0,
    }
}

fn divergence_census() -> Outcome {
    let p = published()?;
    let c = &p["unanimity_census"];
    let n = |k: &str| c[k].as_u64().map(|v| v as usize).ok_or_else(|| format!("no {k}"));
    let (total, accept, reject) = (n("total")?, n("all_accept")?, n("all_reject")?);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut verdicts = Vec::new();
    let mut scores = Vec::new();
    let mut truth: HashMap<String, (Condition, Option<Unanimity>, f64)> = HashMap::new();
    for i in 0..total {
        let condition = Condition::ADVERSE[i % 4];
        let kind = if i < accept {
            Some(Unanimity::AllAccept)
        } else if i < accept + reject {
            Some(Unanimity::AllReject)
        } else {
            None
        };
        let votes = match kind {
            Some(Unanimity::AllAccept) => [true; 3],
            Some(Unanimity::AllReject) => [false; 3],
            None => [true, false, i % 2 == 0],
        };
        for (j, v) in ["a", "b", "c"].iter().zip(votes) {
            verdicts.push(pair_verdict(i, j, condition, v));
        }
        // coarse values so ties occur and the id tie-break matters
        let d_rel = f64::from(rng.random_range(0..200u32)) / 4.0;
        let id = format!("img-{i:04}");
        scores.push(DistanceScore {
            image_id: id.clone(),
            condition,
            d_target: d_rel + 10.0,
            d_background: 10.0,
            d_rel,
            reported: -d_rel,
        });
        truth.insert(id, (condition, kind, d_rel));
    }
    let top_k = 3;
    let result = select_divergent_cases(&verdicts, &scores, top_k).map_err(|e| e.to_string())?;
    let census = result.census;
    let pct = 100.0 * census.all_accept_fraction;
    check((pct - c["all_accept_percent"].as_f64().unwrap_or(f64::NAN)).abs() <= PERCENT_TOL, || {
        format!("unanimous accept {pct:.2}%")
    })?;
    check(census.all_reject == reject && census.mixed == n("mixed")?, || format!("census {census:?}"))?;

    // brute force: repeatedly take the extreme remaining item by linear scan
    let mut expected = Vec::new();
    for condition in Condition::ADVERSE {
        for u in [Unanimity::AllAccept, Unanimity::AllReject] {
            let mut pool: Vec<(&String, f64)> = truth
                .iter()
                .filter(|(_, t)| t.0 == condition && t.1 == Some(u))
                .map(|(id, t)| (id, t.2))
                .collect();
            for rank in 1..=top_k {
                let mut best = 0;
                for k in 1..pool.len() {
                    let better = match u {
                        Unanimity::AllAccept => pool[k].1 > pool[best].1,
                        Unanimity::AllReject => pool[k].1 < pool[best].1,
                    };
                    if better || (pool[k].1 == pool[best].1 && pool[k].0 < pool[best].0) {
                        best = k;
                    }
                }
                let (id, _) = pool.swap_remove(best);
                expected.push((condition, u, rank, id.clone()));
            }
        }
    }
    expected.sort();
    let mut got: Vec<(Condition, Unanimity, usize, String)> = result
        .cases
        .iter()
        .map(|c| (c.condition, c.unanimity, c.rank_within_category, c.image_id.clone()))
        .collect();
    got.sort();
    check(got == expected, || "selected cases differ from brute force".into())?;
    Ok(format!("{accept}/{total} unanimous accept = {pct:.1}%, {} cases match brute force", got.len()))
}

fn emb1_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dims = vec![1, 768, 1024, 1792];
    while dims.len() < 50 {
        dims.push(rng.random_range(1..=2048));
    }
    for (k, &dim) in dims.iter().enumerate() {
        let rows = rng.random_range(0..=12);
        let ids: Vec<String> = (0..rows).map(|r| format!("m{k}/row-{r}")).collect();
        // raw layer: arbitrary bit patterns, NaN payloads included
        let raw = RawEmbeddings {
            model_id: format!("model-{k}"),
            dim,
            row_ids: ids.clone(),
            values: (0..rows * dim).map(|_| f32::from_bits(rng.random())).collect(),
        };
        let back = decode(&encode(&raw).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        check(
            back.model_id == raw.model_id && back.dim == dim && back.row_ids == ids && bits(&back.values) == bits(&raw.values),
            || format!("raw matrix {k} (dim {dim}) changed"),
        )?;
        // file layer: finite values through the validated reader
        if rows > 0 {
            let values: Vec<f32> = (0..rows * dim).map(|_| normal(&mut rng) as f32).collect();
            let model = ModelId::ALL[k % 3];
            let m = EmbeddingMatrix::new(model, dim, ids.clone(), values.clone()).map_err(|e| e.to_string())?;
            let path = dir.path().join(format!("{k}.emb1"));
            write_embeddings(&path, &m).map_err(|e| e.to_string())?;
            let read = read_embeddings(&path).map_err(|e| e.to_string())?;
            let got: Vec<f32> = (0..rows).flat_map(|r| read.row(r).to_vec()).collect();
            check(read.model_id() == model && read.row_ids() == ids && bits(&got) == bits(&values), || {
                format!("file matrix {k} (dim {dim}) changed")
            })?;
        }
    }
    Ok("50 matrices (dims 1, 768, 1024, 1792 and 46 random) bit-exact in memory and on disk".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("mahalanobis oracle", mahalanobis_oracle),
        ("relative distance semantics", relative_semantics),
        ("kappa oracles", kappa_oracles),
        ("bootstrap", bootstrap_checks),
        ("mock jury pipeline", mock_jury),
        ("published arithmetic", paper_arithmetic),
        ("jury composition robustness", robustness),
        ("divergence census", divergence_census),
        ("EMB1 roundtrip", emb1_roundtrip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
