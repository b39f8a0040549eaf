use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;
use realism_core::agreement::{
    bootstrap_ci, cohen_kappa, fleiss_kappa, BootstrapSettings, ConfidenceInterval, RatingTable,
};
use realism_core::analysis::{
    rank_methods, select_divergent_cases, AcceptanceSummary, MethodSummary, RankingKey,
};
use realism_core::failure::{bucket_distribution, Bucket, FailureClassification};
use realism_core::jury::{acceptance_rate, AcceptanceRate, CallStatus, ItemKind, Verdict};
use realism_core::metrics::{fit_gaussian, mahalanobis_distance, GaussianLabel};
use realism_core::store::emb1::{decode, encode, RawEmbeddings};
use realism_core::types::{Condition, Method, Scope};

fn verdict(item: usize, judge: usize, decision: Option<bool>) -> Verdict {
    Verdict {
        item_id: format!("img-{item}"),
        judge_id: format!("mock:{judge}"),
        kind: ItemKind::Pair,
        condition: Condition::ADVERSE[item % 4],
        method: Some(Method::ALL[item % 6]),
        decision,
        explanation: String::new(),
        status: if decision.is_some() { CallStatus::Ok } else { CallStatus::ParseError },
        attempts: 1,
        prompt_hash: String::new(),
        timestamp_ms: 0,
    }
}

fn summary(method: Method, rate: f64) -> MethodSummary {
    MethodSummary {
        method,
        scope: Scope::Overall,
        acceptance: Some(AcceptanceSummary {
            rate: AcceptanceRate { accepted: 0, evaluated: 1, dropped: 0, rate },
            ci: ConfidenceInterval::exact(rate),
        }),
        distances: BTreeMap::new(),
    }
}

fn ratings() -> impl Strategy<Value = Vec<(Option<bool>, Option<bool>)>> {
    prop::collection::vec((prop::option::weighted(0.9, any::<bool>()), prop::option::weighted(0.9, any::<bool>())), 1..80)
}

proptest! {
    #[test]
    fn emb1_roundtrips(
        dim in 1usize..48,
        ids in prop::collection::vec("[a-z0-9/_.-]{1,12}", 0..8),
        seed in any::<u64>(),
        model in "[a-z0-9_]{0,16}",
    ) {
        let values: Vec<f32> = (0..ids.len() * dim)
            .map(|i| f32::from_bits((seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)) as u32))
            .collect();
        let raw = RawEmbeddings { model_id: model, dim, row_ids: ids, values };
        let bytes = encode(&raw).unwrap();
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back.model_id, &raw.model_id);
        prop_assert_eq!(&back.row_ids, &raw.row_ids);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.values), bits(&raw.values));
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn emb1_rejects_truncation(cut in 1usize..30) {
        let raw = RawEmbeddings { model_id: "m".into(), dim: 2, row_ids: vec!["a".into()], values: vec![1.0, 2.0] };
        let bytes = encode(&raw).unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(decode(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn cohen_kappa_bounded_symmetric_relabel_invariant(pairs in ratings()) {
        let a: Vec<Option<bool>> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<Option<bool>> = pairs.iter().map(|p| p.1).collect();
        let flip = |v: &[Option<bool>]| v.iter().map(|x| x.map(|y| !y)).collect::<Vec<_>>();
        if let Ok(k) = cohen_kappa(&a, &b) {
            let ba = cohen_kappa(&b, &a).unwrap();
            let flipped = cohen_kappa(&flip(&a), &flip(&b)).unwrap();
            match k.value() {
                Some(v) => {
                    prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
                    prop_assert!((v - ba.value().unwrap()).abs() < 1e-12);
                    prop_assert!((v - flipped.value().unwrap()).abs() < 1e-12);
                }
                None => {
                    prop_assert!(ba.value().is_none());
                    prop_assert!(flipped.value().is_none());
                }
            }
        }
    }

    #[test]
    fn fleiss_kappa_bounded_and_rater_order_free(
        rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 2..40),
    ) {
        let items: Vec<String> = (0..rows.len()).map(|i| i.to_string()).collect();
        let labels: Vec<Vec<Option<bool>>> =
            rows.iter().map(|r| r.iter().map(|&x| Some(x)).collect()).collect();
        let reversed: Vec<Vec<Option<bool>>> =
            labels.iter().map(|r| r.iter().rev().copied().collect()).collect();
        let raters = vec!["a".to_string(), "b".into(), "c".into()];
        let k = fleiss_kappa(&RatingTable::new(items.clone(), raters.clone(), labels).unwrap()).unwrap();
        let r = fleiss_kappa(&RatingTable::new(items, raters, reversed).unwrap()).unwrap();
        prop_assert_eq!(k.kappa.value().map(f64::to_bits), r.kappa.value().map(f64::to_bits));
        if let Some(v) = k.kappa.value() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn acceptance_rate_order_free_and_consistent(
        decisions in prop::collection::vec(prop::option::weighted(0.8, any::<bool>()), 1..60),
        rotate in 0usize..60,
    ) {
        let vs: Vec<Verdict> = decisions.iter().enumerate().map(|(i, &d)| verdict(i, 0, d)).collect();
        let mut shuffled = vs.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rotate % len);
        shuffled.reverse();
        let r = acceptance_rate(&vs, |_| true);
        let s = acceptance_rate(&shuffled, |_| true);
        match (r, s) {
            (Ok(r), Ok(s)) => {
                prop_assert_eq!(r, s);
                prop_assert!(r.accepted <= r.evaluated);
                prop_assert_eq!(r.evaluated + r.dropped, vs.len());
            }
            (r, s) => {
                prop_assert!(r.is_err() && s.is_err());
                prop_assert!(decisions.iter().all(Option::is_none));
            }
        }
    }

    #[test]
    fn bootstrap_interval_brackets_point(xs in prop::collection::vec(-5.0f64..5.0, 1..30), seed in any::<u64>()) {
        let s = BootstrapSettings { replicates: 200, ..BootstrapSettings::new(seed) };
        let ci = bootstrap_ci(&xs, &s).unwrap();
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min - 1e-12 <= ci.lo && ci.lo <= ci.point && ci.point <= ci.hi && ci.hi <= max + 1e-12);
    }

    #[test]
    fn ranking_is_a_permutation_with_monotone_ranks(
        rates in prop::collection::vec(0u32..5, 6),
        take in 1usize..=6,
    ) {
        let summaries: Vec<MethodSummary> = Method::ALL
            .iter()
            .zip(&rates)
            .take(take)
            .map(|(&m, &r)| summary(m, f64::from(r) / 4.0))
            .collect();
        let ranking = rank_methods(&summaries, RankingKey::Acceptance).unwrap();
        let mut got = ranking.order();
        got.sort();
        let mut want: Vec<Method> = summaries.iter().map(|s| s.method).collect();
        want.sort();
        prop_assert_eq!(got, want);
        for (i, w) in ranking.entries.windows(2).enumerate() {
            prop_assert!(w[0].value >= w[1].value);
            prop_assert!(w[0].rank <= w[1].rank);
            if w[0].value == w[1].value {
                prop_assert_eq!(w[0].rank, w[1].rank);
            } else {
                prop_assert_eq!(w[1].rank, i + 2);
            }
        }
        let mut reversed = summaries.clone();
        reversed.reverse();
        prop_assert_eq!(rank_methods(&reversed, RankingKey::Acceptance).unwrap(), ranking);
    }

    #[test]
    fn census_fractions_sum_to_one(
        votes in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, any::<bool>()), 3), 1..50),
    ) {
        let mut vs = Vec::new();
        let mut scores = Vec::new();
        for (i, row) in votes.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                vs.push(verdict(i, j, d));
            }
            scores.push(realism_core::metrics::DistanceScore {
                image_id: format!("img-{i}"),
                condition: Condition::ADVERSE[i % 4],
                d_target: 1.0,
                d_background: 0.5,
                d_rel: 0.5,
                reported: -0.5,
            });
        }
        let c = select_divergent_cases(&vs, &scores, 2).unwrap().census;
        prop_assert_eq!(c.all_accept + c.all_reject + c.mixed + c.incomplete, c.total);
        let sum = c.all_accept_fraction + c.all_reject_fraction + c.mixed_fraction + c.incomplete_fraction;
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn buckets_partition_classifications(
        flags in prop::collection::vec((prop::option::weighted(0.9, any::<bool>()), any::<bool>()), 1..80),
    ) {
        let list: Vec<FailureClassification> = flags
            .iter()
            .enumerate()
            .map(|(i, &(s, r))| FailureClassification {
                item_id: format!("img-{i}"),
                vlm_judge_id: "mock:a".into(),
                llm_judge_id: "mock:x".into(),
                condition: Condition::ADVERSE[i % 4],
                method: Some(Method::ALL[i % 6]),
                semantic: s,
                realism: s.map(|_| r),
                status: if s.is_some() { CallStatus::Ok } else { CallStatus::ParseError },
                attempts: 1,
                prompt_hash: String::new(),
                timestamp_ms: 0,
            })
            .collect();
        let b = bucket_distribution(&list).unwrap();
        let answered = flags.iter().filter(|f| f.0.is_some()).count();
        prop_assert_eq!(b.overall.total, answered);
        prop_assert_eq!(b.dropped, flags.len() - answered);
        prop_assert_eq!(Bucket::ALL.iter().map(|&k| b.overall.count(k)).sum::<usize>(), answered);
        prop_assert_eq!(b.by_method.iter().map(|r| r.distribution.total).sum::<usize>(), answered);
        prop_assert_eq!(b.by_condition.iter().map(|r| r.distribution.total).sum::<usize>(), answered);
        if answered > 0 {
            let pct: f64 = Bucket::ALL.iter().map(|&k| b.overall.percent(k)).sum();
            prop_assert!((pct - 100.0).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mahalanobis_is_rotation_invariant(
        data in prop::collection::vec(-3.0f64..3.0, 4 * 24),
        angles in prop::collection::vec(-3.0f64..3.0, 16),
    ) {
        let d = 4;
        let rows: Vec<Vec<f64>> = data.chunks(d).map(|c| c.to_vec()).collect();
        // orthonormal Q from the QR factorisation of a generic matrix
        let q = DMatrix::from_row_slice(d, d, &angles).qr().q();
        let rotate = |r: &[f64]| -> Vec<f64> {
            (0..d).map(|i| (0..d).map(|k| q[(i, k)] * r[k]).sum()).collect()
        };
        let rotated: Vec<Vec<f64>> = rows.iter().map(|r| rotate(r)).collect();
        let a = fit_gaussian(&rows, GaussianLabel::Background, None).unwrap();
        let b = fit_gaussian(&rotated, GaussianLabel::Background, None).unwrap();
        prop_assume!(a.ridge_lambda() == b.ridge_lambda());
        for (x, y) in rows.iter().zip(&rotated) {
            let da = mahalanobis_distance(x, &a).unwrap();
            let db = mahalanobis_distance(y, &b).unwrap();
            prop_assert!((da - db).abs() <= 1e-6 * da.max(1.0), "{da} vs {db}");
        }
    }
}
