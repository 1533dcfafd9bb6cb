//! Property tests for the spec-level invariants that hold across modules.

use std::collections::BTreeMap;

use proptest::prelude::*;

use semnav::datamodel::{
    descriptive_stats, parse_dataset, write_canonical_csv, ColumnSchema, ConceptStream, StreamKey,
};
use semnav::embed::{
    build_prefixes, embed_stream, lookup_static, parse_vector_table, BackendRef, EmbeddedTrajectory,
    EmbeddingCache, PrefixMode,
};
use semnav::metrics::{
    acceleration, binarized_entropy, distance_to_next, velocity,
};
use semnav::series::StepSeries;
use semnav::stats::{holm_adjust, pearson, welch_pairwise};
use semnav::whiten::{apply_whitening, fit_zca, verify_isotropy};

fn key(participant: &str, concept: &str) -> StreamKey {
    StreamKey {
        dataset: "d".into(),
        participant: participant.into(),
        group: "g".into(),
        concept: concept.into(),
    }
}

fn trajectory(points: Vec<Vec<f64>>) -> EmbeddedTrajectory<f64> {
    let dimension = points[0].len();
    EmbeddedTrajectory {
        key: key("p", "c"),
        backend_id: "prop".into(),
        prefix_mode: PrefixMode::Cumulative,
        dimension,
        points: points.into_iter().map(Some).collect(),
    }
}

fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("vector must not be near zero", |v| {
            v.iter().map(|c| c * c).sum::<f64>().sqrt() > 1e-3
        })
}

fn points_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=5, 3usize..=10)
        .prop_flat_map(|(dim, n)| proptest::collection::vec(nonzero_vec(dim), n))
}

proptest! {
    #[test]
    fn dist_next_is_scale_invariant(points in points_strategy(), scale in 0.1f64..50.0) {
        let base = trajectory(points.clone());
        let scaled = trajectory(
            points.iter().map(|p| p.iter().map(|c| c * scale).collect()).collect(),
        );
        let (series_a, _) = distance_to_next(&base).unwrap();
        let (series_b, _) = distance_to_next(&scaled).unwrap();
        for (a, b) in series_a.values.iter().zip(&series_b.values) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn entropy_is_rank_invariant(
        points in points_strategy(),
        linear in 0.1f64..5.0,
        cubic in 0.0f64..2.0,
        expo in 0.0f64..1.0,
    ) {
        let t = trajectory(points);
        let (series, _) = distance_to_next(&t).unwrap();
        // strictly increasing map: positive combination of increasing terms
        let transform = |x: f64| linear * x + cubic * x.powi(3) + expo * (0.5 * x).exp();
        let transformed = StepSeries {
            values: series.values.iter().map(|v| transform(*v)).collect(),
            valid: series.valid.clone(),
        };
        prop_assert_eq!(binarized_entropy(&series), binarized_entropy(&transformed));
    }

    #[test]
    fn entropy_is_bounded(points in points_strategy()) {
        let t = trajectory(points);
        let (series, _) = distance_to_next(&t).unwrap();
        if let Some(h) = binarized_entropy(&series) {
            prop_assert!((0.0..=1.0).contains(&h), "H = {h}");
        }
    }

    #[test]
    fn acceleration_is_velocity_of_velocity(points in points_strategy(), alpha in 0.25f64..4.0) {
        let t = trajectory(points);
        if t.n_items() < 3 {
            return Ok(());
        }
        let accel = acceleration(&t, alpha).unwrap();

        let first = velocity(&t, alpha).unwrap();
        let velocity_traj = EmbeddedTrajectory {
            key: t.key.clone(),
            backend_id: t.backend_id.clone(),
            prefix_mode: t.prefix_mode,
            dimension: t.dimension,
            points: first.vectors,
        };
        let second = velocity(&velocity_traj, alpha).unwrap();

        for (a, v) in accel.vectors.iter().zip(&second.vectors) {
            let (a, v) = (a.as_ref().unwrap(), v.as_ref().unwrap());
            for (ac, vc) in a.iter().zip(v) {
                prop_assert!((ac - vc).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reversal_reverses_dist_next(points in points_strategy()) {
        let forward = trajectory(points.clone());
        let mut reversed_points = points;
        reversed_points.reverse();
        let backward = trajectory(reversed_points);

        let (series_f, mean_f) = distance_to_next(&forward).unwrap();
        let (series_b, mean_b) = distance_to_next(&backward).unwrap();

        let mut flipped = series_f.values.clone();
        flipped.reverse();
        for (a, b) in flipped.iter().zip(&series_b.values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        if let (Some(mf), Some(mb)) = (mean_f, mean_b) {
            prop_assert!((mf - mb).abs() < 1e-12);
        }
        // same multiset of steps -> identical median split
        prop_assert_eq!(binarized_entropy(&series_f), binarized_entropy(&series_b));
    }

    #[test]
    fn series_length_contracts(points in points_strategy()) {
        let t = trajectory(points);
        let n = t.n_items();
        let (dist, _) = distance_to_next(&t).unwrap();
        prop_assert_eq!(dist.len(), n - 1);
        let vel = velocity(&t, 1.0).unwrap();
        prop_assert_eq!(vel.magnitudes.len(), n - 1);
        if n >= 3 {
            let acc = acceleration(&t, 1.0).unwrap();
            prop_assert_eq!(acc.magnitudes.len(), n - 2);
        }
    }

    #[test]
    fn cumulative_prefixes_are_strict_prefixes(
        items in proptest::collection::vec("[a-z]{1,8}( [a-z]{1,8})?", 1..8),
    ) {
        let stream = ConceptStream { key: key("p", "c"), items };
        let prefixes = build_prefixes(&stream, PrefixMode::Cumulative);
        for window in prefixes.windows(2) {
            prop_assert!(window[1].starts_with(window[0].as_str()));
            prop_assert!(window[1].len() > window[0].len());
        }
    }

    #[test]
    fn holm_never_decreases_and_caps(ps in proptest::collection::vec(0.0f64..=1.0, 1..12)) {
        let adjusted = holm_adjust(&ps);
        for (raw, adj) in ps.iter().zip(&adjusted) {
            prop_assert!(adj >= raw);
            prop_assert!(*adj <= 1.0);
        }
    }

    #[test]
    fn pearson_affine_invariant(
        x in proptest::collection::vec(-10.0f64..10.0, 4..10),
        slope in 0.1f64..10.0,
        intercept in -5.0f64..5.0,
    ) {
        let y: Vec<f64> = x.iter().map(|v| v * 1.7 + (v * 0.3).sin()).collect();
        let x_affine: Vec<f64> = x.iter().map(|v| slope * v + intercept).collect();
        let r1 = pearson(&x, &y).unwrap();
        let r2 = pearson(&x_affine, &y).unwrap();
        match (r1, r2) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn welch_swap_flips_sign_keeps_p(
        a in proptest::collection::vec(-5.0f64..5.0, 2..8),
        b in proptest::collection::vec(-5.0f64..5.0, 2..8),
    ) {
        let mut g1 = BTreeMap::new();
        g1.insert("a".to_string(), a.clone());
        g1.insert("b".to_string(), b.clone());
        let mut g2 = BTreeMap::new();
        g2.insert("a".to_string(), b);
        g2.insert("b".to_string(), a);

        let r1 = &welch_pairwise("m", &g1).unwrap()[0];
        let r2 = &welch_pairwise("m", &g2).unwrap()[0];
        prop_assert!((r1.p_raw - r2.p_raw).abs() < 1e-12);
        match (r1.cohens_d, r2.cohens_d) {
            (Some(d1), Some(d2)) => prop_assert!((d1 + d2).abs() < 1e-12),
            (d1, d2) => prop_assert_eq!(d1, d2),
        }
    }

    #[test]
    fn cache_round_trip_bitwise(
        components in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL, 1..16),
        text in "[ -~]{1,40}",
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = EmbeddingCache::open(&path).unwrap();
            cache.put("backend", &text, &components).unwrap();
        }
        let cache = EmbeddingCache::open(&path).unwrap();
        let loaded = cache.get("backend", &text).unwrap();
        prop_assert_eq!(loaded.len(), components.len());
        for (orig, read) in components.iter().zip(loaded) {
            prop_assert_eq!(orig.to_bits(), read.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_dataset_is_row_order_insensitive(
        sizes in proptest::collection::vec(1usize..5, 1..5),
        seed in 0u64..1000,
    ) {
        let streams: Vec<ConceptStream> = sizes
            .iter()
            .enumerate()
            .map(|(idx, n)| ConceptStream {
                key: key(&format!("p{idx}"), "c"),
                items: (0..*n).map(|i| format!("item{i}")).collect(),
            })
            .collect();

        let mut csv = Vec::new();
        write_canonical_csv(&streams, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);

        // deterministic shuffle from the seed
        let mut order: Vec<usize> = (0..lines.len()).collect();
        let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
        for i in (1..order.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            order.swap(i, (state as usize) % (i + 1));
        }
        let shuffled: String = std::iter::once(header)
            .chain(order.iter().map(|i| lines[*i]))
            .collect::<Vec<_>>()
            .join("\n");

        let parsed = parse_dataset(shuffled.as_bytes(), &ColumnSchema::default(), None).unwrap();
        prop_assert_eq!(parsed, streams);
    }

    #[test]
    fn duplicated_streams_match_brute_force_stats(
        sizes in proptest::collection::vec(1usize..6, 2..6),
    ) {
        let originals: Vec<ConceptStream> = sizes
            .iter()
            .enumerate()
            .map(|(idx, n)| ConceptStream {
                key: key(&format!("p{idx}"), "c"),
                items: (0..*n).map(|i| format!("w{i} w{i}b")).collect(),
            })
            .collect();
        let mut doubled = originals.clone();
        doubled.extend(originals.iter().enumerate().map(|(idx, s)| ConceptStream {
            key: key(&format!("q{idx}"), "c"),
            items: s.items.clone(),
        }));

        let stats = descriptive_stats(&doubled).unwrap();

        // straight-line recomputation
        let props: Vec<f64> = doubled.iter().map(|s| s.items.len() as f64).collect();
        let mean = props.iter().sum::<f64>() / props.len() as f64;
        let var = props.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (props.len() - 1) as f64;
        prop_assert!((stats.properties_mean - mean).abs() < 1e-12);
        prop_assert!((stats.properties_sd - var.sqrt()).abs() < 1e-12);
        prop_assert!((stats.properties_mean
            - originals.iter().map(|s| s.items.len() as f64).sum::<f64>() / originals.len() as f64)
            .abs() < 1e-12);
    }

    #[test]
    fn static_non_cumulative_equals_per_item_lookup(
        item_indices in proptest::collection::vec(0usize..6, 1..8),
    ) {
        let vocab = ["alpha", "beta", "gamma", "delta", "qux_oov", "epsilon"];
        let mut table_text = String::from("5 3\n");
        for (i, word) in vocab.iter().enumerate() {
            if *word != "qux_oov" {
                table_text.push_str(&format!("{word} {} {} {}\n", i, i * 2, 1));
            }
        }
        let table = parse_vector_table::<f64, _>(table_text.as_bytes()).unwrap().table;

        let items: Vec<String> = item_indices.iter().map(|i| vocab[*i].to_string()).collect();
        let stream = ConceptStream { key: key("p", "c"), items: items.clone() };

        let dir = tempfile::tempdir().unwrap();
        let mut cache = EmbeddingCache::open(&dir.path().join("c.jsonl")).unwrap();
        let traj = embed_stream(
            &stream,
            &BackendRef::Static { backend_id: "static:t", table: &table },
            PrefixMode::NonCumulative,
            &mut cache,
        )
        .unwrap();

        for (item, point) in items.iter().zip(&traj.points) {
            match lookup_static(&table, item) {
                Ok(expected) => prop_assert_eq!(point.as_ref().unwrap(), &expected),
                Err(_) => prop_assert!(point.is_none()),
            }
        }
    }

    #[test]
    fn whitening_normalizes_covariance(
        dim in 2usize..4,
        seed in 0u64..500,
    ) {
        // n >> d pseudo-random cloud with correlated axes
        let n = dim * 12;
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut rand = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base: Vec<f64> = (0..dim).map(|_| rand()).collect();
                // correlate: add a share of the first axis to the others
                (0..dim)
                    .map(|j| base[j] * (j as f64 + 1.0) + 0.4 * base[0])
                    .collect()
            })
            .collect();

        let t = fit_zca(&samples, 0.0).unwrap();
        let whitened = apply_whitening(&t, &samples).unwrap();
        let diag = verify_isotropy(&whitened).unwrap();
        prop_assert!(diag.max_abs_offdiag < 1e-8, "offdiag {}", diag.max_abs_offdiag);
        prop_assert!(diag.max_abs_diag_minus_one < 1e-8, "diag {}", diag.max_abs_diag_minus_one);
    }
}
