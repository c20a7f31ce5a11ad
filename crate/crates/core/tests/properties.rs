use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use facsca::ca::{evolve, mask_of, step, transpose_rule, CellularSpace, RuleMatrix};
use facsca::config::{Config, SkinConfig};
use facsca::facs::{
    classify_au_set, expand_expression, expression_def, parse_pattern, render_pattern, synthesize_pattern, AuSet,
    ExpressionLabel, RenderMode, KNOWN_AUS,
};
use facsca::features::gabor::{GaborBank, GaborParams};
use facsca::features::twodpca::image_covariance;
use facsca::features::{EigenModel, FldModel};
use facsca::image::{decode_pnm, encode_pnm, Channels, Image};
use facsca::linalg::sym_eigen;
use facsca::pipeline::{aggregate_shot, analyze_aus, frame_from_faces};
use facsca::retrieval::{longest_run, metrics_from_counts, query_label, ShotIndex};
use facsca::vision::{skin_mask_combined, skin_mask_hsi, skin_mask_rgb, skin_mask_ycbcr};

fn au_set() -> impl Strategy<Value = AuSet> {
    prop::collection::vec(prop::sample::select(KNOWN_AUS.to_vec()), 0..8)
        .prop_map(|codes| AuSet::try_from_codes(codes).unwrap())
}

fn gray(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(any::<u8>(), w * h).prop_map(move |d| Image::gray(w, h, d).unwrap())
}

fn label() -> impl Strategy<Value = ExpressionLabel> {
    prop::sample::select(ExpressionLabel::EXPRESSIONS.to_vec())
}

/// A representative AU set for each expression.
fn probe_for(e: ExpressionLabel) -> AuSet {
    expand_expression(expression_def(e).unwrap())
        .into_iter()
        .find(|&s| classify_au_set(s).label == e)
        .unwrap()
}

proptest! {
    #[test]
    fn transpose_keeps_popcount(rule in 0u32..512) {
        let m = mask_of(rule).unwrap();
        prop_assert_eq!(transpose_rule(m).active_positions(), m.active_positions());
    }

    #[test]
    fn step_keeps_dimension_and_never_empties(dim in 1usize..=6, bits in any::<u64>(), gens in 0usize..8) {
        let space = CellularSpace::new(dim).unwrap();
        let cells: Vec<(usize, usize)> = (0..dim * dim)
            .filter(|i| bits & (1 << i) != 0)
            .map(|i| (i / dim, i % dim))
            .collect();
        let lattice = RuleMatrix::with_active(dim, &cells).unwrap();
        let next = step(&space, &lattice).unwrap();
        prop_assert_eq!(next.dim(), dim);
        prop_assert!(next.active_count() <= lattice.active_count());
        prop_assert_eq!(next.active_count() == 0, lattice.active_count() == 0);
        let later = evolve(&space, &lattice, gens).unwrap();
        prop_assert_eq!(later.dim(), dim);
    }

    #[test]
    fn pattern_round_trip(set in au_set()) {
        let p = synthesize_pattern(set);
        prop_assert_eq!(p.aus(), set);
        let text = render_pattern(&p, RenderMode::Canonical);
        prop_assert_eq!(parse_pattern(&text).unwrap(), p);
        prop_assert_eq!(p.hamming(&p), 0);
        prop_assert_eq!(p.active_bits(), set.len());
    }

    #[test]
    fn hamming_counts_symmetric_difference(a in au_set(), b in au_set()) {
        let (pa, pb) = (synthesize_pattern(a), synthesize_pattern(b));
        prop_assert_eq!(pa.hamming(&pb), pb.hamming(&pa));
        let diff = a.union(b).difference(a.intersection(b)).len();
        prop_assert_eq!(pa.hamming(&pb) as usize, diff);
    }

    #[test]
    fn au_set_text_round_trip(set in au_set()) {
        prop_assert_eq!(set.to_string().parse::<AuSet>().unwrap(), set);
    }

    #[test]
    fn classification_is_consistent(set in au_set()) {
        let c = classify_au_set(set);
        prop_assert_eq!(c, classify_au_set(set));
        match c.label {
            ExpressionLabel::Neutral => prop_assert!(set.is_empty()),
            ExpressionLabel::Unknown => prop_assert!(!set.is_empty()),
            l => prop_assert!(expression_def(l).unwrap().matches(set)),
        }
    }

    #[test]
    fn pnm_round_trip(w in 1usize..12, h in 1usize..12, rgb in any::<bool>(), seed in any::<u64>()) {
        let channels = if rgb { Channels::Rgb8 } else { Channels::Gray8 };
        let data: Vec<u8> = (0..w * h * channels.count()).map(|i| (seed.rotate_left(i as u32 % 64) as u8) ^ i as u8).collect();
        let img = Image::new(w, h, channels, data).unwrap();
        prop_assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let mut input = b"P5 3 2 255\n".to_vec();
        input.extend(bytes);
        let _ = decode_pnm(&input);
    }

    #[test]
    fn combined_skin_mask_is_a_superset(w in 1usize..10, h in 1usize..10, data in prop::collection::vec(any::<u8>(), 300)) {
        let img = Image::new(w, h, Channels::Rgb8, data[..w * h * 3].to_vec()).unwrap();
        let cfg = SkinConfig::default();
        let combined = skin_mask_combined(&img, &cfg).unwrap();
        prop_assert!(skin_mask_rgb(&img, &cfg).unwrap().is_subset_of(&combined));
        prop_assert!(skin_mask_ycbcr(&img, &cfg).unwrap().is_subset_of(&combined));
        prop_assert!(skin_mask_hsi(&img, &cfg).unwrap().is_subset_of(&combined));
    }

    #[test]
    fn eigenfaces_are_orthonormal_and_ordered(faces in prop::collection::vec(gray(3, 3), 2..7)) {
        let model = EigenModel::fit(&faces, 0).unwrap();
        let e = model.eigenfaces();
        let gram = e.transpose() * e;
        prop_assert!((gram - DMatrix::identity(e.ncols(), e.ncols())).amax() < 1e-6);
        prop_assert!(model.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(model.components() <= faces.len());
        prop_assert!(model.project_vector(model.mean_face()).amax() < 1e-9);
        for f in &faces {
            let errs: Vec<f64> = (0..=model.components()).map(|m| model.reconstruction_error(f, m).unwrap()).collect();
            prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        }
    }

    #[test]
    fn image_covariance_is_symmetric_psd(values in prop::collection::vec(-50.0f64..50.0, 4 * 12)) {
        let chips: Vec<DMatrix<f64>> = values.chunks(12).map(|c| DMatrix::from_row_slice(3, 4, c)).collect();
        let (_, g) = image_covariance(&chips).unwrap();
        prop_assert!((&g - g.transpose()).amax() < 1e-9);
        let (vals, _) = sym_eigen(&g);
        prop_assert!(vals.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn fld_axes_bounded_by_classes(values in prop::collection::vec(-5.0f64..5.0, 12 * 4), classes in 2usize..4) {
        let samples: Vec<DVector<f64>> = values.chunks(4).map(DVector::from_row_slice).collect();
        let labels: Vec<usize> = (0..samples.len()).map(|i| i % classes).collect();
        let m = FldModel::fit(&samples, &labels, 1e-6).unwrap();
        prop_assert!(m.output_dim() < classes);
        prop_assert!((m.within() - m.within().transpose()).amax() < 1e-9);
        let (vals, _) = sym_eigen(m.within());
        prop_assert!(vals.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn f_measure_lies_between_precision_and_recall(tp in 1usize..50, fp in 0usize..50, fn_ in 0usize..50) {
        let m = metrics_from_counts(ExpressionLabel::Happiness, tp, fp, fn_, 0, 1.0);
        let lo = m.precision.min(m.recall);
        let hi = m.precision.max(m.recall);
        prop_assert!(m.f_measure >= lo - 1e-12 && m.f_measure <= hi + 1e-12);
    }

    #[test]
    fn index_invariants(shots in prop::collection::vec(prop::collection::vec(label(), 1..8), 0..12)) {
        let outcomes: Vec<_> = shots
            .iter()
            .enumerate()
            .map(|(i, labels)| {
                let frames: Vec<_> = labels.iter().enumerate().map(|(k, &l)| analyze_aus(k, probe_for(l))).collect();
                Ok(aggregate_shot(&format!("s{i}"), &frames).unwrap())
            })
            .collect();
        let index = ShotIndex::build(&outcomes);
        prop_assert!(index.validate().is_ok());
        let pooled: usize = index.pools.values().map(Vec::len).sum();
        prop_assert_eq!(pooled, shots.len());

        let json = index.to_json();
        let back = ShotIndex::from_json(&json).unwrap();
        prop_assert_eq!(&back, &index);
        prop_assert_eq!(back.to_json(), json);

        for e in ExpressionLabel::EXPRESSIONS {
            let hits = query_label(&index, e);
            prop_assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
            for h in &hits {
                let r = index.record(&h.shot_id).unwrap();
                prop_assert_eq!(r.shot_expression, e);
                prop_assert!(h.score <= r.frame_count);
                if r.frame_labels.iter().all(|&l| l == e) {
                    prop_assert_eq!(h.score, r.frame_count);
                }
            }
        }
    }

    #[test]
    fn or_annotation_set_when_any_face(labels in prop::collection::vec(prop::option::of(label()), 1..8)) {
        let frames: Vec<_> = labels
            .iter()
            .enumerate()
            .map(|(k, l)| frame_from_faces(k, l.map(|l| (None, None, probe_for(l)))))
            .collect();
        let r = aggregate_shot("s", &frames).unwrap();
        prop_assert_eq!(r.or_annotation, labels.iter().any(Option::is_some));
    }

    #[test]
    fn config_echo_round_trip(chip in 24usize..128, comps in 1usize..6, beta in 0.25f64..4.0) {
        let text = format!("chip.size = {chip}\ntwodpca.components = {comps}\neval.beta = {beta}\n");
        let cfg = Config::parse(&text).unwrap();
        prop_assert_eq!(Config::parse(&cfg.echo()).unwrap(), cfg);
    }
}

#[test]
fn bypass_shots_label_every_expansion() {
    for e in ExpressionLabel::EXPRESSIONS {
        for set in expand_expression(expression_def(e).unwrap()) {
            if classify_au_set(set).label != e {
                // Cross-template dominations; enumerated by the acceptance suite.
                continue;
            }
            let frames: Vec<_> = (0..3).map(|k| analyze_aus(k, set)).collect();
            assert_eq!(aggregate_shot("s", &frames).unwrap().shot_expression, e, "{set}");
        }
    }
}

#[test]
fn longest_run_by_hand() {
    use ExpressionLabel::*;
    let labels = [Happiness, Happiness, Sadness, Happiness];
    let frames: Vec<_> = labels.iter().enumerate().map(|(k, &l)| analyze_aus(k, probe_for(l))).collect();
    let r = aggregate_shot("s", &frames).unwrap();
    assert_eq!(longest_run(&r, Happiness), 2);
    assert_eq!(longest_run(&r, Sadness), 1);
    assert_eq!(longest_run(&r, Fear), 0);
}

#[test]
fn gabor_orientation_selectivity() {
    // Horizontal stripes vary along y; the filter whose carrier runs along y (θ = 90°) responds most.
    let bank = GaborBank::new(GaborParams {
        scales: 1,
        orientations: 8,
        kernel_size: 21,
        ..GaborParams::default()
    })
    .unwrap();
    let chip = DMatrix::from_fn(40, 40, |r, _| if (r / 2) % 2 == 0 { 200.0 } else { 20.0 });
    let f = bank.features(&chip).unwrap();
    let means: Vec<f64> = (0..8).map(|o| f[2 * o]).collect();
    let best = (0..8).max_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap();
    assert_eq!(bank.kernels()[best].theta, std::f64::consts::FRAC_PI_2);
    assert_eq!(f.len(), 2 * 8);
}

#[test]
fn pool_lookup_by_truth() {
    let frames: Vec<_> = (0..2).map(|k| analyze_aus(k, probe_for(ExpressionLabel::Disgust))).collect();
    let mut r = aggregate_shot("d", &frames).unwrap();
    r.truth = Some(ExpressionLabel::Disgust);
    let index = ShotIndex::build(&[Ok(r)]);
    let truth: BTreeMap<_, _> = index.truth();
    assert_eq!(truth.get("d"), Some(&ExpressionLabel::Disgust));
}
