use std::collections::BTreeMap;

use facsca::config::{Config, FeatureSpace};
use facsca::facs::{classify_au_set, expand_expression, expression_def, AuSet, ExpressionLabel, Region};
use facsca::features::templates::TemplateKey;
use facsca::image::{save_image, Image};
use facsca::pipeline::{analyze_frame, ingest, Models, ShotManifest};
use facsca::synth::{face_chip_gray, face_chip_rgb, frame, template_chip, IDENTITIES};

fn templates() -> BTreeMap<TemplateKey, Image> {
    let mut out = BTreeMap::new();
    for region in Region::CANONICAL {
        out.insert((region, None), template_chip(region, None, 64));
        for &au in region.au_list() {
            out.insert((region, Some(au)), template_chip(region, Some(au), 64));
        }
    }
    out
}

fn train(config: &Config) -> Models {
    let faces: Vec<Image> = (0..IDENTITIES).map(|i| face_chip_gray(i, AuSet::EMPTY, 64)).collect();
    let ids: Vec<String> = (0..IDENTITIES).map(|i| format!("actor{i}")).collect();
    Models::train(&templates(), &faces, &ids, config).unwrap()
}

fn sample_sets() -> Vec<(ExpressionLabel, AuSet)> {
    ExpressionLabel::EXPRESSIONS
        .iter()
        .map(|&e| {
            let sets = expand_expression(expression_def(e).unwrap());
            let set = sets.into_iter().find(|&s| classify_au_set(s).label == e).unwrap();
            (e, set)
        })
        .collect()
}

#[test]
fn frames_recover_identity_and_aus() {
    let models = train(&Config::default());
    for (k, (expr, aus)) in sample_sets().into_iter().enumerate() {
        let id = k % IDENTITIES;
        let img = frame(140, 110, &[(30, 20, face_chip_rgb(id, aus, 64))]);
        let a = analyze_frame(0, &img, &models).unwrap();
        assert_eq!(a.faces.len(), 1, "{expr}");
        let face = &a.faces[0];
        assert_eq!(face.identity.as_deref(), Some(format!("actor{id}").as_str()));
        assert_eq!(face.aus, aus, "{expr}");
        assert_eq!(face.label, expr);
    }
}

#[test]
fn empty_frame_and_two_faces() {
    let models = train(&Config::default());
    let blank = frame(140, 110, &[]);
    assert!(analyze_frame(0, &blank, &models).unwrap().faces.is_empty());

    let happy = AuSet::try_from_codes([6, 12]).unwrap();
    let sad = AuSet::try_from_codes([1, 7, 15, 63]).unwrap();
    let img = frame(
        200,
        100,
        &[(10, 10, face_chip_rgb(0, happy, 64)), (110, 10, face_chip_rgb(1, sad, 64))],
    );
    let a = analyze_frame(0, &img, &models).unwrap();
    assert_eq!(a.faces.len(), 2);
    assert_eq!(a.annotation_bits().iter().filter(|&&b| b).count(), 1);
    assert!(a.annotation_bits()[0]);
}

#[test]
fn models_round_trip_through_directory() {
    let config = Config::default();
    let models = train(&config);
    let dir = tempfile::tempdir().unwrap();
    models.save(dir.path()).unwrap();
    let back = Models::load(dir.path(), &config).unwrap();
    assert_eq!(back.eigen, models.eigen);
    assert_eq!(back.gallery, models.gallery);
}

#[test]
fn vision_ingest_matches_sequential_reference() {
    let models = train(&Config::default());
    let dir = tempfile::tempdir().unwrap();
    let mut shots = Vec::new();
    for (s, (expr, aus)) in sample_sets().into_iter().take(4).enumerate() {
        let mut frames = Vec::new();
        for f in 0..3 {
            let path = dir.path().join(format!("s{s}_f{f}.ppm"));
            save_image(&frame(120, 100, &[(20 + f, 15, face_chip_rgb(s, aus, 64))]), &path).unwrap();
            frames.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
        shots.push(serde_json::json!({"shot_id": format!("shot{s}"), "frames": frames, "label": expr.name()}));
    }
    let manifest_path = dir.path().join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string(&shots).unwrap()).unwrap();
    let manifest = ShotManifest::load(&manifest_path).unwrap();

    let out = ingest(&manifest, Some(&models));
    for (o, (expr, _)) in out.iter().zip(sample_sets()) {
        let r = o.as_ref().unwrap();
        assert_eq!(r.shot_expression, expr);
        assert_eq!(r.truth, Some(expr));
        assert!(r.or_annotation);
        // Same identity throughout: a single key face.
        assert_eq!(r.key_faces, vec![0]);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let sequential = pool.install(|| ingest(&manifest, Some(&models)));
    assert_eq!(sequential, out);
}

#[test]
fn fused_feature_spaces() {
    let mut config = Config::default();
    config.features.identity_space = FeatureSpace::Fused;
    config.features.au_space = FeatureSpace::Fused;
    config.features.gabor_scales = 2;
    config.features.gabor_orientations = 4;
    config.features.gabor_kernel = 9;
    let models = train(&config);
    assert!(models.fused_identity.is_some());
    for (k, (expr, aus)) in sample_sets().into_iter().enumerate().take(5) {
        let id = k % IDENTITIES;
        let img = frame(120, 100, &[(25, 18, face_chip_rgb(id, aus, 64))]);
        let a = analyze_frame(0, &img, &models).unwrap();
        assert_eq!(a.faces.len(), 1);
        assert_eq!(a.faces[0].identity.as_deref(), Some(format!("actor{id}").as_str()));
        assert_eq!(a.faces[0].label, expr);
    }
    let dir = tempfile::tempdir().unwrap();
    models.save(dir.path()).unwrap();
    let back = Models::load(dir.path(), &config).unwrap();
    assert_eq!(back.fused_identity, models.fused_identity);
    assert_eq!(back.gallery, models.gallery);
}

