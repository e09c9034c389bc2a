use baryalign::storage::{self, ReportFormat};
use baryalign::{
    consistency_scores, evaluate, make_synthetic_pool, project, total_objective, train_barycenter,
    Matrix, ProjectOptions, Similarity, SynthSpec, TrainConfig,
};

fn spec(noise: f64, widths: Option<Vec<usize>>) -> SynthSpec {
    SynthSpec {
        n_train: 90,
        m_test: 30,
        d: 8,
        n_models: 3,
        noise_sigma: noise,
        width_schedule: widths,
        seed: 11,
    }
}

#[test]
fn stored_pipeline_matches_in_memory() {
    let pools = make_synthetic_pool(&spec(0.3, Some(vec![5, 8, 6]))).unwrap();
    let tmp = tempfile::tempdir().unwrap();

    let train_manifest = storage::save_pool(&pools.train, tmp.path(), "train").unwrap();
    let test_dir = tmp.path().join("test");
    std::fs::create_dir(&test_dir).unwrap();
    let test_manifest = storage::save_pool(&pools.test, &test_dir, "test").unwrap();

    let train = storage::load_pool(&train_manifest).unwrap();
    assert_eq!(train.original_widths(), &[5, 8, 6]);
    let (model, trace) = train_barycenter(
        &train,
        &TrainConfig {
            record_trace: true,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let (direct, _) = train_barycenter(&pools.train, &TrainConfig::default()).unwrap();
    assert_eq!(model.barycenter(), direct.barycenter());

    let bundle = tmp.path().join("bundle");
    storage::write_dir_atomic(&bundle, |d| storage::save_model(&model, trace.as_ref(), d)).unwrap();
    let loaded = storage::load_model(&bundle).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(
        total_objective(&train, &loaded).unwrap(),
        model.meta().final_objective
    );

    let test = storage::load_pool(&test_manifest).unwrap();
    let projected = project(&test, &loaded, ProjectOptions::default()).unwrap();
    let proj_dir = tmp.path().join("projected");
    std::fs::create_dir(&proj_dir).unwrap();
    let proj_manifest = storage::save_projected(&projected, &proj_dir, "projected").unwrap();
    let reloaded = baryalign::ProjectedPool::from_pool(&storage::load_pool(&proj_manifest).unwrap());
    assert_eq!(reloaded.members(), projected.members());

    let scores = consistency_scores(&reloaded, Similarity::Cosine).unwrap();
    let report_path = tmp.path().join("scores.tsv");
    storage::save_consistency_report(&report_path, &scores, ReportFormat::Tsv).unwrap();
    assert_eq!(storage::load_consistency_report(&report_path).unwrap(), scores);

    let eval = evaluate(&reloaded, &[10, 1, 5, 1]).unwrap();
    assert_eq!(eval.ks, vec![1, 5, 10]);
    let eval_path = tmp.path().join("eval.tsv");
    storage::save_eval_report(&eval_path, &eval, ReportFormat::Tsv).unwrap();
    assert_eq!(storage::load_eval_report(&eval_path).unwrap(), eval);
}

#[test]
fn centered_training_survives_storage() {
    let mut pools = make_synthetic_pool(&spec(0.2, None)).unwrap();
    // Shift every member by a different constant offset per column.
    let shifted: Vec<_> = pools
        .train
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let offset = Matrix::from_fn(m.rows(), m.width(), |_, c| (i * 3 + c) as f64);
            baryalign::ReprMatrix::new(m.model_id(), m.stimulus_ids().to_vec(), m.data() + offset)
                .unwrap()
        })
        .collect();
    pools.train = baryalign::build_pool(shifted).unwrap();

    let config = TrainConfig {
        center: true,
        ..TrainConfig::default()
    };
    let (model, _) = train_barycenter(&pools.train, &config).unwrap();
    assert!(model.meta().centered);
    let centers = model.centers().unwrap();
    assert!((centers[2][4] - 10.0).abs() < 0.5, "{}", centers[2][4]);

    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    storage::write_dir_atomic(&bundle, |d| storage::save_model(&model, None, d)).unwrap();
    let loaded = storage::load_model(&bundle).unwrap();
    assert_eq!(loaded, model);
    assert!(!bundle.join("trace.tsv").exists());
}

#[test]
fn subset_projection_reuses_trained_transforms() {
    let pools = make_synthetic_pool(&spec(0.1, None)).unwrap();
    let (model, _) = train_barycenter(&pools.train, &TrainConfig::default()).unwrap();
    let full = project(&pools.test, &model, ProjectOptions::default()).unwrap();

    let subset: Vec<_> = pools.test.members()[1..].to_vec();
    let subset = baryalign::build_pool(subset).unwrap();
    assert!(matches!(
        project(&subset, &model, ProjectOptions::default()),
        Err(baryalign::Error::ModelPoolMismatch(_))
    ));
    let partial = project(&subset, &model, ProjectOptions { allow_subset: true }).unwrap();
    assert_eq!(partial.model_ids(), &full.model_ids()[1..]);
    assert_eq!(partial.members(), &full.members()[1..]);
}
