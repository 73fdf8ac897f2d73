use hae_core::autodiff::{load_checkpoint, save_checkpoint, RngStream};
use hae_core::hin::{generate_synthetic_hin, load_hetero_graph, save_hetero_graph, DatasetPaths, HeteroGraph, SyntheticConfig};
use hae_core::layers::{GraphInputs, HaeModel, ModelConfig, Variant};
use hae_core::linalg::Matrix;
use hae_core::parallel::Execution;
use hae_core::semantics::SemanticStructure;
use hae_core::train::{extract_embeddings, protocol_split, train, TrainConfig, TrainError, TrainReport};

/// No cross-community edges and no feature flips: the classes are separable.
fn two_communities(seed: u64) -> HeteroGraph {
    generate_synthetic_hin(&SyntheticConfig {
        communities: 2,
        authors: 120,
        papers: 300,
        venues: 4,
        terms: 40,
        feature_dim: 40,
        cross_community_noise: 0.0,
        feature_noise: 0.0,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn small_model_config() -> ModelConfig {
    ModelConfig {
        variant: Variant::Named("gnn-2l".into()),
        dim: 16,
        heads: 4,
        ..Default::default()
    }
}

fn inputs_for(g: &HeteroGraph, cfg: &ModelConfig) -> GraphInputs {
    let structures: Vec<_> = cfg
        .structures
        .iter()
        .map(|s| SemanticStructure::parse(s).unwrap())
        .collect();
    GraphInputs::from_graph(g, &structures, Execution::Parallel).unwrap()
}

fn run(g: &HeteroGraph, cfg: &ModelConfig, tc: &TrainConfig) -> (HaeModel, GraphInputs, TrainReport) {
    let inputs = inputs_for(g, cfg);
    let labels = g.labels().unwrap();
    let split = protocol_split(g, tc.train_ratio, tc.val_ratio, tc.seed).unwrap();
    let model = HaeModel::build(cfg, inputs.feature_dim(), labels.num_classes(), &mut RngStream::new(tc.seed)).unwrap();
    let report = train(&model, &inputs, labels, &split, tc).unwrap();
    (model, inputs, report)
}

#[test]
fn separable_communities_are_learned() {
    let cfg = small_model_config();
    for seed in 0..10 {
        let g = two_communities(seed);
        let tc = TrainConfig {
            seed,
            ..Default::default()
        };
        let (_, _, report) = run(&g, &cfg, &tc);
        let first = &report.epochs[0];
        let best = &report.epochs[report.best_epoch];
        assert!(report.epochs.last().unwrap().train_loss < first.train_loss, "seed {seed}");
        assert!(best.val_macro_f1.unwrap() > 0.9, "seed {seed}: {:?}", best.val_macro_f1);
    }
}

#[test]
fn first_epoch_loss_is_near_uniform_prediction() {
    let g = generate_synthetic_hin(&SyntheticConfig {
        authors: 80,
        papers: 200,
        ..Default::default()
    })
    .unwrap();
    let cfg = small_model_config();
    let tc = TrainConfig {
        epochs: 1,
        patience: 1,
        ..Default::default()
    };
    let split = protocol_split(&g, tc.train_ratio, tc.val_ratio, tc.seed).unwrap();
    let (_, _, report) = run(&g, &cfg, &tc);
    let anchor = split.train_ids.len() as f64 * 4f64.ln();
    let loss = report.epochs[0].train_loss;
    assert!((loss - anchor).abs() <= 0.2 * anchor, "{loss} vs {anchor}");
}

#[test]
fn training_is_deterministic_and_keeps_the_best_epoch() {
    let g = two_communities(3);
    let cfg = small_model_config();
    let tc = TrainConfig {
        epochs: 40,
        patience: 5,
        learning_rate: 5e-3,
        seed: 9,
        ..Default::default()
    };
    let (a, inputs, mut ra) = run(&g, &cfg, &tc);
    let (b, _, mut rb) = run(&g, &cfg, &tc);
    ra.timing = None;
    rb.timing = None;
    assert_eq!(ra, rb);
    assert_eq!(a.snapshot(), b.snapshot());

    assert_eq!(ra.epochs.len(), ra.epochs.iter().map(|e| e.epoch).max().unwrap() + 1);
    let losses: Vec<f64> = ra.epochs.iter().map(|e| e.val_loss.unwrap()).collect();
    let best = ra.best_val_loss.unwrap();
    assert!(losses.iter().all(|&l| l >= best));
    assert_eq!(losses[ra.best_epoch], best);
    if ra.stopped_early {
        assert_eq!(ra.epochs.len(), ra.best_epoch + 1 + tc.patience);
    }

    // restored parameters reproduce the best validation loss
    let split = protocol_split(&g, tc.train_ratio, tc.val_ratio, tc.seed).unwrap();
    let labels = g.labels().unwrap();
    let y = Matrix::from_fn(inputs.n(), 2, |i, c| if labels.of(i) == Some(c) { 1.0 } else { 0.0 });
    let out = a.forward_eval(&inputs).unwrap();
    let restored = out.logits.cross_entropy(&y, &split.val_ids).unwrap().item();
    assert_eq!(restored, best);

    assert_eq!(ra.omega.len(), 1);
    let total: f64 = ra.omega[0].weights.iter().map(|w| w.weight).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_configs_fail_before_training() {
    let g = two_communities(0);
    let cfg = small_model_config();
    let inputs = inputs_for(&g, &cfg);
    let labels = g.labels().unwrap();
    let split = protocol_split(&g, 0.8, 0.1, 0).unwrap();
    let model = HaeModel::build(&cfg, inputs.feature_dim(), 2, &mut RngStream::new(0)).unwrap();
    let before = model.snapshot();
    for tc in [
        TrainConfig { epochs: 0, patience: 0, ..Default::default() },
        TrainConfig { patience: 200, ..Default::default() },
        TrainConfig { learning_rate: -1.0, ..Default::default() },
    ] {
        assert!(matches!(train(&model, &inputs, labels, &split, &tc), Err(TrainError::Config(_))));
    }
    let mut empty = split.clone();
    empty.train_ids.clear();
    assert!(matches!(
        train(&model, &inputs, labels, &empty, &TrainConfig::default()),
        Err(TrainError::EmptySplit(_))
    ));
    assert_eq!(model.snapshot(), before);
}

#[test]
fn checkpoints_and_datasets_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_communities(5);
    let paths = DatasetPaths::in_dir(dir.path());
    save_hetero_graph(&g, &paths).unwrap();
    let back = load_hetero_graph(&paths.nodes, &paths.edges, Some(&paths.features)).unwrap();
    assert_eq!(back, g);

    let cfg = small_model_config();
    let tc = TrainConfig {
        epochs: 5,
        patience: 5,
        ..Default::default()
    };
    let (model, inputs, _) = run(&g, &cfg, &tc);
    let path = dir.path().join("model.bin");
    save_checkpoint(&path, &model.snapshot()).unwrap();
    let restored = HaeModel::from_parameters(&cfg, inputs.feature_dim(), 2, &load_checkpoint(&path).unwrap()).unwrap();
    assert_eq!(
        extract_embeddings(&restored, &inputs).unwrap(),
        extract_embeddings(&model, &inputs).unwrap()
    );
}
