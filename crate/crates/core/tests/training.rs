use denoise_core::graph::{gen_synthetic, SynthConfig};
use denoise_core::trainer::{train, ContrastAnchors, TrainConfig, Trainer};
use denoise_core::Graph;

fn graphs(n: usize, seed: u64) -> Vec<Graph> {
    let cfg = SynthConfig {
        n_graphs: n,
        nodes_lo: 6,
        nodes_hi: 12,
        ..SynthConfig::default()
    };
    gen_synthetic(&cfg, seed).unwrap().graphs().to_vec()
}

fn small(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 3,
        hidden: 16,
        k: 32,
        pool_size: 4,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn stage_one_descends_on_a_fixed_perturbation() {
    let gs = graphs(16, 1);
    let cfg = TrainConfig {
        lr: 1e-3,
        ..small(4)
    };
    let mut trainer = Trainer::new(cfg, gs[0].attr_dim()).unwrap();
    let perturbed = trainer.perturb(&gs).unwrap();
    let losses: Vec<f64> = (0..11).map(|_| trainer.stage1_step_with(&gs, &perturbed).unwrap()).collect();
    let down = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down >= 8, "losses {losses:?}");
}

#[test]
fn stage_two_touches_only_the_encoder() {
    let gs = graphs(16, 2);
    let mut trainer = Trainer::new(small(5), gs[0].attr_dim()).unwrap();
    let before = trainer.model().clone();
    let refresh = trainer.refresh(&gs).unwrap();
    trainer.stage2_step(&gs, &refresh.bank, &refresh.anchors, 0.8).unwrap();
    let after = trainer.model();
    assert_eq!(after.decoder, before.decoder);
    assert_ne!(after.encoder, before.encoder);
}

#[test]
fn zero_weight_disables_stage_two() {
    let gs = graphs(16, 3);
    let cfg = TrainConfig { w: 0.0, ..small(6) };
    let mut trainer = Trainer::new(cfg.clone(), gs[0].attr_dim()).unwrap();
    let before = trainer.model().clone();
    let refresh = trainer.refresh(&gs).unwrap();
    trainer.stage2_step(&gs, &refresh.bank, &refresh.anchors, 0.8).unwrap();
    assert_eq!(trainer.model(), &before);

    let out = train(&gs, &cfg).unwrap();
    assert!(out.history.epochs.iter().all(|e| e.contrast_loss.is_none()));
}

#[test]
fn identical_pools_leave_a_fresh_encoder_unchanged() {
    let gs = graphs(16, 4);
    let mut trainer = Trainer::new(small(7), gs[0].attr_dim()).unwrap();
    let before = trainer.model().clone();
    let refresh = trainer.refresh(&gs).unwrap();
    let anchors = ContrastAnchors {
        positives: refresh.anchors.positives.clone(),
        negatives: refresh.anchors.positives.clone(),
    };
    let loss = trainer.stage2_step(&gs, &refresh.bank, &anchors, 0.8).unwrap();
    assert!((loss + core::f64::consts::LN_2).abs() < 1e-12);
    let after = trainer.model();
    for (a, b) in after.encoder.weights.iter().zip(&before.encoder.weights) {
        let diff = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "moved by {diff:e}");
    }
}

#[test]
fn zero_epochs_return_the_initialization() {
    let gs = graphs(8, 5);
    let cfg = TrainConfig { epochs: 0, ..small(8) };
    let out = train(&gs, &cfg).unwrap();
    let fresh = Trainer::new(cfg, gs[0].attr_dim()).unwrap().into_state();
    assert_eq!(out.state, fresh);
    assert!(out.history.epochs.is_empty());
    assert!(out.bank.is_none());
}

#[test]
fn training_is_deterministic_in_the_seed() {
    let gs = graphs(16, 6);
    let a = train(&gs, &small(9)).unwrap();
    let b = train(&gs, &small(9)).unwrap();
    assert!(a.history.same_trajectory(&b.history));
    assert_eq!(a.state, b.state);
    assert_eq!(a.bank, b.bank);

    let c = train(&gs, &small(10)).unwrap();
    assert!(!a.history.same_trajectory(&c.history));
}

#[test]
fn flagged_fraction_respects_alpha() {
    let gs = graphs(30, 7);
    for alpha in [0.0, 0.1, 0.15, 0.5] {
        let out = train(&gs, &TrainConfig { alpha, ..small(11) }).unwrap();
        let bound = (alpha * gs.len() as f64).ceil() as usize;
        for e in &out.history.epochs {
            assert!(e.flagged <= bound, "alpha {alpha}: {} > {bound}", e.flagged);
        }
    }
}
