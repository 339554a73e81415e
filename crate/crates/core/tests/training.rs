use ponwatch::dataset::NetworkSample;
use ponwatch::models::{train, BranchClassifier, TrainConfig, Trainable};
use ponwatch::nn::{AdamState, ParamSet};
use ponwatch::rng::stream_rng;
use ponwatch::Error;

fn toy_set() -> Vec<NetworkSample> {
    (0..20)
        .map(|k| {
            let label = k % 2;
            let level = if label == 0 { 0.1 } else { 0.9 } + 0.01 * (k / 2) as f64;
            NetworkSample { values: vec![level; 4], label, pnr_db: 30.0 }
        })
        .collect()
}

fn toy_model(seed: u64) -> BranchClassifier<f64> {
    BranchClassifier::new(&[4], 4, 2, &mut stream_rng(seed, 0)).unwrap()
}

fn toy_config() -> TrainConfig {
    TrainConfig { learning_rate: 1e-2, batch_size: 5, max_epochs: 200, patience: 200, seed: 1, ..TrainConfig::new(1) }
}

#[test]
fn separable_toy_set_is_learned() {
    let data = toy_set();
    let refs: Vec<&NetworkSample> = data.iter().collect();
    let out = train(toy_model(1), &refs, &[], &toy_config(), |_| {}).unwrap();
    let correct = data.iter().filter(|s| out.model.predict(&s.values).unwrap() == s.label).count();
    assert_eq!(correct, 20);
}

#[test]
fn one_adam_step_descends() {
    let data = toy_set();
    let mut model = toy_model(2);
    let batch_loss = |m: &BranchClassifier<f64>| data.iter().map(|s| m.eval_sample(s, &[1.0]).unwrap().0).sum::<f64>();
    let before = batch_loss(&model);
    let mut grads = model.zeros_like();
    for s in &data {
        model.loss_grad(s, &[1.0], &mut grads).unwrap();
    }
    let mut adam = AdamState::new(&model, 1e-4);
    adam.step(&mut model, &grads).unwrap();
    assert!(batch_loss(&model) < before);
}

#[test]
fn training_is_deterministic() {
    let data = toy_set();
    let refs: Vec<&NetworkSample> = data.iter().collect();
    let cfg = TrainConfig { max_epochs: 15, ..toy_config() };
    let run = || {
        let out = train(toy_model(3), &refs[..14], &refs[14..], &cfg, |_| {}).unwrap();
        let mut hist = Vec::new();
        out.write_history_csv(&mut hist).unwrap();
        (out.model.to_checkpoint(&Default::default()), hist, out.history.last().unwrap().val_loss.to_bits())
    };
    assert_eq!(run(), run());
}

#[test]
fn non_finite_input_is_rejected() {
    let mut data = toy_set();
    data[3].values[1] = f64::NAN;
    let refs: Vec<&NetworkSample> = data.iter().collect();
    let err = train(toy_model(4), &refs, &[], &toy_config(), |_| {}).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
}

#[test]
fn divergence_reports_epoch() {
    let data = toy_set();
    let refs: Vec<&NetworkSample> = data.iter().collect();
    let cfg = TrainConfig { learning_rate: 1e308, ..toy_config() };
    let err = train(toy_model(4), &refs, &[], &cfg, |_| {}).unwrap_err();
    assert!(matches!(err, Error::Diverged { epoch: 1 }), "{err}");
}

#[test]
fn early_stopping_keeps_best_parameters() {
    let data = toy_set();
    let refs: Vec<&NetworkSample> = data.iter().collect();
    let cfg = TrainConfig { learning_rate: 0.5, max_epochs: 40, patience: 3, ..toy_config() };
    let out = train(toy_model(5), &refs[..14], &refs[14..], &cfg, |_| {}).unwrap();
    let best = out.history.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.history[out.best_epoch - 1].val_loss, best);
    let last = out.history.len();
    assert!(last == 40 || last - out.best_epoch == 3);
}
