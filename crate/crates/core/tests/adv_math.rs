//! Numeric properties of the adversarial objective: exactness at
//! epsilon = 0, first-order growth along the normalized gradient,
//! perturbation norms, gradient checks, and training behavior.

use corefkit::adv_coref::{
    adversarial_loss, build_span_set, coreference_scores, demo_dataset, encode_tokens,
    gradient_check, marginal_loss, prepare_document, seed0_fixture, span_gradients, total_loss,
    train, train_baseline, AdvConfig, ModelConfig, ModelParams, PreparedDoc, SpanSet, Vocab,
};

fn fixture_with_params(seed: u64) -> (PreparedDoc, ModelParams, SpanSet) {
    let (doc, params0) = seed0_fixture();
    let params = ModelParams::init(params0.config, seed);
    let enc = encode_tokens(&doc.token_ids, &params);
    let set = build_span_set(&enc, &doc.spans, &params).unwrap();
    (doc, params, set)
}

#[test]
fn zero_epsilon_equals_base_loss_on_ten_fixtures() {
    for seed in 0..10u64 {
        let (doc, params, set) = fixture_with_params(seed);
        let base = marginal_loss(&coreference_scores(&set, &params), &doc.gold).unwrap();
        let adv = adversarial_loss(&set, &doc.gold, &params, 0.0).unwrap();
        assert!((adv - base).abs() < 1e-12, "seed {seed}: {adv} vs {base}");
    }
}

#[test]
fn small_epsilon_growth_matches_gradient_norms_to_first_order() {
    let eps = 1e-4;
    for seed in 0..10u64 {
        let (doc, params, set) = fixture_with_params(seed);
        let base = marginal_loss(&coreference_scores(&set, &params), &doc.gold).unwrap();
        let adv = adversarial_loss(&set, &doc.gold, &params, eps).unwrap();
        let sum_norms: f64 = span_gradients(&set, &doc.gold, &params)
            .unwrap()
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum();
        assert!(sum_norms > 0.0, "seed {seed}: degenerate fixture");
        let predicted = eps * sum_norms;
        let rel = ((adv - base) - predicted).abs() / predicted;
        assert!(rel < 1e-2, "seed {seed}: relative error {rel}");
    }
}

#[test]
fn applied_perturbations_have_norm_epsilon_and_reproduce_the_loss() {
    let eps = 1.0;
    for seed in 0..5u64 {
        let (doc, params, set) = fixture_with_params(seed);
        let grads = span_gradients(&set, &doc.gold, &params).unwrap();
        let mut perturbed = set.clone();
        for (g, grad) in perturbed.g.iter_mut().zip(grads.iter()) {
            let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let delta: Vec<f64> = grad.iter().map(|v| eps * v / norm).collect();
            let delta_norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((delta_norm - eps).abs() < 1e-9, "seed {seed}");
            for (x, d) in g.iter_mut().zip(delta.iter()) {
                *x += d;
            }
        }
        let manual = marginal_loss(&coreference_scores(&perturbed, &params), &doc.gold).unwrap();
        let adv = adversarial_loss(&set, &doc.gold, &params, eps).unwrap();
        assert_eq!(manual, adv, "seed {seed}");
    }
}

#[test]
fn total_loss_blend_is_exact_at_the_default_config() {
    let (doc, params, set) = fixture_with_params(3);
    let cfg = AdvConfig::default();
    assert_eq!(cfg.alpha, 0.6);
    assert_eq!(cfg.epsilon, 1.0);
    let breakdown = total_loss(&set, &doc.gold, &params, &cfg).unwrap();
    assert_eq!(
        breakdown.total,
        0.6 * breakdown.base + 0.4 * breakdown.adversarial
    );
    assert!(breakdown.base > 0.0);
}

#[test]
fn gradients_match_finite_differences_for_both_alphas() {
    let (doc, params) = seed0_fixture();
    for alpha in [1.0, 0.6] {
        let cfg = AdvConfig {
            alpha,
            epsilon: 1.0,
        };
        let report = gradient_check(&doc, &params, &cfg).unwrap();
        assert!(
            report.max_relative_error < 1e-4,
            "alpha {alpha}: {:?}",
            report.per_group
        );
    }
}

fn demo_prepared() -> (Vec<PreparedDoc>, ModelConfig) {
    let docs = demo_dataset();
    let vocab = Vocab::build(&docs);
    let config = ModelConfig::toy(vocab.len());
    let dataset = docs
        .iter()
        .map(|d| prepare_document(d, &vocab, config.max_width).unwrap())
        .collect();
    (dataset, config)
}

#[test]
fn training_halves_the_loss_and_reproduces_bit_for_bit() {
    let (dataset, config) = demo_prepared();
    let cfg = AdvConfig::default();
    let result = train(&dataset, config, &cfg, 200, 0.1, 0).unwrap();
    assert_eq!(result.curve.len(), 200);
    let initial = result.curve[0].total;
    let final_ = result.curve[199].total;
    assert!(
        final_ <= 0.5 * initial,
        "total loss {initial} -> {final_}, less than 50% reduction"
    );
    let again = train(&dataset, config, &cfg, 200, 0.1, 0).unwrap();
    assert_eq!(result.curve, again.curve);
    assert_eq!(result.params, again.params);
}

#[test]
fn alpha_one_training_equals_the_baseline_trainer() {
    let (dataset, config) = demo_prepared();
    let cfg = AdvConfig {
        alpha: 1.0,
        epsilon: 1.0,
    };
    let adversarial = train(&dataset, config, &cfg, 60, 0.1, 4).unwrap();
    let (base_params, base_curve) = train_baseline(&dataset, config, 60, 0.1, 4).unwrap();
    let totals: Vec<f64> = adversarial.curve.iter().map(|b| b.total).collect();
    assert_eq!(totals, base_curve);
    assert_eq!(adversarial.params, base_params);
}
