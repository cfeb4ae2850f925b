//! Desk-scale span-ranking coreference model with adversarial training.
//!
//! For each candidate span the model builds a representation `g_i`, scores
//! mentions and antecedent pairs, and minimizes the marginal log-likelihood
//! of gold antecedents against a fixed-zero dummy antecedent. The
//! adversarial loss re-evaluates the same loss at
//! `g_i + epsilon * grad_i / ||grad_i||`, where `grad_i` is the loss
//! gradient with respect to `g_i`, treated as a constant thereafter. The
//! training objective blends the two:
//! `total = alpha * base + (1 - alpha) * adversarial`.

mod model;
pub mod tape;

pub use model::{group_len, ModelConfig, ModelParams, GROUP_NAMES};

use model::{
    encode_on_tape, loss_on_tape, scores_on_tape, span_rep_on_tape, TapeParams,
};
use tape::{Tape, Var};
use thiserror::Error;

use crate::conll_io::Span;

#[derive(Debug, Error)]
pub enum AdvCorefError {
    #[error("span width {width} exceeds the maximum {max}")]
    WidthOverflow { width: usize, max: usize },
    #[error("span {span} has an empty or invalid gold antecedent set")]
    EmptyGoldSet { span: usize },
    #[error("loss diverged (non-finite) at iteration {iteration}")]
    DivergedLoss { iteration: usize },
    #[error("non-finite gradient in parameter group {group}")]
    NonFiniteGradient { group: String },
    #[error("line {line}: cannot parse toy dataset: {reason}")]
    Parse { line: usize, reason: String },
}

/// A gold antecedent choice for one span: an earlier span index or the
/// dummy "no antecedent".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Antecedent {
    Dummy,
    Span(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenEncoding {
    pub x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanSet {
    pub spans: Vec<Span>,
    pub g: Vec<Vec<f64>>,
}

/// Mention scores per span and raw antecedent scores for pairs (i, j),
/// j < i; `antecedent[i]` has length `i`. The coreference score adds the
/// two mention scores, and the dummy antecedent is fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub mention: Vec<f64>,
    pub antecedent: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn len(&self) -> usize {
        self.mention.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mention.is_empty()
    }

    pub fn coref_score(&self, i: usize, j: usize) -> f64 {
        self.mention[i] + self.mention[j] + self.antecedent[i][j]
    }

    pub fn dummy_score(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvConfig {
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for AdvConfig {
    fn default() -> Self {
        AdvConfig {
            alpha: 0.6,
            epsilon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub base: f64,
    pub adversarial: f64,
    pub total: f64,
    pub per_span_grad_norms: Vec<f64>,
}

/// All candidate spans of length at most `max_width`, ordered by
/// (start, end); this is also the antecedent candidate order.
pub fn enumerate_spans(n_tokens: usize, max_width: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    for start in 0..n_tokens {
        for end in start..(start + max_width).min(n_tokens) {
            spans.push(Span::new(start, end));
        }
    }
    spans
}

pub fn encode_tokens(token_ids: &[usize], params: &ModelParams) -> TokenEncoding {
    let mut tape = Tape::new();
    let tp = TapeParams::load(&mut tape, params);
    let x = encode_on_tape(&mut tape, &tp, token_ids);
    TokenEncoding {
        x: x.iter()
            .map(|v| v.iter().map(|&var| tape.value(var)).collect())
            .collect(),
    }
}

pub fn span_representation(
    enc: &TokenEncoding,
    span: Span,
    params: &ModelParams,
) -> Result<Vec<f64>, AdvCorefError> {
    let mut tape = Tape::new();
    let tp = TapeParams::load(&mut tape, params);
    let x = load_x(&mut tape, enc);
    let g = span_rep_on_tape(&mut tape, &tp, &x, span)?;
    Ok(g.iter().map(|&v| tape.value(v)).collect())
}

pub fn build_span_set(
    enc: &TokenEncoding,
    spans: &[Span],
    params: &ModelParams,
) -> Result<SpanSet, AdvCorefError> {
    let mut tape = Tape::new();
    let tp = TapeParams::load(&mut tape, params);
    let x = load_x(&mut tape, enc);
    let mut g = Vec::with_capacity(spans.len());
    for span in spans {
        let rep = span_rep_on_tape(&mut tape, &tp, &x, *span)?;
        g.push(rep.iter().map(|&v| tape.value(v)).collect());
    }
    Ok(SpanSet {
        spans: spans.to_vec(),
        g,
    })
}

fn load_x(tape: &mut Tape, enc: &TokenEncoding) -> Vec<Vec<Var>> {
    enc.x
        .iter()
        .map(|row| row.iter().map(|&v| tape.leaf(v)).collect())
        .collect()
}

fn load_g(tape: &mut Tape, set: &SpanSet) -> Vec<Vec<Var>> {
    set.g
        .iter()
        .map(|row| row.iter().map(|&v| tape.leaf(v)).collect())
        .collect()
}

pub fn coreference_scores(set: &SpanSet, params: &ModelParams) -> ScoreMatrix {
    let mut tape = Tape::new();
    let tp = TapeParams::load(&mut tape, params);
    let g = load_g(&mut tape, set);
    let (mention, antecedent) = scores_on_tape(&mut tape, &tp, &g);
    ScoreMatrix {
        mention: mention.iter().map(|&v| tape.value(v)).collect(),
        antecedent: antecedent
            .iter()
            .map(|row| row.iter().map(|&v| tape.value(v)).collect())
            .collect(),
    }
}

/// Argmax over the dummy and all earlier candidates; a candidate must
/// strictly beat the dummy's zero, and ties among candidates go to the
/// earliest index.
pub fn predict_antecedents(scores: &ScoreMatrix) -> Vec<Option<usize>> {
    (0..scores.len())
        .map(|i| {
            let mut best: Option<usize> = None;
            let mut best_score = scores.dummy_score();
            for j in 0..i {
                let s = scores.coref_score(i, j);
                if s > best_score {
                    best_score = s;
                    best = Some(j);
                }
            }
            best
        })
        .collect()
}

/// Negative log marginal probability of the gold antecedent sets.
pub fn marginal_loss(
    scores: &ScoreMatrix,
    gold: &[Vec<Antecedent>],
) -> Result<f64, AdvCorefError> {
    let mut tape = Tape::new();
    let mention: Vec<Var> = scores.mention.iter().map(|&v| tape.leaf(v)).collect();
    let antecedent: Vec<Vec<Var>> = scores
        .antecedent
        .iter()
        .map(|row| row.iter().map(|&v| tape.leaf(v)).collect())
        .collect();
    let loss = loss_on_tape(&mut tape, &mention, &antecedent, gold)?;
    Ok(tape.value(loss))
}

/// Gradient of the marginal loss with respect to each span representation.
pub fn span_gradients(
    set: &SpanSet,
    gold: &[Vec<Antecedent>],
    params: &ModelParams,
) -> Result<Vec<Vec<f64>>, AdvCorefError> {
    let mut tape = Tape::new();
    let tp = TapeParams::load(&mut tape, params);
    let g = load_g(&mut tape, set);
    let (mention, antecedent) = scores_on_tape(&mut tape, &tp, &g);
    let loss = loss_on_tape(&mut tape, &mention, &antecedent, gold)?;
    let adjoints = tape.grad(loss);
    Ok(g.iter()
        .map(|row| row.iter().map(|v| adjoints[v.0 as usize]).collect())
        .collect())
}

fn normalize_or_zero(grad: &[f64]) -> (Vec<f64>, f64) {
    let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        (vec![0.0; grad.len()], 0.0)
    } else {
        (grad.iter().map(|v| v / norm).collect(), norm)
    }
}

fn adversarial_parts(
    set: &SpanSet,
    gold: &[Vec<Antecedent>],
    params: &ModelParams,
    epsilon: f64,
) -> Result<(f64, Vec<f64>), AdvCorefError> {
    let grads = span_gradients(set, gold, params)?;
    let mut norms = Vec::with_capacity(grads.len());
    let mut perturbed = set.clone();
    for (g, grad) in perturbed.g.iter_mut().zip(grads.iter()) {
        let (dir, norm) = normalize_or_zero(grad);
        norms.push(norm);
        for (v, d) in g.iter_mut().zip(dir.iter()) {
            *v += epsilon * d;
        }
    }
    let scores = coreference_scores(&perturbed, params);
    Ok((marginal_loss(&scores, gold)?, norms))
}

/// The base loss evaluated at span representations pushed distance
/// `epsilon` along their normalized loss gradients. Spans with zero
/// gradient are left unperturbed.
pub fn adversarial_loss(
    set: &SpanSet,
    gold: &[Vec<Antecedent>],
    params: &ModelParams,
    epsilon: f64,
) -> Result<f64, AdvCorefError> {
    Ok(adversarial_parts(set, gold, params, epsilon)?.0)
}

pub fn total_loss(
    set: &SpanSet,
    gold: &[Vec<Antecedent>],
    params: &ModelParams,
    cfg: &AdvConfig,
) -> Result<LossBreakdown, AdvCorefError> {
    let scores = coreference_scores(set, params);
    let base = marginal_loss(&scores, gold)?;
    let (adversarial, per_span_grad_norms) = adversarial_parts(set, gold, params, cfg.epsilon)?;
    Ok(LossBreakdown {
        base,
        adversarial,
        total: cfg.alpha * base + (1.0 - cfg.alpha) * adversarial,
        per_span_grad_norms,
    })
}

/// One training document, already tokenized against a vocabulary, with
/// candidate spans and per-span gold antecedent sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDoc {
    pub token_ids: Vec<usize>,
    pub spans: Vec<Span>,
    pub gold: Vec<Vec<Antecedent>>,
}

struct FullForward {
    tp: TapeParams,
    total: Var,
    base_value: f64,
    adv_value: f64,
    norms: Vec<f64>,
    dirs: Vec<Vec<f64>>,
}

/// End-to-end pass from parameters to the blended loss. The perturbation
/// directions are recomputed from the current parameters and then held
/// constant, so gradients of `total` do not flow through them.
fn forward_total(
    tape: &mut Tape,
    params: &ModelParams,
    doc: &PreparedDoc,
    cfg: &AdvConfig,
) -> Result<FullForward, AdvCorefError> {
    let tp = TapeParams::load(tape, params);
    let x = encode_on_tape(tape, &tp, &doc.token_ids);
    let mut g = Vec::with_capacity(doc.spans.len());
    for span in &doc.spans {
        g.push(span_rep_on_tape(tape, &tp, &x, *span)?);
    }
    let (mention, antecedent) = scores_on_tape(tape, &tp, &g);
    let base = loss_on_tape(tape, &mention, &antecedent, &doc.gold)?;

    let adjoints = tape.grad(base);
    let mut dirs = Vec::with_capacity(g.len());
    let mut norms = Vec::with_capacity(g.len());
    for row in &g {
        let grad: Vec<f64> = row.iter().map(|v| adjoints[v.0 as usize]).collect();
        let (dir, norm) = normalize_or_zero(&grad);
        dirs.push(dir);
        norms.push(norm);
    }
    let adv = forward_adversarial(tape, &tp, &g, &dirs, cfg.epsilon, doc)?;
    let scaled_base = tape.mul_const(base, cfg.alpha);
    let scaled_adv = tape.mul_const(adv, 1.0 - cfg.alpha);
    let total = tape.add(scaled_base, scaled_adv);
    Ok(FullForward {
        base_value: tape.value(base),
        adv_value: tape.value(adv),
        total,
        norms,
        dirs,
        tp,
    })
}

fn forward_adversarial(
    tape: &mut Tape,
    tp: &TapeParams,
    g: &[Vec<Var>],
    dirs: &[Vec<f64>],
    epsilon: f64,
    doc: &PreparedDoc,
) -> Result<Var, AdvCorefError> {
    let perturbed: Vec<Vec<Var>> = g
        .iter()
        .zip(dirs.iter())
        .map(|(row, dir)| {
            row.iter()
                .zip(dir.iter())
                .map(|(&v, &d)| tape.add_const(v, epsilon * d))
                .collect()
        })
        .collect();
    let (mention, antecedent) = scores_on_tape(tape, tp, &perturbed);
    loss_on_tape(tape, &mention, &antecedent, &doc.gold)
}

/// The blended loss value with perturbation directions supplied from
/// outside; this is the function the analytic gradient differentiates, so
/// finite differences of it are the matching oracle.
fn total_value_with_fixed_dirs(
    params: &ModelParams,
    doc: &PreparedDoc,
    cfg: &AdvConfig,
    dirs: &[Vec<f64>],
) -> Result<f64, AdvCorefError> {
    let mut tape = Tape::new();
    let tp = TapeParams::load(&mut tape, params);
    let x = encode_on_tape(&mut tape, &tp, &doc.token_ids);
    let mut g = Vec::with_capacity(doc.spans.len());
    for span in &doc.spans {
        g.push(span_rep_on_tape(&mut tape, &tp, &x, *span)?);
    }
    let (mention, antecedent) = scores_on_tape(&mut tape, &tp, &g);
    let base = loss_on_tape(&mut tape, &mention, &antecedent, &doc.gold)?;
    let adv = forward_adversarial(&mut tape, &tp, &g, dirs, cfg.epsilon, doc)?;
    Ok(cfg.alpha * tape.value(base) + (1.0 - cfg.alpha) * tape.value(adv))
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_group: Vec<(&'static str, f64)>,
    pub max_relative_error: f64,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Compares analytic gradients of the blended loss against central finite
/// differences, group by group.
pub fn gradient_check(
    doc: &PreparedDoc,
    params: &ModelParams,
    cfg: &AdvConfig,
) -> Result<GradCheckReport, AdvCorefError> {
    let step = 1e-4;
    let mut tape = Tape::new();
    let forward = forward_total(&mut tape, params, doc, cfg)?;
    let adjoints = tape.grad(forward.total);
    let analytic = forward.tp.extract_grads(&adjoints);
    for (group, grads) in &analytic {
        if grads.iter().any(|v| !v.is_finite()) {
            return Err(AdvCorefError::NonFiniteGradient {
                group: group.to_string(),
            });
        }
    }

    let mut per_group = Vec::with_capacity(analytic.len());
    let mut max_err = 0.0f64;
    for (gi, (group, grads)) in analytic.iter().enumerate() {
        let mut group_err = 0.0f64;
        for k in 0..grads.len() {
            let mut plus = params.clone();
            plus.groups_mut().nth(gi).unwrap().1[k] += step;
            let mut minus = params.clone();
            minus.groups_mut().nth(gi).unwrap().1[k] -= step;
            let f_plus = total_value_with_fixed_dirs(&plus, doc, cfg, &forward.dirs)?;
            let f_minus = total_value_with_fixed_dirs(&minus, doc, cfg, &forward.dirs)?;
            let numeric = (f_plus - f_minus) / (2.0 * step);
            group_err = group_err.max(relative_error(grads[k], numeric));
        }
        per_group.push((*group, group_err));
        max_err = max_err.max(group_err);
    }
    Ok(GradCheckReport {
        per_group,
        max_relative_error: max_err,
    })
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams,
    pub curve: Vec<LossBreakdown>,
}

/// Plain gradient descent on the blended loss, deterministic given the
/// seed. The objective is the mean per-document loss, accumulated in
/// dataset order; the curve records each iteration's losses at the
/// parameters before that iteration's update.
pub fn train(
    dataset: &[PreparedDoc],
    config: ModelConfig,
    cfg: &AdvConfig,
    iterations: usize,
    step: f64,
    seed: u64,
) -> Result<TrainResult, AdvCorefError> {
    let mut params = ModelParams::init(config, seed);
    let mut curve = Vec::with_capacity(iterations);
    for iteration in 0..iterations {
        let mut acc: Vec<Vec<f64>> = GROUP_NAMES
            .iter()
            .map(|name| vec![0.0; group_len(&config, name)])
            .collect();
        let mut base_sum = 0.0;
        let mut adv_sum = 0.0;
        let mut norms = Vec::new();
        for doc in dataset {
            let mut tape = Tape::new();
            let forward = forward_total(&mut tape, &params, doc, cfg)?;
            let adjoints = tape.grad(forward.total);
            for (bucket, (_, grads)) in
                acc.iter_mut().zip(forward.tp.extract_grads(&adjoints))
            {
                for (b, g) in bucket.iter_mut().zip(grads) {
                    *b += g;
                }
            }
            base_sum += forward.base_value;
            adv_sum += forward.adv_value;
            norms.extend(forward.norms);
        }
        let n = dataset.len() as f64;
        for bucket in &mut acc {
            for g in bucket.iter_mut() {
                *g /= n;
            }
        }
        base_sum /= n;
        adv_sum /= n;
        let total = cfg.alpha * base_sum + (1.0 - cfg.alpha) * adv_sum;
        if !total.is_finite() {
            return Err(AdvCorefError::DivergedLoss { iteration });
        }
        curve.push(LossBreakdown {
            base: base_sum,
            adversarial: adv_sum,
            total,
            per_span_grad_norms: norms,
        });
        for ((_, group), grads) in params.groups_mut().zip(acc.iter()) {
            for (p, g) in group.iter_mut().zip(grads) {
                *p -= step * g;
            }
        }
    }
    Ok(TrainResult { params, curve })
}

/// Gradient descent on the mean per-document base loss alone, for
/// comparison against an `alpha = 1` adversarial run.
pub fn train_baseline(
    dataset: &[PreparedDoc],
    config: ModelConfig,
    iterations: usize,
    step: f64,
    seed: u64,
) -> Result<(ModelParams, Vec<f64>), AdvCorefError> {
    let mut params = ModelParams::init(config, seed);
    let mut curve = Vec::with_capacity(iterations);
    for iteration in 0..iterations {
        let mut acc: Vec<Vec<f64>> = GROUP_NAMES
            .iter()
            .map(|name| vec![0.0; group_len(&config, name)])
            .collect();
        let mut base_sum = 0.0;
        for doc in dataset {
            let mut tape = Tape::new();
            let tp = TapeParams::load(&mut tape, &params);
            let x = encode_on_tape(&mut tape, &tp, &doc.token_ids);
            let mut g = Vec::with_capacity(doc.spans.len());
            for span in &doc.spans {
                g.push(span_rep_on_tape(&mut tape, &tp, &x, *span)?);
            }
            let (mention, antecedent) = scores_on_tape(&mut tape, &tp, &g);
            let base = loss_on_tape(&mut tape, &mention, &antecedent, &doc.gold)?;
            let adjoints = tape.grad(base);
            for (bucket, (_, grads)) in acc.iter_mut().zip(tp.extract_grads(&adjoints)) {
                for (b, g) in bucket.iter_mut().zip(grads) {
                    *b += g;
                }
            }
            base_sum += tape.value(base);
        }
        let n = dataset.len() as f64;
        for bucket in &mut acc {
            for g in bucket.iter_mut() {
                *g /= n;
            }
        }
        base_sum /= n;
        if !base_sum.is_finite() {
            return Err(AdvCorefError::DivergedLoss { iteration });
        }
        curve.push(base_sum);
        for ((_, group), grads) in params.groups_mut().zip(acc.iter()) {
            for (p, g) in group.iter_mut().zip(grads) {
                *p -= step * g;
            }
        }
    }
    Ok((params, curve))
}

// ---------------------------------------------------------------------
// Toy dataset format
// ---------------------------------------------------------------------

/// A raw toy document: whitespace tokens and gold clusters over
/// `start-end` token spans.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDocument {
    pub name: String,
    pub tokens: Vec<String>,
    pub clusters: Vec<Vec<Span>>,
}

/// Line-oriented toy corpus:
///
/// ```text
/// #doc <name>
/// tokens: w1 w2 w3 ...
/// cluster: 0-0 4-4
/// cluster: 2-2 6-6
/// #end
/// ```
pub fn parse_toy_dataset(stream: &str) -> Result<Vec<ToyDocument>, AdvCorefError> {
    let mut docs = Vec::new();
    let mut current: Option<ToyDocument> = None;
    for (i, line) in stream.lines().enumerate() {
        let line = line.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix("#doc") {
            if current.is_some() {
                return Err(AdvCorefError::Parse {
                    line: lineno,
                    reason: "#doc inside an open document".into(),
                });
            }
            current = Some(ToyDocument {
                name: name.trim().to_string(),
                tokens: Vec::new(),
                clusters: Vec::new(),
            });
        } else if line == "#end" {
            let doc = current.take().ok_or(AdvCorefError::Parse {
                line: lineno,
                reason: "#end without #doc".into(),
            })?;
            for cluster in &doc.clusters {
                for span in cluster {
                    if span.end >= doc.tokens.len() {
                        return Err(AdvCorefError::Parse {
                            line: lineno,
                            reason: format!("span {span} out of range in {}", doc.name),
                        });
                    }
                }
            }
            docs.push(doc);
        } else if let Some(words) = line.strip_prefix("tokens:") {
            let doc = current.as_mut().ok_or(AdvCorefError::Parse {
                line: lineno,
                reason: "tokens outside a document".into(),
            })?;
            doc.tokens = words.split_whitespace().map(str::to_string).collect();
        } else if let Some(spans) = line.strip_prefix("cluster:") {
            let doc = current.as_mut().ok_or(AdvCorefError::Parse {
                line: lineno,
                reason: "cluster outside a document".into(),
            })?;
            let mut cluster = Vec::new();
            for item in spans.split_whitespace() {
                let (a, b) = item.split_once('-').ok_or_else(|| AdvCorefError::Parse {
                    line: lineno,
                    reason: format!("expected start-end, found {item:?}"),
                })?;
                let start = a.parse().map_err(|_| AdvCorefError::Parse {
                    line: lineno,
                    reason: format!("bad span start {a:?}"),
                })?;
                let end = b.parse().map_err(|_| AdvCorefError::Parse {
                    line: lineno,
                    reason: format!("bad span end {b:?}"),
                })?;
                if start > end {
                    return Err(AdvCorefError::Parse {
                        line: lineno,
                        reason: format!("inverted span {item:?}"),
                    });
                }
                cluster.push(Span::new(start, end));
            }
            doc.clusters.push(cluster);
        } else {
            return Err(AdvCorefError::Parse {
                line: lineno,
                reason: format!("unrecognized line {line:?}"),
            });
        }
    }
    if current.is_some() {
        return Err(AdvCorefError::Parse {
            line: stream.lines().count(),
            reason: "document not closed with #end".into(),
        });
    }
    Ok(docs)
}

/// Vocabulary in first-occurrence order over a toy corpus.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    words: Vec<String>,
}

impl Vocab {
    pub fn build(docs: &[ToyDocument]) -> Vocab {
        let mut words = Vec::new();
        for doc in docs {
            for token in &doc.tokens {
                if !words.contains(token) {
                    words.push(token.clone());
                }
            }
        }
        Vocab { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }
}

/// Enumerates candidate spans and derives per-span gold antecedent sets
/// from the document's clusters.
pub fn prepare_document(
    doc: &ToyDocument,
    vocab: &Vocab,
    max_width: usize,
) -> Result<PreparedDoc, AdvCorefError> {
    let token_ids = doc
        .tokens
        .iter()
        .map(|t| {
            vocab.id(t).ok_or_else(|| AdvCorefError::Parse {
                line: 0,
                reason: format!("token {t:?} missing from vocabulary"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spans = enumerate_spans(doc.tokens.len(), max_width);
    for cluster in &doc.clusters {
        for span in cluster {
            if span.len() > max_width {
                return Err(AdvCorefError::WidthOverflow {
                    width: span.len(),
                    max: max_width,
                });
            }
        }
    }
    let cluster_of = |span: &Span| -> Option<usize> {
        doc.clusters.iter().position(|c| c.contains(span))
    };
    let gold = spans
        .iter()
        .enumerate()
        .map(|(i, span)| {
            let mut set = Vec::new();
            if let Some(cid) = cluster_of(span) {
                for (j, earlier) in spans[..i].iter().enumerate() {
                    if cluster_of(earlier) == Some(cid) {
                        set.push(Antecedent::Span(j));
                    }
                }
            }
            if set.is_empty() {
                set.push(Antecedent::Dummy);
            }
            set
        })
        .collect();
    Ok(PreparedDoc {
        token_ids,
        spans,
        gold,
    })
}

/// A small built-in corpus for demos and tests.
pub const DEMO_DATASET: &str = "\
#doc story1
tokens: anna met bob she
cluster: 0-0 3-3
#end
#doc story2
tokens: the judge nodded he
cluster: 0-1 3-3
#end
#doc story3
tokens: maria saw her town
cluster: 0-0 2-2
#end
";

pub fn demo_dataset() -> Vec<ToyDocument> {
    parse_toy_dataset(DEMO_DATASET).expect("built-in dataset parses")
}

/// A deterministic small fixture (7 candidate spans) with seed-0 params,
/// used by the gradient-check subcommand and tests.
pub fn seed0_fixture() -> (PreparedDoc, ModelParams) {
    let doc = ToyDocument {
        name: "fixture".into(),
        tokens: ["anna", "met", "bob", "she"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        clusters: vec![vec![Span::new(0, 0), Span::new(3, 3)]],
    };
    let vocab = Vocab::build(std::slice::from_ref(&doc));
    let config = ModelConfig {
        vocab: vocab.len(),
        d_embed: 5,
        d_hidden: 3,
        d_width: 2,
        max_width: 2,
        d_scorer: 4,
    };
    let prepared = prepare_document(&doc, &vocab, config.max_width).expect("fixture prepares");
    (prepared, ModelParams::init(config, 0))
}
