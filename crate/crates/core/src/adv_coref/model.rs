//! Model parameters and the tape-level forward pass.
//!
//! The encoder is a tiny trainable embedding followed by a one-layer
//! bidirectional recurrent mixer; span representations concatenate the
//! start vector, the end vector, a softmax-weighted average of the span's
//! vectors (weights are exponentials of a learned per-token head score),
//! and a width embedding. Mention and antecedent scores come from
//! one-hidden-layer tanh feedforward scorers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use super::{AdvCorefError, Antecedent};
use crate::conll_io::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab: usize,
    pub d_embed: usize,
    pub d_hidden: usize,
    pub d_width: usize,
    /// Maximum span length in tokens.
    pub max_width: usize,
    pub d_scorer: usize,
}

impl ModelConfig {
    pub fn d_x(&self) -> usize {
        2 * self.d_hidden
    }

    pub fn g_dim(&self) -> usize {
        3 * self.d_x() + self.d_width
    }

    /// A small configuration for fixtures and demos.
    pub fn toy(vocab: usize) -> ModelConfig {
        ModelConfig {
            vocab,
            d_embed: 5,
            d_hidden: 3,
            d_width: 2,
            max_width: 5,
            d_scorer: 4,
        }
    }
}

pub const GROUP_NAMES: [&str; 18] = [
    "embed",
    "fwd_w_in",
    "fwd_w_rec",
    "fwd_b",
    "bwd_w_in",
    "bwd_w_rec",
    "bwd_b",
    "head_w",
    "head_b",
    "width",
    "mention_w1",
    "mention_b1",
    "mention_w2",
    "mention_b2",
    "ant_w1",
    "ant_b1",
    "ant_w2",
    "ant_b2",
];

pub fn group_len(config: &ModelConfig, name: &str) -> usize {
    let (d_e, d_h, d_x, g) = (
        config.d_embed,
        config.d_hidden,
        config.d_x(),
        config.g_dim(),
    );
    let h = config.d_scorer;
    match name {
        "embed" => config.vocab * d_e,
        "fwd_w_in" | "bwd_w_in" => d_h * d_e,
        "fwd_w_rec" | "bwd_w_rec" => d_h * d_h,
        "fwd_b" | "bwd_b" => d_h,
        "head_w" => d_x,
        "head_b" => 1,
        "width" => config.max_width * config.d_width,
        "mention_w1" => h * g,
        "mention_b1" | "mention_w2" => h,
        "mention_b2" => 1,
        "ant_w1" => h * 3 * g,
        "ant_b1" | "ant_w2" => h,
        "ant_b2" => 1,
        other => panic!("unknown parameter group {other}"),
    }
}

/// All trainable parameters, stored as flat per-group vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    groups: Vec<Vec<f64>>,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = GROUP_NAMES
            .iter()
            .map(|name| {
                (0..group_len(&config, name))
                    .map(|_| rng.gen_range(-0.3..0.3))
                    .collect()
            })
            .collect();
        ModelParams { config, groups }
    }

    pub fn group(&self, name: &str) -> &[f64] {
        let idx = GROUP_NAMES.iter().position(|n| *n == name).expect("group");
        &self.groups[idx]
    }

    pub fn groups(&self) -> impl Iterator<Item = (&'static str, &[f64])> {
        GROUP_NAMES
            .iter()
            .zip(self.groups.iter())
            .map(|(name, g)| (*name, g.as_slice()))
    }

    pub fn groups_mut(&mut self) -> impl Iterator<Item = (&'static str, &mut Vec<f64>)> {
        GROUP_NAMES
            .iter()
            .zip(self.groups.iter_mut())
            .map(|(name, g)| (*name, g))
    }

    pub fn is_finite(&self) -> bool {
        self.groups.iter().flatten().all(|v| v.is_finite())
    }
}

/// Parameter leaves on a tape, in the same group layout as `ModelParams`.
pub struct TapeParams {
    pub config: ModelConfig,
    groups: Vec<Vec<Var>>,
}

impl TapeParams {
    pub fn load(tape: &mut Tape, params: &ModelParams) -> TapeParams {
        let groups = params
            .groups
            .iter()
            .map(|g| g.iter().map(|&v| tape.leaf(v)).collect())
            .collect();
        TapeParams {
            config: params.config,
            groups,
        }
    }

    fn group(&self, name: &str) -> &[Var] {
        let idx = GROUP_NAMES.iter().position(|n| *n == name).expect("group");
        &self.groups[idx]
    }

    /// Adjoints of each parameter group, read from a full adjoint vector.
    pub fn extract_grads(&self, adjoints: &[f64]) -> Vec<(&'static str, Vec<f64>)> {
        GROUP_NAMES
            .iter()
            .zip(self.groups.iter())
            .map(|(name, vars)| {
                (
                    *name,
                    vars.iter().map(|v| adjoints[v.0 as usize]).collect(),
                )
            })
            .collect()
    }
}

fn rnn_step(
    tape: &mut Tape,
    w_in: &[Var],
    w_rec: &[Var],
    bias: &[Var],
    input: &[Var],
    prev: &[Var],
) -> Vec<Var> {
    let d_h = bias.len();
    let d_e = input.len();
    (0..d_h)
        .map(|k| {
            let in_part = tape.dot(&w_in[k * d_e..(k + 1) * d_e], input);
            let rec_part = tape.dot(&w_rec[k * d_h..(k + 1) * d_h], prev);
            let s1 = tape.add(in_part, rec_part);
            let s2 = tape.add(s1, bias[k]);
            tape.tanh(s2)
        })
        .collect()
}

/// Contextualized token vectors: forward and backward recurrent states
/// concatenated, one vector of dimension `d_x` per token.
pub fn encode_on_tape(tape: &mut Tape, tp: &TapeParams, token_ids: &[usize]) -> Vec<Vec<Var>> {
    let cfg = &tp.config;
    let d_e = cfg.d_embed;
    let embed = tp.group("embed");
    let inputs: Vec<&[Var]> = token_ids
        .iter()
        .map(|&id| &embed[id * d_e..(id + 1) * d_e])
        .collect();

    let zero: Vec<Var> = (0..cfg.d_hidden).map(|_| tape.leaf(0.0)).collect();
    let (fwd_w_in, fwd_w_rec, fwd_b) = (tp.group("fwd_w_in"), tp.group("fwd_w_rec"), tp.group("fwd_b"));
    let mut fwd_states = Vec::with_capacity(token_ids.len());
    let mut prev = zero.clone();
    for input in &inputs {
        prev = rnn_step(tape, fwd_w_in, fwd_w_rec, fwd_b, input, &prev);
        fwd_states.push(prev.clone());
    }
    let (bwd_w_in, bwd_w_rec, bwd_b) = (tp.group("bwd_w_in"), tp.group("bwd_w_rec"), tp.group("bwd_b"));
    let mut bwd_states = vec![Vec::new(); token_ids.len()];
    let mut prev = zero;
    for (t, input) in inputs.iter().enumerate().rev() {
        prev = rnn_step(tape, bwd_w_in, bwd_w_rec, bwd_b, input, &prev);
        bwd_states[t] = prev.clone();
    }
    fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(f, b)| f.into_iter().chain(b).collect())
        .collect()
}

/// Span representation: `[x_start, x_end, attention-weighted average,
/// width embedding]`. Attention weights are `exp(head score)`, so the
/// normalizer is strictly positive.
pub fn span_rep_on_tape(
    tape: &mut Tape,
    tp: &TapeParams,
    x: &[Vec<Var>],
    span: Span,
) -> Result<Vec<Var>, AdvCorefError> {
    let cfg = &tp.config;
    if span.len() > cfg.max_width {
        return Err(AdvCorefError::WidthOverflow {
            width: span.len(),
            max: cfg.max_width,
        });
    }
    let head_w = tp.group("head_w");
    let head_b = tp.group("head_b")[0];
    let betas: Vec<Var> = (span.start..=span.end)
        .map(|j| {
            let score = tape.dot(head_w, &x[j]);
            let shifted = tape.add(score, head_b);
            tape.exp(shifted)
        })
        .collect();
    let norm = tape.sum(&betas);
    let d_x = cfg.d_x();
    let average: Vec<Var> = (0..d_x)
        .map(|d| {
            let weighted: Vec<Var> = (span.start..=span.end)
                .zip(betas.iter())
                .map(|(j, &beta)| tape.mul(beta, x[j][d]))
                .collect();
            let total = tape.sum(&weighted);
            tape.div(total, norm)
        })
        .collect();
    let width_table = tp.group("width");
    let w = span.end - span.start;
    let phi = &width_table[w * cfg.d_width..(w + 1) * cfg.d_width];

    let mut g = Vec::with_capacity(cfg.g_dim());
    g.extend_from_slice(&x[span.start]);
    g.extend_from_slice(&x[span.end]);
    g.extend(average);
    g.extend_from_slice(phi);
    Ok(g)
}

fn ffnn_on_tape(
    tape: &mut Tape,
    w1: &[Var],
    b1: &[Var],
    w2: &[Var],
    b2: Var,
    input: &[Var],
) -> Var {
    let hidden: Vec<Var> = (0..b1.len())
        .map(|k| {
            let s = tape.dot(&w1[k * input.len()..(k + 1) * input.len()], input);
            let sb = tape.add(s, b1[k]);
            tape.tanh(sb)
        })
        .collect();
    let out = tape.dot(w2, &hidden);
    tape.add(out, b2)
}

pub fn mention_score_on_tape(tape: &mut Tape, tp: &TapeParams, g: &[Var]) -> Var {
    ffnn_on_tape(
        tape,
        tp.group("mention_w1"),
        tp.group("mention_b1"),
        tp.group("mention_w2"),
        tp.group("mention_b2")[0],
        g,
    )
}

pub fn antecedent_score_on_tape(
    tape: &mut Tape,
    tp: &TapeParams,
    g_i: &[Var],
    g_j: &[Var],
) -> Var {
    let mut input = Vec::with_capacity(3 * g_i.len());
    input.extend_from_slice(g_i);
    input.extend_from_slice(g_j);
    for (a, b) in g_i.iter().zip(g_j.iter()) {
        input.push(tape.mul(*a, *b));
    }
    ffnn_on_tape(
        tape,
        tp.group("ant_w1"),
        tp.group("ant_b1"),
        tp.group("ant_w2"),
        tp.group("ant_b2")[0],
        &input,
    )
}

/// Mention scores for every span and antecedent scores for every ordered
/// pair (i, j) with j < i.
pub fn scores_on_tape(
    tape: &mut Tape,
    tp: &TapeParams,
    g: &[Vec<Var>],
) -> (Vec<Var>, Vec<Vec<Var>>) {
    let mention: Vec<Var> = g.iter().map(|gi| mention_score_on_tape(tape, tp, gi)).collect();
    let antecedent: Vec<Vec<Var>> = (0..g.len())
        .map(|i| {
            (0..i)
                .map(|j| antecedent_score_on_tape(tape, tp, &g[i], &g[j]))
                .collect()
        })
        .collect();
    (mention, antecedent)
}

/// Marginal log-likelihood loss over gold antecedent sets, with a dummy
/// antecedent of fixed score zero.
pub fn loss_on_tape(
    tape: &mut Tape,
    mention: &[Var],
    antecedent: &[Vec<Var>],
    gold: &[Vec<Antecedent>],
) -> Result<Var, AdvCorefError> {
    let n = mention.len();
    debug_assert_eq!(gold.len(), n);
    let mut per_span = Vec::with_capacity(n);
    for i in 0..n {
        if gold[i].is_empty() {
            return Err(AdvCorefError::EmptyGoldSet { span: i });
        }
        let dummy = tape.leaf(0.0);
        let mut all = Vec::with_capacity(i + 1);
        all.push(dummy);
        for j in 0..i {
            let pair_sum = tape.add(mention[i], mention[j]);
            all.push(tape.add(pair_sum, antecedent[i][j]));
        }
        let gold_vars: Vec<Var> = gold[i]
            .iter()
            .map(|a| match a {
                Antecedent::Dummy => Ok(all[0]),
                Antecedent::Span(j) if *j < i => Ok(all[j + 1]),
                Antecedent::Span(j) => Err(AdvCorefError::EmptyGoldSet { span: *j }),
            })
            .collect::<Result<_, _>>()?;
        let lse_all = tape.logsumexp(&all);
        let lse_gold = tape.logsumexp(&gold_vars);
        per_span.push(tape.sub(lse_all, lse_gold));
    }
    Ok(tape.sum(&per_span))
}
