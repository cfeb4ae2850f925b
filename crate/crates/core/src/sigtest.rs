//! Significance tests: the exact two-sided McNemar test and a stratified
//! approximate randomization test over per-document sufficient statistics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SigTestError {
    #[error("strata mismatch: {0}")]
    StrataMismatch(String),
}

/// Discordant-pair counts for two paired binary systems: `b` instances
/// where system 1 is correct and system 2 wrong, `c` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedBinaryOutcomes {
    pub b: u64,
    pub c: u64,
}

/// Exact two-sided McNemar p-value: `min(1, 2 P[X <= min(b, c)])` with
/// `X ~ Binomial(b + c, 1/2)`. No discordant pairs gives p = 1.
pub fn mcnemar_exact(outcomes: PairedBinaryOutcomes) -> f64 {
    let n = outcomes.b + outcomes.c;
    if n == 0 {
        return 1.0;
    }
    let k = outcomes.b.min(outcomes.c);
    // tail sum in log space: log C(n, i) accumulated incrementally
    let n_f = n as f64;
    let mut log_binom = 0.0f64; // log C(n, 0)
    let mut log_terms = Vec::with_capacity(k as usize + 1);
    log_terms.push(log_binom);
    for i in 1..=k {
        log_binom += ((n_f - i as f64 + 1.0) / i as f64).ln();
        log_terms.push(log_binom);
    }
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
    let log_tail = max + sum.ln() - n_f * std::f64::consts::LN_2;
    (2.0 * log_tail.exp()).min(1.0)
}

/// Per-stratum sufficient statistics for two systems, plus the function
/// that turns pooled statistics into a score.
pub struct StratifiedScores<'a, F: Fn(&[f64]) -> f64> {
    pub system_a: &'a [Vec<f64>],
    pub system_b: &'a [Vec<f64>],
    pub metric: F,
}

/// Stratified approximate randomization test. Each round flips each
/// stratum's system assignment independently with probability 1/2 and
/// recomputes the absolute score difference from pooled statistics;
/// ties count toward the numerator and the +1 smoothing keeps
/// p >= 1/(rounds+1). Deterministic given the seed.
pub fn stratified_randomization_test<F: Fn(&[f64]) -> f64>(
    scores: &StratifiedScores<'_, F>,
    rounds: usize,
    seed: u64,
) -> Result<f64, SigTestError> {
    let a = scores.system_a;
    let b = scores.system_b;
    if a.len() != b.len() {
        return Err(SigTestError::StrataMismatch(format!(
            "{} strata for system A vs {} for system B",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(SigTestError::StrataMismatch("no strata".into()));
    }
    let dim = a[0].len();
    for (i, (sa, sb)) in a.iter().zip(b.iter()).enumerate() {
        if sa.len() != dim || sb.len() != dim {
            return Err(SigTestError::StrataMismatch(format!(
                "stratum {i} has inconsistent statistic dimensions"
            )));
        }
    }

    let pooled_diff = |rng: Option<&mut ChaCha8Rng>| -> f64 {
        let mut sum_a = vec![0.0; dim];
        let mut sum_b = vec![0.0; dim];
        match rng {
            None => {
                for (sa, sb) in a.iter().zip(b.iter()) {
                    add(&mut sum_a, sa);
                    add(&mut sum_b, sb);
                }
            }
            Some(rng) => {
                for (sa, sb) in a.iter().zip(b.iter()) {
                    if rng.gen_bool(0.5) {
                        add(&mut sum_a, sb);
                        add(&mut sum_b, sa);
                    } else {
                        add(&mut sum_a, sa);
                        add(&mut sum_b, sb);
                    }
                }
            }
        }
        ((scores.metric)(&sum_a) - (scores.metric)(&sum_b)).abs()
    };

    let observed = pooled_diff(None);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least = 0usize;
    for _ in 0..rounds {
        if pooled_diff(Some(&mut rng)) >= observed {
            at_least += 1;
        }
    }
    Ok((at_least + 1) as f64 / (rounds + 1) as f64)
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v.iter()) {
        *a += b;
    }
}
