//! Coreference scoring: MUC, B-cubed, CEAF-e, their CoNLL F1 average, and
//! the train/test head-name leakage rate.
//!
//! Conventions follow the reference scorer: MUC ignores singleton gold
//! clusters in recall (and singleton system clusters in precision);
//! B-cubed treats a mention present on only one side as a singleton on the
//! other; CEAF-e aligns entities one-to-one to maximize
//! phi4(K, R) = 2|K∩R| / (|K| + |R|).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::assignment::max_weight_assignment;
use crate::conll_io::{Document, Span};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("gold clustering has no mentions; metric undefined")]
    EmptyGold,
    #[error("test corpus has no PER/GPE head names; leakage rate undefined")]
    EmptyTestHeads,
    #[error("invalid clustering: {0}")]
    InvalidClustering(String),
}

/// A set of disjoint, nonempty mention clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    clusters: Vec<BTreeSet<Span>>,
}

impl Clustering {
    pub fn new(clusters: Vec<Vec<Span>>) -> Result<Clustering, MetricError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for cluster in clusters {
            let set: BTreeSet<Span> = cluster.into_iter().collect();
            if set.is_empty() {
                return Err(MetricError::InvalidClustering("empty cluster".into()));
            }
            for span in &set {
                if !seen.insert(*span) {
                    return Err(MetricError::InvalidClustering(format!(
                        "mention {span} occurs in two clusters"
                    )));
                }
            }
            out.push(set);
        }
        Ok(Clustering { clusters: out })
    }

    pub fn from_document(doc: &Document) -> Result<Clustering, MetricError> {
        Clustering::new(doc.clusters.iter().map(|c| c.mentions.clone()).collect())
    }

    pub fn clusters(&self) -> &[BTreeSet<Span>] {
        &self.clusters
    }

    pub fn mentions(&self) -> BTreeSet<Span> {
        self.clusters.iter().flatten().copied().collect()
    }

    fn is_empty(&self) -> bool {
        self.clusters.iter().all(|c| c.is_empty())
    }

    /// This clustering plus a singleton for every `extra` mention it does
    /// not contain.
    fn augmented_with_singletons(&self, extra: &BTreeSet<Span>) -> Clustering {
        let own = self.mentions();
        let mut clusters = self.clusters.clone();
        for span in extra.difference(&own) {
            clusters.push(std::iter::once(*span).collect());
        }
        Clustering { clusters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_fractions(pn: f64, pd: f64, rn: f64, rd: f64) -> Prf {
        let precision = if pd > 0.0 { pn / pd } else { 0.0 };
        let recall = if rd > 0.0 { rn / rd } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Muc,
    BCubed,
    CeafE,
}

/// Per-document sufficient statistics for the three metrics, pool-able
/// across documents by plain addition.
///
/// Layout: `[muc_pn, muc_pd, muc_rn, muc_rd, b3_pn, b3_pd, b3_rn, b3_rd,
/// ceafe_phi, ceafe_pred, ceafe_gold]`.
pub const CONLL_STAT_KEYS: [&str; 11] = [
    "muc_pn", "muc_pd", "muc_rn", "muc_rd", "b3_pn", "b3_pd", "b3_rn", "b3_rd", "ceafe_phi",
    "ceafe_pred", "ceafe_gold",
];

pub fn conll_stats(gold: &Clustering, pred: &Clustering) -> Result<[f64; 11], MetricError> {
    if gold.is_empty() || gold.clusters.is_empty() {
        return Err(MetricError::EmptyGold);
    }
    let (muc_rn, muc_rd) = muc_side(gold, pred);
    let (muc_pn, muc_pd) = muc_side(pred, gold);
    let gold_mentions = gold.mentions();
    let pred_mentions = pred.mentions();
    let gold_aug = gold.augmented_with_singletons(&pred_mentions);
    let pred_aug = pred.augmented_with_singletons(&gold_mentions);
    let (b3_rn, b3_rd) = b_cubed_side(gold, &pred_aug);
    let (b3_pn, b3_pd) = b_cubed_side(pred, &gold_aug);
    let phi = ceafe_phi(gold, pred);
    Ok([
        muc_pn,
        muc_pd,
        muc_rn,
        muc_rd,
        b3_pn,
        b3_pd,
        b3_rn,
        b3_rd,
        phi,
        pred.clusters.len() as f64,
        gold.clusters.len() as f64,
    ])
}

/// MUC numerator/denominator for one direction: key clusters scored
/// against a response partition.
fn muc_side(key: &Clustering, response: &Clustering) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for cluster in &key.clusters {
        let size = cluster.len() as f64;
        num += size - partitions(cluster, response) as f64;
        den += size - 1.0;
    }
    (num, den)
}

/// How many pieces `cluster` is split into by the response: one per
/// intersected response cluster, plus one per mention missing from the
/// response entirely.
fn partitions(cluster: &BTreeSet<Span>, response: &Clustering) -> usize {
    let mut pieces = 0usize;
    let mut covered = 0usize;
    for rc in &response.clusters {
        let overlap = rc.intersection(cluster).count();
        if overlap > 0 {
            pieces += 1;
            covered += overlap;
        }
    }
    pieces + (cluster.len() - covered)
}

fn b_cubed_side(key: &Clustering, response: &Clustering) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for kc in &key.clusters {
        den += kc.len() as f64;
        for rc in &response.clusters {
            let overlap = rc.intersection(kc).count() as f64;
            if overlap > 0.0 {
                num += overlap * overlap / kc.len() as f64;
            }
        }
    }
    (num, den)
}

fn ceafe_phi(gold: &Clustering, pred: &Clustering) -> f64 {
    if pred.clusters.is_empty() {
        return 0.0;
    }
    let weights: Vec<Vec<f64>> = gold
        .clusters
        .iter()
        .map(|k| {
            pred.clusters
                .iter()
                .map(|r| {
                    2.0 * k.intersection(r).count() as f64 / (k.len() + r.len()) as f64
                })
                .collect()
        })
        .collect();
    max_weight_assignment(&weights)
}

pub fn prf_from_stats(kind: MetricKind, stats: &[f64; 11]) -> Prf {
    match kind {
        MetricKind::Muc => Prf::from_fractions(stats[0], stats[1], stats[2], stats[3]),
        MetricKind::BCubed => Prf::from_fractions(stats[4], stats[5], stats[6], stats[7]),
        MetricKind::CeafE => Prf::from_fractions(stats[8], stats[9], stats[8], stats[10]),
    }
}

pub fn pair_metric(
    kind: MetricKind,
    gold: &Clustering,
    pred: &Clustering,
) -> Result<Prf, MetricError> {
    let stats = conll_stats(gold, pred)?;
    Ok(prf_from_stats(kind, &stats))
}

pub fn conll_f1_from_stats(stats: &[f64; 11]) -> f64 {
    let muc = prf_from_stats(MetricKind::Muc, stats).f1;
    let b3 = prf_from_stats(MetricKind::BCubed, stats).f1;
    let ceafe = prf_from_stats(MetricKind::CeafE, stats).f1;
    (muc + b3 + ceafe) / 3.0
}

/// Unweighted mean of the MUC, B-cubed, and CEAF-e F1 values.
pub fn conll_f1(gold: &Clustering, pred: &Clustering) -> Result<f64, MetricError> {
    Ok(conll_f1_from_stats(&conll_stats(gold, pred)?))
}

/// Sums per-document statistics into one corpus-level vector.
pub fn pool_stats(per_doc: &[[f64; 11]]) -> [f64; 11] {
    let mut out = [0.0; 11];
    for stats in per_doc {
        for (acc, v) in out.iter_mut().zip(stats.iter()) {
            *acc += v;
        }
    }
    out
}

/// Case-normalized PER/GPE names heading a gold-cluster mention.
pub fn cluster_head_names(doc: &Document) -> BTreeSet<String> {
    let maximal = doc.maximal_ne_spans();
    let mut names = BTreeSet::new();
    for cluster in &doc.clusters {
        for mention in &cluster.mentions {
            let head_ne = maximal
                .iter()
                .filter(|ne| mention.contains_span(&ne.span))
                .max_by_key(|ne| (ne.span.end, ne.span.start));
            if let Some(ne) = head_ne {
                if ne.is_per() || ne.is_gpe() {
                    names.insert(doc.surface_of(&ne.span).to_lowercase());
                }
            }
        }
    }
    names
}

/// Fraction of test-set head names also heading a training-set cluster.
pub fn leakage_rate(train_docs: &[Document], test_docs: &[Document]) -> Result<f64, MetricError> {
    let train: BTreeSet<String> = train_docs.iter().flat_map(cluster_head_names).collect();
    let test: BTreeSet<String> = test_docs.iter().flat_map(cluster_head_names).collect();
    if test.is_empty() {
        return Err(MetricError::EmptyTestHeads);
    }
    Ok(test.intersection(&train).count() as f64 / test.len() as f64)
}

/// Plain-text plus key=value score summary, values to two decimals.
pub fn format_score_report(stats: &[f64; 11]) -> String {
    let mut out = String::new();
    let rows: Vec<(&str, Prf)> = vec![
        ("muc", prf_from_stats(MetricKind::Muc, stats)),
        ("b_cubed", prf_from_stats(MetricKind::BCubed, stats)),
        ("ceaf_e", prf_from_stats(MetricKind::CeafE, stats)),
    ];
    for (name, prf) in &rows {
        out.push_str(&format!(
            "{name}_p={:.2}\n{name}_r={:.2}\n{name}_f1={:.2}\n",
            prf.precision, prf.recall, prf.f1
        ));
    }
    out.push_str(&format!("conll_f1={:.2}\n", conll_f1_from_stats(stats)));
    out
}

/// Per-document statistics keyed by (doc_key, part), for stratified tests.
pub fn corpus_stats(
    gold_docs: &[Document],
    pred_docs: &[Document],
) -> Result<BTreeMap<(String, usize), [f64; 11]>, MetricError> {
    let pred_by_key: BTreeMap<(String, usize), &Document> = pred_docs
        .iter()
        .map(|d| ((d.doc_key.clone(), d.part), d))
        .collect();
    let mut out = BTreeMap::new();
    for gold in gold_docs {
        let key = (gold.doc_key.clone(), gold.part);
        let pred = pred_by_key.get(&key).ok_or_else(|| {
            MetricError::InvalidClustering(format!(
                "document {}/{} missing from predictions",
                key.0, key.1
            ))
        })?;
        let g = Clustering::from_document(gold)?;
        let p = Clustering::from_document(pred)?;
        out.insert(key, conll_stats(&g, &p)?);
    }
    Ok(out)
}
