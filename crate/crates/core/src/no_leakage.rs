//! PER/GPE name replacement with a no-leakage guarantee.
//!
//! Given gazetteers already filtered of training-set names, this module
//! finds the cluster mentions headed by a PER or GPE named entity, picks
//! fresh names for them, and rewrites token surfaces in place. Token
//! counts, span indices, and every non-word annotation column survive
//! unchanged.
//!
//! The head of a mention is approximated as the last token of the
//! rightmost maximal NE span contained in the mention; mentions without a
//! contained NE span are not replacement targets.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::conll_io::{Document, Span};
use crate::gazetteer::{GazetteerSet, PoolKey, SamplerState};

#[derive(Debug, Error)]
pub enum NoLeakageError {
    #[error("plan does not match document {doc_key}: token {token} is {found:?}, plan expected {expected:?}")]
    PlanDocumentMismatch {
        doc_key: String,
        token: usize,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityType {
    Per,
    Gpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Male,
    Female,
}

/// A cluster mention whose head is a PER or GPE named entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetMention {
    pub cluster_id: usize,
    pub mention: Span,
    pub head_token: usize,
    pub name_span: Span,
    pub entity_type: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementEntry {
    pub span: Span,
    pub original: Vec<String>,
    pub replacement: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ReplacementPlan {
    pub per_cluster: BTreeMap<usize, Vec<ReplacementEntry>>,
    pub warnings: Vec<String>,
}

const FEMALE_PRONOUNS: [&str; 3] = ["she", "her", "hers"];
const MALE_PRONOUNS: [&str; 3] = ["he", "him", "his"];

/// Finds the cluster mentions eligible for replacement. GPE heads must
/// additionally resolve to a non-country GeoNames entry.
pub fn identify_target_mentions(doc: &Document, gaz: &GazetteerSet) -> Vec<TargetMention> {
    let maximal = doc.maximal_ne_spans();
    let mut targets = Vec::new();
    for cluster in &doc.clusters {
        for mention in &cluster.mentions {
            let head_ne = maximal
                .iter()
                .filter(|ne| mention.contains_span(&ne.span))
                .max_by_key(|ne| (ne.span.end, ne.span.start));
            let Some(ne) = head_ne else { continue };
            let entity_type = if ne.is_per() {
                EntityType::Per
            } else if ne.is_gpe() {
                if !gaz.geo.contains(&doc.surface_of(&ne.span)) {
                    continue;
                }
                EntityType::Gpe
            } else {
                continue;
            };
            targets.push(TargetMention {
                cluster_id: cluster.id,
                mention: *mention,
                head_token: ne.span.end,
                name_span: ne.span,
                entity_type,
            });
        }
    }
    targets
}

fn cluster_has_pronoun(doc: &Document, cluster_id: usize, pronouns: &[&str]) -> bool {
    doc.clusters
        .iter()
        .filter(|c| c.id == cluster_id)
        .flat_map(|c| c.mentions.iter())
        .flat_map(|m| doc.tokens[m.start..=m.end].iter())
        .any(|t| {
            let lower = t.surface.to_lowercase();
            pronouns.contains(&lower.as_str())
        })
}

/// The longest PER name among the cluster's targets; ties break toward
/// the earliest occurrence.
fn longest_name(targets: &[&TargetMention]) -> Option<Span> {
    targets
        .iter()
        .map(|t| t.name_span)
        .max_by_key(|s| (s.len(), std::cmp::Reverse(s.start)))
}

/// Cluster gender: female if the cluster contains a female pronoun;
/// otherwise male if the first token of the longest name is a known male
/// first name, is in neither first-name list, or the cluster contains a
/// male pronoun; female otherwise.
pub fn classify_cluster_gender(
    doc: &Document,
    cluster_id: usize,
    targets: &[TargetMention],
    gaz: &GazetteerSet,
) -> Gender {
    if cluster_has_pronoun(doc, cluster_id, &FEMALE_PRONOUNS) {
        return Gender::Female;
    }
    let per_targets: Vec<&TargetMention> = targets
        .iter()
        .filter(|t| t.cluster_id == cluster_id && t.entity_type == EntityType::Per)
        .collect();
    let Some(name) = longest_name(&per_targets) else {
        return Gender::Male;
    };
    let first = &doc.tokens[name.start].surface;
    let in_male = gaz.male.contains(first);
    let in_female = gaz.female.contains(first);
    if in_male || (!in_male && !in_female) || cluster_has_pronoun(doc, cluster_id, &MALE_PRONOUNS) {
        Gender::Male
    } else {
        Gender::Female
    }
}

/// Builds the per-cluster token replacement plan, drawing fresh names from
/// the gazetteers. Exhausted pools downgrade to warnings and leave the
/// entity unreplaced.
pub fn build_replacement_plan(
    doc: &Document,
    targets: &[TargetMention],
    gaz: &GazetteerSet,
    state: &mut SamplerState,
) -> ReplacementPlan {
    let mut plan = ReplacementPlan::default();
    let cluster_ids: Vec<usize> = doc.clusters.iter().map(|c| c.id).collect();
    for cluster_id in cluster_ids {
        // lowercase original token -> replacement token
        let mut token_map: BTreeMap<String, String> = BTreeMap::new();

        let per_targets: Vec<&TargetMention> = targets
            .iter()
            .filter(|t| t.cluster_id == cluster_id && t.entity_type == EntityType::Per)
            .collect();
        if let Some(name) = longest_name(&per_targets) {
            plan_per_name(doc, cluster_id, name, targets, gaz, state, &mut token_map, &mut plan);
            for t in &per_targets {
                let covered = (t.name_span.start..=t.name_span.end)
                    .any(|i| token_map.contains_key(&doc.tokens[i].surface.to_lowercase()));
                if !covered && !token_map.is_empty() {
                    plan.warnings.push(format!(
                        "{}: cluster {}: name variant {:?} shares no token with the longest name; left unreplaced",
                        doc.doc_key,
                        cluster_id,
                        doc.surface_of(&t.name_span)
                    ));
                }
            }
        }

        let gpe_targets: Vec<&TargetMention> = targets
            .iter()
            .filter(|t| t.cluster_id == cluster_id && t.entity_type == EntityType::Gpe)
            .collect();
        if let Some(name) = longest_name(&gpe_targets) {
            plan_gpe_name(doc, cluster_id, name, gaz, state, &mut token_map, &mut plan);
        }

        if token_map.is_empty() {
            continue;
        }
        let mut entries = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for cluster in doc.clusters.iter().filter(|c| c.id == cluster_id) {
            for mention in &cluster.mentions {
                for idx in mention.start..=mention.end {
                    if !seen.insert(idx) {
                        continue;
                    }
                    let surface = &doc.tokens[idx].surface;
                    if let Some(replacement) = token_map.get(&surface.to_lowercase()) {
                        entries.push(ReplacementEntry {
                            span: Span::new(idx, idx),
                            original: vec![surface.clone()],
                            replacement: vec![replacement.clone()],
                        });
                    }
                }
            }
        }
        if !entries.is_empty() {
            plan.per_cluster.insert(cluster_id, entries);
        }
    }
    plan
}

/// The pool minus the original surface, so a name is never replaced by
/// itself.
fn without(pool: &[String], original: &str) -> Vec<String> {
    pool.iter()
        .filter(|n| !n.eq_ignore_ascii_case(original))
        .cloned()
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn plan_per_name(
    doc: &Document,
    cluster_id: usize,
    name: Span,
    targets: &[TargetMention],
    gaz: &GazetteerSet,
    state: &mut SamplerState,
    token_map: &mut BTreeMap<String, String>,
    plan: &mut ReplacementPlan,
) {
    let last_token = doc.tokens[name.end].surface.clone();
    match state.draw_replacement(PoolKey::Last, &without(&gaz.last.names, &last_token)) {
        Ok(drawn) => {
            token_map.insert(last_token.to_lowercase(), drawn);
        }
        Err(err) => {
            plan.warnings.push(format!(
                "{}: cluster {}: {} for {:?}; left unreplaced",
                doc.doc_key,
                cluster_id,
                err,
                doc.surface_of(&name)
            ));
        }
    }
    if name.len() >= 2 {
        let (key, pool) = match classify_cluster_gender(doc, cluster_id, targets, gaz) {
            Gender::Male => (PoolKey::MaleFirst, &gaz.male.names),
            Gender::Female => (PoolKey::FemaleFirst, &gaz.female.names),
        };
        let first_token = doc.tokens[name.start].surface.clone();
        match state.draw_replacement(key, &without(pool, &first_token)) {
            Ok(drawn) => {
                token_map.insert(first_token.to_lowercase(), drawn);
            }
            Err(err) => {
                plan.warnings.push(format!(
                    "{}: cluster {}: {} for first name of {:?}",
                    doc.doc_key,
                    cluster_id,
                    err,
                    doc.surface_of(&name)
                ));
            }
        }
    }
}

fn plan_gpe_name(
    doc: &Document,
    cluster_id: usize,
    name: Span,
    gaz: &GazetteerSet,
    state: &mut SamplerState,
    token_map: &mut BTreeMap<String, String>,
    plan: &mut ReplacementPlan,
) {
    let surface = doc.surface_of(&name);
    let Some(category) = gaz.geo.category_of(&surface).map(str::to_string) else {
        plan.warnings.push(format!(
            "{}: cluster {}: GPE name {:?} missing from the gazetteer; left unreplaced",
            doc.doc_key, cluster_id, surface
        ));
        return;
    };
    let token_count = name.len();
    let pool: Vec<String> = gaz.geo.entries[&category]
        .iter()
        .filter(|n| {
            n.split_whitespace().count() == token_count && !n.eq_ignore_ascii_case(&surface)
        })
        .cloned()
        .collect();
    match state.draw_replacement(PoolKey::Geo(category), &pool) {
        Ok(drawn) => {
            let replacement_tokens: Vec<&str> = drawn.split_whitespace().collect();
            for (offset, repl) in replacement_tokens.iter().enumerate() {
                let original = &doc.tokens[name.start + offset].surface;
                token_map.insert(original.to_lowercase(), repl.to_string());
            }
        }
        Err(err) => {
            plan.warnings.push(format!(
                "{}: cluster {}: {} for GPE {:?}; left unreplaced",
                doc.doc_key, cluster_id, err, surface
            ));
        }
    }
}

/// Rewrites token surfaces per the plan, copying the first-letter case of
/// each replaced token from the original.
pub fn apply_replacement_plan(
    doc: &Document,
    plan: &ReplacementPlan,
) -> Result<Document, NoLeakageError> {
    let mut out = doc.clone();
    for entries in plan.per_cluster.values() {
        for entry in entries {
            for (offset, (orig, repl)) in entry
                .original
                .iter()
                .zip(entry.replacement.iter())
                .enumerate()
            {
                let idx = entry.span.start + offset;
                let found = &out.tokens[idx].surface;
                if found != orig {
                    return Err(NoLeakageError::PlanDocumentMismatch {
                        doc_key: doc.doc_key.clone(),
                        token: idx,
                        expected: orig.clone(),
                        found: found.clone(),
                    });
                }
                out.tokens[idx].surface = copy_first_letter_case(orig, repl);
            }
        }
    }
    Ok(out)
}

fn copy_first_letter_case(original: &str, replacement: &str) -> String {
    let Some(orig_first) = original.chars().next() else {
        return replacement.to_string();
    };
    let mut chars = replacement.chars();
    let Some(repl_first) = chars.next() else {
        return replacement.to_string();
    };
    let rest: String = chars.collect();
    if orig_first.is_lowercase() {
        repl_first.to_lowercase().collect::<String>() + &rest
    } else if orig_first.is_uppercase() {
        repl_first.to_uppercase().collect::<String>() + &rest
    } else {
        replacement.to_string()
    }
}

/// Perturbs a whole corpus with one shared sampler, so the
/// without-replacement guarantee holds across documents. Plans are built
/// sequentially in document order.
pub fn perturb_corpus(
    docs: &[Document],
    gaz: &GazetteerSet,
    seed: u64,
) -> Result<(Vec<Document>, Vec<String>), NoLeakageError> {
    let mut state = SamplerState::new(seed);
    let mut out = Vec::with_capacity(docs.len());
    let mut warnings = Vec::new();
    for doc in docs {
        let targets = identify_target_mentions(doc, gaz);
        let plan = build_replacement_plan(doc, &targets, gaz, &mut state);
        warnings.extend(plan.warnings.iter().cloned());
        out.push(apply_replacement_plan(doc, &plan)?);
    }
    Ok((out, warnings))
}
