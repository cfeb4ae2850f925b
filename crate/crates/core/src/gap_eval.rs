//! GAP-style pronoun resolution scoring.
//!
//! Each example supplies a pronoun and two candidate names; every
//! (pronoun, name) pair is a binary instance. F1 of the positive class is
//! reported overall and per pronoun gender, together with the
//! female-to-male F1 ratio (the bias).
//!
//! Offsets are byte offsets into the example text and are validated
//! against the stated surfaces on parse.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GapError {
    #[error("line {line}: text at offset {offset} is {found:?}, expected {expected:?}")]
    OffsetMismatch {
        line: usize,
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("bad header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("predictions do not align with examples: {0}")]
    Misaligned(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PronounGender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapExample {
    pub id: String,
    pub text: String,
    pub pronoun: String,
    pub pronoun_offset: usize,
    pub name_a: String,
    pub a_offset: usize,
    pub name_b: String,
    pub b_offset: usize,
    pub label_a: bool,
    pub label_b: bool,
    pub pronoun_gender: PronounGender,
}

const HEADER: &str =
    "ID\tText\tPronoun\tPronoun-offset\tA\tA-offset\tA-coref\tB\tB-offset\tB-coref\tURL";

fn gender_of(pronoun: &str) -> Result<PronounGender, String> {
    match pronoun.to_lowercase().as_str() {
        "he" | "him" | "his" => Ok(PronounGender::Male),
        "she" | "her" | "hers" => Ok(PronounGender::Female),
        other => Err(format!("pronoun {other:?} has no known gender")),
    }
}

fn check_offset(
    text: &str,
    offset: usize,
    surface: &str,
    line: usize,
) -> Result<(), GapError> {
    let end = offset + surface.len();
    let found = text.get(offset..end).unwrap_or("");
    if found != surface {
        return Err(GapError::OffsetMismatch {
            line,
            offset,
            expected: surface.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn parse_bool(field: &str, line: usize) -> Result<bool, GapError> {
    match field {
        "TRUE" | "True" | "true" => Ok(true),
        "FALSE" | "False" | "false" => Ok(false),
        other => Err(GapError::MalformedRow {
            line,
            reason: format!("expected TRUE/FALSE, found {other:?}"),
        }),
    }
}

pub fn parse_gap(stream: &str) -> Result<Vec<GapExample>, GapError> {
    let mut lines = stream.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| GapError::BadHeader {
        expected: HEADER.to_string(),
        found: String::new(),
    })?;
    if header.trim_end() != HEADER {
        return Err(GapError::BadHeader {
            expected: HEADER.to_string(),
            found: header.to_string(),
        });
    }
    let mut examples = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 10 {
            return Err(GapError::MalformedRow {
                line: lineno,
                reason: format!("expected at least 10 tab-separated fields, found {}", fields.len()),
            });
        }
        let parse_offset = |field: &str| -> Result<usize, GapError> {
            field.parse().map_err(|_| GapError::MalformedRow {
                line: lineno,
                reason: format!("non-numeric offset {field:?}"),
            })
        };
        let text = fields[1].to_string();
        let pronoun = fields[2].to_string();
        let pronoun_offset = parse_offset(fields[3])?;
        let name_a = fields[4].to_string();
        let a_offset = parse_offset(fields[5])?;
        let label_a = parse_bool(fields[6], lineno)?;
        let name_b = fields[7].to_string();
        let b_offset = parse_offset(fields[8])?;
        let label_b = parse_bool(fields[9], lineno)?;
        check_offset(&text, pronoun_offset, &pronoun, lineno)?;
        check_offset(&text, a_offset, &name_a, lineno)?;
        check_offset(&text, b_offset, &name_b, lineno)?;
        let pronoun_gender = gender_of(&pronoun).map_err(|reason| GapError::MalformedRow {
            line: lineno,
            reason,
        })?;
        examples.push(GapExample {
            id: fields[0].to_string(),
            text,
            pronoun,
            pronoun_offset,
            name_a,
            a_offset,
            name_b,
            b_offset,
            label_a,
            label_b,
            pronoun_gender,
        });
    }
    Ok(examples)
}

/// Half-open character-offset span within an example's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> CharSpan {
        assert!(start < end, "char span must be nonempty");
        CharSpan { start, end }
    }

    fn overlaps(&self, other: &CharSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Predicted clusters expressed as character spans of one example's text.
pub type CharClustering = Vec<BTreeSet<CharSpan>>;

/// A name's prediction is true iff some cluster holds a span overlapping
/// the pronoun and a span overlapping that name.
pub fn clusters_to_gap_labels(clusters: &CharClustering, ex: &GapExample) -> (bool, bool) {
    let pronoun = CharSpan::new(ex.pronoun_offset, ex.pronoun_offset + ex.pronoun.len());
    let a = CharSpan::new(ex.a_offset, ex.a_offset + ex.name_a.len());
    let b = CharSpan::new(ex.b_offset, ex.b_offset + ex.name_b.len());
    let linked = |name: &CharSpan| {
        clusters.iter().any(|cluster| {
            cluster.iter().any(|s| s.overlaps(&pronoun)) && cluster.iter().any(|s| s.overlaps(name))
        })
    };
    (linked(&a), linked(&b))
}

/// Positive-class precision/recall/F1 with undefined values kept as `None`
/// rather than forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinaryPrf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl BinaryPrf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> BinaryPrf {
        let ratio = |num: usize, den: usize| {
            if den > 0 {
                Some(num as f64 / den as f64)
            } else {
                None
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        BinaryPrf {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub male: BinaryPrf,
    pub female: BinaryPrf,
    pub overall: BinaryPrf,
    /// female F1 / male F1; `None` when male F1 is zero or undefined.
    pub bias: Option<f64>,
}

pub fn gap_report(
    examples: &[GapExample],
    predictions: &[(bool, bool)],
) -> Result<GapReport, GapError> {
    if examples.len() != predictions.len() {
        return Err(GapError::Misaligned(format!(
            "{} examples vs {} predictions",
            examples.len(),
            predictions.len()
        )));
    }
    let mut counts = [(0usize, 0usize, 0usize); 2]; // (tp, fp, fn) per gender
    for (ex, (pred_a, pred_b)) in examples.iter().zip(predictions.iter()) {
        let gi = match ex.pronoun_gender {
            PronounGender::Male => 0,
            PronounGender::Female => 1,
        };
        for (label, pred) in [(ex.label_a, *pred_a), (ex.label_b, *pred_b)] {
            match (label, pred) {
                (true, true) => counts[gi].0 += 1,
                (false, true) => counts[gi].1 += 1,
                (true, false) => counts[gi].2 += 1,
                (false, false) => {}
            }
        }
    }
    let male = BinaryPrf::from_counts(counts[0].0, counts[0].1, counts[0].2);
    let female = BinaryPrf::from_counts(counts[1].0, counts[1].1, counts[1].2);
    let overall = BinaryPrf::from_counts(
        counts[0].0 + counts[1].0,
        counts[0].1 + counts[1].1,
        counts[0].2 + counts[1].2,
    );
    let bias = match (female.f1, male.f1) {
        (Some(f), Some(m)) if m > 0.0 => Some(f / m),
        _ => None,
    };
    Ok(GapReport {
        male,
        female,
        overall,
        bias,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "undefined".to_string(),
    }
}

pub fn format_gap_report(report: &GapReport) -> String {
    let mut out = String::new();
    for (name, prf) in [
        ("male", &report.male),
        ("female", &report.female),
        ("overall", &report.overall),
    ] {
        out.push_str(&format!(
            "{name}_p={}\n{name}_r={}\n{name}_f1={}\n",
            fmt_opt(prf.precision),
            fmt_opt(prf.recall),
            fmt_opt(prf.f1)
        ));
    }
    out.push_str(&format!("bias={}\n", fmt_opt(report.bias)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, text: &str, pronoun: &str, a: &str, a_label: &str, b: &str, b_label: &str) -> String {
        let p_off = text.find(pronoun).unwrap();
        let a_off = text.find(a).unwrap();
        let b_off = text.find(b).unwrap();
        format!(
            "{id}\t{text}\t{pronoun}\t{p_off}\t{a}\t{a_off}\t{a_label}\t{b}\t{b_off}\t{b_label}\thttp://x\n"
        )
    }

    fn fixture() -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        s.push_str(&row(
            "e1",
            "Judy met Alice before she left",
            "she",
            "Judy",
            "TRUE",
            "Alice",
            "FALSE",
        ));
        s
    }

    #[test]
    fn parses_labels_and_offsets() {
        let examples = parse_gap(&fixture()).unwrap();
        assert_eq!(examples.len(), 1);
        let ex = &examples[0];
        assert!(ex.label_a);
        assert!(!ex.label_b);
        assert_eq!(ex.pronoun_gender, PronounGender::Female);
    }

    #[test]
    fn header_only_file_is_empty() {
        let examples = parse_gap(&format!("{HEADER}\n")).unwrap();
        assert!(examples.is_empty());
    }

    #[test]
    fn offset_mismatch_is_an_error() {
        let bad = format!(
            "{HEADER}\ne1\tJudy met Alice\tshe\t0\tJudy\t0\tTRUE\tAlice\t9\tFALSE\thttp://x\n"
        );
        assert!(matches!(
            parse_gap(&bad),
            Err(GapError::OffsetMismatch { .. })
        ));
    }

    #[test]
    fn bad_header_is_an_error() {
        assert!(matches!(
            parse_gap("ID\tWrong\n"),
            Err(GapError::BadHeader { .. })
        ));
    }

    #[test]
    fn overlap_rule_links_pronoun_and_name() {
        let examples = parse_gap(&fixture()).unwrap();
        let ex = &examples[0];
        let cluster_a: BTreeSet<CharSpan> = [
            CharSpan::new(ex.a_offset, ex.a_offset + 2),
            CharSpan::new(ex.pronoun_offset, ex.pronoun_offset + 1),
        ]
        .into_iter()
        .collect();
        let clusters = vec![cluster_a];
        assert_eq!(clusters_to_gap_labels(&clusters, ex), (true, false));

        // pronoun in no cluster
        let b_only: BTreeSet<CharSpan> =
            [CharSpan::new(ex.b_offset, ex.b_offset + 5)].into_iter().collect();
        assert_eq!(clusters_to_gap_labels(&vec![b_only], ex), (false, false));

        // pronoun, A, and B all together
        let all: BTreeSet<CharSpan> = [
            CharSpan::new(ex.a_offset, ex.a_offset + 4),
            CharSpan::new(ex.b_offset, ex.b_offset + 5),
            CharSpan::new(ex.pronoun_offset, ex.pronoun_offset + 3),
        ]
        .into_iter()
        .collect();
        assert_eq!(clusters_to_gap_labels(&vec![all], ex), (true, true));
    }

    #[test]
    fn counts_give_half_prf() {
        let prf = BinaryPrf::from_counts(1, 1, 1);
        assert_eq!(prf.precision, Some(0.5));
        assert_eq!(prf.recall, Some(0.5));
        assert_eq!(prf.f1, Some(0.5));
    }

    #[test]
    fn perfect_predictions_have_unit_f1_and_bias() {
        let mut text = String::from(HEADER);
        text.push('\n');
        text.push_str(&row("m1", "Dirk said he left early", "he", "Dirk", "TRUE", "early", "FALSE"));
        text.push_str(&row("f1", "Judy said she left soon", "she", "Judy", "TRUE", "soon", "FALSE"));
        let examples = parse_gap(&text).unwrap();
        let preds: Vec<(bool, bool)> = examples.iter().map(|e| (e.label_a, e.label_b)).collect();
        let report = gap_report(&examples, &preds).unwrap();
        assert_eq!(report.overall.f1, Some(1.0));
        assert_eq!(report.bias, Some(1.0));
    }

    #[test]
    fn bias_ratio_arithmetic() {
        // F 70.6 over M 75.8 is about 0.93
        let bias = 70.6f64 / 75.8;
        assert!((bias - 0.9314).abs() < 5e-4);
    }

    #[test]
    fn swapping_a_and_b_leaves_the_report_unchanged() {
        let mut text = String::from(HEADER);
        text.push('\n');
        text.push_str(&row("m1", "Dirk met Hans when he left", "he", "Dirk", "TRUE", "Hans", "FALSE"));
        let examples = parse_gap(&text).unwrap();
        let swapped: Vec<GapExample> = examples
            .iter()
            .map(|e| GapExample {
                name_a: e.name_b.clone(),
                a_offset: e.b_offset,
                label_a: e.label_b,
                name_b: e.name_a.clone(),
                b_offset: e.a_offset,
                label_b: e.label_a,
                ..e.clone()
            })
            .collect();
        let preds = vec![(true, false)];
        let swapped_preds = vec![(false, true)];
        let r1 = gap_report(&examples, &preds).unwrap();
        let r2 = gap_report(&swapped, &swapped_preds).unwrap();
        assert_eq!(r1, r2);
    }
}
