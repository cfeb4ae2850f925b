//! Reading and writing the CoNLL-2012 column format.
//!
//! Documents round-trip losslessly: the parser keeps every column and the
//! exact inter-column whitespace of each token line, and the serializer
//! re-emits them verbatim. The only permitted byte difference is newline
//! normalization — `\r\n` and `\r` are normalized to `\n` on read.
//!
//! The NE and coreference columns are regenerated from the structured
//! `ne_spans` / `clusters` fields on write, using a canonical bracket
//! ordering (openings longest-first, then singletons, then closings
//! innermost-first), so hand-built documents serialize without ever having
//! carried raw column text.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConllError {
    #[error("line {line}: unbalanced brackets in {column} column: {detail}")]
    UnbalancedBrackets {
        line: usize,
        column: &'static str,
        detail: String,
    },
    #[error("line {line}: expected {expected} columns, found {found}")]
    InconsistentColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("document starting at line {line} has no #end document marker")]
    MissingEndMarker { line: usize },
}

/// Which columns carry the word and NE annotations. The coreference column
/// is always the last one. Defaults match the v4_gold_conll layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnLayout {
    pub word: usize,
    pub ne: usize,
}

impl Default for ColumnLayout {
    fn default() -> Self {
        ColumnLayout { word: 3, ne: 10 }
    }
}

/// Inclusive token-index span within a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "span start must not exceed end");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, token: usize) -> bool {
        self.start <= token && token <= self.end
    }

    pub fn contains_span(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedEntitySpan {
    pub span: Span,
    pub ne_type: String,
}

impl NamedEntitySpan {
    pub fn is_per(&self) -> bool {
        self.ne_type == "PER" || self.ne_type == "PERSON"
    }

    pub fn is_gpe(&self) -> bool {
        self.ne_type == "GPE"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    pub mentions: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub sentence_index: usize,
    pub doc_index: usize,
    /// All raw columns of the token line, word column included.
    pub fields: Vec<String>,
    /// Whitespace runs around the fields; `gaps.len() == fields.len() + 1`,
    /// with `gaps[0]` the leading indentation and the last entry the
    /// trailing whitespace before the newline.
    pub gaps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_key: String,
    pub part: usize,
    pub tokens: Vec<Token>,
    pub ne_spans: Vec<NamedEntitySpan>,
    pub clusters: Vec<Cluster>,
    pub layout: ColumnLayout,
    /// The `#begin document ...` line, kept verbatim.
    pub begin_line: String,
}

impl Document {
    /// Builds a document from bare words, NE spans, and clusters, with
    /// synthetic filler columns in the default layout.
    pub fn from_parts(
        doc_key: &str,
        part: usize,
        sentences: &[Vec<&str>],
        ne_spans: Vec<NamedEntitySpan>,
        clusters: Vec<Cluster>,
    ) -> Document {
        let layout = ColumnLayout::default();
        let mut tokens = Vec::new();
        for (si, sent) in sentences.iter().enumerate() {
            for (wi, word) in sent.iter().enumerate() {
                let fields = vec![
                    doc_key.to_string(),
                    part.to_string(),
                    wi.to_string(),
                    (*word).to_string(),
                    "XX".to_string(),
                    "*".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                    "*".to_string(),
                    "-".to_string(),
                ];
                let gaps = std::iter::once(String::new())
                    .chain(std::iter::repeat(" ".to_string()).take(fields.len() - 1))
                    .chain(std::iter::once(String::new()))
                    .collect();
                tokens.push(Token {
                    surface: (*word).to_string(),
                    sentence_index: si,
                    doc_index: tokens.len(),
                    fields,
                    gaps,
                });
            }
        }
        Document {
            doc_key: doc_key.to_string(),
            part,
            tokens,
            ne_spans,
            clusters,
            layout,
            begin_line: format!("#begin document ({}); part {:03}", doc_key, part),
        }
    }

    pub fn surface_of(&self, span: &Span) -> String {
        self.tokens[span.start..=span.end]
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Maximal NE spans: those not strictly contained in another NE span.
    pub fn maximal_ne_spans(&self) -> Vec<&NamedEntitySpan> {
        self.ne_spans
            .iter()
            .filter(|ne| {
                !self
                    .ne_spans
                    .iter()
                    .any(|other| other.span != ne.span && other.span.contains_span(&ne.span))
            })
            .collect()
    }
}

/// Parses every `#begin document ... #end document` block in the stream
/// using the default column layout.
pub fn parse_document(stream: &str) -> Result<Vec<Document>, ConllError> {
    parse_with_layout(stream, ColumnLayout::default())
}

pub fn parse_with_layout(stream: &str, layout: ColumnLayout) -> Result<Vec<Document>, ConllError> {
    let normalized = stream.replace("\r\n", "\n").replace('\r', "\n");
    let mut docs = Vec::new();
    let mut lines = normalized.lines().enumerate().peekable();
    while let Some((lineno, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        if !line.starts_with("#begin document") {
            // Stray content outside a document block.
            return Err(ConllError::InconsistentColumnCount {
                line: lineno + 1,
                expected: 0,
                found: line.split_whitespace().count(),
            });
        }
        docs.push(parse_block(line, lineno, &mut lines, layout)?);
    }
    Ok(docs)
}

struct BracketState {
    // cluster id -> stack of open mention starts
    coref_open: BTreeMap<usize, Vec<usize>>,
    // (ne type, start) stack
    ne_open: Vec<(String, usize)>,
}

fn parse_block<'a, I>(
    begin_line: &str,
    begin_lineno: usize,
    lines: &mut I,
    layout: ColumnLayout,
) -> Result<Document, ConllError>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (doc_key, part) = parse_begin_line(begin_line);
    let mut tokens: Vec<Token> = Vec::new();
    let mut clusters: BTreeMap<usize, Vec<Span>> = BTreeMap::new();
    let mut ne_spans: Vec<NamedEntitySpan> = Vec::new();
    let mut state = BracketState {
        coref_open: BTreeMap::new(),
        ne_open: Vec::new(),
    };
    let mut sentence_index = 0usize;
    let mut sentence_has_tokens = false;
    let mut column_count: Option<usize> = None;
    let mut saw_end = false;
    let mut last_lineno = begin_lineno;

    for (lineno, line) in lines.by_ref() {
        last_lineno = lineno;
        if line.starts_with("#end document") {
            saw_end = true;
            break;
        }
        if line.trim().is_empty() {
            check_sentence_closed(&state, lineno)?;
            if sentence_has_tokens {
                sentence_index += 1;
                sentence_has_tokens = false;
            }
            continue;
        }
        let (fields, gaps) = split_fields(line);
        match column_count {
            None => column_count = Some(fields.len()),
            Some(expected) if expected != fields.len() => {
                return Err(ConllError::InconsistentColumnCount {
                    line: lineno + 1,
                    expected,
                    found: fields.len(),
                });
            }
            _ => {}
        }
        if fields.len() <= layout.word {
            return Err(ConllError::InconsistentColumnCount {
                line: lineno + 1,
                expected: layout.word + 1,
                found: fields.len(),
            });
        }
        let doc_index = tokens.len();
        let surface = fields[layout.word].clone();

        if fields.len() > layout.ne {
            parse_ne_field(
                &fields[layout.ne],
                doc_index,
                lineno,
                &mut state,
                &mut ne_spans,
            )?;
        }
        let coref_field = fields.last().expect("nonempty fields");
        parse_coref_field(coref_field, doc_index, lineno, &mut state, &mut clusters)?;

        tokens.push(Token {
            surface,
            sentence_index,
            doc_index,
            fields,
            gaps,
        });
        sentence_has_tokens = true;
    }

    if !saw_end {
        return Err(ConllError::MissingEndMarker {
            line: begin_lineno + 1,
        });
    }
    check_sentence_closed(&state, last_lineno)?;

    let clusters = clusters
        .into_iter()
        .map(|(id, mentions)| Cluster { id, mentions })
        .collect();
    Ok(Document {
        doc_key,
        part,
        tokens,
        ne_spans,
        clusters,
        layout,
        begin_line: begin_line.to_string(),
    })
}

fn check_sentence_closed(state: &BracketState, lineno: usize) -> Result<(), ConllError> {
    if let Some((id, _)) = state.coref_open.iter().find(|(_, stack)| !stack.is_empty()) {
        return Err(ConllError::UnbalancedBrackets {
            line: lineno + 1,
            column: "coref",
            detail: format!("cluster {id} opened but never closed"),
        });
    }
    if let Some((ne_type, _)) = state.ne_open.first() {
        return Err(ConllError::UnbalancedBrackets {
            line: lineno + 1,
            column: "ne",
            detail: format!("{ne_type} span opened but never closed"),
        });
    }
    Ok(())
}

fn parse_begin_line(line: &str) -> (String, usize) {
    let mut doc_key = String::new();
    if let (Some(open), Some(close)) = (line.find('('), line.rfind(')')) {
        if open < close {
            doc_key = line[open + 1..close].to_string();
        }
    }
    let part = line
        .rsplit("part ")
        .next()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    (doc_key, part)
}

/// Splits a line into fields and the whitespace runs around them.
fn split_fields(line: &str) -> (Vec<String>, Vec<String>) {
    let mut fields = Vec::new();
    let mut gaps = Vec::new();
    let mut current = String::new();
    let mut in_field = false;
    gaps.push(String::new());
    for ch in line.chars() {
        if ch.is_whitespace() {
            if in_field {
                fields.push(std::mem::take(&mut current));
                gaps.push(String::new());
                in_field = false;
            }
            gaps.last_mut().unwrap().push(ch);
        } else {
            in_field = true;
            current.push(ch);
        }
    }
    if in_field {
        fields.push(current);
        gaps.push(String::new());
    }
    (fields, gaps)
}

fn parse_coref_field(
    field: &str,
    token: usize,
    lineno: usize,
    state: &mut BracketState,
    clusters: &mut BTreeMap<usize, Vec<Span>>,
) -> Result<(), ConllError> {
    if field == "-" || field == "_" {
        return Ok(());
    }
    for entry in field.split('|') {
        let opens = entry.starts_with('(');
        let closes = entry.ends_with(')');
        let digits = entry.trim_start_matches('(').trim_end_matches(')');
        let id: usize = digits.parse().map_err(|_| ConllError::UnbalancedBrackets {
            line: lineno + 1,
            column: "coref",
            detail: format!("malformed entry {entry:?}"),
        })?;
        match (opens, closes) {
            (true, true) => clusters.entry(id).or_default().push(Span::new(token, token)),
            (true, false) => state.coref_open.entry(id).or_default().push(token),
            (false, true) => {
                let start = state
                    .coref_open
                    .get_mut(&id)
                    .and_then(|stack| stack.pop())
                    .ok_or_else(|| ConllError::UnbalancedBrackets {
                        line: lineno + 1,
                        column: "coref",
                        detail: format!("close for cluster {id} without an open"),
                    })?;
                clusters.entry(id).or_default().push(Span::new(start, token));
            }
            (false, false) => {
                return Err(ConllError::UnbalancedBrackets {
                    line: lineno + 1,
                    column: "coref",
                    detail: format!("entry {entry:?} has no brackets"),
                });
            }
        }
    }
    Ok(())
}

fn parse_ne_field(
    field: &str,
    token: usize,
    lineno: usize,
    state: &mut BracketState,
    ne_spans: &mut Vec<NamedEntitySpan>,
) -> Result<(), ConllError> {
    if field == "-" || field == "_" {
        return Ok(());
    }
    let mut chars = field.chars().peekable();
    while let Some(ch) = chars.next() {
        match ch {
            '*' => {}
            '(' => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '(' || c == ')' || c == '*' {
                        break;
                    }
                    name.push(c);
                    chars.next();
                }
                if name.is_empty() {
                    return Err(ConllError::UnbalancedBrackets {
                        line: lineno + 1,
                        column: "ne",
                        detail: format!("open bracket without a type in {field:?}"),
                    });
                }
                state.ne_open.push((name, token));
            }
            ')' => {
                let (ne_type, start) =
                    state
                        .ne_open
                        .pop()
                        .ok_or_else(|| ConllError::UnbalancedBrackets {
                            line: lineno + 1,
                            column: "ne",
                            detail: format!("close bracket without an open in {field:?}"),
                        })?;
                ne_spans.push(NamedEntitySpan {
                    span: Span::new(start, token),
                    ne_type,
                });
            }
            other => {
                return Err(ConllError::UnbalancedBrackets {
                    line: lineno + 1,
                    column: "ne",
                    detail: format!("unexpected character {other:?} in {field:?}"),
                });
            }
        }
    }
    Ok(())
}

/// Serializes one document back to the column format.
///
/// Opaque columns and whitespace are emitted verbatim; the word column is
/// taken from each token's `surface` and the NE/coref columns are rebuilt
/// from `ne_spans` and `clusters`.
pub fn serialize_document(doc: &Document) -> String {
    let ncols = doc.tokens.first().map(|t| t.fields.len()).unwrap_or(0);
    let ne_fields = render_ne_column(doc);
    let coref_fields = render_coref_column(doc);

    let mut out = String::new();
    out.push_str(&doc.begin_line);
    out.push('\n');
    let mut current_sentence = 0usize;
    for token in &doc.tokens {
        if token.sentence_index != current_sentence {
            out.push('\n');
            current_sentence = token.sentence_index;
        }
        let mut fields = token.fields.clone();
        fields[doc.layout.word] = token.surface.clone();
        if ncols > doc.layout.ne {
            fields[doc.layout.ne] = ne_fields[token.doc_index].clone();
        }
        if let Some(last) = fields.last_mut() {
            *last = coref_fields[token.doc_index].clone();
        }
        for (i, field) in fields.iter().enumerate() {
            out.push_str(&token.gaps[i]);
            out.push_str(field);
        }
        out.push_str(token.gaps.last().map(String::as_str).unwrap_or(""));
        out.push('\n');
    }
    if !doc.tokens.is_empty() {
        out.push('\n');
    }
    out.push_str("#end document\n");
    out
}

pub fn serialize_corpus(docs: &[Document]) -> String {
    docs.iter().map(serialize_document).collect()
}

fn render_ne_column(doc: &Document) -> Vec<String> {
    let n = doc.tokens.len();
    let mut fields = vec![String::new(); n];
    for (idx, field) in fields.iter_mut().enumerate() {
        // openings, outermost (longest) first
        let mut opens: Vec<&NamedEntitySpan> =
            doc.ne_spans.iter().filter(|ne| ne.span.start == idx).collect();
        opens.sort_by(|a, b| b.span.end.cmp(&a.span.end).then(a.ne_type.cmp(&b.ne_type)));
        for ne in &opens {
            field.push('(');
            field.push_str(&ne.ne_type);
        }
        let single_here = opens.iter().any(|ne| ne.span.end == idx);
        if !single_here {
            field.push('*');
        }
        let closes = doc.ne_spans.iter().filter(|ne| ne.span.end == idx).count();
        for _ in 0..closes {
            field.push(')');
        }
    }
    fields
}

fn render_coref_column(doc: &Document) -> Vec<String> {
    let n = doc.tokens.len();
    let mut fields = Vec::with_capacity(n);
    for idx in 0..n {
        let mut opens: Vec<(usize, Span)> = Vec::new();
        let mut singles: Vec<usize> = Vec::new();
        let mut closes: Vec<(usize, Span)> = Vec::new();
        for cluster in &doc.clusters {
            for span in &cluster.mentions {
                if span.start == idx && span.end == idx {
                    singles.push(cluster.id);
                } else if span.start == idx {
                    opens.push((cluster.id, *span));
                } else if span.end == idx {
                    closes.push((cluster.id, *span));
                }
            }
        }
        opens.sort_by(|a, b| b.1.end.cmp(&a.1.end).then(a.0.cmp(&b.0)));
        singles.sort_unstable();
        closes.sort_by(|a, b| b.1.start.cmp(&a.1.start).then(a.0.cmp(&b.0)));
        let mut entries: Vec<String> = Vec::new();
        entries.extend(opens.iter().map(|(id, _)| format!("({id}")));
        entries.extend(singles.iter().map(|id| format!("({id})")));
        entries.extend(closes.iter().map(|(id, _)| format!("{id})")));
        if entries.is_empty() {
            fields.push("-".to_string());
        } else {
            fields.push(entries.join("|"));
        }
    }
    fields
}
