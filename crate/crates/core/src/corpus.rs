//! Annotated documents: referring expressions, gold keys and corpus statistics.
//!
//! The annotation format is line-oriented UTF-8 with `#` comments:
//!
//! ```text
//! DOC <doc_id> words=<n> sentences=<n> paragraphs=<n>
//! RE id=<id> par=<p> sent=<s> tok=<a>-<b> type=<...> gender=<m|f|n|u> number=<s|p|u>
//!    func=<subj|obj|obl|other|u> head=<lemma> [desc=<l1,l2,...>] [unparsed] surface="<text>"
//! KEY <label>: <id>,<id>,...
//! REL <label> <part-of|composed-of|grouped-from> <label>
//! ```
//!
//! Records must appear in DOC, RE*, KEY*, REL* order; RE records in document order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Identifier of a referring expression, unique within a document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReId(pub String);

impl fmt::Display for ReId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ReId {
    fn from(s: &str) -> Self {
        ReId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Gender {
    Masculine,
    Feminine,
    Neuter,
    Unknown,
}

impl Gender {
    /// `Unknown` agrees with everything; two known values agree iff equal.
    pub fn agrees(self, other: Gender) -> bool {
        self == Gender::Unknown || other == Gender::Unknown || self == other
    }

    pub fn code(self) -> &'static str {
        match self {
            Gender::Masculine => "m",
            Gender::Feminine => "f",
            Gender::Neuter => "n",
            Gender::Unknown => "u",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Number {
    Singular,
    Plural,
    Unknown,
}

impl Number {
    pub fn agrees(self, other: Number) -> bool {
        self == Number::Unknown || other == Number::Unknown || self == other
    }

    pub fn code(self) -> &'static str {
        match self {
            Number::Singular => "s",
            Number::Plural => "p",
            Number::Unknown => "u",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReType {
    Proper,
    Definite,
    Indefinite,
    Demonstrative,
    Pronoun,
}

impl ReType {
    pub fn code(self) -> &'static str {
        match self {
            ReType::Proper => "proper",
            ReType::Definite => "definite",
            ReType::Indefinite => "indefinite",
            ReType::Demonstrative => "demonstrative",
            ReType::Pronoun => "pronoun",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GramFunction {
    Subject,
    Object,
    Oblique,
    Other,
    Unknown,
}

impl GramFunction {
    pub fn code(self) -> &'static str {
        match self {
            GramFunction::Subject => "subj",
            GramFunction::Object => "obj",
            GramFunction::Oblique => "obl",
            GramFunction::Other => "other",
            GramFunction::Unknown => "u",
        }
    }
}

/// Position of an RE in its document.
///
/// `ordinal` is the document-wide sequence number; it is dense (0..N-1) and
/// consistent with (sentence, start_token) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Position {
    pub paragraph: usize,
    pub sentence: usize,
    pub start_token: usize,
    pub end_token: usize,
    pub ordinal: usize,
}

/// One referring expression with its pre-extracted features.
#[derive(Debug, Clone, PartialEq)]
pub struct RefExpr {
    pub id: ReId,
    pub position: Position,
    pub surface: String,
    pub head_lemma: String,
    pub gender: Gender,
    pub number: Number,
    pub re_type: ReType,
    pub gram_function: GramFunction,
    /// Modifier/appositive lemmas usable for compatibility tests.
    pub descriptors: BTreeSet<String>,
    /// Set when the annotation marks this RE as not parsed; such REs
    /// participate in resolution through agreement tests only.
    pub unparsed: bool,
}

impl RefExpr {
    pub fn is_pronoun(&self) -> bool {
        self.re_type == ReType::Pronoun
    }
}

/// An annotated document: counts plus the ordered RE list.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub word_count: usize,
    pub sentence_count: usize,
    pub paragraph_count: usize,
    pub res: Vec<RefExpr>,
}

impl Document {
    pub fn re_by_id(&self, id: &ReId) -> Option<&RefExpr> {
        self.res.iter().find(|re| &re.id == id)
    }

    /// Checks the structural invariants; used after programmatic construction.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, re) in self.res.iter().enumerate() {
            if re.position.ordinal != i {
                return Err(Error::Validation(format!(
                    "RE {} has ordinal {}, expected {}",
                    re.id, re.position.ordinal, i
                )));
            }
            if !seen.insert(re.id.clone()) {
                return Err(Error::Validation(format!("duplicate RE id {}", re.id)));
            }
            if re.position.start_token > re.position.end_token {
                return Err(Error::Validation(format!(
                    "RE {} spans tokens ({},{}): start > end",
                    re.id, re.position.start_token, re.position.end_token
                )));
            }
            if re.position.sentence >= self.sentence_count {
                return Err(Error::Validation(format!(
                    "RE {} sentence {} out of range (document has {})",
                    re.id, re.position.sentence, self.sentence_count
                )));
            }
            if re.position.paragraph >= self.paragraph_count {
                return Err(Error::Validation(format!(
                    "RE {} paragraph {} out of range (document has {})",
                    re.id, re.position.paragraph, self.paragraph_count
                )));
            }
            if re.surface.is_empty() {
                return Err(Error::Validation(format!("RE {} has empty surface", re.id)));
            }
            if !re.is_pronoun() && re.head_lemma.is_empty() {
                return Err(Error::Validation(format!(
                    "non-pronoun RE {} has empty head lemma",
                    re.id
                )));
            }
            if i > 0 {
                let prev = &self.res[i - 1].position;
                if (prev.sentence, prev.start_token)
                    > (re.position.sentence, re.position.start_token)
                {
                    return Err(Error::Validation(format!(
                        "RE {} out of (sentence, token) order",
                        re.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Typed relation between two key MRs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RelationKind {
    PartOf,
    ComposedOf,
    GroupedFrom,
}

impl RelationKind {
    pub fn code(self) -> &'static str {
        match self {
            RelationKind::PartOf => "part-of",
            RelationKind::ComposedOf => "composed-of",
            RelationKind::GroupedFrom => "grouped-from",
        }
    }
}

/// The gold partition of a document's REs into key MRs.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPartition {
    /// RE id -> key MR label. Every RE of the document appears exactly once.
    pub assignment: BTreeMap<ReId, String>,
    pub relations: Vec<(String, RelationKind, String)>,
}

impl KeyPartition {
    /// Labeled cells with member ids in document order.
    pub fn cells(&self, doc: &Document) -> Vec<(String, Vec<ReId>)> {
        let mut by_label: BTreeMap<&String, Vec<ReId>> = BTreeMap::new();
        for re in &doc.res {
            if let Some(label) = self.assignment.get(&re.id) {
                by_label.entry(label).or_default().push(re.id.clone());
            }
        }
        by_label
            .into_iter()
            .map(|(l, ids)| (l.clone(), ids))
            .collect()
    }

    pub fn labels(&self) -> BTreeSet<&String> {
        self.assignment.values().collect()
    }

    /// Errors if the key does not cover exactly the document's RE set.
    pub fn check_covers(&self, doc: &Document) -> Result<()> {
        for re in &doc.res {
            if !self.assignment.contains_key(&re.id) {
                return Err(Error::Coverage(format!("RE {} missing from key", re.id)));
            }
        }
        if self.assignment.len() != doc.res.len() {
            let unknown = self
                .assignment
                .keys()
                .find(|id| doc.re_by_id(id).is_none())
                .expect("size mismatch implies an unknown id");
            return Err(Error::Coverage(format!(
                "key references RE {unknown} not present in document"
            )));
        }
        Ok(())
    }
}

/// Aggregate counts in the style of a corpus characteristics table.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub words: usize,
    pub res: usize,
    pub mrs_key: usize,
    /// REs per key MR, rounded to 2 decimals; `None` when the key is empty.
    pub re_per_mr: Option<f64>,
    pub nominal_res: usize,
    pub pronoun_res: usize,
    pub unparsed_res: usize,
}

/// Computes document/key statistics. Unparsed REs are counted in their own
/// row; pronoun and nominal counts cover the parsed REs, so the three rows
/// always sum to the RE total.
pub fn corpus_stats(doc: &Document, key: &KeyPartition) -> Result<CorpusStats> {
    key.check_covers(doc)?;
    let res = doc.res.len();
    let unparsed_res = doc.res.iter().filter(|re| re.unparsed).count();
    let pronoun_res = doc
        .res
        .iter()
        .filter(|re| !re.unparsed && re.is_pronoun())
        .count();
    let nominal_res = res - pronoun_res - unparsed_res;
    let mrs_key = key.labels().len();
    let re_per_mr = if mrs_key == 0 {
        None
    } else {
        Some((res as f64 / mrs_key as f64 * 100.0).round() / 100.0)
    };
    Ok(CorpusStats {
        words: doc.word_count,
        res,
        mrs_key,
        re_per_mr,
        nominal_res,
        pronoun_res,
        unparsed_res,
    })
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses one annotated document and its key.
pub fn parse_document(input: &str) -> Result<(Document, KeyPartition)> {
    let mut doc: Option<Document> = None;
    let mut assignment: BTreeMap<ReId, String> = BTreeMap::new();
    let mut relations: Vec<(String, RelationKind, String)> = Vec::new();
    let mut labels: BTreeSet<String> = BTreeSet::new();
    // DOC < RE < KEY < REL
    let mut stage = 0u8;

    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (tag, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match tag {
            "DOC" => {
                if doc.is_some() {
                    return Err(Error::parse(lineno, "duplicate DOC record"));
                }
                doc = Some(parse_doc_line(lineno, rest)?);
                stage = 1;
            }
            "RE" => {
                if stage != 1 {
                    return Err(Error::parse(lineno, "RE record outside DOC..KEY section"));
                }
                let doc = doc.as_mut().expect("stage 1 implies DOC seen");
                let ordinal = doc.res.len();
                let re = parse_re_line(lineno, rest, ordinal)?;
                doc.res.push(re);
            }
            "KEY" => {
                if stage == 0 || stage > 2 {
                    return Err(Error::parse(lineno, "KEY record out of order"));
                }
                stage = 2;
                let doc = doc.as_ref().expect("stage >= 1 implies DOC seen");
                let (label, ids) = parse_key_line(lineno, rest)?;
                if !labels.insert(label.clone()) {
                    return Err(Error::Validation(format!(
                        "duplicate key label {label} (line {lineno})"
                    )));
                }
                for id in ids {
                    if doc.re_by_id(&id).is_none() {
                        return Err(Error::Validation(format!(
                            "key {label} references unknown RE id {id} (line {lineno})"
                        )));
                    }
                    if assignment.insert(id.clone(), label.clone()).is_some() {
                        return Err(Error::Validation(format!(
                            "RE {id} assigned to more than one key MR (line {lineno})"
                        )));
                    }
                }
            }
            "REL" => {
                if stage < 1 {
                    return Err(Error::parse(lineno, "REL record before DOC"));
                }
                stage = 3;
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::parse(lineno, "REL expects `<label> <kind> <label>`"));
                }
                let kind = parse_relation_kind(lineno, parts[1])?;
                for label in [parts[0], parts[2]] {
                    if !labels.contains(label) {
                        return Err(Error::Validation(format!(
                            "REL references unknown key label {label} (line {lineno})"
                        )));
                    }
                }
                relations.push((parts[0].to_string(), kind, parts[2].to_string()));
            }
            other => {
                return Err(Error::parse(lineno, format!("unknown record `{other}`")));
            }
        }
    }

    let doc = doc.ok_or_else(|| Error::parse(1, "missing DOC record"))?;
    doc.validate()?;
    let key = KeyPartition {
        assignment,
        relations,
    };
    // Every RE must be covered by the key, even when both are empty.
    key.check_covers(&doc)
        .map_err(|e| Error::Validation(e.to_string()))?;
    Ok((doc, key))
}

fn parse_doc_line(lineno: usize, rest: &str) -> Result<Document> {
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::parse(
            lineno,
            "DOC expects `<doc_id> words=<n> sentences=<n> paragraphs=<n>`",
        ));
    }
    let words = parse_kv_usize(lineno, parts[1], "words")?;
    let sentences = parse_kv_usize(lineno, parts[2], "sentences")?;
    let paragraphs = parse_kv_usize(lineno, parts[3], "paragraphs")?;
    Ok(Document {
        doc_id: parts[0].to_string(),
        word_count: words,
        sentence_count: sentences,
        paragraph_count: paragraphs,
        res: Vec::new(),
    })
}

fn parse_kv_usize(lineno: usize, field: &str, key: &str) -> Result<usize> {
    let value = field
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .ok_or_else(|| Error::parse(lineno, format!("expected `{key}=<n>`, got `{field}`")))?;
    value
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid number in `{field}`")))
}

fn parse_re_line(lineno: usize, rest: &str, ordinal: usize) -> Result<RefExpr> {
    // surface="..." is always the last field; split it off first.
    let surface_at = rest
        .find("surface=\"")
        .ok_or_else(|| Error::parse(lineno, "RE record missing surface=\"...\""))?;
    let surface_raw = &rest[surface_at + "surface=\"".len()..];
    let surface = surface_raw
        .strip_suffix('"')
        .ok_or_else(|| Error::parse(lineno, "unterminated surface string"))?;
    if surface.contains('"') {
        return Err(Error::parse(lineno, "surface must not contain `\"`"));
    }
    if surface.is_empty() {
        return Err(Error::parse(lineno, "surface must not be empty"));
    }

    let mut fields = rest[..surface_at].split_whitespace();
    let mut next_kv = |key: &str| -> Result<String> {
        let field = fields
            .next()
            .ok_or_else(|| Error::parse(lineno, format!("RE record missing `{key}=`")))?;
        field
            .strip_prefix(key)
            .and_then(|s| s.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| Error::parse(lineno, format!("expected `{key}=...`, got `{field}`")))
    };

    let id = next_kv("id")?;
    let par: usize = next_kv("par")?
        .parse()
        .map_err(|_| Error::parse(lineno, "invalid paragraph index"))?;
    let sent: usize = next_kv("sent")?
        .parse()
        .map_err(|_| Error::parse(lineno, "invalid sentence index"))?;
    let tok = next_kv("tok")?;
    let (start_token, end_token) = parse_token_span(lineno, &tok)?;
    let re_type = parse_re_type(lineno, &next_kv("type")?)?;
    let gender = parse_gender(lineno, &next_kv("gender")?)?;
    let number = parse_number(lineno, &next_kv("number")?)?;
    let gram_function = parse_function(lineno, &next_kv("func")?)?;
    let head_lemma = next_kv("head")?;

    let mut descriptors = BTreeSet::new();
    let mut unparsed = false;
    for field in fields {
        if let Some(list) = field.strip_prefix("desc=") {
            descriptors = list
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
        } else if field == "unparsed" {
            unparsed = true;
        } else {
            return Err(Error::parse(lineno, format!("unexpected field `{field}`")));
        }
    }

    Ok(RefExpr {
        id: ReId(id),
        position: Position {
            paragraph: par,
            sentence: sent,
            start_token,
            end_token,
            ordinal,
        },
        surface: surface.to_string(),
        head_lemma,
        gender,
        number,
        re_type,
        gram_function,
        descriptors,
        unparsed,
    })
}

fn parse_token_span(lineno: usize, tok: &str) -> Result<(usize, usize)> {
    let (a, b) = tok
        .split_once('-')
        .ok_or_else(|| Error::parse(lineno, "expected `tok=<a>-<b>`"))?;
    let start: usize = a
        .parse()
        .map_err(|_| Error::parse(lineno, "invalid token offset"))?;
    let end: usize = b
        .parse()
        .map_err(|_| Error::parse(lineno, "invalid token offset"))?;
    if start > end {
        return Err(Error::parse(
            lineno,
            format!("token span ({start},{end}): start > end"),
        ));
    }
    Ok((start, end))
}

fn parse_re_type(lineno: usize, s: &str) -> Result<ReType> {
    match s {
        "proper" => Ok(ReType::Proper),
        "definite" => Ok(ReType::Definite),
        "indefinite" => Ok(ReType::Indefinite),
        "demonstrative" => Ok(ReType::Demonstrative),
        "pronoun" => Ok(ReType::Pronoun),
        _ => Err(Error::parse(lineno, format!("unknown RE type `{s}`"))),
    }
}

fn parse_gender(lineno: usize, s: &str) -> Result<Gender> {
    match s {
        "m" => Ok(Gender::Masculine),
        "f" => Ok(Gender::Feminine),
        "n" => Ok(Gender::Neuter),
        "u" => Ok(Gender::Unknown),
        _ => Err(Error::parse(lineno, format!("unknown gender `{s}`"))),
    }
}

fn parse_number(lineno: usize, s: &str) -> Result<Number> {
    match s {
        "s" => Ok(Number::Singular),
        "p" => Ok(Number::Plural),
        "u" => Ok(Number::Unknown),
        _ => Err(Error::parse(lineno, format!("unknown number `{s}`"))),
    }
}

fn parse_function(lineno: usize, s: &str) -> Result<GramFunction> {
    match s {
        "subj" => Ok(GramFunction::Subject),
        "obj" => Ok(GramFunction::Object),
        "obl" => Ok(GramFunction::Oblique),
        "other" => Ok(GramFunction::Other),
        "u" => Ok(GramFunction::Unknown),
        _ => Err(Error::parse(lineno, format!("unknown function `{s}`"))),
    }
}

fn parse_relation_kind(lineno: usize, s: &str) -> Result<RelationKind> {
    match s {
        "part-of" => Ok(RelationKind::PartOf),
        "composed-of" => Ok(RelationKind::ComposedOf),
        "grouped-from" => Ok(RelationKind::GroupedFrom),
        _ => Err(Error::parse(lineno, format!("unknown relation kind `{s}`"))),
    }
}

fn parse_key_line(lineno: usize, rest: &str) -> Result<(String, Vec<ReId>)> {
    let (label, ids) = rest
        .split_once(':')
        .ok_or_else(|| Error::parse(lineno, "KEY expects `<label>: <id>,<id>,...`"))?;
    let label = label.trim();
    if label.is_empty() {
        return Err(Error::parse(lineno, "empty key label"));
    }
    let ids: Vec<ReId> = ids
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(ReId::from)
        .collect();
    if ids.is_empty() {
        return Err(Error::parse(lineno, format!("key {label} lists no REs")));
    }
    Ok((label.to_string(), ids))
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Renders a (document, key) pair back into the annotation format.
/// Re-parsing the output yields values equal to the input.
pub fn serialize_document(doc: &Document, key: &KeyPartition) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "DOC {} words={} sentences={} paragraphs={}\n",
        doc.doc_id, doc.word_count, doc.sentence_count, doc.paragraph_count
    ));
    for re in &doc.res {
        out.push_str(&format!(
            "RE id={} par={} sent={} tok={}-{} type={} gender={} number={} func={} head={}",
            re.id,
            re.position.paragraph,
            re.position.sentence,
            re.position.start_token,
            re.position.end_token,
            re.re_type.code(),
            re.gender.code(),
            re.number.code(),
            re.gram_function.code(),
            re.head_lemma,
        ));
        if !re.descriptors.is_empty() {
            let list: Vec<&str> = re.descriptors.iter().map(String::as_str).collect();
            out.push_str(&format!(" desc={}", list.join(",")));
        }
        if re.unparsed {
            out.push_str(" unparsed");
        }
        out.push_str(&format!(" surface=\"{}\"\n", re.surface));
    }
    for (label, ids) in key.cells(doc) {
        let list: Vec<String> = ids.iter().map(ToString::to_string).collect();
        out.push_str(&format!("KEY {label}: {}\n", list.join(",")));
    }
    for (a, kind, b) in &key.relations {
        out.push_str(&format!("REL {a} {} {b}\n", kind.code()));
    }
    out
}
