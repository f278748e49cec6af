//! Compatibility rules, selection heuristics and the incremental resolution
//! loop.

use std::collections::BTreeMap;

use crate::corpus::{Document, ReId, RefExpr};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::resolver::{Heuristic, MentalRep, MrId, MrStore, ResolverConfig, TraceEvent};
use crate::scorer::Partition;

/// RE lookup by id over a document.
pub struct ReIndex<'a> {
    map: BTreeMap<&'a ReId, &'a RefExpr>,
}

impl<'a> ReIndex<'a> {
    pub fn new(doc: &'a Document) -> Self {
        ReIndex {
            map: doc.res.iter().map(|re| (&re.id, re)).collect(),
        }
    }

    pub fn get(&self, id: &ReId) -> &'a RefExpr {
        self.map.get(id).expect("resolved REs come from the document")
    }
}

/// Gender and number agreement: `Unknown` is compatible with everything, two
/// known values must be equal.
pub fn agreement_compatible(a: &RefExpr, b: &RefExpr) -> bool {
    a.gender.agrees(b.gender) && a.number.agrees(b.number)
}

/// Pairwise coreference test for two non-pronoun REs: agreement plus the
/// semantic rule on head lemmas, also letting a head match the other RE's
/// descriptors.
///
/// Pronoun arguments are a contract violation.
pub fn re_compatible(lex: &Lexicon, a: &RefExpr, b: &RefExpr) -> bool {
    assert!(
        !a.is_pronoun() && !b.is_pronoun(),
        "re_compatible is undefined for pronouns"
    );
    agreement_compatible(a, b)
        && (lex.compatible(&a.head_lemma, &b.head_lemma)
            || b.descriptors
                .iter()
                .any(|d| lex.compatible(&a.head_lemma, d))
            || a.descriptors
                .iter()
                .any(|d| lex.compatible(d, &b.head_lemma)))
}

fn head_or_descriptor_compatible(lex: &Lexicon, re: &RefExpr, lemma: &str) -> bool {
    lex.compatible(&re.head_lemma, lemma)
        || re.descriptors.iter().any(|d| lex.compatible(d, lemma))
}

/// Agreement of an incoming RE against the MR-level constraints carried by
/// seeded MRs (collective members, groups).
fn mr_level_agreement(mr: &MentalRep, re: &RefExpr) -> bool {
    mr.gender().agrees(re.gender) && mr.number().agrees(re.number)
}

/// Agreement against the most recently attached RE; vacuously true for an MR
/// with no REs yet.
fn agreement_with_most_recent(mr: &MentalRep, index: &ReIndex, re: &RefExpr) -> bool {
    match mr.re_list().last() {
        Some(last) => agreement_compatible(re, index.get(last)),
        None => mr_level_agreement(mr, re),
    }
}

/// Decides whether `re` may refer to the object represented by `mr`.
///
/// Pronouns and unparsed REs skip the semantic rule and only need agreement
/// with the MR's most recent RE. Otherwise the heuristic quantifies the
/// pairwise test over the MR's non-pronoun REs; an MR without any falls back
/// to agreement, and a still-provisional MR is matched through its seed
/// lemmas under its own gender/number constraints.
pub fn selection_pass(
    heuristic: &Heuristic,
    lex: &Lexicon,
    mr: &MentalRep,
    index: &ReIndex,
    re: &RefExpr,
) -> bool {
    if re.is_pronoun() || re.unparsed {
        return agreement_with_most_recent(mr, index, re);
    }
    if mr.re_list().is_empty() {
        return mr_level_agreement(mr, re)
            && mr
                .seed_lemmas()
                .iter()
                .any(|lemma| head_or_descriptor_compatible(lex, re, lemma));
    }
    let nominals: Vec<&RefExpr> = mr
        .re_list()
        .iter()
        .map(|id| index.get(id))
        .filter(|m| !m.is_pronoun())
        .collect();
    if nominals.is_empty() {
        return agreement_with_most_recent(mr, index, re);
    }
    match heuristic {
        Heuristic::FirstCompatible => re_compatible(lex, re, nominals[0]),
        Heuristic::AllCompatible => nominals.iter().all(|m| re_compatible(lex, re, m)),
        Heuristic::AnyCompatible => nominals.iter().any(|m| re_compatible(lex, re, m)),
        Heuristic::RatioCompatible { percent } => {
            let total = nominals.len();
            let count = nominals.iter().filter(|m| re_compatible(lex, re, m)).count();
            count >= 1 && (count * 100) as f64 >= percent * total as f64
        }
    }
}

/// Output of a resolution run: the final MR store, the response partition it
/// induces, and the ordered event trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub store: MrStore,
    pub response: Partition,
    pub trace: Vec<TraceEvent>,
}

impl Resolution {
    /// Response cells labeled `mr<id>`, members in attachment order.
    pub fn labeled_cells(&self) -> Vec<(String, Vec<ReId>)> {
        self.store
            .mrs()
            .filter(|mr| !mr.re_list().is_empty())
            .map(|mr| (format!("mr{}", mr.id()), mr.re_list().to_vec()))
            .collect()
    }
}

/// Resolves a document's REs one by one, in document order.
///
/// At each sentence boundary every active MR decays once. Each RE is then
/// attached to the most active MR passing the selection heuristic (ties go to
/// the most recently created MR), or opens a new MR when none passes — or
/// unconditionally when it is indefinite and the configuration says so.
/// After every step the working-memory quota is enforced.
pub fn resolve_document(doc: &Document, cfg: &ResolverConfig, lex: &Lexicon) -> Result<Resolution> {
    cfg.validate()?;
    let index = ReIndex::new(doc);
    let mut store = MrStore::new(cfg.quota)?;
    let mut sentence = 0usize;

    for re in &doc.res {
        if re.position.sentence > sentence {
            store.apply_decay(&cfg.salience, re.position.sentence - sentence);
            sentence = re.position.sentence;
        }
        let forced_new =
            cfg.indefinite_creates_new && re.re_type == crate::corpus::ReType::Indefinite;
        let target: Option<MrId> = if forced_new {
            None
        } else {
            store
                .active_mrs()
                .filter(|mr| selection_pass(&cfg.heuristic, lex, mr, &index, re))
                .max_by(|a, b| {
                    (a.activation(), a.id())
                        .partial_cmp(&(b.activation(), b.id()))
                        .expect("activations are finite")
                })
                .map(|mr| mr.id())
        };
        match target {
            Some(mr) => store.attach_re(mr, re, &cfg.salience)?,
            None => {
                store.create_mr(re, &cfg.salience);
            }
        }
        store.enforce_quota();
    }

    let trace = store.take_trace();
    let response = response_partition(&store)?;
    Ok(Resolution {
        store,
        response,
        trace,
    })
}

fn response_partition(store: &MrStore) -> Result<Partition> {
    Partition::new(
        store
            .mrs()
            .filter(|mr| !mr.re_list().is_empty())
            .map(|mr| mr.re_list().iter().cloned().collect())
            .collect(),
    )
}

/// Rebuilds the MR store by replaying a resolution trace against the
/// document it came from. Decay is re-derived from the document's sentence
/// boundaries, so the reconstructed store matches the original exactly.
pub fn replay_trace(
    doc: &Document,
    cfg: &ResolverConfig,
    trace: &[TraceEvent],
) -> Result<MrStore> {
    cfg.validate()?;
    let index = ReIndex::new(doc);
    let mut store = MrStore::new(cfg.quota)?;
    let mut sentence = 0usize;

    let mut advance = |store: &mut MrStore, re: &RefExpr| {
        if re.position.sentence > sentence {
            store.apply_decay(&cfg.salience, re.position.sentence - sentence);
            sentence = re.position.sentence;
        }
    };

    for event in trace {
        match event {
            TraceEvent::Create { re, mr, .. } => {
                let re = index.get(re);
                advance(&mut store, re);
                let id = store.create_mr(re, &cfg.salience);
                if id != *mr {
                    return Err(Error::Validation(format!(
                        "trace expects MR {mr}, store produced {id}"
                    )));
                }
            }
            TraceEvent::Attach { re, mr, .. } => {
                let re = index.get(re);
                advance(&mut store, re);
                store.attach_re(*mr, re, &cfg.salience)?;
            }
            TraceEvent::Archive { mr, .. } => {
                store.archive_mr(*mr);
            }
            other => {
                return Err(Error::Validation(format!(
                    "resolution traces never contain {other:?}"
                )));
            }
        }
    }
    // The ops just replayed emitted their own events; they must reproduce the
    // input trace, activation snapshots included.
    let regenerated = store.take_trace();
    if regenerated != trace {
        return Err(Error::Validation(
            "replayed events diverge from the recorded trace".to_string(),
        ));
    }
    Ok(store)
}

// ---------------------------------------------------------------------------
// Trace IO
// ---------------------------------------------------------------------------

/// Renders a trace as a line-oriented log. Activations use the shortest
/// representation that parses back to the same value.
pub fn write_trace(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for event in trace {
        match event {
            TraceEvent::Create { re, mr, activation } => {
                out.push_str(&format!("EVENT create re={re} mr={mr} act={activation}\n"));
            }
            TraceEvent::Attach { re, mr, activation } => {
                out.push_str(&format!("EVENT attach re={re} mr={mr} act={activation}\n"));
            }
            TraceEvent::Archive { mr, activation } => {
                out.push_str(&format!("EVENT archive re=- mr={mr} act={activation}\n"));
            }
            TraceEvent::Fuse {
                sources,
                mr,
                activation,
            } => {
                out.push_str(&format!(
                    "EVENT fuse re=- mr={mr} act={activation} src={},{}\n",
                    sources.0, sources.1
                ));
            }
            TraceEvent::Partition {
                collective,
                members,
                activation,
            } => {
                let list: Vec<String> = members.iter().map(ToString::to_string).collect();
                out.push_str(&format!(
                    "EVENT partition re=- mr={collective} act={activation} members={}\n",
                    list.join(",")
                ));
            }
            TraceEvent::Group {
                sources,
                mr,
                activation,
            } => {
                out.push_str(&format!(
                    "EVENT group re=- mr={mr} act={activation} src={},{}\n",
                    sources.0, sources.1
                ));
            }
        }
    }
    out
}

/// Parses a trace log back into events.
pub fn parse_trace(input: &str) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rest = line
            .strip_prefix("EVENT ")
            .ok_or_else(|| Error::parse(lineno, "expected `EVENT <kind> ...`"))?;
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(Error::parse(lineno, "truncated trace event"));
        }
        let kind = fields[0];
        let re = field_value(lineno, fields[1], "re")?;
        let mr = MrId(parse_u64(lineno, &field_value(lineno, fields[2], "mr")?)?);
        let activation: f64 = field_value(lineno, fields[3], "act")?
            .parse()
            .map_err(|_| Error::parse(lineno, "invalid activation"))?;
        let event = match kind {
            "create" => TraceEvent::Create {
                re: ReId(re),
                mr,
                activation,
            },
            "attach" => TraceEvent::Attach {
                re: ReId(re),
                mr,
                activation,
            },
            "archive" => TraceEvent::Archive { mr, activation },
            "fuse" | "group" => {
                let src = field_value(lineno, extra_field(lineno, &fields, 4)?, "src")?;
                let sources = parse_pair(lineno, &src)?;
                if kind == "fuse" {
                    TraceEvent::Fuse {
                        sources,
                        mr,
                        activation,
                    }
                } else {
                    TraceEvent::Group {
                        sources,
                        mr,
                        activation,
                    }
                }
            }
            "partition" => {
                let members = field_value(lineno, extra_field(lineno, &fields, 4)?, "members")?;
                let members: Result<Vec<MrId>> = members
                    .split(',')
                    .map(|s| parse_u64(lineno, s).map(MrId))
                    .collect();
                TraceEvent::Partition {
                    collective: mr,
                    members: members?,
                    activation,
                }
            }
            other => return Err(Error::parse(lineno, format!("unknown event kind `{other}`"))),
        };
        events.push(event);
    }
    Ok(events)
}

fn extra_field<'a>(lineno: usize, fields: &[&'a str], index: usize) -> Result<&'a str> {
    fields
        .get(index)
        .copied()
        .ok_or_else(|| Error::parse(lineno, "truncated trace event"))
}

fn field_value(lineno: usize, field: &str, key: &str) -> Result<String> {
    field
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .map(str::to_string)
        .ok_or_else(|| Error::parse(lineno, format!("expected `{key}=...`, got `{field}`")))
}

fn parse_u64(lineno: usize, s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::parse(lineno, format!("invalid MR id `{s}`")))
}

fn parse_pair(lineno: usize, s: &str) -> Result<(MrId, MrId)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::parse(lineno, "expected `src=<a>,<b>`"))?;
    Ok((MrId(parse_u64(lineno, a)?), MrId(parse_u64(lineno, b)?)))
}
