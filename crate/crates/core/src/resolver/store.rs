//! The MR store: all mental representations of a run plus the working memory
//! that splits them into an active set and an archive.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Gender, Number, ReId, RefExpr, RelationKind};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::resolver::{MrId, SalienceParams, TraceEvent};

/// One discourse object: the REs attached to it, its activation, and its
/// typed relations to other MRs.
#[derive(Debug, Clone, PartialEq)]
pub struct MentalRep {
    id: MrId,
    /// Attached RE ids in attachment order.
    re_list: Vec<ReId>,
    /// Head lemmas of the attached non-pronoun REs.
    lemma_summary: BTreeSet<String>,
    /// Synthetic descriptors for MRs not created from an RE (collective
    /// members and groups); consulted when `re_list` is empty.
    seed_lemmas: BTreeSet<String>,
    /// 1-based member position for MRs created by partitioning a collective.
    member_index: Option<u32>,
    /// MR-level agreement constraints for seeded MRs; `Unknown` otherwise.
    gender: Gender,
    number: Number,
    activation: f64,
    relations: Vec<(RelationKind, MrId)>,
    archived: bool,
    /// Allows an empty `re_list` until the first attachment.
    provisional: bool,
}

impl MentalRep {
    pub fn id(&self) -> MrId {
        self.id
    }

    pub fn re_list(&self) -> &[ReId] {
        &self.re_list
    }

    pub fn lemma_summary(&self) -> &BTreeSet<String> {
        &self.lemma_summary
    }

    pub fn seed_lemmas(&self) -> &BTreeSet<String> {
        &self.seed_lemmas
    }

    pub fn member_index(&self) -> Option<u32> {
        self.member_index
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn number(&self) -> Number {
        self.number
    }

    pub fn activation(&self) -> f64 {
        self.activation
    }

    pub fn relations(&self) -> &[(RelationKind, MrId)] {
        &self.relations
    }

    pub fn is_archived(&self) -> bool {
        self.archived
    }

    pub fn is_provisional(&self) -> bool {
        self.provisional
    }

    /// Structural invariants; used by tests after every operation.
    pub fn check_invariants(&self) -> Result<()> {
        if self.re_list.is_empty() && !self.provisional {
            return Err(Error::Validation(format!("MR {} has no REs", self.id)));
        }
        let unique: BTreeSet<&ReId> = self.re_list.iter().collect();
        if unique.len() != self.re_list.len() {
            return Err(Error::Validation(format!(
                "MR {} lists an RE twice",
                self.id
            )));
        }
        if !self.activation.is_finite() || self.activation < 0.0 {
            return Err(Error::Validation(format!(
                "MR {} has invalid activation {}",
                self.id, self.activation
            )));
        }
        if self.relations.iter().any(|(_, other)| *other == self.id) {
            return Err(Error::Validation(format!(
                "MR {} relates to itself",
                self.id
            )));
        }
        Ok(())
    }
}

/// Quota-bounded active set plus archive. Archived MRs never re-enter the
/// active set.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingMemory {
    active: BTreeSet<MrId>,
    archive: BTreeSet<MrId>,
    quota: usize,
}

impl WorkingMemory {
    pub fn new(quota: usize) -> Result<Self> {
        if quota < 1 {
            return Err(Error::Config("quota must be at least 1".to_string()));
        }
        Ok(WorkingMemory {
            active: BTreeSet::new(),
            archive: BTreeSet::new(),
            quota,
        })
    }

    pub fn quota(&self) -> usize {
        self.quota
    }

    pub fn active(&self) -> &BTreeSet<MrId> {
        &self.active
    }

    pub fn archive(&self) -> &BTreeSet<MrId> {
        &self.archive
    }
}

/// Owns every MR of a run together with its working memory and the event
/// trace. All mutation goes through the operations below.
#[derive(Debug, Clone, PartialEq)]
pub struct MrStore {
    mrs: BTreeMap<MrId, MentalRep>,
    memory: WorkingMemory,
    /// Document position of every RE seen so far; orders fused RE lists.
    re_ordinals: BTreeMap<ReId, usize>,
    next_id: u64,
    trace: Vec<TraceEvent>,
}

impl MrStore {
    pub fn new(quota: usize) -> Result<Self> {
        Ok(MrStore {
            mrs: BTreeMap::new(),
            memory: WorkingMemory::new(quota)?,
            re_ordinals: BTreeMap::new(),
            next_id: 1,
            trace: Vec::new(),
        })
    }

    pub fn memory(&self) -> &WorkingMemory {
        &self.memory
    }

    pub fn get(&self, id: MrId) -> Option<&MentalRep> {
        self.mrs.get(&id)
    }

    pub fn mrs(&self) -> impl Iterator<Item = &MentalRep> {
        self.mrs.values()
    }

    pub fn len(&self) -> usize {
        self.mrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mrs.is_empty()
    }

    pub fn active_mrs(&self) -> impl Iterator<Item = &MentalRep> {
        self.memory.active.iter().map(|id| &self.mrs[id])
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }

    fn fresh_id(&mut self) -> MrId {
        let id = MrId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Opens a new MR for an RE. The MR starts at the initial activation plus
    /// the RE's type and function boosts, and enters the active set.
    pub fn create_mr(&mut self, re: &RefExpr, params: &SalienceParams) -> MrId {
        let id = self.fresh_id();
        let activation = params.initial_activation + params.boost_for(re.re_type, re.gram_function);
        let mut lemma_summary = BTreeSet::new();
        if !re.is_pronoun() {
            lemma_summary.insert(re.head_lemma.clone());
        }
        self.re_ordinals.insert(re.id.clone(), re.position.ordinal);
        self.mrs.insert(
            id,
            MentalRep {
                id,
                re_list: vec![re.id.clone()],
                lemma_summary,
                seed_lemmas: BTreeSet::new(),
                member_index: None,
                gender: Gender::Unknown,
                number: Number::Unknown,
                activation,
                relations: Vec::new(),
                archived: false,
                provisional: false,
            },
        );
        self.memory.active.insert(id);
        self.trace.push(TraceEvent::Create {
            re: re.id.clone(),
            mr: id,
            activation,
        });
        id
    }

    /// Appends an RE to an active MR and boosts its activation.
    pub fn attach_re(&mut self, mr_id: MrId, re: &RefExpr, params: &SalienceParams) -> Result<()> {
        let mr = self
            .mrs
            .get_mut(&mr_id)
            .ok_or_else(|| Error::Contract(format!("attach to unknown MR {mr_id}")))?;
        if mr.archived {
            return Err(Error::Contract(format!(
                "MR {mr_id} is archived and inaccessible"
            )));
        }
        if mr.re_list.contains(&re.id) {
            return Err(Error::Contract(format!(
                "RE {} already attached to MR {mr_id}",
                re.id
            )));
        }
        mr.re_list.push(re.id.clone());
        if !re.is_pronoun() {
            mr.lemma_summary.insert(re.head_lemma.clone());
        }
        mr.provisional = false;
        mr.activation += params.boost_for(re.re_type, re.gram_function);
        let activation = mr.activation;
        self.re_ordinals.insert(re.id.clone(), re.position.ordinal);
        self.trace.push(TraceEvent::Attach {
            re: re.id.clone(),
            mr: mr_id,
            activation,
        });
        Ok(())
    }

    /// Merges two MRs into a new one: RE lists interleaved in document order,
    /// activation the maximum of the two, relations the union with references
    /// to the merged pair retargeted.
    pub fn fuse_mrs(&mut self, a: MrId, b: MrId) -> Result<MrId> {
        if a == b {
            return Err(Error::Contract(format!("cannot fuse MR {a} with itself")));
        }
        let (ra, rb) = match (self.mrs.remove(&a), self.mrs.remove(&b)) {
            (Some(ra), Some(rb)) => (ra, rb),
            (ra, rb) => {
                // Put back whichever half existed before failing.
                if let Some(ra) = ra {
                    self.mrs.insert(a, ra);
                }
                if let Some(rb) = rb {
                    self.mrs.insert(b, rb);
                }
                return Err(Error::Contract(format!("fuse of unknown MR {a} or {b}")));
            }
        };
        let id = self.fresh_id();

        let mut by_ordinal: BTreeMap<usize, ReId> = BTreeMap::new();
        for re in ra.re_list.iter().chain(rb.re_list.iter()) {
            let ordinal = *self
                .re_ordinals
                .get(re)
                .expect("attached REs always have a recorded ordinal");
            by_ordinal.insert(ordinal, re.clone());
        }
        let re_list: Vec<ReId> = by_ordinal.into_values().collect();

        let mut relations: Vec<(RelationKind, MrId)> = Vec::new();
        for rel in ra.relations.iter().chain(rb.relations.iter()) {
            if rel.1 != a && rel.1 != b && !relations.contains(rel) {
                relations.push(*rel);
            }
        }

        let provisional = re_list.is_empty();
        let merged = MentalRep {
            id,
            re_list,
            lemma_summary: ra.lemma_summary.union(&rb.lemma_summary).cloned().collect(),
            seed_lemmas: ra.seed_lemmas.union(&rb.seed_lemmas).cloned().collect(),
            member_index: None,
            gender: if ra.gender == rb.gender {
                ra.gender
            } else {
                Gender::Unknown
            },
            number: if ra.number == rb.number {
                ra.number
            } else {
                Number::Unknown
            },
            activation: ra.activation.max(rb.activation),
            relations,
            archived: false,
            provisional,
        };
        let activation = merged.activation;
        self.mrs.insert(id, merged);

        // Relations held by other MRs now point at the fused MR.
        for mr in self.mrs.values_mut() {
            let mut retargeted: Vec<(RelationKind, MrId)> = Vec::new();
            for (kind, target) in mr.relations.drain(..) {
                let target = if target == a || target == b { id } else { target };
                if target != mr.id && !retargeted.contains(&(kind, target)) {
                    retargeted.push((kind, target));
                }
            }
            mr.relations = retargeted;
        }

        self.memory.active.remove(&a);
        self.memory.active.remove(&b);
        self.memory.archive.remove(&a);
        self.memory.archive.remove(&b);
        self.memory.active.insert(id);
        self.trace.push(TraceEvent::Fuse {
            sources: (a, b),
            mr: id,
            activation,
        });
        Ok(id)
    }

    /// Splits a collective MR into member MRs using the lexicon's collective
    /// entry. Members are provisional (no REs yet), carry a synthetic member
    /// descriptor, and relate to the collective with part-of / composed-of.
    pub fn partition_mr(&mut self, a: MrId, lex: &Lexicon, params: &SalienceParams) -> Result<Vec<MrId>> {
        let mr = self
            .mrs
            .get(&a)
            .ok_or_else(|| Error::Contract(format!("partition of unknown MR {a}")))?;
        let mut unknown_count = None;
        let mut entry: Option<(String, u32)> = None;
        for lemma in mr.lemma_summary.iter().chain(mr.seed_lemmas.iter()) {
            match lex.collective(lemma) {
                Some((member, Some(count))) => {
                    entry = Some((member.to_string(), count));
                    break;
                }
                Some((_, None)) => unknown_count = Some(lemma.clone()),
                None => {}
            }
        }
        let (member_lemma, count) = match entry {
            Some(e) => e,
            None => {
                return Err(match unknown_count {
                    Some(lemma) => Error::NotApplicable(format!(
                        "collective {lemma} has unknown member count"
                    )),
                    None => Error::NotApplicable(format!("MR {a} has no collective entry")),
                })
            }
        };

        let gender = lex.default_gender(&member_lemma).unwrap_or(Gender::Unknown);
        let mut members = Vec::with_capacity(count as usize);
        for index in 1..=count {
            let id = self.fresh_id();
            self.mrs.insert(
                id,
                MentalRep {
                    id,
                    re_list: Vec::new(),
                    lemma_summary: BTreeSet::new(),
                    seed_lemmas: BTreeSet::from([member_lemma.clone()]),
                    member_index: Some(index),
                    gender,
                    number: Number::Singular,
                    activation: params.initial_activation,
                    relations: vec![(RelationKind::PartOf, a)],
                    archived: false,
                    provisional: true,
                },
            );
            self.memory.active.insert(id);
            members.push(id);
        }
        let mr = self.mrs.get_mut(&a).expect("collective looked up above");
        for member in &members {
            mr.relations.push((RelationKind::ComposedOf, *member));
        }
        self.trace.push(TraceEvent::Partition {
            collective: a,
            members: members.clone(),
            activation: params.initial_activation,
        });
        Ok(members)
    }

    /// Builds a plural group MR over two existing MRs. Both components
    /// persist unchanged; the group starts provisional with the components'
    /// characteristic lemmas as its seeds.
    pub fn group_mrs(&mut self, a: MrId, b: MrId, params: &SalienceParams) -> Result<MrId> {
        if a == b {
            return Err(Error::Contract(format!("cannot group MR {a} with itself")));
        }
        if !self.mrs.contains_key(&a) || !self.mrs.contains_key(&b) {
            return Err(Error::Contract(format!("group of unknown MR {a} or {b}")));
        }
        let id = self.fresh_id();
        let mut seed_lemmas = BTreeSet::new();
        for src in [a, b] {
            let mr = &self.mrs[&src];
            seed_lemmas.extend(mr.lemma_summary.iter().cloned());
            seed_lemmas.extend(mr.seed_lemmas.iter().cloned());
        }
        self.mrs.insert(
            id,
            MentalRep {
                id,
                re_list: Vec::new(),
                lemma_summary: BTreeSet::new(),
                seed_lemmas,
                member_index: None,
                gender: Gender::Unknown,
                number: Number::Plural,
                activation: params.initial_activation,
                relations: vec![(RelationKind::ComposedOf, a), (RelationKind::ComposedOf, b)],
                archived: false,
                provisional: true,
            },
        );
        self.memory.active.insert(id);
        self.trace.push(TraceEvent::Group {
            sources: (a, b),
            mr: id,
            activation: params.initial_activation,
        });
        Ok(id)
    }

    /// Multiplies every active MR's activation by `sentence_decay` once per
    /// crossed boundary. Archived MRs keep their last activation.
    pub fn apply_decay(&mut self, params: &SalienceParams, n_boundaries: usize) {
        if n_boundaries == 0 {
            return;
        }
        let factor = params.sentence_decay.powi(n_boundaries as i32);
        for id in &self.memory.active {
            let mr = self.mrs.get_mut(id).expect("active ids are stored");
            mr.activation *= factor;
        }
    }

    /// Archives lowest-activation MRs until the active set fits the quota.
    /// Ties archive the smaller (older) id first. Returns the archived ids.
    pub fn enforce_quota(&mut self) -> Vec<MrId> {
        let mut archived = Vec::new();
        while self.memory.active.len() > self.memory.quota {
            let victim = self
                .memory
                .active
                .iter()
                .map(|id| {
                    let act = self.mrs[id].activation;
                    (act, *id)
                })
                .min_by(|a, b| a.partial_cmp(b).expect("activations are finite"))
                .map(|(_, id)| id)
                .expect("active set is non-empty while over quota");
            self.archive_mr(victim);
            archived.push(victim);
        }
        archived
    }

    /// Moves one MR from the active set to the archive.
    pub(crate) fn archive_mr(&mut self, id: MrId) {
        if !self.memory.active.remove(&id) {
            return;
        }
        self.memory.archive.insert(id);
        let mr = self.mrs.get_mut(&id).expect("archived ids are stored");
        mr.archived = true;
        self.trace.push(TraceEvent::Archive {
            mr: id,
            activation: mr.activation,
        });
    }

    /// Store-wide invariants; used by tests.
    pub fn check_invariants(&self) -> Result<()> {
        for mr in self.mrs.values() {
            mr.check_invariants()?;
            let in_active = self.memory.active.contains(&mr.id);
            let in_archive = self.memory.archive.contains(&mr.id);
            if in_active == in_archive {
                return Err(Error::Validation(format!(
                    "MR {} must be in exactly one memory set",
                    mr.id
                )));
            }
            if mr.archived != in_archive {
                return Err(Error::Validation(format!(
                    "MR {} archived flag disagrees with memory",
                    mr.id
                )));
            }
        }
        for id in self.memory.active.iter().chain(self.memory.archive.iter()) {
            if !self.mrs.contains_key(id) {
                return Err(Error::Validation(format!("memory lists unknown MR {id}")));
            }
        }
        if self.memory.active.len() > self.memory.quota {
            return Err(Error::Validation(format!(
                "active set exceeds quota: {} > {}",
                self.memory.active.len(),
                self.memory.quota
            )));
        }
        Ok(())
    }
}
