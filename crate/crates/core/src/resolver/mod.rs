//! Incremental reference resolution: each RE is attached to an existing
//! mental representation or opens a new one, guided by a selection heuristic,
//! agreement and semantic rules, and activation ranking over a quota-bounded
//! working memory.

mod engine;
mod store;

pub use engine::{
    agreement_compatible, parse_trace, re_compatible, replay_trace, resolve_document,
    selection_pass, write_trace, ReIndex, Resolution,
};
pub use store::{MentalRep, MrStore, WorkingMemory};

use std::fmt;
use std::str::FromStr;

use crate::corpus::{GramFunction, ReId, ReType};
use crate::error::{Error, Result};

/// Identifier of a mental representation, assigned sequentially by the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MrId(pub u64);

impl fmt::Display for MrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Selection heuristic: which of the MR's non-pronoun REs must be pairwise
/// compatible with the incoming RE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Heuristic {
    /// Compatible with the first non-pronoun RE of the MR.
    FirstCompatible,
    /// Compatible with every non-pronoun RE.
    AllCompatible,
    /// Compatible with at least one non-pronoun RE.
    AnyCompatible,
    /// At least one compatible RE, and the compatible fraction reaches
    /// `percent` / 100. The endpoints coincide with `AnyCompatible` (0) and
    /// `AllCompatible` (100).
    RatioCompatible { percent: f64 },
}

impl Heuristic {
    pub fn validate(&self) -> Result<()> {
        if let Heuristic::RatioCompatible { percent } = self {
            if !percent.is_finite() || !(0.0..=100.0).contains(percent) {
                return Err(Error::Config(format!(
                    "heuristic threshold {percent} outside [0,100]"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Heuristic::FirstCompatible => write!(f, "h1"),
            Heuristic::AllCompatible => write!(f, "h2"),
            Heuristic::AnyCompatible => write!(f, "h3"),
            Heuristic::RatioCompatible { percent } => {
                if percent.fract() == 0.0 {
                    write!(f, "h4:{}", *percent as u64)
                } else {
                    write!(f, "h4:{percent}")
                }
            }
        }
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "h1" => Ok(Heuristic::FirstCompatible),
            "h2" => Ok(Heuristic::AllCompatible),
            "h3" => Ok(Heuristic::AnyCompatible),
            _ => {
                if let Some(x) = lower.strip_prefix("h4:") {
                    let percent: f64 = x
                        .parse()
                        .map_err(|_| Error::Config(format!("invalid heuristic `{s}`")))?;
                    let h = Heuristic::RatioCompatible { percent };
                    h.validate()?;
                    Ok(h)
                } else {
                    Err(Error::Config(format!(
                        "invalid heuristic `{s}` (expected h1|h2|h3|h4:<X>)"
                    )))
                }
            }
        }
    }
}

/// Activation parameters: per-boundary decay plus boost tables keyed by RE
/// type and grammatical function. All values are free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SalienceParams {
    pub initial_activation: f64,
    /// Multiplier applied to every active MR at each sentence boundary.
    pub sentence_decay: f64,
    type_boost: [f64; 5],
    function_boost: [f64; 5],
}

impl Default for SalienceParams {
    fn default() -> Self {
        let mut p = SalienceParams {
            initial_activation: 0.0,
            sentence_decay: 0.5,
            type_boost: [0.0; 5],
            function_boost: [0.0; 5],
        };
        p.set_type_boost(ReType::Proper, 80.0);
        p.set_type_boost(ReType::Definite, 50.0);
        p.set_type_boost(ReType::Demonstrative, 40.0);
        p.set_type_boost(ReType::Indefinite, 30.0);
        p.set_type_boost(ReType::Pronoun, 20.0);
        p.set_function_boost(GramFunction::Subject, 80.0);
        p.set_function_boost(GramFunction::Object, 50.0);
        p.set_function_boost(GramFunction::Oblique, 30.0);
        p.set_function_boost(GramFunction::Other, 20.0);
        p.set_function_boost(GramFunction::Unknown, 0.0);
        p
    }
}

fn type_slot(t: ReType) -> usize {
    match t {
        ReType::Proper => 0,
        ReType::Definite => 1,
        ReType::Indefinite => 2,
        ReType::Demonstrative => 3,
        ReType::Pronoun => 4,
    }
}

fn function_slot(f: GramFunction) -> usize {
    match f {
        GramFunction::Subject => 0,
        GramFunction::Object => 1,
        GramFunction::Oblique => 2,
        GramFunction::Other => 3,
        GramFunction::Unknown => 4,
    }
}

impl SalienceParams {
    pub fn type_boost(&self, t: ReType) -> f64 {
        self.type_boost[type_slot(t)]
    }

    pub fn set_type_boost(&mut self, t: ReType, v: f64) {
        self.type_boost[type_slot(t)] = v;
    }

    pub fn function_boost(&self, f: GramFunction) -> f64 {
        self.function_boost[function_slot(f)]
    }

    pub fn set_function_boost(&mut self, f: GramFunction, v: f64) {
        self.function_boost[function_slot(f)] = v;
    }

    /// Boost applied when an RE creates or joins an MR.
    pub fn boost_for(&self, re_type: ReType, function: GramFunction) -> f64 {
        self.type_boost(re_type) + self.function_boost(function)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.initial_activation.is_finite() || self.initial_activation < 0.0 {
            return Err(Error::Config(format!(
                "initial_activation {} must be a finite non-negative value",
                self.initial_activation
            )));
        }
        if !self.sentence_decay.is_finite()
            || self.sentence_decay <= 0.0
            || self.sentence_decay > 1.0
        {
            return Err(Error::Config(format!(
                "sentence_decay {} must lie in (0,1]",
                self.sentence_decay
            )));
        }
        for v in self.type_boost.iter().chain(self.function_boost.iter()) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Config(format!(
                    "boost {v} must be a finite non-negative value"
                )));
            }
        }
        Ok(())
    }

    /// Names accepted by the tuner and the config layer, in canonical order.
    pub fn parameter_names() -> Vec<String> {
        let mut names = vec![
            "initial_activation".to_string(),
            "sentence_decay".to_string(),
        ];
        for t in [
            ReType::Proper,
            ReType::Definite,
            ReType::Indefinite,
            ReType::Demonstrative,
            ReType::Pronoun,
        ] {
            names.push(format!("type_boost.{}", t.code()));
        }
        for f in [
            GramFunction::Subject,
            GramFunction::Object,
            GramFunction::Oblique,
            GramFunction::Other,
            GramFunction::Unknown,
        ] {
            names.push(format!("function_boost.{}", f.code()));
        }
        names
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.slot(name).map(|(table, slot)| match table {
            Table::Scalar(v) => v,
            Table::Type => self.type_boost[slot],
            Table::Function => self.function_boost[slot],
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self.slot(name)? {
            (Table::Scalar(_), _) => {
                if name == "initial_activation" {
                    self.initial_activation = value;
                } else {
                    self.sentence_decay = value;
                }
            }
            (Table::Type, slot) => self.type_boost[slot] = value,
            (Table::Function, slot) => self.function_boost[slot] = value,
        }
        self.validate()
    }

    /// Valid range for a named parameter.
    pub fn domain(name: &str) -> Result<(f64, f64)> {
        if name == "sentence_decay" {
            Ok((f64::MIN_POSITIVE, 1.0))
        } else if name == "initial_activation"
            || name.starts_with("type_boost.")
            || name.starts_with("function_boost.")
        {
            Ok((0.0, f64::INFINITY))
        } else {
            Err(Error::Config(format!("unknown parameter `{name}`")))
        }
    }

    fn slot(&self, name: &str) -> Result<(Table, usize)> {
        match name {
            "initial_activation" => return Ok((Table::Scalar(self.initial_activation), 0)),
            "sentence_decay" => return Ok((Table::Scalar(self.sentence_decay), 0)),
            _ => {}
        }
        if let Some(code) = name.strip_prefix("type_boost.") {
            let t = match code {
                "proper" => ReType::Proper,
                "definite" => ReType::Definite,
                "indefinite" => ReType::Indefinite,
                "demonstrative" => ReType::Demonstrative,
                "pronoun" => ReType::Pronoun,
                _ => return Err(Error::Config(format!("unknown parameter `{name}`"))),
            };
            return Ok((Table::Type, type_slot(t)));
        }
        if let Some(code) = name.strip_prefix("function_boost.") {
            let f = match code {
                "subj" => GramFunction::Subject,
                "obj" => GramFunction::Object,
                "obl" => GramFunction::Oblique,
                "other" => GramFunction::Other,
                "u" => GramFunction::Unknown,
                _ => return Err(Error::Config(format!("unknown parameter `{name}`"))),
            };
            return Ok((Table::Function, function_slot(f)));
        }
        Err(Error::Config(format!("unknown parameter `{name}`")))
    }
}

enum Table {
    Scalar(f64),
    Type,
    Function,
}

/// Full configuration of a resolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolverConfig {
    pub heuristic: Heuristic,
    pub quota: usize,
    pub salience: SalienceParams,
    /// When set, indefinite REs always open a new MR.
    pub indefinite_creates_new: bool,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig {
            heuristic: Heuristic::AnyCompatible,
            quota: 20,
            salience: SalienceParams::default(),
            indefinite_creates_new: true,
        }
    }
}

impl ResolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quota < 1 {
            return Err(Error::Config("quota must be at least 1".to_string()));
        }
        self.heuristic.validate()?;
        self.salience.validate()
    }
}

/// One step of a resolution run. Activations are snapshots taken right after
/// the event applied.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Create {
        re: ReId,
        mr: MrId,
        activation: f64,
    },
    Attach {
        re: ReId,
        mr: MrId,
        activation: f64,
    },
    Archive {
        mr: MrId,
        activation: f64,
    },
    Fuse {
        sources: (MrId, MrId),
        mr: MrId,
        activation: f64,
    },
    Partition {
        collective: MrId,
        members: Vec<MrId>,
        activation: f64,
    },
    Group {
        sources: (MrId, MrId),
        mr: MrId,
        activation: f64,
    },
}

impl TraceEvent {
    pub fn mr(&self) -> MrId {
        match self {
            TraceEvent::Create { mr, .. }
            | TraceEvent::Attach { mr, .. }
            | TraceEvent::Archive { mr, .. }
            | TraceEvent::Fuse { mr, .. }
            | TraceEvent::Group { mr, .. } => *mr,
            TraceEvent::Partition { collective, .. } => *collective,
        }
    }
}
