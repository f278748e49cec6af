//! Semantic compatibility knowledge: synonym classes, hyperonym edges,
//! collective nouns and optional lemma-level gender defaults.
//!
//! File format (UTF-8, line-oriented, `#` comments):
//!
//! ```text
//! SYN l1,l2,...            # one synonym class
//! HYP child parent         # hyperonym edge
//! COL collective member count|u
//! GEN lemma m|f|n
//! ```

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::Gender;
use crate::error::{Error, Result};

/// Immutable semantic knowledge shared by resolution runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    /// lemma -> synonym class id; lemmas outside any class are their own
    /// representative.
    class_of: BTreeMap<String, usize>,
    classes: Vec<BTreeSet<String>>,
    /// Hyperonym edges lifted to class representatives.
    parents: BTreeMap<Rep, BTreeSet<Rep>>,
    collectives: BTreeMap<String, (String, Option<u32>)>,
    genders: BTreeMap<String, Gender>,
}

/// Class representative: either a synonym class or a lone lemma.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Rep {
    Class(usize),
    Lemma(String),
}

impl Lexicon {
    fn rep(&self, lemma: &str) -> Rep {
        match self.class_of.get(lemma) {
            Some(&c) => Rep::Class(c),
            None => Rep::Lemma(lemma.to_string()),
        }
    }

    /// True iff the lemmas are equal, synonyms, or one is a (transitive)
    /// hyperonym of the other. Reflexive and symmetric.
    pub fn compatible(&self, lemma_a: &str, lemma_b: &str) -> bool {
        let a = self.rep(lemma_a);
        let b = self.rep(lemma_b);
        a == b || self.reaches(&a, &b) || self.reaches(&b, &a)
    }

    fn reaches(&self, from: &Rep, to: &Rep) -> bool {
        let mut stack = vec![from.clone()];
        let mut seen = BTreeSet::new();
        while let Some(node) = stack.pop() {
            if let Some(parents) = self.parents.get(&node) {
                for p in parents {
                    if p == to {
                        return true;
                    }
                    if seen.insert(p.clone()) {
                        stack.push(p.clone());
                    }
                }
            }
        }
        false
    }

    /// The collective entry for a lemma: member lemma and default count
    /// (`None` when the count is unknown).
    pub fn collective(&self, lemma: &str) -> Option<(&str, Option<u32>)> {
        self.collectives
            .get(lemma)
            .map(|(member, count)| (member.as_str(), *count))
    }

    pub fn default_gender(&self, lemma: &str) -> Option<Gender> {
        self.genders.get(lemma).copied()
    }

    pub fn synonym_classes(&self) -> &[BTreeSet<String>] {
        &self.classes
    }
}

/// Loads a lexicon, validating class disjointness and hyperonym acyclicity.
pub fn load_lexicon(input: &str) -> Result<Lexicon> {
    let mut lex = Lexicon::default();
    let mut edges: Vec<(String, String, usize)> = Vec::new();

    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (tag, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match tag {
            "SYN" => {
                let members: BTreeSet<String> = rest
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
                if members.len() < 2 {
                    return Err(Error::parse(lineno, "SYN needs at least two lemmas"));
                }
                let class_id = lex.classes.len();
                for lemma in &members {
                    if lex.class_of.insert(lemma.clone(), class_id).is_some() {
                        return Err(Error::Validation(format!(
                            "lemma {lemma} appears in two synonym classes (line {lineno})"
                        )));
                    }
                }
                lex.classes.push(members);
            }
            "HYP" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(Error::parse(lineno, "HYP expects `child parent`"));
                }
                edges.push((parts[0].to_string(), parts[1].to_string(), lineno));
            }
            "COL" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::parse(lineno, "COL expects `collective member count|u`"));
                }
                let count = if parts[2] == "u" {
                    None
                } else {
                    let n: u32 = parts[2]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "invalid collective count"))?;
                    if n == 0 {
                        return Err(Error::parse(lineno, "collective count must be positive"));
                    }
                    Some(n)
                };
                lex.collectives
                    .insert(parts[0].to_string(), (parts[1].to_string(), count));
            }
            "GEN" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(Error::parse(lineno, "GEN expects `lemma m|f|n`"));
                }
                let gender = match parts[1] {
                    "m" => Gender::Masculine,
                    "f" => Gender::Feminine,
                    "n" => Gender::Neuter,
                    other => {
                        return Err(Error::parse(lineno, format!("unknown gender `{other}`")))
                    }
                };
                lex.genders.insert(parts[0].to_string(), gender);
            }
            other => return Err(Error::parse(lineno, format!("unknown record `{other}`"))),
        }
    }

    // Lift edges to class representatives, then reject cycles.
    for (child, parent, lineno) in edges {
        let c = lex.rep(&child);
        let p = lex.rep(&parent);
        if c == p {
            return Err(Error::Validation(format!(
                "{child} cannot be its own hyperonym (line {lineno})"
            )));
        }
        lex.parents.entry(c).or_default().insert(p);
    }
    check_acyclic(&lex)?;
    Ok(lex)
}

fn check_acyclic(lex: &Lexicon) -> Result<()> {
    // Iterative DFS with tri-state marking over the lifted graph.
    let mut state: BTreeMap<&Rep, u8> = BTreeMap::new(); // 1 = on stack, 2 = done
    for start in lex.parents.keys() {
        if state.contains_key(start) {
            continue;
        }
        let mut stack = vec![(start, false)];
        while let Some((node, children_done)) = stack.pop() {
            if children_done {
                state.insert(node, 2);
                continue;
            }
            match state.get(node) {
                Some(1) => {
                    return Err(Error::Validation(
                        "cycle in hyperonym edges".to_string(),
                    ));
                }
                Some(2) => continue,
                _ => {}
            }
            state.insert(node, 1);
            stack.push((node, true));
            if let Some(parents) = lex.parents.get(node) {
                for p in parents {
                    match state.get(p) {
                        Some(1) => {
                            return Err(Error::Validation(
                                "cycle in hyperonym edges".to_string(),
                            ))
                        }
                        Some(2) => {}
                        _ => stack.push((p, false)),
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn empty_input_loads_empty_lexicon() {
        let lex = load_lexicon("").unwrap();
        assert!(lex.synonym_classes().is_empty());
        assert!(lex.collective("team").is_none());
    }

    #[test]
    fn loads_classes_and_edges() {
        let lex = load_lexicon("SYN car,automobile\nHYP car vehicle\n").unwrap();
        assert_eq!(lex.synonym_classes().len(), 1);
        assert!(lex.compatible("car", "automobile"));
        assert!(lex.compatible("car", "vehicle"));
        // Synonymy factors through the class.
        assert!(lex.compatible("automobile", "vehicle"));
    }

    #[test]
    fn rejects_cycle() {
        assert!(matches!(
            load_lexicon("HYP a b\nHYP b a\n"),
            Err(Error::Validation(msg)) if msg.contains("cycle")
        ));
    }

    #[test]
    fn rejects_self_hyperonym() {
        assert!(load_lexicon("HYP a a\n").is_err());
        // Also through a synonym class.
        assert!(load_lexicon("SYN a,b\nHYP a b\n").is_err());
    }

    #[test]
    fn rejects_lemma_in_two_classes() {
        assert!(matches!(
            load_lexicon("SYN a,b\nSYN b,c\n"),
            Err(Error::Validation(msg)) if msg.contains("two synonym classes")
        ));
    }

    #[test]
    fn identity_is_compatible() {
        let lex = load_lexicon("").unwrap();
        assert!(lex.compatible("woman", "woman"));
    }

    #[test]
    fn hyperonymy_is_symmetric_for_the_test() {
        let lex = load_lexicon("HYP car vehicle\n").unwrap();
        assert!(lex.compatible("car", "vehicle"));
        assert!(lex.compatible("vehicle", "car"));
    }

    #[test]
    fn transitive_hyperonymy() {
        let lex = load_lexicon("HYP poodle dog\nHYP dog animal\n").unwrap();
        assert!(lex.compatible("poodle", "animal"));
    }

    #[test]
    fn unrelated_lemmas_incompatible() {
        let lex = load_lexicon("HYP car vehicle\n").unwrap();
        assert!(!lex.compatible("car", "dog"));
    }

    #[test]
    fn collectives_lookup() {
        let lex = load_lexicon("COL team player 11\nCOL couple person 2\nCOL crowd person u\n")
            .unwrap();
        assert_eq!(lex.collective("team"), Some(("player", Some(11))));
        assert_eq!(lex.collective("couple"), Some(("person", Some(2))));
        assert_eq!(lex.collective("crowd"), Some(("person", None)));
        assert_eq!(lex.collective("dog"), None);
    }

    #[test]
    fn gender_defaults() {
        let lex = load_lexicon("GEN player m\nGEN voiture f\n").unwrap();
        assert_eq!(lex.default_gender("player"), Some(Gender::Masculine));
        assert_eq!(lex.default_gender("voiture"), Some(Gender::Feminine));
        assert_eq!(lex.default_gender("x"), None);
    }

    /// Builds a random valid lexicon over the pool l0..l11: a random partition
    /// into synonym classes plus forward-only hyperonym edges (acyclic by
    /// construction).
    fn random_lexicon(rng: &mut StdRng) -> (Lexicon, Vec<String>) {
        let pool: Vec<String> = (0..12).map(|i| format!("l{i}")).collect();
        let mut text = String::new();
        let mut i = 0;
        let mut groups: Vec<Vec<&str>> = Vec::new();
        while i < pool.len() {
            let size = 1 + rng.gen_range(0..3usize);
            let group: Vec<&str> = pool[i..(i + size).min(pool.len())]
                .iter()
                .map(String::as_str)
                .collect();
            i += size;
            groups.push(group);
        }
        for g in &groups {
            if g.len() >= 2 && rng.gen_bool(0.7) {
                text.push_str(&format!("SYN {}\n", g.join(",")));
            }
        }
        for gi in 0..groups.len() {
            for gj in gi + 1..groups.len() {
                if rng.gen_bool(0.3) {
                    text.push_str(&format!("HYP {} {}\n", groups[gi][0], groups[gj][0]));
                }
            }
        }
        (load_lexicon(&text).unwrap(), pool)
    }

    #[test]
    fn compatibility_reflexive_and_symmetric_randomized() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let (lex, pool) = random_lexicon(&mut rng);
            for _ in 0..20 {
                let a = &pool[rng.gen_range(0..pool.len())];
                let b = &pool[rng.gen_range(0..pool.len())];
                assert!(lex.compatible(a, a));
                assert_eq!(lex.compatible(a, b), lex.compatible(b, a));
            }
        }
    }

    #[test]
    fn adding_edge_never_removes_compatibility() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let pool: Vec<String> = (0..8).map(|i| format!("l{i}")).collect();
            let mut lines: Vec<String> = Vec::new();
            // Forward-only edges keep every prefix acyclic.
            for a in 0..pool.len() {
                for b in a + 1..pool.len() {
                    if rng.gen_bool(0.25) {
                        lines.push(format!("HYP l{a} l{b}"));
                    }
                }
            }
            if lines.is_empty() {
                continue;
            }
            let smaller = load_lexicon(&lines[..lines.len() - 1].join("\n")).unwrap();
            let larger = load_lexicon(&lines.join("\n")).unwrap();
            for a in &pool {
                for b in &pool {
                    if smaller.compatible(a, b) {
                        assert!(larger.compatible(a, b), "edge addition broke {a}~{b}");
                    }
                }
            }
        }
    }
}
