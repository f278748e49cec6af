//! Acceptance suite. One test per criterion; the test name is the pass/fail
//! line, and each test also prints an `acceptance cNN ... PASS` marker.
//!
//! Run with: cargo test -p referent-cli --test acceptance

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use referent_core::corpus::{
    parse_document, Document, Gender, GramFunction, Number, Position, ReId, ReType, RefExpr,
};
use referent_core::lexicon::{load_lexicon, Lexicon};
use referent_core::resolver::{
    replay_trace, resolve_document, selection_pass, Heuristic, MrStore, ReIndex, ResolverConfig,
    SalienceParams,
};
use referent_core::scorer::{muc_score, to_partition, Partition};
use referent_core::tuner::{objective, tune_params, ParamRange, TuningSpec};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).expect("fixture exists")
}

fn referent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_referent"))
        .args(args)
        .output()
        .expect("binary runs")
}

// ---------------------------------------------------------------------------
// Brute-force scoring oracle: enumerate all coreference links (unordered
// pairs within a cell) and count graph components, instead of intersecting
// partition cells.
// ---------------------------------------------------------------------------

fn all_links(p: &Partition) -> Vec<(ReId, ReId)> {
    let mut links = Vec::new();
    for cell in p.cells() {
        let ids: Vec<&ReId> = cell.iter().collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                links.push((ids[i].clone(), ids[j].clone()));
            }
        }
    }
    links
}

fn component_count(cell: &BTreeSet<ReId>, links: &[(ReId, ReId)]) -> usize {
    let mut unvisited: BTreeSet<&ReId> = cell.iter().collect();
    let mut components = 0;
    while let Some(seed) = unvisited.iter().next().copied() {
        components += 1;
        let mut queue = vec![seed];
        unvisited.remove(seed);
        while let Some(node) = queue.pop() {
            for (a, b) in links {
                if !cell.contains(a) || !cell.contains(b) {
                    continue;
                }
                let next = if a == node {
                    b
                } else if b == node {
                    a
                } else {
                    continue;
                };
                if unvisited.remove(next) {
                    queue.push(next);
                }
            }
        }
    }
    components
}

/// Minimum-spanning-link score of `cells` against an explicit link list.
fn oracle_direction(cells: &[BTreeSet<ReId>], links: &[(ReId, ReId)]) -> f64 {
    let mut num = 0usize;
    let mut den = 0usize;
    for cell in cells {
        den += cell.len() - 1;
        num += cell.len() - component_count(cell, links);
    }
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn oracle_score(key: &Partition, response: &Partition) -> (f64, f64) {
    let recall = oracle_direction(key.cells(), &all_links(response));
    let precision = oracle_direction(response.cells(), &all_links(key));
    (recall, precision)
}

fn random_partition(rng: &mut StdRng, universe: &[ReId], allow_missing: bool) -> Partition {
    let mut cells: Vec<BTreeSet<ReId>> = Vec::new();
    for id in universe {
        if allow_missing && rng.gen_bool(0.1) {
            continue;
        }
        let slot = rng.gen_range(0..=cells.len());
        if slot == cells.len() {
            cells.push(BTreeSet::new());
        }
        cells[slot].insert(id.clone());
    }
    Partition::new(cells).expect("generated cells are disjoint and non-empty")
}

fn random_pair(rng: &mut StdRng) -> (Partition, Partition) {
    let n = rng.gen_range(1..=10);
    let universe: Vec<ReId> = (0..n).map(|i| ReId(format!("e{i}"))).collect();
    let key = random_partition(rng, &universe, false);
    let missing = rng.gen_bool(0.25);
    let response = random_partition(rng, &universe, missing);
    (key, response)
}

#[test]
fn c01_scorer_matches_link_enumeration_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1001);
    for round in 0..1000 {
        let (key, response) = random_pair(&mut rng);
        let report = muc_score(&key, &response);
        let (recall, precision) = oracle_score(&key, &response);
        assert_eq!(report.recall, recall, "round {round}: recall mismatch");
        assert_eq!(report.precision, precision, "round {round}: precision mismatch");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "oracle run took {elapsed:?}");
    eprintln!("acceptance c01 scorer-oracle-equivalence (1000 pairs, {elapsed:?}): PASS");
}

#[test]
fn c02_scorer_duality() {
    let mut rng = StdRng::seed_from_u64(1002);
    for round in 0..1000 {
        let (a, b) = random_pair(&mut rng);
        let forward = muc_score(&a, &b);
        let backward = muc_score(&b, &a);
        assert_eq!(forward.recall, backward.precision, "round {round}");
        assert_eq!(forward.precision, backward.recall, "round {round}");
    }
    eprintln!("acceptance c02 scorer-duality (1000 pairs): PASS");
}

#[test]
fn c03_hand_counted_scores() {
    let cell = |ids: &[&str]| -> BTreeSet<ReId> { ids.iter().map(|s| ReId::from(*s)).collect() };
    let whole = Partition::new(vec![cell(&["a", "b", "c", "d"])]).unwrap();
    let halves = Partition::new(vec![cell(&["a", "b"]), cell(&["c", "d"])]).unwrap();

    let split = muc_score(&whole, &halves);
    assert_eq!(split.recall, 2.0 / 3.0);
    assert_eq!(split.precision, 1.0);

    let merged = muc_score(&halves, &whole);
    assert_eq!(merged.recall, 1.0);
    assert_eq!(merged.precision, 2.0 / 3.0);
    eprintln!("acceptance c03 hand-counted-scores: PASS");
}

// ---------------------------------------------------------------------------
// Random (MR, RE, lexicon) instances for the heuristic laws.
// ---------------------------------------------------------------------------

fn random_lexicon(rng: &mut StdRng) -> Lexicon {
    let mut text = String::new();
    for a in 0..8 {
        for b in a + 1..8 {
            if rng.gen_bool(0.2) {
                text.push_str(&format!("HYP w{a} w{b}\n"));
            }
        }
    }
    load_lexicon(&text).expect("forward edges are acyclic")
}

fn random_re(rng: &mut StdRng, ordinal: usize, re_type: ReType) -> RefExpr {
    let genders = [
        Gender::Masculine,
        Gender::Feminine,
        Gender::Neuter,
        Gender::Unknown,
    ];
    let numbers = [Number::Singular, Number::Plural, Number::Unknown];
    let mut descriptors = BTreeSet::new();
    if rng.gen_bool(0.3) {
        descriptors.insert(format!("w{}", rng.gen_range(0..8)));
    }
    RefExpr {
        id: ReId(format!("r{ordinal}")),
        position: Position {
            paragraph: 0,
            sentence: 0,
            start_token: ordinal,
            end_token: ordinal,
            ordinal,
        },
        surface: format!("re {ordinal}"),
        head_lemma: format!("w{}", rng.gen_range(0..8)),
        gender: genders[rng.gen_range(0..genders.len())],
        number: numbers[rng.gen_range(0..numbers.len())],
        re_type,
        gram_function: GramFunction::Unknown,
        descriptors,
        unparsed: false,
    }
}

fn random_mr_instance(rng: &mut StdRng) -> (Document, MrStore, Lexicon) {
    let lex = random_lexicon(rng);
    let members = rng.gen_range(1..=6);
    let mut res: Vec<RefExpr> = (0..members)
        .map(|i| {
            let re_type = if i > 0 && rng.gen_bool(0.25) {
                ReType::Pronoun
            } else {
                [ReType::Proper, ReType::Definite, ReType::Demonstrative][rng.gen_range(0..3)]
            };
            random_re(rng, i, re_type)
        })
        .collect();
    res.push(random_re(rng, members, ReType::Definite));
    let doc = Document {
        doc_id: "instance".into(),
        word_count: res.len(),
        sentence_count: 1,
        paragraph_count: 1,
        res,
    };
    doc.validate().expect("generated documents are valid");
    let params = SalienceParams::default();
    let mut store = MrStore::new(64).unwrap();
    let id = store.create_mr(&doc.res[0], &params);
    for re in &doc.res[1..doc.res.len() - 1] {
        store.attach_re(id, re, &params).unwrap();
    }
    (doc, store, lex)
}

#[test]
fn c04_heuristic_laws() {
    let mut rng = StdRng::seed_from_u64(1004);
    let mut violations = 0;
    for round in 0..1000 {
        let (doc, store, lex) = random_mr_instance(&mut rng);
        let index = ReIndex::new(&doc);
        let mr = store.mrs().next().unwrap();
        let incoming = doc.res.last().unwrap();

        let all = selection_pass(&Heuristic::AllCompatible, &lex, mr, &index, incoming);
        let any = selection_pass(&Heuristic::AnyCompatible, &lex, mr, &index, incoming);
        for x in [10.0, 25.0, 50.0, 75.0, 90.0] {
            let ratio = selection_pass(
                &Heuristic::RatioCompatible { percent: x },
                &lex,
                mr,
                &index,
                incoming,
            );
            if (all && !ratio) || (ratio && !any) {
                violations += 1;
                eprintln!("round {round}: ordering violated at {x}%");
            }
        }
        let zero = selection_pass(
            &Heuristic::RatioCompatible { percent: 0.0 },
            &lex,
            mr,
            &index,
            incoming,
        );
        let hundred = selection_pass(
            &Heuristic::RatioCompatible { percent: 100.0 },
            &lex,
            mr,
            &index,
            incoming,
        );
        if zero != any || hundred != all {
            violations += 1;
            eprintln!("round {round}: endpoint mismatch");
        }
    }
    assert_eq!(violations, 0);
    eprintln!("acceptance c04 heuristic-laws (1000 instances, 0 violations): PASS");
}

#[test]
fn c05_oracle_corpus_reproduces_key() {
    let (doc, key) = parse_document(&fixture_text("sample01.txt")).unwrap();
    let lex = load_lexicon(&fixture_text("sample01.lex")).unwrap();
    let key_cells: BTreeSet<BTreeSet<ReId>> = key
        .cells(&doc)
        .into_iter()
        .map(|(_, ids)| ids.into_iter().collect())
        .collect();
    for quota in [3, 4, 20, 100] {
        let cfg = ResolverConfig {
            heuristic: Heuristic::AnyCompatible,
            quota,
            ..ResolverConfig::default()
        };
        let resolution = resolve_document(&doc, &cfg, &lex).unwrap();
        let response_cells: BTreeSet<BTreeSet<ReId>> = resolution
            .response
            .cells()
            .iter()
            .cloned()
            .collect();
        assert_eq!(response_cells, key_cells, "quota {quota}");
        let key_partition = to_partition(&key.cells(&doc)).unwrap();
        let report = muc_score(&key_partition, &resolution.response);
        assert_eq!(report.recall, 1.0, "quota {quota}");
        assert_eq!(report.precision, 1.0, "quota {quota}");
    }
    eprintln!("acceptance c05 oracle-corpus-exactness: PASS");
}

#[test]
fn c06_memory_starvation_direction() {
    let out = referent(&[
        "sweep-memory",
        "--corpus",
        fixture("memory30.txt").to_str().unwrap(),
        "--lexicon",
        fixture("tune1.lex").to_str().unwrap(),
        "--quotas",
        "2-60",
    ]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 59, "one row per quota in 2..=60");
    let recall_of = |quota: &str| -> f64 {
        rows.iter()
            .find(|r| r.starts_with(&format!("{quota},")))
            .unwrap_or_else(|| panic!("row for quota {quota}"))
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    let starved = recall_of("2");
    let ample = recall_of("60");
    assert!(
        ample >= starved,
        "recall at quota 60 ({ample}) must not trail quota 2 ({starved})"
    );
    eprintln!("acceptance c06 memory-starvation-direction (59 rows, {starved} <= {ample}): PASS");
}

#[test]
fn c07_cli_determinism() {
    let base = tempfile::tempdir().unwrap();
    let prep = base.path().join("prep");
    // A response file for the score command.
    let out = referent(&[
        "resolve",
        "--corpus",
        fixture("sample01.txt").to_str().unwrap(),
        "--lexicon",
        fixture("sample01.lex").to_str().unwrap(),
        "--out",
        prep.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let response = prep.join("response.key");

    let corpus = fixture("sample01.txt");
    let lexicon = fixture("sample01.lex");
    let memory = fixture("memory30.txt");
    let empty_lex = fixture("tune1.lex");
    let tune_corpus = fixture("tune1.txt");
    let tune_config = fixture("tune1.config");
    let tune_spec = fixture("tune1.spec");

    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "resolve",
            vec![
                "resolve".into(),
                "--corpus".into(),
                corpus.display().to_string(),
                "--lexicon".into(),
                lexicon.display().to_string(),
            ],
        ),
        (
            "score",
            vec![
                "score".into(),
                "--corpus".into(),
                corpus.display().to_string(),
                "--response".into(),
                response.display().to_string(),
            ],
        ),
        (
            "compare-heuristics",
            vec![
                "compare-heuristics".into(),
                "--corpus".into(),
                corpus.display().to_string(),
                "--lexicon".into(),
                lexicon.display().to_string(),
                "--h4".into(),
                "25".into(),
                "--h4".into(),
                "75".into(),
            ],
        ),
        (
            "sweep-memory",
            vec![
                "sweep-memory".into(),
                "--corpus".into(),
                memory.display().to_string(),
                "--lexicon".into(),
                empty_lex.display().to_string(),
                "--quotas".into(),
                "2-60".into(),
            ],
        ),
        (
            "stats",
            vec![
                "stats".into(),
                "--corpus".into(),
                corpus.display().to_string(),
            ],
        ),
        (
            "tune",
            vec![
                "tune".into(),
                "--corpus".into(),
                tune_corpus.display().to_string(),
                "--lexicon".into(),
                empty_lex.display().to_string(),
                "--config".into(),
                tune_config.display().to_string(),
                "--spec".into(),
                tune_spec.display().to_string(),
            ],
        ),
    ];

    for (name, args) in commands {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let dir = base.path().join(format!("{name}-{run}"));
            let mut full: Vec<String> = args.clone();
            full.push("--out".into());
            full.push(dir.display().to_string());
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            let out = referent(&refs);
            assert!(out.status.success(), "{name} run {run} failed");
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
                .unwrap()
                .map(|entry| {
                    let entry = entry.unwrap();
                    let data = std::fs::read(entry.path()).unwrap();
                    (entry.file_name().to_string_lossy().into_owned(), data)
                })
                .collect();
            files.sort();
            outputs.push((out.stdout, files));
        }
        assert_eq!(
            outputs[0].0, outputs[1].0,
            "{name}: stdout differs between runs"
        );
        assert_eq!(
            outputs[0].1.len(),
            outputs[1].1.len(),
            "{name}: file sets differ"
        );
        for ((name_a, bytes_a), (name_b, bytes_b)) in outputs[0].1.iter().zip(&outputs[1].1) {
            assert_eq!(name_a, name_b, "{name}: file names differ");
            assert_eq!(bytes_a, bytes_b, "{name}: {name_a} differs between runs");
        }
    }
    eprintln!("acceptance c07 cli-determinism (6 commands, byte-identical): PASS");
}

#[test]
fn c08_tuner_monotonicity_and_grid_optimum() {
    let (doc, key) = parse_document(&fixture_text("sample01.txt")).unwrap();
    let lex = load_lexicon(&fixture_text("sample01.lex")).unwrap();
    let pool = SalienceParams::parameter_names();
    let mut rng = StdRng::seed_from_u64(1008);

    for round in 0..100 {
        // Random starting point and a random subset of tunable parameters.
        let mut cfg = ResolverConfig::default();
        for _ in 0..rng.gen_range(0..3) {
            let name = &pool[rng.gen_range(0..pool.len())];
            let value = if name == "sentence_decay" {
                rng.gen_range(1..=10) as f64 / 10.0
            } else {
                rng.gen_range(0..10) as f64 * 10.0
            };
            cfg.salience.set(name, value).unwrap();
        }
        let count = rng.gen_range(1..=3);
        let mut parameters = Vec::new();
        for _ in 0..count {
            let name = pool[rng.gen_range(0..pool.len())].clone();
            if parameters.iter().any(|p: &ParamRange| p.name == name) {
                continue;
            }
            let range = if name == "sentence_decay" {
                ParamRange {
                    name,
                    lower: 0.1,
                    upper: 1.0,
                    step: [0.1, 0.2, 0.3][rng.gen_range(0..3)],
                }
            } else {
                ParamRange {
                    name,
                    lower: 0.0,
                    upper: [50.0, 100.0, 200.0][rng.gen_range(0..3)],
                    step: [5.0, 10.0, 25.0][rng.gen_range(0..3)],
                }
            };
            parameters.push(range);
        }
        let spec = TuningSpec {
            parameters: parameters.clone(),
            max_sweeps: rng.gen_range(0..=3),
        };
        let (tuned, trace) = tune_params(&doc, &key, &cfg, &lex, &spec).unwrap();

        let mut last = trace.initial_objective;
        for step in &trace.steps {
            assert!(
                step.objective >= last,
                "round {round}: accepted objective decreased"
            );
            last = step.objective;
        }
        assert!(trace.final_objective >= trace.initial_objective, "round {round}");
        for range in &parameters {
            let value = tuned.get(&range.name).unwrap();
            let started = cfg.salience.get(&range.name).unwrap();
            assert!(
                (range.lower..=range.upper).contains(&value) || value == started,
                "round {round}: {} tuned outside its bounds",
                range.name
            );
        }
    }

    // The one-parameter fixture must land exactly on the exhaustive-grid
    // optimum.
    let (doc, key) = parse_document(&fixture_text("tune1.txt")).unwrap();
    let lex = load_lexicon(&fixture_text("tune1.lex")).unwrap();
    let mut cfg = ResolverConfig::default();
    cfg.salience.set("function_boost.obj", 0.0).unwrap();
    let spec = TuningSpec::parse(&fixture_text("tune1.spec")).unwrap();
    let range = &spec.parameters[0];

    let mut grid_best: Option<(f64, f64)> = None;
    let mut value = range.lower;
    while value <= range.upper {
        let mut c = cfg.clone();
        c.salience.set(&range.name, value).unwrap();
        let score = objective(&doc, &key, &c, &lex).unwrap();
        if grid_best.map_or(true, |(_, best)| score > best) {
            grid_best = Some((value, score));
        }
        value += range.step;
    }
    let (grid_value, grid_score) = grid_best.unwrap();
    let (tuned, trace) = tune_params(&doc, &key, &cfg, &lex, &spec).unwrap();
    assert_eq!(tuned.get(&range.name).unwrap(), grid_value);
    assert_eq!(trace.final_objective, grid_score);
    eprintln!(
        "acceptance c08 tuner-monotonicity (100 runs) and grid optimum {grid_value}: PASS"
    );
}

#[test]
fn c09_trace_replay() {
    let cases: Vec<(&str, Lexicon)> = vec![
        ("sample01.txt", load_lexicon(&fixture_text("sample01.lex")).unwrap()),
        ("memory30.txt", load_lexicon("").unwrap()),
        ("tune1.txt", load_lexicon("").unwrap()),
    ];
    let mut checked = 0;
    for (name, lex) in &cases {
        let (doc, _) = parse_document(&fixture_text(name)).unwrap();
        for heuristic in [
            Heuristic::FirstCompatible,
            Heuristic::AllCompatible,
            Heuristic::AnyCompatible,
            Heuristic::RatioCompatible { percent: 50.0 },
        ] {
            for quota in [1, 3, 20, 60] {
                let cfg = ResolverConfig {
                    heuristic,
                    quota,
                    ..ResolverConfig::default()
                };
                let resolution = resolve_document(&doc, &cfg, lex).unwrap();
                let replayed = replay_trace(&doc, &cfg, &resolution.trace).unwrap();
                assert_eq!(
                    replayed, resolution.store,
                    "{name} {heuristic} quota {quota}"
                );
                checked += 1;
            }
        }
    }
    eprintln!("acceptance c09 trace-replay ({checked} runs reconstructed exactly): PASS");
}

#[test]
fn c10_scale() {
    // 3,500 REs over 500 entities, 7 mentions each, recurring in blocks so
    // both the attach and the create/archive paths stay busy.
    let entities = 500usize;
    let mentions = 7usize;
    let block = 10usize;
    let genders = [Gender::Masculine, Gender::Feminine, Gender::Neuter];
    let mut res = Vec::new();
    let mut ordinal = 0usize;
    for block_start in (0..entities).step_by(block) {
        for round in 0..mentions {
            for e in block_start..block_start + block {
                let sentence = ordinal / 2;
                res.push(RefExpr {
                    id: ReId(format!("r{ordinal}")),
                    position: Position {
                        paragraph: 0,
                        sentence,
                        start_token: (ordinal % 2) * 4,
                        end_token: (ordinal % 2) * 4 + 1,
                        ordinal,
                    },
                    surface: format!("the topic{e}"),
                    head_lemma: format!("topic{e:03}"),
                    gender: genders[e % 3],
                    number: Number::Singular,
                    re_type: if round == 0 {
                        ReType::Definite
                    } else {
                        [ReType::Definite, ReType::Demonstrative, ReType::Proper][round % 3]
                    },
                    gram_function: if e % 2 == 0 {
                        GramFunction::Subject
                    } else {
                        GramFunction::Object
                    },
                    descriptors: BTreeSet::new(),
                    unparsed: false,
                });
                ordinal += 1;
            }
        }
    }
    assert_eq!(ordinal, entities * mentions);
    let doc = Document {
        doc_id: "scale".into(),
        word_count: ordinal * 3,
        sentence_count: ordinal / 2 + 1,
        paragraph_count: 1,
        res,
    };
    doc.validate().unwrap();
    let lex = load_lexicon("").unwrap();

    let start = Instant::now();
    let resolution = resolve_document(&doc, &ResolverConfig::default(), &lex).unwrap();
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "resolution took {elapsed:?}, budget is 5 s"
    );
    assert_eq!(resolution.response.universe().len(), entities * mentions);

    let peak = peak_rss_kb();
    if let Some(kb) = peak {
        assert!(kb < 100 * 1024, "peak RSS {kb} kB exceeds 100 MB");
    }
    eprintln!(
        "acceptance c10 scale (3500 REs in {elapsed:?}, peak {} kB): PASS",
        peak.map_or("unknown".to_string(), |kb| kb.to_string())
    );
}

fn peak_rss_kb() -> Option<u64> {
    // ru_maxrss is the process peak resident set, in kilobytes on Linux.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    if unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut usage) } == 0 && usage.ru_maxrss > 0 {
        return Some(usage.ru_maxrss as u64);
    }
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line
            .strip_prefix("VmHWM:")
            .or_else(|| line.strip_prefix("VmRSS:"))
        {
            return rest.trim().trim_end_matches("kB").trim().parse().ok();
        }
    }
    None
}
