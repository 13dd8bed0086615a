use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::dataflow::is_isomorphic;
use crate::frontend::{StatementKind, StmtKind};
use crate::graph::serialize_pdg;

fn method(src: &str) -> Method {
    parse_source(src).unwrap()
}

fn pdg_of(m: &Method) -> crate::dataflow::Pdg {
    build_pdg(&lower_to_ir(m).unwrap()).unwrap()
}

fn all_variants() -> Vec<Method> {
    builtin_groups()
        .iter()
        .flat_map(|g| g.variants.iter().map(|v| method(v)))
        .collect()
}

#[test]
fn rename_example() {
    let m = method("def f(a) { x = a; }");
    let map = BTreeMap::from([("x".to_string(), "v0".to_string()), ("a".to_string(), "v1".to_string())]);
    let out = rename_with(&m, &map);
    assert_eq!(out.to_source(), "def f(v1) {\n    v0 = v1;\n}\n");
}

#[test]
fn rename_keeps_the_graph_up_to_names() {
    let mut rng = seeded_rng(3);
    for m in all_variants() {
        for _ in 0..5 {
            let map = random_rename_map(&m, &mut rng);
            let renamed = rename_with(&m, &map);
            let values: BTreeSet<&String> = map.values().collect();
            assert_eq!(values.len(), map.len(), "not a bijection");
            assert_eq!(serialize_pdg(&pdg_of(&renamed)), serialize_pdg(&pdg_of(&m).rename_vars(&map)));
        }
    }
}

#[test]
fn reorder_example() {
    let m = method("def f() { x = 1; y = 2; }");
    let out = transform(&m, TransformKind::Reorder, &mut seeded_rng(0)).unwrap();
    assert_eq!(out.to_source(), "def f() {\n    y = 2;\n    x = 1;\n}\n");
    assert!(is_isomorphic(&pdg_of(&m), &pdg_of(&out)));
}

#[test]
fn reorder_respects_dependences() {
    let mut rng = seeded_rng(0);
    for src in [
        "def f() { x = 1; y = x; }",
        "def f() { x = 1; x = 2; }",
        "def f(y) { x = y; y = 2; }",
        "def f(a) { a[0] = 1; a[1] = 2; }",
        "def f() { x = input(); y = input(); }",
        "def f() { call g(1); call h(2); }",
    ] {
        assert_eq!(
            transform(&method(src), TransformKind::Reorder, &mut rng),
            Err(DatagenError::NotApplicable(TransformKind::Reorder)),
            "{src}"
        );
    }
}

#[test]
fn reorder_keeps_graph_isomorphic() {
    let mut rng = seeded_rng(11);
    let mut applied = 0;
    for m in all_variants() {
        for _ in 0..3 {
            if let Ok(out) = transform(&m, TransformKind::Reorder, &mut rng) {
                assert_ne!(out, m);
                assert!(is_isomorphic(&pdg_of(&m), &pdg_of(&out)));
                applied += 1;
            }
        }
    }
    assert!(applied > 10, "only {applied} reorders applied");
}

fn def_use_multiset(m: &Method) -> Vec<(StatementKind, BTreeSet<String>, BTreeSet<String>)> {
    let mut v: Vec<_> = lower_to_ir(m)
        .unwrap()
        .statements
        .into_iter()
        .map(|s| (s.kind, s.defs, s.uses))
        .collect();
    v.sort();
    v
}

#[test]
fn loop_convert_preserves_defs_and_uses() {
    let m = method("def f(a, n) { s = 0; for (i = 0; i < n; i = i + 1) { s = s + a[i]; } return s; }");
    let out = transform(&m, TransformKind::LoopConvert, &mut seeded_rng(0)).unwrap();
    assert!(matches!(out.body[2].kind, StmtKind::While { .. }));
    assert!(!out.to_source().contains("for"));
    assert_eq!(def_use_multiset(&m), def_use_multiset(&out));
    assert!(is_isomorphic(&pdg_of(&m), &pdg_of(&out)));

    let mut rng = seeded_rng(1);
    for v in all_variants() {
        if let Ok(out) = transform(&v, TransformKind::LoopConvert, &mut rng) {
            assert_eq!(def_use_multiset(&v), def_use_multiset(&out), "{}", v.to_source());
        }
    }
}

#[test]
fn while_to_for_round_trip() {
    let src = "def f(n) {\n    i = 0;\n    while (i < n) {\n        call g(i);\n        i = i + 1;\n    }\n}\n";
    let m = method(src);
    let out = transform(&m, TransformKind::LoopConvert, &mut seeded_rng(0)).unwrap();
    assert!(matches!(out.body[0].kind, StmtKind::For { .. }));
    let back = transform(&out, TransformKind::LoopConvert, &mut seeded_rng(0)).unwrap();
    assert_eq!(back.to_source(), src);
}

#[test]
fn sites_can_be_missing() {
    let m = method("def f() { return 1; }");
    let mut rng = seeded_rng(0);
    for kind in [TransformKind::Reorder, TransformKind::LoopConvert, TransformKind::Reassociate] {
        assert_eq!(transform(&m, kind, &mut rng), Err(DatagenError::NotApplicable(kind)));
    }
    assert!(transform(&m, TransformKind::DeadCode, &mut rng).is_ok());
}

#[test]
fn dead_code_and_reassociate_leave_valid_programs() {
    let mut rng = seeded_rng(5);
    for m in all_variants() {
        let dead = transform(&m, TransformKind::DeadCode, &mut rng).unwrap();
        let p = pdg_of(&dead);
        assert!(p.len() == pdg_of(&m).len() + 1);
        let re = transform(&m, TransformKind::Reassociate, &mut rng).unwrap();
        assert_ne!(re, m);
        assert_eq!(pdg_of(&re).len(), pdg_of(&m).len());
    }
}

#[test]
fn reassociate_mirrors_comparisons() {
    let m = method("def f(a, b) { if (a < b) { return a; } return b; }");
    let out = transform(&m, TransformKind::Reassociate, &mut seeded_rng(0)).unwrap();
    assert!(out.to_source().contains("if (b > a)"));
    let m = method("def f(a, b) { return a - b; }");
    assert!(transform(&m, TransformKind::Reassociate, &mut seeded_rng(0)).is_err());
    let m = method("def f(a, b) { if (a > 0 && b > 0) { return 1; } return 0; }");
    for seed in 0..10 {
        let out = transform(&m, TransformKind::Reassociate, &mut seeded_rng(seed)).unwrap();
        let text = out.to_source();
        assert!(text.contains("0 < a && b > 0") || text.contains("a > 0 && 0 < b"), "{text}");
    }
}

fn two_groups() -> Vec<SeedGroup> {
    let g = builtin_groups();
    vec![
        SeedGroup {
            name: g[0].name.clone(),
            variants: vec![g[0].variants[0].clone()],
        },
        SeedGroup {
            name: g[2].name.clone(),
            variants: vec![g[2].variants[0].clone()],
        },
    ]
}

#[test]
fn minimal_dataset_is_balanced() {
    let pairs = generate_dataset(&two_groups(), 4, &mut seeded_rng(0)).unwrap();
    assert_eq!(pairs.len(), 4);
    assert_eq!(pairs.iter().filter(|p| p.label == 1).count(), 2);
    for p in &pairs {
        assert_eq!(p.label == 1, p.group_a == p.group_b);
        assert_eq!(p.label == 0, p.provenance == DISTINCT);
    }
}

#[test]
fn too_few_seeds() {
    let mut g = two_groups();
    assert_eq!(generate_dataset(&g[..1], 4, &mut seeded_rng(0)), Err(DatagenError::InsufficientSeeds));
    g[1].variants.clear();
    assert_eq!(generate_dataset(&g, 4, &mut seeded_rng(0)), Err(DatagenError::InsufficientSeeds));
    g[1].variants.push("def broken(".into());
    assert!(matches!(
        generate_dataset(&g, 4, &mut seeded_rng(0)),
        Err(DatagenError::InvalidSeed { index: 0, .. })
    ));
}

#[test]
fn generation_is_deterministic() {
    let a = generate_dataset(&builtin_groups(), 60, &mut seeded_rng(9)).unwrap();
    let b = generate_dataset(&builtin_groups(), 60, &mut seeded_rng(9)).unwrap();
    let c = generate_dataset(&builtin_groups(), 60, &mut seeded_rng(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn generated_programs_run_through_the_pipeline() {
    let pairs = generate_dataset(&builtin_groups(), 200, &mut seeded_rng(0)).unwrap();
    let clones = pairs.iter().filter(|p| p.label == 1).count();
    assert!((90..=110).contains(&clones));
    for p in &pairs {
        for src in [&p.source_a, &p.source_b] {
            let ir = compile(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
            build_pdg(&ir).unwrap();
        }
        if p.label == 1 {
            assert_eq!(p.group_a, p.group_b);
            if p.provenance != VARIANT {
                assert!(p.provenance.split('>').all(|k| k.parse::<TransformKind>().is_ok()), "{}", p.provenance);
            }
        } else {
            assert_ne!(p.group_a, p.group_b);
        }
    }
    let kinds: BTreeSet<&str> = pairs
        .iter()
        .filter(|p| p.label == 1 && p.provenance != VARIANT)
        .flat_map(|p| p.provenance.split('>'))
        .collect();
    assert_eq!(kinds.len(), TransformKind::ALL.len());
}

#[test]
fn groups_differ_in_shape() {
    // statement-kind histogram plus edge counts of each seed
    let stats = |src: &str| {
        let p = pdg_of(&method(src));
        let mut hist = BTreeMap::new();
        for n in &p.nodes {
            *hist.entry(n.kind).or_insert(0) += 1;
        }
        (hist, p.control_edges.len(), p.data_edges.len())
    };
    let groups = builtin_groups();
    assert!(groups.len() >= 6);
    for (i, g) in groups.iter().enumerate() {
        assert!(g.variants.len() >= 2);
        for h in &groups[i + 1..] {
            for a in &g.variants {
                for b in &h.variants {
                    assert_ne!(stats(a), stats(b), "{} vs {}", g.name, h.name);
                }
            }
        }
    }
}

#[test]
fn corpus_round_trip() {
    let corpus = builtin_corpus();
    assert_eq!(corpus.len(), 40);
    let counts = [SplitName::Train, SplitName::Val, SplitName::Test].map(|s| corpus.split(s).count());
    assert_eq!(counts, [28, 6, 6]);
    let dir = tempfile::tempdir().unwrap();
    corpus.write(dir.path()).unwrap();
    assert!(dir.path().join("pairs/0000/a.src").is_file());
    assert!(dir.path().join("pairs/0039/meta.json").is_file());
    let back = Corpus::read(dir.path()).unwrap();
    assert_eq!(back, corpus);
    let set = back.pair_set().unwrap();
    assert_eq!((set.train.len(), set.val.len(), set.test.len()), (28, 6, 6));
    assert!(set.graphs.len() < 80);
}

#[test]
fn corpus_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Corpus::read(dir.path()), Err(DatagenError::Io { .. })));
    builtin_corpus().write(dir.path()).unwrap();
    let meta = dir.path().join("pairs/0003/meta.json");
    std::fs::write(&meta, "{\"label\": 2, \"provenance\": \"x\", \"group_a\": \"a\", \"group_b\": \"b\"}").unwrap();
    assert!(matches!(Corpus::read(dir.path()), Err(DatagenError::Format { .. })));
    std::fs::write(&meta, "{\"label\": 1, \"provenance\": \"x\", \"group_a\": \"a\", \"group_b\": \"a\"}").unwrap();
    std::fs::write(dir.path().join("pairs/0003/a.src"), "def f( {").unwrap();
    let c = Corpus::read(dir.path()).unwrap();
    assert!(matches!(c.pair_set(), Err(DatagenError::InvalidPair { id, .. }) if id == "0003"));
    std::fs::write(dir.path().join("index.json"), "{\"pairs\": [{\"id\": \"../x\", \"split\": \"train\"}]}").unwrap();
    assert!(matches!(Corpus::read(dir.path()), Err(DatagenError::Format { .. })));
}

#[test]
fn seed_groups_from_directory() {
    let dir = tempfile::tempdir().unwrap();
    for g in builtin_groups().iter().take(3) {
        let gdir = dir.path().join(&g.name);
        std::fs::create_dir(&gdir).unwrap();
        for (i, v) in g.variants.iter().enumerate() {
            std::fs::write(gdir.join(format!("v{i}.src")), v).unwrap();
        }
        std::fs::write(gdir.join("notes.txt"), "ignored").unwrap();
    }
    let loaded = load_seed_groups(dir.path()).unwrap();
    let mut expected: Vec<SeedGroup> = builtin_groups().into_iter().take(3).collect();
    expected.sort_by(|a, b| a.name.cmp(&b.name));
    assert_eq!(loaded, expected);
}
