use std::collections::BTreeMap;

use proptest::prelude::*;
use trajlens_core::tasks::TaskKind;
use trajlens_prompt::*;

fn body() -> impl Strategy<Value = String> {
    // no section headers, no braces, no surrounding whitespace
    "[A-Za-z0-9 .,:;!?'-]{1,60}(\n[A-Za-z0-9 .,:;!?'-]{1,60}){0,3}".prop_map(|s| s.trim().to_string())
}

proptest! {
    #[test]
    fn file_format_round_trips(task in body(), knowledge in body(), role in body(), version in 1u32..1000) {
        prop_assume!(!task.is_empty() && !knowledge.is_empty() && !role.is_empty());
        let p = TaskPrompt { task, knowledge, role, version, ..builtin(TaskKind::Tmi) };
        prop_assert_eq!(TaskPrompt::parse(&p.to_file_string()).unwrap(), p);
    }

    #[test]
    fn instantiation_only_touches_knowledge(city in "[A-Za-z ]{1,20}") {
        let p = builtin(TaskKind::Mp);
        let facts: BTreeMap<String, String> =
            [("city".to_string(), city.clone()), ("region_grid".to_string(), "grid".to_string())].into();
        let q = p.instantiate(&facts).unwrap();
        prop_assert!(q.knowledge.contains(&city));
        prop_assert_eq!((&q.role, &q.task, &q.format, &q.example), (&p.role, &p.task, &p.format, &p.example));
        prop_assert!(q.is_bound());
    }
}

#[test]
fn saved_prompt_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ad.prompt");
    let p = builtin(TaskKind::Ad);
    p.save(&path).unwrap();
    assert_eq!(TaskPrompt::load(&path).unwrap(), p);
    assert!(TaskPrompt::load(&dir.path().join("missing.prompt")).is_err());
}

#[test]
fn worked_examples_parse_under_their_grammar() {
    for t in TaskKind::ALL {
        builtin(t).self_check().unwrap();
    }
}
