mod common;

use objscan::database::{retrieve_similar, Database, EntryKind, Subset};
use objscan::scanner::synth;

#[test]
fn every_model_has_one_full_entry_and_components() {
    let db = common::database();
    for m in synth::catalog() {
        let entries: Vec<_> = db.entries.iter().filter(|e| e.model_id == m.id).collect();
        assert_eq!(entries.iter().filter(|e| e.kind == EntryKind::Full).count(), 1, "{}", m.id);
        assert!(entries.iter().all(|e| !e.cloud.points.is_empty()), "{}", m.id);
        assert_eq!(db.label_name(entries[0].label), m.label);
    }
}

#[test]
fn full_scans_retrieve_their_own_model() {
    let db = common::database();
    for e in db.entries.iter().filter(|e| e.kind == EntryKind::Full) {
        let found = retrieve_similar(&e.cloud.points, db, 5, Subset::FullOnly).unwrap();
        let best = found.best().unwrap();
        assert_eq!(db.entry(best.entry).model_id, e.model_id);
        assert!(found.items.windows(2).all(|w| w[0].score >= w[1].score));
    }
}

#[test]
fn saved_database_answers_queries_identically() {
    let db = common::database();
    let mut bytes = Vec::new();
    db.save(&mut bytes).unwrap();
    let back = Database::load(bytes.as_slice()).unwrap();
    let probe = &db.entries[db.entries.len() / 2].cloud.points;
    assert_eq!(
        retrieve_similar(probe, db, 5, Subset::All).unwrap(),
        retrieve_similar(probe, &back, 5, Subset::All).unwrap()
    );
}

#[test]
fn truncated_database_is_rejected() {
    let mut bytes = Vec::new();
    common::database().save(&mut bytes).unwrap();
    bytes.truncate(bytes.len() / 3);
    assert!(Database::load(bytes.as_slice()).is_err());
}
