mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hrc_core::gen::{table_model, Encoding};
use hrc_core::graph::{parse_graph, AndOrGraph, Item, ParsedGraph, Status};
use hrc_core::hier::{HierError, HierModel, Phase};
use hrc_core::task::{Query, TaskModel};

fn table(legs: usize) -> HierModel {
    let m = table_model(legs, Encoding::Hierarchical).unwrap();
    HierModel::from_designs(&m.root, &m.graphs).unwrap()
}

fn designs(texts: &[&str]) -> BTreeMap<String, ParsedGraph> {
    texts
        .iter()
        .map(|t| {
            let g = parse_graph(t).unwrap();
            (g.spec.id.clone(), g)
        })
        .collect()
}

const LOWER: &str = "GRAPH low\nNODE a WEIGHT 0 STATE Ready(?x)\nNODE b WEIGHT 0 STATE Done(?x)\nARC w WEIGHT 3 CHILDREN a PARENT b ACTIONS -\n";

#[test]
fn instances_follow_uses() {
    let h = table(3);
    let ids: Vec<&str> = h.instances().iter().map(|i| i.id.as_str()).collect();
    assert_eq!(ids, ["table", "table/fix_1", "table/fix_2", "table/fix_3"]);
    assert_eq!(h.instance(2).bindings.to_string(), "?x=T,?y=L2");
    assert!(h.instances()[1..].iter().all(|i| i.phase == Phase::Dormant));
    assert_eq!(h.lower_graph("table", "fix_2"), Some("leg"));
    assert_eq!(h.upper_hyperarcs("leg").len(), 3);
    assert_eq!(h.depth("leg"), Some(1));
}

#[test]
fn hier_weight_tracks_the_cheapest_lower_path() {
    let mut h = table(2);
    // hB costs 1; the other ways cost 2 or more.
    assert_eq!(h.hier_weight(0, "fix_1").unwrap(), 1.0);
    assert_eq!(h.instance(1).initial_weight, 1.0);
    let i = h.instance_by_id("table/fix_1").unwrap();
    let hb = h.instance(i).graph.arc_ix("hB").unwrap();
    h.block(i, Item::Arc(hb));
    h.online_phase();
    assert_eq!(h.hier_weight(0, "fix_1").unwrap(), 2.0);
    let fix_1 = h.instance(0).graph.arc_ix("fix_1").unwrap();
    assert_eq!(h.instance(0).graph.arc(fix_1).weight, 2.0);
    assert!(matches!(h.hier_weight(0, "place_top"), Err(HierError::NoTransition(_))));
}

#[test]
fn missing_maproot_is_a_mapping_violation() {
    let upper = "GRAPH up\nNODE s WEIGHT 0 STATE Ready(K)\nNODE t WEIGHT 0 STATE Done(K)\nARC h WEIGHT 1 CHILDREN s PARENT t ACTIONS -\nTRANSITION ARC up.h LOWER low\nMAPLEAF s -> a\n";
    let err = HierModel::from_designs("up", &designs(&[upper, LOWER])).unwrap_err();
    match err {
        HierError::MappingViolation { message, .. } => assert!(message.contains("MAPROOT"), "{message}"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn unmapped_upper_child_is_a_mapping_violation() {
    let upper = "GRAPH up\nNODE s WEIGHT 0 STATE Ready(K)\nNODE r WEIGHT 0 STATE Ready(J)\nNODE t WEIGHT 0 STATE Done(K)\nARC h WEIGHT 1 CHILDREN s,r PARENT t ACTIONS -\nTRANSITION ARC up.h LOWER low\nMAPLEAF s -> a\nMAPROOT t -> b\n";
    let err = HierModel::from_designs("up", &designs(&[upper, LOWER])).unwrap_err();
    assert!(matches!(err, HierError::MappingViolation { .. }), "{err}");
}

#[test]
fn inequivalent_states_are_a_mapping_violation() {
    let upper = "GRAPH up\nNODE s WEIGHT 0 STATE Broken(K)\nNODE t WEIGHT 0 STATE Done(K)\nARC h WEIGHT 1 CHILDREN s PARENT t ACTIONS -\nTRANSITION ARC up.h LOWER low\nMAPLEAF s -> a\nMAPROOT t -> b\n";
    let err = HierModel::from_designs("up", &designs(&[upper, LOWER])).unwrap_err();
    assert!(matches!(err, HierError::MappingViolation { .. }), "{err}");
}

#[test]
fn graphs_refining_each_other_are_rejected() {
    let a = "GRAPH ga\nNODE s WEIGHT 0 STATE Ready(?x)\nNODE t WEIGHT 0 STATE Done(?x)\nARC h WEIGHT 1 CHILDREN s PARENT t ACTIONS -\nTRANSITION ARC ga.h LOWER gb\nMAPLEAF s -> s\nMAPROOT t -> t\n";
    let b = "GRAPH gb\nNODE s WEIGHT 0 STATE Ready(?x)\nNODE t WEIGHT 0 STATE Done(?x)\nARC h WEIGHT 1 CHILDREN s PARENT t ACTIONS -\nTRANSITION ARC gb.h LOWER ga\nMAPLEAF s -> s\nMAPROOT t -> t\n";
    let err = HierModel::from_designs("ga", &designs(&[a, b])).unwrap_err();
    assert_eq!(err, HierError::CycleAcrossLayers(vec!["ga".into(), "gb".into(), "ga".into()]));
}

#[test]
fn missing_lower_design_is_reported() {
    let upper = "GRAPH up\nNODE s WEIGHT 0 STATE Ready(K)\nNODE t WEIGHT 0 STATE Done(K)\nARC h WEIGHT 1 CHILDREN s PARENT t ACTIONS -\nTRANSITION ARC up.h LOWER nowhere\nMAPLEAF s -> a\nMAPROOT t -> b\n";
    let err = HierModel::from_designs("up", &designs(&[upper])).unwrap_err();
    assert_eq!(err, HierError::MissingGraph("nowhere".into()));
}

#[test]
fn lower_graph_files_load_from_the_root_directory() {
    let h = HierModel::load(&common::fixture("table4/table.andor")).unwrap();
    assert_eq!(h.stats().graphs, 2);
    assert_eq!(h.instances().len(), 5);
}

#[test]
fn flattened_table_has_the_single_layer_path_count() {
    let h = table(3);
    let flat = AndOrGraph::from_spec(&h.flatten()).unwrap();
    // four ways per leg, legs in a fixed order
    assert_eq!(flat.cooperation_paths().len(), 64);
    assert_eq!(flat.min_path_cost(), h.instance(0).graph.min_path_cost());
}

/// Drives the hierarchy with random completions and failures, mirroring
/// every completion onto its flattened graph. Each hierarchical suggestion
/// must be offered by the flat graph at the same cost.
fn flatten_oracle(legs: usize, seed: u64) -> Result<(), TestCaseError> {
    let mut h = table(legs);
    let mut flat = AndOrGraph::from_spec(&h.flatten()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut met, mut solved) = (Vec::new(), Vec::new());
    for _ in 0..500 {
        let q = h.query();
        let fs = match flat.online_phase(&std::mem::take(&mut met), &std::mem::take(&mut solved)) {
            Status::Suggestions(s) => s,
            Status::Solved => {
                prop_assert_eq!(q, Query::Solved);
                return Ok(());
            }
            Status::Failed => Vec::new(),
        };
        let Query::Suggestions(hs) = q else {
            prop_assert!(!matches!(q, Query::Solved), "hierarchy solved before the flat graph");
            return Ok(());
        };
        let flat_cost: BTreeMap<&str, f64> = fs.iter().map(|s| (s.id.as_str(), s.cost)).collect();
        for c in &hs {
            let id = h.flat_id(c.row.instance, c.row.item);
            match (c.row.item, flat_cost.get(id.as_str())) {
                (Item::Arc(_), Some(&cost)) => prop_assert_eq!(c.cost, cost, "{} / {}", c.label, id),
                (Item::Arc(_), None) => prop_assert!(false, "{} not suggested flat", id),
                (Item::Node(_), _) => {}
            }
        }
        let c = &hs[rng.gen_range(0..hs.len())];
        let id = h.flat_id(c.row.instance, c.row.item);
        match c.row.item {
            Item::Node(_) => {
                let n = flat.node_ix(&id).unwrap();
                if !flat.node(n).met {
                    met.push(n);
                }
                h.complete(c.row);
            }
            Item::Arc(_) if rng.gen_bool(0.15) => {
                flat.block(flat.item(&id).unwrap());
                h.block(c.row.instance, c.row.item);
            }
            Item::Arc(_) => {
                let a = flat.arc_ix(&id).unwrap();
                for k in 0..h.actions(c.row).len() {
                    h.action_done(c.row, k);
                    flat.record_action_done(a, k);
                }
                solved.push(a);
                h.complete(c.row);
            }
        }
    }
    prop_assert!(false, "no end after 500 steps");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hierarchy_agrees_with_its_flattening(legs in 1usize..=4, seed in any::<u64>()) {
        flatten_oracle(legs, seed)?;
    }

    #[test]
    fn layers_stay_coherent(legs in 1usize..=5, seed in any::<u64>()) {
        let mut h = table(legs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let q = h.query();
            let v = h.coherence_violations();
            prop_assert!(v.is_empty(), "{:?}", v);
            let Query::Suggestions(s) = q else { break };
            let c = &s[rng.gen_range(0..s.len())];
            if matches!(c.row.item, Item::Arc(_)) && rng.gen_bool(0.2) {
                h.block(c.row.instance, c.row.item);
            } else {
                for k in 0..h.actions(c.row).len() {
                    h.action_done(c.row, k);
                }
                h.complete(c.row);
            }
        }
    }
}
