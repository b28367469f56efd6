use hrc_core::gen::{kitchen_model, leg_graph, table_model, Encoding, GenError, ModelFiles};
use hrc_core::graph::{parse_graph, AndOrGraph};
use hrc_core::hier::HierModel;

mod common;

fn counts(legs: usize, enc: Encoding) -> (usize, usize) {
    table_model(legs, enc).unwrap().designed_counts()
}

fn builds(m: &ModelFiles) {
    for g in m.graphs.values() {
        assert!(g.spec.validate().is_empty(), "{}: {:?}", g.spec.id, g.spec.validate());
    }
    if m.is_hierarchical() {
        HierModel::from_designs(&m.root, &m.graphs).unwrap();
    } else {
        AndOrGraph::from_spec(&m.graphs[&m.root].spec).unwrap();
    }
}

#[test]
fn leg_graph_matches_fixture() {
    let parsed = parse_graph(&common::read("leg1/leg.andor")).unwrap();
    let mut expected = parsed.spec;
    expected.lines.clear();
    assert_eq!(leg_graph(), expected);
}

#[test]
fn table_sizes() {
    assert_eq!(counts(9, Encoding::Hierarchical), (25, 16));
    assert_eq!(counts(9, Encoding::Fol), (30, 47));
    assert_eq!(counts(5, Encoding::Fol), (18, 27));
    assert_eq!(counts(5, Encoding::Standard), (119, 402));
}

#[test]
fn leg_limits() {
    assert!(matches!(table_model(6, Encoding::Standard), Err(GenError::Legs { .. })));
    assert!(table_model(0, Encoding::Fol).is_err());
    assert!(table_model(10, Encoding::Hierarchical).is_err());
}

#[test]
fn every_table_model_builds() {
    for enc in Encoding::ALL {
        for legs in 1..=enc.max_legs() {
            builds(&table_model(legs, enc).unwrap());
        }
    }
}

#[test]
fn kitchen_sizes() {
    let m = kitchen_model();
    assert_eq!(m.graphs.len(), 32);
    assert_eq!(m.designed_counts(), (508, 215));
    let h = HierModel::from_designs(&m.root, &m.graphs).unwrap();
    let s = h.stats();
    assert_eq!((s.graphs, s.layers), (32, 5));
    assert_eq!((s.designed_nodes, s.designed_arcs), (508, 215));
    assert_eq!((s.spawned_nodes, s.spawned_arcs), (1068, 483));
}
