mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hrc_core::bench::{build, random_traversal};
use hrc_core::gen::{kitchen_model, table_model, Encoding, TABLE_ACTIONS, TABLE_AGENTS};
use hrc_core::graph::{parse_graph, write_graph, AndOrGraph, ParsedGraph};
use hrc_core::task::{parse_actions, parse_trace, write_actions, write_trace, Event, Query, TimedEvent};
use hrc_core::world::{parse_agents, parse_world, write_agents, write_world};

fn round_trip_graph(g: &ParsedGraph) {
    let text = write_graph(g);
    let back = parse_graph(&text).unwrap();
    let mut a = g.spec.clone();
    let mut b = back.spec;
    a.lines.clear();
    b.lines.clear();
    assert_eq!(a, b, "{text}");
    assert_eq!(g.transitions, back.transitions);
}

#[test]
fn generated_graphs_round_trip() {
    for enc in Encoding::ALL {
        for g in table_model(3, enc).unwrap().graphs.values() {
            round_trip_graph(g);
        }
    }
    kitchen_model().graphs.values().for_each(round_trip_graph);
}

#[test]
fn library_files_round_trip() {
    let lib = parse_actions(TABLE_ACTIONS).unwrap();
    assert_eq!(parse_actions(&write_actions(&lib)).unwrap(), lib);
    let agents = parse_agents(TABLE_AGENTS).unwrap();
    assert_eq!(parse_agents(&write_agents(&agents)).unwrap(), agents);
    let world = parse_world(&common::read("leg1/world.txt")).unwrap();
    assert_eq!(parse_world(&write_world(&world)).unwrap(), world);
    for t in ["leg1/override.trace", "table4/failure.trace"] {
        let events = parse_trace(&common::read(t)).unwrap();
        assert_eq!(parse_trace(&write_trace(&events)).unwrap(), events);
    }
}

fn event() -> impl Strategy<Value = Event> {
    let name = "[a-z][a-z_]{0,6}";
    prop_oneof![
        any::<bool>().prop_map(Event::Ack),
        (name, "[A-Z][0-9]?").prop_map(|(a, c)| Event::Human {
            action: a,
            bindings: format!("?y={c}").parse().unwrap(),
        }),
        name.prop_map(Event::Deact),
    ]
}

proptest! {
    #[test]
    fn traces_round_trip(events in prop::collection::vec((0u32..1000, event()), 0..20)) {
        let mut t = 0.0;
        let events: Vec<TimedEvent> = events
            .into_iter()
            .map(|(dt, event)| {
                t += f64::from(dt) / 8.0;
                TimedEvent { time: t, event }
            })
            .collect();
        prop_assert_eq!(parse_trace(&write_trace(&events)).unwrap(), events);
    }

    #[test]
    fn path_enumeration_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = common::random_graph(&mut rng, 10, 7);
        let g = AndOrGraph::from_spec(&spec).unwrap();
        let mut ours: Vec<Vec<String>> = g
            .cooperation_paths()
            .into_iter()
            .map(|p| p.hyperarcs.into_iter().collect())
            .collect();
        let mut theirs: Vec<Vec<String>> = common::brute_force_paths(&spec)
            .into_iter()
            .map(|(_, hs)| hs.into_iter().map(|h| spec.arcs[h].id.clone()).collect())
            .collect();
        ours.sort();
        theirs.sort();
        prop_assert_eq!(ours, theirs);
        round_trip_graph(&ParsedGraph { spec, transitions: Vec::new() });
    }

    #[test]
    fn random_traversal_is_seed_determined(legs in 1usize..=4, seed in any::<u64>(), enc in 0usize..3) {
        let files = table_model(legs, Encoding::ALL[enc]).unwrap();
        let run = || {
            let mut m = build(&files);
            random_traversal(&mut m, &mut ChaCha8Rng::seed_from_u64(seed))
        };
        let (end, trail) = run();
        prop_assert_eq!(end, Query::Solved);
        prop_assert_eq!(trail, run().1);
    }
}
