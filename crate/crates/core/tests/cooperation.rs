mod common;

use std::io::Cursor;

use common::replay_leg1;
use hrc_core::bundle::parse_bundle;
use hrc_core::fol::Literal;
use hrc_core::task::{
    parse_trace, Entry, Event, InteractiveSource, Outcome, RunOptions, TraceSource,
};

fn holds(world: &hrc_core::world::WorldState, lit: &str) -> bool {
    world.holds(&lit.parse::<Literal>().unwrap())
}

#[test]
fn robot_trace_uses_the_blue_path() {
    let (t, world) = replay_leg1("leg1/robot.trace");
    assert_eq!(t.outcome(), Some(Outcome::Solved));
    let dispatched: Vec<&str> = t.dispatches().map(|(_, a)| a).collect();
    assert_eq!(dispatched, ["approach(L,T)", "grasp(L)", "transport_tt(L,T)", "screw(L,T)"]);
    assert_eq!(t.switches().count(), 0);
    assert!(holds(&world, "Connected(L,T)"));
}

#[test]
fn human_override_terminates_the_robot() {
    let (t, world) = replay_leg1("leg1/override.trace");
    assert_eq!(t.outcome(), Some(Outcome::Solved));
    let term = t.entries.iter().position(|e| *e == Entry::TerminateRobot).unwrap();
    assert_eq!(t.entries[term + 1], Entry::GoToRest);
    assert_eq!(
        t.switches().collect::<Vec<_>>(),
        [(Some("leg::hB"), "leg::hR")]
    );
    assert!(t.contains(&Entry::Done {
        label: "leg::hR".into(),
        action: "pickup(L,T)".into(),
        by: "H".into()
    }));
    assert!(holds(&world, "Connected(L,T)"));
}

#[test]
fn robot_failures_fall_back_to_the_human() {
    let (t, _) = replay_leg1("leg1/failure.trace");
    assert_eq!(t.outcome(), Some(Outcome::Solved));
    let infeasible: Vec<&Entry> = t.entries.iter().filter(|e| matches!(e, Entry::RowInfeasible { .. })).collect();
    assert_eq!(
        infeasible,
        [
            &Entry::RowInfeasible { label: "leg::hB".into() },
            &Entry::RowInfeasible { label: "leg::h1".into() }
        ]
    );
    assert!(t.entries.iter().any(|e| matches!(e, Entry::Completed { label } if label == "leg::hR")));
}

#[test]
fn exhausted_trace_is_incomplete() {
    let b = parse_bundle(&common::fixture("leg1")).unwrap();
    let events = parse_trace("T=0 ACK ok\n").unwrap();
    let t = b.run(&mut TraceSource::new(events), &RunOptions::default()).unwrap();
    assert_eq!(t.outcome(), Some(Outcome::Incomplete));
}

#[test]
fn unexpected_events_are_stale() {
    let b = parse_bundle(&common::fixture("leg1")).unwrap();
    let mut events = parse_trace("T=0 DEACT nothing\nT=0 HUMAN ungrasp ?y=L\n").unwrap();
    events.extend(b.trace.clone().unwrap());
    let t = b.run(&mut TraceSource::new(events), &RunOptions::default()).unwrap();
    assert_eq!(t.entries.iter().filter(|e| **e == Entry::Stale).count(), 2);
    assert_eq!(t.outcome(), Some(Outcome::Solved));
}

#[test]
fn inconsistent_percept_pauses_until_resolved() {
    let b = parse_bundle(&common::fixture("leg1")).unwrap();
    let mut events = parse_trace("T=0 PERCEPT !Leg(L)\nT=0 ACK ok\nT=0 PERCEPT Leg(L)\n").unwrap();
    events.extend(b.trace.clone().unwrap());
    let t = b.run(&mut TraceSource::new(events), &RunOptions::default()).unwrap();
    let paused = t.entries.iter().position(|e| *e == Entry::Paused).unwrap();
    let resumed = t.entries.iter().position(|e| *e == Entry::Resumed).unwrap();
    assert!(paused < resumed);
    assert_eq!(t.entries[paused + 2], Entry::Stale, "ACK while paused");
    assert_eq!(t.outcome(), Some(Outcome::Solved));
}

#[test]
fn interactive_pass_equals_robot_replay() {
    let b = parse_bundle(&common::fixture("leg1")).unwrap();
    let replayed = b.run(&mut TraceSource::new(b.trace.clone().unwrap()), &RunOptions::default()).unwrap();
    let mut out = Vec::new();
    let mut src = InteractiveSource::new(Cursor::new("pass\n".repeat(4)), &mut out);
    let interactive = b.run(&mut src, &RunOptions::default()).unwrap();
    assert_eq!(interactive.to_string(), replayed.to_string());
    let shown = String::from_utf8(out).unwrap();
    assert!(shown.contains("robot R1 executes approach"), "{shown}");
    assert!(shown.contains("leg::hB cost=1"), "{shown}");
}

#[test]
fn interactive_human_action_switches_path() {
    let b = parse_bundle(&common::fixture("leg1")).unwrap();
    let input = "pickup ?y=L,?x=T\nscrew_h ?y=L,?x=T\n";
    let mut out = Vec::new();
    let t = b.run(&mut InteractiveSource::new(Cursor::new(input), &mut out), &RunOptions::default()).unwrap();
    assert!(t.contains(&Entry::TerminateRobot));
    assert!(t.contains(&Entry::Event(Event::Human {
        action: "pickup".into(),
        bindings: "?y=L,?x=T".parse().unwrap()
    })));
    assert_eq!(t.outcome(), Some(Outcome::Solved));
}
