//! Random arm occupancy states and a brute-force check of arm selection.

use docent_core::agent::{ActionCall, ActionOrigin, ActionRequest, Activity};
use docent_core::dispatch::build_forest;
use docent_core::profile::{
    mentor1_forest, mentor1_registry, resolve_pointing, ExhibitTarget, LEFT_ARM, RIGHT_ARM,
};
use docent_core::{ParamValue, Priority};
use proptest::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub stopped: bool,
    pub load: Option<Priority>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointingCase {
    pub right: ArmState,
    pub left: ArmState,
    pub request: Priority,
    pub target: [f64; 3],
}

fn priority_strategy() -> impl Strategy<Value = Priority> {
    prop_oneof![
        Just(Priority::Background),
        Just(Priority::Default),
        (1u8..=6).prop_map(Priority::Command),
    ]
}

fn arm_strategy() -> impl Strategy<Value = ArmState> {
    (prop::bool::weighted(0.1), prop::option::weighted(0.7, priority_strategy()))
        .prop_map(|(stopped, load)| ArmState { stopped, load })
}

pub fn pointing_case_strategy() -> impl Strategy<Value = PointingCase> {
    (
        arm_strategy(),
        arm_strategy(),
        (1u8..=6).prop_map(Priority::Command),
        (0.5f64..3.0, -2.0f64..2.0, 0.0f64..2.0),
    )
        .prop_map(|(right, left, request, (x, y, z))| PointingCase {
            right,
            left,
            request,
            target: [x, y, z],
        })
}

/// Checks one state; describes the violation if any.
pub fn check_pointing(case: &PointingCase) -> Result<(), String> {
    let registry = mentor1_registry();
    let mut forest = build_forest(&mentor1_forest(), &registry).map_err(|e| e.to_string())?;
    for (name, arm) in [(RIGHT_ARM, case.right), (LEFT_ARM, case.left)] {
        let idx = forest.lookup(name).map_err(|e| e.to_string())?;
        if let Some(load) = arm.load {
            let request = ActionRequest {
                call: ActionCall {
                    action_type: "anim".into(),
                    params: Vec::new(),
                    base_priority: 3,
                    duration: Some(2.0),
                },
                override_priority: Some(load),
                from_parent: true,
                origin: ActionOrigin::Command,
            };
            forest.handle_action_at(idx, request, 0.0);
        }
        if arm.stopped {
            let idx = forest.lookup(name).map_err(|e| e.to_string())?;
            forest.set_activity_at(idx, Activity::Stopped, 0.0);
        }
    }
    let target = ExhibitTarget {
        exhibit: "exhibit".into(),
        position: case.target,
    };
    let got = resolve_pointing(&forest, &registry, &target, case.request);

    // Independent expectation: among active arms, the least loaded one; on a
    // tie the one on the target's side.
    let effective = |arm: ArmState| if arm.stopped { None } else { Some(arm.load) };
    let candidates: Vec<(&str, Option<Priority>)> = [(RIGHT_ARM, case.right), (LEFT_ARM, case.left)]
        .into_iter()
        .filter_map(|(name, arm)| effective(arm).map(|load| (name, load)))
        .collect();
    let lightest = candidates.iter().map(|(_, load)| *load).min();
    let best: Vec<&str> = candidates
        .iter()
        .filter(|(_, load)| Some(*load) == lightest)
        .map(|(name, _)| *name)
        .collect();
    let expected = match best.as_slice() {
        [] => None,
        [one] => Some(*one),
        _ => Some(if case.target[1] > 0.0 { LEFT_ARM } else { RIGHT_ARM }),
    }
    .filter(|name| {
        let load = if *name == RIGHT_ARM { case.right.load } else { case.left.load };
        load.is_none_or(|p| p < case.request)
    });

    match (got, expected) {
        (Err(_), None) => Ok(()),
        (Ok(choice), Some(name)) => {
            let chosen = forest.name(choice.limb);
            if chosen != name {
                return Err(format!("chose {chosen}, expected {name} in {case:?}"));
            }
            let node = forest.agent(choice.limb);
            if node.current_priority().is_some_and(|p| p >= case.request) {
                return Err(format!("chosen arm holds priority >= request in {case:?}"));
            }
            let mirrored = chosen == LEFT_ARM;
            let variant = choice.call.params.get(2).and_then(ParamValue::as_identifier);
            let limb_param = choice.call.params.first().and_then(ParamValue::as_identifier);
            if choice.mirrored != mirrored
                || variant != Some(if mirrored { "mirrored" } else { "canonical" })
                || limb_param != Some(chosen)
            {
                return Err(format!("wrong parameterization {:?} for {chosen}", choice.call.params));
            }
            Ok(())
        }
        (got, expected) => Err(format!("got {got:?}, expected {expected:?} in {case:?}")),
    }
}
