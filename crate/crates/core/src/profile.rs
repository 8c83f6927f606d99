//! The MENTOR-1 tour-guide robot: its agents, actions, timing model and
//! coordination policies.
//!
//! Forest:
//!
//! ```text
//! android ─┬─ carriage
//!          └─ head_and_arms ─┬─ head
//!                            └─ both_arms ─┬─ right_arm
//!                                          └─ left_arm
//! emotion ─┬─ brows
//!          └─ eyes
//! ```

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::agent::{
    ActionCall, ActionSpec, Activity, AgentDecl, AgentIdx, Durations, Forest,
};
use crate::dispatch::ForestConfig;
use crate::priority::Priority;
use crate::registry::{
    ActionDefinition, DurationClass, ParamKind, ParamSpec, ParamValue, Registry, ResourceId,
};
use crate::sim::{AnomalyClass, Expansion, RobotModel};

pub const ANDROID: &str = "android";
pub const CARRIAGE: &str = "carriage";
pub const HEAD_AND_ARMS: &str = "head_and_arms";
pub const HEAD: &str = "head";
pub const BOTH_ARMS: &str = "both_arms";
pub const RIGHT_ARM: &str = "right_arm";
pub const LEFT_ARM: &str = "left_arm";
pub const EMOTION: &str = "emotion";
pub const BROWS: &str = "brows";
pub const EYES: &str = "eyes";

/// Right-handed pointing is the canonical form; the left arm mirrors it.
pub const CANONICAL_ARM: &str = RIGHT_ARM;

pub const LIMBS: [&str; 5] = [HEAD_AND_ARMS, BOTH_ARMS, RIGHT_ARM, LEFT_ARM, HEAD];
pub const EXPRESSIONS: [&str; 6] = ["neutral", "joy", "angry", "question", "surprise", "sad"];
pub const POSES: [&str; 5] = ["neutral", "proud", "welcome", "thinking", "arms_open"];
pub const ANIMATIONS: [&str; 8] = [
    "show_space",
    "stretch_both_ways",
    "nodding",
    "wave",
    "shrug",
    "point_forward",
    "head_shake",
    "bow",
];
pub const BROW_POSITIONS: [&str; 4] = ["neutral", "raised", "frowned", "skeptical"];

pub const DELAY_THRESHOLD: f64 = 0.75;
pub const ANIM_SECONDS_PER_REPEAT: f64 = 2.0;
pub const ROTATION_DEG_PER_SECOND: f64 = 45.0;

fn resources(names: &[&str]) -> BTreeSet<ResourceId> {
    names.iter().filter_map(|n| ResourceId::new(n)).collect()
}

#[allow(clippy::too_many_arguments)]
fn define(
    action_type: &str,
    param_schema: Vec<ParamSpec>,
    nominal_duration: f64,
    base_priority: u8,
    owner_agent: &str,
    res: &[&str],
    description: &str,
    internal: bool,
) -> ActionDefinition {
    ActionDefinition {
        action_type: action_type.into(),
        param_schema,
        duration_class: if nominal_duration > 0.0 {
            DurationClass::Prolonged
        } else {
            DurationClass::Instantaneous
        },
        nominal_duration,
        base_priority,
        owner_agent: owner_agent.into(),
        resources: resources(res),
        description: description.into(),
        internal,
    }
}

fn limb_param() -> ParamSpec {
    ParamSpec::required("limb", ParamKind::Identifier).with_choices(LIMBS)
}

pub fn mentor1_registry() -> Registry {
    let arms = ["right_arm_joints", "left_arm_joints"];
    let all_limbs = ["right_arm_joints", "left_arm_joints", "head_joints"];
    let defs = vec![
        define(
            "facial",
            vec![ParamSpec::required("expression", ParamKind::Identifier).with_choices(EXPRESSIONS)],
            0.0,
            2,
            EMOTION,
            &["face_display"],
            "Set emotional expression of the face",
            false,
        ),
        define(
            "brows",
            vec![ParamSpec::required("position", ParamKind::Identifier).with_choices(BROW_POSITIONS)],
            0.0,
            2,
            BROWS,
            &["brows"],
            "Set eyebrows position",
            false,
        ),
        define(
            "eyes",
            vec![ParamSpec::required("tint", ParamKind::Identifier).with_choices(EXPRESSIONS)],
            0.0,
            2,
            EYES,
            &["eye_leds"],
            "Set emotional tint of the eyes",
            false,
        ),
        define(
            "pose",
            vec![
                limb_param(),
                ParamSpec::required("pose", ParamKind::Identifier).with_choices(POSES),
            ],
            1.0,
            3,
            BOTH_ARMS,
            &all_limbs,
            "Set joint positions of a limb to a named pose",
            false,
        ),
        define(
            "anim",
            vec![
                limb_param(),
                ParamSpec::required("name", ParamKind::Identifier).with_choices(ANIMATIONS),
                ParamSpec::optional("repeat", ParamKind::Integer, "1"),
            ],
            ANIM_SECONDS_PER_REPEAT,
            3,
            BOTH_ARMS,
            &all_limbs,
            "Perform a named animation with a limb, optionally repeated",
            false,
        ),
        define(
            "gaze",
            vec![ParamSpec::required("target", ParamKind::Point3d)],
            0.8,
            3,
            HEAD,
            &["head_joints", "eyes"],
            "Establish gaze contact with a 3D point",
            false,
        ),
        define(
            "rotate",
            vec![ParamSpec::required("target", ParamKind::Point3d)],
            1.0,
            4,
            CARRIAGE,
            &["carriage_motor"],
            "Rotate the torso towards a 3D point",
            false,
        ),
        define(
            "point",
            vec![
                ParamSpec::required("limb", ParamKind::Identifier).with_choices([RIGHT_ARM, LEFT_ARM]),
                ParamSpec::required("target", ParamKind::Point3d),
                ParamSpec::optional("variant", ParamKind::Identifier, "canonical")
                    .with_choices(["canonical", "mirrored"]),
            ],
            1.5,
            3,
            RIGHT_ARM,
            &arms,
            "Point at a 3D point with one arm",
            false,
        ),
        define(
            "interact",
            vec![ParamSpec::required("exhibit", ParamKind::Identifier)],
            2.0,
            5,
            ANDROID,
            &["carriage_motor", "head_joints", "right_arm_joints", "left_arm_joints"],
            "Interact with an exhibit: turn to it, look at it and point at it",
            false,
        ),
        define("neutral_pose", vec![], 1.0, 1, BOTH_ARMS, &all_limbs, "Return limbs to the neutral pose", true),
        define("track_face", vec![], 0.8, 1, HEAD, &["head_joints", "eyes"], "Make eye contact with a listener", true),
        define("face_group", vec![], 1.0, 1, CARRIAGE, &["carriage_motor"], "Turn towards the center of the audience", true),
        define("neutral_expression", vec![], 0.0, 1, EMOTION, &["face_display"], "Set a neutral facial expression", true),
        define("scan_faces", vec![], 2.4, 1, HEAD, &["head_joints", "eyes"], "Look for faces in the audience", true),
        define("look_around", vec![], 1.6, 1, HEAD, &["head_joints"], "Glance around the room", true),
    ];
    Registry::from_definitions(defs).expect("built-in registry is valid")
}

pub fn mentor1_forest() -> ForestConfig {
    let agent = |id: &str, parent: Option<&str>, default: Option<&str>, limb: bool| {
        let mut decl = AgentDecl::new(id, parent);
        decl.default_behavior = default.map(|a| ActionSpec::new(a, &[]));
        decl.limb = limb;
        decl
    };
    let mut head = agent(HEAD, Some(HEAD_AND_ARMS), Some("track_face"), true);
    head.background_actions = vec![ActionSpec::new("scan_faces", &[]), ActionSpec::new("look_around", &[])];
    ForestConfig {
        agents: vec![
            agent(ANDROID, None, None, false),
            agent(CARRIAGE, Some(ANDROID), Some("face_group"), false),
            agent(HEAD_AND_ARMS, Some(ANDROID), Some("neutral_pose"), true),
            head,
            agent(BOTH_ARMS, Some(HEAD_AND_ARMS), Some("neutral_pose"), true),
            agent(RIGHT_ARM, Some(BOTH_ARMS), Some("neutral_pose"), true),
            agent(LEFT_ARM, Some(BOTH_ARMS), Some("neutral_pose"), true),
            agent(EMOTION, None, Some("neutral_expression"), false),
            agent(BROWS, Some(EMOTION), None, false),
            agent(EYES, Some(EMOTION), None, false),
        ],
        routing: BTreeMap::new(),
    }
}

/// Listener and exhibit positions in the robot's starting frame: x forward,
/// y to the robot's left, z up, in meters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stage {
    #[cfg_attr(feature = "serde", serde(default))]
    pub listeners: Vec<[f64; 3]>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub exhibits: BTreeMap<String, [f64; 3]>,
}

impl Default for Stage {
    fn default() -> Self {
        Stage {
            listeners: vec![[2.0, -0.6, 1.6], [2.2, 0.0, 1.7], [1.9, 0.7, 1.5]],
            exhibits: [(String::from("exhibit"), [1.2, 1.0, 1.0])].into_iter().collect(),
        }
    }
}

impl Stage {
    pub fn is_valid(&self) -> bool {
        self.listeners
            .iter()
            .chain(self.exhibits.values())
            .all(|p| p.iter().all(|c| c.is_finite()))
    }

    pub fn target(&self, exhibit: &str) -> Option<ExhibitTarget> {
        self.exhibits.get(exhibit).map(|&position| ExhibitTarget {
            exhibit: exhibit.into(),
            position,
        })
    }

    pub fn listener_centroid(&self) -> Option<[f64; 3]> {
        if self.listeners.is_empty() {
            return None;
        }
        let n = self.listeners.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.listeners {
            for (acc, v) in c.iter_mut().zip(p) {
                *acc += v / n;
            }
        }
        Some(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhibitTarget {
    pub exhibit: String,
    pub position: [f64; 3],
}

/// Symbolic joint state of a limb, for traces and inspection only.
#[derive(Debug, Clone, PartialEq)]
pub struct LimbState {
    pub limb: String,
    pub joints: Vec<f64>,
    pub busy: bool,
}

fn arm_joints(pose: &str) -> [f64; 4] {
    match pose {
        "proud" => [0.3, 0.9, 0.0, 1.2],
        "welcome" => [-0.6, 0.4, 0.2, 0.5],
        "thinking" => [-1.1, 0.1, 0.4, 1.9],
        "arms_open" => [-0.4, 1.2, 0.0, 0.2],
        _ => [0.0; 4],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayDecision {
    ArbitrateNow,
    /// Queue the request and resubmit it once the current action ends.
    DelayUntilComplete,
    /// The current action is already due; finish it and submit right away.
    CompleteThenResubmit,
}

/// Protects nearly finished prolonged actions from being cut short.
pub fn delay_policy(progress: f64) -> DelayDecision {
    if progress >= 1.0 {
        DelayDecision::CompleteThenResubmit
    } else if progress > DELAY_THRESHOLD {
        DelayDecision::DelayUntilComplete
    } else {
        DelayDecision::ArbitrateNow
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PointingError {
    #[error("no arm is free to point at priority {0}")]
    NoArmAvailable(Priority),
    #[error("forest has no `{0}` agent")]
    MissingArm(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointingChoice {
    pub limb: AgentIdx,
    pub mirrored: bool,
    pub call: ActionCall,
}

/// Picks the freer arm for a pointing gesture at `priority`.
///
/// An idle arm beats a busy one and a lower current priority beats a higher
/// one; on a tie the arm on the target's side wins. Points straight ahead
/// count as the canonical side.
pub fn resolve_pointing(
    forest: &Forest,
    registry: &Registry,
    target: &ExhibitTarget,
    priority: Priority,
) -> Result<PointingChoice, PointingError> {
    let right = forest.lookup(RIGHT_ARM).map_err(|_| PointingError::MissingArm(RIGHT_ARM))?;
    let left = forest.lookup(LEFT_ARM).map_err(|_| PointingError::MissingArm(LEFT_ARM))?;
    let load = |idx: AgentIdx| {
        let node = forest.agent(idx);
        (node.activity == Activity::Active).then(|| node.current_priority())
    };
    let target_left = target.position[1] > 0.0;
    let chosen = match (load(right), load(left)) {
        (None, None) => return Err(PointingError::NoArmAvailable(priority)),
        (Some(_), None) => right,
        (None, Some(_)) => left,
        (Some(r), Some(l)) if r < l => right,
        (Some(r), Some(l)) if l < r => left,
        _ if target_left => left,
        _ => right,
    };
    if load(chosen).flatten().is_some_and(|p| p >= priority) {
        return Err(PointingError::NoArmAvailable(priority));
    }
    let mirrored = chosen == left;
    let limb = if mirrored { LEFT_ARM } else { RIGHT_ARM };
    let base_priority = registry.lookup("point").map_or(3, |d| d.base_priority);
    let duration = registry.lookup("point").map_or(1.5, |d| d.nominal_duration);
    Ok(PointingChoice {
        limb: chosen,
        mirrored,
        call: ActionCall {
            action_type: "point".into(),
            params: vec![
                ParamValue::Identifier(limb.into()),
                ParamValue::Point(target.position),
                ParamValue::Identifier(if mirrored { "mirrored" } else { "canonical" }.into()),
            ],
            base_priority,
            duration: Some(duration),
        },
    })
}

fn bearing(p: [f64; 3]) -> f64 {
    libm::atan2(p[1], p[0])
}

fn wrap_angle(a: f64) -> f64 {
    let tau = 2.0 * core::f64::consts::PI;
    let r = libm::fmod(a + core::f64::consts::PI, tau);
    (if r < 0.0 { r + tau } else { r }) - core::f64::consts::PI
}

/// Timing and coordination model of the MENTOR-1 robot.
#[derive(Debug, Clone)]
pub struct Mentor1Robot {
    registry: Registry,
    stage: Stage,
    heading: f64,
    joints: BTreeMap<String, Vec<f64>>,
    pub anim_seconds_per_repeat: f64,
    pub rotation_deg_per_second: f64,
}

impl Mentor1Robot {
    pub fn new(registry: Registry, stage: Stage) -> Self {
        let joints = [(RIGHT_ARM, 4), (LEFT_ARM, 4), (HEAD, 2)]
            .into_iter()
            .map(|(limb, n)| (String::from(limb), vec![0.0; n]))
            .collect();
        Mentor1Robot {
            registry,
            stage,
            heading: 0.0,
            joints,
            anim_seconds_per_repeat: ANIM_SECONDS_PER_REPEAT,
            rotation_deg_per_second: ROTATION_DEG_PER_SECOND,
        }
    }

    pub fn stage(&self) -> &Stage {
        &self.stage
    }

    /// Carriage heading in radians, counter-clockwise from the start.
    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn limb_states(&self, forest: &Forest) -> Vec<LimbState> {
        self.joints
            .iter()
            .map(|(limb, joints)| LimbState {
                limb: limb.clone(),
                joints: joints.clone(),
                busy: forest
                    .lookup(limb)
                    .is_ok_and(|idx| forest.agent(idx).current.is_some()),
            })
            .collect()
    }

    fn rotation_target(&self, action_type: &str, params: &[ParamValue]) -> Option<[f64; 3]> {
        match action_type {
            "rotate" => params.first().and_then(ParamValue::as_point),
            "face_group" => self.stage.listener_centroid(),
            _ => None,
        }
    }

    fn set_arm_pose(&mut self, limb: &str, pose: &str) {
        let arms: &[&str] = match limb {
            HEAD_AND_ARMS | BOTH_ARMS => &[RIGHT_ARM, LEFT_ARM],
            RIGHT_ARM => &[RIGHT_ARM],
            LEFT_ARM => &[LEFT_ARM],
            _ => &[],
        };
        for arm in arms {
            let mut joints = arm_joints(pose);
            if *arm == LEFT_ARM {
                joints[0] = -joints[0];
            }
            self.joints.insert(String::from(*arm), joints.to_vec());
        }
    }
}

impl Durations for Mentor1Robot {
    fn duration(&mut self, _agent: &str, action_type: &str, params: &[ParamValue]) -> Option<f64> {
        match action_type {
            "interact" => None,
            "anim" => {
                let repeat = params.get(2).and_then(ParamValue::as_integer).unwrap_or(1).max(1);
                Some(self.anim_seconds_per_repeat * repeat as f64)
            }
            "rotate" | "face_group" => {
                let delta = self
                    .rotation_target(action_type, params)
                    .map_or(0.0, |p| wrap_angle(bearing(p) - self.heading));
                Some(libm::fabs(delta).to_degrees() / self.rotation_deg_per_second)
            }
            _ => Some(self.registry.lookup(action_type).map_or(0.0, |d| d.nominal_duration)),
        }
    }
}

impl RobotModel for Mentor1Robot {
    fn on_execute(&mut self, agent: &str, call: &ActionCall) {
        if let Some(target) = self.rotation_target(&call.action_type, &call.params) {
            self.heading = bearing(target);
        }
        match call.action_type.as_str() {
            "pose" => {
                let limb = call.params.first().and_then(ParamValue::as_identifier).unwrap_or(agent);
                let pose = call.params.get(1).and_then(ParamValue::as_identifier).unwrap_or("neutral");
                let limb = String::from(limb);
                self.set_arm_pose(&limb, pose);
            }
            "neutral_pose" => self.set_arm_pose(agent, "neutral"),
            _ => {}
        }
    }

    fn expand(&mut self, forest: &Forest, _agent: AgentIdx, call: &ActionCall, priority: Priority) -> Expansion {
        let mut expansion = Expansion::default();
        if call.action_type != "interact" {
            return expansion;
        }
        let exhibit = call.params.first().and_then(ParamValue::as_identifier).unwrap_or("");
        let Some(target) = self.stage.target(exhibit) else {
            expansion
                .warnings
                .push((AnomalyClass::Error, format!("unknown exhibit `{exhibit}`")));
            return expansion;
        };
        let aim = |action_type: &str, model: &mut Self| {
            let params = vec![ParamValue::Point(target.position)];
            let base_priority = model.registry.lookup(action_type).map_or(3, |d| d.base_priority);
            ActionCall {
                action_type: action_type.into(),
                duration: model.duration("", action_type, &params),
                params,
                base_priority,
            }
        };
        for (agent, action_type) in [(CARRIAGE, "rotate"), (HEAD, "gaze")] {
            match forest.lookup(agent) {
                Ok(idx) => expansion.parts.push((idx, aim(action_type, self))),
                Err(_) => expansion
                    .warnings
                    .push((AnomalyClass::Notice, format!("no `{agent}` agent to {action_type}"))),
            }
        }
        match resolve_pointing(forest, &self.registry, &target, priority) {
            Ok(choice) => expansion.parts.push((choice.limb, choice.call)),
            Err(e) => expansion.warnings.push((AnomalyClass::Notice, format!("{e}"))),
        }
        expansion
    }
}

/// A hand-written scenario used when nothing better is available.
pub fn basic_scenario(title: &str) -> String {
    format!(
        "<facial:joy> Hello, and welcome! <anim:right_arm;wave;1> I am your guide today. \
         <pose:both_arms;welcome> Here you can see {title}. \
         <facial:question> Have a close look and think about what makes it special. \
         <anim:head;nodding;1> <facial:joy> Thank you for listening, \
         and feel free to ask me anything."
    )
}
