//! Forest construction and request routing.
//!
//! The dispatcher never drives agents itself. It resolves which agent owns a
//! timeline event and hands the request to that agent's arbitration.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::agent::{
    ActionCall, ActionRequest, AgentDecl, AgentIdx, ArbitrationDecision, Cancellation, Forest,
    ForestError, ResolvedSpec,
};
use crate::registry::{validate_params, ParamValue, Registry, ValidationError};

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForestConfig {
    pub agents: Vec<AgentDecl>,
    /// action_type → agent id, taking precedence over registry owners.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "BTreeMap::is_empty")
    )]
    pub routing: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("routing for `{action_type}` targets unknown agent `{agent}`")]
    UnknownRoutingTarget { action_type: String, agent: String },
    #[error("action `{action_type}` is owned by unknown agent `{agent}`")]
    UnknownOwner { action_type: String, agent: String },
    #[error("agent `{agent}` uses unknown action `{action_type}`")]
    UnknownBehavior { agent: String, action_type: String },
    #[error("agent `{agent}` behavior `{action_type}`: {error}")]
    InvalidBehavior {
        agent: String,
        action_type: String,
        error: ValidationError,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DispatchError {
    #[error("no agent can perform `{0}`")]
    UnroutableAction(String),
}

/// Builds an idle forest with every default behavior scheduled for time zero.
pub fn build_forest(config: &ForestConfig, registry: &Registry) -> Result<Forest, ConfigError> {
    let forest = Forest::new(&config.agents, |decl, spec| {
        let definition =
            registry
                .lookup(&spec.action_type)
                .ok_or_else(|| ConfigError::UnknownBehavior {
                    agent: decl.id.clone(),
                    action_type: spec.action_type.clone(),
                })?;
        let params = validate_params(definition, &spec.params).map_err(|error| {
            ConfigError::InvalidBehavior {
                agent: decl.id.clone(),
                action_type: spec.action_type.clone(),
                error,
            }
        })?;
        Ok::<_, ConfigError>(ResolvedSpec {
            action_type: spec.action_type.clone(),
            params,
        })
    })?;
    check_routes(config, registry, &forest)?;
    Ok(forest)
}

fn check_routes(config: &ForestConfig, registry: &Registry, forest: &Forest) -> Result<(), ConfigError> {
    for (action_type, agent) in &config.routing {
        if forest.lookup(agent).is_err() {
            return Err(ConfigError::UnknownRoutingTarget {
                action_type: action_type.clone(),
                agent: agent.clone(),
            });
        }
    }
    for definition in registry.iter() {
        if config.routing.contains_key(&definition.action_type) {
            continue;
        }
        if forest.lookup(&definition.owner_agent).is_err() {
            return Err(ConfigError::UnknownOwner {
                action_type: definition.action_type.clone(),
                agent: definition.owner_agent.clone(),
            });
        }
    }
    Ok(())
}

/// Routing tables derived from a forest configuration and registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatcher {
    routes: BTreeMap<String, AgentIdx>,
    overrides: BTreeMap<String, AgentIdx>,
    limbs: BTreeMap<String, AgentIdx>,
}

impl Dispatcher {
    /// `forest` must have been built from the same configuration.
    pub fn new(config: &ForestConfig, registry: &Registry, forest: &Forest) -> Result<Self, ConfigError> {
        check_routes(config, registry, forest)?;
        let mut routes = BTreeMap::new();
        for definition in registry.iter() {
            if let Ok(idx) = forest.lookup(&definition.owner_agent) {
                routes.insert(definition.action_type.clone(), idx);
            }
        }
        let overrides = config
            .routing
            .iter()
            .map(|(action_type, agent)| (action_type.clone(), forest.lookup(agent).expect("checked above")))
            .collect();
        let limbs = config
            .agents
            .iter()
            .filter(|d| d.limb)
            .map(|d| (d.id.clone(), forest.lookup(&d.id).expect("declared agent")))
            .collect();
        Ok(Dispatcher {
            routes,
            overrides,
            limbs,
        })
    }

    pub fn limb_agents(&self) -> BTreeSet<&str> {
        self.limbs.keys().map(String::as_str).collect()
    }

    /// Resolves the agent for an action: explicit routing first, then a limb
    /// agent named by the first parameter, then the registry owner.
    pub fn route(&self, action_type: &str, params: &[ParamValue]) -> Result<AgentIdx, DispatchError> {
        if let Some(idx) = self.overrides.get(action_type) {
            return Ok(*idx);
        }
        let owner = self
            .routes
            .get(action_type)
            .copied()
            .ok_or_else(|| DispatchError::UnroutableAction(action_type.into()))?;
        let limb = params
            .first()
            .and_then(ParamValue::as_identifier)
            .and_then(|name| self.limbs.get(name));
        Ok(limb.copied().unwrap_or(owner))
    }

    /// Forwards a scenario command to `agent`'s arbitration.
    pub fn dispatch(&self, forest: &mut Forest, agent: AgentIdx, call: ActionCall, now: f64) -> ArbitrationDecision {
        forest.handle_action_at(agent, ActionRequest::command(call), now)
    }

    pub fn interrupt_all(&self, forest: &mut Forest, now: f64) -> Vec<Cancellation> {
        forest.interrupt_all(now)
    }
}
