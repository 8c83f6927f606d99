use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{GenError, GenerationParams};
use crate::dsl::ScenarioDocument;

/// Weights of the parameter distance used by [`ScenarioCache::fallback_select`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceWeights {
    pub length: f64,
    pub style: f64,
    pub audience: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        DistanceWeights {
            length: 1.0,
            style: 1.0,
            audience: 1.0,
        }
    }
}

/// `w_len·|Δlength|/max_length + w_style·[style differs] + w_aud·[audience differs]`.
pub fn param_distance(
    a: &GenerationParams,
    b: &GenerationParams,
    max_length: usize,
    weights: &DistanceWeights,
) -> f64 {
    let dl = a.target_length.abs_diff(b.target_length) as f64 / max_length.max(1) as f64;
    let ds = if a.style != b.style { 1.0 } else { 0.0 };
    let da = if a.audience != b.audience { 1.0 } else { 0.0 };
    weights.length * dl + weights.style * ds + weights.audience * da
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExhibitScenarios {
    #[cfg_attr(feature = "serde", serde(default))]
    pub basic: Option<ScenarioDocument>,
    /// Oldest first.
    #[cfg_attr(feature = "serde", serde(default))]
    pub generated: Vec<(GenerationParams, ScenarioDocument)>,
}

/// Previously generated scenarios per exhibit, plus a hand-written basic
/// scenario for each.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioCache {
    pub exhibits: BTreeMap<String, ExhibitScenarios>,
}

impl ScenarioCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_basic(&mut self, exhibit: &str, document: ScenarioDocument) {
        self.exhibits.entry(exhibit.into()).or_default().basic = Some(document);
    }

    /// Stores a generation as the most recent entry, replacing any earlier
    /// one with identical parameters.
    pub fn insert(&mut self, exhibit: &str, params: GenerationParams, document: ScenarioDocument) {
        let entry = self.exhibits.entry(exhibit.into()).or_default();
        entry.generated.retain(|(p, _)| *p != params);
        entry.generated.push((params, document));
    }

    pub fn get(&self, exhibit: &str) -> Option<&ExhibitScenarios> {
        self.exhibits.get(exhibit)
    }

    /// The stored scenario closest to `params`; the most recent wins ties.
    /// Falls back to the basic scenario when nothing was generated.
    pub fn fallback_select(
        &self,
        exhibit: &str,
        params: &GenerationParams,
        weights: &DistanceWeights,
    ) -> Result<&ScenarioDocument, GenError> {
        let Some(entry) = self.exhibits.get(exhibit) else {
            return Err(GenError::NoScenario(exhibit.into()));
        };
        let max_length = entry
            .generated
            .iter()
            .map(|(p, _)| p.target_length)
            .fold(params.target_length, usize::max);
        let mut best: Option<(f64, &ScenarioDocument)> = None;
        for (p, doc) in &entry.generated {
            let d = param_distance(params, p, max_length, weights);
            if best.is_none_or(|(b, _)| d <= b) {
                best = Some((d, doc));
            }
        }
        best.map(|(_, doc)| doc)
            .or(entry.basic.as_ref())
            .ok_or_else(|| GenError::NoScenario(exhibit.into()))
    }
}
