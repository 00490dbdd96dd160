use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AgentConfig, AgentError, QTable, Recommendation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl std::str::FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accept" => Ok(Decision::Accept),
            "reject" => Ok(Decision::Reject),
            other => Err(format!("decision must be `accept` or `reject`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub recommendation_id: String,
    pub decision: Decision,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Issued {
    recommendation: Recommendation,
    resolution: Option<Decision>,
}

/// Recommendations handed to the operator and whether each has been answered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecommendationBook {
    issued: BTreeMap<String, Issued>,
}

impl RecommendationBook {
    pub fn issue(&mut self, recommendations: &[Recommendation]) {
        for r in recommendations {
            self.issued.insert(
                r.id.clone(),
                Issued {
                    recommendation: r.clone(),
                    resolution: None,
                },
            );
        }
    }

    /// Every issued recommendation in id order.
    pub fn issued(&self) -> impl Iterator<Item = &Recommendation> {
        self.issued.values().map(|i| &i.recommendation)
    }

    pub fn get(&self, id: &str) -> Option<&Recommendation> {
        self.issued.get(id).map(|i| &i.recommendation)
    }

    pub fn resolution(&self, id: &str) -> Option<Decision> {
        self.issued.get(id).and_then(|i| i.resolution)
    }

    pub fn len(&self) -> usize {
        self.issued.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issued.is_empty()
    }

    pub fn unresolved(&self) -> impl Iterator<Item = &Recommendation> {
        self.issued
            .values()
            .filter(|i| i.resolution.is_none())
            .map(|i| &i.recommendation)
    }

    /// Returns the pending recommendation an event refers to.
    pub fn pending(&self, event: &FeedbackEvent) -> Result<&Recommendation, AgentError> {
        let issued = self
            .issued
            .get(&event.recommendation_id)
            .ok_or_else(|| AgentError::UnknownRecommendation(event.recommendation_id.clone()))?;
        if issued.resolution.is_some() {
            return Err(AgentError::AlreadyResolved(event.recommendation_id.clone()));
        }
        Ok(&issued.recommendation)
    }

    fn mark(&mut self, id: &str, decision: Decision) {
        if let Some(i) = self.issued.get_mut(id) {
            i.resolution = Some(decision);
        }
    }
}

/// Folds an operator decision into the table as a synthetic-reward update at
/// `(state, action)` of the issued recommendation, bootstrapping from the same
/// state. Uses the constant learning rate. Returns the new Q-value.
pub fn apply_feedback(
    q: &mut QTable,
    event: &FeedbackEvent,
    book: &mut RecommendationBook,
    config: &AgentConfig,
) -> Result<f64, AgentError> {
    let issued = book.pending(event)?;
    let state = issued.state.index();
    let action = issued.action.ordinal();
    let r = match event.decision {
        Decision::Accept => config.feedback_reward,
        Decision::Reject => -config.feedback_reward,
    };
    let value = q.update(state, action, r, state, config.learning_rate, config.discount)?;
    book.mark(&event.recommendation_id, event.decision);
    Ok(value)
}
