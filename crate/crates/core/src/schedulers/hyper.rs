use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning hyperparameters. Omitted fields in a scenario take these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Learning rate, shared by the Q-network, actor and critic.
    pub alpha: f64,
    /// Initial exploration probability.
    pub epsilon: f64,
    pub gamma: f64,
    /// Multiplicative decay of epsilon per decision.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub dropout: f64,
    /// UCB exploration constant.
    pub ucb_c: f64,
    pub hidden_width: usize,
    pub gnn_layers: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            epsilon: 1.0,
            gamma: 0.9,
            epsilon_decay: 0.997,
            epsilon_min: 0.01,
            dropout: 0.5,
            ucb_c: 2.0,
            hidden_width: 32,
            gnn_layers: 2,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::validation(format!("hyperparameters.{field}"), msg));
        if !(self.alpha > 0.0) {
            return bad("alpha", "must be > 0");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon_min", "must lie in [0, 1]");
        }
        if !(self.epsilon_min..=1.0).contains(&self.epsilon) {
            return bad("epsilon", "must lie in [epsilon_min, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay", "must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", "must lie in [0, 1)");
        }
        if !(self.ucb_c > 0.0) {
            return bad("ucb_c", "must be > 0");
        }
        if self.hidden_width == 0 {
            return bad("hidden_width", "must be >= 1");
        }
        if self.gnn_layers == 0 {
            return bad("gnn_layers", "must be >= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let hp = Hyperparameters::default();
        hp.validate().unwrap();
        assert_eq!((hp.alpha, hp.epsilon, hp.gamma, hp.epsilon_decay, hp.dropout), (0.05, 1.0, 0.9, 0.997, 0.5));
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let hp: Hyperparameters = serde_json::from_str(r#"{"gamma": 0.5}"#).unwrap();
        assert_eq!(hp.gamma, 0.5);
        assert_eq!(hp.alpha, 0.05);
    }

    #[test]
    fn out_of_range_values_name_their_field() {
        let hp = Hyperparameters { gamma: 1.5, ..Default::default() };
        match hp.validate() {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "hyperparameters.gamma"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
