use rand::Rng;

use super::{concat_features, DecisionContext, Hyperparameters, SchedulerPolicy, ServerFeatures, StepFeedback};
use crate::error::{Error, Result};
use crate::neural::{Activation, DenseNetwork};
use crate::rng::{stream, Stream, StreamRng};

/// Trajectory collected over one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Episode {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Filled by the end-of-episode update.
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Rewards-to-go, computed back to front: `G_last = r_last`, `G_t = r_t + gamma * G_{t+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut next: Option<f64> = None;
    for t in (0..rewards.len()).rev() {
        let g = match next {
            Some(g_next) => rewards[t] + gamma * g_next,
            None => rewards[t],
        };
        returns[t] = g;
        next = Some(g);
    }
    returns
}

/// Inverse-CDF draw from `probs` with one uniform variate.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Softmax actor and scalar critic over the concatenated server features.
/// Decisions sample from the actor; both networks learn once, when the
/// episode (the whole run) ends.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    actor: DenseNetwork,
    critic: DenseNetwork,
    hp: Hyperparameters,
    exploration: StreamRng,
    dropout_rng: StreamRng,
    episode: Episode,
    last_episode: Option<Episode>,
}

impl ActorCritic {
    pub fn new(servers: usize, hp: &Hyperparameters, seed: u64) -> Result<Self> {
        let mut init = stream(seed, Stream::Initialization);
        let input = ServerFeatures::WIDTH * servers;
        let actor = DenseNetwork::he_uniform(&[input, hp.hidden_width, servers], Activation::Softmax, hp.dropout, &mut init)?;
        let critic = DenseNetwork::he_uniform(&[input, hp.hidden_width, 1], Activation::Identity, hp.dropout, &mut init)?;
        Self::from_parts(actor, critic, hp, seed)
    }

    pub fn from_parts(actor: DenseNetwork, critic: DenseNetwork, hp: &Hyperparameters, seed: u64) -> Result<Self> {
        if actor.layers().last().map(|l| l.activation) != Some(Activation::Softmax) {
            return Err(Error::State("actor head must be softmax".into()));
        }
        if critic.output_width() != 1 {
            return Err(Error::Shape {
                context: "critic output",
                expected: 1,
                actual: critic.output_width(),
            });
        }
        Ok(Self {
            actor,
            critic,
            hp: hp.clone(),
            exploration: stream(seed, Stream::Exploration),
            dropout_rng: stream(seed, Stream::Dropout),
            episode: Episode::default(),
            last_episode: None,
        })
    }

    pub fn actor(&self) -> &DenseNetwork {
        &self.actor
    }

    pub fn critic(&self) -> &DenseNetwork {
        &self.critic
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    /// The episode consumed by the most recent update, with returns and advantages.
    pub fn last_episode(&self) -> Option<&Episode> {
        self.last_episode.as_ref()
    }

    pub fn policy(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(state)
    }

    /// Samples a server from the policy and records the state and action.
    pub fn actor_critic_decide(&mut self, state: &[f64]) -> Result<usize> {
        let probs = self.actor.predict(state)?;
        let action = sample_categorical(&probs, &mut self.exploration);
        self.episode.states.push(state.to_vec());
        self.episode.actions.push(action);
        Ok(action)
    }

    /// Attaches a reward to every decision still waiting for one.
    pub fn record_reward(&mut self, reward: f64) {
        let waiting = self.episode.actions.len() - self.episode.rewards.len();
        self.episode.rewards.extend(std::iter::repeat_n(reward, waiting));
    }

    /// End-of-episode learning.
    ///
    /// For each step, in order: `A_t = G_t - V(s_t)`; critic moves along
    /// `+alpha * A_t * grad V(s_t)`; actor along
    /// `+alpha * A_t * grad log pi(a_t | s_t)`, with `A_t` held constant.
    pub fn actor_critic_episode_update(&mut self) -> Result<()> {
        let mut episode = std::mem::take(&mut self.episode);
        // Decisions that never saw a reward are dropped.
        episode.states.truncate(episode.rewards.len());
        episode.actions.truncate(episode.rewards.len());
        if episode.is_empty() {
            return Ok(());
        }
        episode.returns = discounted_returns(&episode.rewards, self.hp.gamma);
        episode.advantages = Vec::with_capacity(episode.len());
        for t in 0..episode.len() {
            let state = &episode.states[t];
            let value = self.critic.forward(state, true, &mut self.dropout_rng)?[0];
            let advantage = episode.returns[t] - value;
            episode.advantages.push(advantage);
            // d/dV of 0.5 * (G - V)^2 is -A.
            self.critic.backward_and_update(&[-advantage], self.hp.alpha)?;

            let probs = self.actor.forward(state, true, &mut self.dropout_rng)?;
            let a = episode.actions[t];
            let mut grad = vec![0.0; probs.len()];
            // d/dp_a of -A * ln p_a.
            grad[a] = -advantage / probs[a].max(f64::MIN_POSITIVE);
            self.actor.backward_and_update(&grad, self.hp.alpha)?;
        }
        self.last_episode = Some(episode);
        Ok(())
    }
}

impl SchedulerPolicy for ActorCritic {
    fn name(&self) -> &'static str {
        "actor_critic"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<usize>> {
        let state = concat_features(ctx.features);
        Ok(Some(self.actor_critic_decide(&state)?))
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>) -> Result<()> {
        self.record_reward(feedback.reward);
        Ok(())
    }

    fn end_episode(&mut self) -> Result<()> {
        self.actor_critic_episode_update()
    }
}
