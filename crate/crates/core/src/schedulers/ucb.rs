use super::{DecisionContext, SchedulerPolicy, StepFeedback};
use crate::error::{Error, Result};

/// One UCB bandit: an arm per server.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    q: Vec<f64>,
    n: Vec<u64>,
    t: u64,
    c: f64,
}

impl BanditState {
    pub fn new(arms: usize, c: f64) -> Self {
        Self { q: vec![0.0; arms], n: vec![0; arms], t: 0, c }
    }

    /// Builds a bandit from explicit estimates and counts; `t` is their sum.
    pub fn with_estimates(q: Vec<f64>, n: Vec<u64>, c: f64) -> Self {
        assert_eq!(q.len(), n.len(), "one count per estimate");
        let t = n.iter().sum();
        Self { q, n, t, c }
    }

    pub fn estimates(&self) -> &[f64] {
        &self.q
    }

    pub fn counts(&self) -> &[u64] {
        &self.n
    }

    /// Total pulls so far.
    pub fn pulls(&self) -> u64 {
        self.t
    }

    /// UCB score of every arm; untried arms score `+inf`.
    pub fn scores(&self) -> Vec<f64> {
        let ln_t = (self.t.max(1) as f64).ln();
        self.q
            .iter()
            .zip(&self.n)
            .map(|(&q, &n)| {
                if n == 0 {
                    f64::INFINITY
                } else {
                    q + self.c * (ln_t / n as f64).sqrt()
                }
            })
            .collect()
    }

    /// Untried arms first (lowest index), then the highest score, ties to the
    /// lowest index.
    pub fn ucb_select(&self) -> usize {
        if let Some(arm) = self.n.iter().position(|&n| n == 0) {
            return arm;
        }
        super::argmax(&self.scores())
    }

    /// Counts the pull, then folds `reward` into the arm's running mean.
    pub fn ucb_update(&mut self, arm: usize, reward: f64) {
        self.n[arm] += 1;
        self.t += 1;
        self.q[arm] += (reward - self.q[arm]) / self.n[arm] as f64;
    }
}

/// One bandit per service; the reward for a pull is `1 / power` of the chosen server.
#[derive(Debug, Clone)]
pub struct MabUcb {
    arms: usize,
    c: f64,
    bandits: Vec<BanditState>,
    pending: Vec<(usize, usize)>,
}

impl MabUcb {
    pub fn new(arms: usize, c: f64) -> Self {
        Self { arms, c, bandits: Vec::new(), pending: Vec::new() }
    }

    pub fn bandit(&self, service: usize) -> Option<&BanditState> {
        self.bandits.get(service)
    }

    fn bandit_mut(&mut self, service: usize) -> &mut BanditState {
        if self.bandits.len() <= service {
            let (arms, c) = (self.arms, self.c);
            self.bandits.resize_with(service + 1, || BanditState::new(arms, c));
        }
        &mut self.bandits[service]
    }
}

impl SchedulerPolicy for MabUcb {
    fn name(&self) -> &'static str {
        "mab_ucb"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<usize>> {
        if ctx.servers.len() != self.arms {
            return Err(Error::Shape {
                context: "bandit arm count",
                expected: self.arms,
                actual: ctx.servers.len(),
            });
        }
        let arm = self.bandit_mut(ctx.service.id).ucb_select();
        self.pending.push((ctx.service.id, arm));
        Ok(Some(arm))
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>) -> Result<()> {
        for (service, arm) in std::mem::take(&mut self.pending) {
            let reward = 1.0 / feedback.server_power[arm];
            self.bandit_mut(service).ucb_update(arm, reward);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untried_arms_come_first() {
        let b = BanditState::new(4, 2.0);
        assert_eq!(b.ucb_select(), 0);
        let b = BanditState::with_estimates(vec![9.0, 0.0, 0.0], vec![3, 0, 1], 2.0);
        assert_eq!(b.ucb_select(), 1);
    }

    #[test]
    fn hand_computed_scores() {
        let b = BanditState::with_estimates(vec![0.5, 0.2], vec![1, 1], 2.0);
        let s = b.scores();
        assert!((s[0] - 2.165).abs() < 1e-3);
        assert!((s[1] - 1.865).abs() < 1e-3);
        assert_eq!(b.ucb_select(), 0);
    }

    #[test]
    fn scaling_estimates_without_bonus_keeps_argmax() {
        let q = vec![0.3, 0.8, 0.1, 0.8];
        let n = vec![2, 5, 1, 3];
        let base = BanditState::with_estimates(q.clone(), n.clone(), 0.0).ucb_select();
        let scaled = BanditState::with_estimates(q.iter().map(|v| v * 7.5).collect(), n, 0.0).ucb_select();
        assert_eq!(base, scaled);
        assert_eq!(base, 1);
    }

    #[test]
    fn update_is_a_running_mean() {
        let mut b = BanditState::new(2, 2.0);
        b.ucb_update(0, 0.3);
        assert_eq!((b.estimates()[0], b.counts()[0]), (0.3, 1));
        let mut b = BanditState::new(2, 2.0);
        b.ucb_update(1, 0.2);
        b.ucb_update(1, 0.4);
        assert!((b.estimates()[1] - 0.3).abs() < 1e-15);
        assert_eq!(b.pulls(), 2);
    }
}
