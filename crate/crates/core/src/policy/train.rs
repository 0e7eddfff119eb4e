use super::baselines::{observe_pose, LearnedPolicy};
use super::net::{
    AuxTarget, LossConfig, LossParts, Observation, PolicyConfig, PolicyError, PolicyNet,
};
use crate::simcore::{run_episode, Episode, EpisodeStatus, SimConfig, SimError, TrajectoryLog};
use crate::world::OccupancyGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Adam optimizer over the flat parameter vector.
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Builds auxiliary-training transitions from trajectory logs: one sample
/// per step with a full k-step action window, pairing the observation at t
/// with executed actions and logged features over [t, t+k]. Steps without
/// features or a full window are skipped.
pub fn aux_buffer_from_logs(
    logs: &[(&TrajectoryLog, &OccupancyGrid)],
    cfg: &PolicyConfig,
) -> Vec<(Observation, AuxTarget)> {
    let k = cfg.k_horizon;
    let mut out = Vec::new();
    for (log, grid) in logs {
        let records = &log.records;
        for t in 0..records.len() {
            if t + k + 1 >= records.len() {
                break;
            }
            let window = &records[t..=t + k];
            if window.iter().any(|r| r.features.is_none()) {
                continue;
            }
            let rec = &records[t];
            let obs = observe_pose(grid, rec.agent, log.episode.goal, rec.action, cfg);
            let actions: Vec<[f64; 2]> = (0..=k)
                .map(|j| {
                    let a = records[t + 1 + j].action;
                    [a.lin_vel, a.ang_vel]
                })
                .collect();
            let feats = |j: usize| window[j].features.as_ref().unwrap();
            out.push((
                obs,
                AuxTarget {
                    t,
                    actions,
                    risk: (0..=k).map(|j| feats(j).risk).collect(),
                    compass: (0..=k).map(|j| feats(j).compass.clone()).collect(),
                },
            ));
        }
    }
    out
}

/// Report from auxiliary-only optimization on a frozen buffer.
#[derive(Debug, Clone)]
pub struct AuxTrainReport {
    /// Full-buffer loss before the first update.
    pub initial_loss: f64,
    /// Full-buffer loss after the last update.
    pub final_loss: f64,
    /// Minibatch loss per optimizer step.
    pub per_step: Vec<f64>,
}

/// Minibatch Adam on the auxiliary loss only; the buffer stays fixed.
pub fn train_aux(
    net: &mut PolicyNet,
    buffer: &[(Observation, AuxTarget)],
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<AuxTrainReport, PolicyError> {
    assert!(!buffer.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::new(net.n_params(), lr);
    let initial_loss = net.aux_loss(buffer);
    let mut per_step = Vec::with_capacity(steps);
    for step in 0..steps {
        let batch: Vec<(Observation, AuxTarget)> = (0..batch_size.min(buffer.len()))
            .map(|_| buffer[rng.gen_range(0..buffer.len())].clone())
            .collect();
        let (loss, grads) = net.aux_loss_and_grad(&batch);
        if !loss.is_finite() {
            return Err(PolicyError::Diverged(step));
        }
        adam.step(&mut net.params, &grads);
        per_step.push(loss);
    }
    Ok(AuxTrainReport {
        initial_loss,
        final_loss: net.aux_loss(buffer),
        per_step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub updates: usize,
    /// Backpropagation-through-time segment length for n-step returns.
    pub n_steps: usize,
    pub lr: f64,
    pub gamma: f64,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            updates: 50,
            n_steps: 16,
            lr: 1e-3,
            gamma: 0.99,
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

/// One CSV row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRow {
    pub update: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub aux_risk: f64,
    pub aux_compass: f64,
    pub mean_return: f64,
}

pub fn training_log_csv(rows: &[TrainRow]) -> String {
    let mut out = String::from("update,policy_loss,value_loss,aux_risk,aux_compass,mean_return\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.update, r.policy_loss, r.value_loss, r.aux_risk, r.aux_compass, r.mean_return
        ));
    }
    out
}

/// Advantage actor-critic with n-step returns on sampled rollouts, with the
/// auxiliary losses attached to every step carrying a full action window.
/// Episodes are cycled in order; their seeds (shifted per pass) drive action
/// sampling.
pub fn train(
    net: &mut PolicyNet,
    grid: &OccupancyGrid,
    episodes: &[Episode],
    sim_cfg: &SimConfig,
    tcfg: &TrainConfig,
) -> Result<Vec<TrainRow>, PolicyError> {
    assert!(!episodes.is_empty());
    let mut adam = Adam::new(net.n_params(), tcfg.lr);
    let mut rows = Vec::with_capacity(tcfg.updates);

    for update in 0..tcfg.updates {
        let mut episode = episodes[update % episodes.len()].clone();
        episode.seed = episode
            .seed
            .wrapping_add(tcfg.seed)
            .wrapping_add((update / episodes.len()) as u64);

        let mut policy = LearnedPolicy::stochastic(net.clone());
        policy.record_trace(true);
        let log = run_episode(grid, &episode, &mut policy, sim_cfg)
            .map_err(|e: SimError| PolicyError::Checkpoint(format!("rollout failed: {e}")))?;
        let trace = policy.take_trace();
        if trace.is_empty() {
            continue;
        }

        // rewards and values aligned to actions: action i produced the
        // outcome on record i+1
        let rewards: Vec<f64> = (0..trace.len())
            .map(|i| log.records[i + 1].outcome.reward)
            .collect();
        let terminal = log.status != EpisodeStatus::Timeout;
        let mean_return: f64 = rewards.iter().sum::<f64>();

        let mut parts_acc = LossParts::default();
        let mut grads_acc = vec![0.0; net.n_params()];
        let mut n_segments = 0usize;

        let k = net.cfg.k_horizon;
        let mut s = 0usize;
        while s < trace.len() {
            let e = (s + tcfg.n_steps).min(trace.len());
            // bootstrap with the next state's value unless the episode ended
            let bootstrap = if e < trace.len() {
                trace[e].value
            } else if terminal {
                0.0
            } else {
                trace[e - 1].value
            };
            let mut returns = vec![0.0; e - s];
            let mut acc = bootstrap;
            for i in (s..e).rev() {
                acc = rewards[i] + tcfg.gamma * acc;
                returns[i - s] = acc;
            }
            let advantages: Vec<f64> = (s..e).map(|i| returns[i - s] - trace[i].value).collect();

            let mut aux = Vec::new();
            for t in s..e {
                if t + k + 1 >= log.records.len() {
                    break;
                }
                let feats = |j: usize| log.records[t + j].features.as_ref().unwrap();
                aux.push(AuxTarget {
                    t: t - s,
                    actions: (0..=k)
                        .map(|j| {
                            let a = log.records[t + 1 + j].action;
                            [a.lin_vel, a.ang_vel]
                        })
                        .collect(),
                    risk: (0..=k).map(|j| feats(j).risk).collect(),
                    compass: (0..=k).map(|j| feats(j).compass.clone()).collect(),
                });
            }

            let sample = super::net::TrainSample {
                obs: trace[s..e].iter().map(|t| t.obs.clone()).collect(),
                actions: trace[s..e].iter().map(|t| t.pre_clamp).collect(),
                returns,
                advantages,
                h0: trace[s].h_before.clone(),
                aux,
            };
            let (parts, grads) = net.loss_and_grad(&sample, &tcfg.loss);
            if !parts.total.is_finite() {
                return Err(PolicyError::Diverged(update));
            }
            parts_acc.policy += parts.policy;
            parts_acc.value += parts.value;
            parts_acc.aux_risk += parts.aux_risk;
            parts_acc.aux_compass += parts.aux_compass;
            for (g, gi) in grads_acc.iter_mut().zip(&grads) {
                *g += gi;
            }
            n_segments += 1;
            s = e;
        }

        if n_segments > 0 {
            let scale = 1.0 / n_segments as f64;
            for g in &mut grads_acc {
                *g *= scale;
            }
            adam.step(&mut net.params, &grads_acc);
            rows.push(TrainRow {
                update,
                policy_loss: parts_acc.policy / n_segments as f64,
                value_loss: parts_acc.value / n_segments as f64,
                aux_risk: parts_acc.aux_risk / n_segments as f64,
                aux_compass: parts_acc.aux_compass / n_segments as f64,
                mean_return,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::PedestrianSpec;
    use crate::world::{Point, Pose};

    fn small_setup() -> (OccupancyGrid, Episode, SimConfig) {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let episode = Episode {
            map_id: "t".into(),
            agent_start: Pose::new(1.0, 2.0, 0.0),
            goal: Point::new(3.0, 2.0),
            pedestrians: vec![PedestrianSpec {
                start: Point::new(1.05, 3.05),
                end: Point::new(3.05, 3.05),
                speed: 0.47,
                phase: 0.2,
            }],
            seed: 5,
        };
        let mut cfg = SimConfig::default();
        cfg.max_steps = 60;
        (grid, episode, cfg)
    }

    fn small_buffer(cfg: &PolicyConfig) -> Vec<(Observation, AuxTarget)> {
        let (grid, episode, sim_cfg) = small_setup();
        let mut policy = LearnedPolicy::stochastic(PolicyNet::new(cfg.clone(), 99));
        let log = run_episode(&grid, &episode, &mut policy, &sim_cfg).unwrap();
        aux_buffer_from_logs(&[(&log, &grid)], cfg)
    }

    #[test]
    fn buffer_windows_are_complete() {
        let cfg = PolicyConfig::toy();
        let buffer = small_buffer(&cfg);
        assert!(!buffer.is_empty());
        for (obs, target) in &buffer {
            assert_eq!(obs.rays.len(), cfg.n_rays);
            assert_eq!(target.actions.len(), cfg.k_horizon + 1);
            assert_eq!(target.risk.len(), cfg.k_horizon + 1);
            assert!(target.compass.iter().all(|c| c.len() == cfg.k_sectors));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let cfg = PolicyConfig::toy();
        let buffer = small_buffer(&cfg);
        let mut net = PolicyNet::new(cfg, 1);
        let before = net.params.clone();
        train_aux(&mut net, &buffer, 5, 8, 0.0, 3).unwrap();
        assert_eq!(net.params, before);
    }

    #[test]
    fn aux_training_reduces_buffer_loss() {
        let cfg = PolicyConfig::toy();
        let buffer = small_buffer(&cfg);
        let mut net = PolicyNet::new(cfg, 1);
        let report = train_aux(&mut net, &buffer, 120, 16, 3e-3, 3).unwrap();
        assert!(
            report.final_loss < report.initial_loss,
            "{} -> {}",
            report.initial_loss,
            report.final_loss
        );
    }

    #[test]
    fn a2c_runs_and_is_seed_deterministic() {
        let cfg = PolicyConfig::toy();
        let (grid, episode, sim_cfg) = small_setup();
        let mut tcfg = TrainConfig::default();
        tcfg.updates = 3;
        let mut net1 = PolicyNet::new(cfg.clone(), 2);
        let rows1 = train(&mut net1, &grid, &[episode.clone()], &sim_cfg, &tcfg).unwrap();
        let mut net2 = PolicyNet::new(cfg, 2);
        let rows2 = train(&mut net2, &grid, &[episode], &sim_cfg, &tcfg).unwrap();
        assert_eq!(net1.params, net2.params);
        assert_eq!(rows1.len(), rows2.len());
        assert!(rows1
            .iter()
            .zip(&rows2)
            .all(|(a, b)| a.policy_loss == b.policy_loss));
        let csv = training_log_csv(&rows1);
        assert!(csv.starts_with("update,policy_loss"));
        assert_eq!(csv.lines().count(), rows1.len() + 1);
    }
}
