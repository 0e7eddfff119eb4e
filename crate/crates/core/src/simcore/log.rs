use super::{Episode, EpisodeStatus, SimConfig, SimError, StepRecord, TrajectoryLog};
use serde::{Deserialize, Serialize};

/// First line of a trajectory-log file: the episode, the config that
/// produced it, and the outcome, so every log is self-describing.
#[derive(Debug, Serialize, Deserialize)]
struct LogHeader {
    episode: Episode,
    config: SimConfig,
    status: EpisodeStatus,
    t_end: u32,
}

impl TrajectoryLog {
    /// Line-delimited JSON: one header line, then one line per timestep.
    pub fn to_jsonl(&self) -> String {
        let header = LogHeader {
            episode: self.episode.clone(),
            config: self.config.clone(),
            status: self.status,
            t_end: self.t_end,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines();
        let header: LogHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| SimError::LogParse("empty log".into()))?,
        )
        .map_err(|e| SimError::LogParse(format!("header: {e}")))?;
        let records: Vec<StepRecord> = lines
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line)
                    .map_err(|e| SimError::LogParse(format!("record {i}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if records.len() != header.t_end as usize + 1 {
            return Err(SimError::LogParse(format!(
                "expected {} records, got {}",
                header.t_end + 1,
                records.len()
            )));
        }
        Ok(TrajectoryLog {
            episode: header.episode,
            config: header.config,
            status: header.status,
            t_end: header.t_end,
            records,
        })
    }
}

impl TrajectoryLog {
    /// Builds a log directly from pose sequences, for protocol analysis of
    /// hand-constructed scenarios. All pedestrian sequences must have the
    /// same length as the agent sequence; `actions[t]` is the action stored
    /// on record `t` (zero-padded when shorter).
    pub fn synthetic(
        map_id: &str,
        config: SimConfig,
        agent: Vec<crate::world::Pose>,
        pedestrians: Vec<Vec<crate::world::Pose>>,
        actions: Vec<super::Action>,
        status: EpisodeStatus,
        goal: crate::world::Point,
    ) -> Self {
        assert!(!agent.is_empty(), "need at least one timestep");
        for seq in &pedestrians {
            assert_eq!(seq.len(), agent.len(), "pedestrian sequence length mismatch");
        }
        let t_end = (agent.len() - 1) as u32;
        let episode = Episode {
            map_id: map_id.to_string(),
            agent_start: agent[0],
            goal,
            pedestrians: pedestrians
                .iter()
                .map(|seq| super::PedestrianSpec {
                    start: seq[0].position(),
                    end: seq[seq.len() - 1].position(),
                    speed: 0.475,
                    phase: 0.0,
                })
                .collect(),
            seed: 0,
        };
        let records: Vec<StepRecord> = (0..agent.len())
            .map(|t| {
                let peds: Vec<_> = pedestrians.iter().map(|seq| seq[t]).collect();
                let mut outcome = super::StepOutcome::zero();
                if t as u32 == t_end {
                    outcome.i_human_coll = status == EpisodeStatus::HumanCollision;
                    outcome.i_succ = status == EpisodeStatus::Success;
                }
                StepRecord {
                    t: t as u32,
                    agent: agent[t],
                    action: actions.get(t).copied().unwrap_or(super::Action::ZERO),
                    features: Some(crate::socialfeat::extract(agent[t], &peds, &config.features)),
                    pedestrians: peds,
                    outcome,
                }
            })
            .collect();
        TrajectoryLog {
            episode,
            config,
            status,
            t_end,
            records,
        }
    }
}

/// Episode-set file: a JSON array of episodes.
pub fn episodes_to_json(episodes: &[Episode]) -> String {
    serde_json::to_string_pretty(episodes).expect("episodes serialize")
}

pub fn episodes_from_json(text: &str) -> Result<Vec<Episode>, SimError> {
    serde_json::from_str(text).map_err(|e| SimError::LogParse(format!("episode file: {e}")))
}
