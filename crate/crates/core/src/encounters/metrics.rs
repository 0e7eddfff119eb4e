use super::analysis::Encounter;
use super::{EncounterClass, EncounterParams};
use crate::simcore::TrajectoryLog;
use crate::world::euclidean_distance;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const CURVE_BINS: usize = 100;

/// Per-class aggregate statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    pub collided: usize,
    /// Encounter survival rate, percent of encounters without a human
    /// collision. 100 for an empty class.
    pub esr: f64,
    /// Mean linear velocity of the agent over the encounter, m/s, signed.
    pub alv: f64,
    /// Mean euclidean agent-person distance over the encounter, meters.
    pub ad: f64,
}

impl ClassStats {
    fn empty() -> Self {
        ClassStats {
            count: 0,
            collided: 0,
            esr: 100.0,
            alv: 0.0,
            ad: 0.0,
        }
    }
}

/// ALV and AD resampled onto completion-percentage bins and averaged
/// pointwise over the encounters of one class. All zeros for an empty class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionCurves {
    pub alv: Vec<f64>,
    pub ad: Vec<f64>,
}

impl CompletionCurves {
    fn zeros() -> Self {
        CompletionCurves {
            alv: vec![0.0; CURVE_BINS],
            ad: vec![0.0; CURVE_BINS],
        }
    }
}

/// Full evaluation report over a log set. The header records the thresholds
/// and the velocity scale so the numbers are interpretable on their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterReport {
    pub params: EncounterParams,
    pub v_max: f64,
    pub total: usize,
    pub per_class: BTreeMap<EncounterClass, ClassStats>,
    pub curves: BTreeMap<EncounterClass, CompletionCurves>,
}

/// Linearly resamples a per-timestep series onto `CURVE_BINS` points over
/// the encounter's completion percentage.
fn resample(series: &[f64]) -> Vec<f64> {
    assert!(!series.is_empty());
    if series.len() == 1 {
        return vec![series[0]; CURVE_BINS];
    }
    let last = (series.len() - 1) as f64;
    (0..CURVE_BINS)
        .map(|j| {
            let pos = last * j as f64 / (CURVE_BINS - 1) as f64;
            let i = (pos.floor() as usize).min(series.len() - 2);
            let frac = pos - i as f64;
            series[i] * (1.0 - frac) + series[i + 1] * frac
        })
        .collect()
}

/// Aggregates classified encounters into per-class statistics and
/// completion curves. Each entry pairs a log with the encounters found in
/// it; `v_max` is taken from the first log's config.
pub fn encounter_metrics(
    items: &[(&TrajectoryLog, &[Encounter])],
    params: &EncounterParams,
) -> EncounterReport {
    let v_max = items.first().map_or(0.5, |(log, _)| log.config.v_max);
    let mut per_class = BTreeMap::new();
    let mut curves = BTreeMap::new();

    for class in EncounterClass::ALL {
        let mut count = 0usize;
        let mut collided = 0usize;
        let mut alv_means = Vec::new();
        let mut ad_means = Vec::new();
        let mut alv_curves: Vec<Vec<f64>> = Vec::new();
        let mut ad_curves: Vec<Vec<f64>> = Vec::new();

        for &(log, encounters) in items {
            for enc in encounters.iter().filter(|e| e.class == class) {
                count += 1;
                collided += enc.collided as usize;
                let steps = enc.t1..=enc.t2;
                let alv_series: Vec<f64> = steps
                    .clone()
                    .map(|t| log.records[t as usize].action.lin_vel * log.config.v_max)
                    .collect();
                let ad_series: Vec<f64> = steps
                    .map(|t| {
                        let rec = &log.records[t as usize];
                        euclidean_distance(
                            rec.agent.position(),
                            rec.pedestrians[enc.pedestrian_id].position(),
                        )
                    })
                    .collect();
                alv_means.push(mean(&alv_series));
                ad_means.push(mean(&ad_series));
                alv_curves.push(resample(&alv_series));
                ad_curves.push(resample(&ad_series));
            }
        }

        let stats = if count == 0 {
            ClassStats::empty()
        } else {
            ClassStats {
                count,
                collided,
                // integer ratio first, percentage last
                esr: 100.0 * (count - collided) as f64 / count as f64,
                alv: mean(&alv_means),
                ad: mean(&ad_means),
            }
        };
        let class_curves = if count == 0 {
            CompletionCurves::zeros()
        } else {
            CompletionCurves {
                alv: average_pointwise(&alv_curves),
                ad: average_pointwise(&ad_curves),
            }
        };
        per_class.insert(class, stats);
        curves.insert(class, class_curves);
    }

    EncounterReport {
        params: *params,
        v_max,
        total: per_class.values().map(|s| s.count).sum(),
        per_class,
        curves,
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn average_pointwise(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; CURVE_BINS];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= rows.len() as f64;
    }
    out
}

impl EncounterReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-class stats as CSV: class,count,esr,alv,ad.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,count,esr,alv,ad\n");
        for (class, s) in &self.per_class {
            out.push_str(&format!(
                "{class},{},{},{},{}\n",
                s.count, s.esr, s.alv, s.ad
            ));
        }
        out
    }

    /// Aligned human-readable table of per-class statistics.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>6} {:>8} {:>9} {:>8}\n",
            "class", "count", "ESR %", "ALV m/s", "AD m"
        );
        for (class, s) in &self.per_class {
            out.push_str(&format!(
                "{:<16} {:>6} {:>8.2} {:>9.3} {:>8.3}\n",
                class.to_string(),
                s.count,
                s.esr,
                s.alv,
                s.ad
            ));
        }
        out.push_str(&format!("total encounters: {}\n", self.total));
        out
    }
}
