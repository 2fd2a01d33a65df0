//! Withholding one reward channel and releasing its accumulated sum at
//! random times, then cutting episodes into the sub-trajectories the reward
//! model learns from.

use std::io::Write;

use rand::Rng;

use crate::envs::{EnvStepRecord, Trajectory, NUM_OBJECTIVES};
use crate::error::{input_err, Result};
use crate::scalar::Scalar;

/// A release of the withheld channel after step `t` (1-based, inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseEvent<T> {
    pub t: usize,
    pub cumulative: T,
}

/// Half-open 0-based step range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubTrajectory {
    pub start: usize,
    pub end: usize,
}

impl SubTrajectory {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Release process driven by an explicit coin: `coin(i)` decides whether
/// the running sum is emitted after step index `i`. The last step always
/// releases whatever is left.
pub fn release_with_coins<T: Scalar>(rewards: &[T], mut coin: impl FnMut(usize) -> bool) -> Vec<ReleaseEvent<T>> {
    let mut events = Vec::new();
    let mut running = T::zero();
    let last = rewards.len().saturating_sub(1);
    for (i, r) in rewards.iter().enumerate() {
        running = running + *r;
        let fired = coin(i);
        if fired || i == last {
            events.push(ReleaseEvent {
                t: i + 1,
                cumulative: running,
            });
            running = T::zero();
        }
    }
    events
}

/// Release process with a Bernoulli(`p_rel`) coin per step.
pub fn release_series<T: Scalar, R: Rng + ?Sized>(
    rewards: &[T],
    p_rel: f64,
    rng: &mut R,
) -> Result<Vec<ReleaseEvent<T>>> {
    if !(0.0..=1.0).contains(&p_rel) {
        return input_err(format!("p_rel {p_rel} outside [0, 1]"));
    }
    Ok(release_with_coins(rewards, |_| rng.gen_bool(p_rel)))
}

/// Applies the release process to channel `channel` of a trajectory.
pub fn apply_release<R: Rng + ?Sized>(
    traj: &Trajectory,
    channel: usize,
    p_rel: f64,
    rng: &mut R,
) -> Result<Vec<ReleaseEvent<f64>>> {
    if channel >= NUM_OBJECTIVES {
        return input_err(format!("reward channel {channel} does not exist"));
    }
    let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward[channel]).collect();
    release_series(&rewards, p_rel, rng)
}

/// Step ranges ending at each event.
pub fn segment_steps<T>(len: usize, events: &[ReleaseEvent<T>]) -> Result<Vec<SubTrajectory>> {
    if len == 0 {
        if events.is_empty() {
            return Ok(Vec::new());
        }
        return input_err("events given for an empty episode");
    }
    let mut out = Vec::with_capacity(events.len());
    let mut start = 0;
    for e in events {
        if e.t <= start || e.t > len {
            return input_err(format!("release times must increase within 1..={len}"));
        }
        out.push(SubTrajectory { start, end: e.t });
        start = e.t;
    }
    if start != len {
        return input_err("release events do not cover the episode");
    }
    Ok(out)
}

pub fn segment<T>(traj: &Trajectory, events: &[ReleaseEvent<T>]) -> Result<Vec<SubTrajectory>> {
    segment_steps(traj.len(), events)
}

/// `h_t = [s_t, a_t, r_t^dense]`, dense channels in the order given.
pub fn build_features(step: &EnvStepRecord, dense_channels: &[usize]) -> Vec<f64> {
    let mut h = Vec::with_capacity(step.state.len() + step.action.len() + dense_channels.len());
    h.extend_from_slice(&step.state);
    h.extend_from_slice(&step.action);
    h.extend(dense_channels.iter().map(|&c| step.reward[c]));
    h
}

pub fn feature_dim(state_dim: usize, action_dim: usize, dense_channels: &[usize]) -> usize {
    state_dim + action_dim + dense_channels.len()
}

/// Every channel other than `sparse`.
pub fn dense_channels_excluding(sparse: usize) -> Vec<usize> {
    (0..NUM_OBJECTIVES).filter(|&c| c != sparse).collect()
}

/// One supervised example: the features of a sub-trajectory and the sum
/// released at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPoint {
    pub features: Vec<Vec<f64>>,
    pub target: f64,
}

/// Builds one datapoint per segment of an episode.
pub fn build_dataset(
    traj: &Trajectory,
    events: &[ReleaseEvent<f64>],
    dense_channels: &[usize],
) -> Result<Vec<DatasetPoint>> {
    let segments = segment(traj, events)?;
    Ok(segments
        .iter()
        .zip(events)
        .map(|(seg, ev)| DatasetPoint {
            features: traj.steps[seg.start..seg.end]
                .iter()
                .map(|s| build_features(s, dense_channels))
                .collect(),
            target: ev.cumulative,
        })
        .collect())
}

/// Rows `segment_id, h0…, target`, with the target only on each segment's
/// last row.
pub fn write_dataset_csv<W: Write>(w: W, points: &[DatasetPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = points
        .first()
        .and_then(|p| p.features.first())
        .map(Vec::len)
        .unwrap_or(0);
    let mut header = vec!["segment_id".to_string()];
    header.extend((0..dim).map(|i| format!("h{i}")));
    header.push("target".into());
    out.write_record(&header)?;
    for (id, p) in points.iter().enumerate() {
        for (k, h) in p.features.iter().enumerate() {
            let mut row = vec![id.to_string()];
            row.extend(h.iter().map(f64::to_string));
            row.push(if k + 1 == p.features.len() {
                p.target.to_string()
            } else {
                String::new()
            });
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;

    #[test]
    fn no_release_reveals_total_at_end() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let ev = release_series(&r, 0.0, &mut rng_from_seed(1)).unwrap();
        assert_eq!(ev, vec![ReleaseEvent { t: 4, cumulative: 10.0 }]);
    }

    #[test]
    fn certain_release_is_dense() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let ev = release_series(&r, 1.0, &mut rng_from_seed(1)).unwrap();
        let got: Vec<(usize, f64)> = ev.iter().map(|e| (e.t, e.cumulative)).collect();
        assert_eq!(got, vec![(1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0)]);
    }

    #[test]
    fn pinned_coins_accumulate() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let ev = release_with_coins(&r, |i| i == 1 || i == 3);
        assert_eq!(
            ev,
            vec![
                ReleaseEvent { t: 2, cumulative: 3.0 },
                ReleaseEvent { t: 4, cumulative: 7.0 }
            ]
        );
        let seg = segment_steps(4, &ev).unwrap();
        assert_eq!(
            seg,
            vec![SubTrajectory { start: 0, end: 2 }, SubTrajectory { start: 2, end: 4 }]
        );
    }

    #[test]
    fn single_event_is_whole_episode_and_empty_is_empty() {
        let ev = [ReleaseEvent { t: 5, cumulative: 1.0 }];
        assert_eq!(segment_steps(5, &ev).unwrap(), vec![SubTrajectory { start: 0, end: 5 }]);
        assert!(segment_steps::<f64>(0, &[]).unwrap().is_empty());
        assert!(release_with_coins::<f64>(&[], |_| true).is_empty());
    }

    #[test]
    fn malformed_events_rejected() {
        let short = [ReleaseEvent { t: 3, cumulative: 1.0 }];
        assert!(segment_steps(4, &short).is_err());
        let unordered = [
            ReleaseEvent { t: 3, cumulative: 1.0 },
            ReleaseEvent { t: 2, cumulative: 1.0 },
        ];
        assert!(segment_steps(4, &unordered).is_err());
        assert!(release_series(&[1.0], 1.5, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn invalid_channel_rejected() {
        let traj = Trajectory::default();
        assert!(apply_release(&traj, 2, 0.5, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn release_count_grows_with_probability() {
        let rewards = [1.0; 20];
        let mut rng = rng_from_seed(42);
        let mut means = Vec::new();
        for p in [0.0, 0.2, 0.5, 1.0] {
            let total: usize = (0..10_000)
                .map(|_| release_series(&rewards, p, &mut rng).unwrap().len())
                .sum();
            means.push(total as f64 / 10_000.0);
        }
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
        assert_eq!(means[0], 1.0);
        assert_eq!(means[3], 20.0);
    }
}
