//! Episode traces: one JSON line per step, preceded by an episode
//! header. Traces feed the recall-over-steps curves, the plot command,
//! and the reward accounting oracle.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvConfig, SearchEnv, StepInfo, StepResult};
use crate::{Error, Result};

/// Episode-level header of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub grid_size: usize,
    pub fov_size: usize,
    /// Ground-truth object cells in the field.
    pub total_objects: usize,
    /// Ground-truth cells found by the initial observation at reset.
    pub initial_gt_found: usize,
    pub start: (usize, usize),
}

/// One executed action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Drone position after the action.
    pub pos: (usize, usize),
    pub action: Action,
    pub reward: f64,
    pub done: bool,
    #[serde(flatten)]
    pub info: StepInfo,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Meta(TraceMeta),
    Step(StepRecord),
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub meta: TraceMeta,
    pub steps: Vec<StepRecord>,
}

impl EpisodeTrace {
    /// Capture the header from a freshly reset environment.
    pub fn start(env: &SearchEnv) -> Self {
        EpisodeTrace {
            meta: TraceMeta {
                grid_size: env.field().size(),
                fov_size: env.fov().size(),
                total_objects: env.field().objects().len(),
                initial_gt_found: env.initial_gt_found(),
                start: (env.drone().x, env.drone().y),
            },
            steps: Vec::new(),
        }
    }

    pub fn record(&mut self, action: Action, result: &StepResult, env: &SearchEnv) {
        self.steps.push(StepRecord {
            step: env.steps(),
            pos: (env.drone().x, env.drone().y),
            action,
            reward: result.reward,
            done: result.done,
            info: result.info,
        });
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Move actions flown; landing costs nothing.
    pub fn path_length(&self) -> usize {
        self.steps.iter().filter(|s| s.action != Action::Land).count()
    }

    /// Cumulative ground-truth cells found, starting with the initial
    /// observation. Index i is the state after i steps.
    pub fn cum_gt_found(&self) -> Vec<usize> {
        let mut cum = Vec::with_capacity(self.steps.len() + 1);
        let mut total = self.meta.initial_gt_found;
        cum.push(total);
        for s in &self.steps {
            total += s.info.new_ground_truth_cells;
            cum.push(total);
        }
        cum
    }

    /// Reward implied by the per-step info records. The environment's
    /// summed rewards must match this exactly.
    pub fn accounted_reward(&self, config: &EnvConfig) -> f64 {
        let mut paid = 0usize;
        let mut wall_hits = 0usize;
        let mut nocov = 0usize;
        let mut crashed = 0usize;
        for s in &self.steps {
            paid += s.info.newly_found_true_positives;
            wall_hits += s.info.attempted_out_of_field as usize;
            if s.action != Action::Land && s.info.new_cells_covered == 0 {
                nocov += 1;
            }
            crashed += s.info.crashed as usize;
        }
        config.r_dt * paid as f64
            + config.r_step * self.steps.len() as f64
            + config.r_nfz * wall_hits as f64
            + config.r_nocov * nocov as f64
            + config.r_crash * crashed as f64
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = serde_json::to_string(&TraceLine::Meta(self.meta.clone()))?;
        writeln!(w, "{meta}")?;
        for s in &self.steps {
            let line = serde_json::to_string(&TraceLine::Step(s.clone()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = None;
        let mut steps = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TraceLine>(&line)? {
                TraceLine::Meta(m) => {
                    if meta.replace(m).is_some() {
                        return Err(Error::Parse("trace has two header lines".into()));
                    }
                }
                TraceLine::Step(s) => steps.push(s),
            }
        }
        let meta = meta.ok_or_else(|| Error::Parse("trace missing header line".into()))?;
        Ok(EpisodeTrace { meta, steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, ObservationSource, SearchEnv};
    use crate::field::{generate_field, generate_prior_map, FieldConfig, NoiseConfig};
    use rand::Rng;

    fn run_episode(seed: u64) -> (EpisodeTrace, EnvConfig, f64) {
        let config = EnvConfig {
            fov_size: 4,
            b_init: 40.0,
            b_step: 1.0,
            ..EnvConfig::default()
        };
        let field_cfg = FieldConfig {
            grid_size: 16,
            n_obj_mean: 10.0,
            n_obj_std: 2.0,
            k_mean: 2.0,
            k_std: 0.5,
            ..FieldConfig::default()
        };
        let noise = NoiseConfig::default();
        let field = generate_field(&field_cfg, seed).unwrap();
        let prior = generate_prior_map(&field, &noise, seed).unwrap();
        let mut env = SearchEnv::reset(
            field,
            prior,
            &config,
            ObservationSource::simulated(noise, seed),
            seed,
        )
        .unwrap();
        let mut trace = EpisodeTrace::start(&env);
        let mut rng = crate::rng::rng_from_seed(seed ^ 0xabc);
        let mut total = 0.0;
        while !env.done() {
            let action = crate::env::Action::ALL[rng.random_range(0..5)];
            let r = env.step(action).unwrap();
            trace.record(action, &r, &env);
            total += r.reward;
        }
        let recall_from_score =
            crate::metrics::score(env.found_map(), env.field()).unwrap().recall;
        let cum = trace.cum_gt_found();
        let total_objects = trace.meta.total_objects;
        if total_objects > 0 {
            let recall_from_trace = *cum.last().unwrap() as f64 / total_objects as f64;
            assert!((recall_from_trace - recall_from_score).abs() < 1e-12);
        }
        (trace, config, total)
    }

    #[test]
    fn jsonl_round_trip_preserves_the_trace() {
        let (trace, _, _) = run_episode(5);
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let back = EpisodeTrace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn accounting_matches_summed_rewards() {
        for seed in 0..20 {
            let (trace, config, total) = run_episode(seed);
            assert!((trace.total_reward() - total).abs() < 1e-12);
            assert!((trace.accounted_reward(&config) - total).abs() < 1e-9);
        }
    }

    #[test]
    fn cum_gt_found_is_a_monotone_staircase() {
        let (trace, _, _) = run_episode(9);
        let cum = trace.cum_gt_found();
        assert_eq!(cum.len(), trace.steps.len() + 1);
        assert_eq!(cum[0], trace.meta.initial_gt_found);
        for w in cum.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn missing_header_is_a_parse_error() {
        let line = r#"{"type":"step","step":1,"pos":[2,2],"action":"north","reward":-0.01,"done":false,"newly_found_true_positives":0,"new_ground_truth_cells":0,"new_cells_covered":4,"attempted_out_of_field":false,"crashed":false}"#;
        assert!(matches!(
            EpisodeTrace::read_jsonl(line.as_bytes()),
            Err(Error::Parse(_))
        ));
    }
}
