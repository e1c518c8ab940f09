//! Balanced randomized trial sequence.
//!
//! Training trials come first and consume no quota; the training trial at
//! `training_index` always shows the widest pin separation. Real trials then
//! draw uniformly among the distances that still have quota left, so every
//! distance ends up presented exactly `number_presentations` times.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ExperimentParams, NO_STEPPER_POSES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error("{NO_STEPPER_POSES}")]
    NoStepperPoses,
    #[error("duplicate distance {0} m")]
    DuplicateDistance(f64),
    #[error("cannot resume: {0}")]
    Resume(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialLabel {
    Training,
    Trial,
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialLabel::Training => "Training",
            TrialLabel::Trial => "Trial",
        })
    }
}

/// Which stimulus comes first within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Presentation {
    SinglePinFirst,
    TwoPinsFirst,
}

impl Presentation {
    /// Human-readable form used in console announcements.
    pub fn describe(self) -> &'static str {
        match self {
            Presentation::SinglePinFirst => "Single Pin First",
            Presentation::TwoPinsFirst => "Two Pins First",
        }
    }

    /// Identifier used in data files.
    pub fn as_str(self) -> &'static str {
        match self {
            Presentation::SinglePinFirst => "SinglePinFirst",
            Presentation::TwoPinsFirst => "TwoPinsFirst",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SinglePinFirst" => Some(Presentation::SinglePinFirst),
            "TwoPinsFirst" => Some(Presentation::TwoPinsFirst),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub label: TrialLabel,
    /// 1-based, restarting at 1 when training ends.
    pub index: u32,
    /// Pin separation, meters.
    pub distance: f64,
    pub presentation: Presentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceQuota {
    pub distance: f64,
    pub presented: u32,
    pub remaining: u32,
}

impl DistanceQuota {
    pub fn available(&self) -> bool {
        self.remaining > 0
    }
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    params: ExperimentParams,
    distances: Vec<f64>,
    quotas: Vec<u32>,
    emitted: u32,
    seed: u64,
    rng: ChaCha8Rng,
}

impl Scheduler {
    pub fn new(params: &ExperimentParams, distances: &[f64], seed: u64) -> Result<Self, SchedulerError> {
        if distances.is_empty() {
            return Err(SchedulerError::NoStepperPoses);
        }
        for (i, d) in distances.iter().enumerate() {
            if distances[..i].contains(d) {
                return Err(SchedulerError::DuplicateDistance(*d));
            }
        }
        Ok(Self {
            params: params.clone(),
            distances: distances.to_vec(),
            quotas: vec![params.number_presentations; distances.len()],
            emitted: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Rebuilds a scheduler and skips the first `emitted` trials, returning
    /// the skipped plans.
    pub fn resume(
        params: &ExperimentParams,
        distances: &[f64],
        seed: u64,
        emitted: u32,
    ) -> Result<(Self, Vec<TrialPlan>), SchedulerError> {
        let mut scheduler = Self::new(params, distances, seed)?;
        if emitted > scheduler.total_trials() {
            return Err(SchedulerError::Resume(format!(
                "{emitted} trials recorded but only {} scheduled",
                scheduler.total_trials()
            )));
        }
        let skipped = (0..emitted).filter_map(|_| scheduler.next_trial()).collect();
        Ok((scheduler, skipped))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn training_trials(&self) -> u32 {
        self.params.number_training_trials
    }

    pub fn real_trials(&self) -> u32 {
        self.params.number_presentations * self.distances.len() as u32
    }

    pub fn total_trials(&self) -> u32 {
        self.training_trials() + self.real_trials()
    }

    /// Trials in the group a plan belongs to, for `i/n` announcements.
    pub fn group_size(&self, label: TrialLabel) -> u32 {
        match label {
            TrialLabel::Training => self.training_trials(),
            TrialLabel::Trial => self.real_trials(),
        }
    }

    pub fn emitted(&self) -> u32 {
        self.emitted
    }

    pub fn is_complete(&self) -> bool {
        self.emitted >= self.total_trials()
    }

    /// Widest configured separation; shown at the training index.
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn remaining_quota(&self) -> Vec<DistanceQuota> {
        self.distances
            .iter()
            .zip(&self.quotas)
            .map(|(&distance, &remaining)| DistanceQuota {
                distance,
                presented: self.params.number_presentations - remaining,
                remaining,
            })
            .collect()
    }

    /// Serves the next trial, or `None` once the sequence is complete.
    pub fn next_trial(&mut self) -> Option<TrialPlan> {
        if self.is_complete() {
            return None;
        }
        let position = self.emitted + 1;
        let training = self.training_trials();
        let plan = if position <= training {
            let distance = if position == self.params.training_index {
                self.max_distance()
            } else {
                self.distances[self.rng.random_range(0..self.distances.len())]
            };
            TrialPlan {
                label: TrialLabel::Training,
                index: position,
                distance,
                presentation: self.coin(),
            }
        } else {
            let available: Vec<usize> = (0..self.distances.len()).filter(|&i| self.quotas[i] > 0).collect();
            let pick = available[self.rng.random_range(0..available.len())];
            self.quotas[pick] -= 1;
            TrialPlan {
                label: TrialLabel::Trial,
                index: position - training,
                distance: self.distances[pick],
                presentation: self.coin(),
            }
        };
        self.emitted += 1;
        Some(plan)
    }

    fn coin(&mut self) -> Presentation {
        if self.rng.random_bool(0.5) {
            Presentation::TwoPinsFirst
        } else {
            Presentation::SinglePinFirst
        }
    }
}

impl Iterator for Scheduler {
    type Item = TrialPlan;

    fn next(&mut self) -> Option<TrialPlan> {
        self.next_trial()
    }
}
