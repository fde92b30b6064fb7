//! Stream generation and ingestion for the prediction protocol.
//!
//! Streams announce the datum first and the observation only after seeing
//! the round's emitted signal, so adversarial constructions that react to
//! the forecast fit the same interface as i.i.d. generators and replays.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::io;

fn default_dim() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSpec {
    /// y = 1, 0, 1, 0, ... with the parity of n encoded in the datum.
    AlternatingParity {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Ternary-encoded reactive stream: the datum accumulates the signs of
    /// past predictions and the outcome flips the current one. Built to
    /// defeat discontinuous rules.
    SignFlipAdversary,
    /// Class 1 with probability theta, remaining mass uniform over the
    /// other classes; datum uniform on [0, 1)^dim.
    Bernoulli {
        theta: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Binary outcomes from sigmoid(<weights, x>) with x uniform on
    /// [-1, 1)^len(weights).
    LogisticRule {
        weights: Vec<f64>,
        #[serde(default)]
        seed: u64,
    },
    /// Replays (x, y) columns from a CSV file.
    CsvReplay { path: String },
    /// Replays the (x, y) sequence of a saved transcript.
    JsonlReplay { path: String },
}

impl StreamSpec {
    pub fn id(&self) -> String {
        match self {
            StreamSpec::AlternatingParity { .. } => "alternating_parity".into(),
            StreamSpec::SignFlipAdversary => "sign_flip_adversary".into(),
            StreamSpec::Bernoulli { theta, .. } => format!("bernoulli({theta})"),
            StreamSpec::LogisticRule { .. } => "logistic_rule".into(),
            StreamSpec::CsvReplay { path } => format!("csv_replay({path})"),
            StreamSpec::JsonlReplay { path } => format!("jsonl_replay({path})"),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            StreamSpec::AlternatingParity { dim } | StreamSpec::Bernoulli { dim, .. } => {
                if *dim == 0 {
                    return Err(Error::Input("datum dimension must be positive".into()));
                }
                if let StreamSpec::Bernoulli { theta, .. } = self {
                    if !(0.0..=1.0).contains(theta) {
                        return Err(Error::Input(format!("theta {theta} outside [0, 1]")));
                    }
                }
                Ok(())
            }
            StreamSpec::SignFlipAdversary | StreamSpec::LogisticRule { .. } => {
                if m != 2 {
                    return Err(Error::Input(format!(
                        "{} is a binary stream, got m = {m}",
                        self.id()
                    )));
                }
                if let StreamSpec::LogisticRule { weights, .. } = self {
                    if weights.is_empty() {
                        return Err(Error::Input("logistic_rule needs weights".into()));
                    }
                }
                Ok(())
            }
            StreamSpec::CsvReplay { .. } | StreamSpec::JsonlReplay { .. } => Ok(()),
        }
    }

    /// Builds the stream; `seed_override` replaces the spec's own seed.
    pub fn instantiate(
        &self,
        m: usize,
        seed_override: Option<u64>,
    ) -> Result<Box<dyn Stream>> {
        self.validate(m)?;
        Ok(match self {
            StreamSpec::AlternatingParity { dim } => Box::new(AlternatingParity {
                dim: *dim,
                n: 0,
            }),
            StreamSpec::SignFlipAdversary => Box::new(SignFlipAdversary {
                acc: 0.0,
                power: 1.0 / 3.0,
                pending_sign: 1.0,
            }),
            StreamSpec::Bernoulli { theta, seed, dim } => Box::new(BernoulliStream {
                theta: *theta,
                m,
                dim: *dim,
                rng: ChaCha8Rng::seed_from_u64(seed_override.unwrap_or(*seed)),
            }),
            StreamSpec::LogisticRule { weights, seed } => Box::new(LogisticStream {
                weights: weights.clone(),
                rng: ChaCha8Rng::seed_from_u64(seed_override.unwrap_or(*seed)),
                pending: 0.5,
            }),
            StreamSpec::CsvReplay { path } => Box::new(Replay {
                data: io::read_xy_csv(path)?,
                cursor: 0,
            }),
            StreamSpec::JsonlReplay { path } => {
                let t = io::read_transcript_jsonl(path)?;
                Box::new(Replay {
                    data: t.rounds.into_iter().map(|r| (r.x, r.y)).collect(),
                    cursor: 0,
                })
            }
        })
    }
}

/// One play of Reality: datum, then outcome after the round's signal.
pub trait Stream {
    /// Next datum, or None when the stream is exhausted.
    fn next_x(&mut self) -> Option<Vec<f64>>;
    /// Outcome for the pending round; `signal` is the emitted scalar
    /// forecast or prediction (class-1 probability in forecast mode).
    fn outcome(&mut self, signal: f64) -> usize;
}

struct AlternatingParity {
    dim: usize,
    n: u64,
}

impl Stream for AlternatingParity {
    fn next_x(&mut self) -> Option<Vec<f64>> {
        self.n += 1;
        let mut x = vec![0.0; self.dim];
        x[0] = (self.n % 2) as f64;
        Some(x)
    }

    fn outcome(&mut self, _signal: f64) -> usize {
        usize::from(self.n % 2 == 1)
    }
}

struct SignFlipAdversary {
    acc: f64,
    power: f64,
    pending_sign: f64,
}

impl Stream for SignFlipAdversary {
    fn next_x(&mut self) -> Option<Vec<f64>> {
        Some(vec![self.acc])
    }

    fn outcome(&mut self, signal: f64) -> usize {
        // sign(gamma) thresholded at the midpoint of [0, 1].
        let sign = if signal >= 0.5 { 1.0 } else { -1.0 };
        self.pending_sign = sign;
        self.acc += sign * self.power;
        self.power /= 3.0;
        // y = -sign mapped onto {0, 1}.
        usize::from(sign < 0.0)
    }
}

struct BernoulliStream {
    theta: f64,
    m: usize,
    dim: usize,
    rng: ChaCha8Rng,
}

impl Stream for BernoulliStream {
    fn next_x(&mut self) -> Option<Vec<f64>> {
        Some((0..self.dim).map(|_| self.rng.random_range(0.0..1.0)).collect())
    }

    fn outcome(&mut self, _signal: f64) -> usize {
        if self.rng.random_bool(self.theta.clamp(0.0, 1.0)) {
            1
        } else if self.m == 2 {
            0
        } else {
            // Uniform over the remaining classes.
            let others: Vec<usize> = (0..self.m).filter(|&c| c != 1).collect();
            others[self.rng.random_range(0..others.len())]
        }
    }
}

struct LogisticStream {
    weights: Vec<f64>,
    rng: ChaCha8Rng,
    pending: f64,
}

impl Stream for LogisticStream {
    fn next_x(&mut self) -> Option<Vec<f64>> {
        let x: Vec<f64> = (0..self.weights.len())
            .map(|_| self.rng.random_range(-1.0..1.0))
            .collect();
        let z: f64 = self.weights.iter().zip(&x).map(|(w, v)| w * v).sum();
        self.pending = 1.0 / (1.0 + (-z).exp());
        Some(x)
    }

    fn outcome(&mut self, _signal: f64) -> usize {
        usize::from(self.rng.random_bool(self.pending))
    }
}

struct Replay {
    data: Vec<(Vec<f64>, usize)>,
    cursor: usize,
}

impl Stream for Replay {
    fn next_x(&mut self) -> Option<Vec<f64>> {
        self.data.get(self.cursor).map(|(x, _)| x.clone())
    }

    fn outcome(&mut self, _signal: f64) -> usize {
        let y = self.data[self.cursor].1;
        self.cursor += 1;
        y
    }
}
