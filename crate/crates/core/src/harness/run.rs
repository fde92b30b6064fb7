//! Game orchestration: the round loop of the prediction protocol, Skeptic
//! panel attachment, and the doubling wrapper that escalates the datum
//! compact and restarts the inner strategy when data escape it.

use std::collections::BTreeMap;

use crate::decision::{DecisionConfig, Gamma, MasterState};
use crate::error::{Error, Result};
use crate::forecaster::ForecastState;
use crate::harness::config::{Mode, RunConfig};
use crate::kernel::Simplex;
use crate::metrics::{Escalation, Round, Transcript, TranscriptMeta};
use crate::skeptic::{MixtureSkeptic, QuadraticSkeptic, SllnSkeptic};

/// Plays the configured game for exactly `rounds` rounds. Ignores the
/// doubling settings; see [`doubling_wrapper`].
pub fn run_game(config: &RunConfig) -> Result<Transcript> {
    drive(config, false)
}

/// Plays the game inside a norm ball of the configured radius: whenever a
/// datum leaves the ball the radius is multiplied up until it fits, the
/// inner forecasting state restarts, and the escalation is logged.
pub fn doubling_wrapper(config: &RunConfig) -> Result<Transcript> {
    if !config.doubling.enabled {
        return Err(Error::Config("doubling wrapper needs doubling.enabled".into()));
    }
    drive(config, true)
}

enum Engine {
    Forecast(ForecastState),
    Decide(MasterState),
}

impl Engine {
    fn build(config: &RunConfig, m: usize) -> Result<Engine> {
        match config.mode {
            Mode::Forecast | Mode::Test => Ok(Engine::Forecast(
                ForecastState::new(config.kernel.clone(), m)?
                    .with_tolerances(config.tolerances.neutral, config.tolerances.binary)?,
            )),
            Mode::Decide => {
                let loss = config.loss.clone().expect("validated");
                Ok(Engine::Decide(
                    MasterState::new(config.kernel.clone(), DecisionConfig::new(loss)?)?
                        .with_tolerance(config.tolerances.neutral)?,
                ))
            }
        }
    }
}

struct SkepticPanel {
    slln: Option<SllnSkeptic>,
    quadratic: QuadraticSkeptic,
    mixture: MixtureSkeptic,
}

impl SkepticPanel {
    fn build(config: &RunConfig, m: usize) -> Result<Self> {
        let c_f = config.kernel.imbedding_constant()?;
        Ok(SkepticPanel {
            slln: (m == 2).then(SllnSkeptic::new),
            quadratic: QuadraticSkeptic::new(config.kernel.clone(), m)?,
            mixture: MixtureSkeptic::new(config.kernel.clone(), m, 2.0 * c_f)?,
        })
    }

    fn step(&mut self, x: &[f64], p: &Simplex, y: usize) -> Result<BTreeMap<String, f64>> {
        let mut caps = BTreeMap::new();
        if let Some(slln) = self.slln.as_mut() {
            caps.insert("slln".to_string(), slln.step(p, y)?);
        }
        caps.insert("quadratic".to_string(), self.quadratic.step(x, p, y)?);
        caps.insert("mixture".to_string(), self.mixture.step(x, p, y)?);
        Ok(caps)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn drive(config: &RunConfig, escalate: bool) -> Result<Transcript> {
    config.validate()?;
    let m = config.class_count();
    let mut stream = config.stream.instantiate(m, config.seed)?;
    let mut engine = Engine::build(config, m)?;
    let mut panel = match config.mode {
        Mode::Test => Some(SkepticPanel::build(config, m)?),
        _ => None,
    };

    let mut radius = config.doubling.radius;
    let mut escalations = Vec::new();
    let mut rounds = Vec::new();

    for n in 1..=config.rounds as u64 {
        let x = stream
            .next_x()
            .ok_or_else(|| Error::Input(format!("stream exhausted at round {n}")))?;

        if escalate && norm(&x) > radius {
            // One escalation per radius multiplication; a far outlier can
            // force several in the same round. The inner state resets once.
            while norm(&x) > radius {
                radius *= config.doubling.factor;
                escalations.push(Escalation { round: n, radius });
            }
            engine = Engine::build(config, m)?;
        }

        let wrap_round = |e: Error| match e {
            Error::SolverFailure(msg) => Error::SolverFailure(format!("round {n}: {msg}")),
            other => other,
        };

        let (p, gamma, cert) = match &engine {
            Engine::Forecast(state) => {
                let cf = state.forecast_with_cert(&x).map_err(wrap_round)?;
                (cf.forecast, None, cf.cert)
            }
            Engine::Decide(state) => {
                let step = state.predict(&x).map_err(wrap_round)?;
                (step.p, Some(step.gamma), step.cert)
            }
        };

        let signal = match &gamma {
            Some(Gamma::Scalar(g)) => *g,
            _ => p.weight(1),
        };
        let y = stream.outcome(signal);
        if y >= m {
            return Err(Error::Input(format!(
                "stream produced class {y} at round {n}, expected < {m}"
            )));
        }

        let mut caps = match panel.as_mut() {
            Some(panel) => Some(panel.step(&x, &p, y)?),
            None => None,
        };

        let loss = match &mut engine {
            Engine::Forecast(state) => {
                state.observe(&x, &p, y)?;
                None
            }
            Engine::Decide(state) => {
                let gamma = gamma.as_ref().expect("decide mode emits predictions");
                let obs = state.observe(&x, &p, gamma, y)?;
                caps.get_or_insert_with(BTreeMap::new)
                    .insert("merged".to_string(), state.capital());
                Some(obs.loss)
            }
        };

        rounds.push(Round {
            n,
            x,
            p: p.weights().to_vec(),
            gamma,
            y,
            loss,
            cap: caps,
            cert: Some(cert),
            g_samp: None,
            d_samp: None,
            d_mean_loss: None,
        });
    }

    Ok(Transcript {
        meta: TranscriptMeta {
            kernel: Some(config.kernel.clone()),
            loss: config.loss.clone(),
            seed: config.seed,
            stream: Some(config.stream.id()),
            mode: Some(config.mode.to_string()),
            m: Some(m),
            escalations,
        },
        rounds,
    })
}
