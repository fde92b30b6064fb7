//! Expected-loss minimization on top of probability forecasts, and the
//! master prediction loop that runs the forecaster on the direct sum of a
//! loss-difference component and a resolution-kernel component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Simplex};
use crate::solver;

/// A prediction: scalar for interval prediction spaces, vector for
/// simplex-valued ones (Brier class probabilities, portfolio weights).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Gamma {
    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Gamma::Scalar(v) => Ok(*v),
            Gamma::Vector(_) => Err(Error::Input("expected a scalar prediction".into())),
        }
    }

    pub fn as_vector(&self) -> Result<&[f64]> {
        match self {
            Gamma::Vector(v) => Ok(v),
            Gamma::Scalar(_) => Err(Error::Input("expected a vector prediction".into())),
        }
    }
}

/// Loss function with its prediction space and range metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// |y - gamma| on gamma in [0,1], y in {0,1}.
    Absolute,
    /// (y - gamma)^2 on gamma in [0,1], y in {0,1}.
    Quadratic,
    /// ||gamma - e_y||^2 on the class simplex.
    Brier { classes: usize },
    /// Cover's sequential investment: -ln <gamma, v_y> over a finite grid of
    /// clamped price-relative vectors in [l, u]^K. Without an explicit grid
    /// the corners {l, u}^K are used.
    Cover {
        stocks: usize,
        clamp: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<Vec<f64>>>,
    },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::Absolute | LossSpec::Quadratic => Ok(()),
            LossSpec::Brier { classes } => {
                if *classes < 2 {
                    return Err(Error::Input(format!("brier needs >= 2 classes, got {classes}")));
                }
                Ok(())
            }
            LossSpec::Cover { stocks, clamp, grid } => {
                let [l, u] = clamp;
                if *stocks < 2 {
                    return Err(Error::Input(format!("cover needs >= 2 stocks, got {stocks}")));
                }
                if !(l.is_finite() && u.is_finite()) || *l <= 0.0 || l > u {
                    return Err(Error::Input(format!(
                        "cover clamp [{l}, {u}] must satisfy 0 < l <= u"
                    )));
                }
                if let Some(g) = grid {
                    if g.is_empty() {
                        return Err(Error::Input("cover grid must be non-empty".into()));
                    }
                    for v in g {
                        if v.len() != *stocks {
                            return Err(Error::Input(format!(
                                "cover grid vector has {} entries, expected {stocks}",
                                v.len()
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Number of observation classes.
    pub fn classes(&self) -> usize {
        match self {
            LossSpec::Absolute | LossSpec::Quadratic => 2,
            LossSpec::Brier { classes } => *classes,
            LossSpec::Cover { stocks, grid, .. } => match grid {
                Some(g) => g.len(),
                None => 1usize << stocks,
            },
        }
    }

    /// Cover's observation grid with components clamped into [l, u].
    pub fn observation_grid(&self) -> Option<Vec<Vec<f64>>> {
        let LossSpec::Cover { stocks, clamp, grid } = self else {
            return None;
        };
        let [l, u] = *clamp;
        let vectors = match grid {
            Some(g) => g
                .iter()
                .map(|v| v.iter().map(|c| c.clamp(l, u)).collect())
                .collect(),
            None => {
                // Corners {l, u}^K, lexicographic with l first.
                let mut out = Vec::with_capacity(1 << stocks);
                for code in 0..(1usize << stocks) {
                    out.push(
                        (0..*stocks)
                            .map(|k| if code >> (stocks - 1 - k) & 1 == 1 { u } else { l })
                            .collect(),
                    );
                }
                out
            }
        };
        Some(vectors)
    }

    /// Loss oscillation sup - inf over the declared domain.
    pub fn c_lambda(&self) -> f64 {
        match self {
            LossSpec::Absolute | LossSpec::Quadratic => 1.0,
            LossSpec::Brier { .. } => 2.0,
            LossSpec::Cover { .. } => {
                let grid = self.observation_grid().expect("cover has a grid");
                let mut hi = f64::NEG_INFINITY;
                let mut lo = f64::INFINITY;
                for v in &grid {
                    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
                    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    hi = hi.max(-vmin.ln());
                    lo = lo.min(-vmax.ln());
                }
                hi - lo
            }
        }
    }

    /// Lipschitz bound on the loss in the prediction argument; the grid
    /// slack of approximate minimizers scales with it.
    pub fn gamma_lipschitz(&self) -> f64 {
        match self {
            LossSpec::Absolute => 1.0,
            LossSpec::Quadratic => 2.0,
            LossSpec::Brier { .. } => 2.0 * 2.0f64.sqrt(),
            LossSpec::Cover { stocks, clamp, .. } => {
                clamp[1] / clamp[0] * (*stocks as f64).sqrt()
            }
        }
    }

    fn check_gamma(&self, gamma: &Gamma) -> Result<()> {
        match self {
            LossSpec::Absolute | LossSpec::Quadratic => {
                let g = gamma.as_scalar()?;
                if !(0.0..=1.0).contains(&g) {
                    return Err(Error::Domain(format!("prediction {g} outside [0, 1]")));
                }
            }
            LossSpec::Brier { classes } => {
                let g = gamma.as_vector()?;
                if g.len() != *classes {
                    return Err(Error::Domain(format!(
                        "prediction has {} entries, expected {classes}",
                        g.len()
                    )));
                }
                check_simplex(g)?;
            }
            LossSpec::Cover { stocks, .. } => {
                let g = gamma.as_vector()?;
                if g.len() != *stocks {
                    return Err(Error::Domain(format!(
                        "portfolio has {} entries, expected {stocks}",
                        g.len()
                    )));
                }
                check_simplex(g)?;
            }
        }
        Ok(())
    }

    /// Evaluates the loss lambda(x, gamma, y). The built-ins do not read x.
    pub fn loss(&self, _x: &[f64], gamma: &Gamma, y: usize) -> Result<f64> {
        if y >= self.classes() {
            return Err(Error::Input(format!(
                "class {y} out of range for {} classes",
                self.classes()
            )));
        }
        self.check_gamma(gamma)?;
        match self {
            LossSpec::Absolute => Ok((y as f64 - gamma.as_scalar()?).abs()),
            LossSpec::Quadratic => {
                let d = y as f64 - gamma.as_scalar()?;
                Ok(d * d)
            }
            LossSpec::Brier { .. } => {
                let g = gamma.as_vector()?;
                Ok(g.iter()
                    .enumerate()
                    .map(|(c, w)| {
                        let t = if c == y { w - 1.0 } else { *w };
                        t * t
                    })
                    .sum())
            }
            LossSpec::Cover { .. } => {
                let grid = self.observation_grid().expect("cover has a grid");
                let g = gamma.as_vector()?;
                let ret: f64 = g.iter().zip(&grid[y]).map(|(w, v)| w * v).sum();
                Ok(-ret.ln())
            }
        }
    }

    /// Center of the prediction space, the deterministic start of searches.
    pub fn gamma_center(&self) -> Gamma {
        match self {
            LossSpec::Absolute | LossSpec::Quadratic => Gamma::Scalar(0.5),
            LossSpec::Brier { classes } => {
                Gamma::Vector(vec![1.0 / *classes as f64; *classes])
            }
            LossSpec::Cover { stocks, .. } => {
                Gamma::Vector(vec![1.0 / *stocks as f64; *stocks])
            }
        }
    }
}

fn check_simplex(w: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &v in w {
        if !v.is_finite() || v < -1e-12 {
            return Err(Error::Domain(format!("weight {v} is negative")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Expected loss sum_y P(y) lambda(x, gamma, y).
pub fn expected_loss(loss: &LossSpec, x: &[f64], gamma: &Gamma, p: &Simplex) -> Result<f64> {
    if p.m() != loss.classes() {
        return Err(Error::Input(format!(
            "forecast has {} classes, loss expects {}",
            p.m(),
            loss.classes()
        )));
    }
    let mut acc = 0.0;
    for y in 0..p.m() {
        acc += p.weight(y) * loss.loss(x, gamma, y)?;
    }
    Ok(acc)
}

/// Continuous epsilon-approximate choice function.
///
/// Strictly convex losses use their exact minimizers; the absolute loss
/// takes a ramp through the bifurcation at P({1}) = 1/2 whose width shrinks
/// with epsilon; Cover's loss runs the multiplicative portfolio iteration
/// until its linearization gap certifies epsilon/4-suboptimality.
pub fn choice(loss: &LossSpec, x: &[f64], p: &Simplex, epsilon: f64) -> Result<Gamma> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Input(format!("epsilon {epsilon} must be positive")));
    }
    if p.m() != loss.classes() {
        return Err(Error::Input(format!(
            "forecast has {} classes, loss expects {}",
            p.m(),
            loss.classes()
        )));
    }
    let _ = x;
    match loss {
        LossSpec::Absolute => {
            let p1 = p.p1();
            let g = (0.5 + 2.0 * (2.0 * p1 - 1.0) / epsilon).clamp(0.0, 1.0);
            Ok(Gamma::Scalar(g))
        }
        LossSpec::Quadratic => Ok(Gamma::Scalar(p.p1())),
        LossSpec::Brier { .. } => Ok(Gamma::Vector(p.weights().to_vec())),
        LossSpec::Cover { stocks, .. } => {
            let grid = loss.observation_grid().expect("cover has a grid");
            let k = *stocks;
            let mut gamma = vec![1.0 / k as f64; k];
            let target = (epsilon / 4.0).max(1e-12);
            for _ in 0..3000 {
                // r_j = sum_y P(y) v_{y,j} / <gamma, v_y>; the fixed point of
                // gamma <- gamma * r is the log-optimal portfolio.
                let mut r = vec![0.0; k];
                for (y, v) in grid.iter().enumerate() {
                    let w = p.weight(y);
                    if w == 0.0 {
                        continue;
                    }
                    let ret: f64 = gamma.iter().zip(v).map(|(g, c)| g * c).sum();
                    for (rj, c) in r.iter_mut().zip(v) {
                        *rj += w * c / ret;
                    }
                }
                let gap = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0;
                if gap <= target {
                    break;
                }
                for (g, rj) in gamma.iter_mut().zip(&r) {
                    *g *= rj;
                }
                let sum: f64 = gamma.iter().sum();
                for g in gamma.iter_mut() {
                    *g /= sum;
                }
            }
            Ok(Gamma::Vector(gamma))
        }
    }
}

/// Brute-force grid minimizer of the expected loss; the reference that
/// approximate choice functions are checked against.
pub fn grid_minimum(
    loss: &LossSpec,
    x: &[f64],
    p: &Simplex,
    resolution: usize,
) -> Result<(Gamma, f64)> {
    let mut best: Option<(Gamma, f64)> = None;
    let mut consider = |g: Gamma, v: f64| {
        if best.as_ref().map(|(_, bv)| v < *bv).unwrap_or(true) {
            best = Some((g, v));
        }
    };
    match loss {
        LossSpec::Absolute | LossSpec::Quadratic => {
            for j in 0..=resolution {
                let g = Gamma::Scalar(j as f64 / resolution as f64);
                let v = expected_loss(loss, x, &g, p)?;
                consider(g, v);
            }
        }
        LossSpec::Brier { classes } => {
            for cand in solver::simplex_grid(*classes, resolution) {
                let g = Gamma::Vector(cand.weights().to_vec());
                let v = expected_loss(loss, x, &g, p)?;
                consider(g, v);
            }
        }
        LossSpec::Cover { stocks, .. } => {
            for cand in solver::simplex_grid(*stocks, resolution) {
                let g = Gamma::Vector(cand.weights().to_vec());
                let v = expected_loss(loss, x, &g, p)?;
                consider(g, v);
            }
        }
    }
    best.ok_or_else(|| Error::Input("empty prediction grid".into()))
}

/// Per-round slack schedule for the approximate choice functions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub loss: LossSpec,
    /// Lower cap for epsilon_n = 2^-n.
    #[serde(default = "default_epsilon_floor")]
    pub epsilon_floor: f64,
    /// Resolution of grid-based reference minimizers.
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: usize,
}

fn default_epsilon_floor() -> f64 {
    1e-12
}

fn default_gamma_grid() -> usize {
    128
}

impl DecisionConfig {
    pub fn new(loss: LossSpec) -> Result<Self> {
        loss.validate()?;
        Ok(DecisionConfig {
            loss,
            epsilon_floor: default_epsilon_floor(),
            gamma_grid: default_gamma_grid(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::Input("epsilon floor must be positive".into()));
        }
        Ok(())
    }

    /// epsilon_n = 2^-n, floored; n is the 1-based round index.
    pub fn epsilon_for_round(&self, n: u64) -> f64 {
        let e = 0.5f64.powi(n.min(4096) as i32);
        e.max(self.epsilon_floor)
    }
}

/// One realized master round.
#[derive(Debug, Clone)]
pub struct MasterRound {
    pub x: Vec<f64>,
    pub p: Simplex,
    pub gamma: Gamma,
    pub y: usize,
    pub psi0: f64,
}

/// Emitted forecast, prediction, and neutrality certificate.
#[derive(Debug, Clone)]
pub struct MasterStep {
    pub p: Simplex,
    pub gamma: Gamma,
    pub cert: f64,
    pub epsilon: f64,
}

/// Per-round bookkeeping returned by [`MasterState::observe`].
#[derive(Debug, Clone)]
pub struct MasterObservation {
    pub loss: f64,
    pub realized_gain: f64,
    pub psi0_abs: f64,
    pub psi1_norm: f64,
}

/// The competitive prediction engine of the decision layer.
///
/// Neutralizes the direct sum (unit weights) of the scalar loss-difference
/// map and the representer difference of a resolution kernel on (x, y); the
/// two components are carried as separate accumulators rather than one
/// composite kernel, which is algebraically the same direct sum.
#[derive(Debug, Clone)]
pub struct MasterState {
    kernel: KernelSpec,
    config: DecisionConfig,
    m: usize,
    tol_neutral: f64,
    history: Vec<MasterRound>,
    s0: f64,
    gram_cross: f64,
    gram_diag: f64,
}

impl MasterState {
    pub fn new(kernel: KernelSpec, config: DecisionConfig) -> Result<Self> {
        kernel.validate()?;
        config.validate()?;
        if !kernel.ignores_forecast() {
            return Err(Error::Config(
                "decision mode needs a kernel on (x, y) only; use a product kernel \
                 without a p-factor"
                    .into(),
            ));
        }
        let m = config.loss.classes();
        Ok(MasterState {
            kernel,
            config,
            m,
            tol_neutral: crate::forecaster::DEFAULT_TOL_NEUTRAL,
            history: Vec::new(),
            s0: 0.0,
            gram_cross: 0.0,
            gram_diag: 0.0,
        })
    }

    pub fn with_tolerance(mut self, tol_neutral: f64) -> Result<Self> {
        if !(tol_neutral > 0.0) {
            return Err(Error::Input("tolerance must be positive".into()));
        }
        self.tol_neutral = tol_neutral;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn loss(&self) -> &LossSpec {
        &self.config.loss
    }

    pub fn config(&self) -> &DecisionConfig {
        &self.config
    }

    /// Accumulated loss-deviation sum; the specific-calibration statistic.
    pub fn psi0_sum(&self) -> f64 {
        self.s0
    }

    /// Merged quadratic capital S_N.
    pub fn capital(&self) -> f64 {
        self.gram_cross - self.gram_diag
    }

    /// RKHS-component gains R(v); independent of the candidate forecast
    /// because the kernel ignores the forecast slot.
    fn rkhs_profile(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.m;
        let mut acc = vec![0.0; m];
        let mut block = vec![0.0; m * m];
        let placeholder = Simplex::uniform(m);
        for round in &self.history {
            self.kernel.eval_block(
                &round.x,
                round.p.weights(),
                x,
                placeholder.weights(),
                m,
                &mut block,
            )?;
            for v in 0..m {
                let mut t = block[round.y * m + v];
                for u in 0..m {
                    t -= round.p.weight(u) * block[u * m + v];
                }
                acc[v] += t;
            }
        }
        Ok(acc)
    }

    fn merged_profile(
        &self,
        x: &[f64],
        p: &Simplex,
        rkhs: &[f64],
        epsilon: f64,
    ) -> Result<(Vec<f64>, Gamma)> {
        let gamma = choice(&self.config.loss, x, p, epsilon)?;
        let m = self.m;
        let mut losses = vec![0.0; m];
        for (y, l) in losses.iter_mut().enumerate() {
            *l = self.config.loss.loss(x, &gamma, y)?;
        }
        let lbar: f64 = (0..m).map(|y| p.weight(y) * losses[y]).sum();
        let rbar: f64 = (0..m).map(|y| p.weight(y) * rkhs[y]).sum();
        let profile = (0..m)
            .map(|y| 2.0 * self.s0 * (losses[y] - lbar) + 2.0 * (rkhs[y] - rbar))
            .collect();
        Ok((profile, gamma))
    }

    /// Runs one master round: a forecast neutralizing the merged gain and
    /// the epsilon_n-approximate prediction at that forecast.
    pub fn predict(&self, x: &[f64]) -> Result<MasterStep> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("datum contains non-finite coordinates".into()));
        }
        let n = self.history.len() as u64 + 1;
        let epsilon = self.config.epsilon_for_round(n);
        let rkhs = self.rkhs_profile(x)?;
        let p = solver::minimize_max_gain(self.m, self.tol_neutral, |cand| {
            let (profile, _) = self.merged_profile(x, cand, &rkhs, epsilon)?;
            Ok(profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        })
        .map_err(|e| match e {
            Error::SolverFailure(msg) => Error::SolverFailure(format!("round {n}: {msg}")),
            other => other,
        })?;
        let (profile, gamma) = self.merged_profile(x, &p, &rkhs, epsilon)?;
        let cert = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(MasterStep {
            p,
            gamma,
            cert,
            epsilon,
        })
    }

    /// ||Psi_1(x, P, y)||^2 for the resolution kernel.
    fn psi1_norm2(&self, x: &[f64], p: &Simplex, y: usize) -> Result<f64> {
        let m = self.m;
        let mut block = vec![0.0; m * m];
        self.kernel
            .eval_block(x, p.weights(), x, p.weights(), m, &mut block)?;
        let kyy = block[y * m + y];
        let cross: f64 = (0..m).map(|u| p.weight(u) * block[u * m + y]).sum();
        let mut quad = 0.0;
        for u in 0..m {
            for v in 0..m {
                quad += p.weight(u) * p.weight(v) * block[u * m + v];
            }
        }
        Ok(kyy - 2.0 * cross + quad)
    }

    /// Records the realized round and updates the merged Gram accumulators.
    pub fn observe(&mut self, x: &[f64], p: &Simplex, gamma: &Gamma, y: usize) -> Result<MasterObservation> {
        if y >= self.m {
            return Err(Error::Input(format!("class {y} out of range for m={}", self.m)));
        }
        let loss_y = self.config.loss.loss(x, gamma, y)?;
        let lbar = expected_loss(&self.config.loss, x, gamma, p)?;
        let psi0 = loss_y - lbar;

        let rkhs = self.rkhs_profile(x)?;
        let rbar: f64 = (0..self.m).map(|v| p.weight(v) * rkhs[v]).sum();
        let realized_gain = 2.0 * self.s0 * psi0 + 2.0 * (rkhs[y] - rbar);

        let psi1_sq = self.psi1_norm2(x, p, y)?;
        let diag = psi0 * psi0 + psi1_sq;
        self.gram_cross += realized_gain + diag;
        self.gram_diag += diag;
        self.s0 += psi0;
        self.history.push(MasterRound {
            x: x.to_vec(),
            p: p.clone(),
            gamma: gamma.clone(),
            y,
            psi0,
        });
        Ok(MasterObservation {
            loss: loss_y,
            realized_gain,
            psi0_abs: psi0.abs(),
            psi1_norm: psi1_sq.max(0.0).sqrt(),
        })
    }
}

/// Free-function form of one master round: forecast plus prediction.
pub fn master_predict_step(state: &MasterState, x: &[f64]) -> Result<(Simplex, Gamma)> {
    let step = state.predict(x)?;
    Ok((step.p, step.gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::YFactor;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn xy_kernel() -> KernelSpec {
        KernelSpec::Product {
            x_factor: Some(Box::new(KernelSpec::gaussian(1.0))),
            p_factor: None,
            y_factor: YFactor::Kronecker,
        }
    }

    #[test]
    fn expected_loss_examples() {
        let p_mass = Simplex::point_mass(2, 1);
        let v = expected_loss(&LossSpec::Absolute, &[], &Gamma::Scalar(1.0), &p_mass).unwrap();
        assert_eq!(v, 0.0);

        let p = Simplex::binary(0.7).unwrap();
        let v = expected_loss(&LossSpec::Absolute, &[], &Gamma::Scalar(0.3), &p).unwrap();
        assert!((v - 0.58).abs() < 1e-12);

        let v = expected_loss(&LossSpec::Quadratic, &[], &Gamma::Scalar(0.7), &p).unwrap();
        assert!((v - 0.21).abs() < 1e-12);
    }

    #[test]
    fn gamma_outside_space_is_domain_error() {
        let p = Simplex::binary(0.5).unwrap();
        assert!(matches!(
            expected_loss(&LossSpec::Absolute, &[], &Gamma::Scalar(1.2), &p),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn choice_examples() {
        let p7 = Simplex::binary(0.7).unwrap();
        let g = choice(&LossSpec::Absolute, &[], &p7, 0.5).unwrap();
        assert_eq!(g.as_scalar().unwrap(), 1.0);

        let p2 = Simplex::binary(0.2).unwrap();
        let g = choice(&LossSpec::Absolute, &[], &p2, 0.5).unwrap();
        assert_eq!(g.as_scalar().unwrap(), 0.0);

        let p5 = Simplex::binary(0.5).unwrap();
        let g = choice(&LossSpec::Absolute, &[], &p5, 0.25).unwrap();
        assert_eq!(g.as_scalar().unwrap(), 0.5);

        let g = choice(&LossSpec::Quadratic, &[], &p7, 1e-6).unwrap();
        assert_eq!(g.as_scalar().unwrap(), 0.7);

        // Constant expected loss at p = 1/2: hand-verify over a scan.
        for j in 0..=10 {
            let gamma = Gamma::Scalar(j as f64 / 10.0);
            let v = expected_loss(&LossSpec::Absolute, &[], &gamma, &p5).unwrap();
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn brier_choice_is_the_forecast() {
        let p = Simplex::normalized(vec![0.2, 0.5, 0.3]).unwrap();
        let g = choice(&LossSpec::Brier { classes: 3 }, &[], &p, 1e-9).unwrap();
        assert_eq!(g.as_vector().unwrap(), p.weights());
    }

    #[test]
    fn cover_choice_meets_epsilon_contract() {
        let loss = LossSpec::Cover {
            stocks: 2,
            clamp: [0.5, 2.0],
            grid: None,
        };
        let m = loss.classes();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = Simplex::normalized((0..m).map(|_| rng.random_range(0.01..1.0)).collect())
                .unwrap();
            let eps = 0.5f64.powi(rng.random_range(1..20));
            let g = choice(&loss, &[], &p, eps).unwrap();
            let achieved = expected_loss(&loss, &[], &g, &p).unwrap();
            let (_, grid_min) = grid_minimum(&loss, &[], &p, 200).unwrap();
            let slack = loss.gamma_lipschitz() * (2.0 / 200.0);
            assert!(
                achieved <= grid_min + eps + slack,
                "achieved {achieved} grid {grid_min} eps {eps}"
            );
        }
    }

    #[test]
    fn builtin_losses_are_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // 1-D losses.
        for loss in [LossSpec::Absolute, LossSpec::Quadratic] {
            for _ in 0..500 {
                let a = rng.random_range(0.0..1.0);
                let b = rng.random_range(0.0..1.0);
                let y = rng.random_range(0..2);
                let la = loss.loss(&[], &Gamma::Scalar(a), y).unwrap();
                let lb = loss.loss(&[], &Gamma::Scalar(b), y).unwrap();
                let lm = loss
                    .loss(&[], &Gamma::Scalar(0.5 * (a + b)), y)
                    .unwrap();
                assert!(lm <= 0.5 * (la + lb) + 1e-12);
            }
        }
        // Simplex-valued losses.
        let cover = LossSpec::Cover {
            stocks: 3,
            clamp: [0.5, 2.0],
            grid: None,
        };
        let brier = LossSpec::Brier { classes: 3 };
        for loss in [brier, cover] {
            let dim = match &loss {
                LossSpec::Brier { classes } => *classes,
                LossSpec::Cover { stocks, .. } => *stocks,
                _ => unreachable!(),
            };
            for _ in 0..300 {
                let a = Simplex::normalized((0..dim).map(|_| rng.random_range(0.01..1.0)).collect())
                    .unwrap();
                let b = Simplex::normalized((0..dim).map(|_| rng.random_range(0.01..1.0)).collect())
                    .unwrap();
                let mid: Vec<f64> = a
                    .weights()
                    .iter()
                    .zip(b.weights())
                    .map(|(u, v)| 0.5 * (u + v))
                    .collect();
                let y = rng.random_range(0..loss.classes());
                let la = loss.loss(&[], &Gamma::Vector(a.weights().to_vec()), y).unwrap();
                let lb = loss.loss(&[], &Gamma::Vector(b.weights().to_vec()), y).unwrap();
                let lm = loss.loss(&[], &Gamma::Vector(mid), y).unwrap();
                assert!(lm <= 0.5 * (la + lb) + 1e-12);
            }
        }
    }

    #[test]
    fn cover_losses_stay_within_declared_oscillation() {
        let loss = LossSpec::Cover {
            stocks: 3,
            clamp: [0.5, 2.0],
            grid: None,
        };
        let bound = (2.0f64 / 0.5).ln() + 3.0f64.ln();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..2000 {
            let g = Simplex::normalized((0..3).map(|_| rng.random_range(0.01..1.0)).collect())
                .unwrap();
            let y = rng.random_range(0..loss.classes());
            let v = loss
                .loss(&[], &Gamma::Vector(g.weights().to_vec()), y)
                .unwrap();
            assert!(v.is_finite());
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(hi - lo <= bound, "oscillation {} bound {bound}", hi - lo);
        assert!(loss.c_lambda() <= bound);
    }

    #[test]
    fn first_master_round_is_uniform_and_centered() {
        let config = DecisionConfig::new(LossSpec::Absolute).unwrap();
        let state = MasterState::new(xy_kernel(), config).unwrap();
        let step = state.predict(&[0.0]).unwrap();
        assert_eq!(step.p.weights(), &[0.5, 0.5]);
        assert_eq!(step.gamma.as_scalar().unwrap(), 0.5);
        assert_eq!(step.cert, 0.0);
    }

    #[test]
    fn master_rounds_neutralize_and_emit_valid_predictions() {
        let config = DecisionConfig::new(LossSpec::Absolute).unwrap();
        let mut state = MasterState::new(xy_kernel(), config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..25 {
            let x = vec![rng.random_range(-1.0..1.0)];
            let step = state.predict(&x).unwrap();
            assert!(step.cert <= 1e-6, "cert {}", step.cert);
            let g = step.gamma.as_scalar().unwrap();
            assert!((0.0..=1.0).contains(&g));
            let y = usize::from(rng.random_bool(0.5));
            state.observe(&x, &step.p, &step.gamma, y).unwrap();
        }
    }

    #[test]
    fn specific_calibration_bound_holds_on_a_run() {
        let config = DecisionConfig::new(LossSpec::Absolute).unwrap();
        let mut state = MasterState::new(xy_kernel(), config).unwrap();
        let c_lambda = state.loss().c_lambda();
        let c_f = state.kernel().imbedding_constant().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let n = 60;
        for _ in 0..n {
            let x = vec![rng.random_range(-1.0..1.0)];
            let step = state.predict(&x).unwrap();
            let y = usize::from(rng.random_bool(0.65));
            let obs = state.observe(&x, &step.p, &step.gamma, y).unwrap();
            assert!(obs.psi0_abs <= c_lambda + 1e-12);
            assert!(obs.psi1_norm <= 2.0 * c_f + 1e-9);
        }
        let bound =
            (c_lambda * c_lambda + 4.0 * c_f * c_f).sqrt() * (n as f64).sqrt() + n as f64 * 1e-6;
        assert!(state.psi0_sum().abs() <= bound);
        assert!(state.capital() <= n as f64 * 1e-6);
    }
}
