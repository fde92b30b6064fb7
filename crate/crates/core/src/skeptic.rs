//! Game-theoretic testing of forecasts.
//!
//! A Skeptic strategy announces a bet f_n with non-positive expectation
//! under the forecast each round; his capital K_n = K_{n-1} + f_n(y_n) grows
//! only when forecasts disagree with outcomes. Three built-ins: the
//! multiplicative strong-law strategy, the quadratic kernel statistic S_N,
//! and the non-negative mixture that forces the O(sqrt(N) log N) rate.

use crate::error::{Error, Result};
use crate::forecaster::ForecastState;
use crate::kernel::{KernelSpec, Simplex};

/// pi^2 / 6, the mixture Skeptic's initial capital.
pub const BASEL: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// Strong-law Skeptic: the mean of 16 multiplicative accounts
/// K^eps_n = K^eps_{n-1} (1 + eps (y_n - p_n)) over eps = +/- 2^-k, k=1..8.
///
/// Each account stays positive because |eps (y - p)| < 1, so the strategy
/// never risks bankruptcy; it grows without bound on streams violating the
/// strong law of large numbers.
#[derive(Debug, Clone)]
pub struct SllnSkeptic {
    accounts: Vec<(f64, f64)>,
}

impl Default for SllnSkeptic {
    fn default() -> Self {
        Self::new()
    }
}

impl SllnSkeptic {
    pub fn new() -> Self {
        let mut accounts = Vec::with_capacity(16);
        for k in 1..=8 {
            let eps = 0.5f64.powi(k);
            accounts.push((eps, 1.0));
            accounts.push((-eps, 1.0));
        }
        SllnSkeptic { accounts }
    }

    pub fn capital(&self) -> f64 {
        self.accounts.iter().map(|(_, c)| c).sum::<f64>() / self.accounts.len() as f64
    }

    /// The bet f_n(y) for y in {0, 1} at forecast P.
    pub fn bet(&self, p: &Simplex) -> Result<[f64; 2]> {
        if p.m() != 2 {
            return Err(Error::Input("slln skeptic is binary-only".into()));
        }
        let p1 = p.p1();
        let mut f = [0.0, 0.0];
        for (eps, cap) in &self.accounts {
            f[0] += cap * eps * (0.0 - p1);
            f[1] += cap * eps * (1.0 - p1);
        }
        f[0] /= self.accounts.len() as f64;
        f[1] /= self.accounts.len() as f64;
        Ok(f)
    }

    pub fn step(&mut self, p: &Simplex, y: usize) -> Result<f64> {
        if p.m() != 2 || y > 1 {
            return Err(Error::Input("slln skeptic is binary-only".into()));
        }
        let p1 = p.p1();
        for (eps, cap) in self.accounts.iter_mut() {
            *cap *= 1.0 + *eps * (y as f64 - p1);
        }
        Ok(self.capital())
    }
}

/// Quadratic kernel Skeptic: the signed statistic
/// S_N = ||sum Psi_n||^2 - sum ||Psi_n||^2 over the observed rounds,
/// updated by the inner-product increment <A, Psi_N>.
///
/// Not a bankruptcy-free account; reported as a test statistic.
#[derive(Debug, Clone)]
pub struct QuadraticSkeptic {
    state: ForecastState,
}

impl QuadraticSkeptic {
    pub fn new(kernel: KernelSpec, m: usize) -> Result<Self> {
        Ok(QuadraticSkeptic {
            state: ForecastState::new(kernel, m)?,
        })
    }

    pub fn capital(&self) -> f64 {
        self.state.capital()
    }

    /// The bet profile f_n(y) = <A, Psi(x, P, y)> for all y.
    pub fn bet_profile(&self, x: &[f64], p: &Simplex) -> Result<Vec<f64>> {
        self.state.gain_profile(x, p)
    }

    pub fn step(&mut self, x: &[f64], p: &Simplex, y: usize) -> Result<f64> {
        self.state.observe(x, p, y)?;
        Ok(self.capital())
    }

    pub fn rounds(&self) -> usize {
        self.state.len()
    }
}

/// Mixture Skeptic over doubling capital levels:
/// S*_N = sum_k k^-2 2^-k S^k_N with S^k_N = 2^k + S_N while c^2 N <= 2^k
/// and frozen at its last value afterwards. Non-negative, initial capital
/// pi^2/6; levels above `k_max` contribute their initial value, summed
/// analytically.
#[derive(Debug, Clone)]
pub struct MixtureSkeptic {
    quad: QuadraticSkeptic,
    c_squared: f64,
    k_max: u32,
    frozen: Vec<Option<f64>>,
    rounds: u64,
    partial_basel: f64,
    tail: f64,
}

impl MixtureSkeptic {
    /// `c` bounds ||Psi|| along the path; use 2 c_F for a kernel with
    /// imbedding constant c_F, or c_lambda for the loss component.
    pub fn new(kernel: KernelSpec, m: usize, c: f64) -> Result<Self> {
        Self::with_levels(kernel, m, c, 64)
    }

    pub fn with_levels(kernel: KernelSpec, m: usize, c: f64, k_max: u32) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Input(format!("mixture constant {c} must be positive")));
        }
        if k_max == 0 || k_max > 1000 {
            return Err(Error::Input(format!("level cap {k_max} out of range")));
        }
        let mut partial_basel = 0.0;
        for k in 1..=k_max {
            partial_basel += 1.0 / (k as f64 * k as f64);
        }
        Ok(MixtureSkeptic {
            quad: QuadraticSkeptic::new(kernel, m)?,
            c_squared: c * c,
            k_max,
            frozen: vec![None; k_max as usize],
            rounds: 0,
            partial_basel,
            tail: BASEL - partial_basel,
        })
    }

    fn level(&self, k: u32) -> f64 {
        match self.frozen[(k - 1) as usize] {
            Some(v) => v,
            None => 2.0f64.powi(k as i32) + self.quad.capital(),
        }
    }

    pub fn capital(&self) -> f64 {
        let mut acc = 0.0;
        for k in 1..=self.k_max {
            let kf = k as f64;
            acc += self.level(k) / (kf * kf) * 0.5f64.powi(k as i32);
        }
        acc + self.tail
    }

    /// Value of level k, exposed for replay checks.
    pub fn level_value(&self, k: u32) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::Input(format!("level {k} out of range")));
        }
        Ok(self.level(k))
    }

    pub fn is_frozen(&self, k: u32) -> bool {
        self.frozen
            .get((k - 1) as usize)
            .map(|f| f.is_some())
            .unwrap_or(false)
    }

    /// The bet profile; frozen levels contribute nothing.
    pub fn bet_profile(&self, x: &[f64], p: &Simplex) -> Result<Vec<f64>> {
        let base = self.quad.bet_profile(x, p)?;
        let next = self.rounds + 1;
        let mut weight = 0.0;
        for k in 1..=self.k_max {
            let live_now = self.frozen[(k - 1) as usize].is_none()
                && self.c_squared * next as f64 <= 2.0f64.powi(k as i32);
            if live_now {
                let kf = k as f64;
                weight += 1.0 / (kf * kf) * 0.5f64.powi(k as i32);
            }
        }
        Ok(base.into_iter().map(|g| weight * g).collect())
    }

    pub fn step(&mut self, x: &[f64], p: &Simplex, y: usize) -> Result<f64> {
        let n = self.rounds + 1;
        // A level freezes at the first round where c^2 N exceeds it,
        // retaining the value built on S_{N-1}.
        for k in 1..=self.k_max {
            let idx = (k - 1) as usize;
            if self.frozen[idx].is_none() && self.c_squared * n as f64 > 2.0f64.powi(k as i32) {
                self.frozen[idx] = Some(2.0f64.powi(k as i32) + self.quad.capital());
            }
        }
        self.quad.step(x, p, y)?;
        self.rounds = n;
        Ok(self.capital())
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }
}
