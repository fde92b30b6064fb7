//! The defensive-forecasting engine.
//!
//! Each round the Skeptic's prescribed strategy bets the kernel gain
//! `g(y, P) = <A, Psi(x, P, y)>` with `A = 2 sum_i Psi(x_i, P_i, y_i)` and
//! `Psi(x, P, y) = Phi(x, P, y) - sum_y' P(y') Phi(x, P, y')`, expanded into
//! finite kernel sums. The forecaster answers with a `P` at which the gain is
//! non-positive for every possible outcome, so the Skeptic's capital never
//! grows past the neutralization tolerance.

use crate::error::{Error, Result};
use crate::kernel::{ForecastPoint, KernelSpec, Simplex, YFactor};
use crate::solver;

pub const DEFAULT_TOL_NEUTRAL: f64 = 1e-6;
pub const DEFAULT_BINARY_TOL: f64 = 1e-9;

/// History plus cached Gram sums for one run of the forecasting protocol.
#[derive(Debug, Clone)]
pub struct ForecastState {
    spec: KernelSpec,
    m: usize,
    tol_neutral: f64,
    binary_tol: f64,
    history: Vec<ForecastPoint>,
    // Running ||sum Psi_i||^2 and sum ||Psi_i||^2 over realized rounds.
    gram_cross: f64,
    gram_diag: f64,
}

/// A forecast together with its neutrality certificate `max_y g(y, P)`.
#[derive(Debug, Clone)]
pub struct CertifiedForecast {
    pub forecast: Simplex,
    pub cert: f64,
}

/// Product-kernel decomposition used by the binary root-finder.
struct BinaryParts<'a> {
    scale: f64,
    x_factor: Option<&'a KernelSpec>,
    p_factor: Option<&'a KernelSpec>,
    y_factor: &'a YFactor,
}

impl<'a> BinaryParts<'a> {
    fn of(spec: &'a KernelSpec) -> Option<Self> {
        match spec {
            KernelSpec::Product {
                x_factor,
                p_factor,
                y_factor,
            } => Some(BinaryParts {
                scale: 1.0,
                x_factor: x_factor.as_deref(),
                p_factor: p_factor.as_deref(),
                y_factor,
            }),
            KernelSpec::Scaled { factor, inner } => {
                let mut parts = BinaryParts::of(inner)?;
                parts.scale *= factor;
                Some(parts)
            }
            _ => None,
        }
    }

    /// Gain per unit of (y - p) * S(p); positive for every supported factor.
    fn gain_scale(&self) -> f64 {
        match self.y_factor {
            YFactor::SignedResidual => 2.0,
            YFactor::Kronecker => 4.0,
            YFactor::OneHotGaussian { sigma } => 4.0 * (1.0 - (-2.0 / (sigma * sigma)).exp()),
        }
    }
}

impl ForecastState {
    pub fn new(spec: KernelSpec, m: usize) -> Result<Self> {
        spec.validate()?;
        if m < 2 {
            return Err(Error::Input(format!("class count {m} must be at least 2")));
        }
        Ok(ForecastState {
            spec,
            m,
            tol_neutral: DEFAULT_TOL_NEUTRAL,
            binary_tol: DEFAULT_BINARY_TOL,
            history: Vec::new(),
            gram_cross: 0.0,
            gram_diag: 0.0,
        })
    }

    pub fn with_tolerances(mut self, tol_neutral: f64, binary_tol: f64) -> Result<Self> {
        if !(tol_neutral > 0.0) || !(binary_tol > 0.0) {
            return Err(Error::Input("tolerances must be positive".into()));
        }
        self.tol_neutral = tol_neutral;
        self.binary_tol = binary_tol;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn history(&self) -> &[ForecastPoint] {
        &self.history
    }

    pub fn tol_neutral(&self) -> f64 {
        self.tol_neutral
    }

    pub fn binary_tol(&self) -> f64 {
        self.binary_tol
    }

    fn check_candidate(&self, x: &[f64], p: &Simplex) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("datum contains non-finite coordinates".into()));
        }
        if p.m() != self.m {
            return Err(Error::Input(format!(
                "forecast has {} classes, state expects {}",
                p.m(),
                self.m
            )));
        }
        if let Some(first) = self.history.first() {
            if first.x.len() != x.len() {
                return Err(Error::Input(format!(
                    "datum dimension {} does not match history dimension {}",
                    x.len(),
                    first.x.len()
                )));
            }
        }
        Ok(())
    }

    /// Skeptic gain `g(y, P)` for every class at the candidate `(x, P)`.
    pub fn gain_profile(&self, x: &[f64], p: &Simplex) -> Result<Vec<f64>> {
        self.check_candidate(x, p)?;
        let m = self.m;
        let mut acc = vec![0.0; m];
        let mut block = vec![0.0; m * m];
        for fp in &self.history {
            self.spec
                .eval_block(&fp.x, fp.p.weights(), x, p.weights(), m, &mut block)?;
            for v in 0..m {
                let mut t = block[fp.y * m + v];
                for u in 0..m {
                    t -= fp.p.weight(u) * block[u * m + v];
                }
                acc[v] += t;
            }
        }
        let mean: f64 = (0..m).map(|v| p.weight(v) * acc[v]).sum();
        Ok((0..m).map(|v| 2.0 * (acc[v] - mean)).collect())
    }

    /// Skeptic gain at a single outcome.
    pub fn neutrality_gain(&self, x: &[f64], p: &Simplex, y: usize) -> Result<f64> {
        if y >= self.m {
            return Err(Error::Input(format!("class {y} out of range for m={}", self.m)));
        }
        Ok(self.gain_profile(x, p)?[y])
    }

    /// `||Psi(x, P, y)||^2` from the kernel block at `(x, P)`.
    fn psi_norm2(&self, x: &[f64], p: &Simplex, y: usize) -> Result<f64> {
        let m = self.m;
        let mut block = vec![0.0; m * m];
        self.spec
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

    /// Appends a realized round and refreshes the cached Gram sums with
    /// O(n m^2) kernel evaluations.
    pub fn observe(&mut self, x: &[f64], p: &Simplex, y: usize) -> Result<()> {
        if y >= self.m {
            return Err(Error::Input(format!("class {y} out of range for m={}", self.m)));
        }
        self.check_candidate(x, p)?;
        let gain = self.gain_profile(x, p)?[y];
        let diag = self.psi_norm2(x, p, y)?;
        self.gram_cross += gain + diag;
        self.gram_diag += diag;
        self.history
            .push(ForecastPoint::new(x.to_vec(), p.clone(), y)?);
        Ok(())
    }

    /// The Skeptic's quadratic capital `S_N = ||sum Psi||^2 - sum ||Psi||^2`
    /// accumulated over the observed rounds.
    pub fn capital(&self) -> f64 {
        self.gram_cross - self.gram_diag
    }

    /// Cached `(||sum Psi||^2, sum ||Psi||^2)`.
    pub fn gram_sums(&self) -> (f64, f64) {
        (self.gram_cross, self.gram_diag)
    }

    /// Produces a forecast neutralizing the Skeptic gain for the new datum.
    pub fn defensive_forecast(&self, x: &[f64]) -> Result<Simplex> {
        Ok(self.forecast_with_cert(x)?.forecast)
    }

    /// Forecast plus the achieved `max_y g(y, P)` certificate.
    pub fn forecast_with_cert(&self, x: &[f64]) -> Result<CertifiedForecast> {
        self.check_candidate(x, &Simplex::uniform(self.m))?;
        if self.m == 2 {
            if let Some(parts) = BinaryParts::of(&self.spec) {
                let (p, s_at_p) = self.k29_root_inner(x, &parts)?;
                let kappa = parts.gain_scale();
                let cert = (kappa * (1.0 - p) * s_at_p).max(-kappa * p * s_at_p);
                return Ok(CertifiedForecast {
                    forecast: Simplex::binary(p)?,
                    cert,
                });
            }
        }
        let solution = solver::minimize_max_gain(self.m, self.tol_neutral, |cand| {
            let g = self.gain_profile(x, cand)?;
            Ok(g.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        })
        .map_err(|e| match e {
            Error::SolverFailure(msg) => {
                Error::SolverFailure(format!("round {}: {msg}", self.history.len() + 1))
            }
            other => other,
        })?;
        let cert = self
            .gain_profile(x, &solution)?
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(CertifiedForecast {
            forecast: solution,
            cert,
        })
    }

    /// Binary K29 specialization: the root of
    /// `S(p) = sum_i K((x_i, p_i), (x, p)) (y_i - p_i)`,
    /// or the boundary forecast when S keeps one sign on all of [0, 1].
    pub fn k29_binary_root(&self, x: &[f64]) -> Result<f64> {
        if self.m != 2 {
            return Err(Error::Input(format!(
                "binary root-finder needs m = 2, state has m = {}",
                self.m
            )));
        }
        let parts = BinaryParts::of(&self.spec).ok_or_else(|| {
            Error::Input("binary root-finder needs a product-form kernel".into())
        })?;
        self.check_candidate(x, &Simplex::uniform(2))?;
        Ok(self.k29_root_inner(x, &parts)?.0)
    }

    fn k29_root_inner(&self, x: &[f64], parts: &BinaryParts<'_>) -> Result<(f64, f64)> {
        // Datum factors do not depend on the candidate; fold them into the
        // per-round coefficients once.
        let mut coeffs = Vec::with_capacity(self.history.len());
        for fp in &self.history {
            let kx = match parts.x_factor {
                Some(f) => f.eval_vec(&fp.x, x)?,
                None => 1.0,
            };
            coeffs.push(parts.scale * kx * (fp.y as f64 - fp.p.p1()));
        }
        let s = |p: f64| -> Result<f64> {
            let pw = [1.0 - p, p];
            let mut acc = 0.0;
            for (fp, c) in self.history.iter().zip(&coeffs) {
                let kp = match parts.p_factor {
                    Some(f) => f.eval_vec(fp.p.weights(), &pw)?,
                    None => 1.0,
                };
                acc += c * kp;
            }
            Ok(acc)
        };

        const SCAN: usize = 64;
        let mut vals = [0.0; SCAN + 1];
        for (j, v) in vals.iter_mut().enumerate() {
            *v = s(j as f64 / SCAN as f64)?;
        }

        // Grid points already inside tolerance, midpoint-most first.
        let mut at: Option<usize> = None;
        for (j, v) in vals.iter().enumerate() {
            if v.abs() <= self.binary_tol {
                let better = match at {
                    None => true,
                    Some(b) => {
                        let (db, dj) = (
                            (b as f64 / SCAN as f64 - 0.5).abs(),
                            (j as f64 / SCAN as f64 - 0.5).abs(),
                        );
                        dj < db
                    }
                };
                if better {
                    at = Some(j);
                }
            }
        }
        if let Some(j) = at {
            let p = j as f64 / SCAN as f64;
            return Ok((p, vals[j]));
        }

        // Sign-change brackets, midpoint-most first.
        let mut bracket: Option<usize> = None;
        for j in 0..SCAN {
            if vals[j] * vals[j + 1] <= 0.0 {
                let better = match bracket {
                    None => true,
                    Some(b) => {
                        let mid_b = (b as f64 + 0.5) / SCAN as f64;
                        let mid_j = (j as f64 + 0.5) / SCAN as f64;
                        (mid_j - 0.5).abs() < (mid_b - 0.5).abs()
                    }
                };
                if better {
                    bracket = Some(j);
                }
            }
        }
        let Some(j) = bracket else {
            // One sign everywhere: the boundary forecast neutralizes exactly.
            return if vals[0] > 0.0 {
                Ok((1.0, vals[SCAN]))
            } else {
                Ok((0.0, vals[0]))
            };
        };

        let mut lo = j as f64 / SCAN as f64;
        let mut hi = (j + 1) as f64 / SCAN as f64;
        let mut f_lo = vals[j];
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = s(mid)?;
            if fm.abs() <= self.binary_tol {
                return Ok((mid, fm));
            }
            if (fm > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        Err(Error::SolverFailure(format!(
            "round {}: bisection bracket collapsed without meeting |S| <= {:.1e}; \
             the kernel is not forecast-continuous",
            self.history.len() + 1,
            self.binary_tol
        )))
    }
}
