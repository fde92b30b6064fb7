//! Forecast-continuous kernels on (datum, forecast, observation) triples.
//!
//! A point of the kernel's domain is a [`ForecastPoint`]: a datum `x`, a
//! probability forecast `p` over `m` classes, and an observed class `y`.
//! Points are embedded in Euclidean space by concatenating `x`, the simplex
//! weights of `p`, and a one-hot encoding of `y`; the Gaussian and infinite
//! polynomial kernels act on that embedding, while product kernels evaluate
//! per-slot factors and multiply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the simplex sum-to-one invariant.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A probability forecast over `m` observation classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Simplex {
    weights: Vec<f64>,
}

impl Simplex {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Input(format!(
                "simplex needs at least 2 classes, got {}",
                weights.len()
            )));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Input(format!("simplex weight {w} is invalid")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Input(format!("simplex weights sum to {sum}, not 1")));
        }
        Ok(Simplex { weights })
    }

    /// Builds a simplex from non-negative weights by dividing out their sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::Input(format!("cannot normalize weights with sum {sum}")));
        }
        Simplex::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(m: usize) -> Self {
        Simplex {
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn point_mass(m: usize, y: usize) -> Self {
        let mut weights = vec![0.0; m];
        weights[y] = 1.0;
        Simplex { weights }
    }

    /// Binary simplex `[1-p, p]` with `p` the class-1 probability.
    pub fn binary(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Input(format!("binary forecast {p} outside [0,1]")));
        }
        Ok(Simplex {
            weights: vec![1.0 - p, p],
        })
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, class: usize) -> f64 {
        self.weights[class]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Class-1 probability; the scalar forecast of the binary protocols.
    pub fn p1(&self) -> f64 {
        self.weights[1]
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

/// A realized (datum, forecast, observation) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub x: Vec<f64>,
    pub p: Simplex,
    pub y: usize,
}

impl ForecastPoint {
    pub fn new(x: Vec<f64>, p: Simplex, y: usize) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("datum contains non-finite coordinates".into()));
        }
        if y >= p.m() {
            return Err(Error::Input(format!("class {y} out of range for m={}", p.m())));
        }
        Ok(ForecastPoint { x, p, y })
    }
}

/// Observation-slot factor of a product kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum YFactor {
    /// Kronecker delta on classes.
    Kronecker,
    /// Gaussian on one-hot encodings: exp(-2(1-delta)/sigma^2).
    OneHotGaussian { sigma: f64 },
    /// Binary K29 residual factor (y - p)(y' - p'), m = 2 only.
    SignedResidual,
}

impl YFactor {
    fn eval(&self, pa: &[f64], ya: usize, pb: &[f64], yb: usize) -> Result<f64> {
        match self {
            YFactor::Kronecker => Ok(if ya == yb { 1.0 } else { 0.0 }),
            YFactor::OneHotGaussian { sigma } => {
                if ya == yb {
                    Ok(1.0)
                } else {
                    Ok((-2.0 / (sigma * sigma)).exp())
                }
            }
            YFactor::SignedResidual => {
                if pa.len() != 2 || pb.len() != 2 {
                    return Err(Error::Input(
                        "signed_residual factor is defined for m = 2 only".into(),
                    ));
                }
                Ok((ya as f64 - pa[1]) * (yb as f64 - pb[1]))
            }
        }
    }

    fn constant(&self) -> f64 {
        // sup over the diagonal: Kronecker and one-hot Gaussian peak at 1,
        // |y - p| <= 1 for the residual factor.
        1.0
    }

    fn validate(&self) -> Result<()> {
        if let YFactor::OneHotGaussian { sigma } = self {
            if !sigma.is_finite() || *sigma <= 0.0 {
                return Err(Error::Input(format!("one_hot_gaussian sigma {sigma} must be positive")));
            }
        }
        Ok(())
    }
}

/// A symmetric positive-definite kernel on forecast points.
///
/// Serializes to the JSON forms `{"type":"gaussian","sigma":1.0}`,
/// `{"type":"weighted_sum","terms":[[a, spec], ...]}`, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// exp(-|w - w'|^2 / sigma^2) on the concatenated embedding.
    Gaussian { sigma: f64 },
    /// 1 / (1 - <w, w'>) on embeddings with Euclidean norm < 1.
    ///
    /// `norm_bound` declares a radius r < 1 for the intended domain; it is
    /// required to compute the imbedding constant sqrt(1/(1-r^2)).
    InfPoly {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norm_bound: Option<f64>,
    },
    /// Product of per-slot factors; a missing factor means the constant 1.
    Product {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_factor: Option<Box<KernelSpec>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_factor: Option<Box<KernelSpec>>,
        y_factor: YFactor,
    },
    /// Weighted direct sum: k = sum_j a_j k_j with a_j >= 0.
    WeightedSum { terms: Vec<(f64, KernelSpec)> },
    /// c * k with c > 0.
    Scaled { factor: f64, inner: Box<KernelSpec> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec::Gaussian { sigma }
    }

    /// The binary K29 product kernel: x/p Gaussian factors and the signed
    /// residual observation factor.
    pub fn k29_binary(sigma: f64) -> Self {
        KernelSpec::Product {
            x_factor: Some(Box::new(KernelSpec::Gaussian { sigma })),
            p_factor: Some(Box::new(KernelSpec::Gaussian { sigma })),
            y_factor: YFactor::SignedResidual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { sigma } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(Error::Input(format!("gaussian sigma {sigma} must be positive")));
                }
            }
            KernelSpec::InfPoly { norm_bound } => {
                if let Some(r) = norm_bound {
                    if !r.is_finite() || *r <= 0.0 || *r >= 1.0 {
                        return Err(Error::Input(format!(
                            "inf_poly norm bound {r} must lie in (0,1)"
                        )));
                    }
                }
            }
            KernelSpec::Product {
                x_factor,
                p_factor,
                y_factor,
            } => {
                for f in [x_factor, p_factor].into_iter().flatten() {
                    f.validate_as_factor()?;
                }
                y_factor.validate()?;
            }
            KernelSpec::WeightedSum { terms } => {
                if terms.is_empty() {
                    return Err(Error::Input("weighted_sum needs at least one term".into()));
                }
                for (a, spec) in terms {
                    if !a.is_finite() || *a < 0.0 {
                        return Err(Error::Input(format!("weighted_sum weight {a} must be >= 0")));
                    }
                    spec.validate()?;
                }
            }
            KernelSpec::Scaled { factor, inner } => {
                if !factor.is_finite() || *factor <= 0.0 {
                    return Err(Error::Input(format!("scale factor {factor} must be positive")));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    fn validate_as_factor(&self) -> Result<()> {
        match self {
            KernelSpec::Product { .. } => Err(Error::Input(
                "product kernels cannot be used as coordinate factors".into(),
            )),
            KernelSpec::WeightedSum { terms } => {
                for (_, spec) in terms {
                    spec.validate_as_factor()?;
                }
                self.validate()
            }
            KernelSpec::Scaled { inner, .. } => {
                inner.validate_as_factor()?;
                self.validate()
            }
            _ => self.validate(),
        }
    }

    /// Evaluates the kernel on a pair of coordinate vectors. Used for the
    /// x- and p-factors of product kernels.
    pub fn eval_vec(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            KernelSpec::Gaussian { sigma } => Ok((-dist2(a, b) / (sigma * sigma)).exp()),
            KernelSpec::InfPoly { .. } => {
                if norm2(a) >= 1.0 || norm2(b) >= 1.0 {
                    return Err(Error::Domain(
                        "inf_poly requires arguments with Euclidean norm < 1".into(),
                    ));
                }
                Ok(1.0 / (1.0 - dot(a, b)))
            }
            KernelSpec::Product { .. } => Err(Error::Input(
                "product kernels cannot be used as coordinate factors".into(),
            )),
            KernelSpec::WeightedSum { terms } => {
                let mut acc = 0.0;
                for (w, spec) in terms {
                    acc += w * spec.eval_vec(a, b)?;
                }
                Ok(acc)
            }
            KernelSpec::Scaled { factor, inner } => Ok(factor * inner.eval_vec(a, b)?),
        }
    }

    /// Evaluates k((xa, pa, ya), (xb, pb, yb)).
    pub fn eval_parts(
        &self,
        xa: &[f64],
        pa: &[f64],
        ya: usize,
        xb: &[f64],
        pb: &[f64],
        yb: usize,
    ) -> Result<f64> {
        match self {
            KernelSpec::Gaussian { sigma } => {
                let dy = if ya == yb { 0.0 } else { 2.0 };
                let d = dist2(xa, xb) + dist2(pa, pb) + dy;
                Ok((-d / (sigma * sigma)).exp())
            }
            KernelSpec::InfPoly { .. } => {
                // The one-hot block contributes exactly 1 to each squared norm,
                // so full forecast points always sit outside the unit ball.
                let na = norm2(xa) + norm2(pa) + 1.0;
                let nb = norm2(xb) + norm2(pb) + 1.0;
                if na >= 1.0 || nb >= 1.0 {
                    return Err(Error::Domain(
                        "inf_poly requires arguments with Euclidean norm < 1".into(),
                    ));
                }
                let dy = if ya == yb { 1.0 } else { 0.0 };
                Ok(1.0 / (1.0 - (dot(xa, xb) + dot(pa, pb) + dy)))
            }
            KernelSpec::Product {
                x_factor,
                p_factor,
                y_factor,
            } => {
                let kx = match x_factor {
                    Some(f) => f.eval_vec(xa, xb)?,
                    None => 1.0,
                };
                let kp = match p_factor {
                    Some(f) => f.eval_vec(pa, pb)?,
                    None => 1.0,
                };
                Ok(kx * kp * y_factor.eval(pa, ya, pb, yb)?)
            }
            KernelSpec::WeightedSum { terms } => {
                let mut acc = 0.0;
                for (w, spec) in terms {
                    acc += w * spec.eval_parts(xa, pa, ya, xb, pb, yb)?;
                }
                Ok(acc)
            }
            KernelSpec::Scaled { factor, inner } => {
                Ok(factor * inner.eval_parts(xa, pa, ya, xb, pb, yb)?)
            }
        }
    }

    /// Evaluates the kernel on two forecast points.
    pub fn eval(&self, a: &ForecastPoint, b: &ForecastPoint) -> Result<f64> {
        self.eval_parts(&a.x, a.p.weights(), a.y, &b.x, b.p.weights(), b.y)
    }

    /// Fills `out[u*m + v] = k((xa, pa, u), (xb, pb, v))` for all class pairs.
    ///
    /// Shares the x/p factor work across the m^2 entries; the entries are
    /// bit-identical to per-pair `eval_parts` calls.
    pub fn eval_block(
        &self,
        xa: &[f64],
        pa: &[f64],
        xb: &[f64],
        pb: &[f64],
        m: usize,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(out.len(), m * m);
        match self {
            KernelSpec::Gaussian { sigma } => {
                let base = dist2(xa, xb) + dist2(pa, pb);
                let same = (-base / (sigma * sigma)).exp();
                let diff = (-(base + 2.0) / (sigma * sigma)).exp();
                for u in 0..m {
                    for v in 0..m {
                        out[u * m + v] = if u == v { same } else { diff };
                    }
                }
                Ok(())
            }
            KernelSpec::InfPoly { .. } => {
                let na = norm2(xa) + norm2(pa) + 1.0;
                let nb = norm2(xb) + norm2(pb) + 1.0;
                if na >= 1.0 || nb >= 1.0 {
                    return Err(Error::Domain(
                        "inf_poly requires arguments with Euclidean norm < 1".into(),
                    ));
                }
                let base = dot(xa, xb) + dot(pa, pb);
                for u in 0..m {
                    for v in 0..m {
                        let dy = if u == v { 1.0 } else { 0.0 };
                        out[u * m + v] = 1.0 / (1.0 - (base + dy));
                    }
                }
                Ok(())
            }
            KernelSpec::Product {
                x_factor,
                p_factor,
                y_factor,
            } => {
                let kx = match x_factor {
                    Some(f) => f.eval_vec(xa, xb)?,
                    None => 1.0,
                };
                let kp = match p_factor {
                    Some(f) => f.eval_vec(pa, pb)?,
                    None => 1.0,
                };
                let kxp = kx * kp;
                for u in 0..m {
                    for v in 0..m {
                        out[u * m + v] = kxp * y_factor.eval(pa, u, pb, v)?;
                    }
                }
                Ok(())
            }
            KernelSpec::WeightedSum { terms } => {
                out.fill(0.0);
                let mut block = vec![0.0; m * m];
                for (w, spec) in terms {
                    spec.eval_block(xa, pa, xb, pb, m, &mut block)?;
                    for (o, b) in out.iter_mut().zip(&block) {
                        *o += w * b;
                    }
                }
                Ok(())
            }
            KernelSpec::Scaled { factor, inner } => {
                inner.eval_block(xa, pa, xb, pb, m, out)?;
                for o in out.iter_mut() {
                    *o *= factor;
                }
                Ok(())
            }
        }
    }

    /// Structural imbedding constant sup_w sqrt(k(w, w)).
    pub fn imbedding_constant(&self) -> Result<f64> {
        match self {
            KernelSpec::Gaussian { .. } => Ok(1.0),
            KernelSpec::InfPoly { norm_bound } => match norm_bound {
                Some(r) => Ok((1.0 / (1.0 - r * r)).sqrt()),
                None => Err(Error::UnboundedConstant(
                    "inf_poly needs a declared norm bound r < 1, giving sqrt(1/(1-r^2))".into(),
                )),
            },
            KernelSpec::Product {
                x_factor,
                p_factor,
                y_factor,
            } => {
                let mut c = y_factor.constant();
                for f in [x_factor, p_factor].into_iter().flatten() {
                    c *= f.imbedding_constant()?;
                }
                Ok(c)
            }
            KernelSpec::WeightedSum { terms } => {
                let mut acc = 0.0;
                for (a, spec) in terms {
                    let c = spec.imbedding_constant()?;
                    acc += a * c * c;
                }
                Ok(acc.sqrt())
            }
            KernelSpec::Scaled { factor, inner } => {
                Ok(factor.sqrt() * inner.imbedding_constant()?)
            }
        }
    }

    /// True when evaluations do not depend on the forecast slot; required of
    /// the resolution kernel in decision mode.
    pub fn ignores_forecast(&self) -> bool {
        match self {
            KernelSpec::Gaussian { .. } | KernelSpec::InfPoly { .. } => false,
            KernelSpec::Product {
                p_factor, y_factor, ..
            } => p_factor.is_none() && !matches!(y_factor, YFactor::SignedResidual),
            KernelSpec::WeightedSum { terms } => terms.iter().all(|(_, s)| s.ignores_forecast()),
            KernelSpec::Scaled { inner, .. } => inner.ignores_forecast(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: KernelSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Weighted direct sum of two kernels: a0*k0 + a1*k1.
pub fn direct_sum(k0: KernelSpec, a0: f64, k1: KernelSpec, a1: f64) -> Result<KernelSpec> {
    if !a0.is_finite() || !a1.is_finite() || a0 <= 0.0 || a1 <= 0.0 {
        return Err(Error::Input(format!(
            "direct sum weights must be positive, got {a0} and {a1}"
        )));
    }
    Ok(KernelSpec::WeightedSum {
        terms: vec![(a0, k0), (a1, k1)],
    })
}

/// Evaluates a kernel on two forecast points. Free-function form of
/// [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, a: &ForecastPoint, b: &ForecastPoint) -> Result<f64> {
    spec.eval(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_point(rng: &mut ChaCha8Rng, dim: usize, m: usize) -> ForecastPoint {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let p = Simplex::normalized(raw).unwrap();
        let y = rng.random_range(0..m);
        ForecastPoint::new(x, p, y).unwrap()
    }

    fn gaussian() -> KernelSpec {
        KernelSpec::gaussian(1.0)
    }

    #[test]
    fn gaussian_diagonal_is_one() {
        let k = gaussian();
        let a = ForecastPoint::new(vec![0.3, -0.2], Simplex::binary(0.4).unwrap(), 1).unwrap();
        assert_eq!(k.eval(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn kronecker_product_kills_mismatched_classes() {
        let k = KernelSpec::Product {
            x_factor: None,
            p_factor: None,
            y_factor: YFactor::Kronecker,
        };
        let a = ForecastPoint::new(vec![0.1], Simplex::binary(0.5).unwrap(), 0).unwrap();
        let b = ForecastPoint::new(vec![0.9], Simplex::binary(0.2).unwrap(), 1).unwrap();
        assert_eq!(k.eval(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_at_unit_distance() {
        // Same class and forecast, data one apart in Euclidean distance.
        let k = gaussian();
        let a = ForecastPoint::new(vec![0.0], Simplex::binary(0.5).unwrap(), 1).unwrap();
        let b = ForecastPoint::new(vec![1.0], Simplex::binary(0.5).unwrap(), 1).unwrap();
        let v = k.eval(&a, &b).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn imbedding_constants() {
        assert_eq!(KernelSpec::gaussian(2.0).imbedding_constant().unwrap(), 1.0);
        let sum = KernelSpec::WeightedSum {
            terms: vec![(1.0, gaussian()), (1.0, gaussian())],
        };
        assert!((sum.imbedding_constant().unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        let scaled = KernelSpec::Scaled {
            factor: 4.0,
            inner: Box::new(gaussian()),
        };
        assert_eq!(scaled.imbedding_constant().unwrap(), 2.0);
        let poly = KernelSpec::InfPoly { norm_bound: None };
        assert!(matches!(
            poly.imbedding_constant(),
            Err(Error::UnboundedConstant(_))
        ));
        let bounded = KernelSpec::InfPoly {
            norm_bound: Some(0.6),
        };
        let c = bounded.imbedding_constant().unwrap();
        assert!((c - (1.0 / (1.0 - 0.36f64)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn direct_sum_examples() {
        let k = direct_sum(gaussian(), 1.0, gaussian(), 1.0).unwrap();
        let a = ForecastPoint::new(vec![0.0], Simplex::binary(0.5).unwrap(), 0).unwrap();
        assert_eq!(k.eval(&a, &a).unwrap(), 2.0);

        assert!(direct_sum(gaussian(), 1.0, gaussian(), 0.0).is_err());

        let k53 = direct_sum(gaussian(), 2.0, gaussian(), 3.0).unwrap();
        assert_eq!(k53.eval(&a, &a).unwrap(), 5.0);
    }

    #[test]
    fn direct_sum_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k0 = KernelSpec::gaussian(0.7);
        let k1 = KernelSpec::k29_binary(1.3);
        let merged = direct_sum(k0.clone(), 0.4, k1.clone(), 2.5).unwrap();
        for _ in 0..200 {
            let a = rand_point(&mut rng, 3, 2);
            let b = rand_point(&mut rng, 3, 2);
            let lhs = merged.eval(&a, &b).unwrap();
            let rhs = 0.4 * k0.eval(&a, &b).unwrap() + 2.5 * k1.eval(&a, &b).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn symmetry_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let specs = vec![
            gaussian(),
            KernelSpec::k29_binary(0.8),
            KernelSpec::WeightedSum {
                terms: vec![(0.5, gaussian()), (2.0, KernelSpec::k29_binary(1.0))],
            },
            KernelSpec::Scaled {
                factor: 3.0,
                inner: Box::new(gaussian()),
            },
        ];
        for spec in &specs {
            for _ in 0..250 {
                let a = rand_point(&mut rng, 2, 2);
                let b = rand_point(&mut rng, 2, 2);
                let ab = spec.eval(&a, &b).unwrap();
                let ba = spec.eval(&b, &a).unwrap();
                assert_eq!(ab, ba);
            }
        }
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = vec![
            gaussian(),
            KernelSpec::Product {
                x_factor: Some(Box::new(gaussian())),
                p_factor: None,
                y_factor: YFactor::OneHotGaussian { sigma: 1.0 },
            },
            KernelSpec::k29_binary(1.0),
        ];
        for spec in &specs {
            for _ in 0..50 {
                let pts: Vec<ForecastPoint> = (0..20).map(|_| rand_point(&mut rng, 2, 3)).collect();
                let pts = if matches!(
                    spec,
                    KernelSpec::Product {
                        y_factor: YFactor::SignedResidual,
                        ..
                    }
                ) {
                    (0..20).map(|_| rand_point(&mut rng, 2, 2)).collect()
                } else {
                    pts
                };
                let n = pts.len();
                let mut gram = nalgebra::DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        gram[(i, j)] = spec.eval(&pts[i], &pts[j]).unwrap();
                    }
                }
                let trace: f64 = (0..n).map(|i| gram[(i, i)]).sum();
                let eigs = gram.symmetric_eigenvalues();
                let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(min >= -1e-8 * trace.max(1.0), "min eig {min} trace {trace}");
            }
        }
    }

    #[test]
    fn imbedding_constant_dominates_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let specs = vec![
            gaussian(),
            KernelSpec::k29_binary(1.0),
            KernelSpec::WeightedSum {
                terms: vec![(1.5, gaussian()), (0.5, KernelSpec::k29_binary(2.0))],
            },
        ];
        for spec in &specs {
            let c = spec.imbedding_constant().unwrap();
            for _ in 0..1000 {
                let a = rand_point(&mut rng, 2, 2);
                let diag = spec.eval(&a, &a).unwrap();
                assert!(diag.max(0.0).sqrt() <= c + 1e-9);
            }
        }
    }

    #[test]
    fn block_matches_pointwise_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let specs = vec![
            gaussian(),
            KernelSpec::k29_binary(0.9),
            KernelSpec::WeightedSum {
                terms: vec![(1.0, gaussian()), (1.0, KernelSpec::k29_binary(1.0))],
            },
        ];
        for spec in &specs {
            for _ in 0..100 {
                let a = rand_point(&mut rng, 2, 2);
                let b = rand_point(&mut rng, 2, 2);
                let m = 2;
                let mut block = vec![0.0; m * m];
                spec.eval_block(&a.x, a.p.weights(), &b.x, b.p.weights(), m, &mut block)
                    .unwrap();
                for u in 0..m {
                    for v in 0..m {
                        let direct = spec
                            .eval_parts(&a.x, a.p.weights(), u, &b.x, b.p.weights(), v)
                            .unwrap();
                        assert_eq!(block[u * m + v], direct);
                    }
                }
            }
        }
    }

    #[test]
    fn inf_poly_domain_checks() {
        let k = KernelSpec::InfPoly { norm_bound: None };
        assert!(k.eval_vec(&[0.5, 0.5], &[0.1, 0.1]).is_ok());
        assert!(matches!(
            k.eval_vec(&[1.0, 0.5], &[0.1, 0.1]),
            Err(Error::Domain(_))
        ));
        // Full forecast points carry a one-hot block of norm 1.
        let a = ForecastPoint::new(vec![0.0], Simplex::binary(0.5).unwrap(), 0).unwrap();
        assert!(matches!(k.eval(&a, &a), Err(Error::Domain(_))));
    }

    #[test]
    fn json_round_trip() {
        let specs = vec![
            KernelSpec::gaussian(1.5),
            KernelSpec::InfPoly {
                norm_bound: Some(0.8),
            },
            KernelSpec::k29_binary(1.0),
            KernelSpec::WeightedSum {
                terms: vec![(1.0, KernelSpec::gaussian(1.0)), (2.0, KernelSpec::gaussian(0.5))],
            },
            KernelSpec::Scaled {
                factor: 2.0,
                inner: Box::new(KernelSpec::gaussian(1.0)),
            },
        ];
        for spec in specs {
            let json = spec.to_json().unwrap();
            let back = KernelSpec::from_json(&json).unwrap();
            assert_eq!(spec, back, "round trip failed for {json}");
        }
        let json = KernelSpec::gaussian(1.0).to_json().unwrap();
        assert_eq!(json, r#"{"type":"gaussian","sigma":1.0}"#);
    }

    #[test]
    fn simplex_validation() {
        assert!(Simplex::new(vec![0.5, 0.5]).is_ok());
        assert!(Simplex::new(vec![1.0]).is_err());
        assert!(Simplex::new(vec![0.6, 0.6]).is_err());
        assert!(Simplex::new(vec![-0.1, 1.1]).is_err());
        assert!(ForecastPoint::new(vec![0.0], Simplex::binary(0.5).unwrap(), 2).is_err());
    }
}
