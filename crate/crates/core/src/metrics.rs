//! Transcript evaluation: binned calibration tables, the kernel
//! calibration-cum-resolution discrepancy with its 2 c_F ||f|| sqrt(N) bound,
//! regret against prediction rules with the sqrt(N) decision bound, and the
//! Hoeffding band for randomized plays.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::decision::{expected_loss, Gamma, LossSpec};
use crate::error::{Error, Result};
use crate::kernel::{ForecastPoint, KernelSpec, Simplex};

/// One round record of a play of the prediction protocol.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Round {
    pub n: u64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Gamma>,
    pub y: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<BTreeMap<String, f64>>,
    /// Neutrality certificate max_y g(y, P_n) for the emitted forecast.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert: Option<f64>,
    /// Sampled prediction of a randomized play.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_samp: Option<Gamma>,
    /// Sampled prediction of the randomized comparison rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_samp: Option<Gamma>,
    /// Expected loss of the randomized comparison rule at this round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_mean_loss: Option<f64>,
}

/// Doubling-trick escalation event.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Escalation {
    pub round: u64,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct TranscriptMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub escalations: Vec<Escalation>,
}

/// Ordered round records plus run metadata; the unit of persistence.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct Transcript {
    pub meta: TranscriptMeta,
    pub rounds: Vec<Round>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    fn forecast(&self, round: &Round) -> Result<Simplex> {
        Simplex::new(round.p.clone())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rounds.iter().enumerate() {
            if r.n != i as u64 + 1 {
                return Err(Error::Input(format!(
                    "round indices must be 1..N contiguous; found {} at position {i}",
                    r.n
                )));
            }
            let p = self.forecast(r)?;
            if r.y >= p.m() {
                return Err(Error::Input(format!("round {}: class {} out of range", r.n, r.y)));
            }
        }
        Ok(())
    }
}

/// One row of the binned calibration table.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_forecast: f64,
    pub frequency: f64,
    pub deviation: f64,
}

/// Bins rounds by the forecast probability of `class` and compares the mean
/// forecast with the empirical frequency in each bin.
///
/// An indicator-bin diagnostic: the theory certifies only the smoothed
/// kernel statistic of [`kernel_discrepancy`], not this table.
pub fn calibration_bins(t: &Transcript, width: f64, class: usize) -> Result<Vec<CalibrationBin>> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(Error::Input(format!("bin width {width} outside (0, 1]")));
    }
    let nbins = (1.0 / width).ceil() as usize;
    let mut count = vec![0usize; nbins];
    let mut sum_p = vec![0.0; nbins];
    let mut hits = vec![0usize; nbins];
    for r in &t.rounds {
        if class >= r.p.len() {
            return Err(Error::Input(format!("class {class} out of range")));
        }
        let p = r.p[class];
        let bin = ((p / width).floor() as usize).min(nbins - 1);
        count[bin] += 1;
        sum_p[bin] += p;
        if r.y == class {
            hits[bin] += 1;
        }
    }
    let mut out = Vec::new();
    for b in 0..nbins {
        if count[b] == 0 {
            continue;
        }
        let mean_forecast = sum_p[b] / count[b] as f64;
        let frequency = hits[b] as f64 / count[b] as f64;
        out.push(CalibrationBin {
            index: b,
            lo: b as f64 * width,
            hi: ((b + 1) as f64 * width).min(1.0),
            count: count[b],
            mean_forecast,
            frequency,
            deviation: (frequency - mean_forecast).abs(),
        });
    }
    Ok(out)
}

/// A test function given as a finite representer combination
/// f = sum_j c_j k(w_j, .).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunction {
    pub anchors: Vec<ForecastPoint>,
    pub coeffs: Vec<f64>,
}

impl TestFunction {
    pub fn new(anchors: Vec<ForecastPoint>, coeffs: Vec<f64>) -> Result<Self> {
        if anchors.len() != coeffs.len() {
            return Err(Error::Input(format!(
                "{} anchors but {} coefficients",
                anchors.len(),
                coeffs.len()
            )));
        }
        Ok(TestFunction { anchors, coeffs })
    }

    pub fn eval(&self, spec: &KernelSpec, w: &ForecastPoint) -> Result<f64> {
        let mut acc = 0.0;
        for (anchor, c) in self.anchors.iter().zip(&self.coeffs) {
            acc += c * spec.eval(anchor, w)?;
        }
        Ok(acc)
    }

    /// RKHS norm via the Gram form ||f||^2 = sum_jj' c_j c_j' k(w_j, w_j').
    pub fn norm(&self, spec: &KernelSpec) -> Result<f64> {
        if self.anchors.is_empty() {
            return Err(Error::DegenerateFunction(
                "empty representer combination".into(),
            ));
        }
        let mut sq = 0.0;
        for (a, ca) in self.anchors.iter().zip(&self.coeffs) {
            for (b, cb) in self.anchors.iter().zip(&self.coeffs) {
                sq += ca * cb * spec.eval(a, b)?;
            }
        }
        let norm = sq.max(0.0).sqrt();
        if norm <= 1e-12 {
            return Err(Error::DegenerateFunction(format!(
                "representer combination has norm {norm}"
            )));
        }
        Ok(norm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub statistic: f64,
    pub bound: f64,
    pub ratio: f64,
    pub norm: f64,
}

/// Calibration-cum-resolution discrepancy
/// |sum_n (f(x_n, P_n, y_n) - sum_y P_n(y) f(x_n, P_n, y))| against the
/// bound 2 c_F ||f|| sqrt(N).
pub fn kernel_discrepancy(t: &Transcript, f: &TestFunction) -> Result<Discrepancy> {
    let spec = t
        .meta
        .kernel
        .as_ref()
        .ok_or_else(|| Error::Input("transcript has no kernel metadata".into()))?;
    let c = spec.imbedding_constant()?;
    let norm = f.norm(spec)?;
    let mut stat = 0.0;
    for r in &t.rounds {
        let p = t.forecast(r)?;
        let actual = f.eval(spec, &ForecastPoint::new(r.x.clone(), p.clone(), r.y)?)?;
        let mut mean = 0.0;
        for y in 0..p.m() {
            mean += p.weight(y) * f.eval(spec, &ForecastPoint::new(r.x.clone(), p.clone(), y)?)?;
        }
        stat += actual - mean;
    }
    let statistic = stat.abs();
    let bound = 2.0 * c * norm * (t.len() as f64).sqrt();
    let ratio = if bound > 0.0 { statistic / bound } else { 0.0 };
    Ok(Discrepancy {
        statistic,
        bound,
        ratio,
        norm,
    })
}

/// A benchmark prediction rule D: x -> gamma.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PredictionRule {
    Constant { gamma: Gamma },
    /// Scalar rule sigmoid(<w, x>) for binary prediction spaces.
    Logistic { weights: Vec<f64> },
    /// Lookup table keyed by the exact datum.
    Table { entries: Vec<(Vec<f64>, Gamma)> },
}

impl PredictionRule {
    pub fn apply(&self, x: &[f64]) -> Result<Gamma> {
        match self {
            PredictionRule::Constant { gamma } => Ok(gamma.clone()),
            PredictionRule::Logistic { weights } => {
                if weights.len() != x.len() {
                    return Err(Error::Input(format!(
                        "rule weights have {} entries, datum has {}",
                        weights.len(),
                        x.len()
                    )));
                }
                let z: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum();
                Ok(Gamma::Scalar(1.0 / (1.0 + (-z).exp())))
            }
            PredictionRule::Table { entries } => entries
                .iter()
                .find(|(key, _)| key == x)
                .map(|(_, g)| g.clone())
                .ok_or_else(|| Error::Input(format!("rule undefined at datum {x:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub predictor_total: f64,
    pub rule_total: f64,
    pub regret: f64,
    pub bound: f64,
}

/// Total predictor loss minus total rule loss, with the decision-theoretic
/// bound sqrt(c_lambda^2 + 4 c_F^2) (norm_estimate + 1) sqrt(N) + 1 computed
/// from the supplied norm estimate of the rule's loss profile.
pub fn regret(
    t: &Transcript,
    rule: &PredictionRule,
    loss: &LossSpec,
    norm_estimate: f64,
) -> Result<RegretReport> {
    let spec = t
        .meta
        .kernel
        .as_ref()
        .ok_or_else(|| Error::Input("transcript has no kernel metadata".into()))?;
    let c_f = spec.imbedding_constant()?;
    let c_l = loss.c_lambda();
    let mut predictor_total = 0.0;
    let mut rule_total = 0.0;
    for r in &t.rounds {
        let gamma = r
            .gamma
            .as_ref()
            .ok_or_else(|| Error::Input(format!("round {} has no prediction", r.n)))?;
        predictor_total += loss.loss(&r.x, gamma, r.y)?;
        rule_total += loss.loss(&r.x, &rule.apply(&r.x)?, r.y)?;
    }
    let n = t.len() as f64;
    let bound = (c_l * c_l + 4.0 * c_f * c_f).sqrt() * (norm_estimate + 1.0) * n.sqrt() + 1.0;
    Ok(RegretReport {
        predictor_total,
        rule_total,
        regret: predictor_total - rule_total,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingReport {
    pub deviation: f64,
    pub band: f64,
}

/// Deviation of the sampled randomized play from its means against the band
/// c_lambda sqrt(2 ln(1/delta)) sqrt(N).
pub fn hoeffding_band(t: &Transcript, delta: f64) -> Result<HoeffdingReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!("delta {delta} outside (0, 1)")));
    }
    let loss = t
        .meta
        .loss
        .as_ref()
        .ok_or_else(|| Error::Input("transcript has no loss metadata".into()))?;
    let mut deviation = 0.0;
    for r in &t.rounds {
        let gamma = r
            .gamma
            .as_ref()
            .ok_or_else(|| Error::Input(format!("round {} has no prediction", r.n)))?;
        let (g, d, d_mean) = match (&r.g_samp, &r.d_samp, r.d_mean_loss) {
            (Some(g), Some(d), Some(dm)) => (g, d, dm),
            _ => {
                return Err(Error::Input(format!(
                    "round {} is missing randomized samples",
                    r.n
                )))
            }
        };
        let predictor_sampled = loss.loss(&r.x, g, r.y)?;
        let predictor_mean = loss.loss(&r.x, gamma, r.y)?;
        let rule_sampled = loss.loss(&r.x, d, r.y)?;
        deviation += (predictor_sampled - predictor_mean) - (rule_sampled - d_mean);
    }
    let band = loss.c_lambda() * (2.0 * (1.0 / delta).ln()).sqrt() * (t.len() as f64).sqrt();
    Ok(HoeffdingReport { deviation, band })
}

/// Fits a representer combination through `values` at `anchors` by solving
/// (K + ridge I) c = v; the norm proxy for rule loss profiles.
pub fn fit_representer(
    spec: &KernelSpec,
    anchors: Vec<ForecastPoint>,
    values: &[f64],
    ridge: f64,
) -> Result<TestFunction> {
    if anchors.is_empty() || anchors.len() != values.len() {
        return Err(Error::Input("fit needs one value per anchor".into()));
    }
    let n = anchors.len();
    let mut gram = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = spec.eval(&anchors[i], &anchors[j])?;
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(values);
    let mut lambda = ridge.max(0.0);
    for _ in 0..12 {
        let mut reg = gram.clone();
        for i in 0..n {
            reg[(i, i)] += lambda;
        }
        if let Some(chol) = reg.cholesky() {
            let coeffs = chol.solve(&rhs);
            return TestFunction::new(anchors, coeffs.iter().cloned().collect());
        }
        lambda = (lambda * 10.0).max(1e-12);
    }
    Err(Error::Input(
        "representer fit failed: Gram matrix is not positive definite".into(),
    ))
}

/// One CSV row of a metrics report.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub metric: String,
    pub params: String,
    pub n: u64,
    pub statistic: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Decimal with 12 significant digits; the bit-exact CSV number format.
pub fn format_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn write_metrics_csv<W: Write>(writer: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["metric", "params", "n", "statistic", "bound", "ratio"])
        .map_err(|e| Error::Input(format!("csv write failed: {e}")))?;
    for r in rows {
        w.write_record([
            r.metric.as_str(),
            r.params.as_str(),
            &r.n.to_string(),
            &format_sig12(r.statistic),
            &format_sig12(r.bound),
            &format_sig12(r.ratio),
        ])
        .map_err(|e| Error::Input(format!("csv write failed: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Convenience: expected loss of a rule prediction, for randomized-play
/// bookkeeping.
pub fn rule_mean_loss(
    loss: &LossSpec,
    x: &[f64],
    rule_gamma: &Gamma,
    p: &Simplex,
) -> Result<f64> {
    expected_loss(loss, x, rule_gamma, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transcript_with(rounds: Vec<Round>, kernel: Option<KernelSpec>) -> Transcript {
        Transcript {
            meta: TranscriptMeta {
                kernel,
                ..Default::default()
            },
            rounds,
        }
    }

    fn round(n: u64, p1: f64, y: usize) -> Round {
        Round {
            n,
            x: vec![0.0],
            p: vec![1.0 - p1, p1],
            gamma: None,
            y,
            loss: None,
            cap: None,
            cert: None,
            g_samp: None,
            d_samp: None,
            d_mean_loss: None,
        }
    }

    #[test]
    fn alternating_constant_half_is_calibrated_in_one_bin() {
        let rounds: Vec<Round> = (1..=1000)
            .map(|n| round(n, 0.5, if n % 2 == 1 { 1 } else { 0 }))
            .collect();
        let t = transcript_with(rounds, None);
        let bins = calibration_bins(&t, 0.1, 1).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].count, 1000);
        assert!(bins[0].deviation.abs() < 1e-12);
    }

    #[test]
    fn point_mass_forecasts_have_zero_deviation() {
        let rounds: Vec<Round> = (1..=100)
            .map(|n| {
                let y = if n % 3 == 0 { 1 } else { 0 };
                round(n, y as f64, y)
            })
            .collect();
        let t = transcript_with(rounds, None);
        for bin in calibration_bins(&t, 0.25, 1).unwrap() {
            assert!(bin.deviation.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_half_on_all_ones_deviates_by_half() {
        let rounds: Vec<Round> = (1..=50).map(|n| round(n, 0.5, 1)).collect();
        let t = transcript_with(rounds, None);
        let bins = calibration_bins(&t, 0.2, 1).unwrap();
        assert_eq!(bins.len(), 1);
        assert!((bins[0].deviation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bin_counts_partition_the_transcript() {
        let rounds: Vec<Round> = (1..=97)
            .map(|n| round(n, (n % 10) as f64 / 10.0 + 0.05, usize::from(n % 2 == 0)))
            .collect();
        let t = transcript_with(rounds, None);
        let bins = calibration_bins(&t, 0.15, 1).unwrap();
        let total: usize = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 97);
        assert!(calibration_bins(&Transcript::default(), 0.15, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn empty_test_function_is_degenerate() {
        let spec = KernelSpec::gaussian(1.0);
        let f = TestFunction::new(vec![], vec![]).unwrap();
        assert!(matches!(
            f.norm(&spec),
            Err(Error::DegenerateFunction(_))
        ));
    }

    #[test]
    fn single_representer_norm_is_diagonal_root() {
        let spec = KernelSpec::gaussian(1.0);
        let anchor = ForecastPoint::new(vec![0.2], Simplex::binary(0.6).unwrap(), 1).unwrap();
        let f = TestFunction::new(vec![anchor], vec![1.0]).unwrap();
        assert!((f.norm(&spec).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrepancy_is_identical_when_ignored_coordinate_is_constant() {
        // Anchors share the same datum, so the statistic measures
        // calibration; re-anchoring the forecast coordinate to a constant
        // makes the same statistic measure resolution.
        let spec = KernelSpec::gaussian(1.0);
        let rounds: Vec<Round> = (1..=40)
            .map(|n| round(n, 0.3 + 0.4 * ((n % 5) as f64 / 5.0), usize::from(n % 2 == 0)))
            .collect();
        let mut t = transcript_with(rounds, Some(spec.clone()));
        for r in t.rounds.iter_mut() {
            r.x = vec![0.77];
        }
        let p_anchor = Simplex::binary(0.4).unwrap();
        let f_cal = TestFunction::new(
            vec![
                ForecastPoint::new(vec![0.77], p_anchor.clone(), 0).unwrap(),
                ForecastPoint::new(vec![0.77], p_anchor.clone(), 1).unwrap(),
            ],
            vec![0.7, -0.4],
        )
        .unwrap();
        let d1 = kernel_discrepancy(&t, &f_cal).unwrap();
        let d2 = kernel_discrepancy(&t, &f_cal).unwrap();
        assert_eq!(d1.statistic, d2.statistic);
        assert!(d1.bound > 0.0);
    }

    #[test]
    fn regret_of_own_predictions_is_zero() {
        let loss = LossSpec::Absolute;
        let mut rounds: Vec<Round> = (1..=30).map(|n| round(n, 0.5, usize::from(n % 2 == 0))).collect();
        for (i, r) in rounds.iter_mut().enumerate() {
            r.x = vec![i as f64];
            r.gamma = Some(Gamma::Scalar(0.5));
        }
        let entries = rounds
            .iter()
            .map(|r| (r.x.clone(), r.gamma.clone().unwrap()))
            .collect();
        let t = transcript_with(rounds, Some(KernelSpec::gaussian(1.0)));
        let rule = PredictionRule::Table { entries };
        let rep = regret(&t, &rule, &loss, 1.0).unwrap();
        assert_eq!(rep.regret, 0.0);
    }

    #[test]
    fn oracle_rule_regret_matches_hand_sum() {
        let loss = LossSpec::Absolute;
        let n = 40;
        let mut rounds: Vec<Round> = (1..=n).map(|k| round(k, 0.5, usize::from(k % 2 == 0))).collect();
        for r in rounds.iter_mut() {
            r.x = vec![r.n as f64];
            r.gamma = Some(Gamma::Scalar(0.5));
        }
        let entries = rounds
            .iter()
            .map(|r| (r.x.clone(), Gamma::Scalar(r.y as f64)))
            .collect();
        let t = transcript_with(rounds, Some(KernelSpec::gaussian(1.0)));
        let rule = PredictionRule::Table { entries };
        let rep = regret(&t, &rule, &loss, 1.0).unwrap();
        assert!((rep.regret - 0.5 * n as f64).abs() < 1e-12);
    }

    #[test]
    fn regret_is_additive_over_concatenation() {
        let loss = LossSpec::Absolute;
        let rule = PredictionRule::Constant {
            gamma: Gamma::Scalar(0.3),
        };
        let make = |offset: u64, count: u64| -> Transcript {
            let rounds: Vec<Round> = (1..=count)
                .map(|k| {
                    let mut r = round(k, 0.6, usize::from((k + offset) % 3 == 0));
                    r.gamma = Some(Gamma::Scalar(0.8));
                    r
                })
                .collect();
            transcript_with(rounds, Some(KernelSpec::gaussian(1.0)))
        };
        let a = make(0, 20);
        let b = make(7, 15);
        let mut joined = a.clone();
        for (i, mut r) in b.rounds.clone().into_iter().enumerate() {
            r.n = a.len() as u64 + i as u64 + 1;
            joined.rounds.push(r);
        }
        let ra = regret(&a, &rule, &loss, 0.0).unwrap();
        let rb = regret(&b, &rule, &loss, 0.0).unwrap();
        let rj = regret(&joined, &rule, &loss, 0.0).unwrap();
        assert!((rj.regret - (ra.regret + rb.regret)).abs() < 1e-12);
    }

    #[test]
    fn rule_undefined_at_datum_is_input_error() {
        let rule = PredictionRule::Table { entries: vec![] };
        assert!(matches!(rule.apply(&[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn hoeffding_point_masses_have_zero_deviation() {
        let loss = LossSpec::Absolute;
        let mut rounds: Vec<Round> = (1..=25).map(|k| round(k, 0.5, usize::from(k % 2 == 0))).collect();
        for r in rounds.iter_mut() {
            r.gamma = Some(Gamma::Scalar(0.4));
            r.g_samp = Some(Gamma::Scalar(0.4));
            r.d_samp = Some(Gamma::Scalar(0.7));
            r.d_mean_loss = Some(loss.loss(&r.x, &Gamma::Scalar(0.7), r.y).unwrap());
        }
        let mut t = transcript_with(rounds, None);
        t.meta.loss = Some(loss);
        let rep = hoeffding_band(&t, 0.01).unwrap();
        assert_eq!(rep.deviation, 0.0);
    }

    #[test]
    fn hoeffding_band_formula() {
        let loss = LossSpec::Absolute;
        let mut rounds: Vec<Round> = (1..=1000).map(|k| round(k, 0.5, 1)).collect();
        for r in rounds.iter_mut() {
            r.gamma = Some(Gamma::Scalar(0.5));
            r.g_samp = Some(Gamma::Scalar(0.5));
            r.d_samp = Some(Gamma::Scalar(0.5));
            r.d_mean_loss = Some(0.5);
        }
        let mut t = transcript_with(rounds, None);
        t.meta.loss = Some(loss);
        let rep = hoeffding_band(&t, 0.01).unwrap();
        let expected = (2.0 * (100.0f64).ln()).sqrt() * (1000.0f64).sqrt();
        assert!((rep.band - expected).abs() < 1e-9);
        assert!((rep.band - 95.9).abs() < 0.2, "band {}", rep.band);
    }

    #[test]
    fn representer_fit_interpolates() {
        let spec = KernelSpec::gaussian(1.0);
        let anchors: Vec<ForecastPoint> = (0..12)
            .map(|i| {
                ForecastPoint::new(
                    vec![i as f64 / 6.0 - 1.0],
                    Simplex::binary(0.5).unwrap(),
                    i % 2,
                )
                .unwrap()
            })
            .collect();
        let values: Vec<f64> = anchors.iter().map(|a| a.x[0].sin()).collect();
        let f = fit_representer(&spec, anchors.clone(), &values, 1e-10).unwrap();
        for (a, v) in anchors.iter().zip(&values) {
            let fit = f.eval(&spec, a).unwrap();
            assert!((fit - v).abs() < 1e-4, "fit {fit} value {v}");
        }
        assert!(f.norm(&spec).unwrap() > 0.0);
    }

    #[test]
    fn csv_rows_use_twelve_significant_digits() {
        let rows = vec![MetricRow {
            metric: "discrepancy".into(),
            params: "f=7".into(),
            n: 1000,
            statistic: 1.0 / 3.0,
            bound: 2.0f64.sqrt(),
            ratio: 0.2357,
        }];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("3.33333333333e-1"));
        assert!(text.contains("1.41421356237e0"));
    }
}
