//! Error metrics on denormalized fault positions and the comparison report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::dataset::{Dataset, NormParams};
use crate::nn::MlpModel;
use crate::{Error, Result};

fn check_lengths(actual: &[f64], forecast: &[f64], min: usize) -> Result<()> {
    if actual.len() != forecast.len() {
        return Err(Error::Shape(format!("{} actual vs {} forecast values", actual.len(), forecast.len())));
    }
    if actual.len() < min {
        return Err(Error::Shape(format!("need at least {min} values, got {}", actual.len())));
    }
    Ok(())
}

/// Mean absolute percentage error, `100/N · Σ |x_t − x_f| / x_t`.
///
/// The denominator is the signed actual value.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 1)?;
    if let Some(i) = actual.iter().position(|&a| a == 0.0) {
        return Err(Error::UndefinedMape(i));
    }
    let sum: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f).abs() / a).sum();
    Ok(sum / actual.len() as f64 * 100.0)
}

pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 1)?;
    let sum: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// Pearson product-moment correlation.
pub fn correlation(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 2)?;
    let n = actual.len() as f64;
    let ma = actual.iter().sum::<f64>() / n;
    let mf = forecast.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sff) = (0.0, 0.0, 0.0);
    for (a, f) in actual.iter().zip(forecast) {
        let (da, df) = (a - ma, f - mf);
        sab += da * df;
        saa += da * da;
        sff += df * df;
    }
    if saa == 0.0 || sff == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input vector".into()));
    }
    Ok((sab / (saa * sff).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mape: f64,
    pub rmse: f64,
    pub correlation: f64,
}

impl Metrics {
    pub fn compute(actual: &[f64], forecast: &[f64]) -> Result<Self> {
        Ok(Self {
            mape: mape(actual, forecast)?,
            rmse: rmse(actual, forecast)?,
            correlation: correlation(actual, forecast)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitMetrics {
    pub train: Metrics,
    pub test: Metrics,
}

/// Reference values reported for the original study (train, test).
pub fn paper_reference() -> BTreeMap<String, SplitMetrics> {
    let m = |mape, rmse, correlation| Metrics { mape, rmse, correlation };
    BTreeMap::from([
        (
            "ica".to_string(),
            SplitMetrics { train: m(0.0061, 0.031, 0.9885), test: m(0.0055, 0.026, 0.9927) },
        ),
        (
            "pso".to_string(),
            SplitMetrics { train: m(0.0060, 0.042, 0.9840), test: m(0.0067, 0.038, 0.9883) },
        ),
        (
            "gd".to_string(),
            SplitMetrics { train: m(0.0099, 0.089, 0.9679), test: m(0.0108, 0.085, 0.9718) },
        ),
    ])
}

/// Actual and predicted fault positions in km.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl Predictions {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual_km,predicted_km\n");
        for (a, p) in self.actual.iter().zip(&self.predicted) {
            let _ = writeln!(out, "{},{}", crate::format_f64(*a), crate::format_f64(*p));
        }
        out
    }
}

/// Runs `model` over a normalized dataset and maps both targets and outputs
/// back to km.
pub fn predict(model: &MlpModel, data: &Dataset) -> Result<Predictions> {
    if !data.normalized {
        return Err(Error::IncompatibleModel("dataset is not normalized".into()));
    }
    let mut out = Predictions { actual: Vec::with_capacity(data.len()), predicted: Vec::with_capacity(data.len()) };
    for s in &data.samples {
        out.actual.push(data.norm.denormalize_target(s.target));
        out.predicted.push(data.norm.denormalize_target(model.forward(&s.features)?));
    }
    Ok(out)
}

/// A trained model with the normalization it was fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub method: String,
    pub model: MlpModel,
    pub norm: NormParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEcho {
    pub layer_sizes: Vec<usize>,
    pub n_weights: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Free-form run description (data file, split, seeds).
    pub config: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub models: BTreeMap<String, ModelEcho>,
    pub methods: BTreeMap<String, SplitMetrics>,
    pub paper: BTreeMap<String, SplitMetrics>,
    #[serde(skip)]
    pub predictions: BTreeMap<String, (Predictions, Predictions)>,
}

/// Evaluates every model on both splits. Both datasets must be normalized
/// with the same ranges the models were trained under.
pub fn build_report(models: &[TrainedModel], train: &Dataset, test: &Dataset, seed: u64) -> Result<EvalReport> {
    if train.norm != test.norm {
        return Err(Error::IncompatibleModel("train and test splits use different normalization".into()));
    }
    let mut methods = BTreeMap::new();
    let mut echoes = BTreeMap::new();
    let mut predictions = BTreeMap::new();
    for m in models {
        if m.norm != train.norm {
            return Err(Error::IncompatibleModel(format!(
                "model '{}' was trained under a different normalization",
                m.method
            )));
        }
        if methods.contains_key(&m.method) {
            return Err(Error::IncompatibleModel(format!("duplicate method '{}'", m.method)));
        }
        let tr = predict(&m.model, train)?;
        let te = predict(&m.model, test)?;
        methods.insert(
            m.method.clone(),
            SplitMetrics {
                train: Metrics::compute(&tr.actual, &tr.predicted)?,
                test: Metrics::compute(&te.actual, &te.predicted)?,
            },
        );
        echoes.insert(
            m.method.clone(),
            ModelEcho { layer_sizes: m.model.layer_sizes().to_vec(), n_weights: m.model.weights().len() },
        );
        predictions.insert(m.method.clone(), (tr, te));
    }
    let paper = paper_reference().into_iter().filter(|(k, _)| methods.contains_key(k)).collect();
    Ok(EvalReport {
        config: BTreeMap::new(),
        seed,
        n_train: train.len(),
        n_test: test.len(),
        models: echoes,
        methods,
        paper,
        predictions,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned table, one row per method plus a `paper` row where a
    /// reference exists.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>10} {:>10} {:>11}   {:>10} {:>10} {:>11}",
            "", "train", "", "", "test", "", ""
        );
        let _ = writeln!(
            out,
            "{:<14} {:>10} {:>10} {:>11}   {:>10} {:>10} {:>11}",
            "method", "MAPE%", "RMSE km", "corr", "MAPE%", "RMSE km", "corr"
        );
        let row = |out: &mut String, label: &str, m: &SplitMetrics| {
            let _ = writeln!(
                out,
                "{:<14} {:>10.4} {:>10.4} {:>11.6}   {:>10.4} {:>10.4} {:>11.6}",
                label, m.train.mape, m.train.rmse, m.train.correlation, m.test.mape, m.test.rmse, m.test.correlation
            );
        };
        for (method, m) in &self.methods {
            row(&mut out, method, m);
            if let Some(p) = self.paper.get(method) {
                row(&mut out, &format!("  paper {method}"), p);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{normalize, Sample};
    use proptest::prelude::*;

    fn loop_mape(a: &[f64], f: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] - f[i]).abs() / a[i];
        }
        s / a.len() as f64 * 100.0
    }

    #[test]
    fn metric_identities() {
        let a = [1.0, 2.5, 4.0, 7.0];
        assert_eq!(mape(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(correlation(&a, &a).unwrap(), 1.0);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(correlation(&a, &neg).unwrap(), -1.0);
        let affine: Vec<f64> = a.iter().map(|x| 2.0 * x + 7.0).collect();
        assert!((correlation(&a, &affine).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_substitution() {
        assert_eq!(mape(&[10.0], &[9.0]).unwrap(), 10.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.535_533_9).abs() < 1e-7);
    }

    #[test]
    fn mape_uses_signed_actual() {
        assert_eq!(mape(&[-10.0], &[-9.0]).unwrap(), -10.0);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(mape(&[1.0, 0.0], &[1.0, 1.0]), Err(Error::UndefinedMape(1))));
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(mape(&[], &[]), Err(Error::Shape(_))));
        assert!(matches!(correlation(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(correlation(&[1.0], &[1.0]), Err(Error::Shape(_))));
    }

    fn toy_split() -> (Dataset, Dataset) {
        let samples: Vec<Sample> = (1..=10)
            .map(|i| Sample { features: [i as f64, 0.0, 0.0, 0.0].map(|v| v + i as f64 * 0.1), target: i as f64 })
            .collect();
        let d = normalize(&Dataset::from_samples(samples, 0)).unwrap();
        crate::dataset::split(&d, 0.7, 1).unwrap()
    }

    /// Linear model reproducing the normalized target from feature 0.
    fn perfect_model() -> MlpModel {
        // [4, 1] network: y = x0 (columns 0 and target share the same map)
        MlpModel::from_weights(&[4, 1], vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn perfect_model_report() {
        let (tr, te) = toy_split();
        let model = TrainedModel { method: "ica".into(), model: perfect_model(), norm: tr.norm };
        let r = build_report(&[model], &tr, &te, 42).unwrap();
        let m = r.methods["ica"];
        for s in [m.train, m.test] {
            assert!(s.mape.abs() < 1e-12 && s.rmse < 1e-12);
            assert!((s.correlation - 1.0).abs() < 1e-12);
        }
        assert_eq!(r.paper["ica"].test, Metrics { mape: 0.0055, rmse: 0.026, correlation: 0.9927 });
        assert!(!r.paper.contains_key("pso"));
        let json = r.to_json();
        assert!(json.find("\"methods\"").unwrap() < json.find("\"paper\"").unwrap());
        assert!(r.to_table().contains("paper ica"));
    }

    #[test]
    fn paper_reference_values() {
        let p = paper_reference();
        assert_eq!(p["pso"].test, Metrics { mape: 0.0067, rmse: 0.038, correlation: 0.9883 });
        assert_eq!(p["gd"].test, Metrics { mape: 0.0108, rmse: 0.085, correlation: 0.9718 });
        assert_eq!(p["ica"].train, Metrics { mape: 0.0061, rmse: 0.031, correlation: 0.9885 });
    }

    #[test]
    fn rejects_mismatched_normalization() {
        let (tr, te) = toy_split();
        let mut norm = tr.norm;
        norm.ranges[4].1 += 1.0;
        let model = TrainedModel { method: "gd".into(), model: perfect_model(), norm };
        assert!(matches!(build_report(&[model], &tr, &te, 0), Err(Error::IncompatibleModel(_))));
    }

    proptest! {
        #[test]
        fn metrics_match_loop_oracles(
            pairs in prop::collection::vec((0.1..100.0f64, -100.0..100.0f64), 2..50)
        ) {
            let (a, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = mape(&a, &f).unwrap();
            let want = loop_mape(&a, &f);
            prop_assert!((m - want).abs() <= 1e-12 * want.abs().max(1e-300));
        }

        #[test]
        fn correlation_is_affine_invariant(
            pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..40),
            scale in 0.1..10.0f64,
            shift in -50.0..50.0f64,
        ) {
            let (a, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r) = correlation(&a, &f) {
                let g: Vec<f64> = f.iter().map(|x| scale * x + shift).collect();
                prop_assert!((correlation(&a, &g).unwrap() - r).abs() < 1e-9);
            }
        }
    }
}
