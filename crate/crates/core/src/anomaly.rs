//! Comparison of corrected counts with the fitted quantum prediction, and the
//! per-setting anomaly diagnostics.
//!
//! The statistical uncertainty of a predicted count `P` is taken to be
//! `sqrt(P)` (Poisson with the predicted mean). Diagnostics whose predicted
//! count is not positive are undefined and carried as `None`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{
    fit_scale, normalize_count, normalize_record, predicted_counts,
    quantum_setting_probabilities, ExperimentRecord, SettingPair,
};
use crate::quantum::{PairSourceModel, SettingsQuad};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    #[serde(serialize_with = "serialize_pair")]
    pub pair: SettingPair,
    pub raw: u64,
    pub corrected: f64,
    pub probability: f64,
    pub predicted: f64,
    pub z_score: Option<f64>,
    pub ratio: Option<f64>,
}

fn serialize_pair<S: serde::Serializer>(pair: &SettingPair, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&pair.key())
}

/// Raw, corrected and predicted counts at the four settings, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub reference_trials: u64,
    pub model: PairSourceModel,
    pub angles: SettingsQuad,
    pub scale: f64,
    pub sse: f64,
    pub rows: [ComparisonRow; 4],
}

/// `(corrected - predicted) / sqrt(predicted)`.
pub fn poisson_z_score(corrected: f64, predicted: f64) -> Option<f64> {
    (predicted > 0.0).then(|| (corrected - predicted) / predicted.sqrt())
}

/// Z-scores at all four settings; fails naming the first setting whose
/// prediction is not positive.
pub fn poisson_z_scores(corrected: &[f64; 4], predicted: &[f64; 4]) -> Result<[f64; 4]> {
    let mut z = [0.0; 4];
    for (j, pair) in SettingPair::ALL.iter().enumerate() {
        z[j] = poisson_z_score(corrected[j], predicted[j])
            .ok_or_else(|| Error::UndefinedDiagnostic(pair.key()))?;
    }
    Ok(z)
}

/// Empirical-to-quantum ratio `corrected / predicted`.
pub fn anomaly_ratio(corrected: f64, predicted: f64) -> Result<f64> {
    if predicted.is_nan() || predicted <= 0.0 {
        return Err(Error::UndefinedDiagnostic(format!("predicted = {predicted}")));
    }
    Ok(corrected / predicted)
}

/// Normalizes the record, fits the scale against `model` and tabulates the
/// diagnostics. All-zero counts give a zero scale and undefined diagnostics.
pub fn build_comparison(record: &ExperimentRecord, model: &PairSourceModel) -> Result<ComparisonTable> {
    let corrected = normalize_record(record)?;
    let q = quantum_setting_probabilities(model, record.angles())?;
    let fit = fit_scale(&corrected, &q)?;
    let predicted = predicted_counts(fit.scale, &q);
    let raw = record.raw_counts();
    let rows = std::array::from_fn(|j| ComparisonRow {
        pair: SettingPair::ALL[j],
        raw: raw[j],
        corrected: corrected[j],
        probability: q[j],
        predicted: predicted[j],
        z_score: poisson_z_score(corrected[j], predicted[j]),
        ratio: anomaly_ratio(corrected[j], predicted[j]).ok(),
    });
    Ok(ComparisonTable {
        reference_trials: record.reference_trials(),
        model: *model,
        angles: *record.angles(),
        scale: fit.scale,
        sse: fit.sse,
        rows,
    })
}

/// Count-level CH statistic built from measured data, available only when the
/// record carries singles.
///
/// With singles recorded at Alice setting `x` and Bob setting `y`, the
/// statistic is `C(x,y) + C(x,y') + C(x',y) - C(x',y') - S(x) - S(y)` on counts
/// normalized to the reference trials. Singles are normalized with the trials
/// of setting `(x,y)`. Positive values indicate a violation.
pub fn empirical_ch_counts(record: &ExperimentRecord) -> Result<Option<f64>> {
    let Some(singles) = record.singles() else {
        return Ok(None);
    };
    let corrected = normalize_record(record)?;
    let (x, y) = (singles.alice, singles.bob);
    let c = |pair: SettingPair| corrected[pair.index()];
    let coincidences = c(SettingPair { alice: x, bob: y })
        + c(SettingPair { alice: x, bob: y.other() })
        + c(SettingPair { alice: x.other(), bob: y })
        - c(SettingPair { alice: x.other(), bob: y.other() });
    let trials = record.setting(SettingPair { alice: x, bob: y }).trials;
    let reference = record.reference_trials();
    let s_a = normalize_count(singles.alice_count, trials, reference)?;
    let s_b = normalize_count(singles.bob_count, trials, reference)?;
    Ok(Some(coincidences - s_a - s_b))
}
