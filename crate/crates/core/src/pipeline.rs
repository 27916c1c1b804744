//! Trial normalization and the least-squares fit of the coincidence scale
//! `N * eta1 * eta2` against the quantum predictions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{coincidence_probability, PairSourceModel, SettingsQuad};

/// Number of trials every setting is normalized to unless a record says otherwise.
pub const DEFAULT_REFERENCE_TRIALS: u64 = 28_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AliceSetting {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "a_prime")]
    APrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BobSetting {
    #[serde(rename = "b")]
    B,
    #[serde(rename = "b_prime")]
    BPrime,
}

impl AliceSetting {
    pub fn key(self) -> &'static str {
        match self {
            AliceSetting::A => "a",
            AliceSetting::APrime => "a_prime",
        }
    }

    pub fn other(self) -> Self {
        match self {
            AliceSetting::A => AliceSetting::APrime,
            AliceSetting::APrime => AliceSetting::A,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            AliceSetting::A => "a",
            AliceSetting::APrime => "a'",
        }
    }
}

impl BobSetting {
    pub fn key(self) -> &'static str {
        match self {
            BobSetting::B => "b",
            BobSetting::BPrime => "b_prime",
        }
    }

    pub fn other(self) -> Self {
        match self {
            BobSetting::B => BobSetting::BPrime,
            BobSetting::BPrime => BobSetting::B,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BobSetting::B => "b",
            BobSetting::BPrime => "b'",
        }
    }
}

/// One of the four analyzer combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SettingPair {
    pub alice: AliceSetting,
    pub bob: BobSetting,
}

impl SettingPair {
    /// Canonical order `(a,b), (a,b'), (a',b), (a',b')`.
    pub const ALL: [SettingPair; 4] = [
        SettingPair { alice: AliceSetting::A, bob: BobSetting::B },
        SettingPair { alice: AliceSetting::A, bob: BobSetting::BPrime },
        SettingPair { alice: AliceSetting::APrime, bob: BobSetting::B },
        SettingPair { alice: AliceSetting::APrime, bob: BobSetting::BPrime },
    ];

    pub fn index(self) -> usize {
        let i = match self.alice {
            AliceSetting::A => 0,
            AliceSetting::APrime => 2,
        };
        i + match self.bob {
            BobSetting::B => 0,
            BobSetting::BPrime => 1,
        }
    }

    /// Machine-readable key, e.g. `a_prime,b`.
    pub fn key(self) -> String {
        format!("{},{}", self.alice.key(), self.bob.key())
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C({},{})", self.alice.symbol(), self.bob.symbol())
    }
}

/// Trials and raw coincidences recorded at one setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SettingData {
    pub pair: SettingPair,
    pub trials: u64,
    pub coincidences: u64,
}

impl SettingData {
    pub fn new(pair: SettingPair, trials: u64, coincidences: u64) -> Result<Self> {
        let data = SettingData { pair, trials, coincidences };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::validation(
                format!("setting {}", self.pair.key()),
                "trials must be at least 1",
            ));
        }
        if self.coincidences > self.trials {
            return Err(Error::validation(
                format!("setting {}", self.pair.key()),
                format!(
                    "coincidences ({}) exceed trials ({})",
                    self.coincidences, self.trials
                ),
            ));
        }
        Ok(())
    }
}

/// Singles counts with the analyzer setting each was recorded at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singles {
    pub alice: AliceSetting,
    pub alice_count: u64,
    pub bob: BobSetting,
    pub bob_count: u64,
}

/// A complete four-setting counting experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    reference_trials: u64,
    angles: SettingsQuad,
    settings: [SettingData; 4],
    singles: Option<Singles>,
    model: Option<PairSourceModel>,
}

impl ExperimentRecord {
    /// Builds a record from settings in any order. Exactly one entry per
    /// setting pair is required; entries are stored in canonical order.
    pub fn new(
        reference_trials: u64,
        angles: SettingsQuad,
        settings: &[SettingData],
        singles: Option<Singles>,
        model: Option<PairSourceModel>,
    ) -> Result<Self> {
        if reference_trials == 0 {
            return Err(Error::validation("record", "reference_trials must be at least 1"));
        }
        angles.validate()?;
        if settings.len() != 4 {
            return Err(Error::validation(
                "settings",
                format!("expected exactly 4 settings, got {}", settings.len()),
            ));
        }
        let mut slots: [Option<SettingData>; 4] = [None; 4];
        for data in settings {
            data.validate()?;
            let slot = &mut slots[data.pair.index()];
            if slot.is_some() {
                return Err(Error::validation(
                    format!("setting {}", data.pair.key()),
                    "duplicate setting pair",
                ));
            }
            *slot = Some(*data);
        }
        // Four entries with no duplicates fill every slot.
        let settings = slots.map(|s| s.expect("all four slots filled"));
        Ok(ExperimentRecord {
            reference_trials,
            angles,
            settings,
            singles,
            model,
        })
    }

    pub fn reference_trials(&self) -> u64 {
        self.reference_trials
    }

    pub fn angles(&self) -> &SettingsQuad {
        &self.angles
    }

    /// Settings in canonical order.
    pub fn settings(&self) -> &[SettingData; 4] {
        &self.settings
    }

    pub fn setting(&self, pair: SettingPair) -> &SettingData {
        &self.settings[pair.index()]
    }

    pub fn singles(&self) -> Option<&Singles> {
        self.singles.as_ref()
    }

    pub fn model(&self) -> Option<&PairSourceModel> {
        self.model.as_ref()
    }

    pub fn raw_counts(&self) -> [u64; 4] {
        self.settings.map(|s| s.coincidences)
    }
}

/// Rescales a raw count to `reference_trials` trials. The result is not rounded.
pub fn normalize_count(raw: u64, trials: u64, reference_trials: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if reference_trials == 0 {
        return Err(Error::invalid("reference_trials", "must be at least 1"));
    }
    if trials == reference_trials {
        return Ok(raw as f64);
    }
    Ok(raw as f64 * reference_trials as f64 / trials as f64)
}

/// Corrected counts in canonical setting order.
pub fn normalize_record(record: &ExperimentRecord) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (slot, s) in out.iter_mut().zip(record.settings.iter()) {
        *slot = normalize_count(s.coincidences, s.trials, record.reference_trials)?;
    }
    Ok(out)
}

/// `[Q1..Q4]`, the coincidence probabilities at the four settings in canonical order.
pub fn quantum_setting_probabilities(
    model: &PairSourceModel,
    settings: &SettingsQuad,
) -> Result<[f64; 4]> {
    let pairs = settings.pairs();
    let mut q = [0.0; 4];
    for (slot, (alpha, beta)) in q.iter_mut().zip(pairs) {
        *slot = coincidence_probability(model, alpha, beta)?;
    }
    Ok(q)
}

/// Result of the least-squares scale fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleFit {
    /// Estimate of `N * eta1 * eta2`: expected coincidences at unit probability.
    pub scale: f64,
    pub q: [f64; 4],
    pub e: [f64; 4],
    pub residuals: [f64; 4],
    pub sse: f64,
}

/// Minimizes `sum_j (E_j - s Q_j)^2` over `s`, giving `s = sum Q E / sum Q^2`.
pub fn fit_scale(e: &[f64; 4], q: &[f64; 4]) -> Result<ScaleFit> {
    for &ej in e {
        if !ej.is_finite() || ej < 0.0 {
            return Err(Error::invalid("e", format!("counts must be finite and nonnegative, got {ej}")));
        }
    }
    for &qj in q {
        if !(0.0..=1.0).contains(&qj) {
            return Err(Error::invalid("q", format!("probabilities must lie in [0, 1], got {qj}")));
        }
    }
    let qq: f64 = q.iter().map(|x| x * x).sum();
    if qq <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    let qe: f64 = q.iter().zip(e).map(|(x, y)| x * y).sum();
    let scale = qe / qq;
    let mut residuals = [0.0; 4];
    for j in 0..4 {
        residuals[j] = e[j] - scale * q[j];
    }
    let sse = residuals.iter().map(|r| r * r).sum();
    Ok(ScaleFit {
        scale,
        q: *q,
        e: *e,
        residuals,
        sse,
    })
}

/// `scale * Q_j`, unrounded.
pub fn predicted_counts(scale: f64, q: &[f64; 4]) -> [f64; 4] {
    q.map(|qj| scale * qj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const REFERENCE_Q: [f64; 4] = [
        0.060_652_714_933_3,
        0.064_767_507_310_1,
        0.064_767_507_310_1,
        0.000_933_977_238_314,
    ];

    #[test]
    fn normalize_examples() {
        assert_abs_diff_eq!(
            normalize_count(29173, 27_220_875, 28_000_000).unwrap(),
            30008.0,
            epsilon = 0.5
        );
        assert_eq!(normalize_count(12345, 777, 777).unwrap(), 12345.0);
        assert_eq!(normalize_count(0, 31, 28_000_000).unwrap(), 0.0);
        assert!(normalize_count(1, 0, 10).is_err());
        assert!(normalize_count(1, 10, 0).is_err());
    }

    #[test]
    fn setting_data_invariants() {
        let pair = SettingPair::ALL[0];
        assert!(SettingData::new(pair, 0, 0).is_err());
        assert!(SettingData::new(pair, 10, 11).is_err());
        assert!(SettingData::new(pair, 10, 10).is_ok());
    }

    #[test]
    fn record_rejects_duplicates_and_reorders() {
        let angles = SettingsQuad::christensen();
        let mut settings: Vec<SettingData> = SettingPair::ALL
            .iter()
            .rev()
            .map(|&p| SettingData::new(p, 100, p.index() as u64).unwrap())
            .collect();
        let rec = ExperimentRecord::new(100, angles, &settings, None, None).unwrap();
        assert_eq!(rec.raw_counts(), [0, 1, 2, 3]);

        settings[0] = settings[1];
        let err = ExperimentRecord::new(100, angles, &settings, None, None).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
        assert!(ExperimentRecord::new(100, angles, &settings[..3], None, None).is_err());
        assert!(ExperimentRecord::new(0, angles, &settings, None, None).is_err());
    }

    #[test]
    fn normalize_record_identity_and_zero() {
        let angles = SettingsQuad::christensen();
        let settings: Vec<_> = SettingPair::ALL
            .iter()
            .zip([5u64, 6, 7, 8])
            .map(|(&p, c)| SettingData::new(p, 1000, c).unwrap())
            .collect();
        let rec = ExperimentRecord::new(1000, angles, &settings, None, None).unwrap();
        assert_eq!(normalize_record(&rec).unwrap(), [5.0, 6.0, 7.0, 8.0]);

        let zeros: Vec<_> = SettingPair::ALL
            .iter()
            .map(|&p| SettingData::new(p, 999, 0).unwrap())
            .collect();
        let rec = ExperimentRecord::new(1000, angles, &zeros, None, None).unwrap();
        assert_eq!(normalize_record(&rec).unwrap(), [0.0; 4]);
    }

    #[test]
    fn setting_probabilities() {
        let m = PairSourceModel::new(0.26).unwrap();
        let q = quantum_setting_probabilities(&m, &SettingsQuad::christensen()).unwrap();
        for (got, want) in q.iter().zip(REFERENCE_Q) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
        assert_eq!(q[1], q[2]);

        for r in [0.0, 0.26, 1.7] {
            let m = PairSourceModel::new(r).unwrap();
            let axes = SettingsQuad::from_degrees(0.0, 90.0, 0.0, 90.0).unwrap();
            let q = quantum_setting_probabilities(&m, &axes).unwrap();
            let n = 1.0 + r * r;
            let want = [r * r / n, 0.0, 0.0, 1.0 / n];
            for (got, want) in q.iter().zip(want) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn fit_exact_multiple() {
        for k in [0.0, 1.0, 518_037.0, 3.25] {
            let e = REFERENCE_Q.map(|q| k * q);
            let fit = fit_scale(&e, &REFERENCE_Q).unwrap();
            assert_relative_eq!(fit.scale, k, max_relative = 1e-14);
            assert!(fit.sse <= 1e-18 * (1.0 + k * k));
        }
    }

    #[test]
    fn fit_rejects_degenerate_and_bad_inputs() {
        assert_eq!(fit_scale(&[1.0; 4], &[0.0; 4]), Err(Error::DegenerateFit));
        assert!(fit_scale(&[-1.0, 0.0, 0.0, 0.0], &REFERENCE_Q).is_err());
        assert!(fit_scale(&[f64::NAN, 0.0, 0.0, 0.0], &REFERENCE_Q).is_err());
        assert!(fit_scale(&[1.0; 4], &[1.5, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn published_scale() {
        let e = [30008.0, 33721.0, 34687.0, 1867.0];
        let fit = fit_scale(&e, &REFERENCE_Q).unwrap();
        assert_relative_eq!(fit.scale, 518_037.0, max_relative = 5e-4);
    }

    #[test]
    fn predicted_examples() {
        assert_eq!(predicted_counts(0.0, &REFERENCE_Q), [0.0; 4]);
        assert_eq!(predicted_counts(1.0, &REFERENCE_Q), REFERENCE_Q);
        let want = [31419.0, 33553.0, 33553.0, 484.0];
        for (got, want) in predicted_counts(518_037.0, &REFERENCE_Q).iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 3.0);
        }
    }

    fn arb_q() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(0.0..1.0f64).prop_filter("nonzero", |q| q.iter().any(|&x| x > 1e-3))
    }

    proptest! {
        #[test]
        fn fit_is_linear(e in prop::array::uniform4(0.0..1e6f64), q in arb_q(), k in 1e-3..1e3f64) {
            let base = fit_scale(&e, &q).unwrap().scale;
            let scaled = fit_scale(&e.map(|x| k * x), &q).unwrap().scale;
            prop_assert!((scaled - k * base).abs() <= 1e-12 * (k * base).abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn residuals_orthogonal(e in prop::array::uniform4(0.0..1e6f64), q in arb_q()) {
            let fit = fit_scale(&e, &q).unwrap();
            let dot: f64 = q.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            let qe: f64 = q.iter().zip(&e).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-6 * qe.max(1.0));
            let sse: f64 = fit.residuals.iter().map(|r| r * r).sum();
            prop_assert!((sse - fit.sse).abs() <= 1e-9 * sse.max(1e-300));
        }

        #[test]
        fn normalization_round_trip(c in 0u64..=1_000_000, reference in 1_000_000u64..100_000_000, frac in 0.5..2.0f64) {
            let trials = (reference as f64 * frac) as u64;
            let raw = (c as f64 * trials as f64 / reference as f64).round() as u64;
            let back = normalize_count(raw, trials, reference).unwrap();
            prop_assert!((back - c as f64).abs() <= 1.0);
        }
    }
}
