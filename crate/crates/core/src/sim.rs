//! Monte Carlo generator of synthetic counting experiments.
//!
//! Per setting, the number of produced pairs is `Binomial(trials, mu)`. Each
//! pair falls into one of the four joint outcomes of [`outcome_distribution`],
//! then Alice and Bob detect independently with efficiencies `eta1`, `eta2`.
//! A coincidence is a `++` pair seen by both detectors; a single is a `+`
//! outcome seen by that side's detector regardless of the partner.
//!
//! Pairs are not sampled one at a time: the outcome split is drawn as a
//! multinomial (sequential binomials) and detections as binomials, which has
//! the same distribution as the per-pair process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::anomaly_ratio;
use crate::error::{Error, Result};
use crate::pipeline::{
    fit_scale, normalize_record, predicted_counts, quantum_setting_probabilities,
    AliceSetting, BobSetting, ExperimentRecord, SettingData, SettingPair, Singles,
    DEFAULT_REFERENCE_TRIALS,
};
use crate::quantum::{outcome_distribution, OutcomeDistribution, PairSourceModel, SettingsQuad};

/// Name of the generator recorded in simulation metadata.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9)";

fn default_reference_trials() -> u64 {
    DEFAULT_REFERENCE_TRIALS
}

fn default_anomaly() -> f64 {
    1.0
}

/// Parameters of the generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub model: PairSourceModel,
    #[serde(rename = "angles_deg")]
    pub angles: SettingsQuad,
    /// Trials at `(a,b), (a,b'), (a',b), (a',b')`.
    pub trials_per_setting: [u64; 4],
    /// Probability `mu` that a trial produces a pair.
    pub pair_probability: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Multiplier on the `++` probability at `(a',b')`.
    #[serde(default = "default_anomaly")]
    pub anomaly_multiplier: f64,
    #[serde(default = "default_reference_trials")]
    pub reference_trials: u64,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.angles.validate()?;
        for (name, v) in [
            ("pair_probability", self.pair_probability),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !self.anomaly_multiplier.is_finite() || self.anomaly_multiplier < 0.0 {
            return Err(Error::invalid(
                "anomaly_multiplier",
                format!("must be finite and nonnegative, got {}", self.anomaly_multiplier),
            ));
        }
        if self.trials_per_setting.contains(&0) {
            return Err(Error::invalid("trials_per_setting", "every setting needs at least 1 trial"));
        }
        if self.reference_trials == 0 {
            return Err(Error::invalid("reference_trials", "must be at least 1"));
        }
        self.outcome_distributions().map(|_| ())
    }

    /// Expected coincidences at unit probability after normalization:
    /// `mu * reference_trials * eta1 * eta2`.
    pub fn true_scale(&self) -> f64 {
        self.pair_probability * self.reference_trials as f64 * self.eta1 * self.eta2
    }

    /// Outcome distributions per setting in canonical order, with the anomaly applied at `(a',b')`.
    pub fn outcome_distributions(&self) -> Result<[OutcomeDistribution; 4]> {
        let pairs = self.angles.pairs();
        let mut out = [OutcomeDistribution { p_pp: 0.0, p_pm: 0.0, p_mp: 0.0, p_mm: 0.0 }; 4];
        for (j, (alpha, beta)) in pairs.into_iter().enumerate() {
            out[j] = outcome_distribution(&self.model, alpha, beta)?;
        }
        out[3] = apply_anomaly(out[3], self.anomaly_multiplier)?;
        Ok(out)
    }
}

/// Scales `p_pp` by `multiplier` and rescales the other three outcomes
/// proportionally so the distribution still sums to one.
pub fn apply_anomaly(dist: OutcomeDistribution, multiplier: f64) -> Result<OutcomeDistribution> {
    if multiplier == 1.0 {
        return Ok(dist);
    }
    let p_pp = multiplier * dist.p_pp;
    if !(0.0..=1.0).contains(&p_pp) {
        return Err(Error::invalid(
            "anomaly_multiplier",
            format!("scaled coincidence probability {p_pp} exceeds 1"),
        ));
    }
    let rest = dist.p_pm + dist.p_mp + dist.p_mm;
    if rest <= 0.0 {
        if p_pp == 1.0 {
            return Ok(dist);
        }
        return Err(Error::invalid(
            "anomaly_multiplier",
            "no complementary outcomes to absorb the rescaling",
        ));
    }
    let k = (1.0 - p_pp) / rest;
    Ok(OutcomeDistribution {
        p_pp,
        p_pm: dist.p_pm * k,
        p_mp: dist.p_mp * k,
        p_mm: dist.p_mm * k,
    })
}

/// Per-setting counts of one simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SettingCounts {
    pub pairs: u64,
    pub coincidences: u64,
    pub alice_singles: u64,
    pub bob_singles: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedExperiment {
    /// Record with singles taken from the `(a,b)` setting.
    pub record: ExperimentRecord,
    pub counts: [SettingCounts; 4],
    pub seed: u64,
}

fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p checked in (0, 1)").sample(rng)
}

/// Splits `n` draws over `probs` (summing to one) with sequential binomials.
fn multinomial<R: Rng, const K: usize>(rng: &mut R, n: u64, probs: [f64; K]) -> [u64; K] {
    let mut out = [0; K];
    let mut left = n;
    let mut mass = 1.0;
    for k in 0..K {
        if k == K - 1 {
            out[k] = left;
            break;
        }
        let p = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        out[k] = binomial(rng, left, p);
        left -= out[k];
        mass -= probs[k];
    }
    out
}

fn simulate_setting<R: Rng>(
    rng: &mut R,
    trials: u64,
    mu: f64,
    dist: &OutcomeDistribution,
    eta1: f64,
    eta2: f64,
) -> SettingCounts {
    let pairs = binomial(rng, trials, mu);
    let [n_pp, n_pm, n_mp, _] = multinomial(rng, pairs, dist.as_array());
    // Detection split of ++ pairs: both, Alice only, Bob only, neither.
    let [both, alice_only, bob_only, _] = multinomial(
        rng,
        n_pp,
        [
            eta1 * eta2,
            eta1 * (1.0 - eta2),
            (1.0 - eta1) * eta2,
            (1.0 - eta1) * (1.0 - eta2),
        ],
    );
    let alice_pm = binomial(rng, n_pm, eta1);
    let bob_mp = binomial(rng, n_mp, eta2);
    SettingCounts {
        pairs,
        coincidences: both,
        alice_singles: both + alice_only + alice_pm,
        bob_singles: both + bob_only + bob_mp,
    }
}

/// Runs the forward model with an explicit seed, ignoring `config.seed`.
pub fn simulate_with_seed(config: &SimConfig, seed: u64) -> Result<SimulatedExperiment> {
    config.validate()?;
    let dists = config.outcome_distributions()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: [SettingCounts; 4] = std::array::from_fn(|j| {
        simulate_setting(
            &mut rng,
            config.trials_per_setting[j],
            config.pair_probability,
            &dists[j],
            config.eta1,
            config.eta2,
        )
    });
    let settings: Vec<SettingData> = SettingPair::ALL
        .iter()
        .zip(config.trials_per_setting)
        .zip(&counts)
        .map(|((&pair, trials), c)| SettingData::new(pair, trials, c.coincidences))
        .collect::<Result<_>>()?;
    let singles = Singles {
        alice: AliceSetting::A,
        alice_count: counts[0].alice_singles,
        bob: BobSetting::B,
        bob_count: counts[0].bob_singles,
    };
    let record = ExperimentRecord::new(
        config.reference_trials,
        config.angles,
        &settings,
        Some(singles),
        Some(config.model),
    )?;
    Ok(SimulatedExperiment { record, counts, seed })
}

/// Simulates one experiment. Deterministic given `config.seed`.
pub fn simulate_experiment(config: &SimConfig) -> Result<ExperimentRecord> {
    simulate_with_seed(config, config.seed).map(|s| s.record)
}

/// Sub-seed for repetition `index`, a SplitMix64 step of `(seed, index)`.
pub fn repetition_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub n: usize,
}

impl SampleStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        // Shifted by the first value so identical samples give exactly zero spread.
        let shift = values.first().copied().unwrap_or(0.0);
        let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        SampleStats {
            mean,
            std_dev,
            std_error: std_dev / (n as f64).sqrt(),
            n,
        }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Recovery statistics from repeated simulate-normalize-fit runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryStats {
    pub generator: &'static str,
    pub seeds: Vec<u64>,
    pub true_scale: f64,
    pub scale: SampleStats,
    /// Expected corrected count per setting: `true_scale * Q_j`, with the anomaly at `(a',b')`.
    pub expected_corrected: [f64; 4],
    /// Mean corrected count minus the expectation, per setting.
    pub corrected_bias: [f64; 4],
    /// Corrected over fitted prediction at `(a',b')`, over repetitions with a defined ratio.
    pub anomaly_ratio: Option<SampleStats>,
}

struct Repetition {
    scale: f64,
    corrected: [f64; 4],
    ratio: Option<f64>,
}

fn run_repetition(config: &SimConfig, q: &[f64; 4], seed: u64) -> Result<Repetition> {
    let sim = simulate_with_seed(config, seed)?;
    let corrected = normalize_record(&sim.record)?;
    let fit = fit_scale(&corrected, q)?;
    let predicted = predicted_counts(fit.scale, q);
    Ok(Repetition {
        scale: fit.scale,
        corrected,
        ratio: anomaly_ratio(corrected[3], predicted[3]).ok(),
    })
}

/// Runs the pipeline once per seed (in parallel) and summarizes the recovered scale.
pub fn validate_with_seeds(config: &SimConfig, seeds: &[u64]) -> Result<RecoveryStats> {
    if seeds.len() < 2 {
        return Err(Error::invalid("repetitions", "at least 2 repetitions are required"));
    }
    config.validate()?;
    let q = quantum_setting_probabilities(&config.model, &config.angles)?;
    let reps: Vec<Repetition> = seeds
        .par_iter()
        .map(|&seed| run_repetition(config, &q, seed))
        .collect::<Result<_>>()?;

    let true_scale = config.true_scale();
    let mut expected_corrected = predicted_counts(true_scale, &q);
    expected_corrected[3] *= config.anomaly_multiplier;
    let n = reps.len() as f64;
    let corrected_bias = std::array::from_fn(|j| {
        reps.iter().map(|r| r.corrected[j]).sum::<f64>() / n - expected_corrected[j]
    });
    let scales: Vec<f64> = reps.iter().map(|r| r.scale).collect();
    let ratios: Vec<f64> = reps.iter().filter_map(|r| r.ratio).collect();
    Ok(RecoveryStats {
        generator: GENERATOR,
        seeds: seeds.to_vec(),
        true_scale,
        scale: SampleStats::from_values(&scales),
        expected_corrected,
        corrected_bias,
        anomaly_ratio: (!ratios.is_empty()).then(|| SampleStats::from_values(&ratios)),
    })
}

/// Runs `repetitions` independent experiments with sub-seeds derived from
/// `config.seed`; results do not depend on thread scheduling.
pub fn validate_pipeline(config: &SimConfig, repetitions: usize) -> Result<RecoveryStats> {
    let seeds: Vec<u64> = (0..repetitions as u64)
        .map(|i| repetition_seed(config.seed, i))
        .collect();
    validate_with_seeds(config, &seeds)
}
