//! Closed-form quantum predictions for the polarization-entangled pair state
//! `(|HH> + r|VV>) / sqrt(1 + r^2)` measured by two polarization analyzers.
//!
//! The "+" channel of an analyzer at angle `alpha` is the outcome whose joint
//! probability with the partner's "+" channel is
//! `(sin a sin b + r cos a cos b)^2 / (1 + r^2)`. The "-" channel is the
//! orthogonal one, obtained by shifting the angle by 90 degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source parameter `r`: amplitude ratio of `|VV>` to `|HH>`.
///
/// Values above 1 are allowed and simply swap the dominant component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct PairSourceModel {
    r: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    r: f64,
}

impl TryFrom<RawModel> for PairSourceModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        PairSourceModel::new(raw.r)
    }
}

impl From<PairSourceModel> for RawModel {
    fn from(m: PairSourceModel) -> Self {
        RawModel { r: m.r }
    }
}

impl PairSourceModel {
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::invalid("r", format!("must be finite, got {r}")));
        }
        if r < 0.0 {
            return Err(Error::invalid("r", format!("must be nonnegative, got {r}")));
        }
        Ok(PairSourceModel { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Squared norm of the unnormalized state, `1 + r^2`.
    fn norm_sq(&self) -> f64 {
        1.0 + self.r * self.r
    }
}

/// Analyzer angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub fn from_degrees(degrees: f64) -> Result<Self> {
        if !degrees.is_finite() {
            return Err(Error::invalid(
                "angle",
                format!("must be finite, got {degrees}"),
            ));
        }
        Ok(Angle(degrees))
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    /// `(sin, cos)` of the angle, exact at multiples of 90 degrees.
    pub fn sin_cos(self) -> (f64, f64) {
        if self.0 % 90.0 == 0.0 {
            match (self.0 / 90.0).rem_euclid(4.0) as u8 {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.0, -1.0),
                _ => (-1.0, 0.0),
            }
        } else {
            self.radians().sin_cos()
        }
    }

    /// The orthogonal analyzer channel.
    pub fn orthogonal(self) -> Angle {
        Angle(self.0 + 90.0)
    }
}

/// The four analyzer angles `a, a', b, b'` of a CH-type experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsQuad {
    pub a: Angle,
    pub a_prime: Angle,
    pub b: Angle,
    pub b_prime: Angle,
}

impl SettingsQuad {
    pub fn from_degrees(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Result<Self> {
        Ok(SettingsQuad {
            a: Angle::from_degrees(a)?,
            a_prime: Angle::from_degrees(a_prime)?,
            b: Angle::from_degrees(b)?,
            b_prime: Angle::from_degrees(b_prime)?,
        })
    }

    /// `a = 3.8, a' = -25.2, b = -3.8, b' = 25.2` degrees.
    pub fn christensen() -> Self {
        SettingsQuad {
            a: Angle(3.8),
            a_prime: Angle(-25.2),
            b: Angle(-3.8),
            b_prime: Angle(25.2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for angle in [self.a, self.a_prime, self.b, self.b_prime] {
            Angle::from_degrees(angle.0)?;
        }
        Ok(())
    }

    /// Angle pairs in canonical order `(a,b), (a,b'), (a',b), (a',b')`.
    pub fn pairs(&self) -> [(Angle, Angle); 4] {
        [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        ]
    }
}

/// Joint probabilities of the four transmit(+)/reflect(-) outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_pp: f64,
    pub p_pm: f64,
    pub p_mp: f64,
    pub p_mm: f64,
}

impl OutcomeDistribution {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p_pp, self.p_pm, self.p_mp, self.p_mm]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

fn check_model(model: &PairSourceModel) -> Result<()> {
    PairSourceModel::new(model.r).map(|_| ())
}

fn check_angle(angle: Angle) -> Result<()> {
    Angle::from_degrees(angle.0).map(|_| ())
}

fn check_efficiency(name: &'static str, eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(name, format!("must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

fn pp_unchecked(model: &PairSourceModel, alpha: Angle, beta: Angle) -> f64 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let amp = sa * sb + model.r * (ca * cb);
    (amp * amp / model.norm_sq()).clamp(0.0, 1.0)
}

fn singles_unchecked(model: &PairSourceModel, angle: Angle) -> f64 {
    let (s, c) = angle.sin_cos();
    let r2 = model.r * model.r;
    ((s * s + r2 * c * c) / model.norm_sq()).clamp(0.0, 1.0)
}

/// Probability that both analyzers transmit: `(sin a sin b + r cos a cos b)^2 / (1 + r^2)`.
pub fn coincidence_probability(model: &PairSourceModel, alpha: Angle, beta: Angle) -> Result<f64> {
    check_model(model)?;
    check_angle(alpha)?;
    check_angle(beta)?;
    Ok(pp_unchecked(model, alpha, beta))
}

/// Full joint distribution; the three non-`++` outcomes substitute the
/// orthogonal channel on one or both sides.
pub fn outcome_distribution(
    model: &PairSourceModel,
    alpha: Angle,
    beta: Angle,
) -> Result<OutcomeDistribution> {
    check_model(model)?;
    check_angle(alpha)?;
    check_angle(beta)?;
    let (ao, bo) = (alpha.orthogonal(), beta.orthogonal());
    Ok(OutcomeDistribution {
        p_pp: pp_unchecked(model, alpha, beta),
        p_pm: pp_unchecked(model, alpha, bo),
        p_mp: pp_unchecked(model, ao, beta),
        p_mm: pp_unchecked(model, ao, bo),
    })
}

/// Probability of a "+" outcome on one side, marginalized over the partner.
/// The state is symmetric, so the same expression serves Alice and Bob.
pub fn singles_probability(model: &PairSourceModel, angle: Angle) -> Result<f64> {
    check_model(model)?;
    check_angle(angle)?;
    Ok(singles_unchecked(model, angle))
}

/// `A = p(a,b) + p(a,b') + p(a',b) - p(a',b')`.
fn coincidence_combination(model: &PairSourceModel, s: &SettingsQuad) -> f64 {
    pp_unchecked(model, s.a, s.b) + pp_unchecked(model, s.a, s.b_prime)
        + pp_unchecked(model, s.a_prime, s.b)
        - pp_unchecked(model, s.a_prime, s.b_prime)
}

/// Clauser-Horne statistic at the probability level with detector efficiencies:
///
/// `J = eta1 eta2 [p(a,b) + p(a,b') + p(a',b) - p(a',b')] - eta1 pA(a) - eta2 pB(b)`.
///
/// Local hidden-variable models satisfy `J <= 0`.
pub fn ch_statistic(
    model: &PairSourceModel,
    settings: &SettingsQuad,
    eta1: f64,
    eta2: f64,
) -> Result<f64> {
    check_model(model)?;
    settings.validate()?;
    check_efficiency("eta1", eta1)?;
    check_efficiency("eta2", eta2)?;
    let combo = coincidence_combination(model, settings);
    Ok(eta1 * eta2 * combo
        - eta1 * singles_unchecked(model, settings.a)
        - eta2 * singles_unchecked(model, settings.b))
}

/// Symmetric efficiency `eta*` at which `J` crosses zero. Above it (and below 1)
/// the quantum prediction violates the CH inequality.
pub fn critical_efficiency(model: &PairSourceModel, settings: &SettingsQuad) -> Result<f64> {
    check_model(model)?;
    settings.validate()?;
    let combo = coincidence_combination(model, settings);
    if combo <= 0.0 {
        return Err(Error::NonPositiveDenominator(combo));
    }
    let singles = singles_unchecked(model, settings.a) + singles_unchecked(model, settings.b);
    Ok(singles / combo)
}
