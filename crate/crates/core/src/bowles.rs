//! The Bowles test on an inner link: three CHSH blocks sharing three lower
//! settings and six upper settings.

use crate::error::{Error, Result};
use crate::network::{Behavior, LOWER_SETTINGS, UPPER_SETTINGS};

/// `6 sqrt 2`.
pub const QUANTUM_MAXIMUM: f64 = 6.0 * std::f64::consts::SQRT_2;
pub const LOCAL_BOUND: f64 = 6.0;

/// `(x2, x1, sign)` for each of the twelve correlators, 1-based.
pub const TERMS: [(usize, usize, f64); 12] = [
    (1, 1, 1.0),
    (1, 2, 1.0),
    (2, 1, 1.0),
    (2, 2, -1.0),
    (1, 3, 1.0),
    (1, 4, 1.0),
    (3, 3, -1.0),
    (3, 4, 1.0),
    (2, 5, 1.0),
    (2, 6, 1.0),
    (3, 5, -1.0),
    (3, 6, 1.0),
];

const N_UPPER: usize = UPPER_SETTINGS - 1;

/// Correlators `E[x2][x1]` between the lower and upper branch of one party.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelatorTable {
    values: [[f64; N_UPPER]; LOWER_SETTINGS],
}

impl CorrelatorTable {
    pub fn new(values: [[f64; N_UPPER]; LOWER_SETTINGS]) -> Result<Self> {
        if let Some(bad) = values
            .iter()
            .flatten()
            .find(|e| e.is_nan() || e.abs() > 1.0 + 1e-9)
        {
            return Err(Error::InvalidParameter(format!(
                "correlator {bad} outside [-1, 1]"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros() -> Self {
        Self {
            values: [[0.0; N_UPPER]; LOWER_SETTINGS],
        }
    }

    /// Deterministic local strategy: `E[x2][x1] = lower[x2] * upper[x1]`.
    pub fn from_strategy(lower: [i8; LOWER_SETTINGS], upper: [i8; N_UPPER]) -> Self {
        let mut values = [[0.0; N_UPPER]; LOWER_SETTINGS];
        for (row, &l) in values.iter_mut().zip(&lower) {
            for (e, &u) in row.iter_mut().zip(&upper) {
                *e = f64::from(l * u);
            }
        }
        Self { values }
    }

    /// `E_{x2, x1}` with 1-based settings.
    pub fn get(&self, x2: usize, x1: usize) -> f64 {
        self.values[x2 - 1][x1 - 1]
    }

    pub fn values(&self) -> &[[f64; N_UPPER]; LOWER_SETTINGS] {
        &self.values
    }
}

/// Reference settings used for every device outside the measured link.
pub fn reference_settings(behavior: &Behavior) -> Vec<usize> {
    (0..behavior.device_count())
        .map(|d| if d % 2 == 0 { 1 } else { 0 })
        .collect()
}

/// Correlators of party `link`, other devices at the reference settings.
pub fn correlators(behavior: &Behavior, link: usize) -> Result<CorrelatorTable> {
    correlators_with_reference(behavior, link, &reference_settings(behavior))
}

/// Correlators of party `link` with the other devices' settings taken from `reference`.
pub fn correlators_with_reference(
    behavior: &Behavior,
    link: usize,
    reference: &[usize],
) -> Result<CorrelatorTable> {
    let (upper, lower) = (2 * link, 2 * link + 1);
    if lower >= behavior.device_count() {
        return Err(Error::InvalidParameter(format!(
            "link {link} not present among {} devices",
            behavior.device_count()
        )));
    }
    if behavior.setting_count(upper) < UPPER_SETTINGS
        || behavior.setting_count(lower) < LOWER_SETTINGS
    {
        return Err(Error::MissingEntries(format!(
            "link {link} lacks Bowles settings"
        )));
    }
    let mut settings = reference.to_vec();
    let mut values = [[0.0; N_UPPER]; LOWER_SETTINGS];
    for (x2, row) in values.iter_mut().enumerate() {
        for (i, e) in row.iter_mut().enumerate() {
            let x1 = i + 1;
            if behavior.outcome_counts()[upper][x1] != 2
                || behavior.outcome_counts()[lower][x2] != 2
            {
                return Err(Error::MissingEntries(format!(
                    "settings (x2 = {}, x1 = {x1}) are not binary",
                    x2 + 1
                )));
            }
            settings[upper] = x1;
            settings[lower] = x2;
            let mut acc = 0.0;
            for a1 in 0..2 {
                for a2 in 0..2 {
                    let sign = if (a1 + a2) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * behavior.marginal(&settings, &[(upper, a1), (lower, a2)])?;
                }
            }
            *e = acc;
        }
    }
    CorrelatorTable::new(values)
}

pub fn bowles_score(table: &CorrelatorTable) -> f64 {
    TERMS
        .iter()
        .map(|&(x2, x1, sign)| sign * table.get(x2, x1))
        .sum()
}

/// Bowles score of every inner link in the behavior.
pub fn link_scores(behavior: &Behavior) -> Result<Vec<f64>> {
    (0..behavior.device_count() / 2)
        .map(|link| correlators(behavior, link).map(|t| bowles_score(&t)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalBound {
    pub value: f64,
    pub lower: [i8; LOWER_SETTINGS],
    pub upper: [i8; N_UPPER],
}

/// Maximum over all `2^3 * 2^6` deterministic strategies, with the first maximiser.
pub fn classical_bound_bruteforce() -> ClassicalBound {
    let sign = |bits: u32, k: usize| if bits >> k & 1 == 0 { 1i8 } else { -1 };
    let mut best: Option<ClassicalBound> = None;
    for bits in 0u32..1 << (LOWER_SETTINGS + N_UPPER) {
        let lower = std::array::from_fn(|k| sign(bits, k));
        let upper = std::array::from_fn(|k| sign(bits, LOWER_SETTINGS + k));
        let value = bowles_score(&CorrelatorTable::from_strategy(lower, upper));
        if best.is_none_or(|b| value > b.value) {
            best = Some(ClassicalBound {
                value,
                lower,
                upper,
            });
        }
    }
    best.expect("non-empty enumeration")
}
