//! The broadcast network: per-party splitting isometries, the two measurement
//! branches, and exact Born-rule behaviors.
//!
//! Register order per party is `(X1_in, X1_aux, X2)`; parties are
//! concatenated in source order. In a [`Behavior`], party `p` owns two devices:
//! device `2p` is the upper branch `X1` (settings `x1 = 0..=6`) and device
//! `2p + 1` is the lower branch `X2`, whose setting index `i` stands for
//! `x2 = i + 1`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::kit::{bell_state, binary_povm, pauli, phi_plus, Pauli, Povm};
use crate::tensor::{
    kron, partial_transpose, permute_subsystems, CMatrix, LabeledOperator, Map, SubsystemMask,
    VALIDATION_TOL,
};

pub const UPPER_SETTINGS: usize = 7;
pub const LOWER_SETTINGS: usize = 3;
pub const UPPER_OUTCOMES: [usize; UPPER_SETTINGS] = [4, 2, 2, 2, 2, 2, 2];

/// Pauli measured by the lower branch for `x2 = 1, 2, 3`.
///
/// With this assignment each CHSH block of the Bowles expression pairs the
/// lower observables with the upper `M` operators that maximise it on `Phi+`.
pub const LOWER_OBSERVABLES: [Pauli; LOWER_SETTINGS] = [Pauli::Z, Pauli::X, Pauli::Y];

/// Pauli measured at 1-based lower setting `x2`.
pub fn lower_observable(x2: usize) -> Result<Pauli> {
    x2.checked_sub(1)
        .and_then(|i| LOWER_OBSERVABLES.get(i).copied())
        .ok_or_else(|| Error::InvalidParameter(format!("lower setting x2 = {x2} not in 1..=3")))
}

/// `M^(x1)` for `x1 = 1..=6`: `(Z +- X)/sqrt2`, `(Z +- Y)/sqrt2`, `(X +- Y)/sqrt2`.
pub fn upper_observable(x1: usize) -> Result<LabeledOperator> {
    let (a, b, sign) = match x1 {
        1 => (Pauli::Z, Pauli::X, 1.0),
        2 => (Pauli::Z, Pauli::X, -1.0),
        3 => (Pauli::Z, Pauli::Y, 1.0),
        4 => (Pauli::Z, Pauli::Y, -1.0),
        5 => (Pauli::X, Pauli::Y, 1.0),
        6 => (Pauli::X, Pauli::Y, -1.0),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "upper observable x1 = {x1} not in 1..=6"
            )))
        }
    };
    pauli(a)
        .add(&pauli(b).scale(sign))
        .map(|m| m.scale(FRAC_1_SQRT_2))
}

/// Splitting isometry and both measurement branches of one party.
#[derive(Clone, Debug, PartialEq)]
pub struct PartyDevices {
    isometry: LabeledOperator,
    upper: Povm,
    lower: Povm,
    transposed: bool,
}

impl PartyDevices {
    pub fn new(
        isometry: LabeledOperator,
        upper: Povm,
        lower: Povm,
        transposed: bool,
    ) -> Result<Self> {
        Map::Isometry(&isometry).validate()?;
        let out = isometry.dims_out();
        if out.len() != 3 || isometry.dims_in().len() != 1 {
            return Err(Error::InvalidModel(format!(
                "isometry must map one system to (X1_in, X1_aux, X2), got {:?} <- {:?}",
                out,
                isometry.dims_in()
            )));
        }
        if upper.dims() != &out[..2] || lower.dims() != &out[2..] {
            return Err(Error::InvalidModel(
                "POVM supports do not match isometry outputs".into(),
            ));
        }
        if upper.outcome_counts() != UPPER_OUTCOMES
            || lower.outcome_counts() != vec![2; LOWER_SETTINGS]
        {
            return Err(Error::InvalidModel(format!(
                "unexpected outcome counts {:?} / {:?}",
                upper.outcome_counts(),
                lower.outcome_counts()
            )));
        }
        Ok(Self {
            isometry,
            upper,
            lower,
            transposed,
        })
    }

    /// Relays the input to `X1_in` and appends `Phi+` on `(X1_aux, X2)`.
    pub fn honest() -> Self {
        let isometry = kron(&[&LabeledOperator::identity(&[2]), &phi_plus()]).expect("kron");

        let mut settings = Vec::with_capacity(UPPER_SETTINGS);
        // Bell effects are written on (aux, in); stored on (in, aux)
        settings.push(
            (0..4)
                .map(|m| {
                    let p = bell_state(m).and_then(|b| b.projector())?;
                    permute_subsystems(&p, &[1, 0])
                })
                .collect::<Result<Vec<_>>>()
                .expect("Bell effects"),
        );
        let id_in = LabeledOperator::identity(&[2]);
        for x1 in 1..UPPER_SETTINGS {
            let povm = upper_observable(x1)
                .and_then(|m| binary_povm(&m))
                .expect("M povm");
            settings.push(
                povm.effects(0)
                    .iter()
                    .map(|e| kron(&[&id_in, e]).expect("kron"))
                    .collect(),
            );
        }
        let upper = Povm::new(settings, SubsystemMask::new([0, 1])).expect("upper POVM");

        let lower_settings = LOWER_OBSERVABLES
            .iter()
            .map(|p| binary_povm(&pauli(*p)).map(|povm| povm.effects(0).to_vec()))
            .collect::<Result<Vec<_>>>()
            .expect("lower POVM");
        let lower = Povm::new(lower_settings, SubsystemMask::new([2])).expect("lower POVM");

        Self::new(isometry, upper, lower, false).expect("honest devices are valid")
    }

    /// Complex-conjugated isometry and transposed effects; toggles the flag.
    pub fn transposed(&self) -> Self {
        Self {
            isometry: self.isometry.conj(),
            upper: self.upper.transposed(),
            lower: self.lower.transposed(),
            transposed: !self.transposed,
        }
    }

    pub fn isometry(&self) -> &LabeledOperator {
        &self.isometry
    }

    pub fn upper(&self) -> &Povm {
        &self.upper
    }

    pub fn lower(&self) -> &Povm {
        &self.lower
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    pub fn input_dim(&self) -> usize {
        self.isometry.dim_in()
    }

    pub fn output_dims(&self) -> &[usize] {
        self.isometry.dims_out()
    }

    /// Effect of setting `x1` outcome `a1` on the upper branch, times
    /// setting index `x2` outcome `a2` on the lower branch, on `(in, aux, X2)`.
    pub fn joint_effect(&self, x1: usize, a1: usize, x2: usize, a2: usize) -> LabeledOperator {
        kron(&[self.upper.effect(x1, a1), self.lower.effect(x2, a2)]).expect("kron")
    }
}

/// Enumerates `(x1, a1, x2, a2)` and maps them to a dense local index.
struct LocalLayout {
    index: Vec<Vec<Vec<Vec<usize>>>>,
    len: usize,
}

impl LocalLayout {
    fn new(party: &PartyDevices) -> Self {
        let mut len = 0;
        let index = (0..party.upper.settings())
            .map(|x1| {
                (0..party.lower.settings())
                    .map(|x2| {
                        (0..party.upper.outcome_count(x1))
                            .map(|_| {
                                (0..party.lower.outcome_count(x2))
                                    .map(|_| {
                                        len += 1;
                                        len - 1
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { index, len }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastModel {
    source: LabeledOperator,
    parties: Vec<PartyDevices>,
}

impl BroadcastModel {
    pub fn new(source: LabeledOperator, parties: Vec<PartyDevices>) -> Result<Self> {
        source.validate_density(VALIDATION_TOL)?;
        if source.dims().len() != parties.len() {
            return Err(Error::DimensionMismatch(format!(
                "source has {} subsystems for {} parties",
                source.dims().len(),
                parties.len()
            )));
        }
        for (p, (d, party)) in source.dims().iter().zip(&parties).enumerate() {
            if *d != party.input_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "party {p} receives dimension {d} but its isometry takes {}",
                    party.input_dim()
                )));
            }
        }
        Ok(Self { source, parties })
    }

    /// Honest broadcast experiment for a qubit source with `parties` slots.
    pub fn honest(source: &LabeledOperator, parties: usize) -> Result<Self> {
        if parties == 0 || source.dims().len() != parties {
            return Err(Error::DimensionMismatch(format!(
                "source dims {:?} do not describe {parties} parties",
                source.dims()
            )));
        }
        if source.dims().iter().any(|&d| d != 2) {
            return Err(Error::InvalidParameter(format!(
                "only qubit parties are supported, got dims {:?}",
                source.dims()
            )));
        }
        Self::new(source.clone(), vec![PartyDevices::honest(); parties])
    }

    /// Honest devices with the parties in `flags` replaced by their transposed
    /// versions, fed with the matching partial transpose of `rho`.
    ///
    /// Fails when that partial transpose is not a valid state.
    pub fn with_flags(rho: &LabeledOperator, flags: &[bool]) -> Result<Self> {
        let mask: SubsystemMask = flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| i)
            .collect();
        let honest = Self::honest(rho, flags.len())?;
        let source = partial_transpose(rho, &mask)?;
        source.validate_density(VALIDATION_TOL).map_err(|e| {
            Error::InvalidModel(format!(
                "partially transposed source for flags {flags:?}: {e}"
            ))
        })?;
        let parties = honest
            .parties
            .iter()
            .zip(flags)
            .map(|(p, &f)| if f { p.transposed() } else { p.clone() })
            .collect();
        Self::new(source, parties)
    }

    pub fn source(&self) -> &LabeledOperator {
        &self.source
    }

    pub fn parties(&self) -> &[PartyDevices] {
        &self.parties
    }

    pub fn party_count(&self) -> usize {
        self.parties.len()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.parties
            .iter()
            .map(PartyDevices::is_transposed)
            .collect()
    }

    /// Source and every device transposed; isometries conjugated.
    pub fn transpose(&self) -> Self {
        Self {
            source: self.source.transpose(),
            parties: self.parties.iter().map(PartyDevices::transposed).collect(),
        }
    }

    /// `(V_1 (x) ... (x) V_N) rho (V_1 (x) ... (x) V_N)^dagger`.
    pub fn global_state(&self) -> Result<LabeledOperator> {
        let isos: Vec<&LabeledOperator> = self.parties.iter().map(|p| &p.isometry).collect();
        let v = kron(&isos)?;
        v.matmul(&self.source)?.matmul(&v.adjoint())
    }

    pub fn behavior(&self) -> Result<Behavior> {
        let global = self.global_state()?;
        let layouts: Vec<LocalLayout> = self.parties.iter().map(LocalLayout::new).collect();
        let effects: Vec<Vec<CMatrix>> = self
            .parties
            .iter()
            .map(|party| {
                let mut list = Vec::new();
                for x1 in 0..party.upper.settings() {
                    for x2 in 0..party.lower.settings() {
                        for a1 in 0..party.upper.outcome_count(x1) {
                            for a2 in 0..party.lower.outcome_count(x2) {
                                list.push(party.joint_effect(x1, a1, x2, a2).into_data());
                            }
                        }
                    }
                }
                list
            })
            .collect();

        let mut joint = Vec::with_capacity(layouts.iter().map(|l| l.len).product());
        contract_parties(global.data(), &effects, &mut joint);

        let mut behavior = Behavior::zeros(self.outcome_counts())?;
        let n = self.parties.len();
        let mut strides = vec![1; n];
        for p in (0..n.saturating_sub(1)).rev() {
            strides[p] = strides[p + 1] * layouts[p + 1].len;
        }
        let settings_list: Vec<Vec<usize>> = behavior.settings_tuples().collect();
        for settings in settings_list {
            let counts: Vec<usize> = behavior.counts_for(&settings);
            let block = behavior.block_mut(&settings)?;
            let mut outcomes = vec![0; counts.len()];
            for slot in block.iter_mut() {
                let mut flat = 0;
                for p in 0..n {
                    let (x1, x2) = (settings[2 * p], settings[2 * p + 1]);
                    let (a1, a2) = (outcomes[2 * p], outcomes[2 * p + 1]);
                    flat += layouts[p].index[x1][x2][a1][a2] * strides[p];
                }
                *slot = joint[flat];
                increment(&mut outcomes, &counts);
            }
        }
        Ok(behavior)
    }

    /// Outcome counts per device, in behavior device order.
    pub fn outcome_counts(&self) -> Vec<Vec<usize>> {
        self.parties
            .iter()
            .flat_map(|p| [p.upper.outcome_counts(), p.lower.outcome_counts()])
            .collect()
    }
}

/// Probabilities for every combination of local joint effects, party-major.
fn contract_parties(rho: &CMatrix, effects: &[Vec<CMatrix>], out: &mut Vec<f64>) {
    let Some((first, rest)) = effects.split_first() else {
        out.push(rho[(0, 0)].re);
        return;
    };
    let local = first[0].nrows();
    let remain = rho.nrows() / local;
    for effect in first {
        // tr_1[(E (x) 1) rho]
        let mut reduced = CMatrix::zeros(remain, remain);
        for i in 0..local {
            for j in 0..local {
                let e = effect[(j, i)];
                if e.norm_sqr() == 0.0 {
                    continue;
                }
                let block = rho.view((i * remain, j * remain), (remain, remain));
                reduced.zip_apply(&block, |r, b| *r += e * b);
            }
        }
        contract_parties(&reduced, rest, out);
    }
}

pub fn honest_model(source: &LabeledOperator, parties: usize) -> Result<BroadcastModel> {
    BroadcastModel::honest(source, parties)
}

pub fn transpose_model(model: &BroadcastModel) -> BroadcastModel {
    model.transpose()
}

pub fn behavior(model: &BroadcastModel) -> Result<Behavior> {
    model.behavior()
}

/// Convex combination of the models' behaviors.
pub fn mixture_behavior(models: &[(f64, &BroadcastModel)]) -> Result<Behavior> {
    let behaviors: Vec<(f64, Behavior)> = models
        .iter()
        .map(|(w, m)| Ok((*w, m.behavior()?)))
        .collect::<Result<_>>()?;
    let refs: Vec<(f64, &Behavior)> = behaviors.iter().map(|(w, b)| (*w, b)).collect();
    Behavior::mixture(&refs)
}

fn increment(digits: &mut [usize], radix: &[usize]) -> bool {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < radix[k] {
            return true;
        }
        digits[k] = 0;
    }
    false
}

/// Probability table `P(outcomes | settings)` over several measurement devices.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    outcome_counts: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    table: Vec<f64>,
}

impl Behavior {
    /// All-zero table; `outcome_counts[d][x]` is the outcome count of device `d` at setting `x`.
    pub fn zeros(outcome_counts: Vec<Vec<usize>>) -> Result<Self> {
        if outcome_counts
            .iter()
            .any(|d| d.is_empty() || d.contains(&0))
        {
            return Err(Error::InvalidParameter(
                "every device needs settings with outcomes".into(),
            ));
        }
        let radix: Vec<usize> = outcome_counts.iter().map(Vec::len).collect();
        let mut offsets = Vec::new();
        let mut total = 0;
        let mut settings = vec![0; radix.len()];
        loop {
            offsets.push(total);
            total += settings
                .iter()
                .enumerate()
                .map(|(d, &x)| outcome_counts[d][x])
                .product::<usize>();
            if !increment(&mut settings, &radix) {
                break;
            }
        }
        Ok(Self {
            outcome_counts,
            offsets,
            table: vec![0.0; total],
        })
    }

    pub fn device_count(&self) -> usize {
        self.outcome_counts.len()
    }

    pub fn setting_count(&self, device: usize) -> usize {
        self.outcome_counts[device].len()
    }

    pub fn outcome_counts(&self) -> &[Vec<usize>] {
        &self.outcome_counts
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.table
    }

    pub fn settings_tuples(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let radix: Vec<usize> = self.outcome_counts.iter().map(Vec::len).collect();
        let mut next = Some(vec![0; radix.len()]);
        std::iter::from_fn(move || {
            let current = next.take()?;
            let mut succ = current.clone();
            if increment(&mut succ, &radix) {
                next = Some(succ);
            }
            Some(current)
        })
    }

    fn counts_for(&self, settings: &[usize]) -> Vec<usize> {
        settings
            .iter()
            .enumerate()
            .map(|(d, &x)| self.outcome_counts[d][x])
            .collect()
    }

    fn settings_index(&self, settings: &[usize]) -> Result<usize> {
        if settings.len() != self.device_count() {
            return Err(Error::MissingEntries(format!(
                "{} settings for {} devices",
                settings.len(),
                self.device_count()
            )));
        }
        let mut idx = 0;
        for (d, &x) in settings.iter().enumerate() {
            let n = self.setting_count(d);
            if x >= n {
                return Err(Error::MissingEntries(format!(
                    "device {d} has no setting {x}"
                )));
            }
            idx = idx * n + x;
        }
        Ok(idx)
    }

    fn block_range(&self, settings: &[usize]) -> Result<std::ops::Range<usize>> {
        let s = self.settings_index(settings)?;
        let end = self.offsets.get(s + 1).copied().unwrap_or(self.table.len());
        Ok(self.offsets[s]..end)
    }

    /// Outcome probabilities for one settings tuple, outcomes in mixed radix order.
    pub fn block(&self, settings: &[usize]) -> Result<&[f64]> {
        let r = self.block_range(settings)?;
        Ok(&self.table[r])
    }

    fn block_mut(&mut self, settings: &[usize]) -> Result<&mut [f64]> {
        let r = self.block_range(settings)?;
        Ok(&mut self.table[r])
    }

    fn outcome_offset(&self, settings: &[usize], outcomes: &[usize]) -> Result<usize> {
        let counts = self.counts_for(settings);
        if outcomes.len() != counts.len() || outcomes.iter().zip(&counts).any(|(a, n)| a >= n) {
            return Err(Error::MissingEntries(format!(
                "outcomes {outcomes:?} for settings {settings:?}"
            )));
        }
        Ok(outcomes
            .iter()
            .zip(&counts)
            .fold(0, |acc, (&a, &n)| acc * n + a))
    }

    pub fn prob(&self, settings: &[usize], outcomes: &[usize]) -> Result<f64> {
        let r = self.block_range(settings)?;
        Ok(self.table[r.start + self.outcome_offset(settings, outcomes)?])
    }

    pub fn set(&mut self, settings: &[usize], outcomes: &[usize], p: f64) -> Result<()> {
        let r = self.block_range(settings)?;
        let off = self.outcome_offset(settings, outcomes)?;
        self.table[r.start + off] = p;
        Ok(())
    }

    /// Probability that the listed devices give the listed outcomes, summing over the rest.
    pub fn marginal(&self, settings: &[usize], fixed: &[(usize, usize)]) -> Result<f64> {
        let counts = self.counts_for_checked(settings)?;
        for &(d, a) in fixed {
            if d >= counts.len() || a >= counts[d] {
                return Err(Error::MissingEntries(format!("device {d} outcome {a}")));
            }
        }
        let block = self.block(settings)?;
        let mut outcomes = vec![0; counts.len()];
        let mut total = 0.0;
        for &p in block {
            if fixed.iter().all(|&(d, a)| outcomes[d] == a) {
                total += p;
            }
            increment(&mut outcomes, &counts);
        }
        Ok(total)
    }

    fn counts_for_checked(&self, settings: &[usize]) -> Result<Vec<usize>> {
        self.settings_index(settings)?;
        Ok(self.counts_for(settings))
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.outcome_counts == other.outcome_counts
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if !self.same_layout(other) {
            return Err(Error::DimensionMismatch(
                "behaviors have different layouts".into(),
            ));
        }
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest deviation of any settings tuple's outcome sum from 1.
    pub fn normalization_error(&self) -> f64 {
        (0..self.offsets.len())
            .map(|s| {
                let end = self.offsets.get(s + 1).copied().unwrap_or(self.table.len());
                (self.table[self.offsets[s]..end].iter().sum::<f64>() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest amount by which any probability leaves `[0, 1]`.
    pub fn range_error(&self) -> f64 {
        self.table
            .iter()
            .map(|&p| (-p).max(p - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest change in any marginal caused by switching one device's setting.
    ///
    /// Checking single devices suffices: every subset marginal is a sum of
    /// these, so all subsets are then non-signalling.
    pub fn no_signaling_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for device in 0..self.device_count() {
            for settings in self.settings_tuples().filter(|s| s[device] == 0) {
                let reference = self.sum_out(&settings, device);
                for x in 1..self.setting_count(device) {
                    let mut other = settings.clone();
                    other[device] = x;
                    let alt = self.sum_out(&other, device);
                    for (a, b) in reference.iter().zip(&alt) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        worst
    }

    /// Block for `settings` with `device`'s outcome summed out.
    fn sum_out(&self, settings: &[usize], device: usize) -> Vec<f64> {
        let counts = self.counts_for(settings);
        let inner: usize = counts[device + 1..].iter().product();
        let n = counts[device];
        let outer: usize = counts[..device].iter().product();
        let block = self.block(settings).expect("valid settings");
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..n {
                for i in 0..inner {
                    out[o * inner + i] += block[(o * n + a) * inner + i];
                }
            }
        }
        out
    }

    /// Range, normalization and no-signalling checks.
    pub fn validate(&self, range_tol: f64, tol: f64) -> Result<()> {
        let r = self.range_error();
        if r > range_tol {
            return Err(Error::InvalidModel(format!(
                "probability outside [0,1] by {r:.3e}"
            )));
        }
        let n = self.normalization_error();
        if n > tol {
            return Err(Error::InvalidModel(format!("normalization error {n:.3e}")));
        }
        let s = self.no_signaling_error();
        if s > tol {
            return Err(Error::InvalidModel(format!("signalling {s:.3e}")));
        }
        Ok(())
    }

    /// Weighted sum of behaviors with identical layout; weights must be convex.
    pub fn mixture(parts: &[(f64, &Behavior)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        if parts.iter().any(|(w, _)| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "mixture weights must be non-negative".into(),
            ));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}"
            )));
        }
        let mut out = Self {
            outcome_counts: first.outcome_counts.clone(),
            offsets: first.offsets.clone(),
            table: vec![0.0; first.table.len()],
        };
        for (w, b) in parts {
            if !b.same_layout(first) {
                return Err(Error::DimensionMismatch(
                    "mixture of different layouts".into(),
                ));
            }
            for (o, p) in out.table.iter_mut().zip(&b.table) {
                *o += w * p;
            }
        }
        Ok(out)
    }
}
