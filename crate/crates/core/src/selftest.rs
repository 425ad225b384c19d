//! Extraction of certified qubits from broadcast parties, flag-labeled branch
//! states, their reconstruction, and partial-transpose spectral checks.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kit::{pauli, Channel, Instrument, Pauli};
use crate::network::{lower_observable, Behavior, BroadcastModel, PartyDevices, LOWER_SETTINGS};
use crate::tensor::{
    apply_on, apply_unchecked, hermitian_eigs, kron, partial_trace, partial_transpose,
    permute_subsystems, LabeledOperator, Map, SubsystemMask, ARITHMETIC_TOL, C64,
};
use crate::witness::{lower_projector, WitnessExpansion};

/// Branches with trace at most this are dropped from reports.
pub const PRUNE_TOL: f64 = 1e-9;

/// Bell outcomes of the upper branch.
pub const EXTRACTION_OUTCOMES: usize = 4;

/// Transposition flags of every party, `1` for a transposed branch.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlagString(pub Vec<u8>);

impl FlagString {
    pub fn from_bools(flags: &[bool]) -> Self {
        Self(flags.iter().map(|&f| u8::from(f)).collect())
    }

    pub fn uniform(parties: usize, flag: bool) -> Self {
        Self(vec![u8::from(flag); parties])
    }

    pub fn mask(&self) -> SubsystemMask {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every flag string of `parties` bits in lexicographic order.
    pub fn all(parties: usize) -> impl Iterator<Item = Self> {
        (0..1usize << parties).map(move |bits| {
            Self(
                (0..parties)
                    .map(|p| ((bits >> (parties - 1 - p)) & 1) as u8)
                    .collect(),
            )
        })
    }
}

impl fmt::Display for FlagString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b}"))
    }
}

/// Unnormalized states `rho^(k)` of the extracted registers, keyed by flag string.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchDecomposition {
    parties: usize,
    branches: BTreeMap<FlagString, LabeledOperator>,
}

impl BranchDecomposition {
    /// Validates positivity of each branch and unit total trace.
    pub fn new(parties: usize, branches: BTreeMap<FlagString, LabeledOperator>) -> Result<Self> {
        let dims = vec![2; parties];
        let mut total = 0.0;
        for (k, b) in &branches {
            if k.len() != parties || k.0.iter().any(|&f| f > 1) {
                return Err(Error::InvalidParameter(format!(
                    "flag string {k} for {parties} parties"
                )));
            }
            if !b.is_square() || b.dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "branch {k} has dims {:?}",
                    b.dims()
                )));
            }
            let herm = b.hermiticity_error();
            if herm > ARITHMETIC_TOL {
                return Err(Error::NotHermitian(herm));
            }
            let min = hermitian_eigs(b)?.min();
            if min < -ARITHMETIC_TOL {
                return Err(Error::NotDensity(format!(
                    "branch {k} has eigenvalue {min}"
                )));
            }
            total += b.trace().re;
        }
        if (total - 1.0).abs() > ARITHMETIC_TOL {
            return Err(Error::NotDensity(format!("branch traces sum to {total}")));
        }
        Ok(Self { parties, branches })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn branches(&self) -> &BTreeMap<FlagString, LabeledOperator> {
        &self.branches
    }

    pub fn branch(&self, flags: &FlagString) -> Option<&LabeledOperator> {
        self.branches.get(flags)
    }

    pub fn trace(&self, flags: &FlagString) -> f64 {
        self.branches.get(flags).map_or(0.0, |b| b.trace().re)
    }

    /// Branch traces above [`PRUNE_TOL`].
    pub fn traces(&self) -> BTreeMap<FlagString, f64> {
        self.branches
            .iter()
            .map(|(k, b)| (k.clone(), b.trace().re))
            .filter(|&(_, t)| t > PRUNE_TOL)
            .collect()
    }
}

/// One outcome of an extraction instrument.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionOutcome {
    pub outcome: usize,
    /// Normalized state of `(A2', A2'')`.
    pub post_state: LabeledOperator,
    pub probability: f64,
}

fn require_extractable(party: &PartyDevices) -> Result<()> {
    let iso = party.isometry();
    if iso.dims_in() != [2]
        || iso.dims_out() != [2, 2, 2]
        || party.upper().outcome_count(0) != EXTRACTION_OUTCOMES
    {
        return Err(Error::InvalidModel(format!(
            "extraction needs a qubit party with a Bell measurement, got {:?} <- {:?}",
            iso.dims_out(),
            iso.dims_in()
        )));
    }
    Ok(())
}

fn flag_ket(flag: bool) -> LabeledOperator {
    LabeledOperator::basis_ket(&[usize::from(flag)], &[2]).expect("qubit basis ket")
}

/// Composes Kraus operators with the computational-basis dephasing of the last register.
fn dephase_last(kraus: Vec<LabeledOperator>) -> Vec<LabeledOperator> {
    let id = LabeledOperator::identity(&[2]);
    let dephasers: Vec<LabeledOperator> = [false, true]
        .iter()
        .map(|&j| kron(&[&id, &flag_ket(j).projector().expect("projector")]).expect("kron"))
        .collect();
    kraus
        .iter()
        .flat_map(|k| dephasers.iter().map(move |d| d.matmul(k).expect("dims")))
        .filter(|k| k.max_abs() > 0.0)
        .collect()
}

/// Splits the input, Bell-measures `(in, aux)`, relays `X2` as `A2'` and
/// attaches the dephased flag qubit `A2''` (`|1>` for transposed parties).
pub fn extraction_instrument(party: &PartyDevices) -> Result<Instrument> {
    require_extractable(party)?;
    let id = LabeledOperator::identity(&[2]);
    let flag = flag_ket(party.is_transposed());
    let branches = party
        .upper()
        .effects(0)
        .iter()
        .map(|effect| {
            let spec = hermitian_eigs(effect)?;
            let mut kraus = Vec::new();
            for (i, &lambda) in spec.values.iter().enumerate() {
                if lambda <= ARITHMETIC_TOL {
                    continue;
                }
                let e = LabeledOperator::ket(
                    spec.vector(i).iter().copied().collect(),
                    effect.dims().to_vec(),
                )?;
                let k = kron(&[&e.adjoint(), &id])?
                    .matmul(party.isometry())?
                    .scale(lambda.sqrt());
                kraus.push(kron(&[&k, &flag])?);
            }
            Ok(dephase_last(kraus))
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(branches)
}

/// Outcome probabilities and normalized post-states of `rho_in`.
pub fn extract(
    instrument: &Instrument,
    rho_in: &LabeledOperator,
) -> Result<Vec<ExtractionOutcome>> {
    (0..instrument.outcomes())
        .map(|s| {
            let branch = instrument.apply_branch(s, rho_in)?;
            let probability = branch.trace().re;
            let post_state = if probability > 0.0 {
                branch.scale(1.0 / probability)
            } else {
                branch
            };
            Ok(ExtractionOutcome {
                outcome: s,
                post_state,
                probability,
            })
        })
        .collect()
}

/// Pauli byproduct `sigma_s` of Bell outcome `s`.
pub fn byproduct(s: usize) -> Result<LabeledOperator> {
    Pauli::from_index(s).map(pauli)
}

/// `sum_s (sigma_s . sigma_s on A2') o branch_s`. Since `sigma_s^T = +-sigma_s`
/// the same correction serves transposed parties.
pub fn corrected_channel(instrument: &Instrument) -> Result<Channel> {
    if instrument.outcomes() != EXTRACTION_OUTCOMES || instrument.dims_out() != [2, 2] {
        return Err(Error::InvalidKraus(format!(
            "expected a {EXTRACTION_OUTCOMES}-outcome instrument onto two qubits"
        )));
    }
    let id = LabeledOperator::identity(&[2]);
    let mut kraus = Vec::new();
    for s in 0..EXTRACTION_OUTCOMES {
        let fix = kron(&[&byproduct(s)?, &id])?;
        for k in instrument.branch(s) {
            kraus.push(fix.matmul(k)?);
        }
    }
    Channel::new(kraus)
}

/// Applies one Kraus map per party, last party first so earlier indices stay put.
/// Output registers are `(A2', A2'')` per party.
fn apply_per_party(
    source: &LabeledOperator,
    maps: &[Vec<LabeledOperator>],
) -> Result<LabeledOperator> {
    let mut state = source.clone();
    for (p, kraus) in maps.iter().enumerate().rev() {
        state = apply_on(Map::Kraus(kraus), &state, p, 1)?;
    }
    Ok(state)
}

/// `<k|` on every flag register of a `(A2', A2'')^N` state.
fn read_flags(state: &LabeledOperator, flags: &FlagString) -> Result<LabeledOperator> {
    let id = LabeledOperator::identity(&[2]);
    let bras = flags
        .0
        .iter()
        .map(|&f| kron(&[&id, &flag_ket(f == 1).adjoint()]))
        .collect::<Result<Vec<_>>>()?;
    let proj = kron(&bras.iter().collect::<Vec<_>>())?;
    Ok(apply_unchecked(&[proj], state))
}

fn split_flags(
    state: &LabeledOperator,
    parties: usize,
) -> Result<BTreeMap<FlagString, LabeledOperator>> {
    FlagString::all(parties)
        .map(|k| read_flags(state, &k).map(|b| (k, b)))
        .collect()
}

fn validate_mixture(mix: &[(f64, Vec<bool>)], parties: usize) -> Result<()> {
    if mix.is_empty()
        || mix
            .iter()
            .any(|(w, f)| w.is_nan() || *w < 0.0 || f.len() != parties)
    {
        return Err(Error::InvalidParameter(format!(
            "mixture needs non-negative weights and {parties} flags per component"
        )));
    }
    let total: f64 = mix.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {total}"
        )));
    }
    Ok(())
}

fn qubit_parties(source: &LabeledOperator) -> Result<usize> {
    if !source.is_square() || source.dims().is_empty() || source.dims().iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch(format!(
            "expected an N-qubit source, got {:?}",
            source.dims()
        )));
    }
    Ok(source.dims().len())
}

/// Runs the corrected extraction on each mixture component (weight, per-party
/// transposition flags) and reads the branches off the flag registers.
pub fn extract_branches(
    source: &LabeledOperator,
    mix: &[(f64, Vec<bool>)],
) -> Result<BranchDecomposition> {
    let n = qubit_parties(source)?;
    validate_mixture(mix, n)?;
    let mut acc: BTreeMap<FlagString, LabeledOperator> = BTreeMap::new();
    for (weight, flags) in mix {
        let model = BroadcastModel::with_flags(source, flags)?;
        let maps = model
            .parties()
            .iter()
            .map(|p| {
                extraction_instrument(p)
                    .and_then(|i| corrected_channel(&i))
                    .map(|c| c.kraus().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let out = apply_per_party(model.source(), &maps)?;
        for (k, b) in split_flags(&out, n)? {
            let b = b.scale(*weight);
            let entry = acc
                .entry(k)
                .or_insert_with(|| LabeledOperator::zeros(&vec![2; n]));
            *entry = entry.add(&b)?;
        }
    }
    BranchDecomposition::new(n, acc)
}

/// Uncorrected branches `rho^(k, s)` for Bell outcomes `s`, one per flag string.
pub fn conditional_branches(
    source: &LabeledOperator,
    mix: &[(f64, Vec<bool>)],
    outcomes: &[usize],
) -> Result<BTreeMap<FlagString, LabeledOperator>> {
    let n = qubit_parties(source)?;
    validate_mixture(mix, n)?;
    if outcomes.len() != n || outcomes.iter().any(|&s| s >= EXTRACTION_OUTCOMES) {
        return Err(Error::InvalidParameter(format!(
            "outcomes {outcomes:?} for {n} parties"
        )));
    }
    let mut acc: BTreeMap<FlagString, LabeledOperator> = BTreeMap::new();
    for (weight, flags) in mix {
        let model = BroadcastModel::with_flags(source, flags)?;
        let maps = model
            .parties()
            .iter()
            .zip(outcomes)
            .map(|(p, &s)| extraction_instrument(p).map(|i| i.branch(s).to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let out = apply_per_party(model.source(), &maps)?;
        for (k, b) in split_flags(&out, n)? {
            let b = b.scale(*weight);
            let entry = acc
                .entry(k)
                .or_insert_with(|| LabeledOperator::zeros(&vec![2; n]));
            *entry = entry.add(&b)?;
        }
    }
    Ok(acc)
}

/// `sum_k (rho^(k))^{T_k}`.
pub fn reconstruct(branches: &BranchDecomposition) -> Result<LabeledOperator> {
    let mut acc = LabeledOperator::zeros(&vec![2; branches.parties()]);
    for (k, b) in branches.branches() {
        acc = acc.add(&partial_transpose(b, &k.mask())?)?;
    }
    Ok(acc)
}

fn as_density(target: &LabeledOperator) -> Result<LabeledOperator> {
    if target.is_ket() {
        target.projector()
    } else {
        Ok(target.clone())
    }
}

fn purity(rho: &LabeledOperator) -> Result<f64> {
    Ok(rho.matmul(rho)?.trace().re)
}

/// Fails with [`Error::NotGme`] unless every bipartition marginal of the pure
/// `target` is mixed.
pub fn check_gme(target: &LabeledOperator) -> Result<()> {
    let rho = as_density(target)?;
    rho.validate_density(crate::tensor::VALIDATION_TOL)?;
    let n = rho.dims().len();
    if (purity(&rho)? - 1.0).abs() > ARITHMETIC_TOL {
        return Err(Error::InvalidParameter("GME target must be pure".into()));
    }
    if n < 2 {
        return Err(Error::NotGme("a single party has no bipartition".into()));
    }
    // subsets containing party 0 cover every bipartition once
    for bits in 0..(1usize << (n - 1)) {
        let keep: SubsystemMask = std::iter::once(0)
            .chain((1..n).filter(|p| bits >> (p - 1) & 1 == 1))
            .collect();
        if keep.len() == n {
            continue;
        }
        let marginal = partial_trace(&rho, &keep.complement(n))?;
        let pur = purity(&marginal)?;
        if pur >= 1.0 - ARITHMETIC_TOL {
            return Err(Error::NotGme(format!(
                "marginal on {:?} has purity {pur}",
                keep.iter().collect::<Vec<_>>()
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementReport {
    /// Weight of the all-honest branch.
    pub p: f64,
    /// Flag strings outside `0...0, 1...1` carrying trace above the tolerance.
    pub offending: Vec<(FlagString, f64)>,
    /// `max |rho^(0...0) - p psi|`.
    pub honest_residual: f64,
    /// `max |rho^(1...1) - (1 - p) psi^T|`.
    pub transposed_residual: f64,
    pub tolerance: f64,
}

impl RefinementReport {
    pub fn passed(&self) -> bool {
        self.offending.is_empty()
            && self.honest_residual <= self.tolerance
            && self.transposed_residual <= self.tolerance
    }
}

/// Checks that only the uniform branches occur and that they are `psi` and `psi^T`.
pub fn pure_refinement_check(
    branches: &BranchDecomposition,
    target: &LabeledOperator,
    tol: f64,
) -> Result<RefinementReport> {
    check_gme(target)?;
    let psi = as_density(target)?;
    let n = branches.parties();
    if psi.dims() != vec![2; n] {
        return Err(Error::DimensionMismatch(format!(
            "target {:?} for {n} parties",
            psi.dims()
        )));
    }
    let honest = FlagString::uniform(n, false);
    let transposed = FlagString::uniform(n, true);
    let offending = branches
        .branches()
        .iter()
        .filter(|(k, _)| **k != honest && **k != transposed)
        .map(|(k, b)| (k.clone(), b.trace().re))
        .filter(|&(_, t)| t > tol)
        .collect();
    let residual = |k: &FlagString, reference: &LabeledOperator| -> Result<f64> {
        match branches.branch(k) {
            Some(b) if b.trace().re > tol => Ok(b.max_abs_diff(&reference.scale(b.trace().re))),
            _ => Ok(0.0),
        }
    };
    Ok(RefinementReport {
        p: branches.trace(&honest),
        offending,
        honest_residual: residual(&honest, &psi)?,
        transposed_residual: residual(&transposed, &psi.transpose())?,
        tolerance: tol,
    })
}

/// Extremes of a partial-transpose spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct PtSpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub min_vector: LabeledOperator,
    pub max_vector: LabeledOperator,
    /// Second Schmidt coefficient of the top eigenvector across the mask cut,
    /// computed when `max >= 1 - 1e-9`.
    pub top_schmidt_second: Option<f64>,
}

impl PtSpectrumReport {
    pub fn within_bounds(&self, tol: f64) -> bool {
        self.min >= -0.5 - tol && self.max <= 1.0 + tol
    }

    /// Vacuous unless the top eigenvalue is 1.
    pub fn top_is_product(&self, tol: f64) -> bool {
        self.top_schmidt_second.is_none_or(|s| s <= tol)
    }
}

/// Schmidt coefficients of `ket` across `mask | complement`, in descending order.
pub fn schmidt_coefficients(ket: &LabeledOperator, mask: &SubsystemMask) -> Result<Vec<f64>> {
    if !ket.is_ket() {
        return Err(Error::DimensionMismatch(
            "Schmidt decomposition needs a ket".into(),
        ));
    }
    let dims = ket.dims_out();
    mask.validate(dims.len())?;
    let order: Vec<usize> = mask
        .iter()
        .chain(mask.complement(dims.len()).iter())
        .collect();
    let permuted = permute_subsystems(ket, &order)?;
    let da: usize = mask.iter().map(|i| dims[i]).product();
    let db = ket.dim_out() / da;
    let m = DMatrix::<C64>::from_fn(da, db, |i, j| permuted.get(i * db + j, 0));
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Spectrum of `state^{T_mask}` with its extreme eigenvectors.
pub fn pt_spectrum_report(
    state: &LabeledOperator,
    mask: &SubsystemMask,
) -> Result<PtSpectrumReport> {
    state.validate_density(crate::tensor::VALIDATION_TOL)?;
    mask.validate(state.dims().len())?;
    let spec = hermitian_eigs(&partial_transpose(state, mask)?)?;
    let last = spec.values.len() - 1;
    let ket = |i: usize| {
        LabeledOperator::ket(
            spec.vector(i).iter().copied().collect(),
            state.dims().to_vec(),
        )
    };
    let max_vector = ket(0)?;
    let top_schmidt_second = if spec.max() >= 1.0 - ARITHMETIC_TOL {
        Some(
            schmidt_coefficients(&max_vector, mask)?
                .get(1)
                .copied()
                .unwrap_or(0.0),
        )
    } else {
        None
    };
    Ok(PtSpectrumReport {
        min: spec.min(),
        max: spec.max(),
        min_vector: ket(last)?,
        max_vector,
        top_schmidt_second,
        eigenvalues: spec.values.clone(),
    })
}

/// `{lambda_i^2} U {+-lambda_i lambda_j, i < j}` padded with zeros, descending.
pub fn schmidt_pt_spectrum(ket: &LabeledOperator, mask: &SubsystemMask) -> Result<Vec<f64>> {
    let lambda = schmidt_coefficients(ket, mask)?;
    let mut values: Vec<f64> = lambda.iter().map(|l| l * l).collect();
    for i in 0..lambda.len() {
        for j in i + 1..lambda.len() {
            values.push(lambda[i] * lambda[j]);
            values.push(-lambda[i] * lambda[j]);
        }
    }
    values.resize(ket.dim_out().max(values.len()), 0.0);
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

fn require_slice(behavior: &Behavior, outcomes: &[usize]) -> Result<usize> {
    let devices = behavior.device_count();
    if !devices.is_multiple_of(2) || devices / 2 != outcomes.len() {
        return Err(Error::MissingEntries(format!(
            "{devices} devices do not match {} Bell outcomes",
            outcomes.len()
        )));
    }
    for (p, &s) in outcomes.iter().enumerate() {
        let counts = &behavior.outcome_counts();
        if counts[2 * p].is_empty() || s >= counts[2 * p][0] {
            return Err(Error::MissingEntries(format!(
                "party {p} lacks Bell outcome {s}"
            )));
        }
        if counts[2 * p + 1].len() < LOWER_SETTINGS
            || counts[2 * p + 1][..LOWER_SETTINGS].iter().any(|&c| c != 2)
        {
            return Err(Error::MissingEntries(format!(
                "party {p} lacks the three Pauli settings"
            )));
        }
    }
    Ok(outcomes.len())
}

/// Lower setting index that measures `label`; identity slots are marginalized
/// at the last setting.
fn setting_for(label: Pauli) -> usize {
    if label == Pauli::I {
        return LOWER_SETTINGS - 1;
    }
    (1..=LOWER_SETTINGS)
        .find(|&x| lower_observable(x).ok() == Some(label))
        .expect("every Pauli is measured")
        - 1
}

/// Unnormalized `sum_k (rho^(k, s))^{T_k}` from `P(a, s | x, 0)` by exact
/// inversion of the Pauli correlation expansion.
pub fn pauli_tomography(behavior: &Behavior, outcomes: &[usize]) -> Result<LabeledOperator> {
    let n = require_slice(behavior, outcomes)?;
    let dims = vec![2; n];
    let mut acc = LabeledOperator::zeros(&dims);
    let mut labels = vec![Pauli::I; n];
    for code in 0..4usize.pow(n as u32) {
        let mut rest = code;
        for l in labels.iter_mut().rev() {
            *l = Pauli::from_index(rest % 4)?;
            rest /= 4;
        }
        let mut settings = vec![0; 2 * n];
        for (p, &l) in labels.iter().enumerate() {
            settings[2 * p + 1] = setting_for(l);
        }
        let mut t = 0.0;
        let mut out = vec![0; 2 * n];
        for (p, &s) in outcomes.iter().enumerate() {
            out[2 * p] = s;
        }
        for bits in 0..1usize << n {
            let mut sign = 1.0;
            for (p, &l) in labels.iter().enumerate() {
                let a = (bits >> (n - 1 - p)) & 1;
                out[2 * p + 1] = a;
                if l != Pauli::I && a == 1 {
                    sign = -sign;
                }
            }
            t += sign * behavior.prob(&settings, &out)?;
        }
        if t != 0.0 {
            let sigma = crate::kit::pauli_string(&labels)?;
            acc = acc.add(&sigma.scale(t))?;
        }
    }
    Ok(acc.scale(0.5f64.powi(n as i32)))
}

/// `(x) sigma_{s_i}` conjugation undoing the teleportation byproducts.
pub fn pauli_correct(op: &LabeledOperator, outcomes: &[usize]) -> Result<LabeledOperator> {
    let fixes = outcomes
        .iter()
        .map(|&s| byproduct(s))
        .collect::<Result<Vec<_>>>()?;
    let u = kron(&fixes.iter().collect::<Vec<_>>())?;
    u.matmul(op)?.matmul(&u)
}

/// Per-branch contributions `sum w tr[(Pi (x) Pi)^{T_k} rho^(k, s)]` to the
/// broadcast functional of a bipartite mixture.
pub fn witness_branch_values(
    source: &LabeledOperator,
    mix: &[(f64, Vec<bool>)],
    expansion: &WitnessExpansion,
    conditioning: (usize, usize),
) -> Result<BTreeMap<FlagString, f64>> {
    if source.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "expected two qubits, got {:?}",
            source.dims()
        )));
    }
    let branches = conditional_branches(source, mix, &[conditioning.0, conditioning.1])?;
    branches
        .into_iter()
        .map(|(k, b)| {
            let mut value = 0.0;
            for a in 0..2 {
                for bb in 0..2 {
                    for x in 1..=LOWER_SETTINGS {
                        for y in 1..=LOWER_SETTINGS {
                            let w = expansion.projector_coefficient(a, bb, x, y);
                            if w == 0.0 {
                                continue;
                            }
                            let proj = kron(&[&lower_projector(a, x), &lower_projector(bb, y)])?;
                            let proj = partial_transpose(&proj, &k.mask())?;
                            value += w * b.expectation(&proj)?.re;
                        }
                    }
                }
            }
            Ok((k, value))
        })
        .collect()
}
