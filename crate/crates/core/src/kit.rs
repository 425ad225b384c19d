//! Standard quantum objects: Paulis, Bell states, POVMs, instruments,
//! channels and the canonical state corpus.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::{
    apply_unchecked, hermitian_eigs, kron, CMatrix, LabeledOperator, SubsystemMask, C64, ONE,
    VALIDATION_TOL, ZERO,
};

const I_UNIT: C64 = Complex { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// `sigma_0 = I, sigma_1 = X, sigma_2 = Y, sigma_3 = Z`.
    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("Pauli index {index}")))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn matrix(self) -> LabeledOperator {
        let entries = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I_UNIT, I_UNIT, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        LabeledOperator::square(CMatrix::from_row_slice(2, 2, &entries), vec![2])
            .expect("2x2 Pauli")
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(s)
    }
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" => Ok(Pauli::I),
            "X" | "x" => Ok(Pauli::X),
            "Y" | "y" => Ok(Pauli::Y),
            "Z" | "z" => Ok(Pauli::Z),
            _ => Err(Error::InvalidParameter(format!(
                "unknown Pauli label {s:?}"
            ))),
        }
    }
}

pub fn pauli(label: Pauli) -> LabeledOperator {
    label.matrix()
}

/// Tensor product of single-qubit Paulis.
pub fn pauli_string(labels: &[Pauli]) -> Result<LabeledOperator> {
    let mats: Vec<LabeledOperator> = labels.iter().map(|p| p.matrix()).collect();
    kron(&mats.iter().collect::<Vec<_>>())
}

fn real_ket(amplitudes: &[f64], dims: Vec<usize>) -> LabeledOperator {
    LabeledOperator::ket(
        amplitudes.iter().map(|&a| Complex::new(a, 0.0)).collect(),
        dims,
    )
    .expect("consistent ket")
}

/// `(|00> + |11>)/sqrt 2`.
pub fn phi_plus() -> LabeledOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    real_ket(&[s, 0.0, 0.0, s], vec![2, 2])
}

/// `(|01> - |10>)/sqrt 2`.
pub fn singlet() -> LabeledOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    real_ket(&[0.0, s, -s, 0.0], vec![2, 2])
}

/// Bell vector `m`, equal to `(sigma_m (x) I)|Phi+>` up to a global phase.
///
/// Index 0 is `Phi+`, 1 is `Psi+`, 2 is `Psi-`, 3 is `Phi-`. Outcome `m` of a
/// Bell measurement is undone by the Pauli correction `sigma_m`.
pub fn bell_state(index: usize) -> Result<LabeledOperator> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match index {
        0 => [s, 0.0, 0.0, s],
        1 => [0.0, s, s, 0.0],
        2 => [0.0, s, -s, 0.0],
        3 => [s, 0.0, 0.0, -s],
        _ => {
            return Err(Error::InvalidParameter(format!(
                "Bell index {index} not in 0..4"
            )))
        }
    };
    Ok(real_ket(&amps, vec![2, 2]))
}

/// Outcome-indexed measurement effects for one or more settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<Vec<LabeledOperator>>,
    acting_on: SubsystemMask,
}

impl Povm {
    pub fn new(effects: Vec<Vec<LabeledOperator>>, acting_on: SubsystemMask) -> Result<Self> {
        let dims = effects
            .first()
            .and_then(|s| s.first())
            .map(|e| e.dims().to_vec())
            .ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        if acting_on.len() != dims.len() {
            return Err(Error::InvalidPovm(format!(
                "effects on {} subsystems but mask names {}",
                dims.len(),
                acting_on.len()
            )));
        }
        for (x, setting) in effects.iter().enumerate() {
            if setting.is_empty() {
                return Err(Error::InvalidPovm(format!("setting {x} has no outcomes")));
            }
            let mut total = LabeledOperator::zeros(&dims);
            for (a, e) in setting.iter().enumerate() {
                if !e.is_square() || e.dims() != dims.as_slice() {
                    return Err(Error::InvalidPovm(format!(
                        "effect ({a}|{x}) has wrong dims"
                    )));
                }
                if !e.is_hermitian(VALIDATION_TOL) {
                    return Err(Error::InvalidPovm(format!(
                        "effect ({a}|{x}) not hermitian"
                    )));
                }
                let min = hermitian_eigs(e)?.min();
                if min < -VALIDATION_TOL {
                    return Err(Error::InvalidPovm(format!(
                        "effect ({a}|{x}) has eigenvalue {min:.3e}"
                    )));
                }
                total = total.add(e)?;
            }
            let dev = total.max_abs_diff(&LabeledOperator::identity(&dims));
            if dev > VALIDATION_TOL {
                return Err(Error::InvalidPovm(format!(
                    "setting {x} sums to identity only within {dev:.3e}"
                )));
            }
        }
        Ok(Self { effects, acting_on })
    }

    pub fn settings(&self) -> usize {
        self.effects.len()
    }

    pub fn outcome_count(&self, setting: usize) -> usize {
        self.effects[setting].len()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.effects.iter().map(Vec::len).collect()
    }

    pub fn effects(&self, setting: usize) -> &[LabeledOperator] {
        &self.effects[setting]
    }

    pub fn effect(&self, setting: usize, outcome: usize) -> &LabeledOperator {
        &self.effects[setting][outcome]
    }

    pub fn acting_on(&self) -> &SubsystemMask {
        &self.acting_on
    }

    pub fn dims(&self) -> &[usize] {
        self.effects[0][0].dims()
    }

    /// Every effect transposed in the computational basis.
    pub fn transposed(&self) -> Self {
        Self {
            effects: self
                .effects
                .iter()
                .map(|s| s.iter().map(LabeledOperator::transpose).collect())
                .collect(),
            acting_on: self.acting_on.clone(),
        }
    }

    /// Concatenates the settings of several POVMs on the same subsystems.
    pub fn concat(parts: Vec<Povm>) -> Result<Self> {
        let acting_on = parts
            .first()
            .map(|p| p.acting_on.clone())
            .ok_or_else(|| Error::InvalidPovm("nothing to concatenate".into()))?;
        let effects = parts.into_iter().flat_map(|p| p.effects).collect();
        Self::new(effects, acting_on)
    }
}

/// Two-outcome POVM `{(1 + A)/2, (1 - A)/2}` for an observable with spectrum in `[-1, 1]`.
pub fn binary_povm(observable: &LabeledOperator) -> Result<Povm> {
    let spec = hermitian_eigs(observable)?;
    let worst = spec.max().abs().max(spec.min().abs());
    if worst > 1.0 + 1e-9 {
        return Err(Error::SpectrumOutOfRange(worst));
    }
    let id = LabeledOperator::identity(observable.dims());
    let plus = id.add(observable)?.scale(0.5);
    let minus = id.sub(observable)?.scale(0.5);
    let mask = SubsystemMask::all(observable.dims().len());
    Povm::new(vec![vec![plus, minus]], mask)
}

fn check_trace_preserving(kraus: &[&LabeledOperator]) -> Result<()> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::InvalidKraus("empty Kraus list".into()))?;
    let mut total = LabeledOperator::zeros(first.dims_in());
    for k in kraus {
        if k.dims_in() != first.dims_in() || k.dims_out() != first.dims_out() {
            return Err(Error::InvalidKraus("Kraus operators differ in dims".into()));
        }
        total = total.add(&k.adjoint().matmul(k)?)?;
    }
    let dev = total.max_abs_diff(&LabeledOperator::identity(first.dims_in()));
    if dev > VALIDATION_TOL {
        return Err(Error::InvalidKraus(format!(
            "not trace preserving (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

/// Trace-preserving completely positive map in operator-sum form.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    kraus: Vec<LabeledOperator>,
}

impl Channel {
    pub fn new(kraus: Vec<LabeledOperator>) -> Result<Self> {
        check_trace_preserving(&kraus.iter().collect::<Vec<_>>())?;
        Ok(Self { kraus })
    }

    pub fn kraus(&self) -> &[LabeledOperator] {
        &self.kraus
    }

    pub fn dims_in(&self) -> &[usize] {
        self.kraus[0].dims_in()
    }

    pub fn dims_out(&self) -> &[usize] {
        self.kraus[0].dims_out()
    }

    pub fn apply(&self, state: &LabeledOperator) -> Result<LabeledOperator> {
        if state.dims_out() != self.dims_in() || !state.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "channel expects {:?}, state has {:?}",
                self.dims_in(),
                state.dims()
            )));
        }
        Ok(apply_unchecked(&self.kraus, state))
    }
}

/// Outcome-indexed CP maps whose sum is trace preserving.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    branches: Vec<Vec<LabeledOperator>>,
}

impl Instrument {
    pub fn new(branches: Vec<Vec<LabeledOperator>>) -> Result<Self> {
        if branches.iter().any(Vec::is_empty) {
            return Err(Error::InvalidKraus(
                "instrument branch without Kraus operators".into(),
            ));
        }
        check_trace_preserving(&branches.iter().flatten().collect::<Vec<_>>())?;
        Ok(Self { branches })
    }

    pub fn outcomes(&self) -> usize {
        self.branches.len()
    }

    pub fn branch(&self, outcome: usize) -> &[LabeledOperator] {
        &self.branches[outcome]
    }

    pub fn dims_in(&self) -> &[usize] {
        self.branches[0][0].dims_in()
    }

    pub fn dims_out(&self) -> &[usize] {
        self.branches[0][0].dims_out()
    }

    /// Unnormalized post-measurement state for `outcome`.
    pub fn apply_branch(&self, outcome: usize, state: &LabeledOperator) -> Result<LabeledOperator> {
        let kraus = self.branches.get(outcome).ok_or_else(|| {
            Error::InvalidParameter(format!("outcome {outcome} of {}", self.branches.len()))
        })?;
        if state.dims_out() != self.dims_in() || !state.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "instrument expects {:?}, state has {:?}",
                self.dims_in(),
                state.dims()
            )));
        }
        Ok(apply_unchecked(kraus, state))
    }

    /// Sum over outcomes.
    pub fn total_channel(&self) -> Channel {
        Channel {
            kraus: self.branches.iter().flatten().cloned().collect(),
        }
    }
}

pub fn werner_state(visibility: f64) -> Result<LabeledOperator> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::InvalidParameter(format!(
            "visibility {visibility} not in [0, 1]"
        )));
    }
    let noise = LabeledOperator::identity(&[2, 2]).scale((1.0 - visibility) / 4.0);
    singlet().projector()?.scale(visibility).add(&noise)
}

pub fn ghz(parties: usize) -> Result<LabeledOperator> {
    if parties < 2 {
        return Err(Error::InvalidParameter(format!(
            "GHZ needs n >= 2, got {parties}"
        )));
    }
    let d = 1 << parties;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![0.0; d];
    amps[0] = s;
    amps[d - 1] = s;
    Ok(real_ket(&amps, vec![2; parties]))
}

pub fn w_state(parties: usize) -> Result<LabeledOperator> {
    if parties < 2 {
        return Err(Error::InvalidParameter(format!(
            "W state needs n >= 2, got {parties}"
        )));
    }
    let d = 1 << parties;
    let a = 1.0 / (parties as f64).sqrt();
    let mut amps = vec![0.0; d];
    for k in 0..parties {
        amps[1 << k] = a;
    }
    Ok(real_ket(&amps, vec![2; parties]))
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidParameter(format!("invalid dims {dims:?}")));
    }
    Ok(dims.iter().product())
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_ket_from(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> LabeledOperator {
    let d: usize = dims.iter().product();
    let v = DVector::from_iterator(d, (0..d).map(|_| gaussian(rng)));
    let v = &v / Complex::new(v.norm(), 0.0);
    LabeledOperator::ket(v.iter().copied().collect(), dims).expect("consistent ket")
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn random_pure(dims: &[usize], seed: u64) -> Result<LabeledOperator> {
    check_dims(dims)?;
    Ok(random_ket_from(
        &mut ChaCha8Rng::seed_from_u64(seed),
        dims.to_vec(),
    ))
}

/// `G G^dagger / tr` with `G` a `d x rank` complex Gaussian matrix.
pub fn random_density(dims: &[usize], rank: usize, seed: u64) -> Result<LabeledOperator> {
    let d = check_dims(dims)?;
    if rank == 0 || rank > d {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} for dimension {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(d, rank, |_, _| gaussian(&mut rng));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    let mut rho = rho / tr;
    // exact hermiticity
    let rho_h = (&rho + rho.adjoint()) * Complex::new(0.5, 0.0);
    rho.copy_from(&rho_h);
    LabeledOperator::square(rho, dims.to_vec())
}

/// Product of independent Haar-random pure states, one per subsystem.
pub fn random_product(dims: &[usize], seed: u64) -> Result<LabeledOperator> {
    check_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<LabeledOperator> = dims
        .iter()
        .map(|&d| random_ket_from(&mut rng, vec![d]).projector())
        .collect::<Result<_>>()?;
    kron(&factors.iter().collect::<Vec<_>>())
}

/// Haar-random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary(dims: &[usize], seed: u64) -> Result<LabeledOperator> {
    let d = check_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(&mut rng));
    let qr = g.qr();
    let (q, r) = qr.unpack();
    // fix column phases so the distribution is Haar
    let mut u = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        for i in 0..d {
            u[(i, j)] *= phase;
        }
    }
    LabeledOperator::square(u, dims.to_vec())
}

/// Named members of the test corpus.
#[derive(Clone, Debug, PartialEq)]
pub enum CanonicalState {
    Ghz(usize),
    W(usize),
    RandomPure {
        dims: Vec<usize>,
        seed: u64,
    },
    RandomDensity {
        dims: Vec<usize>,
        rank: usize,
        seed: u64,
    },
    RandomProduct {
        dims: Vec<usize>,
        seed: u64,
    },
}

/// Density operator of a corpus state.
pub fn canonical_state(kind: &CanonicalState) -> Result<LabeledOperator> {
    match kind {
        CanonicalState::Ghz(n) => ghz(*n)?.projector(),
        CanonicalState::W(n) => w_state(*n)?.projector(),
        CanonicalState::RandomPure { dims, seed } => random_pure(dims, *seed)?.projector(),
        CanonicalState::RandomDensity { dims, rank, seed } => random_density(dims, *rank, *seed),
        CanonicalState::RandomProduct { dims, seed } => random_product(dims, *seed),
    }
}

/// Purification `sum_i sqrt(l_i) |v_i>|i>_E` with `E` of dimension rank(rho).
pub fn purify(rho: &LabeledOperator) -> Result<LabeledOperator> {
    rho.validate_density(VALIDATION_TOL)?;
    let spec = hermitian_eigs(rho)?;
    let kept: Vec<usize> = (0..spec.values.len())
        .filter(|&i| spec.values[i] > 1e-12)
        .collect();
    let rank = kept.len();
    let d = rho.dim_out();
    let mut amps = vec![ZERO; d * rank];
    for (e, &i) in kept.iter().enumerate() {
        let w = spec.values[i].sqrt();
        for row in 0..d {
            amps[row * rank + e] = spec.vectors[(row, i)] * w;
        }
    }
    let dims = [rho.dims(), &[rank]].concat();
    LabeledOperator::ket(amps, dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{partial_trace, partial_transpose};

    #[test]
    fn pauli_transposes() {
        assert_eq!(pauli(Pauli::X).transpose(), pauli(Pauli::X));
        assert_eq!(pauli(Pauli::Z).transpose(), pauli(Pauli::Z));
        assert_eq!(pauli(Pauli::Y).transpose(), pauli(Pauli::Y).scale(-1.0));
        assert_eq!(pauli(Pauli::I).transpose(), pauli(Pauli::I));
    }

    #[test]
    fn bell_basis_is_orthonormal_and_indexed_by_corrections() {
        let phi = phi_plus();
        for m in 0..4 {
            let bm = bell_state(m).unwrap();
            for n in 0..4 {
                let overlap = bm
                    .adjoint()
                    .matmul(&bell_state(n).unwrap())
                    .unwrap()
                    .get(0, 0);
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((overlap - Complex::new(want, 0.0)).norm() < 1e-14);
            }
            let sigma = kron(&[&Pauli::from_index(m).unwrap().matrix(), &pauli(Pauli::I)]).unwrap();
            let rotated = sigma.matmul(&phi).unwrap();
            // equal up to global phase: |<bm|rotated>| = 1
            let ov = bm.adjoint().matmul(&rotated).unwrap().get(0, 0);
            assert!((ov.norm() - 1.0).abs() < 1e-14, "index {m}");
        }
        assert_eq!(bell_state(0).unwrap(), phi);
        assert!(bell_state(4).is_err());
    }

    #[test]
    fn binary_povm_examples() {
        let z = binary_povm(&pauli(Pauli::Z)).unwrap();
        let p0 = LabeledOperator::basis_ket(&[0], &[2])
            .unwrap()
            .projector()
            .unwrap();
        let p1 = LabeledOperator::basis_ket(&[1], &[2])
            .unwrap()
            .projector()
            .unwrap();
        assert_eq!(z.effect(0, 0), &p0);
        assert_eq!(z.effect(0, 1), &p1);

        let m = pauli(Pauli::Z)
            .add(&pauli(Pauli::X))
            .unwrap()
            .scale(std::f64::consts::FRAC_1_SQRT_2);
        let povm = binary_povm(&m).unwrap();
        let spec = hermitian_eigs(&m).unwrap();
        let top = LabeledOperator::ket(spec.vector(0).iter().copied().collect(), vec![2])
            .unwrap()
            .projector()
            .unwrap();
        assert!(povm.effect(0, 0).max_abs_diff(&top) < 1e-14);
        let e0 = povm.effect(0, 0);
        assert!(e0.matmul(e0).unwrap().max_abs_diff(e0) < 1e-14);

        let id = binary_povm(&pauli(Pauli::I)).unwrap();
        assert_eq!(id.effect(0, 0), &pauli(Pauli::I));
        assert_eq!(id.effect(0, 1).max_abs(), 0.0);

        assert!(matches!(
            binary_povm(&pauli(Pauli::Z).scale(1.5)),
            Err(Error::SpectrumOutOfRange(_))
        ));
    }

    #[test]
    fn povm_validation_rejects_incomplete_sets() {
        let p0 = LabeledOperator::basis_ket(&[0], &[2])
            .unwrap()
            .projector()
            .unwrap();
        assert!(Povm::new(vec![vec![p0.clone()]], SubsystemMask::all(1)).is_err());
        let neg = pauli(Pauli::Z);
        let rest = pauli(Pauli::I).sub(&neg).unwrap();
        assert!(Povm::new(vec![vec![neg, rest]], SubsystemMask::all(1)).is_err());
    }

    #[test]
    fn werner_examples() {
        assert!(
            werner_state(0.0)
                .unwrap()
                .max_abs_diff(&LabeledOperator::identity(&[2, 2]).scale(0.25))
                < 1e-15
        );
        assert!(
            werner_state(1.0)
                .unwrap()
                .max_abs_diff(&singlet().projector().unwrap())
                < 1e-15
        );
        assert!(werner_state(1.2).is_err());
        assert!(werner_state(-0.1).is_err());
    }

    #[test]
    fn werner_pt_minimum_tracks_visibility() {
        // oracle: the singlet's partial transpose has spectrum {1/2, 1/2, 1/2, -1/2}
        for i in 0..=20 {
            let v = i as f64 / 20.0;
            let rho = werner_state(v).unwrap();
            rho.validate_density(VALIDATION_TOL).unwrap();
            let pt = partial_transpose(&rho, &SubsystemMask::new([1])).unwrap();
            let min = hermitian_eigs(&pt).unwrap().min();
            assert!((min - (1.0 - 3.0 * v) / 4.0).abs() < 1e-12, "v = {v}");
            assert_eq!(min < -1e-12, v > 1.0 / 3.0);
        }
    }

    #[test]
    fn canonical_states() {
        let g = ghz(3).unwrap();
        assert!((g.get(0, 0).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((g.get(7, 0).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(ghz(1).is_err());

        let psi = random_pure(&[2, 3], 11).unwrap();
        assert!((psi.norm_squared() - 1.0).abs() < 1e-12);
        assert_eq!(random_pure(&[2, 3], 11).unwrap(), psi);

        let rho = canonical_state(&CanonicalState::RandomDensity {
            dims: vec![2, 2],
            rank: 3,
            seed: 5,
        })
        .unwrap();
        rho.validate_density(VALIDATION_TOL).unwrap();
        let nonzero = hermitian_eigs(&rho)
            .unwrap()
            .values
            .iter()
            .filter(|v| **v > 1e-12)
            .count();
        assert_eq!(nonzero, 3);

        let prod = random_product(&[2, 2], 3).unwrap();
        prod.validate_density(VALIDATION_TOL).unwrap();
        let pt = partial_transpose(&prod, &SubsystemMask::new([1])).unwrap();
        assert!(hermitian_eigs(&pt).unwrap().min() > -1e-12);

        let w = canonical_state(&CanonicalState::W(3)).unwrap();
        assert!((w.get(1, 2).re - 1.0 / 3.0).abs() < 1e-15);
        assert!(random_density(&[2], 3, 0).is_err());
    }

    #[test]
    fn ghz3_pt_top_eigenvalue() {
        // Schmidt coefficients (1/sqrt2, 1/sqrt2): top PT eigenvalue lambda_i^2 = lambda_1 lambda_2 = 1/2
        let rho = ghz(3).unwrap().projector().unwrap();
        let pt = partial_transpose(&rho, &SubsystemMask::new([0])).unwrap();
        let s = hermitian_eigs(&pt).unwrap();
        assert!((s.max() - 0.5).abs() < 1e-12);
        assert!((s.min() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let u = random_unitary(&[2, 2], 9).unwrap();
        let gram = u.adjoint().matmul(&u).unwrap();
        assert!(gram.max_abs_diff(&LabeledOperator::identity(&[2, 2])) < 1e-12);
    }

    #[test]
    fn purify_examples() {
        let psi = ghz(2).unwrap();
        let p = purify(&psi.projector().unwrap()).unwrap();
        assert_eq!(p.dims_out(), &[2, 2, 1]);
        let back = partial_trace(&p.projector().unwrap(), &SubsystemMask::new([2])).unwrap();
        assert!(back.max_abs_diff(&psi.projector().unwrap()) < 1e-12);

        let mixed = LabeledOperator::identity(&[2]).scale(0.5);
        let p = purify(&mixed).unwrap();
        assert_eq!(p.dims_out(), &[2, 2]);
        let marg = partial_trace(&p.projector().unwrap(), &SubsystemMask::new([1])).unwrap();
        assert!(marg.max_abs_diff(&mixed) < 1e-12);
        let pt = partial_transpose(&p.projector().unwrap(), &SubsystemMask::new([1])).unwrap();
        assert!((hermitian_eigs(&pt).unwrap().min() + 0.5).abs() < 1e-12);

        let rho = werner_state(0.5).unwrap();
        let p = purify(&rho).unwrap();
        let back = partial_trace(&p.projector().unwrap(), &SubsystemMask::new([2])).unwrap();
        assert!(back.max_abs_diff(&rho) < 1e-9);
    }

    #[test]
    fn instrument_and_channel_validation() {
        let p0 = LabeledOperator::basis_ket(&[0], &[2])
            .unwrap()
            .projector()
            .unwrap();
        let p1 = LabeledOperator::basis_ket(&[1], &[2])
            .unwrap()
            .projector()
            .unwrap();
        let inst = Instrument::new(vec![vec![p0.clone()], vec![p1.clone()]]).unwrap();
        let rho = random_density(&[2], 2, 1).unwrap();
        let total = inst
            .apply_branch(0, &rho)
            .unwrap()
            .add(&inst.apply_branch(1, &rho).unwrap())
            .unwrap();
        assert!((total.trace().re - 1.0).abs() < 1e-12);
        assert!(
            inst.total_channel()
                .apply(&rho)
                .unwrap()
                .max_abs_diff(&total)
                < 1e-15
        );
        assert!(Instrument::new(vec![vec![p0.clone()]]).is_err());
        assert!(Channel::new(vec![p0, p1.scale(2.0)]).is_err());
    }
}
