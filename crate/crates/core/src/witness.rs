//! Entanglement witnesses for two-qubit sources and their evaluation through
//! the broadcast functional on the lower branches.

use crate::error::{Error, Result};
use crate::kit::{pauli, random_product, random_unitary, Pauli};
use crate::network::{lower_observable, Behavior, BroadcastModel, LOWER_SETTINGS};
use crate::tensor::{
    hermitian_eigs, kron, partial_transpose, LabeledOperator, SubsystemMask, ARITHMETIC_TOL,
    VALIDATION_TOL,
};

/// Bell outcome `Phi+` on both upper branches.
pub const DEFAULT_CONDITIONING: (usize, usize) = (0, 0);

/// Weight of a fixed pair of Bell outcomes in the honest experiment: each
/// side teleports with probability 1/4.
pub const HONEST_OUTCOME_WEIGHT: f64 = 1.0 / 16.0;

/// Pauli coefficients `c[mu][nu]` and lower-branch projector coefficients
/// `w[a][b][x - 1][y - 1]` of a two-qubit hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessExpansion {
    witness: LabeledOperator,
    pauli: [[f64; 4]; 4],
    projector: [[[[f64; LOWER_SETTINGS]; LOWER_SETTINGS]; 2]; 2],
}

impl WitnessExpansion {
    pub fn witness(&self) -> &LabeledOperator {
        &self.witness
    }

    pub fn pauli_coefficient(&self, mu: Pauli, nu: Pauli) -> f64 {
        self.pauli[mu.index()][nu.index()]
    }

    pub fn pauli_table(&self) -> &[[f64; 4]; 4] {
        &self.pauli
    }

    /// `w_{a,b,x,y}` with 1-based settings.
    pub fn projector_coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.projector[a][b][x - 1][y - 1]
    }

    pub fn projector_table(&self) -> &[[[[f64; LOWER_SETTINGS]; LOWER_SETTINGS]; 2]; 2] {
        &self.projector
    }

    /// `sum c_{mu nu} sigma_mu (x) sigma_nu`.
    pub fn from_pauli(&self) -> LabeledOperator {
        let mut acc = LabeledOperator::zeros(&[2, 2]);
        for mu in Pauli::ALL {
            for nu in Pauli::ALL {
                let term = kron(&[&pauli(mu), &pauli(nu)]).expect("kron");
                acc = acc
                    .add(&term.scale(self.pauli_coefficient(mu, nu)))
                    .expect("dims");
            }
        }
        acc
    }

    /// `sum w_{a,b,x,y} Pi^(a|x) (x) Pi^(b|y)` over lower-branch projectors.
    pub fn from_projectors(&self) -> LabeledOperator {
        let mut acc = LabeledOperator::zeros(&[2, 2]);
        for a in 0..2 {
            for b in 0..2 {
                for x in 1..=LOWER_SETTINGS {
                    for y in 1..=LOWER_SETTINGS {
                        let term =
                            kron(&[&lower_projector(a, x), &lower_projector(b, y)]).expect("kron");
                        acc = acc
                            .add(&term.scale(self.projector_coefficient(a, b, x, y)))
                            .expect("dims");
                    }
                }
            }
        }
        acc
    }
}

/// `Pi^(a|x) = (1 + (-1)^a sigma_x)/2` on the lower branch, `x` 1-based.
pub fn lower_projector(a: usize, x: usize) -> LabeledOperator {
    let sigma = pauli(lower_observable(x).expect("valid lower setting"));
    let sign = if a == 0 { 1.0 } else { -1.0 };
    LabeledOperator::identity(&[2])
        .add(&sigma.scale(sign))
        .expect("dims")
        .scale(0.5)
}

fn require_two_qubits(op: &LabeledOperator) -> Result<()> {
    if !op.is_square() || op.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "expected a two-qubit operator, got {:?}",
            op.dims()
        )));
    }
    Ok(())
}

/// Expands a hermitian two-qubit operator in Paulis and in lower-branch projectors.
///
/// The projector set is overcomplete; identity components are routed through
/// setting 3 so that `w` is unique.
pub fn pauli_expansion(witness: &LabeledOperator) -> Result<WitnessExpansion> {
    require_two_qubits(witness)?;
    let herm = witness.hermiticity_error();
    if herm > VALIDATION_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let mut c = [[0.0; 4]; 4];
    for mu in Pauli::ALL {
        for nu in Pauli::ALL {
            let s = kron(&[&pauli(mu), &pauli(nu)])?;
            c[mu.index()][nu.index()] = witness.expectation(&s)?.re / 4.0;
        }
    }
    let label = |x: usize| lower_observable(x).expect("valid lower setting").index();
    let id = Pauli::I.index();
    let mut w = [[[[0.0; LOWER_SETTINGS]; LOWER_SETTINGS]; 2]; 2];
    for (a, wa) in w.iter_mut().enumerate() {
        for (b, wab) in wa.iter_mut().enumerate() {
            let sa = if a == 0 { 1.0 } else { -1.0 };
            let sb = if b == 0 { 1.0 } else { -1.0 };
            for x in 1..=LOWER_SETTINGS {
                for y in 1..=LOWER_SETTINGS {
                    let mut v = sa * sb * c[label(x)][label(y)];
                    if y == LOWER_SETTINGS {
                        v += sa * c[label(x)][id];
                    }
                    if x == LOWER_SETTINGS {
                        v += sb * c[id][label(y)];
                    }
                    if x == LOWER_SETTINGS && y == LOWER_SETTINGS {
                        v += c[id][id];
                    }
                    wab[x - 1][y - 1] = v;
                }
            }
        }
    }
    Ok(WitnessExpansion {
        witness: witness.clone(),
        pauli: c,
        projector: w,
    })
}

/// Witness `(|phi><phi|)^{T_B}` from the most negative eigenvector of `rho^{T_B}`.
///
/// `tr[W rho]` equals that eigenvalue. PPT states (separable, for two qubits)
/// are rejected.
pub fn npt_witness(rho: &LabeledOperator) -> Result<WitnessExpansion> {
    require_two_qubits(rho)?;
    rho.validate_density(VALIDATION_TOL)?;
    let mask = SubsystemMask::new([1]);
    let spec = hermitian_eigs(&partial_transpose(rho, &mask)?)?;
    let min = spec.min();
    if min >= -ARITHMETIC_TOL {
        return Err(Error::NotNptCertifiable {
            min_eigenvalue: min,
        });
    }
    let phi = LabeledOperator::ket(
        spec.vector(spec.values.len() - 1).iter().copied().collect(),
        vec![2, 2],
    )?;
    let w = partial_transpose(&phi.projector()?, &mask)?;
    pauli_expansion(&w)
}

/// `I(P) = sum w_{a2,b2,x2,y2} P(a2, b2, a1*, b1* | x2, y2, 0, 0)` for a bipartite behavior.
pub fn broadcast_functional(
    behavior: &Behavior,
    expansion: &WitnessExpansion,
    conditioning: (usize, usize),
) -> Result<f64> {
    if behavior.device_count() != 4 {
        return Err(Error::MissingEntries(format!(
            "bipartite behavior needs 4 devices, got {}",
            behavior.device_count()
        )));
    }
    let counts = behavior.outcome_counts();
    if conditioning.0 >= counts[0][0] || conditioning.1 >= counts[2][0] {
        return Err(Error::MissingEntries(format!(
            "conditioning outcome {conditioning:?} not available at x1 = y1 = 0"
        )));
    }
    let mut total = 0.0;
    for x2 in 1..=LOWER_SETTINGS {
        for y2 in 1..=LOWER_SETTINGS {
            let settings = [0, x2 - 1, 0, y2 - 1];
            for a2 in 0..2 {
                for b2 in 0..2 {
                    let p = behavior.prob(&settings, &[conditioning.0, a2, conditioning.1, b2])?;
                    total += expansion.projector_coefficient(a2, b2, x2, y2) * p;
                }
            }
        }
    }
    Ok(total)
}

/// Broadcast functional of the honest experiment next to the values it is compared with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HonestWitnessValue {
    /// `I(P)` read off the Born-rule behavior.
    pub functional: f64,
    /// `tr[W rho]`.
    pub trace: f64,
}

impl HonestWitnessValue {
    pub fn quarter_trace(&self) -> f64 {
        self.trace / 4.0
    }

    /// `tr[W rho] / 16`, the value the honest experiment produces for the
    /// `Phi+` conditioning.
    pub fn predicted(&self) -> f64 {
        self.trace * HONEST_OUTCOME_WEIGHT
    }
}

/// Evaluates `I(P)` on the honest model of `rho` and `tr[W rho]`.
pub fn honest_witness_value(
    rho: &LabeledOperator,
    expansion: &WitnessExpansion,
) -> Result<HonestWitnessValue> {
    require_two_qubits(rho)?;
    let behavior = BroadcastModel::honest(rho, 2)?.behavior()?;
    Ok(HonestWitnessValue {
        functional: broadcast_functional(&behavior, expansion, DEFAULT_CONDITIONING)?,
        trace: rho.expectation(expansion.witness())?.re,
    })
}

/// `(I_from_behavior, tr[W rho] / 4)`.
pub fn verify_honest_identity(
    rho: &LabeledOperator,
    expansion: &WitnessExpansion,
) -> Result<(f64, f64)> {
    let v = honest_witness_value(rho, expansion)?;
    Ok((v.functional, v.quarter_trace()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub visibility: f64,
    pub min_pt_eigenvalue: f64,
    /// `I(P)`, present when a witness exists.
    pub functional: Option<f64>,
    /// `tr[W rho]`, present when a witness exists.
    pub trace: Option<f64>,
    pub detected: bool,
}

impl SweepRow {
    pub fn quarter_trace(&self) -> Option<f64> {
        self.trace.map(|t| t / 4.0)
    }
}

/// Detection threshold on `I(P)`.
pub const DETECTION_TOL: f64 = 1e-10;

/// Witness construction and honest broadcast evaluation along a Werner family.
pub fn werner_sweep(grid: &[f64]) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&v| {
            let rho = crate::kit::werner_state(v)?;
            let pt = partial_transpose(&rho, &SubsystemMask::new([1]))?;
            let min_pt_eigenvalue = hermitian_eigs(&pt)?.min();
            match npt_witness(&rho) {
                Ok(expansion) => {
                    let value = honest_witness_value(&rho, &expansion)?;
                    Ok(SweepRow {
                        visibility: v,
                        min_pt_eigenvalue,
                        functional: Some(value.functional),
                        trace: Some(value.trace),
                        detected: value.functional < -DETECTION_TOL,
                    })
                }
                Err(Error::NotNptCertifiable { .. }) => Ok(SweepRow {
                    visibility: v,
                    min_pt_eigenvalue,
                    functional: None,
                    trace: None,
                    detected: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Random pure product states plus local-unitary images of `|00>`.
pub fn separable_corpus(products: usize, orbits: usize, seed: u64) -> Result<Vec<LabeledOperator>> {
    let mut corpus = Vec::with_capacity(products + orbits);
    for i in 0..products as u64 {
        corpus.push(random_product(&[2, 2], seed.wrapping_add(i))?);
    }
    let zero = LabeledOperator::basis_ket(&[0, 0], &[2, 2])?;
    for i in 0..orbits as u64 {
        let s = seed.wrapping_add(products as u64).wrapping_add(2 * i);
        let u = kron(&[
            &random_unitary(&[2], s)?,
            &random_unitary(&[2], s ^ 0x5eed)?,
        ])?;
        corpus.push(u.matmul(&zero)?.projector()?);
    }
    Ok(corpus)
}

/// Minimum of `tr[W' sigma]` over the corpus for `W' = W, W^{T_A}, W^{T_B}, W^T`.
pub fn separable_minimum(
    witness: &LabeledOperator,
    corpus: &[LabeledOperator],
) -> Result<[f64; 4]> {
    require_two_qubits(witness)?;
    let variants = [
        witness.clone(),
        partial_transpose(witness, &SubsystemMask::new([0]))?,
        partial_transpose(witness, &SubsystemMask::new([1]))?,
        witness.transpose(),
    ];
    let mut mins = [f64::INFINITY; 4];
    for sigma in corpus {
        for (m, w) in mins.iter_mut().zip(&variants) {
            *m = m.min(sigma.expectation(w)?.re);
        }
    }
    Ok(mins)
}
