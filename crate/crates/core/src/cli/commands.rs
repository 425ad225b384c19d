//! Report-producing commands behind the `broadcast` binary.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use super::report::{cell, matrix_value, Report, Table};
use super::source::SourceSpec;
use crate::bowles::{classical_bound_bruteforce, link_scores, LOCAL_BOUND, QUANTUM_MAXIMUM};
use crate::error::{Error, Result};
use crate::kit::{random_density, Pauli};
use crate::network::{mixture_behavior, BroadcastModel, LOWER_SETTINGS};
use crate::selftest::{
    check_gme, extract_branches, pauli_correct, pauli_tomography, pt_spectrum_report,
    pure_refinement_check, reconstruct, EXTRACTION_OUTCOMES,
};
use crate::tensor::{
    hermitian_eigs, partial_transpose, LabeledOperator, SubsystemMask, ARITHMETIC_TOL,
};
use crate::witness::{honest_witness_value, npt_witness, werner_sweep, DETECTION_TOL};

/// Product-vector threshold on the second Schmidt coefficient.
pub const SCHMIDT_TOL: f64 = 1e-6;
/// Tomographic reconstruction tolerance.
pub const TOMOGRAPHY_TOL: f64 = 1e-8;

/// Settings shared by every command.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Options {
    pub seed: u64,
    /// Replaces the default tolerance of every check that has one.
    pub tol: Option<f64>,
}

impl Options {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn report(&self, command: &str) -> Report {
        let mut r = Report::new(command, self.seed);
        if let Some(t) = self.tol {
            r.param("tol", t);
        }
        r
    }
}

fn require_qubits(rho: &LabeledOperator) -> Result<usize> {
    if rho.dims().iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch(format!(
            "expected qubit parties, got {:?}",
            rho.dims()
        )));
    }
    Ok(rho.dims().len())
}

/// Honest Bowles scores of every inner link and the brute-force local bound.
pub fn cmd_bowles(opts: &Options, source: &SourceSpec, transposed: bool) -> Result<Report> {
    let rho = source.load()?;
    let n = require_qubits(&rho)?;
    let mut model = BroadcastModel::honest(&rho, n)?;
    if transposed {
        model = model.transpose();
    }
    let scores = link_scores(&model.behavior()?)?;
    let bound = classical_bound_bruteforce();

    let mut r = opts.report("bowles");
    r.param("source", source.to_string());
    r.param("transposed", transposed);
    r.result("link_scores", scores.clone());
    r.result("quantum_maximum", QUANTUM_MAXIMUM);
    r.result("classical_bound", bound.value);
    r.result(
        "classical_maximiser",
        json!({ "lower": bound.lower, "upper": bound.upper }),
    );
    let min_score = scores.iter().copied().fold(f64::INFINITY, f64::min);
    r.result("gap", min_score - bound.value);
    let mut table = Table::new(&["link", "score"]);
    for (i, &s) in scores.iter().enumerate() {
        r.check_at_most(
            &format!("link_{i}_maximal"),
            (s - QUANTUM_MAXIMUM).abs(),
            opts.tol(ARITHMETIC_TOL),
        );
        table.push(vec![i.to_string(), cell(s)]);
    }
    r.check_at_most("classical_bound", (bound.value - LOCAL_BOUND).abs(), 0.0);
    r.table = Some(table);
    Ok(r)
}

fn pauli_label(mu: Pauli, nu: Pauli) -> String {
    format!("{mu}{nu}")
}

/// Witness construction and its honest broadcast evaluation on a two-qubit source.
pub fn cmd_witness(opts: &Options, source: &SourceSpec) -> Result<Report> {
    let rho = source.load()?;
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "witness needs two qubits, got {:?}",
            rho.dims()
        )));
    }
    let expansion = npt_witness(&rho)?;
    let value = honest_witness_value(&rho, &expansion)?;
    let min_pt = hermitian_eigs(&partial_transpose(&rho, &SubsystemMask::new([1]))?)?.min();

    let mut r = opts.report("witness");
    r.param("source", source.to_string());
    r.result("witness", matrix_value(expansion.witness()));
    let mut c = serde_json::Map::new();
    for mu in Pauli::ALL {
        for nu in Pauli::ALL {
            c.insert(
                pauli_label(mu, nu),
                expansion.pauli_coefficient(mu, nu).into(),
            );
        }
    }
    r.result("pauli_coefficients", Value::Object(c));
    let mut table = Table::new(&["a", "b", "x", "y", "w"]);
    let mut w = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for x in 1..=LOWER_SETTINGS {
                for y in 1..=LOWER_SETTINGS {
                    let v = expansion.projector_coefficient(a, b, x, y);
                    w.push(json!({ "a": a, "b": b, "x": x, "y": y, "w": v }));
                    table.push(vec![
                        a.to_string(),
                        b.to_string(),
                        x.to_string(),
                        y.to_string(),
                        cell(v),
                    ]);
                }
            }
        }
    }
    r.result("projector_coefficients", w);
    r.result("functional", value.functional);
    r.result("trace", value.trace);
    r.result("quarter_trace", value.quarter_trace());
    r.result("predicted", value.predicted());
    r.result("min_pt_eigenvalue", min_pt);
    r.result("entangled", value.functional < -DETECTION_TOL);
    r.check_at_most(
        "honest_identity",
        (value.functional - value.predicted()).abs(),
        opts.tol(ARITHMETIC_TOL),
    );
    r.check_negative("detects_entanglement", value.functional, DETECTION_TOL);
    r.table = Some(table);
    Ok(r)
}

/// `start:stop:step` with inclusive ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 1.0,
            step: 0.01,
        }
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| (self.start + i as f64 * self.step).min(self.stop))
            .collect()
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid grid value '{p}'")))
            })
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(Error::Parse(format!("grid '{s}' must be start:stop:step")));
        };
        if !start.is_finite() || !stop.is_finite() || step.is_nan() || step <= 0.0 || stop < start {
            return Err(Error::Parse(format!(
                "grid '{s}' needs start <= stop and step > 0"
            )));
        }
        Ok(Self { start, stop, step })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Werner-family sweep of the witness and its honest broadcast value.
pub fn cmd_werner_sweep(opts: &Options, grid: &Grid) -> Result<Report> {
    let rows = werner_sweep(&grid.points())?;
    let mut r = opts.report("werner-sweep");
    r.param("grid", grid.to_string());

    let mut table = Table::new(&["v", "min_pt_eig", "I", "quarter_trace", "detected"]);
    let opt_cell = |x: Option<f64>| x.map(cell).unwrap_or_default();
    let mut mismatches = 0usize;
    let mut identity = 0.0f64;
    let mut first_detected = None;
    let mut json_rows = Vec::with_capacity(rows.len());
    for row in &rows {
        let entangled = row.visibility > 1.0 / 3.0;
        if row.detected != entangled {
            mismatches += 1;
        }
        if row.detected && first_detected.is_none() {
            first_detected = Some(row.visibility);
        }
        if let (Some(i), Some(t)) = (row.functional, row.trace) {
            identity = identity.max((i - t / 16.0).abs());
        }
        json_rows.push(json!({
            "v": row.visibility,
            "min_pt_eig": row.min_pt_eigenvalue,
            "I": row.functional,
            "quarter_trace": row.quarter_trace(),
            "detected": row.detected,
        }));
        table.push(vec![
            cell(row.visibility),
            cell(row.min_pt_eigenvalue),
            opt_cell(row.functional),
            opt_cell(row.quarter_trace()),
            row.detected.to_string(),
        ]);
    }
    r.result("rows", json_rows);
    r.result("first_detected", first_detected);
    r.check_at_most("threshold", mismatches as f64, 0.0);
    r.check_at_most("honest_identity", identity, opts.tol(ARITHMETIC_TOL));
    r.table = Some(table);
    Ok(r)
}

fn outcome_tuples(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..EXTRACTION_OUTCOMES.pow(n as u32)).map(move |code| {
        (0..n)
            .rev()
            .map(|p| code / EXTRACTION_OUTCOMES.pow(p as u32) % EXTRACTION_OUTCOMES)
            .collect()
    })
}

/// Branch extraction, reconstruction and tomography for a `mix` of the
/// honest and fully transposed models.
pub fn cmd_selftest(
    opts: &Options,
    source: &SourceSpec,
    parties: Option<usize>,
    mix: f64,
) -> Result<Report> {
    let rho = source.load()?;
    let n = require_qubits(&rho)?;
    if let Some(p) = parties {
        if p != n {
            return Err(Error::InvalidParameter(format!(
                "source has {n} parties, not {p}"
            )));
        }
    }
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::InvalidParameter(format!(
            "mixture weight {mix} not in [0, 1]"
        )));
    }
    let components: Vec<(f64, Vec<bool>)> = [(mix, vec![false; n]), (1.0 - mix, vec![true; n])]
        .into_iter()
        .filter(|(w, _)| *w > 0.0)
        .collect();

    let mut r = opts.report("selftest");
    r.param("source", source.to_string());
    r.param("parties", n);
    r.param("mix", mix);

    let branches = extract_branches(&rho, &components)?;
    let mut traces = serde_json::Map::new();
    let mut table = Table::new(&["flags", "trace"]);
    for (k, t) in branches.traces() {
        traces.insert(k.to_string(), t.into());
        table.push(vec![k.to_string(), cell(t)]);
    }
    r.result("branch_traces", Value::Object(traces));
    let residual = reconstruct(&branches)?.max_abs_diff(&rho);
    r.result("reconstruction_residual", residual);
    r.check_at_most("reconstruction", residual, opts.tol(ARITHMETIC_TOL));

    match source.pure_ket()? {
        Some(psi) if check_gme(&psi).is_ok() => {
            let refinement = pure_refinement_check(&branches, &psi, opts.tol(ARITHMETIC_TOL))?;
            let offending: serde_json::Map<String, Value> = refinement
                .offending
                .iter()
                .map(|(k, t)| (k.to_string(), (*t).into()))
                .collect();
            r.result(
                "pure_refinement",
                json!({
                    "p": refinement.p,
                    "passed": refinement.passed(),
                    "offending": offending,
                    "honest_residual": refinement.honest_residual,
                    "transposed_residual": refinement.transposed_residual,
                }),
            );
            let worst = refinement
                .honest_residual
                .max(refinement.transposed_residual);
            r.checks.push(super::report::Check {
                name: "pure_refinement".into(),
                passed: refinement.passed(),
                measured: worst.max(refinement.offending.iter().map(|o| o.1).fold(0.0, f64::max)),
                tolerance: refinement.tolerance,
            });
        }
        Some(psi) => {
            let reason = check_gme(&psi)
                .err()
                .map(|e| e.to_string())
                .unwrap_or_default();
            r.result("pure_refinement", json!({ "skipped": reason }));
        }
        None => {
            r.result(
                "pure_refinement",
                json!({ "skipped": "source is not a named pure state" }),
            );
        }
    }

    let models = components
        .iter()
        .map(|(w, f)| BroadcastModel::with_flags(&rho, f).map(|m| (*w, m)))
        .collect::<Result<Vec<_>>>()?;
    let weighted: Vec<(f64, &BroadcastModel)> = models.iter().map(|(w, m)| (*w, m)).collect();
    let behavior = mixture_behavior(&weighted)?;
    let scale = (EXTRACTION_OUTCOMES as f64).powi(n as i32);
    let mut tomography = 0.0f64;
    for s in outcome_tuples(n) {
        let t = pauli_correct(&pauli_tomography(&behavior, &s)?, &s)?.scale(scale);
        tomography = tomography.max(t.max_abs_diff(&rho));
    }
    r.result("tomography_residual", tomography);
    r.check_at_most("tomography", tomography, opts.tol(TOMOGRAPHY_TOL));
    r.table = Some(table);
    Ok(r)
}

fn batch_shape(i: usize) -> Vec<usize> {
    match i % 3 {
        0 => vec![2, 2],
        1 => vec![2, 3],
        _ => vec![4, 4],
    }
}

/// Partial-transpose spectrum of a source, optionally with a random batch.
pub fn cmd_pt_spectrum(
    opts: &Options,
    source: &SourceSpec,
    mask: &[usize],
    batch: usize,
) -> Result<Report> {
    let rho = source.load()?;
    let mask_set = SubsystemMask::new(mask.iter().copied());
    mask_set.validate(rho.dims().len())?;
    let report = pt_spectrum_report(&rho, &mask_set)?;
    let tol = opts.tol(ARITHMETIC_TOL);

    let mut r = opts.report("pt-spectrum");
    r.param("source", source.to_string());
    r.param("mask", mask.to_vec());
    r.param("batch", batch);
    r.result("min", report.min);
    r.result("max", report.max);
    r.result("eigenvalues", report.eigenvalues.clone());
    r.result("top_schmidt_second", report.top_schmidt_second);
    r.result(
        "top_is_product",
        report.top_schmidt_second.map(|s| s <= SCHMIDT_TOL),
    );
    r.check_at_most("bounds", (-0.5 - report.min).max(report.max - 1.0), tol);
    if let Some(s) = report.top_schmidt_second {
        r.check_at_most("product_top", s, SCHMIDT_TOL);
    }
    let mut table = Table::new(&["index", "eigenvalue"]);
    for (i, &e) in report.eigenvalues.iter().enumerate() {
        table.push(vec![i.to_string(), cell(e)]);
    }

    if batch > 0 {
        let mut worst_min = f64::INFINITY;
        let mut worst_max = f64::NEG_INFINITY;
        let mut worst_schmidt = 0.0f64;
        let mut unit_cases = 0usize;
        for i in 0..batch {
            let dims = batch_shape(i);
            let d: usize = dims.iter().product();
            let rank = 1 + i / 3 % d;
            let sigma = random_density(&dims, rank, opts.seed.wrapping_add(i as u64))?;
            let rep = pt_spectrum_report(&sigma, &SubsystemMask::new([1]))?;
            worst_min = worst_min.min(rep.min);
            worst_max = worst_max.max(rep.max);
            if let Some(s) = rep.top_schmidt_second {
                unit_cases += 1;
                worst_schmidt = worst_schmidt.max(s);
            }
        }
        r.result(
            "batch",
            json!({
                "count": batch,
                "min": worst_min,
                "max": worst_max,
                "unit_top_cases": unit_cases,
                "worst_top_schmidt_second": worst_schmidt,
            }),
        );
        r.check_at_most("batch_bounds", (-0.5 - worst_min).max(worst_max - 1.0), tol);
        r.check_at_most("batch_product_top", worst_schmidt, SCHMIDT_TOL);
    }
    r.table = Some(table);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options { seed: 7, tol: None }
    }

    #[test]
    fn grid_points() {
        let g: Grid = "0:1:0.01".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 101);
        assert_eq!(*p.last().unwrap(), 1.0);
        assert!("0:1".parse::<Grid>().is_err());
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
    }

    #[test]
    fn bowles_default() {
        let r = cmd_bowles(&opts(), &SourceSpec::Singlet, false).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let r = cmd_bowles(&opts(), &SourceSpec::MaximallyMixed(2), true).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn witness_errors_on_ppt() {
        let err = cmd_witness(&opts(), &"product:|00>".parse().unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotNptCertifiable { .. }));
        let r = cmd_witness(&opts(), &SourceSpec::Werner(0.5)).unwrap();
        assert!(r.passed());
        assert!((r.results["functional"].as_f64().unwrap() + 0.5 / 4.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_boundary() {
        let r = cmd_werner_sweep(&opts(), &Grid::default()).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.results["first_detected"].as_f64(), Some(0.34));
        assert_eq!(r.table.unwrap().rows.len(), 101);
    }

    #[test]
    fn selftest_commands() {
        let r = cmd_selftest(&opts(), &SourceSpec::Ghz(3), None, 0.3).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let traces = &r.results["branch_traces"];
        assert!((traces["000"].as_f64().unwrap() - 0.3).abs() < 1e-12);
        assert!((traces["111"].as_f64().unwrap() - 0.7).abs() < 1e-12);

        let r = cmd_selftest(&opts(), &SourceSpec::Werner(0.8), Some(2), 1.0).unwrap();
        assert!(r.passed());
        assert_eq!(r.results["branch_traces"].as_object().unwrap().len(), 1);
        assert!(cmd_selftest(&opts(), &SourceSpec::Werner(0.8), Some(3), 1.0).is_err());
    }

    #[test]
    fn pt_spectrum_commands() {
        let r = cmd_pt_spectrum(&opts(), &SourceSpec::PhiPlus, &[1], 30).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert!((r.results["min"].as_f64().unwrap() + 0.5).abs() < 1e-12);
        assert!(cmd_pt_spectrum(&opts(), &SourceSpec::PhiPlus, &[2], 0).is_err());
    }
}
