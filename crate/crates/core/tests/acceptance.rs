//! Acceptance suite: each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use broadcast_core::bowles::{classical_bound_bruteforce, link_scores, QUANTUM_MAXIMUM};
use broadcast_core::kit::{
    ghz, random_density, random_product, random_pure, singlet, w_state, werner_state,
};
use broadcast_core::network::BroadcastModel;
use broadcast_core::selftest::{
    byproduct, corrected_channel, extract_branches, extraction_instrument, pt_spectrum_report,
    pure_refinement_check, reconstruct, schmidt_pt_spectrum, FlagString,
};
use broadcast_core::tensor::{hermitian_eigs, kron, partial_transpose, SubsystemMask};
use broadcast_core::witness::{npt_witness, separable_corpus, separable_minimum, werner_sweep};
use broadcast_core::{LabeledOperator, Result};

struct Outcome {
    passed: bool,
    detail: String,
}

fn criterion(
    number: usize,
    name: &str,
    limit: Option<Duration>,
    body: impl FnOnce() -> Result<Outcome>,
) -> bool {
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let verdict = if passed && in_time { "PASS" } else { "FAIL" };
    let budget = limit
        .map(|l| format!(" of {:.1} s", l.as_secs_f64()))
        .unwrap_or_default();
    println!(
        "criterion {number:>2} {name}: {verdict} ({detail}; {:.3} s{budget})",
        elapsed.as_secs_f64()
    );
    passed && in_time
}

fn secs(s: f64) -> Option<Duration> {
    Some(Duration::from_secs_f64(s))
}

fn bowles_maximum() -> Result<Outcome> {
    let sources = [
        singlet().projector()?,
        werner_state(0.0)?,
        werner_state(0.5)?,
        werner_state(1.0)?,
        LabeledOperator::identity(&[2, 2]).scale(0.25),
    ];
    let mut worst = 0.0f64;
    for rho in &sources {
        for s in link_scores(&BroadcastModel::honest(rho, 2)?.behavior()?)? {
            worst = worst.max((s - QUANTUM_MAXIMUM).abs());
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-9,
        detail: format!("max |B - 6 sqrt2| = {worst:.2e}"),
    })
}

fn classical_bound() -> Result<Outcome> {
    let bound = classical_bound_bruteforce();
    Ok(Outcome {
        passed: bound.value == 6.0,
        detail: format!("max over 512 strategies = {}", bound.value),
    })
}

/// Seeded random two-qubit densities whose partial transpose is not positive.
fn npt_corpus(count: usize) -> Result<Vec<LabeledOperator>> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let rho = random_density(&[2, 2], 1 + (seed % 4) as usize, 1000 + seed)?;
        seed += 1;
        if hermitian_eigs(&partial_transpose(&rho, &SubsystemMask::new([1]))?)?.min() < -1e-9 {
            out.push(rho);
        }
    }
    Ok(out)
}

fn honest_identity() -> Result<Outcome> {
    let mut quarter = 0.0f64;
    let mut sixteenth = 0.0f64;
    for rho in npt_corpus(20)? {
        let e = npt_witness(&rho)?;
        let global = common::broadcast_state(&common::matrix(&rho), 2);
        let value = common::functional(&global, e.projector_table());
        let trace = rho.expectation(e.witness())?.re;
        quarter = quarter.max((value - trace / 4.0).abs());
        sixteenth = sixteenth.max((value - trace / 16.0).abs());
    }
    Ok(Outcome {
        passed: quarter <= 1e-9,
        detail: format!(
            "20 NPT states, max |I - tr[W rho]/4| = {quarter:.3e}, max |I - tr[W rho]/16| = {sixteenth:.3e}"
        ),
    })
}

fn werner_threshold() -> Result<Outcome> {
    let grid: Vec<f64> = (0..=100).map(|i| f64::from(i) / 100.0).collect();
    let rows = werner_sweep(&grid)?;
    let mismatches = rows
        .iter()
        .filter(|r| r.detected != (r.visibility > 1.0 / 3.0))
        .count();
    let top = rows.last().and_then(|r| r.functional).unwrap_or(f64::NAN);
    let value_ok = (top + 0.125).abs() <= 1e-10;
    Ok(Outcome {
        passed: mismatches == 0 && value_ok,
        detail: format!(
            "detected <=> v > 1/3 with {mismatches} mismatches; I(v = 1) = {top:.17} vs -0.125 ({})",
            if value_ok { "ok" } else { "off" }
        ),
    })
}

fn transpose_ambiguity() -> Result<Outcome> {
    let cases = [
        (singlet().projector()?, 2),
        (werner_state(0.8)?, 2),
        (ghz(3)?.projector()?, 3),
    ];
    let mut worst = 0.0f64;
    for (rho, n) in &cases {
        let honest = BroadcastModel::honest(rho, *n)?;
        worst = worst.max(
            honest
                .behavior()?
                .max_abs_diff(&honest.transpose().behavior()?)?,
        );
    }
    Ok(Outcome {
        passed: worst <= 1e-10,
        detail: format!("max entry difference {worst:.2e}"),
    })
}

fn teleportation_extraction() -> Result<Outcome> {
    let party = broadcast_core::network::PartyDevices::honest();
    let instrument = extraction_instrument(&party)?;
    let channel = corrected_channel(&instrument)?;
    let flipped = corrected_channel(&extraction_instrument(&party.transposed())?)?;
    let zero = LabeledOperator::basis_ket(&[0], &[2])?.projector()?;
    let one = LabeledOperator::basis_ket(&[1], &[2])?.projector()?;
    let (mut branch_err, mut channel_err) = (0.0f64, 0.0f64);
    for i in 0..50u64 {
        let rho = random_density(&[2], 1 + (i % 2) as usize, 77 + i)?;
        for s in 0..4 {
            let sigma = byproduct(s)?;
            let want = kron(&[&sigma.matmul(&rho)?.matmul(&sigma)?, &zero])?.scale(0.25);
            branch_err = branch_err.max(instrument.apply_branch(s, &rho)?.max_abs_diff(&want));
        }
        channel_err = channel_err.max(channel.apply(&rho)?.max_abs_diff(&kron(&[&rho, &zero])?));
        let rt = rho.transpose();
        channel_err = channel_err.max(flipped.apply(&rt)?.max_abs_diff(&kron(&[&rt, &one])?));
    }
    Ok(Outcome {
        passed: branch_err <= 1e-10 && channel_err <= 1e-10,
        detail: format!("branch error {branch_err:.2e}, corrected channel error {channel_err:.2e}"),
    })
}

fn self_test_reconstruction() -> Result<Outcome> {
    let mut corpus = Vec::new();
    for seed in 0..5u64 {
        corpus.push(random_density(
            &[2, 2],
            1 + (seed % 4) as usize,
            500 + seed,
        )?);
    }
    for v in [0.0, 0.25, 1.0 / 3.0, 0.5, 0.8, 1.0] {
        corpus.push(werner_state(v)?);
    }
    corpus.push(ghz(3)?.projector()?);
    corpus.push(w_state(3)?.projector()?);
    for seed in 0..3u64 {
        corpus.push(random_pure(&[2, 2, 2], 900 + seed)?.projector()?);
    }
    let mixtures = |n: usize, p: f64| -> Vec<(f64, Vec<bool>)> {
        [(p, vec![false; n]), (1.0 - p, vec![true; n])]
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .collect()
    };
    let ps = [0.0, 0.3, 1.0];
    let mut residual = 0.0f64;
    for rho in &corpus {
        let n = rho.dims().len();
        for &p in &ps {
            let d = extract_branches(rho, &mixtures(n, p))?;
            residual = residual.max(reconstruct(&d)?.max_abs_diff(rho));
        }
    }
    let mut refinement_ok = true;
    let allowed: BTreeSet<FlagString> = [FlagString(vec![0; 3]), FlagString(vec![1; 3])].into();
    for psi in [ghz(3)?, w_state(3)?] {
        for &p in &ps {
            let d = extract_branches(&psi.projector()?, &mixtures(3, p))?;
            let report = pure_refinement_check(&d, &psi, 1e-9)?;
            let only_uniform = d.traces().keys().all(|k| allowed.contains(k));
            refinement_ok &= report.passed() && only_uniform && (report.p - p).abs() <= 1e-9;
        }
    }
    Ok(Outcome {
        passed: residual <= 1e-9 && refinement_ok,
        detail: format!(
            "{} sources x 3 mixtures, max residual {residual:.2e}; GHZ/W refinement {}",
            corpus.len(),
            if refinement_ok { "ok" } else { "failed" }
        ),
    })
}

fn pt_spectral_bounds() -> Result<Outcome> {
    let shapes = [vec![2, 2], vec![2, 3], vec![4, 4]];
    let mask = SubsystemMask::new([1]);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut unit_cases, mut worst_schmidt) = (0usize, 0.0f64);
    for i in 0..500usize {
        let dims = &shapes[i % 3];
        let d: usize = dims.iter().product();
        let seed = 3000 + i as u64;
        let rho = if i % 5 == 0 {
            random_product(dims, seed)?
        } else {
            random_density(dims, 1 + (i / 3) % d, seed)?
        };
        let report = pt_spectrum_report(&rho, &mask)?;
        lo = lo.min(report.min);
        hi = hi.max(report.max);
        if let Some(s) = report.top_schmidt_second {
            unit_cases += 1;
            worst_schmidt = worst_schmidt.max(s);
        }
    }
    let pure_shapes = [vec![2, 2], vec![2, 3], vec![3, 3], vec![2, 4]];
    let mut analytic = 0.0f64;
    for i in 0..20usize {
        let psi = random_pure(&pure_shapes[i % 4], 4000 + i as u64)?;
        let numeric = hermitian_eigs(&partial_transpose(&psi.projector()?, &mask)?)?.values;
        let predicted = schmidt_pt_spectrum(&psi, &mask)?;
        for (a, b) in numeric.iter().zip(&predicted) {
            analytic = analytic.max((a - b).abs());
        }
    }
    let bounds_ok = lo >= -0.5 - 1e-9 && hi <= 1.0 + 1e-9;
    Ok(Outcome {
        passed: bounds_ok && worst_schmidt <= 1e-6 && unit_cases > 0 && analytic <= 1e-8,
        detail: format!(
            "spectrum within [{lo:.4}, {hi:.4}]; {unit_cases} unit-top cases, worst second Schmidt {worst_schmidt:.1e}; analytic error {analytic:.1e}"
        ),
    })
}

fn witness_positivity() -> Result<Outcome> {
    let corpus = separable_corpus(800, 200, 42)?;
    let mut sources = vec![singlet().projector()?, werner_state(0.5)?];
    sources.extend(npt_corpus(5)?);
    let mut worst = f64::INFINITY;
    for rho in &sources {
        let e = npt_witness(rho)?;
        for m in separable_minimum(e.witness(), &corpus)? {
            worst = worst.min(m);
        }
    }
    Ok(Outcome {
        passed: worst >= -1e-9,
        detail: format!(
            "{} product states, {} witnesses, min tr[W' sigma] = {worst:.3e}",
            corpus.len(),
            sources.len()
        ),
    })
}

fn cli_determinism() -> Result<Outcome> {
    let bin = env!("CARGO_BIN_EXE_broadcast");
    let dir = tempfile::tempdir()?;
    let commands: [&[&str]; 9] = [
        &["bowles"],
        &["bowles", "--transposed", "--source", "maximally-mixed"],
        &["witness", "--source", "singlet"],
        &["witness", "--source", "werner:0.5"],
        &["werner-sweep"],
        &["selftest", "--source", "ghz:3", "--mix", "0.3"],
        &[
            "selftest",
            "--source",
            "werner:0.8",
            "--parties",
            "2",
            "--mix",
            "1.0",
        ],
        &["pt-spectrum", "--source", "random:2x2:5", "--batch", "60"],
        &["pt-spectrum", "--source", "product:|00>"],
    ];
    let mut differing = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for run in 0..2 {
            let csv = dir.path().join(format!("{i}-{run}.csv"));
            let out = Command::new(bin)
                .args(*args)
                .args(["--seed", "11", "--csv"])
                .arg(&csv)
                .output()?;
            runs.push((out.status.code(), out.stdout, std::fs::read(&csv)?));
        }
        if runs[0] != runs[1] || runs[0].1.is_empty() {
            differing.push(args.join(" "));
        }
    }
    Ok(Outcome {
        passed: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} commands byte-identical across two runs", commands.len())
        } else {
            format!("differing: {}", differing.join("; "))
        },
    })
}

fn main() {
    let results = [
        criterion(1, "Bowles honest maximum", secs(1.0), bowles_maximum),
        criterion(2, "classical bound", secs(0.1), classical_bound),
        criterion(3, "honest witness identity", secs(10.0), honest_identity),
        criterion(4, "Werner threshold", secs(5.0), werner_threshold),
        criterion(5, "transpose ambiguity", secs(5.0), transpose_ambiguity),
        criterion(
            6,
            "teleportation extraction",
            secs(2.0),
            teleportation_extraction,
        ),
        criterion(
            7,
            "self-test reconstruction",
            secs(10.0),
            self_test_reconstruction,
        ),
        criterion(
            8,
            "partial-transpose spectral bounds",
            secs(10.0),
            pt_spectral_bounds,
        ),
        criterion(
            9,
            "witness positivity on separable states",
            secs(5.0),
            witness_positivity,
        ),
        criterion(10, "CLI determinism", None, cli_determinism),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
