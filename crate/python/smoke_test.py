"""Smoke test for the broadcast_bell extension module.

Build and install first:
    pip install maturin
    maturin develop -m crates/python/Cargo.toml
"""

import json
import math

import numpy as np

import broadcast_bell as bb


def main() -> None:
    singlet = bb.source("singlet")
    assert singlet.dims == [2, 2]
    rho = np.array(singlet.to_list())
    assert np.allclose(rho, rho.conj().T)
    assert abs(singlet.trace() - 1) < 1e-12

    model = bb.BroadcastModel.honest(singlet, 2)
    behavior = model.behavior()
    assert behavior.device_count == 4
    assert behavior.normalization_error() < 1e-12
    assert behavior.no_signaling_error() < 1e-12
    for score in behavior.bowles_scores():
        assert abs(score - bb.QUANTUM_MAXIMUM) < 1e-9
    assert bb.classical_bound() == bb.LOCAL_BOUND == 6.0
    assert behavior.max_abs_diff(model.transpose().behavior()) < 1e-10

    witness = bb.npt_witness(singlet)
    values = bb.honest_witness_value(singlet, witness)
    assert abs(values["trace"] + 0.5) < 1e-12
    assert abs(values["functional"] - values["predicted"]) < 1e-12
    assert abs(witness.functional(behavior) - values["functional"]) < 1e-12
    assert abs(witness.pauli_coefficients()["XX"] - 0.25) < 1e-12

    ppt = bb.werner_state(0.2)
    try:
        bb.npt_witness(ppt)
    except ValueError as err:
        assert "NPT" in str(err)
    else:
        raise AssertionError("PPT source accepted")

    ghz = bb.source("ghz:3")
    branches = bb.extract_branches(ghz, [(0.3, [False] * 3), (0.7, [True] * 3)])
    traces = {k: b.trace().real for k, b in branches.items() if b.trace().real > 1e-9}
    assert set(traces) == {"000", "111"}
    assert math.isclose(traces["000"], 0.3, abs_tol=1e-12)
    assert bb.reconstruct(branches).max_abs_diff(ghz) < 1e-9

    spectrum = bb.pt_spectrum(bb.source("phi+"), [1])
    assert abs(spectrum["min"] + 0.5) < 1e-12 and abs(spectrum["max"] - 0.5) < 1e-12

    report = json.loads(bb.report_werner_sweep())
    assert report["results"]["first_detected"] == 0.34
    assert all(c["passed"] for c in report["checks"])
    assert bb.report_bowles(seed=3) == bb.report_bowles(seed=3)

    print("broadcast_bell smoke test passed")


if __name__ == "__main__":
    main()
