import json
import logging
import threading

import numpy as np
import pytest

from cphasegate import (ContractError, ConvergenceError, EmitterParams, ParameterError,
                        QuadratureSpec, ResultCache, SweepResult, SweepSpec, make_profile,
                        optimize, run_sweep)
from cphasegate.sweep import (SWEEP_QUAD, Quantity, best_L, content_hash, optimize_fidelity,
                              scan_L, with_quad)

SMALL = dict(sigma_range=(0.6, 3.0, 5), L_range=(0.0, 2.4, 7))


def test_spec_validation():
    with pytest.raises(ParameterError):
        SweepSpec(sigma_range=(0.5, 2.0, 1))
    with pytest.raises(ParameterError):
        SweepSpec(sigma_range=(0.0, 2.0, 5))
    with pytest.raises(ParameterError):
        SweepSpec(L_range=(2.0, 0.0, 5))
    with pytest.raises(ParameterError):
        SweepSpec(quantity="purity")
    with pytest.raises(ParameterError):
        SweepSpec(shape="triangle")
    with pytest.raises(ParameterError):
        SweepSpec(quantity="state_F_map")
    with pytest.raises(ContractError):
        SweepSpec(emitter=EmitterParams(gamma_loss=0.1))
    # overlaps are fine with loss
    SweepSpec(quantity="abs_T", emitter=EmitterParams(gamma_loss=0.1), **SMALL)


def test_spec_round_trip_and_key():
    spec = SweepSpec(Quantity.ABS_T, "sech", **SMALL)
    assert SweepSpec.from_dict(spec.to_dict()) == spec
    assert spec.key() == SweepSpec.from_dict(json.loads(json.dumps(spec.to_dict()))).key()
    assert with_quad(spec, nodes=129).key() != spec.key()
    assert SweepSpec(Quantity.ABS_O1, "sech", **SMALL).key() != spec.key()
    assert len(spec.key()) == 64


def test_content_hash_is_order_independent():
    assert content_hash({"a": 1, "b": [1, 2]}) == content_hash({"b": [1, 2], "a": 1})


def test_linear_limit_in_O1_sweep():
    spec = SweepSpec(Quantity.ABS_O1, sigma_range=(0.2, 3.0, 8), L_range=(0.0, 3.0, 25))
    res = run_sweep(spec)
    best_L_per_row = res.axes[1][np.argmax(np.abs(res.values), axis=1)]
    assert abs(best_L_per_row[0] - 2.0) <= 0.125
    # the optimum shortens as the pulse broadens
    assert best_L_per_row[-1] < best_L_per_row[0]


def test_optimum_is_matrix_max():
    res = run_sweep(SweepSpec(Quantity.ABS_T, **SMALL))
    i, j = np.unravel_index(np.argmax(np.abs(res.values)), res.values.shape)
    assert res.optimum == {"value": float(abs(res.values[i, j])),
                           "sigma": float(res.axes[0][i]), "L": float(res.axes[1][j])}
    assert res.converged.all() and res.axis_names == ("sigma", "L")


def test_gate_sweep_matches_pointwise_fidelity():
    from cphasegate import gate_fidelity
    from cphasegate.overlaps import gate_overlaps
    spec = SweepSpec(Quantity.GATE_F, **SMALL)
    res = run_sweep(spec)
    i, j = 2, 3
    ov = gate_overlaps(make_profile("gaussian", res.axes[0][i]), L=res.axes[1][j],
                       spec=SWEEP_QUAD)
    assert res.values[i, j].real == pytest.approx(gate_fidelity(ov).F, abs=1e-14)


def test_state_map_sweep():
    spec = SweepSpec(Quantity.STATE_F_MAP, point=(1.72, 0.8), map_points=21)
    res = run_sweep(spec)
    assert res.values.shape == (21, 21) and res.axis_names == ("a", "z")
    assert res.optimum["value"] == pytest.approx(np.abs(res.values).min())
    assert res.values[-1, -1].real == pytest.approx(1.0)


def test_determinism_and_parallel_equivalence():
    spec = SweepSpec(Quantity.GATE_F, shape="sech", **SMALL)
    a = run_sweep(spec)
    b = run_sweep(spec)
    c = run_sweep(spec, workers=2)
    assert a.identical_to(b) and a.identical_to(c)


def test_flagged_cells_fail_the_sweep():
    bad = QuadratureSpec(nodes=5, max_refinements=1, rel_tol=1e-15, abs_tol=0.0)
    with pytest.raises(ConvergenceError, match="did not converge"):
        run_sweep(SweepSpec(Quantity.ABS_T, quad=bad, **SMALL))


def test_cache_round_trip(tmp_path):
    cache = ResultCache(tmp_path)
    spec = SweepSpec(Quantity.ABS_O1, **SMALL)
    res = run_sweep(spec, cache=cache)
    assert cache.path(spec.key()).exists()
    back = cache.lookup_sweep(spec.key())
    assert back.identical_to(res)
    assert isinstance(back, SweepResult)
    assert cache.lookup("0" * 64) is None
    assert run_sweep(spec, cache=cache).identical_to(res)


def test_cache_hit_is_logged(tmp_path, caplog):
    cache = ResultCache(tmp_path)
    spec = SweepSpec(Quantity.ABS_O1, **SMALL)
    run_sweep(spec, cache=cache)
    with caplog.at_level(logging.INFO, logger="cphasegate.sweep"):
        run_sweep(spec, cache=cache)
    assert "cache hit" in caplog.text


def test_corrupt_entry_discarded(tmp_path, caplog):
    cache = ResultCache(tmp_path)
    spec = SweepSpec(Quantity.ABS_O1, **SMALL)
    run_sweep(spec, cache=cache)
    path = cache.path(spec.key())
    path.write_text(path.read_text()[:100])
    with caplog.at_level(logging.WARNING):
        assert cache.lookup(spec.key()) is None
    assert "corrupt" in caplog.text and not path.exists()


def test_engine_version_mismatch_is_a_miss(tmp_path):
    cache = ResultCache(tmp_path)
    cache.store("k" * 64, {"x": 1})
    path = cache.path("k" * 64)
    blob = json.loads(path.read_text())
    blob["engine_version"] = "0.0.0"
    path.write_text(json.dumps(blob))
    assert cache.lookup("k" * 64) is None


def test_cache_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CPHASEGATE_CACHE_DIR", str(tmp_path / "env"))
    assert ResultCache().root == tmp_path / "env"


def test_concurrent_writers_leave_a_valid_entry(tmp_path):
    cache = ResultCache(tmp_path)
    payloads = [{"writer": i, "data": list(range(2000))} for i in range(8)]
    threads = [threading.Thread(target=cache.store, args=("c" * 64, p)) for p in payloads]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    got = cache.lookup("c" * 64)
    assert got in payloads
    assert not list(tmp_path.glob(".tmp-*"))


def test_optimize_beats_coarse_grid_and_caches(tmp_path):
    cache = ResultCache(tmp_path)
    spec = SweepSpec(Quantity.GATE_F, **SMALL)
    res = optimize(spec, min_step=1e-2, cache=cache)
    assert res.value >= res.coarse.optimum["value"]
    assert 0.6 <= res.sigma <= 3.0 and 0.0 <= res.L <= 2.4
    assert res.argmin is not None and res.overlaps is not None
    again = optimize(spec, min_step=1e-2, cache=cache)
    assert again.to_dict() == res.to_dict()


def test_optimize_refuses_state_map():
    with pytest.raises(ParameterError):
        optimize(SweepSpec(Quantity.STATE_F_MAP, point=(1.0, 1.0)))


def test_optimize_fidelity_refuses_loss():
    with pytest.raises(ContractError):
        optimize_fidelity(emitter=EmitterParams(gamma_loss=0.05))


def test_scan_and_best_L():
    p = make_profile("gaussian", 0.1)
    Ls = np.linspace(1.0, 3.0, 9)
    vals, ok = scan_L(p, Ls)
    assert ok.all() and np.argmax(np.abs(vals)) == 4
    L, v = best_L(p, (1.0, 3.0, 9))
    assert 1.8 <= L <= 2.0 and v > 0.999
