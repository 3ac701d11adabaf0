# SPDX-License-Identifier: Apache-2.0
import math

import pytest

import sweepplan as sp


def test_reference_constants():
    c0, dt0, m0 = sp.reference_constants()
    assert c0 == 1e18
    assert math.isclose(dt0, 5.8316 * c0**0.4757, rel_tol=1e-12)
    assert math.isclose(m0 * dt0, c0, rel_tol=1e-12)


def test_enumeration_counts():
    single = sp.enumerate_setups([0], single_stage=True)
    assert len(single) == 134
    assert len(sp.enumerate_setups()) == 5250


def test_shapes_and_batches():
    assert sp.model_scale(0) == 469647360
    assert sp.global_batch_seqs(1e18, 0) == 64
    assert sp.global_batch_seqs(6.25e16, 0) == 24


def test_plan():
    p = sp.plan("fC0_fD-3_fr2_fM0_fk1_r1=1/8_r2=1/2")
    stages = p["plan"]["stages"]
    assert [s["ratio_exact"] for s in stages] == ["1/8", "1/2"]
    assert len(p["schedule"]["epoch_seeds"]) == 2


def test_pipeline_finds_crossing():
    ids = [s["id"] for s in sp.enumerate_setups([0])]
    csv = sp.simulate(ids, sp.crossing_fixture())
    report = sp.analyze(csv, ids)
    (threshold,) = report["pairs"][0]["thresholds"]
    assert threshold["crossing"]
    assert threshold["D_T_high"] <= threshold["D_star"]


def test_fitters():
    fit = sp.fit_epoch_quadratic(range(6), [(k - 2) ** 2 + 1 for k in range(6)])
    assert abs(fit["f_k_star"] - 2) < 1e-9

    pts = [(1e8 * g, 1e10, r, (2 + g) * r**-0.101) for g in (1, 2) for r in (1, 0.5, 0.25)]
    assert abs(sp.fit_ratio_power_law(pts)["parameters"]["beta"] + 0.101) < 1e-12

    c0 = 1e18
    curves = []
    for c in (c0 / 16, c0 / 4):
        d = math.log2(c / c0)
        curves += [(c, f / 2, max(0.0, -2 / 3 * (f / 2 - 0.5 * d))) for f in range(-16, 3)]
    model = sp.fit_kstar(curves)
    assert abs(model["parameters"]["a"] - 0.5) <= 0.02
    dt0 = sp.reference_constants()[1]
    assert math.isclose(sp.predict_kstar(model, c0, dt0 / 8), 4.0, rel_tol=1e-6)


def test_errors_surface_as_exceptions():
    with pytest.raises(sp.SweepplanError, match="unidentifiable"):
        sp.fit_kstar([(1e18, -1.0, 1.0), (1e18, 0.0, 0.0)])
    with pytest.raises(ValueError):
        sp.plan("not-an-id")
