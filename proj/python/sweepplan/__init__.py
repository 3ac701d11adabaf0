# SPDX-License-Identifier: Apache-2.0
"""Python access to the sweepplan planner and fitters."""

import json

from . import _sweepplan
from ._sweepplan import SweepplanError, global_batch_seqs, model_scale, reference_constants

__all__ = [
    "SweepplanError",
    "analyze",
    "crossing_fixture",
    "enumerate_setups",
    "fit_epoch_quadratic",
    "fit_kstar",
    "fit_ratio_power_law",
    "global_batch_seqs",
    "model_scale",
    "plan",
    "predict_kstar",
    "reference_constants",
    "simulate",
]


def enumerate_setups(compute_factors=None, single_stage=False):
    text = _sweepplan.enumerate_setups(compute_factors, single_stage)
    return [json.loads(line) for line in text.splitlines() if line]


def plan(setup_id, devices=8, seed=0):
    return json.loads(_sweepplan.plan(setup_id, devices, seed))


def crossing_fixture():
    return json.loads(_sweepplan.crossing_fixture())


def simulate(setup_ids=None, params=None, pair="synthetic"):
    """Results CSV text for the given setup ids (default grid when None)."""
    return _sweepplan.simulate(setup_ids, json.dumps(params) if params else "", pair)


def analyze(results_csv, setup_ids=None, epsilon=0.0):
    return json.loads(_sweepplan.analyze(results_csv, setup_ids, epsilon))


def fit_epoch_quadratic(f_k, loss):
    return _sweepplan.fit_epoch_quadratic(list(f_k), list(loss))


def fit_ratio_power_law(points):
    return json.loads(_sweepplan.fit_ratio_power_law(list(points)))


def fit_kstar(curves, approach="mono-1stage"):
    return json.loads(_sweepplan.fit_kstar(list(curves), approach))


def predict_kstar(model, compute, target_tokens, round=False):
    text = model if isinstance(model, str) else json.dumps(model)
    return _sweepplan.predict_kstar(text, compute, target_tokens, round)
