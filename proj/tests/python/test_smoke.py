# Copyright 2026 The normlab Authors
# SPDX-License-Identifier: Apache-2.0

import json

import numpy as np
import pytest

import normlab as nl


def _x(shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape)


def test_batch_forward_matches_numpy():
    x = _x((6, 3, 2, 2))
    y, moving = nl.forward_train(x, nl.NormParams.identity(3), nl.NormScheme.batch(),
                                 nl.MovingMoments.init(3))
    mean = x.mean(axis=(0, 2, 3), keepdims=True)
    var = x.var(axis=(0, 2, 3), keepdims=True)
    np.testing.assert_allclose(y, (x - mean) / np.sqrt(var + 1e-5), rtol=0, atol=1e-12)
    np.testing.assert_allclose(moving.m_x, 0.01 * mean.ravel(), atol=1e-15)


def test_group_assignment_ghost_blocks():
    n_groups, ids = nl.group_assignment(nl.NormScheme.ghost(2), [4, 1, 1, 1])
    assert n_groups == 2
    assert ids == [0, 0, 1, 1]


def test_alpha_zero_is_moving_average_inference():
    x = _x((5, 4, 3, 3), seed=1)
    moving = nl.MovingMoments.from_mean_var([0.5, -1.0, 0.0, 2.0], [1.0, 0.25, 4.0, 0.5])
    y = nl.forward_infer(x, nl.NormParams.identity(4), nl.NormScheme.group(2), moving, alpha=0.0)
    mean = np.array([0.5, -1.0, 0.0, 2.0]).reshape(1, 4, 1, 1)
    var = np.array([1.0, 0.25, 4.0, 0.5]).reshape(1, 4, 1, 1)
    # group(2) averages the moving moments over the two channels of each group
    m = mean.reshape(2, 2).mean(axis=1).repeat(2).reshape(1, 4, 1, 1)
    s = (var + mean**2).reshape(2, 2).mean(axis=1).repeat(2).reshape(1, 4, 1, 1)
    np.testing.assert_allclose(y, (x - m) / np.sqrt(s - m**2 + 1e-5), atol=1e-12)


def test_gradients_match_finite_differences():
    x = _x((4, 4, 2, 2), seed=2)
    dy = _x((4, 4, 2, 2), seed=3)
    params = nl.NormParams([1.5, 0.5, -0.7, 1.0], [0.1, 0.0, -0.2, 0.3])
    for scheme in ("batch", "ghost:2", "group:2", "batchgroup:2:2"):
        err = nl.finite_diff_check(x, params, nl.NormScheme.parse(scheme), dy)
        assert err < 1e-6, scheme


def test_output_bound_and_tightness():
    assert nl.output_bound(2.0, 1.0, 5) == pytest.approx((-3.0, 5.0))
    assert nl.tightness_value(32, 1e6, 1e-5) == pytest.approx(-5.5678, abs=1e-3)


def test_errors_are_typed():
    with pytest.raises(nl.ConfigError):
        nl.forward_train(_x((4, 3, 1, 1)), nl.NormParams.identity(3), nl.NormScheme.group(2),
                         nl.MovingMoments.init(3))
    with pytest.raises(nl.DimensionError):
        nl.forward_train(_x((4, 3, 1, 1)), nl.NormParams.identity(3), nl.NormScheme.batch(),
                         nl.MovingMoments.init(2))
    with pytest.raises(nl.DomainError):
        nl.MovingMoments.from_mean_var([0.0], [-1.0])


def test_run_command_writes_csv(tmp_path):
    config = {
        "seed": 5,
        "data": {"n_classes": 4, "n_train_per_class": 16, "n_val_per_class": 8,
                 "n_test_per_class": 8, "height": 2, "width": 2},
        "model": {"widths": [8]},
        "train": {"batch_size": 8, "epochs": 2, "scheme": "batch"},
        "train_first": True,
        "sweep": {"alpha": [0.0, 0.5, 1.0]},
    }
    paths = nl.run_command("sweep-alpha", json.dumps(config), tmp_path)
    sweep = (tmp_path / "alpha_sweep.csv").read_text().splitlines()
    assert sweep[0] == "alpha,val_accuracy,val_xent,test_accuracy,test_xent"
    assert len(sweep) == 4
    assert any(str(p).endswith("alpha_sweep.csv") for p in paths)
