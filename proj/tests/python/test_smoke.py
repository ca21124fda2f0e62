# Copyright 2026 The lidarprobe Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math

import numpy as np
import pytest

import lidarprobe as lp


def test_version_and_threads():
    assert lp.__version__
    lp.set_thread_count(1)
    assert lp.thread_count() == 1
    lp.set_thread_count(0)


def test_exit_codes():
    assert lp.exit_code("degeneracy") == 3
    assert lp.exit_code("invalid-input") == 2


def test_nearest_neighbors_match_brute_force():
    rng = np.random.default_rng(3)
    ref = rng.uniform(-1, 1, size=(300, 3))
    queries = rng.uniform(-1, 1, size=(50, 3))
    idx, dist = lp.nearest_neighbors(ref, queries)
    d2 = ((queries[:, None, :] - ref[None, :, :]) ** 2).sum(axis=2)
    assert list(idx) == list(d2.argmin(axis=1))
    assert np.allclose(dist, np.sqrt(d2.min(axis=1)))


def test_surface_error_of_identical_clouds_is_zero():
    pts = np.random.default_rng(4).normal(size=(200, 3))
    report = lp.surface_error(pts, pts)
    assert report["e_rmse"] == 0.0
    assert report["coverage"] == 1.0


def test_projection_lies_in_tangent_plane():
    n = np.array([0.0, 0.6, 0.8])
    p_s = np.array([0.1, 0.2, 0.3])
    p_par = lp.project_marker(np.array([0.15, 0.25, 0.4]), p_s, n)
    assert abs(np.dot(p_par - p_s, n)) < 1e-12
    assert lp.tangential_error(p_par, p_s) > 0.0


def test_icc_shift_invariance():
    trials = [[1.0, 1.2, 0.9], [3.0, 3.1, 2.8], [2.0, 2.2, 2.1], [5.0, 4.7, 5.1], [0.5, 0.8, 0.6]]
    a = lp.icc(trials)
    b = lp.icc([[x + 10.0 for x in row] for row in trials])
    assert math.isclose(a["icc"], b["icc"], rel_tol=0, abs_tol=1e-10)


def test_invalid_input_raises():
    with pytest.raises(lp.LidarprobeError):
        lp.project_marker(np.zeros(3), np.zeros(3), np.array([0.0, 0.0, 2.0]))


def test_dbscan_two_blobs():
    rng = np.random.default_rng(5)
    a = rng.normal(scale=0.01, size=(50, 3))
    b = rng.normal(scale=0.01, size=(50, 3)) + 1.0
    labels = lp.dbscan_labels(np.vstack([a, b]), 0.05, 4)
    assert len(set(labels[:50])) == 1 and len(set(labels[50:])) == 1
    assert labels[0] != labels[50]


def test_zero_noise_calibration_trial():
    run = lp.calibration_trial(0.0, 1)
    assert run["converged"]
    assert run["overall_rms_mm"] < 1e-6


def test_simulate_and_calibrate_stage(tmp_path):
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps({"kind": "calibration", "seed": 2, "sensor": {"range_noise_sigma_m": 0.0015}}))
    lp.simulate(scenario, tmp_path / "ds")
    assert (tmp_path / "ds" / "truth.json").exists()
    rms = lp.calibrate(tmp_path / "ds", tmp_path / "cal" / "calibration.json")
    assert 1.0 < rms < 2.2
