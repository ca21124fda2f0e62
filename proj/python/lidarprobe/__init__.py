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

"""2D LiDAR calibration, chest surface reconstruction and probe pose initialization."""

from ._core import (
    LidarprobeError,
    __version__,
    calibrate,
    calibration_trial,
    dbscan_labels,
    exit_code,
    icc,
    match,
    nearest_neighbors,
    preprocess,
    project_marker,
    reconstruct,
    set_thread_count,
    simulate,
    surface_error,
    tangential_error,
    thread_count,
    voxel_downsample,
)

__all__ = [
    "LidarprobeError",
    "__version__",
    "calibrate",
    "calibration_trial",
    "dbscan_labels",
    "exit_code",
    "icc",
    "match",
    "nearest_neighbors",
    "preprocess",
    "project_marker",
    "reconstruct",
    "set_thread_count",
    "simulate",
    "surface_error",
    "tangential_error",
    "thread_count",
    "voxel_downsample",
]
