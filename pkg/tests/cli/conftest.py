# Copyright (C) 2021 posecast contributors
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
#
# SPDX-License-Identifier: Apache-2.0
# License-Filename: LICENSE

"""Module for providing test fixtures for the command line tests."""

import pytest

from posecast.cli import main

TINY_CONF = """
synth {
  num_persons = 4
  observed = 3
  future = 2
}
model {
  person_size = 8
  group_size = 8
  joint_size = 4
}
train {
  lr = 1e-3
  epochs = 1
  batch_size = 2
}
render {
  variant = "5-5-10"
  resolution = 32
  base_channels = 8
  max_channels = 16
}
render_loss {
  calibration_triples = 2
}
render_train {
  batch_size = 2
}
"""


@pytest.fixture()
def workdir(tmp_path):
    """A working directory holding a tiny configuration file."""
    (tmp_path / "tiny.conf").write_text(TINY_CONF)
    return tmp_path


@pytest.fixture()
def run(workdir):
    """Run ``posecast`` inside the working directory and return its exit code."""

    def _run(*args):
        return main(["--workdir", str(workdir), "--config", "tiny.conf", *args])

    return _run
