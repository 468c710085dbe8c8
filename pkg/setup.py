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

"""Project setup file."""

from codecs import open
from os import path

from setuptools import find_packages, setup

here = path.abspath(path.dirname(__file__))

# Get the core dependencies and installs
with open(path.join(here, "requirements.txt"), encoding="utf-8") as f:
    all_reqs = f.read().split("\n")

install_requires = [x.strip() for x in all_reqs if x.strip() and "git+" not in x]
dependency_links = [
    x.strip().replace("git+", "") for x in all_reqs if x.startswith("git+")
]

# Get dev dependencies
with open(path.join(here, "requirements_dev.txt"), encoding="utf-8") as f:
    dev_reqs = f.read().strip().split("\n")

# Extra dependencies

plot = ["matplotlib"]
vgg = ["torchvision"]

extras_require = {"dev": dev_reqs, "plot": plot, "vgg": vgg}

packages = find_packages(exclude=["docs", "tests*", "examples*"])

version = {}
with open("posecast/__version__.py") as f:
    exec(f.read(), version)

with open(path.join(here, "README.md"), encoding="utf-8") as f:
    long_description = f.read()

setup(
    packages=packages,
    version=version["__version__"],
    include_package_data=True,
    package_data={
        "posecast": ["config/*.json", "schemas/*.json", "datasets/*.conf"],
    },
    install_requires=install_requires,
    dependency_links=dependency_links,
    extras_require=extras_require,
    entry_points={"console_scripts": ["posecast=posecast.cli:main"]},
    long_description=long_description,
    long_description_content_type="text/markdown",
)
