# Copyright 2026 The jdmpc Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Jacobi distributed MPC with a terminal point constraint."""

import json

from . import _core
from ._core import InfeasibleError, max_volume_inner_box, solve_qp

__all__ = [
    "InfeasibleError",
    "Problem",
    "max_volume_inner_box",
    "oscillator_problem",
    "plant_problem",
    "run_experiment",
    "solve_qp",
]


class Problem:
    """A control problem with centralized and distributed solvers attached."""

    def __init__(self, core):
        self._core = core

    num_subsystems = property(lambda self: self._core.num_subsystems)
    state_dim = property(lambda self: self._core.state_dim)
    input_dim = property(lambda self: self._core.input_dim)
    horizon = property(lambda self: self._core.horizon)
    x0 = property(lambda self: self._core.x0)
    steps = property(lambda self: self._core.steps)

    def configure(self, p_max=20, epsilon=1e-6, r_opt=1):
        self._core.configure(p_max, epsilon, r_opt)
        return self

    def centralized_step(self, x):
        return self._core.centralized_step(x)

    def dmpc_step(self, x, warm, algorithm="local"):
        return self._core.dmpc_step(x, warm, algorithm)

    def initial_feasible(self, x=None, strategy="bootstrap"):
        return json.loads(self._core.initial_feasible_json(self.x0 if x is None else x, strategy))

    def run(self, controller="dmpc-local", init="bootstrap", steps=None, oracle=False):
        """Closed-loop run; returns the trace as a dict."""
        return json.loads(self._core.run_json(controller, init, -1 if steps is None else steps, oracle))

    def to_dict(self):
        return json.loads(self._core.to_json())


def oscillator_problem(**params):
    """The oscillator chain benchmark; keyword arguments override its parameters."""
    return Problem(_core.Problem.from_oscillators(json.dumps(params)))


def plant_problem(plant):
    """A problem from a plant description (dict, JSON text or file path)."""
    if isinstance(plant, dict):
        text = json.dumps(plant)
    elif plant.lstrip().startswith("{"):
        text = plant
    else:
        with open(plant, encoding="utf-8") as f:
            text = f.read()
    return Problem(_core.Problem.from_plant_json(text))


def run_experiment(algorithm="local", jobs=1, **params):
    """Run the benchmark variant matrix and return its summary."""
    return json.loads(_core.experiment_json(json.dumps(params), algorithm, jobs))
