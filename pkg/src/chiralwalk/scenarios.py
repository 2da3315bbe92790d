"""Scenario and sweep files: JSON-shaped model descriptions for the CLI.

Complex scalars are either plain numbers or [re, im] pairs; matrices are
nested lists of [re, im] pairs.  Unknown keys are rejected so that typos
fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ScenarioError
from .operators import BandedAnisotropicOperator, CoefficientFunction
from .walks import SplitStepParams, build_generator_walk, build_walk, build_weighted_shift_walk

MODELS = ("split_step", "weighted_shift", "generator", "custom_banded")


def _reject_unknown(doc, allowed, where):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in {where}")


def _as_scalar(value, where):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ScenarioError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def _as_matrix(value, where):
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] != 2:
        raise ScenarioError(f"{where}: expected an n x n matrix of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def parse_profile(doc, where):
    """Scalar site profile: step between limits or explicit table."""
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: expected a profile object")
    kind = doc.get("profile")
    if kind == "step":
        _reject_unknown(doc, {"profile", "left", "right", "split"}, where)
        left = _as_scalar(doc["left"], where)
        right = _as_scalar(doc["right"], where)
        return CoefficientFunction.step(
            np.array([[left]]), np.array([[right]]), split=int(doc.get("split", 0))
        )
    if kind == "table":
        _reject_unknown(doc, {"profile", "left", "right", "table"}, where)
        left = _as_scalar(doc["left"], where)
        right = _as_scalar(doc["right"], where)
        table = {}
        for entry in doc.get("table", []):
            _reject_unknown(entry, {"x", "value"}, f"{where}.table")
            table[int(entry["x"])] = np.array([[_as_scalar(entry["value"], where)]])
        return CoefficientFunction.from_table(np.array([[left]]), np.array([[right]]), table)
    raise ScenarioError(f"{where}: profile must be 'step' or 'table'")


@dataclass
class Tolerances:
    rank_tol: float = 1e-8
    grid_n: int = 4096
    margin: float = 1e-6

    def __post_init__(self):
        if self.rank_tol <= 0 or self.grid_n <= 0 or self.margin <= 0:
            raise ScenarioError("tolerances must be positive")

    @classmethod
    def from_doc(cls, doc, overrides=None):
        doc = dict(doc or {})
        _reject_unknown(doc, {"rank_tol", "grid_n", "margin"}, "tolerances")
        merged = {**doc, **{k: v for k, v in (overrides or {}).items() if v is not None}}
        return cls(
            rank_tol=float(merged.get("rank_tol", 1e-8)),
            grid_n=int(merged.get("grid_n", 4096)),
            margin=float(merged.get("margin", 1e-6)),
        )

    def to_dict(self):
        return {"rank_tol": self.rank_tol, "grid_n": self.grid_n, "margin": self.margin}


@dataclass
class Scenario:
    model: str
    params: dict
    tolerances: Tolerances = field(default_factory=Tolerances)
    truncation_L: int | None = None
    seed: int | None = None

    @classmethod
    def from_doc(cls, doc, tolerance_overrides=None):
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
        _reject_unknown(doc, {"model", "params", "tolerances", "truncation_L", "seed"}, "scenario")
        model = doc.get("model")
        if model not in MODELS:
            raise ScenarioError(f"model must be one of {MODELS}, got {model!r}")
        return cls(
            model=model,
            params=doc.get("params", {}),
            tolerances=Tolerances.from_doc(doc.get("tolerances"), tolerance_overrides),
            truncation_L=None if doc.get("truncation_L") is None else int(doc["truncation_L"]),
            seed=None if doc.get("seed") is None else int(doc["seed"]),
        )

    @classmethod
    def load(cls, path, tolerance_overrides=None):
        try:
            with open(path) as handle:
                doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        except OSError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
        return cls.from_doc(doc, tolerance_overrides)

    def build(self):
        """Instantiate the model object this scenario describes."""
        p = self.params
        if self.model == "split_step":
            _reject_unknown(p, {"a", "b", "c", "d_coin", "shift_exponent"}, "params")
            params = SplitStepParams(
                a=parse_profile(p["a"], "params.a"),
                b=parse_profile(p["b"], "params.b"),
                c=float(p["c"]),
                d_coin=_as_scalar(p["d_coin"], "params.d_coin"),
                shift_exponent=int(p.get("shift_exponent", 1)),
            )
            return build_walk(params)
        if self.model == "weighted_shift":
            _reject_unknown(p, {"m", "n", "coin"}, "params")
            return build_weighted_shift_walk(
                int(p["m"]), int(p["n"]), _as_matrix(p["coin"], "params.coin")
            )
        if self.model == "generator":
            _reject_unknown(p, {"hamiltonian", "gamma0"}, "params")
            h = _as_matrix(p["hamiltonian"], "params.hamiltonian")
            g0 = _as_matrix(p["gamma0"], "params.gamma0")
            return build_generator_walk(h, g0), g0
        if self.model == "custom_banded":
            _reject_unknown(p, {"operator"}, "params")
            return BandedAnisotropicOperator.from_json_dict(p["operator"])
        raise ScenarioError(f"unsupported model {self.model!r}")

    def is_lattice(self):
        return self.model in ("split_step", "weighted_shift", "custom_banded")


def _resolve_path(doc, path):
    keys = path.split(".")
    target = doc
    for key in keys[:-1]:
        if not isinstance(target, dict) or key not in target:
            raise ScenarioError(f"sweep axis path {path!r} not found in the scenario template")
        target = target[key]
    if not isinstance(target, dict):
        raise ScenarioError(f"sweep axis path {path!r} not found in the scenario template")
    return target, keys[-1]


@dataclass
class SweepSpec:
    template: dict
    axes: list                      # [(path, [values...]), ...]
    output: str | None = None

    @classmethod
    def load(cls, path, tolerance_overrides=None):
        try:
            with open(path) as handle:
                doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        except OSError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ScenarioError("sweep must be a JSON object")
        _reject_unknown(doc, {"scenario", "axes", "output"}, "sweep")
        template = doc.get("scenario")
        if not isinstance(template, dict):
            raise ScenarioError("sweep needs a 'scenario' template object")
        axes_doc = doc.get("axes")
        if not axes_doc:
            raise ScenarioError("sweep needs a non-empty 'axes' list")
        axes = []
        for axis in axes_doc:
            _reject_unknown(axis, {"path", "values"}, "axes entry")
            values = axis.get("values")
            if not values:
                raise ScenarioError(f"axis {axis.get('path')!r} has no values")
            axes.append((str(axis["path"]), list(values)))
        spec = cls(template=template, axes=axes, output=doc.get("output"))
        spec._overrides = tolerance_overrides
        # validate that every grid point yields a well-formed scenario
        for point in spec.grid_points():
            spec.scenario_at(point)
        return spec

    def grid_points(self):
        """Index tuples in lexicographic order of the axes."""
        shape = [len(values) for _, values in self.axes]
        point = [0] * len(shape)
        while True:
            yield tuple(point)
            for axis in reversed(range(len(shape))):
                point[axis] += 1
                if point[axis] < shape[axis]:
                    break
                point[axis] = 0
            else:
                return

    def scenario_at(self, point):
        doc = copy.deepcopy(self.template)
        for (path, values), idx in zip(self.axes, point):
            target, key = _resolve_path(doc, path)
            target[key] = values[idx]
        return Scenario.from_doc(doc, getattr(self, "_overrides", None))

    def axis_values(self, point):
        return [values[idx] for (_, values), idx in zip(self.axes, point)]
