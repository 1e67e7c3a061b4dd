"""Experiment configuration: JSON schema, defaults and round-trip serialization."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Any

import jsonschema

from .errors import ConfigError, InvalidGeometryError
from .grid import DomainSpec
from .mass import MassOptions
from .model import PowerCouplingModel, Potential, cubic_preset
from .solver import SolverOptions

TASKS = ("solve", "solve_mass", "check_assumptions", "polarize_audit", "sweep_beta")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_res = {"type": "integer", "minimum": 4}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_DOMAIN = {
    "oneOf": [
        _obj({"kind": {"const": "interval"}, "length": _pos, "n": _res}, ["kind", "length", "n"]),
        _obj({"kind": {"const": "rectangle"}, "lx": _pos, "ly": _pos, "nx": _res, "ny": _res},
             ["kind", "lx", "ly", "nx", "ny"]),
        _obj({"kind": {"const": "disk"}, "radius": _pos, "nr": _res, "ntheta": _res},
             ["kind", "radius", "nr", "ntheta"]),
        _obj({"kind": {"const": "annulus"}, "r_in": _pos, "r_out": _pos, "nr": _res, "ntheta": _res},
             ["kind", "r_in", "r_out", "nr", "ntheta"]),
    ]
}

_num_list = {"type": "array", "items": _num, "minItems": 1}

_MODEL = {
    "oneOf": [
        _obj({"family": {"const": "power"}, "k": _posint, "p": _num, "lambda": _num_list, "q": _num_list,
              "beta": {"oneOf": [_num, {"type": "array", "items": _num_list}]}},
             ["family", "k", "p", "lambda", "q", "beta"]),
        _obj({"family": {"const": "cubic"}, "k": _posint, "beta": _num,
              "lambda": {"oneOf": [_num, _num_list]}},
             ["family", "beta"]),
    ]
}

_POTENTIAL = {
    "oneOf": [
        _obj({"kind": {"const": "constant"}, "value": _num}, ["kind"]),
        _obj({"kind": {"const": "radial_quadratic"}, "a": _num, "b": _num}, ["kind"]),
        _obj({"kind": {"const": "tabulated_radial"}, "r": _num_list, "v": _num_list}, ["kind", "r", "v"]),
    ]
}

SCHEMA = _obj(
    {
        "task": {"enum": list(TASKS)},
        "domain": _DOMAIN,
        "model": _MODEL,
        "potentials": {"type": "array", "items": _POTENTIAL},
        "diffusion": {"type": "array", "items": _pos},
        "alpha": {"type": ["number", "null"]},
        "solver": _obj({
            "start_count": _posint, "max_outer_iterations": _posint, "tol": _pos, "initial_step": _pos,
            "backtrack": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "armijo": _pos, "max_backtracks": _posint, "memory": {"type": "integer", "minimum": 0}, "precondition": {"type": "boolean"},
            "waive_assumptions": {"type": "boolean"},
        }),
        "mass": _obj({"tau": _pos, "tol": _pos, "max_iter": _posint, "start_count": _posint, "min_tau": _pos}),
        "polarize": _obj({"samples": _posint}),
        "sweep": _obj({"betas": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                       "workers": _posint}),
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string", "minLength": 1},
    },
    ["task", "domain", "model"],
)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    domain: DomainSpec
    model: dict
    potentials: tuple[Potential, ...]
    diffusion: tuple[float, ...]
    solver: SolverOptions
    mass: MassOptions
    seed: int = 0
    output: str = "out"
    betas: tuple[float, ...] = ()
    workers: int = 1
    polarize_samples: int = 8
    alpha: float | None = None

    @property
    def k(self) -> int:
        return int(self.model["k"])

    def build_model(self, beta: float | None = None) -> PowerCouplingModel:
        return model_from_dict(self.model, beta)

    def with_seed(self, seed: int) -> ExperimentConfig:
        return dataclasses.replace(self, seed=int(seed), solver=dataclasses.replace(self.solver, seed=int(seed)),
                                   mass=dataclasses.replace(self.mass, seed=int(seed)))

    def to_dict(self) -> dict[str, Any]:
        solver = self.solver.to_dict()
        solver.pop("seed")
        mass = dataclasses.asdict(self.mass)
        mass.pop("seed")
        d = {
            "task": self.task,
            "domain": self.domain.to_dict(),
            "model": self.model,
            "potentials": [p.to_dict() for p in self.potentials],
            "diffusion": list(self.diffusion),
            "alpha": self.alpha,
            "solver": solver,
            "mass": mass,
            "polarize": {"samples": self.polarize_samples},
            "seed": self.seed,
            "output": self.output,
        }
        if self.betas:
            d["sweep"] = {"betas": list(self.betas), "workers": self.workers}
        return d


def model_from_dict(d: dict, beta: float | None = None) -> PowerCouplingModel:
    """Power-family model from a resolved model block; ``beta`` overrides the scalar coupling."""
    if d["family"] == "cubic":
        return cubic_preset(d["beta"] if beta is None else beta, d["k"], d["lambda"])
    b = d["beta"] if beta is None else beta
    return PowerCouplingModel(d["p"], tuple(d["lambda"]), tuple(d["q"]), b)


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _schema_errors(data: Any) -> list[str]:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        # oneOf failures hide the useful message in the best-matching branch
        best = _best_branch_error(err)
        out.append(f"{_path(best)}: {best.message}")
    return out


def _best_branch_error(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    """For a oneOf failure, report from the branch whose ``kind``/``family`` tag matched."""
    if not err.context:
        return err
    branches: dict[int, list] = {}
    for e in err.context:
        branches.setdefault(e.schema_path[0], []).append(e)
    tagged = [errs for errs in branches.values() if not any(e.validator == "const" for e in errs)]
    if len(tagged) == 1:
        return _best_branch_error(jsonschema.exceptions.best_match(tagged[0]))
    return err


def _resolve_model(m: dict, errors: list[str]) -> dict:
    m = dict(m)
    if m["family"] == "cubic":
        k = m.get("k", 2)
        lam = m.get("lambda", 1.0)
        lam = [float(lam)] * k if not isinstance(lam, list) else [float(x) for x in lam]
        if len(lam) != k:
            errors.append(f"model.lambda: expected {k} entries, got {len(lam)}")
        return {"family": "cubic", "k": k, "beta": float(m["beta"]), "lambda": lam}
    k = m["k"]
    for key in ("lambda", "q"):
        if len(m[key]) != k:
            errors.append(f"model.{key}: expected {k} entries, got {len(m[key])}")
    beta = m["beta"]
    if isinstance(beta, list):
        if len(beta) != k or any(len(row) != k for row in beta):
            errors.append(f"model.beta: expected a {k}x{k} matrix")
        beta = [[float(x) for x in row] for row in beta]
    else:
        beta = float(beta)
    return {"family": "power", "k": k, "p": float(m["p"]), "lambda": [float(x) for x in m["lambda"]],
            "q": [float(x) for x in m["q"]], "beta": beta}


def _parameter_errors(model: dict) -> list[str]:
    try:
        pm = model_from_dict(model)
    except ValueError as exc:
        return [f"model: {exc}"]
    out = []
    for v in pm.parameter_violations():
        where = f"pair {tuple(v['pair'])}" if "pair" in v else (f"component {v['i']}" if "i" in v else "model")
        vals = ", ".join(f"{key}={val}" for key, val in v.items() if key not in ("rule", "pair", "i"))
        field = "model.p" if v["rule"].startswith("p ") else "model"
        out.append(f"{field}: parameter inequality {v['rule']} violated for {where}" + (f" ({vals})" if vals else ""))
    return out


def config_from_dict(data: Any) -> ExperimentConfig:
    errors = _schema_errors(data)
    if errors:
        raise ConfigError(errors)
    model = _resolve_model(data["model"], errors)
    if errors:
        raise ConfigError(errors)
    errors += _parameter_errors(model)
    k = model["k"]
    pots = data.get("potentials", [{"kind": "constant", "value": 0.0}] * k)
    diff = data.get("diffusion", [1.0] * k)
    if len(pots) != k:
        errors.append(f"potentials: expected {k} entries, got {len(pots)}")
    if len(diff) != k:
        errors.append(f"diffusion: expected {k} entries, got {len(diff)}")
    try:
        domain = DomainSpec.from_dict(data["domain"])
    except InvalidGeometryError as exc:
        errors.append(f"domain: {exc}")
        domain = None
    potentials = []
    for i, p in enumerate(pots):
        try:
            potentials.append(Potential.from_dict(p))
        except ValueError as exc:
            errors.append(f"potentials.{i}: {exc}")
    task = data["task"]
    sweep = data.get("sweep", {})
    if task == "sweep_beta" and "betas" not in sweep:
        errors.append("sweep.betas: required for task sweep_beta")
    if task in ("solve_mass", "sweep_beta", "polarize_audit") and k != 2:
        errors.append(f"model.k: task {task} needs two components, got {k}")
    if task in ("solve_mass", "sweep_beta") and domain is not None and not domain.is_polar:
        errors.append(f"domain.kind: task {task} needs a disk or annulus")
    if task in ("solve_mass", "sweep_beta") and model["family"] != "cubic":
        errors.append(f"model.family: task {task} needs the cubic family")
    if task == "solve_mass" and not model["beta"] > 0:
        errors.append("model.beta: the mass-constrained system needs beta > 0")
    seed = data.get("seed", 0)
    try:
        solver = SolverOptions(**{**data.get("solver", {}), "seed": seed})
        mass = MassOptions(**{**data.get("mass", {}), "seed": seed})
    except ValueError as exc:
        errors.append(f"solver: {exc}")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        task=task,
        domain=domain,
        model=model,
        potentials=tuple(potentials),
        diffusion=tuple(float(x) for x in diff),
        solver=solver,
        mass=mass,
        seed=seed,
        output=data.get("output", "out"),
        betas=tuple(float(b) for b in sweep.get("betas", ())),
        workers=sweep.get("workers", 1),
        polarize_samples=data.get("polarize", {}).get("samples", 8),
        alpha=None if data.get("alpha") is None else float(data["alpha"]),
    )


def parse_config(text: str) -> ExperimentConfig:
    """Validate JSON text and fill defaults; raises ConfigError listing every problem with its field path."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<root>: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return config_from_dict(data)


def serialize(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    canon = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
