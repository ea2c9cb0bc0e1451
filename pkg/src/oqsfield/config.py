"""Run configuration: YAML parsing, overrides and validation.

Errors point at the offending line of the YAML file whenever the failing
field can be located in the document.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .bath import VACUUM, BathSpec, DiscreteModes, OhmicExponential
from .core import SimulationConfig, SystemSpec, TimeGrid

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None,
                 field: Optional[str] = None):
        self.message = message
        self.path = path
        self.line = line
        self.field = field
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)

    def record(self) -> Dict[str, Any]:
        return {"error": "config", "message": self.message, "file": self.path,
                "line": self.line, "field": self.field}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ComplexMatrix(_Strict):
    re: List[List[float]]
    im: Optional[List[List[float]]] = None

    def array(self) -> np.ndarray:
        re = np.array(self.re, dtype=float)
        im = np.zeros_like(re) if self.im is None else np.array(self.im, dtype=float)
        if re.ndim != 2 or re.shape != im.shape:
            raise ValueError("re and im must be matrices of equal shape")
        return re + 1j * im


class SystemBlock(_Strict):
    energies: List[float]
    couplings: Optional[List[ComplexMatrix]] = None
    jump: Optional[ComplexMatrix] = None
    conjugate_pairs: List[int] = [1, 0]

    def spec(self) -> SystemSpec:
        if (self.couplings is None) == (self.jump is None):
            raise ValueError("give exactly one of 'couplings' or 'jump'")
        if self.jump is not None:
            return SystemSpec.from_jump(self.energies, self.jump.array())
        return SystemSpec(tuple(self.energies), tuple(c.array() for c in self.couplings),
                          tuple(self.conjugate_pairs))


Beta = Union[float, Literal["inf"]]


def _beta(value) -> float:
    return VACUUM if value == "inf" else float(value)


class BathBlock(_Strict):
    model: Literal["ohmic", "discrete"]
    eta: Optional[float] = None
    cutoff: Optional[float] = None
    modes: Optional[List[Tuple[float, float]]] = None
    smearing: float = 0.05
    beta: Beta = "inf"

    def spec(self) -> BathSpec:
        if self.model == "ohmic":
            if self.eta is None or self.cutoff is None:
                raise ValueError("ohmic bath needs 'eta' and 'cutoff'")
            model = OhmicExponential(self.eta, self.cutoff)
        else:
            if not self.modes:
                raise ValueError("discrete bath needs 'modes' as [lambda, Omega] pairs")
            model = DiscreteModes(tuple(self.modes), self.smearing)
        return BathSpec(model, _beta(self.beta))


class GridBlock(_Strict):
    start: float = 0.0
    stop: float = 10.0
    step: float = 0.01


class SimulationBlock(_Strict):
    time_grid: GridBlock = GridBlock()
    tol_herm: float = 1e-10
    tol_trace: float = 1e-10
    tol_pos: float = 1e-8
    energy_match_tol: float = 1e-9
    pv_exclusion: float = 1e-3
    omega_cutoff: Optional[float] = None
    history_depth: float = 50.0
    ode_tol: float = 1e-10
    mode: Literal["markov", "memory"] = "markov"
    rwa: bool = True
    kernel_step: Optional[float] = None
    initial_state: Optional[ComplexMatrix] = None
    positivity: Literal["warn", "fail"] = "warn"

    def settings(self) -> SimulationConfig:
        g = self.time_grid
        return SimulationConfig(
            time_grid=TimeGrid(g.start, g.stop, g.step), tol_herm=self.tol_herm,
            tol_trace=self.tol_trace, tol_pos=self.tol_pos,
            energy_match_tol=self.energy_match_tol, pv_exclusion=self.pv_exclusion,
            omega_cutoff=self.omega_cutoff, history_depth=self.history_depth,
            ode_tol=self.ode_tol)


class OutputBlock(_Strict):
    format: Literal["csv", "json"] = "csv"
    path: Optional[str] = None
    fields: Optional[List[str]] = None


class KernelScanBlock(_Strict):
    omega_start: float = 0.2
    omega_stop: float = 1.8
    n_points: int = Field(default=17, ge=1)
    eps: Optional[float] = None


class ResonanceBlock(_Strict):
    mode: Literal["full", "quasiparticle"] = "full"
    max_iter: int = Field(default=50, ge=1)
    root_tol: float = 1e-12


class WickBlock(_Strict):
    modes: List[Tuple[float, float]] = [(0.3, 1.0)]
    n_max: int = Field(default=40, ge=2)
    beta: Beta = 1.0
    max_n: int = 4
    strings_per_length: int = Field(default=5, ge=1)
    seed: int = 0

    @field_validator("max_n")
    @classmethod
    def _even(cls, v):
        if v < 2 or v % 2 or v > 8:
            raise ValueError("max_n must be an even integer between 2 and 8")
        return v


class QubitBlock(_Strict):
    omega0: float = 1.0
    g0: float = 0.1
    n0: float = 0.0
    delta: float = 0.0
    t_stop: Optional[float] = None
    n_points: int = Field(default=101, ge=2)


class RunConfig(_Strict):
    schema_version: int
    system: Optional[SystemBlock] = None
    bath: Optional[BathBlock] = None
    simulation: SimulationBlock = SimulationBlock()
    output: OutputBlock = OutputBlock()
    kernel_scan: KernelScanBlock = KernelScanBlock()
    resonances: ResonanceBlock = ResonanceBlock()
    wick: WickBlock = WickBlock()
    qubit: QubitBlock = QubitBlock()

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; this tool reads {SCHEMA_VERSION}")
        return v

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


# -- loading -----------------------------------------------------------------

def _node_line(root, loc) -> Optional[int]:
    """1-based line of the YAML node at ``loc`` (or its nearest existing parent)."""
    node = root
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == str(key)), None)
            if nxt is None:
                return line
            key_node = next(k for k, v in node.value if k.value == str(key))
            line = key_node.start_mark.line + 1
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def _set_path(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value


def parse_override(item: str) -> Tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override '{item}' has an empty key")
    try:
        return key, yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override '{item}': value is not valid YAML ({exc})")


def load_config(path: Union[str, Path, None], overrides: Optional[List[str]] = None,
                text: Optional[str] = None) -> RunConfig:
    """Read, override and validate a configuration.

    Either ``path`` or ``text`` supplies the YAML document; ``overrides``
    are ``dotted.key=value`` strings with YAML-typed values.
    """
    name = str(path) if path is not None else "<config>"
    if text is None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", name)
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", name, line)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", name, 1)
    overridden = set()
    for item in overrides or []:
        key, value = parse_override(item)
        _set_path(data, key, value)
        overridden.add(key)
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [k for k in err["loc"] if not isinstance(k, str) or not k.startswith("function")]
        dotted = ".".join(str(k) for k in loc)
        if any(dotted == k or dotted.startswith(k + ".") for k in overridden):
            raise ConfigError(f"{dotted}: {err['msg']} (from --set)", name, None, dotted)
        raise ConfigError(f"{dotted}: {err['msg']}", name, _node_line(root, loc), dotted)
    # domain-level checks that need the assembled objects
    for block, build in (("system", lambda: cfg.system and cfg.system.spec()),
                         ("bath", lambda: cfg.bath and cfg.bath.spec()),
                         ("simulation", lambda: cfg.simulation.settings())):
        try:
            build()
        except ValueError as exc:
            raise ConfigError(f"{block}: {exc}", name, _node_line(root, [block]), block)
    return cfg


def beta_value(value) -> float:
    return _beta(value)
