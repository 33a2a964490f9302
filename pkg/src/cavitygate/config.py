"""JSON run configuration.

Frequencies are given as ``value / 2 pi`` in MHz and times in ns; both are
converted to rad/s and seconds when :class:`RunConfig` builds
:class:`~cavitygate.hamiltonian.PhysicalParams`.  Every key is optional and
missing keys take the circuit-QED default values.  Unknown keys are errors.

Lifetimes (``*_inv_ns``) may be ``null`` to switch a channel off.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .hamiltonian import TWO_PI, PhysicalParams
from .lindblad import IntegratorOptions

MHZ = 1e6
NS = 1e-9


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


DEFAULTS: dict[str, Any] = {
    "n": 3,
    "cavity_count": None,
    "photon_cutoff": 2,
    "g_over_2pi_mhz": 10.0,
    "omega_over_2pi_mhz": 15.0,
    "c": 1.0,
    "dt_ns": 0.0,
    "anharmonicity_over_2pi_mhz": 600.0,
    "cavity_freqs_over_2pi_mhz": None,
    "crosstalk_ratio": 0.1,
    "g_tilde_ratio": float(np.sqrt(2.0)),
    "mu_tilde_ratio": float(np.sqrt(2.0)),
    "omega_tilde_ratio": float(1 / np.sqrt(2.0)),
    "gamma01_inv_ns": 20000.0,
    "gamma12_inv_ns": 10000.0,
    "gamma02_inv_ns": 25000.0,
    "gamma1phi_inv_ns": 15000.0,
    "gamma2phi_inv_ns": 15000.0,
    "kappa_inv_ns": 10000.0,
    "tau_adjust_ns": 1.0,
    "tau_move_ns": 1000.0,
    "integrator": {
        "method": "split",
        "max_step_ns": None,
        "max_phase": 2 * np.pi / 20,
        "rtol": 1e-8,
        "atol": 1e-10,
        "clock": "global",
    },
    "sweep": {
        "dt_ns": [float(x) for x in range(-5, 6)],
        "c": [round(0.95 + 0.01 * i, 10) for i in range(11)],
    },
    "output": {"dir": ".", "format": "csv"},
}

_INT_KEYS = {"n", "photon_cutoff", "cavity_count"}
_NULLABLE = {"cavity_count", "cavity_freqs_over_2pi_mhz"} | {k for k in DEFAULTS if k.endswith("_inv_ns")}
_SIGNED = {"dt_ns"}
_POSITIVE = {"g_over_2pi_mhz", "omega_over_2pi_mhz", "c"}


def _merge(base: dict, override: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, Mapping):
                raise ConfigError(f"{where}: expected an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _number(val, where: str, *, allow_none=False, integer=False, signed=False, positive=False):
    if val is None:
        if allow_none:
            return None
        raise ConfigError(f"{where}: value required")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {val!r}")
    if not np.isfinite(val):
        raise ConfigError(f"{where}: must be finite")
    if integer and int(val) != val:
        raise ConfigError(f"{where}: expected an integer")
    if positive and val <= 0:
        raise ConfigError(f"{where}: must be > 0, got {val}")
    if not signed and val < 0:
        raise ConfigError(f"{where}: must be >= 0, got {val}")
    return int(val) if integer else float(val)


def _scalar_or_list(val, where: str, length: int, positive=False) -> list[float]:
    if isinstance(val, list):
        if len(val) != length:
            raise ConfigError(f"{where}: expected {length} values, got {len(val)}")
        return [_number(v, f"{where}[{i}]", positive=positive) for i, v in enumerate(val)]
    return [_number(val, where, positive=positive)] * length


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration (plain JSON-compatible dict in ``data``)."""

    data: dict

    def __getitem__(self, key: str):
        return self.data[key]

    @property
    def n(self) -> int:
        return self.data["n"]

    @property
    def cavity_count(self) -> int:
        k = self.data["cavity_count"]
        return self.n if k is None else k

    @property
    def photon_cutoff(self) -> int:
        return self.data["photon_cutoff"]

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def with_overrides(self, **overrides) -> "RunConfig":
        return parse_config(_merge(self.data, overrides))

    def params(self, n: int | None = None, cavity_count: int | None = None) -> PhysicalParams:
        """Physical parameters in SI angular units; ``c`` is applied, ``dt`` is not."""
        d = self.data
        n = self.n if n is None else n
        k = (n if d["cavity_count"] is None else d["cavity_count"]) if cavity_count is None else cavity_count
        if k not in (1, n):
            raise ConfigError(f"cavity_count: must be 1 or n={n}, got {k}")
        mhz = TWO_PI * MHZ
        g = _scalar_or_list(d["g_over_2pi_mhz"], "g_over_2pi_mhz", k, positive=True)
        om = _scalar_or_list(d["omega_over_2pi_mhz"], "omega_over_2pi_mhz", n, positive=True)
        anh = d["anharmonicity_over_2pi_mhz"] * mhz
        freqs = d["cavity_freqs_over_2pi_mhz"]
        if freqs is None:
            freqs = [5000.0 + 1000.0 * i for i in range(k)]
        freqs = _scalar_or_list(freqs, "cavity_freqs_over_2pi_mhz", k)
        g = [x * mhz for x in g]
        home = (lambda l: l) if k == n else (lambda l: 1)
        mu = [g[home(l) - 1] for l in range(1, n + 1)]

        def rate(key: str, length: int) -> tuple[float, ...]:
            inv = d[key]
            return (0.0 if inv is None else 1.0 / (inv * NS),) * length

        xt = {
            (l, m): d["crosstalk_ratio"] * g[l - 1]
            for l, m in itertools.combinations(range(1, k + 1), 2)
        }
        params = PhysicalParams(
            omega=tuple(x * mhz for x in om),
            g=tuple(g),
            mu=tuple(mu),
            omega_tilde=tuple(d["omega_tilde_ratio"] * x * mhz for x in om),
            g_tilde=tuple(d["g_tilde_ratio"] * x for x in g),
            mu_tilde=tuple(d["mu_tilde_ratio"] * x for x in mu),
            anharm_pulse=(anh,) * n,
            anharm_qutrit=(anh,) * n,
            anharm_ancilla=(anh,) * k,
            cavity_freqs=tuple(f * mhz for f in freqs),
            crosstalk=xt,
            gamma01=rate("gamma01_inv_ns", n + 1),
            gamma12=rate("gamma12_inv_ns", n + 1),
            gamma02=rate("gamma02_inv_ns", n + 1),
            gamma1phi=rate("gamma1phi_inv_ns", n + 1),
            gamma2phi=rate("gamma2phi_inv_ns", n + 1),
            kappa=rate("kappa_inv_ns", k),
            tau_adjust=d["tau_adjust_ns"] * NS,
            tau_move=d["tau_move_ns"] * NS,
        )
        return params.with_coupling_ratio(d["c"])

    def integrator(self) -> IntegratorOptions:
        i = self.data["integrator"]
        step = i["max_step_ns"]
        return IntegratorOptions(
            method=i["method"],
            max_step=None if step is None else step * NS,
            max_phase=i["max_phase"],
            rtol=i["rtol"],
            atol=i["atol"],
            clock=i["clock"],
        )

    @property
    def dt(self) -> float:
        return self.data["dt_ns"] * NS

    @property
    def dt_grid(self) -> list[float]:
        return [x * NS for x in self.data["sweep"]["dt_ns"]]

    @property
    def c_grid(self) -> list[float]:
        return list(self.data["sweep"]["c"])


def _validate(d: dict) -> dict:
    for key in DEFAULTS:
        if isinstance(DEFAULTS[key], dict):
            continue
        val = d[key]
        if key in ("g_over_2pi_mhz", "omega_over_2pi_mhz", "cavity_freqs_over_2pi_mhz") and isinstance(val, list):
            for i, v in enumerate(val):
                _number(v, f"{key}[{i}]", positive=key != "cavity_freqs_over_2pi_mhz")
            continue
        d[key] = _number(
            val, key,
            allow_none=key in _NULLABLE,
            integer=key in _INT_KEYS,
            signed=key in _SIGNED,
            positive=key in _POSITIVE,
        )
    if d["n"] < 2:
        raise ConfigError(f"n: must be >= 2, got {d['n']}")
    if d["photon_cutoff"] < 1:
        raise ConfigError(f"photon_cutoff: must be >= 1, got {d['photon_cutoff']}")
    if d["cavity_count"] is not None and d["cavity_count"] not in (1, d["n"]):
        raise ConfigError(f"cavity_count: must be 1 or n={d['n']}, got {d['cavity_count']}")
    for key in d:
        if key.endswith("_inv_ns") and d[key] == 0:
            raise ConfigError(f"{key}: lifetime must be > 0 (use null to disable the channel)")

    integ = d["integrator"]
    if integ["method"] not in ("split", "rk4", "adaptive"):
        raise ConfigError(f"integrator.method: unknown method {integ['method']!r}")
    if integ["clock"] not in ("global", "segment"):
        raise ConfigError(f"integrator.clock: must be 'global' or 'segment', got {integ['clock']!r}")
    integ["max_step_ns"] = _number(integ["max_step_ns"], "integrator.max_step_ns", allow_none=True, positive=True)
    for key in ("max_phase", "rtol", "atol"):
        integ[key] = _number(integ[key], f"integrator.{key}", positive=True)

    sweep = d["sweep"]
    for key in ("dt_ns", "c"):
        if not isinstance(sweep[key], list):
            raise ConfigError(f"sweep.{key}: expected a list")
        sweep[key] = [
            _number(v, f"sweep.{key}[{i}]", signed=key == "dt_ns", positive=key == "c")
            for i, v in enumerate(sweep[key])
        ]
    out = d["output"]
    if out["format"] not in ("csv", "json", "both"):
        raise ConfigError(f"output.format: must be csv, json or both, got {out['format']!r}")
    if not isinstance(out["dir"], str):
        raise ConfigError("output.dir: expected a string")
    return d


def parse_config(source: str | Path | Mapping | None = None, overrides: Mapping | None = None) -> RunConfig:
    """Resolve a config from a file path, a mapping, or nothing (all defaults)."""
    if source is None:
        raw: Mapping = {}
    elif isinstance(source, Mapping):
        raw = source
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a JSON object")
    data = _merge(DEFAULTS, raw)
    if overrides:
        data = _merge(data, overrides)
    cfg = RunConfig(_validate(data))
    cfg.params()  # surface cross-field problems now
    return cfg


def parse_assignment(text: str) -> dict:
    """``key=value`` or ``a.b=value`` into a nested override; values parse as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    out: dict = {}
    cur = out
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = val
    return out
