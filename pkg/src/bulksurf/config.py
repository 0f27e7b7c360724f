"""Sectioned ``key = value`` run configuration with full validation.

All errors are collected (with line numbers) before raising, so a single
``check`` reports everything wrong with a file.  ``K`` and ``L`` accept the
token ``inf``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from types import SimpleNamespace

from .ch_solver import SurfaceTransport
from .coupled import InitialKind, InitialSpec, Variant, VariantConfig
from .geometry import Grid, build_grid
from .model import PhysParams, validate_params
from .ns_solver import NsOptions
from .potentials import PotentialKind, PotentialSpec


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def _float(s: str) -> float:
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _finite(s: str) -> float:
    v = _float(s)
    if math.isinf(v):
        raise ValueError("must be finite")
    return v


def _coupling(s: str) -> float:
    if s.strip().lower() == "inf":
        return math.inf
    return _finite(s)


def _int(s: str) -> int:
    return int(s)


def _optional_float(s: str):
    return None if s.strip().lower() == "none" else _finite(s)


def _choice(values):
    def conv(s: str) -> str:
        if s not in values:
            raise ValueError(f"expected one of {', '.join(values)}")
        return s
    return conv


# section -> key -> (converter, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "grid": {"nx": (_int, 64), "ny": (_int, 64), "Lx": (_finite, 1.0), "Ly": (_finite, 1.0)},
    "physics": {
        "rho1": (_finite, 1.0), "rho2": (_finite, 1.0), "nu1": (_finite, 1.0), "nu2": (_finite, 1.0),
        "m_bulk": (_finite, 1.0), "m_surf": (_finite, 1.0), "eps": (_finite, 0.05),
        "delta": (_finite, 0.05), "alpha": (_finite, 1.0), "beta": (_finite, 1.0),
        "K": (_coupling, 1.0), "L": (_coupling, 1.0), "gamma_tau": (_finite, 1.0),
    },
    "potentials": {
        "F_kind": (_choice([k.value for k in PotentialKind]), "polynomial"),
        "G_kind": (_choice([k.value for k in PotentialKind]), "polynomial"),
        "theta": (_finite, 1.0), "theta_c": (_finite, 2.0), "sigma_reg": (_finite, 1e-2),
        "F_shift": (_finite, 0.0), "G_shift": (_finite, 0.0),
    },
    "time": {"dt": (_finite, 1e-4), "t_end": (_finite, 1e-2), "diag_every": (_int, 1)},
    "ic": {
        "kind": (_choice([k.value for k in InitialKind]), "droplet_on_wall"),
        "radius": (_finite, 0.25), "center_x": (_optional_float, None),
        "interface_y": (_optional_float, None), "mean": (_finite, 0.0),
        "psi_mean": (_optional_float, None), "amplitude": (_finite, 0.1),
        "modes": (_int, 4), "seed": (_int, 0),
    },
    "output": {"dir": (str, "out"), "snapshot_every": (_int, 0)},
    "variant": {"name": (_choice([v.value for v in Variant]), "full_bulk_surface"),
                "psi_frozen": (_finite, 1.0)},
    "solver": {
        "projection_tol": (_finite, 1e-9), "momentum_tol": (_finite, 1e-12),
        "max_iter": (_int, 20000),
        "surface_transport": (_choice([s.value for s in SurfaceTransport]), "conservative"),
    },
}

# PhysParams field -> config key
_PHYS_KEYS = {"rho1": "rho1", "rho2": "rho2", "nu1": "nu1", "nu2": "nu2",
              "mob_bulk": "m_bulk", "mob_surf": "m_surf", "eps": "eps", "delta": "delta",
              "alpha": "alpha", "beta": "beta", "K": "K", "L": "L", "gamma_tau": "gamma_tau"}


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    variant: VariantConfig
    ic: InitialSpec
    t_end: float
    diag_every: int = 1
    out_dir: str = "out"
    snapshot_every: int = 0
    values: dict = field(default_factory=dict, compare=False, repr=False)
    source: str = field(default="", compare=False, repr=False)

    @property
    def params(self) -> PhysParams:
        return self.variant.params

    def config_hash(self) -> str:
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()

    def to_text(self) -> str:
        return to_text(self.values)


def _format(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if v is None:
        return "none"
    return str(v)


def to_text(values: dict) -> str:
    """Canonical text of a fully populated value table (schema order)."""
    out = []
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]")
        for key in keys:
            out.append(f"{key} = {_format(values[sec][key])}")
        out.append("")
    return "\n".join(out)


def _read(text: str, errors: list[str]):
    values = {sec: {} for sec in SCHEMA}
    lines = {sec: {} for sec in SCHEMA}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in SCHEMA:
                errors.append(f"line {n}: unknown section [{name}]")
                section = "?"
            else:
                section = name
            continue
        if "=" not in line:
            errors.append(f"line {n}: syntax error, expected 'key = value'")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if section is None:
            errors.append(f"line {n}: key '{key}' outside of any section")
            continue
        if section == "?":
            continue
        if key not in SCHEMA[section]:
            errors.append(f"line {n}: unknown key '{key}' in [{section}]")
            continue
        if key in values[section]:
            errors.append(f"line {n}: duplicate key '{key}' in [{section}]")
            continue
        conv = SCHEMA[section][key][0]
        try:
            values[section][key] = conv(val)
        except ValueError as exc:
            errors.append(f"line {n}: [{section}] {key} = {val!r}: {exc}")
            continue
        lines[section][key] = n
    for sec, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            values[sec].setdefault(key, default)
    return values, lines


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ``ConfigError`` listing every problem found."""
    errors: list[str] = []
    values, lines = _read(text, errors)

    def where(sec, key):
        n = lines[sec].get(key)
        return f"line {n}" if n is not None else f"[{sec}] default"

    def err(sec, key, msg):
        errors.append(f"{where(sec, key)}: {msg}")

    g = values["grid"]
    for key in ("nx", "ny"):
        if g[key] < 8:
            err("grid", key, f"{key} must be >= 8, got {g[key]}")
    for key in ("Lx", "Ly"):
        if g[key] <= 0:
            err("grid", key, f"{key} must be positive, got {g[key]}")

    ph = values["physics"]
    ns = SimpleNamespace(**{f: ph[k] for f, k in _PHYS_KEYS.items()})
    for msg in validate_params(ns):
        name = msg.split()[0].split("=")[0]
        key = _PHYS_KEYS.get(name, name)
        err("physics", key if key in SCHEMA["physics"] else "K", msg.replace(name, key, 1))

    pots = values["potentials"]
    specs = {}
    for which in ("F", "G"):
        try:
            specs[which] = PotentialSpec(pots[f"{which}_kind"], pots["theta"], pots["theta_c"],
                                         pots["sigma_reg"], pots[f"{which}_shift"])
        except ValueError as exc:
            err("potentials", f"{which}_kind", f"{which}: {exc}")

    t = values["time"]
    if t["dt"] <= 0:
        err("time", "dt", f"dt must be positive, got {t['dt']}")
    if t["t_end"] < 0:
        err("time", "t_end", f"t_end must be nonnegative, got {t['t_end']}")
    if t["diag_every"] < 1:
        err("time", "diag_every", "diag_every must be >= 1")

    ic = values["ic"]
    if ic["kind"] == "droplet_on_wall" and g["Lx"] > 0 and g["Ly"] > 0:
        if not 0 < ic["radius"] < min(0.5 * g["Lx"], g["Ly"]):
            err("ic", "radius", f"droplet radius {ic['radius']} does not fit in the domain")
    if ic["kind"] == "stratified" and ic["interface_y"] is not None:
        if not 0 < ic["interface_y"] < g["Ly"]:
            err("ic", "interface_y", "interface_y must lie in (0, Ly)")
    if ic["amplitude"] < 0:
        err("ic", "amplitude", "amplitude must be nonnegative")
    if ic["modes"] < 1:
        err("ic", "modes", "modes must be >= 1")

    if values["output"]["snapshot_every"] < 0:
        err("output", "snapshot_every", "snapshot_every must be >= 0")
    if not values["output"]["dir"]:
        err("output", "dir", "dir must not be empty")

    v = values["variant"]
    if v["name"] == "neumann_agg":
        if abs(v["psi_frozen"]) != 1.0:
            err("variant", "psi_frozen", "psi_frozen must be +1 or -1")
        if not (math.isinf(ph["K"]) and math.isinf(ph["L"])):
            err("variant", "name", "neumann_agg requires K = inf and L = inf")

    s = values["solver"]
    for key in ("projection_tol", "momentum_tol"):
        if not 0 < s[key] < 1:
            err("solver", key, f"{key} must lie in (0, 1)")
    if s["max_iter"] < 1:
        err("solver", "max_iter", "max_iter must be >= 1")

    if errors:
        raise ConfigError(errors)

    grid = build_grid(g["nx"], g["ny"], g["Lx"], g["Ly"])
    params = PhysParams(**{f: ph[k] for f, k in _PHYS_KEYS.items()})
    variant = VariantConfig(
        v["name"], params, specs["F"], specs["G"], dt=t["dt"], psi_frozen=v["psi_frozen"],
        surface_transport=s["surface_transport"],
        ns=NsOptions(s["projection_tol"], s["momentum_tol"], s["max_iter"]))
    spec = InitialSpec(kind=ic["kind"], radius=ic["radius"], center_x=ic["center_x"],
                       interface_y=ic["interface_y"], mean=ic["mean"], psi_mean=ic["psi_mean"],
                       amplitude=ic["amplitude"], modes=ic["modes"], seed=ic["seed"])
    return RunConfig(grid, variant, spec, t["t_end"], t["diag_every"], values["output"]["dir"],
                     values["output"]["snapshot_every"], values, text)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
