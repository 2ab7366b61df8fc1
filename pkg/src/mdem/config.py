"""TOML run configurations.

A config has fixed top-level tables (``run``, ``domain``, ``material``,
``loads``, ``transform``, ``weights``, ``sampling``, ``network``,
``schedule``, ``fem``) and an optional ``profile`` table whose entries
(``desk``, ``paper``) are overlays with the same structure. Everything is
validated before any computation; unknown keys are errors that name the
offending field.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .expressions import ExpressionError, parse
from .geometry import CircleHole, DomainError, DomainSpec, PolygonHole, SegmentSpec
from .mechanics import MaterialParams
from .network import OutputTransform
from .solvers import METHODS, LossWeights, ProblemDefinition, Schedule

ALL_METHODS = METHODS + ("fem",)
PROFILES = ("desk", "paper")


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "run": {"method": str, "seed": int, "out": str, "name": str},
    "domain": {"rect": list, "holes": list, "segments": list},
    "material": {"E": float, "nu": float, "lambda": float, "mu": float},
    "loads": {"body_force": list},
    "transform": {"mode": str, "u_shift": list, "u_scale": list, "p_shift": list, "p_scale": list},
    "weights": {"r": float, "t": float, "u": float, "p": float},
    "sampling": {"nx": int, "ny": int, "n_boundary": int, "rule": str},
    "network": {"hidden": list, "activation": str},
    "schedule": {"adam_steps": int, "adam_lr": float, "lbfgs_steps": int, "lbfgs_lr": float,
                 "lbfgs_history": int, "tol_change": float, "patience": int},
    "fem": {"load_steps": int, "tol_r": float, "max_iter": int},
}
_SEGMENT_KEYS = {"label": str, "edge": str, "kind": str, "start": float, "end": float,
                 "traction": list, "displacement": list}
_HOLE_KEYS = {"type": str, "center": list, "radius": float, "vertices": list}


@dataclass(frozen=True)
class RunConfig:
    method: str
    problem: ProblemDefinition
    nx: int
    ny: int
    n_boundary: int | None
    rule: str
    widths: tuple
    activation: str
    seed: int
    schedule: Schedule
    fem_load_steps: int = 1
    fem_tol_r: float = 1e-9
    fem_max_iter: int = 25
    out: str | None = None
    name: str = "run"
    profile: str | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _typed(value, kind, where):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}")
    return value


def _check_table(table, schema, where):
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    for k in table:
        if k not in schema:
            raise ConfigError(f"{where}.{k}: unknown key")
    return {k: _typed(v, schema[k], f"{where}.{k}") for k, v in table.items()}


def _exprs(value, n, where):
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(f"{where}: expected a list of {n} expressions")
    out = []
    for k, e in enumerate(value):
        if isinstance(e, bool) or not isinstance(e, (str, int, float)):
            raise ConfigError(f"{where}[{k}]: expected an expression string, got {e!r}")
        text = str(e) if isinstance(e, str) else repr(float(e))
        if text.strip().lower() == "free":
            out.append("free")
            continue
        try:
            parse(text)
        except ExpressionError as exc:
            raise ConfigError(f"{where}[{k}]: {exc}") from None
        out.append(text)
    return tuple(out)


def _floats(value, n, where):
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers")
    return tuple(_typed(v, float, f"{where}[{k}]") for k, v in enumerate(value))


def default_profile(raw: dict, profile: str | None = None) -> str | None:
    profiles = raw.get("profile", {})
    if profile is None and isinstance(profiles, dict) and "desk" in profiles:
        return "desk"
    return profile


def resolve(raw: dict, profile: str | None = None) -> dict:
    """Apply a profile overlay; with profiles present and none chosen, use ``desk``."""
    raw = dict(raw)
    profiles = raw.pop("profile", {})
    if not isinstance(profiles, dict):
        raise ConfigError("profile: expected a table of profiles")
    for name in profiles:
        if name not in PROFILES:
            raise ConfigError(f"profile.{name}: unknown profile (expected one of {PROFILES})")
    if profile is None and profiles:
        profile = "desk" if "desk" in profiles else None
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"--profile: unknown profile {profile!r}")
        if profile not in profiles:
            raise ConfigError(f"profile.{profile}: not defined in this config")
        raw = _merge(raw, profiles[profile])
    return raw


def build(raw: dict, profile: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Validate a parsed config and build the run definition."""
    profile = default_profile(raw, profile)
    data = resolve(raw, profile)
    for k in data:
        if k not in _SCHEMA:
            raise ConfigError(f"{k}: unknown section")
    for sec, over in (overrides or {}).items():
        for k, v in over.items():
            if v is not None:
                data.setdefault(sec, {})[k] = v
    t = {sec: _check_table(data.get(sec, {}), _SCHEMA[sec], sec) for sec in _SCHEMA}

    run = t["run"]
    method = run.get("method", "mdem")
    if method not in ALL_METHODS:
        raise ConfigError(f"run.method: must be one of {ALL_METHODS}, got {method!r}")
    seed = run.get("seed", 0)

    mat_t = t["material"]
    try:
        if "lambda" in mat_t or "mu" in mat_t:
            if "E" in mat_t or "nu" in mat_t:
                raise ConfigError("material: give either E/nu or lambda/mu, not both")
            if "lambda" not in mat_t or "mu" not in mat_t:
                raise ConfigError("material: lambda and mu must both be given")
            lam, mu = mat_t["lambda"], mat_t["mu"]
            if mu <= 0:
                raise ConfigError(f"material.mu: must be > 0, got {mu}")
            if lam < 0:
                raise ConfigError(f"material.lambda: must be >= 0, got {lam}")
            material = MaterialParams(lam, mu)
        else:
            E, nu = mat_t.get("E", 1000.0), mat_t.get("nu", 0.3)
            if E <= 0:
                raise ConfigError(f"material.E: must be > 0, got {E}")
            if not -1.0 < nu < 0.5:
                raise ConfigError(f"material.nu: must lie in (-1, 0.5), got {nu}")
            material = MaterialParams.from_engineering(E, nu)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"material: {exc}") from None

    dom = t["domain"]
    rect = _floats(dom.get("rect", [0.0, 0.0, 1.0, 1.0]), 4, "domain.rect")
    holes = []
    for k, h in enumerate(dom.get("holes", [])):
        where = f"domain.holes[{k}]"
        h = _check_table(h, _HOLE_KEYS, where)
        kind = h.get("type", "circle")
        if kind == "circle":
            if "center" not in h or "radius" not in h:
                raise ConfigError(f"{where}: circle needs center and radius")
            if h["radius"] <= 0:
                raise ConfigError(f"{where}.radius: must be > 0")
            holes.append(CircleHole(_floats(h["center"], 2, f"{where}.center"), h["radius"]))
        elif kind == "polygon":
            verts = h.get("vertices")
            if not isinstance(verts, list) or len(verts) < 3:
                raise ConfigError(f"{where}.vertices: need at least 3 points")
            holes.append(PolygonHole(tuple(_floats(v, 2, f"{where}.vertices[{j}]") for j, v in enumerate(verts))))
        else:
            raise ConfigError(f"{where}.type: must be circle or polygon, got {kind!r}")
    segs = []
    for k, s in enumerate(dom.get("segments", [])):
        where = f"domain.segments[{k}]"
        s = _check_table(s, _SEGMENT_KEYS, where)
        for req in ("label", "edge"):
            if req not in s:
                raise ConfigError(f"{where}.{req}: required")
        kw = {"label": s["label"], "edge": s["edge"], "kind": s.get("kind", "free"),
              "start": s.get("start"), "end": s.get("end")}
        if "traction" in s:
            tr = _exprs(s["traction"], 2, f"{where}.traction")
            if "free" in tr:
                raise ConfigError(f"{where}.traction: 'free' is only valid for displacements")
            kw["traction"] = tr
        if "displacement" in s:
            kw["displacement"] = _exprs(s["displacement"], 2, f"{where}.displacement")
        try:
            segs.append(SegmentSpec(**kw))
        except DomainError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    try:
        domain = DomainSpec(rect, tuple(holes), tuple(segs))
    except DomainError as exc:
        raise ConfigError(f"domain: {exc}") from None

    tr_t = t["transform"]
    try:
        transform = OutputTransform(
            mode=tr_t.get("mode", "a-priori"),
            u_shift=_exprs(tr_t.get("u_shift", ["0", "0"]), 2, "transform.u_shift"),
            u_scale=_exprs(tr_t.get("u_scale", ["1", "1"]), 2, "transform.u_scale"),
            p_shift=_exprs(tr_t.get("p_shift", ["0"] * 4), 4, "transform.p_shift"),
            p_scale=_exprs(tr_t.get("p_scale", ["1"] * 4), 4, "transform.p_scale"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"transform: {exc}") from None
    w = t["weights"]
    for k, v in w.items():
        if v < 0:
            raise ConfigError(f"weights.{k}: must be >= 0, got {v}")
    weights = LossWeights(**w)
    body = _exprs(t["loads"].get("body_force", ["0", "0"]), 2, "loads.body_force")
    try:
        problem = ProblemDefinition(domain, material, transform, body, weights)
    except ValueError as exc:
        raise ConfigError(f"transform: {exc}") from None

    smp = t["sampling"]
    nx, ny = smp.get("nx", 50), smp.get("ny", 50)
    if nx < 2 or ny < 2:
        raise ConfigError(f"sampling.nx/ny: must be >= 2, got {nx} x {ny}")
    n_boundary = smp.get("n_boundary")
    if n_boundary is not None and n_boundary < 2:
        raise ConfigError("sampling.n_boundary: must be >= 2")
    rule = smp.get("rule", "trapezoid")
    if rule not in ("trapezoid", "simpson"):
        raise ConfigError(f"sampling.rule: must be trapezoid or simpson, got {rule!r}")

    net = t["network"]
    hidden = net.get("hidden", [30, 30, 30, 30])
    if not hidden or any(isinstance(h, bool) or not isinstance(h, int) or h < 1 for h in hidden):
        raise ConfigError(f"network.hidden: expected a list of positive integers, got {hidden!r}")
    activation = net.get("activation", "tanh")
    if activation not in ("tanh", "softplus"):
        raise ConfigError(f"network.activation: must be tanh or softplus, got {activation!r}")
    widths = (2, *hidden, 6 if method == "mdem" else 2)

    try:
        schedule = Schedule(seed=seed, **t["schedule"])
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from None
    fem = t["fem"]
    if fem.get("load_steps", 1) < 1:
        raise ConfigError("fem.load_steps: must be >= 1")
    if fem.get("tol_r", 1e-9) <= 0:
        raise ConfigError("fem.tol_r: must be > 0")
    return RunConfig(method, problem, nx, ny, n_boundary, rule, widths, activation, seed, schedule,
                     fem.get("load_steps", 1), fem.get("tol_r", 1e-9), fem.get("max_iter", 25),
                     run.get("out"), run.get("name", "run"), profile, data)


def load_config(path, profile: str | None = None, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return build(raw, profile, overrides)


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``uniaxial``, ``localized``, ``beam``)."""
    from importlib import resources

    p = resources.files("mdem") / "configs" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return Path(str(p))
