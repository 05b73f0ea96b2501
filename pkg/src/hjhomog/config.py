"""Run configuration: INI files with sections, arrays as comma lists.

Every validation error names the offending field as ``section.key``.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .controls import MediumPair, check_assumptions, format_medium, load_medium_file
from .errors import ConfigError, HJError
from .geometry import ToothProfile
from .instances import FAR_FIELDS, INSTANCES

DEFAULT_CONFIG = Path(__file__).with_name("data") / "default.ini"


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one run.

    Attributes
    ----------
    pair : MediumPair
        Medium pair with the far-field cost attached (``None`` if disabled).
    medium_source : str
        Instance name or resolved medium-file path, kept for the manifest.
    profile : ToothProfile
    cell_eta : float
        Tooth size used by the cell problems (finger period, strip cell).
    eps_list, eta_list : tuple
        Scales of the convergence sweeps.
    p2_samples : tuple
        Tangential momenta of the limiter curves.
    table_p1, table_p2 : tuple
        Momentum axes of the Hamiltonian tables.
    """

    pair: MediumPair
    medium_source: str
    far_field: str
    profile: ToothProfile
    cell_eta: float = 1.0
    eps_list: tuple = (0.4, 0.2, 0.1)
    eta_list: tuple = (0.4, 0.2, 0.1)
    p2_samples: tuple = (-1.0, 0.0, 1.0)
    table_p1: tuple = tuple(np.linspace(-3.0, 3.0, 73))
    table_p2: tuple = (-1.0, 0.0, 1.0)
    finger_rhos: tuple = (2.0, 3.0, 4.0, 6.0)
    line_rhos: tuple = (4.0, 8.0, 16.0)
    discount_schedule: tuple = (0.02, 0.01, 0.005)
    hm_schedule: tuple = (2e-3, 1e-3, 5e-4)
    discount: float = 1.0
    limiter_tol: float = 5e-3
    window: tuple = (-6.0, 6.0)
    h: float = 1 / 80
    cells_per_period: int = 8
    finger_h1: float = 1 / 16
    finger_n2: int = 32
    line_h: float = 1 / 32
    eps_nodes: int = 16
    hm_nodes: int = 200
    corrector_finger_rho: float = 12.0
    corrector_eps: float = 0.2
    corrector_eps_rho: float = 32.0
    out_dir: Path = Path("out")
    source: Optional[str] = None
    raw: dict = field(default_factory=dict)

    def with_overrides(self, out_dir=None, tol=None):
        cfg = self
        if out_dir is not None:
            cfg = replace(cfg, out_dir=Path(out_dir))
        if tol is not None:
            cfg = replace(cfg, limiter_tol=_positive("solver.limiter_tol", tol))
        return cfg

    def snapshot(self):
        """JSON-ready description of every setting."""
        out = {}
        for key, val in asdict(self).items():
            if key in ("pair", "profile", "raw"):
                continue
            out[key] = str(val) if isinstance(val, Path) else (list(val) if isinstance(val, tuple) else val)
        out["medium"] = format_medium(self.pair)
        out["profile"] = self.profile.describe()
        out["raw"] = self.raw
        return out


# parsing helpers -------------------------------------------------------------

def _float(name, text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {text!r}") from None


def _int(name, text):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected an integer, got {text!r}") from None


def _list(name, text):
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise ConfigError(f"{name}: list must not be empty")
    return tuple(_float(name, t) for t in items)


def _positive(name, value):
    if not value > 0:
        raise ConfigError(f"{name}: must be > 0, got {value}")
    return value


def _increasing(name, values):
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name}: entries must be strictly increasing")
    return values


def _decreasing(name, values):
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name}: entries must be strictly decreasing")
    return values


class _Reader:
    """Typed access to a ConfigParser that records which keys were read."""

    def __init__(self, parser):
        self.parser = parser

    def get(self, section, key, default=None):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        return default

    def number(self, section, key, default):
        text = self.get(section, key)
        return default if text is None else _float(f"{section}.{key}", text)

    def integer(self, section, key, default):
        text = self.get(section, key)
        return default if text is None else _int(f"{section}.{key}", text)

    def array(self, section, key, default):
        text = self.get(section, key)
        return default if text is None else _list(f"{section}.{key}", text)


def _axis(name, values):
    """``lo, hi, n`` triple to a uniform axis; any other length is an explicit list."""
    if len(values) == 3 and float(values[2]).is_integer() and values[2] >= 2 and values[1] > values[0]:
        return tuple(float(x) for x in np.linspace(values[0], values[1], int(values[2])))
    return _increasing(name, values)


def _medium(reader, base_dir):
    instance = reader.get("medium", "instance")
    path = reader.get("medium", "file")
    if (instance is None) == (path is None):
        raise ConfigError("medium: give exactly one of medium.instance or medium.file")
    ff_name = (reader.get("medium", "far_field", "none") or "none").strip().lower()
    if ff_name not in FAR_FIELDS:
        raise ConfigError(f"medium.far_field: unknown value {ff_name!r}; choose from {sorted(FAR_FIELDS)}")
    far = FAR_FIELDS[ff_name]()
    if instance is not None:
        key = instance.strip().lower()
        if key not in INSTANCES:
            raise ConfigError(f"medium.instance: unknown instance {instance!r}; choose from {sorted(INSTANCES)}")
        pair, source = INSTANCES[key](far), key
    else:
        full = Path(path)
        if not full.is_absolute():
            full = base_dir / full
        if not full.is_file():
            raise ConfigError(f"medium.file: file not found: {full}")
        pair, source = load_medium_file(full, far), str(full)
    try:
        check_assumptions(pair)
    except HJError as exc:
        raise ConfigError(f"medium: {exc}") from None
    return pair, source, ff_name


def _profile(reader):
    a = reader.number("profile", "a", 0.25)
    b = reader.number("profile", "b", 0.75)
    if not 0 < a < 1:
        raise ConfigError(f"profile.a: must lie in (0, 1), got {a}")
    if not a < b < 1:
        raise ConfigError(f"profile.b: must satisfy profile.a < b < 1, got a={a}, b={b}")
    samples = reader.get("profile", "samples")
    try:
        if samples is not None:
            return ToothProfile.from_samples(a, b, _list("profile.samples", samples))
        return ToothProfile.sine(a, b, reader.number("profile", "h", 0.25))
    except HJError as exc:
        raise ConfigError(f"profile: {exc}") from None


def parse_config(text, base_dir=".", source=None):
    """Build a :class:`RunConfig` from INI text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    rd = _Reader(parser)
    base_dir = Path(base_dir)
    pair, medium_source, ff_name = _medium(rd, base_dir)
    d = RunConfig.__dataclass_fields__

    def default(name):
        return d[name].default

    cfg = dict(
        pair=pair,
        medium_source=medium_source,
        far_field=ff_name,
        profile=_profile(rd),
        cell_eta=_positive("scales.cell_eta", rd.number("scales", "cell_eta", default("cell_eta"))),
        eps_list=rd.array("scales", "eps", default("eps_list")),
        eta_list=rd.array("scales", "eta", default("eta_list")),
        p2_samples=_increasing("momenta.p2", rd.array("momenta", "p2", default("p2_samples"))),
        table_p1=_axis("momenta.table_p1", rd.array("momenta", "table_p1", (-3.0, 3.0, 73.0))),
        table_p2=_increasing("momenta.table_p2", rd.array("momenta", "table_p2", default("table_p2"))),
        finger_rhos=_increasing("schedules.finger_rho", rd.array("schedules", "finger_rho", default("finger_rhos"))),
        line_rhos=_increasing("schedules.line_rho", rd.array("schedules", "line_rho", default("line_rhos"))),
        discount_schedule=_decreasing("schedules.discount",
                                      rd.array("schedules", "discount", default("discount_schedule"))),
        hm_schedule=_decreasing("schedules.hm_discount", rd.array("schedules", "hm_discount", default("hm_schedule"))),
        discount=_positive("solver.discount", rd.number("solver", "discount", default("discount"))),
        limiter_tol=_positive("solver.limiter_tol", rd.number("solver", "limiter_tol", default("limiter_tol"))),
        window=rd.array("solver", "window", default("window")),
        h=_positive("solver.h", rd.number("solver", "h", default("h"))),
        cells_per_period=rd.integer("solver", "cells_per_period", default("cells_per_period")),
        finger_h1=_positive("solver.finger_h1", rd.number("solver", "finger_h1", default("finger_h1"))),
        finger_n2=rd.integer("solver", "finger_n2", default("finger_n2")),
        line_h=_positive("solver.line_h", rd.number("solver", "line_h", default("line_h"))),
        eps_nodes=rd.integer("solver", "eps_nodes", default("eps_nodes")),
        hm_nodes=rd.integer("solver", "hm_nodes", default("hm_nodes")),
        corrector_finger_rho=_positive("correctors.finger_rho",
                                       rd.number("correctors", "finger_rho", default("corrector_finger_rho"))),
        corrector_eps=_positive("correctors.eps", rd.number("correctors", "eps", default("corrector_eps"))),
        corrector_eps_rho=_positive("correctors.eps_rho",
                                    rd.number("correctors", "eps_rho", default("corrector_eps_rho"))),
        out_dir=Path(rd.get("output", "dir", "out")),
        source=source,
        raw={s: dict(parser.items(s)) for s in parser.sections()},
    )
    for name in ("eps_list", "eta_list"):
        key = "scales." + name.split("_")[0]
        if any(v <= 0 for v in cfg[name]):
            raise ConfigError(f"{key}: scales must be > 0")
        _decreasing(key, cfg[name])
    if 0.0 not in cfg["p2_samples"]:
        raise ConfigError("momenta.p2: must include 0, where the effective problems read their limiters")
    if len(cfg["window"]) != 2 or not cfg["window"][0] < 0 < cfg["window"][1]:
        raise ConfigError("solver.window: expected 'lo, hi' with lo < 0 < hi")
    for key, name in (("solver.cells_per_period", "cells_per_period"), ("solver.finger_n2", "finger_n2"),
                      ("solver.eps_nodes", "eps_nodes"), ("solver.hm_nodes", "hm_nodes")):
        _positive(key, cfg[name])
    if len(cfg["finger_rhos"]) < 2 or len(cfg["line_rhos"]) < 2:
        raise ConfigError("schedules: truncation schedules need at least two entries")
    if len(cfg["discount_schedule"]) < 2 or len(cfg["hm_schedule"]) < 2:
        raise ConfigError("schedules: discount schedules need at least two entries")
    return RunConfig(**cfg)


def load_config(path=None):
    """Read a config file; ``None`` loads the shipped default."""
    path = Path(path) if path is not None else DEFAULT_CONFIG
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), base_dir=path.parent, source=str(path))
