"""Experiment configuration files.

The format is flat ``key = value`` lines; ``#`` starts a comment and list
values are comma separated.  Initial-data values ``f0``/``z0`` accept the
symbols ``fstar``/``zstar`` (the interior fixed point) with an optional
additive offset, e.g. ``f0 = fstar + 0.1``.

    kind = pde
    r = 3
    N = 5
    sigma = 1
    init = perturbed
    f0 = fstar + 0.1
    z0 = zstar
    amplitude = 0.05
"""

import re
from dataclasses import asdict, dataclass, field
from typing import Optional

from .errors import IoError, ParseError
from .model import ModelParams, interior_fixed_point
from .pde import Grid1D, InitialSpec

KINDS = ("check-hessian", "ode", "pde", "shadow", "converge-dz", "phase-shift", "shadow-to-ode")
INIT_KINDS = ("constant", "perturbed", "step", "tabulated")

# kind-specific defaults that differ from the global ones
KIND_DEFAULTS = {
    "converge-dz": {"t_end": 20.0, "snapshot_every": 0.1, "z_amplitude": 0.0},
    "phase-shift": {"snapshot_every": 0.1},
}


@dataclass
class ExperimentConfig:
    kind: str
    params: ModelParams
    grid: Grid1D = field(default_factory=Grid1D)
    initial: InitialSpec = None
    t_end: float = 200.0
    dt: float = 1e-3
    snapshot_every: float = 1.0
    d_z_list: tuple = (1.0, 10.0, 100.0, 1000.0)
    ode_tol: float = 1e-10
    periods: float = 10.0
    grid_size: int = 10_000
    exact: bool = False
    transient: float = 100.0
    window_periods: int = 2
    grad_threshold: float = 1e-6
    dist_threshold: float = 1e-3
    residual_threshold: float = 1e-2
    identity_threshold: float = 0.05
    dump_fields: bool = False
    clamp: bool = True
    source: Optional[str] = None

    def echo(self):
        """Flat dict of the effective settings (for report headers)."""
        p = self.params
        out = {
            "kind": self.kind, "r": str(p.r), "N": p.n, "sigma": str(p.sigma), "d_f": p.d_f, "d_z": p.d_z,
            "strict": p.strict, "length": self.grid.length, "n_cells": self.grid.n_cells,
            "t_end": self.t_end, "dt": self.dt, "snapshot_every": self.snapshot_every,
        }
        out.update({f"init_{k}": v for k, v in asdict(self.initial).items() if v not in ((), None)})
        for k in ("d_z_list", "ode_tol", "periods", "grid_size", "exact", "transient", "window_periods",
                  "grad_threshold", "dist_threshold", "residual_threshold", "identity_threshold"):
            out[k] = getattr(self, k)
        return out


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _positive(v):
    if not v > 0:
        raise ValueError(f"must be positive, got {v}")
    return v


def _pos_float(s):
    return _positive(float(s))


def _pos_int(s):
    return _positive(int(s))


_SYMBOL = re.compile(r"^\s*(fstar|zstar)\s*(?:([+-])\s*([0-9.eE+-]+))?\s*$")

# key -> (converter, destination name)
FIELDS = {
    "kind": (str.strip, "kind"),
    "r": (str.strip, "r"),
    "n": (int, "n"),
    "sigma": (str.strip, "sigma"),
    "d_f": (_pos_float, "d_f"),
    "d_z": (_pos_float, "d_z"),
    "strict": (_bool, "strict"),
    "length": (_pos_float, "length"),
    "n_cells": (int, "n_cells"),
    "t_end": (_pos_float, "t_end"),
    "dt": (_pos_float, "dt"),
    "snapshot_every": (_pos_float, "snapshot_every"),
    "d_z_list": (_floats, "d_z_list"),
    "ode_tol": (_pos_float, "ode_tol"),
    "periods": (_pos_float, "periods"),
    "grid_size": (_pos_int, "grid_size"),
    "exact": (_bool, "exact"),
    "transient": (float, "transient"),
    "window_periods": (_pos_int, "window_periods"),
    "grad_threshold": (_pos_float, "grad_threshold"),
    "dist_threshold": (_pos_float, "dist_threshold"),
    "residual_threshold": (_pos_float, "residual_threshold"),
    "identity_threshold": (_pos_float, "identity_threshold"),
    "dump_fields": (_bool, "dump_fields"),
    "clamp": (_bool, "clamp"),
    "init": (str.strip, "init"),
    "f0": (str.strip, "f0"),
    "z0": (str.strip, "z0"),
    "amplitude": (float, "amplitude"),
    "z_amplitude": (float, "z_amplitude"),
    "mode": (_pos_int, "mode"),
    "f_left": (float, "f_left"),
    "f_right": (float, "f_right"),
    "z_left": (float, "z_left"),
    "z_right": (float, "z_right"),
    "f_values": (_floats, "f_values"),
    "z_values": (_floats, "z_values"),
}


def _read_pairs(text):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in FIELDS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in pairs:
            raise ParseError(f"duplicate key {key!r}", lineno)
        conv, _ = FIELDS[key]
        try:
            pairs[key] = (conv(value), lineno)
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from None
    return pairs


def _resolve_point(value, params, lineno):
    if isinstance(value, float):
        return value
    m = _SYMBOL.match(value)
    if not m:
        try:
            return float(value)
        except ValueError:
            raise ParseError(f"bad initial value {value!r}", lineno) from None
    fs, zs = interior_fixed_point(params)
    base = fs if m.group(1) == "fstar" else zs
    if m.group(2):
        off = float(m.group(3))
        base = base + off if m.group(2) == "+" else base - off
    return base


def parse_config_text(text, kind=None, source=None):
    pairs = _read_pairs(text)

    def get(key, default=None):
        return pairs[key][0] if key in pairs else default

    def line(key):
        return pairs[key][1] if key in pairs else None

    cfg_kind = get("kind")
    if kind and cfg_kind and kind != cfg_kind:
        raise ParseError(f"config kind {cfg_kind!r} does not match requested {kind!r}", line("kind"))
    kind = kind or cfg_kind
    if kind is None:
        raise ParseError("missing 'kind'")
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}", line("kind"))
    for key in ("r", "n", "sigma"):
        if key not in pairs:
            raise ParseError(f"missing required key {key!r}")
    defaults = KIND_DEFAULTS.get(kind, {})

    params = ModelParams(get("r"), get("n"), get("sigma"), d_f=get("d_f", 0.1), d_z=get("d_z", 0.1),
                         strict=get("strict", True))

    try:
        grid = Grid1D(get("length", 1.0), get("n_cells", 256))
    except ValueError as exc:
        raise ParseError(str(exc), line("n_cells") or line("length")) from None

    dz = get("d_z_list", (1.0, 10.0, 100.0, 1000.0))
    if not dz or any(d <= 0 for d in dz) or any(b <= a for a, b in zip(dz, dz[1:])):
        raise ParseError("d_z_list must be positive and strictly increasing", line("d_z_list"))

    init = get("init", "perturbed")
    if init not in INIT_KINDS:
        raise ParseError(f"unknown init kind {init!r}", line("init"))
    if kind == "check-hessian":
        spec = InitialSpec.constant(0.5, 0.5)
    elif init == "constant":
        spec = InitialSpec.constant(_resolve_point(get("f0", "fstar"), params, line("f0")),
                                    _resolve_point(get("z0", "zstar"), params, line("z0")))
    elif init == "perturbed":
        spec = InitialSpec.perturbed(
            _resolve_point(get("f0", "fstar + 0.1"), params, line("f0")),
            _resolve_point(get("z0", "zstar"), params, line("z0")),
            get("amplitude", 0.05), get("mode", 1), get("z_amplitude", defaults.get("z_amplitude")))
    elif init == "step":
        spec = InitialSpec.step(get("f_left", 0.2), get("f_right", 0.8),
                                get("z_left", 0.5), get("z_right", 0.5))
    else:
        if "f_values" not in pairs or "z_values" not in pairs:
            raise ParseError("tabulated init needs f_values and z_values", line("init"))
        spec = InitialSpec.tabulated(get("f_values"), get("z_values"))

    cfg = ExperimentConfig(kind=kind, params=params, grid=grid, initial=spec, source=source)
    for key in ("t_end", "snapshot_every"):
        setattr(cfg, key, get(key, defaults.get(key, getattr(cfg, key))))
    for key in ("dt", "ode_tol", "periods", "grid_size", "exact", "transient", "window_periods",
                "grad_threshold", "dist_threshold", "residual_threshold", "identity_threshold",
                "dump_fields", "clamp"):
        setattr(cfg, key, get(key, getattr(cfg, key)))
    cfg.d_z_list = dz
    if kind == "check-hessian" and cfg.grid_size < 1000:
        raise ParseError("grid_size must be at least 1000", line("grid_size"))
    if cfg.transient < 0:
        raise ParseError("transient must be nonnegative", line("transient"))
    return cfg


def parse_config(path, kind=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, kind=kind, source=str(path))
