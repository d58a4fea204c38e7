"""Flat ``key=value`` scenario files.

One pair per line, ``#`` starts a comment, blank lines are ignored. Lengths
given as ``extent`` and ``window`` are multiples of ``L0``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .model import BOUNDARY_SUPPORT_TOL, Grid, PhysicalParams

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "SOLVERS", "KEYS"]

SOLVERS = ("cold", "secular-pair", "secular-diffusion")

KEYS = {
    "solver": "cold | secular-pair | secular-diffusion (default cold)",
    "a": "coupling parameter 2 cot^2(theta), > 0 (exclusive with tan2theta)",
    "tan2theta": "tan^2(theta) = 2/a, > 0 (exclusive with a)",
    "L0": "width of the stored Gaussian excitation in l_abs, > 0 (required)",
    "center": "center of the excitation in l_abs (default 0)",
    "amplitude": "field scale at retrieval (default 1)",
    "extent": "domain half width in units of L0 (default 12)",
    "n_xi": "number of spatial nodes, >= 5 (default 1441)",
    "d_tau": "time step, <= d_xi (default 0.8 d_xi)",
    "tau_max": "final time, > 0 (required)",
    "output_every": "steps between field snapshots; must divide the step count",
    "truncation_eps": "kernel truncation threshold, >= 0 (default 0 = off)",
    "transient_drive": "on | off (default off; cold solver only)",
    "kappa": "drive strength for transient_drive=on (default 1)",
    "window": "intensity window half width in units of L0 (default 3)",
    "fit_tau_start": "start of the velocity fit window (default tau_max/2)",
    "fit_tau_end": "end of the velocity fit window (default tau_max)",
}

REQUIRED = ("L0", "tau_max")
MAX_SNAPSHOT_INTERVALS = 20
# exp(-extent^2) must be below the spin-profile edge tolerance.
MIN_EXTENT = math.sqrt(math.log(1.0 / BOUNDARY_SUPPORT_TOL))


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class ScenarioConfig:
    solver: str
    a: float
    L0: float
    center: float
    amplitude: float
    extent: float
    n_xi: int
    d_tau: float
    tau_max: float
    output_every: int
    truncation_eps: float
    transient_drive: bool
    kappa: float
    window: float
    fit_tau_start: float
    fit_tau_end: float

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams(self.a)

    @property
    def grid(self) -> Grid:
        half = self.extent * self.L0
        return Grid(self.center - half, self.center + half, self.n_xi, self.d_tau, self.tau_max)

    @property
    def window_bounds(self) -> tuple:
        return (self.center - self.window * self.L0, self.center + self.window * self.L0)

    @property
    def fit_window(self) -> tuple:
        return (self.fit_tau_start, self.fit_tau_end)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        """Resolved configuration in the input format; parses back to ``self``."""
        lines = []
        for key, value in self.as_dict().items():
            if isinstance(value, bool):
                text = "on" if value else "off"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key}={text}")
        return "\n".join(lines) + "\n"


def _number(key, raw, line, kind=float):
    try:
        if kind is int:
            value = int(raw)
        else:
            value = float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind.__name__}", key, line) from None
    if kind is float and not math.isfinite(value):
        raise ConfigError("value must be finite", key, line)
    return value


def _switch(key, raw, line):
    low = raw.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {raw!r}", key, line)


def _largest_divisor_at_least(n: int, minimum: int) -> int:
    for d in range(minimum, n + 1):
        if n % d == 0:
            return d
    return n


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario, applying defaults."""
    raw = {}
    where = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key=value, got {body!r}", None, lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError("unknown key", key, lineno)
        if key in raw:
            raise ConfigError(f"duplicate key (first set on line {where[key]})", key, lineno)
        if value == "":
            raise ConfigError("empty value", key, lineno)
        raw[key] = value
        where[key] = lineno

    if "a" in raw and "tan2theta" in raw:
        raise ConfigError(
            f"keys 'a' (line {where['a']}) and 'tan2theta' (line {where['tan2theta']}) "
            "are mutually exclusive; give exactly one"
        )
    if "a" not in raw and "tan2theta" not in raw:
        raise ConfigError("missing required key: give exactly one of 'a' or 'tan2theta'", "a")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError("missing required key", key)

    def get(key, default=None, kind=float):
        if key not in raw:
            return default
        return _number(key, raw[key], where[key], kind)

    def positive(key, value):
        if not value > 0:
            raise ConfigError(f"must be positive, got {value!r}", key, where.get(key))
        return value

    solver = raw.get("solver", "cold")
    if solver not in SOLVERS:
        raise ConfigError(f"must be one of {', '.join(SOLVERS)}", "solver", where.get("solver"))

    if "a" in raw:
        a = positive("a", get("a"))
    else:
        a = 2.0 / positive("tan2theta", get("tan2theta"))
    L0 = positive("L0", get("L0"))
    tau_max = positive("tau_max", get("tau_max"))
    center = get("center", 0.0)
    amplitude = get("amplitude", 1.0)
    extent = positive("extent", get("extent", 12.0))
    if extent < MIN_EXTENT:
        raise ConfigError(f"the excitation must vanish at the edges; need extent >= {MIN_EXTENT:.3f}",
                          "extent", where.get("extent"))
    n_xi = get("n_xi", 1441, int)
    if n_xi < 5:
        raise ConfigError("must be >= 5", "n_xi", where.get("n_xi"))
    d_xi = 2.0 * extent * L0 / (n_xi - 1)
    d_tau = positive("d_tau", get("d_tau", 0.8 * d_xi))
    if d_tau > d_xi * (1 + 1e-12):
        raise ConfigError(f"d_tau={d_tau!r} exceeds d_xi={d_xi!r}", "d_tau", where.get("d_tau"))
    if d_tau > tau_max:
        raise ConfigError("d_tau exceeds tau_max", "d_tau", where.get("d_tau"))
    grid = Grid(center - extent * L0, center + extent * L0, n_xi, d_tau, tau_max)
    n_steps = grid.n_steps

    if "output_every" in raw:
        output_every = get("output_every", kind=int)
        if output_every < 1 or n_steps % output_every:
            raise ConfigError(f"must be a positive divisor of the step count {n_steps}",
                              "output_every", where["output_every"])
    else:
        output_every = _largest_divisor_at_least(n_steps, math.ceil(n_steps / MAX_SNAPSHOT_INTERVALS))

    truncation_eps = get("truncation_eps", 0.0)
    if truncation_eps < 0:
        raise ConfigError("must be >= 0", "truncation_eps", where.get("truncation_eps"))
    drive = _switch("transient_drive", raw["transient_drive"], where["transient_drive"]) \
        if "transient_drive" in raw else False
    if drive and solver != "cold":
        raise ConfigError("only available with solver=cold", "transient_drive", where["transient_drive"])
    kappa = get("kappa", 1.0)
    window = positive("window", get("window", 3.0))
    if window > extent:
        raise ConfigError("window is wider than the domain", "window", where.get("window"))
    fit_start = get("fit_tau_start", 0.5 * tau_max)
    fit_end = get("fit_tau_end", tau_max)
    if not 0 <= fit_start < fit_end <= tau_max * (1 + 1e-12):
        key = "fit_tau_start" if "fit_tau_start" in raw else "fit_tau_end"
        raise ConfigError("fit window must satisfy 0 <= start < end <= tau_max", key, where.get(key))

    return ScenarioConfig(
        solver=solver, a=a, L0=L0, center=center, amplitude=amplitude, extent=extent,
        n_xi=n_xi, d_tau=grid.d_tau, tau_max=tau_max, output_every=output_every,
        truncation_eps=truncation_eps, transient_drive=drive, kappa=kappa, window=window,
        fit_tau_start=fit_start, fit_tau_end=fit_end,
    )
