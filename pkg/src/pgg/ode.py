"""Replicator ODE in (f, z) coordinates, reference orbits and their periods.

    f' = -f(1-f) G(z)
    z' = (sigma - f(r-1)) z(1-z)(1-z^(N-1))

Orbits are integrated with an adaptive Dormand-Prince 5(4) pair and keep
their dense output so that distances to the orbit can be measured between
accepted steps.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import BoundaryEscape, DomainError, InsufficientData, StepFailure
from .hamiltonian import build_context, eval_H1, eval_H2
from .model import OdeState, eval_G, eval_G_prime, interior_fixed_point, psi

ESCAPE_TOL = 1e-12


def rhs_arrays(f, z, params):
    """Vectorised right-hand side; also the pointwise reaction of the PDE."""
    g = eval_G(z, params)
    df = -f * (1.0 - f) * g
    dz = (params.sf - f * (params.rf - 1.0)) * psi(z, params.n)
    return df, dz


def ode_rhs(state, params):
    f, z = state
    df, dz = rhs_arrays(float(f), float(z), params)
    return float(df), float(dz)


@dataclass
class OrbitRecord:
    times: np.ndarray
    f: np.ndarray
    z: np.ndarray
    h_values: np.ndarray
    params: object
    tol: float = 1e-10
    period: Optional[float] = None
    dense: object = field(default=None, repr=False)

    def __post_init__(self):
        if not (len(self.times) == len(self.f) == len(self.z) == len(self.h_values)):
            raise ValueError("orbit arrays must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("orbit times must be strictly increasing")

    @property
    def states(self):
        return [OdeState(float(a), float(b)) for a, b in zip(self.f, self.z)]

    @property
    def drift(self):
        """max_t |H(t) - H(0)| / H(0); NaN if the orbit touches the boundary."""
        h = self.h_values
        if not np.all(np.isfinite(h)):
            return float("nan")
        return float(np.max(np.abs(h - h[0])) / abs(h[0]))

    @property
    def drift_tolerance(self):
        return 100.0 * self.tol

    def at(self, t):
        """(f, z) at time(s) t from the dense output."""
        if self.dense is None:
            t = np.asarray(t, dtype=float)
            return np.interp(t, self.times, self.f), np.interp(t, self.times, self.z)
        y = self.dense(t)
        return y[0], y[1]


def _hamiltonian_along(f, z, params, ctx):
    inside = (f > 0) & (f < 1) & (z > 0) & (z < 1)
    if not np.all(inside):
        return np.full_like(f, np.nan)
    ctx = ctx or build_context(params)
    return eval_H1(f, params) + eval_H2(z, ctx)


def integrate(initial, t_end, params, tol=1e-10, ctx=None, t_start=0.0):
    """Adaptive RK5(4) orbit from ``initial`` over [t_start, t_end]."""
    f0, z0 = float(initial[0]), float(initial[1])
    if not (0.0 <= f0 <= 1.0 and 0.0 <= z0 <= 1.0):
        raise DomainError("initial state must lie in [0, 1]^2")
    if tol <= 0 or t_end <= t_start:
        raise ValueError("need tol > 0 and t_end > t_start")

    def fun(_t, y):
        return rhs_arrays(y[0], y[1], params)

    sol = solve_ivp(fun, (t_start, t_end), [f0, z0], method="RK45", rtol=tol, atol=tol, dense_output=True)
    if sol.status < 0:
        raise StepFailure(sol.message)
    f, z = sol.y
    lo, hi = min(f.min(), z.min()), max(f.max(), z.max())
    if lo < -ESCAPE_TOL or hi > 1 + ESCAPE_TOL:
        raise BoundaryEscape(f"orbit left the unit square (range [{lo}, {hi}])")
    h = _hamiltonian_along(f, z, params, ctx)
    return OrbitRecord(sol.t, f, z, h, params, tol=tol, dense=sol.sol)


def jacobian_at_fixed_point(params):
    fs, zs = interior_fixed_point(params)
    gp = eval_G_prime(zs, params)
    return np.array([[-(1 - 2 * fs) * eval_G(zs, params), -fs * (1 - fs) * gp],
                     [-(params.rf - 1) * psi(zs, params.n), 0.0]])


def linearized_frequency(params):
    """Angular frequency of small oscillations about the interior centre."""
    fs, zs = interior_fixed_point(params)
    gp = eval_G_prime(zs, params)  # negative: G decreases through its root
    return float(np.sqrt(-fs * (1 - fs) * gp * (params.rf - 1) * psi(zs, params.n)))


def _hermite_root(t0, t1, y0, y1, d0, d1):
    h = t1 - t0

    def p(t):
        s = (t - t0) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1

    return brentq(p, t0, t1, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def section_crossings(record):
    """Times where f crosses f* upward, located by cubic Hermite interpolation.

    On the line f = f* the z-velocity vanishes, so the crossing direction is
    taken from f' > 0 instead.
    """
    fs = interior_fixed_point(record.params).f
    g = record.f - fs
    df, _ = rhs_arrays(record.f, record.z, record.params)
    idx = np.nonzero((g[:-1] < 0) & (g[1:] >= 0))[0]
    t = record.times
    return np.array([_hermite_root(t[i], t[i + 1], g[i], g[i + 1], df[i], df[i + 1]) for i in idx])


def measure_period(record):
    crossings = section_crossings(record)
    if len(crossings) < 3:
        raise InsufficientData(f"need at least 3 section crossings, found {len(crossings)}")
    record.period = float((crossings[-1] - crossings[0]) / (len(crossings) - 1))
    return record.period


def orbit_through(state, params, tol=1e-11, periods=3.0, ctx=None):
    """Closed orbit through ``state``: integrates a few periods and measures one."""
    guess = 2 * np.pi / linearized_frequency(params)
    record = integrate(state, periods * guess * 1.5, params, tol=tol, ctx=ctx)
    try:
        measure_period(record)
    except InsufficientData:
        record.period = None
    return record


def value_gap(f_lo, f_hi, z_lo, z_hi, f_orb, z_orb):
    """sup_x |f - f~| + sup_x |z - z~| given the field ranges."""
    return (np.maximum(f_hi - f_orb, f_orb - f_lo) + np.maximum(z_hi - z_orb, z_orb - z_lo))


def nearest_on_orbit(record, f, z, samples=4096):
    """Minimum value gap between field values (f, z) and the orbit; returns (gap, t).

    A dense scan over one period (or the full span) is refined by a bounded
    scalar search on the dense output.
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    rng = (f.min(), f.max(), z.min(), z.max())
    t0 = record.times[0]
    span = record.period if record.period else record.times[-1] - t0
    if record.dense is None or span <= 0:
        gaps = value_gap(*rng, record.f, record.z)
        i = int(np.argmin(gaps))
        return float(gaps[i]), float(record.times[i])
    ts = t0 + span * np.arange(samples + 1) / samples
    fo, zo = record.at(ts)
    gaps = value_gap(*rng, fo, zo)
    i = int(np.argmin(gaps))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, samples)]

    def objective(t):
        a, b = record.at(t)
        return float(value_gap(*rng, a, b))

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * span})
    if res.fun < gaps[i]:
        return float(res.fun), float(res.x)
    return float(gaps[i]), float(ts[i])
