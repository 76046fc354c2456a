"""1-D reaction-diffusion system with zero-flux boundaries.

    f_t - d_f f_xx = -f(1-f) G(z)
    z_t - d_z z_xx = (sigma - f(r-1)) z(1-z)(1-z^(N-1))

Cell-centred finite volumes on [0, L]; reflective ghost cells give the
Neumann condition.  Time stepping is Strang-split IMEX: a Heun half step of
the reaction, a Crank-Nicolson diffusion step, another Heun half step.

The discrete Lyapunov functional is the midpoint sum of H over the cells.
Its dissipation is assembled on cell faces with the secant slope of H'
across each face, which is the exact summation-by-parts partner of the
discrete Laplacian used by the stepper.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import BoundsViolation, InvalidSpec, LyapunovViolation, StepSizeError
from .hamiltonian import eval_H1, eval_H1_d, eval_H1_dd, eval_H2, eval_H2_d, eval_H2_dd
from .model import g_poly
from .ode import nearest_on_orbit, rhs_arrays
from .tridiag import FactoredTridiagonal, apply_tridiagonal, neumann_laplacian_bands

BOUND_TOL = 1e-12
H_CLAMP = 1e-12
SECANT_MIN = 1e-6
LYAPUNOV_SLACK = 1e-10


@dataclass(frozen=True)
class Grid1D:
    length: float = 1.0
    n_cells: int = 256

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("grid length must be positive")
        if self.n_cells < 8:
            raise ValueError("need at least 8 cells")

    @property
    def dx(self):
        return self.length / self.n_cells

    @property
    def x(self):
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass
class FieldPair:
    f: np.ndarray
    z: np.ndarray
    time: float = 0.0

    def copy(self):
        return FieldPair(self.f.copy(), self.z.copy(), self.time)

    @property
    def mean_f(self):
        return float(np.mean(self.f))

    @property
    def mean_z(self):
        return float(np.mean(self.z))


@dataclass(frozen=True)
class InitialSpec:
    """Initial-data description.

    ``perturbed`` adds ``amplitude * cos(mode * pi * x / L)``, which has zero
    flux at both ends; ``z_amplitude`` defaults to ``amplitude``.
    """

    kind: str
    f0: float = 0.5
    z0: float = 0.5
    amplitude: float = 0.0
    mode: int = 1
    z_amplitude: Optional[float] = None
    f_left: float = 0.0
    f_right: float = 0.0
    z_left: float = 0.0
    z_right: float = 0.0
    f_values: tuple = ()
    z_values: tuple = ()

    @classmethod
    def constant(cls, f0, z0):
        return cls("constant", f0=f0, z0=z0)

    @classmethod
    def perturbed(cls, f0, z0, amplitude, mode=1, z_amplitude=None):
        return cls("perturbed", f0=f0, z0=z0, amplitude=amplitude, mode=mode, z_amplitude=z_amplitude)

    @classmethod
    def step(cls, f_left, f_right, z_left, z_right):
        return cls("step", f_left=f_left, f_right=f_right, z_left=z_left, z_right=z_right)

    @classmethod
    def tabulated(cls, f_values, z_values):
        return cls("tabulated", f_values=tuple(f_values), z_values=tuple(z_values))


def _bounded(u, name, clamp):
    if np.all((u >= 0) & (u <= 1)):
        return u
    if clamp:
        return np.clip(u, 0.0, 1.0)
    raise InvalidSpec(f"{name} leaves [0, 1] (range [{u.min()}, {u.max()}])")


def _perturb(base, amp, shape, name, clamp):
    if clamp:
        amp = np.sign(amp) * min(abs(amp), base, 1.0 - base)
    return _bounded(base + amp * shape, name, clamp)


def init_fields(grid, spec, clamp=True):
    n, x = grid.n_cells, grid.x
    if spec.kind == "constant":
        f = np.full(n, float(spec.f0))
        z = np.full(n, float(spec.z0))
        f, z = _bounded(f, "f", clamp), _bounded(z, "z", clamp)
    elif spec.kind == "perturbed":
        shape = np.cos(spec.mode * np.pi * x / grid.length)
        za = spec.amplitude if spec.z_amplitude is None else spec.z_amplitude
        for name, v in (("f0", spec.f0), ("z0", spec.z0)):
            if not 0 <= v <= 1:
                raise InvalidSpec(f"{name}={v} outside [0, 1]")
        f = _perturb(float(spec.f0), spec.amplitude, shape, "f", clamp)
        z = _perturb(float(spec.z0), za, shape, "z", clamp)
    elif spec.kind == "step":
        left = x < 0.5 * grid.length
        f = np.where(left, spec.f_left, spec.f_right).astype(float)
        z = np.where(left, spec.z_left, spec.z_right).astype(float)
        f, z = _bounded(f, "f", clamp), _bounded(z, "z", clamp)
    elif spec.kind == "tabulated":
        f = np.asarray(spec.f_values, dtype=float)
        z = np.asarray(spec.z_values, dtype=float)
        if f.shape != (n,) or z.shape != (n,):
            raise InvalidSpec(f"tabulated data must have {n} values per field")
        f, z = _bounded(f, "f", clamp), _bounded(z, "z", clamp)
    else:
        raise InvalidSpec(f"unknown initial-data kind {spec.kind!r}")
    return FieldPair(f, z, 0.0)


def reaction_lipschitz_bound(params):
    """Row-sum bound on the reaction Jacobian over the unit square.

    Uses |G| <= sum|g_k|, |G'| <= sum k|g_k|, z(1-z)(1-z^(N-1)) <= 1/4 and the
    coefficient bound 2N + 4 for the derivative of that factor.
    """
    g = np.abs(np.array(g_poly(params).float_coeffs()))
    m_g = g.sum()
    m_gp = (np.arange(len(g)) * g).sum()
    r, s = params.rf, params.sf
    row_f = m_g + m_gp / 4
    row_z = (r - 1) / 4 + max(s, r - 1 - s) * (2 * params.n + 4)
    return max(row_f, row_z)


def reaction_dt_limit(params):
    return 0.5 / reaction_lipschitz_bound(params)


class ImexStepper:
    """Strang-split IMEX step with precomputed Crank-Nicolson factors.

    ``reaction(f, z) -> (rf, rz)`` overrides the game reaction (test hook).
    """

    def __init__(self, grid, dt, params, reaction=None):
        if not dt > 0:
            raise StepSizeError("dt must be positive")
        limit = reaction_dt_limit(params)
        if dt > limit:
            raise StepSizeError(f"dt={dt} exceeds the reaction stability limit {limit:.4g}")
        self.grid, self.dt, self.params = grid, dt, params
        self.reaction = reaction or (lambda f, z: rhs_arrays(f, z, params))
        lo, di, up = neumann_laplacian_bands(grid.n_cells, grid.dx)
        self._ops = []
        for d in (params.d_f, params.d_z):
            a = 0.5 * dt * d
            implicit = FactoredTridiagonal(-a * lo, 1.0 - a * di, -a * up)
            self._ops.append((implicit, (a * lo, 1.0 + a * di, a * up)))

    def heun(self, f, z, h):
        kf, kz = self.reaction(f, z)
        f1, z1 = f + h * kf, z + h * kz
        lf, lz = self.reaction(f1, z1)
        return f + 0.5 * h * (kf + lf), z + 0.5 * h * (kz + lz)

    def diffuse(self, u, which):
        implicit, explicit = self._ops[which]
        return implicit.solve(apply_tridiagonal(*explicit, u))

    def step(self, f, z):
        h = 0.5 * self.dt
        f, z = self.heun(f, z, h)
        f, z = self.diffuse(f, 0), self.diffuse(z, 1)
        f, z = self.heun(f, z, h)
        lo = min(f.min(), z.min())
        hi = max(f.max(), z.max())
        if lo < -BOUND_TOL or hi > 1 + BOUND_TOL:
            raise BoundsViolation(f"field left [0, 1]: range [{lo}, {hi}]")
        return f, z


@lru_cache(maxsize=32)
def _cached_stepper(grid, dt, params):
    return ImexStepper(grid, dt, params)


def step_imex(fields, dt, grid, ctx, reaction=None):
    stepper = ImexStepper(grid, dt, ctx.params, reaction) if reaction else _cached_stepper(grid, dt, ctx.params)
    f, z = stepper.step(fields.f, fields.z)
    return FieldPair(f, z, fields.time + dt)


# -- discrete calculus ---------------------------------------------------------

def face_gradient(u, dx):
    return np.diff(u) / dx


def second_difference(u, dx):
    """Ghost-cell second difference, i.e. the stepper's discrete Laplacian."""
    padded = np.concatenate([u[:1], u, u[-1:]])
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / dx**2


def c2_seminorm(u, dx):
    """sup |Du| + sup |D^2 u|; zero for a spatially constant field."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.size == 1:
        return 0.0
    return float(np.abs(face_gradient(u, dx)).max() + np.abs(second_difference(u, dx)).max())


def c2_norm(u, dx):
    return float(np.abs(u).max()) + c2_seminorm(u, dx)


def secant_hessian(u, first, second):
    """(first(u[i+1]) - first(u[i])) / (u[i+1] - u[i]) on each face.

    Falls back to ``second`` at the face midpoint when the jump is below
    SECANT_MIN, where the secant quotient loses precision.
    """
    du = np.diff(u)
    mid = 0.5 * (u[1:] + u[:-1])
    small = np.abs(du) < SECANT_MIN
    out = second(mid)
    if not np.all(small):
        d1 = first(u)
        big = ~small
        out[big] = (np.diff(d1)[big]) / du[big]
    return out


def clamp_unit(u):
    return np.clip(u, H_CLAMP, 1.0 - H_CLAMP)


def lyapunov(fields, grid, ctx):
    f, z = clamp_unit(fields.f), clamp_unit(fields.z)
    return float(np.sum(eval_H1(f, ctx.params) + eval_H2(z, ctx)) * grid.dx)


def dissipation(fields, grid, ctx):
    p, dx = ctx.params, grid.dx
    f, z = clamp_unit(fields.f), clamp_unit(fields.z)
    hf = secant_hessian(f, lambda u: eval_H1_d(u, p), lambda u: eval_H1_dd(u, p))
    hz = secant_hessian(z, lambda u: eval_H2_d(u, ctx), lambda u: eval_H2_dd(u, ctx))
    gf, gz = face_gradient(f, dx), face_gradient(z, dx)
    return float(np.sum(p.d_f * hf * gf**2 + p.d_z * hz * gz**2) * dx)


@dataclass
class PdeDiagnostics:
    time: float
    lyapunov: float
    dissipation: float
    grad_sup_f: float
    grad_sup_z: float
    hess_sup_f: float
    hess_sup_z: float
    dist_to_orbit: Optional[float] = None
    mean_f: float = float("nan")
    mean_z: float = float("nan")

    def as_row(self):
        return {
            "t": self.time,
            "lyapunov": self.lyapunov,
            "dissipation": self.dissipation,
            "grad_sup_f": self.grad_sup_f,
            "grad_sup_z": self.grad_sup_z,
            "hess_sup_f": self.hess_sup_f,
            "hess_sup_z": self.hess_sup_z,
            "dist_to_orbit": float("nan") if self.dist_to_orbit is None else self.dist_to_orbit,
            "mean_f": self.mean_f,
            "mean_z": self.mean_z,
        }


def orbit_distance(f, z, dx, orbit):
    """Discrete C^2 distance from fields (f, z) to the orbit's point set."""
    gap, _ = nearest_on_orbit(orbit, f, z)
    return gap + c2_seminorm(f, dx) + c2_seminorm(z, dx)


def diagnostics(fields, grid, ctx, orbit=None):
    dx = grid.dx
    f, z = fields.f, fields.z
    return PdeDiagnostics(
        time=fields.time,
        lyapunov=lyapunov(fields, grid, ctx),
        dissipation=dissipation(fields, grid, ctx),
        grad_sup_f=float(np.abs(face_gradient(f, dx)).max()),
        grad_sup_z=float(np.abs(face_gradient(z, dx)).max()),
        hess_sup_f=float(np.abs(second_difference(f, dx)).max()),
        hess_sup_z=float(np.abs(second_difference(z, dx)).max()),
        dist_to_orbit=None if orbit is None else orbit_distance(f, z, dx, orbit),
        mean_f=fields.mean_f,
        mean_z=fields.mean_z,
    )


def dissipation_mismatch(fields, grid, ctx, dt, stepper=None):
    """Relative gap between the one-step Lyapunov rate and -dissipation.

    The rate (H(t+dt) - H(t))/dt is compared with the trapezoidal average of
    the dissipation at both ends; returns (rate, -dissipation, mismatch).
    """
    stepper = stepper or ImexStepper(grid, dt, ctx.params)
    h0, d0 = lyapunov(fields, grid, ctx), dissipation(fields, grid, ctx)
    f, z = stepper.step(fields.f, fields.z)
    nxt = FieldPair(f, z, fields.time + dt)
    h1, d1 = lyapunov(nxt, grid, ctx), dissipation(nxt, grid, ctx)
    rate = (h1 - h0) / dt
    ref = -0.5 * (d0 + d1)
    return rate, ref, abs(rate - ref) / abs(ref)


@dataclass
class PdeRun:
    diagnostics: list
    final: FieldPair
    snapshots: list = field(default_factory=list)
    grad_z_l2_integral: float = 0.0
    field_min: float = 0.0
    field_max: float = 1.0
    max_lyapunov_increase: float = float("-inf")
    identity_probes: list = field(default_factory=list)


def check_lyapunov(prev, cur, time, slack=LYAPUNOV_SLACK):
    """Returns the (signed) increase; raises past the relative slack."""
    inc = cur - prev
    if inc > slack * (1.0 + abs(prev)):
        raise LyapunovViolation(f"Lyapunov functional increased by {inc:.3e} at t={time}")
    return inc


def _step_counts(t_end, dt, snapshot_every):
    steps = int(round(t_end / dt))
    if steps < 1 or abs(steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise StepSizeError(f"t_end={t_end} is not a multiple of dt={dt}")
    every = max(1, int(round(snapshot_every / dt)))
    return steps, every


def run(grid, initial, t_end, dt, ctx, snapshot_every=1.0, orbit=None, keep_fields=False,
        keep_from=0.0, lyapunov_check=True, identity_probe=False, identity_floor=1e-9, reaction=None):
    """Advance the PDE to ``t_end``, recording diagnostics every ``snapshot_every``.

    ``identity_probe`` evaluates the one-step dissipation mismatch at each
    snapshot whose per-step Lyapunov change exceeds ``identity_floor`` in
    relative terms; those are stored as (t, mismatch) pairs.
    """
    stepper = ImexStepper(grid, dt, ctx.params, reaction)
    steps, every = _step_counts(t_end, dt, snapshot_every)
    dx = grid.dx
    f, z = initial.f.copy(), initial.z.copy()
    t0 = initial.time
    out = PdeRun([], initial)
    fmin = min(f.min(), z.min())
    fmax = max(f.max(), z.max())
    gz2 = float(np.sum(face_gradient(z, dx) ** 2) * dx)
    integral = 0.0

    def snapshot(k):
        fields = FieldPair(f.copy(), z.copy(), t0 + k * dt)
        diag = diagnostics(fields, grid, ctx, orbit)
        if out.diagnostics and lyapunov_check:
            inc = check_lyapunov(out.diagnostics[-1].lyapunov, diag.lyapunov, fields.time)
            out.max_lyapunov_increase = max(out.max_lyapunov_increase, inc)
        out.diagnostics.append(diag)
        if keep_fields and fields.time >= keep_from - 1e-12:
            out.snapshots.append(fields)
        if identity_probe and diag.dissipation * dt > identity_floor * (1.0 + diag.lyapunov):
            out.identity_probes.append((fields.time, dissipation_mismatch(fields, grid, ctx, dt, stepper)[2]))

    snapshot(0)
    for k in range(1, steps + 1):
        f, z = stepper.step(f, z)
        fmin = min(fmin, f.min(), z.min())
        fmax = max(fmax, f.max(), z.max())
        nz2 = float(np.sum(face_gradient(z, dx) ** 2) * dx)
        integral += 0.5 * dt * (gz2 + nz2)
        gz2 = nz2
        if k % every == 0 or k == steps:
            snapshot(k)
    out.final = FieldPair(f, z, t0 + steps * dt)
    out.grad_z_l2_integral = integral
    out.field_min, out.field_max = float(fmin), float(fmax)
    return out
