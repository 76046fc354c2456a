"""Shadow system: the fast z-diffusion limit.

    F_t - d_f F_xx = -F(1-F) G(Z)
    Z' = Z(1-Z)(1-Z^(N-1)) * mean_x(sigma - F(r-1))

Z is a single scalar.  The step mirrors the full PDE stepper: a joint Heun
half step for (F, Z) with the spatial mean of F taken at each Heun stage,
Crank-Nicolson diffusion of F (which leaves the discrete mean untouched),
then another joint Heun half step.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BoundsViolation, StepSizeError
from .hamiltonian import eval_H1, eval_H1_d, eval_H1_dd, eval_H2
from .model import eval_G, psi
from .ode import nearest_on_orbit
from .pde import (BOUND_TOL, PdeDiagnostics, _step_counts, c2_seminorm, check_lyapunov, clamp_unit,
                  face_gradient, reaction_dt_limit, second_difference, secant_hessian)
from .tridiag import FactoredTridiagonal, apply_tridiagonal, neumann_laplacian_bands


@dataclass
class ShadowState:
    F: np.ndarray
    Z: float
    time: float = 0.0

    @property
    def mean_F(self):
        return float(np.mean(self.F))


def shadow_initial(fields):
    """Shadow data from full PDE data: F = f, Z = spatial mean of z."""
    return ShadowState(fields.f.copy(), float(np.mean(fields.z)), fields.time)


def shadow_rhs(F, Z, params):
    dF = -F * (1.0 - F) * eval_G(Z, params)
    dZ = float(psi(Z, params.n) * np.mean(params.sf - F * (params.rf - 1.0)))
    return dF, dZ


class ShadowStepper:
    def __init__(self, grid, dt, params):
        if not dt > 0:
            raise StepSizeError("dt must be positive")
        limit = reaction_dt_limit(params)
        if dt > limit:
            raise StepSizeError(f"dt={dt} exceeds the reaction stability limit {limit:.4g}")
        self.grid, self.dt, self.params = grid, dt, params
        lo, di, up = neumann_laplacian_bands(grid.n_cells, grid.dx)
        a = 0.5 * dt * params.d_f
        self._implicit = FactoredTridiagonal(-a * lo, 1.0 - a * di, -a * up)
        self._explicit = (a * lo, 1.0 + a * di, a * up)

    def heun(self, F, Z, h):
        kF, kZ = shadow_rhs(F, Z, self.params)
        lF, lZ = shadow_rhs(F + h * kF, Z + h * kZ, self.params)
        return F + 0.5 * h * (kF + lF), Z + 0.5 * h * (kZ + lZ)

    def step(self, F, Z):
        h = 0.5 * self.dt
        F, Z = self.heun(F, Z, h)
        F = self._implicit.solve(apply_tridiagonal(*self._explicit, F))
        F, Z = self.heun(F, Z, h)
        lo, hi = min(F.min(), Z), max(F.max(), Z)
        if lo < -BOUND_TOL or hi > 1 + BOUND_TOL:
            raise BoundsViolation(f"shadow state left [0, 1]: range [{lo}, {hi}]")
        return F, Z


@lru_cache(maxsize=32)
def _cached_stepper(grid, dt, params):
    return ShadowStepper(grid, dt, params)


def shadow_step(state, dt, grid, ctx):
    F, Z = _cached_stepper(grid, dt, ctx.params).step(state.F, state.Z)
    return ShadowState(F, Z, state.time + dt)


def shadow_lyapunov(state, grid, ctx):
    F = clamp_unit(state.F)
    Z = float(clamp_unit(state.Z))
    return float(np.sum(eval_H1(F, ctx.params)) * grid.dx + grid.length * eval_H2(Z, ctx))


def shadow_dissipation(state, grid, ctx):
    p = ctx.params
    F = clamp_unit(state.F)
    hf = secant_hessian(F, lambda u: eval_H1_d(u, p), lambda u: eval_H1_dd(u, p))
    return float(np.sum(p.d_f * hf * face_gradient(F, grid.dx) ** 2) * grid.dx)


def shadow_orbit_distance(F, Z, dx, orbit):
    gap, _ = nearest_on_orbit(orbit, F, Z)
    return gap + c2_seminorm(F, dx)


def shadow_diagnostics(state, grid, ctx, orbit=None):
    dx = grid.dx
    return PdeDiagnostics(
        time=state.time,
        lyapunov=shadow_lyapunov(state, grid, ctx),
        dissipation=shadow_dissipation(state, grid, ctx),
        grad_sup_f=float(np.abs(face_gradient(state.F, dx)).max()),
        grad_sup_z=0.0,
        hess_sup_f=float(np.abs(second_difference(state.F, dx)).max()),
        hess_sup_z=0.0,
        dist_to_orbit=None if orbit is None else shadow_orbit_distance(state.F, state.Z, dx, orbit),
        mean_f=state.mean_F,
        mean_z=float(state.Z),
    )


def shadow_dissipation_mismatch(state, grid, ctx, dt, stepper=None):
    stepper = stepper or ShadowStepper(grid, dt, ctx.params)
    h0, d0 = shadow_lyapunov(state, grid, ctx), shadow_dissipation(state, grid, ctx)
    F, Z = stepper.step(state.F, state.Z)
    nxt = ShadowState(F, Z, state.time + dt)
    h1, d1 = shadow_lyapunov(nxt, grid, ctx), shadow_dissipation(nxt, grid, ctx)
    rate = (h1 - h0) / dt
    ref = -0.5 * (d0 + d1)
    return rate, ref, abs(rate - ref) / abs(ref)


@dataclass
class ShadowRun:
    diagnostics: list
    final: ShadowState
    snapshots: list = field(default_factory=list)
    field_min: float = 0.0
    field_max: float = 1.0
    max_lyapunov_increase: float = float("-inf")


def shadow_run(grid, initial, t_end, dt, ctx, snapshot_every=1.0, orbit=None, keep_fields=False,
               keep_from=0.0, lyapunov_check=True):
    stepper = ShadowStepper(grid, dt, ctx.params)
    steps, every = _step_counts(t_end, dt, snapshot_every)
    F, Z = initial.F.copy(), float(initial.Z)
    t0 = initial.time
    out = ShadowRun([], initial)
    lo, hi = min(F.min(), Z), max(F.max(), Z)

    def snapshot(k):
        state = ShadowState(F.copy(), Z, t0 + k * dt)
        diag = shadow_diagnostics(state, grid, ctx, orbit)
        if out.diagnostics and lyapunov_check:
            inc = check_lyapunov(out.diagnostics[-1].lyapunov, diag.lyapunov, state.time)
            out.max_lyapunov_increase = max(out.max_lyapunov_increase, inc)
        out.diagnostics.append(diag)
        if keep_fields and state.time >= keep_from - 1e-12:
            out.snapshots.append(state)

    snapshot(0)
    for k in range(1, steps + 1):
        F, Z = stepper.step(F, Z)
        lo, hi = min(lo, F.min(), Z), max(hi, F.max(), Z)
        if k % every == 0 or k == steps:
            snapshot(k)
    out.final = ShadowState(F, Z, t0 + steps * dt)
    out.field_min, out.field_max = float(lo), float(hi)
    return out
