"""The four reference experiments: convergence study, coarsening dynamics,
shape relaxation under a rotational boundary field, and the stability sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import assembly as asm
from .assembly import l2_error, h1_error
from .fem import NORM_DEGREE, build_space
from .linsolve import solve_neumann_zero_mean
from .mesh import build_uniform_mesh
from .mms import MmsCase, trig_case
from .scheme import Forcing, Operators, Params, State, StepReport, build_operators, init_state, step


@dataclass
class ErrorRecord:
    """Errors of one resolution level in the norms the study reports."""

    h: float
    tau: float
    phi_linf_l2: float
    mu_l2_l2: float
    u_linf_l2: float
    p_l2_l2: float
    phi_h1: float
    mu_h1: float
    u_h1: float
    p_h1: float
    r_err: float
    rho_err: float


def rate(err_coarse: float, err_fine: float) -> float:
    """Observed order between two levels whose mesh size halves."""
    return math.log2(err_coarse / err_fine)


def rates_between(records: list[ErrorRecord], attr: str) -> list[float]:
    vals = [getattr(rec, attr) for rec in records]
    return [rate(a, b) for a, b in zip(vals, vals[1:])]


class ErrorAccumulator:
    """Online accumulation of trajectory error norms (no state storage)."""

    def __init__(self, ops: Operators, case: MmsCase, params: Params):
        self.ops = ops
        self.case = case
        self.params = params
        self.phi_linf = 0.0
        self.u_linf = 0.0
        self.mu_sq_sum = 0.0
        self.p_sq_sum = 0.0

    def update(self, state: State, t: float) -> None:
        c = self.case
        e_phi = l2_error(self.ops.p1, state.phi, lambda x, y: c.phi(t, x, y))
        e_mu = l2_error(self.ops.p1, state.mu, lambda x, y: c.mu(t, x, y))
        e_u = l2_error(self.ops.p2v, state.u, lambda x, y: c.u(t, x, y))
        e_p = l2_error(self.ops.p1, state.p, lambda x, y: c.p(t, x, y))
        self.phi_linf = max(self.phi_linf, e_phi)
        self.u_linf = max(self.u_linf, e_u)
        self.mu_sq_sum += e_mu ** 2
        self.p_sq_sum += e_p ** 2

    def finalize(self, state: State, t_final: float, h: float) -> ErrorRecord:
        c, ops, prm = self.case, self.ops, self.params
        tau = prm.tau
        tab = asm._tables(ops.p1, NORM_DEGREE)
        e1 = float(np.sum(tab["wdet"] * c.r_exact_density(t_final, tab["x"], tab["y"])))
        e2 = 0.5 * float(np.sum(tab["wdet"] * c.u_squared(t_final, tab["x"], tab["y"])))
        r_exact = math.sqrt(e1 + prm.c1)
        rho_exact = math.sqrt(e2 + prm.c2)
        return ErrorRecord(
            h=h, tau=tau,
            phi_linf_l2=self.phi_linf,
            mu_l2_l2=math.sqrt(tau * self.mu_sq_sum),
            u_linf_l2=self.u_linf,
            p_l2_l2=math.sqrt(tau * self.p_sq_sum),
            phi_h1=h1_error(ops.p1, state.phi,
                            lambda x, y: c.phi(t_final, x, y),
                            lambda x, y: c.grad_phi(t_final, x, y)),
            mu_h1=h1_error(ops.p1, state.mu,
                           lambda x, y: c.mu(t_final, x, y),
                           lambda x, y: c.grad_mu(t_final, x, y)),
            u_h1=h1_error(ops.p2v, state.u,
                          lambda x, y: c.u(t_final, x, y),
                          lambda x, y: c.grad_u(t_final, x, y)),
            p_h1=h1_error(ops.p1, state.p,
                          lambda x, y: c.p(t_final, x, y),
                          lambda x, y: c.grad_p(t_final, x, y)),
            r_err=abs(state.r - r_exact),
            rho_err=abs(state.rho - rho_exact),
        )


def default_tau_rule(h: float) -> float:
    return 0.1 * h ** 3


def run_convergence_level(nx: int, params: Params, t_end: float = 0.1,
                          tau_rule=default_tau_rule, on_step=None) -> ErrorRecord:
    """March the manufactured problem on one mesh and collect its errors."""
    h = 1.0 / nx
    tau = tau_rule(h)
    nsteps = round(t_end / tau)
    prm = replace(params, tau=tau, t_end=t_end)

    mesh = build_uniform_mesh(nx, nx)
    p1 = build_space(mesh, "p1")
    p2v = build_space(mesh, "p2vec")
    ops = build_operators(p1, p2v, prm)
    case = trig_case(prm)
    forcing = Forcing(g_phi=case.g_phi, g_u=case.g_u)

    state = init_state(ops,
                       lambda x, y: case.phi(0.0, x, y),
                       lambda x, y: case.u(0.0, x, y),
                       lambda x, y: case.p(0.0, x, y),
                       prm,
                       mu0=lambda x, y: case.mu(0.0, x, y))
    acc = ErrorAccumulator(ops, case, prm)
    acc.update(state, 0.0)
    for n in range(nsteps):
        state, report = step(state, prm, ops, forcing=forcing)
        acc.update(state, (n + 1) * tau)
        if on_step is not None:
            on_step(state, report)
    return acc.finalize(state, nsteps * tau, h)


def run_convergence(levels, params: Params, t_end: float = 0.1,
                    tau_rule=default_tau_rule, on_step=None) -> list[ErrorRecord]:
    if sorted(levels) != list(levels):
        raise ValueError("levels must be sorted coarse to fine")
    records = []
    for nx in levels:
        try:
            records.append(run_convergence_level(nx, params, t_end, tau_rule, on_step))
        except Exception as exc:
            raise RuntimeError(f"convergence level nx={nx} failed") from exc
    return records


# ---------------------------------------------------------------------------
# random initial data


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """Deterministic uniform stream in [0, 1) from a 64-bit mixing generator.

    The generator is fixed here (not delegated to a library) so traces are
    reproducible across platforms and library versions.
    """
    out = np.empty(count)
    state = np.uint64(seed)
    golden = np.uint64(0x9E3779B97F4A7C15)
    c1 = np.uint64(0xBF58476D1CE4E5B9)
    c2 = np.uint64(0x94D049BB133111EB)
    with np.errstate(over="ignore"):
        for i in range(count):
            state = state + golden
            z = state
            z = (z ^ (z >> np.uint64(30))) * c1
            z = (z ^ (z >> np.uint64(27))) * c2
            z = z ^ (z >> np.uint64(31))
            out[i] = float(z) / 2.0 ** 64
    return out


def random_phase_field(seed: int, ndofs: int, amplitude: float = 0.1) -> np.ndarray:
    return amplitude * (2.0 * splitmix64_stream(seed, ndofs) - 1.0)


@dataclass
class EnergyTrace:
    """Per-step diagnostics of one dissipative run."""

    steps: list[int] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    identity_residual: list[float] = field(default_factory=list)
    discriminant: list[float] = field(default_factory=list)
    root_ratio: list[float] = field(default_factory=list)
    min_disc_scaled: float = np.inf  # discriminant / max(a1^2, |4 a2 a0|) minimum

    def append(self, report: StepReport, n: int, t: float) -> None:
        self.steps.append(n)
        self.times.append(t)
        self.energy.append(report.energy_after)
        self.dissipation.append(report.dissipation)
        self.identity_residual.append(report.identity_residual)
        self.discriminant.append(report.discriminant)
        self.root_ratio.append(report.root_ratio)
        scale = max(report.a1 ** 2, abs(4.0 * report.a2 * report.a0), 1e-300)
        self.min_disc_scaled = min(self.min_disc_scaled, report.discriminant / scale)

    def monotone(self, slack: float = 1e-8) -> bool:
        e = self.energy
        return all(e[i + 1] <= e[i] + slack * max(1.0, e[i]) for i in range(len(e) - 1))


@dataclass
class RunArtifacts:
    trace: EnergyTrace
    snapshots: list[tuple[float, State]]
    final_state: State
    ops: Operators
    initial_energy: float


def _march(ops: Operators, params: Params, state: State, nsteps: int,
           snapshot_times=(), bc=None, on_step=None, strict_root=False) -> RunArtifacts:
    from .scheme import modified_energy

    trace = EnergyTrace()
    initial_energy = modified_energy(ops, params, state)
    remaining = sorted(snapshot_times)
    snaps = []
    if remaining and remaining[0] <= 0.0:
        snaps.append((0.0, state))
        remaining = [t for t in remaining if t > 0.0]
    for n in range(nsteps):
        state, report = step(state, params, ops, bc=bc, strict_root=strict_root)
        t = (n + 1) * params.tau
        trace.append(report, n + 1, t)
        while remaining and t >= remaining[0] - 0.5 * params.tau:
            snaps.append((remaining.pop(0), state))
        if on_step is not None:
            on_step(state, report)
    return RunArtifacts(trace=trace, snapshots=snaps, final_state=state,
                        ops=ops, initial_energy=initial_energy)


def coarsening_params() -> Params:
    return Params(mobility=0.0001, lam=0.02, nu=1.0, eps=0.01, gamma=1.0,
                  c1=1.0, c2=0.1, tau=0.001, t_end=5.0)


def run_coarsening(seed: int, nx: int, tau: float, t_end: float,
                   snapshot_times=(), params: Params | None = None,
                   on_step=None, strict_root=False) -> RunArtifacts:
    """Spinodal decomposition from small random data; energy must decay."""
    prm = replace(params or coarsening_params(), tau=tau, t_end=t_end)
    mesh = build_uniform_mesh(nx, nx)
    p1 = build_space(mesh, "p1")
    p2v = build_space(mesh, "p2vec")
    ops = build_operators(p1, p2v, prm)

    phi0 = random_phase_field(seed, p1.ndofs)
    state = init_state(ops, phi0, np.zeros(p2v.ndofs), np.zeros(p1.ndofs), prm,
                       mu0=phi0.copy())
    nsteps = round(t_end / tau)
    return _march(ops, prm, state, nsteps, snapshot_times, on_step=on_step,
                  strict_root=strict_root)


def run_stability_sweep(tau_list, seed: int, nx: int, t_end: float,
                        params: Params | None = None) -> dict[float, RunArtifacts]:
    """Repeat the coarsening run for each time step; one trace per tau."""
    return {tau: run_coarsening(seed, nx, tau, t_end, params=params)
            for tau in tau_list}


# ---------------------------------------------------------------------------
# shape relaxation


def default_cross_polygon(center=(0.5, 0.5), half_width=0.1, half_span=0.3) -> np.ndarray:
    """Plus-sign with four reentrant corners, traversed counter-clockwise."""
    cx, cy = center
    w, a = half_width, half_span
    return np.array([
        (cx - w, cy - a), (cx + w, cy - a), (cx + w, cy - w), (cx + a, cy - w),
        (cx + a, cy + w), (cx + w, cy + w), (cx + w, cy + a), (cx - w, cy + a),
        (cx - w, cy + w), (cx - a, cy + w), (cx - a, cy - w), (cx - w, cy - w),
    ])


def _segments_intersect(p, q, r, s) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p, q, r), orient(p, q, s)
    d3, d4 = orient(r, s, p), orient(r, s, q)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def polygon_is_simple(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a, b, poly[j], poly[(j + 1) % n]):
                return False
    return True


def points_in_polygon(poly: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Even-odd ray test, vectorized over the query points."""
    inside = np.zeros(x.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < np.where(crosses, xint, np.inf))
    return inside


def relaxation_params() -> Params:
    return Params(mobility=0.001, lam=0.1, nu=1.0, eps=0.01, gamma=1.0,
                  c1=1.0, c2=0.1, tau=0.001, t_end=0.5)


def run_relaxation(polygon, nx: int, tau: float, t_end: float,
                   snapshot_times=(), params: Params | None = None,
                   on_step=None, strict_root=False) -> RunArtifacts:
    """Relax a polygonal blob while the boundary drives a rigid rotation."""
    poly = np.asarray(polygon, dtype=float)
    if len(poly) < 3 or not polygon_is_simple(poly):
        raise ValueError("polygon must be simple (non self-intersecting)")
    prm = replace(params or relaxation_params(), tau=tau, t_end=t_end)
    mesh = build_uniform_mesh(nx, nx)
    p1 = build_space(mesh, "p1")
    p2v = build_space(mesh, "p2vec")
    ops = build_operators(p1, p2v, prm)

    def rotation(x, y):
        return y - 0.5, -(x - 0.5)

    inside = points_in_polygon(poly, p1.dof_coords[:, 0], p1.dof_coords[:, 1])
    phi0 = np.where(inside, 1.0, -1.0)
    state = init_state(ops, phi0, rotation, np.zeros(p1.ndofs), prm)
    nsteps = round(t_end / tau)
    return _march(ops, prm, state, nsteps, snapshot_times, bc=rotation,
                  on_step=on_step, strict_root=strict_root)


# ---------------------------------------------------------------------------
# elliptic projection order check


def ritz_projection(p1, grad, integral: float = 0.0) -> np.ndarray:
    """Gradient-matching projection onto the linear space.

    grad is the analytic gradient of the projected field; integral is the
    field's integral over the domain, which pins the constant mode.
    """
    k = asm.assemble_stiffness(p1)
    m = asm.assemble_mass(p1)
    lumped = np.asarray(m.sum(axis=1)).ravel()
    proj = solve_neumann_zero_mean(k, _grad_load(p1, grad), lumped)
    return proj + integral / lumped.sum()


def _grad_load(p1, grad) -> np.ndarray:
    """Entries (grad f, grad w_i) assembled from an analytic gradient."""
    tab = asm._tables(p1, NORM_DEGREE)
    gx, gy = grad(tab["x"], tab["y"])
    g = np.stack([np.broadcast_to(gx, tab["x"].shape),
                  np.broadcast_to(gy, tab["x"].shape)], axis=-1)
    cellwise = np.einsum("tq,tqd,tqid->ti", tab["wdet"], g, tab["grads"])
    return np.bincount(p1.scalar_cell_dofs.ravel(), weights=cellwise.ravel(),
                       minlength=p1.ndofs)


def projection_rate_check(levels=(4, 8, 16)):
    """Observed L2/H1 orders of the gradient-matching projection of a smooth field."""
    pi = np.pi

    def field(x, y):
        return np.sin(pi * x) * np.cos(pi * y)

    def grad(x, y):
        return (pi * np.cos(pi * x) * np.cos(pi * y),
                -pi * np.sin(pi * x) * np.sin(pi * y))

    errs_l2, errs_h1 = [], []
    for nx in levels:
        mesh = build_uniform_mesh(nx, nx)
        p1 = build_space(mesh, "p1")
        # the test field has zero mean, so no shift is needed
        proj = ritz_projection(p1, grad)
        errs_l2.append(l2_error(p1, proj, field))
        errs_h1.append(asm.h1_seminorm_error(p1, proj, grad))
    l2_rates = [rate(a, b) for a, b in zip(errs_l2, errs_l2[1:])]
    h1_rates = [rate(a, b) for a, b in zip(errs_h1, errs_h1[1:])]
    return {"l2_errors": errs_l2, "h1_errors": errs_h1,
            "l2_rates": l2_rates, "h1_rates": h1_rates}
