"""Time evolution under the full time-dependent model, closed and open.

The Schrodinger equation is integrated with the explicit Runge-Kutta pair
DOP853 (Hairer's Fortran code, via ``scipy.integrate.ode``) with local
error control.  The step is capped at 2*pi/(50*|delta|) so that the
exp(+-i delta t) carrier of the coupling is always resolved.  Complex
states are handed to the solver as real views of the same memory.

The master equation has two routes.  The default moves to the frame
rotating at delta*a^dag a, where the generator is time-independent (the
damping terms are invariant under a -> a exp(i phi)), and applies its
exponential with ``scipy.sparse.linalg.expm_multiply``.  The alternative
integrates the lab-frame equation with DOP853 like the closed system.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import ode
from scipy.sparse.linalg import expm_multiply

from ..hilbert import DensityMatrix, LayoutError, PureState, embed
from .hamiltonians import PhysicalParams, annihilation, cavity_layout, lowering_coupling, photon_number

log = logging.getLogger(__name__)

STEPS_PER_PERIOD = 50
ABS_TOL_FACTOR = 1e-2
DEFAULT_MAX_STEPS = 50_000_000

_DOP853_CODES = {
    -1: "input is not consistent",
    -2: "step budget exhausted",
    -3: "step size underflow",
    -4: "problem appears stiff",
}


class IntegrationError(RuntimeError):
    """The adaptive integrator failed to reach the requested time."""


def step_ceiling(params: PhysicalParams) -> float:
    """Largest step allowed: 1/50 of the fastest period in the model.

    The carrier period 2*pi/delta sets it; on resonance the vacuum Rabi
    frequency g*sqrt(n_max+1) is used instead.
    """
    freq = max(abs(params.delta), params.g * math.sqrt(params.n_max + 1))
    return 2 * math.pi / (STEPS_PER_PERIOD * freq)


def _check_tol(rel_tol: float) -> None:
    if not 1e-13 < rel_tol < 1e-3:
        raise ValueError(f"rel_tol must lie in (1e-13, 1e-3), got {rel_tol}")


def _integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_final: float,
    rel_tol: float,
    max_step: float,
    max_steps: int,
    sample_times: Sequence[float] | None,
    observer: Callable[[float, np.ndarray], None] | None,
) -> tuple[np.ndarray, list[np.ndarray], int]:
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    times = np.asarray(sample_times if sample_times is not None else [], dtype=float)
    if times.size and (np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > t_final):
        raise ValueError("sample times must be sorted within [0, t_final]")
    if not times.size or times[-1] < t_final:
        times = np.append(times, t_final)

    y0 = np.ascontiguousarray(y0, dtype=complex).ravel()
    n_steps = 0

    def f(t, y):
        return rhs(t, y.view(complex)).view(float)

    solver = ode(f).set_integrator(
        "dop853",
        rtol=rel_tol,
        atol=ABS_TOL_FACTOR * rel_tol,
        max_step=max_step,
        nsteps=max_steps,
    )

    def solout(t, y):
        nonlocal n_steps
        n_steps += 1
        if observer is not None:
            observer(t, y.view(complex))

    solver.set_solout(solout)
    solver.set_initial_value(y0.view(float).copy(), 0.0)

    out = []
    for tk in times:
        if tk == 0.0:
            out.append(y0.copy())
            continue
        with warnings.catch_warnings():
            # failures are reported through IntegrationError below
            warnings.filterwarnings("ignore", message="dop853", category=UserWarning)
            y = solver.integrate(tk)
        if not solver.successful():
            code = solver.get_return_code()
            raise IntegrationError(
                f"DOP853 stopped at t={solver.t:.6e} s of {tk:.6e} s after {n_steps} steps: "
                f"{_DOP853_CODES.get(code, 'unknown failure')} (code {code}); "
                f"rel_tol={rel_tol:g}, max_step={max_step:.3e} s"
            )
        out.append(np.array(y, dtype=float).view(complex).copy())
    return times, out, n_steps


# ---------------------------------------------------------------------------
# closed system


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple[PureState, ...]
    n_steps: int
    norm_drift: float

    @property
    def final(self) -> PureState:
        return self.states[-1]


def solve_schrodinger(
    state: PureState,
    params: PhysicalParams,
    n_atoms: int,
    t_final: float,
    rel_tol: float = 1e-10,
    *,
    coupled: Sequence[int] | None = None,
    sample_times: Sequence[float] | None = None,
    observer: Callable[[float, np.ndarray], None] | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Trajectory:
    """Integrate i dpsi/dt = H(t) psi under the full dispersive Hamiltonian.

    ``observer(t, amplitudes)`` is called after every accepted step and
    must not keep a reference to ``amplitudes``.  The norm is never
    corrected; its drift is returned (and logged when it exceeds the
    tolerance).
    """
    _check_tol(rel_tol)
    layout = cavity_layout(n_atoms, params.n_max)
    if state.layout != layout:
        raise LayoutError(f"state layout {state.layout.factor_dims} is not {layout.factor_dims}")

    x = lowering_coupling(params, n_atoms, coupled)
    stacked = np.vstack([-1j * x, -1j * x.conj().T])
    d = layout.dim
    delta = params.delta

    def rhs(t, psi):
        w = stacked @ psi
        ph = complex(math.cos(delta * t), -math.sin(delta * t))
        return ph * w[:d] + ph.conjugate() * w[d:]

    times, ys, n_steps = _integrate(
        rhs, state.amplitudes, t_final, rel_tol, step_ceiling(params), max_steps, sample_times, observer
    )
    states = tuple(PureState(layout, y) for y in ys)
    drift = abs(states[-1].norm() - state.norm())
    if drift > 10 * rel_tol:
        log.warning("norm drift %.3e exceeds 10*rel_tol over %d steps", drift, n_steps)
    else:
        log.debug("norm drift %.3e over %d steps", drift, n_steps)
    return Trajectory(times, states, n_steps, drift)


def evolve_time_dependent(
    state: PureState,
    params: PhysicalParams,
    n_atoms: int,
    t_final: float,
    rel_tol: float = 1e-10,
    coupled: Sequence[int] | None = None,
) -> PureState:
    """Final state of :func:`solve_schrodinger` at ``t_final``."""
    return solve_schrodinger(state, params, n_atoms, t_final, rel_tol, coupled=coupled).final


def photon_population(state: PureState | DensityMatrix) -> float:
    """Probability of one or more cavity photons (0 when there is no cavity)."""
    layout = state.layout
    if not layout.has_cavity:
        return 0.0
    dc = layout.factor_dims[-1]
    if isinstance(state, DensityMatrix):
        p = state.populations().reshape(-1, dc).sum(axis=0)
    else:
        p = (np.abs(state.amplitudes.reshape(-1, dc)) ** 2).sum(axis=0)
    return float(1.0 - p[0] / p.sum())


def fock_populations(amplitudes: np.ndarray, n_cavity: int) -> np.ndarray:
    return (np.abs(amplitudes.reshape(-1, n_cavity)) ** 2).sum(axis=0)


def max_photon_population(states: Iterable[PureState | DensityMatrix]) -> float:
    """Largest photon population over a sequence of sampled states."""
    return max((photon_population(s) for s in states), default=0.0)


# ---------------------------------------------------------------------------
# open system


def liouvillian_parts(
    x: np.ndarray, a: np.ndarray, kappa: float, n_th: float
) -> tuple[sparse.csr_matrix, sparse.csr_matrix, sparse.csr_matrix]:
    """Superoperators multiplying exp(-i delta t), exp(+i delta t) and 1.

    Acts on row-major vec(rho), where vec(A rho B) = (A kron B^T) vec(rho).
    ``x`` is the exp(-i delta t) part of H and ``a`` the full-space
    annihilation operator.
    """
    d = x.shape[0]
    eye = sparse.identity(d, dtype=complex, format="csr")
    xs = sparse.csr_matrix(x)
    xds = sparse.csr_matrix(x.conj().T)
    plus = -1j * sparse.kron(xs, eye) + 1j * sparse.kron(eye, xs.T)
    minus = -1j * sparse.kron(xds, eye) + 1j * sparse.kron(eye, xds.T)
    const = sparse.csr_matrix((d * d, d * d), dtype=complex)
    rates = ((kappa * (n_th + 1.0), a), (kappa * n_th, a.conj().T))
    for rate, c in rates:
        if rate == 0:
            continue
        cs = sparse.csr_matrix(c)
        cdc = (cs.conj().T @ cs).tocsr()
        const = const + rate * (
            sparse.kron(cs, cs.conj()) - 0.5 * sparse.kron(cdc, eye) - 0.5 * sparse.kron(eye, cdc.T)
        )
    return plus.tocsr(), minus.tocsr(), const.tocsr()


def rotating_frame_generator(
    x: np.ndarray, a: np.ndarray, n_photon: np.ndarray, delta: float, kappa: float, n_th: float
) -> sparse.csr_matrix:
    """Time-independent Liouvillian in the frame rotating at delta*a^dag a.

    There H(t) becomes X + X^dag - delta*a^dag a, and the lab-frame state is
    rho(t) = V rho_rot(t) V^dag with V = exp(-i delta t a^dag a).
    """
    d = x.shape[0]
    eye = sparse.identity(d, dtype=complex, format="csr")
    h = sparse.csr_matrix(x + x.conj().T - delta * n_photon)
    _, _, const = liouvillian_parts(np.zeros_like(x), a, kappa, n_th)
    return (-1j * sparse.kron(h, eye) + 1j * sparse.kron(eye, h.T) + const).tocsr()


@dataclass(frozen=True)
class LindbladTrajectory:
    times: np.ndarray
    states: tuple[DensityMatrix, ...]
    n_steps: int
    trace_drift: float
    hermiticity_residual: float

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


def solve_lindblad(
    rho: DensityMatrix,
    params: PhysicalParams,
    n_atoms: int,
    t_final: float,
    rel_tol: float = 1e-9,
    *,
    coupled: Sequence[int] | None = None,
    sample_times: Sequence[float] | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    method: str = "rotating",
) -> LindbladTrajectory:
    """Master equation with the full Hamiltonian and a damped, thermal cavity.

    drho/dt = -i[H(t), rho] + kappa (n_th+1) D[a] rho + kappa n_th D[a^dag] rho,
    with D[c] rho = c rho c^dag - {c^dag c, rho}/2.

    ``method="rotating"`` (default) exponentiates the rotating-frame
    generator between samples; ``rel_tol`` then only needs to be valid, the
    result is accurate to round-off.  ``method="dop853"`` integrates the
    lab-frame equation adaptively.  Trace and Hermiticity are checked at
    every sample (tolerance 1e-9); within tolerance the sampled matrix is
    symmetrized before being wrapped.
    """
    _check_tol(rel_tol)
    layout = cavity_layout(n_atoms, params.n_max)
    if rho.layout != layout:
        raise LayoutError(f"state layout {rho.layout.factor_dims} is not {layout.factor_dims}")
    d = layout.dim
    x = lowering_coupling(params, n_atoms, coupled)
    a = embed(annihilation(params.n_max), n_atoms, layout)
    if method == "rotating":
        times, ys, n_steps = _exponentiate_rotating(rho, params, x, a, t_final, sample_times)
    elif method == "dop853":
        stacked = sparse.vstack(liouvillian_parts(x, a, params.kappa, params.n_th)).tocsr()
        n = d * d
        delta = params.delta

        def rhs(t, y):
            w = stacked @ y
            ph = complex(math.cos(delta * t), -math.sin(delta * t))
            return ph * w[:n] + ph.conjugate() * w[n : 2 * n] + w[2 * n :]

        times, ys, n_steps = _integrate(
            rhs, rho.matrix, t_final, rel_tol, step_ceiling(params), max_steps, sample_times, None
        )
    else:
        raise ValueError(f"unknown method {method!r} (rotating or dop853)")
    states = []
    worst_trace = 0.0
    worst_herm = 0.0
    for y in ys:
        m = y.reshape(d, d)
        herm = float(np.max(np.abs(m - m.conj().T)))
        tr = abs(np.trace(m).real - 1.0)
        worst_trace = max(worst_trace, tr)
        worst_herm = max(worst_herm, herm)
        if tr > 1e-9 or herm > 1e-9:
            raise IntegrationError(f"trace drift {tr:.3e} / Hermiticity residual {herm:.3e} above 1e-9")
        m = 0.5 * (m + m.conj().T)
        m = m / np.trace(m).real
        states.append(DensityMatrix(layout, m))
    log.debug("lindblad: %d steps, trace drift %.3e", n_steps, worst_trace)
    return LindbladTrajectory(times, tuple(states), n_steps, worst_trace, worst_herm)


def _exponentiate_rotating(rho, params, x, a, t_final, sample_times):
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    times = np.asarray(sample_times if sample_times is not None else [], dtype=float)
    if times.size and (np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > t_final):
        raise ValueError("sample times must be sorted within [0, t_final]")
    if not times.size or times[-1] < t_final:
        times = np.append(times, t_final)
    n_ph = np.diag(photon_number(rho.layout).matrix).real
    gen = rotating_frame_generator(x, a, np.diag(n_ph), params.delta, params.kappa, params.n_th)
    y = np.array(rho.matrix, dtype=complex).ravel()
    t_prev = 0.0
    out = []
    for tk in times:
        if tk > t_prev:
            y = expm_multiply(gen * (tk - t_prev), y)
            t_prev = tk
        v = np.exp(-1j * params.delta * tk * n_ph)
        out.append((np.outer(v, v.conj()) * y.reshape(v.size, v.size)).ravel())
    return times, out, len(times)


def evolve_lindblad(
    rho: DensityMatrix,
    params: PhysicalParams,
    n_atoms: int,
    t_final: float,
    rel_tol: float = 1e-9,
    coupled: Sequence[int] | None = None,
    method: str = "rotating",
) -> DensityMatrix:
    """Final state of :func:`solve_lindblad` at ``t_final``."""
    return solve_lindblad(rho, params, n_atoms, t_final, rel_tol, coupled=coupled, method=method).final

