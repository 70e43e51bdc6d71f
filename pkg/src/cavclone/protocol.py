"""The three-cavity 1->2 cloning pipeline.

Atom 1 carries the input qubit; atoms 2 and 3 start in |e>|g>.  The
schedule is

    cavity A   atoms 2,3 collide for lambda*t = phase_A
    Ramsey     z-rotations theta1 (atom 1) and theta2 (atom 2)
    cavity B   atoms 1,2,3 collide for lambda*t = phase_B
    cavity C   atoms 2,3 collide for lambda*t = phase_C
    Ramsey     z-rotations theta3 (atom 2) and theta4 (atom 3)

and, with phase-matched parameters, ends in the optimal symmetric cloner
output with clones on atoms 2 and 3.  The same schedule is executed on
three tiers: closed-form effective propagators, the full time-dependent
atom-cavity model, and the damped/thermal master equation.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .dynamics.hamiltonians import CollisionSpec, PhysicalParams, RegimeWarning, effective_hamiltonian_vacuum
from .dynamics.integrate import fock_populations, solve_lindblad, solve_schrodinger
from .dynamics.propagators import apply_local, collision_three_atom, collision_two_atom, z_rotation_unitary
from .hilbert import (
    BasisLayout,
    DensityMatrix,
    LayoutError,
    PureState,
    embed,
    ket,
    tensor,
)

log = logging.getLogger(__name__)

ATOM1, ATOM2, ATOM3 = 0, 1, 2
THREE_ATOMS = BasisLayout.atoms(3)

PI = math.pi
FIXED_PHASE_A = PI / 4
FIXED_THETA2 = PI / 4
FIXED_PHASE_B = 2 * PI / 9

MIN_VACUUM_WEIGHT = 0.9
TRUNCATION_TOL = 1e-8


class RegimeError(RuntimeError):
    """The full model left the regime the protocol relies on."""


class PhaseMatchingError(RuntimeError):
    """The branch-phase equations have no consistent solution."""


# ---------------------------------------------------------------------------
# parameters and inputs


@dataclass(frozen=True)
class InputQubit:
    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if not (math.isfinite(abs(a)) and math.isfinite(abs(b))):
            raise ValueError("amplitudes must be finite")
        n = abs(a) ** 2 + abs(b) ** 2
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {n!r}, not 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def from_bloch(cls, theta: float, phi: float) -> "InputQubit":
        return cls(math.cos(theta / 2), complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2))

    def state(self) -> PureState:
        return PureState(BasisLayout((2,)), [self.alpha, self.beta])


@dataclass(frozen=True)
class ProtocolParams:
    """Collision durations (as lambda*t) and Ramsey angles (radians)."""

    phase_A: float
    theta1: float
    theta2: float
    phase_B: float
    phase_C: float
    theta3: float
    theta4: float
    label: str = "explicit"

    def __post_init__(self):
        for name, v in self.angles().items():
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        for name in ("phase_A", "phase_B", "phase_C"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} is a duration and must be non-negative")

    def angles(self) -> dict[str, float]:
        return {
            "phase_A": self.phase_A,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "phase_B": self.phase_B,
            "phase_C": self.phase_C,
            "theta3": self.theta3,
            "theta4": self.theta4,
        }

    @property
    def collision_phases(self) -> dict[str, float]:
        return {"A": self.phase_A, "B": self.phase_B, "C": self.phase_C}


# Alternative published values: theta1 = -pi/18, theta3 = theta4 = +pi/6.
PRINTED_PARAMS = ProtocolParams(PI / 4, -PI / 18, PI / 4, 2 * PI / 9, PI / 3, PI / 6, PI / 6, label="printed")

ZERO_PARAMS = ProtocolParams(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, label="identity")


@dataclass(frozen=True)
class Rotation:
    atom: int
    theta: float
    zone: str = ""


Step = Union[CollisionSpec, Rotation]


def schedule(p: ProtocolParams) -> tuple[Step, ...]:
    return (
        CollisionSpec((ATOM2, ATOM3), p.phase_A, "A"),
        Rotation(ATOM1, p.theta1, "R1"),
        Rotation(ATOM2, p.theta2, "R2"),
        CollisionSpec((ATOM1, ATOM2, ATOM3), p.phase_B, "B"),
        CollisionSpec((ATOM2, ATOM3), p.phase_C, "C"),
        Rotation(ATOM2, p.theta3, "R3"),
        Rotation(ATOM3, p.theta4, "R4"),
    )


def initial_state(q: InputQubit) -> PureState:
    return tensor(q.state(), ket("eg"))


# ---------------------------------------------------------------------------
# effective tier


def z_rotation(state: PureState, atom: int, theta: float) -> PureState:
    """Ramsey-zone rotation exp(-i theta (|e><e| - |g><g|)) on one atom."""
    state.layout.check_index(atom)
    if atom >= state.layout.n_atoms:
        raise LayoutError(f"factor {atom} is not an atom")
    return apply_local(state, z_rotation_unitary(theta), [atom])


def _collide(state: PureState, spec: CollisionSpec) -> PureState:
    if len(spec.atom_indices) == 2:
        return collision_two_atom(state, spec.atom_indices, spec.duration_phase)
    if len(spec.atom_indices) == 3:
        return collision_three_atom(state, spec.atom_indices, spec.duration_phase)
    raise ValueError("only two- and three-atom collisions are scheduled")


def protocol_checkpoints(q: InputQubit, p: ProtocolParams) -> dict[str, PureState]:
    """States after each stage: input, A, R1, R2, B, C, R3, R4 (the final state)."""
    psi = initial_state(q)
    out = {"input": psi}
    for step in schedule(p):
        if isinstance(step, Rotation):
            psi = z_rotation(psi, step.atom, step.theta)
            out[step.zone] = psi
        else:
            psi = _collide(psi, step)
            out[step.cavity] = psi
    return out


def run_protocol_effective(q: InputQubit, p: ProtocolParams) -> PureState:
    return protocol_checkpoints(q, p)["R4"]


def psi_plus() -> PureState:
    """Symmetric Bell state (|eg> + |ge>)/sqrt(2)."""
    return (ket("eg") + ket("ge")).scaled(1 / math.sqrt(2))


def target_state(q: InputQubit) -> PureState:
    """Optimal symmetric cloner output; clones on atoms 2 and 3, anticlone on atom 1."""
    s23, s13 = math.sqrt(2 / 3), math.sqrt(1 / 3)
    g_branch = ket("egg").scaled(s23) + tensor(ket("g"), psi_plus()).scaled(s13)
    e_branch = ket("gee").scaled(s23) + tensor(ket("e"), psi_plus()).scaled(s13)
    return g_branch.scaled(q.alpha) + e_branch.scaled(q.beta)


# ---------------------------------------------------------------------------
# phase matching

# (input basis state of atom 1, final branch component, expected magnitude)
_BRANCHES = (
    ("g", ket("egg"), math.sqrt(2 / 3)),
    ("g", tensor(ket("g"), psi_plus()), math.sqrt(1 / 3)),
    ("e", ket("gee"), math.sqrt(2 / 3)),
    ("e", tensor(ket("e"), psi_plus()), math.sqrt(1 / 3)),
)


def _branch_amplitudes(p: ProtocolParams, check_span: bool = True) -> np.ndarray:
    outs = {
        "g": run_protocol_effective(InputQubit(1, 0), p),
        "e": run_protocol_effective(InputQubit(0, 1), p),
    }
    amps = np.array([comp.inner(outs[src]) for src, comp, _ in _BRANCHES])
    if check_span:
        for src in "ge":
            rest = outs[src]
            for (s, comp, _), c in zip(_BRANCHES, amps):
                if s == src:
                    rest = rest - comp.scaled(c)
            if rest.norm() > 1e-12:
                raise PhaseMatchingError(
                    f"|{src}> branch leaves the cloner subspace (residual {rest.norm():.3e})"
                )
    return amps


def _wrap(x):
    return (np.asarray(x) + PI) % (2 * PI) - PI


def branch_phase_spread(p: ProtocolParams) -> float:
    """Largest phase difference among the four cloner branch amplitudes."""
    ph = np.angle(_branch_amplitudes(p, check_span=False))
    return float(np.max(np.abs(_wrap(ph - ph[0]))))


def _eigen_phase(generator: np.ndarray, state: PureState) -> float:
    v = state.amplitudes
    ev = float(np.vdot(v, generator @ v).real)
    if np.linalg.norm(generator @ v - ev * v) > 1e-12:
        raise PhaseMatchingError("branch component is not an eigenstate of the phase generator")
    return -ev


def solve_phase_matching(
    phase_A: float = FIXED_PHASE_A, theta2: float = FIXED_THETA2, phase_B: float = FIXED_PHASE_B
) -> ProtocolParams:
    """Choose theta1, theta3 = theta4 and phase_C so all four branches share one phase.

    The branch amplitudes are read off the actual propagators with the
    three unknowns set to zero.  Each unknown then adds a phase linear in
    itself with an integer slope given by a generator eigenvalue:

    * theta1 acts before cavity B on atom 1's input basis state;
    * theta3 = theta4 act after cavity C on atoms 2 and 3;
    * phase_C is the cavity-C collision, diagonal on the branch states.

    Requiring equal phases gives three linear equations mod 2*pi.  Among
    the lattice of solutions the one with theta1, theta3 in (-pi/2, pi/2]
    and phase_C in [0, pi) is returned.
    """
    probe = ProtocolParams(phase_A, 0.0, theta2, phase_B, 0.0, 0.0, 0.0, label="probe")
    amps = _branch_amplitudes(probe)
    for (_, _, expected), c in zip(_BRANCHES, amps):
        if abs(abs(c) - expected) > 1e-12:
            raise PhaseMatchingError(
                f"branch magnitude {abs(c):.15f} differs from {expected:.15f}; "
                "no choice of phases reaches the cloner state"
            )
    phi0 = np.angle(amps)

    z = np.diag([-1.0, 1.0]).astype(complex)  # |e><e| - |g><g|
    z23 = embed(z, ATOM2, THREE_ATOMS) + embed(z, ATOM3, THREE_ATOMS)
    h23 = effective_hamiltonian_vacuum(1.0, 3, coupled=(ATOM2, ATOM3)).matrix
    z1 = np.angle(np.diag(z_rotation_unitary(1.0)))  # phase per unit theta on |g>, |e>
    slopes = np.array(
        [
            [z1[0 if src == "g" else 1], _eigen_phase(z23, comp), _eigen_phase(h23, comp)]
            for src, comp, _ in _BRANCHES
        ]
    )
    A = slopes[1:] - slopes[0]
    r = -(phi0[1:] - phi0[0])
    if np.max(np.abs(A - np.round(A))) > 1e-12:
        raise PhaseMatchingError(f"non-integer phase slopes {A}")
    A = np.round(A)
    if abs(np.linalg.det(A)) < 0.5:
        raise PhaseMatchingError("phase equations are degenerate")
    A_inv = np.linalg.inv(A)

    candidates = []
    for k in itertools.product(range(-4, 5), repeat=3):
        t1, t3, pc = A_inv @ (r + 2 * PI * np.array(k))
        if -PI / 2 < t1 <= PI / 2 + 1e-12 and -PI / 2 < t3 <= PI / 2 + 1e-12 and -1e-12 <= pc < PI:
            candidates.append((max(pc, 0.0), t1, t3))
    if not candidates:
        raise PhaseMatchingError("no solution in the canonical parameter box")
    pc, t1, t3 = min(candidates, key=lambda c: (c[0], abs(c[1]), abs(c[2])))

    p = ProtocolParams(phase_A, float(t1), theta2, phase_B, float(pc), float(t3), float(t3), label="solver")
    spread = branch_phase_spread(p)
    if spread > 1e-12:
        raise PhaseMatchingError(f"solved parameters leave branch-phase spread {spread:.3e}")
    return p


def parameter_set(name: str) -> ProtocolParams:
    """Named parameter sets: ``solver`` or ``printed`` (alias ``paper-printed``)."""
    if name == "solver":
        return solve_phase_matching()
    if name in ("printed", "paper-printed"):
        return PRINTED_PARAMS
    raise ValueError(f"unknown parameter set {name!r}")


# ---------------------------------------------------------------------------
# full and open-system tiers


def _require_dispersive(params: PhysicalParams) -> float:
    if params.delta <= 0:
        raise ValueError("the protocol needs a positive detuning (lambda = g^2/delta > 0)")
    if params.n_max < 1:
        raise LayoutError("n_max must be >= 1")
    msg = params.regime_warning
    if msg:
        warnings.warn(msg, RegimeWarning, stacklevel=3)
    return params.lam()


@dataclass(frozen=True)
class FullRun:
    """Result of the protocol on the full atom-cavity model.

    ``state`` is the renormalized vacuum-conditioned atomic state.  The
    photon weight discarded at each cavity exit is in ``stage_leakage``;
    ``leakage`` is the total probability that some cavity was left excited.
    """

    state: PureState
    leakage: float
    stage_leakage: dict[str, float]
    stage_times: dict[str, float]
    peak_photon: float
    n_steps: int
    regime_warning: str | None = None

    @property
    def total_time(self) -> float:
        return sum(self.stage_times.values())

    def overlap(self, reference: PureState) -> float:
        """Overlap with the leaked weight counted as error: sqrt(1-leakage)*|<ref|state>|."""
        return math.sqrt(1.0 - self.leakage) * abs(reference.inner(self.state))

    def conditional_overlap(self, reference: PureState) -> float:
        return abs(reference.inner(self.state))


def _rotate_density(rho: DensityMatrix, atom: int, theta: float) -> DensityMatrix:
    d = np.diag(embed(z_rotation_unitary(theta), atom, rho.layout))
    return DensityMatrix(rho.layout, rho.matrix * np.outer(d, d.conj()))


def run_protocol_full(
    q: InputQubit, params: PhysicalParams, p: ProtocolParams, rel_tol: float = 1e-9
) -> FullRun:
    """Run the schedule with every collision integrated on atoms + cavity.

    Each cavity starts in vacuum.  Stage durations are phase/lambda.  At
    each exit the cavity is projected onto vacuum and the atomic state
    renormalized; the discarded weight is logged and reported.
    """
    lam = _require_dispersive(params)
    n_cav = params.n_max + 1
    vac = PureState(BasisLayout((n_cav,), has_cavity=True), np.eye(n_cav)[0])
    psi = initial_state(q)
    stage_leak, stage_times = {}, {}
    peak = 0.0
    n_steps = 0
    survive = 1.0

    for step in schedule(p):
        if isinstance(step, Rotation):
            psi = z_rotation(psi, step.atom, step.theta)
            continue
        t = step.duration_phase / lam
        stage_times[step.cavity] = t
        if t == 0.0:
            stage_leak[step.cavity] = 0.0
            continue

        top = 0.0
        stage_peak = 0.0

        def observe(_t, amps):
            nonlocal top, stage_peak
            pops = fock_populations(amps, n_cav)
            tot = pops.sum()
            stage_peak = max(stage_peak, float(1.0 - pops[0] / tot))
            top = max(top, float(pops[-1] / tot))

        traj = solve_schrodinger(
            tensor(psi, vac), params, 3, t, rel_tol, coupled=step.atom_indices, observer=observe
        )
        n_steps += traj.n_steps
        if top > TRUNCATION_TOL:
            raise RegimeError(
                f"cavity {step.cavity}: population {top:.3e} in the top Fock level n={params.n_max}; "
                "increase n_max"
            )
        atoms = traj.final.amplitudes.reshape(-1, n_cav)[:, 0]
        weight = float(np.vdot(atoms, atoms).real) / psi.norm() ** 2
        if weight < MIN_VACUUM_WEIGHT:
            raise RegimeError(
                f"cavity {step.cavity}: vacuum weight {weight:.4f} at exit is below {MIN_VACUUM_WEIGHT}; "
                "the dispersive regime is violated"
            )
        stage_leak[step.cavity] = 1.0 - weight
        survive *= weight
        peak = max(peak, stage_peak)
        log.info("cavity %s: renormalizing after discarding photon weight %.3e", step.cavity, 1.0 - weight)
        psi = PureState(THREE_ATOMS, atoms).normalized()

    return FullRun(psi, 1.0 - survive, stage_leak, stage_times, peak, n_steps, params.regime_warning)


@dataclass(frozen=True)
class LindbladRun:
    state: DensityMatrix
    leakage: float
    stage_leakage: dict[str, float]
    stage_times: dict[str, float]
    top_fock_population: float
    trace_drift: float
    n_steps: int
    regime_warning: str | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def total_time(self) -> float:
        return sum(self.stage_times.values())


LINDBLAD_NOTE = (
    "open-system model: single-mode cavity damping kappa*(n_th+1) D[a] + kappa*n_th D[a^dag]; "
    "chosen here to probe loss/thermal sensitivity, not prescribed by the scheme"
)


def run_protocol_lindblad(
    q: InputQubit | DensityMatrix,
    params: PhysicalParams,
    p: ProtocolParams,
    rel_tol: float = 1e-9,
    method: str = "rotating",
) -> LindbladRun:
    """Run the schedule with each collision evolved under the master equation.

    Cavities start in vacuum; thermal photons enter only through the
    n_th pumping term.  Exits are handled as on the unitary full tier
    (vacuum projection, renormalization, reported leakage), so kappa = 0
    reproduces :func:`run_protocol_full`.  The top Fock level is not a hard
    error here because thermal pumping populates it legitimately; its
    maximum is reported instead.  ``method`` selects the master-equation
    route (see :func:`cavclone.dynamics.integrate.solve_lindblad`).
    """
    lam = _require_dispersive(params)
    n_cav = params.n_max + 1
    if isinstance(q, InputQubit):
        rho = initial_state(q).to_density()
    else:
        rho = tensor_density_atoms(q)
    vac = np.zeros((n_cav, n_cav), dtype=complex)
    vac[0, 0] = 1.0
    cav_layout = BasisLayout.atoms(3, params.n_max)
    stage_leak, stage_times = {}, {}
    top = 0.0
    drift = 0.0
    n_steps = 0
    survive = 1.0

    for step in schedule(p):
        if isinstance(step, Rotation):
            rho = _rotate_density(rho, step.atom, step.theta)
            continue
        t = step.duration_phase / lam
        stage_times[step.cavity] = t
        if t == 0.0:
            stage_leak[step.cavity] = 0.0
            continue
        full = DensityMatrix(cav_layout, np.kron(rho.matrix, vac))
        traj = solve_lindblad(full, params, 3, t, rel_tol, coupled=step.atom_indices, method=method)
        n_steps += traj.n_steps
        drift = max(drift, traj.trace_drift)
        m = traj.final.matrix.reshape(8, n_cav, 8, n_cav)
        top = max(top, float(np.einsum("anan->n", m).real[-1]))
        block = m[:, 0, :, 0]
        weight = float(np.trace(block).real)
        if weight < MIN_VACUUM_WEIGHT:
            raise RegimeError(
                f"cavity {step.cavity}: vacuum weight {weight:.4f} at exit is below {MIN_VACUUM_WEIGHT}"
            )
        stage_leak[step.cavity] = 1.0 - weight
        survive *= weight
        block = block / weight
        rho = DensityMatrix(THREE_ATOMS, 0.5 * (block + block.conj().T))

    if top > TRUNCATION_TOL:
        log.warning("top Fock level reached population %.3e; consider a larger n_max", top)
    return LindbladRun(
        rho, 1.0 - survive, stage_leak, stage_times, top, drift, n_steps, params.regime_warning, (LINDBLAD_NOTE,)
    )


def tensor_density_atoms(rho_in: DensityMatrix) -> DensityMatrix:
    """Mixed input on atom 1 combined with |e><e| (atom 2) and |g><g| (atom 3)."""
    if rho_in.layout.factor_dims != (2,):
        raise LayoutError("input density matrix must be a single qubit")
    anc = ket("eg").to_density()
    return DensityMatrix(THREE_ATOMS, np.kron(rho_in.matrix, anc.matrix))
