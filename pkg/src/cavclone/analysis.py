"""Clone fidelities, sweeps and the timing budget.

Infidelity between two runs is ``1 - overlap**2`` with the phase-insensitive
overlap.  For full-model runs the overlap counts photon weight discarded
at cavity exits as error (see :meth:`cavclone.protocol.FullRun.overlap`);
the vacuum-conditioned value is reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics.hamiltonians import PhysicalParams
from .hilbert import DensityMatrix, PureState, fidelity_pure, partial_trace
from .protocol import (
    ATOM2,
    ATOM3,
    LINDBLAD_NOTE,
    InputQubit,
    ProtocolParams,
    run_protocol_effective,
    run_protocol_full,
    run_protocol_lindblad,
    schedule,
    solve_phase_matching,
    target_state,
)

DEGRADATION_BENCHMARK = 0.05
DEGRADATION_NOTE = (
    "a fidelity drop <= 0.05 at kappa = 0.1*lambda is a benchmark defined by this tool; "
    "no published figure quantifies the loss tolerance"
)

# The six Bloch-axis states form a spherical 3-design: their mean fidelity
# equals the uniform average over all pure inputs.
OCTAHEDRON = (
    (0.0, 0.0),
    (math.pi, 0.0),
    (math.pi / 2, 0.0),
    (math.pi / 2, math.pi),
    (math.pi / 2, math.pi / 2),
    (math.pi / 2, 3 * math.pi / 2),
)
REFERENCE_INPUT = (math.pi / 2, 0.0)


@dataclass(frozen=True)
class CloneReport:
    fidelity_clone2: float
    fidelity_clone3: float
    target_overlap: float
    leakage: float = 0.0
    stage_times: dict[str, float] = field(default_factory=dict)
    parameter_set_label: str = ""
    tier: str = "effective"

    @property
    def total_time(self) -> float:
        return sum(self.stage_times.values())


def clone_report(
    q: InputQubit,
    final: PureState | DensityMatrix,
    *,
    leakage: float = 0.0,
    stage_times: dict[str, float] | None = None,
    label: str = "",
    tier: str = "effective",
) -> CloneReport:
    """Fidelity of atoms 2 and 3 to the input, and overlap with the cloner target.

    A pure ``final`` is normalized first.  ``target_overlap`` includes the
    factor sqrt(1 - leakage); for a mixed state it is sqrt(<target|rho|target>).
    """
    if isinstance(final, PureState):
        final = final.normalized()
        rho = final.to_density()
        ov = abs(target_state(q).inner(final))
    else:
        rho = final
        ov = math.sqrt(max(fidelity_pure(rho, target_state(q)), 0.0))
    inp = q.state()
    return CloneReport(
        fidelity_clone2=fidelity_pure(partial_trace(rho, [ATOM2]), inp),
        fidelity_clone3=fidelity_pure(partial_trace(rho, [ATOM3]), inp),
        target_overlap=math.sqrt(1.0 - leakage) * ov,
        leakage=leakage,
        stage_times=dict(stage_times or {}),
        parameter_set_label=label,
        tier=tier,
    )


def stage_times(p: ProtocolParams, lam: float) -> dict[str, float]:
    return {name: phase / lam for name, phase in p.collision_phases.items()}


def effective_report(q: InputQubit, p: ProtocolParams, lam: float | None = None) -> CloneReport:
    times = stage_times(p, lam) if lam else {}
    return clone_report(q, run_protocol_effective(q, p), stage_times=times, label=p.label)


# ---------------------------------------------------------------------------
# universality


def bloch_grid(n_theta: int, n_phi: int) -> list[tuple[float, float]]:
    """Uniform polar/azimuthal grid; poles included, phi in [0, 2*pi)."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid sizes must be >= 1")
    thetas = [0.0] if n_theta == 1 else list(np.linspace(0.0, math.pi, n_theta))
    phis = [2 * math.pi * j / n_phi for j in range(n_phi)]
    return [(float(t), float(f)) for t in thetas for f in phis]


@dataclass(frozen=True)
class SweepRow:
    index: int
    theta: float
    phi: float
    report: CloneReport


@dataclass(frozen=True)
class SweepSummary:
    fidelity_min: float
    fidelity_max: float
    fidelity_mean: float
    overlap_mean: float

    @property
    def spread(self) -> float:
        return self.fidelity_max - self.fidelity_min


@dataclass(frozen=True)
class UniversalitySweep:
    rows: tuple[SweepRow, ...]
    summary: SweepSummary


def universality_sweep(grid: Sequence[tuple[float, float]], p: ProtocolParams) -> UniversalitySweep:
    """Effective-tier clone report at every (theta, phi) of ``grid``, in grid order."""
    if not grid:
        raise ValueError("grid must not be empty")
    rows = []
    for i, (theta, phi) in enumerate(grid):
        q = InputQubit.from_bloch(theta, phi)
        rows.append(SweepRow(i, theta, phi, effective_report(q, p)))
    fids = np.array([[r.report.fidelity_clone2, r.report.fidelity_clone3] for r in rows])
    ovs = np.array([r.report.target_overlap for r in rows])
    summary = SweepSummary(float(fids.min()), float(fids.max()), float(fids.mean()), float(ovs.mean()))
    return UniversalitySweep(tuple(rows), summary)


# ---------------------------------------------------------------------------
# dispersive scaling


@dataclass(frozen=True)
class ScalingRow:
    delta_over_g: float
    infidelity: float
    conditional_infidelity: float
    leakage: float
    leakage_total: float
    peak_photon: float


def dispersive_scaling_study(
    delta_over_g: Sequence[float],
    p: ProtocolParams | None = None,
    q: InputQubit | None = None,
    *,
    g: float = 1.0,
    n_max: int = 3,
    rel_tol: float = 1e-9,
) -> list[ScalingRow]:
    """Full-model vs effective-model infidelity at a fixed protocol, per detuning.

    ``leakage`` is the largest photon weight left in any one cavity;
    ``leakage_total`` the probability that any cavity was left excited.
    """
    if any(r < 5 for r in delta_over_g):
        raise ValueError("delta/g entries must be >= 5")
    p = p or solve_phase_matching()
    q = q or InputQubit.from_bloch(*REFERENCE_INPUT)
    ref = run_protocol_effective(q, p)
    rows = []
    for r in delta_over_g:
        run = run_protocol_full(q, PhysicalParams(g=g, delta=r * g, n_max=n_max), p, rel_tol)
        rows.append(
            ScalingRow(
                delta_over_g=float(r),
                infidelity=1.0 - run.overlap(ref) ** 2,
                conditional_infidelity=1.0 - run.conditional_overlap(ref) ** 2,
                leakage=max(run.stage_leakage.values()),
                leakage_total=run.leakage,
                peak_photon=run.peak_photon,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# open system


@dataclass(frozen=True)
class DecoherenceRow:
    kappa_over_lambda: float
    n_th: float
    fidelity_clone2: float
    fidelity_clone3: float
    fidelity_min: float
    leakage: float
    trace_drift: float
    top_fock: float

    @property
    def fidelity(self) -> float:
        return 0.5 * (self.fidelity_clone2 + self.fidelity_clone3)


@dataclass(frozen=True)
class DecoherenceStudy:
    rows: tuple[DecoherenceRow, ...]
    unitary_fidelity: float
    delta_over_g: float
    notes: tuple[str, ...]


def decoherence_study(
    kappa_over_lambda: Sequence[float],
    n_th: Sequence[float] = (0.0,),
    p: ProtocolParams | None = None,
    *,
    delta_over_g: float = 20.0,
    g: float = 1.0,
    n_max: int = 3,
    inputs: Sequence[tuple[float, float]] = OCTAHEDRON,
    rel_tol: float = 1e-9,
) -> DecoherenceStudy:
    """Master-equation clone fidelities, averaged over ``inputs``, on a (kappa, n_th) grid.

    Rows are ordered with n_th outermost.  ``unitary_fidelity`` is the same
    average from the closed full model, the kappa = 0 reference.
    ``top_fock`` is the largest population left in the highest Fock level.
    """
    if any(k < 0 for k in kappa_over_lambda) or any(n < 0 for n in n_th):
        raise ValueError("rates must be non-negative")
    p = p or solve_phase_matching()
    qs = [InputQubit.from_bloch(*tp) for tp in inputs]
    base = PhysicalParams(g=g, delta=delta_over_g * g, n_max=n_max)
    lam = base.lam()

    unitary = []
    for q in qs:
        run = run_protocol_full(q, base, p, rel_tol)
        rep = clone_report(q, run.state)
        unitary.append(0.5 * (rep.fidelity_clone2 + rep.fidelity_clone3))

    rows = []
    for nt in n_th:
        for k in kappa_over_lambda:
            params = PhysicalParams(g=g, delta=delta_over_g * g, n_max=n_max, kappa=k * lam, n_th=nt)
            f2, f3, leak, drift, top = [], [], [], 0.0, 0.0
            for q in qs:
                run = run_protocol_lindblad(q, params, p, rel_tol)
                rep = clone_report(q, run.state)
                f2.append(rep.fidelity_clone2)
                f3.append(rep.fidelity_clone3)
                leak.append(run.leakage)
                drift = max(drift, run.trace_drift)
                top = max(top, run.top_fock_population)
            rows.append(
                DecoherenceRow(
                    kappa_over_lambda=float(k),
                    n_th=float(nt),
                    fidelity_clone2=float(np.mean(f2)),
                    fidelity_clone3=float(np.mean(f3)),
                    fidelity_min=float(min(f2 + f3)),
                    leakage=float(np.mean(leak)),
                    trace_drift=drift,
                    top_fock=top,
                )
            )
    return DecoherenceStudy(tuple(rows), float(np.mean(unitary)), delta_over_g, (LINDBLAD_NOTE, DEGRADATION_NOTE))


# ---------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True)
class FeasibilityBudget:
    """Experimental numbers: g/2pi in Hz, delta in units of g, lifetimes in seconds."""

    g_hz: float = 50e3
    delta_over_g: float = 10.0
    radiative_time: float = 3e-2
    photon_lifetime: float = 1e-3

    def __post_init__(self):
        for name in ("g_hz", "delta_over_g", "radiative_time", "photon_lifetime"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class FeasibilityReport:
    g: float
    delta: float
    lam: float
    interaction_scale: float
    stage_times: dict[str, float]
    total_time: float
    ratio_radiative: float
    ratio_photon: float
    passes: bool


def feasibility_report(budget: FeasibilityBudget, p: ProtocolParams) -> FeasibilityReport:
    """Stage durations phase/lambda against the atomic and cavity lifetimes.

    ``interaction_scale`` is pi*delta/g**2, the characteristic collision time.
    """
    g = 2 * math.pi * budget.g_hz
    delta = budget.delta_over_g * g
    lam = g * g / delta
    times = stage_times(p, lam)
    total = sum(times.values())
    return FeasibilityReport(
        g=g,
        delta=delta,
        lam=lam,
        interaction_scale=math.pi * delta / g**2,
        stage_times=times,
        total_time=total,
        ratio_radiative=total / budget.radiative_time,
        ratio_photon=total / budget.photon_lifetime,
        passes=total < min(budget.radiative_time, budget.photon_lifetime),
    )


__all__ = [
    "CloneReport",
    "DecoherenceRow",
    "DecoherenceStudy",
    "FeasibilityBudget",
    "FeasibilityReport",
    "ScalingRow",
    "UniversalitySweep",
    "bloch_grid",
    "clone_report",
    "decoherence_study",
    "dispersive_scaling_study",
    "effective_report",
    "feasibility_report",
    "schedule",
    "universality_sweep",
]
