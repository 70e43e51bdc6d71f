"""Hamiltonians at the three modeling tiers.

* full: time-dependent dispersive coupling of N atoms to one detuned mode,
  ``g sum_j (exp(-i delta t) a^dag s-_j + exp(i delta t) a s+_j)``;
* general effective: the coarse-grained form with cavity photon-number
  dependent Stark shifts and a cavity-mediated exchange coupling;
* vacuum effective: the same with the mode in vacuum, acting on atoms only.

The exchange sum over j != k runs over both ordered pairs, so each pair
(j, k) contributes ``s+_j s-_k + s-_j s+_k``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..hilbert import BasisLayout, HermitianOperator, LayoutError, embed

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.T.copy()
EXCITED = np.diag([0.0, 1.0]).astype(complex)
GROUND = np.diag([1.0, 0.0]).astype(complex)

REGIME_MARGIN = 10.0


class RegimeWarning(UserWarning):
    """Parameters outside the dispersive regime the effective model assumes."""


@dataclass(frozen=True)
class PhysicalParams:
    """Cavity-QED parameters. Rates in rad/s.

    ``kappa`` is the cavity field decay rate and ``n_th`` its thermal
    occupation; both only matter for the open-system tier.
    """

    g: float
    delta: float
    n_max: int = 3
    kappa: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"coupling g must be positive, got {self.g}")
        if self.kappa < 0 or self.n_th < 0:
            raise ValueError("kappa and n_th must be non-negative")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError("n_max must be a non-negative integer")

    def lam(self) -> float:
        """Effective exchange rate g**2/delta."""
        return self.g**2 / self.delta

    @property
    def dispersive_ok(self) -> bool:
        return abs(self.delta) >= REGIME_MARGIN * self.g * math.sqrt(self.n_max + 1)

    @property
    def regime_warning(self) -> str | None:
        if self.dispersive_ok:
            return None
        return (
            f"delta/g = {self.delta / self.g:.3g} is below "
            f"{REGIME_MARGIN:g}*sqrt(n_max+1) = {REGIME_MARGIN * math.sqrt(self.n_max + 1):.3g}; "
            "the dispersive approximation may be poor"
        )

    def warn_if_outside_regime(self) -> None:
        msg = self.regime_warning
        if msg:
            warnings.warn(msg, RegimeWarning, stacklevel=3)


@dataclass(frozen=True)
class CollisionSpec:
    """One cavity-assisted collision: which atoms take part and for how long (in units of lambda*t)."""

    atom_indices: tuple[int, ...]
    duration_phase: float
    cavity: str = ""

    def __post_init__(self):
        atoms = tuple(int(a) for a in self.atom_indices)
        if len(set(atoms)) != len(atoms):
            raise ValueError(f"collision atoms must be distinct, got {atoms}")
        if len(atoms) < 2:
            raise ValueError("a collision needs at least two atoms")
        if self.duration_phase < 0:
            raise ValueError("duration_phase must be non-negative")
        object.__setattr__(self, "atom_indices", atoms)


def _atom_list(n_atoms: int, coupled: Sequence[int] | None) -> list[int]:
    atoms = list(range(n_atoms)) if coupled is None else [int(j) for j in coupled]
    for j in atoms:
        if not 0 <= j < n_atoms:
            raise LayoutError(f"atom index {j} out of range for {n_atoms} atoms")
    if len(set(atoms)) != len(atoms):
        raise LayoutError("coupled atoms must be distinct")
    return atoms


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def cavity_layout(n_atoms: int, n_max: int) -> BasisLayout:
    if n_max < 1:
        raise LayoutError("n_max must be >= 1 to represent a photon")
    return BasisLayout.atoms(n_atoms, n_max)


def lowering_coupling(params: PhysicalParams, n_atoms: int, coupled: Sequence[int] | None = None) -> np.ndarray:
    """``g sum_j a^dag s-_j``: the part of the full Hamiltonian carrying exp(-i delta t)."""
    layout = cavity_layout(n_atoms, params.n_max)
    adag = embed(annihilation(params.n_max).conj().T, n_atoms, layout)
    x = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j in _atom_list(n_atoms, coupled):
        x += adag @ embed(SIGMA_MINUS, j, layout)
    return params.g * x


def full_hamiltonian(
    params: PhysicalParams, n_atoms: int, t: float, coupled: Sequence[int] | None = None
) -> HermitianOperator:
    """Interaction-picture atom-cavity Hamiltonian at time ``t`` (seconds).

    ``coupled`` restricts the sum to a subset of atoms; the others are
    spectators (identity).
    """
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    x = lowering_coupling(params, n_atoms, coupled)
    ph = np.exp(-1j * params.delta * t)
    return HermitianOperator(cavity_layout(n_atoms, params.n_max), ph * x + np.conj(ph) * x.conj().T)


def _exchange(layout: BasisLayout, atoms: Sequence[int]) -> np.ndarray:
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j in atoms:
        for k in atoms:
            if j != k:
                h += embed(SIGMA_PLUS, j, layout) @ embed(SIGMA_MINUS, k, layout)
    return h


def effective_hamiltonian_general(
    params: PhysicalParams, n_atoms: int, coupled: Sequence[int] | None = None
) -> HermitianOperator:
    """Coarse-grained Hamiltonian including the cavity factor.

    ``a a^dag`` is represented as ``N + 1`` on the truncated mode rather than
    as the product of truncated matrices, which would zero the top level.
    """
    layout = cavity_layout(n_atoms, params.n_max)
    atoms = _atom_list(n_atoms, coupled)
    n = np.diag(np.arange(params.n_max + 1)).astype(complex)
    num = embed(n, n_atoms, layout)
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j in atoms:
        h += embed(EXCITED, j, layout) @ (num + np.eye(layout.dim))
        h -= embed(GROUND, j, layout) @ num
    h += _exchange(layout, atoms)
    return HermitianOperator(layout, params.lam() * h)


def effective_hamiltonian_vacuum(
    lam: float, n_atoms: int, coupled: Sequence[int] | None = None
) -> HermitianOperator:
    """Vacuum-reduced effective Hamiltonian on atoms only.

    Equals ``lam * S+ S-`` for the collective lowering operator S- of the
    coupled atoms.
    """
    if n_atoms < 2:
        raise ValueError("the exchange coupling needs at least two atoms")
    atoms = _atom_list(n_atoms, coupled)
    if len(atoms) < 2:
        raise ValueError("the exchange coupling needs at least two coupled atoms")
    layout = BasisLayout.atoms(n_atoms)
    h = _exchange(layout, atoms)
    for j in atoms:
        h += embed(EXCITED, j, layout)
    return HermitianOperator(layout, lam * h)


def excitation_number(layout: BasisLayout, n_atoms: int) -> HermitianOperator:
    """Excited-atom count, plus a^dag a when the layout has a cavity factor."""
    op = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j in range(n_atoms):
        op += embed(EXCITED, j, layout)
    if layout.n_factors == n_atoms + 1:
        d = layout.factor_dims[-1]
        op += embed(np.diag(np.arange(d)).astype(complex), n_atoms, layout)
    return HermitianOperator(layout, op, units="")


def photon_number(layout: BasisLayout) -> HermitianOperator:
    d = layout.factor_dims[-1]
    return HermitianOperator(
        layout, embed(np.diag(np.arange(d)).astype(complex), layout.n_factors - 1, layout), units=""
    )
