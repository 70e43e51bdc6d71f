"""Propagators for time-independent Hamiltonians.

The closed-form collision unitaries are the production path; ``evolve_exact``
(eigendecomposition) serves as a generic reference.  No global phase is
ever dropped.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..hilbert import HermitianOperator, LayoutError, PureState, _require_same_layout


def evolve_exact(state: PureState, H: HermitianOperator, t: float) -> PureState:
    """Apply exp(-i H t) via a Hermitian eigendecomposition."""
    _require_same_layout(state.layout, H.layout)
    w, v = np.linalg.eigh(H.matrix)
    c = v.conj().T @ state.amplitudes
    return PureState(state.layout, v @ (np.exp(-1j * w * t) * c))


def apply_local(state: PureState, unitary: np.ndarray, factors: Sequence[int]) -> PureState:
    """Act with ``unitary`` on the listed factors (in that order), identity elsewhere."""
    layout = state.layout
    factors = [int(f) for f in factors]
    if len(set(factors)) != len(factors):
        raise LayoutError(f"factors must be distinct, got {factors}")
    for f in factors:
        layout.check_index(f)
    sub = [layout.factor_dims[f] for f in factors]
    d = int(np.prod(sub))
    if unitary.shape != (d, d):
        raise LayoutError(f"unitary of shape {unitary.shape} does not act on factors {factors}")
    t = np.moveaxis(state.tensor_view(), factors, list(range(len(factors))))
    shape = t.shape
    t = (unitary @ t.reshape(d, -1)).reshape(shape)
    t = np.moveaxis(t, list(range(len(factors))), factors)
    return PureState(layout, t.reshape(-1))


def two_atom_collision_unitary(phase: float) -> np.ndarray:
    """4x4 closed form in the (gg, ge, eg, ee) basis for lambda*t = ``phase``."""
    c, s = np.cos(phase), np.sin(phase)
    e1 = np.exp(-1j * phase)
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = 1.0
    u[3, 3] = np.exp(-2j * phase)
    # |eg> -> e^{-i phase}(cos|eg> - i sin|ge>), and the mirror image
    u[2, 2] = u[1, 1] = e1 * c
    u[1, 2] = u[2, 1] = -1j * e1 * s
    return u


def three_atom_collision_unitary(phase: float) -> np.ndarray:
    """8x8 closed form for three atoms sharing one vacuum cavity.

    The effective Hamiltonian is lam*S+S-, so each excitation sector splits
    into its totally symmetric state and the two states orthogonal to it:

    ============  =========  ==========
    excitations   symmetric  orthogonal
    ============  =========  ==========
    0             0          -
    1             3 lam      0
    2             4 lam      lam
    3             3 lam      -
    ============  =========  ==========
    """
    u = np.zeros((8, 8), dtype=complex)
    u[0, 0] = 1.0
    u[7, 7] = np.exp(-3j * phase)
    one = [0b100, 0b010, 0b001]
    two = [0b011, 0b101, 0b110]
    for idx, e_sym, e_rest in ((one, 3.0, 0.0), (two, 4.0, 1.0)):
        w = np.full(3, 1 / np.sqrt(3))
        proj = np.outer(w, w)
        block = np.exp(-1j * e_sym * phase) * proj + np.exp(-1j * e_rest * phase) * (np.eye(3) - proj)
        u[np.ix_(idx, idx)] = block
    return u


def _check_atom(state: PureState, f: int) -> None:
    state.layout.check_index(f)
    if state.layout.factor_dims[f] != 2:
        raise LayoutError(f"factor {f} is not an atom")


def collision_two_atom(state: PureState, atoms: tuple[int, int], phase: float) -> PureState:
    """Cavity-assisted collision of two atoms for lambda*t = ``phase``."""
    i, j = atoms
    if i == j:
        raise LayoutError("the two colliding atoms must differ")
    for f in (i, j):
        _check_atom(state, f)
    return apply_local(state, two_atom_collision_unitary(phase), (i, j))


def collision_three_atom(state: PureState, atoms: tuple[int, int, int], phase: float) -> PureState:
    """Cavity-assisted collision of three atoms for lambda*t = ``phase``."""
    if len(set(atoms)) != 3:
        raise LayoutError(f"three distinct atoms required, got {atoms}")
    for f in atoms:
        _check_atom(state, f)
    return apply_local(state, three_atom_collision_unitary(phase), atoms)


def z_rotation_unitary(theta: float) -> np.ndarray:
    """exp(-i theta (|e><e| - |g><g|)): |g> picks up e^{+i theta}, |e> e^{-i theta}."""
    return np.diag([np.exp(1j * theta), np.exp(-1j * theta)])
