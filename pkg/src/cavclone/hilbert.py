"""Composite Hilbert-space bookkeeping for atoms coupled to one cavity mode.

Factor ordering is fixed throughout the package: atoms come first, atom 1
being the leftmost (most significant) factor, and the cavity mode, when
present, is the rightmost factor.  Inside an atom factor index 0 is the
ground state |g> and index 1 the excited state |e>; inside the cavity factor
index n is the Fock state |n>.  With three atoms the basis index of
|x1 x2 x3> is therefore the binary number x1 x2 x3 (g=0, e=1).

In code, factors are addressed by 0-based position, so "atom 1" is factor 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10

G, E = 0, 1


class LayoutError(ValueError):
    """Raised when states/operators live on incompatible or invalid layouts."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BasisLayout:
    """Ordered list of tensor-factor dimensions.

    ``has_cavity`` marks the last factor as the cavity mode; a mode truncated
    at one photon is otherwise indistinguishable from an atom.
    """

    factor_dims: tuple[int, ...]
    has_cavity: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims:
            raise LayoutError("layout needs at least one factor")
        if any(d < 2 for d in dims):
            raise LayoutError(f"all factor dimensions must be >= 2, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @classmethod
    def atoms(cls, n_atoms: int, n_max: int | None = None) -> "BasisLayout":
        """Layout of ``n_atoms`` qubits, plus a cavity truncated at ``n_max`` photons."""
        dims = [2] * n_atoms
        if n_max is not None:
            dims.append(n_max + 1)
        return cls(tuple(dims), has_cavity=n_max is not None)

    @property
    def n_atoms(self) -> int:
        return self.n_factors - int(self.has_cavity)

    @property
    def dim(self) -> int:
        return int(np.prod(self.factor_dims))

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def __add__(self, other: "BasisLayout") -> "BasisLayout":
        if self.has_cavity:
            raise LayoutError("the cavity factor must stay rightmost")
        return BasisLayout(self.factor_dims + other.factor_dims, other.has_cavity)

    def check_index(self, k: int) -> None:
        if not 0 <= k < self.n_factors:
            raise LayoutError(f"factor index {k} out of range for layout {self.factor_dims}")

    def index(self, digits: Sequence[int]) -> int:
        """Flat basis index of the product state with the given per-factor digits."""
        if len(digits) != self.n_factors:
            raise LayoutError("one digit per factor required")
        return int(np.ravel_multi_index(tuple(digits), self.factor_dims))


@dataclass(frozen=True, eq=False)
class PureState:
    """State vector over a composite basis.

    Normalization is not enforced here: vacuum projections and test vectors
    are legitimately sub-normalized.  Norm-preserving operations keep the
    norm to round-off.
    """

    layout: BasisLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape[0] != self.layout.dim:
            raise LayoutError(
                f"{amps.shape[0]} amplitudes do not match layout dimension {self.layout.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, layout: BasisLayout, digits: Sequence[int]) -> "PureState":
        amps = np.zeros(layout.dim, dtype=complex)
        amps[layout.index(digits)] = 1.0
        return cls(layout, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.layout, self.amplitudes / n)

    def scaled(self, c: complex) -> "PureState":
        return PureState(self.layout, c * self.amplitudes)

    def __add__(self, other: "PureState") -> "PureState":
        _require_same_layout(self.layout, other.layout)
        return PureState(self.layout, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "PureState") -> "PureState":
        _require_same_layout(self.layout, other.layout)
        return PureState(self.layout, self.amplitudes - other.amplitudes)

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        _require_same_layout(self.layout, other.layout)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per factor (read-only)."""
        return self.amplitudes.reshape(self.layout.factor_dims)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive, unit-trace operator."""

    layout: BasisLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = self.layout.dim
        if m.shape != (d, d):
            raise LayoutError(f"matrix shape {m.shape} does not match layout dimension {d}")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian (residual {herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(m).min()
        if lo < EIGENVALUE_FLOOR:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, layout: BasisLayout) -> "DensityMatrix":
        return cls(layout, np.eye(layout.dim) / layout.dim)

    def populations(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense Hermitian matrix tagged with its basis layout.

    Hamiltonians carry ``units="rad/s"``; observables are dimensionless.
    The Hermiticity check is relative to the largest matrix element so that
    rad/s-scale Hamiltonians are held to the same 1e-12 standard.
    """

    layout: BasisLayout
    matrix: np.ndarray
    units: str = "rad/s"

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = self.layout.dim
        if m.shape != (d, d):
            raise LayoutError(f"matrix shape {m.shape} does not match layout dimension {d}")
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITIAN_TOL * scale:
            raise ValueError(f"operator not Hermitian (residual {herm:.3e})")
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, psi: PureState) -> PureState:
        _require_same_layout(self.layout, psi.layout)
        return PureState(self.layout, self.matrix @ psi.amplitudes)

    def expectation(self, psi: PureState) -> float:
        _require_same_layout(self.layout, psi.layout)
        return float(np.vdot(psi.amplitudes, self.matrix @ psi.amplitudes).real)


def _require_same_layout(a: BasisLayout, b: BasisLayout) -> None:
    if a != b:
        raise LayoutError(f"layout mismatch: {a.factor_dims} vs {b.factor_dims}")


# ---------------------------------------------------------------------------
# single-factor helpers


def ket(digits: str | Sequence[int], layout: BasisLayout | None = None) -> PureState:
    """Product basis state from per-factor digits.

    ``ket("egg")`` is |e1 g2 g3> on three atoms; integers may be used for
    cavity factors, e.g. ``ket([1, 0, 2], BasisLayout((2, 2, 4)))``.
    """
    if isinstance(digits, str):
        digits = [{"g": G, "e": E}[c] for c in digits]
    if layout is None:
        layout = BasisLayout((2,) * len(digits))
    return PureState.basis(layout, digits)


def embed(op: np.ndarray, factor: int, layout: BasisLayout) -> np.ndarray:
    """Lift a single-factor matrix onto the full layout (identity elsewhere)."""
    layout.check_index(factor)
    if op.shape != (layout.factor_dims[factor],) * 2:
        raise LayoutError("operator does not match factor dimension")
    out = np.ones((1, 1), dtype=complex)
    for k, d in enumerate(layout.factor_dims):
        out = np.kron(out, op if k == factor else np.eye(d))
    return out


# ---------------------------------------------------------------------------
# core operations


def tensor(a: PureState, b: PureState) -> PureState:
    """Kronecker product with ``a``'s factors most significant."""
    return PureState(a.layout + b.layout, np.kron(a.amplitudes, b.amplitudes))


def tensor_density(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(a.layout + b.layout, np.kron(a.matrix, b.matrix))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Trace out every factor not listed in ``keep``.

    Kept factors retain their original relative order regardless of the
    order in which ``keep`` lists them.
    """
    layout = rho.layout
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise LayoutError("keep must name at least one factor")
    for k in keep:
        layout.check_index(k)
    dims = layout.factor_dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # einsum labels: row axes a.., column axes A..; traced factors share a label
    rows = [chr(ord("a") + i) for i in range(n)]
    cols = [chr(ord("A") + i) if i in keep else rows[i] for i in range(n)]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    kdim = int(np.prod([dims[i] for i in keep]))
    red = red.reshape(kdim, kdim)
    red = 0.5 * (red + red.conj().T)
    cav = layout.has_cavity and keep[-1] == n - 1
    return DensityMatrix(BasisLayout(tuple(dims[i] for i in keep), cav), red)


def fidelity_pure(rho: DensityMatrix, psi: PureState) -> float:
    """<psi|rho|psi> for a pure reference state."""
    _require_same_layout(rho.layout, psi.layout)
    v = psi.amplitudes
    return float(np.vdot(v, rho.matrix @ v).real)


def overlap_up_to_global_phase(psi: PureState, phi: PureState) -> float:
    """|<psi|phi>|, insensitive to a unit-modulus factor on either argument."""
    return abs(psi.inner(phi))


def bloch_state(theta: float, phi: float) -> PureState:
    """cos(theta/2)|g> + exp(i phi) sin(theta/2)|e>."""
    return PureState(
        BasisLayout((2,)), [np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)]
    )
