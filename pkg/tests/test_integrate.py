import math

import numpy as np
import pytest
from scipy.linalg import expm

from cavclone.dynamics.hamiltonians import (
    PhysicalParams,
    annihilation,
    cavity_layout,
    lowering_coupling,
)
from cavclone.dynamics.integrate import (
    IntegrationError,
    evolve_lindblad,
    evolve_time_dependent,
    max_photon_population,
    photon_population,
    solve_lindblad,
    solve_schrodinger,
    step_ceiling,
)
from cavclone.hilbert import BasisLayout, DensityMatrix, PureState, embed, fidelity_pure, ket

from conftest import random_density, random_pure

EQ7 = (ket("eg") + ket("ge").scaled(-1j)).scaled(1 / math.sqrt(2))
# measured: unconditional vacuum-block overlap with (|eg> - i|ge>)/sqrt(2), delta = 20 g, rel_tol 1e-10
TWO_ATOM_OVERLAP_20G = 0.9950664


def rotating_frame_exact(psi: PureState, params: PhysicalParams, n_atoms: int, t: float) -> np.ndarray:
    """Closed-system oracle: exp(-i delta t N) exp(-i (X + X^dag - delta N) t) psi."""
    lay = psi.layout
    x = lowering_coupling(params, n_atoms)
    n = embed(np.diag(np.arange(params.n_max + 1)).astype(complex), n_atoms, lay)
    w, v = np.linalg.eigh(x + x.conj().T - params.delta * n)
    rot = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi.amplitudes))
    return np.exp(-1j * params.delta * t * np.diag(n).real) * rot


def vacuum_block(state: PureState, n_cav: int) -> PureState:
    atoms = state.amplitudes.reshape(-1, n_cav)[:, 0]
    return PureState(BasisLayout((2,) * int(round(math.log2(atoms.size)))), atoms)


def test_step_ceiling():
    assert step_ceiling(PhysicalParams(1.0, 20.0)) == pytest.approx(2 * math.pi / 1000)
    assert step_ceiling(PhysicalParams(1.0, 0.0, n_max=3)) == pytest.approx(2 * math.pi / 100)


def test_no_coupling_is_identity(rng):
    p = PhysicalParams(g=1.0, delta=20.0)
    psi = random_pure(rng, cavity_layout(2, 3))
    out = solve_schrodinger(psi, p, 2, 7.0, 1e-10, coupled=()).final
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-14)


def test_resonant_rabi_transfer():
    g = 1.0
    p = PhysicalParams(g=g, delta=0.0, n_max=2)
    lay = cavity_layout(1, 2)
    out = evolve_time_dependent(PureState.basis(lay, [1, 0]), p, 1, math.pi / (2 * g), 1e-10)
    assert abs(PureState.basis(lay, [0, 1]).inner(out)) == pytest.approx(1.0, abs=1e-9)


def test_resonant_rabi_follows_cosine():
    p = PhysicalParams(g=1.0, delta=0.0, n_max=1)
    lay = cavity_layout(1, 1)
    times = np.linspace(0, math.pi, 21)
    traj = solve_schrodinger(PureState.basis(lay, [1, 0]), p, 1, math.pi, 1e-10, sample_times=times)
    pops = [photon_population(s) for s in traj.states]
    np.testing.assert_allclose(pops, np.sin(times) ** 2, atol=1e-8)
    assert max_photon_population(traj.states) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("delta", [0.0, 5.0, 20.0])
def test_dop853_against_rotating_frame_oracle(rng, delta):
    p = PhysicalParams(g=1.0, delta=delta, n_max=3)
    lay = cavity_layout(3, 3)
    psi = random_pure(rng, lay)
    t = 3.7
    out = evolve_time_dependent(psi, p, 3, t, 1e-11)
    assert np.max(np.abs(out.amplitudes - rotating_frame_exact(psi, p, 3, t))) <= 1e-8


def test_two_atom_dispersive_collision_overlap():
    p = PhysicalParams(g=1.0, delta=20.0, n_max=3)
    lay = cavity_layout(2, 3)
    t = (math.pi / 4) / p.lam()
    times = np.linspace(0, t, 400)
    traj = solve_schrodinger(PureState.basis(lay, [1, 0, 0]), p, 2, t, 1e-10, sample_times=times)
    ov = abs(EQ7.inner(vacuum_block(traj.final, 4)))
    assert ov >= 0.99
    assert ov == pytest.approx(TWO_ATOM_OVERLAP_20G, abs=1e-6)
    assert max_photon_population(traj.states) <= 10 * (p.g / p.delta) ** 2
    assert traj.norm_drift <= 1e-8


def test_observer_sees_every_step():
    p = PhysicalParams(g=1.0, delta=20.0, n_max=1)
    lay = cavity_layout(1, 1)
    seen = []
    traj = solve_schrodinger(PureState.basis(lay, [1, 0]), p, 1, 2.0, 1e-9, observer=lambda t, y: seen.append(t))
    assert len(seen) == traj.n_steps
    assert seen == sorted(seen) and seen[-1] == pytest.approx(2.0)


def test_sample_times_validation():
    p = PhysicalParams(g=1.0, delta=20.0, n_max=1)
    psi = PureState.basis(cavity_layout(1, 1), [1, 0])
    with pytest.raises(ValueError):
        solve_schrodinger(psi, p, 1, 1.0, sample_times=[0.5, 0.2])
    with pytest.raises(ValueError):
        solve_schrodinger(psi, p, 1, 1.0, sample_times=[2.0])
    with pytest.raises(ValueError):
        solve_schrodinger(psi, p, 1, 1.0, rel_tol=1e-2)
    with pytest.raises(ValueError):
        solve_schrodinger(psi, p, 1, 1.0, rel_tol=1e-14)


def test_step_budget_error_has_diagnostic():
    p = PhysicalParams(g=1.0, delta=20.0, n_max=1)
    psi = PureState.basis(cavity_layout(1, 1), [1, 0])
    with pytest.raises(IntegrationError, match="step budget"):
        solve_schrodinger(psi, p, 1, 50.0, 1e-10, max_steps=20)


def test_photon_population_without_cavity():
    assert photon_population(ket("egg")) == 0.0
    assert max_photon_population([ket("egg"), ket("ggg")]) == 0.0


# -- master equation ----------------------------------------------------------


@pytest.mark.parametrize("method", ["rotating", "dop853"])
def test_lindblad_closed_limit_matches_schrodinger(rng, method):
    rel_tol = 1e-9
    p = PhysicalParams(g=1.0, delta=20.0, n_max=3)
    lay = cavity_layout(2, 3)
    psi = random_pure(rng, lay)
    t = 6.0
    ref = evolve_time_dependent(psi, p, 2, t, 1e-11)
    rho = evolve_lindblad(psi.to_density(), p, 2, t, rel_tol, method=method)
    assert fidelity_pure(rho, ref) >= 1 - 10 * rel_tol


@pytest.mark.parametrize("method", ["rotating", "dop853"])
def test_cavity_decay_is_exponential(method):
    kappa = 0.3
    p = PhysicalParams(g=1.0, delta=20.0, n_max=2, kappa=kappa)
    lay = cavity_layout(1, 2)
    rho0 = PureState.basis(lay, [0, 1]).to_density()
    times = np.linspace(0, 5.0, 11)
    traj = solve_lindblad(rho0, p, 1, 5.0, 1e-10, coupled=(), sample_times=times, method=method)
    p1 = [s.matrix.reshape(2, 3, 2, 3)[:, 1, :, 1].trace().real for s in traj.states]
    np.testing.assert_allclose(p1, np.exp(-kappa * times), atol=1e-8)


def test_thermal_steady_state_population():
    # D[a] and D[a^dag] with rates kappa(n_th+1), kappa n_th relax <n> to n_th
    p = PhysicalParams(g=1.0, delta=0.0, n_max=12, kappa=1.0, n_th=0.2)
    lay = cavity_layout(1, 12)
    rho = evolve_lindblad(PureState.basis(lay, [0, 0]).to_density(), p, 1, 40.0, coupled=())
    n_mean = float(np.sum(np.arange(13) * rho.matrix.reshape(2, 13, 2, 13)[0, :, 0, :].diagonal().real))
    assert n_mean == pytest.approx(0.2, abs=1e-6)


def test_lindblad_routes_agree(rng):
    p = PhysicalParams(g=1.0, delta=15.0, n_max=3, kappa=0.05, n_th=0.1)
    lay = cavity_layout(3, 3)
    rho0 = DensityMatrix(lay, random_density(rng, lay.dim, rank=3))
    a = evolve_lindblad(rho0, p, 3, 4.0, 1e-10, method="rotating")
    b = evolve_lindblad(rho0, p, 3, 4.0, 1e-10, method="dop853")
    assert np.max(np.abs(a.matrix - b.matrix)) <= 1e-8


def test_lindblad_against_dense_expm_lab_frame():
    # piecewise-constant check on a tiny system: exact expm on the rotating generator
    p = PhysicalParams(g=1.0, delta=3.0, n_max=1, kappa=0.4, n_th=0.5)
    lay = cavity_layout(1, 1)
    rho0 = PureState.basis(lay, [1, 0]).to_density()
    a = embed(annihilation(1), 1, lay)
    x = lowering_coupling(p, 1)
    n = a.conj().T @ a
    h = x + x.conj().T - p.delta * n
    eye = np.eye(4)

    def diss(c, rate):
        cdc = c.conj().T @ c
        return rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))

    gen = -1j * np.kron(h, eye) + 1j * np.kron(eye, h.T) + diss(a, 0.4 * 1.5) + diss(a.conj().T, 0.4 * 0.5)
    t = 2.5
    y = (expm(gen * t) @ rho0.matrix.ravel()).reshape(4, 4)
    v = np.exp(-1j * p.delta * t * np.diag(n).real)
    expected = np.outer(v, v.conj()) * y
    out = evolve_lindblad(rho0, p, 1, t, 1e-10, method="dop853")
    np.testing.assert_allclose(out.matrix, expected, atol=1e-8)


@pytest.mark.parametrize("method", ["rotating", "dop853"])
def test_lindblad_trace_and_positivity(rng, method):
    p = PhysicalParams(g=1.0, delta=20.0, n_max=3, kappa=0.2, n_th=0.3)
    lay = cavity_layout(2, 3)
    rho0 = DensityMatrix(lay, random_density(rng, lay.dim, rank=2))
    traj = solve_lindblad(rho0, p, 2, 3.0, 1e-9, sample_times=np.linspace(0, 3, 7), method=method)
    assert traj.trace_drift <= 1e-9
    assert traj.hermiticity_residual <= 1e-9
    for s in traj.states:
        assert np.linalg.eigvalsh(s.matrix).min() >= -1e-10


def test_lindblad_unknown_method():
    p = PhysicalParams(g=1.0, delta=20.0, n_max=1)
    rho = PureState.basis(cavity_layout(1, 1), [0, 0]).to_density()
    with pytest.raises(ValueError):
        evolve_lindblad(rho, p, 1, 1.0, method="euler")
