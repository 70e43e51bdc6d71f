import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavclone.analysis import clone_report
from cavclone.dynamics.hamiltonians import PhysicalParams, RegimeWarning
from cavclone.hilbert import ket, overlap_up_to_global_phase, partial_trace, tensor
from cavclone.protocol import (
    ATOM2,
    ATOM3,
    PRINTED_PARAMS,
    ZERO_PARAMS,
    InputQubit,
    ProtocolParams,
    RegimeError,
    branch_phase_spread,
    initial_state,
    parameter_set,
    protocol_checkpoints,
    psi_plus,
    run_protocol_effective,
    run_protocol_full,
    run_protocol_lindblad,
    schedule,
    solve_phase_matching,
    target_state,
    z_rotation,
)

from conftest import REFERENCE_QUBIT, qubits, random_qubit

EQ7 = (ket("eg") + ket("ge").scaled(-1j)).scaled(1 / math.sqrt(2))
# measured, reference input (pi/2, 0), rel_tol 1e-9; see the analysis tests for the full table
FULL_OVERLAP_20G = 0.9841649


# -- inputs and parameters ----------------------------------------------------


def test_input_qubit_normalization():
    InputQubit(0.6, 0.8j)
    with pytest.raises(ValueError):
        InputQubit(0.6, 0.81)
    with pytest.raises(ValueError):
        InputQubit(float("nan"), 0)


def test_parameters_must_be_finite_and_durations_nonnegative():
    with pytest.raises(ValueError):
        ProtocolParams(math.inf, 0, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        ProtocolParams(-0.1, 0, 0, 0, 0, 0, 0)


def test_schedule_order():
    names = [getattr(s, "cavity", None) or s.zone for s in schedule(PRINTED_PARAMS)]
    assert names == ["A", "R1", "R2", "B", "C", "R3", "R4"]


# -- z rotation ---------------------------------------------------------------


def test_theta2_maps_cavity_a_output_to_psi_plus():
    after = z_rotation(tensor(ket("g"), EQ7), ATOM2, math.pi / 4)
    assert overlap_up_to_global_phase(after, tensor(ket("g"), psi_plus())) == pytest.approx(1.0, abs=1e-15)


def test_z_rotation_zero_is_identity(rng):
    psi = initial_state(random_qubit(rng))
    np.testing.assert_array_equal(z_rotation(psi, 0, 0.0).amplitudes, psi.amplitudes)


@given(qubits(), st.floats(-math.pi, math.pi))
def test_z_rotation_on_input_qubit(q, theta):
    out = z_rotation(q.state(), 0, theta)
    np.testing.assert_allclose(
        out.amplitudes, [q.alpha * cmath.exp(1j * theta), q.beta * cmath.exp(-1j * theta)], atol=1e-15
    )


def test_z_rotation_invalid_index():
    with pytest.raises(Exception):
        z_rotation(ket("ggg"), 3, 0.1)


# -- target state -------------------------------------------------------------


def test_target_state_ground_input_amplitudes():
    amps = target_state(InputQubit(1, 0)).amplitudes
    expected = np.zeros(8)
    expected[0b100] = math.sqrt(2 / 3)
    expected[0b010] = expected[0b001] = math.sqrt(1 / 6)
    np.testing.assert_allclose(amps, expected, atol=1e-15)


def test_target_state_normalized(rng):
    for _ in range(50):
        assert target_state(random_qubit(rng)).norm() == pytest.approx(1.0, abs=1e-14)


def test_target_state_clone_marginal():
    red = partial_trace(target_state(InputQubit(1, 0)).to_density(), [ATOM2])
    np.testing.assert_allclose(red.matrix, np.diag([5 / 6, 1 / 6]), atol=1e-15)


@given(qubits())
def test_target_state_exchange_symmetric(q):
    t = target_state(q).tensor_view()
    np.testing.assert_allclose(t, np.swapaxes(t, 1, 2), atol=1e-15)


# -- phase matching -----------------------------------------------------------


def test_solver_values(solver_params):
    p = solver_params
    assert (p.phase_A, p.theta2, p.phase_B) == (math.pi / 4, math.pi / 4, 2 * math.pi / 9)
    assert p.phase_C == pytest.approx(math.pi / 3, abs=1e-12)
    assert p.theta1 == pytest.approx(-math.pi / 9, abs=1e-12)
    assert p.theta3 == pytest.approx(-math.pi / 6, abs=1e-12)
    assert p.theta4 == p.theta3
    assert branch_phase_spread(p) <= 1e-12


def test_printed_parameters_do_not_phase_match():
    # the printed theta1 = -pi/18, theta3 = +pi/6 leave the branches 7*pi/9 apart
    assert branch_phase_spread(PRINTED_PARAMS) == pytest.approx(7 * math.pi / 9, abs=1e-12)
    q = REFERENCE_QUBIT
    assert overlap_up_to_global_phase(run_protocol_effective(q, PRINTED_PARAMS), target_state(q)) < 0.2


def test_parameter_set_names():
    assert parameter_set("solver").label == "solver"
    assert parameter_set("paper-printed") is PRINTED_PARAMS
    with pytest.raises(ValueError):
        parameter_set("nope")


def test_solver_rejects_unreachable_magnitudes():
    from cavclone.protocol import PhaseMatchingError

    with pytest.raises(PhaseMatchingError):
        solve_phase_matching(phase_B=0.3)


# -- effective pipeline -------------------------------------------------------


def test_end_to_end_target(rng, solver_params):
    for _ in range(50):
        q = random_qubit(rng)
        ov = overlap_up_to_global_phase(run_protocol_effective(q, solver_params), target_state(q))
        assert ov >= 1 - 1e-10


def test_cavity_a_checkpoint():
    p = ProtocolParams(math.pi / 4, 0, 0, 0, 0, 0, 0)
    cp = protocol_checkpoints(InputQubit(1, 0), p)
    assert overlap_up_to_global_phase(cp["A"], tensor(ket("g"), EQ7)) == pytest.approx(1.0, abs=1e-12)


def test_cavity_b_checkpoint_magnitudes(solver_params):
    cp = protocol_checkpoints(InputQubit(1, 0), solver_params)
    out = cp["B"]
    assert abs(tensor(ket("g"), psi_plus()).inner(out)) == pytest.approx(math.sqrt(1 / 3), abs=1e-12)
    assert abs(ket("egg").inner(out)) == pytest.approx(math.sqrt(2 / 3), abs=1e-12)
    cp_e = protocol_checkpoints(InputQubit(0, 1), solver_params)
    assert abs(tensor(ket("e"), psi_plus()).inner(cp_e["B"])) == pytest.approx(math.sqrt(1 / 3), abs=1e-12)
    assert abs(ket("gee").inner(cp_e["B"])) == pytest.approx(math.sqrt(2 / 3), abs=1e-12)


def test_ground_input_final_magnitudes(solver_params):
    amps = np.abs(run_protocol_effective(InputQubit(1, 0), solver_params).amplitudes)
    expected = np.zeros(8)
    expected[0b100] = math.sqrt(2 / 3)
    expected[0b010] = expected[0b001] = math.sqrt(1 / 6)
    np.testing.assert_allclose(amps, expected, atol=1e-12)


def test_identity_protocol():
    out = run_protocol_effective(InputQubit(1, 0), ZERO_PARAMS)
    np.testing.assert_allclose(out.amplitudes, ket("geg").amplitudes)


@given(qubits(), qubits(), st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2))
def test_linearity(q1, q2, a, b):
    p = solve_phase_matching()
    v = a * np.array([q1.alpha, q1.beta]) + b * np.array([q2.alpha, q2.beta])
    n = np.linalg.norm(v)
    if n < 1e-6:
        return
    combo = InputQubit(*(v / n))
    direct = run_protocol_effective(combo, p).amplitudes
    lin = (a * run_protocol_effective(q1, p).amplitudes + b * run_protocol_effective(q2, p).amplitudes) / n
    np.testing.assert_allclose(direct, lin, atol=1e-12)


@given(qubits())
def test_exchange_symmetry_of_clones(q):
    rho = run_protocol_effective(q, solve_phase_matching()).to_density()
    r2 = partial_trace(rho, [ATOM2]).matrix
    r3 = partial_trace(rho, [ATOM3]).matrix
    assert np.max(np.abs(r2 - r3)) <= 1e-12


def test_universal_fidelity_on_grid(solver_params):
    for theta in np.linspace(0, math.pi, 10):
        for phi in np.linspace(0, 2 * math.pi, 20, endpoint=False):
            q = InputQubit.from_bloch(theta, phi)
            rep = clone_report(q, run_protocol_effective(q, solver_params))
            assert rep.fidelity_clone2 == pytest.approx(5 / 6, abs=1e-9)
            assert rep.fidelity_clone3 == pytest.approx(5 / 6, abs=1e-9)


# -- full model ---------------------------------------------------------------


def test_full_model_overlap_at_20g(scaling_20_40):
    row = scaling_20_40[0]
    overlap = math.sqrt(1 - row.infidelity)
    assert overlap >= 0.98
    assert overlap == pytest.approx(FULL_OVERLAP_20G, abs=1e-6)


def test_full_model_reports_leakage_and_times(solver_params):
    p = PhysicalParams(g=1.0, delta=20.0)
    run = run_protocol_full(InputQubit(1, 0), p, solver_params)
    assert set(run.stage_leakage) == {"A", "B", "C"}
    assert 0 < run.leakage < 0.05
    survive = np.prod([1 - v for v in run.stage_leakage.values()])
    assert run.leakage == pytest.approx(1 - survive, abs=1e-15)
    assert run.stage_times["A"] == pytest.approx((math.pi / 4) / p.lam())
    assert run.state.norm() == pytest.approx(1.0, abs=1e-12)
    assert run.regime_warning is None


def test_full_model_feasibility_durations(solver_params):
    g = 2 * math.pi * 50e3
    p = PhysicalParams(g=g, delta=10 * g)
    with pytest.warns(RegimeWarning):
        run = run_protocol_full(InputQubit(1, 0), p, solver_params)
    assert run.stage_times["A"] == pytest.approx(2.5e-5, rel=1e-12)
    assert run.total_time < 1e-4
    assert run.regime_warning is not None


def test_full_model_vacuum_weight_violation(solver_params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        with pytest.raises(RegimeError, match="vacuum weight"):
            run_protocol_full(InputQubit(0, 1), PhysicalParams(g=1.0, delta=2.0), solver_params)


def test_full_model_truncation_check(solver_params):
    # one photon level cannot hold the two-excitation virtual states faithfully,
    # but the top level is then the one-photon level and is populated
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        with pytest.raises(RegimeError, match="top Fock level"):
            run_protocol_full(InputQubit(0, 1), PhysicalParams(g=1.0, delta=20.0, n_max=1), solver_params)


def test_full_model_rejects_nonpositive_detuning(solver_params):
    with pytest.raises(ValueError):
        run_protocol_full(InputQubit(1, 0), PhysicalParams(g=1.0, delta=-20.0), solver_params)


@pytest.mark.slow
def test_full_model_converges_at_200g(solver_params):
    run = run_protocol_full(REFERENCE_QUBIT, PhysicalParams(g=1.0, delta=200.0), solver_params)
    assert run.overlap(run_protocol_effective(REFERENCE_QUBIT, solver_params)) >= 1 - 1e-3


# -- open system --------------------------------------------------------------


def test_lindblad_closed_limit_matches_full(solver_params):
    p = PhysicalParams(g=1.0, delta=20.0)
    q = InputQubit(1, 0)
    full = run_protocol_full(q, p, solver_params, rel_tol=1e-10)
    lind = run_protocol_lindblad(q, p, solver_params, rel_tol=1e-9)
    from cavclone.hilbert import fidelity_pure

    assert fidelity_pure(lind.state, full.state) >= 1 - 10 * 1e-9
    assert lind.leakage == pytest.approx(full.leakage, abs=1e-8)
    assert lind.trace_drift <= 1e-9
    assert lind.notes and "not prescribed" in lind.notes[0]


def test_lindblad_accepts_mixed_input(solver_params):
    from cavclone.hilbert import BasisLayout, DensityMatrix

    rho_in = DensityMatrix.maximally_mixed(BasisLayout((2,)))
    run = run_protocol_lindblad(rho_in, PhysicalParams(g=1.0, delta=20.0, kappa=0.005), solver_params)
    assert run.state.layout.factor_dims == (2, 2, 2)
    assert np.trace(run.state.matrix).real == pytest.approx(1.0, abs=1e-12)
