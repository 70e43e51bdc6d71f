"""Hamiltonians and time evolution at the effective, full and open-system tiers."""

from .hamiltonians import (
    CollisionSpec,
    PhysicalParams,
    RegimeWarning,
    effective_hamiltonian_general,
    effective_hamiltonian_vacuum,
    excitation_number,
    full_hamiltonian,
    photon_number,
)
from .integrate import (
    IntegrationError,
    LindbladTrajectory,
    Trajectory,
    evolve_lindblad,
    evolve_time_dependent,
    max_photon_population,
    photon_population,
    solve_lindblad,
    solve_schrodinger,
)
from .propagators import (
    apply_local,
    collision_three_atom,
    collision_two_atom,
    evolve_exact,
    z_rotation_unitary,
)

__all__ = [
    "CollisionSpec",
    "IntegrationError",
    "LindbladTrajectory",
    "PhysicalParams",
    "RegimeWarning",
    "Trajectory",
    "apply_local",
    "collision_three_atom",
    "collision_two_atom",
    "effective_hamiltonian_general",
    "effective_hamiltonian_vacuum",
    "evolve_exact",
    "evolve_lindblad",
    "evolve_time_dependent",
    "excitation_number",
    "full_hamiltonian",
    "max_photon_population",
    "photon_number",
    "photon_population",
    "solve_lindblad",
    "solve_schrodinger",
    "z_rotation_unitary",
]
