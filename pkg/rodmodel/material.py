# rodmodel/material.py
from dataclasses import dataclass

import numpy as np

from errors import InputDomainError


@dataclass(frozen=True)
class StiffnessMatrices:
    K_se: np.ndarray  # diag(GA, GA, EA)
    K_bt: np.ndarray  # diag(EI, EI, GJ)


def stiffness_from_section(E: float, area: float, inertia: float, poisson: float) -> StiffnessMatrices:
    if E <= 0:
        raise InputDomainError(f"Young's modulus must be positive, got {E}")
    if area <= 0 or inertia <= 0:
        raise InputDomainError("section area and inertia must be positive")
    if not 0.0 <= poisson < 0.5:
        raise InputDomainError(f"Poisson ratio must lie in [0, 0.5), got {poisson}")

    G = E / (2.0 * (1.0 + poisson))
    J = 2.0 * inertia
    return StiffnessMatrices(
        K_se=np.diag([G * area, G * area, E * area]),
        K_bt=np.diag([E * inertia, E * inertia, G * J]),
    )


def stiffness_from_material(E: float, r: float, poisson: float) -> StiffnessMatrices:
    """원형 단면 백본: A = πr², I = πr⁴/4."""
    if r <= 0:
        raise InputDomainError(f"backbone radius must be positive, got {r}")
    return stiffness_from_section(E, np.pi * r**2, np.pi * r**4 / 4.0, poisson)
