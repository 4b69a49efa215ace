"""Brute-force two-qubit simulation of one protocol step.

Kept deliberately naive: dense 4x4 matrices, explicit CNOT, explicit
projector. Every closed-form map in the package is checked against it.
"""

from __future__ import annotations

import math

import numpy as np

from .core import BlochVector, ErrorAngle, as_angle

_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
# target (second qubit) found in |0>
_P_TARGET0 = np.kron(np.eye(2), np.array([[1, 0], [0, 0]], dtype=complex))

ZERO_SUCCESS_TOL = 1e-15


class ZeroSuccessProbability(ArithmeticError):
    """Post-selection on the 0 outcome has (numerically) zero probability."""


def faulty_hadamard(eps: ErrorAngle | float) -> np.ndarray:
    """Z_{pi/2} X_{pi/2} X_eps Z_{pi/2} with the global phase dropped."""
    th = as_angle(eps).theta
    c, s = math.cos(th), math.sin(th)
    return np.array([[c, s], [s, -c]], dtype=complex)


def density_matrix(s: BlochVector) -> np.ndarray:
    return 0.5 * np.array(
        [[1 + s.w, s.u - 1j * s.v], [s.u + 1j * s.v, 1 - s.w]], dtype=complex
    )


def bloch_of(rho: np.ndarray) -> BlochVector:
    return BlochVector(
        float(2 * rho[1, 0].real), float(2 * rho[1, 0].imag), float((rho[0, 0] - rho[1, 1]).real)
    )


def is_physical_matrix(rho: np.ndarray, tol: float = 1e-10) -> bool:
    if not np.allclose(rho, rho.conj().T, atol=tol):
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -tol)


def step_via_circuit(rho: np.ndarray, eps: ErrorAngle | float) -> tuple[np.ndarray, float]:
    """CNOT on rho x rho, keep the control when the target reads 0, apply H~.

    Returns the normalised output state and the post-selection probability.
    """
    joint = np.kron(rho, rho)
    joint = _CNOT @ joint @ _CNOT.conj().T
    kept = _P_TARGET0 @ joint @ _P_TARGET0
    p0 = float(np.trace(kept).real)
    if p0 < ZERO_SUCCESS_TOL:
        raise ZeroSuccessProbability(f"success probability {p0:g}")
    # partial trace over the target
    reduced = kept.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3) / p0
    H = faulty_hadamard(eps)
    return H @ reduced @ H.conj().T, p0


def hadamard_product_step(rho: np.ndarray, eps: ErrorAngle | float) -> np.ndarray:
    """H~ (rho . rho) H~^dagger / Tr(rho . rho) with . the elementwise product."""
    sq = rho * rho
    tr = float(np.trace(sq).real)
    if tr < ZERO_SUCCESS_TOL:
        raise ZeroSuccessProbability(f"Tr(rho.rho) = {tr:g}")
    H = faulty_hadamard(eps)
    return H @ (sq / tr) @ H.conj().T


def success_probability(s: BlochVector) -> float:
    """Closed form of Tr(rho . rho)."""
    return 0.5 * (1.0 + s.w * s.w)


def random_density_matrix(rng: np.random.Generator, pure: bool = False) -> np.ndarray:
    """Ginibre-ensemble state (Hilbert-Schmidt measure); Haar pure state if ``pure``."""
    if pure:
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi /= np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def oracle_report(n: int, seed: int, eps_max_deg: float = 50.0) -> dict:
    """Maximum deviation of the closed-form maps from the circuit over ``n`` random draws."""
    from .core import bloch_step, bloch_to_z, f_eps, z_to_bloch

    rng = np.random.default_rng(seed)
    max_mixed = 0.0
    max_pure = 0.0
    max_p = 0.0
    for _ in range(n):
        eps = ErrorAngle.from_degrees(rng.uniform(-eps_max_deg, eps_max_deg))
        rho = random_density_matrix(rng)
        out, p0 = step_via_circuit(rho, eps)
        s = bloch_of(rho)
        expect = bloch_step(s, eps)
        got = bloch_of(out)
        max_mixed = max(max_mixed, np.abs(got.as_array() - expect.as_array()).max())
        max_p = max(max_p, abs(p0 - success_probability(s)))

        psi = random_density_matrix(rng, pure=True)
        out_pure, _ = step_via_circuit(psi, eps)
        z_in = bloch_to_z(bloch_of(psi), tol=1e-9)
        z_circ = bloch_to_z(bloch_of(out_pure), tol=1e-9)
        z_map = f_eps(z_in, eps)
        # compare on the sphere so points near infinity are not penalised
        d = z_to_bloch(z_circ).as_array() - z_to_bloch(z_map).as_array()
        max_pure = max(max_pure, float(np.abs(d).max()))
    return {
        "n": n,
        "seed": seed,
        "max_error_mixed": float(max_mixed),
        "max_error_pure": float(max_pure),
        "max_error_success_probability": float(max_p),
        "max_error": float(max(max_mixed, max_pure, max_p)),
    }
