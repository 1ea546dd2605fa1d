"""Unitary decomposition toolkit.

Three layers, all verified by reconstruction:

* ZYZ Euler angles for single-qubit unitaries (up to global phase).
* The 15-angle two-qubit brick: (ZYZ (x) ZYZ) . exp(i(kx XX + ky YY + kz ZZ))
  . (ZYZ (x) ZYZ), universal for SU(4) up to phase, and its inverse
  (canonical/KAK decomposition via the magic basis).
* Quantum Shannon decomposition of wider unitaries into 1- and 2-qubit
  gates, via the cosine-sine decomposition and Gray-coded multiplexed
  rotations.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.linalg import cossin, schur

from .errors import DecompositionError
from .statevec import (
    FixedUnitary,
    GateOp,
    RotationZ,
    ry_matrix,
    rz_matrix,
)

_MAGIC = math.sqrt(0.5) * np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]]
)
_MAGIC_DAG = _MAGIC.conj().T
# maps the four magic-basis diagonal phases to (global, xx, yy, zz) angles
_GAMMA = 0.25 * np.array(
    [[1, 1, 1, 1], [1, 1, -1, -1], [-1, 1, -1, 1], [1, -1, -1, 1]], dtype=float
)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0, -1.0]).astype(complex)
_XX, _YY, _ZZ = np.kron(_X, _X), np.kron(_Y, _Y), np.kron(_Z, _Z)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

BRICK_PARAM_COUNT = 15
RECONSTRUCTION_TOL = 1e-10
# global-phase retries re-mix real/imag parts when the default split is
# ill-conditioned (near-degenerate canonical angles)
_PHASE_LADDER = (0.0, 0.573, 1.218, 2.831, 0.9817, 1.887)


# ---------------------------------------------------------------------------
# single-qubit ZYZ


def euler_zyz_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """RZ(alpha) @ RY(beta) @ RZ(gamma); gamma is applied first."""
    return rz_matrix(alpha) @ ry_matrix(beta) @ rz_matrix(gamma)


def euler_zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """ZYZ angles reproducing a 2x2 unitary up to global phase.

    The input is first rescaled to SU(2), where the off/on-diagonal phases
    determine alpha +/- gamma without wrap-around ambiguity.
    """
    u = np.asarray(u, dtype=complex)
    su = u / np.sqrt(np.linalg.det(u))
    beta = 2.0 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    phase_sum = -2.0 * cmath.phase(su[0, 0]) if abs(su[0, 0]) > 1e-12 else 0.0
    phase_diff = 2.0 * cmath.phase(su[1, 0]) if abs(su[1, 0]) > 1e-12 else 0.0
    return 0.5 * (phase_sum + phase_diff), beta, 0.5 * (phase_sum - phase_diff)


# ---------------------------------------------------------------------------
# 15-angle brick


def interaction_matrix(kx: float, ky: float, kz: float) -> np.ndarray:
    """exp(i (kx XX + ky YY + kz ZZ)); the three terms commute."""
    m = np.eye(4, dtype=complex)
    for k, pauli in ((kx, _XX), (ky, _YY), (kz, _ZZ)):
        m = (math.cos(k) * np.eye(4) + 1j * math.sin(k) * pauli) @ m
    return m


def brick_matrix(angles) -> np.ndarray:
    """4x4 unitary of a 15-angle brick.

    Layout: [pre_top(3), pre_bottom(3), kx, ky, kz, post_top(3), post_bottom(3)],
    pre locals applied first, 'top' = the brick's first (more significant) qubit.
    All-zero angles give the identity.
    """
    a = np.asarray(angles, dtype=float)
    if a.shape != (BRICK_PARAM_COUNT,):
        raise DecompositionError(f"brick takes {BRICK_PARAM_COUNT} angles, got {a.shape}")
    pre = np.kron(euler_zyz_matrix(*a[0:3]), euler_zyz_matrix(*a[3:6]))
    post = np.kron(euler_zyz_matrix(*a[9:12]), euler_zyz_matrix(*a[12:15]))
    return post @ interaction_matrix(a[6], a[7], a[8]) @ pre


def _block_rotations(c: np.ndarray, s: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal (left, right) corrections diagonalizing c while keeping the
    sorted singular-value profile s diagonal."""
    n = len(s)
    rank = int(np.sum(s > tol))
    left = np.eye(n)
    right = np.eye(n)
    start = 0
    while start < rank:
        end = start + 1
        while end < rank and abs(s[end] - s[start]) <= tol:
            end += 1
        blk = c[start:end, start:end]
        _, vecs = np.linalg.eigh(0.5 * (blk + blk.T))
        left[start:end, start:end] = vecs.T
        right[start:end, start:end] = vecs
        start = end
    if rank < n:
        bu, _, bvt = np.linalg.svd(c[rank:, rank:])
        left[rank:, rank:] = bu.T
        right[rank:, rank:] = bvt.T
    return left, right


def bidiagonalize_unitary(um: np.ndarray, tol: float = 1e-8, sweeps: int = 3):
    """Real special-orthogonal L, R with L @ um @ R diagonal.

    Valid because Re(um) Im(um)^T and Re(um)^T Im(um) are symmetric for any
    unitary um. Sweeps polish residues left by near-degenerate singular values.
    """
    n = len(um)
    left = np.eye(n)
    right = np.eye(n)
    for _ in range(sweeps):
        work = left @ um @ right
        if np.abs(work - np.diag(np.diag(work))).max() < 1e-13:
            break
        u, s, vt = np.linalg.svd(work.real)
        c = u.T @ work.imag @ vt.T
        ladj, radj = _block_rotations(c, s, tol)
        left = ladj @ u.T @ left
        right = right @ vt.T @ radj
    if np.linalg.det(left) < 0:
        left[0, :] *= -1
    if np.linalg.det(right) < 0:
        right[:, 0] *= -1
    d = left @ um @ right
    off = np.abs(d - np.diag(np.diag(d))).max()
    return left, np.diag(d).copy(), right, off


def kron_factor_2x2(m4: np.ndarray) -> tuple[complex, np.ndarray, np.ndarray]:
    """Split m4 = g * kron(f1, f2) with unit-determinant 2x2 factors."""
    a, b = max(((i, j) for i in range(4) for j in range(4)), key=lambda t: abs(m4[t]))
    f1 = np.zeros((2, 2), dtype=complex)
    f2 = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            f1[(a >> 1) ^ i, (b >> 1) ^ j] = m4[a ^ (i << 1), b ^ (j << 1)]
            f2[(a & 1) ^ i, (b & 1) ^ j] = m4[a ^ i, b ^ j]
    f1 /= np.sqrt(np.linalg.det(f1)) or 1
    f2 /= np.sqrt(np.linalg.det(f2)) or 1
    g = m4[a, b] / (f1[a >> 1, b >> 1] * f2[a & 1, b & 1])
    if not np.allclose(m4, g * np.kron(f1, f2), atol=1e-8):
        raise DecompositionError("matrix is not a 2x2 (x) 2x2 kronecker product")
    return g, f1, f2


def _kak_once(u4: np.ndarray, phase_shift: float):
    um = _MAGIC_DAG @ (np.exp(1j * phase_shift) * u4) @ _MAGIC
    left, d, right, _ = bidiagonalize_unitary(um)
    g1, top_a, bot_a = kron_factor_2x2(_MAGIC @ left.T @ _MAGIC_DAG)
    g2, top_b, bot_b = kron_factor_2x2(_MAGIC @ right.T @ _MAGIC_DAG)
    w, kx, ky, kz = _GAMMA @ np.angle(d)
    angles = np.array(
        [
            *euler_zyz_angles(top_b),
            *euler_zyz_angles(bot_b),
            kx,
            ky,
            kz,
            *euler_zyz_angles(top_a),
            *euler_zyz_angles(bot_a),
        ]
    )
    recon = brick_matrix(angles)
    # phase alignment: the brick drops global phase by construction
    tr = np.trace(recon.conj().T @ u4)
    phase = tr / abs(tr) if abs(tr) > 1e-12 else 1.0
    err = np.abs(phase * recon - u4).max()
    return angles, complex(phase), err


def kak_angles(u4: np.ndarray, tol: float = RECONSTRUCTION_TOL):
    """15 brick angles and a global phase with phase*brick_matrix(angles) == u4.

    Raises DecompositionError if no phase-split attempt reconstructs within tol.
    """
    u4 = np.asarray(u4, dtype=complex)
    if u4.shape != (4, 4):
        raise DecompositionError(f"expected a 4x4 unitary, got shape {u4.shape}")
    best = None
    for shift in _PHASE_LADDER:
        angles, phase, err = _kak_once(u4, shift)
        if best is None or err < best[2]:
            best = (angles, phase, err)
        if best[2] <= tol:
            break
    if best[2] > tol:
        raise DecompositionError(f"brick reconstruction error {best[2]} exceeds {tol}")
    return best[0], best[1]


# ---------------------------------------------------------------------------
# multiplexed rotations and state preparation


def mux_rotation(kind: str, target: int, controls: tuple[int, ...], angles) -> list[GateOp]:
    """Uniformly controlled RY/RZ as 1-2 qubit gates (Gray-style recursion).

    ``angles`` has one entry per control-register value, controls[0] = MSB.
    Uses X R(t) X = R(-t), so each halving costs two CNOTs.
    """
    angles = np.asarray(angles, dtype=float)
    if len(angles) != 2 ** len(controls):
        raise DecompositionError("angle count must be 2**len(controls)")
    if kind not in ("y", "z"):
        raise DecompositionError(f"unsupported rotation kind {kind!r}")
    if not controls:
        if kind == "z":
            return [RotationZ((target,), float(angles[0]))]
        return [FixedUnitary((target,), ry_matrix(float(angles[0])))]
    half = len(angles) // 2
    first, rest = controls[0], controls[1:]
    cnot = FixedUnitary((first, target), _CNOT)
    return (
        mux_rotation(kind, target, rest, (angles[:half] + angles[half:]) / 2)
        + [cnot]
        + mux_rotation(kind, target, rest, (angles[:half] - angles[half:]) / 2)
        + [cnot]
    )


def state_prep_gates(amplitudes, qubits: tuple[int, ...]) -> list[GateOp]:
    """Gates preparing a real nonnegative amplitude vector from |0...0>.

    Binary-tree rotation cascade: level k rotates qubits[k] by angles set from
    conditional subtree masses, emitted as multiplexed RY gates.
    """
    amp = np.asarray(amplitudes, dtype=float)
    n = len(qubits)
    if len(amp) != 2**n:
        raise DecompositionError(f"need 2**{n} amplitudes, got {len(amp)}")
    if np.any(amp < -1e-14):
        raise DecompositionError("rotation cascade requires nonnegative amplitudes")
    if abs(np.linalg.norm(amp) - 1.0) > 1e-10:
        raise DecompositionError("amplitudes must be normalized")
    gates: list[GateOp] = []
    mass = amp**2
    for level in range(n):
        width = 2 ** (n - level)  # leaves under each node at this level
        nodes = mass.reshape(2**level, width)
        left = nodes[:, : width // 2].sum(axis=1)
        right = nodes[:, width // 2 :].sum(axis=1)
        total = left + right
        safe = np.where(total > 0, total, 1.0)
        angles = 2.0 * np.arctan2(np.sqrt(right / safe), np.sqrt(left / safe))
        gates.extend(mux_rotation("y", qubits[level], tuple(qubits[:level]), angles))
    return gates


# ---------------------------------------------------------------------------
# quantum Shannon decomposition


def _demultiplex(a: np.ndarray, b: np.ndarray, qubits: tuple[int, ...]) -> list[GateOp]:
    """diag(a, b) selecting on qubits[0], via a V diag(D,D^dag) W split."""
    prod = a @ b.conj().T
    evals, v = schur(prod, output="complex")
    d = np.exp(0.5j * np.angle(np.diag(evals)))
    w = np.diag(d) @ v.conj().T @ b
    rz_angles = -2.0 * np.angle(d)
    return (
        decompose_unitary(w, qubits[1:])
        + mux_rotation("z", qubits[0], qubits[1:], rz_angles)
        + decompose_unitary(v, qubits[1:])
    )


def decompose_unitary(u: np.ndarray, qubits: tuple[int, ...]) -> list[GateOp]:
    """Any k-qubit unitary as a list of 1- and 2-qubit gates (exact, no
    phase loss), by recursive cosine-sine splitting on the leading qubit."""
    u = np.asarray(u, dtype=complex)
    k = len(qubits)
    if u.shape != (2**k, 2**k):
        raise DecompositionError(f"matrix shape {u.shape} does not fit {k} qubits")
    if k <= 2:
        return [FixedUnitary(tuple(qubits), u)]
    half = 2 ** (k - 1)
    (u1, u2), theta, (v1h, v2h) = cossin(u, p=half, q=half, separate=True)
    gates = _demultiplex(v1h, v2h, qubits)
    gates += mux_rotation("y", qubits[0], qubits[1:], 2.0 * theta)
    gates += _demultiplex(u1, u2, qubits)
    return gates
