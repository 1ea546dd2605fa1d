"""Dense state-vector simulator: states, gates, observables, expectations.

Conventions, fixed once for the whole package:

* Qubit 0 is the MOST significant bit of the amplitude index, so the basis
  state |b0 b1 ... b_{n-1}> sits at index sum_i b_i * 2^(n-1-i).
* Gates carry an ordered ``targets`` tuple; a dense matrix's first index bit
  corresponds to ``targets[0]``.
* States are pure, double-precision complex, and never renormalized behind
  the caller's back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CapacityError, ShapeError, ValidationError

MAX_QUBITS = 24  # dense amplitudes stay under ~256 MiB of complex doubles
_NORM_TOL = 1e-10
_UNITARY_TOL = 1e-10
_HERMITIAN_TOL = 1e-12
_MAX_DENSE_OBS_QUBITS = 12

_SQ2 = 1.0 / math.sqrt(2.0)
_H_MATRIX = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
_X_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)
_Y_MATRIX = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z_MATRIX = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = {"I": np.eye(2, dtype=complex), "X": _X_MATRIX, "Y": _Y_MATRIX, "Z": _Z_MATRIX}


def rx_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class StateVector:
    """Pure n-qubit state; amplitudes has length exactly 2**n_qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def validate(self) -> "StateVector":
        if len(self.amplitudes) != 2**self.n_qubits:
            raise ShapeError(
                f"amplitude vector of length {len(self.amplitudes)} does not match "
                f"{self.n_qubits} qubits"
            )
        if abs(self.norm() - 1.0) > _NORM_TOL:
            raise ValidationError(f"state norm {self.norm()} deviates from 1 beyond {_NORM_TOL}")
        return self

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def dump(self) -> str:
        """Debug format: one `index<TAB>re<TAB>im` line per amplitude."""
        return "\n".join(
            f"{i}\t{a.real:.17g}\t{a.imag:.17g}" for i, a in enumerate(self.amplitudes)
        )


def zero_state(n_qubits: int) -> StateVector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits={n_qubits} outside [1, {MAX_QUBITS}]")
    amp = np.zeros(2**n_qubits, dtype=complex)
    amp[0] = 1.0
    return StateVector(n_qubits, amp)


def basis_state(n_qubits: int, index: int) -> StateVector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits={n_qubits} outside [1, {MAX_QUBITS}]")
    if not 0 <= index < 2**n_qubits:
        raise ShapeError(f"basis index {index} out of range for {n_qubits} qubits")
    amp = np.zeros(2**n_qubits, dtype=complex)
    amp[index] = 1.0
    return StateVector(n_qubits, amp)


def from_amplitudes(amplitudes: np.ndarray) -> StateVector:
    amp = np.asarray(amplitudes, dtype=complex)
    n = int(round(math.log2(len(amp))))
    return StateVector(n, amp).validate()


def overlap(a: StateVector, b: StateVector) -> complex:
    """Inner product <a|b>; the fidelity kernel is its squared magnitude."""
    if a.n_qubits != b.n_qubits:
        raise ShapeError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    val = complex(np.vdot(a.amplitudes, b.amplitudes))
    if abs(val) > 1.0 + _NORM_TOL:
        raise ValidationError(f"|<a|b>| = {abs(val)} exceeds 1")
    return val


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product with the left factor on the high-order qubits."""
    n = a.n_qubits + b.n_qubits
    if n > MAX_QUBITS:
        raise CapacityError(f"combined register of {n} qubits exceeds cap {MAX_QUBITS}")
    return StateVector(n, np.kron(a.amplitudes, b.amplitudes))


# ---------------------------------------------------------------------------
# gates


@dataclass(frozen=True, eq=False)
class GateOp:
    """Base gate; subclasses define the unitary on their ordered targets."""

    targets: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.targets)) != len(self.targets):
            raise ValidationError(f"duplicate target indices {self.targets}")

    def matrix(self) -> np.ndarray:
        """Dense unitary on the gate's own targets (first target = MSB)."""
        raise NotImplementedError

    def key(self) -> tuple:
        """Hashable identity used for circuit memoization."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class FixedUnitary(GateOp):
    matrix_data: np.ndarray

    def __post_init__(self):
        super().__post_init__()
        m = np.asarray(self.matrix_data, dtype=complex)
        k = len(self.targets)
        if m.shape != (2**k, 2**k):
            raise ShapeError(f"matrix shape {m.shape} does not fit {k} targets")
        dev = np.abs(m.conj().T @ m - np.eye(2**k)).max()
        if dev > _UNITARY_TOL:
            raise ValidationError(f"matrix is not unitary: max |U^dag U - I| = {dev}")
        object.__setattr__(self, "matrix_data", m)

    def matrix(self) -> np.ndarray:
        return self.matrix_data

    def key(self) -> tuple:
        return ("fixed", self.targets, self.matrix_data.tobytes())


@dataclass(frozen=True, eq=False)
class RotationX(GateOp):
    angle: float

    def matrix(self) -> np.ndarray:
        return rx_matrix(self.angle)

    def key(self) -> tuple:
        return ("rx", self.targets, self.angle)


@dataclass(frozen=True, eq=False)
class RotationZ(GateOp):
    angle: float

    def matrix(self) -> np.ndarray:
        return rz_matrix(self.angle)

    def key(self) -> tuple:
        return ("rz", self.targets, self.angle)


@dataclass(frozen=True, eq=False)
class Hadamard(GateOp):
    def matrix(self) -> np.ndarray:
        return _H_MATRIX

    def key(self) -> tuple:
        return ("h", self.targets)


@dataclass(frozen=True, eq=False)
class PauliX(GateOp):
    def matrix(self) -> np.ndarray:
        return _X_MATRIX

    def key(self) -> tuple:
        return ("x", self.targets)


@dataclass(frozen=True, eq=False)
class AdderGate(GateOp):
    """Cyclic increment on the target register: |b> -> |b+1 mod 2^t>."""

    def matrix(self) -> np.ndarray:
        dim = 2 ** len(self.targets)
        m = np.zeros((dim, dim), dtype=complex)
        for b in range(dim):
            m[(b + 1) % dim, b] = 1.0
        return m

    def key(self) -> tuple:
        return ("adder", self.targets)


@dataclass(frozen=True, eq=False)
class ControlledBlock(GateOp):
    """Applies ``inner`` only on the subspace where the control register
    reads ``pattern``; realized by amplitude masking, never by a dense
    controlled matrix."""

    controls: tuple[int, ...] = ()
    pattern: int = 0
    inner: GateOp | None = None

    def __post_init__(self):
        super().__post_init__()
        if self.inner is None:
            raise ValidationError("controlled block requires an inner gate")
        if not 0 <= self.pattern < 2 ** len(self.controls):
            raise ValidationError(
                f"pattern {self.pattern} out of range for {len(self.controls)} controls"
            )
        span = set(self.controls) | set(self.inner.targets)
        if len(span) != len(self.controls) + len(self.inner.targets):
            raise ValidationError("control and inner target registers overlap")

    def matrix(self) -> np.ndarray:
        """Dense block-diagonal realization over controls + inner targets,
        ordered controls first (matching ``self.targets``)."""
        nc, nt = len(self.controls), len(self.inner.targets)
        dim = 2 ** (nc + nt)
        m = np.eye(dim, dtype=complex)
        blk = 2**nt
        lo = self.pattern * blk
        m[lo : lo + blk, lo : lo + blk] = self.inner.matrix()
        return m

    def key(self) -> tuple:
        return ("ctrl", self.controls, self.pattern, self.inner.key())


def controlled_block(controls, pattern, inner: GateOp) -> ControlledBlock:
    return ControlledBlock(
        targets=tuple(controls) + tuple(inner.targets),
        controls=tuple(controls),
        pattern=pattern,
        inner=inner,
    )


def adder_gate_on(targets) -> AdderGate:
    return AdderGate(targets=tuple(targets))


def gate_dagger(gate: GateOp) -> GateOp:
    """Structural inverse of a gate (conjugate transpose of its realization)."""
    if isinstance(gate, (Hadamard, PauliX)):
        return gate
    if isinstance(gate, RotationX):
        return RotationX(gate.targets, -gate.angle)
    if isinstance(gate, RotationZ):
        return RotationZ(gate.targets, -gate.angle)
    if isinstance(gate, FixedUnitary):
        return FixedUnitary(gate.targets, gate.matrix_data.conj().T)
    if isinstance(gate, AdderGate):
        return FixedUnitary(gate.targets, gate.matrix().conj().T)
    if isinstance(gate, ControlledBlock):
        return controlled_block(gate.controls, gate.pattern, gate_dagger(gate.inner))
    raise TypeError(f"unknown gate kind {type(gate)}")


def _check_targets(gate: GateOp, n_qubits: int) -> None:
    for q in gate.targets:
        if not 0 <= q < n_qubits:
            raise IndexError(f"target qubit {q} out of bounds for {n_qubits}-qubit state")


def _apply_matrix(amp: np.ndarray, mat: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    k = len(targets)
    if k == 1:
        q = targets[0]
        st = amp.reshape(1 << q, 2, 1 << (n - q - 1))
        out = np.empty_like(st)
        out[:, 0, :] = mat[0, 0] * st[:, 0, :] + mat[0, 1] * st[:, 1, :]
        out[:, 1, :] = mat[1, 0] * st[:, 0, :] + mat[1, 1] * st[:, 1, :]
        return out.reshape(-1)
    if k == 2 and targets[0] < targets[1]:
        q0, q1 = targets
        st = amp.reshape(1 << q0, 2, 1 << (q1 - q0 - 1), 2, 1 << (n - q1 - 1))
        out = np.einsum("ikjl,ajblc->aibkc", mat.reshape(2, 2, 2, 2), st)
        return out.reshape(-1)
    st = np.moveaxis(amp.reshape([2] * n), targets, range(k))
    shape = st.shape
    st = (mat @ st.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(st, range(k), targets).reshape(-1)


def _apply_to_array(gate: GateOp, amp: np.ndarray, n: int) -> np.ndarray:
    if isinstance(gate, AdderGate):
        k = len(gate.targets)
        st = np.moveaxis(amp.reshape([2] * n), gate.targets, range(k))
        shape = st.shape
        st = np.roll(st.reshape(2**k, -1), 1, axis=0).reshape(shape)
        return np.moveaxis(st, range(k), gate.targets).reshape(-1)
    if isinstance(gate, ControlledBlock):
        st = amp.reshape([2] * n).copy()
        sel = [slice(None)] * n
        for i, c in enumerate(gate.controls):
            sel[c] = (gate.pattern >> (len(gate.controls) - 1 - i)) & 1
        sel = tuple(sel)
        sub = st[sel]
        # inner targets renumbered into the control-free sub-tensor
        remaining = [q for q in range(n) if q not in gate.controls]
        inner_targets = tuple(remaining.index(q) for q in gate.inner.targets)
        sub_flat = _apply_to_array(
            replace_targets(gate.inner, inner_targets),
            sub.reshape(-1),
            n - len(gate.controls),
        )
        st[sel] = sub_flat.reshape(sub.shape)
        return st.reshape(-1)
    return _apply_matrix(amp, gate.matrix(), gate.targets, n)


def replace_targets(gate: GateOp, new_targets: tuple[int, ...]) -> GateOp:
    """Same gate on a different wire assignment (order-preserving)."""
    if isinstance(gate, ControlledBlock):
        nc = len(gate.controls)
        return controlled_block(
            new_targets[:nc], gate.pattern, replace_targets(gate.inner, new_targets[nc:])
        )
    return replace(gate, targets=tuple(new_targets))


def apply(gate: GateOp, state: StateVector) -> StateVector:
    """Returns U|psi>, norm preserved; never mutates the input."""
    _check_targets(gate, state.n_qubits)
    return StateVector(state.n_qubits, _apply_to_array(gate, state.amplitudes, state.n_qubits))


def apply_all(gates, state: StateVector) -> StateVector:
    for g in gates:
        state = apply(g, state)
    return state


def gates_to_unitary(gates, n_qubits: int) -> np.ndarray:
    """Dense unitary of a gate sequence; testing/decomposition helper."""
    if n_qubits > _MAX_DENSE_OBS_QUBITS:
        raise CapacityError(f"dense unitary limited to {_MAX_DENSE_OBS_QUBITS} qubits")
    dim = 2**n_qubits
    cols = np.eye(dim, dtype=complex)
    for g in gates:
        _check_targets(g, n_qubits)
        for i in range(dim):
            cols[:, i] = _apply_to_array(g, cols[:, i], n_qubits)
    return cols


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class Observable:
    """Hermitian measurement operator over ``span`` qubits."""

    span: int

    def apply_to(self, amp: np.ndarray) -> np.ndarray:
        """M @ amp for a flat (2**span,) amplitude array."""
        raise NotImplementedError

    def to_payload(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PauliStringSum(Observable):
    """sum_k c_k * P_k with real c_k and P_k a word over {I,X,Y,Z}."""

    terms: tuple[tuple[float, str], ...] = ()

    def __post_init__(self):
        for coeff, word in self.terms:
            if isinstance(coeff, complex):
                raise ValidationError("Pauli term coefficients must be real")
            if len(word) != self.span or any(ch not in "IXYZ" for ch in word):
                raise ValidationError(f"bad Pauli word {word!r} for span {self.span}")

    def apply_to(self, amp: np.ndarray) -> np.ndarray:
        out = np.zeros_like(amp)
        for coeff, word in self.terms:
            v = amp
            for q, ch in enumerate(word):
                if ch != "I":
                    v = _apply_matrix(v, _PAULI[ch], (q,), self.span)
            out = out + coeff * v
        return out

    def to_payload(self) -> dict:
        return {"form": "pauli_sum", "span": self.span,
                "terms": [[c, w] for c, w in self.terms]}


@dataclass(frozen=True)
class DenseHermitian(Observable):
    matrix: np.ndarray = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if self.span > _MAX_DENSE_OBS_QUBITS:
            raise CapacityError(
                f"dense observables supported only up to {_MAX_DENSE_OBS_QUBITS} qubits; "
                "use a structured form"
            )
        if m.shape != (2**self.span, 2**self.span):
            raise ShapeError(f"matrix shape {m.shape} does not fit span {self.span}")
        if np.abs(m - m.conj().T).max() > _HERMITIAN_TOL:
            raise ValidationError("matrix is not Hermitian within 1e-12")
        object.__setattr__(self, "matrix", m)

    def apply_to(self, amp: np.ndarray) -> np.ndarray:
        return self.matrix @ amp

    def to_payload(self) -> dict:
        return {"form": "dense", "span": self.span,
                "matrix": [[ [z.real, z.imag] for z in row] for row in self.matrix]}


@dataclass(frozen=True)
class ZeroProjector(Observable):
    """Projector onto |0...0> of a qubit subset (all qubits by default)."""

    qubits: tuple[int, ...] | None = None

    def subset(self) -> tuple[int, ...]:
        return tuple(range(self.span)) if self.qubits is None else self.qubits

    def apply_to(self, amp: np.ndarray) -> np.ndarray:
        st = amp.reshape([2] * self.span).copy()
        for q in self.subset():
            sel = [slice(None)] * self.span
            sel[q] = 1
            st[tuple(sel)] = 0.0
        return st.reshape(-1)

    def to_payload(self) -> dict:
        return {"form": "zero_projector", "span": self.span, "qubits": list(self.subset())}


@dataclass(frozen=True)
class TensorPair(Observable):
    """left (x) right, with left acting on the first (high-order) qubits."""

    left: Observable = None
    right: Observable = None

    def __post_init__(self):
        if self.left.span + self.right.span != self.span:
            raise ShapeError("TensorPair span must equal left.span + right.span")

    def apply_to(self, amp: np.ndarray) -> np.ndarray:
        l, r = 2**self.left.span, 2**self.right.span
        block = amp.reshape(l, r)
        # right factor acts on columns of each row, left on the row index
        out = np.stack([self.right.apply_to(block[i]) for i in range(l)], axis=0)
        out = np.stack([self.left.apply_to(out[:, j]) for j in range(r)], axis=1)
        return out.reshape(-1)

    def to_payload(self) -> dict:
        return {"form": "tensor_pair", "span": self.span,
                "left": self.left.to_payload(), "right": self.right.to_payload()}


def pauli_z_on(n_qubits: int, *qubits: int) -> PauliStringSum:
    word = "".join("Z" if q in qubits else "I" for q in range(n_qubits))
    return PauliStringSum(span=n_qubits, terms=((1.0, word),))


def observable_matrix(obs: Observable) -> np.ndarray:
    """Dense matrix of an observable; testing helper, small spans only."""
    if obs.span > _MAX_DENSE_OBS_QUBITS:
        raise CapacityError("observable too wide for dense realization")
    dim = 2**obs.span
    cols = [obs.apply_to(np.eye(dim, dtype=complex)[:, i]) for i in range(dim)]
    return np.stack(cols, axis=1)


def expectation(state: StateVector, obs: Observable) -> float:
    """<psi|M|psi>, checked real within 1e-10 before the residue is dropped."""
    if obs.span != state.n_qubits:
        raise ShapeError(f"observable span {obs.span} != state width {state.n_qubits}")
    val = complex(np.vdot(state.amplitudes, obs.apply_to(state.amplitudes)))
    if abs(val.imag) > 1e-10:
        raise ValidationError(f"expectation has imaginary residue {val.imag}")
    return val.real
