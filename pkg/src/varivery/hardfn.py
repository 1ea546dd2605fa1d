"""Planted labeling functions and their circuit realizations.

Fixed label convention used everywhere downstream: y(x) = 2*Q(x) - 1, and the
data circuit satisfies <Z on qubit 0> = y(x) after acting on |0...0>. The
circuit realization is classical precomputation (a conditional bit flip); the
layered-gadget mechanics downstream only need *some* unitary realizing Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapacityError, DomainError, ValidationError
from .statevec import GateOp, PauliX, StateVector

MAX_PRIME = 2**14


def label_of(q_value: int) -> float:
    """y = +1 iff Q = 1."""
    return 2.0 * q_value - 1.0


@dataclass(frozen=True)
class PlantedFunction:
    """Boolean function with a state-prep circuit and an input distribution.

    ``circuit(x)`` flips data qubit 0 exactly when Q(x) = 0, so the qubit-0
    Z expectation equals the +/-1 label.
    """

    name: str
    n_bits: int
    eval: Callable[[int], int]
    circuit: Callable[[int], tuple[GateOp, ...]]
    sample_input: Callable[[np.random.Generator], int]

    def label(self, x: int) -> float:
        return label_of(self.eval(x))


def _conditional_flip(eval_fn: Callable[[int], int]) -> Callable[[int], tuple[GateOp, ...]]:
    def circuit(x: int) -> tuple[GateOp, ...]:
        return (PauliX((0,)),) if eval_fn(x) == 0 else ()

    return circuit


def parity_fn(n: int) -> PlantedFunction:
    """Easy sanity-check oracle: Q(x) = XOR of the n input bits."""
    if n < 1:
        raise ValidationError("parity needs at least one bit")

    def q(x: int) -> int:
        return bin(x & ((1 << n) - 1)).count("1") % 2

    return PlantedFunction(
        name=f"parity{n}",
        n_bits=n,
        eval=q,
        circuit=_conditional_flip(q),
        sample_input=lambda rng: int(rng.integers(0, 2**n)),
    )


# ---------------------------------------------------------------------------
# discrete-logarithm instances


def brute_force_dlog(p: int, g: int, x: int) -> int:
    """Smallest k >= 0 with g^k = x (mod p), by exhaustive multiplication."""
    if p > MAX_PRIME:
        raise CapacityError(f"modulus {p} exceeds the brute-force cap {MAX_PRIME}")
    if x % p == 0:
        raise DomainError("0 is not in the multiplicative group")
    if not 1 <= x < p:
        raise DomainError(f"x={x} outside [1, {p})")
    acc = 1
    for k in range(p - 1):
        if acc == x:
            return k
        acc = (acc * g) % p
    raise DomainError(f"{x} is not a power of {g} modulo {p}")


@dataclass(frozen=True)
class DlpInstance:
    p: int
    g: int
    log_table: tuple[int, ...] = field(default=(), compare=False)  # log_table[x] for x in 1..p-1

    def __post_init__(self):
        if self.p > MAX_PRIME:
            raise CapacityError(f"prime {self.p} exceeds cap {MAX_PRIME}")
        if self.p < 3 or any(self.p % d == 0 for d in range(2, int(math.isqrt(self.p)) + 1)):
            raise ValidationError(f"{self.p} is not an odd prime")
        table = [None] * self.p
        acc = 1
        for k in range(self.p - 1):
            if table[acc] is not None:
                raise ValidationError(f"{self.g} does not generate the group mod {self.p}")
            table[acc] = k
            acc = (acc * self.g) % self.p
        object.__setattr__(self, "log_table", tuple(table[1:]))

    def dlog(self, x: int) -> int:
        if not 1 <= x < self.p:
            raise DomainError(f"x={x} outside the group range [1, {self.p})")
        return self.log_table[x - 1]

    def n_bits(self) -> int:
        return max(1, (self.p - 1).bit_length())

    def sample_element(self, rng: np.random.Generator) -> int:
        return pow(self.g, int(rng.integers(0, self.p - 1)), self.p)

    def serialize(self) -> str:
        return f"{self.p} {self.g}"

    @staticmethod
    def parse(line: str) -> "DlpInstance":
        p, g = (int(tok) for tok in line.split())
        return DlpInstance(p, g)


def dlp_msb(inst: DlpInstance) -> PlantedFunction:
    """Q(x) = 1 iff the discrete log of x is in the upper half of the cycle."""
    half = (inst.p - 1) // 2

    def q(x: int) -> int:
        return 1 if inst.dlog(x) >= half else 0

    return PlantedFunction(
        name=f"dlp_msb_p{inst.p}_g{inst.g}",
        n_bits=inst.n_bits(),
        eval=q,
        circuit=_conditional_flip(q),
        sample_input=inst.sample_element,
    )


def dlp_feature_state(inst: DlpInstance, k_window: int, x: int) -> StateVector:
    """Uniform superposition over the coset window {x g^i : i < 2^k_window},
    embedded as computational basis states of ceil(log2 p) qubits."""
    size = 2**k_window
    if size > inst.p - 1:
        raise ValidationError(
            f"window 2^{k_window} exceeds the group order {inst.p - 1}; elements would repeat"
        )
    if not 1 <= x < inst.p:
        raise DomainError(f"x={x} outside the group range [1, {inst.p})")
    n_qubits = inst.n_bits()
    amp = np.zeros(2**n_qubits, dtype=complex)
    element = x
    weight = 1.0 / math.sqrt(size)
    for _ in range(size):
        amp[element] = weight
        element = (element * inst.g) % inst.p
    return StateVector(n_qubits, amp).validate()


def dlp_coset_window(inst: DlpInstance, k_window: int, x: int) -> set[int]:
    """The window's element set; independent oracle for kernel values."""
    out = set()
    element = x
    for _ in range(2**k_window):
        out.add(element)
        element = (element * inst.g) % inst.p
    return out


# registry used when deserializing circuit templates with data slots
def builtin_planted(name: str) -> PlantedFunction:
    if name.startswith("parity"):
        return parity_fn(int(name[len("parity") :]))
    if name.startswith("dlp_msb_p"):
        body = name[len("dlp_msb_p") :]
        p_str, g_str = body.split("_g")
        return dlp_msb(DlpInstance(int(p_str), int(g_str)))
    raise ValidationError(f"unknown planted function {name!r}")
