"""Kernel models as circuits: linear-combination compilation and 1-D
brickwork lowering.

``compile_lcu`` turns a fitted kernel model into a single circuit whose
expectation value, times a classical scale, equals the model's score. The
ancilla register is prepared with amplitudes beta_i = sqrt(|alpha_i| / l1),
a diagonal +/-1 observable on the ancilla carries the coefficient signs, and
each ancilla branch undoes the matching feature circuit so the work-register
zero projector reads out the state fidelity.

``compile_brickwork`` lowers any 1-/2-qubit gate list onto the alternating
nearest-neighbour brick grid: non-adjacent gates are SWAP-routed, runs on a
shared pair are fused, and every occupied slot is inverted into the 15-angle
brick parametrization. Unoccupied slots sit at the identity point (all-zero
angles).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ansatz import (
    CircuitTemplate,
    HeaConfig,
    brick_pairs,
    build_hea_family,
    run_gates,
)
from .decomp import brick_matrix, decompose_unitary, kak_angles, state_prep_gates
from .errors import DecompositionError, DegenerateModelError, ValidationError
from .kernel import KernelModel
from .statevec import (
    AdderGate,
    ControlledBlock,
    DenseHermitian,
    FixedUnitary,
    GateOp,
    Observable,
    TensorPair,
    ZeroProjector,
    controlled_block,
    expectation,
    gate_dagger,
    replace_targets,
)

_SWAP4 = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

FeatureCircuits = Callable[[int], tuple[GateOp, ...]]


def gates_dagger(gates) -> tuple[GateOp, ...]:
    return tuple(gate_dagger(g) for g in reversed(gates))


def _offset_gates(gates, offset: int) -> tuple[GateOp, ...]:
    return tuple(
        replace_targets(g, tuple(q + offset for q in _all_targets(g))) for g in gates
    )


def _all_targets(g: GateOp) -> tuple[int, ...]:
    return g.targets


# ---------------------------------------------------------------------------
# LCU circuits


@dataclass(frozen=True)
class LcuCircuit:
    n_ancilla: int
    n_work: int
    prep: tuple[GateOp, ...]  # beta preparation on the ancilla register
    controlled_blocks: tuple[tuple[int, tuple[GateOp, ...]], ...]  # (pattern, V(x_i))
    measurement: Observable  # sign diagonal (x) work zero-projector
    scale: float
    feature_circuits: FeatureCircuits = field(compare=False, repr=False, default=None)

    def n_qubits(self) -> int:
        return self.n_ancilla + self.n_work

    def gate_list(self, x) -> list[GateOp]:
        """Full circuit for input x: prepare beta, prepare phi(x) on the work
        register, then each branch undoes its own feature circuit."""
        ancilla = tuple(range(self.n_ancilla))
        gates: list[GateOp] = list(self.prep)
        gates.extend(_offset_gates(self.feature_circuits(x), self.n_ancilla))
        for pattern, feature_gates in self.controlled_blocks:
            undo = gates_dagger(_offset_gates(feature_gates, self.n_ancilla))
            gates.extend(controlled_block(ancilla, pattern, g) for g in undo)
        return gates


def compile_lcu(
    model: KernelModel, feature_circuits: FeatureCircuits, n_work: int | None = None
) -> LcuCircuit:
    """Circuit realization of f_alpha; expectation * scale = sum_i alpha_i k(x, x_i)."""
    alpha = np.asarray(model.alpha, dtype=float)
    l1 = float(np.abs(alpha).sum())
    if l1 == 0.0:
        raise DegenerateModelError("all-zero coefficient vector has no circuit realization")
    n = len(alpha)
    n_ancilla = max(1, math.ceil(math.log2(n)) if n > 1 else 1)
    dim = 2**n_ancilla
    beta = np.zeros(dim)
    beta[:n] = np.sqrt(np.abs(alpha) / l1)
    signs = np.ones(dim)
    signs[:n] = np.where(alpha < 0, -1.0, 1.0)
    if n_work is None:
        spans = [q for x in model.support for g in feature_circuits(x) for q in g.targets]
        n_work = 1 + max(spans) if spans else 1
    prep = tuple(state_prep_gates(beta, tuple(range(n_ancilla))))
    blocks = tuple(
        (i, tuple(feature_circuits(x))) for i, x in enumerate(model.support) if alpha[i] != 0.0
    )
    measurement = TensorPair(
        span=n_ancilla + n_work,
        left=DenseHermitian(span=n_ancilla, matrix=np.diag(signs).astype(complex)),
        right=ZeroProjector(span=n_work),
    )
    return LcuCircuit(
        n_ancilla=n_ancilla,
        n_work=n_work,
        prep=prep,
        controlled_blocks=blocks,
        measurement=measurement,
        scale=l1,
        feature_circuits=feature_circuits,
    )


def lcu_expectation(lcu: LcuCircuit, x) -> float:
    state = run_gates(lcu.gate_list(x), lcu.n_qubits())
    return expectation(state, lcu.measurement)


def lcu_score(lcu: LcuCircuit, x) -> float:
    """The kernel-model score recovered from the circuit."""
    return lcu.scale * lcu_expectation(lcu, x)


# ---------------------------------------------------------------------------
# pre-decomposition of wide gates


def expand_gate(g: GateOp) -> list[GateOp]:
    """Control expansion of a single gate to at most its dense span."""
    if isinstance(g, ControlledBlock):
        span = g.targets  # controls first, then inner targets
        if len(span) <= 2:
            return [FixedUnitary(span, g.matrix())]
        raise DecompositionError(
            f"controlled block spans {len(span)} qubits; pre-decompose it first"
        )
    if isinstance(g, AdderGate):
        t = len(g.targets)
        if t <= 2:
            return [FixedUnitary(g.targets, g.matrix())]
        if t <= 4:
            return decompose_unitary(g.matrix(), g.targets)
        raise DecompositionError(f"adder register of {t} qubits has no built-in lowering")
    if len(g.targets) > 2:
        raise DecompositionError(f"gate on {len(g.targets)} qubits; pre-decompose it first")
    return [g]


def pre_decompose(gates) -> list[GateOp]:
    """Lower every gate to 1-2 qubit gates, using the exact Shannon
    decomposition for wide controlled blocks."""
    out: list[GateOp] = []
    for g in gates:
        if isinstance(g, ControlledBlock) and len(g.targets) > 2:
            out.extend(decompose_unitary(g.matrix(), g.targets))
        elif isinstance(g, AdderGate) and len(g.targets) > 2:
            out.extend(expand_gate(g))
        else:
            out.extend(expand_gate(g))
    return out


# ---------------------------------------------------------------------------
# brickwork lowering


def _swap_gate(a: int, b: int) -> FixedUnitary:
    return FixedUnitary((a, b), _SWAP4)


def route_to_neighbours(gates) -> list[GateOp]:
    """SWAP-route every 2-qubit gate onto adjacent wires; the lower-index
    qubit walks up, and the chain is undone afterwards."""
    out: list[GateOp] = []
    for g in gates:
        if len(g.targets) == 1:
            out.append(g)
            continue
        a, b = g.targets
        lo, hi = (a, b) if a < b else (b, a)
        if hi - lo == 1:
            out.append(g)
            continue
        chain = [(q, q + 1) for q in range(lo, hi - 1)]
        out.extend(_swap_gate(*pair) for pair in chain)
        moved = tuple(hi - 1 if t == lo else t for t in g.targets)
        out.append(replace_targets(g, moved))
        out.extend(_swap_gate(*pair) for pair in reversed(chain))
    return out


def _oriented_pair_matrix(g: GateOp) -> tuple[np.ndarray, int]:
    """Matrix of an adjacent-wire gate over its sorted pair; returns (m, lo)."""
    a, b = g.targets
    lo, hi = (a, b) if a < b else (b, a)
    if hi - lo != 1:
        raise DecompositionError(f"gate on {g.targets} must be routed to adjacent wires first")
    m = g.matrix()
    return (m, lo) if a < b else (_SWAP4 @ m @ _SWAP4, lo)


def fuse_pair_runs(gates) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    """Compose consecutive gates sharing one <=2 qubit adjacent support.

    Output entries are (matrix, support) with sorted supports; every input
    gate lands in exactly one output entry.
    """
    out: list[tuple[np.ndarray, tuple[int, ...]]] = []
    support: tuple[int, ...] | None = None
    acc: np.ndarray | None = None

    def flush():
        nonlocal support, acc
        if support is not None:
            out.append((acc, support))
            support, acc = None, None

    for g in gates:
        if len(g.targets) == 2:
            mat, lo = _oriented_pair_matrix(g)
            tg = (lo, lo + 1)
        else:
            mat, tg = g.matrix(), g.targets
        if support == tg:
            acc = mat @ acc
        elif support is not None and len(tg) == 1 and tg[0] in support:
            grow = (
                np.kron(mat, np.eye(2)) if tg[0] == support[0] else np.kron(np.eye(2), mat)
            )
            acc = grow @ acc
        elif support is not None and len(support) == 1 and len(tg) == 2 and support[0] in tg:
            grow = (
                np.kron(acc, np.eye(2)) if support[0] == tg[0] else np.kron(np.eye(2), acc)
            )
            support, acc = tg, mat @ grow
        else:
            flush()
            support, acc = tg, mat
    flush()
    return out


@dataclass(frozen=True)
class BrickworkLayout:
    """Alternating nearest-neighbour brick grid with resolved 15-angle bricks.

    ``angles`` is the full parameter vector over all slots, enumerated layer
    by layer and brick by brick (matching ``build_hea_family``'s order);
    slots left at the identity hold zeros.
    """

    n_qubits: int
    depth: int
    angles: np.ndarray

    def total_params(self) -> int:
        return len(self.angles)

    def slot_index(self) -> list[tuple[int, int]]:
        """(layer, pair-start) per brick, in parameter order."""
        idx = []
        for layer in range(self.depth):
            for a, _ in brick_pairs(self.n_qubits, layer):
                idx.append((layer, a))
        return idx

    def instantiate(self, theta=None) -> list[GateOp]:
        theta = self.angles if theta is None else np.asarray(theta, dtype=float)
        if theta.shape != self.angles.shape:
            raise ValidationError("theta length must match the layout's slot count")
        gates = []
        for k, (layer, a) in enumerate(self.slot_index()):
            gates.append(FixedUnitary((a, a + 1), brick_matrix(theta[15 * k : 15 * k + 15])))
        return gates

    def family_template(self, observable: Observable) -> CircuitTemplate:
        return build_hea_family(HeaConfig(self.n_qubits, self.depth, observable))

    def expectation_at(self, observable: Observable, theta=None) -> float:
        state = run_gates(self.instantiate(theta), self.n_qubits)
        return expectation(state, observable)

    def to_json(self) -> str:
        bricks = [
            {"layer": layer, "qubits": [a, a + 1], "angles": list(self.angles[15 * k : 15 * k + 15])}
            for k, (layer, a) in enumerate(self.slot_index())
        ]
        return json.dumps(
            {
                "format": "varivery-brickwork-v1",
                "n_qubits": self.n_qubits,
                "depth": self.depth,
                "total_params": self.total_params(),
                "param_map": bricks,
            },
            sort_keys=True,
        )


def compile_brickwork(gates, n_qubits: int) -> BrickworkLayout:
    """Lower a gate list onto the brick grid; expectations are preserved
    within compounding KAK tolerance (each brick reconstructs to 1e-10, up to
    a harmless global phase)."""
    expanded: list[GateOp] = []
    for g in gates:
        expanded.extend(expand_gate(g))
    routed = route_to_neighbours(expanded)
    fused = fuse_pair_runs(routed)

    frontier = [0] * n_qubits
    placements: list[tuple[int, int, np.ndarray]] = []  # (layer, pair-start, matrix)
    depth = 0
    for mat, support in fused:
        if len(support) == 2:
            lo = support[0]
            m4 = mat
            earliest = max(frontier[lo], frontier[lo + 1])
            layer = earliest + ((lo - earliest) % 2)
            frontier[lo] = frontier[lo + 1] = layer + 1
        else:
            q = support[0]
            # choose the earliest parity-compatible brick containing q
            candidates = []
            if q + 1 < n_qubits:
                e = max(frontier[q], frontier[q + 1])
                candidates.append((e + ((q - e) % 2), q, np.kron(mat, np.eye(2))))
            if q - 1 >= 0:
                e = max(frontier[q - 1], frontier[q])
                candidates.append((e + ((q - 1 - e) % 2), q - 1, np.kron(np.eye(2), mat)))
            layer, lo, m4 = min(candidates, key=lambda c: c[0])
            frontier[lo] = frontier[lo + 1] = layer + 1
        placements.append((layer, lo, m4))
        depth = max(depth, layer + 1)

    depth = max(depth, 1)
    slot_of = {}
    k = 0
    for layer in range(depth):
        for a, _ in brick_pairs(n_qubits, layer):
            slot_of[(layer, a)] = k
            k += 1
    angles = np.zeros(15 * k)
    for layer, lo, m4 in placements:
        slot = slot_of[(layer, lo)]
        brick_angles, _ = kak_angles(m4)
        angles[15 * slot : 15 * slot + 15] = brick_angles
    return BrickworkLayout(n_qubits=n_qubits, depth=depth, angles=angles)


# ---------------------------------------------------------------------------
# end-to-end experiment


@dataclass(frozen=True)
class Prop1Record:
    lcu_vs_kernel_max_dev: float
    brickwork_vs_lcu_max_dev: float
    bp_estimate: object  # diagnostics.BpEstimate
    kernel_train_accuracy: float
    recovered_train_accuracy: float
    layout_depth: int
    layout_width: int
    layout_params: int

    def headline(self) -> dict:
        return {
            "lcu_vs_kernel_max_dev": self.lcu_vs_kernel_max_dev,
            "brickwork_vs_lcu_max_dev": self.brickwork_vs_lcu_max_dev,
            "uniform_theta_variance": self.bp_estimate.point_estimate,
            "uniform_theta_variance_se": self.bp_estimate.standard_error,
            "kernel_train_accuracy": self.kernel_train_accuracy,
            "recovered_train_accuracy": self.recovered_train_accuracy,
            "layout_depth": self.layout_depth,
            "layout_width": self.layout_width,
            "layout_params": self.layout_params,
        }


def dlp_feature_circuits(inst, k_window: int) -> FeatureCircuits:
    """State-preparation circuits for the coset-window feature map, local to
    the work register."""
    from .hardfn import dlp_feature_state

    n_work = inst.n_bits()

    def circuits(x: int) -> tuple[GateOp, ...]:
        amp = dlp_feature_state(inst, k_window, x).amplitudes.real
        return tuple(state_prep_gates(amp, tuple(range(n_work))))

    return circuits


def run_prop1_experiment(
    p: int,
    g: int,
    k_window: int,
    n_train: int,
    seed: int,
    regularization: float = 1e-3,
    n_equivalence_checks: int = 3,
    bp_n_x: int = 4,
    bp_n_theta: int = 64,
    threads: int | None = None,
) -> Prop1Record:
    """Fit the coset-window kernel model, compile it to a circuit and then to
    a brickwork, verify the chain, and measure the brickwork family's
    concentration under uniform parameters."""
    from .diagnostics import FixedList, UniformAngles, estimate_bp
    from .hardfn import DlpInstance, dlp_feature_state, dlp_msb
    from .kernel import fit, gram, model_accuracy, predict
    from .train import classify, sample_dataset

    ss = np.random.SeedSequence(seed)
    data_seed, check_seed, bp_seed = (s.generate_state(1)[0] for s in ss.spawn(3))
    inst = DlpInstance(p, g)
    pf = dlp_msb(inst)
    train_set = sample_dataset(pf, n_train, data_seed)
    fmap = lambda x: dlp_feature_state(inst, k_window, x)
    model = fit(
        gram(fmap, train_set.xs()),
        train_set.labels(),
        regularization,
        feature_map=fmap,
        feature_map_id=f"dlp_p{p}_g{g}_w{k_window}",
    )
    circuits = dlp_feature_circuits(inst, k_window)
    lcu = compile_lcu(model, circuits)

    rng = np.random.default_rng(check_seed)
    probe_xs = list(train_set.xs()) + [inst.sample_element(rng) for _ in range(8)]
    lcu_dev = max(abs(lcu_score(lcu, x) - predict(model, x)) for x in probe_xs)

    brick_dev = 0.0
    layout = None
    for x in probe_xs[:n_equivalence_checks]:
        layout = compile_brickwork(pre_decompose(lcu.gate_list(x)), lcu.n_qubits())
        brick = layout.expectation_at(lcu.measurement)
        brick_dev = max(brick_dev, abs(brick - lcu_expectation(lcu, x)))

    family = layout.family_template(lcu.measurement)
    bp = estimate_bp(
        family,
        UniformAngles(),
        FixedList((probe_xs[0],)),
        bp_n_x,
        bp_n_theta,
        seed=bp_seed,
        threads=threads,
    )

    kernel_acc = model_accuracy(model, train_set)
    recovered_acc = float(
        np.mean([classify(lcu_score(lcu, x)) == y for x, y in train_set.samples])
    )
    return Prop1Record(
        lcu_vs_kernel_max_dev=float(lcu_dev),
        brickwork_vs_lcu_max_dev=float(brick_dev),
        bp_estimate=bp,
        kernel_train_accuracy=kernel_acc,
        recovered_train_accuracy=recovered_acc,
        layout_depth=layout.depth,
        layout_width=layout.n_qubits,
        layout_params=layout.total_params(),
    )
