"""Circuit templates and builders.

A ``CircuitTemplate`` is a layered circuit with three slot kinds per layer:
data-dependent gates (resolved per input x), free rotation parameters, and
fixed gates. Builders cover the layered adder-gadget model (``build_varivery``),
the 1-D brickwork ansatz (``build_hea`` / ``build_hea_family``) and the
five-property structural validator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapacityError, ShapeError, ValidationError
from .statevec import (
    MAX_QUBITS,
    AdderGate,
    ControlledBlock,
    FixedUnitary,
    GateOp,
    Hadamard,
    Observable,
    PauliStringSum,
    PauliX,
    RotationX,
    RotationZ,
    StateVector,
    _apply_matrix,
    _apply_to_array,
    controlled_block,
    expectation,
    pauli_z_on,
)

# ---------------------------------------------------------------------------
# slots and templates


@dataclass(frozen=True)
class DataGate:
    """Slot resolved per input x by a registered builder."""

    builder_id: str
    builder: Callable[[int], tuple[GateOp, ...]]
    targets: tuple[int, ...]


@dataclass(frozen=True)
class ParamGate:
    """Free Pauli-rotation slot; ``kind`` is 'rx' or 'rz'."""

    kind: str
    index: int
    target: int

    def __post_init__(self):
        if self.kind not in ("rx", "rz"):
            raise ValidationError(f"parameter slots must be rx/rz rotations, got {self.kind!r}")

    def gate(self, angle: float) -> GateOp:
        cls = RotationX if self.kind == "rx" else RotationZ
        return cls((self.target,), angle)


@dataclass(frozen=True)
class FixedGate:
    gate: GateOp


Slot = DataGate | ParamGate | FixedGate


def _slot_targets(slot: Slot) -> tuple[int, ...]:
    if isinstance(slot, DataGate):
        return slot.targets
    if isinstance(slot, ParamGate):
        return (slot.target,)
    return slot.gate.targets


@dataclass(frozen=True)
class LayerSpec:
    gates: tuple[Slot, ...]


@dataclass(frozen=True)
class ConstructionMeta:
    """Builder-recorded facts the structural validator cannot infer."""

    builder: str
    layer_count: int
    depth_tunable: bool
    starts_from_zero: bool = True
    observable_layer_independent: bool = True
    observable_rebuild: Callable[[int], Observable] | None = None


@dataclass(frozen=True)
class CircuitTemplate:
    n_qubits: int
    layers: tuple[LayerSpec, ...]
    observable: Observable
    param_count: int
    meta: ConstructionMeta | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_qubits > MAX_QUBITS:
            raise CapacityError(f"{self.n_qubits} qubits exceeds cap {MAX_QUBITS}")
        if self.observable.span != self.n_qubits:
            raise ShapeError("observable span must match the qubit count")
        used = set()
        for layer in self.layers:
            seen: set[int] = set()
            for slot in layer.gates:
                tg = _slot_targets(slot)
                if any(not 0 <= q < self.n_qubits for q in tg):
                    raise ValidationError(f"slot targets {tg} out of range")
                if seen & set(tg):
                    raise ValidationError("slots within one layer must act on disjoint qubits")
                seen |= set(tg)
                if isinstance(slot, ParamGate):
                    if not 0 <= slot.index < self.param_count:
                        raise ValidationError(f"parameter index {slot.index} out of range")
                    used.add(slot.index)
        if used != set(range(self.param_count)):
            raise ValidationError("parameter indices must cover 0..param_count-1")


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class ResolvedData:
    """Concrete data gates for one input, with a hashable grouping key."""

    key: tuple
    gates: dict  # (layer_idx, slot_idx) -> tuple[GateOp, ...]


def resolve_data(template: CircuitTemplate, x) -> ResolvedData:
    gates = {}
    key = []
    for li, layer in enumerate(template.layers):
        for si, slot in enumerate(layer.gates):
            if isinstance(slot, DataGate):
                resolved = tuple(slot.builder(x))
                gates[(li, si)] = resolved
                key.append((li, si) + tuple(g.key() for g in resolved))
    return ResolvedData(tuple(key), gates)


_SWAP2 = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
_I2 = np.eye(2, dtype=complex)


def _oriented(mat: np.ndarray, targets: tuple[int, ...]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Reorder a 2-qubit matrix so its MSB is the smaller target index."""
    if len(targets) == 1 or targets[0] < targets[1]:
        return mat, targets
    return _SWAP2 @ mat @ _SWAP2, (targets[1], targets[0])


class GateStream:
    """Applies a gate stream to an amplitude array, fusing runs of small gates.

    Single-qubit gates accumulate per-lane as 2x2 products; a two-qubit gate
    folds the lanes of its pair into a 4x4 accumulator. Anything wider (or a
    masked/permutation gate) flushes. Pure speed optimization: the composed
    matrices are exact, so the result is bitwise-stable for a fixed stream.
    """

    def __init__(self, n_qubits: int):
        self.n = n_qubits
        self.amp = np.zeros(2**n_qubits, dtype=complex)
        self.amp[0] = 1.0
        self._lanes: dict[int, np.ndarray] = {}  # pending 1q gates, newest on top
        self._pair: tuple[int, int] | None = None
        self._acc: np.ndarray | None = None  # pending 4x4 on self._pair

    def _fold_lanes(self):
        # lanes on the accumulator pair arrived after it: multiply on the left
        a, b = self._pair
        la = self._lanes.pop(a, None)
        lb = self._lanes.pop(b, None)
        if la is not None or lb is not None:
            if la is None:
                la = _I2
            if lb is None:
                lb = _I2
            m = (la[:, :, None, None] * lb[None, None, :, :]).transpose(0, 2, 1, 3)
            self._acc = m.reshape(4, 4) @ self._acc

    def _flush_acc(self):
        if self._acc is not None:
            self._fold_lanes()
            self.amp = _apply_matrix(self.amp, self._acc, self._pair, self.n)
            self._pair, self._acc = None, None

    def _flush(self):
        self._flush_acc()
        for q, m in self._lanes.items():
            self.amp = _apply_matrix(self.amp, m, (q,), self.n)
        self._lanes.clear()

    def matrix(self, mat: np.ndarray, targets: tuple[int, ...]):
        if len(targets) == 1:
            q = targets[0]
            pending = self._lanes.get(q)
            self._lanes[q] = mat if pending is None else mat @ pending
            return
        mat, targets = _oriented(mat, targets)
        if self._pair != targets:
            self._flush_acc()
            self._pair = targets
            self._acc = np.eye(4, dtype=complex)
        self._fold_lanes()
        self._acc = mat @ self._acc

    def gate(self, g: GateOp):
        if isinstance(g, (ControlledBlock, AdderGate)) or len(g.targets) > 2:
            self._flush()
            self.amp = _apply_to_array(g, self.amp, self.n)
        else:
            self.matrix(g.matrix(), g.targets)

    def finish(self) -> np.ndarray:
        self._flush()
        return self.amp


def run_gates(gates, n_qubits: int) -> StateVector:
    """|0...0> pushed through a gate list with small-gate fusion."""
    stream = GateStream(n_qubits)
    for g in gates:
        stream.gate(g)
    return StateVector(n_qubits, stream.finish())


def concrete_gates(
    template: CircuitTemplate,
    resolved: ResolvedData,
    theta,
    shifts: dict[tuple[int, int], float] | None = None,
) -> list[GateOp]:
    """All gates of the bound circuit, in application order.

    ``shifts`` adds an angle offset to individual parameter slots, keyed by
    (layer, slot) position; used by the per-appearance parameter-shift rule.
    """
    theta = np.asarray(theta, dtype=float)
    if len(theta) != template.param_count:
        raise ShapeError(f"theta length {len(theta)} != param_count {template.param_count}")
    gates: list[GateOp] = []
    for li, layer in enumerate(template.layers):
        for si, slot in enumerate(layer.gates):
            if isinstance(slot, DataGate):
                gates.extend(resolved.gates[(li, si)])
            elif isinstance(slot, ParamGate):
                angle = float(theta[slot.index])
                if shifts:
                    angle += shifts.get((li, si), 0.0)
                gates.append(slot.gate(angle))
            else:
                gates.append(slot.gate)
    return gates


def _compiled_program(template: CircuitTemplate):
    """Flat op list + parameter-slot tables, cached on the template."""
    try:
        return object.__getattribute__(template, "_program")
    except AttributeError:
        pass
    ops: list[tuple] = []
    theta_idx: list[int] = []
    is_rx: list[bool] = []
    slot_pos: list[tuple[int, int]] = []
    for li, layer in enumerate(template.layers):
        for si, slot in enumerate(layer.gates):
            if isinstance(slot, ParamGate):
                ops.append(("p", len(theta_idx), (slot.target,)))
                theta_idx.append(slot.index)
                is_rx.append(slot.kind == "rx")
                slot_pos.append((li, si))
            elif isinstance(slot, DataGate):
                ops.append(("d", (li, si), None))
            elif (
                isinstance(slot.gate, (ControlledBlock, AdderGate)) or len(slot.gate.targets) > 2
            ):
                ops.append(("g", slot.gate, None))
            else:
                # fixed small gate: freeze its matrix once
                ops.append(("m", slot.gate.matrix(), slot.gate.targets))
    program = (
        tuple(ops),
        np.asarray(theta_idx, dtype=int),
        np.asarray(is_rx, dtype=bool),
        tuple(slot_pos),
    )
    object.__setattr__(template, "_program", program)
    return program


def _rotation_matrices(angles: np.ndarray, is_rx: np.ndarray) -> np.ndarray:
    """Batch of 2x2 rotation matrices: RX where is_rx, RZ elsewhere."""
    half = 0.5 * angles
    c, s = np.cos(half), np.sin(half)
    mats = np.zeros((len(angles), 2, 2), dtype=complex)
    rz = ~is_rx
    mats[:, 0, 0] = c - 1j * s * rz
    mats[:, 1, 1] = c + 1j * s * rz
    mats[is_rx, 0, 1] = -1j * s[is_rx]
    mats[is_rx, 1, 0] = -1j * s[is_rx]
    return mats


def _run_template(
    template: CircuitTemplate,
    resolved: ResolvedData,
    theta,
    shifts: dict[tuple[int, int], float] | None = None,
) -> StateVector:
    theta = np.asarray(theta, dtype=float)
    if len(theta) != template.param_count:
        raise ShapeError(f"theta length {len(theta)} != param_count {template.param_count}")
    ops, theta_idx, is_rx, slot_pos = _compiled_program(template)
    angles = theta[theta_idx] if len(theta_idx) else np.zeros(0)
    if shifts:
        for j, pos in enumerate(slot_pos):
            if pos in shifts:
                angles[j] += shifts[pos]
    mats = _rotation_matrices(angles, is_rx)
    stream = GateStream(template.n_qubits)
    for tag, payload, tg in ops:
        if tag == "p":
            stream.matrix(mats[payload], tg)
        elif tag == "m":
            stream.matrix(payload, tg)
        elif tag == "d":
            for g in resolved.gates[payload]:
                stream.gate(g)
        else:
            stream.gate(payload)
    return StateVector(template.n_qubits, stream.finish())


def final_state(template: CircuitTemplate, x, theta) -> StateVector:
    return _run_template(template, resolve_data(template, x), theta)


def evaluate_resolved(
    template: CircuitTemplate,
    resolved: ResolvedData,
    theta,
    shifts: dict[tuple[int, int], float] | None = None,
) -> float:
    state = _run_template(template, resolved, theta, shifts)
    return expectation(state, template.observable)


def evaluate(template: CircuitTemplate, x, theta) -> float:
    """f_theta(x): expectation of the template observable after the circuit."""
    return evaluate_resolved(template, resolve_data(template, x), theta)


def param_slots(template: CircuitTemplate) -> list[tuple[int, int, ParamGate]]:
    """All (layer, slot, ParamGate) positions, in circuit order."""
    return [
        (li, si, slot)
        for li, layer in enumerate(template.layers)
        for si, slot in enumerate(layer.gates)
        if isinstance(slot, ParamGate)
    ]


# ---------------------------------------------------------------------------
# serialization


def _gate_payload(gate: GateOp) -> dict:
    if isinstance(gate, FixedUnitary):
        return {
            "kind": "fixed",
            "targets": list(gate.targets),
            "matrix": [[[z.real, z.imag] for z in row] for row in gate.matrix_data],
        }
    if isinstance(gate, RotationX):
        return {"kind": "rx", "targets": list(gate.targets), "angle": gate.angle}
    if isinstance(gate, RotationZ):
        return {"kind": "rz", "targets": list(gate.targets), "angle": gate.angle}
    if isinstance(gate, Hadamard):
        return {"kind": "h", "targets": list(gate.targets)}
    if isinstance(gate, PauliX):
        return {"kind": "x", "targets": list(gate.targets)}
    if isinstance(gate, AdderGate):
        return {"kind": "adder", "targets": list(gate.targets)}
    if isinstance(gate, ControlledBlock):
        return {
            "kind": "ctrl",
            "controls": list(gate.controls),
            "pattern": gate.pattern,
            "inner": _gate_payload(gate.inner),
        }
    raise TypeError(f"cannot serialize gate {type(gate)}")


def _gate_from_payload(p: dict) -> GateOp:
    kind = p["kind"]
    if kind == "fixed":
        m = np.array([[complex(re, im) for re, im in row] for row in p["matrix"]])
        return FixedUnitary(tuple(p["targets"]), m)
    if kind == "rx":
        return RotationX(tuple(p["targets"]), p["angle"])
    if kind == "rz":
        return RotationZ(tuple(p["targets"]), p["angle"])
    if kind == "h":
        return Hadamard(tuple(p["targets"]))
    if kind == "x":
        return PauliX(tuple(p["targets"]))
    if kind == "adder":
        return AdderGate(tuple(p["targets"]))
    if kind == "ctrl":
        return controlled_block(p["controls"], p["pattern"], _gate_from_payload(p["inner"]))
    raise ValidationError(f"unknown gate kind {kind!r}")


def _slot_payload(slot: Slot) -> dict:
    if isinstance(slot, DataGate):
        return {"slot": "data", "builder": slot.builder_id, "targets": list(slot.targets)}
    if isinstance(slot, ParamGate):
        return {"slot": "param", "kind": slot.kind, "index": slot.index, "target": slot.target}
    return {"slot": "fixed", "gate": _gate_payload(slot.gate)}


def observable_from_payload(p: dict) -> Observable:
    from .statevec import DenseHermitian, TensorPair, ZeroProjector

    form = p["form"]
    if form == "pauli_sum":
        return PauliStringSum(span=p["span"], terms=tuple((c, w) for c, w in p["terms"]))
    if form == "dense":
        m = np.array([[complex(re, im) for re, im in row] for row in p["matrix"]])
        return DenseHermitian(span=p["span"], matrix=m)
    if form == "zero_projector":
        return ZeroProjector(span=p["span"], qubits=tuple(p["qubits"]))
    if form == "tensor_pair":
        return TensorPair(
            span=p["span"],
            left=observable_from_payload(p["left"]),
            right=observable_from_payload(p["right"]),
        )
    raise ValidationError(f"unknown observable form {form!r}")


def template_payload(template: CircuitTemplate) -> dict:
    return {
        "format": "varivery-circuit-v1",
        "n_qubits": template.n_qubits,
        "param_count": template.param_count,
        "observable": template.observable.to_payload(),
        "layers": [{"gates": [_slot_payload(s) for s in layer.gates]} for layer in template.layers],
    }


def template_to_json(template: CircuitTemplate) -> str:
    return json.dumps(template_payload(template), sort_keys=True, separators=(",", ":"))


def template_from_json(
    text: str, data_builders: dict[str, tuple[Callable, tuple[int, ...]]] | None = None
) -> CircuitTemplate:
    """Inverse of template_to_json; data slots need their builders supplied."""
    p = json.loads(text)
    if p.get("format") != "varivery-circuit-v1":
        raise ValidationError("not a circuit payload")
    layers = []
    for lp in p["layers"]:
        slots: list[Slot] = []
        for sp in lp["gates"]:
            if sp["slot"] == "data":
                if not data_builders or sp["builder"] not in data_builders:
                    raise ValidationError(f"no builder registered for {sp['builder']!r}")
                fn, _ = data_builders[sp["builder"]]
                slots.append(DataGate(sp["builder"], fn, tuple(sp["targets"])))
            elif sp["slot"] == "param":
                slots.append(ParamGate(sp["kind"], sp["index"], sp["target"]))
            else:
                slots.append(FixedGate(_gate_from_payload(sp["gate"])))
        layers.append(LayerSpec(tuple(slots)))
    return CircuitTemplate(
        n_qubits=p["n_qubits"],
        layers=tuple(layers),
        observable=observable_from_payload(p["observable"]),
        param_count=p["param_count"],
    )


def layer_fingerprint(layer: LayerSpec, mask_param_index: bool = True) -> bytes:
    """Byte string identifying a layer, optionally with parameter indices masked."""
    payload = [_slot_payload(s) for s in layer.gates]
    if mask_param_index:
        for sp in payload:
            if sp["slot"] == "param":
                sp["index"] = "*"
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


# ---------------------------------------------------------------------------
# adder gadget and the layered model


def adder_gate(t: int) -> AdderGate:
    """Increment-mod-2^t permutation gate on qubits 0..t-1."""
    if not 1 <= t <= 8:
        raise CapacityError(f"adder register size {t} outside [1, 8]")
    return AdderGate(tuple(range(t)))


def build_tilde_u(
    u_of_x: Callable[[int], tuple[GateOp, ...]], n_data: int, t: int
) -> Callable[[int], tuple[GateOp, ...]]:
    """Enlarge a data unitary so repeated application acts once.

    Returns a builder on n_data + t qubits: the data gates run conditioned on
    the t-qubit counter reading zero, then the counter increments. Applying
    the result L < 2^t times from |0>|0> equals one application of the data
    unitary with the counter left at |L>.
    """
    if not 1 <= t <= 8:
        raise CapacityError(f"adder register size {t} outside [1, 8]")
    if n_data + t > MAX_QUBITS:
        raise CapacityError(f"{n_data + t} qubits exceeds cap {MAX_QUBITS}")
    counter = tuple(range(n_data, n_data + t))

    def builder(x) -> tuple[GateOp, ...]:
        gates = tuple(controlled_block(counter, 0, g) for g in u_of_x(x))
        return gates + (AdderGate(counter),)

    return builder


@dataclass(frozen=True)
class VariVeryConfig:
    hard_fn: "PlantedFunction"  # noqa: F821 - hardfn imports this module
    t: int
    layer_count: int
    data_qubits: int

    def __post_init__(self):
        if self.layer_count < 1:
            raise ValidationError("layer count must be >= 1")
        if self.layer_count >= 2**self.t:
            raise ValidationError(
                f"L={self.layer_count} must stay below 2^t={2**self.t} for the counter gadget"
            )
        if self.data_qubits != self.hard_fn.n_bits:
            raise ValidationError("data_qubits must match the planted function's bit count")
        if self.data_qubits + self.t + 1 > MAX_QUBITS:
            raise CapacityError("register would exceed the simulator cap")


def build_varivery(cfg: VariVeryConfig) -> CircuitTemplate:
    """L identical layers of (conditional data unitary + counter increment) on
    the first n+t qubits, tensored with one trainable RX rotation; measures
    Z(data qubit 0) (x) Z(trainable qubit), identity on the counter."""
    n, t, L = cfg.data_qubits, cfg.t, cfg.layer_count
    trainable = n + t
    tilde = build_tilde_u(cfg.hard_fn.circuit, n, t)
    builder_id = f"tilde_u:{cfg.hard_fn.name}"
    layers = tuple(
        LayerSpec(
            (
                DataGate(builder_id, tilde, tuple(range(n + t))),
                ParamGate("rx", j, trainable),
            )
        )
        for j in range(L)
    )
    observable = pauli_z_on(n + t + 1, 0, trainable)
    meta = ConstructionMeta(
        builder="varivery",
        layer_count=L,
        depth_tunable=True,
        observable_rebuild=lambda _l: pauli_z_on(n + t + 1, 0, trainable),
    )
    return CircuitTemplate(
        n_qubits=n + t + 1,
        layers=layers,
        observable=observable,
        param_count=L,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# 1-D brickwork ansatz


@dataclass(frozen=True)
class HeaConfig:
    n_qubits: int
    depth: int
    observable_kind: str | Observable = "local_z1"  # or "global_z_all" or an Observable

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValidationError("brickwork needs at least 2 qubits")
        if self.depth < 1:
            raise ValidationError("depth must be >= 1")

    def observable(self) -> Observable:
        if isinstance(self.observable_kind, Observable):
            return self.observable_kind
        if self.observable_kind == "local_z1":
            return pauli_z_on(self.n_qubits, 0)
        if self.observable_kind == "global_z_all":
            return pauli_z_on(self.n_qubits, *range(self.n_qubits))
        raise ValidationError(f"unknown observable kind {self.observable_kind!r}")


def brick_pairs(n_qubits: int, layer: int) -> list[tuple[int, int]]:
    """Alternating even/odd nearest-neighbour pairs of one brick column."""
    offset = layer % 2
    return [(q, q + 1) for q in range(offset, n_qubits - 1, 2)]


def hea_brick_count(cfg: HeaConfig) -> int:
    return sum(len(brick_pairs(cfg.n_qubits, ell)) for ell in range(cfg.depth))


def hea_param_count(cfg: HeaConfig) -> int:
    return 15 * hea_brick_count(cfg)


def _ry_slots(target: int, index: int) -> list[Slot]:
    # RY(b) = RZ(pi/2) RX(b) RZ(-pi/2); emitted first-applied first
    return [
        FixedGate(RotationZ((target,), -math.pi / 2)),
        ParamGate("rx", index, target),
        FixedGate(RotationZ((target,), math.pi / 2)),
    ]


def _euler_slots(target: int, base: int) -> list[Slot]:
    # ZYZ(angles[base..base+2]) = RZ(a0) RY(a1) RZ(a2), RZ(a2) applied first
    return (
        [ParamGate("rz", base + 2, target)]
        + _ry_slots(target, base + 1)
        + [ParamGate("rz", base, target)]
    )


_CNOT4 = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def _two_body_slots(a: int, b: int, index: int, basis: str) -> list[Slot]:
    """exp(i k XX/YY/ZZ) with the slot angle equal to -2k (a ZZ rotation
    conjugated into the requested basis)."""
    cnot = FixedGate(FixedUnitary((a, b), _CNOT4))
    core = [cnot, ParamGate("rz", index, b), cnot]
    if basis == "zz":
        return core
    wrap_in: list[Slot] = [FixedGate(Hadamard((a,))), FixedGate(Hadamard((b,)))]
    wrap_out: list[Slot] = [FixedGate(Hadamard((a,))), FixedGate(Hadamard((b,)))]
    if basis == "yy":
        wrap_in = (
            [FixedGate(RotationZ((a,), -math.pi / 2)), FixedGate(RotationZ((b,), -math.pi / 2))]
            + wrap_in
        )
        wrap_out = wrap_out + [
            FixedGate(RotationZ((a,), math.pi / 2)),
            FixedGate(RotationZ((b,), math.pi / 2)),
        ]
    return wrap_in + core + wrap_out


def brick_slots(a: int, b: int, base: int) -> list[Slot]:
    """One 15-angle brick on the pair (a, b), parameter indices base..base+14.

    Matches decomp.brick_matrix's angle layout; interaction slots carry the
    slot angle -2k so uniform slot sampling covers the brick family and the
    all-zero point is the identity.
    """
    slots: list[Slot] = []
    slots += _euler_slots(a, base + 0)
    slots += _euler_slots(b, base + 3)
    slots += _two_body_slots(a, b, base + 6, "xx")
    slots += _two_body_slots(a, b, base + 7, "yy")
    slots += _two_body_slots(a, b, base + 8, "zz")
    slots += _euler_slots(a, base + 9)
    slots += _euler_slots(b, base + 12)
    return slots


def brick_angles_to_slot_angles(brick_angles) -> np.ndarray:
    """Affine map from brick angles to the slot angles of brick_slots.

    Accepts one brick (15,) or a flat multi-brick vector (15*k,).
    """
    out = np.asarray(brick_angles, dtype=float).reshape(-1, 15).copy()
    out[:, 6:9] *= -2.0  # interaction slots hold -2k
    return out.reshape(-1)


def build_hea_family(cfg: HeaConfig) -> CircuitTemplate:
    """Parametrized brickwork family; 15 rotation slots per brick.

    Each brick column is emitted as a run of micro-layers so that every
    LayerSpec keeps disjoint targets; bricks of one column advance in
    lockstep, so slot k of every brick shares a micro-layer.
    """
    layers: list[LayerSpec] = []
    base = 0
    for ell in range(cfg.depth):
        pairs = brick_pairs(cfg.n_qubits, ell)
        if not pairs:  # odd column of a 2-qubit line has no bricks
            continue
        per_brick = [brick_slots(a, b, base + 15 * i) for i, (a, b) in enumerate(pairs)]
        base += 15 * len(pairs)
        steps = len(per_brick[0])
        for k in range(steps):
            layers.append(LayerSpec(tuple(slots[k] for slots in per_brick)))
    meta = ConstructionMeta(builder="hea_family", layer_count=cfg.depth, depth_tunable=True)
    return CircuitTemplate(
        n_qubits=cfg.n_qubits,
        layers=tuple(layers),
        observable=cfg.observable(),
        param_count=base,
        meta=meta,
    )


def build_hea(cfg: HeaConfig, theta) -> CircuitTemplate:
    """Brickwork circuit with bound bricks: one column of dense 2-qubit gates
    per layer, brick unitaries built from 15 angles each."""
    from .decomp import brick_matrix

    theta = np.asarray(theta, dtype=float)
    expected = hea_param_count(cfg)
    if theta.shape != (expected,):
        raise ShapeError(f"theta must have length {expected}, got {theta.shape}")
    layers = []
    base = 0
    for ell in range(cfg.depth):
        pairs = brick_pairs(cfg.n_qubits, ell)
        if not pairs:
            continue
        slots = []
        for a, b in pairs:
            slots.append(FixedGate(FixedUnitary((a, b), brick_matrix(theta[base : base + 15]))))
            base += 15
        layers.append(LayerSpec(tuple(slots)))
    meta = ConstructionMeta(builder="hea", layer_count=cfg.depth, depth_tunable=False)
    return CircuitTemplate(
        n_qubits=cfg.n_qubits,
        layers=tuple(layers),
        observable=cfg.observable(),
        param_count=0,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# property validator


@dataclass
class PropertyReport:
    """The five structural properties of the layered-model recipe.

    Properties 1-4 are decided structurally/from construction metadata;
    property 5 (gradient-based trainability) is behavioral and stays
    deferred until a training run supplies evidence.
    """

    single_repeated_layer: bool
    depth_tunable: bool
    starts_from_zero: bool
    observable_layer_independent: bool
    gradient_trainable: str = "deferred"
    training_evidence: dict | None = None

    def attach_training_evidence(self, evidence: dict) -> None:
        self.gradient_trainable = "confirmed"
        self.training_evidence = evidence

    def structural_all_true(self) -> bool:
        return (
            self.single_repeated_layer
            and self.depth_tunable
            and self.starts_from_zero
            and self.observable_layer_independent
        )


def validate_varivery(
    template: CircuitTemplate, meta: ConstructionMeta | None = None
) -> PropertyReport:
    meta = meta or template.meta
    fingerprints = {layer_fingerprint(layer) for layer in template.layers}
    p1 = len(fingerprints) == 1
    p2 = bool(meta and meta.depth_tunable) and p1
    p3 = bool(meta.starts_from_zero) if meta else True
    if meta and meta.observable_rebuild is not None:
        obs_a = json.dumps(meta.observable_rebuild(meta.layer_count).to_payload(), sort_keys=True)
        obs_b = json.dumps(
            meta.observable_rebuild(meta.layer_count + 1).to_payload(), sort_keys=True
        )
        p4 = obs_a == obs_b
    else:
        p4 = bool(meta and meta.observable_layer_independent)
    return PropertyReport(
        single_repeated_layer=p1,
        depth_tunable=p2,
        starts_from_zero=p3,
        observable_layer_independent=p4,
    )
