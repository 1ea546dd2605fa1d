import json

import numpy as np
import pytest

from conftest import random_unitary
from varivery.ansatz import (
    ConstructionMeta,
    HeaConfig,
    VariVeryConfig,
    adder_gate,
    brick_angles_to_slot_angles,
    build_hea,
    build_hea_family,
    build_tilde_u,
    build_varivery,
    evaluate,
    hea_param_count,
    layer_fingerprint,
    template_from_json,
    template_to_json,
    validate_varivery,
)
from varivery.errors import CapacityError, ShapeError, ValidationError
from varivery.hardfn import parity_fn
from varivery.statevec import (
    FixedUnitary,
    apply,
    apply_all,
    basis_state,
    overlap,
    pauli_z_on,
    tensor,
    zero_state,
)


class TestAdderGate:
    def test_increment_examples(self):
        a = adder_gate(2)
        for b in (0, 1, 2):
            st = apply(a, basis_state(2, b))
            assert np.allclose(st.amplitudes, basis_state(2, b + 1).amplitudes)

    def test_wraparound(self):
        st = apply(adder_gate(2), basis_state(2, 3))
        assert np.allclose(st.amplitudes, basis_state(2, 0).amplitudes)

    def test_cyclic_order(self):
        a = adder_gate(3)
        for b in range(8):
            st = basis_state(3, b)
            for _ in range(8):
                st = apply(a, st)
            assert np.abs(st.amplitudes - basis_state(3, b).amplitudes).max() <= 1e-12

    def test_range(self):
        with pytest.raises(CapacityError):
            adder_gate(9)
        with pytest.raises(CapacityError):
            adder_gate(0)


def random_u_builder(n, seed, depth=2):
    """Haar-ish data unitary from a few random bricks; ignores x."""
    gates = []
    r = np.random.default_rng(seed)
    if n == 1:
        gates.append(FixedUnitary((0,), random_unitary(2, int(r.integers(1e9)))))
    else:
        for ell in range(depth):
            for q in range((ell % 2), n - 1, 2):
                gates.append(FixedUnitary((q, q + 1), random_unitary(4, int(r.integers(1e9)))))
    return lambda x: tuple(gates)


class TestTildeU:
    def test_single_application(self):
        # after one application the data register holds U(x)|0..0>, counter |1>
        n, t = 2, 3
        u_of_x = random_u_builder(n, seed=7)
        builder = build_tilde_u(u_of_x, n, t)
        st = apply_all(builder(None), zero_state(n + t))
        expected = tensor(apply_all(u_of_x(None), zero_state(n)), basis_state(t, 1))
        assert abs(abs(overlap(st, expected)) - 1.0) <= 1e-10

    def test_zero_applications_identity(self):
        st = zero_state(5)
        assert st.amplitudes[0] == pytest.approx(1.0)

    def test_conditional_x_five_layers(self):
        # data circuit = X on qubit 0; 5 applications with t=3 leave |10>|101>
        n, t, L = 2, 3, 5
        builder = build_tilde_u(lambda x: (FixedUnitary((0,), np.array([[0, 1], [1, 0]], dtype=complex)),), n, t)
        st = zero_state(n + t)
        for _ in range(L):
            st = apply_all(builder(None), st)
        expected = tensor(basis_state(n, 0b10), basis_state(t, L))
        assert abs(abs(overlap(st, expected)) - 1.0) <= 1e-12

    @pytest.mark.parametrize("t", [2, 3, 4])
    def test_telescoping_random_unitaries(self, t):
        # L sequential applications act once on the data register
        n = 2
        for seed in range(3):
            u_of_x = random_u_builder(n, seed=seed + 10 * t)
            builder = build_tilde_u(u_of_x, n, t)
            gates = builder(None)
            u_target = apply_all(u_of_x(None), zero_state(n))
            st = zero_state(n + t)
            for ell in range(1, 2**t):
                st = apply_all(gates, st)
                expected = tensor(u_target, basis_state(t, ell))
                assert abs(abs(overlap(st, expected)) - 1.0) <= 1e-9

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_tilde_u(lambda x: (), 22, 5)


class TestBuildVarivery:
    def cfg(self, n=1, t=2, L=3):
        return VariVeryConfig(hard_fn=parity_fn(n), t=t, layer_count=L, data_qubits=n)

    def test_identity_data_all_theta_zero(self):
        # parity(0) = 0 -> X flip; use x with Q(x)=1 so the data part is trivial
        template = build_varivery(self.cfg())
        val = evaluate(template, 1, np.zeros(3))
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_sum_two_pi_gives_plus_one(self):
        template = build_varivery(self.cfg())
        theta = np.array([2 * np.pi - 1.4, 0.9, 0.5])
        assert evaluate(template, 1, theta) == pytest.approx(1.0, abs=1e-10)

    def test_sum_pi_gives_minus_one(self):
        # cos(sum theta) oracle: RX angles add because rotations about X commute
        template = build_varivery(self.cfg())
        theta = np.array([np.pi / 2, np.pi / 4, np.pi / 4])
        assert evaluate(template, 1, theta) == pytest.approx(-1.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_factorization_product_structure(self, seed):
        # f(x; theta) = <Z_1>(x) * cos(sum theta) for every input and angle draw
        r = np.random.default_rng(seed)
        pf = parity_fn(2)
        cfg = VariVeryConfig(hard_fn=pf, t=3, layer_count=4, data_qubits=2)
        template = build_varivery(cfg)
        theta = r.uniform(0, 2 * np.pi, 4)
        x = int(r.integers(0, 4))
        expected = pf.label(x) * np.cos(theta.sum())
        assert evaluate(template, x, theta) == pytest.approx(expected, abs=1e-9)

    def test_layer_identity_invariant(self):
        template = build_varivery(self.cfg(L=3))
        prints = {layer_fingerprint(layer) for layer in template.layers}
        assert len(prints) == 1
        unmasked = {layer_fingerprint(layer, mask_param_index=False) for layer in template.layers}
        assert len(unmasked) == 3  # they differ only in the parameter index

    def test_l_window_validation(self):
        with pytest.raises(ValidationError):
            self.cfg(t=2, L=4)

    def test_rx_group_property(self):
        # composing RX(a) then RX(b) equals RX(a+b)
        from varivery.statevec import RotationX

        a, b = 0.7, 1.9
        st1 = apply(RotationX((0,), b), apply(RotationX((0,), a), zero_state(1)))
        st2 = apply(RotationX((0,), a + b), zero_state(1))
        assert np.abs(st1.amplitudes - st2.amplitudes).max() <= 1e-12


class TestBuildHea:
    def test_identity_point(self):
        cfg = HeaConfig(3, 2, "local_z1")
        template = build_hea(cfg, np.zeros(hea_param_count(cfg)))
        assert evaluate(template, None, np.zeros(0)) == pytest.approx(1.0, abs=1e-12)

    def test_bell_via_brick(self):
        # one brick realizing CNOT.(H x I) gives <ZZ> = +1
        from varivery.decomp import kak_angles

        H2 = np.sqrt(0.5) * np.array([[1, 1], [1, -1]], dtype=complex)
        CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
        angles, _ = kak_angles(CNOT @ np.kron(H2, np.eye(2)))
        cfg = HeaConfig(2, 1, "global_z_all")
        template = build_hea(cfg, angles)
        assert evaluate(template, None, np.zeros(0)) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_global_expectation_bounded(self, seed):
        cfg = HeaConfig(4, 4, "global_z_all")
        r = np.random.default_rng(seed)
        template = build_hea(cfg, r.uniform(0, 2 * np.pi, hea_param_count(cfg)))
        assert abs(evaluate(template, None, np.zeros(0))) <= 1.0 + 1e-12

    def test_wrong_parameter_count(self):
        with pytest.raises(ShapeError):
            build_hea(HeaConfig(3, 2), np.zeros(7))

    @pytest.mark.parametrize("n,depth,seed", [(2, 2, 0), (3, 3, 1), (4, 2, 2), (5, 3, 3)])
    def test_family_matches_bound(self, n, depth, seed):
        cfg = HeaConfig(n, depth, "global_z_all")
        r = np.random.default_rng(seed)
        theta = r.uniform(0, 2 * np.pi, hea_param_count(cfg))
        bound = evaluate(build_hea(cfg, theta), None, np.zeros(0))
        fam = evaluate(build_hea_family(cfg), None, brick_angles_to_slot_angles(theta))
        assert fam == pytest.approx(bound, abs=1e-10)


class TestValidator:
    def test_varivery_passes_structural_properties(self):
        template = build_varivery(
            VariVeryConfig(hard_fn=parity_fn(2), t=3, layer_count=4, data_qubits=2)
        )
        report = validate_varivery(template)
        assert report.structural_all_true()
        assert report.gradient_trainable == "deferred"
        report.attach_training_evidence({"final_risk": 1e-9})
        assert report.gradient_trainable == "confirmed"

    def test_depth_varying_bricks_fail_layer_identity(self):
        cfg = HeaConfig(3, 2, "local_z1")
        r = np.random.default_rng(0)
        template = build_hea(cfg, r.uniform(0, 2 * np.pi, hea_param_count(cfg)))
        report = validate_varivery(template)
        assert not report.single_repeated_layer

    def test_l_dependent_observable_fails_p4(self):
        template = build_varivery(
            VariVeryConfig(hard_fn=parity_fn(1), t=2, layer_count=2, data_qubits=1)
        )
        bad_meta = ConstructionMeta(
            builder="varivery",
            layer_count=2,
            depth_tunable=True,
            observable_rebuild=lambda L: pauli_z_on(4, L % 4),
        )
        report = validate_varivery(template, bad_meta)
        assert not report.observable_layer_independent
        assert report.single_repeated_layer


class TestSerialization:
    def test_round_trip_lossless_hea(self):
        cfg = HeaConfig(3, 2, "global_z_all")
        r = np.random.default_rng(4)
        template = build_hea(cfg, r.uniform(0, 2 * np.pi, hea_param_count(cfg)))
        text = template_to_json(template)
        back = template_from_json(text)
        assert template_to_json(back) == text
        assert evaluate(back, None, np.zeros(0)) == evaluate(template, None, np.zeros(0))

    def test_round_trip_with_data_slots(self):
        pf = parity_fn(2)
        template = build_varivery(VariVeryConfig(hard_fn=pf, t=2, layer_count=3, data_qubits=2))
        text = template_to_json(template)
        builders = {f"tilde_u:{pf.name}": (build_tilde_u(pf.circuit, 2, 2), tuple(range(4)))}
        back = template_from_json(text, builders)
        assert template_to_json(back) == text
        theta = np.array([0.3, 0.4, 0.5])
        assert evaluate(back, 2, theta) == pytest.approx(evaluate(template, 2, theta), abs=1e-12)

    def test_schema_fields_present(self):
        template = build_varivery(
            VariVeryConfig(hard_fn=parity_fn(1), t=2, layer_count=2, data_qubits=1)
        )
        payload = json.loads(template_to_json(template))
        assert set(payload) == {"format", "n_qubits", "param_count", "observable", "layers"}
        assert payload["param_count"] == 2

    def test_missing_builder_raises(self):
        template = build_varivery(
            VariVeryConfig(hard_fn=parity_fn(1), t=2, layer_count=2, data_qubits=1)
        )
        with pytest.raises(ValidationError):
            template_from_json(template_to_json(template))


class TestTemplateValidation:
    def test_overlapping_layer_targets_rejected(self):
        from varivery.ansatz import CircuitTemplate, FixedGate, LayerSpec
        from varivery.statevec import Hadamard

        with pytest.raises(ValidationError):
            CircuitTemplate(
                n_qubits=1,
                layers=(LayerSpec((FixedGate(Hadamard((0,))), FixedGate(Hadamard((0,))))),),
                observable=pauli_z_on(1, 0),
                param_count=0,
            )
