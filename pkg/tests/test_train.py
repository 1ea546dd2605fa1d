import math

import numpy as np
import pytest

from varivery.ansatz import VariVeryConfig, build_varivery
from varivery.errors import TrainingAbort, UnsupportedMethodError, ValidationError
from varivery.hardfn import DlpInstance, dlp_msb, parity_fn
from varivery.train import (
    Constant,
    Dataset,
    FiniteDiff,
    GradNormScaled,
    InverseT,
    ParamShift,
    TrainConfig,
    accuracy,
    empirical_mse,
    gradient,
    run_cor2_experiment,
    sample_dataset,
    train_gradient_based,
    wrap_angle,
)


def varivery_template(n=2, t=3, L=4, pf=None):
    pf = pf or parity_fn(n)
    return build_varivery(VariVeryConfig(hard_fn=pf, t=t, layer_count=L, data_qubits=n)), pf


def planted_set(pf, n_samples, seed):
    return sample_dataset(pf, n_samples, seed)


class TestEmpiricalMse:
    def test_perfect_predictor_zero(self):
        template, pf = varivery_template()
        ds = planted_set(pf, 8, seed=0)
        theta = np.array([math.pi / 2, math.pi / 2, math.pi / 2, math.pi / 2])  # sum = 2pi
        assert empirical_mse(template, theta, ds) == pytest.approx(0.0, abs=1e-12)

    def test_all_plus_labels_against_zero_predictor(self):
        # f == 0, all y = +1: risk = 1/2
        from varivery.ansatz import CircuitTemplate, LayerSpec, ParamGate
        from varivery.statevec import PauliStringSum

        template = CircuitTemplate(
            n_qubits=1,
            layers=(LayerSpec((ParamGate("rx", 0, 0),)),),
            observable=PauliStringSum(span=1, terms=((0.0, "Z"),)),
            param_count=1,
        )
        ds = Dataset(tuple((0, 1.0) for _ in range(5)), 1)
        assert empirical_mse(template, np.array([0.3]), ds) == pytest.approx(0.5)

    def test_sum_pi_gives_risk_two(self):
        # f = -y on every sample: (1/2N) sum (2y)^2 = 2
        template, pf = varivery_template()
        ds = planted_set(pf, 8, seed=1)
        theta = np.array([math.pi / 4] * 4)
        assert empirical_mse(template, theta, ds) == pytest.approx(2.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(12))
    def test_reduction_identity(self, seed):
        # risk equals (1/2)(cos(sum theta) - 1)^2 for planted labels
        r = np.random.default_rng(seed)
        template, pf = varivery_template(L=5, t=3)
        ds = planted_set(pf, 10, seed=seed)
        theta = r.uniform(0, 2 * math.pi, 5)
        expected = 0.5 * (math.cos(theta.sum()) - 1.0) ** 2
        assert empirical_mse(template, theta, ds) == pytest.approx(expected, abs=1e-9)


class TestGradient:
    def test_stationary_at_global_minimum(self):
        template, pf = varivery_template()
        ds = planted_set(pf, 8, seed=3)
        theta = np.array([math.pi, math.pi / 2, math.pi / 4, math.pi / 4])  # sum = 2pi
        g = gradient(template, theta, ds, ParamShift())
        assert np.abs(g).max() <= 1e-8

    @pytest.mark.parametrize("seed", range(10))
    def test_param_shift_matches_finite_differences(self, seed):
        r = np.random.default_rng(seed)
        template, pf = varivery_template(L=3, t=2)
        ds = planted_set(pf, 6, seed=seed + 50)
        theta = r.uniform(0, 2 * math.pi, 3)
        ps = gradient(template, theta, ds, ParamShift())
        fd = gradient(template, theta, ds, FiniteDiff(1e-5))
        assert np.abs(ps - fd).max() <= 1e-6

    def test_single_parameter_hand_oracle(self):
        # one-sample model f = cos(theta), y = 1: dR/dtheta = (cos t - 1)(-sin t)
        template, pf = varivery_template(n=1, t=2, L=1, pf=parity_fn(1))
        ds = Dataset(((1, 1.0),), 1)  # parity(1)=1 so <Z1> = +1, f = cos(theta)
        theta = np.array([1.0])
        expected = (math.cos(1.0) - 1.0) * (-math.sin(1.0))
        g = gradient(template, theta, ds, ParamShift())
        assert g[0] == pytest.approx(expected, abs=1e-10)


def descent_oracle(s0: float, eta_times_l: float, steps: int) -> float:
    """Independent 1-D oracle: descend g(s) = (1/2)(cos s - 1)^2."""
    s = s0
    for _ in range(steps):
        s -= eta_times_l * (1.0 - math.cos(s)) * math.sin(s)
    return s


def ascent_oracle(s0: float, eta_times_l: float, steps: int) -> float:
    """Independent 1-D oracle: ascend cos(s)."""
    s = s0
    for _ in range(steps):
        s -= eta_times_l * math.sin(s)
    return s


class TestTrainer:
    def test_zero_steps_trace(self):
        template, pf = varivery_template()
        ds = planted_set(pf, 4, seed=0)
        trace = train_gradient_based(template, ds, TrainConfig(steps=0, seed=1))
        assert len(trace.steps) == 1
        assert trace.n_risk_evaluations == 1

    def test_trace_length_and_eval_audit(self):
        template, pf = varivery_template(L=3, t=2)
        ds = planted_set(pf, 4, seed=0)
        T = 7
        trace = train_gradient_based(template, ds, TrainConfig(steps=T, seed=2))
        assert len(trace.steps) == T + 1
        assert trace.n_risk_evaluations == T * (2 * template.param_count + 1) + 1

    def test_descent_matches_one_dimensional_oracle(self):
        eta, L, T = 0.1, 4, 60
        template, pf = varivery_template(L=L)
        ds = planted_set(pf, 8, seed=5)
        cfg = TrainConfig(steps=T, rate_rule=Constant(eta), seed=9)
        trace = train_gradient_based(template, ds, cfg)
        rng = np.random.default_rng(9)
        s0 = float(cfg.draw_init(rng, L).sum())
        expected = descent_oracle(s0, eta * L, T)
        assert float(trace.final_theta.sum()) == pytest.approx(expected, abs=1e-9)

    def test_ascent_matches_one_dimensional_oracle(self):
        eta, L, T = 0.1, 4, 60
        template, pf = varivery_template(L=L)
        ds = planted_set(pf, 8, seed=5)
        cfg = TrainConfig(steps=T, rate_rule=Constant(eta), seed=11, ascend_alignment=True)
        trace = train_gradient_based(template, ds, cfg)
        rng = np.random.default_rng(11)
        s0 = float(cfg.draw_init(rng, L).sum())
        expected = ascent_oracle(s0, eta * L, T)
        assert float(trace.final_theta.sum()) == pytest.approx(expected, abs=1e-9)

    def test_monotone_decrease_small_rate(self):
        template, pf = varivery_template()
        ds = planted_set(pf, 8, seed=2)
        trace = train_gradient_based(
            template, ds, TrainConfig(steps=120, rate_rule=Constant(0.01), seed=4)
        )
        risks = trace.risks()
        assert np.all(np.diff(risks) <= 1e-12)

    def test_descent_reaches_low_risk(self):
        template, pf = varivery_template(L=4, t=3)
        ds = planted_set(pf, 8, seed=0)
        hits = 0
        for seed in range(10):
            trace = train_gradient_based(
                template, ds, TrainConfig(steps=500, rate_rule=Constant(0.1), seed=seed)
            )
            hits += trace.final_risk() <= 1e-4
        assert hits >= 9

    def test_inverse_t_rule_runs(self):
        template, pf = varivery_template(L=2, t=2)
        ds = planted_set(pf, 4, seed=0)
        trace = train_gradient_based(
            template, ds, TrainConfig(steps=20, rate_rule=InverseT(0.5), seed=0)
        )
        assert trace.final_risk() <= trace.steps[0].risk + 1e-12

    def test_grad_norm_scaled_rule_runs(self):
        template, pf = varivery_template(L=2, t=2)
        ds = planted_set(pf, 4, seed=0)
        trace = train_gradient_based(
            template, ds, TrainConfig(steps=30, rate_rule=GradNormScaled(0.05), seed=1)
        )
        assert np.isfinite(trace.final_risk())

    def test_non_finite_rate_aborts_with_trace(self):
        template, pf = varivery_template(L=2, t=2)
        ds = planted_set(pf, 4, seed=0)
        bad_rule = lambda t, g: math.nan
        with pytest.raises(TrainingAbort) as err:
            train_gradient_based(template, ds, TrainConfig(steps=5, rate_rule=bad_rule, seed=0))
        assert err.value.trace is not None

    def test_finite_diff_trainer_same_eval_count(self):
        template, pf = varivery_template(L=2, t=2)
        ds = planted_set(pf, 4, seed=0)
        trace = train_gradient_based(
            template, ds, TrainConfig(steps=3, gradient_method=FiniteDiff(1e-5), seed=0)
        )
        assert trace.n_risk_evaluations == 3 * (2 * 2 + 1) + 1


class TestWrapAngle:
    def test_interval(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(2 * math.pi) == pytest.approx(0.0)
        assert wrap_angle(7.0) == pytest.approx(7.0 - 2 * math.pi)


class TestCor2Experiment:
    def test_parity_task_converges(self):
        cfg = VariVeryConfig(hard_fn=parity_fn(2), t=3, layer_count=4, data_qubits=2)
        record = run_cor2_experiment(
            cfg,
            TrainConfig(steps=200, rate_rule=Constant(0.1), ascend_alignment=True),
            dataset_size=16,
            seed=0,
        )
        assert record.test_accuracy == 1.0
        assert abs(record.theta_sum_wrapped) <= 1e-2
        assert record.final_risk <= 1e-4
        assert record.property_report.gradient_trainable == "confirmed"

    def test_dlp_task_converges(self):
        pf = dlp_msb(DlpInstance(23, 5))
        cfg = VariVeryConfig(hard_fn=pf, t=3, layer_count=4, data_qubits=5)
        record = run_cor2_experiment(
            cfg,
            TrainConfig(steps=200, rate_rule=Constant(0.1), ascend_alignment=True),
            dataset_size=16,
            seed=1,
        )
        assert record.test_accuracy == 1.0
        assert abs(record.theta_sum_wrapped) <= 1e-2

    def test_single_layer_same_convergence(self):
        cfg = VariVeryConfig(hard_fn=parity_fn(2), t=3, layer_count=1, data_qubits=2)
        record = run_cor2_experiment(
            cfg,
            TrainConfig(steps=300, rate_rule=Constant(0.1), ascend_alignment=True),
            dataset_size=16,
            seed=3,
        )
        assert record.final_risk <= 1e-4

    def test_accuracy_helper_ties_to_plus_one(self):
        from varivery.train import classify

        assert classify(0.0) == 1.0
        assert classify(-1e-13) == 1.0
        assert classify(-0.2) == -1.0


class TestDatasetExport:
    def test_csv_format(self):
        ds = Dataset(((2, 1.0), (1, -1.0)), 2)
        assert ds.to_csv() == "x_bits,label\n10,1\n01,-1\n"

    def test_label_validation(self):
        with pytest.raises(ValidationError):
            Dataset(((0, 0.5),), 1)
