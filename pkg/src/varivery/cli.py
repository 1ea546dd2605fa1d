"""Experiment runner CLI.

``varivery run --config FILE [--set k=v]... [--out-dir DIR] [--seed N]
[--threads N]`` executes one named experiment and writes ``summary.json``
plus experiment CSVs into the output directory. ``varivery list`` prints the
registry. Exit codes: 0 success, 2 config/validation error, 3 numerical
abort; stderr carries a one-line machine-parsable reason.

Reproducibility contract: identical config + seed produce byte-identical
CSVs at any thread count. CSV files use LF line endings and 17-significant-
digit floats; the wall clock lives only in summary.json.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .ansatz import HeaConfig, VariVeryConfig, build_hea_family, build_tilde_u
from .diagnostics import (
    FixedList,
    GroupElements,
    UniformAngles,
    UniformBitstrings,
    bp_scaling_sweep,
    estimate_vanishing_similarity,
)
from .errors import ValidationError
from .hardfn import DlpInstance, dlp_feature_state, dlp_msb, parity_fn
from .kernel import classical_baseline_fit, fit, gram, model_accuracy
from .lcu import run_prop1_experiment
from .statevec import FixedUnitary, apply_all, basis_state, overlap, tensor, zero_state
from .train import (
    Constant,
    FiniteDiff,
    GradNormScaled,
    InverseT,
    ParamShift,
    TrainConfig,
    gradient,
    run_cor2_experiment,
    sample_dataset,
)

_CONFIG_KEYS = {"experiment", "parameters", "seed", "out_dir"}
# ValidationError/CapacityError/ShapeError/DomainError and friends are
# ValueError subclasses; bad parameter types surface as TypeError
_VALIDATION_ERRORS = (ValueError, TypeError, KeyError, FileNotFoundError)
# TrainingAbort/ConditioningError/DecompositionError subclass ArithmeticError
_NUMERICAL_ERRORS = (ArithmeticError,)


def fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(header: list[str], rows: list[dict]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(row[h]) for h in header))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# experiment runners: params -> (headline metrics, {filename: text})


def _random_brick_unitary_gates(n: int, rng: np.random.Generator):
    from scipy.stats import unitary_group

    gates = []
    if n == 1:
        gates.append(FixedUnitary((0,), unitary_group.rvs(2, random_state=int(rng.integers(1e9)))))
    else:
        for ell in range(2):
            for q in range(ell % 2, n - 1, 2):
                gates.append(
                    FixedUnitary(
                        (q, q + 1), unitary_group.rvs(4, random_state=int(rng.integers(1e9)))
                    )
                )
    return tuple(gates)


def _run_tilde_u_check(params, seed, threads):
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for n in params["n_list"]:
        for t in params["t_list"]:
            for trial in range(params["n_unitaries"]):
                gates = _random_brick_unitary_gates(n, rng)
                builder = build_tilde_u(lambda x: gates, n, t)
                layer_gates = builder(None)
                target = apply_all(gates, zero_state(n))
                state = zero_state(n + t)
                for ell in range(1, 2**t):
                    state = apply_all(layer_gates, state)
                    expected = tensor(target, basis_state(t, ell))
                    deviation = abs(1.0 - abs(overlap(state, expected)))
                    worst = max(worst, deviation)
                    rows.append(
                        {"n": n, "t": t, "L": ell, "trial": trial, "overlap_deviation": deviation}
                    )
    csv = write_csv(["n", "t", "L", "trial", "overlap_deviation"], rows)
    return {"max_overlap_deviation": worst, "n_checks": len(rows)}, {"telescoping.csv": csv}


def _planted_from_params(params):
    if params["task"] == "parity":
        return parity_fn(params["n_bits"])
    if params["task"] == "dlp_msb":
        return dlp_msb(DlpInstance(params["p"], params["g"]))
    raise ValidationError(f"unknown task {params['task']!r}")


def _rate_rule_from_params(params):
    kind = params["rate_rule"]
    if kind == "constant":
        return Constant(params["eta"])
    if kind == "inverse_t":
        return InverseT(params["eta"])
    if kind == "grad_norm_scaled":
        return GradNormScaled(params["eta"], params["grad_norm_eps"])
    raise ValidationError(f"unknown rate rule {kind!r}")


def _run_cor2_train(params, seed, threads):
    pf = _planted_from_params(params)
    cfg = VariVeryConfig(
        hard_fn=pf,
        t=params["t"],
        layer_count=params["layer_count"],
        data_qubits=pf.n_bits,
    )
    train_cfg = TrainConfig(
        steps=params["steps"],
        rate_rule=_rate_rule_from_params(params),
        ascend_alignment=params["ascend_alignment"],
    )
    record = run_cor2_experiment(cfg, train_cfg, params["dataset_size"], seed)
    return record.headline(), {"trace.csv": record.trace.to_csv()}


def _run_bp_sweep(params, seed, threads):
    family = params["family"]
    if family == "deep_global":
        builder = lambda n: build_hea_family(HeaConfig(n, n, "global_z_all"))
    elif family == "shallow_local":
        builder = lambda n: build_hea_family(HeaConfig(n, 1, "local_z1"))
    else:
        raise ValidationError(f"unknown family {family!r}")
    curve = bp_scaling_sweep(
        builder,
        params["n_list"],
        UniformAngles(),
        lambda n: FixedList((0,)),
        params["n_x"],
        params["n_theta"],
        seed=seed,
        threads=threads,
    )
    csv = write_csv(
        ["n", "point_estimate", "std_error", "n_x", "n_theta", "seed"], curve.rows(seed)
    )
    headline = {
        "slope": curve.slope,
        "slope_se": curve.slope_se,
        "estimates": [e.point_estimate for e in curve.estimates],
    }
    return headline, {"bp_sweep.csv": csv}


def _run_vanishing_similarity(params, seed, threads):
    if params["feature"] == "dlp":
        inst = DlpInstance(params["p"], params["g"])
        fmap = lambda x: dlp_feature_state(inst, params["k_window"], x)
        d_x = GroupElements(inst)
        n_qubits = inst.n_bits()
    elif params["feature"] == "basis":
        n_qubits = params["n_bits"]
        fmap = lambda x: basis_state(n_qubits, x)
        d_x = UniformBitstrings(n_qubits)
    else:
        raise ValidationError(f"unknown feature {params['feature']!r}")
    est = estimate_vanishing_similarity(fmap, d_x, params["n_pairs"], seed, threads=threads)
    row = {
        "n": n_qubits,
        "point_estimate": est.point_estimate,
        "std_error": est.standard_error,
        "n_x": est.n_x_samples,
        "n_theta": est.n_theta_samples,
        "seed": seed,
    }
    csv = write_csv(["n", "point_estimate", "std_error", "n_x", "n_theta", "seed"], [row])
    headline = {"point_estimate": est.point_estimate, "std_error": est.standard_error}
    return headline, {"vanishing_similarity.csv": csv}


def _run_kernel_dlp(params, seed, threads):
    ss = np.random.SeedSequence(seed)
    train_seed, test_seed, baseline_seed = (s.generate_state(1)[0] for s in ss.spawn(3))
    inst = DlpInstance(params["p"], params["g"])
    pf = dlp_msb(inst)
    fmap = lambda x: dlp_feature_state(inst, params["k_window"], x)
    train_set = sample_dataset(pf, params["train_size"], train_seed)
    test_set = sample_dataset(pf, params["test_size"], test_seed)
    gm = gram(fmap, train_set.xs())
    model = fit(
        gm,
        train_set.labels(),
        params["regularization"],
        feature_map=fmap,
        feature_map_id=f"dlp_p{params['p']}_g{params['g']}_w{params['k_window']}",
    )
    residual = float(
        np.abs(
            (gm.entries + params["regularization"] * np.eye(len(gm.support))) @ model.alpha
            - train_set.labels()
        ).max()
    )
    baseline = classical_baseline_fit(train_set, params["baseline"], seed=int(baseline_seed) % 2**31)
    acc_rows = [
        {
            "method": "kernel",
            "train_accuracy": model_accuracy(model, train_set),
            "test_accuracy": model_accuracy(model, test_set),
        },
        {
            "method": f"baseline_{params['baseline']}",
            "train_accuracy": baseline.accuracy(train_set),
            "test_accuracy": baseline.accuracy(test_set),
        },
    ]
    headline = {
        "kernel_train_accuracy": acc_rows[0]["train_accuracy"],
        "kernel_test_accuracy": acc_rows[0]["test_accuracy"],
        "baseline_train_accuracy": acc_rows[1]["train_accuracy"],
        "baseline_test_accuracy": acc_rows[1]["test_accuracy"],
        "gram_min_eigenvalue": gm.min_eigenvalue(),
        "ridge_residual": residual,
    }
    artifacts = {
        "gram.csv": gm.to_csv(),
        "model.json": model.to_json() + "\n",
        "accuracy.csv": write_csv(["method", "train_accuracy", "test_accuracy"], acc_rows),
        "train_set.csv": train_set.to_csv(),
    }
    return headline, artifacts


def _run_prop1_lcu(params, seed, threads):
    record = run_prop1_experiment(
        params["p"],
        params["g"],
        params["k_window"],
        params["train_size"],
        seed,
        regularization=params["regularization"],
        n_equivalence_checks=params["n_equivalence_checks"],
        bp_n_x=params["bp_n_x"],
        bp_n_theta=params["bp_n_theta"],
        threads=threads,
    )
    rows = [
        {
            "check": "lcu_vs_kernel",
            "max_deviation": record.lcu_vs_kernel_max_dev,
        },
        {
            "check": "brickwork_vs_lcu",
            "max_deviation": record.brickwork_vs_lcu_max_dev,
        },
    ]
    csv = write_csv(["check", "max_deviation"], rows)
    return record.headline(), {"equivalence.csv": csv}


def _run_grad_check(params, seed, threads):
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for trial in range(params["n_configs"]):
        n = int(rng.integers(1, 3))
        t = 2
        layers = int(rng.integers(1, 4))
        pf = parity_fn(n)
        from .ansatz import build_varivery

        template = build_varivery(
            VariVeryConfig(hard_fn=pf, t=t, layer_count=layers, data_qubits=n)
        )
        ds = sample_dataset(pf, int(rng.integers(2, 9)), int(rng.integers(2**31)))
        theta = rng.uniform(0, 2 * np.pi, layers)
        ps = gradient(template, theta, ds, ParamShift())
        fd = gradient(template, theta, ds, FiniteDiff(params["fd_step"]))
        dev = float(np.abs(ps - fd).max())
        worst = max(worst, dev)
        rows.append({"trial": trial, "layers": layers, "max_abs_deviation": dev})
    csv = write_csv(["trial", "layers", "max_abs_deviation"], rows)
    return {"max_abs_deviation": worst, "n_configs": params["n_configs"]}, {"grad_check.csv": csv}


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class ExperimentDef:
    name: str
    description: str
    anchor: str
    defaults: dict
    runner: Callable


REGISTRY: tuple[ExperimentDef, ...] = (
    ExperimentDef(
        "tilde_u_check",
        "counter-gadget telescoping: L applications act once on the data register",
        "Corollary 2 gadget",
        {"n_list": [1, 2, 3], "t_list": [2, 3], "n_unitaries": 5},
        _run_tilde_u_check,
    ),
    ExperimentDef(
        "cor2_train",
        "end-to-end gradient training of the layered counter-gadget model",
        "Corollary 2",
        {
            "task": "parity",
            "n_bits": 2,
            "p": 23,
            "g": 5,
            "t": 3,
            "layer_count": 4,
            "dataset_size": 32,
            "steps": 500,
            "rate_rule": "constant",
            "eta": 0.1,
            "grad_norm_eps": 1e-8,
            "ascend_alignment": True,
        },
        _run_cor2_train,
    ),
    ExperimentDef(
        "bp_sweep",
        "variance-vs-qubits scaling of a brickwork family under uniform angles",
        "Definition 2",
        {"family": "deep_global", "n_list": [2, 3, 4, 5, 6], "n_x": 16, "n_theta": 128},
        _run_bp_sweep,
    ),
    ExperimentDef(
        "vanishing_similarity",
        "kernel-value concentration over random input pairs",
        "Definition 2 (kernel analogue)",
        {"feature": "dlp", "p": 23, "g": 5, "k_window": 2, "n_bits": 4, "n_pairs": 256},
        _run_vanishing_similarity,
    ),
    ExperimentDef(
        "kernel_dlp",
        "coset-window kernel fit on the discrete-log task plus a linear baseline",
        "Appendix B/C pipeline",
        {
            "p": 23,
            "g": 5,
            "k_window": 2,
            "train_size": 32,
            "test_size": 16,
            "regularization": 1e-3,
            "baseline": "logistic",
        },
        _run_kernel_dlp,
    ),
    ExperimentDef(
        "prop1_lcu",
        "kernel model compiled to an LCU circuit and a brickwork; checks the "
        "trained-yet-concentrated combination",
        "Proposition 1",
        {
            "p": 7,
            "g": 3,
            "k_window": 1,
            "train_size": 2,
            "regularization": 1e-3,
            "n_equivalence_checks": 2,
            "bp_n_x": 4,
            "bp_n_theta": 64,
        },
        _run_prop1_lcu,
    ),
    ExperimentDef(
        "grad_check",
        "parameter-shift gradients against central finite differences",
        "Algorithm 1 plumbing",
        {"n_configs": 20, "fd_step": 1e-5},
        _run_grad_check,
    ),
)

_BY_NAME = {e.name: e for e in REGISTRY}


def list_experiments() -> str:
    lines = []
    for e in REGISTRY:
        lines.append(f"{e.name} → {e.anchor} — {e.description}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# config handling


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ValidationError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def resolve_config(payload: dict, overrides=(), seed=None, out_dir=None):
    unknown = set(payload) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in payload:
        raise ValidationError("config must name an experiment")
    name = payload["experiment"]
    if name not in _BY_NAME:
        raise ValidationError(f"unknown experiment {name!r}")
    exp = _BY_NAME[name]
    params = dict(exp.defaults)
    given = payload.get("parameters", {})
    unknown = set(given) - set(params)
    if unknown:
        raise ValidationError(f"unknown parameters for {name}: {sorted(unknown)}")
    params.update(given)
    for text in overrides:
        key, value = _parse_override(text)
        if key not in params:
            raise ValidationError(f"unknown parameter override {key!r} for {name}")
        params[key] = value
    resolved_seed = seed if seed is not None else payload.get("seed", 0)
    resolved_out = out_dir if out_dir is not None else payload.get("out_dir", f"out_{name}")
    return exp, params, int(resolved_seed), resolved_out


def run(config_path, overrides=(), out_dir=None, seed=None, threads=None) -> int:
    import os

    try:
        payload = json.loads(Path(config_path).read_text())
        exp, params, run_seed, run_out = resolve_config(payload, overrides, seed, out_dir)
    except _VALIDATION_ERRORS as err:
        print(f"error={type(err).__name__}: {err}", file=sys.stderr)
        return 2
    if threads is None:
        threads = os.cpu_count()  # worker cap only; results are thread-count invariant
    started = time.perf_counter()
    try:
        headline, artifacts = exp.runner(params, run_seed, threads)
    except _VALIDATION_ERRORS as err:
        print(f"error={type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as err:
        print(f"error={type(err).__name__}: {err}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - started
    out = Path(run_out)
    out.mkdir(parents=True, exist_ok=True)
    for fname, text in artifacts.items():
        (out / fname).write_text(text, newline="")
    summary = {
        "experiment": exp.name,
        "config": {
            "experiment": exp.name,
            "parameters": params,
            "seed": run_seed,
            "out_dir": str(run_out),
            "threads": threads,
        },
        "metrics": headline,
        "wall_clock_seconds": wall,
        "artifacts": sorted(artifacts) + ["summary.json"],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="varivery", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one experiment from a JSON config")
    runp.add_argument("--config", required=True)
    runp.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V")
    runp.add_argument("--out-dir", default=None)
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--threads", type=int, default=None)
    sub.add_parser("list", help="list the experiment registry")
    args = parser.parse_args(argv)
    if args.command == "list":
        sys.stdout.write(list_experiments())
        return 0
    return run(
        args.config,
        overrides=args.overrides,
        out_dir=args.out_dir,
        seed=args.seed,
        threads=args.threads,
    )


if __name__ == "__main__":
    sys.exit(main())
