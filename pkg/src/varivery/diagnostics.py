"""Monte-Carlo concentration diagnostics.

``estimate_bp`` measures E_x[Var_theta f_theta(x)] for a circuit family;
``estimate_vanishing_similarity`` measures Var over input pairs of a kernel.
Both are seeded, bitwise reproducible at any worker count (sample slots are
indexed, filled independently, and reduced by a fixed-shape pairwise tree),
and report a nested-bootstrap standard error.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ansatz import CircuitTemplate, evaluate_resolved, resolve_data
from .errors import ValidationError
from .hardfn import DlpInstance
from .statevec import StateVector, overlap

N_BOOTSTRAP = 200


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Distribution:
    """Seedable sampler; draws are deterministic given (kind, seed, index)."""

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError


@dataclass(frozen=True)
class UniformAngles(Distribution):
    low: float = 0.0
    high: float = 2.0 * np.pi

    def sample(self, rng, size=None):
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class UniformBitstrings(Distribution):
    n_bits: int = 1

    def sample(self, rng, size=None):
        return int(rng.integers(0, 2**self.n_bits))


@dataclass(frozen=True)
class GroupElements(Distribution):
    instance: DlpInstance = None

    def sample(self, rng, size=None):
        return self.instance.sample_element(rng)


@dataclass(frozen=True)
class FixedList(Distribution):
    """Deterministic cycle through the given values (draw i -> values[i % k])."""

    values: tuple = ()

    def sample(self, rng, size=None):
        raise NotImplementedError("FixedList draws are indexed; use sample_at")

    def sample_at(self, index: int):
        return self.values[index % len(self.values)]


def _draw(dist: Distribution, rng: np.random.Generator, index: int):
    if isinstance(dist, FixedList):
        return dist.sample_at(index)
    return dist.sample(rng)


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class BpEstimate:
    point_estimate: float
    standard_error: float
    n_x_samples: int
    n_theta_samples: int
    n_qubits: int

    def __post_init__(self):
        # unbiased variance may dip below zero only within noise
        if self.point_estimate < -3.0 * self.standard_error - 1e-15:
            raise ValidationError(
                f"variance estimate {self.point_estimate} below -3 SE; estimator is broken"
            )


def pairwise_sum(values: np.ndarray) -> float:
    """Fixed-shape pairwise reduction, independent of fill order."""
    acc = np.asarray(values, dtype=float)
    while len(acc) > 1:
        even = acc[0 : 2 * (len(acc) // 2)]
        folded = even[0::2] + even[1::2]
        if len(acc) % 2:
            folded = np.concatenate([folded, acc[-1:]])
        acc = folded
    return float(acc[0]) if len(acc) else 0.0


def pairwise_mean(values: np.ndarray) -> float:
    return pairwise_sum(values) / len(values)


def _sample_variance(values: np.ndarray) -> float:
    m = pairwise_mean(values)
    return pairwise_sum((values - m) ** 2) / (len(values) - 1)


def _bootstrap_se_nested(fvals: np.ndarray, rng: np.random.Generator) -> float:
    """SE of the mean-of-variances estimator: resample rows, then resample
    each chosen row's values, 200 replicates."""
    n_x, n_theta = fvals.shape
    rows = rng.integers(0, n_x, size=(N_BOOTSTRAP, n_x))
    inner = rng.integers(0, n_theta, size=(N_BOOTSTRAP, n_x, n_theta))
    resampled = fvals[rows[:, :, None], inner]
    replicate = resampled.var(axis=2, ddof=1).mean(axis=1)
    return float(replicate.std(ddof=1))


def _bootstrap_se_flat(values: np.ndarray, rng: np.random.Generator) -> float:
    n = len(values)
    idx = rng.integers(0, n, size=(N_BOOTSTRAP, n))
    replicate = values[idx].var(axis=1, ddof=1)
    return float(replicate.std(ddof=1))


def _fill_rows(task: Callable[[int], np.ndarray], n_rows: int, threads: int | None) -> np.ndarray:
    rows = [None] * n_rows
    if threads is None or threads <= 1 or n_rows == 1:
        for i in range(n_rows):
            rows[i] = task(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, row in enumerate(pool.map(task, range(n_rows))):
                rows[i] = row
    return np.stack(rows, axis=0)


def estimate_bp(
    family: CircuitTemplate,
    p_theta: Distribution,
    d_x: Distribution,
    n_x: int,
    n_theta: int,
    seed: int,
    threads: int | None = None,
) -> BpEstimate:
    """Outer mean over x of the Bessel-corrected sample variance over theta.

    For each of the n_x inputs a fresh batch of n_theta parameter draws is
    evaluated; the standard error comes from a nested bootstrap.
    """
    if n_theta < 2:
        raise ValidationError("unbiased variance needs n_theta >= 2")
    if n_x < 1:
        raise ValidationError("need at least one data sample")
    ss = np.random.SeedSequence(seed)
    x_seed, boot_seed, *row_seeds = ss.spawn(n_x + 2)
    x_rng = np.random.default_rng(x_seed)
    xs = [_draw(d_x, x_rng, i) for i in range(n_x)]
    resolved = [resolve_data(family, x) for x in xs]

    def row(i: int) -> np.ndarray:
        rng = np.random.default_rng(row_seeds[i])
        out = np.empty(n_theta)
        for j in range(n_theta):
            theta = np.asarray(p_theta.sample(rng, family.param_count), dtype=float)
            if theta.shape != (family.param_count,):
                raise ValidationError(
                    f"parameter sampler produced shape {theta.shape}, family needs "
                    f"({family.param_count},)"
                )
            out[j] = evaluate_resolved(family, resolved[i], theta)
        return out

    fvals = _fill_rows(row, n_x, threads)
    variances = np.array([_sample_variance(fvals[i]) for i in range(n_x)])
    point = pairwise_mean(variances)
    se = _bootstrap_se_nested(fvals, np.random.default_rng(boot_seed))
    return BpEstimate(point, se, n_x, n_theta, family.n_qubits)


def estimate_vanishing_similarity(
    feature_map: Callable[[int], StateVector],
    d_x: Distribution,
    n_pairs: int,
    seed: int,
    threads: int | None = None,
) -> BpEstimate:
    """Sample variance of k(x, x') = |<phi(x)|phi(x')>|^2 over i.i.d. pairs."""
    if n_pairs < 2:
        raise ValidationError("need at least two pairs for a variance")
    ss = np.random.SeedSequence(seed)
    draw_seed, boot_seed = ss.spawn(2)
    rng = np.random.default_rng(draw_seed)
    pairs = [(_draw(d_x, rng, 2 * i), _draw(d_x, rng, 2 * i + 1)) for i in range(n_pairs)]

    def kernel_value(i: int) -> np.ndarray:
        x, xp = pairs[i]
        return np.array([abs(overlap(feature_map(x), feature_map(xp))) ** 2])

    kvals = _fill_rows(kernel_value, n_pairs, threads)[:, 0]
    point = _sample_variance(kvals)
    se = _bootstrap_se_flat(kvals, np.random.default_rng(boot_seed))
    n_qubits = feature_map(pairs[0][0]).n_qubits
    return BpEstimate(point, se, n_pairs, 0, n_qubits)


# ---------------------------------------------------------------------------
# scaling sweeps


@dataclass(frozen=True)
class VarianceCurve:
    n_list: tuple[int, ...]
    estimates: tuple[BpEstimate, ...]
    slope: float | None
    slope_se: float | None

    def rows(self, seed: int) -> list[dict]:
        return [
            {
                "n": n,
                "point_estimate": est.point_estimate,
                "std_error": est.standard_error,
                "n_x": est.n_x_samples,
                "n_theta": est.n_theta_samples,
                "seed": seed,
            }
            for n, est in zip(self.n_list, self.estimates)
        ]


def fit_log_slope(n_list: Sequence[int], values: Sequence[float]):
    """OLS slope of log(values) against n, with its standard error.

    Returns (None, None) when any value is nonpositive (log undefined) or
    fewer than three points are available.
    """
    n_arr = np.asarray(n_list, dtype=float)
    vals = np.asarray(values, dtype=float)
    if len(vals) < 3 or np.any(vals <= 0):
        return None, None
    y = np.log(vals)
    x_c = n_arr - n_arr.mean()
    sxx = float((x_c**2).sum())
    slope = float((x_c * y).sum() / sxx)
    intercept = float(y.mean() - slope * n_arr.mean())
    resid = y - (intercept + slope * n_arr)
    dof = len(vals) - 2
    sigma2 = float((resid**2).sum() / dof)
    return slope, float(np.sqrt(sigma2 / sxx))


def bp_scaling_sweep(
    family_builder: Callable[[int], CircuitTemplate],
    n_list: Sequence[int],
    p_theta: Distribution,
    d_x_builder: Callable[[int], Distribution],
    n_x: int,
    n_theta: int,
    seed: int,
    threads: int | None = None,
) -> VarianceCurve:
    """One variance estimate per qubit count, plus a log-slope fit."""
    if list(n_list) != sorted(n_list):
        raise ValidationError("n_list must be ascending")
    seeds = np.random.SeedSequence(seed).spawn(len(n_list))
    estimates = []
    for n, child in zip(n_list, seeds):
        family = family_builder(n)
        est = estimate_bp(
            family,
            p_theta,
            d_x_builder(n),
            n_x,
            n_theta,
            seed=child.generate_state(1)[0],
            threads=threads,
        )
        estimates.append(est)
    slope, slope_se = fit_log_slope(n_list, [e.point_estimate for e in estimates])
    return VarianceCurve(tuple(n_list), tuple(estimates), slope, slope_se)


# ---------------------------------------------------------------------------
# reference family


def rotation_oracle_family() -> CircuitTemplate:
    """Single qubit, f(theta) = <Z> after RX(theta_0) RZ(theta_1) = cos(theta_0);
    the variance under uniform angles is exactly 1/2."""
    from .ansatz import CircuitTemplate, LayerSpec, ParamGate
    from .statevec import pauli_z_on

    layers = (
        LayerSpec((ParamGate("rx", 0, 0),)),
        LayerSpec((ParamGate("rz", 1, 0),)),
    )
    return CircuitTemplate(
        n_qubits=1, layers=layers, observable=pauli_z_on(1, 0), param_count=2
    )
