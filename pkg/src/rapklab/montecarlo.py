"""Monte Carlo validation of the closed-form attention kernel.

Estimates E[O O^T] by averaging empirical kernels over freshly drawn
projection sets, using the true softmax (not the linearization), and compares
the estimate against the closed-form prediction as the projection width d_k
grows. Also measures logit concentration: how tightly the attention logits
cluster around zero for a given scheme and width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import attention_apply, attention_scores, empirical_kernel, layer_norm_rows, softmax_rows
from .initializers import (
    InitScheme,
    analytic_variance,
    init_matrix,
    make_projection_set,
    scheme_label,
)
from .rapk import rapk_coefficients, rapk_kernel
from .seeding import generator, mix_seed
from .sequences import FeatureSequence

__all__ = [
    "LOGIT_EPS",
    "LogitConcentrationReport",
    "KernelValidationReport",
    "monte_carlo_kernel",
    "kernel_mse",
    "kernel_pearson",
    "logit_concentration",
    "dk_sweep",
    "dk_sweep_detail",
    "centered_unit_sequence",
]

# Logits with |s| below this count as "concentrated" in the reports.
LOGIT_EPS = 0.1

# Trials are accumulated in fixed index blocks so the mean does not depend on
# evaluation order (serial, reversed, or partitioned runs agree to rounding).
_BLOCK = 100

_ROLE_Q = 0
_ROLE_K = 1
_ROLE_SEQ = 0x5E9


def _trial_kernel(x: FeatureSequence, scheme: InitScheme, d_k: int, seed: int, trial: int) -> np.ndarray:
    proj = make_projection_set(x.dim, d_k, scheme, mix_seed(seed, trial))
    a = softmax_rows(attention_scores(x, proj))
    return empirical_kernel(attention_apply(a, x, proj.w_v))


def _block_mean_kernels(
    x: FeatureSequence, scheme: InitScheme, d_k: int, trials: int, seed: int
):
    """Yield (block_size, block_mean_kernel) over fixed index blocks."""
    for start in range(0, trials, _BLOCK):
        stop = min(start + _BLOCK, trials)
        acc = np.zeros((x.t_len, x.t_len))
        for trial in range(start, stop):
            acc += _trial_kernel(x, scheme, d_k, seed, trial)
        yield stop - start, acc / (stop - start)


def monte_carlo_kernel(
    x: FeatureSequence, scheme: InitScheme, d_k: int, trials: int, seed: int
) -> np.ndarray:
    """Mean empirical kernel over ``trials`` independent projection draws.

    Trial ``t`` draws its projections from the sub-seed ``mix_seed(seed, t)``,
    so the trial set is a pure function of (x, scheme, d_k, trials, seed) and
    the mean is invariant (to rounding) under any evaluation order.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if d_k < 1:
        raise ValueError(f"d_k must be >= 1, got {d_k}")
    total = np.zeros((x.t_len, x.t_len))
    for size, mean in _block_mean_kernels(x, scheme, d_k, trials, seed):
        total += size * mean
    return total / trials


def kernel_mse(k_a: np.ndarray, k_b: np.ndarray) -> float:
    """Mean squared entrywise difference between two kernels."""
    a = np.asarray(k_a, dtype=np.float64)
    b = np.asarray(k_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"kernel shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def kernel_pearson(k_a: np.ndarray, k_b: np.ndarray) -> float:
    """Pearson correlation of the flattened kernel entries."""
    a = np.asarray(k_a, dtype=np.float64).ravel()
    b = np.asarray(k_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"kernel shapes differ: {k_a.shape} vs {k_b.shape}")
    if np.std(a) == 0.0 or np.std(b) == 0.0:
        raise ValueError("kernel correlation undefined for zero-variance input")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass(frozen=True)
class LogitConcentrationReport:
    """Pooled logit statistics for one (scheme, d_k, layernorm) setting."""

    scheme_label: str
    d_k: int
    with_layernorm: bool
    empirical_mean: float
    empirical_std: float
    analytic_std: float
    frac_within_eps: float
    trials: int


def logit_concentration(
    x: FeatureSequence,
    scheme: InitScheme,
    d_k: int,
    with_layernorm: bool,
    trials: int,
    seed: int,
) -> LogitConcentrationReport:
    """Measure how tightly attention logits concentrate around zero.

    Draws ``trials`` independent (W_Q, W_K) pairs, pools all T^2 logits per
    trial, and reports the empirical mean/std, the analytic pooled std
    sqrt(sigma_Q^2 sigma_K^2) * mean_i ||x_i||^2, and the fraction of logits
    with |s| < ``LOGIT_EPS``. With ``with_layernorm`` the feature rows are
    layer-normalized before projection, which is what bounds the row norms.
    """
    if trials < 100:
        raise ValueError(f"trials must be >= 100 for stable statistics, got {trials}")
    if d_k < 1:
        raise ValueError(f"d_k must be >= 1, got {d_k}")
    rows = layer_norm_rows(x.data) if with_layernorm else x.data
    seq = FeatureSequence(rows)
    var = analytic_variance(scheme, x.dim, d_k)

    count = 0
    total = 0.0
    total_sq = 0.0
    within = 0
    for trial in range(trials):
        w_q = init_matrix(x.dim, d_k, scheme, mix_seed(seed, trial, _ROLE_Q))
        w_k = init_matrix(x.dim, d_k, scheme, mix_seed(seed, trial, _ROLE_K))
        s = (seq.data @ w_q) @ (seq.data @ w_k).T / np.sqrt(d_k)
        count += s.size
        total += float(s.sum())
        total_sq += float(np.sum(s * s))
        within += int(np.count_nonzero(np.abs(s) < LOGIT_EPS))
    mean = total / count
    variance = max(total_sq / count - mean**2, 0.0)

    norms_sq = np.sum(seq.data**2, axis=1)
    analytic_std = float(np.sqrt(var * var) * norms_sq.mean())
    return LogitConcentrationReport(
        scheme_label=scheme_label(scheme),
        d_k=d_k,
        with_layernorm=with_layernorm,
        empirical_mean=mean,
        empirical_std=float(np.sqrt(variance)),
        analytic_std=analytic_std,
        frac_within_eps=within / count,
        trials=trials,
    )


@dataclass(frozen=True)
class KernelValidationReport:
    """Aggregate agreement between Monte Carlo and closed-form kernels."""

    d_k_grid: tuple[int, ...]
    mse_per_dk: tuple[float, ...]
    pearson_per_dk: tuple[float, ...]
    trials: int
    seed: int


def dk_sweep_detail(
    x_set: list[FeatureSequence] | tuple[FeatureSequence, ...],
    scheme: InitScheme,
    d_k_grid: list[int] | tuple[int, ...],
    trials: int,
    seed: int,
) -> tuple[KernelValidationReport, list[tuple[int, int, float, float]]]:
    """Run the d_k sweep and also return per-block rows for plotting.

    Returns ``(report, blocks)`` where ``blocks`` holds one row
    ``(d_k, block_index, mse, pearson)`` per trial block, averaged over the
    sequence set. The aggregate report uses the all-trials mean kernel.
    """
    if not x_set:
        raise ValueError("sequence set must be non-empty")
    grid = tuple(int(v) for v in d_k_grid)
    if not grid:
        raise ValueError("d_k grid must be non-empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"d_k grid must be sorted ascending without repeats, got {grid}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")

    mse_per_dk: list[float] = []
    pearson_per_dk: list[float] = []
    blocks: list[tuple[int, int, float, float]] = []
    for di, d_k in enumerate(grid):
        seq_mse: list[float] = []
        seq_pearson: list[float] = []
        block_mse: dict[int, list[float]] = {}
        block_pearson: dict[int, list[float]] = {}
        for si, x in enumerate(x_set):
            var = analytic_variance(scheme, x.dim, d_k)
            theory = rapk_kernel(x, *rapk_coefficients(x, d_k, var, var, var))
            sub_seed = mix_seed(seed, di, si)
            total = np.zeros((x.t_len, x.t_len))
            done = 0
            for bi, (size, mean) in enumerate(
                _block_mean_kernels(x, scheme, d_k, trials, sub_seed)
            ):
                block_mse.setdefault(bi, []).append(kernel_mse(mean, theory))
                block_pearson.setdefault(bi, []).append(kernel_pearson(mean, theory))
                total += size * mean
                done += size
            full = total / done
            seq_mse.append(kernel_mse(full, theory))
            seq_pearson.append(kernel_pearson(full, theory))
        mse_per_dk.append(float(np.mean(seq_mse)))
        pearson_per_dk.append(float(np.mean(seq_pearson)))
        for bi in sorted(block_mse):
            blocks.append(
                (d_k, bi, float(np.mean(block_mse[bi])), float(np.mean(block_pearson[bi])))
            )
    report = KernelValidationReport(
        d_k_grid=grid,
        mse_per_dk=tuple(mse_per_dk),
        pearson_per_dk=tuple(pearson_per_dk),
        trials=trials,
        seed=seed,
    )
    return report, blocks


def dk_sweep(
    x_set: list[FeatureSequence] | tuple[FeatureSequence, ...],
    scheme: InitScheme,
    d_k_grid: list[int] | tuple[int, ...],
    trials: int,
    seed: int,
) -> KernelValidationReport:
    """Monte Carlo vs closed-form kernel agreement across a d_k grid."""
    return dk_sweep_detail(x_set, scheme, d_k_grid, trials, seed)[0]


def centered_unit_sequence(t_len: int, dim: int, seed: int) -> FeatureSequence:
    """Synthetic rows that are exactly centered and exactly unit-norm.

    Pairs each random unit vector with its negation, so the mean row is zero
    to the last bit while every row keeps unit length. Requires even length.
    """
    if t_len < 2 or t_len % 2 != 0:
        raise ValueError(f"t_len must be even and >= 2, got {t_len}")
    rng = generator(seed, _ROLE_SEQ)
    half = rng.standard_normal((t_len // 2, dim))
    half /= np.linalg.norm(half, axis=1, keepdims=True)
    return FeatureSequence(np.vstack([half, -half]))
