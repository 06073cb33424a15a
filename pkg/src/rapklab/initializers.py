"""Seeded construction of random projection matrices.

Eight initialization schemes: the fan-based Xavier/Kaiming rules in uniform
and normal flavours, orthogonal factors (gain 1), and explicitly scaled
uniform / normal / truncated-normal draws. Every draw is a pure function of
(rows, cols, scheme, seed), so identical inputs give bit-identical matrices.

The Kaiming rules use fan-in with the ReLU gain sqrt(2); the truncated
normal resamples out-of-range entries at +/- 2 sigma, so its realized
variance is below sigma^2 (see ``analytic_variance``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import mix_seed

__all__ = [
    "SCHEME_KINDS",
    "InitScheme",
    "ProjectionSet",
    "init_matrix",
    "analytic_variance",
    "make_projection_set",
    "parse_scheme",
    "scheme_label",
]

SCHEME_KINDS = frozenset(
    {
        "xavier_uniform",
        "xavier_normal",
        "kaiming_uniform",
        "kaiming_normal",
        "orthogonal",
        "uniform_bounded",
        "normal_std",
        "trunc_normal_std",
    }
)

# Kinds whose scale_param is the scheme's single free parameter.
_SCALED_KINDS = frozenset({"uniform_bounded", "normal_std", "trunc_normal_std"})

# Variance shrink factor of a normal truncated at +/- 2 sigma:
# 1 - 2*alpha*phi(alpha) / (2*Phi(alpha) - 1) with alpha = 2.
_PHI2 = math.exp(-2.0) / math.sqrt(2.0 * math.pi)
_CDF2 = 0.5 * (1.0 + math.erf(2.0 / math.sqrt(2.0)))
TRUNC2_VAR_FACTOR = 1.0 - (2.0 * 2.0 * _PHI2) / (2.0 * _CDF2 - 1.0)

# Stream tags for orthogonal retry draws; ordinary schemes use the seed as-is.
_ORTHO_RETRY = 0xA1170


@dataclass(frozen=True)
class InitScheme:
    """An initialization rule: a kind plus an optional scale parameter.

    ``scale_param`` is the half-width for ``uniform_bounded`` and the target
    standard deviation for ``normal_std`` / ``trunc_normal_std``; it is
    ignored by the fan-based and orthogonal kinds.
    """

    kind: str
    scale_param: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise ValueError(
                f"unknown scheme kind {self.kind!r}; expected one of {sorted(SCHEME_KINDS)}"
            )
        if self.kind in _SCALED_KINDS and not self.scale_param > 0.0:
            raise ValueError(f"{self.kind} requires scale_param > 0, got {self.scale_param}")


@dataclass(frozen=True)
class ProjectionSet:
    """Frozen query/key/value projections for one attention head.

    The sigma fields record the analytic element variance implied by the
    scheme and shape, which is what the closed-form kernel expects.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    sigma_q2: float
    sigma_k2: float
    sigma_v2: float
    d: int
    d_k: int
    seed: int

    def __post_init__(self) -> None:
        for name in ("w_q", "w_k", "w_v"):
            w = getattr(self, name)
            if w.shape != (self.d, self.d_k):
                raise ValueError(f"{name} must have shape ({self.d}, {self.d_k}), got {w.shape}")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))


def _orthogonal(rows: int, cols: int, seed: int) -> np.ndarray:
    # QR of a Gaussian draw, sign-fixed on diag(R) so the factor is Haar and
    # deterministic. Degenerate draws retry with a perturbed seed (3 attempts).
    n, m = (rows, cols) if rows >= cols else (cols, rows)
    for attempt in range(3):
        s = seed if attempt == 0 else mix_seed(seed, _ORTHO_RETRY + attempt)
        g = _rng(s).standard_normal((n, m))
        q, r = np.linalg.qr(g)
        diag = np.diag(r)
        if np.min(np.abs(diag)) <= 1e-12 * math.sqrt(n):
            continue
        q = q * np.sign(diag)[np.newaxis, :]
        return q if rows >= cols else q.T
    raise RuntimeError(
        f"orthogonal initialization failed for shape ({rows}, {cols}) after 3 attempts"
    )


def init_matrix(rows: int, cols: int, scheme: InitScheme, seed: int) -> np.ndarray:
    """Draw a (rows, cols) float64 matrix under ``scheme``.

    Pure function of its inputs: identical (rows, cols, scheme, seed) yields
    bit-identical output.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix shape must be positive, got ({rows}, {cols})")
    kind = scheme.kind
    if kind == "orthogonal":
        return _orthogonal(rows, cols, seed)

    rng = _rng(seed)
    if kind == "xavier_uniform":
        a = math.sqrt(6.0 / (rows + cols))
        return rng.uniform(-a, a, size=(rows, cols))
    if kind == "xavier_normal":
        return rng.normal(0.0, math.sqrt(2.0 / (rows + cols)), size=(rows, cols))
    if kind == "kaiming_uniform":
        # gain^2 = 2 (ReLU), fan-in = rows: bound sqrt(3 * 2 / rows).
        a = math.sqrt(6.0 / rows)
        return rng.uniform(-a, a, size=(rows, cols))
    if kind == "kaiming_normal":
        return rng.normal(0.0, math.sqrt(2.0 / rows), size=(rows, cols))
    if kind == "uniform_bounded":
        a = scheme.scale_param
        return rng.uniform(-a, a, size=(rows, cols))
    if kind == "normal_std":
        return rng.normal(0.0, scheme.scale_param, size=(rows, cols))
    if kind == "trunc_normal_std":
        # Resample entries outside +/- 2 sigma; draw order is fixed, so the
        # result is deterministic.
        sd = scheme.scale_param
        out = rng.normal(0.0, sd, size=(rows, cols))
        bad = np.abs(out) > 2.0 * sd
        while bad.any():
            out[bad] = rng.normal(0.0, sd, size=int(bad.sum()))
            bad = np.abs(out) > 2.0 * sd
        return out
    raise AssertionError(f"unhandled scheme kind {kind!r}")


def analytic_variance(scheme: InitScheme, rows: int, cols: int) -> float:
    """Element variance implied by ``scheme`` at shape (rows, cols)."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix shape must be positive, got ({rows}, {cols})")
    kind = scheme.kind
    if kind in ("xavier_uniform", "xavier_normal"):
        return 2.0 / (rows + cols)
    if kind in ("kaiming_uniform", "kaiming_normal"):
        return 2.0 / rows
    if kind == "orthogonal":
        # Orthonormal columns (or rows): each unit vector spreads its norm
        # over max(rows, cols) entries.
        return 1.0 / max(rows, cols)
    if kind == "uniform_bounded":
        return scheme.scale_param**2 / 3.0
    if kind == "normal_std":
        return scheme.scale_param**2
    if kind == "trunc_normal_std":
        return scheme.scale_param**2 * TRUNC2_VAR_FACTOR
    raise AssertionError(f"unhandled scheme kind {kind!r}")


def make_projection_set(d: int, d_k: int, scheme: InitScheme, seed: int) -> ProjectionSet:
    """Draw W_Q, W_K, W_V (each d x d_k) from decorrelated sub-seeds of ``seed``."""
    w_q = init_matrix(d, d_k, scheme, mix_seed(seed, 0))
    w_k = init_matrix(d, d_k, scheme, mix_seed(seed, 1))
    w_v = init_matrix(d, d_k, scheme, mix_seed(seed, 2))
    var = analytic_variance(scheme, d, d_k)
    return ProjectionSet(
        w_q=w_q,
        w_k=w_k,
        w_v=w_v,
        sigma_q2=var,
        sigma_k2=var,
        sigma_v2=var,
        d=d,
        d_k=d_k,
        seed=seed,
    )


def parse_scheme(label: str) -> InitScheme:
    """Parse a CLI scheme label into an ``InitScheme``.

    Accepted labels: ``xavier_uniform``, ``xavier_normal``,
    ``kaiming_uniform_relu`` (or ``kaiming_uniform``), ``kaiming_normal_relu``
    (or ``kaiming_normal``), ``orthogonal``, and the parameterized forms
    ``uniform_<a>``, ``normal_<sigma>``, ``trunc_normal_<sigma>`` where the
    numeric suffix populates ``scale_param`` (e.g. ``uniform_0.1``,
    ``normal_0.02``, ``trunc_normal_0.02``).
    """
    text = label.strip()
    plain = {
        "xavier_uniform": "xavier_uniform",
        "xavier_normal": "xavier_normal",
        "kaiming_uniform": "kaiming_uniform",
        "kaiming_uniform_relu": "kaiming_uniform",
        "kaiming_normal": "kaiming_normal",
        "kaiming_normal_relu": "kaiming_normal",
        "orthogonal": "orthogonal",
    }
    if text in plain:
        return InitScheme(plain[text])
    for prefix, kind in (
        ("trunc_normal_", "trunc_normal_std"),
        ("normal_", "normal_std"),
        ("uniform_", "uniform_bounded"),
    ):
        if text.startswith(prefix):
            suffix = text[len(prefix):]
            try:
                value = float(suffix)
            except ValueError:
                raise ValueError(f"bad numeric suffix in scheme label {label!r}") from None
            return InitScheme(kind, value)
    raise ValueError(f"unknown init scheme label {label!r}")


def scheme_label(scheme: InitScheme) -> str:
    """Canonical CLI label for ``scheme`` (inverse of ``parse_scheme``)."""
    kind = scheme.kind
    if kind == "kaiming_uniform":
        return "kaiming_uniform_relu"
    if kind == "kaiming_normal":
        return "kaiming_normal_relu"
    if kind == "uniform_bounded":
        return f"uniform_{scheme.scale_param:g}"
    if kind == "normal_std":
        return f"normal_{scheme.scale_param:g}"
    if kind == "trunc_normal_std":
        return f"trunc_normal_{scheme.scale_param:g}"
    return kind
