"""Random streams and the small set of numerical primitives the simulator needs.

Streams are derived from a master seed plus a path of labels, so the draws a
consumer sees depend only on *where* it sits in the run (simulation,
competition, customer/strategy label), never on execution order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ParameterError(ValueError):
    """Invalid distribution or model parameters."""


class InsufficientDataError(ValueError):
    """Too few observations to fit a model."""


class NumericError(ArithmeticError):
    """A matrix factorization or iteration failed numerically."""


def _label_key(label: int | str) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if label < 0:
            raise ParameterError(f"stream labels must be non-negative, got {label}")
        return int(label)
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """A seedable stream identified by ``(master_seed, *path)``.

    ``child(*labels)`` derives an independent sub-stream.  String labels are
    hashed, integer labels are used as-is; both end up in the ``spawn_key`` of
    a :class:`numpy.random.SeedSequence`.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: Sequence[int | str] = ()):
        if seed < 0:
            raise ParameterError("master seed must be non-negative")
        self.seed = int(seed)
        self.path = tuple(path)
        self._gen: np.random.Generator | None = None

    def child(self, *labels: int | str) -> "RngStream":
        return RngStream(self.seed, self.path + labels)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = tuple(_label_key(x) for x in self.path)
            self._gen = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key))
            )
        return self._gen

    def __getstate__(self):
        # Ship the derivation path, not the live generator, across processes.
        return (self.seed, self.path)

    def __setstate__(self, state):
        self.seed, self.path = state
        self._gen = None

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path!r})"


def as_generator(stream) -> np.random.Generator:
    """Accept an :class:`RngStream` or anything generator-like."""
    return stream.generator if isinstance(stream, RngStream) else stream


# ---------------------------------------------------------------------------
# Lambert W (principal branch, non-negative argument)
# ---------------------------------------------------------------------------

def lambert_w(x: float, max_iter: int = 50) -> float:
    """Principal branch of the Lambert W function for ``x >= 0``.

    Halley iteration started from ``log1p(x)`` below ``e`` and from the
    asymptotic ``L1 - L2 + L2/L1`` above it.
    """
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise ParameterError(f"lambert_w is defined here for x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x < math.e:
        w = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


# ---------------------------------------------------------------------------
# Standard distributions with parameter validation
# ---------------------------------------------------------------------------

def poisson(rng, mean: float, size=None):
    if not (mean >= 0.0) or math.isinf(mean):
        raise ParameterError(f"Poisson mean must be finite and >= 0, got {mean}")
    return as_generator(rng).poisson(mean, size)


def multinomial(rng, n: int, probs, size=None):
    p = np.asarray(probs, dtype=float)
    if n < 0:
        raise ParameterError(f"multinomial count must be >= 0, got {n}")
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ParameterError(f"multinomial probabilities must be >= 0 and sum to 1, got {p}")
    return as_generator(rng).multinomial(n, p, size)


def exponential(rng, mean: float, size=None):
    if not (mean > 0.0) or math.isinf(mean):
        raise ParameterError(f"exponential mean must be finite and > 0, got {mean}")
    return as_generator(rng).exponential(mean, size)


def uniform(rng, lo: float, hi: float, size=None):
    if not (lo < hi):
        raise ParameterError(f"uniform bounds need lo < hi, got ({lo}, {hi})")
    return as_generator(rng).uniform(lo, hi, size)


def dirichlet(rng, alpha, size=None):
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size < 2 or np.any(~(a > 0)):
        raise ParameterError(f"Dirichlet concentrations must be > 0, got {a}")
    return as_generator(rng).dirichlet(a, size)


# ---------------------------------------------------------------------------
# Multivariate normal fit / sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MvnModel:
    mean: np.ndarray
    cov: np.ndarray
    ridge: float = 0.0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def factor(self) -> np.ndarray:
        """Return ``L`` with ``L @ L.T == cov`` (works for singular PSD cov)."""
        cov = self.cov
        if not np.all(np.isfinite(cov)):
            raise NumericError("covariance has non-finite entries")
        vals, vecs = np.linalg.eigh(cov)
        scale = max(float(np.max(np.abs(vals))), 1.0)
        if vals[0] < -1e-10 * scale:
            raise NumericError(f"covariance is not PSD (min eigenvalue {vals[0]:.3g})")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def fit_mvn(samples, ridge: float | None = None) -> MvnModel:
    """Sample mean and (n-1)-denominator covariance plus ``ridge * I``.

    With ``ridge=None`` the ridge is 1e-6 times the mean diagonal variance.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ParameterError("samples must be a list of equal-length vectors")
    if x.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {x.shape[0]}")
    mean = x.mean(axis=0)
    dev = x - mean
    cov = dev.T @ dev / (x.shape[0] - 1)
    if ridge is None:
        ridge = 1e-6 * float(np.mean(np.diag(cov)))
    if ridge < 0:
        raise ParameterError("ridge must be non-negative")
    cov = 0.5 * (cov + cov.T) + ridge * np.eye(x.shape[1])
    return MvnModel(mean=mean, cov=cov, ridge=float(ridge))


def sample_mvn(model: MvnModel, k: int, rng) -> np.ndarray:
    if k < 1:
        raise ParameterError("k must be >= 1")
    z = as_generator(rng).standard_normal((k, model.dim))
    return model.mean + z @ model.factor().T
