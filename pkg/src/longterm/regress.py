"""Small supervised-regression backend used by every fitting step.

Three learners are available through :class:`RegressorSpec`: ordinary least
squares on a total-degree polynomial basis, the same with a ridge penalty, and
a k-nearest-neighbour smoother. Polynomial fits also accept per-row
``multipliers`` so that ``y_i ~ m_i * g(x_i)`` can be solved as a plain linear
least-squares problem (the bias-transition fit needs exactly this).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .errors import DimensionMismatch, EmptyTraining, SingularSystem, ValidationError

OLS = "ols"
RIDGE = "ridge"
KNN = "knn"

_KNN_CHUNK = 2048


@dataclass(frozen=True)
class RegressorSpec:
    kind: str = OLS
    degree: int = 1
    lam: float = 0.0
    k: int = 10

    def __post_init__(self):
        if self.kind not in (OLS, RIDGE, KNN):
            raise ValidationError(f"unknown regressor kind {self.kind!r}")
        if self.kind in (OLS, RIDGE) and not 1 <= self.degree <= 5:
            raise ValidationError(f"polynomial degree must be in [1, 5], got {self.degree}")
        if self.lam < 0:
            raise ValidationError(f"ridge lambda must be >= 0, got {self.lam}")
        if self.kind == KNN and self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")

    @property
    def is_polynomial(self) -> bool:
        return self.kind in (OLS, RIDGE)

    @classmethod
    def ols(cls, degree: int = 1) -> "RegressorSpec":
        return cls(OLS, degree=degree)

    @classmethod
    def ridge(cls, degree: int, lam: float) -> "RegressorSpec":
        return cls(RIDGE, degree=degree, lam=lam)

    @classmethod
    def knn(cls, k: int) -> "RegressorSpec":
        return cls(KNN, k=k)

    @classmethod
    def parse(cls, text: str) -> "RegressorSpec":
        """Parse ``ols:<deg>``, ``ridge:<deg>:<lambda>`` or ``knn:<k>``."""
        parts = text.strip().lower().split(":")
        try:
            if parts[0] == OLS and len(parts) == 2:
                return cls.ols(int(parts[1]))
            if parts[0] == RIDGE and len(parts) == 3:
                return cls.ridge(int(parts[1]), float(parts[2]))
            if parts[0] == KNN and len(parts) == 2:
                return cls.knn(int(parts[1]))
        except ValueError:
            pass
        raise ValidationError(f"cannot parse regressor spec {text!r} (use ols:D, ridge:D:LAMBDA or knn:K)")

    def __str__(self) -> str:
        if self.kind == OLS:
            return f"ols:{self.degree}"
        if self.kind == RIDGE:
            return f"ridge:{self.degree}:{self.lam!r}"
        return f"knn:{self.k}"


@lru_cache(maxsize=64)
def monomial_exponents(d: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of every monomial of total degree <= ``degree`` in ``d`` variables.

    The constant term comes first, followed by increasing total degree.
    """
    out = []
    for deg in range(degree + 1):
        for combo in combinations_with_replacement(range(d), deg):
            e = [0] * d
            for j in combo:
                e[j] += 1
            out.append(tuple(e))
    return tuple(out)


def polynomial_features(x: np.ndarray, degree: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    exps = monomial_exponents(x.shape[1], degree)
    cols = [np.prod(x ** np.asarray(e, dtype=float), axis=1) if any(e) else np.ones(x.shape[0]) for e in exps]
    return np.column_stack(cols)


def _as_inputs(x, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if d in (None, 1) else x.reshape(1, -1)
    if d is not None and x.shape[1] != d:
        raise DimensionMismatch(f"expected inputs of dimension {d}, got {x.shape[1]}")
    return x


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Immutable fitted regressor.

    ``coef`` holds basis coefficients for polynomial kinds; for the k-NN kind
    the training inputs, targets and weights are kept instead.
    """

    spec: RegressorSpec
    d: int
    coef: np.ndarray | None = None
    train_x: np.ndarray | None = field(default=None, repr=False)
    train_y: np.ndarray | None = field(default=None, repr=False)
    train_w: np.ndarray | None = field(default=None, repr=False)
    ridge_fallback: bool = False

    def predict(self, x) -> np.ndarray:
        """Evaluate at an ``(m, d)`` array (a 1-D array is read as ``m`` scalars when ``d == 1``)."""
        x = _as_inputs(x, self.d)
        if self.spec.is_polynomial:
            return polynomial_features(x, self.spec.degree) @ self.coef
        return _knn_predict(self.train_x, self.train_y, self.train_w, self.spec.k, x)

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])


def _nearest(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest entries per row, ordered by (distance, index)."""
    if k >= dist.shape[1]:
        return np.argsort(dist, axis=1, kind="stable")
    part = np.argpartition(dist, k - 1, axis=1)[:, :k]
    pd = np.take_along_axis(dist, part, axis=1)
    order = np.lexsort((part, pd), axis=-1)
    nn = np.take_along_axis(part, order, axis=1)
    # rows whose k-th distance is tied beyond the selection need the exact rule:
    # lowest training index first among equal distances
    kth = pd.max(axis=1, keepdims=True)
    tied = (dist == kth).sum(axis=1) > (pd == kth).sum(axis=1)
    if tied.any():
        nn[tied] = np.argsort(dist[tied], axis=1, kind="stable")[:, :k]
    return nn


def _knn_predict(tx: np.ndarray, ty: np.ndarray, tw: np.ndarray, k: int, x: np.ndarray) -> np.ndarray:
    k = min(k, tx.shape[0])
    out = np.empty(x.shape[0])
    sq_train = (tx**2).sum(axis=1)
    for start in range(0, x.shape[0], _KNN_CHUNK):
        q = x[start : start + _KNN_CHUNK]
        dist = (q**2).sum(axis=1)[:, None] - 2.0 * q @ tx.T + sq_train[None, :]
        nn = _nearest(dist, k)
        w = tw[nn]
        total = w.sum(axis=1)
        # a neighbourhood of zero-weight rows falls back to the plain mean
        zero = total == 0
        if zero.any():
            w = np.where(zero[:, None], 1.0, w)
            total = np.where(zero, float(w.shape[1]), total)
        out[start : start + _KNN_CHUNK] = (w * ty[nn]).sum(axis=1) / total
    return out


def solve_least_squares(
    design: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray | None = None,
    lam: float = 0.0,
    penalize: np.ndarray | None = None,
    allow_fallback: bool = True,
) -> tuple[np.ndarray, bool]:
    """Minimise ``sum_i w_i (y_i - design_i @ b)^2 + lam * sum_j p_j b_j^2``.

    Solved through an SVD-based least-squares routine on the row-scaled system.
    A rank-deficient unpenalised system gets a ridge of ``1e-10 * trace`` (or
    the zero vector when the design is identically zero) and the second
    return value is set to True.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n, p = design.shape
    sw = np.ones(n) if weights is None else np.sqrt(np.asarray(weights, dtype=float))
    A = design * sw[:, None]
    b = targets * sw
    if penalize is None:
        penalize = np.ones(p, dtype=bool)
    if lam > 0:
        rows = np.sqrt(lam) * np.diag(penalize.astype(float))[penalize]
        A = np.vstack([A, rows])
        b = np.concatenate([b, np.zeros(rows.shape[0])])

    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank == p:
        return coef, False
    if not allow_fallback:
        raise SingularSystem(f"design has rank {rank} < {p}")
    gram = A.T @ A
    tr = float(np.trace(gram))
    if tr == 0.0:
        return np.zeros(p), True
    coef = np.linalg.solve(gram + 1e-10 * tr * np.eye(p), A.T @ b)
    return coef, True


def fit(
    spec: RegressorSpec,
    inputs,
    targets,
    weights=None,
    multipliers=None,
    allow_fallback: bool = True,
) -> FittedModel:
    """Fit ``spec`` to ``(inputs, targets)``.

    Args:
        spec: learner description.
        inputs: ``(n, d)`` covariates (1-D means ``d == 1``).
        targets: ``(n,)`` responses.
        weights: optional non-negative row weights.
        multipliers: polynomial kinds only; fits ``targets ~ multipliers * g(inputs)``
            by scaling each design row, and the returned model evaluates ``g``.
        allow_fallback: when False a rank-deficient system raises
            :class:`SingularSystem` instead of being ridge-stabilised.
    """
    x = _as_inputs(inputs)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyTraining("no training rows")
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} inputs but {y.shape[0]} targets")
    w = None
    if weights is not None:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != x.shape[0]:
            raise DimensionMismatch(f"{x.shape[0]} inputs but {w.shape[0]} weights")
        if (w < 0).any():
            raise ValidationError("weights must be non-negative")
    d = x.shape[1]

    if spec.is_polynomial:
        design = polynomial_features(x, spec.degree)
        if multipliers is not None:
            m = np.asarray(multipliers, dtype=float).reshape(-1)
            if m.shape[0] != x.shape[0]:
                raise DimensionMismatch(f"{x.shape[0]} inputs but {m.shape[0]} multipliers")
            design = design * m[:, None]
        penalize = np.ones(design.shape[1], dtype=bool)
        penalize[0] = False  # intercept is never shrunk
        lam = spec.lam if spec.kind == RIDGE else 0.0
        coef, flagged = solve_least_squares(design, y, w, lam, penalize, allow_fallback)
        return FittedModel(spec, d, coef=coef, ridge_fallback=flagged)

    if multipliers is not None:
        raise ValidationError("multipliers are only supported for polynomial learners")
    tw = np.ones(x.shape[0]) if w is None else w
    return FittedModel(spec, d, train_x=x.copy(), train_y=y.copy(), train_w=tw.copy())


def predict(model: FittedModel, x) -> float:
    """Evaluate ``model`` at a single covariate vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.d:
        raise DimensionMismatch(f"expected a covariate vector of length {model.d}, got {x.shape[0]}")
    return model.predict_one(x)
