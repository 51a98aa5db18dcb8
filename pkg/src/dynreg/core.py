"""Shared data model: time grids, operator/data sequences, weights and the
validated problem bundle consumed by every solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, InvalidWeight, NonFinite, ProblemError

__all__ = [
    "TimeGrid",
    "OperatorSequence",
    "DataSequence",
    "Weight",
    "RegConfig",
    "Trajectory",
    "RiccatiSolution",
    "Problem",
    "validate_problem",
    "operator_norm_max",
    "SYM_TOL",
    "PSD_TOL",
]

# relative Frobenius asymmetry / relative negative eigenvalue tolerances
SYM_TOL = 1e-10
PSD_TOL = 1e-10


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _first_nonfinite(a):
    bad = np.argwhere(~np.isfinite(a))
    return tuple(int(i) for i in bad[0])


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = t_start + k * dt`` for ``k = 0..n_steps``."""

    t_end: float = 1.0
    n_steps: int = 1
    t_start: float = 0.0

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ProblemError("t_end must exceed t_start")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ProblemError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_nodes)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.n_steps * factor, self.t_start)


class OperatorSequence:
    """Time-indexed family of dense ``d x m`` matrices.

    A time-constant family is stored once and exposed through a zero-stride
    broadcast view, so ``ops[k]`` costs nothing extra for long horizons.
    """

    def __init__(self, ops):
        ops = np.asarray(ops, dtype=float)
        if ops.ndim != 3:
            raise DimensionMismatch("operators", "array of shape (n, d, m)", ops.shape)
        self._base = _frozen(ops)
        self._n = ops.shape[0]
        self.is_constant = False

    @classmethod
    def constant(cls, F, n_nodes: int) -> "OperatorSequence":
        F = np.asarray(F, dtype=float)
        if F.ndim != 2:
            raise DimensionMismatch("operator", "2-d matrix", F.shape)
        seq = cls(F[None])
        seq._n = int(n_nodes)
        seq.is_constant = True
        return seq

    @property
    def ops(self) -> np.ndarray:
        if self.is_constant:
            return np.broadcast_to(self._base[0], (self._n,) + self._base.shape[1:])
        return self._base

    @property
    def unique(self) -> np.ndarray:
        """The stored matrices (a single one for constant families)."""
        return self._base

    @property
    def shape(self):
        return (self._n,) + self._base.shape[1:]

    @property
    def d(self) -> int:
        return self._base.shape[1]

    @property
    def m(self) -> int:
        return self._base.shape[2]

    def __len__(self):
        return self._n

    def __getitem__(self, k):
        return self.ops[k]

    def scaled(self, c: float) -> "OperatorSequence":
        if self.is_constant:
            return OperatorSequence.constant(c * self._base[0], self._n)
        return OperatorSequence(c * self._base)

    def all_equal(self) -> bool:
        if self.is_constant:
            return True
        return bool(np.all(self._base == self._base[0]))

    def __eq__(self, other):
        if not isinstance(other, OperatorSequence):
            return NotImplemented
        if self.shape != other.shape:
            return False
        if self.is_constant and other.is_constant:
            return np.array_equal(self._base, other._base)
        return np.array_equal(self.ops, other.ops)

    __hash__ = None

    def __repr__(self):
        kind = "constant " if self.is_constant else ""
        return f"OperatorSequence({kind}n={self._n}, d={self.d}, m={self.m})"


@dataclass(frozen=True, eq=False)
class DataSequence:
    """Samples ``y_k`` (one row per time node) and their noise level."""

    samples: np.ndarray
    noise_level: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise DimensionMismatch("data", "array of shape (n, d)", s.shape)
        if self.noise_level < 0:
            raise ProblemError("noise_level must be nonnegative")
        object.__setattr__(self, "samples", _frozen(s))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.samples))

    def __eq__(self, other):
        if not isinstance(other, DataSequence):
            return NotImplemented
        return (self.noise_level == other.noise_level
                and np.array_equal(self.samples, other.samples))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Weight:
    """Data-space weight ``L_k``: identity, ``c * I`` or explicit SPD matrices.

    Explicit matrices are given either as one ``(d, d)`` matrix used at all
    nodes or as an ``(n, d, d)`` stack.
    """

    kind: str = "identity"
    scale: float = 1.0
    matrices: np.ndarray | None = None

    @classmethod
    def identity(cls) -> "Weight":
        return cls("identity", 1.0)

    @classmethod
    def scaled(cls, c: float) -> "Weight":
        return cls("scaled", float(c))

    @classmethod
    def explicit(cls, matrices) -> "Weight":
        return cls("explicit", 1.0, _frozen(matrices))

    def __post_init__(self):
        if self.kind not in ("identity", "scaled", "explicit"):
            raise InvalidWeight(f"unknown weight kind {self.kind!r}")
        if self.kind == "identity" and self.scale != 1.0:
            raise InvalidWeight("identity weight must have scale 1")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidWeight(f"weight scale must be positive, got {self.scale}")
        if self.kind == "explicit":
            if self.matrices is None:
                raise InvalidWeight("explicit weight needs matrices")
            mats = self.matrices
            if mats.ndim not in (2, 3) or mats.shape[-1] != mats.shape[-2]:
                raise InvalidWeight(f"explicit weight has bad shape {mats.shape}")
            stack = mats[None] if mats.ndim == 2 else mats
            for k, W in enumerate(stack):
                if not np.all(np.isfinite(W)):
                    raise InvalidWeight(f"non-finite weight matrix at node {k}")
                if np.linalg.norm(W - W.T) > SYM_TOL * max(np.linalg.norm(W), 1.0):
                    raise InvalidWeight(f"weight matrix at node {k} is not symmetric")
                try:
                    np.linalg.cholesky(W)
                except np.linalg.LinAlgError:
                    raise InvalidWeight(
                        f"weight matrix at node {k} is not positive definite") from None

    @property
    def is_scalar(self) -> bool:
        return self.kind != "explicit"

    def matrix(self, k: int, d: int) -> np.ndarray:
        if self.is_scalar:
            return self.scale * np.eye(d)
        return self.matrices if self.matrices.ndim == 2 else self.matrices[k]

    def apply(self, k: int, r: np.ndarray) -> np.ndarray:
        if self.is_scalar:
            return self.scale * r
        return self.matrix(k, r.shape[0]) @ r

    def norm(self, k: int) -> float:
        if self.is_scalar:
            return self.scale
        return float(np.linalg.norm(self.matrix(k, 0), 2))

    def __eq__(self, other):
        if not isinstance(other, Weight):
            return NotImplemented
        if self.kind != other.kind or self.scale != other.scale:
            return False
        if self.kind == "explicit":
            return np.array_equal(self.matrices, other.matrices)
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RegConfig:
    """Regularization parameter, data weight and initial state.

    The control weight is always ``M = alpha * I``.
    """

    alpha: float
    u0: np.ndarray
    weight_L: Weight = field(default_factory=Weight.identity)

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidWeight(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "u0", _frozen(np.atleast_1d(self.u0)))

    @property
    def weight_M(self) -> Weight:
        return Weight.scaled(self.alpha)

    def with_alpha(self, alpha: float) -> "RegConfig":
        return RegConfig(alpha, self.u0, self.weight_L)

    def __eq__(self, other):
        if not isinstance(other, RegConfig):
            return NotImplemented
        return (self.alpha == other.alpha and self.weight_L == other.weight_L
                and np.array_equal(self.u0, other.u0))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Trajectory:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if not np.all(np.isfinite(v)):
            raise NonFinite("trajectory", _first_nonfinite(v))
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Backward sweep output: ``Q[k]`` (m x m) and ``b[k]`` (m) for k = 0..N."""

    Q: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q", _frozen(self.Q))
        object.__setattr__(self, "b", _frozen(self.b))

    def __len__(self):
        return self.Q.shape[0]

    def asymmetry(self) -> np.ndarray:
        """Relative Frobenius asymmetry of each ``Q[k]``."""
        num = np.linalg.norm(self.Q - np.swapaxes(self.Q, 1, 2), axis=(1, 2))
        den = np.linalg.norm(self.Q, axis=(1, 2))
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), num)

    def min_eigenvalues(self) -> np.ndarray:
        sym = 0.5 * (self.Q + np.swapaxes(self.Q, 1, 2))
        return np.linalg.eigvalsh(sym)[:, 0]

    def norms(self) -> np.ndarray:
        """Spectral norms; symmetric ``Q[k]`` use eigenvalues instead of an SVD."""
        if np.all(self.asymmetry() <= SYM_TOL):
            ev = np.linalg.eigvalsh(0.5 * (self.Q + np.swapaxes(self.Q, 1, 2)))
            return np.maximum(np.abs(ev[:, 0]), np.abs(ev[:, -1]))
        return np.linalg.norm(self.Q, 2, axis=(1, 2))

    def is_symmetric_psd(self, sym_tol=SYM_TOL, psd_tol=PSD_TOL) -> bool:
        if np.any(self.asymmetry() > sym_tol):
            return False
        return bool(np.all(self.min_eigenvalues() >= -psd_tol * self.norms()))


@dataclass(frozen=True, eq=False)
class Problem:
    """A validated bundle; build it with :func:`validate_problem`."""

    ops: OperatorSequence
    data: DataSequence
    grid: TimeGrid
    cfg: RegConfig

    @property
    def N(self) -> int:
        return self.grid.n_steps

    @property
    def m(self) -> int:
        return self.ops.m

    @property
    def d(self) -> int:
        return self.ops.d

    @property
    def alpha(self) -> float:
        return self.cfg.alpha

    @cached_property
    def normal_matrices(self) -> np.ndarray:
        """``F_k^T L_k F_k`` for every node, shape ``(N+1, m, m)``."""
        W = self.cfg.weight_L
        if self.ops.is_constant and (W.is_scalar or W.matrices.ndim == 2):
            F = self.ops.unique[0]
            if W.is_scalar:
                block = W.scale * (F.T @ F)
            else:
                block = F.T @ W.matrices @ F
            out = np.broadcast_to(block, (len(self.ops), self.m, self.m))
            return out
        F = self.ops.ops
        if W.is_scalar:
            out = W.scale * np.einsum("kdi,kdj->kij", F, F)
        else:
            Ls = np.broadcast_to(W.matrices, (len(F),) + W.matrices.shape[-2:])
            out = np.einsum("kdi,kde,kej->kij", F, Ls, F)
        out.setflags(write=False)
        return out

    @cached_property
    def normal_rhs(self) -> np.ndarray:
        """``F_k^T L_k y_k`` for every node, shape ``(N+1, m)``."""
        y = self.data.samples
        W = self.cfg.weight_L
        Ly = W.scale * y if W.is_scalar else np.einsum(
            "kde,ke->kd", np.broadcast_to(W.matrices, (len(y),) + W.matrices.shape[-2:]), y)
        if self.ops.is_constant:
            out = Ly @ self.ops.unique[0]
        else:
            out = np.einsum("kdi,kd->ki", self.ops.ops, Ly)
        out.setflags(write=False)
        return out

    def residual_weight_norm(self) -> float:
        return max(self.cfg.weight_L.norm(k) for k in range(
            1 if self.cfg.weight_L.is_scalar else len(self.ops)))

    def _with_cfg(self, cfg: RegConfig) -> "Problem":
        out = Problem(self.ops, self.data, self.grid, cfg)
        # normal equations do not depend on alpha or u0
        for key in ("normal_matrices", "normal_rhs"):
            if key in self.__dict__:
                out.__dict__[key] = self.__dict__[key]
        return out

    def with_alpha(self, alpha: float) -> "Problem":
        return self._with_cfg(self.cfg.with_alpha(alpha))

    def with_start(self, u0) -> "Problem":
        u0 = np.asarray(u0, dtype=float)
        if u0.shape != (self.m,):
            raise DimensionMismatch("u0", (self.m,), u0.shape)
        return self._with_cfg(RegConfig(self.cfg.alpha, u0, self.cfg.weight_L))

    def with_data(self, data: DataSequence) -> "Problem":
        return validate_problem(self.ops, data, self.grid, self.cfg)

    def __eq__(self, other):
        if not isinstance(other, Problem):
            return NotImplemented
        return (self.ops == other.ops and self.data == other.data
                and self.grid == other.grid and self.cfg == other.cfg)

    __hash__ = None


def validate_problem(ops, data=None, grid: TimeGrid | None = None, cfg: RegConfig | None = None) -> Problem:
    """Check mutual consistency of a dynamic inverse problem and bundle it.

    Accepts either the four components or an existing :class:`Problem`
    (validation is idempotent).

    Raises
    ------
    DimensionMismatch
        Sequence lengths, data dimension or ``u0`` size disagree.
    NonFinite
        An operator or data entry is NaN/inf.
    InvalidWeight
        ``alpha <= 0`` or an explicit ``L`` is not SPD.
    """
    if isinstance(ops, Problem):
        # bundles are immutable: re-run the checks, keep the object (and its caches)
        p = ops
        validate_problem(p.ops, p.data, p.grid, p.cfg)
        return p
    if not isinstance(ops, OperatorSequence):
        ops = OperatorSequence(ops)
    if not isinstance(data, DataSequence):
        data = DataSequence(data)
    if grid is None or cfg is None:
        raise TypeError("grid and cfg are required")

    n = grid.n_nodes
    if len(ops) != n:
        raise DimensionMismatch("operators", f"{n} time nodes", len(ops))
    if len(data) != n:
        raise DimensionMismatch("data", f"{n} time nodes", len(data))
    if data.d != ops.d:
        raise DimensionMismatch("data dimension", ops.d, data.d)
    if cfg.u0.shape != (ops.m,):
        raise DimensionMismatch("u0", (ops.m,), cfg.u0.shape)
    if not np.all(np.isfinite(ops.unique)):
        raise NonFinite("operators", _first_nonfinite(ops.unique))
    if not np.all(np.isfinite(data.samples)):
        raise NonFinite("data", _first_nonfinite(data.samples))
    if not np.all(np.isfinite(cfg.u0)):
        raise NonFinite("u0", _first_nonfinite(cfg.u0))
    W = cfg.weight_L
    if W.kind == "explicit":
        if W.matrices.shape[-1] != ops.d:
            raise DimensionMismatch("weight_L", (ops.d, ops.d), W.matrices.shape[-2:])
        if W.matrices.ndim == 3 and W.matrices.shape[0] != n:
            raise DimensionMismatch("weight_L", f"{n} time nodes", W.matrices.shape[0])
    return Problem(ops, data, grid, cfg)


def operator_norm_max(ops) -> float:
    """Largest spectral norm ``max_k ||F_k||_2`` over the sequence."""
    if isinstance(ops, Problem):
        ops = ops.ops
    if not isinstance(ops, OperatorSequence):
        ops = OperatorSequence(ops)
    mats = ops.unique
    if mats.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(mats, 2, axis=(1, 2))))
