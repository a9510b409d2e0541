"""4x4 transform algebra and least-squares alignment between point sets.

The production estimator solves the affine problem in closed form (normal
equations via lstsq, which also yields the minimum-norm solution on
degenerate support). The iterative estimator reproduces the same
minimization by plain gradient descent with backtracking line search from
a random-(0,1) parameter initialization.

The minimized criterion is the mean squared Euclidean distance between
matched points; ``mean_residual`` always reports the mean (unsquared)
Euclidean distance, which is what callers can recompute independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, TransformError

AFFINE = "affine"
PROJECTIVE = "projective"

_MIN_SUPPORT = {AFFINE: 4, PROJECTIVE: 5}


class Transform4:
    """A 4x4 real matrix acting on 3D points in homogeneous coordinates."""

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise TransformError(f"expected a 4x4 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise TransformError("non-finite matrix entries")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise TransformError("matrix is singular (|det| <= 1e-12)")
        self.matrix = m

    @classmethod
    def identity(cls) -> "Transform4":
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(cls, rot: np.ndarray, trans) -> "Transform4":
        m = np.eye(4)
        m[:3, :3] = np.asarray(rot, dtype=np.float64)
        m[:3, 3] = np.asarray(trans, dtype=np.float64)
        return cls(m)

    @property
    def is_affine(self) -> bool:
        return bool(np.array_equal(self.matrix[3], [0.0, 0.0, 0.0, 1.0]))

    def __eq__(self, other) -> bool:
        return isinstance(other, Transform4) and np.array_equal(self.matrix, other.matrix)

    def __repr__(self) -> str:
        return f"Transform4({self.matrix!r})"


@dataclass
class AlignmentResult:
    transform: Transform4
    matched_count: int
    mean_residual: float  # mean Euclidean distance, recomputable by callers
    objective: float = 0.0  # the minimized criterion: mean squared distance
    iterations: int = 0
    converged: bool = True
    degenerate: bool = False
    # objective value after every accepted iteration (iterative path only)
    objective_history: list[float] | None = None


@dataclass
class AlignConfig:
    """Estimator settings.

    ``family`` selects affine (12 free parameters, bottom row pinned) or
    projective (15 dof, H[3,3] fixed to 1). The iterative fields apply to
    estimate_alignment_iterative only.
    """

    family: str = AFFINE
    init: str = "random"  # or "identity"
    seed: int = 0
    learning_rate: float = 1.0
    max_iterations: int = 2000
    tolerance: float = 1e-10


def apply_transform(t: Transform4, points: np.ndarray) -> np.ndarray:
    """Map (N, 3) points through homogeneous multiplication.

    Projective transforms divide by the resulting w-component; a w that
    collapses below 1e-12 in magnitude is an error.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    hom = np.hstack([pts, np.ones((len(pts), 1))])
    out = hom @ t.matrix.T
    if t.is_affine:
        return out[:, :3]
    w = out[:, 3]
    if np.any(np.abs(w) <= 1e-12):
        raise TransformError("w-component vanished during projective mapping")
    return out[:, :3] / w[:, None]


def compose(a: Transform4, b: Transform4) -> Transform4:
    """Transform equivalent to applying b first, then a."""
    return Transform4(a.matrix @ b.matrix)


def invert(t: Transform4) -> Transform4:
    try:
        return Transform4(np.linalg.inv(t.matrix))
    except np.linalg.LinAlgError:
        raise TransformError("matrix is not invertible")


def mean_distance(t: Transform4, src: np.ndarray, dst: np.ndarray) -> float:
    """Mean Euclidean distance between t(src) and dst."""
    diff = apply_transform(t, src) - np.asarray(dst, dtype=np.float64)
    return float(np.linalg.norm(diff, axis=1).mean())


def mean_squared_distance(t: Transform4, src: np.ndarray, dst: np.ndarray) -> float:
    """The minimized criterion: mean squared Euclidean distance."""
    diff = apply_transform(t, src) - np.asarray(dst, dtype=np.float64)
    return float((diff * diff).sum() / len(diff))


def _check_support(src: np.ndarray, dst: np.ndarray, family: str) -> tuple[np.ndarray, np.ndarray]:
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise EstimationError(
            f"src and dst must pair up, got {src.shape[0]} vs {dst.shape[0]} points"
        )
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise EstimationError("non-finite input points")
    need = _MIN_SUPPORT[family]
    if src.shape[0] < need:
        raise EstimationError(
            f"{family} estimation needs at least {need} point pairs, got {src.shape[0]}"
        )
    return src, dst


def estimate_alignment(src, dst, config: AlignConfig | None = None) -> AlignmentResult:
    """Closed-form least-squares fit of dst ~= H * src.

    Affine: linear solve of the normal equations (lstsq). Coplanar support
    yields the minimum-norm solution and sets ``degenerate``. Projective:
    homogeneous DLT solve (algebraic criterion).
    """
    config = config or AlignConfig()
    if config.family not in _MIN_SUPPORT:
        raise EstimationError(f"unknown transform family {config.family!r}")
    src, dst = _check_support(src, dst, config.family)

    if config.family == AFFINE:
        x = np.hstack([src, np.ones((len(src), 1))])
        # solve relative to the identity so that on rank-deficient (coplanar)
        # support the unconstrained directions stay at the identity instead
        # of collapsing to zero (keeps the transform invertible)
        identity = np.eye(4, 3)
        sol, _, rank, _ = np.linalg.lstsq(x, dst - x @ identity, rcond=None)
        m = np.eye(4)
        m[:3, :] = (identity + sol).T
        degenerate = rank < 4
    else:
        m = _dlt_projective(src, dst)
        degenerate = False

    try:
        t = Transform4(m)
    except TransformError as e:
        raise EstimationError(f"estimated transform unusable: {e}")
    return AlignmentResult(
        transform=t,
        matched_count=len(src),
        mean_residual=mean_distance(t, src, dst),
        objective=mean_squared_distance(t, src, dst),
        iterations=0,
        degenerate=degenerate,
    )


def _dlt_projective(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    # each pair contributes 3 rows: (H s)_i * w_d - (H s)_w * d_i = 0
    n = len(src)
    s_h = np.hstack([src, np.ones((n, 1))])
    rows = []
    for k in range(n):
        s = s_h[k]
        for i in range(3):
            row = np.zeros(16)
            row[4 * i : 4 * i + 4] = s
            row[12:16] = -dst[k, i] * s
            rows.append(row)
    a = np.asarray(rows)
    _, _, vt = np.linalg.svd(a)
    h = vt[-1].reshape(4, 4)
    if abs(h[3, 3]) <= 1e-12:
        raise EstimationError("projective solve produced a degenerate transform")
    return h / h[3, 3]


def affine_objective(params: np.ndarray, src: np.ndarray, dst: np.ndarray) -> float:
    """Mean squared residual of the 12-parameter affine map.

    ``params`` holds the top three rows of H, row-major: [A | b] flattened.
    """
    a = params.reshape(3, 4)
    r = src @ a[:, :3].T + a[:, 3] - dst
    return float((r * r).sum() / len(src))


def affine_gradient(params: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Analytic gradient of affine_objective w.r.t. the 12 parameters."""
    n = len(src)
    a = params.reshape(3, 4)
    r = src @ a[:, :3].T + a[:, 3] - dst  # (n, 3)
    g = np.empty((3, 4))
    g[:, :3] = (2.0 / n) * r.T @ src
    g[:, 3] = (2.0 / n) * r.sum(axis=0)
    return g.ravel()


def estimate_alignment_iterative(src, dst, config: AlignConfig | None = None) -> AlignmentResult:
    """Gradient-descent minimization of the alignment objective.

    Parameters start as random numbers in (0, 1) (or at the identity when
    config.init == "identity"). Plain gradient descent with backtracking
    line search; stops when the objective change drops below
    config.tolerance. On well-conditioned support this agrees with the
    closed-form estimate (the objective is a convex quadratic with a
    unique minimizer).
    """
    config = config or AlignConfig()
    if config.family != AFFINE:
        raise EstimationError("iterative estimation supports the affine family only")
    src, dst = _check_support(src, dst, AFFINE)
    n = len(src)

    rng = np.random.default_rng(config.seed)
    if config.init == "identity":
        params = np.eye(3, 4).ravel().copy()
    else:
        params = rng.uniform(0.0, 1.0, size=12)

    x = np.hstack([src, np.ones((n, 1))])
    # Lipschitz-informed trial step: the Hessian is (2/n) kron(X'X, I)
    hess_scale = 2.0 * np.linalg.eigvalsh(x.T @ x).max() / n
    trial = min(config.learning_rate, 1.0 / hess_scale) if hess_scale > 0 else config.learning_rate

    f = affine_objective(params, src, dst)
    history = [f]
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iterations + 1):
        g = affine_gradient(params, src, dst)
        gnorm2 = float(g @ g)
        if gnorm2 == 0.0:
            converged = True
            break
        step = trial
        accepted = False
        for _ in range(60):
            cand = params - step * g
            fc = affine_objective(cand, src, dst)
            if fc <= f - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        params, delta, f = cand, f - fc, fc
        history.append(f)
        if delta < config.tolerance:
            converged = True
            break

    m = np.eye(4)
    m[:3, :] = params.reshape(3, 4)
    try:
        t = Transform4(m)
    except TransformError as e:
        raise EstimationError(f"iterative estimate unusable: {e}")
    return AlignmentResult(
        transform=t,
        matched_count=n,
        mean_residual=mean_distance(t, src, dst),
        objective=f,
        iterations=iterations,
        converged=converged,
        objective_history=history,
    )


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle_rad) * k + (1 - np.cos(angle_rad)) * (k @ k)
