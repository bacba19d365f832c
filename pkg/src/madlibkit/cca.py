"""Canonical correlation analysis with eigenvalue-power column scaling.

Fits paired linear projections of two views that maximize the trace of the
cross-correlation of the projected data under whitening constraints, then
scales each projection column by the ``power_p``-th power of its canonical
correlation. Cosine similarity between projected vectors of the two views is
the retrieval score.

The fit is a whitened-SVD: with per-view covariances ``Sxx``, ``Syy`` and
cross-covariance ``Sxy`` (all normalized by ``n - 1``), the singular value
decomposition of ``Sxx^-1/2 Sxy Syy^-1/2 = U S V^T`` gives the unscaled
projections ``W1 = Sxx^-1/2 U`` and ``W2 = Syy^-1/2 V`` and the canonical
correlations ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientSamplesError, InvalidInputError, ParseError, ShapeError

__all__ = ["CcaModel", "fit_cca", "project", "canonical_trace", "save_cca_model", "load_cca_model"]

MODEL_MAGIC = "NCCA1"

# relative ridge applied to each covariance diagonal when none is given
DEFAULT_RELATIVE_RIDGE = 1e-4

# eigenvalues below this floor are clamped before inverse square roots
EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class CcaModel:
    """Fitted projection pair.

    ``w1``/``w2`` carry the power-scaled columns used for retrieval;
    ``w1_base``/``w2_base`` are the unscaled (plain-CCA) projections.
    ``ridge_x``/``ridge_y`` are the absolute diagonal loads that were added
    to each view's covariance.
    """

    mean_x: np.ndarray
    mean_y: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    w1_base: np.ndarray
    w2_base: np.ndarray
    correlations: np.ndarray
    power_p: float
    ridge_x: float
    ridge_y: float

    def __post_init__(self):
        for name in ("mean_x", "mean_y", "w1", "w2", "w1_base", "w2_base", "correlations"):
            getattr(self, name).setflags(write=False)

    @property
    def embed_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def dim_x(self) -> int:
        return self.mean_x.shape[0]

    @property
    def dim_y(self) -> int:
        return self.mean_y.shape[0]


def _as_data_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise ShapeError(f"{name} must be a 2-d matrix with at least one column, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _inv_sqrt_psd(s: np.ndarray) -> np.ndarray:
    """Inverse square root of a symmetric PSD matrix via eigendecomposition."""
    evals, evecs = np.linalg.eigh(s)
    evals = np.maximum(evals, EIG_FLOOR)
    return (evecs / np.sqrt(evals)) @ evecs.T


def fit_cca(
    x,
    y,
    ridge: float | None = None,
    embed_dim: int | None = None,
    power_p: float = 4.0,
) -> CcaModel:
    """Fit the joint embedding on paired rows of the two views.

    Parameters
    ----------
    x, y : (n, dx) and (n, dy) arrays
        Paired samples; one row per instance in each view.
    ridge : float or None
        Diagonal load added to both covariances. ``None`` picks, per view,
        ``1e-4`` times the mean diagonal of that view's covariance.
    embed_dim : int or None
        Number of retained projection pairs; defaults to ``min(dx, dy)``.
    power_p : float
        Exponent of the per-column correlation scaling (0 recovers plain CCA).
    """
    x = _as_data_matrix(x, "x")
    y = _as_data_matrix(y, "y")
    n, dx = x.shape
    dy = y.shape[1]
    if y.shape[0] != n:
        raise ShapeError(f"row counts differ: x has {n}, y has {y.shape[0]}")
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 samples to fit, got {n}")
    if embed_dim is None:
        embed_dim = min(dx, dy)
    if not 0 <= embed_dim <= min(dx, dy):
        raise ShapeError(f"embed_dim must be in [0, {min(dx, dy)}], got {embed_dim}")
    if ridge is not None and ridge < 0:
        raise InvalidInputError(f"ridge must be >= 0, got {ridge}")

    mean_x = x.mean(axis=0)
    mean_y = y.mean(axis=0)
    xc = x - mean_x
    yc = y - mean_y

    sxx = xc.T @ xc / (n - 1)
    syy = yc.T @ yc / (n - 1)
    sxy = xc.T @ yc / (n - 1)
    if ridge is None:
        ridge_x = DEFAULT_RELATIVE_RIDGE * float(np.trace(sxx)) / dx
        ridge_y = DEFAULT_RELATIVE_RIDGE * float(np.trace(syy)) / dy
    else:
        ridge_x = ridge_y = float(ridge)
    sxx[np.diag_indices(dx)] += ridge_x
    syy[np.diag_indices(dy)] += ridge_y

    isqrt_x = _inv_sqrt_psd(sxx)
    isqrt_y = _inv_sqrt_psd(syy)
    m = isqrt_x @ sxy @ isqrt_y
    u, s, vt = np.linalg.svd(m, full_matrices=False)

    # deterministic sign convention: largest-|entry| of each left singular
    # vector made positive, the right vector flipped in tandem
    for k in range(u.shape[1]):
        j = int(np.argmax(np.abs(u[:, k])))
        if u[j, k] < 0:
            u[:, k] *= -1.0
            vt[k, :] *= -1.0

    correlations = s[:embed_dim].copy()
    w1_base = isqrt_x @ u[:, :embed_dim]
    w2_base = isqrt_y @ vt[:embed_dim].T
    scale = correlations**power_p
    return CcaModel(
        mean_x=mean_x,
        mean_y=mean_y,
        w1=w1_base * scale,
        w2=w2_base * scale,
        w1_base=w1_base,
        w2_base=w2_base,
        correlations=correlations,
        power_p=float(power_p),
        ridge_x=ridge_x,
        ridge_y=ridge_y,
    )


def project(model: CcaModel, v: np.ndarray, view: str) -> np.ndarray:
    """Map a vector (or a matrix of row vectors) of one view into the joint space."""
    if view == "image":
        mean, w = model.mean_x, model.w1
    elif view == "text":
        mean, w = model.mean_y, model.w2
    else:
        raise InvalidInputError(f"view must be 'image' or 'text', got {view!r}")
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1] != mean.shape[0]:
        raise ShapeError(f"{view} view expects dim {mean.shape[0]}, got {arr.shape[-1]}")
    return (arr - mean) @ w


def canonical_trace(model: CcaModel, x, y) -> float:
    """Trace of ``Xhat^T Yhat`` under the unscaled projections of centered data.

    On the training set this equals ``(n - 1)`` times the sum of the
    canonical correlations.
    """
    x = _as_data_matrix(x, "x")
    y = _as_data_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"row counts differ: x has {x.shape[0]}, y has {y.shape[0]}")
    if x.shape[1] != model.dim_x or y.shape[1] != model.dim_y:
        raise ShapeError(
            f"model expects dims ({model.dim_x}, {model.dim_y}), got ({x.shape[1]}, {y.shape[1]})"
        )
    xh = (x - model.mean_x) @ model.w1_base
    yh = (y - model.mean_y) @ model.w2_base
    return float(np.sum(xh * yh))


def _write_vector(fh, vec: np.ndarray) -> None:
    fh.write(" ".join(repr(float(v)) for v in vec) + "\n")


def save_cca_model(model: CcaModel, path: str | Path) -> None:
    """Write a model as versioned text; floats use shortest round-trip form.

    The unscaled projections are stored; the power scaling is reapplied on
    load (a zero-correlation column would otherwise be irrecoverable).
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MODEL_MAGIC + "\n")
        fh.write(f"{model.dim_x} {model.dim_y} {model.embed_dim}\n")
        fh.write(f"{model.power_p!r} {model.ridge_x!r} {model.ridge_y!r}\n")
        _write_vector(fh, model.mean_x)
        _write_vector(fh, model.mean_y)
        _write_vector(fh, model.correlations)
        for row in model.w1_base:
            _write_vector(fh, row)
        for row in model.w2_base:
            _write_vector(fh, row)


def load_cca_model(path: str | Path) -> CcaModel:
    """Read a model written by :func:`save_cca_model`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise ParseError(f"not a {MODEL_MAGIC} model file: {path}", line=1)
    try:
        dx, dy, d = (int(p) for p in lines[1].split())
        power_p, ridge_x, ridge_y = (float(p) for p in lines[2].split())
        cursor = 3

        def take_vector(expected: int) -> np.ndarray:
            nonlocal cursor
            parts = lines[cursor].split()
            if len(parts) != expected:
                raise ParseError(f"expected {expected} values, got {len(parts)}", line=cursor + 1)
            cursor += 1
            return np.array([float(p) for p in parts], dtype=np.float64)

        mean_x = take_vector(dx)
        mean_y = take_vector(dy)
        correlations = take_vector(d)
        w1_base = np.stack([take_vector(d) for _ in range(dx)]) if dx else np.zeros((0, d))
        w2_base = np.stack([take_vector(d) for _ in range(dy)]) if dy else np.zeros((0, d))
    except ParseError:
        raise
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed model file {path}: {exc}") from None
    scale = correlations**power_p
    return CcaModel(
        mean_x=mean_x,
        mean_y=mean_y,
        w1=w1_base * scale,
        w2=w2_base * scale,
        w1_base=w1_base,
        w2_base=w2_base,
        correlations=correlations,
        power_p=power_p,
        ridge_x=ridge_x,
        ridge_y=ridge_y,
    )
