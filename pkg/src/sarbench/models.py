"""Training-free anomaly models on feature grids.

Two complementary approaches:

* Gaussian field: fit a multivariate Gaussian (mean + regularized
  covariance) per grid cell over the normal training maps; score test
  cells by Mahalanobis distance, computed through the stored Cholesky
  factor with triangular solves (no explicit inverse).
* PCA feature model: pool every cell vector from the training maps, keep
  the principal subspace holding a target fraction of the variance, and
  score by the squared reconstruction residual outside that subspace.
  Fully deterministic: dense eigendecomposition, eigenvector signs fixed
  so the largest-magnitude entry of each axis is positive.

Grid scores become full-resolution anomaly maps by bilinear upsampling and
Gaussian smoothing (sigma = 4 px, replicate border); the image-level score
is the map maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular
from scipy.ndimage import gaussian_filter

from .core import ValidationError
from .features import FeatureMap

__all__ = [
    "GaussianField",
    "PcaModel",
    "AnomalyMap",
    "padim_fit",
    "padim_score",
    "dfm_fit",
    "dfm_score",
    "postprocess_map",
    "image_score",
    "save_model",
    "load_model",
]

COVARIANCE_EPS = 0.01   # ridge added to every cell covariance
SMOOTH_SIGMA = 4.0      # anomaly-map Gaussian blur, in pixels
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GaussianField:
    """Per-cell Gaussian model: mean (gh, gw, C) and the Cholesky factor
    (gh, gw, C, C) of the ridge-regularized covariance."""

    mean: np.ndarray
    chol: np.ndarray
    eps: float

    @property
    def grid_h(self) -> int:
        return self.mean.shape[0]

    @property
    def grid_w(self) -> int:
        return self.mean.shape[1]

    @property
    def channels(self) -> int:
        return self.mean.shape[2]


@dataclass(frozen=True)
class PcaModel:
    """Global feature mean, orthonormal principal axes (C, r), the full
    descending eigenvalue spectrum, and the retained-variance target."""

    mean: np.ndarray
    axes: np.ndarray
    eigenvalues: np.ndarray
    variance_ratio: float

    @property
    def channels(self) -> int:
        return self.mean.shape[0]

    @property
    def rank(self) -> int:
        return self.axes.shape[1]


@dataclass(frozen=True)
class AnomalyMap:
    """Full-resolution per-pixel anomaly scores for one image."""

    scores: np.ndarray
    image_id: str = ""

    def __post_init__(self) -> None:
        if self.scores.ndim != 2:
            raise ValidationError(f"anomaly map must be 2-D, got {self.scores.shape}")
        if not np.isfinite(self.scores).all():
            raise ValidationError("anomaly map contains non-finite scores")
        if self.scores.min() < 0:
            raise ValidationError("anomaly map contains negative scores")


def _stack_features(train_features: list[FeatureMap]) -> np.ndarray:
    if len(train_features) < 2:
        raise ValidationError("need at least 2 training feature maps")
    shape = train_features[0].data.shape
    for fm in train_features[1:]:
        if fm.data.shape != shape:
            raise ValidationError(
                f"feature map shape mismatch: {fm.data.shape} vs {shape}"
            )
    # (N, gh, gw, C)
    return np.stack([fm.data for fm in train_features]).transpose(0, 2, 3, 1)


def padim_fit(train_features: list[FeatureMap], eps: float = COVARIANCE_EPS) -> GaussianField:
    """Fit the per-cell Gaussian field over normal training maps.

    Per cell: mean over the N maps and sample covariance (denominator N-1)
    plus ``eps`` on the diagonal; the Cholesky factor of the regularized
    covariance is precomputed for scoring.
    """
    x = _stack_features(train_features)
    n = x.shape[0]
    mean = x.mean(axis=0)
    xc = x - mean
    cov = np.einsum("nijc,nijd->ijcd", xc, xc) / (n - 1)
    cov += eps * np.eye(x.shape[-1])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValidationError(
            f"regularized covariance not positive definite (eps={eps}): {exc}"
        ) from exc
    return GaussianField(mean=mean, chol=chol, eps=float(eps))


def padim_score(field: GaussianField, fm: FeatureMap) -> np.ndarray:
    """Per-cell Mahalanobis distance of ``fm`` from the fitted field.

    score = sqrt((x-mu)^T (Sigma + eps I)^(-1) (x-mu)), evaluated as the
    norm of the forward triangular solve L y = (x - mu).
    """
    gh, gw, c = field.mean.shape
    if fm.data.shape != (c, gh, gw):
        raise ValidationError(
            f"feature map shape {fm.data.shape} does not match field "
            f"({c}, {gh}, {gw})"
        )
    delta = fm.data.transpose(1, 2, 0).reshape(-1, c)
    mean = field.mean.reshape(-1, c)
    chol = field.chol.reshape(-1, c, c)
    scores = np.empty(delta.shape[0])
    for j in range(delta.shape[0]):
        y = solve_triangular(chol[j], delta[j] - mean[j], lower=True)
        scores[j] = np.sqrt(y @ y)
    return scores.reshape(gh, gw)


def dfm_fit(
    train_features: list[FeatureMap], variance_ratio: float = 0.97
) -> PcaModel:
    """Fit the PCA feature model on all cell vectors pooled across maps.

    The principal axes come from the dense eigendecomposition of the
    sample covariance (eigenvalues descending); the rank is the smallest r
    whose cumulative explained variance reaches ``variance_ratio``. No
    randomness anywhere: refitting identical data is bit-identical.
    """
    if not 0.0 < variance_ratio <= 1.0:
        raise ValidationError("variance_ratio must lie in (0, 1]")
    if not train_features:
        raise ValidationError("need at least one training feature map")
    pooled = np.concatenate([fm.vectors() for fm in train_features])
    if pooled.shape[0] < 2:
        raise ValidationError("need at least 2 pooled feature vectors")
    mean = pooled.mean(axis=0)
    xc = pooled - mean
    cov = xc.T @ xc / (pooled.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = eigvals[::-1].copy()
    eigvecs = eigvecs[:, ::-1].copy()

    total = eigvals.sum()
    if total <= 0.0:
        rank = 1
    else:
        cumulative = np.cumsum(eigvals) / total
        rank = int(np.searchsorted(cumulative, variance_ratio - 1e-12) + 1)
        rank = min(rank, eigvals.size)
    axes = eigvecs[:, :rank]
    # canonical sign: largest-magnitude entry of each axis is positive
    flip = axes[np.abs(axes).argmax(axis=0), np.arange(rank)] < 0
    axes = axes * np.where(flip, -1.0, 1.0)
    return PcaModel(
        mean=mean,
        axes=axes,
        eigenvalues=eigvals,
        variance_ratio=float(variance_ratio),
    )


def dfm_score(model: PcaModel, fm: FeatureMap) -> np.ndarray:
    """Squared reconstruction residual outside the principal subspace.

    score = ||(x - m) - U U^T (x - m)||^2 per grid cell.
    """
    if fm.channels != model.channels:
        raise ValidationError(
            f"feature map has {fm.channels} channels, model expects "
            f"{model.channels}"
        )
    t = fm.vectors() - model.mean
    resid = t - (t @ model.axes) @ model.axes.T
    return (resid**2).sum(axis=1).reshape(fm.grid_h, fm.grid_w)


def _resize_bilinear(grid: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Separable bilinear resize with endpoint-aligned sampling."""

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if n_in == 1:
            zero = np.zeros(n_out, dtype=np.intp)
            return zero, zero, np.zeros(n_out)
        src = np.linspace(0.0, n_in - 1.0, n_out)
        lo = np.floor(src).astype(np.intp)
        lo = np.minimum(lo, n_in - 2)
        return lo, lo + 1, src - lo

    r0, r1, rf = axis_coords(grid.shape[0], out_shape[0])
    c0, c1, cf = axis_coords(grid.shape[1], out_shape[1])
    rows = grid[r0] * (1.0 - rf[:, None]) + grid[r1] * rf[:, None]
    return rows[:, c0] * (1.0 - cf) + rows[:, c1] * cf


def postprocess_map(
    grid_scores: np.ndarray,
    image_shape: tuple[int, int],
    image_id: str = "",
    sigma: float = SMOOTH_SIGMA,
) -> AnomalyMap:
    """Upsample a score grid to image resolution and smooth it.

    Bilinear interpolation to ``image_shape`` followed by a Gaussian blur
    (truncated at 4 sigma, replicate border). Constant grids come out as
    constant maps of the same value.
    """
    grid = np.asarray(grid_scores, dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise ValidationError(f"score grid must be non-empty 2-D, got {grid.shape}")
    up = _resize_bilinear(grid, tuple(image_shape))
    smooth = gaussian_filter(up, sigma=sigma, mode="nearest", truncate=4.0)
    return AnomalyMap(scores=np.maximum(smooth, 0.0), image_id=image_id)


def image_score(amap: AnomalyMap) -> float:
    """Image-level anomaly score: the maximum pixel of the map."""
    return float(amap.scores.max())


# ---------------------------------------------------------------------------
# model state serialization (versioned .npz: dims + row-major arrays)
# ---------------------------------------------------------------------------

def save_model(model: GaussianField | PcaModel, path: Path | str) -> None:
    """Write model state to a versioned .npz archive.

    Keys: ``format_version``, ``kind`` ("gaussian_field" | "pca"), then the
    model's arrays (row-major) and scalars. ``load_model`` restores either
    kind; fit and score can therefore run as separate invocations.
    """
    path = Path(path)
    if isinstance(model, GaussianField):
        np.savez_compressed(
            path,
            format_version=_FORMAT_VERSION,
            kind="gaussian_field",
            mean=model.mean,
            chol=model.chol,
            eps=model.eps,
        )
    elif isinstance(model, PcaModel):
        np.savez_compressed(
            path,
            format_version=_FORMAT_VERSION,
            kind="pca",
            mean=model.mean,
            axes=model.axes,
            eigenvalues=model.eigenvalues,
            variance_ratio=model.variance_ratio,
        )
    else:
        raise ValidationError(f"cannot serialize {type(model).__name__}")


def load_model(path: Path | str) -> GaussianField | PcaModel:
    """Restore a model written by ``save_model``."""
    with np.load(Path(path)) as data:
        version = int(data["format_version"])
        if version != _FORMAT_VERSION:
            raise ValidationError(
                f"unsupported model format version {version} "
                f"(expected {_FORMAT_VERSION})"
            )
        kind = str(data["kind"])
        if kind == "gaussian_field":
            return GaussianField(
                mean=data["mean"], chol=data["chol"], eps=float(data["eps"])
            )
        if kind == "pca":
            return PcaModel(
                mean=data["mean"],
                axes=data["axes"],
                eigenvalues=data["eigenvalues"],
                variance_ratio=float(data["variance_ratio"]),
            )
        raise ValidationError(f"unknown model kind {kind!r} in {path}")
