"""Image-derived skew stacks.

The background skew pushes pixels whose local average brightness falls below
a threshold towards label 1, leaving the remaining labels to compete over the
foreground. The soft threshold is a logistic ramp: smooth, bounded, and
monotone in brightness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .automaton import SkewStack
from .domain import Boundary, DomainSpec, RealField
from .operators import CircularConv, NoncircularStar
from .spectral import Filter, GaussianSpec, periodized_gaussian


@dataclass(frozen=True)
class ImageField:
    """A grayscale image with intensities normalized to [0, 1]."""

    domain: DomainSpec
    intensity: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.intensity, dtype=np.float64)
        if arr.shape != self.domain.dims:
            if arr.size != self.domain.size:
                raise ValueError(
                    f"image needs {self.domain.size} pixels, got shape {arr.shape}"
                )
            arr = arr.reshape(self.domain.dims)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        arr = np.ascontiguousarray(arr).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "intensity", arr)


@dataclass(frozen=True)
class SoftThresholdSpec:
    """Parameters of the background skew.

    ``window`` sets the local-average neighborhood; ``threshold`` is the
    brightness split point (None means pick it from the histogram);
    ``sharpness`` is the logistic width and ``amplitude`` the skew's maximum.
    """

    window: Filter | GaussianSpec
    threshold: float | None = None
    sharpness: float = 0.05
    amplitude: float = 1.0

    def __post_init__(self):
        if self.sharpness <= 0:
            raise ValueError(f"sharpness must be positive, got {self.sharpness}")
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")


def otsu_threshold(intensity: np.ndarray, bins: int = 256) -> float:
    """Two-class variance-maximizing split of the intensity histogram.

    Deterministic; for a constant image the first bin wins and the threshold
    degenerates harmlessly to the low end.
    """
    counts, edges = np.histogram(intensity.reshape(-1), bins=bins, range=(0.0, 1.0))
    counts = counts.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2.0
    w0 = np.cumsum(counts)
    w1 = w0[-1] - w0
    sum0 = np.cumsum(counts * centers)
    mu0 = np.divide(sum0, w0, out=np.zeros_like(sum0), where=w0 > 0)
    mu1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros_like(sum0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    # The maximum is a plateau when the histogram has empty gaps; take the
    # plateau's midpoint so the split lands between the modes.
    flat = np.flatnonzero(between == between.max())
    return float(centers[flat[(flat.size - 1) // 2]])


def local_average(image: ImageField, window: Filter | GaussianSpec) -> RealField:
    """Weighted local mean of the intensity under the window.

    Circular domains average with the unit-sum wrap-around window; zero-padded
    domains renormalize per pixel so edge pixels still average to unit mass.
    """
    domain = image.domain
    if domain.is_circular:
        if isinstance(window, GaussianSpec):
            filt = periodized_gaussian(domain, window).normalized()
        else:
            window.domain.require_same(domain, "averaging window")
            filt = window.normalized()
        op = CircularConv(filt)
    else:
        if not isinstance(window, GaussianSpec):
            raise ValueError(
                "zero-padded averaging needs a Gaussian window spec; "
                "explicit tap filters are defined on circular domains"
            )
        op = NoncircularStar.gaussian(domain, window)
    return op.apply(RealField(domain, image.intensity))


def background_skew(image: ImageField, spec: SoftThresholdSpec, num_labels: int) -> SkewStack:
    """Soft-thresholded local brightness as the label-1 skew; all others zero.

    R1 = amplitude * logistic((threshold - average) / sharpness), strictly
    decreasing in local brightness and confined to (0, amplitude).
    """
    if num_labels < 2:
        raise ValueError("background skew needs at least two labels")
    theta = spec.threshold
    if theta is None:
        theta = otsu_threshold(image.intensity)
    avg = local_average(image, spec.window).values
    r1 = spec.amplitude * expit((theta - avg) / spec.sharpness)
    stack = np.zeros((num_labels,) + image.domain.dims)
    stack[0] = r1
    return SkewStack(image.domain, stack)


def zero_skew(domain: DomainSpec, num_labels: int) -> SkewStack:
    """All-zero skews: the dynamics reduce to pure iterative voting."""
    if num_labels < 1:
        raise ValueError("need at least one label")
    return SkewStack.zeros(domain, num_labels)
