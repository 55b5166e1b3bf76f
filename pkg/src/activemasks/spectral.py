"""Filter spectra on circular domains and guaranteed-convergent filter design.

The forward transform is the standard non-normalized DFT per axis; spectra of
voting filters decide which convergence guarantee applies. Periodizing sampled
Gaussians yields filters whose spectrum is nonnegative up to truncation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import Boundary, DomainSpec, RealField


class UnsupportedDomainError(ValueError):
    """Raised for spectral operations on non-circular domains."""


DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Filter:
    """Voting weights over a circular domain."""

    taps: RealField

    @property
    def domain(self) -> DomainSpec:
        return self.taps.domain

    @classmethod
    def from_taps(cls, domain: DomainSpec, values) -> "Filter":
        return cls(RealField(domain, values))

    @classmethod
    def dirac(cls, domain: DomainSpec) -> "Filter":
        taps = np.zeros(domain.dims)
        taps[(0,) * domain.ndim] = 1.0
        return cls(RealField(domain, taps))

    @classmethod
    def box(cls, domain: DomainSpec, radius: int = 1) -> "Filter":
        """Cube of unit taps with the given radius per axis (3-tap box in 1-D,
        the 3x3 neighborhood box in 2-D for radius 1). Offsets that alias under
        wrap-around accumulate."""
        taps = np.zeros(domain.dims)
        grids = np.meshgrid(
            *[np.arange(-radius, radius + 1) for _ in domain.dims], indexing="ij"
        )
        for off in zip(*(g.reshape(-1) for g in grids)):
            pos = tuple(int(o) % n for o, n in zip(off, domain.dims))
            taps[pos] += 1.0
        return cls(RealField(domain, taps))

    @classmethod
    def plus(cls, domain: DomainSpec) -> "Filter":
        """Center tap plus the two unit-offset taps per axis (the cross-shaped
        neighborhood in 2-D)."""
        taps = np.zeros(domain.dims)
        taps[(0,) * domain.ndim] += 1.0
        for axis, n in enumerate(domain.dims):
            for step in (1, -1):
                pos = [0] * domain.ndim
                pos[axis] = step % n
                taps[tuple(pos)] += 1.0
        return cls(RealField(domain, taps))

    def normalized(self) -> "Filter":
        """Same taps rescaled to unit sum (requires a nonzero tap sum)."""
        total = float(self.taps.values.sum())
        if total == 0.0:
            raise ValueError("cannot normalize a filter with zero tap sum")
        return Filter(RealField(self.domain, self.taps.values / total))


class GuaranteeTier(Enum):
    """Strongest convergence guarantee a filter's spectrum supports."""

    ALWAYS_CONVERGES = "always-converges"
    ONE_OR_TWO_CYCLE = "1-or-2-cycle"
    NO_GUARANTEE = "no-guarantee"


@dataclass(frozen=True)
class SpectrumReport:
    """Spectrum of a voting filter and the predicates derived from it."""

    spectrum: np.ndarray
    max_imag: float
    is_even: bool
    min_spectrum: float
    is_nonnegative: bool
    is_diag_dominant: bool
    tol: float
    tier: GuaranteeTier


@dataclass(frozen=True)
class GaussianSpec:
    """A sampled Gaussian window: standard deviation in pixels, and how many
    integer taps to keep per side before periodization.

    The default truncation radius ceil(6 * scale) puts the discarded tail
    below 1e-7 of the peak; the paper-level guarantees hold only up to this
    truncation, which is why spectrum checks carry a small tolerance.
    """

    scale: float
    truncation_radius: int | None = None

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        radius = self.truncation_radius
        if radius is None:
            radius = max(1, math.ceil(6 * self.scale))
        radius = int(radius)
        if radius < 1:
            raise ValueError(f"truncation_radius must be >= 1, got {radius}")
        object.__setattr__(self, "truncation_radius", radius)


def dft(field: RealField) -> np.ndarray:
    """Non-normalized multidimensional DFT of a field on a circular domain."""
    if not field.domain.is_circular:
        raise UnsupportedDomainError(
            "the DFT is defined on circular domains only; "
            "zero-padded operators are certified through their factorization"
        )
    return np.fft.fftn(field.values)


def inverse_dft(spectrum: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Inverse of :func:`dft`; returns a complex array over the domain."""
    if not domain.is_circular:
        raise UnsupportedDomainError("inverse DFT needs a circular domain")
    return np.fft.ifftn(np.asarray(spectrum, dtype=complex).reshape(domain.dims))


def reversed_taps(values: np.ndarray) -> np.ndarray:
    """The reversal g~(n) = g(-n) with indices taken modulo each axis length."""
    idx = [(-np.arange(n)) % n for n in values.shape]
    return values[np.ix_(*idx)]


def is_even_taps(values: np.ndarray) -> bool:
    """Exact spatial evenness check: g(n) == g(-n) for every n."""
    return bool(np.array_equal(values, reversed_taps(values)))


def analyze_filter(filt: Filter, tol: float = DEFAULT_TOL) -> SpectrumReport:
    """Classify a filter by its spectrum.

    Even taps with a nonnegative spectrum certify convergence to a fixed point
    from every initial segmentation; evenness alone still bounds cycle lengths
    by 2; anything else carries no guarantee.
    """
    values = filt.taps.values
    spectrum = dft(filt.taps)
    max_imag = float(np.abs(spectrum.imag).max())
    even = is_even_taps(values)
    min_spectrum = float(spectrum.real.min())
    nonnegative = min_spectrum >= -tol
    center = float(values[(0,) * filt.domain.ndim])
    off_sum = float(np.abs(values).sum() - abs(center))
    diag_dominant = center >= off_sum
    if even and nonnegative:
        tier = GuaranteeTier.ALWAYS_CONVERGES
    elif even:
        tier = GuaranteeTier.ONE_OR_TWO_CYCLE
    else:
        tier = GuaranteeTier.NO_GUARANTEE
    return SpectrumReport(
        spectrum=spectrum,
        max_imag=max_imag,
        is_even=even,
        min_spectrum=min_spectrum,
        is_nonnegative=nonnegative,
        is_diag_dominant=diag_dominant,
        tol=tol,
        tier=tier,
    )


def sampled_gaussian(spec: GaussianSpec, ndim: int = 1) -> np.ndarray:
    """Integer samples h(k) = exp(-k^2 / (2 scale^2)) for |k| <= radius.

    Returns a centered tap array, one axis per dimension (the separable
    product for ndim > 1). Taps are strictly positive and not normalized;
    normalization is the job of whichever operator consumes them.
    """
    radius = spec.truncation_radius
    ks = np.arange(-radius, radius + 1, dtype=np.float64)
    line = np.exp(-(ks**2) / (2.0 * spec.scale**2))
    out = line
    for _ in range(ndim - 1):
        out = np.multiply.outer(out, line)
    return out


def _periodized_axis(n: int, spec: GaussianSpec) -> np.ndarray:
    radius = spec.truncation_radius
    buckets = np.zeros(n)
    for k in range(-radius, radius + 1):
        buckets[k % n] += math.exp(-(k * k) / (2.0 * spec.scale**2))
    # Mirror the lower half so evenness holds exactly in floating point.
    for m in range(1, (n + 1) // 2):
        buckets[n - m] = buckets[m]
    return buckets


def periodized_gaussian(domain: DomainSpec, spec: GaussianSpec) -> Filter:
    """Wrap the sampled Gaussian onto a circular domain, axis by axis.

    The result is even exactly (the upper half of each axis is mirrored from
    the lower half) and its spectrum is nonnegative up to truncation error.
    """
    if not domain.is_circular:
        raise UnsupportedDomainError("periodization targets circular domains")
    taps = _periodized_axis(domain.dims[0], spec)
    for n in domain.dims[1:]:
        taps = np.multiply.outer(taps, _periodized_axis(n, spec))
    return Filter(RealField(domain, taps))


def quadratic_form_spectral(filt: Filter, field: RealField) -> float:
    """<f * g, f> evaluated in the frequency domain:
    (1/N) * sum of spectrum(g) * |spectrum(f)|^2."""
    filt.domain.require_same(field.domain, "quadratic form")
    gf = dft(filt.taps)
    ff = dft(field)
    total = (gf * np.abs(ff) ** 2).sum()
    return float(total.real) / filt.domain.size


def fourier_series_min(kernel: np.ndarray, oversample: int = 16) -> float:
    """Minimum of the real part of the Fourier series of a finitely supported
    kernel, sampled on a fine grid (a sufficient nonnegativity check for the
    zero-padded convolution operator built from the kernel)."""
    shape = tuple(max(256, oversample * s) for s in kernel.shape)
    embedded = np.zeros(shape)
    embedded[tuple(slice(0, s) for s in kernel.shape)] = kernel
    return float(np.fft.fftn(embedded).real.min())
