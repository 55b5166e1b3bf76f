"""The linear voting operator in its three concrete forms.

Circular convolution, edge-renormalized zero-padded (star) convolution, and a
dense matrix. Every operator can be realized as a dense N x N matrix in the
fixed row-major pixel order, which is what the brute-force certifiers consume.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .domain import Boundary, DomainSpec, RealField
from .spectral import (
    Filter,
    GaussianSpec,
    fourier_series_min,
    is_even_taps,
    sampled_gaussian,
)

# Dense realizations above this are refused: N^2 doubles at N=4096 is already
# a 128 MiB matrix.
DENSE_MATRIX_MAX = 4096
# Below this size a circular operator caches its dense matrix and applies it
# with one matrix product per step.
_MATRIX_PATH_MAX = 1024
# Sparse-filter path: one vectorized roll-and-add per nonzero tap.
_ROLL_PATH_MAX_TAPS = 256
# Largest matrix we hand to the symmetric eigensolver for PSD decisions.
_EIGEN_MAX = 2048


class OperatorSizeError(ValueError):
    """Raised when a dense realization would exceed the size cap."""


class VotingOperator(ABC):
    """Linear map on real fields over a fixed domain."""

    domain: DomainSpec

    @abstractmethod
    def apply_many(self, values: np.ndarray) -> np.ndarray:
        """Apply to a batch shaped (batch, *dims); returns the same shape."""

    @abstractmethod
    def as_matrix(self) -> np.ndarray:
        """Dense N x N realization in row-major pixel order."""

    def apply(self, field: RealField) -> RealField:
        self.domain.require_same(field.domain, "operator apply")
        out = self.apply_many(field.values[np.newaxis])[0]
        return RealField(self.domain, out)

    def _check_dense_size(self) -> None:
        if self.domain.size > DENSE_MATRIX_MAX:
            raise OperatorSizeError(
                f"dense realization capped at N={DENSE_MATRIX_MAX}, "
                f"domain has N={self.domain.size}"
            )


class CircularConv(VotingOperator):
    """Circular convolution with a fixed filter.

    The evaluation path is fixed at construction time, so equal inputs always
    produce bit-identical outputs: a cached dense matrix on small domains, a
    roll-and-add over the nonzero taps for sparse filters (both exact for
    integer taps), and a real FFT product otherwise.
    """

    def __init__(self, filt: Filter):
        if not filt.domain.is_circular:
            raise ValueError("circular convolution needs a circular domain")
        self.filter = filt
        self.domain = filt.domain
        taps = filt.taps.values
        nz = np.argwhere(taps != 0.0)
        self._offsets = [tuple(int(c) for c in row) for row in nz]
        self._weights = [float(taps[off]) for off in self._offsets]
        self._matrix_t: np.ndarray | None = None
        self._spectrum: np.ndarray | None = None
        if self.domain.size <= _MATRIX_PATH_MAX:
            self._matrix_t = np.ascontiguousarray(self.as_matrix().T)
        elif len(self._offsets) > _ROLL_PATH_MAX_TAPS:
            self._spectrum = np.fft.rfftn(taps)

    def apply_many(self, values: np.ndarray) -> np.ndarray:
        dims = self.domain.dims
        axes = tuple(range(1, len(dims) + 1))
        if self._matrix_t is not None:
            flat = values.reshape(values.shape[0], -1)
            return (flat @ self._matrix_t).reshape(values.shape)
        if self._spectrum is not None:
            spec = np.fft.rfftn(values, axes=axes)
            return np.fft.irfftn(spec * self._spectrum, s=dims, axes=axes)
        out = np.zeros_like(values, dtype=np.float64)
        for off, w in zip(self._offsets, self._weights):
            out += w * np.roll(values, shift=off, axis=axes)
        return out

    def as_matrix(self) -> np.ndarray:
        self._check_dense_size()
        n = self.domain.size
        taps = self.filter.taps.values
        matrix = np.zeros((n, n))
        # Column k is the filter rolled to position k: A[x, k] = g(x - k).
        for k in range(n):
            shift = np.unravel_index(k, self.domain.dims)
            matrix[:, k] = np.roll(taps, shift=shift, axis=tuple(range(len(self.domain.dims)))).reshape(-1)
        return matrix


class NoncircularStar(VotingOperator):
    """Zero-padded convolution renormalized by the local weight mass.

    The kernel is a centered, odd-shaped tap array on the integer lattice.
    Admissibility requires (ones * kernel) > 0 at every pixel, i.e. every
    pixel sees positive total weight; the constructor rejects kernels that
    fail this. apply(f) = (f * kernel) / (ones * kernel) pointwise.
    """

    def __init__(self, kernel: np.ndarray, domain: DomainSpec,
                 axis_factors: list[np.ndarray] | None = None):
        if domain.boundary is not Boundary.ZERO_PADDED:
            raise ValueError("star convolution needs a zero-padded domain")
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.ndim != domain.ndim:
            raise ValueError(
                f"kernel has {kernel.ndim} axes, domain has {domain.ndim}"
            )
        if any(s % 2 == 0 for s in kernel.shape):
            raise ValueError("kernel must be odd-shaped (centered origin)")
        self.domain = domain
        self.kernel = kernel
        self._factors = None
        if axis_factors is not None:
            self._factors = [np.asarray(f, dtype=np.float64) for f in axis_factors]
        self._norm = self._plain_conv_many(np.ones((1,) + domain.dims))[0]
        if not np.all(self._norm > 0.0):
            raise ValueError(
                "kernel is not admissible: the zero-padded convolution with "
                "the all-ones field must be strictly positive at every pixel"
            )

    @classmethod
    def gaussian(cls, domain: DomainSpec, spec: GaussianSpec) -> "NoncircularStar":
        """Separable strictly positive Gaussian taps; applied axis by axis."""
        line = sampled_gaussian(spec, ndim=1)
        kernel = line
        for _ in range(domain.ndim - 1):
            kernel = np.multiply.outer(kernel, line)
        return cls(kernel.reshape((line.size,) * domain.ndim), domain,
                   axis_factors=[line] * domain.ndim)

    @property
    def normalization(self) -> np.ndarray:
        """(ones * kernel), the per-pixel weight mass dividing each vote."""
        return self._norm

    def _plain_conv_many(self, values: np.ndarray) -> np.ndarray:
        if self._factors is not None:
            out = values
            for axis, line in enumerate(self._factors):
                out = ndimage.convolve1d(out, line, axis=axis + 1,
                                         mode="constant", cval=0.0)
            return out
        out = np.empty_like(values, dtype=np.float64)
        for i in range(values.shape[0]):
            out[i] = ndimage.convolve(values[i], self.kernel,
                                      mode="constant", cval=0.0)
        return out

    def apply_many(self, values: np.ndarray) -> np.ndarray:
        return self._plain_conv_many(values) / self._norm

    def plain_apply(self, field: RealField) -> RealField:
        """The unnormalized zero-padded convolution (the symmetric part)."""
        self.domain.require_same(field.domain, "operator apply")
        return RealField(self.domain, self._plain_conv_many(field.values[np.newaxis])[0])

    def plain_matrix(self) -> np.ndarray:
        """Dense realization of the unnormalized convolution."""
        self._check_dense_size()
        n = self.domain.size
        dims = self.domain.dims
        center = tuple(s // 2 for s in self.kernel.shape)
        matrix = np.zeros((n, n))
        flat = np.arange(n).reshape(dims)
        for idx in np.ndindex(self.kernel.shape):
            w = self.kernel[idx]
            if w == 0.0:
                continue
            off = tuple(i - c for i, c in zip(idx, center))
            # rows x = y + off for y such that both stay inside the box
            src = []
            dst = []
            for o, size in zip(off, dims):
                lo_y, hi_y = max(0, -o), min(size, size - o)
                if lo_y >= hi_y:
                    src = None
                    break
                src.append(slice(lo_y, hi_y))
                dst.append(slice(lo_y + o, hi_y + o))
            if src is None:
                continue
            matrix[flat[tuple(dst)].reshape(-1), flat[tuple(src)].reshape(-1)] += w
        return matrix

    def as_matrix(self) -> np.ndarray:
        return self.plain_matrix() / self._norm.reshape(-1)[:, np.newaxis]


class DenseMatrix(VotingOperator):
    """An explicit linear map in row-major pixel order."""

    def __init__(self, matrix: np.ndarray, domain: DomainSpec):
        matrix = np.asarray(matrix, dtype=np.float64)
        n = domain.size
        if matrix.shape != (n, n):
            raise ValueError(f"matrix shape {matrix.shape} does not match N={n}")
        if n > DENSE_MATRIX_MAX:
            raise OperatorSizeError(
                f"dense operators capped at N={DENSE_MATRIX_MAX}, got N={n}"
            )
        self.domain = domain
        self.matrix = matrix
        self._matrix_t = np.ascontiguousarray(matrix.T)

    def apply_many(self, values: np.ndarray) -> np.ndarray:
        flat = values.reshape(values.shape[0], -1)
        return (flat @ self._matrix_t).reshape(values.shape)

    def as_matrix(self) -> np.ndarray:
        return self.matrix.copy()


@dataclass(frozen=True)
class QuasiFactorization:
    """A = diag(lam) . B with lam positive and B a candidate symmetric part.

    ``min_eigen_or_min_spectrum`` is the evidence behind the PSD verdict: the
    smallest eigenvalue when B was small enough to decompose, otherwise the
    sampled minimum of the kernel's Fourier series (a sufficient check).
    """

    lam: np.ndarray
    b_matrix: np.ndarray | None
    b_matrix_is_self_adjoint: bool
    b_matrix_is_psd: bool
    min_eigen_or_min_spectrum: float

    def __post_init__(self):
        if not np.all(self.lam > 0.0):
            raise ValueError("lam entries must be strictly positive")


def quadratic_form(op: VotingOperator, field: RealField) -> float:
    """<A f, f> under the standard real inner product."""
    op.domain.require_same(field.domain, "quadratic form")
    out = op.apply_many(field.values[np.newaxis])[0]
    return float(np.dot(out.reshape(-1), field.flat))


def is_self_adjoint(op: VotingOperator, tol: float = 1e-9) -> bool:
    """Whether A equals its adjoint (entrywise within tol).

    For circular convolutions this is evenness of the taps. Star operators
    are checked through their dense realization; on domains too large to
    densify they are reported non-self-adjoint, which is the typical truth
    for edge-renormalized operators.
    """
    if isinstance(op, CircularConv):
        taps = op.filter.taps.values
        from .spectral import reversed_taps

        return bool(np.abs(taps - reversed_taps(taps)).max() <= tol)
    if isinstance(op, DenseMatrix):
        return bool(np.abs(op.matrix - op.matrix.T).max() <= tol)
    if op.domain.size > DENSE_MATRIX_MAX:
        return False
    matrix = op.as_matrix()
    return bool(np.abs(matrix - matrix.T).max() <= tol)


def gershgorin_psd_bound(matrix: np.ndarray) -> float:
    """Lower bound on the spectrum: min over rows of a_ii - sum_{j!=i}|a_ij|.
    Nonnegative bound implies PSD for symmetric matrices."""
    diag = np.diag(matrix)
    off = np.abs(matrix).sum(axis=1) - np.abs(diag)
    return float((diag - off).min())


def _min_eigenvalue(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix).min())


def _scaling_to_symmetric(matrix: np.ndarray, tol: float) -> np.ndarray | None:
    """Positive lam with diag(1/lam) @ matrix symmetric, or None.

    lam is pinned to 1 on the first pixel of each connected component of the
    nonzero pattern, making the result deterministic.
    """
    n = matrix.shape[0]
    significant = np.abs(matrix) > tol
    if np.any(significant & ~significant.T):
        return None  # a_ij nonzero with a_ji zero cannot be rescaled away
    log_lam = np.full(n, np.nan)
    for root in range(n):
        if not np.isnan(log_lam[root]):
            continue
        log_lam[root] = 0.0
        stack = [root]
        while stack:
            i = stack.pop()
            for j in np.nonzero(significant[i])[0]:
                if i == j:
                    continue
                ratio = matrix[i, j] / matrix[j, i]
                if ratio <= 0.0:
                    return None
                value = log_lam[i] + np.log(ratio)
                if np.isnan(log_lam[j]):
                    log_lam[j] = value
                    stack.append(int(j))
                elif abs(log_lam[j] - value) > 1e-9:
                    return None
    lam = np.exp(log_lam)
    sym = matrix / lam[:, np.newaxis]
    if np.abs(sym - sym.T).max() > tol * max(1.0, np.abs(sym).max()):
        return None
    return lam


def quasi_factorize(op: VotingOperator, tol: float = 1e-9) -> QuasiFactorization | None:
    """Factor A = diag(lam) . B and report whether B is symmetric and PSD.

    Star operators factor exactly: lam is the reciprocal weight mass and B the
    plain convolution. Circular convolutions with even taps factor trivially
    (lam = 1); other matrices are searched for a positive row scaling that
    symmetrizes them, returning None when no such scaling exists.
    """
    n = op.domain.size
    if isinstance(op, NoncircularStar):
        lam = 1.0 / op.normalization.reshape(-1)
        kernel_even = is_even_taps(op.kernel)
        if n <= DENSE_MATRIX_MAX:
            b_matrix = op.plain_matrix()
            sym = bool(np.abs(b_matrix - b_matrix.T).max() <= tol)
            if n <= _EIGEN_MAX and sym:
                evidence = _min_eigenvalue(b_matrix)
            else:
                evidence = fourier_series_min(op.kernel)
            return QuasiFactorization(lam, b_matrix, sym, evidence >= -tol, evidence)
        evidence = fourier_series_min(op.kernel)
        return QuasiFactorization(lam, None, kernel_even, evidence >= -tol, evidence)

    if isinstance(op, CircularConv):
        taps = op.filter.taps.values
        if is_even_taps(taps):
            lam = np.ones(n)
            spectrum_min = float(np.fft.fftn(taps).real.min())
            b_matrix = op.as_matrix() if n <= DENSE_MATRIX_MAX else None
            return QuasiFactorization(lam, b_matrix, True,
                                      spectrum_min >= -tol, spectrum_min)
        if n > DENSE_MATRIX_MAX:
            return None
        matrix = op.as_matrix()
    else:
        matrix = op.as_matrix()

    if np.abs(matrix - matrix.T).max() <= tol:
        lam = np.ones(n)
        evidence = _min_eigenvalue(matrix) if n <= _EIGEN_MAX else gershgorin_psd_bound(matrix)
        return QuasiFactorization(lam, matrix, True, evidence >= -tol, evidence)
    lam = _scaling_to_symmetric(matrix, tol)
    if lam is None:
        return None
    b_matrix = matrix / lam[:, np.newaxis]
    sym = bool(np.abs(b_matrix - b_matrix.T).max() <= tol * max(1.0, np.abs(b_matrix).max()))
    evidence = _min_eigenvalue((b_matrix + b_matrix.T) / 2.0) if n <= _EIGEN_MAX else gershgorin_psd_bound(b_matrix)
    return QuasiFactorization(lam, b_matrix, sym, evidence >= -tol, evidence)
