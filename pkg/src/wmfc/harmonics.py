"""Real spherical-harmonic and head-adapted bases over an electrode montage.

The head basis is a Gram-Schmidt orthonormalization of the spherical-harmonic
design matrix under the discrete electrode inner product, so it is exactly
orthonormal over the actual (non-uniform) electrode sampling while spanning
the same subspaces column by column.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .signal_io import Montage

CONDITION_WARN_THRESHOLD = 1e8


class BasisKind(enum.Enum):
    SPHERICAL = "sh"
    HEAD = "hh"


def flat_index(n: int, m: int) -> int:
    """Flatten (order, degree) to a column index: k = n^2 + n + m."""
    if abs(m) > n:
        raise ValueError(f"degree {m} exceeds order {n}")
    return n * n + n + m


def unflatten_index(k: int) -> tuple[int, int]:
    n = int(math.isqrt(k))
    return n, k - n * n - n


def _legendre_column(n_max: int, m: int, x: float) -> np.ndarray:
    """Associated Legendre P_n^m(x) for n = m..n_max by upward recurrence.

    No Condon-Shortley phase. Stable for the orders used here (n <= ~30).
    """
    somx2 = math.sqrt(max(0.0, 1.0 - x * x))
    # P_m^m = (2m-1)!! (1-x^2)^{m/2}
    pmm = 1.0
    for i in range(1, m + 1):
        pmm *= (2 * i - 1) * somx2
    values = [pmm]
    if n_max > m:
        pmmp1 = x * (2 * m + 1) * pmm
        values.append(pmmp1)
        for n in range(m + 2, n_max + 1):
            pnm = (x * (2 * n - 1) * values[-1] - (n + m - 1) * values[-2]) / (n - m)
            values.append(pnm)
    return np.array(values)


def eval_real_sh(n: int, m: int, theta: float, phi: float) -> float:
    """Real orthonormal spherical harmonic of order n, degree m.

    m = 0:  sqrt((2n+1)/4pi) P_n(cos theta)
    m > 0:  sqrt(2) K(n,m) cos(m phi) P_n^m(cos theta)
    m < 0:  sqrt(2) K(n,|m|) sin(|m| phi) P_n^|m|(cos theta)
    with K the full orthonormalization constant.
    """
    if n < 0 or abs(m) > n:
        raise ValueError(f"invalid order/degree pair ({n}, {m})")
    am = abs(m)
    x = math.cos(theta)
    pnm = _legendre_column(n, am, x)[n - am]
    k = math.sqrt((2 * n + 1) / (4 * math.pi) * math.factorial(n - am) / math.factorial(n + am))
    if m == 0:
        return k * pnm
    if m > 0:
        return math.sqrt(2.0) * k * math.cos(m * phi) * pnm
    return math.sqrt(2.0) * k * math.sin(am * phi) * pnm


@dataclass
class SamplingWeights:
    """Diagonal electrode weighting; identity by default."""

    diag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        if self.diag.ndim != 1 or np.any(self.diag <= 0):
            raise ValueError("sampling weights must be a vector of positive entries")

    @classmethod
    def identity(cls, n: int) -> "SamplingWeights":
        return cls(diag=np.ones(n))


@dataclass
class HarmonicBasis:
    kind: BasisKind
    order: int
    matrix: np.ndarray  # electrodes x (order+1)^2
    labels: list[str] = field(default_factory=list)

    @property
    def n_electrodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_harmonics(self) -> int:
        return self.matrix.shape[1]


@dataclass
class CoefficientSeries:
    coeffs: np.ndarray  # (order+1)^2 x T
    kind: BasisKind
    order: int

    def __post_init__(self):
        expected = (self.order + 1) ** 2
        if self.coeffs.shape[0] != expected:
            raise ValueError(f"coefficient row count {self.coeffs.shape[0]} != {expected}")


def _check_order(montage: Montage, order: int):
    n_harm = (order + 1) ** 2
    n_elec = len(montage.entries)
    if order < 0:
        raise ValueError("order must be nonnegative")
    if n_harm > n_elec:
        raise ValueError(f"order {order} needs {n_harm} harmonics but montage has only {n_elec} electrodes")


def build_sh_basis(montage: Montage, order: int) -> HarmonicBasis:
    """Electrode-sampled real spherical harmonics, columns in flat-index order."""
    _check_order(montage, order)
    theta, phi = montage.angles()
    n_harm = (order + 1) ** 2
    matrix = np.empty((len(theta), n_harm))
    for k in range(n_harm):
        n, m = unflatten_index(k)
        for i in range(len(theta)):
            matrix[i, k] = eval_real_sh(n, m, theta[i], phi[i])
    cond = np.linalg.cond(matrix)
    if cond > CONDITION_WARN_THRESHOLD:
        warnings.warn(
            f"spherical-harmonic design matrix is near-degenerate (condition {cond:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return HarmonicBasis(kind=BasisKind.SPHERICAL, order=order, matrix=matrix, labels=montage.labels)


def build_head_basis(
    montage: Montage, order: int, weights: SamplingWeights | None = None
) -> HarmonicBasis:
    """Orthonormalize the SH design matrix under the weighted electrode inner product.

    Modified Gram-Schmidt in flat-index order: column k of the result spans the
    same subspace as SH columns 0..k, and the Gram matrix B^T Gamma B is the
    identity to round-off.
    """
    sh = build_sh_basis(montage, order)
    gamma = (weights or SamplingWeights.identity(sh.n_electrodes)).diag
    if len(gamma) != sh.n_electrodes:
        raise ValueError("weight count does not match electrode count")
    basis = sh.matrix.astype(float).copy()
    n_harm = basis.shape[1]
    for k in range(n_harm):
        col = basis[:, k]
        for j in range(k):
            col -= (basis[:, j] * gamma) @ col * basis[:, j]
        norm = math.sqrt(float((col * gamma) @ col))
        if norm < 1e-10 * math.sqrt(float(gamma.sum())):
            raise ValueError(f"rank deficiency: harmonic column {k} is dependent on earlier columns")
        basis[:, k] = col / norm
    return HarmonicBasis(kind=BasisKind.HEAD, order=order, matrix=basis, labels=montage.labels)


def decompose(basis: HarmonicBasis, weights: SamplingWeights | None, v: np.ndarray) -> CoefficientSeries:
    """Project channel x time data onto the basis: coeffs = B^T Gamma V."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[0] != basis.n_electrodes:
        raise ValueError(
            f"data has {v.shape[0] if v.ndim == 2 else '?'} channels, basis expects {basis.n_electrodes}"
        )
    gamma = (weights or SamplingWeights.identity(basis.n_electrodes)).diag
    if len(gamma) != basis.n_electrodes:
        raise ValueError("weight count does not match electrode count")
    coeffs = basis.matrix.T @ (gamma[:, None] * v)
    return CoefficientSeries(coeffs=coeffs, kind=basis.kind, order=basis.order)
