"""Random initial data: free-field samplers with mode-keyed randomness.

Two ensembles are provided.  The plain Gaussian free field draws one
standard complex Gaussian per (basis index, direction, mode) and scales it
by 1/|n|.  The U(1) Coulomb ensemble draws the two transverse complex
amplitudes of each mode with variance g^2/(32 pi^2 |n|^2) per real
component, so the sampled field is divergence-free by construction, not
just in expectation.

Randomness is keyed by (seed, stream, mode): the cutoff enters only by
selecting which modes are filled in, so the cutoff-N field is exactly the
restriction of the cutoff-N' field for N < N' at equal (seed, stream).
That coupling is what turns distributional convergence statements into
per-seed (pathwise) checks.

Mode bookkeeping: exactly one of n, -n is drawn, namely the
representative whose first nonzero coordinate is positive; the reflected
coefficient is filled in by the reality (respectively the U(1)
anti-reality) symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import SpectralConnection, mode_grids
from .groups import GroupSpec
from .rng import TAG_COMPONENT, mode_gaussians

__all__ = [
    "SamplerConfig",
    "canonical_half_modes",
    "transverse_frame",
    "sample_gff",
    "sample_u1_coulomb",
    "covariance_diagnostic",
    "CovarianceReport",
]


@dataclass(frozen=True)
class SamplerConfig:
    group: GroupSpec
    cutoff: int
    seed: int
    stream: int = 0
    coupling: float = 1.0

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be at least 1")
        if self.coupling <= 0:
            raise ValueError("coupling must be positive")


@lru_cache(maxsize=None)
def canonical_half_modes(cutoff: int) -> np.ndarray:
    """All n with 0 < |n|_inf <= cutoff whose first nonzero coordinate is
    positive, in lexicographic order; int array (H, 3)."""
    axis = np.arange(-cutoff, cutoff + 1)
    n1, n2, n3 = np.meshgrid(axis, axis, axis, indexing="ij")
    modes = np.stack([n1.ravel(), n2.ravel(), n3.ravel()], axis=1)
    first_nonzero_positive = np.zeros(len(modes), dtype=bool)
    undecided = np.ones(len(modes), dtype=bool)
    for k in range(3):
        col = modes[:, k]
        first_nonzero_positive |= undecided & (col > 0)
        undecided &= col == 0
    half = modes[first_nonzero_positive]
    order = np.lexsort((half[:, 2], half[:, 1], half[:, 0]))
    out = half[order]
    out.setflags(write=False)
    return out


def _mode_slot(cutoff: int, n: np.ndarray):
    return tuple(np.asarray(n) + cutoff)


def transverse_frame(n) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair (u1, u2) spanning the plane orthogonal to n.

    Built from integer cross products of the canonical representative of
    {n, -n}, so u(-n) = u(n) holds exactly and the dot products n.u are
    exact zeros in floating point.
    """
    n = np.asarray(n, dtype=np.int64)
    if n.shape != (3,) or not n.any():
        raise ValueError("need a nonzero integer 3-vector")
    h = n.copy()
    for c in h:
        if c != 0:
            if c < 0:
                h = -h
            break
    v = np.cross(h, np.array([1, 0, 0], dtype=np.int64))
    if not v.any():
        v = np.cross(h, np.array([0, 1, 0], dtype=np.int64))
    w = np.cross(h, v)
    u1 = v / np.linalg.norm(v)
    u2 = w / np.linalg.norm(w)
    return u1, u2


@lru_cache(maxsize=None)
def _frames_for(cutoff: int):
    modes = canonical_half_modes(cutoff)
    u1 = np.empty((len(modes), 3))
    u2 = np.empty((len(modes), 3))
    for i, n in enumerate(modes):
        u1[i], u2[i] = transverse_frame(n)
    u1.setflags(write=False)
    u2.setflags(write=False)
    return u1, u2


def sample_gff(config: SamplerConfig) -> SpectralConnection:
    """g^3-valued Gaussian free field at the configured cutoff.

    Coefficient of component (a, j) at a drawn mode n is Z^a_j(n)/|n| with
    Z standard complex Gaussian; the zero mode vanishes.  The coupling
    constant does not enter this ensemble.
    """
    d = config.group.algebra_dim
    n_mod = canonical_half_modes(config.cutoff)
    z = mode_gaussians(config.seed, config.stream, n_mod, 6 * d, TAG_COMPONENT)
    z = z.reshape(len(n_mod), d, 3, 2)
    zc = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)  # E|Z|^2 = 1
    radius = np.linalg.norm(n_mod, axis=1)
    zc /= radius[:, None, None]
    k = 2 * config.cutoff + 1
    coeffs = np.zeros((d, 3, k, k, k), dtype=complex)
    ix, iy, iz = (n_mod + config.cutoff).T
    coeffs[:, :, ix, iy, iz] = np.moveaxis(zc, 0, -1)
    coeffs[:, :, k - 1 - ix, k - 1 - iy, k - 1 - iz] = np.conj(
        np.moveaxis(zc, 0, -1)
    )
    return SpectralConnection(config.group, config.cutoff, coeffs)


def sample_u1_coulomb(config: SamplerConfig) -> SpectralConnection:
    """Coulomb-gauge U(1) Gaussian ensemble at coupling g.

    Each drawn mode carries Z_n = Z^1_n u^1_n + Z^2_n u^2_n with the four
    real components i.i.d. N(0, g^2/(32 pi^2 |n|^2)); the stored component
    coefficient is -i Z_n so that the field values are real multiples of
    the basis element [i] (equivalently, the matrix-valued field lies in
    i R).  n . Z_n = 0 termwise, hence d* of the output vanishes at the
    rounding level.
    """
    if config.group.kind != "u1":
        raise ValueError("the Coulomb-gauge ensemble is U(1)-only")
    n_mod = canonical_half_modes(config.cutoff)
    u1v, u2v = _frames_for(config.cutoff)
    z = mode_gaussians(config.seed, config.stream, n_mod, 4, TAG_COMPONENT)
    radius_sq = np.sum(n_mod.astype(float) ** 2, axis=1)
    sigma = config.coupling / np.sqrt(32.0 * np.pi**2 * radius_sq)
    z = z * sigma[:, None]
    z1 = z[:, 0] + 1j * z[:, 1]
    z2 = z[:, 2] + 1j * z[:, 3]
    zn = z1[:, None] * u1v + z2[:, None] * u2v      # (H, 3), the i R part
    stored = -1j * zn                                # component convention
    k = 2 * config.cutoff + 1
    coeffs = np.zeros((1, 3, k, k, k), dtype=complex)
    ix, iy, iz = (n_mod + config.cutoff).T
    coeffs[0, :, ix, iy, iz] = stored
    coeffs[0, :, k - 1 - ix, k - 1 - iy, k - 1 - iz] = np.conj(stored)
    return SpectralConnection(config.group, config.cutoff, coeffs)


# ---------------------------------------------------------------------------
# covariance diagnostics


@dataclass
class CovarianceReport:
    pairs: list
    predicted: np.ndarray
    empirical: np.ndarray
    standard_error: np.ndarray
    max_sigma_deviation: float


def _truncated_green(cutoff: int, delta: np.ndarray) -> float:
    """sum over 0 < |n|_inf <= N of e^(i 2 pi n.delta)/|n|^2 (real)."""
    n1, n2, n3 = mode_grids(cutoff)
    nsq = (n1**2 + n2**2 + n3**2).astype(float)
    mask = nsq > 0
    phase = np.exp(1j * 2.0 * np.pi * (n1 * delta[0] + n2 * delta[1] + n3 * delta[2]))
    return float(np.sum(np.where(mask, phase / np.where(mask, nsq, 1.0), 0.0)).real)


def _transverse_green(cutoff: int, delta: np.ndarray, j: int, k: int,
                      coupling: float) -> float:
    """Coulomb ensemble covariance of components (j, k) at separation
    delta: sum_n e^(i 2 pi n.delta) g^2/(16 pi^2 |n|^2) (delta_jk -
    n_j n_k / |n|^2)."""
    n1, n2, n3 = mode_grids(cutoff)
    n = (n1, n2, n3)
    nsq = (n1**2 + n2**2 + n3**2).astype(float)
    mask = nsq > 0
    safe = np.where(mask, nsq, 1.0)
    proj = (1.0 if j == k else 0.0) - n[j] * n[k] / safe
    phase = np.exp(1j * 2.0 * np.pi * (n1 * delta[0] + n2 * delta[1] + n3 * delta[2]))
    weight = coupling**2 / (16.0 * np.pi**2 * safe)
    return float(np.sum(np.where(mask, phase * weight * proj, 0.0)).real)


def _evaluate_at_points(a: SpectralConnection, points: np.ndarray) -> np.ndarray:
    """Direct Fourier evaluation of all components, shape (d, 3, P)."""
    n1, n2, n3 = mode_grids(a.cutoff)
    nmat = np.stack([n1.ravel(), n2.ravel(), n3.ravel()], axis=1)
    phases = np.exp(1j * 2.0 * np.pi * (points @ nmat.T))        # (P, K^3)
    flat = a.coeffs.reshape(a.coeffs.shape[0], 3, -1)
    return np.real(np.einsum("ajm,pm->ajp", flat, phases, optimize=True))


def covariance_diagnostic(samples, pairs, kind: str = "gff",
                          coupling: float = 1.0,
                          components=None) -> CovarianceReport:
    """Empirical two-point function against the truncated series.

    samples: list of SpectralConnection (>= 1000 for meaningful errors);
    pairs: list of (x, y) point pairs; components: list of (a, j, b, k)
    component picks, defaulting to ((0, 0, 0, 0),).  kind 'gff' compares
    against the plain truncated Green's function (diagonal in components);
    'u1_coulomb' against its transverse projection.
    """
    samples = list(samples)
    if len(samples) < 1000:
        raise ValueError("need at least 1000 samples for the diagnostic")
    cutoff = samples[0].cutoff
    if components is None:
        components = ((0, 0, 0, 0),)
    points = []
    for x, y in pairs:
        points.append(np.asarray(x, dtype=float))
        points.append(np.asarray(y, dtype=float))
    points = np.stack(points)
    prods = []
    for s in samples:
        vals = _evaluate_at_points(s, points)
        row = []
        for ip in range(len(pairs)):
            for (a, j, b, k) in components:
                row.append(vals[a, j, 2 * ip] * vals[b, k, 2 * ip + 1])
        prods.append(row)
    prods = np.asarray(prods)
    emp = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(len(samples))
    pred = []
    for ip, (x, y) in enumerate(pairs):
        delta = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        for (a, j, b, k) in components:
            if kind == "gff":
                val = _truncated_green(cutoff, delta) if (a == b and j == k) else 0.0
            elif kind == "u1_coulomb":
                val = _transverse_green(cutoff, delta, j, k, coupling)
            else:
                raise ValueError(f"unknown ensemble kind {kind!r}")
            pred.append(val)
    pred = np.asarray(pred)
    sigma_dev = np.abs(emp - pred) / np.where(se > 0, se, 1e-300)
    return CovarianceReport(list(pairs), pred, emp, se, float(sigma_dev.max()))
