"""Biorthogonal eigenframes and complex geometric phases on closed loops.

For a non-Hermitian two-level Hamiltonian the left and right eigenvectors
are not related by conjugation, and the geometric phase accumulated on a
closed parameter loop is complex.  It is computed here as a discrete
biorthogonal Wilson loop: per-step overlaps of the tracked left and right
frames, with the forward and backward logarithms averaged.  The averaged
form is gauge invariant, second-order accurate in the step size, and for
Hermitian loops its imaginary part cancels identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import ModelSpec, PresetTemplate, bloch_decompose, bloch_vector_at


class DefectivePointError(ValueError):
    """The matrix has a doubly degenerate eigenvalue with one eigenvector."""


class NearEPError(ValueError):
    """Left/right overlap too small to biorthonormalize reliably."""


class EPOnPathError(RuntimeError):
    """The loop passes through (or too close to) an exceptional point."""


@dataclass(eq=False)
class EigensystemInstant:
    """Instantaneous eigensystem with band-major storage.

    ``right[b]`` is the right eigenvector of band ``b`` and ``left[b]``
    the left row vector (``left[b] @ H = eps[b] * left[b]``); the
    biorthogonal pairing is the plain dot product ``left[b] @ right[b]``
    with no conjugation.  Bands are ordered by descending (Re, Im)
    eigenvalue.
    """

    eigenvalues: np.ndarray  # (2,) complex
    right: np.ndarray        # (2, 2) rows = bands
    left: np.ndarray         # (2, 2) rows = bands
    biorthonormal: bool
    gap: float


@dataclass(eq=False)
class BerryPhaseResult:
    """Complex geometric phase per band for one closed loop."""

    theta: np.ndarray             # (2,) complex, band-major
    steps: int
    degeneracy_flags: tuple       # loop positions s with gap < tolerance
    half_solid_angle: float | None
    richardson: bool
    step_delta: float | None      # max band |theta(2n) - theta(n)|
    certified: bool               # False if EP steps were skipped or bands swapped


_DEFECT_REL_TOL = 1e-10


def _raw_eigenframes(d0, d):
    """Closed-form eigensystem for a batch of Bloch vectors.

    Eigenvalues are ``d0 +/- sqrt(d.d)`` (principal branch, so the first
    band has the descending-(Re, Im) eigenvalue).  Eigenvectors come from
    the adjugate columns of ``H - eps I``; the larger-norm column is
    selected per point for stability.  Left rows are the transpose-system
    eigenvectors (``dy -> -dy``).
    """
    d = np.asarray(d, dtype=complex)
    single = d.ndim == 1
    if single:
        d = d[None, :]
    n = d.shape[0]
    d0_arr = np.broadcast_to(np.asarray(d0, dtype=complex), (n,))
    dd = np.einsum("nk,nk->n", d, d)
    mu = np.sqrt(dd)
    dnorm = np.linalg.norm(np.abs(d), axis=1)
    defective = (np.abs(mu) < _DEFECT_REL_TOL * dnorm) & (dnorm > 0)
    eps = np.stack([d0_arr + mu, d0_arr - mu], axis=1)
    gap = np.abs(2.0 * mu)
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    right = np.empty((n, 2, 2), dtype=complex)
    left = np.empty((n, 2, 2), dtype=complex)
    for b, s in enumerate((1.0, -1.0)):
        smu = s * mu
        c1 = np.stack([dz + smu, dx + 1.0j * dy], axis=-1)
        c2 = np.stack([dx - 1.0j * dy, smu - dz], axis=-1)
        use2 = np.einsum("nc,nc->n", np.abs(c2), np.abs(c2)) > np.einsum(
            "nc,nc->n", np.abs(c1), np.abs(c1)
        )
        right[:, b] = np.where(use2[:, None], c2, c1)
        l1 = np.stack([dz + smu, dx - 1.0j * dy], axis=-1)
        l2 = np.stack([dx + 1.0j * dy, smu - dz], axis=-1)
        use2 = np.einsum("nc,nc->n", np.abs(l2), np.abs(l2)) > np.einsum(
            "nc,nc->n", np.abs(l1), np.abs(l1)
        )
        left[:, b] = np.where(use2[:, None], l2, l1)
    return eps, right, left, gap, defective


def _canonical_gauge(right, left):
    """Deterministic per-point gauge: unit-norm right with its dominant
    component rotated real-positive, left rescaled to unit pairing.

    The dominant component prefers index 0 unless index 1 is larger by a
    relative margin, so near-ties cannot flip the choice between
    neighbouring loop points.  Returns the pairing overlaps before the
    final left rescaling, for near-EP detection.
    """
    rnorm = np.linalg.norm(right, axis=-1, keepdims=True)
    lnorm = np.linalg.norm(left, axis=-1, keepdims=True)
    if np.any(rnorm == 0) or np.any(lnorm == 0):
        raise DefectivePointError("zero eigenvector encountered")
    right = right / rnorm
    left = left / lnorm
    use1 = np.abs(right[..., 1]) > np.abs(right[..., 0]) * (1.0 + 1e-9)
    pick = np.where(use1, right[..., 1], right[..., 0])
    right = right * (np.abs(pick) / pick)[..., None]
    raw_overlap = np.einsum("...bc,...bc->...b", left, right)
    return right, left, raw_overlap


def instantaneous_eigensystem(H) -> EigensystemInstant:
    """Eigenvalues and unit-norm left/right eigenvectors of a 2x2 matrix.

    Raises :class:`DefectivePointError` when ``d.d`` vanishes for a
    nonzero Bloch vector: the matrix then has a single eigenvector and no
    biorthogonal pair exists.
    """
    dec = bloch_decompose(H)
    eps, right, left, gap, defective = _raw_eigenframes(dec.d0, dec.d)
    if defective[0]:
        raise DefectivePointError(
            "defective point: d.d = 0 with nonzero Bloch vector (single eigenvector)"
        )
    right, left, _ = _canonical_gauge(right, left)
    return EigensystemInstant(
        eigenvalues=eps[0],
        right=right[0],
        left=left[0],
        biorthonormal=False,
        gap=float(gap[0]),
    )


def biorthonormalize(e: EigensystemInstant, overlap_tol: float = 1e-8) -> EigensystemInstant:
    """Rescale left vectors so ``left[b] @ right[b] = 1``.

    Raises :class:`NearEPError` when a pairing overlap of the unit-norm
    frames falls below ``overlap_tol`` (coalescing eigenvectors).
    """
    ov = np.einsum("bc,bc->b", e.left, e.right)
    if np.any(np.abs(ov) < overlap_tol):
        raise NearEPError(
            f"left/right overlap {np.min(np.abs(ov)):.3e} below {overlap_tol:.1e}"
        )
    return EigensystemInstant(
        eigenvalues=e.eigenvalues,
        right=e.right,
        left=e.left / ov[:, None],
        biorthonormal=True,
        gap=e.gap,
    )


def wilson_loop_phase(right, left, overlap_tol: float = 1e-8, on_ep: str = "raise"):
    """Complex phase of the discrete biorthogonal Wilson loop.

    ``right[k, b]`` / ``left[k, b]`` are the band-``b`` frames at loop
    point ``k`` (the loop closes from the last point back to the first).
    Frames are re-canonicalized internally, so the result is invariant
    under independent per-point rescalings.  Bands are tracked around the
    loop by maximal overlap; each step contributes the average of the
    forward and backward principal logarithms, which keeps Hermitian
    loops exactly real and converges at second order.

    Returns ``(theta, closed, min_overlap, skipped)`` where ``closed`` is
    False if band identities swap over the loop and ``skipped`` counts
    steps dropped in ``on_ep='flag'`` mode.
    """
    right = np.asarray(right, dtype=complex)
    left = np.asarray(left, dtype=complex)
    if right.ndim != 3 or right.shape[1:] != (2, 2) or right.shape != left.shape:
        raise ValueError("expected frames of shape (n, 2, 2)")
    n = right.shape[0]
    if n < 3:
        raise ValueError("need at least 3 loop points")
    right, left, raw_ov = _canonical_gauge(right, left)
    bad = np.abs(raw_ov) < overlap_tol
    if np.any(bad):
        if on_ep == "raise":
            raise EPOnPathError(
                f"biorthogonal overlap below {overlap_tol:.1e} at "
                f"{int(np.sum(np.any(bad, axis=-1)))} loop points"
            )
        raw_ov = np.where(bad, 1.0, raw_ov)
    left = left / raw_ov[..., None]

    of = np.einsum("kac,kbc->kab", left, np.roll(right, -1, axis=0))
    ob = np.einsum("kac,kbc->kab", np.roll(left, -1, axis=0), right)
    swap = np.abs(of[:, 0, 0] * of[:, 1, 1]) < np.abs(of[:, 0, 1] * of[:, 1, 0])
    par = np.zeros(n + 1, dtype=int)
    par[1:] = np.cumsum(swap.astype(int)) % 2
    closed = par[n] == 0
    ks = np.arange(n)
    theta = np.empty(2, dtype=complex)
    min_overlap = np.inf
    skipped = int(np.sum(bad))
    for band in (0, 1):
        ia = par[:n] ^ band
        ja = par[1:] ^ band
        o_fwd = of[ks, ia, ja]
        o_bwd = ob[ks, ja, ia]
        step_min = min(np.min(np.abs(o_fwd)), np.min(np.abs(o_bwd)))
        min_overlap = min(min_overlap, float(step_min))
        weak = (np.abs(o_fwd) < overlap_tol) | (np.abs(o_bwd) < overlap_tol)
        if np.any(weak):
            if on_ep == "raise":
                raise EPOnPathError(
                    f"step overlap below {overlap_tol:.1e}: phase undefined through an EP"
                )
            o_fwd = np.where(weak, 1.0, o_fwd)
            o_bwd = np.where(weak, 1.0, o_bwd)
            skipped += int(np.sum(weak))
        theta[band] = 0.5j * (np.sum(np.log(o_fwd)) - np.sum(np.log(o_bwd)))
    return theta, bool(closed), min_overlap, skipped


def _principal_theta(theta: complex, band: int) -> complex:
    """Reduce ``Re theta`` to the principal interval ``(-pi, pi]``.

    The phase is defined modulo 2*pi; this picks a deterministic
    representative.  On the ``+/-pi`` plateau the raw windings of the two
    bands land on the same edge, so the edge sign is resolved by the sign
    of the imaginary part (band order as final tie-break), which keeps
    the two bands on opposite representatives.
    """
    re = theta.real - 2.0 * math.pi * math.floor((theta.real + math.pi) / (2.0 * math.pi))
    if re <= -math.pi + 1e-9:
        take_plus = theta.imag > 1e-12 or (abs(theta.imag) <= 1e-12 and band == 0)
        if take_plus:
            re += 2.0 * math.pi
    return complex(re, theta.imag)


def _loop_frames(model: ModelSpec, steps: int, overlap_tol: float, on_ep: str):
    T = model.period
    s = np.arange(steps) * (T / steps)
    d = bloch_vector_at(model, s)
    eps, right, left, gap, defective = _raw_eigenframes(np.zeros(steps), d)
    if np.any(defective):
        if on_ep == "raise":
            raise EPOnPathError(
                f"loop passes through a defective point at s = "
                f"{float(s[np.argmax(defective)]):.6g}"
            )
    return s, d, eps, right, left, gap


def berry_phase_loop(
    model: ModelSpec,
    steps: int = 8192,
    richardson: bool = True,
    on_ep: str = "raise",
    gap_tol: float = 1e-6,
    overlap_tol: float = 1e-8,
) -> BerryPhaseResult:
    """Complex geometric phase of the cyclic model over one period.

    The loop parameter is ``s in [0, T)`` sampled at ``steps`` uniform
    points.  With ``richardson=True`` the loop is recomputed at doubled
    resolution and the two values extrapolated, removing the leading
    second-order discretization error; the step-doubling difference is
    reported as a convergence certificate.

    For a Hermitian loop (real Bloch vector throughout) the half solid
    angle subtended by the normalized Bloch path is attached for
    reference; the phase equals it modulo 2*pi up to discretization
    error.
    """
    if steps < 256:
        raise ValueError("steps must be >= 256")
    if on_ep not in ("raise", "flag"):
        raise ValueError("on_ep must be 'raise' or 'flag'")

    s, d, eps, right, left, gap = _loop_frames(model, steps, overlap_tol, on_ep)
    theta1, closed1, min_ov1, skipped1 = wilson_loop_phase(
        right, left, overlap_tol=overlap_tol, on_ep=on_ep
    )
    flags = tuple(float(v) for v in s[gap < gap_tol])

    step_delta = None
    theta = theta1
    closed = closed1
    skipped = skipped1
    if richardson:
        _, _, _, right2, left2, _ = _loop_frames(model, 2 * steps, overlap_tol, on_ep)
        theta2, closed2, _, skipped2 = wilson_loop_phase(
            right2, left2, overlap_tol=overlap_tol, on_ep=on_ep
        )
        step_delta = float(np.max(np.abs(theta2 - theta1)))
        theta = (4.0 * theta2 - theta1) / 3.0
        closed = closed1 and closed2
        skipped += skipped2

    hsa = None
    if float(np.max(np.abs(d.imag))) <= 1e-12 * max(float(np.max(np.abs(d))), 1e-300):
        hsa = half_solid_angle(d.real)

    if skipped > max(2, 0.01 * steps):
        # the loop sits essentially on an exceptional point: with a
        # significant fraction of the overlaps dropped, no meaningful
        # phase remains
        theta = np.full(2, complex(np.nan, np.nan))
        step_delta = None
    else:
        theta = np.array([_principal_theta(complex(theta[b]), b) for b in (0, 1)])
    return BerryPhaseResult(
        theta=theta,
        steps=steps,
        degeneracy_flags=flags,
        half_solid_angle=hsa,
        richardson=richardson,
        step_delta=step_delta,
        certified=bool(closed and skipped == 0 and not flags),
    )


def _solid_angle_pivot(u: np.ndarray) -> np.ndarray:
    """Interior pivot for the spherical fan triangulation.

    The signed-area normal (sum of consecutive cross products) points
    into the region enclosed by the oriented loop, which keeps the fan
    sum on the branch where the enclosed area is reported directly.
    Falls back to the centroid, then to fixed candidates, rejecting any
    pivot that is antipodal to a loop point.
    """
    candidates = []
    cross_sum = np.cross(u, np.roll(u, -1, axis=0)).sum(axis=0)
    if np.linalg.norm(cross_sum) > 1e-9:
        candidates.append(cross_sum / np.linalg.norm(cross_sum))
    centroid = u.mean(axis=0)
    if np.linalg.norm(centroid) > 1e-9:
        candidates.append(centroid / np.linalg.norm(centroid))
    candidates.append(u[0])
    candidates.extend(np.eye(3))
    for p in candidates:
        if np.min(1.0 + u @ p) > 1e-9:
            return p
    raise ValueError("could not find a pivot non-antipodal to the loop")


def half_solid_angle(loop) -> float:
    """Half the solid angle subtended by a closed loop of vectors.

    The loop is normalized to the unit sphere and fan-triangulated from
    an interior pivot; each spherical triangle contributes its signed
    excess via the triple-product formula.  The result is half the area
    of the region enclosed to the left of the traversal (e.g. pi for a
    counter-clockwise equator, pi*(1-cos(t0)) for a circle at polar
    angle t0 traversed counter-clockwise seen from its pole).
    Consecutive antipodal points make the geodesic ambiguous and raise
    ``ValueError``.
    """
    p = np.asarray(loop, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 3:
        raise ValueError("loop must be an (n, 3) array with n >= 3")
    norms = np.linalg.norm(p, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0):
        raise ValueError("loop vectors must be finite and nonzero")
    u = p / norms[:, None]
    if np.allclose(u[0], u[-1], rtol=0.0, atol=1e-15):
        u = u[:-1]
    if u.shape[0] < 3:
        raise ValueError("loop must contain at least 3 distinct points")
    dots = np.einsum("ij,ij->i", u, np.roll(u, -1, axis=0))
    if np.any(dots < -1.0 + 1e-12):
        raise ValueError("consecutive antipodal points: geodesic is ambiguous")
    a = _solid_angle_pivot(u)
    b = u
    c = np.roll(u, -1, axis=0)
    dets = np.einsum("j,ij->i", a, np.cross(b, c))
    denoms = 1.0 + b @ a + np.einsum("ij,ij->i", b, c) + c @ a
    omega = float(np.sum(2.0 * np.arctan2(dets, denoms)))
    return 0.5 * omega


class SpectralRegion(Enum):
    ALL_REAL = "AllReal"
    SOME_COMPLEX = "SomeComplex"
    ALL_IMAGINARY_WINDOW = "AllImaginaryWindow"
    MIXED = "Mixed"


@dataclass(eq=False)
class RegionThreshold:
    gamma: float
    below: str
    above: str


@dataclass(eq=False)
class SpectrumRegionScan:
    """Per-gamma classification of the instantaneous spectrum.

    ``AllReal``: eigenvalues real at every sampled loop position.
    ``SomeComplex``: nonreal on part of the loop only (the alternating
    regime; for the presets the nonreal values are purely imaginary).
    ``AllImaginaryWindow``: purely imaginary pair over the whole loop.
    ``Mixed``: genuinely complex eigenvalues (nonzero real and imaginary
    parts) somewhere on the loop.
    """

    gammas: np.ndarray
    classifications: tuple
    thresholds: tuple
    samples: int


def classify_instantaneous(model: ModelSpec, samples: int = 256, tol: float = 1e-10):
    """Classify the instantaneous eigenvalue pair over one loop."""
    s = np.arange(samples) * (model.period / samples)
    d = bloch_vector_at(model, s)
    mu = np.sqrt(np.einsum("nk,nk->n", d, d))
    is_real = np.abs(mu.imag) < tol
    is_imag = (np.abs(mu.real) < tol) & ~is_real
    is_cplx = ~is_real & ~is_imag
    if np.any(is_cplx):
        return SpectralRegion.MIXED
    if not np.any(is_imag):
        return SpectralRegion.ALL_REAL
    if not np.any(is_real):
        return SpectralRegion.ALL_IMAGINARY_WINDOW
    return SpectralRegion.SOME_COMPLEX


def spectrum_region_scan(
    template: PresetTemplate,
    gammas,
    samples: int = 256,
    omega: float = 1.0,
    bisect_tol: float = 1e-6,
) -> SpectrumRegionScan:
    """Classify the instantaneous spectrum across a gamma range.

    Classification boundaries between consecutive grid points are
    refined by bisection to ``bisect_tol``.
    """
    if samples < 64:
        raise ValueError("samples must be >= 64")
    gammas = np.asarray(gammas, dtype=float)
    if gammas.ndim != 1 or gammas.size < 2:
        raise ValueError("gammas must be a 1-d array with at least 2 values")

    def classify(g):
        return classify_instantaneous(template.instantiate(g, omega), samples)

    classes = [classify(g) for g in gammas]
    thresholds = []
    for i in range(len(gammas) - 1):
        if classes[i] is classes[i + 1]:
            continue
        lo, hi = float(gammas[i]), float(gammas[i + 1])
        cls_lo = classes[i]
        while hi - lo > bisect_tol:
            mid = 0.5 * (lo + hi)
            # any departure from the left class marks the boundary; exactly
            # at a degeneracy rounding can produce an eps-wide stray class
            if classify(mid) is cls_lo:
                lo = mid
            else:
                hi = mid
        thresholds.append(
            RegionThreshold(
                gamma=0.5 * (lo + hi), below=cls_lo.value, above=classes[i + 1].value
            )
        )
    return SpectrumRegionScan(
        gammas=gammas,
        classifications=tuple(c.value for c in classes),
        thresholds=tuple(thresholds),
        samples=samples,
    )
