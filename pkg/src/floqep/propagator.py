"""Closed-form piecewise propagation and one-period monodromy analysis.

The one-period propagator ``G(T)`` of a traceless two-level Hamiltonian is
unimodular, so its half-trace ``c = tr G / 2`` fixes the quasienergy pair
``+/- eps_F`` through ``c = cos(eps_F T)``.  Real ``eps_F`` (|c| <= 1)
means bounded, stable dynamics; a complex pair means exponential growth.
Roots of ``|c| = 1`` are degeneracies: exceptional points when ``G`` keeps
only one eigenvector, diabolic points when ``G`` is proportional to the
identity.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    ModelSpec,
    Waveform,
    SMOOTH_WAVEFORMS,
    bloch_decompose,
    bloch_vector_at,
)

# below this |mu*tau| the cos/sinc factors switch to 5-term Taylor series,
# which keeps the defective (mu -> 0) limit exact to machine precision
SMALL_PHASE = 1e-4

DEFAULT_STEPS_PER_PERIOD = 200_000


class NumericalError(RuntimeError):
    """Non-finite value produced during propagation."""


class EPKind(Enum):
    EP = "EP"
    DIABOLIC = "Diabolic"
    NONE = "None"


@dataclass(eq=False)
class SegmentSequence:
    """Equal-length constant-Hamiltonian segments spanning one period.

    ``ds[l]`` is the Bloch vector of segment ``l`` (0-indexed; segment 0
    is applied first).  A square-family model with largest harmonic
    ``beta`` yields ``4*beta`` segments of duration ``T/(4*beta)``.
    """

    ds: np.ndarray          # (n, 3) complex
    durations: np.ndarray   # (n,) float
    total: float

    def __len__(self) -> int:
        return len(self.durations)

    def hamiltonian(self, index: int) -> np.ndarray:
        from .model import matrix_from_bloch_vector

        return matrix_from_bloch_vector(self.ds[index])


@dataclass(eq=False)
class MonodromyResult:
    """One-period propagator and the quantities derived from its trace.

    ``defectiveness`` is ``||G - c*I||_F``: zero for a diabolic
    degeneracy (G proportional to the identity), order gamma at an
    exceptional point.
    """

    G: np.ndarray
    half_trace: complex
    eps_F: complex
    n_F: np.ndarray
    max_im_eps: float
    defectiveness: float


def _expm_pauli_elements(dx, dy, dz, tau):
    """Entries of ``exp(-i tau d.sigma)`` for a traceless Bloch vector.

    Closed form ``cos(mu tau) I - i tau sinc(mu tau) (d.sigma)`` with
    ``mu = sqrt(d.d)`` on the principal branch.  Returns the four matrix
    entries as Python complex scalars (row-major).
    """
    dd = dx * dx + dy * dy + dz * dz
    mu = cmath.sqrt(dd)
    z = mu * tau
    if abs(z) < SMALL_PHASE:
        z2 = z * z
        cosz = 1.0 + z2 * (-1.0 / 2.0 + z2 * (1.0 / 24.0 + z2 * (-1.0 / 720.0 + z2 / 40320.0)))
        sinc = 1.0 + z2 * (-1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 * (-1.0 / 5040.0 + z2 / 362880.0)))
    else:
        cosz = cmath.cos(z)
        sinc = cmath.sin(z) / z
    a = -1.0j * tau * sinc
    return (
        cosz + a * dz,
        a * (dx - 1.0j * dy),
        a * (dx + 1.0j * dy),
        cosz - a * dz,
    )


def expm_two_level(H, tau: float) -> np.ndarray:
    """``exp(-i tau H)`` for a 2x2 complex matrix, in closed form.

    Exact for any complex Bloch vector, including the defective
    ``d.d = 0`` case where the result degenerates to ``I - i tau (d.sigma)``.
    """
    H = np.asarray(H, dtype=complex)
    if not (np.all(np.isfinite(H.view(float))) and math.isfinite(tau)):
        raise ValueError("H and tau must be finite")
    dec = bloch_decompose(H)
    e00, e01, e10, e11 = _expm_pauli_elements(
        complex(dec.d[0]), complex(dec.d[1]), complex(dec.d[2]), tau
    )
    out = np.array([[e00, e01], [e10, e11]], dtype=complex)
    if dec.d0 != 0:
        out *= cmath.exp(-1.0j * dec.d0 * tau)
    return out


def segment_hamiltonians(model: ModelSpec) -> SegmentSequence:
    """Split a square-family model into its constant segments.

    The segment count is four times the least common multiple of the
    drive harmonics (= ``4*beta`` for the presets), which puts every sign
    flip of every square wave exactly on a segment boundary.  Each
    segment Hamiltonian is the model evaluated at the segment midpoint.
    """
    mults = []
    for term in model.terms:
        if term.waveform in SMOOTH_WAVEFORMS:
            raise ValueError(
                "segment decomposition needs a square-family model; "
                f"term {term.axis.name} uses {term.waveform.value}"
            )
        if term.waveform is not Waveform.CONSTANT:
            mults.append(term.multiplier)
    n_seg = 4 * math.lcm(*mults) if mults else 4
    tau = model.period / n_seg
    mids = (np.arange(n_seg) + 0.5) * tau
    ds = bloch_vector_at(model, mids)
    return SegmentSequence(
        ds=ds,
        durations=np.full(n_seg, tau),
        total=model.period,
    )


def quasienergy_from_trace(c: complex, T: float) -> complex:
    """Quasienergy ``eps_F = arccos(c)/T`` on the principal branch.

    ``Re eps_F`` lies in ``[0, pi/T]``; the sign of the imaginary part is
    fixed >= 0 (the spectrum is the pair ``+/- eps_F``).
    """
    if not T > 0:
        raise ValueError("T must be positive")
    w = np.arccos(complex(c))
    if w.imag < -1e-10:
        # flip to the Im >= 0 representative of cos(w) = c, staying in
        # the Re in [0, pi] strip (for real c this is exact); noise-level
        # negative imaginary parts are kept to avoid distorting Re w
        w = -w if w.real <= math.pi / 2.0 else 2.0 * math.pi - w
    return complex(w) / T


def _segment_product(segments: SegmentSequence):
    """Ordered product of segment exponentials; segment 0 applied first."""
    g00, g01, g10, g11 = 1.0 + 0.0j, 0.0j, 0.0j, 1.0 + 0.0j
    for idx in range(len(segments)):
        dx, dy, dz = (
            complex(segments.ds[idx, 0]),
            complex(segments.ds[idx, 1]),
            complex(segments.ds[idx, 2]),
        )
        tau = float(segments.durations[idx])
        e00, e01, e10, e11 = _expm_pauli_elements(dx, dy, dz, tau)
        # left-multiply: G <- E G
        g00, g01, g10, g11 = (
            e00 * g00 + e01 * g10,
            e00 * g01 + e01 * g11,
            e10 * g00 + e11 * g10,
            e10 * g01 + e11 * g11,
        )
        if not (
            math.isfinite(g00.real) and math.isfinite(g00.imag)
            and math.isfinite(g11.real) and math.isfinite(g11.imag)
            and math.isfinite(g01.real) and math.isfinite(g01.imag)
            and math.isfinite(g10.real) and math.isfinite(g10.imag)
        ):
            raise NumericalError(f"non-finite propagator after segment {idx + 1}")
    return g00, g01, g10, g11


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """Product ``mats[-1] @ ... @ mats[0]`` by deterministic pairwise tree."""
    while mats.shape[0] > 1:
        n = mats.shape[0]
        even = n - (n % 2)
        paired = np.matmul(mats[1:even:2], mats[0:even:2])
        if n % 2:
            mats = np.concatenate([paired, mats[-1:]], axis=0)
        else:
            mats = paired
    return mats[0]


def _rk4_transfer(a_start, a_mid, a_end, h):
    """Per-step RK4 transfer matrices for ``G' = A(t) G`` (batched)."""
    eye = np.eye(2, dtype=complex)
    k1 = a_start
    k2 = a_mid + (0.5 * h) * np.matmul(a_mid, k1)
    k3 = a_mid + (0.5 * h) * np.matmul(a_mid, k2)
    k4 = a_end + h * np.matmul(a_end, k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate_monodromy(model: ModelSpec, steps_per_period: int) -> np.ndarray:
    """Fixed-step RK4 solution of ``G' = -i H(t) G`` over one period.

    Square-family models are integrated segment by segment so the jump
    discontinuities always coincide with step boundaries; the constant
    per-segment step matrix is raised to the step count by binary
    powering.  The composition order is a fixed pairwise tree, making the
    result bitwise reproducible.
    """
    if steps_per_period < 4:
        raise ValueError("steps_per_period must be >= 4")
    T = model.period
    if model.is_square_family:
        segments = segment_hamiltonians(model)
        n_seg = len(segments)
        m = int(math.ceil(steps_per_period / n_seg))
        g = np.eye(2, dtype=complex)
        from .model import matrix_from_bloch_vector

        for idx in range(n_seg):
            tau = float(segments.durations[idx])
            h = tau / m
            a = -1.0j * matrix_from_bloch_vector(segments.ds[idx])
            step = _rk4_transfer(a, a, a, h)
            g = np.linalg.matrix_power(step, m) @ g
        return g
    n = int(steps_per_period)
    h = T / n
    edges = np.arange(n + 1) * h
    mids = (np.arange(n) + 0.5) * h
    from .model import matrix_from_bloch_vector  # noqa: F401  (vectorized below)

    d_edges = bloch_vector_at(model, edges)
    d_mids = bloch_vector_at(model, mids)

    def as_matrices(d):
        out = np.empty(d.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0, 0] = d[..., 2]
        out[..., 0, 1] = d[..., 0] - 1.0j * d[..., 1]
        out[..., 1, 0] = d[..., 0] + 1.0j * d[..., 1]
        out[..., 1, 1] = -d[..., 2]
        return -1.0j * out

    a_edges = as_matrices(d_edges)
    a_mids = as_matrices(d_mids)
    steps = _rk4_transfer(a_edges[:-1], a_mids, a_edges[1:], h)
    return _ordered_product(steps)


def _result_from_G(G: np.ndarray, T: float) -> MonodromyResult:
    if not np.all(np.isfinite(G.view(float))):
        raise NumericalError("non-finite monodromy matrix")
    c = complex(0.5 * (G[0, 0] + G[1, 1]))
    eps = quasienergy_from_trace(c, T)
    defect = float(np.linalg.norm(G - c * np.eye(2), "fro"))
    sin_w = cmath.sin(eps * T)
    if abs(sin_w) > 1e-14:
        gv = bloch_decompose(G).d
        n_F = (1.0j / sin_w) * gv
    else:
        # degenerate propagator: rotation axis undefined
        n_F = np.zeros(3, dtype=complex)
    return MonodromyResult(
        G=G,
        half_trace=c,
        eps_F=eps,
        n_F=n_F,
        max_im_eps=abs(eps.imag),
        defectiveness=defect,
    )


def monodromy(
    model: ModelSpec,
    engine: str = "piecewise",
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
) -> MonodromyResult:
    """One-period propagator of the model.

    ``engine='piecewise'`` multiplies the closed-form segment
    exponentials of a square-family model.  ``engine='integrate'`` runs
    the fixed-step RK4 integrator (the oracle route, valid for any
    family).
    """
    if engine == "piecewise":
        segments = segment_hamiltonians(model)
        g00, g01, g10, g11 = _segment_product(segments)
        G = np.array([[g00, g01], [g10, g11]], dtype=complex)
    elif engine == "integrate":
        G = _integrate_monodromy(model, steps_per_period)
    else:
        raise ValueError(f"unknown engine {engine!r} (use 'piecewise' or 'integrate')")
    return _result_from_G(G, model.period)


def ep_indicator(
    result: MonodromyResult,
    im_tol: float = 1e-9,
    defect_tol: float = 1e-6,
    root_tol: float = 1e-6,
) -> tuple[float, EPKind]:
    """Signed degeneracy indicator and its classification.

    ``f = |Re c| - 1`` while the half-trace is numerically real (negative
    in the stable phase, positive in the broken phase), else ``f = |Im c|``
    deep in the broken phase.  At a root ``|f| <= root_tol`` the point is
    an exceptional point when the propagator retains a nilpotent part
    (``defectiveness > defect_tol``), diabolic otherwise.
    """
    c = result.half_trace
    if abs(c.imag) < im_tol:
        f = abs(c.real) - 1.0
    else:
        f = abs(c.imag)
    if abs(f) <= root_tol:
        kind = EPKind.EP if result.defectiveness > defect_tol else EPKind.DIABOLIC
    else:
        kind = EPKind.NONE
    return f, kind
