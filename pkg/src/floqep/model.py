"""Two-level drive models: Pauli algebra, Bloch decomposition, and presets.

All 2x2 operators are plain ``numpy`` arrays of ``complex128``.  A matrix
``M`` is handled through its Bloch decomposition ``M = d0*I + d . sigma``
with a complex 3-vector ``d``; the real part of ``d`` is the Hermitian
(oscillatory) content and the imaginary part the anti-Hermitian
(gain-loss) content.  Energies are dimensionless, with the static
coupling ``J`` setting the scale (all presets default to ``J = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


class Axis(Enum):
    X = 0
    Y = 1
    Z = 2


class Waveform(Enum):
    CONSTANT = "constant"
    COS = "cos"
    SIN = "sin"
    SQUARE_COS = "square-cos"
    SQUARE_SIN = "square-sin"


class Hermiticity(Enum):
    HERMITIAN = "hermitian"
    ANTI_HERMITIAN = "anti-hermitian"


SMOOTH_WAVEFORMS = frozenset({Waveform.COS, Waveform.SIN})
SQUARE_WAVEFORMS = frozenset({Waveform.SQUARE_COS, Waveform.SQUARE_SIN})


@dataclass(frozen=True)
class DriveTerm:
    """One additive term ``amplitude * waveform(multiplier*omega*t) * P``.

    ``P`` is the Pauli matrix of ``axis`` for a Hermitian term and
    ``1j`` times it for an anti-Hermitian term.  ``multiplier`` is the
    integer harmonic of the model's base frequency.
    """

    axis: Axis
    amplitude: float
    waveform: Waveform = Waveform.CONSTANT
    multiplier: int = 1
    hermiticity: Hermiticity = Hermiticity.HERMITIAN

    def __post_init__(self):
        if not math.isfinite(self.amplitude):
            raise ValueError("drive amplitude must be finite")
        if not isinstance(self.multiplier, int) or isinstance(self.multiplier, bool):
            raise ValueError("harmonic multiplier must be an integer")
        if self.multiplier < 1:
            raise ValueError("harmonic multiplier must be >= 1")


@dataclass(frozen=True)
class ModelSpec:
    """A time-periodic two-level Hamiltonian as a sum of drive terms.

    The period is ``T = 2*pi/base_omega``; every term is an integer
    harmonic of ``base_omega`` so ``H(t + T) = H(t)``.  All models built
    from :class:`DriveTerm` are traceless by construction.
    """

    terms: tuple[DriveTerm, ...]
    base_omega: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not (math.isfinite(self.base_omega) and self.base_omega > 0):
            raise ValueError("base_omega must be positive and finite")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.base_omega

    @property
    def max_multiplier(self) -> int:
        mults = [t.multiplier for t in self.terms if t.waveform is not Waveform.CONSTANT]
        return max(mults, default=1)

    @property
    def is_square_family(self) -> bool:
        return all(
            t.waveform is Waveform.CONSTANT or t.waveform in SQUARE_WAVEFORMS
            for t in self.terms
        )

    @property
    def is_smooth_family(self) -> bool:
        return all(
            t.waveform is Waveform.CONSTANT or t.waveform in SMOOTH_WAVEFORMS
            for t in self.terms
        )


@dataclass(frozen=True, eq=False)
class BlochDecomposition:
    """Coefficients of ``M = d0*I + d[0]*X + d[1]*Y + d[2]*Z``."""

    d0: complex
    d: np.ndarray  # shape (3,), complex


def bloch_decompose(matrix) -> BlochDecomposition:
    """Project a 2x2 matrix onto the identity and Pauli basis.

    Returns ``d0 = tr(M)/2`` and ``d_k = tr(sigma_k M)/2``.  The real and
    imaginary parts of ``d`` separate the Hermitian and anti-Hermitian
    drive vectors of a traceless Hamiltonian.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    d0 = 0.5 * (m[0, 0] + m[1, 1])
    d = np.array(
        [
            0.5 * (m[0, 1] + m[1, 0]),
            0.5j * (m[0, 1] - m[1, 0]),
            0.5 * (m[0, 0] - m[1, 1]),
        ],
        dtype=complex,
    )
    return BlochDecomposition(d0=complex(d0), d=d)


def bloch_recompose(dec: BlochDecomposition) -> np.ndarray:
    """Rebuild the 2x2 matrix from its Bloch coefficients."""
    dx, dy, dz = dec.d
    return np.array(
        [
            [dec.d0 + dz, dx - 1.0j * dy],
            [dx + 1.0j * dy, dec.d0 - dz],
        ],
        dtype=complex,
    )


def matrix_from_bloch_vector(d) -> np.ndarray:
    """2x2 matrix ``d . sigma`` for a complex 3-vector ``d`` (traceless)."""
    dx, dy, dz = d
    return np.array(
        [[dz, dx - 1.0j * dy], [dx + 1.0j * dy, -dz]],
        dtype=complex,
    )


def _waveform_values(waveform: Waveform, theta):
    """Evaluate a waveform at phase ``theta`` (scalar or array).

    Square waves are the sign of the underlying sinusoid; exactly at a
    zero crossing the right-limit value is used.
    """
    if waveform is Waveform.CONSTANT:
        return np.ones_like(np.asarray(theta, dtype=float))
    if waveform is Waveform.COS:
        return np.cos(theta)
    if waveform is Waveform.SIN:
        return np.sin(theta)
    if waveform is Waveform.SQUARE_COS:
        s = np.sign(np.cos(theta))
        # right-limit at a crossing: cos leaves through the sign of -sin
        return np.where(s == 0.0, -np.sign(np.sin(theta)), s)
    if waveform is Waveform.SQUARE_SIN:
        s = np.sign(np.sin(theta))
        return np.where(s == 0.0, np.sign(np.cos(theta)), s)
    raise ValueError(f"unknown waveform {waveform!r}")


def bloch_vector_at(model: ModelSpec, t):
    """Complex Bloch vector ``d(t)`` of the model Hamiltonian.

    ``t`` may be a scalar or an array; the result has shape
    ``t.shape + (3,)``.  Models assembled from drive terms are traceless,
    so ``d`` fully determines ``H(t) = d(t) . sigma``.
    """
    t_arr = np.asarray(t, dtype=float)
    d = np.zeros(t_arr.shape + (3,), dtype=complex)
    w = model.base_omega
    for term in model.terms:
        vals = _waveform_values(term.waveform, term.multiplier * w * t_arr)
        coeff = term.amplitude * vals
        if term.hermiticity is Hermiticity.ANTI_HERMITIAN:
            coeff = 1.0j * coeff
        d[..., term.axis.value] += coeff
    return d


def hamiltonian_at(model: ModelSpec, t: float) -> np.ndarray:
    """Evaluate the model Hamiltonian ``H(t)`` as a 2x2 complex matrix."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    return matrix_from_bloch_vector(bloch_vector_at(model, float(t)))


def orthogonality_check(model: ModelSpec, samples: int = 128) -> float:
    """Max over sampled times of |A(t) . B(t)| for ``d = A + iB``.

    A valid antilinear-symmetric model keeps the Hermitian and
    anti-Hermitian drive vectors orthogonal at all times, so the result
    is zero up to rounding (<= 1e-14 for the built-in presets).
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    ts = np.arange(samples) * (model.period / samples)
    d = bloch_vector_at(model, ts)
    dots = np.einsum("tk,tk->t", d.real, d.imag)
    return float(np.max(np.abs(dots)))


def _family_waveforms(family: str) -> tuple[Waveform, Waveform]:
    if family == "smooth":
        return Waveform.COS, Waveform.SIN
    if family == "square":
        return Waveform.SQUARE_COS, Waveform.SQUARE_SIN
    raise ValueError(f"unknown waveform family {family!r} (use 'smooth' or 'square')")


def _pt_cosy_cosz(J, gamma, beta, cos_w, sin_w):
    # static X coupling, Hermitian cos-Y drive at omega, anti-Hermitian
    # cos-Z drive at beta*omega with a negative amplitude (gain-loss sign)
    return (
        DriveTerm(Axis.X, J),
        DriveTerm(Axis.Y, gamma, cos_w, 1, Hermiticity.HERMITIAN),
        DriveTerm(Axis.Z, -gamma, cos_w, beta, Hermiticity.ANTI_HERMITIAN),
    )


def _pt_cosy_sinz(J, gamma, beta, cos_w, sin_w):
    return (
        DriveTerm(Axis.X, J),
        DriveTerm(Axis.Y, gamma, cos_w, 1, Hermiticity.HERMITIAN),
        DriveTerm(Axis.Z, gamma, sin_w, beta, Hermiticity.ANTI_HERMITIAN),
    )


def _apt_cosx_cosy(J, gamma, beta, cos_w, sin_w):
    return (
        DriveTerm(Axis.X, gamma, cos_w, 1, Hermiticity.ANTI_HERMITIAN),
        DriveTerm(Axis.Y, gamma, cos_w, beta, Hermiticity.ANTI_HERMITIAN),
        DriveTerm(Axis.Z, J),
    )


def _apt_cosx_siny(J, gamma, beta, cos_w, sin_w):
    return (
        DriveTerm(Axis.X, gamma, cos_w, 1, Hermiticity.ANTI_HERMITIAN),
        DriveTerm(Axis.Y, gamma, sin_w, beta, Hermiticity.ANTI_HERMITIAN),
        DriveTerm(Axis.Z, J),
    )


_PRESETS = {
    "pt-cosy-cosz": _pt_cosy_cosz,
    "pt-cosy-sinz": _pt_cosy_sinz,
    "apt-cosx-cosy": _apt_cosx_cosy,
    "apt-cosx-siny": _apt_cosx_siny,
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(
    name: str,
    J: float = 1.0,
    gamma: float = 0.5,
    omega: float = 1.0,
    beta: int = 1,
    family: str = "smooth",
) -> ModelSpec:
    """Build one of the named two-frequency drive models.

    Parameters
    ----------
    name : str
        One of ``pt-cosy-cosz``, ``pt-cosy-sinz``, ``apt-cosx-cosy``,
        ``apt-cosx-siny``.  The ``pt-*`` models pair a static X coupling
        with a Hermitian Y drive and an anti-Hermitian Z drive; the
        ``apt-*`` models pair a static Z coupling with two anti-Hermitian
        drives.
    J, gamma : float
        Static coupling and drive strength (energy units of ``J``).
    omega : float
        Base drive frequency; the second drive runs at ``beta * omega``.
    beta : int
        Harmonic ratio of the two drives, integer >= 1.
    family : str
        ``smooth`` for sinusoids, ``square`` for their sign (piecewise
        constant) counterparts.
    """
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    if not isinstance(beta, int) or isinstance(beta, bool):
        raise ValueError("beta must be a positive integer")
    if beta < 1:
        raise ValueError("beta must be a positive integer")
    if not (math.isfinite(omega) and omega > 0):
        raise ValueError("omega must be positive and finite")
    if not (math.isfinite(J) and math.isfinite(gamma)):
        raise ValueError("J and gamma must be finite")
    cos_w, sin_w = _family_waveforms(family)
    terms = _PRESETS[name](J, gamma, beta, cos_w, sin_w)
    label = f"{name}[J={J:g},gamma={gamma:g},omega={omega:g},beta={beta},{family}]"
    return ModelSpec(terms=terms, base_omega=omega, label=label)


@dataclass(frozen=True)
class PresetTemplate:
    """A preset with everything fixed except ``(gamma, omega)``.

    Sweeps instantiate one concrete :class:`ModelSpec` per grid cell.
    """

    name: str
    J: float = 1.0
    beta: int = 1
    family: str = "smooth"

    def instantiate(self, gamma: float, omega: float) -> ModelSpec:
        return preset(
            self.name, J=self.J, gamma=gamma, omega=omega, beta=self.beta, family=self.family
        )

    @property
    def label(self) -> str:
        return f"{self.name}[J={self.J:g},beta={self.beta},{self.family}]"
