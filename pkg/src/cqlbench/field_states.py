"""Single-mode field states on a truncated Fock basis, with number and phase statistics.

Phase statistics use the Susskind-Glogower lowering operator
``E = sum_n |n><n+1|``: ``<E> = sum_n conj(C_n) C_{n+1}``. For a coherent
state with amplitude ``|alpha| e^{i theta}`` this is close to ``e^{i theta}``,
so ``sin_mean`` carries the sign of ``sin(theta)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

__all__ = [
    "AUTO",
    "FieldState",
    "NumberStats",
    "PhaseStats",
    "auto_cutoff",
    "coherent_state",
    "fock_state",
    "custom_state",
    "number_stats",
    "phase_stats",
    "state_to_json",
    "state_from_json",
]

AUTO = "auto"
LEAK_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class FieldState:
    coeffs: np.ndarray
    truncation_leak: float = 0.0
    undersized: bool = False
    label: str = field(default="custom", compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("coeffs must be a non-empty 1-D array")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ValueError("FieldState coefficients must be normalized")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return self.coeffs.size

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.coeffs.imag == 0.0))


@dataclass(frozen=True)
class NumberStats:
    nbar: float
    var_n: float


@dataclass(frozen=True)
class PhaseStats:
    cos_mean: float
    sin_mean: float
    var_phi_proxy: float


def auto_cutoff(nbar: float) -> int:
    amp = math.sqrt(nbar)
    return math.ceil(nbar + 8.0 * amp + 12.0)


def coherent_state(alpha: complex, cutoff: int | str = AUTO) -> FieldState:
    """Coherent state |alpha> truncated to ``cutoff`` Fock levels and renormalized.

    Amplitudes are built in log space, so large ``|alpha|`` does not overflow.
    ``truncation_leak`` is the exact Poisson tail P(n >= cutoff) that was dropped.
    """
    nbar = abs(alpha) ** 2
    undersized = False
    if cutoff == AUTO:
        cutoff = auto_cutoff(nbar)
    else:
        cutoff = int(cutoff)
        if cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {cutoff}")
        if nbar > 0.5 * cutoff:
            undersized = True
    n = np.arange(cutoff)
    if nbar == 0.0:
        coeffs = np.zeros(cutoff, dtype=complex)
        coeffs[0] = 1.0
        leak = 0.0
    else:
        log_mag = -0.5 * nbar + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        coeffs = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
        coeffs /= np.linalg.norm(coeffs)
        leak = float(poisson.sf(cutoff - 1, nbar))
    return FieldState(coeffs, truncation_leak=leak, undersized=undersized, label=f"coherent:{nbar:g}")


def fock_state(n: int, cutoff: int) -> FieldState:
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if n >= cutoff:
        raise ValueError(f"Fock level {n} does not fit below cutoff {cutoff}")
    coeffs = np.zeros(cutoff, dtype=complex)
    coeffs[n] = 1.0
    return FieldState(coeffs, label=f"fock:{n}")


def custom_state(coeffs, cutoff: int | None = None, label: str = "custom") -> FieldState:
    """Normalized copy of arbitrary Fock amplitudes, zero-padded to ``cutoff``."""
    c = np.asarray(coeffs, dtype=complex).ravel()
    if cutoff is None:
        cutoff = c.size
    if c.size > cutoff:
        raise ValueError(f"{c.size} coefficients do not fit below cutoff {cutoff}")
    norm = np.linalg.norm(c)
    if norm == 0.0:
        raise ValueError("custom state needs at least one nonzero coefficient")
    padded = np.zeros(cutoff, dtype=complex)
    padded[: c.size] = c / norm
    return FieldState(padded, label=label)


def number_stats(s: FieldState) -> NumberStats:
    p = np.abs(s.coeffs) ** 2
    n = np.arange(s.cutoff)
    nbar = float(p @ n)
    var = float(p @ (n - nbar) ** 2)
    return NumberStats(nbar=nbar, var_n=var)


def phase_stats(s: FieldState) -> PhaseStats:
    c = s.coeffs
    lowering = complex(np.vdot(c[:-1], c[1:])) if c.size > 1 else 0j
    if s.is_real:
        lowering = complex(lowering.real, 0.0)
    cos_mean = lowering.real
    return PhaseStats(cos_mean=cos_mean, sin_mean=lowering.imag, var_phi_proxy=2.0 * (1.0 - cos_mean))


def state_to_json(s: FieldState) -> str:
    return json.dumps([[float(z.real), float(z.imag)] for z in s.coeffs])


def state_from_json(text: str, cutoff: int | None = None) -> FieldState:
    pairs = json.loads(text)
    try:
        coeffs = [complex(re, im) for re, im in pairs]
    except (TypeError, ValueError) as exc:
        raise ValueError("field state JSON must be a list of [re, im] pairs") from exc
    return custom_state(coeffs, cutoff)

