"""Static physical description of the memory and frequency-comb construction.

All rates and detunings are ordinary frequencies in Hz (what a spectrum
analyzer reads); the dynamics module converts to angular rates internally.
Resonator n sits a half wavelength past resonator n-1 along the feedline,
encoded by the propagation phase ``spacing_phase[n] = n*pi`` by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError

DEFAULT_N_RESONATORS = 4
DEFAULT_CENTER_FREQUENCY_HZ = 4.91e9
DEFAULT_KAPPA_C_HZ = 0.55e6
DEFAULT_KAPPA_I_HZ = 0.312e6
DEFAULT_DELTA_HZ = 3.5e6


@dataclass(frozen=True)
class MemoryConfig:
    """Resonator array coupled to a common feedline.

    kappa_c / kappa_i are the external (feedline) and internal loss rates
    of each resonator, one entry per resonator.  Immutable; safe to share
    between parallel workers.
    """

    n_resonators: int = DEFAULT_N_RESONATORS
    center_frequency: float = DEFAULT_CENTER_FREQUENCY_HZ
    kappa_c: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    kappa_i: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    spacing_phase: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = self.n_resonators
        if not isinstance(n, int) or n < 1:
            raise ValidationError(f"n_resonators must be a positive integer, got {n!r}")
        if self.center_frequency <= 0:
            raise ValidationError("center_frequency must be positive")
        kc = self.kappa_c if self.kappa_c is not None else (DEFAULT_KAPPA_C_HZ,) * n
        ki = self.kappa_i if self.kappa_i is not None else (DEFAULT_KAPPA_I_HZ,) * n
        ph = self.spacing_phase if self.spacing_phase is not None else tuple(k * math.pi for k in range(n))
        kc = tuple(float(v) for v in kc)
        ki = tuple(float(v) for v in ki)
        ph = tuple(float(v) for v in ph)
        for name, rates in (("kappa_c", kc), ("kappa_i", ki)):
            if len(rates) != n:
                raise ValidationError(f"{name} must have one entry per resonator ({n}), got {len(rates)}")
            if any(r < 0 for r in rates):
                raise ValidationError(f"{name} entries must be >= 0")
        if len(ph) != n:
            raise ValidationError(f"spacing_phase must have {n} entries, got {len(ph)}")
        object.__setattr__(self, "kappa_c", kc)
        object.__setattr__(self, "kappa_i", ki)
        object.__setattr__(self, "spacing_phase", ph)

    @classmethod
    def uniform(cls, n_resonators: int = DEFAULT_N_RESONATORS,
                kappa_c: float = DEFAULT_KAPPA_C_HZ,
                kappa_i: float = DEFAULT_KAPPA_I_HZ,
                center_frequency: float = DEFAULT_CENTER_FREQUENCY_HZ) -> "MemoryConfig":
        """All resonators share the same rates (half-wave spacing)."""
        return cls(
            n_resonators=n_resonators,
            center_frequency=center_frequency,
            kappa_c=(float(kappa_c),) * n_resonators,
            kappa_i=(float(kappa_i),) * n_resonators,
        )


@dataclass(frozen=True)
class CombConfig:
    """Equally spaced resonator detunings centered on the carrier."""

    delta: float
    detunings: tuple[float, ...]

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError(f"comb spacing must be positive, got {self.delta!r}")
        if len(self.detunings) < 1:
            raise ValidationError("comb needs at least one detuning")
        object.__setattr__(self, "detunings", tuple(float(d) for d in self.detunings))

    @property
    def n(self) -> int:
        return len(self.detunings)


def build_comb(n: int, delta: float) -> CombConfig:
    """Symmetric comb of n teeth with spacing delta, centered at zero detuning.

    Tooth k sits at (k - (n-1)/2) * delta, so the set is symmetric under
    negation and spans (n-1) * delta.
    """
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"tooth count must be a positive integer, got {n!r}")
    if delta <= 0:
        raise ValidationError(f"comb spacing must be positive, got {delta!r}")
    offset = (n - 1) / 2.0
    return CombConfig(delta=float(delta), detunings=tuple((k - offset) * delta for k in range(n)))


def impedance_matching_delta(kappa_c: float) -> float:
    """Comb spacing that maximizes single-echo re-emission: (pi/2) * kappa_c.

    Both sides are ordinary frequencies; the relation is homogeneous so the
    2*pi convention cancels.
    """
    if kappa_c < 0:
        raise ValidationError(f"kappa_c must be >= 0, got {kappa_c!r}")
    return 0.5 * math.pi * kappa_c


def spectral_span(comb: CombConfig) -> float:
    """Width of the comb: max detuning minus min detuning."""
    return max(comb.detunings) - min(comb.detunings)
