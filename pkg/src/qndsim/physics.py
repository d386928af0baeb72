"""Laboratory parameters and the dimensionless probe coupling.

Unit policy: every frequency-like quantity (linewidth, detunings) is stored as
an angular frequency in rad/s.  Parameter sheets use explicitly unit-suffixed
keys ("gamma_2pi_mhz": 29 means 2*pi*29 MHz) and are converted on load, so no
factor of 2*pi can survive into the formulas.  Lengths are meters, times are
seconds.

The mean photon number per pulse and the atom number enter only through the
spin lengths S = photons/2 and J = atoms/2; S is always computed from the
photon number, never stored separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

TWO_PI = 2.0 * math.pi

# |phi - (kappa/2)*sqrt(J/S)| tolerance for jointly built couplings.
CONSISTENCY_TOL = 1e-9


class SheetError(ValueError):
    """Parameter sheet failed to parse or is missing/mistyping a key."""


@dataclass(frozen=True)
class AtomicParams:
    """Atomic-side constants of the probe transition and the prepared ensemble.

    gamma: natural full linewidth (rad/s).
    sigma0: photon-absorption cross section (m^2).
    delta: probe detuning from the upper hyperfine line (rad/s).
    delta0: splitting between the two excited hyperfine lines (rad/s).
    waist: probe beam waist (m).
    collective_spin: J = (atom number)/2, dimensionless.
    collective_spin_std: shot-to-shot standard deviation of J.
    """

    gamma: float
    sigma0: float
    delta: float
    delta0: float
    waist: float
    collective_spin: float
    collective_spin_std: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.waist <= 0:
            raise ValueError("waist must be positive")
        if self.collective_spin <= 0:
            raise ValueError("collective_spin must be positive")
        if self.collective_spin_std < 0:
            raise ValueError("collective_spin_std must be non-negative")


@dataclass(frozen=True)
class PulseParams:
    """Probe pulse settings.

    photons: mean photon number per pulse (S = photons/2 is derived).
    width: pulse duration (s).
    interval: separation between the two pulses (s).
    absorption_rate: photon absorption rate r (1/s) entering the loss
        parameter epsilon = r*width/2.
    """

    photons: float
    width: float
    interval: float = 0.0
    absorption_rate: float = 0.0

    def __post_init__(self):
        if self.photons < 0:
            raise ValueError("photons must be non-negative")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.interval < 0:
            raise ValueError("interval must be non-negative")
        if self.absorption_rate < 0:
            raise ValueError("absorption_rate must be non-negative")

    @property
    def stokes_length(self) -> float:
        """S = photons/2, the classical length of the light's Stokes vector."""
        return self.photons / 2.0


@dataclass(frozen=True)
class DerivedCoupling:
    """Dimensionless coupling kappa, rotation angle phi (rad), loss epsilon."""

    kappa: float
    phi: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")


def coupling_strength(atomic: AtomicParams, pulse: PulseParams) -> float:
    """Signed coupling kappa from atomic and pulse parameters.

    kappa = Gamma*sigma0*sqrt(S*J)/(3*pi*w0^2) times the two-line dispersive
    factor (delta-delta0)/((delta-delta0)^2+(Gamma/2)^2)
    - delta/(delta^2+(Gamma/2)^2).  The sign follows the detunings; all
    variance predictions depend on kappa^2 only.
    """
    s = pulse.stokes_length
    if s == 0.0:
        return 0.0
    prefactor = (
        atomic.gamma
        * atomic.sigma0
        * math.sqrt(s * atomic.collective_spin)
        / (3.0 * math.pi * atomic.waist**2)
    )
    half_width_sq = (atomic.gamma / 2.0) ** 2
    shifted = atomic.delta - atomic.delta0
    dispersive = shifted / (shifted**2 + half_width_sq) - atomic.delta / (
        atomic.delta**2 + half_width_sq
    )
    return prefactor * dispersive


def faraday_angle(kappa: float, stokes_length: float, collective_spin: float) -> float:
    """Polarization rotation angle phi = (kappa/2)*sqrt(J/S) in radians."""
    if stokes_length <= 0 or collective_spin <= 0:
        raise ValueError("stokes_length and collective_spin must be positive")
    return 0.5 * kappa * math.sqrt(collective_spin / stokes_length)


def kappa_from_angle(phi: float, stokes_length: float, collective_spin: float) -> float:
    """Inverse of :func:`faraday_angle`: kappa = 2*phi*sqrt(S/J)."""
    if stokes_length <= 0 or collective_spin <= 0:
        raise ValueError("stokes_length and collective_spin must be positive")
    return 2.0 * phi * math.sqrt(stokes_length / collective_spin)


def loss_parameter(absorption_rate: float, width: float) -> float:
    """Loss parameter epsilon = r*t/2 for absorption rate r and pulse width t."""
    if absorption_rate < 0 or width < 0:
        raise ValueError("absorption_rate and width must be non-negative")
    return 0.5 * absorption_rate * width


def derive_coupling(atomic: AtomicParams, pulse: PulseParams) -> DerivedCoupling:
    """Jointly consistent (kappa, phi, epsilon) for one operating point."""
    kappa = coupling_strength(atomic, pulse)
    phi = (
        faraday_angle(kappa, pulse.stokes_length, atomic.collective_spin)
        if pulse.photons > 0
        else 0.0
    )
    derived = DerivedCoupling(
        kappa=kappa,
        phi=phi,
        epsilon=loss_parameter(pulse.absorption_rate, pulse.width),
    )
    if pulse.photons > 0:
        check = 0.5 * kappa * math.sqrt(atomic.collective_spin / pulse.stokes_length)
        if abs(phi - check) > CONSISTENCY_TOL:
            raise ValueError("kappa/phi consistency violated")
    return derived


# ---------------------------------------------------------------------------
# Parameter sheets
# ---------------------------------------------------------------------------

_ATOMIC_KEYS = {
    "gamma_2pi_mhz": ("gamma", lambda v: TWO_PI * v * 1e6),
    "sigma0_m2": ("sigma0", float),
    "delta_2pi_mhz": ("delta", lambda v: TWO_PI * v * 1e6),
    "delta0_2pi_mhz": ("delta0", lambda v: TWO_PI * v * 1e6),
    "waist_um": ("waist", lambda v: v / 1e6),
    "collective_spin": ("collective_spin", float),
    "collective_spin_std": ("collective_spin_std", float),
}

_PULSE_KEYS = {
    "photons": ("photons", float),
    "pulse_width_ns": ("width", lambda v: v / 1e9),
    "pulse_interval_us": ("interval", lambda v: v / 1e6),
    "absorption_rate_per_s": ("absorption_rate", float),
}

_OPTIONAL_KEYS = {"collective_spin_std", "pulse_interval_us", "absorption_rate_per_s"}


@dataclass(frozen=True)
class ParameterSheet:
    """One named laboratory operating point."""

    name: str
    atomic: AtomicParams
    pulse: PulseParams


def _convert(raw: dict, keymap: dict, source: str) -> dict:
    fields = {}
    for key, (field, conv) in keymap.items():
        if key not in raw:
            if key in _OPTIONAL_KEYS:
                continue
            raise SheetError(f"{source}: missing key {key!r}")
        value = raw[key]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SheetError(f"{source}: key {key!r} must be a number, got {value!r}")
        fields[field] = conv(value)
    return fields


def sheet_from_mapping(raw: dict, source: str = "<sheet>") -> ParameterSheet:
    """Build a :class:`ParameterSheet` from a parsed JSON mapping."""
    if not isinstance(raw, dict):
        raise SheetError(f"{source}: expected a JSON object at top level")
    known = {"name"} | set(_ATOMIC_KEYS) | set(_PULSE_KEYS)
    unknown = set(raw) - known
    if unknown:
        raise SheetError(f"{source}: unknown key(s) {sorted(unknown)}")
    try:
        atomic = AtomicParams(**_convert(raw, _ATOMIC_KEYS, source))
        pulse = PulseParams(**_convert(raw, _PULSE_KEYS, source))
    except ValueError as exc:
        if isinstance(exc, SheetError):
            raise
        raise SheetError(f"{source}: {exc}") from exc
    return ParameterSheet(name=str(raw.get("name", "unnamed")), atomic=atomic, pulse=pulse)


def load_sheet(path: str | Path) -> ParameterSheet:
    """Load a parameter sheet from a JSON file.

    ``path`` may also name a bundled sheet ("yb171") when no such file exists.
    """
    p = Path(path)
    if not p.exists():
        bundled = resources.files("qndsim").joinpath(f"data/{p.stem}.json")
        if bundled.is_file():
            return sheet_from_mapping(json.loads(bundled.read_text()), source=str(path))
        raise SheetError(f"{path}: no such sheet")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SheetError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return sheet_from_mapping(raw, source=str(path))
