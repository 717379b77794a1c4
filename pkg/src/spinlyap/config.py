"""Default numerical tolerances.

Every tolerance used by a self-check lives here so a run configuration can
override it (``"tolerances": {...}`` in a config file).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-13
    norm: float = 1e-10
    commutator: float = 1e-12
    casimir: float = 1e-10
    hyperbolic: float = 1e-10
    root_merge: float = 1e-9
    fixed_point_gradient: float = 1e-9
    boundary: float = 1e-12
    echo_identity: float = 1e-10
    gain_origin: float = 1e-8
    energy_drift: float = 1e-9

    def to_dict(self) -> dict:
        return asdict(self)

    def updated(self, overrides: dict | None) -> "Tolerances":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"tolerances: unknown key(s) {sorted(unknown)}")
        try:
            values = {k: float(v) for k, v in overrides.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tolerances: non-numeric value ({exc})") from None
        return replace(self, **values)


DEFAULT_TOLERANCES = Tolerances()
