"""Physical description of the driven resonator with embedded TLS fluctuators."""
import dataclasses
import math
import warnings
from dataclasses import dataclass

from .operators import HilbertSpace

DISPERSIVE_WARN = 0.25
DISPERSIVE_ERROR = 0.5


class DispersiveValidityError(ValueError):
    pass


class DispersiveWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TLSParams:
    Delta: float  # TLS detuning from the drive, MHz
    g: float  # coupling to the resonator, MHz


@dataclass(frozen=True)
class SystemConfig:
    """Rotating-frame parameters.  Frequencies in MHz, ``kappa`` in 1/us."""

    tls: tuple
    Delta_c: float
    epsilon: float
    kappa: float = 0.0
    fock_cutoff: int = 10
    drive_bound: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "tls", tuple(
            t if isinstance(t, TLSParams) else TLSParams(**t) for t in self.tls
        ))
        if not self.tls:
            raise ValueError("at least one TLS is required")
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        if self.fock_cutoff < 2:
            raise ValueError(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")
        values = [self.Delta_c, self.epsilon, self.kappa, self.drive_bound]
        values += [v for t in self.tls for v in (t.Delta, t.g)]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("all physical parameters must be finite")

    @property
    def n_tls(self) -> int:
        return len(self.tls)

    @property
    def space(self) -> HilbertSpace:
        return HilbertSpace(self.n_tls, self.fock_cutoff)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def Delta_nc(self, n: int) -> float:
        """TLS-resonator detuning ``Delta_n - Delta_c``."""
        return self.tls[n].Delta - self.Delta_c

    def dispersive_ratio(self, n: int) -> float:
        d = self.Delta_nc(n)
        if d == 0:
            return math.inf
        return abs(self.tls[n].g / d)

    def check_dispersive(self, warn=DISPERSIVE_WARN, error=DISPERSIVE_ERROR):
        """Warn or raise when any ``g_n / |Delta_nc|`` is too large."""
        for n in range(self.n_tls):
            r = self.dispersive_ratio(n)
            if r > error:
                raise DispersiveValidityError(
                    f"TLS {n}: g/|Delta_nc| = {r:.3g} exceeds {error} "
                    f"(Delta={self.tls[n].Delta}, g={self.tls[n].g}, Delta_c={self.Delta_c})"
                )
            if r > warn:
                warnings.warn(
                    f"TLS {n}: g/|Delta_nc| = {r:.3g} is above {warn}; "
                    "dispersive expansion is marginal",
                    DispersiveWarning,
                    stacklevel=2,
                )
