"""Domain types and signal-model math for multi-functional RIS downlink systems.

Everything here is a pure function over immutable-by-convention inputs:
effective channels, SINR, sum-rate, and the power accounting needed by the
amplifying architectures.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * np.pi


class MfrisError(Exception):
    """Base class for errors raised by this package."""


class DegenerateInputError(MfrisError):
    """Inputs make the requested quantity undefined (e.g. zero channels)."""


class DegenerateGeometryError(MfrisError):
    """Geometry puts a node exactly on the RIS plane."""


class BudgetExceededError(MfrisError):
    """Enumeration budget of the exhaustive oracle exceeded."""

    def __init__(self, count: int, budget: int):
        self.count = count
        self.budget = budget
        super().__init__(f"enumeration count {count} exceeds budget {budget}")


class ConfigError(MfrisError):
    """Invalid configuration; message names the offending key."""


class Architecture(str, Enum):
    PASSIVE = "passive"
    STAR = "star"
    ACTIVE = "active"
    MF_IDEAL = "mf-ideal"
    MF_COUPLED = "mf-coupled"

    @property
    def amplifying(self) -> bool:
        return self in (Architecture.ACTIVE, Architecture.MF_IDEAL,
                        Architecture.MF_COUPLED)

    @property
    def refracting(self) -> bool:
        """Whether the surface can serve users behind it."""
        return self in (Architecture.STAR, Architecture.MF_IDEAL,
                        Architecture.MF_COUPLED)


class Strategy(str, Enum):
    ES = "es"
    MS = "ms"
    TS = "ts"


class Side(str, Enum):
    REFLECT = "reflect"
    REFRACT = "refract"


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watt_to_dbm(watt: float) -> float:
    return 10.0 * np.log10(watt / 1e-3)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def wrap_phase(theta):
    """Canonical wrap to [0, 2*pi)."""
    return np.mod(np.asarray(theta, dtype=float), TWO_PI)


@dataclass
class SystemConfig:
    """Scenario scalars. Powers in watts, angles in radians."""

    n_antennas: int
    n_users: int
    n_elements: int
    p_total: float
    p_bs: float
    p_ris: float
    noise_rx: float
    noise_ris: float
    beta_max: float
    architecture: Architecture
    strategy: Strategy = Strategy.ES
    phase_bits: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        arch = Architecture(self.architecture)
        self.architecture = arch
        self.strategy = Strategy(self.strategy)
        if self.n_antennas < 1 or self.n_users < 1 or self.n_elements < 1:
            raise ConfigError("n_antennas/n_users/n_elements must be positive")
        if self.phase_bits < 0:
            raise ConfigError("phase_bits must be >= 0")
        tol = 1e-9 * max(1.0, self.p_total)
        if arch.amplifying:
            if self.p_bs + self.p_ris > self.p_total + tol:
                raise ConfigError("p_bs + p_ris exceeds p_total")
            if self.beta_max < 1.0:
                raise ConfigError("beta_max must be >= 1 for amplifying architectures")
        else:
            if self.p_bs > self.p_total + tol:
                raise ConfigError("p_bs exceeds p_total")
            if self.p_ris != 0.0:
                raise ConfigError("p_ris must be 0 for non-amplifying architectures")
            if self.beta_max != 1.0:
                raise ConfigError("beta_max must be 1 for non-amplifying architectures")
            if self.noise_ris != 0.0:
                raise ConfigError("noise_ris must be 0 for non-amplifying architectures")


@dataclass
class ChannelSet:
    """One realization of all complex channels.

    bs_ris:  (M, N) BS->RIS matrix
    ris_user:(K, M) RIS->user vectors
    direct:  (K, N) BS->user vectors
    side:    per-user half-space label
    """

    bs_ris: np.ndarray
    ris_user: np.ndarray
    direct: np.ndarray
    side: list[Side]

    def __post_init__(self):
        for name in ("bs_ris", "ris_user", "direct"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if not np.all(np.isfinite(arr.view(float))):
                raise ConfigError(f"channel '{name}' contains non-finite entries")
            setattr(self, name, arr)
        self.side = [Side(s) for s in self.side]


@dataclass
class RisProfile:
    """Per-element surface state: amplitudes and phases for both functions.

    TS carries two slot-specific sub-profiles plus time fractions; the
    top-level arrays are then unused for rate evaluation.
    """

    beta_r: np.ndarray
    theta_r: np.ndarray
    beta_t: np.ndarray
    theta_t: np.ndarray
    ms_group: np.ndarray | None = None
    ts_fractions: tuple[float, float] | None = None
    ts_profiles: tuple["RisProfile", "RisProfile"] | None = None

    def __post_init__(self):
        self.beta_r = np.asarray(self.beta_r, dtype=float)
        self.theta_r = np.asarray(self.theta_r, dtype=float)
        self.beta_t = np.asarray(self.beta_t, dtype=float)
        self.theta_t = np.asarray(self.theta_t, dtype=float)
        if self.ms_group is not None:
            self.ms_group = np.asarray(self.ms_group, dtype=int)

    @property
    def n_elements(self) -> int:
        return self.beta_r.shape[0]

    def coefficients(self, side: Side) -> np.ndarray:
        """Complex per-element coefficient sqrt(beta) * exp(j*theta)."""
        if side == Side.REFLECT:
            return np.sqrt(self.beta_r) * np.exp(1j * self.theta_r)
        return np.sqrt(self.beta_t) * np.exp(1j * self.theta_t)

    def copy(self) -> "RisProfile":
        return RisProfile(
            self.beta_r.copy(), self.theta_r.copy(),
            self.beta_t.copy(), self.theta_t.copy(),
            None if self.ms_group is None else self.ms_group.copy(),
            self.ts_fractions,
            self.ts_profiles,
        )

    @classmethod
    def zero(cls, m: int) -> "RisProfile":
        z = np.zeros(m)
        return cls(z.copy(), z.copy(), z.copy(), z.copy())


@dataclass
class Precoder:
    """BS precoding matrix, one column per user."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))


@dataclass
class SolveReport:
    objective_trace: np.ndarray
    final_rates: np.ndarray
    constraint_residuals: dict[str, float]
    iterations: int
    wall_time: float
    seed: int
    power_split: float | None = None
    extra: dict = field(default_factory=dict)


def ris_matrix(profile: RisProfile, side: Side) -> np.ndarray:
    """Diagonal surface matrix diag(sqrt(beta)*exp(j*theta)) for one side."""
    return np.diag(profile.coefficients(side))


def element_response(profile: RisProfile, m: int, s_m: complex) -> tuple[complex, complex]:
    """Reflected and refracted outputs of element m for incident signal s_m."""
    y_r = np.sqrt(profile.beta_r[m]) * np.exp(1j * profile.theta_r[m]) * s_m
    y_t = np.sqrt(profile.beta_t[m]) * np.exp(1j * profile.theta_t[m]) * s_m
    return complex(y_r), complex(y_t)


def effective_channel(channels: ChannelSet, profile: RisProfile, k: int) -> np.ndarray:
    """Row-vector effective channel of user k: direct plus cascaded path.

    Returned as a length-N array h with received scalar h @ w.
    """
    c = profile.coefficients(channels.side[k])
    return (np.conj(channels.direct[k])
            + (np.conj(channels.ris_user[k]) * c) @ channels.bs_ris)


def effective_channels_all(channels: ChannelSet, profile: RisProfile) -> np.ndarray:
    """(K, N) stack of effective channels for all users."""
    c_r = profile.coefficients(Side.REFLECT)
    c_t = profile.coefficients(Side.REFRACT)
    rows = []
    for k, s in enumerate(channels.side):
        c = c_r if s == Side.REFLECT else c_t
        rows.append(np.conj(channels.direct[k])
                    + (np.conj(channels.ris_user[k]) * c) @ channels.bs_ris)
    return np.asarray(rows)


def _ris_noise_gains(channels: ChannelSet, profile: RisProfile) -> np.ndarray:
    """Per-user ||g_k^H Theta_side||^2 term multiplying the surface noise."""
    gains = np.empty(len(channels.side))
    for k, s in enumerate(channels.side):
        beta = profile.beta_r if s == Side.REFLECT else profile.beta_t
        gains[k] = float(np.sum(np.abs(channels.ris_user[k]) ** 2 * beta))
    return gains


def sinr(k: int, w: Precoder, channels: ChannelSet, profile: RisProfile,
         cfg: SystemConfig) -> float:
    """SINR of user k under precoder w and surface profile."""
    h = effective_channel(channels, profile, k)
    t = h @ w.w
    signal = np.abs(t[k]) ** 2
    interference = float(np.sum(np.abs(t) ** 2) - signal)
    noise_ris = cfg.noise_ris * _ris_noise_gains(channels, profile)[k]
    denom = interference + noise_ris + cfg.noise_rx
    if denom <= 0.0:
        raise DegenerateInputError("SINR denominator is zero")
    return float(signal / denom)


def _sum_rate_single(w: Precoder, channels: ChannelSet, profile: RisProfile,
                     cfg: SystemConfig) -> float:
    h = effective_channels_all(channels, profile)
    t = h @ w.w
    p = np.abs(t) ** 2
    signal = np.diag(p)
    interference = p.sum(axis=1) - signal
    noise = cfg.noise_rx + cfg.noise_ris * _ris_noise_gains(channels, profile)
    denom = interference + noise
    if np.any(denom <= 0.0):
        raise DegenerateInputError("SINR denominator is zero")
    return float(np.sum(np.log2(1.0 + signal / denom)))


def sum_rate(w, channels: ChannelSet, profile: RisProfile,
             cfg: SystemConfig) -> float:
    """Sum rate in bits/s/Hz; TS profiles combine slot rates by time fraction.

    For TS, `w` may be a pair of per-slot precoders (one precoder is reused
    for both slots otherwise).
    """
    if profile.ts_profiles is not None:
        lam_r, lam_t = profile.ts_fractions
        w_r, w_t = w if isinstance(w, tuple) else (w, w)
        prof_r, prof_t = profile.ts_profiles
        return (lam_r * _sum_rate_single(w_r, channels, prof_r, cfg)
                + lam_t * _sum_rate_single(w_t, channels, prof_t, cfg))
    return _sum_rate_single(w, channels, profile, cfg)


def user_rates(w, channels: ChannelSet, profile: RisProfile,
               cfg: SystemConfig) -> np.ndarray:
    """Per-user rates in bits/s/Hz (TS-aware, same conventions as sum_rate)."""
    if profile.ts_profiles is not None:
        lam_r, lam_t = profile.ts_fractions
        w_r, w_t = w if isinstance(w, tuple) else (w, w)
        prof_r, prof_t = profile.ts_profiles
        return (lam_r * user_rates(w_r, channels, prof_r, cfg)
                + lam_t * user_rates(w_t, channels, prof_t, cfg))
    h = effective_channels_all(channels, profile)
    t = h @ w.w
    p = np.abs(t) ** 2
    signal = np.diag(p)
    interference = p.sum(axis=1) - signal
    noise = cfg.noise_rx + cfg.noise_ris * _ris_noise_gains(channels, profile)
    return np.log2(1.0 + signal / (interference + noise))


def ris_output_power(w, channels: ChannelSet, profile: RisProfile,
                     cfg: SystemConfig) -> float:
    """Radiated power of the surface: amplified signal plus injected noise.

    Only meaningful for amplifying architectures; callers must not invoke it
    for passive ones.
    """
    if not cfg.architecture.amplifying:
        raise MfrisError("ris_output_power is undefined for passive architectures")
    if profile.ts_profiles is not None:
        lam_r, lam_t = profile.ts_fractions
        w_r, w_t = w if isinstance(w, tuple) else (w, w)
        prof_r, prof_t = profile.ts_profiles
        return (lam_r * ris_output_power(w_r, channels, prof_r, cfg)
                + lam_t * ris_output_power(w_t, channels, prof_t, cfg))
    gw = channels.bs_ris @ w.w  # (M, K) incident signals per element
    incident = np.sum(np.abs(gw) ** 2, axis=1)
    signal = float(np.sum((profile.beta_r + profile.beta_t) * incident))
    noise = cfg.noise_ris * float(np.sum(profile.beta_r) + np.sum(profile.beta_t))
    return signal + noise
