"""Feasible sets of the RIS architecture variants: projection, phase
quantization, coupling enforcement, mode-switching group assignment, and
feasibility checking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import (Architecture, ChannelSet, ConfigError, Precoder,
                   RisProfile, Side, Strategy, SystemConfig, TWO_PI,
                   ris_output_power, sum_rate, wrap_phase)

DEFAULT_COUPLING = (np.pi / 2.0, -np.pi / 2.0)


@dataclass
class FeasibleSet:
    """Per-element (and optional global) constraints of one architecture."""

    architecture: Architecture
    beta_max: float = 1.0
    phase_bits: int = 0
    amp_levels: int = 0  # 0 = continuous amplitudes
    global_power_cap: float | None = None
    coupling: tuple[float, ...] | None = None
    forced_side: Side | None = None  # TS slot restriction

    def __post_init__(self):
        self.architecture = Architecture(self.architecture)
        if not self.architecture.amplifying and self.beta_max != 1.0:
            raise ConfigError("beta_max must be 1 for non-amplifying architectures")
        if not self.architecture.amplifying and self.global_power_cap is not None:
            raise ConfigError("global_power_cap applies only to amplifying architectures")
        if self.architecture == Architecture.MF_COUPLED and self.coupling is None:
            self.coupling = DEFAULT_COUPLING
        if (self.architecture == Architecture.MF_COUPLED and self.phase_bits == 1):
            # 1-bit lattice {0, pi} cannot represent the +-pi/2 offsets.
            raise ConfigError("phase_bits=1 is incompatible with the coupled architecture")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "FeasibleSet":
        cap = cfg.p_ris if (cfg.architecture.amplifying and cfg.p_ris > 0) else None
        return cls(architecture=cfg.architecture, beta_max=cfg.beta_max,
                   phase_bits=cfg.phase_bits, global_power_cap=cap)

    @property
    def reflect_only(self) -> bool:
        return (not self.architecture.refracting
                or self.forced_side == Side.REFLECT)

    @property
    def refract_only(self) -> bool:
        return self.forced_side == Side.REFRACT


def quantize_phase(theta: np.ndarray, bits: int) -> np.ndarray:
    """Snap each phase to the nearest lattice point 2*pi*i/2^b, ties down."""
    if bits <= 0:
        return wrap_phase(theta)
    levels = 2 ** bits
    step = TWO_PI / levels
    q = wrap_phase(theta) / step
    frac = q - np.floor(q)
    idx = np.where(frac > 0.5, np.ceil(q), np.floor(q))
    return wrap_phase(idx * step)


def _snap_amplitudes(beta_r: np.ndarray, beta_t: np.ndarray,
                     fset: FeasibleSet) -> tuple[np.ndarray, np.ndarray]:
    """Snap amplitudes to the discrete grid, then restore joint feasibility
    by lowering the larger coordinate (ties lower beta_t)."""
    levels = np.linspace(0.0, fset.beta_max, fset.amp_levels)
    step = levels[1] - levels[0] if fset.amp_levels > 1 else 1.0

    def snap(b):
        idx = np.clip(np.round(b / step), 0, fset.amp_levels - 1)
        return idx * step

    br, bt = snap(beta_r), snap(beta_t)
    over = br + bt > fset.beta_max + 1e-12
    while np.any(over):
        lower_t = bt >= br
        bt = np.where(over & lower_t, bt - step, bt)
        br = np.where(over & ~lower_t, br - step, br)
        over = br + bt > fset.beta_max + 1e-12
    return np.maximum(br, 0.0), np.maximum(bt, 0.0)


def project_profile(profile: RisProfile, fset: FeasibleSet) -> RisProfile:
    """Project onto the per-element constraint set. Idempotent.

    Amplitude cap uses radial scaling (preserves the reflect/refract split
    ratio); phases snap to the quantization lattice; the coupled
    architecture then moves theta_t onto the nearest allowed offset.
    """
    out = profile.copy()
    br = np.maximum(out.beta_r, 0.0)
    bt = np.maximum(out.beta_t, 0.0)

    if fset.architecture == Architecture.PASSIVE:
        br = np.ones_like(br)
        bt = np.zeros_like(bt)
        out.theta_t = np.zeros_like(out.theta_t)
    elif fset.reflect_only:
        bt = np.zeros_like(bt)
        out.theta_t = np.zeros_like(out.theta_t)
        br = np.minimum(br, fset.beta_max)
    elif fset.refract_only:
        br = np.zeros_like(br)
        out.theta_r = np.zeros_like(out.theta_r)
        bt = np.minimum(bt, fset.beta_max)
    else:
        if out.ms_group is not None:
            bt = np.where(out.ms_group == 1, 0.0, bt)
            br = np.where(out.ms_group == 0, 0.0, br)
        total = br + bt
        over = total > fset.beta_max
        if np.any(over):
            scale = np.where(over, fset.beta_max / np.where(over, total, 1.0), 1.0)
            br = br * scale
            bt = bt * scale
            # kill any 1-ulp overshoot so the projection is exactly idempotent
            br = np.minimum(br, fset.beta_max)
            bt = np.where(br + bt > fset.beta_max, fset.beta_max - br, bt)

    if fset.amp_levels > 0:
        br, bt = _snap_amplitudes(br, bt, fset)

    out.beta_r, out.beta_t = br, bt
    out.theta_r = quantize_phase(out.theta_r, fset.phase_bits)
    out.theta_t = quantize_phase(out.theta_t, fset.phase_bits)

    if fset.coupling is not None:
        active = (out.beta_r > 0.0) & (out.beta_t > 0.0)
        if np.any(active):
            diff = out.theta_r - out.theta_t
            offsets = np.asarray(fset.coupling)
            # distance on the circle to each allowed offset
            dist = np.abs(np.angle(np.exp(1j * (diff[:, None] - offsets[None, :]))))
            chosen = offsets[np.argmin(dist, axis=1)]
            out.theta_t = np.where(active, wrap_phase(out.theta_r - chosen),
                                   out.theta_t)

    if profile.ts_profiles is not None:
        prof_r, prof_t = profile.ts_profiles
        out.ts_profiles = (
            project_profile(prof_r, _with_side(fset, Side.REFLECT)),
            project_profile(prof_t, _with_side(fset, Side.REFRACT)),
        )
    return out


def _with_side(fset: FeasibleSet, side: Side) -> FeasibleSet:
    return FeasibleSet(architecture=fset.architecture, beta_max=fset.beta_max,
                       phase_bits=fset.phase_bits, amp_levels=fset.amp_levels,
                       global_power_cap=fset.global_power_cap,
                       coupling=fset.coupling, forced_side=side)


def enforce_global_power(profile: RisProfile, w: Precoder, channels: ChannelSet,
                         fset: FeasibleSet, cfg: SystemConfig) -> RisProfile:
    """Scale amplitudes uniformly so the surface output power meets the cap."""
    if fset.global_power_cap is None:
        return profile
    p_out = ris_output_power(w, channels, profile, cfg)
    cap = fset.global_power_cap
    if p_out <= cap:
        return profile

    def excess(c: float) -> float:
        scaled = profile.copy()
        scaled.beta_r = profile.beta_r * c
        scaled.beta_t = profile.beta_t * c
        return ris_output_power(w, channels, scaled, cfg) - cap

    factor = brentq(excess, 0.0, 1.0, xtol=1e-10)
    out = profile.copy()
    out.beta_r = profile.beta_r * factor
    out.beta_t = profile.beta_t * factor
    return out


def ms_candidate_profile(channels: ChannelSet, cfg: SystemConfig, w: Precoder,
                         groups: np.ndarray) -> RisProfile:
    """Deterministic evaluation profile for a mode-switching assignment.

    Each element gets full amplitude on its group side with the phase that
    aligns its cascade with the direct link of the strongest same-side user.
    """
    m = cfg.n_elements
    gw = channels.bs_ris @ w.w  # (M, K)
    prof = RisProfile.zero(m)
    for side, beta, theta in ((Side.REFLECT, prof.beta_r, prof.theta_r),
                              (Side.REFRACT, prof.beta_t, prof.theta_t)):
        users = [k for k, s in enumerate(channels.side) if s == side]
        if not users:
            continue
        k = max(users, key=lambda i: float(np.abs(np.conj(channels.direct[i]) @ w.w[:, i])))
        ref_phase = np.angle(np.conj(channels.direct[k]) @ w.w[:, k])
        cascade = np.conj(channels.ris_user[k]) * gw[:, k]
        theta[:] = wrap_phase(ref_phase - np.angle(cascade))
        mask = (groups == 1) if side == Side.REFLECT else (groups == 0)
        beta[:] = np.where(mask, cfg.beta_max, 0.0)
    prof.ms_group = np.asarray(groups, dtype=int)
    return prof


def assign_ms_groups(channels: ChannelSet, cfg: SystemConfig,
                     w: Precoder) -> np.ndarray:
    """Greedy mode-switching split of elements into reflect/refract groups."""
    m = cfg.n_elements
    gw = channels.bs_ris @ w.w
    demand = {Side.REFLECT: np.zeros(m), Side.REFRACT: np.zeros(m)}
    for k, s in enumerate(channels.side):
        demand[s] += np.abs(np.conj(channels.ris_user[k]) * gw[:, k])
    groups = (demand[Side.REFLECT] >= demand[Side.REFRACT]).astype(int)

    def score(g):
        return sum_rate(w, channels, ms_candidate_profile(channels, cfg, w, g), cfg)

    best = score(groups)
    flips = 0
    improved = True
    while improved and flips < 5 * m:
        improved = False
        for i in range(m):
            trial = groups.copy()
            trial[i] = 1 - trial[i]
            s = score(trial)
            flips += 1
            if s > best:
                groups, best = trial, s
                improved = True
            if flips >= 5 * m:
                break
    return groups


def feasible(profile: RisProfile, fset: FeasibleSet, w: Precoder | None,
             channels: ChannelSet | None, cfg: SystemConfig | None,
             ) -> tuple[bool, dict[str, float]]:
    """Check every constraint; residuals report violation magnitudes."""
    if profile.ts_profiles is not None:
        prof_r, prof_t = profile.ts_profiles
        ok_r, res_r = feasible(prof_r, _with_side(fset, Side.REFLECT), w, channels, cfg)
        ok_t, res_t = feasible(prof_t, _with_side(fset, Side.REFRACT), w, channels, cfg)
        res = {f"reflect_slot.{k}": v for k, v in res_r.items()}
        res.update({f"refract_slot.{k}": v for k, v in res_t.items()})
        lam = profile.ts_fractions
        res["ts_fractions"] = abs(lam[0] + lam[1] - 1.0) if lam else 1.0
        tol = 1e-9 * max(1.0, fset.beta_max)
        return ok_r and ok_t and res["ts_fractions"] <= tol, res

    tol = 1e-9 * max(1.0, fset.beta_max)
    res: dict[str, float] = {}
    br, bt = profile.beta_r, profile.beta_t
    res["nonnegative"] = float(max(0.0, -min(br.min(), bt.min())))
    res["per_element_energy"] = float(max(0.0, np.max(br + bt) - fset.beta_max))

    if fset.architecture == Architecture.PASSIVE:
        res["unit_modulus"] = float(np.max(np.abs(br - 1.0)))
        res["reflect_only"] = float(np.max(np.abs(bt)))
    elif fset.reflect_only:
        res["reflect_only"] = float(np.max(np.abs(bt)))
    elif fset.refract_only:
        res["refract_only"] = float(np.max(np.abs(br)))

    if profile.ms_group is not None:
        v = max(np.max(np.abs(bt[profile.ms_group == 1]), initial=0.0),
                np.max(np.abs(br[profile.ms_group == 0]), initial=0.0))
        res["ms_groups"] = float(v)

    if fset.phase_bits > 0:
        qr = quantize_phase(profile.theta_r, fset.phase_bits)
        qt = quantize_phase(profile.theta_t, fset.phase_bits)
        dev = max(np.max(np.abs(np.angle(np.exp(1j * (profile.theta_r - qr))))),
                  np.max(np.abs(np.angle(np.exp(1j * (profile.theta_t - qt))))))
        res["quantization"] = float(dev)

    if fset.amp_levels > 0:
        sr, st = _snap_amplitudes(br, bt, fset)
        res["amp_levels"] = float(max(np.max(np.abs(br - sr)), np.max(np.abs(bt - st))))

    if fset.coupling is not None:
        active = (br > 0.0) & (bt > 0.0)
        if np.any(active):
            diff = (profile.theta_r - profile.theta_t)[active]
            offsets = np.asarray(fset.coupling)
            dist = np.abs(np.angle(np.exp(1j * (diff[:, None] - offsets[None, :]))))
            res["coupling"] = float(np.max(np.min(dist, axis=1)))
        else:
            res["coupling"] = 0.0

    if fset.global_power_cap is not None and w is not None and channels is not None:
        p_out = ris_output_power(w, channels, profile, cfg)
        res["global_power"] = float(max(0.0, p_out - fset.global_power_cap))

    ok = all(v <= tol for v in res.values())
    return ok, res
