"""Alternating optimization of the BS precoder and the RIS profile, plus the
small-instance exhaustive oracle and two-timescale (static-profile)
optimization.

Precoder block: weighted-MMSE sweeps. Profile block: projected gradient
ascent with an acceptance test, or an element-wise discrete sweep for
quantized surfaces.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .architectures import (FeasibleSet, enforce_global_power, feasible,
                            assign_ms_groups, project_profile, _with_side)
from .core import (Architecture, BudgetExceededError, ChannelSet, ConfigError,
                   DegenerateInputError, Precoder, RisProfile, Side, Strategy,
                   SolveReport, SystemConfig, TWO_PI, effective_channels_all,
                   _ris_noise_gains, sum_rate, user_rates)

LN2 = float(np.log(2.0))
_IMPROVE_EPS = 1e-12


@dataclass
class SolverOptions:
    max_outer_iters: int = 100
    tol: float = 1e-4
    inner_precoder_iters: int = 30
    profile_step_init: float = 0.1
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    power_split_grid: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    restarts: int = 3
    inner_profile_iters: int = 50
    profile_block: str = "auto"  # auto | pga | elementwise
    ts_lambda_grid: int = 101

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.inner_precoder_iters < 1:
            raise ConfigError("iteration counts must be positive")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ConfigError("backtrack_factor must be in (0, 1)")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if any(not (0.0 < f < 1.0) for f in self.power_split_grid):
            raise ConfigError("power_split_grid fractions must be in (0, 1)")
        if self.profile_block not in ("auto", "pga", "elementwise"):
            raise ConfigError(f"unknown profile_block '{self.profile_block}'")


def _user_noise(channels: ChannelSet, profile: RisProfile,
                cfg: SystemConfig) -> np.ndarray:
    return cfg.noise_rx + cfg.noise_ris * _ris_noise_gains(channels, profile)


def _mrt(h: np.ndarray, p_bs: float) -> Precoder:
    """Matched-filter init, equal power per user."""
    k = h.shape[0]
    cols = np.conj(h).T
    norms = np.linalg.norm(cols, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    w = cols / norms * np.sqrt(p_bs / k)
    return Precoder(w)


def optimize_precoder(channels: ChannelSet, profile: RisProfile,
                      cfg: SystemConfig, w_init: Precoder | None = None,
                      options: SolverOptions | None = None) -> Precoder:
    """Weighted-MMSE sum-rate precoding under the BS power cap.

    Never returns a precoder worse than `w_init` (monotone guard).
    """
    options = options or SolverOptions()
    h = effective_channels_all(channels, profile)
    if np.max(np.abs(h)) == 0.0:
        raise DegenerateInputError("all effective channels are zero")
    noise = _user_noise(channels, profile, cfg)
    p_bs = cfg.p_bs
    k = cfg.n_users

    w = w_init.w.copy() if w_init is not None else _mrt(h, p_bs).w
    best_w = w.copy()
    best_rate = _rate_of(h, w, noise)

    for _ in range(options.inner_precoder_iters):
        t = h @ w  # (K, K)
        p = np.abs(t) ** 2
        rx = p.sum(axis=1) + noise
        u = np.diag(t) / rx
        mse = 1.0 - np.abs(np.diag(t)) ** 2 / rx
        mse = np.maximum(mse, 1e-15)
        v = 1.0 / mse

        scale = v * np.abs(u) ** 2  # (K,)
        a = (h.conj().T * scale) @ h  # (N, N) Hermitian
        b = h.conj().T * (v * np.conj(u))  # (N, K)

        lam, q = np.linalg.eigh(a)
        bt = q.conj().T @ b
        bt2 = np.abs(bt) ** 2

        def power(mu):
            denom = lam[:, None] + mu
            good = denom > 0
            return float(np.sum(np.where(good, bt2 / np.where(good, denom, 1.0) ** 2, 0.0)))

        if power(0.0) <= p_bs:
            mu = 0.0
        else:
            # power(mu) is strictly decreasing; expand hi until bracketed
            hi = np.sqrt(bt2.sum() / p_bs) + 1e-12
            while power(hi) > p_bs:
                hi *= 2.0
            mu = brentq(lambda x: power(x) - p_bs, 0.0, hi, xtol=1e-300, rtol=1e-13)
        denom = lam[:, None] + mu
        denom = np.where(denom > 0, denom, np.inf)
        w_new = q @ (bt / denom)
        rate = _rate_of(h, w_new, noise)
        if rate > best_rate + _IMPROVE_EPS:
            improvement = rate - best_rate
            best_rate, best_w = rate, w_new.copy()
            w = w_new
            if improvement < options.tol * max(best_rate, 1e-12):
                break
        else:
            break
    return Precoder(best_w)


def _rate_of(h: np.ndarray, w: np.ndarray, noise: np.ndarray) -> float:
    t = h @ w
    p = np.abs(t) ** 2
    sig = np.diag(p)
    denom = p.sum(axis=1) - sig + noise
    return float(np.sum(np.log2(1.0 + sig / denom)))


def sum_rate_profile_gradient(channels: ChannelSet, w: Precoder,
                              cfg: SystemConfig, profile: RisProfile,
                              ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradient of sum_rate w.r.t. (beta_r, theta_r, beta_t, theta_t)."""
    m = profile.n_elements
    g = channels.ris_user  # (K, M)
    gw = channels.bs_ris @ w.w  # (M, K)
    c_r = profile.coefficients(Side.REFLECT)
    c_t = profile.coefficients(Side.REFRACT)
    reflect = np.array([s == Side.REFLECT for s in channels.side])
    c_sel = np.where(reflect[:, None], c_r[None, :], c_t[None, :])
    beta_sel = np.where(reflect[:, None], profile.beta_r[None, :],
                        profile.beta_t[None, :])

    h = effective_channels_all(channels, profile)
    t = h @ w.w  # (K, K)
    p = np.abs(t) ** 2
    sig = np.diag(p)
    noise = _user_noise(channels, profile, cfg)
    d = p.sum(axis=1) - sig + noise

    denom = d * (d + sig) * LN2
    f = -sig[:, None] / denom[:, None] * np.ones_like(p)
    np.fill_diagonal(f, d / denom)

    b = np.einsum("km,mj->kjm", np.conj(g), gw)  # dT[k,j]/dc_m
    e = np.einsum("kj,kjm->km", f * np.conj(t), b)  # (K, M)

    grad_theta_u = 2.0 * np.real(e * 1j * c_sel)
    safe_beta = np.maximum(beta_sel, 1e-12)
    grad_beta_u = np.real(e * c_sel) / safe_beta
    # surface-noise term: d(noise_k)/d(beta_m^{side(k)})
    grad_beta_u = grad_beta_u - (sig / (d * (d + sig) * LN2))[:, None] * (
        cfg.noise_ris * np.abs(g) ** 2)

    g_beta_r = grad_beta_u[reflect].sum(axis=0) if reflect.any() else np.zeros(m)
    g_theta_r = grad_theta_u[reflect].sum(axis=0) if reflect.any() else np.zeros(m)
    g_beta_t = grad_beta_u[~reflect].sum(axis=0) if (~reflect).any() else np.zeros(m)
    g_theta_t = grad_theta_u[~reflect].sum(axis=0) if (~reflect).any() else np.zeros(m)
    return g_beta_r, g_theta_r, g_beta_t, g_theta_t


def _project_full(profile: RisProfile, pairs, cfg: SystemConfig,
                  fset: FeasibleSet) -> RisProfile:
    out = project_profile(profile, fset)
    if fset.global_power_cap is not None:
        for channels, w in pairs:
            out = enforce_global_power(out, w, channels, fset, cfg)
    return out


def _mean_rate(pairs, profile: RisProfile, cfg: SystemConfig) -> float:
    return float(np.mean([sum_rate(w, ch, profile, cfg) for ch, w in pairs]))


def _optimize_profile_multi(pairs, cfg: SystemConfig, fset: FeasibleSet,
                            profile_init: RisProfile,
                            options: SolverOptions) -> RisProfile:
    block = options.profile_block
    if block == "auto":
        block = "elementwise" if (fset.phase_bits > 0 and fset.amp_levels > 0) else "pga"
    if block == "elementwise":
        return _elementwise_profile(pairs, cfg, fset, profile_init, options)

    cur = _project_full(profile_init, pairs, cfg, fset)
    best = _mean_rate(pairs, cur, cfg)
    step = options.profile_step_init
    coupled = (fset.coupling is not None
               and not fset.reflect_only and not fset.refract_only)
    for _ in range(options.inner_profile_iters):
        grads = [sum_rate_profile_gradient(ch, w, cfg, cur) for ch, w in pairs]
        gbr, gtr, gbt, gtt = (np.mean([g[i] for g in grads], axis=0) for i in range(4))
        if coupled:
            # theta_t is tied to theta_r by a fixed allowed offset, so move
            # theta_r along the combined phase gradient; the coupling snap in
            # the projection is then a no-op instead of undoing the step.
            delta = _snap_offsets(cur.theta_r - cur.theta_t, fset.coupling)
            gtr = gtr + gtt
            gtt = np.zeros_like(gtt)
        norm = np.sqrt(np.sum(gbr**2) + np.sum(gtr**2) + np.sum(gbt**2) + np.sum(gtt**2))
        if norm < 1e-12:
            break
        s = step
        accepted = False
        for _ in range(options.max_backtracks):
            theta_r = cur.theta_r + s * gtr / norm
            theta_t = theta_r - delta if coupled else cur.theta_t + s * gtt / norm
            cand = RisProfile(cur.beta_r + s * gbr / norm,
                              theta_r,
                              cur.beta_t + s * gbt / norm,
                              theta_t,
                              ms_group=cur.ms_group)
            cand = _project_full(cand, pairs, cfg, fset)
            r = _mean_rate(pairs, cand, cfg)
            if r > best + _IMPROVE_EPS:
                cur, best = cand, r
                step = min(s * 2.0, 10.0 * options.profile_step_init)
                accepted = True
                break
            s *= options.backtrack_factor
        if not accepted:
            break
    if coupled:
        cur = _coupled_offset_sweep(pairs, cfg, fset, cur, best)
    return cur


def _snap_offsets(diff: np.ndarray, coupling: tuple[float, ...]) -> np.ndarray:
    """Nearest allowed reflect/refract phase offset per element."""
    offs = np.asarray(coupling)
    dist = np.abs(np.angle(np.exp(1j * (diff[:, None] - offs[None, :]))))
    return offs[np.argmin(dist, axis=1)]


def _coupled_offset_sweep(pairs, cfg: SystemConfig, fset: FeasibleSet,
                          cur: RisProfile, best: float) -> RisProfile:
    """Greedy per-element sweep over the discrete coupling offsets."""
    offs = np.asarray(fset.coupling)
    if len(offs) < 2:
        return cur
    for i in range(cur.n_elements):
        if cur.beta_r[i] <= 0.0 or cur.beta_t[i] <= 0.0:
            continue
        for off in offs:
            cand = cur.copy()
            # phase-only change: amplitudes and hence the surface output
            # power are untouched, so no re-projection is needed
            cand.theta_t[i] = float(np.mod(cand.theta_r[i] - off, TWO_PI))
            r = _mean_rate(pairs, cand, cfg)
            if r > best + _IMPROVE_EPS:
                cur, best = cand, r
    return cur


def _element_choices(fset: FeasibleSet, phase_levels: int, amp_levels: int,
                     ) -> list[tuple[float, float, float, float]]:
    """Discrete per-element (beta_r, theta_r, beta_t, theta_t) candidates."""
    phases = [TWO_PI * i / phase_levels for i in range(phase_levels)]
    if fset.architecture == Architecture.PASSIVE:
        amps_r, amps_t = [1.0], [0.0]
    else:
        grid = list(np.linspace(0.0, fset.beta_max, amp_levels)) if amp_levels > 1 \
            else [0.0]
        amps_r = [0.0] if fset.refract_only else grid
        amps_t = [0.0] if fset.reflect_only else grid
    choices = []
    for br, bt in itertools.product(amps_r, amps_t):
        if br + bt > fset.beta_max + 1e-12:
            continue
        tr_opts = phases if br > 0 else [0.0]
        tt_opts = phases if bt > 0 else [0.0]
        for tr, tt in itertools.product(tr_opts, tt_opts):
            if (fset.coupling is not None and br > 0 and bt > 0):
                d = np.angle(np.exp(1j * (tr - tt)))
                if not any(abs(np.angle(np.exp(1j * (d - off)))) < 1e-9
                           for off in fset.coupling):
                    continue
            choices.append((br, tr, bt, tt))
    return choices


def _elementwise_profile(pairs, cfg: SystemConfig, fset: FeasibleSet,
                         profile_init: RisProfile,
                         options: SolverOptions) -> RisProfile:
    """Coordinate sweep fixing all elements but one, trying every discrete
    state of the free element."""
    cur = _project_full(profile_init, pairs, cfg, fset)
    phase_levels = 2 ** fset.phase_bits if fset.phase_bits > 0 else 0
    if phase_levels == 0 or fset.amp_levels == 0:
        raise ConfigError("elementwise profile block needs phase_bits and amp_levels")
    choices = _element_choices(fset, phase_levels, fset.amp_levels)
    best = _mean_rate(pairs, cur, cfg)
    m = cur.n_elements
    for _ in range(options.inner_profile_iters):
        improved = False
        for i in range(m):
            for br, tr, bt, tt in choices:
                cand = cur.copy()
                cand.beta_r[i], cand.theta_r[i] = br, tr
                cand.beta_t[i], cand.theta_t[i] = bt, tt
                if fset.global_power_cap is not None:
                    cand = _project_full(cand, pairs, cfg, fset)
                r = _mean_rate(pairs, cand, cfg)
                if r > best + _IMPROVE_EPS:
                    cur, best = cand, r
                    improved = True
        if not improved:
            break
    return cur


def optimize_profile(channels: ChannelSet, w: Precoder, cfg: SystemConfig,
                     fset: FeasibleSet, profile_init: RisProfile,
                     options: SolverOptions | None = None) -> RisProfile:
    """Profile block of the alternating scheme; output is always feasible and
    never worse than the (projected) initial profile."""
    options = options or SolverOptions()
    return _optimize_profile_multi([(channels, w)], cfg, fset, profile_init, options)


def _random_profile(m: int, fset: FeasibleSet, rng: np.random.Generator) -> RisProfile:
    theta_r = rng.uniform(0.0, TWO_PI, m)
    theta_t = rng.uniform(0.0, TWO_PI, m)
    u = rng.uniform(0.0, fset.beta_max / 2.0, m)
    return RisProfile(u / 2.0, theta_r, u / 2.0, theta_t)


def _ensemble_ao(ensemble: list[ChannelSet], cfg: SystemConfig,
                 fset: FeasibleSet, options: SolverOptions,
                 rng: np.random.Generator):
    """One AO run (single restart, fixed power split) over an ensemble of
    channel draws; the profile is shared, precoders are per draw."""
    m = cfg.n_elements
    prof = _random_profile(m, fset, rng)
    prof = project_profile(prof, fset)

    if cfg.strategy == Strategy.MS:
        w0 = optimize_precoder(ensemble[0], prof, cfg, None, options)
        prof.ms_group = assign_ms_groups(ensemble[0], cfg, w0)
        prof = project_profile(prof, fset)

    ws: list[Precoder | None] = [None] * len(ensemble)
    best_rate = -np.inf
    best_state = None
    trace = []
    for outer in range(options.max_outer_iters):
        ws = [optimize_precoder(ch, prof, cfg, ws[e], options)
              for e, ch in enumerate(ensemble)]
        pairs = list(zip(ensemble, ws))
        prof = _project_full(prof, pairs, cfg, fset)
        prof = _optimize_profile_multi(pairs, cfg, fset, prof, options)
        rate = _mean_rate(pairs, prof, cfg)
        if rate > best_rate:
            best_rate = rate
            best_state = (list(ws), prof.copy())
        trace.append(best_rate)
        if outer > 0 and trace[-1] - trace[-2] <= options.tol * max(abs(trace[-2]), 1e-12):
            break
    ws, prof = best_state
    return ws, prof, np.asarray(trace), best_rate


def _split_grid(cfg: SystemConfig, fset: FeasibleSet,
                options: SolverOptions) -> list[float]:
    if cfg.architecture.amplifying and fset.global_power_cap is not None:
        return list(options.power_split_grid)
    return [1.0]


def _run_ensemble(ensemble: list[ChannelSet], cfg: SystemConfig,
                  fset: FeasibleSet, options: SolverOptions, seed: int):
    """Power-split grid x restarts around _ensemble_ao; deterministic argmax."""
    t0 = time.perf_counter()
    splits = _split_grid(cfg, fset, options)
    best = None
    for si, frac in enumerate(splits):
        if frac == 1.0:
            cfg_s, fset_s = cfg, fset
            if cfg.architecture.amplifying and cfg.p_bs < cfg.p_total and \
                    fset.global_power_cap is None:
                cfg_s = replace(cfg, p_bs=cfg.p_total, p_ris=0.0)
        else:
            cfg_s = replace(cfg, p_bs=frac * cfg.p_total,
                            p_ris=(1.0 - frac) * cfg.p_total)
            fset_s = replace(fset, global_power_cap=cfg_s.p_ris)
        for r in range(options.restarts):
            rng = np.random.default_rng([seed & 0x7FFFFFFF, si, r])
            ws, prof, trace, rate = _ensemble_ao(ensemble, cfg_s, fset_s,
                                                 options, rng)
            if best is None or rate > best[0] + _IMPROVE_EPS:
                best = (rate, ws, prof, trace, frac, cfg_s, fset_s)
    rate, ws, prof, trace, frac, cfg_s, fset_s = best
    wall = time.perf_counter() - t0
    return rate, ws, prof, trace, frac, cfg_s, fset_s, wall


def alternating_optimize(channels: ChannelSet, cfg: SystemConfig,
                         fset: FeasibleSet, options: SolverOptions | None = None,
                         seed: int = 0):
    """Joint precoder/profile optimization for one channel draw.

    Returns (precoder, profile, report). For the TS strategy the precoder is
    a pair of per-slot precoders.
    """
    options = options or SolverOptions()
    if cfg.strategy == Strategy.TS:
        return _ts_optimize(channels, cfg, fset, options, seed)
    rate, ws, prof, trace, frac, cfg_s, fset_s, wall = _run_ensemble(
        [channels], cfg, fset, options, seed)
    w = ws[0]
    _, residuals = feasible(prof, fset_s, w, channels, cfg_s)
    residuals["bs_power"] = max(0.0, w.power - cfg_s.p_bs)
    report = SolveReport(
        objective_trace=trace,
        final_rates=user_rates(w, channels, prof, cfg_s),
        constraint_residuals=residuals,
        iterations=len(trace),
        wall_time=wall,
        seed=seed,
        power_split=frac if len(_split_grid(cfg, fset, options)) > 1 else None,
        extra={"p_bs": cfg_s.p_bs, "p_ris": cfg_s.p_ris},
    )
    return w, prof, report


def _ts_optimize(channels: ChannelSet, cfg: SystemConfig, fset: FeasibleSet,
                 options: SolverOptions, seed: int):
    """Time switching: independent reflect-only and refract-only slot solves,
    then a 1-D grid over the slot time fractions."""
    t0 = time.perf_counter()
    cfg_es = replace(cfg, strategy=Strategy.ES)
    results = {}
    for idx, side in enumerate((Side.REFLECT, Side.REFRACT)):
        fs = _with_side(fset, side)
        rate, ws, prof, trace, frac, cfg_s, fset_s, _ = _run_ensemble(
            [channels], cfg_es, fs, options, seed * 2 + idx)
        results[side] = (rate, ws[0], prof, trace, frac, cfg_s)
    r_rate, w_r, prof_r, trace_r, frac_r, cfg_r = results[Side.REFLECT]
    t_rate, w_t, prof_t, trace_t, frac_t, cfg_t = results[Side.REFRACT]

    lams = np.linspace(0.0, 1.0, options.ts_lambda_grid)
    scores = lams * r_rate + (1.0 - lams) * t_rate
    lam = float(lams[int(np.argmax(scores))])

    prof = RisProfile.zero(cfg.n_elements)
    prof.ts_fractions = (lam, 1.0 - lam)
    prof.ts_profiles = (prof_r, prof_t)

    n = max(len(trace_r), len(trace_t))
    pad = lambda tr: np.concatenate([tr, np.full(n - len(tr), tr[-1])])
    trace = lam * pad(trace_r) + (1.0 - lam) * pad(trace_t)

    w = (w_r, w_t)
    _, residuals = feasible(prof, fset, w_r, channels, cfg_r)
    rates = lam * user_rates(w_r, channels, prof_r, cfg_r) \
        + (1.0 - lam) * user_rates(w_t, channels, prof_t, cfg_t)
    report = SolveReport(
        objective_trace=trace,
        final_rates=rates,
        constraint_residuals=residuals,
        iterations=len(trace),
        wall_time=time.perf_counter() - t0,
        seed=seed,
        power_split=None,
        extra={"lambda_reflect": lam, "p_bs": cfg_r.p_bs, "p_ris": cfg_r.p_ris},
    )
    return w, prof, report


ORACLE_BUDGET = 10 ** 7


def exhaustive_oracle(channels: ChannelSet, cfg: SystemConfig,
                      fset: FeasibleSet, phase_levels: int, amp_levels: int,
                      options: SolverOptions | None = None):
    """Global maximum over the discrete profile set by full enumeration.

    Refuses instances whose enumeration count exceeds the budget.
    """
    options = options or SolverOptions()
    if fset.global_power_cap is not None:
        raise ConfigError("exhaustive_oracle does not support a global power cap")
    m = cfg.n_elements
    count = (phase_levels * amp_levels) ** (2 * m)
    if count > ORACLE_BUDGET:
        raise BudgetExceededError(count, ORACLE_BUDGET)

    choices = _element_choices(fset, max(phase_levels, 1), amp_levels)
    best = None
    for combo in itertools.product(choices, repeat=m):
        arr = np.asarray(combo)  # (M, 4)
        prof = RisProfile(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
        try:
            w = optimize_precoder(channels, prof, cfg, None, options)
        except DegenerateInputError:
            continue
        rate = sum_rate(w, channels, prof, cfg)
        if best is None or rate > best[2] + _IMPROVE_EPS:
            best = (prof, w, rate)
    if best is None:
        raise DegenerateInputError("no feasible profile admits a nonzero channel")
    return best


def two_timescale_optimize(channel_ensemble: list[ChannelSet],
                           cfg: SystemConfig, fset: FeasibleSet,
                           options: SolverOptions | None = None,
                           seed: int = 0):
    """Long-term static profile on the sample-average rate, then per-draw
    short-term precoding with the profile frozen."""
    options = options or SolverOptions()
    if not channel_ensemble:
        raise ConfigError("channel ensemble must contain at least one draw")
    if cfg.strategy == Strategy.TS:
        raise ConfigError("two-timescale optimization does not support TS")
    t0 = time.perf_counter()
    rate, ws, prof, trace, frac, cfg_s, fset_s, _ = _run_ensemble(
        channel_ensemble, cfg, fset, options, seed)
    precoders = [optimize_precoder(ch, prof, cfg_s, ws[e], options)
                 for e, ch in enumerate(channel_ensemble)]
    per_draw = np.array([sum_rate(w, ch, prof, cfg_s)
                         for ch, w in zip(channel_ensemble, precoders)])
    _, residuals = feasible(prof, fset_s, precoders[0], channel_ensemble[0], cfg_s)
    report = SolveReport(
        objective_trace=trace,
        final_rates=user_rates(precoders[0], channel_ensemble[0], prof, cfg_s),
        constraint_residuals=residuals,
        iterations=len(trace),
        wall_time=time.perf_counter() - t0,
        seed=seed,
        power_split=frac if len(_split_grid(cfg, fset, options)) > 1 else None,
        extra={"average_rate": float(per_draw.mean()),
               "per_draw_rates": per_draw,
               "p_bs": cfg_s.p_bs, "p_ris": cfg_s.p_ris},
    )
    return prof, precoders, report
