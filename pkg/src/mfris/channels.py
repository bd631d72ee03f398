"""Seeded channel generation from geometry: path loss, Rician fading,
half-space classification, and placement/rotation grid search."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (ChannelSet, DegenerateGeometryError, Side, SystemConfig,
                   db_to_linear, wrap_phase)


@dataclass
class GeometryScene:
    """Node positions (meters) plus per-link-class propagation parameters.

    Rician K-factors are linear (0 = Rayleigh). ris_rotation is the azimuth
    of the surface normal; the surface plane is spanned by the in-plane
    tangent and the vertical axis.
    """

    bs_pos: np.ndarray
    ris_pos: np.ndarray
    user_pos: np.ndarray  # (K, 3)
    ris_rotation: float = 0.0
    pl_exp_direct: float = 3.5
    pl_exp_bs_ris: float = 2.2
    pl_exp_ris_user: float = 2.2
    pathloss_ref_db: float = -30.0
    rician_k_direct: float = 0.0
    rician_k_bs_ris: float = 2.0
    rician_k_ris_user: float = 2.0

    def __post_init__(self):
        self.bs_pos = np.asarray(self.bs_pos, dtype=float)
        self.ris_pos = np.asarray(self.ris_pos, dtype=float)
        self.user_pos = np.atleast_2d(np.asarray(self.user_pos, dtype=float))
        self.ris_rotation = float(wrap_phase(self.ris_rotation))

    @property
    def normal(self) -> np.ndarray:
        return np.array([np.cos(self.ris_rotation), np.sin(self.ris_rotation), 0.0])


def default_scene(n_users: int = 2) -> GeometryScene:
    """Default layout: weak direct link, users on either side of the surface."""
    ris = np.array([50.0, 10.0, 2.0])
    n = np.array([1.0, 0.0, 0.0])
    offsets = []
    for k in range(n_users):
        sign = -1.0 if k % 2 == 0 else 1.0  # alternate reflect/refract side
        offsets.append(sign * 3.0 * n + np.array([0.0, 1.0 + k, -1.0]))
    return GeometryScene(
        bs_pos=np.zeros(3),
        ris_pos=ris,
        user_pos=ris + np.asarray(offsets),
    )


def pathloss_db(scene: GeometryScene, distance: float, exponent: float) -> float:
    """Power path loss in dB at the given distance (reference at 1 m)."""
    return scene.pathloss_ref_db - 10.0 * exponent * np.log10(distance)


def classify_side(scene: GeometryScene, user_pos) -> Side:
    """Reflect iff the user shares the BS half-space of the RIS plane."""
    n = scene.normal
    d_user = float(np.dot(np.asarray(user_pos, dtype=float) - scene.ris_pos, n))
    d_bs = float(np.dot(scene.bs_pos - scene.ris_pos, n))
    if d_user == 0.0:
        raise DegenerateGeometryError("user lies exactly on the RIS plane")
    if d_bs == 0.0:
        raise DegenerateGeometryError("BS lies exactly on the RIS plane")
    return Side.REFLECT if d_user * d_bs > 0.0 else Side.REFRACT


def _upa_shape(m: int) -> tuple[int, int]:
    """Near-square factorization of the element count."""
    rows = int(np.sqrt(m))
    while m % rows != 0:
        rows -= 1
    return rows, m // rows


def _bs_steering(n: int, direction: np.ndarray) -> np.ndarray:
    """Half-wavelength ULA along the y axis."""
    return np.exp(1j * np.pi * np.arange(n) * direction[1])


def _ris_steering(m: int, scene: GeometryScene, direction: np.ndarray) -> np.ndarray:
    """Half-wavelength UPA spanning the surface tangent and vertical axes."""
    rows, cols = _upa_shape(m)
    tangent = np.array([-np.sin(scene.ris_rotation), np.cos(scene.ris_rotation), 0.0])
    ut = float(np.dot(direction, tangent))
    uz = float(direction[2])
    pr = np.exp(1j * np.pi * np.arange(rows) * uz)
    pc = np.exp(1j * np.pi * np.arange(cols) * ut)
    return np.kron(pr, pc)


def _rician(los: np.ndarray, pl_db: float, kappa: float,
            rng: np.random.Generator) -> np.ndarray:
    amp = np.sqrt(db_to_linear(pl_db))
    nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2.0)
    return amp * (np.sqrt(kappa / (1.0 + kappa)) * los
                  + np.sqrt(1.0 / (1.0 + kappa)) * nlos)


def _unit(v: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(v)
    if d <= 0.0:
        raise DegenerateGeometryError("coincident nodes give a zero-length link")
    return v / d


def generate_channels(cfg: SystemConfig, scene: GeometryScene, seed: int) -> ChannelSet:
    """Draw one Rician channel realization; deterministic in (cfg, scene, seed).

    Each link uses its own child generator keyed by (seed, link tag) so that
    the direct channels are identical across element counts for a given seed
    (common random numbers for element sweeps).
    """
    n, m, k = cfg.n_antennas, cfg.n_elements, cfg.n_users
    if scene.user_pos.shape[0] != k:
        raise DegenerateGeometryError(
            f"scene has {scene.user_pos.shape[0]} user positions, config expects {k}")

    direct = np.empty((k, n), dtype=complex)
    for i in range(k):
        v = scene.user_pos[i] - scene.bs_pos
        d = float(np.linalg.norm(v))
        los = _bs_steering(n, _unit(v))
        direct[i] = _rician(los, pathloss_db(scene, d, scene.pl_exp_direct),
                            scene.rician_k_direct,
                            np.random.default_rng([seed, 0, i]))

    ris_user = np.empty((k, m), dtype=complex)
    for i in range(k):
        v = scene.user_pos[i] - scene.ris_pos
        d = float(np.linalg.norm(v))
        los = _ris_steering(m, scene, _unit(v))
        ris_user[i] = _rician(los, pathloss_db(scene, d, scene.pl_exp_ris_user),
                              scene.rician_k_ris_user,
                              np.random.default_rng([seed, 1, i]))

    v_br = scene.ris_pos - scene.bs_pos
    d_br = float(np.linalg.norm(v_br))
    u = _unit(v_br)
    los_g = np.outer(_ris_steering(m, scene, -u), np.conj(_bs_steering(n, u)))
    g_mat = _rician(los_g, pathloss_db(scene, d_br, scene.pl_exp_bs_ris),
                    scene.rician_k_bs_ris, np.random.default_rng([seed, 2]))

    sides = [classify_side(scene, scene.user_pos[i]) for i in range(k)]
    return ChannelSet(bs_ris=g_mat, ris_user=ris_user, direct=direct, side=sides)


def placement_search(cfg: SystemConfig, base_scene: GeometryScene,
                     candidates: list[tuple[np.ndarray, float]],
                     evaluator) -> tuple[tuple[np.ndarray, float], list[dict]]:
    """Grid search over candidate (position, rotation) pairs.

    `evaluator` maps a scene to a score (expected sum-rate over a fixed seed
    set); failed candidates are excluded from the argmax. Ties break toward
    the lowest candidate index.
    """
    if not candidates:
        raise ValueError("candidate list is empty")
    table = []
    best_idx, best_score = None, -np.inf
    for idx, (pos, rot) in enumerate(candidates):
        scene = replace(base_scene, ris_pos=np.asarray(pos, dtype=float),
                        ris_rotation=float(rot))
        try:
            score = float(evaluator(scene))
        except Exception as exc:  # noqa: BLE001 - per-candidate isolation
            table.append({"index": idx, "position": pos, "rotation": rot,
                          "score": None, "error": str(exc)})
            continue
        table.append({"index": idx, "position": pos, "rotation": rot,
                      "score": score, "error": None})
        if score > best_score:
            best_idx, best_score = idx, score
    if best_idx is None:
        raise RuntimeError("all placement candidates failed evaluation")
    return candidates[best_idx], table
