import numpy as np
import pytest

CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)

from mfris.core import (Architecture, ChannelSet, Precoder, RisProfile, Side,
                        SystemConfig)


def small_config(arch=Architecture.MF_IDEAL, n=2, k=2, m=3, p_total=0.1,
                 noise_rx=1e-11, noise_ris=1e-12, beta_max=4.0, **kw):
    amp = Architecture(arch).amplifying
    return SystemConfig(
        n_antennas=n, n_users=k, n_elements=m,
        p_total=p_total,
        p_bs=p_total / 2 if amp else p_total,
        p_ris=p_total / 2 if amp else 0.0,
        noise_rx=noise_rx,
        noise_ris=noise_ris if amp else 0.0,
        beta_max=beta_max if amp else 1.0,
        architecture=arch, **kw)


def random_channels(cfg, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)

    def c(shape):
        return scale * (rng.standard_normal(shape)
                        + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    sides = [Side.REFLECT if i % 2 == 0 else Side.REFRACT
             for i in range(cfg.n_users)]
    return ChannelSet(bs_ris=c((cfg.n_elements, cfg.n_antennas)),
                      ris_user=c((cfg.n_users, cfg.n_elements)),
                      direct=c((cfg.n_users, cfg.n_antennas)),
                      side=sides)


def random_profile(m, beta_max=4.0, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, beta_max, m)
    split = rng.uniform(0.0, 1.0, m)
    return RisProfile(u * split, rng.uniform(0, 2 * np.pi, m),
                      u * (1 - split), rng.uniform(0, 2 * np.pi, m))


def random_precoder(cfg, seed=0):
    rng = np.random.default_rng(seed)
    w = (rng.standard_normal((cfg.n_antennas, cfg.n_users))
         + 1j * rng.standard_normal((cfg.n_antennas, cfg.n_users)))
    w *= np.sqrt(cfg.p_bs) / np.linalg.norm(w)
    return Precoder(w)


@pytest.fixture
def cfg():
    return small_config()


@pytest.fixture
def channels(cfg):
    return random_channels(cfg, seed=1)
