import numpy as np
import pytest

from stairdet.airlink import Constellation, Rng, draw_bits, draw_channel, modulate, noise_variance_for_snr, transmit
from stairdet.cxmat import gramian, matched_filter


def mimo_instance(seed, B=128, U=8, snr_db=10.0, order=256):
    """Seeded (G, x_mf, x, sigma2) for an i.i.d. Rayleigh uplink."""
    c = Constellation(order)
    rng = Rng(seed, (99, 0))
    bits = draw_bits(U * c.bits_per_symbol, rng)
    x = modulate(bits, c, U)
    H = draw_channel(B, U, rng)
    s2 = noise_variance_for_snr(snr_db, U, c)
    y = transmit(x, H, s2, rng)
    return gramian(H, s2), matched_filter(H, y), x, s2


@pytest.fixture
def instance():
    return mimo_instance


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A.conj().T @ A + n * np.eye(n)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
