import numpy as np
import pytest

from mesomem import Configuration, resample_arclength


@pytest.fixture(scope="session")
def unit_circle_1024():
    return resample_arclength("circle:1", 1024)


@pytest.fixture(scope="session")
def unit_circle_config(unit_circle_1024):
    c = unit_circle_1024
    return Configuration(c, c.normal.copy(), np.ones(c.n, dtype=int), np.ones(c.n))


def random_smooth_curve(rng, n=512, modes=5, wobble=0.08):
    """Random star-shaped smooth closed curve, arclength-resampled."""
    t = 2.0 * np.pi * np.arange(4 * n) / (4 * n)
    pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    for k in range(2, 2 + modes):
        ax, ay = wobble * rng.standard_normal(2) / k**2
        pts[:, 0] += ax * np.cos(k * t + rng.random())
        pts[:, 1] += ay * np.sin(k * t + rng.random())
    return resample_arclength(pts, n)


def random_configuration(rng, n=512, max_tilt=0.5):
    """Random valid configuration: smooth curve, tilted director, arc phases."""
    curve = random_smooth_curve(rng, n=n)
    s = 2.0 * np.pi * np.arange(n) / n
    ang = max_tilt * rng.standard_normal() * np.sin(s * rng.integers(1, 4) + rng.random())
    ca, sa = np.cos(ang), np.sin(ang)
    nu = curve.normal
    theta = np.stack([ca * nu[:, 0] - sa * nu[:, 1],
                      sa * nu[:, 0] + ca * nu[:, 1]], axis=1)
    chi = (np.sin(s * rng.integers(1, 4) + 2 * np.pi * rng.random()) > 0).astype(int)
    mass = 0.6 + 0.6 * rng.random() * np.abs(np.sin(s + 2 * np.pi * rng.random()))
    return Configuration(curve, theta, chi, mass)
