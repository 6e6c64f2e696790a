import math

import numpy as np
import pytest

from pulsedopto.model import SystemParams


def rot(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s], [-s, c]])


def embed(n, i, j, block):
    """4x4 (2-mode) block acting on modes i, j of an n-mode system."""
    S = np.eye(2 * n)
    idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
    S[np.ix_(idx, idx)] = block
    return S


def random_symplectic(rng, n=2, layers=3):
    S = np.eye(2 * n)
    for _ in range(layers):
        for i in range(n):
            r = rng.uniform(-1.0, 1.0)
            L = np.eye(2 * n)
            L[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = rot(rng.uniform(0, 2 * np.pi)) @ np.diag(
                [math.exp(r), math.exp(-r)]
            )
            S = L @ S
        for i in range(n - 1):
            t = rng.uniform(0, np.pi)
            c, s = math.cos(t), math.sin(t)
            bs = np.block([[c * np.eye(2), s * np.eye(2)], [-s * np.eye(2), c * np.eye(2)]])
            S = embed(n, i, i + 1, bs) @ S
    return S


def random_physical_cm(rng, n=2):
    nus = 1.0 + rng.exponential(1.0, size=n)
    D = np.diag(np.repeat(nus, 2))
    S = random_symplectic(rng, n)
    return S @ D @ S.T


def tms(G):
    """Pure two-mode squeezed vacuum with gain G, correlations diag(+c, -c)."""
    a = 2 * G - 1
    c = 2 * math.sqrt(G * (G - 1))
    V = np.zeros((4, 4))
    V[:2, :2] = V[2:, 2:] = a * np.eye(2)
    V[:2, 2:] = V[2:, :2] = c * np.diag([1.0, -1.0])
    return V


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def table1():
    return SystemParams.from_rates(Gamma=1e-3)
