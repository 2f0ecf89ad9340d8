"""Seeded instance generators used by the tests, the benchmark and the CLI demos."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .instance import Instance, min_return_threshold, with_min_return


def random_instance(rng: np.random.Generator, n: int, rank: int, k: int, gamma: float = 10.0,
                    min_return: bool = False, x_min: bool = False, kappa: float = 1.0,
                    name: str = "") -> Instance:
    """Low-rank-plus-noise covariance with returns loosely tied to risk."""
    F = rng.normal(size=(rank, n)) * rng.uniform(0.05, 0.3, size=n)
    mu = rng.normal(0.02, 0.03, size=n) + 0.1 * np.sqrt(np.sum(F * F, axis=0))
    xm = None
    if x_min:
        xm = rng.uniform(0.02, 0.6 / k, size=n)
    inst = Instance(mu=mu, k=k, gamma=gamma, kappa=kappa, cov_factor=F, x_min=xm, name=name)
    if min_return:
        inst = with_min_return(inst, min_return_threshold(inst))
    return inst


def acceptance_suite(seed: int = 2024, count: int = 50) -> list[Instance]:
    """Seeded suite: ``n`` in [4, 10], rank in [1, n], ``k`` in [1, 3];
    every second instance carries a minimum-return row and every fourth
    minimum investments."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(4, 11))
        rank = int(rng.integers(1, n + 1))
        k = int(rng.integers(1, 4))
        gamma = float(rng.choice([1.0, 10.0, 100.0]))
        out.append(
            random_instance(rng, n, rank, k, gamma=gamma, min_return=i % 2 == 1,
                            x_min=i % 4 == 0, name=f"suite{i:02d}")
        )
    return out


def dominant_instance(n: int = 8, k: int = 1, gamma: float = 100.0) -> Instance:
    """One asset with a return far above the others and its own variance."""
    mu = np.full(n, 0.01)
    mu[0] = 1.0
    mu[1:] += 0.002 * np.arange(n - 1)
    cov = np.diag(np.linspace(0.1, 0.2, n))
    return Instance(mu=mu, k=k, gamma=gamma, cov=cov, name="dominant")


def diagonal_instance(rng: np.random.Generator, n: int, k: int, gamma: float = 1.0,
                      sigma: float = 1.0, kappa: float = 1.0) -> Instance:
    """Diagonal covariance and a constant return vector."""
    var = rng.uniform(0.05, 2.0, size=n)
    mu = np.full(n, float(rng.uniform(-0.1, 0.2)))
    return Instance(mu=mu, k=k, gamma=gamma, sigma=sigma, kappa=kappa, cov=np.diag(var), name="diagonal")


def orlibrary_like(rng: np.random.Generator, n: int, factors: int = 3):
    """Means, standard deviations and a correlation matrix in the style of the OR-library sets."""
    B = rng.normal(size=(n, factors)) * rng.uniform(0.3, 0.9, size=(n, 1))
    specific = 1.0 - np.sum(B * B, axis=1) / (1.0 + np.sum(B * B, axis=1))
    B = B / np.sqrt(1.0 + np.sum(B * B, axis=1, keepdims=True))
    corr = B @ B.T + np.diag(specific)
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    sd = rng.uniform(0.02, 0.08, size=n)
    mu = 0.002 + 0.1 * sd * rng.uniform(0.0, 1.0, size=n) + rng.normal(0, 0.001, size=n)
    return mu, sd, corr


def write_orlibrary(path, mu: np.ndarray, sd: np.ndarray, corr: np.ndarray) -> None:
    n = mu.size
    lines = [f"{n}"]
    lines += [f"{mu[i]:.10g} {sd[i]:.10g}" for i in range(n)]
    for i in range(n):
        for j in range(i, n):
            lines.append(f"{i + 1} {j + 1} {corr[i, j]:.10g}")
    Path(path).write_text("\n".join(lines) + "\n")


def auto_gamma(n: int, scale: float = 100.0) -> float:
    return scale / math.sqrt(n)
