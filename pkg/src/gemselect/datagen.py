"""Deterministic generators for the two synthetic benchmark families.

Family 1: 5 informative columns from a 3-component Gaussian mixture
(means +a*1, -a*1, 0, identity covariance) padded with p independent
standard-normal noise columns. Family 2: 2000 samples x 14 columns
where only the first two carry the 4-component mixture, columns 3-11
are noisy linear images of them, and the last three are label-free
Gaussians.

All draws flow from one integer seed through numpy's default generator
in a fixed order, so a (params, seed) pair pins the dataset exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Scenario1Params:
    n: int
    alpha: float
    noise_dims: int
    n_informative: int = 5
    k_true: int = 3

    def __post_init__(self):
        if self.n < self.k_true:
            raise ValueError("need at least one sample per component")
        if self.alpha <= 0 or self.noise_dims < 0:
            raise ValueError("alpha must be positive and noise_dims nonnegative")

    @property
    def d(self) -> int:
        return self.n_informative + self.noise_dims


@dataclass
class Dataset:
    X: np.ndarray
    feature_names: list[str]
    labels: np.ndarray  # evaluation only, never used in training
    informative: tuple[int, ...]
    k_true: int
    seed: int
    params: dict

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def gen_dataset1(params: Scenario1Params, seed: int) -> Dataset:
    """Gaussian mixture with informative and pure-noise columns."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, params.k_true, size=params.n)
    means = np.vstack(
        [
            params.alpha * np.ones(params.n_informative),
            -params.alpha * np.ones(params.n_informative),
            np.zeros(params.n_informative),
        ]
    )
    informative = means[labels] + rng.standard_normal((params.n, params.n_informative))
    noise = rng.standard_normal((params.n, params.noise_dims))
    X = np.hstack([informative, noise])
    names = [f"x{j + 1}" for j in range(params.d)]
    return Dataset(
        X,
        names,
        labels,
        tuple(range(params.n_informative)),
        params.k_true,
        int(seed),
        {"family": 1, "n": params.n, "alpha": params.alpha, "noise_dims": params.noise_dims},
    )


# column generator for the (rotated) covariance blocks of family 2:
# each block is sampled as eps = Rot(theta) @ diag(sqrt(variances)) @ z
_D2_OFFSET = np.array([0.0, 0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4, 2.8])
_D2_COEF = np.array(
    [
        [0.5, 2.0, 0.0, -1.0, 2.0, 0.5, 4.0, 3.0, 2.0],
        [1.0, 0.0, 3.0, 2.0, -4.0, 0.0, 0.5, 0.0, 1.0],
    ]
)
_D2_MEANS = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 2.0], [4.0, 2.0]])
_D2_TAIL_MEAN = np.array([3.2, 3.6, 4.0])


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _d2_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((n, 9))
    eps = np.empty_like(z)
    eps[:, 0:3] = z[:, 0:3]
    eps[:, 3:5] = np.sqrt(0.5) * z[:, 3:5]
    eps[:, 5:7] = z[:, 5:7] @ (_rot(np.pi / 3) @ np.diag(np.sqrt([1.0, 3.0]))).T
    eps[:, 7:9] = z[:, 7:9] @ (_rot(np.pi / 6) @ np.diag(np.sqrt([2.0, 6.0]))).T
    return eps


def gen_dataset2(seed: int, n: int = 2000) -> Dataset:
    """Redundant-variable benchmark: 2 informative columns, 9 linearly
    dependent ones with block-structured noise, 3 independent tails."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, size=n)
    lead = _D2_MEANS[labels] + rng.standard_normal((n, 2))
    dependent = _D2_OFFSET[None, :] + lead @ _D2_COEF + _d2_noise(rng, n)
    tail = _D2_TAIL_MEAN[None, :] + rng.standard_normal((n, 3))
    X = np.hstack([lead, dependent, tail])
    names = [f"x{j + 1}" for j in range(14)]
    return Dataset(X, names, labels, (0, 1), 4, int(seed), {"family": 2, "n": n})


SCENARIOS = {
    "s1": Scenario1Params(30, 0.6, 20),
    "s2": Scenario1Params(30, 1.7, 20),
    "s3": Scenario1Params(300, 0.6, 20),
    "s4": Scenario1Params(300, 1.7, 20),
    "s5": Scenario1Params(300, 1.7, 95),
}


def scenario_clusters(name: str) -> int:
    return 4 if name.lower() == "d2" else 3


def scenario_expected_features(name: str) -> int:
    """Stop threshold used by the benchmark suite: the number of truly
    informative variables in the scenario."""
    return 2 if name.lower() == "d2" else 5


def gen_scenario(name: str, seed: int) -> Dataset:
    key = name.lower()
    if key == "d2":
        return gen_dataset2(seed)
    if key not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; expected one of s1..s5, d2")
    return gen_dataset1(SCENARIOS[key], seed)
