"""Synthetic benchmark signals: sparse coordinate mixtures and piecewise-smooth curves."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .model import MixtureModel, mixture_from_coordinate_supports, sample_mixture
from .rng import make_rng

__all__ = [
    "DatasetSpec",
    "Dataset",
    "gen_dataset1",
    "gen_dataset2",
    "gen_dataset3",
    "generate",
    "jump_locations",
    "jump_configurations",
]

VARIANTS = ("gmm", "sinusoid", "fourier")


@dataclass(frozen=True)
class DatasetSpec:
    """Which generator to run and how many signals to draw.

    For ``gmm`` the mixture has ``L`` components of rank ``s``. For
    ``sinusoid`` and ``fourier`` ``jumps`` is the number of admissible
    discontinuity locations; the component count follows from it.
    """

    variant: str
    n: int = 1000
    s: int = 20
    L: int = 10
    jumps: int = 10
    n_train: int = 2000
    n_test: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown dataset variant {self.variant!r}")
        for name in ("n", "s", "L", "jumps", "n_train", "n_test"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.variant == "gmm" and self.s > self.n:
            raise ValueError("s cannot exceed n")

    @property
    def n_components(self) -> int:
        if self.variant == "gmm":
            return self.L
        if self.variant == "sinusoid":
            return self.jumps
        return len(jump_configurations(self.jumps))

    @property
    def sparsity(self) -> Optional[int]:
        return self.s if self.variant == "gmm" else None

    @property
    def dataset_id(self) -> int:
        return VARIANTS.index(self.variant) + 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    spec: DatasetSpec
    X_train: np.ndarray
    labels_train: np.ndarray
    X_test: np.ndarray
    labels_test: np.ndarray
    model: Optional[MixtureModel] = None  # generating mixture, when there is one


def grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 4.0 * np.pi, n)


def jump_locations(count: int) -> np.ndarray:
    """``count`` equispaced interior points of [0, 4 pi]."""
    return 4.0 * np.pi * np.arange(1, count + 1) / (count + 1)


def jump_configurations(count: int):
    """All pairs (i, j) with i <= j: i == j means a single jump."""
    return list(itertools.combinations_with_replacement(range(count), 2))


def gmm_model(spec: DatasetSpec) -> MixtureModel:
    """The coordinate-subspace mixture, supports fixed by the dataset seed."""
    rng = make_rng(spec.seed, "dataset1", "supports")
    supports = [np.sort(rng.choice(spec.n, spec.s, replace=False)) for _ in range(spec.L)]
    return mixture_from_coordinate_supports(spec.n, spec.s, spec.L, supports)


def gen_dataset1(spec: DatasetSpec, rng: np.random.Generator, count: int, model: Optional[MixtureModel] = None):
    """Signals and labels from the sparse coordinate mixture."""
    if spec.variant != "gmm":
        raise ValueError("gen_dataset1 needs a gmm spec")
    model = model or gmm_model(spec)
    return sample_mixture(model, rng, count)


def gen_dataset2(spec: DatasetSpec, rng: np.random.Generator, count: int, C=None):
    """Sinusoid plus constant, with one jump of size C at a random location.

    ``C`` overrides the jump amplitudes (array of length ``count``).
    """
    if spec.variant != "sinusoid":
        raise ValueError("gen_dataset2 needs a sinusoid spec")
    t = grid(spec.n)
    loc = jump_locations(spec.jumps)
    labels = rng.integers(spec.jumps, size=count)
    A = rng.uniform(0.05, 0.1, count)
    w = rng.uniform(1.0, 2.0, count)
    B = rng.uniform(0.5, 3.0, count)
    Cj = rng.normal(0.0, 0.2, count)
    if C is not None:
        Cj = np.broadcast_to(np.asarray(C, float), (count,))
    X = A[:, None] * np.sin(w[:, None] * t) + B[:, None]
    X += Cj[:, None] * (t[None, :] > loc[labels][:, None])
    return X, labels


def gen_dataset3(spec: DatasetSpec, rng: np.random.Generator, count: int, C1=None, C2=None):
    """Four-term Fourier series, shifted by C1 between the jumps and by C2 after the second.

    The shift is absolute on each piece, not cumulative. Equal locations give
    a single jump of size C2.
    """
    if spec.variant != "fourier":
        raise ValueError("gen_dataset3 needs a fourier spec")
    t = grid(spec.n)
    loc = jump_locations(spec.jumps)
    configs = np.array(jump_configurations(spec.jumps))
    labels = rng.integers(len(configs), size=count)
    a = rng.normal(0.1, 0.1, (count, 4))
    b = rng.normal(0.1, 0.1, (count, 4))
    c1 = rng.normal(0.0, 0.2, count)
    c2 = rng.normal(0.0, 0.2, count)
    if C1 is not None:
        c1 = np.broadcast_to(np.asarray(C1, float), (count,))
    if C2 is not None:
        c2 = np.broadcast_to(np.asarray(C2, float), (count,))
    d = np.arange(1, 5)
    phase = 2.0 * np.pi * d[:, None] * t[None, :]  # (4, n)
    X = a @ np.cos(phase) + b @ np.sin(phase)
    t1 = loc[configs[labels, 0]][:, None]
    t2 = loc[configs[labels, 1]][:, None]
    X += c1[:, None] * ((t > t1) & (t <= t2)) + c2[:, None] * (t > t2)
    return X, labels


def generate(spec: DatasetSpec) -> Dataset:
    """Train and test splits from disjoint random streams."""
    model = gmm_model(spec) if spec.variant == "gmm" else None
    out = []
    for split, count in (("train", spec.n_train), ("test", spec.n_test)):
        rng = make_rng(spec.seed, "dataset", spec.variant, split)
        if spec.variant == "gmm":
            out.append(gen_dataset1(spec, rng, count, model))
        elif spec.variant == "sinusoid":
            out.append(gen_dataset2(spec, rng, count))
        else:
            out.append(gen_dataset3(spec, rng, count))
    (Xtr, ltr), (Xte, lte) = out
    return Dataset(spec, Xtr, ltr, Xte, lte, model)
