"""Scenario generators, discrete distributions and out-of-sample evaluation.

Three duration families are supported:

* ``LN``: independent lognormals, parameterized by the mean and standard
  deviation of the lognormal itself (not of the underlying normal).
* ``UB``: ``u_i = scale * Beta(a_i, b_i)``, by default ``2 * Beta(0.5, 0.5)``.
* ``NG``: ``u_i = phi + gamma_i`` with a provider term ``phi`` shared by all
  appointments of a day, ``phi ~ Normal(phi_mean, phi_std^2)`` truncated at
  zero, and ``gamma_i ~ Gamma(alpha_i, scale=1/alpha_i)``.

No-show data draws show-up indicators independently with probability
``1 - noshow_prob`` and zeroes the durations of the absent patients.

All randomness flows through :func:`make_rng`, a Philox generator keyed by
a ``SeedSequence``. Philox is counter based and its stream is fixed across
platforms and numpy versions, so a seed pins a sample set byte for byte.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, EmptySampleSet, InvalidParams
from .lp import solve_transport
from .schedule import CostParams, SampleSet, _as_s, duration_costs, noshow_costs

FAMILIES = ("LN", "UB", "NG")
MODELS = ("duration", "noshow")

# ranges used when parameters are drawn automatically
LN_MEAN_RANGE = (0.9, 1.1)
LN_STD_RANGE = (0.1, 0.9)
UB_SHAPE = 0.5
UB_SCALE = 2.0
NG_ALPHA_RANGE = (0.5, 1.0)
NG_PHI_MEAN = 1.0
NG_PHI_STD = 0.5
NOSHOW_PROB = 0.4
MISSPEC_RANGE = (5.0, 10.0)  # percent

WEIGHT_TOL = 1e-9


# ---------------------------------------------------------------- RNG


def _stream_key(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise InvalidParams("stream keys must be nonnegative")
        return int(key)
    return zlib.crc32(str(key).encode())


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Philox generator for ``seed``, optionally split into a named substream.

    ``stream`` entries may be nonnegative ints or strings; strings are mapped
    to ints with CRC-32 so the derivation is stable across runs.
    """
    if seed is None or int(seed) < 0:
        raise InvalidParams("seed must be a nonnegative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_stream_key(k) for k in stream))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------- generator specs


def _param(x, name: str, n: int | None = None) -> tuple[float, ...] | None:
    if x is None:
        return None
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidParams(f"{name} must be a nonempty vector")
    if n is not None and arr.size != n:
        raise InvalidParams(f"{name} has length {arr.size}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one scenario family.

    Only the fields of the chosen family are used: ``mean``/``std`` for LN,
    ``shape_a``/``shape_b``/``scale`` for UB and ``alpha``/``phi_mean``/
    ``phi_std`` for NG. ``noshow_prob`` is needed by :func:`sample_noshow`.
    """

    family: str
    n: int
    mean: tuple[float, ...] | None = None
    std: tuple[float, ...] | None = None
    shape_a: tuple[float, ...] | None = None
    shape_b: tuple[float, ...] | None = None
    scale: float = UB_SCALE
    alpha: tuple[float, ...] | None = None
    phi_mean: float = NG_PHI_MEAN
    phi_std: float = NG_PHI_STD
    noshow_prob: float | None = None
    seed: int = 0

    def __post_init__(self):
        fam = str(self.family).upper()
        if fam not in FAMILIES:
            raise InvalidParams(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", fam)
        if int(self.n) < 1:
            raise InvalidParams("n must be positive")
        object.__setattr__(self, "n", int(self.n))
        n = self.n
        for name in ("mean", "std", "shape_a", "shape_b", "alpha"):
            object.__setattr__(self, name, _param(getattr(self, name), name, n))
        if fam == "LN":
            if self.mean is None or self.std is None:
                raise InvalidParams("LN needs mean and std")
            if min(self.mean) <= 0 or min(self.std) <= 0:
                raise InvalidParams("LN mean and std must be positive")
        elif fam == "UB":
            if self.shape_a is None:
                object.__setattr__(self, "shape_a", (UB_SHAPE,) * n)
            if self.shape_b is None:
                object.__setattr__(self, "shape_b", (UB_SHAPE,) * n)
            if min(self.shape_a) <= 0 or min(self.shape_b) <= 0 or not self.scale > 0:
                raise InvalidParams("UB shapes and scale must be positive")
        else:
            if self.alpha is None:
                raise InvalidParams("NG needs alpha")
            if min(self.alpha) <= 0 or not self.phi_std > 0 or not np.isfinite(self.phi_mean):
                raise InvalidParams("NG alpha and phi_std must be positive")
        if self.noshow_prob is not None and not 0.0 <= self.noshow_prob < 1.0:
            raise InvalidParams("noshow_prob must lie in [0, 1)")
        if int(self.seed) < 0:
            raise InvalidParams("seed must be nonnegative")

    @classmethod
    def draw(cls, family: str, n: int = 10, seed: int = 0, noshow_prob: float | None = None) -> "GeneratorSpec":
        """Draw per-appointment parameters from the default ranges."""
        family = str(family).upper()
        rng = make_rng(seed, "params", family)
        if family == "LN":
            return cls("LN", n, mean=rng.uniform(*LN_MEAN_RANGE, n), std=rng.uniform(*LN_STD_RANGE, n),
                       noshow_prob=noshow_prob, seed=seed)
        if family == "UB":
            return cls("UB", n, noshow_prob=noshow_prob, seed=seed)
        if family == "NG":
            return cls("NG", n, alpha=rng.uniform(*NG_ALPHA_RANGE, n), noshow_prob=noshow_prob, seed=seed)
        raise InvalidParams(f"unknown family {family!r}; expected one of {FAMILIES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidParams(f"unknown generator fields {sorted(extra)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GeneratorSpec":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "GeneratorSpec":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def mean_durations(self) -> np.ndarray:
        """E[u_i] under this family (phi truncation included for NG)."""
        if self.family == "LN":
            return np.array(self.mean)
        if self.family == "UB":
            a, b = np.array(self.shape_a), np.array(self.shape_b)
            return self.scale * a / (a + b)
        from scipy.stats import truncnorm

        lo = -self.phi_mean / self.phi_std
        e_phi = truncnorm.mean(lo, np.inf, loc=self.phi_mean, scale=self.phi_std)
        return np.full(self.n, e_phi + 1.0)


# ---------------------------------------------------------------- sampling


def _check_N(N) -> int:
    if int(N) != N or N < 1:
        raise InvalidParams("N must be a positive integer")
    return int(N)


def lognormal_params(mean, std) -> tuple[np.ndarray, np.ndarray]:
    """(mu_log, sigma_log) of the lognormal with the given mean and standard deviation."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    s2 = np.log1p((std / mean) ** 2)
    return np.log(mean) - 0.5 * s2, np.sqrt(s2)


def _truncated_normal(rng: np.random.Generator, loc: float, sd: float, size: int) -> np.ndarray:
    """Normal(loc, sd^2) conditioned on being nonnegative, by rejection."""
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        draw = rng.normal(loc, sd, size=need + need // 8 + 8)
        draw = draw[draw >= 0.0][:need]
        out[filled:filled + draw.size] = draw
        filled += draw.size
    return out


def _durations(spec: GeneratorSpec, N: int, rng: np.random.Generator) -> np.ndarray:
    n = spec.n
    if spec.family == "LN":
        mu, sig = lognormal_params(spec.mean, spec.std)
        return rng.lognormal(mu, sig, size=(N, n))
    if spec.family == "UB":
        return spec.scale * rng.beta(spec.shape_a, spec.shape_b, size=(N, n))
    phi = _truncated_normal(rng, spec.phi_mean, spec.phi_std, N)
    alpha = np.array(spec.alpha)
    gamma = rng.gamma(alpha, 1.0 / alpha, size=(N, n))
    return phi[:, None] + gamma


def sample_durations(spec: GeneratorSpec, N: int, rng: np.random.Generator | None = None) -> SampleSet:
    """N duration scenarios. Without ``rng`` the stream is derived from ``spec.seed``."""
    N = _check_N(N)
    if rng is None:
        rng = make_rng(spec.seed, "durations")
    return SampleSet(_durations(spec, N, rng))


def sample_noshow(spec: GeneratorSpec, N: int, rng: np.random.Generator | None = None) -> SampleSet:
    """N (mu, lambda) scenarios; a patient shows up with probability ``1 - noshow_prob``."""
    N = _check_N(N)
    q = NOSHOW_PROB if spec.noshow_prob is None else spec.noshow_prob
    if not 0.0 <= q < 1.0:
        raise InvalidParams("noshow_prob must lie in [0, 1)")
    if rng is None:
        rng = make_rng(spec.seed, "noshow")
    u = _durations(spec, N, rng)
    lam = (rng.random((N, spec.n)) >= q).astype(float)
    return SampleSet(u * lam, lam)


def sample(spec: GeneratorSpec, N: int, model: str = "duration", rng: np.random.Generator | None = None) -> SampleSet:
    if model == "duration":
        return sample_durations(spec, N, rng)
    if model == "noshow":
        return sample_noshow(spec, N, rng)
    raise InvalidParams(f"unknown model {model!r}; expected one of {MODELS}")


def misspecify(spec: GeneratorSpec, rng: np.random.Generator | None = None) -> GeneratorSpec:
    """Perturb every distribution parameter by a random 5-10 percent up or down.

    The perturbed parameters are the per-appointment LN means and standard
    deviations, the UB shape pairs, and the NG ``alpha_i``, ``phi_mean`` and
    ``phi_std``. The UB scale and the no-show probability are left alone.
    """
    if rng is None:
        rng = make_rng(spec.seed, "misspecify")

    def bump(values):
        v = np.atleast_1d(np.asarray(values, dtype=float))
        sigma = rng.uniform(*MISSPEC_RANGE, v.size) / 100.0
        sign = np.where(rng.random(v.size) < 0.5, -1.0, 1.0)
        return v * (1.0 + sign * sigma)

    if spec.family == "LN":
        return replace(spec, mean=bump(spec.mean), std=bump(spec.std))
    if spec.family == "UB":
        return replace(spec, shape_a=bump(spec.shape_a), shape_b=bump(spec.shape_b))
    phi = bump([spec.phi_mean, spec.phi_std])
    return replace(spec, alpha=bump(spec.alpha), phi_mean=float(phi[0]), phi_std=float(phi[1]))


# ---------------------------------------------------------------- discrete laws


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely many weighted atoms, one scenario vector per row of ``atoms``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        A = np.array(self.atoms, dtype=float, ndmin=2)
        w = np.array(self.weights, dtype=float).ravel()
        if A.shape[0] == 0:
            raise EmptySampleSet("a distribution needs at least one atom")
        if w.size != A.shape[0]:
            raise DimensionMismatch(f"{w.size} weights for {A.shape[0]} atoms")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidParams("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidParams(f"weights sum to {w.sum():.12g}, not 1")
        A.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", A)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self) -> int:
        return self.atoms.shape[0]

    def expectation(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """Weighted mean of ``fn`` evaluated on the atom matrix (one value per row)."""
        return float(np.asarray(fn(self.atoms), dtype=float) @ self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms


def empirical(samples: SampleSet) -> DiscreteDistribution:
    """Uniform law on the samples; no-show scenarios are laid out as ``[mu, lambda]``."""
    M = samples.as_matrix()
    return DiscreteDistribution(M, np.full(M.shape[0], 1.0 / M.shape[0]))


def wasserstein_1(dist_a: DiscreteDistribution, dist_b: DiscreteDistribution, backend: str = "auto") -> float:
    """Exact 1-Wasserstein distance under the l1 ground metric."""
    if dist_a.dim != dist_b.dim:
        raise DimensionMismatch(f"atoms of dimension {dist_a.dim} and {dist_b.dim}")
    cost = np.abs(dist_a.atoms[:, None, :] - dist_b.atoms[None, :, :]).sum(axis=2)
    return solve_transport(dist_a.weights, dist_b.weights, cost, backend=backend)


# ---------------------------------------------------------------- evaluation


def scenario_costs(schedule, evaluation_set: SampleSet, costs: CostParams, model: str = "duration") -> np.ndarray:
    """Per-scenario total cost of ``schedule``."""
    s = _as_s(schedule)
    if model == "duration":
        return duration_costs(s, evaluation_set.values, costs)
    if model == "noshow":
        if evaluation_set.shows is None:
            raise InvalidParams("no-show evaluation needs show indicators")
        return noshow_costs(s, evaluation_set.values, evaluation_set.shows, costs)
    raise InvalidParams(f"unknown model {model!r}; expected one of {MODELS}")


def out_of_sample_cost(schedule, evaluation_set: SampleSet, costs: CostParams, model: str = "duration") -> float:
    """Mean total cost of ``schedule`` over ``evaluation_set``."""
    return float(scenario_costs(schedule, evaluation_set, costs, model).mean())
