"""Experiment orchestration: radius cross-validation, replications, reliability and stress tests.

One replication of the pipeline draws ``N`` training scenarios, infers the
support box (and the no-show budget) from them, picks the radius by
cross-validation, solves the robust model and the sample average model on
the same data and scores both schedules on a large evaluation set drawn
from the true generator.

Every random stream is derived from ``(config.seed, purpose, N, replication)``
so results do not depend on the order in which replications run, and the
CSV files written by :meth:`ExperimentResult.write` are byte-for-byte
reproducible. Wall times go to a separate ``timings.csv``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .cutting_plane import CutPool, Master
from .duration import (
    WassersteinBall,
    rho_cap,
    solve_saa,
    solve_wdras,
    transport_distance,
    worst_case_distribution,
)
from .errors import DrasError, InvalidParams, TooFewSamples
from .noshow import (
    network_for,
    rho_cap_noshow,
    solve_wns,
    transport_distance_noshow,
    worst_case_distribution_noshow,
)
from .schedule import (
    CostParams,
    Instance,
    NoShowSupport,
    SampleSet,
    Schedule,
    duration_costs,
    infer_noshow_support,
    infer_support,
    noshow_costs,
)
from .stochastics import GeneratorSpec, make_rng, misspecify, out_of_sample_cost, sample

MIN_CV_SAMPLES = 5
TRAIN_FRACTION = 0.8
TIE_RTOL = 1e-9
DEFAULT_SIZES = (5, 10, 50, 100, 500, 1000)
CERT_TOL_DISTANCE = 1e-7
CERT_TOL_VALUE = 1e-6


def default_grid() -> np.ndarray:
    """{0.01, ..., 0.1} U {0.2, ..., 1} U {2, ..., 10}: three decades of linear steps."""
    g = np.concatenate([np.arange(1, 11) / 100, np.arange(2, 11) / 10, np.arange(2, 11, dtype=float)])
    return np.round(g, 12)


def parse_grid(spec: str) -> np.ndarray:
    """Parse ``default``, a comma list ``0.1,0.5``, or ranges ``start:stop:step`` (inclusive).

    Pieces may be mixed, e.g. ``0:0.1:0.01,0.5,1:10:1``.
    """
    spec = spec.strip()
    if spec.lower() == "default":
        return default_grid()
    vals: list[float] = []
    for piece in spec.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if ":" in piece:
            parts = [float(x) for x in piece.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise InvalidParams(f"bad range {piece!r}; expected start:stop:step with step > 0")
            k = int(math.floor((parts[1] - parts[0]) / parts[2] + 1e-9))
            vals.extend(parts[0] + parts[2] * np.arange(k + 1))
        else:
            vals.append(float(piece))
    return _check_grid(vals)


def _check_grid(grid) -> np.ndarray:
    g = np.unique(np.round(np.asarray(grid, dtype=float).ravel(), 12))
    if g.size == 0:
        raise InvalidParams("the radius grid is empty")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise InvalidParams("radii must be finite and nonnegative")
    return g


# ---------------------------------------------------------------- model dispatch


def _check_model(model: str) -> str:
    if model not in ("duration", "noshow"):
        raise InvalidParams(f"unknown model {model!r}; expected duration or noshow")
    return model


def infer_model_support(samples: SampleSet, instance: Instance, model: str):
    """Support used by the solvers: the instance's box if given, else the data's."""
    if model == "duration":
        return instance.duration_support() if instance.has_support else infer_support(samples)
    if instance.has_support:
        K = instance.K if instance.K is not None else infer_noshow_support(samples).K
        return NoShowSupport(instance.uL, instance.uU, K)
    sup = infer_noshow_support(samples)
    if instance.K is not None:
        sup = NoShowSupport(sup.uL, sup.uU, instance.K)
    return sup


def solve_model(samples: SampleSet, instance: Instance, epsilon: float, model: str = "duration", p: float = 1.0,
                method: str = "auto", **kw):
    """Dispatch to the duration or no-show solver."""
    ball = WassersteinBall(p, float(epsilon))
    if _check_model(model) == "duration":
        return solve_wdras(samples, instance, ball, method, **kw)
    return solve_wns(samples, instance, ball, method, **kw)


def _model_cap(instance: Instance, support, model: str) -> float:
    return rho_cap(instance.costs) if model == "duration" else rho_cap_noshow(instance.costs, support)


# ---------------------------------------------------------------- cross-validation


def _radius_path(samples, instance, grid, model, p, master, **kw):
    """Yield ``(index, solution)`` along an increasing radius grid.

    The optimal multiplier is nonincreasing in the radius, and once it hits
    zero the objective no longer depends on the radius at all, so that
    solution is reused for the rest of the grid.
    """
    start = None
    sol = None
    for g, eps in enumerate(grid):
        if sol is None or sol.rho > 0.0 or eps == 0.0:
            sol = solve_model(samples, instance, eps, model, p, "cutting-plane", master=master, start=start, **kw)
            start = (sol.rho, sol.s)
        yield g, sol


@dataclass
class CrossValidation:
    epsilon: float  # average of the per-partition choices
    chosen: np.ndarray  # selected radius per partition
    grid: np.ndarray
    scores: np.ndarray  # (partitions, grid) held-out mean cost
    n_train: int
    objectives: np.ndarray  # (partitions, grid) training objective
    schedules: np.ndarray  # (partitions, grid, n)
    train_ids: np.ndarray  # (partitions, n_train) training rows of each partition


def cross_validate_epsilon(
    samples: SampleSet,
    instance: Instance,
    grid=None,
    partitions: int = 30,
    *,
    model: str = "duration",
    p: float = 1.0,
    rng: np.random.Generator | None = None,
    seed: int = 0,
    support=None,
    details: bool = False,
):
    """Radius chosen by repeated 80/20 hold-out validation, averaged over partitions.

    Each partition trains on ``floor(0.8 N)`` random samples, solves for every
    radius of ``grid`` and keeps the one with the lowest mean cost on the
    held-out rest (ties go to the smallest radius). All solves of one call
    share a cutting-plane master, so later solves start from the cuts and the
    basis of earlier ones. Returns the average radius, or the full
    :class:`CrossValidation` record when ``details`` is set.
    """
    model = _check_model(model)
    N = samples.N
    if N < MIN_CV_SAMPLES:
        raise TooFewSamples(f"cross-validation needs at least {MIN_CV_SAMPLES} samples, got {N}")
    if int(partitions) < 1:
        raise InvalidParams("partitions must be positive")
    grid = default_grid() if grid is None else _check_grid(grid)
    if rng is None:
        rng = make_rng(seed, "cv")
    sup = support if support is not None else infer_model_support(samples, instance, model)
    costs = instance.costs
    n_train = int(math.floor(TRAIN_FRACTION * N))
    kw = {"support": sup}
    if model == "noshow":
        kw["network"] = network_for(costs, sup.K)
    pool = CutPool(samples.n)
    master = Master(pool, N, instance.T, _model_cap(instance, sup, model))

    chosen = np.empty(int(partitions))
    scores = np.empty((int(partitions), grid.size))
    objectives = np.empty_like(scores)
    schedules = np.empty(scores.shape + (samples.n,))
    train_ids = np.empty((int(partitions), n_train), dtype=np.int64)
    for k in range(int(partitions)):
        perm = rng.permutation(N)
        train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
        tr, te = samples.subset(train), samples.subset(test)
        train_ids[k] = train
        for g, sol in _radius_path(tr, instance, grid, model, p, master, pool_ids=train, **kw):
            scores[k, g] = out_of_sample_cost(sol.s, te, costs, model)
            objectives[k, g] = sol.objective
            schedules[k, g] = sol.s
        best = scores[k].min()
        chosen[k] = grid[np.flatnonzero(scores[k] <= best + TIE_RTOL * (1.0 + abs(best)))[0]]
    result = CrossValidation(float(chosen.mean()), chosen, grid, scores, n_train, objectives, schedules, train_ids)
    return result if details else result.epsilon


# ---------------------------------------------------------------- configuration


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment; serializes to JSON.

    ``instance`` may name an instance JSON file; otherwise the instance is
    built from ``n``, the uniform costs ``c``, ``d``, ``C`` and horizon ``T``
    (15, or 30 for the NG family, when left unset). ``generator`` may hold a
    full generator spec; otherwise parameters are drawn for ``family`` from
    ``seed``.
    """

    kind: str = "convergence"  # convergence | reliability | misspecified
    model: str = "duration"
    family: str = "LN"
    n: int = 10
    c: float = 2.0
    d: float = 1.0
    C: float = 20.0
    T: float | None = None
    instance: str | None = None
    generator: dict | None = None
    noshow_prob: float = 0.4
    sizes: tuple[int, ...] = DEFAULT_SIZES
    replications: int = 30
    partitions: int = 30
    grid: tuple[float, ...] | None = None
    p: float = 1.0
    method: str = "auto"
    eval_size: int = 100_000
    reference_size: int = 10_000
    sweep: bool = False  # also solve every grid radius on the full data (reliability curves)
    seed: int = 0
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.kind not in ("convergence", "reliability", "misspecified"):
            raise InvalidParams(f"unknown experiment kind {self.kind!r}")
        _check_model(self.model)
        self.sizes = tuple(int(x) for x in self.sizes)
        if not self.sizes or min(self.sizes) < 1:
            raise InvalidParams("sizes must be positive")
        if int(self.replications) < 1:
            raise InvalidParams("replication count must be at least 1")
        if int(self.eval_size) < 1 or int(self.reference_size) < 0:
            raise InvalidParams("evaluation sizes must be positive")
        if self.grid is not None:
            self.grid = tuple(float(x) for x in _check_grid(self.grid))

    def grid_values(self) -> np.ndarray:
        return default_grid() if self.grid is None else np.asarray(self.grid)

    def build_instance(self) -> Instance:
        if self.instance is not None:
            inst = Instance.load(self.instance)
            if inst.n != self.n:
                raise InvalidParams(f"instance file has n={inst.n}, config says n={self.n}")
            return inst
        T = self.T if self.T is not None else (30.0 if self.family.upper() == "NG" else 15.0)
        return Instance(float(T), CostParams.uniform(self.n, self.c, self.d, self.C))

    def build_spec(self) -> GeneratorSpec:
        if self.generator is not None:
            spec = GeneratorSpec.from_dict(self.generator)
            if spec.n != self.n:
                raise InvalidParams(f"generator has n={spec.n}, config says n={self.n}")
            return spec
        q = self.noshow_prob if self.model == "noshow" else None
        return GeneratorSpec.draw(self.family, self.n, self.seed, noshow_prob=q)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        d["grid"] = None if self.grid is None else list(self.grid)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise InvalidParams(f"unknown config fields {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


# ---------------------------------------------------------------- results


RESULT_FIELDS = ("experiment", "model", "family", "seed", "N", "replication", "method", "epsilon", "in_sample",
                 "out_of_sample", "reliable", "status")
SWEEP_FIELDS = ("experiment", "model", "family", "seed", "N", "replication", "method", "epsilon", "in_sample",
                "out_of_sample", "reliable")
SUMMARY_FIELDS = ("experiment", "model", "family", "seed", "N", "method", "epsilon_mean", "in_sample_mean",
                  "out_of_sample_mean", "out_of_sample_p20", "out_of_sample_p80", "reliability", "completed", "failed")
TIMING_FIELDS = ("N", "replication", "stage", "seconds")


def robust_label(model: str) -> str:
    return "W-DRAS" if model == "duration" else "W-NS"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict] = field(default_factory=list)
    sweep: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    z_star: float | None = None

    def cells(self, method: str, N: int, ok_only: bool = True) -> list[dict]:
        return [r for r in self.rows if r["method"] == method and r["N"] == N and (r["status"] == "ok" or not ok_only)]

    def column(self, method: str, N: int, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.cells(method, N)], dtype=float)

    def reliability(self, method: str, N: int) -> float:
        rel = self.column(method, N, "reliable")
        return float(rel.mean()) if rel.size else float("nan")

    def reliability_curve(self, N: int, method: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Fraction of replications whose in-sample value covers the out-of-sample cost, per radius."""
        method = method or robust_label(self.config.model)
        rows = [r for r in self.sweep if r["N"] == N and r["method"] == method]
        eps = np.unique([r["epsilon"] for r in rows])
        frac = np.array([np.mean([r["reliable"] for r in rows if r["epsilon"] == e]) for e in eps])
        return eps, frac

    def summary(self) -> list[dict]:
        cfg = self.config
        out = []
        methods = [robust_label(cfg.model), "SAA"]
        for N in cfg.sizes:
            for m in methods:
                ok = self.cells(m, N)
                failed = len(self.cells(m, N, ok_only=False)) - len(ok)
                oos = np.array([r["out_of_sample"] for r in ok], dtype=float)
                row = {
                    "experiment": cfg.kind, "model": cfg.model, "family": cfg.family, "seed": cfg.seed, "N": N,
                    "method": m, "completed": len(ok), "failed": failed,
                }
                if ok:
                    row.update({
                        "epsilon_mean": float(np.mean([r["epsilon"] for r in ok])),
                        "in_sample_mean": float(np.mean([r["in_sample"] for r in ok])),
                        "out_of_sample_mean": float(oos.mean()),
                        "out_of_sample_p20": float(np.percentile(oos, 20)),
                        "out_of_sample_p80": float(np.percentile(oos, 80)),
                        "reliability": float(np.mean([r["reliable"] for r in ok])),
                    })
                else:
                    row.update({k: float("nan") for k in SUMMARY_FIELDS if k not in row})
                out.append(row)
        return out

    def write(self, out_dir=None) -> dict[str, Path]:
        """Write results, summary, optional sweep and timings CSVs; return their paths."""
        out = Path(out_dir or self.config.out_dir or ".")
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "results": out / "results.csv",
            "summary": out / "summary.csv",
            self.config.kind: out / f"{self.config.kind}.csv",
            "timings": out / "timings.csv",
        }
        _write_csv(paths["results"], RESULT_FIELDS, self.rows)
        _write_csv(paths["summary"], SUMMARY_FIELDS, self.summary())
        if self.config.kind == "reliability" and self.sweep:
            _write_csv(paths[self.config.kind], SWEEP_FIELDS, self.sweep)
        else:
            _write_csv(paths[self.config.kind], SUMMARY_FIELDS, self.summary())
        _write_csv(paths["timings"], TIMING_FIELDS, self.timings)
        meta = {"config": self.config.to_dict(), "z_star": self.z_star}
        paths["meta"] = out / "experiment.json"
        paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if self.sweep and self.config.kind != "reliability":
            paths["sweep"] = out / "sweep.csv"
            _write_csv(paths["sweep"], SWEEP_FIELDS, self.sweep)
        return paths


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in header])


# ---------------------------------------------------------------- replications


def _provenance(cfg: ExperimentConfig, N: int, rep: int) -> dict:
    return {"experiment": cfg.kind, "model": cfg.model, "family": cfg.family, "seed": cfg.seed, "N": N,
            "replication": rep}


def evaluation_set(cfg: ExperimentConfig, size: int | None = None, purpose: str = "evaluation") -> SampleSet:
    """Scenarios from the true generator, shared by every cell of the experiment."""
    return sample(cfg.build_spec(), int(size or cfg.eval_size), cfg.model, make_rng(cfg.seed, purpose))


def run_replication(cfg: ExperimentConfig, N: int, rep: int, eval_set: SampleSet) -> tuple[list, list, list]:
    """One data set: returns ``(rows, sweep_rows, timings)``."""
    instance = cfg.build_instance()
    costs = instance.costs
    spec = cfg.build_spec()
    if cfg.kind == "misspecified":
        spec = misspecify(spec, make_rng(cfg.seed, "misspecify", N, rep))
    data = sample(spec, N, cfg.model, make_rng(cfg.seed, "train", N, rep))
    base = _provenance(cfg, N, rep)
    robust = robust_label(cfg.model)
    rows, sweep, timings = [], [], []

    def tic(stage, t0):
        timings.append({"N": N, "replication": rep, "stage": stage, "seconds": time.perf_counter() - t0})

    def record(method, eps, sol):
        oos = out_of_sample_cost(sol.s, eval_set, costs, cfg.model)
        return {**base, "method": method, "epsilon": float(eps), "in_sample": sol.objective, "out_of_sample": oos,
                "reliable": bool(sol.objective >= oos), "status": "ok"}

    def failure(method, exc):
        return {**base, "method": method, "epsilon": float("nan"), "in_sample": float("nan"),
                "out_of_sample": float("nan"), "reliable": False, "status": f"error:{type(exc).__name__}"}

    try:
        support = infer_model_support(data, instance, cfg.model)
        t0 = time.perf_counter()
        eps = cross_validate_epsilon(data, instance, cfg.grid_values(), cfg.partitions, model=cfg.model, p=cfg.p,
                                     rng=make_rng(cfg.seed, "cv", N, rep), support=support)
        tic("cross_validation", t0)
        t0 = time.perf_counter()
        sol = solve_model(data, instance, eps, cfg.model, cfg.p, cfg.method, support=support)
        tic("solve", t0)
        rows.append(record(robust, eps, sol))
    except DrasError as exc:
        rows.append(failure(robust, exc))
    try:
        t0 = time.perf_counter()
        saa = solve_saa(data, instance)
        tic("saa", t0)
        rows.append(record("SAA", 0.0, saa))
    except DrasError as exc:
        rows.append(failure("SAA", exc))

    if cfg.sweep:
        t0 = time.perf_counter()
        try:
            support = infer_model_support(data, instance, cfg.model)
            kw = {"support": support}
            if cfg.model == "noshow":
                kw["network"] = network_for(costs, support.K)
            master = Master(CutPool(cfg.n), N, instance.T, _model_cap(instance, support, cfg.model))
            grid = cfg.grid_values()
            for g, s in _radius_path(data, instance, grid, cfg.model, cfg.p, master, **kw):
                r = record(robust, grid[g], s)
                sweep.append({k: r[k] for k in SWEEP_FIELDS})
        except DrasError:
            pass  # the sweep is auxiliary; missing radii simply do not appear
        tic("sweep", t0)
    return rows, sweep, timings


def _run_cell(args):
    cfg, N, rep, eval_set = args
    return run_replication(cfg, N, rep, eval_set)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every (N, replication) cell of ``cfg``; cells run in parallel when ``workers > 1``."""
    eval_set = evaluation_set(cfg)
    tasks = [(cfg, N, rep, eval_set) for N in cfg.sizes for rep in range(cfg.replications)]
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outputs = list(ex.map(_run_cell, tasks))
    else:
        outputs = [_run_cell(t) for t in tasks]
    result = ExperimentResult(cfg)
    for rows, sweep, timings in outputs:
        result.rows.extend(rows)
        result.sweep.extend(sweep)
        result.timings.extend(timings)
    if cfg.reference_size > 0:
        ref = evaluation_set(cfg, cfg.reference_size, "reference")
        z = solve_saa(ref, cfg.build_instance())
        result.z_star = out_of_sample_cost(z.s, eval_set, cfg.build_instance().costs, cfg.model)
    if cfg.out_dir is not None:
        result.write(cfg.out_dir)
    return result


def run_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    """Out-of-sample cost of the robust and sample average schedules across data sizes."""
    return run_experiment(_as_kind(cfg, "convergence"))


def run_reliability(cfg: ExperimentConfig) -> ExperimentResult:
    """Reliability of both methods; with ``sweep`` also per radius of the grid."""
    return run_experiment(_as_kind(cfg, "reliability"))


def run_misspecified(cfg: ExperimentConfig) -> ExperimentResult:
    """Training data from a perturbed generator, evaluation data from the true one."""
    return run_experiment(_as_kind(cfg, "misspecified"))


def _as_kind(cfg: ExperimentConfig, kind: str) -> ExperimentConfig:
    if cfg.kind == kind:
        return cfg
    return ExperimentConfig.from_dict({**cfg.to_dict(), "kind": kind})


# ---------------------------------------------------------------- stress testing


@dataclass
class StressReport:
    epsilon: float
    model: str
    worst_case_cost: float  # optimum of the extraction LP
    expectation: float  # exact expected cost under the extracted distribution
    empirical_cost: float  # mean cost over the samples
    distance: float  # transport distance of the extracted law to the samples
    atoms: list[dict]
    certified: bool

    def to_dict(self) -> dict:
        return asdict(self)


def load_schedule(path, T: float | None = None) -> np.ndarray:
    """Schedule from a solution JSON (``{"s": [...]}``) or a one-row CSV."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{") or text.lstrip().startswith("["):
        obj = json.loads(text)
        s = obj["s"] if isinstance(obj, dict) else obj
    else:
        s = [float(x) for x in text.replace("\n", ",").split(",") if x.strip()]
    s = np.asarray(s, dtype=float)
    if T is not None:
        Schedule(s, T)  # validates nonnegativity and the horizon
    return s


def stress_test(schedule, samples: SampleSet, instance: Instance, epsilon: float, model: str = "duration") -> StressReport:
    """Worst-case distribution of a given schedule within the radius-``epsilon`` ball, with a certificate.

    ``schedule`` is a vector or a path accepted by :func:`load_schedule`.
    The certificate checks that the extracted law lies in the ball and that
    its exact expected cost reproduces the extraction LP value.
    """
    model = _check_model(model)
    if isinstance(schedule, (str, os.PathLike)):
        schedule = load_schedule(schedule, instance.T)
    s = Schedule(np.asarray(schedule, dtype=float), instance.T).s
    if s.size != instance.n:
        raise InvalidParams(f"schedule has {s.size} entries, instance has n={instance.n}")
    costs = instance.costs
    support = infer_model_support(samples, instance, model)
    if model == "duration":
        wc = worst_case_distribution(s, samples, support, costs, epsilon)
        expectation = wc.expectation(lambda U: duration_costs(s, U, costs))
        N = samples.N
        dist = transport_distance(wc.atoms, wc.weights, samples.values, np.full(N, 1.0 / N))
        atoms = [{"weight": float(w), "source": int(j), "u": [float(x) for x in a]}
                 for a, w, j in zip(wc.atoms, wc.weights, wc.source)]
        empirical = float(duration_costs(s, samples.values, costs).mean())
    else:
        wc = worst_case_distribution_noshow(s, samples, support, costs, epsilon)
        expectation = wc.expectation(lambda mu, lam: noshow_costs(s, mu, lam, costs))
        dist = transport_distance_noshow(wc, samples)
        atoms = [{"weight": float(w), "source": int(j), "mu": [float(x) for x in m], "lambda": [int(x) for x in l]}
                 for m, l, w, j in zip(wc.mu, wc.lam, wc.weights, wc.source)]
        lam = samples.shows if samples.shows is not None else np.ones_like(samples.values)
        empirical = float(noshow_costs(s, samples.values, lam, costs).mean())
    ok = dist <= epsilon + CERT_TOL_DISTANCE and abs(expectation - wc.lp_value) <= CERT_TOL_VALUE * (1 + abs(wc.lp_value))
    return StressReport(float(epsilon), model, float(wc.lp_value), float(expectation), empirical, float(dist), atoms,
                        bool(ok))
