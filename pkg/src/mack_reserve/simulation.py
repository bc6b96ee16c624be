"""Synthetic triangles, the Monte Carlo oracle and the experiment grid runner."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bootstrap import Method, grow_lower, prediction_interval, run_bootstrap
from .evaluation import CellSummary, empirical_moments, ks_two_sample
from .exceptions import ConfigError
from .families import CondFamily, FamilyKind, sample_array
from .mack import MackFit, fit_mack, row_products
from .rng import derive, generator
from .triangle import DevTriangle, diagonal

__all__ = [
    "DgpConfig",
    "ExperimentGrid",
    "ParamSequences",
    "Setup",
    "generate_triangle",
    "oracle_predictive_roots",
    "param_sequences",
    "run_experiment",
    "run_item",
]

log = logging.getLogger(__name__)

SIGMA2_BASE = 509518.0


class Setup(str, Enum):
    A = "a"
    B = "b"

    @classmethod
    def parse(cls, value) -> "Setup":
        if isinstance(value, Setup):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"unknown setup {value!r}; expected 'a' or 'b'", "setup") from None

    @property
    def initial_range(self) -> tuple[float, float]:
        return (1.2e8, 3.5e8) if self is Setup.A else (1.2e6, 3.5e6)


@dataclass(frozen=True)
class ParamSequences:
    f_true: np.ndarray
    sigma2_true: np.ndarray
    mu0: float
    initial_range: tuple[float, float]

    @property
    def n_periods(self) -> int:
        return self.f_true.size + 1

    @property
    def mu(self) -> np.ndarray:
        """Unconditional means ``E C[., j] = mu0 * prod_{k<j} f_k`` for ``j = 0 .. A-1``."""
        # running product from mu0, so mu[j + 1] == mu[j] * f[j] holds exactly
        return np.cumprod(np.concatenate([[self.mu0], self.f_true]))


def param_sequences(I_base: int = 10, n: int = 0, setup="a", sigma2_scale: float = 1.0) -> ParamSequences:
    """Exponentially decaying development factors and variances for ``A = I_base + n + 1``."""
    if n < 0 or I_base < 1:
        raise ConfigError(f"need I_base >= 1 and n >= 0, got ({I_base}, {n})", "n")
    setup = Setup.parse(setup)
    j = np.arange(I_base + n)
    lo, hi = setup.initial_range
    return ParamSequences(
        f_true=1.0 + np.exp(-1.0 - 0.2 * j),
        sigma2_true=sigma2_scale * SIGMA2_BASE * np.exp(-1.0 - 0.7 * j),
        mu0=(lo + hi) / 2,
        initial_range=(lo, hi),
    )


@dataclass(frozen=True)
class DgpConfig:
    family: CondFamily = CondFamily(FamilyKind.GAMMA)
    I_base: int = 10
    n: int = 0
    setup: Setup = Setup.A
    seed: object = 0
    sigma2_scale: float = 1.0

    def params(self) -> ParamSequences:
        return param_sequences(self.I_base, self.n, self.setup, self.sigma2_scale)


def generate_triangle(cfg: DgpConfig, rng=None, params: Optional[ParamSequences] = None):
    """Simulate a full claims rectangle and return ``(upper_triangle, rectangle)``."""
    params = params if params is not None else cfg.params()
    rng = rng if rng is not None else generator(cfg.seed)
    family = CondFamily.parse(cfg.family)
    A = params.n_periods
    full = np.empty((A, A))
    full[:, 0] = rng.uniform(*params.initial_range, size=A)
    for d in range(A - 1):
        c = full[:, d]
        full[:, d + 1] = c * sample_array(family, params.f_true[d], params.sigma2_true[d] / c, rng)
    return DevTriangle.from_full(full), full


def oracle_predictive_roots(
    tri: DevTriangle,
    params: ParamSequences,
    family,
    B: int,
    rng,
    fit: Optional[MackFit] = None,
    return_parts: bool = False,
):
    """Predictive roots from ``B`` completions of ``tri`` under the true model.

    Each root is ``R(b) - R_hat`` with ``R_hat`` from the Mack fit of ``tri``.
    With ``return_parts`` also returns the process part, centered at the true
    factors, and the (constant) estimation part.
    """
    fit = fit if fit is not None else fit_mack(tri)
    if params.f_true.size < tri.n_periods - 1:
        raise ConfigError("parameter sequences are shorter than the triangle", "n")
    rng = rng if isinstance(rng, np.random.Generator) else generator(rng)
    A = tri.n_periods
    f = params.f_true[: A - 1]
    s2 = params.sigma2_true[: A - 1]
    latest = diagonal(tri)
    ult = grow_lower(latest, f, s2, CondFamily.parse(family), rng, B).sum(axis=1)
    roots = ult - fit.ultimates.sum()
    if not return_parts:
        return roots
    part1 = ult - latest @ row_products(f)
    return roots, part1, roots - part1


# --- experiment grid -------------------------------------------------------

_FAMILY_CODE = {FamilyKind.GAMMA: 0, FamilyKind.LOGNORMAL: 1, FamilyKind.TRUNCNORMAL: 2}
STREAM_TRIANGLE, STREAM_ORACLE, STREAM_BOOT = 0, 1, 2


@dataclass(frozen=True)
class ExperimentGrid:
    """One setup and true family crossed with chosen families, ``n`` values and methods."""

    setup: Setup
    true_family: str
    chosen_family: tuple
    n: tuple
    methods: tuple
    M: int
    B: int
    alpha: float
    seed: int
    I_base: int = 10
    sigma2_scale: float = 1.0
    truncnormal_moment_match: bool = False
    backward_variance: str = "delta"
    out_dir: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "setup", Setup.parse(self.setup))
        object.__setattr__(self, "chosen_family", tuple(self.chosen_family))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "methods", tuple(Method(m).value for m in self.methods))

    def family(self, name) -> CondFamily:
        return CondFamily.parse(name, moment_match=self.truncnormal_moment_match)

    def items(self):
        for n in self.n:
            for m in range(self.M):
                yield n, m

    def cells(self):
        for chosen in self.chosen_family:
            for n in self.n:
                for method in self.methods:
                    yield chosen, n, method

    def to_dict(self) -> dict:
        d = asdict(self)
        d["setup"] = self.setup.value
        d["chosen_family"] = list(self.chosen_family)
        d["n"] = list(self.n)
        d["methods"] = list(self.methods)
        return d

    @property
    def fingerprint(self) -> str:
        d = self.to_dict()
        d.pop("out_dir", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _cell_key(chosen, method) -> str:
    return f"{chosen}/{method}"


def run_item(grid: ExperimentGrid, n: int, m: int) -> dict:
    """Simulate triangle ``m`` at ``n`` and evaluate every chosen family and method on it."""
    params = param_sequences(grid.I_base, n, grid.setup, grid.sigma2_scale)
    true_family = grid.family(grid.true_family)
    cfg = DgpConfig(true_family, grid.I_base, n, grid.setup, grid.seed, grid.sigma2_scale)
    tri, full = generate_triangle(cfg, generator(derive(grid.seed, n, m, STREAM_TRIANGLE)), params)
    fit = fit_mack(tri)
    latest = diagonal(tri)
    realized = float(full[:, -1].sum() - latest.sum())
    o_root, o_part1, _ = oracle_predictive_roots(
        tri, params, true_family, grid.B, generator(derive(grid.seed, n, m, STREAM_ORACLE)), fit, return_parts=True
    )
    o_sorted = np.sort(o_root)
    results = {}
    for chosen in grid.chosen_family:
        fam = grid.family(chosen)
        # all methods share one seed: common random numbers, and aligned lower streams
        seed = derive(grid.seed, n, m, STREAM_BOOT, _FAMILY_CODE[fam.kind])
        for method in grid.methods:
            run = run_bootstrap(
                method, tri, fit, fam, None, grid.B, grid.alpha, seed, backward_variance=grid.backward_variance
            )
            ks = ks_two_sample(run.roots, o_root)
            ks1 = ks_two_sample(run.part1, o_part1)
            mom = empirical_moments(run.roots)
            lo, hi = prediction_interval(run, fit.total_reserve, grid.alpha)
            results[_cell_key(chosen, method)] = {
                "ks_stat": ks.statistic,
                "ks_p": ks.p_value,
                "ks_part1_stat": ks1.statistic,
                "ks_part1_p": ks1.p_value,
                "mse": float(np.mean((np.sort(run.roots) - o_sorted) ** 2)),
                "var": float(np.var(run.roots)),
                "part1_var": float(np.var(run.part1)),
                "part2_var": float(np.var(run.part2)),
                "skewness": mom["skewness"],
                "kurtosis": mom["excess_kurtosis"],
                "covered": bool(lo <= realized <= hi),
            }
    return {
        "fingerprint": grid.fingerprint,
        "n": n,
        "m": m,
        "total_reserve": fit.total_reserve,
        "oracle_var": float(np.var(o_root)),
        "results": results,
    }


def _item_path(out_dir: Path, n: int, m: int) -> Path:
    return out_dir / "items" / f"n{n:03d}_m{m:05d}.json"


def _write_json_atomic(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
    tmp.write_text(json.dumps(obj, sort_keys=True), encoding="utf-8")
    os.replace(tmp, path)


def _item_task(args):
    grid, n, m, out_dir = args
    res = run_item(grid, n, m)
    if out_dir is not None:
        _write_json_atomic(_item_path(Path(out_dir), n, m), res)
    return res


def _load_done(grid, out_dir: Path) -> dict:
    done = {}
    for n, m in grid.items():
        p = _item_path(out_dir, n, m)
        if not p.exists():
            continue
        try:
            res = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            log.warning("ignoring unreadable item file %s", p)
            continue
        if res.get("fingerprint") == grid.fingerprint:
            done[(n, m)] = res
    return done


def resolve_threads(threads: Optional[int] = None) -> int:
    env = os.environ.get("MACK_RESERVE_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(f"MACK_RESERVE_THREADS must be an int, got {env!r}", "threads") from None
    if threads is None or threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def run_experiment(
    grid: ExperimentGrid,
    threads: Optional[int] = None,
    resume: bool = False,
    progress=None,
) -> tuple[list[CellSummary], dict]:
    """Run every ``(n, m)`` work item and aggregate into one summary per cell.

    Items are written to ``out_dir/items`` as they finish (when ``out_dir`` is
    set), so an interrupted run loses at most the items in flight; with
    ``resume`` those files are reused. Aggregation happens in a fixed order,
    so the summaries do not depend on ``threads``.
    """
    out_dir = Path(grid.out_dir) if grid.out_dir else None
    done = _load_done(grid, out_dir) if (resume and out_dir is not None) else {}
    todo = [(grid, n, m, out_dir) for n, m in grid.items() if (n, m) not in done]
    threads = resolve_threads(threads)
    log.info("%d items to run (%d reused) on %d workers", len(todo), len(done), threads)
    if threads == 1 or len(todo) <= 1:
        for task in todo:
            res = _item_task(task)
            done[(res["n"], res["m"])] = res
            if progress:
                progress(len(done))
    else:
        with ProcessPoolExecutor(max_workers=min(threads, len(todo))) as pool:
            for res in pool.map(_item_task, todo, chunksize=1):
                done[(res["n"], res["m"])] = res
                if progress:
                    progress(len(done))
    return aggregate(grid, done), done


def aggregate(grid: ExperimentGrid, items: dict) -> list[CellSummary]:
    out = []
    for chosen, n, method in grid.cells():
        key = _cell_key(chosen, method)
        rows = [items[(n, m)]["results"][key] for m in range(grid.M)]
        oracle_var = [items[(n, m)]["oracle_var"] for m in range(grid.M)]

        def mean(name, rows=rows):
            return float(np.mean([r[name] for r in rows]))

        out.append(CellSummary(
            setup=grid.setup.value,
            true_family=str(grid.true_family),
            chosen_family=str(chosen),
            n=n,
            method=method,
            M=grid.M,
            ks_fail_rate=float(np.mean([r["ks_p"] >= 0.05 for r in rows])),
            rmmse=float(np.sqrt(mean("mse"))),
            var_mean=mean("var"),
            part2_var_mean=mean("part2_var"),
            part1_var_mean=mean("part1_var"),
            ks_part1_fail_rate=float(np.mean([r["ks_part1_p"] >= 0.05 for r in rows])),
            oracle_var_mean=float(np.mean(oracle_var)),
            skewness_mean=mean("skewness"),
            kurtosis_mean=mean("kurtosis"),
            coverage=float(np.mean([r["covered"] for r in rows])),
        ))
    return out


def summary_csv(summaries: Sequence[CellSummary]) -> str:
    lines = [",".join(CellSummary.FIELDS)]
    lines += [",".join(s.row()) for s in summaries]
    return "\n".join(lines) + "\n"


def detail_csv(grid: ExperimentGrid, items: dict) -> str:
    cols = ["n", "m", "chosen_family", "method", "ks_stat", "ks_p", "ks_part1_stat", "ks_part1_p",
            "mse", "var", "part1_var", "part2_var", "skewness", "kurtosis", "covered"]
    lines = [",".join(cols)]
    for n, m in grid.items():
        for chosen in grid.chosen_family:
            for method in grid.methods:
                r = items[(n, m)]["results"][_cell_key(chosen, method)]
                vals = [str(n), str(m), str(chosen), method]
                vals += [repr(r[k]) if isinstance(r[k], float) else str(r[k]) for k in cols[4:]]
                lines.append(",".join(vals))
    return "\n".join(lines) + "\n"
