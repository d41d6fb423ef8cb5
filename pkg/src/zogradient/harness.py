"""Seeded Monte Carlo experiments.

Every trial draws from its own generator, ``make_rng(master_seed, tag,
cell..., trial)``, so results depend only on the master seed and never on how
trials are split across workers. Trials run in fixed-size blocks; blocks may
be spread over ``n_jobs`` processes and are reassembled in trial order before
any reduction.
"""
import csv
import dataclasses
import json
import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import bounds
from .estimators import FdmConfig, PackingDecoder, fdm_estimate, resolve_step
from .funcspace import CubicFunction, DomainBox
from .oracles import AdversarialBernoulliOracle, GaussianOracle, make_rng
from .packing import build_packing, min_discrepancy_psi

__all__ = [
    "ExperimentGrid",
    "ExperimentRecord",
    "RecoveryGameResult",
    "GapCell",
    "RateFit",
    "run_fdm_grid",
    "fdm_trial_errors",
    "fit_rate",
    "run_recovery_game",
    "gap_report",
    "gap_slope",
    "emit_results",
    "read_results",
    "plot_data",
]

BLOCK = 2000
Z95 = 1.959963984540054
FDM_TAG = 1
GAME_TAG = 2


@dataclass(frozen=True)
class ExperimentGrid:
    dims: Sequence[int]
    budgets: Sequence[int]
    sigma: float = 1.0
    k: float = 0.0
    trials: int = 1000
    master_seed: int = 0
    policy: str = "boundary"
    radius: float = 1.0
    quad: float = 0.0
    lin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "budgets", tuple(int(t) for t in self.budgets))
        if not self.dims or not self.budgets:
            raise ValueError("grid needs at least one dimension and one budget")
        if self.trials < 100:
            raise ValueError(f"trials must be >= 100, got {self.trials}")
        for d, T in self.cells():
            if d < 1 or T < 2 * d:
                raise ValueError(f"cell (d={d}, T={T}) violates T >= 2d")
        FdmConfig.parse(self.policy, max(self.budgets))

    def cells(self):
        return [(d, T) for d in self.dims for T in self.budgets]

    def function(self, d):
        return CubicFunction(self.k, np.full(d, self.quad), np.full(d, self.lin))

    def domain(self, d):
        return DomainBox.centered(d, self.radius)


@dataclass(frozen=True)
class ExperimentRecord:
    d: int
    T: int
    sigma: float
    k: float
    trials: int
    mean_l1_error: float
    ci_halfwidth: float
    predicted: float
    seed: int


@dataclass(frozen=True)
class RecoveryGameResult:
    d: int
    T: int
    delta: float
    trials: int
    empirical_error_prob: float
    fano_floor: float
    markov_ceiling_applicable: bool
    mean_l1_risk: float
    psi: float
    packing_size: int
    seed: int

    @property
    def binomial_se(self):
        p = self.empirical_error_prob
        return math.sqrt(p * (1 - p) / self.trials)


@dataclass(frozen=True)
class GapCell:
    d: int
    T: int
    fdm_exact: float
    lower_bound: float
    ratio: float
    vacuous: bool


class RateFit(tuple):
    """``(slope, intercept, r_squared)`` of a log-log least-squares fit."""

    __slots__ = ()

    def __new__(cls, slope, intercept, r_squared):
        return super().__new__(cls, (slope, intercept, r_squared))

    slope = property(lambda self: self[0])
    intercept = property(lambda self: self[1])
    r_squared = property(lambda self: self[2])


def _run_blocks(fn, trials, n_jobs, *args):
    blocks = [(s, min(s + BLOCK, trials)) for s in range(0, trials, BLOCK)]
    if n_jobs == 1 or len(blocks) == 1:
        parts = [fn(*args, s, e) for s, e in blocks]
    else:
        from joblib import Parallel, delayed

        parts = Parallel(n_jobs=n_jobs)(delayed(fn)(*args, s, e) for s, e in blocks)
    return np.concatenate(parts)


def _fdm_block(grid, d, T, start, stop):
    f = grid.function(d)
    domain = grid.domain(d)
    config = FdmConfig.parse(grid.policy, T)
    x_star = domain.center
    truth = f.grad(x_star)
    out = np.empty(stop - start)
    for j, trial in enumerate(range(start, stop)):
        rng = make_rng(grid.master_seed, FDM_TAG, d, T, trial)
        oracle = GaussianOracle(grid.sigma, T, rng=rng, domain=domain, record=False)
        est = fdm_estimate(oracle, f, x_star, config)
        out[j] = np.abs(est.grad_hat - truth).sum()
    return out


def fdm_trial_errors(grid, d, T, n_jobs=1):
    """Per-trial l1 errors for one grid cell, in trial order."""
    return _run_blocks(_fdm_block, grid.trials, n_jobs, grid, d, T)


def _predicted(grid, d, T):
    config = FdmConfig.parse(grid.policy, T)
    domain = grid.domain(d)
    h = resolve_step(config, d, grid.sigma, grid.k, domain.center, domain)
    # leftover budget is unspent: the estimate behaves as if T = 2d * floor(T/2d)
    t_eff = 2 * d * config.pairs_per_dim(d)
    return bounds.gaussian_fdm_error_at_h(bounds.RateInputs(d, t_eff, grid.sigma, grid.k), h)


def _summarize(errors):
    mean = float(np.mean(errors))
    ci = Z95 * float(np.std(errors, ddof=1)) / math.sqrt(errors.size)
    return mean, ci


def run_fdm_grid(grid, n_jobs=1):
    """Empirical l1 risk of FDM under a Gaussian oracle for every ``(d, T)`` cell.

    ``predicted`` is the exact expected error at the step the policy chose,
    which for ``k = 0`` coincides with the tight closed form.
    """
    records = []
    for d, T in grid.cells():
        mean, ci = _summarize(fdm_trial_errors(grid, d, T, n_jobs))
        records.append(
            ExperimentRecord(d, T, grid.sigma, grid.k, grid.trials, mean, ci, _predicted(grid, d, T), grid.master_seed)
        )
    return records


def fit_rate(records, axis):
    """Least-squares fit of ``log(mean_l1_error)`` against ``log(axis)``.

    Parameters
    ----------
    records : sequence of ExperimentRecord
        At least three, varying only along ``axis``.
    axis : {'T', 'd'}
    """
    if axis not in ("T", "d"):
        raise ValueError(f"axis must be 'T' or 'd', got {axis!r}")
    if len(records) < 3:
        raise ValueError("need at least 3 records to fit a rate")
    other = "d" if axis == "T" else "T"
    if len({getattr(r, other) for r in records}) != 1:
        raise ValueError(f"records must share a single {other} value")
    x = np.array([getattr(r, axis) for r in records], dtype=float)
    y = np.array([r.mean_l1_error for r in records], dtype=float)
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)


def _cell_key(*parts):
    return zlib.crc32(":".join(repr(p) for p in parts).encode())


def _game_block(d, T, delta, sigma, master_seed, packing, start, stop):
    domain = DomainBox.centered(d, 2 * sigma)
    x_star = domain.center
    config = FdmConfig(T, "boundary")
    decoder = PackingDecoder(delta).fit(packing, x_star)
    key = _cell_key(d, T, delta, sigma)
    out = np.empty((stop - start, 2))
    for j, trial in enumerate(range(start, stop)):
        rng = make_rng(master_seed, GAME_TAG, key, trial)
        truth = rng.integers(len(packing))
        oracle = AdversarialBernoulliOracle(
            packing.vectors[truth], delta, sigma, T, domain, rng=rng, record=False
        )
        grad_hat = fdm_estimate(oracle, None, x_star, config).grad_hat
        guess = decoder.predict_index(grad_hat[None, :], rng=rng)[0]
        out[j, 0] = guess != truth
        out[j, 1] = np.abs(grad_hat - decoder.centers_[truth]).sum()
    return out


def run_recovery_game(d, T, delta, trials, master_seed, sigma=1.0, n_jobs=1, packing=None):
    """Play the packing-recovery game with FDM as the model.

    Per trial: draw ``alpha*`` uniformly from the packing, answer FDM's queries
    with the Bernoulli oracle for ``g_alpha*`` on ``[-2 sigma, 2 sigma]^d``
    (boundary step, so ``h = 2 sigma``), decode the estimate, and score
    ``alpha_hat != alpha*``.
    """
    if d < 4:
        raise ValueError(f"d must be >= 4, got {d}")
    if T < 2 * d:
        raise ValueError(f"T={T} is below 2d={2 * d}")
    if trials < 1:
        raise ValueError("trials must be positive")
    packing = build_packing(d, master_seed) if packing is None else packing
    psi = min_discrepancy_psi(packing, delta)
    res = _run_blocks(_game_block, trials, n_jobs, d, T, delta, sigma, master_seed, packing)
    risk = float(np.mean(res[:, 1]))
    return RecoveryGameResult(
        d=d,
        T=T,
        delta=delta,
        trials=trials,
        empirical_error_prob=float(np.mean(res[:, 0])),
        fano_floor=bounds.fano_error_floor(d, T, delta),
        markov_ceiling_applicable=risk <= psi / 9,
        mean_l1_risk=risk,
        psi=psi,
        packing_size=len(packing),
        seed=master_seed,
    )


def gap_report(dims, budgets, sigma=1.0, k=0.0, h_r=1.0):
    """Tight FDM rate over the minimax lower bound for each ``(d, T)``.

    Cells whose lower bound is vacuous get ``ratio = inf`` and ``vacuous=True``.
    """
    cells = []
    for d in dims:
        for T in budgets:
            fdm = bounds.fdm_gaussian_exact(bounds.RateInputs(d, T, sigma, k, h_r))
            low = bounds.lower_bound_minimax(d, T)
            vacuous = low == 0.0
            cells.append(GapCell(d, T, fdm, low, math.inf if vacuous else fdm / low, vacuous))
    return cells


def gap_slope(cells, axis):
    """Log-log slope of the gap ratio along ``axis``, per fixed value of the other axis."""
    other = "d" if axis == "T" else "T"
    groups = {}
    for c in cells:
        if not c.vacuous:
            groups.setdefault(getattr(c, other), []).append(c)
    out = {}
    for key, group in sorted(groups.items()):
        if len(group) >= 2:
            x = np.log([getattr(c, axis) for c in group])
            y = np.log([c.ratio for c in group])
            out[key] = float(np.polyfit(x, y, 1)[0])
    return out


def _columns(cls):
    return [f.name for f in dataclasses.fields(cls)]


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(records, path, format="csv", meta=None, record_type=ExperimentRecord):
    """Write records as CSV or JSON plus, for FDM records, a plot-data companion.

    ``meta`` (resolved run configuration) goes to ``# key=value`` lines ahead
    of the CSV header, or to a ``"config"`` object in JSON. Returns the list
    of paths written.
    """
    if records:
        record_type = type(records[0])
    cols = _columns(record_type)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            for key, value in (meta or {}).items():
                fh.write(f"# {key}={value}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in records:
                w.writerow([_fmt(getattr(r, c)) for c in cols])
    elif format == "json":
        doc = {"columns": cols, "records": [dataclasses.asdict(r) for r in records]}
        if meta:
            doc = {"config": meta, **doc}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, allow_nan=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {format!r}")
    written = [str(path)]
    if record_type is ExperimentRecord and records:
        written.append(plot_data(records, _plot_path(path)))
    return written


def _plot_path(path):
    path = str(path)
    stem = path.rsplit(".", 1)[0] if "." in path.rsplit("/", 1)[-1] else path
    return stem + ".plot.csv"


def plot_data(records, path):
    """``sweep,x,empirical,predicted`` rows, one sweep per fixed ``d`` (x = T)
    or, when every record shares one ``T``, a single sweep over ``d``."""
    by_t = len({r.T for r in records}) == 1 and len({r.d for r in records}) > 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "x", "empirical", "predicted"])
        for r in sorted(records, key=lambda r: (r.T, r.d) if by_t else (r.d, r.T)):
            sweep = f"T={r.T}" if by_t else f"d={r.d}"
            x = r.d if by_t else r.T
            w.writerow([sweep, x, repr(r.mean_l1_error), repr(r.predicted)])
    return str(path)


def _parse(cls, row):
    kinds = {f.name: f.type for f in dataclasses.fields(cls)}
    out = {}
    for name, raw in row.items():
        kind = kinds[name]
        if kind in (bool, "bool"):
            out[name] = raw in (True, "true", "True")
        elif kind in (int, "int"):
            out[name] = int(raw)
        else:
            out[name] = float(raw)
    return cls(**out)


def read_results(path, record_type=ExperimentRecord):
    """Inverse of :func:`emit_results` (format chosen by file extension)."""
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)
        return [_parse(record_type, r) for r in doc["records"]]
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [_parse(record_type, row) for row in csv.DictReader(lines)]
