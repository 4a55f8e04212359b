"""Seeded Monte-Carlo sweeps over compression rate and damping factor.

Each trial is identified by ``(master seed, sweep point, trial index)`` and
draws its signals, noise and permutations from streams keyed on exactly
that, so results do not depend on how trials are chunked or on how many
worker processes run the chunks.  Trials of one sweep point are shared by
every damping factor on the grid.
"""

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import stats

from . import __version__, seeding
from .coupling import CouplingConfig, build_all_x_vec, sample_signals
from .denoiser import BernoulliGaussianPrior
from .oamp import error_vectors, run
from .sensing import (SensingOperator, condition_number_profile, is_power_of_two,
                      sample_haar_dense)
from .state_evolution import run_se

log = logging.getLogger(__name__)

DEFAULT_ZETAS = (0.6, 0.7, 0.8, 0.9, 0.95, 1.0)

CSV_COLUMNS = ("L", "W", "N", "M", "delta", "overall_rate", "zeta", "best_zeta",
               "statistic", "section", "trial", "value")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    L: int = 8
    W: int = 1
    N: int = 1024
    kappa: float = 10.0
    rho: float = 0.1
    snr_db: float = 30.0
    T: int = 200
    trials: int = 200
    seed: int = 0
    deltas: tuple = (0.5,)
    zetas: tuple = DEFAULT_ZETAS
    ensemble: str = "structured"
    random_signs: bool = False
    chunk_size: int = 50
    workers: int = 1
    se_max_iter: int = 1000
    checkpoints: tuple = (1, 3, 5)
    out: str = None

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "zetas", tuple(float(z) for z in self.zetas))
        object.__setattr__(self, "checkpoints", tuple(int(t) for t in self.checkpoints))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if not self.deltas or any(not 0 < d <= 1 for d in self.deltas):
            raise ConfigError(f"compression rates must lie in (0, 1], got {self.deltas}")
        if not self.zetas or any(not 0 < z <= 1 for z in self.zetas):
            raise ConfigError(f"damping factors must lie in (0, 1], got {self.zetas}")
        if self.ensemble not in ("structured", "haar"):
            raise ConfigError(f"ensemble must be 'structured' or 'haar', got {self.ensemble!r}")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("chunk_size and workers must be >= 1")
        if not 0 < self.rho <= 1:
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")
        if self.kappa < 1:
            raise ConfigError(f"kappa must be >= 1, got {self.kappa}")
        for delta in self.deltas:
            self.coupling(delta)

    @property
    def sigma2(self):
        return 10 ** (-self.snr_db / 10)

    def m_for(self, delta):
        return max(1, int(round(delta * self.N)))

    def coupling(self, delta):
        M = self.m_for(delta)
        if M == 1 and self.kappa > 1:
            raise ConfigError(f"delta={delta} leaves a single measurement per section")
        try:
            cfg = CouplingConfig(L=self.L, W=self.W, N=self.N, M=M, sigma2=self.sigma2)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.ensemble == "structured":
            bad = sorted({cfg.n_c(ell) for ell in range(cfg.n_rows)
                          if not is_power_of_two(cfg.n_c(ell))})
            if bad:
                raise ConfigError(
                    f"the Hadamard ensemble needs every |W[ell]|*N to be a power of two; "
                    f"N={self.N}, W={self.W} gives column counts {bad}. Pick a power-of-two N "
                    f"and a coupling whose window sizes are all powers of two (W <= 1 always "
                    f"works), or use the haar ensemble")
        return cfg

    def uncoupled(self):
        return replace(self, L=1, W=0)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)


DESK_PRESET = ExperimentConfig(
    L=8, W=1, N=1024, kappa=10.0, rho=0.1, snr_db=30.0, T=200, trials=200,
    deltas=(0.18, 0.2, 0.21, 0.22, 0.25, 0.3, 0.5, 1.0), zetas=(0.6, 0.7, 0.8, 1.0))


def make_trials(cfg, coupling, point, trial_ids):
    """Signals, stacked signals, batched operators and measurements for some trials."""
    prior_rho = cfg.rho
    sig, perms, signs, noise = [], [], [], []
    for trial in trial_ids:
        sig.append(sample_signals(coupling.L, coupling.N, prior_rho,
                                  seeding.stream(cfg.seed, seeding.SIGNAL, point, trial)))
        op_rng = seeding.stream(cfg.seed, seeding.PERMUTATION, point, trial)
        perms.append([op_rng.permutation(coupling.n_c(ell)) for ell in range(coupling.n_rows)])
        if cfg.random_signs:
            signs.append([op_rng.choice([-1.0, 1.0], size=coupling.n_c(ell))
                        for ell in range(coupling.n_rows)])
        noise_rng = seeding.stream(cfg.seed, seeding.NOISE, point, trial)
        noise.append([noise_rng.standard_normal(coupling.M) for _ in range(coupling.n_rows)])
    signals = np.stack(sig)
    x_vecs = build_all_x_vec(coupling, signals)
    ops = []
    for ell in range(coupling.n_rows):
        profile = condition_number_profile(coupling.M, coupling.N, coupling.w_count(ell),
                                           cfg.kappa)
        if cfg.ensemble == "structured":
            sign = np.stack([s[ell] for s in signs]) if cfg.random_signs else None
            ops.append(SensingOperator(profile, perm=np.stack([p[ell] for p in perms]),
                                       signs=sign))
        else:
            dense = [sample_haar_dense(coupling.M, profile.n_c, profile,
                                       seeding.stream(cfg.seed, seeding.HAAR, point, trial, ell))
                     for trial in trial_ids]
            ops.append(SensingOperator(profile, vt=np.stack([d.vt for d in dense])))
    ys = [op.forward(xv) + np.sqrt(coupling.sigma2) * np.stack([n[ell] for n in noise])
          for ell, (op, xv) in enumerate(zip(ops, x_vecs))]
    return signals, x_vecs, ops, ys


def _chunks(cfg):
    starts = range(0, cfg.trials, cfg.chunk_size)
    return [list(range(s, min(s + cfg.chunk_size, cfg.trials))) for s in starts]


def _run_chunk(args):
    cfg, point, zeta, trial_ids = args
    coupling = cfg.coupling(cfg.deltas[point])
    signals, _, ops, ys = make_trials(cfg, coupling, point, trial_ids)
    prior = BernoulliGaussianPrior(cfg.rho)
    _, trace = run(coupling, ops, ys, prior, zeta=zeta, T=cfg.T, signals=signals)
    return trace.mse[:, -1, :], trace.failed_at


@dataclass
class ExperimentResult:
    """Aggregates for one ``(delta, zeta)`` sweep point; completed trials only."""

    L: int
    W: int
    N: int
    M: int
    delta: float
    overall_rate: float
    zeta: float
    trial_largest_mse: np.ndarray
    section_mse: np.ndarray
    failed: int
    se_largest_mse: float
    best_zeta: bool = False
    wall_clock: float = field(default=0.0, compare=False)

    @property
    def completed(self):
        return int(np.sum(np.isfinite(self.trial_largest_mse)))

    def _done(self):
        return self.trial_largest_mse[np.isfinite(self.trial_largest_mse)]

    @property
    def largest_mse_mean(self):
        done = self._done()
        return float(np.mean(done)) if done.size else float("nan")

    @property
    def largest_mse_median(self):
        done = self._done()
        return float(np.median(done)) if done.size else float("nan")

    def largest_mse_quantile(self, q):
        done = self._done()
        return float(np.quantile(done, q)) if done.size else float("nan")


def run_sweep(cfg, progress=None):
    """Run every ``(delta, zeta)`` point; returns a list of :class:`ExperimentResult`."""
    tasks = [(cfg, p, z, ids) for p in range(len(cfg.deltas)) for z in cfg.zetas
             for ids in _chunks(cfg)]
    started = time.perf_counter()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outputs = list(pool.map(_run_chunk, tasks))
    else:
        outputs = []
        for i, task in enumerate(tasks):
            outputs.append(_run_chunk(task))
            if progress is not None:
                progress(i + 1, len(tasks))
    elapsed = time.perf_counter() - started
    prior = BernoulliGaussianPrior(cfg.rho)

    results, k = [], 0
    for p, delta in enumerate(cfg.deltas):
        coupling = cfg.coupling(delta)
        se = run_se(coupling, _profiles(cfg, coupling), prior,
                    T=max(cfg.T, 1), fp_tol=1e-300) if cfg.T > 0 else None
        se_largest = float(se.v_b[min(cfg.T, len(se.v_b) - 1)].max()) if se else 1.0
        point = []
        for zeta in cfg.zetas:
            parts = outputs[k:k + len(_chunks(cfg))]
            k += len(parts)
            final = np.concatenate([o[0] for o in parts])
            failed_at = np.concatenate([o[1] for o in parts])
            final[failed_at >= 0] = np.nan
            largest = final.max(axis=1)
            done = final[np.isfinite(largest)]
            section = done.mean(axis=0) if len(done) else np.full(coupling.L, np.nan)
            point.append(ExperimentResult(
                L=cfg.L, W=cfg.W, N=cfg.N, M=coupling.M, delta=delta,
                overall_rate=coupling.overall_rate, zeta=zeta, trial_largest_mse=largest,
                section_mse=section, failed=int(np.sum(failed_at >= 0)),
                se_largest_mse=se_largest, wall_clock=elapsed / len(cfg.deltas) / len(cfg.zetas)))
        means = [r.largest_mse_mean if np.isfinite(r.largest_mse_mean) else np.inf
                 for r in point]
        point[int(np.argmin(means))].best_zeta = True
        results.extend(point)
    return results


def run_comparison(cfg, progress=None):
    """Sweep ``cfg`` and its uncoupled counterpart ``(L, W) = (1, 0)``.

    Returns ``(coupled, uncoupled)`` result lists over the same compression
    rates and damping grid.
    """
    return run_sweep(cfg, progress), run_sweep(cfg.uncoupled(), progress)


def best_results(results):
    """The tuned-damping result for each sweep point."""
    return [r for r in results if r.best_zeta]


def _profiles(cfg, coupling):
    return [condition_number_profile(coupling.M, coupling.N, coupling.w_count(ell), cfg.kappa)
            for ell in range(coupling.n_rows)]


def se_trajectories(cfg):
    """State-evolution trajectory for every compression rate of the sweep."""
    prior = BernoulliGaussianPrior(cfg.rho)
    out = []
    for delta in cfg.deltas:
        coupling = cfg.coupling(delta)
        out.append((delta, coupling,
                    run_se(coupling, _profiles(cfg, coupling), prior, T=cfg.se_max_iter)))
    return out


def gaussian_stats(h, x):
    """Excess kurtosis and skewness of ``h`` and its sample correlation with ``x``."""
    h = np.ravel(h)
    x = np.ravel(x)
    return {"excess_kurtosis": float(stats.kurtosis(h, fisher=True, bias=False)),
            "skewness": float(stats.skew(h, bias=False)),
            "corr": float(np.corrcoef(h, x)[0, 1])}


def gaussianity_report(cfg, checkpoints=None, delta=None):
    """Gaussianity diagnostics of the module-A error vectors, pooled over trials.

    Runs OAMP (damping ``cfg.zetas[-1]``) on ``cfg.trials`` trials at the first
    compression rate (or ``delta``) and returns one row per checkpoint and
    row section.
    """
    checkpoints = tuple(cfg.checkpoints if checkpoints is None else checkpoints)
    delta = cfg.deltas[0] if delta is None else delta
    point = cfg.deltas.index(delta) if delta in cfg.deltas else 0
    coupling = cfg.coupling(delta)
    prior = BernoulliGaussianPrior(cfg.rho)
    T = max(checkpoints) + 1
    se = run_se(coupling, _profiles(cfg, coupling), prior, T=T, fp_tol=1e-300)
    counts = np.array([coupling.w_count(ell) for ell in range(coupling.n_rows)])
    captured = {t: [[] for _ in range(coupling.n_rows)] for t in checkpoints}
    for ids in _chunks(cfg):
        signals, x_vecs, ops, ys = make_trials(cfg, coupling, point, ids)

        def grab(state):
            t = state.t - 1
            if t in captured:
                h, _ = error_vectors(state, x_vecs, coupling)
                for ell in range(coupling.n_rows):
                    captured[t][ell].append((h[ell], x_vecs[ell] / np.sqrt(counts[ell])))

        run(coupling, ops, ys, prior, zeta=cfg.zetas[-1], T=T, callback=grab)
    rows = []
    for t in checkpoints:
        for ell in range(coupling.n_rows):
            h = np.concatenate([c[0] for c in captured[t][ell]])
            x = np.concatenate([c[1] for c in captured[t][ell]])
            row = {"t": t, "section": ell, "n_c": coupling.n_c(ell), "samples": h.size}
            row.update(gaussian_stats(h, x))
            emp = float(np.mean(h ** 2))
            pred = float(se.states[t + 1].v_ab[ell])
            row.update(empirical_var=emp, se_v_ab=pred, rel_gap=abs(emp - pred) / pred)
            rows.append(row)
    return rows


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def result_rows(results):
    """Long-format CSV records, one per ``(delta, zeta, statistic[, section | trial])``."""
    for r in results:
        head = {"L": r.L, "W": r.W, "N": r.N, "M": r.M, "delta": r.delta,
                "overall_rate": r.overall_rate, "zeta": r.zeta, "best_zeta": r.best_zeta}
        scalars = [("largest_mse_mean", r.largest_mse_mean),
                   ("largest_mse_median", r.largest_mse_median),
                   ("largest_mse_q05", r.largest_mse_quantile(0.05)),
                   ("largest_mse_q95", r.largest_mse_quantile(0.95)),
                   ("se_largest_mse", r.se_largest_mse),
                   ("completed", r.completed),
                   ("failed", r.failed)]
        for name, value in scalars:
            yield {**head, "statistic": name, "section": None, "trial": None, "value": value}
        for l, value in enumerate(r.section_mse):
            yield {**head, "statistic": "section_mse_mean", "section": l, "trial": None,
                   "value": value}
        for i, value in enumerate(r.trial_largest_mse):
            yield {**head, "statistic": "trial_largest_mse", "section": None, "trial": i,
                   "value": value}


def write_rows(rows, path, columns):
    """Write dictionaries as CSV to ``path`` (a filename or an open text stream)."""
    if hasattr(path, "write"):
        _write(path, rows, columns)
        return
    try:
        with open(path, "w", newline="") as fh:
            _write(fh, rows, columns)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _write(fh, rows, columns):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])


def write_metadata(path, cfg, extra=None):
    if hasattr(path, "write"):
        return
    meta = {"version": __version__, "config": cfg.to_dict() if cfg else None}
    meta.update(extra or {})
    try:
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise OSError(f"cannot write metadata next to {path}: {exc}") from exc


def emit_csv(results, path, cfg=None, extra=None):
    """Write sweep results as long-format CSV plus a ``.meta.json`` sidecar.

    Values are written with ``repr`` so they parse back to identical floats.
    Timing goes to the sidecar only, keeping the CSV reproducible.
    """
    results = list(results)
    write_rows(result_rows(results), path, CSV_COLUMNS)
    extra = dict(extra or {})
    extra.setdefault("wall_clock_seconds", float(sum(r.wall_clock for r in results)))
    write_metadata(path, cfg, extra)


def read_csv(path):
    """Parse a results CSV back into dictionaries with numeric values."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, text in row.items():
                if key == "statistic":
                    parsed[key] = text
                elif text == "":
                    parsed[key] = None
                elif key in ("L", "W", "N", "M", "section", "trial", "best_zeta"):
                    parsed[key] = int(text)
                else:
                    parsed[key] = float(text)
            out.append(parsed)
    return out
