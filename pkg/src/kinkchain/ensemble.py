"""Disorder ensembles over (sigma, tau_q, N) grids and the fits built on them.

Work items are single realizations. Their seeds come from
``realization_seed(base_seed, sigma_key, N, k)``: realization ``k`` of a
given ``(sigma, N)`` uses the same disorder at every ``tau_q``, so the
``tau_q`` dependence is measured on common random fields. Results are
reduced in a fixed order, so the worker count never changes any number.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .bdg import SingularOverlap, pair_wavefunction, solve_ground_modes
from .dynamics import NormDriftExceeded, QuenchProtocol, run_quench
from .lattice import ChainSpec, effective_fields, realization_seed, sample_disorder
from .observables import (
    correlation_bundle,
    kink_density,
    kink_overlap,
    log_abs_det_overlap,
    log_fidelity,
)

__all__ = [
    "InsufficientTail",
    "NonPositiveValue",
    "default_realizations",
    "EnsemblePlan",
    "StaticPlan",
    "RealizationRecord",
    "CellSummary",
    "CorrelationFit",
    "LocalSlope",
    "EnsembleResult",
    "run_ensemble",
    "run_static_ensemble",
    "average_fidelity",
    "log_average_fidelity",
    "mean_stderr",
    "fit_correlation_coefficient",
    "fit_local_slopes",
    "kzm_length_estimate",
]

log = logging.getLogger(__name__)

FAILURE_FLAG_FRACTION = 0.01


class InsufficientTail(ValueError):
    """Fewer than three points lie in the exponential tail."""


class NonPositiveValue(ValueError):
    """A logarithmic slope was requested through a non-positive value."""


def default_realizations(n_sites: int) -> int:
    return max(4, math.ceil(2048 / n_sites))


def sigma_key(sigma: float) -> int:
    return int(round(float(sigma) * 1_000_000))


def disorder_seed(base_seed: int, sigma: float, n_sites: int, index: int) -> int:
    return realization_seed(base_seed, sigma_key(sigma), n_sites, index)


@dataclass(frozen=True)
class EnsemblePlan:
    sigma_grid: tuple[float, ...]
    tau_q_grid: tuple[float, ...]
    n_grid: tuple[int, ...]
    base_seed: int = 0
    realizations_rule: Callable[[int], int] = default_realizations
    protocol: QuenchProtocol = field(default_factory=lambda: QuenchProtocol(1.0))
    bundles: bool = False

    def __post_init__(self):
        for name in ("sigma_grid", "tau_q_grid", "n_grid"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} is empty")
            object.__setattr__(self, name, values)

    def realizations(self, n_sites: int) -> int:
        return int(self.realizations_rule(n_sites))

    def protocol_for(self, tau_q: float) -> QuenchProtocol:
        return replace(self.protocol, tau_q=float(tau_q))

    def work_items(self) -> list[tuple[float, float, int, int]]:
        return [
            (float(s), float(t), int(n), k)
            for s in self.sigma_grid
            for t in self.tau_q_grid
            for n in self.n_grid
            for k in range(self.realizations(n))
        ]


@dataclass(frozen=True)
class StaticPlan:
    sigma_grid: tuple[float, ...]
    g_grid: tuple[float, ...]
    n_grid: tuple[int, ...]
    base_seed: int = 0
    realizations_rule: Callable[[int], int] = default_realizations
    bundles: bool = False

    def __post_init__(self):
        for name in ("sigma_grid", "g_grid", "n_grid"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} is empty")
            object.__setattr__(self, name, values)

    def realizations(self, n_sites: int) -> int:
        return int(self.realizations_rule(n_sites))

    def work_items(self) -> list[tuple[float, float, int, int]]:
        return [
            (float(s), float(g), int(n), k)
            for s in self.sigma_grid
            for g in self.g_grid
            for n in self.n_grid
            for k in range(self.realizations(n))
        ]


@dataclass
class RealizationRecord:
    sigma: float
    tau_q: float
    n_sites: int
    index: int
    seed: int
    g: float = math.nan
    d: float = math.nan
    log_f: float = math.nan
    d_ground: float = math.nan
    norm_drift: float = math.nan
    dt: float = math.nan
    retried: bool = False
    error: str | None = None
    bundle: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def delta_d(self) -> float:
        return self.d - self.d_ground

    def row(self) -> dict:
        out = asdict(self)
        out.pop("bundle")
        out["delta_d"] = self.delta_d
        return out


def _log_f(overlap) -> float:
    try:
        return log_fidelity(pair_wavefunction(overlap))
    except SingularOverlap:
        return log_abs_det_overlap(overlap)


def _bundle(overlap) -> dict | None:
    try:
        b = correlation_bundle(pair_wavefunction(overlap))
    except SingularOverlap:
        return None
    return {"C_r": b.C_r, "P_n": b.P_n, "PP_r": b.PP_r}


def _ground(r, g: float, bundles: bool):
    ov = kink_overlap(solve_ground_modes(effective_fields(r, g)))
    return kink_density(ov), _log_f(ov), (_bundle(ov) if bundles else None)


def _quench_item(args) -> RealizationRecord:
    sigma, tau_q, n, k, base_seed, protocol, bundles = args
    seed = disorder_seed(base_seed, sigma, n, k)
    p = replace(protocol, tau_q=tau_q)
    rec = RealizationRecord(sigma, tau_q, n, k, seed, g=p.g_final)
    r = sample_disorder(ChainSpec(n, sigma, seed))
    try:
        rec.d_ground = _ground(r, p.g_final, False)[0]
        try:
            final, _ = run_quench(r, p, observers={})
        except NormDriftExceeded:
            p = p.with_dt(p.step_size / 2)
            rec.retried = True
            final, _ = run_quench(r, p, observers={})
        ov = kink_overlap(final.modes)
        rec.d = kink_density(ov)
        rec.log_f = _log_f(ov)
        rec.norm_drift = final.norm_drift
        rec.dt = p.step_size
        if bundles:
            rec.bundle = _bundle(ov)
    except (NormDriftExceeded, np.linalg.LinAlgError, FloatingPointError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _static_item(args) -> RealizationRecord:
    sigma, g, n, k, base_seed, bundles = args
    seed = disorder_seed(base_seed, sigma, n, k)
    rec = RealizationRecord(sigma, math.nan, n, k, seed, g=g)
    r = sample_disorder(ChainSpec(n, sigma, seed))
    try:
        rec.d, rec.log_f, rec.bundle = _ground(r, g, bundles)
        rec.d_ground = rec.d
    except np.linalg.LinAlgError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _map(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=1))


def mean_stderr(x: Iterable[float]) -> tuple[float, float]:
    x = np.asarray(list(x), dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def log_average_fidelity(log_fs: Iterable[float]) -> float:
    """``log(mean(F))`` from per-realization ``log F`` via a max-shifted sum."""
    lf = np.asarray(list(log_fs), dtype=float)
    m = float(np.max(lf))
    if not np.isfinite(m):
        return m
    return m + math.log(float(np.mean(np.exp(lf - m))))


def average_fidelity(log_fs: Iterable[float]) -> tuple[float, float]:
    """Linear-space mean of ``F`` and its standard error, from per-realization ``log F``."""
    lf = np.asarray(list(log_fs), dtype=float)
    if lf.size < 2:
        raise ValueError("need at least two realizations")
    m = float(np.max(lf))
    w = np.exp(lf - m)
    scale = math.exp(m)
    return scale * float(w.mean()), scale * float(w.std(ddof=1) / math.sqrt(w.size))


@dataclass(frozen=True)
class CellSummary:
    sigma: float
    tau_q: float
    g: float
    n_sites: int
    n_ok: int
    n_failed: int
    d: float
    d_err: float
    d_ground: float
    d_ground_err: float
    delta_d: float
    delta_d_err: float
    log_f: float
    f: float
    f_err: float
    flagged: bool
    bundle: dict | None = None

    def row(self) -> dict:
        out = asdict(self)
        out.pop("bundle")
        return out


def _summarize(records: list[RealizationRecord], tau_q: float, g: float) -> CellSummary:
    ok = [r for r in records if r.ok]
    failed = len(records) - len(ok)
    first = records[0]
    d, d_err = mean_stderr(r.d for r in ok)
    dg, dg_err = mean_stderr(r.d_ground for r in ok)
    dd, dd_err = mean_stderr(r.delta_d for r in ok)
    if len(ok) >= 2:
        f, f_err = average_fidelity(r.log_f for r in ok)
        lf = log_average_fidelity(r.log_f for r in ok)
    elif ok:
        lf, f, f_err = ok[0].log_f, math.exp(ok[0].log_f), math.nan
    else:
        lf = f = f_err = math.nan
    bundle = None
    withb = [r.bundle for r in ok if r.bundle is not None]
    if withb:
        bundle = {key: np.mean([b[key] for b in withb], axis=0) for key in withb[0]}
    return CellSummary(
        sigma=first.sigma,
        tau_q=tau_q,
        g=g,
        n_sites=first.n_sites,
        n_ok=len(ok),
        n_failed=failed,
        d=d,
        d_err=d_err,
        d_ground=dg,
        d_ground_err=dg_err,
        delta_d=dd,
        delta_d_err=dd_err,
        log_f=lf,
        f=f,
        f_err=f_err,
        flagged=failed > FAILURE_FLAG_FRACTION * len(records),
        bundle=bundle,
    )


@dataclass(frozen=True)
class CorrelationFit:
    c: float
    slope: float
    intercept: float
    residual: float
    n_points: int
    used: tuple[int, ...]
    sensitivity: dict
    d: float = math.nan

    @property
    def d_exc(self) -> float:
        return self.c * self.d


@dataclass(frozen=True)
class LocalSlope:
    tau_lo: float
    tau_hi: float
    w: float
    w_err: float


@dataclass
class EnsembleResult:
    kind: str
    records: list[RealizationRecord]
    cells: list[CellSummary]
    fits: dict = field(default_factory=dict)

    def cell(self, sigma: float, n_sites: int, tau_q: float = math.nan, g: float = math.nan) -> CellSummary:
        for c in self.cells:
            if c.sigma == sigma and c.n_sites == n_sites and (
                (self.kind == "quench" and c.tau_q == tau_q) or (self.kind == "static" and c.g == g)
            ):
                return c
        raise KeyError((sigma, n_sites, tau_q, g))

    def failures(self) -> list[RealizationRecord]:
        return [r for r in self.records if not r.ok]


def _fits(cells: list[CellSummary], axis: str) -> dict:
    fits: dict = {"c": {}, "w": {}}
    groups: dict = {}
    for c in cells:
        groups.setdefault((c.sigma, getattr(c, axis)), []).append(c)
    for key, cs in groups.items():
        cs = sorted(cs, key=lambda c: c.n_sites)
        d = cs[-1].d
        try:
            fits["c"][key] = fit_correlation_coefficient([c.n_sites for c in cs], [c.log_f for c in cs], d)
        except (InsufficientTail, ValueError) as exc:
            fits["c"][key] = str(exc)
    if axis == "tau_q":
        by_n: dict = {}
        for c in cells:
            by_n.setdefault((c.sigma, c.n_sites), []).append(c)
        for key, cs in by_n.items():
            cs = sorted(cs, key=lambda c: c.tau_q)
            if len(cs) < 2:
                continue
            try:
                fits["w"][key] = fit_local_slopes(
                    [c.tau_q for c in cs], [c.delta_d for c in cs], [c.delta_d_err for c in cs]
                )
            except NonPositiveValue as exc:
                fits["w"][key] = str(exc)
    return fits


def run_ensemble(plan: EnsemblePlan, workers: int = 1) -> EnsembleResult:
    """Run every quench of the plan and reduce per ``(sigma, tau_q, N)`` cell."""
    items = [(s, t, n, k, plan.base_seed, plan.protocol, plan.bundles) for (s, t, n, k) in plan.work_items()]
    records = _map(_quench_item, items, workers)
    records.sort(key=lambda r: (r.sigma, r.tau_q, r.n_sites, r.index))
    cells = []
    for s in plan.sigma_grid:
        for t in plan.tau_q_grid:
            for n in plan.n_grid:
                rs = [r for r in records if r.sigma == s and r.tau_q == t and r.n_sites == n]
                cells.append(_summarize(rs, float(t), plan.protocol.g_final))
    for r in records:
        if not r.ok:
            log.warning("realization %d of (sigma=%g, tau_q=%g, N=%d) failed: %s", r.index, r.sigma, r.tau_q, r.n_sites, r.error)
    return EnsembleResult("quench", records, cells, _fits(cells, "tau_q"))


def run_static_ensemble(plan: StaticPlan, workers: int = 1) -> EnsembleResult:
    """Ground-state ensembles per ``(sigma, g, N)`` cell; the record's ``tau_q`` is nan."""
    items = [(s, g, n, k, plan.base_seed, plan.bundles) for (s, g, n, k) in plan.work_items()]
    records = _map(_static_item, items, workers)
    cells = []
    i = 0
    for s in plan.sigma_grid:
        for g in plan.g_grid:
            for n in plan.n_grid:
                m = plan.realizations(n)
                cells.append(_summarize(records[i : i + m], math.nan, float(g)))
                i += m
    return EnsembleResult("static", records, cells, _fits(cells, "g"))


def _tail_fit(n: np.ndarray, lf: np.ndarray, d: float, f_max: float, nd_min: float):
    sel = np.flatnonzero((lf < math.log(f_max)) & (n * d >= nd_min) & np.isfinite(lf))
    if sel.size < 3:
        raise InsufficientTail(f"{sel.size} points with F < {f_max} and N d >= {nd_min}; need 3")
    A = np.column_stack([n[sel], np.ones(sel.size)])
    coef, *_ = np.linalg.lstsq(A, lf[sel], rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - lf[sel]) ** 2)))
    return float(coef[0]), float(coef[1]), resid, sel


def fit_correlation_coefficient(
    n_sites: Sequence[float],
    log_f: Sequence[float],
    d: float,
    f_max: float = 0.1,
    nd_min: float = 3.0,
) -> CorrelationFit:
    """Fit ``log F = m N + b`` on the exponential tail and return ``c = (1 - e^m) / d``.

    ``log_f`` holds the log of the ensemble-averaged fidelity per chain
    length. The metadata refits with neighbouring thresholds to show how
    much ``c`` depends on the tail selection.
    """
    n = np.asarray(n_sites, dtype=float)
    lf = np.asarray(log_f, dtype=float)
    if not d > 0:
        raise ValueError("kink density must be positive")
    m, b, resid, sel = _tail_fit(n, lf, d, f_max, nd_min)
    sensitivity = {}
    for fm, nd in ((0.05, nd_min), (0.2, nd_min), (f_max, nd_min - 1), (f_max, nd_min + 1)):
        try:
            mm = _tail_fit(n, lf, d, fm, nd)[0]
            sensitivity[f"F<{fm:g},Nd>={nd:g}"] = (1.0 - math.exp(mm)) / d
        except InsufficientTail:
            sensitivity[f"F<{fm:g},Nd>={nd:g}"] = None
    return CorrelationFit(
        c=(1.0 - math.exp(m)) / d,
        slope=m,
        intercept=b,
        residual=resid,
        n_points=int(sel.size),
        used=tuple(int(i) for i in sel),
        sensitivity=sensitivity,
        d=float(d),
    )


def fit_local_slopes(
    tau_q: Sequence[float],
    delta_d: Sequence[float],
    delta_d_err: Sequence[float] | None = None,
) -> list[LocalSlope]:
    """Slopes ``w_i = d log(delta_d) / d log(tau_q)`` between consecutive points."""
    t = np.asarray(tau_q, dtype=float)
    y = np.asarray(delta_d, dtype=float)
    e = np.zeros_like(y) if delta_d_err is None else np.nan_to_num(np.asarray(delta_d_err, dtype=float))
    if t.size < 2:
        raise ValueError("need at least two points")
    if np.any(t <= 0) or np.any(y <= 0):
        raise NonPositiveValue("tau_q and delta_d must be positive")
    order = np.argsort(t)
    t, y, e = t[order], y[order], e[order]
    out = []
    for i in range(t.size - 1):
        dl = math.log(t[i + 1] / t[i])
        w = math.log(y[i + 1] / y[i]) / dl
        w_err = math.hypot(e[i] / y[i], e[i + 1] / y[i + 1]) / dl
        out.append(LocalSlope(float(t[i]), float(t[i + 1]), w, w_err))
    return out


def kzm_length_estimate(tau_q, alpha: float = 1.0):
    """``ln^2(alpha tau_q) / ln^2(ln(alpha tau_q))`` for ``alpha tau_q > e``."""
    x = alpha * np.asarray(tau_q, dtype=float)
    if np.any(x <= math.e):
        raise ValueError("alpha * tau_q must exceed e")
    lx = np.log(x)
    out = lx**2 / np.log(lx) ** 2
    return float(out) if out.ndim == 0 else out
