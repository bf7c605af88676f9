"""Two-sample exchangeability tests, TV distance and moment checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import norm

from .automorphisms import HierAutomorphism, WindowTooSmall, apply
from .indices import Window
from .randomness import SeededSource, random_permutations_np

MIN_REPLICATES = 200
MIN_PERMUTATIONS = 200
MIN_MOMENT_SAMPLES = 1000


class StatsError(ValueError):
    pass


@dataclass
class TestReport:
    name: str
    statistic: float
    p_value: float
    level: float
    passed: bool
    replicates: tuple[int, ...] = ()
    permutations: int = 0
    diagnostics: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise StatsError(f"p-value {self.p_value} outside [0, 1]")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "level": self.level,
            "passed": self.passed,
            "replicates": list(self.replicates),
            "permutations": self.permutations,
            "diagnostics": self.diagnostics,
        }


def energy_statistic(x: np.ndarray, y: np.ndarray) -> float:
    """``2 E|X-Y| - E|X-X'| - E|Y-Y'|`` with V-statistic averages."""
    return (2 * cdist(x, y).mean() - cdist(x, x).mean() - cdist(y, y).mean()).item()


def energy_permutation_test(x: np.ndarray, y: np.ndarray, n_perms: int, src: SeededSource):
    """Observed energy statistic and its label-shuffle p-value ``(1 + #{T_b >= T}) / (B + 1)``."""
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    n, m = len(x), len(y)
    z = np.vstack([x, y])
    d = cdist(z, z)
    rowsum = d.sum(axis=1)
    total = rowsum.sum()
    labels = np.zeros((n + m, n_perms + 1))
    labels[:n, 0] = 1.0
    perms = random_permutations_np(src.seed, src.iv, n_perms, n + m)
    for b in range(n_perms):
        labels[perms[b, :n], b + 1] = 1.0
    dz = d @ labels
    xx = np.einsum("ib,ib->b", labels, dz)
    xr = labels.T @ rowsum
    xy = xr - xx
    yy = total - 2 * xr + xx
    stats = 2 * xy / (n * m) - xx / n**2 - yy / m**2
    obs = stats[0]
    p = (1 + np.count_nonzero(stats[1:] >= obs)) / (n_perms + 1)
    return float(obs), float(p)


def exchangeability_test(model, t: HierAutomorphism, w: Window, n_reps: int, n_perms: int,
                         src: SeededSource, level: float = 0.01) -> TestReport:
    """Compare window samples with fresh samples read at ``t``-permuted indices.

    ``model`` needs ``entries(w)`` and ``sample_matrix(src, entries, reps)``.
    """
    if n_reps < MIN_REPLICATES:
        raise StatsError(f"need at least {MIN_REPLICATES} replicates, got {n_reps}")
    if n_perms < MIN_PERMUTATIONS:
        raise StatsError(f"need at least {MIN_PERMUTATIONS} permutations, got {n_perms}")
    w = w if isinstance(w, Window) else Window(w)
    entries = model.entries(w)
    image = []
    for c, a in entries:
        b = apply(t, a)
        if not w.contains(b):
            raise WindowTooSmall(f"image {b} of {a} escapes the window {dict(w)}")
        image.append((c, b))
    x = model.sample_matrix(src.child("x"), entries, n_reps)
    y = model.sample_matrix(src.child("y"), image, n_reps)
    stat, p = energy_permutation_test(x, y, n_perms, src.child("perm"))
    gap = np.abs(x.mean(axis=0) - y.mean(axis=0))
    worst = int(np.argmax(gap))
    c, a = entries[worst]
    return TestReport(
        name="exchangeability",
        statistic=stat,
        p_value=p,
        level=level,
        passed=p >= level,
        replicates=(n_reps, n_reps),
        permutations=n_perms,
        diagnostics={
            "entries": len(entries),
            "moved_entries": sum(a != b for (_, a), (_, b) in zip(entries, image)),
            "max_mean_gap": float(gap[worst]),
            "max_gap_entry": {"C": list(a.dag.sort(c)), "alpha": a.as_dict()},
        },
    )


def tv_distance(empirical: Mapping, exact: Mapping, tol: float = 1e-9) -> float:
    """Half the L1 distance; keys missing on one side count as probability 0."""
    for name, dist in (("empirical", empirical), ("exact", exact)):
        s = math.fsum(dist.values())
        if abs(s - 1.0) > tol:
            raise StatsError(f"{name} frequencies sum to {s}, not 1")
    keys = set(empirical) | set(exact)
    return 0.5 * math.fsum(abs(float(empirical.get(k, 0)) - float(exact.get(k, 0))) for k in keys)


def moment_check(samples, expected_mean: Sequence[float] | None = None,
                 expected_cov=None, tolerance: float | tuple[float, float] = 0.05,
                 level: float = 0.01) -> TestReport:
    """Verdict by absolute tolerance on means and covariances.

    ``tolerance`` is one number or ``(mean_tol, cov_tol)``.  The p-value is a
    Bonferroni-corrected normal p-value for the worst mean deviation (1 when
    no mean is given); it is for information only.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < MIN_MOMENT_SAMPLES:
        raise StatsError(f"need at least {MIN_MOMENT_SAMPLES} samples, got {n}")
    mtol, ctol = (tolerance, tolerance) if np.isscalar(tolerance) else tolerance
    diag: dict = {"samples": n}
    passed = True
    worst = 0.0
    p = 1.0
    if expected_mean is not None:
        mu = np.broadcast_to(np.asarray(expected_mean, dtype=float), x.shape[1:])
        dev = x.mean(axis=0) - mu
        se = x.std(axis=0, ddof=1) / math.sqrt(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(dev == 0, 0.0, np.abs(dev) / se)
        p = float(min(1.0, 2 * norm.sf(z.max()) * z.size))
        diag["mean"] = x.mean(axis=0).tolist()
        diag["max_mean_deviation"] = float(np.abs(dev).max())
        worst = max(worst, diag["max_mean_deviation"])
        passed &= bool(np.abs(dev).max() <= mtol)
    if expected_cov is not None:
        cov = np.atleast_2d(np.cov(x, rowvar=False))
        dev = np.abs(cov - np.asarray(expected_cov, dtype=float))
        diag["cov"] = cov.tolist()
        diag["max_cov_deviation"] = float(dev.max())
        worst = max(worst, diag["max_cov_deviation"])
        passed &= bool(dev.max() <= ctol)
    return TestReport("moments", worst, p, level, bool(passed), (n,), 0, diag)
