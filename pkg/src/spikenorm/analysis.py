"""Spiking summaries, fitness curves and Kruskal-Wallis comparisons over experiment logs."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaincc
from scipy.stats import rankdata

from .dynamics import EvalResult
from .evolution import LogRow
from .normalization import CONTROL_OF, POLICY_NAMES


# --- spiking summaries ---------------------------------------------------------

@dataclass
class SpikingSummary:
    n: int
    median: float
    sd: float
    q1: float
    q3: float
    outliers: np.ndarray = field(repr=False)

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def summarize_sample(values) -> SpikingSummary:
    """Median, sample SD, quartiles and Tukey (1.5 IQR) outliers of a 1-D sample."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot summarise an empty sample")
    q1, median, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    outside = (x < q1 - 1.5 * iqr) | (x > q3 + 1.5 * iqr)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return SpikingSummary(int(x.size), float(median), sd, float(q1), float(q3), np.sort(x[outside]))


def summarize_spiking(results: EvalResult | Sequence[EvalResult], layer: int) -> SpikingSummary:
    """Summarise per-neuron spike counts per test input of one layer, pooled over all results."""
    if isinstance(results, EvalResult):
        results = [results]
    if not results:
        raise ValueError("no evaluation results to summarise")
    return summarize_sample(np.concatenate([r.layer_counts(layer).ravel() for r in results]))


# --- Kruskal-Wallis ---------------------------------------------------------------

@dataclass(frozen=True)
class KWResult:
    h_statistic: float
    degrees_of_freedom: int
    p_value: float
    tie_corrected: bool


def _h_statistic(pooled: np.ndarray, sizes: Sequence[int]) -> tuple[float, bool]:
    n = pooled.size
    ranks = rankdata(pooled)
    bounds = np.cumsum([0, *sizes])
    h = 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        h += (hi - lo) * (ranks[lo:hi].mean() - (n + 1) / 2.0) ** 2
    h *= 12.0 / (n * (n + 1))
    _, ties = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(ties.astype(float) ** 3 - ties))
    if tie_term == 0.0:
        return h, False
    divisor = 1.0 - tie_term / (n ** 3 - n)
    if divisor <= 0.0:
        return 0.0, True  # every value identical
    return h / divisor, True


def chi2_sf(x: float, df: int) -> float:
    """Chi-square survival function via the regularised upper incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def kruskal_wallis(
    groups: Sequence[Iterable[float]],
    method: str = "chi2",
    n_permutations: int = 9999,
    rng: np.random.Generator | int | None = None,
) -> KWResult:
    """Kruskal-Wallis H test with tie correction.

    ``method="chi2"`` uses the asymptotic chi-square distribution with k-1
    degrees of freedom; ``method="permutation"`` estimates p by reshuffling
    group membership, which is preferable for very small groups.
    """
    samples = [np.asarray(list(g), dtype=float).ravel() for g in groups]
    if len(samples) < 2:
        raise ValueError("need at least two groups")
    if any(s.size == 0 for s in samples):
        raise ValueError("every group must be nonempty")
    sizes = [s.size for s in samples]
    pooled = np.concatenate(samples)
    h, tie_corrected = _h_statistic(pooled, sizes)
    df = len(samples) - 1
    if h == 0.0:
        return KWResult(0.0, df, 1.0, tie_corrected)
    if method == "chi2":
        p = chi2_sf(h, df)
    elif method == "permutation":
        rng = np.random.default_rng(rng)
        hits = sum(_h_statistic(rng.permutation(pooled), sizes)[0] >= h * (1 - 1e-12) for _ in range(n_permutations))
        p = (hits + 1) / (n_permutations + 1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return KWResult(float(h), df, min(max(p, 0.0), 1.0), tie_corrected)


# --- log-level analyses ---------------------------------------------------------

def _by_policy(rows: Iterable[LogRow]) -> dict[str, list[LogRow]]:
    out: dict[str, list[LogRow]] = defaultdict(list)
    for r in rows:
        out[r.policy].append(r)
    return dict(out)


def _ordered(policies: Iterable[str]) -> list[str]:
    known = [p for p in POLICY_NAMES if p in policies]
    return known + sorted(set(policies) - set(known))


def repeat_fitness(rows: Sequence[LogRow], generation: int, sample: str = "best") -> list[float]:
    """One fitness value per repeat at ``generation``: population best or mean purity."""
    per_repeat: dict[int, list[float]] = defaultdict(list)
    for r in rows:
        if r.generation == generation:
            per_repeat[r.repeat].append(r.purity)
    reduce = {"best": max, "mean": lambda v: float(np.mean(v))}[sample]
    return [reduce(per_repeat[k]) for k in sorted(per_repeat)]


def final_generation(rows: Sequence[LogRow]) -> int:
    return max(r.generation for r in rows)


def _check_generations(policy: str, rows: Sequence[LogRow], generations: Sequence[int]) -> None:
    repeats = {r.repeat for r in rows}
    for g in generations:
        present = {r.repeat for r in rows if r.generation == g}
        if present != repeats:
            missing = sorted(repeats - present)
            raise ValueError(f"policy {policy}: generation {g} missing for repeat(s) {missing}")


@dataclass(frozen=True)
class Comparison:
    comparison: str
    h: float
    df: int
    p: float


def compare_conditions(rows: Iterable[LogRow], sample: str = "best", method: str = "chi2") -> list[Comparison]:
    """First vs last generation within each policy, and each normalised policy vs its control at the last generation."""
    groups = _by_policy(rows)
    if len(groups) < 2:
        raise ValueError("need logs from at least two policies")
    last = {p: final_generation(r) for p, r in groups.items()}
    if len(set(last.values())) != 1:
        raise ValueError(f"policies end at different generations: {last}")
    g_last = next(iter(last.values()))
    for p, r in groups.items():
        _check_generations(p, r, [0, g_last])

    out = []
    for p in _ordered(groups):
        kw = kruskal_wallis([repeat_fitness(groups[p], 0, sample), repeat_fitness(groups[p], g_last, sample)],
                            method=method)
        out.append(Comparison(f"{p}:gen0_vs_gen{g_last}", kw.h_statistic, kw.degrees_of_freedom, kw.p_value))
    for p in _ordered(groups):
        control = CONTROL_OF.get(p)
        if control is None or control not in groups:
            continue
        kw = kruskal_wallis([repeat_fitness(groups[p], g_last, sample),
                             repeat_fitness(groups[control], g_last, sample)], method=method)
        out.append(Comparison(f"{p}_vs_{control}:gen{g_last}", kw.h_statistic, kw.degrees_of_freedom, kw.p_value))
    return out


@dataclass(frozen=True)
class CurvePoint:
    generation: int
    policy: str
    mean: float
    sd: float


def fitness_curve(rows: Iterable[LogRow], sample: str = "best") -> list[CurvePoint]:
    out = []
    groups = _by_policy(rows)
    for p in _ordered(groups):
        for g in sorted({r.generation for r in groups[p]}):
            values = repeat_fitness(groups[p], g, sample)
            sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
            out.append(CurvePoint(g, p, float(np.mean(values)), sd))
    return out


@dataclass(frozen=True)
class SummaryRow:
    policy: str
    generation: int
    layer: str
    n: int
    median: float
    sd: float
    q1: float
    q3: float
    outliers: str


def spiking_table(rows: Iterable[LogRow]) -> list[SummaryRow]:
    """Per (policy, generation, layer) summary of the networks' median spike counts."""
    out = []
    groups = _by_policy(rows)
    for p in _ordered(groups):
        for g in sorted({r.generation for r in groups[p]}):
            at_g = [r for r in groups[p] if r.generation == g]
            for layer, attr in (("hidden", "spikes_hidden_median"), ("output", "spikes_output_median")):
                values = [getattr(r, attr) for r in at_g if not math.isnan(getattr(r, attr))]
                if not values:
                    continue
                s = summarize_sample(values)
                out.append(SummaryRow(p, g, layer, s.n, s.median, s.sd, s.q1, s.q3,
                                      " ".join(repr(float(v)) for v in s.outliers)))
    return out


# --- files ---------------------------------------------------------------------

def _write_rows(path: Path, rows: Sequence, header: Sequence[str]) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(r)])
    return path


def write_analysis(rows: Sequence[LogRow], out_dir, sample: str = "best", method: str = "chi2",
                   plots: bool = False) -> dict[str, Path]:
    """Write spiking_summary.csv, fitness_curve.csv, significance.csv (and SVG plots on request)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spiking = spiking_table(rows)
    curve = fitness_curve(rows, sample)
    written = {
        "spiking_summary": _write_rows(out_dir / "spiking_summary.csv", spiking,
                                       [f.name for f in fields(SummaryRow)]),
        "fitness_curve": _write_rows(out_dir / "fitness_curve.csv", curve, ("generation", "policy", "mean", "sd")),
    }
    if len(_by_policy(rows)) >= 2:
        sig = compare_conditions(rows, sample, method)
        written["significance"] = _write_rows(out_dir / "significance.csv", sig, ("comparison", "H", "df", "p"))
    if plots:
        written.update(_plot(rows, curve, out_dir))
    return written


def _plot(rows: Sequence[LogRow], curve: Sequence[CurvePoint], out_dir: Path) -> dict[str, Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = {}
    fig, ax = plt.subplots(figsize=(6, 4))
    for p in _ordered({c.policy for c in curve}):
        pts = [c for c in curve if c.policy == p]
        ax.errorbar([c.generation for c in pts], [c.mean for c in pts], yerr=[c.sd for c in pts],
                    label=p, capsize=2)
    ax.set_xlabel("generation")
    ax.set_ylabel("purity")
    ax.legend(fontsize="small")
    paths["fitness_plot"] = out_dir / "fitness_curve.svg"
    fig.savefig(paths["fitness_plot"], format="svg")
    plt.close(fig)

    groups = _by_policy(rows)
    for layer, attr in (("hidden", "spikes_hidden_median"), ("output", "spikes_output_median")):
        fig, ax = plt.subplots(figsize=(7, 4))
        names = _ordered(groups)
        data = [[getattr(r, attr) for r in groups[p] if r.generation == final_generation(groups[p])]
                for p in names]
        ax.boxplot(data)
        ax.set_xticks(range(1, len(names) + 1), names, rotation=30, fontsize="small")
        ax.set_ylabel(f"median spikes per neuron ({layer})")
        fig.tight_layout()
        key = f"spiking_{layer}_plot"
        paths[key] = out_dir / f"spiking_{layer}.svg"
        fig.savefig(paths[key], format="svg")
        plt.close(fig)
    return paths
