"""Monte-Carlo experiments, ranking metrics and closed-form error bounds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .exact import CentralityVector
from .graph import DegreeProfile, Graph, clipping_params_for
from .privacy import NoiseSource, harmonic_number
from .protocol import DivergenceError, ProtocolConfig, simulate_batch, user_step

__all__ = [
    "PHI",
    "ExperimentResult",
    "BoundReport",
    "RatioCheckReport",
    "monte_carlo",
    "topk",
    "topk_recall",
    "bound_path_bias",
    "bound_katz_bias",
    "bound_path_variance",
    "bound_katz_variance",
    "bound_report",
    "noclip_noise_growth",
    "privacy_ratio_check",
    "sweep",
    "SWEEP_COLUMNS",
]

PHI = (1.0 + math.sqrt(5.0)) / 2.0

# elements of one (n, trials) block kept in memory at once
_CHUNK_ELEMENTS = 4_000_000


def _values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, CentralityVector) else x, dtype=np.float64)


def topk(values, k: int) -> np.ndarray:
    """Indices of the ``k`` largest entries; ties go to the smaller node id."""
    v = _values(values)
    order = np.lexsort((np.arange(len(v)), -v))
    return order[:k]


def topk_recall(exact, estimate, k: int) -> float:
    """Fraction of the true top-``k`` nodes that are also in the estimated top-``k``."""
    e = _values(exact)
    if not 1 <= k <= len(e):
        raise ValueError(f"k={k} outside 1..{len(e)}")
    hit = np.intersect1d(topk(e, k), topk(estimate, k), assume_unique=True)
    return len(hit) / k


@dataclass
class ExperimentResult:
    """Aggregate statistics of many seeded protocol runs against a reference vector.

    ``bias`` is ``exact - mean`` so the clipped estimator's bias is positive.
    ``loss`` is the node-average of ``variance + bias**2``.
    """

    trials: int
    per_node_mean: np.ndarray
    per_node_variance: np.ndarray
    per_node_bias: np.ndarray
    per_node_var_se: np.ndarray
    mean_bias: float
    mean_variance: float
    loss: float
    recall_at_k: dict
    recall_halfwidth: dict
    diverged_trials: int
    config: ProtocolConfig
    seed_base: int
    exact: np.ndarray = field(repr=False)
    step: int | None = None

    @property
    def valid_trials(self) -> int:
        return self.trials - self.diverged_trials

    @property
    def bias_squared(self) -> float:
        return float(np.mean(self.per_node_bias**2))

    @property
    def per_node_mean_se(self) -> np.ndarray:
        return np.sqrt(self.per_node_variance / self.valid_trials)

    @property
    def per_node_loss(self) -> np.ndarray:
        return self.per_node_variance + self.per_node_bias**2

    def summary(self) -> dict:
        out = {
            "trials": self.trials,
            "diverged_trials": self.diverged_trials,
            "seed_base": self.seed_base,
            "step": "katz" if self.step is None else self.step,
            "mean_bias": self.mean_bias,
            "bias_squared": self.bias_squared,
            "mean_variance": self.mean_variance,
            "loss": self.loss,
        }
        for k, r in self.recall_at_k.items():
            out[f"recall@{k}"] = r
            out[f"recall@{k}_ci95"] = self.recall_halfwidth[k]
        return out

    def to_csv(self, per_node_path, summary_path=None) -> None:
        """Per-node columns: node, exact, mean, variance, bias, loss. Summary: key, value."""
        with open(per_node_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "exact", "mean", "variance", "bias", "loss"])
            for v in range(len(self.exact)):
                w.writerow([v] + [repr(float(a[v])) for a in (
                    self.exact, self.per_node_mean, self.per_node_variance,
                    self.per_node_bias, self.per_node_loss)])
        if summary_path is not None:
            with open(summary_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["key", "value"])
                for k, val in self.summary().items():
                    w.writerow([k, val])


def monte_carlo(g: Graph, cfg: ProtocolConfig, trials: int, exact, ks: Sequence[int] = (10, 100),
                step: int | None = None, seed_base: int | None = None) -> ExperimentResult:
    """Run the protocol with seeds ``seed_base .. seed_base + trials - 1``.

    The estimate is the Katz vector, or with ``step=i`` the round-``i`` value
    before clipping (compare against ``alpha**i * P^(i)``). Diverged trials
    are counted and left out of the moments. Recall is averaged over trials
    for each ``k <= n``; its half-width is ``1.96 * se``.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    ex = _values(exact)
    if len(ex) != g.n:
        raise ValueError("reference vector length does not match graph")
    base = cfg.seed if seed_base is None else int(seed_base)
    seeds = np.arange(trials, dtype=np.uint64) + np.uint64(base)
    ks = [k for k in ks if 1 <= k <= g.n]
    chunk = max(1, _CHUNK_ELEMENTS // max(g.n, 1))

    blocks, recalls = [], {k: [] for k in ks}
    diverged = 0
    for lo in range(0, trials, chunk):
        tr = simulate_batch(g, cfg, seeds[lo : lo + chunk], keep_pre_clip=() if step is None else (step,))
        est = tr.katz if step is None else tr.pre_clip[step]
        ok = ~tr.diverged
        diverged += int((~ok).sum())
        est = est[:, ok]
        blocks.append(est)
        for k in ks:
            recalls[k].extend(topk_recall(ex, est[:, t], k) for t in range(est.shape[1]))
    if diverged == trials:
        raise DivergenceError("all trials diverged")
    est = np.concatenate(blocks, axis=1)
    T = est.shape[1]

    mean = est.mean(axis=1)
    centred = est - mean[:, None]
    m2 = np.mean(centred**2, axis=1)
    m4 = np.mean(centred**4, axis=1)
    var = m2 * T / (T - 1) if T > 1 else np.full(g.n, np.nan)
    var_se = np.sqrt(np.maximum(m4 - m2**2, 0.0) / T)
    bias = ex - mean

    rec, half = {}, {}
    for k in ks:
        r = np.asarray(recalls[k])
        rec[k] = float(r.mean())
        half[k] = float(1.96 * r.std(ddof=1) / math.sqrt(len(r))) if len(r) > 1 else float("nan")

    return ExperimentResult(
        trials=trials,
        per_node_mean=mean,
        per_node_variance=var,
        per_node_bias=bias,
        per_node_var_se=var_se,
        mean_bias=float(bias.mean()),
        mean_variance=float(var.mean()),
        loss=float(np.mean(var + bias**2)),
        recall_at_k=rec,
        recall_halfwidth=half,
        diverged_trials=diverged,
        config=cfg,
        seed_base=base,
        exact=ex,
        step=step,
    )


# closed-form bounds


def bound_path_bias(D: float, X: float, S: int, epsilon: float, i: int) -> float:
    """Upper bound on ``max_v E[P^(i)[v] - K~(i)[v]]`` with alpha = 1."""
    return 2.0 * (PHI * X) ** (i - 1) * D * S / epsilon


def bound_katz_bias(alpha: float, X: float, D: float, S: int, epsilon: float) -> float:
    """Upper bound on the Katz estimator's bias; needs ``alpha < 1/(phi X)``."""
    return alpha * S / epsilon * (1.0 + 2.0 * alpha * PHI * D * X / (1.0 - alpha * PHI * X))


def _L(N: float, D: float, X: float) -> float:
    return max(N * D, X * X)


def bound_path_variance(D: float, X: float, S: int, epsilon: float, N: float, i: int) -> float:
    """Upper bound on ``max_v Var[K~(i)[v]]`` with alpha = 1, growth base ``4L``."""
    L = _L(N, D, X)
    return 32.0 * S**2 * (D**2 + X**2) * (4.0 * L) ** (i - 2) / epsilon**2


def bound_katz_variance(alpha: float, D: float, X: float, N: float, S: int, epsilon: float) -> float:
    """Upper bound on the Katz estimator's variance.

    Raises ``ValueError`` unless ``alpha < 1/(2 sqrt(L))``; at or past that point the
    formula has a pole and says nothing.
    """
    L = _L(N, D, X)
    gap = 1.0 - 2.0 * alpha * math.sqrt(L)
    if gap <= 0:
        raise ValueError(f"precondition alpha < 1/(2*sqrt(L)) violated: alpha={alpha:g}, L={L:g}")
    return 8.0 * S**2 * alpha**2 * (D**2 + X**2) / (L * epsilon**2 * gap**2)


@dataclass(frozen=True)
class BoundReport:
    D: float
    X: float
    N: float
    alpha: float
    S: int
    epsilon: float
    i: int
    L: float
    path_bias_bound: float
    katz_bias_bound: float
    path_variance_bound: float
    katz_variance_bound: float
    alpha_lt_inv_phi_x: bool
    s_over_eps_ge_1: bool
    x_condition: bool
    alpha_le_inv_2sqrt_l: bool
    s_ge_i: bool

    COLUMNS = (
        "D", "X", "N", "alpha", "S", "epsilon", "i", "L",
        "path_bias_bound", "katz_bias_bound", "path_variance_bound", "katz_variance_bound",
        "alpha_lt_inv_phi_x", "s_over_eps_ge_1", "x_condition", "alpha_le_inv_2sqrt_l", "s_ge_i",
    )

    @property
    def path_preconditions(self) -> bool:
        return self.s_ge_i and self.x_condition

    @property
    def katz_bias_preconditions(self) -> bool:
        return self.alpha_lt_inv_phi_x and self.s_over_eps_ge_1 and self.x_condition

    @property
    def katz_variance_preconditions(self) -> bool:
        return self.alpha_le_inv_2sqrt_l

    def row(self) -> list:
        return [getattr(self, c) for c in self.COLUMNS]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            w.writerow(self.row())


def bound_report(D, X, N, alpha, S, epsilon, i) -> BoundReport:
    """All four bounds plus the precondition flags each one depends on.

    A Katz bound whose formula breaks down (pole or sign flip) is reported as NaN.
    """
    L = _L(N, D, X)
    alpha_ok = alpha < 1.0 / (PHI * X)
    try:
        katz_var = bound_katz_variance(alpha, D, X, N, S, epsilon)
    except ValueError:
        katz_var = math.nan
    return BoundReport(
        D=D, X=X, N=N, alpha=alpha, S=S, epsilon=epsilon, i=i, L=L,
        path_bias_bound=bound_path_bias(D, X, S, epsilon, i),
        katz_bias_bound=bound_katz_bias(alpha, X, D, S, epsilon) if alpha_ok else math.nan,
        path_variance_bound=bound_path_variance(D, X, S, epsilon, N, i),
        katz_variance_bound=katz_var,
        alpha_lt_inv_phi_x=alpha_ok,
        s_over_eps_ge_1=S / epsilon >= 1.0,
        x_condition=X * X / D + X <= X * X,
        alpha_le_inv_2sqrt_l=alpha <= 1.0 / (2.0 * math.sqrt(L)),
        s_ge_i=S >= i,
    )


def noclip_noise_growth(n: int, alpha: float, S: int, epsilon: float) -> list[float]:
    """Expected unclipped noise scale per round on the edgeless graph.

    ``E[N_1] = 2 alpha S / eps`` and ``E[N_{i+1}] = (2 alpha S / eps) H_n E[N_i]``.
    """
    base = 2.0 * alpha * S / epsilon
    h = harmonic_number(n)
    out = [base]
    for _ in range(S - 1):
        out.append(base * h * out[-1])
    return out


@dataclass(frozen=True)
class RatioCheckReport:
    passed: bool
    epsilon_round: float
    scale: float
    sensitivity: float
    samples: int
    bins_tested: int
    max_log_ratio: float
    offending_bin: tuple | None

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        s = (f"{status}: eps_round={self.epsilon_round:g} scale={self.scale:g} "
             f"max|log ratio|={self.max_log_ratio:.4f} over {self.bins_tested} bins")
        if self.offending_bin is not None:
            s += f"; offending bin [{self.offending_bin[0]:.4g}, {self.offending_bin[1]:.4g})"
        return s


def privacy_ratio_check(epsilon_round: float, sensitivity: float, samples: int, scale: float | None = None,
                        seed: int = 0, z: float = 4.0, min_expected: float = 100.0) -> RatioCheckReport:
    """Empirical check of the per-round e^eps likelihood-ratio bound.

    Runs one user's round computation on two neighbor lists that differ in a
    single bit, where the flipped neighbor carries the largest broadcast value
    ``sensitivity`` (alpha = 1). Both output samples are histogrammed with bin
    width ``scale/10`` over ``+-10*scale``. Every bin whose expected count is at
    least ``min_expected`` under both distributions must satisfy
    ``|log(c1/c2)| <= epsilon_round + z*sqrt(1/c1 + 1/c2)``.
    ``scale`` defaults to ``sensitivity / epsilon_round``, what the protocol uses.
    """
    if scale is None:
        scale = sensitivity / epsilon_round
    if not scale > 0:
        raise ValueError("noise scale must be positive")
    broadcast = np.array([sensitivity, 0.5 * sensitivity, 0.25 * sensitivity])
    row_a = [1, 2]
    row_b = [0, 1, 2]
    ca = user_step(row_a, broadcast, 1.0, scale, None)
    cb = user_step(row_b, broadcast, 1.0, scale, None)
    ns = NoiseSource(seed)
    xa = ca + ns.child(0).laplace(scale, samples)
    xb = cb + ns.child(1).laplace(scale, samples)

    mid = 0.5 * (ca + cb)
    edges = mid + scale * np.linspace(-10.0, 10.0, 201)
    ha, _ = np.histogram(xa, edges)
    hb, _ = np.histogram(xb, edges)
    ea = samples * np.diff(stats.laplace.cdf(edges, loc=ca, scale=scale))
    eb = samples * np.diff(stats.laplace.cdf(edges, loc=cb, scale=scale))

    tested = 0
    worst = 0.0
    offending = None
    for j in np.flatnonzero((ea >= min_expected) & (eb >= min_expected)):
        tested += 1
        a, b = int(ha[j]), int(hb[j])
        if a == 0 or b == 0:
            offending = offending or (edges[j], edges[j + 1])
            worst = math.inf
            continue
        lr = abs(math.log(a / b))
        worst = max(worst, lr)
        if lr - epsilon_round > z * math.sqrt(1.0 / a + 1.0 / b) and offending is None:
            offending = (edges[j], edges[j + 1])
    return RatioCheckReport(
        passed=offending is None,
        epsilon_round=epsilon_round,
        scale=float(scale),
        sensitivity=float(sensitivity),
        samples=samples,
        bins_tested=tested,
        max_log_ratio=worst,
        offending_bin=offending,
    )


# sweeps

SWEEP_COLUMNS = (
    "sweep_param", "sweep_value", "variant", "metric", "value",
    "X", "alpha", "epsilon", "S", "trials", "bound_katz_bias", "bound_katz_variance",
)


def _sweep_metrics(ks) -> list[str]:
    return (["loss", "variance", "bias2", "mean_bias", "diverged_trials"]
            + [f"recall@{k}" for k in ks] + [f"recall@{k}_ci95" for k in ks])


def _bounds_for(profile: DegreeProfile, cfg: ProtocolConfig) -> tuple[float, float]:
    if not cfg.clipping:
        return math.nan, math.nan
    D = profile.max_degree
    cp = clipping_params_for(profile, cfg.X)
    N = cp.N if cp is not None else profile.count_above(0)
    kb = bound_katz_bias(cfg.alpha, cfg.X, D, cfg.S, cfg.epsilon) if cfg.alpha * PHI * cfg.X < 1 else math.nan
    try:
        kv = bound_katz_variance(cfg.alpha, D, cfg.X, N, cfg.S, cfg.epsilon)
    except ValueError:
        kv = math.nan
    return kb, kv


def sweep(g: Graph, base: ProtocolConfig, param: str, values: Iterable[float], trials: int, exact,
          profile: DegreeProfile, ks: Sequence[int] = (10, 100), variants=("clipped", "unclipped")):
    """Monte-Carlo over a range of ``S`` (``param="S"``) or ``X`` (``param="X"``).

    Yields long-format rows (dicts keyed by :data:`SWEEP_COLUMNS`): one per
    sweep value, variant and metric. A point where every trial diverged still
    yields its rows, with NaN metrics and ``diverged_trials = trials``.
    ``exact`` may be a callable ``cfg -> reference vector``.
    """
    if param not in ("S", "X"):
        raise ValueError("sweep parameter must be 'S' or 'X'")
    ks = [k for k in ks if 1 <= k <= g.n]
    metrics = _sweep_metrics(ks)
    for value in values:
        for variant in variants:
            change = {"clipping": variant == "clipped"}
            change[param] = int(value) if param == "S" else float(value)
            cfg = base.replace(**change)
            ref = exact(cfg) if callable(exact) else exact
            try:
                res = monte_carlo(g, cfg, trials, ref, ks=ks)
                vals = {
                    "loss": res.loss,
                    "variance": res.mean_variance,
                    "bias2": res.bias_squared,
                    "mean_bias": res.mean_bias,
                    "diverged_trials": res.diverged_trials,
                }
                for k in ks:
                    vals[f"recall@{k}"] = res.recall_at_k[k]
                    vals[f"recall@{k}_ci95"] = res.recall_halfwidth[k]
            except DivergenceError:
                vals = {m: math.nan for m in metrics}
                vals["diverged_trials"] = trials
            kb, kv = _bounds_for(profile, cfg)
            for m in metrics:
                yield {
                    "sweep_param": param, "sweep_value": value, "variant": variant,
                    "metric": m, "value": vals[m],
                    "X": cfg.X, "alpha": cfg.alpha, "epsilon": cfg.epsilon, "S": cfg.S,
                    "trials": trials, "bound_katz_bias": kb, "bound_katz_variance": kv,
                }
