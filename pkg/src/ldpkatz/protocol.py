"""In-process simulation of the multi-round server/user Katz protocol.

Round ``i`` (1-based):

* server: ``noise = 2*alpha*S/epsilon * max_v |K~(i-1)[v]|``, broadcast it with ``K~(i-1)``
* user v: ``K~(i)[v] = alpha * sum_{u in nbrs(v)} K~(i-1)[u] + Lap(noise)``
* user v: add ``K~(i)[v]`` to its Katz estimate, then (clipped variant) clamp it to
  ``[-(alpha*X)**i, (alpha*X)**i]`` and report it.

``K~(0)`` is all ones. Each user's Laplace draw for round ``i`` is position ``v``
of the stream ``NoiseSource(seed).child(i)``, so results do not depend on
the order users are processed in.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .exact import propagate
from .graph import Graph
from .privacy import NoiseSource, laplace_sample, round_noise_scale

__all__ = [
    "ProtocolConfig",
    "ProtocolRun",
    "BatchTrace",
    "DivergenceError",
    "run_protocol",
    "run_path_estimation",
    "run_protocol_reference",
    "simulate_batch",
    "user_step",
    "user_noise_source",
    "clip_ceiling",
    "clip_violations",
    "CEILING_AUDIT",
]


class DivergenceError(RuntimeError):
    """Raised when every requested trial produced non-finite values."""


# Running count of clip-ceiling checks across every clipped run in this process.
CEILING_AUDIT = {"runs": 0, "violations": 0}


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: float
    X: float
    epsilon: float
    S: int
    clipping: bool = True
    seed: int = 0
    # NOT PRIVATE: disables the Laplace draws; for oracle-equivalence checks only
    noise_free: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.X > 0:
            raise ValueError("clipping factor X must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if int(self.S) != self.S or self.S < 1:
            raise ValueError("S must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def replace(self, **changes) -> "ProtocolConfig":
        return ProtocolConfig(**{**asdict(self), **changes})

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "ProtocolConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            k, v = line.split("=", 1)
            kind = kinds[k.strip()]
            v = v.strip()
            if kind == "bool":
                out[k] = v == "True"
            elif kind == "int":
                out[k] = int(v)
            else:
                out[k] = float(v)
        return cls(**out)


_UNIT_ROUNDOFF = 2.0**-53


def clip_ceiling(alpha: float, X: float, i: int) -> float:
    """``(alpha*X)**i`` widened by a float-error allowance of ``2*i*(X+2)`` unit roundoffs.

    Without the allowance, a noise-free value that equals the ceiling in exact
    arithmetic (a node whose whole i-hop neighborhood has degree exactly X)
    can land one ulp above it and get clipped by a rounding artefact.
    """
    return (alpha * X) ** i * (1.0 + 2.0 * i * (X + 2.0) * _UNIT_ROUNDOFF)


def user_noise_source(seed: int, round_: int, node: int) -> NoiseSource:
    """The noise stream user ``node`` draws from in round ``round_``."""
    ns = NoiseSource(seed).child(round_)
    ns.skip(node)
    return ns


def user_step(neighbors: Sequence[int], broadcast: np.ndarray, alpha: float, noise: float,
              source: NoiseSource | None) -> float:
    """Local computation of one user in one round.

    Sees only its own neighbor list and the broadcast vector. Returns the
    noisy, unclipped value. ``source=None`` skips the draw (noise-free mode).
    """
    s = 0.0
    for u in neighbors:
        s += broadcast[u]
    value = alpha * s
    if source is not None:
        value = value + laplace_sample(source, noise)
    return value


@dataclass
class ProtocolRun:
    """Full trace of one execution.

    ``round_vectors[i-1]`` is what users reported after round ``i`` (clipped
    when clipping is on); ``pre_clip_vectors[i-1]`` is the value added to the
    Katz estimate; ``noise_scales[i-1]`` is the round-``i`` Laplace scale.
    """

    katz_estimate: np.ndarray
    round_vectors: np.ndarray
    pre_clip_vectors: np.ndarray
    noise_scales: np.ndarray
    config: ProtocolConfig
    diverged: bool = False
    diverged_round: int | None = None

    def save(self, directory) -> Path:
        """Write config.txt, katz_estimate.csv, round_NN.csv, pre_clip_NN.csv and noise_scales.csv."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        text = self.config.to_text() + f"diverged={self.diverged!r}\n"
        (d / "config.txt").write_text(text, encoding="utf-8")
        _write_vector(d / "katz_estimate.csv", self.katz_estimate)
        width = max(2, len(str(len(self.round_vectors))))
        for i, (r, p) in enumerate(zip(self.round_vectors, self.pre_clip_vectors), start=1):
            _write_vector(d / f"round_{i:0{width}d}.csv", r)
            _write_vector(d / f"pre_clip_{i:0{width}d}.csv", p)
        with open(d / "noise_scales.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "scale"])
            for i, s in enumerate(self.noise_scales, start=1):
                w.writerow([i, repr(float(s))])
        return d


def _write_vector(path, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "value"])
        for v, x in enumerate(values):
            w.writerow([v, repr(float(x))])


@dataclass
class BatchTrace:
    """Results of many seeded runs sharing one config, one column per seed."""

    seeds: np.ndarray
    katz: np.ndarray  # (n, T)
    noise_scales: np.ndarray  # (S, T)
    diverged: np.ndarray  # (T,) bool
    pre_clip: dict = field(default_factory=dict)  # round -> (n, T)
    rounds: dict = field(default_factory=dict)  # round -> (n, T)


def _round_noise(n: int, seeds: np.ndarray, round_: int, scales: np.ndarray) -> np.ndarray:
    out = np.empty((n, len(seeds)))
    for t, (seed, scale) in enumerate(zip(seeds, scales)):
        if np.isfinite(scale):
            out[:, t] = NoiseSource(int(seed)).child(round_).laplace(float(scale), n)
        else:
            out[:, t] = np.nan
    return out


def _audit(reported: np.ndarray, ceiling: float) -> int:
    bad = int(np.count_nonzero(np.abs(reported) > ceiling))
    CEILING_AUDIT["violations"] += bad
    return bad


# divergence is detected and flagged explicitly, so silence float overflow chatter
@np.errstate(over="ignore", invalid="ignore")
def simulate_batch(g: Graph, cfg: ProtocolConfig, seeds, keep_rounds=(), keep_pre_clip=()) -> BatchTrace:
    """Run the protocol once per seed (``cfg.seed`` is ignored), vectorized over seeds.

    Column ``t`` is bit-identical to ``run_protocol(g, cfg.replace(seed=seeds[t]))``.
    Non-finite columns are flagged in ``diverged`` and left in place.
    """
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    T = len(seeds)
    n = g.n
    prev = np.ones((n, T))
    katz = np.zeros((n, T))
    scales = np.empty((cfg.S, T))
    diverged = np.zeros(T, dtype=bool)
    trace = BatchTrace(seeds=seeds, katz=katz, noise_scales=scales, diverged=diverged)
    keep_rounds, keep_pre_clip = set(keep_rounds), set(keep_pre_clip)
    for i in range(1, cfg.S + 1):
        scale = round_noise_scale(cfg.alpha, cfg.S, cfg.epsilon, np.max(np.abs(prev), axis=0))
        scales[i - 1] = scale
        cur = propagate(g, prev, cfg.alpha)
        if not cfg.noise_free:
            cur = cur + _round_noise(n, seeds, i, scale)
        katz += cur
        diverged |= ~np.all(np.isfinite(cur), axis=0) | ~np.isfinite(scale)
        if i in keep_pre_clip:
            trace.pre_clip[i] = cur.copy()
        if cfg.clipping:
            c = clip_ceiling(cfg.alpha, cfg.X, i)
            cur = np.clip(cur, -c, c)
            ok = ~diverged
            CEILING_AUDIT["runs"] += int(ok.sum())
            _audit(cur[:, ok], c)
        if i in keep_rounds:
            trace.rounds[i] = cur.copy()
        prev = cur
    return trace


def _warn_clip_above_degree(g: Graph, cfg: ProtocolConfig) -> None:
    if cfg.clipping and g.n and cfg.X > int(g.degrees.max()):
        warnings.warn(
            f"clipping factor X={cfg.X:g} exceeds max degree {int(g.degrees.max())}; clipping never binds",
            RuntimeWarning,
            stacklevel=3,
        )


@np.errstate(over="ignore", invalid="ignore")
def run_protocol(g: Graph, cfg: ProtocolConfig) -> ProtocolRun:
    """Execute the S-round protocol and return its full trace.

    A run that produces non-finite values stops after the offending round
    and comes back with ``diverged=True`` and the partial trace.
    """
    _warn_clip_above_degree(g, cfg)
    n = g.n
    seed = np.array([cfg.seed], dtype=np.uint64)
    prev = np.ones((n, 1))
    katz = np.zeros((n, 1))
    rounds, pre, scales = [], [], []
    diverged_round = None
    for i in range(1, cfg.S + 1):
        scale = round_noise_scale(cfg.alpha, cfg.S, cfg.epsilon, np.max(np.abs(prev), axis=0))
        scales.append(float(scale[0]))
        cur = propagate(g, prev, cfg.alpha)
        if not cfg.noise_free:
            cur = cur + _round_noise(n, seed, i, scale)
        katz += cur
        pre.append(cur[:, 0].copy())
        if cfg.clipping:
            c = clip_ceiling(cfg.alpha, cfg.X, i)
            cur = np.clip(cur, -c, c)
        rounds.append(cur[:, 0].copy())
        if not (np.all(np.isfinite(pre[-1])) and np.isfinite(scales[-1])):
            diverged_round = i
            break
        prev = cur
    run = ProtocolRun(
        katz_estimate=katz[:, 0],
        round_vectors=np.array(rounds),
        pre_clip_vectors=np.array(pre),
        noise_scales=np.array(scales),
        config=cfg,
        diverged=diverged_round is not None,
        diverged_round=diverged_round,
    )
    if cfg.clipping and not run.diverged:
        CEILING_AUDIT["runs"] += 1
        CEILING_AUDIT["violations"] += clip_violations(run)
    return run


def clip_violations(run: ProtocolRun) -> int:
    """Number of reported entries above the round ceiling ``(alpha*X)**i``."""
    cfg = run.config
    bad = 0
    for i, r in enumerate(run.round_vectors, start=1):
        bad += int(np.count_nonzero(np.abs(r) > clip_ceiling(cfg.alpha, cfg.X, i)))
    return bad


def run_protocol_reference(g: Graph, cfg: ProtocolConfig) -> ProtocolRun:
    """Slow per-user version of :func:`run_protocol` built from :func:`user_step`.

    Each user only receives its own neighbor row, the broadcast vector and the
    noise scale. Used to check that the vectorized path is the same protocol.
    """
    n = g.n
    prev = np.ones(n)
    katz = np.zeros(n)
    rounds, pre, scales = [], [], []
    for i in range(1, cfg.S + 1):
        noise = round_noise_scale(cfg.alpha, cfg.S, cfg.epsilon, float(np.max(np.abs(prev))))
        scales.append(noise)
        cur = np.empty(n)
        for v in range(n):
            src = None if cfg.noise_free else user_noise_source(cfg.seed, i, v)
            cur[v] = user_step(g.neighbors(v), prev, cfg.alpha, noise, src)
        katz += cur
        pre.append(cur.copy())
        if cfg.clipping:
            c = clip_ceiling(cfg.alpha, cfg.X, i)
            cur = np.minimum(cur, c)
            cur = np.maximum(cur, -c)
        rounds.append(cur.copy())
        prev = cur
    return ProtocolRun(katz, np.array(rounds), np.array(pre), np.array(scales), cfg)


def run_path_estimation(g: Graph, cfg: ProtocolConfig, i: int) -> np.ndarray:
    """Noisy estimate of the length-``i`` walk counts (``alpha`` must be 1).

    This is the value each user added to its running total in round ``i``,
    i.e. before that round's clip.
    """
    if cfg.alpha != 1:
        raise ValueError("walk-count estimation needs alpha = 1")
    if not 1 <= i <= cfg.S:
        raise ValueError(f"step {i} outside 1..{cfg.S}")
    run = run_protocol(g, cfg)
    if run.diverged and run.diverged_round < i:
        raise DivergenceError(f"run diverged at round {run.diverged_round}")
    return run.pre_clip_vectors[i - 1]
