"""Laplace noise, per-round noise scales and privacy-budget bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSource",
    "BudgetLedger",
    "laplace_sample",
    "round_noise_scale",
    "make_ledger",
    "harmonic_number",
    "expected_max_abs_laplace",
]

_TWO_M53 = 2.0**-53
_SEED_MASK = (1 << 64) - 1


class NoiseSource:
    """Seeded, counter-based stream of Laplace draws.

    Backed by a Philox generator keyed from ``(seed, *key)``; draw ``j`` of a
    stream depends only on the key and ``j``. Each draw consumes exactly one
    64-bit word, so ``position`` counts draws. Not thread-safe: give each
    worker its own source via :meth:`child`.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed) & _SEED_MASK
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._bitgen = np.random.Philox(ss)
        self.position = 0

    def child(self, *key: int) -> "NoiseSource":
        """Independent source for a sub-stream, e.g. ``child(round)`` or ``child(round, node)``."""
        return NoiseSource(self.seed, self.key + tuple(key))

    def skip(self, count: int) -> None:
        """Jump ``count`` draws ahead without generating them."""
        count = int(count)
        # one Philox counter step yields four 64-bit words; advance() drops any buffered ones
        head = min(count, -self.position % 4)
        if head:
            self._bitgen.random_raw(head)
            self.position += head
            count -= head
        blocks, rest = divmod(count, 4)
        if blocks:
            self._bitgen.advance(blocks)
        if rest:
            self._bitgen.random_raw(rest)
        self.position += count

    def uniform(self, size=None):
        """Uniform draws on the open interval (0, 1)."""
        count = 1 if size is None else int(np.prod(size))
        raw = self._bitgen.random_raw(count)
        self.position += count
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
        return float(u[0]) if size is None else u.reshape(size)

    def laplace(self, scale: float, size=None):
        """Zero-centred Laplace draws by inverse CDF, one uniform per draw."""
        if scale < 0:
            raise ValueError("scale must be nonnegative")
        # scalar draws go through the same array code so they match batch draws bit for bit
        u = self.uniform(1 if size is None else size) - 0.5
        x = np.sign(u) * scale * np.log1p(-2.0 * np.abs(u))
        if scale == 0:
            x = np.zeros_like(x)
        return float(x[0]) if size is None else x


def laplace_sample(ns: NoiseSource, scale: float) -> float:
    """One Laplace(0, scale) draw; advances ``ns`` by one position."""
    return ns.laplace(scale)


def round_noise_scale(alpha: float, S: int, epsilon: float, k_prev_max: float) -> float:
    """Laplace scale for one round: sensitivity ``alpha * k_prev_max`` over budget ``epsilon / (2S)``."""
    return 2.0 * alpha * S * k_prev_max / epsilon


@dataclass(frozen=True)
class BudgetLedger:
    """Budget split for an S-round run.

    Each round's report is ``per_round_ldp``-edge LDP; independent users turn
    that into ``per_round_rdp = 2 * per_round_ldp`` edge RDP, and S rounds
    compose to ``total_epsilon``.
    """

    total_epsilon: float
    rounds: int
    per_round_ldp: float
    per_round_rdp: float

    @property
    def composed_rdp(self) -> float:
        return self.rounds * self.per_round_rdp


def make_ledger(epsilon: float, S: int) -> BudgetLedger:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if S < 1:
        raise ValueError("S must be at least 1")
    return BudgetLedger(
        total_epsilon=epsilon,
        rounds=S,
        per_round_ldp=epsilon / (2 * S),
        per_round_rdp=epsilon / S,
    )


def harmonic_number(n: int) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    # summed smallest-first to limit rounding
    return float(np.sum(1.0 / np.arange(n, 0, -1, dtype=np.float64)))


def expected_max_abs_laplace(n: int, scale: float) -> float:
    """E[max of n independent |Laplace(scale)|] = scale * H_n."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    return scale * harmonic_number(n)
