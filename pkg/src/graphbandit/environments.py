"""Bandit environments: a synthetic clustered-user world and logged replay.

Both worlds hand out rounds (a user plus a candidate pool), score payoffs,
and provide a regret oracle.  All randomness flows from the construction
seed through a single private generator per world, so identical seeds give
bitwise-identical worlds and round streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Round",
    "SyntheticWorld",
    "generate_world",
    "sample_round",
    "realize_payoff",
    "instant_regret",
    "LoggedWorld",
    "sample_logged_round",
]


@dataclass(frozen=True)
class Round:
    """One recommendation opportunity: a user and a candidate pool."""

    t: int
    user: int
    candidates: np.ndarray

    def __post_init__(self):
        cands = np.asarray(self.candidates, dtype=int)
        if self.t < 1:
            raise ValueError("round index t starts at 1")
        if len(np.unique(cands)) != cands.shape[0]:
            raise ValueError("candidate pool contains duplicates")
        object.__setattr__(self, "candidates", cands)


@dataclass
class SyntheticWorld:
    """Clustered linear-payoff world.

    Users sit in non-overlapping clusters; each user vector is its cluster
    center plus per-coordinate normal noise with std ``sigma_c``.  Payoffs
    are ``uᵀx`` plus normal noise with std ``sigma_eps``, clamped to [0, 1].
    """

    cluster_centers: np.ndarray  # (M, d), unit rows
    user_vectors: np.ndarray  # (N, d)
    user_cluster: np.ndarray  # (N,) labels in [0, M)
    catalog: np.ndarray  # (K, d), unit rows
    sigma_c: float
    sigma_eps: float
    rng_seed: int
    rng: np.random.Generator = field(repr=False)

    @property
    def n_users(self):
        return self.user_vectors.shape[0]

    @property
    def n_items(self):
        return self.catalog.shape[0]

    @property
    def dim(self):
        return self.catalog.shape[1]

    def expected_payoff(self, user, item):
        """Noise-free, unclamped payoff ``u_iᵀ x_k``."""
        return float(self.user_vectors[user] @ self.catalog[item])


def _unit_rows(X):
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def generate_world(
    n_users,
    n_clusters,
    n_items,
    dim,
    sigma_c,
    sigma_eps,
    seed,
    cluster_sizes=None,
):
    """Build a :class:`SyntheticWorld`, fully determined by ``seed``.

    Cluster centers and catalog items are i.i.d. standard normal directions
    normalized to unit Euclidean norm.  Users are assigned to clusters in
    equal-size blocks (any remainder goes to the last clusters); pass
    ``cluster_sizes`` to override the proportions.
    """
    if n_clusters > n_users:
        raise ValueError(f"need n_users >= n_clusters, got {n_users} < {n_clusters}")
    if min(n_users, n_clusters, n_items, dim) < 1:
        raise ValueError("all dimensions must be positive")
    if sigma_c < 0 or sigma_eps < 0:
        raise ValueError("noise levels must be nonnegative")
    if cluster_sizes is None:
        base, rem = divmod(n_users, n_clusters)
        cluster_sizes = [base] * (n_clusters - rem) + [base + 1] * rem
    cluster_sizes = list(cluster_sizes)
    if len(cluster_sizes) != n_clusters or sum(cluster_sizes) != n_users:
        raise ValueError("cluster_sizes must have n_clusters entries summing to n_users")
    if min(cluster_sizes) < 1:
        raise ValueError("every cluster must be nonempty")

    rng = np.random.default_rng(seed)
    centers = _unit_rows(rng.standard_normal((n_clusters, dim)))
    catalog = _unit_rows(rng.standard_normal((n_items, dim)))
    labels = np.repeat(np.arange(n_clusters), cluster_sizes)
    users = centers[labels] + sigma_c * rng.standard_normal((n_users, dim))
    return SyntheticWorld(
        cluster_centers=centers,
        user_vectors=users,
        user_cluster=labels,
        catalog=catalog,
        sigma_c=float(sigma_c),
        sigma_eps=float(sigma_eps),
        rng_seed=int(seed),
        rng=rng,
    )


def sample_round(world, pool_size, t):
    """Draw the round-``t`` user (uniform) and a pool of distinct items."""
    if not 1 <= pool_size <= world.n_items:
        raise ValueError(f"pool_size must be in [1, {world.n_items}], got {pool_size}")
    user = int(world.rng.integers(world.n_users))
    candidates = world.rng.choice(world.n_items, size=pool_size, replace=False)
    return Round(t=t, user=user, candidates=candidates)


def realize_payoff(world, user, item):
    """Observed payoff: ``clamp(u_iᵀ x_k + ε, 0, 1)`` with ε ~ N(0, σ_ε²)."""
    noise = world.sigma_eps * world.rng.standard_normal()
    return float(np.clip(world.expected_payoff(user, item) + noise, 0.0, 1.0))


def instant_regret(world, rnd, chosen_item):
    """Expected-payoff gap between the best pool item and the chosen one.

    Uses raw (unclamped, noise-free) expected payoffs.
    """
    cands = rnd.candidates
    pos = np.flatnonzero(cands == chosen_item)
    if pos.size == 0:
        raise ValueError(f"chosen item {chosen_item} is not in the candidate pool")
    payoffs = world.catalog[cands] @ world.user_vectors[rnd.user]
    return float(payoffs.max() - payoffs[pos[0]])


class LoggedWorld:
    """Replay world over logged user-item interactions.

    Each round serves one user's known positive item hidden among uniformly
    sampled non-positives; payoffs are binary.
    """

    def __init__(self, item_features, positives, seed):
        self.item_features = np.asarray(item_features, dtype=float)
        if self.item_features.ndim != 2:
            raise ValueError("item_features must be a (n_items, d) matrix")
        n_items = self.item_features.shape[0]
        self.positives = []
        for user, items in enumerate(positives):
            items = np.unique(np.asarray(items, dtype=int))
            if items.size == 0:
                raise ValueError(f"user {user} has no positive items")
            if items.min() < 0 or items.max() >= n_items:
                raise ValueError(f"user {user} has out-of-range item indices")
            self.positives.append(items)
        if not self.positives:
            raise ValueError("need at least one user with a positive item")
        self.rng_seed = int(seed)
        self.rng = np.random.default_rng(seed)
        all_items = np.arange(n_items)
        self._negatives = [np.setdiff1d(all_items, pos) for pos in self.positives]

    @property
    def n_users(self):
        return len(self.positives)

    @property
    def n_items(self):
        return self.item_features.shape[0]

    @property
    def dim(self):
        return self.item_features.shape[1]

    @classmethod
    def from_archive(cls, path, seed):
        """Construct from a feature archive written by the ingest pipeline."""
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != "graphbandit-features-v1":
            raise ValueError(f"unrecognized archive format in {path}")
        return cls(
            item_features=np.array(payload["features"], dtype=float),
            positives=[np.array(p, dtype=int) for p in payload["positives"]],
            seed=seed,
        )


def sample_logged_round(world, pool_size, t):
    """Draw a replay round: one positive and ``pool_size - 1`` non-positives.

    Returns ``(round, payoff_table)`` where the table maps each pool item to
    1 (the hidden positive) or 0.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    rng = world.rng
    user = int(rng.integers(world.n_users))
    pos_items = world.positives[user]
    neg_items = world._negatives[user]
    if neg_items.size < pool_size - 1:
        raise ValueError(
            f"user {user} has only {neg_items.size} non-positive items; "
            f"cannot build a pool of {pool_size}"
        )
    positive = int(pos_items[rng.integers(pos_items.size)])
    negatives = rng.choice(neg_items, size=pool_size - 1, replace=False)
    pool = np.concatenate([[positive], negatives])
    pool = pool[rng.permutation(pool_size)]
    payoff_table = {int(item): (1.0 if item == positive else 0.0) for item in pool}
    return Round(t=t, user=user, candidates=pool), payoff_table
