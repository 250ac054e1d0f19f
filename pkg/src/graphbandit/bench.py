"""Experiment orchestration: seeded runs, aggregation, sweeps, CSV and SVG.

A JSON config describes one experiment: a world (synthetic parameters or a
logged feature archive), a list of policies, a horizon and a seed list.
Every run is a pure function of (config, seed); the emitted CSV is therefore
a pure function of (config, seeds).
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .environments import (
    LoggedWorld,
    generate_world,
    instant_regret,
    realize_payoff,
    sample_logged_round,
    sample_round,
)
from .policies import PolicyConfig, make_policy
from .usergraph import modularity, nmi

__all__ = [
    "SyntheticWorldConfig",
    "LoggedWorldConfig",
    "ExperimentConfig",
    "RunResult",
    "AggregateResult",
    "SweepRow",
    "run_experiment",
    "run_many",
    "aggregate_runs",
    "sparsity_sweep",
    "emit_csv",
    "emit_plot",
    "write_manifest",
    "load_config",
    "config_to_dict",
    "config_hash",
]


@dataclass
class SyntheticWorldConfig:
    n_users: int = 100
    n_clusters: int = 5
    n_items: int = 1000
    dim: int = 25
    sigma_c: float = 0.25
    sigma_eps: float = 0.25
    pool_size: int = 25

    type: str = field(default="synthetic", init=False)


@dataclass
class LoggedWorldConfig:
    archive: str
    pool_size: int = 25

    type: str = field(default="logged", init=False)


@dataclass
class ExperimentConfig:
    """One experiment: a world, some policies, a horizon and seeds."""

    world: SyntheticWorldConfig | LoggedWorldConfig
    policies: list
    horizon: int
    seeds: list
    output_dir: str = "results"
    record_nmi: bool | None = None  # default: on for synthetic worlds
    record_modularity: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.seeds:
            raise ValueError("need at least one seed")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ValueError(f"policy names must be unique, got {names}")
        if self.record_nmi is None:
            self.record_nmi = self.world.type == "synthetic"

    def validate_compatibility(self):
        """Reject world/policy mismatches before any round runs."""
        if self.world.type == "logged":
            if self.record_nmi:
                raise ValueError("NMI tracing needs ground-truth labels (synthetic world)")
            for p in self.policies:
                if p.variant == "correct":
                    raise ValueError("the correct variant needs a synthetic world")


@dataclass
class RunResult:
    """Per-round traces of one seeded run."""

    policy: str
    seed: int
    instant_regret: np.ndarray
    cum_regret: np.ndarray
    cluster_count: np.ndarray
    nmi_trace: np.ndarray | None
    modularity_trace: np.ndarray | None
    choices: np.ndarray
    wall_clock_per_1k: list


@dataclass
class AggregateResult:
    """Pointwise mean and sample standard deviation across seeds."""

    policy: str
    n_runs: int
    mean_cum_regret: np.ndarray
    std_cum_regret: np.ndarray
    mean_cluster_count: np.ndarray
    mean_nmi: np.ndarray | None
    mean_modularity: np.ndarray | None


@dataclass
class SweepRow:
    n: int
    final_regret: float
    final_nmi: float
    final_modularity: float


def _build_world(world_cfg, seed):
    if world_cfg.type == "synthetic":
        return generate_world(
            world_cfg.n_users,
            world_cfg.n_clusters,
            world_cfg.n_items,
            world_cfg.dim,
            world_cfg.sigma_c,
            world_cfg.sigma_eps,
            seed=seed,
        )
    return LoggedWorld.from_archive(world_cfg.archive, seed=seed)


def run_experiment(config, policy_cfg, seed):
    """One seeded run of one policy; fully deterministic in (config, seed)."""
    config.validate_compatibility()
    synthetic = config.world.type == "synthetic"
    world = _build_world(config.world, seed)
    features = world.catalog if synthetic else world.item_features
    truth = world.user_cluster if synthetic else None
    policy = make_policy(
        policy_cfg, world.n_users, world.dim, seed=seed, true_labels=truth
    )

    T = config.horizon
    pool = config.world.pool_size
    period = policy_cfg.graph_period
    regrets = np.zeros(T)
    clusters = np.zeros(T, dtype=int)
    choices = np.zeros(T, dtype=int)
    nmi_trace = np.full(T, np.nan) if config.record_nmi else None
    mod_trace = np.full(T, np.nan) if config.record_modularity else None
    latest_nmi = np.nan
    latest_mod = np.nan
    wall = []
    tick = time.perf_counter()

    for t in range(1, T + 1):
        if (t - 1) % period == 0:
            labels = policy.recluster(t)
            if nmi_trace is not None:
                latest_nmi = nmi(labels, truth)
            if mod_trace is not None:
                graph = getattr(policy, "last_graph", None)
                if graph is not None and graph.weights.sum() > 0:
                    latest_mod = modularity(graph, labels)

        if synthetic:
            rnd = sample_round(world, pool, t)
            X = features[rnd.candidates]
            item = policy.select_arm(rnd, X)
            payoff = realize_payoff(world, rnd.user, item)
            regret = instant_regret(world, rnd, item)
        else:
            rnd, table = sample_logged_round(world, pool, t)
            X = features[rnd.candidates]
            item = policy.select_arm(rnd, X)
            payoff = table[item]
            regret = 1.0 - payoff  # the pool's best payoff is always 1
        policy.update(rnd.user, features[item], payoff)

        i = t - 1
        regrets[i] = regret
        clusters[i] = policy.n_clusters
        choices[i] = item
        if nmi_trace is not None:
            nmi_trace[i] = latest_nmi
        if mod_trace is not None:
            mod_trace[i] = latest_mod
        if t % 1000 == 0:
            now = time.perf_counter()
            wall.append(now - tick)
            tick = now

    return RunResult(
        policy=policy_cfg.name,
        seed=seed,
        instant_regret=regrets,
        cum_regret=np.cumsum(regrets),
        cluster_count=clusters,
        nmi_trace=nmi_trace,
        modularity_trace=mod_trace,
        choices=choices,
        wall_clock_per_1k=wall,
    )


def _run_task(args):
    config, policy_cfg, seed = args
    return run_experiment(config, policy_cfg, seed)


def run_many(config, workers=1):
    """Fan all (policy, seed) runs out over a worker pool.

    Results come back in deterministic (policy, seed) order regardless of
    worker count.
    """
    config.validate_compatibility()
    tasks = [(config, p, s) for p in config.policies for s in config.seeds]
    if workers <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def aggregate_runs(results):
    """Mean and sample std (ddof=1; zero for a single run) across seeds."""
    if not results:
        raise ValueError("need at least one run to aggregate")
    T = results[0].cum_regret.shape[0]
    if any(r.cum_regret.shape[0] != T for r in results):
        raise ValueError("runs have mismatched lengths")
    cum = np.stack([r.cum_regret for r in results])
    clusters = np.stack([r.cluster_count for r in results]).astype(float)
    std = cum.std(axis=0, ddof=1) if len(results) > 1 else np.zeros(T)
    mean_nmi = None
    if all(r.nmi_trace is not None for r in results):
        mean_nmi = np.stack([r.nmi_trace for r in results]).mean(axis=0)
    mean_mod = None
    if all(r.modularity_trace is not None for r in results):
        mean_mod = np.stack([r.modularity_trace for r in results]).mean(axis=0)
    return AggregateResult(
        policy=results[0].policy,
        n_runs=len(results),
        mean_cum_regret=cum.mean(axis=0),
        std_cum_regret=std,
        mean_cluster_count=clusters.mean(axis=0),
        mean_nmi=mean_nmi,
        mean_modularity=mean_mod,
    )


def group_by_policy(results):
    """Aggregate a mixed result list into one entry per policy."""
    order, buckets = [], {}
    for r in results:
        if r.policy not in buckets:
            buckets[r.policy] = []
            order.append(r.policy)
        buckets[r.policy].append(r)
    return [aggregate_runs(buckets[name]) for name in order]


def sparsity_sweep(config, n_values, workers=1, template=None):
    """Re-run the sparsified graph policy across edge budgets.

    For every ``n`` the template policy (the config's sparsified-variant
    entry by default) is re-run over all seeds; the returned rows hold the
    seed-averaged final cumulative regret, final NMI and final modularity.
    Needs a synthetic world (NMI is scored against ground truth).
    """
    if config.world.type != "synthetic":
        raise ValueError("the sparsity sweep needs a synthetic world")
    if template is None:
        candidates = [p for p in config.policies if p.variant == "sclub_cd"]
        if not candidates:
            raise ValueError("config has no sclub_cd policy to sweep")
        template = candidates[0]
    rows = []
    for n in n_values:
        cfg_n = PolicyConfig(
            variant=template.variant,
            name=f"{template.name}-n{n}",
            alpha=template.alpha,
            n=int(n),
            graph_period=template.graph_period,
            sigma=template.sigma,
        )
        sweep_config = ExperimentConfig(
            world=config.world,
            policies=[cfg_n],
            horizon=config.horizon,
            seeds=config.seeds,
            output_dir=config.output_dir,
            record_nmi=True,
            record_modularity=True,
        )
        agg = aggregate_runs(run_many(sweep_config, workers=workers))
        rows.append(
            SweepRow(
                n=int(n),
                final_regret=float(agg.mean_cum_regret[-1]),
                final_nmi=float(agg.mean_nmi[-1]),
                final_modularity=float(agg.mean_modularity[-1]),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# reporting


def _fmt(x):
    return f"{float(x):.12g}"


def emit_csv(results, path):
    """One row per (policy, seed, round); reals printed to 12 significant digits."""
    with_nmi = any(r.nmi_trace is not None for r in results)
    with_mod = any(r.modularity_trace is not None for r in results)
    header = ["t", "policy", "seed", "r_t", "R_t", "cluster_count"]
    if with_nmi:
        header.append("nmi")
    if with_mod:
        header.append("modularity")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in results:
            for i in range(r.cum_regret.shape[0]):
                row = [
                    str(i + 1),
                    r.policy,
                    str(r.seed),
                    _fmt(r.instant_regret[i]),
                    _fmt(r.cum_regret[i]),
                    str(int(r.cluster_count[i])),
                ]
                if with_nmi:
                    row.append(_fmt(r.nmi_trace[i]) if r.nmi_trace is not None else "nan")
                if with_mod:
                    row.append(
                        _fmt(r.modularity_trace[i])
                        if r.modularity_trace is not None
                        else "nan"
                    )
                fh.write(",".join(row) + "\n")


def emit_sweep_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,final_regret,final_nmi,final_modularity\n")
        for row in rows:
            fh.write(
                f"{row.n},{_fmt(row.final_regret)},{_fmt(row.final_nmi)},"
                f"{_fmt(row.final_modularity)}\n"
            )


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]

_SVG_W, _SVG_H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 50
_MAX_POINTS = 1000


def _downsample(idx_len):
    if idx_len <= _MAX_POINTS:
        return np.arange(idx_len)
    step = int(np.ceil(idx_len / _MAX_POINTS))
    idx = np.arange(0, idx_len, step)
    if idx[-1] != idx_len - 1:
        idx = np.append(idx, idx_len - 1)
    return idx


def _svg_chart(series, path, title, ylabel):
    """Hand-rolled SVG line chart with optional ±1 std bands.

    ``series``: list of (label, y_mean, y_std_or_None) over rounds 1..T.
    """
    T = len(series[0][1])
    xs = np.arange(1, T + 1)
    idx = _downsample(T)
    ymax = 0.0
    for _, mean, std in series:
        top = mean + (std if std is not None else 0.0)
        ymax = max(ymax, float(np.nanmax(top)) if np.any(np.isfinite(top)) else 0.0)
    ymax = ymax if ymax > 0 else 1.0
    xmax = float(T)

    def sx(x):
        return _ML + (x / xmax) * (_SVG_W - _ML - _MR)

    def sy(y):
        return (_SVG_H - _MB) - (y / ymax) * (_SVG_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W / 2}" y="20" text-anchor="middle" font-size="14">'
        f"{escape(title)}</text>",
    ]
    # axes
    x0, y0 = _ML, _SVG_H - _MB
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{_SVG_W - _MR}" y2="{y0}" stroke="black"/>'
    )
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{_MT}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv, yv = frac * xmax, frac * ymax
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{y0 + 18}" text-anchor="middle" font-size="10">'
            f"{xv:.4g}</text>"
        )
        parts.append(
            f'<text x="{x0 - 6}" y="{sy(yv) + 3:.1f}" text-anchor="end" font-size="10">'
            f"{yv:.4g}</text>"
        )
    parts.append(
        f'<text x="{_SVG_W / 2}" y="{_SVG_H - 12}" text-anchor="middle" '
        f'font-size="12">round t</text>'
    )
    parts.append(
        f'<text x="16" y="{_SVG_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_SVG_H / 2})">{escape(ylabel)}</text>'
    )

    for rank, (label, mean, std) in enumerate(series):
        color = _PALETTE[rank % len(_PALETTE)]
        if std is not None and np.any(std > 0):
            upper = np.clip(mean + std, 0.0, None)[idx]
            lower = np.clip(mean - std, 0.0, None)[idx]
            pts = " ".join(
                f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs[idx], upper)
            )
            pts += " " + " ".join(
                f"{sx(x):.2f},{sy(y):.2f}"
                for x, y in zip(xs[idx][::-1], lower[::-1])
            )
            parts.append(
                f'<polygon points="{pts}" fill="{color}" fill-opacity="0.15" stroke="none"/>'
            )
        finite = np.isfinite(mean[idx])
        pts = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}"
            for x, y in zip(xs[idx][finite], mean[idx][finite])
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_SVG_W - _MR - 6}" y="{_MT + 16 * rank + 4}" text-anchor="end" '
            f'font-size="11" fill="{color}">{escape(label)}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def emit_plot(aggregates, path):
    """Mean cumulative-regret chart with ±1 std bands, plus a companion
    cluster-count chart next to it (same stem, ``_clusters`` suffix)."""
    path = Path(path)
    regret_series = [
        (agg.policy, agg.mean_cum_regret, agg.std_cum_regret) for agg in aggregates
    ]
    _svg_chart(regret_series, path, "Mean cumulative regret", "cumulative regret")
    cluster_series = [
        (agg.policy, agg.mean_cluster_count, None) for agg in aggregates
    ]
    companion = path.with_name(path.stem + "_clusters" + path.suffix)
    _svg_chart(cluster_series, companion, "Cluster count", "clusters")
    return path, companion


# ---------------------------------------------------------------------------
# config files and manifests


def _policy_from_dict(d):
    return PolicyConfig(**d)


def _world_from_dict(d):
    d = dict(d)
    kind = d.pop("type")
    if kind == "synthetic":
        return SyntheticWorldConfig(**d)
    if kind == "logged":
        return LoggedWorldConfig(**d)
    raise ValueError(f"unknown world type {kind!r}")


def config_from_dict(payload):
    payload = dict(payload)
    world = _world_from_dict(payload.pop("world"))
    policies = [_policy_from_dict(p) for p in payload.pop("policies")]
    return ExperimentConfig(world=world, policies=policies, **payload)


def load_config(path):
    """Parse a JSON experiment config file."""
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def config_to_dict(config):
    d = asdict(config)
    return d


def config_hash(config):
    """SHA-256 of the canonical JSON encoding of the config."""
    text = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(path, config, outputs):
    """Reproducibility record: config hash, seeds and code version."""
    payload = {
        "config_sha256": config_hash(config),
        "seeds": list(config.seeds),
        "policies": [p.name for p in config.policies],
        "horizon": config.horizon,
        "version": __version__,
        "outputs": [str(o) for o in outputs],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return payload
