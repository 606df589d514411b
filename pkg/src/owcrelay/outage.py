"""Outage statistics of the direct and relay-combined links.

Two engines share the compiled link budget.  The Monte Carlo engine draws
blocker positions (or, optionally, independent per-link states) in fixed
blocks with per-block seeds derived from the master seed, so the result is
identical no matter how many worker processes execute the blocks.  The
enumeration engine walks every clear/blocked combination of the links a user
depends on, weighting by quadrature marginals, under the independent-link
model.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from owcrelay.links import LinkBudget, build_link_budget, evaluate_sinr
from owcrelay.mobility import RwpDistribution, region_probability, sample_human_positions
from owcrelay.scenario import Scenario

__all__ = [
    "BLOCK_SIZE",
    "OutageRow",
    "OutageReport",
    "is_outage",
    "outage_monte_carlo",
    "outage_independent_approx",
]

# Monte Carlo work is split into fixed blocks; block b is always generated
# from seed sequence [master_seed, b], so worker count cannot change results.
BLOCK_SIZE = 16384


def threshold_linear(threshold_db: float) -> float:
    return 10.0 ** (threshold_db / 10.0)


def is_outage(sinr, threshold_db: float):
    """SINR at or below the threshold counts as outage."""
    return np.asarray(sinr) <= threshold_linear(threshold_db)


@dataclass(frozen=True)
class OutageRow:
    user_id: str
    mode: str  # "direct" or "coop"
    p_out: float
    stderr: float
    n_samples: int
    threshold_db: float
    seed: int

    @property
    def threshold_linear(self) -> float:
        return threshold_linear(self.threshold_db)


@dataclass(frozen=True)
class OutageReport:
    rows: tuple[OutageRow, ...]
    method: str
    blockage_model: str

    def by_user(self, user_id: str, mode: str) -> OutageRow:
        for row in self.rows:
            if row.user_id == user_id and row.mode == mode:
                return row
        raise KeyError(f"no row for {user_id!r} / {mode!r}")


def _mobility(budget: LinkBudget) -> RwpDistribution:
    return RwpDistribution(x_extent=budget.room.width, y_extent=budget.room.length)


def ensure_marginals(budget: LinkBudget, rel_tol: float = 1e-4) -> np.ndarray:
    """Per-link blocking probabilities under the stationary mobility law."""
    if budget.marginals is None:
        if budget.scenario.human.count == 0:
            budget.marginals = np.zeros(budget.link_count)
        else:
            dist = _mobility(budget)
            budget.marginals = np.array(
                [region_probability(r, dist, rel_tol) for r in budget.regions]
            )
    return budget.marginals


def _run_block(budget, dist, master_seed, block_index, n, model, thr):
    rng = np.random.default_rng([master_seed, block_index])
    links = budget.link_count
    if budget.scenario.human.count == 0:
        clear = np.ones((links, n))
    elif model == "joint":
        pts = sample_human_positions(dist, n, rng)
        clear = np.empty((links, n))
        for j, region in enumerate(budget.regions):
            clear[j] = ~region.contains(pts)
    else:
        u = rng.random((n, links))
        clear = (u >= budget.marginals[None, :]).T.astype(float)
    direct, combined = evaluate_sinr(budget, clear)
    return (
        np.sum(direct <= thr, axis=1).astype(np.int64),
        np.sum(combined <= thr, axis=1).astype(np.int64),
    )


def _block_worker(args):
    return _run_block(*args)


def _mode_rows(rows, mode):
    if mode == "both":
        return tuple(rows)
    if mode not in ("direct", "coop"):
        raise ValueError(f"unknown mode {mode!r}")
    return tuple(r for r in rows if r.mode == mode)


def outage_monte_carlo(
    scenario: Scenario | None = None,
    mode: str = "both",
    n_samples: int | None = None,
    master_seed: int | None = None,
    workers: int = 1,
    blockage_model: str | None = None,
    budget: LinkBudget | None = None,
    rel_tol: float = 1e-4,
) -> OutageReport:
    """Monte Carlo outage probabilities per user.

    ``mode`` selects the reported rows: "direct", "coop", or "both".
    ``blockage_model`` is "joint" (one pedestrian position drives all links
    of a sample, the physical model) or "independent" (each link flips its
    own coin with the quadrature marginal).  Sample count, seed, and model
    default to the scenario's sampler block.
    """
    if budget is None:
        if scenario is None:
            raise ValueError("pass a scenario or a prebuilt budget")
        budget = build_link_budget(scenario)
    if mode not in ("direct", "coop", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    sampler = budget.scenario.sampler
    n_total = int(n_samples if n_samples is not None else sampler.samples)
    seed = int(master_seed if master_seed is not None else sampler.seed)
    model = blockage_model if blockage_model is not None else sampler.blockage_model
    if model not in ("joint", "independent"):
        raise ValueError(f"unknown blockage model {model!r}")
    if n_total < 1:
        raise ValueError("sample count must be at least 1")
    if model == "independent":
        ensure_marginals(budget, rel_tol)

    thr = threshold_linear(budget.threshold_db)
    dist = _mobility(budget)
    tasks = []
    start = 0
    block = 0
    while start < n_total:
        n = min(BLOCK_SIZE, n_total - start)
        tasks.append((budget, dist, seed, block, n, model, thr))
        start += n
        block += 1

    if workers <= 1:
        results = [_block_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_block_worker, tasks))

    users = len(budget.user_terms)
    direct_counts = np.zeros(users, dtype=np.int64)
    coop_counts = np.zeros(users, dtype=np.int64)
    for d, c in results:
        direct_counts += d
        coop_counts += c

    rows = []
    for i, t in enumerate(budget.user_terms):
        for row_mode, count in (("direct", direct_counts[i]), ("coop", coop_counts[i])):
            p = count / n_total
            se = math.sqrt(p * (1.0 - p) / n_total)
            rows.append(
                OutageRow(
                    user_id=t.user_id,
                    mode=row_mode,
                    p_out=float(p),
                    stderr=float(se),
                    n_samples=n_total,
                    threshold_db=budget.threshold_db,
                    seed=seed,
                )
            )
    return OutageReport(rows=_mode_rows(rows, mode), method="mc", blockage_model=model)


def outage_independent_approx(
    scenario: Scenario | None = None,
    mode: str = "both",
    budget: LinkBudget | None = None,
    rel_tol: float = 1e-4,
    max_links: int = 16,
) -> OutageReport:
    """Exact outage probabilities under the independent-link model.

    For each user, every clear/blocked combination of the links entering its
    SINR is enumerated and weighted by the product of quadrature marginals.
    Exact for a user hanging off a single link; elsewhere it ignores the
    correlation one walking blocker induces across links.  Raises when a
    user depends on more than ``max_links`` links; use the Monte Carlo
    engine there instead.
    """
    if budget is None:
        if scenario is None:
            raise ValueError("pass a scenario or a prebuilt budget")
        budget = build_link_budget(scenario)
    if mode not in ("direct", "coop", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    p = ensure_marginals(budget, rel_tol)
    thr = threshold_linear(budget.threshold_db)

    rows = []
    for i, t in enumerate(budget.user_terms):
        involved = np.unique(
            np.concatenate(
                [t.direct_idx, t.int_idx, t.branch_feeder_idx, t.branch_delivery_idx]
            )
        )
        m = involved.size
        if m > max_links:
            raise ValueError(
                f"user {t.user_id!r} depends on {m} links (limit {max_links}); "
                "use outage_monte_carlo with blockage_model='independent'"
            )
        size = 1 << m
        combos = np.arange(size)
        clear = np.ones((budget.link_count, size))
        prob = np.ones(size)
        for j, link_idx in enumerate(involved):
            bit = (combos >> j) & 1
            clear[link_idx] = bit
            prob *= np.where(bit == 1, 1.0 - p[link_idx], p[link_idx])
        direct, combined = evaluate_sinr(budget, clear)
        p_direct = float(np.sum(prob[direct[i] <= thr]))
        p_coop = float(np.sum(prob[combined[i] <= thr]))
        for row_mode, value in (("direct", p_direct), ("coop", p_coop)):
            rows.append(
                OutageRow(
                    user_id=t.user_id,
                    mode=row_mode,
                    p_out=value,
                    stderr=0.0,
                    n_samples=0,
                    threshold_db=budget.threshold_db,
                    seed=0,
                )
            )
    return OutageReport(rows=_mode_rows(rows, mode), method="exact", blockage_model="independent")
