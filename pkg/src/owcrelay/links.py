"""Static link budget of a scenario: terminals, associations, channel gains,
power allocation, noise, and per-link blocker regions.

Everything random happens elsewhere; given a scenario this module produces
the deterministic quantities the outage engines consume, including compiled
per-user weight arrays so a batch of blocked/clear states can be turned into
SINR values with a handful of matrix products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from owcrelay.channel import (
    ReceiverSpec,
    RoomModel,
    TransmitterSpec,
    discretize_surfaces,
    impulse_response,
)
from owcrelay.geometry import CylinderSpec, Point3, Rect, Segment3, StadiumRegion, blocked_region
from owcrelay.noma import NoiseModel, NomaAllocation, noise_variance, order_users_and_allocate
from owcrelay.scenario import Scenario

__all__ = [
    "RelaySpec",
    "Link",
    "LinkBudget",
    "association_map",
    "relay_pairing_map",
    "relay_branch_map",
    "build_link_budget",
    "evaluate_sinr",
    "link_cir",
]


@dataclass(frozen=True)
class RelaySpec:
    """A wall-mounted forward-and-retransmit node: detector and steered
    source share one position and boresight.

    The electrical gain retunes itself so the retransmitted power sits at
    the transmitter's cap whatever the received level; it therefore cancels
    between the signal and forwarded-noise terms of the second phase, and
    the nominal value here only scales diagnostics.
    """

    relay_id: str
    transmitter: TransmitterSpec
    receiver: ReceiverSpec
    paired_ap: str | None = None
    gain: float = 1.0


@dataclass(frozen=True)
class Link:
    index: int
    link_id: str
    kind: str  # "direct", "feeder" or "delivery"
    tx_id: str
    rx_id: str
    segment: Segment3
    h: float
    h_los: float
    h_reflected: float


@dataclass
class UserTerms:
    """Compiled SINR ingredients of one user.

    Direct phase: ``num = direct_w . clear[direct_idx]`` and the
    interference adds ``int_w . clear[int_idx]`` to the noise floor.
    Relay phase: branch b is live when both ``clear[branch_feeder_idx[b]]``
    and ``clear[branch_delivery_idx[b]]`` hold, and then contributes its
    signal, interference and forwarded-noise weights.
    """

    user_id: str
    noise_var: float
    direct_idx: np.ndarray
    direct_w: np.ndarray
    int_idx: np.ndarray
    int_w: np.ndarray
    branch_feeder_idx: np.ndarray
    branch_delivery_idx: np.ndarray
    branch_sig_w: np.ndarray
    branch_int_w: np.ndarray
    branch_noise_w: np.ndarray


@dataclass
class LinkBudget:
    scenario: Scenario
    room: RoomModel
    cylinder: CylinderSpec
    links: tuple[Link, ...]
    regions: tuple[StadiumRegion, ...]
    allocation: NomaAllocation
    associations: dict[str, tuple[str, ...]]
    pairings: dict[str, str]
    branches: dict[str, tuple[tuple[str, str], ...]]
    user_terms: tuple[UserTerms, ...]
    threshold_db: float
    combining: str
    marginals: np.ndarray | None = field(default=None)

    @property
    def link_count(self) -> int:
        return len(self.links)

    def link_index(self, tx_id: str, rx_id: str) -> int:
        for ln in self.links:
            if ln.tx_id == tx_id and ln.rx_id == rx_id:
                return ln.index
        raise KeyError(f"no link {tx_id!r} -> {rx_id!r}")


def _room_model(scenario: Scenario) -> RoomModel:
    r = scenario.room
    return RoomModel(
        width=r.width_m,
        length=r.length_m,
        height=r.height_m,
        wall_reflectivity=r.wall_reflectivity,
        ceiling_reflectivity=r.ceiling_reflectivity,
        floor_reflectivity=r.floor_reflectivity,
        lambertian_mode=r.lambertian_mode,
    )


def _user_normal(elevation_deg: float, azimuth_deg: float) -> tuple[float, float, float]:
    el = math.radians(elevation_deg)
    az = math.radians(azimuth_deg)
    return (math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el))


def _inward_axis(position, room: RoomModel) -> tuple[float, float, float]:
    """Boresight for a wall node: away from the nearest room face."""
    x, y, z = position
    candidates = [
        (x - 0.0, (1.0, 0.0, 0.0)),
        (room.width - x, (-1.0, 0.0, 0.0)),
        (y - 0.0, (0.0, 1.0, 0.0)),
        (room.length - y, (0.0, -1.0, 0.0)),
        (z - 0.0, (0.0, 0.0, 1.0)),
        (room.height - z, (0.0, 0.0, -1.0)),
    ]
    return min(candidates, key=lambda c: c[0])[1]


def _ap_spec(cfg, room: RoomModel) -> TransmitterSpec:
    return TransmitterSpec(
        position=Point3(*cfg.position_m),
        power_w=cfg.power_mw * 1e-3,
        divergence_rad=cfg.divergence_mrad * 1e-3,
        axis=(0.0, 0.0, -1.0),
        max_steering_rad=math.radians(cfg.max_steering_deg),
    )


def _relay_spec(cfg, room: RoomModel, paired_ap: str | None = None) -> RelaySpec:
    axis = cfg.axis if cfg.axis is not None else _inward_axis(cfg.position_m, room)
    pos = Point3(*cfg.position_m)
    tx = TransmitterSpec(
        position=pos,
        power_w=cfg.power_mw * 1e-3,  # retransmit cap; cancels in the two-phase ratio
        divergence_rad=cfg.divergence_mrad * 1e-3,
        axis=axis,
        max_steering_rad=math.radians(cfg.max_steering_deg),
    )
    rx = ReceiverSpec(
        position=pos,
        normal=axis,
        area_m2=cfg.area_cm2 * 1e-4,
        fov_rad=math.radians(cfg.fov_deg),
        responsivity=cfg.responsivity_a_per_w,
    )
    return RelaySpec(relay_id=cfg.id, transmitter=tx, receiver=rx, paired_ap=paired_ap)


def _user_spec(cfg) -> ReceiverSpec:
    return ReceiverSpec(
        position=Point3(*cfg.position_m),
        normal=_user_normal(cfg.elevation_deg, cfg.azimuth_deg),
        area_m2=cfg.area_cm2 * 1e-4,
        fov_rad=math.radians(cfg.fov_deg),
        responsivity=cfg.responsivity_a_per_w,
    )


def association_map(scenario: Scenario) -> dict[str, tuple[str, ...]]:
    """Users served by each source: the scenario's explicit map when present,
    otherwise every user inside the source's steering cone, in scenario
    order."""
    if scenario.associations is not None:
        return {ap.id: tuple(scenario.associations.get(ap.id, ())) for ap in scenario.aps}
    room = _room_model(scenario)
    out: dict[str, tuple[str, ...]] = {}
    for ap in scenario.aps:
        spec = _ap_spec(ap, room)
        served = []
        for user in scenario.users:
            ang = spec.steering_angle_to(Point3(*user.position_m))
            if ang <= spec.max_steering_rad + 1e-12:
                served.append(user.id)
        out[ap.id] = tuple(served)
    return out


def relay_pairing_map(scenario: Scenario) -> dict[str, str]:
    """Feeder source of each relay: the scenario's explicit map when present,
    otherwise the nearest source able to steer onto the relay."""
    if scenario.relay_pairings is not None:
        return dict(scenario.relay_pairings)
    room = _room_model(scenario)
    out: dict[str, str] = {}
    for rl in scenario.relays:
        rp = Point3(*rl.position_m)
        best = None
        best_d = math.inf
        for ap in scenario.aps:
            spec = _ap_spec(ap, room)
            if spec.steering_angle_to(rp) > spec.max_steering_rad + 1e-12:
                continue
            d = spec.position.distance_to(rp)
            if d < best_d:
                best_d = d
                best = ap.id
        if best is not None:
            out[rl.id] = best
    return out


def relay_branch_map(
    scenario: Scenario,
    associations: dict[str, tuple[str, ...]],
    pairings: dict[str, str],
) -> dict[str, tuple[tuple[str, str], ...]]:
    """Second-phase branches per user as (feeder source, relay) pairs.

    A relay forwards to a user when the user sits inside its steering cone
    and its feeder source serves that user in the first phase.
    """
    room = _room_model(scenario)
    out: dict[str, tuple[tuple[str, str], ...]] = {}
    for user in scenario.users:
        up = Point3(*user.position_m)
        branches = []
        for rl in scenario.relays:
            ap_id = pairings.get(rl.id)
            if ap_id is None or user.id not in associations.get(ap_id, ()):
                continue
            spec = _relay_spec(rl, room).transmitter
            if spec.steering_angle_to(up) <= spec.max_steering_rad + 1e-12:
                branches.append((ap_id, rl.id))
        out[user.id] = tuple(branches)
    return out


def _link_gain(tx, rx, room, cc, grid):
    cir = impulse_response(
        tx,
        rx,
        room,
        max_bounces=cc.max_bounces,
        first_res=cc.first_bounce_res_m,
        second_res=cc.second_bounce_res_m,
        bin_duration=cc.bin_ns * 1e-9,
        second_grid=grid,
    )
    reflected = cir.first_order_gain + cir.second_order_gain
    return cir.dc_gain(), cir.los_gain, reflected


def build_link_budget(scenario: Scenario) -> LinkBudget:
    """Evaluate every deterministic quantity the outage engines need."""
    scenario.validate()
    room = _room_model(scenario)
    cc = scenario.channel
    cylinder = CylinderSpec(height=scenario.human.height_m, radius=scenario.human.radius_m)
    footprint = Rect(0.0, 0.0, room.width, room.length)
    noise_model = NoiseModel(
        bandwidth_hz=scenario.noise.bandwidth_ghz * 1e9,
        noise_density_a2_per_hz=scenario.noise.noise_density_a2hz,
        background_current_a=scenario.noise.background_current_a,
    )

    associations = association_map(scenario)
    pairings = relay_pairing_map(scenario)
    branches = relay_branch_map(scenario, associations, pairings)

    ap_specs = {ap.id: _ap_spec(ap, room) for ap in scenario.aps}
    relay_specs = {
        rl.id: _relay_spec(rl, room, paired_ap=pairings.get(rl.id)) for rl in scenario.relays
    }
    user_specs = {u.id: _user_spec(u) for u in scenario.users}
    user_cfg = {u.id: u for u in scenario.users}

    grid = None
    if cc.max_bounces >= 2:
        _, grid = discretize_surfaces(room, cc.first_bounce_res_m, cc.second_bounce_res_m)

    links: list[Link] = []
    regions: list[StadiumRegion] = []
    index_of: dict[tuple[str, str], int] = {}

    def add_link(kind, tx_id, rx_id, tx_spec, rx_spec):
        key = (tx_id, rx_id)
        if key in index_of:
            return index_of[key]
        h, h_los, h_ref = _link_gain(tx_spec, rx_spec, room, cc, grid)
        seg = Segment3(tx_spec.position, rx_spec.position)
        idx = len(links)
        links.append(
            Link(
                index=idx,
                link_id=f"{tx_id}->{rx_id}",
                kind=kind,
                tx_id=tx_id,
                rx_id=rx_id,
                segment=seg,
                h=h,
                h_los=h_los,
                h_reflected=h_ref,
            )
        )
        regions.append(blocked_region(seg, cylinder, footprint))
        index_of[key] = idx
        return idx

    direct_gains: dict[str, dict[str, float]] = {}
    for ap in scenario.aps:
        served = associations[ap.id]
        if not served:
            continue
        gains = {}
        for uid in served:
            idx = add_link("direct", ap.id, uid, ap_specs[ap.id], user_specs[uid])
            gains[uid] = links[idx].h
        direct_gains[ap.id] = gains

    active_relays = sorted(
        {r for brs in branches.values() for _, r in brs},
        key=lambda rid: [rl.id for rl in scenario.relays].index(rid),
    )
    for rid in active_relays:
        ap_id = pairings[rid]
        add_link("feeder", ap_id, rid, ap_specs[ap_id], relay_specs[rid].receiver)
    for user in scenario.users:
        for ap_id, rid in branches[user.id]:
            add_link("delivery", rid, user.id, relay_specs[rid].transmitter, user_specs[user.id])

    ap_powers = {ap.id: ap.power_mw * 1e-3 for ap in scenario.aps}
    allocation = NomaAllocation(
        by_ap={
            ap_id: order_users_and_allocate(
                ap_id,
                tuple(gains),
                gains,
                power_ratio=scenario.noma.power_ratio,
                budget_w=ap_powers[ap_id],
            )
            for ap_id, gains in direct_gains.items()
        },
        power_ratio=scenario.noma.power_ratio,
    )

    # per-terminal noise from the unblocked first phase
    user_noise: dict[str, float] = {}
    for user in scenario.users:
        p_rx = 0.0
        for ap_id, gains in direct_gains.items():
            if user.id in gains:
                p_rx += ap_powers[ap_id] * gains[user.id]
        user_noise[user.id] = noise_variance(
            noise_model, p_rx, user_cfg[user.id].responsivity_a_per_w
        )
    relay_noise: dict[str, float] = {}
    for rid in active_relays:
        ap_id = pairings[rid]
        h = links[index_of[(ap_id, rid)]].h
        relay_noise[rid] = noise_variance(
            noise_model,
            ap_powers[ap_id] * h,
            relay_specs[rid].receiver.responsivity,
        )

    terms: list[UserTerms] = []
    for user in scenario.users:
        uid = user.id
        resp = user_cfg[uid].responsivity_a_per_w
        d_idx, d_w, i_idx, i_w = [], [], [], []
        for ap_id, gains in direct_gains.items():
            if uid not in gains:
                continue
            alloc = allocation.by_ap[ap_id]
            h = gains[uid]
            s = alloc.power_of(uid) * resp * h
            d_idx.append(index_of[(ap_id, uid)])
            d_w.append(s * s)
            for k in alloc.interferers_of(uid):
                t = alloc.power_of(k) * resp * h
                i_idx.append(index_of[(ap_id, k)])
                i_w.append(t * t)
        bf_idx, bd_idx, b_sig, b_int, b_noise = [], [], [], [], []
        for ap_id, rid in branches[uid]:
            alloc = allocation.by_ap[ap_id]
            h2 = links[index_of[(ap_id, rid)]].h * links[index_of[(rid, uid)]].h
            s = alloc.power_of(uid) * resp * h2
            b_sig.append(s * s)
            b_int.append(
                sum((alloc.power_of(k) * resp * h2) ** 2 for k in alloc.interferers_of(uid))
            )
            b_noise.append(relay_noise[rid])
            bf_idx.append(index_of[(ap_id, rid)])
            bd_idx.append(index_of[(rid, uid)])
        terms.append(
            UserTerms(
                user_id=uid,
                noise_var=user_noise[uid],
                direct_idx=np.asarray(d_idx, dtype=np.intp),
                direct_w=np.asarray(d_w, dtype=float),
                int_idx=np.asarray(i_idx, dtype=np.intp),
                int_w=np.asarray(i_w, dtype=float),
                branch_feeder_idx=np.asarray(bf_idx, dtype=np.intp),
                branch_delivery_idx=np.asarray(bd_idx, dtype=np.intp),
                branch_sig_w=np.asarray(b_sig, dtype=float),
                branch_int_w=np.asarray(b_int, dtype=float),
                branch_noise_w=np.asarray(b_noise, dtype=float),
            )
        )

    return LinkBudget(
        scenario=scenario,
        room=room,
        cylinder=cylinder,
        links=tuple(links),
        regions=tuple(regions),
        allocation=allocation,
        associations=associations,
        pairings=pairings,
        branches=branches,
        user_terms=tuple(terms),
        threshold_db=scenario.noma.threshold_db,
        combining=scenario.noma.combining,
    )


def evaluate_sinr(budget: LinkBudget, clear: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """SINR of every user for a batch of link states.

    ``clear`` has shape (link_count, n) with 1 where a link is unobstructed.
    Returns (direct, combined), each of shape (user_count, n).  The blocked
    or clear factors are binary, so squaring commutes with the gating and
    each term is weight times factor.
    """
    clear = np.asarray(clear, dtype=float)
    if clear.ndim == 1:
        clear = clear[:, None]
    n = clear.shape[1]
    users = len(budget.user_terms)
    direct = np.empty((users, n))
    combined = np.empty((users, n))
    for i, t in enumerate(budget.user_terms):
        num = t.direct_w @ clear[t.direct_idx] if t.direct_idx.size else np.zeros(n)
        den = np.full(n, t.noise_var)
        if t.int_idx.size:
            den = den + t.int_w @ clear[t.int_idx]
        d = num / den
        if t.branch_feeder_idx.size:
            gamma = clear[t.branch_feeder_idx] * clear[t.branch_delivery_idx]
            if budget.combining == "per_branch":
                r_num = t.branch_sig_w[:, None] * gamma
                r_den = (
                    t.noise_var
                    + (t.branch_int_w[:, None] + t.branch_noise_w[:, None]) * gamma
                )
                r = np.sum(r_num / r_den, axis=0)
            else:
                r_num = t.branch_sig_w @ gamma
                r_den = t.noise_var + (t.branch_int_w + t.branch_noise_w) @ gamma
                r = r_num / r_den
        else:
            r = np.zeros(n)
        direct[i] = d
        combined[i] = d + r
    return direct, combined


def link_cir(budget: LinkBudget, tx_id: str, rx_id: str, blockage=None):
    """Recompute the impulse response of one budget link.

    The budget keeps only the integrated gains; this rebuilds the full
    binned response for inspection or dumping.  ``blockage`` is an optional
    blocker floor position, as in :func:`owcrelay.channel.impulse_response`.
    """
    budget.link_index(tx_id, rx_id)  # raises KeyError when absent
    scenario = budget.scenario
    room = budget.room
    cc = scenario.channel
    ap_cfg = {ap.id: ap for ap in scenario.aps}
    relay_cfg = {rl.id: rl for rl in scenario.relays}
    user_cfg = {u.id: u for u in scenario.users}
    if tx_id in ap_cfg:
        tx = _ap_spec(ap_cfg[tx_id], room)
    else:
        tx = _relay_spec(relay_cfg[tx_id], room).transmitter
    if rx_id in user_cfg:
        rx = _user_spec(user_cfg[rx_id])
    else:
        rx = _relay_spec(relay_cfg[rx_id], room).receiver
    grid = None
    if cc.max_bounces >= 2:
        _, grid = discretize_surfaces(room, cc.first_bounce_res_m, cc.second_bounce_res_m)
    return impulse_response(
        tx,
        rx,
        room,
        max_bounces=cc.max_bounces,
        blockage=blockage,
        cylinder=budget.cylinder,
        first_res=cc.first_bounce_res_m,
        second_res=cc.second_bounce_res_m,
        bin_duration=cc.bin_ns * 1e-9,
        second_grid=grid,
    )
