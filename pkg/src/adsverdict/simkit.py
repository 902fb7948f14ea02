"""Toy longitudinal simulator with reference ego controllers.

One lane, 1-D station coordinates, fixed-step semi-implicit Euler::

    v[n+1] = max(0, v[n] + a[n] * dt)
    x[n+1] = x[n] + v[n+1] * dt

Scenes:

``free_drive``  ego alone on the road.
``lead_brake``  lead car ahead at ``initial_gap``; brakes at ``lead_decel``
                from ``brake_time`` until standstill.
``cut_in``      the scene starts as a cutter completes its lane change
                ``cut_in_gap`` ahead; it then holds speed or brakes at
                ``cutter_decel``.

The run stops at first contact (gap 0) or when the ego passes
``road_length``. Controllers: ``constant_speed`` and ``scripted_brake``
ignore other traffic; ``idm_follower`` is the intelligent driver model
with a hard braking limit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from .catalogue import ConcreteScenario, LogicalScenario
from .trace import ChannelId, Trace, derive_channels

IDM_DEFAULTS = {
    "time_headway": 1.5,     # s
    "min_gap": 2.0,          # m
    "max_accel": 1.5,        # m/s^2
    "comfort_decel": 2.0,    # m/s^2
    "max_decel": 9.0,        # m/s^2, physical braking limit
    "delta": 4.0,
}
SCRIPTED_DEFAULTS = {"brake_at": 3.0, "decel": 2.0}
CONTROLLERS = {
    "constant_speed": {},
    "scripted_brake": SCRIPTED_DEFAULTS,
    "idm_follower": dict(IDM_DEFAULTS, desired_speed=None),
}


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    horizon: float = 20.0
    controller: str = "idm_follower"
    params: Mapping[str, Optional[float]] = field(default_factory=dict)
    vehicle_length: float = 4.5

    def __post_init__(self):
        if not self.dt > 0:
            raise SimError("dt must be positive")
        if not self.horizon >= self.dt:
            raise SimError("horizon must be at least dt")
        if self.controller not in CONTROLLERS:
            raise SimError(f"unknown controller {self.controller!r}")
        unknown = set(self.params) - set(CONTROLLERS[self.controller])
        if unknown:
            raise SimError(f"unknown {self.controller} parameter(s): {sorted(unknown)}")
        p = self.resolved_params()
        if self.controller == "idm_follower":
            for k in ("time_headway", "max_accel", "comfort_decel", "max_decel", "delta"):
                if not p[k] > 0:
                    raise SimError(f"idm parameter {k} must be positive")
            if p["min_gap"] < 0:
                raise SimError("idm min_gap must be nonnegative")
            if p["desired_speed"] is not None and not p["desired_speed"] > 0:
                raise SimError("idm desired_speed must be positive")
        if self.controller == "scripted_brake" and (p["decel"] < 0 or p["brake_at"] < 0):
            raise SimError("scripted_brake parameters must be nonnegative")
        if not self.vehicle_length >= 0:
            raise SimError("vehicle_length must be nonnegative")

    def resolved_params(self) -> Dict[str, Optional[float]]:
        return dict(CONTROLLERS[self.controller], **self.params)

    def to_dict(self) -> dict:
        return {"dt": self.dt, "horizon": self.horizon, "controller": self.controller,
                "params": dict(self.params), "vehicle_length": self.vehicle_length}

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        unknown = set(d) - {"dt", "horizon", "controller", "params", "vehicle_length"}
        if unknown:
            raise SimError(f"sim config: unknown field(s) {sorted(unknown)}")
        return cls(**d)


def load_sim_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return SimConfig.from_dict(json.load(fh))


def idm_accel(v: float, gap: Optional[float], v_lead: float, p: Mapping) -> float:
    """IDM acceleration clipped to [-max_decel, max_accel]."""
    v0 = p["desired_speed"]
    free = 1.0 - (v / v0) ** p["delta"] if v0 > 0 else -1.0
    if gap is None:
        acc = p["max_accel"] * free
    else:
        dv = v - v_lead
        s_star = p["min_gap"] + max(0.0, v * p["time_headway"]
                                    + v * dv / (2.0 * math.sqrt(p["max_accel"] * p["comfort_decel"])))
        s = max(gap, 1e-3)
        acc = p["max_accel"] * (free - (s_star / s) ** 2)
    return min(max(acc, -p["max_decel"]), p["max_accel"])


def idm_stopping_distance(v: float, params: Optional[Mapping] = None) -> float:
    """Gap an IDM follower needs to stop behind a standing obstacle.

    Desired gap at speed ``v`` plus a comfortable-deceleration braking
    distance; used as the no-collision envelope for the reference follower.
    """
    p = dict(IDM_DEFAULTS, **(params or {}))
    return p["min_gap"] + v * p["time_headway"] + v * v / (2.0 * p["comfort_decel"])


def _scene(ls: LogicalScenario, cs: ConcreteScenario) -> Dict[str, float]:
    missing = [r for r in ls.scene_template.param_refs() if r not in cs.assignments]
    if missing:
        raise SimError(f"concrete {cs.id}: unassigned template parameter(s) {missing}")
    return ls.scene_template.resolve(cs.assignments)


def simulate(cs: ConcreteScenario, ls: LogicalScenario, cfg: SimConfig) -> Trace:
    """Run one concrete scenario and return its trace with derived channels."""
    kind = ls.scene_template.kind
    if kind not in ("free_drive", "lead_brake", "cut_in"):
        raise SimError(f"unknown scene template {kind!r}")
    steps = int(round(cfg.horizon / cfg.dt))
    if abs(steps * cfg.dt - cfg.horizon) > 1e-9:
        raise SimError(f"horizon {cfg.horizon} is not a whole number of dt={cfg.dt} steps")
    scene = _scene(ls, cs)
    road_end = scene.get("road_length", math.inf)
    L = cfg.vehicle_length

    v_ego = scene["ego_speed"]
    if v_ego < 0:
        raise SimError("ego_speed must be nonnegative")
    other = None
    if kind == "lead_brake":
        other = "lead"
        gap0, v_o = scene["initial_gap"], scene["lead_speed"]
    elif kind == "cut_in":
        other = "cutter"
        gap0, v_o = scene["cut_in_gap"], scene["cutter_speed"]
    if other is not None:
        if not gap0 > 0 or v_o < 0:
            raise SimError(f"concrete {cs.id}: initial gap must be positive and speeds nonnegative")
        x_o = gap0 + L
    x_ego = 0.0

    p = cfg.resolved_params()
    if cfg.controller == "idm_follower" and p["desired_speed"] is None:
        p["desired_speed"] = max(v_ego, 1.0)

    rows = []
    for n in range(steps + 1):
        t = n * cfg.dt
        gap = None if other is None else max(abs(x_o - x_ego) - L, 0.0)
        rows.append((t, x_ego, v_ego) + (() if other is None else (x_o, v_o)))
        if (gap is not None and gap == 0.0) or x_ego >= road_end or n == steps:
            break

        if cfg.controller == "constant_speed":
            a_ego = 0.0
        elif cfg.controller == "scripted_brake":
            a_ego = -p["decel"] if t >= p["brake_at"] else 0.0
        else:
            a_ego = idm_accel(v_ego, gap, v_o if other else 0.0, p)

        if kind == "lead_brake":
            a_o = -scene["lead_decel"] if t >= scene["brake_time"] else 0.0
        elif kind == "cut_in":
            a_o = -scene.get("cutter_decel", 0.0)

        v_ego = max(0.0, v_ego + a_ego * cfg.dt)
        x_ego = x_ego + v_ego * cfg.dt
        if other is not None:
            v_o = max(0.0, v_o + a_o * cfg.dt)
            x_o = x_o + v_o * cfg.dt

    data = np.array(rows)
    chans = {ChannelId("pos", ("ego",)): data[:, 1], ChannelId("speed", ("ego",)): data[:, 2]}
    if other is not None:
        chans[ChannelId("pos", (other,))] = data[:, 3]
        chans[ChannelId("speed", (other,))] = data[:, 4]
    tr = Trace(data[:, 0], chans, cfg.dt if len(data) < 2 else None)
    if other is None:
        return tr
    return derive_channels(tr, [("ego", other)], {"ego": L / 2, other: L / 2})


def _sim_job(args):
    cs, ls, cfg = args
    return cs.id, simulate(cs, ls, cfg)


def simulate_all(catalogue, concretes, cfg: SimConfig, jobs: int = 1) -> Dict[str, Trace]:
    """Simulate every concrete scenario; output does not depend on ``jobs``."""
    work = [(cs, catalogue.logical_by_id(cs.logical_id), cfg) for cs in concretes]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return dict(pool.map(_sim_job, work, chunksize=max(1, len(work) // (4 * jobs))))
    return dict(map(_sim_job, work))
