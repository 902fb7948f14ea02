"""Time-indexed channel traces: CSV parsing, validation and derived channels.

Channels follow a small registry of standard names, all in a 1-D station
coordinate along the lane::

    speed:<actor>                 m/s
    pos:<actor>                   m
    gap:<a>:<b>                   m, bumper to bumper, clamped at 0
    closing_speed:<a>:<b>         m/s, positive while the gap shrinks
    ttc:<a>:<b>                   s, ``inf`` when not closing
    collision:<a>:<b>             0/1, non-decreasing

Any other lowercase name is accepted as a custom channel of arity 1 or 2.
The registry is a proposal for a shared list of logged quantities, not a
fixed standard.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

MAGIC = "# trace v1"
TTC_EPS = 1e-6
DT_TOL = 1e-6

STANDARD_ARITY = {
    "speed": 1,
    "pos": 1,
    "gap": 2,
    "closing_speed": 2,
    "ttc": 2,
    "collision": 2,
}

_NAME_RE = re.compile(r"^[a-z_][a-z0-9_]*$")
_ACTOR_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_NUM_RE = re.compile(r"^-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$")


class TraceError(ValueError):
    """Malformed or invalid trace data."""


@dataclass(frozen=True, order=True)
class ChannelId:
    name: str
    actors: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "actors", tuple(self.actors))
        if not _NAME_RE.match(self.name):
            raise TraceError(f"invalid channel name {self.name!r}")
        if not self.actors or any(not _ACTOR_RE.match(a) for a in self.actors):
            raise TraceError(f"invalid actor list for channel {self.name!r}: {self.actors!r}")
        want = STANDARD_ARITY.get(self.name)
        if want is not None and len(self.actors) != want:
            raise TraceError(
                f"channel {self.name!r} takes {want} actor(s), got {len(self.actors)}"
            )
        if want is None and len(self.actors) > 2:
            raise TraceError(f"custom channel {self.name!r} takes 1 or 2 actors")

    @classmethod
    def parse(cls, column: str) -> "ChannelId":
        parts = column.split(":")
        if len(parts) < 2:
            raise TraceError(f"column {column!r} is not name:actor[:actor]")
        return cls(parts[0], tuple(parts[1:]))

    def __str__(self):
        return ":".join((self.name,) + self.actors)


class Trace:
    """Fixed-step table of channel values.

    Parameters
    ----------
    t : array_like
        Sample times in seconds, strictly increasing.
    channels : mapping of ChannelId (or ``"name:actor"`` string) to array_like
        One value per sample time. Column order is preserved.
    dt_nominal : float, optional
        Nominal step. Inferred from ``t`` when omitted (needs 2+ rows).
    """

    __slots__ = ("t", "channels", "dt_nominal")

    def __init__(self, t, channels: Mapping, dt_nominal: Optional[float] = None):
        t = np.array(t, dtype=float)
        if t.ndim != 1:
            raise TraceError("time column must be one-dimensional")
        if dt_nominal is None:
            if len(t) < 2:
                raise TraceError("cannot infer dt_nominal from fewer than 2 rows")
            dt_nominal = float((t[-1] - t[0]) / (len(t) - 1))
        dt_nominal = float(dt_nominal)
        if not dt_nominal > 0:
            raise TraceError("dt_nominal must be positive")

        chans: Dict[ChannelId, np.ndarray] = {}
        for key, values in channels.items():
            cid = key if isinstance(key, ChannelId) else ChannelId.parse(key)
            if cid in chans:
                raise TraceError(f"duplicate channel {cid}")
            arr = np.array(values, dtype=float)
            if arr.shape != t.shape:
                raise TraceError(f"channel {cid} has {arr.size} values for {t.size} rows")
            arr.flags.writeable = False
            chans[cid] = arr
        t.flags.writeable = False

        object.__setattr__(self, "t", t)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "dt_nominal", dt_nominal)
        self._validate()

    def __setattr__(self, name, value):
        raise AttributeError("Trace is immutable")

    def _validate(self):
        t = self.t
        if not np.all(np.isfinite(t)):
            raise TraceError("time values must be finite")
        if len(t) > 1:
            steps = np.diff(t)
            bad = np.flatnonzero(steps <= 0)
            if bad.size:
                # 1-based data row number of the offending sample
                raise TraceError(f"time not strictly increasing at row {bad[0] + 2}")
            off = np.flatnonzero(np.abs(steps - self.dt_nominal) > DT_TOL)
            if off.size:
                raise TraceError(
                    f"time step at row {off[0] + 2} deviates from dt_nominal={self.dt_nominal!r}"
                )
        for cid, arr in self.channels.items():
            if np.any(np.isnan(arr)):
                raise TraceError(f"channel {cid} contains NaN")
            if cid.name != "ttc" and np.any(np.isinf(arr)):
                raise TraceError(f"channel {cid}: infinite values are only allowed in ttc")
            if cid.name == "collision":
                if np.any((arr != 0) & (arr != 1)):
                    raise TraceError(f"channel {cid}: collision values must be 0 or 1")
                if np.any(np.diff(arr) < 0):
                    raise TraceError("collision channel must be non-decreasing")

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.dt_nominal == other.dt_nominal
            and np.array_equal(self.t, other.t)
            and list(self.channels) == list(other.channels)
            and all(np.array_equal(a, other.channels[k]) for k, a in self.channels.items())
        )

    def __repr__(self):
        cols = ", ".join(str(c) for c in self.channels)
        return f"Trace(rows={len(self)}, dt={self.dt_nominal!r}, channels=[{cols}])"

    @property
    def duration(self) -> float:
        """Total covered time, counting a full step for the last row."""
        return len(self.t) * self.dt_nominal

    def actors(self) -> List[str]:
        seen = {}
        for cid in self.channels:
            for a in cid.actors:
                seen.setdefault(a, None)
        return list(seen)

    def get(self, name: str, *actors: str) -> np.ndarray:
        cid = ChannelId(name, actors)
        try:
            return self.channels[cid]
        except KeyError:
            raise KeyError(str(cid)) from None

    def with_channels(self, extra: Mapping[ChannelId, np.ndarray]) -> "Trace":
        merged = dict(self.channels)
        merged.update(extra)
        return Trace(self.t, merged, self.dt_nominal)


def _format_value(x: float) -> str:
    if math.isinf(x):
        if x < 0:
            raise TraceError("negative infinity cannot be written")
        return "inf"
    r = repr(float(x))
    # repr gives e.g. '1e-07' or '30.0'; both are valid decimal tokens
    return r


def serialize_trace(tr: Trace) -> str:
    """Render ``tr`` to the trace CSV text (LF line endings)."""
    out = io.StringIO()
    out.write(MAGIC + "\n")
    out.write(",".join(["t"] + [str(c) for c in tr.channels]) + "\n")
    cols = [tr.t] + list(tr.channels.values())
    for i in range(len(tr)):
        out.write(",".join(_format_value(c[i]) for c in cols) + "\n")
    return out.getvalue()


def parse_trace(data, dt_nominal: Optional[float] = None) -> Trace:
    """Parse trace CSV text or bytes into a validated :class:`Trace`.

    Errors carry the 1-based file line and column of the offending cell.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceError(f"trace is not UTF-8: {exc}") from None
    if "\r" in data:
        raise TraceError("trace must use LF line endings")
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != MAGIC:
        raise TraceError(f"line 1: expected magic line {MAGIC!r}")
    if len(lines) < 2:
        raise TraceError("line 2: missing header")
    header = lines[1].split(",")
    if header[0] != "t":
        raise TraceError("line 2, column 1: first column must be 't'")
    cids = []
    for j, col in enumerate(header[1:], start=2):
        try:
            cids.append(ChannelId.parse(col))
        except TraceError as exc:
            raise TraceError(f"line 2, column {j}: {exc}") from None
    if len(set(cids)) != len(cids):
        raise TraceError("line 2: duplicate channel column")

    ncol = len(header)
    rows = np.empty((len(lines) - 2, ncol), dtype=float)
    for i, line in enumerate(lines[2:]):
        lineno = i + 3
        cells = line.split(",")
        if len(cells) != ncol:
            raise TraceError(
                f"line {lineno}: expected {ncol} cells, got {len(cells)} (missing or extra cell)"
            )
        for j, cell in enumerate(cells):
            if cell == "inf":
                if j == 0 or cids[j - 1].name != "ttc":
                    raise TraceError(
                        f"line {lineno}, column {j + 1}: 'inf' only allowed in ttc columns"
                    )
                rows[i, j] = math.inf
            elif _NUM_RE.match(cell):
                rows[i, j] = float(cell)
            elif cell == "":
                raise TraceError(f"line {lineno}, column {j + 1}: missing cell")
            else:
                raise TraceError(f"line {lineno}, column {j + 1}: non-numeric cell {cell!r}")

    if len(rows) == 0:
        raise TraceError("trace has no data rows")
    return Trace(rows[:, 0], {c: rows[:, j + 1] for j, c in enumerate(cids)}, dt_nominal)


def read_trace(path) -> Trace:
    with open(path, "rb") as fh:
        return parse_trace(fh.read())


def write_trace(tr: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_trace(tr))


def ttc(gap_m: float, closing_speed_mps: float) -> float:
    """Time to collision in seconds; ``inf`` unless the gap is closing."""
    if gap_m < 0:
        raise ValueError(f"gap must be nonnegative, got {gap_m}")
    if closing_speed_mps > TTC_EPS:
        return gap_m / closing_speed_mps
    return math.inf


def _ttc_array(gap: np.ndarray, closing: np.ndarray) -> np.ndarray:
    out = np.full(gap.shape, np.inf)
    m = closing > TTC_EPS
    out[m] = gap[m] / closing[m]
    return out


def derive_channels(
    tr: Trace,
    pairs: Optional[Iterable[Tuple[str, str]]] = None,
    half_lengths: Optional[Mapping[str, float]] = None,
) -> Trace:
    """Add gap, closing_speed, ttc and collision channels for actor pairs.

    ``pairs`` defaults to every pair of actors that have both ``pos`` and
    ``speed`` channels, in column order. Channels already present in ``tr``
    are left untouched, which makes the operation idempotent.
    """
    half_lengths = half_lengths or {}
    movers = [
        a for a in tr.actors()
        if ChannelId("pos", (a,)) in tr.channels and ChannelId("speed", (a,)) in tr.channels
    ]
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(movers) for b in movers[i + 1:]]
    extra = {}
    for a, b in pairs:
        for name in ("pos", "speed"):
            for actor in (a, b):
                if ChannelId(name, (actor,)) not in tr.channels:
                    raise TraceError(f"missing source channel {name}:{actor}")
        pa, pb = tr.get("pos", a), tr.get("pos", b)
        va, vb = tr.get("speed", a), tr.get("speed", b)
        hl = half_lengths.get(a, 0.0) + half_lengths.get(b, 0.0)
        gap = np.maximum(np.abs(pb - pa) - hl, 0.0)
        # rear actor closes on the front one at (v_rear - v_front)
        closing = np.where(pb >= pa, va - vb, vb - va)
        hit = gap == 0
        collision = np.zeros_like(gap)
        if hit.any():
            collision[np.argmax(hit):] = 1.0
        derived = {
            ChannelId("gap", (a, b)): gap,
            ChannelId("closing_speed", (a, b)): closing,
            ChannelId("ttc", (a, b)): _ttc_array(gap, closing),
            ChannelId("collision", (a, b)): collision,
        }
        for cid, arr in derived.items():
            if cid not in tr.channels and cid not in extra:
                extra[cid] = arr
    return tr.with_channels(extra) if extra else tr
