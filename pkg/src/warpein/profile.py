"""Sampled trajectories and their text format."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import MalformedProfileError
from .geometry import PointState, SpaceParams

__all__ = ["COLUMNS", "ENDPOINT_KINDS", "EndpointClass", "Profile", "read_profile_csv", "write_profile_csv",
           "profile_to_csv", "profile_from_csv"]

COLUMNS = ("t", "u", "du", "ddu", "dddu", "f", "df", "ddf")
ENDPOINT_KINDS = ("boundary", "critical_min", "critical_max", "infinite", "stopped")


@dataclass
class EndpointClass:
    kind: str
    t_end: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ENDPOINT_KINDS:
            raise ValueError(f"unknown endpoint kind {self.kind!r}")

    @property
    def is_critical(self) -> bool:
        return self.kind in ("critical_min", "critical_max")

    def as_dict(self) -> dict:
        t_end = self.t_end
        if isinstance(t_end, float) and math.isinf(t_end):
            t_end = "inf" if t_end > 0 else "-inf"
        return {"kind": self.kind, "t_end": t_end, "diagnostics": _jsonable(self.diagnostics)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class Profile:
    """A grid of states plus whatever is known about its two ends.

    ``dense`` is an optional callable ``t -> PointState`` giving the
    trajectory between nodes (closed forms, or integrator dense output).
    ``missing`` lists columns that were not supplied and had to be filled
    by finite differences.
    """

    ts: np.ndarray
    states: PointState
    params: SpaceParams
    left_end: Optional[EndpointClass] = None
    right_end: Optional[EndpointClass] = None
    events: list = field(default_factory=list)
    dense: Optional[Callable[[float], PointState]] = None
    missing: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        self.states = self.states.asarrays()
        if self.ts.ndim != 1 or self.ts.size == 0:
            raise MalformedProfileError("profile grid must be a nonempty 1-d array")
        if self.ts.size > 1 and np.any(np.diff(self.ts) <= 0):
            raise MalformedProfileError("profile grid must be strictly increasing")
        for name in COLUMNS[1:]:
            col = getattr(self.states, name)
            if col.shape != self.ts.shape:
                raise MalformedProfileError(f"column {name} has shape {col.shape}, grid has {self.ts.shape}")
        self.states.t = self.ts

    def __len__(self) -> int:
        return self.ts.size

    def column(self, name: str) -> np.ndarray:
        return self.ts if name == "t" else getattr(self.states, name)

    def node(self, i: int) -> PointState:
        return self.states[i]

    def end(self, which: str) -> Optional[EndpointClass]:
        return self.left_end if which == "left" else self.right_end


def profile_to_csv(profile: Profile) -> str:
    buf = io.StringIO()
    buf.write(",".join(COLUMNS) + "\n")
    cols = [profile.column(c) for c in COLUMNS]
    for row in zip(*cols):
        buf.write(",".join("%.17g" % v for v in row) + "\n")
    return buf.getvalue()


def write_profile_csv(profile: Profile, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(profile_to_csv(profile))


def profile_from_csv(text: str, params: SpaceParams) -> Profile:
    """Parse the delimited profile format.

    Only ``t`` and ``u`` are mandatory.  Missing derivative columns (and a
    missing ``f`` block) are filled from the samples by finite differences;
    the filled names end up in ``Profile.missing``.
    """
    from .residuals import fill_derivatives

    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedProfileError("profile file is empty") from None
    unknown = [h for h in header if h not in COLUMNS]
    if unknown:
        raise MalformedProfileError(f"unknown profile columns {unknown}")
    if "t" not in header or "u" not in header:
        raise MalformedProfileError("profile needs at least the columns t and u")
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise MalformedProfileError("profile has a header but no data rows")
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise MalformedProfileError(f"non-numeric profile entry: {exc}") from None
    if data.shape[1] != len(header):
        raise MalformedProfileError("ragged profile rows")
    cols = {h: data[:, i] for i, h in enumerate(header)}
    ts = cols["t"]
    if ts.size > 1 and np.any(np.diff(ts) <= 0):
        raise MalformedProfileError("profile grid must be strictly increasing")

    missing = []
    u_derivs = fill_derivatives(ts, cols["u"], 3) if any(c not in cols for c in ("du", "ddu", "dddu")) else None
    for j, name in enumerate(("du", "ddu", "dddu")):
        if name not in cols:
            cols[name] = u_derivs[j]
            missing.append(name)
    if "f" not in cols:
        raise MalformedProfileError("profile needs the column f")
    if "df" not in cols or "ddf" not in cols:
        f_derivs = fill_derivatives(ts, cols["f"], 2)
        for j, name in enumerate(("df", "ddf")):
            if name not in cols:
                cols[name] = f_derivs[j]
                missing.append(name)
    states = PointState(**{c: cols[c] for c in COLUMNS})
    return Profile(ts, states, params, missing=tuple(missing))


def read_profile_csv(path, params: SpaceParams) -> Profile:
    with open(path, newline="") as fh:
        return profile_from_csv(fh.read(), params)
