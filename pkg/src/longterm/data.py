"""Combined experimental/observational samples, CSV I/O, splitting and S-subsetting.

A :class:`CombinedDataset` stores the merged sample column-wise (numpy arrays)
and exposes a row view through :class:`UnitRecord`. Rows with ``group == "E"``
come from the short-term experiment and never carry the long-term outcome;
rows with ``group == "O"`` come from the observational study and always do.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyStratum,
    ExperimentalRowHasOutcome,
    HorizonNotOnGrid,
    InvalidGroup,
    MissingColumn,
    NonBinaryTreatment,
    NonFiniteValue,
    ObservationalRowMissingOutcome,
    StratumTooSmall,
    UnevenSpacing,
    ValidationError,
)

EXPERIMENTAL = "E"
OBSERVATIONAL = "O"
GROUPS = (EXPERIMENTAL, OBSERVATIONAL)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class UnitRecord:
    group: str
    treatment: int
    covariates: tuple[float, ...]
    short_outcomes: tuple[float, ...]
    long_outcome: float | None = None


@dataclass(frozen=True, eq=False)
class CombinedDataset:
    """Merged sample with time structure ``Y = S_{T + mu}``.

    Arrays are copied and made read-only on construction, so instances can be
    shared between workers.

    Attributes:
        group: ``(n,)`` array of ``"E"``/``"O"``.
        a: ``(n,)`` binary treatment.
        x: ``(n, d)`` covariates.
        s: ``(n, T)`` short-term outcomes ``S_1..S_T``.
        y: ``(n,)`` long-term outcome, NaN on experimental rows.
        mu: offset of the long-term outcome past the last short-term step.
    """

    group: np.ndarray
    a: np.ndarray
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    mu: int

    def __post_init__(self):
        group = np.asarray(self.group, dtype="<U1").reshape(-1)
        n = group.shape[0]
        x = np.asarray(self.x, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if x.ndim == 1:
            x = x.reshape(n, -1) if n else x.reshape(0, 1)
        if s.ndim == 1:
            s = s.reshape(n, -1) if n else s.reshape(0, 1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        a_raw = np.asarray(self.a).reshape(-1)
        if not (x.shape[0] == s.shape[0] == y.shape[0] == a_raw.shape[0] == n):
            raise ValidationError("group, a, x, s and y must have the same number of rows")
        if x.shape[1] < 1 or s.shape[1] < 1:
            raise ValidationError("need d >= 1 covariates and T >= 1 short-term outcomes")
        if int(self.mu) != self.mu or self.mu < 1:
            raise ValidationError(f"mu must be a positive integer, got {self.mu}")

        bad_g = ~np.isin(group, GROUPS)
        if bad_g.any():
            i = int(np.flatnonzero(bad_g)[0])
            raise InvalidGroup(i, f"group must be 'E' or 'O', got {group[i]!r}")
        bad_a = ~np.isin(a_raw, (0, 1))
        if bad_a.any():
            i = int(np.flatnonzero(bad_a)[0])
            raise NonBinaryTreatment(i, f"treatment must be 0 or 1, got {a_raw[i]!r}")
        bad = ~np.isfinite(x).all(axis=1) | ~np.isfinite(s).all(axis=1)
        if bad.any():
            raise NonFiniteValue(int(np.flatnonzero(bad)[0]), "covariates and short-term outcomes must be finite")
        is_e = group == EXPERIMENTAL
        has_y = ~np.isnan(y)
        if (is_e & has_y).any():
            raise ExperimentalRowHasOutcome(int(np.flatnonzero(is_e & has_y)[0]), "experimental rows carry no long-term outcome")
        if (~is_e & ~has_y).any():
            raise ObservationalRowMissingOutcome(int(np.flatnonzero(~is_e & ~has_y)[0]), "observational rows need a long-term outcome")
        if np.isinf(y).any():
            raise NonFiniteValue(int(np.flatnonzero(np.isinf(y))[0]), "long-term outcome must be finite")

        object.__setattr__(self, "group", _frozen(group))
        object.__setattr__(self, "a", _frozen(a_raw.astype(np.int8)))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "mu", int(self.mu))

    @property
    def n(self) -> int:
        return int(self.group.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    @property
    def T(self) -> int:
        return int(self.s.shape[1])

    @property
    def long_index(self) -> int:
        return self.T + self.mu

    @property
    def n_e(self) -> int:
        return int((self.group == EXPERIMENTAL).sum())

    @property
    def n_o(self) -> int:
        return int((self.group == OBSERVATIONAL).sum())

    def mask(self, group: str, arm: int | None = None) -> np.ndarray:
        m = self.group == group
        if arm is not None:
            m = m & (self.a == arm)
        return m

    def check_positivity(self) -> None:
        """Raise :class:`EmptyStratum` unless every (group, arm) cell is populated."""
        for g in GROUPS:
            for arm in (0, 1):
                if not self.mask(g, arm).any():
                    raise EmptyStratum(g, arm)

    def take(self, index: Sequence[int] | np.ndarray) -> "CombinedDataset":
        idx = np.asarray(index, dtype=int)
        return CombinedDataset(self.group[idx], self.a[idx], self.x[idx], self.s[idx], self.y[idx], self.mu)

    @property
    def records(self) -> tuple[UnitRecord, ...]:
        return tuple(
            UnitRecord(
                group=str(self.group[i]),
                treatment=int(self.a[i]),
                covariates=tuple(float(v) for v in self.x[i]),
                short_outcomes=tuple(float(v) for v in self.s[i]),
                long_outcome=None if np.isnan(self.y[i]) else float(self.y[i]),
            )
            for i in range(self.n)
        )

    @classmethod
    def from_records(cls, records: Iterable[UnitRecord], mu: int, d: int | None = None, T: int | None = None) -> "CombinedDataset":
        records = list(records)
        if not records:
            return cls.empty(d or 1, T or 1, mu)
        return cls(
            group=[r.group for r in records],
            a=[r.treatment for r in records],
            x=np.array([r.covariates for r in records], dtype=float),
            s=np.array([r.short_outcomes for r in records], dtype=float),
            y=[math.nan if r.long_outcome is None else r.long_outcome for r in records],
            mu=mu,
        )

    @classmethod
    def empty(cls, d: int, T: int, mu: int) -> "CombinedDataset":
        return cls(np.empty(0, dtype="<U1"), np.empty(0, dtype=int), np.empty((0, d)), np.empty((0, T)), np.empty(0), mu)


@dataclass(frozen=True)
class DataSchema:
    """What the caller expects a CSV to contain.

    ``mu`` is not recoverable from the file itself, so it is always supplied.
    ``d`` and ``T`` are checked against the header when given.
    """

    mu: int
    d: int | None = None
    T: int | None = None
    require_positivity: bool = True


def csv_header(d: int, T: int) -> list[str]:
    return ["group", "a"] + [f"x_{j}" for j in range(1, d + 1)] + [f"s_{t}" for t in range(1, T + 1)] + ["y"]


def _parse_header(header: list[str]) -> tuple[int, int]:
    if header[:2] != ["group", "a"]:
        raise MissingColumn("header must start with 'group,a'")
    if not header or header[-1] != "y":
        raise MissingColumn("header must end with 'y'")
    middle = header[2:-1]
    d = sum(1 for c in middle if c.startswith("x_"))
    T = len(middle) - d
    if d < 1:
        raise MissingColumn("missing covariate column x_1")
    if T < 1:
        raise MissingColumn("missing short-term outcome column s_1")
    expected = csv_header(d, T)
    for want, got in zip(expected, header):
        if want != got:
            raise MissingColumn(f"expected column {want!r}, found {got!r}")
    return d, T


def _num(text: str, row: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise NonFiniteValue(row, f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise NonFiniteValue(row, f"non-finite value {text!r}")
    return v


def load_csv(path: str | Path, schema: DataSchema) -> CombinedDataset:
    """Read a dataset written in the ``group,a,x_*,s_*,y`` layout."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("empty file: no header") from None
        d, T = _parse_header(header)
        if schema.d is not None and schema.d != d:
            raise MissingColumn(f"expected d={schema.d} covariate columns, header has {d}")
        if schema.T is not None and schema.T != T:
            raise MissingColumn(f"expected T={schema.T} short-term columns, header has {T}")

        width = len(header)
        groups, arms, xs, ss, ys = [], [], [], [], []
        for i, row in enumerate(reader):
            if len(row) != width:
                raise MissingColumn(f"row {i}: expected {width} fields, found {len(row)}")
            g = row[0]
            if g not in GROUPS:
                raise InvalidGroup(i, f"group must be 'E' or 'O', got {g!r}")
            if row[1] not in ("0", "1"):
                raise NonBinaryTreatment(i, f"treatment must be 0 or 1, got {row[1]!r}")
            y_text = row[-1]
            if g == EXPERIMENTAL and y_text != "":
                raise ExperimentalRowHasOutcome(i, "experimental rows carry no long-term outcome")
            if g == OBSERVATIONAL and y_text == "":
                raise ObservationalRowMissingOutcome(i, "observational rows need a long-term outcome")
            groups.append(g)
            arms.append(int(row[1]))
            xs.append([_num(v, i) for v in row[2 : 2 + d]])
            ss.append([_num(v, i) for v in row[2 + d : 2 + d + T]])
            ys.append(math.nan if y_text == "" else _num(y_text, i))

    if not groups:
        ds = CombinedDataset.empty(d, T, schema.mu)
    else:
        ds = CombinedDataset(np.array(groups), np.array(arms), np.array(xs), np.array(ss), np.array(ys), schema.mu)
    if schema.require_positivity:
        ds.check_positivity()
    return ds


def _fmt(v: float) -> str:
    # repr is the shortest string that round-trips a float exactly
    return repr(float(v))


def write_csv(dataset: CombinedDataset, path: str | Path) -> None:
    lines = [",".join(csv_header(dataset.d, dataset.T))]
    for i in range(dataset.n):
        fields = [str(dataset.group[i]), str(int(dataset.a[i]))]
        fields += [_fmt(v) for v in dataset.x[i]]
        fields += [_fmt(v) for v in dataset.s[i]]
        fields.append("" if np.isnan(dataset.y[i]) else _fmt(dataset.y[i]))
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class SplitPair:
    part_a: CombinedDataset
    part_b: CombinedDataset
    seed: int
    index_a: np.ndarray = field(repr=False)
    index_b: np.ndarray = field(repr=False)


def split_halves(dataset: CombinedDataset, seed: int) -> SplitPair:
    """Stratified 50/50 split by (group, treatment).

    Each stratum is shuffled with a generator seeded by ``seed`` and halved;
    an odd leftover goes to ``part_a``. Row order inside each half follows the
    original dataset.
    """
    rng = np.random.default_rng(seed)
    idx_a, idx_b = [], []
    for g in GROUPS:
        for arm in (0, 1):
            members = np.flatnonzero(dataset.mask(g, arm))
            if members.size < 2:
                raise StratumTooSmall(f"stratum group={g}, a={arm} has {members.size} rows; need at least 2")
            perm = rng.permutation(members)
            cut = (members.size + 1) // 2
            idx_a.append(perm[:cut])
            idx_b.append(perm[cut:])
    ia = np.sort(np.concatenate(idx_a))
    ib = np.sort(np.concatenate(idx_b))
    return SplitPair(dataset.take(ia), dataset.take(ib), seed, _frozen(ia), _frozen(ib))


def subset_geometry(kept_steps: Sequence[int], long_horizon_index: int) -> tuple[int, int, int]:
    """Return ``(spacing, T', mu')`` for an equally spaced step subset.

    Raises :class:`UnevenSpacing` or :class:`HorizonNotOnGrid`.
    """
    steps = [int(t) for t in kept_steps]
    if not steps:
        raise UnevenSpacing("kept_steps is empty")
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise UnevenSpacing(f"kept_steps must be strictly increasing: {steps}")
    if long_horizon_index <= steps[-1]:
        raise HorizonNotOnGrid(f"long horizon {long_horizon_index} must exceed the last kept step {steps[-1]}")
    if len(steps) == 1:
        return long_horizon_index - steps[0], 1, 1
    spacing = steps[1] - steps[0]
    if any(b - a != spacing for a, b in zip(steps, steps[1:])):
        raise UnevenSpacing(f"kept_steps are not an arithmetic progression: {steps}")
    gap = long_horizon_index - steps[-1]
    if gap % spacing:
        raise HorizonNotOnGrid(f"long horizon {long_horizon_index} is not reachable from step {steps[-1]} in steps of {spacing}")
    return spacing, len(steps), gap // spacing


def select_time_subset(
    dataset: CombinedDataset, kept_steps: Sequence[int], long_horizon_index: int | None = None
) -> CombinedDataset:
    """Keep the short-term columns ``kept_steps`` (1-based) and re-index time.

    The result has ``T' = len(kept_steps)`` and ``mu'`` measured in units of the
    subset's spacing.
    """
    if long_horizon_index is None:
        long_horizon_index = dataset.long_index
    elif long_horizon_index != dataset.long_index:
        raise HorizonNotOnGrid(
            f"long_horizon_index={long_horizon_index} disagrees with the dataset's Y = S_{dataset.long_index}"
        )
    steps = [int(t) for t in kept_steps]
    if steps and (steps[0] < 1 or steps[-1] > dataset.T):
        raise UnevenSpacing(f"kept_steps must lie in 1..{dataset.T}: {steps}")
    _, _, mu_new = subset_geometry(steps, long_horizon_index)
    cols = [t - 1 for t in steps]
    return CombinedDataset(dataset.group, dataset.a, dataset.x, dataset.s[:, cols], dataset.y, mu_new)
