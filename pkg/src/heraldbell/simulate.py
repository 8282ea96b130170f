"""Seeded Monte Carlo of the heralded Bell-test protocol.

Two engines share one record format:

* ``full-chain`` walks every attempt through the Bernoulli chain (pair
  emission, coupling, transmission, absorbable branch, absorption, herald
  detection, dark clicks) and keeps whatever heralds;
* ``herald-conditioned`` draws heralded trials directly from the exact
  conditional distribution of herald causes, plus a geometric number of
  attempts per herald for timing.

Trials are vectorized in chunks. Each trial draws from its own
counter-based stream (see :mod:`heraldbell.rng`) at fixed slot numbers, so
results do not depend on the chunking or on the number of threads.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from collections.abc import Iterable

import numpy as np

from . import quantum
from .planner import C_VACUUM, ExperimentParams, arm_transmission, locality_margin, visibility_without_dark
from .rng import trial_seed as derive_trial_seed
from .rng import trial_seeds, uniforms

C_FIBER = 2e8  # m/s

NONE, REAL, DARK = 0, 1, 2
CAUSE_NAMES = ("none", "real", "dark")

# draw slots; both engines share the setting/outcome slots
_PAIR, _ARM_A, _ARM_B = 0, 1, 6
_DARK_A, _DARK_B = (11, 12), (13, 14)
_CAUSE, _WAIT = 0, 1
_DARK_TIME_A, _DARK_TIME_B = 15, 16
_X, _Y, _OUTCOME, _FLIP_A, _FLIP_B = 17, 18, 19, 20, 21

# joint outcome order used by the sampling tables
_AB = ((1, 1), (1, -1), (-1, 1), (-1, -1))

OVERRIDABLE = ("eta_c", "eta_t", "eta_abs", "eta_d")


class Mode(str, enum.Enum):
    FULL_CHAIN = "full-chain"
    HERALD_CONDITIONED = "herald-conditioned"

    @classmethod
    def parse(cls, value) -> "Mode":
        aliases = {"full": cls.FULL_CHAIN, "conditioned": cls.HERALD_CONDITIONED}
        if isinstance(value, cls):
            return value
        return aliases.get(value) or cls(value)


class StopRuleUnreachable(RuntimeError):
    pass


def default_threads() -> int:
    raw = os.environ.get("HBS_THREADS", "0").strip() or "0"
    n = int(raw)
    return (os.cpu_count() or 1) if n <= 0 else n


@dataclass(frozen=True)
class SimConfig:
    mode: Mode = Mode.HERALD_CONDITIONED
    n_trials: int | None = None
    n_heralds: int | None = None
    seed: int = 0
    overrides: dict = field(default_factory=dict)
    max_attempts: int = 10**10   # bounds the full-chain walk; conditioned attempts are sampled
    chunk_size: int = 1 << 17
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if (self.n_trials is None) == (self.n_heralds is None):
            raise ValueError("set exactly one stop rule: n_trials or n_heralds")
        n = self.n_trials if self.n_trials is not None else self.n_heralds
        if n < 1:
            raise ValueError("stop rule count must be positive")
        for key, value in self.overrides.items():
            if key not in OVERRIDABLE:
                raise ValueError(f"cannot override {key!r}; allowed: {', '.join(OVERRIDABLE)}")
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"override {key} = {value!r} must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def stop_rule(self) -> str:
        return "n_trials" if self.n_trials is not None else "n_heralds"

    def apply(self, params: ExperimentParams) -> ExperimentParams:
        if not self.overrides:
            return params
        extra = {"allow_absorption_above_cap": True} if "eta_abs" in self.overrides else {}
        return params.replace(**self.overrides, **extra)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    prep_done: float
    cause_A: str
    cause_B: str
    pair_emitted: float | None = None
    herald_A: float | None = None
    herald_B: float | None = None
    setting_chosen_A: float | None = None
    setting_chosen_B: float | None = None
    outcome_ready_A: float | None = None
    outcome_ready_B: float | None = None
    x: int | None = None
    y: int | None = None
    a: int | None = None
    b: int | None = None
    attempts: int = 1

    @property
    def heralded(self) -> bool:
        return self.cause_A != "none" and self.cause_B != "none"


_FLOAT_COLS = ("prep_done", "pair_emitted", "herald_A", "herald_B", "setting_chosen_A",
               "setting_chosen_B", "outcome_ready_A", "outcome_ready_B")
_INT_COLS = ("trial_id", "attempts", "cause_A", "cause_B", "x", "y", "a", "b")


@dataclass
class RecordBatch:
    """Columnar trial records. Absent times are NaN, absent x/y are -1, absent a/b are 0."""

    trial_id: np.ndarray
    attempts: np.ndarray
    cause_A: np.ndarray
    cause_B: np.ndarray
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    prep_done: np.ndarray
    pair_emitted: np.ndarray
    herald_A: np.ndarray
    herald_B: np.ndarray
    setting_chosen_A: np.ndarray
    setting_chosen_B: np.ndarray
    outcome_ready_A: np.ndarray
    outcome_ready_B: np.ndarray

    def __len__(self):
        return int(self.trial_id.size)

    @property
    def heralded(self) -> np.ndarray:
        return (self.cause_A != NONE) & (self.cause_B != NONE)

    def columns(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def select(self, mask) -> "RecordBatch":
        return RecordBatch(**{k: v[mask] for k, v in self.columns().items()})

    @classmethod
    def concat(cls, batches: list["RecordBatch"]) -> "RecordBatch":
        names = [f.name for f in dataclasses.fields(cls)]
        return cls(**{n: np.concatenate([getattr(b, n) for b in batches]) for n in names})

    def __getitem__(self, i: int) -> TrialRecord:
        def t(name):
            v = float(getattr(self, name)[i])
            return None if math.isnan(v) else v

        x = int(self.x[i])
        return TrialRecord(
            trial_id=int(self.trial_id[i]), attempts=int(self.attempts[i]),
            cause_A=CAUSE_NAMES[self.cause_A[i]], cause_B=CAUSE_NAMES[self.cause_B[i]],
            x=None if x < 0 else x, y=None if x < 0 else int(self.y[i]),
            a=None if x < 0 else int(self.a[i]), b=None if x < 0 else int(self.b[i]),
            prep_done=float(self.prep_done[i]), pair_emitted=t("pair_emitted"),
            herald_A=t("herald_A"), herald_B=t("herald_B"),
            setting_chosen_A=t("setting_chosen_A"), setting_chosen_B=t("setting_chosen_B"),
            outcome_ready_A=t("outcome_ready_A"), outcome_ready_B=t("outcome_ready_B"),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord]) -> "RecordBatch":
        records = list(records)
        cols = {}
        for name in _FLOAT_COLS:
            cols[name] = np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                                   for r in records], dtype=float)
        cols["trial_id"] = np.array([r.trial_id for r in records], dtype=np.int64)
        cols["attempts"] = np.array([r.attempts for r in records], dtype=np.int64)
        for side in "AB":
            cols["cause_" + side] = np.array([CAUSE_NAMES.index(getattr(r, "cause_" + side))
                                              for r in records], dtype=np.int8)
        for name, absent in (("x", -1), ("y", -1), ("a", 0), ("b", 0)):
            cols[name] = np.array([absent if getattr(r, name) is None else getattr(r, name)
                                   for r in records], dtype=np.int8)
        return cls(**cols)


# --- engine internals -------------------------------------------------------

@dataclass(frozen=True)
class _Model:
    """Per-campaign constants derived from the parameters."""

    params: ExperimentParams
    eta_t: float
    q: float                  # real herald per arm, given a pair
    dark_site: float          # dark click at a site within one window
    tables: np.ndarray        # [state, x, y, 4] cumulative outcome probabilities
    cause_weights: np.ndarray  # RR, RD, DR, DD per attempt

    @classmethod
    def build(cls, params: ExperimentParams) -> "_Model":
        eta_t = arm_transmission(params)
        q = 0.5 * params.eta_c * eta_t * params.eta_abs * params.eta_d
        per_detector = params.eta_dark / 2
        d = 1 - (1 - per_detector) ** 2
        p = params.p
        weights = np.array([
            p * q * q,
            p * q * (1 - q) * d,
            p * q * (1 - q) * d,
            ((1 - p) + p * (1 - q) ** 2) * d * d,
        ])
        states = (quantum.werner(visibility_without_dark(params)), quantum.DensityMatrix.maximally_mixed())
        (a0, a1), (b0, b1) = quantum.setting_angles()
        angles = ((a0, a1), (b0, b1))
        tables = np.zeros((2, 2, 2, 4))
        for s, rho in enumerate(states):
            for x in (0, 1):
                for y in (0, 1):
                    probs = quantum.born_probs(rho, angles[0][x], angles[1][y])
                    tables[s, x, y] = np.cumsum([probs[ab] for ab in _AB])
        return cls(params, eta_t, q, d, tables, weights)

    @property
    def herald_probability(self) -> float:
        return float(self.cause_weights.sum())

    @property
    def flight_time(self) -> float:
        return self.params.distance / 2 / C_FIBER


def _empty(n: int) -> dict[str, np.ndarray]:
    cols = {name: np.full(n, np.nan) for name in _FLOAT_COLS}
    cols["attempts"] = np.ones(n, dtype=np.int64)
    cols["cause_A"] = np.zeros(n, dtype=np.int8)
    cols["cause_B"] = np.zeros(n, dtype=np.int8)
    cols["x"] = np.full(n, -1, dtype=np.int8)
    cols["y"] = np.full(n, -1, dtype=np.int8)
    cols["a"] = np.zeros(n, dtype=np.int8)
    cols["b"] = np.zeros(n, dtype=np.int8)
    return cols


def _herald_times(model: _Model, seeds, cols, t_arrival):
    """Real clicks at the expected arrival, dark clicks uniform in the window."""
    dt = model.params.window
    for side, slot in (("A", _DARK_TIME_A), ("B", _DARK_TIME_B)):
        cause = cols["cause_" + side]
        t = np.full(cause.size, np.nan)
        real, dark = cause == REAL, cause == DARK
        t[real] = t_arrival[real]
        if dark.any():
            t[dark] = t_arrival[dark] - dt / 2 + uniforms(seeds[dark], slot) * dt
        cols["herald_" + side] = t


def _measure(model: _Model, seeds, cols, t_arrival):
    """Settings after the local herald, Born-rule outcomes, readout flips."""
    h = (cols["cause_A"] != NONE) & (cols["cause_B"] != NONE)
    if not h.any():
        return
    s = seeds[h]
    x = (uniforms(s, _X) < 0.5).astype(np.int8)
    y = (uniforms(s, _Y) < 0.5).astype(np.int8)
    state = ((cols["cause_A"][h] == DARK) | (cols["cause_B"][h] == DARK)).astype(np.intp)
    cum = model.tables[state, x, y]
    u = uniforms(s, _OUTCOME)[:, None]
    k = (u >= cum[:, :3]).sum(axis=1)
    ab = np.array(_AB, dtype=np.int8)[k]
    e_det = model.params.e_det
    flip_a = np.where(uniforms(s, _FLIP_A) < e_det, -1, 1).astype(np.int8)
    flip_b = np.where(uniforms(s, _FLIP_B) < e_det, -1, 1).astype(np.int8)
    cols["x"][h], cols["y"][h] = x, y
    cols["a"][h], cols["b"][h] = ab[:, 0] * flip_a, ab[:, 1] * flip_b

    window_close = t_arrival[h] + model.params.window / 2
    for side in "AB":
        herald = cols["herald_" + side][h]
        chosen = np.maximum(window_close, np.nextafter(herald, np.inf))
        col = cols["setting_chosen_" + side]
        col[h] = chosen
        cols["outcome_ready_" + side][h] = chosen + model.params.t_rot + model.params.t_readout


def _full_chain(model: _Model, seeds: np.ndarray, ids: np.ndarray) -> RecordBatch:
    prm = model.params
    n = ids.size
    cols = _empty(n)
    pair = uniforms(seeds, _PAIR) < prm.p
    chain = (prm.eta_c, model.eta_t, 0.5, prm.eta_abs, prm.eta_d)
    d = prm.eta_dark / 2
    for side, base, dark_slots in (("A", _ARM_A, _DARK_A), ("B", _ARM_B, _DARK_B)):
        real = pair.copy()
        for k, prob in enumerate(chain):
            real &= uniforms(seeds, base + k) < prob
        dark = (uniforms(seeds, dark_slots[0]) < d) | (uniforms(seeds, dark_slots[1]) < d)
        cols["cause_" + side] = np.where(real, REAL, np.where(dark, DARK, NONE)).astype(np.int8)

    t0 = ids.astype(np.float64) * prm.t_prep
    cols["trial_id"] = ids.astype(np.int64)
    cols["prep_done"] = t0 + prm.t_prep
    cols["pair_emitted"] = np.where(pair, cols["prep_done"], np.nan)
    t_arrival = cols["prep_done"] + model.flight_time
    _herald_times(model, seeds, cols, t_arrival)
    _measure(model, seeds, cols, t_arrival)
    return RecordBatch(**cols)


def _conditioned(model: _Model, seeds: np.ndarray, ids: np.ndarray) -> RecordBatch:
    n = ids.size
    cols = _empty(n)
    total = model.herald_probability
    cum = np.cumsum(model.cause_weights / total)
    k = (uniforms(seeds, _CAUSE)[:, None] >= cum[None, :3]).sum(axis=1)
    cols["cause_A"] = np.array([REAL, REAL, DARK, DARK], dtype=np.int8)[k]
    cols["cause_B"] = np.array([REAL, DARK, REAL, DARK], dtype=np.int8)[k]
    if total >= 1.0:
        cols["attempts"] = np.ones(n, dtype=np.int64)
    else:
        u = uniforms(seeds, _WAIT)
        cols["attempts"] = (np.floor(np.log1p(-u) / math.log1p(-total)) + 1).astype(np.int64)
    cols["trial_id"] = ids.astype(np.int64)
    # timestamps relative to the start of the herald's own attempt; shifted later
    prm = model.params
    cols["prep_done"] = np.full(n, prm.t_prep)
    pair = (cols["cause_A"] == REAL) | (cols["cause_B"] == REAL)
    cols["pair_emitted"] = np.where(pair, prm.t_prep, np.nan)
    t_arrival = cols["prep_done"] + model.flight_time
    _herald_times(model, seeds, cols, t_arrival)
    _measure(model, seeds, cols, t_arrival)
    return RecordBatch(**cols)


def _shift_conditioned_times(batch: RecordBatch, t_prep: float) -> None:
    start = (np.cumsum(batch.attempts) - 1).astype(np.float64) * t_prep
    for name in _FLOAT_COLS:
        getattr(batch, name)[:] += start
    # late in a long campaign one ulp can exceed the herald-to-setting gap
    for side in "AB":
        herald, chosen = getattr(batch, "herald_" + side), getattr(batch, "setting_chosen_" + side)
        h = ~np.isnan(chosen)
        chosen[h] = np.maximum(chosen[h], np.nextafter(herald[h], np.inf))


_KERNELS = {Mode.FULL_CHAIN: _full_chain, Mode.HERALD_CONDITIONED: _conditioned}


def _run_chunk(mode: Mode, model: _Model, master_seed: int, ids: np.ndarray) -> RecordBatch:
    return _KERNELS[mode](model, trial_seeds(master_seed, ids), ids)


# --- public API -------------------------------------------------------------

def run_trial(params: ExperimentParams, trial_seed: int) -> TrialRecord:
    """One full-chain attempt starting at t = 0; bit-identical for a given seed."""
    ids = np.zeros(1, dtype=np.int64)
    return _full_chain(_Model.build(params), np.array([trial_seed], dtype=np.uint64), ids)[0]


def herald_conditioned_trial(params: ExperimentParams, trial_seed: int) -> TrialRecord:
    """One heralded trial drawn from the conditional herald-cause distribution."""
    model = _Model.build(params)
    if model.herald_probability == 0:
        raise StopRuleUnreachable("herald probability is zero")
    ids = np.zeros(1, dtype=np.int64)
    batch = _conditioned(model, np.array([trial_seed], dtype=np.uint64), ids)
    _shift_conditioned_times(batch, params.t_prep)
    return batch[0]


def herald_fraction_exact(params: ExperimentParams) -> dict[str, float]:
    """Per-attempt probabilities of each twofold-herald cause in the engine's model."""
    w = _Model.build(params).cause_weights
    return {"real/real": w[0], "real/dark": w[1], "dark/real": w[2], "dark/dark": w[3],
            "total": float(w.sum())}


def _outcome_key(x, y):
    return f"x={x},y={y}"


def _sign(v):
    return "+" if v > 0 else "-"


@dataclass
class CampaignSummary:
    mode: str
    seed: int
    stop_rule: str
    n_attempts: int = 0
    n_records: int = 0
    n_heralded: int = 0
    counts_by_cause: dict = field(default_factory=dict)
    outcome_table: dict = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    @classmethod
    def from_batch(cls, batch: RecordBatch, mode: Mode, seed: int, stop_rule: str,
                   params: ExperimentParams) -> "CampaignSummary":
        h = batch.heralded
        summary = cls(mode=Mode(mode).value, seed=seed, stop_rule=stop_rule)
        summary.n_attempts = int(batch.attempts.sum())
        summary.n_records = len(batch)
        summary.n_heralded = int(h.sum())
        code = batch.cause_A.astype(np.int64) * 3 + batch.cause_B
        counts = np.bincount(code, minlength=9)
        summary.counts_by_cause = {f"{CAUSE_NAMES[i // 3]}/{CAUSE_NAMES[i % 3]}": int(counts[i])
                                   for i in range(9) if counts[i]}
        cell = ((batch.x[h].astype(np.int64) * 2 + batch.y[h]) * 4
                + (batch.a[h] < 0) * 2 + (batch.b[h] < 0))
        table = np.bincount(cell, minlength=16)
        summary.outcome_table = {
            _outcome_key(x, y): {_sign(a) + _sign(b): int(table[(x * 2 + y) * 4 + (a < 0) * 2 + (b < 0)])
                                 for a in (1, -1) for b in (1, -1)}
            for x in (0, 1) for y in (0, 1)}
        summary.elapsed_seconds = summary.n_attempts * params.t_prep + summary.n_heralded * (
            params.t_rot + params.t_readout)
        return summary

    def merge(self, other: "CampaignSummary") -> "CampaignSummary":
        if (self.mode, self.seed) != (other.mode, other.seed):
            raise ValueError("cannot merge summaries of different campaigns")
        causes = dict(self.counts_by_cause)
        for k, v in other.counts_by_cause.items():
            causes[k] = causes.get(k, 0) + v
        table = {k: dict(v) for k, v in self.outcome_table.items()}
        for k, cells in other.outcome_table.items():
            row = table.setdefault(k, {})
            for c, v in cells.items():
                row[c] = row.get(c, 0) + v
        return CampaignSummary(
            mode=self.mode, seed=self.seed, stop_rule=self.stop_rule,
            n_attempts=self.n_attempts + other.n_attempts,
            n_records=self.n_records + other.n_records,
            n_heralded=self.n_heralded + other.n_heralded,
            counts_by_cause=dict(sorted(causes.items())), outcome_table=table,
            elapsed_seconds=self.elapsed_seconds + other.elapsed_seconds,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _chunks(start: int, stop: int, size: int):
    for lo in range(start, stop, size):
        yield np.arange(lo, min(lo + size, stop), dtype=np.int64)


def run_campaign(config: SimConfig, params: ExperimentParams) -> tuple[RecordBatch, CampaignSummary]:
    """Run a seeded campaign; returns every record in trial order and its summary."""
    params = config.apply(params)
    model = _Model.build(params)
    mode = config.mode
    threads = config.threads or default_threads()
    if model.herald_probability == 0 and (mode is Mode.HERALD_CONDITIONED or config.n_heralds):
        raise StopRuleUnreachable(
            f"twofold herald probability is zero ({mode.value}, {config.stop_rule}); no herald can occur")

    def run(id_chunks):
        if threads <= 1 or len(id_chunks) <= 1:
            return [_run_chunk(mode, model, config.seed, ids) for ids in id_chunks]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda ids: _run_chunk(mode, model, config.seed, ids), id_chunks))

    if mode is Mode.HERALD_CONDITIONED or config.n_trials is not None:
        n = config.n_trials if config.n_trials is not None else config.n_heralds
        batches = run(list(_chunks(0, n, config.chunk_size)))
    else:
        batches, found, next_id = [], 0, 0
        while found < config.n_heralds:
            if next_id >= config.max_attempts:
                raise StopRuleUnreachable(
                    f"only {found} of {config.n_heralds} heralds after {next_id} attempts")
            wave_end = min(next_id + config.chunk_size * max(threads, 1), config.max_attempts)
            for batch in run(list(_chunks(next_id, wave_end, config.chunk_size))):
                if found >= config.n_heralds:
                    break
                hits = np.flatnonzero(batch.heralded)
                need = config.n_heralds - found
                if hits.size >= need:
                    batch = batch.select(slice(0, hits[need - 1] + 1))
                    found = config.n_heralds
                else:
                    found += hits.size
                batches.append(batch)
            next_id = wave_end

    batch = RecordBatch.concat(batches)
    if mode is Mode.HERALD_CONDITIONED:
        _shift_conditioned_times(batch, params.t_prep)
    summary = CampaignSummary.from_batch(batch, mode, config.seed, config.stop_rule, params)
    return batch, summary


# --- loophole bookkeeping -----------------------------------------------------

@dataclass(frozen=True)
class LoopholeReport:
    locality_ok: bool
    locality_margin: float
    ordering_ok: bool
    n_heralded: int
    n_out_of_order: int
    violating_fraction: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def loophole_check(records, params: ExperimentParams) -> LoopholeReport:
    """Pre-selection ordering per heralded record, and the global locality budget."""
    batch = records if isinstance(records, RecordBatch) else RecordBatch.from_records(records)
    h = batch.heralded
    with np.errstate(invalid="ignore"):
        ok = ((batch.setting_chosen_A[h] > batch.herald_A[h])
              & (batch.setting_chosen_B[h] > batch.herald_B[h]))
    n_h = int(h.sum())
    n_bad = int(n_h - ok.sum())
    measurement_time = params.t_rot + params.t_readout
    locality_ok = measurement_time <= params.distance / C_VACUUM
    violating = n_h if not locality_ok else n_bad
    return LoopholeReport(
        locality_ok=bool(locality_ok), locality_margin=locality_margin(params),
        ordering_ok=n_bad == 0, n_heralded=n_h, n_out_of_order=n_bad,
        violating_fraction=violating / n_h if n_h else 0.0,
    )


# --- record stream ------------------------------------------------------------

CSV_COLUMNS = ("trial_id", "herald_cause_A", "herald_cause_B", "t_herald_A", "t_herald_B",
               "x", "y", "a", "b")


def _fmt_time(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def iter_csv_rows(batch: RecordBatch, heralded_only: bool = False):
    h = batch.heralded
    idx = np.flatnonzero(h) if heralded_only else range(len(batch))
    ids, ca, cb = batch.trial_id.tolist(), batch.cause_A.tolist(), batch.cause_B.tolist()
    ta, tb = batch.herald_A.tolist(), batch.herald_B.tolist()
    xs, ys, as_, bs = batch.x.tolist(), batch.y.tolist(), batch.a.tolist(), batch.b.tolist()
    for i in idx:
        present = xs[i] >= 0
        yield (ids[i], CAUSE_NAMES[ca[i]], CAUSE_NAMES[cb[i]], _fmt_time(ta[i]), _fmt_time(tb[i]),
               xs[i] if present else "", ys[i] if present else "",
               as_[i] if present else "", bs[i] if present else "")


def write_records_csv(batch: RecordBatch, fh, heralded_only: bool = False) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(iter_csv_rows(batch, heralded_only))


def read_records_csv(fh) -> RecordBatch:
    """Parse a record stream back into a batch (setting timestamps are not stored)."""
    def opt(conv, text):
        return None if text == "" else conv(text)

    recs = [TrialRecord(
        trial_id=int(r["trial_id"]), prep_done=math.nan,
        cause_A=r["herald_cause_A"], cause_B=r["herald_cause_B"],
        herald_A=opt(float, r["t_herald_A"]), herald_B=opt(float, r["t_herald_B"]),
        x=opt(int, r["x"]), y=opt(int, r["y"]), a=opt(int, r["a"]), b=opt(int, r["b"]))
        for r in csv.DictReader(fh)]
    return RecordBatch.from_records(recs)


__all__ = [
    "Mode", "SimConfig", "TrialRecord", "RecordBatch", "CampaignSummary", "LoopholeReport",
    "StopRuleUnreachable", "run_trial", "herald_conditioned_trial", "run_campaign",
    "loophole_check", "write_records_csv", "read_records_csv", "herald_fraction_exact",
    "derive_trial_seed",
]
