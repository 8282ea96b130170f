"""Closed-form error and rate budget for the heralded Bell test."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field, fields

from .atom import MAX_ABSORPTION_EFFICIENCY, check_absorption_efficiency

C_VACUUM = 2.998e8  # m/s
SQRT2 = math.sqrt(2.0)
TSIRELSON = 2 * SQRT2


class ParameterError(ValueError):
    """A parameter is outside its physical domain."""


class NoViolationError(ValueError):
    """The effective visibility cannot violate CHSH."""


_PROBABILITIES = ("eta_c", "eta_abs", "eta_d", "e_pol", "e_map", "e_det")
_POSITIVE = ("t_prep", "t_rot", "distance", "attenuation", "pair_rate", "pair_window", "window")
_NONNEGATIVE = ("dark_rate", "t_readout")


@dataclass(frozen=True)
class ExperimentParams:
    """Hardware and noise parameters, SI units. Defaults are the baseline design."""

    p: float = 4e-3
    eta_c: float = 0.7
    eta_abs: float = 0.06
    eta_d: float = 0.3
    dark_rate: float = 30.0
    window: float = 20e-9
    e_pol: float = 0.01
    e_map: float = 0.01
    e_det: float = 5e-4
    t_prep: float = 25e-6
    t_rot: float = 10e-6
    t_readout: float = 0.0
    distance: float = 3000.0
    attenuation: float = 1.0
    pair_rate: float = 5e5
    pair_window: float = 7e-9
    eta_t: float | None = None
    allow_absorption_above_cap: bool = False

    def __post_init__(self):
        for name in ("p",) + _PROBABILITIES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} = {v!r} must lie in [0, 1]")
        if self.eta_t is not None and not 0.0 <= self.eta_t <= 1.0:
            raise ParameterError(f"eta_t = {self.eta_t!r} must lie in [0, 1]")
        for name in _POSITIVE:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} = {getattr(self, name)!r} must be positive")
        for name in _NONNEGATIVE:
            if not getattr(self, name) >= 0:
                raise ParameterError(f"{name} = {getattr(self, name)!r} must be nonnegative")
        check_absorption_efficiency(self.eta_abs, self.allow_absorption_above_cap)

    @property
    def absorption_within_cap(self) -> bool:
        return self.eta_abs <= MAX_ABSORPTION_EFFICIENCY

    @property
    def eta_dark(self) -> float:
        """Dark-click probability per site within one coincidence window."""
        return self.dark_rate * self.window

    def replace(self, **changes) -> "ExperimentParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def transmission(distance: float, attenuation: float) -> float:
    """Per-arm fiber transmission with the source at the midpoint (distance in m)."""
    if distance <= 0 or attenuation <= 0:
        raise ParameterError("distance and attenuation must be positive")
    return 10 ** (-attenuation * (distance / 2 / 1000) / 10)


def arm_transmission(params: ExperimentParams) -> float:
    if params.eta_t is not None:
        return params.eta_t
    return transmission(params.distance, params.attenuation)


def pair_probability(pair_rate: float, window: float) -> float:
    """Pair probability per window for a given source rate (rate x window)."""
    if pair_rate <= 0 or window <= 0:
        raise ParameterError("pair_rate and window must be positive")
    return pair_rate * window


def visibility_photon(p: float) -> float:
    """Multi-pair limited two-photon visibility (1 - p/2)/(1 + p/2 - p^2/2).

    Defined on the closed interval; p = 1 gives 1/2.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p = {p!r} must lie in [0, 1]")
    return (1 - p / 2) / (1 + p / 2 - p * p / 2)


def herald_probability(params: ExperimentParams) -> tuple[float, float]:
    """(p_abs, p_herald): twofold absorption and twofold herald per attempt."""
    eta_t = arm_transmission(params)
    p_abs = 0.25 * params.p * (params.eta_c * eta_t * params.eta_abs) ** 2
    return p_abs, p_abs * params.eta_d ** 2


def dark_count_error(params: ExperimentParams) -> tuple[float, float]:
    """(p_dark, e_dark) for one real herald coinciding with one dark count."""
    eta_t = arm_transmission(params)
    p_dark = params.p * params.eta_c * eta_t * params.eta_abs * params.eta_d * params.eta_dark
    _, p_herald = herald_probability(params)
    denom = p_dark + p_herald
    return p_dark, (p_dark / denom if denom > 0 else 0.0)


def visibility_without_dark(params: ExperimentParams) -> float:
    """V_ph (1 - e_pol)(1 - e_map)^2: the visibility of a genuinely twofold herald."""
    return visibility_photon(params.p) * (1 - params.e_pol) * (1 - params.e_map) ** 2


def visibility_atom(params: ExperimentParams) -> tuple[float, float]:
    """(V_at, V_eff) with V_eff = V_at (1 - 2 e_det)^2."""
    _, e_dark = dark_count_error(params)
    v_at = visibility_without_dark(params) * (1 - e_dark)
    return v_at, v_at * (1 - 2 * params.e_det) ** 2


def expected_chsh(params: ExperimentParams) -> float:
    return TSIRELSON * visibility_atom(params)[1]


def _radicand(v_eff: float) -> float:
    v = v_eff / SQRT2
    return 3 * (1 - v) ** 2 * (3 + v) + (1 + v) ** 2 * (3 - v)


def chsh_std(v_eff: float, n: float) -> float:
    """Model standard deviation of the CHSH value after ``n`` heralded events."""
    if not 0.0 <= v_eff <= 1.0:
        raise ParameterError(f"V_eff = {v_eff!r} must lie in [0, 1]")
    if n < 1:
        raise ParameterError("N must be at least 1")
    return math.sqrt(_radicand(v_eff)) / math.sqrt(2 * n)


def required_events_sigma_real(v_eff: float, k_sigma: float = 3.0) -> float:
    """Real-valued N at which S_exp - 2 equals k_sigma standard deviations."""
    margin = TSIRELSON * v_eff - 2
    if margin <= 0:
        raise NoViolationError(f"V_eff = {v_eff!r} <= 1/sqrt(2): no violation achievable")
    return k_sigma ** 2 * _radicand(v_eff) / (2 * margin ** 2)


def required_events_sigma(v_eff: float, k_sigma: float = 3.0) -> int:
    """Smallest integer N with S_exp - 2 >= k_sigma * chsh_std(V_eff, N)."""
    n = max(1, math.ceil(required_events_sigma_real(v_eff, k_sigma)))
    margin = TSIRELSON * v_eff - 2
    # guard the ceiling against rounding in the closed form
    while n > 1 and margin >= k_sigma * chsh_std(v_eff, n - 1):
        n -= 1
    while margin < k_sigma * chsh_std(v_eff, n):
        n += 1
    return n


def local_model_bound(s: float, n: float) -> float:
    """Upper bound exp(-N (S - 2)^2 / 32) on a local model producing S."""
    if n < 1:
        raise ParameterError("N must be at least 1")
    if s <= 2:
        return 1.0
    return math.exp(-n * (s - 2) ** 2 / 32)


def required_events_pvalue_real(s: float, alpha: float = 0.05) -> float:
    if s <= 2:
        raise NoViolationError(f"S = {s!r} <= 2: no local-model rejection possible")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    return 32 * math.log(1 / alpha) / (s - 2) ** 2


def required_events_pvalue(s: float, alpha: float = 0.05) -> int:
    """Smallest integer N whose local-model bound is at most alpha."""
    n = max(1, math.ceil(required_events_pvalue_real(s, alpha)))
    while n > 1 and local_model_bound(s, n - 1) <= alpha:
        n -= 1
    while local_model_bound(s, n) > alpha:
        n += 1
    return n


def acquisition_time(params: ExperimentParams, n: float) -> float:
    """N T_prep / p_herald in seconds; ``math.inf`` when nothing can herald."""
    if n < 1:
        raise ParameterError("N must be at least 1")
    _, p_herald = herald_probability(params)
    if p_herald == 0:
        return math.inf
    return n * params.t_prep / p_herald


def locality_margin(params: ExperimentParams) -> float:
    """L/c minus the time to learn the atomic state after the setting choice."""
    return params.distance / C_VACUUM - (params.t_rot + params.t_readout)


@dataclass(frozen=True)
class PlannerReport:
    p: float
    eta_t: float
    V_ph: float
    p_abs: float
    p_herald: float
    p_dark: float
    e_dark: float
    V_at: float
    V_eff: float
    S_exp: float
    N_3sigma: int | None
    N_3sigma_real: float | None
    dS_exp: float | None
    N_pvalue: int | None
    N_pvalue_real: float | None
    T_acq: float
    T_acq_pvalue: float
    locality_margin: float
    infinite_acquisition: bool
    k_sigma: float = 3.0
    alpha: float = 0.05
    params: ExperimentParams = field(default_factory=ExperimentParams, repr=False, compare=False)

    def delta_s(self, n: float) -> float:
        return chsh_std(self.V_eff, n)

    def to_dict(self) -> dict:
        """Flat record; infinities become ``None``."""
        out = {}
        for f in fields(self):
            if f.name == "params":
                continue
            v = getattr(self, f.name)
            out[f.name] = None if isinstance(v, float) and math.isinf(v) else v
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


REPORT_FIELDS = [f.name for f in fields(PlannerReport) if f.name != "params"]


def plan(params: ExperimentParams, k_sigma: float = 3.0, alpha: float = 0.05) -> PlannerReport:
    eta_t = arm_transmission(params)
    p_abs, p_herald = herald_probability(params)
    p_dark, e_dark = dark_count_error(params)
    v_at, v_eff = visibility_atom(params)
    s_exp = TSIRELSON * v_eff
    if s_exp > 2:
        n_sig, n_sig_real = required_events_sigma(v_eff, k_sigma), required_events_sigma_real(v_eff, k_sigma)
        n_pv, n_pv_real = required_events_pvalue(s_exp, alpha), required_events_pvalue_real(s_exp, alpha)
        ds = chsh_std(v_eff, n_sig)
        t_acq, t_acq_pv = acquisition_time(params, n_sig), acquisition_time(params, n_pv)
    else:
        n_sig = n_sig_real = n_pv = n_pv_real = ds = None
        t_acq = t_acq_pv = math.inf
    return PlannerReport(
        p=params.p, eta_t=eta_t, V_ph=visibility_photon(params.p), p_abs=p_abs, p_herald=p_herald,
        p_dark=p_dark, e_dark=e_dark, V_at=v_at, V_eff=v_eff, S_exp=s_exp,
        N_3sigma=n_sig, N_3sigma_real=n_sig_real, dS_exp=ds, N_pvalue=n_pv, N_pvalue_real=n_pv_real,
        T_acq=t_acq, T_acq_pvalue=t_acq_pv, locality_margin=locality_margin(params),
        infinite_acquisition=p_herald == 0, k_sigma=k_sigma, alpha=alpha, params=params,
    )


def sweep_p(params: ExperimentParams, p_grid, **kwargs) -> list[PlannerReport]:
    return [plan(params.replace(p=float(p)), **kwargs) for p in p_grid]


def time_to_certify(report: PlannerReport) -> float:
    """Figure of merit for the p sweep: seconds until the local-model bound reaches alpha."""
    return report.T_acq_pvalue


def best_p(reports: list[PlannerReport]) -> PlannerReport:
    return min(reports, key=time_to_certify)


def reports_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                         for k, v in r.to_dict().items()})
    return buf.getvalue()
