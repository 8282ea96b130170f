"""INI-style configuration files.

Grammar, one statement per line::

    # comment              (also after a value: key = 1e-3  # note)
    [section]
    key = value

Sections and their keys are listed in :data:`SCHEMA`. Unknown sections or
keys are errors; omitted keys take the baseline defaults of
:class:`~heraldbell.planner.ExperimentParams`. Values are decimal numbers
(``4e-3``), ``true``/``false``, ``none`` (only where a key is optional) or a
bare word (simulation ``mode``). All quantities are SI: seconds, metres,
counts per second; ``attenuation`` is in dB/km.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .planner import ExperimentParams

SCHEMA = {
    "source": ("p", "pair_rate", "pair_window"),
    "optics": ("eta_c", "eta_t", "distance", "attenuation", "e_pol"),
    "atoms": ("eta_abs", "e_map", "allow_absorption_above_cap"),
    "detection": ("eta_d", "dark_rate", "window", "e_det", "t_readout"),
    "timing": ("t_prep", "t_rot"),
    "simulation": ("mode", "seed", "n_trials", "n_heralds", "max_attempts",
                   "override_eta_c", "override_eta_t", "override_eta_abs", "override_eta_d"),
}

_SIM_INT = ("seed", "n_trials", "n_heralds", "max_attempts")


class ConfigError(ValueError):
    def __init__(self, message, path=None, line=None, key=None):
        where = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path, self.line, self.key = path, line, key


@dataclass
class Config:
    params: ExperimentParams = field(default_factory=ExperimentParams)
    simulation: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def overrides(self) -> dict:
        return {k[len("override_"):]: v for k, v in self.simulation.items() if k.startswith("override_")}


def _convert(key: str, raw: str):
    low = raw.lower()
    if key == "mode":
        return raw
    if key == "allow_absorption_above_cap":
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected true/false, got {raw!r}")
    if low == "none" and key in ("eta_t", "n_trials", "n_heralds"):
        return None
    if key in _SIM_INT:
        try:
            return int(raw)
        except ValueError:
            as_float = float(raw)
            if not as_float.is_integer():
                raise
            return int(as_float)
    return float(raw)


def parse_config(text: str, path: str | None = None) -> Config:
    section = None
    params: dict = {}
    sim: dict = {}
    seen: set = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"malformed section header {stripped!r}", path, lineno)
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", path, lineno, section)
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", path, lineno)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if section is None:
            raise ConfigError(f"key {key!r} outside of any section", path, lineno, key)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", path, lineno, key)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", path, lineno, key)
        seen.add(key)
        try:
            value = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", path, lineno, key) from None
        (sim if section == "simulation" else params)[key] = value
    return Config(params=ExperimentParams(**params), simulation=sim, source=path)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: Config) -> str:
    """Serialize every key, defaults included; ``parse_config`` reads it back."""
    values = {**config.params.to_dict(), **config.simulation}
    out = []
    for section, keys in SCHEMA.items():
        present = [k for k in keys if k in values]
        if not present:
            continue
        out.append(f"[{section}]")
        out.extend(f"{k} = {_fmt(values[k])}" for k in present)
        out.append("")
    return "\n".join(out)
