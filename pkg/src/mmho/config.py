"""Experiment configuration: a small ``key = value`` text format with dotted keys.

Grammar (one entry per line)::

    # comment                      anything after an unquoted '#' is ignored
    section.name = value           keys are dotted lower-case identifiers
    value := number | true | false | "quoted string" | bare_word | [v1, v2, ...]

Every key has a default. Defaults from the reference parameter set
are marked ``table``; the rest are ``invented`` and flagged as such by
:func:`echo_config`.
"""

from __future__ import annotations

import difflib
import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .analysis import TrafficModel
from .errors import ConfigError
from .radio import AntennaPattern, Band, PathLossParams
from .sim.engine import HoParams, SimConfig

_KEY = re.compile(r"^[a-z_][a-z0-9_]*(\.[a-z_][a-z0-9_]*)*$")
_MODES = ("analysis", "simulation", "compare")


@dataclass(frozen=True)
class Key:
    name: str
    kind: str  # float | int | bool | str | floats
    default: Any
    source: str  # table | invented
    help: str
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _all_pos(xs):
    return len(xs) > 0 and all(x > 0 for x in xs)


SCHEMA: tuple[Key, ...] = (
    Key("experiment.seed", "int", 1, "invented", "base seed for every random stream", _nonneg, ">= 0"),
    Key("experiment.trials", "int", 200, "invented", "independent runs per sweep point", _pos, "> 0"),
    Key("experiment.mode", "str", "compare", "invented", "analysis | simulation | compare",
        lambda m: m in _MODES, "one of " + ", ".join(_MODES)),
    Key("experiment.workers", "int", 1, "invented", "worker processes for trials", _pos, "> 0"),
    Key("experiment.speeds_kmh", "floats", (3.0, 10.0, 30.0, 45.0, 60.0), "table",
        "MUE speeds swept in fig4", _all_pos, "non-empty, all > 0"),
    Key("topology.num_sbs", "int", 50, "table", "number of SBSs", _pos, "> 0"),
    Key("topology.area_radius", "float", 500.0, "table", "radius of the deployment disk, m", _pos, "> 0"),
    Key("topology.min_intercell_distance", "float", 30.0, "table", "minimum SBS spacing, m",
        _nonneg, ">= 0"),
    Key("beam.count", "int", 3, "table", "mmW beams per SBS", _pos, "> 0"),
    Key("beam.width_deg", "float", 10.0, "table", "beam width, degrees",
        lambda x: 0 < x < 360, "in (0, 360)"),
    Key("mmw.carrier_frequency_ghz", "float", 73.0, "table", "mmW carrier, GHz", _pos, "> 0"),
    Key("mmw.tx_power_dbm", "float", 30.0, "table", "SBS mmW transmit power, dBm"),
    Key("mmw.bandwidth_ghz", "float", 5.0, "table", "mmW bandwidth, GHz", _pos, "> 0"),
    Key("mmw.noise_psd_dbm_hz", "float", -174.0, "table", "noise power spectral density, dBm/Hz"),
    Key("mmw.reference_distance", "float", 1.0, "table", "path-loss reference distance, m", _pos, "> 0"),
    Key("mmw.los_exponent", "float", 2.0, "table", "LoS path-loss exponent", _pos, "> 0"),
    Key("mmw.nlos_exponent", "float", 3.5, "table", "NLoS path-loss exponent", _pos, "> 0"),
    Key("mmw.los_shadowing_db", "float", 0.0, "invented", "LoS shadowing std, dB", _nonneg, ">= 0"),
    Key("mmw.nlos_shadowing_db", "float", 0.0, "invented", "NLoS shadowing std, dB", _nonneg, ">= 0"),
    Key("mmw.los_probability", "float", 1.0, "invented", "chance a simulated mmW link is LoS",
        lambda p: 0 <= p <= 1, "in [0, 1]"),
    Key("mmw.interference", "bool", False, "invented", "add random-gain mmW interference in simulation"),
    Key("antenna.main_lobe_gain_db", "float", 18.0, "table", "main-lobe gain, dB"),
    Key("antenna.side_lobe_gain_db", "float", -2.0, "table", "side-lobe gain, dB"),
    Key("antenna.main_lobe_width_deg", "float", 10.0, "table", "main-lobe width, degrees",
        lambda x: 0 < x < 360, "in (0, 360)"),
    Key("microwave.carrier_frequency_ghz", "float", 2.0, "invented", "microwave carrier, GHz", _pos, "> 0"),
    Key("microwave.tx_power_dbm", "float", 10.0, "invented", "SBS microwave transmit power, dBm"),
    Key("microwave.bandwidth_mhz", "float", 20.0, "invented", "microwave bandwidth, MHz", _pos, "> 0"),
    Key("microwave.exponent", "float", 3.5, "invented", "microwave path-loss exponent", _pos, "> 0"),
    Key("microwave.shadowing_db", "float", 4.0, "invented", "microwave shadowing std per RSS sample, dB",
        _nonneg, ">= 0"),
    Key("traffic.segment_size_mbit", "float", 1.0, "table", "video segment size, Mbit", _pos, "> 0"),
    Key("traffic.play_rate", "float", 1000.0, "table", "segments played per second", _pos, "> 0"),
    Key("traffic.cache_capacity_gbit", "float", 20.0, "invented", "MUE cache size, Gbit", _pos, "> 0"),
    Key("ho.search_period", "float", 0.2, "invented", "cell-search period T_s, s", _pos, "> 0"),
    Key("ho.ttt", "float", 0.16, "invented", "time-to-trigger, s", _pos, "> 0"),
    Key("ho.hysteresis_db", "float", 3.0, "invented", "A3 hysteresis, dB", _nonneg, ">= 0"),
    Key("ho.filter_window", "float", 0.2, "invented", "RSS moving-average window, s", _pos, "> 0"),
    Key("ho.measurement_period", "float", 0.04, "invented", "RSS sampling period, s", _pos, "> 0"),
    Key("ho.execution_delay", "float", 0.05, "invented", "HO execution time, s", _nonneg, ">= 0"),
    Key("ho.mts", "float", 1.0, "table", "minimum time-of-stay, s", _pos, "> 0"),
    Key("ho.rss_threshold_dbm", "float", -80.0, "table", "serving RSS threshold, dBm"),
    Key("ho.stay_clock", "str", "handover", "invented", "time-of-stay starts at: handover | entry",
        lambda s: s in ("handover", "entry"), "handover or entry"),
    Key("sim.num_mues", "int", 10, "invented", "MUEs per run", _pos, "> 0"),
    Key("sim.duration", "float", 60.0, "invented", "simulated time per run, s", _nonneg, ">= 0"),
    Key("sim.dt", "float", 0.01, "invented", "time step, s", _pos, "> 0"),
    Key("sim.cache_source", "str", "any", "invented", "beams that fill the cache: any | serving",
        lambda s: s in ("any", "serving"), "any or serving"),
    Key("fig3.distances", "floats", (5.0, 10.0, 20.0), "invented", "initial distances, m",
        _all_pos, "non-empty, all > 0"),
    Key("fig3.speed_kmh", "float", 60.0, "table", "MUE speed, km/h", _pos, "> 0"),
    Key("fig3.samples", "int", 1_000_000, "invented", "Monte Carlo headings per distance", _pos, "> 0"),
    Key("fig3.grid_points", "int", 40, "invented", "t0 grid size per distance", lambda n: n >= 2, ">= 2"),
    Key("fig5.distances", "floats", (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0), "invented",
        "initial distances, m", _all_pos, "non-empty, all > 0"),
    Key("fig5.theta_u_deg", "floats", (30.0, 60.0, 90.0, 120.0, 150.0), "invented",
        "headings, degrees", lambda xs: len(xs) > 0, "non-empty"),
    Key("fig5.speed_kmh", "float", 60.0, "table", "MUE speed, km/h", _pos, "> 0"),
    Key("fig5.path_steps", "int", 20_000, "invented", "steps along the path in simulated rates",
        lambda n: n >= 10, ">= 10"),
)

_BY_NAME = {k.name: k for k in SCHEMA}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(repr=False)
    explicit: frozenset = frozenset()

    def __getitem__(self, name):
        return self.values[name]

    @property
    def seed(self) -> int:
        return self.values["experiment.seed"]

    @property
    def trials(self) -> int:
        return self.values["experiment.trials"]

    @property
    def mode(self) -> str:
        return self.values["experiment.mode"]

    @property
    def workers(self) -> int:
        return self.values["experiment.workers"]

    @property
    def speeds(self) -> tuple:
        """Swept speeds in m/s."""
        return tuple(v / 3.6 for v in self.values["experiment.speeds_kmh"])

    def replace(self, **overrides) -> "ExperimentConfig":
        """Copy with dotted-key overrides given as ``experiment__seed=3`` style kwargs."""
        vals = dict(self.values)
        explicit = set(self.explicit)
        for k, v in overrides.items():
            name = k.replace("__", ".")
            if name not in _BY_NAME:
                raise ConfigError(_unknown(name))
            vals[name] = _coerce(_BY_NAME[name], v)
            explicit.add(name)
        return _build(vals, frozenset(explicit))

    @property
    def path_loss(self) -> dict:
        v = self.values
        f = v["mmw.carrier_frequency_ghz"] * 1e9
        r0 = v["mmw.reference_distance"]
        return {
            "los": PathLossParams(f, r0, v["mmw.los_exponent"], v["mmw.los_shadowing_db"], Band.MMW_LOS),
            "nlos": PathLossParams(f, r0, v["mmw.nlos_exponent"], v["mmw.nlos_shadowing_db"],
                                   Band.MMW_NLOS),
            "uw": PathLossParams(v["microwave.carrier_frequency_ghz"] * 1e9, 1.0,
                                 v["microwave.exponent"], v["microwave.shadowing_db"], Band.MICROWAVE),
        }

    @property
    def antenna(self) -> AntennaPattern:
        v = self.values
        return AntennaPattern(v["antenna.main_lobe_gain_db"], v["antenna.side_lobe_gain_db"],
                              math.radians(v["antenna.main_lobe_width_deg"]))

    @property
    def traffic(self) -> TrafficModel:
        v = self.values
        return TrafficModel(v["traffic.segment_size_mbit"] * 1e6, v["traffic.play_rate"],
                            v["traffic.cache_capacity_gbit"] * 1e9)

    def sim_config(self, speed: float | None = None) -> SimConfig:
        v = self.values
        pl = self.path_loss
        ho = HoParams(v["ho.search_period"], v["ho.ttt"], v["ho.hysteresis_db"], v["ho.filter_window"],
                      v["ho.mts"], v["ho.rss_threshold_dbm"], v["ho.execution_delay"],
                      v["ho.measurement_period"], v["ho.stay_clock"])
        return SimConfig(
            num_sbs=v["topology.num_sbs"], area_radius=v["topology.area_radius"],
            min_intercell_distance=v["topology.min_intercell_distance"],
            n_beams=v["beam.count"], beam_width=math.radians(v["beam.width_deg"]),
            num_mues=v["sim.num_mues"], duration=v["sim.duration"], dt=v["sim.dt"],
            speed=self.speeds[-1] if speed is None else speed,
            uw_channel=pl["uw"], uw_tx_power=v["microwave.tx_power_dbm"],
            uw_bandwidth=v["microwave.bandwidth_mhz"] * 1e6,
            mmw_los=pl["los"], mmw_nlos=pl["nlos"], mmw_tx_power=v["mmw.tx_power_dbm"],
            mmw_bandwidth=v["mmw.bandwidth_ghz"] * 1e9, noise_psd=v["mmw.noise_psd_dbm_hz"],
            antenna=self.antenna, los_probability=v["mmw.los_probability"],
            interference=v["mmw.interference"], cache_source=v["sim.cache_source"],
            traffic=self.traffic, ho=ho,
        )

    def digest(self) -> str:
        """Short hash of every resolved value, stable across runs."""
        text = "\n".join(f"{k}={_format(self.values[k])}" for k in sorted(self.values))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _unknown(name: str) -> str:
    close = difflib.get_close_matches(name, list(_BY_NAME), n=1, cutoff=0.6)
    hint = f" (did you mean '{close[0]}'?)" if close else ""
    return f"unknown key '{name}'{hint}"


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def _parse_scalar(text: str):
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_value(text: str):
    if text.startswith("["):
        if not text.endswith("]"):
            raise ValueError("list is missing its closing ']'")
        body = text[1:-1].strip()
        return [] if not body else [_parse_scalar(p.strip()) for p in body.split(",")]
    return _parse_scalar(text)


def _coerce(key: Key, raw):
    if key.kind == "bool":
        if isinstance(raw, bool):
            return raw
        raise ValueError("expected true or false")
    if key.kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw != int(raw):
            raise ValueError("expected an integer")
        return int(raw)
    if key.kind == "float":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ValueError("expected a number")
        if not math.isfinite(raw):
            raise ValueError("expected a finite number")
        return float(raw)
    if key.kind == "floats":
        items = raw if isinstance(raw, (list, tuple)) else [raw]
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in items):
            raise ValueError("expected a list of numbers")
        return tuple(float(x) for x in items)
    if not isinstance(raw, str):
        raise ValueError("expected a string")
    return raw


def parse_config_text(text: str) -> tuple[dict, list[str]]:
    """Raw ``{key: value}`` pairs and a list of syntax problems."""
    entries: dict = {}
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line)
        if not body:
            continue
        if "=" not in body:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        name, value = (s.strip() for s in body.split("=", 1))
        if not _KEY.match(name):
            problems.append(f"line {lineno}: malformed key '{name}'")
            continue
        if name in entries:
            problems.append(f"line {lineno}: duplicate key '{name}'")
            continue
        if not value:
            problems.append(f"line {lineno}: missing value for '{name}'")
            continue
        try:
            entries[name] = (lineno, _parse_value(value))
        except ValueError as exc:
            problems.append(f"line {lineno}: {name}: {exc}")
    return entries, problems


def _build(values: dict, explicit: frozenset) -> ExperimentConfig:
    problems = []
    for key in SCHEMA:
        val = values[key.name]
        if key.check is not None and not key.check(val):
            problems.append(f"{key.name} = {_format(val)}: must be {key.rule}")
    if values["antenna.main_lobe_gain_db"] < values["antenna.side_lobe_gain_db"]:
        problems.append("antenna.main_lobe_gain_db must be at least antenna.side_lobe_gain_db")
    if values["beam.count"] * values["beam.width_deg"] > 360 + 1e-9:
        problems.append("beam.count * beam.width_deg must not exceed 360")
    width = values["beam.width_deg"]
    if any(not width < t < 180 for t in values["fig5.theta_u_deg"]):
        problems.append(f"fig5.theta_u_deg values must lie in ({width:g}, 180) to cross the beam")
    cfg = ExperimentConfig(values, explicit)
    if not problems:
        try:
            cfg.sim_config()
            cfg.traffic
        except (ConfigError, ValueError) as exc:
            problems.extend(getattr(exc, "problems", [str(exc)]))
    if problems:
        raise ConfigError(problems)
    return cfg


def validate_config(text: str = "") -> ExperimentConfig:
    """Parse and check a config; raises :class:`ConfigError` listing every problem."""
    entries, problems = parse_config_text(text)
    values = {k.name: k.default for k in SCHEMA}
    for name, (lineno, raw) in entries.items():
        key = _BY_NAME.get(name)
        if key is None:
            problems.append(f"line {lineno}: {_unknown(name)}")
            continue
        try:
            values[name] = _coerce(key, raw)
        except ValueError as exc:
            problems.append(f"line {lineno}: {name}: {exc}")
    try:
        cfg = _build(values, frozenset(entries))
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path=None) -> ExperimentConfig:
    if path is None:
        return validate_config("")
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read())


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "[" + ", ".join(_format(v) for v in value) + "]"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    return str(value)


def echo_config(cfg: ExperimentConfig) -> str:
    """Every resolved value, one per line, labelled with where it came from."""
    lines = []
    for key in SCHEMA:
        if key.name in cfg.explicit:
            origin = "set"
        elif key.source == "invented":
            origin = "invented default"
        else:
            origin = "reference default"
        lines.append(f"{key.name} = {_format(cfg[key.name])}  # {origin}: {key.help}")
    return "\n".join(lines)
