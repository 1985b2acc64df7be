"""Scenario files: ``key = value`` lines grouped into INI-style sections.

::

    [sweep]
    protocols = pbft, spbft
    n_min = 4
    n_max = 100
    n_step = 3
    message_bits = 8192
    tx_rate_bps = 100000
    pt_dbm = 30
    trials = 100000
    seed = 42

    [scenario high]
    p_s = 0.9
    p_e = 0.99

Either ``t1``/``t2`` (seconds) or ``message_bits``/``tx_rate_bps`` set the
per-message delays. ``nodes = 4, 7, 10`` replaces the n range. Without any
``[scenario ...]`` section the two reference scenarios are used. Unknown
sections and keys are rejected.
"""

from __future__ import annotations

import configparser
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .energy import stage_delays
from .montecarlo import REPLY_LINKS, SEMANTICS
from .protocol import Protocol, ProtocolConfig
from .security import EXACTLY_ONE, RESCUE_READINGS
from .units import dbm_to_watts

DEFAULT_SCENARIOS = (("high", 0.9, 0.99), ("low", 0.8, 0.9))
DEFAULT_MESSAGE_BITS = 8192
DEFAULT_TX_RATE_BPS = 100_000
DEFAULT_PT_DBM = 30.0

_SWEEP_KEYS = {
    "protocols", "nodes", "n_min", "n_max", "n_step", "t1", "t2", "message_bits",
    "tx_rate_bps", "pt_dbm", "trials", "seed", "workers", "semantics", "rescue",
    "reply_links", "out", "gnuplot",
}
_SCENARIO_KEYS = {"p_s", "p_e"}


class ScenarioError(ValueError):
    """A scenario file that cannot be turned into a configuration grid."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None, key: str | None = None):
        where = ":".join(str(x) for x in (path, line) if x is not None)
        detail = f" [{key}]" if key else ""
        super().__init__(f"{where}{': ' if where else ''}{message}{detail}")
        self.path, self.line, self.key = path, line, key


@dataclass(frozen=True)
class Scenario:
    name: str
    p_s: float
    p_e: float


@dataclass(frozen=True)
class ScenarioFile:
    protocols: tuple[Protocol, ...] = (Protocol.PBFT, Protocol.SPBFT)
    nodes: tuple[int, ...] = tuple(range(4, 101, 3))
    scenarios: tuple[Scenario, ...] = tuple(Scenario(*s) for s in DEFAULT_SCENARIOS)
    t1: float = DEFAULT_MESSAGE_BITS / DEFAULT_TX_RATE_BPS
    t2: float = DEFAULT_MESSAGE_BITS / DEFAULT_TX_RATE_BPS
    pt_dbm: float = DEFAULT_PT_DBM
    trials: int = 100_000
    seed: int = 42
    workers: int = 1
    semantics: str = "analytic"
    rescue: str = EXACTLY_ONE
    reply_links: str = "enhanced"
    out: str | None = None
    gnuplot: str | None = None
    source: str | None = field(default=None, compare=False)

    @property
    def p_t(self) -> float:
        return dbm_to_watts(self.pt_dbm)

    def grid(self):
        """Yield (n, scenario, protocol, config) in output order; skips n that is not 3f+1."""
        for n in self.nodes:
            if n < 4 or (n - 1) % 3:
                warnings.warn(f"skipping n={n}: not of the form 3f+1", stacklevel=2)
                continue
            for sc in self.scenarios:
                config = ProtocolConfig(n, sc.p_s, sc.p_e, self.t1, self.t2, self.p_t)
                for protocol in self.protocols:
                    yield n, sc, protocol, config


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return lineno
            continue
        if current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key:
                return lineno
    return None


def parse_scenario(text: str, path: str | None = None) -> ScenarioFile:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__defaults__"
    )
    try:
        parser.read_string(text, source=path or "<scenario>")
    except configparser.Error as exc:
        raise ScenarioError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from None

    def err(message: str, section: str, key: str | None = None) -> ScenarioError:
        return ScenarioError(message, path, _line_of(text, section, key), key)

    def get(section: str, key: str, convert, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return convert(raw)
        except (TypeError, ValueError) as exc:
            raise err(f"bad value {raw!r} for {key}: {exc}", section, key) from None

    values: dict = {}
    scenarios = []
    for section in parser.sections():
        if section == "sweep":
            allowed = _SWEEP_KEYS
        elif section.startswith("scenario"):
            allowed = _SCENARIO_KEYS
        else:
            raise err(f"unknown section [{section}]", section)
        for key in parser[section]:
            if key not in allowed:
                raise err(f"unknown key {key!r} in [{section}]", section, key)
        if section.startswith("scenario"):
            name = section[len("scenario"):].strip() or f"scenario{len(scenarios) + 1}"
            for key in _SCENARIO_KEYS:
                if not parser.has_option(section, key):
                    raise err(f"missing {key} in [{section}]", section)
            sc = Scenario(name, get(section, "p_s", float, None), get(section, "p_e", float, None))
            for key in ("p_s", "p_e"):
                if not 0.0 <= getattr(sc, key) <= 1.0:
                    raise err(f"{key} must lie in [0, 1]", section, key)
            if sc.p_s > sc.p_e:
                raise err("p_s must not exceed p_e", section, "p_s")
            scenarios.append(sc)

    s = "sweep"
    if parser.has_section(s):
        ints = lambda raw: tuple(int(x) for x in raw.replace(",", " ").split())  # noqa: E731
        protocols = get(s, "protocols", lambda raw: tuple(Protocol(x.strip().lower()) for x in raw.split(",")), None)
        if protocols is not None:
            values["protocols"] = protocols
        nodes = get(s, "nodes", ints, None)
        if nodes is None:
            n_min = get(s, "n_min", int, 4)
            n_max = get(s, "n_max", int, 100)
            n_step = get(s, "n_step", int, 3)
            if n_step < 1:
                raise err("n_step must be >= 1", s, "n_step")
            nodes = tuple(range(n_min, n_max + 1, n_step))
        values["nodes"] = nodes

        has_t = parser.has_option(s, "t1") or parser.has_option(s, "t2")
        has_rate = parser.has_option(s, "message_bits") or parser.has_option(s, "tx_rate_bps")
        if has_t and has_rate:
            raise err("give either t1/t2 or message_bits/tx_rate_bps, not both", s, "t1")
        if has_t:
            t1 = get(s, "t1", float, None)
            t2 = get(s, "t2", float, t1)
            if t1 is None:
                raise err("t2 given without t1", s, "t2")
        else:
            bits = get(s, "message_bits", int, DEFAULT_MESSAGE_BITS)
            rate = get(s, "tx_rate_bps", float, DEFAULT_TX_RATE_BPS)
            try:
                t1, t2 = stage_delays(bits, rate)
            except ValueError as exc:
                raise err(str(exc), s, "tx_rate_bps") from None
        if not (t1 > 0 and t2 > 0):
            raise err("delays must be positive", s, "t1")
        values.update(t1=t1, t2=t2)

        values["pt_dbm"] = get(s, "pt_dbm", float, DEFAULT_PT_DBM)
        for key in ("trials", "seed", "workers"):
            if parser.has_option(s, key):
                values[key] = get(s, key, int, None)
        if values.get("trials", 0) < 0:
            raise err("trials must be >= 0", s, "trials")
        if values.get("workers", 1) < 1:
            raise err("workers must be >= 1", s, "workers")
        for key, choices in (("semantics", SEMANTICS), ("rescue", RESCUE_READINGS), ("reply_links", REPLY_LINKS)):
            if parser.has_option(s, key):
                value = parser.get(s, key).strip()
                if value not in choices:
                    raise err(f"{key} must be one of {choices}", s, key)
                values[key] = value
        for key in ("out", "gnuplot"):
            if parser.has_option(s, key):
                values[key] = parser.get(s, key).strip()

    if scenarios:
        values["scenarios"] = tuple(scenarios)
    return ScenarioFile(source=path, **values)


def load_scenario(path: str | Path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    return parse_scenario(text, str(path))
