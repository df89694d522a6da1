"""Flat key=value run configuration with strict validation.

The format is INI-style sections of ``key = value`` pairs, diff-friendly
and hashable for provenance.  Unknown sections or keys are rejected by
name; physical quantities are range-checked here so commands can assume
a valid configuration.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .flow import FLOW_KINDS, FlowConfig
from .groups import GroupSpec
from .wilson import Character

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(Exception):
    pass


_ALLOWED = {
    "sampler": {"kind", "group", "cutoff", "coupling", "seed", "stream",
                "scale_to_h1"},
    "flow": {"kind", "t_end", "dt_initial", "dt_safety", "checkpoints",
             "blowup_threshold", "resolution", "error_tol"},
    "loops": {"file", "steps"},
    "wilson": {"characters", "times"},
    "ensemble": {"cutoffs", "n_samples", "times", "reference_cutoff"},
    "output": {"dir"},
}


@dataclass
class RunConfig:
    path: str = "<memory>"
    sampler_kind: str | None = None
    group: GroupSpec | None = None
    cutoff: int | None = None
    coupling: float = 1.0
    seed: int | None = None
    stream: int = 0
    scale_to_h1: float | None = None
    flow: FlowConfig | None = None
    loops_file: str | None = None
    wilson_steps: int = 128
    characters: tuple = ()
    wilson_times: tuple = ()
    ens_cutoffs: tuple = ()
    ens_n_samples: int | None = None
    ens_times: tuple = ()
    ens_reference_cutoff: int | None = None
    output_dir: str = "out"
    raw: dict = dc_field(default_factory=dict)


def _fail(section, key, msg):
    raise ConfigError(f"[{section}] {key}: {msg}")


def _get_float(section, items, key, default=None, positive=False, unit=False):
    if key not in items:
        if default is None:
            _fail(section, key, "missing required key")
        return default
    try:
        v = float(items[key])
    except ValueError:
        _fail(section, key, f"not a number: {items[key]!r}")
    if positive and v <= 0:
        _fail(section, key, f"must be positive, got {v}")
    if unit and not (0.0 < v < 1.0):
        _fail(section, key, f"must lie in (0, 1), got {v}")
    return v


def _get_int(section, items, key, default=None, minimum=None):
    if key not in items:
        if default is None:
            _fail(section, key, "missing required key")
        return default
    try:
        v = int(items[key])
    except ValueError:
        _fail(section, key, f"not an integer: {items[key]!r}")
    if minimum is not None and v < minimum:
        _fail(section, key, f"must be at least {minimum}, got {v}")
    return v


def _get_floats(section, items, key, default=()):
    if key not in items:
        return tuple(default)
    toks = items[key].replace(",", " ").split()
    try:
        return tuple(float(t) for t in toks)
    except ValueError:
        _fail(section, key, f"expected numbers, got {items[key]!r}")


def _parse_characters(section, value, group: GroupSpec):
    chars = []
    for tok in value.replace(",", " ").split():
        tok = tok.strip()
        if tok in ("fundamental", "conjugate"):
            chars.append(Character(group, tok))
        elif tok.startswith("u1:"):
            try:
                k = int(tok[3:])
            except ValueError:
                _fail(section, "characters", f"bad power in {tok!r}")
            if group.kind != "u1":
                _fail(section, "characters", "u1:k characters need group u1")
            chars.append(Character(group, "u1_power", k))
        else:
            _fail(section, "characters", f"unknown character {tok!r}")
    return tuple(chars)


def parse_config(text: str, path: str = "<memory>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    cfg = RunConfig(path=path)
    for section in parser.sections():
        if section not in _ALLOWED:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _ALLOWED[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
        cfg.raw[section] = dict(parser[section])

    if "sampler" in cfg.raw:
        items = cfg.raw["sampler"]
        kind = items.get("kind", "gff").strip()
        if kind not in ("gff", "u1_coulomb"):
            _fail("sampler", "kind", f"unknown sampler {kind!r}")
        cfg.sampler_kind = kind
        if "group" not in items:
            _fail("sampler", "group", "missing required key")
        try:
            cfg.group = GroupSpec.from_label(items["group"])
        except ValueError as exc:
            _fail("sampler", "group", str(exc))
        if kind == "u1_coulomb" and cfg.group.kind != "u1":
            _fail("sampler", "kind", "u1_coulomb requires group u1")
        cfg.cutoff = _get_int("sampler", items, "cutoff", minimum=1)
        cfg.coupling = _get_float("sampler", items, "coupling", 1.0, positive=True)
        cfg.seed = _get_int("sampler", items, "seed")
        cfg.stream = _get_int("sampler", items, "stream", 0)
        if "scale_to_h1" in items:
            cfg.scale_to_h1 = _get_float("sampler", items, "scale_to_h1",
                                         positive=True)

    if "flow" in cfg.raw:
        items = cfg.raw["flow"]
        kind = items.get("kind", "").strip()
        if kind not in FLOW_KINDS:
            _fail("flow", "kind", f"must be one of {FLOW_KINDS}, got {kind!r}")
        t_end = _get_float("flow", items, "t_end", positive=True)
        checkpoints = _get_floats("flow", items, "checkpoints", (t_end,))
        if any(t <= 0 for t in checkpoints):
            _fail("flow", "checkpoints", "times must be positive")
        resolution = None
        if "resolution" in items:
            resolution = _get_int("flow", items, "resolution", minimum=2)
        try:
            cfg.flow = FlowConfig(
                flow_kind=kind,
                t_end=t_end,
                dt_initial=_get_float("flow", items, "dt_initial", 1e-3,
                                      positive=True),
                checkpoint_times=tuple(sorted(checkpoints)),
                dt_safety=_get_float("flow", items, "dt_safety", 0.5, unit=True),
                blowup_threshold=_get_float("flow", items, "blowup_threshold",
                                            1e6, positive=True),
                resolution=resolution,
                error_tol=_get_float("flow", items, "error_tol", 1e-3,
                                     positive=True),
            )
        except ValueError as exc:
            raise ConfigError(f"[flow]: {exc}") from exc

    if "loops" in cfg.raw:
        items = cfg.raw["loops"]
        cfg.loops_file = items.get("file")
        cfg.wilson_steps = _get_int("loops", items, "steps", 128, minimum=1)

    if "wilson" in cfg.raw:
        items = cfg.raw["wilson"]
        if cfg.group is None:
            raise ConfigError("[wilson] needs a [sampler] section for the group")
        if "characters" in items:
            cfg.characters = _parse_characters("wilson", items["characters"],
                                               cfg.group)
        cfg.wilson_times = _get_floats("wilson", items, "times")
        if any(t <= 0 for t in cfg.wilson_times):
            _fail("wilson", "times", "times must be positive")

    if "ensemble" in cfg.raw:
        items = cfg.raw["ensemble"]
        cutoffs = _get_floats("ensemble", items, "cutoffs")
        if not cutoffs:
            _fail("ensemble", "cutoffs", "missing required key")
        icutoffs = tuple(int(c) for c in cutoffs)
        if any(c != int(c) for c in cutoffs) or any(c < 1 for c in icutoffs):
            _fail("ensemble", "cutoffs", "expected integers >= 1")
        if list(icutoffs) != sorted(set(icutoffs)):
            _fail("ensemble", "cutoffs", "must be strictly increasing")
        cfg.ens_cutoffs = icutoffs
        cfg.ens_n_samples = _get_int("ensemble", items, "n_samples", minimum=2)
        cfg.ens_times = _get_floats("ensemble", items, "times")
        if not cfg.ens_times:
            _fail("ensemble", "times", "missing required key")
        if any(t <= 0 for t in cfg.ens_times):
            _fail("ensemble", "times", "times must be positive")
        if "reference_cutoff" in items:
            cfg.ens_reference_cutoff = _get_int("ensemble", items,
                                                "reference_cutoff", minimum=1)

    if "output" in cfg.raw:
        cfg.output_dir = cfg.raw["output"].get("dir", "out")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), str(path))


def default_characters(group: GroupSpec) -> tuple:
    if group.kind == "u1":
        return (Character(group, "u1_power", 1),
                Character(group, "u1_power", -1),
                Character(group, "u1_power", 2))
    return (Character(group, "fundamental"), Character(group, "conjugate"))
