"""Experiment configuration: JSON loading, validation and unit conversion.

Frequencies in a config file are ordinary frequencies in Hz. They are
converted to angular frequencies here and nowhere else. Decay rates
(``gamma_per_s``) are plain rates and are not converted.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from weakseq.errors import ConfigurationError, WeakSeqError
from weakseq.measurement import ReadoutModel, ShotConfig
from weakseq.targets import GaussianQuadrature, QuantumSpins, RandomPhaseAC, TargetModel

TWO_PI = 2.0 * math.pi
U64_MAX = 2**64 - 1

_TARGET_KEYS = {
    "gaussian": {"kind", "nu0_hz", "sigma_q_hz", "gamma_per_s"},
    "ac": {"kind", "nu0_hz", "b0_hz", "gamma_per_s"},
    "quantum_spins": {"kind", "nu0_hz", "n_spins", "a_perp_hz", "a_x_hz", "gamma_per_s",
                      "gamma_extra_per_s"},
}
_SECTIONS = {
    "target": None,
    "shot": {"theta_deg", "tau_s", "t_c_s", "n_shots", "t0_s"},
    "readout": {"n_plus", "n_minus"},
    "analysis": {"max_p", "max_q", "zero_pad_factor", "block", "n_boot"},
    "n_trajectories": None,
    "back_action": None,
    "seed": None,
    "workers": None,
}


@dataclass
class AnalysisSettings:
    max_p: int = 24
    max_q: int = 24
    zero_pad_factor: int = 4
    block: int | None = None
    n_boot: int = 200


@dataclass
class ExperimentConfig:
    target: TargetModel
    shot: ShotConfig
    n_trajectories: int = 1
    readout: ReadoutModel | None = None
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    back_action: bool = True
    seed: int = 0
    workers: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    def with_overrides(self, seed: int | None = None, workers: int | None = None):
        raw = json.loads(json.dumps(self.raw))
        if seed is not None:
            raw["seed"] = seed
        if workers is not None:
            raw["workers"] = workers
        return from_dict(raw)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical config, excluding ``workers`` (it never changes results)."""
        doc = {k: v for k, v in self.raw.items() if k != "workers"}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _line_of(text: str | None, path: tuple) -> str:
    """Best-effort ``line N`` for the last key of ``path`` in the source text."""
    if not text:
        return ""
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            return ""
        pos = m.start()
    return f"line {text.count(chr(10), 0, pos) + 1}: "


class _Located(ConfigurationError):
    """A diagnostic already pinned to a key."""


class _Reader:
    def __init__(self, doc: dict, text: str | None):
        self.doc, self.text = doc, text

    def fail(self, path: tuple, msg: str):
        raise _Located(f"{_line_of(self.text, path)}{'.'.join(path)}: {msg}")

    def section(self, path: tuple, obj, allowed: set):
        if not isinstance(obj, dict):
            self.fail(path, "expected an object")
        for k in obj:
            if k not in allowed:
                self.fail(path + (k,), "unknown key")
        return obj

    def num(self, path, obj, key, *, default=None, positive=False, nonneg=False):
        if key not in obj:
            if default is None:
                self.fail(path + (key,), "missing required key")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(path + (key,), f"expected a finite number, got {v!r}")
        if positive and not v > 0:
            self.fail(path + (key,), f"must be > 0, got {v!r}")
        if nonneg and v < 0:
            self.fail(path + (key,), f"must be >= 0, got {v!r}")
        return float(v)

    def integer(self, path, obj, key, *, default=None, lo=None, hi=None):
        if key not in obj:
            if default is None:
                self.fail(path + (key,), "missing required key")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(path + (key,), f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            self.fail(path + (key,), f"must be >= {lo}, got {v}")
        if hi is not None and v > hi:
            self.fail(path + (key,), f"must be <= {hi}, got {v}")
        return v


def _target(rd: _Reader, obj) -> TargetModel:
    path = ("target",)
    if not isinstance(obj, dict) or "kind" not in obj:
        rd.fail(path, "expected an object with a 'kind' key")
    kind = obj["kind"]
    if kind not in _TARGET_KEYS:
        rd.fail(path + ("kind",), f"unknown target kind {kind!r} (choose from {sorted(_TARGET_KEYS)})")
    rd.section(path, obj, _TARGET_KEYS[kind])
    nu0 = TWO_PI * rd.num(path, obj, "nu0_hz", positive=True)
    gamma = rd.num(path, obj, "gamma_per_s", default=0.0, nonneg=True)
    try:
        if kind == "gaussian":
            return GaussianQuadrature(nu0, TWO_PI * rd.num(path, obj, "sigma_q_hz", positive=True), gamma)
        if kind == "ac":
            return RandomPhaseAC(nu0, TWO_PI * rd.num(path, obj, "b0_hz", positive=True), gamma)
        a_perp = obj.get("a_perp_hz")
        a_x = obj.get("a_x_hz")
        if a_perp is None and a_x is None:
            rd.fail(path + ("a_perp_hz",), "one of a_perp_hz or a_x_hz is required")
        if a_perp is not None:
            a_perp = TWO_PI * rd.num(path, obj, "a_perp_hz", nonneg=True)
        if a_x is not None:
            a_x = TWO_PI * rd.num(path, obj, "a_x_hz", nonneg=True)
        return QuantumSpins(nu0, rd.integer(path, obj, "n_spins", default=1, lo=1, hi=6),
                            a_perp=a_perp, a_x=a_x, gamma=gamma,
                            gamma_extra=rd.num(path, obj, "gamma_extra_per_s", default=0.0, nonneg=True))
    except _Located:
        raise
    except ConfigurationError as exc:
        rd.fail(path, str(exc))


def from_dict(doc: dict, text: str | None = None) -> ExperimentConfig:
    """Validate a parsed config document. ``text`` (the source) sharpens diagnostics."""
    rd = _Reader(doc, text)
    rd.section((), doc, set(_SECTIONS))
    if "target" not in doc or "shot" not in doc:
        rd.fail(("target" if "target" not in doc else "shot",), "missing required section")
    target = _target(rd, doc["target"])

    sp = ("shot",)
    sh = rd.section(sp, doc["shot"], _SECTIONS["shot"])
    try:
        shot = ShotConfig(
            theta=math.radians(rd.num(sp, sh, "theta_deg")),
            tau=rd.num(sp, sh, "tau_s", positive=True),
            t_c=rd.num(sp, sh, "t_c_s", positive=True),
            n_shots=rd.integer(sp, sh, "n_shots", default=1, lo=1),
            t0=rd.num(sp, sh, "t0_s", default=0.0),
        )
    except _Located:
        raise
    except ConfigurationError as exc:
        rd.fail(sp, str(exc))

    readout = None
    if "readout" in doc:
        rp = ("readout",)
        ro = rd.section(rp, doc["readout"], _SECTIONS["readout"])
        readout = ReadoutModel(rd.num(rp, ro, "n_plus", nonneg=True),
                               rd.num(rp, ro, "n_minus", nonneg=True))

    ap = ("analysis",)
    an = rd.section(ap, doc.get("analysis", {}), _SECTIONS["analysis"])
    analysis = AnalysisSettings(
        max_p=rd.integer(ap, an, "max_p", default=24, lo=1),
        max_q=rd.integer(ap, an, "max_q", default=24, lo=1),
        zero_pad_factor=rd.integer(ap, an, "zero_pad_factor", default=4, lo=1),
        block=rd.integer(ap, an, "block", default=0, lo=0) or None,
        n_boot=rd.integer(ap, an, "n_boot", default=200, lo=0),
    )
    back_action = doc.get("back_action", True)
    if not isinstance(back_action, bool):
        rd.fail(("back_action",), f"expected true/false, got {back_action!r}")
    return ExperimentConfig(
        target=target,
        shot=shot,
        n_trajectories=rd.integer((), doc, "n_trajectories", default=1, lo=1),
        readout=readout,
        analysis=analysis,
        back_action=back_action,
        seed=rd.integer((), doc, "seed", default=0, lo=0, hi=U64_MAX),
        workers=rd.integer((), doc, "workers", default=1, lo=1),
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    try:
        return from_dict(doc, text)
    except ConfigurationError:
        raise
    except WeakSeqError as exc:
        raise ConfigurationError(str(exc)) from exc


def preset_path(name: str) -> Path:
    """Location of a shipped preset (``gaussian``, ``ac``, ``spin1``, ``spinN``)."""
    p = Path(__file__).with_name("presets") / f"preset_{name}.json"
    if not p.exists():
        raise ConfigurationError(f"no preset named {name!r}")
    return p
