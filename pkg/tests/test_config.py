import json
import math

import pytest

from weakseq.config import from_dict, load_config, preset_path
from weakseq.errors import ConfigurationError
from weakseq.targets import GaussianQuadrature, QuantumSpins, RandomPhaseAC


def base(**target):
    t = {"kind": "quantum_spins", "nu0_hz": 2.6795e6, "a_perp_hz": 6e4}
    t.update(target)
    return {"target": t, "shot": {"theta_deg": 54.7, "tau_s": 1e-6, "t_c_s": 1.5e-5,
                                  "n_shots": 10}}


def test_units_converted_at_the_boundary():
    cfg = from_dict(base(gamma_per_s=100.0))
    assert isinstance(cfg.target, QuantumSpins)
    assert cfg.target.nu0 == pytest.approx(2 * math.pi * 2.6795e6)
    assert cfg.target.a_perp == pytest.approx(2 * math.pi * 6e4)
    assert cfg.target.gamma == 100.0
    assert cfg.shot.theta == pytest.approx(math.radians(54.7))
    assert cfg.seed == 0 and cfg.workers == 1 and cfg.back_action is True


def test_a_x_sets_a_perp():
    doc = base()
    del doc["target"]["a_perp_hz"]
    doc["target"]["a_x_hz"] = 1e5
    assert from_dict(doc).target.a_perp == pytest.approx(2 * math.pi * 2e5 / math.pi)


@pytest.mark.parametrize("name, cls", [("gaussian", GaussianQuadrature), ("ac", RandomPhaseAC),
                                       ("spin1", QuantumSpins), ("spinN", QuantumSpins)])
def test_presets_load(name, cls):
    cfg = load_config(preset_path(name))
    assert isinstance(cfg.target, cls)
    assert cfg.target.nu0 == pytest.approx(2 * math.pi * 2.6795e6)
    assert math.degrees(cfg.shot.theta) == pytest.approx(54.7356, abs=1e-4)


def test_unknown_preset():
    with pytest.raises(ConfigurationError):
        preset_path("nope")


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d["shot"].update(n_shot=3), "shot.n_shot: unknown key"),
    (lambda d: d.update(extra=1), "extra: unknown key"),
    (lambda d: d["target"].update(kind="laser"), "unknown target kind"),
    (lambda d: d["target"].update(nu0_hz="fast"), "target.nu0_hz: expected a finite number"),
    (lambda d: d["shot"].update(tau_s=-1.0), "shot.tau_s: must be > 0"),
    (lambda d: d["shot"].update(tau_s=1e-4), "need 0 < tau <= t_c"),
    (lambda d: d["target"].update(n_spins=9), "target.n_spins: must be <= 6"),
    (lambda d: d.update(seed=2**64), "seed: must be <="),
    (lambda d: d.update(back_action="yes"), "back_action: expected true/false"),
    (lambda d: d.update(readout={"n_plus": 3}), "readout.n_minus: missing required key"),
    (lambda d: d.pop("shot"), "shot: missing required section"),
])
def test_validation_messages(mutate, fragment):
    doc = base()
    mutate(doc)
    with pytest.raises(ConfigurationError, match=fragment.replace("(", r"\(")):
        from_dict(doc)


def test_diagnostics_carry_line_numbers(tmp_path):
    doc = base()
    doc["analysis"] = {"max_p": 4, "bogus": 1}
    path = tmp_path / "c.json"
    text = json.dumps(doc, indent=2)
    path.write_text(text)
    line = next(i for i, ln in enumerate(text.splitlines(), 1) if '"bogus"' in ln)
    with pytest.raises(ConfigurationError, match=f"line {line}: analysis.bogus: unknown key"):
        load_config(path)
    path.write_text('{\n  "target": {,\n}')
    with pytest.raises(ConfigurationError, match="line 2: invalid JSON"):
        load_config(path)
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_hash_ignores_workers_only():
    cfg = from_dict(base())
    assert cfg.with_overrides(workers=4).config_hash == cfg.config_hash
    assert cfg.with_overrides(seed=9).config_hash != cfg.config_hash
    assert cfg.with_overrides(seed=9).seed == 9
