"""Named experiment presets (plain dicts, parsed like any config document)."""
from __future__ import annotations

import copy

from .config import ExperimentConfig, config_from_dict
from .errors import ConfigError

_SIGMOID = {"name": "sigmoid", "params": [9.0, 3.5]}


def _exp(name, model, sigma, initial, branch=1, route="pde"):
    return {"name": name,
            "model": dict(model, sigma=sigma),
            "initial": initial,
            "run": {"route": route, "T": 50 * sigma, "dt": sigma / 200, "branch": branch},
            "outputs": {"snapshot_every": 2000}}


def _density(name, *params):
    return {"kind": "density", "name": name, "params": list(params)}


def _build():
    out = {}
    ex1 = (_SIGMOID, 0.5, _density("plateau_exp", 1.0))
    ex2 = (_SIGMOID, 0.5, _density("shifted_exp", 0.5))
    ex4 = ({"name": "double_gaussian", "params": [8.0, 0.1, 8.0, 3.0]}, 0.2,
           _density("cosine_exp", 1.0))
    for base, args, main in (("example1", ex1, 1), ("example2", ex2, 3), ("example4", ex4, 3)):
        for b in (1, 2, 3):
            name = base if b == main else f"{base}_branch{b}"
            out[name] = _exp(name, *args, branch=b)
    out["example3_1"] = _exp("example3_1", {"name": "clamped_linear", "params": [1.6, 0.25, 1.0]},
                             1.0, _density("shifted_exp", 0.0))
    out["example3_2"] = _exp("example3_2", {"name": "rational_shift", "params": [10.0, 0.5]},
                             1.0, _density("shifted_exp", 1.0))

    out["monotone_example1"] = _exp("monotone_example1", _SIGMOID, 0.5,
                                    {"kind": "ramp", "N_start": 0.3}, route="monotone")
    out["monotone_example4"] = _exp("monotone_example4", ex4[0], 0.2,
                                    {"kind": "ramp", "N_start": 1.8}, route="monotone")
    out["inhibitory"] = _exp("inhibitory", {"name": "constant", "params": [1.0]}, 1.0,
                             _density("cosine_exp", 5.0))
    out["weakly_excitatory"] = _exp("weakly_excitatory", {"name": "affine", "params": [1.0, 0.1]},
                                    1.0, _density("cosine_exp", 5.0))
    out["steady_example1"] = _exp("steady_example1", _SIGMOID, 0.5,
                                  {"kind": "steady", "steady_index": 1})

    clamp = {"name": "clamped_linear", "params": [1.6, 0.25, 1.0]}
    p = _exp("periodic_example3_1", clamp, 1.0, _density("shifted_exp", 0.0))
    p["periodic"] = {"kind": "piecewise_constant", "N1": 0.15625, "N2": 0.625}
    out[p["name"]] = p
    p = _exp("periodic_band", clamp, 1.0, _density("shifted_exp", 0.0))
    p["periodic"] = {"kind": "linear_band", "a": 0.15625, "b": 0.625, "C": 1.6,
                     "amplitude": 0.2, "shape": "square"}
    out[p["name"]] = p
    p = _exp("periodic_sigmoid", _SIGMOID, 1.0, _density("shifted_exp", 0.0))
    p["periodic"] = {"kind": "piecewise_constant", "level": 0.9}
    out[p["name"]] = p
    p = _exp("periodic_two_sigma", _SIGMOID, 0.1, _density("shifted_exp", 0.0))
    p["periodic"] = {"kind": "two_sigma", "levels": [0.75, 0.99], "dt": 0.1 / 400}
    out[p["name"]] = p
    return out


PRESETS = _build()


def preset_names() -> list:
    return sorted(PRESETS)


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {preset_names()}")
    return copy.deepcopy(PRESETS[name])


def load_preset(name: str) -> ExperimentConfig:
    return config_from_dict(preset_dict(name))
