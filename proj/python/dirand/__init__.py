"""Device-independent randomness certification.

Tensors are flat lists of 16 floats indexed 8a + 4b + 2x + y. Structured
results come back as dicts.
"""

import json

from . import _dirand
from ._dirand import (  # noqa: F401
    Error,
    Infeasible,
    InfeasibleValue,
    InvalidArgument,
    SolverFailure,
    bell_value,
    chsh,
    device_behaviour,
    flat_index,
    guessing_bell,
    max_bell,
    membership_margin,
    min_bell,
    signalling_norm,
    tsirelson,
    uniform,
)


def _chi_mask(chi):
    if chi is None or chi == "all":
        return 0xF
    mask = 0
    for x, y in chi:
        mask |= 1 << (2 * x + y)
    return mask


def guessing_full(p, chi=None, level=2):
    return json.loads(_dirand.guessing_full(list(p), _chi_mask(chi), level))


def sample_counts(p, n, seed, pi=(0.25, 0.25, 0.25, 0.25), index=0):
    return json.loads(_dirand.sample_counts(list(p), list(pi), n, seed, index))


def regularise(counts, method="ml", level=2):
    return json.loads(_dirand.regularise(json.dumps(counts), method, level))


def run_protocol(device_index, config=None, trial=0):
    return json.loads(_dirand.run_protocol(device_index, json.dumps(config or {}), trial))


def run_chsh_baseline(device_index, config=None, trial=0):
    return json.loads(_dirand.run_chsh_baseline(device_index, json.dumps(config or {}), trial))


def rederive(report):
    return json.loads(_dirand.rederive(json.dumps(report)))
