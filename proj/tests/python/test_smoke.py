import math

import pytest

import dirand


def test_tsirelson():
    assert dirand.max_bell(dirand.chsh()) == pytest.approx(2 * math.sqrt(2), abs=1e-5)
    assert dirand.min_bell(dirand.chsh(), level=1) == pytest.approx(-2 * math.sqrt(2), abs=1e-5)


def test_guessing_full_on_tsirelson():
    g = dirand.guessing_full(dirand.tsirelson())
    assert 0.0 < g["G"] < 1.0
    assert len(g["canonicalDual"]["c"]) == 2


def test_sampling_and_regularisation():
    p = dirand.device_behaviour(0, 1)
    counts = dirand.sample_counts(p, 20000, seed=3)
    assert counts["n"] == 20000
    reg = dirand.regularise(counts, method="ls")
    flat = [v for a in reg["p"] for b in a for x in b for v in x]
    assert dirand.membership_margin(flat) >= -1e-7
    with pytest.raises(ValueError):
        dirand.regularise(counts, method="nope")


def test_protocol_rederives():
    report = dirand.run_protocol(0, {"nTot": 200000, "seed": 1})
    assert report["bound"] >= 0.0
    again = dirand.rederive(report)
    assert again["bound"] == report["bound"]
    assert report["seeds"]["masterSeed"] == 1
