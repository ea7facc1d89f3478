"""Smoke test for the binsense extension module.

Build and install first:
    pip install --no-build-isolation ./crates/py
then run `python python/smoke_test.py` or `pytest python/`.
"""

import json
import math

import binsense


def test_peg_girth_and_rho():
    a = binsense.SensingMatrix.peg(200, 400, 7, min_girth=6)
    assert (a.m, a.n, a.d) == (200, 400, 7)
    assert a.girth() == 6
    assert binsense.lemma1_rho(200, 400, 7) == (13, 57)
    assert abs(a.correlated_fraction() - 13 / 57) < 1e-3
    assert abs(a.coherence() - 1 / 7) < 1e-12


def test_fano_dmax():
    assert binsense.dmax(7, 7) == (3, 3)


def test_ric_formulas():
    r = binsense.ric_rip1(4, 7)
    assert r["formula"] == "rip1"
    assert r["delta_k"]["exact"] == [1, 3]
    r3 = binsense.ric_rip3(4, 6, 2, 100)
    assert r3["formula"] == "rip3_low"


def test_gram_and_apply():
    a = binsense.SensingMatrix.random(30, 60, 3, seed=4)
    g = a.gram([0, 1, 2])
    assert all(abs(g[i][i] - 1.0) < 1e-12 for i in range(3))
    x = [0.0] * 60
    x[5] = 2.0
    y = a.apply(x)
    dense = a.to_dense()
    assert all(abs(y[i] - 2.0 * dense[i][5]) < 1e-12 for i in range(30))


def test_recover():
    a = binsense.SensingMatrix.peg(100, 200, 5, min_girth=6)
    x = [0.0] * 200
    for j, v in [(3, 1.0), (40, -2.0), (150, 0.5)]:
        x[j] = v
    y = a.apply(x)
    for alg in ["omp", "iht", "sp", "bp"]:
        out = a.recover(y, 3, alg)
        err = math.sqrt(sum((p - q) ** 2 for p, q in zip(out["x_hat"], x)))
        assert err < 1e-3, (alg, err)


def test_bench_and_replay():
    config = {
        "matrix_source": {"kind": "gaussian", "m": 40, "n": 80},
        "algorithm": {"name": "omp", "stop": {"rule": "sparsity"}},
        "sparsity": {"single": 5},
        "trials": 20,
        "master_seed": 3,
        "noise_sigma": 0.0,
        "success_threshold": 1e-4,
        "signal_normalization": False,
    }
    report = binsense.run_bench(json.dumps(config))
    assert report["rows"][0]["trials"] == 20
    assert binsense.replay(json.dumps(report)) == report


def test_empirical_ric():
    a = binsense.SensingMatrix.peg(60, 120, 4, min_girth=6)
    r = a.empirical_ric(3, samples=50)
    assert r["bound_violations"] == 0
    assert r["delta_hat"] >= 0.0


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name} ok")
