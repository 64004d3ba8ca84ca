"""Smoke test for the scad_py extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
Then run:                 python python/smoke_test.py
"""

import math
import os
import sys
import tempfile

import scad_py as s

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    m = s.CadMask("11")
    assert m.bits == "11" and m.width == 2 and not m.is_none()
    assert repr(s.CadMask.none(3)) == "CadMask('000')"
    assert s.CadMask("10") < s.CadMask("11")

    scen = s.NoiseScenario([0.1, 0.1], 0.1)
    d = scen.distribution()
    assert close(d.prob("11"), 0.01, 1e-15)
    assert close(s.p_accept(d, m), 0.6724, 1e-12)
    assert close(s.post_cad_error(d, m, 0), 0.01 / 0.6724, 1e-12)
    assert close(s.expected_post_cad_error(d, m, 0), 0.0082 / 0.6724, 1e-12)
    assert close(s.no_cad_rate(d), 1 - 2 * s.binary_entropy(0.1), 1e-12)

    r = s.key_rate(d, m)
    assert r.mask == "11" and r.minimizer is not None
    assert close(r.rate, 0.5 * r.p_accept * (r.entropy_bound - r.leak_ec), 1e-15)
    bound, nu = s.entropy_bound(d, m)
    assert close(bound, r.entropy_bound, 1e-12) and len(nu) == 4

    plain = s.key_rate(d, s.CadMask("00"))
    assert plain.p_accept == 1.0 and plain.minimizer is None

    clean = s.NoiseScenario.homogeneous(3, 0.0).distribution()
    assert s.key_rate(clean, s.CadMask("101")).rate == 0.5
    assert s.best_mask(s.NoiseScenario([0.3, 0.1, 0.1], 0.1).distribution()).mask == "100"

    sim = s.simulate(scen, m, 200_000, seed=3)
    assert sim.blocks_total == 100_000
    assert abs(sim.p_accept_hat - 0.6724) < 4 * math.sqrt(0.6724 * 0.3276 / 1e5)
    assert "ChaCha8" in sim.rng

    lam = [0.8, 0.05, 0.04, 0.01, 0.03, 0.02, 0.04, 0.01]
    h, pa = s.exact_entropy(2, lam, m)
    ad = s.ErrorDistribution(2, [0.85, 0.05, 0.05, 0.05], 0.09)
    assert close(pa, s.p_accept(ad, m), 1e-10)
    assert h >= s.entropy_bound(ad, m)[0] - 1e-9

    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "fig2a.csv")
        rows = s.sweep(os.path.join(ROOT, "specs", "fig2a.toml"), out=out)
        with open(out) as f:
            lines = f.read().splitlines()
        assert lines[0] == "Q,mask,p_accept,entropy_bound,leak_ec,rate_raw,rate_clamped,baseline_rate"
        assert len(lines) == len(rows) + 1
        assert all(row[6] == max(0.0, row[5]) for row in rows)

    for bad in (lambda: s.CadMask("1x"), lambda: s.NoiseScenario([0.6], 0.1),
                lambda: s.simulate(scen, m, 3)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    try:
        s.sweep("/nonexistent/spec.toml")
    except OSError:
        pass
    else:
        raise AssertionError("expected OSError")

    print("scad_py smoke test: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
