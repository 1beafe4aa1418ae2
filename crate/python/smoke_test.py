#!/usr/bin/env python3
"""Smoke test for the cftrace_py extension module.

Build the module first (either profile works):

    cargo build -p cftrace-py            # -> target/debug/libcftrace_py.so
    cargo build -p cftrace-py --release  # -> target/release/libcftrace_py.so

The script copies the freshest build into a temp dir under the importable
name and exercises one call of every exported entry point.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def locate_built_module() -> Path:
    root = Path(__file__).resolve().parents[1]
    candidates = [
        root / "target" / profile / "libcftrace_py.so"
        for profile in ("release", "debug")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("build the extension first: cargo build -p cftrace-py")
    return max(built, key=lambda p: p.stat().st_mtime)


def main() -> None:
    tmp = tempfile.mkdtemp(prefix="cftrace-py-")
    shutil.copy(locate_built_module(), Path(tmp) / "cftrace_py.so")
    sys.path.insert(0, tmp)
    import cftrace_py as cf

    # Blocked splitter chain: survival probability is cos^2N(pi/2N).
    spec = cf.NetworkSpec.zeno(10, 1)
    probs = cf.simulate(spec, cf.Probe.off())
    assert math.isclose(probs["D1"], math.cos(math.pi / 20) ** 20, abs_tol=1e-12)
    assert math.isclose(sum(probs.values()), 1.0, abs_tol=1e-12)

    # Single-particle reference: detection ~ eps^2 / n, shift sum = delta.
    probe = cf.Probe.from_epsilon(0.01)
    std = cf.standard(4, probe)
    assert math.isclose(std.detect_prob, 0.01**2 / 4, rel_tol=0.01)
    assert math.isclose(std.shift_sum, probe.delta, abs_tol=1e-12)

    # Free three-arm network: the channel weak value is exactly +1.
    summary = cf.trace(cf.NetworkSpec.nested3("free"), cf.Probe.from_epsilon(0.1))
    (weak,) = summary.weak_values.values()
    assert abs(weak - 1.0) < 1e-10
    assert summary.detector == "D1"

    # Blocked nested chain: zero trace, counterfactual verdict.
    report = cf.compare(cf.NetworkSpec.salih(8, 16, 1), cf.Probe.from_epsilon(0.001))
    assert report.trace_detect_prob == 0.0
    assert report.verdict == "counterfactual"

    # ... and the free bit of the same network leaves more trace than the
    # reference channel does.
    report = cf.compare(cf.NetworkSpec.salih(8, 16, 0), cf.Probe.from_epsilon(0.001))
    assert report.trace_detect_prob > report.standard_detect
    assert report.verdict == "not_counterfactual"

    # An adversary click never coexists with a detector outcome when every
    # channel path is blocked.
    dist = cf.eve_joint(cf.NetworkSpec.salih(8, 16, 1), gap=1)
    assert all(dist.get((True, d), 0.0) == 0.0 for d in ("D1", "D2", "D3"))
    assert sum(p for (clicked, _), p in dist.items() if clicked) > 0.0

    # Key rounds: reproducible under a fixed seed; a clean channel closes
    # with zero errors; intercepted announced rounds always flip the bit.
    clean = cf.keydist(rounds=2000, seed=5)
    assert clean.errors == 0 and clean.announced > 0
    a = cf.keydist(rounds=2000, seed=5, eve=True)
    b = cf.keydist(rounds=2000, seed=5, eve=True)
    assert (a.announced, a.errors, a.eve_clicks) == (b.announced, b.errors, b.eve_clicks)
    assert a.clicked_announced == a.clicked_announced_errors
    assert a.errors > 0

    # Closed forms and their validity regimes.
    assert math.isclose(
        cf.eval_asymptotic("zeno_bit0_trace", 1, 200, 0.01, 0.0),
        3 * 0.01**2 * 200 / 8,
    )
    assert cf.regime_warning("zeno_bit0_trace", 1, 20) is not None
    assert cf.regime_warning("zeno_bit0_trace", 1, 200) is None
    assert cf.formulas_for("li", 1) == ("li_bit1_trace", "li_bit1_shift")
    assert len(cf.formula_ids()) == 11

    # Trajectory weights: exact for the lossless kind only.
    est = cf.bohm(cf.NetworkSpec.li(32, 32, 0))
    assert est.approximate is False
    assert 0.0 < est.max_path_prob < 1.0
    assert cf.bohm(cf.NetworkSpec.salih(8, 16, 0)).approximate is True

    print("smoke test passed")


if __name__ == "__main__":
    main()
