#!/usr/bin/env python3
"""Smoke test for the rattling_lab extension module.

Builds nothing itself: it locates the compiled cdylib under target/ (run
`cargo build -p rattling-py` first, or `--release`), links it under the
importable name, and exercises the main entry points against known values.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    names = ["librattling_lab.so", "rattling_lab.dll", "librattling_lab.dylib"]
    candidates = []
    for profile in ("release", "debug"):
        for name in names:
            p = ROOT / "target" / profile / name
            if p.exists():
                candidates.append(p)
    if not candidates:
        sys.exit("cdylib not found; run `cargo build -p rattling-py` first")
    return max(candidates, key=lambda p: p.stat().st_mtime)


def main() -> None:
    lib = locate_cdylib()
    tmp = Path(tempfile.mkdtemp(prefix="rattling_lab_"))
    shutil.copy(lib, tmp / "rattling_lab.so")
    sys.path.insert(0, str(tmp))
    import rattling_lab as rl

    # kernels
    assert abs(rl.kernel("h", 0.0) - 1.0 / (2.0 * math.sqrt(math.pi))) < 1e-15
    assert rl.kernel("g", 0.0) == -0.5
    assert abs(rl.kernel("h2", 0.0) + 1.0 / (4.0 * math.sqrt(math.pi))) < 1e-15

    # integral identities at a = 1
    ih = rl.integral("H", 1.0)
    ig = rl.integral("G", 1.0)
    if_ = rl.integral("F", 1.0)
    assert abs(ig - (ih - 1.0)) < 1e-9
    assert abs(if_ - ((2.0 + 1.0) * ih - 1.0) / 2.0) < 1e-9
    assert abs(rl.integral("H", 1.0, form="original") - ih) < 1e-10

    # rate equation
    sol = rl.rate(0.5, 2.0)
    assert abs(sol["a"] - 1.3349427634387702) < 1e-8
    assert abs(sol["residual_h"]) < 1e-10

    # Green function, both methods
    g_f = rl.green(3, 10.0)
    g_b = rl.green(3, 10.0, method="bessel")
    assert abs(g_f["ydot"] - rl.ydot_bessel(3, 10.0)) < 1e-10
    assert abs(g_f["y"] - g_b["y"]) < 1e-10

    # simulation against the frozen first switching moments (c=0.5, h1=1.5)
    hist = rl.run_simulation(0.5, 1.5, 4)
    times = [r["t"] for r in hist["records"]]
    frozen = [0.0, 2.2625243629497879, 15.405316034515746,
              35.887331503785186, 65.477934522479918]
    for got, want in zip(times, frozen):
        assert abs(got - want) <= 1e-8 * max(want, 1.0), (got, want)
    assert not hist["warnings"]

    # exact solution surface: u_n(0) = -c n^2
    assert abs(rl.solution_value(0.5, 1.5, 3, 0.0, [0.0]) + 4.5) < 1e-12
    assert abs(rl.gradient_value(0.5, 1.5, 2, 0.0, [0.0]) + 2.5) < 1e-12

    # fixed-point candidate agrees with the simulated q_{n+1}
    hist = rl.run_simulation(0.5, 1.5, 11)
    qs = [r["q"] for r in hist["records"]]
    step = rl.candidate_q(0.5, 1.5, qs[:11], 4.0)
    assert abs(step["q_next"] - qs[11]) < 1e-6 * math.sqrt(11.0)
    assert step["d_next"] > 0.0 and step["j_min"] >= 0.0

    # a sanity slice of the constants table
    table = json.loads(rl.constants_table(0.5, 2.0, n_scan_max=400))
    assert table["e0"] > 0.0 and table["kappa"] > 0.0
    assert table["p"] <= 2.0 / math.e + 1e-9
    assert table["d_p1"] < 0.5

    print("smoke test ok:", lib)


if __name__ == "__main__":
    main()
