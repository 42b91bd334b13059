#!/usr/bin/env python3
"""Smoke test for the hasse_py extension module.

Builds nothing itself: expects `cargo build -p hasse-py` to have produced
target/debug/libhasse_py.so (or a release build). Copies the cdylib into a
temp directory under the importable name and exercises the main surface.
"""

import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "debug" / "libhasse_py.so",
        ROOT / "target" / "release" / "libhasse_py.so",
    ]
    src = next((p for p in candidates if p.exists()), None)
    if src is None:
        sys.exit("build the bindings first: cargo build -p hasse-py")
    tmp = Path(tempfile.mkdtemp(prefix="hasse_py_"))
    shutil.copy2(src, tmp / "hasse_py.so")
    sys.path.insert(0, str(tmp))
    import hasse_py

    return hasse_py


def main():
    h = load_module()
    failures = []
    total = 0

    def check(name, cond):
        nonlocal total
        total += 1
        status = "ok" if cond else "FAIL"
        print(f"{name}: {status}")
        if not cond:
            failures.append(name)

    # Exact polynomial arithmetic.
    x = h.Poly.x()
    one = h.Poly("1")
    p = (x + one) * (x - one)
    check("poly product", str(p) == "x^2 - 1")
    check("poly power", str((x + one) ** 2) == "x^2 + 2*x + 1")
    check("poly derivative", str(h.Poly("x^3 - x/2").derivative()) == "3*x^2 - 1/2")
    check("poly degree", p.degree() == 2 and one.degree() == 0)
    check("poly eq", h.Poly("(x + 1)*(x - 1)") == p)

    # Truncated exponential family: D_k(x^m) is binom(m, k) x^(m-k).
    d = h.RingDerivation.exp("1", 3)
    check("exp order", d.order() == 3)
    check("exp eval", d.eval(2, "x^3") == "3*x")
    check("exp gen values", [d.gen_value(k) for k in (1, 2, 3)] == ["1", "0", "0"])
    check("exp validates", d.validate(7))
    check("exp ordinary stages", d.to_ordinary() == ["1", "0", "0"])

    # Rescaling keeps the order and spreads the components out: the new
    # component t is the old component t/s when s divides t, else zero.
    d4 = h.RingDerivation.exp("1", 4).rescaled(2)
    check("rescaled order", d4.order() == 4)
    check("rescaled gen values", [d4.gen_value(k) for k in (1, 2, 3, 4)] == ["0", "1", "0", "0"])

    # Free generator images determine a family even with no single
    # ordinary generator.
    crooked = h.RingDerivation(["x^2", "x^3", "x^4 - x"])
    check("crooked validates", crooked.validate(11))

    # Torsion decomposition of Q[x]/(x^2 (x - 1)) at powers of x.
    m = h.Module(1, [["x^2*(x - 1)"]])
    dec = h.torsion(m, "x")
    check("torsion invariants", dec["torsion_invariants"] == ["x^2"])
    check("torsion dim", dec["torsion_dim"] == 2)
    check("torsion exponents", dec["annihilator_exponents"] == [2])
    check("quotient invariants", dec["quotient_invariants"] == ["x - 1"])
    check("quotient free rank", dec["quotient_free_rank"] == 0)

    # Module family over the exp ring with zero generator images; the
    # localization lift then follows the quotient rule alone:
    # component k of e1/x is (-1)^k e1 / x^(k+1).
    free = h.Module.free(1)
    dm = h.ModuleDerivation(d, free, [[["0"]], [["0"]], [["0"]]])
    check("module family valid", dm.is_valid() and dm.validate(5))
    check("module eval", dm.eval(1, ["x^2"]) == ["2*x"])
    ext = h.extend(dm, "x")
    check("extension validates", ext.validate(13))
    check("lift k=1", ext.lift(1, ["1"], 1) == (["-1"], 2))
    check("lift k=2", ext.lift(2, ["1"], 1) == (["1"], 3))
    check("witness", "x" in ext.witness())

    # Scenario runner round trip.
    scenario = (ROOT / "scenarios" / "ring_conversions.hsw").read_text()
    report, passed = h.run_scenario_text(scenario, seed=11)
    check("scenario passes", passed)
    check("scenario header", report.startswith("hasse-report/1 seed=11"))
    check("scenario summary", "summary: total=6 passed=6 failed=0 errors=0" in report)
    report_json, _ = h.run_scenario_text(scenario, seed=11, format="json")
    check("scenario json", report_json.startswith('{') and '"schema": "hasse-report/1"' in report_json)

    # Error paths surface as ValueError with the diagnostic code.
    try:
        h.Poly("x^")
        check("syntax error raised", False)
    except ValueError as e:
        check("syntax error raised", "E001" in str(e))
    try:
        stuck = h.ModuleDerivation(
            h.RingDerivation.exp("1", 2), h.Module(1, [["x^2"]]), [[["0"]], [["0"]]]
        )
        h.extend(stuck, "x")
        check("prerequisite error raised", False)
    except ValueError as e:
        check("prerequisite error raised", "E013" in str(e))

    if failures:
        sys.exit(f"{len(failures)} of {total} check(s) failed: {', '.join(failures)}")
    print(f"all {total} checks passed")


if __name__ == "__main__":
    main()
