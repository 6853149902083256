"""Smoke test for the btcycles extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

from fractions import Fraction

import btcycles as bt


def main():
    # ordinary-point example: e_p = beta when alpha = 0 and chi1 = -1
    for p in (3, 5):
        for beta in (2, 4):
            inv = bt.Invariants(p, 0, beta, -1, 1)
            assert bt.e_p(inv) == beta
            assert bt.e_p_breakdown(inv)["total"] == beta

    inv = bt.Invariants.of_form(3, 3, 0, 6)
    assert (inv.alpha, inv.beta) == (1, 1)
    assert inv.is_realizable()
    assert bt.e_p(inv) == 1

    try:
        bt.e_p(bt.Invariants(3, 1, 1, 1, 1))
    except ValueError:
        pass
    else:
        raise AssertionError("obstructed tuple accepted")

    q = bt.Invariants.of_form(3, 1, 0, 3, convention="Q")
    assert bt.density("Sprime", q) == 8
    assert bt.density("Sprime", q, method="count") == 8
    assert bt.density("S", bt.Invariants(3, 0, 0, -1, -1, convention="Q")) == Fraction(8, 9)

    j, jp = bt.realize(bt.Invariants(5, 2, 3, 1, -1))
    assert j.alpha == 2 and jp.alpha == 3
    assert j.tube_dot(1).startswith("graph tube {")

    rec = bt.reconcile(3, 4)
    assert Fraction(rec["solved"]["u"]) == Fraction(-1, 4)
    assert rec["reconciled_holds"]

    report = bt.verify("triangle", primes=[3], bound=3)
    assert report["passed"], report["summary"]

    print("btcycles smoke test ok")


if __name__ == "__main__":
    main()
