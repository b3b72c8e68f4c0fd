"""Independent reference evaluators used as test oracles.

Nothing here imports the package under test. Worlds are plain dicts:
``parents: {rev: parent}``, ``out: {(rev, test): "pass"|"fail"|"no-build"}``
and ``led: {(rev, test): "pass"|"fail"}`` with absent keys meaning no entry.
"""

from __future__ import annotations


def children(parents, r):
    return sorted(c for c, p in parents.items() if p == r)


def passes(out, r, t):
    return out.get((r, t)) == "pass"


def fails(out, r, t):
    return out.get((r, t)) == "fail"


def weak_hardening(parents, out, led, r, t):
    # passes now, and some next revision exists on which it fails when it should
    return passes(out, r, t) and any(
        fails(out, c, t) and led.get((c, t)) == "fail" for c in children(parents, r)
    )


def strong_hardening(parents, out, led, r, t):
    return weak_hardening(parents, out, led, r, t) and led.get((r, t)) == "pass"


def hardening_kind(parents, out, led, r, t):
    if not weak_hardening(parents, out, led, r, t):
        return "NotHardening"
    if strong_hardening(parents, out, led, r, t):
        return "Strong"
    return "WeakUnknownStrength" if (r, t) not in led else "WeakOnly"


def weak_catching(out, r, t):
    return fails(out, r, t)


def strong_catching(out, led, r, t):
    return fails(out, r, t) and led.get((r, t)) == "fail"


def catching_kind(out, led, r, t):
    if not weak_catching(out, r, t):
        return "NotCatching"
    if strong_catching(out, led, r, t):
        return "Strong"
    return "WeakUnknownStrength" if (r, t) not in led else "WeakOnly"


def regression_kind(parents, out, led, r, t):
    if not weak_hardening(parents, out, led, parents[r], t):
        return "NotCatching"
    return catching_kind(out, led, r, t)


def functionality_kind(parents, out, led, r, t):
    if weak_hardening(parents, out, led, parents[r], t):
        return "NotCatching"
    return catching_kind(out, led, r, t)


def strong_regression_full(parents, out, led, r, t):
    """Catching strongly on r and hardening (weakly) for r's parent."""
    return strong_catching(out, led, r, t) and weak_hardening(parents, out, led, parents[r], t)


def strong_regression_simplified(out, led, parent, r, t):
    return passes(out, parent, t) and fails(out, r, t) and led.get((r, t)) == "fail"


def strong_functionality_expanded(out, led, parent, r, t):
    return (
        out.get((parent, t)) in ("no-build", "fail")
        and fails(out, r, t)
        and led.get((r, t)) == "fail"
    )


REGION = {
    ("WeakOnly", "NotCatching"): "FakeHardening",
    ("Strong", "NotCatching"): "StrongHardeningOnly",
    ("NotHardening", "WeakOnly"): "FakeCatch",
    ("NotHardening", "Strong"): "StrongFunctionalityCatch",
    ("WeakOnly", "WeakOnly"): "WeakHWeakC",
    ("WeakOnly", "Strong"): "WeakHStrongC",
    ("Strong", "WeakOnly"): "StrongHWeakC",
    ("Strong", "Strong"): "StrongRegressionCatch",
    ("NotHardening", "NotCatching"): "Neither",
}


def region(h, c):
    unknown = "WeakUnknownStrength" in (h, c)
    h = "WeakOnly" if h == "WeakUnknownStrength" else h
    c = "WeakOnly" if c == "WeakUnknownStrength" else c
    return REGION[(h, c)], unknown


def perfect_flags(parents, out, led, r, t):
    kids = [c for c in children(parents, r) if (c, t) in out]
    precision = all(led.get((c, t)) == "fail" for c in kids if fails(out, c, t))
    recall = all(fails(out, c, t) for c in kids if led.get((c, t)) == "fail")
    return precision, recall


def r_at_p_bruteforce(events, p, positives):
    """events: (score, is_true_positive) for failure signals only.

    Tries every threshold that is an observed score (plus "report nothing")
    and keeps the best recall among thresholds meeting the precision floor.
    """
    best = 0.0
    for thr in sorted({s for s, _ in events}):
        chosen = [tp for s, tp in events if s >= thr]
        if chosen and sum(chosen) / len(chosen) >= p - 1e-12:
            best = max(best, sum(chosen) / positives)
    return best
