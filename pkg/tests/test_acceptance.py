"""Acceptance gate: one test per shipped criterion, each printing a
pass/fail line.  Thresholds marked as oracle-derived were frozen from
independent reference computations; runtime ceilings are part of the
criteria."""

import json
import math
import random
import time
from fractions import Fraction

import pytest

from diophlab import cli
from diophlab.certified import RealExpr, RealVector, parse_vector
from diophlab.counting import CountQuery, count_Q
from diophlab.exponents import (
    check_transference,
    estimate_omega_D,
    estimate_omega_S,
    estimate_tau_D,
)
from diophlab.lattice import (
    build_lattice,
    count_lattice_points,
    verify_nalpha_bound,
)
from diophlab.measure_lab import MeasureExperiment, fraction_profile, phi_contrast
from diophlab.psi import PowerPsi, check_u_regular, classify_divergence, parse_psi
from diophlab.ubiquity import mink_cover, select_k

INF = math.inf
SQRT2M1 = parse_vector("sqrt2m1")


def report(criterion, passed, detail=""):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f" — {detail}"
    print(line)
    assert passed, line


def random_coord(rng):
    if rng.random() < 0.5:
        den = rng.randint(2, 200)
        return RealExpr.rational(Fraction(rng.randint(0, den - 1), den))
    c = rng.choice([2, 3, 5, 6, 7, 10])
    b = Fraction(rng.randint(1, 5), rng.randint(1, 5))
    a = Fraction(rng.randint(-3, 3))
    return RealExpr.make(a, b, c)


def test_criterion_01_count_lower_bound_suite():
    """count >= N*delta^ell - 1 on 1000 randomized exact cases, < 60 s."""
    rng = random.Random(20260826)
    start = time.monotonic()
    failures = []
    for i in range(1000):
        ell = rng.choice([1, 2, 3])
        x = RealVector.of(*[random_coord(rng) for _ in range(ell)])
        delta = Fraction(rng.randint(1, 199), 200)
        N = rng.randint(10, 10 ** 4)
        rep = count_Q(CountQuery(x, delta, 0, N))
        if rep.count < N * delta ** ell - 1:
            failures.append((i, str(x), delta, N))
    elapsed = time.monotonic() - start
    report(
        1,
        not failures and elapsed < 60,
        f"0 failures expected, got {len(failures)}; {elapsed:.1f}s (< 60s)",
    )


def dyadic_upper_power(base, expo, bits=64):
    """Smallest dyadic with ~bits precision at or above base**expo."""
    from diophlab.certified import pow_enclosure

    _, hi = pow_enclosure(Fraction(base), Fraction(expo), bits)
    return hi


def test_criterion_02_upper_count_bound():
    """count <= 4^(l+1)*N*delta^l for x = sqrt(2)-1, tau = 3/2, < 120 s.

    delta = N^(-1/tau) is irrational for N = 10^4, 10^5; the check uses the
    certified dyadic upper rounding of it, which keeps the precondition
    delta >= N^(-1/tau) intact.
    """
    start = time.monotonic()
    ok = True
    details = []
    for N in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6):
        delta = dyadic_upper_power(N, Fraction(-2, 3))
        res = verify_nalpha_bound(SQRT2M1, Fraction(3, 2), N, delta)
        ok = ok and bool(res.passed)
        details.append(f"N=10^{round(math.log10(N))}:{res.detail['count']}")
    elapsed = time.monotonic() - start
    report(2, ok and elapsed < 120, f"{' '.join(details)}; {elapsed:.1f}s (< 120s)")


def test_criterion_03_exponent_estimates():
    golden = estimate_tau_D(parse_vector("golden"), 10 ** 5)
    pair = estimate_tau_D(parse_vector("sqrt2m1,-1+1*sqrt(3)"), 10 ** 3)
    half = estimate_tau_D(parse_vector("1/2"), 10 ** 3)
    ok = (
        1.00 <= golden.value <= 1.05
        and 1.9 <= pair.value <= 2.1
        and half.value == INF
        and half.is_exact_resonance
    )
    report(
        3, ok,
        f"golden {golden.value:.4f} in [1.00,1.05]; pair {pair.value:.4f} "
        f"in [1.9,2.1]; (1/2) resonant ({half.value})",
    )


QUADRATIC_POINTS = [
    "sqrt2m1,-1+1*sqrt(3)",
    "-2+1*sqrt(5),sqrt2m1",
    "-1+1*sqrt(2),-2+1*sqrt(6)",
    "golden,-2+1*sqrt(7)",
    "-3+1*sqrt(10),golden",
    "-1+1/2*sqrt(5),-1+1*sqrt(3)",
    "-2+1*sqrt(6),-1+1/2*sqrt(7)",
    "-1+1*sqrt(3),-3+1*sqrt(11)",
    "-3+1*sqrt(13),sqrt2m1",
    "-1+1/3*sqrt(17),golden",
]


def test_criterion_04_transference_suite():
    """Sandwich omega_D/(d^2+(d-1)omega_D) <= omega_S <= omega_D with slack
    0.05 on 100 rational + 10 quadratic points; violations <= 2%."""
    rng = random.Random(42)
    points = []
    for _ in range(100):
        den1, den2 = rng.randint(2, 10 ** 4), rng.randint(2, 10 ** 4)
        points.append(RealVector.of(
            Fraction(rng.randint(1, den1 - 1), den1),
            Fraction(rng.randint(1, den2 - 1), den2),
        ))
    points += [parse_vector(s) for s in QUADRATIC_POINTS]
    violations = []
    for x in points:
        w_d = estimate_omega_D(x, 10 ** 5)
        w_s = estimate_omega_S(x, 10 ** 5)
        res = check_transference(w_d.value, w_s.value, 2, slack=0.05)
        if not res.passed:
            # flagged cases must show estimator non-convergence
            maxima = [b.exponent for b in w_d.blocks]
            still_rising = len(maxima) >= 2 and maxima[-1] > maxima[0]
            violations.append((str(x), still_rising))
    rate = len(violations) / len(points)
    ok = rate <= 0.02 and all(rising for _, rising in violations)
    report(4, ok, f"{len(violations)}/{len(points)} violations ({rate:.1%} <= 2%)")


def test_criterion_05_covering_full_measure():
    """mink_cover measure = 1 on 100 random (x, psi, N) satisfying (Nreq)."""
    rng = random.Random(7)
    presets = ["sqrt2m1", "golden", "-1+1*sqrt(3)", "-2+1*sqrt(5)"]
    failures = []
    for i in range(100):
        if rng.random() < 0.5:
            den = rng.randint(2, 500)
            x = RealVector.of(Fraction(rng.randint(1, den - 1), den))
        else:
            x = parse_vector(rng.choice(presets))
        alpha = Fraction(rng.randint(1, 18), 20)
        N = rng.randint(20, 2000)
        union = mink_cover(x, PowerPsi(alpha), N)
        if abs(union.measure - 1) > Fraction(1, 10 ** 9):
            failures.append((i, str(x), alpha, N, union.measure))
    report(5, not failures, f"{100 - len(failures)}/100 covered exactly")


def test_criterion_06_regularity_and_divergence():
    """(R) with kappa = 1/k exactly; (D) condensation sums with slope 1."""
    ok = True
    for d in (2, 3):
        psi = PowerPsi(Fraction(1, d))
        for k in (2, 3, 4):
            holds, ratio = check_u_regular(psi, k, range(1, 9))
            ok = ok and holds and ratio <= Fraction(1, k)
        verdict = classify_divergence(psi, d, M_max=25)
        sums = [s for _, s in verdict.partial_sums]
        ok = ok and all(
            isinstance(s, Fraction) and s == m for m, s in enumerate(sums, start=1)
        )
    report(6, ok, "(R) exact for k in {2,3,4}, d in {2,3}; (D) slope 1 exact")


def test_criterion_07_ubiquity_pipeline():
    """select_k on x = sqrt(2)-1, psi = q^-9/20 finds k <= 64 with the (U)
    witness >= 0.05 over j in [j0, 14] and c = 2k, < 10 min."""
    start = time.monotonic()
    k, rep, _diags = select_k(
        SQRT2M1, parse_psi("q^-0.45"), 2, range(2, 65), range(1, 15),
    )
    elapsed = time.monotonic() - start
    ok = (
        k is not None and k <= 64
        and rep.c == 2 * k
        and rep.kappa_witness is not None and rep.kappa_witness >= 0.05
        and rep.verdicts["U"].startswith("holds")
        and elapsed < 600
    )
    report(
        7, ok,
        f"k={k}, c={rep.c if rep else '-'}, witness="
        f"{rep.kappa_witness:.3f} >= 0.05, j0={rep.j0}; {elapsed:.0f}s (< 600s)",
    )


def test_criterion_08_divergence_probe():
    """approximable_fraction >= 0.9 at Q_max = 10^6 and nondecreasing."""
    exp = MeasureExperiment(
        x=SQRT2M1, psi=parse_psi("q^-0.5"), d=2, k=1, Q_max=10 ** 6,
        sampling="grid", n_points=10 ** 4,
    )
    prof = fraction_profile(exp, [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6])
    vals = [f for _, f in prof]
    ok = vals == sorted(vals) and vals[-1] >= 0.9
    report(8, ok, f"profile {vals} nondecreasing, final >= 0.9")


def test_criterion_09_phi_contrast():
    rep = phi_contrast(SQRT2M1, 2, 10 ** 3, 10 ** 6, "grid", 10 ** 4)
    ok = (
        rep.empirical_fraction <= rep.union_bound + 3 * rep.sigma
        and rep.union_bound <= 0.5
    )
    report(
        9, ok,
        f"empirical {rep.empirical_fraction:.4f} <= bound "
        f"{rep.union_bound:.4f} + 3*{rep.sigma:.4f}; bound <= 0.5",
    )


def test_criterion_10_lattice_identity():
    """count_lattice_points = 2*count_Q + 1 exactly on 200 random specs."""
    rng = random.Random(2026)
    presets = ["sqrt2m1", "golden", "-1+1*sqrt(3)"]
    failures = []
    for i in range(200):
        if rng.random() < 0.5:
            den = rng.randint(2, 300)
            x = RealVector.of(Fraction(rng.randint(1, den - 1), den))
        else:
            x = parse_vector(rng.choice(presets))
        delta = Fraction(rng.randint(1, 99), 200)  # < 1/2
        N = rng.randint(20, 500)
        lat = count_lattice_points(build_lattice(x, N, delta))
        qc = count_Q(CountQuery(x, delta, 0, N - 1)).count
        if lat != 2 * qc + 1:
            failures.append((i, str(x), delta, N, lat, qc))
    report(10, not failures, f"{200 - len(failures)}/200 exact identities")


REPLAY_CONFIGS = [
    # one representative (cheap) run per criterion family
    ["count", "--x", "sqrt2m1", "--delta", "1/5", "--N", "2000"],          # 1
    ["nalpha", "--x", "sqrt2m1", "--tau", "3/2", "--N", "1000",
     "--delta", "1/100"],                                                   # 2
    ["exponent", "--x", "golden", "--H", "5000"],                           # 3
    ["transference", "--x", "sqrt2m1,-1+1*sqrt(3)", "--H", "2000",
     "--Qmax", "5000"],                                                     # 4
    ["cover", "--x", "sqrt2m1", "--psi", "q^-0.45", "--N", "400"],          # 5
    ["ubiquity", "--x", "sqrt2m1", "--psi", "q^-0.5", "--d", "2",
     "--k", "2", "--j-range", "1:6"],                                       # 6
    ["select-k", "--x", "sqrt2m1", "--psi", "q^-0.45", "--d", "2",
     "--k-search", "2:4", "--j-range", "1:6"],                              # 7
    ["measure", "--x", "sqrt2m1", "--psi", "q^-0.5", "--d", "2",
     "--k", "1", "--Qmax", "5000", "--n", "500", "--sampling",
     "monte-carlo", "--seed", "20260826"],                                  # 8
    ["phi-contrast", "--x", "sqrt2m1", "--d", "2", "--Q0", "1000",
     "--Qmax", "20000", "--n", "2000"],                                     # 9
    ["lattice", "--x", "sqrt2m1", "--N", "300", "--delta", "1/7"],          # 10
]


def test_criterion_11_replay_byte_identical(tmp_path):
    """Replaying each representative run reproduces it byte-for-byte."""
    drifted = []
    for idx, argv in enumerate(REPLAY_CONFIGS):
        out = tmp_path / f"run_{idx}.json"
        assert cli.main([*argv, "--out", str(out)]) == 0
        recorded = json.loads(out.read_text())
        fresh = cli.run(recorded["config"])
        rec_bytes = cli._canonical_json(
            {k: v for k, v in recorded.items() if k != "wall_time_s"}
        )
        new_bytes = cli._canonical_json(
            {k: v for k, v in fresh.items() if k != "wall_time_s"}
        )
        if rec_bytes.encode() != new_bytes.encode():
            drifted.append(argv[0])
        if cli.main(["replay", str(out)]) != 0:
            drifted.append(argv[0] + " (replay exit)")
    report(11, not drifted, f"{len(REPLAY_CONFIGS)} runs replayed byte-identically"
           if not drifted else f"drift in {drifted}")
