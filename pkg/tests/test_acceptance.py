"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the status lines are written
straight to the terminal so they show up without ``-s``.
"""

import math
import time

import numpy as np
import pytest

from ergoqca import cli, dynamics, gates, lattice, readout, walk
from ergoqca.errors import CompileError
from ergoqca.lattice import Dims

DIMS_123 = [Dims(2, 6), Dims(2, 8), Dims(4, 10)]
FLAG_ONLY = gates.Circuit(h=2, layers=({},))


def status(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")


def stated_mass_bound(eps):
    return math.cos(math.pi / 4 - math.asin(math.sqrt(2) * eps**2)) ** 2


def flagged_gram_check(dims, steps):
    """Compile the flag-only circuit onto ``dims`` and compare both models."""
    flagged = gates.attach_flags(FLAG_ONLY)
    program = gates.place(flagged, dims, 0)
    return dynamics.crosscheck_reduced(dims, program, flagged.initial_bits(""), steps, 2)


# ------------------------------------------------------------------ 1


def test_criterion_1_closure(capsys):
    t0 = time.perf_counter()
    bad, mismatch = 0, []
    for dims in DIMS_123:
        bad += len(lattice.closure_violations(dims))
        if lattice.enumerate_configs(dims) != lattice.brute_force_configs(dims):
            mismatch.append(dims)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and not mismatch and elapsed < 1.0
    status(capsys, 1, ok, f"closure violations {bad}, enumeration mismatches {len(mismatch)}, {elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 2


def test_criterion_2_normality(capsys):
    t0 = time.perf_counter()
    defects, exact = [], True
    for dims in DIMS_123:
        defects.append(dynamics.normality_defect(dynamics.build_reduced_f(dims, 2)))
        for a in lattice.enumerate_configs(dims):
            fw, bw = lattice.weight_sums(a, dims)
            exact &= fw == bw
    elapsed = time.perf_counter() - t0
    ok = max(defects) <= 1e-12 and exact and elapsed < 1.0
    status(capsys, 2, ok, f"max normality defect {max(defects):.2e}, rational weight identity {exact}, {elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 3, 4


def test_criterion_3_reduced_model_c6(capsys):
    # a flagged circuit on h=2 needs 7 layers; the c=6 cylinder has 6 rows
    t0 = time.perf_counter()
    try:
        cc = flagged_gram_check(Dims(2, 6), 12)
        ok = cc.max_deviation <= 1e-10
        detail = f"max Gram deviation {cc.max_deviation:.2e}"
    except CompileError as exc:
        ok, detail = False, f"cannot build the flagged circuit on (h=2, c=6): {exc}"
    ok &= time.perf_counter() - t0 < 30
    status(capsys, 3, ok, detail)
    assert ok


def test_criterion_4_orthogonality_c6(capsys):
    t0 = time.perf_counter()
    dims = Dims(2, 6)
    try:
        cc = flagged_gram_check(dims, 2 * 2 * dims.g)
        ok = cc.orthogonality_defect <= 1e-10
        detail = f"max overlap {cc.orthogonality_defect:.2e}"
    except CompileError as exc:
        ok, detail = False, f"cannot build the flagged circuit on (h=2, c=6): {exc}"
    ok &= time.perf_counter() - t0 < 30
    status(capsys, 4, ok, detail)
    assert ok


def test_criteria_3_4_smallest_feasible_cylinder(capsys):
    # same checks on (h=2, c=8), the smallest h=2 cylinder that holds the flag gadget
    t0 = time.perf_counter()
    dims = Dims(2, 8)
    gram = flagged_gram_check(dims, 12)
    orth = flagged_gram_check(dims, 2 * 2 * dims.g)
    elapsed = time.perf_counter() - t0
    ok = gram.max_deviation <= 1e-10 and orth.max_deviation <= 1e-10 and orth.orthogonality_defect <= 1e-10
    status(
        capsys, "3/4 at c=8", ok,
        f"Gram deviation {max(gram.max_deviation, orth.max_deviation):.2e}, "
        f"max overlap {orth.orthogonality_defect:.2e}, {elapsed:.2f}s",
    )
    assert ok and elapsed < 30


# ------------------------------------------------------------------ 5


def test_criterion_5_graded_blocks(capsys):
    fr = dynamics.build_reduced_f(Dims(2, 6), 2)
    defect = dynamics.block_balance_defect(fr)
    leak = dynamics.off_grade_mass(fr)
    ok = defect <= 1e-10 and leak == 0
    status(capsys, 5, ok, f"block balance defect {defect:.2e}, off-grade mass {leak}")
    assert ok


# ------------------------------------------------------------------ 6


def staircase_numbers(dims):
    fr = dynamics.build_reduced_f(dims, 2)
    space = fr.space
    psi = space.basis_vector(space.index_of(lattice.staircase_config(dims)))
    f = fr.dense()
    vec = f.conj().T @ (f @ psi)
    masses = {eps: dynamics.spectral_mass(fr, psi, eps) for eps in (0.0, 0.05, 0.1, 0.2)}
    return float(np.vdot(psi, vec).real), float(np.linalg.norm(vec)), masses


@pytest.mark.parametrize("dims", DIMS_123 + [Dims(2, 20)], ids=str)
def test_criterion_6_staircase(capsys, dims):
    t0 = time.perf_counter()
    expect, norm, s = staircase_numbers(dims)
    first = abs(expect - 0.5) <= 1e-12 and abs(norm - 1 / math.sqrt(2)) <= 1e-12 and s[0.0] >= 0.5 - 1e-12
    short = [eps for eps in (0.05, 0.1, 0.2) if s[eps] < stated_mass_bound(eps)]
    elapsed = time.perf_counter() - t0
    ok = first and not short and elapsed < 5
    detail = (
        f"(h={dims.h}, c={dims.c}) <a|F'F|a>={expect:.15f}, |F'F a|={norm:.15f}, s_0={s[0.0]:.6f}; "
        + ("all s_eps above the stated bound" if not short else
           "below stated bound at " + ", ".join(f"eps={e}: {s[e]:.6f} < {stated_mass_bound(e):.6f}" for e in short))
    )
    status(capsys, 6, ok, detail)
    assert ok


@pytest.mark.parametrize("dims", DIMS_123 + [Dims(2, 20)], ids=str)
def test_criterion_6_corrected_sign(capsys, dims):
    _, _, s = staircase_numbers(dims)
    bound = {eps: math.cos(math.pi / 4 + math.asin(math.sqrt(2) * eps**2)) ** 2 for eps in (0.05, 0.1, 0.2)}
    ok = all(s[eps] >= bound[eps] for eps in bound)
    status(capsys, "6 corrected", ok, f"(h={dims.h}, c={dims.c}) s_eps >= cos^2(pi/4 + arcsin(sqrt2 eps^2)) for all eps")
    assert ok


# ------------------------------------------------------------------ 7


def test_criterion_7_mixing(capsys):
    t0 = time.perf_counter()
    tvs = {}
    for N in (16, 32, 64, 128):
        rep = walk.verify_mixing(walk.CycleWalk(N, 0.5), 0.2, 0.5)
        tvs[N] = rep.tv
    rng = np.random.default_rng(2024)
    worst = np.inf
    for _ in range(1000):
        n = int(rng.integers(2, 65))
        R = rng.dirichlet(np.full(n, rng.uniform(0.05, 5)))
        worst = min(worst, walk.fourier_mixing_bound(R) - walk.tv_distance(R, walk.uniform(n)) ** 2)
    elapsed = time.perf_counter() - t0
    ok = max(tvs.values()) <= 0.2 and worst >= -1e-12 and elapsed < 60
    tv_text = ", ".join(f"N={N}: {tv:.4f}" for N, tv in tvs.items())
    status(capsys, 7, ok, f"TV {tv_text}; min(bound - TV^2) over 1000 draws {worst:.2e}, {elapsed:.1f}s")
    assert ok


# ------------------------------------------------------------------ 8


def test_criterion_8_time_average_bound(capsys):
    t0 = time.perf_counter()
    dims, eps = Dims(2, 20), 0.1
    fr = dynamics.build_reduced_f(dims, 2)
    space = fr.space
    i0 = space.index_of(lattice.staircase_config(dims))
    psi = space.basis_vector(i0)
    sd = dynamics.spectral(fr)
    W = dynamics.grade_distribution(dynamics.time_average(sd, psi), space, int(space.grades[i0]))
    delta = walk.tv_distance(W, walk.uniform(space.N))
    rhs = (1 / space.N - 2 * delta) * stated_mass_bound(eps)
    elapsed = time.perf_counter() - t0
    ok = W.min() >= rhs and elapsed < 60
    status(capsys, 8, ok, f"min W = {W.min():.6f} >= {rhs:.6f} (N={space.N}, delta_meas={delta:.6f}), {elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 9


def test_criterion_9_one_shot(capsys):
    t0 = time.perf_counter()
    spec = readout.ExperimentSpec(Dims(2, 20), 8, FLAG_ONLY, "", None, 100_000, 2024)
    rep = readout.run_experiment(spec)
    acc = rep.shots["accepted"]
    match = bool(np.all(rep.shots["correct"][acc]))
    elapsed = time.perf_counter() - t0
    ok = rep.success_estimate + 3 * rep.success_sigma >= rep.theorem_bound and match and acc.any() and elapsed < 300
    status(
        capsys, 9, ok,
        f"success {rep.success_estimate:.5f} +/- {rep.success_sigma:.5f} vs bound {rep.theorem_bound:.5f}; "
        f"accepted {int(acc.sum())}, all match f(x): {match}; {elapsed:.1f}s",
    )
    assert ok


# ------------------------------------------------------------------ 10


def test_criterion_10_trend(capsys):
    t0 = time.perf_counter()
    est = {}
    for c in (16, 24, 32, 40):
        flagged_depth = gates.attach_flags(FLAG_ONLY).depth
        spec = readout.ExperimentSpec(Dims(2, c), c - flagged_depth - 2, FLAG_ONLY, "", None, 100_000, 7)
        est[c] = readout.run_experiment(spec).success_estimate
    seq = [est[c] for c in sorted(est)]
    elapsed = time.perf_counter() - t0
    ok = all(a <= b for a, b in zip(seq, seq[1:])) and est[40] > 0.15 and elapsed < 600
    status(capsys, 10, ok, ", ".join(f"c={c}: {v:.4f}" for c, v in est.items()) + f"; {elapsed:.1f}s")
    assert ok


# ------------------------------------------------------------------ 11


def test_criterion_11_determinism(capsys, tmp_path):
    circ = tmp_path / "f.txt"
    circ.write_text(gates.format_circuit(FLAG_ONLY))
    args = ["run", "--h", "2", "--c", "20", "--m", "8", "--circuit", str(circ), "--shots", "100000", "--seed", "7", "--shots-csv"]
    for name in ("a", "b"):
        assert cli.main(args + ["--out", str(tmp_path / name)]) == 0
    same = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        for f in ("report.json", "shots.csv")
    )
    status(capsys, 11, same, "report.json and shots.csv byte-identical across reruns")
    assert same
