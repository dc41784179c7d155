"""Acceptance criteria. Each prints one PASS/FAIL line.

Run under pytest (lines are repeated in the terminal summary) or directly:
``python3 tests/test_acceptance.py``.
"""

import filecmp
import functools
import os
import struct
import subprocess
import sys
import tempfile
import time

import numpy as np
import pytest

from adauc import data, harness, model, oracle, trainer
from adauc.attack import BALL_TOL, AttackConfig, run_attack
from adauc.core_math import Prng
from adauc.objective import AuxParams, ObjectiveContext, closed_form_aux, g_instance, g_partials

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # direct execution
    ACCEPTANCE_LINES = {}

NAMES = {
    1: "min-max equivalence of the pairwise loss",
    2: "closed-form aux stationarity",
    3: "FOSC zero conditions and corner enumeration",
    4: "gradient exactness vs finite differences",
    5: "alpha strong concavity",
    6: "input strong concavity under the regularizer",
    7: "FOSC schedule and at_fosc/at_plain equivalence",
    8: "constraint integrity",
    9: "long-tail construction and fixture parsing",
    10: "directional robustness ordering",
    11: "convergence trend",
    12: "CLI determinism across thread counts",
}


def _record(n, passed, detail):
    line = f"criterion {n:2d} {'PASS' if passed else 'FAIL'}  {NAMES[n]}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    return passed


def _suite(name, seed=1):
    report = oracle.VerifyReport()
    oracle.SUITES[name](report, seed)
    return {r.check: r for r in report.results}


# --- 1 -------------------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    r = _suite("prop1")["max_gap"]
    elapsed = time.perf_counter() - t0
    ok = r.passed and r.value <= 1e-8 and elapsed < 5.0
    return _record(1, ok, f"max gap {r.value:.2e} (<= 1e-8) over 100 datasets in {elapsed:.2f}s (< 5s)")


# --- 2 -------------------------------------------------------------------------------------


def criterion_2():
    rng = Prng(2)
    worst = 0.0
    for trial in range(50):
        n = 5 + rng.randbelow(60)
        d = 2 + rng.randbelow(6)
        arch = (d, 1) if trial % 2 else (d, 5, 1)
        params = model.init(arch, rng.next_u64())
        X = rng.uniform(0, 1, size=(n, d))
        y = np.array([rng.randbelow(2) for _ in range(n)])
        y[:2] = (1, 0)
        s = model.score_batch(params, X)
        aux = closed_form_aux(s, y, clamp=False)
        _, d_a, d_b, d_al = g_partials(ObjectiveContext(y.mean()), aux, s, y)
        worst = max(worst, abs(np.mean(d_a)), abs(np.mean(d_b)), abs(np.mean(d_al)))
    return _record(2, worst <= 1e-10, f"max |batch-mean partial| {worst:.2e} (<= 1e-10) over 50 batches")


# --- 3 -------------------------------------------------------------------------------------


def criterion_3():
    r = _suite("lemma1")
    ok = all(v.passed for v in r.values())
    detail = (f"stationary {r['stationary_fosc'].value:.1e} (<= 1e-10), "
              f"boundary {r['boundary_fosc'].value:.1e} (<= 1e-8), "
              f"generic min {r['generic_fosc_min'].value:.2e} (> 0), "
              f"corner gap {r['corner_enumeration_gap'].value:.1e} (<= 1e-10, d <= 12)")
    return _record(3, ok, detail)


# --- 4 -------------------------------------------------------------------------------------


def criterion_4():
    r = _suite("gradcheck")
    worst = max(v.value for v in r.values())
    ok = all(v.passed for v in r.values())
    return _record(4, ok, f"max relative error {worst:.2e} (<= 1e-6), 100 states each on "
                          + ", ".join(k.replace("arch_", "") for k in r))


# --- 5 -------------------------------------------------------------------------------------


def criterion_5():
    err_oracle = oracle.alpha_second_difference_error(Prng(5), n_states=500)
    rng = Prng(6)
    err_lib = 0.0
    for _ in range(500):
        ctx = ObjectiveContext(rng.uniform(0.01, 0.99))
        aux = AuxParams(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-1, 1))
        h, s, y = rng.uniform(0, 1), rng.uniform(0, 1), rng.randbelow(2)
        second = (g_instance(ctx, aux, s, y, alpha=aux.alpha + h)
                  + g_instance(ctx, aux, s, y, alpha=aux.alpha - h)
                  - 2 * g_instance(ctx, aux, s, y))
        err_lib = max(err_lib, abs(second + 2 * ctx.p * (1 - ctx.p) * h * h))
    worst = max(err_oracle, err_lib)
    return _record(5, worst <= 1e-12, f"max |second difference + 2p(1-p)h^2| {worst:.1e} (<= 1e-12)")


# --- 6 -------------------------------------------------------------------------------------


def criterion_6():
    r = _suite("concavity")
    reg, neg = r["regularized_worst_probe"], r["unregularized_violates"]
    ok = reg.passed and neg.passed
    return _record(6, ok, f"{reg.detail}, worst regularized margin {reg.value:.2e} (<= 0 over 1000 "
                          f"probes); gamma=0 worst {neg.value:.2e} (> 0, negative control)")


# --- 7 -------------------------------------------------------------------------------------


def criterion_7():
    sched_ok = True
    for c_max, t_prime in ((0.37, 30), (1.0, 7), (2.5e-3, 13)):
        vals = [trainer.ct_schedule(t, c_max, t_prime) for t in range(2 * t_prime)]
        sched_ok &= vals[0] == c_max and vals[t_prime] == 0.0
        sched_ok &= all(a >= b for a, b in zip(vals, vals[1:]))
    ds = data.gen_synthetic_longtail(seed=7, n=400, d=8, rho=0.1, separation=4.0)
    ctx = ObjectiveContext(ds.p, 0.01)
    acfg = AttackConfig(k_steps=5, c_max=0.0)
    runs = []
    for mode in ("at_fosc", "at_plain"):
        cfg = trainer.TrainConfig(epochs=4, eta_w=1.0, batch_size=64, seed=3, mode=mode,
                                  eval_attack="pgd-3")
        runs.append(trainer.train(ds, (8, 4, 1), acfg, cfg, ctx))
    same = (runs[0].params.flat().tobytes() == runs[1].params.flat().tobytes()
            and runs[0].aux == runs[1].aux
            and np.array([r.as_row() for r in runs[0].history.records]).tobytes()
            == np.array([r.as_row() for r in runs[1].history.records]).tobytes())
    return _record(7, sched_ok and same, f"schedule endpoints/monotone {'ok' if sched_ok else 'BROKEN'}; "
                                          f"at_fosc(c_max=0) vs at_plain bitwise {'equal' if same else 'DIFFER'}")


# --- 8 -------------------------------------------------------------------------------------


def criterion_8():
    ds = data.gen_synthetic_longtail(seed=8, n=300, d=6, rho=0.1, separation=4.0)
    eps = 8.0 / 255.0
    stats = {"adv_batches": 0, "adv_bad": 0, "steps": 0, "steps_bad": 0, "at_bound": 0}
    orig_pgd, orig_step = trainer.pgd_fosc_batch, trainer.sgda_step

    def checked_pgd(*args, **kw):
        out = orig_pgd(*args, **kw)
        stats["adv_batches"] += 1
        bad = (np.any(np.abs(out.x_adv - out.x0) > eps + BALL_TOL)
               or np.any(out.x_adv < 0) or np.any(out.x_adv > 1))
        stats["adv_bad"] += int(bad)
        return out

    def checked_step(*args, **kw):
        params, aux = orig_step(*args, **kw)
        stats["steps"] += 1
        stats["steps_bad"] += int(not aux.in_domain())
        stats["at_bound"] += int(aux.a in (0.0, 1.0) or aux.b in (0.0, 1.0) or abs(aux.alpha) == 1.0)
        return params, aux

    trainer.pgd_fosc_batch, trainer.sgda_step = checked_pgd, checked_step
    try:
        for mode in ("at_fosc", "at_plain", "natural"):
            # a large step size pushes a, b, alpha against their bounds
            cfg = trainer.TrainConfig(epochs=3, eta_w=5.0, eta_alpha=5.0, batch_size=32, mode=mode)
            res = trainer.train(ds, (6, 4, 1), AttackConfig(eps=eps), cfg, ObjectiveContext(ds.p, 0.01))
    finally:
        trainer.pgd_fosc_batch, trainer.sgda_step = orig_pgd, orig_step
    ctx = ObjectiveContext(ds.p)
    eval_bad = 0
    for spec in ("fgsm", "pgd-10", "pgd-20"):
        for rs in (False, True):
            X = run_attack(res.params, res.aux, res.alpha, ctx, ds.features, ds.labels, spec,
                           eps=eps, random_start=rs, seed=4)
            eval_bad += int(np.any(np.abs(X - ds.features) > eps + BALL_TOL)
                            or np.any(X < 0) or np.any(X > 1))
    ok = stats["adv_bad"] == 0 and stats["steps_bad"] == 0 and eval_bad == 0 and stats["steps"] > 0
    return _record(8, ok, f"{stats['adv_batches']} PGD batches and 6 eval attacks in ball and box; "
                          f"{stats['steps']} SGDA steps ({stats['at_bound']} on a bound), "
                          f"{stats['steps_bad']} with aux out of domain")


# --- 9 -------------------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _criterion_9_parts():
    spec = data.LongTailSpec(10, 5000, 0.01, data.last_half_positive(10))
    n_pos, n_neg, rho = data.binarize_longtail(data.longtail_class_sizes(spec), spec.positive_class_ids)
    ratio = n_neg / n_pos
    ratio_ok = 8.5 <= ratio <= 9.5

    with tempfile.TemporaryDirectory() as tmp:
        pixels = bytes(range(0, 256, 8))[:8 * 2] + bytes([255, 0]) * 4
        n_img = len(pixels) // 4
        labels = bytes(i % 10 for i in range(n_img))
        img, lab = os.path.join(tmp, "i"), os.path.join(tmp, "l")
        with open(img, "wb") as fh:
            fh.write(struct.pack(">IIII", 0x803, n_img, 2, 2) + pixels)
        with open(lab, "wb") as fh:
            fh.write(struct.pack(">II", 0x801, n_img) + labels)
        pool = data.load_mnist_idx(img, lab)
        mnist_ok = (np.array_equal(pool.features, np.frombuffer(pixels, np.uint8).reshape(n_img, 4) / 255.0)
                    and pool.classes.tolist() == list(labels))
        rng = np.random.default_rng(9)
        raw = rng.integers(0, 256, size=(4, 3073), dtype=np.uint8)
        raw[:, 0] = [0, 3, 9, 3]
        cif = os.path.join(tmp, "c.bin")
        with open(cif, "wb") as fh:
            fh.write(raw.tobytes())
        cpool = data.load_cifar10_bin(cif)
        cifar_ok = (np.array_equal(cpool.features, raw[:, 1:] / 255.0)
                    and cpool.classes.tolist() == [0, 3, 9, 3])
    return ratio, ratio_ok, mnist_ok and cifar_ok


def criterion_9():
    ratio, ratio_ok, fixtures_ok = _criterion_9_parts()
    detail = (f"positive:negative = 1:{ratio:.2f} (target [1:8.5, 1:9.5]) "
              f"{'ok' if ratio_ok else 'OUT OF RANGE'}; IDX/CIFAR fixtures "
              f"{'bit-exact' if fixtures_ok else 'MISMATCH'}")
    return _record(9, ratio_ok and fixtures_ok, detail)


# --- 10 / 11 -------------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _table2_runs():
    """NT, AT1, AT2 on the synthetic long-tail set, linear and small-MLP scorers."""
    t0 = time.perf_counter()
    full = data.gen_synthetic_longtail(seed=1, n=2500, d=50, rho=0.1, separation=4.0)
    tr, te = data.train_test_split(full, 0.2, seed=2)
    ctx = ObjectiveContext(tr.p, 0.01)
    out = {}
    for scorer, arch in (("linear", (50, 1)), ("mlp", (50, 16, 1))):
        entries, hist = [], {}
        for mode in ("nt", "at1", "at2"):
            cfg = trainer.TrainConfig(epochs=60, eta_w=2.0, eta_alpha=0.5, seed=3, mode=mode)
            res = trainer.train(tr, arch, AttackConfig(), cfg, ctx, test=te)
            entries.append(harness.ModelEntry(mode, cfg.mode, res.params, res.aux))
            hist[mode] = res.history
        report = harness.evaluate_grid(entries, te, ["clean", "pgd-10"])
        out[scorer] = ({m: (report.cell(m, e.mode, "clean"), report.cell(m, e.mode, "pgd-10"))
                        for m, e in zip(("nt", "at1", "at2"), entries)}, hist)
    return tr.n, out, time.perf_counter() - t0


def criterion_10():
    n_train, out, elapsed = _table2_runs()
    ok = elapsed < 300 and n_train == 2000
    parts = []
    for scorer, (auc, _) in out.items():
        drop = auc["nt"][0] - auc["nt"][1]
        gain = auc["at2"][1] - auc["nt"][1]
        slack = auc["at2"][0] - (auc["at1"][0] - 0.02)
        ok &= drop >= 0.15 and gain >= 0.05 and slack >= 0
        parts.append(f"{scorer}: NT drop {drop:.3f} (>= 0.15), AT2-NT under PGD-10 {gain:.3f} (>= 0.05), "
                     f"AT2 clean {auc['at2'][0]:.3f} vs AT1 {auc['at1'][0]:.3f} (>= -0.02)")
    return _record(10, ok, "; ".join(parts) + f"; {elapsed:.0f}s (< 300s)")


def criterion_11():
    _, out, _ = _table2_runs()
    ok = True
    parts = []
    for scorer, (_, hist) in out.items():
        h = hist["at2"]
        early, late = trainer.stationarity_probe(h)
        auc = h.column("auc_clean")
        first, last = float(np.mean(auc[:10])), float(np.mean(auc[-10:]))
        ok &= late < early and last > first
        parts.append(f"{scorer} AT2: |g_w| {early:.4f} -> {late:.4f}, test AUC {first:.4f} -> {last:.4f}")
    return _record(11, ok, "; ".join(parts))


# --- 12 ------------------------------------------------------------------------------------


def _cli(cwd, *args, threads):
    cmd = [sys.executable, "-m", "adauc", *args, "--threads", str(threads)]
    subprocess.run(cmd, cwd=cwd, check=True, capture_output=True)


def _all_files(root):
    out = []
    for base, _, files in os.walk(root):
        out.extend(os.path.relpath(os.path.join(base, f), root) for f in files)
    return sorted(out)


def criterion_12():
    with tempfile.TemporaryDirectory() as tmp:
        dirs = []
        for threads in (1, 4):
            d = os.path.join(tmp, f"t{threads}")
            os.makedirs(os.path.join(d, "hist"))
            _cli(d, "gen-data", "--n", "400", "--d", "8", "--seed", "5", "--out", "train.adset",
                 "--test-out", "test.adset", threads=threads)
            for mode in ("nt", "at2"):
                _cli(d, "train", "--data", "train.adset", "--test-data", "test.adset", "--mode", mode,
                     "--hidden", "4", "--epochs", "3", "--eta-w", "1.0", "--eval-attack", "pgd-3",
                     "--out-model", f"{mode}.ckpt", "--out-history", f"{mode}.csv", threads=threads)
            _cli(d, "eval", "--model", "nt.ckpt", "--model", "at2.ckpt", "--data", "test.adset",
                 "--attacks", "clean,fgsm,pgd-5", "--random-start", "true", "--seed", "3",
                 "--out", "report.csv", "--hist-dir", "hist", threads=threads)
            _cli(d, "verify", "--suite", "lemma1", "--out", "verify.csv", threads=threads)
            _cli(d, "plot", "--history", "at2.csv", "--out", "at2.svg", threads=threads)
            dirs.append(d)
        files = _all_files(dirs[0])
        same = files == _all_files(dirs[1])
        diff = [f for f in files if not filecmp.cmp(os.path.join(dirs[0], f),
                                                    os.path.join(dirs[1], f), shallow=False)]
    ok = same and not diff and len(files) > 10
    return _record(12, ok, f"{len(files)} output files (CSV, PNG, SVG, checkpoints, datasets) "
                           f"compared, {len(diff)} differ between --threads 1 and 4")


# --- pytest wrappers -------------------------------------------------------------------------


def test_criterion_01():
    assert criterion_1()


def test_criterion_02():
    assert criterion_2()


def test_criterion_03():
    assert criterion_3()


def test_criterion_04():
    assert criterion_4()


def test_criterion_05():
    assert criterion_5()


def test_criterion_06():
    assert criterion_6()


def test_criterion_07():
    assert criterion_7()


def test_criterion_08():
    assert criterion_8()


def test_criterion_09_fixtures():
    assert _criterion_9_parts()[2]


# The stated class-size rule with the last five classes positive yields about
# 1:12.9, outside the target band. No reading of the rule reaches 1:9; the
# check is kept as stated and reported as an expected failure.
@pytest.mark.xfail(strict=True, reason="class-size rule gives 1:12.9, not 1:9")
def test_criterion_09_ratio():
    assert criterion_9()


def test_criterion_10():
    assert criterion_10()


def test_criterion_11():
    assert criterion_11()


def test_criterion_12():
    assert criterion_12()


if __name__ == "__main__":
    results = [globals()[f"criterion_{n}"]() for n in range(1, 13)]
    print(f"{sum(results)}/12 criteria pass")
