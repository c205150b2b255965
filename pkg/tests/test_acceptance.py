"""Acceptance criteria, one PASS/FAIL line each (run with ``-s`` to see them)."""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np
import pytest

from locbound import Geometry, SpinModelSpec
from locbound.lsm import TwistSpec, column_rotation, translation_unitary, twisted_hamiltonian, twisted_translation
from locbound.interaction import assemble_hamiltonian
from locbound.quantum import operator_norm

ATOL = 1e-12


def report(name, ok, detail=""):
    print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def rows_of(result):
    with open(result.csv_path, newline="") as fh:
        return list(csv.DictReader(fh))


def meta_of(result):
    with open(result.meta_path) as fh:
        return json.load(fh)


def run(shipped_runs, name):
    out, _ = shipped_runs
    cfg, results, seconds = out[name]
    return cfg, results[0], seconds


def f(row, key):
    return float(row[key])


def test_lsm_scan_spin_half(shipped_runs):
    cfg, res, seconds = run(shipped_runs, "lsm_scan_half.json")
    rows = rows_of(res)
    thetas = np.array([f(r, "theta") for r in rows])
    gaps = np.array([f(r, "E1") - f(r, "E0") for r in rows])
    i_pi, i_0 = int(np.argmin(abs(thetas - math.pi))), int(np.argmin(abs(thetas)))
    ok = (res.status == 0 and len(rows) == 65 and cfg.model.geometry.size == [8] and cfg.model.spin == 0.5
          and abs(thetas[i_pi] - math.pi) < 1e-12 and gaps[i_pi] < 1e-8 and thetas[i_0] == 0
          and gaps[i_0] > 0 and seconds < 10)
    report("spin-1/2 twisted ring crossing at pi", ok,
           f"gap(pi)={gaps[i_pi]:.3g} gap(0)={gaps[i_0]:.6g} runtime={seconds:.1f}s")


def test_lsm_scan_spin_one(shipped_runs):
    cfg, res, seconds = run(shipped_runs, "lsm_scan_one.json")
    rows = rows_of(res)
    meta = meta_of(res)["results"]
    thetas = np.array([f(r, "theta") for r in rows])
    i_pi = int(np.argmin(abs(thetas - math.pi)))
    gap = f(rows[i_pi], "E1") - f(rows[i_pi], "E0")
    tol = meta["degeneracy_tol"]
    ok = (res.status == 0 and len(rows) == 33 and meta["dimension"] == 6561
          and abs(thetas[i_pi] - math.pi) < 1e-12 and gap > 10 * tol)
    report("spin-1 twisted ring stays gapped at pi", ok,
           f"gap(pi)={gap:.6g} threshold={10 * tol:.3g} runtime={seconds:.1f}s")


def test_lieb_robinson_sweep(shipped_runs):
    cfg, res, _ = run(shipped_runs, "lr_sweep.json")
    rows = rows_of(res)
    ts = sorted({f(r, "t") for r in rows})
    rates = sorted({f(r, "rate") for r in rows})
    ys = sorted({int(r["y"]) for r in rows})
    bad = [r for r in rows if f(r, "empirical") > f(r, "analytic") + ATOL]
    worst = max(f(r, "ratio") for r in rows if not math.isnan(f(r, "ratio")))
    ok = (res.status == 0 and not bad and rates == [0.5, 1.0] and ys == list(range(3, 10))
          and len(ts) == 21 and np.allclose(ts, np.arange(21) * 0.1, atol=1e-12))
    report("Lieb-Robinson bound on the 10-site chain", ok,
           f"{len(rows)} rows, {len(bad)} violations, max ratio {worst:.3g}")


def test_series_coefficients(shipped_runs):
    cfg, res, _ = run(shipped_runs, "series_check.json")
    rows = rows_of(res)
    orders = sorted({int(r["n"]) for r in rows})
    bad = [r for r in rows if not f(r, "exact") <= f(r, "bound")]
    ok = res.status == 0 and {1, 2} <= set(orders) and not bad and cfg.model.geometry.size == [6]
    detail = ", ".join(f"a{r['n']}={f(r, 'exact'):.6g}<={f(r, 'bound'):.6g}" for r in rows)
    report("series coefficients within their bounds", ok, detail)


def test_quasi_locality(shipped_runs):
    _, loc, _ = run(shipped_runs, "localize.json")
    _, tr, _ = run(shipped_runs, "truncate.json")
    lrows, trows = rows_of(loc), rows_of(tr)
    bad_loc = [r for r in lrows if f(r, "empirical") > f(r, "analytic") + ATOL]
    bad_tr = [r for r in trows if f(r, "empirical") > f(r, "analytic") + ATOL]
    bad_int = [r for r in trows if f(r, "empirical") > f(r, "integral_bound") + 1e-6]
    eps = sorted({f(r, "eps") for r in lrows}) == [1.0, 2.0, 3.0] == sorted({f(r, "eps") for r in trows})
    ok = loc.status == 0 and tr.status == 0 and eps and not (bad_loc or bad_tr or bad_int)
    report("localization and truncation errors", ok,
           f"{len(lrows)}+{len(trows)} rows, violations loc={len(bad_loc)} trunc={len(bad_tr)} "
           f"integral={len(bad_int)}")


def test_product_state(shipped_runs):
    cfg, res, _ = run(shipped_runs, "product_corr.json")
    rows = rows_of(res)
    ts = sorted({f(r, "t") for r in rows})
    bad = [r for r in rows if f(r, "empirical") > f(r, "analytic") + ATOL]
    ok = (res.status == 0 and not bad and cfg.model.geometry.size == [8] and cfg.experiment.state == "neel"
          and np.allclose(ts, np.linspace(0, 1, 11), atol=1e-12))
    report("product-state correlations on the Neel state", ok, f"{len(rows)} rows, {len(bad)} violations")


def test_clustering(shipped_runs):
    cfg, res, _ = run(shipped_runs, "cluster.json")
    rows = rows_of(res)
    meta = meta_of(res)
    bad = []
    for r in rows:
        bound = f(r, "rhs") if r["in_range_flag"] == "true" else f(r, "trivial_bound")
        if f(r, "lhs_abs") > bound + ATOL:
            bad.append(r)
    n_in = sum(r["in_range_flag"] == "true" for r in rows)
    two_path = meta["results"]["two_path_max_difference"]
    ok = (res.status == 0 and not bad and cfg.model.staggered_field == 2 and cfg.model.geometry.size == [10]
          and n_in > 0 and two_path <= 1e-10)
    report("ground-state clustering in the gapped chain", ok,
           f"{len(rows)} rows ({n_in} in range), {len(bad)} violations, two-path diff {two_path:.3g}")


def test_kernel_identity(shipped_runs):
    _, res, _ = run(shipped_runs, "kernel_identity.json")
    rows = rows_of(res)
    worst = max(f(r, "abs_diff") for r in rows)
    ok = res.status == 0 and len(rows) == 27 and worst < 1e-8
    report("Gaussian kernel identity", ok, f"27-point grid, max |lhs-rhs|={worst:.3g}")


def test_hastings_invariants(shipped_runs):
    cfg, res, seconds = run(shipped_runs, "lsm_run.json")
    m = meta_of(res)["results"]
    with open(os.path.join(os.path.dirname(res.csv_path), "lsm_run.run.json")) as fh:
        extra = json.load(fh)
    L = cfg.model.geometry.size[0]
    ok = (res.status == 0
          and math.isclose(m["alpha"], m["gap"] / L, rel_tol=1e-12) and m["t_cut"] == L / 2
          and m["max_antihermitian_defect"] < 1e-10 and m["max_norm_drift"] < 1e-6
          and m["isospectral_deviation"] < 1e-9 and m["fd_generator_error"] < 1e-5 and m["fd_theta"] == 0.3
          and extra["variational_gap_bound"] >= m["gap"]
          and m["half_step_overlap_change"] < 1e-4 and seconds < 300)
    report("quasi-adiabatic pipeline invariants", ok,
           f"defect={m['max_antihermitian_defect']:.3g} drift={m['max_norm_drift']:.3g} "
           f"iso={m['isospectral_deviation']:.3g} fd={m['fd_generator_error']:.3g} "
           f"bound={extra['variational_gap_bound']:.6g}>=gap={m['gap']:.6g} "
           f"half-step={m['half_step_overlap_change']:.3g} runtime={seconds:.0f}s")


def test_symmetry_identities():
    half = SpinModelSpec(Geometry("ring", (8,)), spin=0.5)
    one = SpinModelSpec(Geometry("ring", (8,)), spin=1.0)
    u_half = np.array_equal(column_rotation(half, 3, 2 * math.pi), -np.eye(256))
    u_one = np.array_equal(column_rotation(one, 3, 2 * math.pi), np.eye(6561))
    T = translation_unitary(half)
    t_twist = np.array_equal(twisted_translation(half, 2 * math.pi, 0.0), -T)
    comm = 0.0
    for theta in np.linspace(0, 2 * math.pi, 9):
        H = assemble_hamiltonian(twisted_hamiltonian(half, TwistSpec(8, 0, theta, -theta)))
        Tt = twisted_translation(half, theta, -theta)
        comm = max(comm, operator_norm(Tt @ H - H @ Tt))
    ok = u_half and u_one and t_twist and comm < 1e-10
    report("twist symmetry identities", ok,
           f"U(2pi)=-1:{u_half} U(2pi)=+1 (spin 1):{u_one} T(2pi,0)=-T:{t_twist} max commutator {comm:.3g}")


def test_determinism(shipped_runs):
    _, (a, b) = shipped_runs
    names = sorted(os.listdir(a))
    differ = [n for n in names if open(a / n, "rb").read() != open(b / n, "rb").read()]
    statuses = [r.status for _, rs, _ in shipped_runs[0].values() for r in rs]
    ok = names == sorted(os.listdir(b)) and not differ and len(names) >= 2 * len(shipped_runs[0])
    report("byte-identical reruns of every shipped config", ok,
           f"{len(names)} files compared, {len(differ)} differ, statuses {sorted(set(statuses))}")
