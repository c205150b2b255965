from __future__ import annotations

import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from locbound import Geometry, SpinModel, SpinModelSpec, heisenberg_preset  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(ROOT, "configs")


def chain_model(n, spin=0.5, h=0.0, periodic=False):
    spec = SpinModelSpec(Geometry("ring" if periodic else "path", (n,)), spin=spin, staggered_field=h)
    return SpinModel(heisenberg_preset(spec)), spec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def shipped_configs():
    return sorted(f for f in os.listdir(CONFIG_DIR) if f.endswith(".json"))


@pytest.fixture(scope="session")
def shipped_runs(tmp_path_factory):
    """Every shipped config run twice into separate directories.

    ``out[name] = (cfg, [result_a, result_b], seconds_of_first_run)``.
    """
    from locbound.harness import parse_config, run_experiment

    out = {}
    dirs = [tmp_path_factory.mktemp("run_a"), tmp_path_factory.mktemp("run_b")]
    for name in shipped_configs():
        with open(os.path.join(CONFIG_DIR, name)) as fh:
            cfg = parse_config(fh.read())
        start = time.perf_counter()
        results = [run_experiment(cfg, out_dir=str(dirs[0]))]
        elapsed = time.perf_counter() - start
        results.append(run_experiment(cfg, out_dir=str(dirs[1])))
        out[name] = (cfg, results, elapsed)
    return out, dirs
