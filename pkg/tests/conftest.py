import itertools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

HETERO_J = [[0.5, 0.25], [0.25, 0.5]]


def all_configs(sizes):
    """Every spin configuration as a tuple of per-group tuples."""
    n = sum(sizes)
    for flat in itertools.product((-1, 1), repeat=n):
        out, pos = [], 0
        for k in sizes:
            out.append(tuple(flat[pos:pos + k]))
            pos += k
        yield tuple(out)


def literal_energy(config, J, n):
    """-(1/2n) sum over groups and all ordered spin pairs, written out term by term."""
    d = len(config)
    acc = 0.0
    for a in range(d):
        for b in range(d):
            pair_sum = sum(x * y for x in config[a] for y in config[b])
            acc += float(J[a][b]) * pair_sum
    return -acc / (2 * n)


def random_pd(rng, d, scale=1.0):
    A = rng.normal(size=(d, d))
    return scale * (A @ A.T / d + 0.2 * np.eye(d))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def run_cli(workdir, command, cfg, *extra, suffix=".json"):
    """Run the CLI in-process on a config written under ``workdir``; returns (code, out_dir)."""
    import json
    from pathlib import Path

    from curieweiss.cli import main

    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    path = workdir / f"{command}{suffix}"
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    out = workdir / "out"
    return main([command, "--config", str(path), "--out", str(out), *extra]), out


CLI_CONFIGS = {
    "classify": {"spec_version": 1, "point": {"alpha": [0.5, 0.5], "coupling": {"matrix": HETERO_J}}},
    "pmf": {"spec_version": 1, "model": {"sizes": [3, 2], "coupling": {"matrix": HETERO_J}}},
    "lclt": {"spec_version": 1, "point": {"alpha": [0.5, 0.5], "coupling": {"homogeneous": 0.5}},
             "n_sweep": [8, 16, 32]},
    "definetti": {"spec_version": 1, "model": {"sizes": [4, 3], "coupling": {"matrix": HETERO_J}},
                  "n_sweep": [10, 20, 40], "delta": 0.5},
    "bounds": {"spec_version": 1, "m_points": 20, "u_points": 20},
    "mcmc": {"spec_version": 1, "model": {"sizes": [5, 5], "coupling": {"matrix": HETERO_J}},
             "chain": {"samples": 5000, "seed": 12}},
}
