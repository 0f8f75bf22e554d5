"""Smoke test for the cordscan Python extension.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/cordscan-*.whl
"""

import math
import random

import cordscan


def scheme():
    rng = random.Random(3)
    bvals, bvecs = [0.0] * 6, [[0.0, 0.0, 0.0]] * 6
    for _ in range(30):
        v = [rng.gauss(0, 1) for _ in range(3)]
        n = math.sqrt(sum(x * x for x in v))
        bvals.append(900.0)
        bvecs.append([x / n for x in v])
    return bvals, bvecs


def check_models():
    bvals, bvecs = scheme()
    n = [0.0, 0.6, 0.8]
    sig = cordscan.predict_ballstick(0.2, 1.1e-3, n, bvals, bvecs)
    assert len(sig) == 36 and sig[0] == 1.0
    fit = cordscan.fit_ballstick([500.0 * s for s in sig], bvals, bvecs)
    assert abs(fit["f"] - 0.2) < 1e-6, fit
    assert abs(fit["d"] - 1.1e-3) < 1e-9, fit
    assert abs(fit["s0"] - 500.0) < 1e-9, fit
    assert abs(abs(sum(a * b for a, b in zip(fit["n"], n))) - 1.0) < 1e-9, fit
    dti = cordscan.fit_dti([500.0 * s for s in sig], bvals, bvecs)
    assert abs(dti["md"] - (dti["ad"] + 2 * dti["rd"]) / 3) < 1e-15
    assert 0.0 < dti["fa"] < 1.0


def check_stats():
    assert abs(cordscan.t_cdf(0.0, 5.0) - 0.5) < 1e-15
    assert abs(cordscan.t_cdf(1.0, 1.0) - 0.75) < 1e-14
    assert abs(cordscan.ptukey(3.5, 3, 10.0) - 0.9228966891615896) < 1e-8
    r = cordscan.welch([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0, 10.0])
    assert 0.0 < r["p"] < 1.0 and r["t"] < 0.0


def check_classify():
    assert cordscan.roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    rng = random.Random(1)
    x = [[rng.gauss(0, 1)] for _ in range(200)] + [[rng.gauss(1, 1)] for _ in range(200)]
    y = [0] * 200 + [1] * 200
    a = cordscan.repeated_split_auc(x, y, n_splits=100, seed=5)
    b = cordscan.repeated_split_auc(x, y, n_splits=100, seed=5)
    assert a == b
    assert abs(a["auc_mean"] - 0.7602) < 0.05, a


def check_phantom():
    c = cordscan.phantom_counts('{"dims": [16, 16, 7], "cord_radius": 6.0, '
                                '"voxel_size": [1.0, 1.0, 2.0], '
                                '"wm_annulus": {"inner": 2.0, "outer": 6.0}}', seed=1)
    assert c["dims"][:3] == [16, 16, 7]
    assert sum(v for _, v in c["level_voxels"]) > 0


if __name__ == "__main__":
    check_models()
    check_stats()
    check_classify()
    check_phantom()
    print(f"cordscan {cordscan.__version__}: python smoke test passed")
