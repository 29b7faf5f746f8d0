"""Regenerate src/etacurv/_cone_constants.py by brute-force cone scans.

Two tables are produced:

* INTERP_C0[(n, k)]: a positive constant valid in the interpolation bound
      sigma_{k-1} >= c0 * sigma_k^{1-1/(k-1)} * sigma_1^{1/(k-1)}   on Gamma_k,
  for 2 <= k <= n <= 6.  The bound is scale-invariant (both sides are
  homogeneous of degree k-1), so sampling directions suffices.  We scan
  10^6 cone samples per (n, k) drawn from boxes of varying negativity so the
  cone boundary region is probed, record the minimum observed ratio, and
  store observed_min * 0.99.  The 1% slack keeps fresh-seed re-sampling in
  the test battery from dipping below the stored constant.
  For k = 2 the ratio is identically 1 (the bound degenerates to
  sigma_1 >= sigma_1), which the scan confirms.

* DELTA0_OBSERVED_MIN_SHARE[n]: the observed minimum of
      f_j / sum_i f_i   over Gamma samples having kappa_j < 0,
  recorded next to the implemented constant 1/(n(n-1)) for documentation.
  (For n = 2 the cone is the positive quadrant and the event is empty.)

Run from the repository root:  python tools/gen_cone_constants.py
Runtime is a couple of minutes; the output file is committed so normal
installs never need to run this.
"""

import sys
from pathlib import Path

import numpy as np

SRC = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC))

from etacurv.cones import complementary_products, lambda_of, sigma_all  # noqa: E402

SAMPLES = 1_000_000
SEED = 20240817
OUT = SRC / "etacurv" / "_cone_constants.py"


def gamma_k_directions(rng, count, n, k):
    """Sample Gamma_k points from boxes with several negativity levels."""
    chunks = []
    # lo=0 probes the positive orthant, larger negativity pushes toward the
    # cone boundary where the ratio minimum lives.
    los = [0.0, -0.3, -0.6, -1.0, -1.5]
    per = count // len(los) + 1
    for lo in los:
        got = 0
        while got < per:
            cand = rng.uniform(lo, 3.0, size=(4 * per, n))
            s = sigma_all(cand)
            keep = np.all(s[:, 1 : k + 1] > 0.0, axis=-1)
            cand = cand[keep]
            chunks.append(cand)
            got += cand.shape[0]
    return np.concatenate(chunks)[:count]


def scan_interp(rng, n, k):
    kappa = gamma_k_directions(rng, SAMPLES, n, k)
    s = sigma_all(kappa)
    s1, skm1, sk = s[:, 1], s[:, k - 1], s[:, k]
    ratio = skm1 / (sk ** (1.0 - 1.0 / (k - 1)) * s1 ** (1.0 / (k - 1)))
    return float(ratio.min())


def scan_delta0(rng, n):
    lam = rng.uniform(0.02, 4.0, size=(4 * SAMPLES, n))
    kappa = lam.sum(axis=-1, keepdims=True) / (n - 1) - lam
    neg = kappa.min(axis=-1) < 0.0
    kappa = kappa[neg][:SAMPLES]
    if kappa.shape[0] == 0:
        return None
    lamv = lambda_of(kappa)
    P = complementary_products(lamv)
    f_i = P.sum(axis=-1, keepdims=True) - P
    total = f_i.sum(axis=-1)
    # minimum share over the negative entries only
    share = np.where(kappa < 0.0, f_i / total[:, None], np.inf).min(axis=-1)
    return float(share.min())


def main():
    rng = np.random.default_rng(SEED)
    interp = {}
    for n in range(2, 7):
        for k in range(2, n + 1):
            raw = scan_interp(rng, n, k)
            interp[(n, k)] = (raw, raw * 0.99)
            print(f"interp (n={n}, k={k}): observed_min={raw:.9f} stored={raw * 0.99:.9f}")

    delta0 = {}
    for n in range(3, 7):
        raw = scan_delta0(rng, n)
        delta0[n] = raw
        print(f"delta0 share n={n}: observed_min={raw:.9f} implemented={1.0 / (n * (n - 1)):.9f}")

    lines = [
        '"""Constants produced by tools/gen_cone_constants.py; do not edit by hand.',
        "",
        f"Scan: {SAMPLES} cone samples per entry, seed {SEED}.",
        "INTERP_C0 stores observed_min * 0.99 (comment shows the raw minimum).",
        '"""',
        "",
        "INTERP_C0 = {",
    ]
    for (n, k), (raw, stored) in sorted(interp.items()):
        lines.append(f"    ({n}, {k}): {stored!r},  # observed min {raw!r}")
    lines.append("}")
    lines.append("")
    lines.append("# Observed minimum of f_j / sum(f_i) over Gamma samples with kappa_j < 0,")
    lines.append("# per dimension; the implemented bound constant is 1/(n(n-1)).")
    lines.append("DELTA0_OBSERVED_MIN_SHARE = {")
    for n, raw in sorted(delta0.items()):
        lines.append(f"    {n}: {raw!r},")
    lines.append("}")
    lines.append("")
    OUT.write_text("\n".join(lines))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
