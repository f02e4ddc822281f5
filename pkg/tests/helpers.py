"""Shared test oracles, independent of the library code paths they check."""

import numpy as np


def tensor_matrix(K, s):
    """Full antisymmetric 4x4 representation of the (K, s) split."""
    K1, K2, K3 = K
    s1, s2, s3 = s
    return np.array([
        [0.0,  K1,  K2,  K3],
        [-K1, 0.0,  s3, -s2],
        [-K2, -s3, 0.0,  s1],
        [-K3,  s2, -s1, 0.0],
    ])


def boost_matrix(v, n):
    """4x4 boost from the rest frame to the lab, velocity v along unit n."""
    g = 1.0 / np.sqrt(1.0 - v * v)
    lam = np.zeros((4, 4))
    lam[0, 0] = g
    for i in range(3):
        lam[0, i + 1] = lam[i + 1, 0] = g * v * n[i]
        for j in range(3):
            lam[i + 1, j + 1] = (1.0 if i == j else 0.0) + (g - 1.0) * n[i] * n[j]
    return lam


def matrix_boost_oracle(K, s, v, n):
    """Lab-frame (K, s) via the explicit matrix transform Lam L Lam^T.

    Batched: K, s of shape (..., 3); v of shape (...); n of shape (..., 3).
    """
    K = np.atleast_2d(K)
    s = np.atleast_2d(s)
    v = np.atleast_1d(v)
    n = np.atleast_2d(n)
    m = K.shape[0]
    g = 1.0 / np.sqrt(1.0 - v * v)
    lam = np.zeros((m, 4, 4))
    lam[:, 0, 0] = g
    eye = np.eye(3)
    lam[:, 0, 1:] = lam[:, 1:, 0] = (g * v)[:, None] * n
    lam[:, 1:, 1:] = eye[None] + (g - 1.0)[:, None, None] * n[:, :, None] * n[:, None, :]
    L = np.zeros((m, 4, 4))
    L[:, 0, 1:] = K
    L[:, 1:, 0] = -K
    L[:, 1, 2] = s[:, 2]
    L[:, 2, 1] = -s[:, 2]
    L[:, 2, 3] = s[:, 0]
    L[:, 3, 2] = -s[:, 0]
    L[:, 3, 1] = s[:, 1]
    L[:, 1, 3] = -s[:, 1]
    lab = np.einsum("mab,mbc,mdc->mad", lam, L, lam)
    K_lab = lab[:, 0, 1:]
    s_lab = np.stack([lab[:, 2, 3], lab[:, 3, 1], lab[:, 1, 2]], axis=1)
    return K_lab, s_lab, lab


def merged_chi2(counts, expected, min_expected=10.0):
    """Chi-square of counts vs expected with adjacent bins merged until
    every group's expected sum reaches min_expected. Returns (chi2, groups)."""
    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(expected, dtype=float)
    groups, start, acc = [], 0, 0.0
    for i, e in enumerate(expected):
        acc += e
        if acc >= min_expected:
            groups.append((start, i + 1))
            start, acc = i + 1, 0.0
    if start < len(expected):
        if groups:
            groups[-1] = (groups[-1][0], len(expected))
        else:
            groups.append((start, len(expected)))
    chi2 = 0.0
    for a, b in groups:
        o, e = counts[a:b].sum(), expected[a:b].sum()
        chi2 += (o - e) ** 2 / e
    return chi2, len(groups)


def gauss_legendre_mean(fn, weight, lo, hi, order=200):
    """Weighted mean of fn under weight over [lo, hi] by fixed-order
    Gauss-Legendre quadrature; independent of adaptive-quadrature paths."""
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    wt = weight(t)
    return float(np.sum(w * fn(t) * wt) / np.sum(w * wt))
