"""Independent brute-force references, written without the package's matrix code."""

import itertools
import math

import numpy as np

KAPPA = math.e / (math.e - 1)
C = 2 * (1 + math.e)


def chain_couplings(n, alpha, j0=1.0):
    return [[0.0 if y == z else j0 / abs(y - z) ** alpha for z in range(n)] for y in range(n)]


def chain_lambdas(n, alpha, chi, j0=1.0):
    """(lambda_sr, lambda_chi) as explicit maximal row sums."""
    sr = max(sum(j0 / abs(y - z) ** alpha for z in range(n) if 0 < abs(y - z) <= chi) for y in range(n))
    lr = max(sum(j0 / abs(y - z) ** alpha for z in range(n) if abs(y - z) > chi) for y in range(n))
    return sr, lr


def f_entry(d, R, alpha):
    return 1.0 if d <= 6 * R else (6 * R / d) ** alpha


def k_entry(d, R, chi):
    return 1.0 if d <= 2 * R else math.exp(-(d - 2 * R) / (2 * chi))


def chain_g(n, R, alpha):
    """max over (z1, z3) of sum_z2 F F / (R F) by triple loops."""
    f = [[f_entry(abs(a - b), R, alpha) for b in range(n)] for a in range(n)]
    best = 0.0
    for z1 in range(n):
        for z3 in range(z1, n):
            s = math.fsum(f[z1][z2] * f[z2][z3] for z2 in range(n))
            best = max(best, s / (R * f[z1][z3]))
    return best


def nested_series(K, J, a, i, j, chunk=200_000):
    """sum over y1, z1, ..., ya, za of K(i,y1) J(y1,z1) K(z1,y2) ... J(ya,za) K(za,j).

    Leading indices are looped in Python; the remaining ones are an explicit
    broadcast product (no matrix multiplication), summed with fsum.
    """
    K, J = np.asarray(K, float), np.asarray(J, float)
    n = K.shape[0]
    n_idx = 2 * a
    inner = n_idx
    while inner > 0 and n**inner > chunk:
        inner -= 1
    outer = n_idx - inner
    total = []
    for head in itertools.product(range(n), repeat=outer):
        # factor from the fixed leading indices
        w = K[i, head[0]] if outer else None
        for k in range(1, outer):
            m = J if k % 2 == 1 else K
            w = w * m[head[k - 1], head[k]]
        shape = (n,) * inner
        prod = np.ones(shape)
        for k in range(outer, n_idx):
            m = J if k % 2 == 1 else K
            axis = k - outer
            if k == 0:
                vec = K[i]
            elif k - 1 < outer:
                vec = m[head[k - 1]]
            else:
                prod = prod * m.reshape((1,) * (axis - 1) + (n, n) + (1,) * (inner - axis - 1))
                continue
            prod = prod * vec.reshape((1,) * axis + (n,) + (1,) * (inner - axis - 1))
        last = K[:, j]
        if inner:
            prod = prod * last.reshape((1,) * (inner - 1) + (n,))
            total.append(math.fsum(prod.ravel()) * (1.0 if w is None else w))
        else:
            total.append(w * last[head[-1]])
    return math.fsum(total)


def paper_bound(r, t, chi, v, lam_chi, g, alpha, D=1):
    R = chi * v * t
    v_chi = g * 4 * KAPPA**3 * C**2 * R**D * lam_chi
    return 2 * C * KAPPA * (math.exp(v * t - r / chi) + 2 * KAPPA * math.exp(v_chi * t) * (R / r) ** alpha)
