"""Independent reference implementations used only by the tests.

Each oracle takes the slow-but-obvious route (explicit loops in
float64, dense grid search) so it shares no code path with the package.
"""

import numpy as np


def naive_tcdc_forward(x, weights, bias, stride, padding, theta):
    """Nine nested loops, straight from the operator definition.

    y(p0) = sum_k w(k) x(p0 + k)  +  theta * ( -x(center) * sum_adj w )
    where sum_adj runs over kernel positions outside the central
    temporal slice, accumulated per input channel.
    """
    n, c = x.shape[:2]
    kt, kh, kw = weights.shape[2:]
    st, sh, sw = stride
    pt, ph, pw = padding
    xp = np.pad(
        x.astype(np.float64),
        ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)),
    )
    w = weights.astype(np.float64)
    b = bias.astype(np.float64)
    out_c = w.shape[0]
    to = (x.shape[2] + 2 * pt - kt) // st + 1
    ho = (x.shape[3] + 2 * ph - kh) // sh + 1
    wo = (x.shape[4] + 2 * pw - kw) // sw + 1
    tc = kt // 2
    y = np.zeros((n, out_c, to, ho, wo))
    for ni in range(n):
        for o in range(out_c):
            for t in range(to):
                for i in range(ho):
                    for j in range(wo):
                        acc = b[o]
                        for ci in range(c):
                            for a in range(kt):
                                for bb in range(kh):
                                    for cc in range(kw):
                                        acc += (
                                            w[o, ci, a, bb, cc]
                                            * xp[ni, ci, t * st + a,
                                                 i * sh + bb, j * sw + cc]
                                        )
                            w_adj = w[o, ci].sum() - w[o, ci, tc].sum()
                            acc -= theta * w_adj * xp[
                                ni, ci, t * st + tc,
                                i * sh + kh // 2, j * sw + kw // 2,
                            ]
                        y[ni, o, t, i, j] = acc
    return y


def fd_grad(f, x, eps=1e-3):
    """Central finite differences of scalar f() with respect to x,
    mutating x in place element by element."""
    g = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * eps)
    return g


def hinge_objective_ref(w, means, delta):
    """0.5||w||^2 + delta * sum_{i>j} max(0, 1 - w.(I_i - I_j))."""
    w = np.asarray(w, dtype=np.float64).ravel()
    flat = [np.asarray(m, dtype=np.float64).ravel() for m in means]
    total = 0.5 * float(w @ w)
    k = len(flat)
    for j in range(k):
        for i in range(j + 1, k):
            total += delta * max(0.0, 1.0 - float(w @ (flat[i] - flat[j])))
    return total


def grid_search_1d(means, delta, lo=-20.0, hi=20.0, num=40001):
    """Dense scan of the scalar hinge objective; returns (w*, F(w*))."""
    grid = np.linspace(lo, hi, num)
    flat = np.array([float(np.asarray(m).ravel()[0]) for m in means])
    k = len(flat)
    diffs = np.array([flat[i] - flat[j]
                      for j in range(k) for i in range(j + 1, k)])
    fs = 0.5 * grid ** 2
    if diffs.size:
        hinge = np.maximum(0.0, 1.0 - grid[:, None] * diffs[None, :])
        fs = fs + delta * hinge.sum(axis=1)
    idx = int(fs.argmin())
    return float(grid[idx]), float(fs[idx])


def grid_search_nd(means, delta, lo=-6.0, hi=6.0, num=41):
    """Dense scan over a small n-dim cube; returns (w*, F(w*)).

    Only usable for dim <= 3 (num**dim evaluations).
    """
    dim = np.asarray(means[0]).size
    axes = [np.linspace(lo, hi, num)] * dim
    best_w, best_f = None, np.inf
    flat = np.stack([np.asarray(m, np.float64).ravel() for m in means])
    k = len(flat)
    pairs = np.stack([flat[i] - flat[j]
                      for j in range(k) for i in range(j + 1, k)])
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dim)
    margins = mesh @ pairs.T
    fs = 0.5 * (mesh ** 2).sum(1) + delta * np.maximum(
        0.0, 1.0 - margins
    ).sum(1)
    idx = int(fs.argmin())
    return mesh[idx], float(fs[idx])


def naive_prefix_means(frames):
    out = []
    acc = np.zeros_like(np.asarray(frames[0], dtype=np.float64))
    for t, f in enumerate(frames, start=1):
        acc = acc + np.asarray(f, dtype=np.float64)
        out.append(acc / t)
    return out
