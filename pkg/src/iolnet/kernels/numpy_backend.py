"""Vectorized numpy implementations of the hot numeric kernels.

Each function processes a whole batch of eyes at once. The math mirrors
the scalar reference in :mod:`iolnet.optics` / :mod:`iolnet.network`
sample by sample; the numba backend carries the same formulas as
explicit loops. Cross-agreement of all three is enforced in the tests.

Batch layout: ``X`` is (n, 6) float64 with columns
[al, acd_iol, cct, k_max, k_min, ref_target]; packed constants are
``consts = (n_v, n_c, n_l, gullstrand, d, ref_sign)`` and
``lens = (mode, lt_const, edge_thickness, semi_aperture, n_l)`` with
mode 0 = constant thickness, 1 = biconvex sagitta.
"""

import numpy as np

NAME = "numpy"

LEAKY_ALPHA = 0.1
R_MIN_MM = 5.5
SEAM_MM = 6.5


def lens_thickness(r, lens):
    mode, lt_const, edge, aper, _ = lens
    if mode == 0:
        return np.full_like(r, lt_const)
    a2 = aper * aper
    return edge + 2.0 * a2 / (r + np.sqrt(r * r - a2))


def lens_thickness_dr(r, lens):
    mode, lt_const, edge, aper, _ = lens
    if mode == 0:
        return np.full_like(r, lt_const), np.zeros_like(r)
    a2 = aper * aper
    s = np.sqrt(r * r - a2)
    lt = edge + 2.0 * a2 / (r + s)
    return lt, 2.0 * (1.0 - r / s)


def m00(r, X, consts, lens):
    """Focusing residual for each (radius, eye) pair."""
    nv, nc, nl, g, d, sign = consts
    al, acd, cct, kmax, kmin, rt = X.T
    k = 0.5 * (kmax + kmin)
    lt = lens_thickness(r, lens)
    pcd = al - cct - acd - lt
    a = sign * rt
    h = 1.0 + d * a
    a = ((1.0 - nc) / (nc * k)) * h + a / nc
    h = h + cct * a
    a = ((nc - nv) / (nv * g * k)) * h + (nc / nv) * a
    h = h + acd * a
    a = ((nv - nl) / (nl * r)) * h + (nv / nl) * a
    h = h + lt * a
    a = (-(nl - nv) / (nv * r)) * h + (nl / nv) * a
    return h + pcd * a


def m00_dr(r, X, consts, lens):
    """Residual and its derivative with respect to the radius."""
    nv, nc, nl, g, d, sign = consts
    al, acd, cct, kmax, kmin, rt = X.T
    k = 0.5 * (kmax + kmin)
    lt, dlt = lens_thickness_dr(r, lens)
    pcd = al - cct - acd - lt
    a = sign * rt
    h = 1.0 + d * a
    a = ((1.0 - nc) / (nc * k)) * h + a / nc
    h = h + cct * a
    a = ((nc - nv) / (nv * g * k)) * h + (nc / nv) * a
    h = h + acd * a
    # r enters from here on; track (dh, da) = d(h, a)/dr
    c1 = (nv - nl) / (nl * r)
    da = (-c1 / r) * h
    a = c1 * h + (nv / nl) * a
    dh = dlt * a + lt * da
    h = h + lt * a
    c2 = -(nl - nv) / (nv * r)
    da = (-c2 / r) * h + c2 * dh + (nl / nv) * da
    a = c2 * h + (nl / nv) * a
    f = h + pcd * a
    df = dh - dlt * a + pcd * da
    return f, df


def power(r, consts, lens):
    """Thick lens power of the implant for each radius."""
    nv = consts[0]
    nl = lens[4]
    lt = lens_thickness(r, lens)
    dn = nl - nv
    return dn * (2.0 / r - dn * lt / (nl * r * r))


def power_dr(r, consts, lens):
    nv = consts[0]
    nl = lens[4]
    lt, dlt = lens_thickness_dr(r, lens)
    dn = nl - nv
    p = dn * (2.0 / r - dn * lt / (nl * r * r))
    dp = dn * (-2.0 / (r * r)
               - dn * dlt / (nl * r * r)
               + 2.0 * dn * lt / (nl * r * r * r))
    return p, dp


# ---------------------------------------------------------------------------
# MLP forward / backward
# ---------------------------------------------------------------------------

def _forward_cached(w0, b0, w1, b1, w2, b2, shift, scale, X):
    xn = ((X - shift) / scale).T
    z1 = w0 @ xn + b0[:, None]
    h1 = np.where(z1 >= 0, z1, LEAKY_ALPHA * z1)
    z2 = w1 @ h1 + b1[:, None]
    h2 = np.where(z2 >= 0, z2, LEAKY_ALPHA * z2)
    u = (w2 @ h2 + b2[:, None])[0]
    low = u < SEAM_MM
    r_mm = np.where(low, R_MIN_MM + np.exp(np.minimum(u, SEAM_MM) - SEAM_MM), u)
    return r_mm * 1e-3, (xn, z1, h1, z2, h2, u, low)


def predict_radius(w0, b0, w1, b1, w2, b2, shift, scale, X):
    """Predicted radii (meters) for a batch of input vectors."""
    return _forward_cached(w0, b0, w1, b1, w2, b2, shift, scale, X)[0]


def _backward(w1, w2, cache, dloss_dr):
    xn, z1, h1, z2, h2, u, low = cache
    dr_du = np.where(low, np.exp(np.minimum(u, SEAM_MM) - SEAM_MM), 1.0) * 1e-3
    du = dloss_dr * dr_du
    g_w2 = du[None, :] @ h2.T
    g_b2 = np.array([du.sum()])
    dh2 = w2.T @ du[None, :]
    dz2 = dh2 * np.where(z2 >= 0, 1.0, LEAKY_ALPHA)
    g_w1 = dz2 @ h1.T
    g_b1 = dz2.sum(axis=1)
    dh1 = w1.T @ dz2
    dz1 = dh1 * np.where(z1 >= 0, 1.0, LEAKY_ALPHA)
    g_w0 = dz1 @ xn.T
    g_b0 = dz1.sum(axis=1)
    return g_w0, g_b0, g_w1, g_b1, g_w2, g_b2


def physical_loss_grad(w0, b0, w1, b1, w2, b2, shift, scale, X, consts, lens):
    """Mean squared focusing residual and its parameter gradients."""
    r, cache = _forward_cached(w0, b0, w1, b1, w2, b2, shift, scale, X)
    f, df = m00_dr(r, X, consts, lens)
    n = X.shape[0]
    loss = float(np.mean(f * f))
    dloss_dr = 2.0 * f * df / n
    return (loss,) + _backward(w1, w2, cache, dloss_dr)


def power_mse_loss_grad(w0, b0, w1, b1, w2, b2, shift, scale, X, labels,
                        consts, lens):
    """Mean squared power error against labels, with parameter gradients."""
    r, cache = _forward_cached(w0, b0, w1, b1, w2, b2, shift, scale, X)
    p, dp = power_dr(r, consts, lens)
    e = p - labels
    n = X.shape[0]
    loss = float(np.mean(e * e))
    dloss_dr = 2.0 * e * dp / n
    return (loss,) + _backward(w1, w2, cache, dloss_dr)


# ---------------------------------------------------------------------------
# batched root solve
# ---------------------------------------------------------------------------

def solve_radius(X, consts, lens, r_lo, r_hi, tol, max_iter):
    """Safeguarded Newton root solve of the residual, one root per eye.

    Returns ``(radius, residual, iterations, converged)``. Eyes whose
    bracket shows no sign change are flagged unconverged with NaN radius.
    """
    n = X.shape[0]
    lo = np.full(n, r_lo)
    hi = np.full(n, r_hi)
    flo = m00(lo, X, consts, lens)
    fhi = m00(hi, X, consts, lens)
    ok = (flo * fhi) < 0.0
    x = 0.5 * (lo + hi)
    fx, dfx = m00_dr(x, X, consts, lens)
    active = ok.copy()
    iters = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        if not active.any():
            break
        # newton candidate, bisection fallback when it leaves the bracket
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / dfx
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), xn)
        fc, dfc = m00_dr(cand, X, consts, lens)
        # fall back to the midpoint when newton fails to reduce |f|
        retry = active & ~bad & (np.abs(fc) >= np.abs(fx))
        if retry.any():
            mid = 0.5 * (lo + hi)
            cand = np.where(retry, mid, cand)
            fm, dfm = m00_dr(cand, X, consts, lens)
            fc = np.where(retry, fm, fc)
            dfc = np.where(retry, dfm, dfc)
        move_left = flo * fc <= 0.0
        hi = np.where(active & move_left, cand, hi)
        fhi = np.where(active & move_left, fc, fhi)
        lo = np.where(active & ~move_left, cand, lo)
        flo = np.where(active & ~move_left, fc, flo)
        x = np.where(active, cand, x)
        fx = np.where(active, fc, fx)
        dfx = np.where(active, dfc, dfx)
        iters = iters + active.astype(np.int64)
        active = active & ((hi - lo) > tol) & (np.abs(fx) > 1e-15)
    resid = np.abs(fx)
    converged = ok & (resid < 1e-10)
    radius = np.where(ok, x, np.nan)
    return radius, np.where(ok, resid, np.nan), iters, converged
