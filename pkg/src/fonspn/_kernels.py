"""Hot loop of the subband adaptive filters.

Both kernels consume zero-padded band signals (see
:func:`fonspn.filterbank.pad_history`) with the direction vectors and
p-power magnitudes already computed elementwise, so the per-update cost is
a handful of length-L dot products plus one power per band.

``adapt_numba`` is the scalar-loop version compiled with numba;
``adapt_numpy`` is the vectorised fallback.  :data:`adapt` is whichever one
``FONSPN_NO_NUMBA`` selects.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit


def _adapt_loop(up, vp, ap, dsub, h0, sign, w, mu, q, eps, div_limit):
    nb, n_frames = dsub.shape
    taps = w.size
    nmsd = np.full(n_frames, np.nan)
    inc = np.empty(taps)
    h0sq = 0.0
    for j in range(taps):
        h0sq += h0[j] * h0[j]
    diverged_at = -1
    for k in range(n_frames):
        t = k * nb
        newest = t + taps - 1
        for j in range(taps):
            inc[j] = 0.0
        for i in range(nb):
            y = 0.0
            norm = 0.0
            for j in range(taps):
                y += up[i, newest - j] * w[j]
                norm += ap[i, newest - j]
            e = dsub[i, k] - y
            den = norm + eps
            if e == 0.0 or den == 0.0:
                continue
            g = math.fabs(e) ** q
            if e < 0.0:
                g = -g
            s = g / den
            for j in range(taps):
                inc[j] += s * vp[i, newest - j]
        msd = 0.0
        for j in range(taps):
            w[j] += mu * inc[j]
            dev = sign[k] * h0[j] - w[j]
            msd += dev * dev
        r = msd / h0sq
        nmsd[k] = r
        if not (r <= div_limit):
            diverged_at = k
            break
    return nmsd, diverged_at


adapt_numba = njit(_adapt_loop)


def adapt_numpy(up, vp, ap, dsub, h0, sign, w, mu, q, eps, div_limit):
    nb, n_frames = dsub.shape
    taps = w.size
    nmsd = np.full(n_frames, np.nan)
    h0sq = float(h0 @ h0)
    diverged_at = -1
    with np.errstate(all="ignore"):
        for k in range(n_frames):
            t = k * nb
            win = slice(t, t + taps)
            x = up[:, win][:, ::-1]
            e = dsub[:, k] - x @ w
            den = ap[:, win].sum(axis=1) + eps
            g = np.where(e == 0.0, 0.0, np.sign(e) * np.abs(e) ** q)
            s = np.where(den == 0.0, 0.0, g / np.where(den == 0.0, 1.0, den))
            w += mu * (s @ vp[:, win][:, ::-1])
            dev = sign[k] * h0 - w
            r = float(dev @ dev) / h0sq
            nmsd[k] = r
            if not (r <= div_limit):
                diverged_at = k
                break
    return nmsd, diverged_at


adapt = adapt_numba if USE_NUMBA else adapt_numpy
BACKEND = "numba" if USE_NUMBA else "numpy"
