"""Hot loops over time-sorted competing-risks data.

Each kernel exists twice: a scalar loop compiled with numba and a vectorised
numpy twin. The public names at the bottom dispatch on ``_accel.USE_NUMBA``;
the two variants must agree to rounding, which the test suite checks.

All kernels expect records sorted by time (ascending) and take per-record
weights so that bootstrap resamples can be expressed as multiplicity counts
over the original ordering without re-sorting. ``kind`` is 0 for censored, 1
for the AE of interest and 2 for any competing event.
"""

import numpy as np

from ._accel import USE_NUMBA, optional_njit

#: Column layout of :func:`cr_summary` output.
SUMMARY_COLUMNS = (
    "n",
    "ae_events",
    "ce_events",
    "persontime",
    "km_survival",
    "cif_ae",
    "cif_ce",
    "allcause_survival",
)


@optional_njit(cache=True)
def _cr_summary_numba(time, kind, weights, tau):
    nrep, n = weights.shape
    out = np.zeros((nrep, 8))
    for b in range(nrep):
        w = weights[b]
        total = 0.0
        for i in range(n):
            total += w[i]
        at_risk = total
        surv = 1.0
        km = 1.0
        cif_ae = 0.0
        cif_ce = 0.0
        n_ae = 0.0
        n_ce = 0.0
        ptime = 0.0
        i = 0
        while i < n:
            t = time[i]
            d_ae = 0.0
            d_ce = 0.0
            grp = 0.0
            j = i
            while j < n and time[j] == t:
                wj = w[j]
                grp += wj
                if kind[j] == 1:
                    d_ae += wj
                elif kind[j] == 2:
                    d_ce += wj
                j += 1
            ptime += grp * min(t, tau)
            if t <= tau:
                n_ae += d_ae
                n_ce += d_ce
                d_all = d_ae + d_ce
                if d_all > 0.0 and at_risk > 0.0:
                    cif_ae += surv * d_ae / at_risk
                    cif_ce += surv * d_ce / at_risk
                    surv *= 1.0 - d_all / at_risk
                    km *= 1.0 - d_ae / at_risk
            at_risk -= grp
            i = j
        out[b, 0] = total
        out[b, 1] = n_ae
        out[b, 2] = n_ce
        out[b, 3] = ptime
        out[b, 4] = km
        out[b, 5] = cif_ae
        out[b, 6] = cif_ce
        out[b, 7] = surv
    return out


def _group_starts(time):
    return np.flatnonzero(np.r_[True, time[1:] != time[:-1]])


def _safe_ratio(num, den):
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _cr_summary_numpy(time, kind, weights, tau):
    nrep, n = weights.shape
    out = np.zeros((nrep, 8))
    if n == 0:
        out[:, 4] = 1.0
        out[:, 7] = 1.0
        return out
    starts = _group_starts(time)
    utime = time[starts]
    is_ae = kind == 1
    is_ce = kind == 2
    grp = np.add.reduceat(weights, starts, axis=1)
    d_ae = np.add.reduceat(weights * is_ae, starts, axis=1)
    d_ce = np.add.reduceat(weights * is_ce, starts, axis=1)
    at_risk = np.cumsum(grp[:, ::-1], axis=1)[:, ::-1]

    # groups after tau contribute nothing to the curves
    upto = utime <= tau
    d_ae = d_ae * upto
    d_ce = d_ce * upto
    surv = np.cumprod(1.0 - _safe_ratio(d_ae + d_ce, at_risk), axis=1)
    surv_before = np.hstack([np.ones((nrep, 1)), surv[:, :-1]])
    haz_ae = _safe_ratio(d_ae, at_risk)
    haz_ce = _safe_ratio(d_ce, at_risk)

    out[:, 0] = weights.sum(axis=1)
    out[:, 1] = d_ae.sum(axis=1)
    out[:, 2] = d_ce.sum(axis=1)
    out[:, 3] = grp @ np.minimum(utime, tau)
    out[:, 4] = np.prod(1.0 - haz_ae, axis=1)
    out[:, 5] = (surv_before * haz_ae).sum(axis=1)
    out[:, 6] = (surv_before * haz_ce).sum(axis=1)
    out[:, 7] = surv[:, -1]
    return out


@optional_njit(cache=True)
def _cox_tables_numba(time, event, group, weight):
    n = time.shape[0]
    y_exp = 0.0
    y_ctl = 0.0
    for i in range(n):
        if group[i] == 1:
            y_exp += weight[i]
        else:
            y_ctl += weight[i]
    # at most n distinct event times
    d = np.zeros(n)
    d_exp = np.zeros(n)
    r_exp = np.zeros(n)
    r_ctl = np.zeros(n)
    m = 0
    i = 0
    while i < n:
        t = time[i]
        de = 0.0
        dx = 0.0
        ge = 0.0
        gc = 0.0
        j = i
        while j < n and time[j] == t:
            wj = weight[j]
            if group[j] == 1:
                ge += wj
            else:
                gc += wj
            if event[j]:
                de += wj
                if group[j] == 1:
                    dx += wj
            j += 1
        if de > 0.0:
            d[m] = de
            d_exp[m] = dx
            r_exp[m] = y_exp
            r_ctl[m] = y_ctl
            m += 1
        y_exp -= ge
        y_ctl -= gc
        i = j
    return d[:m].copy(), d_exp[:m].copy(), r_exp[:m].copy(), r_ctl[:m].copy()


def _cox_tables_numpy(time, event, group, weight):
    if time.shape[0] == 0:
        empty = np.zeros(0)
        return empty, empty.copy(), empty.copy(), empty.copy()
    starts = _group_starts(time)
    w_exp = weight * (group == 1)
    w_ctl = weight * (group != 1)
    ev = weight * event
    d = np.add.reduceat(ev, starts)
    d_exp = np.add.reduceat(ev * (group == 1), starts)
    r_exp = np.cumsum(np.add.reduceat(w_exp, starts)[::-1])[::-1]
    r_ctl = np.cumsum(np.add.reduceat(w_ctl, starts)[::-1])[::-1]
    keep = d > 0
    return d[keep], d_exp[keep], r_exp[keep], r_ctl[keep]


@optional_njit(cache=True)
def _resample_counts_numba(idx, n):
    nrep, m = idx.shape
    out = np.zeros((nrep, n))
    for b in range(nrep):
        for k in range(m):
            out[b, idx[b, k]] += 1.0
    return out


def _resample_counts_numpy(idx, n):
    nrep = idx.shape[0]
    flat = (idx + n * np.arange(nrep)[:, None]).ravel()
    return np.bincount(flat, minlength=nrep * n).reshape(nrep, n).astype(np.float64)


def cr_summary(time, kind, weights, tau):
    """Competing-risks summaries at ``tau`` for each row of ``weights``.

    Returns an array of shape ``(len(weights), 8)`` laid out as
    :data:`SUMMARY_COLUMNS`.
    """
    time = np.ascontiguousarray(time, dtype=np.float64)
    kind = np.ascontiguousarray(kind, dtype=np.int8)
    weights = np.ascontiguousarray(np.atleast_2d(weights), dtype=np.float64)
    if USE_NUMBA:
        return _cr_summary_numba(time, kind, weights, float(tau))
    return _cr_summary_numpy(time, kind, weights, float(tau))


def cox_tables(time, event, group, weight):
    """Event counts and arm-wise risk-set sizes at each distinct event time.

    Returns ``(d, d_exp, at_risk_exp, at_risk_ctl)``.
    """
    time = np.ascontiguousarray(time, dtype=np.float64)
    event = np.ascontiguousarray(event, dtype=np.bool_)
    group = np.ascontiguousarray(group, dtype=np.int8)
    weight = np.ascontiguousarray(weight, dtype=np.float64)
    if USE_NUMBA:
        return _cox_tables_numba(time, event, group, weight)
    return _cox_tables_numpy(time, event, group, weight)


def resample_counts(idx, n):
    """Multiplicity of each of ``n`` records in every row of ``idx``."""
    idx = np.ascontiguousarray(np.atleast_2d(idx), dtype=np.int64)
    if USE_NUMBA:
        return _resample_counts_numba(idx, int(n))
    return _resample_counts_numpy(idx, int(n))
