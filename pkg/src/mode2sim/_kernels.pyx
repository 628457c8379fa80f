# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot kernels; semantics match ``_kernels_py`` exactly.

``decode_slot`` has a fast path for single-subchannel transmissions (the
default config) that aggregates power per subchannel instead of scanning
transmission pairs. Gain matrices are receiver-major: ``gain_rx[j, i]`` is
the power of i's signal at receiver j, with a zero diagonal.
"""

import numpy as np

from libc.stdlib cimport free, malloc

BACKEND = "cython"

DUPLEX_HD = 0
DUPLEX_SBFD = 1
DUPLEX_IBFD = 2
DECODER_MPPD = 0
DECODER_IPD = 1

MISS_NONE = 0
MISS_HALF_DUPLEX = 1
MISS_PSCCH = 2
MISS_PSSCH = 3
MISS_SELF = 4


def decode_slot(
    tx_src,
    tx_sub0,
    tx_width,
    gain_rx,
    double noise_1sub_mw,
    double pscch_thr_lin,
    double pssch_thr_lin,
    int duplex,
    int decoder,
    int num_subchannels,
    bint want_detail=True,
):
    cdef const int[:] src = np.ascontiguousarray(tx_src, dtype=np.int32)
    cdef const int[:] sub0 = np.ascontiguousarray(tx_sub0, dtype=np.int32)
    cdef const int[:] width = np.ascontiguousarray(tx_width, dtype=np.int32)
    cdef const double[:, ::1] g = np.ascontiguousarray(gain_rx, dtype=np.float64)
    cdef Py_ssize_t n_tx = src.shape[0]
    cdef Py_ssize_t n = g.shape[0]

    pscch_arr = np.zeros((n_tx, n), dtype=np.uint8)
    pssch_arr = np.zeros((n_tx, n), dtype=np.uint8)
    if want_detail:
        miss_arr = np.zeros((n_tx, n), dtype=np.uint8)
        sinr_arr = np.full((n_tx, n), np.nan)
    else:
        miss_arr = np.zeros((0, 0), dtype=np.uint8)
        sinr_arr = np.zeros((0, 0))
    cdef unsigned char[:, ::1] pscch = pscch_arr
    cdef unsigned char[:, ::1] pssch = pssch_arr
    cdef unsigned char[:, ::1] miss = miss_arr
    cdef double[:, ::1] sinr_out = sinr_arr

    if n_tx == 0:
        if want_detail:
            return pscch_arr, pssch_arr, miss_arr, sinr_arr
        return pscch_arr, pssch_arr, None, None

    cdef bint all_width1 = True
    cdef Py_ssize_t t
    for t in range(n_tx):
        if width[t] != 1:
            all_width1 = False
            break

    if all_width1:
        _decode_w1(src, sub0, g, noise_1sub_mw, pscch_thr_lin, pssch_thr_lin,
                   duplex, decoder, num_subchannels, want_detail,
                   pscch, pssch, miss, sinr_out)
    else:
        _decode_general(src, sub0, width, g, noise_1sub_mw, pscch_thr_lin,
                        pssch_thr_lin, duplex, decoder, want_detail,
                        pscch, pssch, miss, sinr_out)
    if want_detail:
        return pscch_arr, pssch_arr, miss_arr, sinr_arr
    return pscch_arr, pssch_arr, None, None


cdef void _decode_w1(
    const int[:] src, const int[:] sub0, const double[:, ::1] g,
    double noise_1sub_mw, double pscch_thr_lin, double pssch_thr_lin,
    int duplex, int decoder, int num_subchannels, bint want_detail,
    unsigned char[:, ::1] pscch, unsigned char[:, ::1] pssch,
    unsigned char[:, ::1] miss, double[:, ::1] sinr_out,
) except *:
    cdef Py_ssize_t n_tx = src.shape[0]
    cdef Py_ssize_t n = g.shape[0]
    cdef int nc = num_subchannels

    cdef double* dbuf = <double*> malloc((n_tx + 2 * nc) * sizeof(double))
    cdef int* champ_src = <int*> malloc(nc * sizeof(int))
    cdef unsigned char* ubuf = <unsigned char*> malloc(n_tx + nc)
    if dbuf == NULL or champ_src == NULL or ubuf == NULL:
        free(dbuf); free(champ_src); free(ubuf)
        raise MemoryError()
    cdef double* pw = dbuf
    cdef double* chan_sum = dbuf + n_tx
    cdef double* champ_p = dbuf + n_tx + nc
    cdef unsigned char* recv = ubuf
    cdef unsigned char* own = ubuf + n_tx

    cdef const double* row
    cdef Py_ssize_t j, t
    cdef int c, sj
    cdef bint j_transmits
    cdef double p, s
    try:
        for j in range(n):
            row = &g[j, 0]
            for t in range(n_tx):
                c = sub0[t]
                chan_sum[c] = 0.0
                own[c] = 0
                champ_p[c] = 0.0
                champ_src[c] = -1

            j_transmits = False
            for t in range(n_tx):
                p = row[src[t]]           # zero when src[t] == j
                pw[t] = p
                chan_sum[sub0[t]] += p
                if src[t] == j:
                    j_transmits = True
                    own[sub0[t]] = 1

            for t in range(n_tx):
                c = sub0[t]
                sj = src[t]
                if sj == j:
                    recv[t] = 0
                    if want_detail:
                        miss[t, j] = MISS_SELF
                    continue
                if j_transmits and (duplex == DUPLEX_HD or
                                    (duplex == DUPLEX_SBFD and own[c])):
                    recv[t] = 0
                    if want_detail:
                        miss[t, j] = MISS_HALF_DUPLEX
                    continue
                recv[t] = 1
                p = pw[t]
                if champ_src[c] == -1 or p > champ_p[c] or (p == champ_p[c] and sj < champ_src[c]):
                    champ_p[c] = p
                    champ_src[c] = sj

            for t in range(n_tx):
                if not recv[t]:
                    continue
                c = sub0[t]
                p = pw[t]
                s = p / (noise_1sub_mw + chan_sum[c] - p)
                if want_detail:
                    sinr_out[t, j] = s
                if decoder == DECODER_IPD:
                    if p / noise_1sub_mw < pscch_thr_lin:
                        if want_detail:
                            miss[t, j] = MISS_PSCCH
                        continue
                else:
                    if champ_src[c] != src[t] or s < pscch_thr_lin:
                        if want_detail:
                            miss[t, j] = MISS_PSCCH
                        continue
                pscch[t, j] = 1
                if s >= pssch_thr_lin:
                    pssch[t, j] = 1
                elif want_detail:
                    miss[t, j] = MISS_PSSCH
    finally:
        free(dbuf)
        free(champ_src)
        free(ubuf)


cdef void _decode_general(
    const int[:] src, const int[:] sub0, const int[:] width, const double[:, ::1] g,
    double noise_1sub_mw, double pscch_thr_lin, double pssch_thr_lin,
    int duplex, int decoder, bint want_detail,
    unsigned char[:, ::1] pscch, unsigned char[:, ::1] pssch,
    unsigned char[:, ::1] miss, double[:, ::1] sinr_out,
):
    cdef Py_ssize_t n_tx = src.shape[0]
    cdef Py_ssize_t n = g.shape[0]

    # pairwise overlap fractions: share of t2's power landing in t1's band
    frac_arr = np.zeros((n_tx, n_tx))
    cdef double[:, ::1] frac = frac_arr
    cdef Py_ssize_t t1, t2
    cdef int lo, hi
    for t1 in range(n_tx):
        for t2 in range(n_tx):
            if t1 == t2:
                continue
            lo = sub0[t1] if sub0[t1] > sub0[t2] else sub0[t2]
            hi = sub0[t1] + width[t1]
            if sub0[t2] + width[t2] < hi:
                hi = sub0[t2] + width[t2]
            if hi > lo:
                frac[t1, t2] = <double>(hi - lo) / <double>width[t2]

    pw_a = np.zeros(n_tx)
    recv_a = np.zeros(n_tx, dtype=np.uint8)
    sinr_a = np.zeros(n_tx)
    cdef double[:] pw = pw_a
    cdef unsigned char[:] recv = recv_a
    cdef double[:] sinr = sinr_a

    cdef Py_ssize_t j, t, u
    cdef bint j_transmits, overlaps_own, dominated
    cdef double interf, p_t, q, s
    for j in range(n):
        j_transmits = False
        for t in range(n_tx):
            if src[t] == j:
                j_transmits = True
                break

        for t in range(n_tx):
            pw[t] = g[j, src[t]]
            if src[t] == j:
                recv[t] = 0
                if want_detail:
                    miss[t, j] = MISS_SELF
                continue
            if j_transmits and duplex == DUPLEX_HD:
                recv[t] = 0
                if want_detail:
                    miss[t, j] = MISS_HALF_DUPLEX
                continue
            if j_transmits and duplex == DUPLEX_SBFD:
                overlaps_own = False
                for u in range(n_tx):
                    if src[u] == j:
                        lo = sub0[t] if sub0[t] > sub0[u] else sub0[u]
                        hi = sub0[t] + width[t]
                        if sub0[u] + width[u] < hi:
                            hi = sub0[u] + width[u]
                        if hi > lo:
                            overlaps_own = True
                            break
                if overlaps_own:
                    recv[t] = 0
                    if want_detail:
                        miss[t, j] = MISS_HALF_DUPLEX
                    continue
            recv[t] = 1

        for t in range(n_tx):
            if not recv[t]:
                continue
            interf = 0.0
            for u in range(n_tx):
                if frac[t, u] > 0.0:
                    interf += frac[t, u] * g[j, src[u]]
            s = pw[t] / (width[t] * noise_1sub_mw + interf)
            sinr[t] = s
            if want_detail:
                sinr_out[t, j] = s

        for t in range(n_tx):
            if not recv[t]:
                continue
            if decoder == DECODER_IPD:
                if pw[t] / (width[t] * noise_1sub_mw) < pscch_thr_lin:
                    if want_detail:
                        miss[t, j] = MISS_PSCCH
                    continue
            else:
                dominated = False
                p_t = pw[t]
                for u in range(n_tx):
                    if u == t or not recv[u] or frac[t, u] == 0.0:
                        continue
                    q = pw[u]
                    if q > p_t or (q == p_t and src[u] < src[t]):
                        dominated = True
                        break
                if dominated or sinr[t] < pscch_thr_lin:
                    if want_detail:
                        miss[t, j] = MISS_PSCCH
                    continue
            pscch[t, j] = 1
            if sinr[t] >= pssch_thr_lin:
                pssch[t, j] = 1
            elif want_detail:
                miss[t, j] = MISS_PSSCH


def build_busy_map(
    records,
    int receiver,
    long long window_start,
    int window_len,
    int width_tx,
    int n_pos,
    gain_dbm_col,
):
    """Records are (slot, packed) pairs; packed is int32 (n_tx, 7 + n_ues) with
    columns [src, slot1, sub1, w1, slot2, sub2, w2, pscch_ok...]."""
    busy_arr = np.full((window_len, n_pos), -np.inf)
    cdef double[:, ::1] busy = busy_arr
    cdef const double[:] gcol = np.ascontiguousarray(gain_dbm_col)

    cdef const int[:, ::1] pk
    cdef Py_ssize_t t, n_tx
    cdef int r, p, p_lo, p_hi, base
    cdef long long rs, window_end
    cdef double rsrp
    window_end = window_start + window_len

    for rec in records:
        pk = rec[1]
        n_tx = pk.shape[0]
        for t in range(n_tx):
            if pk[t, 7 + receiver] == 0:
                continue
            rsrp = gcol[pk[t, 0]]
            for r in range(2):
                base = 1 + 3 * r
                rs = pk[t, base]
                if rs < window_start or rs >= window_end:
                    continue
                p_lo = pk[t, base + 1] - width_tx + 1
                if p_lo < 0:
                    p_lo = 0
                p_hi = pk[t, base + 1] + pk[t, base + 2] - 1
                if p_hi > n_pos - 1:
                    p_hi = n_pos - 1
                for p in range(p_lo, p_hi + 1):
                    if rsrp > busy[rs - window_start, p]:
                        busy[rs - window_start, p] = rsrp
    return busy_arr


def free_map_at(busy_map, double p_th_dbm):
    """Free mask, per-slot free counts, and total free for a threshold."""
    cdef const double[:, ::1] busy = busy_map
    cdef Py_ssize_t n_s = busy.shape[0]
    cdef Py_ssize_t n_p = busy.shape[1]
    free_arr = np.empty((n_s, n_p), dtype=bool)
    counts_arr = np.empty(n_s, dtype=np.int64)
    cdef unsigned char[:, ::1] fr = free_arr.view(np.uint8)
    cdef long long[:] counts = counts_arr
    cdef Py_ssize_t s, p
    cdef long long c, total = 0
    for s in range(n_s):
        c = 0
        for p in range(n_p):
            if busy[s, p] <= p_th_dbm:
                fr[s, p] = 1
                c += 1
            else:
                fr[s, p] = 0
        counts[s] = c
        total += c
    return free_arr, counts_arr, total
