"""Pure-numpy slot kernels: the fallback backend.

Same semantics as the compiled extension in ``_kernels.pyx``; the two are
tested for agreement. ``decode_slot`` evaluates one slot's transmissions at
every receiver; ``build_busy_map`` folds decoded reservations from recent
slots into a per-(slot, position) max-RSRP map for resource selection.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

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
    noise_1sub_mw,
    pscch_thr_lin,
    pssch_thr_lin,
    duplex,
    decoder,
    num_subchannels,
    want_detail=True,
):
    """Decode one slot at all receivers.

    ``gain_rx[j, i]`` is the linear received power of i's signal at receiver
    j, with a zero diagonal so a transmitter never interferes with itself.
    Returns (pscch_ok, pssch_ok, miss, sinr_lin), each shaped
    (n_tx, n_receivers); sinr_lin is the linear data-plane SINR, NaN where
    not receivable. With ``want_detail=False`` the last two are None.
    """
    tx_src = np.asarray(tx_src, dtype=np.int32)
    tx_sub0 = np.asarray(tx_sub0, dtype=np.int32)
    tx_width = np.asarray(tx_width, dtype=np.int32)
    n_tx = tx_src.shape[0]
    n = gain_rx.shape[0]

    p = gain_rx.T[tx_src, :]                                 # (n_tx, n) mW
    lo = np.maximum(tx_sub0[:, None], tx_sub0[None, :])
    hi = np.minimum(
        (tx_sub0 + tx_width)[:, None], (tx_sub0 + tx_width)[None, :]
    )
    ov = np.maximum(0, hi - lo)                              # shared subchannels
    w_frac = ov / tx_width[None, :].astype(np.float64)       # share of column-tx power
    np.fill_diagonal(w_frac, 0.0)
    interf = w_frac @ p                                      # (n_tx, n) mW

    noise = tx_width.astype(np.float64) * noise_1sub_mw
    snr = p / noise[:, None]
    sinr = p / (noise[:, None] + interf)

    self_mask = tx_src[:, None] == np.arange(n, dtype=np.int32)[None, :]
    is_tx = np.zeros(n, dtype=bool)
    is_tx[tx_src] = True
    if duplex == DUPLEX_HD:
        blocked = is_tx[None, :] & ~self_mask
    elif duplex == DUPLEX_SBFD:
        occ = np.zeros((n, num_subchannels), dtype=bool)
        for t in range(n_tx):
            occ[tx_src[t], tx_sub0[t] : tx_sub0[t] + tx_width[t]] = True
        blocked = np.stack(
            [occ[:, tx_sub0[t] : tx_sub0[t] + tx_width[t]].any(axis=1) for t in range(n_tx)]
        )
        blocked &= ~self_mask
    else:
        blocked = np.zeros((n_tx, n), dtype=bool)

    receivable = ~self_mask & ~blocked

    if decoder == DECODER_IPD:
        pscch = receivable & (snr >= pscch_thr_lin)
    else:
        overlap_adj = ov > 0
        np.fill_diagonal(overlap_adj, False)
        pa = p[:, None, :]
        pt = p[None, :, :]
        stronger = (pa > pt) | (
            (pa == pt) & (tx_src[:, None] < tx_src[None, :])[:, :, None]
        )
        dominated = (
            overlap_adj[:, :, None] & receivable[:, None, :] & stronger
        ).any(axis=0)
        pscch = receivable & ~dominated & (sinr >= pscch_thr_lin)

    pssch = pscch & (sinr >= pssch_thr_lin)

    if not want_detail:
        return pscch.astype(np.uint8), pssch.astype(np.uint8), None, None

    miss = np.zeros((n_tx, n), dtype=np.uint8)
    miss[self_mask] = MISS_SELF
    miss[blocked] = MISS_HALF_DUPLEX
    miss[receivable & ~pscch] = MISS_PSCCH
    miss[pscch & ~pssch] = MISS_PSSCH

    sinr_lin = np.where(receivable, sinr, np.nan)

    return (
        pscch.astype(np.uint8),
        pssch.astype(np.uint8),
        miss,
        sinr_lin,
    )


def build_busy_map(
    records,
    receiver,
    window_start,
    window_len,
    width_tx,
    n_pos,
    gain_dbm_col,
):
    """Max RSRP of decoded reservations overlapping each (slot, position).

    ``records`` is a sequence of per-slot (slot, packed) pairs; ``packed`` is
    an int32 matrix (n_tx, 7 + n_ues) with columns
    [src, slot1, sub1, w1, slot2, sub2, w2, pscch_ok per receiver], a missing
    reservation marked by slot -1. A reservation counts iff this receiver
    decoded the carrying transmission's control message; reservations outside
    the window are skipped, so stale records are harmless. Cells with no
    reservation stay -inf.
    """
    busy = np.full((window_len, n_pos), -np.inf)
    window_end = window_start + window_len
    for _slot, pk in records:
        for t in np.flatnonzero(pk[:, 7 + receiver]):
            rsrp = gain_dbm_col[pk[t, 0]]
            for base in (1, 4):
                rs = pk[t, base]
                if rs < window_start or rs >= window_end:
                    continue
                p_lo = max(0, pk[t, base + 1] - width_tx + 1)
                p_hi = min(n_pos - 1, pk[t, base + 1] + pk[t, base + 2] - 1)
                if p_lo > p_hi:
                    continue
                row = busy[rs - window_start]
                np.maximum(row[p_lo : p_hi + 1], rsrp, out=row[p_lo : p_hi + 1])
    return busy


def free_map_at(busy_map, p_th_dbm):
    """Free mask, per-slot free counts, and total free for a threshold."""
    free = busy_map <= p_th_dbm
    counts = free.sum(axis=1)
    return free, counts, int(counts.sum())
