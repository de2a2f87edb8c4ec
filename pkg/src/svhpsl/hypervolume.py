"""Dominance filtering, exact hypervolume (2 and 3 objectives) and greedy
hypervolume-improvement batch selection.

All objectives are minimized. Points that do not strictly dominate the
reference point are clipped out before any volume is measured.
"""

import numpy as np

TIE_TOL = 1e-12


def dominates(a, b):
    """True if ``a`` Pareto-dominates ``b`` (no worse everywhere, not equal)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a <= b) and np.any(a != b))


def non_dominated(points, return_index=False):
    """Maximal non-dominated subset of ``points``.

    Exact duplicates are collapsed to their first occurrence. The output keeps
    the input order of the surviving rows.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(1, -1) if P.size else P.reshape(0, 0)
    n = P.shape[0]
    if n == 0:
        idx = np.zeros(0, dtype=int)
        return (P, idx) if return_index else P

    _, first = np.unique(P, axis=0, return_index=True)
    candidates = np.sort(first)
    Q = P[candidates]
    if Q.shape[1] == 2:
        # after sorting by (f1, f2), a row survives iff its f2 beats every earlier f2
        order = np.lexsort((Q[:, 1], Q[:, 0]))
        f2 = Q[order, 1]
        prev_min = np.minimum.accumulate(np.concatenate([[np.inf], f2[:-1]]))
        dominated = np.empty(len(Q), dtype=bool)
        dominated[order] = ~(f2 < prev_min)
    else:
        dominated = np.zeros(len(Q), dtype=bool)
        for start in range(0, len(Q), 256):
            block = Q[start:start + 256]
            # block row j is dominated if some row i is <= everywhere and < somewhere
            le = np.all(Q[:, None, :] <= block[None, :, :], axis=2)
            lt = np.any(Q[:, None, :] < block[None, :, :], axis=2)
            dominated[start:start + 256] = np.any(le & lt, axis=0)
    idx = candidates[~dominated]
    if return_index:
        return P[idx], idx
    return P[idx]


def _clip_to_ref(points, ref):
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return np.zeros((0, len(ref)))
    P = P.reshape(-1, len(ref))
    return P[np.all(P < ref, axis=1)]


def _staircase(P):
    """Non-dominated rows of a clipped 2-D set, sorted by ascending f1."""
    order = np.lexsort((P[:, 1], P[:, 0]))
    P = P[order]
    keep = P[:, 1] < np.minimum.accumulate(np.concatenate([[np.inf], P[:-1, 1]]))
    return P[keep]


def _hv2d(P, ref):
    if len(P) == 0:
        return 0.0
    S = _staircase(P)
    right = np.append(S[1:, 0], ref[0])
    return float(np.sum((right - S[:, 0]) * (ref[1] - S[:, 1])))


def _hv3d(P, ref):
    if len(P) == 0:
        return 0.0
    P = P[np.argsort(P[:, 2], kind="stable")]
    z = np.append(P[:, 2], ref[2])
    volume = 0.0
    for k in range(len(P)):
        depth = z[k + 1] - z[k]
        if depth > 0:
            volume += _hv2d(P[: k + 1, :2], ref[:2]) * depth
    return float(volume)


def hv(front, ref):
    """Hypervolume dominated by ``front`` and bounded by ``ref``.

    Supports two and three objectives. Returns 0.0 for an empty effective
    front.
    """
    ref = np.asarray(ref, dtype=float)
    m = ref.shape[0]
    P = _clip_to_ref(front, ref)
    if m == 2:
        return _hv2d(P, ref)
    if m == 3:
        return _hv3d(P, ref)
    raise ValueError(f"exact hypervolume supports 2 or 3 objectives, got {m}")


def hvi(candidates, front, ref):
    """Hypervolume gained by adding ``candidates`` to ``front``."""
    ref = np.asarray(ref, dtype=float)
    C = np.asarray(candidates, dtype=float).reshape(-1, ref.shape[0])
    F = np.asarray(front, dtype=float).reshape(-1, ref.shape[0])
    base = hv(F, ref)
    return max(hv(np.vstack([F, C]), ref) - base, 0.0)


def _single_hvi_2d(C, F, ref):
    """Exact HVI of each row of ``C`` taken alone against ``F`` (2 objectives).

    The part of a candidate's box already covered by ``F`` equals the
    hypervolume of ``F`` pushed up to the candidate, componentwise; pushing
    keeps the staircase ordered, so all candidates are handled at once.
    """
    out = np.zeros(len(C))
    inside = np.all(C < ref, axis=1)
    if not np.any(inside):
        return out
    Ci = C[inside]
    box = (ref[0] - Ci[:, 0]) * (ref[1] - Ci[:, 1])
    F = _clip_to_ref(F, ref)
    if len(F) == 0:
        out[inside] = box
        return out
    S = _staircase(F)
    X = np.maximum(S[None, :, 0], Ci[:, 0:1])
    Y = np.maximum(S[None, :, 1], Ci[:, 1:2])
    right = np.concatenate([X[:, 1:], np.full((len(Ci), 1), ref[0])], axis=1)
    covered = np.sum((right - X) * (ref[1] - Y), axis=1)
    out[inside] = np.maximum(box - covered, 0.0)
    return out


def _single_hvi(C, F, ref):
    if len(ref) == 2:
        return _single_hvi_2d(C, F, ref)
    base = hv(F, ref)
    out = np.zeros(len(C))
    for i, c in enumerate(C):
        if np.all(c < ref):
            out[i] = max(hv(np.vstack([F, c]), ref) - base, 0.0)
    return out


def select_indices(candidate_Fs, front, ref, b):
    """Indices picked by sequential greedy HVI maximization.

    Each round takes the candidate with the largest incremental HVI against
    ``front`` plus the points already picked; ties go to the lowest index.
    Once every remaining candidate adds zero volume, the rest of the batch is
    filled by the candidate furthest (max-min Euclidean distance in objective
    space) from the points already picked.
    """
    C = np.asarray(candidate_Fs, dtype=float)
    ref = np.asarray(ref, dtype=float)
    m = ref.shape[0]
    C = C.reshape(-1, m)
    B = C.shape[0]
    if b > B:
        raise ValueError(f"cannot select b={b} from {B} candidates")
    if b < 0:
        raise ValueError("b must be non-negative")
    current = np.asarray(front, dtype=float).reshape(-1, m)
    # gains below this are rounding residue, not real volume
    boxes = np.prod(np.clip(ref - C, 0.0, None), axis=1) if B else np.zeros(0)
    zero_tol = TIE_TOL * max(1.0, float(boxes.max()) if B else 1.0)
    picked = []
    remaining = np.ones(B, dtype=bool)
    for _ in range(b):
        gains = np.full(B, -np.inf)
        idx = np.flatnonzero(remaining)
        gains[idx] = _single_hvi(C[idx], current, ref)
        top = gains.max()
        # near-equal gains count as ties, resolved to the lowest index
        best = int(np.flatnonzero(gains >= top - TIE_TOL * max(1.0, abs(top)))[0])
        if gains[best] <= zero_tol:
            best = _farthest(C, remaining, C[picked] if picked else current)
        picked.append(best)
        remaining[best] = False
        current = np.vstack([current, C[best]])
    return picked


def _farthest(C, remaining, anchors):
    idx = np.flatnonzero(remaining)
    if len(anchors) == 0:
        return int(idx[0])
    d = np.linalg.norm(C[idx, None, :] - anchors[None, :, :], axis=2).min(axis=1)
    return int(idx[np.argmax(d)])


def greedy_select(candidate_xs, candidate_Fs, front, ref, b):
    """Pick ``b`` decision vectors from the candidates by greedy HVI."""
    idx = select_indices(candidate_Fs, front, ref, b)
    X = np.asarray(candidate_xs, dtype=float)
    return X[idx]
