"""Deliberately plain reference implementations used as test oracles.

Nothing here imports detector internals; the factor graph, alphabets and
candidate rules are rebuilt from first principles.
"""

import itertools

import numpy as np


def naive_mpa(y, h, entries, N0, iters=6, augment_zero=True):
    """Textbook sum-product MPA on one slot, written with explicit loops.

    ``entries`` is the raw (J, M, K) codebook array (already scaled).
    Returns decisions in slot convention (0 = zero entry, m = symbol m).
    """
    J, M, K = entries.shape
    alpha = [list(entries[j]) for j in range(J)]
    if augment_zero:
        alpha = [[np.zeros(K)] + a for a in alpha]
    A = len(alpha[0])
    users_of = [[j for j in range(J) if np.any(entries[j, :, k] != 0)] for k in range(K)]
    res_of = [[k for k in range(K) if j in users_of[k]] for j in range(J)]

    # likelihood tables, one entry per joint choice of the resource's users
    like = {}
    for k in range(K):
        combos = list(itertools.product(range(A), repeat=len(users_of[k])))
        metric = []
        for combo in combos:
            s = sum(h[j, k] * alpha[j][a][k] for j, a in zip(users_of[k], combo))
            metric.append(-abs(y[k] - s) ** 2 / N0)
        metric = np.array(metric)
        like[k] = (combos, np.exp(metric - metric.max()))

    V = {(j, k): np.full(A, 1.0 / A) for j in range(J) for k in res_of[j]}
    U = {(k, j): np.full(A, 1.0 / A) for j in range(J) for k in res_of[j]}
    for _ in range(iters):
        for k in range(K):
            combos, w = like[k]
            users = users_of[k]
            for p, j in enumerate(users):
                msg = np.zeros(A)
                for combo, wc in zip(combos, w):
                    prod = wc
                    for q, i in enumerate(users):
                        if q != p:
                            prod *= V[(i, k)][combo[q]]
                    msg[combo[p]] += prod
                U[(k, j)] = msg / msg.sum()
        for j in range(J):
            for k in res_of[j]:
                v = np.ones(A)
                for l in res_of[j]:
                    if l != k:
                        v = v * U[(l, j)]
                V[(j, k)] = v / v.sum()
    decisions = []
    for j in range(J):
        belief = np.ones(A)
        for k in res_of[j]:
            belief = belief * U[(k, j)]
        decisions.append(int(np.argmax(belief)) + (0 if augment_zero else 1))
    return decisions


def hand_candidates_4_2(decisions, rows, M):
    """Case-by-case repair sets for (n, t) = (4, 2), read off the case prose.

    ``rows`` are the LUT rows as 0-based slot tuples. Returns a set of slot
    vectors; None for reliable patterns.
    """
    D = {i for i, d in enumerate(decisions) if d}
    if tuple(sorted(D)) in rows:
        return None
    out = set()

    def emit(row, fresh):
        for syms in itertools.product(range(1, M + 1), repeat=len(fresh)):
            v = [0] * 4
            for i in row:
                v[i] = decisions[i]
            for i, s in zip(fresh, syms):
                v[i] = s
            out.add(tuple(v))

    if len(D) == 4:  # Case 0: deactivate two slots, every row, symbols retained
        for row in rows:
            emit(row, [])
    elif len(D) == 3:  # Case 1: deactivate one slot; rows inside D
        for row in rows:
            if set(row) <= D:
                emit(row, [])
    elif len(D) == 2:  # Case 2: swap one slot; rows sharing exactly one slot
        for row in rows:
            if len(set(row) & D) == 1:
                emit(row, [i for i in row if i not in D])
    elif len(D) == 1:  # Case 3: activate one more slot
        for row in rows:
            if D <= set(row):
                emit(row, [i for i in row if i not in D])
    else:  # Case 4: nothing known
        for row in rows:
            emit(row, list(row))
    return out


def brute_force_pml(r, contribs):
    """Enumerate every joint choice with itertools; ties go to the first tuple."""
    best, best_d = None, np.inf
    for combo in itertools.product(*[range(len(c)) for c in contribs]):
        s = sum(c[i] for c, i in zip(contribs, combo))
        d = float(np.sum(np.abs(r - s) ** 2))
        if d < best_d:
            best, best_d = combo, d
    return best, best_d
