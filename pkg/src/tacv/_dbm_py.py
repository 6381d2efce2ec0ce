"""Pure-Python kernels for difference-bound matrices.

Matrices are flat row-major lists of packed bounds.  A bound on the
difference x_i - x_j is packed into one integer so that comparison and
addition stay single-int operations in the closure loop:

    packed = 2*value + 1   for x_i - x_j <= value   (weak)
    packed = 2*value       for x_i - x_j <  value   (strict)

Smaller packed value = tighter bound.  INF is a strict sentinel larger
than any finite packed bound; additions saturate at INF.

The compiled twin in _dbm_c.pyx implements `closure` and `close1` with
identical semantics; tacv.zones picks one of the two at import time.
"""

INF = 1 << 60

ZERO = 1  # packed (0, weak)


def pack(value, weak):
    return 2 * value + (1 if weak else 0)


def unpack(b):
    """Return (value, weak) for a finite packed bound."""
    return (b >> 1), bool(b & 1)


def badd(a, b):
    if a >= INF or b >= INF:
        return INF
    return a + b - ((a & 1) | (b & 1))


def closure(m, n):
    """Floyd-Warshall closure in place.  Returns False iff the zone is empty.

    On a nonempty zone the result is the canonical (all-pairs tightest)
    form with a weak-zero diagonal.
    """
    for k in range(n):
        kn = k * n
        for i in range(n):
            ik = m[i * n + k]
            if ik >= INF:
                continue
            row = i * n
            for j in range(n):
                kj = m[kn + j]
                if kj >= INF:
                    continue
                s = ik + kj - ((ik & 1) | (kj & 1))
                if s < m[row + j]:
                    m[row + j] = s
    for i in range(n):
        if m[i * n + i] < ZERO:
            return False
        m[i * n + i] = ZERO
    return True


def close1(m, n, a, b):
    """Re-close after entry (a, b) was tightened.  Returns False iff empty.

    O(n^2): every path can now be improved only through the new edge.
    """
    ab = m[a * n + b]
    if ab >= INF:
        return m[a * n + a] >= ZERO
    for i in range(n):
        ia = m[i * n + a]
        if ia >= INF:
            continue
        iab = ia + ab - ((ia & 1) | (ab & 1))
        row = i * n
        for j in range(n):
            bj = m[b * n + j]
            if bj >= INF:
                continue
            s = iab + bj - ((iab & 1) | (bj & 1))
            if s < m[row + j]:
                m[row + j] = s
    for i in range(n):
        if m[i * n + i] < ZERO:
            return False
        m[i * n + i] = ZERO
    return True


def subsumes(a, b, nn):
    """True iff every entry of `a` is at least the matching entry of `b`."""
    for i in range(nn):
        if a[i] < b[i]:
            return False
    return True
