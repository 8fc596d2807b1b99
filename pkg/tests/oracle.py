"""Slow reference implementations used to cross-check the library.

Nothing here imports the package.  Cells are ``(column, row)`` tuples,
permutations are dicts, sets are Python sets and every number is a Fraction.
"""

import itertools
from fractions import Fraction


def square_cells(rank):
    n = 2 ** rank
    return [(c, r) for r in range(n) for c in range(n)]


def square_measure(rank):
    return lambda cell: Fraction(1, 4 ** rank)


def discrete_measure(rank, weights):
    return lambda cell: Fraction(weights[cell[1]]) / 2 ** rank


def measure(cells, cell_measure):
    return sum((cell_measure(c) for c in cells), Fraction(0))


def perm_from_labels(rank, cycles):
    """Dict permutation of the square grid from 1-based row-major label cycles."""
    cols = 2 ** rank
    perm = {c: c for c in square_cells(rank)}
    for cyc in cycles:
        cells = [((x - 1) % cols, (x - 1) // cols) for x in cyc]
        for a, b in zip(cells, cells[1:] + cells[:1]):
            perm[a] = b
    return perm


def perm_from_library(p):
    """Read a library permutation into a dict through its public call interface."""
    g = p.geometry
    cells = [(c, r) for r in range(g.rows) for c in range(g.columns)]
    return {c: tuple(p(c)) for c in cells}


def image(perm, cells):
    return {perm[c] for c in cells}


def d_brute(s, t, cell_measure):
    """sup over every subset E of the cells of m(sE ^ tE)."""
    cells = sorted(s)
    best = Fraction(0)
    for k in range(len(cells) + 1):
        for subset in itertools.combinations(cells, k):
            dev = measure(image(s, subset) ^ image(t, subset), cell_measure)
            best = max(best, dev)
    return best


def d_prime(s, t, cell_measure):
    return measure({c for c in s if s[c] != t[c]}, cell_measure)


def fiber_action(perm, n, column, rows):
    out = []
    for j in range(rows):
        c = (column, j)
        for _ in range(n):
            c = perm[c]
        out.append(c[1])
    return tuple(out)


def cond_exp(f, weights, columns):
    """f: dict cell -> Fraction. Returns list over columns."""
    return [
        sum((Fraction(w) * f[(x, i)] for i, w in enumerate(weights)), Fraction(0))
        for x in range(columns)
    ]


def mixing_deviation_sq(perm, f, g, n, weights, columns):
    """||E(T^n f . g|X) - (T')^n E(f|X) E(g|X)||^2 with (T f)(z) = f(T^-1 z)."""
    inv = {v: k for k, v in perm.items()}

    def back(z, times):
        for _ in range(times):
            z = inv[z]
        return z

    ef = cond_exp(f, weights, columns)
    eg = cond_exp(g, weights, columns)
    total = Fraction(0)
    for x in range(columns):
        cross = sum(
            (Fraction(w) * f[back((x, i), n)] * g[(x, i)] for i, w in enumerate(weights)),
            Fraction(0),
        )
        base_x = back((x, 0), n)[0]
        diff = cross - ef[base_x] * eg[x]
        total += diff * diff
    return total / columns


def witness_levels(weights):
    w = [Fraction(x) for x in weights]
    return [-sum(w[1:]) / w[0]] + [Fraction(1)] * (len(w) - 1)


def witness_bound(weights):
    f = witness_levels(weights)
    w = [Fraction(x) for x in weights]
    return min(
        abs(sum(w[j] * f[j] * f[s[j]] for j in range(len(w))))
        for s in itertools.permutations(range(len(w)))
    )
