"""Shared generators for randomized suites.

Instances are built in a planted canonical form — per-node diagonal blocks
with known spectra, block-triangular couplings, an unobservable tail — then
conjugated by a random orthogonal basis change.  The planted data serves as
the oracle for decomposition and synthesis properties.
"""

import numpy as np
import pytest

from distobs import Digraph, Plant


def random_orthogonal(rng, n):
    """Haar-ish random orthogonal matrix via QR with sign fixing."""
    if n == 0:
        return np.zeros((0, 0))
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def rotation_block(rng, d, rmin, rmax):
    """A well-conditioned d-dim block with spectral radius in [rmin, rmax]:
    a scaled rotation for d = 2, a signed scalar for d = 1."""
    r = rng.uniform(rmin, rmax)
    if d == 1:
        return np.array([[r * rng.choice([-1.0, 1.0])]])
    th = rng.uniform(0.15, np.pi - 0.15)
    c, s = np.cos(th), np.sin(th)
    return r * np.array([[c, -s], [s, c]])


def structured_plant(rng, max_nodes=5, max_state=8, block_radius=1.1,
                     unobs_radius=0.9, coupling=0.4):
    """Random multi-sensor plant with planted decomposition structure.

    Returns ``(plant, oracle)`` where ``oracle`` records the planted per-node
    block dimensions (valid for processing order 1..N), the unobservable
    dimension and its exact spectrum, and the basis change used.
    """
    N = int(rng.integers(1, max_nodes + 1))
    dims = [int(rng.integers(0, 3)) for _ in range(N)]
    if sum(dims) == 0:
        dims[int(rng.integers(0, N))] = int(rng.integers(1, 3))
    u_dim = int(rng.integers(0, 3))
    while sum(dims) + u_dim > max_state:
        j = int(rng.integers(0, N))
        if dims[j] > 0:
            dims[j] -= 1
        elif u_dim > 0:
            u_dim -= 1
    if sum(dims) == 0:
        dims[int(rng.integers(0, N))] = 1
    n = sum(dims) + u_dim

    Abar = np.zeros((n, n))
    starts = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    for j in range(N):
        d = dims[j]
        if d == 0:
            continue
        sl = slice(starts[j], starts[j] + d)
        Abar[sl, sl] = rotation_block(rng, d, 0.3, block_radius)
        for l in range(j):
            if dims[l] and rng.random() < 0.5:
                sll = slice(starts[l], starts[l] + dims[l])
                Abar[sl, sll] = coupling * rng.standard_normal((d, dims[l]))
    unobs_eigs = []
    if u_dim:
        slu = slice(n - u_dim, n)
        left = u_dim
        pos = n - u_dim
        while left:
            d = 2 if (left >= 2 and rng.random() < 0.5) else 1
            blk = rotation_block(rng, d, 0.0, unobs_radius)
            Abar[pos:pos + d, pos:pos + d] = blk
            unobs_eigs.extend(np.linalg.eigvals(blk))
            pos += d
            left -= d
        Abar[slu, :n - u_dim] = coupling * rng.standard_normal(
            (u_dim, n - u_dim))

    C_rows = []
    for j in range(N):
        d = dims[j]
        if d == 0:
            C_rows.append(np.zeros((0, n)))
            continue
        sl = slice(starts[j], starts[j] + d)
        # for a scaled-rotation block the conditioning of the observability
        # stack does not depend on the output direction, so a block drawn
        # with a near-degenerate radius/angle combination must itself be
        # redrawn rather than just the output row
        while True:
            c = rng.standard_normal(d)
            c /= np.linalg.norm(c)
            O = np.vstack([
                c @ np.linalg.matrix_power(Abar[sl, sl], k) for k in range(d)
            ])
            if np.linalg.cond(O) <= 10.0:
                break
            Abar[sl, sl] = rotation_block(rng, d, 0.3, block_radius)
        row = np.zeros((1, n))
        row[0, sl] = c
        C_rows.append(row)

    Q = random_orthogonal(rng, n)
    A = Q @ Abar @ Q.T
    C = tuple(r @ Q.T for r in C_rows)
    oracle = {
        "dims": tuple(dims),
        "u_dim": u_dim,
        "n": n,
        "unobs_spectrum": sorted(
            (complex(v) for v in unobs_eigs), key=lambda z: (z.real, z.imag)
        ),
        "basis": Q,
    }
    return Plant(A, C), oracle


def random_strong_graph(rng, n_nodes, extra=2):
    """Strongly connected digraph: a directed cycle through a random node
    permutation plus ``extra`` random chords."""
    perm = list(rng.permutation(np.arange(1, n_nodes + 1)))
    edges = {
        (int(perm[k]), int(perm[(k + 1) % n_nodes]))
        for k in range(n_nodes)
    }
    for _ in range(extra):
        j, i = rng.integers(1, n_nodes + 1, size=2)
        if j != i:
            edges.add((int(j), int(i)))
    return Digraph(n_nodes, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
