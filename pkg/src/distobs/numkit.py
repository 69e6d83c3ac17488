"""Tolerance-aware numerical primitives shared by every other module.

Everything here is deliberately small: SVD-based rank decisions, the
observability split behind all canonical decompositions, eigenvalue clustering
with conjugate fusion, and observer-gain assignment by rank-one deflation on
the dual pair.  All tolerances flow through :class:`ToleranceConfig` so a
single knob set governs rank, clustering, and stability-margin decisions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMatrix, NotObservable, NumericalError, ShapeError

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical tolerances used across the toolkit.

    Attributes
    ----------
    rank_tol : float
        Relative singular-value cutoff for rank decisions: singular values
        below ``rank_tol * max(sigma_max, scale)`` are treated as zero.
    eig_cluster_tol : float
        Absolute distance below which computed eigenvalues are treated as one
        repeated eigenvalue; also the margin that widens the "needs root
        coverage" boundary to ``|lambda| >= 1 - eig_cluster_tol``.
    schur_margin : float
        Stability margin: a spectral radius counts as stable only when it is
        at most ``1 - schur_margin``.
    """

    rank_tol: float = 1e-9
    eig_cluster_tol: float = 1e-7
    schur_margin: float = 1e-6


DEFAULT_TOL = ToleranceConfig()


def as_matrix(M, name="matrix", rows=None, cols=None):
    """Coerce to a finite float 2-D array, checking shape when requested.

    Raises
    ------
    InvalidMatrix
        If the input is not interpretable as a real 2-D array with finite
        entries.
    ShapeError
        If ``rows``/``cols`` are given and do not match.
    """
    try:
        A = np.asarray(M, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidMatrix(f"{name} is not a real matrix: {exc}") from None
    if A.ndim != 2:
        raise InvalidMatrix(f"{name} must be 2-D, got ndim={A.ndim}")
    if A.size and not np.isfinite(A).all():
        raise InvalidMatrix(f"{name} contains NaN or Inf entries")
    if rows is not None and A.shape[0] != rows:
        raise ShapeError(f"{name} must have {rows} rows, got {A.shape[0]}")
    if cols is not None and A.shape[1] != cols:
        raise ShapeError(f"{name} must have {cols} columns, got {A.shape[1]}")
    return A


def as_square(M, name="matrix"):
    """Coerce to a finite square float matrix."""
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be square, got {A.shape[0]}x{A.shape[1]}")
    return A


def matrix_rank(M, tol=None, scale=None):
    """Numerical rank via SVD with a relative cutoff.

    Parameters
    ----------
    M : array_like
        Matrix to rank (real or complex).
    tol : ToleranceConfig, optional
        Source of the relative cutoff ``rank_tol``.
    scale : float, optional
        External magnitude the cutoff should also respect.  A matrix whose
        entries are entirely round-off dust relative to its parent computation
        would otherwise rank by its own (meaningless) largest singular value;
        passing the parent's norm makes such blocks rank 0.
    """
    tol = tol or DEFAULT_TOL
    M = np.asarray(M)
    if M.ndim != 2:
        raise InvalidMatrix(f"rank input must be 2-D, got ndim={M.ndim}")
    if 0 in M.shape:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    cutoff = tol.rank_tol * max(float(s[0]), float(scale or 0.0))
    return int(np.count_nonzero(s > cutoff))


def observability_matrix(A, C):
    """Stack ``[C; CA; ...; C A^(n-1)]``; shape ``(n*r, n)``."""
    A = as_square(A, "A")
    n = A.shape[0]
    C = as_matrix(C, "C", cols=n)
    if C.shape[0] == 0:
        return np.zeros((0, n))
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def is_observable(A, C, tol=None):
    """True iff the observability matrix of ``(A, C)`` has full column rank."""
    A = as_square(A, "A")
    return matrix_rank(observability_matrix(A, C), tol) == A.shape[0]


def obs_canon_decomp(A, C, tol=None, scale=None):
    """Orthogonal split of ``(A, C)`` into observable and unobservable parts.

    Returns an orthogonal ``T`` and the observable dimension ``n_obs`` such
    that, with ``z = T.T @ x`` and blocks of sizes ``(n_obs, n - n_obs)``::

        T.T @ A @ T = [[A_o, 0 ],      C @ T = [C_o, 0]
                       [ * , A_u]]

    ``(A_o, C_o)`` is observable; the trailing columns of ``T`` span the
    unobservable subspace (the kernel of the observability matrix), which is
    invariant under ``A`` — that invariance is what zeroes the upper-right
    block.  ``scale`` feeds the rank cutoff, see :func:`matrix_rank`.
    """
    A = as_square(A, "A")
    n = A.shape[0]
    C = as_matrix(C, "C", cols=n)
    if n == 0:
        return np.zeros((0, 0)), 0
    if C.shape[0] == 0:
        return np.eye(n), 0
    O = observability_matrix(A, C)
    _, s, Vt = np.linalg.svd(O)
    tol = tol or DEFAULT_TOL
    cutoff = tol.rank_tol * max(float(s[0]) if s.size else 0.0, float(scale or 0.0))
    n_obs = int(np.count_nonzero(s > cutoff))
    # Rows of Vt: first n_obs span the row space of O (observable directions),
    # the rest span its kernel.  Columns of T inherit that ordering.
    return Vt.T.copy(), n_obs


def pbh_rank_ok(A, C, lam, tol=None):
    """Rank test: does ``[A - lam*I; C]`` have full column rank?"""
    A = as_square(A, "A")
    n = A.shape[0]
    C = as_matrix(C, "C", cols=n)
    stacked = np.vstack([A - complex(lam) * np.eye(n), C.astype(complex)])
    return matrix_rank(stacked, tol) == n


def pbh_detectable(A, C, lam, tol=None):
    """Detectability of the mode ``lam`` for the pair ``(A, C)``.

    A strictly stable mode (``|lam| < 1``) is detectable by convention; any
    other mode must pass the full-column-rank test on ``[A - lam*I; C]``.
    """
    if abs(complex(lam)) < 1.0:
        return True
    return pbh_rank_ok(A, C, lam, tol)


@dataclass(frozen=True)
class EigenClass:
    """One clustered eigenvalue class of a real matrix.

    ``rep`` is the cluster representative (imaginary part >= 0); for a fused
    conjugate pair, ``dim`` counts both halves, so ``sum(dim) == n`` over all
    classes.  ``geometric`` is ``n - rank(A - rep*I)``.
    """

    rep: complex
    indices: tuple
    dim: int
    geometric: int
    complex_pair: bool


@dataclass(frozen=True)
class EigenInfo:
    """Clustered spectrum of a real square matrix."""

    eigenvalues: np.ndarray
    classes: tuple

    def unstable_classes(self, tol=None):
        """Classes needing root coverage: ``|lambda| >= 1 - eig_cluster_tol``.

        The margin is deliberately conservative — a mode numerically on the
        unit circle is treated as unstable rather than silently trusted to
        decay.
        """
        tol = tol or DEFAULT_TOL
        return tuple(
            k for k, cls in enumerate(self.classes)
            if abs(cls.rep) >= 1.0 - tol.eig_cluster_tol
        )


def _cluster_indices(vals, tol_abs):
    """Union indices of ``vals`` whose pairwise distance is <= tol_abs."""
    m = len(vals)
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(m):
        for j in range(i + 1, m):
            if abs(vals[i] - vals[j]) <= tol_abs:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def eigen_info(A, tol=None):
    """Cluster the spectrum of a real matrix into distinct-eigenvalue classes.

    Computed eigenvalues within ``eig_cluster_tol`` of each other (transitively)
    form one class; a class and its complex conjugate are fused into a single
    class whose representative has a positive imaginary part.  Classes are
    ordered by descending ``|lambda|``, ties by descending real part, then
    ascending imaginary part.
    """
    tol = tol or DEFAULT_TOL
    A = as_square(A, "A")
    n = A.shape[0]
    if n == 0:
        return EigenInfo(np.zeros(0, dtype=complex), ())
    w = np.linalg.eigvals(A)
    raw = _cluster_indices(list(w), tol.eig_cluster_tol)
    # Representative per raw cluster; flatten near-real ones onto the axis.
    clusters = []
    for idx in raw:
        rep = complex(np.mean(w[idx]))
        if abs(rep.imag) <= tol.eig_cluster_tol:
            rep = complex(rep.real, 0.0)
        clusters.append({"rep": rep, "indices": list(idx)})
    # Fuse conjugate pairs.  Real input guarantees a mirror cluster exists.
    fused = []
    used = [False] * len(clusters)
    for i, ci in enumerate(clusters):
        if used[i]:
            continue
        used[i] = True
        if ci["rep"].imag == 0.0:
            fused.append((ci["rep"], ci["indices"], False))
            continue
        target = ci["rep"].conjugate()
        mate = None
        for j in range(i + 1, len(clusters)):
            if not used[j] and abs(clusters[j]["rep"] - target) <= 2 * tol.eig_cluster_tol:
                mate = j
                break
        if mate is None:
            raise NumericalError(
                f"complex eigenvalue cluster near {ci['rep']:.6g} has no "
                "conjugate partner; spectrum clustering is inconsistent"
            )
        used[mate] = True
        rep = ci["rep"] if ci["rep"].imag > 0 else ci["rep"].conjugate()
        fused.append((rep, ci["indices"] + clusters[mate]["indices"], True))
    classes = []
    for rep, indices, is_pair in fused:
        geo = n - matrix_rank(A - rep * np.eye(n), tol, scale=_spec_scale(A))
        classes.append(EigenClass(rep, tuple(sorted(indices)), len(indices), geo, is_pair))
    classes.sort(key=lambda c: (-abs(c.rep), -c.rep.real, c.rep.imag))
    info = EigenInfo(w, tuple(classes))
    if sum(c.dim for c in classes) != n:
        raise NumericalError("eigenvalue classes do not partition the spectrum")
    return info


def _spec_scale(A):
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


def spectral_radius(M):
    """``max |eig(M)|``; 0 for an empty matrix."""
    M = as_square(M, "M")
    if M.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _null_direction(M, x_dim, tol):
    """Pick the null-space element of ``M`` with the largest leading-block part.

    Returns ``(x, w)`` splitting the chosen null vector at ``x_dim``.  Raises
    ``NotObservable`` when every null vector has a (numerically) zero leading
    block — that is exactly the uncontrollability certificate for the pole
    being placed.
    """
    rows, cols = M.shape
    _, s, Vt = np.linalg.svd(M)
    cutoff = tol.rank_tol * (float(s[0]) if s.size else 0.0)
    rank = int(np.count_nonzero(s > cutoff))
    Z = Vt[rank:].conj().T  # columns span the null space
    if Z.shape[1] == 0:
        raise NotObservable("pair has no placement freedom at this pole")
    Zx = Z[:x_dim, :]
    U2, s2, Vt2 = np.linalg.svd(Zx)
    if s2.size == 0 or s2[0] <= max(tol.rank_tol, 1e3 * _EPS):
        raise NotObservable(
            "mode cannot be moved by output injection (pair not observable "
            "at a requested pole)"
        )
    z = Z @ Vt2.conj().T[:, 0]
    return z[:x_dim], z[x_dim:]


def _basis_with_leading(Xcols):
    """Orthonormal basis whose first ``k`` columns span ``Xcols``."""
    m, k = Xcols.shape
    Q, _ = np.linalg.qr(np.hstack([Xcols, np.eye(m)]))
    return Q[:, :m]


def _assign_state_feedback(A, B, poles, tol):
    """Gain K with ``eig(A - B K) = poles`` by rank-one (pair: rank-two) deflation.

    One pole (or conjugate pair) at a time: find a null direction of
    ``[A - p I | B]`` giving a closed-loop eigenvector, apply the rank-one
    gain that pins it, rotate that direction out with an orthogonal basis, and
    recurse on the deflated system.  Works for repeated poles and multi-input
    ``B``, which is what the deadbeat default needs.
    """
    m = A.shape[0]
    r = B.shape[1]
    if m == 0:
        return np.zeros((r, 0))
    p = poles[0]
    if abs(p.imag) == 0.0:
        x, w = _null_direction(np.hstack([A - p.real * np.eye(m), B]), m, tol)
        x, w = x.real, w.real
        K1 = -np.outer(w, x) / float(x @ x)
        X = (x / np.linalg.norm(x)).reshape(m, 1)
        rest = poles[1:]
        ndef = 1
    else:
        x, w = _null_direction(np.hstack([A - p * np.eye(m), B.astype(complex)]), m, tol)
        Xri = np.column_stack([x.real, x.imag])
        Wri = np.column_stack([w.real, w.imag])
        if np.linalg.matrix_rank(Xri) < 2:
            raise NumericalError(
                f"could not separate the conjugate pair near {p:.6g} into a "
                "two-dimensional real invariant direction"
            )
        K1 = -Wri @ np.linalg.pinv(Xri)
        X, _ = np.linalg.qr(Xri)
        rest = list(poles[1:])
        for i, q in enumerate(rest):
            if abs(q - p.conjugate()) <= 1e-12:
                rest.pop(i)
                break
        else:
            raise ShapeError("complex poles must come in conjugate pairs")
        ndef = 2
    Q = _basis_with_leading(X)
    Acl = Q.T @ (A - B @ K1) @ Q
    Bq = Q.T @ B
    K2 = _assign_state_feedback(Acl[ndef:, ndef:], Bq[ndef:, :], rest, tol)
    return K1 + np.hstack([np.zeros((r, ndef)), K2]) @ Q.T


def place_observer_gain(A, C, poles, tol=None):
    """Output-injection gain L with ``eig(A - L C)`` at the requested poles.

    Assignment runs on the dual pair ``(A.T, C.T)`` by deflation (see
    :func:`_assign_state_feedback`), so repeated poles — the all-zero deadbeat
    default used throughout the gain synthesis — are supported for any number
    of outputs.  The achieved closed-loop spectrum is verified against the
    request; the per-pole tolerance honors what a backward-stable eigensolver
    can resolve for a pole of multiplicity ``m`` (eigenvalues of a perturbed
    defective matrix scatter like ``eps**(1/m)``), falling back to
    ``schur_margin`` for simple poles.

    Raises
    ------
    NotObservable
        When some requested pole cannot be moved (pair not observable there).
    NumericalError
        When the achieved spectrum fails the verification.
    ShapeError
        When the pole list has the wrong length or unpaired complex entries.
    """
    tol = tol or DEFAULT_TOL
    A = as_square(A, "A")
    n = A.shape[0]
    C = as_matrix(C, "C", cols=n)
    if C.shape[0] == 0:
        raise NotObservable("cannot place observer poles with no outputs")
    poles = [complex(p) for p in np.atleast_1d(np.asarray(poles, dtype=complex))]
    if len(poles) != n:
        raise ShapeError(f"need {n} poles, got {len(poles)}")
    bag = list(poles)
    for p in poles:
        if abs(p.imag) > 0:
            if not any(abs(q - p.conjugate()) <= 1e-12 for q in bag):
                raise ShapeError("complex poles must come in conjugate pairs")
    K = _assign_state_feedback(A.T.copy(), C.T.copy(), poles, tol)
    L = K.T
    _verify_assignment(A - L @ C, poles, tol)
    return L


def _verify_assignment(Acl, poles, tol):
    achieved = list(np.linalg.eigvals(Acl))
    scale = max(1.0, float(np.linalg.norm(Acl, 2)))
    mult = {}
    for p in poles:
        key = min(mult, key=lambda q: abs(q - p)) if mult else None
        if key is not None and abs(key - p) <= 1e-12:
            mult[key] += 1
        else:
            mult[p] = 1
    for p, m in mult.items():
        tol_p = max(tol.schur_margin, (1e4 * _EPS * scale) ** (1.0 / m)) if m > 1 \
            else max(tol.schur_margin, 1e4 * _EPS * scale)
        for _ in range(m):
            j = int(np.argmin([abs(a - p) for a in achieved]))
            if abs(achieved[j] - p) > tol_p:
                raise NumericalError(
                    f"pole assignment failed: requested {p:.6g}, nearest "
                    f"achieved {achieved[j]:.6g} (tolerance {tol_p:.2e})"
                )
            achieved.pop(j)
