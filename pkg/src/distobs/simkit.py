"""Deterministic simulation of the plant and every node's observer.

One engine drives both observer families over a static graph or a switching
link-failure signal, with synchronous semantics: at step ``k`` every node
reads its neighbors' step-``k`` estimates, then all nodes advance at once.
Traces carry absolute and normalized error histories; the normalized metric
``error / (1 + ‖x‖)`` is the one convergence is judged on, because with an
unstable plant the state outgrows any absolute-error resolution within a few
dozen steps.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .decomp import Plant
from .errors import InvalidSignal, ShapeError
from .synth_c1 import Condition1Design
from .synth_c2 import C2ObserverBank

__all__ = [
    "SwitchingSignal",
    "SimulationTrace",
    "Assumption2Check",
    "NodeConvergence",
    "simulate",
    "make_assumption2_signal",
    "validate_assumption2",
    "convergence_metrics",
    "dag_parent_map",
]


@dataclass(frozen=True, eq=False)
class SwitchingSignal:
    """Edge-failure signal: a mode list and a per-step mode index.

    ``modes[schedule[k]]`` is the set of edges alive while the step-``k``
    estimates are exchanged.  ``window_T`` is the declared dwell window the
    repair guarantee refers to.
    """

    modes: tuple
    schedule: tuple
    window_T: int
    seed: object = None

    def edges_at(self, k):
        """Edge set alive at step ``k``."""
        if k >= len(self.schedule):
            raise InvalidSignal(
                f"step {k} beyond the schedule ({len(self.schedule)} steps)"
            )
        m = self.schedule[k]
        if not 0 <= m < len(self.modes):
            raise InvalidSignal(f"mode index {m} out of range at step {k}")
        return self.modes[m]


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """State, estimates, and error histories of one simulation run.

    ``x[k]`` is the true state, ``xhat[i - 1, k]`` node ``i``'s estimate,
    ``err``/``rel_err`` the absolute and normalized error norms, and
    ``mode_indices[k]`` the signal mode active while step ``k``'s estimates
    were exchanged (``None`` on the final record and throughout static runs).
    """

    x: np.ndarray
    xhat: np.ndarray
    err: np.ndarray
    rel_err: np.ndarray
    mode_indices: tuple
    metadata: dict

    @property
    def n_steps(self):
        """Number of records, horizon plus one."""
        return self.x.shape[0]

    @property
    def n_nodes(self):
        return self.xhat.shape[0]


def _scenario_hash(p, x0, est0, K, signal, scheme):
    h = hashlib.sha256()
    h.update(np.asarray(p.A, dtype=float).tobytes())
    for Ci in p.C:
        h.update(np.asarray(Ci, dtype=float).tobytes())
        h.update(str(Ci.shape).encode())
    h.update(np.asarray(x0, dtype=float).tobytes())
    for e in est0:
        h.update(np.asarray(e, dtype=float).tobytes())
    h.update(str(K).encode())
    h.update(scheme.encode())
    if signal is not None:
        h.update(str(signal.window_T).encode())
        h.update(np.asarray(signal.schedule, dtype=np.int64).tobytes())
        for mode in signal.modes:
            h.update(str(sorted(mode)).encode())
    return h.hexdigest()


def _check_signal(signal, g, K):
    if signal is None:
        return
    baseline = set(g.edges)
    for m, mode in enumerate(signal.modes):
        extra = set(mode) - baseline
        if extra:
            raise InvalidSignal(
                f"mode {m} contains edges {sorted(extra)} absent from the "
                "baseline graph"
            )
    if len(signal.schedule) < K:
        raise InvalidSignal(
            f"schedule covers {len(signal.schedule)} steps, horizon is {K}"
        )
    for k in range(K):
        m = signal.schedule[k]
        if not 0 <= m < len(signal.modes):
            raise InvalidSignal(f"mode index {m} out of range at step {k}")


def _uniform(live):
    w = 1.0 / len(live)
    return {l: w for l in live}


def _c1_step_weights(comp, ids, mode_edges):
    """Per-node slot-weight vectors for one component under ``mode_edges``.

    Returns a list over local nodes of ``{local neighbor: weight vector}``
    with one slot per sub-state plus the unobservable tail, mirroring the
    statically assembled vectors but reweighted over the surviving parents:
    a node whose live parents for some sub-state form a proper subset of its
    designed parents splits the weight uniformly over that subset, and a
    node with no surviving parent falls back to propagating its own previous
    estimate of that sub-state.
    """
    d = comp.decomposition
    N_c = len(d.o)
    out = []
    for i_loc in range(1, N_c + 1):
        pos = d.step_of_node[i_loc]
        vecs = {}

        def vec(l):
            if l not in vecs:
                vecs[l] = np.zeros(N_c + 1)
            return vecs[l]

        own = vec(i_loc)
        own[pos - 1] = 1.0
        own[N_c] = 1.0
        for j in range(1, N_c + 1):
            if j == pos or d.o[j - 1] == 0:
                continue
            parents = comp.dags[j].parents(i_loc)
            live = [
                l for l in parents
                if (ids[l - 1], ids[i_loc - 1]) in mode_edges
            ]
            if live:
                for l, w in _uniform(live).items():
                    vec(l)[j - 1] += w
            else:
                vec(i_loc)[j - 1] += 1.0
        out.append(vecs)
    return out


def _c1_step_component(comp, ids, xh, y, weight_vectors, C):
    """Advance one component's members one step in block coordinates.

    The update is the compact per-node recursion conjugated into the
    decomposition coordinates: couplings from the block-triangular part,
    the node's own innovation injected on its sub-state, and each slot's
    consensus drawn from the weighted neighbors.  The innovation is formed
    in original coordinates (``y_i - C_i x_hat_i``), exactly as the compact
    form does; with a user-supplied transform whose published entries are
    rounded, the structure-enforced ``Cbar`` differs from ``C_i T`` by the
    rounding residual, and measuring through it would bias the estimate.
    """
    d = comp.decomposition
    bank = comp.bank
    N_c = len(d.o)
    T = d.T
    Tinv = np.linalg.inv(T)
    A1 = d.Abar.copy()
    for j in range(1, N_c + 1):
        sl = d.block_slice(j)
        A1[sl, sl] = 0.0
    slu = d.unobs_slice
    A1[slu, slu] = 0.0
    z = {l: Tinv @ xh[ids[l - 1] - 1] for l in range(1, N_c + 1)}
    out = {}
    for i_loc in range(1, N_c + 1):
        gi = ids[i_loc - 1]
        pos = d.step_of_node[i_loc]
        innov = y[gi - 1] - C[gi - 1] @ xh[gi - 1]
        z_next = A1 @ z[i_loc]
        sl_pos = d.block_slice(pos)
        z_next[sl_pos] += bank.gains[pos - 1] @ innov
        for l, w in weight_vectors[i_loc - 1].items():
            zl = z[l]
            for j in range(1, N_c + 1):
                if w[j - 1] and d.o[j - 1]:
                    sl = d.block_slice(j)
                    z_next[sl] += w[j - 1] * (d.A_sub(j) @ zl[sl])
            if w[N_c] and d.u_dim:
                z_next[slu] += w[N_c] * (d.A_unobs @ zl[slu])
        out[gi] = T @ z_next
    return out


def _relay_step(relay, xh, mode_edges):
    """Advance the pure-relay nodes: copy a parent estimate through the
    plant map, averaging over surviving parents, or propagate the node's own
    previous estimate when every parent link is down."""
    out = {}
    if relay is None:
        return out
    A = relay.A
    for i in relay.relay_nodes:
        parents = relay.dag.parents(i)
        if mode_edges is None:
            src = xh[parents[0] - 1]
        else:
            live = [l for l in parents if (l, i) in mode_edges]
            if live:
                src = sum(xh[l - 1] for l in live) / len(live)
            else:
                src = xh[i - 1]
        out[i] = A @ src
    return out


def _simulate_c1(p, design, x0, est0, K, signal, form):
    N = p.n_nodes
    xh = [np.asarray(e, dtype=float).reshape(p.n) for e in est0]
    x = np.asarray(x0, dtype=float).reshape(p.n)
    xs = [x.copy()]
    hats = [[v.copy() for v in xh]]
    mode_idx = []
    for k in range(K):
        y = [p.C[i - 1] @ x for i in range(1, N + 1)]
        mode_edges = None
        if signal is not None:
            mode_idx.append(signal.schedule[k])
            mode_edges = signal.edges_at(k)
        else:
            mode_idx.append(None)
        new = {}
        for comp in design.components:
            ids = comp.nodes
            if mode_edges is None and form == "compact":
                bank = comp.bank
                for i_loc in range(1, len(ids) + 1):
                    gi = ids[i_loc - 1]
                    innov = y[gi - 1] - p.C[gi - 1] @ xh[gi - 1]
                    v = bank.N_mat @ xh[gi - 1] + bank.TH[i_loc - 1] @ innov
                    for l, Gil in bank.G[i_loc - 1].items():
                        v = v + Gil @ xh[ids[l - 1] - 1]
                    new[gi] = v
            else:
                if mode_edges is None:
                    wv = comp.bank.weight_vectors
                else:
                    wv = _c1_step_weights(comp, ids, mode_edges)
                new.update(_c1_step_component(comp, ids, xh, y, wv, p.C))
        new.update(_relay_step(design.relay, xh, mode_edges))
        xh = [new[i] for i in range(1, N + 1)]
        x = p.A @ x
        xs.append(x.copy())
        hats.append([v.copy() for v in xh])
    mode_idx.append(None)
    return xs, hats, tuple(mode_idx)


def _c2_init_states(bank, est0):
    states = []
    for rec in bank.nodes:
        sp = rec.split
        zbar = sp.perm.T @ (bank.jsys.T_inv @ est0[rec.node - 1])
        v = sp.inner_split.T @ zbar[sp.det_dim:]
        states.append(np.concatenate([zbar[:sp.det_dim], v[:sp.aug_dim]]))
    return states


def _simulate_c2(p, bank, x0, est0, K, signal):
    N = p.n_nodes
    jsys = bank.jsys
    T, Tinv = jsys.T, jsys.T_inv
    xh = [np.asarray(e, dtype=float).reshape(p.n) for e in est0]
    s = _c2_init_states(bank, xh)
    x = np.asarray(x0, dtype=float).reshape(p.n)
    xs = [x.copy()]
    hats = [[v.copy() for v in xh]]
    mode_idx = []
    for k in range(K):
        y = [p.C[i - 1] @ x for i in range(1, N + 1)]
        mode_edges = None
        if signal is not None:
            mode_idx.append(signal.schedule[k])
            mode_edges = signal.edges_at(k)
        else:
            mode_idx.append(None)
        z = [Tinv @ v for v in xh]
        new_s, new_xh = [], []
        for rec in bank.nodes:
            i, sp = rec.node, rec.split
            si = s[i - 1]
            s_next = (
                sp.local_dynamics @ si
                + rec.gain @ (y[i - 1] - sp.local_output @ si)
            )
            parts = [s_next[:sp.det_dim]]
            for cls_idx, sl in rec.relayed:
                if mode_edges is None:
                    row = bank.class_weights[cls_idx].weights[i]
                else:
                    parents = bank.dags[cls_idx].parents(i)
                    live = [l for l in parents if (l, i) in mode_edges]
                    row = _uniform(live) if live else {i: 1.0}
                acc = np.zeros(sl.stop - sl.start)
                for l, w in row.items():
                    acc += w * z[l - 1][sl]
                parts.append(jsys.classes[cls_idx].block @ acc)
            new_s.append(s_next)
            new_xh.append(T @ (sp.perm @ np.concatenate(parts)))
        s, xh = new_s, new_xh
        x = p.A @ x
        xs.append(x.copy())
        hats.append([v.copy() for v in xh])
    mode_idx.append(None)
    return xs, hats, tuple(mode_idx)


def simulate(p, bank, x0, est0=None, K=50, signal=None, form="compact"):
    """Run the plant and all observers for ``K`` steps.

    Parameters
    ----------
    p : Plant
    bank : Condition1Design or C2ObserverBank
    x0 : (n,) array_like
        Initial plant state.
    est0 : sequence of (n,) array_like, optional
        Initial estimates per node; zeros when omitted.
    K : int
        Horizon; the trace has ``K + 1`` records.
    signal : SwitchingSignal, optional
        Link-failure signal; omitted means the full graph at every step.
    form : str
        ``"compact"`` uses the preassembled per-node matrices (static
        operation); ``"blocks"`` runs the slot-by-slot recursion in
        decomposition coordinates.  Switching runs always use the slot form
        because the surviving-parent weights change step by step.  The
        per-eigenvalue scheme ignores this parameter.

    Returns
    -------
    SimulationTrace

    Raises
    ------
    InvalidSignal
        On a schedule shorter than the horizon, a mode index out of range,
        or mode edges outside the baseline graph.
    ShapeError
        On inconsistent dimensions.
    """
    if not isinstance(p, Plant):
        raise ShapeError("first argument must be a Plant")
    if K < 1:
        raise ValueError(f"horizon must be at least 1, got {K}")
    if form not in ("compact", "blocks"):
        raise ValueError(f"unknown form {form!r}")
    N = p.n_nodes
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (p.n,):
        raise ShapeError(f"x0 must have {p.n} entries, got {x0.shape}")
    if est0 is None:
        est0 = [np.zeros(p.n) for _ in range(N)]
    est0 = [np.asarray(e, dtype=float).reshape(-1) for e in est0]
    if len(est0) != N or any(e.shape != (p.n,) for e in est0):
        raise ShapeError(f"est0 must hold {N} vectors of {p.n} entries")
    if isinstance(bank, Condition1Design):
        _check_signal(signal, bank.graph, K)
        scheme = "c1"
        xs, hats, modes = _simulate_c1(p, bank, x0, est0, K, signal, form)
    elif isinstance(bank, C2ObserverBank):
        _check_signal(signal, bank.graph, K)
        scheme = "c2"
        xs, hats, modes = _simulate_c2(p, bank, x0, est0, K, signal)
    else:
        raise ShapeError(
            "bank must be a Condition1Design or a C2ObserverBank, got "
            f"{type(bank).__name__}"
        )
    x_arr = np.array(xs)
    xh_arr = np.array([
        [hats[k][i] for k in range(K + 1)] for i in range(N)
    ])
    diff = xh_arr - x_arr[None, :, :]
    err = np.linalg.norm(diff, axis=2)
    rel = err / (1.0 + np.linalg.norm(x_arr, axis=1))[None, :]
    meta = {
        "scheme": scheme,
        "seed": getattr(signal, "seed", None),
        "scenario_hash": _scenario_hash(p, x0, est0, K, signal, scheme),
    }
    return SimulationTrace(
        x=x_arr, xhat=xh_arr, err=err, rel_err=rel,
        mode_indices=modes, metadata=meta,
    )


def dag_parent_map(design):
    """Collect every routed parent set of a design, keyed by a label.

    For the sub-state-consensus design the labels are
    ``"c<component>/s<sub-state>"`` plus ``"relay"``; for the per-eigenvalue
    bank they are ``"class<index>"``.  Node ids are global.  This is the
    ``{parent sets}`` input of the link-failure signal generator and
    validator.
    """
    out = {}
    if isinstance(design, Condition1Design):
        for ci, comp in enumerate(design.components):
            ids = comp.nodes
            for j, dag in comp.dags.items():
                out[f"c{ci}/s{j}"] = {
                    ids[i - 1]: tuple(ids[l - 1] for l in dag.parents(i))
                    for i in range(1, len(ids) + 1)
                    if dag.parents(i)
                }
        if design.relay is not None:
            out["relay"] = {
                i: design.relay.dag.parents(i)
                for i in design.relay.relay_nodes
            }
    elif isinstance(design, C2ObserverBank):
        for k, dag in design.dags.items():
            out[f"class{k}"] = {
                i: dag.parents(i) for i in dag.parent_sets
            }
    else:
        raise ShapeError(
            "design must be a Condition1Design or a C2ObserverBank"
        )
    return out


def make_assumption2_signal(dag_parents, baseline, T, K, drop_prob, seed):
    """Random link-failure signal that keeps every parent set periodically
    alive.

    Each baseline edge drops independently with probability ``drop_prob`` at
    each step; afterwards every window of ``T`` steps is repaired so that
    each routed ``(node, parent set)`` pair sees at least one live parent
    edge inside the window — when the random draw starved a pair for a whole
    window, the first designed parent's edge is restored at the window's
    last step.

    Parameters
    ----------
    dag_parents : dict
        Label to ``{node: parent tuple}`` map (see ``dag_parent_map``).
    baseline : Digraph
    T : int
        Window length, at least 1.
    K : int
        Number of steps to schedule.
    drop_prob : float
        Per-edge per-step drop probability in ``[0, 1)``.
    seed : int or None

    Returns
    -------
    SwitchingSignal
    """
    if not 0 <= drop_prob < 1:
        raise ValueError(f"drop probability must be in [0, 1), got {drop_prob}")
    if T < 1:
        raise ValueError(f"window must be at least 1, got {T}")
    rng = np.random.default_rng(seed)
    edges = sorted(set(baseline.edges))
    live = []
    for _ in range(K):
        keep = rng.random(len(edges)) >= drop_prob
        live.append({e for e, k in zip(edges, keep) if k})
    for w0 in range(0, K, T):
        w1 = min(w0 + T, K)
        for label, pmap in dag_parents.items():
            for i, parents in pmap.items():
                if not parents:
                    continue
                if any(
                    (l, i) in live[k]
                    for k in range(w0, w1) for l in parents
                ):
                    continue
                live[w1 - 1].add((parents[0], i))
    modes = []
    index = {}
    schedule = []
    for step_edges in live:
        key = frozenset(step_edges)
        if key not in index:
            index[key] = len(modes)
            modes.append(key)
        schedule.append(index[key])
    return SwitchingSignal(
        modes=tuple(modes), schedule=tuple(schedule), window_T=T, seed=seed,
    )


@dataclass(frozen=True)
class Assumption2Check:
    """Window-coverage verdict; falsy when some window starves a parent set.

    ``violation`` is ``None`` or the first ``(window index, node, label)``
    whose window never showed a live parent edge.
    """

    ok: bool
    violation: tuple = None

    def __bool__(self):
        return self.ok


def validate_assumption2(signal, dag_parents, T=None):
    """Check that every routed parent set is alive once per window.

    Scans each window of ``T`` steps (default: the signal's own declared
    window) and reports the first ``(window, node, label)`` for which no
    step in the window keeps an edge from any designed parent.
    """
    T = signal.window_T if T is None else T
    if T < 1:
        raise ValueError(f"window must be at least 1, got {T}")
    K = len(signal.schedule)
    for w, w0 in enumerate(range(0, K, T)):
        w1 = min(w0 + T, K)
        step_edges = [signal.edges_at(k) for k in range(w0, w1)]
        for label, pmap in sorted(dag_parents.items()):
            for i, parents in sorted(pmap.items()):
                if not parents:
                    continue
                if not any(
                    (l, i) in es for es in step_edges for l in parents
                ):
                    return Assumption2Check(False, (w, i, label))
    return Assumption2Check(True, None)


@dataclass(frozen=True, eq=False)
class NodeConvergence:
    """Convergence summary of one node's normalized error history."""

    node: int
    final_rel_error: float
    monotone_tail: bool
    rel_errors: np.ndarray

    def first_step_below(self, eps):
        """First record index with normalized error under ``eps``, or
        ``None`` if the trace never gets there."""
        hits = np.nonzero(self.rel_errors < eps)[0]
        return int(hits[0]) if hits.size else None


def convergence_metrics(trace):
    """Per-node convergence summaries of a trace.

    The tail flag checks that the last quarter of the normalized error
    history is non-increasing up to a 5 % ripple and a 1e-13 floor — a
    diverging run fails it, while a converged run sitting at the rounding
    floor passes.
    """
    out = []
    K1 = trace.n_steps
    tail = max(3, K1 // 4)
    for i in range(1, trace.n_nodes + 1):
        r = trace.rel_err[i - 1]
        seg = r[-tail:]
        mono = bool(
            np.all(seg[1:] <= seg[:-1] * 1.05 + 1e-13)
        )
        out.append(NodeConvergence(
            node=i,
            final_rel_error=float(r[-1]),
            monotone_tail=mono,
            rel_errors=r,
        ))
    return tuple(out)
