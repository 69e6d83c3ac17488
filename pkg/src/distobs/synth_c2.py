"""Per-eigenvalue observer synthesis over the sensor network.

Each node runs a reduced local observer on the eigenvalue classes its own
outputs can pin down and fills in every remaining class by relaying, along a
per-class spanning forest, the estimates of nodes that do detect that class.
Estimates are exchanged in plant coordinates only; the eigenstructure stays
internal to each node.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .conditions import feasibility_report
from .decomp import jordan_system
from .errors import (
    Condition2Infeasible,
    DistobsError,
    NotDetectable,
    NotSpanning,
)
from .netgraph import spanning_dag, spanning_forest

__all__ = [
    "ClassWeights",
    "C2NodeObserver",
    "C2ObserverBank",
    "local_observer",
    "eig_consensus_weights",
    "assemble_c2_bank",
    "design_condition2",
]


def local_observer(split, poles_policy="deadbeat", given=None, tol=None):
    """Output-injection gain for one node's reduced local observer.

    The node's pair couples its detectable eigenvalue classes with the
    locally observable residual of the others; only the observable part of
    that pair is placed (deadbeat by default), and the stable directions the
    node cannot see from its own outputs get zero gain rows.

    Parameters
    ----------
    split : NodeSplit
        The node's split; the observer runs on
        ``(split.local_dynamics, split.local_output)``.
    poles_policy : str
        ``"deadbeat"`` places every observable pole at the origin.
    given : (n_s, r) ndarray, optional
        User-supplied gain; it is validated against the pair instead of
        synthesizing one.
    tol : ToleranceConfig, optional

    Returns
    -------
    (n_s, r) ndarray
        Gain with the closed-loop local error matrix Schur stable.

    Raises
    ------
    NotDetectable
        If no gain can make (or ``given`` does not make) the local error
        dynamics Schur stable — an internal consistency failure, since the
        split only admits detectable local pairs.
    """
    tol = tol or nk.DEFAULT_TOL
    J = split.local_dynamics
    F = split.local_output
    n_s = J.shape[0]
    r = F.shape[0]
    if given is not None:
        L = nk.as_matrix(given, "given gain", rows=n_s, cols=r)
    elif n_s == 0:
        L = np.zeros((0, r))
    else:
        if poles_policy != "deadbeat":
            raise ValueError(f"unknown poles policy {poles_policy!r}")
        T_loc, k = nk.obs_canon_decomp(J, F, tol)
        if k == 0:
            L = np.zeros((n_s, r))
        else:
            A_o = (T_loc.T @ J @ T_loc)[:k, :k]
            C_o = (F @ T_loc)[:, :k]
            L_o = nk.place_observer_gain(A_o, C_o, np.zeros(k), tol)
            L = T_loc[:, :k] @ L_o
    rho = nk.spectral_radius(J - L @ F) if n_s else 0.0
    if rho >= 1.0:
        raise NotDetectable(
            f"node {split.node}: local error dynamics have spectral radius "
            f"{rho:.6g}; the reduced pair is not stabilizable by output "
            "injection"
        )
    return L


@dataclass(frozen=True, eq=False)
class ClassWeights:
    """Consensus weights for one unstable eigenvalue class.

    ``weights[i]`` maps each node ``l`` that node ``i`` listens to for this
    class to a nonnegative weight; rows sum to one for every node outside
    ``roots`` (nodes in ``roots`` estimate the class from their own outputs
    and listen to nobody).  Because parents come from a spanning forest,
    relabeling the non-root nodes by ``topo_order`` makes the non-root
    weight block strictly lower triangular, hence nilpotent: relay errors
    flush out of the network instead of circulating.
    """

    class_index: int
    rep: complex
    roots: tuple
    weights: dict
    topo_order: tuple
    W_root: np.ndarray = field(init=False, repr=False)
    W_rest: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        root_set = set(self.roots)
        followers = [v for v in self.topo_order if v not in root_set]
        rcol = {v: k for k, v in enumerate(sorted(root_set))}
        col = {v: k for k, v in enumerate(followers)}
        W_root = np.zeros((len(followers), len(rcol)))
        W_rest = np.zeros((len(followers), len(followers)))
        for rr, i in enumerate(followers):
            row = self.weights.get(i, {})
            if not row:
                raise ValueError(
                    f"node {i} has no consensus weights for eigenvalue "
                    f"class {self.class_index}"
                )
            total = 0.0
            for l, w in row.items():
                if w < 0:
                    raise ValueError(f"negative weight {w} on edge {l}->{i}")
                total += w
                if l in rcol:
                    W_root[rr, rcol[l]] += w
                elif l in col:
                    W_rest[rr, col[l]] += w
                else:
                    raise ValueError(
                        f"node {i} weights {l}, which covers nothing for "
                        f"class {self.class_index}"
                    )
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"weights of node {i} sum to {total}, not 1")
        for i in root_set:
            if self.weights.get(i):
                raise ValueError(
                    f"node {i} detects class {self.class_index} locally and "
                    "must not carry consensus weights for it"
                )
        if np.any(np.triu(W_rest) != 0.0):
            raise ValueError(
                "consensus weights are not strictly lower triangular under "
                "the topological order; the relay block would not be "
                "nilpotent"
            )
        object.__setattr__(self, "W_root", W_root)
        object.__setattr__(self, "W_rest", W_rest)

    def parents(self, i):
        """Nodes that ``i`` listens to for this class (empty for roots)."""
        return tuple(sorted(self.weights.get(i, {})))


def eig_consensus_weights(g, roots, rep, class_index=0):
    """Static relay weights for one unstable eigenvalue class.

    Builds a spanning forest of ``g`` rooted at the nodes that detect the
    class and puts weight one on each non-root node's forest parent.  When
    every node is a root there is nothing to relay and the weight map is
    empty.

    Parameters
    ----------
    g : Digraph
    roots : iterable of int
        Nodes whose own outputs pin the class down.
    rep : complex
        Representative eigenvalue, used for diagnostics only.
    class_index : int
        Position of the class in the grouped ordering.

    Returns
    -------
    ClassWeights

    Raises
    ------
    Condition2Infeasible
        If the roots do not reach every node, naming the offending
        eigenvalue.
    """
    root_set = frozenset(roots)
    if not root_set:
        raise Condition2Infeasible(
            f"eigenvalue {rep:.6g} is detected by no node",
            eigenvalue=rep,
        )
    if root_set >= set(g.nodes):
        return ClassWeights(class_index, rep, tuple(sorted(root_set)), {},
                            g.nodes)
    try:
        forest = spanning_forest(g, root_set)
    except NotSpanning as exc:
        missing = ", ".join(str(v) for v in sorted(exc.unreachable))
        raise Condition2Infeasible(
            f"no node detecting eigenvalue {rep:.6g} reaches "
            f"node(s) {missing}",
            eigenvalue=rep,
        ) from exc
    weights = {
        i: {forest.parents(i)[0]: 1.0}
        for i in g.nodes if i not in root_set
    }
    return ClassWeights(class_index, rep, tuple(sorted(root_set)), weights,
                        forest.topo_order)


@dataclass(frozen=True, eq=False)
class C2NodeObserver:
    """One node's executable observer record.

    The node's internal state is the reduced vector ``s_i`` (dimension
    ``split.det_dim + split.aug_dim``) together with the relayed coordinates
    of its undetectable classes; ``state_dim`` is their total.  ``relayed``
    lists ``(class_index, z_slice)`` pairs in the order the relayed
    coordinates are stacked, where ``z_slice`` selects that class's rows of
    the transformed coordinates.
    """

    node: int
    split: object
    gain: np.ndarray
    relayed: tuple
    state_dim: int


@dataclass(frozen=True, eq=False)
class C2ObserverBank:
    """Executable per-eigenvalue observer bank for the whole network.

    ``class_weights`` maps each eigenvalue-class index that some node must
    relay to its static weights; ``dags`` holds the (possibly multi-parent)
    routing structures the switching fallback redistributes over.
    """

    jsys: object
    graph: object
    nodes: tuple
    class_weights: dict
    dags: dict
    max_parents: int
    report: object = None

    @property
    def plant(self):
        return self.jsys.plant

    def observer_dims(self):
        """Per-node internal observer dimensions, in node order."""
        return tuple(rec.state_dim for rec in self.nodes)


def assemble_c2_bank(jsys, gains, class_weights, g, dags=None,
                     max_parents=1, report=None):
    """Assemble the executable per-eigenvalue bank from its parts.

    Parameters
    ----------
    jsys : JordanSystem
    gains : sequence of ndarray
        Entry ``i - 1`` is node ``i``'s local gain.
    class_weights : dict
        Maps eigenvalue-class index to :class:`ClassWeights`; must cover
        every class that is undetectable at some node.
    g : Digraph
    dags : dict, optional
        Per-class routing structures for switching operation; defaults to
        the forests implied by the static weights.
    max_parents : int
    report : FeasibilityReport, optional

    Returns
    -------
    C2ObserverBank
    """
    p = jsys.plant
    records = []
    for i in range(1, p.n_nodes + 1):
        split = jsys.per_node[i - 1]
        L = nk.as_matrix(
            gains[i - 1], f"gain of node {i}",
            rows=split.det_dim + split.aug_dim, cols=p.C[i - 1].shape[0],
        )
        relayed = []
        relayed_dim = 0
        for k in split.undetectable:
            cw = class_weights.get(k)
            if cw is None:
                raise DistobsError(
                    f"node {i} cannot detect eigenvalue class {k} and no "
                    "consensus weights were supplied for it"
                )
            if i not in cw.weights:
                raise DistobsError(
                    f"node {i} has no relay parent for eigenvalue class {k}"
                )
            relayed.append((k, jsys.class_slice(k)))
            relayed_dim += jsys.classes[k].dim
        state_dim = split.det_dim + split.aug_dim + relayed_dim
        # Detectable and relayed classes partition the spectrum, so the
        # internal dimension always equals n plus the locally observable
        # residual the node keeps of classes it cannot fully detect.
        assert state_dim == p.n + split.aug_dim
        records.append(C2NodeObserver(
            node=i, split=split, gain=L, relayed=tuple(relayed),
            state_dim=state_dim,
        ))
    if dags is None:
        dags = {
            k: spanning_dag(g, set(cw.roots), max_parents)
            for k, cw in class_weights.items() if cw.weights
        }
    return C2ObserverBank(
        jsys=jsys, graph=g, nodes=tuple(records),
        class_weights=dict(class_weights), dags=dict(dags),
        max_parents=max_parents, report=report,
    )


def design_condition2(p, g, tol=None, max_parents=1, gains=None):
    """Design the complete per-eigenvalue observer bank for a network.

    Checks per-eigenvalue coverage, computes the grouped eigenstructure and
    every node's split, synthesizes deadbeat local gains, and routes each
    unstable class from the nodes that detect it to everyone else.

    Parameters
    ----------
    p : Plant
    g : Digraph
    tol : ToleranceConfig, optional
    max_parents : int
        Parent budget of the switching routing structures (static weights
        always use the single forest parent).
    gains : dict, optional
        Maps node id to a user-supplied local gain, overriding synthesis
        for that node.

    Returns
    -------
    C2ObserverBank

    Raises
    ------
    Condition2Infeasible
        If some unstable eigenvalue class has no detecting node in some
        source component.
    IllConditionedJordan
        If the eigenbasis cannot be certified.
    """
    tol = tol or nk.DEFAULT_TOL
    report = feasibility_report(p, g, tol)
    if not report.cond2.ok:
        comp = report.cond2.failing_components()[0]
        rep = comp.failing[0]
        members = ", ".join(str(v) for v in comp.component)
        raise Condition2Infeasible(
            f"eigenvalue {rep:.6g} is detected by no node of source "
            f"component {{{members}}}",
            eigenvalue=rep,
        )
    jsys = jordan_system(p, tol)
    gains = dict(gains or {})
    gain_list = []
    for i in range(1, p.n_nodes + 1):
        split = jsys.per_node[i - 1]
        gain_list.append(
            local_observer(split, given=gains.pop(i, None), tol=tol)
        )
    if gains:
        raise ValueError(f"gains given for unknown nodes {sorted(gains)}")
    needed = sorted({k for s in jsys.per_node for k in s.undetectable})
    class_weights = {}
    dags = {}
    for k in needed:
        roots = report.root_sets.get(k, ())
        class_weights[k] = eig_consensus_weights(
            g, roots, jsys.classes[k].rep, k,
        )
        dags[k] = spanning_dag(g, set(roots), max_parents)
    return assemble_c2_bank(
        jsys, gain_list, class_weights, g, dags=dags,
        max_parents=max_parents, report=report,
    )
