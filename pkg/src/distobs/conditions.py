"""Feasibility analysis for distributed observers.

Whether any distributed observer can exist on a given network comes down to
two graded questions about the source components (the parts of the graph
nobody informs from outside):

* Condition 1 — can each source component detect every unstable eigenvalue
  *collectively*, stacking all its nodes' outputs?
* Condition 2 — does each source component contain, for every unstable
  eigenvalue class, at least one *root node* whose own outputs detect it?

The second implies the first and enables the per-eigenvalue design route;
the first suffices for the sub-state consensus route.  Verdicts come with
diagnostics naming the failing component and eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .errors import NumericalError
from .netgraph import source_components

__all__ = [
    "ComponentCheck",
    "ConditionVerdict",
    "FeasibilityReport",
    "detectable_set",
    "check_condition1",
    "check_condition2",
    "feasibility_report",
]


def _needs_coverage(cls, tol):
    """Classes at or numerically near the unit circle must be covered."""
    return abs(cls.rep) >= 1.0 - tol.eig_cluster_tol


def detectable_set(A, C_i, tol=None, info=None):
    """Indices of the eigenvalue classes detectable from ``C_i`` alone.

    Stable classes are always detectable; classes on or numerically near the
    unit circle must pass the rank test ``[A - lam I; C_i]`` at full column
    rank.  ``info`` may carry a precomputed :func:`numkit.eigen_info` result
    for ``A``; indices refer to its class ordering.
    """
    tol = tol or nk.DEFAULT_TOL
    A = nk.as_square(A, "A")
    info = info or nk.eigen_info(A, tol)
    out = []
    for k, cls in enumerate(info.classes):
        if not _needs_coverage(cls, tol) or nk.pbh_rank_ok(A, C_i, cls.rep, tol):
            out.append(k)
    return tuple(out)


@dataclass(frozen=True)
class ComponentCheck:
    """Verdict for one source component.

    ``failing`` lists the eigenvalue-class representatives the component
    cannot handle; ``roots`` (filled by the per-eigenvalue check) maps each
    covered class index to the in-component nodes that detect it on their own.
    """

    component: tuple
    ok: bool
    failing: tuple
    roots: dict


@dataclass(frozen=True)
class ConditionVerdict:
    """Overall verdict with per-source-component detail."""

    ok: bool
    components: tuple

    def failing_components(self):
        return tuple(c for c in self.components if not c.ok)


def check_condition1(p, g, tol=None):
    """Collective detectability of every source component.

    For each source component, stacks the outputs of all member nodes and
    runs the rank test at every eigenvalue class on or near the unit circle.
    """
    tol = tol or nk.DEFAULT_TOL
    info = nk.eigen_info(p.A, tol)
    checks = []
    for comp in source_components(g):
        C_stack = p.stacked_output(comp)
        failing = tuple(
            cls.rep for cls in info.classes
            if _needs_coverage(cls, tol)
            and not nk.pbh_rank_ok(p.A, C_stack, cls.rep, tol)
        )
        checks.append(ComponentCheck(comp, not failing, failing, {}))
    return ConditionVerdict(all(c.ok for c in checks), tuple(checks))


def check_condition2(p, g, tol=None):
    """Root-node existence per source component and unstable eigenvalue class.

    A class fails for a component when no member node detects it with its own
    outputs alone; ``roots`` records who does, which is exactly what the
    per-eigenvalue synthesis needs.
    """
    tol = tol or nk.DEFAULT_TOL
    info = nk.eigen_info(p.A, tol)
    covered = [
        (k, cls) for k, cls in enumerate(info.classes) if _needs_coverage(cls, tol)
    ]
    checks = []
    for comp in source_components(g):
        roots = {}
        failing = []
        for k, cls in covered:
            here = tuple(
                i for i in comp if nk.pbh_rank_ok(p.A, p.C[i - 1], cls.rep, tol)
            )
            if here:
                roots[k] = here
            else:
                failing.append(cls.rep)
        checks.append(ComponentCheck(comp, not failing, tuple(failing), roots))
    return ConditionVerdict(all(c.ok for c in checks), tuple(checks))


@dataclass(frozen=True)
class FeasibilityReport:
    """Combined feasibility picture for a plant on a network.

    ``per_node_detectable`` holds each node's locally detectable class
    indices; ``root_sets`` maps each covered class index to every node in the
    whole graph that detects it.
    """

    classes: tuple
    unstable: tuple
    per_node_detectable: tuple
    root_sets: dict
    source_comps: tuple
    cond1: ConditionVerdict
    cond2: ConditionVerdict


def feasibility_report(p, g, tol=None):
    """Run both conditions and assemble the full report.

    The per-eigenvalue condition implies the collective one; if the two
    verdicts ever disagree in that direction the rank decisions are
    inconsistent at the working tolerance, which is reported as an error
    rather than returned silently.
    """
    tol = tol or nk.DEFAULT_TOL
    info = nk.eigen_info(p.A, tol)
    unstable = tuple(
        k for k, cls in enumerate(info.classes) if _needs_coverage(cls, tol)
    )
    per_node = tuple(
        detectable_set(p.A, p.C[i - 1], tol, info=info)
        for i in range(1, p.n_nodes + 1)
    )
    root_sets = {
        k: tuple(
            i for i in range(1, p.n_nodes + 1)
            if k in per_node[i - 1]
            and nk.pbh_rank_ok(p.A, p.C[i - 1], info.classes[k].rep, tol)
        )
        for k in unstable
    }
    c1 = check_condition1(p, g, tol)
    c2 = check_condition2(p, g, tol)
    if c2.ok and not c1.ok:
        raise NumericalError(
            "rank decisions are inconsistent: per-eigenvalue coverage holds "
            "but collective detectability fails; adjust tolerances"
        )
    return FeasibilityReport(
        classes=info.classes,
        unstable=unstable,
        per_node_detectable=per_node,
        root_sets=root_sets,
        source_comps=tuple(source_components(g)),
        cond1=c1,
        cond2=c2,
    )
