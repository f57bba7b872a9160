"""Probabilities of causation: necessity, sufficiency, and both.

Exact values come from a full model by joint potential-outcome enumeration;
interval bounds come from an observational joint over (X, Y) combined with
the two experimental quantities P(Y=y1 | do(X=x1)) and P(Y=y1 | do(X=x0)).
Convention: x1 is the treated value, y1 the response value; callers relabel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .expr import JointTable
from .scm import DiscreteScm, ScmError, ZeroEvidence, joint_counterfactual

__all__ = ["PnPsResult", "pn_ps_exact", "pnps_bounds", "BoundsError"]

Bound = tuple[float, float]


class BoundsError(ValueError):
    """Invalid inputs to the bounds computation."""


@dataclass(frozen=True)
class PnPsResult:
    """PN, PS, PNS as exact probabilities or (low, high) bounds.

    A component is ``None`` when its conditioning event has probability
    zero; ``notes`` records why.
    """

    pn: Union[float, Bound, None]
    ps: Union[float, Bound, None]
    pns: Union[float, Bound, None]
    mode: str  # "exact" or "bounds"
    notes: tuple[str, ...] = ()


def pn_ps_exact(
    m: DiscreteScm,
    x: str,
    y: str,
    x1: str = "1",
    x0: str = "0",
    y1: str = "1",
    y0: str = "0",
) -> PnPsResult:
    """Exact PN, PS, PNS from the model.

    PN  = P(Y would be y0 under do(x0) | X=x1, Y=y1)
    PS  = P(Y would be y1 under do(x1) | X=x0, Y=y0)
    PNS = P(Y is y1 under do(x1) and y0 under do(x0))
    """
    for var in (x, y):
        if var not in m.endogenous:
            raise ScmError(f"{var} is not an endogenous variable")
    notes: list[str] = []
    pn: float | None
    ps: float | None
    try:
        pn = joint_counterfactual(m, [({x: x0}, {y: y0})], {x: x1, y: y1})
    except ZeroEvidence:
        pn = None
        notes.append(f"PN undefined: P({x}={x1}, {y}={y1}) = 0")
    try:
        ps = joint_counterfactual(m, [({x: x1}, {y: y1})], {x: x0, y: y0})
    except ZeroEvidence:
        ps = None
        notes.append(f"PS undefined: P({x}={x0}, {y}={y0}) = 0")
    pns = joint_counterfactual(
        m, [({x: x1}, {y: y1}), ({x: x0}, {y: y0})], {}
    )
    return PnPsResult(pn=pn, ps=ps, pns=pns, mode="exact", notes=tuple(notes))


def pnps_bounds(
    obs: JointTable,
    px1: float,
    px0: float,
    x: str = "X",
    y: str = "Y",
    x1: str = "1",
    x0: str = "0",
    y1: str = "1",
    y0: str = "0",
) -> PnPsResult:
    """Tight bounds from observational plus experimental information.

    ``px1`` and ``px0`` are P(Y=y1 | do(X=x1)) and P(Y=y1 | do(X=x0)).
    """
    for p, name in ((px1, "px1"), (px0, "px0")):
        if not 0.0 <= p <= 1.0:
            raise BoundsError(f"{name}={p} is not a probability")
    for var in (x, y):
        if var not in obs.variables:
            raise BoundsError(f"observational table lacks variable {var}")

    p_y = obs.prob({y: y1})
    p_x1y1 = obs.prob({x: x1, y: y1})
    p_x1y0 = obs.prob({x: x1, y: y0})
    p_x0y1 = obs.prob({x: x0, y: y1})
    p_x0y0 = obs.prob({x: x0, y: y0})

    pns_lo = max(0.0, px1 - px0, p_y - px0, px1 - p_y)
    pns_hi = min(px1, 1.0 - px0, p_x1y1 + p_x0y0, px1 - px0 + p_x1y0 + p_x0y1)
    pns: Bound = (pns_lo, min(1.0, pns_hi))

    notes: list[str] = []
    pn: Bound | None
    if p_x1y1 == 0.0:
        pn = None
        notes.append(f"PN undefined: P({x}={x1}, {y}={y1}) = 0")
    else:
        pn_lo = max(0.0, (p_y - px0) / p_x1y1)
        pn_hi = min(1.0, (1.0 - px0 - p_x0y0) / p_x1y1)
        pn = (pn_lo, pn_hi)

    ps: Bound | None
    if p_x0y0 == 0.0:
        ps = None
        notes.append(f"PS undefined: P({x}={x0}, {y}={y0}) = 0")
    else:
        ps_lo = max(0.0, (px1 - p_y) / p_x0y0)
        ps_hi = min(1.0, (px1 - p_x1y1) / p_x0y0)
        ps = (ps_lo, ps_hi)

    return PnPsResult(pn=pn, ps=ps, pns=pns, mode="bounds", notes=tuple(notes))
