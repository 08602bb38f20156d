"""Reduction for the call-by-value lambda-mu calculus.

Nine rules.  ad1/ad2 are administrative, eta_mu is vertical, everything
non-administrative is practical:

    ad1         N M            -> <zM>z:=N            (N non-value, z fresh)
    ad2         V N            -> <Vz>z:=N            (N non-value, z fresh)
    beta_lambda (lam x.M) V    -> <M>x:=V
    beta_let    <M>x:=V        -> M{V/x}
    beta_mu     <M>x:=mu k.J   -> mu k.J{[k][] -> [k]<M>x:=[]}
    beta_jmp    [l]mu k.J      -> J{l/k}
    eta_lambda  lam x.Vx       -> V                   (x not free in V)
    eta_let     <x>x:=M        -> M
    eta_mu      mu k.[k]M      -> M                   (k not free in M)

`redexes` works on canonical representatives and enumerates beta_mu sites at
every capture extent the equality quotient allows: at `<B>y:=mu k.J` the let
spine of B may be peeled frame by frame (re-associating lets) as long as the
peeled frame's body does not use y, each peel giving a smaller captured
context.  extent 0 is the full (maximal) capture.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .syntax import (App, JumpContext, JWhere, Lam, Mu, Node, Term, Throw, Var, Where,
                     all_names, canonicalize, children, fcv, free_vars, fresh, fv, get_sub,
                     is_value, preorder, replace_sub, size, struct_key, subst_jump_context,
                     subst_rename, subst_value)

ADMINISTRATIVE = ("ad1", "ad2")
ETA = ("eta_lambda", "eta_let", "eta_mu")
VERTICAL = ("eta_mu",)
ALL_RULES = ("ad1", "ad2", "beta_lambda", "beta_let", "beta_mu", "beta_jmp",
             "eta_lambda", "eta_let", "eta_mu")


class StaleSite(Exception):
    """The site does not denote a redex of the given term."""


@dataclass(frozen=True, slots=True)
class RedexSite:
    path: tuple[int, ...]
    rule: str
    capture_extent: int = 0


@dataclass(frozen=True)
class NormalizeOutcome:
    status: str  # "normal" | "fuel_exhausted"
    term: Node
    steps: int = 0
    trace: tuple = field(default_factory=tuple)

    @property
    def is_normal(self) -> bool:
        return self.status == "normal"


def _peels(node: Where) -> list[int]:
    """Valid beta_mu capture extents at a Where whose bound is a mu-term."""
    extents = [0]
    body, binder = node.body, node.var
    while isinstance(body, Where):
        L, x = body.body, body.var
        if not (x == binder or binder not in fv(L)):
            break
        extents.append(extents[-1] + 1)
        body = body.bound
    return extents


def _local_rules(n: Node) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    if isinstance(n, App):
        if not is_value(n.fn):
            out.append(("ad1", 0))
        elif not is_value(n.arg):
            out.append(("ad2", 0))
        elif isinstance(n.fn, Lam):
            out.append(("beta_lambda", 0))
    elif isinstance(n, Where):
        if is_value(n.bound):
            out.append(("beta_let", 0))
        if isinstance(n.bound, Mu):
            for e in _peels(n):
                out.append(("beta_mu", e))
        if isinstance(n.body, Var) and n.body.name == n.var:
            out.append(("eta_let", 0))
    elif isinstance(n, Throw):
        if isinstance(n.body, Mu):
            out.append(("beta_jmp", 0))
    elif isinstance(n, Lam):
        b = n.body
        if (isinstance(b, App) and is_value(b.fn) and b.arg == Var(n.var)
                and n.var not in fv(b.fn)):
            out.append(("eta_lambda", 0))
    elif isinstance(n, Mu):
        b = n.body
        if isinstance(b, Throw) and b.kvar == n.kvar and n.kvar not in fcv(b.body):
            out.append(("eta_mu", 0))
    return out


def redexes(t: Node, rules: tuple[str, ...] = ALL_RULES) -> list[RedexSite]:
    """One-step redexes of a canonical term, leftmost-outermost first."""
    out: list[RedexSite] = []
    for path, n in preorder(t):
        for rule, extent in _local_rules(n):
            if rule in rules:
                out.append(RedexSite(path, rule, extent))
    return out


def _contract(n: Node, rule: str, extent: int, avoid: set[str]) -> Node:
    """Contract the redex at the root of n.  Fresh names avoid `avoid`."""
    if rule == "ad1":
        z = fresh(avoid)
        return Where(App(Var(z), n.arg), z, n.fn)
    if rule == "ad2":
        z = fresh(avoid)
        return Where(App(n.fn, Var(z)), z, n.arg)
    if rule == "beta_lambda":
        return Where(n.fn.body, n.fn.var, n.arg)
    if rule == "beta_let":
        return subst_value(n.body, n.var, n.bound)
    if rule == "beta_mu":
        frames: list[tuple[Term, str]] = []
        body, binder = n.body, n.var
        for _ in range(extent):
            if not isinstance(body, Where):
                raise StaleSite("capture extent exceeds the let spine")
            L, x = body.body, body.var
            if not (x == binder or binder not in fv(L)):
                raise StaleSite("peel blocked: binder occurs in the frame body")
            frames.append((L, x))
            body = body.bound
        mu = n.bound
        k, j = mu.kvar, mu.body
        if k in fcv(body):
            nk = fresh(all_names(j) | all_names(body) | avoid, "q")
            j = subst_rename(j, k, nk)
            k = nk
        core: Node = Mu(k, subst_jump_context(j, k, JumpContext(binder, body)))
        for L, x in reversed(frames):
            core = Where(L, x, core)
        return core
    if rule == "beta_jmp":
        return subst_rename(n.body.body, n.body.kvar, n.kvar)
    if rule == "eta_lambda":
        return n.body.fn
    if rule == "eta_let":
        return n.bound
    if rule == "eta_mu":
        return n.body.body
    raise StaleSite(f"unknown rule {rule}")


def step(t: Node, site: RedexSite) -> Node:
    """Apply the redex site; the result is canonicalized."""
    try:
        n = get_sub(t, site.path)
    except (IndexError, TypeError):
        raise StaleSite(f"no subterm at {site.path}")
    if (site.rule, site.capture_extent) not in _local_rules(n):
        raise StaleSite(f"{site.rule} (extent {site.capture_extent}) does not apply at {site.path}")
    new = _contract(n, site.rule, site.capture_extent, all_names(t))
    return canonicalize(replace_sub(t, site.path, new))


def step_raw(t: Node, site: RedexSite) -> Node:
    """Like step but without the final canonicalization (for trace replay)."""
    n = get_sub(t, site.path)
    if (site.rule, site.capture_extent) not in _local_rules(n):
        raise StaleSite(f"{site.rule} does not apply at {site.path}")
    return replace_sub(t, site.path, _contract(n, site.rule, site.capture_extent, all_names(t)))


# ---------------------------------------------------------------------------
# Vertical reduction

def vertical_nf(t: Node) -> Node:
    """Exhaust eta_mu; strongly terminating and confluent, so order is free."""
    t = canonicalize(t)
    while True:
        rs = redexes(t, VERTICAL)
        if not rs:
            return t
        t = step(t, rs[0])


def vertical_reachable(start: Node, goal: Node, cap: int = 10_000) -> Optional[list[RedexSite]]:
    """A vertical reduction path start ->V* goal (modulo the quotient), if any."""
    start = canonicalize(start)
    gkey = struct_key(goal)
    seen = {struct_key(start)}
    frontier: list[tuple[Node, list[RedexSite]]] = [(start, [])]
    if struct_key(start) == gkey:
        return []
    while frontier and len(seen) < cap:
        nxt: list[tuple[Node, list[RedexSite]]] = []
        for term, path in frontier:
            for site in redexes(term, VERTICAL):
                t2 = step(term, site)
                k2 = struct_key(t2)
                if k2 == gkey:
                    return path + [site]
                if k2 not in seen:
                    seen.add(k2)
                    nxt.append((t2, path + [site]))
        frontier = nxt
    return None


# ---------------------------------------------------------------------------
# Quasi-normal / normal recognition (grammar of five classes)

def _is_class_v(t) -> bool:
    return isinstance(t, Var) or (isinstance(t, Lam) and _is_class_m(t.body))


def _is_class_n(t) -> bool:
    return isinstance(t, App) and isinstance(t.fn, Var) and _is_class_v(t.arg)


def _is_class_b(t) -> bool:
    if _is_class_v(t) or _is_class_n(t):
        return True
    return isinstance(t, Where) and _is_class_b(t.body) and _is_class_n(t.bound)


def _is_class_h(j) -> bool:
    return isinstance(j, Throw) and _is_class_b(j.body)


def _is_class_m(t) -> bool:
    if isinstance(t, Mu):
        return _is_class_h(t.body)
    return _is_class_b(t)


def is_quasi_normal(t: Node) -> bool:
    """No beta/administrative redex: membership in the M/H/B/N/V grammar."""
    if isinstance(t, (Throw, JWhere)):
        return _is_class_h(t)
    return _is_class_m(t)


def is_normal(t: Node) -> bool:
    """Quasi-normal and free of eta redexes."""
    return is_quasi_normal(t) and not redexes(t, ETA)


# ---------------------------------------------------------------------------
# Normalization and the ccv equality decision procedure

SIZE_GUARD = 200_000


def normalize(t: Node, fuel: int = 10_000, strategy: str = "direct") -> NormalizeOutcome:
    """Fuel-bounded normalization.

    direct: leftmost-outermost, non-eta rules preferred until quasi-normal,
    then eta cleanup.  via_cps: normalize the CPS image in the target
    calculus, translate back, take the vertical normal form, finish with eta
    cleanup.  Both return "normal" only when no redex remains.
    """
    assert fuel > 0
    if strategy == "direct":
        return _normalize_direct(canonicalize(t), fuel)
    if strategy == "via_cps":
        from . import cps as cps_mod
        from . import target as tgt
        p = cps_mod.cps(t)
        out = tgt.t_normalize(p, fuel)
        if out.status != "normal":
            return NormalizeOutcome("fuel_exhausted", canonicalize(t), out.steps)
        back = cps_mod.inverse(out.term).term
        res = _normalize_direct(vertical_nf(back), max(1, fuel - out.steps))
        return NormalizeOutcome(res.status, res.term, out.steps + res.steps, res.trace)
    raise ValueError(f"unknown strategy {strategy!r}")


def _normalize_direct(t: Node, fuel: int) -> NormalizeOutcome:
    steps = 0
    trace: list[tuple[int, str, tuple[int, ...], int, Node]] = []
    while True:
        rs = redexes(t)
        if not rs:
            return NormalizeOutcome("normal", t, steps, tuple(trace))
        if steps >= fuel or size(t) > SIZE_GUARD:
            return NormalizeOutcome("fuel_exhausted", t, steps, tuple(trace))
        non_eta = [r for r in rs if r.rule not in ETA]
        site = non_eta[0] if non_eta else rs[0]
        t = step(t, site)
        trace.append((steps, site.rule, site.path, site.capture_extent, t))
        steps += 1


def reducts(t: Node) -> list[tuple[RedexSite, Node]]:
    return [(site, step(t, site)) for site in redexes(t)]


def ccv_equal(a: Node, b: Node, fuel: int = 10_000) -> str:
    """Decide the reduction-generated congruence: 'equal' | 'not_equal' | 'unknown'.

    Normal forms of the CPS images decide both directions when they exist
    (completeness plus Church-Rosser in the target).  When a side has no
    normal form within fuel, fall back to a fuel-bounded bidirectional search
    for a common reduct in the source calculus, which can only answer 'equal'.
    """
    from . import cps as cps_mod
    from . import target as tgt
    a, b = canonicalize(a), canonicalize(b)
    if struct_key(a) == struct_key(b):
        return "equal"
    na = tgt.t_normalize(cps_mod.cps(a), fuel)
    nb = tgt.t_normalize(cps_mod.cps(b), fuel)
    if na.status == "normal" and nb.status == "normal":
        return "equal" if tgt.t_alpha_equal(na.term, nb.term) else "not_equal"
    if _common_reduct(a, b, fuel):
        return "equal"
    return "unknown"


def _common_reduct(a: Node, b: Node, node_budget: int, max_depth: int = 8) -> bool:
    """Bidirectional breadth-first search for a common reduct."""
    seen_a: dict[str, int] = {struct_key(a): 0}
    seen_b: dict[str, int] = {struct_key(b): 0}
    frontier_a, frontier_b = [a], [b]
    if seen_a.keys() & seen_b.keys():
        return True
    expanded = 0
    for depth in range(max_depth):
        for frontier, seen, other in ((frontier_a, seen_a, seen_b),
                                      (frontier_b, seen_b, seen_a)):
            nxt = []
            for term in frontier:
                if expanded >= node_budget:
                    return False
                expanded += 1
                if size(term) > 4000:
                    continue
                for _, t2 in reducts(term):
                    k2 = struct_key(t2)
                    if k2 in other:
                        return True
                    if k2 not in seen:
                        seen[k2] = depth + 1
                        nxt.append(t2)
            frontier[:] = nxt
        if not frontier_a and not frontier_b:
            return False
    return False
