"""Continuation-passing translation, its inverse, and reduction transport.

The colon translation avoids administrative redexes:

    <V>[K]      = K V*               <V1 V2>[K] = V1* V2* K
    <V N>[K]    = <N>[lam y.V*yK]    <N V>[K]   = <N>[lam x.xV*K]
    <N1 N2>[K]  = <N1>[lam x.<N2>[lam y.xyK]]
    <(L where x:=M)>[K] = <M>[lam x.<L>[K]]     (alpha-convert x out of K)
    <mu k.J>[K] = (lam k.<J>) K                 (alpha-convert k out of K)
    <[k]M>      = <M>[k]
    <(J where x:=M)>    = <M>[lam x.<J>]
    x* = x      (lam x.M)* = lam x.lam k.<M>[k]
    cps(M)      = lam k.<M>[k]

Terms are canonicalized before translation (in particular mu is hoisted out
of let bodies), which fixes the one bracketing freedom and makes cps(M)
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import syntax as S
from . import target as T
from .rewrite import (ADMINISTRATIVE, RedexSite, redexes, step, vertical_nf,
                      vertical_reachable)
from .syntax import (App, JWhere, Lam, Mu, Node, Term, Throw, Var, Where, all_names,
                     canonicalize, fresh, is_value, struct_key)


class PathInvalid(Exception):
    pass


class CertificateSearchExhausted(Exception):
    pass


# ---------------------------------------------------------------------------
# Forward translation

class _Names:
    """Deterministic fresh-name supply sharing the source's symbols."""

    def __init__(self, avoid: set[str]):
        self.avoid = set(avoid)

    def ordinary(self, stem: str = "x") -> str:
        n = fresh(self.avoid, stem)
        self.avoid.add(n)
        return n

    def continuation(self, stem: str = "k") -> str:
        n = fresh(self.avoid, stem)
        self.avoid.add(n)
        return n


def cps(m: Term) -> T.T_:
    """The translation cps(M) = lam k.<M>[k], a closed-over sort-T term."""
    m = canonicalize(m)
    names = _Names(all_names(m))
    k0 = names.continuation()
    return T.TLamK(k0, colon(m, T.KVar(k0), names))


def colon(m: Node, K: T.K_, names: Optional[_Names] = None) -> T.Q_:
    """<M>[K] (for terms) or <J> (pass K=None is not allowed; jumps ignore K)."""
    if names is None:
        names = _Names(all_names(m) | T.t_all_names(K))
    return _colon(m, K, names)


def _vstar(v: Term, names: _Names) -> T.W_:
    if isinstance(v, Var):
        return T.WVar(v.name)
    if isinstance(v, Lam):
        k = names.continuation()
        return T.WLam(v.var, T.TLamK(k, _colon(v.body, T.KVar(k), names)))
    raise S.SortError(f"not a value: {v!r}")


def _colon(m: Node, K: Optional[T.K_], names: _Names) -> T.Q_:
    if isinstance(m, (Var, Lam)):
        return T.KApp(K, _vstar(m, names))
    if isinstance(m, App):
        f, a = m.fn, m.arg
        if is_value(f) and is_value(a):
            return T.TApp(T.WApp(_vstar(f, names), _vstar(a, names)), K)
        if is_value(f):
            y = names.ordinary("y")
            return _colon(a, T.KLam(y, T.TApp(T.WApp(_vstar(f, names), T.WVar(y)), K)), names)
        if is_value(a):
            x = names.ordinary("x")
            return _colon(f, T.KLam(x, T.TApp(T.WApp(T.WVar(x), _vstar(a, names)), K)), names)
        x = names.ordinary("x")
        y = names.ordinary("y")
        inner = T.KLam(y, T.TApp(T.WApp(T.WVar(x), T.WVar(y)), K))
        return _colon(f, T.KLam(x, _colon(a, inner, names)), names)
    if isinstance(m, Where):
        L, x, M = m.body, m.var, m.bound
        if x in T.t_free(K)[0]:
            z = names.ordinary("x")
            L = S.subst_value(L, x, Var(z))
            x = z
        return _colon(M, T.KLam(x, _colon(L, K, names)), names)
    if isinstance(m, Mu):
        k, j = m.kvar, m.body
        if k in T.t_free(K)[1]:
            nk = names.continuation()
            j = S.subst_rename(j, k, nk)
            k = nk
        return T.TApp(T.TLamK(k, _colon(j, None, names)), K)
    if isinstance(m, Throw):
        return _colon(m.body, T.KVar(m.kvar), names)
    if isinstance(m, JWhere):
        J, x, M = m.body, m.var, m.bound
        return _colon(M, T.KLam(x, _colon(J, None, names)), names)
    raise S.SortError(f"not a term or jump: {m!r}")


# ---------------------------------------------------------------------------
# Inverse translation

@dataclass(frozen=True)
class KHole:
    """A jump with a single hole: either [k][] or <J>x:=[]."""

    kind: str  # "jumper" | "let"
    kvar: str = ""
    jump: Optional[S.Jump] = None
    binder: str = ""

    def fill(self, m: Term) -> S.Jump:
        if self.kind == "jumper":
            return Throw(self.kvar, m)
        return JWhere(self.jump, self.binder, m)


@dataclass(frozen=True)
class InverseImage:
    term: Union[Term, S.Jump, KHole]
    sort_origin: str


def inverse(t: T.TargetTerm) -> InverseImage:
    """The inverse translation; K-sort results carry a hole."""
    return InverseImage(_inv(t), T.sort_of(t))


def inverse_term(t: T.T_) -> Term:
    img = inverse(t)
    assert img.sort_origin == "T"
    return img.term


def _inv(t: T.TargetTerm):
    if isinstance(t, T.TLamK):
        return Mu(t.kvar, _inv(t.body))
    if isinstance(t, T.WApp):
        return App(_inv(t.fn), _inv(t.arg))
    if isinstance(t, T.KApp):
        return _inv_k(t.k).fill(_inv(t.arg))
    if isinstance(t, T.TApp):
        return _inv_k(t.k).fill(_inv(t.fn))
    if isinstance(t, T.WVar):
        return Var(t.name)
    if isinstance(t, T.WLam):
        return Lam(t.var, _inv(t.body))
    if isinstance(t, (T.KVar, T.KLam)):
        return _inv_k(t)
    raise T.IllSorted(f"not a target term: {t!r}")


def _inv_k(k: T.K_) -> KHole:
    if isinstance(k, T.KVar):
        return KHole("jumper", kvar=k.name)
    return KHole("let", jump=_inv(k.body), binder=k.var)


# ---------------------------------------------------------------------------
# Administrative expansion

def dagger(m: Node) -> Node:
    """The fully let-sequenced form M+ with M ->ad* M+ and inverse(cps(M)) ->V* M+."""
    m = canonicalize(m)
    names = _Names(all_names(m))
    return _dagger(m, names)


def _dagger(m: Node, names: _Names) -> Node:
    if isinstance(m, Var):
        return m
    if isinstance(m, Lam):
        return Lam(m.var, _dagger(m.body, names))
    if isinstance(m, App):
        f, a = m.fn, m.arg
        if is_value(f) and is_value(a):
            return App(_dagger(f, names), _dagger(a, names))
        if is_value(f):
            y = names.ordinary("z")
            return Where(App(_dagger(f, names), Var(y)), y, _dagger(a, names))
        if is_value(a):
            x = names.ordinary("z")
            return Where(App(Var(x), _dagger(a, names)), x, _dagger(f, names))
        x = names.ordinary("z")
        y = names.ordinary("z")
        return Where(Where(App(Var(x), Var(y)), y, _dagger(a, names)), x, _dagger(f, names))
    if isinstance(m, (Where, JWhere)):
        return type(m)(_dagger(m.body, names), m.var, _dagger(m.bound, names))
    if isinstance(m, Mu):
        return Mu(m.kvar, _dagger(m.body, names))
    if isinstance(m, Throw):
        return Throw(m.kvar, _dagger(m.body, names))
    raise S.SortError(f"not a term or jump: {m!r}")


def admin_normalize(m: Node) -> tuple[Node, list[RedexSite]]:
    """Exhaust ad1/ad2 leftmost-outermost; the result is dagger(m) up to alpha."""
    m = canonicalize(m)
    trace: list[RedexSite] = []
    while True:
        rs = redexes(m, ADMINISTRATIVE)
        if not rs:
            return m, trace
        m = step(m, rs[0])
        trace.append(rs[0])


# ---------------------------------------------------------------------------
# Transport of target reductions to the source (sharpened completeness)

_RULE_HINTS = {
    # target rule at redex -> plausible source rule sequences
    "beta_t": (["beta_lambda", "beta_let"], ["beta_let"], []),
    "beta_q_k": (["beta_jmp"], ["beta_mu", "beta_jmp"], ["beta_mu"], []),
    "beta_q_w": (["beta_lambda", "beta_let"], ["beta_let"], []),
    "eta": (["eta_mu"], ["eta_lambda"], ["eta_let"], ["eta_let", "eta_let"], []),
}


def _target_rule_kind(t: T.TargetTerm) -> str:
    if isinstance(t, T.TApp) and isinstance(t.fn, T.TLamK):
        return "beta_q_k"
    if isinstance(t, T.WApp) and isinstance(t.fn, T.WLam):
        return "beta_t"
    if isinstance(t, T.KApp) and isinstance(t.k, T.KLam):
        return "beta_q_w"
    return "eta"


def _find_path(start: Node, goal: Node, hints, max_depth: int = 5,
               node_cap: int = 30_000) -> Optional[list[RedexSite]]:
    """Search start ->* goal over non-administrative steps, hinted first."""
    gkey = struct_key(goal)
    if struct_key(start) == gkey:
        return []
    # pass 1: scripted rule sequences, each position choice explored
    for seq in hints:
        found = _scripted(start, gkey, list(seq) + ["eta_mu"] * 3)
        if found is not None:
            return found
    # pass 2: iterative deepening over all non-administrative redexes
    budget = [node_cap]
    for depth in range(1, max_depth + 1):
        found = _iddfs(start, gkey, depth, budget)
        if found is not None:
            return found
        if budget[0] <= 0:
            break
    return None


def _scripted(start: Node, gkey: str, seq: list[str]) -> Optional[list[RedexSite]]:
    """Follow the rule script, allowing early exit once the goal is hit."""
    frontier: list[tuple[Node, list[RedexSite]]] = [(start, [])]
    for rule in seq:
        nxt: list[tuple[Node, list[RedexSite]]] = []
        for term, path in frontier:
            for site in redexes(term, (rule,)):
                t2 = step(term, site)
                p2 = path + [site]
                if struct_key(t2) == gkey:
                    return p2
                nxt.append((t2, p2))
        frontier = nxt[:64]
        if not frontier:
            return None
    return None


def _iddfs(term: Node, gkey: str, depth: int, budget: list[int],
           path: Optional[list[RedexSite]] = None) -> Optional[list[RedexSite]]:
    if path is None:
        path = []
    if depth == 0:
        return None
    for site in redexes(term):
        if site.rule in ADMINISTRATIVE:
            continue
        if budget[0] <= 0:
            return None
        budget[0] -= 1
        t2 = step(term, site)
        if struct_key(t2) == gkey:
            return path + [site]
        found = _iddfs(t2, gkey, depth - 1, budget, path + [site])
        if found is not None:
            return found
    return None


@dataclass(frozen=True)
class Transport:
    result: Term
    source_steps: tuple[RedexSite, ...]
    target_steps: tuple[tuple[tuple[int, ...], str], ...]


def complete_transport(m: Term, target_path: list[tuple[tuple[int, ...], str]],
                       fuel: int = 1_000) -> Transport:
    """Pull a target reduction cps(m) ->* N back to a source reduction.

    Returns vertical_nf(inverse(N)) with a replayable certificate
    m ->* result.  Raises PathInvalid if the target path does not replay,
    CertificateSearchExhausted if a simulation segment cannot be assembled
    within the search bounds.
    """
    m = canonicalize(m)
    p = cps(m)
    targets = [p]
    for pos, rule in target_path:
        found = [(q, r) for q, r in T.t_redexes(p) if q == tuple(pos)]
        if not found or (rule and found[0][1] != rule):
            raise PathInvalid(f"no {rule} redex at {pos}")
        p = T.t_step_at(p, tuple(pos))
        targets.append(p)

    cert: list[RedexSite] = []
    # m ->ad* m_dagger
    cur, admin_steps = admin_normalize(m)
    cert.extend(admin_steps)
    # m_dagger ->V* w_0
    w0 = vertical_nf(inverse_term(targets[0]))
    vpath = vertical_reachable(cur, w0)
    if vpath is None:
        raise CertificateSearchExhausted("no vertical path to the translated image")
    cert.extend(vpath)
    cur = w0
    # simulate each target step on the vertical normal forms
    for i in range(len(targets) - 1):
        redex = T.t_get(targets[i], target_path[i][0])
        hints = _RULE_HINTS[_target_rule_kind(redex)]
        goal = vertical_nf(inverse_term(targets[i + 1]))
        seg = _find_path(cur, goal, hints)
        if seg is None:
            raise CertificateSearchExhausted(f"segment {i} not found")
        if len(cert) + len(seg) > fuel:
            raise CertificateSearchExhausted("certificate exceeds fuel")
        cert.extend(seg)
        cur = goal
    return Transport(cur, tuple(cert), tuple((tuple(p_), r_) for p_, r_ in target_path))


def replay(m: Term, cert: tuple[RedexSite, ...]) -> Term:
    """Replay a certificate from m; raises StaleSite if any step is invalid."""
    cur = canonicalize(m)
    for site in cert:
        cur = step(cur, site)
    return cur
