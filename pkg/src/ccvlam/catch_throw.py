"""A call-by-value catch/throw calculus over the same let-based syntax.

``Catch(k, M)`` opens an exception block tagged k; ``ThrowUp(k, M)`` raises
to the enclosing block.  Continuation variables occur only as Catch binders
and throw tags.  Equality axioms mirror the lambda-mu ones (let association,
catch/let and throw/let interchange); the reduction rules keep
ad1/ad2/beta_lambda/beta_let/eta_lambda/eta_let and add seven control rules.

Equality and normalization are decided by translating into the lambda-mu
calculus (``ct_to_mu``), using its engine, and translating back
(``mu_inverse``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import rewrite as R
from . import syntax as S


class ArityMismatch(Exception):
    pass


class NotInImage(Exception):
    pass


@dataclass(frozen=True, slots=True)
class CVar:
    name: str


@dataclass(frozen=True, slots=True)
class CLam:
    var: str
    body: "CtTerm"


@dataclass(frozen=True, slots=True)
class CApp:
    fn: "CtTerm"
    arg: "CtTerm"


@dataclass(frozen=True, slots=True)
class CWhere:
    body: "CtTerm"
    var: str
    bound: "CtTerm"


@dataclass(frozen=True, slots=True)
class Catch:
    kvar: str
    body: "CtTerm"


@dataclass(frozen=True, slots=True)
class ThrowUp:
    kvar: str
    body: "CtTerm"


CtTerm = Union[CVar, CLam, CApp, CWhere, Catch, ThrowUp]


def ct_is_value(t: CtTerm) -> bool:
    return isinstance(t, (CVar, CLam))


def ct_free(t: CtTerm) -> tuple[frozenset[str], frozenset[str]]:
    ov: set[str] = set()
    cv: set[str] = set()
    _ctfv(t, frozenset(), frozenset(), ov, cv)
    return frozenset(ov), frozenset(cv)


def _ctfv(t, bo, bc, ov, cv):
    if isinstance(t, CVar):
        if t.name not in bo:
            ov.add(t.name)
    elif isinstance(t, CLam):
        _ctfv(t.body, bo | {t.var}, bc, ov, cv)
    elif isinstance(t, CApp):
        _ctfv(t.fn, bo, bc, ov, cv)
        _ctfv(t.arg, bo, bc, ov, cv)
    elif isinstance(t, CWhere):
        _ctfv(t.body, bo | {t.var}, bc, ov, cv)
        _ctfv(t.bound, bo, bc, ov, cv)
    elif isinstance(t, Catch):
        _ctfv(t.body, bo, bc | {t.kvar}, ov, cv)
    elif isinstance(t, ThrowUp):
        if t.kvar not in bc:
            cv.add(t.kvar)
        _ctfv(t.body, bo, bc, ov, cv)


def ct_all_names(t: CtTerm) -> set[str]:
    acc: set[str] = set()
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, CVar):
            acc.add(n.name)
        elif isinstance(n, (CLam, CWhere)):
            acc.add(n.var)
            stack.extend([n.body] + ([n.bound] if isinstance(n, CWhere) else []))
        elif isinstance(n, CApp):
            stack.extend([n.fn, n.arg])
        elif isinstance(n, (Catch, ThrowUp)):
            acc.add(n.kvar)
            stack.append(n.body)
    return acc


# ---------------------------------------------------------------------------
# Translation to and from the lambda-mu calculus

def ct_to_mu(t: CtTerm) -> S.Term:
    names = [ct_all_names(t)]

    def freshn(stem):
        n = S.fresh(names[0], stem)
        names[0] = names[0] | {n}
        return n

    def go(t: CtTerm) -> S.Term:
        if isinstance(t, CVar):
            return S.Var(t.name)
        if isinstance(t, CLam):
            return S.Lam(t.var, go(t.body))
        if isinstance(t, CApp):
            f, a = t.fn, t.arg
            if ct_is_value(f) and ct_is_value(a):
                return S.App(go(f), go(a))
            if ct_is_value(f):
                z = freshn("z")
                return S.Where(S.App(go(f), S.Var(z)), z, go(a))
            if ct_is_value(a):
                z = freshn("z")
                return S.Where(S.App(S.Var(z), go(a)), z, go(f))
            z = freshn("z")
            w = freshn("z")
            return S.Where(S.Where(S.App(S.Var(z), S.Var(w)), w, go(a)), z, go(f))
        if isinstance(t, CWhere):
            return S.Where(go(t.body), t.var, go(t.bound))
        if isinstance(t, Catch):
            return S.Mu(t.kvar, S.Throw(t.kvar, go(t.body)))
        if isinstance(t, ThrowUp):
            d = freshn("d")
            return S.Mu(d, S.Throw(t.kvar, go(t.body)))
        raise NotInImage(f"not a catch/throw term: {t!r}")

    return go(t)


def mu_inverse(t: S.Node) -> CtTerm:
    """The right-column inverse: mu to catch, jumpers to throws, else homomorphic."""
    if isinstance(t, S.Var):
        return CVar(t.name)
    if isinstance(t, S.Lam):
        return CLam(t.var, mu_inverse(t.body))
    if isinstance(t, S.App):
        return CApp(mu_inverse(t.fn), mu_inverse(t.arg))
    if isinstance(t, (S.Where, S.JWhere)):
        return CWhere(mu_inverse(t.body), t.var, mu_inverse(t.bound))
    if isinstance(t, S.Mu):
        return Catch(t.kvar, mu_inverse(t.body))
    if isinstance(t, S.Throw):
        return ThrowUp(t.kvar, mu_inverse(t.body))
    raise NotInImage(f"not a lambda-mu term or jump: {t!r}")


# ---------------------------------------------------------------------------
# Equality axioms and reduction

def ct_canonicalize(t: CtTerm) -> CtTerm:
    if isinstance(t, CVar):
        return t
    if isinstance(t, CLam):
        return CLam(t.var, ct_canonicalize(t.body))
    if isinstance(t, CApp):
        return CApp(ct_canonicalize(t.fn), ct_canonicalize(t.arg))
    if isinstance(t, Catch):
        return Catch(t.kvar, ct_canonicalize(t.body))
    if isinstance(t, ThrowUp):
        return ThrowUp(t.kvar, ct_canonicalize(t.body))
    if isinstance(t, CWhere):
        return _ct_canon_where(ct_canonicalize(t.body), t.var, ct_canonicalize(t.bound))
    raise NotInImage(f"not a catch/throw term: {t!r}")


def _ct_canon_where(L, x, M):
    if isinstance(L, Catch):
        k, b = L.kvar, L.body
        if k in ct_free(M)[1]:
            nk = S.fresh(ct_all_names(b) | ct_all_names(M), "q")
            b = ct_rename(b, k, nk)
            k = nk
        return Catch(k, _ct_canon_where(b, x, M))
    if isinstance(L, ThrowUp):
        return ThrowUp(L.kvar, _ct_canon_where(L.body, x, M))
    if isinstance(M, CWhere):
        y, m1, n = M.var, M.body, M.bound
        if y == x or y in ct_free(L)[0]:
            ny = S.fresh(ct_all_names(m1) | ct_all_names(L) | ct_all_names(n) | {x}, "z")
            m1 = ct_subst(m1, y, CVar(ny))
            y = ny
        return _ct_canon_where(_ct_canon_where(L, x, m1), y, n)
    return CWhere(L, x, M)


def ct_subst(t: CtTerm, x: str, v: CtTerm) -> CtTerm:
    if not ct_is_value(v):
        raise S.NonValueSubstitution(f"non-value {v!r}")
    fvv = ct_free(v)[0]

    def go(t):
        if isinstance(t, CVar):
            return v if t.name == x else t
        if isinstance(t, CLam):
            if t.var == x:
                return t
            if t.var in fvv:
                nb = S.fresh(ct_all_names(t.body) | fvv | {x}, "z")
                return CLam(nb, go(ct_subst(t.body, t.var, CVar(nb))))
            return CLam(t.var, go(t.body))
        if isinstance(t, CApp):
            return CApp(go(t.fn), go(t.arg))
        if isinstance(t, CWhere):
            bound = go(t.bound)
            if t.var == x:
                return CWhere(t.body, t.var, bound)
            if t.var in fvv:
                nb = S.fresh(ct_all_names(t.body) | fvv | {x}, "z")
                return CWhere(go(ct_subst(t.body, t.var, CVar(nb))), nb, bound)
            return CWhere(go(t.body), t.var, bound)
        if isinstance(t, Catch):
            return Catch(t.kvar, go(t.body))
        if isinstance(t, ThrowUp):
            return ThrowUp(t.kvar, go(t.body))
        raise NotInImage(f"not a catch/throw term: {t!r}")

    return go(t)


def ct_rename(t: CtTerm, k: str, l: str) -> CtTerm:
    """Structural tag renaming {l/k} with Catch shadowing."""
    if isinstance(t, CVar):
        return t
    if isinstance(t, CLam):
        return CLam(t.var, ct_rename(t.body, k, l))
    if isinstance(t, CApp):
        return CApp(ct_rename(t.fn, k, l), ct_rename(t.arg, k, l))
    if isinstance(t, CWhere):
        return CWhere(ct_rename(t.body, k, l), t.var, ct_rename(t.bound, k, l))
    if isinstance(t, Catch):
        if t.kvar == k:
            return t
        if t.kvar == l:
            nk = S.fresh(ct_all_names(t.body) | {k, l}, "q")
            return Catch(nk, ct_rename(ct_rename(t.body, t.kvar, nk), k, l))
        return Catch(t.kvar, ct_rename(t.body, k, l))
    if isinstance(t, ThrowUp):
        nk = l if t.kvar == k else t.kvar
        return ThrowUp(nk, ct_rename(t.body, k, l))
    raise NotInImage(f"not a catch/throw term: {t!r}")


def ct_throw_context(t: CtTerm, k: str, binder: str, fbody: CtTerm) -> CtTerm:
    """Structural substitution {throw k [] -> throw k <fbody>binder:=[]}."""
    afv = ct_free(fbody)[0] - {binder}
    acv = ct_free(fbody)[1]

    def go(t):
        if isinstance(t, CVar):
            return t
        if isinstance(t, CLam):
            if t.var in afv:
                nb = S.fresh(ct_all_names(t.body) | afv | acv, "z")
                return CLam(nb, go(ct_subst(t.body, t.var, CVar(nb))))
            return CLam(t.var, go(t.body))
        if isinstance(t, CApp):
            return CApp(go(t.fn), go(t.arg))
        if isinstance(t, CWhere):
            bound = go(t.bound)
            if t.var in afv:
                nb = S.fresh(ct_all_names(t.body) | afv | acv, "z")
                return CWhere(go(ct_subst(t.body, t.var, CVar(nb))), nb, bound)
            return CWhere(go(t.body), t.var, bound)
        if isinstance(t, Catch):
            if t.kvar == k:
                return t
            if t.kvar in acv:
                nk = S.fresh(ct_all_names(t.body) | acv | {k}, "q")
                return Catch(nk, go(ct_rename(t.body, t.kvar, nk)))
            return Catch(t.kvar, go(t.body))
        if isinstance(t, ThrowUp):
            body = go(t.body)
            if t.kvar == k:
                return ThrowUp(k, CWhere(fbody, binder, body))
            return ThrowUp(t.kvar, body)
        raise NotInImage(f"not a catch/throw term: {t!r}")

    return go(t)


CT_RULES = ("ad1", "ad2", "beta_lambda", "beta_let", "eta_lambda", "eta_let",
            "ct_drop", "ct_catch_throw", "ct_let_throw", "ct_throw_throw",
            "ct_let_catch", "ct_throw_catch", "ct_catch_catch")


def _ct_local(n: CtTerm) -> list[str]:
    out = []
    if isinstance(n, CApp):
        if not ct_is_value(n.fn):
            out.append("ad1")
        elif not ct_is_value(n.arg):
            out.append("ad2")
        elif isinstance(n.fn, CLam):
            out.append("beta_lambda")
    elif isinstance(n, CWhere):
        if ct_is_value(n.bound):
            out.append("beta_let")
        if isinstance(n.body, CVar) and n.body.name == n.var:
            out.append("eta_let")
        if isinstance(n.bound, ThrowUp):
            out.append("ct_let_throw")
        if isinstance(n.bound, Catch):
            out.append("ct_let_catch")
    elif isinstance(n, CLam):
        b = n.body
        if (isinstance(b, CApp) and ct_is_value(b.fn) and b.arg == CVar(n.var)
                and n.var not in ct_free(b.fn)[0]):
            out.append("eta_lambda")
    elif isinstance(n, Catch):
        if n.kvar not in ct_free(n.body)[1]:
            out.append("ct_drop")
        if isinstance(n.body, ThrowUp) and n.body.kvar == n.kvar:
            out.append("ct_catch_throw")
        if isinstance(n.body, Catch):
            out.append("ct_catch_catch")
    elif isinstance(n, ThrowUp):
        if isinstance(n.body, ThrowUp):
            out.append("ct_throw_throw")
        if isinstance(n.body, Catch):
            out.append("ct_throw_catch")
    return out


def ct_redexes(t: CtTerm) -> list[tuple[tuple[int, ...], str]]:
    out = []
    stack: list[tuple[tuple[int, ...], CtTerm]] = [((), t)]
    while stack:
        path, n = stack.pop(0)
        for rule in _ct_local(n):
            out.append((path, rule))
        if isinstance(n, (CLam, Catch, ThrowUp)):
            stack.insert(0, (path + (0,), n.body))
        elif isinstance(n, CApp):
            stack.insert(0, (path + (0,), n.fn))
            stack.insert(1, (path + (1,), n.arg))
        elif isinstance(n, CWhere):
            stack.insert(0, (path + (0,), n.body))
            stack.insert(1, (path + (1,), n.bound))
    return out


def _ct_get(t, path):
    for i in path:
        if isinstance(t, (CLam, Catch, ThrowUp)):
            t = t.body
        elif isinstance(t, CApp):
            t = t.fn if i == 0 else t.arg
        elif isinstance(t, CWhere):
            t = t.body if i == 0 else t.bound
    return t


def _ct_replace(t, path, new):
    if not path:
        return new
    i, rest = path[0], path[1:]
    if isinstance(t, CLam):
        return CLam(t.var, _ct_replace(t.body, rest, new))
    if isinstance(t, Catch):
        return Catch(t.kvar, _ct_replace(t.body, rest, new))
    if isinstance(t, ThrowUp):
        return ThrowUp(t.kvar, _ct_replace(t.body, rest, new))
    if isinstance(t, CApp):
        return CApp(_ct_replace(t.fn, rest, new), t.arg) if i == 0 else CApp(t.fn, _ct_replace(t.arg, rest, new))
    if isinstance(t, CWhere):
        if i == 0:
            return CWhere(_ct_replace(t.body, rest, new), t.var, t.bound)
        return CWhere(t.body, t.var, _ct_replace(t.bound, rest, new))
    raise NotInImage(f"cannot descend into {t!r}")


def _ct_contract(n: CtTerm, rule: str, avoid: set[str]) -> CtTerm:
    if rule == "ad1":
        z = S.fresh(avoid)
        return CWhere(CApp(CVar(z), n.arg), z, n.fn)
    if rule == "ad2":
        z = S.fresh(avoid)
        return CWhere(CApp(n.fn, CVar(z)), z, n.arg)
    if rule == "beta_lambda":
        return CWhere(n.fn.body, n.fn.var, n.arg)
    if rule == "beta_let":
        return ct_subst(n.body, n.var, n.bound)
    if rule == "eta_lambda":
        return n.body.fn
    if rule == "eta_let":
        return n.bound
    if rule == "ct_drop":
        return n.body
    if rule == "ct_catch_throw":
        return Catch(n.kvar, n.body.body)
    if rule == "ct_let_throw":
        return n.bound
    if rule == "ct_throw_throw":
        return n.body
    if rule == "ct_let_catch":
        cat = n.bound
        k, b = cat.kvar, cat.body
        if k in ct_free(n.body)[1]:
            nk = S.fresh(ct_all_names(b) | ct_all_names(n.body), "q")
            b = ct_rename(b, k, nk)
            k = nk
        wrapped = ct_throw_context(b, k, n.var, n.body)
        return Catch(k, CWhere(n.body, n.var, wrapped))
    if rule == "ct_throw_catch":
        return ThrowUp(n.kvar, ct_rename(n.body.body, n.body.kvar, n.kvar))
    if rule == "ct_catch_catch":
        return Catch(n.kvar, ct_rename(n.body.body, n.body.kvar, n.kvar))
    raise R.StaleSite(f"unknown rule {rule}")


def ct_step(t: CtTerm, path: tuple[int, ...], rule: str) -> CtTerm:
    n = _ct_get(t, path)
    if rule not in _ct_local(n):
        raise R.StaleSite(f"{rule} does not apply at {path}")
    return ct_canonicalize(_ct_replace(t, path, _ct_contract(n, rule, ct_all_names(t))))


def ct_reducts(t: CtTerm) -> list[tuple[tuple[tuple[int, ...], str], CtTerm]]:
    return [((p, r), ct_step(t, p, r)) for p, r in ct_redexes(t)]


def ct_key(t: CtTerm) -> str:
    return S.struct_key(ct_to_mu(t))


def ct_vertical_cleanup(t: CtTerm) -> CtTerm:
    """Exhaust the dummy-block rule Catch(d, M) -> M (d unused)."""
    t = ct_canonicalize(t)
    while True:
        sites = [(p, r) for p, r in ct_redexes(t) if r == "ct_drop"]
        if not sites:
            return t
        t = ct_step(t, *sites[0])


# ---------------------------------------------------------------------------
# Equality and normalization via the lambda-mu engine

def ct_equal(a: CtTerm, b: CtTerm, fuel: int = 10_000) -> str:
    return R.ccv_equal(ct_to_mu(a), ct_to_mu(b), fuel)


def ct_normalize(t: CtTerm, fuel: int = 10_000):
    """Normalize through the lambda-mu calculus; returns (status, CtTerm)."""
    out = R.normalize(ct_to_mu(t), fuel, "via_cps")
    if out.status != "normal":
        return out.status, t
    back = ct_vertical_cleanup(mu_inverse(out.term))
    # finish with leftover catch/throw redexes (translation round trip may
    # leave e.g. Catch(k, ThrowUp(k, V)))
    steps = 0
    while steps < fuel:
        rs = ct_redexes(back)
        if not rs:
            return "normal", back
        back = ct_step(back, *rs[0])
        steps += 1
    return "fuel_exhausted", back


# ---------------------------------------------------------------------------
# Encodings

def encode(which: str, *args) -> CtTerm:
    """Control-operator encodings on top of catch/throw.

    call_cc(M)        = catch k. M (lam x. throw k x)
    sato_catch(k, M)  = lam f. catch g. f (catch k. throw g M)
    sato_throw(k, M)  = throw k M
    tapply(M, k)      = M (lam x. throw k x)
    handle(k,M,x,N)   = catch g. <N>x := (catch k. throw g M)
    inl(M) = lam f. M      inr(M) = lam f. f M
    """
    def need(n):
        if len(args) != n:
            raise ArityMismatch(f"{which} takes {n} arguments, got {len(args)}")

    if which == "call_cc":
        need(1)
        (m,) = args
        k = S.fresh(ct_all_names(m), "k")
        x = S.fresh(ct_all_names(m), "x")
        return Catch(k, CApp(m, CLam(x, ThrowUp(k, CVar(x)))))
    if which == "sato_catch":
        need(2)
        k, m = args
        g = S.fresh(ct_all_names(m) | {k}, "g")
        f = S.fresh(ct_all_names(m) | {k, g}, "f")
        return CLam(f, Catch(g, CApp(CVar(f), Catch(k, ThrowUp(g, m)))))
    if which == "sato_throw":
        need(2)
        k, m = args
        return ThrowUp(k, m)
    if which == "tapply":
        need(2)
        m, k = args
        x = S.fresh(ct_all_names(m) | {k}, "x")
        return CApp(m, CLam(x, ThrowUp(k, CVar(x))))
    if which == "handle":
        need(4)
        k, m, x, n = args
        g = S.fresh(ct_all_names(m) | ct_all_names(n) | {k, x}, "g")
        return Catch(g, CWhere(n, x, Catch(k, ThrowUp(g, m))))
    if which == "inl":
        need(1)
        (m,) = args
        f = S.fresh(ct_all_names(m), "f")
        return CLam(f, m)
    if which == "inr":
        need(1)
        (m,) = args
        f = S.fresh(ct_all_names(m), "f")
        return CLam(f, CApp(CVar(f), m))
    raise ArityMismatch(f"unknown encoding {which!r}")
