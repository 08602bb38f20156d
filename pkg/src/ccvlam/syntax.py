"""Terms and jumps of the call-by-value lambda-mu calculus with let.

The let-binding is written to the right of its body: ``Where(L, x, M)`` is
"L where x := M", so the binder scopes over ``L`` only.  Terms and jumps are
sort-separated (a jump never sits in term position).  Terms are identified
modulo three equality axioms:

  1. let association     ``<L>x:=(<M>y:=N)  =  <(<L>x:=M)>y:=N``   (y not free in L)
  2. mu/let interchange  ``<mu k.J>x:=M     =  mu k.(<J>x:=M)``    (k not free in M)
  3. jumper/let          ``[k](<L>x:=M)     =  <[k]L>x:=M``

``canonicalize`` orients all three left-to-right (with axiom 3 pushing the
jumper outward), producing a unique representative: let spines are
left-associated, mu is hoisted out of let bodies, and every jump is a jumper
over a term.  ``struct_equal`` decides the quotient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


class NonValueSubstitution(Exception):
    """Raised when a non-value is substituted for an ordinary variable."""


class SortError(Exception):
    """A jump appeared in term position or vice versa."""


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Lam:
    var: str
    body: "Term"


@dataclass(frozen=True, slots=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True, slots=True)
class Where:
    body: "Term"
    var: str
    bound: "Term"


@dataclass(frozen=True, slots=True)
class Mu:
    kvar: str
    body: "Jump"


@dataclass(frozen=True, slots=True)
class Throw:
    kvar: str
    body: "Term"


@dataclass(frozen=True, slots=True)
class JWhere:
    body: "Jump"
    var: str
    bound: "Term"


Term = Union[Var, Lam, App, Where, Mu]
Jump = Union[Throw, JWhere]
Node = Union[Term, Jump]


@dataclass(frozen=True, slots=True)
class JumpContext:
    """The capture frame ``<body>binder:=[]`` inserted under a jumper by beta_mu."""

    binder: str
    body: Term


def is_term(t: Node) -> bool:
    return isinstance(t, (Var, Lam, App, Where, Mu))


def is_jump(t: Node) -> bool:
    return isinstance(t, (Throw, JWhere))


def is_value(t: Node) -> bool:
    return isinstance(t, (Var, Lam))


def classify(t: Term) -> str:
    """'value' for variables and lambda abstractions, 'nonvalue' otherwise."""
    return "value" if is_value(t) else "nonvalue"


# ---------------------------------------------------------------------------
# Variables

def free_vars(t: Node) -> tuple[frozenset[str], frozenset[str]]:
    """Free (ordinary, continuation) variables."""
    ord_acc: set[str] = set()
    cont_acc: set[str] = set()
    _fv(t, frozenset(), frozenset(), ord_acc, cont_acc)
    return frozenset(ord_acc), frozenset(cont_acc)


def _fv(t, bound_o, bound_c, ord_acc, cont_acc):
    if isinstance(t, Var):
        if t.name not in bound_o:
            ord_acc.add(t.name)
    elif isinstance(t, Lam):
        _fv(t.body, bound_o | {t.var}, bound_c, ord_acc, cont_acc)
    elif isinstance(t, App):
        _fv(t.fn, bound_o, bound_c, ord_acc, cont_acc)
        _fv(t.arg, bound_o, bound_c, ord_acc, cont_acc)
    elif isinstance(t, (Where, JWhere)):
        _fv(t.body, bound_o | {t.var}, bound_c, ord_acc, cont_acc)
        _fv(t.bound, bound_o, bound_c, ord_acc, cont_acc)
    elif isinstance(t, Mu):
        _fv(t.body, bound_o, bound_c | {t.kvar}, ord_acc, cont_acc)
    elif isinstance(t, Throw):
        if t.kvar not in bound_c:
            cont_acc.add(t.kvar)
        _fv(t.body, bound_o, bound_c, ord_acc, cont_acc)
    else:
        raise SortError(f"not a term or jump: {t!r}")


def fv(t: Node) -> frozenset[str]:
    return free_vars(t)[0]


def fcv(t: Node) -> frozenset[str]:
    return free_vars(t)[1]


def all_names(t: Node) -> set[str]:
    """Every identifier occurring in t, free or bound, either sort."""
    acc: set[str] = set()
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            acc.add(n.name)
        elif isinstance(n, Lam):
            acc.add(n.var)
            stack.append(n.body)
        elif isinstance(n, App):
            stack.append(n.fn)
            stack.append(n.arg)
        elif isinstance(n, (Where, JWhere)):
            acc.add(n.var)
            stack.append(n.body)
            stack.append(n.bound)
        elif isinstance(n, Mu):
            acc.add(n.kvar)
            stack.append(n.body)
        elif isinstance(n, Throw):
            acc.add(n.kvar)
            stack.append(n.body)
    return acc


def fresh(avoid: set[str] | frozenset[str], stem: str = "z") -> str:
    """First name stem0, stem1, ... not in avoid.  Deterministic."""
    i = 0
    while f"{stem}{i}" in avoid:
        i += 1
    return f"{stem}{i}"


def size(t: Node) -> int:
    n = 0
    stack = [t]
    while stack:
        x = stack.pop()
        n += 1
        if isinstance(x, Lam):
            stack.append(x.body)
        elif isinstance(x, App):
            stack.append(x.fn)
            stack.append(x.arg)
        elif isinstance(x, (Where, JWhere)):
            stack.append(x.body)
            stack.append(x.bound)
        elif isinstance(x, (Mu, Throw)):
            stack.append(x.body)
    return n


# ---------------------------------------------------------------------------
# Substitution

def subst_value(t: Node, x: str, v: Term) -> Node:
    """Capture-avoiding {v/x}.  v must be a value."""
    if not is_value(v):
        raise NonValueSubstitution(f"cannot substitute non-value {v!r} for {x}")
    return _subst(t, x, v, fv(v))


def _subst(t, x, v, fvv):
    if isinstance(t, Var):
        return v if t.name == x else t
    if isinstance(t, Lam):
        if t.var == x:
            return t
        if t.var in fvv:
            nb = fresh(all_names(t.body) | fvv | {x}, "z")
            body = _subst(t.body, t.var, Var(nb), frozenset({nb}))
            return Lam(nb, _subst(body, x, v, fvv))
        return Lam(t.var, _subst(t.body, x, v, fvv))
    if isinstance(t, App):
        return App(_subst(t.fn, x, v, fvv), _subst(t.arg, x, v, fvv))
    if isinstance(t, (Where, JWhere)):
        cls = type(t)
        bound = _subst(t.bound, x, v, fvv)
        if t.var == x:
            return cls(t.body, t.var, bound)
        if t.var in fvv:
            nb = fresh(all_names(t.body) | fvv | {x}, "z")
            body = _subst(t.body, t.var, Var(nb), frozenset({nb}))
            return cls(_subst(body, x, v, fvv), nb, bound)
        return cls(_subst(t.body, x, v, fvv), t.var, bound)
    if isinstance(t, Mu):
        return Mu(t.kvar, _subst(t.body, x, v, fvv))
    if isinstance(t, Throw):
        return Throw(t.kvar, _subst(t.body, x, v, fvv))
    raise SortError(f"not a term or jump: {t!r}")


def subst_jump_context(t: Node, k: str, ctx: JumpContext) -> Node:
    """Structural substitution {[k][] -> [k]<ctx.body>ctx.binder:=[]}.

    Every jumper [k]Q not shadowed by an inner mu k is replaced by
    [k]<body>binder:=Q, recursively inside Q as well.  The caller must ensure
    k is not free in ctx.body (rename the mu binder first).
    """
    assert k not in fcv(ctx.body), "mu binder must be renamed away from the frame"
    afv = fv(ctx.body) - {ctx.binder}
    acv = fcv(ctx.body)
    return _sjc(t, k, ctx, afv, acv)


def _sjc(t, k, ctx, afv, acv):
    if isinstance(t, Var):
        return t
    if isinstance(t, Lam):
        if t.var in afv:
            nb = fresh(all_names(t.body) | afv | acv, "z")
            return Lam(nb, _sjc(_subst(t.body, t.var, Var(nb), frozenset({nb})), k, ctx, afv, acv))
        return Lam(t.var, _sjc(t.body, k, ctx, afv, acv))
    if isinstance(t, App):
        return App(_sjc(t.fn, k, ctx, afv, acv), _sjc(t.arg, k, ctx, afv, acv))
    if isinstance(t, (Where, JWhere)):
        cls = type(t)
        bound = _sjc(t.bound, k, ctx, afv, acv)
        if t.var in afv:
            nb = fresh(all_names(t.body) | afv | acv, "z")
            body = _subst(t.body, t.var, Var(nb), frozenset({nb}))
            return cls(_sjc(body, k, ctx, afv, acv), nb, bound)
        return cls(_sjc(t.body, k, ctx, afv, acv), t.var, bound)
    if isinstance(t, Mu):
        if t.kvar == k:
            return t
        if t.kvar in acv:
            nk = fresh(all_names(t.body) | acv | {k}, "q")
            return Mu(nk, _sjc(subst_rename(t.body, t.kvar, nk), k, ctx, afv, acv))
        return Mu(t.kvar, _sjc(t.body, k, ctx, afv, acv))
    if isinstance(t, Throw):
        body = _sjc(t.body, k, ctx, afv, acv)
        if t.kvar == k:
            return Throw(k, Where(ctx.body, ctx.binder, body))
        return Throw(t.kvar, body)
    raise SortError(f"not a term or jump: {t!r}")


def subst_rename(t: Node, k: str, l: str) -> Node:
    """Jumper renaming {l/k}, i.e. {[k][] -> [l][]}, respecting mu-shadowing."""
    if isinstance(t, (Var,)):
        return t
    if isinstance(t, Lam):
        return Lam(t.var, subst_rename(t.body, k, l))
    if isinstance(t, App):
        return App(subst_rename(t.fn, k, l), subst_rename(t.arg, k, l))
    if isinstance(t, (Where, JWhere)):
        return type(t)(subst_rename(t.body, k, l), t.var, subst_rename(t.bound, k, l))
    if isinstance(t, Mu):
        if t.kvar == k:
            return t
        if t.kvar == l:
            nk = fresh(all_names(t.body) | {k, l}, "q")
            return Mu(nk, subst_rename(subst_rename(t.body, t.kvar, nk), k, l))
        return Mu(t.kvar, subst_rename(t.body, k, l))
    if isinstance(t, Throw):
        nk = l if t.kvar == k else t.kvar
        return Throw(nk, subst_rename(t.body, k, l))
    raise SortError(f"not a term or jump: {t!r}")


# ---------------------------------------------------------------------------
# Alpha equivalence

def alpha_equal(a: Node, b: Node) -> bool:
    return _ae(a, b, {}, {}, {}, {}, [0])


def _ae(a, b, oa, ob, ca, cb, ctr):
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        ra, rb = oa.get(a.name, a.name), ob.get(b.name, b.name)
        return ra == rb and (a.name in oa) == (b.name in ob)
    if isinstance(a, Lam):
        i = ctr[0]
        ctr[0] += 1
        return _ae(a.body, b.body, {**oa, a.var: i}, {**ob, b.var: i}, ca, cb, ctr)
    if isinstance(a, App):
        return _ae(a.fn, b.fn, oa, ob, ca, cb, ctr) and _ae(a.arg, b.arg, oa, ob, ca, cb, ctr)
    if isinstance(a, (Where, JWhere)):
        if not _ae(a.bound, b.bound, oa, ob, ca, cb, ctr):
            return False
        i = ctr[0]
        ctr[0] += 1
        return _ae(a.body, b.body, {**oa, a.var: i}, {**ob, b.var: i}, ca, cb, ctr)
    if isinstance(a, Mu):
        i = ctr[0]
        ctr[0] += 1
        return _ae(a.body, b.body, oa, ob, {**ca, a.kvar: i}, {**cb, b.kvar: i}, ctr)
    if isinstance(a, Throw):
        ra, rb = ca.get(a.kvar, a.kvar), cb.get(b.kvar, b.kvar)
        if ra != rb or (a.kvar in ca) != (b.kvar in cb):
            return False
        return _ae(a.body, b.body, oa, ob, ca, cb, ctr)
    raise SortError(f"not a term or jump: {a!r}")


# ---------------------------------------------------------------------------
# Canonical representatives

def canonicalize(t: Node) -> Node:
    """The unique representative of t's equality class (see module docstring)."""
    if is_jump(t):
        return _canonj(t)
    return _canon(t)


def _canon(t):
    if isinstance(t, Var):
        return t
    if isinstance(t, Lam):
        return Lam(t.var, _canon(t.body))
    if isinstance(t, App):
        return App(_canon(t.fn), _canon(t.arg))
    if isinstance(t, Mu):
        return Mu(t.kvar, _canonj(t.body))
    if isinstance(t, Where):
        return _canon_where(_canon(t.body), t.var, _canon(t.bound))
    raise SortError(f"term expected: {t!r}")


def _canon_where(L, x, M):
    # children already canonical
    if isinstance(L, Mu):
        k, j = L.kvar, L.body
        if k in fcv(M):
            nk = fresh(all_names(j) | all_names(M), "q")
            j = subst_rename(j, k, nk)
            k = nk
        return Mu(k, _canon_jwhere(j, x, M))
    if isinstance(M, Where):
        y, m1, n = M.var, M.body, M.bound
        if y == x or y in fv(L):
            ny = fresh(all_names(m1) | all_names(L) | all_names(n) | {x}, "z")
            m1 = _subst(m1, y, Var(ny), frozenset({ny}))
            y = ny
        return _canon_where(_canon_where(L, x, m1), y, n)
    return Where(L, x, M)


def _canonj(j):
    if isinstance(j, Throw):
        return Throw(j.kvar, _canon(j.body))
    if isinstance(j, JWhere):
        return _canon_jwhere(_canonj(j.body), j.var, _canon(j.bound))
    raise SortError(f"jump expected: {j!r}")


def _canon_jwhere(J, x, M):
    # J canonical (hence a Throw), M canonical; axiom 3 pushes the jumper out
    assert isinstance(J, Throw)
    return Throw(J.kvar, _canon_where(J.body, x, M))


def struct_equal(a: Node, b: Node) -> bool:
    """Equality in the quotient: alpha-equality of canonical representatives."""
    return alpha_equal(canonicalize(a), canonicalize(b))


def struct_key(t: Node) -> str:
    """A hashable alpha-invariant key for the equality class of t."""
    out: list[str] = []
    _skey(canonicalize(t), {}, {}, [0], out)
    return "".join(out)


def _skey(t, oenv, cenv, ctr, out):
    if isinstance(t, Var):
        out.append(f"v{oenv.get(t.name, '!' + t.name)};")
    elif isinstance(t, Lam):
        i = ctr[0]
        ctr[0] += 1
        out.append(f"l{i}(")
        _skey(t.body, {**oenv, t.var: i}, cenv, ctr, out)
        out.append(")")
    elif isinstance(t, App):
        out.append("a(")
        _skey(t.fn, oenv, cenv, ctr, out)
        _skey(t.arg, oenv, cenv, ctr, out)
        out.append(")")
    elif isinstance(t, (Where, JWhere)):
        tag = "w" if isinstance(t, Where) else "jw"
        _skey(t.bound, oenv, cenv, ctr, out)
        i = ctr[0]
        ctr[0] += 1
        out.append(f"{tag}{i}(")
        _skey(t.body, {**oenv, t.var: i}, cenv, ctr, out)
        out.append(")")
    elif isinstance(t, Mu):
        i = ctr[0]
        ctr[0] += 1
        out.append(f"m{i}(")
        _skey(t.body, oenv, {**cenv, t.kvar: i}, ctr, out)
        out.append(")")
    elif isinstance(t, Throw):
        out.append(f"t{cenv.get(t.kvar, '!' + t.kvar)}(")
        _skey(t.body, oenv, cenv, ctr, out)
        out.append(")")


# ---------------------------------------------------------------------------
# Path navigation (child order: Lam 0=body; App 0=fn 1=arg; Where/JWhere
# 0=body 1=bound; Mu/Throw 0=body)

def children(t: Node) -> tuple[Node, ...]:
    if isinstance(t, Var):
        return ()
    if isinstance(t, Lam):
        return (t.body,)
    if isinstance(t, App):
        return (t.fn, t.arg)
    if isinstance(t, (Where, JWhere)):
        return (t.body, t.bound)
    if isinstance(t, (Mu, Throw)):
        return (t.body,)
    raise SortError(f"not a term or jump: {t!r}")


def get_sub(t: Node, path: tuple[int, ...]) -> Node:
    for i in path:
        t = children(t)[i]
    return t


def replace_sub(t: Node, path: tuple[int, ...], new: Node) -> Node:
    if not path:
        return new
    i, rest = path[0], path[1:]
    if isinstance(t, Lam):
        return Lam(t.var, replace_sub(t.body, rest, new))
    if isinstance(t, App):
        if i == 0:
            return App(replace_sub(t.fn, rest, new), t.arg)
        return App(t.fn, replace_sub(t.arg, rest, new))
    if isinstance(t, (Where, JWhere)):
        cls = type(t)
        if i == 0:
            return cls(replace_sub(t.body, rest, new), t.var, t.bound)
        return cls(t.body, t.var, replace_sub(t.bound, rest, new))
    if isinstance(t, Mu):
        return Mu(t.kvar, replace_sub(t.body, rest, new))
    if isinstance(t, Throw):
        return Throw(t.kvar, replace_sub(t.body, rest, new))
    raise SortError(f"cannot descend into {t!r}")


def preorder(t: Node) -> Iterator[tuple[tuple[int, ...], Node]]:
    stack: list[tuple[tuple[int, ...], Node]] = [((), t)]
    while stack:
        path, n = stack.pop()
        yield path, n
        kids = children(n)
        for i in range(len(kids) - 1, -1, -1):
            stack.append((path + (i,), kids[i]))
