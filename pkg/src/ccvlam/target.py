"""The four-sorted target calculus of the CPS translation.

Sorts:  T ::= lam k.Q | W W        (terms)
        Q ::= K W | T K            (jumps)
        W ::= x | lam x.T          (values)
        K ::= k | lam x.Q          (continuations)

Reduction is ordinary beta-eta; each sort is closed under it.  Construction
is sort-checked: building an ill-sorted node raises IllSorted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class IllSorted(Exception):
    pass


@dataclass(frozen=True, slots=True)
class TLamK:
    kvar: str
    body: "Q_"

    def __post_init__(self):
        _expect(self.body, ("Q",), "tlam body")


@dataclass(frozen=True, slots=True)
class WApp:
    fn: "W_"
    arg: "W_"

    def __post_init__(self):
        _expect(self.fn, ("W",), "wapp function")
        _expect(self.arg, ("W",), "wapp argument")


@dataclass(frozen=True, slots=True)
class KApp:
    k: "K_"
    arg: "W_"

    def __post_init__(self):
        _expect(self.k, ("K",), "kapp continuation")
        _expect(self.arg, ("W",), "kapp argument")


@dataclass(frozen=True, slots=True)
class TApp:
    fn: "T_"
    k: "K_"

    def __post_init__(self):
        _expect(self.fn, ("T",), "tapp function")
        _expect(self.k, ("K",), "tapp continuation")


@dataclass(frozen=True, slots=True)
class WVar:
    name: str


@dataclass(frozen=True, slots=True)
class WLam:
    var: str
    body: "T_"

    def __post_init__(self):
        _expect(self.body, ("T",), "wlam body")


@dataclass(frozen=True, slots=True)
class KVar:
    name: str


@dataclass(frozen=True, slots=True)
class KLam:
    var: str
    body: "Q_"

    def __post_init__(self):
        _expect(self.body, ("Q",), "klam body")


T_ = Union[TLamK, WApp]
Q_ = Union[KApp, TApp]
W_ = Union[WVar, WLam]
K_ = Union[KVar, KLam]
TargetTerm = Union[T_, Q_, W_, K_]

_SORTS = {TLamK: "T", WApp: "T", KApp: "Q", TApp: "Q", WVar: "W", WLam: "W", KVar: "K", KLam: "K"}


def sort_of(t: TargetTerm) -> str:
    try:
        return _SORTS[type(t)]
    except KeyError:
        raise IllSorted(f"not a target term: {t!r}")


def _expect(t, sorts, where):
    if _SORTS.get(type(t)) not in sorts:
        raise IllSorted(f"{where}: expected sort {'/'.join(sorts)}, got {t!r}")


def t_children(t: TargetTerm) -> tuple[TargetTerm, ...]:
    if isinstance(t, (TLamK, WLam, KLam)):
        return (t.body,)
    if isinstance(t, WApp):
        return (t.fn, t.arg)
    if isinstance(t, KApp):
        return (t.k, t.arg)
    if isinstance(t, TApp):
        return (t.fn, t.k)
    return ()


def t_replace(t: TargetTerm, path: tuple[int, ...], new: TargetTerm) -> TargetTerm:
    if not path:
        return new
    i, rest = path[0], path[1:]
    if isinstance(t, TLamK):
        return TLamK(t.kvar, t_replace(t.body, rest, new))
    if isinstance(t, WLam):
        return WLam(t.var, t_replace(t.body, rest, new))
    if isinstance(t, KLam):
        return KLam(t.var, t_replace(t.body, rest, new))
    if isinstance(t, WApp):
        return WApp(t_replace(t.fn, rest, new), t.arg) if i == 0 else WApp(t.fn, t_replace(t.arg, rest, new))
    if isinstance(t, KApp):
        return KApp(t_replace(t.k, rest, new), t.arg) if i == 0 else KApp(t.k, t_replace(t.arg, rest, new))
    if isinstance(t, TApp):
        return TApp(t_replace(t.fn, rest, new), t.k) if i == 0 else TApp(t.fn, t_replace(t.k, rest, new))
    raise IllSorted(f"cannot descend into {t!r}")


def t_get(t: TargetTerm, path: tuple[int, ...]) -> TargetTerm:
    for i in path:
        t = t_children(t)[i]
    return t


def t_preorder(t: TargetTerm) -> Iterator[tuple[tuple[int, ...], TargetTerm]]:
    stack = [((), t)]
    while stack:
        path, n = stack.pop()
        yield path, n
        kids = t_children(n)
        for i in range(len(kids) - 1, -1, -1):
            stack.append((path + (i,), kids[i]))


def t_size(t: TargetTerm) -> int:
    return sum(1 for _ in t_preorder(t))


# ---------------------------------------------------------------------------
# Variables and substitution (W- and K-variables live in disjoint namespaces)

def t_free(t: TargetTerm) -> tuple[frozenset[str], frozenset[str]]:
    ow: set[str] = set()
    ck: set[str] = set()
    _tfv(t, frozenset(), frozenset(), ow, ck)
    return frozenset(ow), frozenset(ck)


def _tfv(t, bw, bk, ow, ck):
    if isinstance(t, WVar):
        if t.name not in bw:
            ow.add(t.name)
    elif isinstance(t, KVar):
        if t.name not in bk:
            ck.add(t.name)
    elif isinstance(t, TLamK):
        _tfv(t.body, bw, bk | {t.kvar}, ow, ck)
    elif isinstance(t, (WLam, KLam)):
        _tfv(t.body, bw | {t.var}, bk, ow, ck)
    elif isinstance(t, WApp):
        _tfv(t.fn, bw, bk, ow, ck)
        _tfv(t.arg, bw, bk, ow, ck)
    elif isinstance(t, KApp):
        _tfv(t.k, bw, bk, ow, ck)
        _tfv(t.arg, bw, bk, ow, ck)
    elif isinstance(t, TApp):
        _tfv(t.fn, bw, bk, ow, ck)
        _tfv(t.k, bw, bk, ow, ck)


def t_all_names(t: TargetTerm) -> set[str]:
    acc: set[str] = set()
    for _, n in t_preorder(t):
        if isinstance(n, (WVar, KVar)):
            acc.add(n.name)
        elif isinstance(n, TLamK):
            acc.add(n.kvar)
        elif isinstance(n, (WLam, KLam)):
            acc.add(n.var)
    return acc


def _fresh(avoid: set[str], stem: str) -> str:
    i = 0
    while f"{stem}{i}" in avoid:
        i += 1
    return f"{stem}{i}"


def t_subst_w(t: TargetTerm, x: str, w: W_) -> TargetTerm:
    """Capture-avoiding {w/x} at sort W."""
    fw, fk = t_free(w)
    return _tsub(t, x, w, fw, fk, "w")


def t_subst_k(t: TargetTerm, k: str, kk: K_) -> TargetTerm:
    """Capture-avoiding {kk/k} at sort K."""
    fw, fk = t_free(kk)
    return _tsub(t, k, kk, fw, fk, "k")


def _tsub(t, name, repl, fw, fk, kind):
    if isinstance(t, WVar):
        return repl if (kind == "w" and t.name == name) else t
    if isinstance(t, KVar):
        return repl if (kind == "k" and t.name == name) else t
    if isinstance(t, TLamK):
        if kind == "k" and t.kvar == name:
            return t
        if t.kvar in fk:
            nk = _fresh(t_all_names(t.body) | fk | {name}, "k")
            body = _tsub(t.body, t.kvar, KVar(nk), frozenset(), frozenset({nk}), "k")
            return TLamK(nk, _tsub(body, name, repl, fw, fk, kind))
        return TLamK(t.kvar, _tsub(t.body, name, repl, fw, fk, kind))
    if isinstance(t, (WLam, KLam)):
        cls = type(t)
        if kind == "w" and t.var == name:
            return t
        if t.var in fw:
            nx = _fresh(t_all_names(t.body) | fw | {name}, "x")
            body = _tsub(t.body, t.var, WVar(nx), frozenset({nx}), frozenset(), "w")
            return cls(nx, _tsub(body, name, repl, fw, fk, kind))
        return cls(t.var, _tsub(t.body, name, repl, fw, fk, kind))
    if isinstance(t, WApp):
        return WApp(_tsub(t.fn, name, repl, fw, fk, kind), _tsub(t.arg, name, repl, fw, fk, kind))
    if isinstance(t, KApp):
        return KApp(_tsub(t.k, name, repl, fw, fk, kind), _tsub(t.arg, name, repl, fw, fk, kind))
    if isinstance(t, TApp):
        return TApp(_tsub(t.fn, name, repl, fw, fk, kind), _tsub(t.k, name, repl, fw, fk, kind))
    raise IllSorted(f"not a target term: {t!r}")


def t_alpha_equal(a: TargetTerm, b: TargetTerm) -> bool:
    return _tae(a, b, {}, {}, [0])


def _tae(a, b, ea, eb, ctr):
    if type(a) is not type(b):
        return False
    if isinstance(a, (WVar, KVar)):
        ra, rb = ea.get(a.name, a.name), eb.get(b.name, b.name)
        return ra == rb and (a.name in ea) == (b.name in eb)
    if isinstance(a, TLamK):
        i = ctr[0]
        ctr[0] += 1
        return _tae(a.body, b.body, {**ea, a.kvar: i}, {**eb, b.kvar: i}, ctr)
    if isinstance(a, (WLam, KLam)):
        i = ctr[0]
        ctr[0] += 1
        return _tae(a.body, b.body, {**ea, a.var: i}, {**eb, b.var: i}, ctr)
    if isinstance(a, WApp):
        return _tae(a.fn, b.fn, ea, eb, ctr) and _tae(a.arg, b.arg, ea, eb, ctr)
    if isinstance(a, KApp):
        return _tae(a.k, b.k, ea, eb, ctr) and _tae(a.arg, b.arg, ea, eb, ctr)
    if isinstance(a, TApp):
        return _tae(a.fn, b.fn, ea, eb, ctr) and _tae(a.k, b.k, ea, eb, ctr)
    raise IllSorted(f"not a target term: {a!r}")


def t_key(t: TargetTerm) -> str:
    out: list[str] = []
    _tkey(t, {}, [0], out)
    return "".join(out)


def _tkey(t, env, ctr, out):
    if isinstance(t, (WVar, KVar)):
        tag = "w" if isinstance(t, WVar) else "k"
        out.append(f"{tag}{env.get(t.name, '!' + t.name)};")
        return
    if isinstance(t, (TLamK, WLam, KLam)):
        i = ctr[0]
        ctr[0] += 1
        v = t.kvar if isinstance(t, TLamK) else t.var
        out.append(f"{type(t).__name__}{i}(")
        _tkey(t.body, {**env, v: i}, ctr, out)
        out.append(")")
        return
    out.append(f"{type(t).__name__}(")
    for c in t_children(t):
        _tkey(c, env, ctr, out)
    out.append(")")


# ---------------------------------------------------------------------------
# Beta-eta reduction

def redex_rule(t: TargetTerm) -> Optional[str]:
    """The rule contracting at the root of t, if any."""
    if isinstance(t, TApp) and isinstance(t.fn, TLamK):
        return "beta"
    if isinstance(t, WApp) and isinstance(t.fn, WLam):
        return "beta"
    if isinstance(t, KApp) and isinstance(t.k, KLam):
        return "beta"
    if isinstance(t, TLamK) and isinstance(t.body, TApp) and t.body.k == KVar(t.kvar):
        if t.kvar not in t_free(t.body.fn)[1]:
            return "eta"
    if isinstance(t, WLam) and isinstance(t.body, WApp) and t.body.arg == WVar(t.var):
        if t.var not in t_free(t.body.fn)[0]:
            return "eta"
    if isinstance(t, KLam) and isinstance(t.body, KApp) and t.body.arg == WVar(t.var):
        if t.var not in t_free(t.body.k)[0]:
            return "eta"
    return None


def contract(t: TargetTerm) -> TargetTerm:
    """Contract the root redex."""
    if redex_rule(t) is None:
        raise IllSorted(f"no redex at root: {t!r}")
    if isinstance(t, TApp) and isinstance(t.fn, TLamK):
        return t_subst_k(t.fn.body, t.fn.kvar, t.k)
    if isinstance(t, WApp) and isinstance(t.fn, WLam):
        return t_subst_w(t.fn.body, t.fn.var, t.arg)
    if isinstance(t, KApp) and isinstance(t.k, KLam):
        return t_subst_w(t.k.body, t.k.var, t.arg)
    if isinstance(t, TLamK):
        return t.body.fn
    if isinstance(t, (WLam, KLam)):
        return t.body.fn if isinstance(t, WLam) else t.body.k
    raise IllSorted(f"no redex at root: {t!r}")


def t_redexes(t: TargetTerm, rules: str = "betaeta") -> list[tuple[tuple[int, ...], str]]:
    """Redex positions in leftmost-outermost (preorder) order."""
    out = []
    for path, n in t_preorder(t):
        r = redex_rule(n)
        if r and (rules == "betaeta" or r == "beta"):
            out.append((path, r))
    return out


def t_step(t: TargetTerm) -> list[tuple[tuple[int, ...], str, TargetTerm]]:
    """All one-step beta-eta reducts."""
    out = []
    for path, rule in t_redexes(t):
        out.append((path, rule, t_replace(t, path, contract(t_get(t, path)))))
    return out


def t_step_at(t: TargetTerm, path: tuple[int, ...]) -> TargetTerm:
    return t_replace(t, path, contract(t_get(t, path)))


# ---------------------------------------------------------------------------
# Normal forms and normalization

def is_beta_normal(t: TargetTerm) -> bool:
    """Membership in the beta-normal-form grammar.

    T_NF ::= lam k.Q_NF | x W_NF      Q_NF ::= x W_NF K_NF | k W_NF
    W_NF ::= x | lam x.T_NF           K_NF ::= k | lam x.Q_NF
    """
    if isinstance(t, TLamK):
        return is_beta_normal(t.body)
    if isinstance(t, WApp):
        return isinstance(t.fn, WVar) and is_beta_normal(t.arg)
    if isinstance(t, TApp):
        return (isinstance(t.fn, WApp) and isinstance(t.fn.fn, WVar)
                and is_beta_normal(t.fn.arg) and is_beta_normal(t.k))
    if isinstance(t, KApp):
        return isinstance(t.k, KVar) and is_beta_normal(t.arg)
    if isinstance(t, (WVar, KVar)):
        return True
    if isinstance(t, (WLam, KLam)):
        return is_beta_normal(t.body)
    raise IllSorted(f"not a target term: {t!r}")


def is_normal(t: TargetTerm) -> bool:
    """Beta-eta normal: beta-normal and no eta redex."""
    return is_beta_normal(t) and not any(redex_rule(n) == "eta" for _, n in t_preorder(t))


def is_head_normal(t: T_) -> bool:
    """Membership in T_HN ::= lam k.Q_HN | xW with Q_HN ::= kW | xWK."""
    if isinstance(t, WApp):
        return isinstance(t.fn, WVar)
    if isinstance(t, TLamK):
        q = t.body
        if isinstance(q, KApp):
            return isinstance(q.k, KVar)
        if isinstance(q, TApp):
            return isinstance(q.fn, WApp) and isinstance(q.fn.fn, WVar)
    return False


@dataclass(frozen=True)
class TargetOutcome:
    status: str  # "normal" | "head_normal" | "fuel_exhausted"
    term: TargetTerm
    steps: int = 0
    trace: tuple = field(default_factory=tuple)


SIZE_GUARD = 200_000


def t_normalize(t: TargetTerm, fuel: int, rules: str = "betaeta",
                record: bool = False) -> TargetOutcome:
    """Leftmost-outermost normalization; Normal results satisfy the NF grammar."""
    assert fuel > 0
    steps = 0
    trace: list[tuple[tuple[int, ...], str]] = []
    while True:
        rs = t_redexes(t, rules)
        if not rs:
            assert is_beta_normal(t)
            return TargetOutcome("normal", t, steps, tuple(trace))
        if steps >= fuel or (steps % 32 == 31 and t_size(t) > SIZE_GUARD):
            return TargetOutcome("fuel_exhausted", t, steps, tuple(trace))
        path, rule = rs[0]
        if record:
            trace.append((path, rule))
        t = t_step_at(t, path)
        steps += 1


def head_redex(t: T_) -> Optional[tuple[int, ...]]:
    """Position of the unique head redex of a sort-T term, if any.

    The four head patterns: (lam x.T)W, lam k.(lam x.Q)W, lam k.(lam m.Q)K,
    lam k.(lam x.T)WK.
    """
    if isinstance(t, WApp) and isinstance(t.fn, WLam):
        return ()
    if isinstance(t, TLamK):
        q = t.body
        if isinstance(q, KApp) and isinstance(q.k, KLam):
            return (0,)
        if isinstance(q, TApp):
            if isinstance(q.fn, TLamK):
                return (0,)
            if isinstance(q.fn, WApp) and isinstance(q.fn.fn, WLam):
                return (0, 0)
    return None


def solvable(t: T_, fuel: int) -> TargetOutcome:
    """Iterated head reduction; 'head_normal' carries the head normal form."""
    assert fuel > 0
    if sort_of(t) != "T":
        raise IllSorted("solvability is defined for sort T")
    steps = 0
    while True:
        if is_head_normal(t):
            return TargetOutcome("head_normal", t, steps)
        pos = head_redex(t)
        if pos is None:
            # sort-T terms are either head-normal or have a head redex
            raise AssertionError(f"stuck non-head-normal term {t!r}")
        if steps >= fuel or (steps % 32 == 31 and t_size(t) > SIZE_GUARD):
            return TargetOutcome("fuel_exhausted", t, steps)
        t = t_step_at(t, pos)
        steps += 1
