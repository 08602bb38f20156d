"""Strict intersection types for the sorted target calculus.

    sigma ::= atom | sigma_cap -> tau        sigma_cap ::= Cap(sigma...)
    kappa ::= Neg(sigma_cap)                 kappa_cap ::= Cap(kappa...)
    tau   ::= Neg(kappa_cap)

Arrow codomains are strict; the empty Cap is omega.  Q-sort subjects are
typed by the special TBOT only.  Judgements carry two environments, Pi for
ordinary variables (sigma-caps) and Theta for continuation variables
(kappa-caps); the eleven rules are the eight term rules plus one inheritance
rule per strict category.

``t_subject_reduce``/``t_subject_expand`` realize beta subject reduction and
expansion constructively: the step function records where the argument's
residual copies land, reduction substitutes argument derivations for the
binder's variable leaves, and expansion collects the residual copies' strict
types, intersects them at the binder, and rebuilds the redex typing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

from . import target as T


class TCategoryMismatch(Exception):
    pass


class NotNormal(Exception):
    pass


class OccurrenceTrackingFailure(Exception):
    pass


@dataclass(frozen=True)
class TAtom:
    name: str


@dataclass(frozen=True)
class TArrow:
    arg: "TCap"
    res: "TTy"  # a tau (strict)


@dataclass(frozen=True)
class TNeg:
    arg: "TCap"


@dataclass(frozen=True)
class TCap:
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(sorted(self.items, key=t_ty_key)))


class TBotType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TBOT"


TBOT = TBotType()
TTy = Union[TAtom, TArrow, TNeg]


def t_ty_key(t) -> str:
    if isinstance(t, TAtom):
        return f"a:{t.name};"
    if isinstance(t, TArrow):
        return f"r({t_ty_key(t.arg)}{t_ty_key(t.res)})"
    if isinstance(t, TNeg):
        return f"n({t_ty_key(t.arg)})"
    if isinstance(t, TCap):
        return "c(" + "".join(t_ty_key(i) for i in t.items) + ")"
    if t is TBOT:
        return "bot;"
    raise TCategoryMismatch(f"not a target type: {t!r}")


TOMEGA = TCap(())


def is_sigma(t) -> bool:
    if isinstance(t, TAtom):
        return True
    if isinstance(t, TArrow):
        return is_sigma_cap(t.arg) and is_tau(t.res)
    return False


def is_sigma_cap(t) -> bool:
    return isinstance(t, TCap) and all(is_sigma(i) for i in t.items)


def is_kappa(t) -> bool:
    return isinstance(t, TNeg) and is_sigma_cap(t.arg)


def is_kappa_cap(t) -> bool:
    return isinstance(t, TCap) and all(is_kappa(i) for i in t.items)


def is_tau(t) -> bool:
    return isinstance(t, TNeg) and is_kappa_cap(t.arg)


def t_contains_omega(t) -> bool:
    if isinstance(t, TAtom) or t is TBOT:
        return False
    if isinstance(t, TArrow):
        return t_contains_omega(t.arg) or t_contains_omega(t.res)
    if isinstance(t, TNeg):
        return t_contains_omega(t.arg)
    if isinstance(t, TCap):
        return not t.items or any(t_contains_omega(i) for i in t.items)
    raise TCategoryMismatch(f"not a target type: {t!r}")


# ---------------------------------------------------------------------------
# Subtyping (mapping characterization; reflexivity/transitivity admissible)

def t_subtype(a, b) -> bool:
    if isinstance(a, TCap) and isinstance(b, TCap):
        return _t_sub_cap(a, b)
    if isinstance(a, TCap) or isinstance(b, TCap):
        return _t_sub_cap(a if isinstance(a, TCap) else TCap((a,)),
                          b if isinstance(b, TCap) else TCap((b,)))
    return _t_sub(a, b)


@lru_cache(maxsize=200_000)
def _t_sub_cap(a: TCap, b: TCap) -> bool:
    return all(any(_t_sub(x, y) for x in a.items) for y in b.items)


@lru_cache(maxsize=200_000)
def _t_sub(a, b) -> bool:
    if isinstance(a, TAtom) and isinstance(b, TAtom):
        return a.name == b.name
    if isinstance(a, TArrow) and isinstance(b, TArrow):
        return _t_sub_cap(b.arg, a.arg) and _t_sub(a.res, b.res)
    if isinstance(a, TNeg) and isinstance(b, TNeg):
        return _t_sub_cap(b.arg, a.arg)
    return False


# ---------------------------------------------------------------------------
# Judgements and derivations

def env_get(env: tuple, name: str, default):
    for n, v in env:
        if n == name:
            return v
    return default


def env_set(env: tuple, name: str, val) -> tuple:
    out = tuple((n, v) for n, v in env if n != name) + ((name, val),)
    return tuple(sorted(out))


def env_del(env: tuple, name: str) -> tuple:
    return tuple((n, v) for n, v in env if n != name)


@dataclass(frozen=True)
class TJudgement:
    pi: tuple      # ((x, sigma_cap), ...) sorted
    theta: tuple   # ((k, kappa_cap), ...) sorted
    subject: T.TargetTerm
    ty: object     # strict type or TBOT


@dataclass(frozen=True)
class TDrv:
    rule: str      # tlam|wapp|kapp|tapp|wvar|kvar|wlam|klam|inherit
    judgement: TJudgement
    premises: tuple


def _fail(strict: bool, msg: str) -> bool:
    if strict:
        raise AssertionError(msg)
    return False


def t_check_derivation(d: TDrv, strict: bool = False) -> bool:
    """Locally validate every node; strict=True raises at the first failure."""
    j = d.judgement
    t = j.subject
    rule = d.rule
    ps = d.premises

    def prem_ok():
        return all(t_check_derivation(p, strict) for p in ps)

    if rule == "inherit":
        if len(ps) != 1:
            return _fail(strict, "inherit arity")
        p = ps[0].judgement
        if p.subject != t or p.pi != j.pi or p.theta != j.theta:
            return _fail(strict, "inherit changes the judgement beyond the type")
        if p.ty is TBOT or j.ty is TBOT:
            return _fail(strict, "inherit on a jump judgement")
        if not t_subtype(p.ty, j.ty):
            return _fail(strict, "inherit against subtyping")
        return prem_ok()
    if rule == "wvar":
        if not isinstance(t, T.WVar) or ps:
            return _fail(strict, "wvar shape")
        cap = env_get(j.pi, t.name, None)
        if cap is None or j.ty not in cap.items:
            return _fail(strict, f"wvar {t.name}: type not an environment component")
        return True
    if rule == "kvar":
        if not isinstance(t, T.KVar) or ps:
            return _fail(strict, "kvar shape")
        cap = env_get(j.theta, t.name, None)
        if cap is None or j.ty not in cap.items:
            return _fail(strict, f"kvar {t.name}: type not an environment component")
        return True
    if rule == "tlam":
        if not isinstance(t, T.TLamK) or len(ps) != 1:
            return _fail(strict, "tlam shape")
        if not (isinstance(j.ty, TNeg) and is_kappa_cap(j.ty.arg)):
            return _fail(strict, "tlam type must be a tau")
        p = ps[0].judgement
        if (p.subject != t.body or p.ty is not TBOT or p.pi != j.pi
                or p.theta != env_set(j.theta, t.kvar, j.ty.arg)):
            return _fail(strict, "tlam premise mismatch")
        return prem_ok()
    if rule == "wlam":
        if not isinstance(t, T.WLam) or len(ps) != 1:
            return _fail(strict, "wlam shape")
        if not isinstance(j.ty, TArrow):
            return _fail(strict, "wlam type must be an arrow")
        p = ps[0].judgement
        if (p.subject != t.body or p.ty != j.ty.res or p.theta != j.theta
                or p.pi != env_set(j.pi, t.var, j.ty.arg)):
            return _fail(strict, "wlam premise mismatch")
        return prem_ok()
    if rule == "klam":
        if not isinstance(t, T.KLam) or len(ps) != 1:
            return _fail(strict, "klam shape")
        if not (isinstance(j.ty, TNeg) and is_sigma_cap(j.ty.arg)):
            return _fail(strict, "klam type must be a kappa")
        p = ps[0].judgement
        if (p.subject != t.body or p.ty is not TBOT or p.theta != j.theta
                or p.pi != env_set(j.pi, t.var, j.ty.arg)):
            return _fail(strict, "klam premise mismatch")
        return prem_ok()
    if rule == "wapp":
        if not isinstance(t, T.WApp) or not ps:
            return _fail(strict, "wapp shape")
        f = ps[0].judgement
        if f.subject != t.fn or not isinstance(f.ty, TArrow) or f.ty.res != j.ty:
            return _fail(strict, "wapp function premise")
        if f.pi != j.pi or f.theta != j.theta:
            return _fail(strict, "wapp environments")
        args = ps[1:]
        if tuple(sorted((p.judgement.ty for p in args), key=t_ty_key)) != f.ty.arg.items:
            return _fail(strict, "wapp argument family mismatch")
        for p in args:
            q = p.judgement
            if q.subject != t.arg or q.pi != j.pi or q.theta != j.theta:
                return _fail(strict, "wapp argument premise")
        return prem_ok()
    if rule == "kapp":
        if not isinstance(t, T.KApp) or not ps or j.ty is not TBOT:
            return _fail(strict, "kapp shape")
        f = ps[0].judgement
        if f.subject != t.k or not (isinstance(f.ty, TNeg) and is_sigma_cap(f.ty.arg)):
            return _fail(strict, "kapp continuation premise")
        if f.pi != j.pi or f.theta != j.theta:
            return _fail(strict, "kapp environments")
        args = ps[1:]
        if tuple(sorted((p.judgement.ty for p in args), key=t_ty_key)) != f.ty.arg.items:
            return _fail(strict, "kapp argument family mismatch")
        for p in args:
            q = p.judgement
            if q.subject != t.arg or q.pi != j.pi or q.theta != j.theta:
                return _fail(strict, "kapp argument premise")
        return prem_ok()
    if rule == "tapp":
        if not isinstance(t, T.TApp) or not ps or j.ty is not TBOT:
            return _fail(strict, "tapp shape")
        f = ps[0].judgement
        if f.subject != t.fn or not (isinstance(f.ty, TNeg) and is_kappa_cap(f.ty.arg)):
            return _fail(strict, "tapp function premise")
        if f.pi != j.pi or f.theta != j.theta:
            return _fail(strict, "tapp environments")
        args = ps[1:]
        if tuple(sorted((p.judgement.ty for p in args), key=t_ty_key)) != f.ty.arg.items:
            return _fail(strict, "tapp continuation family mismatch")
        for p in args:
            q = p.judgement
            if q.subject != t.k or q.pi != j.pi or q.theta != j.theta:
                return _fail(strict, "tapp continuation premise")
        return prem_ok()
    return _fail(strict, f"unknown rule {rule!r}")


def mk(rule: str, pi, theta, subject, ty, premises=()) -> TDrv:
    return TDrv(rule, TJudgement(tuple(sorted(pi)), tuple(sorted(theta)), subject, ty),
                tuple(premises))


def t_inherit(d: TDrv, ty) -> TDrv:
    if d.judgement.ty == ty:
        return d
    j = d.judgement
    return TDrv("inherit", TJudgement(j.pi, j.theta, j.subject, ty), (d,))


# ---------------------------------------------------------------------------
# Inference for beta-normal and head-normal terms

class _Usage:
    """Collects per-variable strict types and mints fresh atoms."""

    def __init__(self, allow_omega: bool):
        self.allow_omega = allow_omega
        self.counter = 0

    def fresh_atom(self) -> TAtom:
        a = TAtom(f"a{self.counter}")
        self.counter += 1
        return a

    def default_sigma_cap(self) -> TCap:
        return TOMEGA if self.allow_omega else TCap((self.fresh_atom(),))

    def default_kappa_cap(self) -> TCap:
        return TOMEGA if self.allow_omega else TCap((TNeg(TCap((self.fresh_atom(),))),))


def t_infer_normal(t: T.TargetTerm, allow_omega: bool = True) -> list[tuple[tuple, tuple, object, TDrv]]:
    """Syntax-directed typing of a beta-normal term.

    Returns [(pi, theta, type, derivation)]; with allow_omega=False no omega
    occurs in the bottom judgement (inner nodes may still use it).
    """
    if not T.is_beta_normal(t):
        raise NotNormal(f"not beta-normal: {t!r}")
    u = _Usage(allow_omega)
    d = _infer_nf(t, u)
    return [(d.judgement.pi, d.judgement.theta, d.judgement.ty, d)]


def _record(usages, kind, name, ty):
    usages.setdefault((kind, name), []).append(ty)


def _infer_nf(t: T.TargetTerm, u: _Usage) -> TDrv:
    """Infers a derivation; every variable occurrence gets its own strict
    type, binders intersect the usages of their subtree, and a second pass
    threads consistent environments through the skeleton."""
    usages: dict = {}
    skel = _skeleton_nf(t, u, usages)
    pi = tuple(sorted((name, TCap(tuple(tys))) for (kind, name), tys in usages.items()
                      if kind == "w" and tys))
    theta = tuple(sorted((name, TCap(tuple(tys))) for (kind, name), tys in usages.items()
                         if kind == "k" and tys))
    return _instantiate(skel, pi, theta)


@dataclass(frozen=True)
class _Skel:
    rule: str
    subject: T.TargetTerm
    ty: object
    premises: tuple
    binder: Optional[tuple] = None  # (kind, name, cap) introduced below this node


def _take(usages, kind, name):
    return usages.pop((kind, name), [])


def _skeleton_nf(t, u: _Usage, usages) -> _Skel:
    if isinstance(t, T.WVar):
        ty = u.fresh_atom()
        _record(usages, "w", t.name, ty)
        return _Skel("wvar", t, ty, ())
    if isinstance(t, T.KVar):
        # a continuation consumed with no demands on its argument
        ty = TNeg(u.default_sigma_cap())
        _record(usages, "k", t.name, ty)
        return _Skel("kvar", t, ty, ())
    if isinstance(t, (T.WLam, T.KLam)):
        local: dict = {}
        body = _skeleton_nf(t.body, u, local)
        got = _take(local, "w", t.var)
        for (kind, name), tys in local.items():
            for ty in tys:
                _record(usages, kind, name, ty)
        cap = TCap(tuple(got)) if got else u.default_sigma_cap()
        if isinstance(t, T.WLam):
            return _Skel("wlam", t, TArrow(cap, body.ty), (body,), ("w", t.var, cap))
        return _Skel("klam", t, TNeg(cap), (body,), ("w", t.var, cap))
    if isinstance(t, T.TLamK):
        local = {}
        body = _skeleton_nf(t.body, u, local)
        got = _take(local, "k", t.kvar)
        for (kind, name), tys in local.items():
            for ty in tys:
                _record(usages, kind, name, ty)
        cap = TCap(tuple(got)) if got else u.default_kappa_cap()
        return _Skel("tlam", t, TNeg(cap), (body,), ("k", t.kvar, cap))
    if isinstance(t, T.WApp):
        # beta-normal: fn is a variable; give it exactly the arrow demanded
        arg = _skeleton_nf(t.arg, u, usages)
        res = TNeg(u.default_kappa_cap())
        fnty = TArrow(TCap((arg.ty,)), res)
        _record(usages, "w", t.fn.name, fnty)
        fn = _Skel("wvar", t.fn, fnty, ())
        return _Skel("wapp", t, res, (fn, arg))
    if isinstance(t, T.KApp):
        # fn is a continuation variable
        arg = _skeleton_nf(t.arg, u, usages)
        kty = TNeg(TCap((arg.ty,)))
        _record(usages, "k", t.k.name, kty)
        fn = _Skel("kvar", t.k, kty, ())
        return _Skel("kapp", t, TBOT, (fn, arg))
    if isinstance(t, T.TApp):
        # x W K: type the continuation at one strict kappa
        arg = _skeleton_nf(t.fn.arg, u, usages)
        kd = _skeleton_nf(t.k, u, usages)
        res = TNeg(TCap((kd.ty,)))
        fnty = TArrow(TCap((arg.ty,)), res)
        _record(usages, "w", t.fn.fn.name, fnty)
        fn = _Skel("wvar", t.fn.fn, fnty, ())
        wa = _Skel("wapp", t.fn, res, (fn, arg))
        return _Skel("tapp", t, TBOT, (wa, kd))
    raise NotNormal(f"unexpected shape in beta-normal term: {t!r}")


def _instantiate(skel: _Skel, pi: tuple, theta: tuple) -> TDrv:
    ps = []
    if skel.binder is not None:
        kind, name, cap = skel.binder
        inner_pi = env_set(pi, name, cap) if kind == "w" else pi
        inner_theta = env_set(theta, name, cap) if kind == "k" else theta
        ps = [_instantiate(p, inner_pi, inner_theta) for p in skel.premises]
    else:
        ps = [_instantiate(p, pi, theta) for p in skel.premises]
    return TDrv(skel.rule, TJudgement(pi, theta, skel.subject, skel.ty), tuple(ps))


def t_infer_head(t: T.T_) -> TDrv:
    """Type a head-normal sort-T term, leaving un-examined parts at omega."""
    if not T.is_head_normal(t):
        raise NotNormal(f"not head-normal: {t!r}")
    if isinstance(t, T.WApp):
        # xW: give x the arrow omega -> neg(omega)
        res = TNeg(TOMEGA)
        fnty = TArrow(TOMEGA, res)
        pi = ((t.fn.name, TCap((fnty,))),)
        fn = mk("wvar", pi, (), t.fn, fnty)
        return mk("wapp", pi, (), t, res, (fn,))
    q = t.body
    if isinstance(q, T.KApp):
        # lam k. k' W (k' possibly the binder, possibly free)
        kty = TNeg(TOMEGA)
        theta = ((q.k.name, TCap((kty,))),)
        fn = mk("kvar", (), theta, q.k, kty)
        qd = mk("kapp", (), theta, q, TBOT, (fn,))
        pi: tuple = ()
    else:
        # lam k. x W K; the empty continuation family asks nothing of K
        res = TNeg(TOMEGA)
        fnty = TArrow(TOMEGA, res)
        pi = ((q.fn.fn.name, TCap((fnty,))),)
        fn = mk("wvar", pi, (), q.fn.fn, fnty)
        wa = mk("wapp", pi, (), q.fn, res, (fn,))
        qd = mk("tapp", pi, (), q, TBOT, (wa,))
    cap = env_get(qd.judgement.theta, t.kvar, None)
    if cap is None:
        cap = TOMEGA
        qd = _weaken_theta(qd, t.kvar, cap)
    theta_out = env_del(qd.judgement.theta, t.kvar)
    return mk("tlam", qd.judgement.pi, theta_out, t, TNeg(cap), (qd,))


def _weaken_theta(d: TDrv, k: str, cap) -> TDrv:
    """Add an unused continuation entry throughout; a tlam rebinding k keeps
    its subtree (env_set in its premise replaces k anyway)."""
    j = d.judgement
    nj = TJudgement(j.pi, env_set(j.theta, k, cap), j.subject, j.ty)
    if d.rule == "tlam" and j.subject.kvar == k:
        return TDrv(d.rule, nj, d.premises)
    return TDrv(d.rule, nj, tuple(_weaken_theta(p, k, cap) for p in d.premises))


def t_weaken(d: TDrv, pi_extra: tuple = (), theta_extra: tuple = ()) -> TDrv:
    """Add unused environment entries throughout (shadow-aware)."""
    out = d
    for x, cap in pi_extra:
        out = _weaken_pi(out, x, cap)
    for k, cap in theta_extra:
        out = _weaken_theta(out, k, cap)
    return out


def _weaken_pi(d: TDrv, x: str, cap) -> TDrv:
    j = d.judgement
    nj = TJudgement(env_set(j.pi, x, cap), j.theta, j.subject, j.ty)
    if d.rule in ("wlam", "klam") and j.subject.var == x:
        return TDrv(d.rule, nj, d.premises)
    return TDrv(d.rule, nj, tuple(_weaken_pi(p, x, cap) for p in d.premises))


# ---------------------------------------------------------------------------
# Tracked beta steps

@dataclass(frozen=True)
class TStepRecord:
    path: tuple            # redex position in the pre-term
    kind: str              # "tapp" | "kapp" | "wapp"
    binder: str
    argument: T.TargetTerm
    arg_positions: tuple   # residual copies, relative to the contractum


def _free_positions(t: T.TargetTerm, name: str, kind: str) -> list[tuple]:
    """Positions of free occurrences of an ordinary ('w') or continuation
    ('k') variable.  Substitution is shape-preserving away from these leaves,
    so they are also the positions of the residual copies after {arg/name}."""
    out: list[tuple] = []

    def go(t, path, shadowed):
        if isinstance(t, T.WVar):
            if kind == "w" and t.name == name and not shadowed:
                out.append(path)
            return
        if isinstance(t, T.KVar):
            if kind == "k" and t.name == name and not shadowed:
                out.append(path)
            return
        if isinstance(t, T.TLamK):
            go(t.body, path + (0,), shadowed or (kind == "k" and t.kvar == name))
            return
        if isinstance(t, (T.WLam, T.KLam)):
            go(t.body, path + (0,), shadowed or (kind == "w" and t.var == name))
            return
        for i, c in enumerate(T.t_children(t)):
            go(c, path + (i,), shadowed)

    go(t, (), False)
    return out


def t_beta_step_tracked(t: T.TargetTerm, path: tuple) -> tuple[T.TargetTerm, TStepRecord]:
    red = T.t_get(t, path)
    if isinstance(red, T.TApp) and isinstance(red.fn, T.TLamK):
        kind, binder, body, arg = "tapp", red.fn.kvar, red.fn.body, red.k
        vkind = "k"
    elif isinstance(red, T.WApp) and isinstance(red.fn, T.WLam):
        kind, binder, body, arg = "wapp", red.fn.var, red.fn.body, red.arg
        vkind = "w"
    elif isinstance(red, T.KApp) and isinstance(red.k, T.KLam):
        kind, binder, body, arg = "kapp", red.k.var, red.k.body, red.arg
        vkind = "w"
    else:
        raise OccurrenceTrackingFailure(f"not a beta redex: {red!r}")
    positions = _free_positions(body, binder, vkind)
    contractum = (T.t_subst_k if vkind == "k" else T.t_subst_w)(body, binder, arg)
    rec = TStepRecord(path, kind, binder, arg, tuple(positions))
    return T.t_replace(t, path, contractum), rec


def head_step_tracked(t: T.T_) -> tuple[T.T_, TStepRecord]:
    pos = T.head_redex(t)
    if pos is None:
        raise OccurrenceTrackingFailure("no head redex")
    return t_beta_step_tracked(t, pos)


def t_solvable_tracked(t: T.T_, fuel: int) -> Optional[tuple[T.T_, list[TStepRecord]]]:
    """Head-normalize recording each beta step; None on fuel exhaustion."""
    recs: list[TStepRecord] = []
    steps = 0
    while not T.is_head_normal(t):
        if steps >= fuel or (steps % 32 == 31 and T.t_size(t) > T.SIZE_GUARD):
            return None
        t, rec = head_step_tracked(t)
        recs.append(rec)
        steps += 1
    return t, recs


def t_normalize_tracked(t: T.TargetTerm, fuel: int) -> Optional[tuple[T.TargetTerm, list[TStepRecord]]]:
    """Leftmost beta normalization with step records; None on fuel exhaustion."""
    recs: list[TStepRecord] = []
    steps = 0
    while True:
        rs = T.t_redexes(t, "beta")
        if not rs:
            return t, recs
        if steps >= fuel or (steps % 32 == 31 and T.t_size(t) > T.SIZE_GUARD):
            return None
        t, rec = t_beta_step_tracked(t, rs[0][0])
        recs.append(rec)
        steps += 1


# ---------------------------------------------------------------------------
# Derivation navigation

def _premise_children(d: TDrv) -> list[tuple[int, int]]:
    """For each premise index, the subject child index it covers."""
    r = d.rule
    if r == "inherit":
        return [(0, -1)]  # same subject
    if r in ("tlam", "wlam", "klam"):
        return [(0, 0)]
    if r in ("wapp", "kapp", "tapp"):
        return [(0, 0)] + [(i, 1) for i in range(1, len(d.premises))]
    return []


def t_transform_at(d: TDrv, path: tuple, fn, fn_term=None) -> TDrv:
    """Apply fn to every subderivation whose subject sits at `path`, rebuilding
    subjects along the spine (fn may change the subject).

    Positions inside empty typing families carry no subderivation; there the
    subject is rewritten syntactically with fn_term."""
    if not path:
        return fn(d)
    new_premises = list(d.premises)
    new_child_subject = None
    for pi_, ci in _premise_children(d):
        if ci == -1:  # inherit: same subject, same path
            new_premises[pi_] = t_transform_at(d.premises[pi_], path, fn, fn_term)
            new_child_subject = new_premises[pi_].judgement.subject
            j = d.judgement
            return TDrv(d.rule, TJudgement(j.pi, j.theta, new_child_subject, j.ty),
                        tuple(new_premises))
        if ci == path[0]:
            new_premises[pi_] = t_transform_at(d.premises[pi_], path[1:], fn, fn_term)
            new_child_subject = new_premises[pi_].judgement.subject
    j = d.judgement
    if new_child_subject is None:
        if fn_term is None:
            raise OccurrenceTrackingFailure(f"path {path} not covered at rule {d.rule}")
        new_subject = T.t_replace(j.subject, path, fn_term(T.t_get(j.subject, path)))
        return TDrv(d.rule, TJudgement(j.pi, j.theta, new_subject, j.ty), d.premises)
    new_subject = T.t_replace(j.subject, (path[0],), new_child_subject)
    return TDrv(d.rule, TJudgement(j.pi, j.theta, new_subject, j.ty), tuple(new_premises))


def _strip_inherits(d: TDrv) -> tuple[TDrv, object]:
    """Peel inherit nodes; returns (core, outer type)."""
    ty = d.judgement.ty
    while d.rule == "inherit":
        d = d.premises[0]
    return d, ty


# ---------------------------------------------------------------------------
# Environment surgery

def t_reenv(d: TDrv, pi: tuple, theta: tuple) -> TDrv:
    """Re-thread the given environments through a derivation (binders rebind
    as usual).  Valid whenever every variable leaf still finds its type."""
    j = d.judgement
    s = j.subject
    if d.rule == "tlam":
        prems = (t_reenv(d.premises[0], pi, env_set(theta, s.kvar, j.ty.arg)),)
    elif d.rule in ("wlam", "klam"):
        prems = (t_reenv(d.premises[0], env_set(pi, s.var, j.ty.arg), theta),)
    else:
        prems = tuple(t_reenv(p, pi, theta) for p in d.premises)
    return TDrv(d.rule, TJudgement(tuple(sorted(pi)), tuple(sorted(theta)), s, j.ty), prems)


# ---------------------------------------------------------------------------
# Subject reduction (substitute argument derivations for binder leaves)

def t_subject_reduce(d: TDrv, rec: TStepRecord) -> TDrv:
    """Derivation for the contractum of the recorded beta step, same judgement."""
    return t_transform_at(d, rec.path, lambda sub: _reduce_redex(sub, rec),
                          fn_term=lambda sub: T.t_step_at(sub, ()))


def _reduce_redex(d: TDrv, rec: TStepRecord) -> TDrv:
    core, outer_ty = _strip_inherits(d)
    fn_prem = core.premises[0]
    arg_prems = list(core.premises[1:])
    fn_core, _ = _strip_inherits(fn_prem)
    lam = fn_core.judgement.subject
    body_drv = fn_core.premises[0]
    vkind = "k" if rec.kind == "tapp" else "w"

    def resolve(want, leaf_pi, leaf_theta, actual_subject):
        for p in arg_prems:
            if t_subtype(p.judgement.ty, want):
                if p.judgement.subject != actual_subject:
                    raise OccurrenceTrackingFailure("argument copy mismatch")
                return t_inherit(t_reenv(p, leaf_pi, leaf_theta), want)
        raise OccurrenceTrackingFailure(f"no argument derivation for {want!r}")

    contractum = (T.t_subst_k if vkind == "k" else T.t_subst_w)(
        lam.body, lam.kvar if vkind == "k" else lam.var, rec.argument)
    out = _subst_drv(body_drv, lam.kvar if vkind == "k" else lam.var, vkind,
                     resolve, contractum, {})
    out = t_inherit(out, core.judgement.ty)
    return t_inherit(out, outer_ty)


def _subst_drv(d: TDrv, binder: str, vkind: str, resolve, actual, rename: dict) -> TDrv:
    """Walk derivation and actual contractum in lockstep, replacing binder
    leaves with argument derivations and renaming crossed binders."""
    j = d.judgement
    subj = j.subject

    def fix_env(env, dropped):
        out = []
        for n, v in env:
            if n == dropped:
                continue
            out.append((rename.get(n, n), v))
        return tuple(sorted(out))

    new_pi = fix_env(j.pi, binder if vkind == "w" else None)
    new_theta = fix_env(j.theta, binder if vkind == "k" else None)

    if ((vkind == "k" and isinstance(subj, T.KVar) and subj.name == binder) or
            (vkind == "w" and isinstance(subj, T.WVar) and subj.name == binder)):
        if d.rule == "inherit":
            inner = _subst_drv(d.premises[0], binder, vkind, resolve, actual, rename)
            return t_inherit(inner, j.ty)
        return resolve(j.ty, new_pi, new_theta, actual)

    if d.rule == "inherit":
        inner = _subst_drv(d.premises[0], binder, vkind, resolve, actual, rename)
        return TDrv("inherit", TJudgement(new_pi, new_theta, actual, j.ty), (inner,))

    if isinstance(subj, (T.WVar, T.KVar)):
        return TDrv(d.rule, TJudgement(new_pi, new_theta, actual, j.ty), ())

    if isinstance(subj, (T.TLamK, T.WLam, T.KLam)):
        old_b = subj.kvar if isinstance(subj, T.TLamK) else subj.var
        new_b = actual.kvar if isinstance(actual, T.TLamK) else actual.var
        bkind = "k" if isinstance(subj, T.TLamK) else "w"
        if bkind == vkind and old_b == binder:
            # shadowed: no substitution below, only renames
            sub = _rename_only(d.premises[0], rename, actual.body)
            return TDrv(d.rule, TJudgement(new_pi, new_theta, actual, j.ty), (sub,))
        rename2 = dict(rename)
        if old_b != new_b:
            rename2[old_b] = new_b
        sub = _subst_drv(d.premises[0], binder, vkind, resolve, actual.body, rename2)
        return TDrv(d.rule, TJudgement(new_pi, new_theta, actual, j.ty), (sub,))

    akids = T.t_children(actual)
    new_prems = []
    for idx, p in enumerate(d.premises):
        ci = 0 if idx == 0 else 1
        new_prems.append(_subst_drv(p, binder, vkind, resolve, akids[ci], rename))
    return TDrv(d.rule, TJudgement(new_pi, new_theta, actual, j.ty), tuple(new_prems))


def _rename_only(d: TDrv, rename: dict, actual) -> TDrv:
    if not rename:
        if d.judgement.subject == actual:
            return d
    j = d.judgement

    def fix_env(env):
        return tuple(sorted((rename.get(n, n), v) for n, v in env))

    subj = j.subject
    if isinstance(subj, (T.TLamK, T.WLam, T.KLam)):
        old_b = subj.kvar if isinstance(subj, T.TLamK) else subj.var
        new_b = actual.kvar if isinstance(actual, T.TLamK) else actual.var
        rename2 = dict(rename)
        if old_b != new_b:
            rename2[old_b] = new_b
        prems = (_rename_only(d.premises[0], rename2, actual.body),) if d.premises else ()
        return TDrv(d.rule, TJudgement(fix_env(j.pi), fix_env(j.theta), actual, j.ty), prems)
    if isinstance(subj, (T.WVar, T.KVar)):
        return TDrv(d.rule, TJudgement(fix_env(j.pi), fix_env(j.theta), actual, j.ty),
                    tuple(_rename_only(p, rename, actual) for p in d.premises))
    akids = T.t_children(actual)
    prems = []
    for idx, p in enumerate(d.premises):
        if d.rule == "inherit":
            prems.append(_rename_only(p, rename, actual))
        else:
            ci = 0 if idx == 0 else 1
            prems.append(_rename_only(p, rename, akids[ci]))
    return TDrv(d.rule, TJudgement(fix_env(j.pi), fix_env(j.theta), actual, j.ty), tuple(prems))


# ---------------------------------------------------------------------------
# Subject expansion (collect residual copies, intersect at the binder)

def t_subject_expand(d: TDrv, rec: TStepRecord) -> TDrv:
    """Derivation for the redex, from a derivation for the contractum.

    The rebuilt redex is alpha-equal to the original (host binders renamed by
    the forward substitution stay renamed)."""
    return t_transform_at(d, rec.path, lambda sub: _expand_redex(sub, rec),
                          fn_term=lambda sub: _expand_term(sub, rec))


def _expand_term(sub: T.TargetTerm, rec: TStepRecord) -> T.TargetTerm:
    """Syntactic un-substitution: rebuild the redex from the contractum."""
    vkind = "k" if rec.kind == "tapp" else "w"
    leaf = T.KVar(rec.binder) if vkind == "k" else T.WVar(rec.binder)
    body = sub
    for pos in rec.arg_positions:
        body = T.t_replace(body, pos, leaf)
    if rec.kind == "tapp":
        return T.TApp(T.TLamK(rec.binder, body), rec.argument)
    if rec.kind == "kapp":
        return T.KApp(T.KLam(rec.binder, body), rec.argument)
    return T.WApp(T.WLam(rec.binder, body), rec.argument)


def _expand_redex(d: TDrv, rec: TStepRecord) -> TDrv:
    j = d.judgement
    vkind = "k" if rec.kind == "tapp" else "w"
    collected: list = []
    arg_drvs: list[TDrv] = []

    def replace_leaf(sub: TDrv) -> TDrv:
        want = sub.judgement.ty
        if sub.judgement.subject != rec.argument:
            raise OccurrenceTrackingFailure("recorded copy does not match the argument")
        collected.append(want)
        arg_drvs.append(t_reenv(sub, j.pi, j.theta))
        jj = sub.judgement
        leaf_subject = T.KVar(rec.binder) if vkind == "k" else T.WVar(rec.binder)
        leaf_rule = "kvar" if vkind == "k" else "wvar"
        return TDrv(leaf_rule, TJudgement(jj.pi, jj.theta, leaf_subject, want), ())

    leaf_term = T.KVar(rec.binder) if vkind == "k" else T.WVar(rec.binder)
    body_drv = d
    for pos in rec.arg_positions:
        body_drv = t_transform_at(body_drv, pos, replace_leaf,
                                  fn_term=lambda sub: leaf_term)

    per_type: dict[str, TDrv] = {}
    order: list = []
    for ty, ad in zip(collected, arg_drvs):
        k = t_ty_key(ty)
        if k not in per_type:
            per_type[k] = ad
            order.append(ty)
    binder_cap = TCap(tuple(order))

    if vkind == "k":
        body_drv = _weaken_theta(body_drv, rec.binder, binder_cap)
        lam_subject = T.TLamK(rec.binder, body_drv.judgement.subject)
        lam_drv = TDrv("tlam", TJudgement(j.pi, j.theta, lam_subject, TNeg(binder_cap)),
                       (body_drv,))
        app_subject = T.TApp(lam_subject, rec.argument)
        app_rule, app_ty = "tapp", TBOT
    elif rec.kind == "kapp":
        body_drv = _weaken_pi(body_drv, rec.binder, binder_cap)
        lam_subject = T.KLam(rec.binder, body_drv.judgement.subject)
        lam_drv = TDrv("klam", TJudgement(j.pi, j.theta, lam_subject, TNeg(binder_cap)),
                       (body_drv,))
        app_subject = T.KApp(lam_subject, rec.argument)
        app_rule, app_ty = "kapp", TBOT
    else:
        body_drv = _weaken_pi(body_drv, rec.binder, binder_cap)
        lam_subject = T.WLam(rec.binder, body_drv.judgement.subject)
        lam_drv = TDrv("wlam",
                       TJudgement(j.pi, j.theta, lam_subject,
                                  TArrow(binder_cap, body_drv.judgement.ty)),
                       (body_drv,))
        app_subject = T.WApp(lam_subject, rec.argument)
        app_rule, app_ty = "wapp", body_drv.judgement.ty
    args = tuple(per_type[t_ty_key(ty)] for ty in binder_cap.items)
    return TDrv(app_rule, TJudgement(j.pi, j.theta, app_subject, app_ty),
                (lam_drv,) + args)
