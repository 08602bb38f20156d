"""The call-by-value operational semantics (E-rewriting).

The machine runs on RawTerm, a bracket-sensitive copy of the quotiented AST:
``<mu k.J>x:=M`` and ``mu k.<J>x:=M`` are different raw terms, and
``[k]<M>x:=N`` is read as ``[k](<M>x:=N)``.  ``embed`` fixes the bracketing
of a canonical term (which already carries the right-hand-side bracketing of
the equality axioms); ``project`` returns to the quotient.

E0 rules (applied at the unique redex found by evaluation-context search):

    E[(mu k.J) M]      -> E[<zM>z:=mu k.J]
    E[V (mu k.J)]      -> E[<Vz>z:=mu k.J]
    E[(lam x.M) V]     -> E[<M>x:=V]
    E[<M>x:=V]         -> E[M{V/x}]
    E[<M>x:=mu k.J]    -> E[mu k.J{[k][] -> [k]<M>x:=[]}]

E rules: collapse ``mu k.[l]mu m.J`` first, otherwise run E0 at the top or
under a single ``mu k.[l]`` prefix.  At most one rule ever applies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

from . import syntax as S
from .syntax import (App, JumpContext, JWhere, Lam, Mu, Throw, Var, Where,
                     all_names, canonicalize, fresh)

RawTerm = S.Term
RawJump = S.Jump
RawNode = S.Node

AD_RULES = ("e_ad1", "e_ad2")


@dataclass(frozen=True)
class EvalContext:
    """Frames from the hole outward: ('fn', arg) | ('arg', fn) | ('let', body, binder)."""

    frames: tuple[tuple, ...] = ()

    def compose(self, inner: "EvalContext") -> "EvalContext":
        return EvalContext(inner.frames + self.frames)

    def fill(self, t: RawTerm) -> RawTerm:
        for f in self.frames:
            if f[0] == "fn":
                t = App(t, f[1])
            elif f[0] == "arg":
                t = App(f[1], t)
            else:
                t = Where(f[1], f[2], t)
        return t


@dataclass(frozen=True)
class EvalOutcome:
    status: str  # "finished" | "stalled" | "fuel_exhausted"
    term: RawTerm
    steps: int


def is_raw_value(t: RawNode) -> bool:
    return isinstance(t, (Var, Lam))


def decompose(t: RawTerm) -> tuple[EvalContext, RawTerm]:
    """Unique decomposition of a term as E[V] or E[mu k.J].

    Application focuses the function part first, so ``x y`` decomposes as
    ``(ctx [] y, x)``; a let always focuses its bound part.
    """
    frames: list[tuple] = []
    while True:
        if is_raw_value(t) or isinstance(t, Mu):
            return EvalContext(tuple(frames)), t
        if isinstance(t, App):
            if not is_raw_value(t.fn):
                frames.insert(0, ("fn", t.arg))
                t = t.fn
            elif not is_raw_value(t.arg):
                frames.insert(0, ("arg", t.fn))
                t = t.arg
            else:
                frames.insert(0, ("fn", t.arg))
                t = t.fn
        elif isinstance(t, Where):
            frames.insert(0, ("let", t.body, t.var))
            t = t.bound
        else:
            raise S.SortError(f"not a raw term: {t!r}")


def _e0(t: RawTerm) -> Optional[tuple[str, RawTerm]]:
    """The unique E0 step, or None (value, mu-term at top, or stall)."""
    if is_raw_value(t) or isinstance(t, Mu):
        return None
    if isinstance(t, App):
        f, a = t.fn, t.arg
        if isinstance(f, Mu):
            z = fresh(all_names(t))
            return "e_ad1", Where(App(Var(z), a), z, f)
        if not is_raw_value(f):
            sub = _e0(f)
            if sub is None:
                return None
            rule, f2 = sub
            return rule, App(f2, a)
        if isinstance(a, Mu):
            z = fresh(all_names(t))
            return "e_ad2", Where(App(f, Var(z)), z, a)
        if not is_raw_value(a):
            sub = _e0(a)
            if sub is None:
                return None
            rule, a2 = sub
            return rule, App(f, a2)
        if isinstance(f, Lam):
            return "e_beta", Where(f.body, f.var, a)
        return None  # E[xV]: stall
    if isinstance(t, Where):
        b = t.bound
        if isinstance(b, Mu):
            k, j = b.kvar, b.body
            if k in S.fcv(t.body):
                nk = fresh(all_names(j) | all_names(t.body), "q")
                j = S.subst_rename(j, k, nk)
                k = nk
            return "e_mu", Mu(k, S.subst_jump_context(j, k, JumpContext(t.var, t.body)))
        if is_raw_value(b):
            return "e_let", S.subst_value(t.body, t.var, b)
        sub = _e0(b)
        if sub is None:
            return None
        rule, b2 = sub
        return rule, Where(t.body, t.var, b2)
    raise S.SortError(f"not a raw term: {t!r}")


def e0_step(t: RawTerm) -> Optional[tuple[str, RawTerm]]:
    return _e0(t)


def e_step(t: RawTerm) -> Optional[tuple[str, RawTerm]]:
    """The unique E step, or None if t is E-normal."""
    if isinstance(t, Mu) and isinstance(t.body, Throw):
        inner = t.body.body
        if isinstance(inner, Mu):
            return "e_collapse", Mu(t.kvar, S.subst_rename(inner.body, inner.kvar, t.body.kvar))
        sub = _e0(inner)
        if sub is not None:
            rule, inner2 = sub
            return rule, Mu(t.kvar, Throw(t.body.kvar, inner2))
        return None
    return _e0(t)


def _is_stall(t: RawTerm) -> bool:
    """t has the shape E[xV] (possibly E void is excluded: xV itself counts)."""
    if isinstance(t, App):
        f, a = t.fn, t.arg
        if isinstance(f, Var) and is_raw_value(a):
            return True
        if not is_raw_value(f):
            return _is_stall(f)
        if not is_raw_value(a):
            return _is_stall(a)
        return False
    if isinstance(t, Where):
        return (not is_raw_value(t.bound)) and _is_stall(t.bound)
    return False


def classify_e_normal(t: RawTerm) -> str:
    """'finished' for V and mu k.[l]V, 'stalled' otherwise."""
    if is_raw_value(t):
        return "finished"
    if isinstance(t, Mu) and isinstance(t.body, Throw) and is_raw_value(t.body.body):
        return "finished"
    return "stalled"


def evaluate_simple(t: RawTerm, fuel: int = 100_000,
                    on_step: Optional[Callable[[int, str, RawTerm], None]] = None) -> EvalOutcome:
    """Reference evaluator: literally iterate e_step from the root."""
    assert fuel > 0
    steps = 0
    while steps < fuel:
        nxt = e_step(t)
        if nxt is None:
            return EvalOutcome(classify_e_normal(t), t, steps)
        rule, t = nxt
        if on_step is not None:
            on_step(steps, rule, t)
        steps += 1
        if S.size(t) > 500_000:
            break
    return EvalOutcome("fuel_exhausted", t, steps)


def evaluate(t: RawTerm, fuel: int = 100_000,
             on_step: Optional[Callable[[int, str, RawTerm], None]] = None,
             size_guard: int = 500_000) -> EvalOutcome:
    """Iterate e_step; on_step(i, rule, term) observes the trace if given.

    Implemented with an explicit frame stack so the redex is refocused in
    place instead of re-searched from the root; agrees step for step with
    evaluate_simple (property-tested).
    """
    assert fuel > 0
    prefix: Optional[tuple[str, str]] = None  # (mu binder, jumper tag)
    frames: list[tuple] = []  # frames[-1] is innermost
    focus: RawTerm = t
    steps = 0

    def rebuild() -> RawTerm:
        x = focus
        for f in reversed(frames):
            if f[0] == "fn":
                x = App(x, f[1])
            elif f[0] == "arg":
                x = App(f[1], x)
            else:
                x = Where(f[1], f[2], x)
        if prefix is not None:
            x = Mu(prefix[0], Throw(prefix[1], x))
        return x

    def emit(rule: str):
        nonlocal steps
        if on_step is not None:
            on_step(steps, rule, rebuild())
        steps += 1

    while True:
        if steps >= fuel:
            return EvalOutcome("fuel_exhausted", rebuild(), steps)
        if steps % 2048 == 2047 and S.size(focus) + len(frames) > size_guard:
            return EvalOutcome("fuel_exhausted", rebuild(), steps)
        # descend to a value or mu-term
        if isinstance(focus, App):
            if not is_raw_value(focus.fn):
                frames.append(("fn", focus.arg))
                focus = focus.fn
            elif not is_raw_value(focus.arg):
                frames.append(("arg", focus.fn))
                focus = focus.arg
            else:
                frames.append(("fn", focus.arg))
                focus = focus.fn
            continue
        if isinstance(focus, Where):
            frames.append(("let", focus.body, focus.var))
            focus = focus.bound
            continue
        if isinstance(focus, Mu):
            if frames:
                f = frames[-1]
                if f[0] == "fn":
                    z = fresh(all_names(focus) | all_names(f[1]))
                    frames.pop()
                    focus = Where(App(Var(z), f[1]), z, focus)
                    emit("e_ad1")
                elif f[0] == "arg":
                    z = fresh(all_names(focus) | all_names(f[1]))
                    frames.pop()
                    focus = Where(App(f[1], Var(z)), z, focus)
                    emit("e_ad2")
                else:
                    _, body, var = f
                    k, j = focus.kvar, focus.body
                    if k in S.fcv(body):
                        nk = fresh(all_names(j) | all_names(body), "q")
                        j = S.subst_rename(j, k, nk)
                        k = nk
                    frames.pop()
                    focus = Mu(k, S.subst_jump_context(j, k, JumpContext(var, body)))
                    emit("e_mu")
                continue
            if prefix is not None:
                k, l = prefix
                prefix = None
                focus = Mu(k, S.subst_rename(focus.body, focus.kvar, l))
                emit("e_collapse")
                continue
            if isinstance(focus.body, Throw):
                prefix = (focus.kvar, focus.body.kvar)
                focus = focus.body.body
                continue
            return EvalOutcome("stalled", rebuild(), steps)  # mu over a jump-let
        # focus is a value
        if not frames:
            return EvalOutcome("finished", rebuild(), steps)
        f = frames[-1]
        if f[0] == "fn":
            if not is_raw_value(f[1]):
                frames.pop()
                frames.append(("arg", focus))
                focus = f[1]
                continue
            if isinstance(focus, Lam):
                frames.pop()
                focus = Where(focus.body, focus.var, f[1])
                emit("e_beta")
                continue
            return EvalOutcome("stalled", rebuild(), steps)
        if f[0] == "arg":
            fn = f[1]
            if isinstance(fn, Lam):
                frames.pop()
                focus = Where(fn.body, fn.var, focus)
                emit("e_beta")
                continue
            return EvalOutcome("stalled", rebuild(), steps)
        _, body, var = f
        frames.pop()
        focus = S.subst_value(body, var, focus)
        emit("e_let")


def embed(t: S.Term) -> RawTerm:
    """Fix the bracketing of the canonical representative."""
    return canonicalize(t)


def project(t: RawNode) -> S.Node:
    """Forget the bracketing: back to the quotient."""
    return canonicalize(t)
