"""Seeded random term generation for property suites and the CLI."""

from __future__ import annotations

import random
from typing import Optional

from . import syntax as S


def gen(seed: int, size: int) -> S.Term:
    """A well-sorted term of at most `size` constructors; deterministic per seed.

    Terms may be open (free ordinary variables are drawn from a small pool);
    continuation variables are always bound.
    """
    assert size >= 1
    rng = random.Random(seed)
    t = _gen_term(rng, size, ["u", "v"], [])
    return S.canonicalize(t)


_FREE_POOL = ("f", "g", "y")


def _pick_var(rng, env):
    pool = list(env) + list(_FREE_POOL)
    return S.Var(rng.choice(pool))


def _gen_term(rng: random.Random, size: int, env: list[str], kenv: list[str]) -> S.Term:
    if size <= 1:
        return _pick_var(rng, env)
    if size >= 5 and rng.random() < 0.06:
        # self-application seed; divergent when fed itself
        x = f"x{len(env)}"
        delta = S.Lam(x, S.App(S.Var(x), S.Var(x)))
        r = rng.random()
        if r < 0.4:
            arg: S.Term = delta
        elif r < 0.7:
            arg = S.Lam(x, _gen_term(rng, size - 5, env + [x], kenv))
        else:
            arg = _pick_var(rng, env)
        return S.App(delta, arg)
    choices = ["app", "lam", "where", "app", "lam"]
    if size >= 3:
        choices.append("mu")
    kind = rng.choice(choices)
    if kind == "lam":
        x = f"x{len(env)}"
        return S.Lam(x, _gen_term(rng, size - 1, env + [x], kenv))
    if kind == "app":
        ls = rng.randint(1, size - 1)
        return S.App(_gen_term(rng, ls, env, kenv), _gen_term(rng, size - 1 - ls or 1, env, kenv))
    if kind == "where":
        x = f"x{len(env)}"
        ls = rng.randint(1, size - 2) if size > 2 else 1
        body = _gen_term(rng, ls, env + [x], kenv)
        bound = _gen_term(rng, max(1, size - 1 - ls), env, kenv)
        return S.Where(body, x, bound)
    k = f"k{len(kenv)}"
    return S.Mu(k, _gen_jump(rng, size - 1, env, kenv + [k]))


def _gen_jump(rng: random.Random, size: int, env: list[str], kenv: list[str]) -> S.Jump:
    k = rng.choice(kenv)
    if size >= 4 and rng.random() < 0.2:
        x = f"x{len(env)}"
        ls = rng.randint(1, size - 2)
        j = _gen_jump(rng, ls, env + [x], kenv)
        return S.JWhere(j, x, _gen_term(rng, max(1, size - 1 - ls), env, kenv))
    return S.Throw(k, _gen_term(rng, max(1, size - 1), env, kenv))


def gen_closed(seed: int, size: int) -> S.Term:
    """Like gen but every free ordinary variable gets lambda-closed."""
    t = gen(seed, size)
    for x in sorted(S.fv(t)):
        t = S.App(S.Lam(x, t), S.Lam("c", S.Var("c")))
    return S.canonicalize(t)


# ---------------------------------------------------------------------------
# Random types (for the subtype algebra suite)

def gen_source_type(seed: int, depth: int, category: str = "cup",
                    atoms: tuple[str, ...] = ("a", "b")) -> object:
    global ST
    from . import source_types as ST
    rng = random.Random(seed)
    if category == "cup":
        return _gen_cup(rng, depth, atoms)
    if category == "cap":
        return _gen_cap(rng, depth, atoms)
    return _gen_raw(rng, depth, atoms)


def _gen_raw(rng, depth, atoms):
    if depth <= 0 or rng.random() < 0.45:
        return ST.SAtom(rng.choice(atoms))
    return ST.SArrow(_gen_cap(rng, depth - 1, atoms), _gen_cup(rng, depth - 1, atoms))


def _gen_cap(rng, depth, atoms):
    n = rng.choice((0, 1, 1, 2))
    return ST.Cap(tuple(_gen_raw(rng, depth, atoms) for _ in range(n)))


def _gen_cup(rng, depth, atoms):
    n = rng.choice((0, 1, 1, 2))
    return ST.Cup(tuple(_gen_cap(rng, depth, atoms) for _ in range(n)))
