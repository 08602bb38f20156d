"""Union-intersection types for the source calculus.

Raw types R are atoms or arrows S -> T; subsidiary types S are finite
intersections of raws (Cap, empty = omega); types T are finite unions of
subsidiaries (Cup, empty = mho).  Jumps are typed by the separate BOT.

Caps and Cups are multisets: items are kept sorted by a total serialization
order (duplicates preserved; T and T|T are inter-derivable but distinct).
Singleton embeddings are handled by the coercions as_cap/as_cup, so every S
slot holds a Cap and every T slot a Cup.

Two procedures decide subtyping: ``subtype`` is the mapping characterization
(unions covariantly pointwise, intersections contravariantly pointwise,
arrows contra/co); ``subtype_search`` is a direct proof search over the
axiomatic presentation without reflexivity or transitivity.  They agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Union


class CategoryMismatch(Exception):
    pass


@dataclass(frozen=True)
class SAtom:
    name: str


@dataclass(frozen=True)
class SArrow:
    arg: "Cap"
    res: "Cup"

    def __post_init__(self):
        object.__setattr__(self, "arg", as_cap(self.arg))
        object.__setattr__(self, "res", as_cup(self.res))


@dataclass(frozen=True)
class Cap:
    items: tuple

    def __post_init__(self):
        items = tuple(self.items)
        for x in items:
            if not isinstance(x, (SAtom, SArrow)):
                raise CategoryMismatch(f"cap of non-raw {x!r}")
        object.__setattr__(self, "items", tuple(sorted(items, key=ty_key)))


@dataclass(frozen=True)
class Cup:
    items: tuple

    def __post_init__(self):
        items = tuple(as_cap(x) for x in self.items)
        object.__setattr__(self, "items", tuple(sorted(items, key=ty_key)))


class BotType:
    """The jump type; no subtyping, no members."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOT"


BOT = BotType()
Raw = Union[SAtom, SArrow]
SourceType = Union[SAtom, SArrow, Cap, Cup, BotType]

OMEGA = Cap(())
MHO = Cup(())


def atom(name: str) -> SAtom:
    return SAtom(name)


def arrow(arg, res) -> SArrow:
    return SArrow(arg, res)


def as_cap(t) -> Cap:
    if isinstance(t, Cap):
        return t
    if isinstance(t, (SAtom, SArrow)):
        return Cap((t,))
    if isinstance(t, Cup) and len(t.items) == 1:
        return t.items[0]
    raise CategoryMismatch(f"cannot view {t!r} as a subsidiary type")


def as_cup(t) -> Cup:
    if isinstance(t, Cup):
        return t
    if isinstance(t, (SAtom, SArrow, Cap)):
        return Cup((as_cap(t),))
    raise CategoryMismatch(f"cannot view {t!r} as a type")


def ty_key(t) -> str:
    if isinstance(t, SAtom):
        return f"a:{t.name};"
    if isinstance(t, SArrow):
        return f"r({ty_key(t.arg)}{ty_key(t.res)})"
    if isinstance(t, Cap):
        return "c(" + "".join(ty_key(i) for i in t.items) + ")"
    if isinstance(t, Cup):
        return "u(" + "".join(ty_key(i) for i in t.items) + ")"
    if t is BOT:
        return "bot;"
    raise CategoryMismatch(f"not a type: {t!r}")


def contains_omega_or_mho(t) -> bool:
    """Does any empty intersection or empty union occur anywhere in t?"""
    if isinstance(t, SAtom):
        return False
    if isinstance(t, SArrow):
        return contains_omega_or_mho(t.arg) or contains_omega_or_mho(t.res)
    if isinstance(t, (Cap, Cup)):
        if not t.items:
            return True
        return any(contains_omega_or_mho(i) for i in t.items)
    if t is BOT:
        return False
    raise CategoryMismatch(f"not a type: {t!r}")


# ---------------------------------------------------------------------------
# Subtyping: the mapping characterization

def subtype(a, b) -> bool:
    """Decide a <= b; both sides lifted to the higher common category."""
    if a is BOT or b is BOT:
        if a is BOT and b is BOT:
            return True
        raise CategoryMismatch("BOT is comparable only with BOT")
    if isinstance(a, Cup) or isinstance(b, Cup):
        return _sub_cup(as_cup(a), as_cup(b))
    if isinstance(a, Cap) or isinstance(b, Cap):
        return _sub_cap(as_cap(a), as_cap(b))
    return _sub_raw(a, b)


@lru_cache(maxsize=200_000)
def _sub_cup(a: Cup, b: Cup) -> bool:
    return all(any(_sub_cap(s, s2) for s2 in b.items) for s in a.items)


@lru_cache(maxsize=200_000)
def _sub_cap(a: Cap, b: Cap) -> bool:
    return all(any(_sub_raw(r, r2) for r in a.items) for r2 in b.items)


@lru_cache(maxsize=200_000)
def _sub_raw(a: Raw, b: Raw) -> bool:
    if isinstance(a, SAtom) and isinstance(b, SAtom):
        return a.name == b.name
    if isinstance(a, SArrow) and isinstance(b, SArrow):
        return _sub_cap(b.arg, a.arg) and _sub_cup(a.res, b.res)
    return False


def type_equiv(a, b) -> bool:
    return subtype(a, b) and subtype(b, a)


# ---------------------------------------------------------------------------
# Subtyping: proof search over the bare axioms (no refl, no trans)

def subtype_search(a, b) -> bool:
    if a is BOT or b is BOT:
        if a is BOT and b is BOT:
            return True
        raise CategoryMismatch("BOT is comparable only with BOT")
    if isinstance(a, Cup) or isinstance(b, Cup):
        return _search_cup(as_cup(a), as_cup(b))
    return _search_cap(as_cap(a), as_cap(b))


@lru_cache(maxsize=200_000)
def _search_cup(a: Cup, b: Cup) -> bool:
    if len(a.items) != 1:
        # union-left: every disjunct separately (empty union: vacuous)
        return all(_search_cup(Cup((s,)), b) for s in a.items)
    if len(b.items) == 1:
        return _search_cap(a.items[0], b.items[0])
    # weaken-right: drop one union component and retry
    return any(_search_cup(a, Cup(b.items[:i] + b.items[i + 1:]))
               for i in range(len(b.items)))


@lru_cache(maxsize=200_000)
def _search_cap(a: Cap, b: Cap) -> bool:
    if len(b.items) != 1:
        # intersection-right: every conjunct separately (empty: anything <= omega)
        return all(_search_cap(a, Cap((r,))) for r in b.items)
    if len(a.items) == 1:
        return _search_raw(a.items[0], b.items[0])
    # weaken-left: drop one intersection component and retry
    return any(_search_cap(Cap(a.items[:i] + a.items[i + 1:]), b)
               for i in range(len(a.items)))


def _search_raw(a: Raw, b: Raw) -> bool:
    if isinstance(a, SAtom) and isinstance(b, SAtom):
        return a.name == b.name
    if isinstance(a, SArrow) and isinstance(b, SArrow):
        return _search_cap(b.arg, a.arg) and _search_cup(a.res, b.res)
    return False


# ---------------------------------------------------------------------------
# Type translation to the target discipline and back

def cps_type(t, category: str):
    """S* / T+ / [[T]] by category: 'sub' -> sigma-cap, 'plus' -> kappa-cap,
    'full' -> tau."""
    from . import target_types as TT
    if category == "sub":
        return TT.TCap(tuple(_cps_raw(r) for r in as_cap(t).items))
    if category == "plus":
        return TT.TCap(tuple(TT.TNeg(cps_type(s, "sub")) for s in as_cup(t).items))
    if category == "full":
        return TT.TNeg(cps_type(t, "plus"))
    raise CategoryMismatch(f"unknown category {category!r}")


def _cps_raw(r: Raw):
    from . import target_types as TT
    if isinstance(r, SAtom):
        return TT.TAtom(r.name)
    return TT.TArrow(cps_type(r.arg, "sub"), cps_type(r.res, "full"))


def uncps_type(t, category: str):
    """Inverse translation by target category:
    sigma -> raw, sigma_cap -> Cap, kappa -> Cap, kappa_cap -> Cup, tau -> Cup."""
    from . import target_types as TT
    if category == "sigma":
        if isinstance(t, TT.TAtom):
            return SAtom(t.name)
        if isinstance(t, TT.TArrow):
            return SArrow(uncps_type(t.arg, "sigma_cap"), uncps_type(t.res, "tau"))
        raise CategoryMismatch(f"not a sigma type: {t!r}")
    if category == "sigma_cap":
        return Cap(tuple(uncps_type(s, "sigma") for s in t.items))
    if category == "kappa":
        if isinstance(t, TT.TNeg):
            return uncps_type(t.arg, "sigma_cap")
        raise CategoryMismatch(f"not a kappa type: {t!r}")
    if category == "kappa_cap":
        return Cup(tuple(uncps_type(k, "kappa") for k in t.items))
    if category == "tau":
        if isinstance(t, TT.TNeg):
            return uncps_type(t.arg, "kappa_cap")
        raise CategoryMismatch(f"not a tau type: {t!r}")
    raise CategoryMismatch(f"unknown category {category!r}")
