"""S-expression concrete syntax for all the object languages.

Source terms:   x | (lam x M) | (app M N) | (bind L x M) | (mu k J) | (jmp k M)
Target terms:   (tlam k Q) | (wapp W W) | (kapp K W) | (tapp T K)
                | (wvar x) | (wlam x T) | (kvar k) | (klam x Q)
Types:          (atom a) | (arr S T) | (cap R ...) | (cup S ...) | bbot | (neg X)
Catch/throw:    source grammar plus (catch k M) and (throw k M)

The parser rejects jumps in term position and vice versa.  ``pretty`` renders
the angle-bracket notation for humans and is never parsed.
"""

from __future__ import annotations

from . import syntax as S
from . import target as T


class ParseError(Exception):
    pass


def tokenize(text: str) -> list[str]:
    out: list[str] = []
    cur: list[str] = []
    for ch in text:
        if ch in "()":
            if cur:
                out.append("".join(cur))
                cur = []
            out.append(ch)
        elif ch.isspace():
            if cur:
                out.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if cur:
        out.append("".join(cur))
    return out


def read_sexpr(tokens: list[str], pos: int = 0):
    """Returns (tree, next_pos); tree is a str atom or a list."""
    if pos >= len(tokens):
        raise ParseError("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = read_sexpr(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise ParseError("missing )")
        return items, pos + 1
    if tok == ")":
        raise ParseError("unexpected )")
    return tok, pos + 1


def read_one(text: str):
    tokens = tokenize(text)
    tree, pos = read_sexpr(tokens)
    if pos != len(tokens):
        raise ParseError(f"trailing input: {tokens[pos:]}")
    return tree


def _symbol(tree, what: str) -> str:
    if not isinstance(tree, str):
        raise ParseError(f"expected a {what} symbol, got {tree!r}")
    return tree


# ---------------------------------------------------------------------------
# Source terms

def term_from_tree(tree) -> S.Term:
    if isinstance(tree, str):
        return S.Var(tree)
    if not tree:
        raise ParseError("empty form")
    head = tree[0]
    if head == "lam":
        if len(tree) != 3:
            raise ParseError("(lam x M)")
        return S.Lam(_symbol(tree[1], "variable"), term_from_tree(tree[2]))
    if head == "app":
        if len(tree) != 3:
            raise ParseError("(app M N)")
        return S.App(term_from_tree(tree[1]), term_from_tree(tree[2]))
    if head == "bind":
        if len(tree) != 4:
            raise ParseError("(bind L x M)")
        return S.Where(term_from_tree(tree[1]), _symbol(tree[2], "variable"), term_from_tree(tree[3]))
    if head == "mu":
        if len(tree) != 3:
            raise ParseError("(mu k J)")
        return S.Mu(_symbol(tree[1], "continuation variable"), jump_from_tree(tree[2]))
    if head == "jmp":
        raise ParseError("jump in term position")
    raise ParseError(f"unknown term form {head!r}")


def jump_from_tree(tree) -> S.Jump:
    if isinstance(tree, str):
        raise ParseError("term (variable) in jump position")
    if not tree:
        raise ParseError("empty form")
    head = tree[0]
    if head == "jmp":
        if len(tree) != 3:
            raise ParseError("(jmp k M)")
        return S.Throw(_symbol(tree[1], "continuation variable"), term_from_tree(tree[2]))
    if head == "bind":
        if len(tree) != 4:
            raise ParseError("(bind J x M)")
        return S.JWhere(jump_from_tree(tree[1]), _symbol(tree[2], "variable"), term_from_tree(tree[3]))
    raise ParseError(f"term form {head!r} in jump position")


def parse_term(text: str) -> S.Term:
    return term_from_tree(read_one(text))


def parse_jump(text: str) -> S.Jump:
    return jump_from_tree(read_one(text))


def parse_node(text: str) -> S.Node:
    tree = read_one(text)
    if isinstance(tree, list) and tree and tree[0] in ("jmp",):
        return jump_from_tree(tree)
    if isinstance(tree, list) and tree and tree[0] == "bind":
        # a bind is a jump iff its body parses as a jump
        try:
            return term_from_tree(tree)
        except ParseError:
            return jump_from_tree(tree)
    return term_from_tree(tree)


def print_term(t: S.Node) -> str:
    if isinstance(t, S.Var):
        return t.name
    if isinstance(t, S.Lam):
        return f"(lam {t.var} {print_term(t.body)})"
    if isinstance(t, S.App):
        return f"(app {print_term(t.fn)} {print_term(t.arg)})"
    if isinstance(t, (S.Where, S.JWhere)):
        return f"(bind {print_term(t.body)} {t.var} {print_term(t.bound)})"
    if isinstance(t, S.Mu):
        return f"(mu {t.kvar} {print_term(t.body)})"
    if isinstance(t, S.Throw):
        return f"(jmp {t.kvar} {print_term(t.body)})"
    raise S.SortError(f"not a term or jump: {t!r}")


def pretty(t: S.Node) -> str:
    """Human-oriented rendering with the angle-bracket let; output only."""
    if isinstance(t, S.Var):
        return t.name
    if isinstance(t, S.Lam):
        return f"λ{t.var}.{pretty(t.body)}"
    if isinstance(t, S.App):
        fn = pretty(t.fn)
        arg = pretty(t.arg)
        if not isinstance(t.fn, (S.Var,)):
            fn = f"({fn})"
        if not isinstance(t.arg, S.Var):
            arg = f"({arg})"
        return f"{fn}{arg}"
    if isinstance(t, (S.Where, S.JWhere)):
        return f"⟨{pretty(t.body)}⟩{t.var}:={pretty(t.bound)}"
    if isinstance(t, S.Mu):
        return f"μ{t.kvar}.{pretty(t.body)}"
    if isinstance(t, S.Throw):
        return f"[{t.kvar}]{pretty(t.body)}"
    raise S.SortError(f"not a term or jump: {t!r}")


# ---------------------------------------------------------------------------
# Target terms

def target_from_tree(tree) -> T.TargetTerm:
    if isinstance(tree, str):
        raise ParseError("bare symbol in target position; use (wvar x) or (kvar k)")
    if not tree:
        raise ParseError("empty form")
    head = tree[0]
    if head == "tlam":
        return T.TLamK(_symbol(tree[1], "continuation variable"), target_from_tree(tree[2]))
    if head == "wapp":
        return T.WApp(target_from_tree(tree[1]), target_from_tree(tree[2]))
    if head == "kapp":
        return T.KApp(target_from_tree(tree[1]), target_from_tree(tree[2]))
    if head == "tapp":
        return T.TApp(target_from_tree(tree[1]), target_from_tree(tree[2]))
    if head == "wvar":
        return T.WVar(_symbol(tree[1], "variable"))
    if head == "wlam":
        return T.WLam(_symbol(tree[1], "variable"), target_from_tree(tree[2]))
    if head == "kvar":
        return T.KVar(_symbol(tree[1], "continuation variable"))
    if head == "klam":
        return T.KLam(_symbol(tree[1], "variable"), target_from_tree(tree[2]))
    raise ParseError(f"unknown target form {head!r}")


def parse_target(text: str) -> T.TargetTerm:
    return target_from_tree(read_one(text))


def print_target(t: T.TargetTerm) -> str:
    if isinstance(t, T.TLamK):
        return f"(tlam {t.kvar} {print_target(t.body)})"
    if isinstance(t, T.WApp):
        return f"(wapp {print_target(t.fn)} {print_target(t.arg)})"
    if isinstance(t, T.KApp):
        return f"(kapp {print_target(t.k)} {print_target(t.arg)})"
    if isinstance(t, T.TApp):
        return f"(tapp {print_target(t.fn)} {print_target(t.k)})"
    if isinstance(t, T.WVar):
        return f"(wvar {t.name})"
    if isinstance(t, T.WLam):
        return f"(wlam {t.var} {print_target(t.body)})"
    if isinstance(t, T.KVar):
        return f"(kvar {t.name})"
    if isinstance(t, T.KLam):
        return f"(klam {t.var} {print_target(t.body)})"
    raise ParseError(f"not a target term: {t!r}")
