"""Call-by-value lambda-mu calculus toolkit: syntax, reduction, CPS, machine,
union-intersection types, and a companion catch/throw calculus."""

import sys

# deep terms (machine traces, divergent unfoldings) exceed the default limit
if sys.getrecursionlimit() < 40_000:
    sys.setrecursionlimit(40_000)

__version__ = "0.1.0"
