"""Arithmetic-operation counter.

Kernels report analytic operation counts (a real multiply-add counts as 2, a
complex one as 8) through :func:`add`.  Counting is scoped with
:func:`counting`; outside any scope calls are free no-ops.  The active counter
lives in a context variable so concurrent callers never share a tally.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field

_active: contextvars.ContextVar = contextvars.ContextVar("spectral_dc_flops", default=None)


@dataclass
class FlopCounter:
    total: int = 0
    by_tag: dict = field(default_factory=dict)

    def add(self, n, tag="misc"):
        n = int(n)
        self.total += n
        self.by_tag[tag] = self.by_tag.get(tag, 0) + n


def add(n, tag="misc"):
    c = _active.get()
    if c is not None:
        c.add(n, tag)


@contextlib.contextmanager
def counting():
    """Yield a fresh counter that collects every operation done inside the block.

    Nested scopes each see their own operations; the outer scope also
    receives the inner total once the inner block exits.
    """
    outer = _active.get()
    counter = FlopCounter()
    token = _active.set(counter)
    try:
        yield counter
    finally:
        _active.reset(token)
        if outer is not None:
            outer.total += counter.total
            for k, v in counter.by_tag.items():
                outer.by_tag[k] = outer.by_tag.get(k, 0) + v
