"""Shared helpers for the test suite."""

import functools

from linbisim.explore import build_lts
from linbisim.models import get_model


@functools.lru_cache(maxsize=None)
def explore(name, threads=2, ops=1, values=1):
    """Cached exploration of a catalog model with its default client."""
    entry = get_model(name)
    return build_lts(entry.program(), entry.bounds(threads, ops, values))


def lts_of(name, threads=2, ops=1, values=1):
    return explore(name, threads, ops, values).lts
