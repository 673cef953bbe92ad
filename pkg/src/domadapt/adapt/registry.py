"""Method registry.

Built-in adapters register themselves on import; third-party code registers
new method ids the same way and is then reachable from :func:`adapt` and the
command line::

    @register("mymethod", labeled=False)
    def adapt_mymethod(s, t, cfg, stream):
        ...
        return adapted_source, adapted_target, cfg, info
"""
from dataclasses import dataclass
from typing import Callable, Dict

_METHODS: Dict[str, "MethodEntry"] = {}


@dataclass(frozen=True)
class MethodEntry:
    name: str
    func: Callable
    labeled: bool
    defaults: Callable


def _no_defaults(dim):
    return {}


def register(name, labeled=False, defaults=None):
    def deco(func):
        _METHODS[name] = MethodEntry(name, func, labeled, defaults or _no_defaults)
        return func

    return deco


def get(name) -> MethodEntry:
    from ..errors import UnknownMethod

    try:
        return _METHODS[name]
    except KeyError:
        raise UnknownMethod(f"unknown method {name!r}; known: {', '.join(sorted(_METHODS))}") from None


def names():
    return tuple(_METHODS)
