"""Loadable extension programs for the hook runtime.

Each module exposes factory functions returning ``(ExtensionProgram, Side)``
pairs ready for ``HookRuntime.register``. The harness builds them from
scenario config via :func:`build_extension`.
"""

from __future__ import annotations

from ..errors import ConfigError
from . import (
    bandwidth_cap,
    cc_request,
    delayed_ack,
    initial_window,
    option_probe,
    rtt_threshold,
    user_timeout,
)

EXTENSION_FACTORIES = {
    "user_timeout": user_timeout.build,
    "cc_request": cc_request.build,
    "initial_window": initial_window.build,
    "delayed_ack": delayed_ack.build,
    "bandwidth_cap": bandwidth_cap.build,
    "rtt_threshold": rtt_threshold.build,
    "option_probe": option_probe.build,
}


def build_extension(name: str, params: dict, *, net=None, metrics=None):
    """Instantiate one named extension; returns a list of (program, side)."""
    try:
        factory = EXTENSION_FACTORIES[name]
    except KeyError:
        raise ConfigError(f"unknown extension {name!r}") from None
    return factory(params, net=net, metrics=metrics)
