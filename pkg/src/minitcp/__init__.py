"""minitcp: a deterministic user-space TCP/MPTCP simulator with a
programmable option-extension runtime."""

from .wire import CODEC_BACKEND, OptionBlock, Segment, TcpOption
from .simnet import Network, NS
from .hookrt import ExtensionProgram, HookOp, HookRuntime, Side
from .tcpcore import Connection, open_connection
from .mptcp import MetaConnection, MptcpServer, open_meta_connection
from .metrics import MetricsLog
from .harness import run_scenario

__version__ = "0.1.0"

__all__ = [
    "CODEC_BACKEND",
    "Connection",
    "ExtensionProgram",
    "HookOp",
    "HookRuntime",
    "MetaConnection",
    "MetricsLog",
    "MptcpServer",
    "NS",
    "Network",
    "OptionBlock",
    "Segment",
    "Side",
    "TcpOption",
    "open_connection",
    "open_meta_connection",
    "run_scenario",
]
