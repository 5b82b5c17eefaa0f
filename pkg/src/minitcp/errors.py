"""Exception types shared across the package."""


class MiniTcpError(Exception):
    """Base class for all errors raised by this package."""


class OversizeOptionBlock(MiniTcpError):
    """Encoded TCP options would exceed the 40-byte header budget."""


class MalformedOption(MiniTcpError):
    """An option length octet is invalid or runs past the buffer."""


class NotMptcpOption(MiniTcpError):
    """Tried to decode an MPTCP record from a non kind-30 option."""


class SchedulingInPast(MiniTcpError):
    """Event scheduled before the current virtual time."""


class HandshakeTimeout(MiniTcpError):
    """SYN retransmission budget exhausted without establishment."""


class UserTimeoutExpired(MiniTcpError):
    """Connection aborted because data stayed unacknowledged past the UTO."""


class ConnectionClosed(MiniTcpError):
    """Operation attempted on a closed connection."""


class ReadOnlyField(MiniTcpError):
    """set_sock_field on a field that is not writable."""


class UnknownField(MiniTcpError):
    """get/set_sock_field on a field that does not exist."""


class IllegalPhase(MiniTcpError):
    """Field write not allowed in the connection's current phase."""


class UnknownCcId(MiniTcpError):
    """Congestion controller id not present in the registry."""


class DuplicateName(MiniTcpError):
    """Extension program registered twice under one name."""


class NoUsableSubflow(MiniTcpError):
    """MPTCP scheduler found no subflow able to carry data."""


class JoinRejected(MiniTcpError):
    """Peer refused an MP_JOIN subflow."""


class ConfigError(MiniTcpError):
    """Scenario file failed to parse or validate."""


class UnknownMetric(MiniTcpError):
    """summarize() asked for a metric absent from the log."""


class CyclicDependency(MiniTcpError):
    """Multi-object manifest contains a dependency cycle."""
