"""
Codepoints carried in the IP and TCP headers.

The two IP bits (bit 15 = CE, bit 14 = ECT) are interpreted either the
EECN way (NotCapable / Capable / CL1 / CL2) or the classic ECN way
(NotECT / ECT1 / ECT0 / CE). The TCP ECE and CWR bits are interpreted
in the context of the SYN and ACK flags.

Only named bits are exposed; raw header bytes are never built.
"""

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, Tuple


class CongestionLevel(IntEnum):
    """Severity carried by a packet. Ordered NONE < CL1 < CL2."""

    NONE = 0
    CL1 = 1
    CL2 = 2


class EecnMeaning(Enum):
    NOT_CAPABLE = "NotCapable"
    CAPABLE = "Capable"
    CL1 = "CL1"
    CL2 = "CL2"


class EcnMeaning(Enum):
    NOT_ECT = "NotECT"
    ECT1 = "ECT1"
    ECT0 = "ECT0"
    CE = "CE"


class TcpEecnMeaning(Enum):
    NOT_CAPABLE = "NotCapable"
    CAPABLE = "Capable"
    CL1_ECHO = "CL1Echo"
    CL2_ECHO = "CL2Echo"
    CWR = "Cwr"
    UNDEFINED = "Undefined"


@dataclass(frozen=True)
class EcnCodepoint:
    ce_bit: int = 0
    ect_bit: int = 0

    def __post_init__(self):
        if self.ce_bit not in (0, 1) or self.ect_bit not in (0, 1):
            raise ValueError(
                f"codepoint bits must be 0 or 1, got ({self.ce_bit}, {self.ect_bit})"
            )

    @property
    def bits(self) -> Tuple[int, int]:
        return self.ce_bit, self.ect_bit

    def __str__(self) -> str:
        return trace_label(self)


@dataclass(frozen=True)
class TcpEcnSignal:
    ece_bit: int = 0
    cwr_bit: int = 0
    syn_flag: int = 0
    ack_flag: int = 0

    @property
    def key(self) -> Tuple[int, int, int, int]:
        return self.ece_bit, self.cwr_bit, self.syn_flag, self.ack_flag


NOT_CAPABLE = EcnCodepoint(0, 0)
CAPABLE = EcnCodepoint(0, 1)
CL1 = EcnCodepoint(1, 0)
CL2 = EcnCodepoint(1, 1)
ALL_CODEPOINTS = (NOT_CAPABLE, CAPABLE, CL1, CL2)

_IP_EECN: Dict[Tuple[int, int], EecnMeaning] = {
    (0, 0): EecnMeaning.NOT_CAPABLE,
    (0, 1): EecnMeaning.CAPABLE,
    (1, 0): EecnMeaning.CL1,
    (1, 1): EecnMeaning.CL2,
}
_IP_ECN: Dict[Tuple[int, int], EcnMeaning] = {
    (0, 0): EcnMeaning.NOT_ECT,
    (0, 1): EcnMeaning.ECT1,
    (1, 0): EcnMeaning.ECT0,
    (1, 1): EcnMeaning.CE,
}

# Rows of the TCP flag table, keyed by (ece, cwr, syn, ack).
TCP_EECN_TABLE: Dict[Tuple[int, int, int, int], TcpEecnMeaning] = {
    (0, 0, 1, 0): TcpEecnMeaning.NOT_CAPABLE,
    (0, 0, 1, 1): TcpEecnMeaning.NOT_CAPABLE,
    (0, 1, 1, 0): TcpEecnMeaning.CAPABLE,
    (0, 1, 1, 1): TcpEecnMeaning.CAPABLE,
    (0, 1, 0, 1): TcpEecnMeaning.CAPABLE,
    (1, 0, 1, 1): TcpEecnMeaning.CL1_ECHO,
    (1, 0, 0, 1): TcpEecnMeaning.CL1_ECHO,
    (1, 1, 1, 1): TcpEecnMeaning.CL2_ECHO,
    (1, 1, 0, 1): TcpEecnMeaning.CL2_ECHO,
    (0, 1, 0, 0): TcpEecnMeaning.CWR,
}

_TRACE_LABELS = {
    (0, 0): "NotECT",
    (0, 1): "ECT1",
    (1, 0): "CL1",
    (1, 1): "CL2",
}


def decode_ip_eecn(cp: EcnCodepoint) -> EecnMeaning:
    return _IP_EECN[cp.bits]


def encode_ip_eecn(meaning: EecnMeaning) -> EcnCodepoint:
    for bits, candidate in _IP_EECN.items():
        if candidate is meaning:
            return EcnCodepoint(*bits)
    raise ValueError(f"unknown EECN meaning: {meaning}")


def decode_ip_ecn(cp: EcnCodepoint) -> EcnMeaning:
    return _IP_ECN[cp.bits]


def encode_ip_ecn(meaning: EcnMeaning) -> EcnCodepoint:
    for bits, candidate in _IP_ECN.items():
        if candidate is meaning:
            return EcnCodepoint(*bits)
    raise ValueError(f"unknown ECN meaning: {meaning}")


def decode_tcp_eecn(sig: TcpEcnSignal) -> TcpEecnMeaning:
    """Combinations absent from the flag table decode to UNDEFINED."""
    return TCP_EECN_TABLE.get(sig.key, TcpEecnMeaning.UNDEFINED)


def encode_tcp_eecn(meaning: TcpEecnMeaning, syn: int, ack: int) -> TcpEcnSignal:
    """
    Build the (ECE, CWR) pair that carries ``meaning`` on a segment whose
    SYN/ACK flags are already fixed.

    Raises:
        ValueError: if the table has no row for ``meaning`` in that context.
    """
    for (ece, cwr, row_syn, row_ack), candidate in TCP_EECN_TABLE.items():
        if candidate is meaning and row_syn == syn and row_ack == ack:
            return TcpEcnSignal(ece, cwr, syn, ack)
    raise ValueError(f"{meaning.value} cannot be signalled with syn={syn}, ack={ack}")


def echo_for_level(level: CongestionLevel) -> TcpEecnMeaning:
    if level is CongestionLevel.CL2:
        return TcpEecnMeaning.CL2_ECHO
    if level is CongestionLevel.CL1:
        return TcpEecnMeaning.CL1_ECHO
    return TcpEecnMeaning.CAPABLE


def level_of_echo(meaning: TcpEecnMeaning) -> CongestionLevel:
    if meaning is TcpEecnMeaning.CL2_ECHO:
        return CongestionLevel.CL2
    if meaning is TcpEecnMeaning.CL1_ECHO:
        return CongestionLevel.CL1
    return CongestionLevel.NONE


def eecn_level(cp: EcnCodepoint) -> CongestionLevel:
    """Congestion level an EECN endpoint reads from the IP field."""
    meaning = decode_ip_eecn(cp)
    if meaning is EecnMeaning.CL2:
        return CongestionLevel.CL2
    if meaning is EecnMeaning.CL1:
        return CongestionLevel.CL1
    return CongestionLevel.NONE


def stamp_level(level: CongestionLevel) -> EcnCodepoint:
    if level is CongestionLevel.CL2:
        return CL2
    if level is CongestionLevel.CL1:
        return CL1
    return CAPABLE


def coexist_map_ecn_to_eecn(cp: EcnCodepoint) -> CongestionLevel:
    """
    Level an EECN endpoint assigns to a codepoint written by an ECN router.
    CE is read as CL2 and ECT(0) as CL1; everything else carries no level.
    """
    meaning = decode_ip_ecn(cp)
    if meaning is EcnMeaning.CE:
        return CongestionLevel.CL2
    if meaning is EcnMeaning.ECT0:
        return CongestionLevel.CL1
    return CongestionLevel.NONE


def is_markable(cp: EcnCodepoint) -> bool:
    """(0,1) and (1,0) are markable under both interpretations; (0,0) never is."""
    return cp.bits in ((0, 1), (1, 0))


def trace_label(cp: EcnCodepoint) -> str:
    return _TRACE_LABELS[cp.bits]
