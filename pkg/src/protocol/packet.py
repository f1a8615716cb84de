from dataclasses import dataclass
from enum import Enum

from src.protocol.codepoint import (
    NOT_CAPABLE,
    EcnCodepoint,
    TcpEcnSignal,
)

HEADER_BYTES = 40


class PacketKind(Enum):
    SYN = "syn"
    SYNACK = "synack"
    ACK = "ack"
    DATA = "data"


@dataclass
class Packet:
    """
    A simulated TCP/IP segment.

    ``seq`` is the first payload byte for data segments and ``ack_no`` the
    next byte expected by the sender of an ACK. Times are integer
    nanoseconds.
    """

    flow_id: int
    kind: PacketKind
    src: str
    dst: str
    seq: int = 0
    ack_no: int = 0
    payload: int = 0
    codepoint: EcnCodepoint = NOT_CAPABLE
    ece: int = 0
    cwr: int = 0
    first_sent_ns: int = 0
    sent_ns: int = 0
    retransmitted: bool = False
    # Echo of the data segment's send time, used for RTT samples.
    echo_sent_ns: int = 0
    echo_retransmitted: bool = False
    # Assigned from the owning world's counter so traces repeat across runs.
    uid: int = 0

    @property
    def syn(self) -> int:
        return int(self.kind in (PacketKind.SYN, PacketKind.SYNACK))

    @property
    def ack(self) -> int:
        return int(self.kind in (PacketKind.SYNACK, PacketKind.ACK))

    @property
    def size(self) -> int:
        return HEADER_BYTES + self.payload

    @property
    def tcp_signal(self) -> TcpEcnSignal:
        return TcpEcnSignal(self.ece, self.cwr, self.syn, self.ack)
