"""Reference frames produced by the can-isotp package."""
from __future__ import annotations

import isotp
from isotp.protocol import PDU

TX_ID = 0x7E8
RX_ID = 0x7E0


def reference_frames(payload: bytes, pad_byte: int = 0xCC) -> list[bytes]:
    """CAN data fields can-isotp emits to send ``payload`` with BS=0, STmin=0."""
    sent: list[bytes] = []
    tl = isotp.TransportLayerLogic(
        rxfn=lambda timeout: None,
        txfn=lambda msg: sent.append(bytes(msg.data)),
        address=isotp.Address(isotp.AddressingMode.Normal_11bits, txid=TX_ID, rxid=RX_ID),
        params={
            "tx_padding": pad_byte,
            "tx_data_min_length": 8,
            "max_frame_size": 1 << 20,
            "blocksize": 0,
            "stmin": 0,
        },
    )
    tl.send(payload)
    tl.process()
    if len(payload) > 7:
        fc = isotp.CanMessage(arbitration_id=RX_ID, data=bytes([0x30, 0, 0, 0xCC, 0xCC, 0xCC, 0xCC, 0xCC]))
        _feed(tl, fc)
        guard = 0
        while tl.transmitting():
            tl.process()
            guard += 1
            if guard > 100000:
                raise RuntimeError("oracle did not finish")
    return sent


def _feed(tl, msg) -> None:
    """Hand one received frame to the layer through its rx callback."""
    pending = [msg]
    tl.rxfn = lambda timeout: pending.pop() if pending else None
    tl.process()


def reference_fc(fs: int, bs: int, stmin: int, pad_byte: int = 0xCC) -> bytes:
    data = bytes(PDU.craft_flow_control_data(fs, bs, stmin))
    return data + bytes([pad_byte]) * (8 - len(data))


def reference_decode(data: bytes) -> PDU:
    return PDU(isotp.CanMessage(arbitration_id=TX_ID, data=data))
