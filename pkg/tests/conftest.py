import struct

import numpy as np
import pytest

MAGIC_LE_US = 0xA1B2C3D4
MAGIC_BE_US = 0xD4C3B2A1
MAGIC_LE_NS = 0xA1B23C4D
MAGIC_BE_NS = 0x4D3CB2A1


def write_pcap(timestamps, payload_lens=None, magic=MAGIC_LE_US):
    """Build classic pcap bytes for test fixtures (independent of the parser)."""
    order = "<" if magic in (MAGIC_LE_US, MAGIC_LE_NS) else ">"
    us = magic in (MAGIC_LE_US, MAGIC_BE_US)
    frac_digits = 1_000_000 if us else 1_000_000_000
    # the canonical magic written in the file's own byte order; a reader
    # seeing it byte-swapped knows the file is the other endianness
    canonical = MAGIC_LE_US if us else MAGIC_LE_NS
    if payload_lens is None:
        payload_lens = [60] * len(timestamps)
    out = struct.pack(order + "IHHiIII", canonical, 2, 4, 0, 0, 65535, 1)
    for ts, plen in zip(timestamps, payload_lens):
        sec = int(ts)
        frac = round((ts - sec) * frac_digits)
        if frac >= frac_digits:
            sec += 1
            frac = 0
        out += struct.pack(order + "IIII", sec, frac, plen, plen)
        out += b"\x00" * plen
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
