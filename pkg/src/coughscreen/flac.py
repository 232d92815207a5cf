"""Minimal native FLAC decoder.

Handles the subset produced by standard encoders: constant, verbatim, fixed
(orders 0-4) and LPC subframes, Rice/Rice2 residual partitions, wasted bits,
and the four channel assignments. Frame CRC-8/CRC-16 are verified, so
truncated or corrupted streams fail loudly instead of yielding garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnreadableFile

_FIXED_COEFS = ((), (1,), (2, -1), (3, -3, 1), (4, -6, 4, -1))


def _crc8(data: bytes) -> int:
    crc = 0
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
    return crc


def _crc16(data: bytes) -> int:
    crc = 0
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x8005) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


class _BitReader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.byte_pos = pos
        self.bit_buf = 0
        self.bit_len = 0

    def eof(self) -> bool:
        return self.bit_len == 0 and self.byte_pos >= len(self.data)

    def read_uint(self, n: int) -> int:
        while self.bit_len < n:
            if self.byte_pos >= len(self.data):
                raise UnreadableFile("unexpected end of FLAC stream")
            self.bit_buf = (self.bit_buf << 8) | self.data[self.byte_pos]
            self.byte_pos += 1
            self.bit_len += 8
        self.bit_len -= n
        value = (self.bit_buf >> self.bit_len) & ((1 << n) - 1)
        self.bit_buf &= (1 << self.bit_len) - 1
        return value

    def read_signed(self, n: int) -> int:
        value = self.read_uint(n)
        return value - ((value >> (n - 1)) << n)

    def read_unary(self) -> int:
        count = 0
        while self.read_uint(1) == 0:
            count += 1
        return count

    def read_rice(self, param: int) -> int:
        value = (self.read_unary() << param) | self.read_uint(param)
        return (value >> 1) ^ -(value & 1)

    def align(self) -> None:
        self.bit_len -= self.bit_len % 8


@dataclass
class FlacStream:
    sample_rate: int
    channels: int
    bits_per_sample: int
    samples: np.ndarray     # (n, channels) int32


def _read_utf8_number(reader: _BitReader) -> int:
    first = reader.read_uint(8)
    if first < 0x80:
        return first
    n_extra = 0
    mask = 0x40
    while first & mask:
        n_extra += 1
        mask >>= 1
    if n_extra == 0:
        raise UnreadableFile("invalid UTF-8 coded number in frame header")
    value = first & (mask - 1)
    for _ in range(n_extra):
        byte = reader.read_uint(8)
        if byte & 0xC0 != 0x80:
            raise UnreadableFile("invalid UTF-8 continuation in frame header")
        value = (value << 6) | (byte & 0x3F)
    return value


def _decode_residuals(reader: _BitReader, blocksize: int, order: int) -> list[int]:
    method = reader.read_uint(2)
    if method > 1:
        raise UnreadableFile("reserved residual coding method")
    param_bits, escape = (4, 0xF) if method == 0 else (5, 0x1F)
    partition_order = reader.read_uint(4)
    n_partitions = 1 << partition_order
    if blocksize % n_partitions != 0:
        raise UnreadableFile("block size not divisible by Rice partition count")
    out: list[int] = []
    for part in range(n_partitions):
        count = blocksize >> partition_order
        if part == 0:
            count -= order
        param = reader.read_uint(param_bits)
        if param < escape:
            out.extend(reader.read_rice(param) for _ in range(count))
        else:
            raw_bits = reader.read_uint(5)
            out.extend(reader.read_signed(raw_bits) for _ in range(count))
    return out


def _restore_prediction(samples: list[int], coefs, shift: int) -> None:
    order = len(coefs)
    for i in range(order, len(samples)):
        acc = 0
        for j, c in enumerate(coefs):
            acc += samples[i - 1 - j] * c
        samples[i] += acc >> shift


def _decode_subframe(reader: _BitReader, blocksize: int, depth: int) -> list[int]:
    if reader.read_uint(1) != 0:
        raise UnreadableFile("bad subframe padding bit")
    sub_type = reader.read_uint(6)
    wasted = 0
    if reader.read_uint(1) == 1:
        wasted = 1 + reader.read_unary()
    depth -= wasted

    if sub_type == 0:
        samples = [reader.read_signed(depth)] * blocksize
    elif sub_type == 1:
        samples = [reader.read_signed(depth) for _ in range(blocksize)]
    elif 8 <= sub_type <= 12:
        order = sub_type - 8
        samples = [reader.read_signed(depth) for _ in range(order)]
        samples.extend(_decode_residuals(reader, blocksize, order))
        _restore_prediction(samples, _FIXED_COEFS[order], 0)
    elif 32 <= sub_type <= 63:
        order = sub_type - 31
        samples = [reader.read_signed(depth) for _ in range(order)]
        precision = reader.read_uint(4) + 1
        if precision == 16:  # stored value 0b1111 is invalid
            raise UnreadableFile("invalid LPC precision")
        shift = reader.read_signed(5)
        coefs = [reader.read_signed(precision) for _ in range(order)]
        samples.extend(_decode_residuals(reader, blocksize, order))
        _restore_prediction(samples, coefs, shift)
    else:
        raise UnreadableFile(f"reserved subframe type {sub_type}")

    if wasted:
        samples = [v << wasted for v in samples]
    return samples


_BLOCKSIZE_TABLE = {1: 192, 2: 576, 3: 1152, 4: 2304, 5: 4608,
                    8: 256, 9: 512, 10: 1024, 11: 2048, 12: 4096,
                    13: 8192, 14: 16384, 15: 32768}

_DEPTH_TABLE = {1: 8, 2: 12, 4: 16, 5: 20, 6: 24, 7: 32}


def _decode_frame(data: bytes, pos: int, info: FlacStream) -> tuple[np.ndarray, int]:
    reader = _BitReader(data, pos)
    if reader.read_uint(14) != 0x3FFE:
        raise UnreadableFile("frame sync code expected")
    reader.read_uint(1)                    # reserved
    reader.read_uint(1)                    # blocking strategy
    blocksize_code = reader.read_uint(4)
    samplerate_code = reader.read_uint(4)
    channel_assignment = reader.read_uint(4)
    depth_code = reader.read_uint(3)
    reader.read_uint(1)                    # reserved
    _read_utf8_number(reader)

    if blocksize_code == 6:
        blocksize = reader.read_uint(8) + 1
    elif blocksize_code == 7:
        blocksize = reader.read_uint(16) + 1
    elif blocksize_code in _BLOCKSIZE_TABLE:
        blocksize = _BLOCKSIZE_TABLE[blocksize_code]
    else:
        raise UnreadableFile("reserved block size code")
    if samplerate_code == 12:
        reader.read_uint(8)
    elif samplerate_code in (13, 14):
        reader.read_uint(16)
    depth = info.bits_per_sample if depth_code == 0 else _DEPTH_TABLE.get(depth_code)
    if depth is None:
        raise UnreadableFile("reserved sample size code")

    header_crc = reader.read_uint(8)
    if _crc8(data[pos:reader.byte_pos - 1]) != header_crc:
        raise UnreadableFile("frame header CRC-8 mismatch")

    if channel_assignment <= 7:
        if channel_assignment + 1 != info.channels:
            raise UnreadableFile("frame channel count differs from STREAMINFO")
        channels = [_decode_subframe(reader, blocksize, depth)
                    for _ in range(info.channels)]
    elif channel_assignment in (8, 9, 10):
        if info.channels != 2:
            raise UnreadableFile("side coding in a non-stereo stream")
        extra0 = 1 if channel_assignment == 9 else 0
        ch0 = _decode_subframe(reader, blocksize, depth + extra0)
        ch1 = _decode_subframe(reader, blocksize, depth + (1 - extra0))
        if channel_assignment == 8:        # left-side
            ch1 = [left - side for left, side in zip(ch0, ch1)]
        elif channel_assignment == 9:      # right-side
            ch0 = [side + right for side, right in zip(ch0, ch1)]
        else:                              # mid-side
            for i in range(blocksize):
                side = ch1[i]
                right = ch0[i] - (side >> 1)
                ch0[i], ch1[i] = right + side, right
        channels = [ch0, ch1]
    else:
        raise UnreadableFile("reserved channel assignment")

    reader.align()
    frame_crc = reader.read_uint(16)
    if _crc16(data[pos:reader.byte_pos - 2]) != frame_crc:
        raise UnreadableFile("frame CRC-16 mismatch")

    block = np.array(channels, dtype=np.int64).T   # (blocksize, channels)
    return block, reader.byte_pos


def decode_flac(data: bytes) -> FlacStream:
    if len(data) < 4 or data[:4] != b"fLaC":
        raise UnreadableFile("not a FLAC stream (bad magic)")
    reader = _BitReader(data, 4)
    info: FlacStream | None = None
    last = False
    while not last:
        last = reader.read_uint(1) == 1
        block_type = reader.read_uint(7)
        length = reader.read_uint(24)
        if block_type == 0:
            reader.read_uint(16)   # min blocksize
            reader.read_uint(16)   # max blocksize
            reader.read_uint(24)   # min framesize
            reader.read_uint(24)   # max framesize
            sample_rate = reader.read_uint(20)
            channels = reader.read_uint(3) + 1
            depth = reader.read_uint(5) + 1
            total = reader.read_uint(36)
            reader.read_uint(128)  # MD5
            info = FlacStream(sample_rate=sample_rate, channels=channels,
                              bits_per_sample=depth,
                              samples=np.empty((0, channels), dtype=np.int64))
            info_total = total
        else:
            for _ in range(length):
                reader.read_uint(8)
    if info is None:
        raise UnreadableFile("STREAMINFO metadata block absent")
    if info.sample_rate == 0:
        raise UnreadableFile("invalid sample rate in STREAMINFO")

    blocks = []
    pos = reader.byte_pos
    while pos < len(data):
        block, pos = _decode_frame(data, pos, info)
        blocks.append(block)
    samples = np.vstack(blocks) if blocks else np.empty((0, info.channels), np.int64)
    if info_total and samples.shape[0] < info_total:
        raise UnreadableFile(
            f"stream truncated: {samples.shape[0]} of {info_total} samples present")
    info.samples = samples
    return info
