"""Bit-packed I/O for the codec sections: MSB-first within bytes."""

from __future__ import annotations


class DecodeError(ValueError):
    """Malformed or truncated bitstream."""


class BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nbits = 0
        self._total = 0

    def write_bits(self, value: int, nbits: int) -> None:
        if nbits < 0 or (nbits < 64 and value >> nbits):
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._nbits += nbits
        self._total += nbits
        while self._nbits >= 8:
            self._nbits -= 8
            self._buf.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def write_bit(self, value: int) -> None:
        self.write_bits(value & 1, 1)

    def write_varint(self, value: int) -> None:
        """LEB128-style: 7-bit groups, high bit flags continuation."""
        if value < 0:
            raise ValueError("varint must be non-negative")
        while True:
            group = value & 0x7F
            value >>= 7
            self.write_bits((0x80 | group) if value else group, 8)
            if not value:
                break

    @property
    def bit_length(self) -> int:
        return self._total

    def getvalue(self) -> bytes:
        """Byte-aligned contents (zero padding in the final byte)."""
        out = bytearray(self._buf)
        if self._nbits:
            out.append((self._acc << (8 - self._nbits)) & 0xFF)
        return bytes(out)


class BitReader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self._acc = 0
        self._nbits = 0

    def read_bits(self, nbits: int) -> int:
        while self._nbits < nbits:
            if self._pos >= len(self._data):
                raise DecodeError("bitstream truncated")
            self._acc = (self._acc << 8) | self._data[self._pos]
            self._pos += 1
            self._nbits += 8
        self._nbits -= nbits
        value = self._acc >> self._nbits
        self._acc &= (1 << self._nbits) - 1
        return value

    def read_bit(self) -> int:
        return self.read_bits(1)

    def read_varint(self) -> int:
        value = 0
        shift = 0
        while True:
            group = self.read_bits(8)
            value |= (group & 0x7F) << shift
            if not group & 0x80:
                return value
            shift += 7
            if shift > 63:
                raise DecodeError("varint overflow")

    @property
    def bits_consumed(self) -> int:
        return self._pos * 8 - self._nbits
