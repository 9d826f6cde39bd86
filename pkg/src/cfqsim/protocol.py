"""Bit-by-bit transmission protocol and monochrome bitmap transport.

One side encodes each bit by clearing (0) or blocking (1) the channel;
the other launches single-photon trials until a conclusive detector
fires, decodes D0 -> 0 and D1 -> 1, and acknowledges over an ideal
classical feedback channel before the next bit starts.  Images use the
convention black = 0, white = 1 (portable bitmaps store 1 = black, so the
codec inverts on the way in and out).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import ChannelInfeasibleError, EmptyInputError, PbmFormatError, RangeError
from .scenario import NoiseConfig, Scenario

DEFAULT_ATTEMPT_CAP = 10_000


@dataclass(frozen=True)
class BitTrial:
    bit_sent: int
    attempts: int
    outcome_detector: str
    bit_decoded: int
    correct: bool


@dataclass(frozen=True)
class MonoImage:
    width: int
    height: int
    pixels: tuple[int, ...]  # row-major, black = 0, white = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise RangeError("image dimensions must be positive")
        if len(self.pixels) != self.width * self.height:
            raise RangeError("pixel count must equal width * height")
        if any(p not in (0, 1) for p in self.pixels):
            raise RangeError("pixels must be 0 or 1")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "MonoImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise RangeError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], tuple(int(p) for p in arr.ravel()))

    def to_array(self) -> np.ndarray:
        return np.array(self.pixels, dtype=np.uint8).reshape(self.height, self.width)


@dataclass(frozen=True)
class ImageStats:
    bits_sent: int
    logic0_bits: int
    logic1_bits: int
    logic0_identification_rate: float
    logic1_identification_rate: float
    mean_attempts_per_bit: float
    total_trials: int
    pixel_errors: int

    def to_dict(self) -> dict:
        return {
            "bits_sent": self.bits_sent,
            "logic0_bits": self.logic0_bits,
            "logic1_bits": self.logic1_bits,
            "logic0_identification_rate": self.logic0_identification_rate,
            "logic1_identification_rate": self.logic1_identification_rate,
            "mean_attempts_per_bit": self.mean_attempts_per_bit,
            "total_trials": self.total_trials,
            "pixel_errors": self.pixel_errors,
        }


class BitChannel:
    """Caches per-logic outcome distributions for repeated transmissions."""

    def __init__(self, scenario: Scenario, noise: NoiseConfig | None = None,
                 attempt_cap: int = DEFAULT_ATTEMPT_CAP):
        self.scenario = scenario
        self.noise = noise if noise is not None else scenario.noise
        self.attempt_cap = attempt_cap
        self._cumulative: dict[int, tuple[list[str], np.ndarray]] = {}
        for logic in (0, 1):
            program = engine.compile_scenario(scenario, logic)
            dist = engine.outcome_distribution(program, self.noise)
            names = list(dist)
            probs = np.cumsum([dist[n] for n in names])
            probs[-1] = 1.0
            self._cumulative[logic] = (names, probs)

    def send(self, bit: int, rng: np.random.Generator, votes: int = 1) -> BitTrial:
        """One bit, repeat-until-conclusive; `votes` > 1 (odd) majority-decodes
        over that many conclusive outcomes.  Voting is off by default."""
        if bit not in (0, 1):
            raise RangeError("bit must be 0 or 1")
        if votes < 1 or votes % 2 == 0:
            raise RangeError("votes must be a positive odd integer")
        names, cumulative = self._cumulative[bit]
        attempts = 0
        outcomes = []
        while len(outcomes) < votes:
            if attempts >= self.attempt_cap:
                raise ChannelInfeasibleError(
                    f"no conclusive click within {self.attempt_cap} attempts")
            attempts += 1
            u = rng.random()
            outcome = names[int(np.searchsorted(cumulative, u, side="right"))]
            if outcome in ("D0", "D1"):
                outcomes.append(outcome)
        majority = "D1" if outcomes.count("D1") > votes // 2 else "D0"
        decoded = 0 if majority == "D0" else 1
        return BitTrial(
            bit_sent=bit,
            attempts=attempts,
            outcome_detector=majority,
            bit_decoded=decoded,
            correct=decoded == bit,
        )


def transmit_bit(
    scenario: Scenario,
    bit: int,
    noise: NoiseConfig | None = None,
    rng: np.random.Generator | None = None,
    attempt_cap: int = DEFAULT_ATTEMPT_CAP,
    votes: int = 1,
) -> BitTrial:
    """Repeat single-photon trials until a conclusive click decodes `bit`."""
    rng = rng if rng is not None else np.random.default_rng(scenario.seed)
    return BitChannel(scenario, noise, attempt_cap).send(bit, rng, votes=votes)


def transmit_image(
    scenario: Scenario,
    img: MonoImage,
    noise: NoiseConfig | None = None,
    seed: int = 0,
    attempt_cap: int = DEFAULT_ATTEMPT_CAP,
) -> tuple[MonoImage, ImageStats]:
    """Transmit every pixel in row-major order; deterministic given seed."""
    channel = BitChannel(scenario, noise, attempt_cap)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    trials = [channel.send(bit, rng) for bit in img.pixels]
    received = MonoImage(img.width, img.height,
                         tuple(t.bit_decoded for t in trials))
    return received, summarize(trials)


def summarize(trials: list[BitTrial]) -> ImageStats:
    """Aggregate per-logic identification rates and attempt statistics."""
    if not trials:
        raise EmptyInputError("no trials to summarize")
    zeros = [t for t in trials if t.bit_sent == 0]
    ones = [t for t in trials if t.bit_sent == 1]
    rate0 = sum(t.correct for t in zeros) / len(zeros) if zeros else 1.0
    rate1 = sum(t.correct for t in ones) / len(ones) if ones else 1.0
    total_trials = sum(t.attempts for t in trials)
    return ImageStats(
        bits_sent=len(trials),
        logic0_bits=len(zeros),
        logic1_bits=len(ones),
        logic0_identification_rate=rate0,
        logic1_identification_rate=rate1,
        mean_attempts_per_bit=total_trials / len(trials),
        total_trials=total_trials,
        pixel_errors=sum(not t.correct for t in trials),
    )


# --------------------------------------------------------------------------
# portable bitmap codec (P1 ascii, P4 binary); file bit 1 = black = logic 0

def encode_pbm(img: MonoImage, binary: bool = True) -> bytes:
    """Encode an image as P4 (default) or P1 portable bitmap bytes."""
    file_bits = [1 - p for p in img.pixels]
    if not binary:
        lines = [b"P1", f"{img.width} {img.height}".encode()]
        for y in range(img.height):
            row = file_bits[y * img.width:(y + 1) * img.width]
            lines.append(" ".join(str(b) for b in row).encode())
        return b"\n".join(lines) + b"\n"
    header = f"P4\n{img.width} {img.height}\n".encode()
    row_bytes = (img.width + 7) // 8
    packed = bytearray(row_bytes * img.height)
    for y in range(img.height):
        for x in range(img.width):
            if file_bits[y * img.width + x]:
                packed[y * row_bytes + (x >> 3)] |= 0x80 >> (x & 7)
    return header + bytes(packed)


def _tokenize_pbm_header(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace/comment separated integers, returning them
    and the offset just past the final separator byte."""
    tokens: list[int] = []
    i = 0
    current = b""
    while i < len(data):
        ch = data[i:i + 1]
        if ch == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if ch.isspace():
            if current:
                try:
                    tokens.append(int(current))
                except ValueError:
                    raise PbmFormatError(f"bad header token {current!r}")
                current = b""
                if len(tokens) == count:
                    return tokens, i + 1
            i += 1
            continue
        current += ch
        i += 1
    if current and len(tokens) < count:
        tokens.append(int(current))
        if len(tokens) == count:
            return tokens, len(data)
    raise PbmFormatError("truncated header")


def decode_pbm(data: bytes) -> MonoImage:
    """Decode P1 or P4 portable bitmap bytes."""
    if data[:2] not in (b"P1", b"P4"):
        raise PbmFormatError("not a portable bitmap (expected P1 or P4)")
    binary = data[:2] == b"P4"
    body = data[2:]
    (width, height), offset = _tokenize_pbm_header(body, 2)
    if width < 1 or height < 1:
        raise PbmFormatError("dimensions must be positive")
    payload = body[offset:]
    file_bits: list[int] = []
    if binary:
        row_bytes = (width + 7) // 8
        needed = row_bytes * height
        if len(payload) < needed:
            raise PbmFormatError("truncated P4 payload")
        for y in range(height):
            for x in range(width):
                byte = payload[y * row_bytes + (x >> 3)]
                file_bits.append((byte >> (7 - (x & 7))) & 1)
    else:
        for ch in payload.decode("ascii", errors="replace"):
            if ch in "01":
                file_bits.append(int(ch))
            elif ch == "#":
                pass  # rest-of-line comments are rare in payloads; tolerated
            elif not ch.isspace():
                raise PbmFormatError(f"unexpected character {ch!r} in P1 payload")
        if len(file_bits) < width * height:
            raise PbmFormatError("truncated P1 payload")
        file_bits = file_bits[: width * height]
    pixels = tuple(1 - b for b in file_bits)
    return MonoImage(width, height, pixels)
