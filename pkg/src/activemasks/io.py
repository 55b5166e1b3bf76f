"""Image ingestion, label and metrics output, and run configuration.

The only image format is PGM (P2 ASCII and P5 raw, up to 16-bit), which keeps
the parsing surface small and auditable. Label maps are written as 16-bit P5
files plus a row/col/label CSV sidecar; all output is byte-deterministic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .automaton import CycleReport, IterationRecord
from .domain import Boundary, DomainSpec, LabelField
from .skew import ImageField

ENV_OUTPUT_DIR = "ACTIVEMASKS_OUTDIR"

TRAJECTORY_HEADER = "iteration,boundary_crossings,pixels_changed,nonempty_masks"
LABELS_HEADER = "row,col,label"


class PgmParseError(ValueError):
    """Malformed PGM input; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _tokenize_header(data: bytes, count: int):
    """Yield `count` whitespace-separated header tokens, skipping comments.
    Returns (tokens_with_offsets, position_after_last_token)."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise PgmParseError("unexpected end of header", len(data))
        byte = data[pos:pos + 1]
        if byte.isspace():
            pos += 1
            continue
        if byte == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append((data[start:pos], start))
    return tokens, pos


def read_pgm(path) -> tuple[tuple[int, int], int, np.ndarray]:
    """Parse a P2 or P5 PGM file.

    Returns ((rows, cols), maxval, samples) with samples shaped (rows, cols)
    as integers. Raises PgmParseError, naming the byte offset, for malformed
    headers, out-of-range samples, or truncated payloads.
    """
    data = Path(path).read_bytes()
    (magic, magic_off), _ = _tokenize_header(data, 1)
    if magic not in (b"P2", b"P5"):
        raise PgmParseError(f"unsupported format {magic!r}, need P2 or P5", magic_off)
    tokens, pos = _tokenize_header(data, 4)
    values = []
    for token, off in tokens[1:]:
        try:
            values.append(int(token))
        except ValueError:
            raise PgmParseError(f"expected integer, got {token!r}", off) from None
    width, height, maxval = values
    if width < 1 or height < 1:
        raise PgmParseError(f"bad dimensions {width}x{height}", tokens[1][1])
    if not 1 <= maxval <= 65535:
        raise PgmParseError(f"maxval {maxval} outside 1..65535", tokens[3][1])

    if magic == b"P5":
        # exactly one whitespace byte separates the header from the payload
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise PgmParseError("missing whitespace before raw payload", pos)
        pos += 1
        bytes_per = 2 if maxval > 255 else 1
        expected = width * height * bytes_per
        actual = len(data) - pos
        if actual < expected:
            raise PgmParseError(
                f"raw payload truncated: expected {expected} bytes, found {actual}",
                len(data),
            )
        payload = data[pos:pos + expected]
        dtype = ">u2" if bytes_per == 2 else np.uint8
        samples = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    else:
        tokens, _ = _tokenize_header(data[pos:], width * height)
        samples = np.empty(width * height, dtype=np.int64)
        for i, (token, off) in enumerate(tokens):
            try:
                samples[i] = int(token)
            except ValueError:
                raise PgmParseError(f"expected sample value, got {token!r}",
                                    pos + off) from None
    if samples.size and (samples.min() < 0 or samples.max() > maxval):
        raise PgmParseError(
            f"sample value {int(samples.max())} exceeds maxval {maxval}", 0)
    return (height, width), maxval, samples.reshape(height, width)


def read_image(path, boundary: Boundary = Boundary.ZERO_PADDED) -> ImageField:
    """Read a PGM into an image field with intensities scaled by maxval."""
    (rows, cols), maxval, samples = read_pgm(path)
    domain = DomainSpec((rows, cols), boundary)
    return ImageField(domain, samples.astype(np.float64) / maxval)


def _labels_grid(state: LabelField) -> np.ndarray:
    if state.domain.ndim == 1:
        return state.labels.reshape(1, -1)
    if state.domain.ndim == 2:
        return state.labels
    raise ValueError("label output is defined for 1-D and 2-D domains only")


def write_labels(state: LabelField, path) -> None:
    """Write raw labels as a 16-bit P5 PGM plus a row/col/label CSV sidecar.

    Labels up to 65535 round-trip losslessly; both files are byte-identical
    across runs for equal inputs.
    """
    if state.num_labels > 65535:
        raise ValueError("label PGM output supports at most 65535 labels")
    grid = _labels_grid(state)
    rows, cols = grid.shape
    path = Path(path)
    header = f"P5\n{cols} {rows}\n65535\n".encode("ascii")
    payload = grid.astype(">u2").tobytes()
    path.write_bytes(header + payload)
    lines = [LABELS_HEADER]
    for r in range(rows):
        for c in range(cols):
            lines.append(f"{r},{c},{int(grid[r, c])}")
    Path(str(path) + ".csv").write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def read_labels(path, num_labels: int | None = None,
                boundary: Boundary = Boundary.ZERO_PADDED) -> LabelField:
    """Read a label PGM back into a label field (the raw samples are labels)."""
    (rows, cols), _, samples = read_pgm(path)
    if samples.min() < 1:
        raise PgmParseError("label samples must be >= 1", 0)
    m = int(samples.max()) if num_labels is None else num_labels
    domain = DomainSpec((rows, cols), boundary)
    return LabelField(domain, samples.astype(np.int32), m)


def read_labels_csv(path, num_labels: int | None = None,
                    boundary: Boundary = Boundary.ZERO_PADDED) -> LabelField:
    """Rebuild a label field from the CSV sidecar."""
    text = Path(path).read_text(encoding="ascii").strip().splitlines()
    if not text or text[0] != LABELS_HEADER:
        raise ConfigError(f"label CSV must start with '{LABELS_HEADER}'")
    entries = [tuple(int(v) for v in line.split(",")) for line in text[1:]]
    rows = max(e[0] for e in entries) + 1
    cols = max(e[1] for e in entries) + 1
    grid = np.zeros((rows, cols), dtype=np.int32)
    for r, c, label in entries:
        grid[r, c] = label
    m = int(grid.max()) if num_labels is None else num_labels
    return LabelField(DomainSpec((rows, cols), boundary), grid, m)


def random_init(domain: DomainSpec, num_labels: int, seed: int) -> LabelField:
    """Uniform i.i.d. labels from a PCG64 generator; same seed, same field."""
    if num_labels < 1:
        raise ValueError("need at least one label")
    rng = np.random.Generator(np.random.PCG64(seed))
    labels = rng.integers(1, num_labels + 1, size=domain.dims).astype(np.int32)
    return LabelField(domain, labels, num_labels)


def make_blob_image(
    dims: tuple[int, int] = (64, 64),
    num_blobs: int = 3,
    radius_range: tuple[int, int] = (12, 16),
    background: float = 0.05,
    foreground: float = 0.95,
    seed: int = 7,
    boundary: Boundary = Boundary.ZERO_PADDED,
) -> ImageField:
    """Synthetic stand-in for a fluorescence micrograph: bright disks on a
    dark background.

    Centers and radii come from a PCG64 generator; centers are rejected until
    disks are pairwise separated by at least 4 pixels and stay 2 pixels off
    the border (up to 1000 tries each), so the fixture is deterministic.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    rows, cols = dims
    intensity = np.full(dims, background)
    placed: list[tuple[int, int, int]] = []
    for _ in range(num_blobs):
        for _ in range(1000):
            radius = int(rng.integers(radius_range[0], radius_range[1] + 1))
            r = int(rng.integers(radius + 2, rows - radius - 2))
            c = int(rng.integers(radius + 2, cols - radius - 2))
            if all((r - pr) ** 2 + (c - pc) ** 2 >= (radius + prad + 4) ** 2
                   for pr, pc, prad in placed):
                placed.append((r, c, radius))
                break
    rr, cc = np.ogrid[0:rows, 0:cols]
    for r, c, radius in placed:
        intensity[(rr - r) ** 2 + (cc - c) ** 2 <= radius**2] = foreground
    return ImageField(DomainSpec(dims, boundary), intensity)


@dataclass(frozen=True)
class TrajectoryLog:
    """Per-iteration metrics plus the final cycle summary of a run."""

    records: tuple[IterationRecord, ...]
    report: CycleReport

    def __post_init__(self):
        if len(self.records) != self.report.iterations_run + 1:
            raise ValueError("trajectory must include iteration 0 and every step")

    @classmethod
    def from_report(cls, report: CycleReport) -> "TrajectoryLog":
        return cls(records=report.records, report=report)


def write_trajectory_csv(records, path) -> None:
    lines = [TRAJECTORY_HEADER]
    for rec in records:
        lines.append(f"{rec.iteration},{rec.boundary_crossings},"
                     f"{rec.pixels_changed},{rec.nonempty_masks}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


_FILTER_KINDS = ("dirac", "box", "plus", "gaussian", "taps")
_SKEW_KINDS = ("zero", "background")

_CONFIG_KEYS = {
    "image", "fixture", "fixture_size", "fixture_blobs", "fixture_seed",
    "labels", "filter", "scale", "boundary", "taps_file",
    "skew", "theta", "sharpness", "amplitude", "skew_scale",
    "seed", "max_iterations", "output", "checkpoints",
}


@dataclass(frozen=True)
class RunConfig:
    """Flat key=value run description (see the README for the key list)."""

    image: str | None = None
    fixture: str | None = None
    fixture_size: tuple[int, int] = (64, 64)
    fixture_blobs: int = 3
    fixture_seed: int = 7
    labels: int = 64
    filter_kind: str = "gaussian"
    scale: float = 4.0
    boundary: Boundary = Boundary.ZERO_PADDED
    taps_file: str | None = None
    skew_kind: str = "background"
    theta: float | None = None
    sharpness: float = 0.05
    amplitude: float = 1.0
    skew_scale: float | None = None
    seed: int = 0
    max_iterations: int = 200
    output: str | None = None
    checkpoints: tuple[int, ...] = (0, 2, 8, 14)

    def __post_init__(self):
        if not 1 <= self.labels <= 65535:
            raise ConfigError(f"labels must lie in 1..65535, got {self.labels}")
        if self.filter_kind not in _FILTER_KINDS:
            raise ConfigError(f"unknown filter '{self.filter_kind}'")
        if self.skew_kind not in _SKEW_KINDS:
            raise ConfigError(f"unknown skew '{self.skew_kind}'")
        if self.image is None and self.fixture is None:
            raise ConfigError("config needs either image=<path> or fixture=blobs")
        if self.image is not None and not Path(self.image).is_file():
            raise ConfigError(f"image file not found: {self.image}")
        if self.taps_file is not None and not Path(self.taps_file).is_file():
            raise ConfigError(f"taps file not found: {self.taps_file}")
        if self.fixture is not None and self.fixture != "blobs":
            raise ConfigError(f"unknown fixture '{self.fixture}'")

    def output_dir(self) -> Path:
        if self.output is not None:
            return Path(self.output)
        return Path(os.environ.get(ENV_OUTPUT_DIR, "."))


def _parse_size_pair(value: str) -> tuple[int, int]:
    parts = value.lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"expected <rows>x<cols>, got '{value}'")
    return int(parts[0]), int(parts[1])


def parse_config(path) -> RunConfig:
    """Parse a flat key=value config file ('#' starts a comment line)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got '{stripped}'")
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        raw[key] = value

    kwargs: dict = {}
    if "image" in raw:
        kwargs["image"] = raw["image"]
    if "fixture" in raw:
        kwargs["fixture"] = raw["fixture"]
    if "fixture_size" in raw:
        kwargs["fixture_size"] = _parse_size_pair(raw["fixture_size"])
    for key, cast in [("fixture_blobs", int), ("fixture_seed", int),
                      ("labels", int), ("seed", int), ("max_iterations", int)]:
        if key in raw:
            kwargs[key] = cast(raw[key])
    if "filter" in raw:
        kwargs["filter_kind"] = raw["filter"]
    for key, cast in [("scale", float), ("sharpness", float), ("amplitude", float),
                      ("skew_scale", float)]:
        if key in raw:
            kwargs[key] = cast(raw[key])
    if "theta" in raw:
        kwargs["theta"] = None if raw["theta"] == "auto" else float(raw["theta"])
    if "boundary" in raw:
        try:
            kwargs["boundary"] = Boundary(raw["boundary"])
        except ValueError:
            raise ConfigError(
                f"boundary must be 'circular' or 'padded', got '{raw['boundary']}'"
            ) from None
    if "skew" in raw:
        kwargs["skew_kind"] = raw["skew"]
    if "taps_file" in raw:
        kwargs["taps_file"] = raw["taps_file"]
    if "output" in raw:
        kwargs["output"] = raw["output"]
    if "checkpoints" in raw:
        kwargs["checkpoints"] = tuple(
            int(v) for v in raw["checkpoints"].split(",") if v.strip()
        )
    return RunConfig(**kwargs)


def read_taps_file(path) -> np.ndarray:
    """Kernel file: first token D, then D axis lengths, then row-major values."""
    tokens = Path(path).read_text().split()
    if not tokens:
        raise ConfigError(f"empty taps file: {path}")
    ndim = int(tokens[0])
    shape = tuple(int(t) for t in tokens[1:1 + ndim])
    values = [float(t) for t in tokens[1 + ndim:]]
    expected = int(np.prod(shape))
    if len(values) != expected:
        raise ConfigError(
            f"taps file {path}: expected {expected} values for shape {shape}, "
            f"got {len(values)}"
        )
    return np.asarray(values).reshape(shape)
