"""Moving-shape bitmap stimuli on a 20 x 25 toroidal visual field."""

from __future__ import annotations

import csv
import enum
import functools
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

FIELD_SHAPE = (20, 25)
N_PIXELS = FIELD_SHAPE[0] * FIELD_SHAPE[1]
SHAPE_PIXELS = 40


class ShapeKind(str, enum.Enum):
    SQUARE = "square"
    GRID = "grid"
    ELLIPSE = "ellipse"
    CROSS = "cross"


class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"

    @property
    def step(self) -> tuple[int, int]:
        return _STEPS[self]

    @property
    def opposite(self) -> Direction:
        return _OPPOSITE[self]


_STEPS = {Direction.UP: (-1, 0), Direction.DOWN: (1, 0), Direction.LEFT: (0, -1), Direction.RIGHT: (0, 1)}
_OPPOSITE = {Direction.UP: Direction.DOWN, Direction.DOWN: Direction.UP,
             Direction.LEFT: Direction.RIGHT, Direction.RIGHT: Direction.LEFT}

DIRECTIONS = tuple(Direction)
SHAPES = tuple(ShapeKind)


@functools.lru_cache(maxsize=None)
def _load_rasters() -> dict[str, tuple[tuple[int, int], ...]]:
    text = resources.files("spikenorm").joinpath("data/shapes.txt").read_text()
    rasters: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        line = line.strip()
        header = re.fullmatch(r"\[(\w+)\]", line)
        if header:
            current = header.group(1)
            rasters[current] = []
        elif current is not None and line and set(line) <= {".", "#"}:
            rasters[current].append(line)
    return {
        name: tuple((r, c) for r, row in enumerate(rows) for c, ch in enumerate(row) if ch == "#")
        for name, rows in rasters.items()
    }


def shape_mask(kind: ShapeKind | str) -> np.ndarray:
    """(40, 2) array of (row, col) offsets of the black pixels of ``kind``."""
    kind = ShapeKind(kind)
    return np.array(_load_rasters()[kind.value], dtype=np.int64)


def render(kind: ShapeKind | str, origin: tuple[int, int]) -> np.ndarray:
    """Place the shape with its top-left corner at ``origin``, wrapping at the edges."""
    offsets = shape_mask(kind)
    frame = np.zeros(FIELD_SHAPE, dtype=np.uint8)
    frame[(offsets[:, 0] + origin[0]) % FIELD_SHAPE[0], (offsets[:, 1] + origin[1]) % FIELD_SHAPE[1]] = 1
    return frame


def translate(frame: np.ndarray, direction: Direction | str, pixels: int = 1) -> np.ndarray:
    dr, dc = Direction(direction).step
    return np.roll(frame, (dr * pixels, dc * pixels), axis=(0, 1))


@dataclass(frozen=True)
class StimulusSequence:
    frames: np.ndarray  # (length, 20, 25) uint8, 1 = black
    shape: ShapeKind
    direction: Direction
    origin: tuple[int, int]

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def label(self) -> int:
        return DIRECTIONS.index(self.direction)


def generate_sequence(
    kind: ShapeKind | str,
    direction: Direction | str,
    origin: tuple[int, int] | None = None,
    length: int = 10,
    rng_seed: int | None = None,
) -> StimulusSequence:
    """Frames of ``kind`` moving one pixel per frame along ``direction``.

    When ``origin`` is None it is drawn uniformly over all field positions
    from ``rng_seed``.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    kind, direction = ShapeKind(kind), Direction(direction)
    if origin is None:
        flat = int(np.random.default_rng(rng_seed).integers(N_PIXELS))
        origin = divmod(flat, FIELD_SHAPE[1])
    origin = (int(origin[0]) % FIELD_SHAPE[0], int(origin[1]) % FIELD_SHAPE[1])
    first = render(kind, origin)
    dr, dc = direction.step
    frames = np.stack([np.roll(first, (dr * t, dc * t), axis=(0, 1)) for t in range(length)])
    return StimulusSequence(frames, kind, direction, origin)


def make_dataset(inputs_per_cycle: int, frames_per_input: int, rng_seed: int | None = None) -> list[StimulusSequence]:
    """A direction-balanced set of sequences in seeded-shuffled order.

    Shape and origin are drawn uniformly and independently per input.
    """
    if inputs_per_cycle < 1 or inputs_per_cycle % len(DIRECTIONS):
        raise ValueError(f"inputs_per_cycle must be a positive multiple of {len(DIRECTIONS)}, got {inputs_per_cycle}")
    rng = np.random.default_rng(rng_seed)
    per_direction = inputs_per_cycle // len(DIRECTIONS)
    directions = rng.permutation(np.repeat(np.arange(len(DIRECTIONS)), per_direction))
    shapes = rng.integers(len(SHAPES), size=inputs_per_cycle)
    origins = rng.integers(N_PIXELS, size=inputs_per_cycle)
    return [
        generate_sequence(SHAPES[s], DIRECTIONS[d], divmod(int(o), FIELD_SHAPE[1]), frames_per_input)
        for d, s, o in zip(directions, shapes, origins)
    ]


@functools.lru_cache(maxsize=None)
def _block_grid(n_inputs: int) -> tuple[int, int]:
    rows, cols = FIELD_SHAPE
    best = None
    for r in range(1, rows + 1):
        if rows % r or n_inputs % r:
            continue
        c = n_inputs // r
        if c > cols or cols % c:
            continue
        aspect = abs(np.log((rows / r) / (cols / c)))
        if best is None or aspect < best[0]:
            best = (aspect, r, c)
    if best is None:
        raise ValueError(f"cannot tile the {rows}x{cols} field into {n_inputs} equal blocks")
    return best[1], best[2]


def pool_frames(frames: np.ndarray, n_inputs: int) -> np.ndarray:
    """Black-pixel counts per receptive field, shape ``(..., n_inputs)``.

    The field is tiled into ``n_inputs`` equal rectangular blocks (the most
    square tiling available). With 500 inputs every pixel is its own block.
    """
    frames = np.asarray(frames)
    lead = frames.shape[:-2]
    if n_inputs == N_PIXELS:
        return frames.reshape(*lead, N_PIXELS).astype(np.float64)
    r, c = _block_grid(n_inputs)
    br, bc = FIELD_SHAPE[0] // r, FIELD_SHAPE[1] // c
    blocks = frames.reshape(*lead, r, br, c, bc).sum(axis=(-3, -1))
    return blocks.reshape(*lead, n_inputs).astype(np.float64)


# --- plain-text export ------------------------------------------------------

def write_pbm(path, frame: np.ndarray, comment: str | None = None) -> None:
    """Plain (P1) portable bitmap, 1 = black."""
    lines = ["P1"]
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"{frame.shape[1]} {frame.shape[0]}")
    lines.extend(" ".join(str(int(v)) for v in row) for row in frame)
    Path(path).write_text("\n".join(lines) + "\n")


def read_pbm(path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines()
              if not line.startswith("#") for t in line.split()]
    if not tokens or tokens[0] != "P1":
        raise ValueError(f"{path}: not a plain PBM file")
    width, height = int(tokens[1]), int(tokens[2])
    return np.array(tokens[3:3 + width * height], dtype=np.uint8).reshape(height, width)


MANIFEST_COLUMNS = ("input_id", "shape", "direction", "origin_row", "origin_col", "seed")


def export_dataset(out_dir, sequences: list[StimulusSequence], seed: int | None) -> Path:
    """Write one PBM per frame (``input_XXXX/frame_XXX.pbm``) and ``manifest.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for i, seq in enumerate(sequences):
            seq_dir = out_dir / f"input_{i:04d}"
            seq_dir.mkdir(exist_ok=True)
            for t, frame in enumerate(seq.frames):
                write_pbm(seq_dir / f"frame_{t:03d}.pbm", frame, f"{seq.shape.value} {seq.direction.value} t={t}")
            writer.writerow([i, seq.shape.value, seq.direction.value, seq.origin[0], seq.origin[1], seed])
    return manifest
