"""Background/foreground separation of grayscale image stacks.

Each frame is flattened row-major into one column of the data matrix, so a
static scene gives a low-rank matrix and moving objects a sparse one.
"""

from dataclasses import dataclass, field
from pathlib import Path
import time

import numpy as np

from .errors import InconsistentFrameShape, InvalidSpec, MatrixParseError, ShapeMismatch
from .ialm import ialm
from .metrics import RecoveryReport, numerical_rank
from .solver import slr_imat


@dataclass
class ImageStack:
    """Ordered grayscale frames with pixel values normalized to [0, 1].

    ``maxval`` is the source bit depth's maximum (255 for 8-bit input) and
    is used to denormalize on export.
    """

    frames: list
    maxval: int = 255
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.frames = [np.asarray(f, dtype=np.float64) for f in self.frames]
        if not self.frames:
            raise InvalidSpec("an image stack needs at least one frame")
        shape = self.frames[0].shape
        if len(shape) != 2:
            raise InconsistentFrameShape(f"frames must be 2-D, got shape {shape}")
        for i, f in enumerate(self.frames):
            if f.shape != shape:
                raise InconsistentFrameShape(f"frame {i} has shape {f.shape}, expected {shape}")

    @property
    def height(self):
        return self.frames[0].shape[0]

    @property
    def width(self):
        return self.frames[0].shape[1]

    @property
    def frame_count(self):
        return len(self.frames)


def stack_to_matrix(stack):
    """``(h*w) x frame_count`` matrix; column j is frame j in row-major order."""
    return np.stack([f.reshape(-1) for f in stack.frames], axis=1)


def matrix_to_stack(x, h, w, maxval=255):
    """Inverse of :func:`stack_to_matrix`. No clamping happens here."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != h * w:
        raise ShapeMismatch(f"matrix with {x.shape[0] if x.ndim == 2 else x.shape} rows "
                            f"cannot hold {h}x{w} frames")
    return ImageStack([x[:, j].reshape(h, w).copy() for j in range(x.shape[1])], maxval=maxval)


# --- PGM -------------------------------------------------------------------

def _tokens(data, pos, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MatrixParseError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def _parse_pgm(data, pos=0):
    """Parse one PGM image starting at ``pos``; returns (pixels, maxval, next_pos)."""
    (magic,), pos = _tokens(data, pos, 1)
    if magic not in (b"P2", b"P5"):
        raise MatrixParseError(f"unsupported image magic {magic!r}; expected P2 or P5")
    (w, h, maxval), pos = _tokens(data, pos, 3)
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 65536:
        raise MatrixParseError(f"PGM maxval {maxval} out of range")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        size = w * h * dtype.itemsize
        if len(data) < pos + size:
            raise MatrixParseError("truncated PGM raster")
        pixels = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
        pos += size
    else:
        values, pos = _tokens(data, pos, w * h)
        pixels = np.array([int(v) for v in values]).reshape(h, w)
    return pixels.astype(np.float64), maxval, pos


def read_pgm(path):
    """Read a single PGM image; returns ``(pixels, maxval)`` with raw values."""
    pixels, maxval, _ = _parse_pgm(Path(path).read_bytes())
    return pixels, maxval


def read_pgm_frames(path):
    """All PGM images concatenated back to back in one file."""
    data = Path(path).read_bytes()
    frames, pos = [], 0
    maxval = None
    while data[pos:].strip():
        pixels, mv, pos = _parse_pgm(data, pos)
        frames.append(pixels)
        maxval = mv if maxval is None else max(maxval, mv)
    return frames, maxval


def write_pgm(path, pixels, maxval=255):
    """Write a binary (P5) PGM; ``pixels`` must already be integers in [0, maxval]."""
    pixels = np.asarray(pixels)
    h, w = pixels.shape
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(pixels.astype(dtype).tobytes())


def load_stack(source):
    """Load frames from a directory of ``.pgm`` files (lexicographic order),
    a file of concatenated PGM images, or a text file listing one image path
    per line (relative paths resolve against the list file).

    Color is not supported by PGM; callers holding RGB data should average
    the channels before building an :class:`ImageStack`.
    """
    source = Path(source)
    raw, maxvals, names = [], [], []
    if source.is_dir():
        paths = sorted(p for p in source.iterdir() if p.suffix.lower() == ".pgm")
        for p in paths:
            pixels, mv = read_pgm(p)
            raw.append(pixels)
            maxvals.append(mv)
            names.append(p.name)
    elif source.is_file():
        head = source.read_bytes()[:2]
        if head in (b"P2", b"P5"):
            raw, mv = read_pgm_frames(source)
            maxvals = [mv] * len(raw)
            names = [f"{source.name}[{i}]" for i in range(len(raw))]
        else:
            for line in source.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                p = Path(line)
                if not p.is_absolute():
                    p = source.parent / p
                pixels, mv = read_pgm(p)
                raw.append(pixels)
                maxvals.append(mv)
                names.append(p.name)
    else:
        raise InvalidSpec(f"{source} does not exist")
    if not raw:
        raise InvalidSpec(f"no PGM frames found in {source}")
    shape = raw[0].shape
    for name, f in zip(names, raw):
        if f.shape != shape:
            raise InconsistentFrameShape(f"{name} has shape {f.shape}, expected {shape}")
    maxval = max(maxvals)
    return ImageStack([f / mv for f, mv in zip(raw, maxvals)], maxval=maxval, names=names)


def to_pixels(frame, maxval):
    """Clamp a normalized frame to [0, 1] and quantize to ``0..maxval``."""
    return np.rint(np.clip(frame, 0.0, 1.0) * maxval).astype(int)


def background_subtract(stack, solver="slr_imat", config=None):
    """Split a stack into a low-rank background and a sparse foreground.

    Returns ``(background, foreground, report, decomposition)``. The
    foreground stack holds ``|E|`` (unscaled); the signed sparse part is in
    ``decomposition.sparse``. The report has no SNR fields since there is no
    ground truth.
    """
    if stack.frame_count < 2:
        raise InvalidSpec(f"background subtraction needs at least 2 frames, got {stack.frame_count}")
    y = stack_to_matrix(stack)
    start = time.perf_counter()
    if solver == "slr_imat":
        result = slr_imat(y, config)
    elif solver == "ialm":
        result = ialm(y, config)
    else:
        raise InvalidSpec(f"unknown solver {solver!r}")
    seconds = time.perf_counter() - start
    h, w = stack.height, stack.width
    background = matrix_to_stack(result.low_rank, h, w, stack.maxval)
    foreground = matrix_to_stack(np.abs(result.sparse), h, w, stack.maxval)
    report = RecoveryReport(
        solver_name=solver,
        snr_db=None,
        input_snr_db=None,
        numerical_rank_l=numerical_rank(result.low_rank) if np.any(result.low_rank) else 0,
        nnz_e=int(np.count_nonzero(result.sparse)),
        wall_time_seconds=seconds,
        converged=result.converged,
        n=y.shape[1],
    )
    return background, foreground, report, result


def export_stacks(background, foreground, out_dir):
    """Write ``bg_####.pgm`` and ``fg_####.pgm``.

    Background frames are clamped to [0, 1]; foreground magnitudes are
    stretched so the largest value over the whole stack maps to white.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    maxval = background.maxval
    peak = max(float(f.max()) for f in foreground.frames)
    scale = 1.0 / peak if peak > 0 else 1.0
    written = []
    for j, (bg, fg) in enumerate(zip(background.frames, foreground.frames)):
        bg_path = out_dir / f"bg_{j:04d}.pgm"
        fg_path = out_dir / f"fg_{j:04d}.pgm"
        write_pgm(bg_path, to_pixels(bg, maxval), maxval)
        write_pgm(fg_path, to_pixels(fg * scale, maxval), maxval)
        written += [bg_path, fg_path]
    return written
