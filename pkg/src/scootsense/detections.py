"""Detection data model, raw-output postprocessing, and detection sources.

The six obstacle categories have a fixed id map (alphabetical order). Raw
detector candidates go through confidence filtering, category-wise NMS, and
a linear rescale from model-input coordinates to frame coordinates.

Detection sources decouple the pipeline from neural inference: a replay
source reads recorded detections from a file (deterministic, used by tests),
and a stream source speaks the same grammar over a pipe to an external
producer process.

Replay record grammar, one object per line, pixel units in frame space:

    frame_id category_id confidence x1 y1 x2 y2

Blank lines and lines starting with '#' are ignored in files. On a live
stream, '#frame <id>' lines mark frame boundaries.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass, replace
from typing import IO, Iterable, Optional, Sequence

from .errors import CategoryError, ConfigError, EndOfStreamError, ParseError, ProtocolError

CATEGORY_NAMES = (
    "manhole_cover",
    "non_directional_crack",
    "pine_cone",
    "pothole",
    "tree_branch",
    "truncated_dome",
)
CATEGORY_IDS = {name: i for i, name in enumerate(CATEGORY_NAMES)}

DEFAULT_CONF_THRESH = 0.25
DEFAULT_NMS_IOU = 0.45


def category_name(category_id: int) -> str:
    if not 0 <= category_id < len(CATEGORY_NAMES):
        raise CategoryError(f"category id {category_id} outside 0..{len(CATEGORY_NAMES) - 1}")
    return CATEGORY_NAMES[category_id]


def category_id(name: str) -> int:
    try:
        return CATEGORY_IDS[name]
    except KeyError:
        raise CategoryError(f"unknown category name {name!r}") from None


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, corner convention, continuous pixel coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def iou(self, other: "BBox") -> float:
        ix = min(self.x2, other.x2) - max(self.x1, other.x1)
        iy = min(self.y2, other.y2) - max(self.y1, other.y1)
        if ix <= 0.0 or iy <= 0.0:
            return 0.0
        inter = ix * iy
        return inter / (self.area + other.area - inter)

    def scaled(self, sx: float, sy: float) -> "BBox":
        return BBox(self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)

    def clamped(self, width: float, height: float) -> Optional["BBox"]:
        """Clamp to [0, width] x [0, height]; None if nothing remains."""
        x1 = min(max(self.x1, 0.0), width)
        y1 = min(max(self.y1, 0.0), height)
        x2 = min(max(self.x2, 0.0), width)
        y2 = min(max(self.y2, 0.0), height)
        if x1 >= x2 or y1 >= y2:
            return None
        return BBox(x1, y1, x2, y2)


@dataclass(frozen=True)
class Detection:
    """One detected obstacle in frame coordinates."""

    bbox: BBox
    category: int
    confidence: float
    frame_id: Optional[int] = None

    def __post_init__(self):
        category_name(self.category)
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


RawCandidate = tuple  # (bbox-or-corner-tuple, category_id, confidence)


def _as_bbox(candidate) -> BBox:
    if isinstance(candidate, BBox):
        return candidate
    return BBox(*candidate)


def nms(boxes: Sequence[BBox], confidences: Sequence[float], iou_thresh: float) -> list[int]:
    """Greedy NMS over one category; returns kept indices in descending-confidence order.

    A box is suppressed when its IoU with an already-kept box exceeds
    iou_thresh. Confidence ties keep input order.
    """
    order = sorted(range(len(boxes)), key=lambda i: -confidences[i])
    kept: list[int] = []
    for i in order:
        if all(boxes[i].iou(boxes[j]) <= iou_thresh for j in kept):
            kept.append(i)
    return kept


def postprocess(
    raw: Iterable[RawCandidate],
    conf_thresh: float = DEFAULT_CONF_THRESH,
    nms_iou: float = DEFAULT_NMS_IOU,
    model_size: tuple[int, int] = (640, 480),
    frame_size: tuple[int, int] = (640, 480),
    frame_id: Optional[int] = None,
) -> list[Detection]:
    """Confidence filter + per-category NMS + rescale to frame coordinates.

    Output is sorted by descending confidence; boxes that fall entirely
    outside the frame after rescaling are dropped.
    """
    if not 0.0 <= conf_thresh <= 1.0:
        raise ConfigError(f"conf_thresh {conf_thresh} outside [0, 1]")
    if not 0.0 <= nms_iou <= 1.0:
        raise ConfigError(f"nms_iou {nms_iou} outside [0, 1]")

    candidates = [(_as_bbox(b), c, conf) for b, c, conf in raw if conf >= conf_thresh]
    for _, cat, _ in candidates:
        category_name(cat)

    survivors: list[tuple[BBox, int, float]] = []
    for cat in sorted({c for _, c, _ in candidates}):
        members = [cand for cand in candidates if cand[1] == cat]
        kept = nms([m[0] for m in members], [m[2] for m in members], nms_iou)
        survivors.extend(members[i] for i in kept)

    sx = frame_size[0] / model_size[0]
    sy = frame_size[1] / model_size[1]
    out: list[Detection] = []
    for bbox, cat, conf in survivors:
        clamped = bbox.scaled(sx, sy).clamped(frame_size[0], frame_size[1])
        if clamped is not None:
            out.append(Detection(bbox=clamped, category=cat, confidence=conf, frame_id=frame_id))
    out.sort(key=lambda d: -d.confidence)
    return out


def parse_record(line: str, path=None, line_no: Optional[int] = None) -> Detection:
    """Parse one replay-grammar record into a Detection."""
    parts = line.split()
    if len(parts) != 7:
        raise ParseError(f"expected 7 fields, got {len(parts)}: {line!r}", path, line_no)
    try:
        frame_id = int(parts[0])
        cat = int(parts[1])
        conf = float(parts[2])
        coords = [float(p) for p in parts[3:7]]
    except ValueError as exc:
        raise ParseError(f"bad field in record: {exc}", path, line_no) from None
    try:
        return Detection(bbox=BBox(*coords), category=cat, confidence=conf, frame_id=frame_id)
    except (ValueError, CategoryError) as exc:
        raise ParseError(f"invalid record: {exc}", path, line_no) from None


def format_record(det: Detection) -> str:
    b = det.bbox
    return (
        f"{det.frame_id} {det.category} {det.confidence:g} "
        f"{b.x1:g} {b.y1:g} {b.x2:g} {b.y2:g}"
    )


class DetectionSource:
    """Per-frame detection provider. Single consumer, frame ids non-decreasing."""

    def next_detections(self, frame_id: int) -> list[Detection]:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class ReplayDetectionSource(DetectionSource):
    """Replays a recorded detection file; returns exactly the recorded set."""

    def __init__(self, path):
        self.path = path
        self._by_frame: dict[int, list[Detection]] = {}
        self._max_frame = -1
        self._last_requested: Optional[int] = None
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                det = parse_record(stripped, path=path, line_no=line_no)
                self._by_frame.setdefault(det.frame_id, []).append(det)
                self._max_frame = max(self._max_frame, det.frame_id)

    def next_detections(self, frame_id: int) -> list[Detection]:
        if self._last_requested is not None and frame_id < self._last_requested:
            raise ProtocolError(f"frame {frame_id} requested after frame {self._last_requested}")
        self._last_requested = frame_id
        if frame_id > self._max_frame:
            raise EndOfStreamError(f"frame {frame_id} beyond recording (last is {self._max_frame})")
        return list(self._by_frame.get(frame_id, ()))

    def all_detections(self) -> list[Detection]:
        """Every recorded detection in frame order (for offline evaluation)."""
        return [det for frame in sorted(self._by_frame) for det in self._by_frame[frame]]


class StreamDetectionSource(DetectionSource):
    """Reads '#frame <id>'-delimited blocks of records from a text stream."""

    def __init__(self, stream: IO[str], name: str = "<stream>"):
        self._stream = stream
        self._name = name
        self._line_no = 0
        self._blocks: list[tuple[int, list[Detection]]] = []
        self._current: Optional[tuple[int, list[Detection]]] = None
        self._eof = False
        self._last_requested: Optional[int] = None

    def _read_line(self) -> Optional[str]:
        line = self._stream.readline()
        if line == "":
            return None
        self._line_no += 1
        return line

    def _pull(self) -> bool:
        """Read stream lines until one more block completes. False at EOF."""
        while True:
            line = self._read_line()
            if line is None:
                self._eof = True
                if self._current is not None:
                    self._blocks.append(self._current)
                    self._current = None
                return False
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#frame"):
                parts = stripped.split()
                if len(parts) != 2:
                    raise ParseError(f"bad frame marker: {stripped!r}", self._name, self._line_no)
                try:
                    block_id = int(parts[1])
                except ValueError:
                    raise ParseError(f"bad frame marker: {stripped!r}", self._name, self._line_no) from None
                done = self._current
                if done is not None and block_id <= done[0]:
                    raise ProtocolError(f"frame markers not increasing: {done[0]} then {block_id}")
                self._current = (block_id, [])
                if done is not None:
                    self._blocks.append(done)
                    return True
                continue
            if stripped.startswith("#"):
                continue
            if self._current is None:
                raise ProtocolError(f"record before any #frame marker: {stripped!r}")
            det = parse_record(stripped, path=self._name, line_no=self._line_no)
            if det.frame_id != self._current[0]:
                raise ProtocolError(
                    f"record frame {det.frame_id} inside #frame {self._current[0]} block"
                )
            self._current[1].append(det)

    def next_detections(self, frame_id: int) -> list[Detection]:
        if self._last_requested is not None and frame_id < self._last_requested:
            raise ProtocolError(f"frame {frame_id} requested after frame {self._last_requested}")
        self._last_requested = frame_id
        while True:
            while self._blocks and self._blocks[0][0] < frame_id:
                self._blocks.pop(0)
            if self._blocks and self._blocks[0][0] == frame_id:
                return list(self._blocks[0][1])
            if self._blocks and self._blocks[0][0] > frame_id:
                return []
            if self._eof:
                raise EndOfStreamError(f"stream ended before frame {frame_id}")
            self._pull()

    def close(self) -> None:
        try:
            self._stream.close()
        except Exception:
            pass


class ProcessDetectionSource(StreamDetectionSource):
    """Spawns a producer process and consumes the stream grammar from its stdout."""

    def __init__(self, command):
        if isinstance(command, str):
            command = shlex.split(command)
        self._proc = subprocess.Popen(
            command, stdout=subprocess.PIPE, text=True, bufsize=1
        )
        super().__init__(self._proc.stdout, name=f"<{command[0]}>")

    def close(self) -> None:
        super().close()
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


def shift_frame(det: Detection, frame_id: int) -> Detection:
    """Copy of det attributed to a different frame."""
    return replace(det, frame_id=frame_id)
