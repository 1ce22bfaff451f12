"""Distance-threshold warnings with debounce and hysteresis.

A category enters WARNING once one of its detections has been at or inside
the threshold distance for min_consecutive consecutive frames; it leaves
WARNING only when every distance of that category exceeds
threshold + clear_margin, or the category disappears from the frame.

There is no object tracking, so alert state is kept per category: the
finest identity that is stable across frames. Warning events are emitted
only for frames where some detection actually satisfies the threshold rule
(an event never reports a distance above the threshold); in the hysteresis
band the category merely stays armed so warnings resume without re-counting.

With clear_margin = 0 and min_consecutive = 1 the whole mechanism reduces
to the stateless predicate `distance <= threshold`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .detections import category_name
from .errors import ConfigError
from .fusion import FusedDetection

DEFAULT_THRESHOLD_M = 4.0


@dataclass(frozen=True)
class AlertConfig:
    threshold_m: float = DEFAULT_THRESHOLD_M
    clear_margin_m: float = 0.5
    min_consecutive: int = 1

    def __post_init__(self):
        if not self.threshold_m > 0.0:
            raise ConfigError(f"threshold_m must be > 0, got {self.threshold_m}")
        if self.clear_margin_m < 0.0:
            raise ConfigError(f"clear_margin_m must be >= 0, got {self.clear_margin_m}")
        if self.min_consecutive < 1:
            raise ConfigError(f"min_consecutive must be >= 1, got {self.min_consecutive}")


@dataclass(frozen=True)
class WarningEvent:
    frame_id: Optional[int]
    category: int
    distance_m: float
    message: str


@dataclass
class CategoryAlertState:
    streak: int = 0
    active: bool = False


@dataclass
class AlertState:
    """Per-category warning state for one stream. Single writer."""

    categories: dict[int, CategoryAlertState] = field(default_factory=dict)

    def for_category(self, category: int) -> CategoryAlertState:
        state = self.categories.get(category)
        if state is None:
            state = CategoryAlertState()
            self.categories[category] = state
        return state


def _warning_message(category: int, distance_m: float) -> str:
    return f"WARNING: {category_name(category)} {distance_m:.1f} m ahead"


def assess(
    fused: Sequence[FusedDetection],
    cfg: AlertConfig,
    state: Optional[AlertState] = None,
    frame_id: Optional[int] = None,
) -> tuple[list[WarningEvent], AlertState]:
    """Apply the warning rule to one frame of fused detections.

    Returns at most one event per warned category, ordered by category id.
    Detections without a distance never warn. The state argument is
    mutated and returned (pass None for a fresh stream).
    """
    if state is None:
        state = AlertState()

    distances: dict[int, list[float]] = {}
    for fd in fused:
        if fd.distance_m is None:
            continue
        distances.setdefault(fd.detection.category, []).append(fd.distance_m)
        if frame_id is None:
            frame_id = fd.detection.frame_id

    # Categories absent from this frame lose their warning and streak.
    for cat, cat_state in state.categories.items():
        if cat not in distances:
            cat_state.active = False
            cat_state.streak = 0

    events: list[WarningEvent] = []
    for cat in sorted(distances):
        cat_state = state.for_category(cat)
        d_min = min(distances[cat])
        within = d_min <= cfg.threshold_m
        if within:
            cat_state.streak += 1
            if cat_state.streak >= cfg.min_consecutive:
                cat_state.active = True
        elif cat_state.active:
            if all(d > cfg.threshold_m + cfg.clear_margin_m for d in distances[cat]):
                cat_state.active = False
                cat_state.streak = 0
            # else: hysteresis band, stay armed but emit nothing
        else:
            cat_state.streak = 0
        if cat_state.active and within:
            events.append(
                WarningEvent(
                    frame_id=frame_id,
                    category=cat,
                    distance_m=d_min,
                    message=_warning_message(cat, d_min),
                )
            )
    return events, state


def format_event(event: WarningEvent) -> str:
    """Line format for event logs: frame_id category_id distance_m."""
    return f"{event.frame_id} {event.category} {event.distance_m:g}"
