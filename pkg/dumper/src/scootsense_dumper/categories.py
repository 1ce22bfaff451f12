"""Category-name-to-id map, read from the text file shared with the pipeline.

The file is the single source of truth across the package boundary: lines of
`id name`, ids contiguous from 0.
"""

from __future__ import annotations

from pathlib import Path

DEFAULT_CATEGORIES = (
    "manhole_cover",
    "non_directional_crack",
    "pine_cone",
    "pothole",
    "tree_branch",
    "truncated_dome",
)


class CategoryMapError(ValueError):
    pass


def load_category_map(path) -> tuple[str, ...]:
    entries: dict[int, str] = {}
    path = Path(path)
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise CategoryMapError(f"{path}:{line_no}: expected `id name`, got {stripped!r}")
        try:
            cat = int(parts[0])
        except ValueError:
            raise CategoryMapError(f"{path}:{line_no}: bad id {parts[0]!r}") from None
        if cat in entries:
            raise CategoryMapError(f"{path}:{line_no}: duplicate id {cat}")
        entries[cat] = parts[1]
    names = tuple(entries.get(i) for i in range(len(entries)))
    if not names or any(n is None for n in names):
        raise CategoryMapError(f"{path}: ids are not contiguous from 0")
    return names
