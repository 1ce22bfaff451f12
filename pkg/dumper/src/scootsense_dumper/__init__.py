"""Bridge between the deep-learning ecosystem and the scootsense pipeline.

Runs a TorchScript detector checkpoint over recorded images and writes
detection replay files in the pipeline's line grammar; optionally converts
Label Studio JSON exports into the normalized-center annotation format.
The pipeline itself is consumed only through those file formats.
"""

from .categories import load_category_map
from .convert import convert_label_studio_export
from .dump import DumpJob, DumpSummary, dump_detections

__version__ = "0.1.0"

__all__ = [
    "DumpJob",
    "DumpSummary",
    "convert_label_studio_export",
    "dump_detections",
    "load_category_map",
]
