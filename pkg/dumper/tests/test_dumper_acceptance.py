"""Acceptance for the dumper: replay files round-trip into the pipeline."""

import functools

import pytest

from scootsense_dumper.dump import DumpJob, dump_detections

scootsense_detections = pytest.importorskip("scootsense.detections")


def criterion(number, description):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE [{number:>2}] FAIL  {description}", flush=True)
                raise
            print(f"ACCEPTANCE [{number:>2}] PASS  {description}", flush=True)

        return wrapper

    return decorate


@criterion(11, "dumped replay files: zero parse errors in the pipeline, byte-identical reruns")
def test_dump_round_trip(checkpoint, image_dir, categories_file, tmp_path):
    contents = []
    for name in ("first.txt", "second.txt"):
        out = tmp_path / name
        summary = dump_detections(
            DumpJob(
                checkpoint=checkpoint,
                out_path=out,
                images_dir=image_dir,
                categories_path=categories_file,
            )
        )
        source = scootsense_detections.ReplayDetectionSource(out)
        assert len(source.all_detections()) == summary.detections
        assert summary.detections > 0
        contents.append(out.read_bytes())
    assert contents[0] == contents[1]
