"""Cross-package contract: dumper output feeds the pipeline without friction.

The pipeline package is imported here (tests only) to prove the file-level
interface; the dumper's runtime code never touches it.
"""

import json

import pytest

from scootsense_dumper.convert import convert_label_studio_export
from scootsense_dumper.dump import DumpJob, dump_detections

scootsense_cli = pytest.importorskip("scootsense.cli")
scootsense_detections = pytest.importorskip("scootsense.detections")


def run_dump(checkpoint, image_dir, categories_file, out):
    return dump_detections(
        DumpJob(
            checkpoint=checkpoint,
            out_path=out,
            images_dir=image_dir,
            categories_path=categories_file,
        )
    )


class TestReplayRoundTrip:
    def test_parsed_with_zero_errors(self, checkpoint, image_dir, categories_file, tmp_path):
        out = tmp_path / "replay.txt"
        summary = run_dump(checkpoint, image_dir, categories_file, out)
        source = scootsense_detections.ReplayDetectionSource(out)  # raises on any parse error
        assert len(source.all_detections()) == summary.detections
        for frame_id in range(3):
            for det in source.next_detections(frame_id):
                assert 0 <= det.category <= 5
                assert 0.0 <= det.confidence <= 1.0

    def test_replay_manifest_dump_feeds_pipeline(self, checkpoint, replay_clip, categories_file, tmp_path):
        replay_file = tmp_path / "dumped.txt"
        job = DumpJob(
            checkpoint=checkpoint,
            out_path=replay_file,
            manifest=replay_clip / "manifest.txt",
            categories_path=categories_file,
        )
        dump_detections(job)
        code = scootsense_cli.main(
            [
                "replay",
                "--manifest",
                str(replay_clip / "manifest.txt"),
                "--detections",
                str(replay_file),
                "--out",
                str(tmp_path / "run"),
                "--seed",
                "3",
            ]
        )
        assert code == 0
        assert (tmp_path / "run" / "fused.txt").exists()

    def test_eval_over_dumped_detections(self, checkpoint, image_dir, categories_file, tmp_path):
        # annotations via the converter, predictions via the dumper,
        # scored end-to-end by the pipeline's eval with zero format errors
        export = [
            {
                "data": {"image": f"{i}.png"},
                "annotations": [
                    {
                        "result": [
                            {
                                "type": "rectanglelabels",
                                "original_width": 640,
                                "original_height": 480,
                                "value": {
                                    "x": 40.0,
                                    "y": 40.0,
                                    "width": 20.0,
                                    "height": 20.0,
                                    "rectanglelabels": ["pothole"],
                                },
                            }
                        ]
                    }
                ],
            }
            for i in range(3)
        ]
        export_path = tmp_path / "export.json"
        export_path.write_text(json.dumps(export))
        gt_dir = tmp_path / "ann"
        convert_label_studio_export(export_path, gt_dir, ("manhole_cover", "non_directional_crack", "pine_cone", "pothole", "tree_branch", "truncated_dome"))

        replay_file = tmp_path / "replay.txt"
        run_dump(checkpoint, image_dir, categories_file, replay_file)
        code = scootsense_cli.main(
            ["eval", "--pred", str(replay_file), "--gt", str(gt_dir)]
        )
        assert code == 0
