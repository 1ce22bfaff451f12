import json

import pytest

from scootsense_dumper.categories import CategoryMapError, load_category_map
from scootsense_dumper.convert import ExportError, convert_label_studio_export


def task(image, rectangles):
    return {
        "id": 1,
        "data": {"image": image},
        "annotations": [
            {
                "result": [
                    {
                        "type": "rectanglelabels",
                        "original_width": 640,
                        "original_height": 480,
                        "value": {
                            "x": rect[0],
                            "y": rect[1],
                            "width": rect[2],
                            "height": rect[3],
                            "rectanglelabels": [rect[4]],
                        },
                    }
                    for rect in rectangles
                ]
            }
        ],
    }


CATEGORIES = (
    "manhole_cover",
    "non_directional_crack",
    "pine_cone",
    "pothole",
    "tree_branch",
    "truncated_dome",
)


class TestConvert:
    def test_percent_to_normalized_center(self, tmp_path):
        export = tmp_path / "export.json"
        export.write_text(json.dumps([task("/data/upload/1/abcd1234-frame_007.png", [(25.0, 50.0, 10.0, 20.0, "pothole")])]))
        written = convert_label_studio_export(export, tmp_path / "ann", CATEGORIES)
        assert written == {"frame_007": 1}
        line = (tmp_path / "ann" / "frame_007.txt").read_text().strip()
        cat, xc, yc, w, h = line.split()
        assert cat == "3"
        assert float(xc) == pytest.approx(0.30)
        assert float(yc) == pytest.approx(0.60)
        assert float(w) == pytest.approx(0.10)
        assert float(h) == pytest.approx(0.20)

    def test_image_without_prefix_kept(self, tmp_path):
        export = tmp_path / "export.json"
        export.write_text(json.dumps([task("frames/42.png", [(0.0, 0.0, 50.0, 50.0, "pine_cone")])]))
        written = convert_label_studio_export(export, tmp_path / "ann", CATEGORIES)
        assert written == {"42": 1}

    def test_empty_annotations_write_empty_file(self, tmp_path):
        export = tmp_path / "export.json"
        export.write_text(json.dumps([task("a.png", [])]))
        written = convert_label_studio_export(export, tmp_path / "ann", CATEGORIES)
        assert written == {"a": 0}
        assert (tmp_path / "ann" / "a.txt").read_text() == ""

    def test_unknown_label_rejected(self, tmp_path):
        export = tmp_path / "export.json"
        export.write_text(json.dumps([task("a.png", [(0, 0, 10, 10, "weeds")])]))
        with pytest.raises(CategoryMapError):
            convert_label_studio_export(export, tmp_path / "ann", CATEGORIES)

    def test_non_list_export_rejected(self, tmp_path):
        export = tmp_path / "export.json"
        export.write_text(json.dumps({"not": "a list"}))
        with pytest.raises(ExportError):
            convert_label_studio_export(export, tmp_path / "ann", CATEGORIES)


class TestCategoryMap:
    def test_loads_shared_file(self, categories_file):
        names = load_category_map(categories_file)
        assert names == CATEGORIES

    def test_gap_rejected(self, tmp_path):
        path = tmp_path / "cats.txt"
        path.write_text("0 a\n2 b\n")
        with pytest.raises(CategoryMapError):
            load_category_map(path)
