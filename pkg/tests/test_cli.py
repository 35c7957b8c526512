"""CLI stages end to end on a tiny synthetic project.

The model is replaced by a scripted stand-in that computes replies from
the prompt text alone, so every stage runs offline and deterministically.
"""

import json
import re

import pytest
from PIL import Image, ImageDraw

from comui import cli
from comui.client import image_hash, png_bytes, request_key
from comui.project import ProjectLayout

PAGE_W, PAGE_H = 200, 150

# elements shared by both pages; texts differ per page
NAV_TEXT = {"p1": "Home", "p2": "Docs"}
TITLE_TEXT = {"p1": "Alpha", "p2": "Beta"}


def element_entries(pid):
    return [
        {"id": "e0", "x": 8, "y": 8, "w": 60, "h": 18, "class": "Text",
         "text": NAV_TEXT[pid]},
        {"id": "e1", "x": 170, "y": 8, "w": 20, "h": 18, "class": "Icon"},
        {"id": "e2", "x": 20, "y": 56, "w": 100, "h": 20, "class": "Text",
         "text": TITLE_TEXT[pid]},
        {"id": "e3", "x": 20, "y": 84, "w": 140, "h": 40, "class": "Text",
         "text": "Lorem ipsum"},
    ]


def paint_screenshot(path):
    img = Image.new("RGB", (PAGE_W, PAGE_H), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    draw.rectangle([8, 8, 67, 25], fill=(51, 85, 204))
    draw.rectangle([170, 8, 189, 25], fill=(204, 136, 51))
    draw.rectangle([20, 56, 119, 75], fill=(34, 34, 34))
    draw.rectangle([20, 84, 159, 123], fill=(221, 221, 221))
    img.save(path)


def make_project(root, page_ids=("p1", "p2"), with_elements=True):
    layout = ProjectLayout(root)
    for pid in page_ids:
        layout.page_dir(pid).mkdir(parents=True)
        paint_screenshot(layout.screenshot_path(pid))
        if with_elements:
            layout.elements_path(pid).write_text(
                json.dumps({"page": {"width": PAGE_W, "height": PAGE_H},
                            "elements": element_entries(pid)}),
                encoding="utf-8",
            )
    return layout


PROPOSAL_REPLY = json.dumps(
    [
        {"bbox": [0, 0, 200, 40], "label": "nav"},
        {"bbox": [10, 48, 180, 92], "label": "card"},
    ]
)

_TEMPLATE_ID_RE = re.compile(r"^- (\S+): .+ at left=", re.M)
_GEOMETRY_RE = re.compile(r"^- (\S+): left=(\d+), top=(\d+), width=(\d+), height=(\d+)$", re.M)
_FEEDBACK_CODE_RE = re.compile(
    r"Current code of the block:\n(.*)\n\nRefinement instructions:", re.S
)


def scripted_reply(prompt: str) -> str:
    if "Identify the semantically coherent UI blocks" in prompt:
        return f"```json\n{PROPOSAL_REPLY}\n```"
    if "masked with a solid gray rectangle" in prompt:
        ids = _TEMPLATE_ID_RE.findall(prompt)
        markers = "\n".join(f"  <!--COMUI:BLOCK id={i}-->" for i in ids)
        return (
            "```html\n"
            f'<html><body style="width:{PAGE_W}px;height:{PAGE_H}px;'
            'background-color:#f6f6f6">\n'
            f"{markers}\n"
            "</body></html>\n"
            "```"
        )
    if "cropped screenshots of visually similar UI blocks" in prompt:
        geoms = _GEOMETRY_RE.findall(prompt)
        name = "C" + re.sub(r"[^0-9A-Za-z]", "", geoms[0][0])
        parts = [
            f'<component name="{name}">',
            '<div class="cmp">',
            '  <span class="cmp-label">Item</span>',
            "</div>",
            "</component>",
        ]
        for gid, x, y, w, h in geoms:
            parts.append(f'<snippet component="{name}">')
            parts.append(
                f'<div class="cmp" style="position:absolute;left:{x}px;top:{y}px;'
                f'width:{w}px;height:{h}px;background-color:#dde4ff">Item</div>'
            )
            parts.append("</snippet>")
        return "\n".join(parts)
    if "fixing one UI block" in prompt:
        matched = _FEEDBACK_CODE_RE.search(prompt)
        assert matched, "feedback prompt lost its code section"
        return f"```html\n{matched.group(1)}\n```"
    raise AssertionError(f"unrouted prompt: {prompt[:80]!r}")


class ScriptedClient:
    def __init__(self):
        self.prompts = []

    def key_for(self, prompt, images=()):
        return request_key(prompt, [image_hash(png_bytes(im)) for im in images])

    def call(self, prompt, images=()):
        self.prompts.append(prompt)
        return scripted_reply(prompt)


@pytest.fixture
def scripted(monkeypatch):
    clients = []

    def fake_make_client(cfg, layout):
        tracker = cli.TrackingClient(ScriptedClient())
        clients.append(tracker)
        return tracker

    monkeypatch.setattr(cli, "make_client", fake_make_client)
    return clients


def run(args):
    return cli.main([str(a) for a in args])


class TestSegment:
    def test_writes_blocks_and_manifest(self, tmp_path, scripted):
        layout = make_project(tmp_path)
        assert run(["segment", tmp_path]) == 0
        for pid in ("p1", "p2"):
            blocks = json.loads(layout.blocks_path(pid).read_text(encoding="utf-8"))
            ids = [b["id"] for b in blocks["blocks"]]
            assert ids == [f"{pid}.b0", f"{pid}.b1"]
        manifest = json.loads(layout.manifest_path.read_text(encoding="utf-8"))
        event = manifest["events"][0]
        assert event["stage"] == "segment"
        assert "pages/p1/blocks.json" in event["outputs"]
        assert len(event["fixtures"]) == 2

    def test_refined_boxes_snap_to_element_unions(self, tmp_path, scripted):
        layout = make_project(tmp_path, page_ids=("p1",))
        assert run(["segment", tmp_path]) == 0
        blocks = json.loads(layout.blocks_path("p1").read_text(encoding="utf-8"))["blocks"]
        nav, card = blocks
        assert (nav["x"], nav["y"], nav["w"], nav["h"]) == (8, 8, 182, 18)
        assert (card["x"], card["y"], card["w"], card["h"]) == (20, 56, 140, 68)

    def test_missing_elements_without_flag_exits_2(self, tmp_path, scripted, capsys):
        make_project(tmp_path, with_elements=False)
        assert run(["segment", tmp_path]) == 2
        assert "elements.json" in capsys.readouterr().err

    def test_fallback_detect_runs_without_elements(self, tmp_path, scripted):
        layout = make_project(tmp_path, page_ids=("p1",), with_elements=False)
        assert run(["segment", tmp_path, "--fallback-detect"]) == 0
        assert layout.blocks_path("p1").exists()
        # detected elements stay ephemeral
        assert not layout.elements_path("p1").exists()

    def test_dimension_mismatch_exits_2(self, tmp_path, scripted, capsys):
        layout = make_project(tmp_path, page_ids=("p1",))
        payload = json.loads(layout.elements_path("p1").read_text(encoding="utf-8"))
        payload["page"] = {"width": 195, "height": 140}
        layout.elements_path("p1").write_text(json.dumps(payload), encoding="utf-8")
        assert run(["segment", tmp_path]) == 2
        assert "screenshot" in capsys.readouterr().err

    def test_missing_project_dir_exits_2(self, tmp_path, scripted, capsys):
        assert run(["segment", tmp_path / "absent"]) == 2
        assert "does not exist" in capsys.readouterr().err

    def test_rerun_is_byte_identical_and_appends_event(self, tmp_path, scripted):
        layout = make_project(tmp_path)
        assert run(["segment", tmp_path]) == 0
        first = layout.blocks_path("p1").read_bytes()
        assert run(["segment", tmp_path]) == 0
        assert layout.blocks_path("p1").read_bytes() == first
        manifest = json.loads(layout.manifest_path.read_text(encoding="utf-8"))
        assert [e["stage"] for e in manifest["events"]] == ["segment", "segment"]

    def test_replay_miss_without_fixtures_exits_3_with_key(self, tmp_path, capsys):
        make_project(tmp_path, page_ids=("p1",))
        assert run(["segment", tmp_path, "--replay"]) == 3
        err = capsys.readouterr().err
        assert "replay fixture miss" in err
        assert re.search(r"[0-9a-f]{64}", err)


class TestStageOrder:
    def test_merge_before_segment_exits_2(self, tmp_path, scripted, capsys):
        make_project(tmp_path)
        assert run(["merge", tmp_path]) == 2
        assert "stage order" in capsys.readouterr().err

    def test_generate_before_merge_exits_2(self, tmp_path, scripted, capsys):
        make_project(tmp_path)
        assert run(["segment", tmp_path]) == 0
        assert run(["generate", tmp_path]) == 2
        assert "stage order" in capsys.readouterr().err


class TestMerge:
    def test_groups_pair_blocks_across_pages(self, tmp_path, scripted):
        layout = make_project(tmp_path)
        assert run(["segment", tmp_path]) == 0
        assert run(["merge", tmp_path]) == 0
        groups = json.loads(layout.groups_path.read_text(encoding="utf-8"))["groups"]
        members = sorted(tuple(sorted(g["members"])) for g in groups)
        assert members == [("p1.b0", "p2.b0"), ("p1.b1", "p2.b1")]


def run_through_generate(tmp_path):
    layout = make_project(tmp_path)
    assert run(["segment", tmp_path]) == 0
    assert run(["merge", tmp_path]) == 0
    assert run(["generate", tmp_path]) == 0
    return layout


class TestGenerate:
    def test_outputs_per_page_and_components(self, tmp_path, scripted):
        layout = run_through_generate(tmp_path)
        comp_files = sorted(p.name for p in layout.components_dir.glob("*.comp.html"))
        assert comp_files == ["Cp1b0.comp.html", "Cp1b1.comp.html"]
        for pid in ("p1", "p2"):
            assert layout.template_path(pid).exists()
            page = layout.generated_page_path(pid).read_text(encoding="utf-8")
            assert "COMUI:BLOCK" not in page
            assert page.count("COMUI:DEF name=") == 2
            snippets = json.loads(layout.snippets_path(pid).read_text(encoding="utf-8"))
            assert [s["block_id"] for s in snippets["snippets"]] == [
                f"{pid}.b0", f"{pid}.b1"
            ]

    def test_rerun_is_byte_identical(self, tmp_path, scripted):
        layout = run_through_generate(tmp_path)
        before = {
            p: p.read_bytes()
            for p in [layout.generated_page_path("p1"), layout.template_path("p1"),
                      layout.component_path("Cp1b0")]
        }
        assert run(["generate", tmp_path]) == 0
        for p, content in before.items():
            assert p.read_bytes() == content


class TestFeedback:
    def test_writes_instructions_and_revised_page(self, tmp_path, scripted):
        layout = run_through_generate(tmp_path)
        assert run(["feedback", tmp_path]) == 0
        for pid in ("p1", "p2"):
            text = layout.instructions_path(pid).read_text(encoding="utf-8")
            assert text.strip(), "scripted snippets mismatch the reference text"
            assert layout.feedback_page_path(pid).exists()
            assert layout.annotated_reference_path(pid).exists()
            assert layout.annotated_generated_path(pid).exists()
            priorities = json.loads(
                (layout.feedback_page_dir(pid) / "priorities.json").read_text(encoding="utf-8")
            )
            assert isinstance(priorities["priorities"], list)

    def test_generated_artifacts_untouched(self, tmp_path, scripted):
        layout = run_through_generate(tmp_path)
        before = layout.generated_page_path("p1").read_bytes()
        assert run(["feedback", tmp_path]) == 0
        assert layout.generated_page_path("p1").read_bytes() == before

    def test_rerun_is_byte_identical(self, tmp_path, scripted):
        layout = run_through_generate(tmp_path)
        assert run(["feedback", tmp_path]) == 0
        before = layout.feedback_page_path("p1").read_bytes()
        before_png = layout.annotated_reference_path("p1").read_bytes()
        assert run(["feedback", tmp_path]) == 0
        assert layout.feedback_page_path("p1").read_bytes() == before
        assert layout.annotated_reference_path("p1").read_bytes() == before_png


class TestEvaluate:
    def test_reports_written_and_valid(self, tmp_path, scripted):
        layout = run_through_generate(tmp_path)
        assert run(["evaluate", tmp_path]) == 0
        for pid in ("p1", "p2"):
            payload = json.loads((layout.reports_dir / f"{pid}.json").read_text(encoding="utf-8"))
            assert payload["reuse_rate"] == 1.0
            assert payload["tree_bleu"] == "unavailable"
            assert 0.0 <= payload["low_level"]["block_match"] <= 1.0
            assert payload["metadata"]["page_id"] == pid
            assert (layout.reports_dir / f"{pid}.md").exists()

    def test_uses_feedback_page_when_present(self, tmp_path, scripted):
        layout = run_through_generate(tmp_path)
        assert run(["feedback", tmp_path]) == 0
        assert run(["evaluate", tmp_path]) == 0
        payload = json.loads((layout.reports_dir / "p1.json").read_text(encoding="utf-8"))
        assert payload["metadata"]["page_path"] == "feedback/p1/page.html"

    def test_render_failure_exits_4(self, tmp_path, scripted, capsys):
        layout = run_through_generate(tmp_path)
        layout.config_path.write_text("render_cmd = false {input} {output}\n", encoding="utf-8")
        # config change starts a fresh manifest, so replay the earlier stages
        assert run(["segment", tmp_path]) == 0
        assert run(["merge", tmp_path]) == 0
        assert run(["generate", tmp_path]) == 0
        assert run(["evaluate", tmp_path]) == 4
        assert "render command" in capsys.readouterr().err


class TestFlags:
    def test_verbose_reports_to_stderr(self, tmp_path, scripted, capsys):
        make_project(tmp_path, page_ids=("p1",))
        assert run(["segment", tmp_path, "--verbose"]) == 0
        err = capsys.readouterr().err
        assert "running segment" in err
        assert "segment complete" in err

    def test_parallel_matches_serial_output(self, tmp_path, scripted):
        serial = make_project(tmp_path / "serial")
        parallel = make_project(tmp_path / "parallel")
        assert run(["segment", tmp_path / "serial"]) == 0
        assert run(["segment", tmp_path / "parallel", "--parallel", 4]) == 0
        for pid in ("p1", "p2"):
            assert (
                serial.blocks_path(pid).read_bytes()
                == parallel.blocks_path(pid).read_bytes()
            )

    def test_config_file_respected(self, tmp_path, scripted, capsys):
        layout = make_project(tmp_path, page_ids=("p1",))
        layout.config_path.write_text("refinement.t_overlap = 0.9\n", encoding="utf-8")
        assert run(["segment", tmp_path]) == 0
        manifest = json.loads(layout.manifest_path.read_text(encoding="utf-8"))
        assert manifest["config"]["refinement.t_overlap"] == 0.9

    def test_seed_flag_accepted(self, tmp_path, scripted):
        make_project(tmp_path, page_ids=("p1",))
        assert run(["segment", tmp_path, "--seed", 7]) == 0
