#!/usr/bin/env python3
"""Build and record the bundled offline demo project.

The demo is a two-page site (home, pricing) small enough to eyeball.
One description of the content drives everything: the ground-truth HTML,
the screenshots (rendered with the bundled naive renderer, so a faithful
generation reproduces them pixel for pixel), the element detections, and
the scripted model replies.  The pipeline then runs once end to end with
the real client in record mode and a transport that fabricates endpoint
responses, which writes the fixtures.  Afterwards every stage output is
deleted again: the committed project holds only inputs and fixtures, and
all five stages replay from those without any network.

One error is planted on purpose: the generated title of the first home
card reads "Start Plan" instead of "Starter Plan", so the feedback stage
has something real to find and fix.

Run from the repository root:

    python3 scripts/make_demo_project.py
"""

from __future__ import annotations

import json
import os
import re
import shutil
import sys
from pathlib import Path

from PIL import Image

import comui.cli as cli
from comui.client import ClientMode, ModelClient
from comui.naive_renderer import render_html
from comui.project import ProjectLayout

REPO = Path(__file__).resolve().parent.parent
DEMO = REPO / "demo_project"

PAGE_W = 360
CARD_W, CARD_H = 104, 150
CARD_Y = 60

# inner layout of one card, relative to its top-left corner
CARD_FIELDS = {
    "title": (8, 10, 80, 16, "#222222"),
    "desc": (8, 34, 88, 40, "#555555"),
    "price": (8, 90, 60, 16, "#111111"),
}

NAV_ITEMS = [
    ("brand", 12, 10, 60, 20, "Acme", "#ffffff"),
    ("link1", 200, 12, 40, 16, "Home", "#dddddd"),
    ("link2", 250, 12, 40, 16, "Docs", "#dddddd"),
]

FOOTER_TEXT = "(c) Acme 2026"

PAGES = [
    {
        "id": "home",
        "height": 240,
        "cards": [
            {"x": 12, "title": "Starter Plan", "desc": "Great for starters", "price": "$9/mo"},
            {"x": 128, "title": "Growth Plan", "desc": "Room to grow fast", "price": "$29/mo"},
            {"x": 244, "title": "Scale Plan", "desc": "Full scale rollout", "price": "$99/mo"},
        ],
        "footer": False,
    },
    {
        "id": "pricing",
        "height": 260,
        "cards": [
            {"x": 12, "title": "Pro Plan", "desc": "For busy teams", "price": "$49/mo"},
            {"x": 128, "title": "Team Plan", "desc": "Org wide rollout", "price": "$89/mo"},
        ],
        "footer": True,
    },
]

# the one deliberate generation defect the feedback stage must repair
PLANTED_WRONG_TITLE = ("Starter Plan", "Start Plan")


def footer_box(page) -> tuple[int, int, int, int]:
    return (0, page["height"] - 36, PAGE_W, 28)


def abs_div(x, y, w, h, style="", text="") -> str:
    base = f"position:absolute;left:{x}px;top:{y}px;width:{w}px;height:{h}px"
    if style:
        base = f"{base};{style}"
    return f'<div style="{base}">{text}</div>'


def nav_markup(indent="  ") -> list[str]:
    lines = [
        indent
        + abs_div(0, 0, PAGE_W, 40, "background-color:#2c3e50").replace("</div>", "")
    ]
    for _, x, y, w, h, text, color in NAV_ITEMS:
        lines.append(indent + "  " + abs_div(x, y, w, h, f"color:{color}", text))
    lines.append(indent + "</div>")
    return lines


def card_markup(card, title_text, indent="  ") -> list[str]:
    x = card["x"]
    lines = [
        indent
        + abs_div(
            x, CARD_Y, CARD_W, CARD_H,
            "background-color:#ffffff;border:1px solid #cccccc",
        ).replace("</div>", "")
    ]
    values = {"title": title_text, "desc": card["desc"], "price": card["price"]}
    for name, (dx, dy, w, h, color) in CARD_FIELDS.items():
        lines.append(
            indent + "  " + abs_div(x + dx, CARD_Y + dy, w, h, f"color:{color}", values[name])
        )
    lines.append(indent + "</div>")
    return lines


def footer_markup(page, indent="  ") -> list[str]:
    x, y, w, h = footer_box(page)
    return [
        indent + abs_div(x, y, w, h, "background-color:#ecf0f1").replace("</div>", ""),
        indent + "  " + abs_div(12, y + 6, 120, 16, "color:#333333", FOOTER_TEXT),
        indent + "</div>",
    ]


def ground_truth_html(page) -> str:
    lines = [
        f'<html><body style="width:{PAGE_W}px;height:{page["height"]}px;'
        'background-color:#f6f7f9">'
    ]
    lines.extend(nav_markup())
    for card in page["cards"]:
        lines.extend(card_markup(card, card["title"]))
    if page["footer"]:
        lines.extend(footer_markup(page))
    lines.append("</body></html>")
    return "\n".join(lines) + "\n"


def elements_payload(page) -> dict:
    elements = [
        {"id": "n0", "x": 0, "y": 0, "w": PAGE_W, "h": 40, "class": "Container"},
    ]
    for name, x, y, w, h, text, _ in NAV_ITEMS:
        elements.append(
            {"id": f"n-{name}", "x": x, "y": y, "w": w, "h": h, "class": "Text", "text": text}
        )
    for i, card in enumerate(page["cards"]):
        x = card["x"]
        elements.append(
            {"id": f"c{i}", "x": x, "y": CARD_Y, "w": CARD_W, "h": CARD_H,
             "class": "Container"}
        )
        values = {"title": card["title"], "desc": card["desc"], "price": card["price"]}
        for name, (dx, dy, w, h, _) in CARD_FIELDS.items():
            elements.append(
                {"id": f"c{i}-{name}", "x": x + dx, "y": CARD_Y + dy, "w": w, "h": h,
                 "class": "Text", "text": values[name]}
            )
    if page["footer"]:
        fx, fy, fw, fh = footer_box(page)
        elements.append({"id": "f0", "x": fx, "y": fy, "w": fw, "h": fh,
                         "class": "Container"})
        elements.append({"id": "f1", "x": 12, "y": fy + 6, "w": 120, "h": 16,
                         "class": "Text", "text": FOOTER_TEXT})
    return {"page": {"width": PAGE_W, "height": page["height"]}, "elements": elements}


def block_regions(page) -> list[dict]:
    regions = [{"bbox": [0, 0, PAGE_W, 40], "label": "navigation bar"}]
    for card in page["cards"]:
        regions.append({"bbox": [card["x"], CARD_Y, CARD_W, CARD_H], "label": "plan card"})
    if page["footer"]:
        regions.append({"bbox": list(footer_box(page)), "label": "footer"})
    return regions


# -- scripted replies --------------------------------------------------------

COMPONENT_PROTOS = {
    "NavBar": "\n".join(
        [
            '<nav class="topbar">',
            '  <span class="brand">Brand</span>',
            '  <a class="nav-link">Link</a>',
            '  <a class="nav-link">Link</a>',
            "</nav>",
        ]
    ),
    "PlanCard": "\n".join(
        [
            '<div class="plan-card">',
            '  <header class="plan-head">',
            '    <span class="plan-icon"></span>',
            '    <span class="plan-title">Title</span>',
            "  </header>",
            '  <p class="plan-desc">Description text</p>',
            '  <span class="plan-price">$0</span>',
            "</div>",
        ]
    ),
    "PageFooter": "\n".join(
        [
            '<footer class="page-footer">',
            '  <span class="footer-note">Note</span>',
            "</footer>",
        ]
    ),
}

HEIGHT_TO_COMPONENT = {40: "NavBar", CARD_H: "PlanCard", 28: "PageFooter"}


def block_content_map() -> dict[str, dict]:
    """Block id to generation content, with the planted title error."""
    out = {}
    for page in PAGES:
        pid = page["id"]
        out[f"{pid}.b0"] = {"kind": "nav"}
        for i, card in enumerate(page["cards"]):
            title = card["title"]
            if title == PLANTED_WRONG_TITLE[0]:
                title = PLANTED_WRONG_TITLE[1]
            out[f"{pid}.b{i + 1}"] = {"kind": "card", "card": card, "title": title}
        if page["footer"]:
            out[f"{pid}.b{len(page['cards']) + 1}"] = {"kind": "footer", "page": page}
    return out


CONTENT = block_content_map()

_TEMPLATE_ID_RE = re.compile(r"^- (\S+): .+ at left=", re.M)
_GEOMETRY_RE = re.compile(
    r"^- (\S+): left=(\d+), top=(\d+), width=(\d+), height=(\d+)$", re.M
)
_FEEDBACK_CODE_RE = re.compile(
    r"Current code of the block:\n(.*)\n\nRefinement instructions:", re.S
)
_HEIGHT_RE = re.compile(r"(\d+) pixels tall")


def snippet_markup(block_id: str) -> str:
    info = CONTENT[block_id]
    if info["kind"] == "nav":
        return "\n".join(nav_markup(indent="")).replace("\n  ", "\n")
    if info["kind"] == "card":
        card = dict(info["card"])
        return "\n".join(card_markup(card, info["title"], indent=""))
    return "\n".join(footer_markup(info["page"], indent=""))


def scripted_reply(prompt: str) -> str:
    if "Identify the semantically coherent UI blocks" in prompt:
        height = int(_HEIGHT_RE.search(prompt).group(1))
        page = next(p for p in PAGES if p["height"] == height)
        return "```json\n" + json.dumps(block_regions(page)) + "\n```"
    if "masked with a solid gray rectangle" in prompt:
        height = int(_HEIGHT_RE.search(prompt).group(1))
        ids = _TEMPLATE_ID_RE.findall(prompt)
        markers = "\n".join(f"  <!--COMUI:BLOCK id={i}-->" for i in ids)
        return (
            "```html\n"
            f'<html><body style="width:{PAGE_W}px;height:{height}px;'
            'background-color:#f6f7f9">\n'
            f"{markers}\n"
            "</body></html>\n```"
        )
    if "cropped screenshots of visually similar UI blocks" in prompt:
        geoms = _GEOMETRY_RE.findall(prompt)
        name = HEIGHT_TO_COMPONENT[int(geoms[0][4])]
        parts = [f'<component name="{name}">', COMPONENT_PROTOS[name], "</component>"]
        for gid, *_ in geoms:
            parts.append(f'<snippet component="{name}">')
            parts.append(snippet_markup(gid))
            parts.append("</snippet>")
        return "\n".join(parts)
    if "fixing one UI block" in prompt:
        code = _FEEDBACK_CODE_RE.search(prompt).group(1)
        gt_title, wrong_title = PLANTED_WRONG_TITLE
        return "```html\n" + code.replace(f">{wrong_title}<", f">{gt_title}<") + "\n```"
    raise SystemExit(f"unrouted prompt during recording: {prompt[:80]!r}")


def scripted_transport(url, headers, payload, timeout):
    prompt = payload["messages"][0]["content"][0]["text"]
    return {"choices": [{"message": {"content": scripted_reply(prompt)}}]}


# -- build + record ----------------------------------------------------------


def build_inputs(layout: ProjectLayout) -> None:
    for page in PAGES:
        pid = page["id"]
        layout.page_dir(pid).mkdir(parents=True)
        html = ground_truth_html(page)
        Image.fromarray(render_html(html)).save(layout.screenshot_path(pid))
        layout.elements_path(pid).write_text(
            json.dumps(elements_payload(page), indent=2) + "\n", encoding="utf-8"
        )


def record(layout: ProjectLayout) -> None:
    # dummy credential for the recording transport; read only inside the
    # client and never written to any artifact
    os.environ.setdefault("COMUI_API_KEY", "demo-recording-key")

    def recording_make_client(cfg, inner_layout):
        client = ModelClient(
            mode=ClientMode.RECORD,
            fixtures_dir=inner_layout.fixtures_dir,
            transport=scripted_transport,
        )
        return cli.TrackingClient(client)

    original = cli.make_client
    cli.make_client = recording_make_client
    try:
        for stage in ("segment", "merge", "generate", "feedback", "evaluate"):
            rc = cli.main([stage, str(layout.root)])
            if rc != 0:
                raise SystemExit(f"{stage} failed with exit code {rc}")
    finally:
        cli.make_client = original


def check(layout: ProjectLayout) -> None:
    """Sanity-check the recorded run before stripping outputs."""
    instructions = layout.instructions_path("home").read_text(encoding="utf-8")
    if "Starter Plan" not in instructions:
        raise SystemExit("feedback did not flag the planted title error")
    pricing = layout.instructions_path("pricing").read_text(encoding="utf-8")
    if pricing.strip():
        raise SystemExit(f"pricing page should be clean, got: {pricing!r}")
    revised = layout.feedback_page_path("home").read_text(encoding="utf-8")
    if ">Starter Plan<" not in revised:
        raise SystemExit("feedback did not repair the planted title error")
    for pid in ("home", "pricing"):
        report = json.loads(
            (layout.reports_dir / f"{pid}.json").read_text(encoding="utf-8")
        )
        ratio = report["repetitive_ratio"]
        control = report["metadata"]["repetitive_ratio_control"]
        print(f"  {pid}: reuse_rate={report['reuse_rate']:.3f} "
              f"repetitive_ratio={ratio:.1f} control={control:.1f} "
              f"ssim={report['high_level']['ssim']:.3f}")
        if not ratio < control:
            raise SystemExit(f"{pid}: generated ratio {ratio} not below control {control}")
        if report["reuse_rate"] != 0.875:
            raise SystemExit(f"{pid}: expected reuse_rate 0.875, got {report['reuse_rate']}")
        if report["high_level"]["ssim"] < 0.999:
            raise SystemExit(f"{pid}: final page should match the reference exactly")


def strip_outputs(layout: ProjectLayout) -> None:
    for pid in layout.page_ids():
        layout.blocks_path(pid).unlink()
    layout.groups_path.unlink()
    for sub in (layout.generated_dir, layout.feedback_dir, layout.reports_dir):
        shutil.rmtree(sub)
    layout.manifest_path.unlink()


def main() -> int:
    if DEMO.exists():
        shutil.rmtree(DEMO)
    layout = ProjectLayout(DEMO)
    build_inputs(layout)
    print(f"inputs built under {DEMO}")
    record(layout)
    print("recorded fixtures:", len(list(layout.fixtures_dir.glob("*.json"))))
    check(layout)
    strip_outputs(layout)
    print("stage outputs stripped; project is inputs + fixtures only")
    return 0


if __name__ == "__main__":
    sys.exit(main())
