"""Project layout, stage artifact schemas, and the run manifest.

A project is a directory::

    project/
      comui.toml                  config (optional; defaults apply)
      pages/<page-id>/
        screenshot.png            reference screenshot
        elements.json             detected elements (ingestion contract)
        blocks.json               segment output
      groups.json                 merge output
      generated/
        components/<name>.comp.html
        <page-id>/{template.html, snippets.json, page.html}
      feedback/<page-id>/{instructions.txt, reference_annotated.png,
                          generated_annotated.png, page.html}
      reports/<page-id>.{json,md}
      fixtures/                   recorded model exchanges
      manifest.json               append-only run log

Stage outputs are plain files so runs diff cleanly and stages can be
re-run in isolation.  Every write in this module goes through a
temp-file-and-rename so a crash never leaves a half-written artifact.
The manifest is the stage-ordering authority: a stage checks that its
input stage has a completion event before touching anything.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from . import __version__
from .config import CONFIG_FILENAME, PipelineConfig, snapshot
from .core import BlockKind, BoundingBox, UIBlock
from .errors import StageOrderError, ValidationError
from .vgbm import ComponentGroup, Grouping

STAGES = ("segment", "merge", "generate", "feedback", "evaluate")

# the stage whose outputs each stage consumes
STAGE_INPUT = {
    "merge": "segment",
    "generate": "merge",
    "feedback": "generate",
    "evaluate": "generate",
}


# -- layout ------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectLayout:
    root: Path

    @property
    def pages_dir(self) -> Path:
        return self.root / "pages"

    def page_dir(self, page_id: str) -> Path:
        return self.pages_dir / page_id

    def screenshot_path(self, page_id: str) -> Path:
        return self.page_dir(page_id) / "screenshot.png"

    def elements_path(self, page_id: str) -> Path:
        return self.page_dir(page_id) / "elements.json"

    def blocks_path(self, page_id: str) -> Path:
        return self.page_dir(page_id) / "blocks.json"

    @property
    def groups_path(self) -> Path:
        return self.root / "groups.json"

    @property
    def generated_dir(self) -> Path:
        return self.root / "generated"

    @property
    def components_dir(self) -> Path:
        return self.generated_dir / "components"

    def component_path(self, name: str) -> Path:
        return self.components_dir / f"{name}.comp.html"

    def generated_page_dir(self, page_id: str) -> Path:
        return self.generated_dir / page_id

    def template_path(self, page_id: str) -> Path:
        return self.generated_page_dir(page_id) / "template.html"

    def snippets_path(self, page_id: str) -> Path:
        return self.generated_page_dir(page_id) / "snippets.json"

    def generated_page_path(self, page_id: str) -> Path:
        return self.generated_page_dir(page_id) / "page.html"

    @property
    def feedback_dir(self) -> Path:
        return self.root / "feedback"

    def feedback_page_dir(self, page_id: str) -> Path:
        return self.feedback_dir / page_id

    def instructions_path(self, page_id: str) -> Path:
        return self.feedback_page_dir(page_id) / "instructions.txt"

    def feedback_page_path(self, page_id: str) -> Path:
        return self.feedback_page_dir(page_id) / "page.html"

    def annotated_reference_path(self, page_id: str) -> Path:
        return self.feedback_page_dir(page_id) / "reference_annotated.png"

    def annotated_generated_path(self, page_id: str) -> Path:
        return self.feedback_page_dir(page_id) / "generated_annotated.png"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def fixtures_dir(self) -> Path:
        return self.root / "fixtures"

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    @property
    def config_path(self) -> Path:
        return self.root / CONFIG_FILENAME

    def page_ids(self) -> list[str]:
        if not self.pages_dir.is_dir():
            return []
        return sorted(p.name for p in self.pages_dir.iterdir() if p.is_dir())

    def latest_page_path(self, page_id: str) -> Path:
        """The page the evaluation should look at: feedback output when
        present, otherwise the integrated generation output."""
        revised = self.feedback_page_path(page_id)
        if revised.exists():
            return revised
        return self.generated_page_path(page_id)


# -- atomic writes -----------------------------------------------------------


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path: Path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    atomic_write_text(path, text)


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- stage artifact schemas --------------------------------------------------


def write_blocks(path: Path, blocks: Iterable[UIBlock]) -> None:
    payload = {
        "blocks": [
            {
                "id": b.id,
                "page_id": b.page_id,
                "x": b.bbox.x,
                "y": b.bbox.y,
                "w": b.bbox.w,
                "h": b.bbox.h,
                "label": b.label,
                "kind": b.kind.value,
            }
            for b in blocks
        ]
    }
    atomic_write_json(path, payload)


def read_blocks(path: Path) -> list[UIBlock]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError(f"cannot read blocks file {path}: {err}") from err
    items = payload.get("blocks")
    if not isinstance(items, list):
        raise ValidationError(f"{path}: expected a 'blocks' array")
    out = []
    for item in items:
        try:
            out.append(
                UIBlock(
                    id=str(item["id"]),
                    page_id=str(item["page_id"]),
                    bbox=BoundingBox(int(item["x"]), int(item["y"]), int(item["w"]), int(item["h"])),
                    label=str(item.get("label", "")),
                    kind=BlockKind(item.get("kind", BlockKind.REFINED.value)),
                )
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ValidationError(f"{path}: malformed block entry {item!r}: {err}") from err
    return out


def write_grouping(path: Path, grouping: Grouping) -> None:
    payload = {
        "groups": [
            {
                "group_id": g.group_id,
                "members": list(g.member_block_ids),
                "representative": g.representative_block_id,
            }
            for g in grouping.groups
        ]
    }
    atomic_write_json(path, payload)


def read_grouping(path: Path) -> Grouping:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError(f"cannot read groups file {path}: {err}") from err
    items = payload.get("groups")
    if not isinstance(items, list):
        raise ValidationError(f"{path}: expected a 'groups' array")
    groups = []
    for item in items:
        try:
            groups.append(
                ComponentGroup(
                    group_id=str(item["group_id"]),
                    member_block_ids=tuple(str(m) for m in item["members"]),
                    representative_block_id=str(item["representative"]),
                )
            )
        except (KeyError, TypeError) as err:
            raise ValidationError(f"{path}: malformed group entry {item!r}: {err}") from err
    return Grouping(groups=groups)


def write_snippets(path: Path, snippets: list[dict]) -> None:
    atomic_write_json(path, {"snippets": snippets})


def read_snippets(path: Path) -> list[dict]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError(f"cannot read snippets file {path}: {err}") from err
    items = payload.get("snippets")
    if not isinstance(items, list):
        raise ValidationError(f"{path}: expected a 'snippets' array")
    for item in items:
        for key in ("block_id", "component", "code"):
            if key not in item:
                raise ValidationError(f"{path}: snippet entry missing {key!r}")
    return items


# -- run manifest ------------------------------------------------------------


def compute_run_id(cfg: PipelineConfig, layout: ProjectLayout) -> str:
    """Deterministic run id: hash of the config snapshot and the digests
    of every page input file.  Same inputs and config, same id."""
    h = hashlib.sha256()
    h.update(json.dumps(snapshot(cfg), sort_keys=True).encode("utf-8"))
    for page_id in layout.page_ids():
        for path in (layout.screenshot_path(page_id), layout.elements_path(page_id)):
            if path.exists():
                h.update(path.name.encode("utf-8"))
                h.update(file_digest(path).encode("ascii"))
    return h.hexdigest()[:16]


@dataclass
class RunManifest:
    run_id: str
    config: dict
    tool_version: str
    events: list[dict]

    @classmethod
    def fresh(cls, cfg: PipelineConfig, layout: ProjectLayout) -> "RunManifest":
        return cls(
            run_id=compute_run_id(cfg, layout),
            config=snapshot(cfg),
            tool_version=__version__,
            events=[],
        )

    def stage_completed(self, stage: str) -> bool:
        return any(e.get("stage") == stage for e in self.events)

    def record_stage(
        self,
        stage: str,
        inputs: dict[str, str],
        outputs: dict[str, str],
        fixtures: list[str],
    ) -> None:
        """Append one completion event.  Events are never edited or
        removed; reruns of a stage append a new event."""
        if stage not in STAGES:
            raise ValidationError(f"unknown stage {stage!r}")
        self.events.append(
            {
                "stage": stage,
                "inputs": dict(sorted(inputs.items())),
                "outputs": dict(sorted(outputs.items())),
                "fixtures": sorted(fixtures),
            }
        )

    def to_payload(self) -> dict:
        return {
            "run_id": self.run_id,
            "tool_version": self.tool_version,
            "config": self.config,
            "events": self.events,
        }


def load_manifest(layout: ProjectLayout, cfg: PipelineConfig) -> RunManifest:
    """Load the project manifest, starting fresh when none exists or when
    config/inputs changed (the stored run id no longer matches)."""
    path = layout.manifest_path
    current_id = compute_run_id(cfg, layout)
    if path.exists():
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise ValidationError(f"cannot read manifest {path}: {err}") from err
        if payload.get("run_id") == current_id:
            return RunManifest(
                run_id=current_id,
                config=payload.get("config", {}),
                tool_version=payload.get("tool_version", __version__),
                events=list(payload.get("events", [])),
            )
    return RunManifest.fresh(cfg, layout)


def save_manifest(layout: ProjectLayout, manifest: RunManifest) -> None:
    atomic_write_json(layout.manifest_path, manifest.to_payload())


def require_stage_input(manifest: RunManifest, stage: str) -> None:
    """Fail with a stage order error unless the stage's input stage has a
    completion event in the manifest."""
    needed = STAGE_INPUT.get(stage)
    if needed and not manifest.stage_completed(needed):
        raise StageOrderError(
            f"stage order violated: {stage!r} needs {needed!r} to run first"
        )


def digest_map(root: Path, paths: Iterable[Path]) -> dict[str, str]:
    """Relative-path to sha256 map for manifest bookkeeping."""
    out = {}
    for p in paths:
        if p.exists():
            out[p.relative_to(root).as_posix()] = file_digest(p)
    return out
