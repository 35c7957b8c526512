"""Report assembly and external rendering.

MetricsReport carries every score family; fields left as None are
serialized as the explicit string "unavailable" so a missing metric is
always visible in the output, never silently absent.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from ..errors import RenderCommandError

_SCORE_RANGES = {
    "tree_bleu": (0.0, 1.0),
    "reuse_rate": (0.0, 1.0),
    "repetitive_ratio": (0.0, 100.0),
}


@dataclass
class MetricsReport:
    tree_bleu: Optional[float] = None
    reuse_rate: Optional[float] = None
    repetitive_ratio: Optional[float] = None
    segmentation: Optional[dict] = None
    clustering: Optional[dict] = None
    low_level: Optional[dict] = None
    high_level: Optional[dict] = None
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name, (lo, hi) in _SCORE_RANGES.items():
            value = getattr(self, name)
            if value is not None and not lo <= value <= hi:
                raise ValueError(f"{name}={value} outside [{lo}, {hi}]")

    def to_dict(self) -> dict:
        def fill(value):
            return "unavailable" if value is None else value

        return {
            "tree_bleu": fill(self.tree_bleu),
            "reuse_rate": fill(self.reuse_rate),
            "repetitive_ratio": fill(self.repetitive_ratio),
            "segmentation": fill(self.segmentation),
            "clustering": fill(self.clustering),
            "low_level": fill(self.low_level),
            "high_level": fill(self.high_level),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_markdown(self) -> str:
        lines = ["# Evaluation report", ""]

        def row(name, value):
            if value is None:
                return f"| {name} | unavailable |"
            if isinstance(value, float):
                return f"| {name} | {value:.4f} |"
            return f"| {name} | {value} |"

        lines += ["| metric | value |", "| --- | --- |"]
        lines.append(row("tree_bleu", self.tree_bleu))
        lines.append(row("reuse_rate", self.reuse_rate))
        lines.append(row("repetitive_ratio (%)", self.repetitive_ratio))
        for section in ("segmentation", "clustering", "low_level", "high_level"):
            values = getattr(self, section)
            if values is None:
                lines.append(row(section, None))
                continue
            for key in sorted(values):
                value = values[key]
                if isinstance(value, float):
                    lines.append(row(f"{section}.{key}", value))
                else:
                    lines.append(row(f"{section}.{key}", value))
        if self.metadata:
            lines += ["", "## Settings", ""]
            for key in sorted(self.metadata):
                lines.append(f"- {key}: {self.metadata[key]}")
        lines.append("")
        return "\n".join(lines)


def _render_one(path: str, render_cmd: str, out_dir: Path, tag: int) -> np.ndarray:
    # tag keeps outputs distinct even when two inputs share a stem
    out_path = out_dir / f"{tag:03d}_{Path(path).stem}.png"
    args = [
        token.format(input=str(path), output=str(out_path))
        for token in shlex.split(render_cmd)
    ]
    try:
        proc = subprocess.run(args, capture_output=True, timeout=120)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise RenderCommandError(f"render command failed to run: {exc}") from exc
    if proc.returncode != 0:
        tail = proc.stderr.decode("utf-8", "replace")[-400:]
        raise RenderCommandError(
            f"render command exited {proc.returncode} for {path}: {tail}"
        )
    if not out_path.exists() or out_path.stat().st_size == 0:
        raise RenderCommandError(f"render command produced no output for {path}")
    try:
        with Image.open(out_path) as img:
            return np.array(img.convert("RGB"))
    except Exception as exc:
        raise RenderCommandError(f"render output for {path} is not an image: {exc}")


def render_pages(
    code_paths: Sequence[str],
    render_cmd: str,
    parallel_safe: bool = False,
) -> dict[str, np.ndarray]:
    """Shell out to an external renderer per page.

    render_cmd is a command template with {input} and {output} slots.
    Commands run one at a time unless declared parallel safe.
    """
    with tempfile.TemporaryDirectory(prefix="comui-render-") as tmp:
        out_dir = Path(tmp)
        jobs = list(enumerate(code_paths))
        if parallel_safe and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=4) as pool:
                shots = list(
                    pool.map(
                        lambda job: _render_one(job[1], render_cmd, out_dir, job[0]),
                        jobs,
                    )
                )
        else:
            shots = [_render_one(p, render_cmd, out_dir, i) for i, p in jobs]
    return {str(p): s for p, s in zip(code_paths, shots)}
