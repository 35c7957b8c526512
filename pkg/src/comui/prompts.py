"""Prompt assets: editable text templates shipped with the package.

Each asset is a plain-text file under comui/prompts/ using $name slots
(string.Template syntax, chosen so literal CSS/HTML braces in the
templates never collide with substitution).  The registry below ties each
asset name to the reply schema the pipeline expects back; parsing and
validation of those replies live in hsbs/ccg/pef, not here.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from string import Template

from .errors import ValidationError

_ASSET_DIR = Path(__file__).parent / "prompts"

# asset name -> tag of the reply schema the caller will enforce
ASSET_SCHEMAS = {
    "propose_blocks": "json-block-array",
    "page_template": "html-with-markers",
    "component_group": "component-snippet-tags",
    "feedback_apply": "full-code-replacement",
}

# Appended verbatim for the single automatic re-ask after a parse failure.
REASK_NOTE = (
    "Your previous reply could not be parsed. "
    "Reply with ONLY the requested output format, with no commentary."
)


@dataclass(frozen=True)
class PromptAsset:
    name: str
    template: str
    schema_tag: str

    def render(self, **slots) -> str:
        """Fill every $slot in the template; unused slots are ignored,
        missing ones are an error."""
        try:
            return Template(self.template).substitute(**slots)
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"prompt asset {self.name!r}: unfilled slot {exc}") from exc


def load_asset(name: str, path: str | Path | None = None) -> PromptAsset:
    """Load a named asset, optionally overridden by a user-supplied file."""
    if name not in ASSET_SCHEMAS:
        raise ValidationError(f"unknown prompt asset {name!r}")
    source = Path(path) if path is not None else _ASSET_DIR / f"{name}.txt"
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read prompt asset {source}: {exc}") from exc
    return PromptAsset(name=name, template=text, schema_tag=ASSET_SCHEMAS[name])
