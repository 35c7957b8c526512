"""Component-based code generation: mask, template, components, integrate.

The page is generated in two passes.  First every block region is masked
out of the screenshot and the model writes the page chrome with one
placeholder comment per block.  Then each component group gets one model
call that returns a shared component definition plus one instance
snippet per member block.  Integration splices snippet code over the
placeholders and emits every component definition exactly once in a
dedicated region ahead of first use.

Generated code is opaque text here: no DOM validation, no rendering.
Structural scoring happens in the metrics package, keeping this boundary
tolerant of whatever dialect the model emits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .client import ModelClient
from .core import UIBlock
from .errors import (
    MarkerValidationError,
    MissingSnippet,
    OutputParseError,
    ValidationError,
)
from .prompts import REASK_NOTE, PromptAsset
from .vgbm import ComponentGroup
from .visual import to_array

MASK_COLOR = (200, 200, 200)

_MARKER_RE = re.compile(r"<!--COMUI:BLOCK id=([^>\s]+)-->")
DEFS_OPEN = "<!--COMUI:DEFS-->"
DEFS_CLOSE = "<!--/COMUI:DEFS-->"


def marker_for(block_id: str) -> str:
    """The exact placeholder comment the template must carry for a block."""
    return f"<!--COMUI:BLOCK id={block_id}-->"


@dataclass(frozen=True)
class PageTemplate:
    page_id: str
    code: str


@dataclass(frozen=True)
class GeneratedComponent:
    component_name: str
    code: str
    group_id: str


@dataclass(frozen=True)
class GeneratedSnippet:
    component_name: str
    code: str
    block_id: str


# -- masking -----------------------------------------------------------------


def mask_screenshot(screenshot, blocks: Sequence[UIBlock]) -> np.ndarray:
    """Copy of the screenshot with every block rectangle filled solid gray.

    Pixels outside the union of block bboxes are untouched; overlapping
    blocks fill idempotently.
    """
    arr = to_array(screenshot).copy()
    h, w = arr.shape[:2]
    for b in blocks:
        if b.bbox.right > w or b.bbox.bottom > h:
            raise ValidationError(f"block {b.id!r} extends outside the {w}x{h} screenshot")
        arr[b.bbox.y : b.bbox.bottom, b.bbox.x : b.bbox.right] = MASK_COLOR
    return arr


# -- reply helpers -----------------------------------------------------------


def strip_fences(text: str) -> str:
    """If the reply wraps code in fences, keep the longest fenced body."""
    lines = text.split("\n")
    blocks: list[str] = []
    inner: list[str] | None = None
    for line in lines:
        if line.lstrip().startswith("```"):
            if inner is None:
                inner = []
            else:
                blocks.append("\n".join(inner))
                inner = None
            continue
        if inner is not None:
            inner.append(line)
    if blocks:
        return max(blocks, key=len)
    return text


# -- template generation -----------------------------------------------------


def _validate_markers(code: str, block_ids: Sequence[str]) -> None:
    found = _MARKER_RE.findall(code)
    expected = list(block_ids)
    missing = [i for i in expected if found.count(i) == 0]
    duplicated = sorted({i for i in found if found.count(i) > 1})
    unknown = sorted({i for i in found if i not in expected})
    problems = []
    if missing:
        problems.append(f"missing markers for {missing}")
    if duplicated:
        problems.append(f"duplicated markers for {duplicated}")
    if unknown:
        problems.append(f"markers for unknown ids {unknown}")
    if problems:
        raise MarkerValidationError("; ".join(problems))


def generate_template(
    masked,
    blocks: Sequence[UIBlock],
    client: ModelClient,
    prompt: PromptAsset | str,
    page_id: str | None = None,
) -> PageTemplate:
    """Ask the model for the page chrome with one placeholder per block.

    The reply must contain exactly one marker per block id: one automatic
    re-ask on a marker mismatch, then MarkerValidationError.
    """
    arr = to_array(masked)
    page_h, page_w = arr.shape[:2]
    if page_id is None:
        page_id = blocks[0].page_id if blocks else "page"
    block_list = "\n".join(
        f"- {b.id}: {b.label or 'block'} at left={b.bbox.x}, top={b.bbox.y}, "
        f"width={b.bbox.w}, height={b.bbox.h}"
        for b in blocks
    )
    if isinstance(prompt, PromptAsset):
        prompt_text = prompt.render(width=page_w, height=page_h, block_list=block_list)
    else:
        prompt_text = prompt
    ids = [b.id for b in blocks]
    reply = client.call(prompt_text, [arr])
    code = strip_fences(reply).strip()
    try:
        _validate_markers(code, ids)
    except MarkerValidationError:
        retry = client.call(prompt_text + "\n\n" + REASK_NOTE, [arr])
        code = strip_fences(retry).strip()
        _validate_markers(code, ids)
    return PageTemplate(page_id=page_id, code=code)


# -- component generation ----------------------------------------------------


class ParsedComponent(NamedTuple):
    name: str
    code: str


class ParsedSnippet(NamedTuple):
    component: str
    code: str


_GEN_TAG_RE = re.compile(
    r"<component\s+name=[\"']([^\"']*)[\"']\s*>"
    r"|<snippet\s+component=[\"']([^\"']*)[\"']\s*>"
    r"|</component>"
    r"|</snippet>"
)


def parse_generation_output(reply: str) -> tuple[list[ParsedComponent], list[ParsedSnippet]]:
    """Extract <component name=..> and <snippet component=..> regions.

    Inner code comes back verbatim.  Nested or unclosed tags, stray
    closers, snippets referencing undefined components, and duplicate
    component names are all OutputParseError; prose outside the tags is
    discarded.
    """
    components: list[ParsedComponent] = []
    snippets: list[ParsedSnippet] = []
    open_tag: tuple[str, str, int] | None = None  # (kind, attr, content_start)
    for m in _GEN_TAG_RE.finditer(reply):
        comp_name, snip_ref = m.group(1), m.group(2)
        is_open = comp_name is not None or snip_ref is not None
        if is_open:
            kind = "component" if comp_name is not None else "snippet"
            if open_tag is not None:
                raise OutputParseError(
                    f"<{kind}> opened inside <{open_tag[0]}>: nesting is invalid"
                )
            open_tag = (kind, comp_name if comp_name is not None else snip_ref, m.end())
            continue
        kind = "component" if m.group(0) == "</component>" else "snippet"
        if open_tag is None:
            raise OutputParseError(f"stray closing </{kind}> tag")
        if open_tag[0] != kind:
            raise OutputParseError(f"</{kind}> closes an open <{open_tag[0]}>")
        code = reply[open_tag[2] : m.start()]
        if kind == "component":
            components.append(ParsedComponent(open_tag[1], code))
        else:
            snippets.append(ParsedSnippet(open_tag[1], code))
        open_tag = None
    if open_tag is not None:
        raise OutputParseError(f"unclosed <{open_tag[0]}> tag")
    names = [c.name for c in components]
    if len(names) != len(set(names)):
        raise OutputParseError(f"duplicate component names in reply: {sorted(names)}")
    for s in snippets:
        if s.component not in names:
            raise OutputParseError(f"snippet references undefined component {s.component!r}")
    return components, snippets


def _validated_group_reply(
    reply: str, member_ids: Sequence[str]
) -> tuple[ParsedComponent, list[ParsedSnippet]]:
    components, snippets = parse_generation_output(reply)
    if len(components) != 1:
        raise OutputParseError(f"expected exactly one component, got {len(components)}")
    if len(snippets) != len(member_ids):
        raise OutputParseError(
            f"expected {len(member_ids)} snippets for members {list(member_ids)}, got {len(snippets)}"
        )
    comp = components[0]
    if not comp.name.strip() or not comp.code.strip():
        raise OutputParseError("component name and code must be nonempty")
    for s in snippets:
        if not s.code.strip():
            raise OutputParseError("snippet code must be nonempty")
    return comp, snippets


def generate_component_group(
    group: ComponentGroup,
    crops: Sequence,
    client: ModelClient,
    prompt: PromptAsset | str,
    blocks: Sequence[UIBlock] | None = None,
) -> tuple[GeneratedComponent, list[GeneratedSnippet]]:
    """One model call per group: a shared component plus one snippet per
    member block.  Snippets map to members by position, in group order."""
    members = list(group.member_block_ids)
    if len(crops) != len(members):
        raise ValidationError(
            f"group {group.group_id}: {len(members)} members but {len(crops)} crops"
        )
    images = [to_array(c) for c in crops]
    by_id = {b.id: b for b in blocks or ()}
    geometry_lines = []
    for mid in members:
        b = by_id.get(mid)
        if b is None:
            geometry_lines.append(f"- {mid}: (position unknown)")
        else:
            geometry_lines.append(
                f"- {mid}: left={b.bbox.x}, top={b.bbox.y}, width={b.bbox.w}, height={b.bbox.h}"
            )
    if isinstance(prompt, PromptAsset):
        prompt_text = prompt.render(
            count=len(members),
            member_list="\n".join(f"- {mid}" for mid in members),
            geometry_list="\n".join(geometry_lines),
        )
    else:
        prompt_text = prompt
    reply = client.call(prompt_text, images)
    try:
        comp, snippets = _validated_group_reply(reply, members)
    except OutputParseError:
        retry = client.call(prompt_text + "\n\n" + REASK_NOTE, images)
        comp, snippets = _validated_group_reply(retry, members)
    component = GeneratedComponent(
        component_name=comp.name, code=comp.code, group_id=group.group_id
    )
    out = [
        GeneratedSnippet(component_name=s.component, code=s.code, block_id=mid)
        for mid, s in zip(members, snippets)
    ]
    return component, out


# -- integration -------------------------------------------------------------


def _defs_region(components: Sequence[GeneratedComponent]) -> str:
    """Render the definitions region: each component exactly once, in
    first-given order.  Identical duplicates collapse; conflicting code
    under one name is an error."""
    seen: dict[str, str] = {}
    ordered: list[GeneratedComponent] = []
    for c in components:
        if c.component_name in seen:
            if seen[c.component_name] != c.code:
                raise ValidationError(
                    f"component {c.component_name!r} defined twice with different code"
                )
            continue
        seen[c.component_name] = c.code
        ordered.append(c)
    if not ordered:
        return f"{DEFS_OPEN}\n{DEFS_CLOSE}"
    parts = [DEFS_OPEN, '<div style="display:none">']
    for c in ordered:
        parts.append(f"<!--COMUI:DEF name={c.component_name}-->")
        parts.append(c.code.strip("\n"))
    parts.append("</div>")
    parts.append(DEFS_CLOSE)
    return "\n".join(parts)


def integrate(
    template: PageTemplate,
    snippets: dict[str, GeneratedSnippet],
    components: Sequence[GeneratedComponent],
) -> str:
    """Splice snippet code over every placeholder marker and emit the
    definitions region ahead of first use.  Zero residual markers or the
    run fails loudly."""
    code = template.code
    marker_ids = _MARKER_RE.findall(code)
    uncovered = [i for i in marker_ids if i not in snippets]
    if uncovered:
        raise MissingSnippet(f"no snippet for marker ids {uncovered}")
    region = _defs_region(components)
    if marker_ids:
        first = code.index(marker_for(marker_ids[0]))
        line_start = code.rfind("\n", 0, first) + 1
        code = code[:line_start] + region + "\n" + code[line_start:]
    else:
        if code and not code.endswith("\n"):
            code += "\n"
        code += region + "\n"
    for block_id in dict.fromkeys(marker_ids):
        code = code.replace(marker_for(block_id), snippets[block_id].code.strip("\n"))
    residual = _MARKER_RE.findall(code)
    if residual:
        raise ValidationError(f"residual placeholder markers after integration: {residual}")
    return code


def inline_variant(
    template: PageTemplate,
    snippets: dict[str, GeneratedSnippet],
    components: Sequence[GeneratedComponent],
) -> str:
    """Control construction for the reuse comparison: every marker gets its
    component's full code inlined ahead of the snippet, and no shared
    definitions region is emitted.  This is the page a generator without
    component extraction would produce."""
    by_name: dict[str, str] = {}
    for c in components:
        if by_name.get(c.component_name, c.code) != c.code:
            raise ValidationError(
                f"component {c.component_name!r} defined twice with different code"
            )
        by_name[c.component_name] = c.code
    code = template.code
    marker_ids = _MARKER_RE.findall(code)
    uncovered = [i for i in marker_ids if i not in snippets]
    if uncovered:
        raise MissingSnippet(f"no snippet for marker ids {uncovered}")
    for block_id in dict.fromkeys(marker_ids):
        snip = snippets[block_id]
        if snip.component_name not in by_name:
            raise ValidationError(
                f"snippet for {block_id!r} references unknown component {snip.component_name!r}"
            )
        replacement = (
            by_name[snip.component_name].strip("\n") + "\n" + snip.code.strip("\n")
        )
        code = code.replace(marker_for(block_id), replacement)
    return code
