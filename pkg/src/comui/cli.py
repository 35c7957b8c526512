"""Pipeline driver: segment, merge, generate, feedback, evaluate.

Each subcommand is one stage over a project directory.  Stages are
sequential and manifest-gated: a stage refuses to run until the stage it
consumes has a completion event.  Work inside a stage fans out across
pages up to the configured parallelism bound; the model client is the
only shared mutable participant and serializes its own writes.

Exit codes: 0 success, 2 validation (including stage order), 3 client or
replay failure, 4 render command failure.  Messages go to stderr.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .ccg import (
    GeneratedComponent,
    GeneratedSnippet,
    PageTemplate,
    generate_component_group,
    generate_template,
    inline_variant,
    integrate,
    mask_screenshot,
)
from .client import ClientMode, ModelClient, png_bytes
from .config import PipelineConfig, load_config, with_mode
from .core import Page, UIBlock, UIElement, ElementClass, contains
from .errors import (
    ClientError,
    ComuiError,
    RenderCommandError,
    ReplayMissError,
    ValidationError,
)
from .hsbs import fallback_detect, ingest_elements, propose_blocks, refine_blocks
from .metrics.dom import parse_dom
from .metrics.lowlevel import (
    PageFacts,
    assign_blocks,
    center_distance_cost,
    low_level_scores,
)
from .metrics.report import MetricsReport, render_pages
from .metrics.segmentation import match_components_iou
from .metrics.treemetrics import repetitive_ratio, reuse_rate
from .pef import (
    annotate_screenshots,
    apply_feedback,
    detect_mismatches,
    match_elements,
    rank_blocks,
    synthesize_instructions,
)
from .project import (
    ProjectLayout,
    atomic_write_bytes,
    atomic_write_json,
    atomic_write_text,
    digest_map,
    load_manifest,
    read_blocks,
    read_grouping,
    read_snippets,
    require_stage_input,
    save_manifest,
    write_blocks,
    write_grouping,
    write_snippets,
)
from .prompts import PromptAsset, load_asset
from .styles import absolute_boxes, box_text, subtree_text, top_level_boxes
from .usg import build_graph
from .vgbm import MergeContext, group_blocks
from .visual import (
    FallbackProvider,
    ImageRef,
    ImageStore,
    PrecomputedMatrixProvider,
    ExternalServiceProvider,
    VisualScorer,
    common_size,
    ssim,
)


# -- shared plumbing ---------------------------------------------------------


class TrackingClient:
    """Wraps the model client to record which fixture keys a stage
    consumed, for the manifest."""

    def __init__(self, inner: ModelClient):
        self.inner = inner
        self.keys: list[str] = []

    def call(self, prompt: str, images: Sequence = ()) -> str:
        images = list(images)
        self.keys.append(self.inner.key_for(prompt, images))
        return self.inner.call(prompt, images)


def make_provider(cfg: PipelineConfig):
    if cfg.provider_kind == "matrix":
        return PrecomputedMatrixProvider.from_file(cfg.provider_matrix)
    if cfg.provider_kind == "service":
        return ExternalServiceProvider(cfg.provider_endpoint)
    return FallbackProvider()


def make_client(cfg: PipelineConfig, layout: ProjectLayout) -> TrackingClient:
    client = ModelClient(mode=ClientMode(cfg.client_mode), fixtures_dir=layout.fixtures_dir)
    return TrackingClient(client)


def load_prompt(cfg: PipelineConfig, name: str) -> PromptAsset:
    if cfg.prompt_dir:
        return load_asset(name, Path(cfg.prompt_dir) / f"{name}.txt")
    return load_asset(name)


def read_screenshot(layout: ProjectLayout, page_id: str) -> np.ndarray:
    path = layout.screenshot_path(page_id)
    if not path.exists():
        raise ValidationError(f"page {page_id!r}: missing screenshot.png")
    with Image.open(path) as img:
        return np.array(img.convert("RGB"))


def read_page(layout: ProjectLayout, page_id: str, allow_fallback: bool) -> tuple[Page, np.ndarray]:
    """Reference side of a page: element detections plus the screenshot.

    Without elements.json the naive detector stands in, but only when
    the caller allows it (the segment flag, or downstream stages of a
    project that never had detections)."""
    screenshot = read_screenshot(layout, page_id)
    elements_path = layout.elements_path(page_id)
    if elements_path.exists():
        page = ingest_elements(elements_path, page_id=page_id)
        if (page.width, page.height) != (screenshot.shape[1], screenshot.shape[0]):
            raise ValidationError(
                f"page {page_id!r}: elements.json says {page.width}x{page.height} "
                f"but the screenshot is {screenshot.shape[1]}x{screenshot.shape[0]}"
            )
        return page, screenshot
    if not allow_fallback:
        raise ValidationError(
            f"page {page_id!r}: missing elements.json (run segment with --fallback-detect "
            f"to use the naive detector)"
        )
    elements = fallback_detect(screenshot)
    page = Page(
        id=page_id,
        width=screenshot.shape[1],
        height=screenshot.shape[0],
        elements=list(elements),
        screenshot=layout.screenshot_path(page_id),
    )
    return page, screenshot


def crop_array(arr: np.ndarray, bbox) -> np.ndarray:
    h, w = arr.shape[:2]
    x0, y0 = max(0, bbox.x), max(0, bbox.y)
    x1, y1 = min(w, bbox.right), min(h, bbox.bottom)
    if x1 <= x0 or y1 <= y0:
        return np.full((1, 1, 3), 255, dtype=np.uint8)
    return arr[y0:y1, x0:x1]


def mean_color(arr: np.ndarray, bbox) -> tuple[int, int, int] | None:
    patch = crop_array(arr, bbox)
    if patch.size == 0:
        return None
    mean = patch.reshape(-1, patch.shape[-1]).mean(axis=0)
    return tuple(int(round(c)) for c in mean[:3])


def map_pages(page_ids: list[str], fn, parallel: int) -> list:
    """Order-preserving per-page fan-out."""
    if parallel <= 1 or len(page_ids) <= 1:
        return [fn(pid) for pid in page_ids]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(fn, page_ids))


def render_page_file(path: Path, render_cmd: str) -> np.ndarray:
    return render_pages([str(path)], render_cmd)[str(path)]


def project_input_digests(layout: ProjectLayout) -> dict[str, str]:
    paths = []
    for pid in layout.page_ids():
        paths.append(layout.screenshot_path(pid))
        paths.append(layout.elements_path(pid))
    paths.append(layout.config_path)
    return digest_map(layout.root, paths)


# -- stages ------------------------------------------------------------------


def cmd_segment(layout: ProjectLayout, cfg: PipelineConfig, fallback: bool = False) -> None:
    manifest = load_manifest(layout, cfg)
    page_ids = layout.page_ids()
    if not page_ids:
        raise ValidationError(f"no pages found under {layout.pages_dir}")
    client = make_client(cfg, layout)
    prompt = load_prompt(cfg, "propose_blocks")

    def do_page(pid: str) -> Path:
        page, screenshot = read_page(layout, pid, allow_fallback=fallback)
        proposals = propose_blocks(screenshot, client, prompt)
        blocks = refine_blocks(proposals, page.elements, page_id=pid, cfg=cfg.refinement)
        # block ids are positional within a page; prefix with the page id so
        # the cross-page grouping space stays collision-free
        blocks = [replace(b, id=f"{pid}.{b.id}") for b in blocks]
        write_blocks(layout.blocks_path(pid), blocks)
        return layout.blocks_path(pid)

    outputs = map_pages(page_ids, do_page, cfg.parallel)
    manifest.record_stage(
        "segment",
        inputs=project_input_digests(layout),
        outputs=digest_map(layout.root, outputs),
        fixtures=client.keys,
    )
    save_manifest(layout, manifest)


def load_stage_state(layout: ProjectLayout):
    """Pages, screenshots, and refined blocks as the downstream stages see
    them."""
    pages: dict[str, Page] = {}
    shots: dict[str, np.ndarray] = {}
    blocks: dict[str, list[UIBlock]] = {}
    for pid in layout.page_ids():
        page, screenshot = read_page(layout, pid, allow_fallback=True)
        pages[pid] = page
        shots[pid] = screenshot
        path = layout.blocks_path(pid)
        if not path.exists():
            raise ValidationError(f"page {pid!r}: missing blocks.json")
        blocks[pid] = read_blocks(path)
    return pages, shots, blocks


def cmd_merge(layout: ProjectLayout, cfg: PipelineConfig) -> None:
    manifest = load_manifest(layout, cfg)
    require_stage_input(manifest, "merge")
    pages, shots, blocks_by_page = load_stage_state(layout)
    all_blocks = [b for pid in sorted(blocks_by_page) for b in blocks_by_page[pid]]
    store = ImageStore()
    for pid, shot in shots.items():
        store.register(pid, shot)
    graphs = {}
    refs = {}
    for b in all_blocks:
        graphs[b.id] = build_graph(b, pages[b.page_id].elements, cfg.graph)
        refs[b.id] = ImageRef(source=b.page_id, crop=b.bbox)
    ctx = MergeContext(graphs=graphs, refs=refs, scorer=VisualScorer(store, make_provider(cfg)))
    grouping = group_blocks(all_blocks, ctx, cfg.merge_config(), parallel=cfg.parallel)
    write_grouping(layout.groups_path, grouping)
    manifest.record_stage(
        "merge",
        inputs=digest_map(layout.root, [layout.blocks_path(p) for p in sorted(blocks_by_page)]),
        outputs=digest_map(layout.root, [layout.groups_path]),
        fixtures=[],
    )
    save_manifest(layout, manifest)


def cmd_generate(layout: ProjectLayout, cfg: PipelineConfig) -> None:
    manifest = load_manifest(layout, cfg)
    require_stage_input(manifest, "generate")
    pages, shots, blocks_by_page = load_stage_state(layout)
    if not layout.groups_path.exists():
        raise ValidationError("missing groups.json")
    grouping = read_grouping(layout.groups_path)
    all_blocks = [b for pid in sorted(blocks_by_page) for b in blocks_by_page[pid]]
    grouping.validate_partition([b.id for b in all_blocks])
    block_by_id = {b.id: b for b in all_blocks}
    client = make_client(cfg, layout)
    group_prompt = load_prompt(cfg, "component_group")
    template_prompt = load_prompt(cfg, "page_template")

    components: dict[str, GeneratedComponent] = {}
    component_order: list[str] = []
    snippets_by_page: dict[str, dict[str, GeneratedSnippet]] = {pid: {} for pid in pages}
    for group in sorted(grouping.groups, key=lambda g: g.group_id):
        crops = [
            crop_array(shots[block_by_id[mid].page_id], block_by_id[mid].bbox)
            for mid in group.member_block_ids
        ]
        component, snippets = generate_component_group(
            group, crops, client, group_prompt, blocks=all_blocks
        )
        known = components.get(component.component_name)
        if known is not None and known.code != component.code:
            raise ValidationError(
                f"groups {known.group_id} and {component.group_id} both produced a "
                f"component named {component.component_name!r} with different code"
            )
        if known is None:
            components[component.component_name] = component
            component_order.append(component.component_name)
        for snip in snippets:
            snippets_by_page[block_by_id[snip.block_id].page_id][snip.block_id] = snip

    outputs: list[Path] = []

    def do_page(pid: str) -> list[Path]:
        page_blocks = blocks_by_page[pid]
        masked = mask_screenshot(shots[pid], page_blocks)
        template = generate_template(masked, page_blocks, client, template_prompt, page_id=pid)
        page_snippets = snippets_by_page[pid]
        used_names = []
        for name in component_order:
            if any(s.component_name == name for s in page_snippets.values()):
                used_names.append(name)
        page_html = integrate(template, page_snippets, [components[n] for n in used_names])
        atomic_write_text(layout.template_path(pid), template.code + "\n")
        atomic_write_text(layout.generated_page_path(pid), page_html + "\n")
        write_snippets(
            layout.snippets_path(pid),
            [
                {
                    "block_id": s.block_id,
                    "component": s.component_name,
                    "code": s.code,
                }
                for s in sorted(page_snippets.values(), key=lambda s: s.block_id)
            ],
        )
        return [
            layout.template_path(pid),
            layout.generated_page_path(pid),
            layout.snippets_path(pid),
        ]

    for paths in map_pages(sorted(pages), do_page, cfg.parallel):
        outputs.extend(paths)
    for name in component_order:
        path = layout.component_path(name)
        atomic_write_text(path, components[name].code.strip("\n") + "\n")
        outputs.append(path)
    manifest.record_stage(
        "generate",
        inputs=digest_map(
            layout.root,
            [layout.groups_path] + [layout.blocks_path(p) for p in sorted(pages)],
        ),
        outputs=digest_map(layout.root, outputs),
        fixtures=client.keys,
    )
    save_manifest(layout, manifest)


def elements_from_html(html: str) -> list[UIElement]:
    """Generated-side detections recovered from inline styles: every
    visible positioned box becomes an element, textual when it has text."""
    out = []
    for i, box in enumerate(absolute_boxes(parse_dom(html))):
        text = box_text(box) or None
        cls = ElementClass.TEXT if text else ElementClass.OTHER
        out.append(UIElement(id=f"v{i}", bbox=box.bbox, elem_class=cls, text=text))
    return out


def block_priorities(
    pid: str,
    gt_blocks: list[UIBlock],
    gen_html: str,
    gt_arr: np.ndarray,
    gen_arr: np.ndarray,
    cfg: PipelineConfig,
) -> list[dict]:
    """Advisory fix ordering for a page: pair refined blocks with the
    generated top-level boxes, score each pair by crop SSIM, rank."""
    boxes = top_level_boxes(absolute_boxes(parse_dom(gen_html)))
    if not gt_blocks or not boxes:
        return []
    assignment = assign_blocks(
        [b.bbox for b in gt_blocks], [b.bbox for b in boxes], center_distance_cost
    )
    pairs = []
    sims = []
    for ri, gi in assignment:
        gt_b = gt_blocks[ri]
        gen_bbox = boxes[gi].bbox
        gen_block = UIBlock(id=f"gen-{gi}", page_id=pid, bbox=gen_bbox, kind=gt_b.kind)
        a, b = common_size(crop_array(gt_arr, gt_b.bbox), crop_array(gen_arr, gen_bbox))
        sims.append(min(1.0, max(0.0, ssim(a, b))))
        pairs.append((gt_b, gen_block))
    ranked = rank_blocks(pairs, sims, float(gt_arr.shape[0] * gt_arr.shape[1]), k=cfg.rank_top_k)
    return [{"block_id": p.block_id, "score": p.score, "rank": p.rank} for p in ranked]


def cmd_feedback(layout: ProjectLayout, cfg: PipelineConfig) -> None:
    manifest = load_manifest(layout, cfg)
    require_stage_input(manifest, "feedback")
    pages, shots, blocks_by_page = load_stage_state(layout)
    client = make_client(cfg, layout)
    prompt = load_prompt(cfg, "feedback_apply")
    provider = make_provider(cfg)
    outputs: list[Path] = []

    def do_page(pid: str) -> list[Path]:
        page = pages[pid]
        screenshot = shots[pid]
        generated_path = layout.generated_page_path(pid)
        if not generated_path.exists():
            raise ValidationError(f"page {pid!r}: missing generated page.html")
        current_html = generated_path.read_text(encoding="utf-8")
        dims = (page.width, page.height)
        instructions = ""
        annotated = None
        priorities: list[dict] = []
        for _ in range(cfg.feedback_rounds):
            with tempfile.TemporaryDirectory(prefix="comui-feedback-") as tmp:
                html_path = Path(tmp) / "page.html"
                html_path.write_text(current_html, encoding="utf-8")
                gen_arr = render_page_file(html_path, cfg.render_cmd)
            gen_elements = elements_from_html(current_html)
            matches, un_gt, un_gen = match_elements(
                page.elements, gen_elements, dims, cfg.weights, provider,
                gt_image=screenshot, gen_image=gen_arr,
            )
            pairs = []
            for m in matches:
                issues = detect_mismatches(
                    m, dims, cfg.thresholds, provider,
                    crop_array(screenshot, m.gt.bbox), crop_array(gen_arr, m.gen.bbox),
                )
                if issues:
                    pairs.append((m, issues))
            priorities = block_priorities(
                pid, blocks_by_page[pid], current_html, screenshot, gen_arr, cfg
            )
            instructions = synthesize_instructions(pairs, un_gt, un_gen)
            if not instructions:
                break
            annotated = annotate_screenshots(
                screenshot, gen_arr, [m for m, _ in pairs], un_gt, un_gen
            )
            current_html = apply_feedback(
                current_html, instructions, annotated[0], annotated[1], client, prompt
            )
            if not current_html.endswith("\n"):
                current_html += "\n"
        written = []
        atomic_write_text(layout.instructions_path(pid), instructions + "\n")
        written.append(layout.instructions_path(pid))
        atomic_write_text(layout.feedback_page_path(pid), current_html)
        written.append(layout.feedback_page_path(pid))
        atomic_write_json(layout.feedback_page_dir(pid) / "priorities.json",
                          {"priorities": priorities})
        written.append(layout.feedback_page_dir(pid) / "priorities.json")
        if annotated is not None:
            atomic_write_bytes(layout.annotated_reference_path(pid), png_bytes(annotated[0]))
            atomic_write_bytes(layout.annotated_generated_path(pid), png_bytes(annotated[1]))
            written.append(layout.annotated_reference_path(pid))
            written.append(layout.annotated_generated_path(pid))
        return written

    for paths in map_pages(sorted(pages), do_page, cfg.parallel):
        outputs.extend(paths)
    manifest.record_stage(
        "feedback",
        inputs=digest_map(
            layout.root,
            [layout.generated_page_path(p) for p in sorted(pages)]
            + [layout.snippets_path(p) for p in sorted(pages)],
        ),
        outputs=digest_map(layout.root, outputs),
        fixtures=client.keys,
    )
    save_manifest(layout, manifest)


def read_components(layout: ProjectLayout) -> list[GeneratedComponent]:
    out = []
    if layout.components_dir.is_dir():
        for path in sorted(layout.components_dir.glob("*.comp.html")):
            name = path.name[: -len(".comp.html")]
            out.append(
                GeneratedComponent(
                    component_name=name,
                    code=path.read_text(encoding="utf-8").strip("\n"),
                    group_id="",
                )
            )
    return out


def cmd_evaluate(layout: ProjectLayout, cfg: PipelineConfig) -> None:
    manifest = load_manifest(layout, cfg)
    require_stage_input(manifest, "evaluate")
    pages, shots, blocks_by_page = load_stage_state(layout)
    if not layout.groups_path.exists():
        raise ValidationError("missing groups.json")
    grouping = read_grouping(layout.groups_path)
    components = read_components(layout)
    all_blocks = [b for pid in sorted(blocks_by_page) for b in blocks_by_page[pid]]

    # project-level reuse: component use counts across every page
    use_counts: dict[str, int] = {}
    snippet_records: dict[str, list[dict]] = {}
    for pid in sorted(pages):
        records = read_snippets(layout.snippets_path(pid))
        snippet_records[pid] = records
        for rec in records:
            use_counts[rec["component"]] = use_counts.get(rec["component"], 0) + 1
    project_reuse = reuse_rate(
        [b.id for b in all_blocks],
        [list(g.member_block_ids) for g in grouping.groups],
        use_counts,
    )

    outputs: list[Path] = []

    def do_page(pid: str) -> list[Path]:
        page_path = layout.latest_page_path(pid)
        if not page_path.exists():
            raise ValidationError(f"page {pid!r}: no generated page to evaluate")
        html = page_path.read_text(encoding="utf-8")
        rendered = render_page_file(page_path, cfg.render_cmd)
        screenshot = shots[pid]
        a, b = common_size(screenshot, rendered)
        high = {"ssim": float(ssim(a, b))}

        gt_blocks = blocks_by_page[pid]
        ref_facts = PageFacts(
            size=(pages[pid].width, pages[pid].height),
            blocks=tuple(bl.bbox for bl in gt_blocks),
            texts=tuple(
                " ".join(
                    e.text for e in pages[pid].elements
                    if e.text and contains(bl.bbox, e.bbox)
                ) or None
                for bl in gt_blocks
            ),
            colors=tuple(mean_color(screenshot, bl.bbox) for bl in gt_blocks),
        )
        boxes = top_level_boxes(absolute_boxes(parse_dom(html)))
        gen_facts = PageFacts(
            size=(rendered.shape[1], rendered.shape[0]),
            blocks=tuple(bx.bbox for bx in boxes),
            texts=tuple(subtree_text(bx.node) or None for bx in boxes),
            colors=tuple(mean_color(rendered, bx.bbox) for bx in boxes),
        )
        assignment = assign_blocks(ref_facts.blocks, gen_facts.blocks, center_distance_cost)
        low = low_level_scores(ref_facts, gen_facts, assignment)
        seg_report = match_components_iou(
            [bl.bbox for bl in gt_blocks], [bx.bbox for bx in boxes]
        )

        ratio = repetitive_ratio(parse_dom(html))
        control_ratio = None
        template_path = layout.template_path(pid)
        if template_path.exists():
            template = PageTemplate(
                page_id=pid, code=template_path.read_text(encoding="utf-8").rstrip("\n")
            )
            snippet_map = {
                rec["block_id"]: GeneratedSnippet(
                    component_name=rec["component"], code=rec["code"], block_id=rec["block_id"]
                )
                for rec in snippet_records[pid]
            }
            control_html = inline_variant(template, snippet_map, components)
            control_ratio = repetitive_ratio(parse_dom(control_html))

        report = MetricsReport(
            tree_bleu=None,
            reuse_rate=project_reuse,
            repetitive_ratio=ratio,
            segmentation=seg_report.to_dict(),
            clustering=None,
            low_level=low.to_dict(),
            high_level=high,
            metadata={
                "page_id": pid,
                "page_path": page_path.relative_to(layout.root).as_posix(),
                "repetitive_ratio_control": (
                    "unavailable" if control_ratio is None else control_ratio
                ),
                "reuse_scope": "project",
            },
        )
        report.validate()
        json_path = layout.reports_dir / f"{pid}.json"
        md_path = layout.reports_dir / f"{pid}.md"
        atomic_write_text(json_path, report.to_json() + "\n")
        atomic_write_text(md_path, report.to_markdown() + "\n")
        return [json_path, md_path]

    for paths in map_pages(sorted(pages), do_page, cfg.parallel):
        outputs.extend(paths)
    manifest.record_stage(
        "evaluate",
        inputs=digest_map(
            layout.root,
            [layout.latest_page_path(p) for p in sorted(pages)] + [layout.groups_path],
        ),
        outputs=digest_map(layout.root, outputs),
        fixtures=[],
    )
    save_manifest(layout, manifest)


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("project", help="project directory")
    common.add_argument("--config", default=None, help="config file (default: project/comui.toml)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--replay", action="store_const", const="replay", dest="mode",
                      help="serve model replies from recorded fixtures")
    mode.add_argument("--record", action="store_const", const="record", dest="mode",
                      help="call the live endpoint and record fixtures")
    mode.add_argument("--live", action="store_const", const="live", dest="mode",
                      help="call the live endpoint without recording")
    common.add_argument("--parallel", type=int, default=None, metavar="N",
                        help="per-stage worker bound")
    common.add_argument("--seed", type=int, default=None,
                        help="reserved; affects nothing algorithmic")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="comui",
        description="screenshot-to-code pipeline: segment, merge, generate, feedback, evaluate",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    segment = sub.add_parser("segment", parents=[common],
                             help="propose and refine UI blocks per page")
    segment.add_argument("--fallback-detect", action="store_true",
                         help="derive elements with the naive detector when elements.json is absent")
    sub.add_parser("merge", parents=[common], help="group visually and structurally similar blocks")
    sub.add_parser("generate", parents=[common], help="generate components, snippets, and pages")
    sub.add_parser("feedback", parents=[common], help="compare against reference and revise pages")
    sub.add_parser("evaluate", parents=[common], help="render and score the final pages")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    layout = ProjectLayout(Path(args.project))
    try:
        if not layout.root.is_dir():
            raise ValidationError(f"project directory {layout.root} does not exist")
        cfg = load_config(args.config if args.config else layout.config_path)
        cfg = with_mode(cfg, args.mode, args.parallel)
        if args.verbose:
            print(f"running {args.command} on {layout.root} "
                  f"(mode={cfg.client_mode}, parallel={cfg.parallel})", file=sys.stderr)
        if args.command == "segment":
            cmd_segment(layout, cfg, fallback=args.fallback_detect)
        elif args.command == "merge":
            cmd_merge(layout, cfg)
        elif args.command == "generate":
            cmd_generate(layout, cfg)
        elif args.command == "feedback":
            cmd_feedback(layout, cfg)
        elif args.command == "evaluate":
            cmd_evaluate(layout, cfg)
    except ReplayMissError as err:
        print(f"error: replay fixture miss: {err.key}", file=sys.stderr)
        return 3
    except RenderCommandError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except ClientError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except ComuiError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.verbose:
        print(f"{args.command} complete", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
