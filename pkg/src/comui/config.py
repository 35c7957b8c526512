"""Pipeline configuration: one flat key-value file, one frozen bundle.

The config file (conventionally ``comui.toml`` in the project root) is a
simple ``key = value`` text format with dotted keys, one per line, ``#``
comments allowed.  It deliberately avoids a full TOML dependency: every
tunable is a scalar, so sections buy nothing, and a flat dict snapshots
cleanly into the run manifest.  Unknown keys fail loudly; silent typos
in threshold names have burned enough experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ValidationError
from .hsbs import RefinementConfig
from .pef import RANK_TOP_K, MatchWeights, MismatchThresholds
from .usg import GraphConfig
from .vgbm import MergeConfig

DEFAULT_RENDER_CMD = "python3 -m comui.naive_renderer {input} {output}"
CONFIG_FILENAME = "comui.toml"

PROVIDER_KINDS = ("fallback", "matrix", "service")
CLIENT_MODES = ("live", "replay", "record")


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable the pipeline reads, in one place."""

    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    t_visual: float = 0.5
    match_budget: int = 200_000
    weights: MatchWeights = field(default_factory=MatchWeights)
    thresholds: MismatchThresholds = field(default_factory=MismatchThresholds)
    rank_top_k: int = RANK_TOP_K
    feedback_rounds: int = 1
    parallel: int = 1
    provider_kind: str = "fallback"
    provider_endpoint: str = ""
    provider_matrix: str = ""
    client_mode: str = "replay"
    render_cmd: str = DEFAULT_RENDER_CMD
    prompt_dir: str = ""

    def __post_init__(self) -> None:
        if self.client_mode not in CLIENT_MODES:
            raise ValidationError(f"client_mode must be one of {CLIENT_MODES}")
        if self.provider_kind not in PROVIDER_KINDS:
            raise ValidationError(f"provider.kind must be one of {PROVIDER_KINDS}")
        if self.provider_kind == "matrix" and not self.provider_matrix:
            raise ValidationError("provider.kind=matrix requires provider.matrix path")
        if self.provider_kind == "service" and not self.provider_endpoint:
            raise ValidationError("provider.kind=service requires provider.endpoint")
        if self.parallel < 1:
            raise ValidationError("parallel must be at least 1")
        if self.feedback_rounds < 0:
            raise ValidationError("feedback_rounds must be non-negative")
        if self.rank_top_k < 1:
            raise ValidationError("rank_top_k must be at least 1")
        if "{input}" not in self.render_cmd or "{output}" not in self.render_cmd:
            raise ValidationError("render_cmd needs {input} and {output} slots")

    def merge_config(self) -> MergeConfig:
        return MergeConfig(
            t_visual=self.t_visual, graph_cfg=self.graph, match_budget=self.match_budget
        )


# every legal key with its coercion; dotted prefixes group related knobs
_FLOAT_KEYS = {
    "refinement.t_overlap",
    "graph.tau",
    "graph.epsilon",
    "graph.t_size",
    "graph.rho",
    "merge.t_visual",
    "match.alpha",
    "match.beta",
    "match.gamma",
    "match.theta",
    "mismatch.t_high",
    "mismatch.t_medium",
    "mismatch.t_area",
}
_INT_KEYS = {"merge.match_budget", "rank_top_k", "feedback_rounds", "parallel"}
_STR_KEYS = {
    "provider.kind",
    "provider.endpoint",
    "provider.matrix",
    "client_mode",
    "render_cmd",
    "prompt_dir",
}
ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


def parse_config_text(text: str) -> dict[str, float | int | str]:
    """Parse the flat key-value format into a typed dict.

    Unknown keys, repeated keys, and uncoercible values are all
    ValidationError: a config line that does nothing is a bug.
    """
    out: dict[str, float | int | str] = {}
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        if key not in ALL_KEYS:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        if key in out:
            raise ValidationError(f"config line {lineno}: duplicate key {key!r}")
        try:
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            else:
                out[key] = value
        except ValueError:
            raise ValidationError(
                f"config line {lineno}: cannot parse value {value!r} for {key!r}"
            ) from None
    return out


def config_from_values(values: dict[str, float | int | str]) -> PipelineConfig:
    def pick(prefix: str, defaults) -> dict:
        out = {}
        for key, val in values.items():
            head, _, tail = key.partition(".")
            if head == prefix and tail:
                out[tail] = val
        return out

    refinement = RefinementConfig(**pick("refinement", None))
    graph = GraphConfig(**pick("graph", None))
    weights = MatchWeights(**pick("match", None))
    thresholds = MismatchThresholds(**pick("mismatch", None))
    merge_vals = pick("merge", None)
    provider_vals = pick("provider", None)
    top = {k: v for k, v in values.items() if "." not in k}
    return PipelineConfig(
        refinement=refinement,
        graph=graph,
        t_visual=float(merge_vals.get("t_visual", 0.5)),
        match_budget=int(merge_vals.get("match_budget", 200_000)),
        weights=weights,
        thresholds=thresholds,
        rank_top_k=int(top.get("rank_top_k", RANK_TOP_K)),
        feedback_rounds=int(top.get("feedback_rounds", 1)),
        parallel=int(top.get("parallel", 1)),
        provider_kind=str(provider_vals.get("kind", "fallback")),
        provider_endpoint=str(provider_vals.get("endpoint", "")),
        provider_matrix=str(provider_vals.get("matrix", "")),
        client_mode=str(top.get("client_mode", "replay")),
        render_cmd=str(top.get("render_cmd", DEFAULT_RENDER_CMD)),
        prompt_dir=str(top.get("prompt_dir", "")),
    )


def load_config(path: str | Path | None) -> PipelineConfig:
    """Defaults when path is None or the file does not exist."""
    if path is None:
        return PipelineConfig()
    p = Path(path)
    if not p.exists():
        return PipelineConfig()
    return config_from_values(parse_config_text(p.read_text(encoding="utf-8")))


def snapshot(cfg: PipelineConfig) -> dict[str, float | int | str]:
    """Flat, sorted, JSON-ready view of the whole config.

    This is what lands in the run manifest, and what the deterministic
    run id hashes; round-trips through config_from_values.
    """
    values: dict[str, float | int | str] = {
        "refinement.t_overlap": cfg.refinement.t_overlap,
        "graph.tau": cfg.graph.tau,
        "graph.epsilon": cfg.graph.epsilon,
        "graph.t_size": cfg.graph.t_size,
        "graph.rho": cfg.graph.rho,
        "merge.t_visual": cfg.t_visual,
        "merge.match_budget": cfg.match_budget,
        "match.alpha": cfg.weights.alpha,
        "match.beta": cfg.weights.beta,
        "match.gamma": cfg.weights.gamma,
        "match.theta": cfg.weights.theta,
        "mismatch.t_high": cfg.thresholds.t_high,
        "mismatch.t_medium": cfg.thresholds.t_medium,
        "mismatch.t_area": cfg.thresholds.t_area,
        "rank_top_k": cfg.rank_top_k,
        "feedback_rounds": cfg.feedback_rounds,
        "parallel": cfg.parallel,
        "provider.kind": cfg.provider_kind,
        "provider.endpoint": cfg.provider_endpoint,
        "provider.matrix": cfg.provider_matrix,
        "client_mode": cfg.client_mode,
        "render_cmd": cfg.render_cmd,
        "prompt_dir": cfg.prompt_dir,
    }
    return dict(sorted(values.items()))


def dumps_config(cfg: PipelineConfig) -> str:
    """Canonical config text: sorted keys, one per line."""
    lines = [f"{key} = {value}" for key, value in snapshot(cfg).items()]
    return "\n".join(lines) + "\n"


def with_mode(cfg: PipelineConfig, mode: str | None, parallel: int | None = None) -> PipelineConfig:
    """Apply command-line overrides on top of the loaded config."""
    out = cfg
    if mode is not None:
        out = replace(out, client_mode=mode)
    if parallel is not None:
        out = replace(out, parallel=parallel)
    return out
