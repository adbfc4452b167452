"""Classical visual checks: template matching, line detection, NMS, rule packs."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import fftconvolve

from .datafiles import data_path
from .docmodel import BoundingBox, DocumentBundle, Page, read_pgm

EDGE_GRADIENT_THRESHOLD = 60.0
DARK_LEVEL = 128
RIGHT_ANGLES = (0, 90, 180, 270)


@dataclass(frozen=True)
class Detection:
    label: str
    bbox: BoundingBox
    score: float
    page_index: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0,1]")


@dataclass(frozen=True)
class LineSegment:
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def angle_deg(self) -> float:
        """Direction angle in [0, 180)."""
        return math.degrees(math.atan2(self.y1 - self.y0, self.x1 - self.x0)) % 180.0


def template_library() -> dict[str, np.ndarray]:
    """Packaged symbol templates, keyed by file stem."""
    library = {}
    for path in sorted(data_path("templates").glob("*.pgm")):
        library[path.stem] = read_pgm(path.read_bytes())
    return library


# ---------------------------------------------------------------------------
# Template matching

def _ncc_map(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation at every valid offset, zero where flat."""
    img = image.astype(np.float64)
    tpl = template.astype(np.float64)
    th, tw = tpl.shape
    n = th * tw
    tpl_zero = tpl - tpl.mean()
    tpl_energy = float(np.sum(tpl_zero**2))
    if tpl_energy <= 1e-9:
        out_shape = (img.shape[0] - th + 1, img.shape[1] - tw + 1)
        return np.zeros(out_shape)
    kernel = tpl_zero[::-1, ::-1]
    numerator = fftconvolve(img, kernel, mode="valid")
    ones = np.ones((th, tw))
    window_sum = fftconvolve(img, ones, mode="valid")
    window_sq = fftconvolve(img**2, ones, mode="valid")
    window_var = np.maximum(window_sq - window_sum**2 / n, 0.0)
    denom = np.sqrt(window_var * tpl_energy)
    ncc = np.zeros_like(numerator)
    live = denom > 1e-9
    ncc[live] = numerator[live] / denom[live]
    return np.clip(ncc, -1.0, 1.0)


def detect_template(
    page: Page,
    template: np.ndarray,
    label: str,
    threshold: float,
    rotations: tuple[int, ...] = RIGHT_ANGLES,
) -> list[Detection]:
    """NCC peaks at every offset over a right-angle rotation set, NMS at IoU 0.5."""
    candidates = []
    for angle in rotations:
        if angle not in RIGHT_ANGLES:
            raise ValueError(f"rotation {angle} not in the right-angle set")
        rotated = np.rot90(template, k=angle // 90)
        th, tw = rotated.shape
        if th > page.height or tw > page.width:
            raise ValueError(f"template {tw}x{th} larger than page {page.width}x{page.height}")
        ncc = _ncc_map(page.image, rotated)
        peaks = (ncc >= threshold) & (maximum_filter(ncc, size=3) == ncc)
        for y, x in zip(*np.nonzero(peaks)):
            score = min(max(float(ncc[y, x]), 0.0), 1.0)
            candidates.append(Detection(label, BoundingBox(int(x), int(y), tw, th), score, page.index))
    return non_max_suppression(candidates, 0.5)


# ---------------------------------------------------------------------------
# Line detection

def edge_map(image: np.ndarray) -> np.ndarray:
    """Gradient magnitude over a fixed threshold, anchored to the dark side."""
    img = image.astype(np.float64)
    gy, gx = np.gradient(img)
    magnitude = np.hypot(gx, gy)
    return (magnitude > EDGE_GRADIENT_THRESHOLD) & (image < DARK_LEVEL)


def detect_lines(page: Page, min_length: int, max_gap: int = 4) -> list[LineSegment]:
    """Hough accumulator at 1° steps; collinear edge runs at least min_length long."""
    edges = edge_map(page.image)
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return []
    thetas = np.deg2rad(np.arange(0, 180, 1.0))
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    diag = int(math.ceil(math.hypot(page.width, page.height)))
    n_rho = 2 * diag + 1
    accumulator = np.zeros((len(thetas), n_rho), dtype=np.int64)
    rho_all = np.empty((len(thetas), len(xs)), dtype=np.int64)
    for t in range(len(thetas)):
        rho = np.round(xs * cos_t[t] + ys * sin_t[t]).astype(np.int64) + diag
        rho_all[t] = rho
        accumulator[t] += np.bincount(rho, minlength=n_rho)

    min_votes = max(int(min_length * 0.8), 10)
    cells = np.argwhere(accumulator >= min_votes)
    # strongest lines first; deterministic tie order
    cells = sorted(cells.tolist(), key=lambda c: (-int(accumulator[c[0], c[1]]), c[0], c[1]))

    consumed = np.zeros(len(xs), dtype=bool)
    segments: list[LineSegment] = []
    for t, rho_idx in cells:
        near = np.abs(rho_all[t] - rho_idx) <= 1
        member = near & ~consumed
        if int(member.sum()) < min_votes:
            continue
        idx = np.nonzero(member)[0]
        # project onto the line direction and split into gap-bounded runs
        direction = (-sin_t[t], cos_t[t])
        proj = xs[idx] * direction[0] + ys[idx] * direction[1]
        order = np.argsort(proj, kind="stable")
        idx, proj = idx[order], proj[order]
        run_start = 0
        for i in range(1, len(proj) + 1):
            if i == len(proj) or proj[i] - proj[i - 1] > max_gap:
                run = idx[run_start:i]
                if len(run) >= 2:
                    extent = proj[i - 1] - proj[run_start]
                    if extent >= min_length:
                        a, b = run[0], run[-1]
                        segments.append(
                            LineSegment(int(xs[a]), int(ys[a]), int(xs[b]), int(ys[b]))
                        )
                        consumed[run] = True
                run_start = i
    segments.sort(key=lambda s: (s.y0, s.x0, s.y1, s.x1))
    return segments


# ---------------------------------------------------------------------------
# Closed-boundary assembly (red line proxy)

def _snap_endpoints(segments: list[LineSegment], tolerance: float) -> list[tuple[int, int]]:
    """Assign each segment endpoint to a cluster id; returns per-segment (node_a, node_b)."""
    centers: list[tuple[float, float]] = []
    assignment = []
    for seg in segments:
        pair = []
        for px, py in ((seg.x0, seg.y0), (seg.x1, seg.y1)):
            node = None
            for ci, (cx, cy) in enumerate(centers):
                if math.hypot(px - cx, py - cy) <= tolerance:
                    node = ci
                    break
            if node is None:
                centers.append((float(px), float(py)))
                node = len(centers) - 1
            pair.append(node)
        assignment.append((pair[0], pair[1]))
    return assignment


def assemble_closed_boundaries(
    segments: list[LineSegment], snap_tolerance: float = 6.0
) -> list[list[LineSegment]]:
    """Connected components whose every node has degree ≥ 2 (closed polylines)."""
    if not segments:
        return []
    assignment = _snap_endpoints(segments, snap_tolerance)
    n_nodes = 1 + max(max(a, b) for a, b in assignment)
    parent = list(range(n_nodes))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    degree = [0] * n_nodes
    for a, b in assignment:
        degree[a] += 1
        degree[b] += 1
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    components: dict[int, list[int]] = {}
    for seg_idx, (a, _) in enumerate(assignment):
        components.setdefault(find(a), []).append(seg_idx)

    closed = []
    for members in components.values():
        nodes = {node for i in members for node in assignment[i]}
        if all(degree[node] >= 2 for node in nodes) and len(members) >= 3:
            closed.append([segments[i] for i in sorted(members)])
    closed.sort(key=lambda group: (group[0].y0, group[0].x0))
    return closed


def detect_red_line(page: Page, min_length: int = 40) -> list[Detection]:
    """Closed polyline boundaries reported as red_line bbox detections."""
    segments = detect_lines(page, min_length)
    detections = []
    for group in assemble_closed_boundaries(segments):
        xs = [v for s in group for v in (s.x0, s.x1)]
        ys = [v for s in group for v in (s.y0, s.y1)]
        box = BoundingBox(min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1)
        total = sum(s.length for s in group)
        perimeter = 2 * (box.w + box.h)
        score = min(total / perimeter, 1.0) if perimeter else 0.0
        detections.append(Detection("red_line", box, score, page.index))
    return non_max_suppression(detections, 0.5)


# ---------------------------------------------------------------------------
# Non-max suppression

def _det_order(det: Detection) -> tuple:
    return (-det.score, det.page_index, det.bbox.x, det.bbox.y, det.label, det.bbox.w, det.bbox.h)


def non_max_suppression(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy by descending score; ties broken by smaller (page, x, y)."""
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError("iou_threshold must lie strictly between 0 and 1")
    kept: list[Detection] = []
    for det in sorted(detections, key=_det_order):
        suppressed = any(
            k.label == det.label
            and k.page_index == det.page_index
            and k.bbox.iou(det.bbox) > iou_threshold
            for k in kept
        )
        if not suppressed:
            kept.append(det)
    return kept


# ---------------------------------------------------------------------------
# Rule packs

RULE_KINDS = ("require_symbol", "require_text_match")


@dataclass(frozen=True)
class Rule:
    rule_id: str
    kind: str
    parameters: dict

    def __post_init__(self) -> None:
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind == "require_symbol":
            if "label" not in self.parameters:
                raise ValueError("require_symbol needs a label")
            min_score = self.parameters.get("min_score", 0.0)
            if not (0.0 <= min_score <= 1.0):
                raise ValueError("min_score must lie in [0,1]")
        else:
            re.compile(self.parameters["pattern"])
            if "region" not in self.parameters:
                raise ValueError("require_text_match needs a region selector")


@dataclass(frozen=True)
class RulePack:
    pack_id: str
    jurisdiction: str
    rules: tuple[Rule, ...]

    def __post_init__(self) -> None:
        ids = [r.rule_id for r in self.rules]
        if len(ids) != len(set(ids)):
            raise ValueError("rule_ids must be unique")


@dataclass(frozen=True)
class TextEvidence:
    page_index: int
    span_id: str
    text: str
    bbox: BoundingBox


@dataclass(frozen=True)
class RuleOutcome:
    rule_id: str
    satisfied: bool
    evidence: tuple

    def __post_init__(self) -> None:
        if self.satisfied and not self.evidence:
            raise ValueError("a satisfied rule must carry evidence")


def load_rule_pack(name_or_path: str | Path) -> RulePack:
    candidate = Path(name_or_path)
    source = candidate if candidate.suffix == ".json" and candidate.exists() else data_path("rulepacks", f"{name_or_path}.json")
    raw = json.loads(source.read_text(encoding="utf-8"))
    return RulePack(
        pack_id=raw["pack_id"],
        jurisdiction=raw["jurisdiction"],
        rules=tuple(Rule(r["rule_id"], r["kind"], r["parameters"]) for r in raw["rules"]),
    )


def _region_spans(bundle: DocumentBundle, region: str):
    if region == "any":
        pages = bundle.pages
    elif region.startswith("page:"):
        index = int(region.split(":", 1)[1])
        if not (0 <= index < len(bundle.pages)):
            return []
        pages = [bundle.pages[index]]
    else:
        raise ValueError(f"unknown region selector {region!r}")
    return [(page.index, span) for page in pages for span in page.spans]


def evaluate_rule_pack(
    bundle: DocumentBundle, pack: RulePack, detections: list[Detection]
) -> list[RuleOutcome]:
    """Pure evaluation, outcomes in rule order; detection source is irrelevant."""
    outcomes = []
    for rule in pack.rules:
        if rule.kind == "require_symbol":
            label = rule.parameters["label"]
            min_score = rule.parameters.get("min_score", 0.0)
            hits = [d for d in detections if d.label == label and d.score >= min_score]
            hits.sort(key=_det_order)
            outcomes.append(RuleOutcome(rule.rule_id, bool(hits), tuple(hits)))
        else:
            pattern = re.compile(rule.parameters["pattern"])
            hits = [
                TextEvidence(page_index, span.span_id, span.text, span.bbox)
                for page_index, span in _region_spans(bundle, rule.parameters["region"])
                if pattern.search(span.text)
            ]
            outcomes.append(RuleOutcome(rule.rule_id, bool(hits), tuple(hits)))
    return outcomes


# ---------------------------------------------------------------------------
# Provider-path detections

def parse_detections(payload: dict) -> list[Detection]:
    """Schema-validated provider payload to detections."""
    detections = []
    for item in payload.get("detections", []):
        x, y, w, h = item["bbox"]
        detections.append(
            Detection(
                label=item["label"],
                bbox=BoundingBox(int(x), int(y), int(w), int(h)),
                score=float(item["score"]),
                page_index=int(item["page_index"]),
            )
        )
    return detections


def detect_visual(bundle, config, provider, audit) -> list[Detection]:
    """Provider-sourced detections via the pipeline; classical path stays available."""
    from .pipeline import run_task

    if config.task_kind != "visual_detection":
        raise ValueError(f"config is for {config.task_kind!r}, expected visual_detection")
    result = run_task(bundle, config, provider, audit)
    return non_max_suppression(result.suggestions, 0.5)


def classical_detections(
    bundle: DocumentBundle,
    threshold: float = 0.7,
    min_line_length: int = 40,
    templates: dict[str, np.ndarray] | None = None,
) -> list[Detection]:
    """Template matches plus closed-boundary red lines for every page."""
    library = templates if templates is not None else template_library()
    detections: list[Detection] = []
    for page in bundle.pages:
        for label, template in sorted(library.items()):
            detections.extend(detect_template(page, template, label, threshold))
        detections.extend(detect_red_line(page, min_line_length))
    return detections
