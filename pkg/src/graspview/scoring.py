"""View scoring, NBV selection and grasp-view selection."""
from __future__ import annotations

import base64
import json
import logging
import math
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import DimensionMismatch, NoFeasibleCandidate, RangeError, ScorerUnavailable
from .renderer import RenderedView, color_png_bytes

log = logging.getLogger(__name__)

PROMPT_TEMPLATE = (
    "The image is a rendering of a tabletop scene from a candidate camera pose. "
    "The target object is: {target}. Rate from 0 to 1 (a) how visible the target is, "
    "(b) how suitable this view is for planning a grasp on it, and (c) how strongly "
    "other objects occlude it. Reply with a JSON object with keys s_vis, s_grasp, s_occl."
)


@dataclass(frozen=True)
class ScoreWeights:
    w_v: float = 0.4
    w_g: float = 0.4
    w_o: float = 0.2

    def __post_init__(self):
        if min(self.w_v, self.w_g, self.w_o) < 0:
            raise ValueError("score weights must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "ScoreWeights":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError("weights need three comma-separated values")
        return cls(*parts)

    def as_tuple(self) -> tuple:
        return (self.w_v, self.w_g, self.w_o)


@dataclass(frozen=True)
class ViewScore:
    s_vis: float
    s_grasp: float
    s_occl: float
    combined: float
    source: str = "heuristic"


def _check_unit(**vals):
    for name, v in vals.items():
        if not (0.0 <= v <= 1.0):
            raise RangeError(f"{name}={v} outside [0, 1]")


def combine_score(w: ScoreWeights, s_vis: float, s_grasp: float, s_occl: float) -> float:
    _check_unit(s_vis=s_vis, s_grasp=s_grasp, s_occl=s_occl)
    return w.w_v * s_vis + w.w_g * s_grasp - w.w_o * s_occl


def make_score(w: ScoreWeights, comps, source="heuristic") -> ViewScore:
    s = tuple(float(v) for v in comps)
    return ViewScore(*s, combine_score(w, *s), source)


def _argmax(items, key_score):
    best, best_key = None, None
    for item in items:
        # higher score, then smaller ring, then smaller azimuth index
        k = (-key_score(item), item.ring, item.azimuth)
        if best_key is None or k < best_key:
            best, best_key = item, k
    return best


def select_nbv(candidates: Sequence) -> object:
    pool = [c for c in candidates if c.feasible and c.score is not None]
    if not pool:
        raise NoFeasibleCandidate("no feasible scored candidate")
    return _argmax(pool, lambda c: c.score.combined)


def grasp_view_weights(w: ScoreWeights) -> ScoreWeights:
    """Visibility-dominant re-weighting used to pick the final grasp view."""
    return ScoreWeights(1.0, 0.0, w.w_o)


def select_grasp_view(views: Sequence, rescores: Sequence, w_o: float = 0.2):
    """Pick among previously traversed views using ``s_vis - w_o * s_occl``.

    ``rescores`` holds ``(s_vis, s_grasp, s_occl)`` triples (or ViewScores)
    aligned with ``views``; each view needs ``ring``/``azimuth`` for ties.
    """
    if len(views) != len(rescores):
        raise ValueError("views and rescores differ in length")
    if not views:
        raise NoFeasibleCandidate("no traversed views to choose from")
    wp = ScoreWeights(1.0, 0.0, w_o)
    vals = {}
    for v, s in zip(views, rescores):
        comps = (s.s_vis, s.s_grasp, s.s_occl) if isinstance(s, ViewScore) else tuple(s)
        vals[id(v)] = combine_score(wp, *comps)
    return _argmax(views, lambda v: vals[id(v)])


def viewing_elevation(view: RenderedView) -> float:
    """Angle (radians) the optical axis points below the horizontal."""
    f = view.pose.rotation[:, 2]
    return math.asin(float(np.clip(-f[2], -1.0, 1.0)))


def heuristic_score(view: RenderedView, target_mask: np.ndarray) -> tuple:
    """Deterministic stand-in for a learned scorer.

    ``target_mask`` marks where the target would appear with nothing in front
    of it.  Visibility is the share of those pixels won by target points,
    occlusion the share won by anything else.
    """
    target_mask = np.asarray(target_mask, dtype=bool)
    if target_mask.shape != view.shape:
        raise DimensionMismatch(f"mask {target_mask.shape} vs view {view.shape}")
    if view.target_hits is None:
        raise ValueError("view was rendered without target labels")
    total = int(target_mask.sum())
    if total == 0:
        return 0.0, 0.0, 0.0
    vis = int((view.target_hits & target_mask).sum()) / total
    occl = int((target_mask & (view.index >= 0) & ~view.target_hits).sum()) / total
    elev = math.degrees(viewing_elevation(view))
    grasp = vis * math.exp(-abs(elev - 45.0) / 45.0)
    clamp = lambda v: min(1.0, max(0.0, v))
    return clamp(vis), clamp(grasp), clamp(occl)


class Scorer(Protocol):
    concurrent_safe: bool

    def score(self, view: RenderedView, target_mask: np.ndarray, target: str) -> tuple: ...


class HeuristicScorer:
    concurrent_safe = True
    name = "heuristic"

    def score(self, view, target_mask, target="target object"):
        return heuristic_score(view, target_mask)


def clamp_components(comps) -> tuple:
    out = []
    for name, v in zip(("s_vis", "s_grasp", "s_occl"), comps):
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"{name} is not finite")
        if not 0.0 <= v <= 1.0:
            log.warning("clamping %s=%g into [0, 1]", name, v)
            v = min(1.0, max(0.0, v))
        out.append(v)
    return tuple(out)


def parse_scorer_reply(body: bytes) -> tuple:
    data = json.loads(body.decode("utf-8"))
    if not isinstance(data, dict):
        raise ValueError("scorer reply is not a JSON object")
    return clamp_components([data["s_vis"], data["s_grasp"], data["s_occl"]])


def scorer_request(view: RenderedView, target: str) -> bytes:
    return json.dumps({
        "image": base64.b64encode(color_png_bytes(view)).decode("ascii"),
        "prompt": PROMPT_TEMPLATE.format(target=target),
    }).encode("utf-8")


class ExternalScorer:
    """Scores views through one HTTP POST per candidate.

    Requests are issued one at a time.  On any transport or format problem
    the heuristic is used instead when ``fallback`` is set, otherwise
    :class:`ScorerUnavailable` is raised.
    """

    concurrent_safe = False
    name = "external"

    def __init__(self, url: str, timeout: float = 10.0, fallback: bool = True):
        self.url = url
        self.timeout = timeout
        self.fallback = fallback
        self.fallbacks = 0

    def score_remote(self, view, target) -> tuple:
        req = urllib.request.Request(self.url, data=scorer_request(view, target),
                                     headers={"Content-Type": "application/json"}, method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return parse_scorer_reply(resp.read())

    def score(self, view, target_mask, target="target object"):
        try:
            return self.score_remote(view, target)
        except (OSError, urllib.error.URLError, ValueError, KeyError, TypeError) as exc:
            if not self.fallback:
                raise ScorerUnavailable(f"{self.url}: {exc}") from exc
            log.warning("external scorer failed (%s); using heuristic", exc)
            self.fallbacks += 1
            return heuristic_score(view, target_mask)
