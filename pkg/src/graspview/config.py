"""Run configuration: one schema holding every default, JSON round-trip,
and conversion into a :class:`~graspview.pipeline.PipelineConfig`.

Keys (all optional in a config file)::

    scene_path        scene JSON file (SceneSpec layout)
    difficulty        easy | medium | hard, used when no scene file is given
    nbv_budget        executed next-best views, 0..10                 [1]
    weights           {w_v, w_g, w_o}                          [0.4, 0.4, 0.2]
    sampler           {alpha_max_deg, n_alpha, n_beta, radius_override} [40, 2, 6, null]
    filter            {stat_k, stat_sigma, radius_r, radius_min_n,
                       dbscan_eps, dbscan_min_pts}      [20, 2.0, 0.01, 5, 0.02, 10]
    scorer            heuristic | external                             [heuristic]
    scorer_url        endpoint of the external scorer
    fallback          fall back to the heuristic when the scorer fails  [true]
    seed              predictor noise seed (and scene seed with difficulty) [0]
    out_dir           output directory                                      [out]
    noise_sigma       predictor noise, metres                            [0.002]
    true_scale        hidden scale of the simulated predictor               [1.0]
    max_reperception  extra exploration rounds after planning fails           [1]
    pregrasp_offset   approach standoff, metres                            [0.10]
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .cloud import FilterParams
from .pipeline import PipelineConfig
from .sampler import ConeSamplerConfig
from .scoring import ScoreWeights
from .sim import LEVELS

SCORERS = ("heuristic", "external")
MAX_BUDGET = 10


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scene_path: Optional[str] = None
    difficulty: Optional[str] = None
    nbv_budget: int = 1
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    sampler: ConeSamplerConfig = field(default_factory=ConeSamplerConfig)
    filter: FilterParams = field(default_factory=FilterParams)
    scorer: str = "heuristic"
    scorer_url: Optional[str] = None
    fallback: bool = True
    seed: int = 0
    out_dir: str = "out"
    noise_sigma: float = 0.002
    true_scale: float = 1.0
    max_reperception: int = 1
    pregrasp_offset: float = 0.10

    def validate(self) -> "RunConfig":
        if isinstance(self.nbv_budget, bool) or not isinstance(self.nbv_budget, int):
            raise ConfigError("nbv_budget must be an integer")
        if not 0 <= self.nbv_budget <= MAX_BUDGET:
            raise ConfigError(f"nbv_budget must lie in [0, {MAX_BUDGET}]")
        if self.scorer not in SCORERS:
            raise ConfigError(f"scorer must be one of {SCORERS}")
        if self.scorer == "external" and not self.scorer_url:
            raise ConfigError("external scorer needs a URL (--scorer-url or GRASPVIEW_SCORER_URL)")
        if self.difficulty is not None and self.difficulty not in LEVELS:
            raise ConfigError(f"difficulty must be one of {LEVELS}")
        if not self.noise_sigma >= 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0.2 <= self.true_scale <= 5.0:
            raise ConfigError("true_scale must lie in [0.2, 5]")
        if int(self.max_reperception) < 0 or not self.pregrasp_offset > 0:
            raise ConfigError("max_reperception must be >= 0 and pregrasp_offset > 0")
        return self

    def to_dict(self) -> dict:
        return {
            "scene_path": self.scene_path, "difficulty": self.difficulty,
            "nbv_budget": self.nbv_budget,
            "weights": {"w_v": self.weights.w_v, "w_g": self.weights.w_g, "w_o": self.weights.w_o},
            "sampler": self.sampler.to_dict(), "filter": self.filter.to_dict(),
            "scorer": self.scorer, "scorer_url": self.scorer_url, "fallback": self.fallback,
            "seed": self.seed, "out_dir": self.out_dir, "noise_sigma": self.noise_sigma,
            "true_scale": self.true_scale, "max_reperception": self.max_reperception,
            "pregrasp_offset": self.pregrasp_offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            if "weights" in kw:
                w = kw["weights"]
                kw["weights"] = (ScoreWeights.parse(w) if isinstance(w, str)
                                 else ScoreWeights(float(w["w_v"]), float(w["w_g"]), float(w["w_o"])))
            if "sampler" in kw:
                kw["sampler"] = ConeSamplerConfig.from_dict(kw["sampler"])
            if "filter" in kw:
                kw["filter"] = FilterParams(**kw["filter"])
            cfg = cls(**kw)
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cfg.validate()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def pipeline_config(self, keep_renders: bool = False) -> PipelineConfig:
        return PipelineConfig(nbv_budget=self.nbv_budget, weights=self.weights,
                              sampler=self.sampler, filters=self.filter,
                              max_reperception=self.max_reperception,
                              pregrasp_offset=self.pregrasp_offset, keep_renders=keep_renders)
