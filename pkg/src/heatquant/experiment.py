"""Encode -> predict -> decode sweeps and offline evaluation.

A sweep runs every combination of stride, encoder, predictor and decoder
over the same trials. Trial ``i`` draws all of its randomness from
``RngStream(seed, i)`` and its children, so results do not depend on how
trials are split across workers. Trials are processed in fixed-size chunks
and statistics are reduced in trial order, which makes report bodies
byte-identical for any worker count.

Report columns (CSV and the JSON ``rows`` objects), in order:

``config_key, stride, encoder, predictor, decoder, samples, mean_error,
max_error, mean_abs_dx, mean_abs_dy, bias_x, bias_y, nme`` followed by one
``pck@<alpha>`` column per configured alpha. Errors and biases are in
pixels, ``nme`` in percent, ``pck@*`` as fractions.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .decode import (
    FourNeighborOfMax,
    NineNeighborUnion,
    TopK,
    argmax_decode,
    bias_corrected_decode,
    expectation_decode,
    quarter_shift_decode,
)
from .errors import ConfigError, CountMismatchError, EmptyEvaluationError, InvalidNormalizationError
from .heatmap import GaussianConfig, binary_heatmaps, expected_heatmaps, gaussian_heatmaps, sample_cells
from .landmarks import LandmarkRecord, ingest_landmarks
from .metrics import BBoxSqrt, FixedDistance, InterOcular, InterPupil, normalization_distance
from .predict import AdditiveNoise, AnnotatorConfig, Blur, Composite, Perfect, annotate_batch, apply_stages
from .rng import RngStream

CHUNK_TRIALS = 128

# child-stream tags within a trial
TAG_LANDMARKS = 0
TAG_ANNOTATE = 1
TAG_SAMPLED = 2
TAG_PREDICTOR = 16  # + predictor index

BASE_COLUMNS = [
    "config_key", "stride", "encoder", "predictor", "decoder", "samples", "mean_error", "max_error",
    "mean_abs_dx", "mean_abs_dy", "bias_x", "bias_y", "nme",
]


# --------------------------------------------------------------------------- config


def _fmt(v) -> str:
    return f"{v:g}"


def _keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(where, "must be an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}", "unknown key")
    return d


def _number(d, key, where, default=None, lo=None, hi=None, integer=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}.{key}", "required")
        return default
    return _check_number(d[key], f"{where}.{key}", lo, hi, integer)


def _check_number(v, field, lo=None, hi=None, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(field, f"must be a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(field, f"must be an integer, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(field, f"must lie in [{lo}, {hi}], got {v!r}")
    return int(v) if integer else float(v)


def _list(d, key, where, default=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key}", "required")
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}.{key}", "must be a non-empty list")
    return v


@dataclass(frozen=True)
class EncoderSpec:
    kind: str  # expected | binary | sampled | gaussian
    threshold: float = 0.5
    sigma: float = 0.0
    radius: int | None = None
    center: str = "quantized"

    @property
    def key(self) -> str:
        if self.kind == "binary":
            return f"binary(t={_fmt(self.threshold)})"
        if self.kind == "gaussian":
            return f"gaussian(sigma={_fmt(self.sigma)},t={_fmt(self.threshold)},center={self.center})"
        return self.kind

    @classmethod
    def parse(cls, d, where) -> EncoderSpec:
        _keys(d, {"kind", "threshold", "sigma", "radius", "center"}, where)
        kind = d.get("kind")
        if kind not in ("expected", "binary", "sampled", "gaussian"):
            raise ConfigError(f"{where}.kind", f"unknown encoder {kind!r}")
        t = _number(d, "threshold", where, 0.5, 0, 1)
        if kind != "gaussian":
            return cls(kind, t)
        radius = d.get("radius")
        if radius is not None:
            radius = _number(d, "radius", where, lo=0, integer=True)
        center = d.get("center", "quantized")
        if center not in ("quantized", "exact"):
            raise ConfigError(f"{where}.center", "must be 'quantized' or 'exact'")
        return cls(kind, t, _number(d, "sigma", where, lo=0), radius, center)


@dataclass(frozen=True)
class DecoderSpec:
    kind: str  # argmax | bias_corrected | quarter_shift | topk | four_neighbor | nine_neighbor
    threshold: float = 0.5
    k: int = 0
    renormalize: bool = True

    @property
    def key(self) -> str:
        suffix = "" if self.renormalize else ",raw"
        if self.kind == "bias_corrected":
            return f"bias_corrected(t={_fmt(self.threshold)})"
        if self.kind == "topk":
            return f"topk(k={self.k}{suffix})"
        if self.kind in ("four_neighbor", "nine_neighbor"):
            return f"{self.kind}({suffix.lstrip(',')})" if suffix else self.kind
        return self.kind

    @property
    def strategy(self):
        return {"topk": lambda: TopK(self.k), "four_neighbor": FourNeighborOfMax, "nine_neighbor": NineNeighborUnion}[
            self.kind
        ]()

    @property
    def is_expectation(self) -> bool:
        return self.kind in ("topk", "four_neighbor", "nine_neighbor")

    def decode(self, values, s) -> np.ndarray:
        if self.kind == "argmax":
            return argmax_decode(values, s)
        if self.kind == "bias_corrected":
            return bias_corrected_decode(values, s, self.threshold)
        if self.kind == "quarter_shift":
            return quarter_shift_decode(values, s)
        return expectation_decode(values, s, self.strategy, self.renormalize)

    @classmethod
    def parse(cls, d, where) -> list[DecoderSpec]:
        _keys(d, {"kind", "threshold", "k", "renormalize"}, where)
        kind = d.get("kind")
        if kind not in ("argmax", "bias_corrected", "quarter_shift", "topk", "four_neighbor", "nine_neighbor"):
            raise ConfigError(f"{where}.kind", f"unknown decoder {kind!r}")
        renorm = d.get("renormalize", True)
        if not isinstance(renorm, bool):
            raise ConfigError(f"{where}.renormalize", "must be true or false")
        if kind == "bias_corrected":
            return [cls(kind, _number(d, "threshold", where, 0.5, 0, 1))]
        if kind == "topk":
            ks = d.get("k")
            ks = ks if isinstance(ks, list) else [ks]
            out = []
            for i, k in enumerate(ks):
                if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                    raise ConfigError(f"{where}.k[{i}]", f"must be a positive integer, got {k!r}")
                out.append(cls(kind, k=k, renormalize=renorm))
            return out
        return [cls(kind, renormalize=renorm)]


def _parse_stage(d, where):
    _keys(d, {"kind", "level", "sigma", "stages"}, where)
    kind = d.get("kind")
    if kind == "perfect":
        return Perfect()
    if kind == "noise":
        return AdditiveNoise(_number(d, "level", where, lo=0))
    if kind == "blur":
        return Blur(_number(d, "sigma", where, lo=0))
    if kind == "composite":
        return Composite(tuple(_parse_stage(s, f"{where}.stages[{i}]") for i, s in enumerate(_list(d, "stages", where))))
    raise ConfigError(f"{where}.kind", f"unknown predictor {kind!r}")


def predictor_key(kind) -> str:
    if isinstance(kind, Perfect):
        return "perfect"
    if isinstance(kind, AdditiveNoise):
        return f"noise({_fmt(kind.level)})"
    if isinstance(kind, Blur):
        return f"blur({_fmt(kind.sigma)})"
    return "+".join(predictor_key(s) for s in kind.stages) or "perfect"


def _is_perfect(kind) -> bool:
    if isinstance(kind, Composite):
        return all(_is_perfect(s) for s in kind.stages)
    return (
        isinstance(kind, Perfect)
        or (isinstance(kind, AdditiveNoise) and kind.level == 0)
        or (isinstance(kind, Blur) and kind.sigma == 0)
    )


@dataclass(frozen=True)
class MetricConfig:
    normalization: object = FixedDistance(100.0)
    alphas: tuple[float, ...] = (0.05, 0.1)
    pck_length: float | None = None  # None: use the normalization distance
    per_image_mean: bool = False

    @classmethod
    def parse(cls, d, where="metrics") -> MetricConfig:
        _keys(d, {"normalization", "alpha", "pck_length", "per_image_mean"}, where)
        norm = parse_normalization(d.get("normalization", {"kind": "fixed", "distance": 100.0}), f"{where}.normalization")
        alphas = tuple(_check_number(a, f"{where}.alpha[{i}]", lo=0, hi=1) for i, a in enumerate(_list(d, "alpha", where, [0.05, 0.1])))
        length = d.get("pck_length")
        if length is not None:
            length = _number(d, "pck_length", where, lo=0)
            if length <= 0:
                raise ConfigError(f"{where}.pck_length", "must be positive")
        per_image = d.get("per_image_mean", False)
        if not isinstance(per_image, bool):
            raise ConfigError(f"{where}.per_image_mean", "must be true or false")
        return cls(norm, alphas, length, per_image)


def parse_normalization(d, where="normalization"):
    _keys(d, {"kind", "distance", "left", "right"}, where)
    kind = d.get("kind")
    if kind == "fixed":
        dist = _number(d, "distance", where, lo=0)
        if dist <= 0:
            raise ConfigError(f"{where}.distance", "must be positive")
        return FixedDistance(dist)
    if kind == "bbox":
        return "bbox"
    if kind in ("inter_ocular", "inter_pupil"):
        for side in ("left", "right"):
            if side not in d:
                raise ConfigError(f"{where}.{side}", "required")
        if kind == "inter_ocular":
            return InterOcular(int(d["left"]), int(d["right"]))
        return InterPupil(d["left"], d["right"])
    raise ConfigError(f"{where}.kind", f"unknown normalization {kind!r}")


def _record_norm(norm, rec: LandmarkRecord | None, true_pts: np.ndarray):
    """Per-image normalization; ``"bbox"`` is resolved from the record."""
    if norm == "bbox":
        if rec is None or rec.bbox is None:
            raise InvalidNormalizationError("bbox normalization needs a bbox on every ground-truth record")
        return normalization_distance(BBoxSqrt(rec.bbox[2], rec.bbox[3]), true_pts)
    return normalization_distance(norm, true_pts)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    trials: int
    width: int
    height: int
    strides: tuple[float, ...]
    encoders: tuple[EncoderSpec, ...]
    decoders: tuple[DecoderSpec, ...]
    predictors: tuple = (Perfect(),)
    annotator: AnnotatorConfig | None = None
    landmark_count: int = 1
    margin: int = 1
    landmark_path: str | None = None
    landmark_format: str | None = None
    metrics: MetricConfig = field(default_factory=MetricConfig)
    output_path: str | None = None
    output_format: str = "json"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


_TOP_KEYS = {
    "seed", "trials", "grid", "strides", "encoders", "decoders", "predictor", "annotator",
    "landmarks", "metrics", "output",
}


def parse_config(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a config document; errors name the offending field."""
    _keys(raw, _TOP_KEYS, "config")
    seed = _number(raw, "seed", "config", 0, 0, 2**64 - 1, integer=True)
    trials = _number(raw, "trials", "config", 100, lo=1, integer=True)
    grid = _keys(raw.get("grid", {"width": 64, "height": 64}), {"width", "height"}, "grid")
    width = _number(grid, "width", "grid", lo=2, integer=True)
    height = _number(grid, "height", "grid", lo=2, integer=True)
    strides = tuple(
        _check_number(s, f"strides[{i}]", lo=1) for i, s in enumerate(_list(raw, "strides", "config", [4]))
    )
    encoders = tuple(EncoderSpec.parse(e, f"encoders[{i}]") for i, e in enumerate(_list(raw, "encoders", "config", [{"kind": "expected"}])))
    decoders = tuple(
        d for i, e in enumerate(_list(raw, "decoders", "config")) for d in DecoderSpec.parse(e, f"decoders[{i}]")
    )
    pred_raw = raw.get("predictor", {"kind": "perfect"})
    pred_list = pred_raw if isinstance(pred_raw, list) else [pred_raw]
    if not pred_list:
        raise ConfigError("predictor", "must not be empty")
    predictors = tuple(
        _parse_stage(p, "predictor" if not isinstance(pred_raw, list) else f"predictor[{i}]") for i, p in enumerate(pred_list)
    )
    if len(predictors) > 1000:
        raise ConfigError("predictor", "at most 1000 predictors")

    ann_raw = _keys(raw.get("annotator", {"kind": "none"}), {"kind"}, "annotator")
    ann_kind = ann_raw.get("kind", "none")
    if ann_kind not in ("none", "unbiased_stochastic", "deterministic_round"):
        raise ConfigError("annotator.kind", f"unknown annotator {ann_kind!r}")
    annotator = None if ann_kind == "none" else AnnotatorConfig(ann_kind)

    lm = _keys(raw.get("landmarks", {"source": "synthetic"}), {"source", "count", "margin", "path", "format"}, "landmarks")
    source = lm.get("source", "synthetic")
    count, margin, path, fmt = 1, 1, None, None
    if source == "synthetic":
        count = _number(lm, "count", "landmarks", 1, lo=1, integer=True)
        margin = _number(lm, "margin", "landmarks", 1, lo=0, integer=True)
        if 2 * margin + 1 >= min(width, height):
            raise ConfigError("landmarks.margin", "leaves no room inside the grid")
    elif source == "file":
        if not isinstance(lm.get("path"), str):
            raise ConfigError("landmarks.path", "required for file source")
        path = lm["path"]
        if base_dir is not None and not os.path.isabs(path):
            path = str(base_dir / path)
        fmt = lm.get("format")
        if fmt not in (None, "csv", "json"):
            raise ConfigError("landmarks.format", "must be 'csv' or 'json'")
    else:
        raise ConfigError("landmarks.source", f"unknown source {source!r}")

    metrics = MetricConfig.parse(raw.get("metrics", {}))
    if metrics.normalization == "bbox" and source != "file":
        raise ConfigError("metrics.normalization", "bbox normalization needs file landmarks")
    out = _keys(raw.get("output", {}), {"path", "format"}, "output")
    out_format = out.get("format", "json")
    if out_format not in ("json", "csv"):
        raise ConfigError("output.format", "must be 'json' or 'csv'")
    return ExperimentConfig(
        seed, trials, width, height, strides, encoders, decoders, predictors, annotator,
        count, margin, path, fmt, metrics, out.get("path"), out_format, raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", str(exc)) from None
    return parse_config(raw, path.parent)


# --------------------------------------------------------------------------- sweep


@dataclass
class ExperimentReport:
    columns: list[str]
    rows: list[dict]
    checks: list[dict] = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def body(self) -> dict:
        return {"columns": self.columns, "rows": self.rows, "checks": self.checks, **self.extra}

    @property
    def body_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.body(), sort_keys=True).encode()).hexdigest()

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> str:
        doc = {
            "environment": self.environment,
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "body_hash": self.body_hash,
            "config": self.config,
            **self.body(),
        }
        return json.dumps(doc, indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in self.columns])
        return buf.getvalue()

    def write(self, path, fmt: str = "json") -> None:
        """Write atomically: a temp file in the target directory, then rename."""
        path = Path(path)
        text = self.to_json() if fmt == "json" else self.to_csv()
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


@dataclass
class _Cell:
    si: int
    ei: int
    pi: int
    di: int

    def key(self, cfg: ExperimentConfig) -> str:
        return "|".join(
            [
                f"s={_fmt(cfg.strides[self.si])}",
                f"enc={cfg.encoders[self.ei].key}",
                f"pred={predictor_key(cfg.predictors[self.pi])}",
                f"dec={cfg.decoders[self.di].key}",
            ]
        )


def _cells(cfg: ExperimentConfig) -> list[_Cell]:
    return [
        _Cell(si, ei, pi, di)
        for si in range(len(cfg.strides))
        for ei in range(len(cfg.encoders))
        for pi in range(len(cfg.predictors))
        for di in range(len(cfg.decoders))
    ]


def _encode(enc: EncoderSpec, points, s, dims, trial_rngs, k):
    if enc.kind == "expected":
        return expected_heatmaps(points, s, dims)
    if enc.kind == "binary":
        return binary_heatmaps(points, s, dims, enc.threshold)
    if enc.kind == "gaussian":
        v = gaussian_heatmaps(points, s, dims, GaussianConfig(enc.sigma, enc.radius), enc.threshold, enc.center)
        return v / v.sum(axis=(1, 2), keepdims=True)
    # sampled: per-trial streams, two uniforms per landmark
    cells = np.concatenate(
        [sample_cells(points[i * k : (i + 1) * k], s, dims, r.child(TAG_SAMPLED)) for i, r in enumerate(trial_rngs)]
    )
    width, height = dims
    out = np.zeros((len(points), height, width))
    out[np.arange(len(points)), cells[:, 1], cells[:, 0]] = 1.0
    return out


def _trial_points(cfg: ExperimentConfig, trial_ids, records, s, trial_rngs) -> np.ndarray:
    if records is not None:
        return np.concatenate([records[t].landmarks for t in trial_ids])
    span = np.array([cfg.width - 1 - 2 * cfg.margin, cfg.height - 1 - 2 * cfg.margin], dtype=np.float64)
    u = np.concatenate([r.child(TAG_LANDMARKS).uniform((cfg.landmark_count, 2)) for r in trial_rngs])
    return s * (cfg.margin + u * span)


def _run_chunk(cfg: ExperimentConfig, trial_ids, records):
    """Signed residuals ``(n, 2)`` per cell for the given trials, in trial order."""
    trial_rngs = [RngStream(cfg.seed, t) for t in trial_ids]
    k = cfg.landmark_count if records is None else records[0].count
    dims = (cfg.width, cfg.height)
    out = {}
    truths = {}
    for si, s in enumerate(cfg.strides):
        truth = _trial_points(cfg, trial_ids, records, s, trial_rngs)
        truths[si] = truth
        gt = truth
        if cfg.annotator is not None:
            gt = np.concatenate(
                [annotate_batch(truth[i * k : (i + 1) * k], cfg.annotator, r.child(TAG_ANNOTATE)) for i, r in enumerate(trial_rngs)]
            )
        for ei, enc in enumerate(cfg.encoders):
            base = _encode(enc, gt, s, dims, trial_rngs, k)
            for pi, pred in enumerate(cfg.predictors):
                streams = [r.child(TAG_PREDICTOR + pi) for r in trial_rngs]

                def draw(shape, streams=streams):
                    return np.concatenate([st.uniform((k,) + tuple(shape[1:])) for st in streams])

                values = apply_stages(base, pred, draw)
                for di, dec in enumerate(cfg.decoders):
                    out[(si, ei, pi, di)] = dec.decode(values, s) - truth
    return out, truths


def _image_norms(cfg, truth, trial_ids, records, k) -> np.ndarray:
    norm = cfg.metrics.normalization
    if isinstance(norm, FixedDistance):
        return np.full(len(trial_ids), normalization_distance(norm, truth[:k]))
    return np.array([
        _record_norm(norm, None if records is None else records[t], truth[i * k : (i + 1) * k])
        for i, t in enumerate(trial_ids)
    ])


def _stats(m: MetricConfig, residual, norms, vis, k):
    err = np.hypot(residual[:, 0], residual[:, 1])
    d = np.repeat(norms, k)
    e, dv, rv = err[vis], d[vis], residual[vis]
    if m.per_image_mean:
        img_err = np.where(vis, err / d, 0.0).reshape(-1, k).sum(axis=1)
        img_n = vis.reshape(-1, k).sum(axis=1)
        nme = 100.0 * float(np.mean(img_err[img_n > 0] / img_n[img_n > 0]))
    else:
        nme = 100.0 * float(np.mean(e / dv))
    length = dv if m.pck_length is None else m.pck_length
    row = {
        "samples": int(vis.sum()),
        "mean_error": float(e.mean()),
        "max_error": float(e.max()),
        "mean_abs_dx": float(np.abs(rv[:, 0]).mean()),
        "mean_abs_dy": float(np.abs(rv[:, 1]).mean()),
        "bias_x": float(rv[:, 0].mean()),
        "bias_y": float(rv[:, 1].mean()),
        "nme": nme,
    }
    for a in m.alphas:
        row[f"pck@{_fmt(a)}"] = float(np.mean(e <= a * length))
    return row


def _invariant_checks(cfg: ExperimentConfig, rows, cells) -> list[dict]:
    """Assertions that hold for any run with a perfect predictor and no annotator."""
    if cfg.annotator is not None:
        return []
    checks = []
    for row, cell in zip(rows, cells):
        enc, dec, s = cfg.encoders[cell.ei], cfg.decoders[cell.di], cfg.strides[cell.si]
        if not _is_perfect(cfg.predictors[cell.pi]):
            continue
        lossless = (
            enc.kind == "expected"
            and dec.is_expectation
            and dec.renormalize
            and (dec.kind != "topk" or dec.k >= 4)
        )
        if lossless:
            checks.append({"name": f"lossless[{row['config_key']}]", "observed": row["max_error"], "expected": 0.0,
                           "tolerance": 1e-9, "passed": row["max_error"] <= 1e-9})
        elif enc.kind == "binary" and dec.kind == "bias_corrected" and dec.threshold == enc.threshold:
            bound = math.sqrt(2) * s / 2
            checks.append({"name": f"vanilla_bound[{row['config_key']}]", "observed": row["max_error"],
                           "expected": bound, "tolerance": 1e-9, "passed": row["max_error"] <= bound + 1e-9})
    return checks


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Run every cell of the sweep for ``cfg.trials`` trials."""
    records = None
    trials = cfg.trials
    if cfg.landmark_path is not None:
        records = ingest_landmarks(cfg.landmark_path, cfg.landmark_format)
        if "trials" in cfg.raw and trials > len(records):
            raise ConfigError("trials", f"{trials} trials requested but the landmark file has {len(records)} records")
        trials = min(trials, len(records)) if "trials" in cfg.raw else len(records)
    k = cfg.landmark_count if records is None else records[0].count
    chunks = [list(range(a, min(a + CHUNK_TRIALS, trials))) for a in range(0, trials, CHUNK_TRIALS)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ids: _run_chunk(cfg, ids, records), chunks))
    else:
        results = [_run_chunk(cfg, ids, records) for ids in chunks]

    cells = _cells(cfg)
    trial_ids = list(range(trials))
    vis = np.ones(trials * k, dtype=bool)
    if records is not None:
        vis = np.concatenate([
            np.ones(k, dtype=bool) if records[t].visibility is None else records[t].visibility for t in trial_ids
        ])
    norms = {
        si: _image_norms(cfg, np.concatenate([r[1][si] for r in results]), trial_ids, records, k)
        for si in range(len(cfg.strides))
    }
    columns = BASE_COLUMNS + [f"pck@{_fmt(a)}" for a in cfg.metrics.alphas]
    rows = []
    for cell in cells:
        key = (cell.si, cell.ei, cell.pi, cell.di)
        residual = np.concatenate([r[0][key] for r in results])
        row = {
            "config_key": cell.key(cfg),
            "stride": cfg.strides[cell.si],
            "encoder": cfg.encoders[cell.ei].key,
            "predictor": predictor_key(cfg.predictors[cell.pi]),
            "decoder": cfg.decoders[cell.di].key,
        }
        row.update(_stats(cfg.metrics, residual, norms[cell.si], vis, k))
        rows.append({c: row[c] for c in columns})
    return ExperimentReport(
        columns,
        rows,
        _invariant_checks(cfg, rows, cells),
        environment={"seed": cfg.seed, "version": __version__},
        config=cfg.raw,
        extra={"config_hash": cfg.config_hash},
    )


# --------------------------------------------------------------------------- evaluation


def evaluate_records(preds, gts, metrics: MetricConfig) -> ExperimentReport:
    """NME and PCK per record and pooled; records are matched by image id."""
    if len(preds) != len(gts):
        raise CountMismatchError(f"{len(preds)} prediction records vs {len(gts)} ground-truth records")
    by_id = {r.image_id: r for r in preds}
    if len(by_id) != len(preds) or set(by_id) != {r.image_id for r in gts}:
        raise CountMismatchError("prediction and ground-truth image ids differ")
    columns = ["image_id", "landmarks", "mean_error", "nme"] + [f"pck@{_fmt(a)}" for a in metrics.alphas]
    rows, all_err, all_norm, all_len = [], [], [], []
    for gt in gts:
        pred = by_id[gt.image_id]
        if pred.count != gt.count:
            raise CountMismatchError(f"{gt.image_id}: {pred.count} predicted vs {gt.count} ground-truth landmarks")
        vis = np.ones(gt.count, dtype=bool) if gt.visibility is None else gt.visibility
        if not vis.any():
            continue
        d = _record_norm(metrics.normalization, gt, gt.landmarks)
        diff = pred.landmarks - gt.landmarks
        err = np.hypot(diff[:, 0], diff[:, 1])[vis]
        length = d if metrics.pck_length is None else metrics.pck_length
        row = {"image_id": gt.image_id, "landmarks": int(vis.sum()), "mean_error": float(err.mean()),
               "nme": float(100.0 * np.mean(err / d))}
        for a in metrics.alphas:
            row[f"pck@{_fmt(a)}"] = float(np.mean(err <= a * length))
        rows.append(row)
        all_err.append(err)
        all_norm.append(np.full(len(err), d))
        all_len.append(np.full(len(err), length))
    if not rows:
        raise EmptyEvaluationError("no visible landmarks to evaluate")
    err, norm, length = (np.concatenate(a) for a in (all_err, all_norm, all_len))
    pooled = {
        "image_id": "__pooled__",
        "landmarks": int(len(err)),
        "mean_error": float(err.mean()),
        "nme": float(np.mean([r["nme"] for r in rows])) if metrics.per_image_mean else float(100.0 * np.mean(err / norm)),
    }
    for a in metrics.alphas:
        pooled[f"pck@{_fmt(a)}"] = float(np.mean(err <= a * length))
    rows.append(pooled)
    return ExperimentReport(columns, rows, environment={"version": __version__}, extra={"pooled": pooled})


def evaluate_predictions(pred_path, gt_path, metrics: MetricConfig, fmt: str | None = None) -> ExperimentReport:
    return evaluate_records(ingest_landmarks(pred_path, fmt), ingest_landmarks(gt_path, fmt), metrics)
