"""End-to-end trial orchestration: single pipeline runs, grid sweeps, and
result emission."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

from .channel import ChannelConfig, equalize, transmit
from .codec import RateAllocation, RateConfig, UNIFORM, VARIABLE, analysis, decode, encode, allocate
from .filtering import (
    Mask,
    TaskCriteria,
    compose_and_apply,
    critical_instances,
    filter_instance,
    filter_semantic,
    instance_mask,
    semantic_mask,
)
from .formats import (
    AnnotationRecord,
    InvariantViolationError,
    RESULT_COLUMNS,
    _as_float,
    _as_int,
    _as_list,
    _as_object,
    _as_str,
    _get,
    _load_json,
    parse_annotation,
    parse_criteria,
    read_ppm,
    read_segmentation,
    write_results_csv,
)
from .metrics import TrialResult, account, psnr, tc_psnr
from .scene import Image, SceneGraph, SegmentationMap, validate_scene

log = logging.getLogger(__name__)

SCHEME_INSCOM = "inscom"
SCHEME_NTSCC_LIKE = "ntscc_like"
SCHEME_UNIFORM = "uniform"
SCHEMES = (SCHEME_INSCOM, SCHEME_NTSCC_LIKE, SCHEME_UNIFORM)


class SceneLoadError(ValueError):
    """Annotation and referenced files disagree, or the scene is invalid."""


@dataclass(frozen=True)
class SweepConfig:
    """Grid of trials to run and where to put the results."""

    manifest_path: Path
    criteria_path: Path
    eta_grid: tuple[float, ...]
    snr_grid_db: tuple[float, ...]
    schemes: tuple[str, ...]
    seeds: tuple[int, ...]
    output_path: Path
    k_min: int = 1

    def __post_init__(self) -> None:
        if not self.eta_grid or not self.snr_grid_db or not self.schemes or not self.seeds:
            raise ValueError("eta_grid, snr_grid_db, schemes, and seeds must be non-empty")
        for eta in self.eta_grid:
            if not (math.isfinite(eta) and eta > 0):
                raise ValueError(f"eta values must be positive, got {eta}")
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def load_sweep_config(path: str | Path) -> SweepConfig:
    """Read a sweep config; relative paths resolve against the config file."""
    path = Path(path)
    root = _as_object(_load_json(path.read_text(encoding="utf-8")), "$")
    base = path.parent
    return SweepConfig(
        manifest_path=base / _as_str(_get(root, "manifest", ""), "manifest"),
        criteria_path=base / _as_str(_get(root, "criteria", ""), "criteria"),
        eta_grid=tuple(
            _as_float(v, f"eta_grid[{i}]")
            for i, v in enumerate(_as_list(_get(root, "eta_grid", ""), "eta_grid"))
        ),
        snr_grid_db=tuple(
            _as_float(v, f"snr_grid_db[{i}]")
            for i, v in enumerate(_as_list(_get(root, "snr_grid_db", ""), "snr_grid_db"))
        ),
        schemes=tuple(
            _as_str(v, f"schemes[{i}]")
            for i, v in enumerate(_as_list(_get(root, "schemes", ""), "schemes"))
        ),
        seeds=tuple(
            _as_int(v, f"seeds[{i}]")
            for i, v in enumerate(_as_list(_get(root, "seeds", ""), "seeds"))
        ),
        output_path=base / _as_str(_get(root, "output", ""), "output"),
    )


def load_manifest(path: str | Path) -> list[Path]:
    """Manifest file: a JSON array of annotation paths, relative to the manifest."""
    path = Path(path)
    entries = _as_list(_load_json(path.read_text(encoding="utf-8")), "$")
    return [path.parent / _as_str(v, f"[{i}]") for i, v in enumerate(entries)]


def load_annotation(path: str | Path) -> AnnotationRecord:
    return parse_annotation(Path(path).read_text(encoding="utf-8"))


def load_scene(
    record: AnnotationRecord, base_dir: str | Path
) -> tuple[Image, SegmentationMap, SceneGraph]:
    """Load the rasters an annotation references and fully validate the scene."""
    base = Path(base_dir)
    img = read_ppm(base / record.image_path)
    seg = read_segmentation(base / record.seg_path, record.class_table)
    if (record.width, record.height) != (img.width, img.height):
        raise SceneLoadError(
            f"annotation declares {record.width}x{record.height}, "
            f"image file is {img.width}x{img.height}"
        )
    sg = record.to_scene_graph()
    report = validate_scene(sg, seg, img)
    if not report.ok:
        raise SceneLoadError(
            "; ".join(f"{i.kind}: {i.detail}" for i in report.issues)
        )
    return img, seg, sg


def image_id_for(record: AnnotationRecord) -> str:
    return Path(record.image_path).stem


def derive_seed(
    master_seed: int,
    image_id: str,
    scheme: str,
    eta_index: int,
    snr_index: int,
    seed_index: int,
) -> int:
    """Stable 64-bit trial seed; makes parallel sweep execution reproducible."""
    text = f"{master_seed}|{image_id}|{scheme}|{eta_index}|{snr_index}|{seed_index}"
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def build_task_mask(
    img: Image, seg: SegmentationMap, sg: SceneGraph, criteria: TaskCriteria
) -> tuple[Image, Mask]:
    """Filter the graph, build both masks, and produce the masked image."""
    sg2 = filter_instance(filter_semantic(sg, criteria), criteria)
    boxes = [bbox for _, bbox in critical_instances(sg2)]
    m_sem = semantic_mask(seg, criteria)
    m_ins = instance_mask(boxes, img.width, img.height)
    return compose_and_apply(img, m_sem, m_ins)


def run_trial(
    img: Image,
    seg: SegmentationMap,
    sg: SceneGraph,
    criteria: TaskCriteria,
    image_id: str,
    scheme: str,
    eta: float,
    snr_db: float,
    seed: int,
    k_min: int = 1,
) -> tuple[TrialResult, Image]:
    """One transmission trial over already-loaded scene data.

    Returns the result record and the reconstructed image. The instance-
    filtered scheme codes only mask-covered blocks of the masked image; the
    two baselines transmit the unmasked source, one with activity-driven and
    one with uniform allocation. Task-critical quality is always measured
    over the criteria-derived mask, against the original image.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    x_t, m_t = build_task_mask(img, seg, sg, criteria)

    if scheme == SCHEME_INSCOM:
        cfg = RateConfig(eta=eta, k_min=k_min, scheme=VARIABLE)
        lat = analysis(x_t, m_t)
    elif scheme == SCHEME_NTSCC_LIKE:
        cfg = RateConfig(eta=eta, k_min=k_min, scheme=VARIABLE)
        lat = analysis(img, None)
    else:
        cfg = RateConfig(eta=eta, k_min=k_min, scheme=UNIFORM)
        lat = analysis(img, None)

    if lat.coded_count == 0:
        # Fully masked-out image: nothing to send, record a zero-symbol trial.
        alloc = RateAllocation.empty(lat.coded.shape)
    else:
        alloc = allocate(lat, cfg)
    frame = encode(lat, alloc)
    payload, side_equiv, cbr = account(frame, (img.width, img.height, img.channels))

    received = equalize(transmit(frame, ChannelConfig(snr_db=snr_db, seed=seed)), snr_db)
    recon = decode(received, lat.dims, cfg, (img.width, img.height))

    psnr_db = psnr(img, recon)
    if m_t.popcount == 0:
        log.warning(
            "image %s: task mask is empty; recording tc_psnr as nan", image_id
        )
        tc_db = math.nan
    else:
        tc_db = tc_psnr(img, recon, m_t)

    result = TrialResult(
        image_id=image_id,
        scheme=scheme,
        eta=eta,
        snr_db=snr_db,
        seed=seed,
        payload_symbols=payload,
        side_symbol_equiv=side_equiv,
        cbr=cbr,
        psnr_db=psnr_db,
        tc_psnr_db=tc_db,
        tc_pixel_count=m_t.popcount,
    )
    return result, recon


def run_pipeline(
    record: AnnotationRecord,
    criteria: TaskCriteria,
    scheme: str,
    eta: float,
    snr_db: float,
    seed: int,
    base_dir: str | Path = ".",
    k_min: int = 1,
) -> TrialResult:
    """Load the annotation's files and run a single trial."""
    image_id = image_id_for(record)
    try:
        img, seg, sg = load_scene(record, base_dir)
        result, _ = run_trial(
            img, seg, sg, criteria, image_id, scheme, eta, snr_db, seed, k_min=k_min
        )
    except OSError as exc:
        raise OSError(f"{image_id}: {exc}") from exc
    except ValueError as exc:
        raise ValueError(f"{image_id}: {exc}") from exc
    return result


def _result_row(result: TrialResult, seed_label: int) -> dict[str, Any]:
    row = dataclasses.asdict(result)
    row["seed"] = seed_label
    row["error"] = ""
    return row


def _error_row(
    image_id: str, scheme: str, eta: float, snr_db: float, seed_label: int, message: str
) -> dict[str, Any]:
    row: dict[str, Any] = {col: None for col in RESULT_COLUMNS}
    row.update(
        image_id=image_id,
        scheme=scheme,
        eta=eta,
        snr_db=snr_db,
        seed=seed_label,
        error=message.splitlines()[0] if message else "error",
    )
    return row


def sweep(cfg: SweepConfig, criteria: Optional[TaskCriteria] = None) -> list[dict[str, Any]]:
    """Run the full trial grid and write one CSV row per tuple.

    Rows appear in deterministic configuration order (image, scheme, eta,
    snr, seed). Per-trial failures become rows with a note in the error
    column; the sweep itself never aborts on them.
    """
    if criteria is None:
        criteria = parse_criteria(cfg.criteria_path.read_text(encoding="utf-8"))
    annotation_paths = load_manifest(cfg.manifest_path)

    rows: list[dict[str, Any]] = []
    for ann_path in annotation_paths:
        image_id = ann_path.stem
        loaded = None
        load_error = ""
        try:
            record = load_annotation(ann_path)
            image_id = image_id_for(record)
            loaded = load_scene(record, ann_path.parent)
        except (OSError, ValueError) as exc:
            load_error = str(exc)

        for scheme in cfg.schemes:
            for eta_idx, eta in enumerate(cfg.eta_grid):
                for snr_idx, snr_db in enumerate(cfg.snr_grid_db):
                    for seed_idx, master_seed in enumerate(cfg.seeds):
                        if loaded is None:
                            rows.append(
                                _error_row(image_id, scheme, eta, snr_db, master_seed, load_error)
                            )
                            continue
                        img, seg, sg = loaded
                        trial_seed = derive_seed(
                            master_seed, image_id, scheme, eta_idx, snr_idx, seed_idx
                        )
                        try:
                            result, _ = run_trial(
                                img,
                                seg,
                                sg,
                                criteria,
                                image_id,
                                scheme,
                                eta,
                                snr_db,
                                trial_seed,
                                k_min=cfg.k_min,
                            )
                            rows.append(_result_row(result, master_seed))
                        except ValueError as exc:
                            rows.append(
                                _error_row(image_id, scheme, eta, snr_db, master_seed, str(exc))
                            )
    write_results_csv(rows, cfg.output_path)
    return rows


# ---------------------------------------------------------------------------
# Optional rate--distortion chart
# ---------------------------------------------------------------------------

_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_rd_svg(rows: Sequence[dict[str, Any]], path: str | Path) -> None:
    """Tiny dependency-free line chart: mean CBR vs mean task-critical PSNR,
    one polyline per (scheme, snr) group, points ordered by eta."""
    groups: dict[tuple[str, float], dict[float, list[tuple[float, float]]]] = {}
    for row in rows:
        if row.get("error"):
            continue
        tc = row.get("tc_psnr_db")
        cbr = row.get("cbr")
        if tc is None or cbr is None:
            continue
        tc = float(tc)
        if math.isnan(tc) or math.isinf(tc):
            continue
        key = (str(row["scheme"]), float(row["snr_db"]))
        groups.setdefault(key, {}).setdefault(float(row["eta"]), []).append((float(cbr), tc))

    series = []
    for key in sorted(groups):
        pts = []
        for eta in sorted(groups[key]):
            samples = groups[key][eta]
            mean_cbr = sum(s[0] for s in samples) / len(samples)
            mean_tc = sum(s[1] for s in samples) / len(samples)
            pts.append((mean_cbr, mean_tc))
        series.append((key, pts))

    width, height, margin = 640, 480, 60
    all_pts = [p for _, pts in series for p in pts]
    if not all_pts:
        Path(path).write_text(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"/>\n',
            encoding="ascii",
        )
        return
    xs = [p[0] for p in all_pts]
    ys = [p[1] for p in all_pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def sx(x: float) -> float:
        return margin + (x - x_lo) / x_span * (width - 2 * margin)

    def sy(y: float) -> float:
        return height - margin - (y - y_lo) / y_span * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 15}" text-anchor="middle" '
        f'font-size="14">channel bandwidth ratio</text>',
        f'<text x="18" y="{height // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {height // 2})">task-critical PSNR (dB)</text>',
    ]
    for i, ((scheme, snr_db), pts) in enumerate(series):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        parts.append(
            f'<text x="{width - margin + 5}" y="{margin + 16 * i}" font-size="12" '
            f'fill="{color}">{scheme} @ {snr_db:g} dB</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="ascii")
