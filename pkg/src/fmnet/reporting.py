"""Rendering of image grids, confusion heatmaps and the collated HTML report.

All images are written with Pillow so repeated runs produce byte-identical
files. The report is a single self-contained HTML document: four tables
(enhancement quality, latent divergence, through-the-wall SSIM,
classification accuracy) plus embedded image grids.
"""

from __future__ import annotations

import base64
import html
import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

CELL_SCALE = 2  # display upscaling of 48x80 cells
PAD = 4
LABEL_H = 12


def _to_cell(values: np.ndarray) -> Image.Image:
    img = np.flipud(np.clip(values, 0.0, 1.0))  # positive Doppler on top
    img = np.round(img * 255.0).astype(np.uint8)
    cell = Image.fromarray(img, mode="L")
    return cell.resize((cell.width * CELL_SCALE, cell.height * CELL_SCALE), Image.NEAREST)


def image_grid(
    rows: list[list[np.ndarray]],
    row_labels: list[str] | None = None,
    col_labels: list[str] | None = None,
) -> Image.Image:
    """Compose spectrograms into a labelled grid (rows x columns)."""
    cells = [[_to_cell(v) for v in row] for row in rows]
    cw = max(c.width for row in cells for c in row)
    ch = max(c.height for row in cells for c in row)
    n_rows = len(cells)
    n_cols = max(len(row) for row in cells)
    label_w = 70 if row_labels else 0
    header_h = LABEL_H + 2 if col_labels else 0
    width = label_w + n_cols * (cw + PAD) + PAD
    height = header_h + n_rows * (ch + PAD) + PAD
    canvas = Image.new("L", (width, height), color=255)
    draw = ImageDraw.Draw(canvas)
    if col_labels:
        for j, label in enumerate(col_labels):
            draw.text((label_w + PAD + j * (cw + PAD), 1), label, fill=0)
    for i, row in enumerate(cells):
        y = header_h + PAD + i * (ch + PAD)
        if row_labels:
            draw.text((2, y + ch // 2 - 5), row_labels[i], fill=0)
        for j, cell in enumerate(row):
            canvas.paste(cell, (label_w + PAD + j * (cw + PAD), y))
    return canvas


def save_image_grid(path: Path | str, rows, row_labels=None, col_labels=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image_grid(rows, row_labels, col_labels).save(path)
    return path


def save_confusion_png(path: Path | str, confusion: list[list[int]], classes: list[str]) -> Path:
    """Row-normalised grayscale heatmap with counts drawn in each cell."""
    cm = np.asarray(confusion, dtype=float)
    n = cm.shape[0]
    cell = 36
    label = 30
    size = label + n * cell + 2
    canvas = Image.new("L", (size, size), color=255)
    draw = ImageDraw.Draw(canvas)
    row_sums = cm.sum(axis=1, keepdims=True)
    shade = cm / np.maximum(row_sums, 1.0)
    for i in range(n):
        draw.text((2, label + i * cell + cell // 2 - 5), classes[i], fill=0)
        draw.text((label + i * cell + cell // 2 - 8, 2), classes[i], fill=0)
        for j in range(n):
            value = 255 - int(round(shade[i, j] * 200))
            x0, y0 = label + j * cell, label + i * cell
            draw.rectangle([x0, y0, x0 + cell - 1, y0 + cell - 1], fill=value, outline=120)
            draw.text((x0 + 4, y0 + cell // 2 - 5), str(int(cm[i, j])), fill=0 if value > 100 else 255)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    canvas.save(path)
    return path


def _embed_png(path: Path) -> str:
    data = base64.b64encode(path.read_bytes()).decode()
    return f'<img alt="{html.escape(path.name)}" src="data:image/png;base64,{data}"/>'


def _table(title: str, headers: list[str], rows: list[list[str]]) -> str:
    head = "".join(f"<th>{html.escape(h)}</th>" for h in headers)
    body = "".join(
        "<tr>" + "".join(f"<td>{html.escape(str(c))}</td>" for c in row) + "</tr>" for row in rows
    )
    return f"<h2>{html.escape(title)}</h2>\n<table><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>"


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def _scan_artifacts(root: Path) -> dict:
    found = {"enhancement_eval": [], "latent_kld": [], "domain_shift": [], "regimes": [], "grids": []}
    for path in sorted(root.rglob("*.json")):
        try:
            payload = json.loads(path.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError):
            continue
        if isinstance(payload, dict) and payload.get("kind") in found:
            found[payload["kind"]].append(payload)
        elif isinstance(payload, dict) and payload.get("kind") == "regime_results":
            found["regimes"].append(payload)
    for path in sorted(root.rglob("*.png")):
        if "grid" in path.name or "confusion" in path.name:
            found["grids"].append(path)
    return found


def _enhancement_table(reports: list[dict]) -> str:
    headers = ["Activity", "Pixel loss (meas vs sim)", "SSIM (meas vs sim)"]
    models = [r["model_id"] for r in reports]
    for m in models:
        headers += [f"Pixel loss ({m} vs sim)", f"SSIM ({m} vs sim)"]
    activities = sorted({a for r in reports for a in r["per_activity"]})
    rows = []
    for activity in activities:
        base = reports[0]["per_activity"].get(activity, {}) if reports else {}
        row = [activity, _fmt(base.get("pixel_loss_meas_vs_sim")), _fmt(base.get("ssim_meas_vs_sim"))]
        for r in reports:
            cell = r["per_activity"].get(activity, {})
            row += [_fmt(cell.get("pixel_loss_enh_vs_sim")), _fmt(cell.get("ssim_enh_vs_sim"))]
        rows.append(row)
    if not rows:
        rows = [["no evaluation artifacts found", *[""] * (len(headers) - 1)]]
    return _table("Pixel loss and SSIM before and after enhancement", headers, rows)


def _kld_table(reports: list[dict]) -> str:
    headers = ["Activity"] + [
        f"{r['model_id']} ({r['extras'].get('metric', 'latent_kld')})" for r in reports
    ]
    activities = sorted({a for r in reports for a in r["per_activity"]})
    rows = []
    for activity in activities:
        row = [activity]
        for r in reports:
            metric = r["extras"].get("metric", "latent_kld")
            row.append(_fmt(r["per_activity"].get(activity, {}).get(metric)))
        rows.append(row)
    if not rows:
        rows = [["no latent divergence artifacts found", *[""] * max(0, len(headers) - 1)]]
    return _table("Matched-pair latent divergence", headers, rows)


def _ttw_table(reports: list[dict]) -> str:
    headers = ["Activity"] + [f"{r['model_id']} vs measured" for r in reports] + [
        f"{r['model_id']} vs clean" for r in reports
    ]
    activities = sorted({a for r in reports for a in r["per_activity"]})
    rows = []
    for activity in activities:
        row = [activity]
        for r in reports:
            row.append(_fmt(r["per_activity"].get(activity, {}).get("ssim_enh_vs_meas")))
        for r in reports:
            row.append(_fmt(r["per_activity"].get(activity, {}).get("ssim_enh_vs_sim")))
        rows.append(row)
    if not rows:
        rows = [["no through-the-wall artifacts found", *[""] * max(0, len(headers) - 1)]]
    return _table("Through-the-wall SSIM comparison", headers, rows)


def _regimes_table(payloads: list[dict]) -> str:
    results = [r for p in payloads for r in p.get("results", [])]
    sizes = sorted({r["train_size"] for r in results})
    regimes = sorted({r["regime"] for r in results})
    headers = ["Training samples"] + regimes
    rows = []
    for size in sizes:
        row = [str(size)]
        for regime in regimes:
            match = [r for r in results if r["train_size"] == size and r["regime"] == regime]
            row.append(f"{match[0]['accuracy'] * 100.0:.1f}%" if match else "-")
        rows.append(row)
    if not rows:
        rows = [["no classification artifacts found", *[""] * max(0, len(headers) - 1)]]
    return _table("Classification accuracy by training scheme", headers, rows)


def build_report(root: Path | str, out_path: Path | str) -> Path:
    """Collate every recognised artifact under `root` into one HTML document."""
    root = Path(root)
    found = _scan_artifacts(root)
    sections = [
        _enhancement_table(found["enhancement_eval"]),
        _kld_table(found["latent_kld"]),
        _ttw_table(found["domain_shift"]),
        _regimes_table(found["regimes"]),
    ]
    images = "\n".join(_embed_png(p) for p in found["grids"])
    doc = (
        "<!DOCTYPE html>\n<html><head><meta charset='utf-8'><title>Enhancement workbench report</title>"
        "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin:1em 0}"
        "td,th{border:1px solid #999;padding:4px 8px;text-align:right}th{background:#eee}"
        "td:first-child,th:first-child{text-align:left}</style></head><body>"
        "<h1>Enhancement workbench report</h1>\n"
        + "\n".join(sections)
        + "\n<h2>Figure grids</h2>\n"
        + images
        + "\n</body></html>\n"
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(doc)
    return out_path
