"""File formats: CSV ingestion, the versioned JSON result bundle, and
plot-ready diagnostics tables."""

from __future__ import annotations

import csv
import json

import numpy as np

from .core import ObservationSeries, Segmentation

BUNDLE_MAJOR = 1
BUNDLE_MINOR = 0


def ingest_csv(path, has_header: bool = False, returns_mode: bool = True) -> ObservationSeries:
    """Load a rectangular numeric CSV as an observation series.

    In returns mode rows are the observations.  In price mode, T rows of
    positive prices become T - 1 rows of 100 * log(P_t / P_{t-1}).
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            if i == 0 and has_header:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ValueError(f"non-numeric cell in row {i + 1} of {path}") from exc
    if not rows:
        raise ValueError(f"no data rows in {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"ragged rows in {path}: widths {sorted(widths)}")
    mat = np.asarray(rows, dtype=float)
    if not returns_mode:
        if np.any(mat <= 0):
            raise ValueError("price mode requires strictly positive prices")
        if mat.shape[0] < 2:
            raise ValueError("price mode needs at least two rows")
        mat = 100.0 * np.log(mat[1:] / mat[:-1])
    return ObservationSeries(mat)


def write_series_csv(series: ObservationSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in series.data:
            writer.writerow([repr(float(v)) for v in row])


def rolling_proxy(series: ObservationSeries, window: int = 42, a: float = 0.01) -> np.ndarray:
    """Blended rolling covariance proxy for plotting against a fit.

    proxy_t = (1 - a) X_t X_t' + a * mean of X_s X_s' over the trailing
    min(window, t) observations ending at t.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if not 0.0 <= a <= 1.0:
        raise ValueError("a must lie in [0, 1]")
    s = series.outer_products()
    T = series.T
    csum = np.cumsum(s, axis=0)
    proxy = np.empty_like(s)
    for t in range(T):
        lo = max(0, t + 1 - window)
        seg = csum[t] - (csum[lo - 1] if lo > 0 else 0.0)
        proxy[t] = (1.0 - a) * s[t] + a * seg / (t + 1 - lo)
    return proxy


def bundle_from_fit(
    segmentation: Segmentation,
    v_path: np.ndarray,
    upsilon: np.ndarray,
    reports: list,
    parameters: dict,
) -> dict:
    """Assemble the result bundle.

    Break locations come from the fused-difference pattern (already in
    the segmentation), block covariances from the cone-projected path
    (eigenvalue floor guaranteed), supports from the entrywise shrinkage
    blocks (bit-exact zeros).
    """
    v_path = np.asarray(v_path, dtype=float)
    upsilon = np.asarray(upsilon, dtype=float)
    p = v_path.shape[1]
    off = ~np.eye(p, dtype=bool)
    blocks, supports = [], []
    for start, end in segmentation.block_bounds():
        cov = v_path[start - 1 : end].mean(axis=0)
        blocks.append(
            {"start": start, "end": end, "covariance": [float(x) for x in cov.ravel()]}
        )
        mask = (upsilon[start - 1] != 0.0) & off
        supports.append(sorted([int(u), int(v)] for u, v in zip(*np.nonzero(mask))))
    return {
        "schema_version": {"major": BUNDLE_MAJOR, "minor": BUNDLE_MINOR},
        "p": p,
        "T": segmentation.T,
        "changepoints": list(segmentation.breakpoints),
        "blocks": blocks,
        "support_per_block": supports,
        "solve_reports": reports,
        "parameters": parameters,
    }


def write_bundle(bundle: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(bundle, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_bundle(path) -> dict:
    with open(path) as fh:
        bundle = json.load(fh)
    major = bundle.get("schema_version", {}).get("major")
    if major != BUNDLE_MAJOR:
        raise ValueError(f"unsupported bundle schema major version: {major}")
    return bundle


def segmentation_from_bundle(bundle: dict) -> Segmentation:
    p = bundle["p"]
    covs = [
        np.asarray(b["covariance"], dtype=float).reshape(p, p) for b in bundle["blocks"]
    ]
    return Segmentation(
        breakpoints=tuple(bundle["changepoints"]), block_covs=tuple(covs), T=bundle["T"]
    )


def write_diagnostics_csv(
    theta: np.ndarray, proxy: np.ndarray, path
) -> None:
    """Per-time successive Frobenius differences of the fit and the proxy
    (row t has the difference between times t and t - 1; t = 1 gets 0)."""
    theta = np.asarray(theta, dtype=float)
    proxy = np.asarray(proxy, dtype=float)
    fit_diff = np.concatenate(
        ([0.0], np.sqrt(np.sum((theta[1:] - theta[:-1]) ** 2, axis=(1, 2))))
    )
    proxy_diff = np.concatenate(
        ([0.0], np.sqrt(np.sum((proxy[1:] - proxy[:-1]) ** 2, axis=(1, 2))))
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "frobenius_diff", "proxy_diff"])
        for t in range(theta.shape[0]):
            writer.writerow([t + 1, repr(float(fit_diff[t])), repr(float(proxy_diff[t]))])
