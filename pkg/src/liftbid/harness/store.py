"""On-disk artifacts: JSONL impression logs, label and user CSVs, and report files.

Run directory layout::

    <run>/<arm>/impressions.jsonl   one submitted bid per line (IMPRESSION_FIELDS)
    <run>/<arm>/labels.csv          user_id, s_final, y_obs
    <run>/<arm>/users.csv           user_id, features..., phi_initial
    <run>/run.json                  cpc and per-arm bid requests, budgets and horizons
    <run>/report.{csv,json}, pacing.csv, phi_bins.csv, win_bids.csv
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..domain import FEATURE_NAMES, Mechanism, bin_index
from ..pacing import PacingConfig, PacingState
from .engine import AuctionLog, ArmRun
from .metrics import METRICS, MetricsReport

IMPRESSION_FIELDS = (
    "user_id", "day", "hour", "auction_id", "slot", "features", "exposure_count_before",
    "bin_before", "bid", "won", "price_paid", "clearing_price", "mechanism", "clicked",
    "phi", "raw_value",
)
LABEL_FIELDS = ("user_id", "s_final", "y_obs")
USER_FIELDS = ("user_id",) + FEATURE_NAMES + ("phi_initial",)
PACING_FIELDS = ("hour", "arm", "alpha", "window_spend")
REPORT_FIELDS = ("table", "arm", "metric", "value", "se")
PHI_BIN_FIELDS = ("arm", "bin", "lower", "upper", "users", "mean_visits", "se")
NULL = "null"


def dumps(obj) -> str:
    """Canonical JSON used for every JSON artifact."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _cell(v):
    return NULL if v is None else v


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _read_csv(path: Path, header) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != tuple(header):
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return rows[1:]


def write_impressions(path, log: AuctionLog, user_ids: np.ndarray, features: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    order = np.argsort(user_ids, kind="stable")
    pos = order[np.searchsorted(user_ids, log.user_id, sorter=order)]
    feats = [tuple(r) for r in features.tolist()]
    bins = bin_index(log.count_before).tolist()
    cols = {k: getattr(log, k).tolist() for k in AuctionLog.DTYPES}
    with open(path, "w") as fh:
        for k in range(len(log)):
            won, second = cols["won"][k], cols["second_price"][k]
            cp = cols["clearing_price"][k]
            rec = {
                "user_id": cols["user_id"][k],
                "day": cols["day"][k],
                "hour": cols["hour"][k],
                "auction_id": cols["auction_id"][k],
                "slot": cols["slot"][k],
                "features": list(feats[pos[k]]),
                "exposure_count_before": cols["count_before"][k],
                "bin_before": bins[k],
                "bid": cols["bid"][k],
                "won": won,
                "price_paid": cols["price_paid"][k],
                "clearing_price": None if cp < 0 else cp,
                "mechanism": (Mechanism.SECOND_PRICE if second else Mechanism.FIRST_PRICE).value,
                "clicked": cols["clicked"][k],
                "phi": cols["phi"][k],
                "raw_value": cols["raw_value"][k],
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_impressions(path) -> AuctionLog:
    cols = {k: [] for k in AuctionLog.DTYPES}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            rec = json.loads(line)
            if tuple(rec) != IMPRESSION_FIELDS:
                raise ValueError(f"{path}:{lineno}: unexpected fields {sorted(rec)}")
            for k in ("user_id", "day", "hour", "auction_id", "slot", "bid", "won",
                      "price_paid", "clicked", "phi", "raw_value"):
                cols[k].append(rec[k])
            cols["count_before"].append(rec["exposure_count_before"])
            cols["second_price"].append(rec["mechanism"] == Mechanism.SECOND_PRICE.value)
            cp = rec["clearing_price"]
            cols["clearing_price"].append(-1 if cp is None else cp)
    return AuctionLog(**{k: np.asarray(cols[k], dtype=t) for k, t in AuctionLog.DTYPES.items()})


def write_labels(path, user_ids, s_final, y_obs) -> None:
    _write_csv(Path(path), LABEL_FIELDS, zip(np.asarray(user_ids).tolist(),
                                             np.asarray(s_final).tolist(),
                                             np.asarray(y_obs).tolist()))


def read_labels(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = _read_csv(Path(path), LABEL_FIELDS)
    a = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return a[:, 0], a[:, 1], a[:, 2]


def write_users(path, user_ids, features, phi_initial) -> None:
    rows = (
        [u, *f, p]
        for u, f, p in zip(np.asarray(user_ids).tolist(), np.asarray(features).tolist(),
                           np.asarray(phi_initial).tolist())
    )
    _write_csv(Path(path), USER_FIELDS, rows)


def read_users(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = _read_csv(Path(path), USER_FIELDS)
    a = np.array(rows, dtype=float).reshape(-1, len(USER_FIELDS))
    return a[:, 0].astype(np.int64), a[:, 1:-1], a[:, -1]


def write_arm(run_dir, run: ArmRun) -> None:
    d = Path(run_dir) / run.arm
    write_impressions(d / "impressions.jsonl", run.log, run.user_id, run.features)
    write_labels(d / "labels.csv", run.user_id, run.s_final, run.visits)
    write_users(d / "users.csv", run.user_id, run.features, run.phi_initial)


def read_arm(run_dir, arm: str, requests: int = 0, pacing: PacingState | None = None) -> ArmRun:
    d = Path(run_dir) / arm
    uid, s_final, y = read_labels(d / "labels.csv")
    uid2, features, phi0 = read_users(d / "users.csv")
    if not np.array_equal(uid, uid2):
        raise ValueError(f"{d}: labels.csv and users.csv list different users")
    log = read_impressions(d / "impressions.jsonl")
    return ArmRun(arm, uid, features, log, s_final[:, None], y, phi0, pacing, requests)


def write_run(run_dir, runs: dict[str, ArmRun], cpc: int) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"cpc": cpc, "arms": {}}
    pacing_rows = []
    for arm, run in runs.items():
        write_arm(run_dir, run)
        entry = {"bid_requests": int(run.requests)}
        if run.pacing is not None:
            entry["budget"] = int(run.pacing.budget)
            entry["horizon_hours"] = int(run.pacing.horizon_hours)
            entry["final_alpha"] = float(run.pacing.alpha)
            entry["spend"] = int(run.pacing.spend)
            pacing_rows += [(h, arm, a, w) for h, a, w in run.pacing.trajectory]
        manifest["arms"][arm] = entry
    (run_dir / "run.json").write_text(dumps(manifest))
    _write_csv(run_dir / "pacing.csv", PACING_FIELDS, pacing_rows)


def read_run(run_dir) -> tuple[dict[str, ArmRun], int]:
    """Rebuild the per-arm runs (log, labels, pacing trajectory) written by `write_run`."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "run.json").read_text())
    traj: dict[str, list] = {}
    if (run_dir / "pacing.csv").exists():
        for h, arm, alpha, spend in _read_csv(run_dir / "pacing.csv", PACING_FIELDS):
            traj.setdefault(arm, []).append((int(h), float(alpha), int(spend)))
    runs = {}
    for arm, entry in manifest["arms"].items():
        pacing = None
        if "budget" in entry:
            pacing = PacingState(entry["budget"], entry["horizon_hours"], PacingConfig(),
                                 alpha=entry["final_alpha"], spend=entry["spend"],
                                 trajectory=traj.get(arm, []))
        runs[arm] = read_arm(run_dir, arm, entry["bid_requests"], pacing)
    return runs, int(manifest["cpc"])


def emit_report(report: MetricsReport, out_dir, fmt: str = "csv") -> list[Path]:
    """Write report.<fmt> plus the pacing trajectory, phi-bin visit histogram and win-bid quantiles."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        p = out / "report.json"
        p.write_text(dumps(report.to_dict()))
    else:
        p = out / "report.csv"
        rows = [
            (table, arm, m, t[arm][m].value, t[arm][m].se)
            for table, t in (("raw", report.raw), ("normalized", report.normalized))
            for arm in report.arms
            for m in METRICS
        ]
        _write_csv(p, REPORT_FIELDS, rows)
    written.append(p)
    _write_csv(out / "pacing.csv", PACING_FIELDS, report.pacing)
    _write_csv(out / "phi_bins.csv", PHI_BIN_FIELDS, ([r[k] for k in PHI_BIN_FIELDS] for r in report.phi_bins))
    bid_fields = ("arm", "wins") + tuple(k for k in (report.win_bids[0] if report.win_bids else {})
                                         if k not in ("arm", "wins"))
    _write_csv(out / "win_bids.csv", bid_fields, ([r[k] for k in bid_fields] for r in report.win_bids))
    written += [out / "pacing.csv", out / "phi_bins.csv", out / "win_bids.csv"]
    return written


def load_report(path) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text()))


def read_report_csv(path) -> dict:
    """{(table, arm, metric): (value, se)} from a report CSV; 'null' becomes None."""
    def num(s):
        return None if s == NULL else float(s)

    return {(t, a, m): (num(v), num(se)) for t, a, m, v, se in _read_csv(Path(path), REPORT_FIELDS)}
