"""Assembly of the full analysis bundle (summary JSON, CSV tables, skip
report, executive text) and deterministic file emission."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (
    FactorMatrix,
    JointRiskConfig,
    TooFewRowsError,
    conditional_matrix,
    correlation_matrix,
    cross_statistics,
    ecdf,
    group_statistics,
    high_risk_share,
    joint_risk_index,
    kernel_density,
    mae,
    spearman_rho,
)
from .calibration import calibrate_kappa, uniform_weights
from .config import config_to_dict
from .encoding import ETA
from .model import (
    ModelConfig,
    ModelWeights,
    Severity,
    classify,
    composite_score,
    score_record,
    score_records,
)
from .records import CveRecord
from .vector import AttackVector, ImpactLevel, variant_label

SCORE_BINS = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
BIN_LABELS = ("[0,2)", "[2,4)", "[4,6)", "[6,8)", "[8,10]")
HIGH_RISK_THRESHOLD = 7.0
SUMMARY_SCHEMA_PATH = Path(__file__).parent / "schemas" / "summary.schema.json"

Table = tuple[tuple[str, ...], list[tuple]]


class EmptyDatasetError(ValueError):
    """No records remain to analyze."""


class UnscoreableAllError(ValueError):
    """No record has both a parseable vector and an official score."""


@dataclass
class ReportBundle:
    """Everything one analysis run computed: a JSON-able summary, named CSV
    tables, and the skip report."""

    summary: dict
    tables: dict[str, Table]
    skip_report: list[tuple[str, str]]


def _json_safe(value):
    """Recursively convert numpy scalars and replace NaN/inf with None."""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return None if math.isnan(v) or math.isinf(v) else v
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def _cell(value):
    """CSV cell normalization: blank for NaN/None, plain Python scalars."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "" if math.isnan(v) else v
    if isinstance(value, np.integer):
        return int(value)
    return value


def _matrix_table(row_header: str, row_domain, col_domain, values) -> Table:
    header = (row_header, *col_domain)
    rows = [
        (label, *(_cell(v) for v in row)) for label, row in zip(row_domain, np.asarray(values))
    ]
    return header, rows


def _stats_table(label: str, stats) -> Table:
    header = (label, "count", "mean", "std", "median", "q1", "q3")
    rows = [
        (g.category, g.count, _cell(g.mean), _cell(g.std), _cell(g.median), _cell(g.q1), _cell(g.q3))
        for g in stats
    ]
    return header, rows


def _stats_summary(stats) -> list[dict]:
    return [
        {
            "category": g.category,
            "count": g.count,
            "mean": g.mean,
            "std": g.std,
            "median": g.median,
            "q1": g.q1,
            "q3": g.q3,
        }
        for g in stats
    ]


def _safe_spearman(pred, truth):
    try:
        return spearman_rho(pred, truth)
    except TooFewRowsError:
        return math.nan


def _method_comparison(scored, config: ModelConfig, lenient: bool) -> list[tuple]:
    """Model-vs-official agreement for the active config and for the
    equal-weight preset with its scale refit on the same records."""
    officials = [sr.record.official_score for sr in scored]
    model_scores = [sr.composite for sr in scored]
    rows = [
        (
            "weighted_model",
            mae(model_scores, officials),
            _safe_spearman(model_scores, officials),
            config.weights.kappa,
        )
    ]
    preset = uniform_weights(delta=config.weights.delta)
    preset_cfg = ModelConfig(maps=config.maps, weights=preset, thresholds=config.thresholds)
    preset_scored = [score_record(sr.record, preset_cfg, lenient=lenient) for sr in scored]
    kappa = calibrate_kappa(preset_scored, delta=config.weights.delta)
    refit = ModelWeights(
        preset.alpha, preset.beta, preset.gamma,
        preset.lambda_c, preset.lambda_i, preset.lambda_a,
        kappa, preset.delta,
    )
    preset_scores = [composite_score(sr.base_risk, sr.impact, refit) for sr in preset_scored]
    rows.append(
        (
            "uniform_baseline",
            mae(preset_scores, officials),
            _safe_spearman(preset_scores, officials),
            kappa,
        )
    )
    return rows


def build_bundle(
    records: list[CveRecord],
    config: ModelConfig | None = None,
    *,
    exclude_ids=frozenset(),
    lenient: bool = False,
    seed: int | None = None,
    cache_info: dict | None = None,
) -> ReportBundle:
    """Compute every report statistic for one cache of records.

    ``exclude_ids`` (typically the calibration sample) are dropped before
    anything is computed, so they can never leak into the output tables.
    """
    config = config or ModelConfig()
    records = list(records)
    exclude = frozenset(exclude_ids)
    kept = [r for r in records if r.cve_id not in exclude]
    if not kept:
        raise EmptyDatasetError("no records to analyze after exclusions")

    scored_all, skipped = score_records(kept, config, lenient=lenient)
    skip_rows = sorted(
        [(rec.cve_id, reason) for rec, reason in skipped]
        + [
            (sr.record.cve_id, "no official score")
            for sr in scored_all
            if sr.record.official_score is None
        ]
    )
    scored = [sr for sr in scored_all if sr.record.official_score is not None]
    if not scored:
        raise UnscoreableAllError("no record has both a parseable vector and an official score")

    t = config.thresholds
    n = len(scored)
    officials = np.array([sr.record.official_score for sr in scored])
    ids = [sr.record.cve_id for sr in scored]
    tables: dict[str, Table] = {}
    summary: dict = {}

    # ---- score distribution -------------------------------------------------
    bin_counts, _ = np.histogram(officials, bins=SCORE_BINS)
    tables["severity_histogram"] = (
        ("score_bin", "count", "share"),
        [(label, int(c), int(c) / n) for label, c in zip(BIN_LABELS, bin_counts)],
    )
    summary["severity_histogram"] = [
        {"bin": label, "count": int(c), "share": int(c) / n}
        for label, c in zip(BIN_LABELS, bin_counts)
    ]
    summary["official_score"] = {
        "mean": float(officials.mean()),
        "median": float(np.median(officials)),
        "std": float(officials.std(ddof=1)) if n > 1 else math.nan,
        "min": float(officials.min()),
        "max": float(officials.max()),
    }

    sev_counts = {s.label: 0 for s in Severity}
    for sr in scored:
        sev_counts[classify(sr.record.official_score, t).label] += 1
    tables["severity_mix"] = (
        ("severity", "count", "share"),
        [(label, c, c / n) for label, c in sev_counts.items()],
    )
    summary["severity_mix"] = {
        label: {"count": c, "share": c / n} for label, c in sev_counts.items()
    }

    # ---- attack vector ------------------------------------------------------
    av_counts = {variant_label(m): 0 for m in AttackVector}
    for sr in scored:
        av_counts[variant_label(sr.vector.av)] += 1
    tables["attack_vector_counts"] = (
        ("attack_vector", "count", "share"),
        [(label, c, c / n) for label, c in av_counts.items()],
    )
    av_stats = group_statistics(scored, "AV", "official", thresholds=t)
    tables["attack_vector_score_stats"] = _stats_table("attack_vector", av_stats)
    av_high = high_risk_share(scored, "AV", HIGH_RISK_THRESHOLD, thresholds=t)
    tables["attack_vector_high_risk"] = (
        ("attack_vector", "count", "high_risk_count", "share"),
        [(h.category, h.count, h.high_risk, _cell(h.share)) for h in av_high],
    )
    summary["attack_vector"] = {
        "counts": av_counts,
        "shares": {label: c / n for label, c in av_counts.items()},
        "network_share": av_counts["Network"] / n,
        "score_stats": _stats_summary(av_stats),
        "high_risk_share": {
            h.category: {"count": h.count, "high_risk": h.high_risk, "share": h.share}
            for h in av_high
        },
    }

    # ---- privileges and complexity ------------------------------------------
    pr_stats = group_statistics(scored, "PR", "official", thresholds=t)
    tables["privilege_score_stats"] = _stats_table("privileges_required", pr_stats)
    summary["privileges"] = {"score_stats": _stats_summary(pr_stats)}

    def add_conditional(prefix: str, x: str, y: str, row_header: str):
        cm = conditional_matrix(scored, x, y, thresholds=t)
        tables[f"{prefix}_counts"] = _matrix_table(row_header, cm.row_domain, cm.col_domain, cm.counts)
        tables[f"{prefix}_probs"] = _matrix_table(row_header, cm.row_domain, cm.col_domain, cm.probs)
        return cm

    ac_sev = add_conditional("complexity_severity", "AC", "official_severity", "attack_complexity")
    add_conditional("av_severity", "AV", "official_severity", "attack_vector")
    ui_c = add_conditional("ui_confidentiality", "UI", "C", "user_interaction")
    av_cia = add_conditional("av_combined_impact", "AV", "combined_cia", "attack_vector")
    summary["complexity"] = {
        "severity_counts": {
            row: dict(zip(ac_sev.col_domain, (int(v) for v in counts)))
            for row, counts in zip(ac_sev.row_domain, ac_sev.counts)
        }
    }

    acpr = cross_statistics(scored, "AC", "PR", "official", thresholds=t)
    tables["complexity_privilege_mean_score"] = _matrix_table(
        "attack_complexity", acpr.row_domain, acpr.col_domain, acpr.means
    )
    tables["complexity_privilege_counts"] = _matrix_table(
        "attack_complexity", acpr.row_domain, acpr.col_domain, acpr.counts
    )
    ia = cross_statistics(scored, "I", "A", "official", thresholds=t)
    tables["integrity_availability_mean_score"] = _matrix_table(
        "integrity", ia.row_domain, ia.col_domain, ia.means
    )
    tables["integrity_availability_counts"] = _matrix_table(
        "integrity", ia.row_domain, ia.col_domain, ia.counts
    )

    high_subset = [sr for sr in scored if sr.record.official_score >= HIGH_RISK_THRESHOLD]
    if high_subset:
        hm = conditional_matrix(high_subset, "AC", "PR", thresholds=t)
        high_counts = hm.counts
        high_rows, high_cols = hm.row_domain, hm.col_domain
    else:
        high_rows = acpr.row_domain
        high_cols = acpr.col_domain
        high_counts = np.zeros((len(high_rows), len(high_cols)), dtype=int)
    tables["high_risk_complexity_privilege"] = _matrix_table(
        "attack_complexity", high_rows, high_cols, high_counts
    )

    ui_idx = {label: k for k, label in enumerate(ui_c.row_domain)}
    c_high = ui_c.col_domain.index("High")
    summary["cross"] = {
        "low_complexity_no_privilege_mean": float(
            acpr.means[acpr.row_domain.index("Low"), acpr.col_domain.index("None")]
        ),
        "dual_high_impact_mean": float(
            ia.means[ia.row_domain.index("High"), ia.col_domain.index("High")]
        ),
        "ui_high_confidentiality_share": {
            label: (
                float(ui_c.probs[ui_idx[label], c_high])
                if label not in ui_c.empty_rows
                else math.nan
            )
            for label in ui_c.row_domain
        },
        "av_severe_cia_share": {
            label: (
                float(av_cia.probs[k, av_cia.col_domain.index("High")])
                if label not in av_cia.empty_rows
                else math.nan
            )
            for k, label in enumerate(av_cia.row_domain)
        },
    }

    # ---- CIA impact levels --------------------------------------------------
    cia_rows = []
    cia_summary = {}
    for comp_label, attr in (("C", "c"), ("I", "i"), ("A", "a")):
        level_counts = {variant_label(level): 0 for level in ImpactLevel}
        for sr in scored:
            level_counts[variant_label(getattr(sr.vector, attr))] += 1
        cia_summary[comp_label] = {
            label: {"count": c, "share": c / n} for label, c in level_counts.items()
        }
        cia_rows.extend((comp_label, label, c, c / n) for label, c in level_counts.items())
    tables["cia_impact_levels"] = (("component", "level", "count", "share"), cia_rows)
    summary["cia_impact_levels"] = cia_summary

    eta_rows = np.array([[ETA[sr.vector.c], ETA[sr.vector.i], ETA[sr.vector.a]] for sr in scored])
    bin_index = np.digitize(officials, SCORE_BINS[1:-1])
    bin_rows = []
    for b, label in enumerate(BIN_LABELS):
        mask = bin_index == b
        count = int(mask.sum())
        if count:
            means = eta_rows[mask].mean(axis=0)
            bin_rows.append((label, count, float(means[0]), float(means[1]), float(means[2])))
        else:
            bin_rows.append((label, 0, "", "", ""))
    tables["cia_by_score_bin"] = (
        ("score_bin", "count", "mean_confidentiality", "mean_integrity", "mean_availability"),
        bin_rows,
    )

    # ---- correlations -------------------------------------------------------
    fm = FactorMatrix.from_scored(scored)
    corr = None
    corr_reason = None
    try:
        corr = correlation_matrix(fm)
    except TooFewRowsError as exc:
        corr_reason = str(exc)
    if corr is not None:
        matrix = corr.values
        cvss_idx = corr.labels.index("CVSS")
        summary["correlations"] = {
            "defined": True,
            "labels": list(corr.labels),
            "matrix": [list(row) for row in matrix],
            "cvss": {
                label: matrix[k, cvss_idx]
                for k, label in enumerate(corr.labels)
                if label != "CVSS"
            },
            "constant_factors": list(corr.constant_labels),
            "undefined_pairs": [list(pair) for pair in corr.undefined_pairs()],
        }
    else:
        matrix = np.full((len(fm.factor_names), len(fm.factor_names)), math.nan)
        summary["correlations"] = {
            "defined": False,
            "reason": corr_reason,
            "labels": list(fm.factor_names),
        }
    tables["correlation_matrix"] = _matrix_table("factor", fm.factor_names, fm.factor_names, matrix)

    # ---- ECDF and per-vector densities --------------------------------------
    cdf = ecdf(officials)
    values, cumulative = cdf.curve()
    tables["ecdf"] = (
        ("score", "cumulative_share"),
        list(zip((float(v) for v in values), (float(c) for c in cumulative))),
    )
    summary["ecdf"] = {
        "n": n,
        "at_tau1": float(cdf(t.tau1)),
        "at_tau2": float(cdf(t.tau2)),
        "at_tau3": float(cdf(t.tau3)),
    }

    bandwidths = {}
    kde_skipped = []
    for member in AttackVector:
        label = variant_label(member)
        mask = np.array([sr.vector.av is member for sr in scored])
        vals = officials[mask]
        if vals.size < 2:
            kde_skipped.append(label)
            continue
        est = kernel_density(vals)
        bandwidths[label] = est.bandwidth
        tables[f"kde_{label.lower()}"] = (
            ("score", "density"),
            list(zip((float(g) for g in est.grid), (float(d) for d in est.density))),
        )
    summary["kde"] = {"bandwidths": bandwidths, "skipped": kde_skipped}

    # ---- joint risk ---------------------------------------------------------
    if corr is not None:
        jr_cfg = JointRiskConfig.from_data(corr, fm)
        indices = [joint_risk_index(row, corr, jr_cfg) for row in fm.rows]
        order = sorted(zip(ids, indices), key=lambda kv: (-kv[1], kv[0]))
        summary["joint_risk"] = {
            "defined": True,
            "mean": float(np.mean(indices)),
            "max": float(np.max(indices)),
            "top": [{"cve_id": cid, "index": val} for cid, val in order[:10]],
        }
        jr_rows = list(zip(ids, indices))
    else:
        summary["joint_risk"] = {"defined": False, "mean": math.nan, "max": math.nan, "top": []}
        jr_rows = [(cid, "") for cid in ids]
    tables["joint_risk"] = (("cve_id", "joint_risk_index"), jr_rows)

    # ---- model scores and agreement -----------------------------------------
    tables["model_scores"] = (
        ("cve_id", "official_score", "base_risk", "impact_score", "composite_score", "severity"),
        [
            (
                sr.record.cve_id,
                sr.record.official_score,
                sr.base_risk,
                sr.impact,
                sr.composite,
                sr.severity.label,
            )
            for sr in scored
        ],
    )
    comparison = _method_comparison(scored, config, lenient)
    tables["method_comparison"] = (("method", "mae", "spearman_rho", "kappa"), [
        (method, m, _cell(rho), kappa) for method, m, rho, kappa in comparison
    ])
    summary["method_comparison"] = [
        {"method": method, "mae": m, "spearman_rho": rho, "kappa": kappa}
        for method, m, rho, kappa in comparison
    ]

    # ---- bookkeeping --------------------------------------------------------
    summary["dataset"] = {
        "records_in_cache": len(records),
        "records_excluded": len(records) - len(kept),
        "records_scored": len(scored_all),
        "records_analyzed": n,
        "records_skipped": len(skip_rows),
        "skip_reasons": dict(sorted(Counter(reason for _, reason in skip_rows).items())),
    }
    summary["thresholds"] = {
        "tau1": t.tau1,
        "tau2": t.tau2,
        "tau3": t.tau3,
        "high_risk": HIGH_RISK_THRESHOLD,
    }
    summary["provenance"] = {
        "tool": "cverisk",
        "version": __version__,
        "seed": seed,
        "config": config_to_dict(config),
        "cache_schema": None,
        "cache_retrieved_at": None,
        "dataset_sha256": None,
        **(cache_info or {}),
    }
    summary["tables"] = sorted(tables)
    return ReportBundle(summary=_json_safe(summary), tables=tables, skip_report=skip_rows)


# --------------------------------------------------------------------------
# rendering and file output
# --------------------------------------------------------------------------

_SEVERITY_ORDER = ("Low", "Medium", "High", "Critical")


def render_executive_summary(summary: dict) -> str:
    """Plain-text digest of one analysis run, findings ordered by share.

    Renders identically from a freshly built summary and from one reread
    out of summary.json.
    """
    ds = summary["dataset"]
    lines = [
        "Vulnerability risk report",
        "=========================",
        "",
        f"Records analyzed: {ds['records_analyzed']} of {ds['records_in_cache']} in cache "
        f"({ds['records_skipped']} skipped, {ds['records_excluded']} excluded)",
    ]
    score = summary["official_score"]
    lines.append(f"Official score: mean {score['mean']:.2f}, median {score['median']:.2f}")
    mix = summary["severity_mix"]
    high_share = sum(mix[label]["share"] for label in ("High", "Critical") if label in mix)
    lines.append(f"Share at or above the high band: {high_share:.1%}")
    lines.append("")
    lines.append("High-risk share by attack vector (descending):")
    ranked = sorted(
        (
            (label, cell)
            for label, cell in summary["attack_vector"]["high_risk_share"].items()
            if cell["count"] > 0 and cell["share"] is not None
        ),
        key=lambda kv: (-kv[1]["share"], kv[0]),
    )
    for pos, (label, cell) in enumerate(ranked, start=1):
        lines.append(
            f"  {pos}. {label:<9} {cell['share']:6.1%}  ({cell['high_risk']} of {cell['count']})"
        )
    lines.append("")
    mix_text = " | ".join(
        f"{label} {mix[label]['share']:.1%}" for label in _SEVERITY_ORDER if label in mix
    )
    lines.append(f"Severity mix (official): {mix_text}")
    e = summary["ecdf"]
    th = summary["thresholds"]
    lines.append(
        f"Cumulative score shares: {e['at_tau1']:.1%} <= {th['tau1']:g}, "
        f"{e['at_tau2']:.1%} <= {th['tau2']:g}, {e['at_tau3']:.1%} <= {th['tau3']:g}"
    )
    corr = summary["correlations"]
    if corr.get("defined"):
        pairs = ", ".join(
            f"{label} {value:+.2f}"
            for label, value in sorted(
                corr["cvss"].items(), key=lambda kv: (-abs(kv[1] or 0.0), kv[0])
            )
            if value is not None
        )
        lines.append(f"Correlation with the official score: {pairs}")
    else:
        lines.append(f"Correlations undefined: {corr.get('reason') or 'insufficient data'}")
    for row in summary["method_comparison"]:
        rho = row["spearman_rho"]
        rho_text = f"{rho:.3f}" if rho is not None else "n/a"
        lines.append(
            f"{row['method']}: MAE {row['mae']:.3f}, Spearman {rho_text} "
            f"(kappa {row['kappa']:.2f})"
        )
    return "\n".join(lines) + "\n"


def write_csv(path: Path, header, rows) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_bundle(bundle: ReportBundle, out_dir, fmt: str = "all") -> list[Path]:
    """Write summary.json, every CSV table, the skip report, and the
    executive summary into ``out_dir``; returns the files written."""
    if fmt not in ("all", "json", "csv", "text"):
        raise ValueError(f"unknown output format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if fmt in ("all", "json"):
        path = out / "summary.json"
        path.write_text(
            json.dumps(bundle.summary, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        written.append(path)
    if fmt in ("all", "csv"):
        for name in sorted(bundle.tables):
            header, rows = bundle.tables[name]
            path = out / f"{name}.csv"
            write_csv(path, header, rows)
            written.append(path)
        path = out / "skip_report.csv"
        write_csv(path, ("cve_id", "reason"), bundle.skip_report)
        written.append(path)
    if fmt in ("all", "text"):
        path = out / "executive_summary.txt"
        path.write_text(render_executive_summary(bundle.summary), encoding="utf-8")
        written.append(path)
    return written
