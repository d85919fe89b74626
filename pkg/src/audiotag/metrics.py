"""Equal error rate, precision/recall/F-score and fold-averaged reports.

EER is read off the false-negative-rate versus false-positive-rate curve
swept over the score set: operating points are placed at every distinct
score (ties grouped into one step) and the crossing of FNR and FPR is
linearly interpolated between the adjacent vertices. Being a rank
statistic it is invariant under strictly increasing score transforms.

Decisions for precision/recall use a strict ``score > threshold`` rule
with the default threshold at 0.4.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import TAGS
from .errors import DataError


class UndefinedMetricError(DataError):
    """Raised when a tag has only one truth class, making EER meaningless."""


def roc_points(scores, truths):
    """Stepwise (threshold, fpr, fnr) vertices of the detection curve.

    Thresholds sweep from above the top score (nothing predicted positive:
    fpr 0, fnr 1) down through every distinct score to below the bottom
    one (everything positive: fpr 1, fnr 0), with tied scores grouped.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truths = np.asarray(truths).astype(bool)
    if scores.shape != truths.shape or scores.ndim != 1:
        raise DataError("scores and truths must be matching 1-D arrays")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores must be finite")
    n_pos = int(truths.sum())
    n_neg = len(truths) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            "need both classes to sweep a detection curve (%d pos / %d neg)"
            % (n_pos, n_neg)
        )

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truths[order]

    distinct = np.nonzero(np.diff(sorted_scores))[0]
    step_ends = np.concatenate([distinct, [len(scores) - 1]])  # inclusive

    tp = np.cumsum(sorted_truth)[step_ends]
    predicted_pos = step_ends + 1
    fp = predicted_pos - tp

    fpr = np.concatenate([[0.0], fp / n_neg])
    fnr = np.concatenate([[1.0], (n_pos - tp) / n_pos])
    thresholds = np.concatenate([[np.inf], sorted_scores[step_ends]])
    return thresholds, fpr, fnr


def compute_eer(scores, truths):
    """Interpolated equal error rate of one tag's score set."""
    _, fpr, fnr = roc_points(scores, truths)
    diff = fnr - fpr  # starts at +1, ends at -1
    for i in range(len(diff) - 1):
        if diff[i] == 0.0:
            return float(fnr[i])
        if diff[i] > 0.0 >= diff[i + 1]:
            t = diff[i] / (diff[i] - diff[i + 1])
            return float(fnr[i] + t * (fnr[i + 1] - fnr[i]))
    return float(fnr[-1])  # diff never crossed: curve ends on the axis


@dataclass
class PrfResult:
    precision: float
    recall: float
    f_score: float
    tp: int
    fp: int
    fn: int
    degenerate: bool = False  # a zero denominator was reported as 0


def compute_prf(scores, truths, threshold=0.4):
    """Precision, recall and F-score at a strict ``score > threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    truths = np.asarray(truths).astype(bool)
    predicted = scores > threshold
    tp = int(np.sum(predicted & truths))
    fp = int(np.sum(predicted & ~truths))
    fn = int(np.sum(~predicted & truths))

    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f_score, degenerate = 0.0, True
    else:
        f_score = 2.0 * precision * recall / (precision + recall)
    return PrfResult(precision, recall, f_score, tp, fp, fn, degenerate)


@dataclass
class TagReport:
    tag: str
    eer: float  # nan when undefined for this fold
    precision: float = math.nan
    recall: float = math.nan
    f_score: float = math.nan
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass
class FoldReport:
    fold: object
    tags: dict = field(default_factory=dict)  # tag -> TagReport

    @property
    def average_eer(self):
        values = [r.eer for r in self.tags.values() if not math.isnan(r.eer)]
        return float(np.mean(values)) if values else math.nan


@dataclass
class EvalReport:
    folds: list = field(default_factory=list)  # FoldReport, in fold order
    per_tag_eer: dict = field(default_factory=dict)  # tag -> fold-averaged EER
    average_eer: float = math.nan
    per_tag_prf: dict = field(default_factory=dict)  # tag -> (P, R, F)


def evaluate_fold(score_rows, fold="?", threshold=0.4):
    """Per-tag EER and PRF for one fold.

    ``score_rows`` is a list of (chunk_id, scores, truth) with 7-dim score
    and binary truth vectors. Tags with single-class truth are reported as
    NaN with a warning and excluded from averages.
    """
    if not score_rows:
        raise DataError("no scored chunks supplied")
    scores = np.stack([np.asarray(r[1], dtype=np.float64) for r in score_rows])
    truths = np.stack([np.asarray(r[2], dtype=np.float64) for r in score_rows]) > 0.5

    report = FoldReport(fold=fold)
    for k, tag in enumerate(TAGS):
        try:
            eer = compute_eer(scores[:, k], truths[:, k])
        except UndefinedMetricError:
            warnings.warn(
                "fold %s tag %s has single-class truth; EER reported as N/A" % (fold, tag)
            )
            eer = math.nan
        prf = compute_prf(scores[:, k], truths[:, k], threshold=threshold)
        report.tags[tag] = TagReport(
            tag=tag,
            eer=eer,
            precision=prf.precision,
            recall=prf.recall,
            f_score=prf.f_score,
            tp=prf.tp,
            fp=prf.fp,
            fn=prf.fn,
        )
    return report


def aggregate_folds(fold_reports):
    """Unweighted per-tag mean across folds, then mean over the 7 tags.

    NaN (undefined) cells are excluded from their tag's average with a
    warning; a tag missing from any fold report is an error.
    """
    if not fold_reports:
        raise DataError("no fold reports to aggregate")
    for rep in fold_reports:
        missing = [t for t in TAGS if t not in rep.tags]
        if missing:
            raise DataError("fold %s lacks tags %s" % (rep.fold, missing))

    out = EvalReport(folds=list(fold_reports))
    for tag in TAGS:
        cells = [rep.tags[tag].eer for rep in fold_reports]
        valid = [c for c in cells if not math.isnan(c)]
        if len(valid) < len(cells):
            warnings.warn("tag %s: %d fold(s) undefined, averaging the rest"
                          % (tag, len(cells) - len(valid)))
        out.per_tag_eer[tag] = float(np.mean(valid)) if valid else math.nan
        ps = [rep.tags[tag].precision for rep in fold_reports]
        rs = [rep.tags[tag].recall for rep in fold_reports]
        fs = [rep.tags[tag].f_score for rep in fold_reports]
        out.per_tag_prf[tag] = (float(np.mean(ps)), float(np.mean(rs)), float(np.mean(fs)))
    tag_means = [v for v in out.per_tag_eer.values() if not math.isnan(v)]
    out.average_eer = float(np.mean(tag_means)) if tag_means else math.nan
    return out


def _fmt(x):
    return "N/A" if (isinstance(x, float) and math.isnan(x)) else "%.3f" % x


def report_rows(report, system=""):
    """Rows of the per-tag table: header then one row per metric set."""
    header = ["system", *TAGS, "Average"]
    row = [system] + [_fmt(report.per_tag_eer[t]) for t in TAGS] + [_fmt(report.average_eer)]
    return [header, row]


def write_report_csv(path, report, system=""):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(report_rows(report, system=system))


def render_markdown(reports_by_name):
    """Markdown table of per-tag EERs, one row per system."""
    lines = ["| System | " + " | ".join(TAGS) + " | Average |",
             "|" + "---|" * (len(TAGS) + 2)]
    for name, report in reports_by_name.items():
        cells = [_fmt(report.per_tag_eer[t]) for t in TAGS] + [_fmt(report.average_eer)]
        lines.append("| " + name + " | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_det_curve_csv(path, scores, truths):
    """Dump (threshold, fpr, fnr) vertices for external plotting."""
    thresholds, fpr, fnr = roc_points(scores, truths)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "fnr"])
        for t, a, b in zip(thresholds, fpr, fnr):
            writer.writerow(["inf" if math.isinf(t) else "%.10g" % t, "%.10g" % a, "%.10g" % b])
