"""Experiment orchestration CLI.

One JSON config drives every stage; paper-protocol defaults are pre-filled
so a minimal config (dataset paths, family, output_dir) reproduces the
standard setup. A master seed derives per-stage seeds through a documented
hash split, and a manifest of config hash plus artifact checksums makes
reruns verifiable.

Subcommands: extract-features, train-dnn, train-dae, encode-dae, train-gmm,
train-misvm, train-chunksvm, predict, evaluate, compare, run.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dae as dae_mod
from . import dataset as ds
from . import features as feats
from . import metrics, storage, tagger
from .baselines import gmm as gmm_mod
from .baselines import svm as svm_mod
from .errors import AudiotagError, ConfigError, DataError, NumericError

FAMILIES = ("dnn", "dae+dnn", "gmm", "misvm", "chunksvm")

DEFAULT_CONFIG = {
    "family": "dnn",
    "feature_kind": "mbk",
    "folds": [0, 1, 2, 3, 4],
    "seed": 1234,
    "include_raw": True,
    "dae_code_stride": 1,
    "tagger": {},
    "dae": {},
    "gmm": {"n_components": 8, "n_iters": 20},
    "svm": {"reg_a": 1.0, "epochs": 200, "max_outer_iters": 20},
}


def derive_seed(master, label):
    """Per-stage seed: low 8 bytes of sha256("<master>/<label>")."""
    digest = hashlib.sha256(("%d/%s" % (master, label)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)


def config_hash(config):
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")
    ).hexdigest()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file %s does not exist" % path)
    except json.JSONDecodeError as exc:
        raise ConfigError("config file %s is not valid JSON: %s" % (path, exc))
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    for key, value in user.items():
        if isinstance(value, dict) and isinstance(config.get(key), dict):
            config[key].update(value)
        else:
            config[key] = value
    validate_config(config)
    return config


def validate_config(config):
    for key in ("dataset", "output_dir"):
        if key not in config:
            raise ConfigError("config lacks required key %r" % key)
    dataset = config["dataset"]
    if "chunk_csv" not in dataset:
        raise ConfigError("config dataset section needs chunk_csv")
    if not Path(dataset["chunk_csv"]).exists():
        raise ConfigError("chunk_csv %s does not exist" % dataset["chunk_csv"])
    fold_csv = dataset.get("fold_csv")
    if fold_csv is not None and not Path(fold_csv).exists():
        raise ConfigError("fold_csv %s does not exist" % fold_csv)
    if config["family"] not in FAMILIES:
        raise ConfigError("family must be one of %s" % (FAMILIES,))
    if config["feature_kind"] not in ("mbk", "mfcc"):
        raise ConfigError("feature_kind must be 'mbk' or 'mfcc'")
    for fold in config["folds"]:
        if not (isinstance(fold, int) and 0 <= fold <= 4):
            raise ConfigError("folds must be development fold indices 0-4")
    # family-specific sections must build cleanly before any compute
    if config["family"] in ("dnn", "dae+dnn"):
        tagger_config(config)
    if config["family"] == "dae+dnn":
        dae_config(config)


def tagger_config(config):
    overrides = dict(config.get("tagger", {}))
    overrides.setdefault("feature_kind", config["feature_kind"])
    if config["family"] == "dae+dnn":
        overrides["feature_kind"] = "daecode"
        overrides.setdefault(
            "feature_dim", dict(config.get("dae", {})).get("bottleneck", 50)
        )
    elif config["feature_kind"] == "mfcc":
        overrides.setdefault("feature_dim", 24)
    overrides.setdefault("seed", derive_seed(config["seed"], "tagger"))
    if "hidden_sizes" in overrides:
        overrides["hidden_sizes"] = tuple(overrides["hidden_sizes"])
    try:
        return tagger.TaggerConfig(**overrides)
    except TypeError as exc:
        raise ConfigError("bad tagger section: %s" % exc)


def dae_config(config):
    overrides = dict(config.get("dae", {}))
    overrides.setdefault("seed", derive_seed(config["seed"], "dae"))
    for key in ("encoder_hidden", "decoder_hidden"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    try:
        return dae_mod.DaeConfig(**overrides)
    except TypeError as exc:
        raise ConfigError("bad dae section: %s" % exc)


# ---------------------------------------------------------------------------
# artifact layout helpers


class Workspace:
    """Paths and cached loaders inside one experiment's output directory."""

    def __init__(self, config):
        self.config = config
        self.root = Path(config["output_dir"])
        self.records = ds.load_chunk_list(
            config["dataset"]["chunk_csv"],
            fold_spec=config["dataset"].get("fold_csv"),
            audio_dir=config["dataset"].get("audio_dir"),
            wav_suffix=config["dataset"].get("wav_suffix", ".wav"),
        )
        self._matrices = {}

    def path(self, *parts):
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def feature_path(self, kind, chunk_id):
        return self.path("features", kind, chunk_id + ".feat")

    def raw_matrix(self, record, kind):
        """Unnormalized features of one chunk, cached on disk and in memory."""
        key = (kind, record.chunk_id)
        if key in self._matrices:
            return self._matrices[key]
        cache = self.feature_path(kind, record.chunk_id)
        if cache.exists():
            matrix, _ = storage.read_feature_matrix(cache)
        else:
            chunk = ds.pad_or_trim(ds.read_wav(record.audio_path, record.chunk_id))
            matrix = feats.extract_features(chunk, kind=kind)
            storage.write_feature_matrix(cache, matrix)
            matrix, _ = storage.read_feature_matrix(cache)  # re-read: float32 cache
        self._matrices[key] = matrix
        return matrix

    def train_test(self, fold):
        train = ds.training_records(self.records, fold, include_raw=self.config["include_raw"])
        test = ds.heldout_records(self.records, fold)
        if not train or not test:
            raise DataError("fold %s has %d training / %d test chunks" % (fold, len(train), len(test)))
        return train, test


def extract_all(ws, kinds=None):
    kinds = kinds or [ws.config["feature_kind"]]
    for record in ws.records:
        for kind in kinds:
            ws.raw_matrix(record, kind)


def fold_norm_stats(ws, fold, kind):
    """Normalization stats fitted on the fold's training chunks only."""
    train, _ = ws.train_test(fold)
    stats_path = ws.path("norm", "%s-fold%d.json" % (kind, fold))
    if stats_path.exists():
        return storage.load_norm_stats(stats_path)
    stats = feats.fit_norm_stats([ws.raw_matrix(r, kind) for r in train])
    storage.save_norm_stats(stats_path, stats)
    return stats


def write_scores_csv(path, chunk_ids, scores):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chunk_id"] + ["score_%s" % t for t in ds.TAGS])
        for cid, row in zip(chunk_ids, scores):
            writer.writerow([cid] + ["%.10g" % v for v in row])


def read_scores_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["chunk_id"]:
            raise DataError("%s: not a score CSV" % path)
        for row in reader:
            rows.append((row[0], np.array([float(v) for v in row[1:]])))
    return rows


def score_rows_for(records, score_list):
    by_id = {cid: vec for cid, vec in score_list}
    rows = []
    for rec in records:
        if rec.chunk_id not in by_id:
            raise DataError("no scores for chunk %s" % rec.chunk_id)
        rows.append((rec.chunk_id, by_id[rec.chunk_id], rec.tags.to_vector()))
    return rows


# ---------------------------------------------------------------------------
# per-family fold pipelines


def dnn_fold_scores(ws, fold):
    config = ws.config
    kind = config["feature_kind"]
    tc = tagger_config(config)
    train, test = ws.train_test(fold)
    stats = fold_norm_stats(ws, fold, kind)

    train_mats = [stats.apply(ws.raw_matrix(r, kind)) for r in train]
    targets = [r.tags.to_vector() for r in train]
    model, _ = tagger.train_tagger(train_mats, targets, tc)
    storage.save_mlp(
        ws.path("models", "dnn-fold%d.model" % fold),
        model,
        norm_stats_id=storage.norm_stats_id(stats),
        meta={"family": "tagger", "config": _jsonable(asdict(tc)), "fold": fold},
    )

    scores = np.stack(
        [
            tagger.predict_chunk(model, stats.apply(ws.raw_matrix(r, kind)), tc).posteriors
            for r in test
        ]
    )
    return [r.chunk_id for r in test], scores


def dae_dnn_fold_scores(ws, fold):
    config = ws.config
    dc = dae_config(config)
    tc = tagger_config(config)
    if tc.feature_dim != dc.bottleneck:
        raise ConfigError(
            "tagger feature_dim %d must equal the bottleneck size %d"
            % (tc.feature_dim, dc.bottleneck)
        )
    train, test = ws.train_test(fold)
    stats = fold_norm_stats(ws, fold, "mbk")

    train_mats = [stats.apply(ws.raw_matrix(r, "mbk")) for r in train]
    windows = dae_mod.corpus_windows(train_mats, dc)
    model = dae_mod.train_dae(windows, dc)
    storage.save_dae(
        ws.path("models", "dae-fold%d.model" % fold),
        model,
        norm_stats_id=storage.norm_stats_id(stats),
    )

    stride = config.get("dae_code_stride", 1)
    code_train = [dae_mod.encode_corpus(model, m, stride=stride) for m in train_mats]
    code_stats = feats.fit_norm_stats(code_train)
    storage.save_norm_stats(ws.path("norm", "daecode-fold%d.json" % fold), code_stats)
    code_train = [code_stats.apply(m) for m in code_train]

    targets = [r.tags.to_vector() for r in train]
    net, _ = tagger.train_tagger(code_train, targets, tc)
    storage.save_mlp(
        ws.path("models", "dnn-dae-fold%d.model" % fold),
        net,
        norm_stats_id=storage.norm_stats_id(code_stats),
        meta={"family": "tagger", "config": _jsonable(asdict(tc)), "fold": fold,
              "dae_model": "models/dae-fold%d.model" % fold},
    )

    scores = []
    for r in test:
        codes = dae_mod.encode_corpus(model, stats.apply(ws.raw_matrix(r, "mbk")), stride=stride)
        scores.append(tagger.predict_chunk(net, code_stats.apply(codes), tc).posteriors)
    return [r.chunk_id for r in test], np.stack(scores)


def gmm_fold_scores(ws, fold):
    config = ws.config
    kind = config["feature_kind"]
    train, test = ws.train_test(fold)
    stats = fold_norm_stats(ws, fold, kind)
    train_mats = [stats.apply(ws.raw_matrix(r, kind)) for r in train]
    targets = [r.tags.to_vector() for r in train]
    models = gmm_mod.fit_tag_models(
        train_mats,
        targets,
        n_components=config["gmm"]["n_components"],
        n_iters=config["gmm"]["n_iters"],
        seed=derive_seed(config["seed"], "gmm-fold%d" % fold),
    )
    _save_gmm(ws.path("models", "gmm-fold%d.json" % fold), models)
    test_mats = [stats.apply(ws.raw_matrix(r, kind)) for r in test]
    scores = gmm_mod.score_chunks(models, test_mats)
    return [r.chunk_id for r in test], scores


def _save_gmm(path, models):
    doc = {
        tag: {
            side: {
                "weights": m.weights.tolist(),
                "means": m.means.tolist(),
                "variances": m.variances.tolist(),
            }
            for side, m in zip(("positive", "negative"), pair)
        }
        for tag, pair in models.items()
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _svm_instances(ws, records, stats, kind, frame_stride):
    mats = []
    for r in records:
        values = stats.apply(ws.raw_matrix(r, kind)).values
        mats.append(values[::frame_stride])
    return mats


def misvm_fold_scores(ws, fold):
    config = ws.config
    kind = config["feature_kind"]
    train, test = ws.train_test(fold)
    stats = fold_norm_stats(ws, fold, kind)
    frame_stride = config["svm"].get("frame_stride", 1)
    train_mats = _svm_instances(ws, train, stats, kind, frame_stride)
    test_mats = _svm_instances(ws, test, stats, kind, frame_stride)

    scores = np.zeros((len(test), len(ds.TAGS)))
    weights = {}
    for k, tag in enumerate(ds.TAGS):
        bags = [
            svm_mod.MilBag(r.chunk_id, m, 1 if tag in r.tags else -1)
            for r, m in zip(train, train_mats)
        ]
        model, _ = svm_mod.misvm_train(
            bags,
            reg_a=config["svm"]["reg_a"],
            max_outer_iters=config["svm"]["max_outer_iters"],
            svm_epochs=config["svm"]["epochs"],
            seed=derive_seed(config["seed"], "misvm-%s-fold%d" % (tag, fold)),
        )
        weights[tag] = {"weights": model.weights.tolist(), "bias": model.bias}
        scores[:, k] = [svm_mod.bag_score(model, m) for m in test_mats]
    with open(ws.path("models", "misvm-fold%d.json" % fold), "w", encoding="utf-8") as fh:
        json.dump(weights, fh)
    return [r.chunk_id for r in test], scores


def chunksvm_fold_scores(ws, fold):
    config = ws.config
    kind = config["feature_kind"]
    train, test = ws.train_test(fold)
    stats = fold_norm_stats(ws, fold, kind)
    train_x = np.stack(
        [svm_mod.chunk_svm_features(stats.apply(ws.raw_matrix(r, kind))) for r in train]
    )
    test_x = np.stack(
        [svm_mod.chunk_svm_features(stats.apply(ws.raw_matrix(r, kind))) for r in test]
    )

    scores = np.zeros((len(test), len(ds.TAGS)))
    weights = {}
    for k, tag in enumerate(ds.TAGS):
        labels = np.array([1.0 if tag in r.tags else -1.0 for r in train])
        model = svm_mod.linear_svm_fit(
            train_x,
            labels,
            reg_a=config["svm"]["reg_a"],
            epochs=config["svm"]["epochs"],
            seed=derive_seed(config["seed"], "chunksvm-%s-fold%d" % (tag, fold)),
        )
        weights[tag] = {"weights": model.weights.tolist(), "bias": model.bias}
        scores[:, k] = model.decision(test_x)
    with open(ws.path("models", "chunksvm-fold%d.json" % fold), "w", encoding="utf-8") as fh:
        json.dump(weights, fh)
    return [r.chunk_id for r in test], scores


FOLD_PIPELINES = {
    "dnn": dnn_fold_scores,
    "dae+dnn": dae_dnn_fold_scores,
    "gmm": gmm_fold_scores,
    "misvm": misvm_fold_scores,
    "chunksvm": chunksvm_fold_scores,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run_experiment(config):
    """Run the configured family over all folds and write the artifact tree.

    Returns the aggregated EvalReport. Partial artifacts from a failed
    stage are left in place for debugging.
    """
    ws = Workspace(config)
    family = config["family"]
    pipeline = FOLD_PIPELINES[family]

    fold_reports = []
    for fold in config["folds"]:
        chunk_ids, scores = pipeline(ws, fold)
        score_path = ws.path("scores", "%s-fold%d.csv" % (family.replace("+", "-"), fold))
        write_scores_csv(score_path, chunk_ids, scores)
        _, test = ws.train_test(fold)
        rows = score_rows_for(test, read_scores_csv(score_path))
        fold_reports.append(metrics.evaluate_fold(rows, fold=fold))

    report = metrics.aggregate_folds(fold_reports)
    name = family.replace("+", "-")
    metrics.write_report_csv(ws.path("reports", "%s-report.csv" % name), report, system=name)
    with open(ws.path("reports", "%s-report.md" % name), "w", encoding="utf-8") as fh:
        fh.write(metrics.render_markdown({name: report}))
    write_manifest(ws)
    return report


def write_manifest(ws):
    files = {}
    for p in sorted(ws.root.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[str(p.relative_to(ws.root))] = storage.file_sha256(p)
    manifest = {
        "config_hash": config_hash(ws.config),
        "seed": ws.config["seed"],
        "files": files,
    }
    with open(ws.path("manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def compare_runs(report_paths):
    """Merge per-tag report rows; deltas are taken against the first report."""
    if len(report_paths) < 2:
        raise ConfigError("compare needs at least two report CSVs")
    tables = []
    for path in report_paths:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2 or rows[0][1:] != list(ds.TAGS) + ["Average"]:
            raise DataError("%s: tag alphabet does not match" % path)
        tables.append(rows[1])

    header = ["system"] + list(ds.TAGS) + ["Average"]
    out = [header]
    base = [float(v) for v in tables[0][1:]]
    for row in tables:
        out.append(row)
    for row in tables[1:]:
        deltas = [float(v) - b for v, b in zip(row[1:], base)]
        out.append(["delta(%s)" % row[0]] + ["%+.3f" % d for d in deltas])
    return out


# ---------------------------------------------------------------------------
# subcommands


def _cmd_extract(args):
    config = load_config(args.config)
    ws = Workspace(config)
    kinds = [args.kind] if args.kind else None
    extract_all(ws, kinds=kinds)
    print("extracted features for %d chunks" % len(ws.records))
    return 0


def _single_fold_config(config, fold):
    if fold is not None:
        config = dict(config, folds=[fold])
    return config


def _cmd_stage(args, family):
    config = load_config(args.config)
    config["family"] = family
    validate_config(config)
    report = run_experiment(_single_fold_config(config, args.fold))
    print("%s average EER: %s" % (family, "%.3f" % report.average_eer))
    return 0


def _cmd_train_dae(args):
    config = load_config(args.config)
    ws = Workspace(config)
    dc = dae_config(config)
    fold = args.fold if args.fold is not None else config["folds"][0]
    stats = fold_norm_stats(ws, fold, "mbk")
    train, _ = ws.train_test(fold)
    mats = [stats.apply(ws.raw_matrix(r, "mbk")) for r in train]
    model = dae_mod.train_dae(dae_mod.corpus_windows(mats, dc), dc)
    out = ws.path("models", "dae-fold%d.model" % fold)
    storage.save_dae(out, model, norm_stats_id=storage.norm_stats_id(stats))
    final = model.cv_errors[-1] if model.cv_errors else float("nan")
    print("trained %s auto-encoder -> %s (final CV error %.4f)" % (dc.variant, out, final))
    return 0


def _cmd_encode_dae(args):
    config = load_config(args.config)
    ws = Workspace(config)
    model, header = storage.load_dae(args.model)
    fold = args.fold if args.fold is not None else config["folds"][0]
    stats = fold_norm_stats(ws, fold, "mbk")
    stride = config.get("dae_code_stride", 1)
    count = 0
    for record in ws.records:
        codes = dae_mod.encode_corpus(model, stats.apply(ws.raw_matrix(record, "mbk")), stride=stride)
        storage.write_feature_matrix(
            ws.feature_path("DAECODE", record.chunk_id), codes,
            norm_stats_id=header.get("norm_stats_id"),
        )
        count += 1
    print("encoded %d chunks at stride %d" % (count, stride))
    return 0


def _cmd_predict(args):
    config = load_config(args.config)
    ws = Workspace(config)
    model, header = storage.load_mlp(args.model)
    meta = header.get("meta", {})
    if meta.get("family") != "tagger":
        raise ConfigError("%s is not a tagger model" % args.model)
    tc_fields = dict(meta["config"])
    tc_fields["hidden_sizes"] = tuple(tc_fields["hidden_sizes"])
    tc = tagger.TaggerConfig(**tc_fields)
    fold = meta.get("fold", config["folds"][0])

    dae_model = None
    code_stats = None
    if "dae_model" in meta:
        dae_model, _ = storage.load_dae(ws.root / meta["dae_model"])
        stats = fold_norm_stats(ws, fold, "mbk")
        code_stats_path = ws.path("norm", "daecode-fold%d.json" % fold)
        if not code_stats_path.exists():
            raise ConfigError(
                "missing %s; run the dae+dnn training stage first" % code_stats_path
            )
        code_stats = storage.load_norm_stats(code_stats_path)
    else:
        stats = fold_norm_stats(ws, fold, config["feature_kind"])

    records = ws.records
    if args.chunks:
        wanted = {r.chunk_id for r in ds.load_chunk_list(args.chunks)}
        records = [r for r in records if r.chunk_id in wanted]

    chunk_ids, scores = [], []
    for record in records:
        kind = "mbk" if dae_model is not None else config["feature_kind"]
        matrix = stats.apply(ws.raw_matrix(record, kind))
        if dae_model is not None:
            codes = dae_mod.encode_corpus(
                dae_model, matrix, stride=config.get("dae_code_stride", 1)
            )
            matrix = code_stats.apply(codes)
        chunk_ids.append(record.chunk_id)
        scores.append(tagger.predict_chunk(model, matrix, tc).posteriors)
    write_scores_csv(args.output, chunk_ids, np.stack(scores))
    print("wrote %d chunk scores to %s" % (len(chunk_ids), args.output))
    return 0


def _cmd_evaluate(args):
    records = ds.load_chunk_list(args.chunks)
    if args.fold is not None:
        records = [r for r in records if r.fold == args.fold]
    rows = score_rows_for(records, read_scores_csv(args.scores))
    report = metrics.evaluate_fold(rows, fold=args.fold if args.fold is not None else "all")
    agg = metrics.aggregate_folds([report])
    if args.output:
        metrics.write_report_csv(args.output, agg, system=args.system)
    print(metrics.render_markdown({args.system: agg}))
    return 0


def _cmd_compare(args):
    table = compare_runs(args.reports)
    widths = [max(len(str(row[i])) for row in table) for i in range(len(table[0]))]
    for row in table:
        print("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(table)
    return 0


def _cmd_run(args):
    config = load_config(args.config)
    report = run_experiment(config)
    print(metrics.render_markdown({config["family"]: report}))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="audiotag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        return p

    p = add("extract-features", _cmd_extract, help="cache raw features for every chunk")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", choices=["mbk", "mfcc"])

    for name, family in (
        ("train-dnn", "dnn"),
        ("train-gmm", "gmm"),
        ("train-misvm", "misvm"),
        ("train-chunksvm", "chunksvm"),
    ):
        p = add(name, lambda a, fam=family: _cmd_stage(a, fam),
                help="train and evaluate the %s family" % family)
        p.add_argument("--config", required=True)
        p.add_argument("--fold", type=int)

    p = add("train-dae", _cmd_train_dae, help="train the denoising auto-encoder")
    p.add_argument("--config", required=True)
    p.add_argument("--fold", type=int)

    p = add("encode-dae", _cmd_encode_dae, help="encode all chunks with a trained auto-encoder")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--fold", type=int)

    p = add("predict", _cmd_predict, help="score chunks with a trained tagger")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--chunks")
    p.add_argument("--output", required=True)

    p = add("evaluate", _cmd_evaluate, help="evaluate a score CSV against chunk labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--chunks", required=True)
    p.add_argument("--fold", type=int)
    p.add_argument("--output")
    p.add_argument("--system", default="system")

    p = add("compare", _cmd_compare, help="merge report CSVs with per-tag deltas")
    p.add_argument("reports", nargs="+")
    p.add_argument("--output")

    p = add("run", _cmd_run, help="run the configured experiment end to end")
    p.add_argument("--config", required=True)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except DataError as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return 3
    except NumericError as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return 4
    except AudiotagError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
