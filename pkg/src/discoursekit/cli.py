"""Command-line front-end: reproducible, config-driven pipeline runs.

Every subcommand resolves its settings with the same precedence chain
(defaults, then config file, then ``DISCOURSEKIT_*`` environment variables,
then flags), derives its stage seed from the root seed by hashing the stage
name, writes its artifacts into the output directory, and drops a
``manifest.json`` beside them recording the resolved configuration and a
content hash.  ``rerun`` replays a manifest and must reproduce every
artifact byte for byte.

Errors print as a single ``error: Kind: message`` line on stderr; config
problems exit with status 2, everything else with 1.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from discoursekit import __version__
from discoursekit import analytics, corpus as corpus_mod, evaluation, lda as lda_mod
from discoursekit import classifiers as clf_mod
from discoursekit import preprocess as prep_mod
from discoursekit.corpus import ClassSpec, Label, Role, SynthSpec

ENV_PREFIX = "DISCOURSEKIT_"
MANIFEST_FORMAT = "discoursekit-manifest"
MANIFEST_VERSION = 1


class ConfigError(ValueError):
    pass


def derive_seed(root: int, stage: str) -> int:
    """Split one root seed into independent per-stage seeds by name, so a
    stage can be re-run in isolation without replaying the others."""
    digest = hashlib.sha256(f"{root}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**31)


# ---------------------------------------------------------------------------
# Configuration plumbing


def _load_config_file(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    with p.open("rb") as fh:
        raw = tomllib.load(fh)

    flat: dict[str, Any] = {}

    def _flatten(prefix: str, node: Mapping[str, Any]) -> None:
        for key, value in node.items():
            dotted = f"{prefix}.{key}" if prefix else key
            if isinstance(value, Mapping):
                _flatten(dotted, value)
            else:
                flat[dotted] = value

    _flatten("", raw)
    return flat


class Resolver:
    """Single place implementing defaults < file < environment < flags."""

    def __init__(self, file_config: Mapping[str, Any], args: argparse.Namespace):
        self.file_config = file_config
        self.args = args

    def get(self, key: str, default: Any, cast: Callable[[Any], Any] = str,
            flag: str | None = None) -> Any:
        flag_name = (flag or key).replace(".", "_").replace("-", "_")
        value = getattr(self.args, flag_name, None)
        if value is not None:
            return cast(value)
        env = os.environ.get(ENV_PREFIX + key.upper().replace(".", "_"))
        if env is not None:
            return cast(env)
        if key in self.file_config:
            return cast(self.file_config[key])
        return default

    def require_path(self, key: str, flag: str | None = None) -> str:
        value = self.get(key, None, cast=str, flag=flag)
        if value is None:
            raise ConfigError(f"missing required setting: {key}")
        if not Path(value).exists():
            raise ConfigError(f"{key}: file not found: {value}")
        return value


def _bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _out_dir(resolved: Mapping[str, Any]) -> Path:
    out = resolved.get("output")
    if not out:
        raise ConfigError("missing required setting: output")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config_hash(command: str, resolved: Mapping[str, Any]) -> str:
    canon = json.dumps({"command": command, "config": resolved}, sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _write_manifest(out_dir: Path, command: str, resolved: Mapping[str, Any],
                    artifacts: Sequence[str]) -> None:
    payload = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "package_version": __version__,
        "command": command,
        "config": dict(resolved),
        "artifacts": sorted(artifacts),
        "config_hash": _config_hash(command, resolved),
    }
    with (out_dir / "manifest.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Shared I/O helpers


def _load_resources(resolved: Mapping[str, Any]):
    lex = prep_mod.load_lexicon(resolved["lexicon"])
    stop = prep_mod.load_stopwords(resolved["stopwords"])
    emo = prep_mod.load_emoticons(resolved["emoticons"])
    return lex, stop, emo


def _resource_settings(r: Resolver) -> dict[str, str]:
    return {
        "lexicon": r.get(
            "resources.lexicon", str(prep_mod.default_resource_path("lexicon.tsv")),
            flag="lexicon",
        ),
        "stopwords": r.get(
            "resources.stopwords", str(prep_mod.default_resource_path("stopwords.txt")),
            flag="stopwords",
        ),
        "emoticons": r.get(
            "resources.emoticons", str(prep_mod.default_resource_path("emoticons.txt")),
            flag="emoticons",
        ),
    }


def _write_processed(path: Path, records: Sequence[dict[str, Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _read_processed(path: str) -> tuple[list[str], list[list[str]], list[Label | None]]:
    ids: list[str] = []
    streams: list[list[str]] = []
    labels: list[Label | None] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            record = json.loads(raw)
            try:
                ids.append(str(record["id"]))
                streams.append([str(t) for t in record["lemmas"]])
            except KeyError as exc:
                raise ValueError(f"{path}:{line_no}: missing field {exc}") from None
            raw_label = record.get("gold_label")
            labels.append(Label(raw_label) if raw_label else None)
    return ids, streams, labels


def _require_labels(ids: Sequence[str], labels: Sequence[Label | None]) -> list[Label]:
    for msg_id, lab in zip(ids, labels):
        if lab is None:
            raise ConfigError(f"input message {msg_id!r} has no gold_label")
    return [lab for lab in labels if lab is not None]


# ---------------------------------------------------------------------------
# Subcommand bodies (resolved config in, artifact names out)


def cmd_ingest(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    fmt = resolved.get("format") or (
        "csv" if resolved["input"].endswith(".csv") else "jsonl"
    )
    loaded = corpus_mod.load_corpus(resolved["input"], format=fmt)
    corpus_mod.save_corpus(loaded, out_dir / "corpus.jsonl")
    artifacts = ["corpus.jsonl"]
    if resolved.get("metadata"):
        groups = corpus_mod.load_group_metadata(resolved["metadata"])
        corpus_mod.save_group_metadata(groups, out_dir / "groups.jsonl")
        artifacts.append("groups.jsonl")
    return artifacts


def cmd_preprocess(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    lex, stop, emo = _load_resources(resolved)
    loaded = corpus_mod.load_corpus(resolved["input"])
    records = []
    for msg in loaded:
        record: dict[str, Any] = {
            "id": msg.id,
            "lemmas": prep_mod.preprocess(msg.text, lex, stop, emo),
        }
        if msg.gold_label is not None:
            record["gold_label"] = msg.gold_label.value
        records.append(record)
    _write_processed(out_dir / "processed.jsonl", records)
    return ["processed.jsonl"]


def cmd_lda(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    _, streams, _ = _read_processed(resolved["input"])
    artifacts: list[str] = []
    for k in resolved["k_list"]:
        cfg = lda_mod.GibbsConfig(
            k=k,
            alpha=resolved.get("alpha"),
            beta=resolved["beta"],
            burn_in=resolved["burn_in"],
            iterations=resolved["iterations"],
            chains=resolved["chains"],
            seed=derive_seed(resolved["seed"], f"lda-k{k}"),
        )
        model = lda_mod.run_chains(streams, cfg)
        model_name = f"model_k{k}.json"
        words_name = f"top_words_k{k}.csv"
        lda_mod.save_model(model, out_dir / model_name)
        lda_mod.write_top_words_csv(model, resolved["top_n"], out_dir / words_name)
        artifacts += [model_name, words_name]
    return artifacts


def cmd_train(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    ids, streams, raw_labels = _read_processed(resolved["input"])
    labels = _require_labels(ids, raw_labels)
    fs = clf_mod.build_feature_space(streams)
    vectors = [clf_mod.vectorize(s, fs) for s in streams]
    cfg = clf_mod.SvmConfig(
        c=resolved["c"], tol=resolved["tol"],
        seed=derive_seed(resolved["seed"], "train"),
    )
    model = clf_mod.train_multiclass(
        vectors, labels, fs, cfg, jobs=resolved["jobs"]
    )
    clf_mod.save_svm(model, out_dir / "svm_model.json")
    return ["svm_model.json"]


def cmd_predict(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    ids, streams, _ = _read_processed(resolved["input"])
    rows: list[tuple[str, str, str]] = []
    if resolved.get("model"):
        model = clf_mod.load_svm(resolved["model"])
        for msg_id, stream in zip(ids, streams):
            vec = clf_mod.vectorize(stream, model.feature_space)
            label, _ = clf_mod.predict_svm(model, vec)
            rows.append((msg_id, label.value, ""))
    elif resolved.get("lda_model"):
        if not resolved.get("topic_class_map"):
            raise ConfigError("missing required setting: topic_class_map")
        topic_model = lda_mod.load_model(resolved["lda_model"])
        mapping = clf_mod.read_topic_class_map(resolved["topic_class_map"])
        clf = clf_mod.LdaClassifier(model=topic_model, class_map=mapping)
        for msg_id, stream in zip(ids, streams):
            pred = clf_mod.classify_lda(stream, clf)
            rows.append((msg_id, pred.label.value, "1" if pred.abstained else ""))
    else:
        raise ConfigError("missing required setting: model (or lda_model)")
    with (out_dir / "predictions.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["message_id", "label", "abstained"])
        writer.writerows(rows)
    return ["predictions.csv"]


def cmd_evaluate(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    ids, streams, raw_labels = _read_processed(resolved["input"])
    labels = _require_labels(ids, raw_labels)
    which = {name.strip() for name in resolved["classifiers"].split(",") if name.strip()}
    unknown = which - {"svm", "lda"}
    if unknown:
        raise ConfigError(f"unknown classifiers: {', '.join(sorted(unknown))}")
    svm_cfg = None
    if "svm" in which:
        svm_cfg = clf_mod.SvmConfig(
            c=resolved["c"], tol=resolved["tol"],
            seed=derive_seed(resolved["seed"], "evaluate-svm"),
        )
    lda_cfg = None
    if "lda" in which:
        lda_cfg = lda_mod.GibbsConfig(
            k=len(set(labels)),
            beta=resolved["beta"],
            burn_in=resolved["burn_in"],
            iterations=resolved["iterations"],
            chains=resolved["chains"],
            seed=derive_seed(resolved["seed"], "evaluate-lda"),
        )
    report = evaluation.cross_validate(
        streams, labels,
        k=resolved["k_folds"],
        seed=derive_seed(resolved["seed"], "evaluate-folds"),
        svm_config=svm_cfg,
        lda_config=lda_cfg,
        jobs=resolved["jobs"],
    )
    evaluation.report_csv(report, out_dir / "report.csv")
    text = evaluation.report_text(report)
    (out_dir / "report.txt").write_text(text + "\n", encoding="utf-8")
    return ["report.csv", "report.txt"]


def cmd_analyze(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    loaded = corpus_mod.load_corpus(resolved["input"])
    metadata = corpus_mod.load_group_metadata(resolved["metadata"])
    labels: dict[str, Label] | None = None
    if resolved.get("predictions"):
        labels = {}
        with Path(resolved["predictions"]).open(encoding="utf-8", newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0] in ("message_id", "id") or row[0].startswith("#"):
                    continue
                labels[row[0]] = Label(row[1])
    rows = analytics.group_features(loaded, metadata, labels)
    analytics.write_feature_table(rows, out_dir / "features.csv")
    if len(rows) >= 3:
        cm = analytics.pearson_matrix(rows)
        analytics.write_correlation_csv(cm, out_dir / "correlations.csv")
        result = analytics.pca(rows)
        analytics.write_eigen_csv(result, out_dir / "eigen.csv")
        artifacts = ["features.csv", "correlations.csv", "eigen.csv"]
        if result.loadings.shape[1] >= 2:
            analytics.export_biplot(
                result, rows,
                out_dir / "biplot_loadings.csv", out_dir / "biplot_scores.csv",
            )
            artifacts += ["biplot_loadings.csv", "biplot_scores.csv"]
        return artifacts
    return ["features.csv"]


_DATAGEN_CLASSES: tuple[ClassSpec, ...] = (
    ClassSpec(
        label=Label.PHATIC,
        vocabulary=("hola", "ola", "chao", "saludos", "jajaja", "XD", ";-)", ":D",
                    "po", "equipo"),
    ),
    ClassSpec(
        label=Label.EMOTIVE,
        vocabulary=("genial", "bueno", "malo", "divertido", "aburrido", "entiendo",
                    "no", "uf", ":-(", "<3"),
    ),
    ClassSpec(
        label=Label.REFERENTIAL,
        vocabulary=("actividad", "trabajo", "historia", "guerra", "mundo", "video",
                    "http://museociudad.cl", "42", "subir", "leer"),
    ),
)


def cmd_datagen(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    spec = SynthSpec(
        classes=_DATAGEN_CLASSES,
        n_groups=resolved["n_groups"],
        student_messages_per_group=resolved["student_msgs"],
        teacher_messages_per_group=resolved["teacher_msgs"],
        noise_rate=resolved["noise_rate"],
    )
    synth, metadata = corpus_mod.generate_synthetic(
        spec, seed=derive_seed(resolved["seed"], "datagen")
    )
    corpus_mod.save_corpus(synth, out_dir / "corpus.jsonl")
    corpus_mod.save_group_metadata(metadata, out_dir / "groups.jsonl")
    return ["corpus.jsonl", "groups.jsonl"]


def cmd_report(resolved: Mapping[str, Any], out_dir: Path) -> list[str]:
    loaded = corpus_mod.load_corpus(resolved["input"])
    stats = corpus_mod.corpus_summary(loaded)
    lines = [f"messages: {stats.total}", ""]
    for title, counts in (
        ("by role", stats.by_role),
        ("by level", stats.by_level),
        ("by subject", stats.by_subject),
    ):
        lines.append(title)
        for key, count in counts.items():
            lines.append(f"  {key.value:<12} {count}")
        lines.append("")
    lines.append("per-group message counts (population std; groups without")
    lines.append("messages of a role are excluded from that role's row)")
    for role in Role:
        dist = stats.per_group.get(role)
        if dist is None:
            continue
        lines.append(
            f"  {role.value:<8} groups={dist.n_groups} median={dist.median:g}"
            f" mean={dist.mean:.2f} std={dist.std:.2f} max={dist.maximum}"
        )
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ["summary.txt"]


_COMMANDS: dict[str, Callable[[Mapping[str, Any], Path], list[str]]] = {
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "lda": cmd_lda,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "datagen": cmd_datagen,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# Argument parsing and resolution


def _add_common(sub: argparse.ArgumentParser, with_input: bool = True) -> None:
    sub.add_argument("--config", help="TOML settings file")
    sub.add_argument("--seed", type=int, help="root seed (split per stage)")
    sub.add_argument("--jobs", type=int, help="parallel workers where supported")
    sub.add_argument("--output", help="output directory")
    if with_input:
        sub.add_argument("--input", help="input file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="discoursekit",
        description="Discourse-function classification and group analytics "
                    "for short classroom microblog messages.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="validate and normalize a corpus file")
    _add_common(p)
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--metadata", help="group metadata JSONL to validate")

    p = subs.add_parser("preprocess", help="normalize message text to lemmas")
    _add_common(p)
    p.add_argument("--lexicon")
    p.add_argument("--stopwords")
    p.add_argument("--emoticons")

    p = subs.add_parser("lda", help="fit topic models over preprocessed text")
    _add_common(p)
    p.add_argument("--k", type=int, help="topic count")
    p.add_argument("--k-list", help="comma-separated topic counts")
    p.add_argument("--chains", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--top-n", type=int, help="words per topic in the CSV")

    p = subs.add_parser("train", help="train the one-vs-one SVM")
    _add_common(p)
    p.add_argument("--c", type=float)
    p.add_argument("--tol", type=float)

    p = subs.add_parser("predict", help="label messages with a trained model")
    _add_common(p)
    p.add_argument("--model", help="SVM model JSON")
    p.add_argument("--lda-model", help="topic model JSON")
    p.add_argument("--topic-class-map", help="topic_index,class CSV")

    p = subs.add_parser("evaluate", help="cross-validate the classifiers")
    _add_common(p)
    p.add_argument("--k-folds", "--k", dest="k_folds", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--chains", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--classifiers", help="comma list: svm,lda")

    p = subs.add_parser("analyze", help="group indicators, correlations, PCA")
    _add_common(p)
    p.add_argument("--metadata", help="group metadata JSONL")
    p.add_argument("--predictions", help="predictions CSV overriding gold labels")

    p = subs.add_parser("datagen", help="generate a labeled synthetic corpus")
    _add_common(p, with_input=False)
    p.add_argument("--n-groups", type=int)
    p.add_argument("--student-msgs", type=int)
    p.add_argument("--teacher-msgs", type=int)
    p.add_argument("--noise-rate", type=float)

    p = subs.add_parser("report", help="corpus summary statistics")
    _add_common(p)

    p = subs.add_parser("rerun", help="replay a manifest byte-for-byte")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", help="write artifacts here instead")

    return parser


def _resolve(command: str, args: argparse.Namespace) -> dict[str, Any]:
    file_config = _load_config_file(getattr(args, "config", None))
    r = Resolver(file_config, args)
    resolved: dict[str, Any] = {
        "seed": r.get("seed", 0, int),
        "jobs": r.get("jobs", 1, int),
        "output": r.get("output", None, str),
    }

    if command == "ingest":
        resolved["input"] = r.require_path("input")
        resolved["format"] = r.get("format", None, str)
        resolved["metadata"] = r.get("metadata", None, str)
        if resolved["metadata"] and not Path(resolved["metadata"]).exists():
            raise ConfigError(f"metadata: file not found: {resolved['metadata']}")
    elif command == "preprocess":
        resolved["input"] = r.require_path("input")
        resolved.update(_resource_settings(r))
        for key in ("lexicon", "stopwords", "emoticons"):
            if not Path(resolved[key]).exists():
                raise ConfigError(f"{key}: file not found: {resolved[key]}")
    elif command == "lda":
        resolved["input"] = r.require_path("input")
        k_list_raw = r.get("lda.k_list", None, str, flag="k_list")
        single_k = r.get("lda.k", None, int, flag="k")
        if k_list_raw:
            resolved["k_list"] = [int(x) for x in str(k_list_raw).split(",") if x.strip()]
        elif single_k is not None:
            resolved["k_list"] = [int(single_k)]
        else:
            raise ConfigError("missing required setting: k (or k_list)")
        resolved["chains"] = r.get("lda.chains", 3, int, flag="chains")
        resolved["burn_in"] = r.get("lda.burn_in", 1000, int, flag="burn_in")
        resolved["iterations"] = r.get("lda.iterations", 5000, int, flag="iterations")
        resolved["alpha"] = r.get("lda.alpha", None, float, flag="alpha")
        resolved["beta"] = r.get("lda.beta", 0.1, float, flag="beta")
        resolved["top_n"] = r.get("lda.top_n", 20, int, flag="top_n")
    elif command == "train":
        resolved["input"] = r.require_path("input")
        resolved["c"] = r.get("svm.c", 1.0, float, flag="c")
        resolved["tol"] = r.get("svm.tol", 1e-3, float, flag="tol")
    elif command == "predict":
        resolved["input"] = r.require_path("input")
        resolved["model"] = r.get("model", None, str)
        resolved["lda_model"] = r.get("lda_model", None, str)
        resolved["topic_class_map"] = r.get("topic_class_map", None, str)
        for key in ("model", "lda_model", "topic_class_map"):
            if resolved[key] and not Path(resolved[key]).exists():
                raise ConfigError(f"{key}: file not found: {resolved[key]}")
    elif command == "evaluate":
        resolved["input"] = r.require_path("input")
        resolved["k_folds"] = r.get("evaluate.k_folds", 10, int, flag="k_folds")
        resolved["c"] = r.get("svm.c", 1.0, float, flag="c")
        resolved["tol"] = r.get("svm.tol", 1e-3, float, flag="tol")
        resolved["chains"] = r.get("lda.chains", 3, int, flag="chains")
        resolved["burn_in"] = r.get("lda.burn_in", 1000, int, flag="burn_in")
        resolved["iterations"] = r.get("lda.iterations", 5000, int, flag="iterations")
        resolved["beta"] = r.get("lda.beta", 0.1, float, flag="beta")
        resolved["classifiers"] = r.get("evaluate.classifiers", "svm,lda",
                                        flag="classifiers")
    elif command == "analyze":
        resolved["input"] = r.require_path("input")
        resolved["metadata"] = r.require_path("metadata")
        resolved["predictions"] = r.get("predictions", None, str)
        if resolved["predictions"] and not Path(resolved["predictions"]).exists():
            raise ConfigError(f"predictions: file not found: {resolved['predictions']}")
    elif command == "datagen":
        resolved["n_groups"] = r.get("datagen.n_groups", 10, int, flag="n_groups")
        resolved["student_msgs"] = r.get("datagen.student_msgs", 54, int,
                                         flag="student_msgs")
        resolved["teacher_msgs"] = r.get("datagen.teacher_msgs", 6, int,
                                         flag="teacher_msgs")
        resolved["noise_rate"] = r.get("datagen.noise_rate", 0.2, float,
                                       flag="noise_rate")
    elif command == "report":
        resolved["input"] = r.require_path("input")
    return resolved


def _run(command: str, resolved: Mapping[str, Any]) -> int:
    out_dir = _out_dir(resolved)
    artifacts = _COMMANDS[command](resolved, out_dir)
    _write_manifest(out_dir, command, resolved, artifacts)
    print(f"{command}: wrote {', '.join(sorted(artifacts))} to {out_dir}")
    return 0


def _run_rerun(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise ConfigError(f"manifest not found: {args.manifest}")
    with manifest_path.open(encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"{args.manifest}: not a manifest")
    command = manifest["command"]
    if command not in _COMMANDS:
        raise ConfigError(f"{args.manifest}: unknown command {command!r}")
    resolved = dict(manifest["config"])
    if args.output:
        resolved["output"] = args.output
    return _run(command, resolved)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            return _run_rerun(args)
        resolved = _resolve(args.command, args)
        return _run(args.command, resolved)
    except ConfigError as exc:
        print(f"error: ConfigError: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except Exception as exc:  # single-line, machine-parseable failure report
        kind = type(exc).__name__
        print(f"error: {kind}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
