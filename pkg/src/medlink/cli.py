"""Command-line pipeline: ingest, split, dictionaries, embeddings, training,
linking, and evaluation as one entry point with deterministic seeding.

Every subcommand writes a manifest holding the resolved configuration and
the SHA-256 of each input, so a run is reproducible from the manifest
alone. Wall time goes to the log, not the manifest, keeping reruns
byte-identical.
"""

import argparse
import hashlib
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .align import (
    AlignData,
    BranchSpec,
    ModelConfig,
    TrainConfig,
    init_model,
    load_model,
    save_model,
    train,
)
from .corpus import (
    DEFAULT_RATIOS,
    KINDS,
    LEVELS,
    load_corpus,
    make_split,
    split_stats,
    write_split,
)
from .errors import (
    FormatError,
    MedlinkError,
    NotFoundError,
    TrainingDivergedError,
    ValidationError,
)
from .evaluation import format_machine_report, report_table, score
from .kg import load_graph, save_graph
from .linking import (
    DictionaryComponent,
    ExactComponent,
    FuzzyComponent,
    NeuralComponent,
    build_cascade,
    build_target_index,
    link_all,
    parse_cascade_spec,
    write_predictions,
)
from .matchers import (
    build_dictionary,
    fuzzy_match,
    load_dictionary,
    save_dictionary,
    tune_threshold,
)
from .node2vec import SgnsConfig, WalkConfig, generate_walks, save_node_embeddings, train_sgns
from .text import fmt_float, tokenize
from .vectors import (
    WordVectorStore,
    load_layer_stacks,
    load_word_vectors,
    save_word_vectors,
    term_embedding,
)

log = logging.getLogger("medlink")

DEFAULT_SEED = 42
METRICS = ("lev", "stoilos")
PARTITIONS = ("train", "dev", "test")
LINK_METHODS = ("dictionary", "exact", "lev", "stoilos", "neural", "cascade")

BENCH_LADDER = (
    ("s.1", "dict"),
    ("s.2", "exact"),
    ("s.3", "lev:{lev}"),
    ("s.4", "stoilos:{sto}"),
    ("n.6", "neural:n6"),
    ("b.1", "dict+exact"),
    ("b.2", "dict+lev:{lev}"),
    ("b.3", "dict+stoilos:{sto}"),
    ("b.4", "dict+neural:n6"),
    ("b.5", "exact+neural:n6"),
    ("b.6", "dict+exact+neural:n6"),
    ("b.7", "dict+lev:{lev}+neural:n6"),
    ("b.8", "dict+stoilos:{sto}+neural:n6"),
)


class Parser(argparse.ArgumentParser):
    """argparse parser whose failures become validation errors (exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def read_keyvalues(path):
    """key=value lines; blank lines and # comments are skipped."""
    data = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError("expected key=value", path=path, line=lineno)
            key, _, value = line.partition("=")
            data[key.strip()] = value.strip()
    return data


def _cast_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


class Settings:
    """Config precedence: flags > config file > built-in defaults."""

    def __init__(self, args):
        self.args = args
        config = getattr(args, "config", None)
        if config is not None:
            _require_file(config, "--config")
        self.file = read_keyvalues(config) if config else {}
        self.resolved = {}

    def get(self, name, default, cast=str):
        flag = getattr(self.args, name.replace("-", "_"), None)
        if flag is not None:
            value = flag
        elif name in self.file:
            value = cast(self.file[name])
        else:
            value = default
        self.resolved[name] = value
        return value

    def seed(self):
        value = self.get("seed", None, int)
        if value is None:
            value = DEFAULT_SEED
            self.resolved["seed"] = value
            log.info("seed not specified; defaulting to %d", DEFAULT_SEED)
        return value

    def workers(self):
        value = self.get("workers", 1, int)
        if value < 1:
            raise ValidationError(f"--workers must be >= 1, got {value}")
        return value


def _require_file(path, flag):
    if not Path(path).is_file():
        raise ValidationError(f"{flag}: no such file: {path}")


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_float(value)
    if value is None:
        return ""
    return str(value)


def write_manifest(path, command, resolved, inputs, outputs, extra=()):
    """Resolved config, input checksums, output names; no timestamps."""
    lines = [f"command={command}"]
    for key in sorted(resolved):
        lines.append(f"config.{key}={_manifest_value(resolved[key])}")
    for name in sorted(inputs):
        lines.append(f"input.{name}={inputs[name]}")
        lines.append(f"input.{name}.sha256={file_sha256(inputs[name])}")
    for name in sorted(outputs):
        lines.append(f"output.{name}={outputs[name]}")
    for key, value in extra:
        lines.append(f"{key}={_manifest_value(value)}")
    Path(path).write_text("".join(f"{l}\n" for l in lines), encoding="utf-8")


def _load_graph_from(args):
    _require_file(args.concepts, "--concepts")
    _require_file(args.edges, "--edges")
    return load_graph(args.concepts, args.edges)


def _read_split_meta(split_dir):
    meta_path = Path(split_dir) / "split.meta"
    _require_file(meta_path, "--split")
    return read_keyvalues(meta_path)


def _load_partition(split_dir, name, graph):
    path = Path(split_dir) / f"{name}.tsv"
    _require_file(path, "--split")
    return load_corpus(path, graph)


# ---------------------------------------------------------------- features


@dataclass(frozen=True)
class FeatureSpec:
    """One model input branch: kind:source:path[:out_dim]."""

    kind: str
    source: str
    path: str
    out_dim: int = 0


def parse_feature_spec(text):
    parts = text.split(":")
    if len(parts) < 3:
        raise ValidationError(f"feature spec {text!r} must be kind:source:path")
    kind, source = parts[0], parts[1]
    if kind not in ("raw", "transform", "mla"):
        raise ValidationError(f"unknown feature branch kind {kind!r} in {text!r}")
    if source not in ("term", "stack"):
        raise ValidationError(f"unknown feature source {source!r} in {text!r}")
    if kind == "mla" and source != "stack":
        raise ValidationError(f"mla features need a stack source, got {text!r}")
    out_dim = 0
    rest = parts[2:]
    if kind == "transform":
        if len(rest) < 2 or not rest[-1].isdigit():
            raise ValidationError(f"transform feature {text!r} needs a trailing out_dim")
        out_dim = int(rest[-1])
        rest = rest[:-1]
    path = ":".join(rest)
    if not path:
        raise ValidationError(f"feature spec {text!r} is missing a path")
    return FeatureSpec(kind=kind, source=source, path=path, out_dim=out_dim)


class Feature:
    """A parsed spec bound to its loaded store."""

    def __init__(self, spec):
        _require_file(spec.path, "--feature")
        self.spec = spec
        if spec.source == "term":
            self.store = load_word_vectors(spec.path)
            self.dim = self.store.dim
        else:
            self.store = load_layer_stacks(spec.path)
            if not self.store:
                raise ValidationError(f"feature file {spec.path} has no records")
            self.dim = next(iter(self.store.values())).dim

    def branch(self):
        if self.spec.kind == "transform":
            return BranchSpec(kind="transform", in_dim=self.dim, out_dim=self.spec.out_dim)
        return BranchSpec(kind=self.spec.kind, in_dim=self.dim)

    def of_mention(self, mention):
        if self.spec.source == "term":
            return term_embedding(self.store, mention.term)[0]
        stack = self.store.get(str(mention.id))
        if stack is None:
            return None
        return stack.layers if self.spec.kind == "mla" else stack.layers[-1]


def load_features(texts):
    if not texts:
        raise ValidationError("at least one --feature is required")
    return [Feature(parse_feature_spec(t)) for t in texts]


def parse_target_spec(text):
    kind, _, path = text.partition(":")
    if kind not in ("label", "node2vec") or not path:
        raise ValidationError(f"target spec {text!r} must be label:path or node2vec:path")
    return kind, path


def load_target_index(graph, texts):
    if not texts:
        raise ValidationError("at least one --targets is required")
    components = []
    for text in texts:
        kind, path = parse_target_spec(text)
        _require_file(path, "--targets")
        components.append((kind, load_word_vectors(path)))
    return build_target_index(graph, components)


def build_align_data(mentions, features, index, level):
    """Stack per-branch inputs and gold targets; skip feature-less mentions."""
    row_of = {sctid: i for i, sctid in enumerate(index.sctids)}
    by_branch = [[] for _ in features]
    targets, golds = [], []
    skipped = 0
    for m in mentions:
        arrs = [f.of_mention(m) for f in features]
        if any(a is None for a in arrs):
            skipped += 1
            continue
        for bucket, arr in zip(by_branch, arrs):
            bucket.append(arr)
        targets.append(index.targets[row_of[m.gold(level)]])
        golds.append(m.gold(level))
    if skipped:
        log.warning("skipped %d mentions with missing features", skipped)
    if not golds:
        raise ValidationError("no mentions with complete features")
    inputs = [np.array(bucket, dtype=np.float64) for bucket in by_branch]
    return AlignData(inputs=inputs, targets=np.array(targets), golds=golds)


def mention_feature_map(mentions, features):
    table = {}
    for m in mentions:
        arrs = [f.of_mention(m) for f in features]
        if any(a is None for a in arrs):
            continue
        table[m.id] = arrs
    return table


def materialize_cascade(specs, graph, dictionary=None, neural=None, k=10):
    """Turn parsed cascade specs into components; neural is (model, index, features)."""
    components = []
    for kind, tau, label in specs:
        if kind == "dict":
            if dictionary is None:
                raise ValidationError("cascade uses 'dict' but no --dict was given")
            components.append(DictionaryComponent(dictionary))
        elif kind == "exact":
            components.append(ExactComponent(graph))
        elif kind in METRICS:
            components.append(FuzzyComponent(graph, kind, tau))
        else:
            if neural is None:
                raise ValidationError(
                    "cascade uses 'neural' but --model/--feature/--targets are missing"
                )
            model, index, features = neural
            name = f"neural:{label}" if label else "neural"
            components.append(NeuralComponent(model, index, features, k=k, name=name))
    return build_cascade(components)


def run_linking(cascade, mentions, workers):
    if workers == 1:
        return list(link_all(cascade, mentions))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(cascade.link, mentions))
    return [(m.id, r, p) for m, (r, p) in zip(mentions, results)]


# ---------------------------------------------------------------- commands


def cmd_ingest_kg(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_graph(graph, outdir / "concepts.tsv", outdir / "edges.tsv")
    log.info("ingested %d concepts, %d edges", len(graph), len(graph.edges))
    write_manifest(
        outdir / "manifest.txt",
        "ingest-kg",
        settings.resolved,
        {"concepts": args.concepts, "edges": args.edges},
        {"concepts": outdir / "concepts.tsv", "edges": outdir / "edges.tsv"},
        extra=[("result.concepts", len(graph)), ("result.edges", len(graph.edges))],
    )


def cmd_split(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    _require_file(args.corpus, "--corpus")
    mentions = load_corpus(args.corpus, graph)
    level = settings.get("level", "general")
    kind = settings.get("kind", "stratified")
    ratios = _parse_ratios(settings.get("ratios", ",".join(repr(r) for r in DEFAULT_RATIOS)))
    seed = settings.seed()
    split = make_split(mentions, level, kind, ratios=ratios, seed=seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_split(split, outdir)
    stats = split_stats(split)
    log.info(
        "split sizes train/dev/test = %d/%d/%d",
        stats["train_size"],
        stats["dev_size"],
        stats["test_size"],
    )
    write_manifest(
        outdir / "manifest.txt",
        "split",
        settings.resolved,
        {"corpus": args.corpus, "concepts": args.concepts, "edges": args.edges},
        {name: outdir / f"{name}.tsv" for name in PARTITIONS},
    )


def _parse_ratios(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(f"--ratios needs three comma-separated values, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValidationError(f"--ratios values must be numbers, got {text!r}")


def cmd_build_dict(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    meta = _read_split_meta(args.split)
    train_mentions = _load_partition(args.split, "train", graph)
    dictionary = build_dictionary(train_mentions, meta["level"])
    save_dictionary(dictionary, args.out)
    log.info("dictionary has %d entries", len(dictionary))
    settings.resolved["level"] = meta["level"]
    write_manifest(
        str(args.out) + ".manifest",
        "build-dict",
        settings.resolved,
        {
            "train": Path(args.split) / "train.tsv",
            "concepts": args.concepts,
            "edges": args.edges,
        },
        {"dictionary": args.out},
    )


def cmd_tune_threshold(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    meta = _read_split_meta(args.split)
    dev = _load_partition(args.split, "dev", graph)
    metric = settings.get("metric", None)
    if metric not in METRICS:
        raise ValidationError(f"--metric must be one of {METRICS}, got {metric!r}")
    grid_text = settings.get("grid", "")
    grid = [float(g) for g in grid_text.split(",")] if grid_text else None
    tau = tune_threshold(graph, dev, meta["level"], metric, grid=grid)
    hits = sum(
        1
        for m in dev
        if (r := fuzzy_match(graph, m.term, metric, tau)).is_hit
        and r.sctid == m.gold(meta["level"])
    )
    acc = hits / len(dev) if dev else 0.0
    log.info("tuned %s tau=%s (dev acc1=%.4f over %d mentions)", metric, tau, acc, len(dev))
    lines = [
        f"metric={metric}",
        f"tau={fmt_float(tau)}",
        f"dev_acc1={fmt_float(acc)}",
        f"n={len(dev)}",
    ]
    Path(args.out).write_text("".join(f"{l}\n" for l in lines), encoding="utf-8")
    settings.resolved["level"] = meta["level"]
    write_manifest(
        str(args.out) + ".manifest",
        "tune-threshold",
        settings.resolved,
        {
            "dev": Path(args.split) / "dev.tsv",
            "concepts": args.concepts,
            "edges": args.edges,
        },
        {"report": args.out},
        extra=[("result.tau", tau), ("result.dev_acc1", acc)],
    )


def cmd_node2vec(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    seed = settings.seed()
    walk_cfg = WalkConfig(
        p=settings.get("p", 1.0, float),
        q=settings.get("q", 1.0, float),
        walk_length=settings.get("walk-length", 80, int),
        walks_per_node=settings.get("walks-per-node", 10, int),
        seed=seed,
    )
    sgns_cfg = SgnsConfig(
        dim=settings.get("dim", 300, int),
        window=settings.get("window", 10, int),
        negatives=settings.get("negatives", 5, int),
        epochs=settings.get("epochs", 1, int),
        learning_rate=settings.get("lr", 0.025, float),
        seed=seed,
    )
    walks = generate_walks(graph, walk_cfg)
    store = train_sgns(walks, sgns_cfg)
    save_node_embeddings(store, args.out)
    log.info("trained %d node vectors of dim %d", len(store), store.dim)
    write_manifest(
        str(args.out) + ".manifest",
        "node2vec",
        settings.resolved,
        {"concepts": args.concepts, "edges": args.edges},
        {"vectors": args.out},
    )


def _train_config(settings, seed, n_train):
    batch = settings.get("batch-size", 64, int)
    if batch > n_train:
        log.info("batch size %d exceeds %d train pairs; clamping", batch, n_train)
        batch = max(2, n_train)
        settings.resolved["batch-size"] = batch
    return TrainConfig(
        alpha=settings.get("alpha", 0.2, float),
        batch_size=batch,
        epochs=settings.get("epochs", 50, int),
        learning_rate=settings.get("lr", 1e-4, float),
        weight_decay=settings.get("weight-decay", 0.01, float),
        seed=seed,
    )


def cmd_train_align(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    meta = _read_split_meta(args.split)
    level = meta["level"]
    train_mentions = _load_partition(args.split, "train", graph)
    dev_mentions = _load_partition(args.split, "dev", graph)
    features = load_features(args.feature)
    index = load_target_index(graph, args.targets)
    seed = settings.seed()
    use_relu = settings.get("relu", True, _cast_bool)
    config = ModelConfig(
        branches=tuple(f.branch() for f in features),
        out_dim=index.dim,
        use_relu=use_relu,
    )
    train_data = build_align_data(train_mentions, features, index, level)
    dev_data = build_align_data(dev_mentions, features, index, level)
    cfg = _train_config(settings, seed, len(train_data.golds))
    model = init_model(config, seed=seed)
    model, trace = train(model, train_data, dev_data, index.sctids, index.targets, cfg)
    save_model(model, args.out)
    best = max(trace)
    log.info("best dev acc1 %.4f over %d epochs", best, len(trace))
    inputs = {
        "train": Path(args.split) / "train.tsv",
        "dev": Path(args.split) / "dev.tsv",
        "concepts": args.concepts,
        "edges": args.edges,
    }
    for i, f in enumerate(features):
        inputs[f"feature{i}"] = f.spec.path
    for i, text in enumerate(args.targets):
        inputs[f"targets{i}"] = parse_target_spec(text)[1]
    settings.resolved["level"] = level
    settings.resolved["feature"] = ";".join(args.feature)
    settings.resolved["targets"] = ";".join(args.targets)
    write_manifest(
        str(args.out) + ".manifest",
        "train-align",
        settings.resolved,
        inputs,
        {"checkpoint": args.out},
        extra=[("result.best_dev_acc1", best)],
    )


def _neural_bundle(args, graph, mentions):
    _require_file(args.model, "--model")
    model = load_model(args.model)
    features = load_features(args.feature)
    index = load_target_index(graph, args.targets)
    table = mention_feature_map(mentions, features)
    return model, index, table


def cmd_link(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    meta = _read_split_meta(args.split)
    partition = settings.get("partition", "test")
    if partition not in PARTITIONS:
        raise ValidationError(f"--partition must be one of {PARTITIONS}, got {partition!r}")
    mentions = _load_partition(args.split, partition, graph)
    method = settings.get("method", None)
    if method not in LINK_METHODS:
        raise ValidationError(f"--method must be one of {LINK_METHODS}, got {method!r}")
    k = settings.get("k", 10, int)
    workers = settings.workers()
    seed = settings.seed()

    if method == "cascade":
        spec_text = settings.get("cascade-spec", "")
        specs = parse_cascade_spec(spec_text)
    elif method == "dictionary":
        specs = (("dict", None, None),)
    elif method in ("lev", "stoilos"):
        tau = settings.get("tau", None, float)
        if tau is None:
            raise ValidationError(f"--tau is required for method {method!r}")
        specs = ((method, tau, None),)
    elif method == "neural":
        specs = (("neural", None, None),)
    else:
        specs = (("exact", None, None),)

    kinds = {s[0] for s in specs}
    dictionary = None
    inputs = {
        "mentions": Path(args.split) / f"{partition}.tsv",
        "concepts": args.concepts,
        "edges": args.edges,
    }
    if "dict" in kinds:
        if not args.dict:
            raise ValidationError("this method needs --dict")
        _require_file(args.dict, "--dict")
        dictionary = load_dictionary(args.dict)
        inputs["dictionary"] = args.dict
    neural = None
    if "neural" in kinds:
        if not args.model or not args.feature or not args.targets:
            raise ValidationError("neural linking needs --model, --feature, and --targets")
        neural = _neural_bundle(args, graph, mentions)
        inputs["model"] = args.model
        for i, f in enumerate(args.feature):
            inputs[f"feature{i}"] = parse_feature_spec(f).path
        for i, t in enumerate(args.targets):
            inputs[f"targets{i}"] = parse_target_spec(t)[1]
        settings.resolved["feature"] = ";".join(args.feature)
        settings.resolved["targets"] = ";".join(args.targets)

    cascade = materialize_cascade(specs, graph, dictionary=dictionary, neural=neural, k=k)
    results = run_linking(cascade, mentions, workers)
    write_predictions(args.out, results)
    answered = sum(1 for _, r, _ in results if r is not None)
    log.info("linked %d/%d mentions", answered, len(results))
    settings.resolved["level"] = meta["level"]
    write_manifest(
        str(args.out) + ".manifest",
        "link",
        settings.resolved,
        inputs,
        {"predictions": args.out},
    )


def cmd_eval(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    meta = _read_split_meta(args.split)
    partition = settings.get("partition", "test")
    if partition not in PARTITIONS:
        raise ValidationError(f"--partition must be one of {PARTITIONS}, got {partition!r}")
    mentions = _load_partition(args.split, partition, graph)
    _require_file(args.predictions, "--predictions")
    method = settings.get("method", None)
    if not method:
        raise ValidationError("--method (a report label) is required")
    fmt = settings.get("format", "text")
    report = score(args.predictions, mentions, meta["level"])
    table = report_table({method: report}, format=fmt)
    sys.stdout.write(table)
    Path(args.out).write_text(table, encoding="utf-8")
    outputs = {"report": args.out}
    if args.machine_out:
        split_name = f"{meta['kind']}-{partition}"
        Path(args.machine_out).write_text(
            format_machine_report(method, split_name, meta["level"], report),
            encoding="utf-8",
        )
        outputs["machine"] = args.machine_out
    settings.resolved["level"] = meta["level"]
    write_manifest(
        str(args.out) + ".manifest",
        "eval",
        settings.resolved,
        {
            "predictions": args.predictions,
            "mentions": Path(args.split) / f"{partition}.tsv",
            "concepts": args.concepts,
            "edges": args.edges,
        },
        outputs,
    )


def _synthetic_word_vectors(graph, mentions, dim, seed):
    """Seeded random token vectors covering labels and mention terms."""
    vocab = set()
    for sctid in graph.sctids():
        for label in graph.labels_of(sctid):
            vocab.update(tokenize(label))
    for m in mentions:
        vocab.update(tokenize(m.term))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 104729)))
    vectors = {token: (rng.random(dim) - 0.5) / dim for token in sorted(vocab)}
    return WordVectorStore(dim, vectors)


class BenchFeature:
    """Term-embedding feature over a word-vector store already in memory."""

    def __init__(self, store):
        self.store = store
        self.dim = store.dim

    def of_mention(self, mention):
        return term_embedding(self.store, mention.term)[0]


def cmd_bench(args):
    settings = Settings(args)
    graph = _load_graph_from(args)
    _require_file(args.corpus, "--corpus")
    mentions = load_corpus(args.corpus, graph)
    level = settings.get("level", "general")
    kind = settings.get("kind", "stratified")
    ratios = _parse_ratios(settings.get("ratios", ",".join(repr(r) for r in DEFAULT_RATIOS)))
    seed = settings.seed()
    fmt = settings.get("format", "text")
    k = settings.get("k", 10, int)
    dim = settings.get("dim", 50, int)
    workers = settings.workers()

    workdir = Path(args.workdir)
    (workdir / "preds").mkdir(parents=True, exist_ok=True)
    splitdir = workdir / "split"
    splitdir.mkdir(parents=True, exist_ok=True)

    split = make_split(mentions, level, kind, ratios=ratios, seed=seed)
    write_split(split, splitdir)
    log.info("split: %d/%d/%d", len(split.train), len(split.dev), len(split.test))

    dictionary = build_dictionary(split.train, level)
    save_dictionary(dictionary, workdir / "dict.tsv")

    tau_lev = tune_threshold(graph, split.dev, level, "lev")
    tau_sto = tune_threshold(graph, split.dev, level, "stoilos")
    log.info("tuned thresholds lev=%s stoilos=%s", tau_lev, tau_sto)

    walk_cfg = WalkConfig(
        walk_length=settings.get("walk-length", 20, int),
        walks_per_node=settings.get("walks-per-node", 5, int),
        seed=seed,
    )
    sgns_cfg = SgnsConfig(dim=dim, window=5, seed=seed)
    node_store = train_sgns(generate_walks(graph, walk_cfg), sgns_cfg)
    save_node_embeddings(node_store, workdir / "nodevec.txt")

    if args.word_vectors:
        _require_file(args.word_vectors, "--word-vectors")
        word_store = load_word_vectors(args.word_vectors)
    else:
        log.info("no --word-vectors given; synthesizing seeded random vectors")
        word_store = _synthetic_word_vectors(graph, mentions, dim, seed)
    save_word_vectors(word_store, workdir / "wordvec.txt")

    index = build_target_index(graph, [("label", word_store), ("node2vec", node_store)])
    features = [BenchFeature(word_store)]
    config = ModelConfig(
        branches=(BranchSpec(kind="raw", in_dim=word_store.dim),),
        out_dim=index.dim,
        use_relu=settings.get("relu", True, _cast_bool),
    )
    train_data = build_align_data(split.train, features, index, level)
    dev_data = build_align_data(split.dev, features, index, level)
    cfg = _train_config(settings, seed, len(train_data.golds))
    model = init_model(config, seed=seed)
    model, trace = train(model, train_data, dev_data, index.sctids, index.targets, cfg)
    save_model(model, workdir / "align.ckpt")
    log.info("alignment best dev acc1 %.4f", max(trace))

    test_mentions = split.test
    feature_table = mention_feature_map(test_mentions, features)
    reports = {}
    outputs = {
        "dictionary": workdir / "dict.tsv",
        "node_vectors": workdir / "nodevec.txt",
        "word_vectors": workdir / "wordvec.txt",
        "checkpoint": workdir / "align.ckpt",
        "report": workdir / "report.txt",
        "machine": workdir / "report.kv",
    }
    machine_blocks = []
    for row_id, template in BENCH_LADDER:
        spec_text = template.format(lev=tau_lev, sto=tau_sto)
        specs = parse_cascade_spec(spec_text)
        cascade = materialize_cascade(
            specs,
            graph,
            dictionary=dictionary,
            neural=(model, index, feature_table),
            k=k,
        )
        results = run_linking(cascade, test_mentions, workers)
        pred_path = workdir / "preds" / f"{row_id}.tsv"
        write_predictions(pred_path, results)
        outputs[f"predictions.{row_id}"] = pred_path
        method = f"{row_id} {spec_text}"
        report = score(pred_path, test_mentions, level)
        reports[method] = report
        machine_blocks.append(
            format_machine_report(method, f"{kind}-test", level, report)
        )

    table = report_table(reports, format=fmt)
    sys.stdout.write(table)
    (workdir / "report.txt").write_text(table, encoding="utf-8")
    (workdir / "report.kv").write_text("\n".join(machine_blocks), encoding="utf-8")
    settings.resolved["tau.lev"] = tau_lev
    settings.resolved["tau.stoilos"] = tau_sto
    settings.resolved["word-vectors"] = args.word_vectors or ""
    for name in PARTITIONS:
        outputs[f"split.{name}"] = splitdir / f"{name}.tsv"
    write_manifest(
        workdir / "manifest.txt",
        "bench",
        settings.resolved,
        {"corpus": args.corpus, "concepts": args.concepts, "edges": args.edges},
        outputs,
    )


# ---------------------------------------------------------------- parser


def _add_common(sub):
    sub.add_argument("--config", help="key=value config file (flags win)")
    sub.add_argument("--seed", type=int, help="RNG seed (default 42, logged)")
    sub.add_argument("--workers", type=int, help="parallel workers; 1 is bit-reproducible")


def _add_graph(sub):
    sub.add_argument("--concepts", required=True, help="concepts TSV")
    sub.add_argument("--edges", required=True, help="IS-A edges TSV")


def _add_neural(sub):
    sub.add_argument("--model", help="alignment checkpoint")
    sub.add_argument("--feature", action="append", default=[], help="kind:source:path[:out_dim]")
    sub.add_argument("--targets", action="append", default=[], help="label:path or node2vec:path")


def build_parser():
    parser = Parser(prog="medlink", description="Biomedical entity linking pipeline.")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")

    sub = subs.add_parser("ingest-kg", help="validate and normalize a knowledge graph")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=cmd_ingest_kg)

    sub = subs.add_parser("split", help="make a stratified or zero-shot split")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--level", choices=LEVELS)
    sub.add_argument("--kind", choices=KINDS)
    sub.add_argument("--ratios", help="train,dev,test fractions")
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=cmd_split)

    sub = subs.add_parser("build-dict", help="build the train-partition dictionary")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--split", required=True, help="split directory")
    sub.add_argument("--out", required=True, help="dictionary TSV")
    sub.set_defaults(func=cmd_build_dict)

    sub = subs.add_parser("tune-threshold", help="grid-search a fuzzy threshold on dev")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--split", required=True)
    sub.add_argument("--metric", choices=METRICS)
    sub.add_argument("--grid", help="comma-separated tau grid")
    sub.add_argument("--out", required=True, help="report file")
    sub.set_defaults(func=cmd_tune_threshold)

    sub = subs.add_parser("node2vec", help="biased walks + skip-gram node embeddings")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--p", type=float)
    sub.add_argument("--q", type=float)
    sub.add_argument("--walk-length", type=int)
    sub.add_argument("--walks-per-node", type=int)
    sub.add_argument("--dim", type=int)
    sub.add_argument("--window", type=int)
    sub.add_argument("--negatives", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--out", required=True, help="vectors file")
    sub.set_defaults(func=cmd_node2vec)

    sub = subs.add_parser("train-align", help="train the alignment model")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--split", required=True)
    _add_neural(sub)
    sub.add_argument("--relu", action=argparse.BooleanOptionalAction, default=None)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--weight-decay", type=float)
    sub.add_argument("--out", required=True, help="checkpoint file")
    sub.set_defaults(func=cmd_train_align)

    sub = subs.add_parser("link", help="produce ranked predictions for a partition")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--split", required=True)
    sub.add_argument("--partition", choices=PARTITIONS)
    sub.add_argument("--method", choices=LINK_METHODS)
    sub.add_argument("--dict", help="dictionary TSV")
    sub.add_argument("--tau", type=float)
    sub.add_argument("--cascade-spec", help="e.g. dict+stoilos:0.07+neural:n6")
    _add_neural(sub)
    sub.add_argument("--k", type=int)
    sub.add_argument("--out", required=True, help="predictions file")
    sub.set_defaults(func=cmd_link)

    sub = subs.add_parser("eval", help="score a predictions file")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--split", required=True)
    sub.add_argument("--partition", choices=PARTITIONS)
    sub.add_argument("--predictions", required=True)
    sub.add_argument("--method", help="report row label")
    sub.add_argument("--format", choices=("text", "csv"))
    sub.add_argument("--out", required=True, help="rendered table file")
    sub.add_argument("--machine-out", help="key=value report file")
    sub.set_defaults(func=cmd_eval)

    sub = subs.add_parser("bench", help="full pipeline over the back-off ladder")
    _add_graph(sub)
    _add_common(sub)
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--level", choices=LEVELS)
    sub.add_argument("--kind", choices=KINDS)
    sub.add_argument("--ratios")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--walk-length", type=int)
    sub.add_argument("--walks-per-node", type=int)
    sub.add_argument("--word-vectors", help="optional pretrained word vectors")
    sub.add_argument("--relu", action=argparse.BooleanOptionalAction, default=None)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--weight-decay", type=float)
    sub.add_argument("--k", type=int)
    sub.add_argument("--format", choices=("text", "csv"))
    sub.add_argument("--workdir", required=True)
    sub.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_usage(sys.stderr)
            print("medlink: error: a subcommand is required", file=sys.stderr)
            return 1
        started = time.perf_counter()
        args.func(args)
        log.info("%s completed in %.2f s", args.command, time.perf_counter() - started)
        return 0
    except TrainingDivergedError as exc:
        print(f"medlink: runtime error: {exc}", file=sys.stderr)
        return 2
    except (MedlinkError, FileNotFoundError) as exc:
        message = exc.args[0] if isinstance(exc, NotFoundError) and exc.args else exc
        print(f"medlink: error: {message}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"medlink: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
