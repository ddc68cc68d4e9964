"""The five case-study experiments as seeded procedures from data to a Report.

Each task is split into a training phase (returns named networks and their
loss histories) and an evaluation phase (networks in, Report out), so the CLI
can train once and evaluate saved models later. ``run_*`` chains both.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .architectures import (dense_autoencoder, denoising_net, detection_net, hashing_net, hidden_width,
                            variational_net)
from .autodiff import ContractError
from .data.images import ImageSet, image_grid, image_strip, read_images
from .data.openml import FetchError, NotFoundError, default_cache_dir, fetch_openml
from .data.synthetic import (faces_images, manifold_table, planar_table, shapes_images, topic_corpus,
                             traffic_table)
from .data.tabular import Dataset, parse_arff, parse_csv, prepare, set_target
from .layers import Network
from .metrics import (confusion_at, hamming, intercluster_distance, pr_curve, reconstruction_errors,
                      spearman, tfidf_rank)
from .objectives import NoiseSpec, ObjectiveSpec, Penalty, corrupt, total_objective
from .optim import Optimizer, fit
from .pca import pca_fit, pca_project, pca_reconstruct
from .prng import make_rng, normal

log = logging.getLogger(__name__)

TASKS = ("visualize", "denoise", "hash", "detect", "generate")

TASK_DEFAULTS: dict[str, dict[str, Any]] = {
    "visualize": {
        "dataset": {"openml_id": 573, "fallback": "manifold"},
        "architecture": {"code": 2, "hidden": None},
        "objective": {"distance": "mse", "penalties": [{"kind": "contractive", "weight": 1e-3}]},
        "optimizer": {"kind": "adam", "lr": 1e-2},
        "epochs": 100, "batch_size": 32, "test_fraction": 0.2,
        "options": {},
    },
    "denoise": {
        "dataset": {"synthetic": "shapes"},
        "architecture": {"scale": 0.25},
        "objective": {"distance": "mse", "corruption": {"kind": "zero_mask", "p": 0.1}},
        "optimizer": {"kind": "adam", "lr": 3e-3},
        "epochs": 10, "batch_size": 16, "test_fraction": 0.2,
        "options": {"examples": 8},
    },
    "hash": {
        "dataset": {"synthetic": "topics"},
        "architecture": {"bits": 7, "hidden": 512, "sigma": 0.2},
        "objective": {"distance": "bce"},
        "optimizer": {"kind": "adam", "lr": 1e-3},
        "epochs": 100, "batch_size": 32, "test_fraction": 0.2,
        "options": {"threshold": 0.5, "top_terms": 6},
    },
    "detect": {
        "dataset": {"synthetic": "traffic"},
        "architecture": {"code": 2},
        "objective": {"distance": "mse"},
        "optimizer": {"kind": "adam", "lr": 1e-2},
        "epochs": 100, "batch_size": 32, "test_fraction": 0.2,
        "options": {"threshold_sigmas": 6.0, "drop_train_anomalies": False},
    },
    "generate": {
        "dataset": {"synthetic": "faces"},
        "architecture": {"latent": 4},
        "objective": {"distance": "bce", "penalties": [{"kind": "vae_kl", "weight": 1.0}]},
        "optimizer": {"kind": "adam", "lr": 3e-3},
        "epochs": 200, "batch_size": 32, "test_fraction": 0.0,
        "options": {"kl_scale": "per_pixel", "lambda_steps": 9, "samples": 8, "pair": [0, 1]},
    },
}

COMMON_DEFAULTS = {"patience": 10, "min_delta": 1e-6, "record_duration": False}

# evaluation metrics every report of the task must carry
TASK_METRICS = {
    "visualize": ("pca_train_mse", "pca_test_mse", "basic_train_mse", "basic_test_mse",
                  "contractive_train_mse", "contractive_test_mse"),
    "denoise": ("reference_mse_mean", "reference_reduction_mean", "noisy_mse_mean", "noisy_mse_std",
                "noisy_reduction_mean", "basic_mse_mean", "basic_mse_std", "basic_reduction_mean",
                "basic_reduction_std", "denoising_mse_mean", "denoising_mse_std",
                "denoising_reduction_mean", "denoising_reduction_std"),
    "hash": ("n_clusters", "n_buckets", "spearman", "test_bce"),
    "detect": ("threshold", "train_error_mean", "train_error_std", "precision", "recall",
               "tp", "fp", "fn", "n_test", "n_anomalies"),
    "generate": ("latent_mean_abs_max", "latent_std_min", "latent_std_max", "interpolation_min",
                 "interpolation_max", "train_bce"),
}

SYNTHETIC: dict[str, Callable] = {
    "manifold": manifold_table,
    "planar": planar_table,
    "traffic": traffic_table,
    "shapes": shapes_images,
    "faces": faces_images,
    "topics": topic_corpus,
}


@dataclass
class ExperimentConfig:
    task: str
    seed: int
    dataset: dict
    architecture: dict = field(default_factory=dict)
    objective: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    epochs: int = 100
    batch_size: int = 32
    patience: int = 10
    min_delta: float = 1e-6
    test_fraction: float = 0.2
    options: dict = field(default_factory=dict)
    record_duration: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ContractError(f"unknown task {self.task!r}")
        if self.seed is None:
            raise ContractError("seed is mandatory")
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")

    @classmethod
    def for_task(cls, task: str, seed: int, **overrides) -> "ExperimentConfig":
        """Task defaults with keyword overrides (dict sections are merged one level deep)."""
        if task not in TASK_DEFAULTS:
            raise ContractError(f"unknown task {task!r}")
        base = copy.deepcopy({**COMMON_DEFAULTS, **TASK_DEFAULTS[task]})
        for key, value in overrides.items():
            if key in ("architecture", "objective", "optimizer", "options") and isinstance(value, dict):
                base[key] = {**base[key], **value}
            else:
                base[key] = value
        return cls(task=task, seed=seed, **base)

    def to_dict(self) -> dict:
        return {
            "task": self.task, "seed": self.seed, "dataset": self.dataset,
            "architecture": self.architecture, "objective": self.objective,
            "optimizer": self.optimizer, "epochs": self.epochs, "batch_size": self.batch_size,
            "patience": self.patience, "min_delta": self.min_delta,
            "test_fraction": self.test_fraction, "options": self.options,
            "record_duration": self.record_duration,
        }


def objective_spec(d: dict) -> ObjectiveSpec:
    pens = tuple(Penalty(p["kind"], float(p.get("weight", 1.0)), float(p.get("rho", 0.05)))
                 for p in d.get("penalties") or ())
    corr = d.get("corruption")
    noise = NoiseSpec(corr["kind"], float(corr.get("sigma", 0.1)), float(corr.get("p", 0.1))) if corr else None
    return ObjectiveSpec(d.get("distance", "mse"), pens, noise, d.get("class_weight"))


@dataclass
class Table:
    header: list[str]
    rows: list[tuple]


@dataclass
class Plot:
    kind: str  # scatter | line
    table: str
    x: str
    y: str
    value: Optional[str] = None
    title: str = ""


@dataclass
class Report:
    task: str
    metrics: dict[str, float]
    tables: dict[str, Table] = field(default_factory=dict)
    images: dict[str, np.ndarray] = field(default_factory=dict)
    plots: dict[str, Plot] = field(default_factory=dict)
    models: dict[str, Network] = field(default_factory=dict)
    source: str = ""

    def validate(self) -> "Report":
        missing = [m for m in TASK_METRICS.get(self.task, ()) if m not in self.metrics]
        if missing:
            raise ContractError(f"{self.task} report lacks metrics {missing}")
        return self


@dataclass
class Corpus:
    """Bag-of-words documents: binary presence, raw counts and the vocabulary."""

    binary: np.ndarray
    counts: np.ndarray
    vocabulary: list[str]


@dataclass
class Trained:
    models: dict[str, Network]
    histories: dict[str, list[float]]


# ---------------------------------------------------------------- data

def _read_table(path: Path) -> Dataset:
    data = path.read_bytes()
    return parse_arff(data) if path.suffix.lower() == ".arff" else parse_csv(data)


def load_source(source: dict, cache_dir=None, transport=None):
    """Resolve a dataset source to a Dataset, ImageSet or Corpus, plus a description."""
    if "synthetic" in source:
        name = source["synthetic"]
        if name not in SYNTHETIC:
            raise ContractError(f"unknown synthetic dataset {name!r}; choose from {sorted(SYNTHETIC)}")
        out = SYNTHETIC[name](**source.get("params", {}))
        if name == "topics":
            binary, counts, vocab, _ = out
            out = Corpus(binary, counts, vocab)
        return out, f"synthetic:{name}"
    if "openml_id" in source:
        oid = source["openml_id"]
        try:
            raw = fetch_openml(oid, cache_dir or default_cache_dir(), transport)
            return parse_arff(raw), f"openml:{oid}"
        except NotFoundError:
            raise
        except FetchError as exc:
            fallback = source.get("fallback")
            if not fallback:
                raise
            log.warning("OpenML %s unavailable (%s); using synthetic %s instead", oid, exc, fallback)
            data, desc = load_source({"synthetic": fallback, "params": source.get("params", {})})
            return data, f"{desc} (offline fallback for openml:{oid})"
    if "image_dir" in source:
        root = Path(source["image_dir"])
        paths = sorted(p for p in root.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
        if not paths:
            raise ContractError(f"no PGM/PPM files in {root}")
        return read_images(paths), f"images:{root}"
    if "path" in source:
        path = Path(source["path"])
        return _read_table(path), f"file:{path}"
    raise ContractError("dataset needs one of synthetic, openml_id, path, image_dir")


def _split_rows(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = make_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def _tabular(data, cfg: ExperimentConfig) -> Dataset:
    if not isinstance(data, Dataset):
        raise ContractError(f"{cfg.task} needs a tabular dataset")
    if data.target is None:
        data = set_target(data, cfg.dataset.get("target"))
    return prepare(data, test_fraction=cfg.test_fraction, seed=cfg.seed)


def _images(data, cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(data, ImageSet):
        raise ContractError(f"{cfg.task} needs image input, got {type(data).__name__}")
    tr, te = _split_rows(len(data), cfg.test_fraction, cfg.seed)
    return data.images[tr], data.images[te]


def _corpus(data, cfg: ExperimentConfig) -> tuple[Corpus, Corpus]:
    if isinstance(data, Dataset):
        if cfg.dataset.get("target"):
            data = set_target(data, cfg.dataset["target"])
        X = data.matrix()
        data = Corpus(X, X, data.names)
    if not isinstance(data, Corpus):
        raise ContractError("hash needs a bag-of-words matrix")
    if not np.all((data.binary == 0) | (data.binary == 1)):
        raise ContractError("hash needs binary (0/1) features")
    tr, te = _split_rows(len(data.binary), cfg.test_fraction, cfg.seed)
    pick = lambda rows: Corpus(data.binary[rows], data.counts[rows], data.vocabulary)
    return pick(tr), pick(te)


def _seeds(seed: int) -> tuple[int, np.random.Generator, np.random.Generator]:
    """(network init seed, training stream, evaluation stream) from one seed."""
    ss = np.random.SeedSequence(seed)
    train_ss, eval_ss = ss.spawn(2)
    return seed, np.random.Generator(np.random.PCG64(train_ss)), np.random.Generator(np.random.PCG64(eval_ss))


def _train(net: Network, X: np.ndarray, spec: ObjectiveSpec, cfg: ExperimentConfig,
           rng: np.random.Generator, labels=None) -> list[float]:
    net.train()
    opt = Optimizer(cfg.optimizer.get("kind", "adam"), cfg.optimizer.get("lr"))
    lab = None if labels is None else np.asarray(labels)

    def loss(tape, idx):
        return total_objective(tape, X[idx], spec, net, rng, None if lab is None else lab[idx])

    hist = fit(net.parameters(), loss, len(X), opt, rng, epochs=cfg.epochs, batch_size=cfg.batch_size,
               patience=cfg.patience, min_delta=cfg.min_delta)
    net.eval()
    log.info("trained %d epochs, final loss %.6g", len(hist), hist[-1])
    return hist


def _history_table(histories: dict[str, list[float]]) -> Table:
    rows = [(name, i + 1, loss) for name, h in histories.items() for i, loss in enumerate(h)]
    return Table(["model", "epoch", "loss"], rows)


def _need_test(cfg: ExperimentConfig, n_test: int):
    if n_test == 0:
        raise ContractError(f"{cfg.task} needs a non-empty test split (test_fraction > 0)")


# ---------------------------------------------------------------- visualize

def _visual_shape(n: int, cfg: ExperimentConfig) -> list[int]:
    code = int(cfg.architecture.get("code", 2))
    if n <= code:
        raise ContractError(f"visualize needs more than {code} features, got {n}")
    hidden = cfg.architecture.get("hidden") or hidden_width(n, code)
    return [int(hidden), code]


def train_visualize(cfg: ExperimentConfig, data) -> Trained:
    ds = _tabular(data, cfg)
    Xtr = ds.train_matrix()
    widths = _visual_shape(Xtr.shape[1], cfg)
    spec = objective_spec(cfg.objective)
    basic_spec = ObjectiveSpec(spec.distance, (), spec.corruption, None)
    models, hist = {}, {}
    for name, s in (("basic", basic_spec), ("contractive", spec)):
        seed, rng, _ = _seeds(cfg.seed)
        net = dense_autoencoder(Xtr.shape[1], widths, seed=seed)
        hist[name] = _train(net, Xtr, s, cfg, rng)
        models[name] = net
    return Trained(models, hist)


def _mse(net_or_fn, X) -> float:
    return float(reconstruction_errors(net_or_fn, X).mean())


def evaluate_visualize(cfg: ExperimentConfig, data, models: dict[str, Network]) -> Report:
    ds = _tabular(data, cfg)
    Xtr, Xte = ds.train_matrix(), ds.test_matrix()
    _need_test(cfg, len(Xte))
    code = int(cfg.architecture.get("code", 2))
    pca = pca_fit(Xtr, code)
    pca_err = lambda X: float(np.mean(np.mean((X - pca_reconstruct(pca, pca_project(pca, X))) ** 2, axis=1)))
    metrics = {"pca_train_mse": pca_err(Xtr), "pca_test_mse": pca_err(Xte)}
    for name in ("basic", "contractive"):
        metrics[f"{name}_train_mse"] = _mse(models[name], Xtr)
        metrics[f"{name}_test_mse"] = _mse(models[name], Xte)
    target = ds.test_target()
    embeds = {"embedding": models["contractive"].encode_array(Xte),
              "embedding_basic": models["basic"].encode_array(Xte),
              "embedding_pca": pca_project(pca, Xte)}
    tables, plots = {}, {}
    for name, Z in embeds.items():
        tables[name] = Table(["x", "y", "target"],
                             [(float(z[0]), float(z[1] if len(z) > 1 else 0.0), float(t)) for z, t in zip(Z, target)])
        plots[name] = Plot("scatter", name, "x", "y", "target", name.replace("_", " "))
    return Report("visualize", metrics, tables, plots=plots, models=models)


# ---------------------------------------------------------------- denoise

def train_denoise(cfg: ExperimentConfig, data) -> Trained:
    tr, _ = _images(data, cfg)
    spec = objective_spec(cfg.objective)
    if spec.corruption is None:
        raise ContractError("denoise needs a corruption in the objective")
    h, w, c = tr.shape[1:]
    models, hist = {}, {}
    for name, s in (("basic", ObjectiveSpec(spec.distance, spec.penalties, None)), ("denoising", spec)):
        seed, rng, _ = _seeds(cfg.seed)
        net = denoising_net(h, w, c, float(cfg.architecture.get("scale", 0.25)), seed=seed)
        hist[name] = _train(net, tr, s, cfg, rng)
        models[name] = net
    return Trained(models, hist)


def image_mse_255(a, b) -> np.ndarray:
    """Per-image mean squared error in 0-255 intensity units."""
    d = (np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) * 255.0
    return np.mean(d.reshape(len(d), -1) ** 2, axis=1)


def noise_reduction(err_noisy, err_out) -> np.ndarray:
    """Per-image fractional decrease 1 - err_out / err_noisy."""
    err_noisy = np.asarray(err_noisy, dtype=float)
    if np.any(err_noisy <= 0):
        raise ContractError("noise reduction undefined for an image the noise left unchanged")
    return 1.0 - np.asarray(err_out, dtype=float) / err_noisy


def evaluate_denoise(cfg: ExperimentConfig, data, models: dict[str, Network]) -> Report:
    _, te = _images(data, cfg)
    _need_test(cfg, len(te))
    spec = objective_spec(cfg.objective)
    _, _, eval_rng = _seeds(cfg.seed)
    noisy = corrupt(te, spec.corruption, eval_rng)
    changed = image_mse_255(noisy, te) > 0
    if not changed.all():
        log.warning("%d test images untouched by the noise are excluded", int((~changed).sum()))
        te, noisy = te[changed], noisy[changed]
    err_noisy = image_mse_255(noisy, te)
    rows = {"reference": image_mse_255(te, te), "noisy": err_noisy}
    outputs = {}
    for name in ("basic", "denoising"):
        outputs[name] = models[name].predict(noisy)
        rows[name] = image_mse_255(outputs[name], te)
    metrics = {}
    for name, err in rows.items():
        red = noise_reduction(err_noisy, err)
        metrics[f"{name}_mse_mean"] = float(err.mean())
        metrics[f"{name}_mse_std"] = float(err.std())
        metrics[f"{name}_reduction_mean"] = float(red.mean())
        metrics[f"{name}_reduction_std"] = float(red.std())
    metrics["n_test_images"] = int(len(te))
    table = Table(["index", "noisy_mse", "basic_mse", "denoising_mse", "basic_reduction", "denoising_reduction"],
                  [(i, float(err_noisy[i]), float(rows["basic"][i]), float(rows["denoising"][i]),
                    float(1 - rows["basic"][i] / err_noisy[i]), float(1 - rows["denoising"][i] / err_noisy[i]))
                   for i in range(len(te))])
    k = min(int(cfg.options.get("examples", 8)), len(te))
    grid = image_grid(np.concatenate([te[:k], noisy[:k], outputs["basic"][:k], outputs["denoising"][:k]]), cols=k)
    return Report("denoise", metrics, {"denoise": table}, images={"denoise_examples": grid}, models=models)


# ---------------------------------------------------------------- hash

def binarize(codes, threshold: float = 0.5) -> list[str]:
    """Code rows to bit strings; a unit at or above ``threshold`` maps to 1."""
    return ["".join("1" if c >= threshold else "0" for c in row) for row in np.atleast_2d(codes)]


def gray_rank(bits: str) -> int:
    """Position of ``bits`` in the binary-reflected Gray sequence."""
    g = int(bits, 2)
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


def gray_sequence(k: int) -> list[str]:
    return [format(i ^ (i >> 1), f"0{k}b") for i in range(2 ** k)]


def hamming_buckets(X: np.ndarray, clusters: dict[str, list[int]]) -> dict[int, list[float]]:
    """Intercluster cosine distance for every unordered cluster pair, keyed by Hamming distance.

    A cluster paired with itself lands in bucket 0. Rows that are all zero
    have no direction and are left out.
    """
    nonzero = np.linalg.norm(X, axis=1) > 0
    keys = sorted(h for h, rows in clusters.items() if nonzero[rows].any())
    members = {h: X[[i for i in clusters[h] if nonzero[i]]] for h in keys}
    buckets: dict[int, list[float]] = {}
    for a_i, a in enumerate(keys):
        for b in keys[a_i:]:
            buckets.setdefault(hamming(a, b), []).append(intercluster_distance(members[a], members[b]))
    return buckets


def train_hash(cfg: ExperimentConfig, data) -> Trained:
    tr, _ = _corpus(data, cfg)
    arch = cfg.architecture
    seed, rng, _ = _seeds(cfg.seed)
    net = hashing_net(tr.binary.shape[1], int(arch.get("bits", 7)), int(arch.get("hidden", 512)),
                      float(arch.get("sigma", 0.2)), seed=seed)
    hist = _train(net, tr.binary, objective_spec(cfg.objective), cfg, rng)
    return Trained({"hash": net}, {"hash": hist})


def evaluate_hash(cfg: ExperimentConfig, data, models: dict[str, Network]) -> Report:
    _, te = _corpus(data, cfg)
    _need_test(cfg, len(te.binary))
    net = models["hash"]
    X = te.binary
    codes = net.encode_array(X)
    hashes = binarize(codes, float(cfg.options.get("threshold", 0.5)))
    clusters: dict[str, list[int]] = {}
    for i, h in enumerate(hashes):
        clusters.setdefault(h, []).append(i)
    buckets = hamming_buckets(X, clusters)
    hs = sorted(buckets)
    means = [float(np.mean(buckets[h])) for h in hs]
    R = np.clip(net.predict(X), 1e-7, 1 - 1e-7)
    bce = -np.mean(X * np.log(R) + (1 - X) * np.log(1 - R))
    metrics = {"n_clusters": len(clusters), "n_buckets": len(hs),
               "spearman": spearman(hs, means) if len(hs) > 1 else 0.0, "test_bce": float(bce)}
    for h, m in zip(hs, means):
        metrics[f"bucket_{h}_mean_distance"] = m
    m = int(cfg.options.get("top_terms", 6))
    order = sorted(clusters, key=gray_rank)
    cluster_rows = []
    for h in order:
        rows = clusters[h]
        terms = tfidf_rank(te.counts[rows], te.counts, m, te.vocabulary)
        cluster_rows.append((gray_rank(h), h, len(rows), " ".join(t for t, _ in terms)))
    tables = {
        "hashes": Table(["index", "hash"], list(enumerate(hashes))),
        "clusters": Table(["gray_rank", "hash", "size", "top_terms"], cluster_rows),
        "buckets": Table(["hamming", "pairs", "mean_distance"],
                         [(h, len(buckets[h]), mm) for h, mm in zip(hs, means)]),
    }
    plots = {"buckets": Plot("line", "buckets", "hamming", "mean_distance", None,
                             "mean intercluster cosine distance by Hamming distance")}
    return Report("hash", metrics, tables, plots=plots, models=models)


# ---------------------------------------------------------------- detect

def anomaly_threshold(train_errors, sigmas: float = 6.0) -> float:
    """mean + sigmas * sample std of the training errors (std 0 for one error)."""
    e = np.asarray(train_errors, dtype=float)
    std = float(e.std(ddof=1)) if len(e) > 1 else 0.0
    return float(e.mean() + sigmas * std)


def _detect_split(cfg: ExperimentConfig, data):
    ds = _tabular(data, cfg)
    Xtr, ytr = ds.train_matrix(), ds.train_target()
    bad = np.asarray(ytr) != 0
    if bad.any():
        if not cfg.options.get("drop_train_anomalies", False):
            raise ContractError(f"training split holds {int(bad.sum())} anomalous rows; "
                                "remove them or set options.drop_train_anomalies")
        log.info("dropping %d anomalous training rows", int(bad.sum()))
        Xtr = Xtr[~bad]
    return Xtr, ds.test_matrix(), (np.asarray(ds.test_target()) != 0).astype(int)


def train_detect(cfg: ExperimentConfig, data) -> Trained:
    Xtr, _, _ = _detect_split(cfg, data)
    seed, rng, _ = _seeds(cfg.seed)
    net = detection_net(Xtr.shape[1], int(cfg.architecture.get("code", 2)), seed=seed)
    hist = _train(net, Xtr, objective_spec(cfg.objective), cfg, rng)
    return Trained({"detect": net}, {"detect": hist})


def evaluate_detect(cfg: ExperimentConfig, data, models: dict[str, Network]) -> Report:
    Xtr, Xte, yte = _detect_split(cfg, data)
    _need_test(cfg, len(Xte))
    net = models["detect"]
    etr = reconstruction_errors(net, Xtr)
    ete = reconstruction_errors(net, Xte)
    tau = anomaly_threshold(etr, float(cfg.options.get("threshold_sigmas", 6.0)))
    pt = confusion_at(ete, yte, tau)
    metrics = {"threshold": tau, "train_error_mean": float(etr.mean()),
               "train_error_std": float(etr.std(ddof=1)) if len(etr) > 1 else 0.0,
               "precision": pt.precision, "recall": pt.recall, "tp": pt.tp, "fp": pt.fp, "fn": pt.fn,
               "n_test": int(len(Xte)), "n_anomalies": int(yte.sum())}
    flags = ete > tau
    tables = {"errors": Table(["index", "error", "flag", "label"],
                              [(i, float(e), int(f), int(y)) for i, (e, f, y) in enumerate(zip(ete, flags, yte))])}
    plots = {"errors": Plot("scatter", "errors", "index", "error", "label", "test reconstruction error")}
    if yte.any():
        curve = pr_curve(ete, yte)
        tables["pr_curve"] = Table(["threshold", "precision", "recall"],
                                   [(p.threshold, p.precision, p.recall) for p in curve.points])
        plots["pr_curve"] = Plot("line", "pr_curve", "recall", "precision", None, "precision-recall")
    else:
        log.warning("no anomalies in the test split; PR curve skipped")
    return Report("detect", metrics, tables, plots=plots, models=models)


# ---------------------------------------------------------------- generate

def interpolate(mu1, mu2, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """lambda grid on [0, 1] and the latent points (1 - lambda) mu1 + lambda mu2."""
    lam = np.linspace(0.0, 1.0, steps)
    mu1, mu2 = np.asarray(mu1, dtype=float), np.asarray(mu2, dtype=float)
    return lam, (1.0 - lam)[:, None] * mu1[None] + lam[:, None] * mu2[None]


def _vae_spec(cfg: ExperimentConfig, n_pixels: int) -> ObjectiveSpec:
    spec = objective_spec(cfg.objective)
    if cfg.options.get("kl_scale", "per_pixel") == "per_pixel":
        # bce is a per-pixel mean, so dividing the KL weight by the pixel count
        # keeps the two terms in their summed-likelihood proportion
        pens = tuple(Penalty(p.kind, p.weight / n_pixels, p.rho) if p.kind == "vae_kl" else p
                     for p in spec.penalties)
        spec = ObjectiveSpec(spec.distance, pens, spec.corruption, spec.class_weight)
    return spec


def _square_gray(data, cfg) -> np.ndarray:
    tr, _ = _images(data, cfg)
    if tr.shape[1] != tr.shape[2] or tr.shape[3] != 1:
        raise ContractError(f"generate needs square grayscale images, got {tr.shape[1:]}")
    return tr


def train_generate(cfg: ExperimentConfig, data) -> Trained:
    tr = _square_gray(data, cfg)
    seed, rng, _ = _seeds(cfg.seed)
    net = variational_net(tr.shape[1], int(cfg.architecture.get("latent", 4)), seed=seed)
    hist = _train(net, tr, _vae_spec(cfg, int(np.prod(tr.shape[1:]))), cfg, rng)
    return Trained({"vae": net}, {"vae": hist})


def evaluate_generate(cfg: ExperimentConfig, data, models: dict[str, Network]) -> Report:
    tr = _square_gray(data, cfg)
    net = models["vae"]
    _, _, eval_rng = _seeds(cfg.seed)
    Z = net.encode_array(tr)
    zm, zs = Z.mean(axis=0), Z.std(axis=0, ddof=1)
    R = np.clip(net.predict(tr), 1e-7, 1 - 1e-7)
    bce = -np.mean(tr * np.log(R) + (1 - tr) * np.log(1 - R))
    i, j = (int(v) for v in cfg.options.get("pair", [0, 1]))
    lam, path = interpolate(Z[i], Z[j], int(cfg.options.get("lambda_steps", 9)))
    decoded = net.decode_array(path)
    m = int(cfg.options.get("samples", 8))
    samples = net.decode_array(normal(eval_rng, (m, Z.shape[1]))) if m > 0 else np.zeros((0,) + tr.shape[1:])
    metrics = {"latent_mean_abs_max": float(np.abs(zm).max()), "latent_std_min": float(zs.min()),
               "latent_std_max": float(zs.max()), "interpolation_min": float(decoded.min()),
               "interpolation_max": float(decoded.max()), "train_bce": float(bce)}
    tables = {
        "latent": Table(["dim", "mean", "std"], [(d, float(a), float(b)) for d, (a, b) in enumerate(zip(zm, zs))]),
        "interpolation": Table(["step", "lambda"] + [f"z{d}" for d in range(path.shape[1])],
                               [(s, float(l), *map(float, z)) for s, (l, z) in enumerate(zip(lam, path))]),
    }
    images = {"interpolation": image_strip(np.concatenate([tr[i:i + 1], decoded, tr[j:j + 1]]))}
    if m > 0:
        images["samples"] = image_strip(samples)
    return Report("generate", metrics, tables, images=images, models=models)


# ---------------------------------------------------------------- dispatch

TRAINERS = {"visualize": train_visualize, "denoise": train_denoise, "hash": train_hash,
            "detect": train_detect, "generate": train_generate}
EVALUATORS = {"visualize": evaluate_visualize, "denoise": evaluate_denoise, "hash": evaluate_hash,
              "detect": evaluate_detect, "generate": evaluate_generate}


def run(cfg: ExperimentConfig, data=None, cache_dir=None, transport=None) -> Report:
    """Train and evaluate one task; ``data`` skips source loading when given."""
    source = "in-memory"
    if data is None:
        data, source = load_source(cfg.dataset, cache_dir, transport)
    trained = TRAINERS[cfg.task](cfg, data)
    report = EVALUATORS[cfg.task](cfg, data, trained.models)
    report.tables["training"] = _history_table(trained.histories)
    report.source = source
    return report.validate()


def _runner(task: str):
    def run_task(cfg: ExperimentConfig, data=None, cache_dir=None, transport=None) -> Report:
        if cfg.task != task:
            raise ContractError(f"config is for task {cfg.task!r}, not {task!r}")
        return run(cfg, data, cache_dir, transport)
    run_task.__name__ = f"run_{task}"
    run_task.__doc__ = f"Train and evaluate the {task} case study."
    return run_task


run_visualize = _runner("visualize")
run_denoise = _runner("denoise")
run_hash = _runner("hash")
run_detect = _runner("detect")
run_generate = _runner("generate")
