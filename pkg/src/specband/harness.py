"""Experiment harness and the ``specband`` command line.

Every comparative experiment runs once per seed. A seed fixes the synthetic
data, the model initialization and the batch order. Reports carry the
per-seed matrices, their mean and std, the seed list and a hash of the
resolved configuration.
"""

import argparse
import contextlib
import csv
import dataclasses
import hashlib
import json
import logging
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import data as sdata
from . import filters
from .netcore import checkpoint
from .netcore.model import DualModel, EncoderConfig, SingleModel
from .training import (TrainConfig, evaluate, make_slices, train_dual, train_erm,
                       train_single)

log = logging.getLogger("specband")

REPORT_KINDS = ("bandacc", "xband", "sdg", "ablation", "sweep")
ABLATIONS = ("pass_only", "stop_only", "shared", "no_cons", "full")

# Desk-scale schedule: 112 training images per domain need many small steps.
# The consistency weight ramps up over the first half: started on untrained
# features it is satisfied by a constant shared by all inputs (see notes).
DESK_TRAIN = dict(alpha=5.0, learning_rate=5e-3, epochs=30, batch_size=8, alpha_warmup=0.5)
# ERM sees 1/(K+1) of the dual model's views per epoch; 30 epochs left one
# seed at 0.93 train accuracy in the pilot, 45 fits all five
DESK_ERM_EPOCHS = 45


def _train_defaults():
    return TrainConfig(**DESK_TRAIN)


@dataclass
class HarnessConfig:
    synth: sdata.SynthConfig = field(default_factory=sdata.SynthConfig)
    train: TrainConfig = field(default_factory=_train_defaults)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    # source domain for the single-source diagnostics (bandacc, xband)
    probe_source: str = "flat"
    # leave-one-out sources; None means every domain
    sources: list = None
    ablation_sources: list = None
    sweep_sources: list = None
    alphas: list = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0])
    ks: list = field(default_factory=lambda: [2, 4, 6, 8])
    # None trains the baseline for train.epochs
    erm_epochs: int = DESK_ERM_EPOCHS
    threads: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seed list is empty")
        if self.erm_epochs is not None and self.erm_epochs < 1:
            raise ValueError("erm_epochs must be positive")
        for name in ("sources", "ablation_sources", "sweep_sources"):
            for d in getattr(self, name) or []:
                if d not in self.synth.domain_profiles:
                    raise ValueError(f"{name}: unknown domain {d!r}")
        if self.probe_source not in self.synth.domain_profiles:
            raise ValueError(f"unknown probe_source {self.probe_source!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def source_list(self, which=None):
        chosen = getattr(self, which) if which else None
        return list(chosen or self.sources or self.synth.domains)

    def to_dict(self):
        return {
            "synth": self.synth.to_dict(),
            "train": dataclasses.asdict(self.train),
            "encoder": dataclasses.asdict(self.encoder),
            "seeds": [int(s) for s in self.seeds],
            "probe_source": self.probe_source,
            "sources": self.sources,
            "ablation_sources": self.ablation_sources,
            "sweep_sources": self.sweep_sources,
            "alphas": [float(a) for a in self.alphas],
            "ks": [int(k) for k in self.ks],
        }

    def hash(self):
        # threads never change results, so they stay out of the hash
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)} - {"bands"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        synth = dict(d.pop("synth", {}))
        if "bands" in d:
            synth["bands"] = d.pop("bands")
        train = dict(DESK_TRAIN, **d.pop("train", {}))
        enc = d.pop("encoder", {})
        return cls(synth=sdata.SynthConfig.from_dict(synth), train=TrainConfig(**train),
                   encoder=EncoderConfig(**enc), **d)


def erm_train_config(cfg, seed):
    epochs = cfg.train.epochs if cfg.erm_epochs is None else cfg.erm_epochs
    return dataclasses.replace(cfg.train, seed=seed, epochs=epochs)


def load_config(path):
    with open(path, encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    try:
        return HarnessConfig.from_dict(raw)
    except TypeError as e:
        raise ValueError(f"{path}: {e}") from None


@dataclass
class ExperimentReport:
    kind: str
    rows: list
    cols: list
    per_seed: list
    seeds: list
    config_hash: str
    reference: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in REPORT_KINDS:
            raise ValueError(f"unknown report kind {self.kind!r}")
        arr = np.asarray(self.per_seed, dtype=np.float64)
        if arr.shape != (len(self.seeds), len(self.rows), len(self.cols)):
            raise ValueError(f"matrix shape {arr.shape} does not match axes")
        if np.any(arr < 0) or np.any(arr > 1):
            raise ValueError("accuracies must lie in [0, 1]")
        self.per_seed = arr

    @property
    def mean(self):
        return self.per_seed.mean(axis=0)

    @property
    def std(self):
        return self.per_seed.std(axis=0)

    def cell(self, row, col):
        return self.mean[self.rows.index(row), self.cols.index(col)]

    def seed_matrix(self, seed):
        return self.per_seed[self.seeds.index(seed)]

    def to_dict(self):
        return {
            "kind": self.kind,
            "axes": {"rows": list(self.rows), "cols": [str(c) for c in self.cols]},
            "matrix": self.mean.tolist(),
            "std": self.std.tolist(),
            "per_seed": self.per_seed.tolist(),
            "seeds": [int(s) for s in self.seeds],
            "config_hash": self.config_hash,
            "reference": self.reference,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def write(self, out_dir, csv_mirror=False):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.kind}.json"
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        if csv_mirror:
            with open(out / f"{self.kind}.csv", "w", newline="", encoding="utf-8") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow([self.kind] + [str(c) for c in self.cols])
                for name, row in zip(self.rows, self.mean):
                    w.writerow([name] + [repr(float(v)) for v in row])
        return path


def report_schema():
    return json.loads(resources.files("specband").joinpath("report.schema.json").read_text())


def validate_report(doc):
    import jsonschema

    jsonschema.validate(doc, report_schema())
    rows, cols = doc["axes"]["rows"], doc["axes"]["cols"]
    for name in ("matrix", "std"):
        if len(doc[name]) != len(rows) or any(len(r) != len(cols) for r in doc[name]):
            raise jsonschema.ValidationError(f"{name} does not match axes")


class Runner:
    """Trains and caches every model an experiment family needs.

    Cache keys include everything that changes a run, so commands issued on
    one runner share models (e.g. the SDG full model is the ablation's
    "full" row).
    """

    def __init__(self, config):
        self.config = config
        self._cache = {}
        self._lock = threading.Lock()
        self._local = threading.local()
        # CPU seconds per cache entry, excluding nested entries
        self.costs = {}
        # cache entries each entry was built from
        self._deps = {}
        self._meter = None

    def _memo(self, key, fn):
        stack = self._local.__dict__.setdefault("stack", [])
        with self._lock:
            if key in self._cache:
                used = {key} | self._deps[key]
                if stack:
                    stack[-1]["deps"] |= used
                if self._meter is not None:
                    self._meter["hits"] |= used
                return self._cache[key]
        frame = {"nested": 0.0, "deps": set()}
        stack.append(frame)
        t0 = time.thread_time()
        try:
            value = fn()
        finally:
            elapsed = time.thread_time() - t0
            stack.pop()
            if stack:
                stack[-1]["nested"] += elapsed
                stack[-1]["deps"] |= {key} | frame["deps"]
        with self._lock:
            self.costs.setdefault(key, elapsed - frame["nested"])
            self._deps.setdefault(key, frame["deps"])
            if self._meter is not None:
                self._meter["computed"].add(key)
            return self._cache.setdefault(key, value)

    @contextlib.contextmanager
    def metered(self):
        """Measure the CPU cost of a block as if the cache had been cold.

        Yields a dict whose ``cpu_seconds`` is filled on exit: process time
        spent in the block plus the recorded cost of every cache hit that was
        computed before the block started.
        """
        meter = {"hits": set(), "computed": set(), "cpu_seconds": None}
        self._meter = meter
        t0 = time.process_time()
        try:
            yield meter
        finally:
            self._meter = None
            reused = meter["hits"] - meter["computed"]
            meter["cpu_seconds"] = time.process_time() - t0 + sum(self.costs[k] for k in reused)

    def synth(self, seed):
        return dataclasses.replace(self.config.synth, seed=seed)

    def train_config(self, seed, **over):
        return dataclasses.replace(self.config.train, seed=seed, **over)

    def erm_train_config(self, seed):
        return erm_train_config(self.config, seed)

    def data(self, seed, domain, split):
        return self._memo(("data", seed, domain, split),
                          lambda: sdata.generate_synth(self.synth(seed), domain, split))

    def bank(self, specs=None):
        s = self.config.synth
        specs = tuple(specs or s.bands)
        return self._memo(("bank", specs), lambda: filters.build_bank(
            list(specs), s.image_size, s.image_size, s.reference_size, s.sigma_scale))

    def slices(self, seed, domain, split, specs=None):
        key = ("slices", seed, domain, split, tuple(specs or self.config.synth.bands))
        return self._memo(key, lambda: make_slices(self.data(seed, domain, split).images, self.bank(specs)))

    def erm(self, seed, source):
        def run():
            tr = self.data(seed, source, "train")
            model, _ = train_erm(tr.images, tr.labels, self.erm_train_config(seed),
                                 tr.num_classes, self.config.encoder)
            return model
        return self._memo(("erm", seed, source), run)

    def dual(self, seed, source, alpha=None, shared=False, specs=None):
        alpha = self.config.train.alpha if alpha is None else float(alpha)
        specs = tuple(specs or self.config.synth.bands)

        def run():
            tr = self.data(seed, source, "train")
            model = DualModel(tr.num_classes, self.config.encoder, seed=seed, shared=shared)
            train_dual(model, self.bank(specs), tr.images, tr.labels,
                       self.train_config(seed, alpha=alpha), slices=self.slices(seed, source, "train", specs))
            return model
        return self._memo(("dual", seed, source, alpha, shared, specs), run)

    def band_model(self, seed, source, band):
        """Single encoder trained on the pass slices of one band."""
        def run():
            tr = self.data(seed, source, "train")
            model = SingleModel(tr.num_classes, self.config.encoder, seed=seed)
            train_single(model, self.slices(seed, source, "train").passes[:, band], tr.labels,
                         self.train_config(seed), tag=f"band{band}")
            return model
        return self._memo(("band", seed, source, band), run)

    def branch_model(self, seed, source, which):
        """Single encoder on the original image plus every pass (or stop) slice."""
        def run():
            tr = self.data(seed, source, "train")
            sl = self.slices(seed, source, "train")
            views = np.concatenate([tr.images[:, None], sl.passes if which == "pass" else sl.stops], axis=1)
            model = SingleModel(tr.num_classes, self.config.encoder, seed=seed)
            train_single(model, views, tr.labels, self.train_config(seed), tag=f"{which}_only")
            return model
        return self._memo(("branch", seed, source, which), run)

    def target_accuracy(self, model, seed, source):
        """Mean accuracy over every domain except ``source``."""
        targets = [d for d in self.config.synth.domains if d != source]
        if not targets:
            raise ValueError("leave-one-out needs at least two domains")
        return float(np.mean([self.domain_accuracy(model, seed, d) for d in targets]))

    def domain_accuracy(self, model, seed, domain):
        te = self.data(seed, domain, "test")
        return evaluate(model, te.images, te.labels)

    def per_seed(self, fn):
        seeds = list(self.config.seeds)
        if self.config.threads > 1 and len(seeds) > 1:
            with ThreadPoolExecutor(self.config.threads) as ex:
                return list(ex.map(fn, seeds))
        return [fn(s) for s in seeds]


def _band_labels(k):
    return [f"F{i + 1}" for i in range(k)]


def cmd_bandacc(runner):
    """ERM on originals, per-band models and the dual model, each tested per band slice."""
    cfg = runner.config
    src = cfg.probe_source
    k = runner.bank().k
    refs = []

    def one(seed):
        te = runner.data(seed, src, "test")
        sl = runner.slices(seed, src, "test").passes
        erm, ours = runner.erm(seed, src), runner.dual(seed, src)
        refs.append((seed, evaluate(erm, te.images, te.labels)))
        return [
            [evaluate(erm, sl[:, b], te.labels) for b in range(k)],
            [evaluate(runner.band_model(seed, src, b), sl[:, b], te.labels) for b in range(k)],
            [evaluate(ours, sl[:, b], te.labels) for b in range(k)],
        ]

    mats = runner.per_seed(one)
    refs = [a for _, a in sorted(refs)]
    return ExperimentReport("bandacc", ["erm_original", "per_band", "ours"], _band_labels(k), mats,
                            list(cfg.seeds), cfg.hash(),
                            reference={"source": src, "erm_on_original": float(np.mean(refs))})


def cmd_xband(runner):
    """Train on band i slices, test on band j slices."""
    cfg = runner.config
    src = cfg.probe_source
    k = runner.bank().k
    if k < 2:
        raise ValueError("cross-band matrix needs K >= 2")

    def one(seed):
        te = runner.data(seed, src, "test")
        sl = runner.slices(seed, src, "test").passes
        return [[evaluate(runner.band_model(seed, src, i), sl[:, j], te.labels) for j in range(k)]
                for i in range(k)]

    labels = _band_labels(k)
    return ExperimentReport("xband", labels, labels, runner.per_seed(one), list(cfg.seeds), cfg.hash(),
                            reference={"source": src})


def _sdg_rows(runner, methods, sources):
    """Rows ``method:source``; columns every domain then ``avg_target``."""
    domains = runner.config.synth.domains
    if len(domains) < 2:
        raise ValueError("leave-one-out needs at least two domains")

    def one(seed):
        mat = []
        for name, make in methods:
            for src in sources:
                model = make(seed, src)
                accs = [runner.domain_accuracy(model, seed, d) for d in domains]
                mat.append(accs + [float(np.mean([a for a, d in zip(accs, domains) if d != src]))])
        return mat

    rows = [f"{name}:{src}" for name, _ in methods for src in sources]
    return rows, domains + ["avg_target"], runner.per_seed(one)


def cmd_sdg(runner):
    """Leave-one-out: train on each source, test on every domain (ERM and ours)."""
    cfg = runner.config
    sources = cfg.source_list()
    methods = [("erm", runner.erm), ("ours", runner.dual)]
    rows, cols, mats = _sdg_rows(runner, methods, sources)
    return ExperimentReport("sdg", rows, cols, mats, list(cfg.seeds), cfg.hash(),
                            reference={"sources": sources})


def cmd_ablation(runner):
    """Leave-one-out accuracy for single branches, shared branches, alpha=0 and the full model."""
    cfg = runner.config
    sources = cfg.source_list("ablation_sources")
    methods = [
        ("pass_only", lambda s, d: runner.branch_model(s, d, "pass")),
        ("stop_only", lambda s, d: runner.branch_model(s, d, "stop")),
        ("shared", lambda s, d: runner.dual(s, d, shared=True)),
        ("no_cons", lambda s, d: runner.dual(s, d, alpha=0.0)),
        ("full", runner.dual),
    ]
    rows, cols, mats = _sdg_rows(runner, methods, sources)
    return ExperimentReport("ablation", rows, cols, mats, list(cfg.seeds), cfg.hash(),
                            reference={"sources": sources})


def cmd_sweep(runner, axis="alpha"):
    """Mean target accuracy per sweep value, averaged over the sweep sources."""
    cfg = runner.config
    sources = cfg.source_list("sweep_sources")
    if axis == "alpha":
        values = [float(a) for a in cfg.alphas]
        if any(a < 0 for a in values):
            raise ValueError("alpha values must be >= 0")

        def make(seed, src, v):
            return runner.dual(seed, src, alpha=v)
    elif axis == "K":
        values = [int(k) for k in cfg.ks]
        if any(k < 2 for k in values):
            raise ValueError("K values must be >= 2")

        def make(seed, src, v):
            specs = cfg.synth.bands if v == len(cfg.synth.bands) else filters.uniform_bands(v, cfg.synth.reference_size)
            return runner.dual(seed, src, specs=specs)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ValueError("sweep needs at least one value")

    def one(seed):
        return [[float(np.mean([runner.target_accuracy(make(seed, s, v), seed, s) for s in sources]))
                 for v in values]]

    return ExperimentReport("sweep", ["ours"], [f"{axis}={v:g}" for v in values], runner.per_seed(one),
                            list(cfg.seeds), cfg.hash(), reference={"axis": axis, "sources": sources})


# -- command line -----------------------------------------------------------

def _resolve_config(args):
    cfg = load_config(args.config) if args.config else HarnessConfig()
    over = {}
    if args.seed is not None or args.seeds is not None:
        base = cfg.seeds[0] if args.seed is None else args.seed
        n = len(cfg.seeds) if args.seeds is None else args.seeds
        if n < 1:
            raise ValueError("--seeds must be >= 1")
        over["seeds"] = [base + i for i in range(n)]
    if args.threads is not None:
        over["threads"] = args.threads
    return dataclasses.replace(cfg, **over) if over else cfg


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(report, args):
    path = report.write(_out_dir(args), csv_mirror=args.csv)
    validate_report(report.to_dict())
    print(path)


def _bank_from_args(cfg, args):
    s = cfg.synth
    if args.k:
        specs = filters.uniform_bands(args.k, s.reference_size)
    elif args.paper_bands:
        specs = filters.default_bands()
    else:
        specs = s.bands
    h = args.height or s.image_size
    w = args.width or h
    return filters.build_bank(specs, h, w, s.reference_size, s.sigma_scale)


def run_bank(cfg, args):
    bank = _bank_from_args(cfg, args)
    out = _out_dir(args)
    for i in range(bank.k):
        sdata.write_pgm(out / f"pass_F{i + 1}.pgm", bank.passband(i))
        if bank.k >= 2:
            sdata.write_pgm(out / f"stop_F{i + 1}.pgm", bank.stop(i))
    summary = {
        "height": bank.height, "width": bank.width, "reference_size": bank.reference_size,
        "sigma_scale": bank.sigma_scale,
        "bands": [{"center": b.center, "bandwidth": b.bandwidth, "energy_mass": float(m)}
                  for b, m in zip(bank.specs, bank.band_energy())],
    }
    (out / "bank.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    print(out / "bank.json")


def _dataset_from_args(cfg, args, split):
    if getattr(args, "manifest", None):
        return sdata.load_manifest(args.manifest, cfg.synth.num_classes)
    return sdata.generate_synth(dataclasses.replace(cfg.synth, seed=cfg.seeds[0]), args.domain, split)


def run_slice(cfg, args):
    if args.image:
        img = sdata.read_ppm(args.image)
        ds = sdata.Dataset(img[None], [0], ["input"], cfg.synth.num_classes)
    else:
        ds = _dataset_from_args(cfg, args, "test")
    h, w = ds.images.shape[-2:]
    s = cfg.synth
    bank = filters.build_bank(s.bands, h, w, s.reference_size, s.sigma_scale)
    out = sdata.save_slices(ds, bank, args.out)
    print(out / "scales.json")


def run_synth(cfg, args):
    domains = args.domains or cfg.synth.domains
    synth = dataclasses.replace(cfg.synth, seed=cfg.seeds[0])
    parts = []
    for d in domains:
        if d not in synth.domain_profiles:
            raise ValueError(f"unknown domain {d!r}")
        parts.append(sdata.generate_synth(synth, d, args.split))
    path = sdata.save_dataset(sdata.Dataset.concat(parts), args.out)
    print(path)


def run_train(cfg, args):
    ds = _dataset_from_args(cfg, args, "train")
    seed = cfg.seeds[0]
    tc = dataclasses.replace(cfg.train, seed=seed)
    s = cfg.synth
    if args.model == "erm":
        model, record = train_erm(ds.images, ds.labels, erm_train_config(cfg, seed), ds.num_classes, cfg.encoder)
        k = 0
    else:
        h, w = ds.images.shape[-2:]
        bank = filters.build_bank(s.bands, h, w, s.reference_size, s.sigma_scale)
        model = DualModel(ds.num_classes, cfg.encoder, seed=seed, shared=args.model == "shared")
        record = train_dual(model, bank, ds.images, ds.labels, tc)
        k = bank.k
    record.eval["train"] = evaluate(model, ds.images, ds.labels)
    out = _out_dir(args)
    checkpoint.save(model, out / "model.sbnd", k=k)
    (out / "run.json").write_text(json.dumps(record.to_dict(), indent=1) + "\n", encoding="utf-8")
    print(out / "model.sbnd")


def run_eval(cfg, args):
    model, _ = checkpoint.load(args.checkpoint)
    ds = _dataset_from_args(cfg, args, "test")
    result = {"n": len(ds), "accuracy": evaluate(model, ds.images, ds.labels)}
    doms = sorted(set(ds.domains))
    if len(doms) > 1:
        result["per_domain"] = {d: evaluate(model, ds.by_domain(d).images, ds.by_domain(d).labels) for d in doms}
    text = json.dumps(result, indent=1, sort_keys=True)
    if args.out:
        out = _out_dir(args)
        (out / "eval.json").write_text(text + "\n", encoding="utf-8")
    print(text)


def _report_cmd(fn):
    def run(cfg, args):
        kw = {"axis": args.axis} if fn is cmd_sweep else {}
        _emit(fn(Runner(cfg), **kw), args)
    return run


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config (train, synth, encoder, bands, seeds, ...)")
    shared.add_argument("--seed", type=int, help="base seed")
    shared.add_argument("--seeds", type=int, help="number of consecutive seeds from the base seed")
    shared.add_argument("--out", default="specband_out", help="output directory")
    shared.add_argument("--threads", type=int, help="worker threads for independent seeds")

    p = argparse.ArgumentParser(prog="specband", description="Frequency-band filter banks and dual-branch training.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bank", parents=[shared], help="write filter responses as PGM plus a JSON summary")
    b.add_argument("--height", type=int)
    b.add_argument("--width", type=int)
    g = b.add_mutually_exclusive_group()
    g.add_argument("--paper-bands", action="store_true", help="the six published bands instead of the config bands")
    g.add_argument("--k", type=int, help="uniform split into K bands")
    b.set_defaults(func=run_bank)

    def data_args(sp):
        sp.add_argument("--manifest", help="dataset manifest CSV (default: synthetic)")
        sp.add_argument("--domain", default="flat", help="synthetic domain when no manifest is given")

    s = sub.add_parser("slice", parents=[shared], help="write band slices and the scale sidecar")
    s.add_argument("--image", help="single PPM image")
    data_args(s)
    s.set_defaults(func=run_slice)

    y = sub.add_parser("synth", parents=[shared], help="generate a synthetic dataset on disk")
    y.add_argument("--domains", nargs="+")
    y.add_argument("--split", default="train")
    y.set_defaults(func=run_synth)

    t = sub.add_parser("train", parents=[shared], help="train one model and write a checkpoint")
    t.add_argument("--model", choices=["dual", "shared", "erm"], default="dual")
    data_args(t)
    t.set_defaults(func=run_train)

    e = sub.add_parser("eval", parents=[shared], help="evaluate a checkpoint")
    e.add_argument("checkpoint")
    data_args(e)
    e.set_defaults(func=run_eval, out=None)

    for name, fn in (("bandacc", cmd_bandacc), ("xband", cmd_xband), ("sdg", cmd_sdg),
                     ("ablation", cmd_ablation)):
        r = sub.add_parser(name, parents=[shared], help=fn.__doc__.splitlines()[0].rstrip("."))
        r.add_argument("--csv", action="store_true", help="also write a CSV mirror")
        r.set_defaults(func=_report_cmd(fn))
    w = sub.add_parser("sweep", parents=[shared], help="accuracy against alpha or K")
    w.add_argument("--axis", choices=["alpha", "K"], default="alpha")
    w.add_argument("--csv", action="store_true", help="also write a CSV mirror")
    w.set_defaults(func=_report_cmd(cmd_sweep))
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        args.func(cfg, args)
    except OSError as e:
        print(f"specband: I/O error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError) as e:
        print(f"specband: invalid input: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
