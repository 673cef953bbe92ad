"""Command-line front end: ``domadapt {synth,adapt,eval,viz,img,pipeline}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import kernels, svg
from ._accel import backend_name
from .adapt import adapt, default_config
from .core import METHODS, FeatureDataset, KernelSpec, RandomStream
from .dataio import (
    RunRecord,
    compact_timestamp,
    json_safe,
    read_feature_csv,
    read_nifti,
    read_run_record,
    unique_path,
    utc_now,
    write_feature_csv,
    write_nifti,
    write_run_record,
)
from .embed import TsneConfig, pca_embed, tsne_embed
from .errors import DomainAdaptError, InvalidConfig, UsageError
from .image import IMAGE_METHODS, SsimhConfig, adapt_volume, normalize_volume
from .metrics import feature_report, slice_averaged_metrics
from .synth import domain_spec_from_dict, make_paper_synthetic, make_shifted_synthetic, sample_domain

log = logging.getLogger("domadapt")

FEATURE_METRICS = ("mmd", "domain-acc")
OUTPUT_ROOT_ENV = "DOMADAPT_OUTPUT_ROOT"

# Experiment presets.  SCA and ITL learn a d-dimensional projection; with two
# input features and d = 2 that projection is invertible (ITL's objective is
# then rotation invariant), so the two-feature preset asks them for d = 1.
PRESETS = {
    "paper": {
        "synthetic": {"kind": "paper"},
        "seed": 7,
        "split_seed": 7,
        "methods": list(METHODS),
        "overrides": {"sca": {"subspace_dim": 1}, "itl": {"subspace_dim": 1}},
        "metrics": list(FEATURE_METRICS),
    },
    "roi": {
        "synthetic": {"kind": "shifted", "dim": 90},
        "seed": 7,
        "split_seed": 7,
        "methods": list(METHODS),
        "overrides": {"*": {"subspace_dim": 5}},
        "metrics": list(FEATURE_METRICS),
    },
}


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _require_file(path, what="input"):
    if path is None or not Path(path).is_file():
        raise UsageError(f"{what} file not found: {path}")
    return Path(path)


def _print_json(obj):
    print(json.dumps(json_safe(obj), indent=2, sort_keys=True, allow_nan=False))


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def make_synthetic(spec, seed):
    """``(source, target)`` for a synthetic spec dict (``kind``: paper, shifted, gaussian)."""
    kind = spec.get("kind", "paper")
    stream = RandomStream(seed)
    if kind == "paper":
        return make_paper_synthetic(stream)
    if kind == "shifted":
        params = {k: v for k, v in spec.items() if k != "kind"}
        try:
            return make_shifted_synthetic(stream, **params)
        except TypeError as exc:
            raise InvalidConfig(f"bad shifted-synthetic parameters: {exc}") from None
    if kind == "gaussian":
        src = domain_spec_from_dict(spec["source"], "source")
        tgt = domain_spec_from_dict(spec["target"], "target")
        return sample_domain(src, stream.spawn(0)), sample_domain(tgt, stream.spawn(1))
    raise InvalidConfig(f"unknown synthetic kind {kind!r}")


def _summary_line(ds: FeatureDataset):
    labels = "unlabeled"
    if ds.labels is not None:
        vals, counts = np.unique(ds.labels, return_counts=True)
        labels = ", ".join(f"class {v}: {c}" for v, c in zip(vals, counts))
    return f"{ds.domain}: n={ds.n} D={ds.dim} ({labels})"


def cmd_synth(args):
    out = Path(args.out)
    if args.paper:
        spec = {"kind": "paper"}
    elif args.spec:
        spec = json.loads(_require_file(args.spec, "spec").read_text())
    else:
        spec = {"kind": "shifted", "dim": args.dim}
    s, t = make_synthetic(spec, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_csv(s, out / "source.csv")
    write_feature_csv(t, out / "target.csv")
    print(_summary_line(s))
    print(_summary_line(t))
    return 0


# ---------------------------------------------------------------------------
# adapt
# ---------------------------------------------------------------------------


def _parse_aux(items):
    aux = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--aux expects name=value, got {item!r}")
        try:
            aux[key.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--aux value for {key!r} is not a number") from None
    return aux


def build_config(method, dim, file_cfg=None, overrides=None):
    """Defaults for ``method``, then the config file, then explicit overrides."""
    cfg = default_config(method, dim)
    for layer in (file_cfg or {}), (overrides or {}):
        layer = {k: v for k, v in layer.items() if v is not None and k != "method"}
        if "kernel" in layer and isinstance(layer["kernel"], dict):
            layer["kernel"] = KernelSpec.from_dict({**cfg.kernel.to_dict(), **layer["kernel"]})
        unknown = set(layer) - {"subspace_dim", "kernel", "reg", "iterations", "aux", "seed"}
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        cfg = cfg.replace(**layer)
    return cfg


def _flag_overrides(args):
    ov = {"subspace_dim": args.subspace_dim, "reg": args.reg, "iterations": args.iterations,
          "seed": args.seed}
    if args.kernel or args.bandwidth:
        kern = {}
        if args.kernel:
            kern["kind"] = args.kernel
        if args.bandwidth:
            kern["bandwidth"] = args.bandwidth if args.bandwidth == "median" else float(args.bandwidth)
        ov["kernel"] = kern
    aux = _parse_aux(args.aux)
    if aux:
        ov["aux"] = aux
    return ov


def run_adaptation(method, src_path, tgt_path, out_dir, cfg, stream=None, timestamp=None):
    """Adapt, write ``<method>_<ts>/`` with both CSVs and the run record."""
    s = read_feature_csv(src_path, "source")
    t = read_feature_csv(tgt_path, "target")
    result = adapt(s, t, cfg, stream)
    ts = timestamp or utc_now()
    run_dir = unique_path(Path(out_dir), f"{method}_{compact_timestamp(ts)}")
    run_dir.mkdir(parents=True)
    a_src = write_feature_csv(FeatureDataset(result.adapted_source, s.labels, "source"),
                              run_dir / "adapted_source.csv")
    a_tgt = write_feature_csv(FeatureDataset(result.adapted_target, t.labels, "target"),
                              run_dir / "adapted_target.csv")
    record = RunRecord.for_files(method, result.effective_config.to_dict(), cfg.seed,
                                 [src_path, tgt_path], timestamp=ts, outputs=[a_src, a_tgt],
                                 extra={"wall_time": result.wall_time, "backend": backend_name()})
    rec_path = write_run_record(record, run_dir)
    return result, run_dir, rec_path


def cmd_adapt(args):
    src = _require_file(args.source, "source")
    tgt = _require_file(args.target, "target")
    file_cfg = json.loads(_require_file(args.config, "config").read_text()) if args.config else {}
    dim = read_feature_csv(src).dim
    cfg = build_config(args.method, dim, file_cfg, _flag_overrides(args))
    result, run_dir, rec = run_adaptation(args.method, src, tgt, args.out, cfg)
    print(f"{args.method}: d'={result.dim} wall time {result.wall_time:.3f} s -> {run_dir}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _metric_list(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in FEATURE_METRICS]
    if bad or not names:
        raise UsageError(f"unknown metric(s) {bad}; choose from {list(FEATURE_METRICS)}")
    return tuple(names)


def evaluate_pair(src, tgt, metrics, split_seed, k=1):
    return feature_report(src.samples, tgt.samples, split_seed=split_seed, k=k, metrics=metrics)


def cmd_eval(args):
    metrics = _metric_list(args.metrics)
    src = read_feature_csv(_require_file(args.source, "source"))
    tgt = read_feature_csv(_require_file(args.target, "target"))
    out = {"original": evaluate_pair(src, tgt, metrics, args.seed, args.k).to_dict()}
    if args.adapted_source or args.adapted_target:
        a_src = read_feature_csv(_require_file(args.adapted_source, "adapted source"))
        a_tgt = read_feature_csv(_require_file(args.adapted_target, "adapted target"))
        adapted = evaluate_pair(a_src, a_tgt, metrics, args.seed, args.k)
        out["adapted"] = adapted.to_dict()
        out["delta"] = {m: adapted.values[m] - out["original"]["metrics"][m] for m in metrics}
    if args.record:
        path = _require_file(args.record, "run record")
        rec = read_run_record(path)
        rec.metrics.update(json_safe(out))
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(rec.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n")
        os.replace(tmp, path)
    if args.out:
        Path(args.out).write_text(json.dumps(json_safe(out), indent=2, sort_keys=True) + "\n")
    _print_json(out)
    return 0


# ---------------------------------------------------------------------------
# viz
# ---------------------------------------------------------------------------


def embed_2d(x, seed, mode="auto"):
    """Plot coordinates: raw for D = 2, t-SNE above (or PCA on request), padded for D = 1."""
    x = np.asarray(x, dtype=float)
    if x.shape[1] == 2 and mode == "auto":
        return x
    if x.shape[1] < 2:
        return np.hstack([x, np.zeros((x.shape[0], 2 - x.shape[1]))])
    if mode == "pca":
        return pca_embed(x, 2)
    return tsne_embed(x, TsneConfig(seed=seed)).embedding


def scatter_pair(src: FeatureDataset, tgt: FeatureDataset, path, title, seed=0, mode="auto"):
    pts = embed_2d(np.vstack([src.samples, tgt.samples]), seed, mode)
    labeled = src.labels is not None and tgt.labels is not None
    labels = np.r_[src.labels, tgt.labels] if labeled else None
    domains = ["source"] * src.n + ["target"] * tgt.n
    return svg.emit_scatter(pts, labels, domains, path, title)


def cmd_viz(args):
    out = Path(args.out)
    pairs = [(_require_file(a, "source"), _require_file(b, "target")) for a, b in args.pair]
    reports = [_require_file(m, "metric JSON") for m in args.metrics or ()]
    out.mkdir(parents=True, exist_ok=True)
    for i, (a, b) in enumerate(pairs):
        s, t = read_feature_csv(a, "source"), read_feature_csv(b, "target")
        name = args.names[i] if args.names and i < len(args.names) else f"pair{i}"
        path = scatter_pair(s, t, out / f"scatter_{name}.svg", name, args.seed, args.embed)
        print(path)
    if reports:
        values = {}
        for p in reports:
            data = json.loads(p.read_text())
            label = data.get("method") or p.stem
            block = data.get("adapted", data.get("original", data))
            values[label] = block.get("metrics", block)
        for metric in FEATURE_METRICS:
            series = {k: v[metric] for k, v in values.items() if v.get(metric) is not None}
            if series:
                print(svg.emit_bars(series, out / f"bars_{metric}.svg", metric, metric))
    return 0


# ---------------------------------------------------------------------------
# img
# ---------------------------------------------------------------------------


def cmd_img(args):
    src_path = _require_file(args.source, "source")
    tgt_path = _require_file(args.target, "target")
    src = normalize_volume(read_nifti(src_path))
    tgt = normalize_volume(read_nifti(tgt_path))
    cfg = SsimhConfig(args.threshold)
    adapted = adapt_volume(src, tgt, args.method, cfg)
    ts = utc_now()
    run_dir = unique_path(Path(args.out), f"{args.method}_{compact_timestamp(ts)}")
    run_dir.mkdir(parents=True)
    out_path = write_nifti(adapted, run_dir / "adapted_source.nii")
    metrics = {}
    if args.eval:
        metrics = {"baseline": slice_averaged_metrics(src, tgt).to_dict(),
                   "adapted": slice_averaged_metrics(adapted, tgt).to_dict()}
        _print_json(metrics)
    config = {"method": args.method, "slice_axis": 2, "slice_pairing": "index"}
    if args.method == "ssimh":
        config["threshold"] = cfg.threshold
    rec = RunRecord.for_files(args.method, config, 0, [src_path, tgt_path], timestamp=ts,
                              outputs=[out_path], metrics=metrics)
    write_run_record(rec, run_dir)
    print(f"{args.method} -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def load_experiment(path=None, preset=None):
    if path is not None:
        cfg = json.loads(_require_file(path, "experiment config").read_text())
        if "preset" in cfg:
            base = dict(PRESETS[cfg["preset"]]) if cfg["preset"] in PRESETS else None
            if base is None:
                raise InvalidConfig(f"unknown preset {cfg['preset']!r}")
            base.update({k: v for k, v in cfg.items() if k != "preset"})
            cfg = base
    elif preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = json.loads(json.dumps(PRESETS[preset]))
    else:
        raise UsageError("pipeline needs a config file or --preset")
    if "seed" not in cfg:
        raise InvalidConfig("experiment config needs a seed")
    if not cfg.get("methods"):
        raise InvalidConfig("experiment config lists no methods")
    cfg.setdefault("split_seed", cfg["seed"])
    cfg.setdefault("metrics", list(FEATURE_METRICS))
    cfg.setdefault("overrides", {})
    cfg.setdefault("embed", "auto")
    for m in cfg["metrics"]:
        if m not in FEATURE_METRICS:
            raise InvalidConfig(f"unknown metric {m!r}")
    if "synthetic" not in cfg and not ("source" in cfg and "target" in cfg):
        raise InvalidConfig("experiment config needs source/target paths or a synthetic spec")
    return cfg


def _method_overrides(cfg, method):
    ov = dict(cfg["overrides"].get("*", {}))
    for k, v in cfg["overrides"].get(method, {}).items():
        ov[k] = {**ov.get(k, {}), **v} if k == "aux" else v
    return ov


def _run_method(method, cfg, src_csv, tgt_csv, out_dir, timestamp):
    """One pipeline entry; returns a summary row (never raises)."""
    row = {"method": method}
    try:
        s = read_feature_csv(src_csv, "source")
        acfg = build_config(method, s.dim, None, {"seed": cfg["seed"], **_method_overrides(cfg, method)})
        stream = RandomStream(cfg["seed"], key=(zlib.crc32(method.encode()),))
        result, run_dir, rec_path = run_adaptation(method, src_csv, tgt_csv, out_dir, acfg, stream,
                                                   timestamp)
        a_src = read_feature_csv(run_dir / "adapted_source.csv", "source")
        a_tgt = read_feature_csv(run_dir / "adapted_target.csv", "target")
        report = evaluate_pair(a_src, a_tgt, tuple(cfg["metrics"]), cfg["split_seed"])
        rec = read_run_record(rec_path)
        rec.metrics.update(report.to_dict())
        rec_path.write_text(json.dumps(rec.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n")
        row.update(status="ok", dim=result.dim, config=result.effective_config.to_dict(),
                   metrics=report.to_dict()["metrics"])
        row["_wall_time"] = result.wall_time
        row["_run_dir"] = str(run_dir)
        row["_adapted"] = (a_src, a_tgt)
    except DomainAdaptError as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    except Exception as exc:  # isolate one method's crash from the rest
        log.exception("method %s crashed", method)
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


def run_pipeline(cfg, out_dir, workers=1):
    """Run every listed method, evaluate, plot, and write ``summary.json``.

    Returns ``(summary, timing, exit_code)``.  ``summary`` holds no wall
    times or timestamps so it depends only on the inputs, config and seed.
    """
    t_start = time.perf_counter()
    out = Path(out_dir)
    data_dir, fig_dir = out / "data", out / "figures"
    data_dir.mkdir(parents=True, exist_ok=True)
    fig_dir.mkdir(parents=True, exist_ok=True)
    if "synthetic" in cfg:
        s, t = make_synthetic(cfg["synthetic"], cfg["seed"])
        src_csv = write_feature_csv(s, data_dir / "source.csv")
        tgt_csv = write_feature_csv(t, data_dir / "target.csv")
    else:
        src_csv = _require_file(cfg["source"], "source")
        tgt_csv = _require_file(cfg["target"], "target")
    compile_time = kernels.warmup()
    timestamp = utc_now()
    methods = list(dict.fromkeys(cfg["methods"]))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda m: _run_method(m, cfg, src_csv, tgt_csv, out, timestamp), methods))
    else:
        rows = [_run_method(m, cfg, src_csv, tgt_csv, out, timestamp) for m in methods]
    rows.sort(key=lambda r: r["method"])

    for r in rows:
        if r["status"] != "ok":
            continue
        a_src, a_tgt = r.pop("_adapted")
        seed = cfg["seed"]
        scatter_pair(a_src, a_tgt, fig_dir / f"scatter_{r['method']}.svg", r["method"], seed, cfg["embed"])
    ordered = [m for m in methods if any(r["method"] == m and r["status"] == "ok" for r in rows)]
    by_name = {r["method"]: r for r in rows}
    for metric in cfg["metrics"]:
        series = {m: by_name[m]["metrics"][metric] for m in ordered}
        if series:
            svg.emit_bars(series, fig_dir / f"bars_{metric}.svg", metric, metric)

    timing = {"total": 0.0, "compile": compile_time, "backend": backend_name(),
              "methods": {r["method"]: r.pop("_wall_time") for r in rows if "_wall_time" in r},
              "run_dirs": {r["method"]: r.pop("_run_dir") for r in rows if "_run_dir" in r}}
    summary = {
        "seed": cfg["seed"],
        "split_seed": cfg["split_seed"],
        "synthetic": cfg.get("synthetic"),
        "metrics": cfg["metrics"],
        "methods": {r["method"]: {k: v for k, v in r.items() if k != "method"} for r in rows},
    }
    (out / "summary.json").write_text(json.dumps(json_safe(summary), indent=2, sort_keys=True) + "\n")
    timing["total"] = time.perf_counter() - t_start
    (out / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    code = 0 if all(r["status"] == "ok" for r in rows) else 1
    return summary, timing, code


def cmd_pipeline(args):
    cfg = load_experiment(args.config, args.preset)
    out = args.out or cfg.get("output") or os.environ.get(OUTPUT_ROOT_ENV)
    if not out:
        raise UsageError(f"no output directory: pass --out, set 'output', or set {OUTPUT_ROOT_ENV}")
    workers = args.workers if args.workers is not None else int(cfg.get("workers", 1))
    summary, timing, code = run_pipeline(cfg, out, max(1, workers))
    for name, row in summary["methods"].items():
        if row["status"] == "ok":
            vals = " ".join(f"{k}={v:.4f}" for k, v in row["metrics"].items())
            print(f"{name:9s} {vals}  ({timing['methods'][name]:.2f} s)")
        else:
            print(f"{name:9s} FAILED {row['error']}")
    print(f"total {timing['total']:.1f} s (jit {timing['compile']:.1f} s) -> {out}")
    return code


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    p = ArgumentParser(prog="domadapt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    sp = sub.add_parser("synth", help="write a synthetic source/target pair")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--paper", action="store_true", help="two-feature, two-class reference configuration")
    g.add_argument("--spec", help="JSON synthetic spec (kind: paper | shifted | gaussian)")
    sp.add_argument("--dim", type=int, default=90, help="feature count for the shifted generator")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    ap = sub.add_parser("adapt", help="run one feature-level method")
    ap.add_argument("--method", required=True)
    ap.add_argument("--source", required=True)
    ap.add_argument("--target", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--config", help="JSON file with AdaptationConfig fields")
    ap.add_argument("--subspace-dim", type=int)
    ap.add_argument("--reg", type=float)
    ap.add_argument("--iterations", type=int)
    ap.add_argument("--kernel", choices=("linear", "rbf"))
    ap.add_argument("--bandwidth", help="positive number or 'median'")
    ap.add_argument("--aux", action="append", metavar="NAME=VALUE")
    ap.add_argument("--seed", type=int)
    ap.set_defaults(func=cmd_adapt)

    ep = sub.add_parser("eval", help="feature metrics before/after adaptation")
    ep.add_argument("--source", required=True)
    ep.add_argument("--target", required=True)
    ep.add_argument("--adapted-source")
    ep.add_argument("--adapted-target")
    ep.add_argument("--metrics", default="mmd,domain-acc")
    ep.add_argument("--seed", type=int, default=0, help="domain-classifier split seed")
    ep.add_argument("--k", type=int, default=1)
    ep.add_argument("--record", help="run record JSON to append the metrics to")
    ep.add_argument("--out", help="also write the report here")
    ep.set_defaults(func=cmd_eval)

    vp = sub.add_parser("viz", help="scatter and bar-chart SVGs")
    vp.add_argument("--pair", nargs=2, action="append", required=True, metavar=("SOURCE", "TARGET"))
    vp.add_argument("--names", nargs="*")
    vp.add_argument("--metrics", nargs="*", help="metric JSON files (from eval --out)")
    vp.add_argument("--embed", choices=("auto", "tsne", "pca"), default="auto")
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--out", required=True)
    vp.set_defaults(func=cmd_viz)

    ip = sub.add_parser("img", help="image-level adaptation of NIfTI volumes")
    ip.add_argument("--method", choices=IMAGE_METHODS, required=True)
    ip.add_argument("--source", required=True)
    ip.add_argument("--target", required=True)
    ip.add_argument("--threshold", type=int, default=3)
    ip.add_argument("--eval", action="store_true")
    ip.add_argument("--out", required=True)
    ip.set_defaults(func=cmd_img)

    pp = sub.add_parser("pipeline", help="generate/load, adapt with every method, evaluate, plot")
    pp.add_argument("config", nargs="?")
    pp.add_argument("--preset", choices=sorted(PRESETS))
    pp.add_argument("--out")
    pp.add_argument("--workers", type=int)
    pp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DomainAdaptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
