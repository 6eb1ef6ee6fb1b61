"""Command-line pipeline: synth -> train -> attribute -> extract ->
cluster -> eval.

Every output file embeds the tool version and the fully resolved flag set,
and rerunning a command with the same flags reproduces the file
byte-for-byte. Exit codes: 0 success, 2 usage or config error, 3 external
adapter protocol failure, 4 internal invariant violation.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click

from . import __version__, errors
from .attribution import (AttributionConfig, attribute_dataset,
                          default_occlusion_window, load_attributions,
                          save_attributions)
from .cohort import ClusterParams, cluster_implets, save_cohorts
from .data import load_ucr_tsv
from .errors import ImpletkitError, ProtocolError
from .extraction import ImpletParams, extract_dataset, load_implets, save_implets
from .models import (KIND_CENTROID, KIND_EXTERNAL, KIND_LINEAR, ModelHandle,
                     TrainConfig, accuracy, external_model, load_model,
                     save_model, train_builtin)
from .perturb import (KIND_MEAN, KIND_NONE, KIND_SMOOTH, RemovalSpec,
                      cils_eval, faithfulness_eval, save_report,
                      write_plot_data)
from .synth import SynthSpec, generate, write_dataset
from .tsdist import BACKEND_NAME

_CONFIG_ERRORS = (ValueError, KeyError, OSError, json.JSONDecodeError,
                  errors.FormatError, errors.ShapeError, errors.SplitError,
                  errors.TrainError, errors.EvalError, errors.UnsupportedError,
                  errors.ClusterError, errors.DegenerateError,
                  errors.ReferenceError)

REMOVAL_KINDS = {"smooth": KIND_SMOOTH, "mean": KIND_MEAN, "none": KIND_NONE}


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ProtocolError as exc:
            click.echo(f"protocol error: {exc}", err=True)
            sys.exit(3)
        except _CONFIG_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except ImpletkitError as exc:
            click.echo(f"internal error: {exc}", err=True)
            sys.exit(4)
    return wrapper


def _stamp(config: dict) -> dict:
    return {"tool": {"name": "impletkit", "version": __version__},
            "config": dict(sorted(config.items()))}


def _resolve_model(spec: str, data_path: str | None, seed: int) -> ModelHandle:
    """builtin:linear|builtin:centroid train on --data; exec:<cmd> spawns an
    adapter; anything else is a saved model file."""
    if spec.startswith("exec:"):
        return external_model(spec[len("exec:"):])
    if spec in ("builtin:linear", "builtin:centroid"):
        if data_path is None:
            raise ValueError(f"{spec} requires --data to train on")
        kind = KIND_LINEAR if spec.endswith("linear") else KIND_CENTROID
        dataset = load_ucr_tsv(data_path)
        return train_builtin(dataset, kind, TrainConfig(seed=seed))
    return load_model(spec)


def _close_model(model: ModelHandle) -> None:
    if model.kind == KIND_EXTERNAL:
        model.parameters["client"].close()


@click.group()
@click.version_option(__version__, prog_name="impletkit")
@click.option("--seed", type=int, default=None,
              help="Global seed; falls back to IMPLET_SEED, then 0.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker cap for pairwise distance computation.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, seed, threads, verbose):
    """Subsequence-explanation toolkit (DTW backend: see `--verbose`)."""
    if seed is None:
        seed = int(os.environ.get("IMPLET_SEED", "0"))
    if threads < 1:
        raise click.UsageError("--threads must be >= 1")
    ctx.obj = {"seed": seed, "threads": threads, "verbose": verbose}
    if verbose:
        click.echo(f"impletkit {__version__} (dtw backend: {BACKEND_NAME})",
                   err=True)


@main.command()
@click.option("--motif", type=click.Choice(["gaussian_bump", "two_motifs"]),
              default="gaussian_bump", show_default=True)
@click.option("--n-per-class", type=int, default=100, show_default=True)
@click.option("--length", "T", type=int, default=100, show_default=True)
@click.option("--center", type=float, default=None,
              help="Motif center; defaults to T/2 (0.3T/0.7T for two motifs).")
@click.option("--width", type=float, default=4.0, show_default=True)
@click.option("--amplitude", type=float, default=2.0, show_default=True)
@click.option("--noise-std", type=float, default=0.5, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--meta-out", type=click.Path(), default=None,
              help="Metadata JSON path; defaults to <out>.meta.json.")
@click.pass_obj
@_guarded
def synth(obj, motif, n_per_class, T, center, width, amplitude, noise_std,
          out, meta_out):
    """Generate a labeled synthetic dataset with known motif intervals."""
    spec = SynthSpec(n_per_class=n_per_class, T=T, motif=motif,
                     bump_center=center, bump_width=width,
                     amplitude=amplitude, noise_std=noise_std,
                     seed=obj["seed"])
    dataset = generate(spec)
    write_dataset(dataset, out)
    meta_path = meta_out or f"{out}.meta.json"
    config = {"command": "synth", "motif": motif, "n_per_class": n_per_class,
              "length": T, "center": center, "width": width,
              "amplitude": amplitude, "noise_std": noise_std, "out": out,
              "meta_out": meta_path, "seed": obj["seed"]}
    with open(meta_path, "w") as fh:
        json.dump({**dataset.metadata, **_stamp(config)}, fh, sort_keys=True)
        fh.write("\n")
    click.echo(f"wrote {len(dataset)} samples of length {T} to {out}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["linear", "centroid"]),
              default="linear", show_default=True)
@click.option("--lr", type=float, default=0.5, show_default=True)
@click.option("--epochs", type=int, default=300, show_default=True)
@click.option("--l2", type=float, default=1e-3, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
@_guarded
def train(obj, data, kind, lr, epochs, l2, out):
    """Train a built-in classifier and save its parameters as JSON."""
    dataset = load_ucr_tsv(data)
    config = {"command": "train", "data": data, "kind": kind, "lr": lr,
              "epochs": epochs, "l2": l2, "out": out, "seed": obj["seed"]}
    model_kind = KIND_LINEAR if kind == "linear" else KIND_CENTROID
    model = train_builtin(dataset, model_kind,
                          TrainConfig(learning_rate=lr, epochs=epochs, l2=l2,
                                      seed=obj["seed"]))
    save_model(model, out, extra=_stamp(config))
    click.echo(f"train accuracy {accuracy(model, dataset):.4f}; saved to {out}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--model", "model_spec", required=True,
              help="builtin:linear | builtin:centroid | exec:<command> | model file")
@click.option("--method",
              type=click.Choice(["occlusion", "saliency_linear",
                                 "inputxgrad_linear"]),
              default="occlusion", show_default=True)
@click.option("--class", "target", default="predicted", show_default=True,
              help="predicted | true | <class index>")
@click.option("--window", type=int, default=0,
              help="Occlusion window; 0 picks max(3, ceil(T/20)).")
@click.option("--stride", type=int, default=0,
              help="Occlusion stride; 0 picks max(1, window // 2).")
@click.option("--baseline", type=click.Choice(["zero", "sample_mean"]),
              default="sample_mean", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
@_guarded
def attribute(obj, data, model_spec, method, target, window, stride, baseline,
              out):
    """Write per-timestep attributions for every sample."""
    dataset = load_ucr_tsv(data)
    if window == 0:
        window = default_occlusion_window(dataset.length)
    if stride == 0:
        stride = max(1, window // 2)
    target_class = int(target) if target not in ("predicted", "true") else target
    config = {"command": "attribute", "data": data, "model": model_spec,
              "method": method, "class": str(target), "window": window,
              "stride": stride, "baseline": baseline, "out": out,
              "seed": obj["seed"]}
    model = _resolve_model(model_spec, data, obj["seed"])
    try:
        attr_config = AttributionConfig(method=method, window=window,
                                        stride=stride, baseline=baseline,
                                        target_class=target_class)
        attrs = attribute_dataset(model, dataset, attr_config)
    finally:
        _close_model(model)
    save_attributions(attrs, method, out, extra=_stamp(config))
    click.echo(f"wrote {len(attrs)} attribution entries to {out}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--attr", "attr_path", required=True, type=click.Path(exists=True))
@click.option("--lambda", "lam", type=float, default=0.1, show_default=True)
@click.option("--phi", type=float, default=1.0, show_default=True)
@click.option("--len-min", type=int, default=3, show_default=True)
@click.option("--len-max", type=int, default=0,
              help="Maximum implet length; 0 picks floor(T/2).")
@click.option("--scoring", type=click.Choice(["sum", "mean"]), default="sum",
              show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
@_guarded
def extract(obj, data, attr_path, lam, phi, len_min, len_max, scoring, out):
    """Extract high-attribution subsequences (implets) per sample."""
    dataset = load_ucr_tsv(data)
    attrs = load_attributions(attr_path, dataset)
    params = ImpletParams(lam=lam, phi=phi, len_min=len_min,
                          len_max=None if len_max == 0 else len_max,
                          scoring=scoring)
    implets = extract_dataset(dataset, attrs, params)
    config = {"command": "extract", "data": data, "attr": attr_path,
              "lambda": lam, "phi": phi, "len_min": len_min,
              "len_max": len_max, "scoring": scoring, "out": out,
              "seed": obj["seed"]}
    save_implets(implets, params, out, extra=_stamp(config))
    per_class: dict[int, int] = {}
    for im in implets:
        per_class[im.class_id] = per_class.get(im.class_id, 0) + 1
    summary = "; ".join(f"class {c}: {per_class[c]}" for c in sorted(per_class))
    click.echo(f"extracted {len(implets)} implets ({summary or 'none'}) to {out}")


@main.command()
@click.option("--implets", "implets_path", required=True,
              type=click.Path(exists=True))
@click.option("--k-max", type=int, default=8, show_default=True)
@click.option("--repeats", type=int, default=5, show_default=True)
@click.option("--max-iter", type=int, default=50, show_default=True)
@click.option("--dba-iter", type=int, default=10, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
@_guarded
def cluster(obj, implets_path, k_max, repeats, max_iter, dba_iter, out):
    """Cluster implets per class into cohort centroids."""
    implets, _ = load_implets(implets_path)
    if not implets:
        raise ValueError(f"implet file {implets_path} is empty")
    params = ClusterParams(k_max=k_max, repeats=repeats,
                           max_kmeans_iter=max_iter, dba_iter=dba_iter,
                           seed=obj["seed"])
    by_class: dict[int, list] = {}
    for im in implets:
        by_class.setdefault(im.class_id, []).append(im)
    results = [cluster_implets(by_class[cls], params, threads=obj["threads"])
               for cls in sorted(by_class)]
    config = {"command": "cluster", "implets": implets_path, "k_max": k_max,
              "repeats": repeats, "max_iter": max_iter, "dba_iter": dba_iter,
              "out": out, "seed": obj["seed"]}
    save_cohorts(results, params, out, implets=implets, extra=_stamp(config))
    for res in results:
        click.echo(f"class {res.class_id}: k*={res.k_star} "
                   f"silhouette={res.silhouette:.4f}")


@main.command(name="eval")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--model", "model_spec", required=True)
@click.option("--mode", type=click.Choice(["implet", "cils-1d", "cils-2d"]),
              default="implet", show_default=True)
@click.option("--implets", "implets_path", type=click.Path(exists=True),
              default=None, help="Implet file (implet mode).")
@click.option("--removal", type=click.Choice(sorted(REMOVAL_KINDS)),
              default="smooth", show_default=True)
@click.option("--multi", is_flag=True,
              help="Remove all of a sample's intervals at once.")
@click.option("--random-trials", type=int, default=10, show_default=True)
@click.option("--target", type=click.Choice(["truth", "prediction"]),
              default="truth", show_default=True)
@click.option("--method",
              type=click.Choice(["occlusion", "saliency_linear",
                                 "inputxgrad_linear"]),
              default="occlusion", show_default=True,
              help="Attribution method (cils modes).")
@click.option("--window", type=int, default=0)
@click.option("--stride", type=int, default=0)
@click.option("--baseline", type=click.Choice(["zero", "sample_mean"]),
              default="sample_mean", show_default=True)
@click.option("--lambda", "lam", type=float, default=0.1, show_default=True)
@click.option("--phi", type=float, default=1.0, show_default=True)
@click.option("--len-min", type=int, default=3, show_default=True)
@click.option("--len-max", type=int, default=0)
@click.option("--scoring", type=click.Choice(["sum", "mean"]), default="sum",
              show_default=True)
@click.option("--k-max", type=int, default=8, show_default=True)
@click.option("--repeats", type=int, default=5, show_default=True)
@click.option("--dataset-name", default=None,
              help="Label for the plot CSV; defaults to the data file stem.")
@click.option("--out", required=True, type=click.Path())
@click.option("--plot-out", type=click.Path(), default=None,
              help="Plot-data CSV path; defaults to <out>.csv.")
@click.pass_obj
@_guarded
def eval_cmd(obj, data, model_spec, mode, implets_path, removal, multi,
             random_trials, target, method, window, stride, baseline, lam,
             phi, len_min, len_max, scoring, k_max, repeats, dataset_name,
             out, plot_out):
    """Faithfulness evaluation: identified vs random removal drops."""
    dataset = load_ucr_tsv(data)
    if window == 0:
        window = default_occlusion_window(dataset.length)
    if stride == 0:
        stride = max(1, window // 2)
    removal_spec = RemovalSpec(kind=REMOVAL_KINDS[removal], multi=multi,
                               seed=obj["seed"])
    plot_path = plot_out or f"{out}.csv"
    name = dataset_name or Path(data).stem
    config = {"command": "eval", "data": data, "model": model_spec,
              "mode": mode, "implets": implets_path, "removal": removal,
              "multi": multi, "random_trials": random_trials,
              "target": target, "method": method, "window": window,
              "stride": stride, "baseline": baseline, "lambda": lam,
              "phi": phi, "len_min": len_min, "len_max": len_max,
              "scoring": scoring, "k_max": k_max, "repeats": repeats,
              "dataset_name": name, "out": out, "plot_out": plot_path,
              "seed": obj["seed"]}

    model = _resolve_model(model_spec, data, obj["seed"])
    try:
        if mode == "implet":
            if implets_path is None:
                raise ValueError("implet mode requires --implets")
            implets, _ = load_implets(implets_path)
            report = faithfulness_eval(model, dataset, implets, removal_spec,
                                       random_trials=random_trials,
                                       target=target)
            reports = [report]
        else:
            attr_config = AttributionConfig(method=method, window=window,
                                            stride=stride, baseline=baseline)
            implet_params = ImpletParams(lam=lam, phi=phi, len_min=len_min,
                                         len_max=None if len_max == 0 else len_max,
                                         scoring=scoring)
            cluster_params = ClusterParams(k_max=k_max, repeats=repeats,
                                           seed=obj["seed"])
            cils_mode = "values_only" if mode == "cils-1d" else "values_and_attr"
            cils_report, implet_report = cils_eval(
                model, dataset, attr_config, implet_params, cluster_params,
                removal_spec, mode=cils_mode, random_trials=random_trials,
                target=target, threads=obj["threads"])
            reports = [cils_report, implet_report]
    finally:
        _close_model(model)

    save_report(reports, out, extra=_stamp(config))
    write_plot_data([(name, r) for r in reports], plot_path)
    for r in reports:
        click.echo(f"{r.explainer_name}: drop_identified={r.drop_identified:.4f} "
                   f"drop_random={r.drop_random:.4f} delta={r.delta:.4f}")


if __name__ == "__main__":
    main()
