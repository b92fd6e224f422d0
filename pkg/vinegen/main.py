import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import click
import numpy as np

from vinegen.autoencoder import TrainConfig, train
from vinegen.bicop import BicopFamily
from vinegen.bundle import build_metadata, load_bundle, load_model, save_model
from vinegen.config import Settings
from vinegen.csv_io import default_columns, read_csv, write_csv
from vinegen.datasets import GENERATORS, Dataset, downsample, generate, load_idx
from vinegen.errors import DomainError, VinegenError
from vinegen.experiments import (
    cone_truncation,
    digit_family_study,
    digit_truncation_study,
    load_digit_images,
    toy_table,
)
from vinegen.joint import JointModel, fit_joint
from vinegen.metrics import EvalReport, c2st, coverage, mean_loglik, mmd
from vinegen.pipeline import VcaeModel, latent_interpolate, vcae_fit, vcae_sample
from vinegen.plotting import image_grid_svg, scatter_svg, write_pgm

logging.basicConfig(level=os.getenv("LOG_LEVEL", "INFO"))

USAGE_EXIT = 1
UNEXPECTED_EXIT = 3
FAMILY_CHOICE = click.Choice([f.value for f in BicopFamily])
EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUT_FILE = click.Path(dir_okay=False, path_type=Path)


def _settings(ctx: click.Context) -> Settings:
    return ctx.find_root().obj


def _write_json(path: Path, document: Dict[str, Any]) -> None:
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_ints(value: Optional[str], name: str) -> tuple[int, ...]:
    if not value:
        return ()
    try:
        return tuple(int(part) for part in value.split(","))
    except ValueError:
        raise click.BadParameter(
            f"expected comma-separated integers, got {value!r}", param_hint=name
        ) from None


def _image_side(p: int, hint: Optional[int] = None) -> int:
    side = hint or int(round(p**0.5))
    if side * side != p:
        raise DomainError(f"{p} pixels per row do not form a {side}x{side} image")
    return side


@click.group()
@click.option(
    "--threads", type=click.IntRange(min=1), default=None, help="Overrides VINEGEN_THREADS."
)
@click.pass_context
def cli(ctx: click.Context, threads: Optional[int]) -> None:
    """Vine copula models, autoencoders and the VCAE generative pipeline."""
    settings = Settings.from_env()
    logging.getLogger().setLevel(settings.log_level)
    if threads is not None:
        settings = dataclasses.replace(settings, threads=threads)
    ctx.obj = settings


@cli.command("gen")
@click.argument("name", type=click.Choice(sorted(GENERATORS)))
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=OUT_FILE, required=True)
def gen_command(name: str, n: int, seed: int, out: Path) -> None:
    """Generate a toy dataset as CSV."""
    dataset = generate(name, n, seed)
    write_csv(out, dataset.x, dataset.labels)


@cli.command("fit-vine")
@click.option("--input", "input_path", type=EXISTING_FILE, required=True)
@click.option("--family", type=FAMILY_CHOICE, default="tll", show_default=True)
@click.option("--trunc", type=click.IntRange(min=1), default=None, help="Default: min(5, d-1).")
@click.option("--out", type=OUT_FILE, required=True)
@click.pass_context
def fit_vine_command(
    ctx: click.Context,
    input_path: Path,
    family: str,
    trunc: Optional[int],
    out: Path,
) -> None:
    """Fit kernel marginals and a vine copula to a CSV table."""
    settings = _settings(ctx)
    table = read_csv(input_path)
    model = fit_joint(
        table.values,
        family,
        trunc_level=trunc,
        kde_grid_size=settings.kde_grid_size,
        bicop_grid_size=settings.bicop_grid_size,
        bandwidth_mult=settings.bandwidth_mult,
        threads=settings.threads,
    )
    metadata = build_metadata(
        data_path=input_path,
        source_date_epoch=settings.source_date_epoch,
        columns=table.columns,
        family=family,
        n=int(table.values.shape[0]),
    )
    save_model(out, "vine", model, metadata)


@cli.command("sample")
@click.option("--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("--n", "n", type=click.IntRange(min=0), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=OUT_FILE, required=True)
def sample_command(model_path: Path, n: int, seed: int, out: Path) -> None:
    """Sample a fitted vine bundle on the data scale."""
    bundle = load_bundle(model_path, "vine")
    model: JointModel = bundle.model()
    columns = bundle.metadata.get("columns") or default_columns(model.d)
    write_csv(out, model.sample(n, seed), columns=columns)


@cli.command("logdensity")
@click.option("--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("--input", "input_path", type=EXISTING_FILE, required=True)
@click.option("--out", type=OUT_FILE, required=True)
def logdensity_command(model_path: Path, input_path: Path, out: Path) -> None:
    """Joint log-density of every row of a CSV table."""
    model: JointModel = load_model(model_path, "vine")
    values = read_csv(input_path).values
    write_csv(out, model.log_density(values), columns=["log_density"])


def _train_config(
    latent: int,
    hidden: str,
    epochs: int,
    lr: float,
    wd: float,
    batch: int,
    seed: int,
) -> TrainConfig:
    return TrainConfig(
        learning_rate=lr,
        weight_decay=wd,
        epochs=epochs,
        batch_size=batch,
        seed=seed,
        latent_dim=latent,
        hidden_dims=_parse_ints(hidden, "--hidden"),
    )


def _ae_options(func):
    options = [
        click.option("--latent", type=click.IntRange(min=1), default=10, show_default=True),
        click.option("--hidden", default="32", show_default=True, help="Comma-separated widths."),
        click.option("--epochs", type=click.IntRange(min=0), default=50, show_default=True),
        click.option("--lr", type=float, default=0.001, show_default=True),
        click.option("--wd", type=float, default=0.001, show_default=True),
        click.option("--batch", type=click.IntRange(min=1), default=64, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@cli.command("ae-train")
@click.option("--data", "data_path", type=EXISTING_FILE, required=True)
@_ae_options
@click.option("--out", type=OUT_FILE, required=True)
@click.pass_context
def ae_train_command(
    ctx: click.Context,
    data_path: Path,
    latent: int,
    hidden: str,
    epochs: int,
    lr: float,
    wd: float,
    batch: int,
    seed: int,
    out: Path,
) -> None:
    """Train a dense autoencoder on rows with values in [0, 1]."""
    cfg = _train_config(latent, hidden, epochs, lr, wd, batch, seed)
    result = train(read_csv(data_path).values, cfg)
    metadata = build_metadata(
        seed=seed,
        data_path=data_path,
        source_date_epoch=_settings(ctx).source_date_epoch,
        train_config=cfg.to_dict(),
        loss_history=result.history,
    )
    save_model(out, "ae", result.model, metadata)


@cli.group("vcae")
def vcae_group() -> None:
    """Vine copula autoencoder: fit, sample, interpolate."""


def _load_images(
    data_path: Optional[Path],
    idx_images: Optional[Path],
    idx_labels: Optional[Path],
    factor: int,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    if (data_path is None) == (idx_images is None):
        raise click.UsageError("Give exactly one of --data or --idx-images")
    if idx_images is not None:
        dataset = load_idx(idx_images, idx_labels)
        if factor > 1:
            dataset = downsample(dataset, factor)
        return dataset.x, dataset.labels
    table = read_csv(data_path)
    return table.values, table.labels


@vcae_group.command("fit")
@click.option("--data", "data_path", type=EXISTING_FILE, default=None)
@click.option("--idx-images", type=EXISTING_FILE, default=None)
@click.option("--idx-labels", type=EXISTING_FILE, default=None)
@click.option("--downsample", "factor", type=click.IntRange(min=1), default=1, show_default=True)
@_ae_options
@click.option("--family", type=FAMILY_CHOICE, default="tll", show_default=True)
@click.option("--trunc", type=click.IntRange(min=1), default=None)
@click.option(
    "--conditional/--unconditional",
    default=True,
    show_default=True,
    help="Fit per-class models when labels are present.",
)
@click.option("--out", type=OUT_FILE, required=True)
@click.pass_context
def vcae_fit_command(
    ctx: click.Context,
    data_path: Optional[Path],
    idx_images: Optional[Path],
    idx_labels: Optional[Path],
    factor: int,
    latent: int,
    hidden: str,
    epochs: int,
    lr: float,
    wd: float,
    batch: int,
    seed: int,
    family: str,
    trunc: Optional[int],
    conditional: bool,
    out: Path,
) -> None:
    """Train the autoencoder and fit vine models on its latent codes."""
    settings = _settings(ctx)
    x, labels = _load_images(data_path, idx_images, idx_labels, factor)
    cfg = _train_config(latent, hidden, epochs, lr, wd, batch, seed)
    model = vcae_fit(
        x,
        labels if conditional else None,
        cfg,
        family,
        trunc,
        min_class_size=settings.min_class_size,
        kde_grid_size=settings.kde_grid_size,
        bicop_grid_size=settings.bicop_grid_size,
        bandwidth_mult=settings.bandwidth_mult,
        threads=settings.threads,
    )
    metadata = build_metadata(
        seed=seed,
        data_path=data_path or idx_images,
        source_date_epoch=settings.source_date_epoch,
        train_config=cfg.to_dict(),
        family=family,
        labels=model.labels or None,
    )
    save_model(out, "vcae", model, metadata)


def _preview(path: Optional[Path], images: np.ndarray) -> None:
    if path is not None:
        write_pgm(path, images, _image_side(images.shape[1]))


@vcae_group.command("sample")
@click.option("--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("--n", "n", type=click.IntRange(min=0), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--label", type=int, default=None, help="Sample from one class model.")
@click.option("--out", type=OUT_FILE, required=True)
@click.option("--preview", type=OUT_FILE, default=None, help="Also write a PGM tile image.")
def vcae_sample_command(
    model_path: Path,
    n: int,
    seed: int,
    label: Optional[int],
    out: Path,
    preview: Optional[Path],
) -> None:
    """Sample images from a fitted VCAE bundle."""
    model: VcaeModel = load_model(model_path, "vcae")
    images = vcae_sample(model, n, seed, label)
    write_csv(out, images)
    _preview(preview, images)


@vcae_group.command("interpolate")
@click.option("--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("--data", "data_path", type=EXISTING_FILE, required=True)
@click.option("--a", "row_a", type=click.IntRange(min=0), required=True, help="Start row.")
@click.option("--b", "row_b", type=click.IntRange(min=0), required=True, help="End row.")
@click.option("--steps", type=click.IntRange(min=2), default=10, show_default=True)
@click.option("--out", type=OUT_FILE, required=True)
@click.option("--preview", type=OUT_FILE, default=None)
def vcae_interpolate_command(
    model_path: Path,
    data_path: Path,
    row_a: int,
    row_b: int,
    steps: int,
    out: Path,
    preview: Optional[Path],
) -> None:
    """Decode a straight line between two images' latent codes."""
    model: VcaeModel = load_model(model_path, "vcae")
    values = read_csv(data_path).values
    for row in (row_a, row_b):
        if row >= values.shape[0]:
            raise DomainError(f"Row {row} out of range; {data_path} has {values.shape[0]} rows")
    frames = latent_interpolate(model, values[row_a], values[row_b], steps)
    write_csv(out, frames)
    _preview(preview, frames)


def execute_eval(
    metric: str,
    a: np.ndarray,
    b: np.ndarray,
    model: Optional[JointModel],
    alpha: float,
    seed: int,
    bandwidth: Optional[float],
) -> EvalReport:
    report = EvalReport(n_a=int(a.shape[0]), n_b=int(b.shape[0]) if b is not None else None)
    if metric in ("coverage", "nll") and model is None:
        raise click.UsageError(f"--metric {metric} needs --model")
    if metric in ("mmd", "c2st", "coverage") and b is None:
        raise click.UsageError(f"--metric {metric} needs --b")
    if metric == "mmd":
        report.mmd = mmd(a, b, bandwidth)
        report.bandwidth = bandwidth
    elif metric == "coverage":
        report.coverage = coverage(model.log_density, a, b, alpha)
        report.alpha = alpha
    elif metric == "nll":
        report.mean_loglik = mean_loglik(model.log_density, a)
    else:
        report.c2st_accuracy = c2st(a, b, seed)
        report.seed = seed
    return report


@cli.command("eval")
@click.option("--metric", type=click.Choice(["mmd", "coverage", "nll", "c2st"]), required=True)
@click.option("--a", "a_path", type=EXISTING_FILE, required=True, help="Data (held-out truth).")
@click.option("--b", "b_path", type=EXISTING_FILE, default=None, help="Model samples.")
@click.option("--model", "model_path", type=EXISTING_FILE, default=None)
@click.option(
    "--alpha",
    type=click.FloatRange(0, 1, min_open=True, max_open=True),
    default=0.95,
    show_default=True,
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--bandwidth", type=click.FloatRange(0, min_open=True), default=None)
@click.option("--out", type=OUT_FILE, required=True)
def eval_command(
    metric: str,
    a_path: Path,
    b_path: Optional[Path],
    model_path: Optional[Path],
    alpha: float,
    seed: int,
    bandwidth: Optional[float],
    out: Path,
) -> None:
    """Compare two CSV samples (or data against a model) and write a JSON report."""
    a = read_csv(a_path).values
    b = read_csv(b_path).values if b_path is not None else None
    model = load_model(model_path, "vine") if model_path is not None else None
    report = execute_eval(metric, a, b, model, alpha, seed, bandwidth)
    _write_json(out, report.to_dict())


@cli.command("plot")
@click.option("--input", "input_path", type=EXISTING_FILE, required=True)
@click.option("--cols", default="0,1", show_default=True, help="Two column indices to scatter.")
@click.option(
    "--image-side",
    type=click.IntRange(min=1),
    default=None,
    help="Draw rows as side x side grayscale images.",
)
@click.option("--max-images", type=click.IntRange(min=1), default=64, show_default=True)
@click.option("--out", type=OUT_FILE, required=True)
def plot_command(
    input_path: Path,
    cols: str,
    image_side: Optional[int],
    max_images: int,
    out: Path,
) -> None:
    """Scatter two columns, or tile flattened images, into an SVG."""
    table = read_csv(input_path)
    if image_side is not None:
        _image_side(table.values.shape[1], image_side)
        image_grid_svg(out, table.values[:max_images], image_side)
        return
    pair = _parse_ints(cols, "--cols")
    if len(pair) != 2:
        raise click.BadParameter("expected exactly two column indices", param_hint="--cols")
    scatter_svg(out, table.values, pair, table.labels, table.columns)


@cli.group("experiment")
def experiment_group() -> None:
    """Reproducible studies; each writes a JSON report."""


@experiment_group.command("toy-table")
@click.option("--datasets", default=",".join(("ring8", "grid25", "swissroll")), show_default=True)
@click.option("--families", default="tll,gaussian", show_default=True)
@click.option("--reps", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--n", "n", type=click.IntRange(min=50), default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=OUT_FILE, required=True)
@click.pass_context
def toy_table_command(
    ctx: click.Context,
    datasets: str,
    families: str,
    reps: int,
    n: int,
    seed: int,
    out: Path,
) -> None:
    names = [name.strip() for name in datasets.split(",") if name.strip()]
    unknown = sorted(set(names) - set(GENERATORS))
    if unknown:
        raise click.BadParameter(f"unknown datasets {unknown}", param_hint="--datasets")
    rows = toy_table(
        names,
        [f.strip() for f in families.split(",") if f.strip()],
        reps=reps,
        n=n,
        seed=seed,
        threads=_settings(ctx).threads,
    )
    _write_json(out, {"experiment": "toy-table", "seed": seed, "rows": rows})


@experiment_group.command("cone-truncation")
@click.option("--n", "n", type=click.IntRange(min=50), default=3000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=OUT_FILE, required=True)
@click.pass_context
def cone_truncation_command(ctx: click.Context, n: int, seed: int, out: Path) -> None:
    rows = cone_truncation(n, seed, threads=_settings(ctx).threads)
    _write_json(out, {"experiment": "cone-truncation", "seed": seed, "rows": rows})


def _digit_options(func):
    options = [
        click.option("--idx-images", type=EXISTING_FILE, default=None),
        click.option("--idx-labels", type=EXISTING_FILE, default=None),
        click.option(
            "--downsample", "factor", type=click.IntRange(min=1), default=1, show_default=True
        ),
        click.option(
            "--limit", type=click.IntRange(min=1), default=None, help="Use only the first N images."
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return _ae_options(func)


def _digits(
    idx_images: Optional[Path], idx_labels: Optional[Path], factor: int, limit: Optional[int]
) -> Dataset:
    dataset = load_digit_images(idx_images, idx_labels, factor)
    if limit is not None and limit < dataset.n:
        dataset = dataclasses.replace(
            dataset,
            x=dataset.x[:limit],
            labels=None if dataset.labels is None else dataset.labels[:limit],
        )
    return dataset


@experiment_group.command("digits-families")
@_digit_options
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--trunc", type=click.IntRange(min=1), default=None)
@click.option("--out", type=OUT_FILE, required=True)
@click.pass_context
def digits_families_command(
    ctx: click.Context,
    idx_images: Optional[Path],
    idx_labels: Optional[Path],
    factor: int,
    limit: Optional[int],
    latent: int,
    hidden: str,
    epochs: int,
    lr: float,
    wd: float,
    batch: int,
    seed: int,
    seeds: str,
    trunc: Optional[int],
    out: Path,
) -> None:
    dataset = _digits(idx_images, idx_labels, factor, limit)
    cfg = _train_config(latent, hidden, epochs, lr, wd, batch, seed)
    report = digit_family_study(
        dataset,
        cfg,
        seeds=_parse_ints(seeds, "--seeds"),
        trunc_level=trunc,
        threads=_settings(ctx).threads,
    )
    _write_json(out, {"experiment": "digits-families", **report})


@experiment_group.command("digits-truncation")
@_digit_options
@click.option("--truncs", default="1,3,5", show_default=True)
@click.option("--family", type=FAMILY_CHOICE, default="tll", show_default=True)
@click.option("--out", type=OUT_FILE, required=True)
@click.pass_context
def digits_truncation_command(
    ctx: click.Context,
    idx_images: Optional[Path],
    idx_labels: Optional[Path],
    factor: int,
    limit: Optional[int],
    latent: int,
    hidden: str,
    epochs: int,
    lr: float,
    wd: float,
    batch: int,
    seed: int,
    truncs: str,
    family: str,
    out: Path,
) -> None:
    dataset = _digits(idx_images, idx_labels, factor, limit)
    cfg = _train_config(latent, hidden, epochs, lr, wd, batch, seed)
    report = digit_truncation_study(
        dataset,
        cfg,
        _parse_ints(truncs, "--truncs"),
        family,
        seed=seed,
        threads=_settings(ctx).threads,
    )
    _write_json(out, {"experiment": "digits-truncation", **report})


def _fail(code: int, message: str) -> int:
    click.echo(json.dumps({"code": code, "message": message}), err=True)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line; returns the process exit code."""
    try:
        args = list(argv) if argv is not None else None
        result = cli.main(args=args, prog_name="vinegen", standalone_mode=False)
    except click.exceptions.Abort:
        return _fail(USAGE_EXIT, "Aborted")
    except click.ClickException as exc:
        return _fail(USAGE_EXIT, exc.format_message())
    except VinegenError as exc:
        logging.debug("Command failed", exc_info=True)
        return _fail(exc.exit_code, str(exc))
    except Exception as exc:  # noqa: BLE001
        logging.exception("Unexpected failure")
        return _fail(UNEXPECTED_EXIT, f"{type(exc).__name__}: {exc}")
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
