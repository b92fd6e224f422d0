"""Reproducible studies built from the library: toy-data table, cone truncation, digits.

Each study returns a list of plain dict rows (JSON-ready) plus a summary,
so the command line can dump it and tests can check orderings.
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import kstest

from vinegen.autoencoder import TrainConfig, train
from vinegen.bicop import BicopFamily
from vinegen.concordance import kendall_tau
from vinegen.datasets import (
    Dataset,
    augment_with_shifts,
    cone_distance,
    downsample,
    gen_cone3d,
    generate,
    load_digits8,
    load_idx,
)
from vinegen.joint import fit_joint
from vinegen.metrics import c2st, coverage, mean_loglik, mmd
from vinegen.pipeline import vcae_fit, vcae_sample
from vinegen.vine import VineModel

TOY_DATASETS = ("ring8", "grid25", "swissroll")
TOY_FAMILIES = ("tll", "gaussian")
DIGIT_FAMILIES = ("tll", "gaussian", "indep")
DIGIT_TRUNCS = (1, 3, 5)
CONE_MODELS = (("tll", 1), ("tll", 2), ("gaussian", 2))
DIGIT_MIN_IMAGES = 2000
DIGIT_SAMPLES = 2000
# nonparametric pairs in the cone and digit studies: finer grid, narrower kernel
PAIR_GRID_SIZE = 50
PAIR_BANDWIDTH_MULT = 0.5


def _summarize(values: Sequence[float]) -> Dict[str, float]:
    arr = np.asarray(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "sd": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
    }


def residual_uniformity(vine: VineModel, n: int = 5000, seed: int = 0) -> Dict[str, float]:
    """KS p-values and largest pairwise |tau| of residuals of the vine's own samples."""
    w = vine.rosenblatt_residuals(vine.sample(n, seed))
    pvalues = [float(kstest(w[:, i], "uniform").pvalue) for i in range(w.shape[1])]
    taus = [
        abs(kendall_tau(w[:, i], w[:, j]))
        for i in range(w.shape[1])
        for j in range(i + 1, w.shape[1])
    ]
    return {"ks_min_pvalue": min(pvalues), "max_abs_tau": max(taus) if taus else 0.0}


def toy_table(
    datasets: Sequence[str] = TOY_DATASETS,
    families: Sequence[str] = TOY_FAMILIES,
    reps: int = 20,
    n: int = 2000,
    seed: int = 0,
    alpha: float = 0.95,
    threads: int = 1,
) -> List[Dict[str, Any]]:
    rows = []
    for name in datasets:
        for family in families:
            family = BicopFamily.parse(family).value
            scores: Dict[str, List[float]] = {"mean_loglik": [], "coverage": [], "mmd": []}
            started = time.perf_counter()
            for rep in range(reps):
                base = seed + 1000 * rep
                model = fit_joint(generate(name, n, base).x, family, threads=threads)
                truth = generate(name, n, base + 1).x
                model_sample = model.sample(n, base + 2)
                scores["mean_loglik"].append(mean_loglik(model.log_density, truth))
                scores["coverage"].append(coverage(model.log_density, truth, model_sample, alpha))
                scores["mmd"].append(mmd(model_sample, truth))
            row = {"dataset": name, "family": family, "reps": reps, "n": n}
            row.update({key: _summarize(values) for key, values in scores.items()})
            rows.append(row)
            logging.info(
                "%s/%s: loglik %.3f coverage %.3f mmd %.3f (%.1fs)",
                name,
                family,
                row["mean_loglik"]["mean"],
                row["coverage"]["mean"],
                row["mmd"]["mean"],
                time.perf_counter() - started,
            )
    return rows


def cone_truncation(n: int = 3000, seed: int = 0, threads: int = 1) -> List[Dict[str, Any]]:
    train_x = gen_cone3d(n, seed).x
    rows = []
    for family, trunc in CONE_MODELS:
        model = fit_joint(
            train_x,
            family,
            trunc_level=trunc,
            bicop_grid_size=PAIR_GRID_SIZE,
            bandwidth_mult=PAIR_BANDWIDTH_MULT,
            threads=threads,
        )
        samples = model.sample(n, seed + 1)
        row = {
            "family": family,
            "trunc_level": trunc,
            "mean_cone_distance": float(np.mean(cone_distance(samples))),
        }
        row.update(residual_uniformity(model.vine, n, seed + 2))
        rows.append(row)
        logging.info(
            "cone %s trunc=%s: distance %.4f", family, trunc, row["mean_cone_distance"]
        )
    return rows


def load_digit_images(
    images_path: Optional[Path | str] = None,
    labels_path: Optional[Path | str] = None,
    factor: int = 1,
    min_images: int = DIGIT_MIN_IMAGES,
) -> Dataset:
    """IDX images (optionally block-averaged), or the bundled 8x8 digits.

    The bundled set is topped up to ``min_images`` with one-pixel shifts.
    """
    if images_path is None:
        return augment_with_shifts(load_digits8(), min_images)
    dataset = load_idx(images_path, labels_path)
    return downsample(dataset, factor) if factor > 1 else dataset


def _split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.random.default_rng(seed).permutation(dataset.n)
    cut = int(round(dataset.n * (1.0 - test_fraction)))
    return dataset.x[order[:cut]], dataset.x[order[cut:]]


def digit_family_study(
    dataset: Dataset,
    ae_cfg: TrainConfig,
    families: Sequence[str] = DIGIT_FAMILIES,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    trunc_level: Optional[int] = None,
    test_fraction: float = 0.3,
    n_samples: int = DIGIT_SAMPLES,
    threads: int = 1,
) -> Dict[str, Any]:
    """Pixel-space MMD of VCAE samples against held-out images, per latent family."""
    train_x, test_x = _split(dataset, test_fraction, ae_cfg.seed)
    ae = train(train_x, ae_cfg).model
    rows = []
    for family in families:
        family = BicopFamily.parse(family).value
        model = vcae_fit(
            train_x,
            vine_family=family,
            trunc_level=trunc_level,
            ae=ae,
            bicop_grid_size=PAIR_GRID_SIZE,
            bandwidth_mult=PAIR_BANDWIDTH_MULT,
            threads=threads,
        )
        for seed in seeds:
            samples = vcae_sample(model, n_samples, seed)
            rows.append({"family": family, "seed": seed, "mmd": mmd(samples, test_x)})
    summary = {
        family: _summarize([r["mmd"] for r in rows if r["family"] == family])
        for family in dict.fromkeys(r["family"] for r in rows)
    }
    return {"rows": rows, "summary": summary, "n_train": train_x.shape[0], "n_test": test_x.shape[0]}


def digit_truncation_study(
    dataset: Dataset,
    ae_cfg: TrainConfig,
    truncs: Sequence[int] = DIGIT_TRUNCS,
    family: str = "tll",
    seed: int = 0,
    test_fraction: float = 0.3,
    threads: int = 1,
) -> Dict[str, Any]:
    """C2ST accuracy and fit-plus-sample wall time for increasing truncation levels."""
    train_x, test_x = _split(dataset, test_fraction, ae_cfg.seed)
    ae = train(train_x, ae_cfg).model
    rows = []
    for trunc in truncs:
        started = time.perf_counter()
        model = vcae_fit(
            train_x,
            vine_family=family,
            trunc_level=trunc,
            ae=ae,
            bicop_grid_size=PAIR_GRID_SIZE,
            bandwidth_mult=PAIR_BANDWIDTH_MULT,
            threads=threads,
        )
        samples = vcae_sample(model, test_x.shape[0], seed)
        seconds = time.perf_counter() - started
        rows.append(
            {
                "trunc_level": trunc,
                "c2st_accuracy": c2st(samples, test_x, seed),
                "seconds": seconds,
            }
        )
        logging.info("digits trunc=%s: c2st %.3f in %.1fs", trunc, rows[-1]["c2st_accuracy"], seconds)
    return {"rows": rows, "family": BicopFamily.parse(family).value, "n_train": train_x.shape[0]}
