"""The ablation grid: sweep one axis, best-of-lr-search per seed, mean/std."""
import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .coverage import train_generator_sw
from .errors import ConfigError, DivergenceError
from .generator import build_generator
from .reparam import plan_chunks
from .train import McncSetting, MlpSpec, TrainConfig, train

AXES = (
    "activation",
    "input_frequency",
    "hidden_size",
    "generator_width",
    "generator_depth",
    "init",
    "fixed_rate_kd",
    "random_vs_trained",
)


@dataclass
class AblationSpec:
    axis: str
    values: list
    base_train: TrainConfig
    base_mcnc: McncSetting = McncSetting()
    model_spec: MlpSpec = MlpSpec((784, 256, 256, 10))
    repeats: int = 3
    generator_train_steps: int = 200  # random_vs_trained axis only

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown ablation axis {self.axis!r}; expected one of {AXES}")
        if not self.values:
            raise ConfigError("ablation values must be nonempty")


def _trainable_budget(spec, mcnc):
    cfg_k, d = mcnc.gen_k, mcnc.d
    infos = spec.layer_infos(compress_biases=mcnc.compress_biases)
    return sum(
        plan_chunks(i.n_params, d, cfg_k).trainable_count for i in infos if i.compressed
    )


def _chunk_size_for_budget(spec, mcnc, budget):
    """Pick d so the trainable count stays close to ``budget`` (same k)."""
    total = sum(i.n_params for i in spec.layer_infos(compress_biases=mcnc.compress_biases) if i.compressed)
    per_chunk = mcnc.gen_k + 1
    return max(1, math.ceil(total * per_chunk / budget))


def apply_axis(spec, value, model_spec, mcnc):
    """Map an axis value to (model_spec, mcnc_setting) for one grid cell."""
    axis = spec.axis
    if axis == "activation":
        return model_spec, replace(mcnc, activation=value)
    if axis == "input_frequency":
        return model_spec, replace(mcnc, input_frequency=float(value))
    if axis == "hidden_size":
        sizes = (model_spec.layer_sizes[0], *([int(value)] * (model_spec.n_layers - 1)), model_spec.layer_sizes[-1])
        new_model = MlpSpec(sizes, model_spec.hidden_activation)
        budget = _trainable_budget(model_spec, mcnc)
        return new_model, replace(mcnc, d=_chunk_size_for_budget(new_model, mcnc, budget))
    if axis == "generator_width":
        return model_spec, replace(mcnc, hidden_widths=(int(value),) * len(mcnc.hidden_widths))
    if axis == "generator_depth":
        return model_spec, replace(mcnc, hidden_widths=(mcnc.hidden_widths[0],) * int(value))
    if axis == "init":
        dist, scale = value
        return model_spec, replace(mcnc, init=dist, init_scale=float(scale))
    if axis == "fixed_rate_kd":
        k, d = value
        return model_spec, replace(mcnc, k=int(k), d=int(d))
    if axis == "random_vs_trained":
        return model_spec, mcnc  # handled at generator-build time
    raise ConfigError(f"unknown ablation axis {axis!r}")


def run_ablation(spec, train_data, test_data):
    """Rows of {value, mean_acc, std_acc, per_seed, failed} for each axis value.

    Per repeat seed, every learning rate in the search set is trained and
    the best test accuracy kept. A diverging cell is recorded and the sweep
    continues.
    """
    rows = []
    for value in spec.values:
        model_spec, mcnc = apply_axis(spec, value, spec.model_spec, spec.base_mcnc)
        per_seed = []
        failures = []
        for repeat in range(spec.repeats):
            seed = spec.base_train.seed + repeat
            best = None
            for lr in spec.base_train.lr_search:
                cfg = replace(spec.base_train, lr=lr, seed=seed)
                try:
                    result = _run_cell(spec, value, model_spec, mcnc, train_data, test_data, cfg)
                except DivergenceError as err:
                    failures.append({"seed": seed, "lr": lr, "error": str(err)})
                    continue
                if best is None or result.test_accuracy > best.test_accuracy:
                    best = result
            if best is not None:
                per_seed.append({"seed": seed, "accuracy": best.test_accuracy, "lr": best.lr})
        accs = [cell["accuracy"] for cell in per_seed]
        rows.append(
            {
                "value": value,
                "mean_acc": float(np.mean(accs)) if accs else None,
                "std_acc": float(np.std(accs)) if accs else None,
                "per_seed": per_seed,
                "failed": failures,
            }
        )
    return rows


def _run_cell(spec, value, model_spec, mcnc, train_data, test_data, cfg):
    if spec.axis == "random_vs_trained" and value:
        base_gen = build_generator(mcnc.generator_config())
        trained = train_generator_sw(
            base_gen, steps=spec.generator_train_steps, batch=256, lr=0.05, bound=1.0, seed=cfg.seed
        )
        return train(model_spec, mcnc, train_data, cfg, test_data=test_data, generator=trained)
    return train(model_spec, mcnc, train_data, cfg, test_data=test_data)


def write_rows_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "mean_acc", "std_acc", "n_seeds", "n_failed"])
        for row in rows:
            writer.writerow([row["value"], row["mean_acc"], row["std_acc"], len(row["per_seed"]), len(row["failed"])])


def write_rows_json(rows, path):
    with open(path, "w") as fh:
        json.dump([{**row, "value": _json_value(row["value"])} for row in rows], fh, indent=2)


def _json_value(value):
    return list(value) if isinstance(value, tuple) else value
