"""Command-line interface.

Subcommands: train, eval, coverage, flops, ablate, bench, info. All are
deterministic given --seed. With --json, the primary result is printed to
stdout as a single JSON object. Runtime failures exit 1 with a structured
message on stderr; usage errors exit 2.
"""
import argparse
import json
import sys

from .ablation import AblationSpec, run_ablation, write_rows_csv, write_rows_json
from .bench import bench_prng_backends, bench_reconstruct
from .coverage import coverage_report, write_point_cloud_csv
from .data import make_synthetic, mnist_from_dir
from .errors import ConfigError, McncError
from .fileformat import file_size, load_compressed, save_compressed
from .generator import GeneratorConfig, build_generator
from .reparam import SHAPE_PRESETS, compression_report, paper_style_gflops, reconstruction_flops
from .train import DEFAULT_LR_SEARCH, McncSetting, MlpSpec, TrainConfig, evaluate, train


def _parse_model(text):
    kind, _, rest = text.partition(":")
    if kind != "mlp" or not rest:
        raise ConfigError(f"unsupported model spec {text!r}; expected e.g. mlp:784,256,256,10")
    return MlpSpec(tuple(int(s) for s in rest.split(",")))


def _load_data(name, seed):
    """(train, test) datasets from 'synthetic' or an MNIST directory path."""
    if name == "synthetic":
        return (
            make_synthetic(2000, 16, 4, seed=seed, split="train"),
            make_synthetic(500, 16, 4, seed=seed + 1, split="test"),
        )
    return mnist_from_dir(name or None, "train"), mnist_from_dir(name or None, "test")


def _parse_gen_spec(text):
    """'k:h1xh2:d' -> GeneratorConfig with the given architecture."""
    try:
        k, hidden, d = text.split(":")
        widths = tuple(int(w) for w in hidden.split("x"))
        return GeneratorConfig(seed=0, k=int(k), d=int(d), hidden_widths=widths)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad generator spec {text!r}; expected k:h1xh2:d, e.g. 5:32x32:5000") from err


def _parse_shapes(text):
    """'ROWSxCOLS:COUNT,...' or a preset name -> (shapes, preset_n_bases)."""
    if text in SHAPE_PRESETS:
        return SHAPE_PRESETS[text]
    shapes = []
    for part in text.split(","):
        try:
            dims, _, count = part.partition(":")
            rows, cols = dims.split("x")
            shapes.append((int(rows), int(cols), int(count) if count else 1))
        except ValueError as err:
            raise ConfigError(f"bad shape entry {part!r}; expected ROWSxCOLS[:COUNT]") from err
    return tuple(shapes), None


def _parse_axis_values(axis, text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if axis == "activation":
        return parts
    if axis == "input_frequency":
        return [float(p) for p in parts]
    if axis in ("hidden_size", "generator_width", "generator_depth"):
        return [int(p) for p in parts]
    if axis == "init":
        return [(dist, float(scale)) for dist, _, scale in (p.partition(":") for p in parts)]
    if axis == "fixed_rate_kd":
        return [tuple(int(x) for x in p.split("/")) for p in parts]
    if axis == "random_vs_trained":
        return [p == "trained" for p in parts]
    raise ConfigError(f"unknown ablation axis {axis!r}")


def _emit(args, payload, human):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


# -- subcommand handlers --------------------------------------------------


def _cmd_train(args):
    spec = _parse_model(args.model)
    train_data, test_data = _load_data(args.data, args.seed)
    mcnc = None
    if args.mcnc_k is not None or args.mcnc_d is not None:
        if args.mcnc_k is None or args.mcnc_d is None:
            raise ConfigError("--mcnc-k and --mcnc-d must be given together")
        mcnc = McncSetting(
            k=args.mcnc_k, d=args.mcnc_d, activation=args.activation, input_frequency=args.frequency
        )
    lrs = [float(x) for x in args.lr_search.split(",")] if args.lr_search else [args.lr]
    best = None
    for lr in lrs:
        cfg = TrainConfig(lr=lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
        result = train(spec, mcnc, train_data, cfg, test_data=test_data)
        if best is None or result.test_accuracy > best.test_accuracy:
            best = result
    payload = {"test_accuracy": best.test_accuracy, "lr": best.lr, "final_loss": best.loss_curve[-1]}
    if args.out:
        if mcnc is None:
            raise ConfigError("--out requires MCNC compression (uncompressed baselines are not .mcnc files)")
        payload["bytes_written"] = save_compressed(best.model, args.out)
        payload["path"] = args.out
    _emit(args, payload, f"test accuracy {best.test_accuracy:.4f} (lr {best.lr}, final loss {best.loss_curve[-1]:.4f})")
    return 0


def _cmd_eval(args):
    cm = load_compressed(args.model_file)
    _, test_data = _load_data(args.data, seed=0)
    acc = evaluate(cm, test_data)
    _emit(args, {"test_accuracy": acc}, f"test accuracy {acc:.4f}")
    return 0


def _cmd_coverage(args):
    gen = build_generator(
        GeneratorConfig(
            seed=args.seed,
            k=args.k,
            d=args.d,
            hidden_widths=tuple(int(w) for w in args.hidden.split(",")),
            activation=args.activation,
        )
    )
    report = coverage_report(
        gen, args.L, n=args.samples, n_projections=args.projections, seed=args.seed, tau=args.tau
    )
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(report.to_json())
    if args.cloud_csv:
        write_point_cloud_csv(gen, args.L, args.samples, args.seed, args.cloud_csv)
    _emit(
        args,
        json.loads(report.to_json()),
        f"swd {report.swd:.6f}  uniformity {report.uniformity_score:.6f} (tau {report.tau})",
    )
    return 0


def _cmd_flops(args):
    gen_config = _parse_gen_spec(args.gen_spec)
    shapes, preset_bases = _parse_shapes(args.shapes)
    n_bases = args.n_bases or preset_bases
    exact = reconstruction_flops(gen_config, shapes, args.method, n_bases)
    gflops = paper_style_gflops(gen_config, shapes, args.method, n_bases)
    _emit(
        args,
        {"method": args.method, "flops": exact, "gflops": gflops},
        f"{args.method}: {exact} FLOPs ({gflops:.2f} GFLOPs)",
    )
    return 0


def _cmd_ablate(args):
    train_data, test_data = _load_data(args.data, args.seed)
    base_cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
        lr_search=tuple(float(x) for x in args.lr_search.split(",")),
    )
    spec = AblationSpec(
        axis=args.axis,
        values=_parse_axis_values(args.axis, args.values),
        base_train=base_cfg,
        model_spec=_parse_model(args.model),
        repeats=args.repeats,
    )
    rows = run_ablation(spec, train_data, test_data)
    if args.out_csv:
        write_rows_csv(rows, args.out_csv)
    if args.out_json:
        write_rows_json(rows, args.out_json)
    human = "\n".join(
        f"{row['value']}: mean {row['mean_acc']:.4f} std {row['std_acc']:.4f} ({len(row['failed'])} failed)"
        if row["mean_acc"] is not None
        else f"{row['value']}: all cells failed"
        for row in rows
    )
    _emit(args, [{**r, "value": str(r["value"])} for r in rows], human)
    return 0


def _cmd_bench(args):
    if args.prng_backends:
        results = bench_prng_backends()
        human = "\n".join(
            f"{k}: {v['draws_per_sec']:.3e} draws/s" if isinstance(v, dict) else f"speedup: {v:.1f}x"
            for k, v in results.items()
        )
        _emit(args, results, human)
        return 0
    cm = load_compressed(args.model_file)
    stats = bench_reconstruct(cm, workers=args.workers, repeats=args.repeats)
    _emit(
        args,
        stats,
        f"{stats['wall_ms']:.2f} ms/reconstruction, {stats['chunks_per_sec']:.1f} chunks/s, "
        f"{stats['flops_per_sec'] / 1e9:.2f} GFLOP/s ({stats['flops']} FLOPs analytic)",
    )
    return 0


def _cmd_info(args):
    cm = load_compressed(args.model_file)
    report = compression_report(cm, stored_bytes=file_size(args.model_file))
    _emit(
        args,
        report,
        f"trainable {report['trainable_params']} of {report['compressible_params']} compressible "
        f"({report['percentage']:.3f}%), {report['stored_bytes']} bytes on disk",
    )
    return 0


# -- parser ---------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="mcnc", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train an (optionally compressed) classifier")
    p.add_argument("--model", default="mlp:784,256,256,10")
    p.add_argument("--data", default="", help="'synthetic' or an MNIST directory (default: $MCNC_DATA_DIR)")
    p.add_argument("--mcnc-k", type=int)
    p.add_argument("--mcnc-d", type=int)
    p.add_argument("--activation", default="sine")
    p.add_argument("--frequency", type=float, default=4.5)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--lr-search", help="comma list; overrides --lr")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the compressed model here")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a saved compressed model")
    p.add_argument("--model-file", required=True)
    p.add_argument("--data", default="")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("coverage", parents=[common], help="sphere-coverage report for a generator")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--L", type=float, required=True, help="input bound: alphas ~ U([-L, L]^k)")
    p.add_argument("--activation", default="sine")
    p.add_argument("--hidden", default="1024,1024")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--projections", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--out-json")
    p.add_argument("--cloud-csv", help="d=3 point cloud for external plotting")
    p.set_defaults(handler=_cmd_coverage)

    p = sub.add_parser("flops", parents=[common], help="exact reconstruction-FLOPs accounting")
    p.add_argument("--gen-spec", default="5:32x32:5000", help="k:h1xh2:d")
    p.add_argument("--shapes", required=True, help="ROWSxCOLS:COUNT,... or preset llama7b|llama13b")
    p.add_argument("--method", choices=("mcnc", "nola"), default="mcnc")
    p.add_argument("--n-bases", type=int, help="NOLA basis count (presets supply a default)")
    p.set_defaults(handler=_cmd_flops)

    p = sub.add_parser("ablate", parents=[common], help="sweep one ablation axis")
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--model", default="mlp:784,256,256,10")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--data", default="")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr-search", default=",".join(str(x) for x in DEFAULT_LR_SEARCH))
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(handler=_cmd_ablate)

    p = sub.add_parser("bench", parents=[common], help="reconstruction throughput (or PRNG backends)")
    p.add_argument("--model-file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--prng-backends", action="store_true")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("info", parents=[common], help="compression report for a saved model")
    p.add_argument("--model-file", required=True)
    p.set_defaults(handler=_cmd_info)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and not args.prng_backends and not args.model_file:
        parser.error("bench requires --model-file (or --prng-backends)")
    try:
        return args.handler(args)
    except McncError as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return 1
    except OSError as err:
        print(json.dumps({"error": "OSError", "message": str(err)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
