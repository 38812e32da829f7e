"""Command-line surface: train, eval, predict, toy, ablate, sweep.

Defaults come from built-ins, then from an optional ``--config`` file of
flat ``key = value`` lines (keys are flag names with underscores), then
from explicit flags; later sources win.  Every command is deterministic
given ``--seed``: wall-clock timings appear only in the human-readable
tables, never in the ``*_metrics.json`` files, which are therefore
byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import autodiff as ad
from .data import (
    SeriesDataset,
    TOY_FUNCTIONS,
    gen_periodic,
    read_csv_values,
    save_csv,
    toy_function,
)
from .kan import KanStack, KnotGrid, TwoLayerMlp, param_count
from .model import (
    ModelConfig,
    TfkanModel,
    VARIANTS,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
    variant_flags,
)
from .training import (
    Adam,
    MinMaxScaler,
    TrainSettings,
    evaluate,
    metrics_payload,
    mse_loss,
    report_text,
    train,
    write_metrics,
)

__all__ = ["main", "main_entry", "run_toy_study", "run_ablation", "run_sweep"]

_OUT_ENV = "TFKAN_OUTDIR"


# ---------------------------------------------------------------------------
# config file and parser plumbing


def _load_config_file(path: str) -> dict[str, str]:
    if not os.path.isfile(path):
        raise ValueError(f"config file not found: {path}")
    values: dict[str, str] = {}
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {i} is not a 'key = value' pair")
            key, _, val = line.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _peek_config(argv: list[str]) -> dict[str, str]:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return _load_config_file(argv[i + 1])
        if token.startswith("--config="):
            return _load_config_file(token.split("=", 1)[1])
    return {}


def _csv_ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _csv_floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ratios(text: str) -> tuple[int, int, int]:
    parts = _csv_ints(text)
    if len(parts) != 3 or any(p < 0 for p in parts) or sum(parts) == 0:
        raise argparse.ArgumentTypeError(f"ratios must be three integers, got {text!r}")
    return tuple(parts)  # type: ignore[return-value]


class _Args:
    """Adds file-config defaults to add_argument calls."""

    def __init__(self, parser, cfg: dict[str, str]):
        self.parser = parser
        self.cfg = cfg

    def add(self, flag: str, **kwargs):
        dest = flag.lstrip("-").replace("-", "_")
        if dest in self.cfg and kwargs.get("action") not in ("store_true",):
            kwargs["default"] = self.cfg[dest]
        elif dest in self.cfg:
            kwargs["default"] = self.cfg[dest].lower() in ("1", "true", "yes")
        self.parser.add_argument(flag, **kwargs)


def _add_common(a: _Args):
    a.add("--out", default=os.environ.get(_OUT_ENV, "tfkan-out"),
          help="output directory (env TFKAN_OUTDIR overrides the default)")
    a.add("--seed", type=int, default=42)
    a.parser.add_argument("--config", default=None,
                          help="key = value defaults file; flags override it")


def _add_data(a: _Args, length_default: int = 800, ratios_default: str | None = "7,2,1"):
    a.add("--data", default=None, help="CSV path (header row, optional timestamp column)")
    a.add("--synthetic", action="store_true",
          help="use the seeded multi-periodic synthetic dataset")
    a.add("--channels", type=int, default=3)
    a.add("--length", type=int, default=length_default)
    a.add("--periods", default=None, help="comma-separated periods for every channel")
    a.add("--noise", type=float, default=0.05)
    a.add("--trend", type=float, default=0.5)
    a.add("--ratios", type=_ratios, default=ratios_default,
          help="train,val,test split ratio (e.g. 6,2,2)")


def _add_model(a: _Args, lookback: int, horizon: int, embed_dim: int, hidden: int):
    a.add("--lookback", type=int, default=lookback)
    a.add("--horizon", type=int, default=horizon)
    a.add("--embed-dim", type=int, default=embed_dim)
    a.add("--hidden", type=int, default=hidden)
    a.add("--grid-size", type=int, default=2)
    a.add("--spline-order", type=int, default=1)
    a.add("--variant", default="full", choices=sorted(VARIANTS))
    a.add("--time-layers", type=int, default=2, choices=(1, 2))
    a.add("--predictor-layers", type=int, default=2, choices=(1, 2))


def _add_training(a: _Args, epochs: int = 10):
    a.add("--lr", type=float, default=1e-3)
    a.add("--batch", type=int, default=32)
    a.add("--epochs", type=int, default=epochs)
    a.add("--patience", type=int, default=3)
    a.add("--denormalize", action="store_true",
          help="also report metrics on the original scale")


def build_parser(cfg: dict[str, str]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfkan",
        description="Train and study the dual-branch time/frequency KAN forecaster.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forecaster and write a checkpoint")
    a = _Args(p, cfg)
    _add_common(a)
    _add_data(a)
    _add_model(a, lookback=96, horizon=24, embed_dim=128, hidden=258)
    _add_training(a)
    a.add("--lr-grid", default=None,
          help="comma-separated learning rates to grid-search on validation loss")
    a.add("--batch-grid", default=None,
          help="comma-separated batch sizes to grid-search on validation loss")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's test split")
    a = _Args(p, cfg)
    _add_common(a)
    _add_data(a, ratios_default=None)
    a.add("--checkpoint", required=True)
    a.add("--horizon", type=int, default=None,
          help="must match the checkpoint when given")
    a.add("--lookback", type=int, default=None,
          help="must match the checkpoint when given")
    a.add("--batch", type=int, default=None)
    a.add("--denormalize", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="forecast the horizon after the last CSV rows")
    a = _Args(p, cfg)
    _add_common(a)
    a.add("--checkpoint", required=True)
    a.add("--data", required=True, help="CSV with at least lookback rows")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("toy", help="KAN vs parameter-matched MLP on closed-form targets")
    a = _Args(p, cfg)
    _add_common(a)
    a.add("--train-points", type=int, default=512)
    a.add("--test-points", type=int, default=256)
    a.add("--steps", type=int, default=2000)
    a.add("--lr", type=float, default=1e-3)
    a.add("--kan-hidden", type=int, default=64)
    a.add("--grid-size", type=int, default=2)
    a.add("--spline-order", type=int, default=1)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("ablate", help="train every architecture variant and tabulate")
    a = _Args(p, cfg)
    _add_common(a)
    _add_data(a, length_default=640)
    _add_model(a, lookback=48, horizon=12, embed_dim=16, hidden=32)
    _add_training(a, epochs=6)
    a.add("--variants", default="all",
          help="comma-separated variant names, or 'all'")
    a.add("--jobs", type=int, default=1, help="concurrent trainings")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="sensitivity to lookback length and embedding size")
    a = _Args(p, cfg)
    _add_common(a)
    _add_data(a, length_default=1600)
    _add_model(a, lookback=96, horizon=12, embed_dim=32, hidden=32)
    _add_training(a, epochs=3)
    a.add("--l-list", default="48,96,192,336")
    a.add("--d-list", default="32,64,128,256,512")
    p.set_defaults(func=cmd_sweep)

    return parser


# ---------------------------------------------------------------------------
# shared helpers


def _resolve_raw(args, parser=None) -> tuple[list[str], np.ndarray, dict]:
    if getattr(args, "data", None):
        names, values = read_csv_values(args.data)
        source = {"data": args.data}
    elif getattr(args, "synthetic", False):
        periods = _csv_floats(args.periods) if args.periods else None
        names, values = gen_periodic(
            args.channels, args.length, periods=periods,
            trend=args.trend, noise=args.noise, seed=args.seed,
        )
        source = {
            "synthetic": True, "channels": args.channels, "length": args.length,
            "periods": args.periods, "noise": args.noise, "trend": args.trend,
        }
    else:
        message = "one of --data or --synthetic is required"
        if parser is not None:
            parser.error(message)
        raise ValueError(message)
    return names, values, source


def _write_table(out_dir: str, stem: str, headers: list[str], rows: list[list]) -> None:
    def fmt(v):
        return repr(float(v)) if isinstance(v, float) else str(v)

    with open(os.path.join(out_dir, f"{stem}.csv"), "w") as fh:
        fh.write(",".join(headers) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")

    widths = [
        max(len(h), *(len(f"{v:.6f}" if isinstance(v, float) else str(v)) for v in col))
        for h, col in zip(headers, zip(*rows))
    ] if rows else [len(h) for h in headers]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in rows:
        cells = [
            (f"{v:.6f}" if isinstance(v, float) else str(v)).ljust(w)
            for v, w in zip(row, widths)
        ]
        lines.append("  ".join(cells))
    with open(os.path.join(out_dir, f"{stem}.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _model_config(args, n_channels: int, variant: str | None = None,
                  lookback: int | None = None, embed_dim: int | None = None) -> ModelConfig:
    return ModelConfig(
        n_channels=n_channels,
        lookback=args.lookback if lookback is None else lookback,
        horizon=args.horizon,
        embed_dim=args.embed_dim if embed_dim is None else embed_dim,
        hidden=args.hidden,
        grid_size=args.grid_size,
        spline_order=args.spline_order,
        time_layers=args.time_layers,
        predictor_layers=args.predictor_layers,
        flags=variant_flags(variant or args.variant),
    )


def _resolved(args, skip=("func", "config")) -> dict:
    resolved = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or callable(value):
            continue
        resolved[key] = list(value) if isinstance(value, tuple) else value
    return resolved


# ---------------------------------------------------------------------------
# train / eval / predict


def cmd_train(args, parser=None) -> int:
    names, raw, source = _resolve_raw(args, parser)
    dataset = SeriesDataset.from_raw(raw, names, args.lookback, args.horizon, args.ratios)
    config = _model_config(args, dataset.n_channels)

    lr_grid = _csv_floats(args.lr_grid) if args.lr_grid else [args.lr]
    batch_grid = _csv_ints(args.batch_grid) if args.batch_grid else [args.batch]
    trials = []
    for lr in lr_grid:
        for batch in batch_grid:
            settings = TrainSettings(lr=lr, batch_size=batch, epochs=args.epochs,
                                     patience=args.patience, seed=args.seed)
            model = TfkanModel(config, seed=args.seed)
            report = train(model, dataset, settings, denormalize=args.denormalize)
            trials.append((report.best_val_loss, lr, batch, model, report))
    best_val, lr, batch, model, report = min(trials, key=lambda t: t[0])

    os.makedirs(args.out, exist_ok=True)
    meta = {"ratios": ",".join(str(r) for r in args.ratios), "batch": str(batch),
            "lr": repr(lr)}
    save_checkpoint(os.path.join(args.out, "checkpoint"), model,
                    extras=dataset.scaler.state(), meta=meta)

    resolved = _resolved(args)
    resolved.update({"lr": lr, "batch": batch, "source": source})
    payload = metrics_payload(report, resolved)
    if len(trials) > 1:
        payload["grid"] = [
            {"lr": t_lr, "batch": t_batch, "best_val_loss": t_val}
            for t_val, t_lr, t_batch, _, _ in trials
        ]
    write_metrics(os.path.join(args.out, "metrics.json"), payload)
    with open(os.path.join(args.out, "report.txt"), "w") as fh:
        fh.write(report_text(report, resolved))
    print(f"trained {args.variant}: best_val={best_val:.6f} "
          f"test_mae={report.test_mae:.6f} test_rmse={report.test_rmse:.6f}")
    print(f"wrote {args.out}/checkpoint, metrics.json, report.txt")
    return 0


def cmd_eval(args, parser=None) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    for field in ("lookback", "horizon"):
        given = getattr(args, field)
        if given is not None and given != getattr(ckpt.config, field):
            raise ValueError(
                f"--{field} {given} does not match checkpoint "
                f"{field} {getattr(ckpt.config, field)}"
            )
    model = model_from_checkpoint(ckpt)
    names, raw, source = _resolve_raw(args, parser)
    if raw.shape[1] != ckpt.config.n_channels:
        raise ValueError(
            f"checkpoint expects {ckpt.config.n_channels} channels, "
            f"dataset has {raw.shape[1]}"
        )
    ratios = args.ratios
    if ratios is None:
        ratios = tuple(_csv_ints(ckpt.meta.get("ratios", "7,2,1")))
    scaler = MinMaxScaler.from_state(ckpt.extras)
    dataset = SeriesDataset.with_scaler(
        raw, names, scaler, ckpt.config.lookback, ckpt.config.horizon, ratios
    )
    batch = args.batch or int(ckpt.meta.get("batch", 32))
    metrics = evaluate(model, dataset, "test", batch, denormalize=args.denormalize)

    os.makedirs(args.out, exist_ok=True)
    resolved = _resolved(args)
    resolved["source"] = source
    payload = {"config": resolved, **metrics}
    write_metrics(os.path.join(args.out, "eval_metrics.json"), payload)
    print(" ".join(f"{k}={v:.6f}" for k, v in sorted(metrics.items())))
    print(f"wrote {args.out}/eval_metrics.json")
    return 0


def cmd_predict(args, parser=None) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    names, raw = read_csv_values(args.data)
    lookback = ckpt.config.lookback
    if raw.shape[0] < lookback:
        raise ValueError(
            f"{args.data} has {raw.shape[0]} rows; need at least lookback = {lookback}"
        )
    if raw.shape[1] != ckpt.config.n_channels:
        raise ValueError(
            f"checkpoint expects {ckpt.config.n_channels} channels, "
            f"CSV has {raw.shape[1]}"
        )
    scaler = MinMaxScaler.from_state(ckpt.extras)
    window = scaler.transform(raw)[-lookback:].T[None, :, :]
    forecast = model.forward(window).value[0]  # [N, tau]
    denormalized = scaler.inverse_channels(forecast)

    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "forecast.csv")
    save_csv(out_path, names, denormalized.T)
    print(f"wrote {out_path} ({ckpt.config.horizon} rows x {len(names)} columns)")
    return 0


# ---------------------------------------------------------------------------
# toy study


def _fit_regressor(net, x: np.ndarray, y: np.ndarray, steps: int, lr: float) -> None:
    inputs = ad.constant(x[:, None])
    target = y[:, None]
    optimizer = Adam(net.parameters(), lr=lr)
    for _ in range(steps):
        loss = mse_loss(net(inputs), target)
        optimizer.step(ad.backward(loss))


def _regressor_mse(net, x: np.ndarray, y: np.ndarray) -> float:
    pred = net(ad.constant(x[:, None])).value[:, 0]
    return float(((pred - y) ** 2).mean())


def run_toy_study(train_points: int = 512, test_points: int = 256, steps: int = 2000,
                  lr: float = 1e-3, kan_hidden: int = 64, grid_size: int = 2,
                  spline_order: int = 1, seed: int = 42):
    """Fit each toy target with a KAN and a parameter-matched two-layer MLP.

    Training points are equispaced on [0, 1]; held-out points sit halfway
    between every other pair of training points.  Returns (rows, curves)
    where rows are [function, kan_mse, mlp_mse, kan_params, mlp_params] and
    curves map function id -> (x, truth, kan, mlp) columns.
    """
    grid = KnotGrid.uniform(grid_size, spline_order)
    x_train = np.linspace(0.0, 1.0, train_points)
    step = x_train[1] - x_train[0]
    x_test = (x_train[::2] + step / 2.0)[:test_points]
    x_dense = np.linspace(0.0, 1.0, 512)

    rows, curves = [], {}
    for i, fid in enumerate(TOY_FUNCTIONS):
        y_train = toy_function(fid, x_train)
        y_test = toy_function(fid, x_test)
        rng = np.random.default_rng(seed + i)
        kan = KanStack([1, kan_hidden, 1], grid, rng, "toy_kan")
        kan_params = param_count(kan)
        mlp_hidden = max(1, round((kan_params - 1) / 3))
        mlp = TwoLayerMlp(1, mlp_hidden, 1, rng, "toy_mlp")
        _fit_regressor(kan, x_train, y_train, steps, lr)
        _fit_regressor(mlp, x_train, y_train, steps, lr)
        kan_mse = _regressor_mse(kan, x_test, y_test)
        mlp_mse = _regressor_mse(mlp, x_test, y_test)
        rows.append([fid, kan_mse, mlp_mse, kan_params, param_count(mlp)])
        curves[fid] = np.column_stack([
            x_dense,
            toy_function(fid, x_dense),
            kan(ad.constant(x_dense[:, None])).value[:, 0],
            mlp(ad.constant(x_dense[:, None])).value[:, 0],
        ])
    return rows, curves


def cmd_toy(args, parser=None) -> int:
    rows, curves = run_toy_study(
        train_points=args.train_points, test_points=args.test_points,
        steps=args.steps, lr=args.lr, kan_hidden=args.kan_hidden,
        grid_size=args.grid_size, spline_order=args.spline_order, seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    _write_table(args.out, "toy_results",
                 ["function", "kan_mse", "mlp_mse", "kan_params", "mlp_params"], rows)
    for fid, table in curves.items():
        save_csv(os.path.join(args.out, f"toy_curve_{fid}.csv"),
                 ["x", "truth", "kan", "mlp"], table)
    wins = sum(1 for row in rows if row[1] < row[2])
    for row in rows:
        print(f"{row[0]}: kan_mse={row[1]:.2e} mlp_mse={row[2]:.2e}")
    print(f"kan wins {wins}/{len(rows)}; wrote {args.out}/toy_results.csv and curves")
    return 0


# ---------------------------------------------------------------------------
# ablation and sensitivity


def _train_once(raw, names, args, variant: str, lookback: int | None = None,
                embed_dim: int | None = None):
    """One self-contained training run; safe to execute concurrently."""
    lb = args.lookback if lookback is None else lookback
    dataset = SeriesDataset.from_raw(raw, names, lb, args.horizon, args.ratios)
    config = _model_config(args, dataset.n_channels, variant=variant,
                           lookback=lookback, embed_dim=embed_dim)
    settings = TrainSettings(lr=args.lr, batch_size=args.batch, epochs=args.epochs,
                             patience=args.patience, seed=args.seed)
    model = TfkanModel(config, seed=args.seed)
    report = train(model, dataset, settings)
    seconds = float(np.mean([e.seconds for e in report.epochs]))
    return report, param_count(model), seconds


def run_ablation(raw, names, args, variants: list[str], jobs: int = 1):
    """Train every requested variant with shared data, seed, and settings."""
    def one(variant):
        report, params, seconds = _train_once(raw, names, args, variant)
        return [variant, report.test_mae, report.test_rmse, params, seconds]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, variants))
    else:
        rows = [one(v) for v in variants]
    return rows


def cmd_ablate(args, parser=None) -> int:
    if not (args.data or args.synthetic):
        args.synthetic = True  # synthetic by default
    names, raw, source = _resolve_raw(args, parser)
    if args.variants.strip().lower() == "all":
        variants = list(VARIANTS)
    else:
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        for v in variants:
            variant_flags(v)
    rows = run_ablation(raw, names, args, variants, jobs=args.jobs)

    os.makedirs(args.out, exist_ok=True)
    _write_table(args.out, "ablation",
                 ["variant", "mae", "rmse", "param_count", "epoch_seconds"], rows)
    payload = {
        "config": {**_resolved(args), "source": source},
        "rows": [
            {"variant": v, "mae": m, "rmse": r, "param_count": p}
            for v, m, r, p, _ in rows
        ],
    }
    write_metrics(os.path.join(args.out, "ablation_metrics.json"), payload)
    by_name = {row[0]: row for row in rows}
    for row in rows:
        print(f"{row[0]:>18}: mae={row[1]:.6f} rmse={row[2]:.6f} params={row[3]}")
    if all(v in by_name for v in ("full", "only_time", "only_freq")):
        full = by_name["full"][1]
        if full <= by_name["only_time"][1] and full <= by_name["only_freq"][1]:
            print("dual-branch check: full <= only_time and full <= only_freq")
        else:
            print("warning: full model did not dominate both single branches")
    print(f"wrote {args.out}/ablation.csv, ablation.txt, ablation_metrics.json")
    return 0


def run_sweep(raw, names, args, l_list: list[int], d_list: list[int]):
    """Rows of (axis, value, mae, rmse, epoch_seconds); L sweeps hold d fixed
    at the configured value and vice versa."""
    rows = []
    for lb in l_list:
        report, _, seconds = _train_once(raw, names, args, args.variant, lookback=lb)
        rows.append(["L", lb, report.test_mae, report.test_rmse, seconds])
    for d in d_list:
        report, _, seconds = _train_once(raw, names, args, args.variant, embed_dim=d)
        rows.append(["d", d, report.test_mae, report.test_rmse, seconds])
    return rows


def cmd_sweep(args, parser=None) -> int:
    if not (args.data or args.synthetic):
        args.synthetic = True
    names, raw, source = _resolve_raw(args, parser)
    l_list = _csv_ints(args.l_list)
    d_list = _csv_ints(args.d_list)
    rows = run_sweep(raw, names, args, l_list, d_list)

    os.makedirs(args.out, exist_ok=True)
    _write_table(args.out, "sweep",
                 ["axis", "value", "mae", "rmse", "epoch_seconds"], rows)
    payload = {
        "config": {**_resolved(args), "source": source},
        "rows": [
            {"axis": a, "value": v, "mae": m, "rmse": r}
            for a, v, m, r, _ in rows
        ],
    }
    write_metrics(os.path.join(args.out, "sweep_metrics.json"), payload)
    l_rows = [r for r in rows if r[0] == "L"]
    seconds = [r[4] for r in sorted(l_rows, key=lambda r: r[1])]
    if any(b < a * 0.9 for a, b in zip(seconds, seconds[1:])):
        print("warning: epoch time not monotone in lookback length (timing jitter?)")
    for row in rows:
        print(f"{row[0]}={row[1]:>4}: mae={row[2]:.6f} rmse={row[3]:.6f} "
              f"epoch={row[4]:.2f}s")
    print(f"wrote {args.out}/sweep.csv, sweep.txt, sweep_metrics.json")
    return 0


# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        file_cfg = _peek_config(argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        parser = build_parser(file_cfg)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
