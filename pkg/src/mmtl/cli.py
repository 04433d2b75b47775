"""MMTL CLI: data inspection, training, evaluation, benchmarking, inference, ablation."""
from __future__ import annotations

import csv
import json
import sys
import time
import uuid
from collections import deque
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

import numpy as np
import typer
from rich.markup import escape
from rich.table import Table

from mmtl.log import console, get_logger, set_run_id, setup_logging

log = get_logger("cli")

# click's base error, from whichever click build typer is using
_CLICK_ERROR = next(c for c in typer.BadParameter.__mro__ if c.__name__ == "ClickException")

app = typer.Typer(
    name="mmtl",
    help="MMTL-Net – activity recognition and resistance estimation from wearable sensor windows.",
    no_args_is_help=True,
)


@contextmanager
def _guard() -> Iterator[None]:
    """Map library errors to exit codes with a one-line diagnostic on stderr."""
    from mmtl.errors import MMTLError
    try:
        yield
    except MMTLError as e:
        console.print(f"[error]{type(e).__name__}: {escape(str(e))}[/error]")
        raise typer.Exit(e.exit_code)


def _emit(data: Any) -> None:
    typer.echo(json.dumps(data, indent=2, sort_keys=True))


def _setup(ctx: typer.Context):
    """Load the run config named by the global flags and configure logging."""
    from mmtl.config import load_config
    opts = ctx.obj or {}
    cfg = load_config(opts.get("config"), seed=opts.get("seed"))
    setup_logging(cfg.log_dir, verbose=opts.get("verbose", False), quiet=opts.get("quiet", False))
    return cfg


def _quiet(ctx: typer.Context) -> bool:
    return bool((ctx.obj or {}).get("quiet"))


def _dataset_for(ctx: typer.Context, cfg, ckpt):
    """Dataset config: the --config file when given, else the one the checkpoint was trained on."""
    from mmtl.config import dataset_config
    from mmtl.data.pipeline import DatasetConfig
    stored = ckpt.extras.get("dataset_config")
    if (ctx.obj or {}).get("config") or not stored:
        return dataset_config(cfg)
    return DatasetConfig.from_dict(stored)


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[str] = typer.Option(None, "--config", "-c", help="Run config (.json or .yaml)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override dataset and training seeds."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only warnings and errors on stderr."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    ctx.obj = {"config": config, "seed": seed, "quiet": quiet, "verbose": verbose}


# ── mmtl data-inspect ────────────────────────────────────────────────────────
@app.command("data-inspect")
def data_inspect(
    ctx: typer.Context,
    dataset: Optional[str] = typer.Option(None, "--dataset", "-d", help="uci-har|wisdm|mhealth|synthetic."),
    root: Optional[str] = typer.Option(None, "--root", help="Dataset directory or raw file."),
) -> None:
    """Count windows, classes and subjects of a dataset."""
    with _guard():
        from dataclasses import replace

        from mmtl.config import dataset_config
        from mmtl.data.pipeline import dataset_summary
        cfg = _setup(ctx)
        ds = dataset_config(cfg)
        if dataset:
            ds = replace(ds, name=dataset, window=None, overlap=None)
        if root is not None:
            ds = replace(ds, root=root)
        summary = dataset_summary(ds)

    if not _quiet(ctx):
        table = Table(title=f"Dataset: {summary['dataset']}", show_header=True, header_style="bold cyan")
        table.add_column("Class", style="bold")
        table.add_column("Windows", justify="right")
        for name, count in summary["class_histogram"].items():
            table.add_row(name, str(count))
        table.add_row("[dim]total[/dim]", str(summary["windows"]))
        console.print(table)
        console.print(f"[dim]{len(summary['subjects'])} subjects, {summary['sample_rate_hz']} Hz[/dim]")
    _emit(summary)


# ── mmtl train ───────────────────────────────────────────────────────────────
@app.command()
def train(
    ctx: typer.Context,
    out: str = typer.Option("mmtl.ckpt", "--out", "-o", help="Checkpoint to write."),
    resume: Optional[str] = typer.Option(None, "--resume", help="Continue a checkpoint's run."),
    finetune: Optional[str] = typer.Option(None, "--finetune", help="Fine-tune a checkpoint on this dataset."),
) -> None:
    """Train a model and write a checkpoint plus a JSON-lines epoch log."""
    if resume and finetune:
        console.print("[error]--resume and --finetune are exclusive[/error]")
        raise typer.Exit(1)
    with _guard():
        from mmtl.config import dataset_config, model_config, train_config
        from mmtl.data.pipeline import prepare_dataset
        from mmtl.errors import TrainingDiverged
        from mmtl.training import TrainJournal, fine_tune, load_checkpoint
        from mmtl.training import train as run_training

        cfg = _setup(ctx)
        ds = dataset_config(cfg)
        tc = train_config(cfg)
        data = prepare_dataset(ds)
        out_path = Path(out)
        extras = {
            "dataset": ds.name,
            "dataset_config": ds.to_dict(),
            "class_names": list(data.class_names),
            "normalizer": data.normalizer.to_dict(),
            "window": ds.window_len,
            "overlap": ds.overlap_fraction,
        }
        journal = TrainJournal(out_path.with_suffix(".jsonl"), run_id=uuid.uuid4().hex[:12],
                               meta={"dataset": ds.name, "resume": resume, "finetune": finetune})
        set_run_id(journal.run_id)
        try:
            if resume:
                src = load_checkpoint(resume)
                remaining = max(0, tc.epochs - src.history.last_epoch)
                kept = {k: src.extras[k] for k in ("best_val_loss", "wait") if k in src.extras}
                ckpt, history = run_training(src.model_config, tc, data.train, data.val,
                                             params=src.params, optimizer=src.optimizer,
                                             history=src.history, epochs=remaining,
                                             journal=journal, extras={**extras, **kept})
            elif finetune:
                ckpt, history = fine_tune(load_checkpoint(finetune), data.train, data.val, tc,
                                          num_classes=data.info.num_classes, journal=journal,
                                          extras=extras)
            else:
                ckpt, history = run_training(model_config(cfg, ds), tc, data.train, data.val,
                                             journal=journal, extras=extras)
        except TrainingDiverged as e:
            if e.last_good is not None:
                saved = e.last_good.save(out_path.with_name(f"{out_path.stem}.last_good{out_path.suffix}"))
                console.print(f"[warn]last good checkpoint kept at {saved}[/warn]")
            journal.close("diverged")
            raise
        ckpt.save(out_path)
        journal.close("done")

    best = history.best
    _emit({
        "checkpoint": str(out_path),
        "journal": str(out_path.with_suffix(".jsonl")),
        "epochs": history.last_epoch,
        "best_epoch": best.epoch if best else None,
        "best_val_loss": best.val_loss if best else None,
    })


# ── mmtl eval ────────────────────────────────────────────────────────────────
@app.command("eval")
def eval_cmd(
    ctx: typer.Context,
    checkpoint: str = typer.Option(..., "--checkpoint", help="Checkpoint to evaluate."),
    split: str = typer.Option("test", "--split", help="train|val|test."),
) -> None:
    """Score a checkpoint on a dataset split; prints the metrics report as JSON."""
    with _guard():
        from mmtl.data.pipeline import prepare_dataset
        from mmtl.metrics import evaluate
        from mmtl.training import load_checkpoint

        cfg = _setup(ctx)
        ckpt = load_checkpoint(checkpoint)
        ds = _dataset_for(ctx, cfg, ckpt)
        data = prepare_dataset(ds)
        report = evaluate(ckpt.params, ckpt.model_config, data.split(split),
                          class_names=data.class_names, tau=cfg.metrics.tau,
                          fer_floor=cfg.metrics.fer_floor)
    _emit({"dataset": ds.name, "split": split, **report.to_dict()})


# ── mmtl bench ───────────────────────────────────────────────────────────────
@app.command()
def bench(
    ctx: typer.Context,
    checkpoint: str = typer.Option(..., "--checkpoint", help="Checkpoint to benchmark."),
    runs: Optional[int] = typer.Option(None, "--runs", help="Timed iterations (>= 100)."),
    warmup: Optional[int] = typer.Option(None, "--warmup", help="Untimed iterations (>= 10)."),
    split: str = typer.Option("test", "--split", help="Windows to stream."),
) -> None:
    """Measure batch-1 latency and throughput; prints the bench report as JSON."""
    with _guard():
        from mmtl.data.pipeline import prepare_dataset
        from mmtl.metrics import evaluate
        from mmtl.metrics.bench import bench as run_bench
        from mmtl.metrics.bench import check_bench_args
        from mmtl.training import load_checkpoint

        cfg = _setup(ctx)
        runs = cfg.bench.runs if runs is None else runs
        warmup = cfg.bench.warmup if warmup is None else warmup
        check_bench_args(runs, warmup)
        ckpt = load_checkpoint(checkpoint)
        data = prepare_dataset(_dataset_for(ctx, cfg, ckpt))
        windows = data.split(split)
        rpa = None
        if ckpt.model_config.has_resistance_head:
            rpa = evaluate(ckpt.params, ckpt.model_config, windows, class_names=data.class_names,
                           tau=cfg.metrics.tau, fer_floor=cfg.metrics.fer_floor).rpa_percent
        report = run_bench(ckpt.params, ckpt.model_config, windows, runs=runs, warmup=warmup,
                           normalizer=data.normalizer, rpa_percent=rpa)
    _emit(report.to_dict())


# ── mmtl infer ───────────────────────────────────────────────────────────────
def _csv_rows(lines: Iterable[str], channels: int) -> Iterator[np.ndarray]:
    """Yield one [channels] sample per CSV row (header: timestamp + one column per channel)."""
    from mmtl.errors import DataError
    reader = csv.reader(lines)
    header = next(reader, None)
    if not header:
        raise DataError("input has no header row")
    if len(header) - 1 != channels:
        raise DataError(f"input has {len(header) - 1} channel columns, checkpoint expects {channels}")
    last_ts = None
    for row in reader:
        if not row:
            continue
        line = reader.line_num
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        try:
            values = [float(v) for v in row]
        except ValueError:
            raise DataError(f"line {line}: non-numeric field in {row!r}") from None
        if last_ts is not None and values[0] <= last_ts:
            log.warning("line %d: timestamp %s does not increase", line, row[0])
        last_ts = values[0]
        yield np.asarray(values[1:], dtype=np.float32)


def _predictions(samples: Iterable[np.ndarray], ckpt, stride: int) -> Iterator[dict[str, Any]]:
    """Ring buffer over incoming samples; one prediction per full window, every `stride` samples."""
    from mmtl.data.preprocess import apply_normalizer, denoise_array
    from mmtl.data.types import NormalizerStats
    from mmtl.model import predict

    config = ckpt.model_config
    window_len = config.input_length
    stats = (NormalizerStats.from_dict(ckpt.extras["normalizer"]) if "normalizer" in ckpt.extras
             else NormalizerStats(np.zeros(config.input_channels), np.ones(config.input_channels)))
    names = ckpt.extras.get("class_names")
    buf: deque[np.ndarray] = deque(maxlen=window_len)
    seen = index = 0
    for sample in samples:
        buf.append(sample)
        seen += 1
        if seen < window_len or (seen - window_len) % stride:
            continue
        x = apply_normalizer(denoise_array(np.stack(buf, axis=1)), stats)
        t0 = time.perf_counter()
        pred = predict(x, params=ckpt.params, config=config)
        rtr_ms = (time.perf_counter() - t0) * 1000.0
        label = pred.activity
        yield {
            "window_index": index,
            "activity_label": (names[label] if names and label is not None else label),
            "activity_probs": None if pred.activity_probs is None else [float(p) for p in pred.activity_probs],
            "resistance": pred.reported_resistance,
            "rtr_ms": round(rtr_ms, 3),
        }
        index += 1


@app.command()
def infer(
    ctx: typer.Context,
    checkpoint: str = typer.Option(..., "--checkpoint", help="Checkpoint to run."),
    input_path: Optional[str] = typer.Option(None, "--input", "-i", help="CSV file to window."),
    stream: bool = typer.Option(False, "--stream", help="Read CSV rows from stdin as they arrive."),
) -> None:
    """Emit one JSON line per window: label, probabilities, resistance, forward time."""
    if bool(input_path) == stream:
        console.print("[error]give exactly one of --input or --stream[/error]")
        raise typer.Exit(1)
    with _guard():
        from mmtl.data.preprocess import segment_stride
        from mmtl.errors import DataError
        from mmtl.training import load_checkpoint

        _setup(ctx)
        ckpt = load_checkpoint(checkpoint)
        stride = segment_stride(ckpt.model_config.input_length, float(ckpt.extras.get("overlap", 0.5)))
        if stream:
            lines: Iterable[str] = sys.stdin
        else:
            try:
                lines = Path(input_path).read_text().splitlines()
            except OSError as e:
                raise DataError(f"cannot read {input_path}: {e}") from e
        for record in _predictions(_csv_rows(lines, ckpt.model_config.input_channels), ckpt, stride):
            typer.echo(json.dumps(record))


# ── mmtl ablate ──────────────────────────────────────────────────────────────
@app.command()
def ablate(
    ctx: typer.Context,
    out_dir: str = typer.Option("ablation", "--out-dir", help="Directory for ablation.json and .csv."),
) -> None:
    """Train the full model and four ablations under one budget; report them side by side."""
    with _guard():
        from mmtl.config import dataset_config, model_config, train_config
        from mmtl.data.pipeline import prepare_dataset
        from mmtl.metrics import ablation_suite

        cfg = _setup(ctx)
        ds = dataset_config(cfg)
        data = prepare_dataset(ds)
        table = ablation_suite(model_config(cfg, ds), data.train, data.val, data.test,
                               train_config(cfg), class_names=data.class_names,
                               tau=cfg.metrics.tau, fer_floor=cfg.metrics.fer_floor)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = table.to_dict()
        (out / "ablation.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
        table.to_csv(out / "ablation.csv")

    if not _quiet(ctx):
        view = Table(title="Ablation", show_header=True, header_style="bold cyan")
        for col in ("Configuration", "Acc", "Macro F1", "MAE", "RPA %"):
            view.add_column(col, justify="left" if col == "Configuration" else "right")
        for row in table.rows:
            r = row.report
            view.add_row(row.label, *(("-" if v is None else f"{v:.3f}")
                                      for v in (r.accuracy, r.macro_f1, r.mae, r.rpa_percent)))
        console.print(view)
        for v in table.violations:
            console.print(f"[warn]{v}[/warn]")
    _emit(payload)


def run() -> None:
    """Console entry point; usage errors exit 1 like config errors."""
    try:
        rv = app(standalone_mode=False)
    except typer.Abort:
        sys.exit(1)
    except _CLICK_ERROR as e:
        e.show()
        sys.exit(1)
    sys.exit(rv if isinstance(rv, int) else 0)


if __name__ == "__main__":
    run()
