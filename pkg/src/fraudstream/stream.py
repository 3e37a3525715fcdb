"""Micro-batch streaming: batch sources, an append-only table and the sliding-window executor.

A window covers ``ws`` consecutive batches. The first ``ws - 1`` are
concatenated for training and the last one is the test batch; the window
then advances by ``sl`` batches. A producer thread feeds batches to the
executor through a bounded queue of capacity ``ws + 2``.
"""

from __future__ import annotations

import queue
import threading
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import clone

from .balance import make_balancer
from .core import EvalReport, RecordBatch, derive_seed
from .eval import evaluate
from .exceptions import (
    ConfigError,
    EmptyResultError,
    FraudStreamError,
    SingleClassWindowError,
    StreamStateError,
)
from .ingest import parse_csv, to_dataset
from .models import make_model

_END = object()


@dataclass(frozen=True)
class SlidingWindowSpec:
    window_size: int = 2
    sliding_interval: int = 1

    def __post_init__(self):
        if self.window_size < 2:
            raise ConfigError("window_size must be at least 2 (one training and one test batch)")
        if self.sliding_interval < 1:
            raise ConfigError("sliding_interval must be at least 1")

    def n_windows(self, n_batches: int) -> int:
        if n_batches < self.window_size:
            return 0
        return (n_batches - self.window_size) // self.sliding_interval + 1


class UnboundedTable:
    """Append-only log of batches; indices must strictly increase."""

    def __init__(self):
        self._batches: list[RecordBatch] = []

    def append(self, batch: RecordBatch) -> None:
        if self._batches and batch.batch_index <= self._batches[-1].batch_index:
            raise StreamStateError(
                f"batch_index {batch.batch_index} does not follow {self._batches[-1].batch_index}"
            )
        self._batches.append(batch)

    def __len__(self):
        return len(self._batches)

    def __getitem__(self, i):
        return self._batches[i]

    @property
    def batches(self) -> tuple:
        return tuple(self._batches)


class BatchQueueSource:
    """Replays a fixed sequence of batches, ``interval_ms`` apart (0 = no pause)."""

    def __init__(self, batches, interval_ms: float = 0.0):
        self.batches = list(batches)
        if not self.batches:
            raise ConfigError("queue source needs at least one batch")
        if interval_ms < 0:
            raise ConfigError("interval_ms must be non-negative")
        self.interval_ms = interval_ms

    def __iter__(self):
        for i, b in enumerate(self.batches):
            if i and self.interval_ms:
                time.sleep(self.interval_ms / 1000.0)
            yield b


def queue_stream_source(batches, interval_ms: float = 0.0) -> BatchQueueSource:
    return BatchQueueSource(batches, interval_ms)


def read_batch_file(path, batch_index: int, label_column: str = "label") -> RecordBatch:
    ds = to_dataset(parse_csv(path, label_column))
    return RecordBatch(ds.X, ds.y, batch_index)


class DirectoryWatchSource:
    """Consumes ``batch_000001.csv``, ``batch_000002.csv``, ... as they appear.

    Files must be complete when they become visible (write then rename).
    The stream ends when the next file is missing and either an ``END``
    marker file exists or nothing new arrived for ``idle_timeout_s``.
    """

    def __init__(self, directory, poll_interval_ms: float = 50.0, idle_timeout_s: float = 2.0,
                 label_column: str = "label"):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ConfigError(f"batch directory {self.directory} does not exist")
        self.poll_interval_ms = poll_interval_ms
        self.idle_timeout_s = idle_timeout_s
        self.label_column = label_column

    def __iter__(self):
        number = 1
        last_seen = time.monotonic()
        while True:
            path = self.directory / f"batch_{number:06d}.csv"
            if path.exists():
                yield read_batch_file(path, number - 1, self.label_column)
                number += 1
                last_seen = time.monotonic()
                continue
            if (self.directory / "END").exists():
                return
            if time.monotonic() - last_seen > self.idle_timeout_s:
                return
            time.sleep(self.poll_interval_ms / 1000.0)


@dataclass(frozen=True)
class WindowResult:
    window_id: int
    model: str
    train_batch_indices: tuple
    test_batch_index: int
    report: EvalReport | None
    latency_ms: float | None
    skipped: bool = False

    def as_dict(self, include_latency: bool = True) -> dict:
        r = self.report
        out = {
            "window_id": self.window_id,
            "model": self.model,
            "auc": None if r is None else r.auc,
            "sensitivity": None if r is None else r.sensitivity,
            "specificity": None if r is None else r.specificity,
            "tp": None if r is None else r.confusion.tp,
            "fn": None if r is None else r.confusion.fn,
            "tn": None if r is None else r.confusion.tn,
            "fp": None if r is None else r.confusion.fp,
            "latency_ms": self.latency_ms if include_latency else None,
            "skipped": self.skipped,
        }
        return out


class StreamingContext:
    """Lifecycle wrapper: created -> started -> stopped (terminal).

    ``models`` holds family names or unfitted estimators; each window trains
    a fresh copy of every model. ``balancer`` (a name or resampler) is
    applied to the training part of each window only.
    """

    def __init__(self, source, spec: SlidingWindowSpec = SlidingWindowSpec(), models=("dt",),
                 hp: dict | None = None, balancer=None, seed: int = 0, sink=None):
        self.source = source
        self.spec = spec
        self.models = list(models)
        if not self.models:
            raise ConfigError("at least one model is required")
        self.hp = dict(hp or {})
        self.balancer = balancer
        self.seed = seed
        self.sink = sink
        self.state = "created"
        self.table = UnboundedTable()
        self._queue: queue.Queue = queue.Queue(maxsize=spec.window_size + 2)
        self._halt = threading.Event()
        self._thread: threading.Thread | None = None
        self._consumed = False

    def _produce(self):
        try:
            for batch in self.source:
                if not self._put(batch):
                    return
            self._put(_END)
        except BaseException as err:  # handed to the consumer
            self._put(err)

    def _put(self, item) -> bool:
        while not self._halt.is_set():
            try:
                self._queue.put(item, timeout=0.05)
                return True
            except queue.Full:
                continue
        return False

    def start(self) -> "StreamingContext":
        if self.state != "created":
            raise StreamStateError(f"cannot start a {self.state} context")
        self.state = "started"
        self._thread = threading.Thread(target=self._produce, name="stream-source", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self.state == "stopped":
            return
        self.state = "stopped"
        self._halt.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self):
        return self.start() if self.state == "created" else self

    def __exit__(self, *exc):
        self.stop()

    def batches(self):
        """Yield batches from the producer until end of stream."""
        if self.state != "started":
            raise StreamStateError(f"context is {self.state}, not started")
        while True:
            item = self._queue.get()
            if item is _END:
                return
            if isinstance(item, BaseException):
                raise item
            yield item


def _model_name(m):
    return m if isinstance(m, str) else type(m).__name__


def _fresh_model(m, hp, seed):
    if isinstance(m, str):
        return make_model(m, hp.get(m), seed=seed)
    est = clone(m)
    if "seed" in est.get_params():
        est.set_params(seed=seed)
    return est


def _resolve_balancer(balancer, seed):
    if balancer is None or balancer == "none":
        return None
    if isinstance(balancer, str):
        return make_balancer(balancer, seed)
    est = clone(balancer)
    if "seed" in est.get_params():
        est.set_params(seed=seed)
    return est


def _run_window(ctx, window_id, train_batches, test_batch):
    X = np.vstack([b.X for b in train_batches])
    y = np.concatenate([b.y for b in train_batches])
    train_idx = tuple(b.batch_index for b in train_batches)
    results = []
    single_class = len(np.unique(y)) < 2
    if single_class:
        err = SingleClassWindowError(window_id)
        warnings.warn(str(err))
        return [WindowResult(window_id, _model_name(m), train_idx, test_batch.batch_index, None, None, True)
                for m in ctx.models]
    wseed = derive_seed(ctx.seed, window_id)
    try:
        t0 = time.perf_counter()
        bal = _resolve_balancer(ctx.balancer, wseed)
        Xt, yt = bal.fit_resample(X, y) if bal is not None else (X, y)
        balance_ms = (time.perf_counter() - t0) * 1000.0
        for m in ctx.models:
            t0 = time.perf_counter()
            model = _fresh_model(m, ctx.hp, wseed).fit(Xt, yt)
            report = evaluate(test_batch.y, model.predict(test_batch.X))
            latency = balance_ms + (time.perf_counter() - t0) * 1000.0
            results.append(WindowResult(window_id, _model_name(m), train_idx, test_batch.batch_index,
                                        report, latency))
    except FraudStreamError as err:
        err.window_id = window_id
        if err.args and isinstance(err.args[0], str):
            err.args = (f"window {window_id}: {err.args[0]}",) + err.args[1:]
        raise
    return results


def run_streaming_pipeline(ctx: StreamingContext) -> list[WindowResult]:
    """Run every full window as soon as its batches have arrived.

    Results come back in window order, one per (window, model). Windows
    whose training part holds a single class are returned with
    ``skipped=True``.
    """
    if ctx.state != "started":
        raise StreamStateError(f"context is {ctx.state}, not started")
    if ctx._consumed:
        raise StreamStateError("the stream of this context was already consumed")
    ctx._consumed = True
    ws, sl = ctx.spec.window_size, ctx.spec.sliding_interval
    results = []
    next_start = 0
    window_id = 0
    for batch in ctx.batches():
        ctx.table.append(batch)
        while next_start + ws <= len(ctx.table):
            window = [ctx.table[i] for i in range(next_start, next_start + ws)]
            out = _run_window(ctx, window_id, window[:-1], window[-1])
            if ctx.sink is not None:
                for r in out:
                    ctx.sink(r)
            results.extend(out)
            window_id += 1
            next_start += sl
    return results


@dataclass
class StreamSummary:
    model: str
    n_windows: int
    n_skipped: int
    mean_auc: float
    mean_sensitivity: float
    mean_specificity: float
    latency_p50_ms: float | None
    latency_p95_ms: float | None
    window_ids: list = field(default_factory=list)
    auc_series: list = field(default_factory=list)

    def as_dict(self, include_latency: bool = True) -> dict:
        return {
            "model": self.model,
            "summary": True,
            "n_windows": self.n_windows,
            "n_skipped": self.n_skipped,
            "mean_auc": self.mean_auc,
            "mean_sensitivity": self.mean_sensitivity,
            "mean_specificity": self.mean_specificity,
            "latency_p50_ms": self.latency_p50_ms if include_latency else None,
            "latency_p95_ms": self.latency_p95_ms if include_latency else None,
        }


def summarize_stream(results) -> StreamSummary:
    """Means over non-skipped windows of one model, plus latency percentiles."""
    results = list(results)
    if not results:
        raise EmptyResultError("no window results to summarise")
    models = {r.model for r in results}
    if len(models) > 1:
        raise ConfigError(f"results mix models {sorted(models)}; summarise each separately")
    done = [r for r in results if not r.skipped]
    if not done:
        raise EmptyResultError("every window was skipped")
    lat = [r.latency_ms for r in done if r.latency_ms is not None]
    return StreamSummary(
        model=results[0].model,
        n_windows=len(results),
        n_skipped=len(results) - len(done),
        mean_auc=float(np.mean([r.report.auc for r in done])),
        mean_sensitivity=float(np.mean([r.report.sensitivity for r in done])),
        mean_specificity=float(np.mean([r.report.specificity for r in done])),
        latency_p50_ms=float(np.percentile(lat, 50)) if lat else None,
        latency_p95_ms=float(np.percentile(lat, 95)) if lat else None,
        window_ids=[r.window_id for r in done],
        auc_series=[r.report.auc for r in done],
    )


def results_by_model(results) -> dict:
    out: dict = {}
    for r in results:
        out.setdefault(r.model, []).append(r)
    return out


def run_stream(batches, spec: SlidingWindowSpec = SlidingWindowSpec(), models=("dt",), hp=None,
               balancer=None, seed: int = 0, interval_ms: float = 0.0) -> list[WindowResult]:
    """Convenience wrapper: queue source, start, run, stop."""
    with StreamingContext(queue_stream_source(batches, interval_ms), spec, models, hp, balancer, seed) as ctx:
        return run_streaming_pipeline(ctx)
