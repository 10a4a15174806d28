"""Command-line entry points: ingest, gen, train, eval, serve.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from . import ingest, predictor, series, synchronizer
from .errors import DataError, NumericError
from .pid import AutoTuner, PidController, PidGains


def _load_series(path: str) -> ingest.TrafficSeries:
    with open(path, "rb") as fh:
        return ingest.read_csv(fh.read())


def _pick_split(s: ingest.TrafficSeries, which: str) -> ingest.TrafficSeries:
    if which == "full":
        return s
    train, val, test = series.split(s)
    return {"train": train, "val": val, "test": test}[which]


def cmd_ingest(args) -> int:
    with open(args.pcap, "rb") as fh:
        parsed = ingest.parse_pcap(fh.read())
    if parsed.truncated:
        print("warning: capture truncated mid-record; using parsed prefix",
              file=sys.stderr)
    s = ingest.bucketize(parsed.records, args.bucket_ms / 1000.0,
                         label=args.label or args.pcap)
    with open(args.out, "wb") as fh:
        fh.write(ingest.write_csv(s))
    print(f"wrote {len(s)} buckets ({len(parsed.records)} packets) to {args.out}")
    return 0


def cmd_gen(args) -> int:
    profile = ingest.default_profile(args.profile, seed=args.seed)
    s = ingest.generate(profile, args.steps, bucket_seconds=args.bucket_seconds)
    with open(args.out, "wb") as fh:
        fh.write(ingest.write_csv(s))
    print(f"wrote {args.steps}-step {args.profile} series to {args.out}")
    return 0


def cmd_train(args) -> int:
    full = _load_series(args.series)
    train_s, val_s, _ = series.split(full)
    norm = series.fit_normalizer(train_s)
    train_ds = series.make_windows(train_s, args.window, args.horizon, norm)
    val_ds = series.make_windows(val_s, args.window, args.horizon, norm)
    config = predictor.CnnConfig(
        window_len=args.window, horizon=args.horizon, epochs=args.epochs,
        batch_size=args.batch, learning_rate=args.lr, seed=args.seed,
    )
    model, trace = predictor.train(config, train_ds, val_ds, norm)
    with open(args.out, "wb") as fh:
        fh.write(predictor.save_model(model))
    best = min(t["val_mae"] for t in trace)
    baseline = predictor.persistence_mae(val_ds, norm)
    print(f"trained {config.epochs} epochs; best val MAE {best:.4f} pps "
          f"(persistence baseline {baseline:.4f})")
    print(f"model written to {args.out}")
    return 0


def _print_metrics_table(summary: dict) -> None:
    print(f"{'regime':<16}{'stream':<10}{'MAE':>10}{'RMSE':>10}")
    for regime in ("overall", "post_activation"):
        m = summary[regime]
        for stream in ("raw", "adjusted"):
            print(f"{regime:<16}{stream:<10}"
                  f"{m['mae_' + stream]:>10.4f}{m['rmse_' + stream]:>10.4f}")


def cmd_eval(args) -> int:
    s = _pick_split(_load_series(args.series), args.split)
    with open(args.model, "rb") as fh:
        model = predictor.load_model(fh.read())
    if args.sweep:
        gains, _ = synchronizer.sweep_gains(s, model, args.enable_at,
                                            error_source=args.error_source)
        print(f"sweep best gains: kp={gains.kp} ki={gains.ki} kd={gains.kd}")
    else:
        kp, ki, kd = (float(x) for x in args.pid.split(","))
        gains = PidGains(kp, ki, kd)
    _, summary = synchronizer.run_offline(s, model, gains, args.enable_at,
                                          error_source=args.error_source)
    _print_metrics_table(summary)
    post = summary["post_activation"]
    if post["ticks"] and post["mae_raw"] > 0:
        print(f"post-activation MAE ratio (adjusted/raw): "
              f"{post['mae_adjusted'] / post['mae_raw']:.3f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionRunner, create_app

    s = _pick_split(_load_series(args.series), args.split)
    with open(args.model, "rb") as fh:
        model = predictor.load_model(fh.read())
    limit = (args.integral_limit if args.integral_limit is not None
             else synchronizer.default_integral_limit(s))
    pid = PidController(gains=PidGains(args.pid_kp, args.pid_ki, args.pid_kd),
                        integral_limit=limit)
    session = synchronizer.ReplaySession(
        s, model, pid=pid, speed=args.speed, error_source=args.error_source,
        autotuner=AutoTuner() if args.autotune else None,
    )
    runner = SessionRunner(session, retention=args.retention)
    runner.start()
    app = create_app(runner)
    print(f"serving {s.label or args.series} on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twinsync")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("ingest", help="pcap -> packets-per-second CSV")
    pi.add_argument("--pcap", required=True)
    pi.add_argument("--bucket-ms", type=float, default=1000.0)
    pi.add_argument("--out", required=True)
    pi.add_argument("--label", default="")
    pi.set_defaults(fn=cmd_ingest)

    pg = sub.add_parser("gen", help="synthetic traffic CSV")
    pg.add_argument("--profile", required=True,
                    choices=["video", "iperf", "constant", "sine"])
    pg.add_argument("--steps", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--bucket-seconds", type=float, default=1.0)
    pg.add_argument("--out", required=True)
    pg.set_defaults(fn=cmd_gen)

    pt = sub.add_parser("train", help="train the CNN forecaster")
    pt.add_argument("--series", required=True)
    pt.add_argument("--window", type=int, default=30)
    pt.add_argument("--horizon", type=int, default=1)
    pt.add_argument("--epochs", type=int, default=50)
    pt.add_argument("--batch", type=int, default=32)
    pt.add_argument("--lr", type=float, default=0.0001)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--out", required=True)
    pt.set_defaults(fn=cmd_train)

    pe = sub.add_parser("eval", help="offline replay metrics, raw vs PID-adjusted")
    pe.add_argument("--series", required=True)
    pe.add_argument("--model", required=True)
    pe.add_argument("--pid", default="0.4,0.05,0.0", help="kp,ki,kd")
    pe.add_argument("--enable-at", type=int, default=30)
    pe.add_argument("--sweep", action="store_true")
    pe.add_argument("--split", default="full",
                    choices=["full", "train", "val", "test"])
    pe.add_argument("--error-source", default="raw", choices=["raw", "adjusted"])
    pe.set_defaults(fn=cmd_eval)

    ps = sub.add_parser("serve", help="HTTP API + SSE telemetry for the console")
    ps.add_argument("--series", required=True)
    ps.add_argument("--model", required=True)
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8080)
    ps.add_argument("--speed", type=float, default=1.0)
    ps.add_argument("--pid-kp", type=float, default=0.4)
    ps.add_argument("--pid-ki", type=float, default=0.05)
    ps.add_argument("--pid-kd", type=float, default=0.0)
    ps.add_argument("--integral-limit", type=float, default=None)
    ps.add_argument("--autotune", action="store_true")
    ps.add_argument("--retention", type=int, default=10_000)
    ps.add_argument("--split", default="test",
                    choices=["full", "train", "val", "test"])
    ps.add_argument("--error-source", default="raw", choices=["raw", "adjusted"])
    ps.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
