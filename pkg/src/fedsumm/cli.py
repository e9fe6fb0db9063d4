"""Command line entry point: ``fedsumm run | sweep | score``.

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import metrics as metrics_mod
from .config import ExperimentConfig, load_experiment, load_sweep
from .errors import ConfigError, DataFormatError, RunError
from .protocol import run_experiment

log = logging.getLogger("fedsumm")

METRICS_HEADER = ["round", "global_loss", "perplexity", "rho_mean", "rho_max_abs_dev", "clipped_fraction", "M", "notes"]
COMBINED_HEADER = ["variable", "value", "algo", "seed"] + METRICS_HEADER[:-1]


def fmt(x) -> str:
    """17 significant digits, locale independent; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def metrics_row(m: metrics_mod.RoundMetrics) -> list[str]:
    tel = m.dp_telemetry
    notes = f"participants={len(m.participants)}"
    if tel is not None:
        notes += f";sigma={fmt(tel.sigma)}"
    return [
        fmt(m.round),
        fmt(m.global_loss),
        fmt(m.perplexity),
        fmt(m.rho_mean),
        fmt(m.rho_max_abs_dev),
        fmt(tel.clipped_fraction if tel else None),
        fmt(tel.M if tel else None),
        notes,
    ]


def build_partitions(cfg: ExperimentConfig):
    if cfg.data_path is None:
        return data_mod.generate(cfg.heterogeneity, cfg.model)
    parts = data_mod.load_jsonl(cfg.data_path)
    if [p.client_id for p in parts] != list(range(cfg.round_config.clients)):
        raise ConfigError(
            f"dataset has client ids {[p.client_id for p in parts]}, expected 0..{cfg.round_config.clients - 1}",
            "data.path",
        )
    return parts


def summarize(cfg: ExperimentConfig, history) -> dict:
    last = history[-1]
    rtt = None
    if cfg.target_loss is not None:
        rtt = next((m.round for m in history if m.global_loss <= cfg.target_loss), None)
    dp = None
    if cfg.dp_config is not None and cfg.dp_config.enabled:
        dp = {
            "sigma": cfg.dp_config.noise_multiplier,
            "delta": cfg.dp_config.delta,
            "rounds": len(history),
            "M_per_round": [m.dp_telemetry.M for m in history],
        }
    return {
        "run_label": cfg.run_label,
        "algo": cfg.algo,
        "final_loss": last.global_loss,
        "final_perplexity": last.perplexity,
        "final_per_client_loss": {str(c): v for c, v in sorted(last.per_client_loss.items())},
        "target_loss": cfg.target_loss,
        "rounds_to_target": rtt,
        "rho_final_mean": last.rho_mean,
        "rho_final_mean_abs_dev": last.rho_mean_abs_dev,
        "rho_final_max_abs_dev": last.rho_max_abs_dev,
        "rho_final_per_client": {str(c): v for c, v in sorted(last.rho_per_client.items())},
        "dp": dp,
        "config_hash": cfg.config_hash(),
    }


def execute(cfg: ExperimentConfig, out_dir) -> list:
    """Run one experiment and write metrics.csv, config_echo.json, summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    parts = build_partitions(cfg)
    history = run_experiment(cfg.round_config, cfg.algo, cfg.dp_config, parts, cfg.model, cfg.adapter_config)
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        writer.writerows(metrics_row(m) for m in history)
    (out / "summary.json").write_text(json.dumps(summarize(cfg, history), indent=2) + "\n", encoding="utf-8")
    return history


def cmd_run(args) -> int:
    cfg = load_experiment(args.config, seed=args.seed, output_dir=args.out)
    out = cfg.output_dir or str(Path("runs") / cfg.run_label)
    execute(cfg, out)
    log.info("wrote %s", out)
    return 0


def cmd_sweep(args) -> int:
    spec = load_sweep(args.config)
    if args.seed is not None:
        spec.base["seed"] = args.seed
    out_root = Path(args.out or Path("runs") / f"sweep-{spec.variable}")
    cells = [(v, a, spec.cell_config(v, a)) for v in spec.values for a in spec.cell_algos()]
    rows = []
    for value, algo, cfg in cells:
        cell_dir = out_root / f"{spec.variable}={value}" / algo
        try:
            history = execute(cfg, cell_dir)
        except RunError as exc:
            raise RunError(f"sweep cell {spec.variable}={value} algo={algo}: {exc}", exc.round) from exc
        except (ConfigError, DataFormatError) as exc:
            raise ConfigError(f"sweep cell {spec.variable}={value} algo={algo}: {exc}") from exc
        for m in history:
            rows.append([spec.variable, fmt(value), algo, fmt(cfg.seed)] + metrics_row(m)[:-1])
    with open(out_root / "combined.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMBINED_HEADER)
        writer.writerows(rows)
    log.info("wrote %d cells under %s", len(cells), out_root)
    return 0


def _read_pairs(path, references):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such file {path}", "candidates")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if references is not None:
        ref_lines = [ln for ln in Path(references).read_text(encoding="utf-8").splitlines() if ln.strip()]
        if len(ref_lines) != len(lines):
            raise ConfigError(f"{len(lines)} candidates but {len(ref_lines)} references", "references")
        pairs = list(zip(lines, ref_lines))
    else:
        pairs = []
        for lineno, line in enumerate(lines, start=1):
            try:
                rec = json.loads(line)
                pairs.append((rec["candidate"], rec["reference"]))
            except (json.JSONDecodeError, KeyError, TypeError):
                raise DataFormatError("expected an object with candidate and reference", lineno) from None
            if not isinstance(pairs[-1][0], str) or not isinstance(pairs[-1][1], str):
                raise DataFormatError("candidate and reference must be strings", lineno)
    if not pairs:
        raise ConfigError("no pairs", "candidates")
    return pairs


def score_pairs(pairs, tokenizer: str = "whitespace") -> list[dict]:
    out = []
    for cand, ref in pairs:
        scores = metrics_mod.rouge_all(metrics_mod.tokenize(cand, tokenizer), metrics_mod.tokenize(ref, tokenizer))
        out.append({k: s.f1 for k, s in scores.items()})
    return out


def cmd_score(args, stdout) -> int:
    pairs = _read_pairs(args.path, args.references)
    scores = score_pairs(pairs, args.tokenizer)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pair", "R1", "R2", "RL"])
    for i, s in enumerate(scores):
        writer.writerow([i, fmt(s["R1"]), fmt(s["R2"]), fmt(s["RL"])])
    means = {k: float(np.mean([s[k] for s in scores])) for k in ("R1", "R2", "RL")}
    writer.writerow(["mean", fmt(means["R1"]), fmt(means["R2"]), fmt(means["RL"])])
    stdout.write(buf.getvalue())
    return 0


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsumm", description="Personalized federated learning simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a JSON config")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--seed", type=_u64, metavar="U64")

    p = sub.add_parser("sweep", help="run one experiment per swept value")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--seed", type=_u64, metavar="U64")

    p = sub.add_parser("score", help="ROUGE-1/2/L F1 of candidate/reference pairs as CSV")
    p.add_argument("path", help="JSONL with candidate and reference fields, or plain candidate lines with --references")
    p.add_argument("--references", metavar="PATH")
    p.add_argument("--tokenizer", choices=("whitespace", "char"), default="whitespace")
    return parser


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_score(args, stdout)
    except (ConfigError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
