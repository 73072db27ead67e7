"""Command-line entry point.

Subcommands: regress | compress | inpaint | interpolate | report. Flags mirror
RunConfig; a key=value config file can seed any flag, and NRVB_OUT selects the
output root.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

from . import configio, report
from .training import (
    RunConfig,
    finetune_compress,
    load_checkpoint,
    run_inpainting,
    run_interpolation,
    save_checkpoint,
    train_regression,
)
from .video import SynthSpec, load_video, synth_video

_CFG_TYPES = {f.name: f for f in fields(RunConfig)}


def _parse_strides(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.replace(" ", ",").split(",") if s)


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--data", help="directory of numbered PNG frames")
    p.add_argument("--synth", help="synthetic clip spec TxHxW, e.g. 8x120x240")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--name", default=None, help="run name (defaults to task+timestamp)")
    p.add_argument("--variant", choices=("nerv_boost", "enerv_boost", "hnerv_boost"))
    p.add_argument("--target-params", type=int, dest="target_params")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--warmup-frac", type=float, dest="warmup_frac")
    p.add_argument("--pe-b", type=float, dest="pe_b")
    p.add_argument("--pe-l", type=int, dest="pe_l")
    p.add_argument("--lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--b-avg", type=float, dest="b_avg")
    p.add_argument("--strides", type=_parse_strides)
    p.add_argument("--seed", type=int)
    p.add_argument("--embed-dim", type=int, dest="embed_dim")
    p.add_argument("--no-tat", action="store_true")
    p.add_argument("--activation", choices=("sine", "gelu"))
    p.add_argument("--modulation", choices=("tat", "adain"))
    p.add_argument("--loss", choices=("eq4", "l2"))
    p.add_argument("--compress-epochs", type=int, dest="compress_epochs")
    p.add_argument("--compress-lr", type=float, dest="compress_lr")
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--mask", choices=("disperse", "central"), dest="mask_kind")
    p.add_argument("--quiet", action="store_true")


def _coerce(name: str, value: str):
    f = _CFG_TYPES[name]
    text = str(f.type)
    if name == "strides":
        return _parse_strides(value)
    if "int" in text:
        return int(value)
    if "float" in text:
        return float(value)
    if "bool" in text:
        return value.strip().lower() in ("1", "true", "yes")
    return value


def build_run_config(args: argparse.Namespace, task: str) -> RunConfig:
    cfg_kwargs: dict = {"task": task}
    if args.config:
        for key, value in configio.loads(Path(args.config).read_text()).items():
            if key in _CFG_TYPES:
                cfg_kwargs[key] = _coerce(key, value)
            elif key not in ("data", "synth", "name"):
                raise SystemExit(f"unknown config key {key!r}")
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            cfg_kwargs[f.name] = v
    if getattr(args, "no_tat", False):
        cfg_kwargs["use_tat"] = False
    return RunConfig(**cfg_kwargs)


def _load_clip(args: argparse.Namespace):
    if args.data:
        return load_video(args.data), Path(args.data).name
    if args.synth:
        t, h, w = (int(x) for x in args.synth.lower().split("x"))
        seed = getattr(args, "seed", None) or 0
        return synth_video(SynthSpec(t=t, height=h, width=w, seed=seed)), f"synth{args.synth}"
    raise SystemExit("provide --data DIR or --synth TxHxW")


def _out_dir(args: argparse.Namespace, task: str) -> Path:
    root = Path(os.environ.get("NRVB_OUT", "runs"))
    name = args.name or f"{task}-{time.strftime('%Y%m%d-%H%M%S')}"
    out = root / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _logger(quiet: bool):
    if quiet:
        return None

    def log(rec: dict):
        msg = f"epoch {rec['epoch']:4d}  loss {rec['loss']:.5f}  lr {rec['lr']:.2e}"
        if "psnr" in rec:
            msg += f"  psnr {rec['psnr']:.2f}"
        if "rate_bpp" in rec:
            msg += f"  rate {rec['rate_bpp']:.4f}bpp"
        print(msg, flush=True)

    return log


def _write_run_outputs(out: Path, video: str, cfg: RunConfig, rows: list[dict], records: list[dict]):
    report.write_csv(rows, out / "report.csv")
    report.write_json(rows, out / "report.json")
    with open(out / "metrics.json", "w") as fh:
        json.dump(records, fh, indent=2)
    print(f"outputs in {out}")


def cmd_regress(args) -> int:
    clip, video = _load_clip(args)
    cfg = build_run_config(args, "regress")
    bundle, records = train_regression(clip, cfg, log=_logger(args.quiet))
    out = _out_dir(args, "regress")
    save_checkpoint(out / "checkpoint.nrvc", bundle, clip)
    final = records[-1]
    rows = [{
        "video": video, "variant": cfg.variant, "task": "regress",
        "size_params": sum(p.numel() for p in bundle.model.parameters()),
        "bpp": None, "psnr": final.get("psnr"), "msssim": final.get("msssim"),
        "epochs": cfg.epochs, "wall_time_s": final.get("wall_time_s"),
    }]
    _write_run_outputs(out, video, cfg, rows, records)
    print(f"final psnr {final.get('psnr'):.3f} dB, ms-ssim {final.get('msssim'):.5f}")
    return 0


def cmd_compress(args) -> int:
    clip, video = _load_clip(args)
    cfg = build_run_config(args, "compress")
    out = _out_dir(args, "compress")
    log = _logger(args.quiet)
    if args.checkpoint:
        bundle = load_checkpoint(args.checkpoint, cfg)
    else:
        print("no checkpoint given: overfitting first")
        bundle, _ = train_regression(clip, cfg, log=log)
        save_checkpoint(out / "checkpoint.nrvc", bundle, clip)
    result = finetune_compress(bundle, clip, cfg, log=log)
    (out / "stream.nrvb").write_bytes(result.stream)
    rows = [{
        "video": video, "variant": cfg.variant, "task": "compress",
        "size_params": sum(p.numel() for p in bundle.model.parameters()),
        "bpp": result.rd["bpp"], "psnr": result.rd["psnr"], "msssim": result.rd["msssim"],
        "epochs": cfg.compress_epochs, "wall_time_s": None,
    }]
    _write_run_outputs(out, video, cfg, rows, result.records)
    print(f"bpp {result.rd['bpp']:.5f}  psnr {result.rd['psnr']:.3f}  (from bitstream)")
    return 0


def cmd_inpaint(args) -> int:
    clip, video = _load_clip(args)
    cfg = build_run_config(args, "inpaint")
    result = run_inpainting(clip, cfg, log=_logger(args.quiet))
    out = _out_dir(args, "inpaint")
    save_checkpoint(out / "checkpoint.nrvc", result["bundle"], clip)
    rows = [{
        "video": video, "variant": cfg.variant, "task": f"inpaint-{cfg.mask_kind}",
        "size_params": sum(p.numel() for p in result["bundle"].model.parameters()),
        "bpp": None, "psnr": result["masked_psnr"], "msssim": result["msssim"],
        "epochs": cfg.epochs, "wall_time_s": None,
    }]
    _write_run_outputs(out, video, cfg, rows, result["records"])
    print(f"masked psnr {result['masked_psnr']:.3f} dB, full psnr {result['psnr']:.3f} dB")
    return 0


def cmd_interpolate(args) -> int:
    clip, video = _load_clip(args)
    cfg = build_run_config(args, "interpolate")
    result = run_interpolation(clip, cfg, log=_logger(args.quiet))
    out = _out_dir(args, "interpolate")
    save_checkpoint(out / "checkpoint.nrvc", result["bundle"], clip)
    rows = [{
        "video": video, "variant": cfg.variant, "task": "interpolate",
        "size_params": sum(p.numel() for p in result["bundle"].model.parameters()),
        "bpp": None, "psnr": result["test_psnr"], "msssim": result["test_msssim"],
        "epochs": cfg.epochs, "wall_time_s": None,
    }]
    _write_run_outputs(out, video, cfg, rows, result["records"])
    print(f"train psnr {result['train_psnr']:.3f} dB, test psnr {result['test_psnr']:.3f} dB")
    return 0


def cmd_report(args) -> int:
    runs: list[dict] = []
    for path in args.inputs:
        p = Path(path)
        runs.extend(report.read_json(p) if p.suffix == ".json" else report.read_csv(p))
    out = _out_dir(args, "report")
    report.write_csv(runs, out / "report.csv")
    report.write_json(runs, out / "report.json")
    if args.plot:
        report.rd_plot(runs, out / "rd.png")
    print(f"merged {len(runs)} rows into {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nrvb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for task, fn in (("regress", cmd_regress), ("compress", cmd_compress),
                     ("inpaint", cmd_inpaint), ("interpolate", cmd_interpolate)):
        p = sub.add_parser(task)
        _add_run_flags(p)
        if task == "compress":
            p.add_argument("--checkpoint", help="start from a regression checkpoint")
        p.set_defaults(fn=fn)

    p = sub.add_parser("report")
    p.add_argument("inputs", nargs="*", help="report.json / report.csv files to merge")
    p.add_argument("--plot", action="store_true", help="write an RD plot")
    p.add_argument("--name", default=None)
    p.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
