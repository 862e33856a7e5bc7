"""Command-line interface.

Commands: enhance, train, mix, eval, grad-check, params. Exit codes:
0 success, 2 usage/config error, 3 I/O error, 4 data/format error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from .audio import read_wav, write_wav
from .config import load_config, model_config_to_dict
from .errors import ConfigError, FormatError, ShapeError
from .gradcheck import run_suite
from .metrics import evaluate, param_count
from .model import enhance, init_params, load_checkpoint, save_checkpoint
from .train import mix as mix_signals
from .train import train_loop

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4


def cmd_enhance(args) -> int:
    params = load_checkpoint(args.checkpoint)
    if args.config is not None:
        cfg = load_config(args.config).model
        if model_config_to_dict(cfg) != model_config_to_dict(params.config):
            raise FormatError(
                f"config {args.config} disagrees with checkpoint {args.checkpoint}")
    noisy = read_wav(args.input)
    start = time.perf_counter()
    cleaned = enhance(noisy, params, threads=args.threads)
    elapsed = time.perf_counter() - start
    write_wav(cleaned, args.output)
    scfg = params.config.stft()
    print(f"F={scfg.n_bins} T={scfg.num_frames(len(noisy))} runtime={elapsed:.2f}s")
    return EXIT_OK


def _wav_dir(path, expected_rate: int):
    files = sorted(Path(path).glob("*.wav"))
    if not files:
        raise OSError(f"no WAV files in {path}")
    return [read_wav(f, expected_rate=expected_rate) for f in files]


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    train_cfg = cfg.training
    if args.steps is not None:
        train_cfg = replace(train_cfg, steps=args.steps)
    if args.seed is not None:
        train_cfg = replace(train_cfg, seed=args.seed)
    rate = cfg.model.sample_rate
    cleans = _wav_dir(args.clean_dir, rate)
    noises = _wav_dir(args.noise_dir, rate)
    rirs = _wav_dir(args.rir_dir, rate) if args.rir_dir else None
    data = [(c, n) for c in cleans for n in noises]
    out = Path(args.out)
    log_path = out.with_name(out.name + ".loss.txt")
    with open(log_path, "w", encoding="utf-8") as log:
        params, losses = train_loop(
            train_cfg, data, cfg.mix, cfg.model, rirs=rirs,
            on_step=lambda step, loss: log.write(f"{step},{loss:.8f}\n"))
    save_checkpoint(params, out)
    if losses:
        print(f"steps={len(losses)} first_loss={losses[0]:.6f} last_loss={losses[-1]:.6f}")
    else:
        print("steps=0 (initialized checkpoint written)")
    print(f"checkpoint={out} loss_log={log_path}")
    return EXIT_OK


def cmd_mix(args) -> int:
    clean = read_wav(args.clean)
    noise = read_wav(args.noise)
    rir = read_wav(args.rir) if args.rir else None
    noisy, target = mix_signals(clean, noise, args.snr_db, rir)
    write_wav(noisy, args.out_noisy)
    write_wav(target, args.out_target)
    print(f"snr_db={args.snr_db:.2f} samples={len(noisy)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ref = read_wav(args.ref)
    est = read_wav(args.est)
    report = evaluate(ref, est)
    print(f"SI-SDR: {report.si_sdr_db:.2f} dB")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    results = run_suite(seed=args.seed)
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        ok = ok and r.passed
        print(f"{r.name:<{width}}  worst={r.worst:.3e}  tol={r.tolerance:.0e}  {status}")
    return EXIT_OK if ok else EXIT_DATA


def cmd_params(args) -> int:
    cfg = load_config(args.config).model
    params = init_params(cfg, seed=0)
    total, breakdown = param_count(params)
    for name, count in breakdown.items():
        print(f"{name}: {count}")
    print(f"total: {total} ({total / 1e6:.2f} M)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsca",
        description="Speech enhancement with fullband-subband cross-attention.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="denoise a WAV file with a trained checkpoint")
    p.add_argument("--config", help="optional config JSON cross-checked against the checkpoint")
    p.add_argument("--checkpoint", required=True, help="model checkpoint path")
    p.add_argument("--input", required=True, help="noisy input WAV")
    p.add_argument("--output", required=True, help="enhanced output WAV")
    p.add_argument("--threads", type=int, default=1,
                   help="frequency-parallel workers (output is identical for any value)")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("train", help="train on WAV directories with dynamic mixing")
    p.add_argument("--config", required=True, help="config JSON")
    p.add_argument("--clean-dir", required=True, help="directory of clean WAV files")
    p.add_argument("--noise-dir", required=True, help="directory of noise WAV files")
    p.add_argument("--rir-dir", help="optional directory of impulse-response WAV files")
    p.add_argument("--steps", type=int, help="override training.steps from the config")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--seed", type=int, help="override training.seed from the config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("mix", help="mix clean speech with noise at a given SNR")
    p.add_argument("--clean", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--rir", help="optional impulse response to convolve with the clean signal")
    p.add_argument("--out-noisy", required=True)
    p.add_argument("--out-target", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("eval", help="scale-invariant SDR of an estimate against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad-check", help="finite-difference check of every backward pass")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("params", help="parameter counts for a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_params)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
