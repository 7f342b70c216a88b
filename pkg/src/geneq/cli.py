"""geneq command line: restore, degrade, ltas, eval, show-filter.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .blockar import BlockArConfig, restore_recording
from .config import PRESETS, RUN_MODES, RunConfig, resolve_config
from .degrade import FILTER_PRESETS, UNITY_PRESETS, check_snr, degrade_signal, preset_filter, sidecar_dict
from .denoiser import GaussianPsdPrior, vjp_method
from .dsp import analysis_config, next_pow2
from .errors import AudioIOError, GeneqError, NumericError, ValidationError
from .filters import BcrConfig, FilterParams, eval_response_db, init_default, load_filter
from .ltas import (
    apply_inverse_eq,
    compute_ltas,
    corpus_key,
    corpus_ltas,
    load_cache,
    ltas_distance,
    ltas_eq_filter,
    read_ltas_csv,
    save_cache,
    write_ltas_csv,
)
from .optim import AdamState
from .sampler import GuidanceConfig, InnerLoopConfig, build_schedule
from .wavio import SUBTYPES, read_wav, write_wav

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump_yaml(path, data) -> None:
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False, default_flow_style=None))


def _sidecar(output: Path, suffix: str) -> Path:
    return output.with_name(output.stem + suffix)


def expand_wavs(paths) -> list[Path]:
    """Files as given; directories contribute their ``*.wav`` files in sorted order."""
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() == ".wav"))
        elif p.exists():
            out.append(p)
        else:
            raise AudioIOError(f"{p}: no such file or directory")
    return out


def load_reference(path, sample_rate: float, jobs: int = 1):
    """Reference LTAS from a CSV, an .npz cache, a WAV file or a directory of WAVs."""
    p = Path(path)
    config = analysis_config(sample_rate)
    if p.suffix.lower() == ".csv":
        profile = read_ltas_csv(p)
    elif p.suffix.lower() == ".npz":
        profile = load_cache(p)
    else:
        files = expand_wavs([p])
        if not files:
            raise ValidationError([f"reference: {p} contains no WAV files"])
        profile = corpus_ltas([(lambda f=f: read_wav(f)) for f in files], config, jobs=jobs)
    if profile.config.window_size != config.window_size or abs(profile.sample_rate - sample_rate) > 0.5:
        raise ValidationError([
            f"reference: LTAS grid ({profile.config.window_size} bins at {profile.sample_rate:g} Hz) does not "
            f"match the input analysis grid ({config.window_size} at {sample_rate:g} Hz)"
        ])
    return profile


def _filter_rows(filters: list[FilterParams]):
    head = ["block"] + filters[0].breakpoint_labels() + filters[0].slope_labels()
    rows = [[k] + [repr(float(v)) for v in f.vector()] for k, f in enumerate(filters)]
    return head, rows


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_restore(cfg: RunConfig) -> int:
    y = read_wav(cfg.input)
    sr = y.sample_rate
    ref = load_reference(cfg.reference, sr, cfg.jobs)
    out = Path(cfg.output)
    manifest = {
        "command": "restore",
        "version": __version__,
        "config": cfg.to_dict(),
        "input": {"path": str(cfg.input), "sha256": _sha256(cfg.input), "sample_rate": sr, "samples": len(y)},
    }
    outputs = {"audio": out.name}

    if cfg.mode == "ltas-eq":
        h = ltas_eq_filter(compute_ltas(y, ref.config), ref)
        restored = apply_inverse_eq(y, h)
        eq_path = _sidecar(out, ".eq.csv")
        _write_csv(eq_path, ["frequency_hz", "gain_db"],
                   [[repr(float(f)), repr(float(d))] for f, d in zip(h.freqs, h.db)])
        outputs["eq_response"] = eq_path.name
    else:
        s, g, i, b = cfg.schedule, cfg.guidance, cfg.inner, cfg.block
        schedule = build_schedule(s.sigma_start, s.sigma_min, s.rho, s.steps, s.s_churn)
        g_cfg = GuidanceConfig(g.xi_prime, g.noise_reg_gamma, cfg.sampler_mode, g.weighting, g.regularize_filter_fit)
        i_cfg = InnerLoopConfig(
            i.iterations, AdamState.zeros(0, learning_rate=i.learning_rate), BcrConfig(i.beta, i.gamma_bcr),
            i.slope_lr_scale,
        )
        b_cfg = BlockArConfig(b.segment_length, b.overlap_fraction, b.reestimate_filter_per_block, b.carry_filter)
        block_len = min(b_cfg.segment_samples(sr), len(y))
        prior = GaussianPsdPrior.from_ltas(ref, next_pow2(block_len))
        init = load_filter(cfg.filter_init) if cfg.filter_init else init_default(sr)
        traces: list = []
        restored, filters = restore_recording(
            y, prior, schedule, g_cfg, i_cfg, b_cfg, ref, np.random.default_rng(cfg.seed),
            order=s.order, filter_init=init, traces=traces,
        )
        trace_path = _sidecar(out, ".trace.csv")
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for k, tr in enumerate(traces):
                tr.write_rows(w, header=(k == 0), block=k)
        filt_path = _sidecar(out, ".filters.csv")
        _write_csv(filt_path, *_filter_rows(filters))
        outputs.update(trace=trace_path.name, filters=filt_path.name)
        manifest["schedule_sigmas"] = [float(v) for v in schedule.sigmas]
        manifest["vjp_method"] = vjp_method(prior)
        manifest["prior"] = {"kind": "gaussian-psd", "n_fft": prior.n_fft}
        manifest["blocks"] = [{"filter": f.to_dict()} for f in filters]
        if cfg.mode == "babe2-ltas-obj":
            manifest["filter_relates"] = "equalized observations to restored audio"

    write_wav(out, restored, cfg.subtype)
    manifest["outputs"] = outputs
    manifest["output_sha256"] = _sha256(out)
    _dump_yaml(_sidecar(out, ".manifest.yaml"), manifest)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_degrade(args) -> int:
    problems = []
    if args.input is None:
        problems.append("input: required")
    if args.output is None:
        problems.append("output: required")
    try:
        snr = check_snr(args.snr)
    except ValidationError as exc:
        problems.extend(exc.problems)
    if args.subtype not in SUBTYPES:
        problems.append(f"subtype: must be one of {', '.join(SUBTYPES)}")
    if problems:
        raise ValidationError(problems)
    x = read_wav(args.input)
    if args.filter in FILTER_PRESETS:
        params = preset_filter(args.filter, x.sample_rate)
    elif Path(args.filter).exists():
        params = load_filter(args.filter)
    else:
        raise ValidationError([f"filter: {args.filter!r} is neither a preset ({', '.join(FILTER_PRESETS)}) nor a file"])
    seed = 0 if args.seed is None else args.seed
    unity = args.filter in UNITY_PRESETS
    y, _ = degrade_signal(x, None if unity else params, snr, np.random.default_rng(seed))
    out = Path(args.output)
    write_wav(out, y, args.subtype)
    _dump_yaml(_sidecar(out, ".filter.yaml"), sidecar_dict(params, snr, seed, str(args.input), unity))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_ltas(args) -> int:
    if args.output is None:
        raise ValidationError(["output: required"])
    files = expand_wavs(args.paths)
    if not files:
        raise ValidationError(["corpus is empty"])
    sr = read_wav(files[0]).sample_rate
    config = analysis_config(sr)
    key = corpus_key(files, config)
    out = Path(args.output)
    cache = _sidecar(out, f".{key[:16]}.npz")
    if cache.exists():
        profile = load_cache(cache)
    else:
        profile = corpus_ltas([(lambda f=f: read_wav(f)) for f in files], config, jobs=args.jobs or 1)
        save_cache(cache, profile)
    write_ltas_csv(out, profile)
    _dump_yaml(_sidecar(out, ".manifest.yaml"), {
        "command": "ltas",
        "version": __version__,
        "files": [str(f) for f in files],
        "corpus_key": key,
        "window_size": config.window_size,
        "hop_fraction": config.hop_fraction,
        "sample_rate": float(sr),
        "n_frames": int(profile.n_frames),
        "cache": cache.name,
    })
    print(f"wrote {out} ({len(files)} files, {profile.n_frames} frames)")
    return EXIT_OK


def cmd_eval(args) -> int:
    problems = []
    if args.reference is None:
        problems.append("reference: required")
    if args.output is None:
        problems.append("output: required")
    if problems:
        raise ValidationError(problems)
    files = expand_wavs(args.paths)
    if not files:
        raise ValidationError(["corpus is empty"])
    sr = read_wav(files[0]).sample_rate
    ref = load_reference(args.reference, sr, args.jobs or 1)

    def _one(f):
        return ltas_distance(compute_ltas(read_wav(f), ref.config), ref)

    jobs = args.jobs or 1
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            dists = list(pool.map(_one, files))
    else:
        dists = [_one(f) for f in files]
    mean = float(np.mean(dists))
    rows = [[str(f), repr(float(d))] for f, d in zip(files, dists)] + [["mean", repr(mean)]]
    _write_csv(args.output, ["file", "ltas_distance_db"], rows)
    width = max(len(r[0]) for r in rows)
    print(f"{'file':<{width}}  LTAS distance")
    for name, d in zip([r[0] for r in rows], dists + [mean]):
        print(f"{name:<{width}}  {d:8.2f} dB")
    return EXIT_OK


def _filter_from_file(path, block: int) -> FilterParams:
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValidationError([f"{path}: expected a mapping"])
    if "blocks" in data:
        blocks = data["blocks"]
        if not -len(blocks) <= block < len(blocks):
            raise ValidationError([f"block: {block} out of range for {len(blocks)} blocks"])
        data = blocks[block]["filter"]
    elif "filter" in data:
        data = data["filter"]
    return FilterParams.from_dict(data)


def cmd_show_filter(args) -> int:
    if args.output is None:
        raise ValidationError(["output: required"])
    if args.filter in FILTER_PRESETS:
        params = preset_filter(args.filter, args.sample_rate)
    elif Path(args.filter).exists():
        params = _filter_from_file(args.filter, args.block)
    else:
        raise ValidationError([f"filter: {args.filter!r} is neither a preset nor a file"])
    if args.points < 2:
        raise ValidationError(["points: need >= 2"])
    freqs = np.geomspace(params.f_min, args.sample_rate / 2.0, args.points)
    db = eval_response_db(params, freqs)
    _write_csv(args.output, ["frequency_hz", "gain_db"],
               [[f"{f:.6f}", f"{d:.6f}"] for f, d in zip(freqs, db)])
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=RUN_MODES)
    common.add_argument("--output", "-o")
    common.add_argument("--jobs", type=int, help="worker threads for corpus LTAS and evaluation")
    common.add_argument("--preset", choices=sorted(PRESETS))

    parser = argparse.ArgumentParser(prog="geneq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"geneq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("restore", parents=[common], help="restore a recording")
    p.add_argument("input", nargs="?", help="input WAV (overrides the config)")
    p.add_argument("--reference", help="reference LTAS: CSV, .npz cache, WAV or directory")

    p = sub.add_parser("degrade", parents=[common], help="simulate a degradation")
    p.add_argument("input")
    p.add_argument("--filter", default="gramophone", help=f"filter YAML or preset ({', '.join(FILTER_PRESETS)})")
    p.add_argument("--snr", default="inf", help="SNR in dB against the filtered signal; inf for none")
    p.add_argument("--subtype", default="float32", choices=SUBTYPES)

    p = sub.add_parser("ltas", parents=[common], help="reference LTAS of a corpus")
    p.add_argument("paths", nargs="+")

    p = sub.add_parser("eval", parents=[common], help="LTAS distance of files to a reference")
    p.add_argument("paths", nargs="+")
    p.add_argument("--reference", required=False)

    p = sub.add_parser("show-filter", parents=[common], help="tabulate a filter response")
    p.add_argument("filter", help="filter YAML, degrade sidecar, restore manifest or preset name")
    p.add_argument("--block", type=int, default=-1, help="block index when reading a manifest")
    p.add_argument("--sample-rate", type=float, default=44100.0)
    p.add_argument("--points", type=int, default=512)
    return parser


def _dispatch(args) -> int:
    if args.command == "restore":
        overrides = {"input": args.input, "output": args.output, "seed": args.seed, "mode": args.mode,
                     "jobs": args.jobs, "reference": args.reference}
        return cmd_restore(resolve_config(args.config, args.preset, overrides))
    return {"degrade": cmd_degrade, "ltas": cmd_ltas, "eval": cmd_eval, "show-filter": cmd_show_filter}[
        args.command
    ](args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"geneq: invalid: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"geneq: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"geneq: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GeneqError as exc:
        print(f"geneq: invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
