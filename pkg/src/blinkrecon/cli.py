"""Command-line front end.

Each subcommand maps onto one library operation.  Data goes to files only;
logs go to standard error.  Exit codes: 0 success, 1 data error (bad or
missing input), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_range
from .grammar import block_entropy, recurrence_power_law, train_digrams, write_digrams, write_entropy, write_power_law
from .reconstruct import reconstruct_trace, write_plans
from .saccade import detect_saccades, read_saccades, saccade_summary, write_saccades
from .symbolic import build_saccade_contexts, extract_saccade_windows, write_space_csv
from .synth import SynthConfig, synthesize_trace
from .trace import TraceFormatError, parse_trace, read_word_boxes, write_trace, write_word_boxes
from .validate import (
    MEASURE_NAMES,
    artificial_blink_grid,
    blink_free_trials,
    compute_reading_measures,
    emit_report,
    grid_svg,
    merge_grids,
    write_grid_csv,
    write_measures_csv,
)

log = logging.getLogger("blinkrecon")


class DataError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError:
        raise DataError(f"missing file: {path}") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _fmt_of(path: str) -> str:
    return "json" if path.lower().endswith(".json") else "csv"


def _load_trace(args, cfg: RunConfig):
    text = _read(args.input)
    try:
        trace = parse_trace(text, _fmt_of(args.input))
    except TraceFormatError as exc:
        raise DataError(f"{args.input}: {exc}") from None
    boxes = getattr(args, "boxes", None)
    if boxes:
        try:
            wb = read_word_boxes(_read(boxes))
        except (ValueError, TypeError) as exc:
            raise DataError(f"{boxes}: bad word boxes ({exc})") from None
        if len(wb) != len(trace.trials):
            raise DataError(f"{boxes}: {len(wb)} box lists for {len(trace.trials)} trials")
        trace = trace.replace(word_boxes=wb)
    if abs(trace.tau_ms - cfg.tau_ms) > 1e-9:
        log.warning("trace sampling %.6g ms differs from config tau_ms %.6g", trace.tau_ms, cfg.tau_ms)
    return trace


def _config(args) -> RunConfig:
    cfg = load_config(_read_config(args.config)) if args.config else RunConfig()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "t_d", None) is not None:
        over["t_d_letters"] = args.t_d
    return cfg.replace(**over) if over else cfg


def _read_config(path: str) -> str:
    try:
        return _read(path)
    except DataError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> None:
    kw = dict(rng_seed=cfg.seed, n_trials=args.trials, tau_ms=cfg.tau_ms)
    if args.blink_rate is not None:
        kw["blink_rate_per_min"] = args.blink_rate
    if args.noise is not None:
        kw["fixation_noise_std_px"] = args.noise
    if args.blink_saccade_fraction is not None:
        kw["blink_saccade_fraction"] = args.blink_saccade_fraction
    try:
        scfg = SynthConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    trace, truth, blinks = synthesize_trace(scfg)
    _write(args.out, write_trace(trace, format=_fmt_of(args.out)))
    if args.truth:
        _write(args.truth, json.dumps(
            [{"t_sb_ms": e.t_sb, "t0_ms": e.t_0, "A_px": e.A, "direction": e.direction} for e in truth],
            indent=1) + "\n")
    if args.boxes:
        _write(args.boxes, write_word_boxes(trace.word_boxes))
    log.info("%d samples, %d trials, %d saccades, %d blinks", len(trace), len(trace.trials), len(truth), len(blinks))


def cmd_detect(args, cfg: RunConfig) -> None:
    trace = _load_trace(args, cfg)
    ev = detect_saccades(trace, threshold=cfg.saccade_threshold_px)
    _write(args.out, write_saccades(ev))
    s = saccade_summary(ev, trace.tau_ms)
    log.info("%d saccades (%d usable), mean t0 %s ms", len(ev), s["n"], s.get("mean_t0_ms"))


def _saccades(args, trace, cfg):
    if getattr(args, "saccades", None):
        try:
            return read_saccades(_read(args.saccades))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{args.saccades}: schema mismatch ({exc})") from None
    return detect_saccades(trace, threshold=cfg.saccade_threshold_px)


def cmd_grammar(args, cfg: RunConfig) -> None:
    trace = _load_trace(args, cfg)
    ev = [e for e in _saccades(args, trace, cfg) if not e.truncated]
    pre, post, skipped = extract_saccade_windows(trace, ev, cfg.t_d_letters)
    if not pre or not post:
        raise DataError("no complete pre/post windows to train on")
    tables = [train_digrams(pre, cfg.D_letters, "pre"), train_digrams(post, cfg.D_letters, "post")]
    _write(args.out, write_digrams(tables))
    log.info("trained on %d pre / %d post sequences (skipped %s)", len(pre), len(post), skipped)
    if args.space or args.power_law:
        ctx = build_saccade_contexts(trace, ev, cfg.t_d_letters, cfg.K)
        if args.space:
            _write(args.space, write_space_csv([ctx.xi, ctx.xi_pre, ctx.xi_post, ctx.xi_rec]))
        if args.power_law:
            if not ctx.words:
                raise DataError("no saccade contexts for the power law")
            eps = parse_range(args.epsilons)
            table, slope = recurrence_power_law(ctx.words, eps)
            _write(args.power_law, write_power_law(table))
            log.info("power-law exponent %.4f over %d contexts", slope, len(ctx.words))


def cmd_entropy(args, cfg: RunConfig) -> None:
    trace = _load_trace(args, cfg)
    ev = [e for e in _saccades(args, trace, cfg) if not e.truncated]
    tds = [int(t) for t in parse_range(args.td_range)]
    pre, post, _ = extract_saccade_windows(trace, ev, max(tds))
    seqs = post if args.side == "post" else pre
    prof = block_entropy(seqs, tds, cfg.entropy_delta_bits, align="start" if args.side == "post" else "end")
    _write(args.out, write_entropy(prof))
    log.info("L = %s letters (undersampled: %s)", prof.L, prof.undersampled)


def cmd_reconstruct(args, cfg: RunConfig) -> None:
    trace = _load_trace(args, cfg)
    filled, plans = reconstruct_trace(trace, cfg)
    _write(args.out, write_trace(filled, format=_fmt_of(args.out)))
    if args.plans:
        _write(args.plans, write_plans(plans))
    log.info("reconstructed %d blinks", len(plans))


def _grid_row(payload):
    trace, t_d, pbs, cfg, midpoint = payload
    return artificial_blink_grid(trace, [t_d], pbs, cfg, midpoint)


def _grid(args, trace, cfg):
    tds = [int(t) for t in parse_range(args.td or cfg.t_d_grid_letters)]
    pbs = parse_range(args.pb or cfg.P_B_ms)
    if not tds or not pbs:
        raise ConfigError("empty grid axes")
    if any(t % 2 or t < 2 * cfg.D_letters for t in tds):
        raise ConfigError("grid t_d values must be even and >= 2 * D_letters")
    jobs = max(1, args.jobs)
    payload = [(trace, t, pbs, cfg, args.midpoint) for t in tds]
    if jobs == 1:
        rows = [_grid_row(p) for p in payload]
    else:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_grid_row, payload))
    return merge_grids(rows)


def cmd_validate(args, cfg: RunConfig) -> None:
    trace = _load_trace(args, cfg)
    grid = _grid(args, trace, cfg)
    _write(args.out, write_grid_csv(grid))
    stem = os.path.splitext(args.out)[0]
    _write(args.svg or stem + "_sigma.svg", grid_svg(grid, "sigma"))
    _write(stem + "_beta.svg", grid_svg(grid, "beta"))


def _measures(trace, cfg, excluded: bool):
    if excluded:
        ev = detect_saccades(trace, threshold=cfg.saccade_threshold_px)
        return compute_reading_measures(trace, ev, trials=blink_free_trials(trace))
    filled, plans = reconstruct_trace(trace, cfg)
    ev = detect_saccades(filled, threshold=cfg.saccade_threshold_px)
    return compute_reading_measures(filled, ev)


def cmd_measures(args, cfg: RunConfig) -> None:
    trace = _load_trace(args, cfg)
    if trace.word_boxes is None:
        raise DataError("reading measures need word boxes (--boxes)")
    m = _measures(trace, cfg, excluded=args.mode == "exclude")
    _write(args.out, write_measures_csv(m))
    if args.summary:
        _write(args.summary, "measure,mean\n" + "".join(f"{k},{m.means[k]!r}\n" for k in MEASURE_NAMES))
    if m.outside_boxes:
        log.warning("%d fixations fell outside every word box (assigned to nearest)", m.outside_boxes)


def cmd_report(args, cfg: RunConfig) -> None:
    trace = _load_trace(args, cfg)
    grid = _grid(args, trace, cfg)
    measures = None
    if trace.word_boxes is not None:
        measures = {"blink_excluded": _measures(trace, cfg, True).means,
                    "reconstructed": _measures(trace, cfg, False).means}
    _, plans = reconstruct_trace(trace, cfg)
    for name, text in sorted(emit_report(grid, measures, plans).items()):
        _write(os.path.join(args.out_dir, name), text)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: usage error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat TOML file with run constants")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (validate/report)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="blinkrecon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"blinkrecon {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_, needs_input=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if needs_input:
            sp.add_argument("--in", dest="input", required=True, help="trace file (.csv or .json)")
            sp.add_argument("--boxes", help="word boxes JSON sidecar")
        sp.set_defaults(func=fn)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic reading trace", needs_input=False)
    sp.add_argument("--out", required=True)
    sp.add_argument("--truth", help="ground-truth saccades JSON")
    sp.add_argument("--boxes", help="word boxes JSON")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int, default=40)
    sp.add_argument("--blink-rate", type=float, help="blinks per minute")
    sp.add_argument("--blink-saccade-fraction", type=float)
    sp.add_argument("--noise", type=float, help="fixation noise std (px)")

    sp = add("detect", cmd_detect, "detect saccades")
    sp.add_argument("--out", required=True)

    sp = add("grammar", cmd_grammar, "train pre/post digram tables")
    sp.add_argument("--out", required=True)
    sp.add_argument("--saccades", help="saccade CSV (default: detect)")
    sp.add_argument("--td", dest="t_d", type=int, help="context length in letters")
    sp.add_argument("--space", help="symbolic-space points CSV")
    sp.add_argument("--power-law", help="recurrence rho(eps) CSV")
    sp.add_argument("--epsilons", default="0.001,0.002,0.004,0.008,0.016,0.032")

    sp = add("entropy", cmd_entropy, "block entropy profile and horizon L")
    sp.add_argument("--out", required=True)
    sp.add_argument("--saccades")
    sp.add_argument("--td-range", default="2:60:2")
    sp.add_argument("--side", choices=("pre", "post"), default="post")

    sp = add("reconstruct", cmd_reconstruct, "fill blinks")
    sp.add_argument("--out", required=True)
    sp.add_argument("--plans", help="plan report JSON")
    sp.add_argument("--td", dest="t_d", type=int)

    sp = add("validate", cmd_validate, "artificial-blink sigma/beta grid")
    sp.add_argument("--out", default="grid.csv")
    sp.add_argument("--svg", help="sigma heatmap path (beta goes next to --out)")
    sp.add_argument("--pb", help="P_B values in ms, a:b:step or list")
    sp.add_argument("--td", help="t_d values in letters, a:b:step or list")
    sp.add_argument("--midpoint", action="store_true", help="score the midpoint control instead")

    sp = add("measures", cmd_measures, "reading measures per word")
    sp.add_argument("--out", required=True)
    sp.add_argument("--summary", help="corpus means CSV")
    sp.add_argument("--mode", choices=("reconstruct", "exclude"), default="reconstruct")
    sp.add_argument("--td", dest="t_d", type=int, help="context length in letters for reconstruction")

    sp = add("report", cmd_report, "grid, measures and plan summary in one directory")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--pb")
    sp.add_argument("--td")
    sp.add_argument("--midpoint", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"blinkrecon: config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, TraceFormatError) as exc:
        print(f"blinkrecon: data error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"blinkrecon: data error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
