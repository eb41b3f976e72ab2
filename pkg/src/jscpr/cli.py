"""Command-line driver.

Subcommands:
  simulate <config>                  single-point run (first launch power)
  sweep <config>                     full launch-power x scheme sweep -> CSV
  complexity <config>                complexity table for the configured DSP
  train <config> --out FILE          train filters, save to a filter file
  apply --filters FILE --in WVFM --out CSV --config CFG
                                     run recovery on a stored waveform
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import load_config
from .core import Waveform
from .experiment import (apply_scheme, print_diagnostics, run_experiment,
                         run_point, simulate_point, write_csv)
from .iofmt import export_waveform, import_waveform, load_filters, save_filters
from .metrics import complexity, estimate_snr
from .recovery import jscpr_run, nlpc_apply, nlpc_train, ppnc_apply, ppnc_train
from .rx import cd_compensate, demodulate_subcarriers
from .experiment import _edge_guard_mask, _genie_agc  # shared helpers


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    power = cfg.run.launch_powers_dbm[0]
    rows, diags = run_point(cfg, power, record_timings=not args.no_timings)
    print_diagnostics(diags)
    for row in rows:
        print(f"{row['launch_power_dbm']:>7.2f} dBm  {row['scheme']:<6} "
              f"SNR {row['snr_db_aggregate']:.3f} dB")
    if args.out:
        write_csv(rows, args.out, 2 * cfg.subcarriers.count)
    return 0 if rows else 1


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    rows, diags = run_experiment(cfg, record_timings=not args.no_timings)
    print_diagnostics(diags)
    write_csv(rows, args.out, 2 * cfg.subcarriers.count)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0 if rows else 1


def _cmd_complexity(args) -> int:
    cfg = load_config(args.config)
    c_nlpc, c_ppnc, total = complexity(cfg.dsp.n_fft, cfg.dsp.n_c,
                                       cfg.subcarriers.count, cfg.dsp.n_d)
    print(f"stage 1 (intensity filter): {c_nlpc:8.2f} RM/2D")
    print(f"stage 2 (pilot filter bank): {c_ppnc:7.2f} RM/2D")
    print(f"total:                      {total:8.2f} RM/2D")
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    power = cfg.run.launch_powers_dbm[0]
    rx = simulate_point(cfg, power)
    guard = _edge_guard_mask(rx.train.n_symbols, cfg.sim.edge_guard_symbols)
    keep = None if guard is None else ~guard
    nlpc = nlpc_train(rx.train, cfg.dsp.n_c, cfg.dsp.n_fft,
                      ridge=cfg.dsp.ridge, sample_mask=keep)
    y_train, _ = nlpc_apply(rx.train, nlpc)
    from .experiment import train_ppnc_validated
    ppnc = train_ppnc_validated(y_train, cfg.pilots.schedule(), cfg.dsp,
                                sample_mask=keep,
                                guard=cfg.sim.edge_guard_symbols,
                                allow_fallback=False)
    save_filters(args.out, nlpc, ppnc)
    print(f"trained filters at {power} dBm written to {args.out}")
    return 0


def _cmd_apply(args) -> int:
    cfg = load_config(args.config)
    nlpc, ppnc = load_filters(args.filters)
    wf = import_waveform(getattr(args, "in"))
    plan = cfg.subcarriers.plan()
    schedule = cfg.pilots.schedule()
    fiber = cfg.fiber.params()
    if fiber.length_km > 0:
        wf = cd_compensate(wf, fiber)
    from .tx import ConstellationSpec, generate_frame, mb_lambda_for_entropy

    spec = ConstellationSpec.shaped_64qam(
        mb_lambda_for_entropy(cfg.constellation.entropy_bits))
    n_sym = wf.n_samples // cfg.sim.samples_per_symbol
    ref = generate_frame(np.random.SeedSequence([cfg.run.seeds.data_test, 1]),
                         n_sym, spec, plan, schedule)
    rx = demodulate_subcarriers(wf, plan, schedule,
                                known_symbols=ref.known_symbols)
    rx = _genie_agc(rx)
    z, _ = jscpr_run(rx, nlpc, ppnc, schedule)
    if ppnc is None:
        from .recovery import pilot_mean_phase_removal
        z = pilot_mean_phase_removal(z)
    snr = estimate_snr(z)
    with open(args.out, "w", newline="") as fh:
        cols = ["snr_db_aggregate"] + [
            f"snr_db_stream_{i+1}" for i in range(len(snr.per_stream_db))]
        fh.write(",".join(cols) + "\n")
        fh.write(",".join(f"{v:.6f}" for v in
                          [snr.aggregate_db, *snr.per_stream_db]) + "\n")
    print(f"aggregate SNR {snr.aggregate_db:.3f} dB -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jscpr",
                                description="Subcarrier-multiplexed coherent "
                                            "link simulator and phase recovery")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="single launch-power run")
    s.add_argument("config")
    s.add_argument("--out", default=None, help="optional CSV output path")
    s.add_argument("--no-timings", action="store_true",
                   help="write deterministic (zero) wall times")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("sweep", help="launch-power x scheme sweep")
    s.add_argument("config")
    s.add_argument("--out", default="sweep.csv")
    s.add_argument("--no-timings", action="store_true",
                   help="write deterministic (zero) wall times")
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("complexity", help="complexity table")
    s.add_argument("config")
    s.set_defaults(func=_cmd_complexity)

    s = sub.add_parser("train", help="train filters and save them")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("apply", help="apply stored filters to a waveform file")
    s.add_argument("--filters", required=True)
    s.add_argument("--in", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", required=True,
                   help="link config describing the stored waveform")
    s.set_defaults(func=_cmd_apply)

    s = sub.add_parser("export-waveform",
                       help="simulate the test frame and store the received "
                            "waveform")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_export)
    return p


def _cmd_export(args) -> int:
    from .channel import calibrate_raman, ssfm_propagate
    from .tx import (ConstellationSpec, apply_phase_noise, generate_frame,
                     mb_lambda_for_entropy, modulate_subcarriers)
    from .experiment import _derive_seed, _set_power

    cfg = load_config(args.config)
    plan = cfg.subcarriers.plan()
    schedule = cfg.pilots.schedule()
    spec = ConstellationSpec.shaped_64qam(
        mb_lambda_for_entropy(cfg.constellation.entropy_bits))
    frame = generate_frame(_derive_seed(cfg.run.seeds.data_test, 1),
                           cfg.sim.test_symbols, spec, plan, schedule)
    wf = _set_power(modulate_subcarriers(frame, plan,
                                         cfg.sim.samples_per_symbol),
                    cfg.run.launch_powers_dbm[0])
    laser = cfg.laser.spec()
    power = cfg.run.launch_powers_dbm[0]
    p_tag = int(round(power * 1000))
    if laser.linewidth > 0:
        wf = apply_phase_noise(wf, laser,
                               _derive_seed(cfg.run.seeds.phase, 1, p_tag, 0))
    fiber = cfg.fiber.params()
    if fiber.length_km > 0:
        raman = calibrate_raman(fiber, cfg.raman.params(), power,
                                cfg.raman.target_rx_power_dbm_per_channel)
        wf = ssfm_propagate(wf, fiber, raman, cfg.sim.step_config(),
                            noise_seed=_derive_seed(cfg.run.seeds.noise, 1,
                                                    p_tag))
    if laser.linewidth > 0:
        wf = apply_phase_noise(wf, laser,
                               _derive_seed(cfg.run.seeds.phase, 1, p_tag, 1))
    export_waveform(wf, args.out)
    print(f"wrote waveform to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
