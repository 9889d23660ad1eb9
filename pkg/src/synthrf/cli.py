"""Command-line front end: channel generation, waveform synthesis, spectrum
export, and receiver runs.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import cdma, channel, iqio, prn, prs, receiver

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class ConfigError(Exception):
    pass


def _load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return cfg[key]


def _parse_channel_spec(cfg: dict, seed_override: int | None) -> channel.ChannelSpec:
    sources = []
    for i, src in enumerate(_require(cfg, "sources", "channel spec")):
        where = f"channel spec source[{i}]"
        paths = []
        for j, p in enumerate(_require(src, "paths", where)):
            k = p.get("rician_k_db")
            paths.append(channel.PathSpec(
                initial_delay_s=_require(p, "initial_delay_s", f"{where} path[{j}]"),
                delay_rate=p.get("delay_rate", 0.0),
                mean_power_db=p.get("mean_power_db", 0.0),
                doppler_hz=p.get("doppler_hz", 0.0),
                rician_k=math.inf if k is None else 10.0 ** (k / 10.0),
                fading_doppler_hz=p.get("fading_doppler_hz", 0.0)))
        sources.append(channel.SourceSpec(
            source_id=str(_require(src, "id", where)),
            kind=_require(src, "kind", where),
            los=bool(_require(src, "los", where)),
            paths=tuple(paths)))
    seed = seed_override if seed_override is not None else _require(cfg, "seed", "channel spec")
    return channel.ChannelSpec(sources=tuple(sources),
                               update_rate_hz=cfg.get("f_ch_hz", 40e3),
                               duration_s=cfg.get("duration_s", 0.4),
                               seed=int(seed))


def cmd_gen_channel(args) -> int:
    spec = _parse_channel_spec(_load_json(args.spec), args.seed)
    channels = channel.generate_synthetic_channel(spec)
    channel.store_channel(channels, args.out)
    for src in channels.sources:
        powers = [float(np.mean(np.abs(p.coefficients) ** 2)) for p in src.paths]
        total_db = 10.0 * math.log10(sum(powers))
        print(f"{src.source_id}: kind={src.source_kind} los={int(src.los)} "
              f"paths={len(src.paths)} mean_power={total_db:+.2f} dB")
    print(f"wrote {args.out}")
    return EXIT_OK


def _ground_truth(channels: channel.ChannelSet, source_ids, f_ch: float) -> list[dict]:
    d_min = min(p.delays_s[0] for sid in source_ids
                for p in channels.source(sid).paths)
    truth = []
    for sid in source_ids:
        src = channels.source(sid)
        path0 = src.paths[0]
        # Doppler from the mean phase increment of the first path
        rot = path0.coefficients[1:] * np.conj(path0.coefficients[:-1])
        doppler = float(np.angle(np.sum(rot)) * f_ch / (2.0 * np.pi))
        truth.append({"source_id": sid, "los": src.los,
                      "delay_s": float(path0.delays_s[0] - d_min),
                      "doppler_hz": doppler})
    return truth


def cmd_synthesize(args) -> int:
    cfg = _load_json(args.config)
    channels = channel.load_channel(args.channel)
    if args.kind == "cdma":
        sources = [(int(s["prn_id"]), str(s["source_id"]))
                   for s in _require(cfg, "sources", "cdma config")]
        gen = cdma.CdmaGenConfig(
            f_s_hz=cfg.get("f_s_hz", 38.192e6),
            f_if_hz=cfg.get("f_if_hz", 9.548e6),
            r_c_hz=cfg.get("r_c_hz", 1.023e6),
            t_d_s=cfg.get("t_d_s", 0.020),
            duration_s=_require(cfg, "duration_s", "cdma config"),
            sources=tuple(sources),
            data_seed=int(cfg.get("data_seed", args.seed or 0)),
            noise_power_dbw=cfg.get("noise_power_dbw", -math.inf),
            noise_seed=int(cfg.get("noise_seed", 1)))
        buf = cdma.synthesize(gen, channels)
        truth = _ground_truth(channels, [sid for _, sid in sources],
                              channels.update_rate_hz)
        for entry, (prn_id, _) in zip(truth, sources):
            entry["prn_id"] = prn_id
        meta = {"kind": "cdma", "f_if_hz": gen.f_if_hz, "r_c_hz": gen.r_c_hz,
                "t_d_s": gen.t_d_s, "data_seed": gen.data_seed,
                "noise_seed": gen.noise_seed, "ground_truth": truth}
    elif args.kind == "prs":
        carrier_cfg = cfg.get("carrier", {})
        carrier = prs.CarrierConfig(
            n_cell_id=int(carrier_cfg.get("n_cell_id", 0)),
            scs_hz=carrier_cfg.get("scs_hz", 15e3),
            n_rb=int(carrier_cfg.get("n_rb", 52)),
            n_fft=int(carrier_cfg.get("n_fft", 1024)))
        resources = {}
        for i, src in enumerate(_require(cfg, "sources", "prs config")):
            sid = str(_require(src, "source_id", f"prs config source[{i}]"))
            resources[sid] = prs.PrsResourceConfig(
                resource_set_period_slots=int(src.get("resource_set_period_slots", 10)),
                resource_offset_slots=int(src.get("resource_offset_slots", 0)),
                resource_repetition=int(src.get("resource_repetition", 1)),
                resource_time_gap_slots=int(src.get("resource_time_gap_slots", 1)),
                muting_pattern=src.get("muting_pattern"),
                comb_size=int(src.get("comb_size", 2)),
                comb_offset=int(src.get("comb_offset", 0)),
                num_symbols=int(src.get("num_symbols", 2)),
                symbol_start=int(src.get("symbol_start", 0)),
                n_prs_id=int(src.get("n_prs_id", 0)),
                n_rb_prs=int(src.get("n_rb_prs", carrier.n_rb)))
        seed = int(cfg.get("seed", args.seed or 0))
        buf = prs.synthesize_gnb(
            carrier, resources, channels,
            duration_s=_require(cfg, "duration_s", "prs config"), seed=seed,
            with_pdsch=bool(cfg.get("with_pdsch", True)),
            noise_power_dbw=cfg.get("noise_power_dbw", -math.inf),
            noise_seed=int(cfg.get("noise_seed", 1)))
        truth = _ground_truth(channels, list(resources), channels.update_rate_hz)
        meta = {"kind": "prs", "seed": seed,
                "numerology": {"scs_hz": carrier.scs_hz, "n_fft": carrier.n_fft,
                               "n_rb": carrier.n_rb,
                               "sample_rate_hz": carrier.sample_rate_hz},
                "ground_truth": truth}
    else:
        raise ConfigError(f"unknown waveform kind {args.kind!r}")
    iqio.write_iq(args.out, buf, metadata=meta, fmt=args.format)
    print(f"wrote {len(buf)} samples at {buf.sample_rate_hz:.6g} Hz to {args.out}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    channels = channel.load_channel(args.channel)
    try:
        src = channels.source(args.source)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    result = channel.doppler_spectrum(src, channels.update_rate_hz, nfft=args.nfft)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "power_db"])
        for f, p in zip(result.freqs_hz, result.power_db):
            writer.writerow([f"{float(f)!r}", f"{float(p)!r}"])
    print(f"peak {result.peak_freq_hz:+.1f} Hz at {result.peak_power_db:.1f} dB; "
          f"wrote {args.out}")
    return EXIT_OK


def _parse_prn_list(text: str) -> list[int]:
    try:
        prns = [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad PRN list {text!r}") from exc
    if not prns:
        raise ConfigError("empty PRN list")
    return prns


def _truth_by_prn(meta: dict) -> dict[int, dict]:
    return {int(t["prn_id"]): t for t in meta.get("ground_truth", [])
            if "prn_id" in t}


def cmd_acquire(args) -> int:
    buf, meta = iqio.read_iq(args.iq)
    acq_cfg = receiver.AcquisitionConfig(snr_threshold_db=args.snr_threshold)
    truth = _truth_by_prn(meta)
    r_c = float(meta.get("r_c_hz", 1.023e6))
    rows = []
    for prn_id in _parse_prn_list(args.prn):
        code = prn.generate_ca_code(prn_id, chipping_rate_hz=r_c)
        res = receiver.acquire(buf, code, acq_cfg)
        row = {"prn_id": prn_id, "acquired": int(res.acquired),
               "code_phase_samples": res.code_phase_samples,
               "coarse_freq_hz": res.coarse_freq_hz,
               "fine_freq_hz": res.fine_freq_hz, "snr_db": res.snr_db}
        if prn_id in truth:
            t = truth[prn_id]
            row["code_phase_error_samples"] = (
                res.code_phase_samples
                - round(t["delay_s"] * buf.sample_rate_hz))
            row["doppler_error_hz"] = res.fine_freq_hz - t["doppler_hz"]
        rows.append(row)
        state = "acquired" if res.acquired else "rejected"
        print(f"PRN {prn_id:02d}: {state} snr={res.snr_db:.1f} dB "
              f"tau={res.code_phase_samples} f={res.coarse_freq_hz:+.0f} Hz")
    _write_csv_rows(args.out, rows)
    return EXIT_OK


def cmd_track(args) -> int:
    buf, meta = iqio.read_iq(args.iq)
    acq_cfg = receiver.AcquisitionConfig(snr_threshold_db=args.snr_threshold)
    trk_cfg = receiver.TrackingConfig()
    truth = _truth_by_prn(meta)
    r_c = float(meta.get("r_c_hz", 1.023e6))
    rows = []
    for prn_id in _parse_prn_list(args.prn):
        code = prn.generate_ca_code(prn_id, chipping_rate_hz=r_c)
        res = receiver.acquire(buf, code, acq_cfg)
        if not res.acquired:
            print(f"PRN {prn_id:02d}: not acquired (snr={res.snr_db:.1f} dB), skipped")
            continue
        trace = receiver.track(buf, code, res, trk_cfg)
        t = truth.get(prn_id)
        for i in range(len(trace)):
            row = {"prn_id": prn_id, "epoch_s": trace.epoch_s[i],
                   "code_delay_samples": trace.code_delay_samples[i],
                   "doppler_hz": trace.doppler_hz[i],
                   "prompt_i": trace.prompt_i[i], "prompt_q": trace.prompt_q[i],
                   "dll_discriminator": trace.dll_discriminator[i],
                   "pll_discriminator": trace.pll_discriminator[i]}
            if t is not None:
                row["doppler_error_hz"] = trace.doppler_hz[i] - t["doppler_hz"]
            rows.append(row)
        print(f"PRN {prn_id:02d}: tracked {len(trace)} epochs, "
              f"final doppler {trace.doppler_hz[-1]:+.1f} Hz"
              + (" [loss of lock]" if trace.loss_of_lock else ""))
    _write_csv_rows(args.out, rows)
    return EXIT_OK


def _write_csv_rows(path, rows: list[dict]) -> None:
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthrf",
        description="Synthetic satellite/HAPS/gNB waveform generation and validation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-channel", help="generate a synthetic channel file")
    p.add_argument("--spec", required=True, help="channel spec JSON")
    p.add_argument("--out", required=True, help="output channel file (.bin for binary)")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=cmd_gen_channel)

    p = sub.add_parser("synthesize", help="synthesize a waveform through a channel")
    p.add_argument("kind", choices=["cdma", "prs"])
    p.add_argument("--config", required=True, help="waveform config JSON")
    p.add_argument("--channel", required=True, help="channel file")
    p.add_argument("--out", required=True, help="output I/Q file")
    p.add_argument("--format", choices=list(iqio.FORMATS), default="f32")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("spectrum", help="export a Doppler spectrum as CSV")
    p.add_argument("--channel", required=True)
    p.add_argument("--source", required=True, help="source id")
    p.add_argument("--nfft", type=int, default=1024)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("acquire", help="run acquisition on an I/Q recording")
    p.add_argument("--iq", required=True)
    p.add_argument("--prn", required=True, help="comma-separated PRN list")
    p.add_argument("--snr-threshold", type=float, default=25.0)
    p.add_argument("--out", required=True, help="results CSV")
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("track", help="acquire and track PRNs from an I/Q recording")
    p.add_argument("--iq", required=True)
    p.add_argument("--prn", required=True, help="comma-separated PRN list")
    p.add_argument("--snr-threshold", type=float, default=25.0)
    p.add_argument("--out", required=True, help="trace CSV")
    p.set_defaults(func=cmd_track)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
