"""Command-line surface tying the modules together.

Every command honors --seed (flag beats the WIFIELD_SEED environment
variable) and writes a JSON run report next to its primary output, on
success and on failure. Exit codes: 0 success, 2 configuration error,
3 numeric failure. Images are binary PGM (P5), matrices CSV: both
inspectable without extra tooling.

Heavy imports happen inside command handlers so --threads can cap the
BLAS/OpenMP pools before NumPy initializes them.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("WIFIELD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"WIFIELD_SEED must be an unsigned integer: {env!r}") from exc
    return 0


class ConfigError(ValueError):
    pass


def _args_hash(args) -> str:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_report(out_path, command, args, seed, t0, outputs, metrics, error=None):
    report = {
        "command": command,
        "config_hash": _args_hash(args),
        "seed": seed,
        "wall_time_s": round(time.time() - t0, 3),
        "outputs": [str(p) for p in outputs],
        "metrics": metrics,
        "error": error,
    }
    path = str(out_path) + ".report.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)


def _write_pgm(path, image) -> None:
    import numpy as np

    img = np.asarray(image, dtype=float)
    lo, hi = img.min(), img.max()
    scaled = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
    data = (scaled * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


# --- command handlers ------------------------------------------------------


def cmd_forward(args, seed):
    import numpy as np

    from .forward import fieldset_to_dict, mimo_sweep
    from .greens import AntennaModel, layout_from_dict
    from .scene import load_scene

    scene = load_scene(args.scene)
    with open(args.array) as fh:
        layout = layout_from_dict(json.load(fh))
    model = AntennaModel(args.model)
    fs = mimo_sweep(scene, layout, model, method=args.method,
                    include_cells=args.full)
    with open(args.out, "w") as fh:
        json.dump(fieldset_to_dict(fs, full=args.full), fh)
    return [args.out], {"max_abs_e_s": float(np.abs(fs.e_s_rx).max())}


def cmd_oracle_cylinder(args, seed):
    import numpy as np

    from .forward import cylinder_oracle

    k0 = 2.0 * np.pi * args.freq / 299792458.0
    ring_r, ring_n = args.rx_ring
    ang = 2.0 * np.pi * np.arange(int(ring_n)) / int(ring_n)
    rx = np.column_stack([ring_r * np.cos(ang), ring_r * np.sin(ang)])
    e_s = cylinder_oracle(args.radius, args.eps_r, k0, tuple(args.source), rx)
    with open(args.out, "w") as fh:
        json.dump(
            {
                "rx": rx.tolist(),
                "e_scattered": np.stack([e_s.real, e_s.imag], -1).tolist(),
            },
            fh,
        )
    return [args.out], {"max_abs_e_s": float(np.abs(e_s).max())}


def cmd_compare_ray(args, seed):
    from .raybase import (
        RayComparisonConfig,
        compare_models,
        write_csv,
        write_summary,
    )

    cfg = RayComparisonConfig(
        frequency_hz=args.freq,
        eps_r=args.eps_r,
        l_over_lambda=tuple(args.l_values),
        d_values=tuple(args.d_values),
    )
    res = compare_models(cfg)
    write_csv(res, args.out)
    outputs = [args.out]
    if args.summary:
        write_summary(res, args.summary)
        outputs.append(args.summary)
    return outputs, res.summary()


def cmd_simulate(args, seed):
    from .forward import mimo_sweep
    from .greens import AntennaModel, layout_from_dict
    from .measure import (
        GainTable,
        NoiseConfig,
        load_gains,
        save_measurements,
        simulate_csi,
    )
    from .scene import load_scene

    import numpy as np

    scene = load_scene(args.scene)
    with open(args.array) as fh:
        layout = layout_from_dict(json.load(fh))
    model = AntennaModel(args.model)
    fs = mimo_sweep(scene, layout, model)
    gains = load_gains(args.gains) if args.gains else GainTable(
        g=np.ones((layout.n_tx, layout.n_rx))
    )
    noise = NoiseConfig(
        amp_noise_sigma=args.noise_sigma,
        packet_phase="uniform" if args.phase else "none",
        seed=seed,
    )
    ms = simulate_csi(
        fs.e_total_rx, gains, noise, args.samples,
        empty_scene=len(scene.targets) == 0,
    )
    save_measurements(ms, args.out)
    return [args.out], {"n_links": layout.n_tx * layout.n_rx, "samples": args.samples}


def cmd_calibrate(args, seed):
    from .greens import AntennaModel, layout_from_dict
    from .measure import calibrate_gains, load_measurements, save_gains

    ms = load_measurements(args.measurements)
    with open(args.array) as fh:
        layout = layout_from_dict(json.load(fh))
    gains = calibrate_gains(ms, layout, AntennaModel(args.model))
    save_gains(gains, args.out)
    return [args.out], {
        "g_min": float(gains.g.min()),
        "g_max": float(gains.g.max()),
    }


def cmd_invert_born(args, seed):
    import numpy as np

    from .greens import AntennaModel, OperatorSet, layout_from_dict
    from .invert import PreImage, save_preimage
    from .invert import born_invert
    from .scene import load_scene

    scene = load_scene(args.scene)
    with open(args.array) as fh:
        layout = layout_from_dict(json.load(fh))
    with open(args.fields) as fh:
        fields = json.load(fh)
    e_s = np.asarray(fields["e_scattered"], dtype=float)
    e_s = e_s[..., 0] + 1j * e_s[..., 1]  # (T, P, Q)
    ops = OperatorSet(scene.domain, layout, AntennaModel(args.model)).tone(
        args.tone, with_gs=False
    )
    chi = born_invert(e_s[args.tone], ops, args.alpha)
    n = scene.domain.n
    pre = PreImage(chi.reshape(1, n, n), scene.domain, {"tone": args.tone})
    save_preimage(pre, args.out)
    return [args.out], {"max_abs_chi": float(np.abs(chi).max())}


def cmd_invert_phaseless(args, seed):
    import numpy as np

    from .greens import AntennaModel, OperatorSet, layout_from_dict
    from .invert import InversionConfig, pre_identify, save_preimage
    from .measure import calibrate_gains, load_gains, load_measurements, normalize_total_field
    from .scene import load_scene, rasterize

    scene = load_scene(args.scene)
    with open(args.array) as fh:
        layout = layout_from_dict(json.load(fh))
    ms = load_measurements(args.measurements)
    model = AntennaModel(args.model)
    gains = load_gains(args.gains) if args.gains else None
    if gains is None:
        from .measure import GainTable

        gains = GainTable(g=np.ones((layout.n_tx, layout.n_rx)))
    amps = normalize_total_field(ms, gains)
    labels = None
    if args.labels_from_scene:
        _, lab = rasterize(scene)
        labels = (lab.ravel() > 0).astype(float)
    config = InversionConfig(
        alpha=args.alpha, max_iters=args.iters, step_size=args.step,
        optimizer=args.optimizer, seed=seed,
    )
    opset = OperatorSet(scene.domain, layout, model)
    tone_ops = [opset.tone(t, with_gs=False) for t in range(layout.n_tones)]
    pre = pre_identify(amps, tone_ops, config, labels=labels)
    save_preimage(pre, args.out)
    return [args.out], {"max_abs_chi": float(np.abs(pre.chi).max())}


def cmd_gen_dataset(args, seed):
    from .dataset import DatasetConfig, build_dataset, desk_scale_config
    from dataclasses import replace

    if args.scale == "desk":
        config = desk_scale_config(seed=seed)
    else:
        config = DatasetConfig(seed=seed)
    config = replace(
        config,
        split_mode=args.split,
        train_fraction=args.train_fraction,
    )
    if args.reps is not None:
        config = replace(config, reps=args.reps)
    if args.tones is not None:
        config = replace(config, n_tones=args.tones)
    manifest = build_dataset(config, args.out, limit_records=args.limit)
    out_path = os.path.join(args.out, "manifest.json")
    n_err = sum(1 for r in manifest.records if r["error"])
    return [out_path], {
        "records": len(manifest.records),
        "errors": n_err,
        "complete": manifest.complete,
    }


def cmd_render(args, seed):
    import numpy as np

    from .invert import load_preimage

    pre = load_preimage(args.chi)
    if not 0 <= args.tone < pre.chi.shape[0]:
        raise ConfigError(
            f"tone {args.tone} out of range [0, {pre.chi.shape[0]})"
        )
    _write_pgm(args.out, np.abs(pre.chi[args.tone]))
    return [args.out], {"tones": pre.chi.shape[0], "n": pre.chi.shape[1]}


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wifield",
        description="2D electromagnetic inverse scattering for WiFi-band sensing",
    )
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (beats WIFIELD_SEED; default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/OpenMP worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("forward", help="forward MoM sweep over tones and tx")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--array", required=True)
    sp.add_argument("--model", default="antenna3d", choices=["antenna3d", "line2d"])
    sp.add_argument("--method", default="auto", choices=["auto", "dense", "fft"])
    sp.add_argument("--full", action="store_true", help="include cell fields")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_forward)

    sp = sub.add_parser("oracle-cylinder", help="analytic cylinder scattered field")
    sp.add_argument("--radius", type=float, required=True)
    sp.add_argument("--eps-r", type=float, required=True)
    sp.add_argument("--freq", type=float, required=True)
    sp.add_argument("--source", type=float, nargs=2, required=True)
    sp.add_argument("--rx-ring", type=float, nargs=2, required=True,
                    metavar=("RADIUS", "COUNT"))
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_oracle_cylinder)

    sp = sub.add_parser("compare-ray", help="ray model vs field model error sweep")
    sp.add_argument("--freq", type=float, default=5e9)
    sp.add_argument("--eps-r", type=float, default=10.0)
    sp.add_argument("--l-values", type=float, nargs="+",
                    default=[0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 15.0])
    sp.add_argument("--d-values", type=float, nargs="+",
                    default=[0.1, 0.2, 0.3, 0.4, 0.5])
    sp.add_argument("--out", required=True)
    sp.add_argument("--summary", default=None)
    sp.set_defaults(func=cmd_compare_ray)

    sp = sub.add_parser("simulate", help="simulate CSI measurements")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--array", required=True)
    sp.add_argument("--model", default="antenna3d", choices=["antenna3d", "line2d"])
    sp.add_argument("--gains", default=None, help="gain-table JSON (default unit gains)")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--noise-sigma", type=float, default=0.0)
    sp.add_argument("--phase", action="store_true", help="apply per-packet phase")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("calibrate", help="estimate link gains from empty-scene data")
    sp.add_argument("--measurements", required=True)
    sp.add_argument("--array", required=True)
    sp.add_argument("--model", default="antenna3d", choices=["antenna3d", "line2d"])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("invert-born", help="complex-data Born inversion (single tone)")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--array", required=True)
    sp.add_argument("--fields", required=True, help="forward-output JSON")
    sp.add_argument("--tone", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=1e-6)
    sp.add_argument("--model", default="antenna3d", choices=["antenna3d", "line2d"])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_invert_born)

    sp = sub.add_parser("invert-phaseless", help="phaseless pre-identification")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--array", required=True)
    sp.add_argument("--measurements", required=True)
    sp.add_argument("--gains", default=None)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--iters", type=int, default=500)
    sp.add_argument("--step", type=float, default=1e-2)
    sp.add_argument("--optimizer", default="adam", choices=["adam", "lbfgs"])
    sp.add_argument("--labels-from-scene", action="store_true")
    sp.add_argument("--model", default="antenna3d", choices=["antenna3d", "line2d"])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_invert_phaseless)

    sp = sub.add_parser("gen-dataset", help="generate a labeled training dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--scale", default="full", choices=["full", "desk"])
    sp.add_argument("--split", default="iid", choices=["iid", "position_held_out"])
    sp.add_argument("--train-fraction", type=float, default=0.8)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--tones", type=int, default=None)
    sp.add_argument("--limit", type=int, default=None,
                    help="materialize at most this many records")
    sp.set_defaults(func=cmd_gen_dataset)

    sp = sub.add_parser("render", help="render a pre-image tone slice to PGM")
    sp.add_argument("--chi", required=True, help=".wfld file")
    sp.add_argument("--tone", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    t0 = time.time()
    out_path = getattr(args, "out", None)
    try:
        seed = _resolve_seed(args)
        outputs, metrics = args.func(args, seed)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if out_path:
            _write_report(out_path, args.command, args, None, t0, [], {}, str(exc))
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if out_path:
            _write_report(out_path, args.command, args, None, t0, [], {}, str(exc))
        return EXIT_CONFIG
    except RuntimeError as exc:  # NumericError and solver failures
        print(f"numeric failure: {exc}", file=sys.stderr)
        if out_path:
            _write_report(out_path, args.command, args, None, t0, [], {}, str(exc))
        return EXIT_NUMERIC
    _write_report(outputs[0], args.command, args, seed, t0, outputs, metrics)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
