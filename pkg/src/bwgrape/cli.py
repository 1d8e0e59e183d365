"""Command-line front end.

Every command reads a JSON run configuration (``--config``; a bare name such
as ``quartz_pi2`` selects a shipped config). Frequencies in configs are in Hz
and durations in seconds, as the field-name suffixes say; they are converted
to rad/s internally.

Exit codes: 0 success, 2 usage or configuration error, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from bwgrape import analysis, grape, kernels
from bwgrape.propagate import step_propagator
from bwgrape.resonator import (
    Circuit,
    MeasuredResponse,
    ResonatorKind,
    ResonatorModel,
    derive_transients,
    distort,
    ringdown_energy,
)
from bwgrape.spinsys import (
    SIGMA_I,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    EnsembleMember,
    HyperfineParams,
    ensemble_grid,
    hyperfine_eigensystem,
    hyperfine_system,
    single_spin_system,
    with_carrier_on_14,
)

log = logging.getLogger("bwgrape")

TWO_PI = 2.0 * math.pi
EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 2, 3
COMMANDS = ("optimize", "fid", "map", "spectrum", "distort", "resonator-info")
_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

# GrapeConfig fields that may be given verbatim in the "grape"/"refine" blocks
_PLAIN_GRAPE_FIELDS = {
    "n_steps", "n_s", "target_fidelity", "max_iters", "epsilon_trials", "rng_seed",
    "init_scale", "compensate", "c_max", "ring_peak_tol", "quadrature", "tophat_overlap",
    "comp_gradient", "direction", "lbfgs_memory", "n_starts", "stall_window", "stall_tol",
    "infidelity_power", "grad_tol",
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# --- configuration -----------------------------------------------------------


def load_config(spec: str) -> tuple[dict, Path]:
    """Read a config file, or a shipped config by bare name; returns (dict, base directory)."""
    path = Path(spec)
    if not path.exists() and path.suffix == "" and len(path.parts) == 1:
        shipped = resources.files("bwgrape") / "configs" / f"{spec}.json"
        if shipped.is_file():
            return _parse(shipped.read_text(), spec), Path.cwd()
    if not path.is_file():
        raise ConfigError(f"config file not found: {spec}")
    return _parse(path.read_text(), str(path)), path.resolve().parent


def _parse(text: str, name: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{name}: malformed JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{name}: top level must be an object")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _block(cfg: dict, key: str, required: bool = True) -> dict:
    blk = cfg.get(key)
    if blk is None:
        if required:
            raise ConfigError(f"missing '{key}' block")
        return {}
    if not isinstance(blk, dict):
        raise ConfigError(f"'{key}' must be an object")
    return blk


def _get(blk: dict, key: str, ctx: str):
    if key not in blk:
        raise ConfigError(f"missing '{ctx}.{key}'")
    return blk[key]


@dataclass
class Setup:
    """Everything built from a config: system, ensemble, target, resonator, optimizer stages."""

    system: object
    members: list
    u_desired: np.ndarray
    resonator: Optional[ResonatorModel]
    stages: list
    info: dict


def _target(sys_blk: dict, kind: str) -> np.ndarray:
    tgt = sys_blk.get("target", {})
    axis = str(tgt.get("axis", "x")).lower()
    if axis not in _PAULI:
        raise ConfigError(f"target axis must be x, y or z, got {axis!r}")
    angle = float(tgt.get("angle_rad", math.pi / 2 if kind == "single_spin" else math.pi))
    gen = _PAULI[axis]
    if kind == "hyperfine":
        gen = np.kron(gen, SIGMA_I)
    return step_propagator(0.5 * angle * gen, 1.0)


def _system(cfg: dict):
    blk = _block(cfg, "system")
    kind = blk.get("kind", "single_spin")
    info: dict = {"kind": kind}
    if kind == "single_spin":
        system = single_spin_system(bool(blk.get("quadrature", False)))
    elif kind == "hyperfine":
        params = HyperfineParams(
            TWO_PI * float(_get(blk, "omega_ze_hz", "system")),
            TWO_PI * float(_get(blk, "omega_zn_hz", "system")),
            TWO_PI * float(_get(blk, "omega_zz_hz", "system")),
            TWO_PI * float(_get(blk, "omega_zx_hz", "system")),
        )
        carrier = blk.get("carrier", "transition_14")
        if carrier == "transition_14":
            params = with_carrier_on_14(params)
        else:
            params = HyperfineParams(*params[:4], carrier=TWO_PI * float(carrier))
        eig = hyperfine_eigensystem(params)
        system = hyperfine_system(params)
        info.update(
            carrier_hz=params.carrier / TWO_PI,
            transition_14_hz=eig.transition_14 / TWO_PI,
            transition_23_hz=eig.transition_23 / TWO_PI,
            splitting_hz=eig.splitting / TWO_PI,
        )
    else:
        raise ConfigError(f"unknown system kind {kind!r}")
    return system, _target(blk, kind), info


def _ensemble(cfg: dict) -> list:
    blk = _block(cfg, "ensemble", required=False)
    if not blk:
        return [EnsembleMember()]
    offs = blk.get("offsets_hz", [0.0])
    if isinstance(offs, dict):
        start, stop, step = (float(_get(offs, k, "ensemble.offsets_hz")) for k in ("start", "stop", "step"))
        if not step > 0 or stop < start:
            raise ConfigError("ensemble.offsets_hz needs step > 0 and stop >= start")
        n = int(round((stop - start) / step)) + 1
        offs = start + step * np.arange(n)
    scales = blk.get("scales", [1.0])
    return ensemble_grid(TWO_PI * np.asarray(offs, dtype=float), scales)


def resonator_from_block(blk: dict, base: Path, carrier_radps: Optional[float] = None) -> Optional[ResonatorModel]:
    kind = blk.get("kind", "exponential")
    if kind in (None, "none"):
        return None
    q = float(_get(blk, "q", "resonator"))
    f0 = blk.get("f0_hz", "carrier")
    if f0 == "carrier":
        if carrier_radps is None:
            raise ConfigError("resonator.f0_hz = 'carrier' needs a system with a carrier")
        omega0 = carrier_radps
    else:
        omega0 = TWO_PI * float(f0)
    drive = blk.get("drive_hz")
    drive = None if drive is None else TWO_PI * float(drive)
    if kind == "exponential":
        return ResonatorModel(ResonatorKind.EXPONENTIAL, q, omega0, drive)
    if kind == "full_pole":
        c = _get(blk, "circuit", "resonator")
        circuit = Circuit(
            r=float(_get(c, "r_ohm", "resonator.circuit")),
            inductance_l=float(_get(c, "l_h", "resonator.circuit")),
            cap_tune=float(_get(c, "c_tune_f", "resonator.circuit")),
            cap_match=float(_get(c, "c_match_f", "resonator.circuit")),
            big_r0=float(c.get("r0_ohm", 50.0)),
        )
        return ResonatorModel(ResonatorKind.FULL_POLE, q, omega0, drive, circuit=circuit)
    if kind == "measured":
        path = Path(_get(blk, "file", "resonator"))
        if not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise ConfigError(f"measured response file not found: {path}")
        return ResonatorModel(ResonatorKind.MEASURED, q, omega0, drive, measured=MeasuredResponse.from_csv(path))
    raise ConfigError(f"unknown resonator kind {kind!r}")


def _grape_kwargs(blk: dict, ctx: str) -> dict:
    out = {}
    for key, val in blk.items():
        if key in _PLAIN_GRAPE_FIELDS:
            out[key] = tuple(val) if key == "epsilon_trials" else val
        elif key == "dt_s":
            out["dt"] = float(val)
        elif key == "amp_max_hz":
            out["amp_max"] = TWO_PI * float(val)
        elif key == "epsilon_init":
            out["epsilon_init"] = None if val is None else float(val)
        elif key == "comp_amp_max_hz":
            out["comp_amp_max"] = TWO_PI * float(val)
        elif key in ("ring_window_s", "time_limit_s"):
            out[key[:-2]] = None if val is None else float(val)
        elif key not in ("deadtime_s", "n_r"):
            raise ConfigError(f"unknown field '{ctx}.{key}'")
    return out


def build_setup(cfg: dict, base: Path, seed: Optional[int] = None) -> Setup:
    """Build system, ensemble, resonator and optimizer stages; bad values raise ConfigError."""
    try:
        return _build_setup(cfg, base, seed)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def _build_setup(cfg: dict, base: Path, seed: Optional[int]) -> Setup:
    system, ud, info = _system(cfg)
    members = _ensemble(cfg)
    carrier = TWO_PI * info["carrier_hz"] if "carrier_hz" in info else None
    res = resonator_from_block(_block(cfg, "resonator"), base, carrier)
    g = _block(cfg, "grape")
    kw = _grape_kwargs(g, "grape")
    for key in ("n_steps", "dt", "amp_max"):
        if key not in kw:
            raise ConfigError(f"grape block needs n_steps, dt_s and amp_max_hz (missing {key})")
    n_s = int(kw.get("n_s", 1))
    if n_s < 1:
        raise ConfigError("grape.n_s must be >= 1")
    dead = float(g.get("deadtime_s", 0.0))
    n_dead = int(round(dead / (kw["dt"] / n_s)))
    slot = int(kw.get("c_max", 1)) * n_s if kw.get("compensate") else 0
    kw["n_r"] = int(g.get("n_r", slot + n_dead))
    if seed is not None:
        kw["rng_seed"] = int(seed)
    stages = [grape.GrapeConfig(**kw)]
    refine = cfg.get("refine")
    if refine:
        stages.append(grape.GrapeConfig(**{**kw, **_grape_kwargs(_block(cfg, "refine"), "refine")}))
    info.update(n_dead=n_dead, deadtime_s=dead)
    return Setup(system, members, ud, res, stages, info)


# --- pulse files ---------------------------------------------------------------


def write_pulse(path: Path, u, config: grape.GrapeConfig, comp: grape.CompensationSegment, info: dict) -> None:
    doc = {
        "dt_s": config.dt,
        "amp_max_radps": config.amp_max,
        "n_s": config.n_s,
        "n_r": config.n_r,
        "samples": [[float(z.real), float(z.imag)] for z in np.asarray(u)],
        "compensation": {
            "dur_s": comp.n_samples * config.sample_dt if comp.n_samples else 0.0,
            "n_samples": comp.n_samples,
            "re": float(complex(comp.amplitude).real),
            "im": float(complex(comp.amplitude).imag),
        },
        "deadtime_s": info.get("deadtime_s", 0.0),
    }
    path.write_text(json.dumps(doc, indent=1) + "\n")


def read_pulse(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError(f"pulse file not found: {path}")
    try:
        doc = json.loads(path.read_text())
        doc["u"] = np.array([complex(re, im) for re, im in doc["samples"]])
        doc["comp_n"] = int(doc["compensation"].get("n_samples", 0))
        doc["comp_amp"] = complex(doc["compensation"]["re"], doc["compensation"]["im"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid pulse file ({exc})") from None
    return doc


def pulse_waveform(doc: dict, setup: Setup):
    """Rebuild ``(u_tilde, v_full, sample_dt, n_periods)`` from a pulse file."""
    cfg = replace(
        setup.stages[0], n_steps=len(doc["u"]), dt=float(doc["dt_s"]), n_s=int(doc["n_s"]), n_r=int(doc["n_r"])
    )
    prob = grape.Problem.from_resonator(setup.system, setup.members, setup.u_desired, cfg, setup.resonator)
    u_tilde = grape.resample(doc["u"], cfg.n_s, cfg.n_r, cfg.dt).u_tilde
    if doc["comp_n"]:
        seg = grape.CompensationSegment(doc["comp_n"], cfg.sample_dt, doc["comp_amp"])
        u_tilde = grape.apply_compensation(u_tilde, cfg.comp_start, seg)
    padded = np.zeros(len(prob.h), dtype=complex)
    padded[: len(u_tilde)] = u_tilde
    return u_tilde, distort(prob.h, padded), cfg.sample_dt, cfg.n_periods


def write_waveform_csv(path: Path, v, sample_dt: float) -> None:
    lines = ["t_s,re,im"]
    lines += [f"{fmt(i * sample_dt)},{fmt(z.real)},{fmt(z.imag)}" for i, z in enumerate(np.asarray(v))]
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# --- commands ------------------------------------------------------------------


def cmd_optimize(cfg: dict, base: Path, out: Path, seed: Optional[int]) -> int:
    setup = build_setup(cfg, base, seed)
    first = setup.stages[0]
    log.info("optimizing: %d steps, %d members, backend %s", first.n_steps, len(setup.members), kernels.BACKEND)

    def progress(i, obj):
        if i % 25 == 0:
            log.info("iteration %d  objective %.6f", i, obj)

    res = grape.run_stages(setup.system, setup.resonator, setup.u_desired, setup.stages, setup.members, callback=progress)
    ring = ringdown_energy(res.v_full, first.comp_start + res.compensation.n_samples - 1, first.sample_dt)
    out.mkdir(parents=True, exist_ok=True)
    write_pulse(out / "pulse.json", res.u, first, res.compensation, setup.info)
    write_waveform_csv(out / "distorted.csv", res.v_full, first.sample_dt)
    trace = ["iteration,objective"] + [f"{i},{fmt(p)}" for i, p in enumerate(res.fidelity_trace)]
    (out / "trace.csv").write_text("\n".join(trace) + "\n")
    report = {
        "fidelity": res.fidelity,
        "objective": res.objective,
        "per_member": [
            {"offset_hz": m.delta_omega / TWO_PI, "scale": m.omega1_scale, "phi": float(p)}
            for m, p in zip(setup.members, res.per_member)
        ],
        "min_member_fidelity": float(np.min(res.per_member)),
        "iterations": res.iterations,
        "converged": bool(res.converged),
        "seed": first.rng_seed,
        "config_hash": config_hash(cfg if seed is None else {**cfg, "seed_override": seed}),
        "compensation": {
            "dur_s": res.compensation.duration if res.compensation.n_samples else 0.0,
            "amplitude_re_radps": float(complex(res.compensation.amplitude).real),
            "amplitude_im_radps": float(complex(res.compensation.amplitude).imag),
            "met_tolerance": bool(res.compensation.met_tolerance),
        },
        "ringdown": {"peak_radps": ring.peak, "peak_rel_amp_max": ring.peak / first.amp_max, "energy": ring.energy},
        "system": setup.info,
    }
    _write_json(out / "report.json", report)
    print(f"fidelity {res.fidelity:.6f} after {res.iterations} iterations ({res.wall_time:.1f} s)")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _pulse_path(cfg: dict, base: Path, pulse: Optional[str], out: Path) -> Path:
    if pulse:
        return Path(pulse)
    name = _block(cfg, "analysis", required=False).get("pulse_file")
    if name:
        p = Path(name)
        return p if p.is_absolute() else base / p
    return out / "pulse.json"


def cmd_distort(cfg, base, out, seed, pulse=None) -> int:
    setup = build_setup(cfg, base, seed)
    doc = read_pulse(_pulse_path(cfg, base, pulse, out))
    _, v_full, sample_dt, _ = pulse_waveform(doc, setup)
    out.mkdir(parents=True, exist_ok=True)
    write_waveform_csv(out / "distorted.csv", v_full, sample_dt)
    return EXIT_OK


def _linspace(blk: dict, key: str, default) -> np.ndarray:
    """``{"start", "stop", "num"}`` grid spec, or an explicit list of values."""
    spec = blk.get(key)
    if spec is None:
        return np.linspace(default[0], default[1], default[2])
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"analysis.map.{key}: need start, stop, num ({exc})") from None
    return np.asarray(spec, dtype=float)


def cmd_map(cfg, base, out, seed, pulse=None) -> int:
    setup = build_setup(cfg, base, seed)
    doc = read_pulse(_pulse_path(cfg, base, pulse, out))
    _, v_full, sample_dt, n = pulse_waveform(doc, setup)
    blk = _block(cfg, "analysis", required=False).get("map", {})
    offs = _linspace(blk, "offsets_hz", (-3e6, 3e6, 121))
    scales = _linspace(blk, "scales", (0.8, 1.2, 41))
    fmap = analysis.fidelity_map(v_full[:n], setup.system, setup.u_desired, TWO_PI * offs, scales, sample_dt)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["offset_hz,scale,phi"]
    for i, f in enumerate(offs):
        lines += [f"{fmt(f)},{fmt(s)},{fmt(fmap.phi[i, j])}" for j, s in enumerate(scales)]
    (out / "map.csv").write_text("\n".join(lines) + "\n")
    _write_json(out / "map.json", {"min_phi": fmap.minimum, "mean_phi": float(fmap.phi.mean())})
    print(f"map minimum {fmap.minimum:.6f}")
    return EXIT_OK


def cmd_fid(cfg, base, out, seed, pulse=None) -> int:
    setup = build_setup(cfg, base, seed)
    if setup.system.dim != 2:
        raise ConfigError("fid needs a single-spin system")
    doc = read_pulse(_pulse_path(cfg, base, pulse, out))
    _, v_full, sample_dt, n = pulse_waveform(doc, setup)
    blk = _block(cfg, "analysis", required=False).get("fid", {})
    t2 = float(blk.get("t2_star_s", 250e-9))
    members = analysis.gaussian_ensemble(t2, int(blk.get("n_members", 201)))
    fid = analysis.simulate_fid(
        v_full[:n],
        setup.system,
        members,
        float(blk.get("t_max_s", 1e-6)),
        float(blk.get("dt_acq_s", 1e-9)),
        sample_dt,
        TWO_PI * float(blk.get("carrier_offset_hz", 0.0)),
    )
    out.mkdir(parents=True, exist_ok=True)
    lines = ["t_s,re,im"] + [f"{fmt(t)},{fmt(z.real)},{fmt(z.imag)}" for t, z in zip(fid.t, fid.signal)]
    (out / "fid.csv").write_text("\n".join(lines) + "\n")
    freq = analysis.oscillation_frequency(fid.t, fid.signal)
    _write_json(out / "fid.json", {"t2_star_s": fid.t2_star, "t_peak_s": fid.t_center, "oscillation_hz": freq})
    print(f"envelope 1/e time {fid.t2_star * 1e9:.1f} ns, oscillation {freq / 1e6:.3f} MHz")
    return EXIT_OK


def cmd_spectrum(cfg, base, out, seed, pulse=None) -> int:
    setup = build_setup(cfg, base, seed)
    doc = read_pulse(_pulse_path(cfg, base, pulse, out))
    u_tilde, v_full, sample_dt, n = pulse_waveform(doc, setup)
    pad = int(_block(cfg, "analysis", required=False).get("zero_pad_factor", 8))
    su = analysis.pulse_spectrum(u_tilde, sample_dt, pad)
    sv = analysis.pulse_spectrum(v_full[:n], sample_dt, pad)
    out.mkdir(parents=True, exist_ok=True)
    adm = analysis.admittance_curve(setup.resonator, su.freqs) if setup.resonator else np.ones_like(su.freqs)
    lines = ["freq_hz,undistorted,distorted,admittance"]
    lines += [f"{fmt(f)},{fmt(a)},{fmt(b)},{fmt(c)}" for f, a, b, c in zip(su.freqs, su.amplitude, sv.amplitude, adm)]
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n")
    summary = {}
    if setup.resonator is not None:
        summary["bandwidth_hz"] = analysis.half_power_bandwidth(setup.resonator)
    if "splitting_hz" in setup.info:
        f = setup.info["splitting_hz"]
        summary["splitting_hz"] = f
        summary["distorted_at_splitting"] = sv.at(f)
        summary["undistorted_at_splitting"] = su.at(f)
    _write_json(out / "spectrum.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def resonator_info(model: ResonatorModel) -> dict:
    tr = derive_transients(model)
    return {
        "tau_r_s": tr.tau_r,
        "gamma_per_s": tr.gamma,
        "f_scale": tr.f_scale,
        "omega_free_hz": tr.omega_free / TWO_PI,
        "bandwidth_hz": analysis.half_power_bandwidth(model),
        "q": model.q_factor,
        "f0_hz": model.omega0 / TWO_PI,
    }


def cmd_resonator_info(cfg, base, out, seed, q=None, f0_hz=None) -> int:
    if q is not None or f0_hz is not None:
        if q is None or f0_hz is None:
            raise ConfigError("--q and --f0-hz must be given together")
        model = ResonatorModel(ResonatorKind.EXPONENTIAL, float(q), TWO_PI * float(f0_hz))
    else:
        carrier = None
        if cfg.get("system", {}).get("kind") == "hyperfine":
            carrier = TWO_PI * _system(cfg)[2]["carrier_hz"]
        model = resonator_from_block(_block(cfg, "resonator"), base, carrier)
        if model is None:
            raise ConfigError("config has no resonator")
    info = resonator_info(model)
    text = json.dumps(info, indent=1, sort_keys=True)
    print(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "resonator.json").write_text(text + "\n")
    return EXIT_OK


# --- entry point ---------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bwgrape", description="Bandwidth-limited GRAPE pulse design")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="run configuration (JSON path or shipped config name)")
    p.add_argument("--out", help="output directory (default: config io.out_dir or ./out)")
    p.add_argument("--seed", type=int, help="random seed, overrides the config")
    p.add_argument("--threads", type=int, help="limit BLAS threads")
    p.add_argument("--pulse", help="pulse.json to analyze (fid, map, spectrum, distort)")
    p.add_argument("--q", type=float, help="resonator-info: loaded Q")
    p.add_argument("--f0-hz", type=float, help="resonator-info: resonance frequency in Hz")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _limit_threads(n: Optional[int], stack: contextlib.ExitStack) -> None:
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("threadpoolctl not available; --threads ignored")
        return
    stack.enter_context(threadpool_limits(limits=n))


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        with contextlib.ExitStack() as stack:
            _limit_threads(args.threads, stack)
            return _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args) -> int:
    if args.config is None:
        if args.command != "resonator-info":
            raise ConfigError("--config is required")
        cfg, base = {}, Path.cwd()
    else:
        cfg, base = load_config(args.config)
    task = cfg.get("task")
    if task is not None and task not in COMMANDS:
        raise ConfigError(f"unknown task {task!r}")
    out_dir = args.out or _block(cfg, "io", required=False).get("out_dir")
    out = Path(out_dir) if out_dir else (None if args.command == "resonator-info" else Path("out"))
    if args.command == "optimize":
        code = cmd_optimize(cfg, base, out, args.seed)
    elif args.command == "resonator-info":
        code = cmd_resonator_info(cfg, base, out, args.seed, args.q, args.f0_hz)
    else:
        handler = {"fid": cmd_fid, "map": cmd_map, "spectrum": cmd_spectrum, "distort": cmd_distort}[args.command]
        code = handler(cfg, base, out, args.seed, args.pulse)
    return code


if __name__ == "__main__":
    sys.exit(main())
