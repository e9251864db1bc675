"""``tbf`` command-line front end.

Every command writes plot-ready CSV/JSON files plus ``manifest.json`` into
``--out``. Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from tbf import __version__, fock, kernels
from tbf.config import ExperimentConfig, load_experiment_config
from tbf.dynamics import (
    InitialState,
    NumericalInstabilityError,
    StarkInjection,
    generation_efficiency,
    integrate,
    run_timebin_protocol,
)
from tbf.pulses import Grid, build_timebin_sequence, coupling_pulse, default_sequence_spec
from tbf.system import TWO_PI, ConfigError, PhaseCoherenceError, lossless
from tbf.tomography import (
    CARDINAL_STATES,
    ChannelStack,
    MeasurementSettings,
    MonotonicityError,
    bootstrap,
    build_povm,
    mle_from_counts,
    prepare_and_measure,
    qubit_fidelity,
    sample_quadratures,
)
from tbf.tomography.analysis import derived_seed, encode

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SQ2 = 1 / math.sqrt(2)


class UsageError(ConfigError):
    pass


# --- output helpers -------------------------------------------------------


class Outputs:
    def __init__(self, out: Path):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def json(self, name: str, obj) -> Path:
        path = self.dir / name
        path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")
        self.files.append(path)
        return path

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.dir / name
        with path.open("w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(x) for x in row) + "\n")
        self.files.append(path)
        return path

    def add(self, path: Path) -> None:
        self.files.append(Path(path))


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(outs: Outputs, command: str, options: dict, cfg: ExperimentConfig, started: float) -> Path:
    manifest = {
        "command": command,
        "options": options,
        "config": cfg.source_text,
        "code_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "seed": cfg.seed,
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_s": time.time() - started,
        "outputs": [{"path": p.name, "sha256": sha256(p), "bytes": p.stat().st_size} for p in outs.files],
    }
    path = outs.dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


# --- commands -------------------------------------------------------------


def _parse_complex_list(text: str) -> list[complex]:
    try:
        return [complex(x.strip().replace(" ", "")) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse amplitude list {text!r}") from None


def _stark(cfg: ExperimentConfig) -> StarkInjection | None:
    c = cfg.pulse.coupling
    return StarkInjection(cfg.pulse.stark_coeff, c.peak_geff) if cfg.pulse.stark_coeff else None


def cmd_generate(args, cfg: ExperimentConfig, outs: Outputs) -> dict:
    amps = _parse_complex_list(args.init)
    if len(amps) != 3:
        raise UsageError("--init needs three amplitudes C_0,C_1,C_2")
    try:
        init = InitialState(*amps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dt = args.dt or cfg.pulse.dt
    spec = default_sequence_spec(cfg.pulse.coupling, cfg.pulse.bin_separation, cfg.pulse.window, dt=dt / 2)
    seq = build_timebin_sequence(spec)
    res = run_timebin_protocol(init, seq, cfg.system, dt=dt, stark=_stark(cfg))
    f = res.f0t.samples
    t = res.times
    pops = res.populations
    cols = [pops[k] for k in ("P_g0", "P_e0", "P_f0", "P_g1")]
    outs.csv("trace.csv", ["t_s", "re_f", "im_f", "P_g0", "P_e0", "P_f0", "P_g1"], zip(t, f.real, f.imag, *cols))
    early = t < res.swap_time
    power = np.abs(f) ** 2
    eff = generation_efficiency(cfg.system, cfg.pulse.coupling, cfg.pulse.window, cfg.pulse.dt, stark=_stark(cfg))
    summary = {
        "init": [[a.real, a.imag] for a in amps],
        "swap_time_s": res.swap_time,
        "emitted_early": float(np.trapezoid(power[early], t[early])) if early.sum() > 1 else 0.0,
        "emitted_late": float(np.trapezoid(power[~early], t[~early])) if (~early).sum() > 1 else 0.0,
        "final_populations": {k: float(v[-1]) for k, v in pops.items()},
        "eta_gen": eff.eta_gen,
        "P_e0_sc": eff.P_e0_sc,
    }
    outs.json("summary.json", summary)
    print(f"eta_gen={eff.eta_gen:.4f} emitted_early={summary['emitted_early']:.4f} emitted_late={summary['emitted_late']:.4f}")
    return summary


def cmd_efficiency(args, cfg: ExperimentConfig, outs: Outputs) -> dict:
    p = lossless(cfg.system) if args.lossless else cfg.system
    pulse = cfg.pulse.coupling
    if args.width is not None:
        pulse = replace(pulse, width=args.width)
    eff = generation_efficiency(p, pulse, cfg.pulse.window, args.dt or cfg.pulse.dt, stark=_stark(cfg))
    report = {
        "eta_gen": eff.eta_gen,
        "P_e0_sc": eff.P_e0_sc,
        "p_e0_abs": eff.p_e0_abs,
        "p_f0_left": eff.p_f0_left,
        "emitted": eff.emitted,
        "lossless": bool(args.lossless),
        "width_s": pulse.width,
    }
    outs.json("efficiency.json", report)
    print(f"eta_gen={eff.eta_gen:.4f} P_e0_sc={eff.P_e0_sc:.4f}")
    return report


def parse_state(spec: str, cutoff: int):
    """``fock:N``, ``singlerail:<label|a,b>`` or ``timebin:<label|a,b>`` -> (kind, amplitudes, qubit)."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if not rest:
        raise UsageError(f"state {spec!r} needs the form kind:value")
    if kind == "fock":
        try:
            n = int(rest)
        except ValueError:
            raise UsageError(f"bad photon number in {spec!r}") from None
        if not 0 <= n <= cutoff:
            raise UsageError(f"photon number {n} outside cutoff {cutoff}")
        v = np.zeros(cutoff + 1)
        v[n] = 1
        return "fock", v, None
    kinds = {"singlerail": "single-rail", "timebin": "time-bin"}
    if kind not in kinds:
        raise UsageError(f"unknown state kind {kind!r}")
    if rest in CARDINAL_STATES:
        ab = CARDINAL_STATES[rest]
    else:
        ab = _parse_complex_list(rest)
        if len(ab) != 2:
            raise UsageError("qubit amplitude list needs two entries")
        nrm = math.sqrt(abs(ab[0]) ** 2 + abs(ab[1]) ** 2)
        if nrm == 0:
            raise UsageError("all-zero amplitudes")
        ab = (ab[0] / nrm, ab[1] / nrm)
    return kinds[kind], encode(kinds[kind], *ab, cutoff), ab


def wigner_grid(rho, half_width=4.0, step=0.1):
    q = np.round(np.arange(-half_width, half_width + step / 2, step), 10)
    return q, fock.wigner(rho, q, q)


def cmd_tomography(args, cfg: ExperimentConfig, outs: Outputs) -> dict:
    tc = cfg.tomography
    cutoff = args.cutoff or tc.cutoff
    kind, amps, qubit = parse_state(args.state, cutoff)
    modes = 2 if kind == "time-bin" else 1
    eta = tc.eta_meas if args.eta is None else args.eta
    n = args.samples or (tc.samples_two_mode if modes == 2 else tc.samples_single_mode)
    n_boot = tc.bootstrap_two_mode if modes == 2 else tc.bootstrap_single_mode
    if args.bootstrap is not None:
        n_boot = args.bootstrap
    try:
        stack = ChannelStack(loss=args.loss, drift=args.drift)
        settings = MeasurementSettings.grid(args.phases or tc.n_phases, modes, samples=n, eta=eta, seed=cfg.seed)
        target = fock.pure_state(amps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.wigner and modes != 1:
        raise UsageError("--wigner needs a single-mode state")
    rho = stack.apply(target)
    data = sample_quadratures(rho, settings, drift=stack.sampler_drift, label=args.state)
    if args.save_data:
        outs.add(data.save(outs.dir / "dataset.csv"))
        outs.add(outs.dir / "dataset.csv.json")
    povm = build_povm(settings, cutoff)
    res = mle_from_counts(data.counts(povm.edges), povm)

    def metrics(state) -> dict:
        if kind == "fock":
            m = {"fidelity": fock.fidelity(state, amps)}
        else:
            m = {"fidelity": qubit_fidelity(kind, state, *qubit, loss_correct=False)}
            if kind == "time-bin" and args.loss_correct:
                m["fidelity_corrected"] = qubit_fidelity(kind, state, *qubit, loss_correct=True)
        if args.wigner:
            m["wigner_origin"] = float(fock.wigner(state, [0.0], [0.0])[0, 0])
        return m

    full = metrics(res.state)
    rows = []
    if n_boot >= 2:

        def est(d):
            r = mle_from_counts(d.counts(povm.edges), povm, rho0=res.state.matrix)
            return metrics(r.state)

        bs = bootstrap(data, est, n_boot, seed=derived_seed(cfg.seed, 0xB5))
        for k, v in full.items():
            s = bs[k].std
            rows.append([k, v, s, v - 3 * s, v + 3 * s])
    else:
        rows = [[k, v, "nan", "nan", "nan"] for k, v in full.items()]
    outs.csv("fidelity.csv", ["quantity", "value", "std", "lower3", "upper3"], rows)
    fock.save_state(res.state, outs.dir / "rho.json")
    outs.add(outs.dir / "rho.json")
    diag = res.diagnostics()
    diag.update(samples_per_setting=n, settings=settings.n_settings, eta_meas=eta, cutoff=cutoff, bootstrap=n_boot)
    outs.json("diagnostics.json", diag)
    if args.wigner:
        q, w = wigner_grid(res.state)
        qq, pp = np.meshgrid(q, q, indexing="ij")
        outs.csv("wigner.csv", ["q", "p", "W"], zip(qq.ravel(), pp.ravel(), w.ravel()))
    for k, v in full.items():
        print(f"{k}={v:.4f}")
    return full


def cmd_phase_reference(args, cfg: ExperimentConfig, outs: Outputs) -> dict:
    tc = cfg.tomography
    eta = tc.eta_meas if args.eta is None else args.eta
    rows = []
    table = {}
    for i, (kind, modes) in enumerate((("single-rail", 1), ("time-bin", 2))):
        n = args.samples or (tc.samples_two_mode if modes == 2 else tc.samples_single_mode)
        n_boot = args.bootstrap if args.bootstrap is not None else (tc.bootstrap_two_mode if modes == 2 else tc.bootstrap_single_mode)
        for j, (clock, drift) in enumerate((("shared", "none"), ("separate", "per-shot-uniform"))):
            settings = MeasurementSettings.grid(tc.n_phases, modes, samples=n, eta=eta, seed=derived_seed(cfg.seed, i, j))
            row = prepare_and_measure(kind, "+", ChannelStack(args.loss, drift), settings, tc.cutoff, True, n_boot)
            rows.append([kind, clock, row.fidelity, row.std, row.lower3, row.upper3])
            table[f"{kind}/{clock}"] = row.fidelity
            print(f"{kind:12s} {clock:9s} F={row.fidelity:.4f} +- {3 * row.std:.4f} (3 sigma)")
    outs.csv("phase_reference.csv", ["encoding", "clock", "fidelity", "std", "lower3", "upper3"], rows)
    outs.json("phase_reference.json", table)
    return table


def chirp_sweep(cfg: ExperimentConfig, c_stark: float, c_values, dt: float | None = None) -> np.ndarray:
    """Final ground-state population after one coupling pulse from |f0>, per chirp coefficient (rad/s)."""
    base = cfg.pulse.coupling
    dt = dt or cfg.pulse.dt
    window = cfg.pulse.window
    grid = Grid.spanning(0.0, window, dt / 2)
    stark = StarkInjection(c_stark, base.peak_geff) if c_stark else None
    init = InitialState(0.0, 0.0, 1.0)
    out = np.empty(len(c_values))
    for k, c in enumerate(c_values):
        g = coupling_pulse(replace(base, chirp_coeff=float(c)), grid)
        res = integrate(init, g, cfg.system, window, dt=dt, stark=stark)
        pops = res.populations
        out[k] = pops["P_g0"][-1] + pops["P_g1"][-1]
    return out


def cmd_chirp_sweep(args, cfg: ExperimentConfig, outs: Outputs) -> dict:
    c_stark_mhz = cfg.pulse.stark_coeff / TWO_PI / 1e6 if args.c_stark is None else args.c_stark
    if not args.step > 0 or not args.stop > args.start:
        raise UsageError("need start < stop and a positive step")
    c_mhz = np.round(np.arange(args.start, args.stop + args.step / 2, args.step), 10)
    p_g = chirp_sweep(cfg, TWO_PI * 1e6 * c_stark_mhz, TWO_PI * 1e6 * c_mhz, args.dt)
    norm = p_g / p_g.max()
    k = int(np.argmax(p_g))
    outs.csv("chirp_sweep.csv", ["c_ch_mhz", "p_g", "p_g_normalized"], zip(c_mhz, p_g, norm))
    summary = {"c_stark_mhz": c_stark_mhz, "argmax_c_ch_mhz": float(c_mhz[k]), "step_mhz": args.step, "p_g_max": float(p_g[k])}
    outs.json("chirp_sweep.json", summary)
    print(f"argmax C_ch = {c_mhz[k]:+.3f} (2 pi MHz), C_stark = {c_stark_mhz:+.3f}")
    return summary


COMMANDS = {
    "generate": cmd_generate,
    "efficiency": cmd_efficiency,
    "tomography": cmd_tomography,
    "phase-reference": cmd_phase_reference,
    "chirp-sweep": cmd_chirp_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tbf", description="Time-bin photonic qubit simulator and tomography toolkit.")
    ap.add_argument("--version", action="version", version=f"tbf {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="INI file (default: shipped device parameters)")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: ./tbf-<command>)")
        p.add_argument("--seed", type=int, default=None, help="RNG seed; overrides TBF_SEED and [run] seed")
        p.add_argument("--paper-scale", action="store_true", help="10^4 samples per setting and 250 bootstrap resamples")

    p = sub.add_parser("generate", help="two-bin emission trace f(0, t)")
    common(p)
    p.add_argument("--init", default=f"{SQ2!r},0.5,0.5", help="initial amplitudes C_0,C_1,C_2 of |g0>,|e0>,|f0>")
    p.add_argument("--dt", type=float, default=None, help="RK4 step in seconds")

    p = sub.add_parser("efficiency", help="single-bin generation efficiency")
    common(p)
    p.add_argument("--lossless", action="store_true", help="drop internal loss and transmon decoherence")
    p.add_argument("--width", type=float, default=None, help="coupling pulse width in seconds")
    p.add_argument("--dt", type=float, default=None, help="RK4 step in seconds")

    p = sub.add_parser("tomography", help="sample, reconstruct and score one state")
    common(p)
    p.add_argument("--state", required=True, help="fock:N, singlerail:<0|1|+|-|+i|-i|a,b> or timebin:<...>")
    p.add_argument("--drift", choices=("none", "uniform", "per-shot-uniform"), default="none", help="common phase drift")
    p.add_argument("--loss", type=float, default=1.0, help="channel transmissivity per mode before measurement")
    p.add_argument("--eta", type=float, default=None, help="measurement efficiency")
    p.add_argument("--loss-correct", action="store_true", help="also report the single-photon-subspace fidelity")
    p.add_argument("--wigner", action="store_true", help="write the Wigner function of a single-mode reconstruction")
    p.add_argument("--samples", type=int, default=None, help="samples per setting")
    p.add_argument("--phases", type=int, default=None, help="quadrature phases per mode")
    p.add_argument("--cutoff", type=int, default=None, help="Fock cutoff per mode")
    p.add_argument("--bootstrap", type=int, default=None, help="bootstrap resamples (0 disables)")
    p.add_argument("--save-data", action="store_true", help="write the sampled quadratures")

    p = sub.add_parser("phase-reference", help="shared vs separate clock fidelities for single-rail and time-bin |+>")
    common(p)
    p.add_argument("--loss", type=float, default=1.0, help="channel transmissivity per mode")
    p.add_argument("--eta", type=float, default=None, help="measurement efficiency")
    p.add_argument("--samples", type=int, default=None, help="samples per setting")
    p.add_argument("--bootstrap", type=int, default=None, help="bootstrap resamples per row")

    p = sub.add_parser("chirp-sweep", help="ground-state transfer versus chirp coefficient")
    common(p)
    p.add_argument("--c-stark", type=float, default=None, help="injected Stark coefficient in 2 pi MHz (default: config)")
    p.add_argument("--start", type=float, default=-3.0, help="first chirp coefficient in 2 pi MHz")
    p.add_argument("--stop", type=float, default=1.0, help="last chirp coefficient in 2 pi MHz")
    p.add_argument("--step", type=float, default=0.02, help="sweep step in 2 pi MHz")
    p.add_argument("--dt", type=float, default=None, help="RK4 step in seconds")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_experiment_config(args.config, args.seed)
        if args.paper_scale:
            cfg = replace(cfg, tomography=cfg.tomography.paper_scale())
        outs = Outputs(args.out or Path(f"tbf-{args.command}"))
        COMMANDS[args.command](args, cfg, outs)
        options = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
        write_manifest(outs, args.command, options, cfg, started)
    except (ConfigError, PhaseCoherenceError) as exc:
        print(f"tbf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalInstabilityError, MonotonicityError, fock.StateError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"tbf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
