"""Command line: ``qbl simulate|steady-states|validate|spectrum``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import hilbert as hb
from . import observables as obs
from .config import ConfigError, RunConfig, parse_config, serialize
from .evolve import IntegrationError, SteadyStateError, make_generator, run_protocol, sector_steady_states
from .io import FormatError, write_matrix, write_rows_csv, write_trajectory_csv
from .model import build_hamiltonian, labelled_spectrum

log = logging.getLogger("qbl")


def _load(args) -> RunConfig:
    return parse_config(args.config) if args.config else RunConfig()


def output_dir(args, cfg: RunConfig) -> Path:
    """--out, then $QBL_OUT, then the config's output.directory."""
    out = args.out or os.environ.get("QBL_OUT") or cfg.output.directory
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args, cfg: RunConfig) -> int:
    schedule = cfg.schedule()
    if args.regions:
        schedule = schedule.only([r.strip() for r in args.regions.split(",") if r.strip()])
    out = output_dir(args, cfg)
    try:
        traj = run_protocol(
            cfg.model_params(), schedule, cfg.baths(),
            include_lamb_shift=cfg.toggles.include_lamb_shift, secular=cfg.toggles.secular,
        )
    except (IntegrationError, SteadyStateError) as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 1
    csv_path = write_trajectory_csv(out / "trajectory.csv", traj)
    (out / "config_used.toml").write_text(serialize(cfg))
    written = [csv_path]
    if cfg.output.emit_plot_script:
        from .plotting import write_gnuplot_script

        written.append(write_gnuplot_script(out, csv_path.name))
    if cfg.output.render_figures:
        from .plotting import render_trajectory

        written.append(render_trajectory(csv_path, out / "trajectory.png"))
    last = len(traj) - 1
    print(f"{len(traj)} samples up to t = {traj.times[-1]:.6g} ({traj.time_ps[-1]:.6g} ps)")
    print(f"final energy {traj.energy[last]:.8g} cm^-1, ergotropy {traj.ergotropy[last]:.8g} cm^-1, "
          f"<N> {traj.n_expect[last]:.3g}")
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_steady_states(args, cfg: RunConfig) -> int:
    params = cfg.model_params()
    if params.gamma_sink > 0:
        log.info("sink disabled for the steady-state search (it couples excitation sectors)")
    params = params.with_region(params.chi, 0.0)
    gen = make_generator(params, cfg.baths(), cfg.toggles.include_lamb_shift, cfg.toggles.secular)
    try:
        states = sector_steady_states(gen)
    except (SteadyStateError, ValueError) as exc:
        print(f"steady-states: {exc}", file=sys.stderr)
        return 1
    out = output_dir(args, cfg)
    h = gen.hamiltonian
    rows = []
    for s in states:
        rep = obs.report(s.rho, h, gen.eig)
        header = [
            f"sector = {s.n}",
            f"energy_cm1 = {rep.energy:.12g}",
            f"ergotropy_cm1 = {rep.ergotropy:.12g}",
            f"passive_energy_cm1 = {rep.passive_energy:.12g}",
            f"n_expect = {rep.n_expect:.12g}",
            f"purity = {rep.purity:.12g}",
            "populations = " + " ".join(f"{x:.12g}" for x in rep.populations),
            f"gap_ratio = {s.gap_ratio:.6g}",
        ]
        write_matrix(out / f"steady_state_n{s.n}.txt", s.rho, header)
        rows.append([s.n, rep.energy, rep.ergotropy, rep.passive_energy, rep.n_expect,
                     rep.purity, *rep.populations, s.gap_ratio])
    write_rows_csv(
        out / "steady_states.csv",
        ["sector", "energy_cm1", "ergotropy_cm1", "passive_energy_cm1", "n_expect", "purity",
         *(f"pop{i}" for i in range(1, 7)), "gap_ratio"],
        rows,
    )
    print(f"{len(states)} steady states")
    for r in rows:
        print(f"  N = {r[0]}: energy {r[1]:.8g} cm^-1, ergotropy {r[2]:.8g} cm^-1")
    print(f"wrote {out}")
    return 0


def cmd_validate(args, cfg: RunConfig) -> int:
    from .validation import format_table, run_checks

    results = run_checks(cfg, quick=args.quick)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_spectrum(args, cfg: RunConfig) -> int:
    h = build_hamiltonian(cfg.model_params())
    energies, sectors, parities = labelled_spectrum(h)
    out = output_dir(args, cfg)
    write_rows_csv(out / "spectrum.csv", ["level", "energy_cm1", "sector", "parity"],
                   [[k, float(e), int(n), int(p)] for k, (e, n, p) in enumerate(zip(energies, sectors, parities))])
    one = sectors == 1
    write_rows_csv(out / "single_excitation.csv", ["level", "energy_cm1", "parity"],
                   [[k, float(e), int(p)] for k, (e, p) in enumerate(zip(energies[one], parities[one]))])
    print(f"E_min = {energies[0]:.10g} cm^-1 (sector {sectors[0]}), E_max = {energies[-1]:.10g} cm^-1")
    print("single excitation: " + ", ".join(
        f"{e:.6g} ({'+' if p > 0 else '-'})" for e, p in zip(energies[one], parities[one])))
    print(f"wrote {out / 'spectrum.csv'} and {out / 'single_excitation.csv'}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "steady-states": cmd_steady_states,
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qbl", description="para-Benzene quantum battery simulator")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="TOML run configuration (defaults used when omitted)")
    ap.add_argument("--regions", help="comma-separated region labels for simulate, e.g. I,II")
    ap.add_argument("--quick", action="store_true", help="validate: run only the fast checks")
    ap.add_argument("--out", help="output directory (overrides $QBL_OUT and the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, FormatError) as exc:
        print(f"qbl: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"qbl {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
