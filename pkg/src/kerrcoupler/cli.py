"""Command-line front end.

Subcommands
-----------
steady    solve and certify the classical steady state of a config
simulate  run the stochastic ensemble, emit moment CSV and a comparison
          summary against the deterministic steady state
point     full single-regime pipeline: steering report plus spectra CSV
          at each direction's optimal angle
sweep     two-parameter scan producing a long-format CSV and a heatmap
check     run the built-in oracle and invariant checks on a config

All artifacts are plain files under --out; CSV columns are fixed and
documented in the README, reals are written as %.12e, and outputs are
byte-reproducible for equal inputs and seeds.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import criteria, positive_p, spectra, steady_state
from .config import Config, GridConfig, load_config, render_resolved
from .errors import ConfigError, CouplerError, NumericalError
from .model import (CouplerParams, deterministic_drift, diffusion_matrix,
                    jacobian, noise_amplitudes)
from .pipeline import analyze
from .sweep import STATUS_OK, run_sweep

FMT = "%.12e"

_CLASS_ORDER = (criteria.NO_STEERING, criteria.SYMMETRIC,
                criteria.ASYMMETRIC_2_STEERS_1,
                criteria.ASYMMETRIC_1_STEERS_2)


def _f(x: float) -> str:
    return FMT % float(x)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as handle:
        handle.write(text)


def _grid_overrides(config: Config, args) -> GridConfig:
    g = config.grids
    updates = {}
    if args.omega_max is not None:
        updates["omega_max"] = args.omega_max
    if args.omega_points is not None:
        updates["omega_points"] = args.omega_points
    if args.theta_points is not None:
        updates["theta_points"] = args.theta_points
    return dataclasses.replace(g, **updates) if updates else g


def _grids_for(params: CouplerParams, grids: GridConfig):
    omega = criteria.default_omega_grid(
        params, omega_max=grids.omega_max, n_points=grids.omega_points,
        include_negative=grids.include_negative)
    theta = criteria.default_theta_grid(grids.theta_points)
    return omega, theta


def _report_lines(report) -> list:
    return [
        f"min_epr_12 = {_f(report.min_epr_12)}",
        f"argmin_epr_12_omega = {_f(report.argmin_epr_12[0])}",
        f"argmin_epr_12_theta = {_f(report.argmin_epr_12[1])}",
        f"min_epr_21 = {_f(report.min_epr_21)}",
        f"argmin_epr_21_omega = {_f(report.argmin_epr_21[0])}",
        f"argmin_epr_21_theta = {_f(report.argmin_epr_21[1])}",
        f"min_duan_simon_scaled = {_f(report.min_duan_simon_scaled)}",
        f"argmin_duan_simon_omega = {_f(report.argmin_duan_simon[0])}",
        f"argmin_duan_simon_theta = {_f(report.argmin_duan_simon[1])}",
        f"classification = \"{report.classification}\"",
    ]


REPORT_CSV_HEADER = ("min_epr_12,argmin_epr_12_omega,argmin_epr_12_theta,"
                     "min_epr_21,argmin_epr_21_omega,argmin_epr_21_theta,"
                     "min_duan_simon_scaled,argmin_duan_simon_omega,"
                     "argmin_duan_simon_theta,classification")


def _report_csv(report) -> str:
    row = ",".join([
        _f(report.min_epr_12), _f(report.argmin_epr_12[0]),
        _f(report.argmin_epr_12[1]),
        _f(report.min_epr_21), _f(report.argmin_epr_21[0]),
        _f(report.argmin_epr_21[1]),
        _f(report.min_duan_simon_scaled), _f(report.argmin_duan_simon[0]),
        _f(report.argmin_duan_simon[1]), report.classification,
    ])
    return REPORT_CSV_HEADER + "\n" + row + "\n"


def _parse_initial(text: str):
    from .model import PhaseSpacePoint
    try:
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 4:
            raise ValueError
    except ValueError:
        raise ConfigError("initial",
                          "expected four comma-separated reals "
                          "re(a1),im(a1),re(a2),im(a2)")
    return PhaseSpacePoint.on_manifold(complex(parts[0], parts[1]),
                                       complex(parts[2], parts[3]))


def _probe_branches(params: CouplerParams):
    """Relax from several turn-on conditions to expose multistability."""
    from .model import PhaseSpacePoint
    from .steady_state import linear_steady_state
    candidates = [PhaseSpacePoint.origin()]
    resonant1 = params.eps1 / params.gamma1
    resonant2 = params.eps2 / params.gamma2
    candidates.append(PhaseSpacePoint.on_manifold(resonant1, resonant2))
    candidates.append(PhaseSpacePoint.on_manifold(2.0 * resonant1,
                                                  2.0 * resonant2))
    try:
        linear = linear_steady_state(params)
        candidates.append(linear)
        candidates.append(PhaseSpacePoint.on_manifold(1j * linear.a1,
                                                      1j * linear.a2))
    except np.linalg.LinAlgError:
        pass
    branches = []
    for k, initial in enumerate(candidates):
        try:
            result = steady_state.relax_to_steady_state(params,
                                                        initial=initial)
        except NumericalError:
            if k == 0:
                raise       # failure from the physical turn-on condition
            continue
        if not any(np.linalg.norm(result.point.to_array()
                                  - b.point.to_array())
                   <= 1e-6 * (1.0 + b.point.norm()) for b in branches):
            branches.append(result)
    return branches


def cmd_steady(args) -> int:
    config = load_config(args.config)
    if args.initial is not None:
        result = steady_state.relax_to_steady_state(
            config.params, initial=_parse_initial(args.initial))
    else:
        branches = _probe_branches(config.params)
        if len(branches) > 1:
            print("multiple steady-state branches found; rerun with "
                  "--initial re(a1),im(a1),re(a2),im(a2) to select one:",
                  file=sys.stderr)
            for k, b in enumerate(branches):
                print(f"  branch {k}: a1={b.point.a1:.6g} "
                      f"a2={b.point.a2:.6g} stable={b.stable}",
                      file=sys.stderr)
            return 2
        result = branches[0]
    point = result.point
    lines = ["[steady]"]
    for name, val in (("a1", point.a1), ("a1p", point.a1p),
                      ("a2", point.a2), ("a2p", point.a2p)):
        lines.append(f"{name} = [{_f(val.real)}, {_f(val.imag)}]")
    lines.append(f"residual_norm = {_f(result.residual_norm)}")
    for k, ev in enumerate(result.eigenvalues):
        lines.append(f"eigenvalue_{k} = [{_f(ev.real)}, {_f(ev.imag)}]")
    lines.append(f"stable = {'true' if result.stable else 'false'}")
    text = "\n".join(lines) + "\n"
    out = Path(args.out)
    _write(out / "steady.txt", text)
    _write(out / "resolved_config.toml", render_resolved(config))
    print(text, end="")
    print(f"wrote {out / 'steady.txt'}")
    return 0


MOMENTS_CSV_HEADER = ("time,re_mean_a1,im_mean_a1,se_a1,"
                      "re_mean_a2,im_mean_a2,se_a2,"
                      "re_n1,im_n1,se_n1,re_n2,im_n2,se_n2")


def moments_csv(series) -> str:
    rows = [MOMENTS_CSV_HEADER]
    for k in range(len(series.times)):
        rows.append(",".join([
            _f(series.times[k]),
            _f(series.mean_a1[k].real), _f(series.mean_a1[k].imag),
            _f(series.se_a1[k]),
            _f(series.mean_a2[k].real), _f(series.mean_a2[k].imag),
            _f(series.se_a2[k]),
            _f(series.n1[k].real), _f(series.n1[k].imag),
            _f(series.se_n1[k]),
            _f(series.n2[k].real), _f(series.n2[k].imag),
            _f(series.se_n2[k]),
        ]))
    return "\n".join(rows) + "\n"


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    if config.ensemble is None:
        raise ConfigError("ensemble", "section required for simulate")
    cfg = config.ensemble
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    series = positive_p.simulate_ensemble(config.params, cfg,
                                          threads=max(args.threads, 1))
    out = Path(args.out)
    _write(out / "moments.csv", moments_csv(series))
    _write(out / "resolved_config.toml",
           render_resolved(dataclasses.replace(config, ensemble=cfg)))

    lines = [
        f"n_traj = {series.n_traj}",
        f"diverged_count = {series.diverged_count}",
        f"diverged_fraction = {_f(series.diverged_fraction)}",
        f"unreliable = {'true' if series.unreliable else 'false'}",
    ]
    try:
        steady = steady_state.relax_to_steady_state(config.params)
        moments = positive_p.steady_moment_estimate(series)
        comparison = positive_p.compare_to_steady(moments, steady.point)
        for key, row in comparison.items():
            lines.append(f"z_{key} = {_f(row['z'])}")
            lines.append(f"difference_{key} = {_f(row['abs_difference'])}")
            lines.append(f"standard_error_{key} = "
                         f"{_f(row['standard_error'])}")
    except CouplerError as exc:
        lines.append(f"steady_state_comparison = \"unavailable: {exc}\"")
    _write(out / "summary.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {out / 'moments.csv'}")
    if series.unreliable:
        print("warning: diverged fraction above 0.1%; summary flagged",
              file=sys.stderr)
        return 3
    return 0


def cmd_point(args) -> int:
    config = load_config(args.config)
    grids = _grid_overrides(config, args)
    omega_grid, theta_grid = _grids_for(config.params, grids)
    result = analyze(config.params, omega_grid=omega_grid,
                     theta_grid=theta_grid)
    report = result.report

    thetas = np.array([report.argmin_epr_12[1], report.argmin_epr_21[1],
                       report.argmin_duan_simon[1]])
    epr12_c, _, _ = criteria.evaluate_grid(result.model, omega_grid,
                                           thetas[:1])
    _, epr21_c, _ = criteria.evaluate_grid(result.model, omega_grid,
                                           thetas[1:2])
    _, _, duan_c = criteria.evaluate_grid(result.model, omega_grid,
                                          thetas[2:3])
    rows = ["omega,epr_12,epr_21,duan_simon_scaled"]
    for k, w in enumerate(omega_grid):
        rows.append(",".join([_f(w), _f(epr12_c[k, 0]), _f(epr21_c[k, 0]),
                              _f(duan_c[k, 0])]))
    out = Path(args.out)
    _write(out / "point_spectra.csv", "\n".join(rows) + "\n")

    resolved = render_resolved(dataclasses.replace(config, grids=grids))
    report_text = resolved + "\n[report]\n" + "\n".join(
        _report_lines(report)) + "\n"
    _write(out / "report.txt", report_text)
    _write(out / "report.csv", _report_csv(report))
    _write(out / "resolved_config.toml", resolved)
    _plot_point(out / "point_spectra.svg", omega_grid,
                epr12_c[:, 0], epr21_c[:, 0], duan_c[:, 0])
    print("\n".join(_report_lines(report)))
    print(f"wrote {out / 'report.txt'}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if config.sweep is None:
        raise ConfigError("sweep", "section required for sweep")
    grids = _grid_overrides(config, args)
    grid = run_sweep(config.sweep, grids=grids,
                     threads=max(args.threads, 1))

    values = grid.observable_values()
    is_class = config.sweep.observable == "classification"
    rows = ["axis1,axis2,value,status"]
    for i, x1 in enumerate(grid.axis1_values):
        for j, x2 in enumerate(grid.axis2_values):
            stat = grid.status[i, j]
            if stat != STATUS_OK:
                value = ""
            elif is_class:
                value = values[i, j]
            else:
                value = _f(values[i, j])
            rows.append(f"{_f(x1)},{_f(x2)},{value},{stat}")
    out = Path(args.out)
    _write(out / "sweep.csv", "\n".join(rows) + "\n")

    rows = ["axis1,axis2,min_epr_12,min_epr_21,min_duan_simon_scaled,"
            "classification,status"]
    for i, x1 in enumerate(grid.axis1_values):
        for j, x2 in enumerate(grid.axis2_values):
            stat = grid.status[i, j]
            if stat == STATUS_OK:
                rows.append(",".join([
                    _f(x1), _f(x2), _f(grid.min_epr_12[i, j]),
                    _f(grid.min_epr_21[i, j]),
                    _f(grid.min_duan_simon[i, j]),
                    grid.classification[i, j], stat]))
            else:
                rows.append(f"{_f(x1)},{_f(x2)},,,,,{stat}")
    _write(out / "sweep_report.csv", "\n".join(rows) + "\n")
    _write(out / "resolved_config.toml",
           render_resolved(dataclasses.replace(config, grids=grids)))
    _plot_sweep(out / "sweep.svg", grid, is_class)

    n_ok = int((grid.status == STATUS_OK).sum())
    print(f"sweep finished: {n_ok}/{grid.status.size} cells ok")
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_check(args) -> int:
    config = load_config(args.config)
    grids = _grid_overrides(config, args)
    params = config.params
    checks = []

    steady = steady_state.relax_to_steady_state(params)
    point = steady.point
    scale = 1.0 + point.norm()
    checks.append(("steady_residual", steady.residual_norm <= 1e-9 * scale,
                   f"residual {steady.residual_norm:.3e}"))
    checks.append(("conjugate_manifold", point.conjugate_defect() <= 1e-9,
                   f"defect {point.conjugate_defect():.3e}"))
    checks.append(("stability", steady.stable,
                   f"max Re eig {steady.eigenvalues.real.max():.3e}"))

    jac = jacobian(params, point)
    state = point.to_array()
    step = 1e-6 * (1.0 + np.abs(state).max())
    err = 0.0
    for col in range(4):
        up = state.copy()
        dn = state.copy()
        up[col] += step
        dn[col] -= step
        from .model import PhaseSpacePoint
        fd = (deterministic_drift(params, PhaseSpacePoint.from_array(up))
              - deterministic_drift(params,
                                    PhaseSpacePoint.from_array(dn))) \
            / (2.0 * step)
        err = max(err, float(np.max(np.abs(fd - jac[:, col])
                                    / (1.0 + np.abs(jac[:, col])))))
    checks.append(("jacobian_fd", err < 1e-6, f"max rel err {err:.3e}"))

    b = noise_amplitudes(params, point)
    d = diffusion_matrix(params, point).d
    recon = float(np.abs(b @ b.T - d).max())
    bound = 1e-12 * (1.0 + float(np.abs(d).max()))
    checks.append(("noise_reconstruction", recon <= bound,
                   f"|BB^T - D| {recon:.3e}"))

    if steady.stable:
        model = spectra.linearize(params, point)
        cov = spectra.static_covariance(model)
        integral = spectra.spectral_integral(model)
        ref = float(np.abs(cov).max())
        spec_err = float(np.abs(integral - cov).max()) / ref if ref > 0 \
            else 0.0
        checks.append(("spectral_vs_lyapunov", spec_err < 1e-3,
                       f"rel err {spec_err:.3e}"))

        omega_grid, theta_grid = _grids_for(params, grids)
        sample_w = omega_grid[:: max(len(omega_grid) // 40, 1)]
        sample_t = theta_grid[:: max(len(theta_grid) // 24, 1)]
        v = spectra.output_covariance_grid(model, sample_w, sample_t)
        products = np.minimum(v[..., 0, 0] * v[..., 1, 1],
                              v[..., 2, 2] * v[..., 3, 3])
        checks.append(("uncertainty_bound",
                       bool((products >= 1.0 - 1e-9).all()),
                       f"min V(X)V(Y) {products.min():.6f}"))

    failed = [name for name, ok, _ in checks if not ok]
    for name, ok, detail in checks:
        print(f"check {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return 3 if failed else 0


def _plot_point(path: Path, omega, epr12, epr21, duan) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib unavailable; skipping plot", file=sys.stderr)
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(omega, epr12, label="epr_12 (at its optimal angle)")
    ax.plot(omega, epr21, label="epr_21 (at its optimal angle)")
    ax.plot(omega, duan, label="duan_simon_scaled")
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel("frequency (units of gamma1)")
    ax.set_ylabel("criterion value")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_sweep(path: Path, grid, is_class: bool) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        from matplotlib import colors
    except ImportError:
        print("matplotlib unavailable; skipping plot", file=sys.stderr)
        return
    fig, ax = plt.subplots(figsize=(6, 5))
    x = grid.axis2_values
    y = grid.axis1_values
    ok = grid.status == STATUS_OK
    if is_class:
        index = {name: k for k, name in enumerate(_CLASS_ORDER)}
        z = np.full(grid.status.shape, np.nan)
        for i in range(z.shape[0]):
            for j in range(z.shape[1]):
                if ok[i, j]:
                    z[i, j] = index[grid.classification[i, j]]
        cmap = colors.ListedColormap(
            ["#bbbbbb", "#1f77b4", "#d62728", "#ff7f0e"])
        norm = colors.BoundaryNorm(np.arange(-0.5, 4.5), cmap.N)
        mesh = ax.pcolormesh(x, y, np.ma.masked_invalid(z), cmap=cmap,
                             norm=norm, shading="nearest")
        bar = fig.colorbar(mesh, ax=ax, ticks=range(4))
        bar.ax.set_yticklabels(_CLASS_ORDER, fontsize=7)
    else:
        z = np.ma.masked_invalid(grid.observable_values().astype(float))
        mesh = ax.pcolormesh(x, y, z, shading="nearest")
        fig.colorbar(mesh, ax=ax, label=grid.spec.observable)
    if grid.spec.axis2.scale == "log":
        ax.set_xscale("log")
    if grid.spec.axis1.scale == "log":
        ax.set_yscale("log")
    ax.set_xlabel(grid.spec.axis2.name)
    ax.set_ylabel(grid.spec.axis1.name)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrcoupler",
        description="Steering analysis of the driven Kerr nonlinear coupler")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("steady", cmd_steady), ("simulate", cmd_simulate),
                     ("point", cmd_point), ("sweep", cmd_sweep),
                     ("check", cmd_check)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--initial", default=None,
                       help="steady: relax from re(a1),im(a1),re(a2),im(a2) "
                            "instead of probing turn-on conditions")
        p.add_argument("--seed", type=int, default=None,
                       help="override the ensemble seed")
        p.add_argument("--threads", type=int, default=0,
                       help="worker threads (0 = auto)")
        p.add_argument("--omega-max", type=float, default=None)
        p.add_argument("--omega-points", type=int, default=None)
        p.add_argument("--theta-points", type=int, default=None)
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads == 0:
        import os
        args.threads = os.cpu_count() or 1
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
